"""Experiment orchestration and deterministic output files."""
from __future__ import annotations

import csv
import json
import platform
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, serialize_config
from .fluxes import HomogeneousFlux
from .homogeneous import Trajectory, run_homogeneous, theorem_bound
from .inhomogeneous import InhomogeneousTrajectory, run_inhomogeneous
from .kinetic import ScalarField, l1_distance
from .oracles import (
    ConvergenceTable,
    bgk_run,
    godunov_run,
    riemann_l1_error,
    self_convergence_study,
)
from .paths import DriverPath, TimePartition, generate_for_partition

ORACLES = ("riemann", "godunov", "bgk", "timechange")


@dataclass
class Setup:
    """Everything a run needs, built once from a config."""

    cfg: ExperimentConfig
    u0: ScalarField
    flux: object
    vgrid: object
    path: DriverPath

    @property
    def inhomogeneous(self) -> bool:
        return not isinstance(self.flux, HomogeneousFlux)

    def run(self, p: TimePartition, snapshot_times=()) -> Trajectory:
        if self.inhomogeneous:
            return run_inhomogeneous(
                self.u0, self.flux, self.vgrid, self.path, p, snapshot_times, h=self.cfg.integrator_step
            )
        return run_homogeneous(self.u0, self.flux, self.vgrid, self.path, p, snapshot_times)

    def bound(self, dz: float) -> float:
        if self.inhomogeneous or self.u0.grid.dimension != 1:
            return float("nan")
        return theorem_bound(self.u0, self.flux, dz, variant=self.cfg.bound_variant)


def build(cfg: ExperimentConfig) -> Setup:
    grid = cfg.grid.spatial()
    u0 = cfg.initial.build(grid)
    flux = cfg.flux.build(grid.dimension)
    margin = cfg.velocity_margin if cfg.flux.inhomogeneous else 1.0
    vgrid = cfg.grid.velocity(u0, margin)
    # the finest partition in play fixes the path sampling
    finest = TimePartition.from_dt(cfg.time.T, min(cfg.time.dts + [cfg.time.reference]))
    path = generate_for_partition(cfg.path.spec(grid.dimension, cfg.seed), finest)
    return Setup(cfg, u0, flux, vgrid, path)


@dataclass
class ExitReport:
    status: int
    command: str
    outputs: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    error: dict | None = None

    def as_dict(self) -> dict:
        return {"status": self.status, "command": self.command, "outputs": self.outputs, "summary": self.summary, "error": self.error}


# ---------------------------------------------------------------- output

def _f(x) -> str:
    return repr(float(x))


def write_table(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_f(v) for v in r])


def write_snapshot(path: Path, u: ScalarField) -> None:
    g = u.grid
    if g.dimension == 1:
        rows = zip(g.centers(0), u.values)
        header = ["x", "u"]
    else:
        mesh = g.mesh()
        rows = zip(mesh[0].ravel(), mesh[1].ravel(), u.values.ravel())
        header = ["x", "y", "u"]
    write_table(path, header, rows)


def _series(tr: Trajectory) -> dict:
    out = {
        "defect_mass": [float(v) for v in tr.defect_mass],
        "defect_min": [float(v) for v in tr.defect_min],
        "norms": {k: [float(v) for v in vals] for k, vals in tr.norms.items()},
        "diagnostics": {k: (v if isinstance(v, (bool, int)) else float(v)) for k, v in tr.diagnostics.items()},
    }
    if isinstance(tr, InhomogeneousTrajectory):
        out["tightness"] = [float(v) for v in tr.tightness]
        out["kinetic_mass"] = [float(v) for v in tr.kinetic_mass]
        out["final_velocity_grid"] = [tr.vgrid.xi_min, tr.vgrid.xi_max, tr.vgrid.n_cells]
    return out


def emit_outputs(cfg: ExperimentConfig, out_dir, trajectories: dict[str, Trajectory] | None = None,
                 table: ConvergenceTable | None = None, extra: dict | None = None) -> list[str]:
    """Write the convergence table, snapshot files and run metadata.

    Files carry no timestamps or host data, so equal inputs give equal bytes.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    stale = out / "error.json"
    if stale.exists():
        stale.unlink()
    written = []
    trajectories = trajectories or {}
    if table is not None:
        p = out / "convergence.csv"
        write_table(p, list(ConvergenceTable.COLUMNS), table.as_rows())
        written.append(p.name)
    for label, tr in trajectories.items():
        for i, (t, u) in enumerate(sorted(tr.snapshots.items())):
            p = out / f"snapshot_{label}_{i:03d}.csv"
            write_snapshot(p, u)
            written.append(p.name)
    meta = {
        "config": json.loads(json.dumps(cfg.model_dump(mode="json"))),
        "versions": {"transport_collapse": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "seed": cfg.seed,
        "runs": {label: {"K": tr.partition.K, "snapshot_times": sorted(tr.snapshots), **_series(tr)} for label, tr in trajectories.items()},
    }
    if table is not None:
        meta["convergence"] = {"reference_dt": table.reference_dt, "slope": table.slope}
    if extra:
        meta.update(extra)
    p = out / "metadata.json"
    with open(p, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(p.name)
    (out / "config.yaml").write_text(serialize_config(cfg), encoding="utf-8")
    written.append("config.yaml")
    return written


# ---------------------------------------------------------------- commands

def _run(cfg: ExperimentConfig) -> ExitReport:
    s = build(cfg)
    p = TimePartition.from_dt(cfg.time.T, cfg.time.dts[0])
    snaps = sorted(set(cfg.time.snapshot_times) | {cfg.time.T})
    tr = s.run(p, snaps)
    files = emit_outputs(cfg, cfg.output_dir, {f"K{p.K}": tr})
    summary = {
        "K": p.K,
        "final_l1": tr.final.norm(1),
        "mass_drift": abs(tr.norms["mass"][-1] - tr.norms["mass"][0]),
        "cumulative_defect": tr.cumulative_defect,
    }
    return ExitReport(0, "run", files, summary)


def _converge(cfg: ExperimentConfig) -> ExitReport:
    s = build(cfg)
    t = cfg.time
    table = self_convergence_study(s.run, t.T, t.dts, t.reference, s.path, bound=s.bound)
    trajs = {f"K{K}": tr for K, tr in sorted(table.trajectories.items())}
    files = emit_outputs(cfg, cfg.output_dir, trajs, table)
    errs = table.column("l1_error")
    summary = {
        "slope": table.slope,
        "errors": errs,
        "monotone": all(b < a for a, b in zip(errs, errs[1:])),
        "within_bound": all(e <= b for e, b in zip(errs, table.column("bound")) if b == b),
    }
    return ExitReport(0, "converge", files, summary)


def _pseudo_time(path: DriverPath, T: float) -> float:
    z = path.values[:, 0]
    keep = path.times <= T * (1 + 1e-12)
    if path.dim != 1 or np.any(np.diff(z[keep]) <= 0):
        raise ValueError("the time-change oracle needs a strictly increasing scalar path")
    return float(path(T)[0] - path(0.0)[0])


def compare(cfg: ExperimentConfig, oracle: str) -> ExitReport:
    if oracle not in ORACLES:
        raise ValueError(f"unknown oracle {oracle!r}; expected one of {ORACLES}")
    s = build(cfg)
    if s.inhomogeneous:
        raise ValueError("oracles compare against the homogeneous scheme")
    T = cfg.time.T
    p = TimePartition.from_dt(T, cfg.time.dts[0])
    tr = s.run(p, [T])
    u = tr.final
    summary: dict = {"oracle": oracle, "K": p.K}
    other: ScalarField | None = None
    if oracle == "riemann":
        ini = cfg.initial
        if ini.kind != "riemann" or s.flux.name != "burgers":
            raise ValueError("the riemann oracle needs Burgers flux and riemann initial data")
        tau = _pseudo_time(s.path, T)
        summary["l1_error"] = riemann_l1_error(u, ini.u_l, ini.u_r, ini.x0, tau)
        summary["pseudo_time"] = tau
    elif oracle in ("godunov", "timechange"):
        if oracle == "godunov" and cfg.path.kind != "deterministic":
            raise ValueError("the godunov oracle needs a deterministic path; use timechange for other monotone paths")
        tau = _pseudo_time(s.path, T)
        dx = u.grid.dx[0]
        speed = max(s.flux.lipschitz_data(max(s.u0.norm(np.inf), 1e-12))[0], 1e-12)
        other = godunov_run(s.u0, s.flux, tau, 0.5 * dx / speed)
        summary["l1_error"] = l1_distance(u, other)
        summary["pseudo_time"] = tau
    else:
        eps = cfg.bgk_epsilon_factor * p.dt
        other = bgk_run(s.u0, s.flux, s.vgrid, s.path, p, eps)
        summary["l1_error"] = l1_distance(u, other)
        summary["epsilon"] = eps
    trajs = {f"K{p.K}": tr}
    out = Path(cfg.output_dir)
    files = emit_outputs(cfg, out, trajs, extra={"compare": summary})
    if other is not None:
        write_snapshot(out / f"oracle_{oracle}.csv", other)
        files.append(f"oracle_{oracle}.csv")
    return ExitReport(0, f"compare-{oracle}", files, summary)


def run_experiment(cfg: ExperimentConfig, command: str = "run", oracle: str | None = None) -> ExitReport:
    """Dispatch ``command`` and turn any failure into a nonzero report."""
    try:
        if command == "run":
            return _run(cfg)
        if command == "converge":
            return _converge(cfg)
        if command == "compare":
            return compare(cfg, oracle or "riemann")
        raise ValueError(f"unknown command {command!r}")
    except Exception as exc:  # reported, not swallowed: status is nonzero
        err = {"type": type(exc).__name__, "message": str(exc), "trace": traceback.format_exc(limit=3)}
        report = ExitReport(1, command, [], {}, err)
        try:
            out = Path(cfg.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "error.json", "w", encoding="utf-8") as fh:
                json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
            report.outputs.append("error.json")
        except OSError:
            pass
        return report
