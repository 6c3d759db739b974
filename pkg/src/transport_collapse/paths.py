"""Driving signals: piecewise-linear sampled paths and their generators."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MAX_FBM_SAMPLES = 4096
PATH_KINDS = ("deterministic", "zigzag", "brownian", "fbm")


@dataclass(frozen=True)
class DriverPath:
    """Sampled path ``z: [0, T] -> R^N``, linear between samples."""

    times: np.ndarray
    values: np.ndarray
    _source: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if t.ndim != 1 or len(t) < 2 or len(v) != len(t):
            raise ValueError("need at least two samples and one value per time")
        if t[0] != 0.0:
            raise ValueError(f"path must start at t = 0, got {t[0]}")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.T * (1 + 1e-12)):
            raise ValueError(f"time outside [0, {self.T}]")
        out = np.stack([np.interp(t, self.times, self.values[:, i]) for i in range(self.dim)], axis=-1)
        return out

    def increment(self, s: float, t: float) -> np.ndarray:
        if not 0.0 <= s <= t:
            raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")
        return self(t) - self(s)

    def with_samples(self, extra: Sequence[float]) -> "DriverPath":
        """Same piecewise-linear function with additional sample times inserted."""
        extra = np.asarray(extra, dtype=float)
        extra = extra[(extra > 0) & (extra <= self.T)]
        tol = 1e-12 * max(self.T, 1.0)
        idx = np.searchsorted(self.times, extra)
        near = np.zeros(len(extra), dtype=bool)
        for off in (-1, 0):
            j = np.clip(idx + off, 0, len(self.times) - 1)
            near |= np.abs(self.times[j] - extra) <= tol
        new = np.unique(extra[~near])
        if len(new) == 0:
            return self
        t = np.concatenate([self.times, new])
        order = np.argsort(t, kind="stable")
        return DriverPath(t[order], np.concatenate([self.values, self(new)])[order])

    def restrict(self, t1: float) -> "DriverPath":
        if not 0.0 < t1 <= self.T:
            raise ValueError(f"t1 = {t1} outside (0, {self.T}]")
        p = self.with_samples([t1])
        n = int(np.argmin(np.abs(p.times - t1))) + 1
        return DriverPath(p.times[:n], p.values[:n])

    def segments(self, s0: float, s1: float) -> list[tuple[float, float]]:
        """Sample-aligned breakpoints of ``[s0, s1]``."""
        inner = self.times[(self.times > s0) & (self.times < s1)]
        pts = np.concatenate([[s0], inner, [s1]])
        return list(zip(pts[:-1], pts[1:]))


def reverse(z: DriverPath, t1: float) -> DriverPath:
    """Time reversal on ``[0, t1]``: ``z_rev(t) = z(t1 - t)``.

    Reversing a reversed path with the same ``t1`` returns the original
    restriction without re-rounding the sample times.
    """
    if not 0.0 <= t1 <= z.T:
        raise ValueError(f"t1 = {t1} outside [0, {z.T}]")
    if t1 == 0.0:
        raise ValueError("cannot reverse over an empty interval")
    if z._source is not None and z._source[1] == t1:
        return z._source[0]
    r = z.restrict(t1)
    times = t1 - r.times[::-1]
    times[0] = 0.0
    out = DriverPath(times, r.values[::-1].copy())
    object.__setattr__(out, "_source", (r, t1))
    return out


@dataclass(frozen=True)
class TimePartition:
    T: float
    K: int

    def __post_init__(self):
        if self.T <= 0 or self.K <= 0:
            raise ValueError("need T > 0 and K > 0")

    @classmethod
    def from_dt(cls, T: float, dt: float) -> "TimePartition":
        K = int(round(T / dt))
        if K <= 0 or abs(K * dt - T) > 1e-9 * T:
            raise ValueError(f"dt = {dt} does not divide T = {T}")
        return cls(T, K)

    @property
    def dt(self) -> float:
        return self.T / self.K

    @property
    def times(self) -> np.ndarray:
        t = self.T * np.arange(self.K + 1) / self.K
        t[-1] = self.T
        return t

    def index_of(self, t: float) -> int:
        k = int(round(t / self.dt))
        if not 0 <= k <= self.K or abs(k * self.dt - t) > 1e-9 * self.T:
            raise ValueError(f"t = {t} is not a partition point")
        return k

    def refines(self, other: "TimePartition") -> bool:
        return abs(self.T - other.T) <= 1e-12 * self.T and self.K % other.K == 0


def align(z: DriverPath, p: TimePartition) -> DriverPath:
    """Insert every partition point as a sample of ``z``."""
    if z.T < p.T * (1 - 1e-12):
        raise ValueError(f"path ends at {z.T} before the final time {p.T}")
    return z.with_samples(p.times)


def delta_z(z: DriverPath, p: TimePartition, endpoint_only: bool = False) -> float:
    """Largest excursion ``|z_t - z_{t_k}|`` within any step of the partition.

    With ``endpoint_only`` only the step increments ``|z_{t_{k+1}} - z_{t_k}|``
    are considered.
    """
    pt = p.times
    zk = z(pt)
    ends = float(np.linalg.norm(np.diff(zk, axis=0), axis=1).max())
    if endpoint_only:
        return ends
    za = align(z, p)
    keep = za.times <= p.T * (1 + 1e-12)
    ts, vs = za.times[keep], za.values[keep]
    step = np.clip(np.searchsorted(pt, ts, side="right") - 1, 0, p.K - 1)
    inner = float(np.linalg.norm(vs - zk[step], axis=1).max())
    return max(inner, ends)


@dataclass(frozen=True)
class PathSpec:
    kind: str = "deterministic"
    slope: tuple[float, ...] = (1.0,)
    period: float = 0.25
    amplitude: float = 0.1
    seed: int | None = 0
    oversample: int = 16
    hurst: float = 0.5
    dim: int | None = None

    def __post_init__(self):
        if self.kind not in PATH_KINDS:
            raise ValueError(f"unknown path kind {self.kind!r}; expected one of {PATH_KINDS}")
        object.__setattr__(self, "slope", tuple(float(s) for s in np.atleast_1d(self.slope)))
        if self.period <= 0:
            raise ValueError("zigzag period must be positive")
        if self.oversample < 1:
            raise ValueError("oversample must be >= 1")
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"Hurst index must lie in (0, 1), got {self.hurst}")

    @property
    def dimension(self) -> int:
        return self.dim if self.dim is not None else len(self.slope)


def fbm_covariance(times: np.ndarray, hurst: float) -> np.ndarray:
    s = np.asarray(times, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * (s[:, None] ** h2 + s[None, :] ** h2 - np.abs(s[:, None] - s[None, :]) ** h2)


def _triangle(t: np.ndarray, period: float, amplitude: float) -> np.ndarray:
    # 0 -> A -> 0 -> -A -> 0 over one period
    phase = np.mod(t / period, 1.0)
    return amplitude * np.where(
        phase < 0.25, 4 * phase, np.where(phase < 0.75, 2 - 4 * phase, 4 * phase - 4)
    )


def generate(spec: PathSpec, T: float, n_samples: int) -> DriverPath:
    """Sample ``spec`` on ``n_samples`` equispaced times covering ``[0, T]``."""
    if T <= 0 or n_samples < 2:
        raise ValueError("need T > 0 and n_samples >= 2")
    N = spec.dimension
    t = np.linspace(0.0, T, n_samples)
    if spec.kind == "deterministic":
        slope = np.broadcast_to(np.asarray(spec.slope), (N,))
        z = t[:, None] * slope[None, :]
    elif spec.kind == "zigzag":
        # keep the corners of the triangle wave as samples
        corners = spec.period * 0.25 * np.arange(1, int(math.floor(4 * T / spec.period)) + 1)
        t = np.union1d(t, corners[corners < T])
        z = np.repeat(_triangle(t, spec.period, spec.amplitude)[:, None], N, axis=1)
    elif spec.kind == "brownian":
        rng = np.random.default_rng(spec.seed)
        dt = np.diff(t)
        inc = rng.standard_normal((n_samples - 1, N)) * np.sqrt(dt)[:, None]
        z = np.vstack([np.zeros((1, N)), np.cumsum(inc, axis=0)])
    else:
        if n_samples - 1 > MAX_FBM_SAMPLES:
            raise ValueError(f"fbm via dense Cholesky is limited to {MAX_FBM_SAMPLES} steps, got {n_samples - 1}")
        rng = np.random.default_rng(spec.seed)
        L = np.linalg.cholesky(fbm_covariance(t[1:], spec.hurst))
        z = np.vstack([np.zeros((1, N)), L @ rng.standard_normal((n_samples - 1, N))])
    return DriverPath(t, z)


def generate_for_partition(spec: PathSpec, p: TimePartition) -> DriverPath:
    """Path with ``spec.oversample`` samples per step of ``p``."""
    return align(generate(spec, p.T, p.K * spec.oversample + 1), p)


def write_csv(z: DriverPath, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"z{i + 1}" for i in range(z.dim)])
        for t, v in zip(z.times, z.values):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in v])


def read_csv(path: str | Path) -> DriverPath:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[0] != "t":
        raise ValueError("first column must be 't'")
    data = np.array([[float(x) for x in r] for r in body])
    return DriverPath(data[:, 0], data[:, 1:])
