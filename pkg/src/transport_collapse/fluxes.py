"""Flux descriptions for the homogeneous and the x-dependent problem.

Homogeneous fluxes are polynomials in xi per component.  Inhomogeneous ones
are separable, ``A_i(x, xi) = V_i(x) P_i(xi)``, which covers the presets the
harness exposes and keeps ``b(x, 0) = 0`` automatic whenever ``P_i(0) = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.polynomial import polyval


@dataclass(frozen=True)
class HomogeneousFlux:
    """Component fluxes ``A_i(xi)`` given as polynomials."""

    polys: tuple[Polynomial, ...]
    name: str = "polynomial"

    @classmethod
    def polynomial(cls, *coefficients: Sequence[float], name: str = "polynomial") -> "HomogeneousFlux":
        return cls(tuple(Polynomial(np.asarray(c, dtype=float)) for c in coefficients), name)

    @classmethod
    def burgers(cls, dimension: int = 1) -> "HomogeneousFlux":
        return cls.polynomial(*([[0.0, 0.0, 0.5]] * dimension), name="burgers")

    @classmethod
    def linear(cls, speed: float | Sequence[float] = 1.0) -> "HomogeneousFlux":
        speeds = np.atleast_1d(np.asarray(speed, dtype=float))
        return cls.polynomial(*[[0.0, c] for c in speeds], name="linear")

    @property
    def dimension(self) -> int:
        return len(self.polys)

    def flux(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return np.stack([p(xi) for p in self.polys])

    def speed(self, xi) -> np.ndarray:
        """``a_i(xi) = A_i'(xi)``, shape ``(N, *xi.shape)``."""
        xi = np.asarray(xi, dtype=float)
        return np.stack([p.deriv()(xi) for p in self.polys])

    def speed_derivative(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return np.stack([p.deriv(2)(xi) for p in self.polys])

    def lipschitz_data(self, eta: float, samples: int = 4001) -> tuple[float, float]:
        """``(sup |a|, sup |a'|)`` on ``[-eta, eta]`` by dense sampling, max over components."""
        xi = np.linspace(-eta, eta, samples)
        return float(np.abs(self.speed(xi)).max()), float(np.abs(self.speed_derivative(xi)).max())

    def as_inhomogeneous(self) -> "InhomogeneousFlux":
        return InhomogeneousFlux.separable(
            [lambda x: np.ones_like(x)] * self.dimension,
            [lambda x: np.zeros_like(x)] * self.dimension,
            [p.coef for p in self.polys],
            name=f"{self.name}-as-inhomogeneous",
        )


@dataclass(frozen=True)
class InhomogeneousFlux:
    """``A_i(x, xi) = V_i(x) P_i(xi)``; ``x`` arrays carry the axis first, shape ``(N, ...)``.

    ``spatial_grads[i]`` is ``dV_i/dx_i`` (the only derivative the
    characteristic system consumes).
    """

    spatial: tuple[Callable, ...]
    spatial_grads: tuple[Callable, ...]
    polys: tuple[Polynomial, ...]
    name: str = "separable"

    def __post_init__(self):
        if not (len(self.spatial) == len(self.spatial_grads) == len(self.polys)):
            raise ValueError("one spatial factor, gradient and polynomial per component")
        # raw coefficients, for the hot loop of the characteristic integrator
        object.__setattr__(self, "_coef", tuple((p.coef, p.deriv().coef) for p in self.polys))

    @classmethod
    def separable(cls, spatial, spatial_grads, coefficients, name: str = "separable") -> "InhomogeneousFlux":
        return cls(
            tuple(spatial),
            tuple(spatial_grads),
            tuple(Polynomial(np.asarray(c, dtype=float)) for c in coefficients),
            name,
        )

    @classmethod
    def sine_speed(cls, amplitude: float = 0.5, wavenumber: float = 1.0, dimension: int = 1) -> "InhomogeneousFlux":
        """``A(x, xi) = (1 + amplitude sin(k x)) xi^2 / 2`` in each component."""
        V = lambda x: 1.0 + amplitude * np.sin(wavenumber * x)
        dV = lambda x: amplitude * wavenumber * np.cos(wavenumber * x)
        return cls.separable([V] * dimension, [dV] * dimension, [[0.0, 0.0, 0.5]] * dimension, name="sine-speed-inhomogeneous")

    @property
    def dimension(self) -> int:
        return len(self.polys)

    def flux(self, x, xi) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([V(x[i]) * P(xi) for i, (V, P) in enumerate(zip(self.spatial, self.polys))])

    def speed(self, x, xi) -> np.ndarray:
        """``a_i = dA_i/du``."""
        x = np.asarray(x, dtype=float)
        return np.stack([V(x[i]) * P.deriv()(xi) for i, (V, P) in enumerate(zip(self.spatial, self.polys))])

    def source(self, x, xi) -> np.ndarray:
        """``b_i = dA_i/dx_i``."""
        x = np.asarray(x, dtype=float)
        return np.stack([dV(x[i]) * P(xi) for i, (dV, P) in enumerate(zip(self.spatial_grads, self.polys))])

    def characteristic_field(self, x, xi) -> tuple[np.ndarray, np.ndarray]:
        """``(a, b)`` together, sharing the evaluations of ``V_i`` and ``dV_i``."""
        a = np.empty(x.shape)
        b = np.empty(x.shape)
        for i, (V, dV) in enumerate(zip(self.spatial, self.spatial_grads)):
            c, dc = self._coef[i]
            a[i] = V(x[i]) * polyval(xi, dc)
            b[i] = dV(x[i]) * polyval(xi, c)
        return a, b

    def check_derivatives(self, x, xi, h: float = 1e-5) -> tuple[float, float, float]:
        """Central-difference residuals of ``a`` and ``b`` and the largest ``|b(x, 0)|``."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        a_fd = (self.flux(x, xi + h) - self.flux(x, xi - h)) / (2 * h)
        b_fd = np.empty_like(a_fd)
        for i in range(self.dimension):
            e = np.zeros_like(x)
            e[i] = h
            b_fd[i] = (self.flux(x + e, xi)[i] - self.flux(x - e, xi)[i]) / (2 * h)
        b0 = np.abs(self.source(x, np.zeros_like(xi))).max()
        return (
            float(np.abs(a_fd - self.speed(x, xi)).max()),
            float(np.abs(b_fd - self.source(x, xi)).max()),
            float(b0),
        )
