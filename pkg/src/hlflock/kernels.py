"""Interaction kernels, their primitives, and the driven-leader forcing.

The communication rate between two agents at distance r is psi(r) for a
nonnegative, non-increasing kernel psi. Alignment functionals need a
primitive Phi with Phi' = psi, evaluated in closed form where one exists and
by adaptive quadrature otherwise. A driven leader accelerates by an external
f(t) instead of the alignment rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
from scipy.integrate import quad

from .errors import NegativeDistance, QuadratureFailure

__all__ = [
    "CuckerSmaleKernel",
    "TabulatedKernel",
    "Kernel",
    "KernelPrimitive",
    "ZeroForcing",
    "PowerDecayForcing",
    "TabulatedForcing",
    "Forcing",
    "psi_eval",
    "has_divergent_tail",
    "phi_eval",
    "forcing_eval",
    "forcing_l1_norm",
]


@dataclass(frozen=True)
class CuckerSmaleKernel:
    """Power-law rate H / (sigma + r^2)^beta.

    beta = 0 gives a constant kernel; the tail integral diverges exactly when
    beta <= 1/2, which is the regime with an unconditional flocking guarantee.
    """

    H: float = 1.0
    sigma: float = 1.0
    beta: float = 0.25

    def __post_init__(self):
        if self.H <= 0:
            raise ValueError("H must be positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")


@dataclass(frozen=True)
class TabulatedKernel:
    """Piecewise-linear kernel through (knots, values), clamped past the ends.

    Values must be nonnegative and non-increasing so the interpolant keeps
    both properties everywhere.
    """

    knots: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "knots", tuple(float(k) for k in self.knots))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.knots) != len(self.values) or not self.knots:
            raise ValueError("knots and values must be equally sized and non-empty")
        if self.knots[0] < 0:
            raise ValueError("knots must be nonnegative distances")
        if any(b <= a for a, b in zip(self.knots, self.knots[1:])):
            raise ValueError("knots must be strictly increasing")
        if any(v < 0 for v in self.values):
            raise ValueError("kernel values must be nonnegative")
        if any(b > a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("kernel values must be non-increasing")

    @property
    def has_zero_values(self) -> bool:
        """True when the table touches zero somewhere (accepted, but flagged)."""
        return any(v == 0.0 for v in self.values)


Kernel = Union[CuckerSmaleKernel, TabulatedKernel]

TailVerdict = Literal["yes", "no", "unknown"]


def psi_eval(kernel: Kernel, r):
    """Evaluate the kernel at distance(s) r >= 0.

    Accepts a scalar or an ndarray; raises :class:`NegativeDistance` if any
    entry is negative.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0):
        raise NegativeDistance(f"kernel evaluated at negative distance {arr.min()}")
    if isinstance(kernel, CuckerSmaleKernel):
        out = kernel.H / (kernel.sigma + arr * arr) ** kernel.beta
    else:
        out = np.interp(arr, kernel.knots, kernel.values)
    return float(out) if np.isscalar(r) or arr.ndim == 0 else out


def has_divergent_tail(kernel: Kernel) -> TailVerdict:
    """Whether the tail integral of the kernel diverges.

    The power-law tail behaves like r^(-2 beta), so it diverges iff
    beta <= 1/2. A finite table cannot decide its own tail.
    """
    if isinstance(kernel, CuckerSmaleKernel):
        return "yes" if kernel.beta <= 0.5 else "no"
    return "unknown"


@dataclass(frozen=True)
class KernelPrimitive:
    """How to evaluate Phi(r) = integral of psi from base_point to r.

    ``tol`` bounds the quadrature error when no closed form applies;
    ``max_subdivisions`` caps the adaptive refinement budget.
    """

    base_point: float = 0.0
    tol: float = 1e-12
    max_subdivisions: int = 200

    def __post_init__(self):
        if self.base_point < 0:
            raise ValueError("base_point must be nonnegative")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


def _tabulated_segment_integral(kernel: TabulatedKernel, a: float, b: float) -> float:
    # Exact integral of the piecewise-linear interpolant (with end clamping).
    if b < a:
        return -_tabulated_segment_integral(kernel, b, a)
    knots = np.asarray(kernel.knots)
    breakpoints = [a] + [float(k) for k in knots if a < k < b] + [b]
    total = 0.0
    for lo, hi in zip(breakpoints, breakpoints[1:]):
        total += 0.5 * (psi_eval(kernel, lo) + psi_eval(kernel, hi)) * (hi - lo)
    return total


def phi_eval(primitive: KernelPrimitive, kernel: Kernel, r: float) -> float:
    """Primitive Phi(r) with Phi(base_point) = 0 and Phi' = psi.

    Closed forms cover the constant (beta = 0) and inverse-square-root
    (beta = 1/2) power kernels and all tabulated kernels; any other power is
    integrated adaptively to the primitive's tolerance.
    """
    r = float(r)
    if r < 0:
        raise NegativeDistance(f"primitive evaluated at negative distance {r}")
    b = primitive.base_point
    if r == b:
        return 0.0
    if isinstance(kernel, TabulatedKernel):
        return _tabulated_segment_integral(kernel, b, r)
    if kernel.beta == 0.0:
        return kernel.H * (r - b)
    if kernel.beta == 0.5:
        s = math.sqrt(kernel.sigma)
        return kernel.H * (math.asinh(r / s) - math.asinh(b / s))
    value, abserr = quad(
        lambda s: kernel.H / (kernel.sigma + s * s) ** kernel.beta,
        b,
        r,
        epsabs=primitive.tol,
        epsrel=primitive.tol,
        limit=primitive.max_subdivisions,
    )
    if abserr > 10 * max(primitive.tol, primitive.tol * abs(value)):
        raise QuadratureFailure(
            f"quadrature error {abserr:g} above tolerance {primitive.tol:g} on [{b:g}, {r:g}]"
        )
    return value


@dataclass(frozen=True)
class ZeroForcing:
    """No external acceleration: the plain leadership model."""


@dataclass(frozen=True, eq=False)
class PowerDecayForcing:
    """Acceleration of magnitude amplitude * (1+t)^(-mu) along a fixed unit direction.

    Integrable over [0, inf) exactly when mu > 1, with L1 norm amplitude/(mu-1).
    ``direction`` defaults to the first coordinate axis.
    """

    amplitude: float
    mu: float
    direction: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.direction is not None:
            d = np.asarray(self.direction, dtype=float)
            norm = float(np.linalg.norm(d))
            if norm == 0.0:
                raise ValueError("direction must be a nonzero vector")
            object.__setattr__(self, "direction", tuple(d / norm))


@dataclass(frozen=True, eq=False)
class TabulatedForcing:
    """Sampled acceleration, linearly interpolated; zero after the last sample."""

    times: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ValueError("times and values must be equally sized and non-empty")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("sample times must be strictly increasing")
        dims = {len(v) for v in self.values}
        if len(dims) != 1:
            raise ValueError("all samples must share one dimension")


Forcing = Union[ZeroForcing, PowerDecayForcing, TabulatedForcing]


def _unit_direction(spec: PowerDecayForcing, dim: int) -> np.ndarray:
    if spec.direction is None:
        e = np.zeros(dim)
        e[0] = 1.0
        return e
    d = np.asarray(spec.direction, dtype=float)
    if d.shape != (dim,):
        raise ValueError(f"forcing direction has dimension {d.shape[0]}, expected {dim}")
    return d


def forcing_eval(spec: Forcing, t: float, dim: int) -> np.ndarray:
    """External acceleration f(t) as a vector of length ``dim``."""
    if t < 0:
        raise ValueError("forcing is defined for t >= 0")
    if isinstance(spec, ZeroForcing):
        return np.zeros(dim)
    if isinstance(spec, PowerDecayForcing):
        return spec.amplitude * (1.0 + t) ** (-spec.mu) * _unit_direction(spec, dim)
    values = np.asarray(spec.values, dtype=float)
    if values.shape[1] != dim:
        raise ValueError(f"forcing table has dimension {values.shape[1]}, expected {dim}")
    if t > spec.times[-1]:
        return np.zeros(dim)
    return np.array([np.interp(t, spec.times, values[:, k]) for k in range(dim)])


def forcing_l1_norm(spec: Forcing) -> float:
    """Integral of |f| over [0, inf); inf when the power exponent is <= 1."""
    if isinstance(spec, ZeroForcing):
        return 0.0
    if isinstance(spec, PowerDecayForcing):
        if spec.mu <= 1.0:
            return math.inf
        return abs(spec.amplitude) / (spec.mu - 1.0)
    values = np.asarray(spec.values, dtype=float)
    magnitudes = np.linalg.norm(values, axis=1)
    return float(np.trapezoid(magnitudes, np.asarray(spec.times)))
