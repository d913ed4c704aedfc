"""Matrix-free Kronecker-sum stencils and the two model problems.

Grid vectors are flattened lexicographically with x fastest,
``u[i + j*n + k*n*n]``, i.e. a C-ordered ``(n, n, n)`` array indexed
``[k, j, i]``.

Sign convention: ``du/dt = K u (+ g)`` with

* heat:      ``K = -(1/h^2)  * (I⊗I⊗T + I⊗T⊗I + T⊗I⊗I)``, ``T = Tridiag(-1, 2, -1)``
* advection: ``K = -(1/2h)   * (same Kronecker sum)``,     ``T = Tridiag(-1, 0, 1) + corners``
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DimensionTooSmall, LengthMismatch, WrongEquation
from .linalg import Precision, StencilKind, as_precision, convert, one_dim_matrix
from .timing import Timer, maybe

__all__ = [
    "Equation",
    "KronSumOperator",
    "ProblemSpec",
    "apply",
    "heat_problem",
    "advection_problem",
    "make_problem",
    "stage_operator",
    "perturbation_norm",
    "heat_exact",
    "dense_kron_sum",
    "EPS32",
]

EPS32 = 2.0 ** -24


class Equation(enum.Enum):
    Heat = "heat"
    Advection = "advection"


def _apply_1d(kind: StencilKind, a: np.ndarray, axis: int, out: np.ndarray):
    """``out += T a`` along ``axis`` of a 3D array."""
    lo = [slice(None)] * 3
    hi = [slice(None)] * 3
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    lo, hi = tuple(lo), tuple(hi)
    if kind is StencilKind.DirichletLaplace1D:
        out += 2 * a
        out[hi] -= a[lo]
        out[lo] -= a[hi]
    else:
        # (T a)_i = a_{i+1} - a_{i-1} with periodic wrap
        out += np.roll(a, -1, axis=axis)
        out -= np.roll(a, 1, axis=axis)


@dataclass(frozen=True)
class KronSumOperator:
    """``sigma*I + gamma*(I⊗I⊗T + I⊗T⊗I + T⊗I⊗I)`` on an ``n^3`` grid."""

    n: int
    kind: StencilKind
    sigma: float = 0.0
    gamma: float = 1.0

    @property
    def N(self) -> int:
        return self.n ** 3

    @property
    def is_complex(self) -> bool:
        return self.kind.is_complex

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Apply in the dtype of ``x`` (all scalars cast to that dtype)."""
        if x.shape != (self.N,):
            raise LengthMismatch(f"expected length {self.N}, got {x.shape}")
        real_t = np.float32 if x.dtype in (np.float32, np.complex64) else np.float64
        a = x.reshape(self.n, self.n, self.n)
        acc = np.zeros_like(a)
        for axis in range(3):
            _apply_1d(self.kind, a, axis, acc)
        acc *= real_t(self.gamma)
        if self.sigma != 0.0:
            acc += real_t(self.sigma) * a
        return acc.reshape(-1)

    __call__ = matvec

    def scaled(self, sigma: float, gamma: float) -> "KronSumOperator":
        return replace(self, sigma=sigma, gamma=gamma)

    def dense(self) -> np.ndarray:
        return dense_kron_sum(self.kind, self.n, self.sigma, self.gamma)

    def norm_inf(self) -> float:
        """Induced infinity norm (row sums of absolute values)."""
        centre = 6.0 * self.gamma if self.kind is StencilKind.DirichletLaplace1D else 0.0
        return abs(self.sigma + centre) + 6.0 * abs(self.gamma)


def dense_kron_sum(kind: StencilKind, n: int, sigma: float, gamma: float) -> np.ndarray:
    """Explicit Kronecker-product assembly; used as a test oracle only."""
    T = one_dim_matrix(kind, n)
    eye = np.eye(n)
    S = np.kron(np.kron(eye, eye), T) + np.kron(np.kron(eye, T), eye) + np.kron(np.kron(T, eye), eye)
    return sigma * np.eye(n ** 3) + gamma * S


def apply(op: KronSumOperator, x: np.ndarray, out_precision=Precision.F64, timer: Timer | None = None) -> np.ndarray:
    """``f`` (F64) or ``f^eps`` (F32 arithmetic, binary64 in and out)."""
    out_precision = as_precision(out_precision)
    if np.shape(x) != (op.N,):
        raise LengthMismatch(f"expected length {op.N}, got {np.shape(x)}")
    with maybe(timer, "stencil"):
        if out_precision is Precision.F32:
            return convert(op.matvec(convert(np.asarray(x), Precision.F32)), Precision.F64)
        return op.matvec(convert(np.asarray(x), Precision.F64))


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    equation: Equation
    n: int
    h: float
    K: KronSumOperator
    coords: np.ndarray  # 1D node coordinates, shared by all three directions
    initial_state: np.ndarray
    forcing: np.ndarray | None = None

    @property
    def N(self) -> int:
        return self.n ** 3

    @property
    def complex_solves(self) -> bool:
        return self.K.is_complex

    def rhs(self, u: np.ndarray, precision=Precision.F64, timer: Timer | None = None) -> np.ndarray:
        """``K u + g`` evaluated in ``precision``; result in binary64."""
        out = apply(self.K, u, precision, timer)
        if self.forcing is not None:
            if as_precision(precision) is Precision.F32:
                g32 = self.forcing.astype(np.float32)
                out = (out.astype(np.float32) + g32).astype(np.float64)
            else:
                out = out + self.forcing
        return out


def _grid(coords: np.ndarray):
    z, y, x = np.meshgrid(coords, coords, coords, indexing="ij")
    return x, y, z


def heat_problem(n: int) -> ProblemSpec:
    """Heat equation on the unit cube with ``g = sin(pi x) sin(pi y) sin(pi z)``.

    Nodes are ``i*h`` with ``h = 1/(n-1)``; zero ghost values outside.
    """
    if n < 2:
        raise DimensionTooSmall("n must be >= 2")
    h = 1.0 / (n - 1)
    coords = np.arange(n) * h
    x, y, z = _grid(coords)
    g = (np.sin(np.pi * x) * np.sin(np.pi * y) * np.sin(np.pi * z)).reshape(-1)
    K = KronSumOperator(n, StencilKind.DirichletLaplace1D, 0.0, -1.0 / h ** 2)
    return ProblemSpec(Equation.Heat, n, h, K, coords, np.zeros(n ** 3), g)


def advection_problem(n: int, speed: float = 1.0) -> ProblemSpec:
    """Periodic advection with velocity ``speed*(1, 1, 1)`` and a Gaussian bump."""
    if n < 3:
        raise DimensionTooSmall("n must be >= 3")
    h = 1.0 / n
    coords = np.arange(n) * h
    x, y, z = _grid(coords)
    u0 = np.exp(-100.0 * ((x - 0.5) ** 2 + (y - 0.5) ** 2 + (z - 0.5) ** 2)).reshape(-1)
    K = KronSumOperator(n, StencilKind.PeriodicCentralDiff1D, 0.0, -speed / (2.0 * h))
    return ProblemSpec(Equation.Advection, n, h, K, coords, u0, None)


def make_problem(equation, n: int) -> ProblemSpec:
    eq = Equation(equation) if not isinstance(equation, Equation) else equation
    return heat_problem(n) if eq is Equation.Heat else advection_problem(n)


def stage_operator(p: ProblemSpec, tau: float, a: float) -> KronSumOperator:
    """``I - tau*a*K`` for one implicit stage."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return p.K.scaled(1.0, -tau * a * p.K.gamma)


def perturbation_norm(op: KronSumOperator, x: np.ndarray) -> float:
    """``||f(x) - f^eps(x)||_inf / 2^-24``: one sample of the precision perturbation."""
    d = apply(op, x, Precision.F64) - apply(op, x, Precision.F32)
    return float(np.max(np.abs(d))) / EPS32 if d.size else 0.0


def heat_exact(p: ProblemSpec, t: float) -> np.ndarray:
    if p.equation is not Equation.Heat:
        raise WrongEquation("analytic solution only exists for the heat problem")
    lam = 3.0 * np.pi ** 2
    return p.forcing * (-np.expm1(-lam * t) / lam)
