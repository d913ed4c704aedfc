"""Precision handling and closed-form spectral factors of the 1D operators.

Vectors are plain numpy arrays; their dtype carries the precision
(float32/complex64 or float64/complex128).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceFailure, DimensionTooSmall, OverflowToInfinity

__all__ = [
    "Precision",
    "StencilKind",
    "SpectralFactor",
    "as_precision",
    "downcast",
    "upcast",
    "convert",
    "spectral_1d",
    "tridiag",
    "one_dim_matrix",
    "dense_eig_oracle",
]

F32_MAX = float(np.finfo(np.float32).max)


class Precision(enum.Enum):
    F32 = "f32"
    F64 = "f64"

    def dtype(self, complex_: bool = False) -> np.dtype:
        if self is Precision.F32:
            return np.dtype(np.complex64 if complex_ else np.float32)
        return np.dtype(np.complex128 if complex_ else np.float64)

    @classmethod
    def of(cls, arr: np.ndarray) -> "Precision":
        return cls.F32 if arr.dtype in (np.float32, np.complex64) else cls.F64


def as_precision(p) -> Precision:
    return p if isinstance(p, Precision) else Precision(str(p).lower())


class StencilKind(enum.Enum):
    DirichletLaplace1D = "dirichlet"
    PeriodicCentralDiff1D = "periodic"

    @property
    def is_complex(self) -> bool:
        return self is StencilKind.PeriodicCentralDiff1D


def downcast(v: np.ndarray) -> np.ndarray:
    """Round to binary32 (componentwise for complex), nearest-even.

    Raises
    ------
    OverflowToInfinity
        If any finite component exceeds the binary32 range.
    """
    v = np.asarray(v)
    parts = (v.real, v.imag) if np.iscomplexobj(v) else (v,)
    for part in parts:
        if np.any(np.abs(part[np.isfinite(part)]) > F32_MAX):
            raise OverflowToInfinity("value exceeds binary32 range (~3.4e38)")
    return v.astype(np.complex64 if np.iscomplexobj(v) else np.float32)


def upcast(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    return v.astype(np.complex128 if np.iscomplexobj(v) else np.float64)


def convert(v: np.ndarray, precision: Precision) -> np.ndarray:
    """Convert to ``precision``; a no-op (no copy) when already there."""
    if Precision.of(v) is precision:
        return v
    return downcast(v) if precision is Precision.F32 else upcast(v)


def tridiag(n: int, lower: float, diag: float, upper: float) -> np.ndarray:
    return (np.diag(np.full(n, float(diag)))
            + np.diag(np.full(n - 1, float(lower)), -1)
            + np.diag(np.full(n - 1, float(upper)), 1))


def one_dim_matrix(kind: StencilKind, n: int) -> np.ndarray:
    """Dense 1D matrix: Tridiag(-1,2,-1), or Tridiag(-1,0,1) plus the periodic corner terms."""
    if kind is StencilKind.DirichletLaplace1D:
        return tridiag(n, -1, 2, -1)
    m = tridiag(n, -1, 0, 1)
    # corner terms are added, so for n = 2 they cancel the off-diagonals
    m[0, n - 1] += -1.0
    m[n - 1, 0] += 1.0
    return m


@dataclass(frozen=True, eq=False)
class SpectralFactor:
    """``M = Q diag(lam) Qinv`` for one direction of a Kronecker sum."""

    Q: np.ndarray
    Qinv: np.ndarray
    lam: np.ndarray

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.Q)

    def matrix(self) -> np.ndarray:
        return (self.Q * self.lam) @ self.Qinv

    def astype(self, precision: Precision) -> "SpectralFactor":
        return SpectralFactor(convert(self.Q, precision), convert(self.Qinv, precision), convert(self.lam, precision))


def spectral_1d(kind: StencilKind, n: int, sigma: float = 0.0, gamma: float = 1.0) -> SpectralFactor:
    """Analytic eigensystem of ``sigma*I + gamma*K_1D``.

    Dirichlet: orthonormal discrete sine modes, so ``Qinv = Q^T``.
    Periodic: unitary Fourier modes ``w^{jk}/sqrt(n)``, so ``Qinv = Q^H``.
    """
    kind = StencilKind(kind)
    if n < 2 or (kind is StencilKind.PeriodicCentralDiff1D and n < 3):
        raise DimensionTooSmall(f"n={n} too small for {kind.name}")
    j = np.arange(n)
    if kind is StencilKind.DirichletLaplace1D:
        k = np.arange(1, n + 1)
        theta = np.pi / (n + 1)
        Q = np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(j + 1, k) * theta)
        lam = sigma + gamma * (2.0 - 2.0 * np.cos(k * theta))
        return SpectralFactor(Q, Q.T.copy(), lam)
    # reduce j*k mod n before scaling so the phases stay exact for large n
    phase = 2.0 * np.pi * (np.outer(j, j) % n) / n
    Q = np.exp(1j * phase) / np.sqrt(n)
    lam = sigma + gamma * 2j * np.sin(2.0 * np.pi * j / n)
    return SpectralFactor(Q, Q.conj().T.copy(), lam.astype(complex))


# -- test oracle -------------------------------------------------------------

def dense_eig_oracle(M, max_iter: int = 5000) -> np.ndarray:
    """Eigenvalues of a small (n <= 8) dense matrix without a library eigensolver.

    Symmetric tridiagonal input goes through Sturm-sequence bisection; anything
    else through the characteristic polynomial (Faddeev--LeVerrier) and
    simultaneous Weierstrass (Durand--Kerner) root iteration.
    """
    M = np.array(M, dtype=complex if np.iscomplexobj(M) else float)
    n = M.shape[0]
    if M.shape != (n, n) or n > 8:
        raise ValueError("oracle is limited to square matrices with n <= 8")
    if not np.iscomplexobj(M) and np.array_equal(M, M.T) and np.all(np.triu(M, 2) == 0):
        return _sturm_bisection(np.diag(M).copy(), np.diag(M, 1).copy())
    coeffs = _charpoly(M)
    return _polish_clusters(coeffs, _durand_kerner(coeffs, max_iter))


def _sturm_count(d, e, x) -> int:
    """Number of eigenvalues of the symmetric tridiagonal (d, e) below x."""
    count = 0
    q = d[0] - x
    if q < 0:
        count += 1
    for i in range(1, len(d)):
        if q == 0:
            q = 1e-300
        q = d[i] - x - e[i - 1] ** 2 / q
        if q < 0:
            count += 1
    return count


def _sturm_bisection(d, e) -> np.ndarray:
    n = len(d)
    radius = np.abs(d) + np.concatenate([[0.0], np.abs(e)]) + np.concatenate([np.abs(e), [0.0]])
    lo, hi = float(np.min(d - radius)) - 1.0, float(np.max(d + radius)) + 1.0
    out = np.empty(n)
    for k in range(n):
        a, b = lo, hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            if _sturm_count(d, e, mid) > k:
                b = mid
            else:
                a = mid
            if b - a < 1e-15 * max(1.0, abs(mid)):
                break
        out[k] = 0.5 * (a + b)
    return out


def _charpoly(M) -> np.ndarray:
    """Monic characteristic polynomial coefficients, highest degree first."""
    n = M.shape[0]
    coeffs = [1.0 + 0j]
    Mk = np.zeros_like(M, dtype=complex)
    eye = np.eye(n)
    c = 1.0 + 0j
    for k in range(1, n + 1):
        Mk = M @ (Mk + c * eye)
        c = -np.trace(Mk) / k
        coeffs.append(c)
    return np.array(coeffs)


def _durand_kerner(coeffs, max_iter: int) -> np.ndarray:
    n = len(coeffs) - 1
    bound = 1.0 + float(np.max(np.abs(coeffs[1:]))) if n else 1.0
    roots = bound * (0.4 + 0.9j) ** np.arange(n)
    for _ in range(max_iter):
        prev = roots.copy()
        for i in range(n):
            num = np.polyval(coeffs, roots[i])
            den = np.prod([roots[i] - roots[j] for j in range(n) if j != i])
            if den == 0:
                den = 1e-300
            roots[i] = roots[i] - num / den
        if np.max(np.abs(roots - prev)) < 1e-15 * max(1.0, float(np.max(np.abs(roots)))):
            return roots
    # multiple roots converge only linearly; hand a settled iterate to the
    # cluster polish
    if np.max(np.abs(roots - prev)) < 1e-6 * max(1.0, float(np.max(np.abs(roots)))):
        return roots
    raise ConvergenceFailure("root iteration did not converge")


def _polish_clusters(coeffs, roots, radius: float = 1e-4) -> np.ndarray:
    """Refine each cluster of ``m`` nearby roots as a root of ``p^(m-1)``.

    Simultaneous iteration only reaches ``sqrt(eps)`` on a double root; the
    ``(m-1)``-th derivative has a simple root there, so Newton restores full
    accuracy.
    """
    roots = np.array(roots, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(roots)))) if roots.size else 1.0
    done = np.zeros(roots.size, dtype=bool)
    for i in range(roots.size):
        if done[i]:
            continue
        members = np.flatnonzero(~done & (np.abs(roots - roots[i]) < radius * scale))
        done[members] = True
        m = members.size
        if m == 1:
            continue
        d = coeffs
        for _ in range(m - 1):
            d = np.polyder(d)
        dd = np.polyder(d)
        z = roots[members].mean()
        for _ in range(50):
            slope = np.polyval(dd, z)
            if slope == 0:
                break
            step = np.polyval(d, z) / slope
            z -= step
            if abs(step) < 1e-16 * scale:
                break
        roots[members] = z
    return roots
