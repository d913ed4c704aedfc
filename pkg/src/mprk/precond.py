"""Fast-diagonalization preconditioner for Kronecker-sum stage operators.

``P^{-1} = (Q_C⊗Q_B⊗Q_A) P_D^{-1} (Q_C^{-1}⊗Q_B^{-1}⊗Q_A^{-1})`` where each
Kronecker factor is split into three strided one-index contractions
``T_L T_M T_R``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exceptions import LengthMismatch, ZeroEigenvalueSum
from .linalg import Precision, SpectralFactor, as_precision, convert, spectral_1d
from .operators import KronSumOperator, ProblemSpec, stage_operator
from .timing import Timer, maybe

__all__ = ["FastDiagPreconditioner", "apply_tensor", "apply_inverse", "build", "build_for_operator"]

_SIDE_LABEL = {"L": "tensor-l", "M": "tensor-m", "R": "tensor-r"}


def apply_tensor(side: str, Q: np.ndarray, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Contract one grid index of ``x`` with ``Q``.

    ``side='R'`` acts on the unit-stride index (``I⊗I⊗Q``), ``'M'`` on the
    stride-n index (``I⊗Q⊗I``), ``'L'`` on the stride-n^2 index (``Q⊗I⊗I``).
    Arithmetic runs in the dtype of ``x``.
    """
    side = side.upper()
    n = Q.shape[0]
    if Q.shape != (n, n) or x.shape != (n ** 3,):
        raise LengthMismatch(f"Q {Q.shape} incompatible with x {x.shape}")
    x = np.ascontiguousarray(x)
    Qc = np.ascontiguousarray(Q, dtype=x.dtype)
    if out is None:
        out = np.empty_like(x)
    _kernels.KERNELS[side](Qc, x, out, n)
    return out


@dataclass(frozen=True, eq=False)
class FastDiagPreconditioner:
    n: int
    factors: tuple[SpectralFactor, SpectralFactor, SpectralFactor]  # x (A), y (B), z (C) directions
    pd_inv: np.ndarray
    precision: Precision

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.pd_inv)

    @property
    def dtype(self) -> np.dtype:
        return self.pd_inv.dtype

    def __call__(self, x: np.ndarray, timer: Timer | None = None) -> np.ndarray:
        return apply_inverse(self, x, timer)

    def dense(self) -> np.ndarray:
        """Assembled ``P = I⊗I⊗A + I⊗B⊗I + C⊗I⊗I`` (test oracle)."""
        A, B, C = (f.astype(Precision.F64).matrix() for f in self.factors)
        eye = np.eye(self.n)
        return np.kron(np.kron(eye, eye), A) + np.kron(np.kron(eye, B), eye) + np.kron(np.kron(C, eye), eye)


def build_for_operator(op: KronSumOperator, precision=Precision.F64) -> FastDiagPreconditioner:
    """Exact fast-diagonalization inverse of a Kronecker-sum operator.

    The identity shift is folded into the x-direction factor only.
    """
    precision = as_precision(precision)
    fa = spectral_1d(op.kind, op.n, op.sigma, op.gamma)
    fb = spectral_1d(op.kind, op.n, 0.0, op.gamma)
    fc = fb
    pd = (fc.lam[:, None, None] + fb.lam[None, :, None] + fa.lam[None, None, :]).reshape(-1)
    scale = max(1.0, float(np.max(np.abs(pd))))
    if np.any(np.abs(pd) <= 1e-14 * scale):
        raise ZeroEigenvalueSum("singular diagonal core: some eigenvalue sum vanishes")
    pd_inv = 1.0 / pd
    factors = tuple(f.astype(precision) for f in (fa, fb, fc))
    return FastDiagPreconditioner(op.n, factors, convert(pd_inv, precision), precision)


def build(p: ProblemSpec, tau: float, a: float, precision=Precision.F64) -> FastDiagPreconditioner:
    """Preconditioner for the stage system ``(I - tau*a*K) y = rhs``."""
    return build_for_operator(stage_operator(p, tau, a), precision)


def apply_inverse(P: FastDiagPreconditioner, x: np.ndarray, timer: Timer | None = None) -> np.ndarray:
    """Seven-step application of ``P^{-1}``; output in ``P``'s dtype."""
    if x.shape != (P.n ** 3,):
        raise LengthMismatch(f"expected length {P.n ** 3}, got {x.shape}")
    dtype = P.dtype if (P.is_complex or not np.iscomplexobj(x)) else np.result_type(P.dtype, np.complex64)
    y = np.array(x, dtype=dtype, order="C")  # always a private copy: y/tmp are ping-ponged
    tmp = np.empty_like(y)
    fa, fb, fc = P.factors
    with maybe(timer, "precond"):
        for side, Q in (("R", fa.Qinv), ("M", fb.Qinv), ("L", fc.Qinv)):
            with maybe(timer, _SIDE_LABEL[side]):
                apply_tensor(side, Q, y, tmp)
            y, tmp = tmp, y
        with maybe(timer, "diag"):
            y *= P.pd_inv
        for side, Q in (("R", fa.Q), ("M", fb.Q), ("L", fc.Q)):
            with maybe(timer, _SIDE_LABEL[side]):
                apply_tensor(side, Q, y, tmp)
            y, tmp = tmp, y
    return y
