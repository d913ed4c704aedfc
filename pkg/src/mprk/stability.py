"""Linear stability of Runge--Kutta tableaux.

Evaluates ``R(z) = 1 + z b^T (I - zA)^{-1} e`` with ``A = A_high + A_eps``,
scans it over rectangular windows of the complex plane, and rounds the
low-precision coefficients to narrower IEEE 754 binary formats.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import PoleAtTwo, SingularSystem
from .tableaux import ButcherTableau

__all__ = [
    "FloatFormat",
    "StabilityGrid",
    "round_to_format",
    "stability_function",
    "corrected_midpoint_reference",
    "truncate_eps",
    "region_scan",
    "grid_to_csv",
]


BOUNDARY_SNAP = 8 * np.finfo(float).eps


class FloatFormat(enum.Enum):
    """IEEE 754 binary interchange formats as (significand bits, emin, emax)."""

    Binary16 = (11, -14, 15)
    Binary32 = (24, -126, 127)

    @property
    def precision(self) -> int:
        return self.value[0]

    @property
    def emin(self) -> int:
        return self.value[1]

    @property
    def emax(self) -> int:
        return self.value[2]

    @property
    def max_finite(self) -> float:
        return math.ldexp(2.0 - math.ldexp(1.0, 1 - self.precision), self.emax)


def round_to_format(x: float, fmt: FloatFormat) -> float:
    """Round a binary64 value to ``fmt`` (round-to-nearest, ties-to-even).

    Subnormals of the target format are produced by clamping the exponent at
    ``emin``; values past the largest finite number become signed infinity.
    The result is returned widened back to a Python float.
    """
    x = float(x)
    if x == 0.0 or not math.isfinite(x):
        return x
    _, e = math.frexp(x)
    exp = max(e - 1, fmt.emin)
    quantum = exp - (fmt.precision - 1)
    # scaling by a power of two is exact; round() on a float is ties-to-even
    r = round(math.ldexp(x, -quantum))
    y = math.ldexp(float(r), quantum)
    if abs(y) > fmt.max_finite:
        return math.copysign(math.inf, x)
    return y


def _pivoted_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting in the dtype of ``M``."""
    M = M.copy()
    y = rhs.copy()
    q = M.shape[0]
    for k in range(q):
        piv = k + int(np.argmax(np.abs(M[k:, k])))
        if M[piv, k] == 0:
            raise SingularSystem("zero pivot")
        if piv != k:
            M[[k, piv]] = M[[piv, k]]
            y[[k, piv]] = y[[piv, k]]
        for i in range(k + 1, q):
            m = M[i, k] / M[k, k]
            if m != 0:
                M[i, k:] -= m * M[k, k:]
                y[i] -= m * y[k]
    for k in range(q - 1, -1, -1):
        y[k] = (y[k] - M[k, k + 1:] @ y[k + 1:]) / M[k, k]
    return y


def stability_function(t: ButcherTableau, z: complex) -> complex:
    """Evaluate R(z) through a dense partially pivoted solve.

    The elimination runs in extended precision: corrector chains make
    ``I - zA`` ill-conditioned (growth like ``|z/2|^p``) although ``R`` itself
    is benign, and binary64 alone loses several digits there.
    """
    z = complex(z)
    M64 = np.eye(t.q, dtype=complex) - z * t.A
    if not np.all(np.isfinite(M64)) or np.linalg.cond(M64) > 1e15:
        raise SingularSystem(f"I - zA singular to working precision at z={z}")
    zl = np.clongdouble(z)
    M = np.eye(t.q, dtype=np.clongdouble) - zl * t.A.astype(np.longdouble)
    y = _pivoted_solve(M, np.ones(t.q, dtype=np.clongdouble))
    if not np.all(np.isfinite(y)):
        raise SingularSystem(f"I - zA singular at z={z}")
    return complex(1 + zl * (t.b.astype(np.longdouble) @ y))


def corrected_midpoint_reference(z: complex) -> complex:
    """Closed form ``(z + 2) / (2 - z)`` shared by every corrector count."""
    z = complex(z)
    if z == 2:
        raise PoleAtTwo("R(z) has a pole at z = 2")
    return (z + 2) / (2 - z)


def truncate_eps(t: ButcherTableau, fmt: FloatFormat | str) -> ButcherTableau:
    """Copy of ``t`` with every ``A_eps`` entry rounded to ``fmt``."""
    fmt = _as_format(fmt)
    A_eps = np.vectorize(lambda v: round_to_format(v, fmt), otypes=[float])(t.A_eps)
    return ButcherTableau(name=f"{t.name}@{fmt.name}", A_high=t.A_high, A_eps=A_eps, b=t.b)


def _as_format(fmt) -> FloatFormat:
    if isinstance(fmt, FloatFormat):
        return fmt
    aliases = {"f16": FloatFormat.Binary16, "binary16": FloatFormat.Binary16,
               "f32": FloatFormat.Binary32, "binary32": FloatFormat.Binary32}
    try:
        return aliases[str(fmt).lower()]
    except KeyError:
        raise ValueError(f"unknown float format {fmt!r}") from None


@dataclass
class StabilityGrid:
    re_range: tuple[float, float]
    im_range: tuple[float, float]
    nx: int
    ny: int
    values: np.ndarray  # (nx, ny) array of |R(z)|
    stable: np.ndarray  # (nx, ny) boolean

    @property
    def re(self) -> np.ndarray:
        return np.linspace(*self.re_range, self.nx)

    @property
    def im(self) -> np.ndarray:
        return np.linspace(*self.im_range, self.ny)

    def count_stable(self) -> int:
        return int(np.count_nonzero(self.stable))


def _abs_r_batch(t: ButcherTableau, z: np.ndarray) -> np.ndarray:
    """|R(z)| for an array of points; singular points map to +inf."""
    q = t.q
    A = t.A
    flat = z.ravel()
    M = np.eye(q, dtype=complex)[None, :, :] - flat[:, None, None] * A[None, :, :]
    e = np.ones((flat.size, q, 1), dtype=complex)
    out = np.empty(flat.size)
    with np.errstate(all="ignore"):
        try:
            y = np.linalg.solve(M, e)[..., 0]
            r = 1.0 + flat * (y @ t.b)
            out[:] = np.abs(r)
        except np.linalg.LinAlgError:
            # fall back point by point when some system in the batch is singular
            for k, zk in enumerate(flat):
                try:
                    out[k] = abs(stability_function(t, zk))
                except SingularSystem:
                    out[k] = np.inf
    out[~np.isfinite(out)] = np.inf
    # guard against near-poles that slipped through the batched solve
    cond = np.linalg.cond(M)
    out[~(cond < 1e15)] = np.inf
    # |R| = 1 exactly on boundaries such as the imaginary axis for midpoint;
    # absorb the last-bit noise of the solve there
    out[np.abs(out - 1.0) <= BOUNDARY_SNAP] = 1.0
    return out.reshape(z.shape)


def region_scan(t: ButcherTableau, re_range, im_range, nx: int, ny: int) -> StabilityGrid:
    """Sample |R| on an ``nx`` by ``ny`` lattice (endpoints included)."""
    if nx < 2 or ny < 2:
        raise ValueError("nx and ny must be >= 2")
    if nx * ny > 10**7:
        raise ValueError("grid too large (nx*ny > 1e7)")
    re_range = (float(re_range[0]), float(re_range[1]))
    im_range = (float(im_range[0]), float(im_range[1]))
    if not (re_range[0] < re_range[1] and im_range[0] < im_range[1]):
        raise ValueError("ranges must be nonempty")
    xs = np.linspace(*re_range, nx)
    ys = np.linspace(*im_range, ny)
    values = np.empty((nx, ny))
    for i, x in enumerate(xs):
        values[i] = _abs_r_batch(t, x + 1j * ys)
    return StabilityGrid(re_range, im_range, nx, ny, values, values <= 1.0)


def grid_to_csv(grid: StabilityGrid) -> str:
    lines = ["re,im,abs_r,stable"]
    for i, x in enumerate(grid.re):
        for j, y in enumerate(grid.im):
            lines.append(f"{_fmt(x)},{_fmt(y)},{_fmt(grid.values[i, j])},{int(grid.stable[i, j])}")
    return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)
