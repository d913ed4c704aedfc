"""Butcher tableaux with a split between high- and low-precision coefficients.

Every coefficient matrix is stored as ``A = A_high + A_eps`` where ``A_eps``
holds the entries that multiply low-precision right-hand-side evaluations
(including the implicit diagonal).  Abscissae are row sums of ``A``.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Method",
    "ButcherTableau",
    "builtin",
    "midpoint_corrected",
    "validate",
    "parse_method",
]

ROW_SUM_TOL = 1e-13
WEIGHT_SUM_TOL = 1e-13


class Method(enum.Enum):
    M4s3pA = "4s3pA"
    M4s3pB = "4s3pB"
    M4s3pC = "4s3pC"


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """Immutable tableau.  ``c`` is derived from row sums unless given."""

    name: str
    A_high: np.ndarray
    A_eps: np.ndarray
    b: np.ndarray
    c: np.ndarray = field(default=None)

    def __post_init__(self):
        A_high = np.array(self.A_high, dtype=np.float64)
        A_eps = np.array(self.A_eps, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64)
        if A_high.ndim != 2 or A_high.shape[0] != A_high.shape[1]:
            raise ValueError("A_high must be square")
        if A_eps.shape != A_high.shape or b.shape != (A_high.shape[0],):
            raise ValueError("inconsistent tableau shapes")
        c = (A_high + A_eps).sum(axis=1) if self.c is None else np.array(self.c, dtype=np.float64)
        for arr in (A_high, A_eps, b, c):
            arr.setflags(write=False)
        object.__setattr__(self, "A_high", A_high)
        object.__setattr__(self, "A_eps", A_eps)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def q(self) -> int:
        return self.A_high.shape[0]

    @property
    def A(self) -> np.ndarray:
        return self.A_high + self.A_eps

    def implicit_stages(self) -> list[int]:
        return [i for i in range(self.q) if self.A_eps[i, i] != 0.0 or self.A_high[i, i] != 0.0]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "q": self.q,
            "c": self.c.tolist(),
            "A_high": self.A_high.tolist(),
            "A_eps": self.A_eps.tolist(),
            "b": self.b.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ButcherTableau":
        """Build from the JSON document layout; ``c`` is re-derived from row sums."""
        try:
            t = cls(name=str(d.get("name", "custom")), A_high=d["A_high"], A_eps=d["A_eps"], b=d["b"])
        except KeyError as exc:
            raise ValueError(f"tableau document missing field {exc}") from None
        if "q" in d and int(d["q"]) != t.q:
            raise ValueError(f"declared q={d['q']} does not match matrix size {t.q}")
        return t

    @classmethod
    def from_json(cls, text: str) -> "ButcherTableau":
        return cls.from_dict(json.loads(text))


# Coefficients exactly as printed (15 significant digits), parsed once.
_COEFFS = {
    Method.M4s3pA: {
        "eps": {(1, 1): "0.788675134594813", (3, 1): "0.051944240459852", (3, 3): "0.788675134594813"},
        "high": {
            (2, 1): "0.211324865405187",
            (3, 1): "0.709495523817170",
            (3, 2): "-0.86531425061942",
            (4, 1): "0.705123240545107",
            (4, 2): "0.943370088535775",
            (4, 3): "-0.859818194486069",
        },
        "b": ["0", "0.5", "0", "0.5"],
    },
    Method.M4s3pB: {
        "eps": {
            (1, 1): "0.5",
            (2, 2): "0.5",
            (3, 3): "0.5",
            (4, 4): "0.5",
            (2, 1): "-2.376349376129689",
            (3, 1): "-2.951484396921318",
            (3, 2): "0.475891038758779",
            (4, 1): "-0.573861819468268",
            # a42 + a42^eps = -3/2 (row 4 of the underlying L-stable DIRK); the
            # frequently reproduced 0.051944240459852 duplicates 4s3pA's a31^eps
            # and breaks consistency (c4 != 1, sum b_i c_i != 1/2)
            (4, 2): "-3.867724727682735",
            (4, 3): "-1.211868223075524",
        },
        "high": {
            (2, 1): "2.543016042796356",
            (3, 1): "2.451484396921318",
            (3, 2): "0.024108961241221",
            (4, 1): "2.073861819468268",
            (4, 2): "2.367724727682735",
            (4, 3): "1.711868223075524",
        },
        "b": ["1.5", "-1.5", "0.5", "0.5"],
    },
    Method.M4s3pC: {
        "eps": {
            (1, 1): "0.511243008730995",
            (2, 1): "-1.999347282862640",
            (2, 2): "1.957161067302390",
            (3, 1): "0.443312893511937",
            (3, 2): "-0.573131033672219",
            (3, 3): "0.128283796414019",
            (4, 1): "-2",
            (4, 2): "-0.160330320741428",
            (4, 3): "0.579597314161362",
            (4, 4): "1.484688928981990",
        },
        "high": {
            (2, 1): "-0.050470366527530",
            (3, 1): "0.368613367355336",
            (3, 2): "0.273504374252976",
            (4, 1): "1.803794668975043",
            (4, 2): "0.097485042980759",
            (4, 3): "-1.895660952342050",
        },
        "b": ["0.002837446974069", "0.336264433650450", "0.806376720267787", "-0.145478600892306"],
    },
}


def _fill(entries: dict, q: int) -> np.ndarray:
    m = np.zeros((q, q))
    for (i, j), s in entries.items():
        m[i - 1, j - 1] = float(s)
    return m


def builtin(method: Method | str) -> ButcherTableau:
    """Return one of the three four-stage, third-order mixed-precision methods."""
    method = Method(method) if not isinstance(method, Method) else method
    spec = _COEFFS[method]
    return ButcherTableau(
        name=method.value,
        A_high=_fill(spec["high"], 4),
        A_eps=_fill(spec["eps"], 4),
        b=[float(s) for s in spec["b"]],
    )


def midpoint_corrected(p: int) -> ButcherTableau:
    """Implicit midpoint rule followed by ``p`` explicit high-precision correctors.

    The first stage is the low-precision implicit solve; stage ``k >= 1`` is
    ``u + tau/2 f(y_{k-1})`` and the update uses the last stage only.
    """
    if p < 0:
        raise ValueError("corrector count must be >= 0")
    q = p + 1
    A_eps = np.zeros((q, q))
    A_eps[0, 0] = 0.5
    A_high = np.zeros((q, q))
    for k in range(1, q):
        A_high[k, k - 1] = 0.5
    b = np.zeros(q)
    b[-1] = 1.0
    return ButcherTableau(name=f"midpoint{p}", A_high=A_high, A_eps=A_eps, b=b)


def parse_method(spec: str) -> ButcherTableau:
    """Resolve ``4s3pA|4s3pB|4s3pC|midpointP`` to a tableau."""
    s = spec.strip()
    for m in Method:
        if s.lower() == m.value.lower() or s.upper() == m.name.upper():
            return builtin(m)
    if s.lower().startswith("midpoint"):
        rest = s[len("midpoint"):]
        if rest.isdigit():
            return midpoint_corrected(int(rest))
    raise ValueError(f"unknown method {spec!r}")


def validate(t: ButcherTableau) -> list[str]:
    """List every violated tableau invariant; an empty list means valid."""
    problems = []
    A = t.A
    if t.q < 1:
        problems.append("q < 1")
    rows = A.sum(axis=1)
    bad = np.flatnonzero(np.abs(rows - t.c) > ROW_SUM_TOL)
    if bad.size:
        problems.append(f"c != row sums of A at rows {bad.tolist()}")
    sb = float(np.sum(t.b))
    if abs(sb - 1.0) > WEIGHT_SUM_TOL:
        problems.append(f"sum(b) ≠ 1 (got {sb!r})")
    if np.any(np.triu(A, 1) != 0.0):
        problems.append("A_high + A_eps is not lower-triangular")
    if np.any(np.diag(t.A_high) != 0.0):
        problems.append("A_high has a nonzero diagonal entry")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(t.b))):
        problems.append("non-finite coefficient")
    return problems
