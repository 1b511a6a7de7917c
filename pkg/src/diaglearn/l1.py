"""Minimum-l1 coefficient vectors for diagonal generators.

The optimal single-shot variance for q = alpha . theta is ||a||_1^2 / (4 t^2),
minimised over all a with h a = alpha and sum(a) = 0.  We solve the split
standard form (a = a+ - a-) with a two-phase tableau simplex under Bland's
rule, so the answer is always a vertex with at most m + 1 nonzeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Sequence

import numpy as np

from .errors import Infeasible, RankDeficient, SizeExceeded
from .pauli import GeneratorSet, build_eigenvalue_matrix

EXPLICIT_LIMIT = 1 << 14
FEAS_TOL = 1e-9
PRUNE_TOL = 1e-12
_PIVOT_TOL = 1e-11
ORACLE_MAX_COLUMNS = 64
ORACLE_MAX_ROWS = 7
ORACLE_MAX_SUBSETS = 500_000


@dataclass(frozen=True)
class L1Problem:
    """Eigenvalue matrix ``h`` (no ones row), target ``alpha`` and time ``t``.

    ``columns`` holds the basis label of each column of ``h``.
    """

    h: np.ndarray
    alpha: np.ndarray
    t: float = 1.0
    columns: tuple[int, ...] = ()

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h, dtype=float))
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "alpha", alpha)
        if h.shape[0] != alpha.shape[0]:
            raise ValueError(f"alpha has {alpha.shape[0]} entries for {h.shape[0]} generators")
        if not self.t > 0:
            raise ValueError("t must be positive")
        if not self.columns:
            object.__setattr__(self, "columns", tuple(range(h.shape[1])))
        elif len(self.columns) != h.shape[1]:
            raise ValueError("one label per column required")

    @classmethod
    def from_generators(cls, gens: GeneratorSet, alpha: Sequence[float], t: float = 1.0,
                        columns: Sequence[int] | None = None) -> "L1Problem":
        cols = tuple(range(1 << gens.n)) if columns is None else tuple(int(c) for c in columns)
        if len(cols) > EXPLICIT_LIMIT:
            raise SizeExceeded(f"{len(cols)} explicit columns exceed the limit {EXPLICIT_LIMIT}")
        return cls(build_eigenvalue_matrix(gens, columns=cols), np.asarray(alpha, float), t, cols)

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @property
    def N(self) -> int:
        return self.h.shape[1]

    @property
    def trivial(self) -> bool:
        return not np.any(self.alpha)

    def constraint_matrix(self) -> np.ndarray:
        return np.vstack([np.ones(self.N), self.h])

    def rhs(self) -> np.ndarray:
        return np.concatenate([[0.0], self.alpha])


@dataclass(frozen=True)
class DualCertificate:
    """Multipliers y for the rows [ones; h] of the split LP.

    Feasibility is |(y0 + sum_j y_j h_jx)| <= 1 on every column and the
    objective alpha . y[1:] equals ||a||_1 at optimum.  Rescaled by the
    objective, y[1:] is the optimal direction beta (alpha . beta = 1) whose
    generator beta . g has seminorm 2 / ||a||_1.
    """

    y: np.ndarray
    objective: float

    @property
    def beta(self) -> np.ndarray:
        if self.objective == 0:
            return np.zeros(len(self.y) - 1)
        return self.y[1:] / self.objective

    @property
    def xi(self) -> float:
        """Value of the max-xi dual; equals 2 / ||a||_1."""
        return math.inf if self.objective == 0 else 2.0 / self.objective

    def column_values(self, h: np.ndarray) -> np.ndarray:
        return self.y[0] + self.y[1:] @ h

    def max_violation(self, h: np.ndarray) -> float:
        return float(np.max(np.abs(self.column_values(h))) - 1.0)

    def seminorm(self, h: np.ndarray) -> float:
        """max - min eigenvalue of beta . g over the given columns."""
        v = self.beta @ h
        return float(v.max() - v.min())


@dataclass(frozen=True)
class L1Solution:
    support: tuple[int, ...]
    values: tuple[float, ...]
    l1: float
    t: float
    dual: DualCertificate | None = field(default=None, compare=False)

    @property
    def l0(self) -> int:
        return len(self.support)

    @property
    def bound(self) -> float:
        return self.l1 ** 2 / (4 * self.t ** 2)

    def items(self) -> list[tuple[int, float]]:
        return list(zip(self.support, self.values))

    def as_dict(self) -> dict[int, float]:
        return dict(self.items())

    def dense(self, columns: Sequence[int]) -> np.ndarray:
        lookup = self.as_dict()
        return np.array([lookup.get(c, 0.0) for c in columns])

    @classmethod
    def from_vector(cls, a: np.ndarray, columns: Sequence[int], t: float,
                    dual: DualCertificate | None = None) -> "L1Solution":
        a = np.where(np.abs(a) < PRUNE_TOL, 0.0, a)
        nz = [(int(columns[i]), float(a[i])) for i in np.flatnonzero(a)]
        nz.sort()
        return cls(tuple(x for x, _ in nz), tuple(v for _, v in nz), float(np.abs(a).sum()), t, dual)


def _check_rank(prob: L1Problem) -> None:
    M, b = prob.constraint_matrix(), prob.rhs()
    r = np.linalg.matrix_rank(M)
    if r < M.shape[0]:
        rb = np.linalg.matrix_rank(np.column_stack([M, b]))
        if rb > r:
            raise Infeasible("alpha lies outside the row space of [ones; h]")
        raise RankDeficient(f"[ones; h] has rank {r} < {M.shape[0]}")


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _bland(T: np.ndarray, basis: list[int], ncols: int) -> None:
    """Iterate to optimality; the objective row is the last row of ``T``."""
    rows = len(basis)
    while True:
        red = T[-1, :ncols]
        candidates = np.flatnonzero(red < -_PIVOT_TOL)
        if candidates.size == 0:
            return
        c = int(candidates[0])
        colv = T[:rows, c]
        pos = np.flatnonzero(colv > _PIVOT_TOL)
        if pos.size == 0:
            raise RuntimeError("unbounded LP")  # c >= 0 makes this unreachable
        ratios = T[pos, -1] / colv[pos]
        best = ratios.min()
        ties = pos[ratios <= best + _PIVOT_TOL * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, r, c)
        basis[r] = c


def simplex(A: np.ndarray, b: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, list[int], np.ndarray]:
    """min c.x s.t. A x = b, x >= 0 for full-row-rank A.

    Returns the basic optimum, its basis and the dual y with A^T y <= c.
    """
    rows, cols = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    As, bs = A * sign[:, None], b * sign
    T = np.zeros((rows + 1, cols + rows + 1))
    T[:rows, :cols] = As
    T[:rows, cols:cols + rows] = np.eye(rows)
    T[:rows, -1] = bs
    T[-1, :cols] = -As.sum(axis=0)
    T[-1, -1] = -bs.sum()
    basis = list(range(cols, cols + rows))
    _bland(T, basis, cols + rows)
    if -T[-1, -1] > FEAS_TOL * max(1.0, np.abs(b).sum()):
        raise Infeasible("phase one ended with positive artificial mass")
    for r in range(rows):
        if basis[r] >= cols:
            nz = np.flatnonzero(np.abs(T[r, :cols]) > _PIVOT_TOL)
            if nz.size == 0:
                raise RankDeficient("redundant constraint row")
            _pivot(T, r, int(nz[0]))
            basis[r] = int(nz[0])

    T2 = np.zeros((rows + 1, cols + 1))
    T2[:rows, :cols] = T[:rows, :cols]
    T2[:rows, -1] = T[:rows, -1]
    T2[-1, :cols] = c
    for r, j in enumerate(basis):
        T2[-1] -= c[j] * T2[r]
    _bland(T2, basis, cols)

    B = A[:, basis]
    xB = np.linalg.solve(B, b)
    x = np.zeros(cols)
    x[basis] = np.where(np.abs(xB) < PRUNE_TOL, 0.0, xB)
    y = np.linalg.solve(B.T, c[basis])
    return x, basis, y


def solve_l1(prob: L1Problem) -> L1Solution:
    """Vertex optimum of min ||a||_1 s.t. h a = alpha, sum(a) = 0."""
    if prob.N > EXPLICIT_LIMIT:
        raise SizeExceeded(f"{prob.N} explicit columns exceed the limit {EXPLICIT_LIMIT}")
    _check_rank(prob)
    if prob.trivial:
        return L1Solution((), (), 0.0, prob.t, DualCertificate(np.zeros(prob.m + 1), 0.0))
    M = prob.constraint_matrix()
    A = np.hstack([M, -M])
    x, _, y = simplex(A, prob.rhs(), np.ones(2 * prob.N))
    a = x[:prob.N] - x[prob.N:]
    dual = DualCertificate(y, float(prob.alpha @ y[1:]))
    return L1Solution.from_vector(a, prob.columns, prob.t, dual)


def oracle_l1(prob: L1Problem) -> L1Solution:
    """Brute force over every square (m+1)-column subsystem of [ones; h]."""
    if prob.N > ORACLE_MAX_COLUMNS or prob.m > ORACLE_MAX_ROWS:
        raise SizeExceeded("oracle limited to N <= 64 and m <= 7")
    k = prob.m + 1
    if math.comb(prob.N, k) > ORACLE_MAX_SUBSETS:
        raise SizeExceeded(f"C({prob.N}, {k}) subsets is too many for enumeration")
    _check_rank(prob)
    if prob.trivial:
        return L1Solution((), (), 0.0, prob.t)
    M, b = prob.constraint_matrix(), prob.rhs()
    subsets = np.array(list(combinations(range(prob.N), k)))
    blocks = M[:, subsets].transpose(1, 0, 2)
    dets = np.linalg.det(blocks)
    ok = np.abs(dets) > 1e-9
    subsets, blocks = subsets[ok], blocks[ok]
    sols = np.linalg.solve(blocks, np.broadcast_to(b, (len(blocks), k))[..., None])[..., 0]
    norms = np.abs(sols).sum(axis=1)
    best = int(np.argmin(norms))
    a = np.zeros(prob.N)
    a[subsets[best]] = sols[best]
    return L1Solution.from_vector(a, prob.columns, prob.t)


def closed_form_independent(alpha: Sequence[float], t: float = 1.0) -> float:
    """Bound for independent generators: ||alpha||_inf^2 / (4 t^2)."""
    return float(np.max(np.abs(alpha))) ** 2 / (4 * t ** 2) if len(alpha) else 0.0


def bosonic_columns(m: int, P: int) -> list[tuple[int, ...]]:
    """Photon-number tuples with total at most P, lexicographic."""
    if P < 1 or m < 1:
        raise ValueError("need m >= 1 and P >= 1")
    if math.comb(P + m, m) > EXPLICIT_LIMIT:
        raise SizeExceeded(f"C({P + m}, {m}) columns exceed the limit {EXPLICIT_LIMIT}")
    return [p for p in product(range(P + 1), repeat=m) if sum(p) <= P]


def bosonic_matrix(m: int, P: int) -> np.ndarray:
    """Row j holds the occupation of mode j for every admissible tuple."""
    return np.array(bosonic_columns(m, P), dtype=float).T.reshape(m, -1)


@dataclass(frozen=True)
class BosonicProblem:
    m: int
    P: int
    alpha: tuple[float, ...]
    t: float = 1.0

    def __post_init__(self):
        if self.P < 1:
            raise ValueError("P must be at least 1")
        if len(self.alpha) != self.m:
            raise ValueError("alpha must have one entry per mode")

    def to_l1(self) -> L1Problem:
        return L1Problem(bosonic_matrix(self.m, self.P), np.asarray(self.alpha, float), self.t)


def closed_form_bosonic(alpha: Sequence[float], P: int, t: float = 1.0) -> float:
    """max(||alpha||_{1,+}^2, ||alpha||_{1,-}^2) / (P^2 t^2)."""
    if P < 1:
        raise ValueError("P must be at least 1")
    a = np.asarray(alpha, float)
    pos, neg = a[a > 0].sum(), -a[a < 0].sum()
    return max(pos, neg) ** 2 / (P ** 2 * t ** 2)


def solution_to_json(sol: L1Solution) -> dict:
    return {
        "a": [{"x": x, "v": v} for x, v in sol.items()],
        "l1": sol.l1,
        "l0": sol.l0,
        "bound": sol.bound,
        "dual": [] if sol.dual is None else [float(v) + 0.0 for v in sol.dual.y],
    }


def solution_from_json(doc: dict, t: float) -> L1Solution:
    items = sorted((int(e["x"]), float(e["v"])) for e in doc["a"])
    dual = None
    if doc.get("dual"):
        y = np.asarray(doc["dual"], float)
        dual = DualCertificate(y, float(doc["l1"]))
    return L1Solution(tuple(x for x, _ in items), tuple(v for _, v in items), float(doc["l1"]), t, dual)
