"""Crossover: turn an approximate iterate into a verified basic optimal solution.

The procedure guesses which columns are basic from complementarity,
assembles a nonsingular basis around that guess and lets the primal
simplex finish the job. Verification never looks at the snapshot; it
rebuilds the solution from the basis alone.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .cancel import CancelFlag
from .kkt import Iterate, Tolerances, absolute_violation
from .lp import LinearProgram
from .simplex import AT_LOWER, AT_UPPER, BASIC, FIXED, ZERO, Basis, SingularBasisError
from .sparse import matvec, matvec_transpose

CANDIDATE = 0

SUCCESS = "optimal"
FAILED_VERIFY = "unverified"
NUMERICAL = "numerical"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class Partition:
    """Per-column guess plus the candidate columns in preference order."""

    status: np.ndarray
    ranked: np.ndarray
    score: np.ndarray
    fallback: np.ndarray  # nearer-bound status, used for candidates left out of the basis

    @property
    def candidates(self) -> set[int]:
        return set(self.ranked.tolist())


def guess_partition(lp: LinearProgram, it: Iterate, eps: float = 1e-9) -> Partition:
    """Split columns into basic candidates and columns snapped to a bound.

    A column is a candidate when its distance to the nearest finite bound,
    weighted by its column norm, beats its reduced cost and exceeds
    ``eps``. Free columns are always candidates. Everything else sits at
    the nearer bound.
    """
    x, z = it.x, it.z
    lo, up = lp.lower, lp.upper
    d_lo = np.where(np.isfinite(lo), x - lo, np.inf)
    d_up = np.where(np.isfinite(up), up - x, np.inf)
    dist = np.maximum(np.minimum(d_lo, d_up), 0.0)
    weight = np.maximum(lp.A.col_norms(), 1e-300)
    interior = dist * weight
    free = ~np.isfinite(lo) & ~np.isfinite(up)
    cand = free | ((interior > np.abs(z)) & (dist > eps) & (lo != up))

    nearer = np.where(d_up < d_lo, AT_UPPER, AT_LOWER).astype(np.int8)
    status = nearer.copy()
    status[cand] = CANDIDATE
    idx = np.nonzero(cand)[0]
    score = np.where(free, np.inf, interior)
    # descending interiorness, then ascending |z|, then index
    order = np.lexsort((idx, np.abs(z[idx]), -score[idx]))
    return Partition(status, idx[order], score, nearer)


def _is_unit_column(lp: LinearProgram, j: int) -> int | None:
    lo, hi = lp.A.indptr[j], lp.A.indptr[j + 1]
    if hi - lo == 1 and abs(lp.A.data[lo]) == 1.0 and lp.lower[j] != lp.upper[j]:
        return int(lp.A.indices[lo])
    return None


def build_basis(lp: LinearProgram, partition: Partition, independence_tol: float = 1e-7) -> Basis:
    """Pick ``nrows`` independent columns, favouring ranked candidates.

    Candidates are taken greedily in rank order, skipping any column that
    is (numerically) in the span of those already chosen. Remaining rows
    are covered by slack columns of the LP, then by row logicals. A
    basis that still fails to factorize goes through the repair loop.
    """
    m, n = lp.nrows, lp.ncols
    Q = np.zeros((m, m))
    chosen: list[int] = []

    def try_add(j: int) -> bool:
        a = simplex.augmented_column(lp, j)
        na = np.linalg.norm(a)
        if na == 0.0:
            return False
        r = len(chosen)
        v = a - Q[:, :r] @ (Q[:, :r].T @ a)
        v -= Q[:, :r] @ (Q[:, :r].T @ v)
        nv = np.linalg.norm(v)
        if nv <= independence_tol * na:
            return False
        Q[:, r] = v / nv
        chosen.append(j)
        return True

    for j in partition.ranked:
        if len(chosen) == m:
            break
        try_add(int(j))
    if len(chosen) < m:
        slack_rows = {}
        for j in range(n):
            i = _is_unit_column(lp, j)
            if i is not None:
                slack_rows.setdefault(i, j)
        taken = set(chosen)
        for i in sorted(slack_rows):
            if len(chosen) == m:
                break
            if slack_rows[i] not in taken:
                try_add(slack_rows[i])
        for i in range(m):
            if len(chosen) == m:
                break
            try_add(n + i)

    hint = np.concatenate([partition.fallback, np.full(m, FIXED)])
    basis = Basis.from_basic(lp, np.array(chosen, dtype=np.int64), hint)
    return simplex.repair_basis(lp, basis)


@dataclass(frozen=True)
class Verification:
    ok: bool
    reason: str
    iterate: Iterate | None = None
    violation: float = math.inf
    objective: float = math.nan

    def __bool__(self) -> bool:
        return self.ok


def basic_solution(lp: LinearProgram, basis: Basis) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Recompute ``(x_aug, y, z_aug)`` from the basis alone."""
    factors = simplex.factorize(lp, basis)
    n = lp.ncols
    xN = basis.nonbasic_values(lp)
    rhs = lp.b - matvec(lp.A, xN[:n]) - xN[n:]
    x = xN.copy()
    x[basis.basic] = factors.ftran(rhs)
    c = np.concatenate([lp.c, np.zeros(lp.nrows)])
    y = factors.btran(c[basis.basic])
    z = c - np.concatenate([matvec_transpose(lp.A, y), y])
    return x, y, z


def verify_basic_optimal(lp: LinearProgram, basis: Basis, eps_abs: float = 1e-6) -> Verification:
    """Check primal feasibility and reduced-cost signs of the basic solution.

    Complementarity holds by construction since every nonbasic column is
    placed exactly on a bound. The answer depends only on ``(lp, basis)``.
    """
    try:
        basis.validate(lp)
        x, y, z = basic_solution(lp, basis)
    except SingularBasisError as err:
        return Verification(False, f"singular basis: {err}")
    except ValueError as err:
        return Verification(False, f"invalid basis: {err}")
    n = lp.ncols
    lo, up = simplex.augmented_bounds(lp)
    st = basis.status
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        return Verification(False, "non-finite basic solution")
    bound_viol = float(np.max(np.maximum(lo - x, 0) + np.maximum(x - up, 0), initial=0.0))
    row_viol = float(np.max(np.abs(lp.b - matvec(lp.A, x[:n]) - x[n:]), initial=0.0))
    dual_viol = np.zeros_like(z)
    dual_viol = np.where(st == AT_LOWER, np.maximum(-z, 0), dual_viol)
    dual_viol = np.where(st == AT_UPPER, np.maximum(z, 0), dual_viol)
    dual_viol = np.where((st == ZERO) | (st == BASIC), np.abs(z), dual_viol)
    dual_viol = float(np.max(dual_viol, initial=0.0))
    it = Iterate(x[:n].copy(), y, z[:n].copy())
    viol = max(bound_viol, row_viol, dual_viol, absolute_violation(lp, it))
    obj = float(lp.c @ it.x)
    if bound_viol > eps_abs or row_viol > eps_abs:
        return Verification(False, f"primal infeasible ({max(bound_viol, row_viol):.3e})", it, viol, obj)
    if dual_viol > eps_abs:
        return Verification(False, f"reduced-cost sign violation ({dual_viol:.3e})", it, viol, obj)
    if viol > eps_abs:
        return Verification(False, f"absolute violation {viol:.3e}", it, viol, obj)
    return Verification(True, "ok", it, viol, obj)


@dataclass(frozen=True, eq=False)
class CrossoverTask:
    lp: LinearProgram
    snapshot: Iterate
    threshold: float
    tolerances: Tolerances = Tolerances()
    cancel: CancelFlag = field(default_factory=CancelFlag)
    max_pivots: int | None = None
    label: str | None = None


@dataclass(eq=False)
class CrossoverResult:
    status: str
    threshold: float
    pivots: int = 0
    wall_time: float = 0.0
    violation: float = math.inf
    basis: Basis | None = None
    iterate: Iterate | None = None
    objective: float = math.nan
    detail: str = ""

    @property
    def success(self) -> bool:
        return self.status == SUCCESS

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "threshold": self.threshold,
            "pivots": self.pivots,
            "wall_time": self.wall_time,
            "violation": self.violation if math.isfinite(self.violation) else None,
            "objective": self.objective if math.isfinite(self.objective) else None,
            "detail": self.detail,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def initial_basis(lp: LinearProgram, it: Iterate, eps: float = 1e-9) -> Basis:
    return build_basis(lp, guess_partition(lp, it, eps))


def run_crossover(task: CrossoverTask) -> CrossoverResult:
    """Partition guess, basis build, simplex cleanup, verification."""
    t0 = time.perf_counter()
    lp, eps_abs = task.lp, task.tolerances.eps_abs

    def done(status, detail="", stats=None, **kw):
        pivots = stats.iterations if stats is not None else 0
        return CrossoverResult(status, task.threshold, pivots, time.perf_counter() - t0, detail=detail, **kw)

    if task.cancel.is_set():
        return done(simplex.CANCELLED)
    try:
        basis = initial_basis(lp, task.snapshot)
        res = simplex.primal_simplex(lp, basis, eps_abs=eps_abs, cancel=task.cancel, max_iterations=task.max_pivots)
    except simplex.InfeasibleError as err:
        return done(INFEASIBLE, str(err))
    except simplex.UnboundedError as err:
        return done(UNBOUNDED, str(err))
    except (simplex.NumericalError, SingularBasisError, FloatingPointError, np.linalg.LinAlgError) as err:
        return done(NUMERICAL, str(err))
    if res.status != simplex.OPTIMAL:
        return done(res.status, stats=res.stats)
    check = verify_basic_optimal(lp, res.basis, eps_abs)
    if not check:
        return done(FAILED_VERIFY, check.reason, res.stats, basis=res.basis, violation=check.violation)
    return done(
        SUCCESS,
        stats=res.stats,
        basis=res.basis,
        iterate=check.iterate,
        violation=check.violation,
        objective=check.objective,
    )
