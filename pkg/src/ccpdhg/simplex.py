"""Bounded-variable revised primal simplex.

The engine works on the equality form ``min c^T x, A x = b, l <= x <= u``
augmented with one logical column ``e_i`` per row. Logicals are fixed at
zero, so they may sit in a basis (e.g. to repair a singular one) but can
never enter it; phase 1 drives any nonzero logical back to zero.

Column index ``j < n`` is a column of ``A``; ``n + i`` is the logical of
row ``i``.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .cancel import CancelFlag
from .kkt import Iterate
from .lp import LinearProgram
from .sparse import matvec, matvec_transpose

BASIC, AT_LOWER, AT_UPPER, FIXED, ZERO = 0, 1, 2, 3, 4
STATUS_NAMES = {BASIC: "basic", AT_LOWER: "at-lower", AT_UPPER: "at-upper", FIXED: "fixed", ZERO: "zero"}

OPTIMAL = "optimal"
ITERATION_LIMIT = "iteration-limit"
CANCELLED = "cancelled"


class SimplexError(Exception):
    pass


class SingularBasisError(SimplexError):
    def __init__(self, positions, columns):
        self.positions = list(positions)
        self.columns = list(columns)
        super().__init__(f"singular basis; dependent columns {self.columns}")


class UnboundedError(SimplexError):
    def __init__(self, column: int):
        self.column = column
        super().__init__(f"LP is unbounded along column {column}")


class InfeasibleError(SimplexError):
    def __init__(self, infeasibility: float):
        self.infeasibility = infeasibility
        super().__init__(f"LP is primal infeasible (total infeasibility {infeasibility:.3e})")


class NumericalError(SimplexError):
    pass


def default_status(lo: float, up: float) -> int:
    if lo == up:
        return FIXED
    if math.isfinite(lo):
        return AT_LOWER
    if math.isfinite(up):
        return AT_UPPER
    return ZERO


@dataclass(eq=False)
class Basis:
    """Basic column per row plus a nonbasic status for every column."""

    basic: np.ndarray
    status: np.ndarray

    def __post_init__(self):
        self.basic = np.asarray(self.basic, dtype=np.int64)
        self.status = np.asarray(self.status, dtype=np.int8)

    def copy(self) -> "Basis":
        return Basis(self.basic.copy(), self.status.copy())

    def validate(self, lp: LinearProgram) -> None:
        m, n = lp.nrows, lp.ncols
        if self.basic.shape != (m,) or self.status.shape != (n + m,):
            raise ValueError("basis has the wrong dimensions")
        if len(set(self.basic.tolist())) != m:
            raise ValueError("basis contains duplicate columns")
        if np.any(self.basic < 0) or np.any(self.basic >= n + m):
            raise ValueError("basic column index out of range")
        is_basic = np.zeros(n + m, dtype=bool)
        is_basic[self.basic] = True
        if np.any((self.status == BASIC) != is_basic):
            raise ValueError("status array disagrees with the basic list")
        lo, up = augmented_bounds(lp)
        if np.any((self.status == AT_UPPER) & ~np.isfinite(up)):
            raise ValueError("nonbasic at-upper requires a finite upper bound")
        if np.any((self.status == AT_LOWER) & ~np.isfinite(lo)):
            raise ValueError("nonbasic at-lower requires a finite lower bound")

    @classmethod
    def from_basic(cls, lp: LinearProgram, basic, status_hint=None) -> "Basis":
        """Build a basis from the basic list; other columns get ``status_hint``
        where it is a valid nonbasic status, else a default bound."""
        m, n = lp.nrows, lp.ncols
        lo, up = augmented_bounds(lp)
        status = np.array([default_status(a, b) for a, b in zip(lo, up)], dtype=np.int8)
        if status_hint is not None:
            hint = np.asarray(status_hint)
            ok = (
                ((hint == AT_LOWER) & np.isfinite(lo))
                | ((hint == AT_UPPER) & np.isfinite(up))
                | ((hint == ZERO) & ~np.isfinite(lo) & ~np.isfinite(up))
            ) & (lo != up)
            status = np.where(ok, hint, status).astype(np.int8)
        status[np.asarray(basic, dtype=np.int64)] = BASIC
        return cls(np.asarray(basic, dtype=np.int64), status)

    @classmethod
    def slack_basis(cls, lp: LinearProgram) -> "Basis":
        """Unit columns of ``A`` where a row has one, the row's logical otherwise."""
        m, n = lp.nrows, lp.ncols
        basic = n + np.arange(m)
        counts = np.diff(lp.A.indptr)
        for j in np.nonzero(counts == 1)[0]:
            i = lp.A.indices[lp.A.indptr[j]]
            if abs(lp.A.data[lp.A.indptr[j]]) == 1.0 and lp.lower[j] != lp.upper[j]:
                basic[i] = j
        return cls.from_basic(lp, basic)

    def nonbasic_values(self, lp: LinearProgram) -> np.ndarray:
        lo, up = augmented_bounds(lp)
        x = np.zeros(len(self.status))
        x = np.where(self.status == AT_LOWER, lo, x)
        x = np.where(self.status == FIXED, lo, x)
        x = np.where(self.status == AT_UPPER, up, x)
        return np.where(self.status == BASIC, 0.0, x)


def augmented_bounds(lp: LinearProgram) -> tuple[np.ndarray, np.ndarray]:
    z = np.zeros(lp.nrows)
    return np.concatenate([lp.lower, z]), np.concatenate([lp.upper, z])


def augmented_column(lp: LinearProgram, j: int) -> np.ndarray:
    if j < lp.ncols:
        return lp.A.dense_column(j)
    e = np.zeros(lp.nrows)
    e[j - lp.ncols] = 1.0
    return e


def basis_matrix(lp: LinearProgram, basic) -> np.ndarray:
    B = np.zeros((lp.nrows, lp.nrows))
    for k, j in enumerate(basic):
        B[:, k] = augmented_column(lp, int(j))
    return B


class FactorizedBasis:
    """Dense LU of the basis matrix with product-form (eta) updates."""

    def __init__(self, B: np.ndarray, basic, pivot_tol: float = 1e-11):
        m = B.shape[0]
        self.m = m
        self.etas: list[tuple[int, np.ndarray]] = []
        self.refactor_count = 0
        if m == 0:
            self.lu = None
            self.condition = 1.0
            return
        with warnings.catch_warnings():
            # singular pivots are detected below
            warnings.simplefilter("ignore", LinAlgWarning)
            lu, piv = lu_factor(B, check_finite=False)
        diag = np.abs(np.diag(lu))
        scale = max(1.0, float(np.max(np.abs(B))))
        bad = np.nonzero(diag <= pivot_tol * scale)[0]
        if len(bad):
            raise SingularBasisError(bad, [int(basic[k]) for k in bad])
        self.lu = (lu, piv)
        self.condition = float(diag.max() / diag.min())

    @property
    def n_updates(self) -> int:
        return len(self.etas)

    def ftran(self, v) -> np.ndarray:
        """``B^{-1} v``."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.m,):
            raise ValueError("ftran: dimension mismatch")
        if self.m == 0:
            return v.copy()
        w = lu_solve(self.lu, v, check_finite=False)
        for r, d in self.etas:
            t = w[r] / d[r]
            w = w - d * t
            w[r] = t
        return w

    def btran(self, v) -> np.ndarray:
        """``B^{-T} v``."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.m,):
            raise ValueError("btran: dimension mismatch")
        if self.m == 0:
            return v.copy()
        w = v.copy()
        for r, d in reversed(self.etas):
            w[r] = w[r] + (w[r] - float(d @ w)) / d[r]
        return lu_solve(self.lu, w, trans=1, check_finite=False)

    def update(self, r: int, d: np.ndarray) -> None:
        """Register that basis position ``r`` now holds the column whose
        ftran'd image (under the old basis) is ``d``."""
        self.etas.append((r, d.copy()))


def factorize(lp: LinearProgram, basis: Basis) -> FactorizedBasis:
    return FactorizedBasis(basis_matrix(lp, basis.basic), basis.basic)


def ftran(factors: FactorizedBasis, v) -> np.ndarray:
    return factors.ftran(v)


def btran(factors: FactorizedBasis, v) -> np.ndarray:
    return factors.btran(v)


def ratio_test(x_B, lo_B, up_B, alpha, direction, flip_range=math.inf, basic_cols=None, bland=False, tol=0.0, pivot_tol=1e-9):
    """Bounded ratio test for moving the entering variable by ``direction * theta``.

    Basic variables change by ``-direction * theta * alpha``. Returns
    ``(theta, r)`` where ``r`` is the leaving basis position, or ``None``
    when the entering variable's own bound range (``flip_range``) is
    hit first. With ``tol > 0`` the Harris two-pass rule is used; with
    ``bland`` ties go to the smallest basic column index.
    """
    rate = -direction * np.asarray(alpha, dtype=np.float64)
    active = np.abs(alpha) > pivot_tol
    dec = active & (rate < 0) & np.isfinite(lo_B)
    inc = active & (rate > 0) & np.isfinite(up_B)
    room = np.full(len(x_B), np.inf)
    room_relaxed = np.full(len(x_B), np.inf)
    room[dec] = np.maximum(x_B[dec] - lo_B[dec], 0.0) / -rate[dec]
    room[inc] = np.maximum(up_B[inc] - x_B[inc], 0.0) / rate[inc]
    room_relaxed[dec] = (np.maximum(x_B[dec] - lo_B[dec], 0.0) + tol) / -rate[dec]
    room_relaxed[inc] = (np.maximum(up_B[inc] - x_B[inc], 0.0) + tol) / rate[inc]

    bound = float(np.min(room_relaxed, initial=np.inf))
    if bound == np.inf and flip_range == np.inf:
        return math.inf, None
    if flip_range <= bound and flip_range <= float(np.min(room, initial=np.inf)):
        return float(flip_range), None
    if bound == np.inf:
        return float(flip_range), None
    cand = np.nonzero(room <= bound)[0]
    if bland:
        theta_min = float(room[cand].min())
        ties = cand[room[cand] <= theta_min * (1 + 1e-12) + 1e-300]
        cols = np.asarray(basic_cols)[ties] if basic_cols is not None else ties
        r = int(ties[np.argmin(cols)])
    else:
        r = int(cand[np.argmax(np.abs(alpha)[cand])])
    theta = float(room[r])
    if flip_range < theta:
        return float(flip_range), None
    return theta, r


@dataclass
class SimplexStats:
    iterations: int = 0
    phase1_iterations: int = 0
    bound_flips: int = 0
    degenerate: int = 0
    bland_pivots: int = 0
    refactorizations: int = 0
    max_drift: float = 0.0
    elapsed: float = 0.0


@dataclass(eq=False)
class SimplexResult:
    basis: Basis
    iterate: Iterate | None
    status: str
    stats: SimplexStats = field(default_factory=SimplexStats)
    objective: float = math.nan


class SimplexEngine:
    """One bounded primal simplex run; owned by a single thread."""

    def __init__(
        self,
        lp: LinearProgram,
        basis: Basis,
        primal_tol: float = 1e-9,
        dual_tol: float = 1e-9,
        refactor_every: int = 64,
        bland_after: int = 50,
        max_iterations: int | None = None,
        cancel: CancelFlag | None = None,
    ):
        if not lp.is_standard:
            raise ValueError("simplex expects an equality-form LP")
        basis.validate(lp)
        self.lp = lp
        self.m, self.n = lp.nrows, lp.ncols
        self.basis = basis.copy()
        self.lo, self.up = augmented_bounds(lp)
        self.c = np.concatenate([lp.c, np.zeros(self.m)])
        self.primal_tol = primal_tol
        self.dual_tol = dual_tol
        self.refactor_every = refactor_every
        self.bland_after = bland_after
        self.max_iterations = max_iterations if max_iterations is not None else 50 * (self.m + self.n) + 1000
        self.cancel = cancel
        self.stats = SimplexStats()
        self.x = self.basis.nonbasic_values(lp)
        self.refactor()

    # -- linear algebra -----------------------------------------------------

    def column(self, j: int) -> np.ndarray:
        return augmented_column(self.lp, j)

    def refactor(self) -> None:
        self.factors = factorize(self.lp, self.basis)
        self.stats.refactorizations += 1
        x_B = self._fresh_xB()
        if self.stats.iterations:
            drift = float(np.max(np.abs(x_B - self.x[self.basis.basic]), initial=0.0))
            self.stats.max_drift = max(self.stats.max_drift, drift)
        self.x[self.basis.basic] = x_B

    def _fresh_xB(self) -> np.ndarray:
        xN = np.where(self.basis.status == BASIC, 0.0, self.x)
        rhs = self.lp.b - matvec(self.lp.A, xN[: self.n]) - xN[self.n :]
        return self.factors.ftran(rhs)

    def reduced_costs(self, cost: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = self.factors.btran(cost[self.basis.basic])
        d = cost - np.concatenate([matvec_transpose(self.lp.A, y), y])
        return y, d

    # -- pivoting -----------------------------------------------------------

    def _phase1_cost(self, x_B, lo_B, up_B) -> np.ndarray | None:
        below = x_B < lo_B - self.primal_tol
        above = x_B > up_B + self.primal_tol
        if not (below.any() or above.any()):
            return None
        cost = np.zeros(self.n + self.m)
        cost[self.basis.basic[below]] = -1.0
        cost[self.basis.basic[above]] = 1.0
        return cost

    def _choose_entering(self, d: np.ndarray, bland: bool) -> tuple[int, int] | None:
        st = self.basis.status
        tol = self.dual_tol
        score = np.zeros_like(d)
        score = np.where((st == AT_LOWER) & (d < -tol), -d, score)
        score = np.where((st == AT_UPPER) & (d > tol), d, score)
        score = np.where((st == ZERO) & (np.abs(d) > tol), np.abs(d), score)
        eligible = np.nonzero(score > 0)[0]
        if not len(eligible):
            return None
        q = int(eligible[0]) if bland else int(eligible[np.argmax(score[eligible])])
        return q, (1 if d[q] < 0 else -1)

    def iterate_once(self, bland: bool) -> str | None:
        basic = self.basis.basic
        lo_B, up_B = self.lo[basic], self.up[basic]
        x_B = self.x[basic]
        cost = self._phase1_cost(x_B, lo_B, up_B)
        phase1 = cost is not None
        if phase1:
            wlo = np.where(x_B < lo_B - self.primal_tol, -np.inf, lo_B)
            wup = np.where(x_B > up_B + self.primal_tol, np.inf, up_B)
            wlo = np.where(x_B > up_B + self.primal_tol, up_B, wlo)
            wup = np.where(x_B < lo_B - self.primal_tol, lo_B, wup)
        else:
            cost, wlo, wup = self.c, lo_B, up_B
        _, d = self.reduced_costs(cost)
        choice = self._choose_entering(d, bland)
        if choice is None:
            if phase1:
                infeas = float(np.sum(np.maximum(lo_B - x_B, 0) + np.maximum(x_B - up_B, 0)))
                raise InfeasibleError(infeas)
            return OPTIMAL
        q, direction = choice
        alpha = self.factors.ftran(self.column(q))
        flip = self.up[q] - self.lo[q] if self.basis.status[q] in (AT_LOWER, AT_UPPER) else math.inf
        theta, r = ratio_test(
            x_B, wlo, wup, alpha, direction, flip, basic_cols=basic, bland=bland, tol=0.0 if bland else self.primal_tol
        )
        if theta == math.inf:
            if phase1:
                raise NumericalError("unbounded ray during phase 1")
            raise UnboundedError(q)

        self.stats.iterations += 1
        self.stats.phase1_iterations += phase1
        self.stats.bland_pivots += bland
        if theta <= 1e-12:
            self.stats.degenerate += 1
        self.x[basic] = x_B - direction * theta * alpha
        self.x[q] += direction * theta
        if r is None:
            self.stats.bound_flips += 1
            self.basis.status[q] = AT_UPPER if direction > 0 else AT_LOWER
            self.x[q] = self.up[q] if direction > 0 else self.lo[q]
            return None
        leaving = int(basic[r])
        hit_lower = direction * alpha[r] > 0
        if self.lo[leaving] == self.up[leaving]:
            self.basis.status[leaving] = FIXED
            self.x[leaving] = self.lo[leaving]
        elif (hit_lower and math.isfinite(wlo[r])) or not math.isfinite(wup[r]):
            self.basis.status[leaving] = AT_LOWER
            self.x[leaving] = wlo[r]
        else:
            self.basis.status[leaving] = AT_UPPER
            self.x[leaving] = wup[r]
        # wlo/wup can be the violated bound in phase 1; status must name the real bound
        if self.basis.status[leaving] == AT_LOWER and self.x[leaving] != self.lo[leaving]:
            self.basis.status[leaving] = AT_UPPER
        elif self.basis.status[leaving] == AT_UPPER and self.x[leaving] != self.up[leaving]:
            self.basis.status[leaving] = AT_LOWER
        self.basis.basic[r] = q
        self.basis.status[q] = BASIC
        if abs(alpha[r]) < 1e-9 or self.factors.n_updates + 1 >= self.refactor_every:
            self.refactor()
        else:
            self.factors.update(r, alpha)
        return None

    def run(self) -> SimplexResult:
        t0 = time.perf_counter()
        degenerate_streak = 0
        bland = False
        status = None
        failures = 0
        while status is None:
            if self.cancel is not None and self.cancel.is_set():
                status = CANCELLED
                break
            if self.stats.iterations >= self.max_iterations:
                status = ITERATION_LIMIT
                break
            before = self.stats.degenerate
            try:
                status = self.iterate_once(bland)
            except SingularBasisError:
                failures += 1
                if failures > 3:
                    raise NumericalError("repeated singular refactorizations") from None
                self._recover()
                continue
            if status == OPTIMAL and self.factors.n_updates:
                # confirm on a fresh factorization before claiming optimality
                self.refactor()
                status = None if self._still_improvable() else OPTIMAL
            degenerate_streak = degenerate_streak + 1 if self.stats.degenerate > before else 0
            bland = degenerate_streak >= self.bland_after
        self.stats.elapsed = time.perf_counter() - t0
        if status != OPTIMAL:
            return SimplexResult(self.basis.copy(), None, status, self.stats)
        self.refactor()
        y, d = self.reduced_costs(self.c)
        x = self.x[: self.n].copy()
        it = Iterate(x, y, d[: self.n].copy())
        return SimplexResult(self.basis.copy(), it, OPTIMAL, self.stats, float(self.lp.c @ x))

    def _still_improvable(self) -> bool:
        basic = self.basis.basic
        if self._phase1_cost(self.x[basic], self.lo[basic], self.up[basic]) is not None:
            return True
        _, d = self.reduced_costs(self.c)
        return self._choose_entering(d, False) is not None

    def _recover(self) -> None:
        """Swap dependent basic columns for logicals of uncovered rows."""
        try:
            self.refactor()
        except SingularBasisError as err:
            self.basis = repair_basis(self.lp, self.basis)
            self.x = np.where(self.basis.status == BASIC, self.x, self.basis.nonbasic_values(self.lp))
            self.refactor()


def repair_basis(lp: LinearProgram, basis: Basis, max_rounds: int = 50) -> Basis:
    """Replace dependent basic columns by row logicals until the basis factorizes."""
    basis = basis.copy()
    n = lp.ncols
    lo, up = augmented_bounds(lp)
    for _ in range(max_rounds):
        try:
            factorize(lp, basis)
            return basis
        except SingularBasisError as err:
            B = basis_matrix(lp, basis.basic)
            for pos in err.positions:
                # the row least covered by the other basic columns gets its logical
                keep = [k for k in range(len(basis.basic)) if k not in err.positions]
                cover = np.abs(B[:, keep]).sum(axis=1) if keep else np.zeros(lp.nrows)
                used = set(int(j) - n for j in basis.basic if j >= n)
                rows = [i for i in np.argsort(cover, kind="stable") if i not in used]
                old = int(basis.basic[pos])
                new = n + int(rows[0])
                basis.basic[pos] = new
                basis.status[new] = BASIC
                basis.status[old] = default_status(lo[old], up[old])
                B[:, pos] = augmented_column(lp, new)
    factorize(lp, basis)
    return basis


def primal_simplex(
    lp: LinearProgram,
    start_basis: Basis | None = None,
    eps_abs: float = 1e-6,
    cancel: CancelFlag | None = None,
    max_iterations: int | None = None,
    bland_after: int = 50,
) -> SimplexResult:
    """Solve ``lp`` from ``start_basis`` (the slack basis by default)."""
    basis = Basis.slack_basis(lp) if start_basis is None else start_basis
    tol = min(1e-9, eps_abs * 1e-3)
    engine = SimplexEngine(
        lp, basis, primal_tol=tol, dual_tol=tol, max_iterations=max_iterations, cancel=cancel, bland_after=bland_after
    )
    return engine.run()


# -- basis files ------------------------------------------------------------


def column_names(lp: LinearProgram) -> list[str]:
    return list(lp.col_names) + [f"@{r}" for r in lp.row_names]


def write_basis(lp: LinearProgram, basis: Basis) -> str:
    """Text basis file: ``B name`` per basic column, ``U name`` per
    nonbasic-at-upper column; every other column sits at its default bound."""
    names = column_names(lp)
    lines = [f"BASIS {lp.name}"]
    lines += [f"B {names[j]}" for j in basis.basic]
    lo, up = augmented_bounds(lp)
    for j in np.nonzero(basis.status == AT_UPPER)[0]:
        if default_status(lo[j], up[j]) != AT_UPPER:
            lines.append(f"U {names[j]}")
    for j in np.nonzero(basis.status == AT_LOWER)[0]:
        if default_status(lo[j], up[j]) != AT_LOWER:
            lines.append(f"L {names[j]}")
    lines.append("END")
    return "\n".join(lines) + "\n"


def read_basis(lp: LinearProgram, text: str) -> Basis:
    index = {name: j for j, name in enumerate(column_names(lp))}
    basic, hint = [], {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        tok = line.split()
        if not tok or tok[0] in ("BASIS", "END"):
            continue
        if len(tok) != 2 or tok[0] not in ("B", "U", "L") or tok[1] not in index:
            raise ValueError(f"basis file line {lineno}: cannot parse {line!r}")
        j = index[tok[1]]
        if tok[0] == "B":
            basic.append(j)
        else:
            hint[j] = AT_UPPER if tok[0] == "U" else AT_LOWER
    status_hint = np.full(lp.ncols + lp.nrows, -1)
    for j, s in hint.items():
        status_hint[j] = s
    basis = Basis.from_basic(lp, basic, status_hint)
    basis.validate(lp)
    return basis
