"""Residuals, objective gap and the termination tests.

Everything here works on a general :class:`LinearProgram` (row senses,
ranges, finite or infinite column bounds). For the equality form with
``x >= 0`` the formulas collapse to the textbook ones: ``r_P = b - A x``,
``r_D = A^T y + z - c`` and dual objective ``b^T y``.

Duals follow the convention ``A^T y + z = c`` for both objective senses;
sign conditions on ``y`` and ``z`` flip for maximization.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .lp import LinearProgram, RowSense
from .sparse import matvec, matvec_transpose


@dataclass(frozen=True)
class Tolerances:
    eps_rel: float = 1e-6
    eps_abs: float = 1e-6
    eps_cross: float = 1e-2
    decrement: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.decrement < 1.0:
            raise ValueError("decrement must lie in (0, 1)")
        if not 0.0 < self.eps_rel <= self.eps_cross:
            raise ValueError("need 0 < eps_rel <= eps_cross")
        if self.eps_abs <= 0.0:
            raise ValueError("eps_abs must be positive")


@dataclass(frozen=True, eq=False)
class Iterate:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    k: int = 0

    def copy(self) -> "Iterate":
        return Iterate(self.x.copy(), self.y.copy(), self.z.copy(), self.k)

    def check_dims(self, lp: LinearProgram) -> None:
        if self.x.shape != (lp.ncols,) or self.z.shape != (lp.ncols,) or self.y.shape != (lp.nrows,):
            raise ValueError(
                f"iterate dimensions (x={self.x.shape}, y={self.y.shape}, z={self.z.shape}) "
                f"do not match LP ({lp.nrows} rows, {lp.ncols} columns)"
            )


@dataclass(frozen=True)
class ResidualReport:
    rP_norm2: float
    rD_norm2: float
    rP_inf: float
    rD_inf: float
    gap_abs: float
    rel_primal: float
    rel_dual: float
    rel_gap: float
    maxresid_rel: float
    complementarity: float
    primal_obj: float
    dual_obj: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ResidualReport":
        return cls(**{k: float(d[k]) for k in cls.__dataclass_fields__})


def _sign(lp: LinearProgram) -> float:
    return -1.0 if lp.maximize else 1.0


def primal_residual(lp: LinearProgram, it: Iterate, Ax=None) -> np.ndarray:
    """Signed row violation; equals ``b - A x`` on equality rows."""
    if it.x.shape != (lp.ncols,):
        raise ValueError("primal vector length does not match the LP")
    act = matvec(lp.A, it.x) if Ax is None else Ax
    if lp.is_standard:
        return lp.b - act
    lo, hi = lp.row_bounds
    return np.where(act < lo, lo - act, np.where(act > hi, hi - act, 0.0))


def bound_violation(lp: LinearProgram, x) -> np.ndarray:
    """Per-column distance of ``x`` outside ``[lower, upper]`` (nonnegative)."""
    return np.maximum(lp.lower - x, 0.0) + np.maximum(x - lp.upper, 0.0)


def dual_residual(lp: LinearProgram, it: Iterate, ATy=None) -> np.ndarray:
    """``A^T y + z - c``."""
    it.check_dims(lp)
    aty = matvec_transpose(lp.A, it.y) if ATy is None else ATy
    return aty + it.z - lp.c


def dual_sign_violation(lp: LinearProgram, it: Iterate) -> np.ndarray:
    """Magnitude by which ``y`` and ``z`` break the sign rules implied by the
    row senses and column bounds (rows first, then columns)."""
    s = _sign(lp)
    y, z = s * it.y, s * it.z
    lo, hi = lp.row_bounds
    vy = np.where(np.isinf(lo), np.maximum(y, 0.0), 0.0) + np.where(np.isinf(hi), np.maximum(-y, 0.0), 0.0)
    vz = np.where(np.isinf(lp.lower), np.maximum(z, 0.0), 0.0) + np.where(np.isinf(lp.upper), np.maximum(-z, 0.0), 0.0)
    return np.concatenate([vy, vz])


def _bound_term(v, lo, hi) -> float:
    """Dual objective contribution of multipliers ``v`` on bounds ``[lo, hi]``."""
    pos = (v > 0) & np.isfinite(lo)
    neg = (v < 0) & np.isfinite(hi)
    return float(np.dot(v[pos], lo[pos]) + np.dot(v[neg], hi[neg]))


def objective_gap(lp: LinearProgram, it: Iterate) -> tuple[float, float]:
    """Return ``(primal objective, dual objective)``, offsets excluded.

    The dual objective is ``b^T y`` plus the bound terms ``l^T z+ - u^T z-``
    over finite bounds, which vanish for ``x >= 0``.
    """
    s = _sign(lp)
    primal = float(lp.c @ it.x)
    if lp.is_standard:
        row_part = float(lp.b @ it.y)
    else:
        lo, hi = lp.row_bounds
        row_part = s * _bound_term(s * it.y, lo, hi)
    col_part = s * _bound_term(s * it.z, lp.lower, lp.upper)
    return primal, row_part + col_part


def _complementarity(lp: LinearProgram, it: Iterate, act) -> float:
    def term(v, dist_lo, dist_hi):
        d = np.minimum(np.where(np.isfinite(dist_lo), np.abs(dist_lo), np.inf), np.where(np.isfinite(dist_hi), np.abs(dist_hi), np.inf))
        d = np.where(np.isfinite(d), d, 0.0)
        return float(np.max(d * np.abs(v), initial=0.0))

    cols = term(it.z, it.x - lp.lower, lp.upper - it.x)
    if lp.is_standard:
        return cols
    lo, hi = lp.row_bounds
    free = lo != hi
    return max(cols, term(it.y[free], (act - lo)[free], (hi - act)[free]))


def relative_report(lp: LinearProgram, it: Iterate) -> ResidualReport:
    """Fill every residual measure for ``it`` on ``lp``.

    The relative ratios are ``||r_P||_2 / (1 + ||b||_2)``,
    ``||r_D||_2 / (1 + ||c||_2)`` and
    ``|c^T x - dual_obj| / (1 + |c^T x| + |dual_obj|)``.
    """
    it.check_dims(lp)
    act = matvec(lp.A, it.x)
    rp = primal_residual(lp, it, Ax=act)
    rd = dual_residual(lp, it)
    primal, dual = objective_gap(lp, it)
    gap = abs(primal - dual)
    rp2 = float(np.linalg.norm(rp))
    rd2 = float(np.linalg.norm(rd))
    rel_p = rp2 / (1.0 + float(np.linalg.norm(lp.b)))
    rel_d = rd2 / (1.0 + float(np.linalg.norm(lp.c)))
    rel_g = gap / (1.0 + abs(primal) + abs(dual))
    rp_inf = max(float(np.max(np.abs(rp), initial=0.0)), float(np.max(bound_violation(lp, it.x), initial=0.0)))
    rd_inf = max(float(np.max(np.abs(rd), initial=0.0)), float(np.max(dual_sign_violation(lp, it), initial=0.0)))
    return ResidualReport(
        rP_norm2=rp2,
        rD_norm2=rd2,
        rP_inf=rp_inf,
        rD_inf=rd_inf,
        gap_abs=gap,
        rel_primal=rel_p,
        rel_dual=rel_d,
        rel_gap=rel_g,
        maxresid_rel=max(rel_p, rel_d, rel_g),
        complementarity=_complementarity(lp, it, act),
        primal_obj=primal,
        dual_obj=dual,
    )


def converged_relative(report: ResidualReport, eps_rel: float) -> bool:
    return report.maxresid_rel <= eps_rel


def relative_inequalities_hold(lp: LinearProgram, it: Iterate, eps_rel: float) -> bool:
    """Evaluate the three relative stopping inequalities in product form."""
    act = matvec(lp.A, it.x)
    rp = primal_residual(lp, it, Ax=act)
    rd = dual_residual(lp, it)
    primal, dual = objective_gap(lp, it)
    return (
        float(np.linalg.norm(rp)) <= eps_rel * (1.0 + float(np.linalg.norm(lp.b)))
        and float(np.linalg.norm(rd)) <= eps_rel * (1.0 + float(np.linalg.norm(lp.c)))
        and abs(primal - dual) <= eps_rel * (1.0 + abs(primal) + abs(dual))
    )


def absolute_violation(lp: LinearProgram, it: Iterate) -> float:
    """Largest absolute violation: rows, bounds, dual residual/signs, complementarity."""
    r = relative_report(lp, it)
    out = max(r.rP_inf, r.rD_inf, r.complementarity)
    return out if math.isfinite(out) else math.inf
