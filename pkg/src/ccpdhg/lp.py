"""Linear program container and conversion to equality (standard) form.

The solvers downstream all work on

    min  c^T x   s.t.  A x = b,  l <= x <= u

Inequality and ranged rows are turned into equalities by appending one
slack column per row; maximization is turned into minimization by negating
the objective. :class:`StandardFormMap` remembers how to go back.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .sparse import SparseMatrix, matvec

INF = np.inf


class RowSense(str, Enum):
    LE = "L"
    EQ = "E"
    GE = "G"


def _vec(a, n, name, fill=None) -> np.ndarray:
    if a is None:
        out = np.full(n, fill, dtype=np.float64)
    else:
        out = np.array(a, dtype=np.float64, copy=True)
    if out.shape != (n,):
        raise ValueError(f"{name} must have length {n}, got shape {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """A sparse LP with row senses, optional MPS-style ranges and column bounds.

    ``ranges`` follows MPS semantics: ``nan`` means no range; for an ``L``
    row the feasible activity is ``[b - |R|, b]``, for ``G`` it is
    ``[b, b + |R|]`` and for ``E`` the sign of ``R`` picks the side.
    """

    c: np.ndarray
    A: SparseMatrix
    b: np.ndarray
    senses: tuple[RowSense, ...] = None
    lower: np.ndarray = None
    upper: np.ndarray = None
    ranges: np.ndarray = None
    maximize: bool = False
    obj_offset: float = 0.0
    row_names: tuple[str, ...] = None
    col_names: tuple[str, ...] = None
    name: str = "LP"

    def __post_init__(self):
        m, n = self.A.shape
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("c", _vec(self.c, n, "c"))
        set_("b", _vec(self.b, m, "b"))
        set_("lower", _vec(self.lower, n, "lower", 0.0))
        set_("upper", _vec(self.upper, n, "upper", INF))
        set_("ranges", _vec(self.ranges, m, "ranges", np.nan))
        senses = (RowSense.EQ,) * m if self.senses is None else tuple(RowSense(s) for s in self.senses)
        if len(senses) != m:
            raise ValueError(f"senses must have length {m}")
        set_("senses", senses)
        set_("row_names", tuple(self.row_names) if self.row_names is not None else tuple(f"R{i}" for i in range(m)))
        set_("col_names", tuple(self.col_names) if self.col_names is not None else tuple(f"C{j}" for j in range(n)))
        if len(self.row_names) != m or len(self.col_names) != n:
            raise ValueError("name lists must match the matrix dimensions")
        if np.any(self.lower > self.upper):
            j = int(np.argmax(self.lower > self.upper))
            raise ValueError(f"column {self.col_names[j]!r} has lower bound above upper bound")
        if np.any(self.lower == INF) or np.any(self.upper == -INF):
            raise ValueError("bounds must not be +inf below or -inf above")

    @property
    def nrows(self) -> int:
        return self.A.nrows

    @property
    def ncols(self) -> int:
        return self.A.ncols

    @property
    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Activity interval ``[row_lower, row_upper]`` per row."""
        lo = np.empty(self.nrows)
        hi = np.empty(self.nrows)
        for i, (s, rhs, r) in enumerate(zip(self.senses, self.b, self.ranges)):
            has_range = not np.isnan(r)
            if s is RowSense.EQ:
                if has_range and r > 0:
                    lo[i], hi[i] = rhs, rhs + r
                elif has_range and r < 0:
                    lo[i], hi[i] = rhs + r, rhs
                else:
                    lo[i] = hi[i] = rhs
            elif s is RowSense.LE:
                lo[i], hi[i] = (rhs - abs(r) if has_range else -INF), rhs
            else:
                lo[i], hi[i] = rhs, (rhs + abs(r) if has_range else INF)
        return lo, hi

    @property
    def is_standard(self) -> bool:
        return (
            not self.maximize
            and all(s is RowSense.EQ for s in self.senses)
            and bool(np.all(np.isnan(self.ranges) | (self.ranges == 0.0)))
        )

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x)) + self.obj_offset

    def same_data(self, other: "LinearProgram") -> bool:
        """Exact equality of every numeric and naming field."""

        def eq(a, b):
            return np.array_equal(a, b, equal_nan=True)

        return (
            self.A == other.A
            and eq(self.c, other.c)
            and eq(self.b, other.b)
            and eq(self.lower, other.lower)
            and eq(self.upper, other.upper)
            and eq(self.ranges, other.ranges)
            and self.senses == other.senses
            and self.maximize == other.maximize
            and self.obj_offset == other.obj_offset
            and self.row_names == other.row_names
            and self.col_names == other.col_names
        )


@dataclass(frozen=True, eq=False)
class StandardFormMap:
    """Equality-form LP plus the bookkeeping to move vectors between spaces.

    Columns ``0..n-1`` of ``lp`` are the original columns; column ``n + k``
    is the slack of row ``slack_rows[k]`` with coefficient
    ``slack_coef[k]`` (+1 for ``a x + s = b``, -1 for ``a x - s = b``).
    """

    original: LinearProgram
    lp: LinearProgram
    slack_rows: np.ndarray
    slack_coef: np.ndarray
    obj_sign: float = field(default=1.0)

    @property
    def n_original(self) -> int:
        return self.original.ncols

    def map_primal(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_original,):
            raise ValueError("primal vector has wrong length")
        if not len(self.slack_rows):
            return x.copy()
        act = matvec(self.original.A, x)
        b = self.original.b
        s = self.slack_coef * (b[self.slack_rows] - act[self.slack_rows])
        return np.concatenate([x, s])

    def unmap_primal(self, x_std) -> np.ndarray:
        return np.array(x_std[: self.n_original], dtype=np.float64)

    def map_dual(self, y, z) -> tuple[np.ndarray, np.ndarray]:
        y_std = self.obj_sign * np.asarray(y, dtype=np.float64)
        z_slack = -self.slack_coef * y_std[self.slack_rows]
        z_std = np.concatenate([self.obj_sign * np.asarray(z, dtype=np.float64), z_slack])
        return y_std, z_std

    def unmap_dual(self, y_std, z_std) -> tuple[np.ndarray, np.ndarray]:
        y = self.obj_sign * np.asarray(y_std, dtype=np.float64)
        z = self.obj_sign * np.asarray(z_std[: self.n_original], dtype=np.float64)
        return y, z

    def unmap_objective(self, value: float) -> float:
        return self.obj_sign * value

    def slack_row_of(self) -> dict[int, int]:
        """Map original row index -> standard-form column index of its slack."""
        n = self.n_original
        return {int(r): n + k for k, r in enumerate(self.slack_rows)}


def to_standard_form(lp: LinearProgram) -> StandardFormMap:
    """Convert ``lp`` to ``min c^T x, A x = b, l <= x <= u``."""
    m, n = lp.nrows, lp.ncols
    sign = -1.0 if lp.maximize else 1.0
    slack_rows, slack_coef, s_upper = [], [], []
    for i, (s, r) in enumerate(zip(lp.senses, lp.ranges)):
        has_range = not np.isnan(r) and r != 0.0
        if s is RowSense.EQ and not has_range:
            continue
        if s is RowSense.LE or (s is RowSense.EQ and r < 0):
            coef = 1.0
        else:
            coef = -1.0
        slack_rows.append(i)
        slack_coef.append(coef)
        s_upper.append(abs(r) if has_range else INF)
    slack_rows = np.array(slack_rows, dtype=np.int64)
    slack_coef = np.array(slack_coef, dtype=np.float64)
    k = len(slack_rows)
    A = lp.A.hstack_columns(slack_rows, slack_coef) if k else lp.A
    std = LinearProgram(
        c=np.concatenate([sign * lp.c, np.zeros(k)]),
        A=A,
        b=lp.b,
        senses=(RowSense.EQ,) * m,
        lower=np.concatenate([lp.lower, np.zeros(k)]),
        upper=np.concatenate([lp.upper, np.array(s_upper, dtype=np.float64)]),
        ranges=None,
        maximize=False,
        obj_offset=sign * lp.obj_offset,
        row_names=lp.row_names,
        col_names=lp.col_names + tuple(f"{lp.row_names[i]}~slack" for i in slack_rows),
        name=lp.name,
    )
    return StandardFormMap(lp, std, slack_rows, slack_coef, sign)
