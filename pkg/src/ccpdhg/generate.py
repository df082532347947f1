"""Random LPs that are feasible and bounded by construction."""

from __future__ import annotations

import numpy as np

from .lp import INF, LinearProgram, RowSense
from .sparse import SparseMatrix


def random_lp(
    nrows: int,
    ncols: int,
    density: float = 0.3,
    seed: int = 0,
    equality_fraction: float = 0.3,
    upper_fraction: float = 0.6,
    name: str | None = None,
) -> LinearProgram:
    """Mixed-sense LP with a known feasible point.

    A random point ``x0`` inside the column bounds fixes the row
    right-hand sides (with random slack on inequality rows), so the LP is
    feasible. Columns without an upper bound get a nonnegative cost,
    which keeps a minimization bounded below.
    """
    rng = np.random.default_rng(seed)
    mask = rng.random((nrows, ncols)) < density
    # every row and column gets at least one entry
    mask[np.arange(nrows), rng.integers(0, ncols, nrows)] = True
    mask[rng.integers(0, nrows, ncols), np.arange(ncols)] = True
    rows, cols = np.nonzero(mask)
    vals = np.round(rng.uniform(-5, 5, len(rows)), 2)
    vals[vals == 0] = 1.0
    A = SparseMatrix.from_triplets(nrows, ncols, rows, cols, vals)

    has_upper = rng.random(ncols) < upper_fraction
    upper = np.where(has_upper, np.round(rng.uniform(1, 10, ncols), 1), INF)
    lower = np.zeros(ncols)
    x0 = np.where(has_upper, rng.uniform(0, 1, ncols) * np.where(has_upper, upper, 1), rng.uniform(0, 5, ncols))
    # 2-decimal A times 3-decimal x0 has at most 5 decimals, so rounding b to 6 keeps x0 feasible
    x0 = np.round(x0, 3)

    act = A.to_dense() @ x0
    roll = rng.random(nrows)
    senses = np.where(roll < equality_fraction, "E", np.where(roll < (1 + equality_fraction) / 2, "L", "G"))
    gap = np.round(rng.uniform(0, 3, nrows), 3)
    b = np.where(senses == "L", act + gap, np.where(senses == "G", act - gap, act))

    c = np.round(rng.normal(0, 3, ncols), 2)
    c = np.where(has_upper, c, np.abs(c))
    return LinearProgram(
        c=c,
        A=A,
        b=np.round(b, 6),
        senses=[RowSense(str(s)) for s in senses],
        lower=lower,
        upper=upper,
        name=name or f"rand{nrows}x{ncols}s{seed}",
    )
