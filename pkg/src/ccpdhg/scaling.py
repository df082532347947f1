"""Ruiz equilibration with power-of-two factors.

Factors are powers of two so that scaling and unscaling are exact in
floating point (only the exponent changes).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import LinearProgram


@dataclass(frozen=True, eq=False)
class ScalingInfo:
    """``A_scaled = diag(row) @ A @ diag(col)``."""

    row: np.ndarray
    col: np.ndarray

    @classmethod
    def identity(cls, m: int, n: int) -> "ScalingInfo":
        return cls(np.ones(m), np.ones(n))

    # x = col * x_hat, y = row * y_hat, z = z_hat / col
    def unscale_primal(self, x_hat) -> np.ndarray:
        return self.col * x_hat

    def unscale_dual(self, y_hat, z_hat) -> tuple[np.ndarray, np.ndarray]:
        return self.row * y_hat, z_hat / self.col

    def scale_primal(self, x) -> np.ndarray:
        return x / self.col

    def scale_dual(self, y, z) -> tuple[np.ndarray, np.ndarray]:
        return y / self.row, z * self.col


def _pow2_step(max_abs: np.ndarray) -> np.ndarray:
    """Power-of-two factor that moves ``max_abs`` about half-way (in log2) to 1.

    Entries with exponent -1 or 0, i.e. already in [1/2, 2), get factor 1,
    and empty rows/columns (max 0) are left alone.
    """
    out = np.ones_like(max_abs)
    nz = max_abs > 0
    q = np.floor(np.log2(max_abs[nz]))
    out[nz] = np.ldexp(1.0, (-np.ceil(q / 2)).astype(int))
    return out


def apply_scaling(lp: LinearProgram, info: ScalingInfo) -> LinearProgram:
    r, s = info.row, info.col
    return LinearProgram(
        c=lp.c * s,
        A=lp.A.scaled(r, s),
        b=lp.b * r,
        senses=lp.senses,
        lower=lp.lower / s,
        upper=lp.upper / s,
        ranges=lp.ranges * r,
        maximize=lp.maximize,
        obj_offset=lp.obj_offset,
        row_names=lp.row_names,
        col_names=lp.col_names,
        name=lp.name,
    )


def unapply_scaling(lp: LinearProgram, info: ScalingInfo) -> LinearProgram:
    return apply_scaling(lp, ScalingInfo(1.0 / info.row, 1.0 / info.col))


def ruiz_scale(lp: LinearProgram, iterations: int = 10) -> tuple[LinearProgram, ScalingInfo]:
    """Equilibrate rows and columns of ``A`` in the infinity norm.

    Stops early once a sweep changes nothing. After enough sweeps every
    nonempty row and column has max-abs entry in ``[1/2, 2)``.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    m, n = lp.A.shape
    row = np.ones(m)
    col = np.ones(n)
    A = lp.A
    for _ in range(iterations):
        dr = _pow2_step(A.row_abs_max())
        dc = _pow2_step(A.col_abs_max())
        if np.all(dr == 1.0) and np.all(dc == 1.0):
            break
        A = A.scaled(dr, dc)
        row *= dr
        col *= dc
    info = ScalingInfo(row, col)
    return apply_scaling(lp, info), info
