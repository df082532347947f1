"""Crossover launch thresholds and the per-iteration launch rule."""

from __future__ import annotations

from .kkt import Tolerances


def schedule_thresholds(tol: Tolerances) -> list[float]:
    """Geometric sequence from ``eps_cross`` down, strictly above ``eps_rel``.

    Each step is rounded to 12 significant digits so that decimal inputs
    give decimal outputs (``1e-2 * 0.1**3`` would otherwise print as
    ``1.0000000000000003e-05``).
    """
    out = []
    t = tol.eps_cross
    while t > tol.eps_rel:
        out.append(t)
        t = float(f"{t * tol.decrement:.12g}")
    return out


class LaunchSchedule:
    """Tracks the pending target while residuals fall.

    ``due`` answers whether an iterate with the given residual should be
    offered to the crossover pool. After a launch the caller calls
    ``advance``, which moves the target down one step, so at most one
    launch happens per iterate even if several thresholds were crossed.
    """

    def __init__(self, thresholds, eps_rel: float):
        self.thresholds = list(thresholds)
        if any(b >= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds must be strictly decreasing")
        self.eps_rel = eps_rel
        self.pending = 0

    @property
    def target(self) -> float | None:
        return self.thresholds[self.pending] if self.pending < len(self.thresholds) else None

    def converged(self, resid: float) -> bool:
        return resid <= self.eps_rel

    def due(self, resid: float) -> float | None:
        t = self.target
        if t is not None and resid <= t and not self.converged(resid):
            return t
        return None

    def advance(self) -> None:
        self.pending += 1
