"""Restarted PDHG for ``min c^T x, A x = b, l <= x <= u`` on the CPU.

The loop runs on a Ruiz-scaled copy of the problem. Residuals are always
reported for the unscaled problem, and a convergence claim is re-checked
from scratch with :mod:`ccpdhg.kkt` before it is accepted.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kkt
from .cancel import CancelFlag
from .kkt import Iterate, ResidualReport, Tolerances
from .lp import LinearProgram
from .schedule import LaunchSchedule
from .scaling import ScalingInfo, ruiz_scale
from .sparse import SparseMatrix, matvec, matvec_transpose

STOP_CONVERGED = "converged"
STOP_ITERATION_LIMIT = "iteration limit"
STOP_TIME_LIMIT = "time limit"
STOP_CANCELLED = "cancelled"


class PdhgNumericalError(ArithmeticError):
    def __init__(self, iteration: int):
        super().__init__(f"non-finite PDHG iterate at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class PdhgConfig:
    step_scale: float = 0.9
    primal_weight: float | None = None
    restart_beta: float = 0.2
    restart_check_every: int = 64
    norm_iterations: int = 100
    max_iterations: int = 1_000_000
    time_limit: float = 3600.0
    ruiz_iterations: int = 10
    adaptive_primal_weight: bool = False
    primal_weight_smoothing: float = 0.5
    log_every: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.step_scale <= 1.0:
            raise ValueError("step_scale must lie in (0, 1]")
        if self.primal_weight is not None and self.primal_weight <= 0.0:
            raise ValueError("primal_weight must be positive")
        if not 0.0 < self.restart_beta < 1.0:
            raise ValueError("restart_beta must lie in (0, 1)")
        if self.norm_iterations < 1 or self.restart_check_every < 1:
            raise ValueError("norm_iterations and restart_check_every must be >= 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass(eq=False)
class PdhgState:
    """Mutable loop state. ``x``/``y`` live in the space of the LP being iterated on."""

    x: np.ndarray
    y: np.ndarray
    tau: float
    sigma: float
    norm_A: float = 0.0
    omega: float = 1.0
    k: int = 0
    ax: np.ndarray = None
    aty: np.ndarray = None
    x_sum: np.ndarray = None
    y_sum: np.ndarray = None
    n_avg: int = 0
    restarts: int = 0
    restart_x: np.ndarray = None
    restart_y: np.ndarray = None
    last_restart_resid: float = math.inf
    best_resid: float = math.inf
    start_time: float = field(default_factory=time.perf_counter)

    def __post_init__(self):
        if self.x_sum is None:
            self.x_sum = np.zeros_like(self.x)
            self.y_sum = np.zeros_like(self.y)
        if self.restart_x is None:
            self.restart_x = self.x.copy()
            self.restart_y = self.y.copy()

    def average(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n_avg == 0:
            return self.x.copy(), self.y.copy()
        return self.x_sum / self.n_avg, self.y_sum / self.n_avg

    def reset_average(self) -> None:
        self.x_sum = np.zeros_like(self.x)
        self.y_sum = np.zeros_like(self.y)
        self.n_avg = 0


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Deep-copied iterate handed across the thread boundary."""

    iterate: Iterate
    threshold: float
    report: ResidualReport
    source: str
    iteration: int
    elapsed: float


@dataclass(frozen=True, eq=False)
class PdhgResult:
    iterate: Iterate
    report: ResidualReport
    stop_reason: str
    iterations: int
    restarts: int
    elapsed: float
    source: str = "current"


def estimate_matrix_norm(A: SparseMatrix, iterations: int = 100, seed: int = 0) -> float:
    """Largest singular value of ``A``.

    Golub-Kahan-Lanczos bidiagonalization from a random start, with full
    reorthogonalization. Each iteration costs one product with ``A`` and
    one with ``A^T``, like a power step, but the estimate converges much
    faster when the top singular values are close together. Up to
    rounding, the result never exceeds the true norm.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if A.nnz == 0:
        return 0.0
    steps = min(iterations, A.nrows, A.ncols)
    v = np.random.default_rng(seed).standard_normal(A.ncols)
    v /= np.linalg.norm(v)
    U, V = [], [v]
    alphas, betas = [], []
    u = np.zeros(A.nrows)
    beta = 0.0
    for _ in range(steps):
        u = matvec(A, V[-1]) - beta * u
        for q in U:
            u -= (q @ u) * q
        alpha = float(np.linalg.norm(u))
        if alpha == 0.0:
            break
        u /= alpha
        U.append(u)
        alphas.append(alpha)
        w = matvec_transpose(A, u) - alpha * V[-1]
        for q in V:
            w -= (q @ w) * q
        beta = float(np.linalg.norm(w))
        betas.append(beta)
        if beta <= 1e-13 * alpha:
            break
        V.append(w / beta)
    if not alphas:
        return 0.0
    # U^T A V for the k left and k+1 right vectors: alphas on the diagonal, betas just above
    k = len(alphas)
    B = np.zeros((k, k + 1))
    B[np.arange(k), np.arange(k)] = alphas
    B[np.arange(len(betas)), np.arange(len(betas)) + 1] = betas
    return float(np.linalg.svd(B, compute_uv=False)[0])


def reduced_costs(lp: LinearProgram, g: np.ndarray) -> np.ndarray:
    """Project ``g = c - A^T y`` onto the sign pattern the bounds allow."""
    lo_fin = np.isfinite(lp.lower)
    up_fin = np.isfinite(lp.upper)
    z = np.where(lo_fin, g, np.minimum(g, 0.0))
    return np.where(up_fin, z, np.maximum(z, 0.0))


def step_sizes(norm_A: float, config: PdhgConfig, c_norm: float, b_norm: float) -> tuple[float, float, float]:
    """Return ``(tau, sigma, omega)`` with ``tau * sigma * norm_A**2 == step_scale**2``."""
    if config.primal_weight is not None:
        omega = config.primal_weight
    elif c_norm > 0.0 and b_norm > 0.0:
        omega = c_norm / b_norm
    else:
        omega = 1.0
    eta = config.step_scale
    if norm_A == 0.0:
        return eta, eta, omega
    return eta / (omega * norm_A), eta * omega / norm_A, omega


def init_state(lp: LinearProgram, config: PdhgConfig, x0=None, y0=None) -> PdhgState:
    x = np.clip(np.zeros(lp.ncols) if x0 is None else np.asarray(x0, dtype=np.float64), lp.lower, lp.upper)
    y = np.zeros(lp.nrows) if y0 is None else np.array(y0, dtype=np.float64)
    norm_A = estimate_matrix_norm(lp.A, config.norm_iterations, config.seed)
    tau, sigma, omega = step_sizes(norm_A, config, float(np.linalg.norm(lp.c)), float(np.linalg.norm(lp.b)))
    return PdhgState(
        x=x, y=y, tau=tau, sigma=sigma, norm_A=norm_A, omega=omega, ax=matvec(lp.A, x), aty=matvec_transpose(lp.A, y)
    )


def update_primal_weight(state: PdhgState, config: PdhgConfig) -> None:
    """Move the primal weight toward ``||dy|| / ||dx||`` measured between restarts."""
    dx = float(np.linalg.norm(state.x - state.restart_x))
    dy = float(np.linalg.norm(state.y - state.restart_y))
    if dx > 1e-10 and dy > 1e-10:
        theta = config.primal_weight_smoothing
        state.omega = math.exp(theta * math.log(dy / dx) + (1.0 - theta) * math.log(state.omega))
        if state.norm_A > 0.0:
            state.tau = config.step_scale / (state.omega * state.norm_A)
            state.sigma = config.step_scale * state.omega / state.norm_A


def pdhg_step(lp: LinearProgram, state: PdhgState, config: PdhgConfig | None = None) -> PdhgState:
    """One PDHG iteration; updates ``state`` in place and returns it."""
    if state.ax is None:
        state.ax = matvec(lp.A, state.x)
    if state.aty is None:
        state.aty = matvec_transpose(lp.A, state.y)
    x_new = np.clip(state.x - state.tau * (lp.c - state.aty), lp.lower, lp.upper)
    ax_new = matvec(lp.A, x_new)
    y_new = state.y + state.sigma * (lp.b - (2.0 * ax_new - state.ax))
    aty_new = matvec_transpose(lp.A, y_new)
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(y_new))):
        raise PdhgNumericalError(state.k + 1)
    state.x, state.y, state.ax, state.aty = x_new, y_new, ax_new, aty_new
    state.x_sum += x_new
    state.y_sum += y_new
    state.n_avg += 1
    state.k += 1
    return state


def restart_if_improved(state: PdhgState, config: PdhgConfig, avg_resid: float, current_resid: float = math.inf) -> bool:
    """Restart from the average iterate if it beat the last restart point by ``restart_beta``.

    When the current iterate is better than the average, the restart
    point is the current iterate instead. Returns whether a restart happened.
    """
    candidate = min(avg_resid, current_resid)
    if not candidate <= config.restart_beta * state.last_restart_resid:
        return False
    if avg_resid <= current_resid:
        x, y = state.average()
        state.x, state.y = x, y
        state.ax = state.aty = None
    state.last_restart_resid = candidate
    state.best_resid = min(state.best_resid, candidate)
    if config.adaptive_primal_weight:
        update_primal_weight(state, config)
    state.restart_x = state.x.copy()
    state.restart_y = state.y.copy()
    state.reset_average()
    state.restarts += 1
    return True


class _Unscaled:
    """Cheap unscaled residuals from products already computed in scaled space."""

    def __init__(self, orig: LinearProgram, scaled: LinearProgram, info: ScalingInfo):
        self.orig = orig
        self.scaled = scaled
        self.info = info
        self.b_norm = float(np.linalg.norm(orig.b))
        self.c_norm = float(np.linalg.norm(orig.c))
        self.lo_fin = np.isfinite(scaled.lower)
        self.up_fin = np.isfinite(scaled.upper)
        self.l_fin = np.where(self.lo_fin, scaled.lower, 0.0)
        self.u_fin = np.where(self.up_fin, scaled.upper, 0.0)

    def maxresid(self, x, y, ax, aty) -> float:
        sc = self.scaled
        g = sc.c - aty
        z = reduced_costs(sc, g)
        rp = (sc.b - ax) / self.info.row
        rd = (z - g) / self.info.col
        primal = float(sc.c @ x)
        dual = float(sc.b @ y) + float(np.dot(self.l_fin, np.maximum(z, 0.0)) + np.dot(self.u_fin, np.minimum(z, 0.0)))
        rel_p = float(np.linalg.norm(rp)) / (1.0 + self.b_norm)
        rel_d = float(np.linalg.norm(rd)) / (1.0 + self.c_norm)
        rel_g = abs(primal - dual) / (1.0 + abs(primal) + abs(dual))
        return max(rel_p, rel_d, rel_g)

    def iterate(self, x, y, k) -> Iterate:
        xo = self.info.unscale_primal(x)
        yo = self.info.row * y
        z = reduced_costs(self.orig, self.orig.c - matvec_transpose(self.orig.A, yo))
        return Iterate(xo, yo, z, k)


def format_log_line(k: int, report: ResidualReport, elapsed: float) -> str:
    return f"{k}\t{report.rel_primal:.6e}\t{report.rel_dual:.6e}\t{report.rel_gap:.6e}\t{elapsed:.3f}"


def run_pdhg(
    lp: LinearProgram,
    config: PdhgConfig = PdhgConfig(),
    tolerances: Tolerances = Tolerances(),
    snapshot_sink: Callable[[Snapshot], None] | None = None,
    thresholds: Sequence[float] = (),
    cancel: CancelFlag | None = None,
    start: Iterate | None = None,
    log: Callable[[str], None] | None = None,
) -> PdhgResult:
    """Iterate until ``maxresid_rel <= eps_rel`` or a limit/cancellation.

    Each registered threshold produces at most one snapshot, delivered in
    decreasing order: at any iteration whose residual is at or below the
    next pending threshold (and above ``eps_rel``), one snapshot is taken
    and the target advances to the following threshold.
    """
    if not lp.is_standard:
        raise ValueError("run_pdhg expects an equality-form LP; use to_standard_form first")
    schedule = LaunchSchedule(thresholds, tolerances.eps_rel)
    t0 = time.perf_counter()
    eps = tolerances.eps_rel

    if config.ruiz_iterations > 0:
        scaled, info = ruiz_scale(lp, config.ruiz_iterations)
    else:
        scaled, info = lp, ScalingInfo.identity(lp.nrows, lp.ncols)
    ev = _Unscaled(lp, scaled, info)
    x0 = y0 = None
    if start is not None:
        x0, y0 = info.scale_primal(start.x), start.y / info.row
    state = init_state(scaled, config, x0, y0)
    state.start_time = t0

    def exact(x, y):
        it = ev.iterate(x, y, state.k)
        return it, kkt.relative_report(lp, it)

    def finish(reason, x=None, y=None, source="current"):
        if x is None:
            x, y = state.x, state.y
        it, rep = exact(x, y)
        return PdhgResult(it, rep, reason, state.k, state.restarts, time.perf_counter() - t0, source)

    def confirmed(x, y):
        it, rep = exact(x, y)
        if kkt.converged_relative(rep, eps) and kkt.relative_inequalities_hold(lp, it, eps):
            return it, rep
        return None

    resid = ev.maxresid(state.x, state.y, state.ax, state.aty)
    state.last_restart_resid = state.best_resid = resid
    while True:
        if schedule.converged(resid):
            done = confirmed(state.x, state.y)
            if done is not None:
                return PdhgResult(done[0], done[1], STOP_CONVERGED, state.k, state.restarts, time.perf_counter() - t0)
        if cancel is not None and cancel.is_set():
            return finish(STOP_CANCELLED)
        if state.k >= config.max_iterations:
            return finish(STOP_ITERATION_LIMIT)
        if time.perf_counter() - t0 >= config.time_limit:
            return finish(STOP_TIME_LIMIT)

        threshold = schedule.due(resid)
        if threshold is not None:
            snap = _take_snapshot(state, ev, exact, threshold, time.perf_counter() - t0)
            if snap is not None:
                schedule.advance()
                if snapshot_sink is not None:
                    snapshot_sink(snap)

        pdhg_step(scaled, state, config)
        resid = ev.maxresid(state.x, state.y, state.ax, state.aty)
        state.best_resid = min(state.best_resid, resid)

        if state.k % config.restart_check_every == 0 and state.n_avg > 0:
            xa, ya = state.average()
            avg_resid = ev.maxresid(xa, ya, matvec(scaled.A, xa), matvec_transpose(scaled.A, ya))
            if avg_resid <= eps and avg_resid < resid:
                done = confirmed(xa, ya)
                if done is not None:
                    return PdhgResult(done[0], done[1], STOP_CONVERGED, state.k, state.restarts, time.perf_counter() - t0, "average")
            if restart_if_improved(state, config, avg_resid, resid):
                if state.ax is None:
                    state.ax = matvec(scaled.A, state.x)
                    state.aty = matvec_transpose(scaled.A, state.y)
                resid = ev.maxresid(state.x, state.y, state.ax, state.aty)

        if log is not None and config.log_every and state.k % config.log_every == 0:
            it, rep = exact(state.x, state.y)
            log(format_log_line(state.k, rep, time.perf_counter() - t0))


def _take_snapshot(state, ev, exact, threshold, elapsed) -> Snapshot | None:
    it, rep = exact(state.x, state.y)
    source = "current"
    if state.n_avg > 1:
        xa, ya = state.average()
        it_a, rep_a = exact(xa, ya)
        if rep_a.maxresid_rel < rep.maxresid_rel:
            it, rep, source = it_a, rep_a, "average"
    if rep.maxresid_rel > threshold:
        return None
    return Snapshot(it.copy(), threshold, rep, source, state.k, elapsed)
