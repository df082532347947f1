"""Independent reference computations used by the tests.

Nothing here imports solver code beyond the plain data classes, so a bug
in the solvers cannot leak into the expected values.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog


def vertex_enumeration(c, A, b, lower, upper):
    """Optimal value and point of ``min c x, A x = b, l <= x <= u`` by brute force.

    Every choice of ``m`` basic columns with the rest on a finite bound is
    tried. Only meant for a handful of columns.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    c, b = np.asarray(c, float), np.asarray(b, float)
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    m, n = A.shape
    best = (math.inf, None)
    for basic in itertools.combinations(range(n), m):
        B = A[:, basic]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        nonbasic = [j for j in range(n) if j not in basic]
        choices = [[v for v in (lower[j], upper[j]) if math.isfinite(v)] for j in nonbasic]
        for vals in itertools.product(*choices):
            x = np.zeros(n)
            x[nonbasic] = vals
            x[list(basic)] = np.linalg.solve(B, b - A[:, nonbasic] @ np.array(vals, dtype=float))
            if np.all(x >= lower - 1e-9) and np.all(x <= upper + 1e-9):
                obj = float(c @ x)
                if obj < best[0] - 1e-12:
                    best = (obj, x)
    return best


def highs_std(lp):
    """HiGHS optimum of an equality-form ``LinearProgram`` (objective without offset)."""
    ub = [None if math.isinf(u) else u for u in lp.upper]
    lb = [None if math.isinf(v) else v for v in lp.lower]
    res = linprog(lp.c, A_eq=lp.A.to_scipy(), b_eq=lp.b, bounds=list(zip(lb, ub)), method="highs")
    assert res.status == 0, res.message
    return float(res.fun), res.x


def min_ratio_scan(x_B, lo_B, up_B, alpha, direction, flip_range):
    """Largest step keeping every basic variable in bounds, by scanning
    candidate step lengths in increasing order."""
    steps = [flip_range]
    for xi, lo, up, a in zip(x_B, lo_B, up_B, alpha):
        rate = -direction * a
        if rate < 0 and math.isfinite(lo):
            steps.append((xi - lo) / -rate)
        elif rate > 0 and math.isfinite(up):
            steps.append((up - xi) / rate)
    return min(steps)


def dense_power_norm(M) -> float:
    return float(np.linalg.svd(np.asarray(M, float), compute_uv=False)[0]) if np.size(M) else 0.0


def race_winner(trace, durations, thresholds, eps_rel, success=None):
    """Winner and win time of a race with enough workers that nothing is dropped.

    Worked out directly from the timeline: threshold ``j`` launches at the
    first iteration after the previous launch whose residual is at or
    below it, the main crossover launches at the first residual at or
    below ``eps_rel``, and nothing launches at or after the earliest
    successful finish. Ties on finish time go to the earlier launch.
    """
    success = success or {}
    launches = []  # (finish, order, label)
    j = 0
    for t, resid in trace:
        done = [f for f, _, lab in launches if success.get(lab, True)]
        if done and min(done) <= t:
            break
        if resid <= eps_rel:
            launches.append((t + durations["main"], len(launches), "main"))
            break
        if j < len(thresholds) and resid <= thresholds[j]:
            launches.append((t + durations[thresholds[j]], len(launches), thresholds[j]))
            j += 1
    wins = sorted((f, order, lab) for f, order, lab in launches if success.get(lab, True))
    if not wins:
        return None, None
    return wins[0][2], wins[0][0]


def termination_inequalities(c, A, b, lower, upper, x, y, z, eps):
    """The three relative stopping inequalities recomputed with dense numpy.

    The dual value includes the bound terms ``l.z+ - u.z-`` so that it is
    a valid bound for boxed columns; it reduces to ``b.y`` when ``z``
    vanishes on the bounded side.
    """
    A = np.asarray(A, float)
    rp = np.linalg.norm(b - A @ x)
    rd = np.linalg.norm(c - A.T @ y - z)
    lo = np.where(np.isfinite(lower), lower, 0.0)
    up = np.where(np.isfinite(upper), upper, 0.0)
    primal = float(c @ x)
    dual = float(b @ y) + float(lo @ np.maximum(z, 0.0) + up @ np.minimum(z, 0.0))
    return (
        rp <= eps * (1 + np.linalg.norm(b)),
        rd <= eps * (1 + np.linalg.norm(c)),
        abs(primal - dual) <= eps * (1 + abs(primal) + abs(dual)),
    )
