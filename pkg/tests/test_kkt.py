import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccpdhg.generate import random_lp
from ccpdhg.kkt import (
    Iterate,
    ResidualReport,
    Tolerances,
    absolute_violation,
    converged_relative,
    dual_residual,
    objective_gap,
    primal_residual,
    relative_inequalities_hold,
    relative_report,
)
from ccpdhg.lp import LinearProgram, to_standard_form
from ccpdhg.sparse import SparseMatrix

OPT = Iterate(np.array([2.0, 0.0]), np.array([1.0]), np.array([0.0, 1.0]))


def zeros(lp):
    return Iterate(np.zeros(lp.ncols), np.zeros(lp.nrows), np.zeros(lp.ncols))


def test_primal_residual_examples(two_var):
    assert primal_residual(two_var, Iterate(np.ones(2), np.zeros(1), np.zeros(2))).tolist() == [0.0]
    assert primal_residual(two_var, zeros(two_var)).tolist() == [2.0]


def test_dual_residual_examples(two_var):
    assert dual_residual(two_var, Iterate(np.zeros(2), np.zeros(1), two_var.c.copy())).tolist() == [0.0, 0.0]
    assert dual_residual(two_var, OPT).tolist() == [0.0, 0.0]


def test_objective_gap_examples(two_var):
    assert objective_gap(two_var, OPT) == (2.0, 2.0)
    assert objective_gap(two_var, zeros(two_var)) == (0.0, 0.0)


def test_relative_report_hand_values(two_var):
    r = relative_report(two_var, zeros(two_var))
    assert r.rel_primal == pytest.approx(2.0 / 3.0, rel=1e-15)
    assert r.rel_dual == pytest.approx(math.sqrt(5) / (1 + math.sqrt(5)), rel=1e-15)
    assert r.rel_gap == 0.0
    assert r.maxresid_rel == max(r.rel_primal, r.rel_dual, r.rel_gap)
    assert relative_report(two_var, OPT).maxresid_rel == 0.0


def test_converged_relative_boundaries(two_var):
    base = relative_report(two_var, OPT)
    at = lambda v: ResidualReport(**{**base.to_dict(), "maxresid_rel": v})  # noqa: E731
    assert converged_relative(at(0.0), 1e-12)
    assert not converged_relative(at(1e-5), 1e-6)
    assert converged_relative(at(1e-6), 1e-6)


def test_absolute_violation_examples(two_var):
    assert absolute_violation(two_var, OPT) < 1e-12
    off = Iterate(np.array([2.001, 0.0]), OPT.y, OPT.z)
    assert absolute_violation(two_var, off) == pytest.approx(1e-3, rel=1e-9)


def test_dimension_mismatch(two_var):
    with pytest.raises(ValueError):
        primal_residual(two_var, Iterate(np.zeros(3), np.zeros(1), np.zeros(3)))
    with pytest.raises(ValueError):
        dual_residual(two_var, Iterate(np.zeros(2), np.zeros(2), np.zeros(2)))


def test_tolerances_validation():
    Tolerances()
    for bad in ({"decrement": 1.0}, {"decrement": 0.0}, {"eps_rel": 1e-1}, {"eps_abs": 0.0}):
        with pytest.raises(ValueError):
            Tolerances(**bad)


def dense_report(lp, it):
    A = lp.A.to_dense()
    rp = lp.b - A @ it.x
    rd = A.T @ it.y + it.z - lp.c
    p, d = lp.c @ it.x, lp.b @ it.y
    return (
        np.linalg.norm(rp) / (1 + np.linalg.norm(lp.b)),
        np.linalg.norm(rd) / (1 + np.linalg.norm(lp.c)),
        abs(p - d) / (1 + abs(p) + abs(d)),
    )


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), factor=st.sampled_from([1.0, 2.0]))
def test_report_matches_dense_recomputation(seed, factor):
    std = to_standard_form(random_lp(5, 7, seed=seed)).lp
    lp = LinearProgram(factor * std.c, std.A, factor * std.b, lower=std.lower, upper=std.upper)
    rng = np.random.default_rng(seed)
    it = Iterate(np.abs(rng.normal(size=lp.ncols)), rng.normal(size=lp.nrows), np.zeros(lp.ncols))
    r = relative_report(lp, it)
    expect = dense_report(lp, it)
    np.testing.assert_allclose([r.rel_primal, r.rel_dual], expect[:2], rtol=1e-12)
    # zero z keeps the bound terms of the dual objective out, so b.y is the dual value
    assert r.rel_gap == pytest.approx(expect[2], rel=1e-12)
    assert r == relative_report(lp, it)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_ratio_test_implies_inequalities(seed):
    std = to_standard_form(random_lp(4, 6, seed=seed)).lp
    rng = np.random.default_rng(seed)
    it = Iterate(np.abs(rng.normal(size=std.ncols)), rng.normal(size=std.nrows), rng.normal(size=std.ncols))
    r = relative_report(std, it)
    eps = r.maxresid_rel * (1 + 1e-12)
    assert relative_inequalities_hold(std, it, eps)
    assert not relative_inequalities_hold(std, it, r.maxresid_rel * 0.5) or r.maxresid_rel == 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), delta=st.floats(1e-8, 1e-2))
def test_violation_changes_boundedly_under_perturbation(seed, delta):
    lp = random_lp(5, 8, seed=seed)
    rng = np.random.default_rng(seed)
    it = Iterate(np.abs(rng.normal(size=8)), rng.normal(size=5), rng.normal(size=8))
    moved = Iterate(it.x + delta * rng.choice([-1.0, 1.0], size=8), it.y, it.z)
    A_inf = np.abs(lp.A.to_dense()).sum(axis=1).max()
    # rows and bounds move by A_inf*delta and delta; complementarity terms are weighted by |z| and |y|
    bound = (max(A_inf, 1.0) + np.abs(it.z).max() + A_inf * np.abs(it.y).max()) * delta
    assert abs(absolute_violation(lp, moved) - absolute_violation(lp, it)) <= bound * (1 + 1e-9)


def test_report_json_round_trip(two_var):
    r = relative_report(two_var, zeros(two_var))
    again = ResidualReport.from_dict(json.loads(r.to_json()))
    assert again == r
    assert set(json.loads(r.to_json())) >= {"rP_norm2", "rD_norm2", "maxresid_rel", "complementarity"}


def test_general_form_residuals():
    lp = LinearProgram(
        c=[1.0, 1.0], A=SparseMatrix.from_dense([[1.0, 1.0], [1.0, -1.0]]), b=[4.0, 0.0], senses=["L", "G"]
    )
    inside = Iterate(np.array([1.0, 1.0]), np.zeros(2), np.array([1.0, 1.0]))
    assert primal_residual(lp, inside).tolist() == [0.0, 0.0]
    outside = Iterate(np.array([5.0, 0.0]), np.zeros(2), np.zeros(2))
    assert primal_residual(lp, outside).tolist() == [-1.0, 0.0]
    # wrong-sign multiplier on a <= row shows up in the dual violation
    bad = Iterate(np.array([1.0, 1.0]), np.array([1.0, 0.0]), np.array([0.0, 0.0]))
    assert relative_report(lp, bad).rD_inf >= 1.0
