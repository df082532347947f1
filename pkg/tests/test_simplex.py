import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccpdhg.cancel import CancelFlag
from ccpdhg.generate import random_lp
from ccpdhg.lp import LinearProgram, to_standard_form
from ccpdhg.mps import read_mps
from ccpdhg.simplex import (
    AT_LOWER,
    AT_UPPER,
    BASIC,
    CANCELLED,
    FIXED,
    OPTIMAL,
    Basis,
    FactorizedBasis,
    InfeasibleError,
    SingularBasisError,
    UnboundedError,
    factorize,
    primal_simplex,
    ratio_test,
    read_basis,
    repair_basis,
    write_basis,
)
from ccpdhg.sparse import SparseMatrix

from conftest import DATA
from oracles import highs_std, min_ratio_scan, vertex_enumeration


def lp_eq(c, dense, b, lower=None, upper=None):
    return LinearProgram(c=c, A=SparseMatrix.from_dense(dense), b=b, lower=lower, upper=upper)


def test_slack_basis_prefers_unit_columns():
    lp = lp_eq([1.0, 1.0, 0.0], [[2.0, 1.0, 1.0], [1.0, 3.0, 0.0]], [1.0, 1.0])
    basis = Basis.slack_basis(lp)
    assert basis.basic.tolist() == [2, 4]
    assert basis.status.tolist() == [AT_LOWER, AT_LOWER, BASIC, FIXED, BASIC]
    basis.validate(lp)


def test_ftran_scalar():
    f = FactorizedBasis(np.array([[2.0]]), [0])
    assert f.ftran([4.0]).tolist() == [2.0]
    assert f.btran([4.0]).tolist() == [2.0]


def test_eta_updates_match_dense_solve():
    rng = np.random.default_rng(7)
    B = rng.normal(size=(6, 6)) + 6 * np.eye(6)
    f = FactorizedBasis(B.copy(), list(range(6)))
    for r in (0, 3, 5, 3):
        col = rng.normal(size=6)
        col[r] += 6.0
        f.update(r, f.ftran(col))
        B[:, r] = col
        v = rng.normal(size=6)
        np.testing.assert_allclose(f.ftran(v), np.linalg.solve(B, v), rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(f.btran(v), np.linalg.solve(B.T, v), rtol=1e-10, atol=1e-12)
    assert f.n_updates == 4


def test_duplicate_columns_are_singular():
    lp = lp_eq([1.0, 1.0], [[1.0, 1.0], [2.0, 2.0]], [1.0, 2.0])
    with pytest.raises(SingularBasisError) as err:
        factorize(lp, Basis.from_basic(lp, [0, 1]))
    assert len(err.value.positions) == 1
    fixed = repair_basis(lp, Basis.from_basic(lp, [0, 1]))
    factorize(lp, fixed)
    assert 0 in fixed.basic.tolist() or 1 in fixed.basic.tolist()


def test_two_var_from_slack_start(two_var):
    res = primal_simplex(two_var)
    assert res.status == OPTIMAL
    assert res.basis.basic.tolist() == [0]
    assert res.iterate.x.tolist() == [2.0, 0.0]
    assert res.iterate.y.tolist() == [1.0]
    assert res.objective == 2.0


def test_infeasible_start_goes_through_phase_one():
    # no unit column, so the row logical starts basic at 6 outside its [0, 0] box
    lp = lp_eq([1.0, 1.0], [[2.0, 3.0]], [6.0])
    res = primal_simplex(lp)
    assert res.stats.phase1_iterations >= 1
    assert res.iterate.x.tolist() == [0.0, 2.0]
    assert res.objective == 2.0


def test_optimal_start_needs_no_pivots(two_var):
    res = primal_simplex(two_var, Basis.from_basic(two_var, [0]))
    assert res.status == OPTIMAL and res.stats.iterations == 0


def test_cancelled_before_first_pivot(two_var):
    flag = CancelFlag()
    flag.cancel()
    assert primal_simplex(two_var, cancel=flag).status == CANCELLED


def test_unbounded():
    lp = lp_eq([-1.0, 0.0], [[1.0, -1.0]], [0.0])
    with pytest.raises(UnboundedError):
        primal_simplex(lp)


def test_infeasible():
    lp = lp_eq([1.0, 1.0], [[1.0, 1.0]], [-1.0])
    with pytest.raises(InfeasibleError):
        primal_simplex(lp)


def test_bound_flip():
    lp = lp_eq([-1.0, 0.0], [[1.0, 1.0]], [5.0], upper=[1.0, np.inf])
    res = primal_simplex(lp)
    assert res.status == OPTIMAL
    assert res.iterate.x.tolist() == [1.0, 4.0]
    assert res.stats.bound_flips == 1
    assert res.basis.status[0] == AT_UPPER


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    m=st.integers(1, 6),
    direction=st.sampled_from([1.0, -1.0]),
    flip=st.sampled_from([np.inf, 0.5, 3.0]),
)
def test_ratio_test_matches_scan(seed, m, direction, flip):
    rng = np.random.default_rng(seed)
    lo = np.where(rng.random(m) < 0.8, 0.0, -np.inf)
    up = np.where(rng.random(m) < 0.5, lo + rng.uniform(0.5, 4.0, m), np.inf)
    x = np.where(np.isfinite(lo), lo, -1.0) + rng.uniform(0, 0.5, m)
    x = np.minimum(x, up)
    alpha = rng.normal(size=m)
    theta, r = ratio_test(x, lo, up, alpha, direction, flip_range=flip, pivot_tol=0.0)
    expect = min_ratio_scan(x, lo, up, alpha, direction, flip)
    assert theta == pytest.approx(expect, rel=1e-12)
    if r is not None:
        assert theta < flip or theta == flip


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_random_lps_match_vertex_enumeration(seed):
    lp = to_standard_form(random_lp(2, 3, seed=seed, equality_fraction=0.5)).lp
    res = primal_simplex(lp)
    value, _ = vertex_enumeration(lp.c, lp.A.to_dense(), lp.b, lp.lower, lp.upper)
    assert res.objective == pytest.approx(value, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_random_lps_match_highs(seed):
    lp = to_standard_form(random_lp(15, 25, seed=seed)).lp
    res = primal_simplex(lp)
    value, _ = highs_std(lp)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(value, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("name", ["p0033", "flugpl", "lseu"])
def test_regression_relaxations(name, optima):
    std = to_standard_form(read_mps(DATA / f"{name}.mps"))
    res = primal_simplex(std.lp)
    value = std.original.objective(std.unmap_primal(res.iterate.x))
    assert value == pytest.approx(optima[name]["objective"], rel=1e-9)


def test_basis_file_round_trip():
    lp = to_standard_form(read_mps(DATA / "p0033.mps")).lp
    res = primal_simplex(lp)
    again = read_basis(lp, write_basis(lp, res.basis))
    assert again.basic.tolist() == res.basis.basic.tolist()
    assert again.status.tolist() == res.basis.status.tolist()
    warm = primal_simplex(lp, again)
    assert warm.stats.iterations == 0


def test_basis_file_rejects_unknown_name(two_var):
    with pytest.raises(ValueError):
        read_basis(two_var, "BASIS x\nB nosuch\nEND\n")
