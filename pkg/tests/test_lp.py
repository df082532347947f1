import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccpdhg.generate import random_lp
from ccpdhg.kkt import Iterate, relative_report
from ccpdhg.lp import INF, LinearProgram, RowSense, to_standard_form
from ccpdhg.sparse import SparseMatrix

from oracles import highs_std


def test_le_row_gets_nonnegative_slack():
    lp = LinearProgram(c=[1.0, 1.0], A=SparseMatrix.from_dense([[1.0, 1.0]]), b=[4.0], senses=["L"])
    smap = to_standard_form(lp)
    std = smap.lp
    assert std.is_standard
    assert std.A.to_dense().tolist() == [[1.0, 1.0, 1.0]]
    assert (std.lower[2], std.upper[2]) == (0.0, INF)
    np.testing.assert_array_equal(smap.map_primal([1.0, 2.0]), [1.0, 2.0, 1.0])


def test_equality_lp_is_identity(two_var):
    smap = to_standard_form(two_var)
    assert smap.lp.same_data(two_var)
    assert len(smap.slack_rows) == 0


def test_max_objective_negated():
    lp = LinearProgram(c=[3.0], A=SparseMatrix.from_dense([[1.0]]), b=[2.0], senses=["L"], maximize=True, obj_offset=1.0)
    smap = to_standard_form(lp)
    assert smap.lp.c.tolist() == [-3.0, 0.0]
    assert not smap.lp.maximize
    assert smap.unmap_objective(-6.0) == 6.0
    assert lp.objective([2.0]) == 7.0


def test_ranged_rows_get_bounded_slacks():
    lp = LinearProgram(
        c=[1.0],
        A=SparseMatrix.from_dense([[1.0], [1.0], [1.0]]),
        b=[5.0, 1.0, 3.0],
        senses=["L", "G", "E"],
        ranges=[3.0, 2.0, -1.0],
    )
    std = to_standard_form(lp).lp
    assert std.upper[1:].tolist() == [3.0, 2.0, 1.0]
    assert std.A.to_dense()[:, 1:].tolist() == [[1, 0, 0], [0, -1, 0], [0, 0, 1]]


def test_invalid_bounds_rejected():
    with pytest.raises(ValueError):
        LinearProgram(c=[1.0], A=SparseMatrix.from_dense([[1.0]]), b=[1.0], lower=[2.0], upper=[1.0])
    with pytest.raises(ValueError):
        LinearProgram(c=[1.0, 2.0], A=SparseMatrix.from_dense([[1.0]]), b=[1.0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), maximize=st.booleans())
def test_round_trip_is_exact(seed, maximize):
    base = random_lp(6, 9, seed=seed)
    lp = LinearProgram(base.c, base.A, base.b, base.senses, base.lower, base.upper, maximize=maximize)
    smap = to_standard_form(lp)
    rng = np.random.default_rng(seed)
    x, y, z = rng.normal(size=9), rng.normal(size=6), rng.normal(size=9)
    np.testing.assert_array_equal(smap.unmap_primal(smap.map_primal(x)), x)
    y2, z2 = smap.unmap_dual(*smap.map_dual(y, z))
    np.testing.assert_array_equal(y2, y)
    np.testing.assert_array_equal(z2, z)


def test_mapped_optimum_keeps_residuals():
    lp = LinearProgram(
        c=[-1.0, -2.0], A=SparseMatrix.from_dense([[1.0, 1.0], [1.0, -1.0]]), b=[4.0, 1.0], senses=["L", "G"]
    )
    smap = to_standard_form(lp)
    value, x_std = highs_std(smap.lp)
    assert value == pytest.approx(-5.5)  # x = (2.5, 1.5)
    report = relative_report(lp, Iterate(smap.unmap_primal(x_std), np.zeros(2), np.zeros(2)))
    assert report.rP_inf <= 1e-9


def test_senses_accept_letters():
    lp = LinearProgram(c=[1.0], A=SparseMatrix.from_dense([[1.0]]), b=[1.0], senses=["G"])
    assert lp.senses == (RowSense.GE,)
