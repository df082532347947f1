import gzip
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccpdhg.generate import random_lp
from ccpdhg.lp import INF, LinearProgram, RowSense
from ccpdhg.mps import MpsParseError, parse_mps, read_mps, write_mps
from ccpdhg.sparse import SparseMatrix

from conftest import DATA

TWO_VAR = """\
NAME          TWOVAR
ROWS
 N  COST
 E  LIM
COLUMNS
    X1        COST         1.0   LIM          1.0
    X2        COST         2.0   LIM          1.0
RHS
    RHS       LIM          2.0
ENDATA
"""


def test_two_variable_model():
    lp = parse_mps(TWO_VAR)
    assert (lp.nrows, lp.ncols) == (1, 2)
    assert lp.c.tolist() == [1.0, 2.0]
    assert lp.b.tolist() == [2.0]
    assert lp.lower.tolist() == [0.0, 0.0]
    assert lp.upper.tolist() == [INF, INF]
    assert lp.name == "TWOVAR"


def test_empty_columns_section():
    lp = parse_mps("NAME E\nROWS\n N obj\n L r1\nCOLUMNS\nRHS\n RHS r1 1\nENDATA\n")
    assert lp.ncols == 0 and lp.nrows == 1


# Activity interval per the MPS range table: (sense, rhs, R) -> (lo, hi)
RANGE_TABLE = [
    ("L", 5.0, 3.0, 2.0, 5.0),
    ("L", 5.0, -3.0, 2.0, 5.0),
    ("G", 5.0, 3.0, 5.0, 8.0),
    ("G", 5.0, -3.0, 5.0, 8.0),
    ("E", 5.0, 3.0, 5.0, 8.0),
    ("E", 5.0, -3.0, 2.0, 5.0),
]


@pytest.mark.parametrize("sense, rhs, rng, lo, hi", RANGE_TABLE)
def test_ranges_follow_mps_table(sense, rhs, rng, lo, hi):
    text = (
        f"NAME R\nROWS\n N obj\n {sense} r1\nCOLUMNS\n x obj 1 r1 1\n"
        f"RHS\n RHS r1 {rhs}\nRANGES\n RNG r1 {rng}\nENDATA\n"
    )
    row_lo, row_hi = parse_mps(text).row_bounds
    assert (row_lo[0], row_hi[0]) == (lo, hi)


def test_bounds_section_kinds():
    text = """NAME B
ROWS
 N obj
 L r
COLUMNS
 a obj 1 r 1
 b obj 1 r 1
 c obj 1 r 1
 d obj 1 r 1
 e obj 1 r 1
 f obj 1 r 1
 g obj 1 r 1
RHS
 RHS r 10
BOUNDS
 UP BND a 4
 LO BND b -2
 FX BND c 3
 FR BND d
 MI BND e
 BV BND f
 UP BND g -1
ENDATA
"""
    lp = parse_mps(text)
    assert lp.lower.tolist() == [0, -2, 3, -INF, -INF, 0, -INF]
    assert lp.upper.tolist() == [4, INF, 3, INF, INF, 1, -1]


def test_objsense_and_offset():
    text = "NAME M\nOBJSENSE\n    MAX\nROWS\n N obj\n L r\nCOLUMNS\n x obj 3 r 1\nRHS\n RHS r 4\n RHS obj 2.5\nENDATA\n"
    lp = parse_mps(text)
    assert lp.maximize
    assert lp.obj_offset == -2.5


def test_marker_lines_are_skipped():
    text = (
        "NAME I\nROWS\n N obj\n L r\nCOLUMNS\n"
        "    MARKER                 'MARKER'                 'INTORG'\n"
        " x obj 1 r 1\n"
        "    MARKER                 'MARKER'                 'INTEND'\n"
        "RHS\n RHS r 1\nENDATA\n"
    )
    assert parse_mps(text).ncols == 1


def test_gzip_input(tmp_path):
    p = tmp_path / "m.mps.gz"
    p.write_bytes(gzip.compress(TWO_VAR.encode()))
    assert read_mps(p).same_data(parse_mps(TWO_VAR))


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("NAME X\nROWS\n N obj\n L r\n L r\nCOLUMNS\nENDATA\n", 5),  # duplicate row
        ("NAME X\nROWS\n N obj\nCOLUMNS\n x obj 1\nBOUNDS\n UP BND y 1\nENDATA\n", 7),  # unknown column
        ("NAME X\nROWS\n N obj\nCOLUMNS\n x nope 1\nENDATA\n", 5),  # unknown row
        ("NAME X\nBOGUS\nENDATA\n", 2),  # unknown section
        ("NAME X\nROWS\n N obj\nCOLUMNS\n x obj abc\nENDATA\n", 5),  # bad number
    ],
)
def test_parse_errors_carry_line_numbers(text, lineno):
    with pytest.raises(MpsParseError) as err:
        parse_mps(text)
    assert err.value.lineno == lineno
    assert f"line {lineno}" in str(err.value)


def test_missing_endata():
    with pytest.raises(MpsParseError):
        parse_mps("NAME X\nROWS\n N obj\n")


def test_regression_files_round_trip():
    for path in sorted(DATA.glob("*.mps")):
        lp = read_mps(path)
        assert parse_mps(write_mps(lp)).same_data(lp), path.name


@st.composite
def small_lps(draw):
    m = draw(st.integers(1, 5))
    n = draw(st.integers(1, 6))
    finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
    dense = np.array(draw(st.lists(st.lists(finite, min_size=n, max_size=n), min_size=m, max_size=m)))
    lower = np.array(draw(st.lists(st.sampled_from([0.0, -1.5, -INF, 2.0]), min_size=n, max_size=n)))
    width = np.array(draw(st.lists(st.sampled_from([0.0, 1.0, 0.25, INF]), min_size=n, max_size=n)))
    with np.errstate(invalid="ignore"):
        upper = np.where(np.isinf(lower), np.where(np.isinf(width), INF, width - 3.0), lower + width)
    ranges = np.array(draw(st.lists(st.sampled_from([math.nan, 3.0, -2.0]), min_size=m, max_size=m)))
    return LinearProgram(
        c=np.array(draw(st.lists(finite, min_size=n, max_size=n))),
        A=SparseMatrix.from_dense(dense),
        b=np.array(draw(st.lists(finite, min_size=m, max_size=m))),
        senses=draw(st.lists(st.sampled_from(list(RowSense)), min_size=m, max_size=m)),
        lower=lower,
        upper=upper,
        ranges=ranges,
        maximize=draw(st.booleans()),
        obj_offset=draw(finite),
    )


@settings(max_examples=80, deadline=None)
@given(small_lps())
def test_write_parse_fixed_point(lp):
    again = parse_mps(write_mps(lp))
    assert again.same_data(lp)
    assert parse_mps(write_mps(again)).same_data(again)


def test_generated_lp_round_trip():
    lp = random_lp(8, 12, seed=4)
    assert parse_mps(write_mps(lp)).same_data(lp)
