import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cauchy_sketch.core import DataMatrix, DiffSample, Estimate, l1_distance, load_matrix_csv, write_matrix_csv
from cauchy_sketch.exceptions import LengthMismatchError, ParseError, RaggedRowsError


def _write(tmp_path, text, name="m.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_simple_matrix(tmp_path):
    m = load_matrix_csv(_write(tmp_path, "1,2\n3,4"))
    assert (m.n, m.D) == (2, 2)
    assert m.values.ravel().tolist() == [1.0, 2.0, 3.0, 4.0]


def test_ragged_rows(tmp_path):
    with pytest.raises(RaggedRowsError) as info:
        load_matrix_csv(_write(tmp_path, "1,2\n3"))
    assert info.value.row == 1


def test_non_finite_rejected(tmp_path):
    with pytest.raises(ParseError) as info:
        load_matrix_csv(_write(tmp_path, "1,nan"))
    assert (info.value.row, info.value.col) == (0, 1)


def test_non_numeric_rejected(tmp_path):
    with pytest.raises(ParseError) as info:
        load_matrix_csv(_write(tmp_path, "1,2\n3,x"))
    assert (info.value.row, info.value.col) == (1, 1)


def test_header_and_delimiter(tmp_path):
    m = load_matrix_csv(_write(tmp_path, "a;b\n1;2\n"), delimiter=";", header=True)
    assert m.values.tolist() == [[1.0, 2.0]]


def test_empty_file(tmp_path):
    with pytest.raises(ParseError):
        load_matrix_csv(_write(tmp_path, ""))


def test_values_are_read_only():
    m = DataMatrix([[1.0, 2.0]])
    with pytest.raises(ValueError):
        m.values[0, 0] = 5.0


def test_data_matrix_rejects_bad_shapes():
    with pytest.raises(ValueError):
        DataMatrix([1.0, 2.0])
    with pytest.raises(ParseError):
        DataMatrix([[1.0, math.inf]])


def test_estimate_is_nonnegative():
    assert float(Estimate(2.5, "gm_c", 3)) == 2.5
    with pytest.raises(ValueError):
        Estimate(-1.0, "gm_c", 3)


def test_diff_sample_length():
    assert len(DiffSample([1.0, -2.0, 3.0])) == 3


def test_l1_distance_examples():
    assert l1_distance([1, 2, 3], [1, 2, 3]) == 0
    assert l1_distance([0, 0], [3, -4]) == 7
    with pytest.raises(LengthMismatchError):
        l1_distance([1, 2], [1])


def test_l1_distance_matches_independent_summation():
    rng = np.random.default_rng(5)
    a, b = rng.standard_normal(1000), rng.standard_normal(1000)
    # exact rational re-summation of the rounded |a_i - b_i|
    from fractions import Fraction

    exact = float(sum(Fraction(float(abs(x - y))) for x, y in zip(a, b)))
    assert l1_distance(a, b) == exact


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=40))
def test_l1_metric_properties(pairs):
    a = [p[0] for p in pairs]
    b = [p[1] for p in pairs]
    d = l1_distance(a, b)
    assert d >= 0
    assert d == l1_distance(b, a)
    assert (d == 0) == (a == b)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False),
                         min_size=3, max_size=3), min_size=1, max_size=6))
def test_csv_round_trip_is_bit_exact(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("rt") / "m.csv"
    m = DataMatrix(rows)
    write_matrix_csv(m, path)
    again = load_matrix_csv(path)
    assert np.array_equal(again.values, m.values)
