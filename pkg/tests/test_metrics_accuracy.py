import pytest
from hypothesis import given
from hypothesis import strategies as st

from qasynth.errors import MetricError
from qasynth.metrics import accuracy, accuracy_from_counts


def test_published_table_values():
    assert accuracy_from_counts(227, 500) == 45.4
    assert accuracy_from_counts(192, 500) == 38.4
    assert accuracy_from_counts(452, 500) == 90.4


def test_rounding_is_half_even_on_exact_tenths():
    # evaluated on the exact rational, not on a float
    assert accuracy_from_counts(1, 2000) == 0.0  # 0.05 -> 0.0 (0 is even)
    assert accuracy_from_counts(3, 2000) == 0.2  # 0.15 -> 0.2 (2 is even)
    assert accuracy_from_counts(1, 3) == 33.3
    assert accuracy_from_counts(2, 3) == 66.7
    assert accuracy_from_counts(0, 7) == 0.0
    assert accuracy_from_counts(7, 7) == 100.0


@given(st.integers(min_value=1, max_value=3000), st.data())
def test_complement_sums_to_100(total, data):
    correct = data.draw(st.integers(min_value=0, max_value=total))
    a = accuracy_from_counts(correct, total)
    b = accuracy_from_counts(total - correct, total)
    assert a + b == 100.0


def test_accuracy_over_verdicts():
    assert accuracy([True, True, False, False]) == 50.0
    assert accuracy([True] * 227 + [False] * 273) == 45.4


def test_validation():
    with pytest.raises(MetricError):
        accuracy_from_counts(0, 0)
    with pytest.raises(MetricError):
        accuracy_from_counts(5, 4)
    with pytest.raises(MetricError):
        accuracy_from_counts(-1, 4)
    with pytest.raises(MetricError):
        accuracy([])
