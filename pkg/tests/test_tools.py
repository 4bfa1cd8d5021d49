import pytest

from qms_assistant.errors import NotFoundError, ValidationError
from qms_assistant.tools import ToolRegistry, linear_trend, mean, min_max, setup_time_delta, std_dev


def closed_form_slope(values):
    # Independent least-squares oracle over indices 0..n-1.
    n = len(values)
    xs = list(range(n))
    sx, sy = sum(xs), sum(values)
    sxx = sum(x * x for x in xs)
    sxy = sum(x * y for x, y in zip(xs, values))
    return (n * sxy - sx * sy) / (n * sxx - sx * sx)


def test_mean():
    assert mean([2, 4, 6]) == 4.0


def test_std_dev_constant_series():
    assert std_dev([5, 5, 5]) == 0.0


def test_std_dev_population():
    assert std_dev([2, 4]) == pytest.approx(1.0)


def test_min_max():
    assert min_max([3, 1, 2]) == {"min": 1.0, "max": 3.0}


def test_setup_time_delta():
    result = setup_time_delta(50, 40)
    assert result == {"absolute_delta": 10.0, "percent_change": 20.0}


def test_setup_time_delta_zero_old():
    with pytest.raises(ValidationError):
        setup_time_delta(0, 10)


def test_linear_trend_unit_slope():
    assert linear_trend([1, 2, 3, 4])["slope"] == pytest.approx(
        closed_form_slope([1, 2, 3, 4])
    )
    assert linear_trend([1, 2, 3, 4])["slope"] == pytest.approx(1.0)


@pytest.mark.parametrize("series", [[3.0, 1.0, 4.0, 1.0, 5.0], [10, 8, 6, 4], [0, 7]])
def test_linear_trend_matches_oracle(series):
    assert linear_trend(series)["slope"] == pytest.approx(closed_form_slope(series))


def test_empty_series_rejected():
    for fn in (mean, std_dev, min_max, linear_trend):
        with pytest.raises(ValidationError):
            fn([])


def test_registry_listing_stable():
    registry = ToolRegistry.default()
    assert registry.names() == ["linear_trend", "mean", "min_max", "setup_time_delta", "std_dev"]
    assert registry.names() == registry.names()


def test_registry_call_and_purity():
    registry = ToolRegistry.default()
    first = registry.call("mean", {"values": [1, 2, 3]})
    second = registry.call("mean", {"values": [1, 2, 3]})
    assert first == second == 2.0


def test_unknown_tool():
    with pytest.raises(NotFoundError):
        ToolRegistry.default().call("fourier", {})


def test_bad_arity():
    with pytest.raises(ValidationError):
        ToolRegistry.default().call("mean", {"values": [1], "extra": 2})
