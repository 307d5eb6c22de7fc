import warnings

import numpy as np
import pytest

from hourcast.baselines import (
    BASELINE_ORDERS,
    ArimaFallbackWarning,
    ArimaOrder,
    _fit_cls,
    _invertible,
    arima_forecast,
    persistence_forecast,
    persistence_network,
)
from hourcast.events import TemporalGraph

AutoReg = pytest.importorskip("statsmodels.tsa.ar_model").AutoReg


def test_persistence_repeats_last_window():
    assert persistence_forecast([1, 2, 3, 4, 5], 3).tolist() == [3, 4, 5]
    with pytest.raises(ValueError):
        persistence_forecast([1, 2], 3)


def test_persistence_network_shifts_by_span():
    gs = [TemporalGraph(10 + i, {("a", "b"): i + 1}) for i in range(3)]
    out = persistence_network(gs)
    assert [g.bin_start for g in out] == [13, 14, 15]
    assert [dict(g.edges) for g in out] == [dict(g.edges) for g in gs]


def ar_series(phi, n, seed, c=5.0):
    rng = np.random.default_rng(seed)
    y = np.zeros(n + 100)
    for t in range(len(phi), len(y)):
        y[t] = c + sum(p * y[t - 1 - i] for i, p in enumerate(phi)) + rng.normal()
    return y[100:]


def test_ar1_coefficient_recovered():
    y = ar_series([0.8], 3000, 0)
    coef, _, _ = _fit_cls(y, 1, 0)
    assert coef[1] == pytest.approx(0.8, abs=0.03)


@pytest.mark.parametrize("seed", range(5))
def test_ar3_forecast_matches_statsmodels(seed):
    y = ar_series([0.5, -0.2, 0.1], 400, seed, c=20.0)
    ours = arima_forecast(y, ArimaOrder(3, 0, 0), 24)
    ref = AutoReg(y, lags=3, trend="c").fit().predict(start=len(y), end=len(y) + 23)
    np.testing.assert_array_equal(ours, np.rint(np.maximum(0, ref)).astype(int))


def test_differenced_ar_matches_statsmodels():
    y = np.cumsum(ar_series([0.4, 0.2], 300, 9, c=1.0)) + 500
    ours = arima_forecast(y, ArimaOrder(2, 1, 0), 12)
    dy = np.diff(y)
    ref = y[-1] + np.cumsum(AutoReg(dy, lags=2, trend="c").fit().predict(start=len(dy), end=len(dy) + 11))
    np.testing.assert_array_equal(ours, np.rint(ref).astype(int))


def test_ma2_coefficients_recovered():
    rng = np.random.default_rng(1)
    e = rng.normal(size=5002)
    y = 10 + e[2:] + 0.5 * e[1:-1] + 0.3 * e[:-2]
    coef, _, _ = _fit_cls(y, 0, 2)
    assert coef[1:] == pytest.approx([0.5, 0.3], abs=0.06)


def test_invertible_reflection():
    np.testing.assert_allclose(_invertible(np.array([2.5, 1.0])), [1.0, 0.25])
    np.testing.assert_allclose(_invertible(np.array([0.3, 0.1])), [0.3, 0.1])


def test_ramp_continues_with_differencing():
    y = np.arange(10, 60, 2)
    assert arima_forecast(y, ArimaOrder(3, 1, 2), 5).tolist() == [60, 62, 64, 66, 68]


def test_constant_series():
    y = np.full(50, 7)
    for order in BASELINE_ORDERS.values():
        assert arima_forecast(y, order, 4).tolist() == [7, 7, 7, 7]


def test_white_noise_mean_model():
    y = np.random.default_rng(2).normal(40, 3, size=500)
    out = arima_forecast(y, ArimaOrder(0, 0, 0), 3)
    assert out.tolist() == [round(y.mean())] * 3


def test_singular_design_falls_back_to_persistence():
    y = np.tile([0.0, 5.0], 20)
    with pytest.warns(ArimaFallbackWarning):
        out = arima_forecast(y, ArimaOrder(3, 0, 0), 4)
    assert out.tolist() == persistence_forecast(y, 4).tolist()


def test_forecasts_are_nonnegative_counts():
    y = np.maximum(0, 30 - np.arange(60)).astype(float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ArimaFallbackWarning)
        for order in BASELINE_ORDERS.values():
            out = arima_forecast(y, order, 24)
            assert out.dtype == np.int64 and out.min() >= 0


@pytest.mark.parametrize("seed", range(10))
def test_no_fallback_on_ordinary_counts(seed):
    rng = np.random.default_rng(seed)
    h = np.arange(24 * 30)
    y = rng.poisson(20 * (1 + 0.6 * np.sin(2 * np.pi * h / 24)))
    with warnings.catch_warnings():
        warnings.simplefilter("error", ArimaFallbackWarning)
        for order in BASELINE_ORDERS.values():
            arima_forecast(y, order, 24)


def test_short_history_rejected():
    with pytest.raises(ValueError, match="too short"):
        arima_forecast([1, 2, 3], ArimaOrder(3, 1, 2), 2)
