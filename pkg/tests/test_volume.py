import numpy as np
import pytest
from sklearn.base import clone

from hourcast.features import FeatureConfig, log_transform
from hourcast.gbt import GbtParams, fit_ensemble
from hourcast.volume import ParamGrid, VolumeForecaster, _search_cell, cell_seed

S = 3


def make_data(n, seed, width=8):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 10, size=(n, width))
    base = 5 + 3 * np.sin(X[:, 0]) + X[:, 1]
    Y = np.concatenate([rng.poisson(base[:, None] * k, size=(n, S)) for k in (3, 1, 2)], axis=1)
    return X, Y


SMALL = ParamGrid(colsample=(1.0,), n_trees=(5, 10), learning_rate=(0.3,), l2_lambda=(1.0,), max_depth=(2, 3))


def test_default_grid_has_48_points_in_field_order():
    pts = ParamGrid().points()
    assert len(pts) == 48
    assert pts[0] == GbtParams(n_trees=100, learning_rate=0.1, max_depth=5, colsample=0.6, l2_lambda=0.2)
    assert pts[1].max_depth == 7 and pts[-1].colsample == 1.0


def test_cell_seeds_distinct():
    seeds = {cell_seed(0, o, h) for o in range(3) for h in range(1, 25)}
    assert len(seeds) == 72
    assert cell_seed(0, 1, 2) == cell_seed(0, 1, 2) != cell_seed(1, 1, 2)


def test_shared_fit_equals_individual_fits():
    X, Y = make_data(80, 0)
    Xv, Yv = make_data(30, 1)
    y, yv = log_transform(Y[:, 0]), log_transform(Yv[:, 0])
    pts = SMALL.points()
    mse, best = _search_cell(X, y, Xv, yv, pts, seed=4)
    oracle = [np.mean((fit_ensemble(X, y, p, 4).predict(Xv) - yv) ** 2) for p in pts]
    np.testing.assert_allclose(mse, oracle, rtol=0, atol=1e-12)
    w = int(np.argmin(oracle))
    assert best.params == pts[w]
    np.testing.assert_array_equal(best.predict(Xv), fit_ensemble(X, y, pts[w], 4).predict(Xv))


@pytest.fixture(scope="module")
def fitted():
    X, Y = make_data(90, 0)
    Xv, Yv = make_data(30, 1)
    fc = FeatureConfig(("T",), 1, S, ("a", "b"))
    m = VolumeForecaster(horizon=S, param_grid=SMALL, feature_config=None, random_state=3)
    m.fit(X, Y, eval_set=(Xv, Yv))
    return m, X, Y, Xv, Yv, fc


def test_per_cell_winner_is_validation_argmin(fitted):
    m, *_ = fitted
    pts = SMALL.points()
    for c, cell in enumerate(m.cells):
        assert m.chosen_params_[cell] == pts[int(np.argmin(m.val_mse_[c]))]


def test_predict_shape_and_counts(fitted):
    m, X, *_ = fitted
    P = m.predict(X[:4])
    assert P.shape == (4, 3, S) and P.dtype == np.int64
    assert P.min() >= 0
    assert np.array_equal(m.predict_volume(X[0]), P[0])
    with pytest.raises(ValueError, match="expected 8 features"):
        m.predict(X[:, :5])


def test_beats_mean_predictor(fitted):
    m, X, Y, Xv, Yv, _ = fitted
    P = m.predict(Xv).reshape(len(Xv), -1)
    assert np.mean((P - Yv) ** 2) < np.mean((Y.mean(axis=0) - Yv) ** 2)


def test_save_load_roundtrip(tmp_path, fitted):
    m, X, *_ = fitted
    m.save(tmp_path / "bundle")
    back = VolumeForecaster.load(tmp_path / "bundle")
    assert np.array_equal(back.predict(X), m.predict(X))
    assert back.chosen_params_ == m.chosen_params_


def test_fit_is_deterministic(fitted):
    m, X, Y, Xv, Yv, _ = fitted
    twin = clone(m).fit(X, Y, eval_set=(Xv, Yv))
    assert np.array_equal(twin.predict(Xv), m.predict(Xv))


def test_global_search_uses_one_point():
    X, Y = make_data(60, 0)
    Xv, Yv = make_data(20, 1)
    m = VolumeForecaster(horizon=S, param_grid=SMALL, search="global").fit(X, Y, eval_set=(Xv, Yv))
    assert len(set(m.chosen_params_.values())) == 1
    w = int(np.argmin(m.val_mse_.sum(axis=0)))
    assert next(iter(m.chosen_params_.values())) == SMALL.points()[w]


def test_importance_report_groups():
    fc = FeatureConfig(("T",), 2, S, ("a", "b"))
    X, Y = make_data(60, 2, width=fc.width)
    Xv, Yv = make_data(20, 3, width=fc.width)
    m = VolumeForecaster(horizon=S, param_grid=SMALL, feature_config=fc).fit(X, Y, eval_set=(Xv, Yv))
    rep = m.importance_report("activities")
    assert max(rep.values()) == 1.0
    # columns 0 and 1 drive the target: both belong to series 1 (new users, topic)
    assert rep["twitter new_users (topic)"] == 1.0


@pytest.mark.parametrize("kwargs,msg", [
    (dict(eval_set=None), "eval_set"),
    (dict(eval_set=(np.ones((3, 5)), np.ones((3, 9)))), "widths differ"),
])
def test_fit_validation(kwargs, msg):
    X, Y = make_data(20, 0)
    with pytest.raises(ValueError, match=msg):
        VolumeForecaster(horizon=S, param_grid=SMALL).fit(X, Y, **kwargs)


def test_target_width_checked():
    X, Y = make_data(20, 0)
    with pytest.raises(ValueError, match="expected 9 target columns"):
        VolumeForecaster(horizon=S).fit(X, Y[:, :5], eval_set=(X, Y[:, :5]))
