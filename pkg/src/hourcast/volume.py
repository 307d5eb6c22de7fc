"""Bank of per-(output type, hour) boosted-tree regressors."""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .features import OUTPUT_TYPES, TOPIC_INDICATOR, FeatureConfig, feature_groups, inverse_log_transform, log_transform
from .gbt import GbtParams, TreeEnsemble, fit_ensemble

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParamGrid:
    """Candidate values; points are enumerated in field order (first field slowest)."""

    colsample: tuple = (0.6, 0.8, 1.0)
    n_trees: tuple = (100, 200)
    learning_rate: tuple = (0.1, 0.2)
    l2_lambda: tuple = (0.2, 1.0)
    max_depth: tuple = (5, 7)

    def points(self) -> list[GbtParams]:
        names = [f.name for f in fields(self)]
        return [GbtParams(**dict(zip(names, combo)))
                for combo in itertools.product(*(getattr(self, n) for n in names))]

    def __len__(self) -> int:
        return len(self.points())

    @classmethod
    def single(cls, params: GbtParams) -> "ParamGrid":
        return cls((params.colsample,), (params.n_trees,), (params.learning_rate,),
                   (params.l2_lambda,), (params.max_depth,))

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in asdict(self).items()}


def cell_seed(seed: int, output_type: int, hour: int) -> int:
    return int(np.random.SeedSequence([seed, output_type, hour]).generate_state(1)[0])


def _search_cell(X, y, Xv, yv, points: list[GbtParams], seed: int, keep_best: bool = True):
    """Validation MSE of every grid point and, optionally, the winning ensemble.

    Points differing only in ``n_trees`` share one fit: with a fixed seed the
    shorter ensemble is exactly a prefix of the longer one.
    """
    mse = np.empty(len(points))
    best: TreeEnsemble | None = None
    best_key = (np.inf, len(points))
    groups: dict[tuple, list[int]] = {}
    for i, p in enumerate(points):
        key = (p.colsample, p.learning_rate, p.l2_lambda, p.max_depth, p.min_samples_leaf)
        groups.setdefault(key, []).append(i)
    for idx in groups.values():
        longest = max(idx, key=lambda i: points[i].n_trees)
        full = fit_ensemble(X, y, points[longest], seed)
        for i in idx:
            trunc = _truncate(full, points[i])
            mse[i] = float(np.mean((trunc.predict(Xv) - yv) ** 2))
            # ties resolve to the earliest grid point
            if keep_best and (mse[i], i) < best_key:
                best, best_key = trunc, (mse[i], i)
    if keep_best:
        assert best_key[1] == int(np.argmin(mse)) and np.all(best_key[0] <= mse)
    return mse, best


def _truncate(full: TreeEnsemble, params: GbtParams) -> TreeEnsemble:
    k = params.n_trees
    return TreeEnsemble(full.base_score, full.trees[:k], params, full.n_features, full.train_loss[:k + 1])


class VolumeForecaster(BaseEstimator, RegressorMixin):
    """Maps a feature vector to a 3 x horizon matrix of hourly counts.

    Targets are laid out as ``[activities, new_users, old_users]`` blocks of
    ``horizon`` hours each. Each (output type, hour) cell owns one
    :class:`TreeEnsemble`, selected by grid search on the validation set in
    log space.

    Parameters
    ----------
    horizon : int, default=24
    param_grid : ParamGrid, optional
        Defaults to the full 48-point grid.
    feature_config : FeatureConfig, optional
        Needed for :meth:`importance_report` and persisted with the bundle.
    search : {"per_cell", "global"}, default="per_cell"
        Select a winner per cell, or one grid point for all cells (lowest
        summed validation MSE).
    random_state : int, default=0
    n_jobs : int, optional
        Cells are fitted in parallel through joblib when > 1.
    """

    def __init__(self, horizon=24, param_grid=None, feature_config=None, search="per_cell",
                 random_state=0, n_jobs=None):
        self.horizon = horizon
        self.param_grid = param_grid
        self.feature_config = feature_config
        self.search = search
        self.random_state = random_state
        self.n_jobs = n_jobs

    @property
    def cells(self) -> list[tuple[str, int]]:
        return [(o, h) for o in OUTPUT_TYPES for h in range(1, self.horizon + 1)]

    def fit(self, X, Y, eval_set=None):
        X = check_array(X, dtype=float)
        Y = check_array(Y, dtype=float)
        if len(X) == 0 or len(X) != len(Y):
            raise ValueError("training set is empty or misaligned")
        if Y.shape[1] != 3 * self.horizon:
            raise ValueError(f"expected {3 * self.horizon} target columns, got {Y.shape[1]}")
        if eval_set is None:
            raise ValueError("eval_set=(X_val, Y_val) is required for model selection")
        Xv = check_array(eval_set[0], dtype=float)
        Yv = check_array(eval_set[1], dtype=float)
        if len(Xv) == 0:
            raise ValueError("validation set is empty")
        if Xv.shape[1] != X.shape[1]:
            raise ValueError("train and validation feature widths differ")
        if self.search not in ("per_cell", "global"):
            raise ValueError(f"unknown search mode {self.search!r}")

        ly, lyv = log_transform(Y), log_transform(Yv)
        points = (self.param_grid or ParamGrid()).points()
        jobs = []
        for c, (o, h) in enumerate(self.cells):
            seed = cell_seed(self.random_state, OUTPUT_TYPES.index(o), h)
            jobs.append(delayed(_search_cell)(X, ly[:, c], Xv, lyv[:, c], points, seed,
                                              self.search == "per_cell"))
        if self.n_jobs in (None, 1):
            results = [fn(*a, **kw) for fn, a, kw in jobs]
        else:
            results = Parallel(n_jobs=self.n_jobs)(jobs)

        self.val_mse_ = np.stack([mse for mse, _ in results])
        models = [m for _, m in results]
        if self.search == "global":
            w = int(np.argmin(self.val_mse_.sum(axis=0)))
            winners = [w] * len(self.cells)
            models = [fit_ensemble(X, ly[:, c], points[w], cell_seed(self.random_state, OUTPUT_TYPES.index(o), h))
                      for c, (o, h) in enumerate(self.cells)]
        else:
            winners = [int(np.argmin(row)) for row in self.val_mse_]
        self.models_ = {}
        self.chosen_params_ = {}
        self.cell_seeds_ = {}
        for c, cell in enumerate(self.cells):
            self.models_[cell] = models[c]
            self.chosen_params_[cell] = points[winners[c]]
            self.cell_seeds_[cell] = cell_seed(self.random_state, OUTPUT_TYPES.index(cell[0]), cell[1])
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        """Non-negative integer forecasts of shape (n_samples, 3, horizon)."""
        check_is_fitted(self, "models_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        out = np.zeros((len(X), 3, self.horizon), dtype=np.int64)
        for (o, h), model in self.models_.items():
            out[:, OUTPUT_TYPES.index(o), h - 1] = inverse_log_transform(model.predict(X))
        return out

    def predict_volume(self, x) -> np.ndarray:
        return self.predict(np.asarray(x, dtype=float).reshape(1, -1))[0]

    def importance_report(self, output_type: str = "activities") -> dict[str, float]:
        """Split counts over the horizon's models, grouped by series category
        and scaled so the largest category is 1."""
        check_is_fitted(self, "models_")
        if self.feature_config is None:
            raise ValueError("feature_config is required to group features")
        groups = feature_groups(self.feature_config)
        totals = {g: 0 for g in dict.fromkeys(groups)}
        for h in range(1, self.horizon + 1):
            for f, c in self.models_[(output_type, h)].split_counts.items():
                totals[groups[f]] += c
        top = max(totals.values())
        if top == 0:
            return {g: 0.0 for g in totals}
        return {g: v / top for g, v in totals.items()}

    def save(self, directory) -> None:
        check_is_fitted(self, "models_")
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        cells = []
        for (o, h), model in self.models_.items():
            name = f"{o}_h{h:02d}.json"
            (directory / name).write_text(model.to_json())
            cells.append({"output_type": o, "hour": h, "file": name,
                          "params": asdict(self.chosen_params_[(o, h)]),
                          "seed": self.cell_seeds_[(o, h)]})
        manifest = {
            "horizon": self.horizon,
            "n_features": self.n_features_in_,
            "search": self.search,
            "random_state": self.random_state,
            "param_grid": (self.param_grid or ParamGrid()).to_dict(),
            "feature_config": self.feature_config.to_dict() if self.feature_config else None,
            "cells": cells,
        }
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))

    @classmethod
    def load(cls, directory) -> "VolumeForecaster":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        fc = manifest["feature_config"]
        est = cls(
            horizon=manifest["horizon"],
            param_grid=ParamGrid(**{k: tuple(v) for k, v in manifest["param_grid"].items()}),
            feature_config=FeatureConfig.from_dict(fc) if fc else None,
            search=manifest["search"],
            random_state=manifest["random_state"],
        )
        est.models_, est.chosen_params_, est.cell_seeds_ = {}, {}, {}
        for cell in manifest["cells"]:
            key = (cell["output_type"], cell["hour"])
            est.models_[key] = TreeEnsemble.from_json((directory / cell["file"]).read_text())
            est.chosen_params_[key] = GbtParams(**cell["params"])
            est.cell_seeds_[key] = cell["seed"]
        est.n_features_in_ = manifest["n_features"]
        return est


__all__ = ["ParamGrid", "VolumeForecaster", "TOPIC_INDICATOR", "cell_seed"]
