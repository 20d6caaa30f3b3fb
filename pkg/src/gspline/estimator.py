"""Scikit-learn style wrappers around the config-driven networks.

These are convenience adapters: the substance lives in
:mod:`gspline.network` and :mod:`gspline.learning`. ``fit``/``predict``
operate on channel-first image batches [N, C, H, W] (a missing channel
axis is added for [N, H, W] input).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin

from .learning import SyntheticDataset, predict_classes, predict_maps, sgd_train
from .network import Network


def _as_batch(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 3:
        X = X[:, None]
    if X.ndim != 4:
        raise ValueError("expected [N, C, H, W] or [N, H, W] input")
    return X


class GSplineClassifier(BaseEstimator, ClassifierMixin):
    """Image classifier driven by a network config dict (or JSON path)."""

    def __init__(self, config=None, lr=0.05, epochs=10, batch=32, seed=0):
        self.config = config
        self.lr = lr
        self.epochs = epochs
        self.batch = batch
        self.seed = seed

    def fit(self, X, y):
        if self.config is None:
            raise ValueError("a network config is required")
        X = _as_batch(X)
        y = np.asarray(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        data = SyntheticDataset(X, encoded.astype(int), self.seed, "fit")
        self.network_, self.loss_curve_ = sgd_train(
            self.config, data, self.lr, self.epochs, self.batch, self.seed
        )
        return self

    def predict(self, X):
        idx = predict_classes(self.network_, _as_batch(X))
        return self.classes_[idx]

    def predict_proba(self, X):
        out, _ = self.network_.forward(_as_batch(X))
        return out.reshape(out.shape[0], out.shape[1])


class GSplineRegressor(BaseEstimator, RegressorMixin):
    """Dense map regressor (e.g. heatmaps) driven by a network config."""

    def __init__(self, config=None, lr=0.05, epochs=10, batch=32, seed=0):
        self.config = config
        self.lr = lr
        self.epochs = epochs
        self.batch = batch
        self.seed = seed

    def fit(self, X, y):
        if self.config is None:
            raise ValueError("a network config is required")
        X = _as_batch(X)
        y = np.asarray(y, dtype=float)
        data = SyntheticDataset(X, y, self.seed, "fit")
        self.network_, self.loss_curve_ = sgd_train(
            self.config, data, self.lr, self.epochs, self.batch, self.seed
        )
        return self

    def predict(self, X):
        return predict_maps(self.network_, _as_batch(X))

    def score(self, X, y):
        pred = self.predict(X)
        y = np.asarray(y, dtype=float)
        ss_res = float(np.sum((pred - y) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        return 1.0 - ss_res / max(ss_tot, 1e-300)
