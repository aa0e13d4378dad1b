"""Scikit-learn style classifiers wrapping the functional pipeline.

The estimators follow the usual conventions (constructor stores
hyperparameters verbatim, fitted state lives in trailing-underscore
attributes, get_params/set_params support cloning) so they drop into
sklearn pipelines and model-selection utilities without importing
sklearn here.
"""

from __future__ import annotations

import inspect

import numpy as np

from .models import (assemble_drkn, assemble_rbf_baseline, drkn_outputs_batch,
                     rbf_outputs_batch)
from .svm import Dataset, smo_train, svm_scores_batch
from .training import TrainConfig, train
from .validation import check_array, check_is_fitted, check_X_y


class BaseEstimator:
    """get_params/set_params over the constructor signature, sklearn-style."""

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [name for name in sig.parameters if name != "self"]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(f"invalid parameter {name!r} for {type(self).__name__}")
            setattr(self, name, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


class _ClassifierMixin:
    def score(self, X, y):
        X, y = check_X_y(X, y)
        return float(np.mean(self.predict(X) == y))

    def _encode_labels(self, y):
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes to fit a classifier")
        return np.searchsorted(self.classes_, y)


def _as_train_dataset(X, y_ids, class_labels):
    return Dataset(X, y_ids, np.full(X.shape[0], "train"), class_labels)


class SmoSvmClassifier(BaseEstimator, _ClassifierMixin):
    """One-vs-rest RBF SVM trained with the built-in SMO solver."""

    def __init__(self, C=1.0, gamma=1.0, tol=1e-3):
        self.C = C
        self.gamma = gamma
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        ids = self._encode_labels(y)
        data = _as_train_dataset(X, ids, self.classes_)
        self.model_ = smo_train(data, self.C, self.gamma, self.tol)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return svm_scores_batch(self.model_, check_array(X))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


class DrknClassifier(BaseEstimator, _ClassifierMixin):
    """SVM-initialized deep radial kernel network with SGD fine-tuning.

    fit() trains the SVM, converts it into the fold-network model, then
    fine-tunes every weight (shared fold network, support vectors,
    coefficients, biases) with mini-batch SGD.  Set epochs=0 to keep the
    pure distillation.
    """

    def __init__(self, C=1.0, gamma=1.0, delta=None, learning_rate=0.01,
                 batch_size=32, epochs=100, seed=0, shuffle=True,
                 loss_on="squashed", tol=1e-3):
        self.C = C
        self.gamma = gamma
        self.delta = delta
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.shuffle = shuffle
        self.loss_on = loss_on
        self.tol = tol

    def _train_config(self):
        return TrainConfig(learning_rate=self.learning_rate,
                           batch_size=self.batch_size, epochs=self.epochs,
                           seed=self.seed, shuffle=self.shuffle,
                           loss_on=self.loss_on, allow_any_batch_size=True)

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        ids = self._encode_labels(y)
        data = _as_train_dataset(X, ids, self.classes_)
        self.svm_ = smo_train(data, self.C, self.gamma, self.tol)
        self.model_ = assemble_drkn(self.svm_, self.delta)
        self.history_ = train(self.model_, data, self._train_config())
        return self

    def fit_from_svm(self, svm, X, y):
        """Skip SVM training: distill an existing model, then fine-tune."""
        X, y = check_X_y(X, y)
        ids = self._encode_labels(y)
        data = _as_train_dataset(X, ids, self.classes_)
        self.svm_ = svm
        self.model_ = assemble_drkn(svm, self.delta)
        self.history_ = train(self.model_, data, self._train_config())
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return drkn_outputs_batch(self.model_, check_array(X))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


class RbfNetClassifier(BaseEstimator, _ClassifierMixin):
    """SVM-initialized Gaussian RBF network baseline, SGD fine-tuned."""

    def __init__(self, C=1.0, gamma=1.0, learning_rate=0.01, batch_size=32,
                 epochs=100, seed=0, shuffle=True, loss_on="squashed", tol=1e-3):
        self.C = C
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.shuffle = shuffle
        self.loss_on = loss_on
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        ids = self._encode_labels(y)
        data = _as_train_dataset(X, ids, self.classes_)
        self.svm_ = smo_train(data, self.C, self.gamma, self.tol)
        self.model_ = assemble_rbf_baseline(self.svm_)
        cfg = TrainConfig(learning_rate=self.learning_rate,
                          batch_size=self.batch_size, epochs=self.epochs,
                          seed=self.seed, shuffle=self.shuffle,
                          loss_on=self.loss_on, allow_any_batch_size=True)
        self.history_ = train(self.model_, data, cfg)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return rbf_outputs_batch(self.model_, check_array(X))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
