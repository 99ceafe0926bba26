"""Training and scoring of the pair classifier.

The estimator follows the scikit-learn protocol (fit/predict/get_params)
so it composes with model selection utilities. Hyperparameters are chosen
by stratified cross-validated grid search maximizing AUC; the logistic
model standardizes features first, the forest consumes them raw. An
optional boolean mask restricts which of the 11 feature-vector
components the model sees, keeping input width fixed at 11.
"""
from __future__ import annotations

import pickle
from dataclasses import dataclass
from pathlib import Path
from collections.abc import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.ensemble import RandomForestClassifier
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import GridSearchCV, StratifiedKFold, train_test_split
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import StandardScaler
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import ValidationError
from .pairs import N_FEATURES, DrugEventPair

LOGISTIC = "logistic"
FOREST = "forest"
MODEL_KINDS = (LOGISTIC, FOREST)

LOGISTIC_C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
FOREST_GRID = {"n_estimators": [100, 300], "max_depth": [None, 4, 8]}

MODEL_FORMAT = "adrmine-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class SplitConfig:
    """Train/validation split and cross-validation settings."""

    train_fraction: float = 0.8
    folds: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must be in (0, 1)")
        if self.folds < 2:
            raise ValidationError("folds must be at least 2")


def feature_matrix(pairs: Sequence[DrugEventPair]):
    """(X, y, keys) from labeled, featurized pairs."""
    X, y, keys = [], [], []
    for pair in pairs:
        if pair.features is None:
            raise ValidationError(
                f"pair {pair.drug_name}/{pair.outcome.code} has no feature vector"
            )
        if pair.label not in (0, 1):
            raise ValidationError(
                f"pair {pair.drug_name}/{pair.outcome.code} is unlabeled"
            )
        X.append(pair.features)
        y.append(pair.label)
        keys.append(pair.key)
    return np.asarray(X, dtype=float), np.asarray(y, dtype=int), keys


def split_data(X, y, config: SplitConfig = SplitConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Stratified train/validation indices; deterministic in the seed."""
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2 or counts.min() < 2:
        raise ValidationError("stratified split needs two examples of each class")
    train_idx, val_idx = train_test_split(
        np.arange(len(y)),
        train_size=config.train_fraction,
        stratify=y,
        shuffle=True,
        random_state=config.seed,
    )
    return np.sort(train_idx), np.sort(val_idx)


class AdrClassifier(BaseEstimator, ClassifierMixin):
    """Binary classifier over the 11-component pair feature vectors.

    Parameters
    ----------
    model_kind : "logistic" or "forest"
    feature_mask : optional boolean sequence of length 11 selecting the
        components the model may use; None means all.
    folds : cross-validation folds for the hyperparameter grid search,
        reduced automatically when a class has fewer members.
    seed : controls fold shuffling and forest randomness.
    """

    def __init__(self, model_kind: str = LOGISTIC, feature_mask=None,
                 folds: int = 10, seed: int = 0):
        self.model_kind = model_kind
        self.feature_mask = feature_mask
        self.folds = folds
        self.seed = seed

    def _grid(self):
        if self.model_kind == LOGISTIC:
            estimator = Pipeline(
                [("scale", StandardScaler()),
                 ("clf", LogisticRegression(max_iter=5000))]
            )
            return estimator, {"clf__C": list(LOGISTIC_C_GRID)}
        if self.model_kind == FOREST:
            return RandomForestClassifier(random_state=self.seed), dict(FOREST_GRID)
        raise ValidationError(
            f"unknown model_kind {self.model_kind!r}; expected one of {MODEL_KINDS}"
        )

    def _mask(self, n_features: int) -> np.ndarray:
        if self.feature_mask is None:
            return np.ones(n_features, dtype=bool)
        mask = np.asarray(self.feature_mask, dtype=bool)
        if mask.shape != (n_features,):
            raise ValidationError(
                f"feature_mask must have length {n_features}, got shape {mask.shape}"
            )
        if not mask.any():
            raise ValidationError("feature_mask must select at least one component")
        return mask

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        classes, counts = np.unique(y, return_counts=True)
        if set(classes.tolist()) != {0, 1}:
            raise ValidationError("training labels must contain both classes 0 and 1")
        if counts.min() < 2:
            raise ValidationError("each class needs at least two training examples")
        mask = self._mask(X.shape[1])
        estimator, grid = self._grid()
        folds = min(self.folds, int(counts.min()))
        search = GridSearchCV(
            estimator,
            grid,
            scoring="roc_auc",
            cv=StratifiedKFold(n_splits=folds, shuffle=True, random_state=self.seed),
            refit=True,
        )
        search.fit(X[:, mask], y)
        self.estimator_ = search.best_estimator_
        self.best_params_ = dict(search.best_params_)
        self.cv_auc_ = float(search.best_score_)
        self.cv_folds_ = folds
        self.feature_mask_ = mask
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "estimator_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return self.estimator_.predict_proba(X[:, self.feature_mask_])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


def train(
    X,
    y,
    model_kind: str = LOGISTIC,
    feature_mask=None,
    config: SplitConfig = SplitConfig(),
) -> AdrClassifier:
    """Fit a classifier on the training matrix with grid-searched settings."""
    clf = AdrClassifier(
        model_kind=model_kind, feature_mask=feature_mask, folds=config.folds,
        seed=config.seed,
    )
    return clf.fit(X, y)


def score(model: AdrClassifier, X) -> np.ndarray:
    """Positive-class probabilities for each row of X."""
    return model.predict_proba(X)[:, 1]


def save_model(model: AdrClassifier, path: str | Path) -> None:
    check_is_fitted(model, "estimator_")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "classifier": model}
    with open(path, "wb") as handle:
        pickle.dump(payload, handle)


def load_model(path: str | Path) -> AdrClassifier:
    with open(path, "rb") as handle:
        payload = pickle.load(handle)
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise ValidationError(f"{path} is not a saved model file")
    if payload.get("version") != MODEL_VERSION:
        raise ValidationError(
            f"unsupported model version {payload.get('version')!r} in {path}"
        )
    return payload["classifier"]
