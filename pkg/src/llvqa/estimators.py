"""scikit-learn compatible wrappers around feature extraction and the head.

Typical use::

    extractor = VideoFeatureExtractor(k=8).fit(videos)
    X = extractor.transform(videos)                  # (n_videos, k, d)
    X = FeatureSubset(ablate="no-cf").fit_transform(X)
    model = QualityRegressor(epochs=200).fit(X, mos)
    scores = model.predict(X)
"""

import os

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_feature_tensor
from .backbones import make_provider
from .exceptions import ShapeError
from .features import ABLATIONS, SPATIAL_BLOCKS, FeatureLayout, extract_video_features, stack_features
from .media_io import SamplingPlan, Video, load_video
from .model import FUSION_WIDTH, HIDDEN_WIDTH, QualityHead
from .training import LossConfig, fit_head, fit_mlr_baseline


class VideoFeatureExtractor(TransformerMixin, BaseEstimator):
    """Turns videos (``Video`` objects or file paths) into ``(n, k, d)`` clip features.

    ``semantic`` / ``motion`` are ``"builtin"`` or ``"file:<dir-or-file>"``;
    file providers need ``semantic_dim`` / ``motion_dim``.
    """

    def __init__(
        self,
        k=8,
        clip_edge=64,
        semantic="builtin",
        motion="builtin",
        semantic_seed=0,
        motion_seed=1,
        semantic_dim=None,
        motion_dim=None,
    ):
        self.k = k
        self.clip_edge = clip_edge
        self.semantic = semantic
        self.motion = motion
        self.semantic_seed = semantic_seed
        self.motion_seed = motion_seed
        self.semantic_dim = semantic_dim
        self.motion_dim = motion_dim

    def fit(self, X=None, y=None):
        self.plan_ = SamplingPlan(self.k, self.clip_edge)
        self.semantic_ = make_provider(self.semantic, "semantic", self.semantic_seed, self.semantic_dim)
        self.motion_ = make_provider(self.motion, "motion", self.motion_seed, self.motion_dim)
        self.layout_ = FeatureLayout(self.semantic_.dim, self.motion_.dim)
        return self

    def extract_one(self, video):
        check_is_fitted(self, "layout_")
        key = None
        if not isinstance(video, Video):
            key = os.path.splitext(os.path.basename(os.fspath(video)))[0]
            video = load_video(video)
        return extract_video_features(video, self.plan_, self.semantic_, self.motion_, key=key)

    def transform(self, X):
        return stack_features([self.extract_one(v) for v in X], self.layout_)


class FeatureSubset(TransformerMixin, BaseEstimator):
    """Keeps only the feature blocks of an ablation (see ``features.ABLATIONS``)."""

    def __init__(self, ablate="none", d_s=48, d_m=16):
        self.ablate = ablate
        self.d_s = d_s
        self.d_m = d_m

    def fit(self, X=None, y=None):
        if self.ablate not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablate!r}; choose from {sorted(ABLATIONS)}")
        layout = FeatureLayout(self.d_s, self.d_m)
        self.blocks_ = ABLATIONS[self.ablate]
        self.columns_ = layout.columns(self.blocks_)
        self.spatial_dim_ = int(sum(layout.sizes[b] for b in self.blocks_ if b in SPATIAL_BLOCKS))
        return self

    def transform(self, X):
        check_is_fitted(self, "columns_")
        X = check_feature_tensor(X)
        full = self.d_s + self.d_m + 29
        if X.shape[2] != full:
            raise ShapeError(f"expected full feature dimension {full}, got {X.shape[2]}")
        return X[:, :, self.columns_]


class QualityRegressor(RegressorMixin, BaseEstimator):
    """Fusion layer + two-layer regressor trained with MAE + beta * rank loss.

    ``fit`` accepts an optional validation set; the checkpoint with the best
    validation SRCC is kept.
    """

    def __init__(
        self,
        fusion_width=FUSION_WIDTH,
        hidden_width=HIDDEN_WIDTH,
        beta=0.5,
        batch_size=8,
        epochs=200,
        learning_rate=1e-3,
        random_state=0,
        rank_sign="pred",
    ):
        self.fusion_width = fusion_width
        self.hidden_width = hidden_width
        self.beta = beta
        self.batch_size = batch_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.random_state = random_state
        self.rank_sign = rank_sign

    def loss_config(self):
        return LossConfig(
            beta=self.beta,
            batch_size=self.batch_size,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            seed=self.random_state,
            rank_sign=self.rank_sign,
        )

    def fit(self, X, y, X_val=None, y_val=None, log=None):
        X = check_feature_tensor(X)
        self.params_, self.training_log_ = fit_head(
            X,
            y,
            self.loss_config(),
            X_val,
            y_val,
            fusion_width=self.fusion_width,
            hidden_width=self.hidden_width,
            log=log,
        )
        self.n_features_in_ = X.shape[2]
        return self

    @classmethod
    def from_params(cls, params, **kwargs):
        est = cls(fusion_width=params.fusion_width, hidden_width=params.hidden_width, **kwargs)
        est.params_ = params
        est.training_log_ = []
        est.n_features_in_ = params.d_in
        return est

    def predict_clips(self, X):
        check_is_fitted(self, "params_")
        X = check_feature_tensor(X, n_features=self.n_features_in_)
        return QualityHead(self.params_).clip_scores(X)

    def predict(self, X):
        return self.predict_clips(X).mean(axis=1)


class MLRFusionRegressor(RegressorMixin, BaseEstimator):
    """Separate spatial-only and temporal-only heads combined by linear regression.

    The first ``spatial_dim`` columns feed the spatial head, the rest the
    temporal head; ``a * Q_s + b * Q_t + c`` is fitted on training predictions.
    """

    def __init__(
        self,
        spatial_dim=72,
        fusion_width=FUSION_WIDTH,
        hidden_width=HIDDEN_WIDTH,
        beta=0.5,
        batch_size=8,
        epochs=200,
        learning_rate=1e-3,
        random_state=0,
        rank_sign="pred",
    ):
        self.spatial_dim = spatial_dim
        self.fusion_width = fusion_width
        self.hidden_width = hidden_width
        self.beta = beta
        self.batch_size = batch_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.random_state = random_state
        self.rank_sign = rank_sign

    def _head(self):
        params = self.get_params()
        params.pop("spatial_dim")
        return QualityRegressor(**params)

    def _split(self, X):
        if not 0 < self.spatial_dim < X.shape[2]:
            raise ShapeError(f"spatial_dim {self.spatial_dim} must split {X.shape[2]} columns")
        return X[:, :, : self.spatial_dim], X[:, :, self.spatial_dim :]

    def fit(self, X, y, X_val=None, y_val=None, log=None):
        X = check_feature_tensor(X)
        xs, xt = self._split(X)
        vs = vt = None
        if X_val is not None and len(X_val):
            vs, vt = self._split(check_feature_tensor(X_val, n_features=X.shape[2]))

        def tagged(name):
            return None if log is None else (lambda rec: log({"head": name, **rec}))

        self.spatial_ = self._head().fit(xs, y, vs, y_val, log=tagged("spatial"))
        self.temporal_ = self._head().fit(xt, y, vt, y_val, log=tagged("temporal"))
        self.mlr_ = fit_mlr_baseline(self.spatial_.predict(xs), self.temporal_.predict(xt), y)
        self.n_features_in_ = X.shape[2]
        return self

    def predict(self, X):
        check_is_fitted(self, "mlr_")
        xs, xt = self._split(check_feature_tensor(X, n_features=self.n_features_in_))
        return self.mlr_.predict(self.spatial_.predict(xs), self.temporal_.predict(xt))

    def predict_clips(self, X):
        check_is_fitted(self, "mlr_")
        xs, xt = self._split(check_feature_tensor(X, n_features=self.n_features_in_))
        return self.mlr_.predict(self.spatial_.predict_clips(xs), self.temporal_.predict_clips(xt))
