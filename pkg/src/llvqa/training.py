"""Losses, optimizer, source-grouped splitting and the head training loop."""

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_feature_tensor, check_scores
from .exceptions import FitError, UndefinedCorrelationError
from .metrics import plcc, rmse, srcc
from .model import FUSION_WIDTH, HIDDEN_WIDTH, TRAINABLE, QualityHead, init_params

DEFAULT_SPLIT = (1260 / 2060, 400 / 2060, 400 / 2060)
MLR_RIDGE = 1e-9


# -------------------------------------------------------------------- losses


def mae_loss(pred, gt):
    pred, gt = check_scores(pred, gt, name="mae_loss")
    return float(np.mean(np.abs(pred - gt)))


def _rank_terms(pred, gt, sign_source):
    dp = pred[:, None] - pred[None, :]
    dg = gt[:, None] - gt[None, :]
    ref = dp if sign_source == "pred" else dg
    e = np.where(ref >= 0, 1.0, -1.0)
    return dp, np.abs(dp) - e * dg


def rank_loss(pred, gt, sign_source="pred"):
    """Pairwise hinge over all N^2 ordered pairs of the batch (diagonal included).

    ``sign_source="pred"`` takes the pair sign from the predictions, as in the
    printed formula; ``"gt"`` takes it from the ground truth.
    """
    pred, gt = check_scores(pred, gt, name="rank_loss")
    if pred.size < 2:
        raise ValueError("rank_loss needs at least two samples")
    if sign_source not in ("pred", "gt"):
        raise ValueError(f"sign_source must be 'pred' or 'gt', got {sign_source!r}")
    _, terms = _rank_terms(pred, gt, sign_source)
    return float(np.maximum(terms, 0.0).sum() / pred.size**2)


@dataclass
class LossConfig:
    beta: float = 0.5
    batch_size: int = 8
    epochs: int = 200
    learning_rate: float = 1e-3
    seed: int = 0
    rank_sign: str = "pred"

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.beta > 0 and self.batch_size < 2:
            raise ValueError("rank loss needs batch_size >= 2")
        if self.batch_size < 1 or self.epochs < 0 or self.learning_rate < 0:
            raise ValueError("batch_size >= 1, epochs >= 0 and learning_rate >= 0 required")
        if self.rank_sign not in ("pred", "gt"):
            raise ValueError(f"rank_sign must be 'pred' or 'gt', got {self.rank_sign!r}")


def total_loss(pred, gt, config=None):
    config = config or LossConfig()
    loss = mae_loss(pred, gt)
    if config.beta:
        loss += config.beta * rank_loss(pred, gt, config.rank_sign)
    return loss


def loss_and_grad(pred, gt, beta=0.5, sign_source="pred"):
    """Total loss, its two parts, and dL/dpred.

    Subgradients: sign(0) = 0 for the absolute values, inactive hinge = 0, and
    the pair sign e is held constant.
    """
    pred, gt = check_scores(pred, gt, name="loss")
    n = pred.size
    mae = float(np.mean(np.abs(pred - gt)))
    grad = np.sign(pred - gt) / n
    rank = 0.0
    if beta:
        if n < 2:
            raise ValueError("rank loss needs at least two samples")
        dp, terms = _rank_terms(pred, gt, sign_source)
        rank = float(np.maximum(terms, 0.0).sum() / n**2)
        g = np.where(terms > 0, np.sign(dp), 0.0)
        grad = grad + beta * (g.sum(axis=1) - g.sum(axis=0)) / n**2
    return mae + beta * rank, mae, rank, grad


# ------------------------------------------------------------------ optimizer


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.trainable().items()}
        self.v = {k: np.zeros_like(v) for k, v in params.trainable().items()}

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name in TRAINABLE:
            g = grads[name]
            m = self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            setattr(params, name, getattr(params, name) - update)


# ------------------------------------------------------------------ splitting


@dataclass
class Split:
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)
    test: list = field(default_factory=list)


def make_split(groups, ratios=DEFAULT_SPLIT, seed=0):
    """Shuffle distinct source ids and cut them into train / val / test.

    Val and test get ``floor(ratio * n_groups)`` sources each; train keeps the
    remainder. Returned lists hold sorted positions into ``groups``.
    """
    groups = list(groups)
    if not groups:
        raise ValueError("cannot split an empty manifest")
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    uniq = sorted(set(groups))
    order = np.random.default_rng(seed).permutation(len(uniq))
    n_val = math.floor(ratios[1] * len(uniq) + 1e-9)
    n_test = math.floor(ratios[2] * len(uniq) + 1e-9)
    val_ids = {uniq[i] for i in order[:n_val]}
    test_ids = {uniq[i] for i in order[n_val : n_val + n_test]}
    split = Split()
    for pos, g in enumerate(groups):
        part = split.val if g in val_ids else split.test if g in test_ids else split.train
        part.append(pos)
    return split


# ------------------------------------------------------------------- training


def _safe(metric, pred, gt):
    try:
        return metric(pred, gt)
    except (UndefinedCorrelationError, ValueError):
        return None


def standardize_params(params, X, y):
    rows = X.reshape(-1, X.shape[-1])
    params.x_mean = rows.mean(axis=0)
    scale = rows.std(axis=0)
    params.x_scale = np.where(scale > 1e-12, scale, 1.0)
    params.y_mean = np.asarray(float(np.mean(y)))
    sd = float(np.std(y))
    params.y_scale = np.asarray(sd if sd > 1e-12 else 1.0)


def fit_head(
    X,
    y,
    config=None,
    X_val=None,
    y_val=None,
    fusion_width=FUSION_WIDTH,
    hidden_width=HIDDEN_WIDTH,
    log=None,
):
    """Train a :class:`QualityHead` on clip features ``X`` (n, k, d) and scores ``y``.

    Returns ``(best_params, records)``. With a validation set, the epoch with
    the highest validation SRCC wins (earliest on ties); otherwise the last
    epoch. ``log`` is called with each epoch record.
    """
    config = config or LossConfig()
    X = check_feature_tensor(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} feature rows but {y.size} targets")
    if config.beta and y.size < 2:
        raise ValueError("rank loss needs at least two training videos")
    has_val = X_val is not None and len(X_val) > 0
    if has_val:
        X_val = check_feature_tensor(X_val, n_features=X.shape[2])
        y_val = np.asarray(y_val, dtype=np.float64).ravel()

    params = init_params(X.shape[2], fusion_width, hidden_width, seed=config.seed)
    standardize_params(params, X, y)
    head = QualityHead(params)
    opt = Adam(params, lr=config.learning_rate)
    rng = np.random.default_rng([config.seed, 1])
    n = y.size
    n_batches = max(1, n // config.batch_size)

    records = []
    best, best_srcc = params.copy(), -np.inf
    for epoch in range(1, config.epochs + 1):
        for batch in np.array_split(rng.permutation(n), n_batches):
            pred = head.forward(X[batch])
            _, _, _, g = loss_and_grad(pred, y[batch], config.beta, config.rank_sign)
            opt.step(params, head.backward(g))

        pred = head.clip_scores(X).mean(axis=1)
        loss, mae, rank, _ = loss_and_grad(pred, y, config.beta, config.rank_sign)
        rec = {
            "epoch": epoch,
            "train_loss": loss,
            "train_mae": mae,
            "train_rank": rank,
            "train_srcc": _safe(srcc, pred, y),
            "val_srcc": None,
            "val_plcc": None,
            "val_rmse": None,
        }
        if has_val:
            vp = head.clip_scores(X_val).mean(axis=1)
            rec.update(val_srcc=_safe(srcc, vp, y_val), val_plcc=_safe(plcc, vp, y_val), val_rmse=_safe(rmse, vp, y_val))
        records.append(rec)
        if log is not None:
            log(rec)
        if has_val:
            if rec["val_srcc"] is not None and rec["val_srcc"] > best_srcc:
                best, best_srcc = params.copy(), rec["val_srcc"]
        else:
            best = params
    if has_val and best_srcc == -np.inf:
        best = params
    return best.copy(), records


# ------------------------------------------------------------------ MLR fusion


@dataclass(frozen=True)
class MLRBaseline:
    """``q = a * spatial + b * temporal + c``."""

    a: float
    b: float
    c: float

    def predict(self, spatial, temporal):
        return self.a * np.asarray(spatial, dtype=np.float64) + self.b * np.asarray(temporal, dtype=np.float64) + self.c


def fit_mlr_baseline(spatial_scores, temporal_scores, gt):
    """Ordinary least squares for (a, b, c) via ridge-stabilized normal equations."""
    qs, gt = check_scores(spatial_scores, gt, name="mlr")
    qt, _ = check_scores(temporal_scores, gt, name="mlr")
    if qs.size < 3:
        raise FitError(f"MLR needs at least 3 samples, got {qs.size}")
    A = np.column_stack([qs, qt, np.ones_like(qs)])
    try:
        coef = np.linalg.solve(A.T @ A + MLR_RIDGE * np.eye(3), A.T @ gt)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"MLR design is singular: {exc}") from None
    if not np.all(np.isfinite(coef)):
        raise FitError("MLR produced non-finite coefficients")
    return MLRBaseline(*(float(c) for c in coef))
