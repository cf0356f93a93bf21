"""Input validation helpers used by the public functions and estimators."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ShapeError

MIN_FRAME_EDGE = 8


def check_frame(frame, min_edge=MIN_FRAME_EDGE):
    """Return ``frame`` as a C-contiguous ``(H, W, 3)`` uint8 array."""
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ShapeError(f"frame must have shape (H, W, 3), got {frame.shape}")
    h, w = frame.shape[:2]
    if h < min_edge or w < min_edge:
        raise ShapeError(f"frame must be at least {min_edge}x{min_edge}, got {w}x{h}")
    if frame.dtype != np.uint8:
        if np.issubdtype(frame.dtype, np.integer) and (frame.min() < 0 or frame.max() > 255):
            raise ValueError("integer frame values must lie in [0, 255]")
        frame = np.clip(np.floor(np.asarray(frame, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)
    return np.ascontiguousarray(frame)


def check_frames(frames):
    """Validate a ``(T, H, W, 3)`` stack."""
    frames = np.asarray(frames)
    if frames.ndim != 4 or frames.shape[3] != 3:
        raise ShapeError(f"frames must have shape (T, H, W, 3), got {frames.shape}")
    if frames.dtype != np.uint8:
        raise ShapeError(f"frames must be uint8, got {frames.dtype}")
    return np.ascontiguousarray(frames)


def check_scores(pred, gt, min_len=1, name="scores"):
    """Two equal-length finite 1-D float arrays."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    gt = np.asarray(gt, dtype=np.float64).ravel()
    if pred.shape != gt.shape:
        raise ValueError(f"{name}: length mismatch {pred.size} != {gt.size}")
    if pred.size < min_len:
        raise ValueError(f"{name}: need at least {min_len} values, got {pred.size}")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(gt))):
        raise ValueError(f"{name}: non-finite values")
    return pred, gt


def check_feature_tensor(X, n_features=None):
    """Validate per-video clip features of shape ``(n_videos, k, d)``.

    A 2-D input is read as one clip per video.
    """
    X = check_array(X, allow_nd=True, ensure_2d=False, dtype=np.float64)
    if X.ndim == 2:
        X = X[:, None, :]
    if X.ndim != 3:
        raise ShapeError(f"features must have shape (n_videos, k, d), got {X.shape}")
    if n_features is not None and X.shape[2] != n_features:
        raise ShapeError(f"expected feature dimension {n_features}, got {X.shape[2]}")
    return X
