"""Handcrafted luminance, noise and flicker descriptors plus video attributes.

Vector layouts are fixed so a trained head stays portable:

* brightness (18): 16-bin luminance histogram (bin width 16), mean, std
* noise (6): global Immerkaer sigma; mean/std/min/max of the 4x4 grid
  sigmas; fraction of grid cells above the global sigma
* consistency (5): over the per-frame mean luminance b_t of a clip,
  std(b), mean |diff b|, max |diff b|, max b - min b, OLS slope of b on t

All statistics are population statistics.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_frame
from .media_io import to_grayscale

BRIGHTNESS_DIM = 18
NOISE_DIM = 6
CONSISTENCY_DIM = 5

HIST_BINS = 16
NOISE_GRID = 4

_NOISE_NORM = math.sqrt(math.pi / 2.0) / 6.0


def brightness_features(frame):
    gray = to_grayscale(check_frame(frame))
    bins = np.minimum((gray // 16).astype(np.intp), HIST_BINS - 1)
    hist = np.bincount(bins.ravel(), minlength=HIST_BINS) / gray.size
    return np.concatenate([hist, [gray.mean(), gray.std()]])


def laplacian_response(gray):
    """|I * M| over the valid region, M = [1,-2,1; -2,4,-2; 1,-2,1]."""
    g = np.asarray(gray, dtype=np.float64)
    # M is separable: [1,-2,1]^T [1,-2,1]
    rows = g[:-2, :] - 2.0 * g[1:-1, :] + g[2:, :]
    resp = rows[:, :-2] - 2.0 * rows[:, 1:-1] + rows[:, 2:]
    return np.abs(resp)


def immerkaer_sigma(gray):
    """Fast noise standard deviation estimate of a luminance plane.

    Planes smaller than 3x3 have no valid response and yield 0.
    """
    g = np.asarray(gray, dtype=np.float64)
    if g.shape[0] < 3 or g.shape[1] < 3:
        return 0.0
    return _NOISE_NORM * float(laplacian_response(g).mean())


def _grid_sigmas(gray):
    h, w = gray.shape
    ys = np.array_split(np.arange(h), NOISE_GRID)
    xs = np.array_split(np.arange(w), NOISE_GRID)
    if min(len(ys[-1]), len(xs[-1])) >= 3:
        return np.array(
            [immerkaer_sigma(gray[r[0] : r[-1] + 1, c[0] : c[-1] + 1]) for r in ys for c in xs]
        )
    # cells too small for a 3x3 mask: partition the global response map instead
    resp = laplacian_response(gray)
    ys = np.array_split(np.arange(resp.shape[0]), NOISE_GRID)
    xs = np.array_split(np.arange(resp.shape[1]), NOISE_GRID)
    return np.array(
        [_NOISE_NORM * resp[r[0] : r[-1] + 1, c[0] : c[-1] + 1].mean() for r in ys for c in xs]
    )


def noise_features(frame):
    gray = to_grayscale(check_frame(frame))
    sigma = immerkaer_sigma(gray)
    cells = _grid_sigmas(gray)
    above = float(np.mean(cells > sigma))
    return np.array([sigma, cells.mean(), cells.std(), cells.min(), cells.max(), above])


def consistency_from_means(b):
    """The five consistency statistics of a per-frame mean-luminance sequence."""
    b = np.asarray(b, dtype=np.float64).ravel()
    if b.size < 2:
        return np.zeros(CONSISTENCY_DIM)
    d = np.abs(np.diff(b))
    t = np.arange(b.size, dtype=np.float64)
    tc = t - t.mean()
    slope = float(np.dot(tc, b - b.mean()) / np.dot(tc, tc))
    return np.array([b.std(), d.mean(), d.max(), b.max() - b.min(), slope])


def frame_means(frames):
    """Mean luminance of every frame in a ``(T, H, W, 3)`` stack."""
    return to_grayscale(frames).mean(axis=(1, 2))


def brightness_consistency(clip):
    frames = clip.frames if hasattr(clip, "frames") else np.asarray(clip)
    return consistency_from_means(frame_means(frames))


# ------------------------------------------------------------------ attributes


@dataclass(frozen=True)
class VideoAttributes:
    brightness: float
    contrast: float
    colorfulness: float


def colorfulness(frame):
    """Hasler & Suesstrunk colorfulness of one RGB frame."""
    f = np.asarray(frame, dtype=np.float64)
    r, g, b = f[..., 0], f[..., 1], f[..., 2]
    rg = r - g
    yb = 0.5 * (r + g) - b
    return float(
        math.sqrt(rg.var() + yb.var()) + 0.3 * math.sqrt(rg.mean() ** 2 + yb.mean() ** 2)
    )


def default_stride(n_frames):
    return max(1, n_frames // 8)


def video_attributes(video, stride=None):
    """Brightness, contrast and colorfulness averaged over every ``stride``-th frame."""
    frames = video.frames
    if stride is None:
        stride = default_stride(len(frames))
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    sel = frames[::stride]
    gray = to_grayscale(sel)
    return VideoAttributes(
        brightness=float(gray.mean(axis=(1, 2)).mean()),
        contrast=float(gray.std(axis=(1, 2)).mean()),
        colorfulness=float(np.mean([colorfulness(f) for f in sel])),
    )
