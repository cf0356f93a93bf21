"""Per-video spatial (SI) and temporal (TI) clip features.

For key frame / clip i::

    SI_i = semantic (d_s) + brightness (18) + noise (6)
    TI_i = motion (d_m) + brightness consistency (5)

The full clip input to the head is SI_i followed by TI_i.
"""

from dataclasses import dataclass

import numpy as np

from .backbones import motion_features, semantic_features
from .exceptions import CompatibilityError
from .handcrafted import (
    BRIGHTNESS_DIM,
    CONSISTENCY_DIM,
    NOISE_DIM,
    brightness_consistency,
    brightness_features,
    noise_features,
)
from .media_io import sample_key_frames, split_clips

BLOCKS = ("sf", "bf", "nf", "mf", "cf")
SPATIAL_BLOCKS = ("sf", "bf", "nf")
TEMPORAL_BLOCKS = ("mf", "cf")

ABLATIONS = {
    "none": BLOCKS,
    "no-handcrafted": ("sf", "mf"),
    "no-bf-nf": ("sf", "mf", "cf"),
    "no-cf": ("sf", "bf", "nf", "mf"),
    "sf-only": ("sf",),
    "mf-only": ("mf",),
}


@dataclass(frozen=True)
class FeatureLayout:
    """Column layout of the concatenated SI (+) TI vector."""

    d_s: int
    d_m: int

    @property
    def sizes(self):
        return {"sf": self.d_s, "bf": BRIGHTNESS_DIM, "nf": NOISE_DIM, "mf": self.d_m, "cf": CONSISTENCY_DIM}

    @property
    def spatial_dim(self):
        return self.d_s + BRIGHTNESS_DIM + NOISE_DIM

    @property
    def temporal_dim(self):
        return self.d_m + CONSISTENCY_DIM

    def slices(self):
        out, start = {}, 0
        for name in BLOCKS:
            out[name] = slice(start, start + self.sizes[name])
            start += self.sizes[name]
        return out

    def columns(self, blocks):
        unknown = set(blocks) - set(BLOCKS)
        if unknown:
            raise ValueError(f"unknown feature blocks {sorted(unknown)}")
        sl = self.slices()
        return np.concatenate([np.arange(sl[b].start, sl[b].stop) for b in BLOCKS if b in blocks])


def _as_f32(a):
    # features are cached as float32; round here so cached and fresh paths agree
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def extract_video_features(video, plan, semantic, motion, key=None):
    """``(SI, TI)`` arrays of shape ``(k, d_s + 24)`` and ``(k, d_m + 5)``."""
    keys = sample_key_frames(video, plan)
    clips = split_clips(video, plan)
    si, ti = [], []
    for i, (frame, clip) in enumerate(zip(keys.frames, clips)):
        sf = semantic_features(frame, semantic, index=i, key=key)
        mf = motion_features(clip, motion, index=i, key=key)
        if sf.shape != (semantic.dim,) or mf.shape != (motion.dim,):
            raise CompatibilityError(
                f"provider returned dims {sf.shape}/{mf.shape}, declared {semantic.dim}/{motion.dim}"
            )
        si.append(np.concatenate([sf, brightness_features(frame), noise_features(frame)]))
        ti.append(np.concatenate([mf, brightness_consistency(clip)]))
    return _as_f32(si), _as_f32(ti)


def stack_features(pairs, layout):
    """Stack per-video ``(SI, TI)`` pairs into ``(n, k, d_SI + d_TI)``."""
    rows = []
    for i, (si, ti) in enumerate(pairs):
        si, ti = np.asarray(si), np.asarray(ti)
        if si.shape[-1] != layout.spatial_dim or ti.shape[-1] != layout.temporal_dim:
            raise CompatibilityError(
                f"video {i}: feature dims {si.shape[-1]}/{ti.shape[-1]}, "
                f"expected {layout.spatial_dim}/{layout.temporal_dim}"
            )
        if rows and si.shape[0] != rows[0].shape[0]:
            raise CompatibilityError(f"video {i}: {si.shape[0]} clips, expected {rows[0].shape[0]}")
        rows.append(np.concatenate([si, ti], axis=1))
    if not rows:
        return np.zeros((0, 0, layout.spatial_dim + layout.temporal_dim))
    return np.stack(rows)
