"""Semantic / motion feature providers and the LVQF feature file format.

The built-in backbones are small, seeded, never-trained convolution stacks
that keep the structure the head expects: a semantic vector made of the
global-average-pooled outputs of the last two stages of a 2-D network, and
a motion vector made of the pooled output of a 3-D network over a clip.
Externally computed features (e.g. from large pretrained networks) enter
through :class:`FileFeatureProvider`.

LVQF layout (little-endian): ``b"LVQF"``, u32 version (1), u32 count,
u32 dim, then ``count * dim`` float32 values, row-major.
"""

import hashlib
import os
import struct

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._validation import check_frame
from .exceptions import (
    FeatureDimensionError,
    FeatureLookupError,
    FeatureMagicError,
    FeatureTruncatedError,
    FeatureVersionError,
)
from .media_io import resize_bilinear, to_grayscale

LVQF_MAGIC = b"LVQF"
LVQF_VERSION = 1
_LVQF_HEAD = struct.Struct("<4sIII")

BACKBONE_INPUT = 64
MOTION_FRAMES = 8


# ------------------------------------------------------------------ LVQF io


def write_features(path, vectors, dim=None):
    """Write a list of equal-length vectors (or a 2-D array) as LVQF."""
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.size == 0 and arr.ndim != 2:
        arr = arr.reshape(0, dim or 0)
    if arr.ndim != 2:
        raise FeatureDimensionError(f"vectors must share one dimension, got array of shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise FeatureDimensionError(f"expected dim {dim}, got {arr.shape[1]}")
    k, d = arr.shape
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_LVQF_HEAD.pack(LVQF_MAGIC, LVQF_VERSION, k, d))
        fh.write(payload)


def read_features(path, dim=None):
    """Read an LVQF file into a ``(count, dim)`` float64 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != LVQF_MAGIC:
        raise FeatureMagicError(f"{os.fspath(path)}: not an LVQF file")
    if len(data) < _LVQF_HEAD.size:
        raise FeatureTruncatedError(f"{os.fspath(path)}: truncated header")
    _, version, k, d = _LVQF_HEAD.unpack_from(data)
    if version != LVQF_VERSION:
        raise FeatureVersionError(f"{os.fspath(path)}: unsupported version {version}")
    if dim is not None and d != dim:
        raise FeatureDimensionError(f"{os.fspath(path)}: expected dim {dim}, file has {d}")
    need = _LVQF_HEAD.size + 4 * k * d
    if len(data) < need:
        raise FeatureTruncatedError(f"{os.fspath(path)}: expected {need} bytes, got {len(data)}")
    body = np.frombuffer(data, dtype="<f4", count=k * d, offset=_LVQF_HEAD.size)
    return body.astype(np.float64).reshape(k, d)


# ------------------------------------------------------------- convolutions


def conv2d_valid(x, weight, bias, stride=2):
    """Valid 2-D cross-correlation. x: (C, H, W); weight: (O, C, kh, kw)."""
    kh, kw = weight.shape[2:]
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    out = np.tensordot(weight, win, axes=([1, 2, 3], [0, 3, 4]))
    return out + bias[:, None, None]


def conv3d_valid(x, weight, bias, stride=2):
    """Valid 3-D cross-correlation. x: (C, T, H, W); weight: (O, C, kt, kh, kw)."""
    kt, kh, kw = weight.shape[2:]
    win = sliding_window_view(x, (kt, kh, kw), axis=(1, 2, 3))[:, ::stride, ::stride, ::stride]
    out = np.tensordot(weight, win, axes=([1, 2, 3, 4], [0, 4, 5, 6]))
    return out + bias[:, None, None, None]


def _relu(a):
    return np.maximum(a, 0.0)


def _init_layers(rng, shapes):
    layers = []
    for shape in shapes:
        bound = np.sqrt(1.0 / np.prod(shape[1:]))
        w = rng.uniform(-bound, bound, size=shape)
        b = rng.uniform(-bound, bound, size=shape[0])
        w.setflags(write=False)
        b.setflags(write=False)
        layers.append((w, b))
    return layers


class _Builtin:
    kind = None
    dim = None
    _shapes = ()

    def __init__(self, seed=0):
        self.seed = int(seed)
        self.layers = _init_layers(np.random.default_rng(self.seed), self._shapes)

    @property
    def identifier(self):
        return f"{self.kind}/v1/seed={self.seed}/dim={self.dim}"

    def weights_digest(self):
        h = hashlib.sha256()
        for w, b in self.layers:
            h.update(w.tobytes())
            h.update(b.tobytes())
        return h.hexdigest()

    def __repr__(self):
        return f"{type(self).__name__}(seed={self.seed})"


class BuiltinSemanticBackbone(_Builtin):
    """Three stride-2 3x3 conv layers; stage A = conv1+conv2, stage B = conv3.

    Output is GAP(stage A) concatenated with GAP(stage B): 16 + 32 = 48 values.
    """

    kind = "builtin-semantic"
    dim = 48
    _shapes = ((8, 3, 3, 3), (16, 8, 3, 3), (32, 16, 3, 3))

    def stage_maps(self, frame):
        frame = check_frame(frame)
        if frame.shape[:2] != (BACKBONE_INPUT, BACKBONE_INPUT):
            frame = resize_bilinear(frame, BACKBONE_INPUT, BACKBONE_INPUT)
        x = frame.transpose(2, 0, 1).astype(np.float64) / 255.0
        (w1, b1), (w2, b2), (w3, b3) = self.layers
        a = _relu(conv2d_valid(_relu(conv2d_valid(x, w1, b1)), w2, b2))
        b = _relu(conv2d_valid(a, w3, b3))
        return a, b

    def __call__(self, frame, index=0, key=None):
        a, b = self.stage_maps(frame)
        return np.concatenate([a.mean(axis=(1, 2)), b.mean(axis=(1, 2))])


def motion_input(frames):
    """Luminance volume ``(1, 8, 64, 64)`` in [0, 1] fed to the motion backbone.

    Clips longer than 8 frames are subsampled at ``floor(j * L / 8)``; shorter
    clips are zero-padded at the end.
    """
    frames = np.asarray(frames)
    if frames.shape[1:3] != (BACKBONE_INPUT, BACKBONE_INPUT):
        frames = resize_bilinear(frames, BACKBONE_INPUT, BACKBONE_INPUT)
    n = frames.shape[0]
    if n >= MOTION_FRAMES:
        frames = frames[[j * n // MOTION_FRAMES for j in range(MOTION_FRAMES)]]
    vol = np.zeros((MOTION_FRAMES, BACKBONE_INPUT, BACKBONE_INPUT))
    vol[: frames.shape[0]] = to_grayscale(frames) / 255.0
    return vol[None]


class BuiltinMotionBackbone(_Builtin):
    """Two stride-2 3x3x3 conv layers over a luminance clip, pooled to 16 values."""

    kind = "builtin-motion"
    dim = 16
    _shapes = ((8, 1, 3, 3, 3), (16, 8, 3, 3, 3))

    def __call__(self, clip, index=0, key=None):
        frames = clip.frames if hasattr(clip, "frames") else clip
        x = motion_input(frames)
        (w1, b1), (w2, b2) = self.layers
        out = _relu(conv3d_valid(_relu(conv3d_valid(x, w1, b1)), w2, b2))
        return out.mean(axis=(1, 2, 3))


class FileFeatureProvider:
    """Serves precomputed vectors from LVQF files.

    ``source`` is either one LVQF file (entries addressed by index) or a
    directory holding ``<key>.lvqf`` per video.
    """

    kind = "file"

    def __init__(self, source, dim, role="semantic"):
        self.source = os.fspath(source)
        self.dim = int(dim)
        self.role = role
        self._cache = {}

    @property
    def identifier(self):
        return f"file/{self.role}/dim={self.dim}"

    def _table(self, key):
        path = self.source
        if os.path.isdir(path):
            if key is None:
                raise FeatureLookupError("directory-backed provider needs a video key")
            path = os.path.join(path, f"{key}.lvqf")
        if path not in self._cache:
            if not os.path.exists(path):
                raise FeatureLookupError(f"no feature file {path}")
            self._cache[path] = read_features(path, dim=self.dim)
        return self._cache[path]

    def __call__(self, item, index=0, key=None):
        table = self._table(key)
        if not 0 <= index < table.shape[0]:
            what = "frame" if self.role == "semantic" else "clip"
            raise FeatureLookupError(
                f"{self.role} features: no entry for {what} index {index} (have {table.shape[0]})"
            )
        return table[index].copy()

    def __repr__(self):
        return f"FileFeatureProvider({self.source!r}, dim={self.dim}, role={self.role!r})"


def semantic_features(frame, provider, index=0, key=None):
    return np.asarray(provider(frame, index=index, key=key), dtype=np.float64)


def motion_features(clip, provider, index=0, key=None):
    return np.asarray(provider(clip, index=index, key=key), dtype=np.float64)


def make_provider(spec, role, seed=0, dim=None):
    """Build a provider from a CLI-style spec: ``"builtin"`` or ``"file:<path>"``."""
    if spec in (None, "builtin"):
        return BuiltinSemanticBackbone(seed) if role == "semantic" else BuiltinMotionBackbone(seed)
    if spec.startswith("file:"):
        if dim is None:
            raise ValueError(f"file {role} provider needs an explicit dimension")
        return FileFeatureProvider(spec[5:], dim, role=role)
    raise ValueError(f"unknown provider spec {spec!r}")
