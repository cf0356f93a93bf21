"""Spatial-temporal fusion layer, clip regressor and video score, with gradients.

Per clip i the head computes::

    x_i  = (SI_i (+) TI_i - x_mean) / x_scale
    FF_i = relu(x_i @ W_f + b_f)                      # fusion, width 1024
    Q_i  = y_mean + y_scale * (relu(FF_i @ W1 + b1) @ w2 + b2)

and the video score is the mean of Q_i over its k clips. ``x_mean``,
``x_scale``, ``y_mean`` and ``y_scale`` are fixed standardization constants
(identity by default) set once before training; they are not trained.
"""

import json
import struct
from dataclasses import dataclass, fields

import numpy as np

from .exceptions import CheckpointTruncatedError, CompatibilityError, ModelStateError, ShapeError

FUSION_WIDTH = 1024
HIDDEN_WIDTH = 128

TRAINABLE = ("W_f", "b_f", "W1", "b1", "w2", "b2")


@dataclass
class ModelParams:
    W_f: np.ndarray
    b_f: np.ndarray
    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: np.ndarray
    y_scale: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, np.array(getattr(self, f.name), dtype=np.float64))
        d, F = self.W_f.shape
        H = self.W1.shape[1]
        expected = {
            "b_f": (F,), "W1": (F, H), "b1": (H,), "w2": (H,), "b2": (),
            "x_mean": (d,), "x_scale": (d,), "y_mean": (), "y_scale": (),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {getattr(self, name).shape}")

    @property
    def d_in(self):
        return self.W_f.shape[0]

    @property
    def fusion_width(self):
        return self.W_f.shape[1]

    @property
    def hidden_width(self):
        return self.W1.shape[1]

    def copy(self):
        return ModelParams(**{f.name: getattr(self, f.name).copy() for f in fields(self)})

    def trainable(self):
        return {name: getattr(self, name) for name in TRAINABLE}

    def equals(self, other):
        return all(
            np.array_equal(getattr(self, f.name), getattr(other, f.name)) for f in fields(self)
        )


def init_params(d_in, fusion_width=FUSION_WIDTH, hidden_width=HIDDEN_WIDTH, seed=0):
    """Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights, zero biases."""
    rng = np.random.default_rng(seed)

    def layer(fan_in, fan_out):
        a = np.sqrt(1.0 / fan_in)
        return rng.uniform(-a, a, size=(fan_in, fan_out))

    return ModelParams(
        W_f=layer(d_in, fusion_width),
        b_f=np.zeros(fusion_width),
        W1=layer(fusion_width, hidden_width),
        b1=np.zeros(hidden_width),
        w2=layer(hidden_width, 1)[:, 0],
        b2=0.0,
        x_mean=np.zeros(d_in),
        x_scale=np.ones(d_in),
        y_mean=0.0,
        y_scale=1.0,
    )


# ------------------------------------------------------------------ forward


def fuse(si, ti, params):
    """Fused features ``relu(W_f (SI (+) TI) + b_f)``; accepts leading batch axes."""
    x = np.concatenate([np.asarray(si, dtype=np.float64), np.asarray(ti, dtype=np.float64)], axis=-1)
    return fuse_concat(x, params)


def fuse_concat(x, params):
    """:func:`fuse` on an already concatenated input."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.d_in:
        raise ShapeError(f"fusion input: expected dimension {params.d_in}, got {x.shape[-1]}")
    return np.maximum((x - params.x_mean) / params.x_scale @ params.W_f + params.b_f, 0.0)


def regress_clip(ff, params):
    """Per-clip score from fused features (leading batch axes allowed)."""
    ff = np.asarray(ff, dtype=np.float64)
    if ff.shape[-1] != params.fusion_width:
        raise ShapeError(f"regressor input: expected dimension {params.fusion_width}, got {ff.shape[-1]}")
    hidden = np.maximum(ff @ params.W1 + params.b1, 0.0)
    return params.y_mean + params.y_scale * (hidden @ params.w2 + params.b2)


def score_video(per_clip_scores):
    q = np.asarray(per_clip_scores, dtype=np.float64)
    if q.size == 0:
        raise ValueError("score_video needs at least one clip score")
    return float(q.mean())


class QualityHead:
    """Stateful forward/backward wrapper around :class:`ModelParams`.

    ``forward`` takes clip inputs of shape ``(n_videos, k, d_in)`` (already
    concatenated SI (+) TI) and returns video scores; it records the
    activations that the next ``backward`` consumes.
    """

    def __init__(self, params):
        self.params = params
        self._cache = None

    def clip_scores(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[2] != self.params.d_in:
            raise ShapeError(f"expected input of shape (n, k, {self.params.d_in}), got {X.shape}")
        return regress_clip(fuse_concat(X, self.params), self.params)

    def forward(self, X):
        p = self.params
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[2] != p.d_in:
            raise ShapeError(f"expected input of shape (n, k, {p.d_in}), got {X.shape}")
        n, k, d = X.shape
        xs = ((X - p.x_mean) / p.x_scale).reshape(n * k, d)
        z1 = xs @ p.W_f + p.b_f
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ p.W1 + p.b1
        a2 = np.maximum(z2, 0.0)
        q = p.y_mean + p.y_scale * (a2 @ p.w2 + p.b2)
        self._cache = (n, k, xs, z1, a1, z2, a2)
        return q.reshape(n, k).mean(axis=1)

    def backward(self, grad_scores):
        """Gradients of the loss w.r.t. every trainable parameter.

        ``grad_scores`` is dL/dQ for the video scores of the last forward.
        ReLU subgradient at 0 is 0.
        """
        if self._cache is None:
            raise ModelStateError("backward() called without a preceding forward()")
        n, k, xs, z1, a1, z2, a2 = self._cache
        g = np.asarray(grad_scores, dtype=np.float64).ravel()
        if g.shape != (n,):
            raise ModelStateError(f"upstream gradient has {g.size} entries, forward saw {n} videos")
        self._cache = None
        p = self.params
        dq = np.repeat(g * (p.y_scale / k), k)
        dz2 = np.outer(dq, p.w2) * (z2 > 0)
        dz1 = (dz2 @ p.W1.T) * (z1 > 0)
        return {
            "W_f": xs.T @ dz1,
            "b_f": dz1.sum(axis=0),
            "W1": a1.T @ dz2,
            "b1": dz2.sum(axis=0),
            "w2": a2.T @ dq,
            "b2": np.asarray(dq.sum()),
        }


# --------------------------------------------------------------- checkpoint

LVQM_MAGIC = b"LVQM"
LVQM_VERSION = 1
_PAYLOAD_ORDER = ("x_mean", "x_scale", "W_f", "b_f", "W1", "b1", "w2", "b2", "y_mean", "y_scale")


def save_params(path, heads, meta=None):
    """Write named heads plus metadata to an LVQM checkpoint.

    Layout: ``b"LVQM"``, u32 version, u32 header length, UTF-8 JSON header,
    then for each head the arrays in ``_PAYLOAD_ORDER`` as little-endian f64.
    """
    if isinstance(heads, ModelParams):
        heads = {"main": heads}
    header = dict(meta or {})
    header["heads"] = [
        {"name": name, "d_in": p.d_in, "fusion_width": p.fusion_width, "hidden_width": p.hidden_width}
        for name, p in heads.items()
    ]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(LVQM_MAGIC + struct.pack("<II", LVQM_VERSION, len(blob)))
        fh.write(blob)
        for p in heads.values():
            for name in _PAYLOAD_ORDER:
                fh.write(np.ascontiguousarray(getattr(p, name), dtype="<f8").tobytes())


def load_params(path, expected=None):
    """Read an LVQM checkpoint; returns ``(heads, header)``.

    ``expected`` maps header keys to required values; any difference raises
    :class:`CompatibilityError`.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != LVQM_MAGIC:
        raise CompatibilityError(f"{path}: not an LVQM checkpoint")
    if len(data) < 12:
        raise CheckpointTruncatedError(f"{path}: truncated header")
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != LVQM_VERSION:
        raise CompatibilityError(f"{path}: unsupported checkpoint version {version}")
    if len(data) < 12 + hlen:
        raise CheckpointTruncatedError(f"{path}: truncated header")
    header = json.loads(data[12 : 12 + hlen].decode("utf-8"))
    check_compatible(header, expected or {})

    offset = 12 + hlen
    heads = {}
    for spec in header["heads"]:
        d, F, H = spec["d_in"], spec["fusion_width"], spec["hidden_width"]
        shapes = {
            "x_mean": (d,), "x_scale": (d,), "W_f": (d, F), "b_f": (F,), "W1": (F, H),
            "b1": (H,), "w2": (H,), "b2": (), "y_mean": (), "y_scale": (),
        }
        arrays = {}
        for name in _PAYLOAD_ORDER:
            count = int(np.prod(shapes[name]))
            end = offset + 8 * count
            if end > len(data):
                raise CheckpointTruncatedError(f"{path}: payload ends inside {spec['name']}.{name}")
            arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shapes[name])
            offset = end
        heads[spec["name"]] = ModelParams(**arrays)
    if offset != len(data):
        raise CompatibilityError(f"{path}: {len(data) - offset} trailing bytes")
    return heads, header


def check_compatible(header, expected):
    for key, want in expected.items():
        have = header.get(key)
        if have != want:
            raise CompatibilityError(f"checkpoint {key} mismatch: checkpoint has {have!r}, expected {want!r}")
