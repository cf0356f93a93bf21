"""Synthetic low-light corpora: procedural scenes, toy enhancers and pseudo-MOS.

Pseudo-MOS closed form (all attributes measured on the video itself)::

    A  = exp(-((brightness - 120) / 60) ** 2)       brightness adequacy
    C  = min(contrast / 40, 1)                      contrast adequacy
    Np = noise / (noise + 6)                        noise penalty
    Fp = flicker / (flicker + 3)                    flicker penalty
    mos = 100 * (0.6 A + 0.4 C) * (1 - 0.6 Np) * (1 - 0.5 Fp)    clamped to [0, 100]

``brightness`` and ``contrast`` are the frame-averaged gray mean and std,
``noise`` is the mean Immerkaer sigma over the same frames and ``flicker``
is the mean absolute change of per-frame mean luminance.
"""

from dataclasses import dataclass

import numpy as np

from .handcrafted import default_stride, frame_means, immerkaer_sigma, video_attributes
from .media_io import Video, to_grayscale

# operator applied to enhanced variant v (1-based) is ENHANCERS[(v - 1) % 4]
ENHANCERS = (("gamma", 2.2), ("ghe", None), ("gamma", 1.6), ("gamma", 3.0))


@dataclass(frozen=True)
class CorpusSpec:
    n_sources: int = 40
    n_frames: int = 64
    width: int = 80
    height: int = 60
    seed: int = 0
    darkness_range: tuple = (0.08, 0.7)
    noise_range: tuple = (0.0, 10.0)
    flicker_range: tuple = (0.0, 0.2)
    fps: int = 30

    def __post_init__(self):
        if self.n_sources < 1 or self.n_frames < 1:
            raise ValueError("n_sources and n_frames must be positive")
        if self.width < 8 or self.height < 8:
            raise ValueError("frames must be at least 8x8")
        lo, hi = self.darkness_range
        if not 0 < lo <= hi <= 1:
            raise ValueError("darkness factors must lie in (0, 1]")
        if min(self.noise_range) < 0 or min(self.flicker_range) < 0 or max(self.flicker_range) >= 1:
            raise ValueError("noise sigma >= 0 and flicker amplitude in [0, 1) required")


@dataclass(frozen=True)
class Degradation:
    darkness: float
    noise: float
    flicker: float


def _uniform(rng, bounds):
    lo, hi = bounds
    return float(rng.uniform(lo, hi)) if hi > lo else float(lo)


def source_degradation(spec, index):
    rng = np.random.default_rng([spec.seed, index, 0])
    return Degradation(
        _uniform(rng, spec.darkness_range), _uniform(rng, spec.noise_range), _uniform(rng, spec.flicker_range)
    )


def render_scene(spec, index):
    """Full-brightness float scene ``(T, H, W, 3)`` in [0, 255]."""
    rng = np.random.default_rng([spec.seed, index, 1])
    T, H, W = spec.n_frames, spec.height, spec.width
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    yy /= H
    xx /= W

    base = rng.uniform(60, 160, size=3)
    gratings = []
    for _ in range(3):
        theta = rng.uniform(0, np.pi)
        freq = rng.uniform(1.5, 6.0)
        color = rng.uniform(-70, 70, size=3)
        drift = rng.uniform(-0.08, 0.08)
        gratings.append((np.cos(theta), np.sin(theta), freq, color, rng.uniform(0, 2 * np.pi), drift))
    blobs = []
    for _ in range(3):
        blobs.append(
            (
                rng.uniform(0.1, 0.9, size=2),
                rng.uniform(-0.015, 0.015, size=2),
                rng.uniform(0.08, 0.22),
                rng.uniform(-140, 140, size=3),
            )
        )

    scene = np.empty((T, H, W, 3))
    for t in range(T):
        img = np.broadcast_to(base, (H, W, 3)).copy()
        for cx, sy, freq, color, phase, drift in gratings:
            wave = np.sin(2 * np.pi * freq * (cx * xx + sy * yy) + phase + 2 * np.pi * drift * t)
            img += wave[..., None] * color
        for pos, vel, radius, color in blobs:
            p = pos + vel * t
            p = 1.0 - np.abs(1.0 - np.mod(p, 2.0))  # bounce inside [0, 1]
            r2 = ((xx - p[0]) ** 2 + (yy - p[1]) ** 2) / radius**2
            img += np.exp(-r2)[..., None] * color
        scene[t] = img
    return np.clip(scene, 0.0, 255.0)


def _flicker_gain(n_frames, amplitude, rng):
    period = rng.uniform(6.0, 16.0)
    phase = rng.uniform(0, 2 * np.pi)
    t = np.arange(n_frames)
    return 1.0 + amplitude * np.sin(2 * np.pi * t / period + phase)


def _degrade(frames, noise, flicker, rng, gain=1.0):
    gains = gain * _flicker_gain(frames.shape[0], flicker, rng)
    out = frames * gains[:, None, None, None]
    if noise > 0:
        out = out + rng.normal(0.0, noise, size=out.shape)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def generate_source(spec, index, darkness=None, noise=None, flicker=None):
    """Low-light source video ``index``; keyword overrides replace the seeded draw."""
    d = source_degradation(spec, index)
    d = Degradation(
        d.darkness if darkness is None else darkness,
        d.noise if noise is None else noise,
        d.flicker if flicker is None else flicker,
    )
    rng = np.random.default_rng([spec.seed, index, 2])
    frames = _degrade(render_scene(spec, index), d.noise, d.flicker, rng, gain=d.darkness)
    return Video(frames, spec.fps)


# ------------------------------------------------------------------ enhancers


def enhance_gamma(video, gamma):
    """Per-channel ``255 * (x / 255) ** (1 / gamma)``, via a lookup table."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    lut = np.floor(255.0 * (np.arange(256) / 255.0) ** (1.0 / gamma) + 0.5)
    lut = np.clip(lut, 0, 255).astype(np.uint8)
    return Video(lut[video.frames], video.fps)


def _ghe_frame(frame):
    y = to_grayscale(frame)
    levels = np.clip(np.floor(y + 0.5), 0, 255).astype(np.intp)
    hist = np.bincount(levels.ravel(), minlength=256)
    cdf = np.cumsum(hist)
    cdf_min = cdf[hist > 0][0]
    if cdf[-1] == cdf_min:
        return frame.copy()
    mapping = (cdf - cdf_min) / (cdf[-1] - cdf_min) * 255.0
    y_new = mapping[levels]
    f = frame.astype(np.float64)
    ratio = np.divide(y_new, y, out=np.zeros_like(y), where=y > 0)
    out = np.where((y > 0)[..., None], f * ratio[..., None], y_new[..., None])
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def enhance_ghe(video):
    """Global histogram equalization of each frame's luminance; chroma kept by luminance ratio."""
    return Video(np.stack([_ghe_frame(f) for f in video.frames]), video.fps)


def make_variant(spec, index, variant, source=None):
    """Enhanced variant ``variant`` (>= 1) of source ``index``.

    The enhancer is followed by seeded artifact noise and flicker drawn from
    the corpus ranges, mimicking enhancement-induced distortions.
    """
    if variant < 1:
        raise ValueError("variant numbering starts at 1 (0 is the source)")
    source = source if source is not None else generate_source(spec, index)
    op, arg = ENHANCERS[(variant - 1) % len(ENHANCERS)]
    enhanced = enhance_gamma(source, arg) if op == "gamma" else enhance_ghe(source)
    rng = np.random.default_rng([spec.seed, index, 100 + variant])
    noise = _uniform(rng, spec.noise_range)
    flicker = _uniform(rng, spec.flicker_range)
    frames = _degrade(enhanced.frames.astype(np.float64), noise, flicker, rng)
    return Video(frames, spec.fps)


def variant_name(variant):
    if variant == 0:
        return "orig"
    op, arg = ENHANCERS[(variant - 1) % len(ENHANCERS)]
    return f"v{variant}-{op}{arg if arg is not None else ''}"


# ----------------------------------------------------------------- pseudo-MOS


@dataclass(frozen=True)
class PseudoMosModel:
    brightness_target: float = 120.0
    brightness_width: float = 60.0
    contrast_ref: float = 40.0
    noise_half: float = 6.0
    flicker_half: float = 3.0
    w_brightness: float = 0.6
    w_noise: float = 0.6
    w_flicker: float = 0.5


def measured_terms(video, stride=None):
    """``(brightness, contrast, noise, flicker)`` as used by :func:`pseudo_mos`."""
    frames = video.frames
    stride = default_stride(len(frames)) if stride is None else stride
    attrs = video_attributes(video, stride)
    noise = float(np.mean([immerkaer_sigma(to_grayscale(f)) for f in frames[::stride]]))
    means = frame_means(frames)
    flicker = float(np.mean(np.abs(np.diff(means)))) if means.size > 1 else 0.0
    return attrs.brightness, attrs.contrast, noise, flicker


def pseudo_mos_from_terms(brightness, contrast, noise, flicker, model=None):
    m = model or PseudoMosModel()
    adequacy = np.exp(-(((brightness - m.brightness_target) / m.brightness_width) ** 2))
    contrast_term = min(contrast / m.contrast_ref, 1.0)
    noise_pen = noise / (noise + m.noise_half)
    flicker_pen = flicker / (flicker + m.flicker_half)
    q = (
        100.0
        * (m.w_brightness * adequacy + (1.0 - m.w_brightness) * contrast_term)
        * (1.0 - m.w_noise * noise_pen)
        * (1.0 - m.w_flicker * flicker_pen)
    )
    return float(min(max(q, 0.0), 100.0))


def pseudo_mos(video, model=None):
    return pseudo_mos_from_terms(*measured_terms(video), model=model)
