"""Video decoding, color conversion, resizing and key-frame / clip sampling.

Frames are ``(H, W, 3)`` uint8 arrays in RGB order; a video stacks them as
``(T, H, W, 3)``. Two containers are understood:

* YUV4MPEG2 (``.y4m``) with 4:2:0 or 4:4:4 chroma. Chroma is upsampled
  by nearest neighbour and converted with the full-range BT.601 matrix.
* raw-RGBV (``.rgbv``): ``b"RGBV1\\n"``, an ASCII line
  ``w=<int> h=<int> n=<int> fps=<int>\\n`` and ``n`` planar frames
  (R plane, G plane, B plane; frame-major).
"""

import os
import re
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_frame, check_frames
from .exceptions import InsufficientFramesError, TruncatedVideoError, VideoFormatError

RGBV_MAGIC = b"RGBV1\n"
_RGBV_HEADER = re.compile(rb"^w=(\d+) h=(\d+) n=(\d+) fps=(\d+)\n$")

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass
class Video:
    """Decoded video. ``fps`` is informational only."""

    frames: np.ndarray
    fps: float = 30.0

    def __post_init__(self):
        self.frames = check_frames(self.frames)

    def __len__(self):
        return self.frames.shape[0]

    @property
    def width(self):
        return self.frames.shape[2]

    @property
    def height(self):
        return self.frames.shape[1]


@dataclass(frozen=True)
class SamplingPlan:
    """How many key frames / clips to draw, and the clip resolution."""

    k: int = 8
    clip_edge: int = 64

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.clip_edge < 16:
            raise ValueError(f"clip_edge must be >= 16, got {self.clip_edge}")


@dataclass
class KeyFrames:
    frames: list = field(default_factory=list)
    indices: list = field(default_factory=list)


# --------------------------------------------------------------------- decode


def load_video(path):
    """Decode a ``.y4m`` or raw-RGBV file into a :class:`Video`.

    The container is sniffed from the leading magic bytes, not the suffix.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(RGBV_MAGIC):
        return _decode_rgbv(data)
    if data.startswith(b"YUV4MPEG2"):
        return _decode_y4m(data)
    raise VideoFormatError(f"{os.fspath(path)}: unrecognized container")


def _decode_rgbv(data):
    end = data.find(b"\n", len(RGBV_MAGIC))
    if end < 0:
        raise VideoFormatError("raw-RGBV: missing header line")
    m = _RGBV_HEADER.match(data[len(RGBV_MAGIC) : end + 1])
    if m is None:
        raise VideoFormatError("raw-RGBV: malformed header line")
    w, h, n, fps = (int(g) for g in m.groups())
    if w < 1 or h < 1:
        raise VideoFormatError(f"raw-RGBV: bad dimensions {w}x{h}")
    frame_bytes = 3 * w * h
    payload = memoryview(data)[end + 1 :]
    frames = np.empty((n, h, w, 3), dtype=np.uint8)
    for i in range(n):
        chunk = payload[i * frame_bytes : (i + 1) * frame_bytes]
        if len(chunk) < frame_bytes:
            raise TruncatedVideoError(i)
        frames[i] = np.frombuffer(chunk, dtype=np.uint8).reshape(3, h, w).transpose(1, 2, 0)
    return Video(frames, float(fps))


def _parse_fps(token):
    num, _, den = token.partition(":")
    try:
        num, den = int(num), int(den or 1)
    except ValueError:
        raise VideoFormatError(f"Y4M: bad frame rate {token!r}") from None
    return num / den if den else 0.0


def _decode_y4m(data):
    end = data.find(b"\n")
    if end < 0:
        raise VideoFormatError("Y4M: missing header terminator")
    tokens = data[:end].decode("ascii", errors="replace").split(" ")
    if tokens[0] != "YUV4MPEG2":
        raise VideoFormatError("Y4M: bad magic")
    width = height = None
    fps = 30.0
    chroma = "420"
    for tok in tokens[1:]:
        if not tok:
            continue
        tag, val = tok[0], tok[1:]
        try:
            if tag == "W":
                width = int(val)
            elif tag == "H":
                height = int(val)
        except ValueError:
            raise VideoFormatError(f"Y4M: bad header token {tok!r}") from None
        if tag == "F":
            fps = _parse_fps(val)
        elif tag == "C":
            chroma = val
    if not width or not height or width < 1 or height < 1:
        raise VideoFormatError("Y4M: missing or invalid W/H")
    if chroma.startswith("420"):
        cw, ch = (width + 1) // 2, (height + 1) // 2
    elif chroma == "444":
        cw, ch = width, height
    else:
        raise VideoFormatError(f"Y4M: unsupported chroma {chroma!r}")

    luma_size, chroma_size = width * height, cw * ch
    frame_size = luma_size + 2 * chroma_size
    frames = []
    pos = end + 1
    while pos < len(data):
        idx = len(frames)
        if not data.startswith(b"FRAME", pos):
            raise VideoFormatError(f"Y4M: expected FRAME marker at frame {idx}")
        nl = data.find(b"\n", pos)
        if nl < 0:
            raise TruncatedVideoError(idx)
        start = nl + 1
        buf = data[start : start + frame_size]
        if len(buf) < frame_size:
            raise TruncatedVideoError(idx)
        planes = np.frombuffer(buf, dtype=np.uint8)
        y = planes[:luma_size].reshape(height, width)
        u = planes[luma_size : luma_size + chroma_size].reshape(ch, cw)
        v = planes[luma_size + chroma_size :].reshape(ch, cw)
        if cw != width:
            u = u.repeat(2, axis=0).repeat(2, axis=1)[:height, :width]
            v = v.repeat(2, axis=0).repeat(2, axis=1)[:height, :width]
        frames.append(ycbcr_to_rgb(y, u, v))
        pos = start + frame_size
    if not frames:
        raise VideoFormatError("Y4M: no frames")
    return Video(np.stack(frames), fps)


def ycbcr_to_rgb(y, cb, cr):
    """Full-range BT.601 YCbCr -> RGB uint8."""
    y = np.asarray(y, dtype=np.float64)
    cb = np.asarray(cb, dtype=np.float64) - 128.0
    cr = np.asarray(cr, dtype=np.float64) - 128.0
    rgb = np.stack(
        [y + 1.402 * cr, y - 0.344136 * cb - 0.714136 * cr, y + 1.772 * cb], axis=-1
    )
    return _round_u8(rgb)


def rgb_to_ycbcr(frame):
    """Full-range BT.601 RGB -> (Y, Cb, Cr) float planes."""
    f = np.asarray(frame, dtype=np.float64)
    r, g, b = f[..., 0], f[..., 1], f[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    return y, cb, cr


# --------------------------------------------------------------------- encode


def write_rgbv(path, video):
    """Write ``video`` as a raw-RGBV file."""
    frames = check_frames(video.frames)
    n, h, w, _ = frames.shape
    header = RGBV_MAGIC + f"w={w} h={h} n={n} fps={int(round(video.fps))}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(frames.transpose(0, 3, 1, 2)).tobytes())


def write_y4m(path, video, chroma="444"):
    """Write ``video`` as YUV4MPEG2. 4:2:0 chroma is the mean of each 2x2 block."""
    frames = check_frames(video.frames)
    n, h, w, _ = frames.shape
    if chroma not in ("444", "420"):
        raise ValueError(f"unsupported chroma {chroma!r}")
    fps = int(round(video.fps)) or 30
    with open(path, "wb") as fh:
        fh.write(f"YUV4MPEG2 W{w} H{h} F{fps}:1 Ip A1:1 C{chroma}\n".encode("ascii"))
        for frame in frames:
            planes = rgb_to_ycbcr(frame)
            fh.write(b"FRAME\n")
            fh.write(_round_u8(planes[0]).tobytes())
            for c in planes[1:]:
                if chroma == "420":
                    ph, pw = (h + 1) // 2 * 2, (w + 1) // 2 * 2
                    c = np.pad(c, ((0, ph - h), (0, pw - w)), mode="edge")
                    c = c.reshape(ph // 2, 2, pw // 2, 2).mean(axis=(1, 3))
                fh.write(_round_u8(c).tobytes())


# --------------------------------------------------------------------- pixels


def _round_u8(a):
    return np.clip(np.floor(a + 0.5), 0, 255).astype(np.uint8)


def to_grayscale(frame):
    """BT.601 luma of an RGB frame (or stack of frames) as float64 in [0, 255].

    Weights are applied as integers over 1000 so gray pixels map to themselves exactly.
    """
    f = np.asarray(frame)
    f = f.astype(np.int64) if np.issubdtype(f.dtype, np.integer) else f.astype(np.float64)
    acc = 299 * f[..., 0] + 587 * f[..., 1] + 114 * f[..., 2]
    return acc / 1000.0


def _bilinear_taps(n_in, n_out):
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def resize_bilinear(frame, out_w, out_h):
    """Half-pixel-centred bilinear resize; works on a frame or a ``(T, H, W, C)`` stack.

    Output is rounded to nearest (ties up) and clamped to uint8.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output size must be positive, got {out_w}x{out_h}")
    a = np.asarray(frame)
    h, w = a.shape[-3], a.shape[-2]
    if (h, w) == (out_h, out_w):
        return a.astype(np.uint8, copy=True)
    y0, y1, fy = _bilinear_taps(h, out_h)
    x0, x1, fx = _bilinear_taps(w, out_w)
    f = a.astype(np.float64)
    fy = fy[:, None, None]
    fx = fx[:, None]
    top = f[..., y0, :, :] * (1.0 - fy) + f[..., y1, :, :] * fy
    out = top[..., x0, :] * (1.0 - fx) + top[..., x1, :] * fx
    return _round_u8(out)


# -------------------------------------------------------------------- sampling


def _check_count(n_frames, k):
    if n_frames < k:
        raise InsufficientFramesError(f"video has {n_frames} frames, need at least k={k}")


def key_frame_indices(n_frames, k):
    _check_count(n_frames, k)
    return [i * n_frames // k for i in range(k)]


def clip_bounds(n_frames, k):
    """Half-open ``(start, stop)`` frame ranges of the k clips."""
    _check_count(n_frames, k)
    return [(i * n_frames // k, (i + 1) * n_frames // k) for i in range(k)]


def sample_key_frames(video, plan):
    idx = key_frame_indices(len(video), plan.k)
    return KeyFrames([check_frame(video.frames[i]) for i in idx], idx)


def split_clips(video, plan):
    """Partition ``video`` into ``plan.k`` contiguous clips at ``clip_edge`` resolution."""
    bounds = clip_bounds(len(video), plan.k)
    edge = plan.clip_edge
    return [
        Video(resize_bilinear(video.frames[a:b], edge, edge), video.fps) for a, b in bounds
    ]
