import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llvqa.exceptions import InsufficientFramesError, TruncatedVideoError, VideoFormatError
from llvqa.media_io import (
    SamplingPlan,
    Video,
    clip_bounds,
    key_frame_indices,
    load_video,
    resize_bilinear,
    sample_key_frames,
    split_clips,
    to_grayscale,
    write_rgbv,
    write_y4m,
)


def _video(n, h=16, w=16, seed=0):
    rng = np.random.default_rng(seed)
    return Video(rng.integers(0, 256, size=(n, h, w, 3), dtype=np.uint8), 25.0)


# ----------------------------------------------------------------- containers


def test_y4m_neutral_chroma_is_gray(tmp_path):
    path = tmp_path / "gray.y4m"
    luma = bytes([128]) * 256
    chroma = bytes([128]) * 64
    path.write_bytes(b"YUV4MPEG2 W16 H16 F30:1 Ip A1:1 C420jpeg\n" + (b"FRAME\n" + luma + chroma + chroma) * 2)
    video = load_video(path)
    assert video.frames.shape == (2, 16, 16, 3)
    assert np.all(video.frames == 128)
    assert video.fps == 30.0


def test_y4m_444_roundtrip_is_close(tmp_path):
    rng = np.random.default_rng(3)
    frames = rng.integers(0, 256, size=(3, 12, 10, 3), dtype=np.uint8)
    path = tmp_path / "v.y4m"
    write_y4m(path, Video(frames))
    out = load_video(path).frames
    # YCbCr quantization loses at most a couple of code values
    assert np.abs(out.astype(int) - frames.astype(int)).max() <= 3


def test_y4m_420_nearest_upsampling(tmp_path):
    # 4x4 luma 100, chroma plane 2x2 with distinct Cr per block
    y = bytes([100]) * 16
    cb = bytes([128]) * 4
    cr = bytes([128, 160, 96, 128])
    path = tmp_path / "c.y4m"
    path.write_bytes(b"YUV4MPEG2 W4 H4 F25:1 C420\nFRAME\n" + y + cb + cr)
    r = load_video(path).frames[0, :, :, 0].astype(int)
    assert len(np.unique(r[:2, :2])) == 1 and len(np.unique(r[:2, 2:])) == 1
    assert r[0, 2] > r[0, 0] > r[2, 0]


def test_y4m_errors(tmp_path):
    bad = tmp_path / "bad.y4m"
    bad.write_bytes(b"YUV4MPEG2 H16 C420\nFRAME\n")
    with pytest.raises(VideoFormatError):
        load_video(bad)
    trunc = tmp_path / "trunc.y4m"
    trunc.write_bytes(b"YUV4MPEG2 W4 H4 C444\nFRAME\n" + bytes(48) + b"FRAME\n" + bytes(10))
    with pytest.raises(TruncatedVideoError) as info:
        load_video(trunc)
    assert info.value.frame_index == 1


def test_rgbv_identity_container(tmp_path):
    payload = bytes(np.random.default_rng(1).integers(0, 256, 576, dtype=np.uint8))
    path = tmp_path / "v.rgbv"
    path.write_bytes(b"RGBV1\nw=8 h=8 n=3 fps=30\n" + payload)
    video = load_video(path)
    assert video.frames.shape == (3, 8, 8, 3)
    planar = video.frames.transpose(0, 3, 1, 2).tobytes()
    assert planar == payload


def test_rgbv_truncation_names_frame(tmp_path):
    path = tmp_path / "t.rgbv"
    path.write_bytes(b"RGBV1\nw=8 h=8 n=3 fps=30\n" + bytes(2 * 192))
    with pytest.raises(TruncatedVideoError) as info:
        load_video(path)
    assert info.value.frame_index == 2
    assert "frame 2" in str(info.value)


def test_rgbv_roundtrip_and_bad_header(tmp_path):
    v = _video(4, 9, 11)
    write_rgbv(tmp_path / "a.rgbv", v)
    assert np.array_equal(load_video(tmp_path / "a.rgbv").frames, v.frames)
    (tmp_path / "b.rgbv").write_bytes(b"RGBV1\nw=8 h=eight n=3 fps=30\n")
    with pytest.raises(VideoFormatError):
        load_video(tmp_path / "b.rgbv")
    (tmp_path / "c.bin").write_bytes(b"hello")
    with pytest.raises(VideoFormatError):
        load_video(tmp_path / "c.bin")


# ---------------------------------------------------------------------- pixels


@pytest.mark.parametrize(
    "rgb, expected",
    [((100, 100, 100), 100.0), ((255, 0, 0), 76.245), ((0, 0, 255), 29.07)],
)
def test_to_grayscale_values(rgb, expected):
    frame = np.broadcast_to(np.array(rgb, dtype=np.uint8), (8, 8, 3))
    np.testing.assert_allclose(to_grayscale(frame), expected, atol=1e-9)


@given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
def test_to_grayscale_range_and_gray_fixed_point(r, g, b):
    y = to_grayscale(np.array([[[r, g, b], [g, g, g]]], dtype=np.uint8))
    assert 0.0 <= y[0, 0] <= 255.0
    assert y[0, 1] == pytest.approx(g, abs=1e-9)


def test_resize_half_pixel_example():
    frame = np.array([[[0, 0, 0], [255, 255, 255]]], dtype=np.uint8)
    out = resize_bilinear(frame, 4, 1)
    assert out[0, :, 0].tolist() == [0, 64, 191, 255]


def test_resize_identity_and_constant():
    v = _video(1, 13, 17).frames[0]
    assert np.array_equal(resize_bilinear(v, 17, 13), v)
    const = np.full((10, 12, 3), (12, 200, 77), dtype=np.uint8)
    for w, h in [(3, 5), (40, 9), (1, 1)]:
        out = resize_bilinear(const, w, h)
        assert out.shape == (h, w, 3)
        assert np.all(out == np.array([12, 200, 77], dtype=np.uint8))


def test_resize_stack_matches_per_frame():
    v = _video(3, 20, 30).frames
    stacked = resize_bilinear(v, 16, 16)
    for i in range(3):
        assert np.array_equal(stacked[i], resize_bilinear(v[i], 16, 16))


# -------------------------------------------------------------------- sampling


@pytest.mark.parametrize(
    "T, k, expected",
    [(80, 8, [0, 10, 20, 30, 40, 50, 60, 70]), (8, 8, list(range(8))), (10, 4, [0, 2, 5, 7])],
)
def test_key_frame_indices(T, k, expected):
    assert key_frame_indices(T, k) == expected


def test_clip_lengths():
    assert [b - a for a, b in clip_bounds(80, 8)] == [10] * 8
    assert [b - a for a, b in clip_bounds(10, 4)] == [2, 3, 2, 3]
    assert [b - a for a, b in clip_bounds(5, 5)] == [1] * 5


def test_split_clips_resizes_and_partitions():
    video = _video(10, 20, 24)
    clips = split_clips(video, SamplingPlan(k=4, clip_edge=16))
    assert [len(c) for c in clips] == [2, 3, 2, 3]
    assert all(c.frames.shape[1:] == (16, 16, 3) for c in clips)
    keys = sample_key_frames(video, SamplingPlan(k=4, clip_edge=16))
    assert keys.indices == [0, 2, 5, 7]
    assert np.array_equal(keys.frames[1], video.frames[2])


def test_insufficient_frames():
    with pytest.raises(InsufficientFramesError):
        sample_key_frames(_video(3), SamplingPlan(k=4))
    with pytest.raises(InsufficientFramesError):
        split_clips(_video(3), SamplingPlan(k=4))


def test_sampling_plan_validation():
    with pytest.raises(ValueError):
        SamplingPlan(k=0)
    with pytest.raises(ValueError):
        SamplingPlan(clip_edge=8)


@settings(max_examples=300)
@given(st.integers(1, 500).flatmap(lambda T: st.tuples(st.just(T), st.integers(1, T))))
def test_clip_partition_and_key_frame_pairing(tk):
    T, k = tk
    bounds = clip_bounds(T, k)
    covered = [f for a, b in bounds for f in range(a, b)]
    assert covered == list(range(T))
    keys = key_frame_indices(T, k)
    assert all(a <= i < b for i, (a, b) in zip(keys, bounds))
    assert all(x < y for x, y in zip(keys, keys[1:]))
