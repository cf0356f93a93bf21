import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llvqa.backbones import (
    BuiltinMotionBackbone,
    BuiltinSemanticBackbone,
    FileFeatureProvider,
    make_provider,
    motion_features,
    motion_input,
    read_features,
    semantic_features,
    write_features,
)
from llvqa.exceptions import (
    FeatureDimensionError,
    FeatureFileError,
    FeatureLookupError,
    FeatureMagicError,
    FeatureTruncatedError,
    FeatureVersionError,
)
from llvqa.media_io import Video


def naive_conv2d(x, w, b, stride=2):
    c, h, wd = x.shape
    o, _, kh, kw = w.shape
    oh, ow = (h - kh) // stride + 1, (wd - kw) // stride + 1
    out = np.empty((o, oh, ow))
    for oc in range(o):
        for i in range(oh):
            for j in range(ow):
                patch = x[:, i * stride : i * stride + kh, j * stride : j * stride + kw]
                out[oc, i, j] = np.sum(w[oc] * patch) + b[oc]
    return out


def naive_conv3d(x, w, b, stride=2):
    c, t, h, wd = x.shape
    o, _, kt, kh, kw = w.shape
    ot, oh, ow = (t - kt) // stride + 1, (h - kh) // stride + 1, (wd - kw) // stride + 1
    out = np.empty((o, ot, oh, ow))
    for oc in range(o):
        for s in range(ot):
            for i in range(oh):
                for j in range(ow):
                    patch = x[
                        :,
                        s * stride : s * stride + kt,
                        i * stride : i * stride + kh,
                        j * stride : j * stride + kw,
                    ]
                    out[oc, s, i, j] = np.sum(w[oc] * patch) + b[oc]
    return out


def relu(a):
    return np.maximum(a, 0.0)


def semantic_oracle(net, x):
    (w1, b1), (w2, b2), (w3, b3) = net.layers
    a = relu(naive_conv2d(relu(naive_conv2d(x, w1, b1)), w2, b2))
    s = relu(naive_conv2d(a, w3, b3))
    return np.concatenate([a.mean(axis=(1, 2)), s.mean(axis=(1, 2))])


def motion_oracle(net, x):
    (w1, b1), (w2, b2) = net.layers
    return relu(naive_conv3d(relu(naive_conv3d(x, w1, b1)), w2, b2)).mean(axis=(1, 2, 3))


# ------------------------------------------------------------------ builtins


@pytest.mark.parametrize("seed", [0, 5])
def test_semantic_black_frame_matches_oracle(seed):
    net = BuiltinSemanticBackbone(seed)
    out = semantic_features(np.zeros((40, 50, 3), np.uint8), net)
    assert out.shape == (48,)
    expected = semantic_oracle(net, np.zeros((3, 64, 64)))
    np.testing.assert_allclose(out, expected, atol=1e-6)
    assert np.any(out > 0)


def test_semantic_random_frame_matches_oracle():
    net = BuiltinSemanticBackbone(2)
    frame = np.random.default_rng(0).integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
    x = frame.transpose(2, 0, 1) / 255.0
    np.testing.assert_allclose(net(frame), semantic_oracle(net, x), atol=1e-6)


def test_semantic_determinism():
    frame = np.random.default_rng(1).integers(0, 256, size=(30, 30, 3), dtype=np.uint8)
    a = BuiltinSemanticBackbone(3)(frame)
    b = BuiltinSemanticBackbone(3)(frame.copy())
    assert a.tobytes() == b.tobytes()
    assert BuiltinSemanticBackbone(4)(frame).tobytes() != a.tobytes()


def test_motion_black_clip_matches_oracle():
    net = BuiltinMotionBackbone(1)
    out = motion_features(Video(np.zeros((5, 64, 64, 3), np.uint8)), net)
    assert out.shape == (16,)
    np.testing.assert_allclose(out, motion_oracle(net, np.zeros((1, 8, 64, 64))), atol=1e-6)


def test_motion_random_clip_matches_oracle():
    net = BuiltinMotionBackbone(1)
    frames = np.random.default_rng(2).integers(0, 256, size=(10, 64, 64, 3), dtype=np.uint8)
    np.testing.assert_allclose(net(frames), motion_oracle(net, motion_input(frames)), atol=1e-6)


def test_motion_input_subsampling_and_padding():
    frames = np.stack([np.full((64, 64, 3), 10 * i, np.uint8) for i in range(12)])
    vol = motion_input(frames)
    assert vol.shape == (1, 8, 64, 64)
    picked = [j * 12 // 8 for j in range(8)]
    np.testing.assert_allclose(vol[0, :, 0, 0], [10 * i / 255 for i in picked])
    short = motion_input(frames[:3])
    assert np.all(short[0, 3:] == 0) and short[0, 2, 0, 0] == pytest.approx(20 / 255)


def test_motion_order_sensitivity():
    net = BuiltinMotionBackbone(0)
    const = np.repeat(np.full((1, 64, 64, 3), 90, np.uint8), 8, axis=0)
    perm = np.random.default_rng(0).permutation(8)
    assert net(const).tobytes() == net(const[perm]).tobytes()
    varied = np.random.default_rng(5).integers(0, 256, size=(8, 64, 64, 3), dtype=np.uint8)
    assert not np.array_equal(net(varied), net(varied[::-1]))


def test_builtin_weights_are_frozen():
    net = BuiltinSemanticBackbone(0)
    digest = net.weights_digest()
    with pytest.raises(ValueError):
        net.layers[0][0][0, 0, 0, 0] = 1.0
    net(np.zeros((64, 64, 3), np.uint8))
    assert net.weights_digest() == digest
    assert net.identifier == "builtin-semantic/v1/seed=0/dim=48"


# ---------------------------------------------------------------------- LVQF


def test_lvqf_roundtrip_and_empty(tmp_path):
    vecs = np.random.default_rng(0).standard_normal((3, 4)).astype(np.float32)
    write_features(tmp_path / "a.lvqf", vecs)
    assert read_features(tmp_path / "a.lvqf").astype(np.float32).tobytes() == vecs.tobytes()
    write_features(tmp_path / "e.lvqf", [], dim=4)
    empty = read_features(tmp_path / "e.lvqf")
    assert empty.shape == (0, 4)


@settings(max_examples=200, deadline=None)
@given(
    st.integers(0, 12),
    st.integers(1, 40),
    st.integers(0, 2**32 - 1),
)
def test_lvqf_roundtrip_property(tmp_path_factory, k, d, seed):
    path = tmp_path_factory.mktemp("lvqf") / "v.lvqf"
    vecs = (np.random.default_rng(seed).standard_normal((k, d)) * 100).astype(np.float32)
    write_features(path, vecs, dim=d)
    back = read_features(path, dim=d)
    assert back.shape == (k, d)
    assert back.astype(np.float32).tobytes() == vecs.tobytes()


def test_lvqf_errors_have_distinct_codes(tmp_path):
    write_features(tmp_path / "a.lvqf", np.ones((2, 3)))
    raw = (tmp_path / "a.lvqf").read_bytes()
    cases = {
        "magic": (b"XXXX" + raw[4:], FeatureMagicError, None),
        "version": (raw[:4] + (9).to_bytes(4, "little") + raw[8:], FeatureVersionError, None),
        "dim": (raw, FeatureDimensionError, 5),
        "trunc": (raw[:-3], FeatureTruncatedError, None),
    }
    codes = set()
    for name, (data, err, dim) in cases.items():
        p = tmp_path / f"{name}.lvqf"
        p.write_bytes(data)
        with pytest.raises(err) as info:
            read_features(p, dim=dim)
        assert isinstance(info.value, FeatureFileError)
        codes.add(info.value.code)
    assert len(codes) == 4
    with pytest.raises(FeatureDimensionError):
        write_features(tmp_path / "x.lvqf", np.ones((2, 3)), dim=4)


# -------------------------------------------------------------- file provider


def test_file_provider_single_file_and_lookup_error(tmp_path):
    table = np.arange(12, dtype=np.float32).reshape(3, 4)
    write_features(tmp_path / "sf.lvqf", table)
    prov = FileFeatureProvider(tmp_path / "sf.lvqf", dim=4, role="semantic")
    np.testing.assert_array_equal(prov(None, index=2), table[2])
    with pytest.raises(FeatureLookupError, match="frame index 3"):
        prov(None, index=3)
    motion = FileFeatureProvider(tmp_path / "sf.lvqf", dim=4, role="motion")
    with pytest.raises(FeatureLookupError, match="clip index 7"):
        motion(None, index=7)
    with pytest.raises(FeatureDimensionError):
        FileFeatureProvider(tmp_path / "sf.lvqf", dim=5)(None, index=0)


def test_file_provider_directory(tmp_path):
    write_features(tmp_path / "clipA.lvqf", np.ones((2, 3)))
    prov = make_provider(f"file:{tmp_path}", "motion", dim=3)
    assert prov.identifier == "file/motion/dim=3"
    np.testing.assert_array_equal(prov(None, index=1, key="clipA"), np.ones(3))
    with pytest.raises(FeatureLookupError):
        prov(None, index=0, key="missing")
    with pytest.raises(ValueError):
        make_provider("file:x", "semantic")
    with pytest.raises(ValueError):
        make_provider("torch", "semantic")
