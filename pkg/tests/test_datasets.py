import gzip
import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mgdl import datasets as ds
from mgdl.errors import (DimensionError, IdxError, IdxMagicError, IdxTruncatedError, IdxTypeError,
                         PpmError)


def _single(alpha=1.0, kappa=1.0, phase=0.0):
    return ds.SyntheticSpec("constant", (kappa,), (phase,), (alpha,))


# -- synthetic targets --------------------------------------------------------

def test_eval_lambda_examples():
    spec = _single()
    assert ds.eval_lambda(spec, 0.25) == pytest.approx(1.0, abs=1e-15)
    assert ds.eval_lambda(spec, 0.0) == 0.0


def test_setting_coefficients():
    s2 = ds.synthetic_setting(2, M=20)
    assert s2.alpha[19] == pytest.approx(0.05)
    assert s2.alpha[0] == pytest.approx(1.0)
    s4 = ds.synthetic_setting(4, M=20)
    assert s4.alpha[-1] == pytest.approx(1.0)
    assert ds.synthetic_setting(1, M=20).alpha == (1.0,) * 20
    assert ds.synthetic_setting(1, M=20).kappa[-1] == 200.0
    m1 = ds.manifold_setting(1)
    assert m1.M == 40 and m1.alpha[-1] == pytest.approx(1.0)


def test_x_varying_amplitudes():
    spec = ds.synthetic_setting(3, M=3, kappa_step=2)
    x = np.array([0.0, 0.4])
    expect = np.exp(-x)[:, None] * np.cos(np.outer(x, [1, 2, 3]))
    np.testing.assert_allclose(spec.amplitudes(x), expect)
    # direct sum
    y = sum(expect[:, j] * np.sin(2 * np.pi * spec.kappa[j] * x + spec.phases[j]) for j in range(3))
    np.testing.assert_allclose(ds.eval_lambda(spec, x), y, rtol=0, atol=1e-14)


def test_phases_seeded_and_in_range():
    a = ds.synthetic_setting(1, M=30, phase_seed=4)
    b = ds.synthetic_setting(1, M=30, phase_seed=4)
    assert a.phases == b.phases
    assert all(0 <= p < 2 * math.pi for p in a.phases)
    assert a.phases != ds.synthetic_setting(1, M=30, phase_seed=5).phases


def test_bad_specs():
    with pytest.raises(ValueError):
        ds.SyntheticSpec("wavy", (1.0,), (0.0,), (1.0,))
    with pytest.raises(ValueError):
        ds.SyntheticSpec("constant", (1.0, 2.0), (0.0,), (1.0,))
    with pytest.raises(ValueError):
        ds.make_synthetic_spec("constant", M=0)


def test_synthetic_split():
    spec = ds.synthetic_setting(1, M=3, kappa_step=2)
    d = ds.build_synthetic_split(spec, 3, 50, 40)
    np.testing.assert_array_equal(d.train.inputs[:, 0], [0.0, 0.5, 1.0])
    assert len(d.val) == 50 and len(d.test) == 40
    assert d.val.inputs.min() >= 0 and d.val.inputs.max() <= 1
    again = ds.build_synthetic_split(spec, 3, 50, 40)
    assert d.val.inputs.tobytes() == again.val.inputs.tobytes()
    assert not np.array_equal(d.val.inputs, d.test.inputs[:40])
    np.testing.assert_allclose(d.test.targets[:, 0], ds.eval_lambda(spec, d.test.inputs[:, 0]))
    with pytest.raises(ValueError):
        ds.build_synthetic_split(spec, 0, 1, 1)


# -- manifold -------------------------------------------------------------------

def test_eval_gamma_examples():
    np.testing.assert_allclose(ds.eval_gamma(4, 0.0), [1.0, 0.0])
    np.testing.assert_allclose(ds.eval_gamma(4, 1 / 16),
                               1.5 * np.array([math.cos(math.pi / 8), math.sin(math.pi / 8)]))
    x = np.linspace(0, 1, 37)
    np.testing.assert_allclose(np.linalg.norm(ds.eval_gamma(0, x), axis=1), 1.0)


def test_manifold_split():
    spec = ds.ManifoldSpec(0, ds.manifold_setting(1, M=4))
    d = ds.build_manifold_split(spec)
    assert d.train.inputs.shape == (12000, 2)
    np.testing.assert_allclose(np.linalg.norm(d.test.inputs, axis=1), 1.0)
    # distinct grid points in [0, 1) land on distinct circle points (x = 1 closes the loop)
    pts = np.round(d.train.inputs[:-1], 12)
    assert len(np.unique(pts, axis=0)) == 11999
    # targets are the 1-D target at the pre-image
    base = ds.build_synthetic_split(spec.target, 12000, 4000, 4000)
    np.testing.assert_array_equal(d.train.targets, base.train.targets)
    with pytest.raises(ValueError):
        ds.ManifoldSpec(1.5, spec.target)


# -- images ---------------------------------------------------------------------

def test_image_split_shapes():
    img = np.arange(4 * 4 * 3, dtype=np.uint8).reshape(4, 4, 3)
    d = ds.build_image_split(img)
    assert len(d.train) == 4 and len(d.test) == 16 and len(d.val) == 12
    np.testing.assert_array_equal(d.test.inputs[0], [0, 0])
    np.testing.assert_array_equal(d.test.inputs[-1], [1, 1])
    # every training coordinate is a test coordinate
    test_set = {tuple(r) for r in d.test.inputs}
    assert all(tuple(r) in test_set for r in d.train.inputs)


def test_image_split_odd_size_and_white():
    d = ds.build_image_split(np.zeros((5, 3, 3), dtype=np.uint8))
    assert len(d.train) == 3 * 2
    white = ds.build_image_split(np.full((2, 2, 3), 255, dtype=np.uint8))
    np.testing.assert_array_equal(white.train.targets, [[1.0, 1.0, 1.0]])


def test_image_split_rejects():
    with pytest.raises(ValueError):
        ds.build_image_split(np.zeros((0, 0, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        ds.build_image_split(np.zeros((1, 5, 3), dtype=np.uint8))


def test_ppm_roundtrip(tmp_path):
    img = ds.make_test_image(16)
    path = tmp_path / "card.ppm"
    ds.write_ppm(path, img)
    assert path.read_bytes().startswith(b"P6\n16 16\n255\n")
    np.testing.assert_array_equal(ds.read_ppm(path), img)


def test_ppm_with_comments():
    raw = b"P6\n# made by hand\n2 1\n# max\n255\n" + bytes([1, 2, 3, 4, 5, 6])
    img = ds.parse_ppm(raw)
    assert img.shape == (1, 2, 3)
    np.testing.assert_array_equal(img[0, 1], [4, 5, 6])


@pytest.mark.parametrize("raw", [
    b"P3\n1 1\n255\n1 2 3",
    b"P6\n1 1\n65535\n" + bytes(6),
    b"P6\n2 2\n255\n" + bytes(5),
    b"P6\n2",
])
def test_ppm_rejects(raw):
    with pytest.raises(PpmError):
        ds.parse_ppm(raw)


def test_test_image_is_deterministic():
    assert ds.make_test_image(64).tobytes() == ds.make_test_image(64).tobytes()
    assert ds.make_test_image(64).shape == (64, 64, 3)


# -- IDX ------------------------------------------------------------------------

IMAGE_FIXTURE = bytes.fromhex("00000803" "00000001" "00000002" "00000002") + bytes([0, 64, 128, 255])
LABEL_FIXTURE = bytes.fromhex("00000801" "00000003") + bytes([7, 0, 9])


def test_idx_fixtures():
    img = ds.parse_idx(IMAGE_FIXTURE)
    assert img.dims == (1, 2, 2)
    np.testing.assert_array_equal(img.data[0], [[0, 64], [128, 255]])
    lab = ds.parse_idx(LABEL_FIXTURE)
    assert lab.dims == (3,)
    assert lab.data.tolist() == [7, 0, 9]
    assert ds.encode_idx(img.data) == IMAGE_FIXTURE
    assert ds.encode_idx(lab.data) == LABEL_FIXTURE


@pytest.mark.parametrize("raw,err", [
    (b"\x01\x00\x08\x01" + struct.pack(">I", 1) + b"\x00", IdxMagicError),
    (b"\x00\x00", IdxMagicError),
    (b"\x00\x00\x0d\x01" + struct.pack(">I", 1) + bytes(4), IdxTypeError),
    (IMAGE_FIXTURE[:-1], IdxTruncatedError),
    (IMAGE_FIXTURE[:10], IdxTruncatedError),
    (IMAGE_FIXTURE + b"\x00", IdxTruncatedError),
])
def test_idx_errors(raw, err):
    with pytest.raises(err):
        ds.parse_idx(raw)


def test_idx_error_classes_distinct():
    classes = {IdxMagicError, IdxTypeError, IdxTruncatedError}
    assert len(classes) == 3
    assert all(issubclass(c, IdxError) for c in classes)
    assert not issubclass(IdxTypeError, IdxTruncatedError)


def test_load_idx_gz(tmp_path):
    p = tmp_path / "labels-idx1-ubyte.gz"
    p.write_bytes(gzip.compress(LABEL_FIXTURE))
    assert ds.load_idx(p).data.tolist() == [7, 0, 9]


@settings(max_examples=30, deadline=None)
@given(shape=st.lists(st.integers(1, 5), min_size=1, max_size=3), seed=st.integers(0, 1000))
def test_idx_roundtrip_property(shape, seed):
    arr = np.random.default_rng(seed).integers(0, 256, size=shape).astype(np.uint8)
    back = ds.parse_idx(ds.encode_idx(arr))
    assert back.dims == tuple(shape)
    np.testing.assert_array_equal(back.data, arr)


# -- MNIST targets -----------------------------------------------------------------

def _tiny_mnist(n_pool=10, n_test=4, seed=0):
    rng = np.random.default_rng(seed)
    return (rng.integers(0, 256, (n_pool, 3, 3)).astype(np.uint8), rng.integers(0, 10, n_pool),
            rng.integers(0, 256, (n_test, 3, 3)).astype(np.uint8), rng.integers(0, 10, n_test))


def test_radial_target_examples():
    labels = np.array([7, 3])
    x = np.zeros((2, 4))
    x[0, 0] = 1.0  # ||x|| = 1, kappa = 1/4 gives 2 pi kappa ||x|| = pi / 2
    t = ds.radial_target(x, labels, beta=1.0, kappa=0.25)
    expect = np.zeros(10)
    expect[7] = 2.0
    np.testing.assert_allclose(t[0], expect, atol=1e-15)
    np.testing.assert_array_equal(t[1], ds.one_hot([3])[0])  # zero image
    np.testing.assert_array_equal(ds.radial_target(np.ones((2, 4)), labels, 0.0, 3.0),
                                  ds.one_hot(labels))


def test_mnist_split():
    imgs, labs, timgs, tlabs = _tiny_mnist()
    spec = ds.MnistTargetSpec(beta=0.5, kappa=2.0, n_train=7, n_val=3, n_test=4)
    d = ds.build_mnist_split(imgs, labs, timgs, tlabs, spec, split_seed=1)
    tr, va = d.provenance["train_index"], d.provenance["val_index"]
    assert sorted(tr + va) == list(range(10))
    assert d.train.inputs.shape == (7, 9)
    assert d.train.inputs.max() <= 1.0
    np.testing.assert_array_equal(d.test.targets, ds.one_hot(tlabs))
    x0 = imgs[tr[0]].reshape(-1) / 255.0
    np.testing.assert_allclose(d.train.targets[0],
                               ds.radial_target(x0[None], labs[tr[:1]], 0.5, 2.0)[0])
    again = ds.build_mnist_split(imgs, labs, timgs, tlabs, spec, split_seed=1)
    assert again.train.targets.tobytes() == d.train.targets.tobytes()


def test_mnist_split_rejects():
    imgs, labs, timgs, tlabs = _tiny_mnist()
    spec = ds.MnistTargetSpec(n_train=7, n_val=3, n_test=4)
    with pytest.raises(DimensionError):
        ds.build_mnist_split(imgs, labs[:9], timgs, tlabs, spec)
    with pytest.raises(DimensionError):
        ds.build_mnist_split(imgs, labs, timgs, tlabs, ds.MnistTargetSpec(n_train=6, n_val=3, n_test=4))
    with pytest.raises(ValueError):
        ds.MnistTargetSpec(beta=-1)


# -- CSV export ---------------------------------------------------------------------

def test_split_csv_roundtrip(tmp_path):
    spec = ds.ManifoldSpec(4, ds.manifold_setting(2, M=3))
    d = ds.build_manifold_split(spec, 20, 7, 5)
    path = tmp_path / "data.csv"
    ds.write_split_csv(d, path)
    header = path.read_text().splitlines()[0]
    assert header == "x0,x1,y0,split"
    back = ds.read_split_csv(path)
    for a, b in ((d.train, back.train), (d.val, back.val), (d.test, back.test)):
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.targets, b.targets)


def test_dataset_split_rejects_nan_and_mismatch():
    good = ds.Pairs(np.zeros((2, 1)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        ds.DatasetSplit(good, ds.Pairs([[np.nan]], [[0.0]]), good)
    with pytest.raises(DimensionError):
        ds.DatasetSplit(good, ds.Pairs(np.zeros((1, 2)), [[0.0]]), good)
    with pytest.raises(DimensionError):
        ds.Pairs(np.zeros((2, 1)), np.zeros((3, 1)))
