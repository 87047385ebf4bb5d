"""Regression datasets: oscillatory 1-D functions, manifold curves, images, MNIST.

Also the file readers/writers these tasks need (IDX, binary PPM, split CSV).
"""
from __future__ import annotations

import csv
import gzip
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, IdxMagicError, IdxTruncatedError, IdxTypeError, PpmError
from .nn import make_rng

AMPLITUDE_RULES = ("constant", "decreasing", "x-varying", "increasing")

# (rule, a, b) with alpha_j = a + b*j for the fixed rules
SYNTHETIC_SETTINGS = {
    1: ("constant", 1.0, 0.0),
    2: ("decreasing", 1.05, -0.05),
    3: ("x-varying", 0.0, 0.0),
    4: ("increasing", 0.0, 0.05),
}
MANIFOLD_SETTINGS = {
    1: ("increasing", 0.0, 0.025),
    2: ("x-varying", 0.0, 0.0),
}


@dataclass(frozen=True)
class SyntheticSpec:
    """``lambda(x) = sum_j alpha_j sin(2 pi kappa_j x + phi_j)`` on [0, 1].

    For the ``x-varying`` rule ``alpha_j(x) = exp(-x) cos(j x)`` and
    ``alpha`` is ignored.
    """
    rule: str
    kappa: tuple[float, ...]
    phases: tuple[float, ...]
    alpha: tuple[float, ...] = ()
    phase_seed: int = 0

    def __post_init__(self):
        if self.rule not in AMPLITUDE_RULES:
            raise ValueError(f"unknown amplitude rule {self.rule!r}")
        if len(self.kappa) < 1 or len(self.kappa) != len(self.phases):
            raise ValueError("need M >= 1 frequencies and one phase per frequency")
        if self.rule != "x-varying" and len(self.alpha) != len(self.kappa):
            raise ValueError("need one amplitude per frequency")

    @property
    def M(self) -> int:
        return len(self.kappa)

    def amplitudes(self, x) -> np.ndarray:
        """Amplitudes as an ``(len(x), M)`` array."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if self.rule == "x-varying":
            j = np.arange(1, self.M + 1)
            return np.exp(-x)[:, None] * np.cos(np.outer(x, j))
        return np.broadcast_to(np.asarray(self.alpha), (x.size, self.M))


def make_synthetic_spec(rule: str, M: int = 20, kappa_step: float = 10.0,
                        a: float = 1.0, b: float = 0.0, phase_seed: int = 0) -> SyntheticSpec:
    """``kappa_j = kappa_step * j``, ``alpha_j = a + b j``, phases ``U(0, 2 pi)``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    j = np.arange(1, M + 1)
    phases = make_rng(phase_seed).uniform(0.0, 2.0 * math.pi, size=M)
    alpha = () if rule == "x-varying" else tuple(float(v) for v in a + b * j)
    return SyntheticSpec(rule, tuple(float(k) for k in kappa_step * j),
                         tuple(float(p) for p in phases), alpha, phase_seed)


def synthetic_setting(setting: int, M: int = 20, kappa_step: float = 10.0,
                      phase_seed: int = 0) -> SyntheticSpec:
    rule, a, b = SYNTHETIC_SETTINGS[setting]
    return make_synthetic_spec(rule, M, kappa_step, a, b, phase_seed)


def manifold_setting(setting: int, M: int = 40, kappa_step: float = 10.0,
                     phase_seed: int = 0) -> SyntheticSpec:
    rule, a, b = MANIFOLD_SETTINGS[setting]
    return make_synthetic_spec(rule, M, kappa_step, a, b, phase_seed)


def eval_lambda(spec: SyntheticSpec, x):
    """Evaluate the target at scalar or array ``x``."""
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    alpha = spec.amplitudes(xs)
    arg = 2.0 * math.pi * np.outer(xs, spec.kappa) + np.asarray(spec.phases)
    y = np.sum(alpha * np.sin(arg), axis=1)
    return float(y[0]) if scalar else y


@dataclass
class Pairs:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.inputs.ndim == 1:
            self.inputs = self.inputs.reshape(-1, 1)
        if self.targets.ndim == 1:
            self.targets = self.targets.reshape(-1, 1)
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise DimensionError("inputs and targets differ in length")

    def __len__(self):
        return self.inputs.shape[0]


@dataclass
class DatasetSplit:
    train: Pairs
    val: Pairs
    test: Pairs
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = {p.inputs.shape[1] for p in (self.train, self.val, self.test) if len(p)}
        if len(dims) > 1:
            raise DimensionError(f"splits disagree on input dimension: {sorted(dims)}")
        for p in (self.train, self.val, self.test):
            if np.isnan(p.inputs).any() or np.isnan(p.targets).any():
                raise ValueError("dataset contains NaN")


def train_grid(n: int) -> np.ndarray:
    """``n`` equally spaced points on [0, 1] including both endpoints."""
    if n < 1:
        raise ValueError("need at least one point")
    return np.linspace(0.0, 1.0, n)


def build_synthetic_split(spec: SyntheticSpec, n_train=6000, n_val=2000, n_test=2000,
                          val_seed=0, test_seed=1) -> DatasetSplit:
    if min(n_train, n_val, n_test) < 1:
        raise ValueError("split sizes must be >= 1")
    x_tr = train_grid(n_train)
    x_va = make_rng(val_seed).uniform(0.0, 1.0, n_val)
    x_te = make_rng(test_seed).uniform(0.0, 1.0, n_test)
    prov = {"generator": "synthetic", "rule": spec.rule, "kappa": list(spec.kappa),
            "phases": list(spec.phases), "phase_seed": spec.phase_seed,
            "val_seed": val_seed, "test_seed": test_seed}
    return DatasetSplit(Pairs(x_tr, eval_lambda(spec, x_tr)),
                        Pairs(x_va, eval_lambda(spec, x_va)),
                        Pairs(x_te, eval_lambda(spec, x_te)), prov)


@dataclass(frozen=True)
class ManifoldSpec:
    q: int
    target: SyntheticSpec

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 0:
            raise ValueError(f"q must be a non-negative integer, got {self.q}")


def eval_gamma(q: int, x):
    """Flower curve ``[1 + sin(2 pi q x)/2] (cos 2 pi x, sin 2 pi x)``; shape ``(n, 2)``."""
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    r = 1.0 + np.sin(2.0 * math.pi * q * xs) / 2.0
    pts = np.column_stack([r * np.cos(2.0 * math.pi * xs), r * np.sin(2.0 * math.pi * xs)])
    return pts[0] if scalar else pts


def build_manifold_split(spec: ManifoldSpec, n_train=12000, n_val=4000, n_test=4000,
                         val_seed=0, test_seed=1) -> DatasetSplit:
    base = build_synthetic_split(spec.target, n_train, n_val, n_test, val_seed, test_seed)
    parts = []
    for p in (base.train, base.val, base.test):
        # amplitudes were evaluated at the pre-image x, as the targets require
        parts.append(Pairs(eval_gamma(spec.q, p.inputs[:, 0]), p.targets))
    prov = dict(base.provenance, generator="manifold", q=spec.q)
    return DatasetSplit(*parts, provenance=prov)


# -- images ---------------------------------------------------------------

def _ppm_tokens(data: bytes, count: int):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PpmError("truncated PPM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1  # a single whitespace byte ends the header


def parse_ppm(data: bytes) -> np.ndarray:
    """Binary PPM (P6, maxval 255) to a ``(H, W, 3)`` uint8 array."""
    tokens, pos = _ppm_tokens(data, 4)
    if tokens[0] != b"P6":
        raise PpmError(f"not a binary PPM (magic {tokens[0]!r})")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise PpmError("malformed PPM header") from exc
    if maxval != 255:
        raise PpmError(f"only maxval 255 is supported, got {maxval}")
    if w < 1 or h < 1:
        raise PpmError("empty image")
    need = w * h * 3
    payload = data[pos:pos + need]
    if len(payload) != need:
        raise PpmError(f"PPM payload has {len(payload)} bytes, expected {need}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).copy()


def read_ppm(path) -> np.ndarray:
    return parse_ppm(Path(path).read_bytes())


def encode_ppm(image) -> bytes:
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise PpmError(f"expected an (H, W, 3) raster, got {img.shape}")
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8) if img.dtype != np.uint8 else img
    h, w, _ = img.shape
    return b"P6\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def write_ppm(path, image) -> None:
    Path(path).write_bytes(encode_ppm(image))


def pixel_coordinates(h: int, w: int) -> np.ndarray:
    """Normalised (row, col) of every pixel in row-major order; corners map to 0 and 1."""
    rows = np.arange(h) / (h - 1)
    cols = np.arange(w) / (w - 1)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.column_stack([rr.ravel(), cc.ravel()])


def build_image_split(image, stride: int = 2) -> DatasetSplit:
    """Train on the even-row/even-col grid, test on all pixels.

    Validation uses the pixels left out of the training grid.
    """
    img = np.asarray(image)
    if img.size == 0:
        raise ValueError("empty image")
    if img.ndim != 3 or img.shape[2] != 3:
        raise DimensionError(f"expected an (H, W, 3) raster, got {img.shape}")
    h, w, _ = img.shape
    if h < 2 or w < 2:
        raise ValueError("image must be at least 2x2")
    coords = pixel_coordinates(h, w)
    rgb = img.reshape(-1, 3).astype(np.float64) / 255.0
    mask = np.zeros((h, w), dtype=bool)
    mask[::stride, ::stride] = True
    m = mask.ravel()
    prov = {"generator": "image", "height": h, "width": w, "stride": stride}
    return DatasetSplit(Pairs(coords[m], rgb[m]), Pairs(coords[~m], rgb[~m]),
                        Pairs(coords, rgb), prov)


def make_test_image(size: int = 64) -> np.ndarray:
    """Deterministic RGB test card mixing smooth shading, edges and fine stripes."""
    t = np.arange(size) / (size - 1)
    y, x = np.meshgrid(t, t, indexing="ij")
    r = np.hypot(x - 0.5, y - 0.45)
    red = 0.5 + 0.5 * np.cos(2 * math.pi * 3 * r)
    green = np.clip(x + 0.4 * (r < 0.25), 0, 1)
    blue = 0.5 + 0.5 * np.sin(2 * math.pi * (4 * x + 2 * y)) * (y > 0.5)
    checker = ((np.floor(x * 8) + np.floor(y * 8)) % 2) * (x > 0.6) * (y < 0.4)
    img = np.stack([red, green, blue], axis=-1)
    img[checker > 0] = [0.95, 0.9, 0.1]
    return np.clip(np.rint(img * 255), 0, 255).astype(np.uint8)


# -- MNIST ----------------------------------------------------------------

@dataclass(frozen=True)
class IdxArray:
    dims: tuple[int, ...]
    data: np.ndarray  # uint8, shaped ``dims``


def parse_idx(data: bytes) -> IdxArray:
    """Parse an IDX stream holding unsigned bytes (type code 0x08)."""
    if len(data) < 4 or data[0] != 0 or data[1] != 0:
        raise IdxMagicError("bad IDX magic: expected two zero bytes")
    if data[2] != 0x08:
        raise IdxTypeError(f"unsupported IDX element type 0x{data[2]:02x}; only unsigned byte")
    ndim = data[3]
    header = 4 + 4 * ndim
    if ndim == 0 or len(data) < header:
        raise IdxTruncatedError("IDX header is truncated")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    count = math.prod(dims)
    payload = data[header:]
    if len(payload) < count:
        raise IdxTruncatedError(f"IDX payload has {len(payload)} bytes, expected {count}")
    if len(payload) > count:
        raise IdxTruncatedError(f"IDX payload has {len(payload) - count} trailing bytes")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(dims).copy()
    return IdxArray(tuple(dims), arr)


def encode_idx(array) -> bytes:
    arr = np.asarray(array, dtype=np.uint8)
    return bytes([0, 0, 0x08, arr.ndim]) + struct.pack(f">{arr.ndim}I", *arr.shape) + arr.tobytes()


def load_idx(path) -> IdxArray:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".gz":
        raw = gzip.decompress(raw)
    return parse_idx(raw)


@dataclass(frozen=True)
class MnistTargetSpec:
    beta: float = 1.0
    kappa: float = 1.0
    n_train: int = 45000
    n_val: int = 15000
    n_test: int = 10000

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")


def one_hot(labels, classes: int = 10) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def radial_target(x, labels, beta: float, kappa: float) -> np.ndarray:
    """``tau_0(x) (1 + beta sin(2 pi kappa ||x||_2))`` row by row."""
    x = np.asarray(x, dtype=np.float64)
    wave = np.sin(2.0 * math.pi * kappa * np.linalg.norm(x, axis=1))
    return one_hot(labels) * (1.0 + beta * wave)[:, None]


def build_mnist_split(images, labels, test_images, test_labels, spec: MnistTargetSpec,
                      split_seed: int = 0) -> DatasetSplit:
    """Noisy train/validation targets from a seeded shuffle; clean test targets."""
    images = np.asarray(images)
    test_images = np.asarray(test_images)
    labels = np.asarray(labels)
    test_labels = np.asarray(test_labels)
    if images.shape[0] != labels.shape[0] or test_images.shape[0] != test_labels.shape[0]:
        raise DimensionError("image and label counts differ")
    n_pool = images.shape[0]
    if spec.n_train + spec.n_val != n_pool:
        raise DimensionError(
            f"n_train + n_val = {spec.n_train + spec.n_val} but the pool has {n_pool} samples")
    if test_images.shape[0] != spec.n_test:
        raise DimensionError(f"expected {spec.n_test} test samples, got {test_images.shape[0]}")
    x = images.reshape(n_pool, -1).astype(np.float64) / 255.0
    x_test = test_images.reshape(test_images.shape[0], -1).astype(np.float64) / 255.0
    perm = make_rng(split_seed).permutation(n_pool)
    tr, va = perm[:spec.n_train], perm[spec.n_train:]
    prov = {"generator": "mnist", "beta": spec.beta, "kappa": spec.kappa,
            "split_seed": split_seed, "train_index": tr.tolist(), "val_index": va.tolist()}
    return DatasetSplit(
        Pairs(x[tr], radial_target(x[tr], labels[tr], spec.beta, spec.kappa)),
        Pairs(x[va], radial_target(x[va], labels[va], spec.beta, spec.kappa)),
        Pairs(x_test, one_hot(test_labels)),
        prov)


# -- CSV export -------------------------------------------------------------

def write_split_csv(split: DatasetSplit, path) -> None:
    d_in = split.train.inputs.shape[1]
    d_out = split.train.targets.shape[1]
    header = [f"x{i}" for i in range(d_in)] + [f"y{i}" for i in range(d_out)] + ["split"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for tag, p in (("train", split.train), ("val", split.val), ("test", split.test)):
            for xi, yi in zip(p.inputs, p.targets):
                w.writerow([repr(float(v)) for v in xi] + [repr(float(v)) for v in yi] + [tag])


def read_split_csv(path) -> DatasetSplit:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d_in = sum(1 for h in header if h.startswith("x"))
    parts = {}
    for tag in ("train", "val", "test"):
        sel = [r for r in body if r[-1] == tag]
        vals = np.array([[float(v) for v in r[:-1]] for r in sel]).reshape(len(sel), len(header) - 1)
        parts[tag] = Pairs(vals[:, :d_in], vals[:, d_in:])
    return DatasetSplit(parts["train"], parts["val"], parts["test"])
