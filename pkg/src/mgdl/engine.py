"""Grade-by-grade training (MGDL) and the end-to-end baseline (SGDL).

Grade ``l`` trains a shallow network on ``(x^l, e^l)`` where ``x^l`` is the
last hidden layer of the frozen stack built by grades ``1..l-1`` and ``e^l``
is what those grades left unexplained. The final predictor is the sum of
the per-grade outputs.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import nn
from .errors import DimensionError
from .nn import MlpParams, MlpSpec, TrainConfig

log = logging.getLogger(__name__)

MONOTONE_RTOL = 1e-12
ZERO_FUNCTION_TOL = 1e-10


@dataclass(frozen=True)
class GradeSpec:
    """Hidden widths of the trainable network added in one grade, plus its schedule."""
    hidden_widths: tuple[int, ...]
    train: TrainConfig

    def __post_init__(self):
        hw = tuple(int(w) for w in self.hidden_widths)
        if not hw:
            raise ValueError("a grade needs at least one hidden layer (depth >= 2)")
        if any(w < 1 for w in hw):
            raise ValueError(f"hidden widths must be >= 1, got {hw}")
        object.__setattr__(self, "hidden_widths", hw)

    def mlp_spec(self, input_dim: int, output_dim: int) -> MlpSpec:
        return MlpSpec((input_dim, *self.hidden_widths, output_dim))


@dataclass
class GradeRecord:
    index: int
    params: MlpParams
    train_loss: list[float]
    val_loss: list[float]
    lr: list[float]
    best_epoch: int
    residue_norm: float = math.nan
    function_norm: float = math.nan
    wall_time: float = 0.0

    @property
    def spec(self) -> MlpSpec:
        return self.params.spec


@dataclass
class ComposedModel:
    grades: list[GradeRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.grades)

    def feature_prefix(self, l: int) -> list[GradeRecord]:
        """Frozen grades whose hidden stacks feed grade ``l`` (1-based); empty for grade 1."""
        return self.grades[:l - 1]


@dataclass
class ResidueSet:
    train: np.ndarray
    val: np.ndarray

    @classmethod
    def from_targets(cls, y_train, y_val) -> "ResidueSet":
        return cls(np.array(y_train, dtype=np.float64), np.array(y_val, dtype=np.float64))


@dataclass
class MonotonicReport:
    passed: bool
    norms: list[float]
    violations: list[tuple[int, float, float]]

    def __bool__(self):
        return self.passed


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a.reshape(-1, 1) if a.ndim == 1 else a


def feature_chain(model: ComposedModel, X) -> list[np.ndarray]:
    """``[x^1, x^2, ..., x^{L+1}]``, each computed once from the previous one."""
    feats = [np.ascontiguousarray(_as_2d(X))]
    for rec in model.grades:
        x = feats[-1]
        if x.shape[1] != rec.spec.input_dim:
            raise DimensionError(
                f"grade {rec.index} expects {rec.spec.input_dim} input features, got {x.shape[1]}")
        feats.append(nn.last_hidden(rec.params, x))
    return feats


def compute_features(model: ComposedModel, X) -> np.ndarray:
    """Input to the next grade: the last hidden layer of the frozen composition."""
    return feature_chain(model, X)[-1]


def grade_outputs(model: ComposedModel, X) -> list[np.ndarray]:
    """Per-grade outputs ``g_l(x)`` on one shared feature cache."""
    if not model.grades:
        raise ValueError("model has no trained grades")
    feats = feature_chain(model, X)
    return [nn.predict(rec.params, feats[i]) for i, rec in enumerate(model.grades)]


def predict(model: ComposedModel, X) -> np.ndarray:
    outs = grade_outputs(model, X)
    total = outs[0].copy()
    for g in outs[1:]:
        total += g
    return total


def update_residue(residues: ResidueSet, out_train, out_val) -> ResidueSet:
    out_train = _as_2d(out_train)
    out_val = _as_2d(out_val)
    if out_train.shape != residues.train.shape or out_val.shape != residues.val.shape:
        raise DimensionError("grade outputs do not align with residues")
    return ResidueSet(residues.train - out_train, residues.val - out_val)


def check_residual_monotonic(norms: Sequence[float],
                             function_norms: Sequence[float] | None = None) -> MonotonicReport:
    """Residue norms must strictly fall unless the grade learned the zero function.

    ``norms[i]`` is ``||e^{i+1}||``; ``function_norms[i]`` is the norm of the
    function learned by the grade that produced ``norms[i + 1]``.
    """
    norms = [float(x) for x in norms]
    if len(norms) < 2:
        raise ValueError("need at least two residue norms")
    if function_norms is None:
        function_norms = [math.inf] * (len(norms) - 1)
    violations = []
    for i in range(len(norms) - 1):
        before, after = norms[i], norms[i + 1]
        if after < before * (1.0 + MONOTONE_RTOL):
            continue
        if function_norms[i] <= ZERO_FUNCTION_TOL:
            continue
        violations.append((i + 2, before, after))
    return MonotonicReport(not violations, norms, violations)


def train_grade(residues: ResidueSet, feats_train, feats_val, spec: GradeSpec,
                rng: np.random.Generator, index: int = 1,
                on_epoch: Callable | None = None) -> GradeRecord:
    """Fit grade ``index`` to the current residues; earlier grades are not touched."""
    feats_train = _as_2d(feats_train)
    if feats_train.shape[0] != residues.train.shape[0]:
        raise DimensionError("features and residues are not aligned")
    mspec = spec.mlp_spec(feats_train.shape[1], residues.train.shape[1])
    t0 = time.perf_counter()
    fr = nn.fit(mspec, feats_train, residues.train, spec.train, rng,
                feats_val, residues.val, on_epoch=on_epoch)
    return GradeRecord(index=index, params=fr.params, train_loss=fr.train_loss,
                       val_loss=fr.val_loss, lr=fr.lr, best_epoch=fr.best_epoch,
                       wall_time=time.perf_counter() - t0)


@dataclass
class Snapshot:
    epoch: int
    grade: int
    values: np.ndarray


@dataclass
class MgdlResult:
    model: ComposedModel
    residues: ResidueSet
    residue_norms: list[float]
    function_norms: list[float]
    monotonic: MonotonicReport
    snapshots: list[Snapshot] = field(default_factory=list)

    @property
    def tr_rse(self) -> list[float]:
        y2 = self.residue_norms[0] ** 2
        return [n * n / y2 for n in self.residue_norms[1:]]


@dataclass
class SgdlResult:
    params: MlpParams
    train_loss: list[float]
    val_loss: list[float]
    lr: list[float]
    best_epoch: int
    residue_norm: float
    wall_time: float
    snapshots: list[Snapshot] = field(default_factory=list)


def _grade_rng(seed: int, grade: int) -> np.random.Generator:
    return nn.make_rng(int(seed), int(grade))


def run_mgdl(X_train, Y_train, X_val, Y_val, grades: Sequence[GradeSpec], seed: int = 0,
             emit: Callable[[dict], None] | None = None, probe=None,
             snapshot_every: int = 0) -> MgdlResult:
    """Train ``len(grades)`` grades in sequence.

    ``emit`` receives one dict per epoch and one summary dict per grade.
    If ``probe`` inputs are given, the composed prediction on them is
    recorded every ``snapshot_every`` epochs (and at each grade's last epoch).
    """
    if not grades:
        raise ValueError("MGDL needs at least one grade")
    X_train = _as_2d(X_train)
    X_val = _as_2d(X_val)
    residues = ResidueSet.from_targets(_as_2d(Y_train), _as_2d(Y_val))
    model = ComposedModel()
    feats_train, feats_val = X_train, X_val
    probe_feat = None if probe is None else _as_2d(probe)
    probe_base = None if probe is None else np.zeros((probe_feat.shape[0], residues.train.shape[1]))
    norms = [float(np.linalg.norm(residues.train))]
    fnorms: list[float] = []
    snapshots: list[Snapshot] = []
    offset = 0

    for l, gspec in enumerate(grades, start=1):
        on_epoch = _make_hook(emit, l, offset, gspec.train.epochs, probe_feat, probe_base,
                              snapshot_every, snapshots)
        rec = train_grade(residues, feats_train, feats_val, gspec, _grade_rng(seed, l),
                          index=l, on_epoch=on_epoch)
        out_train = nn.predict(rec.params, feats_train)
        out_val = nn.predict(rec.params, feats_val) if len(feats_val) else residues.val[:0]
        residues = update_residue(residues, out_train, out_val)
        rec.residue_norm = float(np.linalg.norm(residues.train))
        rec.function_norm = float(np.linalg.norm(out_train))
        norms.append(rec.residue_norm)
        fnorms.append(rec.function_norm)
        model.grades.append(rec)
        _emit_summary(emit, rec, residues, norms)

        step = check_residual_monotonic(norms[-2:], fnorms[-1:])
        if not step:
            log.warning("grade %d did not reduce the training residue: %.6g -> %.6g",
                        l, norms[-2], norms[-1])

        if probe_feat is not None:
            probe_base = probe_base + nn.predict(rec.params, probe_feat)
        if l < len(grades):
            feats_train = nn.last_hidden(rec.params, feats_train)
            if len(feats_val):
                feats_val = nn.last_hidden(rec.params, feats_val)
            if probe_feat is not None:
                probe_feat = nn.last_hidden(rec.params, probe_feat)
        offset += gspec.train.epochs

    report = check_residual_monotonic(norms, fnorms)
    return MgdlResult(model, residues, norms, fnorms, report, snapshots)


def run_sgdl(X_train, Y_train, X_val, Y_val, hidden_widths: Sequence[int], train: TrainConfig,
             seed: int = 0, emit: Callable[[dict], None] | None = None, probe=None,
             snapshot_every: int = 0) -> SgdlResult:
    """End-to-end training of one deep network; logs like a single grade."""
    gspec = GradeSpec(tuple(hidden_widths), train)
    X_train = _as_2d(X_train)
    Y_train = _as_2d(Y_train)
    residues = ResidueSet.from_targets(Y_train, _as_2d(Y_val))
    probe_feat = None if probe is None else _as_2d(probe)
    probe_base = None if probe is None else np.zeros((probe_feat.shape[0], Y_train.shape[1]))
    snapshots: list[Snapshot] = []
    on_epoch = _make_hook(emit, 1, 0, train.epochs, probe_feat, probe_base, snapshot_every, snapshots)
    rec = train_grade(residues, X_train, _as_2d(X_val), gspec, _grade_rng(seed, 1),
                      index=1, on_epoch=on_epoch)
    out = nn.predict(rec.params, X_train)
    rec.residue_norm = float(np.linalg.norm(Y_train - out))
    rec.function_norm = float(np.linalg.norm(out))
    _emit_summary(emit, rec, None, [float(np.linalg.norm(Y_train)), rec.residue_norm])
    return SgdlResult(rec.params, rec.train_loss, rec.val_loss, rec.lr, rec.best_epoch,
                      rec.residue_norm, rec.wall_time, snapshots)


def _make_hook(emit, grade, offset, epochs, probe_feat, probe_base, every, snapshots):
    want_snap = probe_feat is not None and every > 0
    if emit is None and not want_snap:
        return None

    def hook(k, params, lr, train_loss, val_loss):
        if emit is not None:
            emit({"grade": grade, "epoch": offset + k, "grade_epoch": k, "lr": lr,
                  "train_loss": train_loss, "val_loss": val_loss})
        if want_snap and (k % every == 0 or k == epochs - 1):
            values = probe_base + nn.predict(params, probe_feat)
            snapshots.append(Snapshot(offset + k, grade, values))

    return hook


def _emit_summary(emit, rec: GradeRecord, residues, norms):
    if emit is None:
        return
    emit({
        "grade": rec.index,
        "summary": True,
        "best_epoch": rec.best_epoch,
        "residue_norm": rec.residue_norm,
        "previous_residue_norm": norms[-2],
        "function_norm": rec.function_norm,
        "final_train_loss": rec.train_loss[-1],
        "best_val_loss": rec.val_loss[rec.best_epoch],
        "wall_time": rec.wall_time,
    })
