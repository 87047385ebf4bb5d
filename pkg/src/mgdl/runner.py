"""Run one configured experiment end to end and write its artifacts.

Files written into the output directory:

``train_log.jsonl``   one record per epoch plus one summary per grade
``spectrum.csv``      one-side spectra of target, learned function and each grade (1-D tasks)
``evolution.csv``     epoch x target-frequency amplitude ratios (1-D tasks)
``predictions.csv``   test-split targets and cumulative per-grade predictions
``reconstruction.ppm`` full-image prediction (image task)
``timing.json``       wall-clock seconds per grade and in total
``metrics.json``      final and per-grade accuracy; written last, atomically

``metrics.json`` holds no timing so identical configs give identical bytes.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from pathlib import Path

import numpy as np

from . import datasets as ds
from . import engine, nn, spectrum
from .config import ExperimentConfig, dumps
from .metrics import psnr, rse, to_255

log = logging.getLogger(__name__)


def build_data(cfg: ExperimentConfig):
    """Return ``(split, target_spec_or_None, embed_or_None)``."""
    if cfg.task.startswith("synthetic"):
        target = ds.synthetic_setting(cfg.setting, cfg.M, cfg.kappa_step, cfg.phase_seed)
        split = ds.build_synthetic_split(target, cfg.n_train, cfg.n_val, cfg.n_test,
                                         cfg.val_seed, cfg.test_seed)
        return split, target, None
    if cfg.task.startswith("manifold"):
        target = ds.manifold_setting(cfg.setting, cfg.M, cfg.kappa_step, cfg.phase_seed)
        mspec = ds.ManifoldSpec(cfg.q, target)
        split = ds.build_manifold_split(mspec, cfg.n_train, cfg.n_val, cfg.n_test,
                                        cfg.val_seed, cfg.test_seed)
        return split, target, lambda x: ds.eval_gamma(cfg.q, x)
    if cfg.task == "image":
        img = ds.read_ppm(cfg.image_path) if cfg.image_path else ds.make_test_image(64)
        return ds.build_image_split(img, cfg.stride), None, None
    if cfg.task == "mnist":
        d = Path(cfg.mnist_dir)
        tr_x, tr_y = _mnist_file(d, "train-images"), _mnist_file(d, "train-labels")
        te_x, te_y = _mnist_file(d, "t10k-images"), _mnist_file(d, "t10k-labels")
        spec = ds.MnistTargetSpec(cfg.beta, cfg.kappa, cfg.n_train, cfg.n_val, cfg.n_test)
        split = ds.build_mnist_split(tr_x.data, tr_y.data, te_x.data, te_y.data, spec,
                                     cfg.split_seed)
        return split, None, None
    raise ValueError(f"unknown task {cfg.task!r}")


def _mnist_file(directory: Path, stem: str) -> ds.IdxArray:
    for name in (f"{stem}-idx3-ubyte", f"{stem}-idx1-ubyte", f"{stem}.idx3-ubyte",
                 f"{stem}.idx1-ubyte"):
        for suffix in ("", ".gz"):
            p = directory / (name + suffix)
            if p.is_file():
                return ds.load_idx(p)
    raise FileNotFoundError(f"no {stem} IDX file in {directory}")


class _JsonLines:
    def __init__(self, path: Path):
        self.fh = open(path, "w")

    def __call__(self, record: dict):
        self.fh.write(json.dumps(record, sort_keys=True) + "\n")

    def close(self):
        self.fh.close()


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Execute ``cfg`` and return the metrics dictionary written to ``metrics.json``."""
    cfg.check()
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.json"
    if metrics_path.exists():
        metrics_path.unlink()

    split, target, embed = build_data(cfg)
    if cfg.export_data:
        ds.write_split_csv(split, out / "data.csv")
    (out / "config.toml").write_text(dumps(cfg))

    probe = None
    if target is not None:
        grid = spectrum.spectrum_grid(cfg.spectrum_n)
        probe = grid.reshape(-1, 1) if embed is None else embed(grid)
    every = cfg.snapshot_every if probe is not None else 0

    t0 = time.perf_counter()
    logger = _JsonLines(out / "train_log.jsonl")
    try:
        if cfg.method == "mgdl":
            res = engine.run_mgdl(split.train.inputs, split.train.targets,
                                  split.val.inputs, split.val.targets, cfg.grade_specs(),
                                  seed=cfg.seed, emit=logger, probe=probe, snapshot_every=every)
            grade_times = [g.wall_time for g in res.model.grades]
            cumulative = {name: _cumulative(engine.grade_outputs(res.model, p.inputs))
                          for name, p in (("train", split.train), ("val", split.val),
                                          ("test", split.test))}
            final = {k: v[-1] for k, v in cumulative.items()}
            snapshots = res.snapshots
        else:
            res = engine.run_sgdl(split.train.inputs, split.train.targets,
                                  split.val.inputs, split.val.targets, cfg.sgdl_hidden_widths(),
                                  cfg.sgdl_train_config(), seed=cfg.seed, emit=logger,
                                  probe=probe, snapshot_every=every)
            grade_times = [res.wall_time]
            final = {name: nn.predict(res.params, p.inputs)
                     for name, p in (("train", split.train), ("val", split.val),
                                     ("test", split.test))}
            cumulative = {k: [v] for k, v in final.items()}
            snapshots = res.snapshots
    finally:
        logger.close()
    total_time = time.perf_counter() - t0

    metrics = {
        "task": cfg.task,
        "method": cfg.method,
        "t_max": cfg.t_max,
        "t_min": cfg.t_min,
        "batch_size": cfg.batch_size,
        "epochs": cfg.epochs if cfg.method == "mgdl" else cfg.total_sgdl_epochs(),
        "seed": cfg.seed,
        "tr_rse": rse(final["train"], split.train.targets),
        "va_rse": rse(final["val"], split.val.targets),
        "te_rse": rse(final["test"], split.test.targets),
        "provenance": {k: v for k, v in split.provenance.items()
                       if k not in ("train_index", "val_index")},
    }
    per_grade = []
    for l in range(len(cumulative["train"])):
        row = {"grade": l + 1,
               "tr_rse": rse(cumulative["train"][l], split.train.targets),
               "va_rse": rse(cumulative["val"][l], split.val.targets),
               "te_rse": rse(cumulative["test"][l], split.test.targets)}
        if cfg.task == "image":
            row["tr_psnr"] = psnr(split.train.targets * 255.0, to_255(cumulative["train"][l]))
            row["te_psnr"] = psnr(split.test.targets * 255.0, to_255(cumulative["test"][l]))
        per_grade.append(row)
    metrics["per_grade"] = per_grade
    if cfg.task == "image":
        metrics["tr_psnr"] = per_grade[-1]["tr_psnr"]
        metrics["te_psnr"] = per_grade[-1]["te_psnr"]
        h, w = split.provenance["height"], split.provenance["width"]
        ds.write_ppm(out / "reconstruction.ppm",
                     np.rint(to_255(final["test"])).reshape(h, w, 3).astype(np.uint8))
    if cfg.method == "mgdl":
        metrics["residue_norms"] = res.residue_norms
        metrics["function_norms"] = res.function_norms
        metrics["residual_monotonic"] = res.monotonic.passed
        metrics["best_epochs"] = [g.best_epoch for g in res.model.grades]
    else:
        metrics["best_epochs"] = [res.best_epoch]

    if target is not None:
        grade_fns = (engine.grade_outputs(res.model, probe) if cfg.method == "mgdl"
                     else [nn.predict(res.params, probe)])
        write_spectrum_csv(out / "spectrum.csv", ds.eval_lambda(target, grid),
                           [g.ravel() for g in grade_fns])
        if snapshots:
            evo = spectrum.evolution_matrix([s.values for s in snapshots], target,
                                            [s.epoch for s in snapshots])
            write_evolution_csv(out / "evolution.csv", evo, [s.grade for s in snapshots])
            metrics["first_epoch_at_0.9"] = evo.first_epoch_reaching(0.9)
            metrics["low_frequencies_first"] = evo.low_frequencies_first(0.9)

    write_predictions_csv(out / "predictions.csv", split.test, cumulative["test"])
    (out / "timing.json").write_text(json.dumps(
        {"grade_wall_time": grade_times, "total_wall_time": total_time}, indent=1))
    _write_atomic(metrics_path, json.dumps(metrics, indent=1, sort_keys=True) + "\n")
    return metrics


def _cumulative(outputs):
    acc, total = [], None
    for g in outputs:
        total = g.copy() if total is None else total + g
        acc.append(total)
    return acc


def _write_atomic(path: Path, text: str):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


# -- CSV writers and readers ------------------------------------------------

def write_spectrum_csv(path, target_samples, grade_samples=()):
    """Columns: frequency, target, learned (sum of grades), grade_1..grade_L."""
    tgt = spectrum.one_side_spectrum(target_samples)
    grade_specs = [spectrum.one_side_spectrum(g) for g in grade_samples]
    learned = spectrum.one_side_spectrum(np.sum(grade_samples, axis=0)) if grade_samples else None
    header = ["frequency", "target"]
    if learned is not None:
        header += ["learned"] + [f"grade_{i + 1}" for i in range(len(grade_specs))]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(tgt.frequencies.size):
            row = [int(tgt.frequencies[k]), repr(float(tgt.amplitudes[k]))]
            if learned is not None:
                row.append(repr(float(learned.amplitudes[k])))
                row += [repr(float(s.amplitudes[k])) for s in grade_specs]
            w.writerow(row)


def write_single_spectrum_csv(path, series: spectrum.SpectrumSeries):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency", "amplitude"])
        for f, a in zip(series.frequencies, series.amplitudes):
            w.writerow([int(f), repr(float(a))])


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Numeric CSV with a header row into ``{column: array}``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    cols = {h: [] for h in header}
    for r in body:
        for h, v in zip(header, r):
            cols[h].append(float(v))
    return {h: np.asarray(v) for h, v in cols.items()}


def write_evolution_csv(path, evo: spectrum.EvolutionMatrix, grades=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "grade"] + [f"k{int(k)}" for k in evo.frequencies])
        for i, e in enumerate(evo.epochs):
            g = grades[i] if grades is not None else 0
            w.writerow([int(e), int(g)] + [repr(float(v)) for v in evo.values[i]])


def read_evolution_csv(path) -> spectrum.EvolutionMatrix:
    cols = read_csv_columns(path)
    ks = [c for c in cols if c.startswith("k")]
    vals = np.column_stack([cols[c] for c in ks]) if ks else np.zeros((len(cols["epoch"]), 0))
    return spectrum.EvolutionMatrix(cols["epoch"].astype(np.int64),
                                    np.array([float(c[1:]) for c in ks]), vals)


def write_predictions_csv(path, pairs: ds.Pairs, cumulative):
    """Test-split targets and the running sum of grade outputs after each grade."""
    d_in = pairs.inputs.shape[1]
    d_out = pairs.targets.shape[1]
    show_inputs = d_in <= 3
    header = ["index"]
    if show_inputs:
        header += [f"x{i}" for i in range(d_in)]
    header += [f"y{i}" for i in range(d_out)]
    for l in range(len(cumulative)):
        header += [f"grade{l + 1}_y{i}" for i in range(d_out)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for n in range(len(pairs)):
            row = [n]
            if show_inputs:
                row += [repr(float(v)) for v in pairs.inputs[n]]
            row += [repr(float(v)) for v in pairs.targets[n]]
            for c in cumulative:
                row += [repr(float(v)) for v in c[n]]
            w.writerow(row)


def read_train_log(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def report_rows(metric_paths) -> list[dict]:
    """One comparison row per ``metrics.json`` (columns follow the accuracy tables)."""
    rows = []
    for p in metric_paths:
        p = Path(p)
        m = json.loads(p.read_text())
        timing = p.with_name("timing.json")
        t = json.loads(timing.read_text())["total_wall_time"] if timing.exists() else math.nan
        rows.append({"setting": m["task"], "model": m["method"].upper(),
                     "t_max": m["t_max"], "t_min": m["t_min"],
                     "batch_size": m["batch_size"], "time_s": t,
                     "TrRSE": m["tr_rse"], "VaRSE": m["va_rse"], "TeRSE": m["te_rse"],
                     "TrPSNR": m.get("tr_psnr", ""), "TePSNR": m.get("te_psnr", ""),
                     "source": str(p)})
    return rows


REPORT_FIELDS = ["setting", "model", "t_max", "t_min", "batch_size", "time_s",
                 "TrRSE", "VaRSE", "TeRSE", "TrPSNR", "TePSNR", "source"]


def write_report_csv(fh, rows):
    w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
