"""Relative squared error and PSNR."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError


def rse(preds, targets) -> float:
    """``sum ||y_hat - y||^2 / sum ||y||^2``."""
    P = np.asarray(preds, dtype=np.float64)
    T = np.asarray(targets, dtype=np.float64)
    if P.shape != T.shape:
        raise DimensionError(f"prediction shape {P.shape} != target shape {T.shape}")
    if T.size == 0:
        raise ValueError("rse needs at least one sample")
    denom = float(np.sum(T * T))
    if denom == 0.0:
        raise ValueError("rse is undefined for all-zero targets")
    return float(np.sum((P - T) ** 2)) / denom


def to_255(values01) -> np.ndarray:
    """Rescale [0, 1] model output to the 0-255 range, clamped."""
    return np.clip(np.asarray(values01, dtype=np.float64) * 255.0, 0.0, 255.0)


def psnr(truth, estimate) -> float:
    """``10 log10(n 255^2 / ||v - v_hat||_F^2)`` on 0-255 rasters.

    ``n`` counts every scalar entry, so this is ``10 log10(255^2 / MSE)``.
    The estimate is clamped to [0, 255] first. Identical rasters give ``inf``.
    """
    v = np.asarray(truth, dtype=np.float64)
    e = np.clip(np.asarray(estimate, dtype=np.float64), 0.0, 255.0)
    if v.shape != e.shape:
        raise DimensionError(f"raster shapes differ: {v.shape} vs {e.shape}")
    if v.size == 0:
        raise ValueError("psnr needs a non-empty raster")
    err = float(np.sum((v - e) ** 2))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(v.size * 255.0 ** 2 / err)


@dataclass
class MetricReport:
    tr_rse: float
    va_rse: float
    te_rse: float
    tr_psnr: float | None = None
    te_psnr: float | None = None
    wall_time: float | None = None

    def __post_init__(self):
        for name in ("tr_rse", "va_rse", "te_rse"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)
