"""One-side amplitude spectra, spectrum-evolution matrices, Jacobi-Anger/Carson tools.

Sampled functions live on the periodic grid ``x_l = l / N``, ``l = 0..N-1``,
so bin ``k`` is exactly ``k`` cycles over [0, 1]. Amplitudes use the
one-side convention: ``|F_0| / N`` at DC and ``2 |F_k| / N`` for ``k >= 1``,
where ``F_k = sum_l f(x_l) exp(-2 pi i k x_l)``. A unit sine reads 1.0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._kernels import backend as _kern
from .datasets import SyntheticSpec, eval_lambda


@dataclass(frozen=True)
class SpectrumSeries:
    frequencies: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.frequencies.shape != self.amplitudes.shape:
            raise ValueError("frequencies and amplitudes differ in length")

    def at(self, k) -> np.ndarray:
        return self.amplitudes[np.asarray(k, dtype=np.int64)]


def spectrum_grid(n: int) -> np.ndarray:
    """The periodic sampling grid ``l / n``."""
    return np.arange(n) / n


def one_side_spectrum(samples, method: str = "direct") -> SpectrumSeries:
    """Amplitude at bins ``0..N//2`` of ``N`` samples on the periodic grid.

    ``method="direct"`` sums the DFT term by term (the reference path);
    ``method="fft"`` uses ``numpy.fft.rfft``.
    """
    f = np.ascontiguousarray(samples, dtype=np.float64)
    if f.ndim != 1:
        raise ValueError("samples must be one-dimensional")
    N = f.shape[0]
    if N < 2:
        raise ValueError("need at least two samples")
    if method == "direct":
        mag = _kern.dft_amplitudes(f)
    elif method == "fft":
        mag = np.abs(np.fft.rfft(f))
    else:
        raise ValueError(f"unknown method {method!r}")
    amp = 2.0 * mag / N
    amp[0] = mag[0] / N
    return SpectrumSeries(np.arange(N // 2 + 1, dtype=np.float64), amp)


def bin_weights(N: int) -> np.ndarray:
    """Per-bin weights so that ``N * sum(w * amp**2) == sum(f**2)``."""
    w = np.full(N // 2 + 1, 0.5)
    w[0] = 1.0
    if N % 2 == 0:
        w[-1] = 0.25
    return w


def parseval_energy(series: SpectrumSeries, N: int) -> float:
    """``sum_l f(x_l)^2`` reconstructed from one-side amplitudes."""
    return float(N * np.sum(bin_weights(N) * series.amplitudes ** 2))


def band_energy_fraction(samples, edge: float) -> float:
    """Share of ``sum amp^2`` held by bins with frequency ``<= edge``."""
    s = one_side_spectrum(samples)
    total = float(np.sum(s.amplitudes ** 2))
    if total == 0.0:
        return 1.0
    return float(np.sum(s.amplitudes[s.frequencies <= edge] ** 2)) / total


# -- evolution ------------------------------------------------------------

@dataclass(frozen=True)
class EvolutionMatrix:
    epochs: np.ndarray
    frequencies: np.ndarray
    values: np.ndarray  # (len(epochs), len(frequencies)) in [0, 1]

    def first_epoch_reaching(self, threshold: float = 0.9) -> list[int | None]:
        out = []
        for c in range(self.values.shape[1]):
            hit = np.nonzero(self.values[:, c] >= threshold)[0]
            out.append(int(self.epochs[hit[0]]) if hit.size else None)
        return out

    def low_frequencies_first(self, threshold: float = 0.9) -> bool:
        """True when the first epoch reaching ``threshold`` is non-decreasing in frequency."""
        firsts = [math.inf if e is None else e for e in self.first_epoch_reaching(threshold)]
        return all(a <= b for a, b in zip(firsts, firsts[1:]))


def target_bins(target: SyntheticSpec, N: int) -> np.ndarray:
    kappa = np.asarray(target.kappa)
    bins = np.rint(kappa).astype(np.int64)
    if np.any(np.abs(kappa - bins) > 1e-9):
        raise ValueError("target frequencies must be integers to sit on DFT bins")
    if np.any(bins > N // 2) or np.any(bins < 0):
        raise ValueError(f"target frequency above Nyquist ({N // 2}) for N={N}")
    return bins


def reference_amplitudes(target: SyntheticSpec, N: int) -> np.ndarray:
    """What a perfect learner would read at each target frequency."""
    bins = target_bins(target, N)
    if target.rule == "x-varying":
        return one_side_spectrum(eval_lambda(target, spectrum_grid(N))).at(bins)
    return np.abs(np.asarray(target.alpha, dtype=np.float64))


def evolution_matrix(rows: Sequence, target: SyntheticSpec, epochs=None) -> EvolutionMatrix:
    """Learned over target amplitude at each ``kappa_j``, clipped to [0, 1].

    ``rows`` are functions already sampled on :func:`spectrum_grid`.
    """
    rows = [np.asarray(r, dtype=np.float64).ravel() for r in rows]
    if not rows:
        raise ValueError("need at least one snapshot")
    N = rows[0].size
    bins = target_bins(target, N)
    ref = reference_amplitudes(target, N)
    vals = np.empty((len(rows), bins.size))
    for i, r in enumerate(rows):
        if r.size != N:
            raise ValueError("snapshots sampled on different grids")
        learned = one_side_spectrum(r).at(bins)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(ref > 0, learned / ref, 1.0)
        vals[i] = np.clip(ratio, 0.0, 1.0)
    ep = np.arange(len(rows)) if epochs is None else np.asarray(epochs)
    return EvolutionMatrix(ep, np.asarray(target.kappa, dtype=np.float64), vals)


def record_evolution(snapshots: Sequence[Callable], target: SyntheticSpec, N: int,
                     embed: Callable | None = None, epochs=None) -> EvolutionMatrix:
    """Evaluate model snapshots on the grid (optionally mapped by ``embed``) and compare spectra."""
    x = spectrum_grid(N)
    inputs = x.reshape(-1, 1) if embed is None else embed(x)
    rows = [np.asarray(f(inputs)).ravel() for f in snapshots]
    return evolution_matrix(rows, target, epochs)


# -- Jacobi-Anger and Carson ----------------------------------------------

def carson_band_edge(a: float, b: float) -> float:
    """``(a b + b) / (2 pi)``: frequency bound holding ~98% of ``cos(a sin(b x))``."""
    if a < 0 or b <= 0:
        raise ValueError("need a >= 0 and b > 0")
    return (a * b + b) / (2.0 * math.pi)


def bessel_j(n: int, a: float) -> float:
    """Bessel function of the first kind by its ascending power series.

    Terms are summed until ``|term| < 1e-16 |sum|``. Accurate for ``|a| <= 10``.
    """
    n = int(n)
    if n < 0:
        return (-1) ** (-n) * bessel_j(-n, a)
    half = 0.5 * a
    term = 1.0
    for i in range(1, n + 1):
        term *= half / i
    total = term
    if term == 0.0:
        return 0.0
    q = -half * half
    m = 0
    while True:
        m += 1
        term *= q / (m * (m + n))
        total += term
        if abs(term) < 1e-16 * abs(total):
            return total
        if m > 500:
            return total


def jacobi_anger_lhs(a: float, b: float, x):
    return np.cos(a * np.sin(b * np.asarray(x, dtype=np.float64)))


def jacobi_anger_series(a: float, b: float, x, n_max: int):
    """``sum_{n=-n_max}^{n_max} J_n(a) cos(n b x)``."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    total = np.full(x.shape, bessel_j(0, a))
    for n in range(1, n_max + 1):
        # J_{-n} cos(-n b x) = (-1)^n J_n cos(n b x)
        jn = bessel_j(n, a)
        total = total + (jn + (-1) ** n * jn) * np.cos(n * b * x)
    return total
