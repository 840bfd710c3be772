"""Readout statistics toolchain: gauge averaging, bootstrap with gauge-noise
injection, the binning autocorrelation test, and the Wald-Wolfowitz runs test."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .instance import GaugeVector


@dataclass
class ReadoutEntry:
    embedding: int
    probs: np.ndarray
    gauge: GaugeVector | None = None


@dataclass
class ReadoutTable:
    """Per-(embedding, gauge) probability vectors over the 2^N basis."""

    n_spins: int
    entries: list[ReadoutEntry] = field(default_factory=list)

    def add(self, embedding: int, probs, gauge: GaugeVector | None = None) -> None:
        p = np.asarray(probs, dtype=float)
        if len(p) != 2**self.n_spins:
            raise ValueError(f"probability vector length {len(p)} != 2^{self.n_spins}")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("each probability vector must sum to 1")
        self.entries.append(ReadoutEntry(embedding, p, gauge))


def ungauge_probs(probs: np.ndarray, gauge: GaugeVector | None) -> np.ndarray:
    """Relabel a gauged readout vector back to the original state labels."""
    if gauge is None:
        return probs
    mask = gauge.index_mask()
    idx = np.arange(len(probs)) ^ mask
    out = np.empty_like(probs)
    out[idx] = probs
    return out


def gauge_average(table: ReadoutTable) -> dict[int, np.ndarray]:
    """Per-embedding mean over gauges, after relabeling through each gauge."""
    if not table.entries:
        raise ValueError("empty readout table")
    acc: dict[int, list[np.ndarray]] = {}
    for entry in table.entries:
        acc.setdefault(entry.embedding, []).append(ungauge_probs(entry.probs, entry.gauge))
    return {a: np.mean(vs, axis=0) for a, vs in sorted(acc.items())}


class BootstrapResult(NamedTuple):
    mean: float
    error_bar: float  # 2 x std of the bootstrap means
    ci95: tuple[float, float]
    means: np.ndarray


def bootstrap_statistic(
    values,
    sigmas=None,
    n_boot: int = 1000,
    rng=None,
) -> BootstrapResult:
    """Embedding-level bootstrap with per-value gauge-spread noise injection.

    Resamples the values with replacement ``n_boot`` times, perturbs each
    drawn value by N(0, sigma_a), and reports the mean of the bootstrap
    means with an error bar of twice their standard deviation.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty input")
    s = np.zeros_like(v) if sigmas is None else np.asarray(sigmas, dtype=float)
    if s.shape != v.shape:
        raise ValueError("sigmas must match values")
    rng = rng if rng is not None else np.random.default_rng(0)
    idx = rng.integers(0, v.size, size=(n_boot, v.size))
    draws = v[idx]
    if np.any(s > 0):
        draws = draws + rng.normal(0.0, 1.0, size=draws.shape) * s[idx]
    means = draws.mean(axis=1)
    mu = float(means.mean())
    err = float(2.0 * means.std(ddof=1)) if n_boot > 1 else 0.0
    return BootstrapResult(mu, err, (mu - err, mu + err), means)


class BinningResult(NamedTuple):
    bin_sizes: np.ndarray
    errors: np.ndarray  # standard error of the bin means, per bin size
    xi: int  # estimated autocorrelation length (first plateau bin size)


def binning_test(series, max_bin: int | None = None, plateau_rtol: float = 0.05) -> BinningResult:
    """Binning analysis: standard error of bin means vs power-of-two bin size.

    The autocorrelation length xi is the first bin size b at which
    |dx(2b) - dx(b)| < plateau_rtol * dx(b) (a deterministic stand-in for
    eyeballing flatness).  Bin sizes are powers of two; the tail remainder
    at each size is truncated.
    """
    x = np.asarray(series, dtype=float)
    if max_bin is None:
        max_bin = max(1, len(x) // 32)
    if len(x) < 2 * max_bin or len(x) < 4:
        raise ValueError("series too short for the requested binning range")
    sizes, errors = [], []
    b = 1
    while b <= max_bin:
        n_bins = len(x) // b
        means = x[: n_bins * b].reshape(n_bins, b).mean(axis=1)
        err = float(np.sqrt(means.var(ddof=1) / n_bins)) if n_bins > 1 else 0.0
        sizes.append(b)
        errors.append(err)
        b *= 2
    sizes = np.array(sizes)
    errors = np.array(errors)
    xi = int(sizes[-1])
    for i in range(len(sizes) - 1):
        if abs(errors[i + 1] - errors[i]) < plateau_rtol * errors[i] + 1e-300:
            xi = int(sizes[i])
            break
    return BinningResult(sizes, errors, xi)


class RunsTestResult(NamedTuple):
    runs: int
    expected_runs: float
    sigma_runs: float
    z: float
    reject_at_5pct: bool
    n_ones: int
    n_zeros: int


def runs_test(series) -> RunsTestResult:
    """Wald-Wolfowitz runs test on a binary sequence.

    Z = (R - Rbar)/sigma_R with Rbar = 2 N1 N0/(N1+N0) + 1; the null is
    rejected at the 5% level when |Z| > 1.96.
    """
    x = np.asarray(series).astype(int)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("series must be a 1-d binary sequence of length >= 2")
    if not np.all((x == 0) | (x == 1)):
        raise ValueError("series must be binary (0/1)")
    n1 = int(x.sum())
    n0 = int(len(x) - n1)
    if n1 == 0 or n0 == 0:
        raise ValueError("runs test needs both symbols present")
    runs = int(1 + np.count_nonzero(np.diff(x)))
    n = n1 + n0
    rbar = 2.0 * n1 * n0 / n + 1.0
    var = 2.0 * n1 * n0 * (2.0 * n1 * n0 - n) / (n**2 * (n - 1))
    sigma = float(np.sqrt(var))
    z = (runs - rbar) / sigma
    return RunsTestResult(runs, rbar, sigma, z, abs(z) > 1.96, n1, n0)
