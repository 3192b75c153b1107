"""MCMC convergence diagnostics: effective sample size, split R-hat, ACF."""

from __future__ import annotations

import numpy as np


class DiagnosticsError(ValueError):
    """Too little data for the requested diagnostic."""


MIN_KEPT = 100


def _as_chains(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DiagnosticsError("samples must be a 1-D series or a (chains, draws) array")
    return arr


def _autocov(series: np.ndarray) -> np.ndarray:
    """Biased autocovariance of a demeaned series via FFT."""
    n = series.size
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(series, nfft)
    acov = np.fft.irfft(f * np.conjugate(f), nfft)[:n].real
    return acov / n


def acf(samples, max_lag: int = 50) -> np.ndarray:
    """Autocorrelation to ``max_lag``, averaged over per-chain-demeaned chains."""
    chains = _as_chains(samples)
    n = chains.shape[1]
    if n < 2:
        raise DiagnosticsError("need at least 2 draws per chain for an ACF")
    max_lag = min(max_lag, n - 1)
    acov = np.mean([_autocov(c - c.mean()) for c in chains], axis=0)
    if acov[0] == 0.0:
        out = np.zeros(max_lag + 1)
        out[0] = 1.0
        return out
    return acov[: max_lag + 1] / acov[0]


def ess(samples) -> float:
    """Effective sample size of pooled, per-chain-demeaned draws.

    The integrated autocorrelation time is truncated with Geyer's initial
    positive sequence: lags accumulate while consecutive even/odd
    autocorrelation pairs stay positive.
    """
    chains = _as_chains(samples)
    n_chain, n = chains.shape
    total = n_chain * n
    if total < MIN_KEPT:
        raise DiagnosticsError(f"need at least {MIN_KEPT} kept samples, got {total}")
    acov = np.mean([_autocov(c - c.mean()) for c in chains], axis=0)
    if acov[0] == 0.0:
        return float(total)
    rho = acov / acov[0]

    tau = 1.0
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0.0:
            break
        tau += 2.0 * pair
        t += 2
    return float(total / tau)


def split_rhat(samples) -> float:
    """Split R-hat: each chain is halved, then the standard between/within
    variance ratio is computed over the half-chains."""
    chains = _as_chains(samples)
    n_chain, n = chains.shape
    if n_chain < 2:
        raise DiagnosticsError("split R-hat needs at least 2 chains")
    if n < 4:
        raise DiagnosticsError("split R-hat needs at least 4 draws per chain")
    half = n // 2
    halves = np.vstack([chains[:, :half], chains[:, n - half :]])
    m, n_half = halves.shape
    chain_means = halves.mean(axis=1)
    within = halves.var(axis=1, ddof=1).mean()
    between = n_half * chain_means.var(ddof=1)
    if within == 0.0:
        return 1.0 if between == 0.0 else float("inf")
    var_plus = (n_half - 1) / n_half * within + between / n_half
    return float(np.sqrt(var_plus / within))
