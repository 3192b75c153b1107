"""Branch-probability sampling for sibling groups.

Three schemes cover the spec kinds:

* exact Dirichlet draws for single-source surveys and explicit priors,
* a Beta draw plus complement for two-child groups with one informed child,
* independent per-child Betas for multi-source groups, reconciled onto the
  simplex by rejection (proper informed subset) or by normalization with an
  importance weight (all children informed).

All entry points accept ``size=None`` for a single draw or an integer for a
vectorized batch; batched draws stack probabilities row-wise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import stats

from .rng import RngLike, as_generator
from .tree import (
    BetaSurveyPerChild,
    BranchGroupSpec,
    DirichletPrior,
    DirichletSurvey,
    Fixed,
)

SIMPLEX_TOL = 1e-12
REJECTION_CAP = 10**6


class SamplerError(ValueError):
    """Invalid sampling parameters or an exhausted rejection budget."""


@dataclass(frozen=True)
class BranchSample:
    """Per-child probabilities plus the importance weight of the draw.

    ``importance_weight`` is 1 whenever the scheme is exact; downstream
    estimators must treat it as a per-draw weight in all statistics.
    For batched draws ``probabilities`` has shape ``(size, k)`` and
    ``importance_weight`` shape ``(size,)``.
    """

    probabilities: np.ndarray
    importance_weight: Union[float, np.ndarray] = 1.0


def _single(probs: np.ndarray, weight) -> BranchSample:
    return BranchSample(probabilities=probs[0], importance_weight=float(weight[0]))


def sample_dirichlet(concentration, rng: RngLike, size: Optional[int] = None) -> BranchSample:
    """Exact Dirichlet draw; importance weight 1.

    Survey-informed groups are sampled with concentration ``x_i + 1`` per
    child (see :func:`sample_sibling_group`).
    """
    conc = np.asarray(concentration, dtype=float)
    if conc.ndim != 1 or conc.size == 0:
        raise SamplerError("concentration must be a nonempty vector")
    if np.any(conc <= 0):
        raise SamplerError("nonpositive concentration")
    gen = as_generator(rng)
    n = 1 if size is None else int(size)
    draws = gen.dirichlet(conc, size=n)
    weights = np.ones(n)
    if size is None:
        return _single(draws, weights)
    return BranchSample(probabilities=draws, importance_weight=weights)


def sample_beta_pair(x: int, n: int, rng: RngLike, size: Optional[int] = None) -> BranchSample:
    """Draw p ~ Beta(x+1, n-x+1) and return (p, 1-p); weight 1."""
    if not (0 <= x <= n):
        raise SamplerError(f"survey count x={x} outside [0, n={n}]")
    gen = as_generator(rng)
    m = 1 if size is None else int(size)
    p = gen.beta(x + 1, n - x + 1, size=m)
    probs = np.column_stack([p, 1.0 - p])
    weights = np.ones(m)
    if size is None:
        return _single(probs, weights)
    return BranchSample(probabilities=probs, importance_weight=weights)


def _beta_params(spec: BetaSurveyPerChild) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    informed = np.array([s is not None for s in spec.surveys])
    a = np.array([s[0] + 1.0 if s is not None else np.nan for s in spec.surveys])
    b = np.array([s[1] - s[0] + 1.0 if s is not None else np.nan for s in spec.surveys])
    return informed, a, b


def _sample_beta_subset_rejection(
    spec: BetaSurveyPerChild, gen: np.random.Generator, m: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Proper informed subset: independent Betas, reject when they overflow
    the simplex, split the residual uniformly over uninformed children."""
    informed, a, b = _beta_params(spec)
    k = informed.size
    n_inf = int(informed.sum())
    n_uninf = k - n_inf
    out = np.empty((m, k))
    filled = 0
    attempts = 0
    while filled < m:
        batch = min(max(m - filled, 1024), 2 * REJECTION_CAP)
        if attempts + batch > REJECTION_CAP * m:
            rate = filled / attempts if attempts else 0.0
            raise SamplerError(
                f"incompatible sibling surveys: acceptance rate {rate:.2e} "
                f"after {attempts} attempts"
            )
        draws = gen.beta(a[informed], b[informed], size=(batch, n_inf))
        total = draws.sum(axis=1)
        ok = total < 1.0
        attempts += batch
        take = min(int(ok.sum()), m - filled)
        if take:
            good = draws[ok][:take]
            rows = np.empty((take, k))
            rows[:, informed] = good
            rows[:, ~informed] = ((1.0 - good.sum(axis=1)) / n_uninf)[:, None]
            out[filled : filled + take] = rows
            filled += take
    return out, np.ones(m)


def _sample_beta_all_normalized(
    spec: BetaSurveyPerChild, gen: np.random.Generator, m: int
) -> Tuple[np.ndarray, np.ndarray]:
    """All children informed: normalize independent Betas onto the simplex.

    The importance weight is the product of the marginal Beta densities at
    the normalized coordinates over the product at the raw coordinates.
    """
    _, a, b = _beta_params(spec)
    raw = gen.beta(a, b, size=(m, a.size))
    probs = raw / raw.sum(axis=1, keepdims=True)
    log_w = (
        stats.beta.logpdf(probs, a, b).sum(axis=1)
        - stats.beta.logpdf(raw, a, b).sum(axis=1)
    )
    return probs, np.exp(log_w)


def sample_sibling_group(
    group: BranchGroupSpec, rng: RngLike, size: Optional[int] = None
) -> BranchSample:
    """Dispatch on the group's spec kind; see the module docstring.

    Two-child groups with survey evidence reduce to :func:`sample_beta_pair`
    on the first informed child, with the other child as complement.
    """
    gen = as_generator(rng)
    m = 1 if size is None else int(size)
    k = len(group.children)
    spec = group.spec

    if isinstance(spec, Fixed):
        probs = np.tile(np.asarray(spec.probabilities, dtype=float), (m, 1))
        weights = np.ones(m)
    elif isinstance(spec, DirichletSurvey):
        conc = np.asarray(spec.counts, dtype=float) + 1.0
        probs = as_generator(gen).dirichlet(conc, size=m)
        weights = np.ones(m)
    elif isinstance(spec, DirichletPrior):
        sample = sample_dirichlet(spec.concentration, gen, size=m)
        probs, weights = sample.probabilities, sample.importance_weight
    elif isinstance(spec, BetaSurveyPerChild):
        informed = spec.informed_mask()
        if not any(informed):
            raise SamplerError(f"group at {group.parent!r} has no informed child")
        if k == 2:
            x, n = next(s for s in spec.surveys if s is not None)
            pair = sample_beta_pair(x, n, gen, size=m)
            pos = informed.index(True)
            probs = pair.probabilities if pos == 0 else pair.probabilities[:, ::-1]
            weights = np.asarray(pair.importance_weight, dtype=float).reshape(m)
        elif all(informed):
            probs, weights = _sample_beta_all_normalized(spec, gen, m)
        else:
            probs, weights = _sample_beta_subset_rejection(spec, gen, m)
    else:
        raise SamplerError(f"unknown spec kind {type(spec).__name__}")

    if size is None:
        return _single(probs, weights)
    return BranchSample(probabilities=probs, importance_weight=weights)
