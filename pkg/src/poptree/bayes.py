"""Hierarchical Dirichlet-multinomial tree model with data-uncertainty nodes.

The generative model: the root count draws from its prior; every internal
node splits its count over its children by a multinomial whose probability
vector has a Dirichlet prior.  Observed leaf counts are data; leaves without
counts (including the attached uncertainty leaves) are free latent integers,
and every internal count is the exact sum of its children, so the free
leaves determine the whole state.

The posterior is sampled with Metropolis-within-Gibbs: branch probability
vectors are conjugate (Dirichlet prior + multinomial counts) and redraw
exactly; each free latent count takes a symmetric random-walk integer
proposal accepted by the posterior ratio.  Chains run in lockstep,
vectorized across a chains axis, each consuming its own random stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from .diagnostics import acf as acf_fn
from .diagnostics import ess as ess_fn
from .diagnostics import split_rhat
from .rng import RngLike, RngStream, as_generator
from .tree import (
    ROLE_INTERNAL,
    ROLE_LEAF,
    ROLE_ROOT,
    ROLE_UNCERTAINTY,
    BranchGroupSpec,
    DirichletPrior,
    EvidenceTree,
    NodeRecord,
    TreeError,
    require_valid,
)

ACF_LAG = 50
ADAPT_WINDOW = 500
ADAPT_LOW = 0.2
ADAPT_HIGH = 0.5
_BLOCK = 1024


class ModelError(ValueError):
    """Ill-posed model input (prior dimensions, impossible initialization...)."""


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class RootPrior:
    """Prior on the root count: lognormal (evaluated at integers) or uniform."""

    kind: str
    log_mean: Optional[float] = None
    log_sd: Optional[float] = None
    lower: Optional[int] = None
    upper: Optional[int] = None

    def __post_init__(self):
        if self.kind == "lognormal":
            if self.log_sd is None or self.log_sd <= 0:
                raise ModelError("lognormal root prior needs log_sd > 0")
            if self.log_mean is None:
                raise ModelError("lognormal root prior needs log_mean")
        elif self.kind == "uniform":
            if self.lower is None or self.upper is None or not (0 <= self.lower < self.upper):
                raise ModelError("uniform root prior needs 0 <= lower < upper")
        else:
            raise ModelError(f"unknown root prior kind {self.kind!r}")

    @classmethod
    def lognormal(cls, median: float, log_sd: float) -> "RootPrior":
        return cls(kind="lognormal", log_mean=math.log(median), log_sd=log_sd)

    @classmethod
    def uniform(cls, lower: int, upper: int) -> "RootPrior":
        return cls(kind="uniform", lower=int(lower), upper=int(upper))

    @classmethod
    def lognormal_from_bounds(
        cls, lower: float, upper: float, mass: float, midpoint: float
    ) -> "RootPrior":
        """Lognormal centered at ``log(midpoint)`` whose density puts ``mass``
        inside ``(lower, upper)``; the spread is solved numerically."""
        if not (0 < lower < midpoint < upper):
            raise ModelError("need 0 < lower < midpoint < upper")
        if not (0.0 < mass < 1.0):
            raise ModelError("mass must be in (0, 1)")
        from scipy.stats import norm

        mu = math.log(midpoint)
        a, b = math.log(lower) - mu, math.log(upper) - mu

        def contained(sd):
            return norm.cdf(b / sd) - norm.cdf(a / sd) - mass

        sd = brentq(contained, 1e-6, 50.0)
        return cls(kind="lognormal", log_mean=mu, log_sd=float(sd))

    def log_density(self, z: np.ndarray) -> np.ndarray:
        """Log prior at integer counts ``z`` (continuous density, discretized
        by pointwise evaluation)."""
        z = np.asarray(z, dtype=float)
        if self.kind == "lognormal":
            out = np.full(z.shape, -np.inf)
            pos = z > 0
            lz = np.log(z, where=pos, out=np.zeros_like(z))
            out[pos] = (
                -lz[pos]
                - math.log(self.log_sd)
                - 0.5 * math.log(2.0 * math.pi)
                - 0.5 * ((lz[pos] - self.log_mean) / self.log_sd) ** 2
            )
            return out
        inside = (z >= self.lower) & (z <= self.upper)
        return np.where(inside, -math.log(self.upper - self.lower + 1), -np.inf)

    def typical(self) -> int:
        if self.kind == "lognormal":
            return int(round(math.exp(self.log_mean)))
        return int((self.lower + self.upper) // 2)

    def analytic_mean(self) -> float:
        if self.kind == "lognormal":
            return math.exp(self.log_mean + self.log_sd**2 / 2.0)
        return (self.lower + self.upper) / 2.0

    def analytic_sd(self) -> float:
        if self.kind == "lognormal":
            s2 = self.log_sd**2
            return math.exp(self.log_mean + s2 / 2.0) * math.sqrt(math.expm1(s2))
        width = self.upper - self.lower + 1
        return math.sqrt((width**2 - 1) / 12.0)


@dataclass(frozen=True)
class GroupPrior:
    """Dirichlet concentrations for one parent's branch vector.

    A dimension one larger than the child count attaches a latent
    uncertainty leaf (named ``uncertainty_label``) carrying the extra last
    component.  ``name`` labels reported probability components as
    ``{name}_{child}``.
    """

    parent: str
    concentration: Tuple[float, ...]
    name: Optional[str] = None
    uncertainty_label: Optional[str] = None


@dataclass(frozen=True)
class BayesPriors:
    root: RootPrior
    groups: Tuple[GroupPrior, ...]

    def group_for(self, parent: str) -> Optional[GroupPrior]:
        for g in self.groups:
            if g.parent == parent:
                return g
        return None


# ---------------------------------------------------------------------------
# compiled model


@dataclass(frozen=True)
class CompiledGroup:
    parent: str
    children: Tuple[str, ...]
    concentration: np.ndarray
    name: str
    parent_idx: int
    child_idx: np.ndarray  # node index per child
    flat_slice: slice  # columns of this group inside the flat prob matrix


@dataclass(frozen=True)
class FreeLatent:
    name: str
    idx: int
    ancestor_idx: np.ndarray  # node indices strictly above, leaf-exclusive
    path_cols: np.ndarray  # flat prob columns along the root-to-leaf path


@dataclass(frozen=True)
class BayesModel:
    """A tree compiled against its priors, ready to sample.

    ``tree`` is the augmented tree (uncertainty leaves attached);
    ``free_latents`` are the leaf labels whose counts the sampler moves.
    """

    tree: EvidenceTree
    root_prior: RootPrior
    groups: Tuple[CompiledGroup, ...]
    free_latents: Tuple[str, ...]
    node_ids: Tuple[str, ...]
    node_index: Dict[str, int]
    observed: Dict[str, int]
    _free: Tuple[FreeLatent, ...] = field(repr=False)
    _bottom_up: Tuple[Tuple[int, np.ndarray], ...] = field(repr=False)
    _flat_children: np.ndarray = field(repr=False)
    _flat_conc: np.ndarray = field(repr=False)

    def count_quantities(self) -> Tuple[str, ...]:
        """Reported count quantities: every node that is not an observed leaf."""
        return tuple(
            rec.id for rec in self.tree.nodes if rec.observed_count is None
        )

    def prob_quantities(self) -> Tuple[str, ...]:
        return tuple(
            f"{g.name}_{child}" for g in self.groups for child in g.children
        )


@dataclass
class LatentState:
    """Free latent counts, branch probability vectors, and all derived counts."""

    latent_counts: Dict[str, int]
    branch_probs: Dict[str, np.ndarray]
    derived: Dict[str, int]


def _attach_uncertainty(
    tree: EvidenceTree, priors: BayesPriors
) -> Tuple[EvidenceTree, Dict[str, str]]:
    """Return the augmented tree and the map parent -> uncertainty label."""
    nodes: List[NodeRecord] = list(tree.nodes)
    edges = dict(tree.edges)
    branch_groups: Dict[str, BranchGroupSpec] = {}
    attached: Dict[str, str] = {}

    for parent, group in tree.branch_groups.items():
        prior = priors.group_for(parent)
        if prior is None:
            raise ModelError(f"no prior concentration for branch group at {parent!r}")
        dim, k = len(prior.concentration), len(group.children)
        if dim == k:
            children = group.children
        elif dim == k + 1:
            label = prior.uncertainty_label or f"{parent}_miss"
            if any(rec.id == label for rec in nodes):
                raise ModelError(f"uncertainty label {label!r} already names a node")
            # insert right after the parent's last declared child
            last_child_pos = max(
                i for i, rec in enumerate(nodes) if rec.id in group.children
            )
            nodes.insert(
                last_child_pos + 1,
                NodeRecord(
                    id=label,
                    role=ROLE_UNCERTAINTY,
                    description=f"events under {parent} missed by every source",
                ),
            )
            edges[label] = parent
            children = group.children + (label,)
            attached[parent] = label
        else:
            raise ModelError(
                f"prior at {parent!r} has dimension {dim} for {k} children; "
                "only an excess of exactly one (the uncertainty leaf) is supported"
            )
        branch_groups[parent] = BranchGroupSpec(
            parent=parent,
            children=children,
            spec=DirichletPrior(concentration=tuple(float(a) for a in prior.concentration)),
        )

    augmented = EvidenceTree(
        name=tree.name, nodes=tuple(nodes), edges=edges, branch_groups=branch_groups
    )
    return require_valid(augmented), attached


def build_model(tree: EvidenceTree, priors: BayesPriors) -> BayesModel:
    """Compile ``tree`` plus priors into a sampleable model.

    Uncertainty leaves are attached wherever a prior's dimension exceeds the
    real child count by one; larger mismatches are rejected.  Free latents
    are all leaves without observed counts, in declaration order.
    """
    require_valid(tree)
    augmented, _ = _attach_uncertainty(tree, priors)

    node_ids = tuple(rec.id for rec in augmented.nodes)
    node_index = {nid: i for i, nid in enumerate(node_ids)}
    observed = {
        rec.id: rec.observed_count
        for rec in augmented.nodes
        if rec.observed_count is not None
    }

    groups: List[CompiledGroup] = []
    flat_children: List[int] = []
    flat_conc: List[float] = []
    declared = [rec.id for rec in augmented.nodes]
    start = 0
    for parent in sorted(augmented.branch_groups, key=declared.index):
        group = augmented.branch_groups[parent]
        prior = priors.group_for(parent)
        conc = np.asarray(prior.concentration, dtype=float)
        k = len(group.children)
        groups.append(
            CompiledGroup(
                parent=parent,
                children=group.children,
                concentration=conc,
                name=prior.name or f"p{parent}",
                parent_idx=node_index[parent],
                child_idx=np.array([node_index[c] for c in group.children], dtype=np.intp),
                flat_slice=slice(start, start + k),
            )
        )
        flat_children.extend(node_index[c] for c in group.children)
        flat_conc.extend(conc)
        start += k

    group_pos = {g.parent: gi for gi, g in enumerate(groups)}

    free: List[FreeLatent] = []
    for rec in augmented.nodes:
        if rec.role in (ROLE_LEAF, ROLE_UNCERTAINTY) and rec.observed_count is None:
            path = augmented.path_to(rec.id)
            cols = []
            for parent, child in path.edge_sequence:
                g = groups[group_pos[parent]]
                cols.append(g.flat_slice.start + g.children.index(child))
            ancestors = [node_index[parent] for parent, _ in path.edge_sequence]
            free.append(
                FreeLatent(
                    name=rec.id,
                    idx=node_index[rec.id],
                    ancestor_idx=np.array(ancestors, dtype=np.intp),
                    path_cols=np.array(cols, dtype=np.intp),
                )
            )

    internal = [
        rec for rec in augmented.nodes if rec.role in (ROLE_ROOT, ROLE_INTERNAL)
    ]
    bottom_up = sorted(internal, key=lambda rec: -augmented.depth(rec.id))
    bottom_up_idx = tuple(
        (
            node_index[rec.id],
            np.array(
                [node_index[c] for c in augmented.branch_groups[rec.id].children],
                dtype=np.intp,
            ),
        )
        for rec in bottom_up
    )

    return BayesModel(
        tree=augmented,
        root_prior=priors.root,
        groups=tuple(groups),
        free_latents=tuple(f.name for f in free),
        node_ids=node_ids,
        node_index=node_index,
        observed=observed,
        _free=tuple(free),
        _bottom_up=bottom_up_idx,
        _flat_children=np.array(flat_children, dtype=np.intp),
        _flat_conc=np.array(flat_conc, dtype=float),
    )


# ---------------------------------------------------------------------------
# state construction and the joint density


def derive_counts(model: BayesModel, latent_counts: Dict[str, int]) -> Dict[str, int]:
    """All node counts implied by observed data plus the free latents."""
    counts: Dict[str, int] = dict(model.observed)
    for name in model.free_latents:
        value = latent_counts[name]
        if value < 0 or value != int(value):
            raise ModelError(f"latent count {name}={value!r} must be a nonnegative integer")
        counts[name] = int(value)
    for node_idx, child_idx in model._bottom_up:
        node = model.node_ids[node_idx]
        counts[node] = sum(counts[model.node_ids[i]] for i in child_idx)
    return counts


def initial_state(model: BayesModel) -> LatentState:
    """Deterministic initialization inside the typical set.

    Each free leaf starts at its prior-mean share of the already-known
    sibling mass: ``round(f / (1 - sum of free siblings' f) * observed)``.
    Groups with no informed siblings fall back to prior-mean shares of a
    top-down root estimate.  Branch probabilities start at prior means.
    """
    counts: Dict[str, Optional[int]] = {nid: None for nid in model.node_ids}
    counts.update(model.observed)

    share: Dict[Tuple[str, str], float] = {}
    for g in model.groups:
        total = g.concentration.sum()
        for child, a in zip(g.children, g.concentration):
            share[(g.parent, child)] = float(a / total)

    def top_down_estimate(parent: str) -> float:
        est = float(model.root_prior.typical())
        path = model.tree.path_to(parent)
        for p, c in path.edge_sequence:
            est *= share[(p, c)]
        return est

    by_depth = sorted(model.groups, key=lambda g: -model.tree.depth(g.parent))
    free_set = set(model.free_latents)
    for g in by_depth:
        free_here = [c for c in g.children if c in free_set]
        if not free_here:
            known = [counts[c] for c in g.children if counts[c] is not None]
            if counts[g.parent] is None and len(known) == len(g.children):
                counts[g.parent] = sum(known)
            continue
        known_sum = sum(counts[c] for c in g.children if counts[c] is not None)
        f_free = sum(share[(g.parent, c)] for c in free_here)
        if known_sum > 0 and f_free < 1.0:
            for c in free_here:
                counts[c] = int(round(share[(g.parent, c)] / (1.0 - f_free) * known_sum))
        else:
            parent_est = top_down_estimate(g.parent)
            for c in free_here:
                counts[c] = int(round(share[(g.parent, c)] * parent_est))
        counts[g.parent] = sum(counts[c] for c in g.children)

    latents = {name: counts[name] for name in model.free_latents}
    probs = {
        g.parent: g.concentration / g.concentration.sum() for g in model.groups
    }
    return LatentState(
        latent_counts=latents, branch_probs=probs, derived=derive_counts(model, latents)
    )


def default_step_sizes(model: BayesModel, state: Optional[LatentState] = None) -> Dict[str, int]:
    """Random-walk half-widths: max(1, round(0.1 * initialization value))."""
    state = state or initial_state(model)
    return {
        name: max(1, int(round(0.1 * state.latent_counts[name])))
        for name in model.free_latents
    }


def _multinomial_loglik(parent_count, child_counts, probs) -> float:
    """log [ N! / prod(n_i!) * prod(p_i^n_i) ] with N the parent count."""
    n = np.asarray(child_counts, dtype=float)
    p = np.asarray(probs, dtype=float)
    if np.any((p <= 0) & (n > 0)):
        return -np.inf
    safe = p > 0
    return float(
        gammaln(parent_count + 1.0)
        - gammaln(n + 1.0).sum()
        + (n[safe] * np.log(p[safe])).sum()
    )


def _dirichlet_logpdf(probs, conc) -> float:
    p = np.asarray(probs, dtype=float)
    a = np.asarray(conc, dtype=float)
    if np.any(p <= 0):
        return -np.inf
    return float(
        gammaln(a.sum()) - gammaln(a).sum() + ((a - 1.0) * np.log(p)).sum()
    )


def log_posterior(model: BayesModel, state: LatentState) -> float:
    """Log joint density: root prior + per-group Dirichlet priors and
    multinomial likelihoods.  Impossible states return -inf."""
    counts = derive_counts(model, state.latent_counts)
    z = counts[model.tree.root().id]
    total = float(model.root_prior.log_density(np.array([z]))[0])
    if not np.isfinite(total):
        return -np.inf
    for g in model.groups:
        probs = state.branch_probs[g.parent]
        total += _dirichlet_logpdf(probs, g.concentration)
        total += _multinomial_loglik(
            counts[g.parent], [counts[c] for c in g.children], probs
        )
    return total


def gibbs_update_branch_probs(
    model: BayesModel, state: LatentState, rng: RngLike
) -> LatentState:
    """Exact conjugate redraw: Dirichlet(prior concentration + child counts)."""
    gen = as_generator(rng)
    counts = derive_counts(model, state.latent_counts)
    probs = {}
    for g in model.groups:
        alpha = g.concentration + np.array([counts[c] for c in g.children], dtype=float)
        probs[g.parent] = gen.dirichlet(alpha)
    return LatentState(
        latent_counts=dict(state.latent_counts), branch_probs=probs, derived=counts
    )


def mh_update_latent_counts(
    model: BayesModel,
    state: LatentState,
    rng: RngLike,
    step_sizes: Optional[Dict[str, int]] = None,
) -> LatentState:
    """One random-walk sweep over the free latents, in declaration order.

    Proposals are uniform on {-h..-1, 1..h}; negative counts are rejected
    outright; otherwise acceptance follows the log-posterior difference.
    """
    gen = as_generator(rng)
    steps = step_sizes or default_step_sizes(model, state)
    latents = dict(state.latent_counts)
    current = LatentState(
        latent_counts=latents,
        branch_probs=state.branch_probs,
        derived=derive_counts(model, latents),
    )
    lp = log_posterior(model, current)
    for name in model.free_latents:
        h = int(steps[name])
        j = int(gen.integers(0, 2 * h))
        delta = j - h if j < h else j - h + 1
        proposal = latents[name] + delta
        u = gen.random()
        if proposal < 0:
            continue
        trial = dict(latents)
        trial[name] = proposal
        trial_state = LatentState(
            latent_counts=trial,
            branch_probs=state.branch_probs,
            derived=derive_counts(model, trial),
        )
        lp_new = log_posterior(model, trial_state)
        if math.log(u) < lp_new - lp:
            latents = trial
            lp = lp_new
    return LatentState(
        latent_counts=latents,
        branch_probs=state.branch_probs,
        derived=derive_counts(model, latents),
    )


# ---------------------------------------------------------------------------
# chain runner


@dataclass(frozen=True)
class ChainConfig:
    chains: int
    iterations: int
    burn_in: int
    thin: int = 1
    seed: int = 0
    step_sizes: Optional[Dict[str, int]] = None
    adapt: bool = True
    keep_traces: bool = False
    stream_ids: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.chains < 2:
            raise ValueError("need at least 2 chains for split R-hat")
        if self.iterations <= 0 or not (0 <= self.burn_in < self.iterations):
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.stream_ids is not None and len(self.stream_ids) != self.chains:
            raise ValueError("stream_ids must list one id per chain")


@dataclass(frozen=True)
class QuantityStats:
    mean: float
    sd: float
    q2_5: float
    median: float
    q97_5: float
    ess: float
    rhat: float


@dataclass
class PosteriorSummary:
    quantities: Dict[str, QuantityStats]
    acf: Dict[str, np.ndarray]
    traces: Optional[Dict[str, np.ndarray]]
    acceptance: Dict[str, np.ndarray]
    final_step_sizes: Dict[str, np.ndarray]
    config: ChainConfig

    def mean(self, quantity: str) -> float:
        return self.quantities[quantity].mean

    def max_rhat(self) -> float:
        return max(q.rhat for q in self.quantities.values())

    def min_ess(self) -> float:
        return min(q.ess for q in self.quantities.values())


def run_chains(model: BayesModel, config: ChainConfig) -> PosteriorSummary:
    """Sample the posterior with independent lockstep chains.

    Per iteration every branch vector redraws from its conjugate
    conditional, then every free latent takes one random-walk step.  Step
    half-widths adapt toward [20%, 50%] acceptance during burn-in only, so
    the kept draws target the exact posterior.  The root count is reported
    as the sum of its children at every kept iteration.
    """
    ch = config.chains
    stream_ids = config.stream_ids or tuple(range(ch))
    gens = [RngStream(config.seed, sid).generator() for sid in stream_ids]

    state0 = initial_state(model)
    lp0 = log_posterior(model, state0)
    if not np.isfinite(lp0):
        raise ModelError("invalid initialization: nonfinite log-posterior")

    node_ids = model.node_ids
    n_nodes = len(node_ids)
    counts = np.tile(
        np.array([float(state0.derived[nid]) for nid in node_ids]), (ch, 1)
    )
    root_idx = model.node_index[model.tree.root().id]

    free = model._free
    n_free = len(free)
    base_steps = config.step_sizes or default_step_sizes(model)
    h = np.tile(
        np.array([float(base_steps[f.name]) for f in free]), (ch, 1)
    )  # (ch, n_free)

    flat_conc = model._flat_conc
    flat_children = model._flat_children
    n_flat = flat_children.size
    probs_flat = np.empty((ch, n_flat))
    for g in model.groups:
        probs_flat[:, g.flat_slice] = (g.concentration / g.concentration.sum())[None, :]

    count_q = model.count_quantities()
    prob_q = model.prob_quantities()
    count_q_idx = np.array([model.node_index[q] for q in count_q], dtype=np.intp)
    n_quant = len(count_q) + len(prob_q)
    kept_per_chain = (config.iterations - config.burn_in + config.thin - 1) // config.thin
    draws = np.empty((n_quant, ch, kept_per_chain))

    accepts = np.zeros((ch, n_free))
    window_accepts = np.zeros((ch, n_free))
    proposals_total = 0

    latent_idx = np.array([f.idx for f in free], dtype=np.intp)
    update_idx = [
        np.concatenate(([f.idx], f.ancestor_idx)).astype(np.intp) for f in free
    ]
    path_cols = [f.path_cols for f in free]

    root_prior = model.root_prior
    kept = 0
    u_prop = u_acc = None
    block_pos = _BLOCK  # force initial fill

    for it in range(config.iterations):
        # --- refill pregenerated MH uniforms, one block per chain stream
        if block_pos == _BLOCK:
            u_prop = np.stack([g.random((_BLOCK, n_free)) for g in gens])  # (ch, B, L)
            u_acc = np.stack([g.random((_BLOCK, n_free)) for g in gens])
            block_pos = 0

        # --- Gibbs: conjugate redraw of every branch vector
        alpha = flat_conc[None, :] + counts[:, flat_children]
        gam = np.empty_like(alpha)
        for c, g in enumerate(gens):
            gam[c] = g.standard_gamma(alpha[c])
        for grp in model.groups:
            s = grp.flat_slice
            gam[:, s] /= gam[:, s].sum(axis=1, keepdims=True)
        probs_flat = gam
        log_probs = np.log(probs_flat)

        # --- Metropolis sweep over free latents
        z = counts[:, root_idx]
        rho_z = root_prior.log_density(z)
        for li in range(n_free):
            hv = h[:, li]
            u = u_prop[:, block_pos, li]
            j = np.floor(u * 2.0 * hv)
            delta = np.where(j < hv, j - hv, j - hv + 1.0)
            lv = counts[:, latent_idx[li]]
            lnew = lv + delta
            znew = z + delta
            ok = lnew >= 0.0
            logpi = log_probs[:, path_cols[li]].sum(axis=1)
            dlp = (
                gammaln(znew + 1.0)
                - gammaln(z + 1.0)
                - gammaln(lnew + 1.0)
                + gammaln(lv + 1.0)
                + delta * logpi
                + root_prior.log_density(znew)
                - rho_z
            )
            with np.errstate(divide="ignore", invalid="ignore"):
                accept = ok & (np.log(u_acc[:, block_pos, li]) < dlp)
            if accept.any():
                step = np.where(accept, delta, 0.0)
                counts[:, update_idx[li]] += step[:, None]
                z = counts[:, root_idx]
                rho_z = np.where(accept, root_prior.log_density(z), rho_z)
            window_accepts[:, li] += accept
            accepts[:, li] += accept
        block_pos += 1
        proposals_total += 1

        # --- step-size adaptation, burn-in only
        if config.adapt and it < config.burn_in and (it + 1) % ADAPT_WINDOW == 0:
            rate = window_accepts / ADAPT_WINDOW
            h = np.where(rate < ADAPT_LOW, np.maximum(1.0, np.floor(h * 0.7)), h)
            h = np.where(rate > ADAPT_HIGH, np.ceil(h * 1.4), h)
            window_accepts[:] = 0.0

        # --- record
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            draws[: len(count_q), :, kept] = counts[:, count_q_idx].T
            draws[len(count_q) :, :, kept] = probs_flat.T
            kept += 1

    draws = draws[:, :, :kept]
    names = list(count_q) + list(prob_q)

    quantities: Dict[str, QuantityStats] = {}
    acf_out: Dict[str, np.ndarray] = {}
    for qi, name in enumerate(names):
        series = draws[qi]  # (chains, kept)
        pooled = series.ravel()
        quantities[name] = QuantityStats(
            mean=float(pooled.mean()),
            sd=float(pooled.std(ddof=1)),
            q2_5=float(np.quantile(pooled, 0.025)),
            median=float(np.quantile(pooled, 0.5)),
            q97_5=float(np.quantile(pooled, 0.975)),
            ess=float(ess_fn(series)),
            rhat=float(split_rhat(series)),
        )
        acf_out[name] = acf_fn(series, ACF_LAG)

    traces = None
    if config.keep_traces:
        traces = {name: draws[qi].copy() for qi, name in enumerate(names)}

    return PosteriorSummary(
        quantities=quantities,
        acf=acf_out,
        traces=traces,
        acceptance={
            f.name: accepts[:, li] / proposals_total for li, f in enumerate(free)
        },
        final_step_sizes={f.name: h[:, li].copy() for li, f in enumerate(free)},
        config=config,
    )
