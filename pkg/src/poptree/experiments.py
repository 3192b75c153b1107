"""Declarative scenario suites over both engines: prior sensitivity,
value-of-information (data deletion), and aggregation studies.

A scenario is the baseline plus an optional tree transform, optional prior
or branch overrides, and a run configuration.  Scenario seeds derive from a
suite seed and a digest of the scenario's run-relevant content, so a
scenario that changes nothing reproduces the baseline bit for bit, while
any substantive change decorrelates the streams.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .bayes import (
    BayesModel,
    BayesPriors,
    ChainConfig,
    GroupPrior,
    PosteriorSummary,
    RootPrior,
    build_model,
    run_chains,
)
from .tree import (
    BranchGroupSpec,
    EvidenceTree,
    SpecKind,
    TreeError,
    aggregate_siblings,
    delete_node_data,
)
from .wmm import WmmConfig, WmmRun, run_wmm

RHAT_FLAG = 1.05
ESS_FLAG = 400.0


class ScenarioError(ValueError):
    """Ill-formed scenario or suite."""


@dataclass(frozen=True)
class TreeTransform:
    """Optional structural change applied before running a scenario."""

    aggregate: Tuple[Tuple[str, Tuple[str, ...], str], ...] = ()
    delete_data: Tuple[str, ...] = ()

    def apply(self, tree: EvidenceTree) -> EvidenceTree:
        out = tree
        if self.aggregate:
            out = aggregate_siblings(out, list(self.aggregate))
        if self.delete_data:
            out = delete_node_data(out, self.delete_data)
        return out


@dataclass(frozen=True)
class Scenario:
    """One named run: engine, optional transform and overrides, run config.

    ``prior_overrides`` maps a group name (or "root") to a replacement for
    the Bayes engine; ``branch_overrides`` maps a parent node id to a
    replacement sampling spec for the WMM engine.  ``expect`` holds
    direction-of-change assertions against the baseline, keyed by quantity:
    "+" / "-" (any change of that sign), "+0.10" (relative delta above
    +0.10), "-0.10" (below -0.10), or "~0.02" (absolute relative delta
    under 0.02).
    """

    name: str
    engine: str  # "wmm" | "bayes"
    run_config: Union[WmmConfig, ChainConfig]
    transform: Optional[TreeTransform] = None
    prior_overrides: Dict[str, object] = field(default_factory=dict)
    branch_overrides: Dict[str, SpecKind] = field(default_factory=dict)
    expect: Dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ScenarioResult:
    name: str
    summaries: Dict[str, Tuple[float, float, float]]  # quantity -> (mean, lo, hi)
    deltas: Dict[str, float]  # relative delta vs baseline mean
    max_rhat: Optional[float]
    min_ess: Optional[float]
    flagged: bool
    direction_checks: Dict[str, bool]


@dataclass
class ScenarioReport:
    baseline: str
    results: Tuple[ScenarioResult, ...]

    def result(self, name: str) -> ScenarioResult:
        for r in self.results:
            if r.name == name:
                return r
        raise ScenarioError(f"no scenario named {name!r}")

    def all_directions_hold(self) -> bool:
        return all(ok for r in self.results for ok in r.direction_checks.values())


def _enc(obj):
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    if isinstance(obj, dict):
        return {str(k): _enc(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_enc(v) for v in obj]
    if hasattr(obj, "__dataclass_fields__"):
        return {
            "__kind__": type(obj).__name__,
            **{f: _enc(getattr(obj, f)) for f in obj.__dataclass_fields__},
        }
    return repr(obj)


def _content_digest(scenario: Scenario, tree: EvidenceTree, priors) -> int:
    """Digest of the effective run inputs, so that two scenarios producing
    the same run (however expressed) derive the same stream."""
    config = scenario.run_config
    payload = json.dumps(
        {
            "engine": scenario.engine,
            "tree": _enc(tree),
            "priors": _enc(priors),
            "run": _enc(replace(config, seed=0)),
        },
        sort_keys=True,
    )
    return int.from_bytes(hashlib.sha256(payload.encode()).digest()[:8], "big")


def _apply_branch_overrides(tree: EvidenceTree, overrides: Dict[str, SpecKind]) -> EvidenceTree:
    if not overrides:
        return tree
    branch_groups = dict(tree.branch_groups)
    for parent, spec in overrides.items():
        group = branch_groups.get(parent)
        if group is None:
            raise ScenarioError(f"unknown branch group {parent!r} in override")
        branch_groups[parent] = BranchGroupSpec(
            parent=parent, children=group.children, spec=spec
        )
    return EvidenceTree(
        name=tree.name, nodes=tree.nodes, edges=dict(tree.edges), branch_groups=branch_groups
    )


def _apply_prior_overrides(priors: BayesPriors, overrides: Dict[str, object]) -> BayesPriors:
    if not overrides:
        return priors
    root = priors.root
    groups = list(priors.groups)
    for key, value in overrides.items():
        if key == "root":
            if not isinstance(value, RootPrior):
                raise ScenarioError("root override must be a RootPrior")
            root = value
            continue
        hit = False
        for i, g in enumerate(groups):
            if g.name == key or g.parent == key:
                conc = tuple(float(a) for a in value)
                if len(conc) != len(g.concentration):
                    raise ScenarioError(
                        f"override for prior {key!r} has dimension {len(conc)}, "
                        f"expected {len(g.concentration)}"
                    )
                groups[i] = replace(g, concentration=conc)
                hit = True
                break
        if not hit:
            raise ScenarioError(f"unknown prior {key!r} in override")
    return BayesPriors(root=root, groups=tuple(groups))


def aggregate_model_inputs(
    tree: EvidenceTree,
    priors: BayesPriors,
    groups: Sequence[Tuple[str, Sequence[str], str]],
) -> Tuple[EvidenceTree, BayesPriors]:
    """Aggregate sibling leaves in both the tree and its Bayes priors.

    The prior concentration of a merged leaf is the sum over the merged
    children (the Dirichlet aggregation property), so the aggregated model
    is the exact collapse of the segregated one.
    """
    new_tree = aggregate_siblings(tree, list(groups))
    new_groups = list(priors.groups)
    for parent, subset, new_label in groups:
        old_children = tree.branch_groups[parent].children
        gi = next(
            (i for i, g in enumerate(new_groups) if g.parent == parent), None
        )
        if gi is None:
            raise ScenarioError(f"no Bayes prior at {parent!r}")
        g = new_groups[gi]
        conc = list(g.concentration)
        # positions follow the pre-merge child order, plus a possible trailing
        # uncertainty component that aggregation must preserve
        idx = [old_children.index(c) for c in subset]
        keep = [i for i, c in enumerate(old_children) if c not in subset]
        merged_children = new_tree.branch_groups[parent].children
        merged_pos = merged_children.index(new_label)
        merged_value = sum(conc[i] for i in idx)
        tail = conc[len(old_children) :]  # uncertainty component, if any
        reduced = [conc[i] for i in keep]
        reduced.insert(merged_pos, merged_value)
        new_groups[gi] = replace(g, concentration=tuple(reduced + tail))
    return new_tree, BayesPriors(root=priors.root, groups=tuple(new_groups))


def _check_direction(rule: str, delta: float) -> bool:
    rule = rule.strip()
    if rule == "+":
        return delta > 0
    if rule == "-":
        return delta < 0
    if rule.startswith("~"):
        return abs(delta) < float(rule[1:])
    if rule.startswith("+"):
        return delta > float(rule[1:])
    if rule.startswith("-"):
        return delta < -float(rule[1:])
    raise ScenarioError(f"bad direction rule {rule!r}")


def _wmm_summaries(run: WmmRun) -> Dict[str, Tuple[float, float, float]]:
    lo, hi = run.quantile_interval
    return {"root": (run.mean, lo, hi)}


def _bayes_summaries(summary: PosteriorSummary) -> Dict[str, Tuple[float, float, float]]:
    return {
        name: (s.mean, s.q2_5, s.q97_5) for name, s in summary.quantities.items()
    }


def _effective_inputs(
    scenario: Scenario, tree: EvidenceTree, priors: Optional[BayesPriors]
) -> Tuple[EvidenceTree, Optional[BayesPriors]]:
    worked = tree if scenario.transform is None else scenario.transform.apply(tree)
    if scenario.engine == "wmm":
        return _apply_branch_overrides(worked, scenario.branch_overrides), None
    if scenario.engine == "bayes":
        if priors is None:
            raise ScenarioError(f"scenario {scenario.name!r} needs Bayes priors")
        return worked, _apply_prior_overrides(priors, scenario.prior_overrides)
    raise ScenarioError(f"unknown engine {scenario.engine!r}")


def run_scenario(
    scenario: Scenario,
    tree: EvidenceTree,
    priors: Optional[BayesPriors],
    seed: Optional[int] = None,
):
    """Execute one scenario; returns the engine-native result object."""
    worked, used = _effective_inputs(scenario, tree, priors)
    config = scenario.run_config
    if seed is not None:
        config = replace(config, seed=seed)
    if scenario.engine == "wmm":
        return run_wmm(worked, config)
    return run_chains(build_model(worked, used), config)


def run_suite(
    scenarios: Sequence[Scenario],
    baseline: str,
    tree: EvidenceTree,
    priors: Optional[BayesPriors] = None,
    suite_seed: int = 0,
) -> ScenarioReport:
    """Run every scenario and compare each against the named baseline.

    Scenarios whose worst split R-hat exceeds 1.05 or whose smallest ESS
    falls under 400 are flagged.  Engine errors propagate annotated with
    the scenario name.
    """
    if not scenarios:
        raise ScenarioError("empty scenario list")
    names = [s.name for s in scenarios]
    if names.count(baseline) != 1:
        raise ScenarioError(f"baseline {baseline!r} must appear exactly once")

    raw: Dict[str, object] = {}
    for scenario in scenarios:
        try:
            worked, used = _effective_inputs(scenario, tree, priors)
            digest = _content_digest(scenario, worked, used)
            seed = (suite_seed * 0x9E3779B97F4A7C15 + digest) % (1 << 63)
            raw[scenario.name] = run_scenario(scenario, tree, priors, seed=seed)
        except Exception as exc:
            raise type(exc)(f"scenario {scenario.name!r}: {exc}") from exc

    def summarize(scenario: Scenario):
        result = raw[scenario.name]
        if scenario.engine == "wmm":
            return _wmm_summaries(result), None, None
        summary = result
        return _bayes_summaries(summary), summary.max_rhat(), summary.min_ess()

    base_scenario = next(s for s in scenarios if s.name == baseline)
    base_summary, _, _ = summarize(base_scenario)

    results: List[ScenarioResult] = []
    for scenario in scenarios:
        summaries, max_rhat, min_ess = summarize(scenario)
        deltas = {}
        for quantity, (mean, _, _) in summaries.items():
            base = base_summary.get(quantity)
            if base is not None and base[0] != 0:
                deltas[quantity] = (mean - base[0]) / base[0]
        checks = {}
        for quantity, rule in scenario.expect.items():
            if quantity not in deltas:
                raise ScenarioError(
                    f"scenario {scenario.name!r}: no delta for quantity {quantity!r}"
                )
            checks[quantity] = _check_direction(rule, deltas[quantity])
        flagged = False
        if max_rhat is not None:
            flagged = max_rhat > RHAT_FLAG or (
                min_ess is not None and not np.isnan(min_ess) and min_ess < ESS_FLAG
            )
        results.append(
            ScenarioResult(
                name=scenario.name,
                summaries=summaries,
                deltas=deltas,
                max_rhat=max_rhat,
                min_ess=min_ess,
                flagged=flagged,
                direction_checks=checks,
            )
        )
    return ScenarioReport(baseline=baseline, results=tuple(results))


def wmm_branch_sensitivity(
    tree: EvidenceTree,
    branch: Tuple[str, str],
    alternates: Sequence[SpecKind],
    config: WmmConfig,
    expect: Optional[Sequence[str]] = None,
) -> ScenarioReport:
    """Re-run the WMM replacing one branch group spec per alternate.

    ``branch`` is (parent, child); the override replaces the whole sibling
    group at ``parent`` (branch vectors live at group level).  Optional
    per-alternate direction rules are checked against the baseline mean.
    """
    parent, child = branch
    group = tree.branch_groups.get(parent)
    if group is None or child not in group.children:
        raise ScenarioError(f"unknown branch {parent!r}->{child!r}")
    scenarios = [Scenario(name="baseline", engine="wmm", run_config=config)]
    for i, alt in enumerate(alternates):
        rule = {} if expect is None else {"root": expect[i]}
        scenarios.append(
            Scenario(
                name=f"alternate-{i}",
                engine="wmm",
                run_config=config,
                branch_overrides={parent: alt},
                expect=rule,
            )
        )
    return run_suite(scenarios, baseline="baseline", tree=tree, suite_seed=config.seed)
