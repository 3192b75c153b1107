"""Declarative tree-spec and scenario-suite files.

Both formats are TOML.  A tree file declares ``nodes`` (order fixes all
reporting order), ``edges`` (child -> parent), ``branch_groups`` (ordered
children plus a sampling spec), and an optional ``priors`` block holding
the Bayes root prior and per-group concentrations.  Parsing is strict:
unknown fields are errors carrying their location path; ``lenient=True``
downgrades them to returned warnings.  ``parse -> serialize -> parse`` is
the identity on the parsed objects, and the tree digest is a content hash
of the canonical serialization.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .bayes import BayesPriors, ChainConfig, GroupPrior, RootPrior
from .experiments import Scenario, TreeTransform
from .tree import (
    ROLES,
    BetaSurveyPerChild,
    BranchGroupSpec,
    DirichletPrior,
    DirichletSurvey,
    EvidenceTree,
    Fixed,
    NodeRecord,
    SpecKind,
    validate_tree,
)
from .wmm import WmmConfig


class SpecFileError(ValueError):
    """Syntax or semantic error in a tree or scenario file."""


# ---------------------------------------------------------------------------
# strict-walk helpers


def _check_keys(table: dict, allowed: set, where: str, lenient: bool, warnings: List[str]):
    unknown = sorted(set(table) - allowed)
    for key in unknown:
        message = f"{where}: unknown field {key!r}"
        if lenient:
            warnings.append(message)
        else:
            raise SpecFileError(message)


def _need(table: dict, key: str, where: str):
    if key not in table:
        raise SpecFileError(f"{where}: missing field {key!r}")
    return table[key]


def _as_str(value, where: str) -> str:
    if not isinstance(value, str):
        raise SpecFileError(f"{where}: expected a string, got {type(value).__name__}")
    return value


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecFileError(f"{where}: expected an integer, got {type(value).__name__}")
    return value


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecFileError(f"{where}: expected a number, got {type(value).__name__}")
    return float(value)


def _as_list(value, where: str) -> list:
    if not isinstance(value, list):
        raise SpecFileError(f"{where}: expected an array, got {type(value).__name__}")
    return value


# ---------------------------------------------------------------------------
# branch-spec tables


def _parse_spec(table: dict, where: str, lenient: bool, warnings: List[str]) -> SpecKind:
    kind = _as_str(_need(table, "kind", where), f"{where}.kind")
    if kind == "dirichlet-survey":
        _check_keys(table, {"kind", "counts", "total", "parent", "children"}, where, lenient, warnings)
        counts = tuple(
            _as_int(v, f"{where}.counts[{i}]")
            for i, v in enumerate(_as_list(_need(table, "counts", where), f"{where}.counts"))
        )
        return DirichletSurvey(counts=counts, total=_as_int(_need(table, "total", where), f"{where}.total"))
    if kind == "beta-survey":
        _check_keys(table, {"kind", "surveys", "parent", "children"}, where, lenient, warnings)
        surveys = []
        for i, entry in enumerate(_as_list(_need(table, "surveys", where), f"{where}.surveys")):
            sub = f"{where}.surveys[{i}]"
            if not isinstance(entry, dict):
                raise SpecFileError(f"{sub}: expected a table")
            if not entry:
                surveys.append(None)
                continue
            _check_keys(entry, {"x", "n"}, sub, lenient, warnings)
            surveys.append((_as_int(_need(entry, "x", sub), f"{sub}.x"), _as_int(_need(entry, "n", sub), f"{sub}.n")))
        return BetaSurveyPerChild(surveys=tuple(surveys))
    if kind == "dirichlet-prior":
        _check_keys(table, {"kind", "concentration", "parent", "children"}, where, lenient, warnings)
        conc = tuple(
            _as_number(v, f"{where}.concentration[{i}]")
            for i, v in enumerate(_as_list(_need(table, "concentration", where), f"{where}.concentration"))
        )
        return DirichletPrior(concentration=conc)
    if kind == "fixed":
        _check_keys(table, {"kind", "probabilities", "parent", "children"}, where, lenient, warnings)
        probs = tuple(
            _as_number(v, f"{where}.probabilities[{i}]")
            for i, v in enumerate(_as_list(_need(table, "probabilities", where), f"{where}.probabilities"))
        )
        return Fixed(probabilities=probs)
    raise SpecFileError(f"{where}: unknown spec kind {kind!r}")


def _parse_root_prior(table: dict, where: str, lenient: bool, warnings: List[str]) -> RootPrior:
    kind = _as_str(_need(table, "kind", where), f"{where}.kind")
    if kind == "lognormal":
        _check_keys(table, {"kind", "median", "log_mean", "log_sd"}, where, lenient, warnings)
        if ("median" in table) == ("log_mean" in table):
            raise SpecFileError(f"{where}: give exactly one of median / log_mean")
        log_sd = _as_number(_need(table, "log_sd", where), f"{where}.log_sd")
        if "median" in table:
            return RootPrior.lognormal(median=_as_number(table["median"], f"{where}.median"), log_sd=log_sd)
        return RootPrior(kind="lognormal", log_mean=_as_number(table["log_mean"], f"{where}.log_mean"), log_sd=log_sd)
    if kind == "uniform":
        _check_keys(table, {"kind", "lower", "upper"}, where, lenient, warnings)
        return RootPrior.uniform(
            lower=_as_int(_need(table, "lower", where), f"{where}.lower"),
            upper=_as_int(_need(table, "upper", where), f"{where}.upper"),
        )
    raise SpecFileError(f"{where}: unknown root prior kind {kind!r}")


# ---------------------------------------------------------------------------
# tree files


def parse_tree_spec(
    text: str, lenient: bool = False
) -> Tuple[EvidenceTree, Optional[BayesPriors], List[str]]:
    """Parse a tree-spec document.

    Returns (tree, priors-or-None, warnings).  The tree is validated;
    violations raise :class:`SpecFileError`.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecFileError(f"syntax error: {exc}") from exc

    warnings: List[str] = []
    _check_keys(doc, {"name", "nodes", "edges", "branch_groups", "priors"}, "document", lenient, warnings)
    name = _as_str(doc.get("name", "tree"), "name")

    nodes: List[NodeRecord] = []
    seen = set()
    for i, table in enumerate(_as_list(_need(doc, "nodes", "document"), "nodes")):
        where = f"nodes[{i}]"
        _check_keys(table, {"id", "role", "count", "description"}, where, lenient, warnings)
        node_id = _as_str(_need(table, "id", where), f"{where}.id")
        if node_id in seen:
            raise SpecFileError(f"{where}: duplicate node id {node_id!r}")
        seen.add(node_id)
        role = _as_str(_need(table, "role", where), f"{where}.role")
        if role not in ROLES:
            raise SpecFileError(f"{where}: unknown role {role!r}")
        count = table.get("count")
        if count is not None:
            count = _as_int(count, f"{where}.count")
        nodes.append(
            NodeRecord(
                id=node_id,
                role=role,
                observed_count=count,
                description=_as_str(table.get("description", ""), f"{where}.description"),
            )
        )

    edges: Dict[str, str] = {}
    for i, table in enumerate(_as_list(_need(doc, "edges", "document"), "edges")):
        where = f"edges[{i}]"
        _check_keys(table, {"child", "parent"}, where, lenient, warnings)
        child = _as_str(_need(table, "child", where), f"{where}.child")
        if child in edges:
            raise SpecFileError(f"{where}: duplicate edge for child {child!r}")
        edges[child] = _as_str(_need(table, "parent", where), f"{where}.parent")

    branch_groups: Dict[str, BranchGroupSpec] = {}
    for i, table in enumerate(_as_list(_need(doc, "branch_groups", "document"), "branch_groups")):
        where = f"branch_groups[{i}]"
        parent = _as_str(_need(table, "parent", where), f"{where}.parent")
        if parent in branch_groups:
            raise SpecFileError(f"{where}: duplicate branch group for {parent!r}")
        children = tuple(
            _as_str(v, f"{where}.children[{j}]")
            for j, v in enumerate(_as_list(_need(table, "children", where), f"{where}.children"))
        )
        spec = _parse_spec(table, where, lenient, warnings)
        branch_groups[parent] = BranchGroupSpec(parent=parent, children=children, spec=spec)

    tree = EvidenceTree(name=name, nodes=tuple(nodes), edges=edges, branch_groups=branch_groups)
    violations = validate_tree(tree)
    if violations:
        raise SpecFileError("invalid tree: " + "; ".join(violations))

    priors: Optional[BayesPriors] = None
    if "priors" in doc:
        block = doc["priors"]
        where = "priors"
        _check_keys(block, {"root", "groups"}, where, lenient, warnings)
        root = _parse_root_prior(_need(block, "root", where), f"{where}.root", lenient, warnings)
        groups: List[GroupPrior] = []
        for i, table in enumerate(_as_list(_need(block, "groups", where), f"{where}.groups")):
            sub = f"{where}.groups[{i}]"
            _check_keys(table, {"parent", "name", "concentration", "uncertainty_label"}, sub, lenient, warnings)
            conc = tuple(
                _as_number(v, f"{sub}.concentration[{j}]")
                for j, v in enumerate(_as_list(_need(table, "concentration", sub), f"{sub}.concentration"))
            )
            groups.append(
                GroupPrior(
                    parent=_as_str(_need(table, "parent", sub), f"{sub}.parent"),
                    concentration=conc,
                    name=table.get("name"),
                    uncertainty_label=table.get("uncertainty_label"),
                )
            )
        priors = BayesPriors(root=root, groups=tuple(groups))

    return tree, priors, warnings


def _toml_str(value: str) -> str:
    return json.dumps(value)


def _toml_num(value) -> str:
    if isinstance(value, bool):
        raise SpecFileError("booleans have no place in a tree spec")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) and value == int(value) and abs(value) < 1e15:
        return f"{value:.1f}"
    return repr(float(value))


def serialize_tree_spec(tree: EvidenceTree, priors: Optional[BayesPriors] = None) -> str:
    """Canonical TOML serialization; declaration order is preserved."""
    out: List[str] = [f"name = {_toml_str(tree.name)}", ""]
    for rec in tree.nodes:
        out.append("[[nodes]]")
        out.append(f"id = {_toml_str(rec.id)}")
        out.append(f"role = {_toml_str(rec.role)}")
        if rec.observed_count is not None:
            out.append(f"count = {rec.observed_count}")
        if rec.description:
            out.append(f"description = {_toml_str(rec.description)}")
        out.append("")
    for rec in tree.nodes:
        parent = tree.edges.get(rec.id)
        if parent is None:
            continue
        out.append("[[edges]]")
        out.append(f"child = {_toml_str(rec.id)}")
        out.append(f"parent = {_toml_str(parent)}")
        out.append("")
    declared = [rec.id for rec in tree.nodes]
    for parent in sorted(tree.branch_groups, key=declared.index):
        group = tree.branch_groups[parent]
        out.append("[[branch_groups]]")
        out.append(f"parent = {_toml_str(parent)}")
        out.append("children = [" + ", ".join(_toml_str(c) for c in group.children) + "]")
        spec = group.spec
        if isinstance(spec, DirichletSurvey):
            out.append('kind = "dirichlet-survey"')
            out.append("counts = [" + ", ".join(str(x) for x in spec.counts) + "]")
            out.append(f"total = {spec.total}")
        elif isinstance(spec, BetaSurveyPerChild):
            out.append('kind = "beta-survey"')
            entries = [
                "{}" if s is None else f"{{x = {s[0]}, n = {s[1]}}}" for s in spec.surveys
            ]
            out.append("surveys = [" + ", ".join(entries) + "]")
        elif isinstance(spec, DirichletPrior):
            out.append('kind = "dirichlet-prior"')
            out.append(
                "concentration = [" + ", ".join(_toml_num(float(a)) for a in spec.concentration) + "]"
            )
        elif isinstance(spec, Fixed):
            out.append('kind = "fixed"')
            out.append(
                "probabilities = [" + ", ".join(_toml_num(float(p)) for p in spec.probabilities) + "]"
            )
        else:
            raise SpecFileError(f"unknown spec kind {type(spec).__name__}")
        out.append("")

    if priors is not None:
        out.append("[priors.root]")
        if priors.root.kind == "lognormal":
            out.append('kind = "lognormal"')
            out.append(f"log_mean = {_toml_num(priors.root.log_mean)}")
            out.append(f"log_sd = {_toml_num(priors.root.log_sd)}")
        else:
            out.append('kind = "uniform"')
            out.append(f"lower = {priors.root.lower}")
            out.append(f"upper = {priors.root.upper}")
        out.append("")
        for g in priors.groups:
            out.append("[[priors.groups]]")
            out.append(f"parent = {_toml_str(g.parent)}")
            if g.name:
                out.append(f"name = {_toml_str(g.name)}")
            out.append(
                "concentration = [" + ", ".join(_toml_num(float(a)) for a in g.concentration) + "]"
            )
            if g.uncertainty_label:
                out.append(f"uncertainty_label = {_toml_str(g.uncertainty_label)}")
            out.append("")
    return "\n".join(out)


def tree_digest(tree: EvidenceTree, priors: Optional[BayesPriors] = None) -> str:
    """Stable content hash of the canonical serialization."""
    return hashlib.sha256(serialize_tree_spec(tree, priors).encode()).hexdigest()


def load_tree_file(path, lenient: bool = False):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_tree_spec(text, lenient=lenient)
    except SpecFileError as exc:
        raise SpecFileError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# scenario files


_RUN_KEYS_WMM = {"iterations", "seed", "interval_mass"}
_RUN_KEYS_BAYES = {"chains", "iterations", "burn_in", "thin", "seed", "step_sizes"}


def _build_run_config(engine: str, table: dict, where: str) -> Union[WmmConfig, ChainConfig]:
    if engine == "wmm":
        bad = set(table) - _RUN_KEYS_WMM
        if bad:
            raise SpecFileError(f"{where}: unknown wmm run field {sorted(bad)[0]!r}")
        return WmmConfig(
            iterations=int(table.get("iterations", 10000)),
            seed=int(table.get("seed", 0)),
            interval_mass=float(table.get("interval_mass", 0.95)),
        )
    bad = set(table) - _RUN_KEYS_BAYES
    if bad:
        raise SpecFileError(f"{where}: unknown bayes run field {sorted(bad)[0]!r}")
    for key in ("chains", "iterations", "burn_in"):
        if key not in table:
            raise SpecFileError(f"{where}: missing bayes run field {key!r}")
    return ChainConfig(
        chains=int(table["chains"]),
        iterations=int(table["iterations"]),
        burn_in=int(table["burn_in"]),
        thin=int(table.get("thin", 1)),
        seed=int(table.get("seed", 0)),
        step_sizes=table.get("step_sizes"),
    )


@dataclass(frozen=True)
class SuiteSpec:
    name: str
    tree_path: str
    baseline: str
    seed: int
    scenarios: Tuple[Scenario, ...]


def parse_suite_spec(text: str, lenient: bool = False) -> Tuple[SuiteSpec, List[str]]:
    """Parse a scenario-suite document (same format family as tree specs)."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecFileError(f"syntax error: {exc}") from exc
    warnings: List[str] = []
    _check_keys(
        doc, {"name", "tree", "baseline", "seed", "defaults", "scenarios"}, "document", lenient, warnings
    )
    name = _as_str(doc.get("name", "suite"), "name")
    tree_path = _as_str(_need(doc, "tree", "document"), "tree")
    baseline = _as_str(_need(doc, "baseline", "document"), "baseline")
    seed = _as_int(doc.get("seed", 0), "seed")
    defaults = doc.get("defaults", {})
    _check_keys(defaults, {"wmm", "bayes"}, "defaults", lenient, warnings)

    scenarios: List[Scenario] = []
    for i, table in enumerate(_as_list(_need(doc, "scenarios", "document"), "scenarios")):
        where = f"scenarios[{i}]"
        _check_keys(
            table,
            {"name", "engine", "aggregate", "delete_data", "priors", "branches", "run", "expect"},
            where,
            lenient,
            warnings,
        )
        scenario_name = _as_str(_need(table, "name", where), f"{where}.name")
        engine = _as_str(_need(table, "engine", where), f"{where}.engine")
        if engine not in ("wmm", "bayes"):
            raise SpecFileError(f"{where}: unknown engine {engine!r}")

        run_table = dict(defaults.get(engine, {}))
        run_table.update(table.get("run", {}))
        run_config = _build_run_config(engine, run_table, f"{where}.run")

        transform = None
        aggregate = tuple(
            (str(entry[0]), tuple(str(c) for c in entry[1]), str(entry[2]))
            for entry in table.get("aggregate", [])
        )
        delete = tuple(str(v) for v in table.get("delete_data", []))
        if aggregate or delete:
            transform = TreeTransform(aggregate=aggregate, delete_data=delete)

        prior_overrides: Dict[str, object] = {}
        for key, value in table.get("priors", {}).items():
            if key == "root":
                prior_overrides["root"] = _parse_root_prior(
                    value, f"{where}.priors.root", lenient, warnings
                )
            else:
                prior_overrides[key] = tuple(
                    _as_number(v, f"{where}.priors.{key}[{j}]") for j, v in enumerate(value)
                )

        branch_overrides = {}
        for parent, spec_table in table.get("branches", {}).items():
            branch_overrides[parent] = _parse_spec(
                spec_table, f"{where}.branches.{parent}", lenient, warnings
            )

        expect = {
            str(k): _as_str(v, f"{where}.expect.{k}") for k, v in table.get("expect", {}).items()
        }

        scenarios.append(
            Scenario(
                name=scenario_name,
                engine=engine,
                run_config=run_config,
                transform=transform,
                prior_overrides=prior_overrides,
                branch_overrides=branch_overrides,
                expect=expect,
            )
        )

    return (
        SuiteSpec(name=name, tree_path=tree_path, baseline=baseline, seed=seed, scenarios=tuple(scenarios)),
        warnings,
    )
