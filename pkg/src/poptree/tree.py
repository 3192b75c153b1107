"""Evidence-tree data model: nodes, branch groups, validation and transforms.

An evidence tree is a rooted tree whose root is the hidden population of
interest, whose leaves may carry observed event counts, and whose internal
nodes each own one "branch group" describing how the probabilities of their
outgoing edges are distributed.  Trees are immutable after construction;
transforms return new trees.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

ROLE_ROOT = "root"
ROLE_INTERNAL = "internal"
ROLE_LEAF = "leaf"
ROLE_UNCERTAINTY = "uncertainty-leaf"
ROLES = (ROLE_ROOT, ROLE_INTERNAL, ROLE_LEAF, ROLE_UNCERTAINTY)

LEAF_ROLES = (ROLE_LEAF, ROLE_UNCERTAINTY)


class TreeError(ValueError):
    """Structurally invalid tree, or a transform applied where it cannot be."""


@dataclass(frozen=True)
class NodeRecord:
    """One population node.

    ``observed_count`` is an exact, unitless event count and is only legal on
    plain leaves: internal sums are never treated as evidence, and
    uncertainty leaves are latent by definition.
    """

    id: str
    role: str
    observed_count: Optional[int] = None
    description: str = ""


@dataclass(frozen=True)
class DirichletSurvey:
    """One survey of size ``total`` classifying its subjects into the children.

    ``counts[i]`` is the number of surveyed subjects seen in child ``i``.
    Sampled as Dirichlet(counts + 1).
    """

    counts: Tuple[int, ...]
    total: int


@dataclass(frozen=True)
class BetaSurveyPerChild:
    """Independent per-child surveys from possibly different sources.

    ``surveys[i]`` is an ``(x, n)`` pair for an informed child or ``None``
    for an uninformed one.  Each informed child is sampled as
    Beta(x + 1, n - x + 1); the group is reconciled onto the simplex by the
    sampler (complement, rejection, or importance weighting).
    """

    surveys: Tuple[Optional[Tuple[int, int]], ...]

    def informed_mask(self) -> Tuple[bool, ...]:
        return tuple(s is not None for s in self.surveys)


@dataclass(frozen=True)
class DirichletPrior:
    """Prior-only branch distribution with explicit concentrations."""

    concentration: Tuple[float, ...]


@dataclass(frozen=True)
class Fixed:
    """Deterministic branch probabilities."""

    probabilities: Tuple[float, ...]


SpecKind = Union[DirichletSurvey, BetaSurveyPerChild, DirichletPrior, Fixed]

FIXED_SUM_TOL = 1e-12


@dataclass(frozen=True)
class BranchGroupSpec:
    """How one parent's outgoing edge probabilities are sampled.

    ``children`` fixes the coordinate order used by every probability vector
    for this group.
    """

    parent: str
    children: Tuple[str, ...]
    spec: SpecKind

    def child_index(self, child: str) -> int:
        return self.children.index(child)


@dataclass(frozen=True)
class PathDescriptor:
    """A root-to-leaf path, as the ordered (parent, child) edges."""

    leaf: str
    edge_sequence: Tuple[Tuple[str, str], ...]


@dataclass(frozen=True)
class EvidenceTree:
    """A named, validated-on-demand evidence tree.

    ``nodes`` keeps declaration order, which fixes reporting order
    everywhere downstream.  ``edges`` maps child id to parent id.
    """

    name: str
    nodes: Tuple[NodeRecord, ...]
    edges: Dict[str, str]
    branch_groups: Dict[str, BranchGroupSpec]

    # -- lookups ---------------------------------------------------------

    def node(self, node_id: str) -> NodeRecord:
        for rec in self.nodes:
            if rec.id == node_id:
                return rec
        raise TreeError(f"unknown node {node_id!r}")

    def has_node(self, node_id: str) -> bool:
        return any(rec.id == node_id for rec in self.nodes)

    def root(self) -> NodeRecord:
        roots = [rec for rec in self.nodes if rec.role == ROLE_ROOT]
        if len(roots) != 1:
            raise TreeError(f"tree {self.name!r} has {len(roots)} root nodes")
        return roots[0]

    def parent(self, child: str) -> Optional[str]:
        return self.edges.get(child)

    def children(self, parent: str) -> Tuple[str, ...]:
        group = self.branch_groups.get(parent)
        if group is not None:
            return group.children
        return tuple(c for c, p in self.edges.items() if p == parent)

    def leaves(self) -> Tuple[NodeRecord, ...]:
        return tuple(rec for rec in self.nodes if rec.role in LEAF_ROLES)

    def observed_leaves(self) -> Tuple[NodeRecord, ...]:
        return tuple(rec for rec in self.leaves() if rec.observed_count is not None)

    def observed_total(self) -> int:
        return sum(rec.observed_count for rec in self.observed_leaves())

    def path_to(self, leaf: str) -> PathDescriptor:
        """Root-to-leaf edge sequence for ``leaf``."""
        edges: List[Tuple[str, str]] = []
        current = leaf
        seen = {leaf}
        while True:
            parent = self.edges.get(current)
            if parent is None:
                break
            if parent in seen:
                raise TreeError(f"cycle through {parent!r}")
            edges.append((parent, current))
            seen.add(parent)
            current = parent
        edges.reverse()
        return PathDescriptor(leaf=leaf, edge_sequence=tuple(edges))

    def depth(self, node_id: str) -> int:
        d = 0
        current = node_id
        while self.edges.get(current) is not None:
            current = self.edges[current]
            d += 1
        return d


# ---------------------------------------------------------------------------
# validation


def _spec_violations(group: BranchGroupSpec) -> List[str]:
    where = f"branch group at {group.parent!r}"
    out: List[str] = []
    spec = group.spec
    k = len(group.children)
    if isinstance(spec, DirichletSurvey):
        if len(spec.counts) != k:
            out.append(f"{where}: {len(spec.counts)} survey counts for {k} children")
        if any(x < 0 for x in spec.counts):
            out.append(f"{where}: negative survey count")
        if spec.total < 0:
            out.append(f"{where}: negative survey total")
        if sum(spec.counts) > spec.total:
            out.append(f"{where}: survey counts exceed total")
    elif isinstance(spec, BetaSurveyPerChild):
        if len(spec.surveys) != k:
            out.append(f"{where}: {len(spec.surveys)} surveys for {k} children")
        for child, survey in zip(group.children, spec.surveys):
            if survey is None:
                continue
            x, n = survey
            if not (0 <= x <= n):
                out.append(f"{where}: survey for child {child!r} has x outside [0, n]")
        if not any(s is not None for s in spec.surveys):
            out.append(f"{where}: no informed child")
    elif isinstance(spec, DirichletPrior):
        if len(spec.concentration) != k:
            out.append(f"{where}: {len(spec.concentration)} concentrations for {k} children")
        if any(a <= 0 for a in spec.concentration):
            out.append(f"{where}: nonpositive concentration")
    elif isinstance(spec, Fixed):
        if len(spec.probabilities) != k:
            out.append(f"{where}: {len(spec.probabilities)} probabilities for {k} children")
        if any(p < 0 for p in spec.probabilities):
            out.append(f"{where}: negative probability")
        elif abs(sum(spec.probabilities) - 1.0) > FIXED_SUM_TOL:
            out.append(f"{where}: probabilities sum to {sum(spec.probabilities)!r}, not 1")
    else:
        out.append(f"{where}: unknown spec kind {type(spec).__name__}")
    return out


def validate_tree(tree: EvidenceTree) -> List[str]:
    """Return every invariant violation; an empty list means the tree is valid.

    Violations are data, not failures: callers that require validity raise
    :class:`TreeError` themselves.
    """
    out: List[str] = []
    ids = [rec.id for rec in tree.nodes]
    id_set = set(ids)

    for rec in tree.nodes:
        if not rec.id:
            out.append("empty node id")
        if rec.role not in ROLES:
            out.append(f"node {rec.id!r}: unknown role {rec.role!r}")
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    for d in dupes:
        out.append(f"duplicate node id {d!r}")
    if dupes:
        return out

    roots = [rec.id for rec in tree.nodes if rec.role == ROLE_ROOT]
    if len(roots) == 0:
        out.append("no root node")
    elif len(roots) > 1:
        out.append(f"multiple roots: {', '.join(roots)}")

    for child, parent in tree.edges.items():
        if child not in id_set:
            out.append(f"edge references unknown child {child!r}")
        if parent not in id_set:
            out.append(f"edge references unknown parent {parent!r}")
    for rec in tree.nodes:
        if rec.role == ROLE_ROOT and rec.id in tree.edges:
            out.append(f"root {rec.id!r} has a parent")
        if rec.role != ROLE_ROOT and rec.id not in tree.edges:
            out.append(f"non-root node {rec.id!r} has no parent")

    # reachability / acyclicity from the child->parent map
    if len(roots) == 1:
        root_id = roots[0]
        for rec in tree.nodes:
            current, hops = rec.id, 0
            while current != root_id and hops <= len(ids):
                nxt = tree.edges.get(current)
                if nxt is None:
                    out.append(f"node {rec.id!r} is not connected to the root")
                    break
                current, hops = nxt, hops + 1
            else:
                if current != root_id:
                    out.append(f"cycle on the path from {rec.id!r} to the root")

    children_of: Dict[str, List[str]] = {}
    for child, parent in tree.edges.items():
        children_of.setdefault(parent, []).append(child)

    for rec in tree.nodes:
        kids = children_of.get(rec.id, [])
        if rec.role in LEAF_ROLES and kids:
            out.append(f"{rec.role} {rec.id!r} has children {sorted(kids)}")
        if rec.role in (ROLE_ROOT, ROLE_INTERNAL):
            if not kids:
                out.append(f"{rec.role} node {rec.id!r} has no children")
            group = tree.branch_groups.get(rec.id)
            if group is None:
                out.append(f"internal node {rec.id!r} has no branch group")
            elif sorted(group.children) != sorted(kids):
                out.append(
                    f"branch group at {rec.id!r} lists children {list(group.children)}, "
                    f"tree has {sorted(kids)}"
                )
        if rec.observed_count is not None:
            if rec.role != ROLE_LEAF:
                out.append(f"{rec.role} node {rec.id!r} carries an observed count")
            elif rec.observed_count < 0 or rec.observed_count != int(rec.observed_count):
                out.append(f"leaf {rec.id!r}: observed count must be a nonnegative integer")

    for parent, group in tree.branch_groups.items():
        if parent not in id_set:
            out.append(f"branch group for unknown parent {parent!r}")
            continue
        if group.parent != parent:
            out.append(f"branch group keyed {parent!r} names parent {group.parent!r}")
        out.extend(_spec_violations(group))

    return out


def require_valid(tree: EvidenceTree) -> EvidenceTree:
    violations = validate_tree(tree)
    if violations:
        raise TreeError(f"invalid tree {tree.name!r}: " + "; ".join(violations))
    return tree


# ---------------------------------------------------------------------------
# informed leaves


def _edge_informed(tree: EvidenceTree, parent: str, child: str) -> bool:
    group = tree.branch_groups[parent]
    if isinstance(group.spec, BetaSurveyPerChild):
        return group.spec.surveys[group.child_index(child)] is not None
    return True


def informed_leaves(tree: EvidenceTree) -> List[PathDescriptor]:
    """Leaves with an observed count whose whole root-to-leaf path is samplable.

    An edge is samplable unless it sits at an uninformed position of a
    :class:`BetaSurveyPerChild` group.  Output follows node declaration
    order, which makes reports stable.
    """
    out: List[PathDescriptor] = []
    for rec in tree.nodes:
        if rec.role != ROLE_LEAF or rec.observed_count is None:
            continue
        path = tree.path_to(rec.id)
        if all(_edge_informed(tree, p, c) for p, c in path.edge_sequence):
            out.append(path)
    return out


# ---------------------------------------------------------------------------
# transforms


def _merge_children(
    children: Tuple[str, ...], subset: Sequence[str], new_label: str
) -> Tuple[str, ...]:
    """Replace ``subset`` by ``new_label`` at the first member's position."""
    first = min(children.index(c) for c in subset)
    merged: List[str] = []
    for i, c in enumerate(children):
        if c in subset:
            if i == first:
                merged.append(new_label)
            continue
        merged.append(c)
    return tuple(merged)


def _merge_spec(
    group: BranchGroupSpec, subset: Sequence[str], new_children: Tuple[str, ...], new_label: str
) -> SpecKind:
    spec = group.spec
    idx = [group.child_index(c) for c in subset]
    keep = [i for i, c in enumerate(group.children) if c not in subset]
    first = min(idx)
    # position of the merged child in the new ordering
    merged_pos = new_children.index(new_label)

    def reorder(values, merged_value):
        reduced = [values[i] for i in keep]
        reduced.insert(merged_pos, merged_value)
        return tuple(reduced)

    if isinstance(spec, DirichletSurvey):
        return DirichletSurvey(
            counts=reorder(spec.counts, sum(spec.counts[i] for i in idx)),
            total=spec.total,
        )
    if isinstance(spec, DirichletPrior):
        return DirichletPrior(
            concentration=reorder(spec.concentration, sum(spec.concentration[i] for i in idx))
        )
    if isinstance(spec, Fixed):
        return Fixed(probabilities=reorder(spec.probabilities, sum(spec.probabilities[i] for i in idx)))
    if isinstance(spec, BetaSurveyPerChild):
        merged_surveys = [spec.surveys[i] for i in idx]
        if all(s is None for s in merged_surveys):
            return BetaSurveyPerChild(surveys=reorder(spec.surveys, None))
        totals = {s[1] for s in merged_surveys if s is not None}
        if None in [s for s in merged_surveys] or len(totals) > 1:
            raise TreeError(
                f"cannot aggregate across sources at {group.parent!r}: children "
                f"{list(subset)} are informed by different surveys; supply a "
                "DirichletPrior for the merged branch"
            )
        n = totals.pop()
        x = sum(s[0] for s in merged_surveys)
        return BetaSurveyPerChild(surveys=reorder(spec.surveys, (x, n)))
    raise TreeError(f"unknown spec kind {type(spec).__name__}")


def aggregate_siblings(
    tree: EvidenceTree,
    groups: Sequence[Tuple[str, Sequence[str], str]],
) -> EvidenceTree:
    """Merge sibling-leaf subsets into single leaves.

    Each entry is ``(parent, subset_of_sibling_leaves, new_label)``.  Counts
    add (the merged leaf has no count only when no member had one), and
    survey evidence merges by summing per-child counts within the same
    survey.  The total observed count over the tree is preserved.
    """
    require_valid(tree)
    nodes = list(tree.nodes)
    edges = dict(tree.edges)
    branch_groups = dict(tree.branch_groups)

    for parent, subset, new_label in groups:
        subset = list(subset)
        if not subset:
            raise TreeError("empty aggregation subset")
        group = branch_groups.get(parent)
        if group is None:
            raise TreeError(f"no branch group at {parent!r}")
        by_id = {rec.id: rec for rec in nodes}
        for c in subset:
            if c not in group.children:
                raise TreeError(f"{c!r} is not a child of {parent!r}")
            if by_id[c].role != ROLE_LEAF:
                raise TreeError(f"cannot aggregate non-leaf {c!r}")
        if new_label in by_id and new_label not in subset:
            raise TreeError(f"label {new_label!r} already names another node")

        new_children = _merge_children(group.children, subset, new_label)
        new_spec = _merge_spec(group, subset, new_children, new_label)

        counts = [by_id[c].observed_count for c in subset]
        present = [c for c in counts if c is not None]
        merged_count = sum(present) if present else None
        descriptions = [by_id[c].description for c in subset if by_id[c].description]
        if len(subset) == 1:
            description = descriptions[0] if descriptions else ""
        else:
            description = "aggregate of " + ", ".join(subset)
        merged_rec = NodeRecord(
            id=new_label, role=ROLE_LEAF, observed_count=merged_count, description=description
        )

        first_pos = min(i for i, rec in enumerate(nodes) if rec.id in subset)
        nodes = [rec for rec in nodes if rec.id not in subset]
        nodes.insert(min(first_pos, len(nodes)), merged_rec)
        for c in subset:
            edges.pop(c)
        edges[new_label] = parent
        branch_groups[parent] = BranchGroupSpec(
            parent=parent, children=new_children, spec=new_spec
        )

    out = EvidenceTree(name=tree.name, nodes=tuple(nodes), edges=edges, branch_groups=branch_groups)
    return require_valid(out)


def delete_node_data(tree: EvidenceTree, node_ids: Iterable[str]) -> EvidenceTree:
    """Remove observed counts at the named nodes.

    Survey-informed branch groups containing an edge into a deleted node
    degrade to a uniform DirichletPrior: the survey and the count came from
    the same source, so pretending the count is unknown must also forget the
    survey.  Prior-only and fixed groups are untouched.
    """
    node_ids = set(node_ids)
    require_valid(tree)
    by_id = {rec.id: rec for rec in tree.nodes}
    for node_id in node_ids:
        if node_id not in by_id:
            raise TreeError(f"unknown node {node_id!r}")
        if by_id[node_id].observed_count is None:
            raise TreeError(f"no data to delete at {node_id!r}")

    nodes = tuple(
        replace(rec, observed_count=None) if rec.id in node_ids else rec for rec in tree.nodes
    )
    branch_groups = dict(tree.branch_groups)
    for parent, group in tree.branch_groups.items():
        if not node_ids.intersection(group.children):
            continue
        if isinstance(group.spec, (DirichletSurvey, BetaSurveyPerChild)):
            branch_groups[parent] = BranchGroupSpec(
                parent=parent,
                children=group.children,
                spec=DirichletPrior(concentration=(1.0,) * len(group.children)),
            )
    return EvidenceTree(
        name=tree.name, nodes=nodes, edges=dict(tree.edges), branch_groups=branch_groups
    )
