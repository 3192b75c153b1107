"""Canonical evidence trees: British Columbia opioid-overdose pathways,
2015-2017 aggregate counts.

Two tree variants feed the multiplier engine: the full tree keeps every
source-segregated leaf; the simplified tree aggregates same-level sibling
leaves that came from one source.  The Bayes preset pairs the full tree
with expert Dirichlet priors and four data-uncertainty leaves (I, L, R, U),
one under each level whose leaves all carry counts.

Node meanings: Z all overdose events; A healthcare-unattended events with
C survived / D fatal (J Vital Statistics only, K Coroners); B
healthcare-attended events with E ambulance-attended not transported,
F other non-hospital care, H attended fatalities, and G the
emergency-department arm holding M/N/O discharge streams, Q fatalities in
the ED, and P hospital admissions split into S discharged / T died.
"""

from __future__ import annotations

from .bayes import BayesPriors, GroupPrior, RootPrior
from .tree import (
    ROLE_INTERNAL,
    ROLE_LEAF,
    ROLE_ROOT,
    BetaSurveyPerChild,
    BranchGroupSpec,
    DirichletSurvey,
    EvidenceTree,
    NodeRecord,
)


def _node(node_id, role, count=None, description=""):
    return NodeRecord(id=node_id, role=role, observed_count=count, description=description)


def full_tree() -> EvidenceTree:
    """Full pathways tree with source-segregated leaves."""
    nodes = (
        _node("Z", ROLE_ROOT, description="all opioid overdose events"),
        _node("A", ROLE_INTERNAL, description="healthcare-unattended overdoses"),
        _node("C", ROLE_LEAF, description="unattended, survived (unobserved)"),
        _node("D", ROLE_INTERNAL, description="unattended fatalities"),
        _node("J", ROLE_LEAF, 173, "fatality in Vital Statistics only"),
        _node("K", ROLE_LEAF, 2279, "fatality with a Coroners record"),
        _node("B", ROLE_INTERNAL, description="healthcare-attended overdoses"),
        _node("E", ROLE_LEAF, 16922, "ambulance-attended, not transported"),
        _node("F", ROLE_LEAF, 1390, "other non-hospital care"),
        _node("G", ROLE_INTERNAL, description="emergency-department arm"),
        _node("M", ROLE_LEAF, 11678, "ED discharge stream 1"),
        _node("N", ROLE_LEAF, 199, "ED discharge stream 2"),
        _node("O", ROLE_LEAF, 1030, "ED discharge stream 3"),
        _node("P", ROLE_INTERNAL, description="hospital admissions"),
        _node("S", ROLE_LEAF, 2270, "admitted, discharged"),
        _node("T", ROLE_LEAF, 106, "admitted, died"),
        _node("Q", ROLE_LEAF, 45, "died in the ED"),
        _node("H", ROLE_LEAF, 473, "attended fatality, no ED/hospital record"),
    )
    edges = {
        "A": "Z", "B": "Z",
        "C": "A", "D": "A",
        "J": "D", "K": "D",
        "E": "B", "F": "B", "G": "B", "H": "B",
        "M": "G", "N": "G", "O": "G", "P": "G", "Q": "G",
        "S": "P", "T": "P",
    }
    branch_groups = {
        "Z": BranchGroupSpec("Z", ("A", "B"), DirichletSurvey(counts=(2, 3), total=5)),
        "A": BranchGroupSpec("A", ("C", "D"), BetaSurveyPerChild(surveys=(None, (1, 10)))),
        "D": BranchGroupSpec("D", ("J", "K"), DirichletSurvey(counts=(173, 2279), total=2452)),
        "B": BranchGroupSpec(
            "B", ("E", "F", "G", "H"),
            DirichletSurvey(counts=(16922, 1390, 15328, 473), total=34113),
        ),
        "G": BranchGroupSpec(
            "G", ("M", "N", "O", "P", "Q"),
            DirichletSurvey(counts=(11678, 199, 1030, 2376, 45), total=15328),
        ),
        "P": BranchGroupSpec("P", ("S", "T"), DirichletSurvey(counts=(2270, 106), total=2376)),
    }
    return EvidenceTree(
        name="full-opioid-pathways", nodes=nodes, edges=edges, branch_groups=branch_groups
    )


def simplified_tree() -> EvidenceTree:
    """Simplified pathways tree: one-source sibling leaves aggregated.

    E and F collapse into F (non-transport care), and M, N, O collapse into
    O (ED discharges); counts and survey evidence add.
    """
    nodes = (
        _node("Z", ROLE_ROOT, description="all opioid overdose events"),
        _node("A", ROLE_INTERNAL, description="healthcare-unattended overdoses"),
        _node("C", ROLE_LEAF, description="unattended, survived (unobserved)"),
        _node("D", ROLE_INTERNAL, description="unattended fatalities"),
        _node("J", ROLE_LEAF, 173, "fatality in Vital Statistics only"),
        _node("K", ROLE_LEAF, 2279, "fatality with a Coroners record"),
        _node("B", ROLE_INTERNAL, description="healthcare-attended overdoses"),
        _node("F", ROLE_LEAF, 18312, "care without hospital admission"),
        _node("G", ROLE_INTERNAL, description="emergency-department arm"),
        _node("O", ROLE_LEAF, 12907, "ED discharges"),
        _node("P", ROLE_INTERNAL, description="hospital admissions"),
        _node("S", ROLE_LEAF, 2270, "admitted, discharged"),
        _node("T", ROLE_LEAF, 106, "admitted, died"),
        _node("Q", ROLE_LEAF, 45, "died in the ED"),
        _node("H", ROLE_LEAF, 473, "attended fatality, no ED/hospital record"),
    )
    edges = {
        "A": "Z", "B": "Z",
        "C": "A", "D": "A",
        "J": "D", "K": "D",
        "F": "B", "G": "B", "H": "B",
        "O": "G", "P": "G", "Q": "G",
        "S": "P", "T": "P",
    }
    branch_groups = {
        "Z": BranchGroupSpec("Z", ("A", "B"), DirichletSurvey(counts=(2, 3), total=5)),
        "A": BranchGroupSpec("A", ("C", "D"), BetaSurveyPerChild(surveys=(None, (1, 10)))),
        "D": BranchGroupSpec("D", ("J", "K"), DirichletSurvey(counts=(173, 2279), total=2452)),
        "B": BranchGroupSpec(
            "B", ("F", "G", "H"),
            DirichletSurvey(counts=(18312, 15328, 473), total=34113),
        ),
        "G": BranchGroupSpec(
            "G", ("O", "P", "Q"),
            DirichletSurvey(counts=(12907, 2376, 45), total=15328),
        ),
        "P": BranchGroupSpec("P", ("S", "T"), DirichletSurvey(counts=(2270, 106), total=2376)),
    }
    return EvidenceTree(
        name="simple-opioid-pathways", nodes=nodes, edges=edges, branch_groups=branch_groups
    )


def bayes_priors() -> BayesPriors:
    """Expert priors for the full tree's Bayesian model.

    Group vectors are named p, q, s, r, t, u; dimensions one above the
    child count attach the uncertainty leaves L (under D), I (under B),
    R (under G) and U (under P).  The root prior places about 70% of its
    mass between the confirmed-event floor and an expert upper bound.
    """
    return BayesPriors(
        root=RootPrior.lognormal(median=51000, log_sd=0.38),
        groups=(
            GroupPrior(parent="Z", concentration=(10, 15), name="p"),
            GroupPrior(parent="A", concentration=(10, 1), name="q"),
            GroupPrior(parent="D", concentration=(5, 5, 1), name="s", uncertainty_label="L"),
            GroupPrior(parent="B", concentration=(5, 5, 5, 5, 4), name="r", uncertainty_label="I"),
            GroupPrior(
                parent="G", concentration=(30, 30, 30, 30, 30, 12), name="t",
                uncertainty_label="R",
            ),
            GroupPrior(parent="P", concentration=(30, 30, 5), name="u", uncertainty_label="U"),
        ),
    )


# aggregation recipes connecting the two tree variants
FULL_TO_SIMPLIFIED = (
    ("B", ("E", "F"), "F"),
    ("G", ("M", "N", "O"), "O"),
)

# one merged terminal per level for the aggregated Bayesian variant
BAYES_LEVEL_AGGREGATION = (
    ("D", ("J", "K"), "JK"),
    ("B", ("E", "F", "H"), "EFH"),
    ("G", ("M", "N", "O", "Q"), "MNOQ"),
    ("P", ("S", "T"), "ST"),
)

FATALITY_LEAVES = ("J", "K", "H", "N", "Q", "T")
