"""Sensitivity of both engines to the root-split and fatality branches.

The estimate hinges on branches near the root: the share of events outside
healthcare (Z's split) and the fatality share within the unattended arm
(A's split).  The multiplier method passes branch changes straight through
to its back-calculations; the Bayes posterior also weighs the tree's count
evidence, which damps the shift.  Run:

    python demos/04_branch_sensitivity.py
"""

from poptree import (
    ChainConfig,
    DirichletPrior,
    Scenario,
    WmmConfig,
    run_suite,
    wmm_branch_sensitivity,
)
from poptree import presets
from poptree.tree import BetaSurveyPerChild

tree = presets.full_tree()
priors = presets.bayes_priors()

print("multiplier method: shifting the unattended fatality share upward")
report = wmm_branch_sensitivity(
    tree,
    branch=("A", "D"),
    alternates=[
        BetaSurveyPerChild((None, (2, 10))),
        BetaSurveyPerChild((None, (3, 10))),
        BetaSurveyPerChild((None, (4, 10))),
    ],
    config=WmmConfig(iterations=10_000, seed=3),
    expect=["-", "-", "-"],
)
for result in report.results:
    mean = result.summaries["root"][0]
    print(f"  {result.name:>12s}: root {mean:10,.0f}  delta {result.deltas['root']:+7.1%}")
print("  higher assumed fatality share -> smaller implied total, as the")
print("  observed deaths then represent a larger slice of the population.")

print("\nmatched root-split perturbation, both engines (prior mean -> 0.5):")
wmm_cfg = WmmConfig(iterations=10_000, seed=3)
wmm = run_suite(
    [
        Scenario(name="baseline", engine="wmm", run_config=wmm_cfg),
        Scenario(
            name="half-unattended", engine="wmm", run_config=wmm_cfg,
            branch_overrides={"Z": DirichletPrior((3.5, 3.5))},
        ),
    ],
    baseline="baseline",
    tree=tree,
    suite_seed=17,
)
bayes_cfg = ChainConfig(chains=4, iterations=80_000, burn_in=40_000, thin=10, seed=0)
bayes = run_suite(
    [
        Scenario(name="baseline", engine="bayes", run_config=bayes_cfg),
        Scenario(
            name="half-unattended", engine="bayes", run_config=bayes_cfg,
            prior_overrides={"p": (12.5, 12.5)},
        ),
    ],
    baseline="baseline",
    tree=tree,
    priors=priors,
    suite_seed=17,
)
wmm_shift = wmm.result("half-unattended").deltas["root"]
bayes_shift = bayes.result("half-unattended").deltas["Z"]
print(f"  WMM root shift:   {wmm_shift:+.1%}")
print(f"  Bayes Z shift:    {bayes_shift:+.1%}")
print("  the multiplier method reacts more strongly: its branch inputs are")
print("  never updated against the count evidence, while the posterior is.")
