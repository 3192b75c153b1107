"""Acceptance gate: every published reference value at its stated tolerance.

One test per criterion (split where a criterion bundles independent
clauses), each printing a PASS/FAIL line; run with ``pytest -v
tests/test_acceptance.py`` for the per-criterion report.  The heavy
posterior runs are shared module-scoped fixtures; the whole module takes
roughly 25 minutes.

Two checks are known-red and intentionally left failing (see the
repository README): the per-path weight table (criterion 3; the fitted
weights within a block of near-perfectly-correlated paths are
Monte-Carlo-degenerate, only block sums are stable) and the literal-budget
convergence thresholds plus multiplier-deletion robustness (criteria 4/6
sub-clauses; the supplementary longer run below passes every convergence
threshold, and the deletion shift is structural).  Neither test is
weakened to force green.
"""

import math
import time

import numpy as np
import pytest

from poptree import (
    BranchGroupSpec,
    ChainConfig,
    DirichletPrior,
    EvidenceTree,
    NodeRecord,
    RngStream,
    Scenario,
    TreeTransform,
    WmmConfig,
    aggregate_model_inputs,
    build_model,
    run_chains,
    run_suite,
    run_wmm,
    sample_sibling_group,
)
from poptree import presets
from poptree.cli import cli_dispatch
from poptree.tree import BetaSurveyPerChild

pytestmark = pytest.mark.acceptance

WMM_SEED = 1
BAYES_SEED = 20240809
LONG_SEED = 11

# published reference values (counts and probabilities)
BAYES_TARGETS = {
    "Z": (68978, 0.05),
    "A": (26585, 0.08),
    "B": (42394, 0.03),
}
BAYES_PROB_TARGETS = {
    "p_A": (0.376, 0.02),
    "q_D": (0.115, 0.015),
    "r_I": (0.156, 0.02),
    "t_R": (0.072, 0.01),
    "u_U": (0.081, 0.015),
    "s_L": (0.089, 0.03),
}
FULL_WEIGHTS = {
    "J": 0.011, "K": 0.228, "E": 0.259, "F": 0.125, "M": -0.067, "N": 0.028,
    "O": 0.141, "S": 0.221, "T": 0.006, "Q": -0.012, "H": 0.060,
}
SIMPLE_WEIGHTS = {
    "J": 0.021, "K": 0.210, "F": 0.484, "O": 0.056,
    "S": 0.175, "T": -0.025, "Q": -0.009, "H": 0.089,
}


def report(criterion: str, ok: bool, detail: str):
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} — {detail}")


@pytest.fixture(scope="module")
def wmm_full():
    t0 = time.time()
    run = run_wmm(presets.full_tree(), WmmConfig(iterations=10_000, seed=WMM_SEED))
    run.elapsed = time.time() - t0
    return run


@pytest.fixture(scope="module")
def wmm_simple():
    return run_wmm(presets.simplified_tree(), WmmConfig(iterations=10_000, seed=WMM_SEED))


@pytest.fixture(scope="module")
def bayes_pinned():
    """The criterion's literal budget: 6 chains x 200k, 100k burn-in."""
    model = build_model(presets.full_tree(), presets.bayes_priors())
    t0 = time.time()
    summary = run_chains(
        model,
        ChainConfig(chains=6, iterations=200_000, burn_in=100_000, thin=10, seed=BAYES_SEED),
    )
    summary.elapsed = time.time() - t0
    return summary


LONG_CONFIG = ChainConfig(
    chains=6, iterations=1_400_000, burn_in=300_000, thin=25, seed=LONG_SEED
)


@pytest.fixture(scope="module")
def bayes_long():
    """Longer desk-scale run demonstrating the convergence thresholds."""
    model = build_model(presets.full_tree(), presets.bayes_priors())
    return run_chains(model, LONG_CONFIG)


@pytest.fixture(scope="module")
def bayes_long_aggregated():
    tree, priors = aggregate_model_inputs(
        presets.full_tree(), presets.bayes_priors(), presets.BAYES_LEVEL_AGGREGATION
    )
    return run_chains(build_model(tree, priors), LONG_CONFIG)


class TestCriterion1:
    def test_wmm_full_tree_reproduces_published_run(self, wmm_full):
        lo, hi = wmm_full.quantile_interval
        ok = (
            abs(wmm_full.mean / 59445 - 1) <= 0.02
            and abs(wmm_full.median / 56845 - 1) <= 0.02
            and abs(lo / 41067 - 1) <= 0.05
            and abs(hi / 109830 - 1) <= 0.05
            and wmm_full.elapsed < 60.0
        )
        report(
            "1 (WMM full tree)",
            ok,
            f"mean {wmm_full.mean:.0f} vs 59445, median {wmm_full.median:.0f} vs 56845, "
            f"central95 ({lo:.0f}, {hi:.0f}) vs (41067, 109830), {wmm_full.elapsed:.1f}s",
        )
        assert abs(wmm_full.mean / 59445 - 1) <= 0.02
        assert abs(wmm_full.median / 56845 - 1) <= 0.02
        assert abs(lo / 41067 - 1) <= 0.05
        assert abs(hi / 109830 - 1) <= 0.05
        assert wmm_full.elapsed < 60.0


class TestCriterion2:
    def test_wmm_simplified_tree_reproduces_published_run(self, wmm_simple):
        lo, hi = wmm_simple.quantile_interval
        ok = (
            abs(wmm_simple.mean / 59235 - 1) <= 0.02
            and abs(lo / 41146 - 1) <= 0.05
            and abs(hi / 110009 - 1) <= 0.05
        )
        report(
            "2 (WMM simplified tree)",
            ok,
            f"mean {wmm_simple.mean:.0f} vs 59235, central95 ({lo:.0f}, {hi:.0f}) "
            "vs (41146, 110009)",
        )
        assert abs(wmm_simple.mean / 59235 - 1) <= 0.02
        assert abs(lo / 41146 - 1) <= 0.05
        assert abs(hi / 110009 - 1) <= 0.05


class TestCriterion3:
    def test_path_weights_match_published_tables(self, wmm_full, wmm_simple):
        """KNOWN RED: per-path weights are noise-dominated within blocks of
        near-perfectly-correlated paths; block sums match, individual
        entries cannot be pinned to +-0.03 by a seed-independent fit."""
        failures = []
        for run, table, label in (
            (wmm_full, FULL_WEIGHTS, "full"),
            (wmm_simple, SIMPLE_WEIGHTS, "simplified"),
        ):
            fitted = dict(zip(run.path_labels, run.weights))
            for leaf, target in table.items():
                if abs(fitted[leaf] - target) > 0.03:
                    failures.append(
                        f"{label}:{leaf} fitted {fitted[leaf]:+.3f} vs {target:+.3f}"
                    )
        for leaf in ("M", "Q"):
            if dict(zip(wmm_full.path_labels, wmm_full.weights))[leaf] >= 0:
                failures.append(f"full:{leaf} sign not negative")
        for leaf in ("T", "Q"):
            if dict(zip(wmm_simple.path_labels, wmm_simple.weights))[leaf] >= 0:
                failures.append(f"simplified:{leaf} sign not negative")
        report("3 (WMM weight tables)", not failures, "; ".join(failures) or "all entries in band")
        assert not failures, f"{len(failures)} weight entries outside ±0.03/sign: {failures}"


class TestCriterion4:
    def test_posterior_means_match_published_table(self, bayes_pinned):
        q = bayes_pinned.quantities
        failures = []
        for name, (target, tol) in BAYES_TARGETS.items():
            if abs(q[name].mean / target - 1) > tol:
                failures.append(f"{name} {q[name].mean:.0f} vs {target} (±{tol:.0%})")
        for name, (target, tol) in BAYES_PROB_TARGETS.items():
            if abs(q[name].mean - target) > tol:
                failures.append(f"{name} {q[name].mean:.3f} vs {target} (±{tol})")
        ok = not failures and bayes_pinned.elapsed < 900.0
        report(
            "4 (Bayes posterior, 6x200k)",
            ok,
            f"Z {q['Z'].mean:.0f} vs 68978, p {q['p_A'].mean:.3f} vs 0.376, "
            f"runtime {bayes_pinned.elapsed:.0f}s" + ("; " + "; ".join(failures) if failures else ""),
        )
        assert not failures, failures
        assert bayes_pinned.elapsed < 900.0

    def test_convergence_thresholds_at_stated_budget(self, bayes_pinned):
        """KNOWN RED: the latent-count/branch-probability coupling gives the
        specified kernel an intrinsic autocorrelation time of several
        thousand iterations, so R-hat <= 1.05 / ESS >= 400 are unreachable
        at 6x200k (the published run itself needed 30M kept draws for an
        ESS of 2300).  The supplementary test below shows both thresholds
        pass under the same kernel with a larger budget."""
        max_rhat = bayes_pinned.max_rhat()
        min_ess = bayes_pinned.min_ess()
        ok = max_rhat <= 1.05 and min_ess >= 400
        report(
            "4 (convergence at stated budget)",
            ok,
            f"max split R-hat {max_rhat:.3f} (<=1.05), min ESS {min_ess:.0f} (>=400)",
        )
        assert max_rhat <= 1.05, f"max split R-hat {max_rhat:.3f} > 1.05 at the 200k budget"
        assert min_ess >= 400, f"min ESS {min_ess:.0f} < 400 at the 200k budget"

    def test_supplementary_longer_run_meets_thresholds(self, bayes_long):
        q = bayes_long.quantities
        failures = []
        for name, (target, tol) in BAYES_TARGETS.items():
            if abs(q[name].mean / target - 1) > tol:
                failures.append(f"{name} {q[name].mean:.0f} vs {target}")
        for name, (target, tol) in BAYES_PROB_TARGETS.items():
            if abs(q[name].mean - target) > tol:
                failures.append(f"{name} {q[name].mean:.3f} vs {target}")
        max_rhat = bayes_long.max_rhat()
        min_ess = bayes_long.min_ess()
        ok = not failures and max_rhat <= 1.05 and min_ess >= 400
        report(
            "4-supplementary (6x1.4M)",
            ok,
            f"Z {q['Z'].mean:.0f}, max R-hat {max_rhat:.3f}, min ESS {min_ess:.0f}",
        )
        assert not failures, failures
        assert max_rhat <= 1.05
        assert min_ess >= 400


class TestCriterion5:
    def test_bayes_aggregation_robustness(self, bayes_long, bayes_long_aggregated):
        z_seg = bayes_long.quantities["Z"].mean
        z_agg = bayes_long_aggregated.quantities["Z"].mean
        ok = abs(z_agg / 68934 - 1) <= 0.05 and abs(z_agg / z_seg - 1) <= 0.01
        report(
            "5 (Bayes aggregation)",
            ok,
            f"aggregated Z {z_agg:.0f} vs 68934, segregated {z_seg:.0f}, "
            f"gap {abs(z_agg / z_seg - 1):.2%}",
        )
        assert abs(z_agg / 68934 - 1) <= 0.05
        assert abs(z_agg / z_seg - 1) <= 0.01

    def test_wmm_aggregation_robustness(self, wmm_full, wmm_simple):
        gap = abs(wmm_full.mean / wmm_simple.mean - 1)
        report(
            "5 (WMM aggregation)", gap <= 0.01,
            f"full {wmm_full.mean:.0f} vs simplified {wmm_simple.mean:.0f} ({gap:.2%})",
        )
        assert gap <= 0.01


VOI_CFG = ChainConfig(chains=4, iterations=200_000, burn_in=100_000, thin=10, seed=0)


class TestCriterion6:
    def test_bayes_fatality_deletion_inflates_root(self, full_tree, bayes_priors):
        scenarios = [
            Scenario(name="baseline", engine="bayes", run_config=VOI_CFG),
            Scenario(
                name="delete-J-K", engine="bayes", run_config=VOI_CFG,
                transform=TreeTransform(delete_data=("J", "K")),
            ),
            Scenario(
                name="delete-all-fatalities", engine="bayes", run_config=VOI_CFG,
                transform=TreeTransform(delete_data=presets.FATALITY_LEAVES),
                expect={"Z": "+0.10"},
            ),
        ]
        rep = run_suite(
            scenarios, baseline="baseline", tree=full_tree, priors=bayes_priors, suite_seed=61
        )
        fatality = rep.result("delete-all-fatalities")
        jk = rep.result("delete-J-K")
        largest = fatality.deltas["Z"] > abs(jk.deltas["Z"])
        ok = fatality.direction_checks["Z"] and largest
        report(
            "6 (Bayes fatality deletion)",
            ok,
            f"all-fatality delta {fatality.deltas['Z']:+.1%} (> +10% required), "
            f"J/K-only delta {jk.deltas['Z']:+.1%}",
        )
        assert fatality.direction_checks["Z"]
        assert largest

    def test_wmm_jk_deletion_robustness(self, wmm_full, full_tree):
        """KNOWN RED: the unattended paths' location estimates sit ~25% below
        the attended paths', so removing them at combined weight ~0.24 moves
        any weighted combination by ~+6%; a <2% shift is incompatible with
        reproducing the published mean/weights (see the decisions record)."""
        deleted = run_wmm(
            __import__("poptree").delete_node_data(full_tree, {"J", "K"}),
            WmmConfig(iterations=10_000, seed=WMM_SEED),
        )
        shift = abs(deleted.mean / wmm_full.mean - 1)
        report(
            "6 (WMM J/K deletion)", shift < 0.02,
            f"mean {wmm_full.mean:.0f} -> {deleted.mean:.0f} ({shift:+.1%}, <2% required)",
        )
        assert shift < 0.02, f"WMM mean moved {shift:.1%} on J/K deletion (limit 2%)"


SENS_CFG = ChainConfig(chains=4, iterations=400_000, burn_in=200_000, thin=20, seed=0)


class TestCriterion7:
    def test_fatality_share_direction_both_engines(self, full_tree, bayes_priors):
        wmm_rep = run_suite(
            [
                Scenario(name="baseline", engine="wmm",
                         run_config=WmmConfig(iterations=10_000, seed=WMM_SEED)),
                Scenario(
                    name="fatality-up", engine="wmm",
                    run_config=WmmConfig(iterations=10_000, seed=WMM_SEED),
                    branch_overrides={"A": BetaSurveyPerChild((None, (3, 10)))},
                    expect={"root": "-"},
                ),
            ],
            baseline="baseline", tree=full_tree, suite_seed=71,
        )
        bayes_rep = run_suite(
            [
                Scenario(name="baseline", engine="bayes", run_config=SENS_CFG),
                Scenario(
                    name="fatality-up", engine="bayes", run_config=SENS_CFG,
                    prior_overrides={"q": (10.0, 3.0)},
                    expect={"Z": "-"},
                ),
            ],
            baseline="baseline", tree=full_tree, priors=bayes_priors, suite_seed=71,
        )
        w = wmm_rep.result("fatality-up")
        b = bayes_rep.result("fatality-up")
        ok = w.direction_checks["root"] and b.direction_checks["Z"]
        report(
            "7 (fatality share direction)",
            ok,
            f"WMM {w.deltas['root']:+.1%}, Bayes {b.deltas['Z']:+.1%} (both must fall)",
        )
        assert w.direction_checks["root"]
        assert b.direction_checks["Z"]

    def test_wmm_more_sensitive_than_bayes_on_root_split(self, full_tree, bayes_priors):
        # matched perturbation: both root-split prior means move to 0.5 with
        # total concentration held fixed
        wmm_rep = run_suite(
            [
                Scenario(name="baseline", engine="wmm",
                         run_config=WmmConfig(iterations=10_000, seed=WMM_SEED)),
                Scenario(
                    name="half-split", engine="wmm",
                    run_config=WmmConfig(iterations=10_000, seed=WMM_SEED),
                    branch_overrides={"Z": DirichletPrior((3.5, 3.5))},
                    expect={"root": "+"},
                ),
            ],
            baseline="baseline", tree=full_tree, suite_seed=72,
        )
        bayes_rep = run_suite(
            [
                Scenario(name="baseline", engine="bayes", run_config=SENS_CFG),
                Scenario(
                    name="half-split", engine="bayes", run_config=SENS_CFG,
                    prior_overrides={"p": (12.5, 12.5)},
                    expect={"Z": "+"},
                ),
            ],
            baseline="baseline", tree=full_tree, priors=bayes_priors, suite_seed=72,
        )
        wmm_shift = abs(wmm_rep.result("half-split").deltas["root"])
        bayes_shift = abs(bayes_rep.result("half-split").deltas["Z"])
        ok = (
            wmm_rep.result("half-split").direction_checks["root"]
            and bayes_rep.result("half-split").direction_checks["Z"]
            and wmm_shift > bayes_shift
        )
        report(
            "7 (relative sensitivity)",
            ok,
            f"WMM shift {wmm_shift:.1%} vs Bayes shift {bayes_shift:.1%}",
        )
        assert wmm_rep.result("half-split").direction_checks["root"]
        assert bayes_rep.result("half-split").direction_checks["Z"]
        assert wmm_shift > bayes_shift


class TestCriterion8:
    def test_simplex_and_weight_sum_invariants(self, full_tree, wmm_full, wmm_simple):
        for group in full_tree.branch_groups.values():
            sample = sample_sibling_group(group, RngStream(80), size=5000)
            assert np.all(np.abs(sample.probabilities.sum(axis=1) - 1.0) <= 1e-12)
        assert abs(wmm_full.weights.sum() - 1.0) <= 1e-9
        assert abs(wmm_simple.weights.sum() - 1.0) <= 1e-9
        report("8 (simplex/weight sums)", True, "1e-12 simplex, 1e-9 weight sums")

    def test_conjugate_oracle_on_enumerable_tree(self):
        from poptree import BayesPriors, GroupPrior, RootPrior

        nodes = (
            NodeRecord("Z", "root"),
            NodeRecord("X", "leaf", 20),
            NodeRecord("Y", "leaf", 30),
        )
        tree = EvidenceTree(
            "enum", nodes, {"X": "Z", "Y": "Z"},
            {"Z": BranchGroupSpec("Z", ("X", "Y"), DirichletPrior((4.0, 1.0)))},
        )
        priors = BayesPriors(
            root=RootPrior.lognormal(median=50, log_sd=1.0),
            groups=(GroupPrior(parent="Z", concentration=(4.0, 1.0), name="w"),),
        )
        summary = run_chains(
            build_model(tree, priors),
            ChainConfig(chains=2, iterations=20_000, burn_in=2_000, thin=2, seed=81),
        )
        stats = summary.quantities["w_X"]
        a, b = 24.0, 31.0
        exact_mean = a / (a + b)
        exact_var = a * b / ((a + b) ** 2 * (a + b + 1))
        se = math.sqrt(exact_var / stats.ess)
        assert abs(stats.mean - exact_mean) < 3 * se
        report("8 (conjugate oracle)", True, f"|{stats.mean:.4f} - {exact_mean:.4f}| < 3se")

    def test_prior_recovery_within_three_se(self):
        from poptree import BayesPriors, GroupPrior, RootPrior

        nodes = (NodeRecord("Z", "root"), NodeRecord("X", "leaf"), NodeRecord("Y", "leaf"))
        tree = EvidenceTree(
            "prior-only", nodes, {"X": "Z", "Y": "Z"},
            {"Z": BranchGroupSpec("Z", ("X", "Y"), DirichletPrior((1.0, 1.0)))},
        )
        prior = RootPrior.lognormal(median=1000, log_sd=0.3)
        priors = BayesPriors(
            root=prior, groups=(GroupPrior(parent="Z", concentration=(1.0, 1.0), name="w"),)
        )
        summary = run_chains(
            build_model(tree, priors),
            ChainConfig(chains=2, iterations=40_000, burn_in=10_000, thin=3, seed=82),
        )
        stats = summary.quantities["Z"]
        se = stats.sd / math.sqrt(stats.ess)
        assert abs(stats.mean - prior.analytic_mean()) < 3 * se
        report(
            "8 (prior recovery)", True,
            f"Z mean {stats.mean:.0f} vs analytic {prior.analytic_mean():.0f} (3se {3*se:.0f})",
        )

    def test_deterministic_replay_byte_identical(self, tmp_path):
        trees = str(
            __import__("pathlib").Path(__file__).resolve().parent.parent
            / "trees" / "full_opioid.tree"
        )
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert cli_dispatch(
                ["wmm", trees, "--iterations", "2000", "--seed", "88", "--out", str(out)]
            ) == 0
        bytes_a = {p.name: p.read_bytes() for p in sorted(a.iterdir())}
        bytes_b = {p.name: p.read_bytes() for p in sorted(b.iterdir())}
        assert bytes_a == bytes_b
        report("8 (byte-identical replay)", True, "two equal-seed bundles identical")

    def test_count_scaling_equivariance(self, full_tree):
        c = 3
        scaled = EvidenceTree(
            "scaled",
            tuple(
                NodeRecord(
                    r.id, r.role,
                    None if r.observed_count is None else r.observed_count * c,
                    r.description,
                )
                for r in full_tree.nodes
            ),
            dict(full_tree.edges),
            dict(full_tree.branch_groups),
        )
        base = run_wmm(full_tree, WmmConfig(iterations=3000, seed=89))
        big = run_wmm(scaled, WmmConfig(iterations=3000, seed=89))
        assert big.mean == pytest.approx(c * base.mean, rel=1e-12)
        assert big.median == pytest.approx(c * base.median, rel=1e-12)
        assert np.allclose(
            big.quantile_interval, np.array(base.quantile_interval) * c, rtol=1e-12
        )
        report("8 (count-scaling equivariance)", True, f"scale x{c} exact at 1e-12")
