"""poptree: hidden-population size estimation from tree-structured evidence.

Two engines over one evidence-tree data model: a weighted multiplier
method (Monte-Carlo back-calculation along informed root-to-leaf paths,
combined by variance-minimizing weights) and a hierarchical Bayesian
Dirichlet-multinomial model with data-uncertainty nodes, sampled by
Metropolis-within-Gibbs.
"""

from .bayes import (
    BayesModel,
    BayesPriors,
    ChainConfig,
    GroupPrior,
    LatentState,
    ModelError,
    PosteriorSummary,
    RootPrior,
    build_model,
    default_step_sizes,
    derive_counts,
    gibbs_update_branch_probs,
    initial_state,
    log_posterior,
    mh_update_latent_counts,
    run_chains,
)
from .diagnostics import DiagnosticsError, acf, ess, split_rhat
from .experiments import (
    Scenario,
    ScenarioError,
    ScenarioReport,
    TreeTransform,
    aggregate_model_inputs,
    run_scenario,
    run_suite,
    wmm_branch_sensitivity,
)
from .rng import RngStream
from .samplers import (
    BranchSample,
    SamplerError,
    sample_beta_pair,
    sample_dirichlet,
    sample_sibling_group,
)
from .tree import (
    BetaSurveyPerChild,
    BranchGroupSpec,
    DirichletPrior,
    DirichletSurvey,
    EvidenceTree,
    Fixed,
    NodeRecord,
    PathDescriptor,
    TreeError,
    aggregate_siblings,
    delete_node_data,
    informed_leaves,
    validate_tree,
)
from .treefile import (
    SpecFileError,
    load_tree_file,
    parse_suite_spec,
    parse_tree_spec,
    serialize_tree_spec,
    tree_digest,
)
from .wmm import (
    EstimationError,
    WmmConfig,
    WmmRun,
    backcalculate_path,
    compute_weights,
    path_weight_report,
    run_wmm,
)

__version__ = "0.1.0"
