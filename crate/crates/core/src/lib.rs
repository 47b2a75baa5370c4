//! Semantic information measures and the channels' matching algorithm.
//!
//! * [`prob`]: distributions, channels, entropy, divergence and Shannon
//!   mutual information on finite alphabets.
//! * [`semantic`]: truth functions, semantic Bayes and semantic information.
//! * [`rg`]: the parametric R(G) and R(D) functions.
//! * [`cm_test`]: channels' matching for tests and estimations.
//! * [`mixture`]: channels' matching for Gaussian mixtures.
//! * [`em`]: the EM baseline on the same discretized targets.
//!
//! Information is measured in bits throughout.

pub mod em;
pub mod error;
pub mod mixture;
pub mod prob;
pub mod rg;
pub mod semantic;

pub use cm_test::{
    fuzzy_classifier, left_step, min_error_partition, run_cm_test, FuzzyDecision, MatchedSemantics,
    NeutralMode, Partition, Sharpness, TestScenario, TestStep, TestTrace,
};
pub use em::{e_step, em_objectives, em_objectives_with_channel, em_step, run_em, EMObjectives};
pub use error::{Error, Result};
pub use mixture::{
    decision_rule, left_step_a, left_step_b, monitor, monitor_with_channel, run_cm_mixture,
    GaussianComponent, MixtureModel, MixtureMonitor, MixtureOptions, MixtureStep, MixtureTrace,
    RightStepMethod, StepKind,
};
pub use prob::{
    binary_entropy, channel_stats, discretized_gaussian, entropy, kl_divergence,
    mutual_information, Alphabet, Channel, Distribution, JointStats,
};
pub use rg::{
    g_extremes, information_efficiency, rd_point, rg_binary_closed_form, rg_curve, rg_point,
    PayoffMatrix, RGCurve, RGPoint,
};
pub use semantic::{
    confidence_truth, is_saturated, log_likelihood_ratio, log_normalized_likelihood,
    logical_probability, no_confidence_from_channel, optimize_truth_row_from_channel,
    optimize_truth_row_from_sampling, semantic_bayes, semantic_info_point, semantic_kl_info,
    semantic_mutual_info, ConfidenceLevels, NoConfidence, Region, SampleCounts, SemanticBayes,
    SemanticChannel, SemanticMutualInfo, TruthRow, SATURATED_BITS,
};
