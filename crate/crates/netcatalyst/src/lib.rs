//! Statistical models for undirected interorganizational networks.
//!
//! The crate covers two estimation families and the scaffolding around
//! them:
//!
//! * cross-sectional exponential random graph models (ERGMs) with a
//!   Metropolis edge-toggle sampler, an exact small-n enumeration oracle
//!   and method-of-moments fitting;
//! * longitudinal stochastic actor-oriented models (SAOMs) for panels of
//!   network waves, with composition change, a mutual-confirmation rule
//!   for undirected tie creation, and the same Robbins-Monro estimation
//!   engine;
//! * an intervention laboratory for synthetic what-if experiments
//!   (seeding cliques, hub organizations, or tie budgets on evolving
//!   networks) with paired-seed treated/control comparisons;
//! * goodness-of-fit summaries over degree, shared-partner and triad
//!   distributions.
//!
//! Everything that simulates takes an explicit seed and is deterministic
//! for a given seed, independent of how many worker threads run the
//! batches.

pub mod attrs;
pub mod ergm;
pub mod gof;
pub mod graph;
pub mod lab;
pub mod rm;
pub mod saom;

pub use attrs::{AttrError, Covariate, NodeAttributes};
pub use ergm::{
    change_stats, ergm_stats, exact_mle, exact_moments, fit_ergm, mcmc_sample, ErgmEffect,
    ErgmError, ErgmSpec, FitErgmSettings, McmcSettings,
};
pub use gof::{gof_ergm, gof_saom, GofBin, GofError, GofFamily, GofReport, DEFAULT_MAX_K};
pub use graph::{aux_statistics, stat_edges, stat_gwdegree, stat_gwesp, AuxStats, Graph, GraphError};
pub use lab::{
    apply_intervention, generate_ba, generate_er, growth_panel, metric_degree_gini,
    metric_mean_target_degree, metric_target_share, run_experiment, Attachment, ExperimentConfig,
    ExperimentReport, InterventionMode, InterventionPlan, LabError, MembershipEffect,
    MembershipFits, MetricEnsemble, PairedTest, StartGraph,
};
pub use rm::{convergence_check, EstimationResult, RmError, RmSettings};
pub use saom::{
    confirm_prob, effect_stat, fit_saom, microstep_probs, objective, restrict_to_active,
    simulate_period, target_statistics, FitSaomSettings, Panel, SaomEffectKind, SaomError,
    SaomSpec,
};
