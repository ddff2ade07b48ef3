//! Synthetic intervention experiments.
//!
//! The lab grows baseline networks (preferential or uniform attachment,
//! Erdős–Rényi), applies link-addition interventions to a set of target
//! organizations, and runs paired treated/control ensembles under the
//! actor dynamics of [`crate::saom`]. Whether an intervention stimulated
//! preferential attachment is read off proxy metrics (the target set's
//! degree share, the degree Gini, mean target degree); paired per-wave
//! differences get sign-flip permutation tests.

mod experiment;
mod generate;
mod intervention;

pub use experiment::{
    run_experiment, ExperimentConfig, ExperimentReport, MembershipEffect, MembershipFits,
    MetricEnsemble, PairedTest, StartGraph,
};
pub use generate::{generate_ba, generate_er, growth_panel, Attachment};
pub use intervention::{
    apply_intervention, metric_degree_gini, metric_mean_target_degree, metric_target_share,
    InterventionMode, InterventionPlan,
};

use crate::attrs::AttrError;
use crate::graph::GraphError;
use crate::saom::SaomError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Attr(#[from] AttrError),
    #[error(transparent)]
    Saom(#[from] SaomError),
    #[error("attachment count m = {m} must satisfy 1 <= m < n = {n}")]
    BadAttachment { m: usize, n: usize },
    #[error("{edges} edges do not fit on {n} nodes")]
    TooManyEdges { edges: usize, n: usize },
    #[error("target set is empty")]
    EmptyTargets,
    #[error("duplicate target {0}")]
    DuplicateTarget(usize),
    #[error("target {target} out of range for roster of {n}")]
    UnknownTarget { target: usize, n: usize },
    #[error("link budget {k} exceeds the {max} target pairs")]
    BudgetTooLarge { k: usize, max: usize },
    #[error("roster is at its capacity of {0}")]
    RosterAtCapacity(usize),
    #[error("target degree share of an edgeless graph")]
    EmptyGraph,
    #[error("an experiment needs at least two replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("active period {period} out of range for {periods} periods")]
    BadPeriod { period: usize, periods: usize },
    #[error("the experiment generator takes structural effects only, got {0}")]
    CovariateEffect(String),
    #[error("invalid experiment config: {0}")]
    BadConfig(String),
}
