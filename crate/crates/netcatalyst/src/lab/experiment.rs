//! Paired treated/control ensemble experiments.

use super::{
    apply_intervention, generate_ba, generate_er, metric_degree_gini, metric_mean_target_degree,
    metric_target_share, InterventionPlan, LabError,
};
use crate::attrs::NodeAttributes;
use crate::graph::Graph;
use crate::saom::{
    fit_saom, simulate_period, FitSaomSettings, Panel, SaomEffectKind, SaomSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Wave-0 network of a replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartGraph {
    Empty,
    /// G(n, M) with exactly `edges` edges.
    ErdosRenyi { edges: usize },
    /// Preferential attachment with `m` ties per entrant.
    Preferential { m: usize },
}

/// A paired treated/control ensemble.
///
/// Every replicate draws one wave-0 network, then evolves a control copy
/// untouched and a treated copy that receives the plan at the start of
/// each of its active periods. Both arms consume the same seeds (common
/// random numbers), so a plan with no active periods yields bit-identical
/// arms. The nao-hub auxiliary node, when present, is held out of the
/// opportunity process and out of the metrics; its spokes still count
/// towards the degrees the actors see.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Observation count: wave 0 plus `waves - 1` simulated periods.
    pub waves: usize,
    pub start: StartGraph,
    /// The true dynamics; structural effects only.
    pub spec: SaomSpec,
    pub lambda: f64,
    pub replicates: usize,
    pub plan: InterventionPlan,
    pub seed: u64,
    /// When set, replicate 0 is refitted per period and per arm with a
    /// 0/1 target-membership covariate added to the model, and the fitted
    /// membership effect is reported.
    pub membership_fit: Option<FitSaomSettings>,
}

/// One metric's paired ensembles: `control[w][r]` and `treated[w][r]`
/// hold the metric at wave w for replicate r.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricEnsemble {
    pub metric: String,
    pub control: Vec<Vec<f64>>,
    pub treated: Vec<Vec<f64>>,
    /// One paired comparison per wave.
    pub tests: Vec<PairedTest>,
}

/// Sign-flip permutation summary of treated minus control at one wave.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedTest {
    /// Mean paired difference, treated minus control.
    pub difference: f64,
    /// One-sided permutation p-value for the difference being positive.
    pub p_value: f64,
}

/// Membership effect refitted from one arm over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipEffect {
    pub period: usize,
    pub estimate: f64,
    pub standard_error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipFits {
    pub treated: Vec<MembershipEffect>,
    pub control: Vec<MembershipEffect>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub replicates: usize,
    pub seed: u64,
    /// Target degree share, degree Gini, mean target degree.
    pub metrics: Vec<MetricEnsemble>,
    pub membership: Option<MembershipFits>,
}

const METRIC_NAMES: [&str; 3] = ["target degree share", "degree Gini", "mean target degree"];
const RESAMPLES: usize = 10_000;
const REPLICATE_STRIDE: u64 = 0x0001_0000;
const PERM_OFFSET: u64 = 0x4000_0000;
const FIT_OFFSET: u64 = 0x2000_0000;

impl ExperimentConfig {
    fn check(&self) -> Result<(), LabError> {
        if self.replicates < 2 {
            return Err(LabError::TooFewReplicates(self.replicates));
        }
        if self.n < 2 {
            return Err(LabError::BadConfig(format!("roster of {}", self.n)));
        }
        if self.waves < 2 {
            return Err(LabError::BadConfig(format!("{} waves", self.waves)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(LabError::BadConfig(format!("rate {}", self.lambda)));
        }
        for e in &self.spec.effects {
            match e {
                SaomEffectKind::Density | SaomEffectKind::TransTriad | SaomEffectKind::InPop => {}
                other => return Err(LabError::CovariateEffect(other.name())),
            }
        }
        self.plan.validate(self.n)?;
        let periods = self.waves - 1;
        for &p in &self.plan.active_periods {
            if p >= periods {
                return Err(LabError::BadPeriod { period: p, periods });
            }
        }
        Ok(())
    }
}

/// Metrics of one observed wave, restricted to the focal roster. An
/// edgeless wave holds no degree anywhere, so its target share is 0.
fn wave_metrics(g: &Graph, targets: &[usize], focal: usize) -> Result<[f64; 3], LabError> {
    let owned;
    let g = if g.node_count() > focal {
        let mut sub = Graph::new(focal);
        for (i, j) in g.edges() {
            if i < focal && j < focal {
                sub.add_edge(i, j)?;
            }
        }
        owned = sub;
        &owned
    } else {
        g
    };
    let share =
        if g.edge_count() == 0 { 0.0 } else { metric_target_share(g, targets)? };
    Ok([share, metric_degree_gini(g), metric_mean_target_degree(g, targets)?])
}

/// Per-wave metric pairs (control, treated) of one replicate, plus the
/// focal wave graphs when the caller wants to refit them.
struct Replicate {
    waves: Vec<([f64; 3], [f64; 3])>,
    panels: Option<(Vec<Graph>, Vec<Graph>)>,
}

fn run_replicate(
    config: &ExperimentConfig,
    r: usize,
    keep_graphs: bool,
) -> Result<Replicate, LabError> {
    let base = config.seed.wrapping_add(REPLICATE_STRIDE.wrapping_mul(r as u64 + 1));
    let w0 = match config.start {
        StartGraph::Empty => Graph::new(config.n),
        StartGraph::ErdosRenyi { edges } => generate_er(config.n, edges, base)?,
        StartGraph::Preferential { m } => generate_ba(config.n, m, base)?,
    };
    let focal = config.n;
    let targets = &config.plan.targets;
    let mut control = w0.clone();
    let mut treated = w0;
    let mut waves = Vec::with_capacity(config.waves);
    let mut kept: Option<(Vec<Graph>, Vec<Graph>)> =
        keep_graphs.then(|| (Vec::with_capacity(config.waves), Vec::with_capacity(config.waves)));

    let focal_view = |g: &Graph| -> Result<Graph, LabError> {
        if g.node_count() == focal {
            return Ok(g.clone());
        }
        let mut sub = Graph::new(focal);
        for (i, j) in g.edges() {
            if i < focal && j < focal {
                sub.add_edge(i, j)?;
            }
        }
        Ok(sub)
    };

    let record = |control: &Graph,
                      treated: &Graph,
                      kept: &mut Option<(Vec<Graph>, Vec<Graph>)>|
     -> Result<([f64; 3], [f64; 3]), LabError> {
        if let Some((c, t)) = kept {
            c.push(focal_view(control)?);
            t.push(focal_view(treated)?);
        }
        Ok((wave_metrics(control, targets, focal)?, wave_metrics(treated, targets, focal)?))
    };

    waves.push(record(&control, &treated, &mut kept)?);
    let attrs_control = NodeAttributes::new(focal);
    for p in 0..config.waves - 1 {
        if config.plan.is_active(p) {
            treated = apply_intervention(&treated, &config.plan)?;
        }
        let seed = base.wrapping_add(1 + p as u64);
        let active_control = vec![true; control.node_count()];
        let mut active_treated = vec![true; treated.node_count()];
        for slot in active_treated.iter_mut().skip(focal) {
            *slot = false;
        }
        let attrs_treated = NodeAttributes::new(treated.node_count());
        control =
            simulate_period(&control, config.lambda, &config.spec, &attrs_control, &active_control, seed)?;
        treated =
            simulate_period(&treated, config.lambda, &config.spec, &attrs_treated, &active_treated, seed)?;
        waves.push(record(&control, &treated, &mut kept)?);
    }
    Ok(Replicate { waves, panels: kept })
}

/// One-sided sign-flip permutation test on paired differences: the share
/// of sign assignments whose sum is at least the observed sum, the
/// identity assignment included.
fn sign_flip_p(diffs: &[f64], seed: u64) -> f64 {
    let observed: f64 = diffs.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at_least = 0usize;
    for _ in 0..RESAMPLES {
        let s: f64 = diffs.iter().map(|&d| if rng.gen::<bool>() { d } else { -d }).sum();
        if s >= observed {
            at_least += 1;
        }
    }
    (at_least + 1) as f64 / (RESAMPLES + 1) as f64
}

fn membership_fits(
    config: &ExperimentConfig,
    settings: &FitSaomSettings,
    control: &[Graph],
    treated: &[Graph],
) -> Result<MembershipFits, LabError> {
    let n = config.n;
    let mut attrs = NodeAttributes::new(n);
    attrs.add_numeric(
        "member",
        (0..n).map(|i| Some(f64::from(config.plan.targets.contains(&i)))).collect(),
    )?;
    let mut effects = config.spec.effects.clone();
    effects.push(SaomEffectKind::EgoPlusAltX { attr: "member".into() });
    let mut params = config.spec.params.clone();
    params.push(0.0);
    let spec = SaomSpec::new(effects, params, Vec::new())?;
    let ids: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();

    let fit_arm = |arm: &[Graph], arm_idx: u64| -> Result<Vec<MembershipEffect>, LabError> {
        (0..arm.len() - 1)
            .map(|p| {
                let panel = Panel::new(
                    ids.clone(),
                    vec![arm[p].clone(), arm[p + 1].clone()],
                    vec![attrs.clone(), attrs.clone()],
                    vec![0; n],
                    vec![1; n],
                )?;
                let seed = config
                    .seed
                    .wrapping_add(FIT_OFFSET)
                    .wrapping_add(2 * p as u64 + arm_idx);
                // A degenerate demo fit should show up as such in the
                // report, not kill the whole experiment.
                Ok(match fit_saom(&panel, &spec, None, settings, seed) {
                    Ok(fit) => MembershipEffect {
                        period: p,
                        estimate: *fit.estimates.last().expect("nonempty fit"),
                        standard_error: *fit.standard_errors.last().expect("nonempty fit"),
                        converged: fit.converged,
                    },
                    Err(_) => MembershipEffect {
                        period: p,
                        estimate: f64::NAN,
                        standard_error: f64::NAN,
                        converged: false,
                    },
                })
            })
            .collect()
    };
    Ok(MembershipFits { treated: fit_arm(treated, 0)?, control: fit_arm(control, 1)? })
}

/// Runs the full ensemble. Replicates fan out over the worker pool but
/// the report only depends on the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, LabError> {
    config.check()?;
    let keep = config.membership_fit.is_some();
    let replicates: Vec<Replicate> = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(config, r, keep && r == 0))
        .collect::<Result<_, _>>()?;

    let metrics = (0..3)
        .map(|metric| {
            let per_wave = |arm: fn(&([f64; 3], [f64; 3])) -> [f64; 3]| -> Vec<Vec<f64>> {
                (0..config.waves)
                    .map(|w| replicates.iter().map(|rep| arm(&rep.waves[w])[metric]).collect())
                    .collect()
            };
            let control = per_wave(|pair| pair.0);
            let treated = per_wave(|pair| pair.1);
            let tests = (0..config.waves)
                .map(|w| {
                    let diffs: Vec<f64> = treated[w]
                        .iter()
                        .zip(&control[w])
                        .map(|(t, c)| t - c)
                        .collect();
                    let difference = diffs.iter().sum::<f64>() / diffs.len() as f64;
                    let seed = config
                        .seed
                        .wrapping_add(PERM_OFFSET)
                        .wrapping_add((metric * config.waves + w) as u64);
                    PairedTest { difference, p_value: sign_flip_p(&diffs, seed) }
                })
                .collect();
            MetricEnsemble {
                metric: METRIC_NAMES[metric].into(),
                control,
                treated,
                tests,
            }
        })
        .collect();

    let membership = match &config.membership_fit {
        Some(settings) => {
            let (control, treated) =
                replicates[0].panels.as_ref().expect("replicate 0 keeps its graphs");
            Some(membership_fits(config, settings, control, treated)?)
        }
        None => None,
    };

    Ok(ExperimentReport {
        replicates: config.replicates,
        seed: config.seed,
        metrics,
        membership,
    })
}
