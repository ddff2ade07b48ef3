//! Stochastic actor-oriented models for undirected panels.
//!
//! Actors receive Poisson-timed opportunities to add, drop or keep one of
//! their ties, choosing by a multinomial logit over their objective
//! function f_i(x) = sum_k beta_k s_ik(x). A proposed new tie additionally
//! needs the partner's confirmation, a logistic in the partner's objective
//! change; dissolution is unilateral. Composition change is handled with
//! structural zeros: absent actors have frozen zero rows and are excluded
//! from opportunity draws.
//!
//! Estimation is by the method of moments: each period is simulated
//! forward from its observed start wave and the Robbins-Monro engine in
//! [`crate::rm`] matches simulated to observed targets.

mod fit;
mod panel;
mod simulate;

pub use fit::{fit_saom, target_statistics, FitSaomSettings};
pub use panel::{restrict_to_active, Panel};
pub use simulate::simulate_period;

use crate::attrs::{AttrError, NodeAttributes};
use crate::graph::{Graph, GraphError};
use crate::rm::RmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SaomError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Attr(#[from] AttrError),
    #[error("a model needs at least one effect")]
    EmptySpec,
    #[error("exactly one density effect is required, found {0}")]
    DensityCount(usize),
    #[error("effect {0} appears more than once")]
    DuplicateEffect(String),
    #[error("{effects} effects but {params} parameters")]
    ParamLength { effects: usize, params: usize },
    #[error("parameter for effect {0} is not finite")]
    NonfiniteParam(String),
    #[error("rate parameters must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("panel has {expected} periods but the model names {got} rates")]
    RateCount { expected: usize, got: usize },
    #[error("a panel needs at least two waves, got {0}")]
    TooFewWaves(usize),
    #[error("wave {wave} has {got} nodes, the roster has {expected}")]
    RosterMismatch { wave: usize, expected: usize, got: usize },
    #[error("{waves} waves but {attrs} per-wave attribute sets")]
    AttrWaves { waves: usize, attrs: usize },
    #[error("duplicate node id {0}")]
    DuplicateId(String),
    #[error("node {node}: entry wave {entry} is after exit wave {exit}")]
    BadComposition { node: String, entry: usize, exit: usize },
    #[error("node {node} has a tie in wave {wave} while absent")]
    AbsentTie { node: String, wave: usize },
    #[error("actor {0} is structurally absent")]
    ActorAbsent(usize),
    #[error("pair ({0}, {1}) already has a tie")]
    ExistingTie(usize, usize),
    #[error("active mask has {got} entries for {expected} nodes")]
    ActiveLength { expected: usize, got: usize },
    #[error("initial parameter vector has {got} entries, the model has {expected}")]
    InitLength { expected: usize, got: usize },
    #[error("invalid fit settings: {0}")]
    BadSettings(String),
    #[error(transparent)]
    Estimation(#[from] RmError),
}

/// Evaluation effects of the network objective function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SaomEffectKind {
    /// Out-degree; functions as the intercept of tie formation.
    Density,
    /// Number of transitive triads the actor is embedded in.
    TransTriad,
    /// Sum of the alters' degrees, the tie to the actor included:
    /// attachment to already well-connected partners.
    InPop,
    /// Sum of ego's plus alter's covariate value over the actor's ties.
    EgoPlusAltX { attr: String },
    /// Number of ties to alters with the same covariate value.
    SameX { attr: String },
}

impl SaomEffectKind {
    pub fn name(&self) -> String {
        match self {
            SaomEffectKind::Density => "density".into(),
            SaomEffectKind::TransTriad => "transTriad".into(),
            SaomEffectKind::InPop => "inPop".into(),
            SaomEffectKind::EgoPlusAltX { attr } => format!("egoPlusAltX({attr})"),
            SaomEffectKind::SameX { attr } => format!("sameX({attr})"),
        }
    }
}

/// An effect list with its parameter vector and per-period rates.
///
/// `params` are the betas used when simulating and the starting values
/// when fitting. `rates` may be left empty for a fit, in which case
/// starting rates are derived from the observed amount of change.
#[derive(Debug, Clone, PartialEq)]
pub struct SaomSpec {
    pub effects: Vec<SaomEffectKind>,
    pub params: Vec<f64>,
    pub rates: Vec<f64>,
}

impl SaomSpec {
    pub fn new(
        effects: Vec<SaomEffectKind>,
        params: Vec<f64>,
        rates: Vec<f64>,
    ) -> Result<Self, SaomError> {
        if effects.is_empty() {
            return Err(SaomError::EmptySpec);
        }
        if params.len() != effects.len() {
            return Err(SaomError::ParamLength { effects: effects.len(), params: params.len() });
        }
        let density = effects.iter().filter(|e| **e == SaomEffectKind::Density).count();
        if density != 1 {
            return Err(SaomError::DensityCount(density));
        }
        for (k, e) in effects.iter().enumerate() {
            if effects[..k].contains(e) {
                return Err(SaomError::DuplicateEffect(e.name()));
            }
        }
        for (e, p) in effects.iter().zip(&params) {
            if !p.is_finite() {
                return Err(SaomError::NonfiniteParam(e.name()));
            }
        }
        for &r in &rates {
            if !(r > 0.0) || !r.is_finite() {
                return Err(SaomError::BadRate(r));
            }
        }
        Ok(SaomSpec { effects, params, rates })
    }

    /// All betas zero, no rates named.
    pub fn with_zero_params(effects: Vec<SaomEffectKind>) -> Result<Self, SaomError> {
        let params = vec![0.0; effects.len()];
        SaomSpec::new(effects, params, Vec::new())
    }

    pub fn names(&self) -> Vec<String> {
        self.effects.iter().map(SaomEffectKind::name).collect()
    }
}

/// An effect bound to per-node covariate columns.
enum BoundSaomEffect {
    Density,
    TransTriad,
    InPop,
    EgoPlusAltX { values: Vec<f64> },
    SameX { keys: Vec<u64> },
}

/// Effects resolved against one wave's attributes. Rebind per period when
/// covariates vary over time.
pub(crate) struct SaomModel {
    effects: Vec<BoundSaomEffect>,
}

impl SaomModel {
    pub(crate) fn bind(
        effects: &[SaomEffectKind],
        attrs: &NodeAttributes,
    ) -> Result<SaomModel, SaomError> {
        let bound = effects
            .iter()
            .map(|e| {
                Ok(match e {
                    SaomEffectKind::Density => BoundSaomEffect::Density,
                    SaomEffectKind::TransTriad => BoundSaomEffect::TransTriad,
                    SaomEffectKind::InPop => BoundSaomEffect::InPop,
                    SaomEffectKind::EgoPlusAltX { attr } => BoundSaomEffect::EgoPlusAltX {
                        values: attrs.numeric_imputed(attr)?.0,
                    },
                    SaomEffectKind::SameX { attr } => {
                        BoundSaomEffect::SameX { keys: attrs.equality_keys(attr)? }
                    }
                })
            })
            .collect::<Result<Vec<_>, SaomError>>()?;
        Ok(SaomModel { effects: bound })
    }

    pub(crate) fn dim(&self) -> usize {
        self.effects.len()
    }

    /// s_ik(x): the actor's contribution to effect k.
    pub(crate) fn stat(&self, g: &Graph, i: usize, k: usize) -> f64 {
        match &self.effects[k] {
            BoundSaomEffect::Density => g.degree(i) as f64,
            BoundSaomEffect::TransTriad => {
                let paired: usize = g.neighbors(i).map(|j| g.common_neighbors(i, j)).sum();
                (paired / 2) as f64
            }
            BoundSaomEffect::InPop => g.neighbors(i).map(|j| g.degree(j) as f64).sum(),
            BoundSaomEffect::EgoPlusAltX { values } => {
                g.neighbors(i).map(|j| values[i] + values[j]).sum()
            }
            BoundSaomEffect::SameX { keys } => {
                g.neighbors(i).filter(|&j| keys[i] == keys[j]).count() as f64
            }
        }
    }

    /// f_i(x) = beta . s_i(x).
    pub(crate) fn objective(&self, beta: &[f64], g: &Graph, i: usize) -> f64 {
        (0..self.dim()).map(|k| beta[k] * self.stat(g, i, k)).sum()
    }

    /// f_ego(x + ego,alter) - f_ego(x); the tie must be absent.
    pub(crate) fn add_delta(&self, beta: &[f64], g: &Graph, ego: usize, alter: usize) -> f64 {
        debug_assert!(!g.has_edge(ego, alter));
        self.effects
            .iter()
            .zip(beta)
            .map(|(e, b)| {
                b * match e {
                    BoundSaomEffect::Density => 1.0,
                    BoundSaomEffect::TransTriad => g.common_neighbors(ego, alter) as f64,
                    BoundSaomEffect::InPop => (g.degree(alter) + 1) as f64,
                    BoundSaomEffect::EgoPlusAltX { values } => values[ego] + values[alter],
                    BoundSaomEffect::SameX { keys } => f64::from(keys[ego] == keys[alter]),
                }
            })
            .sum()
    }

    /// f_ego(x - ego,alter) - f_ego(x); the tie must be present.
    pub(crate) fn remove_delta(&self, beta: &[f64], g: &Graph, ego: usize, alter: usize) -> f64 {
        debug_assert!(g.has_edge(ego, alter));
        self.effects
            .iter()
            .zip(beta)
            .map(|(e, b)| {
                -b * match e {
                    BoundSaomEffect::Density => 1.0,
                    BoundSaomEffect::TransTriad => g.common_neighbors(ego, alter) as f64,
                    BoundSaomEffect::InPop => g.degree(alter) as f64,
                    BoundSaomEffect::EgoPlusAltX { values } => values[ego] + values[alter],
                    BoundSaomEffect::SameX { keys } => f64::from(keys[ego] == keys[alter]),
                }
            })
            .sum()
    }

    /// Objective change for ego of toggling the (ego, alter) tie.
    pub(crate) fn toggle_delta(&self, beta: &[f64], g: &Graph, ego: usize, alter: usize) -> f64 {
        if g.has_edge(ego, alter) {
            self.remove_delta(beta, g, ego, alter)
        } else {
            self.add_delta(beta, g, ego, alter)
        }
    }

    /// Adds sum_i s_ik(x) to `out[k]` for every effect.
    pub(crate) fn add_stat_sums(&self, g: &Graph, out: &mut [f64]) {
        for k in 0..self.dim() {
            for i in 0..g.node_count() {
                out[k] += self.stat(g, i, k);
            }
        }
    }
}

/// Normalizes utilities into softmax probabilities, in place.
pub(crate) fn softmax_into(utils: &mut [f64]) {
    let max = utils.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut total = 0.0;
    for u in utils.iter_mut() {
        *u = (*u - max).exp();
        total += *u;
    }
    for u in utils.iter_mut() {
        *u /= total;
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn check_node(g: &Graph, i: usize) -> Result<(), SaomError> {
    if i >= g.node_count() {
        return Err(GraphError::NodeOutOfRange { node: i, n: g.node_count() }.into());
    }
    Ok(())
}

/// s_ik(x) for a single effect.
pub fn effect_stat(
    g: &Graph,
    i: usize,
    effect: &SaomEffectKind,
    attrs: &NodeAttributes,
) -> Result<f64, SaomError> {
    check_node(g, i)?;
    let model = SaomModel::bind(std::slice::from_ref(effect), attrs)?;
    Ok(model.stat(g, i, 0))
}

/// The actor's objective function value under `spec.params`.
pub fn objective(
    g: &Graph,
    i: usize,
    spec: &SaomSpec,
    attrs: &NodeAttributes,
) -> Result<f64, SaomError> {
    check_node(g, i)?;
    let model = SaomModel::bind(&spec.effects, attrs)?;
    Ok(model.objective(&spec.params, g, i))
}

/// Choice probabilities for one micro-step of actor `i`: first the keep
/// option, then one toggle per eligible partner in ascending node order.
/// Partners behind a structural zero are excluded; an actor whose whole
/// row is forbidden is absent and cannot move.
pub fn microstep_probs(
    g: &Graph,
    i: usize,
    spec: &SaomSpec,
    attrs: &NodeAttributes,
) -> Result<Vec<f64>, SaomError> {
    check_node(g, i)?;
    let model = SaomModel::bind(&spec.effects, attrs)?;
    let mut utils = vec![0.0];
    for j in 0..g.node_count() {
        if j != i && !g.is_forbidden(i, j) {
            utils.push(model.toggle_delta(&spec.params, g, i, j));
        }
    }
    if utils.len() == 1 {
        return Err(SaomError::ActorAbsent(i));
    }
    softmax_into(&mut utils);
    Ok(utils)
}

/// Probability that alter `j` confirms the creation of the tie proposed
/// by `i`: logistic in j's objective change. Dissolutions never reach
/// this; they are unilateral.
pub fn confirm_prob(
    g: &Graph,
    j: usize,
    i: usize,
    spec: &SaomSpec,
    attrs: &NodeAttributes,
) -> Result<f64, SaomError> {
    check_node(g, i)?;
    check_node(g, j)?;
    if g.has_edge(i, j) {
        return Err(SaomError::ExistingTie(i, j));
    }
    g.check_free_pair(i, j)?;
    let model = SaomModel::bind(&spec.effects, attrs)?;
    Ok(logistic(model.add_delta(&spec.params, g, j, i)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k3() -> Graph {
        let mut g = Graph::new(3);
        g.add_edge(0, 1).unwrap();
        g.add_edge(0, 2).unwrap();
        g.add_edge(1, 2).unwrap();
        g
    }

    fn star4() -> Graph {
        let mut g = Graph::new(4);
        g.add_edge(0, 1).unwrap();
        g.add_edge(0, 2).unwrap();
        g.add_edge(0, 3).unwrap();
        g
    }

    #[test]
    fn effect_stats_on_hand_fixtures() {
        let a3 = NodeAttributes::new(3);
        let a4 = NodeAttributes::new(4);
        let g = k3();
        for i in 0..3 {
            assert_eq!(effect_stat(&g, i, &SaomEffectKind::Density, &a3).unwrap(), 2.0);
            assert_eq!(effect_stat(&g, i, &SaomEffectKind::TransTriad, &a3).unwrap(), 1.0);
        }
        let s = star4();
        assert_eq!(effect_stat(&s, 0, &SaomEffectKind::InPop, &a4).unwrap(), 3.0);
        assert_eq!(effect_stat(&s, 1, &SaomEffectKind::InPop, &a4).unwrap(), 3.0);
    }

    #[test]
    fn covariate_effects_read_their_columns() {
        let mut attrs = NodeAttributes::new(3);
        attrs
            .add_categorical("country", vec!["usa".into(), "japan".into()], vec![0, 0, 1])
            .unwrap();
        attrs.add_numeric("size", vec![Some(2.0), Some(1.0), Some(4.0)]).unwrap();
        let g = k3();
        let same = SaomEffectKind::SameX { attr: "country".into() };
        assert_eq!(effect_stat(&g, 0, &same, &attrs).unwrap(), 1.0);
        assert_eq!(effect_stat(&g, 2, &same, &attrs).unwrap(), 0.0);
        let ego = SaomEffectKind::EgoPlusAltX { attr: "size".into() };
        assert_eq!(effect_stat(&g, 0, &ego, &attrs).unwrap(), (2.0 + 1.0) + (2.0 + 4.0));
        assert!(matches!(
            effect_stat(&g, 0, &SaomEffectKind::SameX { attr: "region".into() }, &attrs),
            Err(SaomError::Attr(AttrError::UnknownAttribute(_)))
        ));
    }

    #[test]
    fn objective_matches_hand_value_on_k3() {
        let spec = SaomSpec::new(
            vec![SaomEffectKind::Density, SaomEffectKind::TransTriad, SaomEffectKind::InPop],
            vec![-1.0, 0.5, 0.1],
            vec![],
        )
        .unwrap();
        let attrs = NodeAttributes::new(3);
        let f = objective(&k3(), 0, &spec, &attrs).unwrap();
        assert!((f - (-1.1)).abs() < 1e-12, "got {f}");
    }

    #[test]
    fn zero_betas_make_the_objective_vanish_and_probs_uniform() {
        let spec = SaomSpec::with_zero_params(vec![
            SaomEffectKind::Density,
            SaomEffectKind::TransTriad,
        ])
        .unwrap();
        let attrs = NodeAttributes::new(4);
        let g = star4();
        assert_eq!(objective(&g, 2, &spec, &attrs).unwrap(), 0.0);
        let probs = microstep_probs(&g, 2, &spec, &attrs).unwrap();
        assert_eq!(probs, vec![0.25; 4]);
    }

    #[test]
    fn microstep_matches_the_softmax_by_hand() {
        let spec = SaomSpec::new(vec![SaomEffectKind::Density], vec![-1.0], vec![]).unwrap();
        let attrs = NodeAttributes::new(3);
        let probs = microstep_probs(&Graph::new(3), 0, &spec, &attrs).unwrap();
        let keep = 1.0 / (1.0 + 2.0 * (-1.0f64).exp());
        let add = (-1.0f64).exp() / (1.0 + 2.0 * (-1.0f64).exp());
        assert_eq!(probs.len(), 3);
        assert!((probs[0] - keep).abs() < 1e-12);
        assert!((probs[1] - add).abs() < 1e-12);
        assert!((probs[2] - add).abs() < 1e-12);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forbidden_partner_drops_out_and_renormalizes() {
        let spec = SaomSpec::new(vec![SaomEffectKind::Density], vec![-1.0], vec![]).unwrap();
        let attrs = NodeAttributes::new(3);
        let mut g = Graph::new(3);
        g.forbid_pair(0, 2).unwrap();
        let probs = microstep_probs(&g, 0, &spec, &attrs).unwrap();
        let keep = 1.0 / (1.0 + (-1.0f64).exp());
        assert_eq!(probs.len(), 2);
        assert!((probs[0] - keep).abs() < 1e-12);

        g.forbid_pair(0, 1).unwrap();
        assert!(matches!(microstep_probs(&g, 0, &spec, &attrs), Err(SaomError::ActorAbsent(0))));
    }

    #[test]
    fn confirm_prob_matches_the_logistic_by_hand() {
        let zero = SaomSpec::with_zero_params(vec![SaomEffectKind::Density]).unwrap();
        let attrs = NodeAttributes::new(3);
        let g = Graph::new(3);
        assert!((confirm_prob(&g, 1, 0, &zero, &attrs).unwrap() - 0.5).abs() < 1e-12);

        let spec = SaomSpec::new(vec![SaomEffectKind::Density], vec![-1.0], vec![]).unwrap();
        let expect = 1.0 / (1.0 + 1.0f64.exp());
        assert!((confirm_prob(&g, 1, 0, &spec, &attrs).unwrap() - expect).abs() < 1e-12);

        assert!(matches!(
            confirm_prob(&k3(), 1, 0, &spec, &attrs),
            Err(SaomError::ExistingTie(0, 1))
        ));
    }

    #[test]
    fn spec_validation_errors() {
        use SaomEffectKind::*;
        assert!(matches!(
            SaomSpec::new(vec![], vec![], vec![]),
            Err(SaomError::EmptySpec)
        ));
        assert!(matches!(
            SaomSpec::new(vec![TransTriad], vec![0.0], vec![]),
            Err(SaomError::DensityCount(0))
        ));
        assert!(matches!(
            SaomSpec::new(vec![Density, Density], vec![0.0, 0.0], vec![]),
            Err(SaomError::DensityCount(2))
        ));
        assert!(matches!(
            SaomSpec::new(vec![Density, TransTriad, TransTriad], vec![0.0; 3], vec![]),
            Err(SaomError::DuplicateEffect(_))
        ));
        assert!(matches!(
            SaomSpec::new(vec![Density], vec![], vec![]),
            Err(SaomError::ParamLength { effects: 1, params: 0 })
        ));
        assert!(matches!(
            SaomSpec::new(vec![Density], vec![f64::NAN], vec![]),
            Err(SaomError::NonfiniteParam(_))
        ));
        assert!(matches!(
            SaomSpec::new(vec![Density], vec![0.0], vec![1.0, 0.0]),
            Err(SaomError::BadRate(_))
        ));
    }

    proptest! {
        #[test]
        fn toggle_deltas_match_objective_differences(
            edges in proptest::collection::vec((0usize..7, 0usize..7), 0..16),
            beta in proptest::collection::vec(-2.0f64..2.0, 5),
            i in 0usize..7,
            j in 0usize..7,
        ) {
            prop_assume!(i != j);
            let mut g = Graph::new(7);
            for (a, b) in edges {
                if a != b {
                    g.add_edge(a, b).unwrap();
                }
            }
            let mut attrs = NodeAttributes::new(7);
            attrs.add_numeric("size", (0..7).map(|v| Some(v as f64)).collect()).unwrap();
            attrs.add_categorical(
                "country",
                vec!["usa".into(), "japan".into(), "france".into()],
                (0..7u32).map(|v| v % 3).collect(),
            ).unwrap();
            let effects = vec![
                SaomEffectKind::Density,
                SaomEffectKind::TransTriad,
                SaomEffectKind::InPop,
                SaomEffectKind::EgoPlusAltX { attr: "size".into() },
                SaomEffectKind::SameX { attr: "country".into() },
            ];
            let model = SaomModel::bind(&effects, &attrs).unwrap();
            let toggled = g.toggle_edge(i, j).unwrap();
            let brute = model.objective(&beta, &toggled, i) - model.objective(&beta, &g, i);
            let delta = model.toggle_delta(&beta, &g, i, j);
            prop_assert!((brute - delta).abs() < 1e-10, "delta {delta} vs brute {brute}");
        }
    }
}
