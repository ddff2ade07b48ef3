//! Exponential random graph models for a single observed network.
//!
//! A model is a list of effect descriptors with one real parameter each;
//! the probability of a graph y is proportional to exp(eta . g(y)) where
//! g collects the effect statistics. Change statistics (the difference a
//! single edge makes) are computed analytically, which is what keeps the
//! Metropolis sampler and the fitting loop fast; a brute-force property
//! test pins them to the definition.

mod exact;
mod fit;
mod sampler;

pub use exact::{exact_mle, exact_moments, MAX_EXACT_NODES};
pub use fit::{fit_ergm, FitErgmSettings};
pub use sampler::{mcmc_sample, McmcSettings};

use crate::attrs::{AttrError, NodeAttributes};
use crate::graph::{stat_gwdegree, stat_gwesp, Graph, GraphError};
use crate::rm::RmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ErgmError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Attr(#[from] AttrError),
    #[error("model spec has no effects")]
    EmptySpec,
    #[error("{effects} effects but {params} parameters")]
    ParamLength { effects: usize, params: usize },
    #[error("duplicate effect {0}")]
    DuplicateEffect(String),
    #[error("parameter for {0} is not finite")]
    NonfiniteParam(String),
    #[error("negative decay in {0}")]
    NegativeDecay(String),
    #[error("graph has no free pair to toggle")]
    NoFreePair,
    #[error("exact enumeration supports at most {max} nodes, got {n}")]
    TooManyNodes { n: usize, max: usize },
    #[error("observed {effect} = {value} sits on a degenerate boundary")]
    Boundary { effect: String, value: f64 },
    #[error("Newton iteration on the exact likelihood did not converge")]
    OracleNoConvergence,
    #[error("invalid settings: {0}")]
    BadSettings(String),
    #[error(transparent)]
    Estimation(#[from] RmError),
}

/// One model term.
#[derive(Debug, Clone, PartialEq)]
pub enum ErgmEffect {
    Edges,
    Gwdegree { decay: f64 },
    Gwesp { decay: f64 },
    Triangles,
    NodeFactor { attr: String, level: String },
    NodeMatch { attr: String },
}

impl ErgmEffect {
    #[must_use]
    pub fn name(&self) -> String {
        match self {
            ErgmEffect::Edges => "edges".into(),
            ErgmEffect::Gwdegree { decay } => format!("gwdegree({decay})"),
            ErgmEffect::Gwesp { decay } => format!("gwesp({decay})"),
            ErgmEffect::Triangles => "triangles".into(),
            ErgmEffect::NodeFactor { attr, level } => format!("nodefactor({attr},{level})"),
            ErgmEffect::NodeMatch { attr } => format!("nodematch({attr})"),
        }
    }
}

/// Ordered effects plus the parameter vector eta.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgmSpec {
    pub effects: Vec<ErgmEffect>,
    pub params: Vec<f64>,
}

impl ErgmSpec {
    pub fn new(effects: Vec<ErgmEffect>, params: Vec<f64>) -> Result<Self, ErgmError> {
        if effects.is_empty() {
            return Err(ErgmError::EmptySpec);
        }
        if effects.len() != params.len() {
            return Err(ErgmError::ParamLength { effects: effects.len(), params: params.len() });
        }
        for (e, &p) in effects.iter().zip(&params) {
            if !p.is_finite() {
                return Err(ErgmError::NonfiniteParam(e.name()));
            }
            match e {
                ErgmEffect::Gwdegree { decay } | ErgmEffect::Gwesp { decay } if *decay < 0.0 => {
                    return Err(ErgmError::NegativeDecay(e.name()));
                }
                _ => {}
            }
        }
        for (k, e) in effects.iter().enumerate() {
            if effects[..k].contains(e) {
                return Err(ErgmError::DuplicateEffect(e.name()));
            }
        }
        Ok(ErgmSpec { effects, params })
    }

    /// Spec with all parameters zero.
    pub fn with_zero_params(effects: Vec<ErgmEffect>) -> Result<Self, ErgmError> {
        let params = vec![0.0; effects.len()];
        ErgmSpec::new(effects, params)
    }

    #[must_use]
    pub fn names(&self) -> Vec<String> {
        self.effects.iter().map(ErgmEffect::name).collect()
    }
}

/// Effect with covariates resolved, ready for fast evaluation.
#[derive(Debug, Clone)]
pub(crate) enum BoundEffect {
    Edges,
    Gwdegree { decay: f64, r: f64 },
    Gwesp { decay: f64, r: f64, scale: f64 },
    Triangles,
    NodeFactor { is_level: Vec<bool> },
    NodeMatch { key: Vec<u64> },
}

#[derive(Debug, Clone)]
pub(crate) struct ErgmModel {
    effects: Vec<BoundEffect>,
    names: Vec<String>,
}

impl ErgmModel {
    pub fn bind(spec: &ErgmSpec, attrs: &NodeAttributes, n: usize) -> Result<Self, ErgmError> {
        if spec.effects.is_empty() {
            return Err(ErgmError::EmptySpec);
        }
        if spec.effects.len() != spec.params.len() {
            return Err(ErgmError::ParamLength {
                effects: spec.effects.len(),
                params: spec.params.len(),
            });
        }
        let mut bound = Vec::with_capacity(spec.effects.len());
        for effect in &spec.effects {
            let b = match effect {
                ErgmEffect::Edges => BoundEffect::Edges,
                ErgmEffect::Gwdegree { decay } => {
                    if *decay < 0.0 {
                        return Err(ErgmError::NegativeDecay(effect.name()));
                    }
                    BoundEffect::Gwdegree { decay: *decay, r: 1.0 - (-decay).exp() }
                }
                ErgmEffect::Gwesp { decay } => {
                    if *decay < 0.0 {
                        return Err(ErgmError::NegativeDecay(effect.name()));
                    }
                    BoundEffect::Gwesp {
                        decay: *decay,
                        r: 1.0 - (-decay).exp(),
                        scale: decay.exp(),
                    }
                }
                ErgmEffect::Triangles => BoundEffect::Triangles,
                ErgmEffect::NodeFactor { attr, level } => {
                    let idx = attrs.level_index(attr, level)?;
                    let (_, values) = attrs.categorical(attr)?;
                    check_arity(attr, values.len(), n)?;
                    BoundEffect::NodeFactor { is_level: values.iter().map(|&v| v == idx).collect() }
                }
                ErgmEffect::NodeMatch { attr } => {
                    let key = attrs.equality_keys(attr)?;
                    check_arity(attr, key.len(), n)?;
                    BoundEffect::NodeMatch { key }
                }
            };
            bound.push(b);
        }
        Ok(ErgmModel { effects: bound, names: spec.names() })
    }

    pub fn dim(&self) -> usize {
        self.effects.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Full statistic vector g(y).
    pub fn stats(&self, g: &Graph) -> Vec<f64> {
        self.effects
            .iter()
            .map(|e| match e {
                BoundEffect::Edges => g.edge_count() as f64,
                BoundEffect::Gwdegree { decay, .. } => stat_gwdegree(g, *decay),
                BoundEffect::Gwesp { decay, .. } => stat_gwesp(g, *decay),
                BoundEffect::Triangles => g.triangles() as f64,
                BoundEffect::NodeFactor { is_level } => (0..g.node_count())
                    .map(|i| if is_level[i] { g.degree(i) as f64 } else { 0.0 })
                    .sum(),
                BoundEffect::NodeMatch { key } => {
                    g.edges().filter(|&(i, j)| key[i] == key[j]).count() as f64
                }
            })
            .collect()
    }

    /// Change statistics for adding the absent edge (i, j):
    /// g(y + ij) - g(y). The edge must currently be absent.
    pub fn add_delta_into(&self, g: &Graph, i: usize, j: usize, out: &mut [f64]) {
        debug_assert!(!g.has_edge(i, j));
        for (slot, e) in out.iter_mut().zip(&self.effects) {
            *slot = match e {
                BoundEffect::Edges => 1.0,
                BoundEffect::Gwdegree { r, .. } => {
                    powi_f(*r, g.degree(i)) + powi_f(*r, g.degree(j))
                }
                BoundEffect::Gwesp { r, scale, .. } => {
                    // The new edge lands with c shared partners, and each
                    // common neighbour k lifts the shared-partner count of
                    // the existing edges (i,k) and (j,k) by one.
                    let c = g.common_neighbors(i, j);
                    let mut delta = scale * (1.0 - powi_f(*r, c));
                    for k in g.common_neighbors_iter(i, j) {
                        delta += powi_f(*r, g.common_neighbors(i, k));
                        delta += powi_f(*r, g.common_neighbors(j, k));
                    }
                    delta
                }
                BoundEffect::Triangles => g.common_neighbors(i, j) as f64,
                BoundEffect::NodeFactor { is_level } => {
                    is_level[i] as u8 as f64 + is_level[j] as u8 as f64
                }
                BoundEffect::NodeMatch { key } => (key[i] == key[j]) as u8 as f64,
            };
        }
    }
}

fn check_arity(attr: &str, got: usize, expected: usize) -> Result<(), ErgmError> {
    if got != expected {
        return Err(ErgmError::Attr(AttrError::WrongArity {
            attr: attr.to_string(),
            expected,
            got,
        }));
    }
    Ok(())
}

#[inline]
fn powi_f(r: f64, k: usize) -> f64 {
    if k == 0 {
        1.0
    } else if r == 0.0 {
        0.0
    } else {
        r.powi(k as i32)
    }
}

/// Statistic vector of the observed graph under `spec`.
pub fn ergm_stats(g: &Graph, spec: &ErgmSpec, attrs: &NodeAttributes) -> Result<Vec<f64>, ErgmError> {
    let model = ErgmModel::bind(spec, attrs, g.node_count())?;
    Ok(model.stats(g))
}

/// Change statistics for the pair (i, j): statistics with the edge present
/// minus statistics with it absent, regardless of the current state.
pub fn change_stats(
    g: &Graph,
    i: usize,
    j: usize,
    spec: &ErgmSpec,
    attrs: &NodeAttributes,
) -> Result<Vec<f64>, ErgmError> {
    let model = ErgmModel::bind(spec, attrs, g.node_count())?;
    g.check_free_pair(i, j)?;
    let mut out = vec![0.0; model.dim()];
    if g.has_edge(i, j) {
        let mut without = g.clone();
        without.toggle_edge_in_place(i, j)?;
        model.add_delta_into(&without, i, j, &mut out);
    } else {
        model.add_delta_into(g, i, j, &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn no_attrs(n: usize) -> NodeAttributes {
        NodeAttributes::new(n)
    }

    fn graph_from_edges(n: usize, edges: &[(usize, usize)]) -> Graph {
        let mut g = Graph::new(n);
        for &(i, j) in edges {
            g.add_edge(i, j).unwrap();
        }
        g
    }

    #[test]
    fn stats_on_hand_fixtures() {
        let k3 = graph_from_edges(3, &[(0, 1), (0, 2), (1, 2)]);
        let spec = ErgmSpec::with_zero_params(vec![ErgmEffect::Edges]).unwrap();
        assert_eq!(ergm_stats(&k3, &spec, &no_attrs(3)).unwrap(), vec![3.0]);

        let diamond = graph_from_edges(4, &[(0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let spec = ErgmSpec::with_zero_params(vec![
            ErgmEffect::Edges,
            ErgmEffect::Gwesp { decay: 0.5 },
        ])
        .unwrap();
        let stats = ergm_stats(&diamond, &spec, &no_attrs(4)).unwrap();
        assert_eq!(stats[0], 5.0);
        assert!((stats[1] - 5.3935).abs() < 1e-3);
    }

    #[test]
    fn nodefactor_and_nodematch_fixture() {
        let mut attrs = NodeAttributes::new(3);
        attrs
            .add_categorical("member", vec!["no".into(), "yes".into()], vec![1, 0, 0])
            .unwrap();
        let g = graph_from_edges(3, &[(0, 1)]);
        let spec = ErgmSpec::with_zero_params(vec![
            ErgmEffect::NodeFactor { attr: "member".into(), level: "yes".into() },
            ErgmEffect::NodeMatch { attr: "member".into() },
        ])
        .unwrap();
        assert_eq!(ergm_stats(&g, &spec, &attrs).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn gwesp_change_on_empty_graph_is_zero() {
        let g = Graph::new(5);
        let spec = ErgmSpec::with_zero_params(vec![ErgmEffect::Gwesp { decay: 0.5 }]).unwrap();
        let delta = change_stats(&g, 1, 3, &spec, &no_attrs(5)).unwrap();
        assert_eq!(delta, vec![0.0]);
    }

    #[test]
    fn change_stats_match_brute_force_difference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let mut attrs = NodeAttributes::new(9);
        let levels: Vec<u32> = (0..9).map(|_| rng.gen_range(0..3)).collect();
        attrs
            .add_categorical("country", vec!["a".into(), "b".into(), "c".into()], levels)
            .unwrap();
        let spec = ErgmSpec::with_zero_params(vec![
            ErgmEffect::Edges,
            ErgmEffect::Gwdegree { decay: 0.7 },
            ErgmEffect::Gwesp { decay: 0.4 },
            ErgmEffect::Triangles,
            ErgmEffect::NodeFactor { attr: "country".into(), level: "b".into() },
            ErgmEffect::NodeMatch { attr: "country".into() },
        ])
        .unwrap();
        for case in 0..200 {
            let n = 9;
            let mut g = Graph::new(n);
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(0.3) {
                        g.add_edge(i, j).unwrap();
                    }
                }
            }
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n);
            if i == j {
                j = (j + 1) % n;
            }
            let delta = change_stats(&g, i, j, &spec, &attrs).unwrap();
            let (with_edge, without) = if g.has_edge(i, j) {
                (g.clone(), g.toggle_edge(i, j).unwrap())
            } else {
                (g.toggle_edge(i, j).unwrap(), g.clone())
            };
            let sw = ergm_stats(&with_edge, &spec, &attrs).unwrap();
            let so = ergm_stats(&without, &spec, &attrs).unwrap();
            for k in 0..delta.len() {
                assert!(
                    (delta[k] - (sw[k] - so[k])).abs() < 1e-10,
                    "case {case}: effect {k} delta {} vs brute {}",
                    delta[k],
                    sw[k] - so[k]
                );
            }
        }
    }

    #[test]
    fn spec_validation_errors() {
        assert!(matches!(ErgmSpec::new(vec![], vec![]), Err(ErgmError::EmptySpec)));
        assert!(matches!(
            ErgmSpec::new(vec![ErgmEffect::Edges], vec![0.0, 1.0]),
            Err(ErgmError::ParamLength { .. })
        ));
        assert!(matches!(
            ErgmSpec::new(vec![ErgmEffect::Edges, ErgmEffect::Edges], vec![0.0, 0.0]),
            Err(ErgmError::DuplicateEffect(_))
        ));
        assert!(matches!(
            ErgmSpec::new(vec![ErgmEffect::Gwesp { decay: -0.1 }], vec![0.0]),
            Err(ErgmError::NegativeDecay(_))
        ));
    }
}
