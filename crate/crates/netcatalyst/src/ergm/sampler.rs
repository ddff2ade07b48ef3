//! Metropolis edge-toggle sampler.
//!
//! Proposals pick a uniformly random non-forbidden pair and flip it; the
//! acceptance ratio is exp(eta . delta) with delta the analytic change
//! statistics, so a step never recomputes global statistics. Statistics
//! are carried along incrementally.

use super::{ErgmError, ErgmModel, ErgmSpec};
use crate::attrs::NodeAttributes;
use crate::graph::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Burn-in, thinning interval and number of retained draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McmcSettings {
    pub burnin: usize,
    pub thin: usize,
    pub draws: usize,
}

pub(crate) struct Chain<'a> {
    model: &'a ErgmModel,
    eta: Vec<f64>,
    g: Graph,
    stats: Vec<f64>,
    free_pairs: Vec<(u32, u32)>,
    rng: ChaCha8Rng,
    delta: Vec<f64>,
}

pub(crate) fn free_pairs(g: &Graph) -> Vec<(u32, u32)> {
    let n = g.node_count();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            if !g.is_forbidden(i, j) {
                pairs.push((i as u32, j as u32));
            }
        }
    }
    pairs
}

impl<'a> Chain<'a> {
    pub fn new(model: &'a ErgmModel, eta: &[f64], g0: &Graph, seed: u64) -> Result<Self, ErgmError> {
        let free_pairs = free_pairs(g0);
        if free_pairs.is_empty() {
            return Err(ErgmError::NoFreePair);
        }
        let stats = model.stats(g0);
        Ok(Chain {
            model,
            eta: eta.to_vec(),
            g: g0.clone(),
            stats,
            free_pairs,
            rng: ChaCha8Rng::seed_from_u64(seed),
            delta: vec![0.0; model.dim()],
        })
    }

    pub fn set_eta(&mut self, eta: &[f64]) {
        self.eta.copy_from_slice(eta);
    }

    #[inline]
    fn weight(&self) -> f64 {
        self.eta.iter().zip(&self.delta).map(|(e, d)| e * d).sum()
    }

    pub fn step(&mut self) {
        let idx = self.rng.gen_range(0..self.free_pairs.len());
        let (i, j) = self.free_pairs[idx];
        let (i, j) = (i as usize, j as usize);
        if self.g.has_edge(i, j) {
            // Evaluate the removal from the state without the edge.
            self.g.toggle_edge_in_place(i, j).expect("free pair");
            self.model.add_delta_into(&self.g, i, j, &mut self.delta);
            let w = -self.weight();
            if w >= 0.0 || self.rng.gen::<f64>() < w.exp() {
                for (s, d) in self.stats.iter_mut().zip(&self.delta) {
                    *s -= d;
                }
            } else {
                self.g.toggle_edge_in_place(i, j).expect("free pair");
            }
        } else {
            self.model.add_delta_into(&self.g, i, j, &mut self.delta);
            let w = self.weight();
            if w >= 0.0 || self.rng.gen::<f64>() < w.exp() {
                self.g.toggle_edge_in_place(i, j).expect("free pair");
                for (s, d) in self.stats.iter_mut().zip(&self.delta) {
                    *s += d;
                }
            }
        }
    }

    pub fn advance(&mut self, steps: usize) {
        for _ in 0..steps {
            self.step();
        }
    }

    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    pub fn graph(&self) -> &Graph {
        &self.g
    }
}

/// Draws `settings.draws` graphs from the model distribution at
/// `spec.params`, starting the chain at `g0`. Deterministic in `seed`.
pub fn mcmc_sample(
    g0: &Graph,
    spec: &ErgmSpec,
    attrs: &NodeAttributes,
    settings: &McmcSettings,
    seed: u64,
) -> Result<Vec<Graph>, ErgmError> {
    if settings.draws == 0 {
        return Err(ErgmError::BadSettings("draw count must be positive".into()));
    }
    let model = ErgmModel::bind(spec, attrs, g0.node_count())?;
    let mut chain = Chain::new(&model, &spec.params, g0, seed)?;
    chain.advance(settings.burnin);
    let mut out = Vec::with_capacity(settings.draws);
    for _ in 0..settings.draws {
        chain.advance(settings.thin.max(1));
        out.push(chain.graph().clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergm::ErgmEffect;

    #[test]
    fn zero_eta_matches_uniform_density() {
        let spec = ErgmSpec::new(vec![ErgmEffect::Edges], vec![0.0]).unwrap();
        let attrs = NodeAttributes::new(10);
        let g0 = Graph::new(10);
        let settings = McmcSettings { burnin: 2000, thin: 45, draws: 4000 };
        let draws = mcmc_sample(&g0, &spec, &attrs, &settings, 7).unwrap();
        let pairs = 45.0;
        let mean_density: f64 =
            draws.iter().map(|g| g.edge_count() as f64 / pairs).sum::<f64>() / draws.len() as f64;
        // Bernoulli(1/2) per pair; 3 Monte Carlo standard errors.
        let mc_se = (0.25 / pairs / draws.len() as f64).sqrt() * 3.0;
        assert!(
            (mean_density - 0.5).abs() < mc_se.max(0.01),
            "density {mean_density} outside tolerance"
        );
    }

    #[test]
    fn positive_edge_coefficient_shifts_density_to_logistic() {
        // eta = ln 3 makes each free pair Bernoulli(3/4).
        let spec = ErgmSpec::new(vec![ErgmEffect::Edges], vec![3.0f64.ln()]).unwrap();
        let attrs = NodeAttributes::new(10);
        let g0 = Graph::new(10);
        let settings = McmcSettings { burnin: 2000, thin: 45, draws: 4000 };
        let draws = mcmc_sample(&g0, &spec, &attrs, &settings, 11).unwrap();
        let pairs = 45.0;
        let mean_density: f64 =
            draws.iter().map(|g| g.edge_count() as f64 / pairs).sum::<f64>() / draws.len() as f64;
        let mc_se = (0.1875 / pairs / draws.len() as f64).sqrt() * 3.0;
        assert!(
            (mean_density - 0.75).abs() < mc_se.max(0.01),
            "density {mean_density} outside tolerance"
        );
    }

    #[test]
    fn single_node_graph_has_no_free_pair() {
        let spec = ErgmSpec::new(vec![ErgmEffect::Edges], vec![0.0]).unwrap();
        let attrs = NodeAttributes::new(1);
        let g0 = Graph::new(1);
        let settings = McmcSettings { burnin: 10, thin: 1, draws: 1 };
        assert!(matches!(
            mcmc_sample(&g0, &spec, &attrs, &settings, 1),
            Err(ErgmError::NoFreePair)
        ));
    }

    #[test]
    fn sampler_respects_structural_zeros() {
        let spec = ErgmSpec::new(vec![ErgmEffect::Edges], vec![2.0]).unwrap();
        let attrs = NodeAttributes::new(5);
        let mut g0 = Graph::new(5);
        g0.forbid_pair(0, 1).unwrap();
        g0.forbid_pair(2, 3).unwrap();
        let settings = McmcSettings { burnin: 500, thin: 5, draws: 200 };
        for g in mcmc_sample(&g0, &spec, &attrs, &settings, 3).unwrap() {
            assert!(!g.has_edge(0, 1));
            assert!(!g.has_edge(2, 3));
        }
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let spec =
            ErgmSpec::new(vec![ErgmEffect::Edges, ErgmEffect::Gwesp { decay: 0.5 }], vec![-0.5, 0.3])
                .unwrap();
        let attrs = NodeAttributes::new(8);
        let g0 = Graph::new(8);
        let settings = McmcSettings { burnin: 200, thin: 10, draws: 50 };
        let a = mcmc_sample(&g0, &spec, &attrs, &settings, 99).unwrap();
        let b = mcmc_sample(&g0, &spec, &attrs, &settings, 99).unwrap();
        assert_eq!(a, b);
        let c = mcmc_sample(&g0, &spec, &attrs, &settings, 100).unwrap();
        assert_ne!(a, c);
    }
}
