//! Method-of-moments ERGM fitting on top of the Robbins-Monro engine.
//!
//! For an exponential family the derivative of the expected statistics
//! with respect to eta is their covariance, so phase 1 and phase 3 reuse
//! the simulation batch for the derivative, and the standard-error formula
//! D^-1 Cov D^-T collapses to the inverse Fisher information.

use super::sampler::{free_pairs, Chain};
use super::{ErgmError, ErgmModel, ErgmSpec};
use crate::attrs::NodeAttributes;
use crate::graph::Graph;
use crate::rm::{batch_cov, batch_mean, rm_fit, EstimationResult, MomentModel, Phase2Stream, RmError, RmSettings};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Settings for `fit_ergm`. Burn-in and thinning default to multiples of
/// the number of free pairs when left unset.
#[derive(Debug, Clone, Default)]
pub struct FitErgmSettings {
    pub rm: RmSettings,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
    /// Parameters to hold at their initial value; empty means all free.
    pub fixed: Vec<bool>,
}

const FIT_CHAINS: usize = 8;

struct ErgmMoments<'a> {
    model: &'a ErgmModel,
    g_obs: &'a Graph,
    observed: Vec<f64>,
    free: Vec<bool>,
    burnin: usize,
    thin: usize,
    max_abs_param: f64,
}

impl MomentModel for ErgmMoments<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn names(&self) -> Vec<String> {
        self.model.names().to_vec()
    }

    fn observed(&self) -> Vec<f64> {
        self.observed.clone()
    }

    fn free(&self) -> Vec<bool> {
        self.free.clone()
    }

    fn simulate_batch(
        &self,
        theta: &[f64],
        draws: usize,
        seed: u64,
    ) -> Result<Vec<Vec<f64>>, RmError> {
        let chains = FIT_CHAINS.min(draws);
        let per_chain: Vec<usize> =
            (0..chains).map(|c| draws / chains + usize::from(c < draws % chains)).collect();
        let batches: Result<Vec<Vec<Vec<f64>>>, RmError> = (0..chains)
            .into_par_iter()
            .map(|c| {
                let mut chain = Chain::new(self.model, theta, self.g_obs, seed.wrapping_add(c as u64))
                    .map_err(|e| RmError::Simulation(e.to_string()))?;
                chain.advance(self.burnin);
                let mut out = Vec::with_capacity(per_chain[c]);
                for _ in 0..per_chain[c] {
                    chain.advance(self.thin);
                    out.push(chain.stats().to_vec());
                }
                Ok(out)
            })
            .collect();
        Ok(batches?.into_iter().flatten().collect())
    }

    fn phase2_stream<'b>(
        &'b self,
        theta: &[f64],
        seed: u64,
    ) -> Result<Box<dyn Phase2Stream + 'b>, RmError> {
        let mut chain = Chain::new(self.model, theta, self.g_obs, seed)
            .map_err(|e| RmError::Simulation(e.to_string()))?;
        chain.advance(self.burnin);
        Ok(Box::new(ErgmStream { chain, thin: self.thin }))
    }

    fn derivative(
        &self,
        _theta: &[f64],
        base: &[Vec<f64>],
        _base_seed: u64,
        _fd_step: f64,
    ) -> Result<DMatrix<f64>, RmError> {
        // dE[g]/d eta = Cov[g] in an exponential family.
        let mean = batch_mean(base);
        Ok(batch_cov(base, &mean))
    }

    fn validate_batch(&self, stats: &[Vec<f64>]) -> Result<(), RmError> {
        let mean = batch_mean(stats);
        for (k, name) in self.model.names().iter().enumerate() {
            let var = stats
                .iter()
                .map(|row| {
                    let d = row[k] - mean[k];
                    d * d
                })
                .sum::<f64>()
                / (stats.len() as f64 - 1.0);
            if var < 1e-12 {
                return Err(RmError::Degenerate(name.clone()));
            }
        }
        Ok(())
    }

    fn project(&self, theta: &mut [f64], notes: &mut Vec<String>) {
        for (k, t) in theta.iter_mut().enumerate() {
            if t.abs() > self.max_abs_param {
                *t = self.max_abs_param.copysign(*t);
                if notes.len() < 8 {
                    notes.push(format!(
                        "parameter {} clamped to {:.1} during phase 2",
                        self.model.names()[k],
                        t
                    ));
                }
            }
        }
    }
}

struct ErgmStream<'a> {
    chain: Chain<'a>,
    thin: usize,
}

impl Phase2Stream for ErgmStream<'_> {
    fn next(&mut self, theta: &[f64]) -> Result<Vec<f64>, RmError> {
        self.chain.set_eta(theta);
        self.chain.advance(self.thin);
        Ok(self.chain.stats().to_vec())
    }
}

/// Fits the model to `g_obs` by matching simulated to observed statistics.
/// `init` overrides the starting parameters; otherwise fitting starts from
/// `spec.params`, with the edges coordinate moved to the observed density
/// logit when every starting value is zero.
pub fn fit_ergm(
    g_obs: &Graph,
    spec: &ErgmSpec,
    attrs: &NodeAttributes,
    init: Option<&[f64]>,
    settings: &FitErgmSettings,
    seed: u64,
) -> Result<EstimationResult, ErgmError> {
    let model = ErgmModel::bind(spec, attrs, g_obs.node_count())?;
    let n_pairs = free_pairs(g_obs).len();
    if n_pairs == 0 {
        return Err(ErgmError::NoFreePair);
    }
    if !settings.fixed.is_empty() && settings.fixed.len() != model.dim() {
        return Err(ErgmError::BadSettings(format!(
            "fixed mask has {} entries for {} effects",
            settings.fixed.len(),
            model.dim()
        )));
    }
    let observed = model.stats(g_obs);

    // Degenerate boundaries have no finite MLE.
    for (k, effect) in spec.effects.iter().enumerate() {
        if matches!(effect, super::ErgmEffect::Edges)
            && (observed[k] == 0.0 || observed[k] == n_pairs as f64)
        {
            return Err(ErgmError::Boundary { effect: "edges".into(), value: observed[k] });
        }
    }

    let mut start = match init {
        Some(v) => {
            if v.len() != model.dim() {
                return Err(ErgmError::ParamLength { effects: model.dim(), params: v.len() });
            }
            v.to_vec()
        }
        None => spec.params.clone(),
    };
    if init.is_none() && start.iter().all(|&v| v == 0.0) {
        for (k, effect) in spec.effects.iter().enumerate() {
            if matches!(effect, super::ErgmEffect::Edges) {
                let density =
                    (observed[k] / n_pairs as f64).clamp(1e-4, 1.0 - 1e-4);
                start[k] = (density / (1.0 - density)).ln();
            }
        }
    }

    let free = if settings.fixed.is_empty() {
        vec![true; model.dim()]
    } else {
        settings.fixed.iter().map(|f| !f).collect()
    };
    let moments = ErgmMoments {
        model: &model,
        g_obs,
        observed,
        free,
        burnin: settings.burnin.unwrap_or(20 * n_pairs),
        thin: settings.thin.unwrap_or(n_pairs).max(1),
        max_abs_param: settings.rm.max_abs_param,
    };
    Ok(rm_fit(&moments, &start, &settings.rm, seed)?)
}
