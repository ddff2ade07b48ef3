//! Method-of-moments fitting for panels.
//!
//! Each period is simulated forward from its observed start wave, so the
//! estimates are conditioned on the first observation of every period.
//! Targets are the per-period Hamming distances (driving the rates) and
//! the per-effect statistic sums over period end states (driving the
//! betas). Derivatives come from forward finite differences with common
//! random numbers; standard errors from the usual sandwich D^-1 Cov D^-T.

use super::panel::Panel;
use super::simulate::{run_period, MicrostepBuf};
use super::{SaomError, SaomModel, SaomSpec};
use crate::graph::Graph;
use crate::rm::{
    batch_mean, rm_fit, EstimationResult, MomentModel, Phase2Stream, RmError, RmSettings,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Rates are projected into this interval during estimation; estimates
/// within a decade of either end are flagged as boundary solutions.
const MIN_RATE: f64 = 1e-3;
const MAX_RATE: f64 = 1e4;

/// Settings for `fit_saom`.
#[derive(Debug, Clone, Default)]
pub struct FitSaomSettings {
    pub rm: RmSettings,
    /// Effects to hold at their starting value; empty means all free.
    /// Rates are always estimated.
    pub fixed: Vec<bool>,
}

fn bind_periods(panel: &Panel, spec: &SaomSpec) -> Result<Vec<SaomModel>, SaomError> {
    (0..panel.period_count())
        .map(|p| SaomModel::bind(&spec.effects, panel.attrs(p)))
        .collect()
}

/// Observed moment targets: one Hamming distance per period, then one
/// pooled end-wave statistic sum per effect. Covariates are taken from
/// each period's start wave.
pub fn target_statistics(panel: &Panel, spec: &SaomSpec) -> Result<Vec<f64>, SaomError> {
    let models = bind_periods(panel, spec)?;
    let m = panel.period_count();
    let mut out = vec![0.0; m + spec.effects.len()];
    for p in 0..m {
        out[p] = panel.period_start(p).hamming(panel.wave(p + 1)) as f64;
        models[p].add_stat_sums(panel.wave(p + 1), &mut out[m..]);
    }
    Ok(out)
}

struct SaomMoments {
    names: Vec<String>,
    observed: Vec<f64>,
    free: Vec<bool>,
    models: Vec<SaomModel>,
    starts: Vec<Graph>,
    actives: Vec<Vec<bool>>,
    active_ids: Vec<Vec<usize>>,
    periods: usize,
    max_abs_param: f64,
}

impl SaomMoments {
    fn simulate_one(&self, theta: &[f64], seed: u64, buf: &mut MicrostepBuf) -> Vec<f64> {
        let m = self.periods;
        let beta = &theta[m..];
        let mut stats = vec![0.0; theta.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in 0..m {
            let mut g = self.starts[p].clone();
            run_period(
                &self.models[p],
                beta,
                &mut g,
                &self.actives[p],
                &self.active_ids[p],
                theta[p],
                &mut rng,
                buf,
            );
            stats[p] = g.hamming(&self.starts[p]) as f64;
            self.models[p].add_stat_sums(&g, &mut stats[m..]);
        }
        stats
    }
}

impl MomentModel for SaomMoments {
    fn dim(&self) -> usize {
        self.observed.len()
    }

    fn names(&self) -> Vec<String> {
        self.names.clone()
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
        Ok((0..draws)
            .into_par_iter()
            .map(|r| {
                let mut buf = MicrostepBuf::default();
                self.simulate_one(theta, seed.wrapping_add(r as u64), &mut buf)
            })
            .collect())
    }

    fn phase2_stream<'a>(
        &'a self,
        _theta: &[f64],
        seed: u64,
    ) -> Result<Box<dyn Phase2Stream + 'a>, RmError> {
        Ok(Box::new(SaomStream { moments: self, seed, count: 0, buf: MicrostepBuf::default() }))
    }

    fn derivative(
        &self,
        theta: &[f64],
        base: &[Vec<f64>],
        base_seed: u64,
        fd_step: f64,
    ) -> Result<DMatrix<f64>, RmError> {
        // Forward differences, re-running the base seeds so the common
        // random numbers cancel most of the simulation noise.
        let p = self.dim();
        let mean0 = batch_mean(base);
        let mut d = DMatrix::zeros(p, p);
        for c in 0..p {
            if !self.free[c] {
                continue;
            }
            let h = fd_step * theta[c].abs().max(1.0);
            let mut shifted = theta.to_vec();
            shifted[c] += h;
            let pert = self.simulate_batch(&shifted, base.len(), base_seed)?;
            let mean1 = batch_mean(&pert);
            for row in 0..p {
                d[(row, c)] = (mean1[row] - mean0[row]) / h;
            }
        }
        Ok(d)
    }

    fn project(&self, theta: &mut [f64], notes: &mut Vec<String>) {
        for (k, t) in theta.iter_mut().enumerate() {
            let clamped = if k < self.periods {
                t.clamp(MIN_RATE, MAX_RATE)
            } else {
                t.clamp(-self.max_abs_param, self.max_abs_param)
            };
            if clamped != *t {
                if notes.len() < 8 {
                    notes.push(format!(
                        "parameter {} clamped to {:.4} during phase 2",
                        self.names[k], clamped
                    ));
                }
                *t = clamped;
            }
        }
    }

    fn boundary_flags(&self, theta: &[f64]) -> Vec<String> {
        let mut flags = Vec::new();
        for p in 0..self.periods {
            if theta[p] < MIN_RATE * 10.0 {
                flags.push(format!("{} driven to its lower bound", self.names[p]));
            } else if theta[p] > MAX_RATE / 10.0 {
                flags.push(format!("{} diverged", self.names[p]));
            }
        }
        flags
    }
}

struct SaomStream<'a> {
    moments: &'a SaomMoments,
    seed: u64,
    count: u64,
    buf: MicrostepBuf,
}

impl Phase2Stream for SaomStream<'_> {
    fn next(&mut self, theta: &[f64]) -> Result<Vec<f64>, RmError> {
        let seed = self.seed.wrapping_add(self.count);
        self.count += 1;
        Ok(self.moments.simulate_one(theta, seed, &mut self.buf))
    }
}

/// Fits the model to the panel. Starting values are `init` when given;
/// otherwise the rates start from the observed amount of change (or from
/// `spec.rates` when named) and the betas from `spec.params`.
pub fn fit_saom(
    panel: &Panel,
    spec: &SaomSpec,
    init: Option<&[f64]>,
    settings: &FitSaomSettings,
    seed: u64,
) -> Result<EstimationResult, SaomError> {
    let m = panel.period_count();
    let k = spec.effects.len();
    if !spec.rates.is_empty() && spec.rates.len() != m {
        return Err(SaomError::RateCount { expected: m, got: spec.rates.len() });
    }
    if !settings.fixed.is_empty() && settings.fixed.len() != k {
        return Err(SaomError::BadSettings(format!(
            "fixed mask has {} entries for {} effects",
            settings.fixed.len(),
            k
        )));
    }
    let observed = target_statistics(panel, spec)?;
    let active_ids: Vec<Vec<usize>> = (0..m)
        .map(|p| {
            let mask = panel.active_in_period(p);
            (0..panel.n()).filter(|&i| mask[i]).collect()
        })
        .collect();

    let start = match init {
        Some(v) => {
            if v.len() != m + k {
                return Err(SaomError::InitLength { expected: m + k, got: v.len() });
            }
            v.to_vec()
        }
        None => {
            let mut theta = Vec::with_capacity(m + k);
            for p in 0..m {
                theta.push(if spec.rates.is_empty() {
                    // Two opportunities per observed change is a crude but
                    // serviceable starting point.
                    let act = active_ids[p].len().max(1) as f64;
                    (2.0 * observed[p] / act).clamp(0.5, 20.0)
                } else {
                    spec.rates[p]
                });
            }
            theta.extend_from_slice(&spec.params);
            theta
        }
    };

    let mut free = vec![true; m];
    match settings.fixed.is_empty() {
        true => free.extend(std::iter::repeat(true).take(k)),
        false => free.extend(settings.fixed.iter().map(|f| !f)),
    }
    let mut names: Vec<String> = (1..=m).map(|p| format!("rate.{p}")).collect();
    names.extend(spec.names());

    let moments = SaomMoments {
        names,
        observed,
        free,
        models: bind_periods(panel, spec)?,
        starts: (0..m).map(|p| panel.period_start(p)).collect(),
        actives: (0..m).map(|p| panel.active_in_period(p)).collect(),
        active_ids,
        periods: m,
        max_abs_param: settings.rm.max_abs_param,
    };
    Ok(rm_fit(&moments, &start, &settings.rm, seed)?)
}
