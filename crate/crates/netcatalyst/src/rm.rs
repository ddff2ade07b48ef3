//! Robbins-Monro stochastic approximation for method-of-moments fits.
//!
//! Both model families solve the same problem: find parameters theta such
//! that the expected simulated statistics equal the observed ones. The
//! engine runs the usual three phases.
//!
//! 1. Estimate a derivative matrix D at the starting point from a
//!    simulation batch.
//! 2. Sub-phases of updates theta <- theta - a D^-1 (sim - obs), with the
//!    gain a halved after every sub-phase and the iterate average carried
//!    forward as the next starting point.
//! 3. A large batch at the final theta for convergence t-ratios, the
//!    overall maximum convergence ratio and standard errors via
//!    D^-1 Cov D^-T.
//!
//! Everything is deterministic given the root seed: batch draw r uses seed
//! `batch_seed + r`, batches may fan out over worker threads, and results
//! are aggregated in draw order so the worker count never matters.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RmError {
    #[error("no t-ratios to check")]
    EmptyTratios,
    #[error("simulated statistic {0} is degenerate (variance below 1e-12)")]
    Degenerate(String),
    #[error("singular matrix while computing {0}")]
    Singular(String),
    #[error("invalid estimation settings: {0}")]
    BadSettings(String),
    #[error("simulation failed during estimation: {0}")]
    Simulation(String),
}

/// Tuning knobs for the three-phase fit.
#[derive(Debug, Clone)]
pub struct RmSettings {
    /// Gain of the first sub-phase; halved after each one.
    pub initial_gain: f64,
    /// Number of gain-halving sub-phases in phase 2.
    pub subphases: usize,
    /// Draws for the phase-1 derivative estimate.
    pub phase1_draws: usize,
    /// Iterations in the first sub-phase; doubled each sub-phase.
    pub phase2_base_iters: usize,
    /// Draws for the phase-3 convergence check and standard errors.
    pub phase3_draws: usize,
    /// Finite-difference step for the phase-1 and mid-run derivative
    /// estimates, relative to max(1, |theta_k|). These matrices only scale
    /// the updates, so a generous step that keeps the slope estimates
    /// stable beats an accurate one. Ignored by models with analytic
    /// derivatives.
    pub fd_step: f64,
    /// Finite-difference step for the phase-3 derivative behind the
    /// standard errors. A coarse step flattens into neighbouring regimes
    /// and understates the errors, so this one should stay small.
    pub se_fd_step: f64,
    /// Per-coordinate truncation of a single phase-2 update, so that a
    /// noisy derivative estimate cannot catapult the iterate.
    pub max_step: f64,
    /// Hard projection bound on |theta_k| during phase 2.
    pub max_abs_param: f64,
    /// Extra full passes over the three phases, each started from the
    /// previous estimate, taken while the convergence gate still fails.
    pub restarts: usize,
}

impl Default for RmSettings {
    fn default() -> Self {
        RmSettings {
            initial_gain: 0.2,
            subphases: 4,
            phase1_draws: 120,
            phase2_base_iters: 60,
            phase3_draws: 1000,
            fd_step: 0.15,
            se_fd_step: 0.05,
            max_step: 1.0,
            max_abs_param: 40.0,
            restarts: 2,
        }
    }
}

impl RmSettings {
    fn validate(&self) -> Result<(), RmError> {
        if !(self.initial_gain > 0.0) || !self.initial_gain.is_finite() {
            return Err(RmError::BadSettings("initial gain must be positive".into()));
        }
        if self.subphases == 0 || self.phase2_base_iters == 0 {
            return Err(RmError::BadSettings("phase 2 needs at least one iteration".into()));
        }
        if self.phase1_draws < 2 || self.phase3_draws < 2 {
            return Err(RmError::BadSettings("simulation batches need at least 2 draws".into()));
        }
        if !(self.fd_step > 0.0) || !(self.se_fd_step > 0.0) {
            return Err(RmError::BadSettings("finite-difference step must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(RmError::BadSettings("step truncation must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of a three-phase fit.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    /// Parameter names, rates first for longitudinal models.
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    /// Zero for parameters held fixed.
    pub standard_errors: Vec<f64>,
    /// Convergence t-ratios: mean simulated deviation over its sd.
    pub tratios: Vec<f64>,
    /// Maximum t-ratio over unit linear combinations of the deviations.
    pub overall_ratio: f64,
    pub converged: bool,
    /// Total phase-2 update steps taken.
    pub iterations: usize,
    pub seed: u64,
    /// Phase gains, step history and any boundary notes.
    pub log: Vec<String>,
}

/// Convergence gate: every |t-ratio| below 0.1 and the overall maximum
/// convergence ratio below 0.25.
pub fn convergence_check(tratios: &[f64], overall_ratio: f64) -> Result<bool, RmError> {
    if tratios.is_empty() {
        return Err(RmError::EmptyTratios);
    }
    Ok(tratios.iter().all(|t| t.abs() < 0.1) && overall_ratio < 0.25)
}

/// A model fitted by matching simulated moments to observed ones. One
/// statistic per parameter, in the same order.
pub(crate) trait MomentModel: Sync {
    fn dim(&self) -> usize;
    fn names(&self) -> Vec<String>;
    fn observed(&self) -> Vec<f64>;
    /// Which parameters are estimated; the rest stay at their initial value.
    fn free(&self) -> Vec<bool>;
    /// `draws` independent statistic vectors at `theta`; draw r must be a
    /// pure function of `seed + r`.
    fn simulate_batch(&self, theta: &[f64], draws: usize, seed: u64)
        -> Result<Vec<Vec<f64>>, RmError>;
    /// Sequential simulation stream for phase 2 (may carry sampler state).
    fn phase2_stream<'a>(&'a self, theta: &[f64], seed: u64)
        -> Result<Box<dyn Phase2Stream + 'a>, RmError>;
    /// Derivative of expected statistics with respect to theta. `base` is a
    /// batch simulated at `theta` with seeds `base_seed + r`, usable for
    /// common-random-number differencing with the given relative step.
    fn derivative(
        &self,
        theta: &[f64],
        base: &[Vec<f64>],
        base_seed: u64,
        fd_step: f64,
    ) -> Result<DMatrix<f64>, RmError>;
    /// Hook for per-batch sanity checks (degeneracy guards).
    fn validate_batch(&self, _stats: &[Vec<f64>]) -> Result<(), RmError> {
        Ok(())
    }
    /// Clamp theta to its admissible region, noting any boundary hit.
    fn project(&self, _theta: &mut [f64], _notes: &mut Vec<String>) {}
    /// Boundary diagnostics at the final estimate; any entry forces
    /// converged = false.
    fn boundary_flags(&self, _theta: &[f64]) -> Vec<String> {
        Vec::new()
    }
}

pub(crate) trait Phase2Stream {
    fn next(&mut self, theta: &[f64]) -> Result<Vec<f64>, RmError>;
}

pub(crate) fn batch_mean(stats: &[Vec<f64>]) -> Vec<f64> {
    let p = stats[0].len();
    let mut mean = vec![0.0; p];
    for row in stats {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= stats.len() as f64;
    }
    mean
}

pub(crate) fn batch_cov(stats: &[Vec<f64>], mean: &[f64]) -> DMatrix<f64> {
    let p = mean.len();
    let r = stats.len();
    let mut cov = DMatrix::zeros(p, p);
    for row in stats {
        for a in 0..p {
            let da = row[a] - mean[a];
            for b in a..p {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            let v = cov[(a, b)] / (r as f64 - 1.0);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}

fn submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

const PHASE1_STRIDE: u64 = 0x0100_0000;
const PHASE2_STRIDE: u64 = 0x0200_0000;
const PHASE3_STRIDE: u64 = 0x0300_0000;
const ATTEMPT_STRIDE: u64 = 0x0800_0000;

pub(crate) fn rm_fit(
    model: &dyn MomentModel,
    init: &[f64],
    settings: &RmSettings,
    seed: u64,
) -> Result<EstimationResult, RmError> {
    settings.validate()?;
    let p = model.dim();
    assert_eq!(init.len(), p, "initial parameter length");
    let names = model.names();
    let observed = model.observed();
    let free = model.free();
    let free_idx: Vec<usize> = (0..p).filter(|&k| free[k]).collect();
    if free_idx.is_empty() {
        return Err(RmError::BadSettings("no free parameters to estimate".into()));
    }

    let mut log = Vec::new();
    let mut theta = init.to_vec();
    let mut notes = Vec::new();
    model.project(&mut theta, &mut notes);

    struct Attempt {
        theta: Vec<f64>,
        tratios: Vec<f64>,
        overall_ratio: f64,
        converged: bool,
        base3: Vec<Vec<f64>>,
        p3_seed: u64,
    }

    let mut iterations = 0;
    let mut gain_scale = 1.0;
    let mut fallback = init.to_vec();
    let mut best: Option<Attempt> = None;
    for attempt in 0..=settings.restarts {
        let a_off = (attempt as u64).wrapping_mul(ATTEMPT_STRIDE);
        if attempt > 0 {
            log.push(format!("restart {attempt}"));
        }
        let attempt_start = theta.clone();

        // Phase 1: derivative estimate at the starting point.
        let p1_seed = seed.wrapping_add(PHASE1_STRIDE).wrapping_add(a_off);
        let base1 = model.simulate_batch(&theta, settings.phase1_draws, p1_seed)?;
        model.validate_batch(&base1)?;
        let d1 = model.derivative(&theta, &base1, p1_seed, settings.fd_step)?;
        let mut d_free_lu = submatrix(&d1, &free_idx).lu();
        if !d_free_lu.is_invertible() {
            return Err(RmError::Singular("phase-1 derivative".into()));
        }
        log.push(format!(
            "phase 1: {} draws, derivative estimated at theta = {:?}",
            settings.phase1_draws, theta
        ));

        // Phase 2: gain-halving sub-phases; each ends on its iterate average.
        for s in 0..settings.subphases {
            let gain = gain_scale * settings.initial_gain / f64::powi(2.0, s as i32);
            let iters = settings.phase2_base_iters << s;
            let sp_seed = seed
                .wrapping_add(PHASE2_STRIDE)
                .wrapping_add(a_off)
                .wrapping_add((s as u64) << 32);
            let mut stream = model.phase2_stream(&theta, sp_seed)?;
            let mut sum = vec![0.0; p];
            // Confine each sub-phase to a box around its starting point;
            // with a badly scaled derivative the truncated updates would
            // otherwise march to the bound in lockstep.
            let travel = 4.0 * settings.max_step;
            let anchor = theta.clone();
            for _ in 0..iters {
                let stats = stream.next(&theta)?;
                let dev = DVector::from_iterator(
                    free_idx.len(),
                    free_idx.iter().map(|&k| stats[k] - observed[k]),
                );
                let step = d_free_lu
                    .solve(&dev)
                    .ok_or_else(|| RmError::Singular("phase-2 step".into()))?;
                for (a, &k) in free_idx.iter().enumerate() {
                    theta[k] -= (gain * step[a]).clamp(-settings.max_step, settings.max_step);
                    theta[k] = theta[k].clamp(anchor[k] - travel, anchor[k] + travel);
                }
                model.project(&mut theta, &mut notes);
                for (acc, &t) in sum.iter_mut().zip(&theta) {
                    *acc += t;
                }
            }
            for (k, acc) in sum.iter().enumerate() {
                if free[k] {
                    theta[k] = acc / iters as f64;
                }
            }
            model.project(&mut theta, &mut notes);
            iterations += iters;
            log.push(format!(
                "phase 2 subphase {}/{}: gain {:.5}, {} iterations, theta = {:?}",
                s + 1,
                settings.subphases,
                gain,
                iters,
                theta
            ));
            // Re-estimating the derivative every sub-phase is not worth the
            // draws; refresh the scaling once, halfway through.
            if settings.subphases > 2 && s + 1 == settings.subphases / 2 {
                let refresh_seed = sp_seed.wrapping_add(0xa5a5);
                let batch = model.simulate_batch(&theta, settings.phase1_draws, refresh_seed)?;
                model.validate_batch(&batch)?;
                let d = model.derivative(&theta, &batch, refresh_seed, settings.fd_step)?;
                let lu = submatrix(&d, &free_idx).lu();
                if lu.is_invertible() {
                    d_free_lu = lu;
                    log.push(format!("phase 2: derivative refreshed after subphase {}", s + 1));
                }
            }
        }

        // Phase 3: convergence diagnostics and standard errors at the estimate.
        let p3_seed = seed.wrapping_add(PHASE3_STRIDE).wrapping_add(a_off);
        let base3 = model.simulate_batch(&theta, settings.phase3_draws, p3_seed)?;
        model.validate_batch(&base3)?;
        let mean3 = batch_mean(&base3);
        let cov3 = batch_cov(&base3, &mean3);
        let tratios: Vec<f64> = (0..p)
            .map(|k| {
                let dev = mean3[k] - observed[k];
                let sd = cov3[(k, k)].sqrt();
                if sd < 1e-12 {
                    if dev.abs() < 1e-9 {
                        0.0
                    } else {
                        f64::INFINITY.copysign(dev)
                    }
                } else {
                    dev / sd
                }
            })
            .collect();

        let dev_free = DVector::from_iterator(
            free_idx.len(),
            free_idx.iter().map(|&k| mean3[k] - observed[k]),
        );
        let cov_free = submatrix(&cov3, &free_idx);
        let cov_free_lu = cov_free.clone().lu();
        let overall_ratio = cov_free_lu
            .solve(&dev_free)
            .map(|x| dev_free.dot(&x).max(0.0).sqrt())
            .unwrap_or(f64::INFINITY);

        let mut flags = model.boundary_flags(&theta);
        let free_tratios: Vec<f64> = free_idx.iter().map(|&k| tratios[k]).collect();
        let mut converged = convergence_check(&free_tratios, overall_ratio)?;
        if !flags.is_empty() {
            converged = false;
            log.append(&mut flags);
        }
        log.push(format!(
            "phase 3: {} draws, overall ratio {:.4}, converged {}",
            settings.phase3_draws, overall_ratio, converged
        ));

        let improved = best.as_ref().map_or(true, |b| overall_ratio < b.overall_ratio);
        if improved {
            best = Some(Attempt {
                theta: theta.clone(),
                tratios,
                overall_ratio,
                converged,
                base3,
                p3_seed,
            });
        }
        if converged || attempt == settings.restarts {
            break;
        }

        // An attempt that travelled far past the sub-phase boxes ran off
        // into a degenerate region, and resuming from there would stay
        // stuck. Fall back to the starting point, nudged one unit along
        // each runaway coordinate (the root usually lies in that
        // direction, past a regime change the first derivative matrix
        // could not see), and take smaller steps.
        let travel = 4.0 * settings.max_step;
        let ran_off = theta
            .iter()
            .zip(&attempt_start)
            .any(|(t, s)| (t - s).abs() >= 2.0 * travel);
        if ran_off {
            for ((f, t), s) in fallback.iter_mut().zip(&theta).zip(&attempt_start) {
                if (t - s).abs() >= travel {
                    *f += (t - s).signum();
                }
            }
            theta.copy_from_slice(&fallback);
            model.project(&mut theta, &mut notes);
            gain_scale *= 0.5;
            log.push(format!("restart from {theta:?} at half gain: the attempt ran away"));
        } else if !improved {
            // The attempt made things worse; go back to the best estimate
            // and refine it with smaller steps.
            theta.copy_from_slice(&best.as_ref().expect("a best attempt").theta);
            gain_scale *= 0.5;
            log.push(format!("restart from {theta:?} at half gain: no improvement"));
        }
    }

    // Report the attempt with the smallest overall ratio, with standard
    // errors computed at its estimate.
    let Attempt { theta, tratios, overall_ratio, converged, base3, p3_seed } =
        best.expect("at least one attempt ran");
    let mean3 = batch_mean(&base3);
    let cov3 = batch_cov(&base3, &mean3);
    let cov_free = submatrix(&cov3, &free_idx);
    let d3 = model.derivative(&theta, &base3, p3_seed, settings.se_fd_step)?;
    let d3_free = submatrix(&d3, &free_idx);
    let d3_lu = d3_free.clone().lu();
    let mut standard_errors = vec![0.0; p];
    if let Some(dinv) = d3_lu.try_inverse() {
        // Cov(theta) = D^-1 Sigma D^-T for moment estimators.
        let cov_theta = &dinv * cov_free * dinv.transpose();
        for (a, &k) in free_idx.iter().enumerate() {
            standard_errors[k] = cov_theta[(a, a)].max(0.0).sqrt();
        }
    } else {
        return Err(RmError::Singular("phase-3 derivative".into()));
    }

    log.append(&mut notes);
    Ok(EstimationResult {
        names,
        estimates: theta,
        standard_errors,
        tratios,
        overall_ratio,
        converged,
        iterations,
        seed,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergence_gate_matches_thresholds() {
        assert!(convergence_check(&[0.05, -0.09], 0.2).unwrap());
        assert!(!convergence_check(&[0.05, -0.11], 0.2).unwrap());
        assert!(!convergence_check(&[0.05, 0.01], 0.3).unwrap());
        assert!(!convergence_check(&[f64::NAN], 0.0).unwrap());
        assert_eq!(convergence_check(&[], 0.0).unwrap_err(), RmError::EmptyTratios);
    }

    #[test]
    fn batch_moments_are_sane() {
        let stats = vec![vec![1.0, 2.0], vec![3.0, 2.0], vec![5.0, 2.0]];
        let mean = batch_mean(&stats);
        assert_eq!(mean, vec![3.0, 2.0]);
        let cov = batch_cov(&stats, &mean);
        assert!((cov[(0, 0)] - 4.0).abs() < 1e-12);
        assert_eq!(cov[(1, 1)], 0.0);
        assert_eq!(cov[(0, 1)], 0.0);
    }
}
