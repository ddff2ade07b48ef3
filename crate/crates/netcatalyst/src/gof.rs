//! Goodness of fit by simulation.
//!
//! Networks are drawn from a fitted model and their auxiliary statistics
//! (degree distribution, edgewise shared partners, triad census) are compared
//! with the observed values bin by bin. Each bin gets a simulated 95% band;
//! the report records which observed values fall inside. Misfit stays visible
//! per bin rather than being collapsed into a single number.

use rayon::prelude::*;
use thiserror::Error;

use crate::ergm::{mcmc_sample, ErgmError, ErgmSpec, McmcSettings};
use crate::graph::{aux_statistics, AuxStats, Graph, GraphError};
use crate::rm::EstimationResult;
use crate::saom::{simulate_period, Panel, SaomError, SaomSpec};
use crate::NodeAttributes;

/// Default truncation for the degree and shared-partner distributions; counts
/// at or above this land in a pooled tail bin.
pub const DEFAULT_MAX_K: usize = 15;

const TRIAD_LABELS: [&str; 4] = ["empty", "one-edge", "two-path", "triangle"];

#[derive(Debug, Error)]
pub enum GofError {
    #[error("goodness of fit needs at least 20 simulations, got {0}")]
    TooFewSims(usize),
    #[error("fit supplies {got} parameters but the model needs {expected}")]
    ParamCount { expected: usize, got: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ergm(#[from] ErgmError),
    #[error(transparent)]
    Saom(#[from] SaomError),
}

/// Statistic family a bin belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GofFamily {
    Degree,
    Esp,
    Triad,
}

impl std::fmt::Display for GofFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GofFamily::Degree => "degree",
            GofFamily::Esp => "esp",
            GofFamily::Triad => "triad",
        })
    }
}

/// One auxiliary-statistic bin with its simulated band.
#[derive(Debug, Clone, PartialEq)]
pub struct GofBin {
    pub family: GofFamily,
    pub label: String,
    pub observed: f64,
    /// 2.5th percentile of the simulated counts.
    pub lower: f64,
    /// Median of the simulated counts.
    pub median: f64,
    /// 97.5th percentile of the simulated counts.
    pub upper: f64,
    /// Whether `observed` lies in the closed band [lower, upper].
    pub inside: bool,
}

/// Band report over all auxiliary bins.
#[derive(Debug, Clone, PartialEq)]
pub struct GofReport {
    pub model: String,
    pub nsims: usize,
    pub max_k: usize,
    pub bins: Vec<GofBin>,
}

impl GofReport {
    /// Fraction of bins whose observed value sits inside its band.
    #[must_use]
    pub fn inside_fraction(&self) -> f64 {
        let inside = self.bins.iter().filter(|b| b.inside).count();
        inside as f64 / self.bins.len() as f64
    }

    /// Bins of one family, in bin order.
    pub fn family_bins(&self, family: GofFamily) -> impl Iterator<Item = &GofBin> {
        self.bins.iter().filter(move |b| b.family == family)
    }
}

/// Linear-interpolation quantile of pre-sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Central band holding the given coverage on pre-sorted data.
fn band(sorted: &[f64], coverage: f64) -> (f64, f64) {
    let alpha = (1.0 - coverage) / 2.0;
    (quantile(sorted, alpha), quantile(sorted, 1.0 - alpha))
}

fn flatten(a: &AuxStats) -> Vec<f64> {
    let mut v: Vec<f64> = a.degree_dist.iter().map(|&c| c as f64).collect();
    v.extend(a.esp_dist.iter().map(|&c| c as f64));
    v.extend(a.triad_census.iter().map(|&c| c as f64));
    v
}

fn bin_labels(max_k: usize) -> Vec<(GofFamily, String)> {
    let mut labels = Vec::with_capacity(2 * (max_k + 1) + 4);
    for (family, word) in [(GofFamily::Degree, "degree"), (GofFamily::Esp, "esp")] {
        for k in 0..max_k {
            labels.push((family, format!("{word} {k}")));
        }
        labels.push((family, format!("{word} {max_k}+")));
    }
    for name in TRIAD_LABELS {
        labels.push((GofFamily::Triad, format!("triad {name}")));
    }
    labels
}

fn assemble(model: String, observed: &AuxStats, sims: &[AuxStats]) -> GofReport {
    let obs = flatten(observed);
    let flat: Vec<Vec<f64>> = sims.iter().map(flatten).collect();
    let bins = bin_labels(observed.max_k)
        .into_iter()
        .enumerate()
        .map(|(b, (family, label))| {
            let mut column: Vec<f64> = flat.iter().map(|row| row[b]).collect();
            column.sort_by(f64::total_cmp);
            let (lower, upper) = band(&column, 0.95);
            let median = quantile(&column, 0.5);
            let inside = lower <= obs[b] && obs[b] <= upper;
            GofBin { family, label, observed: obs[b], lower, median, upper, inside }
        })
        .collect();
    GofReport { model, nsims: sims.len(), max_k: observed.max_k, bins }
}

/// Simulates `nsims` graphs at the fitted parameters and reports, per
/// auxiliary bin, where the observed graph falls in the simulated
/// distribution. Each draw is an independent chain started from `g_obs`.
/// Deterministic given the seed, whatever the worker count.
pub fn gof_ergm(
    fit: &EstimationResult,
    spec: &ErgmSpec,
    attrs: &NodeAttributes,
    g_obs: &Graph,
    nsims: usize,
    seed: u64,
    max_k: usize,
) -> Result<GofReport, GofError> {
    if nsims < 20 {
        return Err(GofError::TooFewSims(nsims));
    }
    if fit.estimates.len() != spec.effects.len() {
        return Err(GofError::ParamCount { expected: spec.effects.len(), got: fit.estimates.len() });
    }
    let fitted = ErgmSpec::new(spec.effects.clone(), fit.estimates.clone())?;
    let observed = aux_statistics(g_obs, max_k)?;
    let npairs = g_obs.node_count() * (g_obs.node_count().saturating_sub(1)) / 2;
    let settings = McmcSettings { burnin: 10 * npairs.max(10), thin: 1, draws: 1 };
    let sims = (0..nsims)
        .into_par_iter()
        .map(|s| {
            let draws =
                mcmc_sample(g_obs, &fitted, attrs, &settings, seed.wrapping_add(s as u64))?;
            Ok(aux_statistics(&draws[0], max_k)?)
        })
        .collect::<Result<Vec<_>, GofError>>()?;
    Ok(assemble(format!("ergm: {}", fitted.names().join(" + ")), &observed, &sims))
}

fn add_assign(acc: &mut AuxStats, a: &AuxStats) {
    for (t, s) in acc.degree_dist.iter_mut().zip(&a.degree_dist) {
        *t += s;
    }
    for (t, s) in acc.esp_dist.iter_mut().zip(&a.esp_dist) {
        *t += s;
    }
    for (t, s) in acc.triad_census.iter_mut().zip(&a.triad_census) {
        *t += s;
    }
}

/// Simulates every period forward from its observed start wave at the fitted
/// rates and parameters, pooling end-wave auxiliary statistics across
/// periods. The observed side pools the statistics of waves 1.. likewise.
pub fn gof_saom(
    fit: &EstimationResult,
    spec: &SaomSpec,
    panel: &Panel,
    nsims: usize,
    seed: u64,
    max_k: usize,
) -> Result<GofReport, GofError> {
    if nsims < 20 {
        return Err(GofError::TooFewSims(nsims));
    }
    let periods = panel.period_count();
    let expected = periods + spec.effects.len();
    if fit.estimates.len() != expected {
        return Err(GofError::ParamCount { expected, got: fit.estimates.len() });
    }
    let rates = &fit.estimates[..periods];
    let fitted =
        SaomSpec::new(spec.effects.clone(), fit.estimates[periods..].to_vec(), vec![])?;
    let mut observed = aux_statistics(panel.wave(1), max_k)?;
    for w in 2..panel.wave_count() {
        add_assign(&mut observed, &aux_statistics(panel.wave(w), max_k)?);
    }
    let active: Vec<Vec<bool>> = (0..periods).map(|p| panel.active_in_period(p)).collect();
    let starts: Vec<Graph> = (0..periods).map(|p| panel.period_start(p)).collect();
    let sims = (0..nsims)
        .into_par_iter()
        .map(|s| {
            let base = seed.wrapping_add((s as u64 + 1).wrapping_mul(0x10_000));
            let mut pooled: Option<AuxStats> = None;
            for p in 0..periods {
                let end = simulate_period(
                    &starts[p],
                    rates[p],
                    &fitted,
                    panel.attrs(p),
                    &active[p],
                    base.wrapping_add(p as u64),
                )?;
                let stats = aux_statistics(&end, max_k)?;
                match pooled.as_mut() {
                    Some(acc) => add_assign(acc, &stats),
                    None => pooled = Some(stats),
                }
            }
            Ok(pooled.expect("at least one period"))
        })
        .collect::<Result<Vec<_>, GofError>>()?;
    Ok(assemble(format!("saom: {}", fitted.names().join(" + ")), &observed, &sims))
}
