//! Exact enumeration oracle for small rosters.
//!
//! For n up to 7 the full graph space (2^21 states at most) is walked in
//! Gray-code order, so consecutive states differ by one edge and the
//! statistics update through the same change-statistic code the sampler
//! uses. Forbidden pairs are excluded from the enumeration entirely, which
//! is exactly the conditional distribution the sampler targets.
//!
//! `exact_mle` runs Newton's method on the exact moments and serves as the
//! independent reference the stochastic fit is held against in tests.

use super::sampler::free_pairs;
use super::{ErgmError, ErgmModel, ErgmSpec};
use crate::attrs::NodeAttributes;
use crate::graph::Graph;
use nalgebra::{DMatrix, DVector};

/// Largest roster `exact_moments` will enumerate.
pub const MAX_EXACT_NODES: usize = 7;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Walks every admissible graph on the template's roster (forbidden pairs
/// never hold an edge) and hands the statistic vector of each state to
/// `visit`. The template's own edges are ignored.
fn enumerate_states(
    template: &Graph,
    model: &ErgmModel,
    mut visit: impl FnMut(&[f64]),
) -> Result<(), ErgmError> {
    let n = template.node_count();
    if n > MAX_EXACT_NODES {
        return Err(ErgmError::TooManyNodes { n, max: MAX_EXACT_NODES });
    }
    let mut blank = Graph::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if template.is_forbidden(i, j) {
                blank.forbid_pair(i, j).expect("copying forbidden pairs");
            }
        }
    }
    let pairs = free_pairs(&blank);
    let a = pairs.len();
    let mut g = blank;
    let mut stats = model.stats(&g);
    let mut delta = vec![0.0; model.dim()];
    visit(&stats);
    // Binary-reflected Gray code: state t differs from t-1 in the bit at
    // the lowest set position of t.
    for t in 1u64..(1u64 << a) {
        let bit = t.trailing_zeros() as usize;
        let (i, j) = pairs[bit];
        let (i, j) = (i as usize, j as usize);
        if g.has_edge(i, j) {
            g.toggle_edge_in_place(i, j).expect("free pair");
            model.add_delta_into(&g, i, j, &mut delta);
            for (s, d) in stats.iter_mut().zip(&delta) {
                *s -= d;
            }
        } else {
            model.add_delta_into(&g, i, j, &mut delta);
            g.toggle_edge_in_place(i, j).expect("free pair");
            for (s, d) in stats.iter_mut().zip(&delta) {
                *s += d;
            }
        }
        visit(&stats);
    }
    Ok(())
}

/// Exact moments of the model: the expected statistic vector and the log
/// normalizing constant, by full enumeration. The template graph supplies
/// the roster size and the forbidden pairs; its edges are ignored.
pub fn exact_moments(
    template: &Graph,
    spec: &ErgmSpec,
    attrs: &NodeAttributes,
) -> Result<(Vec<f64>, f64), ErgmError> {
    let (mean, _, logz) = exact_moments_with_cov(template, spec, attrs)?;
    Ok((mean, logz))
}

/// Exact mean, covariance and log normalizer in one sweep.
pub(crate) fn exact_moments_with_cov(
    template: &Graph,
    spec: &ErgmSpec,
    attrs: &NodeAttributes,
) -> Result<(Vec<f64>, DMatrix<f64>, f64), ErgmError> {
    let model = ErgmModel::bind(spec, attrs, template.node_count())?;
    let eta = &spec.params;
    let p = model.dim();

    let mut max_logw = f64::NEG_INFINITY;
    enumerate_states(template, &model, |stats| {
        let lw = dot(eta, stats);
        if lw > max_logw {
            max_logw = lw;
        }
    })?;

    let mut z = 0.0;
    let mut first = vec![0.0; p];
    let mut second: DMatrix<f64> = DMatrix::zeros(p, p);
    enumerate_states(template, &model, |stats| {
        let w = (dot(eta, stats) - max_logw).exp();
        z += w;
        for a in 0..p {
            first[a] += w * stats[a];
            for b in a..p {
                second[(a, b)] += w * stats[a] * stats[b];
            }
        }
    })?;

    let mean: Vec<f64> = first.iter().map(|v| v / z).collect();
    let mut cov = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let v = second[(a, b)] / z - mean[a] * mean[b];
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok((mean, cov, max_logw + z.ln()))
}

/// Maximum likelihood estimate by Newton iteration on the exact moments.
/// `observed` is the statistic vector of the data; `init` starts the
/// iteration. Independent of the stochastic fitting path.
pub fn exact_mle(
    template: &Graph,
    spec: &ErgmSpec,
    attrs: &NodeAttributes,
    observed: &[f64],
    init: &[f64],
) -> Result<Vec<f64>, ErgmError> {
    let mut eta = init.to_vec();
    for _ in 0..200 {
        let probe = ErgmSpec { effects: spec.effects.clone(), params: eta.clone() };
        let (mean, cov, _) = exact_moments_with_cov(template, &probe, attrs)?;
        let grad = DVector::from_iterator(mean.len(), observed.iter().zip(&mean).map(|(o, m)| o - m));
        let step = cov
            .lu()
            .solve(&grad)
            .ok_or_else(|| ErgmError::Boundary {
                effect: "exact likelihood".into(),
                value: f64::NAN,
            })?;
        let mut max_step: f64 = 0.0;
        for (e, s) in eta.iter_mut().zip(step.iter()) {
            // Damp huge Newton steps far from the optimum.
            let s = s.clamp(-2.0, 2.0);
            *e += s;
            max_step = max_step.max(s.abs());
            if !e.is_finite() {
                return Err(ErgmError::OracleNoConvergence);
            }
        }
        if max_step < 1e-10 {
            return Ok(eta);
        }
    }
    Err(ErgmError::OracleNoConvergence)
}
