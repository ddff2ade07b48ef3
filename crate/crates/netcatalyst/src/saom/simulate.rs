//! Forward simulation of one observation period.

use super::{softmax_into, SaomError, SaomModel, SaomSpec};
use crate::attrs::NodeAttributes;
use crate::graph::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

/// Scratch space reused across micro-steps.
#[derive(Default)]
pub(crate) struct MicrostepBuf {
    partners: Vec<usize>,
    probs: Vec<f64>,
}

/// One opportunity for a uniformly drawn active actor: sample a choice
/// from the multinomial logit, then apply it, with creations subject to
/// the partner's confirmation.
fn microstep(
    model: &SaomModel,
    beta: &[f64],
    g: &mut Graph,
    active: &[bool],
    active_ids: &[usize],
    rng: &mut ChaCha8Rng,
    buf: &mut MicrostepBuf,
) {
    let i = active_ids[rng.gen_range(0..active_ids.len())];
    buf.partners.clear();
    buf.probs.clear();
    buf.probs.push(0.0);
    for j in 0..g.node_count() {
        if j != i && active[j] && !g.is_forbidden(i, j) {
            buf.partners.push(j);
            buf.probs.push(model.toggle_delta(beta, g, i, j));
        }
    }
    if buf.partners.is_empty() {
        return;
    }
    softmax_into(&mut buf.probs);
    let u: f64 = rng.gen();
    let mut choice = buf.probs.len() - 1;
    let mut acc = 0.0;
    for (c, p) in buf.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            choice = c;
            break;
        }
    }
    if choice == 0 {
        return;
    }
    let j = buf.partners[choice - 1];
    debug_assert!(!g.is_forbidden(i, j));
    if g.has_edge(i, j) {
        g.remove_edge(i, j).unwrap();
    } else {
        let accept = rng.gen::<f64>() < super::logistic(model.add_delta(beta, g, j, i));
        if accept {
            g.add_edge(i, j).unwrap();
        }
    }
}

/// Runs K ~ Poisson(n_active * lambda) micro-steps on `g` in place.
pub(crate) fn run_period(
    model: &SaomModel,
    beta: &[f64],
    g: &mut Graph,
    active: &[bool],
    active_ids: &[usize],
    lambda: f64,
    rng: &mut ChaCha8Rng,
    buf: &mut MicrostepBuf,
) {
    let mean = active_ids.len() as f64 * lambda;
    if mean <= 0.0 {
        return;
    }
    let opportunities = Poisson::new(mean).expect("positive Poisson mean").sample(rng) as u64;
    for _ in 0..opportunities {
        microstep(model, beta, g, active, active_ids, rng, buf);
    }
    for (i, j) in g.edges() {
        assert!(!g.is_forbidden(i, j), "structural zero ({i}, {j}) acquired a tie");
    }
}

/// Evolves `x0` over one period at rate `lambda` under `spec.params`,
/// with only the actors marked active making (or receiving) changes.
/// Ties incident to inactive actors are frozen: an inactive actor gets no
/// opportunities and never enters anyone's choice set, so such ties carry
/// over unchanged while still counting towards degrees and shared
/// partners. Deterministic given the seed.
pub fn simulate_period(
    x0: &Graph,
    lambda: f64,
    spec: &SaomSpec,
    attrs: &NodeAttributes,
    active: &[bool],
    seed: u64,
) -> Result<Graph, SaomError> {
    if active.len() != x0.node_count() {
        return Err(SaomError::ActiveLength { expected: x0.node_count(), got: active.len() });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(SaomError::BadRate(lambda));
    }
    let model = SaomModel::bind(&spec.effects, attrs)?;
    let active_ids: Vec<usize> = (0..x0.node_count()).filter(|&i| active[i]).collect();
    let mut g = x0.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = MicrostepBuf::default();
    run_period(&model, &spec.params, &mut g, active, &active_ids, lambda, &mut rng, &mut buf);
    Ok(g)
}
