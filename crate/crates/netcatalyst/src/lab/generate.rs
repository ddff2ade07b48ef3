//! Baseline network generators and growth pseudo-panels.

use super::LabError;
use crate::attrs::NodeAttributes;
use crate::graph::Graph;
use crate::saom::Panel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// How an entrant picks the earlier nodes it attaches to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attachment {
    /// Probability proportional to current degree.
    Preferential,
    /// All earlier nodes equally likely.
    Uniform,
}

fn check_attachment(n: usize, m: usize) -> Result<(), LabError> {
    if m == 0 || m >= n {
        return Err(LabError::BadAttachment { m, n });
    }
    Ok(())
}

/// Complete seed on the first `m` nodes, then each entrant v = m..n ties
/// to `m` distinct earlier nodes, drawn sequentially without replacement
/// with the weights frozen at the entrant's arrival (an entrant's own
/// ties do not feed back into its remaining draws).
fn grow(n: usize, m: usize, attachment: Attachment, rng: &mut ChaCha8Rng) -> Graph {
    let mut g = Graph::new(n);
    for i in 0..m {
        for j in (i + 1)..m {
            g.add_edge(i, j).unwrap();
        }
    }
    let mut weights: Vec<f64> = Vec::with_capacity(n);
    let mut picked: Vec<bool> = Vec::with_capacity(n);
    for v in m..n {
        weights.clear();
        weights.extend((0..v).map(|u| match attachment {
            Attachment::Preferential => g.degree(u) as f64,
            Attachment::Uniform => 1.0,
        }));
        picked.clear();
        picked.resize(v, false);
        for _ in 0..m {
            let total: f64 = (0..v).filter(|&u| !picked[u]).map(|u| weights[u]).sum();
            let choice = if total > 0.0 {
                let mut x = rng.gen::<f64>() * total;
                let mut hit = None;
                for u in 0..v {
                    if picked[u] {
                        continue;
                    }
                    x -= weights[u];
                    if x < 0.0 {
                        hit = Some(u);
                        break;
                    }
                }
                // Rounding can leave a sliver past the last mass.
                hit.or_else(|| (0..v).rev().find(|&u| !picked[u] && weights[u] > 0.0))
            } else {
                None
            };
            let choice = choice.unwrap_or_else(|| {
                // Everything unpicked has weight zero (the one-node seed
                // of m = 1); fall back to a uniform draw.
                let open: Vec<usize> = (0..v).filter(|&u| !picked[u]).collect();
                open[rng.gen_range(0..open.len())]
            });
            picked[choice] = true;
            g.add_edge(v, choice).unwrap();
        }
    }
    g
}

/// Barabási–Albert preferential-attachment graph: a complete seed on the
/// first `m` nodes, after which every entrant attaches to `m` distinct
/// earlier nodes drawn proportionally to degree. The edge count is always
/// C(m, 2) + (n - m) m. Deterministic given the seed.
pub fn generate_ba(n: usize, m: usize, seed: u64) -> Result<Graph, LabError> {
    check_attachment(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(grow(n, m, Attachment::Preferential, &mut rng))
}

fn pair_from_index(mut idx: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    let mut row = n - 1;
    while idx >= row {
        idx -= row;
        i += 1;
        row -= 1;
    }
    (i, i + 1 + idx)
}

/// Uniform random graph with exactly `edges` edges (the G(n, M) model),
/// sampled by Floyd's algorithm over pair indices. Deterministic given
/// the seed.
pub fn generate_er(n: usize, edges: usize, seed: u64) -> Result<Graph, LabError> {
    let pairs = n * (n - 1) / 2;
    if edges > pairs {
        return Err(LabError::TooManyEdges { edges, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = HashSet::with_capacity(edges);
    for j in (pairs - edges)..pairs {
        let t = rng.gen_range(0..=j);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    let mut g = Graph::new(n);
    for &idx in &chosen {
        let (i, j) = pair_from_index(idx, n);
        g.add_edge(i, j).unwrap();
    }
    Ok(g)
}

/// Pseudo-panel from one growth run: the graph grows to `n` nodes with
/// `m` attachments per entrant, snapshots are taken at roughly half and
/// three quarters of the final roster and at the end, and the snapshots
/// become a three-wave panel on the final roster in which later entrants
/// are absent from the early waves.
pub fn growth_panel(
    n: usize,
    m: usize,
    attachment: Attachment,
    seed: u64,
) -> Result<Panel, LabError> {
    check_attachment(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = grow(n, m, attachment, &mut rng);
    let sizes = [n.div_ceil(2).max(m), (3 * n).div_ceil(4).max(m), n];
    let waves = sizes
        .iter()
        .map(|&s| {
            let mut g = Graph::new(n);
            for (i, j) in full.edges() {
                if i < s && j < s {
                    g.add_edge(i, j).unwrap();
                }
            }
            g
        })
        .collect();
    let ids = (0..n).map(|i| format!("n{i}")).collect();
    let entry = (0..n)
        .map(|i| sizes.iter().position(|&s| i < s).expect("within final roster"))
        .collect();
    let attrs = vec![NodeAttributes::new(n); 3];
    Ok(Panel::new(ids, waves, attrs, entry, vec![2; n])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ba_edge_count_follows_the_formula() {
        let g = generate_ba(10, 2, 7).unwrap();
        assert_eq!(g.edge_count(), 17);
        for i in 2..10 {
            assert!(g.degree(i) >= 2);
        }
    }

    #[test]
    fn ba_one_past_the_seed_is_complete() {
        for m in 1..6 {
            let g = generate_ba(m + 1, m, 3).unwrap();
            assert_eq!(g.edge_count(), m * (m + 1) / 2);
        }
    }

    #[test]
    fn ba_is_deterministic_and_rejects_bad_m() {
        assert_eq!(generate_ba(40, 3, 9).unwrap(), generate_ba(40, 3, 9).unwrap());
        assert_ne!(generate_ba(40, 3, 9).unwrap(), generate_ba(40, 3, 10).unwrap());
        assert!(matches!(generate_ba(5, 0, 1), Err(LabError::BadAttachment { .. })));
        assert!(matches!(generate_ba(5, 5, 1), Err(LabError::BadAttachment { .. })));
    }

    #[test]
    fn er_hits_the_exact_edge_count() {
        for edges in [0, 1, 9, 45] {
            let g = generate_er(10, edges, 11).unwrap();
            assert_eq!(g.edge_count(), edges);
        }
        assert!(matches!(generate_er(10, 46, 1), Err(LabError::TooManyEdges { .. })));
        assert_eq!(generate_er(10, 9, 5).unwrap(), generate_er(10, 9, 5).unwrap());
    }

    #[test]
    fn ba_outgrows_er_max_degree() {
        // Same edge count, paired seeds; the preferential arm should grow
        // a visibly heavier hub almost always.
        let n = 500;
        let edges = 1 + (n - 2) * 2;
        let mut wins = 0;
        for rep in 0..100u64 {
            let ba = generate_ba(n, 2, 1000 + rep).unwrap();
            let er = generate_er(n, edges, 2000 + rep).unwrap();
            let max_ba = (0..n).map(|i| ba.degree(i)).max().unwrap();
            let max_er = (0..n).map(|i| er.degree(i)).max().unwrap();
            if max_ba > max_er {
                wins += 1;
            }
        }
        assert!(wins >= 95, "preferential attachment won only {wins}/100");
    }

    #[test]
    fn growth_panel_nests_waves_and_sets_composition() {
        let panel = growth_panel(40, 2, Attachment::Preferential, 5).unwrap();
        assert_eq!(panel.wave_count(), 3);
        assert_eq!(panel.n(), 40);
        assert_eq!(panel.entry_wave(0), 0);
        assert_eq!(panel.entry_wave(19), 0);
        assert_eq!(panel.entry_wave(20), 1);
        assert_eq!(panel.entry_wave(29), 1);
        assert_eq!(panel.entry_wave(30), 2);
        assert_eq!(panel.wave(2).edge_count(), 1 + 38 * 2);
        // Growth only adds ties, so every wave nests in the next.
        for w in 0..2 {
            for (i, j) in panel.wave(w).edges() {
                assert!(panel.wave(w + 1).has_edge(i, j));
            }
        }
    }

    #[test]
    fn uniform_growth_matches_ba_edge_counts() {
        let a = growth_panel(30, 2, Attachment::Preferential, 9).unwrap();
        let b = growth_panel(30, 2, Attachment::Uniform, 9).unwrap();
        for w in 0..3 {
            assert_eq!(a.wave(w).edge_count(), b.wave(w).edge_count());
        }
    }

    proptest! {
        #[test]
        fn ba_edge_count_formula_holds(n in 2usize..40, m in 1usize..39, seed in any::<u64>()) {
            prop_assume!(m < n);
            let g = generate_ba(n, m, seed).unwrap();
            prop_assert_eq!(g.edge_count(), m * (m - 1) / 2 + (n - m) * m);
        }

        #[test]
        fn er_edges_are_within_range(n in 2usize..30, seed in any::<u64>()) {
            let pairs = n * (n - 1) / 2;
            let g = generate_er(n, pairs / 2, seed).unwrap();
            prop_assert_eq!(g.edge_count(), pairs / 2);
        }
    }
}
