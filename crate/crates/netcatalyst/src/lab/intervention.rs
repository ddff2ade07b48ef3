//! Link-addition interventions and concentration metrics.

use super::LabError;
use crate::graph::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// What the plan does to the target organizations when applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterventionMode {
    /// Tie every pair of targets.
    NaoClique,
    /// Append one auxiliary coordinating node tied to every target. The
    /// auxiliary node is not itself an actor: it is excluded from the
    /// metrics and meant to be held inactive during simulation, so its
    /// spokes are structural rather than chosen.
    NaoHub,
    /// Tie `k` target pairs drawn uniformly from all C(|targets|, 2) of
    /// them. The draw depends only on the plan's seed, never on the
    /// graph, so re-application picks the same pairs.
    LinkBudget { k: usize },
}

/// A link-addition intervention on a fixed target set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterventionPlan {
    pub targets: Vec<usize>,
    pub mode: InterventionMode,
    /// Periods at whose start the plan is applied.
    pub active_periods: Vec<usize>,
    /// Drives the link-budget pair draw.
    pub seed: u64,
    /// Roster bound for nao-hub growth; `None` puts no bound.
    pub roster_capacity: Option<usize>,
}

impl InterventionPlan {
    pub fn new(
        targets: Vec<usize>,
        mode: InterventionMode,
        active_periods: Vec<usize>,
    ) -> Result<Self, LabError> {
        let plan =
            InterventionPlan { targets, mode, active_periods, seed: 0, roster_capacity: None };
        plan.check_shape()?;
        Ok(plan)
    }

    pub fn is_active(&self, period: usize) -> bool {
        self.active_periods.contains(&period)
    }

    fn check_shape(&self) -> Result<(), LabError> {
        if self.targets.is_empty() {
            return Err(LabError::EmptyTargets);
        }
        for (k, t) in self.targets.iter().enumerate() {
            if self.targets[..k].contains(t) {
                return Err(LabError::DuplicateTarget(*t));
            }
        }
        if let InterventionMode::LinkBudget { k } = self.mode {
            let max = self.targets.len() * (self.targets.len() - 1) / 2;
            if k > max {
                return Err(LabError::BudgetTooLarge { k, max });
            }
        }
        Ok(())
    }

    /// Full validation against a roster of `n` nodes. Fields are public,
    /// so this runs again whenever the plan meets a graph.
    pub(super) fn validate(&self, n: usize) -> Result<(), LabError> {
        self.check_shape()?;
        check_targets(&self.targets, n)
    }
}

fn check_targets(targets: &[usize], n: usize) -> Result<(), LabError> {
    for &t in targets {
        if t >= n {
            return Err(LabError::UnknownTarget { target: t, n });
        }
    }
    Ok(())
}

/// The auxiliary node of an earlier application: the trailing node when
/// it lies outside the target set and is tied to exactly the target set.
/// Its spokes are frozen during simulation, so the signature is stable.
fn hub_present(g: &Graph, targets: &[usize]) -> bool {
    let h = g.node_count() - 1;
    targets.iter().all(|&t| t != h && g.has_edge(h, t)) && g.degree(h) == targets.len()
}

/// Applies the plan once, returning the intervened copy. Interventions
/// only add ties, so no degree ever decreases, and a second application
/// of the same plan returns the graph unchanged.
pub fn apply_intervention(g: &Graph, plan: &InterventionPlan) -> Result<Graph, LabError> {
    plan.validate(g.node_count())?;
    match plan.mode {
        InterventionMode::NaoClique => {
            let mut out = g.clone();
            for (a, &i) in plan.targets.iter().enumerate() {
                for &j in &plan.targets[a + 1..] {
                    out.add_edge(i, j)?;
                }
            }
            Ok(out)
        }
        InterventionMode::LinkBudget { k } => {
            let mut pairs = Vec::new();
            for (a, &i) in plan.targets.iter().enumerate() {
                for &j in &plan.targets[a + 1..] {
                    pairs.push((i.min(j), i.max(j)));
                }
            }
            pairs.sort_unstable();
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
            let mut chosen = HashSet::with_capacity(k);
            for j in (pairs.len() - k)..pairs.len() {
                let t = rng.gen_range(0..=j);
                if !chosen.insert(t) {
                    chosen.insert(j);
                }
            }
            let mut out = g.clone();
            for &idx in &chosen {
                let (i, j) = pairs[idx];
                out.add_edge(i, j)?;
            }
            Ok(out)
        }
        InterventionMode::NaoHub => {
            if hub_present(g, &plan.targets) {
                return Ok(g.clone());
            }
            if let Some(cap) = plan.roster_capacity {
                if g.node_count() >= cap {
                    return Err(LabError::RosterAtCapacity(cap));
                }
            }
            let n = g.node_count();
            let mut out = Graph::new(n + 1);
            for i in 0..n {
                for j in (i + 1)..n {
                    if g.is_forbidden(i, j) {
                        out.forbid_pair(i, j)?;
                    }
                }
            }
            for (i, j) in g.edges() {
                out.add_edge(i, j)?;
            }
            for &t in &plan.targets {
                out.add_edge(n, t)?;
            }
            Ok(out)
        }
    }
}

/// Share of all degree held by the target set.
pub fn metric_target_share(g: &Graph, targets: &[usize]) -> Result<f64, LabError> {
    if targets.is_empty() {
        return Err(LabError::EmptyTargets);
    }
    check_targets(targets, g.node_count())?;
    if g.edge_count() == 0 {
        return Err(LabError::EmptyGraph);
    }
    let held: usize = targets.iter().map(|&t| g.degree(t)).sum();
    Ok(held as f64 / (2.0 * g.edge_count() as f64))
}

/// Mean degree over the target set.
pub fn metric_mean_target_degree(g: &Graph, targets: &[usize]) -> Result<f64, LabError> {
    if targets.is_empty() {
        return Err(LabError::EmptyTargets);
    }
    check_targets(targets, g.node_count())?;
    let held: usize = targets.iter().map(|&t| g.degree(t)).sum();
    Ok(held as f64 / targets.len() as f64)
}

/// Gini coefficient of the degree sequence: 0 when every node has the
/// same degree (an edgeless graph included), approaching 1 as degree
/// concentrates on few nodes.
#[must_use]
pub fn metric_degree_gini(g: &Graph) -> f64 {
    let n = g.node_count();
    let mut degs: Vec<u64> = (0..n).map(|i| g.degree(i) as u64).collect();
    degs.sort_unstable();
    let total: u64 = degs.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let weighted: i64 = degs
        .iter()
        .enumerate()
        .map(|(i, &d)| (2 * i as i64 - n as i64 + 1) * d as i64)
        .sum();
    weighted as f64 / (n as f64 * total as f64)
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

    fn clique_plan(targets: Vec<usize>) -> InterventionPlan {
        InterventionPlan::new(targets, InterventionMode::NaoClique, vec![0]).unwrap()
    }

    #[test]
    fn clique_on_empty_graph_adds_the_target_pairs() {
        let plan = clique_plan(vec![0, 2, 4]);
        let out = apply_intervention(&Graph::new(5), &plan).unwrap();
        assert_eq!(out.edge_count(), 3);
        assert!(out.has_edge(0, 2) && out.has_edge(0, 4) && out.has_edge(2, 4));
        let again = apply_intervention(&out, &plan).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn hub_appends_one_node_with_spokes() {
        let plan =
            InterventionPlan::new(vec![0, 1, 2, 3, 4], InterventionMode::NaoHub, vec![0]).unwrap();
        let g = Graph::new(6);
        let out = apply_intervention(&g, &plan).unwrap();
        assert_eq!(out.node_count(), 7);
        assert_eq!(out.edge_count(), 5);
        assert_eq!(out.degree(6), 5);
        let again = apply_intervention(&out, &plan).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn hub_respects_capacity_and_roster() {
        let mut plan =
            InterventionPlan::new(vec![0, 1], InterventionMode::NaoHub, vec![0]).unwrap();
        plan.roster_capacity = Some(4);
        let out = apply_intervention(&Graph::new(3), &plan).unwrap();
        assert_eq!(out.node_count(), 4);
        plan.roster_capacity = Some(3);
        assert!(matches!(
            apply_intervention(&Graph::new(3), &plan),
            Err(LabError::RosterAtCapacity(3))
        ));
        assert!(matches!(
            apply_intervention(&Graph::new(2), &clique_plan(vec![0, 5])),
            Err(LabError::UnknownTarget { target: 5, n: 2 })
        ));
    }

    #[test]
    fn budget_draw_is_plan_determined() {
        let mut plan = InterventionPlan::new(
            vec![0, 1, 2, 3],
            InterventionMode::LinkBudget { k: 3 },
            vec![0],
        )
        .unwrap();
        plan.seed = 11;
        let once = apply_intervention(&Graph::new(4), &plan).unwrap();
        assert_eq!(once.edge_count(), 3);
        let twice = apply_intervention(&once, &plan).unwrap();
        assert_eq!(twice, once);
        assert!(matches!(
            InterventionPlan::new(vec![0, 1, 2], InterventionMode::LinkBudget { k: 4 }, vec![]),
            Err(LabError::BudgetTooLarge { k: 4, max: 3 })
        ));
    }

    #[test]
    fn plan_shape_errors() {
        assert!(matches!(
            InterventionPlan::new(vec![], InterventionMode::NaoClique, vec![]),
            Err(LabError::EmptyTargets)
        ));
        assert!(matches!(
            InterventionPlan::new(vec![1, 1], InterventionMode::NaoClique, vec![]),
            Err(LabError::DuplicateTarget(1))
        ));
    }

    #[test]
    fn target_share_fixtures() {
        let g = k3();
        assert!((metric_target_share(&g, &[0]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(metric_target_share(&g, &[0, 1, 2]).unwrap(), 1.0);
        assert!(matches!(metric_target_share(&Graph::new(3), &[0]), Err(LabError::EmptyGraph)));
        assert!(matches!(metric_target_share(&g, &[]), Err(LabError::EmptyTargets)));
        assert_eq!(metric_mean_target_degree(&g, &[0, 1]).unwrap(), 2.0);
    }

    #[test]
    fn gini_fixtures() {
        let mut star = Graph::new(4);
        for leaf in 1..4 {
            star.add_edge(0, leaf).unwrap();
        }
        assert!((metric_degree_gini(&star) - 0.25).abs() < 1e-12);
        assert_eq!(metric_degree_gini(&k3()), 0.0);
        assert_eq!(metric_degree_gini(&Graph::new(5)), 0.0);
    }

    fn arb_plan(n: usize) -> impl Strategy<Value = InterventionPlan> {
        let targets = proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=n.min(6));
        (targets, 0..3usize, any::<u64>()).prop_map(|(targets, mode, seed)| {
            let mode = match mode {
                0 => InterventionMode::NaoClique,
                1 => InterventionMode::NaoHub,
                _ => InterventionMode::LinkBudget { k: targets.len() * (targets.len() - 1) / 2 / 2 },
            };
            let mut plan = InterventionPlan::new(targets, mode, vec![0]).unwrap();
            plan.seed = seed;
            plan
        })
    }

    proptest! {
        #[test]
        fn interventions_are_monotone_and_idempotent(
            edges in proptest::collection::vec((0usize..8, 0usize..8), 0..12),
            plan in arb_plan(8),
        ) {
            let mut g = Graph::new(8);
            for (a, b) in edges {
                if a != b {
                    g.add_edge(a, b).unwrap();
                }
            }
            let once = apply_intervention(&g, &plan).unwrap();
            for i in 0..8 {
                prop_assert!(once.degree(i) >= g.degree(i));
            }
            let twice = apply_intervention(&once, &plan).unwrap();
            prop_assert_eq!(twice, once);
        }

        #[test]
        fn gini_is_label_invariant(
            edges in proptest::collection::vec((0usize..7, 0usize..7), 0..10),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut g = Graph::new(7);
            for (a, b) in edges {
                if a != b {
                    g.add_edge(a, b).unwrap();
                }
            }
            let mut perm: Vec<usize> = (0..7).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let h = g.permuted(&perm);
            prop_assert!((metric_degree_gini(&g) - metric_degree_gini(&h)).abs() < 1e-12);
            let gini = metric_degree_gini(&g);
            prop_assert!((0.0..=1.0).contains(&gini));
        }
    }
}
