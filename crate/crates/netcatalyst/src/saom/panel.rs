//! Observed panels: a fixed roster, one graph and one attribute set per
//! wave, and entry/exit composition turning absent actors into structural
//! zeros.

use super::SaomError;
use crate::attrs::NodeAttributes;
use crate::graph::Graph;

/// A longitudinal observation of one network.
///
/// Wave indices are zero-based in the API; error messages number waves
/// from 1 to match the file format. A node is present in wave w iff
/// `entry[i] <= w <= exit[i]`; the constructor rejects panels where an
/// absent node has a tie. Structural zeros for absent actors are derived
/// per period from the activity mask (see `period_start`), so a joiner may
/// form its first ties during the period it arrives in; forbidden pairs
/// already marked on the input waves are kept as exogenous constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    ids: Vec<String>,
    waves: Vec<Graph>,
    attrs: Vec<NodeAttributes>,
    entry: Vec<usize>,
    exit: Vec<usize>,
}

impl Panel {
    pub fn new(
        ids: Vec<String>,
        waves: Vec<Graph>,
        attrs: Vec<NodeAttributes>,
        entry: Vec<usize>,
        exit: Vec<usize>,
    ) -> Result<Panel, SaomError> {
        let n = ids.len();
        if waves.len() < 2 {
            return Err(SaomError::TooFewWaves(waves.len()));
        }
        for (k, id) in ids.iter().enumerate() {
            if ids[..k].contains(id) {
                return Err(SaomError::DuplicateId(id.clone()));
            }
        }
        for (w, g) in waves.iter().enumerate() {
            if g.node_count() != n {
                return Err(SaomError::RosterMismatch {
                    wave: w + 1,
                    expected: n,
                    got: g.node_count(),
                });
            }
        }
        if attrs.len() != waves.len() {
            return Err(SaomError::AttrWaves { waves: waves.len(), attrs: attrs.len() });
        }
        for (w, a) in attrs.iter().enumerate() {
            if a.node_count() != n {
                return Err(SaomError::RosterMismatch {
                    wave: w + 1,
                    expected: n,
                    got: a.node_count(),
                });
            }
        }
        if entry.len() != n || exit.len() != n {
            return Err(SaomError::RosterMismatch {
                wave: 0,
                expected: n,
                got: entry.len().min(exit.len()),
            });
        }
        for i in 0..n {
            if entry[i] > exit[i] || exit[i] >= waves.len() {
                return Err(SaomError::BadComposition {
                    node: ids[i].clone(),
                    entry: entry[i] + 1,
                    exit: exit[i] + 1,
                });
            }
        }
        for (w, g) in waves.iter().enumerate() {
            for i in 0..n {
                if w >= entry[i] && w <= exit[i] {
                    continue;
                }
                if g.degree(i) > 0 {
                    return Err(SaomError::AbsentTie { node: ids[i].clone(), wave: w + 1 });
                }
            }
        }
        Ok(Panel { ids, waves, attrs, entry, exit })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn wave_count(&self) -> usize {
        self.waves.len()
    }

    /// Number of transitions between consecutive waves.
    pub fn period_count(&self) -> usize {
        self.waves.len() - 1
    }

    pub fn wave(&self, w: usize) -> &Graph {
        &self.waves[w]
    }

    pub fn attrs(&self, w: usize) -> &NodeAttributes {
        &self.attrs[w]
    }

    pub fn entry_wave(&self, i: usize) -> usize {
        self.entry[i]
    }

    pub fn exit_wave(&self, i: usize) -> usize {
        self.exit[i]
    }

    pub fn present(&self, i: usize, wave: usize) -> bool {
        wave >= self.entry[i] && wave <= self.exit[i]
    }

    /// Actors who may move during period m (from wave m to wave m+1):
    /// those present at the period's end wave. Joiners take part in the
    /// period that ends at their entry wave, starting from an empty row;
    /// leavers are frozen out of the period that would end without them.
    pub fn active_in_period(&self, m: usize) -> Vec<bool> {
        (0..self.n()).map(|i| self.present(i, m + 1)).collect()
    }

    /// Start state for simulating period m: wave m restricted to the
    /// actors active in the period.
    pub fn period_start(&self, m: usize) -> Graph {
        restrict_to_active(&self.waves[m], &self.active_in_period(m))
    }

    /// Presence mask for one wave.
    pub fn present_in_wave(&self, w: usize) -> Vec<bool> {
        (0..self.n()).map(|i| self.present(i, w)).collect()
    }
}

/// Keeps only ties among active nodes and forbids every pair with an
/// inactive endpoint; existing forbidden pairs are preserved.
pub fn restrict_to_active(g: &Graph, active: &[bool]) -> Graph {
    assert_eq!(active.len(), g.node_count(), "active mask length");
    let n = g.node_count();
    let mut out = Graph::new(n);
    for (i, j) in g.edges() {
        if active[i] && active[j] {
            out.add_edge(i, j).unwrap();
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !active[i] || !active[j] || g.is_forbidden(i, j) {
                out.forbid_pair(i, j).unwrap();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("f{i}")).collect()
    }

    fn blank_attrs(n: usize, waves: usize) -> Vec<NodeAttributes> {
        vec![NodeAttributes::new(n); waves]
    }

    #[test]
    fn a_panel_with_stable_roster_validates() {
        let mut w2 = Graph::new(3);
        w2.add_edge(0, 1).unwrap();
        let p = Panel::new(
            names(3),
            vec![Graph::new(3), w2],
            blank_attrs(3, 2),
            vec![0; 3],
            vec![1; 3],
        )
        .unwrap();
        assert_eq!(p.n(), 3);
        assert_eq!(p.period_count(), 1);
        assert!(p.active_in_period(0).iter().all(|&a| a));
    }

    #[test]
    fn construction_errors_are_specific() {
        assert!(matches!(
            Panel::new(names(2), vec![Graph::new(2)], blank_attrs(2, 1), vec![0; 2], vec![0; 2]),
            Err(SaomError::TooFewWaves(1))
        ));
        assert!(matches!(
            Panel::new(
                vec!["a".into(), "a".into()],
                vec![Graph::new(2), Graph::new(2)],
                blank_attrs(2, 2),
                vec![0; 2],
                vec![1; 2],
            ),
            Err(SaomError::DuplicateId(_))
        ));
        assert!(matches!(
            Panel::new(
                names(2),
                vec![Graph::new(2), Graph::new(3)],
                blank_attrs(2, 2),
                vec![0; 2],
                vec![1; 2],
            ),
            Err(SaomError::RosterMismatch { wave: 2, expected: 2, got: 3 })
        ));
        assert!(matches!(
            Panel::new(
                names(2),
                vec![Graph::new(2), Graph::new(2)],
                blank_attrs(2, 1),
                vec![0; 2],
                vec![1; 2],
            ),
            Err(SaomError::AttrWaves { waves: 2, attrs: 1 })
        ));
        assert!(matches!(
            Panel::new(
                names(2),
                vec![Graph::new(2), Graph::new(2)],
                blank_attrs(2, 2),
                vec![1, 0],
                vec![0, 1],
            ),
            Err(SaomError::BadComposition { .. })
        ));
    }

    #[test]
    fn a_tie_on_an_absent_node_is_rejected() {
        let mut w1 = Graph::new(3);
        w1.add_edge(0, 2).unwrap();
        let err = Panel::new(
            names(3),
            vec![w1, Graph::new(3)],
            blank_attrs(3, 2),
            vec![0, 0, 1],
            vec![1, 1, 1],
        )
        .unwrap_err();
        assert!(matches!(err, SaomError::AbsentTie { wave: 1, .. }));
    }

    #[test]
    fn absent_rows_become_structural_zeros() {
        let mut w1 = Graph::new(3);
        w1.add_edge(0, 1).unwrap();
        let p = Panel::new(
            names(3),
            vec![Graph::new(3), w1, Graph::new(3)],
            blank_attrs(3, 3),
            vec![0, 0, 1],
            vec![2, 1, 2],
        )
        .unwrap();
        // Stored waves stay as given; zeros are derived per period.
        assert!(!p.wave(0).is_forbidden(0, 2));
        // The joiner (node 3) may form ties in its arrival period.
        let s0 = p.period_start(0);
        assert!(!s0.is_forbidden(0, 2) && !s0.is_forbidden(1, 2));
        // The leaver (node 2) is frozen out of period 2 and its ties drop.
        let s1 = p.period_start(1);
        assert!(s1.is_forbidden(0, 1) && s1.is_forbidden(1, 2));
        assert!(!s1.is_forbidden(0, 2));
        assert!(!s1.has_edge(0, 1));
    }

    #[test]
    fn period_activity_covers_joiners_and_freezes_leavers() {
        let p = Panel::new(
            names(3),
            vec![Graph::new(3), Graph::new(3), Graph::new(3)],
            blank_attrs(3, 3),
            vec![0, 0, 1],
            vec![2, 1, 2],
        )
        .unwrap();
        // Period 1 ends at wave 2: the joiner (node 3) is already active.
        assert_eq!(p.active_in_period(0), vec![true, true, true]);
        // Period 2 ends at wave 3: node 2 has left.
        assert_eq!(p.active_in_period(1), vec![true, false, true]);
    }

    #[test]
    fn period_start_drops_the_leavers_ties() {
        let mut w1 = Graph::new(3);
        w1.add_edge(0, 1).unwrap();
        w1.add_edge(1, 2).unwrap();
        let p = Panel::new(
            names(3),
            vec![w1, Graph::new(3)],
            blank_attrs(3, 2),
            vec![0, 0, 0],
            vec![1, 0, 1],
        )
        .unwrap();
        let start = p.period_start(0);
        assert_eq!(start.edge_count(), 0);
        assert!(start.is_forbidden(0, 1));
        assert!(start.is_forbidden(1, 2));
        assert!(!start.is_forbidden(0, 2));
    }

    #[test]
    fn restriction_keeps_prior_forbidden_pairs() {
        let mut g = Graph::new(4);
        g.add_edge(0, 1).unwrap();
        g.add_edge(2, 3).unwrap();
        g.forbid_pair(0, 2).unwrap();
        let r = restrict_to_active(&g, &[true, true, true, false]);
        assert!(r.has_edge(0, 1));
        assert!(!r.has_edge(2, 3));
        assert!(r.is_forbidden(0, 2));
        assert!(r.is_forbidden(1, 3));
        assert_eq!(r.edge_count(), 1);
    }
}
