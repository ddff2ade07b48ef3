//! Undirected simple graphs over a fixed node roster.
//!
//! Adjacency is stored as one dense bitset row per node. For the roster
//! sizes this crate targets (up to roughly a thousand organizations) that
//! keeps neighbour intersection, and with it shared-partner counting, at a
//! handful of word operations. Structural zeros ("forbidden" pairs, used
//! for composition change and other hard constraints) live in a parallel
//! bitset and are enforced by every mutator: a forbidden pair never holds
//! an edge.
//!
//! Graphs are plain values. Mutating methods take `&mut self`, so callers
//! that hand a graph to a simulation keep their own copy untouched; there
//! is no interior mutability anywhere.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("node {node} out of range for roster of {n}")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("self loop at node {0}")]
    SelfLoop(usize),
    #[error("pair ({0}, {1}) is forbidden")]
    ForbiddenPair(usize, usize),
    #[error("cannot forbid pair ({0}, {1}) while it holds an edge")]
    ForbidWithEdge(usize, usize),
    #[error("max_k {max_k} out of range for roster of {n}")]
    BadMaxK { max_k: usize, n: usize },
}

/// Simple undirected graph with structural zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    words: usize,
    adj: Vec<u64>,
    forbidden: Vec<u64>,
    degree: Vec<u32>,
    edge_count: usize,
    forbidden_pairs: usize,
}

impl Graph {
    /// Empty graph on `n` nodes with no forbidden pairs.
    #[must_use]
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        Graph {
            n,
            words,
            adj: vec![0; n * words],
            forbidden: vec![0; n * words],
            degree: vec![0; n],
            edge_count: 0,
            forbidden_pairs: 0,
        }
    }

    #[must_use]
    pub fn node_count(&self) -> usize {
        self.n
    }

    #[must_use]
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Number of unordered forbidden pairs.
    #[must_use]
    pub fn forbidden_count(&self) -> usize {
        self.forbidden_pairs
    }

    /// Unordered pairs that may hold an edge.
    #[must_use]
    pub fn free_pair_count(&self) -> usize {
        self.n * (self.n - 1) / 2 - self.forbidden_pairs
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<(), GraphError> {
        if i >= self.n {
            return Err(GraphError::NodeOutOfRange { node: i, n: self.n });
        }
        if j >= self.n {
            return Err(GraphError::NodeOutOfRange { node: j, n: self.n });
        }
        if i == j {
            return Err(GraphError::SelfLoop(i));
        }
        Ok(())
    }

    #[inline]
    fn bit(&self, row: usize, col: usize) -> bool {
        self.adj[row * self.words + col / 64] >> (col % 64) & 1 == 1
    }

    #[inline]
    fn flip_bit(&mut self, row: usize, col: usize) {
        self.adj[row * self.words + col / 64] ^= 1 << (col % 64);
    }

    /// True when the edge (i, j) is present. Panics on an invalid pair.
    #[inline]
    #[must_use]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        assert!(i < self.n && j < self.n && i != j, "invalid pair ({i}, {j})");
        self.bit(i, j)
    }

    #[inline]
    #[must_use]
    pub fn is_forbidden(&self, i: usize, j: usize) -> bool {
        self.forbidden[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    #[must_use]
    pub fn degree(&self, i: usize) -> usize {
        self.degree[i] as usize
    }

    /// Marks (i, j) as a structural zero. The pair must not hold an edge.
    pub fn forbid_pair(&mut self, i: usize, j: usize) -> Result<(), GraphError> {
        self.check_pair(i, j)?;
        if self.bit(i, j) {
            return Err(GraphError::ForbidWithEdge(i, j));
        }
        if !self.is_forbidden(i, j) {
            self.forbidden[i * self.words + j / 64] |= 1 << (j % 64);
            self.forbidden[j * self.words + i / 64] |= 1 << (i % 64);
            self.forbidden_pairs += 1;
        }
        Ok(())
    }

    /// Flips edge (i, j) in place. Errors on self loops, out-of-range nodes
    /// and forbidden pairs; the graph is untouched on error.
    pub fn toggle_edge_in_place(&mut self, i: usize, j: usize) -> Result<(), GraphError> {
        self.check_pair(i, j)?;
        if self.is_forbidden(i, j) {
            return Err(GraphError::ForbiddenPair(i, j));
        }
        let was = self.bit(i, j);
        self.flip_bit(i, j);
        self.flip_bit(j, i);
        if was {
            self.degree[i] -= 1;
            self.degree[j] -= 1;
            self.edge_count -= 1;
        } else {
            self.degree[i] += 1;
            self.degree[j] += 1;
            self.edge_count += 1;
        }
        Ok(())
    }

    /// Returns a copy of the graph with edge (i, j) flipped.
    pub fn toggle_edge(&self, i: usize, j: usize) -> Result<Graph, GraphError> {
        let mut g = self.clone();
        g.toggle_edge_in_place(i, j)?;
        Ok(g)
    }

    /// Inserts edge (i, j); Ok(false) when it was already present.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<bool, GraphError> {
        self.check_pair(i, j)?;
        if self.is_forbidden(i, j) {
            return Err(GraphError::ForbiddenPair(i, j));
        }
        if self.bit(i, j) {
            return Ok(false);
        }
        self.toggle_edge_in_place(i, j)?;
        Ok(true)
    }

    /// Removes edge (i, j) if present; Ok(false) when it was absent.
    pub fn remove_edge(&mut self, i: usize, j: usize) -> Result<bool, GraphError> {
        self.check_pair(i, j)?;
        if !self.bit(i, j) {
            return Ok(false);
        }
        let was_forbidden = self.is_forbidden(i, j);
        debug_assert!(!was_forbidden, "edge on forbidden pair");
        self.toggle_edge_in_place(i, j)?;
        Ok(true)
    }

    /// Validates that (i, j) is a pair an edge may sit on.
    pub fn check_free_pair(&self, i: usize, j: usize) -> Result<(), GraphError> {
        self.check_pair(i, j)?;
        if self.is_forbidden(i, j) {
            return Err(GraphError::ForbiddenPair(i, j));
        }
        Ok(())
    }

    /// Number of common neighbours of i and j (the pair itself never counts).
    #[must_use]
    pub fn common_neighbors(&self, i: usize, j: usize) -> usize {
        let a = &self.adj[i * self.words..(i + 1) * self.words];
        let b = &self.adj[j * self.words..(j + 1) * self.words];
        a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as usize).sum()
    }

    /// Common neighbours of i and j, ascending.
    pub fn common_neighbors_iter(&self, i: usize, j: usize) -> impl Iterator<Item = usize> + '_ {
        let a = &self.adj[i * self.words..(i + 1) * self.words];
        let b = &self.adj[j * self.words..(j + 1) * self.words];
        a.iter().zip(b).enumerate().flat_map(|(w, (&x, &y))| {
            let mut bits = x & y;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let t = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(w * 64 + t)
                }
            })
        })
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.adj[i * self.words..(i + 1) * self.words];
        row.iter().enumerate().flat_map(|(w, &bits)| {
            let mut bits = bits;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(w * 64 + b)
                }
            })
        })
    }

    /// Edges as ordered pairs (i < j), ascending.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.neighbors(i).filter(move |&j| j > i).map(move |j| (i, j)))
    }

    /// Degree histogram; index k counts nodes of degree k, length n (k up to n-1).
    #[must_use]
    pub fn degree_histogram(&self) -> Vec<u64> {
        let mut hist = vec![0u64; self.n.max(1)];
        for &d in &self.degree {
            hist[d as usize] += 1;
        }
        hist
    }

    /// Number of triangles.
    #[must_use]
    pub fn triangles(&self) -> u64 {
        let total: usize = self.edges().map(|(i, j)| self.common_neighbors(i, j)).sum();
        (total / 3) as u64
    }

    /// Hamming distance between two graphs on the same roster: the number of
    /// unordered pairs whose edge state differs.
    #[must_use]
    pub fn hamming(&self, other: &Graph) -> usize {
        assert_eq!(self.n, other.n, "rosters differ");
        let diff: u32 = self
            .adj
            .iter()
            .zip(&other.adj)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum();
        diff as usize / 2
    }

    /// Relabels nodes: node i of the result is node perm[i] of the original.
    #[must_use]
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        assert_eq!(perm.len(), self.n);
        let mut g = Graph::new(self.n);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.is_forbidden(perm[i], perm[j]) {
                    g.forbid_pair(i, j).expect("permuted forbid");
                }
            }
        }
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.bit(perm[i], perm[j]) {
                    g.add_edge(i, j).expect("permuted edge");
                }
            }
        }
        g
    }
}

/// Number of edges.
#[must_use]
pub fn stat_edges(g: &Graph) -> f64 {
    g.edge_count() as f64
}

/// Geometrically weighted degree with decay `theta >= 0`:
/// `e^theta * sum_{k>=1} (1 - (1 - e^-theta)^k) * D_k`,
/// where `D_k` is the number of nodes of degree k. Isolates contribute
/// nothing. As theta -> 0 this tends to the number of non-isolated nodes.
#[must_use]
pub fn stat_gwdegree(g: &Graph, theta: f64) -> f64 {
    assert!(theta >= 0.0, "decay must be nonnegative");
    let r = 1.0 - (-theta).exp();
    let scale = theta.exp();
    let hist = g.degree_histogram();
    let mut total = 0.0;
    let mut rk = 1.0;
    for &count in hist.iter().skip(1) {
        rk *= r;
        if count > 0 {
            total += (1.0 - rk) * count as f64;
        }
    }
    scale * total
}

/// Geometrically weighted edgewise shared partners with decay `theta >= 0`:
/// `e^theta * sum_{k>=1} (1 - (1 - e^-theta)^k) * EP_k`,
/// where `EP_k` counts edges with exactly k shared partners. As theta -> 0
/// this tends to the number of edges with at least one shared partner.
#[must_use]
pub fn stat_gwesp(g: &Graph, theta: f64) -> f64 {
    assert!(theta >= 0.0, "decay must be nonnegative");
    let r = 1.0 - (-theta).exp();
    let scale = theta.exp();
    let total: f64 = g
        .edges()
        .map(|(i, j)| {
            let c = g.common_neighbors(i, j) as i32;
            if c == 0 {
                0.0
            } else {
                1.0 - r.powi(c)
            }
        })
        .sum();
    scale * total
}

/// Auxiliary distributions used for goodness of fit: degree distribution,
/// edgewise shared partners, and the undirected triad census collapsed to
/// four classes (empty, one edge, two-path, triangle).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxStats {
    /// degree_dist[k] = number of nodes of degree k; tail pooled into the last bin.
    pub degree_dist: Vec<u64>,
    /// esp_dist[k] = number of edges with k shared partners; tail pooled likewise.
    pub esp_dist: Vec<u64>,
    /// [empty, one-edge, two-path, triangle].
    pub triad_census: [u64; 4],
    pub max_k: usize,
}

/// Computes the auxiliary statistics with bins 0..=max_k (tail mass pooled
/// into the last bin). Requires `1 <= max_k <= n - 1`; with max_k = n - 1
/// nothing is truncated.
pub fn aux_statistics(g: &Graph, max_k: usize) -> Result<AuxStats, GraphError> {
    let n = g.node_count();
    if max_k == 0 || max_k >= n {
        return Err(GraphError::BadMaxK { max_k, n });
    }
    let mut degree_dist = vec![0u64; max_k + 1];
    for i in 0..n {
        degree_dist[g.degree(i).min(max_k)] += 1;
    }
    let mut esp_dist = vec![0u64; max_k + 1];
    let mut shared_total = 0u64;
    for (i, j) in g.edges() {
        let c = g.common_neighbors(i, j);
        shared_total += c as u64;
        esp_dist[c.min(max_k)] += 1;
    }
    let triangles = shared_total / 3;
    let m = g.edge_count() as u64;
    let two_paths: u64 = (0..n)
        .map(|i| {
            let d = g.degree(i) as u64;
            d * d.saturating_sub(1) / 2
        })
        .sum();
    // Each triangle holds three two-paths; each two-path triple has two
    // (edge, outside-node) incidences, each triangle three.
    let exactly_two = two_paths - 3 * triangles;
    let one_edge = m * (n as u64 - 2) - 2 * exactly_two - 3 * triangles;
    let triples = (n as u64) * (n as u64 - 1) * (n as u64 - 2) / 6;
    let empty = triples - one_edge - exactly_two - triangles;
    Ok(AuxStats {
        degree_dist,
        esp_dist,
        triad_census: [empty, one_edge, exactly_two, triangles],
        max_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph_from_edges(n: usize, edges: &[(usize, usize)]) -> Graph {
        let mut g = Graph::new(n);
        for &(i, j) in edges {
            g.add_edge(i, j).unwrap();
        }
        g
    }

    /// Star with one hub (node 0) and three leaves.
    fn star_s4() -> Graph {
        graph_from_edges(4, &[(0, 1), (0, 2), (0, 3)])
    }

    fn k3() -> Graph {
        graph_from_edges(3, &[(0, 1), (0, 2), (1, 2)])
    }

    /// K4 minus the (0, 1) edge.
    fn diamond() -> Graph {
        graph_from_edges(4, &[(0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    }

    #[test]
    fn toggle_is_involution() {
        let g = star_s4();
        let h = g.toggle_edge(1, 2).unwrap();
        assert!(h.has_edge(1, 2));
        let back = h.toggle_edge(1, 2).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn toggle_errors_are_distinct() {
        let mut g = Graph::new(4);
        g.forbid_pair(2, 3).unwrap();
        assert_eq!(g.toggle_edge(1, 1).unwrap_err(), GraphError::SelfLoop(1));
        assert_eq!(
            g.toggle_edge(0, 7).unwrap_err(),
            GraphError::NodeOutOfRange { node: 7, n: 4 }
        );
        assert_eq!(g.toggle_edge(2, 3).unwrap_err(), GraphError::ForbiddenPair(2, 3));
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn forbid_with_edge_rejected() {
        let mut g = graph_from_edges(3, &[(0, 1)]);
        assert_eq!(g.forbid_pair(0, 1).unwrap_err(), GraphError::ForbidWithEdge(0, 1));
    }

    #[test]
    fn gwdegree_matches_hand_values() {
        assert!((stat_gwdegree(&star_s4(), 0.5) - 4.5483).abs() < 1e-3);
        assert!((stat_gwdegree(&k3(), 0.5) - 4.1805).abs() < 1e-3);
        assert_eq!(stat_gwdegree(&Graph::new(5), 0.5), 0.0);
    }

    #[test]
    fn gwesp_matches_hand_values() {
        for theta in [0.1, 0.5, 1.3] {
            assert!((stat_gwesp(&k3(), theta) - 3.0).abs() < 1e-12);
        }
        assert!((stat_gwesp(&diamond(), 0.5) - 5.3935).abs() < 1e-3);
    }

    #[test]
    fn small_decay_limits_count_support() {
        // gwdegree -> #nodes with degree >= 1, gwesp -> #edges with a shared partner.
        let g = diamond();
        assert!((stat_gwdegree(&g, 1e-9) - 4.0).abs() < 1e-6);
        assert!((stat_gwesp(&g, 1e-9) - 5.0).abs() < 1e-6);
        let s = star_s4();
        assert!((stat_gwdegree(&s, 1e-9) - 4.0).abs() < 1e-6);
        assert!((stat_gwesp(&s, 1e-9) - 0.0).abs() < 1e-6);
    }

    #[test]
    fn aux_fixtures() {
        let empty = aux_statistics(&Graph::new(3), 2).unwrap();
        assert_eq!(empty.degree_dist, vec![3, 0, 0]);
        assert_eq!(empty.triad_census, [1, 0, 0, 0]);

        let tri = aux_statistics(&k3(), 2).unwrap();
        assert_eq!(tri.degree_dist, vec![0, 0, 3]);
        assert_eq!(tri.esp_dist, vec![0, 3, 0]);
        assert_eq!(tri.triad_census, [0, 0, 0, 1]);

        let path = aux_statistics(&graph_from_edges(3, &[(0, 1), (1, 2)]), 2).unwrap();
        assert_eq!(path.degree_dist, vec![0, 2, 1]);
        assert_eq!(path.esp_dist, vec![2, 0, 0]);
        assert_eq!(path.triad_census, [0, 0, 1, 0]);

        let dia = aux_statistics(&diamond(), 3).unwrap();
        assert_eq!(dia.triad_census[3], 2);
        assert_eq!(dia.triad_census[2], 2);
        assert_eq!(dia.esp_dist, vec![0, 4, 1, 0]);
    }

    #[test]
    fn aux_rejects_bad_max_k() {
        assert!(aux_statistics(&Graph::new(3), 0).is_err());
        assert!(aux_statistics(&Graph::new(3), 3).is_err());
    }

    #[test]
    fn hamming_counts_differing_pairs() {
        let a = graph_from_edges(4, &[(0, 1), (1, 2)]);
        let b = graph_from_edges(4, &[(0, 1), (2, 3), (0, 3)]);
        assert_eq!(a.hamming(&b), 3);
        assert_eq!(a.hamming(&a), 0);
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
        (2..=max_n).prop_flat_map(|n| {
            let pairs = n * (n - 1) / 2;
            proptest::collection::vec(any::<bool>(), pairs).prop_map(move |bits| {
                let mut g = Graph::new(n);
                let mut idx = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        if bits[idx] {
                            g.add_edge(i, j).unwrap();
                        }
                        idx += 1;
                    }
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn toggle_touches_only_that_pair(g in arb_graph(8), i in 0usize..8, j in 0usize..8) {
            let n = g.node_count();
            prop_assume!(i < n && j < n && i != j);
            let h = g.toggle_edge(i, j).unwrap();
            prop_assert_eq!(h.has_edge(i, j), !g.has_edge(i, j));
            for a in 0..n {
                for b in (a + 1)..n {
                    if (a, b) != (i.min(j), i.max(j)) {
                        prop_assert_eq!(h.has_edge(a, b), g.has_edge(a, b));
                    }
                }
            }
            prop_assert_eq!(h.toggle_edge(i, j).unwrap(), g);
        }

        #[test]
        fn aux_identities_hold_untruncated(g in arb_graph(9)) {
            let n = g.node_count() as u64;
            let m = g.edge_count() as u64;
            let aux = aux_statistics(&g, g.node_count() - 1).unwrap();
            prop_assert_eq!(aux.degree_dist.iter().sum::<u64>(), n);
            let deg_mass: u64 = aux.degree_dist.iter().enumerate().map(|(k, &c)| k as u64 * c).sum();
            prop_assert_eq!(deg_mass, 2 * m);
            prop_assert_eq!(aux.esp_dist.iter().sum::<u64>(), m);
            prop_assert_eq!(aux.triad_census.iter().sum::<u64>(), n * (n - 1) * (n - 2) / 6);
        }

        #[test]
        fn triad_census_matches_brute_force(g in arb_graph(8)) {
            let n = g.node_count();
            let mut census = [0u64; 4];
            for i in 0..n {
                for j in (i + 1)..n {
                    for k in (j + 1)..n {
                        let c = g.has_edge(i, j) as usize + g.has_edge(i, k) as usize + g.has_edge(j, k) as usize;
                        census[c] += 1;
                    }
                }
            }
            let aux = aux_statistics(&g, n - 1).unwrap();
            prop_assert_eq!(aux.triad_census, census);
        }

        #[test]
        fn statistics_are_relabel_invariant(g in arb_graph(8), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let n = g.node_count();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let h = g.permuted(&perm);
            prop_assert_eq!(stat_edges(&g), stat_edges(&h));
            prop_assert!((stat_gwdegree(&g, 0.5) - stat_gwdegree(&h, 0.5)).abs() < 1e-9);
            prop_assert!((stat_gwesp(&g, 0.5) - stat_gwesp(&h, 0.5)).abs() < 1e-9);
            let a = aux_statistics(&g, n - 1).unwrap();
            let b = aux_statistics(&h, n - 1).unwrap();
            prop_assert_eq!(a.degree_dist, b.degree_dist);
            prop_assert_eq!(a.esp_dist, b.esp_dist);
            prop_assert_eq!(a.triad_census, b.triad_census);
        }
    }
}
