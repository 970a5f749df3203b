//! The bipartite interaction graph and its constant-time samplers.
//!
//! A [`BipartiteGraph`] is built once from an [`InteractionTable`] and is
//! immutable afterwards, so any number of worker threads may sample from it
//! concurrently with private RNGs.
//!
//! Sampling machinery, all O(|E|) space and O(1) per draw:
//! - a global edge sampler (edges weighted by interaction weight),
//! - per-vertex neighbor samplers stored as compressed sparse alias rows
//!   (one flat probability/alias array aligned with the CSR adjacency),
//! - per-side negative samplers (degree-proportional or uniform).
//!
//! Random walks alternate sides on every step; same-side context nodes for
//! neighborhood training are therefore found at even step offsets.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;

use crate::alias::{build_alias_row, sample_alias_row, AliasTable};
use crate::error::{Error, Result};
use crate::interactions::InteractionTable;

/// Which partition a vertex belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    User,
    Item,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::User => Side::Item,
            Side::Item => Side::User,
        }
    }
}

/// Dense vertex id. Users occupy `[0, user_count)`, items
/// `[user_count, user_count + item_count)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// How negative vertices are drawn from a side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeDistribution {
    /// Proportional to each vertex's summed edge weight, mirroring the
    /// distribution positives are drawn from.
    #[default]
    Degree,
    Uniform,
}

/// Immutable bipartite graph with alias samplers.
pub struct BipartiteGraph {
    user_count: usize,
    item_count: usize,
    user_keys: Vec<String>,
    item_keys: Vec<String>,
    user_index: HashMap<String, u32>,
    item_index: HashMap<String, u32>,

    // CSR adjacency over all vertices (users then items); each stored edge
    // appears twice, once per direction.
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<f64>,
    // Alias rows aligned with `neighbors`.
    neighbor_prob: Vec<f64>,
    neighbor_alias: Vec<u32>,

    // Flat edge list (user -> item only) plus its sampler.
    edge_users: Vec<u32>,
    edge_items: Vec<u32>,
    edge_sampler: AliasTable,

    // Degree-proportional negative samplers, one per side.
    user_negatives: AliasTable,
    item_negatives: AliasTable,
}

impl BipartiteGraph {
    /// Builds the graph from an interaction table. Duplicate `(user, item)`
    /// pairs are merged by summing weights; zero-weight pairs are treated as
    /// absent edges; vertices left without any edge are excluded from the id
    /// space.
    pub fn from_interactions(table: &InteractionTable) -> Result<BipartiteGraph> {
        // Merge duplicates into summed weights keyed by table-local ids.
        let mut pairs: Vec<(u32, u32, f64)> = table
            .rows()
            .iter()
            .map(|r| (r.user, r.item, r.value))
            .collect();
        pairs.sort_unstable_by_key(|(u, i, _)| (*u, *i));
        let mut merged: Vec<(u32, u32, f64)> = Vec::with_capacity(pairs.len());
        for (u, i, v) in pairs {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::data(format!(
                    "negative or non-finite weight on edge ({}, {})",
                    table.user_key(u),
                    table.item_key(i)
                )));
            }
            match merged.last_mut() {
                Some((lu, li, lv)) if *lu == u && *li == i => *lv += v,
                _ => merged.push((u, i, v)),
            }
        }
        merged.retain(|(_, _, v)| *v > 0.0);
        if merged.is_empty() {
            return Err(Error::data("no edges with positive weight"));
        }

        // Re-index surviving vertices densely, users first, in table order.
        let mut user_map = vec![u32::MAX; table.user_count()];
        let mut item_map = vec![u32::MAX; table.item_count()];
        let mut user_keys = Vec::new();
        let mut item_keys = Vec::new();
        for &(u, i, _) in &merged {
            if user_map[u as usize] == u32::MAX {
                user_map[u as usize] = user_keys.len() as u32;
                user_keys.push(table.user_key(u).to_owned());
            }
            if item_map[i as usize] == u32::MAX {
                item_map[i as usize] = item_keys.len() as u32;
                item_keys.push(table.item_key(i).to_owned());
            }
        }
        let user_count = user_keys.len();
        let item_count = item_keys.len();
        let vertex_count = user_count + item_count;

        // CSR arrays; each edge contributes an entry in both directions.
        let mut degree = vec![0usize; vertex_count];
        for &(u, i, _) in &merged {
            degree[user_map[u as usize] as usize] += 1;
            degree[user_count + item_map[i as usize] as usize] += 1;
        }
        let mut offsets = vec![0usize; vertex_count + 1];
        for v in 0..vertex_count {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let total_entries = offsets[vertex_count];
        let mut neighbors = vec![0u32; total_entries];
        let mut weights = vec![0f64; total_entries];
        let mut cursor = offsets.clone();

        let edge_count = merged.len();
        let mut edge_users = Vec::with_capacity(edge_count);
        let mut edge_items = Vec::with_capacity(edge_count);
        let mut edge_weights = Vec::with_capacity(edge_count);
        for &(u, i, w) in &merged {
            let uv = user_map[u as usize];
            let iv = user_count as u32 + item_map[i as usize];
            neighbors[cursor[uv as usize]] = iv;
            weights[cursor[uv as usize]] = w;
            cursor[uv as usize] += 1;
            neighbors[cursor[iv as usize]] = uv;
            weights[cursor[iv as usize]] = w;
            cursor[iv as usize] += 1;
            edge_users.push(uv);
            edge_items.push(iv);
            edge_weights.push(w);
        }

        // Sort each adjacency row by neighbor id for deterministic listings
        // and binary-search exclusion at recommendation time.
        for v in 0..vertex_count {
            let (lo, hi) = (offsets[v], offsets[v + 1]);
            let mut row: Vec<(u32, f64)> = neighbors[lo..hi]
                .iter()
                .copied()
                .zip(weights[lo..hi].iter().copied())
                .collect();
            row.sort_unstable_by_key(|(n, _)| *n);
            for (k, (n, w)) in row.into_iter().enumerate() {
                neighbors[lo + k] = n;
                weights[lo + k] = w;
            }
        }

        // Per-vertex alias rows over the sorted adjacency.
        let mut neighbor_prob = vec![0f64; total_entries];
        let mut neighbor_alias = vec![0u32; total_entries];
        for v in 0..vertex_count {
            let (lo, hi) = (offsets[v], offsets[v + 1]);
            build_alias_row(
                &weights[lo..hi],
                &mut neighbor_prob[lo..hi],
                &mut neighbor_alias[lo..hi],
            );
        }

        let edge_sampler = AliasTable::new(&edge_weights);
        let user_strength: Vec<f64> = (0..user_count)
            .map(|v| weights[offsets[v]..offsets[v + 1]].iter().sum())
            .collect();
        let item_strength: Vec<f64> = (user_count..vertex_count)
            .map(|v| weights[offsets[v]..offsets[v + 1]].iter().sum())
            .collect();

        let user_index = user_keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i as u32))
            .collect();
        let item_index = item_keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i as u32))
            .collect();

        let graph = BipartiteGraph {
            user_count,
            item_count,
            user_keys,
            item_keys,
            user_index,
            item_index,
            offsets,
            neighbors,
            weights,
            neighbor_prob,
            neighbor_alias,
            edge_users,
            edge_items,
            edge_sampler,
            user_negatives: AliasTable::new(&user_strength),
            item_negatives: AliasTable::new(&item_strength),
        };
        debug_assert!(graph.check_bipartite());
        Ok(graph)
    }

    fn check_bipartite(&self) -> bool {
        (0..self.vertex_count()).all(|v| {
            let v = VertexId(v as u32);
            self.neighbors(v)
                .iter()
                .all(|n| self.side(*n) != self.side(v))
        })
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn vertex_count(&self) -> usize {
        self.user_count + self.item_count
    }

    /// Number of stored user→item edges.
    pub fn edge_count(&self) -> usize {
        self.edge_users.len()
    }

    #[inline]
    pub fn side(&self, v: VertexId) -> Side {
        if v.idx() < self.user_count {
            Side::User
        } else {
            Side::Item
        }
    }

    /// All vertex ids of one side, as a contiguous range.
    pub fn side_range(&self, side: Side) -> std::ops::Range<u32> {
        match side {
            Side::User => 0..self.user_count as u32,
            Side::Item => self.user_count as u32..self.vertex_count() as u32,
        }
    }

    /// External key of any vertex.
    pub fn key(&self, v: VertexId) -> &str {
        if v.idx() < self.user_count {
            &self.user_keys[v.idx()]
        } else {
            &self.item_keys[v.idx() - self.user_count]
        }
    }

    pub fn user_id(&self, key: &str) -> Option<VertexId> {
        self.user_index.get(key).map(|i| VertexId(*i))
    }

    pub fn item_id(&self, key: &str) -> Option<VertexId> {
        self.item_index
            .get(key)
            .map(|i| VertexId(self.user_count as u32 + *i))
    }

    /// Neighbor ids of `v`, sorted ascending.
    pub fn neighbors(&self, v: VertexId) -> &[u32] {
        &self.neighbors[self.offsets[v.idx()]..self.offsets[v.idx() + 1]]
    }

    /// Edge weights aligned with [`Self::neighbors`].
    pub fn neighbor_weights(&self, v: VertexId) -> &[f64] {
        &self.weights[self.offsets[v.idx()]..self.offsets[v.idx() + 1]]
    }

    pub fn has_edge(&self, v: VertexId, other: VertexId) -> bool {
        self.neighbors(v).binary_search(&other.0).is_ok()
    }

    /// Draws an observed `(user, item)` edge with probability proportional to
    /// its weight.
    #[inline]
    pub fn sample_edge<R: Rng + ?Sized>(&self, rng: &mut R) -> (VertexId, VertexId) {
        let e = self.edge_sampler.sample(rng);
        (VertexId(self.edge_users[e]), VertexId(self.edge_items[e]))
    }

    /// Draws one neighbor of `v`, weight-proportionally.
    #[inline]
    pub fn sample_neighbor<R: Rng + ?Sized>(&self, v: VertexId, rng: &mut R) -> VertexId {
        let (lo, hi) = (self.offsets[v.idx()], self.offsets[v.idx() + 1]);
        debug_assert!(hi > lo, "vertex {v:?} has no neighbors");
        let slot: f64 = rng.random();
        let coin: f64 = rng.random();
        let k = sample_alias_row(
            &self.neighbor_prob[lo..hi],
            &self.neighbor_alias[lo..hi],
            0,
            slot,
            coin,
        );
        VertexId(self.neighbors[lo + k])
    }

    /// Runs a `k`-step weighted random walk from `start` and returns the
    /// visited vertices (start excluded). Steps alternate sides, so entries
    /// at odd output indices (step offsets 2, 4, ...) share `start`'s side.
    pub fn random_walk<R: Rng + ?Sized>(
        &self,
        start: VertexId,
        k: usize,
        rng: &mut R,
    ) -> Vec<VertexId> {
        let mut walk = Vec::with_capacity(k);
        self.walk_into(start, k, rng, &mut walk);
        walk
    }

    /// Walk variant reusing a caller-owned buffer; clears it first.
    #[inline]
    pub fn walk_into<R: Rng + ?Sized>(
        &self,
        start: VertexId,
        k: usize,
        rng: &mut R,
        walk: &mut Vec<VertexId>,
    ) {
        walk.clear();
        let mut cur = start;
        for _ in 0..k {
            cur = self.sample_neighbor(cur, rng);
            walk.push(cur);
        }
    }

    /// Draws a negative vertex from `side`. Observed pairs are not excluded:
    /// contrast vertices come from the whole collection.
    #[inline]
    pub fn sample_negative<R: Rng + ?Sized>(
        &self,
        side: Side,
        dist: NegativeDistribution,
        rng: &mut R,
    ) -> VertexId {
        let base = match side {
            Side::User => 0,
            Side::Item => self.user_count as u32,
        };
        match dist {
            NegativeDistribution::Degree => {
                let sampler = match side {
                    Side::User => &self.user_negatives,
                    Side::Item => &self.item_negatives,
                };
                VertexId(base + sampler.sample(rng) as u32)
            }
            NegativeDistribution::Uniform => {
                let n = match side {
                    Side::User => self.user_count,
                    Side::Item => self.item_count,
                };
                let u: f64 = rng.random();
                VertexId(base + ((u * n as f64) as u32).min(n as u32 - 1))
            }
        }
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            users: self.user_count,
            items: self.item_count,
            edges: self.edge_count(),
            density: self.edge_count() as f64 / (self.user_count * self.item_count) as f64,
        }
    }

    /// Approximate heap footprint of adjacency and samplers, in bytes.
    /// Everything scales with the number of stored edges plus one alias table
    /// per side over the vertices.
    pub fn approx_bytes(&self) -> usize {
        use std::mem::size_of;
        self.neighbors.len() * (size_of::<u32>() * 2 + size_of::<f64>() * 2)
            + self.offsets.len() * size_of::<usize>()
            + self.edge_users.len() * (size_of::<u32>() * 3 + size_of::<f64>())
            + self.vertex_count() * (size_of::<f64>() + size_of::<u32>())
    }
}

/// Line-oriented graph summary.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GraphStats {
    pub users: usize,
    pub items: usize,
    pub edges: usize,
    pub density: f64,
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "users: {}", self.users)?;
        writeln!(f, "items: {}", self.items)?;
        writeln!(f, "edges: {}", self.edges)?;
        write!(f, "density: {:.6}", self.density)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interactions::{load_edge_list, Schema};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn graph_from(text: &str) -> BipartiteGraph {
        let t = load_edge_list(text.as_bytes(), Schema::Flexible).unwrap();
        BipartiteGraph::from_interactions(&t).unwrap()
    }

    #[test]
    fn complete_graph_counts_and_uniform_samplers() {
        let g = graph_from(
            "u1 a\nu1 b\nu2 a\nu2 b\nu3 a\nu3 b\n", // 3 users x 2 items
        );
        assert_eq!(g.user_count(), 3);
        assert_eq!(g.item_count(), 2);
        assert_eq!(g.edge_count(), 6);
        for v in 0..g.vertex_count() {
            let v = VertexId(v as u32);
            let w = g.neighbor_weights(v);
            assert!(w.iter().all(|x| *x == 1.0));
        }
    }

    #[test]
    fn duplicate_pairs_merge_by_summing() {
        let g = graph_from("u1\ti1\t2\nu1\ti1\t2");
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.neighbor_weights(VertexId(0)), &[4.0]);
    }

    #[test]
    fn zero_weight_rows_are_absent_edges() {
        let g = graph_from("u1 i1 1\nu1 i2 0\nu2 i1 2");
        assert_eq!(g.edge_count(), 2);
        // i2 never had a positive edge, so it is not in the id space.
        assert!(g.item_id("i2").is_none());
        assert_eq!(g.item_count(), 1);
    }

    #[test]
    fn ids_are_dense_users_first() {
        let g = graph_from("u1 i1\nu2 i1\nu2 i2");
        assert_eq!(g.side(VertexId(0)), Side::User);
        assert_eq!(g.side(VertexId(1)), Side::User);
        assert_eq!(g.side(VertexId(2)), Side::Item);
        assert_eq!(g.key(g.user_id("u2").unwrap()), "u2");
        assert_eq!(g.key(g.item_id("i2").unwrap()), "i2");
    }

    #[test]
    fn bipartite_adjacency_is_symmetric() {
        let g = graph_from("u1 i1 2\nu1 i2 1\nu2 i1 5");
        for v in 0..g.vertex_count() {
            let v = VertexId(v as u32);
            for (k, n) in g.neighbors(v).iter().enumerate() {
                let n = VertexId(*n);
                assert_ne!(g.side(v), g.side(n));
                let back = g.neighbors(n).binary_search(&v.0).unwrap();
                assert_eq!(g.neighbor_weights(n)[back], g.neighbor_weights(v)[k]);
            }
        }
    }

    #[test]
    fn single_edge_sampler_is_degenerate() {
        let g = graph_from("u1 i1 7");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let (u, i) = g.sample_edge(&mut rng);
            assert_eq!((u, i), (VertexId(0), VertexId(1)));
        }
    }

    #[test]
    fn edge_sampler_follows_weights() {
        let g = graph_from("u1 i1 1\nu2 i2 4");
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let draws = 1_000_000;
        let mut first = 0u64;
        for _ in 0..draws {
            if g.sample_edge(&mut rng).0 == VertexId(0) {
                first += 1;
            }
        }
        let f = first as f64 / draws as f64;
        assert!((f - 0.2).abs() < 0.01, "{f}");
    }

    #[test]
    fn neighbor_sampler_follows_weights() {
        let g = graph_from("u1 i1 1\nu1 i2 3");
        let u = g.user_id("u1").unwrap();
        let i2 = g.item_id("i2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 1_000_000;
        let mut hits = 0u64;
        for _ in 0..draws {
            if g.sample_neighbor(u, &mut rng) == i2 {
                hits += 1;
            }
        }
        let f = hits as f64 / draws as f64;
        assert!((f - 0.75).abs() < 0.01, "{f}");
    }

    #[test]
    fn forced_walk_on_path_graph() {
        let g = graph_from("u1 i1");
        let u = g.user_id("u1").unwrap();
        let i = g.item_id("i1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(g.random_walk(u, 2, &mut rng), vec![i, u]);
    }

    #[test]
    fn one_step_walk_is_uniform_on_star() {
        let g = graph_from("u1 i1\nu1 i2");
        let u = g.user_id("u1").unwrap();
        let i1 = g.item_id("i1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 200_000;
        let mut hits = 0u64;
        for _ in 0..draws {
            if g.random_walk(u, 1, &mut rng)[0] == i1 {
                hits += 1;
            }
        }
        let f = hits as f64 / draws as f64;
        assert!((f - 0.5).abs() < 0.01, "{f}");
    }

    /// Exact k-step visit distribution by enumerating every weighted path.
    pub(crate) fn enumerate_walk_marginal(
        g: &BipartiteGraph,
        start: VertexId,
        k: usize,
    ) -> Vec<f64> {
        fn recur(g: &BipartiteGraph, at: VertexId, left: usize, p: f64, acc: &mut Vec<f64>) {
            if left == 0 {
                acc[at.idx()] += p;
                return;
            }
            let total: f64 = g.neighbor_weights(at).iter().sum();
            for (n, w) in g.neighbors(at).iter().zip(g.neighbor_weights(at)) {
                recur(g, VertexId(*n), left - 1, p * w / total, acc);
            }
        }
        let mut acc = vec![0.0; g.vertex_count()];
        recur(g, start, k, 1.0, &mut acc);
        acc
    }

    #[test]
    fn two_step_walk_matches_path_enumeration() {
        // u1-{i1,i2}, i1-{u1,u2}, i2-{u1}: P(W^2 = u2) = 1/4.
        let g = graph_from("u1 i1\nu1 i2\nu2 i1");
        let u1 = g.user_id("u1").unwrap();
        let u2 = g.user_id("u2").unwrap();
        let exact = enumerate_walk_marginal(&g, u1, 2);
        assert!((exact[u2.idx()] - 0.25).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let draws = 400_000;
        let mut counts = vec![0u64; g.vertex_count()];
        for _ in 0..draws {
            let w = g.random_walk(u1, 2, &mut rng);
            counts[w[1].idx()] += 1;
        }
        for v in 0..g.vertex_count() {
            let f = counts[v] as f64 / draws as f64;
            assert!((f - exact[v]).abs() < 0.01, "vertex {v}: {f} vs {}", exact[v]);
        }
    }

    #[test]
    fn negative_sampling_single_item_side() {
        let g = graph_from("u1 i1\nu2 i1");
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let v = g.sample_negative(Side::Item, NegativeDistribution::Degree, &mut rng);
            assert_eq!(v, g.item_id("i1").unwrap());
            // The only drawable negative is also a true neighbor: observed
            // pairs are not rejected.
            assert!(g.has_edge(g.user_id("u1").unwrap(), v));
        }
    }

    #[test]
    fn negative_sampling_degree_proportional() {
        let g = graph_from("u1 i1 1\nu2 i2 3");
        let i1 = g.item_id("i1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let draws = 1_000_000;
        let mut hits = 0u64;
        for _ in 0..draws {
            if g.sample_negative(Side::Item, NegativeDistribution::Degree, &mut rng) == i1 {
                hits += 1;
            }
        }
        let f = hits as f64 / draws as f64;
        assert!((f - 0.25).abs() < 0.01, "{f}");
    }

    #[test]
    fn negative_sampling_uniform() {
        let g = graph_from("u1 i1 1\nu2 i2 3");
        let i1 = g.item_id("i1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 200_000;
        let mut hits = 0u64;
        for _ in 0..draws {
            if g.sample_negative(Side::Item, NegativeDistribution::Uniform, &mut rng) == i1 {
                hits += 1;
            }
        }
        let f = hits as f64 / draws as f64;
        assert!((f - 0.5).abs() < 0.01, "{f}");
    }

    #[test]
    fn sampling_is_reproducible_with_fixed_seed() {
        let g = graph_from("u1 i1 1\nu1 i2 2\nu2 i1 3");
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut log = Vec::new();
            for _ in 0..50 {
                let (u, i) = g.sample_edge(&mut rng);
                log.push((u, i));
                log.extend(g.random_walk(u, 2, &mut rng).into_iter().map(|v| (v, v)));
            }
            log
        };
        assert_eq!(run(77), run(77));
    }

    #[test]
    fn stats_report() {
        let g = graph_from("u1 i1\nu2 i1\nu2 i2");
        let s = g.stats();
        assert_eq!((s.users, s.items, s.edges), (2, 2, 3));
        assert!((s.density - 0.75).abs() < 1e-12);
        let text = s.to_string();
        assert!(text.contains("edges: 3"));
    }
}
