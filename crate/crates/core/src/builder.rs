//! Candidate edge construction.
//!
//! Training only ever considers a fixed candidate set, built here:
//! nearest-neighbour plus random edges for vector data, interaction-derived
//! graphs for collaborative filtering, and complete graphs for small
//! reconstruction problems. Everything is brute force.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{FinalEdge, FinalGraph, VertexId};

/// Distance used to compare data items.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    /// `1 - cos(x, y)`.
    Cosine,
}

/// Row-major matrix of `n_items` vectors of length `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorDataset {
    n_items: usize,
    dim: usize,
    vectors: Vec<f32>,
    metric: Metric,
}

impl VectorDataset {
    pub fn new(n_items: usize, dim: usize, vectors: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("vector dimension must be at least 1"));
        }
        if vectors.len() != n_items * dim {
            return Err(invalid(format!(
                "expected {} values for {n_items} x {dim}, got {}",
                n_items * dim,
                vectors.len()
            )));
        }
        if let Some(pos) = vectors.iter().position(|x| !x.is_finite()) {
            return Err(invalid(format!("non-finite value in row {}", pos / dim)));
        }
        Ok(VectorDataset {
            n_items,
            dim,
            vectors,
            metric: Metric::Euclidean,
        })
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.vectors
    }

    /// Distance between items `i` and `j` under the dataset's metric.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (x, y) = (self.row(i), self.row(j));
        match self.metric {
            Metric::Euclidean => x
                .iter()
                .zip(y)
                .map(|(&a, &b)| {
                    let d = f64::from(a) - f64::from(b);
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => {
                let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
                for (&a, &b) in x.iter().zip(y) {
                    let (a, b) = (f64::from(a), f64::from(b));
                    dot += a * b;
                    nx += a * a;
                    ny += b * b;
                }
                if nx == 0.0 || ny == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (nx.sqrt() * ny.sqrt())
                }
            }
        }
    }

    /// Multiplies every coordinate by `factor`.
    pub fn scale(&mut self, factor: f32) {
        for x in &mut self.vectors {
            *x *= factor;
        }
    }

    /// Mean distance over unordered pairs of distinct items.
    pub fn mean_distance(&self) -> f64 {
        let n = self.n_items;
        if n < 2 {
            return 0.0;
        }
        let total: f64 = (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).map(|j| self.distance(i, j)).sum::<f64>())
            .sum();
        total / (n * (n - 1) / 2) as f64
    }

    /// Rescales so that [`mean_distance`](Self::mean_distance) is 1 and
    /// returns the factor applied. Only meaningful for the Euclidean metric.
    pub fn normalize_mean_distance(&mut self) -> Result<f32> {
        let mean = self.mean_distance();
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(invalid("all items coincide; cannot normalize"));
        }
        let factor = (1.0 / mean) as f32;
        self.scale(factor);
        Ok(factor)
    }

    /// First `n` items.
    pub fn head(&self, n: usize) -> VectorDataset {
        let n = n.min(self.n_items);
        VectorDataset {
            n_items: n,
            dim: self.dim,
            vectors: self.vectors[..n * self.dim].to_vec(),
            metric: self.metric,
        }
    }
}

/// Symmetric dense distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        assert_eq!(values.len(), n * n, "distance matrix must be square");
        DistanceMatrix { n, values }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        DistanceMatrix { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Candidate edges with a starting weight each.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CandidateSet {
    pub n_vertices: usize,
    pub pairs: Vec<(VertexId, VertexId)>,
    pub init_weights: Vec<f64>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Every unordered pair of `n` vertices, weighted by `weight(i, j)`.
    pub fn complete(n: usize, weight: impl Fn(usize, usize) -> f64) -> Self {
        let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        let mut init_weights = Vec::with_capacity(pairs.capacity());
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((VertexId::new(i), VertexId::new(j)));
                init_weights.push(weight(i, j));
            }
        }
        CandidateSet {
            n_vertices: n,
            pairs,
            init_weights,
        }
    }

    /// The candidates as a deterministic graph, e.g. for saving or statistics.
    pub fn to_final_graph(&self, d_max: f32) -> Result<FinalGraph> {
        let edges = self
            .pairs
            .iter()
            .zip(&self.init_weights)
            .map(|(&(a, b), &w)| FinalEdge {
                a,
                b,
                weight: w as f32,
            })
            .collect();
        FinalGraph::new(self.n_vertices, edges, d_max)
    }
}

/// Deduplicating collector of unordered pairs, preserving first-insertion order.
#[derive(Default)]
struct PairSet {
    seen: HashSet<(u32, u32)>,
    pairs: Vec<(VertexId, VertexId)>,
}

impl PairSet {
    fn insert(&mut self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        let key = (a.min(b) as u32, a.max(b) as u32);
        if self.seen.insert(key) {
            self.pairs.push((VertexId(key.0), VertexId(key.1)));
            true
        } else {
            false
        }
    }
}

/// Indices of the `k` nearest items to `i` (excluding `i`), nearest first,
/// ties broken by index.
fn nearest(data: &VectorDataset, i: usize, k: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = (0..data.n_items())
        .filter(|&j| j != i)
        .map(|j| (data.distance(i, j), j))
        .collect();
    let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k, by_dist);
        scored.truncate(k);
    }
    scored.sort_by(by_dist);
    scored.into_iter().map(|(_, j)| j).collect()
}

/// For every item: edges to its `k` nearest neighbours and `r` uniformly random
/// partners. Self-loops and repeated pairs are dropped without redrawing.
///
/// Initial weights are the metric distances between endpoints.
pub fn build_knn_random<R: Rng + ?Sized>(
    data: &VectorDataset,
    k: usize,
    r: usize,
    rng: &mut R,
) -> Result<CandidateSet> {
    let n = data.n_items();
    if k >= n {
        return Err(invalid(format!(
            "k = {k} must be smaller than the number of items ({n})"
        )));
    }
    if k + r == 0 {
        return Err(invalid("k + r must be at least 1"));
    }
    let neighbours: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| nearest(data, i, k))
        .collect();

    let mut set = PairSet::default();
    for (i, ns) in neighbours.iter().enumerate() {
        for &j in ns {
            set.insert(i, j);
        }
    }
    for i in 0..n {
        for _ in 0..r {
            let j = rng.gen_range(0..n);
            set.insert(i, j);
        }
    }
    let pairs = set.pairs;
    let init_weights = pairs
        .par_iter()
        .map(|&(a, b)| positive_weight(data.distance(a.index(), b.index())))
        .collect();
    Ok(CandidateSet {
        n_vertices: n,
        pairs,
        init_weights,
    })
}

/// Identical points still need a strictly positive starting weight.
fn positive_weight(d: f64) -> f64 {
    d.max(1e-6)
}

/// Sparse binary user x item relevance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionMatrix {
    n_users: usize,
    n_items: usize,
    positives: Vec<Vec<u32>>,
}

impl InteractionMatrix {
    /// Builds from `(user, item)` pairs; duplicates collapse.
    pub fn from_pairs(
        n_users: usize,
        n_items: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut positives = vec![Vec::new(); n_users];
        for (u, i) in pairs {
            if u >= n_users || i >= n_items {
                return Err(invalid(format!(
                    "interaction ({u}, {i}) outside {n_users} x {n_items}"
                )));
            }
            positives[u].push(i as u32);
        }
        for p in &mut positives {
            p.sort_unstable();
            p.dedup();
        }
        Ok(InteractionMatrix {
            n_users,
            n_items,
            positives,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Sorted item ids relevant to `user`.
    pub fn positives(&self, user: usize) -> &[u32] {
        &self.positives[user]
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        self.positives[user].binary_search(&(item as u32)).is_ok()
    }

    pub fn n_interactions(&self) -> usize {
        self.positives.iter().map(Vec::len).sum()
    }

    pub fn density(&self) -> f64 {
        if self.n_users == 0 || self.n_items == 0 {
            return 0.0;
        }
        self.n_interactions() as f64 / (self.n_users as f64 * self.n_items as f64)
    }

    /// Users relevant to each item.
    pub fn item_users(&self) -> Vec<Vec<u32>> {
        let mut cols = vec![Vec::new(); self.n_items];
        for (u, items) in self.positives.iter().enumerate() {
            for &i in items {
                cols[i as usize].push(u as u32);
            }
        }
        cols
    }

    /// Graph vertex of `user`: users occupy `0..n_users`.
    pub fn user_vertex(&self, user: usize) -> VertexId {
        VertexId::new(user)
    }

    /// Graph vertex of `item`: items follow the users.
    pub fn item_vertex(&self, item: usize) -> VertexId {
        VertexId::new(self.n_users + item)
    }
}

/// Candidate-set flavour for collaborative filtering.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CfVariant {
    /// Training interactions plus user-user and item-item nearest neighbours.
    #[default]
    Normal,
    /// User-item edges only, about [`BIPARTITE_EDGES_PER_ITEM`] per item.
    Bipartite,
    /// [`RANDOM_EDGES_PER_VERTEX`] uniformly random edges per vertex.
    Random,
}

impl std::str::FromStr for CfVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(CfVariant::Normal),
            "bipartite" => Ok(CfVariant::Bipartite),
            "random" => Ok(CfVariant::Random),
            other => Err(invalid(format!(
                "unknown graph variant '{other}' (normal, bipartite, random)"
            ))),
        }
    }
}

impl std::fmt::Display for CfVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            CfVariant::Normal => "normal",
            CfVariant::Bipartite => "bipartite",
            CfVariant::Random => "random",
        })
    }
}

pub const DEFAULT_K_SIM: usize = 16;
pub const BIPARTITE_EDGES_PER_ITEM: usize = 30;
pub const RANDOM_EDGES_PER_VERTEX: usize = 50;

/// Cosine similarity of two sorted binary index sets.
pub fn binary_cosine(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    common as f64 / ((a.len() * b.len()) as f64).sqrt()
}

/// For each row, the `k` most cosine-similar other rows (ties by index; rows
/// with zero similarity fill up the remainder).
fn cosine_neighbours(rows: &[Vec<u32>], cols: &[Vec<u32>], k: usize) -> Vec<Vec<usize>> {
    let n = rows.len();
    (0..n)
        .into_par_iter()
        .map(|r| {
            // Co-occurrence counts through the shared columns.
            let mut common = std::collections::HashMap::<u32, usize>::new();
            for &c in &rows[r] {
                for &other in &cols[c as usize] {
                    if other as usize != r {
                        *common.entry(other).or_default() += 1;
                    }
                }
            }
            let norm_r = (rows[r].len() as f64).sqrt();
            let mut scored: Vec<(f64, usize)> = common
                .into_iter()
                .map(|(o, c)| {
                    (
                        c as f64 / (norm_r * (rows[o as usize].len() as f64).sqrt()),
                        o as usize,
                    )
                })
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut out: Vec<usize> = scored.into_iter().take(k).map(|(_, o)| o).collect();
            if out.len() < k {
                let chosen: HashSet<usize> = out.iter().copied().collect();
                out.extend(
                    (0..n)
                        .filter(|&o| o != r && !chosen.contains(&o))
                        .take(k - out.len()),
                );
            }
            out
        })
        .collect()
}

/// Candidate edges over `n_users + n_items` vertices (users first).
///
/// All candidates start at weight 1.
pub fn build_cf_graph<R: Rng + ?Sized>(
    interactions: &InteractionMatrix,
    variant: CfVariant,
    k_sim: usize,
    rng: &mut R,
) -> Result<CandidateSet> {
    let (m, n) = (interactions.n_users(), interactions.n_items());
    if m == 0 || n == 0 || interactions.n_interactions() == 0 {
        return Err(invalid("interaction matrix is empty"));
    }
    let total = m + n;
    let mut set = PairSet::default();
    match variant {
        CfVariant::Normal => {
            for u in 0..m {
                for &i in interactions.positives(u) {
                    set.insert(u, m + i as usize);
                }
            }
            let rows: Vec<Vec<u32>> = (0..m).map(|u| interactions.positives(u).to_vec()).collect();
            let cols = interactions.item_users();
            for (u, ns) in cosine_neighbours(&rows, &cols, k_sim.min(m - 1))
                .into_iter()
                .enumerate()
            {
                for o in ns {
                    set.insert(u, o);
                }
            }
            for (i, ns) in cosine_neighbours(&cols, &rows, k_sim.min(n - 1))
                .into_iter()
                .enumerate()
            {
                for o in ns {
                    set.insert(m + i, m + o);
                }
            }
        }
        CfVariant::Bipartite => {
            for u in 0..m {
                for &i in interactions.positives(u) {
                    set.insert(u, m + i as usize);
                }
            }
            let cols = interactions.item_users();
            for (i, users) in cols.iter().enumerate() {
                let want = BIPARTITE_EDGES_PER_ITEM.min(m);
                let mut have = users.len();
                let mut attempts = 0;
                while have < want && attempts < 20 * want {
                    attempts += 1;
                    let u = rng.gen_range(0..m);
                    if set.insert(u, m + i) {
                        have += 1;
                    }
                }
            }
        }
        CfVariant::Random => {
            for v in 0..total {
                for _ in 0..RANDOM_EDGES_PER_VERTEX {
                    set.insert(v, rng.gen_range(0..total));
                }
            }
        }
    }
    let init_weights = vec![1.0; set.pairs.len()];
    Ok(CandidateSet {
        n_vertices: total,
        pairs: set.pairs,
        init_weights,
    })
}

/// A connected random graph with its exact all-pairs distances.
#[derive(Clone, Debug)]
pub struct ErdosRenyiInstance {
    pub graph: FinalGraph,
    pub distances: DistanceMatrix,
    /// Number of draws rejected for being disconnected.
    pub rejected: usize,
}

const ER_MAX_ATTEMPTS: usize = 100_000;

fn is_connected(n: usize, edges: &[FinalEdge]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut components = n;
    for e in edges {
        let (ra, rb) = (
            find(&mut parent, e.a.index()),
            find(&mut parent, e.b.index()),
        );
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    components <= 1
}

/// G(n, p) with `U(0, 1)` weights, redrawn until connected.
pub fn generate_erdos_renyi<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    rng: &mut R,
) -> Result<ErdosRenyiInstance> {
    if n < 2 {
        return Err(invalid("an Erdős–Rényi graph needs at least two vertices"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!(
            "edge probability must be in (0, 1], got {p}"
        )));
    }
    for attempt in 0..ER_MAX_ATTEMPTS {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen::<f64>() < p {
                    let w: f32 = rng.sample(rand::distributions::Open01);
                    edges.push(FinalEdge {
                        a: VertexId::new(a),
                        b: VertexId::new(b),
                        weight: w,
                    });
                }
            }
        }
        if !is_connected(n, &edges) {
            continue;
        }
        let max_w = edges.iter().map(|e| e.weight).fold(0.0f32, f32::max);
        let d_max = crate::graph::default_d_max(n, f64::from(max_w)) as f32;
        let graph = FinalGraph::new(n, edges, d_max)?;
        let distances = crate::paths::all_pairs(&graph);
        return Ok(ErdosRenyiInstance {
            graph,
            distances,
            rejected: attempt,
        });
    }
    Err(invalid(format!(
        "no connected G({n}, {p}) graph after {ER_MAX_ATTEMPTS} attempts"
    )))
}

/// Appends `k` anchor vertices, each linked to `links_per_anchor` distinct
/// uniformly chosen original vertices. Anchors take the last `k` ids and are
/// never linked to each other. Anchor edges start at the mean existing weight.
pub fn add_anchor_vertices<R: Rng + ?Sized>(
    candidates: &CandidateSet,
    k: usize,
    links_per_anchor: usize,
    rng: &mut R,
) -> Result<CandidateSet> {
    if k == 0 {
        return Err(invalid("at least one anchor is required"));
    }
    let n = candidates.n_vertices;
    if links_per_anchor == 0 || links_per_anchor > n {
        return Err(invalid(format!("links per anchor must be in 1..={n}")));
    }
    let w = if candidates.init_weights.is_empty() {
        1.0
    } else {
        candidates.init_weights.iter().sum::<f64>() / candidates.init_weights.len() as f64
    };
    let mut out = candidates.clone();
    out.n_vertices = n + k;
    let mut pool: Vec<usize> = (0..n).collect();
    for a in 0..k {
        let anchor = VertexId::new(n + a);
        let (chosen, _) = pool.partial_shuffle(rng, links_per_anchor);
        let mut chosen = chosen.to_vec();
        chosen.sort_unstable();
        for v in chosen {
            out.pairs.push((VertexId::new(v), anchor));
            out.init_weights.push(w);
        }
    }
    Ok(out)
}

/// Ids of the anchors appended by [`add_anchor_vertices`].
pub fn anchor_ids(n_vertices: usize, k: usize) -> Vec<VertexId> {
    (n_vertices - k..n_vertices).map(VertexId::new).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line_data() -> VectorDataset {
        VectorDataset::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap()
    }

    fn pair_keys(c: &CandidateSet) -> Vec<(usize, usize)> {
        let mut keys: Vec<_> = c
            .pairs
            .iter()
            .map(|&(a, b)| (a.index(), b.index()))
            .collect();
        keys.sort();
        keys
    }

    #[test]
    fn knn_on_a_line() {
        // Exhaustive check: each point's nearest neighbour, ties to the smaller index.
        let data = line_data();
        let mut expected = Vec::new();
        for i in 0..4 {
            let j = (0..4)
                .filter(|&j| j != i)
                .min_by(|&a, &b| {
                    data.distance(i, a)
                        .total_cmp(&data.distance(i, b))
                        .then(a.cmp(&b))
                })
                .unwrap();
            expected.push((i.min(j), i.max(j)));
        }
        expected.sort();
        expected.dedup();
        assert_eq!(expected, vec![(0, 1), (1, 2), (2, 3)]);

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = build_knn_random(&data, 1, 0, &mut rng).unwrap();
        assert_eq!(pair_keys(&c), expected);
        assert_eq!(c.init_weights, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn knn_rejects_bad_budgets() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(build_knn_random(&line_data(), 0, 0, &mut rng).is_err());
        assert!(build_knn_random(&line_data(), 4, 0, &mut rng).is_err());
    }

    #[test]
    fn knn_random_is_simple_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vectors: Vec<f32> = (0..60 * 3).map(|_| rng.gen()).collect();
        let data = VectorDataset::new(60, 3, vectors).unwrap();
        let c = build_knn_random(&data, 4, 4, &mut rng).unwrap();
        assert!(c.len() <= 60 * 8);
        let mut keys = pair_keys(&c);
        assert!(keys.iter().all(|(a, b)| a != b));
        let len = keys.len();
        keys.dedup();
        assert_eq!(keys.len(), len);
    }

    #[test]
    fn cosine_of_binary_rows() {
        assert_eq!(binary_cosine(&[1, 4, 7], &[1, 4, 7]), 1.0);
        assert_eq!(binary_cosine(&[0, 2], &[1, 3]), 0.0);
        assert!((binary_cosine(&[0, 1], &[1]) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cf_normal_on_identity() {
        let f = InteractionMatrix::from_pairs(2, 2, [(0, 0), (1, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = build_cf_graph(&f, CfVariant::Normal, 1, &mut rng).unwrap();
        // vertices: users 0, 1; items 2, 3
        assert_eq!(pair_keys(&c), vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn cf_bipartite_has_only_user_item_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs: Vec<_> = (0..40)
            .flat_map(|u| [(u, u % 7), (u, (u * 3) % 10)])
            .collect();
        let f = InteractionMatrix::from_pairs(40, 10, pairs).unwrap();
        let c = build_cf_graph(&f, CfVariant::Bipartite, DEFAULT_K_SIM, &mut rng).unwrap();
        for (a, b) in pair_keys(&c) {
            assert!(a < 40 && b >= 40, "({a}, {b}) is not user-item");
        }
        for u in 0..40 {
            for &i in f.positives(u) {
                assert!(c
                    .pairs
                    .contains(&(VertexId::new(u), VertexId::new(40 + i as usize))));
            }
        }
        let mut per_item = [0usize; 10];
        for (_, b) in pair_keys(&c) {
            per_item[b - 40] += 1;
        }
        assert!(per_item.iter().all(|&d| d == BIPARTITE_EDGES_PER_ITEM));
    }

    #[test]
    fn cf_random_respects_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pairs: Vec<_> = (0..100).map(|u| (u, u % 30)).collect();
        let f = InteractionMatrix::from_pairs(100, 30, pairs).unwrap();
        let c = build_cf_graph(&f, CfVariant::Random, DEFAULT_K_SIM, &mut rng).unwrap();
        assert!(c.len() <= 130 * RANDOM_EDGES_PER_VERTEX);
        assert!(c.len() > 130 * RANDOM_EDGES_PER_VERTEX / 2);
    }

    #[test]
    fn cf_rejects_empty() {
        let f = InteractionMatrix::from_pairs(3, 3, []).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(build_cf_graph(&f, CfVariant::Normal, 1, &mut rng).is_err());
    }

    #[test]
    fn erdos_renyi_is_connected_with_metric_distances() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(10..=25);
            let inst = generate_erdos_renyi(n, 0.25, &mut rng).unwrap();
            assert!(is_connected(n, inst.graph.edges()));
            let d = &inst.distances;
            for i in 0..n {
                assert_eq!(d.get(i, i), 0.0);
                for j in 0..n {
                    assert_eq!(d.get(i, j), d.get(j, i));
                    assert!(d.get(i, j) < f64::from(inst.graph.d_max_f32()));
                }
            }
        }
    }

    #[test]
    fn anchors_are_appended_and_isolated_from_each_other() {
        let base = CandidateSet::complete(5, |_, _| 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = add_anchor_vertices(&base, 1, 5, &mut rng).unwrap();
        assert_eq!(out.n_vertices, 6);
        let anchor = VertexId::new(5);
        let linked: Vec<_> = out.pairs[base.len()..]
            .iter()
            .map(|&(a, b)| (a.index(), b))
            .collect();
        assert_eq!(linked, (0..5).map(|i| (i, anchor)).collect::<Vec<_>>());

        let out = add_anchor_vertices(&base, 3, 2, &mut rng).unwrap();
        assert_eq!(
            anchor_ids(out.n_vertices, 3),
            vec![VertexId(5), VertexId(6), VertexId(7)]
        );
        for &(a, b) in &out.pairs[base.len()..] {
            assert!(a.index() < 5 && b.index() >= 5);
        }
        assert_eq!(out.pairs.len(), base.len() + 6);
        assert!(add_anchor_vertices(&base, 0, 1, &mut rng).is_err());
    }
}
