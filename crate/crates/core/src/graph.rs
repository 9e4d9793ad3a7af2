//! Conflict graphs, feasible schedules and independent-set enumeration.
//!
//! A [`ConflictGraph`] has one vertex per wireless link and an edge between any
//! two links that cannot transmit in the same slot. A [`Schedule`] is a 0/1
//! activation vector over the links; it is feasible when it is an independent
//! set of the conflict graph.
//!
//! Small-graph enumeration works on `u64` bitmasks where bit `i` is link `i`.
//! The canonical order of the feasible set is increasing mask value, so the
//! pair graph enumerates as `00, 10, 01` (empty, link 0, link 1).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CsmaError, Result};

/// Default cap on `n_links` for full enumeration of the feasible set.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// Default cap on `n_links` for maximal-independent-set enumeration.
pub const DEFAULT_MIS_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictGraph {
    n_links: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl ConflictGraph {
    /// Builds and validates a conflict graph. Edges are undirected; `(i, j)`
    /// and `(j, i)` name the same edge.
    pub fn new(n_links: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut normalized = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            for idx in [i, j] {
                if idx >= n_links {
                    return Err(CsmaError::IndexOutOfRange {
                        index: idx,
                        len: n_links,
                    });
                }
            }
            if i == j {
                return Err(CsmaError::SelfLoop(i));
            }
            normalized.push((i.min(j), i.max(j)));
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(CsmaError::DuplicateEdge(w[0].0, w[0].1));
        }
        let mut neighbors = vec![Vec::new(); n_links];
        for &(i, j) in &normalized {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self {
            n_links,
            edges: normalized,
            neighbors,
        })
    }

    pub fn n_links(&self) -> usize {
        self.n_links
    }

    /// Edges as `(min, max)` pairs in sorted order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn are_adjacent(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Neighbor bitmask of every link. Only valid for graphs with at most 64 links.
    pub(crate) fn neighbor_masks(&self) -> Vec<u64> {
        debug_assert!(self.n_links <= 64);
        self.neighbors
            .iter()
            .map(|ns| ns.iter().fold(0u64, |m, &j| m | (1u64 << j)))
            .collect()
    }

    /// Link with the largest conflict degree; ties go to the lowest index.
    pub fn max_degree_link(&self) -> Option<usize> {
        (0..self.n_links).max_by_key(|&v| (self.degree(v), std::cmp::Reverse(v)))
    }

    // Named constructors for the small graphs used throughout the tests.

    pub fn isolated(n_links: usize) -> Self {
        Self::new(n_links, &[]).expect("edgeless graph is valid")
    }

    pub fn pair() -> Self {
        Self::new(2, &[(0, 1)]).expect("valid")
    }

    pub fn path(n_links: usize) -> Self {
        let edges: Vec<_> = (1..n_links).map(|i| (i - 1, i)).collect();
        Self::new(n_links, &edges).expect("valid")
    }

    pub fn cycle(n_links: usize) -> Result<Self> {
        if n_links < 3 {
            return Err(CsmaError::param("n_links", "a cycle needs at least 3 links"));
        }
        let edges: Vec<_> = (0..n_links).map(|i| (i, (i + 1) % n_links)).collect();
        Self::new(n_links, &edges)
    }

    pub fn complete(n_links: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..n_links {
            for j in i + 1..n_links {
                edges.push((i, j));
            }
        }
        Self::new(n_links, &edges).expect("valid")
    }

    pub fn star(n_leaves: usize) -> Self {
        let edges: Vec<_> = (1..=n_leaves).map(|i| (0, i)).collect();
        Self::new(n_leaves + 1, &edges).expect("valid")
    }

    /// Erdős–Rényi graph, deterministic in `seed`.
    pub fn random(n_links: usize, edge_prob: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n_links {
            for j in i + 1..n_links {
                if rng.gen::<f64>() < edge_prob {
                    edges.push((i, j));
                }
            }
        }
        Self::new(n_links, &edges).expect("valid")
    }
}

pub fn build_graph(n_links: usize, edges: &[(usize, usize)]) -> Result<ConflictGraph> {
    ConflictGraph::new(n_links, edges)
}

/// A link activation vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Schedule {
    bits: Vec<bool>,
}

impl Schedule {
    pub fn empty(n_links: usize) -> Self {
        Self {
            bits: vec![false; n_links],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Schedule with exactly the given links active.
    pub fn from_active(n_links: usize, active: &[usize]) -> Result<Self> {
        let mut s = Self::empty(n_links);
        for &v in active {
            if v >= n_links {
                return Err(CsmaError::IndexOutOfRange {
                    index: v,
                    len: n_links,
                });
            }
            s.bits[v] = true;
        }
        Ok(s)
    }

    pub fn from_mask(n_links: usize, mask: u64) -> Self {
        Self {
            bits: (0..n_links).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    /// Bitmask with bit `i` set when link `i` is active. Panics above 64 links.
    pub fn to_mask(&self) -> u64 {
        assert!(self.bits.len() <= 64, "mask form needs at most 64 links");
        self.bits
            .iter()
            .enumerate()
            .fold(0, |m, (i, &b)| if b { m | 1 << i } else { m })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_active(&self, v: usize) -> bool {
        self.bits[v]
    }

    pub fn set(&mut self, v: usize, active: bool) {
        self.bits[v] = active;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn active_links(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn count_active(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

pub fn is_feasible(g: &ConflictGraph, s: &Schedule) -> Result<bool> {
    if s.len() != g.n_links() {
        return Err(CsmaError::DimensionMismatch {
            expected: g.n_links(),
            got: s.len(),
        });
    }
    Ok(bits_feasible(g, s.bits()))
}

pub(crate) fn bits_feasible(g: &ConflictGraph, bits: &[bool]) -> bool {
    g.edges().iter().all(|&(i, j)| !(bits[i] && bits[j]))
}

/// All independent sets as bitmasks in increasing order.
pub fn feasible_masks(g: &ConflictGraph, cap: usize) -> Result<Vec<u64>> {
    let n = g.n_links();
    if n > cap.min(63) {
        return Err(CsmaError::TooLarge {
            what: "conflict graph for enumeration",
            size: n,
            cap: cap.min(63),
        });
    }
    let nbr = g.neighbor_masks();
    let mut out = Vec::new();
    // Depth-first over links in decreasing index; each branch either skips a
    // link or adds it when no neighbor is already chosen.
    fn rec(v: usize, n: usize, mask: u64, nbr: &[u64], out: &mut Vec<u64>) {
        if v == n {
            out.push(mask);
            return;
        }
        rec(v + 1, n, mask, nbr, out);
        if mask & nbr[v] == 0 {
            rec(v + 1, n, mask | 1 << v, nbr, out);
        }
    }
    rec(0, n, 0, &nbr, &mut out);
    out.sort_unstable();
    Ok(out)
}

pub fn enumerate_feasible(g: &ConflictGraph) -> Result<Vec<Schedule>> {
    enumerate_feasible_with_cap(g, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_feasible_with_cap(g: &ConflictGraph, cap: usize) -> Result<Vec<Schedule>> {
    Ok(feasible_masks(g, cap)?
        .into_iter()
        .map(|m| Schedule::from_mask(g.n_links(), m))
        .collect())
}

pub fn maximal_independent_sets(g: &ConflictGraph) -> Result<Vec<Schedule>> {
    maximal_independent_sets_with_cap(g, DEFAULT_MIS_CAP)
}

/// Inclusion-maximal independent sets, sorted by mask.
///
/// Runs Bron–Kerbosch with pivoting on the complement graph: maximal cliques
/// of the complement are exactly the maximal independent sets.
pub fn maximal_independent_sets_with_cap(g: &ConflictGraph, cap: usize) -> Result<Vec<Schedule>> {
    let n = g.n_links();
    if n > cap.min(64) {
        return Err(CsmaError::TooLarge {
            what: "conflict graph for MIS enumeration",
            size: n,
            cap: cap.min(64),
        });
    }
    if n == 0 {
        return Ok(vec![Schedule::empty(0)]);
    }
    let all: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let nbr = g.neighbor_masks();
    // Non-neighbors of v (excluding v): the complement adjacency.
    let comp: Vec<u64> = (0..n).map(|v| all & !nbr[v] & !(1u64 << v)).collect();

    fn bron_kerbosch(r: u64, mut p: u64, mut x: u64, comp: &[u64], out: &mut Vec<u64>) {
        if p == 0 && x == 0 {
            out.push(r);
            return;
        }
        let px = p | x;
        let pivot = {
            let mut best = px.trailing_zeros() as usize;
            let mut best_count = (p & comp[best]).count_ones();
            let mut rest = px;
            while rest != 0 {
                let u = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let c = (p & comp[u]).count_ones();
                if c > best_count {
                    best = u;
                    best_count = c;
                }
            }
            best
        };
        let mut candidates = p & !comp[pivot];
        while candidates != 0 {
            let v = candidates.trailing_zeros() as usize;
            candidates &= candidates - 1;
            let bit = 1u64 << v;
            bron_kerbosch(r | bit, p & comp[v], x & comp[v], comp, out);
            p &= !bit;
            x |= bit;
        }
    }

    let mut out = Vec::new();
    bron_kerbosch(0, all, 0, &comp, &mut out);
    out.sort_unstable();
    Ok(out.into_iter().map(|m| Schedule::from_mask(n, m)).collect())
}

/// Per-link share of the maximal independent sets: `rate_v = |{S ∈ MIS : v ∈ S}| / |MIS|`.
///
/// The vector is the uniform mixture of maximal schedules, so it lies in the
/// capacity region. A traffic intensity `ρ` maps to arrival rates `ρ · rate_v`.
pub fn capacity_profile(g: &ConflictGraph) -> Result<Vec<f64>> {
    let mis = maximal_independent_sets(g)?;
    let total = mis.len() as f64;
    let mut counts = vec![0usize; g.n_links()];
    for s in &mis {
        for v in s.active_links() {
            counts[v] += 1;
        }
    }
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RggParams {
    pub n_nodes: usize,
    /// Side of the square deployment area, in meters.
    pub area_side: f64,
    /// Transmission range, in meters.
    pub tx_range: f64,
    pub seed: u64,
}

impl RggParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.area_side > 0.0) {
            return Err(CsmaError::param("area_side", "must be positive"));
        }
        if !(self.tx_range > 0.0 && self.tx_range <= self.area_side) {
            return Err(CsmaError::param("tx_range", "must lie in (0, area_side]"));
        }
        Ok(())
    }
}

/// A generated RGG instance together with the geometry it came from.
#[derive(Debug, Clone)]
pub struct RggInstance {
    pub graph: ConflictGraph,
    pub positions: Vec<(f64, f64)>,
    /// Communication link `l` as `(transmitter node, receiver node)`.
    pub links: Vec<(usize, usize)>,
    /// Nodes that had no neighbor in range and therefore formed no link.
    pub linkless_nodes: Vec<usize>,
}

/// Random geometric conflict graph.
///
/// Nodes are placed uniformly in the square. Each node picks one in-range
/// neighbor uniformly at random as its receiver, forming one link. Links `a`
/// and `b` conflict when the receiver of either is within range of the
/// transmitter of the other.
pub fn generate_rgg(params: &RggParams) -> Result<RggInstance> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let positions: Vec<(f64, f64)> = (0..params.n_nodes)
        .map(|_| {
            (
                rng.gen::<f64>() * params.area_side,
                rng.gen::<f64>() * params.area_side,
            )
        })
        .collect();
    let dist = |a: usize, b: usize| {
        let (dx, dy) = (positions[a].0 - positions[b].0, positions[a].1 - positions[b].1);
        (dx * dx + dy * dy).sqrt()
    };
    let mut links = Vec::new();
    let mut linkless_nodes = Vec::new();
    for u in 0..params.n_nodes {
        let in_range: Vec<usize> = (0..params.n_nodes)
            .filter(|&w| w != u && dist(u, w) <= params.tx_range)
            .collect();
        if in_range.is_empty() {
            linkless_nodes.push(u);
        } else {
            let rx = in_range[rng.gen_range(0..in_range.len())];
            links.push((u, rx));
        }
    }
    let mut edges = Vec::new();
    for a in 0..links.len() {
        for b in a + 1..links.len() {
            let (ta, ra) = links[a];
            let (tb, rb) = links[b];
            if dist(ra, tb) <= params.tx_range || dist(rb, ta) <= params.tx_range {
                edges.push((a, b));
            }
        }
    }
    let graph = ConflictGraph::new(links.len(), &edges)?;
    Ok(RggInstance {
        graph,
        positions,
        links,
        linkless_nodes,
    })
}

/// On-disk graph exchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n_links: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<[f64; 2]>>,
}

impl GraphFile {
    pub fn from_graph(g: &ConflictGraph) -> Self {
        Self {
            n_links: g.n_links(),
            edges: g.edges().iter().map(|&(i, j)| [i, j]).collect(),
            coords: None,
        }
    }

    pub fn from_rgg(inst: &RggInstance) -> Self {
        let mut f = Self::from_graph(&inst.graph);
        // Link coordinates are the transmitter positions.
        f.coords = Some(
            inst.links
                .iter()
                .map(|&(tx, _)| [inst.positions[tx].0, inst.positions[tx].1])
                .collect(),
        );
        f
    }

    pub fn to_graph(&self) -> Result<ConflictGraph> {
        let edges: Vec<_> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        ConflictGraph::new(self.n_links, &edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn masks(list: &[Schedule]) -> Vec<u64> {
        list.iter().map(Schedule::to_mask).collect()
    }

    #[test]
    fn build_rejects_bad_edges() {
        assert!(matches!(
            build_graph(2, &[(0, 1), (1, 0)]),
            Err(CsmaError::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            build_graph(2, &[(0, 2)]),
            Err(CsmaError::IndexOutOfRange { index: 2, len: 2 })
        ));
        assert!(matches!(build_graph(2, &[(1, 1)]), Err(CsmaError::SelfLoop(1))));
    }

    #[test]
    fn build_small_graphs() {
        let g = build_graph(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(0), &[1]);
        let single = build_graph(1, &[]).unwrap();
        assert_eq!(single.n_links(), 1);
        assert!(single.neighbors(0).is_empty());
    }

    #[test]
    fn feasibility() {
        let g = ConflictGraph::pair();
        assert!(!is_feasible(&g, &Schedule::from_bits(vec![true, true])).unwrap());
        assert!(is_feasible(&g, &Schedule::from_bits(vec![true, false])).unwrap());
        let p = ConflictGraph::path(3);
        assert!(is_feasible(&p, &Schedule::from_bits(vec![true, false, true])).unwrap());
        assert!(matches!(
            is_feasible(&p, &Schedule::empty(2)),
            Err(CsmaError::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn enumerate_small() {
        assert_eq!(masks(&enumerate_feasible(&ConflictGraph::pair()).unwrap()), vec![0, 1, 2]);
        assert_eq!(
            masks(&enumerate_feasible(&ConflictGraph::path(3)).unwrap()),
            vec![0, 1, 2, 4, 5]
        );
        assert_eq!(enumerate_feasible(&ConflictGraph::isolated(1)).unwrap().len(), 2);
        assert!(matches!(
            enumerate_feasible(&ConflictGraph::isolated(21)),
            Err(CsmaError::TooLarge { .. })
        ));
    }

    #[test]
    fn enumeration_matches_exhaustive_check() {
        for seed in 0..10 {
            let g = ConflictGraph::random(10, 0.3, seed);
            let listed: std::collections::HashSet<u64> =
                feasible_masks(&g, 20).unwrap().into_iter().collect();
            for m in 0u64..1 << 10 {
                let s = Schedule::from_mask(10, m);
                assert_eq!(is_feasible(&g, &s).unwrap(), listed.contains(&m));
            }
        }
    }

    #[test]
    fn mis_small() {
        assert_eq!(
            masks(&maximal_independent_sets(&ConflictGraph::complete(3)).unwrap()),
            vec![1, 2, 4]
        );
        assert_eq!(
            masks(&maximal_independent_sets(&ConflictGraph::path(3)).unwrap()),
            vec![2, 5]
        );
        assert_eq!(
            masks(&maximal_independent_sets(&ConflictGraph::isolated(1)).unwrap()),
            vec![1]
        );
    }

    #[test]
    fn mis_are_maximal_feasible_sets() {
        for seed in 0..10 {
            let g = ConflictGraph::random(9, 0.35, seed);
            let feasible = feasible_masks(&g, 20).unwrap();
            let mis = masks(&maximal_independent_sets(&g).unwrap());
            let brute: Vec<u64> = feasible
                .iter()
                .copied()
                .filter(|&m| !feasible.iter().any(|&o| o != m && o & m == m))
                .collect();
            assert_eq!(mis, brute);
        }
    }

    #[test]
    fn capacity_small() {
        assert_eq!(capacity_profile(&ConflictGraph::path(3)).unwrap(), vec![0.5; 3]);
        let tri = capacity_profile(&ConflictGraph::complete(3)).unwrap();
        for r in tri {
            assert!((r - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(capacity_profile(&ConflictGraph::isolated(1)).unwrap(), vec![1.0]);
    }

    #[test]
    fn rgg_deterministic_and_symmetric() {
        let p = RggParams {
            n_nodes: 25,
            area_side: 1000.0,
            tx_range: 250.0,
            seed: 7,
        };
        let a = generate_rgg(&p).unwrap();
        let b = generate_rgg(&p).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.links, b.links);
        assert_eq!(a.graph.n_links() + a.linkless_nodes.len(), 25);
        for v in 0..a.graph.n_links() {
            for &w in a.graph.neighbors(v) {
                assert!(a.graph.are_adjacent(w, v));
            }
        }
    }

    #[test]
    fn rgg_far_apart_pair_has_no_links() {
        let seed = (0..10_000u64)
            .find(|&s| {
                let inst = generate_rgg(&RggParams {
                    n_nodes: 2,
                    area_side: 1000.0,
                    tx_range: 250.0,
                    seed: s,
                })
                .unwrap();
                let (a, b) = (inst.positions[0], inst.positions[1]);
                ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() > 250.0
            })
            .unwrap();
        let inst = generate_rgg(&RggParams {
            n_nodes: 2,
            area_side: 1000.0,
            tx_range: 250.0,
            seed,
        })
        .unwrap();
        assert_eq!(inst.graph.n_links(), 0);
        assert_eq!(inst.linkless_nodes, vec![0, 1]);
    }

    #[test]
    fn rgg_rejects_bad_params() {
        let mut p = RggParams {
            n_nodes: 5,
            area_side: 100.0,
            tx_range: 200.0,
            seed: 0,
        };
        assert!(generate_rgg(&p).is_err());
        p.tx_range = 0.0;
        assert!(generate_rgg(&p).is_err());
    }

    #[test]
    fn graph_file_roundtrip() {
        let g = ConflictGraph::cycle(5).unwrap();
        let text = toml::to_string(&GraphFile::from_graph(&g)).unwrap();
        let back: GraphFile = toml::from_str(&text).unwrap();
        assert_eq!(back.to_graph().unwrap(), g);
    }
}
