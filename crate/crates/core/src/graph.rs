//! Random depth search over a skeleton: graph extraction, Kruskal spanning
//! forest, leaf-to-leaf path enumeration and length-weighted path sampling.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, PointF, PointSequence, NEIGHBOURS_8};
use crate::rng::SplitMix64;
use crate::skeleton::medial_axis;

pub type Pixel = (usize, usize);

/// Sampling weight given to single-point paths.
pub const SINGLE_POINT_LENGTH: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    /// Euclidean length of `chain` (1 per axial step, √2 per diagonal one).
    pub weight: f64,
    /// Pixels from node `u` to node `v`, both ends included.
    pub chain: Vec<Pixel>,
}

impl Edge {
    fn key(&self) -> (usize, usize) {
        (self.u.min(self.v), self.u.max(self.v))
    }

    pub fn is_self_loop(&self) -> bool {
        self.u == self.v
    }
}

/// Junctions and endpoints of a skeleton joined by the pixel chains between
/// them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SkeletonGraph {
    pub nodes: Vec<Pixel>,
    pub edges: Vec<Edge>,
}

impl SkeletonGraph {
    pub fn node_point(&self, id: usize) -> PointF {
        PointF::from(self.nodes[id])
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Number of connected components over nodes (isolated nodes count).
    pub fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.nodes.len());
        for e in &self.edges {
            uf.union(e.u, e.v);
        }
        (0..self.nodes.len()).filter(|&i| uf.find(i) == i).count()
    }
}

/// Acyclic [`SkeletonGraph`], as produced by [`kruskal_mst`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathTree {
    graph: SkeletonGraph,
}

impl PathTree {
    /// Wraps a graph after checking it has no cycle.
    pub fn new(graph: SkeletonGraph) -> Option<Self> {
        let mut uf = UnionFind::new(graph.nodes.len());
        for e in &graph.edges {
            if !uf.union(e.u, e.v) {
                return None;
            }
        }
        Some(Self { graph })
    }

    pub fn graph(&self) -> &SkeletonGraph {
        &self.graph
    }

    pub fn nodes(&self) -> &[Pixel] {
        &self.graph.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.graph.edges
    }

    pub fn degree(&self, node: usize) -> usize {
        self.graph.edges.iter().filter(|e| e.u == node || e.v == node).count()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.graph.nodes.len()];
        for (i, e) in self.graph.edges.iter().enumerate() {
            adj[e.u].push(i);
            adj[e.v].push(i);
        }
        adj
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonPath {
    pub points: Vec<Pixel>,
    pub length: f64,
}

impl SkeletonPath {
    pub fn to_points(&self) -> PointSequence {
        self.points.iter().copied().map(PointF::from).collect()
    }

    /// Weight used when sampling: the length, or the floor constant for a
    /// single point.
    pub fn sampling_weight(&self) -> f64 {
        if self.points.len() < 2 {
            SINGLE_POINT_LENGTH
        } else {
            self.length
        }
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            core::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

fn step_length(a: Pixel, b: Pixel) -> f64 {
    if a.0 != b.0 && a.1 != b.1 {
        SQRT_2
    } else {
        1.0
    }
}

/// Euclidean length of a pixel chain.
pub fn chain_length(chain: &[Pixel]) -> f64 {
    chain.windows(2).map(|w| step_length(w[0], w[1])).sum()
}

fn set_neighbours(skel: &BinaryMask, p: Pixel) -> impl Iterator<Item = Pixel> + '_ {
    NEIGHBOURS_8.iter().filter_map(move |&(dx, dy)| {
        let (x, y) = (p.0 as isize + dx, p.1 as isize + dy);
        skel.get_signed(x, y).then_some((x as usize, y as usize))
    })
}

/// Turns a thin skeleton into a graph.
///
/// Pixels whose skeleton degree is not 2 become nodes (ids in row-major
/// order); maximal runs of degree-2 pixels become edges. A closed loop with
/// no junction gets a synthetic node at its topmost-leftmost pixel and a
/// self-loop edge.
pub fn build_graph(skeleton: &BinaryMask) -> SkeletonGraph {
    let (w, h) = skeleton.dims();
    let idx = |p: Pixel| p.1 * w + p.0;
    let mut degree = vec![0u8; w * h];
    let mut node_id = vec![usize::MAX; w * h];
    let mut graph = SkeletonGraph::default();
    for p in skeleton.iter_set() {
        let d = skeleton.neighbour_count(p.0, p.1) as u8;
        degree[idx(p)] = d;
        if d != 2 {
            node_id[idx(p)] = graph.nodes.len();
            graph.nodes.push(p);
        }
    }

    let mut visited = vec![false; w * h];
    let real_nodes = graph.nodes.len();
    for u in 0..real_nodes {
        let start = graph.nodes[u];
        for n in set_neighbours(skeleton, start) {
            let nid = node_id[idx(n)];
            if nid != usize::MAX {
                if u < nid {
                    graph.edges.push(Edge {
                        u,
                        v: nid,
                        weight: step_length(start, n),
                        chain: vec![start, n],
                    });
                }
                continue;
            }
            if visited[idx(n)] {
                continue;
            }
            if let Some(edge) = walk_chain(skeleton, &node_id, &mut visited, u, start, n) {
                graph.edges.push(edge);
            }
        }
    }

    // Junction-free loops.
    for p in skeleton.iter_set() {
        let i = idx(p);
        if degree[i] != 2 || visited[i] {
            continue;
        }
        let id = graph.nodes.len();
        graph.nodes.push(p);
        node_id[i] = id;
        visited[i] = true;
        let first = set_neighbours(skeleton, p).next().expect("degree 2");
        if let Some(edge) = walk_chain(skeleton, &node_id, &mut visited, id, p, first) {
            graph.edges.push(edge);
        }
    }
    graph
}

/// Follows degree-2 pixels from `first` (a neighbour of node `u` at `start`)
/// until another node is reached.
fn walk_chain(
    skeleton: &BinaryMask,
    node_id: &[usize],
    visited: &mut [bool],
    u: usize,
    start: Pixel,
    first: Pixel,
) -> Option<Edge> {
    let w = skeleton.width();
    let idx = |p: Pixel| p.1 * w + p.0;
    let mut chain = vec![start, first];
    let mut weight = step_length(start, first);
    visited[idx(first)] = true;
    let (mut prev, mut cur) = (start, first);
    loop {
        let next = set_neighbours(skeleton, cur).find(|&q| q != prev)?;
        weight += step_length(cur, next);
        chain.push(next);
        let nid = node_id[idx(next)];
        if nid != usize::MAX {
            return Some(Edge { u, v: nid, weight, chain });
        }
        if visited[idx(next)] {
            // Malformed (non-thin) input; drop the partial chain.
            return None;
        }
        visited[idx(next)] = true;
        prev = cur;
        cur = next;
    }
}

/// Minimum spanning forest by Kruskal's algorithm. Ties on weight go to the
/// lexicographically smaller `(min id, max id)` pair; self-loops are dropped.
pub fn kruskal_mst(graph: &SkeletonGraph) -> PathTree {
    let mut order: Vec<usize> = (0..graph.edges.len())
        .filter(|&i| !graph.edges[i].is_self_loop())
        .collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&graph.edges[a], &graph.edges[b]);
        ea.weight
            .total_cmp(&eb.weight)
            .then(ea.key().cmp(&eb.key()))
            .then(a.cmp(&b))
    });
    let mut uf = UnionFind::new(graph.nodes.len());
    let edges = order
        .into_iter()
        .filter(|&i| uf.union(graph.edges[i].u, graph.edges[i].v))
        .map(|i| graph.edges[i].clone())
        .collect();
    PathTree { graph: SkeletonGraph { nodes: graph.nodes.clone(), edges } }
}

/// A leaf-to-leaf path before pixel expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafPair {
    pub from: usize,
    pub to: usize,
    pub length: f64,
}

impl LeafPair {
    pub fn sampling_weight(&self) -> f64 {
        if self.from == self.to {
            SINGLE_POINT_LENGTH
        } else {
            self.length
        }
    }
}

/// Every leaf pair joined by a path, ordered by `(smaller id, larger id)`.
/// A component made of one node contributes a single-point entry.
pub fn leaf_pairs(tree: &PathTree) -> Vec<LeafPair> {
    let n = tree.nodes().len();
    let adj = tree.adjacency();
    let leaves: Vec<usize> = (0..n).filter(|&i| adj[i].len() <= 1).collect();
    let mut out = Vec::new();
    let mut dist = vec![f64::NAN; n];
    let mut stack = Vec::new();
    for &a in &leaves {
        if adj[a].is_empty() {
            out.push(LeafPair { from: a, to: a, length: 0.0 });
            continue;
        }
        dist.fill(f64::NAN);
        dist[a] = 0.0;
        stack.push(a);
        while let Some(x) = stack.pop() {
            for &ei in &adj[x] {
                let e = &tree.edges()[ei];
                let y = if e.u == x { e.v } else { e.u };
                if dist[y].is_nan() {
                    dist[y] = dist[x] + e.weight;
                    stack.push(y);
                }
            }
        }
        out.extend(
            leaves
                .iter()
                .filter(|&&b| b > a && !dist[b].is_nan())
                .map(|&b| LeafPair { from: a, to: b, length: dist[b] }),
        );
    }
    out
}

/// Pixel chain of the unique tree path between two nodes.
pub fn expand_path(tree: &PathTree, from: usize, to: usize) -> Option<SkeletonPath> {
    if from == to {
        return Some(SkeletonPath { points: vec![tree.nodes()[from]], length: 0.0 });
    }
    let adj = tree.adjacency();
    let mut parent_edge = vec![usize::MAX; tree.nodes().len()];
    let mut seen = vec![false; tree.nodes().len()];
    seen[from] = true;
    let mut stack = vec![from];
    while let Some(x) = stack.pop() {
        if x == to {
            break;
        }
        for &ei in &adj[x] {
            let e = &tree.edges()[ei];
            let y = if e.u == x { e.v } else { e.u };
            if !seen[y] {
                seen[y] = true;
                parent_edge[y] = ei;
                stack.push(y);
            }
        }
    }
    if !seen[to] {
        return None;
    }
    // Walk back from `to`, then reverse.
    let mut points: Vec<Pixel> = vec![tree.nodes()[to]];
    let mut length = 0.0;
    let mut x = to;
    while x != from {
        let e = &tree.edges()[parent_edge[x]];
        length += e.weight;
        if e.v == x {
            points.extend(e.chain.iter().rev().skip(1));
            x = e.u;
        } else {
            points.extend(e.chain.iter().skip(1));
            x = e.v;
        }
    }
    points.reverse();
    Some(SkeletonPath { points, length })
}

/// All leaf-to-leaf paths of the tree, expanded to pixel chains.
pub fn enumerate_paths(tree: &PathTree) -> Vec<SkeletonPath> {
    leaf_pairs(tree)
        .into_iter()
        .map(|p| expand_path(tree, p.from, p.to).expect("pair is connected"))
        .collect()
}

/// Normalised sampling probabilities for a list of weights.
pub fn selection_probabilities(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Inverse-CDF pick on one uniform draw.
fn sample_index(weights: impl Iterator<Item = f64> + Clone, rng: &mut SplitMix64) -> usize {
    let total: f64 = weights.clone().sum();
    let target = rng.next_f64() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        acc += w;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}

/// Picks one path with probability proportional to its length.
pub fn select_path(paths: &[SkeletonPath], rng: &mut SplitMix64) -> Result<SkeletonPath> {
    if paths.is_empty() {
        return Err(Error::NoPaths);
    }
    let i = sample_index(paths.iter().map(SkeletonPath::sampling_weight), rng);
    Ok(paths[i].clone())
}

/// Same draw as [`select_path`] over the leaf pairs, without expanding every
/// candidate to pixels first.
pub fn select_leaf_pair(pairs: &[LeafPair], rng: &mut SplitMix64) -> Result<LeafPair> {
    if pairs.is_empty() {
        return Err(Error::NoPaths);
    }
    Ok(pairs[sample_index(pairs.iter().map(LeafPair::sampling_weight), rng)])
}

/// Keeps the tree component with the largest total edge weight (ties: more
/// nodes, then the smallest node id). Node ids are renumbered.
pub fn largest_component(tree: &PathTree) -> PathTree {
    let n = tree.nodes().len();
    let mut uf = UnionFind::new(n);
    for e in tree.edges() {
        uf.union(e.u, e.v);
    }
    let mut weight = vec![0.0f64; n];
    let mut count = vec![0usize; n];
    let mut min_id = vec![usize::MAX; n];
    for i in 0..n {
        let r = uf.find(i);
        count[r] += 1;
        min_id[r] = min_id[r].min(i);
    }
    for e in tree.edges() {
        weight[uf.find(e.u)] += e.weight;
    }
    let Some(best) = (0..n).filter(|&i| uf.find(i) == i).max_by(|&a, &b| {
        weight[a]
            .total_cmp(&weight[b])
            .then(count[a].cmp(&count[b]))
            .then(min_id[b].cmp(&min_id[a]))
    }) else {
        return tree.clone();
    };
    let mut remap = vec![usize::MAX; n];
    let mut nodes = Vec::new();
    for (i, slot) in remap.iter_mut().enumerate() {
        if uf.find(i) == best {
            *slot = nodes.len();
            nodes.push(tree.nodes()[i]);
        }
    }
    let edges = tree
        .edges()
        .iter()
        .filter(|e| remap[e.u] != usize::MAX)
        .map(|e| Edge { u: remap[e.u], v: remap[e.v], ..e.clone() })
        .collect();
    PathTree { graph: SkeletonGraph { nodes, edges } }
}

/// Skeletonise, build the graph, reduce to a spanning tree, then sample one
/// leaf-to-leaf path from the largest tree component.
pub fn random_depth_search(mask: &BinaryMask, rng: &mut SplitMix64) -> Result<SkeletonPath> {
    let skeleton = medial_axis(mask)?;
    let tree = largest_component(&kruskal_mst(&build_graph(&skeleton)));
    let pairs = leaf_pairs(&tree);
    let pick = select_leaf_pair(&pairs, rng)?;
    Ok(expand_path(&tree, pick.from, pick.to).expect("pair is connected"))
}
