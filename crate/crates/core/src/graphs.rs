//! Undirected graphs and chordal-graph machinery.
//!
//! Vertices are `0..p` internally. The text format read by
//! [`Graph::parse_text`] is 1-based: a `p <n>` header followed by one
//! `<i> <j>` edge per line, `#` starting a comment line.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GgmError, Result};

/// Exact clique searches work on 64-bit vertex masks.
pub const MAX_EXACT_VERTICES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    p: usize,
    adj: Vec<BTreeSet<usize>>,
}

impl Graph {
    /// Graph on `p` vertices with no edges.
    pub fn new(p: usize) -> Self {
        Self {
            p,
            adj: vec![BTreeSet::new(); p],
        }
    }

    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::new(p);
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn complete(p: usize) -> Self {
        let mut g = Self::new(p);
        for i in 0..p {
            for j in (i + 1)..p {
                g.insert(i, j);
            }
        }
        g
    }

    /// The cycle `0 - 1 - ... - (p-1) - 0`.
    pub fn cycle(p: usize) -> Self {
        assert!(p >= 3, "a cycle needs at least three vertices");
        let mut g = Self::path(p);
        g.insert(0, p - 1);
        g
    }

    pub fn path(p: usize) -> Self {
        let mut g = Self::new(p);
        for i in 1..p {
            g.insert(i - 1, i);
        }
        g
    }

    /// `rows x cols` grid; vertex `(r, c)` is `r * cols + c`.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut g = Self::new(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    g.insert(v, v + 1);
                }
                if r + 1 < rows {
                    g.insert(v, v + cols);
                }
            }
        }
        g
    }

    fn insert(&mut self, i: usize, j: usize) -> bool {
        let fresh = self.adj[i].insert(j);
        self.adj[j].insert(i);
        fresh
    }

    /// Adds `{i, j}`; returns false if it was already present.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<bool> {
        if i >= self.p || j >= self.p {
            return Err(GgmError::InvalidGraph(format!(
                "edge ({i}, {j}) out of range for {} vertices",
                self.p
            )));
        }
        if i == j {
            return Err(GgmError::InvalidGraph(format!("self-loop at vertex {i}")));
        }
        Ok(self.insert(i, j))
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) -> bool {
        if i >= self.p || j >= self.p {
            return false;
        }
        let had = self.adj[i].remove(&j);
        self.adj[j].remove(&i);
        had
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.p
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].contains(&j)
    }

    /// True for `(i, i)` and for edges: membership in `E*`.
    #[inline]
    pub fn in_augmented(&self, i: usize, j: usize) -> bool {
        i == j || self.has_edge(i, j)
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Edges `(i, j)` with `i < j`, lexicographically sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for i in 0..self.p {
            for &j in self.adj[i].range((i + 1)..) {
                out.push((i, j));
            }
        }
        out
    }

    /// `E* = E ∪ {(i, i)}`, as pairs `(i, j)` with `i <= j`, sorted.
    pub fn augmented_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges() + self.p);
        for i in 0..self.p {
            out.push((i, i));
            for &j in self.adj[i].range((i + 1)..) {
                out.push((i, j));
            }
        }
        out
    }

    /// Pairs `(i, j)`, `i < j`, that are not edges.
    pub fn non_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                if !self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_complete(&self) -> bool {
        self.num_edges() == self.p * (self.p.saturating_sub(1)) / 2
    }

    pub fn is_clique(&self, vertices: &[usize]) -> bool {
        vertices
            .iter()
            .enumerate()
            .all(|(a, &i)| vertices[a + 1..].iter().all(|&j| self.has_edge(i, j)))
    }

    /// If the graph is a single cycle through all `p >= 3` vertices, returns
    /// the vertices in cycle order starting at 0 and stepping to the smaller
    /// neighbour of 0 first.
    pub fn cycle_order(&self) -> Option<Vec<usize>> {
        if self.p < 3 || self.adj.iter().any(|a| a.len() != 2) {
            return None;
        }
        let mut order = vec![0];
        let mut prev = 0;
        let mut cur = *self.adj[0].iter().next()?;
        while cur != 0 {
            order.push(cur);
            let next = self.adj[cur].iter().copied().find(|&w| w != prev)?;
            prev = cur;
            cur = next;
            if order.len() > self.p {
                return None;
            }
        }
        (order.len() == self.p).then_some(order)
    }

    fn masks(&self) -> Result<Vec<u64>> {
        if self.p > MAX_EXACT_VERTICES {
            return Err(GgmError::TooLarge {
                what: "vertex count for exact clique search",
                limit: MAX_EXACT_VERTICES,
                got: self.p,
            });
        }
        Ok(self
            .adj
            .iter()
            .map(|a| a.iter().fold(0u64, |m, &j| m | (1u64 << j)))
            .collect())
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut graph: Option<Graph> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| GgmError::Parse(format!("line {}: {msg}: {raw:?}", lineno + 1));
            match &mut graph {
                None => {
                    if fields.len() != 2 || fields[0] != "p" {
                        return Err(bad("expected header `p <n>`"));
                    }
                    let p: usize = fields[1].parse().map_err(|_| bad("invalid vertex count"))?;
                    if p == 0 {
                        return Err(bad("vertex count must be positive"));
                    }
                    graph = Some(Graph::new(p));
                }
                Some(g) => {
                    if fields.len() != 2 {
                        return Err(bad("expected `<i> <j>`"));
                    }
                    let i: usize = fields[0].parse().map_err(|_| bad("invalid vertex"))?;
                    let j: usize = fields[1].parse().map_err(|_| bad("invalid vertex"))?;
                    if i == 0 || j == 0 || i > g.p || j > g.p {
                        return Err(bad("vertex out of range (vertices are 1-based)"));
                    }
                    if i == j {
                        return Err(bad("self-loop"));
                    }
                    if !g.insert(i - 1, j - 1) {
                        return Err(bad("duplicate edge"));
                    }
                }
            }
        }
        graph.ok_or_else(|| GgmError::Parse("missing `p <n>` header".into()))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("p {}\n", self.p);
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{} {}", i + 1, j + 1);
        }
        out
    }
}

/// Maximal cliques in running-intersection order with their separators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliqueDecomposition {
    pub cliques: Vec<Vec<usize>>,
    /// `separators[k]` is the separator attaching `cliques[k + 1]` to the
    /// cliques before it. Separators may repeat and may be empty (for a new
    /// connected component).
    pub separators: Vec<Vec<usize>>,
}

impl CliqueDecomposition {
    pub fn max_clique_size(&self) -> usize {
        self.cliques.iter().map(|c| c.len()).max().unwrap_or(0)
    }
}

/// Maximum cardinality search; ties go to the lowest vertex index.
pub fn maximum_cardinality_search(g: &Graph) -> Vec<usize> {
    let p = g.num_vertices();
    let mut weight = vec![0usize; p];
    let mut visited = vec![false; p];
    let mut order = Vec::with_capacity(p);
    for _ in 0..p {
        let mut best: Option<usize> = None;
        for v in 0..p {
            if !visited[v] && best.is_none_or(|b| weight[v] > weight[b]) {
                best = Some(v);
            }
        }
        let v = best.expect("an unvisited vertex remains");
        visited[v] = true;
        order.push(v);
        for w in g.neighbors(v) {
            if !visited[w] {
                weight[w] += 1;
            }
        }
    }
    order
}

/// For each vertex of a visit order, its neighbours visited earlier.
fn earlier_neighbors(g: &Graph, order: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let p = g.num_vertices();
    let mut pos = vec![0; p];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    let earlier = order
        .iter()
        .map(|&v| {
            let mut n: Vec<usize> = g.neighbors(v).filter(|&w| pos[w] < pos[v]).collect();
            n.sort_unstable();
            n
        })
        .collect();
    (pos, earlier)
}

/// A perfect elimination ordering when `g` is chordal, `None` otherwise.
///
/// The ordering is the reverse of the maximum cardinality search visit order.
pub fn perfect_elimination_ordering(g: &Graph) -> Option<Vec<usize>> {
    let order = maximum_cardinality_search(g);
    let (pos, earlier) = earlier_neighbors(g, &order);
    for nbrs in &earlier {
        let Some(&follower) = nbrs.iter().max_by_key(|&&w| pos[w]) else {
            continue;
        };
        let follower_nbrs = &earlier[pos[follower]];
        if nbrs
            .iter()
            .any(|&w| w != follower && follower_nbrs.binary_search(&w).is_err())
        {
            return None;
        }
    }
    let mut peo = order;
    peo.reverse();
    Some(peo)
}

pub fn is_chordal(g: &Graph) -> bool {
    perfect_elimination_ordering(g).is_some()
}

/// Maximal cliques of a chordal graph, ordered by the maximum cardinality
/// search that certifies chordality, together with their separators.
pub fn clique_decomposition(g: &Graph) -> Result<CliqueDecomposition> {
    let peo = perfect_elimination_ordering(g).ok_or(GgmError::NotChordal)?;
    let order: Vec<usize> = peo.into_iter().rev().collect();
    let (_, earlier) = earlier_neighbors(g, &order);
    let candidates: Vec<Vec<usize>> = order
        .iter()
        .zip(&earlier)
        .map(|(&v, nbrs)| {
            let mut c = nbrs.clone();
            c.push(v);
            c.sort_unstable();
            c
        })
        .collect();
    let contains = |big: &[usize], small: &[usize]| small.iter().all(|x| big.binary_search(x).is_ok());
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    for (k, c) in candidates.iter().enumerate() {
        let dominated = candidates
            .iter()
            .enumerate()
            .any(|(m, other)| m != k && other.len() > c.len() && contains(other, c));
        if !dominated {
            cliques.push(c.clone());
        }
    }
    let mut seen = vec![false; g.num_vertices()];
    let mut separators = Vec::with_capacity(cliques.len().saturating_sub(1));
    for (k, c) in cliques.iter().enumerate() {
        if k > 0 {
            separators.push(c.iter().copied().filter(|&v| seen[v]).collect());
        }
        for &v in c {
            seen[v] = true;
        }
    }
    Ok(CliqueDecomposition {
        cliques,
        separators,
    })
}

/// Chordal cover built by greedy minimum-fill elimination (ties to the lowest
/// index). A chordal input is returned unchanged.
pub fn chordal_cover(g: &Graph) -> Graph {
    let p = g.num_vertices();
    let mut cover = g.clone();
    let mut work: Vec<BTreeSet<usize>> = (0..p).map(|v| g.neighbors(v).collect()).collect();
    let mut alive = vec![true; p];
    for _ in 0..p {
        let mut best: Option<(usize, usize)> = None;
        for v in (0..p).filter(|&v| alive[v]) {
            let nbrs: Vec<usize> = work[v].iter().copied().collect();
            let mut fill = 0;
            for (a, &x) in nbrs.iter().enumerate() {
                fill += nbrs[a + 1..].iter().filter(|&&y| !work[x].contains(&y)).count();
            }
            if best.is_none_or(|(_, f)| fill < f) {
                best = Some((v, fill));
            }
        }
        let (v, _) = best.expect("an uneliminated vertex remains");
        let nbrs: Vec<usize> = work[v].iter().copied().collect();
        for (a, &x) in nbrs.iter().enumerate() {
            for &y in &nbrs[a + 1..] {
                if work[x].insert(y) {
                    work[y].insert(x);
                    cover.insert(x, y);
                }
            }
        }
        for &x in &nbrs {
            work[x].remove(&v);
        }
        work[v].clear();
        alive[v] = false;
    }
    cover
}

/// All maximal cliques (Bron–Kerbosch with pivoting), each sorted, in
/// lexicographic order.
pub fn maximal_cliques(g: &Graph) -> Result<Vec<Vec<usize>>> {
    let adj = g.masks()?;
    let all = if g.num_vertices() == 64 {
        u64::MAX
    } else {
        (1u64 << g.num_vertices()) - 1
    };
    let mut out = Vec::new();
    bron_kerbosch(&adj, 0, all, 0, &mut out);
    let mut cliques: Vec<Vec<usize>> = out.into_iter().map(mask_to_vec).collect();
    cliques.sort();
    Ok(cliques)
}

fn mask_to_vec(mut m: u64) -> Vec<usize> {
    let mut v = Vec::with_capacity(m.count_ones() as usize);
    while m != 0 {
        v.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    v
}

fn bron_kerbosch(adj: &[u64], r: u64, mut p: u64, mut x: u64, out: &mut Vec<u64>) {
    if p == 0 {
        if x == 0 {
            out.push(r);
        }
        return;
    }
    let pivot = mask_to_vec(p | x)
        .into_iter()
        .max_by_key(|&u| (p & adj[u]).count_ones())
        .expect("p | x is nonempty");
    let mut cand = p & !adj[pivot];
    while cand != 0 {
        let v = cand.trailing_zeros() as usize;
        let bit = 1u64 << v;
        cand &= !bit;
        bron_kerbosch(adj, r | bit, p & adj[v], x & adj[v], out);
        p &= !bit;
        x |= bit;
    }
}

/// Exact maximum clique size `q(G)` by branch and bound.
pub fn max_clique_size(g: &Graph) -> Result<usize> {
    let adj = g.masks()?;
    let all = if g.num_vertices() == 64 {
        u64::MAX
    } else {
        (1u64 << g.num_vertices()) - 1
    };
    let mut best = 0;
    max_clique_bb(&adj, 0, all, &mut best);
    Ok(best)
}

fn max_clique_bb(adj: &[u64], size: usize, mut cand: u64, best: &mut usize) {
    if cand == 0 {
        *best = (*best).max(size);
        return;
    }
    while cand != 0 {
        if size + cand.count_ones() as usize <= *best {
            return;
        }
        let v = cand.trailing_zeros() as usize;
        cand &= !(1u64 << v);
        max_clique_bb(adj, size + 1, cand & adj[v], best);
    }
}

/// Bounds on the maximum likelihood threshold of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MltBounds {
    /// `q(G)`, the maximum clique size.
    pub lower: usize,
    /// Maximum clique size of the min-fill chordal cover. This bounds the
    /// minimal-cover clique size from above and is not claimed to equal it.
    pub upper: usize,
}

pub fn mlt_bounds(g: &Graph) -> Result<MltBounds> {
    let lower = max_clique_size(g)?;
    let cover = chordal_cover(g);
    let upper = clique_decomposition(&cover)
        .expect("min-fill cover is chordal")
        .max_clique_size();
    Ok(MltBounds { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_cycle() -> Graph {
        Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap()
    }

    #[test]
    fn chordality_of_basic_graphs() {
        assert!(is_chordal(&Graph::complete(4)));
        assert!(!is_chordal(&four_cycle()));
        assert!(is_chordal(&Graph::path(3)));
        assert!(is_chordal(&Graph::new(3)));
        assert!(!is_chordal(&Graph::grid(3, 3)));
    }

    #[test]
    fn path_decomposition() {
        let d = clique_decomposition(&Graph::path(3)).unwrap();
        assert_eq!(d.cliques, vec![vec![0, 1], vec![1, 2]]);
        assert_eq!(d.separators, vec![vec![1]]);
    }

    #[test]
    fn complete_decomposition() {
        let d = clique_decomposition(&Graph::complete(4)).unwrap();
        assert_eq!(d.cliques, vec![vec![0, 1, 2, 3]]);
        assert!(d.separators.is_empty());
    }

    #[test]
    fn decomposition_of_nonchordal_fails() {
        assert_eq!(clique_decomposition(&four_cycle()), Err(GgmError::NotChordal));
    }

    #[test]
    fn disconnected_graph_gets_empty_separator() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let d = clique_decomposition(&g).unwrap();
        assert_eq!(d.cliques.len(), 2);
        assert_eq!(d.separators, vec![Vec::<usize>::new()]);
    }

    #[test]
    fn covers() {
        let c = chordal_cover(&four_cycle());
        assert_eq!(c.num_edges(), 5);
        assert!(is_chordal(&c));
        assert_eq!(clique_decomposition(&c).unwrap().max_clique_size(), 3);

        let c8 = chordal_cover(&Graph::cycle(8));
        assert!(is_chordal(&c8));
        assert_eq!(clique_decomposition(&c8).unwrap().max_clique_size(), 3);

        let path = Graph::path(5);
        assert_eq!(chordal_cover(&path), path);
    }

    #[test]
    fn clique_sizes() {
        assert_eq!(max_clique_size(&four_cycle()).unwrap(), 2);
        assert_eq!(max_clique_size(&Graph::complete(5)).unwrap(), 5);
        assert_eq!(max_clique_size(&Graph::grid(3, 3)).unwrap(), 2);
        assert_eq!(max_clique_size(&Graph::new(3)).unwrap(), 1);
        assert!(matches!(max_clique_size(&Graph::new(65)), Err(GgmError::TooLarge { .. })));
    }

    #[test]
    fn threshold_bounds() {
        assert_eq!(mlt_bounds(&four_cycle()).unwrap(), MltBounds { lower: 2, upper: 3 });
        assert_eq!(mlt_bounds(&Graph::grid(3, 3)).unwrap(), MltBounds { lower: 2, upper: 4 });
        let chordal = Graph::from_edges(5, &[(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)]).unwrap();
        assert_eq!(mlt_bounds(&chordal).unwrap(), MltBounds { lower: 3, upper: 3 });
    }

    #[test]
    fn augmented_edges_include_diagonal() {
        let g = Graph::path(3);
        assert_eq!(g.augmented_edges(), vec![(0, 0), (0, 1), (1, 1), (1, 2), (2, 2)]);
        assert_eq!(g.non_edges(), vec![(0, 2)]);
    }

    #[test]
    fn cycle_order_detection() {
        assert_eq!(four_cycle().cycle_order(), Some(vec![0, 1, 2, 3]));
        let shuffled = Graph::from_edges(4, &[(0, 2), (2, 1), (1, 3), (3, 0)]).unwrap();
        assert_eq!(shuffled.cycle_order(), Some(vec![0, 2, 1, 3]));
        assert_eq!(Graph::path(4).cycle_order(), None);
        let two_triangles =
            Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        assert_eq!(two_triangles.cycle_order(), None);
    }

    #[test]
    fn edge_validation() {
        let mut g = Graph::new(3);
        assert!(g.add_edge(0, 0).is_err());
        assert!(g.add_edge(0, 3).is_err());
        assert!(g.add_edge(0, 1).unwrap());
        assert!(!g.add_edge(1, 0).unwrap());
    }

    #[test]
    fn text_format() {
        let g = Graph::parse_text("# four cycle\np 4\n1 2\n2 3\n\n3 4\n1 4\n").unwrap();
        assert_eq!(g, four_cycle());
        assert_eq!(Graph::parse_text(&g.to_text()).unwrap(), g);
        assert!(Graph::parse_text("1 2\n").is_err());
        assert!(Graph::parse_text("p 3\n1 1\n").is_err());
        assert!(Graph::parse_text("p 3\n0 1\n").is_err());
        assert!(Graph::parse_text("p 3\n1 2\n2 1\n").is_err());
        assert!(Graph::parse_text("p 3\n1 x\n").is_err());
        assert!(Graph::parse_text("# nothing\n").is_err());
    }
}
