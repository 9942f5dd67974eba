//! Sparse weighted undirected graphs.
//!
//! Graphs are multigraphs in the stub-counting sense: repeated edges add up
//! their weight and a self-loop contributes two stubs to the degree of its
//! node. Adjacency is kept in CSR form with both directions stored; a
//! self-loop is stored once, in its own row.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::{BufRead, Write};

use petgraph::unionfind::UnionFind;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
    total_weight: f64,
}

impl Graph {
    /// Builds a graph on `n_nodes` nodes from `(u, v, weight)` triples.
    ///
    /// Duplicate pairs (in either orientation) accumulate. Zero weights are
    /// dropped; negative or non-finite weights are rejected.
    pub fn from_edges<I>(n_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) out of range for {n_nodes} nodes"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid(format!("edge ({u}, {v}) has weight {w}")));
            }
            if w == 0.0 {
                continue;
            }
            *acc.entry((u.min(v), u.max(v))).or_insert(0.0) += w;
        }
        Ok(Self::from_pair_map(n_nodes, &acc))
    }

    fn from_pair_map(n_nodes: usize, pairs: &BTreeMap<(usize, usize), f64>) -> Self {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_nodes];
        let mut degrees = vec![0.0; n_nodes];
        for (&(u, v), &w) in pairs {
            if u == v {
                adj[u].push((u, w));
                degrees[u] += 2.0 * w;
            } else {
                adj[u].push((v, w));
                adj[v].push((u, w));
                degrees[u] += w;
                degrees[v] += w;
            }
        }
        let mut indptr = Vec::with_capacity(n_nodes + 1);
        let mut indices = Vec::new();
        let mut weights = Vec::new();
        indptr.push(0);
        for mut row in adj {
            row.sort_unstable_by_key(|&(j, _)| j);
            for (j, w) in row {
                indices.push(j);
                weights.push(w);
            }
            indptr.push(indices.len());
        }
        let total_weight = degrees.iter().sum();
        Graph {
            indptr,
            indices,
            weights,
            degrees,
            total_weight,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.degrees.len()
    }

    /// Number of distinct node pairs carrying weight, self-loops included.
    pub fn n_pairs(&self) -> usize {
        self.edges().count()
    }

    /// Weighted degree per node; self-loops count twice.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    /// Sum of all stubs, `2m`.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Neighbors of `i` with edge weights, sorted by neighbor index.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let range = self.indptr[i]..self.indptr[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(pos) => self.weights[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.weight(i, j) > 0.0
    }

    /// Each distinct pair once, as `(i, j, w)` with `i <= j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_nodes()).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&(j, _)| j >= i)
                .map(move |(j, w)| (i, j, w))
        })
    }

    /// Keeps the pairs for which `keep(i, j, w)` holds (`i <= j`).
    pub fn filter_edges<F>(&self, mut keep: F) -> Graph
    where
        F: FnMut(usize, usize, f64) -> bool,
    {
        let pairs: BTreeMap<(usize, usize), f64> = self
            .edges()
            .filter(|&(i, j, w)| keep(i, j, w))
            .map(|(i, j, w)| ((i, j), w))
            .collect();
        Self::from_pair_map(self.n_nodes(), &pairs)
    }

    /// Component index per node and the number of components.
    pub fn connected_components(&self) -> (Vec<usize>, usize) {
        let n = self.n_nodes();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for (v, _) in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = count;
                        queue.push_back(v);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().1 <= 1
    }

    pub(crate) fn require_connected(&self) -> Result<()> {
        let (_, components) = self.connected_components();
        if components > 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(())
    }

    pub(crate) fn require_positive_degrees(&self) -> Result<()> {
        match self.degrees.iter().position(|&d| d <= 0.0) {
            Some(node) => Err(Error::IsolatedNode { node }),
            None => Ok(()),
        }
    }

    /// Simple random-walk operator `P(i,j) = w(i,j) / d(i)`, with
    /// `P(i,i) = 2 w(i,i) / d(i)` for self-loops.
    pub fn transition_matrix(&self) -> Result<TransitionMatrix> {
        self.require_positive_degrees()?;
        let mut probs = Vec::with_capacity(self.weights.len());
        for i in 0..self.n_nodes() {
            let d = self.degrees[i];
            for (j, w) in self.neighbors(i) {
                let stubs = if j == i { 2.0 * w } else { w };
                probs.push(stubs / d);
            }
        }
        Ok(TransitionMatrix {
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            probs,
        })
    }

    /// A spanning tree chosen by Kruskal on unit costs after a seeded shuffle
    /// of the edge list. Self-loops are never part of the tree.
    pub fn spanning_tree_edges(&self, seed: u64) -> Result<Vec<(usize, usize)>> {
        self.require_connected()?;
        let mut candidates: Vec<(usize, usize)> = self
            .edges()
            .filter(|&(i, j, _)| i != j)
            .map(|(i, j, _)| (i, j))
            .collect();
        candidates.shuffle(&mut rng::named_stream(seed, "spanning-tree"));

        let n = self.n_nodes();
        let mut uf = UnionFind::<usize>::new(n);
        let mut tree = Vec::with_capacity(n.saturating_sub(1));
        for (i, j) in candidates {
            if uf.union(i, j) {
                tree.push((i, j));
                if tree.len() + 1 == n {
                    break;
                }
            }
        }
        Ok(tree)
    }

    pub fn write_edge_list<W: Write>(&self, labels: &NodeLabels, mut out: W) -> Result<()> {
        for (i, j, w) in self.edges() {
            writeln!(out, "{}\t{}\t{}", labels.name(i), labels.name(j), w)?;
        }
        Ok(())
    }
}

/// Row-stochastic simple-random-walk matrix sharing the graph's sparsity.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    probs: Vec<f64>,
}

impl TransitionMatrix {
    pub fn n_nodes(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[range.clone()], &self.probs[range])
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        let (idx, p) = self.row(i);
        match idx.binary_search(&j) {
            Ok(pos) => p[pos],
            Err(_) => 0.0,
        }
    }

    /// `out = x · P` for a dense row vector `x`.
    pub fn left_multiply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, &xk) in x.iter().enumerate() {
            if xk == 0.0 {
                continue;
            }
            let (idx, p) = self.row(k);
            for (&j, &pj) in idx.iter().zip(p) {
                out[j] += xk * pj;
            }
        }
    }
}

/// Mapping between dense node indices and the identifiers found in the input.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeLabels {
    /// Input ids were nonnegative integers and are used as indices directly.
    Identity(usize),
    /// Input ids were interned in order of first appearance.
    Interned(Vec<String>),
}

impl NodeLabels {
    pub fn len(&self) -> usize {
        match self {
            NodeLabels::Identity(n) => *n,
            NodeLabels::Interned(names) => names.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn name(&self, i: usize) -> String {
        match self {
            NodeLabels::Identity(_) => i.to_string(),
            NodeLabels::Interned(names) => names[i].clone(),
        }
    }

    /// Reverse lookup of an input identifier.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        match self {
            NodeLabels::Identity(n) => name.parse::<usize>().ok().filter(|i| i < n),
            NodeLabels::Interned(names) => names.iter().position(|s| s == name),
        }
    }

    /// Writes the `original_id<TAB>dense_index` sidecar.
    pub fn write_mapping<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.len() {
            writeln!(out, "{}\t{}", self.name(i), i)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub labels: NodeLabels,
}

/// Reads a whitespace-separated edge list, `src dst [weight]` per line.
///
/// Blank lines and lines starting with `#` are skipped. When `weighted` is
/// false any third column is ignored and every line counts as weight 1.
/// If every id parses as a nonnegative integer the ids are used as dense
/// indices; otherwise all ids are interned in order of first appearance.
pub fn load_edge_list<R: BufRead>(reader: R, weighted: bool) -> Result<LoadedGraph> {
    let mut records: Vec<(String, String, f64)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected `src dst [weight]`, got {} fields", fields.len()),
            });
        }
        let w = match (weighted, fields.get(2)) {
            (true, Some(raw)) => {
                let w: f64 = raw.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad weight `{raw}`"),
                })?;
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::invalid(format!("line {lineno}: negative weight {w}")));
                }
                w
            }
            _ => 1.0,
        };
        records.push((fields[0].to_string(), fields[1].to_string(), w));
    }

    let numeric: Option<Vec<(usize, usize)>> = records
        .iter()
        .map(|(a, b, _)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
        .collect();

    let (labels, edges) = match numeric {
        Some(pairs) => {
            let n = pairs.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
            let edges: Vec<_> = pairs
                .into_iter()
                .zip(&records)
                .map(|((a, b), r)| (a, b, r.2))
                .collect();
            (NodeLabels::Identity(n), edges)
        }
        None => {
            let mut index: HashMap<String, usize> = HashMap::new();
            let mut names = Vec::new();
            let mut intern = |s: &str| -> usize {
                if let Some(&i) = index.get(s) {
                    return i;
                }
                index.insert(s.to_string(), names.len());
                names.push(s.to_string());
                names.len() - 1
            };
            let edges: Vec<_> = records
                .iter()
                .map(|(a, b, w)| (intern(a), intern(b), *w))
                .collect();
            (NodeLabels::Interned(names), edges)
        }
    };
    let graph = Graph::from_edges(labels.len(), edges)?;
    Ok(LoadedGraph { graph, labels })
}
