//! Window-averaged random-walk statistics `P_d(j|i)`.
//!
//! Three estimators share one output type:
//!
//! * exact: `(1/T) sum_{t=1..T} P^t` by sparse row propagation,
//! * empirical: forward-window context counts from simulated walks,
//! * block approximation: the exact first step followed by `T-1` steps of a
//!   coarse dcSBM fitted on a node partition.

use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, TransitionMatrix};
use crate::null_model::{fit_dcsbm, NodeGrouping};
use crate::rng;

/// Largest graph accepted by [`exact_window_transition`].
pub const DEFAULT_EXACT_NODE_CAP: usize = 20_000;

/// Block count used when none is specified.
pub const DEFAULT_BLOCKS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    Exact,
    Empirical,
    BlockApprox,
}

#[derive(Debug, Clone)]
pub struct WindowTransition {
    window: usize,
    mode: WindowMode,
    n_nodes: usize,
    store: RowStore,
    missing: Vec<usize>,
}

#[derive(Debug, Clone)]
enum RowStore {
    Sparse(SparseRows),
    Block(BlockRows),
}

#[derive(Debug, Clone)]
struct SparseRows {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRows {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for row in rows {
            for (j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        SparseRows {
            indptr,
            indices,
            values,
        }
    }
}

/// Factored rows of the block approximation; materialised one row at a time.
#[derive(Debug, Clone)]
struct BlockRows {
    step: TransitionMatrix,
    labels: Vec<usize>,
    /// `d_j / D_{g_j}`
    factor: Vec<f64>,
    /// `sum_{s=1..T-1} P_SBM^s`, row-major
    higher: Vec<f64>,
    n_blocks: usize,
}

impl BlockRows {
    fn row(&self, i: usize, window: usize) -> Vec<(usize, f64)> {
        let b = self.n_blocks;
        let n = self.labels.len();
        let mut dense = vec![0.0; n];
        let (idx, probs) = self.step.row(i);
        if window > 1 {
            let mut first = vec![0.0; b];
            for (&k, &p) in idx.iter().zip(probs) {
                first[self.labels[k]] += p;
            }
            let mut reach = vec![0.0; b];
            for (g, &q) in first.iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                let s = &self.higher[g * b..(g + 1) * b];
                for (r, v) in reach.iter_mut().zip(s) {
                    *r += q * v;
                }
            }
            for (j, slot) in dense.iter_mut().enumerate() {
                *slot = self.factor[j] * reach[self.labels[j]];
            }
        }
        for (&j, &p) in idx.iter().zip(probs) {
            dense[j] += p;
        }
        let scale = 1.0 / window as f64;
        dense
            .into_iter()
            .enumerate()
            .filter(|&(_, v)| v > 0.0)
            .map(|(j, v)| (j, v * scale))
            .collect()
    }
}

impl WindowTransition {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn mode(&self) -> WindowMode {
        self.mode
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Centers that never appeared in the corpus (empirical mode only);
    /// their rows are empty.
    pub fn missing_rows(&self) -> &[usize] {
        &self.missing
    }

    /// Positive entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        match &self.store {
            RowStore::Sparse(s) => {
                let range = s.indptr[i]..s.indptr[i + 1];
                s.indices[range.clone()]
                    .iter()
                    .copied()
                    .zip(s.values[range].iter().copied())
                    .collect()
            }
            RowStore::Block(b) => b.row(i, self.window),
        }
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes];
        for (j, v) in self.row(i) {
            out[j] = v;
        }
        out
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        let row = self.row(i);
        match row.binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) => row[pos].1,
            Err(_) => 0.0,
        }
    }
}

/// Exact `(1/T) sum_{t=1..T} P^t`, refusing graphs above the default cap.
pub fn exact_window_transition(g: &Graph, window: usize) -> Result<WindowTransition> {
    exact_window_transition_capped(g, window, DEFAULT_EXACT_NODE_CAP)
}

pub fn exact_window_transition_capped(
    g: &Graph,
    window: usize,
    node_cap: usize,
) -> Result<WindowTransition> {
    if window == 0 {
        return Err(Error::invalid("window size must be at least 1"));
    }
    let n = g.n_nodes();
    if n > node_cap {
        return Err(Error::MemoryCap {
            n_nodes: n,
            cap: node_cap,
        });
    }
    g.require_connected()?;
    let p = g.transition_matrix()?;
    let scale = 1.0 / window as f64;
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut x = vec![0.0; n];
            let mut next = vec![0.0; n];
            let mut acc = vec![0.0; n];
            x[i] = 1.0;
            for _ in 0..window {
                p.left_multiply(&x, &mut next);
                std::mem::swap(&mut x, &mut next);
                for (a, v) in acc.iter_mut().zip(&x) {
                    *a += v;
                }
            }
            acc.into_iter()
                .enumerate()
                .filter(|&(_, v)| v > 0.0)
                .map(|(j, v)| (j, v * scale))
                .collect()
        })
        .collect();
    Ok(WindowTransition {
        window,
        mode: WindowMode::Exact,
        n_nodes: n,
        store: RowStore::Sparse(SparseRows::from_rows(rows)),
        missing: Vec::new(),
    })
}

/// A set of equal-length node sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    n_nodes: usize,
    walk_length: usize,
    walkers_per_node: Option<usize>,
    seed: Option<u64>,
    sequences: Vec<Vec<usize>>,
}

impl WalkCorpus {
    /// Wraps externally produced sequences.
    pub fn from_sequences(n_nodes: usize, sequences: Vec<Vec<usize>>) -> Result<Self> {
        let walk_length = sequences.first().map_or(0, Vec::len);
        for (k, s) in sequences.iter().enumerate() {
            if s.len() != walk_length {
                return Err(Error::invalid(format!(
                    "sequence {k} has length {}, expected {walk_length}",
                    s.len()
                )));
            }
            if let Some(&bad) = s.iter().find(|&&v| v >= n_nodes) {
                return Err(Error::invalid(format!("sequence {k} visits node {bad} >= {n_nodes}")));
            }
        }
        Ok(WalkCorpus {
            n_nodes,
            walk_length,
            walkers_per_node: None,
            seed: None,
            sequences,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn walk_length(&self) -> usize {
        self.walk_length
    }

    pub fn walkers_per_node(&self) -> Option<usize> {
        self.walkers_per_node
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn sequences(&self) -> &[Vec<usize>] {
        &self.sequences
    }

    pub fn total_steps(&self) -> usize {
        self.sequences.len() * self.walk_length
    }

    /// Fraction of all positions occupied by each node.
    pub fn visit_frequency(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.n_nodes];
        for s in &self.sequences {
            for &v in s {
                counts[v] += 1.0;
            }
        }
        let total = self.total_steps().max(1) as f64;
        counts.iter_mut().for_each(|c| *c /= total);
        counts
    }

    /// Center–context pairs with a forward window. The last `window`
    /// positions of each walk are never centers, so every center has
    /// exactly `window` contexts.
    pub fn pairs(&self, window: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let centers = self.walk_length.saturating_sub(window);
        self.sequences.iter().flat_map(move |s| {
            (0..centers).flat_map(move |p| (1..=window).map(move |t| (s[p], s[p + t])))
        })
    }

    pub fn n_pairs(&self, window: usize) -> usize {
        self.sequences.len() * self.walk_length.saturating_sub(window) * window
    }

    /// One walk per line, space-separated node indices.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.sequences {
            let line: Vec<String> = s.iter().map(usize::to_string).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Reads the format written by [`WalkCorpus::write_text`]; `#` lines are
    /// skipped. The node count is `max id + 1` unless `n_nodes` is given.
    pub fn read_text<R: BufRead>(reader: R, n_nodes: Option<usize>) -> Result<Self> {
        let mut sequences = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let seq = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        message: format!("bad node id `{tok}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            sequences.push(seq);
        }
        let observed = sequences.iter().flatten().map(|&v| v + 1).max().unwrap_or(0);
        Self::from_sequences(n_nodes.unwrap_or(observed), sequences)
    }
}

/// Unbiased simple random walks, `walkers_per_node` from every node.
///
/// Walk `k = i * walkers_per_node + r` uses its own ChaCha stream, so the
/// corpus does not depend on thread scheduling.
pub fn simulate_walks(
    g: &Graph,
    walkers_per_node: usize,
    walk_length: usize,
    seed: u64,
) -> Result<WalkCorpus> {
    if walk_length == 0 {
        return Err(Error::invalid("walk length must be at least 1"));
    }
    g.require_connected()?;
    let p = g.transition_matrix()?;
    let n = g.n_nodes();
    let cumulative: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            let mut c: Vec<f64> = p
                .row(i)
                .1
                .iter()
                .map(|v| {
                    acc += v;
                    acc
                })
                .collect();
            if let Some(last) = c.last_mut() {
                *last = 1.0;
            }
            c
        })
        .collect();

    let sequences: Vec<Vec<usize>> = (0..n * walkers_per_node)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::indexed_stream(seed, k as u64);
            let mut v = k / walkers_per_node;
            let mut seq = Vec::with_capacity(walk_length);
            seq.push(v);
            for _ in 1..walk_length {
                let u: f64 = rng.random();
                let c = &cumulative[v];
                let pos = c.partition_point(|&x| x <= u).min(c.len() - 1);
                v = p.row(v).0[pos];
                seq.push(v);
            }
            seq
        })
        .collect();

    Ok(WalkCorpus {
        n_nodes: n,
        walk_length,
        walkers_per_node: Some(walkers_per_node),
        seed: Some(seed),
        sequences,
    })
}

/// Context frequencies per center over a forward window of `window` steps.
pub fn empirical_window_transition(corpus: &WalkCorpus, window: usize) -> Result<WindowTransition> {
    if window == 0 || window >= corpus.walk_length() {
        return Err(Error::invalid(format!(
            "window {window} must satisfy 1 <= window < walk length {}",
            corpus.walk_length()
        )));
    }
    let n = corpus.n_nodes();
    let mut pairs: Vec<(usize, usize)> = corpus.pairs(window).collect();
    pairs.par_sort_unstable();

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut totals = vec![0usize; n];
    for chunk in pairs.chunk_by(|a, b| a == b) {
        let (i, j) = chunk[0];
        rows[i].push((j, chunk.len() as f64));
        totals[i] += chunk.len();
    }
    let mut missing = Vec::new();
    for (i, row) in rows.iter_mut().enumerate() {
        if totals[i] == 0 {
            missing.push(i);
            continue;
        }
        let total = totals[i] as f64;
        row.iter_mut().for_each(|(_, v)| *v /= total);
    }
    Ok(WindowTransition {
        window,
        mode: WindowMode::Empirical,
        n_nodes: n,
        store: RowStore::Sparse(SparseRows::from_rows(rows)),
        missing,
    })
}

/// Bins nodes by ascending degree into `n_blocks` groups of roughly equal
/// stub mass. Ties are broken by node index.
pub fn degree_partition(g: &Graph, n_blocks: usize) -> Result<NodeGrouping> {
    let n = g.n_nodes();
    if n_blocks == 0 || n_blocks > n {
        return Err(Error::invalid(format!(
            "block count {n_blocks} must be between 1 and the node count {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| g.degree(a).total_cmp(&g.degree(b)).then(a.cmp(&b)));
    let target = g.total_weight() / n_blocks as f64;
    let mut labels = vec![0; n];
    let mut block = 0;
    let mut filled = 0usize;
    let mut mass = 0.0;
    for (k, &i) in order.iter().enumerate() {
        let blocks_after = n_blocks - block - 1;
        if filled > 0 && blocks_after > 0 && (mass >= (block + 1) as f64 * target || n - k == blocks_after)
        {
            block += 1;
            filled = 0;
        }
        labels[i] = block;
        filled += 1;
        mass += g.degree(i);
    }
    NodeGrouping::new(labels, n_blocks)
}

/// Block approximation of `P_d` with a `n_blocks`-group dcSBM.
///
/// Row `i` is `(1/T) [ P(i,·) + sum_j d_j / D_{g_j} (q_i S)_{g_j} ]`, where
/// `q_i` is the first step aggregated to blocks and
/// `S = sum_{s=1..T-1} P_SBM^s`. With one node per block this is exact.
/// `partition` overrides the default degree binning and must have
/// `n_blocks` groups.
pub fn block_approx_transition(
    g: &Graph,
    n_blocks: usize,
    window: usize,
    partition: Option<&NodeGrouping>,
) -> Result<WindowTransition> {
    if window == 0 {
        return Err(Error::invalid("window size must be at least 1"));
    }
    let n = g.n_nodes();
    if n_blocks == 0 || n_blocks > n {
        return Err(Error::invalid(format!(
            "block count {n_blocks} must be between 1 and the node count {n}"
        )));
    }
    let grouping = match partition {
        Some(p) if p.n_groups() != n_blocks || p.n_nodes() != n => {
            return Err(Error::invalid(format!(
                "partition has {} groups over {} nodes, expected {n_blocks} over {n}",
                p.n_groups(),
                p.n_nodes()
            )))
        }
        Some(p) => p.clone(),
        None => degree_partition(g, n_blocks)?,
    };
    let step = g.transition_matrix()?;
    let model = fit_dcsbm(g, &grouping)?;

    let b = n_blocks;
    let sbm = model.block_transition();
    let sparse_sbm: Vec<Vec<(usize, f64)>> = (0..b)
        .map(|r| (0..b).map(|c| (c, sbm[(r, c)])).filter(|&(_, v)| v > 0.0).collect())
        .collect();
    let mut higher = vec![0.0; b * b];
    if window > 1 {
        let mut power: Vec<f64> = (0..b * b).map(|k| sbm[(k / b, k % b)]).collect();
        higher.copy_from_slice(&power);
        for _ in 2..window {
            let mut next = vec![0.0; b * b];
            next.par_chunks_mut(b).enumerate().for_each(|(r, out)| {
                for (c, &pv) in power[r * b..(r + 1) * b].iter().enumerate() {
                    if pv == 0.0 {
                        continue;
                    }
                    for &(k, sv) in &sparse_sbm[c] {
                        out[k] += pv * sv;
                    }
                }
            });
            power = next;
            for (h, p) in higher.iter_mut().zip(&power) {
                *h += p;
            }
        }
    }
    let factor = g
        .degrees()
        .iter()
        .zip(grouping.labels())
        .map(|(d, &l)| d / model.group_stubs()[l])
        .collect();
    Ok(WindowTransition {
        window,
        mode: WindowMode::BlockApprox,
        n_nodes: n,
        store: RowStore::Block(BlockRows {
            step,
            labels: grouping.labels().to_vec(),
            factor,
            higher,
            n_blocks: b,
        }),
        missing: Vec::new(),
    })
}

/// Analytic stationary distribution `d_j / 2m`.
pub fn stationary_visit_frequency(g: &Graph) -> Result<Vec<f64>> {
    g.require_connected()?;
    let total = g.total_weight();
    if total <= 0.0 {
        return Err(Error::invalid("graph has no edges"));
    }
    Ok(g.degrees().iter().map(|d| d / total).collect())
}

/// Pearson correlation between two dense vectors; zero when either is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Mean over centers of the Pearson correlation between corresponding rows.
pub fn mean_row_correlation(a: &WindowTransition, b: &WindowTransition) -> f64 {
    let n = a.n_nodes();
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| pearson(&a.dense_row(i), &b.dense_row(i)))
        .sum();
    total / n as f64
}
