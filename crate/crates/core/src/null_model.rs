//! Degree-corrected stochastic block model (dcSBM) null models.
//!
//! A fitted model keeps, for a fixed node grouping, each node's degree, the
//! stub total `D_g` of every group and the block transition matrix
//! `P_SBM(g, g')`: the fraction of group-`g` stubs whose edge ends in `g'`.
//! The window-averaged baseline probability of reaching `j` from `i` is
//!
//! ```text
//! P0(j|i) = d_j / D_{g_j} * [ (1/T) sum_{t=1..T} P_SBM^t ]_{g_i, g_j}
//! ```
//!
//! With a single group this is the soft configuration model (`d_j / 2m`),
//! and with a single group and equal degrees the multigraph Erdős–Rényi
//! model (`1 / N`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use nalgebra::DMatrix;
use rand::distr::Distribution;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Poisson;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeLabels};
use crate::rng;

/// Group label per node; every group in `0..n_groups` has at least one member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeGrouping {
    labels: Vec<usize>,
    n_groups: usize,
}

impl NodeGrouping {
    pub fn new(labels: Vec<usize>, n_groups: usize) -> Result<Self> {
        let mut sizes = vec![0usize; n_groups];
        for (node, &g) in labels.iter().enumerate() {
            if g >= n_groups {
                return Err(Error::invalid(format!(
                    "node {node} has group {g}, expected < {n_groups}"
                )));
            }
            sizes[g] += 1;
        }
        if let Some(g) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::invalid(format!("group {g} is empty")));
        }
        Ok(NodeGrouping { labels, n_groups })
    }

    /// Uses `max(label) + 1` groups.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let n_groups = labels.iter().max().map_or(0, |&m| m + 1);
        Self::new(labels, n_groups)
    }

    pub fn single(n_nodes: usize) -> Self {
        NodeGrouping {
            labels: vec![0; n_nodes],
            n_groups: usize::from(n_nodes > 0),
        }
    }

    /// Every node in its own group.
    pub fn singletons(n_nodes: usize) -> Self {
        NodeGrouping {
            labels: (0..n_nodes).collect(),
            n_groups: n_nodes,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_groups];
        for &g in &self.labels {
            sizes[g] += 1;
        }
        sizes
    }

    /// Reads `node_id<TAB>group_label` lines.
    ///
    /// Group labels are compacted to `0..B` in sorted order (numeric when all
    /// labels are integers). Nodes absent from the file take `default_group`
    /// when one is given, otherwise loading fails.
    pub fn read_tsv<R: BufRead>(
        reader: R,
        nodes: &NodeLabels,
        default_group: Option<&str>,
    ) -> Result<Self> {
        let mut raw: Vec<Option<String>> = vec![None; nodes.len()];
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: "expected `node_id<TAB>group_label`".into(),
                });
            }
            let node = nodes.index_of(fields[0]).ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: format!("unknown node `{}`", fields[0]),
            })?;
            raw[node] = Some(fields[1].to_string());
        }
        let raw: Vec<String> = raw
            .into_iter()
            .enumerate()
            .map(|(i, g)| match (g, default_group) {
                (Some(g), _) => Ok(g),
                (None, Some(d)) => Ok(d.to_string()),
                (None, None) => Err(Error::invalid(format!(
                    "node `{}` has no group (set a default group to allow this)",
                    nodes.name(i)
                ))),
            })
            .collect::<Result<_>>()?;

        let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
        let mut ordered: Vec<&str> = distinct.into_iter().collect();
        if ordered.iter().all(|s| s.parse::<i64>().is_ok()) {
            ordered.sort_by_key(|s| s.parse::<i64>().unwrap());
        }
        let index: BTreeMap<&str, usize> =
            ordered.iter().enumerate().map(|(k, s)| (*s, k)).collect();
        let labels = raw.iter().map(|s| index[s.as_str()]).collect();
        Self::new(labels, ordered.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullKind {
    ErdosRenyi,
    Config,
    Dcsbm,
}

impl fmt::Display for NullKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NullKind::ErdosRenyi => "erdos-renyi",
            NullKind::Config => "config",
            NullKind::Dcsbm => "dcsbm",
        })
    }
}

/// A fitted dcSBM.
#[derive(Debug, Clone)]
pub struct BaselineModel {
    kind: NullKind,
    grouping: NodeGrouping,
    degrees: Vec<f64>,
    group_stubs: Vec<f64>,
    /// Symmetric stub counts between groups; the diagonal counts both ends.
    edge_stubs: DMatrix<f64>,
    block_transition: DMatrix<f64>,
}

/// Fits the dcSBM for a given grouping by counting stubs between groups.
pub fn fit_dcsbm(g: &Graph, grouping: &NodeGrouping) -> Result<BaselineModel> {
    if grouping.n_nodes() != g.n_nodes() {
        return Err(Error::invalid(format!(
            "grouping covers {} nodes, graph has {}",
            grouping.n_nodes(),
            g.n_nodes()
        )));
    }
    g.require_positive_degrees()?;
    let b = grouping.n_groups();
    let mut stubs = DMatrix::zeros(b, b);
    for (i, j, w) in g.edges() {
        let (gi, gj) = (grouping.label(i), grouping.label(j));
        if i == j {
            stubs[(gi, gi)] += 2.0 * w;
        } else {
            stubs[(gi, gj)] += w;
            stubs[(gj, gi)] += w;
        }
    }
    Ok(BaselineModel::from_stubs(
        NullKind::Dcsbm,
        grouping.clone(),
        g.degrees().to_vec(),
        stubs,
    ))
}

/// Soft configuration model: the dcSBM with one group.
pub fn config_model_baseline(g: &Graph) -> Result<BaselineModel> {
    let mut model = fit_dcsbm(g, &NodeGrouping::single(g.n_nodes()))?;
    model.kind = NullKind::Config;
    Ok(model)
}

/// Multigraph Erdős–Rényi model: one group, equal degrees.
pub fn erdos_renyi_baseline(n_nodes: usize) -> Result<BaselineModel> {
    if n_nodes == 0 {
        return Err(Error::invalid("Erdős–Rényi baseline needs at least one node"));
    }
    let stubs = DMatrix::from_element(1, 1, n_nodes as f64);
    Ok(BaselineModel::from_stubs(
        NullKind::ErdosRenyi,
        NodeGrouping::single(n_nodes),
        vec![1.0; n_nodes],
        stubs,
    ))
}

impl BaselineModel {
    fn from_stubs(
        kind: NullKind,
        grouping: NodeGrouping,
        degrees: Vec<f64>,
        edge_stubs: DMatrix<f64>,
    ) -> Self {
        let b = grouping.n_groups();
        let group_stubs: Vec<f64> = (0..b).map(|g| edge_stubs.row(g).sum()).collect();
        let mut block_transition = edge_stubs.clone();
        for (g, total) in group_stubs.iter().enumerate() {
            block_transition.row_mut(g).iter_mut().for_each(|v| *v /= total);
        }
        BaselineModel {
            kind,
            grouping,
            degrees,
            group_stubs,
            edge_stubs,
            block_transition,
        }
    }

    pub fn kind(&self) -> NullKind {
        self.kind
    }

    /// Short identifier such as `config` or `dcsbm(B=3)`.
    pub fn descriptor(&self) -> String {
        match self.kind {
            NullKind::Dcsbm => format!("dcsbm(B={})", self.grouping.n_groups()),
            kind => kind.to_string(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.degrees.len()
    }

    pub fn grouping(&self) -> &NodeGrouping {
        &self.grouping
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// `D_g`, the stub total of each group.
    pub fn group_stubs(&self) -> &[f64] {
        &self.group_stubs
    }

    pub fn edge_stubs(&self) -> &DMatrix<f64> {
        &self.edge_stubs
    }

    /// `P_SBM`, row-stochastic.
    pub fn block_transition(&self) -> &DMatrix<f64> {
        &self.block_transition
    }

    /// Stationary node distribution of the null walk, `d_j / sum(d)`.
    pub fn stationary(&self) -> Vec<f64> {
        let total: f64 = self.degrees.iter().sum();
        self.degrees.iter().map(|d| d / total).collect()
    }

    /// Precomputes `(1/T) sum_{t=1..T} P_SBM^t` for repeated queries.
    pub fn windowed(&self, window: usize) -> Result<WindowedBaseline> {
        if window == 0 {
            return Err(Error::invalid("window size must be at least 1"));
        }
        let avg = window_average(&self.block_transition, window);
        let factor = self
            .degrees
            .iter()
            .zip(&self.grouping.labels)
            .map(|(d, &g)| d / self.group_stubs[g])
            .collect();
        Ok(WindowedBaseline {
            window,
            avg,
            factor,
            labels: self.grouping.labels.clone(),
        })
    }

    /// `P0(·|i)` as a dense probability vector.
    pub fn baseline_row(&self, i: usize, window: usize) -> Result<Vec<f64>> {
        Ok(self.windowed(window)?.row(i))
    }

    /// Draws a Poisson multigraph from the model.
    pub fn sample(&self, seed: u64) -> Result<Graph> {
        DcsbmSampler::new(
            self.degrees.clone(),
            self.grouping.clone(),
            self.edge_stubs.clone(),
        )?
        .sample(seed)
    }
}

/// `(1/T) sum_{t=1..T} M^t` by iterated multiplication.
pub(crate) fn window_average(m: &DMatrix<f64>, window: usize) -> DMatrix<f64> {
    let mut power = m.clone();
    let mut acc = m.clone();
    for _ in 1..window {
        power = &power * m;
        acc += &power;
    }
    acc / window as f64
}

/// Baseline probabilities for a fixed window size.
#[derive(Debug, Clone)]
pub struct WindowedBaseline {
    window: usize,
    avg: DMatrix<f64>,
    factor: Vec<f64>,
    labels: Vec<usize>,
}

impl WindowedBaseline {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn n_nodes(&self) -> usize {
        self.factor.len()
    }

    /// `P0(j|i)`.
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.factor[j] * self.avg[(self.labels[i], self.labels[j])]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_nodes()).map(|j| self.prob(i, j)).collect()
    }
}

/// Poisson multigraph sampler for a dcSBM given node weights, groups and
/// a symmetric matrix of expected stub counts between groups.
///
/// For groups `g != g'` the number of edges is Poisson with mean
/// `stubs[g][g']`; within a group it is Poisson with mean `stubs[g][g] / 2`.
/// Endpoints are drawn in proportion to node weight inside their group, so
/// each pair receives Poisson weight with mean
/// `d_i d_j stubs[g_i][g_j] / (D_{g_i} D_{g_j})` (halved for self-loops),
/// and node `i` has expected degree `d_i * rowsum_g(stubs) / D_g`.
#[derive(Debug, Clone)]
pub struct DcsbmSampler {
    n_nodes: usize,
    edge_stubs: DMatrix<f64>,
    members: Vec<Vec<usize>>,
    pickers: Vec<WeightedAliasIndex<f64>>,
}

impl DcsbmSampler {
    pub fn new(degrees: Vec<f64>, grouping: NodeGrouping, edge_stubs: DMatrix<f64>) -> Result<Self> {
        let b = grouping.n_groups();
        if degrees.len() != grouping.n_nodes() {
            return Err(Error::invalid("degree vector and grouping disagree in length"));
        }
        if edge_stubs.nrows() != b || edge_stubs.ncols() != b {
            return Err(Error::invalid(format!("stub matrix must be {b}x{b}")));
        }
        for g in 0..b {
            for h in 0..b {
                let v = edge_stubs[(g, h)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::invalid(format!("stub count ({g},{h}) = {v}")));
                }
                if (v - edge_stubs[(h, g)]).abs() > 1e-9 * (1.0 + v.abs()) {
                    return Err(Error::invalid("stub matrix must be symmetric"));
                }
            }
        }
        if degrees.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::invalid("degrees must be finite and nonnegative"));
        }
        let mut members = vec![Vec::new(); b];
        for (i, &g) in grouping.labels().iter().enumerate() {
            members[g].push(i);
        }
        let pickers = members
            .iter()
            .enumerate()
            .map(|(g, m)| {
                let w: Vec<f64> = m.iter().map(|&i| degrees[i]).collect();
                WeightedAliasIndex::new(w)
                    .map_err(|e| Error::invalid(format!("group {g} has no usable degree: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(DcsbmSampler {
            n_nodes: degrees.len(),
            edge_stubs,
            members,
            pickers,
        })
    }

    pub fn sample(&self, seed: u64) -> Result<Graph> {
        let mut rng = rng::named_stream(seed, "dcsbm");
        let b = self.members.len();
        let mut edges = Vec::new();
        for g in 0..b {
            for h in g..b {
                let mean = if g == h {
                    self.edge_stubs[(g, g)] / 2.0
                } else {
                    self.edge_stubs[(g, h)]
                };
                if mean <= 0.0 {
                    continue;
                }
                let count = Poisson::new(mean)
                    .map_err(|e| Error::invalid(format!("Poisson mean {mean}: {e}")))?
                    .sample(&mut rng) as usize;
                for _ in 0..count {
                    let i = self.members[g][self.pickers[g].sample(&mut rng)];
                    let j = self.members[h][self.pickers[h].sample(&mut rng)];
                    edges.push((i, j, 1.0));
                }
            }
        }
        Graph::from_edges(self.n_nodes, edges)
    }
}
