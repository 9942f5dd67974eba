//! Evaluation protocols: link prediction with spanning-tree-preserving edge
//! removal, community similarity AUC, a planted-partition generator, and
//! JSONL/CSV reporting.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::null_model::{DcsbmSampler, NodeGrouping, WindowedBaseline};
use crate::residual::{residual2vec, Embedding, R2vConfig};
use crate::rng;

#[derive(Debug, Clone)]
pub struct LinkPredictionSplit {
    pub train_graph: Graph,
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
    pub rho: f64,
    pub seed: u64,
    /// Fewer positives removed than `round(rho * M)`.
    pub removal_capped: bool,
    /// Fewer negatives than positives because the graph is too dense.
    pub negatives_capped: bool,
}

/// Removes `round(rho * M)` edges (`M` counts non-loop edges) chosen
/// uniformly among those outside a random spanning tree, and samples as many
/// node pairs that are not edges of `g`.
pub fn split_for_link_prediction(g: &Graph, rho: f64, seed: u64) -> Result<LinkPredictionSplit> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("rho must be in (0, 1), got {rho}")));
    }
    let tree: HashSet<(usize, usize)> = g.spanning_tree_edges(seed)?.into_iter().collect();
    let mut removable: Vec<(usize, usize)> = g
        .edges()
        .filter(|&(i, j, _)| i != j && !tree.contains(&(i, j)))
        .map(|(i, j, _)| (i, j))
        .collect();
    let n_edges = tree.len() + removable.len();
    let requested = (rho * n_edges as f64).round() as usize;
    let removal_capped = requested > removable.len();
    if removal_capped {
        log::warn!(
            "requested {requested} removed edges but only {} lie outside the spanning tree",
            removable.len()
        );
    }
    removable.shuffle(&mut rng::named_stream(seed, "split-edges"));
    removable.truncate(requested);
    let mut positives = removable;
    positives.sort_unstable();
    let removed: HashSet<(usize, usize)> = positives.iter().copied().collect();
    let train_graph = g.filter_edges(|i, j, _| !removed.contains(&(i, j)));

    let (negatives, negatives_capped) = sample_non_edges(g, positives.len(), seed)?;
    Ok(LinkPredictionSplit {
        train_graph,
        positives,
        negatives,
        rho,
        seed,
        removal_capped,
        negatives_capped,
    })
}

fn sample_non_edges(g: &Graph, count: usize, seed: u64) -> Result<(Vec<(usize, usize)>, bool)> {
    let n = g.n_nodes();
    let off_diagonal_edges = g.edges().filter(|&(i, j, _)| i != j).count();
    let available = n * n.saturating_sub(1) / 2 - off_diagonal_edges;
    let mut rng = rng::named_stream(seed, "split-negatives");
    let capped = count > available;
    if capped {
        log::warn!("only {available} non-edges available for {count} negatives");
    }
    let target = count.min(available);
    if target == 0 {
        return Ok((Vec::new(), capped));
    }
    if available < 2 * target {
        // Dense graph: enumerate instead of rejecting.
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !g.has_edge(i, j))
            .collect();
        all.shuffle(&mut rng);
        all.truncate(target);
        return Ok((all, capped));
    }
    let mut chosen = HashSet::with_capacity(target);
    let mut out = Vec::with_capacity(target);
    while out.len() < target {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let pair = (a.min(b), a.max(b));
        if g.has_edge(pair.0, pair.1) || !chosen.insert(pair) {
            continue;
        }
        out.push(pair);
    }
    Ok((out, capped))
}

/// Additive terms of the link score `u_i . u_j + z`.
#[derive(Debug, Clone)]
pub enum Offsets {
    None,
    /// `z_i + z_j`.
    Node(Vec<f64>),
    /// `ln P0(j|i) + ln P0(i|j)`.
    Pairwise(WindowedBaseline),
}

/// `z_j = ln(d_j / 2m)`, the configuration-model log baseline.
pub fn degree_offsets(g: &Graph) -> Vec<f64> {
    let total = g.total_weight();
    g.degrees().iter().map(|d| (d / total).ln()).collect()
}

pub fn link_scores(e: &Embedding, offsets: &Offsets, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    let n = e.n_nodes();
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= n || j >= n) {
        return Err(Error::invalid(format!("pair ({i}, {j}) outside {n} nodes")));
    }
    match offsets {
        Offsets::Node(z) if z.len() != n => {
            return Err(Error::invalid("offset vector length differs from node count"))
        }
        Offsets::Pairwise(b) if b.n_nodes() != n => {
            return Err(Error::invalid("baseline node count differs from embedding"))
        }
        _ => {}
    }
    Ok(pairs
        .iter()
        .map(|&(i, j)| {
            let dot = e.center_dot(i, j);
            match offsets {
                Offsets::None => dot,
                Offsets::Node(z) => dot + z[i] + z[j],
                Offsets::Pairwise(b) => dot + b.prob(i, j).ln() + b.prob(j, i).ln(),
            }
        })
        .collect())
}

/// Probability that a random positive outscores a random negative, ties
/// counted one half. Exact, `O(n log n)`.
pub fn auc_roc(positive: &[f64], negative: &[f64]) -> Result<f64> {
    if positive.is_empty() || negative.is_empty() {
        return Err(Error::invalid("AUC needs at least one score in each class"));
    }
    if positive.iter().chain(negative).any(|s| s.is_nan()) {
        return Err(Error::invalid("AUC scores must not be NaN"));
    }
    let mut all: Vec<(f64, bool)> = positive
        .iter()
        .map(|&s| (s, true))
        .chain(negative.iter().map(|&s| (s, false)))
        .collect();
    all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    // Twice the positive rank sum, with ties sharing their mean rank.
    let mut doubled_rank_sum: u128 = 0;
    let mut start = 0;
    while start < all.len() {
        let mut end = start + 1;
        while end < all.len() && all[end].0 == all[start].0 {
            end += 1;
        }
        let positives_in_run = all[start..end].iter().filter(|x| x.1).count() as u128;
        doubled_rank_sum += positives_in_run * (start + end + 1) as u128;
        start = end;
    }
    let np = positive.len() as u128;
    let nn = negative.len() as u128;
    let doubled_u = doubled_rank_sum - np * (np + 1);
    Ok(doubled_u as f64 / (2 * np * nn) as f64)
}

/// Degree sequence of a planted-partition graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DegreeSpec {
    Regular(f64),
    /// Density `∝ x^(-tau)` on `[d_min, d_max]`.
    PowerLaw { tau: f64, d_min: f64, d_max: f64 },
}

impl DegreeSpec {
    /// Power law with `tau = 3` on `[10, 50]`.
    pub fn default_power_law() -> Self {
        DegreeSpec::PowerLaw {
            tau: 3.0,
            d_min: 10.0,
            d_max: 50.0,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let max_degree = (n.saturating_sub(1)) as f64;
        match *self {
            DegreeSpec::Regular(d) => {
                if !(d > 0.0 && d <= max_degree) {
                    return Err(Error::invalid(format!(
                        "regular degree {d} infeasible for {n} nodes"
                    )));
                }
            }
            DegreeSpec::PowerLaw { tau, d_min, d_max } => {
                if !(tau.is_finite() && tau > 0.0) {
                    return Err(Error::invalid(format!("exponent {tau} must be positive")));
                }
                if !(d_min > 0.0 && d_min <= d_max && d_max <= max_degree) {
                    return Err(Error::invalid(format!(
                        "degree range [{d_min}, {d_max}] infeasible for {n} nodes"
                    )));
                }
            }
        }
        Ok(())
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            DegreeSpec::Regular(d) => d,
            DegreeSpec::PowerLaw { tau, d_min, d_max } => {
                let u: f64 = rng.random();
                if (tau - 1.0).abs() < 1e-12 {
                    d_min * (d_max / d_min).powf(u)
                } else {
                    let e = 1.0 - tau;
                    let (lo, hi) = (d_min.powf(e), d_max.powf(e));
                    (lo + u * (hi - lo)).powf(1.0 / e)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedPartition {
    pub graph: Graph,
    pub labels: NodeGrouping,
    pub mu: f64,
    pub degree_spec: DegreeSpec,
    /// Expected degree of every node under the generating model.
    pub expected_degrees: Vec<f64>,
}

/// Degree-corrected block graph where a fraction `mu` of each group's stubs
/// is spread evenly over the other groups. Nodes are assigned to groups so
/// that group stub totals are balanced.
pub fn generate_planted_partition(
    n: usize,
    n_groups: usize,
    mu: f64,
    spec: DegreeSpec,
    seed: u64,
) -> Result<PlantedPartition> {
    if n_groups < 2 || n_groups > n {
        return Err(Error::invalid(format!(
            "need 2 <= groups <= nodes, got {n_groups} groups for {n} nodes"
        )));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::invalid(format!("mu {mu} outside [0, 1]")));
    }
    spec.validate(n)?;

    let mut deg_rng = rng::named_stream(seed, "planted-degrees");
    let degrees: Vec<f64> = (0..n).map(|_| spec.draw(&mut deg_rng)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| degrees[b].total_cmp(&degrees[a]).then(a.cmp(&b)));
    let mut labels = vec![0; n];
    let mut stubs = vec![0.0f64; n_groups];
    let mut counts = vec![0usize; n_groups];
    for (rank, &i) in order.iter().enumerate() {
        // The last nodes go to empty groups if any remain.
        let empty = counts.iter().filter(|&&c| c == 0).count();
        let g = if empty >= n - rank {
            counts.iter().position(|&c| c == 0).unwrap()
        } else {
            (0..n_groups)
                .min_by(|&a, &b| stubs[a].total_cmp(&stubs[b]))
                .unwrap()
        };
        labels[i] = g;
        stubs[g] += degrees[i];
        counts[g] += 1;
    }
    let grouping = NodeGrouping::new(labels, n_groups)?;
    let mean_stubs = stubs.iter().sum::<f64>() / n_groups as f64;
    let off = mu * mean_stubs / (n_groups - 1) as f64;
    let edge_stubs = DMatrix::from_fn(n_groups, n_groups, |g, h| {
        if g == h {
            (1.0 - mu) * mean_stubs
        } else {
            off
        }
    });
    let expected_degrees = degrees
        .iter()
        .zip(grouping.labels())
        .map(|(d, &g)| d * mean_stubs / stubs[g])
        .collect();
    let sampler = DcsbmSampler::new(degrees, grouping.clone(), edge_stubs)?;
    let graph = sampler.sample(rng::child_seed(seed, "planted-graph", 0))?;
    Ok(PlantedPartition {
        graph,
        labels: grouping,
        mu,
        degree_spec: spec,
        expected_degrees,
    })
}

/// Redraws with derived seeds until the sampled graph is connected.
pub fn generate_connected_planted_partition(
    n: usize,
    n_groups: usize,
    mu: f64,
    spec: DegreeSpec,
    seed: u64,
    max_attempts: usize,
) -> Result<PlantedPartition> {
    let mut last_components = 0;
    for attempt in 0..max_attempts.max(1) {
        let s = if attempt == 0 {
            seed
        } else {
            rng::child_seed(seed, "planted-retry", attempt as u64)
        };
        let pp = generate_planted_partition(n, n_groups, mu, spec, s)?;
        let (_, components) = pp.graph.connected_components();
        if components == 1 {
            return Ok(pp);
        }
        last_components = components;
    }
    Err(Error::Disconnected {
        components: last_components,
    })
}

/// Fraction of edge weight joining different groups (self-loops count as
/// within-group).
pub fn inter_group_fraction(g: &Graph, labels: &NodeGrouping) -> f64 {
    let (mut inter, mut total) = (0.0, 0.0);
    for (i, j, w) in g.edges() {
        total += w;
        if labels.label(i) != labels.label(j) {
            inter += w;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        inter / total
    }
}

/// AUC of cosine similarity between same-group and different-group pairs,
/// over `n_pairs` uniformly sampled pairs of distinct nodes.
pub fn community_similarity_auc(
    e: &Embedding,
    labels: &NodeGrouping,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    let n = e.n_nodes();
    if labels.n_nodes() != n {
        return Err(Error::invalid("labels and embedding differ in node count"));
    }
    if n < 2 || n_pairs == 0 {
        return Err(Error::invalid("need at least two nodes and one pair"));
    }
    let mut rng = rng::named_stream(seed, "community-pairs");
    for _ in 0..2 {
        let (mut same, mut diff) = (Vec::new(), Vec::new());
        for _ in 0..n_pairs {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let s = e.cosine(i, j);
            if labels.label(i) == labels.label(j) {
                same.push(s);
            } else {
                diff.push(s);
            }
        }
        if !same.is_empty() && !diff.is_empty() {
            return auc_roc(&same, &diff);
        }
    }
    Err(Error::invalid(
        "sampled pairs fell into a single class twice",
    ))
}

/// How link scores are offset in [`link_prediction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffsetMode {
    None,
    Degree,
    Pairwise,
}

impl OffsetMode {
    pub fn name(self) -> &'static str {
        match self {
            OffsetMode::None => "none",
            OffsetMode::Degree => "degree",
            OffsetMode::Pairwise => "pairwise",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinkPredictionOutcome {
    pub split: LinkPredictionSplit,
    pub aucs: Vec<(OffsetMode, f64)>,
    pub wall_time_ms: f64,
}

/// Splits, embeds the train graph and scores positives against negatives
/// under each requested offset mode.
pub fn link_prediction(
    g: &Graph,
    cfg: &R2vConfig,
    rho: f64,
    seed: u64,
    modes: &[OffsetMode],
) -> Result<LinkPredictionOutcome> {
    let start = Instant::now();
    let split = split_for_link_prediction(g, rho, seed)?;
    if split.positives.is_empty() || split.negatives.is_empty() {
        return Err(Error::invalid("split produced no positive or negative pairs"));
    }
    let mut cfg = cfg.clone();
    cfg.svd.seed = rng::child_seed(seed, "svd", 0);
    let train = &split.train_graph;
    let e = residual2vec(train, &cfg)?;
    let mut aucs = Vec::with_capacity(modes.len());
    for &mode in modes {
        let offsets = match mode {
            OffsetMode::None => Offsets::None,
            OffsetMode::Degree => Offsets::Node(degree_offsets(train)),
            OffsetMode::Pairwise => Offsets::Pairwise(cfg.null.fit(train)?.windowed(cfg.window)?),
        };
        let pos = link_scores(&e, &offsets, &split.positives)?;
        let neg = link_scores(&e, &offsets, &split.negatives)?;
        aucs.push((mode, auc_roc(&pos, &neg)?));
    }
    Ok(LinkPredictionOutcome {
        split,
        aucs,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// One benchmark measurement, serialized as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub task: String,
    pub graph: String,
    pub method: String,
    pub seed: u64,
    pub params: BTreeMap<String, serde_json::Value>,
    pub auc: f64,
    pub wall_time_ms: f64,
}

pub fn write_jsonl<W: Write>(records: &[BenchRecord], mut out: W) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::invalid(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Parses records written by [`write_jsonl`], skipping `#` comment lines.
pub fn read_jsonl(text: &str) -> Result<Vec<BenchRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub task: String,
    pub graph: String,
    pub method: String,
    pub params: String,
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Percentile bootstrap interval of the mean.
pub fn bootstrap_mean_ci(values: &[f64], level: f64, resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if values.is_empty() || resamples == 0 || !(0.0 < level && level < 1.0) {
        return Err(Error::invalid("bootstrap needs values, resamples and a level in (0, 1)"));
    }
    let mut rng = rng::named_stream(seed, "bootstrap");
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_unstable_by(f64::total_cmp);
    let q = |p: f64| means[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    let tail = (1.0 - level) / 2.0;
    Ok((q(tail), q(1.0 - tail)))
}

fn params_key(params: &BTreeMap<String, serde_json::Value>) -> String {
    params
        .iter()
        .map(|(k, v)| match v {
            serde_json::Value::String(s) => format!("{k}={s}"),
            other => format!("{k}={other}"),
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Groups records by (task, graph, method, params) and reports the mean
/// AUC over seeds with a 90% bootstrap interval (10^4 resamples).
pub fn summarize(records: &[BenchRecord], seed: u64) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<(String, String, String, String), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.task.clone(), r.graph.clone(), r.method.clone(), params_key(&r.params)))
            .or_default()
            .push(r.auc);
    }
    groups
        .into_iter()
        .map(|((task, graph, method, params), aucs)| {
            let (ci_low, ci_high) = bootstrap_mean_ci(&aucs, 0.9, 10_000, seed)?;
            Ok(SummaryRow {
                task,
                graph,
                method,
                params,
                n: aucs.len(),
                mean: aucs.iter().sum::<f64>() / aucs.len() as f64,
                ci_low,
                ci_high,
            })
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::invalid(format!("csv: {e}"));
    w.write_record(["task", "graph", "method", "params", "n", "mean", "ci_low", "ci_high"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.task.clone(),
            r.graph.clone(),
            r.method.clone(),
            r.params.clone(),
            r.n.to_string(),
            r.mean.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc_roc(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(auc_roc(&[0.3; 4], &[0.3; 3]).unwrap(), 0.5);
        assert_eq!(auc_roc(&[0.9, 0.4], &[0.5, 0.1]).unwrap(), 0.75);
        assert!(auc_roc(&[], &[1.0]).is_err());
        assert!(auc_roc(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn tree_has_nothing_to_remove() {
        let s = split_for_link_prediction(&path4(), 0.5, 3).unwrap();
        assert!(s.positives.is_empty());
        assert!(s.removal_capped);
        assert!(s.train_graph.is_connected());
    }

    #[test]
    fn triangle_split_is_capped() {
        for seed in 0..50 {
            let s = split_for_link_prediction(&triangle(), 0.5, seed).unwrap();
            assert_eq!(s.positives.len(), 1);
            assert!(s.removal_capped);
            assert!(s.train_graph.is_connected());
            assert_eq!(s.train_graph.edges().count(), 2);
            // A complete graph has no non-edges.
            assert!(s.negatives.is_empty() && s.negatives_capped);
        }
    }

    #[test]
    fn rho_validation() {
        assert!(split_for_link_prediction(&cycle4(), 0.0, 0).is_err());
        assert!(split_for_link_prediction(&cycle4(), 1.0, 0).is_err());
    }

    #[test]
    fn offsets_rank_star_hub_pairs_first() {
        let g = Graph::from_edges(5, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (3, 4, 1.0)]).unwrap();
        let e = Embedding {
            center: DMatrix::zeros(5, 2),
            context: DMatrix::zeros(5, 2),
            spectrum: None,
        };
        let s = link_scores(&e, &Offsets::Node(degree_offsets(&g)), &[(0, 4), (1, 2)]).unwrap();
        assert!(s[0] > s[1]);
        let plain = link_scores(&e, &Offsets::None, &[(0, 4)]).unwrap();
        assert_eq!(plain, vec![0.0]);
        assert!(link_scores(&e, &Offsets::None, &[(0, 5)]).is_err());
    }

    #[test]
    fn planted_partition_extremes() {
        let spec = DegreeSpec::Regular(6.0);
        let pp = generate_planted_partition(60, 3, 0.0, spec, 1).unwrap();
        assert_eq!(inter_group_fraction(&pp.graph, &pp.labels), 0.0);
        let pp = generate_planted_partition(60, 2, 1.0, spec, 1).unwrap();
        assert!(pp.graph.edges().all(|(i, j, _)| pp.labels.label(i) != pp.labels.label(j)));
        assert!(generate_planted_partition(60, 1, 0.1, spec, 1).is_err());
        assert!(generate_planted_partition(10, 2, 0.1, DegreeSpec::Regular(20.0), 1).is_err());
        let bad = DegreeSpec::PowerLaw { tau: 3.0, d_min: 5.0, d_max: 2.0 };
        assert!(generate_planted_partition(10, 2, 0.1, bad, 1).is_err());
    }

    #[test]
    fn power_law_draws_stay_in_range() {
        let spec = DegreeSpec::default_power_law();
        let mut r = rng::named_stream(0, "t");
        for _ in 0..1000 {
            let d = spec.draw(&mut r);
            assert!((10.0..=50.0).contains(&d));
        }
    }

    #[test]
    fn one_hot_embedding_separates_communities() {
        let labels = NodeGrouping::new((0..40).map(|i| i % 2).collect(), 2).unwrap();
        let center = DMatrix::from_fn(40, 2, |i, k| if i % 2 == k { 1.0 } else { 0.0 });
        let e = Embedding { context: center.clone(), center, spectrum: None };
        assert_eq!(community_similarity_auc(&e, &labels, 500, 1).unwrap(), 1.0);
    }

    #[test]
    fn single_class_is_error() {
        let labels = NodeGrouping::new(vec![0, 0, 0, 1], 2).unwrap();
        let e = Embedding {
            center: DMatrix::identity(4, 2),
            context: DMatrix::identity(4, 2),
            spectrum: None,
        };
        // One pair per draw is always a single class.
        assert!(community_similarity_auc(&e, &labels, 1, 0).is_err());
    }

    #[test]
    fn summary_groups_and_brackets_mean() {
        let rec = |seed, auc| BenchRecord {
            task: "linkpred".into(),
            graph: "g".into(),
            method: "r2v".into(),
            seed,
            params: BTreeMap::from([("rho".to_string(), serde_json::json!(0.5))]),
            auc,
            wall_time_ms: 1.0,
        };
        let records: Vec<_> = (0..10).map(|s| rec(s, 0.6 + 0.01 * s as f64)).collect();
        let mut buf = Vec::new();
        write_jsonl(&records, &mut buf).unwrap();
        let back = read_jsonl(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, records);
        let rows = summarize(&records, 0).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!(r.n, 10);
        assert!(r.ci_low <= r.mean && r.mean <= r.ci_high);
        assert!(r.ci_low >= 0.6 && r.ci_high <= 0.69);
        let mut csv = Vec::new();
        write_summary_csv(&rows, &mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().contains(",rho=0.5,"));
    }
}
