//! Descriptive statistics of a graph, computed on its simple skeleton
//! (self-loops dropped, weights ignored) except where noted.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::graph::Graph;
use crate::transition::pearson;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub total_weight: f64,
    pub max_degree: f64,
    /// Weighted degree value to node count.
    pub degree_distribution: BTreeMap<String, usize>,
    /// `d_j / 2m`.
    pub stationary_visit_frequency: Vec<f64>,
    pub assortativity: f64,
    pub clustering: f64,
}

pub fn graph_stats(g: &Graph) -> GraphStats {
    let mut degree_distribution = BTreeMap::new();
    for d in g.degrees() {
        *degree_distribution.entry(format_degree(*d)).or_insert(0) += 1;
    }
    let total = g.total_weight();
    GraphStats {
        n_nodes: g.n_nodes(),
        n_edges: g.edges().count(),
        total_weight: total / 2.0,
        max_degree: g.degrees().iter().copied().fold(0.0, f64::max),
        degree_distribution,
        stationary_visit_frequency: g
            .degrees()
            .iter()
            .map(|d| if total > 0.0 { d / total } else { 0.0 })
            .collect(),
        assortativity: degree_assortativity(g),
        clustering: average_clustering(g),
    }
}

fn format_degree(d: f64) -> String {
    if d.fract() == 0.0 {
        format!("{d:.0}")
    } else {
        d.to_string()
    }
}

fn simple_neighbors(g: &Graph, i: usize) -> Vec<usize> {
    g.neighbors(i).map(|(j, _)| j).filter(|&j| j != i).collect()
}

/// Mean local clustering coefficient; nodes with fewer than two neighbors
/// contribute zero.
pub fn average_clustering(g: &Graph) -> f64 {
    let n = g.n_nodes();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = (0..n)
        .map(|i| {
            let nb = simple_neighbors(g, i);
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (a, &u) in nb.iter().enumerate() {
                for &v in &nb[a + 1..] {
                    if g.has_edge(u, v) {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .sum();
    total / n as f64
}

/// Pearson correlation of the (simple) degrees at the two ends of each
/// edge, counting every edge in both directions. Zero when all degrees
/// agree, NaN without edges.
pub fn degree_assortativity(g: &Graph) -> f64 {
    let deg: Vec<f64> = (0..g.n_nodes())
        .map(|i| simple_neighbors(g, i).len() as f64)
        .collect();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, j, _) in g.edges().filter(|&(i, j, _)| i != j) {
        a.extend([deg[i], deg[j]]);
        b.extend([deg[j], deg[i]]);
    }
    if a.is_empty() {
        return f64::NAN;
    }
    pearson(&a, &b)
}
