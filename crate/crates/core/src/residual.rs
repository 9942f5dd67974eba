//! Residual matrix, its factorization, and the end-to-end pipeline.
//!
//! `R(i,j) = ln P_d(j|i) - ln P0(j|i)` compares observed walk statistics
//! with the null model. Pairs never reached by the walk would be `-inf`,
//! and negative associations carry little signal, so only the positive
//! part is kept and stored sparsely. Embeddings are `u_ik = s_k^a L_ik`,
//! `v_ik = s_k^(1-a) R_ik` from the truncated SVD `L diag(s) R^T`.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeLabels};
use crate::null_model::{
    config_model_baseline, erdos_renyi_baseline, fit_dcsbm, BaselineModel, NodeGrouping,
};
use crate::svd::{self, CsrMatrix, Svd, SvdOptions};
use crate::transition::{
    block_approx_transition, exact_window_transition_capped, WindowTransition,
    DEFAULT_EXACT_NODE_CAP,
};

/// Sparse nonnegative truncated residual matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    window: usize,
    null_descriptor: String,
    matrix: CsrMatrix,
}

impl ResidualMatrix {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn null_descriptor(&self) -> &str {
        &self.null_descriptor
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn n_nodes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }
}

/// Untruncated `ln P_d(j|i) - ln P0(j|i)`.
pub fn residual_value(observed: f64, baseline: f64) -> Result<f64> {
    if observed <= 0.0 {
        return Err(Error::invalid("observed probability must be positive"));
    }
    if baseline <= 0.0 {
        return Err(Error::invalid(
            "baseline probability is zero where the walk has support",
        ));
    }
    Ok(observed.ln() - baseline.ln())
}

/// Builds `max(R, 0)` over the support of `pd`, storing only positive entries.
pub fn residual_matrix(pd: &WindowTransition, base: &BaselineModel) -> Result<ResidualMatrix> {
    let n = pd.n_nodes();
    if base.n_nodes() != n {
        return Err(Error::invalid(format!(
            "baseline covers {} nodes, transition covers {n}",
            base.n_nodes()
        )));
    }
    let null = base.windowed(pd.window())?;
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            for (j, p) in pd.row(i) {
                let r = residual_value(p, null.prob(i, j)).map_err(|_| {
                    Error::invalid(format!("baseline P0({j}|{i}) is zero but P_d({j}|{i}) = {p}"))
                })?;
                if r > 0.0 {
                    row.push((j, r));
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualMatrix {
        window: pd.window(),
        null_descriptor: base.descriptor(),
        matrix: CsrMatrix::from_rows(n, rows)?,
    })
}

/// Residual pointwise mutual information from joint center–context
/// distributions `P(i,j) = pi(i) P(j|i)` of the observed and null walks.
#[derive(Debug, Clone)]
pub struct ResidualPmi<'a> {
    pd: &'a WindowTransition,
    null: crate::null_model::WindowedBaseline,
    observed_center: Vec<f64>,
    observed_context: Vec<f64>,
    null_center: Vec<f64>,
    null_context: Vec<f64>,
}

impl<'a> ResidualPmi<'a> {
    /// Observed centers are weighted by the stationary distribution of `g`,
    /// null centers by that of the null model.
    pub fn new(g: &Graph, pd: &'a WindowTransition, base: &BaselineModel) -> Result<Self> {
        let n = pd.n_nodes();
        if g.n_nodes() != n || base.n_nodes() != n {
            return Err(Error::invalid("graph, transition and baseline disagree in size"));
        }
        let observed_center: Vec<f64> =
            g.degrees().iter().map(|d| d / g.total_weight()).collect();
        let mut observed_context = vec![0.0; n];
        for (i, pi) in observed_center.iter().enumerate() {
            for (j, p) in pd.row(i) {
                observed_context[j] += pi * p;
            }
        }
        let null = base.windowed(pd.window())?;
        let null_center = base.stationary();
        let mut null_context = vec![0.0; n];
        for (i, pi) in null_center.iter().enumerate() {
            for (j, slot) in null_context.iter_mut().enumerate() {
                *slot += pi * null.prob(i, j);
            }
        }
        Ok(ResidualPmi {
            pd,
            null,
            observed_center,
            observed_context,
            null_center,
            null_context,
        })
    }

    /// Largest absolute difference between observed and null marginals,
    /// over both center and context distributions.
    pub fn marginal_gap(&self) -> f64 {
        let centers = self.observed_center.iter().zip(&self.null_center);
        let contexts = self.observed_context.iter().zip(&self.null_context);
        centers
            .chain(contexts)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `PMI_d(i,j) - PMI_0(i,j)`.
    pub fn value(&self, i: usize, j: usize) -> Result<f64> {
        let joint_d = self.observed_center[i] * self.pd.prob(i, j);
        let joint_0 = self.null_center[i] * self.null.prob(i, j);
        if joint_d <= 0.0 || joint_0 <= 0.0 {
            return Err(Error::invalid(format!("zero joint probability at ({i}, {j})")));
        }
        let pmi_d = (joint_d / (self.observed_center[i] * self.observed_context[j])).ln();
        let pmi_0 = (joint_0 / (self.null_center[i] * self.null_context[j])).ln();
        Ok(pmi_d - pmi_0)
    }
}

/// Residual PMI of a single pair.
pub fn residual_pmi(
    g: &Graph,
    pd: &WindowTransition,
    base: &BaselineModel,
    i: usize,
    j: usize,
) -> Result<f64> {
    ResidualPmi::new(g, pd, base)?.value(i, j)
}

/// Top-`k` singular triplets of the residual matrix.
pub fn truncated_svd(r: &ResidualMatrix, k: usize, opts: &SvdOptions) -> Result<Svd> {
    svd::truncated_svd(&r.matrix, k, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub singular_values: Vec<f64>,
    pub alpha: f64,
}

/// Center (`u`) and context (`v`) vectors, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub center: DMatrix<f64>,
    pub context: DMatrix<f64>,
    /// Present for factorization-based embeddings.
    pub spectrum: Option<Spectrum>,
}

/// Splits singular values between the two sides: `u = s^alpha L`,
/// `v = s^(1-alpha) R`. Components with a zero singular value become zero
/// columns on both sides.
pub fn scale_embedding(svd: &Svd, alpha: f64) -> Result<Embedding> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    if svd.singular_values.iter().any(|s| *s < 0.0 || !s.is_finite()) {
        return Err(Error::invalid("singular values must be nonnegative"));
    }
    let mut center = svd.left.clone();
    let mut context = svd.right.clone();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let (a, b) = if s == 0.0 {
            (0.0, 0.0)
        } else {
            (s.powf(alpha), s.powf(1.0 - alpha))
        };
        center.column_mut(k).scale_mut(a);
        context.column_mut(k).scale_mut(b);
    }
    Ok(Embedding {
        center,
        context,
        spectrum: Some(Spectrum {
            singular_values: svd.singular_values.clone(),
            alpha,
        }),
    })
}

impl Embedding {
    pub fn n_nodes(&self) -> usize {
        self.center.nrows()
    }

    pub fn dim(&self) -> usize {
        self.center.ncols()
    }

    /// `u_i . u_j`
    pub fn center_dot(&self, i: usize, j: usize) -> f64 {
        self.center.row(i).dot(&self.center.row(j))
    }

    /// `u_i . v_j`
    pub fn center_context_dot(&self, i: usize, j: usize) -> f64 {
        self.center.row(i).dot(&self.context.row(j))
    }

    /// Cosine similarity of center vectors; zero if either is the zero vector.
    pub fn cosine(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.center.row(i), self.center.row(j));
        let denom = a.norm() * b.norm();
        if denom == 0.0 {
            0.0
        } else {
            a.dot(&b) / denom
        }
    }

    /// TSV with header `node_id dim_0 ... dim_{K-1}` (tab-separated).
    /// Writes the context vectors instead when `context` is set.
    pub fn write_tsv<W: Write>(&self, labels: &NodeLabels, context: bool, mut out: W) -> Result<()> {
        let m = if context { &self.context } else { &self.center };
        let mut header = vec!["node_id".to_string()];
        header.extend((0..m.ncols()).map(|k| format!("dim_{k}")));
        writeln!(out, "{}", header.join("\t"))?;
        for i in 0..m.nrows() {
            let mut line = labels.name(i);
            for k in 0..m.ncols() {
                // Normalize -0 so equal vectors print identically.
                let v = m[(i, k)] + 0.0;
                line.push('\t');
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// One singular value per line, preceded by a `k<TAB>sigma` header.
    pub fn write_sigma<W: Write>(&self, mut out: W) -> Result<()> {
        let spectrum = self
            .spectrum
            .as_ref()
            .ok_or_else(|| Error::invalid("embedding has no singular values"))?;
        writeln!(out, "k\tsigma")?;
        for (k, s) in spectrum.singular_values.iter().enumerate() {
            writeln!(out, "{k}\t{s}")?;
        }
        Ok(())
    }
}

/// Which null random-graph model supplies the baseline.
#[derive(Debug, Clone, PartialEq)]
pub enum NullSpec {
    ErdosRenyi,
    Config,
    Dcsbm(NodeGrouping),
}

impl NullSpec {
    pub fn fit(&self, g: &Graph) -> Result<BaselineModel> {
        match self {
            NullSpec::ErdosRenyi => erdos_renyi_baseline(g.n_nodes()),
            NullSpec::Config => config_model_baseline(g),
            NullSpec::Dcsbm(grouping) => fit_dcsbm(g, grouping),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Approx {
    Exact,
    Block {
        n_blocks: usize,
        partition: Option<NodeGrouping>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct R2vConfig {
    pub null: NullSpec,
    pub window: usize,
    pub dim: usize,
    pub alpha: f64,
    pub approx: Approx,
    pub svd: SvdOptions,
    pub exact_node_cap: usize,
}

impl Default for R2vConfig {
    fn default() -> Self {
        R2vConfig {
            null: NullSpec::Config,
            window: 10,
            dim: 64,
            alpha: 0.5,
            approx: Approx::Exact,
            svd: SvdOptions::default(),
            exact_node_cap: DEFAULT_EXACT_NODE_CAP,
        }
    }
}

/// Walk statistics of `g` under the configured approximation.
pub fn observed_transition(g: &Graph, cfg: &R2vConfig) -> Result<WindowTransition> {
    match &cfg.approx {
        Approx::Exact => exact_window_transition_capped(g, cfg.window, cfg.exact_node_cap),
        Approx::Block {
            n_blocks,
            partition,
        } => {
            g.require_connected()?;
            block_approx_transition(g, (*n_blocks).min(g.n_nodes()), cfg.window, partition.as_ref())
        }
    }
}

/// Fits the null model, builds the truncated residual matrix and factorizes it.
pub fn residual2vec(g: &Graph, cfg: &R2vConfig) -> Result<Embedding> {
    if cfg.dim == 0 || cfg.dim > g.n_nodes() {
        return Err(Error::invalid(format!(
            "dimension {} must be between 1 and the node count {}",
            cfg.dim,
            g.n_nodes()
        )));
    }
    let base = cfg.null.fit(g)?;
    let pd = observed_transition(g, cfg)?;
    let r = residual_matrix(&pd, &base)?;
    let svd = truncated_svd(&r, cfg.dim, &cfg.svd)?;
    scale_embedding(&svd, cfg.alpha)
}
