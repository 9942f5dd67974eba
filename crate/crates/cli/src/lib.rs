//! Implementation of the `r2v` command-line tool.
//!
//! Every output file starts with a `# {json}` line holding the resolved run
//! configuration. All randomness derives from `--seed` through named
//! substreams, so repeated runs with the same flags give identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use r2v_core::bench::{
    self, community_similarity_auc, generate_connected_planted_partition,
    generate_planted_partition, link_prediction, BenchRecord, DegreeSpec, OffsetMode,
    PlantedPartition,
};
use r2v_core::graph::{load_edge_list, LoadedGraph, NodeLabels};
use r2v_core::null_model::NodeGrouping;
use r2v_core::residual::{residual2vec, Approx, NullSpec, R2vConfig};
use r2v_core::stats::graph_stats;
use r2v_core::svd::SvdOptions;
use r2v_core::transition::{simulate_walks, DEFAULT_EXACT_NODE_CAP};
use r2v_core::rng;

/// Environment variable bounding the memory of exact walk statistics.
pub const MEMORY_CAP_ENV: &str = "R2V_MEMORY_CAP_MB";

#[derive(Debug, Parser)]
#[command(name = "r2v", version, about = "Residual random-walk graph embeddings")]
pub struct Cli {
    /// Worker threads; defaults to all cores. Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed a graph and write node vectors as TSV.
    Embed(EmbedArgs),
    /// Degree distribution, visit frequencies, assortativity and clustering as JSON.
    Stats(StatsArgs),
    /// Baseline probabilities P0(j|i) of one node under a null model.
    Nullprob(NullprobArgs),
    /// Simulate random walks and write them one per line.
    Walks(WalksArgs),
    /// Generate a planted-partition graph and its labels.
    Generate(GenerateArgs),
    /// Link-prediction benchmark, one JSON record per run.
    Linkpred(LinkpredArgs),
    /// Community-similarity benchmark on planted partitions, one JSON record per run.
    Commbench(CommbenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NullChoice {
    ErdosRenyi,
    Config,
    Dcsbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApproxChoice {
    Exact,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OffsetChoice {
    None,
    Degree,
    Pairwise,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DegreeChoice {
    PowerLaw,
    Regular,
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Edge list, `src dst [weight]` per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Read the third column as edge weight.
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Debug, Clone, Args)]
pub struct NullArgs {
    #[arg(long, value_enum, default_value_t = NullChoice::Config)]
    pub null: NullChoice,
    /// `node_id<TAB>group` file for the dcsbm null.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Group for nodes missing from the groups file.
    #[arg(long)]
    pub default_group: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Window size.
    #[arg(long = "T", default_value_t = 10)]
    pub window: usize,
    /// Embedding dimension.
    #[arg(long = "K", default_value_t = 64)]
    pub dim: usize,
    /// Share of singular values given to the center vectors.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = ApproxChoice::Exact)]
    pub approx: ApproxChoice,
    /// Block count for `--approx block`.
    #[arg(long, default_value_t = 1000)]
    pub blocks: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PlantedArgs {
    /// Node count.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Community count.
    #[arg(long = "B", default_value_t = 2)]
    pub n_groups: usize,
    #[arg(long, value_enum, default_value_t = DegreeChoice::PowerLaw)]
    pub degree: DegreeChoice,
    /// Power-law exponent.
    #[arg(long, default_value_t = 3.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 10.0)]
    pub d_min: f64,
    #[arg(long, default_value_t = 50.0)]
    pub d_max: f64,
    /// Degree for `--degree regular`.
    #[arg(long, default_value_t = 10.0)]
    pub d: f64,
}

impl PlantedArgs {
    fn spec(&self) -> DegreeSpec {
        match self.degree {
            DegreeChoice::PowerLaw => DegreeSpec::PowerLaw {
                tau: self.tau,
                d_min: self.d_min,
                d_max: self.d_max,
            },
            DegreeChoice::Regular => DegreeSpec::Regular(self.d),
        }
    }

    fn describe(&self, mu: f64) -> String {
        format!("planted(n={},B={},mu={mu})", self.n, self.n_groups)
    }

    fn params(&self) -> Value {
        json!({
            "n": self.n,
            "B": self.n_groups,
            "degree": value_name(&self.degree),
            "tau": self.tau,
            "d_min": self.d_min,
            "d_max": self.d_max,
            "d": self.d,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub null: NullArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Embedding TSV; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write context vectors to this path.
    #[arg(long)]
    pub export_context: Option<PathBuf>,
    /// Also write singular values to this path.
    #[arg(long)]
    pub export_sigma: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NullprobArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub null: NullArgs,
    #[arg(long = "T", default_value_t = 10)]
    pub window: usize,
    /// Center node id as written in the edge list.
    #[arg(long)]
    pub node: String,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct WalksArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 10)]
    pub walkers: usize,
    #[arg(long, default_value_t = 80)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Planted-partition generator (the only one available).
    #[arg(long)]
    pub planted: bool,
    #[command(flatten)]
    pub planted_args: PlantedArgs,
    /// Mixing rate: expected share of edges between communities.
    #[arg(long, default_value_t = 0.05)]
    pub mu: f64,
    /// Redraw until the graph is connected.
    #[arg(long)]
    pub connected: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Edge list path.
    #[arg(long)]
    pub output: PathBuf,
    /// Community labels path; defaults to `<output>.groups.tsv`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LinkpredArgs {
    /// Edge list; a planted partition is generated per run when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub weighted: bool,
    #[command(flatten)]
    pub planted: PlantedArgs,
    /// Mixing rate of generated graphs.
    #[arg(long, default_value_t = 0.05)]
    pub mu: f64,
    #[command(flatten)]
    pub null: NullArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fraction of edges removed.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = OffsetChoice::Degree)]
    pub offset: OffsetChoice,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of runs.
    #[arg(long, default_value_t = 30)]
    pub seeds: usize,
    /// JSON-lines records; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Mean and 90% bootstrap interval per method as CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CommbenchArgs {
    #[command(flatten)]
    pub planted: PlantedArgs,
    /// Mixing rates, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.25,0.5")]
    pub mu: Vec<f64>,
    #[command(flatten)]
    pub null: NullArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sampled node pairs per run.
    #[arg(long, default_value_t = 10_000)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// Resolved configuration written at the top of every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub version: &'static str,
    pub inputs: BTreeMap<&'static str, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null: Option<String>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    pub outputs: BTreeMap<&'static str, String>,
    pub params: BTreeMap<&'static str, Value>,
}

impl RunConfig {
    fn new(command: &'static str) -> Self {
        RunConfig {
            command,
            version: env!("CARGO_PKG_VERSION"),
            inputs: BTreeMap::new(),
            null: None,
            window: None,
            dim: None,
            alpha: None,
            approx: None,
            blocks: None,
            seed: None,
            seeds: None,
            outputs: BTreeMap::new(),
            params: BTreeMap::new(),
        }
    }

    fn with_model(mut self, null: &NullArgs, model: &ModelArgs) -> Self {
        self.null = Some(value_name(&null.null));
        self.window = Some(model.window);
        self.dim = Some(model.dim);
        self.alpha = Some(model.alpha);
        self.approx = Some(value_name(&model.approx));
        if model.approx == ApproxChoice::Block {
            self.blocks = Some(model.blocks);
        }
        if let Some(p) = &null.groups {
            self.inputs.insert("groups", display(p));
        }
        if let Some(d) = &null.default_group {
            self.params.insert("default_group", json!(d));
        }
        self
    }

    fn output(mut self, name: &'static str, path: Option<&Path>) -> Self {
        self.outputs
            .insert(name, path.map_or_else(|| "-".to_string(), display));
        self
    }

    fn output_opt(self, name: &'static str, path: Option<&Path>) -> Self {
        match path {
            Some(p) => self.output(name, Some(p)),
            None => self,
        }
    }

    fn header(&self) -> Result<String> {
        Ok(format!("# {}", serde_json::to_string(self)?))
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

/// Node cap for exact walk statistics, from [`MEMORY_CAP_ENV`] when set:
/// a dense `N x N` store of 16-byte entries must fit in the budget.
pub fn exact_node_cap() -> Result<usize> {
    match std::env::var(MEMORY_CAP_ENV) {
        Ok(raw) => {
            let mb: f64 = raw
                .trim()
                .parse()
                .with_context(|| format!("{MEMORY_CAP_ENV}={raw} is not a number"))?;
            if !(mb.is_finite() && mb > 0.0) {
                bail!("{MEMORY_CAP_ENV} must be positive, got {raw}");
            }
            Ok(node_cap_for_megabytes(mb))
        }
        Err(_) => Ok(DEFAULT_EXACT_NODE_CAP),
    }
}

pub fn node_cap_for_megabytes(mb: f64) -> usize {
    (mb * 1024.0 * 1024.0 / 16.0).sqrt().floor() as usize
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn load_graph(input: &Path, weighted: bool) -> Result<LoadedGraph> {
    let f = File::open(input).with_context(|| format!("cannot open {}", input.display()))?;
    load_edge_list(BufReader::new(f), weighted)
        .with_context(|| format!("reading {}", input.display()))
}

fn load_grouping(null: &NullArgs, labels: &NodeLabels) -> Result<Option<NodeGrouping>> {
    match &null.groups {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            let g = NodeGrouping::read_tsv(BufReader::new(f), labels, null.default_group.as_deref())
                .with_context(|| format!("reading {}", path.display()))?;
            Ok(Some(g))
        }
        None => Ok(None),
    }
}

fn null_spec(choice: NullChoice, grouping: Option<NodeGrouping>) -> Result<NullSpec> {
    match (choice, grouping) {
        (NullChoice::ErdosRenyi, None) => Ok(NullSpec::ErdosRenyi),
        (NullChoice::Config, None) => Ok(NullSpec::Config),
        (NullChoice::Dcsbm, Some(g)) => Ok(NullSpec::Dcsbm(g)),
        (NullChoice::Dcsbm, None) => bail!("--null dcsbm needs --groups"),
        (_, Some(_)) => bail!("--groups only applies to --null dcsbm"),
    }
}

fn validate_model(m: &ModelArgs) -> Result<()> {
    if m.window == 0 {
        bail!("--T must be at least 1");
    }
    if m.dim == 0 {
        bail!("--K must be at least 1");
    }
    if !(0.0..=1.0).contains(&m.alpha) {
        bail!("--alpha must lie in [0, 1]");
    }
    if m.approx == ApproxChoice::Block && m.blocks == 0 {
        bail!("--blocks must be at least 1");
    }
    Ok(())
}

fn r2v_config(null: NullSpec, m: &ModelArgs, seed: u64) -> Result<R2vConfig> {
    Ok(R2vConfig {
        null,
        window: m.window,
        dim: m.dim,
        alpha: m.alpha,
        approx: match m.approx {
            ApproxChoice::Exact => Approx::Exact,
            ApproxChoice::Block => Approx::Block {
                n_blocks: m.blocks,
                partition: None,
            },
        },
        svd: SvdOptions {
            seed: rng::child_seed(seed, "svd", 0),
            ..SvdOptions::default()
        },
        exact_node_cap: exact_node_cap()?,
    })
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Embed(a) => cmd_embed(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Nullprob(a) => cmd_nullprob(&a),
        Command::Walks(a) => cmd_walks(&a),
        Command::Generate(a) => cmd_generate(&a),
        Command::Linkpred(a) => cmd_linkpred(&a),
        Command::Commbench(a) => cmd_commbench(&a),
    }
}

pub fn cmd_embed(a: &EmbedArgs) -> Result<()> {
    validate_model(&a.model)?;
    let loaded = load_graph(&a.input.input, a.input.weighted)?;
    let grouping = load_grouping(&a.null, &loaded.labels)?;
    let cfg = r2v_config(null_spec(a.null.null, grouping)?, &a.model, a.seed)?;

    let mut rc = RunConfig::new("embed").with_model(&a.null, &a.model);
    rc.inputs.insert("input", display(&a.input.input));
    rc.params.insert("weighted", json!(a.input.weighted));
    rc.seed = Some(a.seed);
    rc = rc.output("embedding", a.output.as_deref());
    if let Some(p) = &a.export_context {
        rc = rc.output("context", Some(p));
    }
    if let Some(p) = &a.export_sigma {
        rc = rc.output("sigma", Some(p));
    }
    let header = rc.header()?;

    let e = residual2vec(&loaded.graph, &cfg)?;
    let mut out = open_output(a.output.as_deref())?;
    writeln!(out, "{header}")?;
    e.write_tsv(&loaded.labels, false, &mut out)?;
    out.flush()?;
    if let Some(p) = &a.export_context {
        let mut out = open_output(Some(p))?;
        writeln!(out, "{header}")?;
        e.write_tsv(&loaded.labels, true, &mut out)?;
        out.flush()?;
    }
    if let Some(p) = &a.export_sigma {
        let mut out = open_output(Some(p))?;
        writeln!(out, "{header}")?;
        e.write_sigma(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

pub fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let loaded = load_graph(&a.input.input, a.input.weighted)?;
    let mut rc = RunConfig::new("stats").output("stats", a.output.as_deref());
    rc.inputs.insert("input", display(&a.input.input));
    rc.params.insert("weighted", json!(a.input.weighted));
    let body = json!({
        "run_config": rc,
        "stats": graph_stats(&loaded.graph),
    });
    let mut out = open_output(a.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &body)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn cmd_nullprob(a: &NullprobArgs) -> Result<()> {
    if a.window == 0 {
        bail!("--T must be at least 1");
    }
    let loaded = load_graph(&a.input.input, a.input.weighted)?;
    let grouping = load_grouping(&a.null, &loaded.labels)?;
    let spec = null_spec(a.null.null, grouping)?;
    let node = loaded
        .labels
        .index_of(&a.node)
        .with_context(|| format!("node `{}` not in the graph", a.node))?;
    let model = spec.fit(&loaded.graph)?;
    let row = model.baseline_row(node, a.window)?;

    let mut rc = RunConfig::new("nullprob").output("probabilities", a.output.as_deref());
    rc.inputs.insert("input", display(&a.input.input));
    rc.null = Some(value_name(&a.null.null));
    rc.window = Some(a.window);
    rc.params.insert("node", json!(a.node));
    rc.params.insert("model", json!(model.descriptor()));
    if let Some(p) = &a.null.groups {
        rc.inputs.insert("groups", display(p));
    }
    let mut out = open_output(a.output.as_deref())?;
    writeln!(out, "{}", rc.header()?)?;
    writeln!(out, "node_id\tp0")?;
    for (j, p) in row.iter().enumerate() {
        writeln!(out, "{}\t{p}", loaded.labels.name(j))?;
    }
    out.flush()?;
    Ok(())
}

pub fn cmd_walks(a: &WalksArgs) -> Result<()> {
    if a.walkers == 0 || a.length == 0 {
        bail!("--walkers and --length must be positive");
    }
    let loaded = load_graph(&a.input.input, a.input.weighted)?;
    let corpus = simulate_walks(&loaded.graph, a.walkers, a.length, rng::child_seed(a.seed, "walks", 0))?;
    let mut rc = RunConfig::new("walks").output("walks", a.output.as_deref());
    rc.inputs.insert("input", display(&a.input.input));
    rc.seed = Some(a.seed);
    rc.params.insert("walkers", json!(a.walkers));
    rc.params.insert("length", json!(a.length));
    let mut out = open_output(a.output.as_deref())?;
    writeln!(out, "{}", rc.header()?)?;
    corpus.write_text(&mut out)?;
    out.flush()?;
    Ok(())
}

fn validate_planted(p: &PlantedArgs, mus: &[f64]) -> Result<()> {
    if p.n_groups < 2 {
        bail!("--B must be at least 2");
    }
    if let Some(mu) = mus.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        bail!("--mu {mu} outside [0, 1]");
    }
    Ok(())
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    if !a.planted {
        bail!("only the planted-partition generator is available; pass --planted");
    }
    validate_planted(&a.planted_args, &[a.mu])?;
    let p = &a.planted_args;
    let seed = rng::child_seed(a.seed, "generate", 0);
    let pp = if a.connected {
        generate_connected_planted_partition(p.n, p.n_groups, a.mu, p.spec(), seed, 100)?
    } else {
        generate_planted_partition(p.n, p.n_groups, a.mu, p.spec(), seed)?
    };
    let labels_path = a.labels.clone().unwrap_or_else(|| {
        let mut s = a.output.clone().into_os_string();
        s.push(".groups.tsv");
        PathBuf::from(s)
    });
    let mut rc = RunConfig::new("generate")
        .output("edges", Some(&a.output))
        .output("labels", Some(&labels_path));
    rc.seed = Some(a.seed);
    rc.params.insert("planted", p.params());
    rc.params.insert("mu", json!(a.mu));
    rc.params.insert("connected", json!(a.connected));
    let header = rc.header()?;

    let ids = NodeLabels::Identity(p.n);
    let mut out = open_output(Some(&a.output))?;
    writeln!(out, "{header}")?;
    pp.graph.write_edge_list(&ids, &mut out)?;
    out.flush()?;
    let mut out = open_output(Some(&labels_path))?;
    writeln!(out, "{header}")?;
    for (i, g) in pp.labels.labels().iter().enumerate() {
        writeln!(out, "{i}\t{g}")?;
    }
    out.flush()?;
    Ok(())
}

fn write_records(
    rc: &RunConfig,
    records: &[BenchRecord],
    output: Option<&Path>,
    summary: Option<&Path>,
    seed: u64,
) -> Result<()> {
    let header = rc.header()?;
    let mut out = open_output(output)?;
    writeln!(out, "{header}")?;
    bench::write_jsonl(records, &mut out)?;
    out.flush()?;
    if let Some(path) = summary {
        let rows = bench::summarize(records, rng::child_seed(seed, "bootstrap", 0))?;
        let mut out = open_output(Some(path))?;
        writeln!(out, "{header}")?;
        bench::write_summary_csv(&rows, &mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn method_name(null: NullChoice) -> String {
    format!("r2v-{}", value_name(&null))
}

pub fn cmd_linkpred(a: &LinkpredArgs) -> Result<()> {
    validate_model(&a.model)?;
    if !(a.rho > 0.0 && a.rho < 1.0) {
        bail!("--rho must lie in (0, 1)");
    }
    if a.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let modes: Vec<OffsetMode> = match a.offset {
        OffsetChoice::None => vec![OffsetMode::None],
        OffsetChoice::Degree => vec![OffsetMode::Degree],
        OffsetChoice::Pairwise => vec![OffsetMode::Pairwise],
        OffsetChoice::All => vec![OffsetMode::None, OffsetMode::Degree, OffsetMode::Pairwise],
    };
    let fixed = match &a.input {
        Some(path) => {
            let loaded = load_graph(path, a.weighted)?;
            let grouping = load_grouping(&a.null, &loaded.labels)?;
            let name = path
                .file_stem()
                .map_or_else(|| display(path), |s| s.to_string_lossy().into_owned());
            Some((loaded.graph, grouping, name))
        }
        None => {
            validate_planted(&a.planted, &[a.mu])?;
            if a.null.groups.is_some() {
                bail!("--groups needs --input; generated graphs use their planted labels");
            }
            None
        }
    };

    let mut rc = RunConfig::new("linkpred").with_model(&a.null, &a.model);
    rc.seed = Some(a.seed);
    rc.seeds = Some(a.seeds);
    rc.params.insert("rho", json!(a.rho));
    rc.params.insert("offset", json!(value_name(&a.offset)));
    match &a.input {
        Some(p) => {
            rc.inputs.insert("input", display(p));
            rc.params.insert("weighted", json!(a.weighted));
        }
        None => {
            rc.params.insert("planted", a.planted.params());
            rc.params.insert("mu", json!(a.mu));
        }
    }
    rc = rc
        .output("records", a.output.as_deref())
        .output_opt("summary", a.summary.as_deref());

    let runs: Vec<Vec<BenchRecord>> = (0..a.seeds)
        .into_par_iter()
        .map(|k| -> Result<Vec<BenchRecord>> {
            let run_seed = rng::child_seed(a.seed, "run", k as u64);
            let (graph, grouping, name) = match &fixed {
                Some((g, grouping, name)) => (g.clone(), grouping.clone(), name.clone()),
                None => {
                    let pp = planted_graph(&a.planted, a.mu, run_seed)?;
                    let grouping = (a.null.null == NullChoice::Dcsbm).then(|| pp.labels.clone());
                    (pp.graph, grouping, a.planted.describe(a.mu))
                }
            };
            let cfg = r2v_config(null_spec(a.null.null, grouping)?, &a.model, run_seed)?;
            let outcome = link_prediction(&graph, &cfg, a.rho, run_seed, &modes)?;
            Ok(outcome
                .aucs
                .iter()
                .map(|&(mode, auc)| BenchRecord {
                    task: "linkpred".into(),
                    graph: name.clone(),
                    method: method_name(a.null.null),
                    seed: run_seed,
                    params: record_params(&a.model, [
                        ("rho", json!(a.rho)),
                        ("offset", json!(mode.name())),
                        ("positives", json!(outcome.split.positives.len())),
                    ]),
                    auc,
                    wall_time_ms: outcome.wall_time_ms,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let records: Vec<BenchRecord> = runs.into_iter().flatten().collect();
    write_records(&rc, &records, a.output.as_deref(), a.summary.as_deref(), a.seed)
}

fn planted_graph(p: &PlantedArgs, mu: f64, seed: u64) -> Result<PlantedPartition> {
    Ok(generate_connected_planted_partition(
        p.n,
        p.n_groups,
        mu,
        p.spec(),
        rng::child_seed(seed, "graph", 0),
        100,
    )?)
}

fn record_params<const N: usize>(
    m: &ModelArgs,
    extra: [(&str, Value); N],
) -> BTreeMap<String, Value> {
    let mut p = BTreeMap::from([
        ("T".to_string(), json!(m.window)),
        ("K".to_string(), json!(m.dim)),
        ("alpha".to_string(), json!(m.alpha)),
        ("approx".to_string(), json!(value_name(&m.approx))),
    ]);
    if m.approx == ApproxChoice::Block {
        p.insert("blocks".to_string(), json!(m.blocks));
    }
    p.extend(extra.into_iter().map(|(k, v)| (k.to_string(), v)));
    p
}

pub fn cmd_commbench(a: &CommbenchArgs) -> Result<()> {
    validate_model(&a.model)?;
    validate_planted(&a.planted, &a.mu)?;
    if a.seeds == 0 || a.pairs == 0 || a.mu.is_empty() {
        bail!("--seeds, --pairs and --mu must be nonempty");
    }
    if a.null.groups.is_some() {
        bail!("--groups is not used here; generated graphs use their planted labels");
    }
    let mut rc = RunConfig::new("commbench").with_model(&a.null, &a.model);
    rc.seed = Some(a.seed);
    rc.seeds = Some(a.seeds);
    rc.params.insert("planted", a.planted.params());
    rc.params.insert("mu", json!(a.mu));
    rc.params.insert("pairs", json!(a.pairs));
    rc = rc
        .output("records", a.output.as_deref())
        .output_opt("summary", a.summary.as_deref());

    let jobs: Vec<(f64, usize)> = a
        .mu
        .iter()
        .flat_map(|&mu| (0..a.seeds).map(move |k| (mu, k)))
        .collect();
    let records: Vec<BenchRecord> = jobs
        .into_par_iter()
        .map(|(mu, k)| -> Result<BenchRecord> {
            let start = std::time::Instant::now();
            let run_seed = rng::child_seed(a.seed, "run", k as u64);
            let pp = planted_graph(&a.planted, mu, run_seed)?;
            let grouping = (a.null.null == NullChoice::Dcsbm).then(|| pp.labels.clone());
            let cfg = r2v_config(null_spec(a.null.null, grouping)?, &a.model, run_seed)?;
            let e = residual2vec(&pp.graph, &cfg)?;
            let auc = community_similarity_auc(
                &e,
                &pp.labels,
                a.pairs,
                rng::child_seed(run_seed, "pairs", 0),
            )?;
            Ok(BenchRecord {
                task: "commbench".into(),
                graph: a.planted.describe(mu),
                method: method_name(a.null.null),
                seed: run_seed,
                params: record_params(&a.model, [("mu", json!(mu)), ("pairs", json!(a.pairs))]),
                auc,
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect::<Result<_>>()?;
    write_records(&rc, &records, a.output.as_deref(), a.summary.as_deref(), a.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn memory_cap_conversion() {
        // 16 MiB holds a 1024 x 1024 store of 16-byte entries.
        assert_eq!(node_cap_for_megabytes(16.0), 1024);
        assert_eq!(node_cap_for_megabytes(0.0), 0);
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "r2v", "embed", "--input", "g.tsv", "--null", "erdos-renyi", "--T", "5", "--K", "8",
        ])
        .unwrap();
        match cli.command {
            Command::Embed(a) => {
                assert_eq!(a.null.null, NullChoice::ErdosRenyi);
                assert_eq!(a.model.window, 5);
                assert_eq!(a.model.dim, 8);
            }
            _ => panic!("wrong subcommand"),
        }
        let cli = Cli::try_parse_from(["r2v", "commbench", "--mu", "0.1,0.2"]).unwrap();
        match cli.command {
            Command::Commbench(a) => assert_eq!(a.mu, vec![0.1, 0.2]),
            _ => panic!("wrong subcommand"),
        }
        assert!(Cli::try_parse_from(["r2v", "embed", "--input", "g", "--null", "bogus"]).is_err());
    }

    #[test]
    fn null_spec_requires_matching_groups() {
        assert!(null_spec(NullChoice::Dcsbm, None).is_err());
        assert!(null_spec(NullChoice::Config, Some(NodeGrouping::single(3))).is_err());
        assert!(null_spec(NullChoice::Config, None).is_ok());
    }

    #[test]
    fn header_is_single_json_line() {
        let rc = RunConfig::new("embed").output("embedding", None);
        let h = rc.header().unwrap();
        assert!(h.starts_with("# {"));
        assert!(!h.contains('\n'));
        let v: Value = serde_json::from_str(&h[2..]).unwrap();
        assert_eq!(v["command"], "embed");
        assert_eq!(v["outputs"]["embedding"], "-");
    }
}
