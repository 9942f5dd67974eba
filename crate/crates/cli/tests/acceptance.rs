//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints one line whether it passes or not.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

use r2v_core::bench::{
    community_similarity_auc, generate_connected_planted_partition, link_prediction, DegreeSpec, OffsetMode,
};
use r2v_core::null_model::{config_model_baseline, erdos_renyi_baseline, fit_dcsbm, DcsbmSampler};
use r2v_core::residual::{residual_matrix, truncated_svd, ResidualPmi};
use r2v_core::rng::{child_seed, named_stream};
use r2v_core::sgns::{
    pair_loss_and_gradient, verify_unbiasedness, Candidate, NoiseDistribution, Objective, TrainerConfig,
    VerifyOptions,
};
use r2v_core::svd::SvdOptions;
use r2v_core::transition::{
    block_approx_transition, exact_window_transition, mean_row_correlation, simulate_walks,
};
use r2v_core::{Graph, NodeGrouping, R2vConfig};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Connected random multigraph: a random tree plus extra edges and loops.
fn random_graph(rng: &mut impl Rng, n: usize, extra: usize) -> Graph {
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i, 1.0));
    }
    for _ in 0..extra {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        edges.push((i, j, rng.random_range(1..=3) as f64));
    }
    Graph::from_edges(n, edges).unwrap()
}

/// Random tree plus each remaining pair with probability one half, integer
/// weights in 1..=5. Dense enough that 200 samples carry many edges per node.
fn dense_random_graph(rng: &mut impl Rng, n: usize) -> Graph {
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i, rng.random_range(1..=5) as f64));
    }
    for i in 0..n {
        for j in i..n {
            if rng.random_bool(0.5) {
                edges.push((i, j, rng.random_range(1..=5) as f64));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

/// Random labels with every group occupied.
fn random_grouping(rng: &mut impl Rng, n: usize, b: usize) -> NodeGrouping {
    let mut labels: Vec<usize> = (0..n).map(|i| if i < b { i } else { rng.random_range(0..b) }).collect();
    for i in (1..n).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    NodeGrouping::new(labels, b).unwrap()
}

/// Per-node cumulative stub weights of one sampled graph.
struct Steps {
    targets: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
}

impl Steps {
    fn new(g: &Graph) -> Self {
        let n = g.n_nodes();
        let mut targets = vec![Vec::new(); n];
        let mut cumulative = vec![Vec::new(); n];
        for i in 0..n {
            let mut acc = 0.0;
            for (j, w) in g.neighbors(i) {
                acc += if i == j { 2.0 * w } else { w };
                targets[i].push(j);
                cumulative[i].push(acc);
            }
        }
        Steps { targets, cumulative }
    }

    fn step(&self, i: usize, rng: &mut impl Rng) -> Option<usize> {
        let c = &self.cumulative[i];
        let total = *c.last()?;
        let x = rng.random::<f64>() * total;
        let k = c.partition_point(|&v| v <= x).min(c.len() - 1);
        Some(self.targets[i][k])
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let results: Vec<(f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|inst| {
            let mut rng = named_stream(inst, "acceptance-1");
            let n = rng.random_range(6..=40);
            let b = rng.random_range(1..=4usize.min(n));
            let window = rng.random_range(1..=5);
            let g = dense_random_graph(&mut rng, n);
            let model = fit_dcsbm(&g, &random_grouping(&mut rng, n, b)).unwrap();
            let samples: Vec<Steps> = (0..200)
                .map(|s| Steps::new(&model.sample(child_seed(inst, "acceptance-1-graph", s)).unwrap()))
                .collect();
            let (mut sum_err, mut tv_max) = (0.0f64, 0.0f64);
            for c in 0..3 {
                let center = rng.random_range(0..n);
                let row = model.baseline_row(center, window).unwrap();
                sum_err = sum_err.max((row.iter().sum::<f64>() - 1.0).abs());
                let walks = 100_000;
                let mut freq = vec![0.0; n];
                let mut wrng = named_stream(child_seed(inst, "acceptance-1-walk", c), "walks");
                for _ in 0..walks {
                    let mut at = center;
                    for _ in 0..window {
                        // Annealed walk: each step uses a freshly drawn sample graph,
                        // redrawn while the current node is isolated in it.
                        at = loop {
                            let s = &samples[wrng.random_range(0..samples.len())];
                            if let Some(next) = s.step(at, &mut wrng) {
                                break next;
                            }
                        };
                        freq[at] += 1.0;
                    }
                }
                let total = (walks * window) as f64;
                let tv = 0.5 * freq.iter().zip(&row).map(|(f, p)| (f / total - p).abs()).sum::<f64>();
                tv_max = tv_max.max(tv);
            }
            (sum_err, tv_max)
        })
        .collect();
    let elapsed = start.elapsed();
    let sum_err = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let tv = results.iter().map(|r| r.1).fold(0.0, f64::max);
    check(
        sum_err <= 1e-10 && tv < 0.05 && elapsed < Duration::from_secs(120),
        format!(
            "baseline rows vs annealed walks on 50 instances: max |sum-1| {sum_err:.1e}, max TV {tv:.4}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for inst in 0..20u64 {
        let mut rng = named_stream(inst, "acceptance-2");
        let n = rng.random_range(3..=50);
        let extra = rng.random_range(0..3 * n);
        let g = random_graph(&mut rng, n, extra);
        let base = config_model_baseline(&g).unwrap();
        for window in 1..=5 {
            for i in 0..n {
                let row = base.baseline_row(i, window).unwrap();
                for (j, p) in row.iter().enumerate() {
                    worst = worst.max((p - g.degree(j) / g.total_weight()).abs());
                }
            }
        }
    }
    // Equal degrees: a cycle under the configuration model, and the ER null.
    let mut worst_regular = 0.0f64;
    for n in [3, 10, 37] {
        let cycle = Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n, 1.0))).unwrap();
        for base in [config_model_baseline(&cycle).unwrap(), erdos_renyi_baseline(n).unwrap()] {
            for window in [1, 4] {
                for i in 0..n {
                    for p in base.baseline_row(i, window).unwrap() {
                        worst_regular = worst_regular.max((p - 1.0 / n as f64).abs());
                    }
                }
            }
        }
    }
    check(
        worst <= 1e-12 && worst_regular <= 1e-12,
        format!("single-group baseline: max error to d_j/2m {worst:.1e}, to 1/N {worst_regular:.1e}"),
    )
}

fn criterion_3() -> Outcome {
    let (mut gap, mut err) = (0.0f64, 0.0f64);
    for inst in 0..20u64 {
        let mut rng = named_stream(inst, "acceptance-3");
        let n = rng.random_range(4..=30);
        let extra = rng.random_range(0..2 * n);
        let g = random_graph(&mut rng, n, extra);
        let window = rng.random_range(1..=5);
        let pd = exact_window_transition(&g, window).unwrap();
        let b = rng.random_range(1..=4usize.min(n));
        let models = [config_model_baseline(&g).unwrap(), fit_dcsbm(&g, &random_grouping(&mut rng, n, b)).unwrap()];
        for base in &models {
            let pmi = ResidualPmi::new(&g, &pd, base).unwrap();
            gap = gap.max(pmi.marginal_gap());
            let null = base.windowed(window).unwrap();
            for i in 0..n {
                for (j, p) in pd.row(i) {
                    let r = p.ln() - null.prob(i, j).ln();
                    err = err.max((r - pmi.value(i, j).unwrap()).abs());
                }
            }
        }
    }
    check(
        gap <= 1e-10 && err <= 1e-10,
        format!("residual vs residual PMI on 20 graphs: marginal gap {gap:.1e}, max difference {err:.1e}"),
    )
}

fn criterion_4() -> Outcome {
    let (mut worst_rank, mut worst_full) = (0.0f64, 0.0f64);
    for inst in 0..4u64 {
        let mut rng = named_stream(inst, "acceptance-4");
        let n = [50, 100, 150, 200][inst as usize];
        let g = random_graph(&mut rng, n, 2 * n);
        let pd = exact_window_transition(&g, 3).unwrap();
        let r = residual_matrix(&pd, &config_model_baseline(&g).unwrap()).unwrap();
        let dense = r.matrix().to_dense();
        let norm = dense.norm();
        // Squared singular values from the Gram matrix.
        let mut eig: Vec<f64> = SymmetricEigen::new(dense.transpose() * &dense).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        for k in [1, 5, 16, 32] {
            let svd = truncated_svd(&r, k, &SvdOptions::default()).unwrap();
            let got = (&dense - svd.reconstruct()).norm();
            let optimum = eig[k..].iter().map(|l| l.max(0.0)).sum::<f64>().sqrt();
            worst_rank = worst_rank.max((got - optimum).abs() / norm);
        }
        let full = truncated_svd(&r, n, &SvdOptions::default()).unwrap();
        worst_full = worst_full.max((&dense - full.reconstruct()).norm() / norm);
    }
    check(
        worst_rank <= 1e-6 && worst_full <= 1e-8,
        format!("rank-K error vs optimum {worst_rank:.1e} relative, full-rank reconstruction {worst_full:.1e}"),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let n = 2000;
    let mut corr = Vec::new();
    for seed in 0..10 {
        let pp = generate_connected_planted_partition(n, 2, 0.05, DegreeSpec::default_power_law(), seed, 50).unwrap();
        let exact = exact_window_transition(&pp.graph, 10).unwrap();
        let coarse = mean_row_correlation(&exact, &block_approx_transition(&pp.graph, 200, 10, None).unwrap());
        let full = mean_row_correlation(&exact, &block_approx_transition(&pp.graph, n, 10, None).unwrap());
        corr.push((coarse, full));
    }
    let elapsed = start.elapsed();
    let coarse = corr.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let full = corr.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    check(
        coarse >= 0.80 && full >= 1.0 - 1e-9 && elapsed < Duration::from_secs(300),
        format!(
            "block approximation on 10 graphs, N=2000: min correlation {coarse:.4} at 200 blocks, \
             {full:.12} at N blocks, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Outcome {
    let g = Graph::from_edges(
        10,
        [
            (0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 5, 1.0),
            (5, 6, 1.0), (6, 7, 1.0), (7, 5, 1.0), (7, 8, 1.0), (8, 9, 1.0), (1, 6, 1.0),
        ],
    )
    .unwrap();
    let noise = NoiseDistribution::from_degrees(&g).unwrap();
    let cfg = TrainerConfig { dim: 10, seed: 3, ..TrainerConfig::default() };
    let report =
        verify_unbiasedness(&g, &noise, &cfg, &[10_000, 100_000, 1_000_000], &VerifyOptions::default()).unwrap();
    let kl: Vec<f64> = report.iter().map(|p| p.mean_kl).collect();
    let monotone = kl.windows(2).all(|w| w[1] <= w[0]);

    // Central finite differences of the loss against the analytic gradient.
    let mut rng = named_stream(0, "acceptance-6");
    let mut worst = 0.0f64;
    for objective in [Objective::NegativeSampling, Objective::Nce] {
        for _ in 0..100 {
            let dim = 6;
            let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.random_range(-1.0..1.0)).collect() };
            let center = draw(dim);
            let contexts: Vec<Vec<f64>> = (0..4).map(|_| draw(dim)).collect();
            let log_noise = draw(4).iter().map(|x| x - 2.0).collect::<Vec<_>>();
            let offset = draw(1)[0];
            let eval = |u: &[f64], vs: &[Vec<f64>], c: f64| {
                let cands: Vec<Candidate> = vs
                    .iter()
                    .enumerate()
                    .map(|(k, v)| Candidate { vector: v, log_noise: log_noise[k], positive: k == 0 })
                    .collect();
                let mut gu = vec![0.0; dim];
                let mut gv = vec![vec![0.0; dim]; vs.len()];
                let (loss, gc) = pair_loss_and_gradient(objective, u, &cands, c, &mut gu, &mut gv);
                (loss, gu, gv, gc)
            };
            let (_, gu, gv, gc) = eval(&center, &contexts, offset);
            let h = 1e-5;
            let mut analytic = Vec::new();
            let mut numeric = Vec::new();
            for d in 0..dim {
                let (mut up, mut dn) = (center.clone(), center.clone());
                up[d] += h;
                dn[d] -= h;
                numeric.push((eval(&up, &contexts, offset).0 - eval(&dn, &contexts, offset).0) / (2.0 * h));
                analytic.push(gu[d]);
            }
            for k in 0..contexts.len() {
                for d in 0..dim {
                    let (mut up, mut dn) = (contexts.clone(), contexts.clone());
                    up[k][d] += h;
                    dn[k][d] -= h;
                    numeric.push((eval(&center, &up, offset).0 - eval(&center, &dn, offset).0) / (2.0 * h));
                    analytic.push(gv[k][d]);
                }
            }
            if objective == Objective::Nce {
                numeric.push((eval(&center, &contexts, offset + h).0 - eval(&center, &contexts, offset - h).0) / (2.0 * h));
                analytic.push(gc);
            }
            let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
            worst = worst.max(diff / scale);
        }
    }
    check(
        monotone && kl[2] < 0.05 && worst < 1e-5,
        format!(
            "SGNS with degree noise, KL at 1e4/1e5/1e6 pairs {:.4}/{:.4}/{:.4}, gradient relative error {worst:.1e}",
            kl[0], kl[1], kl[2]
        ),
    )
}

fn criterion_7() -> Outcome {
    // Core of 10 hubs, periphery of 90 low-degree nodes attached mostly to the core.
    let (n_core, n) = (10, 100);
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n_core)).collect();
    let grouping = NodeGrouping::new(labels, 2).unwrap();
    let degrees: Vec<f64> = (0..n).map(|i| if i < n_core { 30.0 } else { 4.0 }).collect();
    let stubs = DMatrix::from_row_slice(2, 2, &[120.0, 180.0, 180.0, 180.0]);
    let sampler = DcsbmSampler::new(degrees, grouping, stubs).unwrap();
    let g = (0..100)
        .map(|k| sampler.sample(child_seed(7, "acceptance-7", k)).unwrap())
        .find(Graph::is_connected)
        .ok_or("no connected core-periphery sample")?;
    let corpus = simulate_walks(&g, 10, 1000, 7).unwrap();
    let visits = corpus.visit_frequency();
    let l1: f64 = (0..n).map(|i| (visits[i] - g.degree(i) / g.total_weight()).abs()).sum();
    let core_visits: f64 = visits[..n_core].iter().sum();
    let core_share = n_core as f64 / n as f64;
    check(
        corpus.total_steps() >= 1_000_000 && l1 < 0.02 && core_visits > core_share,
        format!(
            "{} walk steps: L1 to d/2m {l1:.4}, core visits {core_visits:.3} vs population share {core_share:.2}",
            corpus.total_steps()
        ),
    )
}

fn criterion_8() -> Outcome {
    let mus = [0.05, 0.25, 0.5];
    let means: Vec<f64> = mus
        .iter()
        .map(|&mu| {
            let aucs: Vec<f64> = (0..10u64)
                .into_par_iter()
                .map(|seed| {
                    let pp = generate_connected_planted_partition(1000, 2, mu, DegreeSpec::default_power_law(), seed, 50)
                        .unwrap();
                    let cfg = R2vConfig {
                        svd: SvdOptions { seed: child_seed(seed, "svd", 0), ..SvdOptions::default() },
                        ..R2vConfig::default()
                    };
                    let e = r2v_core::residual2vec(&pp.graph, &cfg).unwrap();
                    community_similarity_auc(&e, &pp.labels, 10_000, seed).unwrap()
                })
                .collect();
            aucs.iter().sum::<f64>() / aucs.len() as f64
        })
        .collect();
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    check(
        means[0] > 0.9 && decreasing,
        format!(
            "community AUC, N=1000, mu 0.05/0.25/0.5: {:.4}/{:.4}/{:.4}",
            means[0], means[1], means[2]
        ),
    )
}

fn criterion_9() -> Outcome {
    let outcomes: Vec<(f64, f64)> = (0..10u64)
        .into_par_iter()
        .map(|seed| {
            let pp =
                generate_connected_planted_partition(1000, 2, 0.05, DegreeSpec::default_power_law(), seed, 50).unwrap();
            let cfg = R2vConfig {
                svd: SvdOptions { seed: child_seed(seed, "svd", 0), ..SvdOptions::default() },
                ..R2vConfig::default()
            };
            let out = link_prediction(&pp.graph, &cfg, 0.5, seed, &[OffsetMode::None, OffsetMode::Degree]).unwrap();
            (out.aucs[0].1, out.aucs[1].1)
        })
        .collect();
    let none = outcomes.iter().map(|o| o.0).sum::<f64>() / 10.0;
    let degree = outcomes.iter().map(|o| o.1).sum::<f64>() / 10.0;
    check(
        degree - none > 0.01 && none > 0.6 && degree > 0.6,
        format!("link prediction, N=1000, rho=0.5: AUC {none:.4} without offsets, {degree:.4} with degree offsets"),
    )
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let graph = dir.path().join("graph.tsv");
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_r2v")).args(args).output().map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(String::from_utf8_lossy(&out.stderr).into_owned())
        }
    };
    let g = graph.to_str().unwrap();
    run(&["generate", "--planted", "--n", "600", "--mu", "0.1", "--connected", "--seed", "3", "--output", g])?;
    let mut files = Vec::new();
    let out = dir.path().join("emb.tsv");
    for _ in 0..2 {
        // Above the dense limit, so the randomized solver and its seed are exercised.
        run(&["embed", "--input", g, "--K", "32", "--seed", "11", "--output", out.to_str().unwrap()])?;
        files.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    check(
        files[0] == files[1] && !files[0].is_empty(),
        format!("two embed runs with identical flags: {} bytes, identical {}", files[0].len(), files[0] == files[1]),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (id, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("[PASS] criterion {id}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {id}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
