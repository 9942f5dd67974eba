//! Skip-gram trainer with negative sampling (NS) or noise contrastive
//! estimation (NCE), for checking which distribution each objective fits.
//!
//! Negative sampling scores a pair by `sigmoid(u_i . v_j)`. Its fixed point
//! is the model `P(j|i) ∝ p0(j) exp(u_i . v_j)`: the noise distribution acts
//! as a baseline. NCE scores with `sigmoid(u_i . v_j - ln p0(j) - c)` and
//! converges to the plain softmax `P(j|i) ∝ exp(u_i . v_j)`.
//!
//! Training is single-threaded and deterministic given the seed.

use nalgebra::DMatrix;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::residual::Embedding;
use crate::rng;
use crate::transition::{empirical_window_transition, simulate_walks, WalkCorpus};

/// Strictly positive distribution over nodes used to draw negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDistribution {
    probs: Vec<f64>,
    gamma: f64,
}

impl NoiseDistribution {
    /// Normalizes `weights`; every weight must be positive.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::with_gamma(weights, 1.0)
    }

    fn with_gamma(weights: Vec<f64>, gamma: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("noise distribution needs at least one node"));
        }
        if let Some(j) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid(format!(
                "noise weight of node {j} must be positive, got {}",
                weights[j]
            )));
        }
        let total: f64 = weights.iter().sum();
        Ok(NoiseDistribution {
            probs: weights.into_iter().map(|w| w / total).collect(),
            gamma,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    /// `p0(j) ∝ freq(j)^gamma`.
    pub fn from_frequencies(freq: &[f64], gamma: f64) -> Result<Self> {
        Self::with_gamma(freq.iter().map(|f| f.powf(gamma)).collect(), gamma)
    }

    /// `p0(j) = d_j / 2m`, the stationary visit frequency of the walk.
    pub fn from_degrees(g: &Graph) -> Result<Self> {
        Self::from_frequencies(g.degrees(), 1.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    NegativeSampling,
    Nce,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Learning rate decays linearly from `lr_start` to `lr_end`.
    pub lr_start: f64,
    pub lr_end: f64,
    pub objective: Objective,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            dim: 64,
            negatives: 5,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 0.0001,
            objective: Objective::NegativeSampling,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.negatives == 0 || self.epochs == 0 {
            return Err(Error::invalid("dim, negatives and epochs must be positive"));
        }
        if !(self.lr_start > 0.0 && self.lr_end > 0.0 && self.lr_end <= self.lr_start) {
            return Err(Error::invalid(
                "learning rate must be positive and non-increasing",
            ));
        }
        Ok(())
    }
}

/// One context candidate of a training pair.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub vector: &'a [f64],
    /// `ln p0(j)`; used by NCE only.
    pub log_noise: f64,
    /// 1 for the observed context, 0 for a noise sample.
    pub positive: bool,
}

/// Negative log-likelihood of one positive and its negatives, with its
/// gradient. `grad_center` receives d/du, `grad_contexts[k]` d/dv_k; the
/// return value is `(loss, d/dc)`. `offset` is the NCE constant `c`.
pub fn pair_loss_and_gradient(
    objective: Objective,
    center: &[f64],
    candidates: &[Candidate<'_>],
    offset: f64,
    grad_center: &mut [f64],
    grad_contexts: &mut [Vec<f64>],
) -> (f64, f64) {
    grad_center.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    let mut grad_offset = 0.0;
    for (cand, grad_v) in candidates.iter().zip(grad_contexts.iter_mut()) {
        let dot: f64 = center.iter().zip(cand.vector).map(|(a, b)| a * b).sum();
        let score = match objective {
            Objective::NegativeSampling => dot,
            Objective::Nce => dot - cand.log_noise - offset,
        };
        // d(loss)/d(score)
        let (l, ds) = if cand.positive {
            (softplus(-score), sigmoid(score) - 1.0)
        } else {
            (softplus(score), sigmoid(score))
        };
        loss += l;
        for ((gc, gv), (&u, &v)) in grad_center
            .iter_mut()
            .zip(grad_v.iter_mut())
            .zip(center.iter().zip(cand.vector))
        {
            *gc += ds * v;
            *gv = ds * u;
        }
        if objective == Objective::Nce {
            grad_offset -= ds;
        }
    }
    (loss, grad_offset)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub embedding: Embedding,
    pub objective: Objective,
    /// Learned NCE constant `c`; zero for negative sampling.
    pub offset: f64,
    /// Mean loss per pair, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

/// SGD over all center–context pairs of `corpus` (forward window), with
/// `cfg.negatives` noise draws per positive.
pub fn train(
    corpus: &WalkCorpus,
    window: usize,
    noise: &NoiseDistribution,
    cfg: &TrainerConfig,
) -> Result<Trained> {
    cfg.validate()?;
    let n = corpus.n_nodes();
    if noise.len() != n {
        return Err(Error::invalid(format!(
            "noise covers {} nodes, corpus has {n}",
            noise.len()
        )));
    }
    let pairs: Vec<(usize, usize)> = if window == 0 {
        Vec::new()
    } else {
        corpus.pairs(window).collect()
    };
    train_pairs(n, pairs, noise, cfg)
}

/// Same as [`train`] on an explicit pair list.
pub fn train_pairs(
    n: usize,
    mut pairs: Vec<(usize, usize)>,
    noise: &NoiseDistribution,
    cfg: &TrainerConfig,
) -> Result<Trained> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::invalid("corpus yields no center-context pairs"));
    }
    let dim = cfg.dim;
    let mut rng = rng::named_stream(cfg.seed, "sgns");
    let mut center: Vec<f64> = (0..n * dim)
        .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut context = vec![0.0; n * dim];
    let mut offset = 0.0;
    let sampler = WeightedAliasIndex::new(noise.probs().to_vec())
        .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
    let log_noise: Vec<f64> = noise.probs().iter().map(|p| p.ln()).collect();

    let k = cfg.negatives;
    let mut ids = vec![0usize; k + 1];
    let mut grad_u = vec![0.0; dim];
    let mut grad_v = vec![vec![0.0; dim]; k + 1];
    let total_steps = (cfg.epochs * pairs.len()) as f64;
    let mut step = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        pairs.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &(i, j) in &pairs {
            let lr = cfg.lr_start - (cfg.lr_start - cfg.lr_end) * step as f64 / total_steps;
            step += 1;
            ids[0] = j;
            for slot in ids.iter_mut().skip(1) {
                *slot = sampler.sample(&mut rng);
            }
            let (loss, grad_c) = {
                let u = &center[i * dim..(i + 1) * dim];
                let candidates: Vec<Candidate<'_>> = ids
                    .iter()
                    .enumerate()
                    .map(|(pos, &c)| Candidate {
                        vector: &context[c * dim..(c + 1) * dim],
                        log_noise: log_noise[c],
                        positive: pos == 0,
                    })
                    .collect();
                pair_loss_and_gradient(cfg.objective, u, &candidates, offset, &mut grad_u, &mut grad_v)
            };
            epoch_loss += loss;
            for (&c, g) in ids.iter().zip(&grad_v) {
                for (v, gv) in context[c * dim..(c + 1) * dim].iter_mut().zip(g) {
                    *v -= lr * gv;
                }
            }
            for (u, gu) in center[i * dim..(i + 1) * dim].iter_mut().zip(&grad_u) {
                *u -= lr * gu;
            }
            offset -= lr * grad_c;
        }
        let mean = epoch_loss / pairs.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged(format!("non-finite loss in epoch {epoch}")));
        }
        epoch_losses.push(mean);
        let l = epoch_losses.len();
        if l >= 4 && (l - 3..l).all(|e| epoch_losses[e] > epoch_losses[e - 1]) {
            return Err(Error::Diverged(format!(
                "loss rose for 3 consecutive epochs: {:?}",
                &epoch_losses[l - 4..]
            )));
        }
    }

    Ok(Trained {
        embedding: Embedding {
            center: DMatrix::from_row_slice(n, dim, &center),
            context: DMatrix::from_row_slice(n, dim, &context),
            spectrum: None,
        },
        objective: cfg.objective,
        offset,
        epoch_losses,
    })
}

/// `P(j|i) = p0(j) exp(u_i . v_j) / sum_j' p0(j') exp(u_i . v_j')`.
pub fn model_distribution(e: &Embedding, noise: &NoiseDistribution, i: usize) -> Vec<f64> {
    let logits: Vec<f64> = noise
        .probs()
        .iter()
        .enumerate()
        .map(|(j, p)| p.ln() + e.center_context_dot(i, j))
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// The distribution a trained model estimates: the noise-weighted model
/// for negative sampling, the plain softmax for NCE.
pub fn fitted_distribution(t: &Trained, noise: &NoiseDistribution, i: usize) -> Result<Vec<f64>> {
    match t.objective {
        Objective::NegativeSampling => Ok(model_distribution(&t.embedding, noise, i)),
        Objective::Nce => Ok(model_distribution(
            &t.embedding,
            &NoiseDistribution::uniform(noise.len())?,
            i,
        )),
    }
}

/// `KL(p || q)`, skipping entries where `p` is zero.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub window: usize,
    pub walk_length: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            window: 2,
            walk_length: 80,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlPoint {
    /// Requested corpus size in pairs.
    pub target_pairs: usize,
    /// Pairs actually used (whole walker rounds).
    pub pairs: usize,
    pub mean_kl: f64,
}

/// Trains on corpora of increasing size and reports the mean over centers
/// of `KL(empirical P_d(·|i) || fitted P(·|i))` for each.
pub fn verify_unbiasedness(
    g: &Graph,
    noise: &NoiseDistribution,
    cfg: &TrainerConfig,
    corpus_sizes: &[usize],
    opts: &VerifyOptions,
) -> Result<Vec<KlPoint>> {
    if opts.window == 0 || opts.window >= opts.walk_length {
        return Err(Error::invalid("window must satisfy 1 <= window < walk length"));
    }
    let n = g.n_nodes();
    let per_round = n * (opts.walk_length - opts.window) * opts.window;
    corpus_sizes
        .iter()
        .enumerate()
        .map(|(idx, &size)| {
            let rounds = size.div_ceil(per_round).max(1);
            let corpus_seed = rng::child_seed(opts.seed, "verify-corpus", idx as u64);
            let corpus = simulate_walks(g, rounds, opts.walk_length, corpus_seed)?;
            let empirical = empirical_window_transition(&corpus, opts.window)?;
            let trained = train(&corpus, opts.window, noise, cfg)?;
            let mut total = 0.0;
            let mut counted = 0usize;
            for i in 0..n {
                let p = empirical.dense_row(i);
                if p.iter().sum::<f64>() == 0.0 {
                    continue;
                }
                total += kl_divergence(&p, &fitted_distribution(&trained, noise, i)?);
                counted += 1;
            }
            Ok(KlPoint {
                target_pairs: size,
                pairs: corpus.n_pairs(opts.window),
                mean_kl: total / counted.max(1) as f64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;

    #[test]
    fn noise_validation() {
        assert!(NoiseDistribution::new(vec![1.0, 0.0]).is_err());
        assert!(NoiseDistribution::new(vec![]).is_err());
        let n = NoiseDistribution::from_frequencies(&[1.0, 4.0], 0.5).unwrap();
        assert!((n.probs()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(n.gamma(), 0.5);
        let d = NoiseDistribution::from_degrees(&star3()).unwrap();
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(d.probs()[0], 0.5);
    }

    #[test]
    fn zero_vectors_return_noise() {
        let e = Embedding {
            center: DMatrix::zeros(3, 2),
            context: DMatrix::zeros(3, 2),
            spectrum: None,
        };
        let noise = NoiseDistribution::new(vec![1.0, 2.0, 5.0]).unwrap();
        let p = model_distribution(&e, &noise, 1);
        for (a, b) in p.iter().zip(noise.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_noise_is_softmax() {
        let e = Embedding {
            center: DMatrix::from_row_slice(2, 1, &[1.0, 2.0]),
            context: DMatrix::from_row_slice(2, 1, &[0.5, -1.0]),
            spectrum: None,
        };
        let p = model_distribution(&e, &NoiseDistribution::uniform(2).unwrap(), 0);
        let z = 0.5f64.exp() + (-1.0f64).exp();
        assert!((p[0] - 0.5f64.exp() / z).abs() < 1e-15);
    }

    #[test]
    fn single_node_corpus_terminates() {
        let c = WalkCorpus::from_sequences(1, vec![vec![0; 20]]).unwrap();
        let noise = NoiseDistribution::uniform(1).unwrap();
        let cfg = TrainerConfig { dim: 2, epochs: 2, ..TrainerConfig::default() };
        let t = train(&c, 2, &noise, &cfg).unwrap();
        assert!(t.embedding.center.iter().all(|v| v.is_finite()));
        assert_eq!(model_distribution(&t.embedding, &noise, 0), vec![1.0]);
    }

    #[test]
    fn empty_corpus_is_error() {
        let c = WalkCorpus::from_sequences(2, vec![vec![0, 1]]).unwrap();
        let noise = NoiseDistribution::uniform(2).unwrap();
        assert!(train(&c, 2, &noise, &TrainerConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        let c = WalkCorpus::from_sequences(2, vec![vec![0, 1, 0]]).unwrap();
        let noise = NoiseDistribution::uniform(2).unwrap();
        let bad = TrainerConfig { lr_end: 0.5, ..TrainerConfig::default() };
        assert!(train(&c, 1, &noise, &bad).is_err());
        let bad = TrainerConfig { negatives: 0, ..TrainerConfig::default() };
        assert!(train(&c, 1, &noise, &bad).is_err());
    }

    #[test]
    fn divergence_is_detected() {
        let c = simulate_walks(&triangle(), 20, 40, 1).unwrap();
        let noise = NoiseDistribution::uniform(3).unwrap();
        let cfg = TrainerConfig {
            dim: 3,
            epochs: 8,
            lr_start: 1e6,
            lr_end: 1e6,
            ..TrainerConfig::default()
        };
        assert!(matches!(train(&c, 2, &noise, &cfg), Err(Error::Diverged(_))));
    }

    #[test]
    fn kl_basics() {
        assert_eq!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert!(kl_divergence(&[1.0, 0.0], &[0.5, 0.5]) > 0.69);
    }
}
