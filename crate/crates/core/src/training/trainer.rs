//! Training loops for the generator family and the classifier.
//!
//! Every batch rebuilds the graph. Randomness comes from streams derived
//! from (run seed, stream, step index): latent noise, rollout sampling,
//! dropout, and epoch shuffling never perturb one another, so switching a
//! term off cannot shift what the remaining terms draw.

use indexmap::IndexMap;
use rand::seq::SliceRandom;

use super::losses::{bow_loss, kl_divergence_node, reconstruction_loss};
use super::reinforce::{reinforce_objective, RewardRecord};
use super::schedule::KlSchedule;
use super::{LossBreakdown, MetricsRecord, TrainConfig};
use crate::autodiff::{AdamConfig, AdamState, BoundParams, Graph, TensorId};
use crate::corpus::EncodedPair;
use crate::error::{Error, Result};
use crate::models::{Classifier, DecodeMode, Generator, ModelConfig, ModelKind};
use crate::rng::{derive, Stream};

/// Scalar component nodes of one batch objective, kept addressable so the
/// parts can be differentiated independently.
pub struct BatchGraph {
    pub graph: Graph,
    pub bound: BoundParams,
    /// Full objective: variational − λ·policy.
    pub total: TensorId,
    /// Reconstruction + weight·KL + BoW (reconstruction alone for the base).
    pub variational: TensorId,
    /// Batch-mean policy term J', present when policy training is active.
    pub policy: Option<TensorId>,
    pub sums: BatchSums,
}

/// Batch-level accumulators for the metrics log.
#[derive(Debug, Clone, Copy, Default)]
pub struct BatchSums {
    pub reconstruction: f64,
    pub kl: f64,
    pub bow: f64,
    pub policy: f64,
    pub target_tokens: usize,
    pub examples: usize,
}

impl BatchSums {
    fn breakdown(&self, kl_weight: f64, lambda: f64) -> LossBreakdown {
        let n = self.examples.max(1) as f64;
        let reconstruction = self.reconstruction / n;
        let kl = self.kl / n;
        let bow = self.bow / n;
        let policy = self.policy / n;
        LossBreakdown {
            kl,
            reconstruction,
            bow,
            policy,
            total: reconstruction + kl_weight * kl + bow - lambda * policy,
        }
    }
}

/// Everything one batch build needs beyond the data itself.
pub struct StepOptions<'a> {
    pub kl_weight: f64,
    pub lambda: f64,
    /// Frozen classifier; `Some` switches the policy term on.
    pub policy_classifier: Option<&'a Classifier>,
    pub seed: u64,
    /// Index for the latent-noise and sampling streams, usually the global step.
    pub step_index: u64,
    pub max_decode_len: usize,
    pub temperature: f64,
}

/// Build the full objective for one batch of encoded pairs.
pub fn build_batch_loss(
    model: &Generator,
    batch: &[EncodedPair],
    opts: &StepOptions,
) -> Result<BatchGraph> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut g = Graph::new();
    let bound = model.bind(&mut g);
    let mut noise_rng = derive(opts.seed, Stream::LatentNoise, opts.step_index);
    let mut sample_rng = derive(opts.seed, Stream::TokenSampling, opts.step_index);

    let mut recon_nodes = Vec::with_capacity(batch.len());
    let mut kl_nodes = Vec::with_capacity(batch.len());
    let mut bow_nodes = Vec::with_capacity(batch.len());
    let mut policy_nodes = Vec::with_capacity(batch.len());
    let mut sums = BatchSums { examples: batch.len(), ..BatchSums::default() };

    for pair in batch {
        let cond = model.condition(&mut g, &bound, &pair.source, pair.emoji)?;
        let z = if model.kind.is_latent() {
            let x = model.encode_response(&mut g, &bound, &pair.response)?;
            let q = model.posterior(&mut g, &bound, x, &cond)?;
            let p = model.prior(&mut g, &bound, &cond)?;
            let kl = kl_divergence_node(&mut g, &q, &p)?;
            kl_nodes.push(kl);
            sums.kl += g.value(kl)[0];
            let noise =
                crate::models::sample_standard_normal(&mut noise_rng, model.cfg.latent_dim);
            Some(crate::models::reparameterize(&mut g, &q, &noise)?)
        } else {
            None
        };

        let decoded = model.decode_teacher(&mut g, &bound, &cond, z, &pair.response)?;
        let recon = reconstruction_loss(&mut g, decoded.logits, &decoded.targets)?;
        recon_nodes.push(recon);
        sums.reconstruction += g.value(recon)[0];
        sums.target_tokens += decoded.targets.len();

        if let Some(z) = z {
            let bow = bow_loss(&mut g, &bound, z, cond.c, &decoded.targets)?;
            bow_nodes.push(bow);
            sums.bow += g.value(bow)[0];

            if let Some(classifier) = opts.policy_classifier {
                let mode = DecodeMode::Sample {
                    max_len: opts.max_decode_len,
                    temperature: opts.temperature,
                };
                let rollout =
                    model.decode_rollout(&mut g, &bound, &cond, Some(z), mode, &mut sample_rng)?;
                let surface = rollout.surface();
                let node = if surface.is_empty() {
                    // Nothing for the classifier to judge; contributes nothing.
                    g.scalar(0.0)
                } else {
                    let reward = classifier.probability_of(surface, pair.emoji)?;
                    let rank = classifier.rank_of(surface, pair.emoji)?;
                    let baseline = classifier.probability_of(&pair.response, pair.emoji)?;
                    let record = RewardRecord::new(reward, baseline, rank)?;
                    let stacked = g.stack_rows(&rollout.logits)?;
                    let nll = g.cross_entropy(stacked, &rollout.emitted)?;
                    let nll_sum = g.sum(nll);
                    let log_prob_sum = g.scale(nll_sum, -1.0);
                    reinforce_objective(&mut g, log_prob_sum, &record)
                };
                policy_nodes.push(node);
                sums.policy += g.value(node)[0];
            }
        }
    }

    let recon_cat = g.concat(&recon_nodes)?;
    let mut variational = g.mean(recon_cat);
    if !kl_nodes.is_empty() {
        let kl_cat = g.concat(&kl_nodes)?;
        let kl_mean = g.mean(kl_cat);
        let weighted = g.scale(kl_mean, opts.kl_weight);
        variational = g.add(variational, weighted)?;
    }
    if !bow_nodes.is_empty() {
        let bow_cat = g.concat(&bow_nodes)?;
        let bow_mean = g.mean(bow_cat);
        variational = g.add(variational, bow_mean)?;
    }

    let (total, policy) = if policy_nodes.is_empty() {
        (variational, None)
    } else {
        let policy_cat = g.concat(&policy_nodes)?;
        let policy_mean = g.mean(policy_cat);
        let scaled = g.scale(policy_mean, -opts.lambda);
        (g.add(variational, scaled)?, Some(policy_mean))
    };

    Ok(BatchGraph { graph: g, bound, total, variational, policy, sums })
}

/// One optimizer step over a built batch.
pub fn apply_step(
    model: &mut Generator,
    batch_graph: &BatchGraph,
    state: &mut AdamState,
    adam: &AdamConfig,
) -> Result<()> {
    let grads = batch_graph.graph.backward(batch_graph.total)?;
    let by_name = batch_graph.bound.gradients(&grads);
    state.update(&mut model.params, &by_name, adam)
}

fn epoch_record(
    epoch: usize,
    split: &str,
    totals: &BatchSums,
    kl_weight: f64,
    lambda: f64,
) -> MetricsRecord {
    let breakdown = totals.breakdown(kl_weight, lambda);
    let perplexity = if totals.target_tokens > 0 {
        (totals.reconstruction / totals.target_tokens as f64).exp()
    } else {
        f64::NAN
    };
    MetricsRecord {
        epoch,
        split: split.to_string(),
        kl: breakdown.kl,
        reconstruction: breakdown.reconstruction,
        bow: breakdown.bow,
        policy: breakdown.policy,
        total: breakdown.total,
        perplexity,
        kl_weight,
    }
}

fn merge(into: &mut BatchSums, other: &BatchSums) {
    into.reconstruction += other.reconstruction;
    into.kl += other.kl;
    into.bow += other.bow;
    into.policy += other.policy;
    into.target_tokens += other.target_tokens;
    into.examples += other.examples;
}

pub struct TrainResult<M> {
    pub model: M,
    pub metrics: Vec<MetricsRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Train one generator. Latent kinds must supply a converged base model;
/// the reinforced kind also needs the frozen classifier.
pub fn train_generator(
    kind: ModelKind,
    cfg: ModelConfig,
    train: &[EncodedPair],
    validation: &[EncodedPair],
    tc: &TrainConfig,
    base: Option<&Generator>,
    classifier: Option<&Classifier>,
) -> Result<TrainResult<Generator>> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = Generator::new(kind, cfg, tc.seed)?;
    if kind.is_latent() {
        let base = base.ok_or_else(|| Error::MissingBaseCheckpoint { kind: kind.to_string() })?;
        model.init_from_base(base)?;
    }
    if kind == ModelKind::Reinforced && classifier.is_none() {
        return Err(Error::Config("reinforced training requires a frozen classifier".into()));
    }

    let steps_per_epoch = train.len().div_ceil(tc.batch_size.max(1));
    let schedule = KlSchedule::new(tc.kl_target, tc.kl_anneal_epochs, steps_per_epoch);
    let adam = AdamConfig { lr: tc.lr, clip: tc.clip, ..AdamConfig::default() };
    let mut state = AdamState::new();
    let mut metrics = Vec::new();
    let mut global_step = 0u64;

    let mut best_total = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params: Option<crate::autodiff::ParamStore> = None;
    let mut bad_epochs = 0usize;
    let mut stopped_early = false;

    for epoch in 0..tc.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut derive(tc.seed, Stream::Shuffle, epoch as u64));

        let policy_active = kind == ModelKind::Reinforced && epoch >= tc.policy_start_epoch;
        let mut epoch_sums = BatchSums::default();
        let mut epoch_weight = schedule.weight(global_step);

        for chunk in order.chunks(tc.batch_size.max(1)) {
            let batch: Vec<EncodedPair> = chunk.iter().map(|&i| train[i].clone()).collect();
            epoch_weight = schedule.weight(global_step);
            let opts = StepOptions {
                kl_weight: epoch_weight,
                lambda: tc.lambda,
                policy_classifier: if policy_active { classifier } else { None },
                seed: tc.seed,
                step_index: global_step,
                max_decode_len: tc.max_decode_len,
                temperature: tc.sample_temperature,
            };
            let built = build_batch_loss(&model, &batch, &opts)?;
            apply_step(&mut model, &built, &mut state, &adam)?;
            merge(&mut epoch_sums, &built.sums);
            global_step += 1;
        }
        metrics.push(epoch_record(epoch, "train", &epoch_sums, epoch_weight, tc.lambda));

        if !validation.is_empty() {
            let val_sums = evaluate_split(&model, validation, epoch_weight, tc)?;
            let record = epoch_record(epoch, "validation", &val_sums, epoch_weight, tc.lambda);
            let val_total = record.total;
            metrics.push(record);

            if val_total < best_total {
                best_total = val_total;
                best_epoch = epoch;
                best_params = Some(model.params.clone());
                bad_epochs = 0;
            } else {
                bad_epochs += 1;
                if bad_epochs >= tc.patience {
                    stopped_early = true;
                    break;
                }
            }
        } else {
            best_epoch = epoch;
        }
    }

    if let Some(params) = best_params {
        model.params = params;
    }
    Ok(TrainResult { model, metrics, best_epoch, stopped_early })
}

/// Loss pass without updates: policy off, latent noise from the eval stream.
fn evaluate_split(
    model: &Generator,
    data: &[EncodedPair],
    kl_weight: f64,
    tc: &TrainConfig,
) -> Result<BatchSums> {
    let mut sums = BatchSums::default();
    for (idx, pair) in data.iter().enumerate() {
        let opts = StepOptions {
            kl_weight,
            lambda: 0.0,
            policy_classifier: None,
            seed: tc.seed,
            step_index: u64::MAX / 2 + idx as u64,
            max_decode_len: tc.max_decode_len,
            temperature: tc.sample_temperature,
        };
        let built = build_batch_loss(model, std::slice::from_ref(pair), &opts)?;
        merge(&mut sums, &built.sums);
    }
    Ok(sums)
}

/// Train the emoji classifier on (response → label) pairs.
pub fn train_classifier(
    cfg: ModelConfig,
    train: &[EncodedPair],
    validation: &[EncodedPair],
    tc: &TrainConfig,
) -> Result<TrainResult<Classifier>> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = Classifier::new(cfg, tc.seed)?;
    let adam = AdamConfig { lr: tc.lr, clip: tc.clip, ..AdamConfig::default() };
    let mut state = AdamState::new();
    let mut metrics = Vec::new();
    let mut global_step = 0u64;

    let mut best_total = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params: Option<crate::autodiff::ParamStore> = None;
    let mut bad_epochs = 0usize;
    let mut stopped_early = false;

    for epoch in 0..tc.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut derive(tc.seed, Stream::Shuffle, epoch as u64));

        let mut epoch_nll = 0.0;
        let mut epoch_examples = 0usize;
        for chunk in order.chunks(tc.batch_size.max(1)) {
            let mut g = Graph::new();
            let bound = model.bind(&mut g);
            let mut dropout_rng = derive(tc.seed, Stream::Dropout, global_step);
            let mut nll_nodes = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let pair = &train[i];
                let mask = model.dropout_mask(&mut dropout_rng);
                let logits = model.forward(&mut g, &bound, &pair.response, Some(&mask))?;
                let nll = g.cross_entropy(logits, &[pair.emoji])?;
                let nll = g.sum(nll);
                epoch_nll += g.value(nll)[0];
                nll_nodes.push(nll);
            }
            epoch_examples += chunk.len();
            let cat = g.concat(&nll_nodes)?;
            let loss = g.mean(cat);
            let grads = g.backward(loss)?;
            let by_name = bound.gradients(&grads);
            state.update(&mut model.params, &by_name, &adam)?;
            global_step += 1;
        }
        let train_mean = epoch_nll / epoch_examples.max(1) as f64;
        metrics.push(MetricsRecord {
            epoch,
            split: "train".into(),
            kl: 0.0,
            reconstruction: train_mean,
            bow: 0.0,
            policy: 0.0,
            total: train_mean,
            perplexity: train_mean.exp(),
            kl_weight: 0.0,
        });

        if !validation.is_empty() {
            let mut val_nll = 0.0;
            for pair in validation {
                let mut g = Graph::new();
                let bound = model.bind(&mut g);
                let logits = model.forward(&mut g, &bound, &pair.response, None)?;
                let nll = g.cross_entropy(logits, &[pair.emoji])?;
                val_nll += g.value(nll)[0];
            }
            let val_mean = val_nll / validation.len() as f64;
            metrics.push(MetricsRecord {
                epoch,
                split: "validation".into(),
                kl: 0.0,
                reconstruction: val_mean,
                bow: 0.0,
                policy: 0.0,
                total: val_mean,
                perplexity: val_mean.exp(),
                kl_weight: 0.0,
            });
            if val_mean < best_total {
                best_total = val_mean;
                best_epoch = epoch;
                best_params = Some(model.params.clone());
                bad_epochs = 0;
            } else {
                bad_epochs += 1;
                if bad_epochs >= tc.patience {
                    stopped_early = true;
                    break;
                }
            }
        } else {
            best_epoch = epoch;
        }
    }
    if let Some(params) = best_params {
        model.params = params;
    }
    Ok(TrainResult { model, metrics, best_epoch, stopped_early })
}

/// Classification accuracy of the target label within the top-k
/// probabilities, ties broken by label index.
pub fn classifier_topk_accuracy(
    model: &Classifier,
    data: &[EncodedPair],
    k: usize,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0usize;
    for pair in data {
        if model.rank_of(&pair.response, pair.emoji)? <= k {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Gradients of the full objective, keyed by parameter name. Test hook for
/// the objective-equivalence checks.
pub fn batch_gradients(
    model: &Generator,
    batch: &[EncodedPair],
    opts: &StepOptions,
) -> Result<IndexMap<String, Vec<f64>>> {
    let built = build_batch_loss(model, batch, opts)?;
    let grads = built.graph.backward(built.total)?;
    Ok(built.bound.gradients(&grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_pairs() -> Vec<EncodedPair> {
        // Five distinct source → response pairs over a 12-token vocab
        // (ids 0..4 are reserved).
        vec![
            EncodedPair { source: vec![5, 6], response: vec![7, 8], emoji: 0 },
            EncodedPair { source: vec![6, 7], response: vec![8, 9], emoji: 1 },
            EncodedPair { source: vec![7, 8], response: vec![9, 10], emoji: 2 },
            EncodedPair { source: vec![8, 9], response: vec![10, 11], emoji: 3 },
            EncodedPair { source: vec![9, 10], response: vec![11, 5], emoji: 4 },
        ]
    }

    fn toy_config() -> ModelConfig {
        ModelConfig {
            vocab_size: 12,
            embed_dim: 8,
            hidden_dim: 8,
            emoji_embed_dim: 8,
            emoji_dim: 3,
            latent_dim: 4,
            mlp_hidden_dim: 8,
            dropout: 0.2,
        }
    }

    fn quick_tc(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 5,
            lr: 5e-3,
            patience: usize::MAX,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn base_loss_is_reconstruction_only() {
        let model = Generator::new(ModelKind::Base, toy_config(), 1).unwrap();
        let opts = StepOptions {
            kl_weight: 0.3,
            lambda: 1.0,
            policy_classifier: None,
            seed: 1,
            step_index: 0,
            max_decode_len: 8,
            temperature: 1.0,
        };
        let built = build_batch_loss(&model, &toy_pairs(), &opts).unwrap();
        assert_eq!(built.sums.kl, 0.0);
        assert_eq!(built.sums.bow, 0.0);
        let recon_mean = built.sums.reconstruction / built.sums.examples as f64;
        assert!((built.graph.value(built.total)[0] - recon_mean).abs() < 1e-12);
    }

    #[test]
    fn zero_kl_weight_total_is_recon_plus_bow() {
        let base = Generator::new(ModelKind::Base, toy_config(), 1).unwrap();
        let mut model = Generator::new(ModelKind::Cvae, toy_config(), 2).unwrap();
        model.init_from_base(&base).unwrap();
        let opts = StepOptions {
            kl_weight: 0.0,
            lambda: 1.0,
            policy_classifier: None,
            seed: 2,
            step_index: 0,
            max_decode_len: 8,
            temperature: 1.0,
        };
        let built = build_batch_loss(&model, &toy_pairs(), &opts).unwrap();
        let n = built.sums.examples as f64;
        let expect = built.sums.reconstruction / n + built.sums.bow / n;
        assert!((built.graph.value(built.total)[0] - expect).abs() < 1e-9);
        assert!(built.sums.kl >= 0.0);
    }

    #[test]
    fn training_reduces_base_loss() {
        let pairs = toy_pairs();
        let result = train_generator(
            ModelKind::Base,
            toy_config(),
            &pairs,
            &[],
            &quick_tc(60),
            None,
            None,
        )
        .unwrap();
        let first = &result.metrics[0];
        let last = result.metrics.last().unwrap();
        assert!(last.reconstruction < first.reconstruction * 0.5,
            "no progress: {} -> {}", first.reconstruction, last.reconstruction);
    }

    #[test]
    fn cvae_overfits_five_pairs_below_one_nat_per_token() {
        // 2,000 steps on five pairs at batch size 1 drive per-token
        // reconstruction under 1 nat.
        let pairs = toy_pairs();
        let base = train_generator(
            ModelKind::Base,
            toy_config(),
            &pairs,
            &[],
            &quick_tc(80),
            None,
            None,
        )
        .unwrap()
        .model;
        let tc = TrainConfig {
            epochs: 400, // 5 steps per epoch at batch size 1 → 2,000 steps
            batch_size: 1,
            lr: 5e-3,
            patience: usize::MAX,
            ..TrainConfig::default()
        };
        let result =
            train_generator(ModelKind::Cvae, toy_config(), &pairs, &[], &tc, Some(&base), None)
                .unwrap();
        let last = result.metrics.last().unwrap();
        // Three tokens per response including EOS.
        let per_token = last.reconstruction / 3.0;
        assert!(per_token < 1.0, "reconstruction {per_token} nats/token");
    }

    #[test]
    fn latent_kinds_require_base_checkpoint() {
        let err = train_generator(
            ModelKind::Cvae,
            toy_config(),
            &toy_pairs(),
            &[],
            &quick_tc(1),
            None,
            None,
        )
        .err()
        .unwrap();
        assert!(matches!(err, Error::MissingBaseCheckpoint { .. }));
    }

    #[test]
    fn classifier_learns_toy_labels() {
        // One distinctive response token per label.
        let pairs: Vec<EncodedPair> = (0..6)
            .map(|i| EncodedPair { source: vec![5], response: vec![5 + i, 11], emoji: i })
            .collect();
        let tc = TrainConfig { epochs: 150, batch_size: 6, lr: 5e-3, patience: usize::MAX, ..TrainConfig::default() };
        let result = train_classifier(toy_config(), &pairs, &[], &tc).unwrap();
        let acc = classifier_topk_accuracy(&result.model, &pairs, 1).unwrap();
        assert_eq!(acc, 1.0, "top-1 accuracy {acc}");
        let top5 = classifier_topk_accuracy(&result.model, &pairs, 5).unwrap();
        assert!(top5 >= acc);
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let pairs = toy_pairs();
        let run = || {
            train_generator(
                ModelKind::Base,
                toy_config(),
                &pairs,
                &pairs,
                &quick_tc(5),
                None,
                None,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.model.params, b.model.params);
        assert_eq!(
            serde_json::to_string(&a.metrics).unwrap(),
            serde_json::to_string(&b.metrics).unwrap()
        );
    }
}
