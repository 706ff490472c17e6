//! Objectives and training loops: the variational bound with bag-of-words
//! augmentation, KL annealing, policy-gradient refinement, and the shared
//! epoch/early-stopping machinery.

mod losses;
mod reinforce;
mod schedule;
mod trainer;

pub use losses::{bow_loss, kl_divergence, kl_divergence_node, reconstruction_loss};
pub use reinforce::{alpha_coefficient, reinforce_objective, RewardRecord};
pub use schedule::KlSchedule;
pub use trainer::{
    apply_step, batch_gradients, build_batch_loss, classifier_topk_accuracy, train_classifier,
    train_generator, BatchGraph, BatchSums, StepOptions, TrainResult,
};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Per-term view of one objective evaluation, all in nats except the
/// policy term. total = reconstruction + kl_weight·kl + bow − λ·policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub kl: f64,
    pub reconstruction: f64,
    pub bow: f64,
    pub policy: f64,
    pub total: f64,
}

/// Training hyper-parameters. Defaults follow the reference setup: Adam at
/// 1e-3 with gradients clipped to 5, λ = 1, KL annealed to 0.5 by the end
/// of epoch 6, policy loss introduced after 2 epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub clip: f64,
    pub lambda: f64,
    pub kl_target: f64,
    pub kl_anneal_epochs: usize,
    pub policy_start_epoch: usize,
    pub patience: usize,
    pub seed: u64,
    pub max_decode_len: usize,
    pub sample_temperature: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 16,
            lr: 1e-3,
            clip: 5.0,
            lambda: 1.0,
            kl_target: 0.5,
            kl_anneal_epochs: 6,
            policy_start_epoch: 2,
            patience: 3,
            seed: 0,
            max_decode_len: 20,
            sample_temperature: 1.0,
        }
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub split: String,
    pub kl: f64,
    pub reconstruction: f64,
    pub bow: f64,
    pub policy: f64,
    pub total: f64,
    pub perplexity: f64,
    pub kl_weight: f64,
}

pub fn write_metrics_jsonl<W: Write>(mut writer: W, records: &[MetricsRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
