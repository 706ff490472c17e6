//! Policy-gradient machinery: the rank-adjusted coefficient and the
//! likelihood-ratio objective built over a sampled generation.

use crate::autodiff::{Graph, TensorId};
use crate::corpus::LABEL_COUNT;
use crate::error::{Error, Result};

/// Damping coefficient from the designated emoji's rank under the
/// classifier, 1 = highest probability:
/// rank 1 → 0, ranks 2–5 → 0.5, otherwise → 1.
pub fn alpha_coefficient(rank: usize) -> Result<f64> {
    if rank == 0 || rank > LABEL_COUNT {
        return Err(Error::RankOutOfRange { rank, max: LABEL_COUNT });
    }
    Ok(match rank {
        1 => 0.0,
        2..=5 => 0.5,
        _ => 1.0,
    })
}

/// Reward signals for one sampled generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardRecord {
    /// Classifier probability of the designated emoji on the generation.
    pub reward: f64,
    /// Same probability on the human response; the variance-reduction baseline.
    pub baseline: f64,
    /// Rank of the designated emoji among all labels for the generation.
    pub rank: usize,
    pub alpha: f64,
}

impl RewardRecord {
    pub fn new(reward: f64, baseline: f64, rank: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&reward) || !(0.0..=1.0).contains(&baseline) {
            return Err(Error::Config(format!(
                "rewards are probabilities, got R={reward} r={baseline}"
            )));
        }
        Ok(RewardRecord { reward, baseline, rank, alpha: alpha_coefficient(rank)? })
    }

    /// α(R − r), the constant multiplying the log-likelihood sum.
    pub fn coefficient(&self) -> f64 {
        self.alpha * (self.reward - self.baseline)
    }
}

/// Policy term J' = α(R − r) Σ_t log p(x'_t | c, x'_{1:t−1}) as a graph
/// node. `log_prob_sum` must be the in-graph log-likelihood of the sampled
/// tokens; α(R − r) enters as a constant, so no gradient reaches the
/// classifier.
pub fn reinforce_objective(
    g: &mut Graph,
    log_prob_sum: TensorId,
    reward: &RewardRecord,
) -> TensorId {
    g.scale(log_prob_sum, reward.coefficient())
}
