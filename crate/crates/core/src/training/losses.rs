//! Variational training objectives: closed-form diagonal-Gaussian KL,
//! teacher-forced reconstruction, and the order-free bag-of-words term.

use crate::autodiff::{BoundParams, Graph, TensorId};
use crate::corpus::EOS_ID;
use crate::error::{Error, Result};
use crate::models::{GaussianNodes, GaussianParams};

/// Closed-form KL(q ‖ p) between diagonal Gaussians, in nats:
/// ½ Σ (log σp² − log σq² + (σq² + (μq − μp)²) / σp² − 1).
pub fn kl_divergence(q: &GaussianParams, p: &GaussianParams) -> Result<f64> {
    if q.dim() != p.dim() {
        return Err(Error::ShapeMismatch {
            op: "kl_divergence",
            detail: format!("{} vs {} dims", q.dim(), p.dim()),
        });
    }
    let mut acc = 0.0;
    for i in 0..q.dim() {
        let (lq, lp) = (q.log_var[i], p.log_var[i]);
        let diff = q.mean[i] - p.mean[i];
        acc += lp - lq + (lq - lp).exp() + diff * diff * (-lp).exp() - 1.0;
    }
    Ok(0.5 * acc)
}

/// Same KL as a differentiable graph node (scalar).
pub fn kl_divergence_node(
    g: &mut Graph,
    q: &GaussianNodes,
    p: &GaussianNodes,
) -> Result<TensorId> {
    if g.shape(q.mean) != g.shape(p.mean) {
        return Err(Error::ShapeMismatch {
            op: "kl_divergence",
            detail: format!("{:?} vs {:?}", g.shape(q.mean), g.shape(p.mean)),
        });
    }
    let lv_diff = g.sub(q.log_var, p.log_var)?; // lq − lp
    let var_ratio = g.exp(lv_diff); // σq²/σp²
    let neg_lp = g.scale(p.log_var, -1.0);
    let inv_pvar = g.exp(neg_lp);
    let mean_diff = g.sub(q.mean, p.mean)?;
    let mean_sq = g.mul(mean_diff, mean_diff)?;
    let quad = g.mul(mean_sq, inv_pvar)?;
    let lp_minus_lq = g.sub(p.log_var, q.log_var)?;
    let sum1 = g.add(lp_minus_lq, var_ratio)?;
    let sum2 = g.add(sum1, quad)?;
    let per_dim = g.add_scalar(sum2, -1.0);
    let total = g.sum(per_dim);
    Ok(g.scale(total, 0.5))
}

/// Summed token negative log-likelihood of one teacher-forced response,
/// EOS included. `logits` must hold one row per target.
pub fn reconstruction_loss(
    g: &mut Graph,
    logits: TensorId,
    targets: &[usize],
) -> Result<TensorId> {
    let rows = match g.shape(logits) {
        [r, _] => *r,
        other => {
            return Err(Error::ShapeMismatch {
                op: "reconstruction_loss",
                detail: format!("expected rank-2 logits, got {other:?}"),
            })
        }
    };
    if rows != targets.len() {
        return Err(Error::ShapeMismatch {
            op: "reconstruction_loss",
            detail: format!("{rows} logit rows vs {} targets", targets.len()),
        });
    }
    let nll = g.cross_entropy(logits, targets)?;
    Ok(g.sum(nll))
}

/// Bag-of-words loss: project [z; c] to vocabulary logits once and sum the
/// negative log-likelihood of every target token, order-free, EOS excluded.
pub fn bow_loss(
    g: &mut Graph,
    p: &BoundParams,
    z: TensorId,
    c: TensorId,
    targets: &[usize],
) -> Result<TensorId> {
    let bow_targets: Vec<usize> = targets.iter().copied().filter(|&t| t != EOS_ID).collect();
    if bow_targets.is_empty() {
        return Err(Error::EmptySequence { what: "bag-of-words targets" });
    }
    let zc = g.concat(&[z, c])?;
    let lin = g.matmul(zc, p.id("bow.w"))?;
    let logits = g.add(lin, p.id("bow.b"))?;
    let nll = g.cross_entropy(logits, &bow_targets)?;
    Ok(g.sum(nll))
}
