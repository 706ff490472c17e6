//! Emoji classifier: two stacked bidirectional GRU layers with skip
//! connections from the embedding and first layer into the output
//! representation. Serves as the policy reward and the evaluation judge.

use rand::Rng;

use super::encoder::{embed_rows, BiGruEncoder};
use super::ModelConfig;
use crate::autodiff::{BoundParams, Graph, InitScheme, ParamStore, TensorId, EMBEDDING_INIT};
use crate::checkpoint::Checkpoint;
use crate::corpus::LABEL_COUNT;
use crate::error::{Error, Result};
use crate::rng::{derive, Stream};

pub const CLASSIFIER_KIND: &str = "classifier";

pub struct Classifier {
    pub cfg: ModelConfig,
    pub params: ParamStore,
    layer1: BiGruEncoder,
    layer2: BiGruEncoder,
}

impl Classifier {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut params = ParamStore::new();
        let mut rng = derive(seed, Stream::Init, 101);
        params.register("cls.embed", &[cfg.vocab_size, cfg.embed_dim], EMBEDDING_INIT, &mut rng)?;
        let layer1 = BiGruEncoder::new("cls.l1", cfg.embed_dim, cfg.hidden_dim);
        layer1.register(&mut params, &mut rng)?;
        let layer2 = BiGruEncoder::new("cls.l2", 2 * cfg.hidden_dim, cfg.hidden_dim);
        layer2.register(&mut params, &mut rng)?;
        let rep_dim = cfg.embed_dim + 4 * cfg.hidden_dim;
        params.register("cls.out.w", &[rep_dim, LABEL_COUNT], InitScheme::GlorotUniform, &mut rng)?;
        params.register("cls.out.b", &[LABEL_COUNT], InitScheme::Zeros, &mut rng)?;
        Ok(Classifier { cfg, params, layer1, layer2 })
    }

    pub fn bind(&self, g: &mut Graph) -> BoundParams {
        self.params.bind(g)
    }

    /// Representation width fed into the output projection.
    pub fn representation_dim(&self) -> usize {
        self.cfg.embed_dim + 4 * self.cfg.hidden_dim
    }

    /// Logits over the 64 labels. `dropout_mask`, when given, multiplies the
    /// pooled representation (inverted-dropout scaling baked into the mask);
    /// evaluation passes `None`.
    pub fn forward(
        &self,
        g: &mut Graph,
        p: &BoundParams,
        ids: &[usize],
        dropout_mask: Option<&[f64]>,
    ) -> Result<TensorId> {
        if ids.is_empty() {
            return Err(Error::EmptySequence { what: "classifier input" });
        }
        let emb = embed_rows(g, p, "cls.embed", ids)?;
        let emb_matrix = g.stack_rows(&emb)?;
        let l1 = self.layer1.run(g, p, &emb)?;
        let l1_rows: Vec<TensorId> = (0..ids.len())
            .map(|t| g.slice(l1.memory, t * 2 * self.cfg.hidden_dim, 2 * self.cfg.hidden_dim))
            .collect::<Result<_>>()?;
        let l2 = self.layer2.run(g, p, &l1_rows)?;

        let pooled_emb = mean_pool(g, emb_matrix, ids.len())?;
        let pooled_l1 = mean_pool(g, l1.memory, ids.len())?;
        let pooled_l2 = mean_pool(g, l2.memory, ids.len())?;
        let mut rep = g.concat(&[pooled_emb, pooled_l1, pooled_l2])?;

        if let Some(mask) = dropout_mask {
            if mask.len() != self.representation_dim() {
                return Err(Error::ShapeMismatch {
                    op: "dropout",
                    detail: format!("mask {} vs representation {}", mask.len(), self.representation_dim()),
                });
            }
            let mask_leaf = g.leaf_from(mask, &[mask.len()])?;
            rep = g.mul(rep, mask_leaf)?;
        }
        let lin = g.matmul(rep, p.id("cls.out.w"))?;
        g.add(lin, p.id("cls.out.b"))
    }

    /// Inverted-dropout mask for one training example.
    pub fn dropout_mask<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let keep = 1.0 - self.cfg.dropout;
        (0..self.representation_dim())
            .map(|_| if rng.random_range(0.0..1.0) < keep { 1.0 / keep } else { 0.0 })
            .collect()
    }

    /// Probabilities over all 64 labels, evaluation mode.
    pub fn probabilities(&self, ids: &[usize]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let p = self.bind(&mut g);
        let logits = self.forward(&mut g, &p, ids, None)?;
        let probs = g.softmax(logits)?;
        Ok(g.value(probs).to_vec())
    }

    pub fn probability_of(&self, ids: &[usize], emoji: usize) -> Result<f64> {
        if emoji >= LABEL_COUNT {
            return Err(Error::EmojiIdOutOfRange { id: emoji, len: LABEL_COUNT });
        }
        Ok(self.probabilities(ids)?[emoji])
    }

    /// 1-based position of `emoji` when labels sort by probability
    /// descending; probability ties resolve to the lower index.
    pub fn rank_of(&self, ids: &[usize], emoji: usize) -> Result<usize> {
        if emoji >= LABEL_COUNT {
            return Err(Error::EmojiIdOutOfRange { id: emoji, len: LABEL_COUNT });
        }
        let probs = self.probabilities(ids)?;
        Ok(rank_in(&probs, emoji))
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ckpt = Checkpoint::new(CLASSIFIER_KIND, self.params.clone());
        ckpt.metadata.insert("config".into(), serde_json::to_string(&self.cfg)?);
        Ok(ckpt)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Classifier> {
        if ckpt.kind != CLASSIFIER_KIND {
            return Err(Error::KindMismatch {
                expected: CLASSIFIER_KIND.into(),
                found: ckpt.kind.clone(),
            });
        }
        let cfg_json = ckpt.metadata.get("config").ok_or_else(|| Error::Format {
            what: "checkpoint",
            detail: "missing config metadata".into(),
        })?;
        let cfg: ModelConfig = serde_json::from_str(cfg_json)?;
        let mut fresh = Classifier::new(cfg, 0)?;
        let copied = fresh.params.copy_matching_from(&ckpt.params);
        if copied.len() != fresh.params.len() || ckpt.params.len() != fresh.params.len() {
            return Err(Error::Format {
                what: "checkpoint",
                detail: "classifier parameter set mismatch".into(),
            });
        }
        Ok(fresh)
    }
}

/// Rank of index `target` under descending probability, ties to the lower
/// index. Shared with the evaluation protocol.
pub(crate) fn rank_in(probs: &[f64], target: usize) -> usize {
    let pt = probs[target];
    let ahead = probs
        .iter()
        .enumerate()
        .filter(|(j, p)| **p > pt || (**p == pt && *j < target))
        .count();
    ahead + 1
}

/// Column means of a (rows × cols) matrix via a constant averaging vector.
fn mean_pool(g: &mut Graph, matrix: TensorId, rows: usize) -> Result<TensorId> {
    let averager = g.leaf(vec![1.0 / rows as f64; rows], vec![rows])?;
    g.matmul(averager, matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> Classifier {
        Classifier::new(ModelConfig::tiny(10), 7).unwrap()
    }

    #[test]
    fn probabilities_form_a_distribution() {
        let cls = tiny();
        let probs = cls.probabilities(&[1, 2, 3]).unwrap();
        assert_eq!(probs.len(), LABEL_COUNT);
        let total: f64 = probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(probs.iter().all(|p| *p > 0.0));
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let cls = tiny();
        assert_eq!(
            cls.probabilities(&[4, 5]).unwrap(),
            cls.probabilities(&[4, 5]).unwrap()
        );
    }

    #[test]
    fn dropout_only_in_train_mode() {
        let cls = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mask = cls.dropout_mask(&mut rng);
        assert_eq!(mask.len(), cls.representation_dim());
        let keep = 1.0 - cls.cfg.dropout;
        assert!(mask.iter().all(|&m| m == 0.0 || (m - 1.0 / keep).abs() < 1e-12));
        // With an aggressive mask the logits move; eval path ignores it.
        let mut g = Graph::new();
        let p = cls.bind(&mut g);
        let zeros = vec![0.0; cls.representation_dim()];
        let dropped = cls.forward(&mut g, &p, &[1, 2], Some(&zeros)).unwrap();
        let bias = cls.params.get("cls.out.b").unwrap().values.clone();
        assert_eq!(g.value(dropped), &bias[..]);
    }

    #[test]
    fn empty_sequence_rejected() {
        let cls = tiny();
        assert!(matches!(cls.probabilities(&[]), Err(Error::EmptySequence { .. })));
    }

    #[test]
    fn rank_breaks_ties_by_index() {
        let probs = vec![0.25, 0.3, 0.25, 0.2];
        assert_eq!(rank_in(&probs, 1), 1);
        assert_eq!(rank_in(&probs, 0), 2);
        assert_eq!(rank_in(&probs, 2), 3); // ties with 0, loses on index
        assert_eq!(rank_in(&probs, 3), 4);
    }

    #[test]
    fn checkpoint_round_trip() {
        let cls = tiny();
        let ckpt = cls.to_checkpoint().unwrap();
        let mut bytes = Vec::new();
        ckpt.write_to(&mut bytes).unwrap();
        let loaded = Classifier::from_checkpoint(&Checkpoint::read_from(&bytes[..]).unwrap()).unwrap();
        assert_eq!(
            cls.probabilities(&[3, 4, 5]).unwrap(),
            loaded.probabilities(&[3, 4, 5]).unwrap()
        );
    }
}
