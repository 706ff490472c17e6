//! Attention decoder: single GRU layer, context concatenated with the
//! input embedding at every step, output projection from the hidden state.

use rand::Rng;

use super::attention::attend;
use super::gru::GruCell;
use crate::autodiff::{BoundParams, Graph, InitScheme, ParamStore, TensorId};
use crate::corpus::{EOS_ID, SOS_ID};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    Greedy { max_len: usize },
    Sample { max_len: usize, temperature: f64 },
}

impl DecodeMode {
    fn max_len(&self) -> usize {
        match self {
            DecodeMode::Greedy { max_len } | DecodeMode::Sample { max_len, .. } => *max_len,
        }
    }
}

/// A free-running decode. `emitted` carries every generated token, with the
/// trailing EOS when one was produced; `logits` holds the matching per-step
/// rows so policy objectives can reach the sampled tokens' probabilities.
pub struct Rollout {
    pub emitted: Vec<usize>,
    pub logits: Vec<TensorId>,
    pub truncated: bool,
}

impl Rollout {
    /// Generated tokens without the EOS terminator.
    pub fn surface(&self) -> &[usize] {
        match self.emitted.split_last() {
            Some((&last, rest)) if last == EOS_ID => rest,
            _ => &self.emitted,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Decoder {
    pub gru: GruCell,
    prefix: String,
    pub hidden_dim: usize,
    pub vocab_size: usize,
    /// Width of the feature vector projected into the initial state.
    pub init_dim: usize,
}

impl Decoder {
    pub fn new(
        prefix: &str,
        embed_dim: usize,
        hidden_dim: usize,
        vocab_size: usize,
        init_dim: usize,
    ) -> Self {
        Decoder {
            gru: GruCell::new(&format!("{prefix}.gru"), embed_dim + 2 * hidden_dim, hidden_dim),
            prefix: prefix.to_string(),
            hidden_dim,
            vocab_size,
            init_dim,
        }
    }

    fn name(&self, part: &str) -> String {
        format!("{}.{part}", self.prefix)
    }

    pub fn register<R: Rng>(&self, store: &mut ParamStore, rng: &mut R) -> Result<()> {
        store.register(
            &self.name("init.w"),
            &[self.init_dim, self.hidden_dim],
            InitScheme::GlorotUniform,
            rng,
        )?;
        store.register(&self.name("init.b"), &[self.hidden_dim], InitScheme::Zeros, rng)?;
        self.gru.register(store, rng)?;
        store.register(
            &self.name("attn.w"),
            &[self.hidden_dim, 2 * self.hidden_dim],
            InitScheme::GlorotUniform,
            rng,
        )?;
        store.register(
            &self.name("out.w"),
            &[self.hidden_dim, self.vocab_size],
            InitScheme::GlorotUniform,
            rng,
        )?;
        store.register(&self.name("out.b"), &[self.vocab_size], InitScheme::Zeros, rng)?;
        Ok(())
    }

    /// Linear projection of the conditioning features into the first state.
    pub fn init_state(&self, g: &mut Graph, p: &BoundParams, features: TensorId) -> Result<TensorId> {
        let lin = g.matmul(features, p.id(&self.name("init.w")))?;
        g.add(lin, p.id(&self.name("init.b")))
    }

    fn embed_token(
        &self,
        g: &mut Graph,
        p: &BoundParams,
        table: &str,
        token: usize,
    ) -> Result<TensorId> {
        let row = g.embedding_lookup(p.id(table), &[token])?;
        let dim = g.shape(row)[1];
        g.slice(row, 0, dim)
    }

    fn step(
        &self,
        g: &mut Graph,
        p: &BoundParams,
        table: &str,
        token: usize,
        hidden: TensorId,
        memory: TensorId,
    ) -> Result<(TensorId, TensorId)> {
        let context = attend(g, p, &self.name("attn.w"), hidden, memory)?;
        let emb = self.embed_token(g, p, table, token)?;
        let input = g.concat(&[emb, context])?;
        let next = self.gru.step(g, p, input, hidden)?;
        let lin = g.matmul(next, p.id(&self.name("out.w")))?;
        let logits = g.add(lin, p.id(&self.name("out.b")))?;
        Ok((next, logits))
    }

    /// Per-step logits for gold-prefixed decoding. `inputs` is the
    /// SOS-framed input side; output has one vocab row per input position.
    pub fn teacher_forced(
        &self,
        g: &mut Graph,
        p: &BoundParams,
        table: &str,
        memory: TensorId,
        h0: TensorId,
        inputs: &[usize],
    ) -> Result<TensorId> {
        if inputs.is_empty() {
            return Err(Error::EmptySequence { what: "decoder inputs" });
        }
        let mut hidden = h0;
        let mut rows = Vec::with_capacity(inputs.len());
        for &token in inputs {
            let (next, logits) = self.step(g, p, table, token, hidden, memory)?;
            hidden = next;
            rows.push(logits);
        }
        g.stack_rows(&rows)
    }

    /// Free-running decode from SOS until EOS or the length cap.
    pub fn rollout<R: Rng>(
        &self,
        g: &mut Graph,
        p: &BoundParams,
        table: &str,
        memory: TensorId,
        h0: TensorId,
        mode: DecodeMode,
        rng: &mut R,
    ) -> Result<Rollout> {
        let max_len = mode.max_len().max(1);
        let mut hidden = h0;
        let mut token = SOS_ID;
        let mut emitted = Vec::new();
        let mut logit_rows = Vec::new();
        let mut truncated = true;
        for _ in 0..max_len {
            let (next, logits) = self.step(g, p, table, token, hidden, memory)?;
            hidden = next;
            let chosen = match mode {
                DecodeMode::Greedy { .. } => argmax(g.value(logits)),
                DecodeMode::Sample { temperature, .. } => {
                    sample_from_logits(g.value(logits), temperature, rng)
                }
            };
            emitted.push(chosen);
            logit_rows.push(logits);
            token = chosen;
            if chosen == EOS_ID {
                truncated = false;
                break;
            }
        }
        Ok(Rollout { emitted, logits: logit_rows, truncated })
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Draw one class from softmax(logits / temperature). Temperature at or
/// below zero degenerates to argmax.
pub fn sample_from_logits<R: Rng>(logits: &[f64], temperature: f64, rng: &mut R) -> usize {
    if temperature <= 0.0 {
        return argmax(logits);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|v| ((v - max) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut draw: f64 = rng.random_range(0.0..1.0) * total;
    for (i, w) in weights.iter().enumerate() {
        draw -= w;
        if draw <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn decoder_setup(seed: u64) -> (Decoder, ParamStore) {
        // vocab 7, embed 4, hidden 3, init features 5
        let dec = Decoder::new("dec", 4, 3, 7, 5);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        store.register("embed.word", &[7, 4], InitScheme::GlorotUniform, &mut rng).unwrap();
        dec.register(&mut store, &mut rng).unwrap();
        (dec, store)
    }

    #[test]
    fn teacher_forced_logits_shape_is_len_by_vocab() {
        let (dec, store) = decoder_setup(5);
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let memory = g.leaf(vec![0.1; 12], vec![2, 6]).unwrap();
        let feats = g.leaf(vec![0.2; 5], vec![5]).unwrap();
        let h0 = dec.init_state(&mut g, &p, feats).unwrap();
        let logits = dec
            .teacher_forced(&mut g, &p, "embed.word", memory, h0, &[SOS_ID, 5, 6])
            .unwrap();
        assert_eq!(g.shape(logits), &[3, 7]);
    }

    #[test]
    fn greedy_rollout_is_deterministic() {
        let (dec, store) = decoder_setup(6);
        let run = || {
            let mut g = Graph::new();
            let p = store.bind(&mut g);
            let memory = g.leaf(vec![0.3; 6], vec![1, 6]).unwrap();
            let feats = g.leaf(vec![-0.1; 5], vec![5]).unwrap();
            let h0 = dec.init_state(&mut g, &p, feats).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            dec.rollout(
                &mut g,
                &p,
                "embed.word",
                memory,
                h0,
                DecodeMode::Greedy { max_len: 6 },
                &mut rng,
            )
            .unwrap()
            .emitted
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rollout_truncates_at_max_len_without_eos() {
        let (dec, store) = decoder_setup(7);
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let memory = g.leaf(vec![0.0; 6], vec![1, 6]).unwrap();
        let feats = g.leaf(vec![0.0; 5], vec![5]).unwrap();
        let h0 = dec.init_state(&mut g, &p, feats).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rollout = dec
            .rollout(&mut g, &p, "embed.word", memory, h0, DecodeMode::Sample { max_len: 4, temperature: 1.0 }, &mut rng)
            .unwrap();
        assert!(rollout.emitted.len() <= 4);
        if rollout.emitted.last() != Some(&EOS_ID) {
            assert!(rollout.truncated);
            assert_eq!(rollout.surface(), rollout.emitted.as_slice());
        }
    }

    #[test]
    fn sampler_respects_overwhelming_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let logits = vec![0.0, 50.0, 0.0];
        for _ in 0..20 {
            assert_eq!(sample_from_logits(&logits, 1.0, &mut rng), 1);
        }
    }
}
