//! The response generator family. One struct covers the attention seq2seq
//! base model and its latent-variable extensions; the kind decides which
//! components exist and how decoding is conditioned.

use rand::Rng;

use super::classifier::Classifier;
use super::decoder::{DecodeMode, Decoder, Rollout};
use super::encoder::{embed_rows, BiGruEncoder};
use super::gaussian::{reparameterize, sample_standard_normal, GaussianNet, GaussianNodes};
use super::{ModelConfig, ModelKind};
use crate::autodiff::{BoundParams, Graph, InitScheme, ParamStore, TensorId, EMBEDDING_INIT};
use crate::checkpoint::Checkpoint;
use crate::corpus::{EOS_ID, LABEL_COUNT, SOS_ID};
use crate::error::{Error, Result};
use crate::rng::{derive, Stream};

/// Conditioning of one example: source summary v_o, reduced emoji
/// embedding v_e, their concatenation c, and the attention memory.
pub struct Condition {
    pub v_o: TensorId,
    pub v_e: TensorId,
    pub c: TensorId,
    pub memory: TensorId,
}

/// Teacher-forced decode: per-step logits aligned with `targets`
/// (the gold response plus EOS).
pub struct TeacherDecode {
    pub logits: TensorId,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub tokens: Vec<usize>,
    pub truncated: bool,
}

/// Outcome of best-of-k reranking.
#[derive(Debug, Clone)]
pub struct BestOfK {
    pub tokens: Vec<usize>,
    pub truncated: bool,
    /// Classifier score of the designated emoji per sample; empty samples
    /// score negative infinity.
    pub scores: Vec<f64>,
    pub chosen: usize,
    /// Every sample came back empty; the returned response is empty too.
    pub all_empty: bool,
}

pub struct Generator {
    pub kind: ModelKind,
    pub cfg: ModelConfig,
    pub params: ParamStore,
    source_encoder: BiGruEncoder,
    response_encoder: BiGruEncoder,
    recognition: GaussianNet,
    prior: GaussianNet,
    decoder: Decoder,
}

const WORD_TABLE: &str = "embed.word";
const EMOJI_TABLE: &str = "embed.emoji";

impl Generator {
    pub fn new(kind: ModelKind, cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut params = ParamStore::new();
        let mut rng = derive(seed, Stream::Init, kind as u64);

        params.register(WORD_TABLE, &[cfg.vocab_size, cfg.embed_dim], EMBEDDING_INIT, &mut rng)?;
        params.register(EMOJI_TABLE, &[LABEL_COUNT, cfg.emoji_embed_dim], EMBEDDING_INIT, &mut rng)?;
        params.register(
            "emoji_dense.w",
            &[cfg.emoji_embed_dim, cfg.emoji_dim],
            InitScheme::GlorotUniform,
            &mut rng,
        )?;
        params.register("emoji_dense.b", &[cfg.emoji_dim], InitScheme::Zeros, &mut rng)?;

        let source_encoder = BiGruEncoder::new("src_enc", cfg.embed_dim, cfg.hidden_dim);
        source_encoder.register(&mut params, &mut rng)?;

        let init_dim = if kind.is_latent() {
            cfg.latent_condition_dim()
        } else {
            cfg.condition_dim()
        };
        let decoder = Decoder::new("dec", cfg.embed_dim, cfg.hidden_dim, cfg.vocab_size, init_dim);
        decoder.register(&mut params, &mut rng)?;

        let response_encoder = BiGruEncoder::new("resp_enc", cfg.embed_dim, cfg.hidden_dim);
        let recognition = GaussianNet::new(
            "recog",
            2 * cfg.hidden_dim + cfg.condition_dim(),
            cfg.mlp_hidden_dim,
            cfg.latent_dim,
        );
        let prior = GaussianNet::new("prior", cfg.condition_dim(), cfg.mlp_hidden_dim, cfg.latent_dim);
        if kind.is_latent() {
            response_encoder.register(&mut params, &mut rng)?;
            recognition.register(&mut params, &mut rng)?;
            prior.register(&mut params, &mut rng)?;
            params.register(
                "bow.w",
                &[cfg.latent_dim + cfg.condition_dim(), cfg.vocab_size],
                InitScheme::GlorotUniform,
                &mut rng,
            )?;
            params.register("bow.b", &[cfg.vocab_size], InitScheme::Zeros, &mut rng)?;
        }

        Ok(Generator {
            kind,
            cfg,
            params,
            source_encoder,
            response_encoder,
            recognition,
            prior,
            decoder,
        })
    }

    pub fn bind(&self, g: &mut Graph) -> BoundParams {
        self.params.bind(g)
    }

    /// Copy the components shared with a converged base model: embeddings,
    /// source encoder, decoder, and the emoji reduction layer. The initial-
    /// state projection widens for [c; z]; its condition rows come from the
    /// base model and the latent rows keep their fresh initialization.
    pub fn init_from_base(&mut self, base: &Generator) -> Result<()> {
        if base.kind != ModelKind::Base {
            return Err(Error::KindMismatch {
                expected: "base".into(),
                found: base.kind.to_string(),
            });
        }
        if !self.kind.is_latent() {
            return Err(Error::Config("only latent kinds initialize from a base model".into()));
        }
        if base.cfg != self.cfg {
            return Err(Error::Config("base and latent model configs differ".into()));
        }
        self.params.copy_matching_from(&base.params);
        let src = base.params.get("dec.init.w").expect("base has init projection");
        let cond_rows = self.cfg.condition_dim() * self.cfg.hidden_dim;
        let dst = self.params.get_mut("dec.init.w").expect("registered in new()");
        dst.values[..cond_rows].copy_from_slice(&src.values[..cond_rows]);
        Ok(())
    }

    // ── Forward components ───────────────────────────────────────────

    /// Reduced emoji representation: table lookup, dense layer, tanh.
    pub fn embed_emoji(&self, g: &mut Graph, p: &BoundParams, emoji: usize) -> Result<TensorId> {
        if emoji >= LABEL_COUNT {
            return Err(Error::EmojiIdOutOfRange { id: emoji, len: LABEL_COUNT });
        }
        let row = g.embedding_lookup(p.id(EMOJI_TABLE), &[emoji])?;
        let flat = g.slice(row, 0, self.cfg.emoji_embed_dim)?;
        let lin = g.matmul(flat, p.id("emoji_dense.w"))?;
        let lin = g.add(lin, p.id("emoji_dense.b"))?;
        Ok(g.tanh(lin))
    }

    /// Encode the source and build the condition c = [v_o; v_e].
    pub fn condition(
        &self,
        g: &mut Graph,
        p: &BoundParams,
        source: &[usize],
        emoji: usize,
    ) -> Result<Condition> {
        let rows = embed_rows(g, p, WORD_TABLE, source)?;
        let enc = self.source_encoder.run(g, p, &rows)?;
        let v_e = self.embed_emoji(g, p, emoji)?;
        let c = g.concat(&[enc.summary, v_e])?;
        Ok(Condition { v_o: enc.summary, v_e, c, memory: enc.memory })
    }

    /// Response summary x from the separately-parameterized encoder.
    pub fn encode_response(&self, g: &mut Graph, p: &BoundParams, response: &[usize]) -> Result<TensorId> {
        self.require_latent("encode_response")?;
        let rows = embed_rows(g, p, WORD_TABLE, response)?;
        Ok(self.response_encoder.run(g, p, &rows)?.summary)
    }

    /// Recognition network q(z | x, c).
    pub fn posterior(
        &self,
        g: &mut Graph,
        p: &BoundParams,
        response_summary: TensorId,
        cond: &Condition,
    ) -> Result<GaussianNodes> {
        self.require_latent("posterior")?;
        let input = g.concat(&[response_summary, cond.c])?;
        self.recognition.forward(g, p, input)
    }

    /// Prior network p(z | c).
    pub fn prior(&self, g: &mut Graph, p: &BoundParams, cond: &Condition) -> Result<GaussianNodes> {
        self.require_latent("prior")?;
        self.prior.forward(g, p, cond.c)
    }

    fn require_latent(&self, what: &str) -> Result<()> {
        if !self.kind.is_latent() {
            return Err(Error::Config(format!("{what} requires a latent model, kind is {}", self.kind)));
        }
        Ok(())
    }

    fn decode_features(
        &self,
        g: &mut Graph,
        cond: &Condition,
        z: Option<TensorId>,
    ) -> Result<TensorId> {
        match (self.kind.is_latent(), z) {
            (false, None) => Ok(cond.c),
            (false, Some(_)) => {
                Err(Error::Config("base model decodes without a latent variable".into()))
            }
            (true, Some(z)) => g.concat(&[cond.c, z]),
            (true, None) => {
                let zeros = g.leaf(vec![0.0; self.cfg.latent_dim], vec![self.cfg.latent_dim])?;
                g.concat(&[cond.c, zeros])
            }
        }
    }

    /// Teacher-forced logits for a gold response (unframed token ids).
    pub fn decode_teacher(
        &self,
        g: &mut Graph,
        p: &BoundParams,
        cond: &Condition,
        z: Option<TensorId>,
        response: &[usize],
    ) -> Result<TeacherDecode> {
        let features = self.decode_features(g, cond, z)?;
        let h0 = self.decoder.init_state(g, p, features)?;
        let mut inputs = Vec::with_capacity(response.len() + 1);
        inputs.push(SOS_ID);
        inputs.extend_from_slice(response);
        let mut targets = Vec::with_capacity(response.len() + 1);
        targets.extend_from_slice(response);
        targets.push(EOS_ID);
        let logits = self
            .decoder
            .teacher_forced(g, p, WORD_TABLE, cond.memory, h0, &inputs)?;
        Ok(TeacherDecode { logits, targets })
    }

    /// Free-running decode, used for sampling and greedy generation.
    pub fn decode_rollout<R: Rng>(
        &self,
        g: &mut Graph,
        p: &BoundParams,
        cond: &Condition,
        z: Option<TensorId>,
        mode: DecodeMode,
        rng: &mut R,
    ) -> Result<Rollout> {
        let features = self.decode_features(g, cond, z)?;
        let h0 = self.decoder.init_state(g, p, features)?;
        self.decoder.rollout(g, p, WORD_TABLE, cond.memory, h0, mode, rng)
    }

    /// Draw z from the prior (latent kinds) and decode one response.
    pub fn generate<R: Rng>(
        &self,
        source: &[usize],
        emoji: usize,
        mode: DecodeMode,
        rng: &mut R,
    ) -> Result<Generation> {
        let mut g = Graph::new();
        let p = self.bind(&mut g);
        let cond = self.condition(&mut g, &p, source, emoji)?;
        let z = if self.kind.is_latent() {
            let prior = self.prior(&mut g, &p, &cond)?;
            let noise = sample_standard_normal(rng, self.cfg.latent_dim);
            Some(reparameterize(&mut g, &prior, &noise)?)
        } else {
            None
        };
        let rollout = self.decode_rollout(&mut g, &p, &cond, z, mode, rng)?;
        Ok(Generation { tokens: rollout.surface().to_vec(), truncated: rollout.truncated })
    }

    /// Sample `k` responses from the latent prior and keep the one the
    /// classifier scores highest for the designated emoji; ties keep the
    /// first. When every sample is empty the result is empty and flagged.
    pub fn generate_best_of_k<R: Rng>(
        &self,
        source: &[usize],
        emoji: usize,
        k: usize,
        max_len: usize,
        temperature: f64,
        classifier: &Classifier,
        rng: &mut R,
    ) -> Result<BestOfK> {
        self.require_latent("generate_best_of_k")?;
        if k == 0 {
            return Err(Error::Config("best-of-k needs k >= 1".into()));
        }
        let mode = DecodeMode::Sample { max_len, temperature };
        let mut candidates = Vec::with_capacity(k);
        let mut scores = Vec::with_capacity(k);
        for _ in 0..k {
            let generation = self.generate(source, emoji, mode, rng)?;
            let score = if generation.tokens.is_empty() {
                f64::NEG_INFINITY
            } else {
                classifier.probability_of(&generation.tokens, emoji)?
            };
            scores.push(score);
            candidates.push(generation);
        }
        let mut chosen = 0;
        for i in 1..k {
            if scores[i] > scores[chosen] {
                chosen = i;
            }
        }
        let all_empty = candidates.iter().all(|c| c.tokens.is_empty());
        let winner = candidates.swap_remove(chosen);
        Ok(BestOfK {
            tokens: if all_empty { Vec::new() } else { winner.tokens },
            truncated: winner.truncated,
            scores,
            chosen,
            all_empty,
        })
    }

    // ── Checkpointing ────────────────────────────────────────────────

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ckpt = Checkpoint::new(self.kind.as_str(), self.params.clone());
        ckpt.metadata.insert("config".into(), serde_json::to_string(&self.cfg)?);
        Ok(ckpt)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Generator> {
        let kind = ModelKind::parse(&ckpt.kind).map_err(|_| Error::KindMismatch {
            expected: "base|cvae|reinforced".into(),
            found: ckpt.kind.clone(),
        })?;
        let cfg_json = ckpt.metadata.get("config").ok_or_else(|| Error::Format {
            what: "checkpoint",
            detail: "missing config metadata".into(),
        })?;
        let cfg: ModelConfig = serde_json::from_str(cfg_json)?;
        let mut fresh = Generator::new(kind, cfg, 0)?;
        let copied = fresh.params.copy_matching_from(&ckpt.params);
        if copied.len() != fresh.params.len() || ckpt.params.len() != fresh.params.len() {
            return Err(Error::Format {
                what: "checkpoint",
                detail: format!(
                    "parameter set mismatch: checkpoint has {}, model needs {}",
                    ckpt.params.len(),
                    fresh.params.len()
                ),
            });
        }
        Ok(fresh)
    }
}
