//! Bidirectional GRU encoder over embedded token sequences.

use rand::Rng;

use super::gru::GruCell;
use crate::autodiff::{BoundParams, Graph, ParamStore, TensorId};
use crate::error::{Error, Result};

/// Embed a token sequence and split it into per-position row vectors.
pub fn embed_rows(
    g: &mut Graph,
    p: &BoundParams,
    table: &str,
    ids: &[usize],
) -> Result<Vec<TensorId>> {
    if ids.is_empty() {
        return Err(Error::EmptySequence { what: "token sequence" });
    }
    let matrix = g.embedding_lookup(p.id(table), ids)?;
    let dim = g.shape(matrix)[1];
    (0..ids.len()).map(|t| g.slice(matrix, t * dim, dim)).collect()
}

/// Encoder output: per-position states for attention, plus the sequence
/// summary `[final forward; final backward]` of width 2H.
pub struct Encoding {
    pub summary: TensorId,
    /// (T × 2H) matrix; row t concatenates both directions at position t.
    pub memory: TensorId,
}

#[derive(Debug, Clone)]
pub struct BiGruEncoder {
    pub fwd: GruCell,
    pub bwd: GruCell,
}

impl BiGruEncoder {
    pub fn new(prefix: &str, input_dim: usize, hidden_dim: usize) -> Self {
        BiGruEncoder {
            fwd: GruCell::new(&format!("{prefix}.fwd"), input_dim, hidden_dim),
            bwd: GruCell::new(&format!("{prefix}.bwd"), input_dim, hidden_dim),
        }
    }

    pub fn register<R: Rng>(&self, store: &mut ParamStore, rng: &mut R) -> Result<()> {
        self.fwd.register(store, rng)?;
        self.bwd.register(store, rng)
    }

    /// Run both directions over per-position input rows.
    pub fn run(&self, g: &mut Graph, p: &BoundParams, inputs: &[TensorId]) -> Result<Encoding> {
        if inputs.is_empty() {
            return Err(Error::EmptySequence { what: "encoder input" });
        }
        let n = inputs.len();
        let mut forward = Vec::with_capacity(n);
        let mut h = self.fwd.zero_state(g);
        for &x in inputs {
            h = self.fwd.step(g, p, x, h)?;
            forward.push(h);
        }
        let mut backward = vec![forward[0]; n]; // overwritten below
        let mut h = self.bwd.zero_state(g);
        for t in (0..n).rev() {
            h = self.bwd.step(g, p, inputs[t], h)?;
            backward[t] = h;
        }
        let mut rows = Vec::with_capacity(n);
        for t in 0..n {
            rows.push(g.concat(&[forward[t], backward[t]])?);
        }
        let memory = g.stack_rows(&rows)?;
        let summary = g.concat(&[forward[n - 1], backward[0]])?;
        Ok(Encoding { summary, memory })
    }
}
