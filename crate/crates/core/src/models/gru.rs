//! Gated recurrent unit cell.

use rand::Rng;

use crate::autodiff::{BoundParams, Graph, InitScheme, ParamStore, TensorId};
use crate::error::Result;

/// One GRU cell: update gate z, reset gate r, candidate h̃, and
/// h' = (1 − z) ⊙ h + z ⊙ h̃.
#[derive(Debug, Clone)]
pub struct GruCell {
    prefix: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl GruCell {
    pub fn new(prefix: &str, input_dim: usize, hidden_dim: usize) -> Self {
        GruCell { prefix: prefix.to_string(), input_dim, hidden_dim }
    }

    fn name(&self, part: &str) -> String {
        format!("{}.{part}", self.prefix)
    }

    pub fn register<R: Rng>(&self, store: &mut ParamStore, rng: &mut R) -> Result<()> {
        for gate in ["z", "r", "h"] {
            store.register(
                &self.name(&format!("w{gate}")),
                &[self.input_dim, self.hidden_dim],
                InitScheme::GlorotUniform,
                rng,
            )?;
            store.register(
                &self.name(&format!("u{gate}")),
                &[self.hidden_dim, self.hidden_dim],
                InitScheme::GlorotUniform,
                rng,
            )?;
            store.register(
                &self.name(&format!("b{gate}")),
                &[self.hidden_dim],
                InitScheme::Zeros,
                rng,
            )?;
        }
        Ok(())
    }

    /// One step: `input` is rank-1 of `input_dim`, `hidden` rank-1 of
    /// `hidden_dim`. Returns the new hidden state.
    pub fn step(
        &self,
        g: &mut Graph,
        p: &BoundParams,
        input: TensorId,
        hidden: TensorId,
    ) -> Result<TensorId> {
        let gate = |g: &mut Graph, w: &str, u: &str, b: &str| -> Result<TensorId> {
            let xw = g.matmul(input, p.id(&self.name(w)))?;
            let hu = g.matmul(hidden, p.id(&self.name(u)))?;
            let s = g.add(xw, hu)?;
            g.add(s, p.id(&self.name(b)))
        };
        let z_pre = gate(g, "wz", "uz", "bz")?;
        let z = g.sigmoid(z_pre);
        let r_pre = gate(g, "wr", "ur", "br")?;
        let r = g.sigmoid(r_pre);

        let xw = g.matmul(input, p.id(&self.name("wh")))?;
        let rh = g.mul(r, hidden)?;
        let rhu = g.matmul(rh, p.id(&self.name("uh")))?;
        let sum = g.add(xw, rhu)?;
        let cand_pre = g.add(sum, p.id(&self.name("bh")))?;
        let cand = g.tanh(cand_pre);

        let neg_z = g.scale(z, -1.0);
        let one_minus_z = g.add_scalar(neg_z, 1.0);
        let keep = g.mul(one_minus_z, hidden)?;
        let write = g.mul(z, cand)?;
        g.add(keep, write)
    }

    /// Fresh all-zero hidden state.
    pub fn zero_state(&self, g: &mut Graph) -> TensorId {
        g.leaf(vec![0.0; self.hidden_dim], vec![self.hidden_dim])
            .expect("well-formed zero state")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::{central_differences, max_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cell_and_store(seed: u64) -> (GruCell, ParamStore) {
        let cell = GruCell::new("gru", 3, 4);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        cell.register(&mut store, &mut rng).unwrap();
        (cell, store)
    }

    #[test]
    fn zero_params_zero_hidden_stay_zero() {
        let cell = GruCell::new("gru", 3, 4);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for gate in ["z", "r", "h"] {
            store.register(&format!("gru.w{gate}"), &[3, 4], InitScheme::Zeros, &mut rng).unwrap();
            store.register(&format!("gru.u{gate}"), &[4, 4], InitScheme::Zeros, &mut rng).unwrap();
            store.register(&format!("gru.b{gate}"), &[4], InitScheme::Zeros, &mut rng).unwrap();
        }
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let x = g.leaf(vec![0.5, -0.25, 1.0], vec![3]).unwrap();
        let h = cell.zero_state(&mut g);
        let h2 = cell.step(&mut g, &p, x, h).unwrap();
        assert_eq!(g.value(h2), &[0.0; 4]);
    }

    #[test]
    fn output_shape_is_hidden_dim() {
        let (cell, store) = cell_and_store(5);
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let x = g.leaf(vec![1.0, 2.0, 3.0], vec![3]).unwrap();
        let h = cell.zero_state(&mut g);
        let h2 = cell.step(&mut g, &p, x, h).unwrap();
        assert_eq!(g.shape(h2), &[4]);
        assert!(g.value(h2).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (cell, store) = cell_and_store(7);
        let loss = |s: &ParamStore| {
            let mut g = Graph::new();
            let p = s.bind(&mut g);
            let x = g.leaf(vec![0.3, -0.8, 0.5], vec![3]).unwrap();
            let h0 = g.leaf(vec![0.1, -0.2, 0.05, 0.4], vec![4]).unwrap();
            let h1 = cell.step(&mut g, &p, x, h0)?;
            let x2 = g.leaf(vec![-0.6, 0.2, 0.9], vec![3]).unwrap();
            let h2 = cell.step(&mut g, &p, x2, h1)?;
            let sq = g.mul(h2, h2)?;
            let l = g.sum(sq);
            Ok(g.value(l)[0])
        };
        let numeric = central_differences(&store, 1e-5, loss).unwrap();

        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let x = g.leaf(vec![0.3, -0.8, 0.5], vec![3]).unwrap();
        let h0 = g.leaf(vec![0.1, -0.2, 0.05, 0.4], vec![4]).unwrap();
        let h1 = cell.step(&mut g, &p, x, h0).unwrap();
        let x2 = g.leaf(vec![-0.6, 0.2, 0.9], vec![3]).unwrap();
        let h2 = cell.step(&mut g, &p, x2, h1).unwrap();
        let sq = g.mul(h2, h2).unwrap();
        let l = g.sum(sq);
        let analytic = p.gradients(&g.backward(l).unwrap());
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "max relative error {err}");
    }
}
