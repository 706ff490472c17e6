//! Global attention over encoder memory, bilinear ("general") scoring:
//! s_t = hᵀ W m_t, weights = softmax(s), context = Σ weights_t · m_t.

use crate::autodiff::{BoundParams, Graph, TensorId};
use crate::error::Result;

/// Attend from a decoder state (H) over memory (T × 2H) with the bilinear
/// weight named by `weight`; returns the context vector (2H).
pub fn attend(
    g: &mut Graph,
    p: &BoundParams,
    weight: &str,
    state: TensorId,
    memory: TensorId,
) -> Result<TensorId> {
    let projected = g.matmul(state, p.id(weight))?; // (2H)
    let scores = g.matmul(memory, projected)?; // (T)
    let weights = g.softmax(scores)?;
    g.matmul(weights, memory) // (2H)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{InitScheme, ParamStore};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(h: usize, two_h: usize) -> (ParamStore, ChaCha8Rng) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        store.register("attn.w", &[h, two_h], InitScheme::GlorotUniform, &mut rng).unwrap();
        (store, rng)
    }

    #[test]
    fn single_position_context_is_that_row() {
        let (store, _) = setup(3, 4);
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let state = g.leaf(vec![0.5, -1.0, 0.25], vec![3]).unwrap();
        let memory = g.leaf(vec![1.0, 2.0, 3.0, 4.0], vec![1, 4]).unwrap();
        let ctx = attend(&mut g, &p, "attn.w", state, memory).unwrap();
        assert_eq!(g.value(ctx), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn uniform_scores_average_memory_rows() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        store.register("attn.w", &[2, 4], InitScheme::Zeros, &mut rng).unwrap();
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let state = g.leaf(vec![1.0, -1.0], vec![2]).unwrap();
        let memory = g
            .leaf(vec![1.0, 0.0, 2.0, 0.0, 3.0, 4.0, 0.0, 2.0], vec![2, 4])
            .unwrap();
        let ctx = attend(&mut g, &p, "attn.w", state, memory).unwrap();
        assert_eq!(g.value(ctx), &[2.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn weights_form_a_distribution() {
        let (store, _) = setup(3, 4);
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let state = g.leaf(vec![0.9, 0.1, -0.4], vec![3]).unwrap();
        let memory = g
            .leaf((0..12).map(|i| (i as f64) * 0.3 - 1.0).collect(), vec![3, 4])
            .unwrap();
        let projected = g.matmul(state, p.id("attn.w")).unwrap();
        let scores = g.matmul(memory, projected).unwrap();
        let weights = g.softmax(scores).unwrap();
        let total: f64 = g.value(weights).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(g.value(weights).iter().all(|w| *w > 0.0));
    }
}
