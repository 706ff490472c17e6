//! Named parameter collections and their binding into graphs.

use indexmap::IndexMap;
use rand::Rng;

use super::graph::{Gradients, Graph, Tensor, TensorId};
use super::init::{init_values, InitScheme};
use crate::error::{Error, Result};

/// Ordered collection of named parameter tensors. Iteration order is
/// insertion order, which keeps every downstream consumer deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: IndexMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a parameter initialized from `scheme`.
    pub fn register<R: Rng>(
        &mut self,
        name: &str,
        shape: &[usize],
        scheme: InitScheme,
        rng: &mut R,
    ) -> Result<()> {
        let values = init_values(shape, scheme, rng)?;
        self.insert(name, Tensor::new(values, shape.to_vec())?)
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter '{name}'")));
        }
        self.entries.insert(name.to_string(), tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.entries.values().map(Tensor::numel).sum()
    }

    /// Copy every tensor of `other` whose name exists here with a matching
    /// shape; returns the copied names. Used to seed a model from a
    /// pretrained counterpart that shares components.
    pub fn copy_matching_from(&mut self, other: &ParamStore) -> Vec<String> {
        let mut copied = Vec::new();
        for (name, tensor) in other.entries.iter() {
            if let Some(mine) = self.entries.get_mut(name) {
                if mine.shape == tensor.shape {
                    mine.values.clone_from(&tensor.values);
                    copied.push(name.clone());
                }
            }
        }
        copied
    }

    /// Bind every parameter into `graph` as a leaf, in insertion order.
    pub fn bind(&self, graph: &mut Graph) -> BoundParams {
        let mut ids = IndexMap::with_capacity(self.entries.len());
        for (name, tensor) in self.entries.iter() {
            let id = graph
                .leaf(tensor.values.clone(), tensor.shape.clone())
                .expect("stored tensors are well-formed");
            ids.insert(name.clone(), id);
        }
        BoundParams { ids }
    }
}

/// Handles to one store's parameters inside a particular graph.
pub struct BoundParams {
    ids: IndexMap<String, TensorId>,
}

impl BoundParams {
    /// Node id for a parameter. Panics on unknown names: model code owns
    /// its store layout, so a miss is a bug, not an input error.
    pub fn id(&self, name: &str) -> TensorId {
        *self
            .ids
            .get(name)
            .unwrap_or_else(|| panic!("parameter '{name}' not bound in this graph"))
    }

    /// Gradients keyed by parameter name; zeros where the loss never reached.
    pub fn gradients(&self, grads: &Gradients) -> IndexMap<String, Vec<f64>> {
        self.ids
            .iter()
            .map(|(name, &id)| (name.clone(), grads.get(id)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn copy_matching_skips_shape_mismatches() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a = ParamStore::new();
        a.register("w", &[2, 2], InitScheme::GlorotUniform, &mut rng).unwrap();
        a.register("b", &[2], InitScheme::Zeros, &mut rng).unwrap();
        let mut b = ParamStore::new();
        b.register("w", &[2, 2], InitScheme::Zeros, &mut rng).unwrap();
        b.register("b", &[3], InitScheme::Zeros, &mut rng).unwrap();
        b.register("extra", &[1], InitScheme::Zeros, &mut rng).unwrap();

        let copied = b.copy_matching_from(&a);
        assert_eq!(copied, vec!["w".to_string()]);
        assert_eq!(b.get("w").unwrap().values, a.get("w").unwrap().values);
        assert_eq!(b.get("b").unwrap().values, vec![0.0; 3]);
    }

    #[test]
    fn bound_params_report_zero_grads_for_unused() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        store.register("used", &[2], InitScheme::GlorotUniform, &mut rng).unwrap();
        store.register("unused", &[3], InitScheme::GlorotUniform, &mut rng).unwrap();

        let mut g = Graph::new();
        let bound = store.bind(&mut g);
        let loss = g.sum(bound.id("used"));
        let grads = g.backward(loss).unwrap();
        let by_name = bound.gradients(&grads);
        assert_eq!(by_name["used"], vec![1.0, 1.0]);
        assert_eq!(by_name["unused"], vec![0.0; 3]);
    }
}
