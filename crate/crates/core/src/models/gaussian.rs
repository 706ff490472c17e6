//! Diagonal-Gaussian latent machinery: the three-layer recognition/prior
//! networks and the reparameterization trick.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{BoundParams, Graph, InitScheme, ParamStore, TensorId};
use crate::error::{Error, Result};

/// Mean and log-variance of a diagonal Gaussian, as plain vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
}

impl GaussianParams {
    pub fn new(mean: Vec<f64>, log_var: Vec<f64>) -> Result<Self> {
        if mean.len() != log_var.len() {
            return Err(Error::ShapeMismatch {
                op: "gaussian_params",
                detail: format!("mean len {} vs log-var len {}", mean.len(), log_var.len()),
            });
        }
        Ok(GaussianParams { mean, log_var })
    }

    pub fn standard(dim: usize) -> Self {
        GaussianParams { mean: vec![0.0; dim], log_var: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log-density at a point; used by estimator-style oracles.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim() {
            let var = self.log_var[i].exp();
            let d = x[i] - self.mean[i];
            acc += -0.5 * ((2.0 * std::f64::consts::PI).ln() + self.log_var[i] + d * d / var);
        }
        acc
    }

    /// Draw one sample.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let eps: f64 = rng.sample(StandardNormal);
                self.mean[i] + (0.5 * self.log_var[i]).exp() * eps
            })
            .collect()
    }
}

/// Graph nodes holding a Gaussian's mean and log-variance.
#[derive(Debug, Clone, Copy)]
pub struct GaussianNodes {
    pub mean: TensorId,
    pub log_var: TensorId,
}

impl GaussianNodes {
    pub fn to_params(&self, g: &Graph) -> GaussianParams {
        GaussianParams {
            mean: g.value(self.mean).to_vec(),
            log_var: g.value(self.log_var).to_vec(),
        }
    }
}

/// Three-layer MLP with tanh hidden activations and a linear head emitting
/// mean and log-variance for a `latent_dim` Gaussian.
#[derive(Debug, Clone)]
pub struct GaussianNet {
    prefix: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
}

impl GaussianNet {
    pub fn new(prefix: &str, input_dim: usize, hidden_dim: usize, latent_dim: usize) -> Self {
        GaussianNet { prefix: prefix.to_string(), input_dim, hidden_dim, latent_dim }
    }

    fn name(&self, part: &str) -> String {
        format!("{}.{part}", self.prefix)
    }

    pub fn register<R: Rng>(&self, store: &mut ParamStore, rng: &mut R) -> Result<()> {
        let dims = [
            (self.input_dim, self.hidden_dim),
            (self.hidden_dim, self.hidden_dim),
            (self.hidden_dim, 2 * self.latent_dim),
        ];
        for (layer, (rows, cols)) in dims.iter().enumerate() {
            store.register(
                &self.name(&format!("l{}.w", layer + 1)),
                &[*rows, *cols],
                InitScheme::GlorotUniform,
                rng,
            )?;
            store.register(
                &self.name(&format!("l{}.b", layer + 1)),
                &[*cols],
                InitScheme::Zeros,
                rng,
            )?;
        }
        Ok(())
    }

    pub fn forward(&self, g: &mut Graph, p: &BoundParams, input: TensorId) -> Result<GaussianNodes> {
        let mut acts = input;
        for layer in 1..=2 {
            let w = p.id(&self.name(&format!("l{layer}.w")));
            let b = p.id(&self.name(&format!("l{layer}.b")));
            let lin = g.matmul(acts, w)?;
            let lin = g.add(lin, b)?;
            acts = g.tanh(lin);
        }
        let w = p.id(&self.name("l3.w"));
        let b = p.id(&self.name("l3.b"));
        let out = g.matmul(acts, w)?;
        let out = g.add(out, b)?;
        let mean = g.slice(out, 0, self.latent_dim)?;
        let log_var = g.slice(out, self.latent_dim, self.latent_dim)?;
        Ok(GaussianNodes { mean, log_var })
    }
}

/// z = mean + exp(log-var / 2) ⊙ noise, with externally supplied noise so
/// sampling stays differentiable and seeded.
pub fn reparameterize(
    g: &mut Graph,
    gauss: &GaussianNodes,
    noise: &[f64],
) -> Result<TensorId> {
    let dim = g.shape(gauss.mean).to_vec();
    if dim != [noise.len()] {
        return Err(Error::ShapeMismatch {
            op: "reparameterize",
            detail: format!("{dim:?} mean vs {} noise values", noise.len()),
        });
    }
    let eps = g.leaf_from(noise, &dim)?;
    let half_log_var = g.scale(gauss.log_var, 0.5);
    let sigma = g.exp(half_log_var);
    let scaled = g.mul(sigma, eps)?;
    g.add(gauss.mean, scaled)
}

/// `n` standard-normal draws from a seeded generator.
pub fn sample_standard_normal<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::{central_differences, max_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net_and_store(seed: u64, scheme: InitScheme) -> (GaussianNet, ParamStore) {
        let net = GaussianNet::new("recog", 6, 5, 4);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (layer, (rows, cols)) in [(6, 5), (5, 5), (5, 8)].iter().enumerate() {
            store
                .register(&format!("recog.l{}.w", layer + 1), &[*rows, *cols], scheme, &mut rng)
                .unwrap();
            store
                .register(&format!("recog.l{}.b", layer + 1), &[*cols], InitScheme::Zeros, &mut rng)
                .unwrap();
        }
        (net, store)
    }

    #[test]
    fn output_splits_into_mean_and_log_var() {
        let (net, store) = net_and_store(1, InitScheme::GlorotUniform);
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let x = g.leaf(vec![0.1; 6], vec![6]).unwrap();
        let out = net.forward(&mut g, &p, x).unwrap();
        assert_eq!(g.shape(out.mean), &[4]);
        assert_eq!(g.shape(out.log_var), &[4]);
    }

    #[test]
    fn zero_weights_give_unit_gaussian() {
        let (net, store) = net_and_store(2, InitScheme::Zeros);
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let x = g.leaf(vec![0.7; 6], vec![6]).unwrap();
        let out = net.forward(&mut g, &p, x).unwrap();
        assert_eq!(g.value(out.mean), &[0.0; 4]);
        assert_eq!(g.value(out.log_var), &[0.0; 4]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (net, store) = net_and_store(3, InitScheme::GlorotUniform);
        let loss = |s: &ParamStore| {
            let mut g = Graph::new();
            let p = s.bind(&mut g);
            let x = g.leaf(vec![0.4, -0.2, 0.9, 0.0, -0.7, 0.3], vec![6]).unwrap();
            let out = net.forward(&mut g, &p, x)?;
            let z = reparameterize(&mut g, &out, &[0.3, -1.2, 0.8, 0.1])?;
            let sq = g.mul(z, z)?;
            let l = g.sum(sq);
            Ok(g.value(l)[0])
        };
        let numeric = central_differences(&store, 1e-5, loss).unwrap();
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let x = g.leaf(vec![0.4, -0.2, 0.9, 0.0, -0.7, 0.3], vec![6]).unwrap();
        let out = net.forward(&mut g, &p, x).unwrap();
        let z = reparameterize(&mut g, &out, &[0.3, -1.2, 0.8, 0.1]).unwrap();
        let sq = g.mul(z, z).unwrap();
        let l = g.sum(sq);
        let analytic = p.gradients(&g.backward(l).unwrap());
        assert!(max_relative_error(&analytic, &numeric) < 1e-4);
    }

    #[test]
    fn reparameterize_edge_cases() {
        let mut g = Graph::new();
        let mean = g.leaf(vec![1.0, -2.0], vec![2]).unwrap();
        let log_var = g.leaf(vec![0.3, -0.8], vec![2]).unwrap();
        let nodes = GaussianNodes { mean, log_var };
        // Zero noise collapses to the mean.
        let z = reparameterize(&mut g, &nodes, &[0.0, 0.0]).unwrap();
        assert_eq!(g.value(z), &[1.0, -2.0]);

        // Zero log-variance means z = mean + noise.
        let zero_lv = g.leaf(vec![0.0, 0.0], vec![2]).unwrap();
        let nodes = GaussianNodes { mean, log_var: zero_lv };
        let z = reparameterize(&mut g, &nodes, &[0.5, -0.25]).unwrap();
        assert_eq!(g.value(z), &[1.5, -2.25]);
    }

    #[test]
    fn monte_carlo_moments_match_parameters() {
        // 1e5 draws through the reparameterization recover mean and std
        // within 1e-2.
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let target = GaussianParams::new(vec![0.5, -1.0], vec![-0.4, 0.6]).unwrap();
        let n = 100_000;
        let mut sums = [0.0f64; 2];
        let mut sq_sums = [0.0f64; 2];
        for _ in 0..n {
            let noise = sample_standard_normal(&mut rng, 2);
            let mut g = Graph::new();
            let mean = g.leaf_from(&target.mean, &[2]).unwrap();
            let log_var = g.leaf_from(&target.log_var, &[2]).unwrap();
            let z = reparameterize(&mut g, &GaussianNodes { mean, log_var }, &noise).unwrap();
            for (i, v) in g.value(z).iter().enumerate() {
                sums[i] += v;
                sq_sums[i] += v * v;
            }
        }
        for i in 0..2 {
            let mean = sums[i] / n as f64;
            let var = sq_sums[i] / n as f64 - mean * mean;
            let std = var.sqrt();
            assert!((mean - target.mean[i]).abs() < 1e-2, "mean[{i}] = {mean}");
            let target_std = (0.5 * target.log_var[i]).exp();
            assert!((std - target_std).abs() < 1e-2, "std[{i}] = {std}");
        }
    }
}
