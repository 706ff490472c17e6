//! Parameter initialization schemes.

use crate::error::{Error, Result};
use rand::Rng;

/// How a fresh parameter tensor is filled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// Uniform in ±sqrt(6 / (fan_in + fan_out)).
    GlorotUniform,
    /// Uniform in [low, high).
    Uniform { low: f64, high: f64 },
    Zeros,
}

/// Default range for embedding tables: uniform in [-4e-3, 4e-3).
pub const EMBEDDING_INIT: InitScheme = InitScheme::Uniform { low: -4e-3, high: 4e-3 };

/// Draw initial values for `shape` from a seeded generator.
pub fn init_values<R: Rng>(shape: &[usize], scheme: InitScheme, rng: &mut R) -> Result<Vec<f64>> {
    if shape.is_empty() || shape.iter().any(|&d| d == 0) {
        return Err(Error::NonPositiveExtent { shape: shape.to_vec() });
    }
    let numel: usize = shape.iter().product();
    let values = match scheme {
        InitScheme::GlorotUniform => {
            let (fan_in, fan_out) = match shape {
                [n] => (*n, *n),
                [rows, cols] => (*rows, *cols),
                more => {
                    let last = more[more.len() - 1];
                    (numel / last, last)
                }
            };
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..numel).map(|_| rng.random_range(-bound..bound)).collect()
        }
        InitScheme::Uniform { low, high } => {
            if low >= high {
                return Err(Error::Config(format!("uniform init needs low < high, got [{low}, {high})")));
            }
            (0..numel).map(|_| rng.random_range(low..high)).collect()
        }
        InitScheme::Zeros => vec![0.0; numel],
    };
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn glorot_bound_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let values = init_values(&[100, 200], InitScheme::GlorotUniform, &mut rng).unwrap();
        let bound = (6.0_f64 / 300.0).sqrt(); // ≈ 0.1414
        assert!((bound - 0.1414).abs() < 1e-4);
        assert!(values.iter().all(|v| v.abs() <= bound));
        // Not degenerate: some mass near the edges.
        assert!(values.iter().any(|v| v.abs() > bound * 0.5));
    }

    #[test]
    fn embedding_init_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let values = init_values(&[50, 16], EMBEDDING_INIT, &mut rng).unwrap();
        assert!(values.iter().all(|v| v.abs() <= 4e-3));
    }

    #[test]
    fn same_seed_same_values() {
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            init_values(&[8, 8], InitScheme::GlorotUniform, &mut rng).unwrap()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn zero_extent_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(init_values(&[4, 0], InitScheme::Zeros, &mut rng).is_err());
    }
}
