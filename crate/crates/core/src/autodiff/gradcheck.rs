//! Central finite-difference gradient checking.
//!
//! The checker re-evaluates a loss as a pure function of the parameter
//! store, so it shares nothing with the reverse sweep it validates.

use indexmap::IndexMap;

use super::params::ParamStore;
use crate::error::Result;

/// Central finite differences of `loss_fn` with respect to every parameter.
pub fn central_differences<F>(
    store: &ParamStore,
    eps: f64,
    mut loss_fn: F,
) -> Result<IndexMap<String, Vec<f64>>>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    let mut probe = store.clone();
    let names: Vec<String> = store.names().map(str::to_string).collect();
    let mut out = IndexMap::with_capacity(names.len());
    for name in names {
        let numel = probe.get(&name).expect("name from store").numel();
        let mut grad = vec![0.0; numel];
        for (i, slot) in grad.iter_mut().enumerate() {
            let original = probe.get(&name).unwrap().values[i];
            probe.get_mut(&name).unwrap().values[i] = original + eps;
            let plus = loss_fn(&probe)?;
            probe.get_mut(&name).unwrap().values[i] = original - eps;
            let minus = loss_fn(&probe)?;
            probe.get_mut(&name).unwrap().values[i] = original;
            *slot = (plus - minus) / (2.0 * eps);
        }
        out.insert(name, grad);
    }
    Ok(out)
}

/// Largest relative error between two gradient maps, with the usual
/// unit floor on the denominator so near-zero entries compare absolutely.
pub fn max_relative_error(
    analytic: &IndexMap<String, Vec<f64>>,
    numeric: &IndexMap<String, Vec<f64>>,
) -> f64 {
    let mut worst = 0.0_f64;
    for (name, a) in analytic {
        let n = &numeric[name];
        for (x, y) in a.iter().zip(n) {
            let denom = x.abs().max(y.abs()).max(1.0);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}
