use serde::{Deserialize, Serialize};

use super::{ParamGrad, ParameterStore, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Adam optimiser state; moments mirror the parameter store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub first: Vec<Moments<T>>,
    pub second: Vec<Moments<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParameterStore<T>, lr: f64) -> Self {
        let zeros = || {
            params
                .entries
                .iter()
                .map(|e| Moments { weights: vec![T::ZERO; e.weights.len()], bias: vec![T::ZERO; e.bias.len()] })
                .collect::<Vec<_>>()
        };
        Self { lr, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, first: zeros(), second: zeros() }
    }
}

/// One bias-corrected Adam update. Frozen entries, and entries without a
/// gradient, are left bitwise untouched along with their moments.
pub fn adam_step<T: Scalar>(
    params: &mut ParameterStore<T>,
    grads: &[Option<ParamGrad<T>>],
    state: &mut AdamState<T>,
) -> Result<()> {
    if grads.len() != params.entries.len() || state.first.len() != params.entries.len() {
        return Err(Error::Usage(format!(
            "{} gradients and {} moment groups for {} parameter entries",
            grads.len(),
            state.first.len(),
            params.entries.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::from_f64(state.beta1);
    let b2 = T::from_f64(state.beta2);
    let one_m_b1 = T::from_f64(1.0 - state.beta1);
    let one_m_b2 = T::from_f64(1.0 - state.beta2);
    let corr1 = T::from_f64(1.0 / (1.0 - state.beta1.powi(t)));
    let corr2 = T::from_f64(1.0 / (1.0 - state.beta2.powi(t)));
    let lr = T::from_f64(state.lr);
    let eps = T::from_f64(state.epsilon);

    for (i, (entry, grad)) in params.entries.iter_mut().zip(grads).enumerate() {
        let Some(grad) = grad else { continue };
        if entry.frozen {
            continue;
        }
        if grad.weights.len() != entry.weights.len() || grad.bias.len() != entry.bias.len() {
            return Err(Error::Usage(format!("gradient shape mismatch for entry {}", entry.name)));
        }
        let (m, v) = (&mut state.first[i], &mut state.second[i]);
        let update = |p: &mut [T], g: &[T], m: &mut [T], v: &mut [T]| {
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + one_m_b1 * g;
                *v = b2 * *v + one_m_b2 * g * g;
                let m_hat = *m * corr1;
                let v_hat = *v * corr2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        };
        update(&mut entry.weights, &grad.weights, &mut m.weights, &mut v.weights);
        update(&mut entry.bias, &grad.bias, &mut m.bias, &mut v.bias);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamEntry;

    fn scalar_store(value: f64, frozen: bool) -> ParameterStore<f64> {
        ParameterStore {
            entries: vec![ParamEntry {
                name: "p".into(),
                layer: 0,
                weight_shape: vec![1, 1],
                weights: vec![value],
                bias: vec![0.0],
                frozen,
            }],
        }
    }

    fn grad(g: f64) -> Vec<Option<ParamGrad<f64>>> {
        vec![Some(ParamGrad { weights: vec![g], bias: vec![0.0] })]
    }

    #[test]
    fn zero_gradient_is_exact_noop() {
        let mut p = scalar_store(0.37, false);
        let before = p.clone();
        let mut s = AdamState::new(&p, 1e-3);
        for _ in 0..5 {
            adam_step(&mut p, &grad(0.0), &mut s).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(s.step, 5);
    }

    #[test]
    fn frozen_entry_untouched() {
        let mut p = scalar_store(0.37, true);
        let before = p.clone();
        let mut s = AdamState::new(&p, 1e-3);
        adam_step(&mut p, &grad(2.5), &mut s).unwrap();
        assert_eq!(p, before);
        adam_step(&mut p, &[None], &mut s).unwrap();
        assert_eq!(p, before);
    }

    /// Hand-computed first steps for a constant gradient g:
    /// m₁ = (1-β₁)g, v₁ = (1-β₂)g², m̂ = g, v̂ = g², Δ = -lr·g/(|g|+ε);
    /// the second step has m̂ = g and v̂ = g² again.
    #[test]
    fn matches_hand_computed_steps() {
        let (lr, g) = (1e-4, -0.3);
        let mut p = scalar_store(1.0, false);
        let mut s = AdamState::new(&p, lr);
        adam_step(&mut p, &grad(g), &mut s).unwrap();
        let step = lr * g / (g.abs() + 1e-8);
        let want1 = 1.0 - step;
        assert!((p.entries[0].weights[0] - want1).abs() < 1e-15);
        assert!((s.first[0].weights[0] - 0.1 * g).abs() < 1e-15);
        assert!((s.second[0].weights[0] - 0.001 * g * g).abs() < 1e-15);
        adam_step(&mut p, &grad(g), &mut s).unwrap();
        assert!((p.entries[0].weights[0] - (want1 - step)).abs() < 1e-13);
    }

    #[test]
    fn shape_mismatch_is_usage_error() {
        let mut p = scalar_store(1.0, false);
        let mut s = AdamState::new(&p, 1e-3);
        let bad = vec![Some(ParamGrad { weights: vec![1.0, 2.0], bias: vec![0.0] })];
        assert!(matches!(adam_step(&mut p, &bad, &mut s), Err(Error::Usage(_))));
    }
}
