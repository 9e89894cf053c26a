use rand::{seq::index::sample, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{softmax_cross_entropy, Batch, Mode, Network, NetworkSpec, ParameterStore};
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub eps: f64,
    /// Coordinates probed per weight array and per bias array.
    pub samples_per_array: usize,
    pub seed: u64,
    /// Multiplies the analytic gradient before comparing; 1.0 for a real
    /// check, anything else to confirm the harness catches a fault.
    pub gradient_scale: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { eps: 1e-6, samples_per_array: 12, seed: 0, gradient_scale: 1.0 }
    }
}

/// Largest relative error `|a - n| / max(|a|, |n|, 1e-7)` between analytic
/// and central-difference gradients of the loss, over a sampled subset of
/// parameters. Runs in f64 with dropout disabled.
pub fn grad_check(spec: &NetworkSpec, params: &ParameterStore<f64>, batch: &Batch<f64>, opts: GradCheckOptions) -> Result<f64> {
    let mut net = Network::new(spec.clone(), params.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let logits = net.forward(&batch.inputs, Mode::Eval, &mut rng)?;
    let (_, grad_logits) = softmax_cross_entropy(&logits, &batch.labels)?;
    let grads = net.backward(&grad_logits, true)?;

    let loss_at = |store: &ParameterStore<f64>| -> Result<f64> {
        let probe = Network::new(spec.clone(), store.clone())?;
        let logits = probe.predict(&batch.inputs)?;
        Ok(softmax_cross_entropy(&logits, &batch.labels)?.0)
    };

    let mut worst = 0.0f64;
    let mut store = params.clone();
    for (e, grad) in grads.iter().enumerate() {
        let grad = grad.as_ref().expect("include_frozen requested");
        for is_bias in [false, true] {
            let len = if is_bias { grad.bias.len() } else { grad.weights.len() };
            let picks = sample(&mut rng, len, opts.samples_per_array.min(len));
            for idx in picks.iter() {
                let analytic = opts.gradient_scale * if is_bias { grad.bias[idx] } else { grad.weights[idx] };
                let original = *slot(&mut store, e, is_bias, idx);
                *slot(&mut store, e, is_bias, idx) = original + opts.eps;
                let plus = loss_at(&store)?;
                *slot(&mut store, e, is_bias, idx) = original - opts.eps;
                let minus = loss_at(&store)?;
                *slot(&mut store, e, is_bias, idx) = original;
                let numeric = (plus - minus) / (2.0 * opts.eps);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7);
                worst = worst.max(rel);
            }
        }
    }
    Ok(worst)
}

fn slot(store: &mut ParameterStore<f64>, entry: usize, is_bias: bool, idx: usize) -> &mut f64 {
    let entry = &mut store.entries[entry];
    if is_bias {
        &mut entry.bias[idx]
    } else {
        &mut entry.weights[idx]
    }
}
