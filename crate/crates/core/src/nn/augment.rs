use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Batch, Scalar};

/// Online Gaussian augmentation: adds fresh zero-mean noise to every record
/// with σ = `fraction` × the record's RMS.
pub fn augment_gaussian<T: Scalar, R: Rng + ?Sized>(batch: &Batch<T>, fraction: f64, rng: &mut R) -> Batch<T> {
    let mut out = batch.clone();
    if fraction == 0.0 {
        return out;
    }
    let item = out.inputs.item_size();
    for record in out.inputs.data_mut().chunks_exact_mut(item.max(1)) {
        let rms = (record.iter().map(|v| v.to_f64().powi(2)).sum::<f64>() / item as f64).sqrt();
        let sigma = fraction * rms;
        for v in record.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += T::from_f64(sigma * z);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sine_batch() -> Batch<f64> {
        let data: Vec<f64> = (0..5000).map(|i| 3.0 * (i as f64 * 0.05).sin()).collect();
        Batch::new(Tensor::new(vec![1, 1, 5000], data).unwrap(), vec![0]).unwrap()
    }

    #[test]
    fn zero_fraction_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = sine_batch();
        assert_eq!(augment_gaussian(&b, 0.0, &mut rng), b);
    }

    #[test]
    fn noise_level_tracks_rms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = sine_batch();
        let out = augment_gaussian(&b, 0.1, &mut rng);
        let diff: Vec<f64> = out.inputs.data().iter().zip(b.inputs.data()).map(|(a, c)| a - c).collect();
        let sigma = (diff.iter().map(|d| d * d).sum::<f64>() / diff.len() as f64).sqrt();
        let rms = (b.inputs.data().iter().map(|v| v * v).sum::<f64>() / 5000.0).sqrt();
        assert!((sigma / (0.1 * rms) - 1.0).abs() < 0.05, "sigma {sigma}, rms {rms}");
    }

    #[test]
    fn successive_calls_differ() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = sine_batch();
        assert_ne!(augment_gaussian(&b, 0.1, &mut rng), augment_gaussian(&b, 0.1, &mut rng));
    }
}
