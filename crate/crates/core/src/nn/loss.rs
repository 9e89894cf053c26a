use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Mean softmax cross-entropy over the batch and its gradient
/// `(softmax - onehot) / batch` with respect to the logits.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>)> {
    let (batch, classes) = match logits.shape() {
        [b, c] => (*b, *c),
        s => return Err(Error::Shape(format!("logits must be [B, C], got {s:?}"))),
    };
    if labels.len() != batch {
        return Err(Error::Shape(format!("{} labels for a batch of {batch}", labels.len())));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Usage(format!("label {l} out of range for {classes} classes")));
    }
    if !logits.all_finite() {
        return Err(Error::Numerical("non-finite logits".into()));
    }
    let inv_batch = 1.0 / batch as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(batch * classes);
    for (row, &label) in logits.data().chunks_exact(classes).zip(labels) {
        let max = row.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v.to_f64() - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        loss += sum.ln() + max - row[label].to_f64();
        for (c, e) in exps.iter().enumerate() {
            let onehot = if c == label { 1.0 } else { 0.0 };
            grad.push(T::from_f64((e / sum - onehot) * inv_batch));
        }
    }
    Ok((loss * inv_batch, Tensor::new(vec![batch, classes], grad)?))
}

/// Index of the largest logit per row, lowest index on ties.
pub fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    let classes = logits.item_size().max(1);
    logits
        .data()
        .chunks_exact(classes)
        .map(|row| {
            let mut best = 0;
            for (i, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits_give_ln_c() {
        let logits = Tensor::new(vec![3, 11], vec![0.7f64; 33]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 5, 10]).unwrap();
        assert!((loss - 11f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn margin_drives_loss_to_zero() {
        let mut last = f64::INFINITY;
        for margin in [1.0, 5.0, 20.0, 60.0] {
            let mut v = vec![0.0f64; 4];
            v[2] = margin;
            let (loss, _) = softmax_cross_entropy(&Tensor::new(vec![1, 4], v).unwrap(), &[2]).unwrap();
            assert!(loss < last);
            last = loss;
        }
        assert!(last < 1e-20);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (b, c) = (4, 37);
        let data: Vec<f64> = (0..b * c).map(|_| rng.random_range(-3.0..3.0)).collect();
        let labels = vec![0, 36, 17, 17];
        let logits = Tensor::new(vec![b, c], data.clone()).unwrap();
        let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
        let eps = 1e-5;
        for i in 0..b * c {
            let (mut p, mut m) = (data.clone(), data.clone());
            p[i] += eps;
            m[i] -= eps;
            let lp = softmax_cross_entropy(&Tensor::new(vec![b, c], p).unwrap(), &labels).unwrap().0;
            let lm = softmax_cross_entropy(&Tensor::new(vec![b, c], m).unwrap(), &labels).unwrap().0;
            let num = (lp - lm) / (2.0 * eps);
            let a = grad.data()[i];
            assert!((a - num).abs() / a.abs().max(num.abs()).max(1e-8) < 1e-6, "{i}: {a} vs {num}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let logits = Tensor::new(vec![1, 3], vec![0.0f64, f64::NAN, 1.0]).unwrap();
        assert!(matches!(softmax_cross_entropy(&logits, &[0]), Err(Error::Numerical(_))));
        let logits = Tensor::new(vec![1, 3], vec![0.0f64; 3]).unwrap();
        assert!(softmax_cross_entropy(&logits, &[3]).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        let t = Tensor::new(vec![2, 3], vec![1.0f64, 3.0, 3.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(argmax_rows(&t), vec![1, 0]);
    }
}
