use alloc::vec::Vec;

use libm::{exp, log};

use crate::error::{Error, Result};

/// `−log softmax(logits)[label]` and its gradient `softmax − onehot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange { label, classes: logits.len() });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| exp(z - max)).collect();
    let total: f64 = exps.iter().sum();
    let loss = log(total) - (logits[label] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / total).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Index of the largest logit (first on ties).
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, z) in logits.iter().enumerate() {
        if *z > logits[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        let (loss, _) = softmax_cross_entropy(&[0.7; 32], 5).unwrap();
        assert!((loss - log(32.0)).abs() < 1e-14);
    }

    #[test]
    fn gradient_sums_to_zero() {
        let (_, g) = softmax_cross_entropy(&[1.0, -3.0, 0.5, 12.0, 2.2], 1).unwrap();
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn large_logits_are_stable() {
        let (loss, g) = softmax_cross_entropy(&[1000.0, 0.0], 0).unwrap();
        assert!(loss.is_finite() && loss < 1e-12);
        assert!(g.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn label_out_of_range() {
        assert_eq!(
            softmax_cross_entropy(&[0.0; 3], 3).unwrap_err(),
            Error::LabelOutOfRange { label: 3, classes: 3 }
        );
    }

    #[test]
    fn argmax_first_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, -1.0]), 1);
    }
}
