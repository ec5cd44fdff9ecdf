//! Video-text matching with similarity-weighted hard negatives.

use candle_core::Tensor;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::model::layers::log_softmax_last;
use crate::rng::Rng;

/// For row `i`, draws `j != i` with probability `softmax_j(sim[i][j] / tau)`
/// among columns whose caption differs from row `i`'s. Rows where every
/// other caption is identical fall back to all `j != i`.
pub fn sample_negatives(sim: &[Vec<f64>], tau: f64, captions: &[&str], rng: &mut Rng) -> Result<Vec<usize>> {
    let b = sim.len();
    if b < 2 {
        return Err(Error::contract("hard negatives need a batch of at least 2"));
    }
    if captions.len() != b || sim.iter().any(|r| r.len() != b) {
        return Err(Error::contract("similarity matrix and captions disagree"));
    }
    (0..b)
        .map(|i| {
            let mut cands: Vec<usize> = (0..b).filter(|&j| j != i && captions[j] != captions[i]).collect();
            if cands.is_empty() {
                cands = (0..b).filter(|&j| j != i).collect();
            }
            let max = cands.iter().map(|&j| sim[i][j]).fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = cands.iter().map(|&j| ((sim[i][j] - max) / tau).exp()).collect();
            let pick = match WeightedIndex::new(&w) {
                Ok(dist) => dist.sample(rng),
                Err(_) => rng.gen_range(0..cands.len()),
            };
            Ok(cands[pick])
        })
        .collect()
}

/// Mean 2-way cross-entropy of `logits: [R, 2]` against `labels` (1 = matched).
pub fn vtm_loss_from_logits(logits: &Tensor, labels: &[u32]) -> Result<Tensor> {
    if logits.dim(0)? != labels.len() {
        return Err(Error::contract("matching logits and labels disagree"));
    }
    let targets = Tensor::from_vec(labels.to_vec(), (labels.len(), 1), logits.device())?;
    Ok(log_softmax_last(logits)?.gather(&targets, 1)?.mean_all()?.neg()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use candle_core::Device;

    #[test]
    fn zero_logits_give_log_two() {
        let logits = Tensor::zeros((6, 2), candle_core::DType::F64, &Device::Cpu).unwrap();
        let loss = vtm_loss_from_logits(&logits, &[1, 1, 0, 0, 0, 0]).unwrap();
        assert!((loss.to_scalar::<f64>().unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn negatives_never_hit_the_diagonal() {
        let mut rng = rng_from(4);
        let caps = ["a", "b", "c", "d"];
        for _ in 0..500 {
            let sim: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let neg = sample_negatives(&sim, 0.07, &caps, &mut rng).unwrap();
            assert!(neg.iter().enumerate().all(|(i, &j)| i != j));
        }
    }

    #[test]
    fn identical_captions_are_skipped_when_possible() {
        let mut rng = rng_from(5);
        let sim = vec![vec![1.0, 0.99, -1.0], vec![0.99, 1.0, -1.0], vec![0.0, 0.0, 1.0]];
        for _ in 0..100 {
            let neg = sample_negatives(&sim, 0.07, &["x", "x", "y"], &mut rng).unwrap();
            assert_eq!(&neg[..2], &[2, 2]);
        }
        let neg = sample_negatives(&sim, 0.07, &["x", "x", "x"], &mut rng).unwrap();
        assert_eq!(&neg[..2], &[1, 0]);
    }

    #[test]
    fn hard_negatives_follow_similarity() {
        let mut rng = rng_from(6);
        let sim = vec![vec![1.0, 0.9, 0.0], vec![0.0; 3], vec![0.0; 3]];
        let hits = (0..1000)
            .filter(|_| sample_negatives(&sim, 0.07, &["a", "b", "c"], &mut rng).unwrap()[0] == 1)
            .count();
        assert!(hits > 990, "{hits}");
    }

    #[test]
    fn batch_of_one_is_contract_error() {
        let mut rng = rng_from(0);
        assert!(matches!(
            sample_negatives(&[vec![1.0]], 0.07, &["a"], &mut rng),
            Err(Error::Contract(_))
        ));
    }
}
