use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;

use super::StateVector;
use crate::error::{Error, Result};

/// Marginal outcome distribution of register `name`.
pub fn measure_distribution(state: &StateVector, name: &str) -> Result<Vec<f64>> {
    let layout = state.layout();
    let dim = layout.dim(name)?;
    let stride = layout.stride(name)?;
    let mut probs = vec![0.0; dim];
    for (i, a) in state.amplitudes().iter().enumerate() {
        probs[(i / stride) % dim] += a.norm_sqr();
    }
    Ok(probs)
}

/// Draws one outcome from an unnormalized distribution.
pub fn sample_outcome<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize> {
    let dist = WeightedIndex::new(probs)
        .map_err(|e| Error::Validation(format!("cannot sample from distribution: {e}")))?;
    Ok(dist.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{hadamard, qubit, RegisterLayout, C64};

    #[test]
    fn marginal_sums_to_norm() {
        let l = RegisterLayout::new([("a", 4), ("b", 2)]).unwrap();
        let mut s = StateVector::basis(l, &[("a", 3)]).unwrap();
        s.apply(&hadamard(), &[qubit("b", 0)]).unwrap();
        let pa = measure_distribution(&s, "a").unwrap();
        let pb = measure_distribution(&s, "b").unwrap();
        assert!((pa[3] - 1.0).abs() < 1e-12);
        assert!((pb[0] - 0.5).abs() < 1e-12 && (pb[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sampling_frequencies() {
        let mut rng = crate::rng::seeded(5);
        let probs = [0.2, 0.0, 0.8];
        let mut hits = [0usize; 3];
        for _ in 0..20000 {
            hits[sample_outcome(&probs, &mut rng).unwrap()] += 1;
        }
        assert_eq!(hits[1], 0);
        assert!((hits[2] as f64 / 20000.0 - 0.8).abs() < 0.02);
        assert!(sample_outcome(&[0.0, 0.0], &mut rng).is_err());
        let _ = C64::new(0.0, 0.0);
    }
}
