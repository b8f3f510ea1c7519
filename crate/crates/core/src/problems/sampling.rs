use rand::Rng;

use crate::{Error, Result};

/// Draws `m` distinct indices from `0..n` uniformly without replacement.
///
/// `m = n` returns `0..n` in order without consuming randomness, so full-batch
/// runs pair samples by position across rounds.
pub fn sample_batch<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::param("batch_size", "must be >= 1"));
    }
    if m > n {
        return Err(Error::param(
            "batch_size",
            format!("cannot draw {m} distinct indices from {n} samples"),
        ));
    }
    if m == n {
        return Ok((0..n).collect());
    }
    Ok(rand::seq::index::sample(rng, n, m).into_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use std::collections::HashSet;

    #[test]
    fn full_batch_is_identity_order() {
        let mut r = rng::seeded(0);
        assert_eq!(sample_batch(5, 5, &mut r).unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rejects_oversize_batch() {
        let mut r = rng::seeded(0);
        assert!(sample_batch(3, 4, &mut r).is_err());
        assert!(sample_batch(3, 0, &mut r).is_err());
    }

    #[test]
    fn indices_are_distinct_and_deterministic() {
        let mut r1 = rng::seeded(7);
        let mut r2 = rng::seeded(7);
        for _ in 0..200 {
            let a = sample_batch(100, 30, &mut r1).unwrap();
            let b = sample_batch(100, 30, &mut r2).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.iter().collect::<HashSet<_>>().len(), 30);
            assert!(a.iter().all(|&i| i < 100));
        }
    }

    #[test]
    fn single_draw_is_uniform() {
        let mut r = rng::seeded(11);
        let mut counts = [0usize; 2];
        for _ in 0..10_000 {
            counts[sample_batch(2, 1, &mut r).unwrap()[0]] += 1;
        }
        // binomial(10^4, 1/2): 3σ = 150
        for c in counts {
            assert!((c as i64 - 5000).abs() <= 150, "{counts:?}");
        }
    }
}
