use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result, Vector};

/// Rescales `v` to norm at most `c`: returns `min{c/‖v‖, 1}·v`.
///
/// `c = f64::INFINITY` is accepted and disables clipping. The zero vector is
/// returned unchanged.
pub fn clip(v: &Vector, c: f64) -> Result<Vector> {
    let mut out = v.clone();
    clip_in_place(&mut out, c)?;
    Ok(out)
}

/// In-place [`clip`]. Returns `true` when the vector was actually shrunk.
pub fn clip_in_place(v: &mut Vector, c: f64) -> Result<bool> {
    if c.is_nan() || c <= 0.0 {
        return Err(Error::param("clip threshold", format!("must be > 0, got {c}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("clipping input"));
    }
    let norm = v.norm();
    if norm > c {
        *v *= c / norm;
        // rounding can leave the result an ulp above c
        while v.norm() > c {
            *v *= 1.0 - f64::EPSILON;
        }
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Returns `v + ξ` with `ξ ~ N(0, sigma² I)`.
pub fn gaussian_perturb<R: Rng + ?Sized>(v: &Vector, sigma: f64, rng: &mut R) -> Result<Vector> {
    let mut out = v.clone();
    gaussian_perturb_in_place(&mut out, sigma, rng)?;
    Ok(out)
}

/// Adds `N(0, sigma²)` noise to every coordinate and returns the noise norm.
///
/// `sigma = 0` leaves `v` untouched and consumes no randomness.
pub fn gaussian_perturb_in_place<R: Rng + ?Sized>(v: &mut Vector, sigma: f64, rng: &mut R) -> Result<f64> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::param("sigma", e.to_string()))?;
    let mut sq = 0.0;
    for x in v.iter_mut() {
        let xi = normal.sample(rng);
        sq += xi * xi;
        *x += xi;
    }
    Ok(sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn clip_identity_when_inside_ball() {
        let v = Vector::from_vec(vec![3.0, 4.0]);
        assert_eq!(clip(&v, 10.0).unwrap(), v);
    }

    #[test]
    fn clip_rescales_to_threshold() {
        let v = Vector::from_vec(vec![3.0, 4.0]);
        let c = clip(&v, 1.0).unwrap();
        assert!((c[0] - 0.6).abs() < 1e-15);
        assert!((c[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn clip_zero_vector_is_fixed_point() {
        let v = Vector::zeros(2);
        assert_eq!(clip(&v, 1.0).unwrap(), v);
    }

    #[test]
    fn clip_infinite_threshold_disables_clipping() {
        let v = Vector::from_vec(vec![1e9, -1e9]);
        let mut w = v.clone();
        assert!(!clip_in_place(&mut w, f64::INFINITY).unwrap());
        assert_eq!(w, v);
    }

    #[test]
    fn clip_rejects_bad_input() {
        let v = Vector::from_vec(vec![1.0, f64::NAN]);
        assert_eq!(clip(&v, 1.0), Err(Error::NonFinite("clipping input")));
        let v = Vector::from_vec(vec![1.0]);
        assert!(clip(&v, 0.0).is_err());
        assert!(clip(&v, -1.0).is_err());
    }

    #[test]
    fn perturb_zero_sigma_is_identity() {
        let v = Vector::from_vec(vec![1.0, 2.0]);
        let mut r = rng::seeded(1);
        assert_eq!(gaussian_perturb(&v, 0.0, &mut r).unwrap(), v);
    }

    #[test]
    fn perturb_rejects_negative_sigma() {
        let v = Vector::from_vec(vec![1.0]);
        let mut r = rng::seeded(1);
        assert!(gaussian_perturb(&v, -0.1, &mut r).is_err());
    }

    #[test]
    fn perturb_is_deterministic_given_seed() {
        let v = Vector::from_vec(vec![0.0; 5]);
        let a = gaussian_perturb(&v, 1.0, &mut rng::seeded(9)).unwrap();
        let b = gaussian_perturb(&v, 1.0, &mut rng::seeded(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perturb_moments_match_normal() {
        const N: usize = 100_000;
        let mut r = rng::seeded(2024);
        // mean: sigma = 1, d = 4, tolerance 5/sqrt(N) ~ 0.016 < 0.02
        let v = Vector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let mut sum = Vector::zeros(4);
        for _ in 0..N {
            sum += gaussian_perturb(&v, 1.0, &mut r).unwrap() - &v;
        }
        for m in (sum / N as f64).iter() {
            assert!(m.abs() < 0.02, "mean {m}");
        }
        // variance: sigma = 2
        let z = Vector::zeros(3);
        let mut sq = Vector::zeros(3);
        for _ in 0..N {
            let e = gaussian_perturb(&z, 2.0, &mut r).unwrap();
            sq += e.component_mul(&e);
        }
        for s in (sq / N as f64).iter() {
            assert!((s - 4.0).abs() < 0.1, "variance {s}");
        }
    }

    proptest! {
        #[test]
        fn clipped_norm_bounded_and_direction_kept(
            v in proptest::collection::vec(-1e3f64..1e3, 1..64),
            c in 1e-3f64..1e3,
        ) {
            let v = Vector::from_vec(v);
            let w = clip(&v, c).unwrap();
            prop_assert!(w.norm() <= c);
            let (nv, nw) = (v.norm(), w.norm());
            for (a, b) in w.iter().zip(v.iter()) {
                let lhs = a * nv;
                let rhs = b * nw;
                prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1e-300));
            }
        }
    }
}
