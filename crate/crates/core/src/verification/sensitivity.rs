use serde::{Deserialize, Serialize};

use crate::optimizers::minibatch_sga;
use crate::privacy::clip;
use crate::problems::MinimaxProblem;
use crate::rng;
use crate::{Error, Result, Vector};

/// Largest dataset for which exhaustive neighbour enumeration is allowed.
pub const MAX_BRUTEFORCE_N: usize = 8;

/// `D′` is `D` with entry `index` replaced by `pool[replacement]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborPair {
    pub index: usize,
    pub replacement: usize,
    /// Seed of the coupled run, for stability checks.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub max_observed: f64,
    pub bound: f64,
    pub argmax_pair: Option<NeighborPair>,
    pub pairs_checked: usize,
    pub passed: bool,
}

impl SensitivityReport {
    fn new(bound: f64) -> Self {
        Self {
            max_observed: 0.0,
            bound,
            argmax_pair: None,
            pairs_checked: 0,
            passed: true,
        }
    }

    fn observe(&mut self, dist: f64, pair: NeighborPair) {
        self.pairs_checked += 1;
        if dist > self.max_observed || self.argmax_pair.is_none() {
            self.max_observed = self.max_observed.max(dist);
            self.argmax_pair = Some(pair);
        }
    }

    fn close(mut self) -> Self {
        // relative slack for rounding in the query itself
        self.passed = self.max_observed <= self.bound * (1.0 + 1e-12) + 1e-15;
        self
    }
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_BRUTEFORCE_N {
        return Err(Error::Oversize {
            size: n,
            limit: MAX_BRUTEFORCE_N,
        });
    }
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }
    Ok(())
}

/// `max ‖q(D) − q(D′)‖` over every single-entry replacement of `dataset` by
/// an element of `pool`.
pub fn sensitivity_bruteforce<S, Q>(query: Q, dataset: &[S], pool: &[S], bound: f64) -> Result<SensitivityReport>
where
    S: Clone,
    Q: Fn(&[S]) -> Result<Vector>,
{
    check_size(dataset.len())?;
    let base = query(dataset)?;
    let mut report = SensitivityReport::new(bound);
    let mut neighbour = dataset.to_vec();
    for index in 0..dataset.len() {
        for (replacement, z) in pool.iter().enumerate() {
            neighbour[index] = z.clone();
            let dist = (&base - query(&neighbour)?).norm();
            report.observe(
                dist,
                NeighborPair {
                    index,
                    replacement,
                    seed: None,
                },
            );
        }
        neighbour[index] = dataset[index].clone();
    }
    Ok(report.close())
}

/// `(1/m) Σ_{j∈batch} Clipping(vⱼ, c)`.
pub fn clipped_batch_mean(vectors: &[Vector], batch: &[usize], c: f64) -> Result<Vector> {
    let first = vectors.first().ok_or(Error::Empty("vectors"))?;
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut acc = Vector::zeros(first.len());
    for &j in batch {
        acc += clip(&vectors[j], c)?;
    }
    Ok(acc / batch.len() as f64)
}

/// `(2C₀² + βM)/(μn)` with `β = l_y`.
pub fn sga_stability_bound<P: MinimaxProblem + ?Sized>(problem: &P, clip_y: f64) -> f64 {
    let k = problem.constants();
    (2.0 * clip_y * clip_y + k.l_y * k.loss_bound) / (k.mu * problem.n() as f64)
}

/// Coupled runs of the inner ascent on `D` and every neighbour `D′`, sharing
/// the batch index sequence (same seed). `neighbour(i, k)` builds `D` with
/// entry `i` replaced by pool element `k`. The bound is evaluated with the
/// largest constants among all instances involved, so it holds for every
/// sample in `D ∪ pool`.
#[allow(clippy::too_many_arguments)]
pub fn sga_stability_check<P, F>(
    problem: &P,
    neighbour: F,
    pool_len: usize,
    x: &Vector,
    y0: &Vector,
    iterations: usize,
    clip_y: f64,
    batch_size: usize,
    seeds: &[u64],
) -> Result<SensitivityReport>
where
    P: MinimaxProblem,
    F: Fn(usize, usize) -> Result<P>,
{
    let n = problem.n();
    check_size(n)?;
    if seeds.is_empty() {
        return Err(Error::Empty("seeds"));
    }
    let mut neighbours = Vec::with_capacity(n * pool_len);
    let mut bound = sga_stability_bound(problem, clip_y);
    for i in 0..n {
        for k in 0..pool_len {
            let p = neighbour(i, k)?;
            if p.n() != n {
                return Err(Error::LengthMismatch("neighbour changes the dataset size".into()));
            }
            bound = bound.max(sga_stability_bound(&p, clip_y));
            neighbours.push((i, k, p));
        }
    }
    let mut report = SensitivityReport::new(bound);
    for &seed in seeds {
        let base = minibatch_sga(problem, x, y0, iterations, clip_y, batch_size, &mut rng::seeded(seed))?;
        for (index, replacement, p) in &neighbours {
            let y = minibatch_sga(p, x, y0, iterations, clip_y, batch_size, &mut rng::seeded(seed))?;
            report.observe(
                (&base - y).norm(),
                NeighborPair {
                    index: *index,
                    replacement: *replacement,
                    seed: Some(seed),
                },
            );
        }
    }
    Ok(report.close())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_quadratic, QuadraticNcscSpec, QuadraticProblem};
    use rand::Rng;

    fn vectors(k: usize, d: usize, scale: f64, seed: u64) -> Vec<Vector> {
        let mut r = rng::seeded(seed);
        (0..k)
            .map(|_| Vector::from_iterator(d, (0..d).map(|_| r.random_range(-scale..scale))))
            .collect()
    }

    #[test]
    fn clipped_batch_mean_within_two_c_over_m() {
        let data = vectors(6, 3, 5.0, 1);
        let pool = vectors(16, 3, 5.0, 2);
        let query = |d: &[Vector]| clipped_batch_mean(d, &[0, 1, 2, 3], 1.0);
        let rep = sensitivity_bruteforce(query, &data, &pool, 0.5).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.pairs_checked, 96);
        assert!(rep.max_observed > 0.25);
    }

    #[test]
    fn constant_query_has_zero_sensitivity() {
        let data = vectors(4, 2, 1.0, 3);
        let pool = vectors(5, 2, 1.0, 4);
        let rep = sensitivity_bruteforce(|_| Ok(Vector::from_element(2, 7.0)), &data, &pool, 0.0).unwrap();
        assert_eq!(rep.max_observed, 0.0);
        assert!(rep.passed);
    }

    #[test]
    fn scalar_identity_recovers_pool_diameter() {
        let data = vec![0.3];
        let pool = vec![0.0, 0.25, 1.0];
        let rep = sensitivity_bruteforce(|d: &[f64]| Ok(Vector::from_element(1, d[0])), &data, &pool, 1.0).unwrap();
        // with the base value inside the pool range, the farthest neighbour is at 0.7
        assert!((rep.max_observed - 0.7).abs() < 1e-15);
        let data = vec![0.0];
        let rep = sensitivity_bruteforce(|d: &[f64]| Ok(Vector::from_element(1, d[0])), &data, &pool, 1.0).unwrap();
        assert_eq!(rep.max_observed, 1.0);
    }

    #[test]
    fn oversize_dataset_rejected() {
        let data = vectors(9, 1, 1.0, 5);
        let err = sensitivity_bruteforce(|_| Ok(Vector::zeros(1)), &data, &data, 1.0).unwrap_err();
        assert!(matches!(err, Error::Oversize { size: 9, limit: 8 }));
    }

    fn quadratic(n: usize, seed: u64) -> (QuadraticProblem, QuadraticNcscSpec) {
        let spec = QuadraticNcscSpec {
            n,
            dim_x: 3,
            dim_y: 2,
            mu: 2.0,
            ..Default::default()
        };
        (make_quadratic(&spec, &mut rng::seeded(seed)).unwrap(), spec)
    }

    #[test]
    fn identical_neighbours_are_stable() {
        let (p, _) = quadratic(4, 1);
        let same = |_: usize, _: usize| Ok(p.clone());
        let rep = sga_stability_check(
            &p,
            same,
            2,
            &Vector::from_element(3, 0.5),
            &Vector::zeros(2),
            50,
            10.0,
            2,
            &[1, 2],
        )
        .unwrap();
        assert_eq!(rep.max_observed, 0.0);
    }

    #[test]
    fn coupled_sga_within_bound() {
        let (p, spec) = quadratic(6, 2);
        let mut r = rng::seeded(3);
        let mean = p.mean_coupling().clone();
        let pool: Vec<_> = (0..4).map(|_| spec.draw_sample(&mean, &mut r)).collect();
        let c0 = p.constants().g_y;
        let rep = sga_stability_check(
            &p,
            |i, k| p.with_replaced(i, pool[k].clone()),
            pool.len(),
            &Vector::from_element(3, 0.4),
            &Vector::zeros(2),
            100,
            c0,
            2,
            &(0..10).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.max_observed > 0.0);
    }

    #[test]
    fn halving_n_doubles_the_bound() {
        let (p, _) = quadratic(6, 4);
        let k = p.constants();
        let at = |n: f64| (2.0 + k.l_y * k.loss_bound) / (k.mu * n);
        assert!((sga_stability_bound(&p, 1.0) - at(6.0)).abs() < 1e-12);
        assert!((at(3.0) / sga_stability_bound(&p, 1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn report_serializes() {
        let rep = SensitivityReport::new(1.0).close();
        let s = serde_json::to_string(&rep).unwrap();
        assert!(s.contains("\"max_observed\":0.0"));
    }
}
