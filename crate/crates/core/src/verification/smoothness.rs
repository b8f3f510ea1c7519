use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::problems::{projected, MinimaxProblem, ProblemConstants};
use crate::{Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub points: usize,
    /// Central-difference step of the Hessian-vector products.
    pub step: f64,
    pub power_iterations: usize,
    /// Probe points are drawn with `‖x‖ ≤ x_radius`.
    pub x_radius: f64,
    /// Multiplicative slack on the declared constants.
    pub tolerance: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            points: 200,
            step: 1e-4,
            power_iterations: 30,
            x_radius: 1.0,
            tolerance: 1.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub l_x: f64,
    pub l_y: f64,
    pub l_xy: f64,
    pub declared: ProblemConstants,
    pub passed: bool,
}

fn unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vector {
    let v = Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        let mut e = Vector::zeros(d);
        e[0] = 1.0;
        e
    }
}

/// Largest singular value of the linear map `apply` (with adjoint
/// `adjoint`) by power iteration on `adjointᵀ·apply`.
fn power<F, G>(mut v: Vector, iterations: usize, apply: F, adjoint: G) -> f64
where
    F: Fn(&Vector) -> Vector,
    G: Fn(&Vector) -> Vector,
{
    let mut sigma = 0.0;
    for _ in 0..iterations {
        let w = apply(&v);
        sigma = w.norm();
        let back = adjoint(&w);
        let n = back.norm();
        if n == 0.0 || sigma == 0.0 {
            return sigma;
        }
        v = back / n;
    }
    sigma.max(apply(&v).norm())
}

/// Measures `sup ‖∇²ₓₓL̂‖`, `sup ‖∇²ᵧᵧL̂‖` and `sup ‖∇²ₓᵧL̂‖` over random
/// points using central differences of the averaged gradients, and compares
/// them with the declared `l_x`, `l_y` and `l_xy`.
pub fn smoothness_probe<P, R>(problem: &P, config: &ProbeConfig, rng: &mut R) -> Result<SmoothnessReport>
where
    P: MinimaxProblem + ?Sized,
    R: Rng + ?Sized,
{
    let (dx, dy) = (problem.dim_x(), problem.dim_y());
    let h = config.step;
    let diameter = problem.constants().diameter;
    let (mut lx, mut ly, mut lxy) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..config.points {
        let x = unit(dx, rng) * (config.x_radius * rng.random::<f64>());
        let y = projected(problem, &(unit(dy, rng) * (diameter * rng.random::<f64>())));
        let hxx =
            |v: &Vector| (problem.full_grad_x(&(&x + v * h), &y) - problem.full_grad_x(&(&x - v * h), &y)) / (2.0 * h);
        let hyy =
            |u: &Vector| (problem.full_grad_y(&x, &(&y + u * h)) - problem.full_grad_y(&x, &(&y - u * h))) / (2.0 * h);
        // ∇²ₓᵧ maps y-directions to x-gradients; its adjoint maps x-directions to y-gradients
        let hxy =
            |u: &Vector| (problem.full_grad_x(&x, &(&y + u * h)) - problem.full_grad_x(&x, &(&y - u * h))) / (2.0 * h);
        let hyx =
            |v: &Vector| (problem.full_grad_y(&(&x + v * h), &y) - problem.full_grad_y(&(&x - v * h), &y)) / (2.0 * h);
        lx = lx.max(power(unit(dx, rng), config.power_iterations, hxx, hxx));
        ly = ly.max(power(unit(dy, rng), config.power_iterations, hyy, hyy));
        lxy = lxy.max(power(unit(dy, rng), config.power_iterations, hxy, hyx));
    }
    let declared = *problem.constants();
    let ok = |measured: f64, declared: f64| measured <= declared * config.tolerance + 1e-6;
    Ok(SmoothnessReport {
        l_x: lx,
        l_y: ly,
        l_xy: lxy,
        declared,
        passed: ok(lx, declared.l_x) && ok(ly, declared.l_y) && ok(lxy, declared.l_xy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_quadratic, make_worst_group, QuadraticNcscSpec, WorstGroupSpec};
    use crate::rng;

    fn probe() -> ProbeConfig {
        ProbeConfig {
            points: 20,
            ..Default::default()
        }
    }

    #[test]
    fn pure_quadratic_y_curvature_is_mu() {
        let spec = QuadraticNcscSpec {
            n: 20,
            dim_x: 4,
            dim_y: 3,
            nonconvex_weight: 0.0,
            mu: 1.7,
            ..Default::default()
        };
        let p = make_quadratic(&spec, &mut rng::seeded(1)).unwrap();
        let rep = smoothness_probe(&p, &probe(), &mut rng::seeded(2)).unwrap();
        assert!((rep.l_y - 1.7).abs() < 1e-6, "{}", rep.l_y);
        assert!(rep.passed);
    }

    #[test]
    fn cross_block_is_mean_coupling_norm() {
        let spec = QuadraticNcscSpec {
            n: 20,
            dim_x: 4,
            dim_y: 3,
            ..Default::default()
        };
        let p = make_quadratic(&spec, &mut rng::seeded(3)).unwrap();
        let rep = smoothness_probe(&p, &probe(), &mut rng::seeded(4)).unwrap();
        // oracle: power iteration directly on Ā
        let a = p.mean_coupling();
        let mut v = Vector::from_element(3, 1.0);
        for _ in 0..500 {
            v = a.tr_mul(&(a * &v));
            v /= v.norm();
        }
        let exact = (a * &v).norm();
        assert!(
            (rep.l_xy - exact).abs() < 1e-6 * exact.max(1.0),
            "{} vs {}",
            rep.l_xy,
            exact
        );
        assert!(rep.passed);
    }

    #[test]
    fn worst_group_declared_constants_hold() {
        let spec = WorstGroupSpec {
            n: 60,
            dim: 4,
            ..Default::default()
        };
        let p = make_worst_group(&spec, &mut rng::seeded(5)).unwrap();
        let rep = smoothness_probe(
            &p,
            &ProbeConfig {
                x_radius: 5.0,
                ..probe()
            },
            &mut rng::seeded(6),
        )
        .unwrap();
        assert!(rep.passed, "{rep:?}");
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json.get("l_xy").is_some());
    }
}
