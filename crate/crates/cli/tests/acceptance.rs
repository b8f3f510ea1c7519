//! Acceptance suite. Runs every criterion sequentially (so the wallclock
//! limits are not distorted by sibling tests), prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dpminimax::optimizers::{
    dp_sgda, minibatch_sga_observed, privatediff_minimax, BatchPairing, PrivateDiffConfig, Selection, SgdaConfig,
};
use dpminimax::privacy::{
    calibrate_privatediff, calibrate_sgda, clip, delta_for_epsilon, gaussian_log_moment, log_moment_subsampled,
    AccountantLedger, SubsampledMechanismSpec,
};
use dpminimax::problems::{
    analytic_phi_grad, make_auc, make_quadratic, make_td, make_worst_group, AucSyntheticSpec, QuadraticNcscSpec,
    QuadraticProblem, RandomMdpSpec, WorstGroupSpec,
};
use dpminimax::rng;
use dpminimax::verification::{
    clipped_batch_mean, sensitivity_bruteforce, sga_stability_check, smoothness_probe, ProbeConfig,
};
use dpminimax::{MinimaxProblem, PrivacyBudget, Vector};
use dpminimax_cli::config::{AlgorithmKind, ExplicitSchedule, ScheduleSpec};
use dpminimax_cli::sweep::{inversions, seed_means};
use dpminimax_cli::{compare, load_config, run_experiment, sweep, Axis, LoadedConfig, RunOptions};
use rand::Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> Result<LoadedConfig, String> {
    load_config(&configs_dir().join(name)).map_err(|e| e.to_string())
}

fn gaussian(d: usize, r: &mut impl Rng) -> Vector {
    Vector::from_iterator(d, (0..d).map(|_| r.sample::<f64, _>(StandardNormal)))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn quadratic(n: usize, dim_x: usize, dim_y: usize, seed: u64) -> QuadraticProblem {
    let spec = QuadraticNcscSpec {
        n,
        dim_x,
        dim_y,
        ..Default::default()
    };
    make_quadratic(&spec, &mut rng::seeded(seed)).expect("valid spec")
}

fn opts(dir: &Path) -> RunOptions {
    RunOptions {
        out: Some(dir.to_path_buf()),
        ..Default::default()
    }
}

fn clipping() -> Outcome {
    let mut r = rng::seeded(101);
    let mut worst_dir: f64 = 0.0;
    for k in 0..100_000 {
        let d = r.random_range(1..=64);
        let scale = 10f64.powf(r.random_range(-3.0..3.0));
        let c = 10f64.powf(r.random_range(-3.0..3.0));
        let v = gaussian(d, &mut r) * scale;
        let out = clip(&v, c).map_err(|e| e.to_string())?;
        ensure(out.norm() <= c, || {
            format!("pair {k}: ‖clip‖ = {} > C = {c}", out.norm())
        })?;
        if v.norm() <= c {
            ensure(out == v, || format!("pair {k}: short vector changed"))?;
        } else {
            let dev = (&out / out.norm() - &v / v.norm()).norm();
            worst_dir = worst_dir.max(dev);
            ensure(dev <= 1e-12, || format!("pair {k}: direction moved by {dev}"))?;
        }
    }
    Ok(format!("worst direction error {worst_dir:.1e}"))
}

fn accountant() -> Outcome {
    let inc: Vec<f64> = (1..=64).map(|l| gaussian_log_moment(4.0, l).unwrap()).collect();
    let ledger = AccountantLedger::new(64).compose(&[inc]).map_err(|e| e.to_string())?;
    let tail = delta_for_epsilon(&ledger, 1.0).map_err(|e| e.to_string())?;
    // λ(λ+1)/32 − λ is minimised at λ ∈ {15, 16} with value −7.5
    let hand = (-7.5f64).exp();
    ensure(
        (tail.delta - hand).abs() <= 1e-6 && (tail.delta - 5.53e-4).abs() <= 1e-6,
        || format!("δ = {} vs hand {hand}", tail.delta),
    )?;
    let mut r = rng::seeded(202);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(2..100_000usize);
        let m = r.random_range(1..n);
        let s = r.random_range(0.3..20.0);
        let l = r.random_range(1..=64u32);
        let spec = SubsampledMechanismSpec::new(m, n, s, 1).map_err(|e| e.to_string())?;
        let got = log_moment_subsampled(&spec, l, 0.0).map_err(|e| e.to_string())?;
        let (mf, nf, lf) = (m as f64, n as f64, l as f64);
        let q = mf / nf;
        let oracle = q * q * lf * (lf + 1.0) / ((1.0 - q) * s * s);
        let rel = (got - oracle).abs() / oracle;
        worst = worst.max(rel);
        ensure(rel <= 1e-12, || {
            format!("(m, n, σ̃, λ) = ({m}, {n}, {s}, {l}): {got} vs {oracle}")
        })?;
    }
    Ok(format!(
        "δ = {:.6e} at λ = {}; subsampled worst rel err {worst:.1e}",
        tail.delta, tail.lambda
    ))
}

fn calibration() -> Outcome {
    let b = PrivacyBudget::new(1.0, 1e-6).unwrap();
    let s = calibrate_sgda(&b, 1000, 100, 1.0, 1.0).map_err(|e| e.to_string())?;
    let oracle = 8.0 * (100.0 * 1e6f64.ln()).sqrt() / 1000.0;
    ensure((s.sigma_x - oracle).abs() <= 1e-12, || {
        format!("σ_x = {} vs {oracle}", s.sigma_x)
    })?;
    ensure((s.sigma_y - oracle).abs() <= 1e-12, || {
        format!("σ_y = {} vs {oracle}", s.sigma_y)
    })?;
    let cases = [
        (1000, 100, 4, 1.0, 1.0, 1.0, 1.0),
        (5000, 60, 6, 0.5, 2.0, 3.0, 4.0),
        (20000, 200, 20, 2.0, 0.5, 1.5, 10.0),
    ];
    for (n, rounds, t, c0, mu, beta, m) in cases {
        let p = calibrate_privatediff(&b, n, rounds, t, c0, mu, beta, m).map_err(|e| e.to_string())?;
        let ln = (1e6f64).ln();
        let ne = n as f64;
        let x1 = 4.0 * (rounds as f64 * ln / t as f64).sqrt() / ne;
        let x2 = 4.0 * (rounds as f64 * ln).sqrt() / ne;
        let y = 4.0 * (2.0 * c0 * c0 + beta * m) * (rounds as f64 * ln).sqrt() / (mu * ne);
        for (name, got, want) in [
            ("σ_x1", p.sigma_x1, x1),
            ("σ_x2", p.sigma_x2, x2),
            ("σ_y", p.sigma_y, y),
        ] {
            ensure((got - want).abs() <= 1e-12, || {
                format!("{name} = {got} vs {want} at n = {n}")
            })?;
        }
    }
    Ok(format!("σ_x = {:.12}", s.sigma_x))
}

fn sensitivity() -> Outcome {
    let mut r = rng::seeded(303);
    let mut pairs = 0;
    for c in [0.1, 1.0, 10.0] {
        let draw = |r: &mut rng::ChaCha8Rng| gaussian(3, r) * (c * r.random_range(0.0..3.0));
        let data: Vec<Vector> = (0..8).map(|_| draw(&mut r)).collect();
        let pool: Vec<Vector> = (0..16).map(|_| draw(&mut r)).collect();
        for m in 1..=8 {
            let batch: Vec<usize> = (0..m).collect();
            let q = |d: &[Vector]| clipped_batch_mean(d, &batch, c);
            let rep = sensitivity_bruteforce(q, &data, &pool, 2.0 * c / m as f64).map_err(|e| e.to_string())?;
            pairs += rep.pairs_checked;
            ensure(rep.passed, || {
                format!("C = {c}, m = {m}: {} > {}", rep.max_observed, rep.bound)
            })?;
        }
    }
    let spec = QuadraticNcscSpec {
        n: 8,
        dim_x: 3,
        dim_y: 2,
        mu: 2.0,
        ..Default::default()
    };
    let p = make_quadratic(&spec, &mut rng::seeded(304)).unwrap();
    let mean = p.mean_coupling().clone();
    let pool: Vec<_> = (0..16).map(|_| spec.draw_sample(&mean, &mut r)).collect();
    let seeds: Vec<u64> = (0..50).collect();
    let rep = sga_stability_check(
        &p,
        |i, k| p.with_replaced(i, pool[k].clone()),
        pool.len(),
        &Vector::from_element(3, 0.4),
        &Vector::zeros(2),
        100,
        p.constants().g_y,
        2,
        &seeds,
    )
    .map_err(|e| e.to_string())?;
    ensure(rep.passed, || {
        format!("SGA stability {} > {}", rep.max_observed, rep.bound)
    })?;
    Ok(format!(
        "{pairs} batch-mean pairs; SGA max {:.3e} ≤ {:.3e} over {} coupled runs",
        rep.max_observed, rep.bound, rep.pairs_checked
    ))
}

fn oracle_equivalence() -> Outcome {
    let p = quadratic(60, 6, 3, 505);
    let x0 = vec![0.8, -0.4, 1.1, 0.0, -0.7, 0.3];
    let (eta_x, eta_y) = (0.05, 0.4);
    let cfg = SgdaConfig {
        iterations: 50,
        batch_size: p.n(),
        eta_x,
        eta_y,
        clip_x: f64::INFINITY,
        clip_y: f64::INFINITY,
        sigma_x: 0.0,
        sigma_y: 0.0,
        seed: 9,
        selection: Selection::Stored,
        metrics: false,
        wallclock: false,
        x0: Some(x0.clone()),
        y0: None,
    };
    let out = dp_sgda(&p, &cfg).map_err(|e| e.to_string())?;
    // plain simultaneous GDA summing per-sample gradients by hand
    let mut x = Vector::from_vec(x0);
    let mut y = Vector::zeros(3);
    let (mut gx, mut gy) = (Vector::zeros(6), Vector::zeros(3));
    let mut worst: f64 = 0.0;
    for (t, (xs, ys)) in out.trace.iterates.iter().enumerate() {
        worst = worst.max((xs - &x).amax()).max((ys - &y).amax());
        ensure(worst <= 1e-12, || format!("round {t}: deviation {worst}"))?;
        let mut sx = Vector::zeros(6);
        let mut sy = Vector::zeros(3);
        for i in 0..p.n() {
            p.grad_x(&x, &y, i, &mut gx);
            p.grad_y(&x, &y, i, &mut gy);
            sx += &gx;
            sy += &gy;
        }
        x -= sx * (eta_x / p.n() as f64);
        y += sy * (eta_y / p.n() as f64);
        p.project_y(&mut y);
    }
    ensure(out.trace.iterates.len() == 51, || "expected 51 iterates".into())?;
    Ok(format!("max deviation {worst:.1e} over 50 rounds"))
}

fn telescoping() -> Outcome {
    let p = quadratic(40, 5, 3, 606);
    let n = p.n();
    let cfg = PrivateDiffConfig {
        rounds: 32,
        restart_interval: 8,
        inner_iterations: 3,
        batch_size: n,
        inner_batch_size: None,
        eta_x: 0.05,
        clip_y: f64::INFINITY,
        clip_x: f64::INFINITY,
        c2: 0.0,
        c3: f64::INFINITY,
        sigma_x1: 0.0,
        sigma_x2: 0.0,
        sigma_y: 0.0,
        seed: 4,
        pairing: BatchPairing::RetainedBatch,
        selection: Selection::Stored,
        metrics: false,
        wallclock: false,
        x0: Some(vec![0.5, -1.0, 0.2, 0.7, -0.3]),
        y0: None,
    };
    let out = privatediff_minimax(&p, &cfg).map_err(|e| e.to_string())?;
    let its = &out.trace.iterates;
    ensure(its.len() == 33, || format!("{} iterates", its.len()))?;
    let mut worst: f64 = 0.0;
    let mut g = Vector::zeros(5);
    for r in 0..32 {
        let (x_r, _) = &its[r];
        let (x_next, y_next) = &its[r + 1];
        let mut exact = Vector::zeros(5);
        for i in 0..n {
            p.grad_x(x_r, y_next, i, &mut g);
            exact += &g;
        }
        exact /= n as f64;
        let v = (x_r - x_next) / cfg.eta_x;
        worst = worst.max((v - exact).amax());
        ensure(worst <= 1e-12, || format!("round {r}: deviation {worst}"))?;
    }
    Ok(format!("max deviation {worst:.1e} over 32 rounds"))
}

fn inner_rate() -> Outcome {
    let p = quadratic(500, 6, 4, 707);
    let k = *p.constants();
    let t2 = 1000usize;
    let g = k.g_y;
    let factor = 3.0 * (624.0 * ((t2 as f64).ln() / 0.01).ln() + 1.0) * g * g / (k.mu * k.mu);
    let mut good = 0;
    let mut tightest: f64 = 0.0;
    for seed in 0..100u64 {
        let mut r = rng::seeded(7000 + seed);
        let x = gaussian(6, &mut r) * 0.5;
        let ystar = p.y_star(&x);
        let mut ok = true;
        minibatch_sga_observed(&p, &x, &Vector::zeros(4), t2, g, 1, &mut r, |t, y| {
            if matches!(t, 10 | 100 | 1000) {
                let ratio = (y - &ystar).norm_squared() / (factor / t as f64);
                tightest = tightest.max(ratio);
                ok &= ratio <= 1.0;
            }
        })
        .map_err(|e| e.to_string())?;
        good += ok as usize;
    }
    ensure(good >= 95, || format!("only {good}/100 pairs within the rate"))?;
    Ok(format!("{good}/100 pairs; worst error/bound {tightest:.2e}"))
}

fn invariants() -> Outcome {
    let p = quadratic(300, 8, 4, 808);
    let mut r = rng::seeded(809);
    let h = 1e-5;
    let mut worst_fd: f64 = 0.0;
    for _ in 0..20 {
        let x = gaussian(8, &mut r) * 0.7;
        let (_, g) = analytic_phi_grad(&p, &x).map_err(|e| e.to_string())?;
        let mut fd = Vector::zeros(8);
        for i in 0..8 {
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += h;
            b[i] -= h;
            let phi = |z: &Vector| analytic_phi_grad(&p, z).map(|(v, _)| v);
            fd[i] = (phi(&a).unwrap() - phi(&b).unwrap()) / (2.0 * h);
        }
        worst_fd = worst_fd.max((&fd - &g).norm() / g.norm().max(1e-8));
    }
    ensure(worst_fd <= 1e-5, || format!("∇Φ vs finite differences: {worst_fd}"))?;
    let kappa = p.constants().kappa();
    let mut worst_lip: f64 = 0.0;
    for _ in 0..1000 {
        let a = gaussian(8, &mut r) * 3.0;
        let b = gaussian(8, &mut r) * 3.0;
        let ratio = (p.y_star(&a) - p.y_star(&b)).norm() / (a - b).norm();
        worst_lip = worst_lip.max(ratio);
    }
    ensure(worst_lip <= kappa * (1.0 + 1e-12), || {
        format!("y* ratio {worst_lip} > κ = {kappa}")
    })?;
    let probe = ProbeConfig {
        points: 60,
        ..Default::default()
    };
    let auc = make_auc(
        AucSyntheticSpec {
            n: 300,
            ..Default::default()
        }
        .generate(&mut r)
        .unwrap(),
        2.0,
        2.0,
    )
    .unwrap();
    let wg = make_worst_group(
        &WorstGroupSpec {
            n: 300,
            ..Default::default()
        },
        &mut r,
    )
    .unwrap();
    let mdp = RandomMdpSpec {
        n: 300,
        ..Default::default()
    }
    .generate(&mut r);
    let td = make_td(&mdp, &mut r).unwrap();
    let families: [&dyn MinimaxProblem; 4] = [&p, &auc, &wg, &td];
    let mut notes = Vec::new();
    for f in families {
        let rep = smoothness_probe(f, &probe, &mut r).map_err(|e| e.to_string())?;
        ensure(rep.passed, || {
            format!(
                "{}: measured ({:.3}, {:.3}, {:.3}) vs declared ({:.3}, {:.3}, {:.3})",
                f.name(),
                rep.l_x,
                rep.l_y,
                rep.l_xy,
                rep.declared.l_x,
                rep.declared.l_y,
                rep.declared.l_xy
            )
        })?;
        notes.push(format!("{} l_x {:.2}/{:.2}", f.name(), rep.l_x, rep.declared.l_x));
    }
    Ok(format!(
        "FD rel err {worst_fd:.1e}; y* ratio {worst_lip:.3} ≤ κ {kappa:.3}; {}",
        notes.join(", ")
    ))
}

fn headline(tmp: &Path) -> Outcome {
    let a = load("quadratic_privatediff.toml")?;
    let b = load("quadratic_sgda.toml")?;
    let rep = compare(&a, &b, "grad_phi_norm", &opts(&tmp.join("headline"))).map_err(|e| e.to_string())?;
    let (va, vb) = (
        rep.estimator_variance_a.unwrap_or(f64::NAN),
        rep.estimator_variance_b.unwrap_or(f64::NAN),
    );
    let msg = format!(
        "PrivateDiff {:.4} vs DP-SGDA {:.4} ({} of {} seeds lower, p = {:.1e}); variance {va:.2e} vs {vb:.2e}",
        rep.mean_a,
        rep.mean_b,
        rep.a_lower,
        rep.pairs.len(),
        rep.sign_test_p
    );
    ensure(
        rep.pairs.len() == 20 && rep.mean_delta < 0.0 && rep.sign_test_p < 0.05 && va < vb,
        || msg.clone(),
    )?;
    Ok(msg)
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn scaling(tmp: &Path) -> Outcome {
    let values = [1e3, 1e4, 1e5];
    let mut means = Vec::new();
    for name in ["quadratic_scaling_sgda.toml", "quadratic_scaling_privatediff.toml"] {
        let l = load(name)?;
        let eps = l.config.budget.map(|b| b.epsilon()).unwrap_or(f64::NAN);
        ensure(eps == 1.0, || format!("{name}: expected ε = 1 so that nε = n"))?;
        let rows =
            sweep(&l, Axis::N, &values, Some("grad_phi_norm"), &opts(&tmp.join(name))).map_err(|e| e.to_string())?;
        let m: Vec<f64> = seed_means(&rows)
            .into_iter()
            .map(|(_, v)| v.unwrap_or(f64::NAN))
            .collect();
        means.push(m);
    }
    let ratio: Vec<f64> = means[1].iter().zip(&means[0]).map(|(p, s)| p / s).collect();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" → ");
    let msg = format!(
        "DP-SGDA {}; PrivateDiff {}; ratio {}",
        fmt(&means[0]),
        fmt(&means[1]),
        fmt(&ratio)
    );
    ensure(
        nonincreasing(&means[0]) && nonincreasing(&means[1]) && nonincreasing(&ratio),
        || msg.clone(),
    )?;
    Ok(msg)
}

fn auc_ordering(tmp: &Path) -> Outcome {
    let eps = [0.5, 1.0, 5.0, 10.0];
    let base = load("auc_sgda.toml")?;
    let mut reference = base.clone();
    reference.config.algorithm = AlgorithmKind::GdaReference;
    reference.config.budget = None;
    reference.config.schedule = ScheduleSpec::Explicit(Box::new(ExplicitSchedule {
        iterations: Some(300),
        eta_x: Some(0.2),
        eta_y: Some(1.0),
        ..Default::default()
    }));
    let r = run_experiment(&reference, &opts(&tmp.join("auc_reference"))).map_err(|e| e.to_string())?;
    let clean = r.summary.aggregate.mean_auc.unwrap_or(f64::NAN);
    let mut means = Vec::new();
    for name in ["auc_sgda.toml", "auc_privatediff.toml"] {
        let l = load(name)?;
        ensure(l.config.seeds.len() == 20, || format!("{name}: expected 20 seeds"))?;
        let rows = sweep(&l, Axis::Epsilon, &eps, Some("auc"), &opts(&tmp.join(name))).map_err(|e| e.to_string())?;
        means.push(
            seed_means(&rows)
                .into_iter()
                .map(|(_, v)| v.unwrap_or(f64::NAN))
                .collect::<Vec<_>>(),
        );
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join("/");
    let msg = format!(
        "non-private {clean:.4}; DP-SGDA {}; PrivateDiff {} at ε = 0.5/1/5/10",
        fmt(&means[0]),
        fmt(&means[1])
    );
    let ordered = means[1][0] >= means[0][0] && means[1][1] >= means[0][1];
    let trend = inversions(&means[0]) <= 1 && inversions(&means[1]) <= 1;
    ensure(clean >= 0.95 && ordered && trend, || msg.clone())?;
    Ok(msg)
}

fn budget_closure(tmp: &Path) -> Outcome {
    let mut names: Vec<PathBuf> = std::fs::read_dir(configs_dir())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    names.sort();
    ensure(!names.is_empty(), || "no configs shipped".into())?;
    let mut worst: f64 = 0.0;
    for path in &names {
        let l = load_config(path).map_err(|e| e.to_string())?;
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let delta = l
            .config
            .budget
            .map(|b| b.delta())
            .ok_or_else(|| format!("{stem}: no budget"))?;
        let r = run_experiment(&l, &opts(&tmp.join("closure").join(&stem))).map_err(|e| format!("{stem}: {e}"))?;
        for rec in &r.summary.records {
            let achieved = rec.achieved_delta.ok_or_else(|| format!("{stem}: no achieved δ"))?;
            ensure(achieved <= delta, || {
                format!("{stem} seed {}: δ {achieved:e} > {delta:e}", rec.seed)
            })?;
            worst = worst.max(achieved / delta);
        }
    }
    Ok(format!("{} configs; worst achieved/target δ {worst:.6}", names.len()))
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let tmp = tempfile::tempdir().expect("temp dir");
    let t = tmp.path();
    type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("clipping", Duration::from_secs(1), Box::new(clipping)),
        ("accountant closed form", Duration::from_secs(1), Box::new(accountant)),
        ("calibration", Duration::from_secs(1), Box::new(calibration)),
        ("sensitivity bounds", Duration::from_secs(30), Box::new(sensitivity)),
        (
            "oracle equivalence",
            Duration::from_secs(5),
            Box::new(oracle_equivalence),
        ),
        ("telescoping", Duration::from_secs(5), Box::new(telescoping)),
        ("inner ascent rate", Duration::from_secs(60), Box::new(inner_rate)),
        ("smoothness invariants", Duration::from_secs(60), Box::new(invariants)),
        (
            "headline ordering",
            Duration::from_secs(600),
            Box::new(move || headline(t)),
        ),
        ("scaling trend", Duration::from_secs(1800), Box::new(move || scaling(t))),
        (
            "AUC ordering",
            Duration::from_secs(600),
            Box::new(move || auc_ordering(t)),
        ),
        (
            "budget closure",
            Duration::from_secs(60),
            Box::new(move || budget_closure(t)),
        ),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; over the {:.0} s limit", limit.as_secs_f64())),
            Err(e) => (false, e),
        };
        failed += !ok as usize;
        println!(
            "{} {:>2} {name} ({:.2} s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
