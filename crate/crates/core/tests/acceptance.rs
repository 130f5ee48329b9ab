//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line to
//! stdout (bypassing libtest capture) and then asserts.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use fracchemo::comparison::BoundednessCase;
use fracchemo::comparison::{constant_m, equilibrium, reaction_ode};
use fracchemo::dynamics::{simulate, Scheme, StepperConfig};
use fracchemo::eigen::{assemble_restricted, drifted_principal_eigen, principal_eigenpair};
use fracchemo::harness::{run_suite, CheckKind, CheckStatus, ExperimentConfig};
use fracchemo::kernels::{
    heat_kernel_value, kato_limit_check, kato_quantity, kernel_mass, semigroup_defect, KernelSpec,
};
use fracchemo::regime::{
    classify, formula_threshold, predicted_speed_bounds, table1_row, table1_threshold,
    AsymptoticCase, DEFAULT_EQ_TOL,
};
use fracchemo::spectral::{fractional_laplacian, gradient, helmholtz_solve, Field, Grid};
use fracchemo::Params;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: usize, name: &str, ok: bool, detail: &str, start: Instant) {
    let line = format!(
        "criterion {n} ({name}): {} [{:.2} s] {detail}\n",
        if ok { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

fn base() -> Params {
    Params {
        dim: 1,
        alpha: 0.75,
        chi1: 1.0,
        chi2: 1.0,
        lambda1: 1.0,
        lambda2: 1.0,
        mu1: 1.0,
        mu2: 1.0,
        a: 1.0,
        b: 1.0,
        gamma: 2.0,
        k: 1.0,
    }
}

fn rel_err(got: &Field, want: &Field) -> f64 {
    got.linf_distance(want) / want.sup_abs()
}

#[test]
fn criterion_1_spectral_exactness() {
    let start = Instant::now();
    let mut worst_plane: f64 = 0.0;
    let g1 = Grid::new(1, 2.0 * PI, 64).unwrap();
    let g2 = Grid::new(2, 2.0 * PI, 32).unwrap();
    for &(alpha, lambda, mu) in &[
        (0.6, 1.0, 1.0),
        (0.75, 0.3, 2.0),
        (0.9, 4.0, 0.5),
        (1.0, 2.0, 1.0),
    ] {
        for m in [1.0f64, 3.0, 10.0] {
            let f = Field::from_fn(g1, |[x, _]| (m * x).cos() + 0.5 * (m * x).sin());
            let sym = (m * m).powf(alpha);
            worst_plane = worst_plane.max(rel_err(
                &fractional_laplacian(&f, alpha).unwrap(),
                &f.map(|v| sym * v),
            ));
            let h = mu / (lambda + m * m);
            worst_plane = worst_plane.max(rel_err(
                &helmholtz_solve(&f, lambda, mu).unwrap(),
                &f.map(|v| h * v),
            ));
        }
        let f = Field::from_fn(g2, |[x, y]| (3.0 * x).cos() * (2.0 * y).sin());
        let sym = 13f64.powf(alpha);
        worst_plane = worst_plane.max(rel_err(
            &fractional_laplacian(&f, alpha).unwrap(),
            &f.map(|v| sym * v),
        ));
        let h = mu / (lambda + 13.0);
        worst_plane = worst_plane.max(rel_err(
            &helmholtz_solve(&f, lambda, mu).unwrap(),
            &f.map(|v| h * v),
        ));
    }

    // ‖∇ μ(λ − Δ)^{-1} u^k‖∞ ≤ √N μ/√λ ‖u^k‖∞ on random nonnegative fields
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst_ratio: f64 = 0.0;
    for i in 0..100 {
        let dim = 1 + i % 2;
        let g = if dim == 1 {
            Grid::new(1, 20.0, 128).unwrap()
        } else {
            Grid::new(2, 20.0, 32).unwrap()
        };
        let (lambda, mu, k) = (
            rng.random_range(0.2..5.0),
            rng.random_range(0.2..3.0),
            rng.random_range(1.0..3.0),
        );
        let vals: Vec<f64> = (0..g.size()).map(|_| rng.random_range(0.0..2.0)).collect();
        let uk = Field::new(g, vals).unwrap().map(|v: f64| v.powf(k));
        let v = helmholtz_solve(&uk, lambda, mu).unwrap();
        let grad = gradient(&v).unwrap();
        let sup = (0..g.size())
            .map(|j| {
                grad.iter()
                    .map(|c| c.values()[j].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        let bound = (dim as f64).sqrt() * mu / lambda.sqrt() * uk.sup_abs();
        worst_ratio = worst_ratio.max(sup / bound);
    }
    let ok = worst_plane <= 1e-12 && worst_ratio <= 1.0;
    report(
        1,
        "spectral exactness",
        ok,
        &format!("worst plane-wave relative error {worst_plane:.2e}; worst gradient/bound ratio {worst_ratio:.4}"),
        start,
    );
    assert!(ok);
}

#[test]
fn criterion_2_kernel_suite() {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    for alpha in [0.6, 0.75, 0.9] {
        let m = kernel_mass(&KernelSpec::new(alpha, 1, 1.0).unwrap(), 2000.0, 1e-7).unwrap();
        let dev = (m.total - 1.0).abs();
        ok &= dev <= 1e-6;
        notes.push(format!("mass(α={alpha}) − 1 = {dev:.1e}"));
    }
    let cauchy = KernelSpec::new(0.5, 1, 1.3).unwrap();
    let mut worst: f64 = 0.0;
    for x in [0.0, 0.1, 0.5, 1.0, 2.5, 7.0, 30.0] {
        let want = 1.3 / (PI * (1.3 * 1.3 + x * x));
        worst = worst.max((heat_kernel_value(&cauchy, &[x]).unwrap() - want).abs());
    }
    ok &= worst <= 1e-6;
    notes.push(format!("Cauchy error {worst:.1e}"));

    let g = Grid::new(1, 2.0 * PI, 128).unwrap();
    let probe = Field::from_fn(g, |[x, _]| 1.0 + (3.0 * x).sin() + 0.4 * (7.0 * x).cos());
    let defect = semigroup_defect(0.75, 1, 0.4, 0.9, &probe).unwrap();
    ok &= defect <= 1e-12;
    notes.push(format!("semigroup defect {defect:.1e}"));

    let gk = Grid::new(1, 10.0, 256).unwrap();
    let one = Field::constant(gk, 1.0);
    let mut kato_err: f64 = 0.0;
    for alpha in [0.6, 0.75, 0.9] {
        for r in [0.1, 0.5, 1.0] {
            let want = 2.0 * f64::powf(r, 2.0 * alpha - 1.0) / (2.0 * alpha - 1.0);
            kato_err = kato_err.max((kato_quantity(&one, r, alpha).unwrap() - want).abs());
        }
    }
    ok &= kato_err <= 1e-6;
    notes.push(format!("Kato closed-form error {kato_err:.1e}"));
    let f = Field::from_fn(gk, |[x, _]| 2.0 + x.cos());
    let check = kato_limit_check(&f, 0.75, &[1.0, 0.5, 0.25, 0.125, 0.0625], 10.0).unwrap();
    let e = check.exponent.unwrap_or(f64::NAN);
    ok &= (e - 0.5).abs() <= 0.05;
    notes.push(format!("Kato exponent {e:.4} (want 0.5)"));
    report(2, "kernel suite", ok, &notes.join("; "), start);
    assert!(ok);
}

fn draw_row(rng: &mut ChaCha8Rng, row: usize) -> Params {
    loop {
        let mut p = Params {
            chi1: rng.random_range(0.1..3.0),
            chi2: rng.random_range(0.1..3.0),
            mu1: rng.random_range(0.1..3.0),
            mu2: rng.random_range(0.1..3.0),
            lambda1: rng.random_range(0.1..3.0),
            lambda2: rng.random_range(0.1..3.0),
            a: rng.random_range(0.1..3.0),
            b: rng.random_range(0.1..5.0),
            ..base()
        };
        if (row == 1 || row == 3) != (p.lambda1 >= p.lambda2) {
            std::mem::swap(&mut p.lambda1, &mut p.lambda2);
        }
        if table1_row(&p) == row {
            return p;
        }
    }
}

#[test]
fn criterion_3_table_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut draws = 0;
    for row in 1..=4 {
        for _ in 0..1000 {
            let p = draw_row(&mut rng, row);
            for col in [BoundednessCase::A, BoundednessCase::C] {
                let t = table1_threshold(&p, row, col);
                let f = formula_threshold(&p, col);
                worst = worst.max((t - f).abs() / f.abs().max(1.0));
            }
            draws += 1;
        }
    }
    let ok = worst <= 1e-12 && draws == 4000;
    report(
        3,
        "Table 1 vs M formula",
        ok,
        &format!("{draws} draws, worst relative disagreement {worst:.1e}"),
        start,
    );
    assert!(ok);
}

const CONFIG_STEM: &str = "fracchemo-config v1
params.dim = 1
params.alpha = 0.75
grid.extent = 25.132741228718345
grid.n = 256
stepper.dt = 0.01
stepper.t_end = 100
stepper.snapshot_stride = 10
initial.kind = perturbed_equilibrium
initial.amplitude = 0.5
initial.noise = 0.3
seed = 3
checks.run = boundedness
";

#[test]
fn criterion_4_boundedness() {
    let start = Instant::now();
    // one parameter set per case: chi1 chi2 lambda1 lambda2 mu1 mu2 a b gamma k
    let sets = [
        (
            BoundednessCase::A,
            [1.5, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 1.0],
        ),
        (
            BoundednessCase::B,
            [0.5, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0],
        ),
        (
            BoundednessCase::C,
            [0.5, 0.25, 1.0, 1.0, 1.0, 1.0, 1.0, 3.0, 1.5, 1.0],
        ),
        (
            BoundednessCase::D,
            [2.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 2.5, 1.0],
        ),
    ];
    let names = [
        "chi1", "chi2", "lambda1", "lambda2", "mu1", "mu2", "a", "b", "gamma", "k",
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (case, vals) in sets {
        let mut text = CONFIG_STEM.to_string();
        for (n, v) in names.iter().zip(vals) {
            text.push_str(&format!("params.{n} = {v}\n"));
        }
        let cfg = ExperimentConfig::from_text(&text).unwrap();
        let r = run_suite(&cfg, None).unwrap();
        let matched = r.verdict.boundedness.matching.contains(&case);
        let c0 = r.verdict.c0().unwrap_or(f64::NAN);
        let sup = r.sup_u();
        let pass = matched && r.checks[0].status == CheckStatus::Pass && sup <= 1.05 * c0;
        ok &= pass;
        notes.push(format!("case {case}: sup {sup:.4} vs C0 {c0:.4}"));
    }
    report(4, "boundedness", ok, &notes.join("; "), start);
    assert!(ok);
}

#[test]
fn criterion_5_asymptotics() {
    let start = Instant::now();
    let g = Grid::new(1, 2.0 * PI, 128).unwrap();
    let regimes = [
        (
            AsymptoticCase::A,
            Params {
                chi1: 1.0,
                chi2: 0.5,
                lambda2: 2.0,
                b: 2.0,
                gamma: 2.0,
                k: 1.0,
                ..base()
            },
        ),
        (
            AsymptoticCase::B,
            Params {
                gamma: 2.5,
                k: 1.0,
                ..base()
            },
        ),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (case, p) in regimes {
        let eq = equilibrium(&p);
        let u0 = Field::from_fn(g, |[x, _]| eq.u * (1.0 + 0.3 * x.cos()));
        let v = classify(&p, u0.sup(), false);
        let cfg = StepperConfig {
            dt: 0.01,
            t_end: 50.0,
            snapshot_stride: 100,
            ..Default::default()
        };
        let traj = simulate(&u0, &p, &cfg).unwrap();
        let last = traj.samples.last().unwrap();
        let worst = last.dist_u.max(last.dist_v).max(last.dist_w);
        let pass = v.asymptotics.case == Some(case)
            && traj.blew_up.is_none()
            && last.t == 50.0
            && worst <= 1e-3;
        ok &= pass;
        notes.push(format!(
            "regime {case}: max distance at T = 50 is {worst:.2e}"
        ));
    }
    report(5, "asymptotics", ok, &notes.join("; "), start);
    assert!(ok);
}

#[test]
fn criterion_6_spreading() {
    let start = Instant::now();
    let text = format!(
        "{}\n{}",
        include_str!("../../../configs/spreading.cfg"),
        "checks.rate_slack = 0.2\nchecks.inner_eps_fraction = 0.25\nchecks.outer_eps = 0.1\nchecks.outer_threshold = 1e-3\n"
    );
    let cfg = ExperimentConfig::from_text(&text).unwrap();
    assert_eq!(cfg.grid.points_per_axis(), 4096);
    let r = run_suite(&cfg, None).unwrap();
    let fit = r.fit.expect("rate fitted");
    let rate_ok = (0.32..=0.48).contains(&fit.rate) && (r.verdict.speed_lower - 0.4).abs() < 1e-12;
    let sandwich = r
        .checks
        .iter()
        .find(|c| c.kind == CheckKind::Sandwich)
        .unwrap();
    let ok = rate_ok && sandwich.status == CheckStatus::Pass && r.all_passed();
    report(
        6,
        "spreading",
        ok,
        &format!(
            "rate {:.4} (r2 {:.4}) in [0.32, 0.48]; sandwich: {}",
            fit.rate, fit.r2, sandwich.detail
        ),
        start,
    );
    assert!(ok);
}

#[test]
fn criterion_7_monotonicity_in_k() {
    let start = Instant::now();
    let c0 = 2.0;
    let uppers: Vec<f64> = [1.0, 1.5, 2.0]
        .iter()
        .map(|&k| {
            let p = Params {
                chi1: 0.5,
                chi2: 1.5,
                b: 3.0,
                k,
                gamma: k + 1.0,
                ..base()
            };
            assert!(constant_m(&p) > 0.0);
            predicted_speed_bounds(&p, c0, DEFAULT_EQ_TOL).1
        })
        .collect();
    let monotone = uppers.iter().all(|u| u.is_finite()) && uppers.windows(2).all(|w| w[1] >= w[0]);
    let balanced = Params {
        gamma: 2.0,
        k: 1.0,
        ..base()
    };
    let (lo, hi) = predicted_speed_bounds(&balanced, c0, DEFAULT_EQ_TOL);
    let ok = monotone && constant_m(&balanced) == 0.0 && lo == hi;
    report(
        7,
        "monotonicity in k",
        ok,
        &format!("upper bounds {uppers:?}; balanced lower = upper = {lo}"),
        start,
    );
    assert!(ok);
}

#[test]
fn criterion_8_eigen_suite() {
    let start = Instant::now();
    let alpha = 0.75;
    let op = assemble_restricted(1.0, 512, alpha).unwrap();
    let e = principal_eigenpair(&op).unwrap();
    let mut ok = e.lambda > 0.0 && e.relative_gap() > 1e-3 && e.phi.iter().all(|&v| v >= 0.0);
    // same spacing on both domains: h = 2/256
    let small = principal_eigenpair(&assemble_restricted(1.0, 255, alpha).unwrap()).unwrap();
    let large = principal_eigenpair(&assemble_restricted(2.0, 511, alpha).unwrap()).unwrap();
    let ratio = large.lambda / small.lambda;
    let want = 2f64.powf(-2.0 * alpha);
    ok &= (ratio / want - 1.0).abs() <= 0.01;
    let mut worst = f64::NEG_INFINITY;
    for c in [-0.2, 0.0, 0.2] {
        for xi in [-1.0, 1.0] {
            for delta in [0.05, 0.2, 1.0] {
                worst =
                    worst.max(drifted_principal_eigen(&op, c, xi, e.lambda + delta, 0.0).unwrap());
            }
        }
    }
    ok &= worst < -1e-8;
    report(
        8,
        "eigen suite",
        ok,
        &format!(
            "λ₁ = {:.6}, gap {:.3}; λ₁(2l)/λ₁(l) = {ratio:.6} vs {want:.6}; largest drifted eigenvalue {worst:.3e}",
            e.lambda,
            e.relative_gap()
        ),
        start,
    );
    assert!(ok);
}

#[test]
fn criterion_9_ode_reduction() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = Grid::new(1, 2.0 * PI, 16).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let p = Params {
            chi1: rng.random_range(0.0..2.0),
            chi2: rng.random_range(0.0..2.0),
            lambda1: rng.random_range(0.5..2.0),
            lambda2: rng.random_range(0.5..2.0),
            mu1: rng.random_range(0.5..2.0),
            mu2: rng.random_range(0.5..2.0),
            a: rng.random_range(0.2..2.0),
            b: rng.random_range(0.2..2.0),
            gamma: rng.random_range(1.2..3.0),
            k: rng.random_range(1.0..2.5),
            ..base()
        };
        let c = rng.random_range(0.1..2.0);
        let cfg = StepperConfig {
            dt: 1e-3,
            t_end: 20.0,
            snapshot_stride: 500,
            scheme: Scheme::Ars443,
            ..Default::default()
        };
        let traj = simulate(&Field::constant(g, c), &p, &cfg).unwrap();
        let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
        let ode = reaction_ode(&p, c, &times).unwrap();
        for (s, y) in traj.samples.iter().zip(ode) {
            worst = worst.max((s.sup_u - y).abs()).max((s.inf_u - y).abs());
        }
    }
    let ok = worst <= 1e-8;
    report(
        9,
        "ODE reduction",
        ok,
        &format!("worst L∞ gap over 10 draws {worst:.2e}"),
        start,
    );
    assert!(ok);
}
