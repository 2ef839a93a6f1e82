//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line with its measured worst residual and pinned tolerance.

use std::io::Write;
use std::time::{Duration, Instant};

use gapprob::calculus::{
    exact_gradient, fd_gradient, one_sided_sigma, one_sided_window, pde_residual_gue, pde_residual_lue, toda_check,
    FdOrder, FdScheme, FreeEndpoint,
};
use gapprob::gap::{gap_probability, h_from_p1, log_hankel_det};
use gapprob::ladder::{verify_compat_gue, verify_compat_lue};
use gapprob::numerics::{bits_for_digits, erf, infinity, tolerance};
use gapprob::oracle::{direct_quadrature_prob, mc_gap_probability, MCConfig};
use gapprob::orthopoly::{build_by_quadrature, build_from_moments};
use gapprob::painleve::{
    independence_check, sigma_ode_relative, solve_edge_profiles, tw_fredholm, HastingsMcLeod, ScalingSpec, SigmaKind,
    TW_NODES,
};
use gapprob::{PrecisionPolicy, Real, WeightSpec, Window};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;

/// Prints the criterion line and fails the test when `pass` is false or the
/// run exceeded its time budget.
fn report(id: u32, title: &str, pass: bool, detail: String, elapsed: Duration, budget: Duration) {
    let pass = pass && elapsed <= budget;
    let verdict = if pass { "PASS" } else { "FAIL" };
    // Written to the raw handle so the line survives output capture.
    let _ = writeln!(
        std::io::stderr(),
        "criterion {id} [{verdict}] {title}: {detail} ({:.1}s, budget {}s)",
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    assert!(pass, "criterion {id} failed: {detail}");
}

fn policy(digits: u32) -> PrecisionPolicy {
    PrecisionPolicy::new(digits).unwrap()
}

fn prec(digits: u32) -> u32 {
    bits_for_digits(digits) + 32
}

fn window(a: f64, b: f64, digits: u32) -> Window {
    Window::from_f64(a, b, prec(digits)).unwrap()
}

fn rel(x: &Real, y: &Real) -> f64 {
    let d = Real::with_val(x.prec(), x - y).abs();
    let s = Real::with_val(x.prec(), y.abs_ref()).max(&Real::with_val(x.prec(), 1e-300));
    (d / s).to_f64()
}

/// Random finite window, rounded to 1/64 so it prints exactly.
fn gue_window(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let a = (rng.gen_range(-3.0..1.0f64) * 64.0).round() / 64.0;
    let b = a + (rng.gen_range(0.5..4.0f64) * 64.0).round() / 64.0;
    (a, b)
}

fn lue_window(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let a = if rng.gen_bool(0.2) { 0.0 } else { (rng.gen_range(0.05..3.0f64) * 64.0).round() / 64.0 };
    let b = a + (rng.gen_range(0.5..6.0f64) * 64.0).round() / 64.0;
    (a, b)
}

fn lue_alpha(rng: &mut ChaCha8Rng) -> f64 {
    (rng.gen_range(0.25..3.0f64) * 4.0).round() / 4.0
}

#[test]
fn criterion_1_compatibility_identities() {
    let start = Instant::now();
    let digits = 80;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = (0.0f64, String::new());
    let mut pass = true;
    let mut count = 0;
    for i in 0..10 {
        let (a, b) = gue_window(&mut rng);
        let win = if i == 9 {
            Window::new(Real::with_val(prec(digits), a), infinity(prec(digits), false)).unwrap()
        } else {
            window(a, b, digits)
        };
        let sys = build_from_moments(&WeightSpec::Gaussian, &win, 6, &policy(digits)).unwrap();
        for n in 1..=6 {
            let r = verify_compat_gue(&sys, n).unwrap();
            count += r.residuals.len();
            pass &= r.pass && r.tolerance <= tolerance(digits, 3.0);
            let (name, v) = r.worst();
            if v > worst.0 {
                worst = (v, format!("gue n={n} ({a}, {}) {name}", win.b_f64()));
            }
        }
    }
    for i in 0..10 {
        let (a, b) = lue_window(&mut rng);
        let alpha = lue_alpha(&mut rng);
        let w = WeightSpec::laguerre(alpha).unwrap();
        let win = if i == 9 {
            Window::new(Real::with_val(prec(digits), a), infinity(prec(digits), false)).unwrap()
        } else {
            window(a, b, digits)
        };
        let sys = build_from_moments(&w, &win, 6, &policy(digits)).unwrap();
        for n in 1..=6 {
            let r = verify_compat_lue(&sys, n).unwrap();
            count += r.residuals.len();
            pass &= r.pass && r.tolerance <= tolerance(digits, 3.0);
            let (name, v) = r.worst();
            if v > worst.0 {
                worst = (v, format!("lue alpha={alpha} n={n} ({a}, {}) {name}", win.b_f64()));
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        "compatibility identities",
        pass,
        format!("{count} residuals, worst {:.2e} at {} < {:.0e}", worst.0, worst.1, tolerance(digits, 3.0)),
        elapsed,
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_2_construction_cross_validation() {
    let start = Instant::now();
    let digits = 60;
    let tol = 1e-20;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut worst = (0.0f64, String::new());
    for ensemble in ["gue", "lue"] {
        for _ in 0..10 {
            let (w, (a, b)) = if ensemble == "gue" {
                (WeightSpec::Gaussian, gue_window(&mut rng))
            } else {
                (WeightSpec::laguerre(lue_alpha(&mut rng)).unwrap(), lue_window(&mut rng))
            };
            let win = window(a, b, digits);
            let m = build_from_moments(&w, &win, 10, &policy(digits)).unwrap();
            let q = build_by_quadrature(&w, &win, 10, 128, digits).unwrap_or_else(|e| panic!("{w:?} ({a}, {b}): {e}"));
            let d = m.max_deviation(&q);
            if d > worst.0 || worst.1.is_empty() {
                worst = (d, format!("{} ({a}, {b})", w.name()));
            }
        }
    }
    report(
        2,
        "moment and quadrature constructions agree",
        worst.0 < tol,
        format!("worst deviation {:.2e} at {} < {tol:.0e}", worst.0, worst.1),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

/// `d/dt ln D_n` along `(a + t, b + t)` for the Gaussian weight and along
/// `(a e^t, b e^t)` for Laguerre, at `t = 0`, by Richardson-extrapolated
/// central differences.
fn log_det_derivative(w: &WeightSpec, n: usize, win: &Window, digits: u32) -> Real {
    let p = win.a().prec();
    let log_d = |t: f64| -> Real {
        let t = Real::with_val(p, t);
        let moved = if w.is_gaussian() {
            Window::new(Real::with_val(p, win.a() + &t), Real::with_val(p, win.b() + &t))
        } else {
            let s = t.exp();
            Window::new(Real::with_val(p, win.a() * &s), Real::with_val(p, win.b() * &s))
        }
        .unwrap();
        log_hankel_det(&build_from_moments(w, &moved, n, &policy(digits)).unwrap(), n).unwrap()
    };
    let central = |h: f64| (log_d(h) - log_d(-h)) / (2.0 * h);
    let h = tolerance(digits, 5.0);
    let (d1, d2) = (central(h), central(h / 2.0));
    (d2 * 4u32 - d1) / 3u32
}

#[test]
fn criterion_3_h_identities_and_gradients() {
    let start = Instant::now();
    let digits = 60;
    let (h_tol, g_tol) = (tolerance(digits, 2.0), tolerance(digits, 2.5));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let (mut h_worst, mut g_worst) = (0.0f64, 0.0f64);
    for ensemble in ["gue", "lue"] {
        for _ in 0..5 {
            let (w, (a, b)) = if ensemble == "gue" {
                (WeightSpec::Gaussian, gue_window(&mut rng))
            } else {
                (WeightSpec::laguerre(lue_alpha(&mut rng)).unwrap(), lue_window(&mut rng))
            };
            let win = window(a, b, digits);
            for n in [2, 3] {
                let sys = build_from_moments(&w, &win, n, &policy(digits)).unwrap();
                let h = h_from_p1(&sys, n).unwrap();
                h_worst = h_worst.max(rel(&log_det_derivative(&w, n, &win, digits), &h));
                let scheme = FdScheme::default_for(&win, digits, FdOrder::Richardson4);
                let (fa, fb) = fd_gradient(&w, n, &win, &scheme, &policy(digits)).unwrap();
                let (ea, eb) = exact_gradient(&sys, n).unwrap();
                g_worst = g_worst.max(rel(&fa, &ea)).max(rel(&fb, &eb));
            }
        }
    }
    report(
        3,
        "H from p1 and its gradients",
        h_worst < h_tol && g_worst < g_tol,
        format!("H worst {h_worst:.2e} < {h_tol:.0e}, gradient worst {g_worst:.2e} < {g_tol:.0e}"),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_4_master_pdes() {
    let start = Instant::now();
    let digits = 80;
    let (gue_tol, lue_tol) = (1e-10, 1e-8);
    let gue_points: Vec<(f64, f64)> = [-2.0, -1.0, 0.0]
        .iter()
        .flat_map(|&a| [0.5, 1.5, 2.5].map(|b| (a, b)))
        .collect();
    let lue_points: Vec<(f64, f64)> = [0.25, 1.0, 2.0]
        .iter()
        .flat_map(|&a| [3.0, 5.0, 7.0].map(|b| (a, b)))
        .collect();
    let lue = WeightSpec::laguerre(1.0).unwrap();
    let (mut gue_worst, mut lue_worst, mut printed) = (0.0f64, 0.0f64, f64::INFINITY);
    for n in [2, 3, 4] {
        for &(a, b) in &gue_points {
            let win = window(a, b, digits);
            let s = FdScheme::default_for(&win, digits, FdOrder::Richardson4);
            let r = pde_residual_gue(&WeightSpec::Gaussian, n, &win, &s, &policy(digits)).unwrap();
            gue_worst = gue_worst.max(r.relative_sqrt_form).max(r.relative_cleared_form);
        }
        for &(a, b) in &lue_points {
            let win = window(a, b, digits);
            let s = FdScheme::default_for(&win, digits, FdOrder::Richardson4);
            let r = pde_residual_lue(&lue, n, &win, &s, &policy(digits)).unwrap();
            lue_worst = lue_worst.max(r.relative_sqrt_form).max(r.relative_cleared_form);
            printed = printed.min(r.checks["printed_cleared_form"]);
        }
    }
    // Truncation-dominated central differences: the residual is O(h^2).
    let mut ratios = Vec::new();
    for n in [2, 3, 4] {
        let win = window(-1.0, 1.5, digits);
        let res = |h: f64| {
            let s = FdScheme::new(h, FdOrder::Central2).unwrap();
            pde_residual_gue(&WeightSpec::Gaussian, n, &win, &s, &policy(digits)).unwrap().relative_sqrt_form
        };
        ratios.push(res(2e-3) / res(1e-3));
        let win = window(1.0, 5.0, digits);
        let res = |h: f64| {
            let s = FdScheme::new(h, FdOrder::Central2).unwrap();
            pde_residual_lue(&lue, n, &win, &s, &policy(digits)).unwrap().relative_sqrt_form
        };
        ratios.push(res(2e-3) / res(1e-3));
    }
    let ratio_ok = ratios.iter().all(|r| (r - 4.0).abs() < 0.4);
    let _ = writeln!(std::io::stderr(), "criterion 4 diagnostic: printed Laguerre octic, smallest relative value {printed:.3}");
    report(
        4,
        "master PDEs",
        gue_worst < gue_tol && lue_worst < lue_tol && ratio_ok,
        format!(
            "gue worst {gue_worst:.2e} < {gue_tol:.0e}, lue worst {lue_worst:.2e} < {lue_tol:.0e}, step-halving ratios {:?} in 4 +- 0.4",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
        start.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_5_toda_equations() {
    let start = Instant::now();
    let digits = 60;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let mut pass = true;
    let mut worst = (0.0f64, 0.0f64);
    for ensemble in ["gue", "lue"] {
        for _ in 0..5 {
            let (w, (a, b)) = if ensemble == "gue" {
                (WeightSpec::Gaussian, gue_window(&mut rng))
            } else {
                (WeightSpec::laguerre(lue_alpha(&mut rng)).unwrap(), lue_window(&mut rng))
            };
            let win = window(a, b, digits);
            let s = FdScheme::default_for(&win, digits, FdOrder::Richardson4);
            for n in [2, 3] {
                let r = toda_check(&w, n, &win, &s, &policy(digits)).unwrap();
                pass &= r.pass;
                if r.worst().1 > worst.0 {
                    worst = (r.worst().1, r.tolerance);
                }
            }
        }
    }
    report(
        5,
        "Toda equations",
        pass,
        format!("worst {:.2e} against its FD tolerance {:.1e}", worst.0, worst.1),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_6_one_sided_reductions() {
    let start = Instant::now();
    let digits = 60;
    let tol = 1e-8;
    let mut worst = 0.0f64;
    let mut cases = Vec::new();
    for n in [2, 3] {
        for z in [-1.5, -0.5, 0.8] {
            cases.push((WeightSpec::Gaussian, n, z, FreeEndpoint::A));
        }
        for z in [-0.3, 0.9, 2.0] {
            cases.push((WeightSpec::Gaussian, n, z, FreeEndpoint::B));
        }
        for alpha in [0.5, 2.0] {
            let w = WeightSpec::laguerre(alpha).unwrap();
            for z in [1.0, 4.5] {
                cases.push((w, n, z, FreeEndpoint::A));
                cases.push((w, n, z, FreeEndpoint::B));
            }
        }
    }
    for (w, n, z, free) in &cases {
        let z = Real::with_val(prec(digits), *z);
        let s = FdScheme::default_for(&one_sided_window(w, *n, &z, *free).unwrap(), digits, FdOrder::Richardson4);
        let d = one_sided_sigma(w, *n, &z, *free, &s, &policy(digits)).unwrap();
        let kind = match w {
            WeightSpec::Gaussian => SigmaKind::gue_reduction(*n),
            WeightSpec::Laguerre { alpha } => SigmaKind::lue_reduction(*n, *alpha),
        };
        worst = worst.max(sigma_ode_relative(&kind, &d.z, &d.sigma, &d.d1, &d.d2));
    }
    report(
        6,
        "one-sided limits solve the sigma forms",
        worst < tol,
        format!("{} cases, worst {worst:.2e} < {tol:.0e}", cases.len()),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_7_oracle_triangle() {
    let start = Instant::now();
    let digits = 40;
    let quad_digits = 30;
    let trials = 100_000u64;
    // Twenty windows share a 95% family-wise level.
    let z = 3.02;
    let quad_tol = 1e-13;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let (mut quad_worst, mut mc_worst) = (0.0f64, 0.0f64);
    let mut k = 0;
    for ensemble in ["gue", "lue"] {
        for i in 0..10 {
            let n = 1 + i % 3;
            let (w, (a, b)) = if ensemble == "gue" {
                (WeightSpec::Gaussian, gue_window(&mut rng))
            } else {
                let (a, b) = lue_window(&mut rng);
                (WeightSpec::laguerre(1.0).unwrap(), (a, b))
            };
            let win = window(a, b, digits);
            let hankel = gap_probability(&build_from_moments(&w, &win, n, &policy(digits)).unwrap(), n).unwrap();
            let quad = direct_quadrature_prob(&w, n, &win, 48, quad_digits).unwrap();
            quad_worst = quad_worst.max(rel(&quad, &hankel));
            let cfg = MCConfig { trials, seed: SEED + k };
            k += 1;
            let est = mc_gap_probability(&w, n, &win, &cfg).unwrap();
            let p = hankel.to_f64();
            let sd = (p * (1.0 - p) / trials as f64).sqrt().max(1.0 / trials as f64);
            mc_worst = mc_worst.max((est.p_hat - p).abs() / sd);
        }
    }
    let d = 40;
    let w1 = window(-1.0, 1.0, d);
    let exact = erf(&Real::with_val(prec(d), 1), d);
    let q1 = direct_quadrature_prob(&WeightSpec::Gaussian, 1, &w1, 40, d).unwrap();
    let h1 = gap_probability(&build_from_moments(&WeightSpec::Gaussian, &w1, 1, &policy(d)).unwrap(), 1).unwrap();
    let erf_tol = tolerance(d, 2.0);
    let erf_worst = rel(&q1, &exact).max(rel(&h1, &exact));
    report(
        7,
        "oracle triangle",
        quad_worst < quad_tol && mc_worst < z && erf_worst < erf_tol,
        format!(
            "quadrature vs Hankel {quad_worst:.2e} < {quad_tol:.0e}, MC worst {mc_worst:.2} sd < {z}, erf(1) {erf_worst:.2e} < {erf_tol:.0e}"
        ),
        start.elapsed(),
        Duration::from_secs(180),
    );
}

#[test]
fn criterion_8_scaling_limits() {
    let start = Instant::now();
    let tol = 1e-8;
    let grid: Vec<f64> = (0..=16).map(|i| -4.0 + 0.5 * i as f64).collect();
    let mut worst: f64 = 0.0;
    for spec in [
        ScalingSpec::gue_default(10),
        ScalingSpec::lue_default(10, 1.0).unwrap(),
        ScalingSpec::lue_default(10, 3.0).unwrap(),
    ] {
        let p = solve_edge_profiles(&spec, &grid, &grid).unwrap();
        worst = worst.max(p.f_residual).max(p.g_residual).max(p.pde_residual);
    }
    let hm = HastingsMcLeod::new(-6.5, 30).unwrap();
    let tw_worst = (0..=40)
        .map(|i| -6.0 + 0.25 * i as f64)
        .map(|s| (hm.f2(s).unwrap() - tw_fredholm(s, TW_NODES)).abs())
        .fold(0.0, f64::max);
    report(
        8,
        "edge profiles and Tracy-Widom",
        worst < tol && tw_worst < tol,
        format!("sigma forms and limiting PDE worst {worst:.2e} < {tol:.0e}, Fredholm vs ODE {tw_worst:.2e} < {tol:.0e}"),
        start.elapsed(),
        Duration::from_secs(180),
    );
}

#[test]
fn criterion_9_asymptotic_independence() {
    let start = Instant::now();
    let grid: Vec<f64> = (0..=4).map(|i| -2.0 + i as f64).collect();
    let n_list = [4, 8, 16];
    let gue = independence_check(&ScalingSpec::gue_default(4), &n_list, &grid, &grid).unwrap();
    let lue = independence_check(&ScalingSpec::lue_default(4, 1.0).unwrap(), &n_list, &grid, &grid).unwrap();
    let contained = gue.rows.iter().chain(&lue.rows).all(|r| r.containment);
    let e: Vec<String> = gue.rows.iter().map(|r| format!("{:.3e}", r.e_product)).collect();
    let d: Vec<String> = lue.rows.iter().map(|r| format!("{:.3e}", r.htilde_deviation)).collect();
    report(
        9,
        "asymptotic independence",
        gue.e_product_decreasing() && lue.htilde_decreasing() && contained,
        format!("gue E(n) {e:?}, lue H-tilde deviation {d:?}, both strictly decreasing"),
        start.elapsed(),
        Duration::from_secs(900),
    );
}
