//! Fast subset of the verification suite, one check per family.

use gapprob::calculus::{
    exact_gradient, fd_gradient, one_sided_sigma, one_sided_window, pde_residual_gue, pde_residual_lue, toda_check,
    FdOrder, FdScheme, FreeEndpoint,
};
use gapprob::gap::{gap_probability, h_from_p1, log_hankel_det};
use gapprob::ladder::{verify_compat_gue, verify_compat_lue};
use gapprob::numerics::{erf, tolerance};
use gapprob::oracle::{direct_quadrature_prob, mc_gap_probability, MCConfig};
use gapprob::orthopoly::{build_by_quadrature, build_from_moments};
use gapprob::painleve::{solve_edge_profiles, tw_fredholm, HastingsMcLeod, ScalingSpec, SigmaKind, TW_NODES};
use gapprob::{PrecisionPolicy, Real, WeightSpec, Window};

use crate::commands::{CliResult, GUE_PDE_TOL, LUE_PDE_TOL, MC_Z, SIGMA_TOL};
use crate::output::{Outcome, Report};

/// Converged `F2(0)`.
const F2_AT_ZERO: f64 = 0.969_372_828_355;

fn rel(x: &Real, y: &Real) -> f64 {
    let d = Real::with_val(x.prec(), x - y).abs();
    let s = Real::with_val(x.prec(), y.abs_ref()).max(&Real::with_val(x.prec(), 1e-300));
    (d / s).to_f64()
}

fn win(a: f64, b: f64, digits: u32) -> Window {
    Window::from_f64(a, b, gapprob::numerics::bits_for_digits(digits) + 32).expect("valid window")
}

/// `d/dt ln D_n(a + t, b + t)` at `t = 0`, Richardson-extrapolated central
/// differences.
fn shift_derivative(w: &WeightSpec, n: usize, win: &Window, policy: &PrecisionPolicy) -> gapprob::Result<Real> {
    let prec = win.a().prec();
    let log_d = |t: &Real| -> gapprob::Result<Real> {
        let shifted = Window::new(Real::with_val(prec, win.a() + t), Real::with_val(prec, win.b() + t))?;
        log_hankel_det(&build_from_moments(w, &shifted, n, policy)?, n)
    };
    let central = |h: f64| -> gapprob::Result<Real> {
        let h = Real::with_val(prec, h);
        let up = log_d(&h)?;
        let down = log_d(&Real::with_val(prec, -&h))?;
        Ok(Real::with_val(prec, &up - &down) / (h * 2u32))
    };
    let h = 1e-12;
    let (d1, d2) = (central(h)?, central(h / 2.0)?);
    Ok((d2 * 4u32 - d1) / 3u32)
}

pub fn run(tol_scale: f64) -> CliResult<Outcome> {
    let mut r = Report::new("selftest", 60);
    let mut check = |name: &str, residual: f64, tol: f64| r.check(name, residual, tol * tol_scale);
    let gue = WeightSpec::Gaussian;
    let lue = WeightSpec::laguerre(1.0)?;
    let p60 = PrecisionPolicy::new(60)?;
    let p80 = PrecisionPolicy::new(80)?;

    // Compatibility identities.
    let w = win(-1.0, 1.5, 60);
    let c = verify_compat_gue(&build_from_moments(&gue, &w, 3, &p60)?, 3)?;
    check("compat_gue", c.worst().1, c.tolerance);
    let w = win(0.5, 6.0, 60);
    let c = verify_compat_lue(&build_from_moments(&lue, &w, 3, &p60)?, 3)?;
    check("compat_lue", c.worst().1, c.tolerance);

    // Two constructions of the same system.
    let w = win(-1.0, 2.0, 60);
    let a = build_from_moments(&gue, &w, 6, &p60)?;
    let b = build_by_quadrature(&gue, &w, 6, 64, 60)?;
    check("construction_agreement", a.max_deviation(&b), 1e-20);

    // H from p1 and its finite-difference gradient.
    let w = win(-1.0, 1.5, 60);
    let sys = build_from_moments(&gue, &w, 3, &p60)?;
    let scheme = FdScheme::default_for(&w, 60, FdOrder::Richardson4);
    let (fa, _) = fd_gradient(&gue, 3, &w, &scheme, &p60)?;
    let (ea, _) = exact_gradient(&sys, 3)?;
    check("fd_gradient_gue", rel(&fa, &ea), tolerance(60, 2.5));
    let h = h_from_p1(&sys, 3)?;
    check("h_from_log_det", rel(&shift_derivative(&gue, 3, &w, &p60)?, &h), tolerance(60, 2.5));

    // Master equations.
    let w = win(-1.0, 2.0, 80);
    let s = FdScheme::default_for(&w, 80, FdOrder::Richardson4);
    let rep = pde_residual_gue(&gue, 3, &w, &s, &p80)?;
    check("master_pde_gue", rep.relative_sqrt_form.max(rep.relative_cleared_form), GUE_PDE_TOL);
    let w = win(0.5, 6.0, 80);
    let s = FdScheme::default_for(&w, 80, FdOrder::Richardson4);
    let rep = pde_residual_lue(&lue, 3, &w, &s, &p80)?;
    check("master_pde_lue", rep.relative_sqrt_form.max(rep.relative_cleared_form), LUE_PDE_TOL);

    // Toda equations.
    let w = win(-1.0, 1.5, 60);
    let s = FdScheme::default_for(&w, 60, FdOrder::Richardson4);
    let t = toda_check(&gue, 2, &w, &s, &p60)?;
    check("toda_gue", t.worst().1, t.tolerance);

    // One-sided reduction.
    let z = Real::with_val(p60.bits(), 1.1);
    let ow = one_sided_window(&gue, 3, &z, FreeEndpoint::B)?;
    let s = FdScheme::default_for(&ow, 60, FdOrder::Richardson4);
    let sd = one_sided_sigma(&gue, 3, &z, FreeEndpoint::B, &s, &p60)?;
    let res = gapprob::painleve::sigma_ode_relative(&SigmaKind::gue_reduction(3), &sd.z, &sd.sigma, &sd.d1, &sd.d2);
    check("sigma_piv", res, SIGMA_TOL);

    // Oracles.
    let w = win(-1.0, 1.0, 60);
    let exact = erf(&Real::with_val(p60.bits(), 1), 60);
    let q = direct_quadrature_prob(&gue, 1, &w, 40, 40)?;
    check("quadrature_erf_one", rel(&q, &exact), 1e-35);
    let q2 = direct_quadrature_prob(&gue, 2, &w, 64, 40)?;
    let h2 = gap_probability(&build_from_moments(&gue, &w, 2, &p60)?, 2)?;
    check("quadrature_vs_hankel", rel(&q2, &h2), 1e-15);
    let cfg = MCConfig { trials: 20_000, seed: 17 };
    let est = mc_gap_probability(&gue, 1, &w, &cfg)?;
    let p1 = exact.to_f64();
    check(
        "mc_erf_one",
        (est.p_hat - p1).abs(),
        MC_Z * (p1 * (1.0 - p1) / cfg.trials as f64).sqrt(),
    );

    // Tracy-Widom and the edge profiles.
    check("tw_tail", 1.0 - tw_fredholm(8.0, TW_NODES), 1e-12);
    check("tw_at_zero", (tw_fredholm(0.0, 2 * TW_NODES) - F2_AT_ZERO).abs(), 1e-11);
    let hm = HastingsMcLeod::new(-7.0, 30)?;
    let worst = [-6.0, -3.0, 0.0, 2.0]
        .into_iter()
        .map(|s| Ok((hm.f2(s)? - tw_fredholm(s, 2 * TW_NODES)).abs()))
        .collect::<gapprob::Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    check("tw_ode_vs_fredholm", worst, 1e-8);
    let grid = [-2.0, 0.0, 2.0];
    let prof = solve_edge_profiles(&ScalingSpec::gue_default(10), &grid, &grid)?;
    check("limiting_pde_gue", prof.pde_residual, SIGMA_TOL);

    let first = r.first_failure().map(str::to_string);
    Ok(Outcome::json(r.with_data(serde_json::json!({ "tol_scale": tol_scale, "first_failure": first }))))
}
