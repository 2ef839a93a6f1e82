//! Ladder-operator auxiliary quantities and their compatibility identities.
//!
//! With `w = e^{-v}` on `(a, b)` the lowering operator gives
//! `A_n(z) = R_{n,b}/(z-b) + R_{n,a}/(z-a) + (2 | R_n/z)` and
//! `B_n(z) = r_{n,b}/(z-b) + r_{n,a}/(z-a) + (0 | r_n/z)` for the Gaussian and
//! Laguerre weights. The endpoint parts are
//!
//! ```text
//! R_{n,a} =  w(a) P_n(a)^2 / h_n        r_{n,a} =  w(a) P_n(a) P_{n-1}(a) / h_{n-1}
//! R_{n,b} = -w(b) P_n(b)^2 / h_n        r_{n,b} = -w(b) P_n(b) P_{n-1}(b) / h_{n-1}
//! ```
//!
//! and vanish at an infinite endpoint.

use std::collections::BTreeMap;

use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{bits_for_digits, tolerance, Real};
use crate::orthopoly::{eval_monic, window_rule, OpSystem};
use crate::weights::{weight_at, WeightSpec};

#[derive(Debug, Clone)]
pub struct GueLadder {
    pub n: usize,
    pub big_r_a: Real,
    pub big_r_b: Real,
    pub r_a: Real,
    pub r_b: Real,
}

#[derive(Debug, Clone)]
pub struct LueLadder {
    pub n: usize,
    pub big_r: Real,
    pub r: Real,
    pub big_r_a: Real,
    pub big_r_b: Real,
    pub r_a: Real,
    pub r_b: Real,
}

/// Scaled residuals of a family of identities. Each entry is
/// `|sum of terms| / max(1, max |term|)`; the report passes when all of them
/// are below `tolerance = 10^{-digits/3}`.
#[derive(Debug, Clone, Serialize)]
pub struct CompatReport {
    pub ensemble: &'static str,
    pub n: usize,
    pub residuals: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub pass: bool,
}

impl CompatReport {
    pub(crate) fn new(ensemble: &'static str, n: usize, digits: u32) -> Self {
        Self::with_tolerance(ensemble, n, tolerance(digits, 3.0))
    }

    pub(crate) fn with_tolerance(ensemble: &'static str, n: usize, tolerance: f64) -> Self {
        CompatReport {
            ensemble,
            n,
            residuals: BTreeMap::new(),
            tolerance,
            pass: true,
        }
    }

    pub(crate) fn add(&mut self, name: impl Into<String>, terms: &[Real]) {
        let prec = terms.iter().map(Float::prec).max().unwrap_or(64);
        let mut sum = Float::with_val(prec, 0);
        let mut scale = Float::with_val(prec, 1);
        for t in terms {
            sum += t;
            let m = Float::with_val(prec, t.abs_ref());
            if m > scale {
                scale = m;
            }
        }
        let r = (sum.abs() / scale).to_f64();
        let r = if r.is_nan() { f64::INFINITY } else { r };
        self.pass &= r < self.tolerance;
        self.residuals.insert(name.into(), r);
    }

    /// Largest scaled residual and its identity name.
    pub fn worst(&self) -> (&str, f64) {
        self.residuals
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .fold(("", 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
    }

    pub fn failures(&self) -> Vec<&str> {
        self.residuals
            .iter()
            .filter(|(_, v)| **v >= self.tolerance)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

/// `(R_{n,a}, R_{n,b}, r_{n,a}, r_{n,b})` for `0 <= n <= n_max + 1`.
fn endpoint_terms(sys: &OpSystem, n: usize) -> Result<[Real; 4]> {
    if n > sys.n_max + 1 {
        return Err(Error::InvalidParameter(format!(
            "ladder index {n} exceeds n_max+1 = {}",
            sys.n_max + 1
        )));
    }
    let prec = sys.prec();
    let zero = || Float::with_val(prec, 0);
    let side = |t: &Real, vals: &Option<Vec<Real>>, sign: i32| -> (Real, Real) {
        match vals {
            None => (zero(), zero()),
            Some(p) => {
                let wt = sys.weight.endpoint_weight(t, prec);
                let big = Float::with_val(prec, &wt * Float::with_val(prec, p[n].square_ref())) / &sys.h[n] * sign;
                let small = if n == 0 {
                    zero()
                } else {
                    Float::with_val(prec, &wt * &p[n]) * &p[n - 1] / &sys.h[n - 1] * sign
                };
                (big, small)
            }
        }
    };
    let (ba, sa) = side(sys.window.a(), &sys.pa, 1);
    let (bb, sb) = side(sys.window.b(), &sys.pb, -1);
    Ok([ba, bb, sa, sb])
}

pub fn gue_ladder(sys: &OpSystem, n: usize) -> Result<GueLadder> {
    if !sys.weight.is_gaussian() {
        return Err(Error::EnsembleMismatch {
            expected: "gaussian",
            found: sys.weight.name(),
        });
    }
    let [big_r_a, big_r_b, r_a, r_b] = endpoint_terms(sys, n)?;
    Ok(GueLadder {
        n,
        big_r_a,
        big_r_b,
        r_a,
        r_b,
    })
}

/// LUE quantities; `R_n` and `r_n` come from the sum rules
/// `R_n + R_{n,a} + R_{n,b} = 1` and `r_n + r_{n,a} + r_{n,b} + n = 0`.
pub fn lue_ladder(sys: &OpSystem, n: usize) -> Result<LueLadder> {
    if sys.weight.is_gaussian() {
        return Err(Error::EnsembleMismatch {
            expected: "laguerre",
            found: sys.weight.name(),
        });
    }
    let [big_r_a, big_r_b, r_a, r_b] = endpoint_terms(sys, n)?;
    let prec = sys.prec();
    let big_r = Float::with_val(prec, 1) - &big_r_a - &big_r_b;
    let r = -Float::with_val(prec, n) - &r_a - &r_b;
    Ok(LueLadder {
        n,
        big_r,
        r,
        big_r_a,
        big_r_b,
        r_a,
        r_b,
    })
}

/// `R_n` and `r_n` from their defining integrals
/// `alpha/h_n int P_n^2 y^{alpha-1} e^{-y}` and
/// `alpha/h_{n-1} int P_n P_{n-1} y^{alpha-1} e^{-y}`, by composite
/// Gauss–Legendre quadrature. Independent of the sum rules.
pub fn lue_integrals(sys: &OpSystem, n: usize, nodes: usize) -> Result<(Real, Real)> {
    let WeightSpec::Laguerre { alpha } = sys.weight else {
        return Err(Error::EnsembleMismatch {
            expected: "laguerre",
            found: sys.weight.name(),
        });
    };
    if n > sys.n_max + 1 {
        return Err(Error::InvalidParameter(format!("index {n} exceeds n_max+1")));
    }
    let digits = sys.digits_requested;
    let prec = sys.prec();
    // The integrand carries y^{alpha-1}, so grade as for exponent alpha-1.
    let shifted = WeightSpec::Laguerre { alpha: (alpha - 1.0).max(1e-3) };
    let rule = window_rule(&shifted, &sys.window, n + 1, nodes, digits, bits_for_digits(digits + 20));
    let mut big = Float::with_val(prec, 0);
    let mut small = Float::with_val(prec, 0);
    for (y, q) in rule.nodes.iter().zip(&rule.weights) {
        let y = Float::with_val(prec, y);
        if y.is_zero() {
            continue;
        }
        let base = Float::with_val(prec, weight_at(&sys.weight, &y)?) / &y * q;
        let pn = eval_monic(sys, n, &y)?;
        if n >= 1 {
            let pm = eval_monic(sys, n - 1, &y)?;
            small += Float::with_val(prec, &pn * &pm) * &base;
        }
        big += Float::with_val(prec, pn.square_ref()) * &base;
    }
    big = big * alpha / &sys.h[n];
    if n >= 1 {
        small = small * alpha / &sys.h[n - 1];
    }
    Ok((big, small))
}

/// Eight real probe points away from the poles `{0, a, b}`.
fn probe_points(sys: &OpSystem) -> Vec<Real> {
    let prec = sys.prec();
    let a = sys.window.a_f64();
    let b = sys.window.b_f64();
    let (fa, fb) = match (a.is_finite(), b.is_finite()) {
        (true, true) => (a, b),
        (true, false) => (a, a + 4.0),
        (false, true) => (b - 4.0, b),
        (false, false) => (-2.0, 2.0),
    };
    let mid = 0.5 * (fa + fb);
    let q = (fb - fa) / 4.0;
    let m = fa.abs().max(fb.abs()) + 3.0;
    let raw = [fa - 1.0, fb + 1.0, mid + q, mid - q, mid + q / 3.0, m, -m, 10.0];
    raw.iter()
        .map(|&z| {
            let mut z = z;
            while [0.0, a, b].iter().any(|p| (z - p).abs() < 1e-3) {
                z += 0.1234;
            }
            Float::with_val(prec, z)
        })
        .collect()
}

/// `x / (z - t)`, zero when `t` is infinite.
fn pole(x: &Real, z: &Real, t: &Real) -> Real {
    if t.is_infinite() {
        Float::with_val(x.prec(), 0)
    } else {
        Float::with_val(x.prec(), x / Float::with_val(x.prec(), z - t))
    }
}

/// `x * t`, zero when `t` is infinite (the paired quantity then vanishes).
fn at(x: &Real, t: &Real) -> Real {
    if t.is_infinite() {
        Float::with_val(x.prec(), 0)
    } else {
        Float::with_val(x.prec(), x * t)
    }
}

/// `x / t`, zero when `t` is infinite.
fn over(x: &Real, t: &Real) -> Real {
    if t.is_infinite() {
        Float::with_val(x.prec(), 0)
    } else {
        Float::with_val(x.prec(), x / t)
    }
}

/// `r^2 / R`, zero when both vanish (infinite endpoint).
fn sq_over(r: &Real, big: &Real) -> Real {
    if big.is_zero() {
        Float::with_val(r.prec(), 0)
    } else {
        Float::with_val(r.prec(), r.square_ref()) / big
    }
}

struct Coeffs {
    big_a: Vec<Real>,
    big_b: Vec<Real>,
    a: Vec<Real>,
    b: Vec<Real>,
    /// Laguerre only: `R_j`, `r_j`.
    big_0: Vec<Real>,
    r_0: Vec<Real>,
}

fn collect(sys: &OpSystem, upto: usize) -> Result<Coeffs> {
    let mut c = Coeffs {
        big_a: vec![],
        big_b: vec![],
        a: vec![],
        b: vec![],
        big_0: vec![],
        r_0: vec![],
    };
    let prec = sys.prec();
    for j in 0..=upto {
        let [ba, bb, sa, sb] = endpoint_terms(sys, j)?;
        if !sys.weight.is_gaussian() {
            c.big_0.push(Float::with_val(prec, 1) - &ba - &bb);
            c.r_0.push(-Float::with_val(prec, j) - &sa - &sb);
        }
        c.big_a.push(ba);
        c.big_b.push(bb);
        c.a.push(sa);
        c.b.push(sb);
    }
    Ok(c)
}

fn check_n(sys: &OpSystem, n: usize) -> Result<()> {
    if n < 1 || n > sys.n_max {
        return Err(Error::InvalidParameter(format!(
            "identity check needs 1 <= n <= n_max = {}, got {n}",
            sys.n_max
        )));
    }
    Ok(())
}

/// Pointwise `(S1)`, `(S2)` and `(S2')` at the probe points.
fn pointwise(report: &mut CompatReport, sys: &OpSystem, c: &Coeffs, n: usize) {
    let prec = sys.prec();
    let (ta, tb) = (sys.window.a(), sys.window.b());
    let gaussian = sys.weight.is_gaussian();
    for (k, z) in probe_points(sys).iter().enumerate() {
        let big_a = |j: usize| -> Real {
            let base = if gaussian {
                Float::with_val(prec, 2)
            } else {
                Float::with_val(prec, &c.big_0[j] / z)
            };
            base + pole(&c.big_a[j], z, ta) + pole(&c.big_b[j], z, tb)
        };
        let big_b = |j: usize| -> Real {
            let base = if gaussian {
                Float::with_val(prec, 0)
            } else {
                Float::with_val(prec, &c.r_0[j] / z)
            };
            base + pole(&c.a[j], z, ta) + pole(&c.b[j], z, tb)
        };
        let vp = sys.weight.v_prime(z);
        let shift = Float::with_val(prec, z - &sys.alpha[n]);
        let (an, bn, bn1) = (big_a(n), big_b(n), big_b(n + 1));
        report.add(
            format!("S1[{k}]"),
            &[bn1.clone(), bn.clone(), -Float::with_val(prec, &shift * &an), vp.clone()],
        );
        report.add(
            format!("S2[{k}]"),
            &[
                Float::with_val(prec, 1),
                Float::with_val(prec, &shift * &bn1),
                -Float::with_val(prec, &shift * &bn),
                -Float::with_val(prec, &sys.beta[n + 1] * big_a(n + 1)),
                Float::with_val(prec, &sys.beta[n] * big_a(n - 1)),
            ],
        );
        let mut terms = vec![Float::with_val(prec, bn.square_ref()), Float::with_val(prec, &vp * &bn)];
        for j in 0..n {
            terms.push(big_a(j));
        }
        terms.push(-Float::with_val(prec, &sys.beta[n] * &an) * big_a(n - 1));
        report.add(format!("S2'[{k}]"), &terms);
    }
}

/// Residuals of the GUE difference identities at index `n`.
pub fn verify_compat_gue(sys: &OpSystem, n: usize) -> Result<CompatReport> {
    gue_ladder(sys, 0)?;
    check_n(sys, n)?;
    let c = collect(sys, n + 1)?;
    let prec = sys.prec();
    let mut rep = CompatReport::new("gaussian", n, sys.digits_requested);
    let (ta, tb) = (sys.a(), sys.b());
    let f = |x: Real| x;
    let two = |x: &Real| Float::with_val(prec, x * 2u32);
    let (al, be) = (&sys.alpha[n], &sys.beta[n]);

    rep.add("R_a+R_b=2alpha", &[c.big_a[n].clone(), c.big_b[n].clone(), -two(al)]);
    if tb.is_finite() {
        rep.add(
            "r_b_step",
            &[c.b[n + 1].clone(), c.b[n].clone(), -f(Float::with_val(prec, &tb - al) * &c.big_b[n])],
        );
        rep.add("r_b_square", &[Float::with_val(prec, c.b[n].square_ref()), -(Float::with_val(prec, be * &c.big_b[n]) * &c.big_b[n - 1])]);
    }
    if ta.is_finite() {
        rep.add(
            "r_a_step",
            &[c.a[n + 1].clone(), c.a[n].clone(), -f(Float::with_val(prec, &ta - al) * &c.big_a[n])],
        );
        rep.add("r_a_square", &[Float::with_val(prec, c.a[n].square_ref()), -(Float::with_val(prec, be * &c.big_a[n]) * &c.big_a[n - 1])]);
    }
    rep.add(
        "beta_from_r",
        &[
            be.clone(),
            -Float::with_val(prec, n) / 2u32,
            -Float::with_val(prec, &c.a[n] / 2u32),
            -Float::with_val(prec, &c.b[n] / 2u32),
        ],
    );
    if ta.is_finite() && tb.is_finite() {
        let ba = Float::with_val(prec, &tb - &ta);
        let cross = Float::with_val(prec, &c.b[n] * &c.a[n]) * 2u32 / &ba;
        let mixed = (Float::with_val(prec, &c.big_b[n] * &c.big_a[n - 1]) + Float::with_val(prec, &c.big_b[n - 1] * &c.big_a[n])) / &ba;
        let mut tb_terms = vec![cross.clone(), Float::with_val(prec, &tb * &c.b[n]) * 2u32];
        tb_terms.extend(c.big_b[..n].iter().cloned());
        tb_terms.push(-Float::with_val(prec, be * &mixed));
        tb_terms.push(-Float::with_val(prec, be * Float::with_val(prec, &c.big_b[n - 1] + &c.big_b[n])) * 2u32);
        rep.add("sum_b", &tb_terms);
        let mut ta_terms = vec![-cross, Float::with_val(prec, &ta * &c.a[n]) * 2u32];
        ta_terms.extend(c.big_a[..n].iter().cloned());
        ta_terms.push(Float::with_val(prec, be * &mixed));
        ta_terms.push(-Float::with_val(prec, be * Float::with_val(prec, &c.big_a[n - 1] + &c.big_a[n])) * 2u32);
        rep.add("sum_a", &ta_terms);
    }
    let mut lhs = vec![at(&c.b[n], &tb) * 2u32, at(&c.a[n], &ta) * 2u32];
    for j in 0..n {
        lhs.push(c.big_a[j].clone());
        lhs.push(c.big_b[j].clone());
    }
    let mut combined = lhs.clone();
    let all4 = Float::with_val(prec, &c.big_b[n - 1] + &c.big_b[n]) + &c.big_a[n - 1] + &c.big_a[n];
    combined.push(-Float::with_val(prec, be * &all4) * 2u32);
    rep.add("sum_combined", &combined);
    let mut elim = lhs;
    elim.push(-Float::with_val(prec, be * Float::with_val(prec, &c.big_a[n] + &c.big_b[n])) * 2u32);
    elim.push(-sq_over(&c.a[n], &c.big_a[n]) * 2u32);
    elim.push(-sq_over(&c.b[n], &c.big_b[n]) * 2u32);
    rep.add("sum_combined_eliminated", &elim);

    pointwise(&mut rep, sys, &c, n);
    Ok(rep)
}

/// Residuals of the LUE difference identities at index `n`. Identities that
/// divide by `a` are skipped when `a = 0`.
pub fn verify_compat_lue(sys: &OpSystem, n: usize) -> Result<CompatReport> {
    lue_ladder(sys, 0)?;
    check_n(sys, n)?;
    let c = collect(sys, n + 1)?;
    let prec = sys.prec();
    let alpha = Float::with_val(prec, sys.weight.alpha());
    let mut rep = CompatReport::new("laguerre", n, sys.digits_requested);
    let (ta, tb) = (sys.a(), sys.b());
    let (al, be, be1) = (&sys.alpha[n], &sys.beta[n], &sys.beta[n + 1]);
    let mul = |x: &Real, y: &Real| Float::with_val(prec, x * y);
    let (rr, r, ra, rb) = (&c.big_0, &c.r_0, &c.a, &c.b);
    let (rra, rrb) = (&c.big_a, &c.big_b);

    rep.add("R_sum_rule", &[rr[n].clone(), rra[n].clone(), rrb[n].clone(), Float::with_val(prec, -1)]);
    rep.add("r_step", &[r[n].clone(), r[n + 1].clone(), -alpha.clone(), mul(al, &rr[n])]);
    rep.add("r_a_step", &[ra[n].clone(), ra[n + 1].clone(), -mul(&Float::with_val(prec, &ta - al), &rra[n])]);
    if tb.is_finite() {
        rep.add("r_b_step", &[rb[n].clone(), rb[n + 1].clone(), -mul(&Float::with_val(prec, &tb - al), &rrb[n])]);
    }
    rep.add("r_square", &[mul(&r[n], &r[n]), -mul(&alpha, &r[n]), -mul(&mul(be, &rr[n]), &rr[n - 1])]);
    rep.add("r_a_square", &[mul(&ra[n], &ra[n]), -mul(&mul(be, &rra[n - 1]), &rra[n])]);
    rep.add("r_b_square", &[mul(&rb[n], &rb[n]), -mul(&mul(be, &rrb[n - 1]), &rrb[n])]);

    let finite_b = tb.is_finite();
    let ab = Float::with_val(prec, &ta - &tb);
    let ab_cross = if finite_b {
        Float::with_val(prec, mul(&rra[n - 1], &rrb[n]) + mul(&rrb[n - 1], &rra[n])) / &ab
    } else {
        Float::with_val(prec, 0)
    };
    let rab = if finite_b {
        mul(&ra[n], &rb[n]) * 2u32 / &ab
    } else {
        Float::with_val(prec, 0)
    };
    let mixed_a = mul(&rra[n - 1], &rr[n]) + mul(&rr[n - 1], &rra[n]);
    let mixed_b = mul(&rrb[n - 1], &rr[n]) + mul(&rr[n - 1], &rrb[n]);
    if !ta.is_zero() {
        let mut t = vec![
            -mul(&r[n], &ra[n]) * 2u32 / &ta,
            -over(&(mul(&r[n], &rb[n]) * 2u32), &tb),
            r[n].clone(),
            mul(&alpha, &ra[n]) / &ta,
            over(&mul(&alpha, &rb[n]), &tb),
        ];
        t.extend(rr[..n].iter().cloned());
        t.push(mul(be, &Float::with_val(prec, &mixed_a / &ta)));
        t.push(mul(be, &over(&mixed_b, &tb)));
        rep.add("origin_sum", &t);

        let mut t = vec![
            mul(&r[n], &ra[n]) * 2u32 / &ta,
            rab.clone(),
            ra[n].clone(),
            -mul(&alpha, &ra[n]) / &ta,
        ];
        t.extend(rra[..n].iter().cloned());
        t.push(-mul(be, &Float::with_val(prec, &mixed_a / &ta)));
        t.push(-mul(be, &ab_cross));
        rep.add("sum_a", &t);
    }
    if finite_b {
        let mut t = vec![
            mul(&r[n], &rb[n]) * 2u32 / &tb,
            -rab.clone(),
            rb[n].clone(),
            -mul(&alpha, &rb[n]) / &tb,
        ];
        t.extend(rrb[..n].iter().cloned());
        t.push(-mul(be, &Float::with_val(prec, &mixed_b / &tb)));
        t.push(mul(be, &ab_cross));
        rep.add("sum_b", &t);
    }
    rep.add(
        "S2_telescoped",
        &[
            Float::with_val(prec, 1),
            r[n + 1].clone(),
            -r[n].clone(),
            ra[n + 1].clone(),
            -ra[n].clone(),
            rb[n + 1].clone(),
            -rb[n].clone(),
        ],
    );
    rep.add(
        "S2_origin",
        &[mul(al, &r[n]), -mul(al, &r[n + 1]), -mul(be1, &rr[n + 1]), mul(be, &rr[n - 1])],
    );
    let da = Float::with_val(prec, &ta - al);
    rep.add(
        "S2_a",
        &[mul(&da, &ra[n + 1]), -mul(&da, &ra[n]), -mul(be1, &rra[n + 1]), mul(be, &rra[n - 1])],
    );
    if finite_b {
        let db = Float::with_val(prec, &tb - al);
        rep.add(
            "S2_b",
            &[mul(&db, &rb[n + 1]), -mul(&db, &rb[n]), -mul(be1, &rrb[n + 1]), mul(be, &rrb[n - 1])],
        );
    }
    rep.add("r_sum_rule", &[r[n].clone(), ra[n].clone(), rb[n].clone(), Float::with_val(prec, n)]);
    rep.add(
        "alpha_from_R",
        &[
            al.clone(),
            -alpha.clone(),
            -mul(&ta, &rra[n]),
            -at(&rrb[n], &tb),
            -Float::with_val(prec, 2 * n + 1),
        ],
    );
    let [expanded, eliminated] = weighted_sums(sys, &c, n, 0);
    rep.add("weighted_sum_expanded", &expanded);
    rep.add("weighted_sum", &eliminated);

    pointwise(&mut rep, sys, &c, n);
    Ok(rep)
}

/// Terms of the weighted-sum identity `a sum R_{j,a} + b sum R_{j,b} = ...`
/// in expanded and eliminated form, with the `b`-sum starting at `b_from`.
fn weighted_sums(sys: &OpSystem, c: &Coeffs, n: usize, b_from: usize) -> [Vec<Real>; 2] {
    let prec = sys.prec();
    let alpha = Float::with_val(prec, sys.weight.alpha());
    let (ta, tb) = (sys.a(), sys.b());
    let be = &sys.beta[n];
    let mul = |x: &Real, y: &Real| Float::with_val(prec, x * y);
    let (rr, r, ra, rb, rra, rrb) = (&c.big_0, &c.r_0, &c.a, &c.b, &c.big_a, &c.big_b);
    let mut lhs: Vec<Real> = rra[..n].iter().map(|x| mul(x, &ta)).collect();
    lhs.extend(rrb[b_from.min(n)..n].iter().map(|x| at(x, &tb)));

    let mut expanded = lhs.clone();
    let bracket = mul(&Float::with_val(prec, &rra[n - 1] + &rrb[n - 1]), &rr[n])
        + mul(&Float::with_val(prec, &rra[n] + &rrb[n]), &rr[n - 1])
        + mul(&rra[n - 1], &rrb[n])
        + mul(&rrb[n - 1], &rra[n]);
    expanded.push(-mul(be, &bracket));
    expanded.push(mul(&r[n], &Float::with_val(prec, &ra[n] + &rb[n])) * 2u32);
    expanded.push(-mul(&Float::with_val(prec, &alpha - &ta), &ra[n]));
    expanded.push(-(mul(&alpha, &rb[n]) - at(&rb[n], &tb)));
    expanded.push(mul(&ra[n], &rb[n]) * 2u32);

    let mut elim = lhs;
    let two_n_alpha = Float::with_val(prec, 2 * n) + &alpha;
    elim.push(-mul(be, &Float::with_val(prec, &rra[n] + &rrb[n])));
    elim.push(-mul(&sq_over(&ra[n], &rra[n]), &(Float::with_val(prec, 1) - &rrb[n])));
    elim.push(-mul(&sq_over(&rb[n], &rrb[n]), &(Float::with_val(prec, 1) - &rra[n])));
    elim.push(-mul(&Float::with_val(prec, &two_n_alpha - &ta), &ra[n]));
    elim.push(-(mul(&two_n_alpha, &rb[n]) - at(&rb[n], &tb)));
    elim.push(-mul(&ra[n], &rb[n]) * 2u32);
    [expanded, elim]
}

/// Scaled residuals of the expanded weighted-sum identity with the `b`-sum
/// starting at `j = 0` and at `j = 1`, in that order.
pub fn weighted_sum_variants(sys: &OpSystem, n: usize) -> Result<(f64, f64)> {
    lue_ladder(sys, 0)?;
    check_n(sys, n)?;
    let c = collect(sys, n + 1)?;
    let mut rep = CompatReport::new("laguerre", n, sys.digits_requested);
    let [from0, _] = weighted_sums(sys, &c, n, 0);
    let [from1, _] = weighted_sums(sys, &c, n, 1);
    rep.add("j0", &from0);
    rep.add("j1", &from1);
    Ok((rep.residuals["j0"], rep.residuals["j1"]))
}
