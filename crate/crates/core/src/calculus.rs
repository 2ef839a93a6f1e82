//! Finite differences layered on the exact ladder quantities.
//!
//! The first partials of `H_n` are known in closed form (`2 r_{n,a}`,
//! `2 r_{n,b}` for the Gaussian weight, `r_{n,a}`, `r_{n,b}` for Laguerre), so
//! only second partials are differentiated numerically. Every difference
//! quotient rebuilds the orthogonal system at a shifted window.
//!
//! Gaussian master equation, with `Q = 2n + H_a + H_b = 4 beta_n`:
//!
//! ```text
//! 2a H_a + 2b H_b - 2H = sqrt(D_a) - sqrt(D_b)
//! D_a = (H_aa + H_ab)^2 + 4 H_a^2 Q,   D_b = (H_bb + H_ab)^2 + 4 H_b^2 Q
//! ```
//!
//! Laguerre master equation, with `l = 2(n^2 + alpha n - H + a H_a + b H_b) = 2 beta_n`,
//! `P = a H_aa + b H_ab`, `S = b H_bb + a H_ab`:
//!
//! ```text
//! k = l (H + (2n+alpha-a) H_a + (2n+alpha-b) H_b + 2 H_a H_b) + P S
//!   = l (sqrt(D_2) - sqrt(D_1)) - sqrt(D_1 D_2)
//! D_1 = P^2 + 2 l H_a^2,   D_2 = S^2 + 2 l H_b^2
//! ```
//!
//! The square-root branches follow from `R_{n,a} > 0 > R_{n,b}`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gap::h_from_p1;
use crate::ladder::{gue_ladder, lue_ladder, CompatReport};
use crate::numerics::{bits_for_digits, tolerance, PrecisionPolicy, Real};
use crate::orthopoly::{build_from_moments, OpSystem};
use crate::weights::{WeightSpec, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdOrder {
    Central2,
    Richardson4,
}

/// Central differences with step `step`; `Richardson4` combines the steps
/// `h` and `h/2` as `(4 D(h/2) - D(h)) / 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdScheme {
    pub step: f64,
    pub order: FdOrder,
}

impl FdScheme {
    pub fn new(step: f64, order: FdOrder) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
        }
        Ok(FdScheme { step, order })
    }

    /// Step `10^{-digits/5} * max(1, |a|, |b|)` over the finite endpoints.
    pub fn default_for(win: &Window, digits: u32, order: FdOrder) -> Self {
        let scale = [win.a_f64(), win.b_f64()]
            .into_iter()
            .filter(|x| x.is_finite())
            .fold(1.0f64, |m, x| m.max(x.abs()));
        FdScheme {
            step: tolerance(digits, 5.0) * scale,
            order,
        }
    }

    pub fn halved(self) -> Self {
        FdScheme {
            step: self.step / 2.0,
            order: self.order,
        }
    }

    fn power(&self) -> i32 {
        match self.order {
            FdOrder::Central2 => 2,
            FdOrder::Richardson4 => 4,
        }
    }

    /// Error budget of one difference quotient: truncation `h^p` plus the
    /// cancellation `10^{-digits} / h`, with two orders of headroom for the
    /// size of the higher derivatives.
    pub fn tolerance(&self, digits: u32) -> f64 {
        let trunc = self.step.powi(self.power());
        let cancel = tolerance(digits, 1.0) / self.step;
        100.0 * (trunc + cancel)
    }

    fn check(&self, win: &Window) -> Result<()> {
        let width = win.b_f64() - win.a_f64();
        if width.is_finite() && self.step >= width / 10.0 {
            return Err(Error::StepTooLarge(format!(
                "step {} is not below a tenth of the window width {width}",
                self.step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    A,
    B,
    /// `d_a + d_b`
    Diagonal,
    /// `a d_a + b d_b`
    Scaling,
}

/// Rebuilds systems at windows shifted away from a base window.
struct Probe<'a> {
    weight: &'a WeightSpec,
    window: Window,
    n_max: usize,
    policy: PrecisionPolicy,
}

impl<'a> Probe<'a> {
    fn new(weight: &'a WeightSpec, window: &Window, n_max: usize, policy: &PrecisionPolicy) -> Self {
        let prec = bits_for_digits(policy.digits()) + 64;
        Probe {
            weight,
            window: window.with_prec(prec),
            n_max,
            policy: *policy,
        }
    }

    fn base(&self) -> Result<OpSystem> {
        build_from_moments(self.weight, &self.window, self.n_max, &self.policy)
    }

    fn system(&self, dir: Direction, t: f64) -> Result<OpSystem> {
        let prec = self.window.a().prec();
        let t = Float::with_val(prec, t);
        let zero = Float::with_val(prec, 0);
        let (da, db) = match dir {
            Direction::A => (t, zero),
            Direction::B => (zero, t),
            Direction::Diagonal => (t.clone(), t),
            Direction::Scaling => {
                let scale = |x: &Real| if x.is_finite() { Float::with_val(prec, x * &t) } else { zero.clone() };
                (scale(self.window.a()), scale(self.window.b()))
            }
        };
        let win = self.window.shifted(&da, &db)?;
        build_from_moments(self.weight, &win, self.n_max, &self.policy)
    }

    fn central<F>(&self, dir: Direction, h: f64, f: &F) -> Result<Vec<Real>>
    where
        F: Fn(&OpSystem) -> Result<Vec<Real>> + Sync,
    {
        let (plus, minus) = rayon::join(|| f(&self.system(dir, h)?), || f(&self.system(dir, -h)?));
        let (plus, minus) = (plus?, minus?);
        Ok(plus
            .iter()
            .zip(&minus)
            .map(|(p, m)| {
                let prec = p.prec().min(m.prec());
                Float::with_val(prec, p - m) / (2.0 * h)
            })
            .collect())
    }

    /// Derivative of every component of `f` along `dir`.
    fn derivative<F>(&self, dir: Direction, scheme: &FdScheme, f: &F) -> Result<Vec<Real>>
    where
        F: Fn(&OpSystem) -> Result<Vec<Real>> + Sync,
    {
        let h = scheme.step;
        match scheme.order {
            FdOrder::Central2 => self.central(dir, h, f),
            FdOrder::Richardson4 => {
                let (coarse, fine) = rayon::join(|| self.central(dir, h, f), || self.central(dir, h / 2.0, f));
                let (coarse, fine) = (coarse?, fine?);
                coarse
                    .iter()
                    .zip(&fine)
                    .map(|(c, f)| {
                        let prec = c.prec().min(f.prec());
                        let gap = Float::with_val(prec, c - f).abs().to_f64();
                        if gap > 1e-2 * f.to_f64().abs().max(1.0) {
                            return Err(Error::StepTooLarge(format!(
                                "difference quotients at h and h/2 disagree by {gap:e} (h = {h:e})"
                            )));
                        }
                        Ok((Float::with_val(prec, f * 4u32) - c) / 3u32)
                    })
                    .collect()
            }
        }
    }
}

/// `(d_a H_n, d_b H_n)` in closed form from the ladder quantities.
pub fn exact_gradient(sys: &OpSystem, n: usize) -> Result<(Real, Real)> {
    match sys.weight {
        WeightSpec::Gaussian => {
            let l = gue_ladder(sys, n)?;
            Ok((l.r_a * 2u32, l.r_b * 2u32))
        }
        WeightSpec::Laguerre { .. } => {
            let l = lue_ladder(sys, n)?;
            Ok((l.r_a, l.r_b))
        }
    }
}

fn gradient_vec(sys: &OpSystem, n: usize) -> Result<Vec<Real>> {
    let (ha, hb) = exact_gradient(sys, n)?;
    Ok(vec![ha, hb])
}

fn validate(w: &WeightSpec, n: usize, win: &Window, scheme: &FdScheme) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    win.check_for(w)?;
    scheme.check(win)
}

/// Finite-difference gradient of `H_n` itself, for comparison with
/// [`exact_gradient`].
pub fn fd_gradient(
    w: &WeightSpec,
    n: usize,
    win: &Window,
    scheme: &FdScheme,
    policy: &PrecisionPolicy,
) -> Result<(Real, Real)> {
    validate(w, n, win, scheme)?;
    let probe = Probe::new(w, win, n, policy);
    let f = |s: &OpSystem| Ok(vec![h_from_p1(s, n)?]);
    let (da, db) = rayon::join(
        || probe.derivative(Direction::A, scheme, &f),
        || probe.derivative(Direction::B, scheme, &f),
    );
    Ok((da?.remove(0), db?.remove(0)))
}

#[derive(Debug, Clone)]
pub struct SecondPartials {
    pub haa: Real,
    pub hab: Real,
    pub hbb: Real,
    /// `|d_b H_a - d_a H_b|`; `hab` is the mean of the two.
    pub mixed_gap: f64,
}

/// `H_aa`, `H_ab`, `H_bb` as difference quotients of the exact first
/// partials.
pub fn fd_second_partials(
    w: &WeightSpec,
    n: usize,
    win: &Window,
    scheme: &FdScheme,
    policy: &PrecisionPolicy,
) -> Result<SecondPartials> {
    validate(w, n, win, scheme)?;
    let probe = Probe::new(w, win, n, policy);
    second_partials(&probe, n, scheme)
}

fn second_partials(probe: &Probe, n: usize, scheme: &FdScheme) -> Result<SecondPartials> {
    let f = |s: &OpSystem| gradient_vec(s, n);
    let (da, db) = rayon::join(
        || probe.derivative(Direction::A, scheme, &f),
        || probe.derivative(Direction::B, scheme, &f),
    );
    let (da, db) = (da?, db?);
    let prec = da[0].prec();
    let mixed_gap = Float::with_val(prec, &da[1] - &db[0]).abs().to_f64();
    let hab = Float::with_val(prec, &da[1] + &db[0]) / 2u32;
    Ok(SecondPartials {
        haa: da[0].clone(),
        hab,
        hbb: db[1].clone(),
        mixed_gap,
    })
}

/// Ingredients of the Gaussian master equation at one window.
#[derive(Debug, Clone)]
pub struct GuePdeTerms {
    pub n: usize,
    pub h: Real,
    pub ha: Real,
    pub hb: Real,
    pub haa: Real,
    pub hab: Real,
    pub hbb: Real,
    /// `2n + H_a + H_b`.
    pub quartic_term: Real,
    pub beta: Real,
    pub big_r_a: Real,
    pub big_r_b: Real,
}

/// Ingredients of the Laguerre master equation at one window.
#[derive(Debug, Clone)]
pub struct LuePdeTerms {
    pub n: usize,
    pub alpha: f64,
    pub h: Real,
    pub ha: Real,
    pub hb: Real,
    pub haa: Real,
    pub hab: Real,
    pub hbb: Real,
    pub l: Real,
    pub k: Real,
    pub delta1: Real,
    pub delta2: Real,
    pub beta: Real,
    pub big_r_a: Real,
    pub big_r_b: Real,
}

/// Residuals of a master equation at one window. `relative_*` divide the raw
/// residual by the largest term of the same equation.
#[derive(Debug, Clone, Serialize)]
pub struct PdeResidualReport {
    pub ensemble: &'static str,
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub residual_sqrt_form: f64,
    pub residual_cleared_form: f64,
    pub scale: f64,
    pub scale_cleared: f64,
    pub relative_sqrt_form: f64,
    pub relative_cleared_form: f64,
    /// Cross-checks against the exact system, each `|x - y| / max(1, |y|)`.
    pub checks: BTreeMap<String, f64>,
    pub fd_step: f64,
    pub digits: u32,
}

/// One line of a residual export.
#[derive(Debug, Clone, Serialize)]
pub struct FdRecord {
    pub identity: String,
    pub a: f64,
    pub b: f64,
    pub residual: f64,
    pub scale: f64,
    pub step: f64,
    pub digits: u32,
}

impl PdeResidualReport {
    pub fn records(&self) -> Vec<FdRecord> {
        let rec = |identity: &str, residual: f64, scale: f64| FdRecord {
            identity: identity.to_string(),
            a: self.a,
            b: self.b,
            residual,
            scale,
            step: self.fd_step,
            digits: self.digits,
        };
        let mut out = vec![
            rec("master_pde_sqrt_form", self.relative_sqrt_form, self.scale),
            rec("master_pde_cleared_form", self.relative_cleared_form, self.scale_cleared),
        ];
        out.extend(self.checks.iter().map(|(k, v)| rec(k, *v, 1.0)));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Signed sum of `terms` together with the largest magnitude among them.
fn balance(terms: &[Real]) -> (Real, Real) {
    let prec = terms.iter().map(Float::prec).max().unwrap_or(64);
    let mut sum = Float::with_val(prec, 0);
    let mut scale = Float::with_val(prec, 0);
    for t in terms {
        sum += t;
        let m = Float::with_val(prec, t.abs_ref());
        if m > scale {
            scale = m;
        }
    }
    (sum, scale)
}

fn relative(sum: &Real, scale: &Real) -> f64 {
    if scale.is_zero() {
        return sum.to_f64().abs();
    }
    Float::with_val(sum.prec(), sum / scale).abs().to_f64()
}

fn mismatch(x: &Real, y: &Real) -> f64 {
    let d = Float::with_val(x.prec(), x - y).abs();
    let s = Float::with_val(x.prec(), y.abs_ref()).max(&Float::with_val(x.prec(), 1));
    (d / s).to_f64()
}

fn checked_sqrt(x: &Real, name: &str) -> Result<Real> {
    if x.is_sign_negative() && !x.is_zero() {
        return Err(Error::InvalidPoint(format!("{name} = {:e} is negative", x.to_f64())));
    }
    Ok(Float::with_val(x.prec(), x.sqrt_ref()))
}

pub fn gue_pde_terms(
    w: &WeightSpec,
    n: usize,
    win: &Window,
    scheme: &FdScheme,
    policy: &PrecisionPolicy,
) -> Result<GuePdeTerms> {
    if !w.is_gaussian() {
        return Err(Error::EnsembleMismatch {
            expected: "gaussian",
            found: w.name(),
        });
    }
    validate(w, n, win, scheme)?;
    let probe = Probe::new(w, win, n, policy);
    let (sys, second) = rayon::join(|| probe.base(), || second_partials(&probe, n, scheme));
    let (sys, second) = (sys?, second?);
    let lad = gue_ladder(&sys, n)?;
    let prec = sys.prec();
    let ha = Float::with_val(prec, &lad.r_a * 2u32);
    let hb = Float::with_val(prec, &lad.r_b * 2u32);
    let quartic_term = Float::with_val(prec, 2 * n) + &ha + &hb;
    Ok(GuePdeTerms {
        n,
        h: h_from_p1(&sys, n)?,
        ha,
        hb,
        haa: second.haa,
        hab: second.hab,
        hbb: second.hbb,
        quartic_term,
        beta: sys.beta[n].clone(),
        big_r_a: lad.big_r_a,
        big_r_b: lad.big_r_b,
    })
}

pub fn pde_residual_gue(
    w: &WeightSpec,
    n: usize,
    win: &Window,
    scheme: &FdScheme,
    policy: &PrecisionPolicy,
) -> Result<PdeResidualReport> {
    let t = gue_pde_terms(w, n, win, scheme, policy)?;
    let prec = t.h.prec();
    let (a, b) = (Float::with_val(prec, win.a()), Float::with_val(prec, win.b()));
    let q = &t.quartic_term;
    if *q <= 0 {
        return Err(Error::InvalidPoint(format!("2n + H_a + H_b = {:e} is not positive", q.to_f64())));
    }
    let sa = Float::with_val(prec, &t.haa + &t.hab);
    let sb = Float::with_val(prec, &t.hbb + &t.hab);
    let four_q = Float::with_val(prec, q * 4u32);
    let delta_a = Float::with_val(prec, sa.square_ref()) + Float::with_val(prec, t.ha.square_ref()) * &four_q;
    let delta_b = Float::with_val(prec, sb.square_ref()) + Float::with_val(prec, t.hb.square_ref()) * &four_q;
    let root_a = checked_sqrt(&delta_a, "discriminant D_a")?;
    let root_b = checked_sqrt(&delta_b, "discriminant D_b")?;

    let lhs = [
        Float::with_val(prec, &a * &t.ha) * 2u32,
        Float::with_val(prec, &b * &t.hb) * 2u32,
        Float::with_val(prec, &t.h * 2u32) * -1i32,
    ];
    let mut terms: Vec<Real> = lhs.to_vec();
    terms.push(-root_a.clone());
    terms.push(root_b.clone());
    let (sum, scale) = balance(&terms);

    let (big_l, _) = balance(&lhs);
    let x = Float::with_val(prec, big_l.square_ref()) - &delta_a - &delta_b;
    let cleared = [
        Float::with_val(prec, x.square_ref()),
        Float::with_val(prec, &delta_a * &delta_b) * -4i32,
    ];
    let (csum, cscale) = balance(&cleared);

    let two_q = Float::with_val(prec, q * 2u32);
    let r_a = (root_a - &sa) / &two_q;
    let r_b = (-(sb + &root_b)) / &two_q;
    let mut checks = BTreeMap::new();
    checks.insert("root_R_a".to_string(), mismatch(&r_a, &t.big_r_a));
    checks.insert("root_R_b".to_string(), mismatch(&r_b, &t.big_r_b));
    checks.insert("quartic_term=4beta".to_string(), mismatch(q, &Float::with_val(prec, &t.beta * 4u32)));

    Ok(PdeResidualReport {
        ensemble: "gaussian",
        n,
        a: win.a_f64(),
        b: win.b_f64(),
        residual_sqrt_form: sum.to_f64(),
        residual_cleared_form: csum.to_f64(),
        scale: scale.to_f64(),
        scale_cleared: cscale.to_f64(),
        relative_sqrt_form: relative(&sum, &scale),
        relative_cleared_form: relative(&csum, &cscale),
        checks,
        fd_step: scheme.step,
        digits: policy.digits(),
    })
}

pub fn lue_pde_terms(
    w: &WeightSpec,
    n: usize,
    win: &Window,
    scheme: &FdScheme,
    policy: &PrecisionPolicy,
) -> Result<LuePdeTerms> {
    let WeightSpec::Laguerre { alpha } = *w else {
        return Err(Error::EnsembleMismatch {
            expected: "laguerre",
            found: w.name(),
        });
    };
    validate(w, n, win, scheme)?;
    let probe = Probe::new(w, win, n, policy);
    let (sys, second) = rayon::join(|| probe.base(), || second_partials(&probe, n, scheme));
    let (sys, second) = (sys?, second?);
    let lad = lue_ladder(&sys, n)?;
    let prec = sys.prec();
    let (a, b) = (sys.a(), sys.b());
    let h = h_from_p1(&sys, n)?;
    let (ha, hb) = (lad.r_a.clone(), lad.r_b.clone());
    let SecondPartials { haa, hab, hbb, .. } = second;

    let nf = Float::with_val(prec, n);
    let base = Float::with_val(prec, &nf * &nf) + Float::with_val(prec, &nf * alpha);
    let l = (base - &h + Float::with_val(prec, &a * &ha) + Float::with_val(prec, &b * &hb)) * 2u32;
    let p = Float::with_val(prec, &a * &haa) + Float::with_val(prec, &b * &hab);
    let s = Float::with_val(prec, &b * &hbb) + Float::with_val(prec, &a * &hab);
    let delta1 = Float::with_val(prec, p.square_ref()) + Float::with_val(prec, ha.square_ref()) * &l * 2u32;
    let delta2 = Float::with_val(prec, s.square_ref()) + Float::with_val(prec, hb.square_ref()) * &l * 2u32;
    let shift = Float::with_val(prec, &nf * 2u32) + alpha;
    let m = Float::with_val(prec, &h)
        + Float::with_val(prec, &shift - &a) * &ha
        + Float::with_val(prec, &shift - &b) * &hb
        + Float::with_val(prec, &ha * &hb) * 2u32;
    let k = Float::with_val(prec, &l * &m) + Float::with_val(prec, &p * &s);
    Ok(LuePdeTerms {
        n,
        alpha,
        h,
        ha,
        hb,
        haa,
        hab,
        hbb,
        l,
        k,
        delta1,
        delta2,
        beta: sys.beta[n].clone(),
        big_r_a: lad.big_r_a,
        big_r_b: lad.big_r_b,
    })
}

pub fn pde_residual_lue(
    w: &WeightSpec,
    n: usize,
    win: &Window,
    scheme: &FdScheme,
    policy: &PrecisionPolicy,
) -> Result<PdeResidualReport> {
    let t = lue_pde_terms(w, n, win, scheme, policy)?;
    let prec = t.h.prec();
    let (a, b) = (Float::with_val(prec, win.a()), Float::with_val(prec, win.b()));
    let l = &t.l;
    if *l <= 0 {
        return Err(Error::InvalidPoint(format!("l = {:e} is not positive", l.to_f64())));
    }
    let root1 = checked_sqrt(&t.delta1, "discriminant D_1")?;
    let root2 = checked_sqrt(&t.delta2, "discriminant D_2")?;
    let d = Float::with_val(prec, &t.delta1 * &t.delta2);
    let root_d = Float::with_val(prec, &root1 * &root2);

    // k's own pieces enter separately so the scale sees them.
    let p = Float::with_val(prec, &a * &t.haa) + Float::with_val(prec, &b * &t.hab);
    let s = Float::with_val(prec, &b * &t.hbb) + Float::with_val(prec, &a * &t.hab);
    let lm = Float::with_val(prec, &t.k - Float::with_val(prec, &p * &s));
    let terms = [
        lm,
        Float::with_val(prec, &p * &s),
        Float::with_val(prec, l * &root1),
        -Float::with_val(prec, l * &root2),
        root_d.clone(),
    ];
    let (sum, scale) = balance(&terms);

    let l2 = Float::with_val(prec, l.square_ref());
    let sum_delta = Float::with_val(prec, &t.delta1 + &t.delta2);
    let k2 = Float::with_val(prec, t.k.square_ref());
    let y = Float::with_val(prec, &k2 + &d) - Float::with_val(prec, &l2 * &sum_delta);
    let kl = Float::with_val(prec, &t.k + &l2);
    let cleared = [
        Float::with_val(prec, y.square_ref()),
        Float::with_val(prec, kl.square_ref()) * &d * -4i32,
    ];
    let (csum, cscale) = balance(&cleared);

    let two_beta = Float::with_val(prec, &t.beta * 2u32);
    let r_a = (root1 - &p) / l;
    let r_b = (-(s + &root2)) / l;
    let mut checks = BTreeMap::new();
    checks.insert("root_R_a".to_string(), mismatch(&r_a, &t.big_r_a));
    checks.insert("root_R_b".to_string(), mismatch(&r_b, &t.big_r_b));
    checks.insert("l=2beta".to_string(), mismatch(l, &two_beta));
    checks.insert("printed_cleared_form".to_string(), printed_cleared_form(&t.k, l, &t.delta1, &t.delta2));

    Ok(PdeResidualReport {
        ensemble: "laguerre",
        n,
        a: win.a_f64(),
        b: win.b_f64(),
        residual_sqrt_form: sum.to_f64(),
        residual_cleared_form: csum.to_f64(),
        scale: scale.to_f64(),
        scale_cleared: cscale.to_f64(),
        relative_sqrt_form: relative(&sum, &scale),
        relative_cleared_form: relative(&csum, &cscale),
        checks,
        fd_step: scheme.step,
        digits: policy.digits(),
    })
}

/// Relative value of the octic
/// `((A^2 - 4 l^2 D (l^2 + sqrt(D) + D_1 + D_2))^2 - 16 l^6 D^2 (D_1 + D_2))^2 - 1024 l^12 D^5`
/// with `A = k^2 - l^2 (D_1 + D_2) - D` and `D = D_1 D_2`.
pub fn printed_cleared_form(k: &Real, l: &Real, delta1: &Real, delta2: &Real) -> f64 {
    let prec = k.prec();
    let d = Float::with_val(prec, delta1 * delta2);
    let sum = Float::with_val(prec, delta1 + delta2);
    let l2 = Float::with_val(prec, l.square_ref());
    let a = Float::with_val(prec, k.square_ref()) - Float::with_val(prec, &l2 * &sum) - &d;
    let inner = Float::with_val(prec, &l2 + Float::with_val(prec, d.sqrt_ref())) + &sum;
    let b = Float::with_val(prec, a.square_ref()) - Float::with_val(prec, &l2 * &d) * &inner * 4u32;
    let l6 = Float::with_val(prec, &l2 * &l2) * &l2;
    let d2 = Float::with_val(prec, d.square_ref());
    let c = Float::with_val(prec, b.square_ref()) - Float::with_val(prec, &l6 * &d2) * &sum * 16u32;
    let l12 = Float::with_val(prec, l6.square_ref());
    let d5 = Float::with_val(prec, &d2 * &d2) * &d;
    let terms = [Float::with_val(prec, c.square_ref()), Float::with_val(prec, &l12 * &d5) * -1024i32];
    let (sum, scale) = balance(&terms);
    relative(&sum, &scale)
}

/// Residuals of the two-variable Toda equations at `n`, tolerance from the
/// scheme:
///
/// Gaussian: `(d_a + d_b) beta_n = 2 beta_n (alpha_{n-1} - alpha_n)`,
/// `(d_a + d_b) alpha_n = 2 (beta_n - beta_{n+1}) + 1`. The constant is
/// `+1`: `alpha_n = p1(n) - p1(n+1)` and `(d_a + d_b) p1(n) = 2 beta_n - n`.
///
/// Laguerre: `(a d_a + b d_b) beta_n = beta_n (alpha_{n-1} - alpha_n + 2)`,
/// `(a d_a + b d_b - 1) alpha_n = beta_n - beta_{n+1}`.
pub fn toda_check(
    w: &WeightSpec,
    n: usize,
    win: &Window,
    scheme: &FdScheme,
    policy: &PrecisionPolicy,
) -> Result<CompatReport> {
    validate(w, n, win, scheme)?;
    let probe = Probe::new(w, win, n + 1, policy);
    let dir = if w.is_gaussian() { Direction::Diagonal } else { Direction::Scaling };
    let f = |s: &OpSystem| Ok(vec![s.beta[n].clone(), s.alpha[n].clone()]);
    let (sys, d) = rayon::join(|| probe.base(), || probe.derivative(dir, scheme, &f));
    let (sys, d) = (sys?, d?);
    let prec = sys.prec();
    let beta = &sys.beta;
    let alpha = &sys.alpha;
    let gap = Float::with_val(prec, &alpha[n - 1] - &alpha[n]);
    let mut report = CompatReport::with_tolerance(w.name(), n, scheme.tolerance(policy.digits()));
    if w.is_gaussian() {
        report.add("toda_beta", &[d[0].clone(), -(Float::with_val(prec, &beta[n] * &gap) * 2u32)]);
        report.add(
            "toda_alpha",
            &[
                d[1].clone(),
                Float::with_val(prec, &beta[n] * -2i32),
                Float::with_val(prec, &beta[n + 1] * 2u32),
                Float::with_val(prec, -1),
            ],
        );
    } else {
        report.add("toda_beta", &[d[0].clone(), -(Float::with_val(prec, &beta[n] * (gap + 2u32)))]);
        report.add(
            "toda_alpha",
            &[d[1].clone(), -alpha[n].clone(), -beta[n].clone(), beta[n + 1].clone()],
        );
    }
    Ok(report)
}

/// Which endpoint moves in a one-sided reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreeEndpoint {
    A,
    B,
}

/// Far endpoint standing in for the edge of the support: `-20` or `20` for
/// the Gaussian weight, `0` or `40 + 10n` for Laguerre.
pub fn one_sided_window(w: &WeightSpec, n: usize, z: &Real, free: FreeEndpoint) -> Result<Window> {
    let prec = z.prec();
    let far = |x: f64| Float::with_val(prec, x);
    match (w, free) {
        (WeightSpec::Gaussian, FreeEndpoint::B) => Window::new(far(-20.0), z.clone()),
        (WeightSpec::Gaussian, FreeEndpoint::A) => Window::new(z.clone(), far(20.0)),
        (WeightSpec::Laguerre { .. }, FreeEndpoint::B) => Window::new(far(0.0), z.clone()),
        (WeightSpec::Laguerre { .. }, FreeEndpoint::A) => Window::new(z.clone(), far(40.0 + 10.0 * n as f64)),
    }
}

/// `H_n` and its first two derivatives along the free endpoint of a
/// one-sided window, ready for the sigma-form residuals with `z` the free
/// endpoint.
#[derive(Debug, Clone)]
pub struct SigmaData {
    pub z: Real,
    pub sigma: Real,
    pub d1: Real,
    pub d2: Real,
    /// `|H|` of the frozen-endpoint partial, the size of what the reduction
    /// drops.
    pub frozen_partial: f64,
}

pub fn one_sided_sigma(
    w: &WeightSpec,
    n: usize,
    z: &Real,
    free: FreeEndpoint,
    scheme: &FdScheme,
    policy: &PrecisionPolicy,
) -> Result<SigmaData> {
    let win = one_sided_window(w, n, z, free)?;
    validate(w, n, &win, scheme)?;
    let probe = Probe::new(w, &win, n, policy);
    let dir = match free {
        FreeEndpoint::A => Direction::A,
        FreeEndpoint::B => Direction::B,
    };
    let pick = move |(ha, hb): (Real, Real)| match free {
        FreeEndpoint::A => (ha, hb),
        FreeEndpoint::B => (hb, ha),
    };
    let f = |s: &OpSystem| Ok(vec![pick(exact_gradient(s, n)?).0]);
    let (sys, d) = rayon::join(|| probe.base(), || probe.derivative(dir, scheme, &f));
    let (sys, mut d) = (sys?, d?);
    let (d1, frozen) = pick(exact_gradient(&sys, n)?);
    Ok(SigmaData {
        z: Float::with_val(sys.prec(), z),
        sigma: h_from_p1(&sys, n)?,
        d1,
        d2: d.remove(0),
        frozen_partial: frozen.abs().to_f64(),
    })
}

/// Residuals of many windows in parallel.
pub fn pde_residuals(
    w: &WeightSpec,
    n: usize,
    windows: &[Window],
    order: FdOrder,
    policy: &PrecisionPolicy,
) -> Vec<Result<PdeResidualReport>> {
    windows
        .par_iter()
        .map(|win| {
            let scheme = FdScheme::default_for(win, policy.digits(), order);
            if w.is_gaussian() {
                pde_residual_gue(w, n, win, &scheme, policy)
            } else {
                pde_residual_lue(w, n, win, &scheme, policy)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy(d: u32) -> PrecisionPolicy {
        PrecisionPolicy::new(d).unwrap()
    }

    fn win(a: f64, b: f64, d: u32) -> Window {
        Window::from_f64(a, b, bits_for_digits(d) + 64).unwrap()
    }

    fn lue(alpha: f64) -> WeightSpec {
        WeightSpec::laguerre(alpha).unwrap()
    }

    #[test]
    fn default_step_scales_with_endpoints() {
        let s = FdScheme::default_for(&win(-1.0, 2.0, 80), 80, FdOrder::Central2);
        assert!((s.step / 2e-16 - 1.0).abs() < 1e-12);
        let s = FdScheme::default_for(&win(-0.5, 0.5, 50), 50, FdOrder::Central2);
        assert!((s.step / 1e-10 - 1.0).abs() < 1e-12);
        assert!(FdScheme::new(0.0, FdOrder::Central2).is_err());
    }

    #[test]
    fn step_must_be_small_against_window() {
        let w = WeightSpec::Gaussian;
        let s = FdScheme::new(0.2, FdOrder::Central2).unwrap();
        let r = fd_second_partials(&w, 2, &win(-0.5, 0.5, 40), &s, &policy(40));
        assert!(matches!(r, Err(Error::StepTooLarge(_))));
    }

    #[test]
    fn fd_gradient_matches_exact_partials() {
        let d = 60;
        for (w, a, b) in [(WeightSpec::Gaussian, -1.0, 1.5), (lue(1.0), 0.4, 5.0)] {
            let wn = win(a, b, d);
            let scheme = FdScheme::default_for(&wn, d, FdOrder::Richardson4);
            let (fa, fb) = fd_gradient(&w, 3, &wn, &scheme, &policy(d)).unwrap();
            let sys = build_from_moments(&w, &wn, 3, &policy(d)).unwrap();
            let (ea, eb) = exact_gradient(&sys, 3).unwrap();
            assert!(mismatch(&fa, &ea) < tolerance(d, 2.5), "{}", mismatch(&fa, &ea));
            assert!(mismatch(&fb, &eb) < tolerance(d, 2.5), "{}", mismatch(&fb, &eb));
        }
    }

    #[test]
    fn log_norm_gradient_is_minus_big_r() {
        let d = 50;
        let w = WeightSpec::Gaussian;
        let wn = win(-0.7, 1.9, d);
        let scheme = FdScheme::default_for(&wn, d, FdOrder::Richardson4);
        let probe = Probe::new(&w, &wn, 3, &policy(d));
        let f = |s: &OpSystem| Ok(vec![Float::with_val(s.prec(), s.h[2].ln_ref())]);
        let da = probe.derivative(Direction::A, &scheme, &f).unwrap();
        let db = probe.derivative(Direction::B, &scheme, &f).unwrap();
        let lad = gue_ladder(&probe.base().unwrap(), 2).unwrap();
        assert!(mismatch(&da[0], &(-lad.big_r_a)) < tolerance(d, 3.0));
        assert!(mismatch(&db[0], &(-lad.big_r_b)) < tolerance(d, 3.0));
    }

    #[test]
    fn gue_parity_at_symmetric_point() {
        // H(-b, -a) = -H(a, b), so on a symmetric window H_a = H_b and H_aa = -H_bb.
        let d = 50;
        let w = WeightSpec::Gaussian;
        let wn = win(-1.2, 1.2, d);
        let scheme = FdScheme::default_for(&wn, d, FdOrder::Richardson4);
        let t = gue_pde_terms(&w, 3, &wn, &scheme, &policy(d)).unwrap();
        assert!(t.h.to_f64().abs() < 1e-40);
        assert!(mismatch(&t.ha, &t.hb) < 1e-40);
        let sum = Float::with_val(t.haa.prec(), &t.haa + &t.hbb).abs().to_f64();
        assert!(sum < 1e-15, "{sum:e}");
        let r = pde_residual_gue(&w, 3, &wn, &scheme, &policy(d)).unwrap();
        assert!(r.relative_sqrt_form < 1e-10, "{r:?}");
    }

    #[test]
    fn central_error_quarters_when_step_halves() {
        let d = 60;
        let w = WeightSpec::Gaussian;
        let wn = win(-1.0, 2.0, d);
        let exact = fd_second_partials(&w, 3, &wn, &FdScheme::new(1e-8, FdOrder::Richardson4).unwrap(), &policy(d))
            .unwrap();
        let err = |h: f64| {
            let s = fd_second_partials(&w, 3, &wn, &FdScheme::new(h, FdOrder::Central2).unwrap(), &policy(d)).unwrap();
            mismatch(&s.haa, &exact.haa)
        };
        let ratio = err(2e-3) / err(1e-3);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn richardson_and_central_agree() {
        // At h = 1e-6 the central quotient carries its h^2 truncation
        // (about 2e-14 here); at the default step 2e-16 it is below 1e-18.
        let d = 80;
        let w = WeightSpec::Gaussian;
        let wn = win(-1.0, 2.0, d);
        let p = policy(d);
        let gap = |h: f64| {
            let c = fd_second_partials(&w, 3, &wn, &FdScheme::new(h, FdOrder::Central2).unwrap(), &p).unwrap();
            let r = fd_second_partials(&w, 3, &wn, &FdScheme::new(h, FdOrder::Richardson4).unwrap(), &p).unwrap();
            assert!(r.mixed_gap < 1e-18);
            [(&c.haa, &r.haa), (&c.hab, &r.hab), (&c.hbb, &r.hbb)]
                .iter()
                .map(|(x, y)| mismatch(x, y))
                .fold(0.0, f64::max)
        };
        let (g1, g2) = (gap(1e-6), gap(5e-7));
        assert!(g1 < 1e-12 && (g1 / g2 - 4.0).abs() < 0.05, "{g1:e} {g2:e}");
        let default = FdScheme::default_for(&wn, d, FdOrder::Central2).step;
        assert!(gap(default) < 1e-18);
    }

    #[test]
    fn gue_master_equation() {
        let d = 80;
        let w = WeightSpec::Gaussian;
        let wn = win(-1.0, 2.0, d);
        let scheme = FdScheme::default_for(&wn, d, FdOrder::Richardson4);
        let r = pde_residual_gue(&w, 3, &wn, &scheme, &policy(d)).unwrap();
        assert!(r.relative_sqrt_form < 1e-10, "{r:?}");
        assert!(r.relative_cleared_form < 1e-10, "{r:?}");
        assert!(r.checks["root_R_a"] < tolerance(d, 3.0), "{r:?}");
        assert!(r.checks["root_R_b"] < tolerance(d, 3.0), "{r:?}");
        assert!(r.checks["quartic_term=4beta"] < tolerance(d, 3.0), "{r:?}");
        assert!(r.to_json().contains("\"relative_sqrt_form\""));
        assert_eq!(r.records().len(), 2 + r.checks.len());
    }

    #[test]
    fn lue_master_equation() {
        let d = 100;
        let w = lue(1.0);
        let wn = win(0.5, 6.0, d);
        let scheme = FdScheme::default_for(&wn, d, FdOrder::Richardson4);
        let r = pde_residual_lue(&w, 3, &wn, &scheme, &policy(d)).unwrap();
        assert!(r.relative_sqrt_form < 1e-8, "{r:?}");
        assert!(r.relative_cleared_form < 1e-8, "{r:?}");
        assert!(r.checks["root_R_a"] < tolerance(d, 3.0), "{r:?}");
        assert!(r.checks["root_R_b"] < tolerance(d, 3.0), "{r:?}");
        assert!(r.checks["l=2beta"] < tolerance(d, 3.0), "{r:?}");
    }

    #[test]
    fn toda_gaussian_and_laguerre() {
        let d = 60;
        for (w, a, b) in [(WeightSpec::Gaussian, -1.0, 1.5), (lue(1.0), 0.4, 5.0), (lue(1.0), 0.0, 5.0)] {
            let wn = win(a, b, d);
            let scheme = FdScheme::default_for(&wn, d, FdOrder::Richardson4);
            let r = toda_check(&w, 2, &wn, &scheme, &policy(d)).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn toda_alpha_constant_is_plus_one() {
        let d = 50;
        let w = WeightSpec::Gaussian;
        let wn = win(-1.0, 1.5, d);
        let scheme = FdScheme::default_for(&wn, d, FdOrder::Richardson4);
        let probe = Probe::new(&w, &wn, 3, &policy(d));
        let f = |s: &OpSystem| Ok(vec![s.alpha[2].clone()]);
        let da = probe.derivative(Direction::Diagonal, &scheme, &f).unwrap();
        let sys = probe.base().unwrap();
        let rest = Float::with_val(sys.prec(), &sys.beta[2] - &sys.beta[3]) * 2u32;
        let constant = Float::with_val(sys.prec(), &da[0] - &rest).to_f64();
        assert!((constant - 1.0).abs() < 1e-15, "{constant}");
    }

    #[test]
    fn toda_symmetric_gaussian_window() {
        let d = 50;
        let w = WeightSpec::Gaussian;
        let wn = win(-1.3, 1.3, d);
        let scheme = FdScheme::default_for(&wn, d, FdOrder::Richardson4);
        let probe = Probe::new(&w, &wn, 3, &policy(d));
        let f = |s: &OpSystem| Ok(vec![s.beta[2].clone()]);
        let db = probe.derivative(Direction::Diagonal, &scheme, &f).unwrap();
        assert!(db[0].to_f64().abs() < 1e-30);
        let sys = probe.base().unwrap();
        assert!(sys.alpha[1].to_f64().abs() < 1e-40 && sys.alpha[2].to_f64().abs() < 1e-40);
        assert!(toda_check(&w, 2, &wn, &scheme, &policy(d)).unwrap().pass);
    }

    #[test]
    fn one_sided_gaussian_satisfies_sigma_piv() {
        let d = 60;
        let n = 3;
        let z = Float::with_val(bits_for_digits(d), 1.1);
        let w = WeightSpec::Gaussian;
        let scheme = FdScheme::default_for(&one_sided_window(&w, n, &z, FreeEndpoint::B).unwrap(), d, FdOrder::Richardson4);
        let s = one_sided_sigma(&w, n, &z, FreeEndpoint::B, &scheme, &policy(d)).unwrap();
        assert!(s.frozen_partial < 1e-100);
        // (s'')^2 = 4 (z s' - s)^2 - 4 (s' + 2n) s'^2
        let prec = s.sigma.prec();
        let zs = Float::with_val(prec, &s.z * &s.d1) - &s.sigma;
        let lhs = Float::with_val(prec, s.d2.square_ref());
        let rhs = Float::with_val(prec, zs.square_ref()) * 4u32
            - Float::with_val(prec, &s.d1 + 2 * n as u32) * Float::with_val(prec, s.d1.square_ref()) * 4u32;
        assert!(mismatch(&lhs, &rhs) < 1e-8);
    }
}
