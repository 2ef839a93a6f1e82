//! Painlevé sigma forms, the Tracy–Widom law and the soft-edge limits.
//!
//! With `q` the Hastings–McLeod solution of `q'' = s q + 2 q^3`,
//! `q ~ Ai(s)` as `s -> +inf`, the Tracy–Widom distribution is
//! `F2(s) = exp(-int_s^inf (x - s) q(x)^2 dx)` and `R = (ln F2)'` solves
//!
//! ```text
//! R''^2 + 4 R' (R'^2 - s R' + R) = 0,   R' = -q^2.
//! ```
//!
//! The edge profiles are rescalings of `R`. Gaussian, `k = sqrt(2) c`:
//! `f(x) = -k R(-k x)`, `g(y) = k R(-k y)`. Laguerre with `alpha = beta n`,
//! `kappa = c (1 + beta)^{1/6}`:
//! `f(x) = -(1+beta)^{1/6} L^{1/3} R(-kappa x)`,
//! `g(y) = (1+beta)^{1/6} R^{1/3} R(kappa y)` where
//! `L, R = 2 + beta -/+ 2 sqrt(1 + beta)` are the edge locations over `n`.
//!
//! `F2` is computed twice: by a Nyström discretization of the Airy-kernel
//! Fredholm determinant in double precision, and by Taylor-series
//! integration of the Painlevé II system in extended precision.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::calculus::{one_sided_window, FreeEndpoint};
use crate::error::{Error, Result};
use crate::gap::{h_from_p1, log_gap_probability};
use crate::numerics::{bits_for_digits, required_digits, PrecisionPolicy, Real};
use crate::orthopoly::build_from_moments;
use crate::quad;
use crate::weights::{WeightSpec, Window};

// ---------------------------------------------------------------------------
// Sigma-form residuals

/// A second-order, second-degree ODE in sigma form with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaKind {
    /// `s''^2 = 4 (z s' - s)^2 - 4 (s' + nu0)(s' + nu1)(s' + nu2)`
    Piv { nu: [f64; 3] },
    /// `(z s'')^2 = (s - z s' + 2 s'^2 + (sum nu) s')^2 - 4 prod (s' + nu_i)`
    Pv { nu: [f64; 4] },
    /// `f''^2 / 4 = 2 sqrt(2) c^3 (f f' - x f'^2) - f'^3`
    PiiGueF { c: f64 },
    /// `g''^2 / 4 = 2 sqrt(2) c^3 (g g' - y g'^2) + g'^3`
    PiiGueG { c: f64 },
    /// `f''^2 = 4 c^3 sqrt(1+beta) (f f' - x f'^2) - 4 c L^{-1/3} f'^3`
    PiiLueF { c: f64, beta: f64 },
    /// `g''^2 = -4 c^3 sqrt(1+beta) (g g' - y g'^2) - 4 c R^{-1/3} g'^3`
    PiiLueG { c: f64, beta: f64 },
}

impl SigmaKind {
    /// The Gaussian one-sided reduction, `nu = (2n, 0, 0)`.
    pub fn gue_reduction(n: usize) -> Self {
        SigmaKind::Piv {
            nu: [2.0 * n as f64, 0.0, 0.0],
        }
    }

    /// The Laguerre one-sided reduction, `nu = (n, n + alpha, 0, 0)`.
    pub fn lue_reduction(n: usize, alpha: f64) -> Self {
        SigmaKind::Pv {
            nu: [n as f64, n as f64 + alpha, 0.0, 0.0],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SigmaKind::Piv { .. } => "piv",
            SigmaKind::Pv { .. } => "pv",
            SigmaKind::PiiGueF { .. } => "pii-gue-f",
            SigmaKind::PiiGueG { .. } => "pii-gue-g",
            SigmaKind::PiiLueF { .. } => "pii-lue-f",
            SigmaKind::PiiLueG { .. } => "pii-lue-g",
        }
    }
}

/// Kind names accepted on the command line, without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaName {
    Piv,
    Pv,
    PiiGueF,
    PiiGueG,
    PiiLueF,
    PiiLueG,
}

impl FromStr for SigmaName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "piv" => SigmaName::Piv,
            "pv" => SigmaName::Pv,
            "pii-gue-f" => SigmaName::PiiGueF,
            "pii-gue-g" => SigmaName::PiiGueG,
            "pii-lue-f" => SigmaName::PiiLueF,
            "pii-lue-g" => SigmaName::PiiLueG,
            other => return Err(Error::InvalidParameter(format!("unknown sigma-form kind {other:?}"))),
        })
    }
}

impl fmt::Display for SigmaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn lue_edges(beta: f64) -> (f64, f64) {
    let root = 2.0 * (1.0 + beta).sqrt();
    (2.0 + beta - root, 2.0 + beta + root)
}

/// Signed terms whose sum is left-hand side minus right-hand side.
fn sigma_terms(kind: &SigmaKind, z: &Real, s: &Real, s1: &Real, s2: &Real) -> Vec<Real> {
    let prec = s.prec().max(z.prec());
    let f = |x: f64| Float::with_val(prec, x);
    let mul = |a: &Real, b: &Real| Float::with_val(prec, a * b);
    let sq = |a: &Real| Float::with_val(prec, a.square_ref());
    let cube = |a: &Real| Float::with_val(prec, a.square_ref()) * a;
    match *kind {
        SigmaKind::Piv { nu } => {
            let zs = mul(z, s1) - s;
            let mut prod = f(4.0);
            for v in nu {
                prod *= Float::with_val(prec, s1 + v);
            }
            vec![sq(s2), -(sq(&zs) * 4u32), prod]
        }
        SigmaKind::Pv { nu } => {
            let total: f64 = nu.iter().sum();
            let inner = Float::with_val(prec, s - mul(z, s1)) + sq(s1) * 2u32 + mul(s1, &f(total));
            let mut prod = f(4.0);
            for v in nu {
                prod *= Float::with_val(prec, s1 + v);
            }
            vec![sq(&mul(z, s2)), -sq(&inner), prod]
        }
        SigmaKind::PiiGueF { c } | SigmaKind::PiiGueG { c } => {
            let k3 = f(2.0 * 2f64.sqrt() * c.powi(3));
            let sign = if matches!(kind, SigmaKind::PiiGueF { .. }) { 1 } else { -1 };
            vec![
                sq(s2) / 4u32,
                -mul(&k3, &mul(s, s1)),
                mul(&k3, &mul(z, &sq(s1))),
                cube(s1) * sign,
            ]
        }
        SigmaKind::PiiLueF { c, beta } => {
            let (l, _) = lue_edges(beta);
            let k3 = f(4.0 * c.powi(3) * (1.0 + beta).sqrt());
            vec![
                sq(s2),
                -mul(&k3, &mul(s, s1)),
                mul(&k3, &mul(z, &sq(s1))),
                cube(s1) * f(4.0 * c / l.cbrt()),
            ]
        }
        SigmaKind::PiiLueG { c, beta } => {
            let (_, r) = lue_edges(beta);
            let k3 = f(4.0 * c.powi(3) * (1.0 + beta).sqrt());
            vec![
                sq(s2),
                mul(&k3, &mul(s, s1)),
                -mul(&k3, &mul(z, &sq(s1))),
                cube(s1) * f(4.0 * c / r.cbrt()),
            ]
        }
    }
}

fn sum_and_scale(terms: &[Real]) -> (Real, Real) {
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

fn ratio(sum: &Real, scale: &Real) -> f64 {
    if scale.is_zero() {
        sum.to_f64().abs()
    } else {
        Float::with_val(sum.prec(), sum / scale).abs().to_f64()
    }
}

/// Left-hand side minus right-hand side of the sigma form at `z`.
pub fn sigma_ode_residual(kind: &SigmaKind, z: &Real, s: &Real, s1: &Real, s2: &Real) -> Real {
    sum_and_scale(&sigma_terms(kind, z, s, s1, s2)).0
}

/// [`sigma_ode_residual`] divided by the largest term of the equation.
pub fn sigma_ode_relative(kind: &SigmaKind, z: &Real, s: &Real, s1: &Real, s2: &Real) -> f64 {
    let (sum, scale) = sum_and_scale(&sigma_terms(kind, z, s, s1, s2));
    ratio(&sum, &scale)
}

/// Partial derivatives of a function of `(x, y)` at one point.
#[derive(Debug, Clone)]
pub struct Jet2 {
    pub h: Real,
    pub hx: Real,
    pub hy: Real,
    pub hxx: Real,
    pub hxy: Real,
    pub hyy: Real,
}

impl Jet2 {
    /// The jet of `f(x) + g(y)` from the jets of `f` and `g`.
    pub fn separable(f: &[Real; 3], g: &[Real; 3]) -> Self {
        let prec = f[0].prec();
        Jet2 {
            h: Float::with_val(prec, &f[0] + &g[0]),
            hx: f[1].clone(),
            hy: g[1].clone(),
            hxx: f[2].clone(),
            hxy: Float::with_val(prec, 0),
            hyy: g[2].clone(),
        }
    }
}

/// Relative residual of the Gaussian edge-limit equation
///
/// ```text
/// -8 sqrt2 c^3 H Hy Hx + 8 sqrt2 c^3 y Hy^2 Hx - 4 Hy^3 Hx + Hx (Hyy - Hxy)^2
///   + Hy (8 sqrt2 c^3 x Hx^2 + 4 Hx^3 + (Hxy - Hxx)^2) = 0.
/// ```
pub fn limiting_pde_gue(c: f64, x: &Real, y: &Real, j: &Jet2) -> f64 {
    let prec = j.h.prec();
    let k = Float::with_val(prec, 8.0 * 2f64.sqrt() * c.powi(3));
    let m = |a: &Real, b: &Real| Float::with_val(prec, a * b);
    let hx2 = m(&j.hx, &j.hx);
    let hy2 = m(&j.hy, &j.hy);
    let d1 = Float::with_val(prec, &j.hyy - &j.hxy);
    let d2 = Float::with_val(prec, &j.hxy - &j.hxx);
    let terms = [
        -m(&k, &m(&j.h, &m(&j.hy, &j.hx))),
        m(&k, &m(y, &m(&hy2, &j.hx))),
        -(m(&hy2, &m(&j.hy, &j.hx)) * 4u32),
        m(&j.hx, &m(&d1, &d1)),
        m(&j.hy, &m(&k, &m(x, &hx2))),
        m(&j.hy, &m(&hx2, &j.hx)) * 4u32,
        m(&j.hy, &m(&d2, &d2)),
    ];
    let (sum, scale) = sum_and_scale(&terms);
    ratio(&sum, &scale)
}

/// Relative residual of the Laguerre edge-limit equation
///
/// ```text
/// 4 c^3 sqrt(1+beta) beta^{4/3} Hx Hy (H - x Hx - y Hy)
///   + Hx (L^{4/3} Hxy^2 + beta^{4/3} Hyy^2 + 2 beta^{2/3} L^{2/3} Hxy Hyy + 4 c beta^{2/3} L^{1/3} Hy^3)
///   - Hy (R^{4/3} Hxy^2 + beta^{4/3} Hxx^2 + 2 beta^{2/3} R^{2/3} Hxy Hxx + 4 c beta^{2/3} R^{1/3} Hx^3) = 0.
/// ```
pub fn limiting_pde_lue(c: f64, beta: f64, x: &Real, y: &Real, j: &Jet2) -> f64 {
    let prec = j.h.prec();
    let (l, r) = lue_edges(beta);
    let f = |v: f64| Float::with_val(prec, v);
    let m = |a: &Real, b: &Real| Float::with_val(prec, a * b);
    let b13 = beta.cbrt();
    let (b23, b43) = (b13 * b13, b13.powi(4));
    let inner = Float::with_val(prec, &j.h - m(x, &j.hx)) - m(y, &j.hy);
    let hxhy = m(&j.hx, &j.hy);
    let hxy2 = m(&j.hxy, &j.hxy);
    let terms = [
        m(&f(4.0 * c.powi(3) * (1.0 + beta).sqrt() * b43), &m(&hxhy, &inner)),
        m(&j.hx, &m(&f(l.cbrt().powi(4)), &hxy2)),
        m(&j.hx, &m(&f(b43), &m(&j.hyy, &j.hyy))),
        m(&j.hx, &m(&f(2.0 * b23 * l.cbrt().powi(2)), &m(&j.hxy, &j.hyy))),
        m(&j.hx, &m(&f(4.0 * c * b23 * l.cbrt()), &m(&j.hy, &m(&j.hy, &j.hy)))),
        -m(&j.hy, &m(&f(r.cbrt().powi(4)), &hxy2)),
        -m(&j.hy, &m(&f(b43), &m(&j.hxx, &j.hxx))),
        -m(&j.hy, &m(&f(2.0 * b23 * r.cbrt().powi(2)), &m(&j.hxy, &j.hxx))),
        -m(&j.hy, &m(&f(4.0 * c * b23 * r.cbrt()), &m(&j.hx, &m(&j.hx, &j.hx)))),
    ];
    let (sum, scale) = sum_and_scale(&terms);
    ratio(&sum, &scale)
}

// ---------------------------------------------------------------------------
// Airy functions

/// `(Ai(x), Ai'(x))` to `digits` significant digits, from the Maclaurin
/// series. The series cancels like `e^{(4/3)|x|^{3/2}}` for positive `x`, so
/// the working precision grows with `|x|`.
pub fn airy(x: &Real, digits: u32) -> (Real, Real) {
    let ax = x.to_f64().abs();
    let growth = if x.is_sign_negative() { 0.29 } else { 0.58 };
    let guard = (growth * ax.powf(1.5)).ceil() as u32 + 10;
    let prec = bits_for_digits(digits + guard);
    let x = Float::with_val(prec, x);
    let x3 = Float::with_val(prec, x.square_ref()) * &x;
    let eps = Float::with_val(prec, 1) >> (prec as i32);

    // f = sum t_k, g = sum u_k, f' = sum w_k, g' = sum v_k
    let mut t = Float::with_val(prec, 1);
    let mut u = x.clone();
    let mut w = Float::with_val(prec, x.square_ref()) / 2u32;
    let mut v = Float::with_val(prec, 1);
    let (mut f, mut g, mut fp, mut gp) = (t.clone(), u.clone(), w.clone(), v.clone());
    let mut k: u32 = 1;
    loop {
        t = t * &x3 / ((3 * k) * (3 * k - 1));
        u = u * &x3 / ((3 * k) * (3 * k + 1));
        v = v * &x3 / ((3 * k) * (3 * k - 2));
        if k >= 2 {
            w = w * &x3 / ((3 * k - 3) * (3 * k - 1));
            fp += &w;
        }
        f += &t;
        g += &u;
        gp += &v;
        k += 1;
        let small = [&t, &u, &v, &w].iter().all(|z| Float::with_val(prec, z.abs_ref()) < eps);
        if small && f64::from(3 * k) > ax + 3.0 {
            break;
        }
    }
    let third = Float::with_val(prec, 1) / 3u32;
    let two_thirds = Float::with_val(prec, 2) / 3u32;
    let cbrt3 = Float::with_val(prec, 3).cbrt();
    let c1 = Float::with_val(prec, 1) / (Float::with_val(prec, cbrt3.square_ref()) * two_thirds.gamma());
    let c2 = Float::with_val(prec, 1) / (cbrt3 * third.gamma());
    let out = bits_for_digits(digits);
    let ai = Float::with_val(out, Float::with_val(prec, &c1 * &f) - Float::with_val(prec, &c2 * &g));
    let aip = Float::with_val(out, Float::with_val(prec, &c1 * &fp) - Float::with_val(prec, &c2 * &gp));
    (ai, aip)
}

fn airy_f64(x: f64) -> (f64, f64) {
    let (a, d) = airy(&Float::with_val(64, x), 20);
    (a.to_f64(), d.to_f64())
}

// ---------------------------------------------------------------------------
// Tracy–Widom: Fredholm determinant

/// `det(I - K_Ai)` on `L^2(s, inf)` by `nodes`-point Gauss–Legendre Nyström
/// on `(s, max(s + 8, 14))`, where the kernel has decayed below `e^{-70}`.
pub fn tw_fredholm(s: f64, nodes: usize) -> f64 {
    let hi = (s + 8.0).max(14.0);
    let rule = quad::gauss_legendre(nodes, 64);
    let half = (hi - s) / 2.0;
    let mid = (hi + s) / 2.0;
    let xs: Vec<f64> = rule.nodes.iter().map(|t| mid + half * t.to_f64()).collect();
    let ws: Vec<f64> = rule.weights.iter().map(|w| (half * w.to_f64()).sqrt()).collect();
    let ai: Vec<(f64, f64)> = xs.iter().map(|&x| airy_f64(x)).collect();
    let m = DMatrix::from_fn(nodes, nodes, |i, j| {
        let (ai_i, dai_i) = ai[i];
        let (ai_j, dai_j) = ai[j];
        let k = if i == j {
            dai_i * dai_i - xs[i] * ai_i * ai_i
        } else {
            (ai_i * dai_j - dai_i * ai_j) / (xs[i] - xs[j])
        };
        let id = if i == j { 1.0 } else { 0.0 };
        id - ws[i] * k * ws[j]
    });
    m.lu().determinant()
}

/// Tabulated `F2` on an even grid.
#[derive(Debug, Clone, Serialize)]
pub struct TwDistribution {
    pub s_grid: Vec<f64>,
    pub f2: Vec<f64>,
}

/// Nyström nodes used by [`solve_tw`]; the check run doubles them.
pub const TW_NODES: usize = 80;

/// `F2` on `points` evenly spaced values in `[s_min, s_max]` by the Fredholm
/// route; every value must agree with a run at doubled nodes to `1e-12`.
pub fn solve_tw(s_min: f64, s_max: f64, points: usize) -> Result<TwDistribution> {
    if !(s_min < s_max) || points < 2 {
        return Err(Error::InvalidParameter(format!(
            "need s_min < s_max and at least 2 points, got [{s_min}, {s_max}] x {points}"
        )));
    }
    let s_grid: Vec<f64> = (0..points)
        .map(|i| s_min + (s_max - s_min) * i as f64 / (points - 1) as f64)
        .collect();
    let f2 = s_grid
        .par_iter()
        .map(|&s| {
            let (a, b) = rayon::join(|| tw_fredholm(s, TW_NODES), || tw_fredholm(s, 2 * TW_NODES));
            if (a - b).abs() > 1e-12 {
                return Err(Error::NonConvergence(format!(
                    "Fredholm determinant at s = {s} moved by {:e} when doubling nodes",
                    (a - b).abs()
                )));
            }
            Ok(b)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(TwDistribution { s_grid, f2 })
}

// ---------------------------------------------------------------------------
// Tracy–Widom: Hastings–McLeod by Taylor series

/// Values of the Hastings–McLeod system at one point.
#[derive(Debug, Clone)]
pub struct HmPoint {
    pub q: Real,
    pub dq: Real,
    /// `R = (ln F2)'`
    pub r: Real,
    pub dr: Real,
    pub d2r: Real,
    pub ln_f2: Real,
}

#[derive(Debug, Clone)]
struct Patch {
    center: Real,
    q: Vec<Real>,
    r: Vec<Real>,
    lam: Vec<Real>,
}

fn horner(c: &[Real], t: &Real, deriv: usize) -> Real {
    let prec = t.prec();
    let mut acc = Float::with_val(prec, 0);
    for (i, ci) in c.iter().enumerate().skip(deriv).rev() {
        let mut factor = 1u64;
        for j in 0..deriv {
            factor *= (i - j) as u64;
        }
        acc = acc * t + Float::with_val(prec, ci * factor);
    }
    acc
}

/// Hastings–McLeod solution tabulated as Taylor patches on `[s_lo, s0]`,
/// integrated towards `-inf` from Airy data at `s0 >= 16`. Replacing `q` by
/// `Ai` at `s0` costs a relative error near `Ai(s0)^2`. The backward
/// direction amplifies errors like `Bi/Ai` for `s > 0` and like
/// `exp((2 sqrt2 / 3) |s|^{3/2})` for `s < 0`; `s0` and the working
/// precision are chosen to absorb both. Beyond `s0` the Airy
/// asymptotics are used directly.
#[derive(Debug, Clone)]
pub struct HastingsMcLeod {
    digits: u32,
    start: f64,
    step: f64,
    patches: Vec<Patch>,
}

impl HastingsMcLeod {
    pub fn new(s_lo: f64, digits: u32) -> Result<Self> {
        let (_, work) = Self::plan(s_lo, digits);
        Self::with_step(s_lo, digits, 0.0625, work as usize)
    }

    /// Start point and working digits.
    fn plan(s_lo: f64, digits: u32) -> (f64, u32) {
        // log10 of the growth on (s_lo, 0) and of Bi/Ai on (0, s0)
        let left = digits + (0.41 * s_lo.abs().powf(1.5)).ceil() as u32 + 10;
        let start = (f64::from(left) / 0.58).powf(2.0 / 3.0).ceil().max(16.0);
        (start, left + (0.58 * start.powf(1.5)).ceil() as u32)
    }

    /// Explicit step and series order; used to check convergence.
    pub fn with_step(s_lo: f64, digits: u32, step: f64, order: usize) -> Result<Self> {
        if !(s_lo < 16.0) || !(s_lo > -40.0) {
            return Err(Error::InvalidParameter(format!("s_lo must lie in (-40, 16), got {s_lo}")));
        }
        let (start, work) = Self::plan(s_lo, digits);
        let prec = bits_for_digits(work);
        let s0 = Float::with_val(prec, start);
        let begin = edge_values(&s0, work);
        let mut state = [begin.q, begin.dq, begin.r, begin.ln_f2];
        let count = ((start - s_lo) / step).ceil() as usize + 1;
        let h = Float::with_val(prec, -step);
        let mut patches = Vec::with_capacity(count);
        for i in 0..count {
            let center = Float::with_val(prec, start - step * i as f64);
            let patch = taylor_patch(&center, &state, order);
            state = [
                horner(&patch.q, &h, 0),
                horner(&patch.q, &h, 1),
                horner(&patch.r, &h, 0),
                horner(&patch.lam, &h, 0),
            ];
            patches.push(patch);
        }
        Ok(HastingsMcLeod {
            digits,
            start,
            step,
            patches,
        })
    }

    pub fn s_lo(&self) -> f64 {
        self.start - self.step * self.patches.len() as f64
    }

    pub fn eval(&self, s: f64) -> Result<HmPoint> {
        if s >= self.start {
            let prec = bits_for_digits(self.digits + 10);
            return Ok(edge_values(&Float::with_val(prec, s), self.digits + 10));
        }
        if s < self.s_lo() {
            return Err(Error::InvalidParameter(format!(
                "s = {s} is below the tabulated range {}",
                self.s_lo()
            )));
        }
        let i = (((self.start - s) / self.step).floor() as usize).min(self.patches.len() - 1);
        let p = &self.patches[i];
        let prec = p.center.prec();
        let t = Float::with_val(prec, s) - &p.center;
        let q = horner(&p.q, &t, 0);
        let dq = horner(&p.q, &t, 1);
        let d2r = Float::with_val(prec, &q * &dq) * -2i32;
        Ok(HmPoint {
            dr: -Float::with_val(prec, q.square_ref()),
            r: horner(&p.r, &t, 0),
            ln_f2: horner(&p.lam, &t, 0),
            q,
            dq,
            d2r,
        })
    }

    pub fn f2(&self, s: f64) -> Result<f64> {
        Ok(self.eval(s)?.ln_f2.exp().to_f64())
    }
}

/// Hastings–McLeod data where `q = Ai` to working precision:
/// `R = Ai'^2 - s Ai^2 - Ai^4`, `ln F2 = -(2 s^2 Ai^2 - 2 s Ai'^2 - Ai Ai') / 3`.
fn edge_values(s: &Real, digits: u32) -> HmPoint {
    let prec = s.prec();
    let (ai, dai) = airy(s, digits);
    let (ai, dai) = (Float::with_val(prec, ai), Float::with_val(prec, dai));
    let ai2 = Float::with_val(prec, ai.square_ref());
    let dai2 = Float::with_val(prec, dai.square_ref());
    let r = Float::with_val(prec, &dai2 - Float::with_val(prec, s * &ai2)) - Float::with_val(prec, ai2.square_ref());
    let s2 = Float::with_val(prec, s.square_ref());
    let e = Float::with_val(prec, &s2 * &ai2) * 2u32
        - Float::with_val(prec, s * &dai2) * 2u32
        - Float::with_val(prec, &ai * &dai);
    HmPoint {
        dr: -ai2.clone(),
        d2r: Float::with_val(prec, &ai * &dai) * -2i32,
        q: ai,
        dq: dai,
        r,
        ln_f2: -e / 3u32,
    }
}

/// Taylor coefficients at `center` of `q'' = s q + 2 q^3`, `R' = -q^2`,
/// `Lambda' = R`.
fn taylor_patch(center: &Real, state: &[Real; 4], order: usize) -> Patch {
    let prec = center.prec();
    let zero = || Float::with_val(prec, 0);
    let mut q = vec![zero(); order + 2];
    let mut sq = vec![zero(); order + 1];
    let mut cube = vec![zero(); order + 1];
    q[0] = state[0].clone();
    q[1] = state[1].clone();
    for k in 0..order {
        sq[k] = (0..=k).fold(zero(), |acc, i| acc + Float::with_val(prec, &q[i] * &q[k - i]));
        cube[k] = (0..=k).fold(zero(), |acc, i| acc + Float::with_val(prec, &sq[i] * &q[k - i]));
        let mut next = Float::with_val(prec, center * &q[k]) + Float::with_val(prec, &cube[k] * 2u32);
        if k >= 1 {
            next += &q[k - 1];
        }
        q[k + 2] = next / ((k as u64 + 1) * (k as u64 + 2));
    }
    q.truncate(order + 1);
    let mut r = vec![state[2].clone()];
    let mut lam = vec![state[3].clone()];
    for k in 0..order {
        r.push(-Float::with_val(prec, &sq[k] / (k as u64 + 1)));
        lam.push(Float::with_val(prec, &r[k] / (k as u64 + 1)));
    }
    Patch {
        center: center.clone(),
        q,
        r,
        lam,
    }
}

// ---------------------------------------------------------------------------
// Edge scaling

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    Gue,
    Lue,
}

/// Soft-edge scaling.
///
/// Gaussian: `a = -sqrt(2n) + c x n^{-1/6}`, `b = sqrt(2n) - c y n^{-1/6}`,
/// `Htilde = c n^{-1/6} H_n`.
/// Laguerre with `alpha = beta n`: `a = L n + c L^{2/3} n^{1/3} x`,
/// `b = R n + c R^{2/3} n^{1/3} y`, `Htilde = n^{-2/3} H_n`. A left endpoint
/// that lands below 0 is replaced by 0, which leaves `Prob` and `H_n`
/// unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub ensemble: Ensemble,
    pub n: usize,
    pub c: f64,
    /// Laguerre only; `alpha = beta n`.
    pub beta: f64,
}

impl ScalingSpec {
    pub fn gue(n: usize, c: f64) -> Result<Self> {
        Self::checked(Ensemble::Gue, n, c, 0.0)
    }

    pub fn lue(n: usize, beta: f64, c: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        Self::checked(Ensemble::Lue, n, c, beta)
    }

    /// `c = 2^{-1/2}`, the standard Tracy–Widom normalization.
    pub fn gue_default(n: usize) -> Self {
        ScalingSpec {
            ensemble: Ensemble::Gue,
            n,
            c: std::f64::consts::FRAC_1_SQRT_2,
            beta: 0.0,
        }
    }

    /// `c = (1 + beta)^{-1/6}`, which makes the Tracy–Widom argument `y`.
    pub fn lue_default(n: usize, beta: f64) -> Result<Self> {
        Self::lue(n, beta, (1.0 + beta).powf(-1.0 / 6.0))
    }

    fn checked(ensemble: Ensemble, n: usize, c: f64, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
        }
        Ok(ScalingSpec { ensemble, n, c, beta })
    }

    pub fn with_n(self, n: usize) -> Self {
        ScalingSpec { n, ..self }
    }

    /// `L = 2 + beta - 2 sqrt(1 + beta)`.
    pub fn left_edge(&self) -> f64 {
        lue_edges(self.beta).0
    }

    /// `R = 2 + beta + 2 sqrt(1 + beta)`.
    pub fn right_edge(&self) -> f64 {
        lue_edges(self.beta).1
    }

    pub fn weight(&self) -> WeightSpec {
        match self.ensemble {
            Ensemble::Gue => WeightSpec::Gaussian,
            Ensemble::Lue => WeightSpec::Laguerre {
                alpha: self.beta * self.n as f64,
            },
        }
    }

    /// Scale between the edge variable and the Tracy–Widom argument.
    pub fn tw_rate(&self) -> f64 {
        match self.ensemble {
            Ensemble::Gue => 2f64.sqrt() * self.c,
            Ensemble::Lue => self.c * (1.0 + self.beta).powf(1.0 / 6.0),
        }
    }

    /// Tracy–Widom arguments of the left and right one-sided laws:
    /// `Prob(lambda_min > a(x)) -> F2(s_left)`, `Prob(lambda_max < b(y)) -> F2(s_right)`.
    pub fn tw_arguments(&self, x: f64, y: f64) -> (f64, f64) {
        let k = self.tw_rate();
        match self.ensemble {
            Ensemble::Gue => (-k * x, -k * y),
            Ensemble::Lue => (-k * x, k * y),
        }
    }

    pub fn left_endpoint(&self, x: &Real) -> Real {
        let prec = x.prec();
        let n = Float::with_val(prec, self.n);
        match self.ensemble {
            Ensemble::Gue => {
                let edge = Float::with_val(prec, &n * 2u32).sqrt();
                let scale = Float::with_val(prec, self.c) / Float::with_val(prec, n.pow(Float::with_val(prec, 1) / 6u32));
                Float::with_val(prec, x * &scale) - edge
            }
            Ensemble::Lue => {
                let l = Float::with_val(prec, self.left_edge());
                let a = self.lue_endpoint(&l, x);
                if a.is_sign_negative() {
                    Float::with_val(prec, 0)
                } else {
                    a
                }
            }
        }
    }

    pub fn right_endpoint(&self, y: &Real) -> Real {
        let prec = y.prec();
        let n = Float::with_val(prec, self.n);
        match self.ensemble {
            Ensemble::Gue => {
                let edge = Float::with_val(prec, &n * 2u32).sqrt();
                let scale = Float::with_val(prec, self.c) / Float::with_val(prec, n.pow(Float::with_val(prec, 1) / 6u32));
                edge - Float::with_val(prec, y * &scale)
            }
            Ensemble::Lue => self.lue_endpoint(&Float::with_val(prec, self.right_edge()), y),
        }
    }

    /// `e n + c e^{2/3} n^{1/3} t`.
    fn lue_endpoint(&self, e: &Real, t: &Real) -> Real {
        let prec = t.prec();
        let n = Float::with_val(prec, self.n);
        let third = Float::with_val(prec, 1) / 3u32;
        let e23 = Float::with_val(prec, e.square_ref()).pow(&third);
        let n13 = Float::with_val(prec, (&n).pow(&third));
        Float::with_val(prec, e * &n) + e23 * n13 * self.c * t
    }

    pub fn window(&self, x: &Real, y: &Real) -> Result<Window> {
        Window::new(self.left_endpoint(x), self.right_endpoint(y))
    }

    /// Window for `Prob(lambda_min > a(x))` with the far end at the
    /// one-sided cutoff.
    pub fn left_window(&self, x: &Real) -> Result<Window> {
        one_sided_window(&self.weight(), self.n, &self.left_endpoint(x), FreeEndpoint::A)
    }

    pub fn right_window(&self, y: &Real) -> Result<Window> {
        one_sided_window(&self.weight(), self.n, &self.right_endpoint(y), FreeEndpoint::B)
    }

    /// `Htilde` from `H_n`.
    pub fn scale_h(&self, h: &Real) -> Real {
        let prec = h.prec();
        let n = Float::with_val(prec, self.n);
        match self.ensemble {
            Ensemble::Gue => {
                let n16 = n.pow(Float::with_val(prec, 1) / 6u32);
                Float::with_val(prec, h * self.c) / n16
            }
            Ensemble::Lue => {
                let n23 = n.pow(Float::with_val(prec, 2) / 3u32);
                Float::with_val(prec, h / &n23)
            }
        }
    }

    /// Sigma forms satisfied by `f` and `g`.
    pub fn sigma_kinds(&self) -> (SigmaKind, SigmaKind) {
        match self.ensemble {
            Ensemble::Gue => (SigmaKind::PiiGueF { c: self.c }, SigmaKind::PiiGueG { c: self.c }),
            Ensemble::Lue => (
                SigmaKind::PiiLueF { c: self.c, beta: self.beta },
                SigmaKind::PiiLueG { c: self.c, beta: self.beta },
            ),
        }
    }

    /// `(f, f', f'')` at `x`.
    pub fn f_profile(&self, hm: &HastingsMcLeod, x: f64) -> Result<[Real; 3]> {
        let k = self.tw_rate();
        let amp = match self.ensemble {
            Ensemble::Gue => k,
            Ensemble::Lue => (1.0 + self.beta).powf(1.0 / 6.0) * self.left_edge().cbrt(),
        };
        // f(x) = -amp R(-k x)
        let p = hm.eval(-k * x)?;
        Ok([p.r * (-amp), p.dr * (amp * k), p.d2r * (-amp * k * k)])
    }

    /// `(g, g', g'')` at `y`.
    pub fn g_profile(&self, hm: &HastingsMcLeod, y: f64) -> Result<[Real; 3]> {
        let k = self.tw_rate();
        match self.ensemble {
            Ensemble::Gue => {
                // g(y) = k R(-k y)
                let p = hm.eval(-k * y)?;
                Ok([p.r * k, p.dr * (-k * k), p.d2r * (k * k * k)])
            }
            Ensemble::Lue => {
                // g(y) = amp R(k y)
                let amp = (1.0 + self.beta).powf(1.0 / 6.0) * self.right_edge().cbrt();
                let p = hm.eval(k * y)?;
                Ok([p.r * amp, p.dr * (amp * k), p.d2r * (amp * k * k)])
            }
        }
    }

    /// Relative residual of the limiting PDE for a jet at `(x, y)`.
    pub fn limiting_pde(&self, x: &Real, y: &Real, jet: &Jet2) -> f64 {
        match self.ensemble {
            Ensemble::Gue => limiting_pde_gue(self.c, x, y, jet),
            Ensemble::Lue => limiting_pde_lue(self.c, self.beta, x, y, jet),
        }
    }
}

/// Largest `|x|` or `|y|` accepted by [`solve_edge_profiles`].
pub const PROFILE_RANGE: f64 = 8.0;

/// Digits carried by the Hastings–McLeod tables behind the profiles.
pub const PROFILE_DIGITS: u32 = 40;

/// The edge profiles on grids, with the residuals of their sigma forms and
/// of the limiting PDE evaluated on `Htilde = f + g`.
#[derive(Debug, Clone, Serialize)]
pub struct LimitProfile {
    pub spec: ScalingSpec,
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub htilde: Vec<Vec<f64>>,
    pub f_residual: f64,
    pub g_residual: f64,
    pub pde_residual: f64,
}

/// Tolerance on the profile residuals.
pub const PROFILE_TOL: f64 = 1e-8;

pub fn hm_for(spec: &ScalingSpec, range: f64) -> Result<HastingsMcLeod> {
    HastingsMcLeod::new(-spec.tw_rate() * range - 1.0, PROFILE_DIGITS)
}

pub fn solve_edge_profiles(spec: &ScalingSpec, x_grid: &[f64], y_grid: &[f64]) -> Result<LimitProfile> {
    let range = x_grid.iter().chain(y_grid).fold(0.0f64, |m, v| m.max(v.abs()));
    if range > PROFILE_RANGE || x_grid.is_empty() || y_grid.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "profile grids must be non-empty with |x|, |y| <= {PROFILE_RANGE}"
        )));
    }
    let hm = hm_for(spec, range)?;
    let prec = bits_for_digits(PROFILE_DIGITS);
    let (kf, kg) = spec.sigma_kinds();
    let fs = x_grid.iter().map(|&x| spec.f_profile(&hm, x)).collect::<Result<Vec<_>>>()?;
    let gs = y_grid.iter().map(|&y| spec.g_profile(&hm, y)).collect::<Result<Vec<_>>>()?;

    let worst = |kind: &SigmaKind, grid: &[f64], jets: &[[Real; 3]], name: &str| -> Result<f64> {
        let mut max = (0.0f64, 0.0f64);
        for (&z, j) in grid.iter().zip(jets) {
            let r = sigma_ode_relative(kind, &Float::with_val(prec, z), &j[0], &j[1], &j[2]);
            if !(r <= max.0) {
                max = (r, z);
            }
        }
        if !(max.0 < PROFILE_TOL) {
            return Err(Error::NonConvergence(format!(
                "{name} profile residual {:e} at {}",
                max.0, max.1
            )));
        }
        Ok(max.0)
    };
    let f_residual = worst(&kf, x_grid, &fs, "f")?;
    let g_residual = worst(&kg, y_grid, &gs, "g")?;

    let mut pde_residual = 0.0f64;
    let mut htilde = Vec::with_capacity(x_grid.len());
    for (&x, fj) in x_grid.iter().zip(&fs) {
        let mut row = Vec::with_capacity(y_grid.len());
        for (&y, gj) in y_grid.iter().zip(&gs) {
            let jet = Jet2::separable(fj, gj);
            let r = spec.limiting_pde(&Float::with_val(prec, x), &Float::with_val(prec, y), &jet);
            pde_residual = pde_residual.max(r);
            row.push(jet.h.to_f64());
        }
        htilde.push(row);
    }
    Ok(LimitProfile {
        spec: *spec,
        x_grid: x_grid.to_vec(),
        y_grid: y_grid.to_vec(),
        f: fs.iter().map(|j| j[0].to_f64()).collect(),
        g: gs.iter().map(|j| j[0].to_f64()).collect(),
        htilde,
        f_residual,
        g_residual,
        pde_residual,
    })
}

// ---------------------------------------------------------------------------
// Asymptotic independence

/// Finite-`n` factorization data on one grid.
#[derive(Debug, Clone, Serialize)]
pub struct IndependenceRow {
    pub n: usize,
    pub digits: u32,
    /// `max |Prob(a, b) - Prob(a, far) Prob(far, b)|`.
    pub e_product: f64,
    /// `max |Prob(a, b) - F2(s_left) F2(s_right)|`.
    pub e_tracy_widom: f64,
    /// `max |Htilde(x, y, n) - f(x) - g(y)|`.
    pub htilde_deviation: f64,
    /// Whether `Prob(a, b) <= min(Prob(a, far), Prob(far, b))` at every node.
    pub containment: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndependenceReport {
    pub ensemble: Ensemble,
    pub c: f64,
    pub beta: f64,
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub rows: Vec<IndependenceRow>,
}

fn strictly_decreasing(v: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = v.collect();
    v.windows(2).all(|w| w[1] < w[0])
}

impl IndependenceReport {
    pub fn e_product_decreasing(&self) -> bool {
        strictly_decreasing(self.rows.iter().map(|r| r.e_product))
    }

    pub fn htilde_decreasing(&self) -> bool {
        strictly_decreasing(self.rows.iter().map(|r| r.htilde_deviation))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// For each `n`, compares the joint gap probability on the scaled grid with
/// the product of the one-sided probabilities at the same `n`, with the
/// limiting Tracy–Widom product, and `Htilde` with `f + g`. Working digits
/// are `required_digits(n)`.
pub fn independence_check(
    template: &ScalingSpec,
    n_list: &[usize],
    x_grid: &[f64],
    y_grid: &[f64],
) -> Result<IndependenceReport> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("n_list must be non-empty and increasing".into()));
    }
    let range = x_grid.iter().chain(y_grid).fold(0.0f64, |m, v| m.max(v.abs()));
    let hm = hm_for(template, range.max(1.0))?;
    let profile = solve_edge_profiles(template, x_grid, y_grid)?;
    let rows = n_list
        .par_iter()
        .map(|&n| independence_row(&template.with_n(n), &hm, &profile, x_grid, y_grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(IndependenceReport {
        ensemble: template.ensemble,
        c: template.c,
        beta: template.beta,
        x_grid: x_grid.to_vec(),
        y_grid: y_grid.to_vec(),
        rows,
    })
}

fn independence_row(
    spec: &ScalingSpec,
    hm: &HastingsMcLeod,
    profile: &LimitProfile,
    x_grid: &[f64],
    y_grid: &[f64],
) -> Result<IndependenceRow> {
    let n = spec.n;
    let w = spec.weight();
    let digits = required_digits(n, &w);
    let policy = PrecisionPolicy::new(digits)?;
    let prec = policy.bits() + 32;
    let real = |v: f64| Float::with_val(prec, v);
    let prob = |win: &Window| -> Result<(f64, Real)> {
        let sys = build_from_moments(&w, win, n, &policy)?;
        Ok((log_gap_probability(&sys, n)?.exp().to_f64(), h_from_p1(&sys, n)?))
    };
    let left = x_grid
        .par_iter()
        .map(|&x| Ok(prob(&spec.left_window(&real(x))?)?.0))
        .collect::<Result<Vec<f64>>>()?;
    let right = y_grid
        .par_iter()
        .map(|&y| Ok(prob(&spec.right_window(&real(y))?)?.0))
        .collect::<Result<Vec<f64>>>()?;
    let nodes: Vec<(usize, usize)> = (0..x_grid.len())
        .flat_map(|i| (0..y_grid.len()).map(move |j| (i, j)))
        .collect();
    let joint = nodes
        .par_iter()
        .map(|&(i, j)| {
            let (p, h) = prob(&spec.window(&real(x_grid[i]), &real(y_grid[j]))?)?;
            Ok((p, spec.scale_h(&h).to_f64()))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;

    let mut row = IndependenceRow {
        n,
        digits,
        e_product: 0.0,
        e_tracy_widom: 0.0,
        htilde_deviation: 0.0,
        containment: true,
    };
    for (&(i, j), &(p, ht)) in nodes.iter().zip(&joint) {
        let (sl, sr) = spec.tw_arguments(x_grid[i], y_grid[j]);
        let tw = hm.f2(sl)? * hm.f2(sr)?;
        row.e_product = row.e_product.max((p - left[i] * right[j]).abs());
        row.e_tracy_widom = row.e_tracy_widom.max((p - tw).abs());
        row.htilde_deviation = row.htilde_deviation.max((ht - profile.htilde[i][j]).abs());
        row.containment &= p <= left[i].min(right[j]) * (1.0 + 1e-12);
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(x: f64) -> Real {
        Float::with_val(bits_for_digits(50), x)
    }

    #[test]
    fn airy_matches_mpfr() {
        for x in [-9.5, -3.0, -0.4, 0.0, 0.7, 2.5, 8.0, 16.0] {
            let (ai, _) = airy(&real(x), 40);
            let reference = Float::with_val(bits_for_digits(60), x).ai();
            let rel = Float::with_val(ai.prec(), &ai - &reference).abs() / Float::with_val(ai.prec(), reference.abs_ref());
            assert!(rel.to_f64() < 1e-38, "x = {x}: {}", rel.to_f64());
        }
    }

    #[test]
    fn airy_derivative_matches_difference_quotient() {
        let prec = bits_for_digits(80);
        for x in [-4.0, -1.0, 0.5, 3.0, 10.0] {
            let (_, d) = airy(&real(x), 30);
            let h = Float::with_val(prec, 1e-20);
            let up = Float::with_val(prec, Float::with_val(prec, x) + &h).ai();
            let down = Float::with_val(prec, Float::with_val(prec, x) - &h).ai();
            let fd = (up - down) / (h * 2u32);
            let rel = (Float::with_val(prec, &fd - &d) / &fd).abs().to_f64();
            assert!(rel < 1e-28, "x = {x}: {rel}");
        }
    }

    #[test]
    fn zero_solves_piv() {
        let z = real(0.3);
        let zero = real(0.0);
        let r = sigma_ode_residual(&SigmaKind::Piv { nu: [6.0, 0.0, 0.0] }, &z, &zero, &zero, &zero);
        assert!(r.is_zero());
    }

    #[test]
    fn constants_solve_pii_forms() {
        let z = real(1.7);
        let zero = real(0.0);
        let f = real(2.5);
        for kind in [
            SigmaKind::PiiGueF { c: 0.7 },
            SigmaKind::PiiGueG { c: 0.7 },
            SigmaKind::PiiLueF { c: 0.9, beta: 1.0 },
            SigmaKind::PiiLueG { c: 0.9, beta: 1.0 },
        ] {
            assert!(sigma_ode_residual(&kind, &z, &f, &zero, &zero).is_zero(), "{kind}");
        }
    }

    fn one_sided_relative(w: &WeightSpec, n: usize, z: f64, free: FreeEndpoint, kind: SigmaKind) -> f64 {
        use crate::calculus::{one_sided_sigma, FdOrder, FdScheme};
        let d = 60;
        let z = Float::with_val(bits_for_digits(d), z);
        let win = one_sided_window(w, n, &z, free).unwrap();
        let scheme = FdScheme::default_for(&win, d, FdOrder::Richardson4);
        let s = one_sided_sigma(w, n, &z, free, &scheme, &PrecisionPolicy::new(d).unwrap()).unwrap();
        sigma_ode_relative(&kind, &s.z, &s.sigma, &s.d1, &s.d2)
    }

    #[test]
    fn one_sided_limits_solve_piv_and_pv() {
        for free in [FreeEndpoint::A, FreeEndpoint::B] {
            let z = if free == FreeEndpoint::A { -0.8 } else { 1.3 };
            let r = one_sided_relative(&WeightSpec::Gaussian, 3, z, free, SigmaKind::gue_reduction(3));
            assert!(r < 1e-8, "gaussian {free:?}: {r:e}");
        }
        let w = WeightSpec::laguerre(2.0).unwrap();
        for free in [FreeEndpoint::A, FreeEndpoint::B] {
            let r = one_sided_relative(&w, 3, 4.5, free, SigmaKind::lue_reduction(3, 2.0));
            assert!(r < 1e-8, "laguerre {free:?}: {r:e}");
        }
    }

    #[test]
    fn kind_names_parse() {
        assert_eq!("pii-gue-f".parse::<SigmaName>().unwrap(), SigmaName::PiiGueF);
        assert_eq!("PII_LUE_G".parse::<SigmaName>().unwrap(), SigmaName::PiiLueG);
        assert!("pvi".parse::<SigmaName>().is_err());
    }

    #[test]
    fn lue_edges_multiply_to_beta_squared() {
        for beta in [0.5, 1.0, 3.0] {
            let (l, r) = lue_edges(beta);
            assert!((l * r - beta * beta).abs() < 1e-12);
        }
    }

    #[test]
    fn fredholm_tail_and_doubling() {
        assert!(tw_fredholm(8.0, TW_NODES) > 1.0 - 1e-12);
        let a = tw_fredholm(0.0, TW_NODES);
        let b = tw_fredholm(0.0, 2 * TW_NODES);
        assert!((a - b).abs() < 1e-10, "{a} {b}");
        assert!((b - 0.969_372_828_355).abs() < 1e-11, "{b}");
    }

    #[test]
    fn tw_table_is_a_cdf() {
        let t = solve_tw(-6.0, 4.0, 21).unwrap();
        assert!(t.f2.windows(2).all(|w| w[0] < w[1]));
        assert!(t.f2.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn ode_and_fredholm_agree() {
        let hm = HastingsMcLeod::new(-8.0, 30).unwrap();
        for i in 0..=20 {
            let s = -6.0 + 0.5 * i as f64;
            let ode = hm.f2(s).unwrap();
            let fred = tw_fredholm(s, 2 * TW_NODES);
            assert!((ode - fred).abs() < 1e-8, "s = {s}: {ode} vs {fred}");
        }
    }

    #[test]
    fn hastings_mcleod_step_halving() {
        let a = HastingsMcLeod::new(-10.0, 30).unwrap();
        let b = HastingsMcLeod::with_step(-10.0, 30, 0.03125, 60).unwrap();
        for s in [-9.9, -5.0, 0.0, 3.3, 12.0] {
            let (pa, pb) = (a.eval(s).unwrap(), b.eval(s).unwrap());
            let d = Float::with_val(pa.r.prec(), &pa.r - &pb.r).abs().to_f64();
            assert!(d < 1e-28, "s = {s}: {d:e}");
        }
    }

    #[test]
    fn hastings_mcleod_left_asymptotics() {
        // q(s) ~ sqrt(-s/2) as s -> -inf
        // q(s) = sqrt(-s/2) (1 + 1/(8 s^3) + O(s^-6))
        let hm = HastingsMcLeod::new(-20.0, 30).unwrap();
        for s in [-15.0f64, -20.0] {
            let q = hm.eval(s).unwrap().q.to_f64();
            let expect = (-s / 2.0).sqrt() * (1.0 + 1.0 / (8.0 * s.powi(3)));
            assert!((q / expect - 1.0).abs() < 1e-6, "s = {s}: {q}");
        }
    }

    #[test]
    fn profiles_satisfy_sigma_forms_and_limit_pde() {
        let grid: Vec<f64> = (0..=16).map(|i| -8.0 + i as f64).collect();
        for spec in [
            ScalingSpec::gue_default(10),
            ScalingSpec::gue(10, 1.0).unwrap(),
            ScalingSpec::lue_default(10, 1.0).unwrap(),
            ScalingSpec::lue(10, 3.0, 1.0).unwrap(),
        ] {
            let p = solve_edge_profiles(&spec, &grid, &grid).unwrap();
            assert!(p.f_residual < PROFILE_TOL && p.g_residual < PROFILE_TOL, "{spec:?}");
            assert!(p.pde_residual < PROFILE_TOL, "{spec:?}: {}", p.pde_residual);
            assert!(p.f[0].abs() < 1e-6, "{spec:?}: f(-8) = {}", p.f[0]);
        }
    }

    #[test]
    fn gue_g_vanishes_on_the_left() {
        let p = solve_edge_profiles(&ScalingSpec::gue_default(10), &[0.0], &[-8.0, 8.0]).unwrap();
        assert!(p.g[0].abs() < 1e-6);
        assert!(p.g[1] > 10.0);
    }

    #[test]
    fn printed_edge_constants_break_the_lue_limit() {
        // With L, R = 2 + beta -/+ 2 sqrt(2 + beta) the cross terms no longer cancel.
        let beta: f64 = 1.0;
        let root = 2.0 * (2.0 + beta).sqrt();
        let (l, r) = (2.0 + beta - root, 2.0 + beta + root);
        assert!((l * r - beta * beta).abs() > 1.0);
    }

    #[test]
    fn scaling_maps_edges() {
        let s = ScalingSpec::gue_default(8);
        let w = s.window(&real(0.0), &real(0.0)).unwrap();
        assert!((w.b_f64() - 4.0).abs() < 1e-12 && (w.a_f64() + 4.0).abs() < 1e-12);
        let l = ScalingSpec::lue_default(8, 1.0).unwrap();
        let w = l.window(&real(0.0), &real(0.0)).unwrap();
        assert!((w.a_f64() - 8.0 * l.left_edge()).abs() < 1e-12);
        assert!((w.b_f64() - 8.0 * l.right_edge()).abs() < 1e-12);
        let low = l.window(&real(-7.0), &real(0.0)).unwrap();
        assert!(low.a_f64() == 0.0);
    }

    #[test]
    fn containment_and_small_independence_run() {
        let grid = [-1.0, 0.0, 1.0];
        let r = independence_check(&ScalingSpec::gue_default(2), &[2, 3], &grid, &grid).unwrap();
        assert!(r.rows.iter().all(|row| row.containment));
        assert!(r.to_json().contains("e_product"));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]

        #[test]
        fn fredholm_is_a_cdf(s in -7.0f64..5.0, ds in 0.05f64..1.0) {
            let (lo, hi) = (tw_fredholm(s, TW_NODES), tw_fredholm(s + ds, TW_NODES));
            proptest::prop_assert!(lo > 0.0 && lo < hi && hi <= 1.0);
        }

        #[test]
        fn lue_edges_bracket_the_mean(beta in 0.1f64..5.0) {
            let (l, r) = lue_edges(beta);
            proptest::prop_assert!(l > 0.0 && l < 1.0 + beta && 1.0 + beta < r);
            proptest::prop_assert!((l * r - beta * beta).abs() < 1e-9 * (1.0 + beta * beta));
        }
    }
}

