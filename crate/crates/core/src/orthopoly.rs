//! Monic orthogonal polynomials on a window, built two independent ways.
//!
//! [`build_from_moments`] factors the Hankel moment matrix; it is exact but
//! ill-conditioned, so it escalates precision on demand.
//! [`build_by_quadrature`] runs the discretized Stieltjes procedure, which is
//! stable but only as good as its quadrature. Agreement between the two is
//! the main error detector.

use rug::Float;

use crate::error::{Error, Result};
use crate::numerics::{bits_for_digits, log10_abs, required_digits, PrecisionPolicy, Real, MAX_ESCALATIONS};
use crate::quad;
use crate::weights::{moment_vector, weight_at, WeightSpec, Window};

/// Norms, recurrence coefficients and endpoint values of the monic system
/// `P_0 .. P_{n_max+1}` orthogonal on `window`.
///
/// `z P_k = P_{k+1} + alpha_k P_k + beta_k P_{k-1}`, `P_k = z^k + p1(k) z^{k-1} + ...`.
#[derive(Debug, Clone)]
pub struct OpSystem {
    pub weight: WeightSpec,
    pub window: Window,
    pub n_max: usize,
    /// `h_0 .. h_{n_max+1}`.
    pub h: Vec<Real>,
    /// `alpha_0 .. alpha_{n_max}`.
    pub alpha: Vec<Real>,
    /// `beta_0 .. beta_{n_max+1}` with the unused `beta_0 = 0`.
    pub beta: Vec<Real>,
    /// `p1(0) .. p1(n_max+1)`, `p1(0) = 0`.
    pub p1: Vec<Real>,
    /// `P_k(a)` for `k = 0 .. n_max+1`; `None` when `a` is infinite.
    pub pa: Option<Vec<Real>>,
    /// `P_k(b)`; `None` when `b` is infinite.
    pub pb: Option<Vec<Real>>,
    /// Decimal digits carried by the stored values.
    pub digits_used: u32,
    /// Digits the caller asked for; tolerances are derived from this.
    pub digits_requested: u32,
}

impl OpSystem {
    pub fn prec(&self) -> u32 {
        self.h[0].prec()
    }

    /// Working-precision copy of endpoint `a`.
    pub fn a(&self) -> Real {
        Float::with_val(self.prec(), self.window.a())
    }

    pub fn b(&self) -> Real {
        Float::with_val(self.prec(), self.window.b())
    }

    /// `ln D_n = sum_{j<n} ln h_j`.
    pub fn log_det(&self, n: usize) -> Real {
        let mut acc = Float::with_val(self.prec(), 0);
        for h in &self.h[..n] {
            acc += Float::with_val(self.prec(), h.ln_ref());
        }
        acc
    }

    /// Largest relative deviation of `h`, `alpha`, `beta` and `p1` from
    /// `other`. Quantities that may vanish (`alpha`, `p1`) are compared on
    /// the scale `max(1, |value|)`.
    pub fn max_deviation(&self, other: &OpSystem) -> f64 {
        let n = self.n_max.min(other.n_max);
        let rel = |x: &Real, y: &Real, floor: bool| -> f64 {
            let d = Float::with_val(x.prec(), x - y).abs().to_f64();
            let mut s = y.to_f64().abs();
            if floor {
                s = s.max(1.0);
            }
            if s == 0.0 {
                d
            } else {
                d / s
            }
        };
        let mut worst = 0.0f64;
        for k in 0..=n {
            worst = worst.max(rel(&self.h[k], &other.h[k], false));
            worst = worst.max(rel(&self.alpha[k], &other.alpha[k], true));
            worst = worst.max(rel(&self.p1[k + 1], &other.p1[k + 1], true));
            if k >= 1 {
                worst = worst.max(rel(&self.beta[k], &other.beta[k], false));
            }
        }
        worst
    }
}

/// `P_k(x)` by the three-term recurrence, `0 <= k <= n_max+1`.
pub fn eval_monic(sys: &OpSystem, k: usize, x: &Real) -> Result<Real> {
    if k > sys.n_max + 1 {
        return Err(Error::InvalidParameter(format!(
            "degree {k} exceeds n_max+1 = {}",
            sys.n_max + 1
        )));
    }
    Ok(recurrence_values(&sys.alpha, &sys.beta, k, x).pop().expect("non-empty"))
}

/// `P_0(x) .. P_k(x)` at the precision of the coefficients.
fn recurrence_values(alpha: &[Real], beta: &[Real], k: usize, x: &Real) -> Vec<Real> {
    let prec = alpha[0].prec();
    let x = Float::with_val(prec, x);
    let mut out = Vec::with_capacity(k + 1);
    out.push(Float::with_val(prec, 1));
    if k >= 1 {
        out.push(Float::with_val(prec, &x - &alpha[0]));
    }
    for j in 1..k {
        let t = Float::with_val(prec, &x - &alpha[j]) * &out[j] - Float::with_val(prec, &beta[j] * &out[j - 1]);
        out.push(t);
    }
    out
}

fn finish(
    weight: WeightSpec,
    window: &Window,
    n_max: usize,
    h: Vec<Real>,
    alpha: Vec<Real>,
    digits_used: u32,
    digits_requested: u32,
) -> OpSystem {
    let prec = h[0].prec();
    let mut beta = vec![Float::with_val(prec, 0)];
    for k in 1..h.len() {
        beta.push(Float::with_val(prec, &h[k] / &h[k - 1]));
    }
    let mut p1 = vec![Float::with_val(prec, 0)];
    for a in &alpha {
        let next = Float::with_val(prec, p1.last().expect("non-empty") - a);
        p1.push(next);
    }
    let ends = |t: &Real| {
        if t.is_finite() {
            Some(recurrence_values(&alpha, &beta, n_max + 1, t))
        } else {
            None
        }
    };
    let pa = ends(window.a());
    let pb = ends(window.b());
    OpSystem {
        weight,
        window: window.clone(),
        n_max,
        h,
        alpha,
        beta,
        p1,
        pa,
        pb,
        digits_used,
        digits_requested,
    }
}

/// Symmetric `L D L^T` factorization of the `size x size` Hankel matrix of
/// `mu`. Returns `(D, L)` or the index of the first non-positive pivot.
fn hankel_ldlt(mu: &[Real], size: usize, prec: u32) -> std::result::Result<(Vec<Real>, Vec<Vec<Real>>), usize> {
    let mut l: Vec<Vec<Real>> = Vec::with_capacity(size);
    let mut d: Vec<Real> = Vec::with_capacity(size);
    for i in 0..size {
        let mut row: Vec<Real> = Vec::with_capacity(i + 1);
        for j in 0..i {
            let mut s = Float::with_val(prec, &mu[i + j]);
            for k in 0..j {
                s -= Float::with_val(prec, &row[k] * &l[j][k]) * &d[k];
            }
            row.push(s / &d[j]);
        }
        let mut s = Float::with_val(prec, &mu[2 * i]);
        for k in 0..i {
            s -= Float::with_val(prec, row[k].square_ref()) * &d[k];
        }
        if !(s > 0) {
            return Err(i);
        }
        row.push(Float::with_val(prec, 1));
        d.push(s);
        l.push(row);
    }
    Ok((d, l))
}

/// Builds the system from the Hankel moment matrix of size `n_max + 2`.
///
/// Pivots give `h_k`; `alpha_k = L[k+1][k] - L[k][k-1]`. Working precision
/// starts at `max(policy.digits, required_digits(n_max+1))` and doubles, up to
/// the escalation limit, whenever a pivot is non-positive or the estimated
/// loss `max_k log10(mu_{2k} / h_k)` would eat into the requested digits.
pub fn build_from_moments(w: &WeightSpec, win: &Window, n_max: usize, policy: &PrecisionPolicy) -> Result<OpSystem> {
    if n_max < 1 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    win.check_for(w)?;
    let size = n_max + 2;
    let wanted = policy.digits();
    let mut digits = wanted.max(required_digits(n_max + 1, w));
    let mut escalations = 0;
    loop {
        let prec = bits_for_digits(digits);
        let mu = moment_vector(w, win, 2 * size - 2, digits)?;
        let failure = match hankel_ldlt(&mu, size, prec) {
            Err(index) => Some(index),
            Ok((d, l)) => {
                let loss = (0..size)
                    .map(|k| log10_abs(&mu[2 * k]) - log10_abs(&d[k]))
                    .fold(0.0f64, f64::max);
                if f64::from(digits) - loss < f64::from(wanted) + 5.0 {
                    let worst = (0..size)
                        .max_by(|&i, &j| {
                            let li = log10_abs(&mu[2 * i]) - log10_abs(&d[i]);
                            let lj = log10_abs(&mu[2 * j]) - log10_abs(&d[j]);
                            li.total_cmp(&lj)
                        })
                        .unwrap_or(0);
                    Some(worst)
                } else {
                    let mut alpha = Vec::with_capacity(n_max + 1);
                    for k in 0..=n_max {
                        let mut a = l[k + 1][k].clone();
                        if k >= 1 {
                            a -= &l[k][k - 1];
                        }
                        alpha.push(a);
                    }
                    return Ok(finish(*w, win, n_max, d, alpha, digits, wanted));
                }
            }
        };
        let index = failure.expect("failure path");
        if !policy.auto_escalate() || escalations >= MAX_ESCALATIONS {
            return Err(Error::IllConditioned { index, digits });
        }
        escalations += 1;
        digits *= 2;
    }
}

/// Truncation point beyond which the weight times `x^{2 n_max + 2}` falls
/// below `10^{-(digits+10)}` of unity.
fn cutoff(w: &WeightSpec, n_max: usize, digits: u32) -> f64 {
    let target = f64::from(digits + 10) * std::f64::consts::LN_10;
    match w {
        WeightSpec::Gaussian => {
            // t^2 = target + (n_max+1) ln t^2
            let mut t2 = target;
            for _ in 0..50 {
                t2 = target + (n_max as f64 + 1.0) * t2.ln();
            }
            t2.sqrt()
        }
        WeightSpec::Laguerre { alpha } => {
            let mut t = target;
            for _ in 0..50 {
                t = target + (alpha + 2.0 * n_max as f64 + 2.0) * t.ln();
            }
            t
        }
    }
}

/// Composite rule on the (truncated) window, graded geometrically toward 0
/// for a fractional Laguerre exponent at `a = 0`.
pub(crate) fn window_rule(w: &WeightSpec, win: &Window, n_max: usize, nodes: usize, digits: u32, prec: u32) -> quad::Rule {
    let t = cutoff(w, n_max, digits);
    let lo = if win.a().is_infinite() || win.a_f64() < -t {
        Float::with_val(prec, -t)
    } else {
        Float::with_val(prec, win.a())
    };
    let hi = if win.b().is_infinite() || win.b_f64() > t {
        Float::with_val(prec, t)
    } else {
        Float::with_val(prec, win.b())
    };
    let max_width: f64 = if w.is_gaussian() { 2.0 } else { 8.0 };
    let floor = (2 * digits as usize / 3 + 8).max(24);
    let span = Float::with_val(prec, &hi - &lo).to_f64();
    let mut parts = Vec::new();
    let mut start = lo.clone();
    if let WeightSpec::Laguerre { alpha } = w {
        if lo.is_zero() && alpha.fract() != 0.0 {
            // Panels [2^{-k-1}, 2^{-k}] down to 10^{-D/(alpha+1)}.
            let top = span.min(1.0);
            let eps_log2 = -f64::from(digits) / (alpha + 1.0) * std::f64::consts::LOG2_10;
            let levels = (top.log2() - eps_log2).ceil().max(1.0) as u32;
            let per = floor;
            let top = Float::with_val(prec, top);
            let mut edges = vec![Float::with_val(prec, 0)];
            for k in (0..levels).rev() {
                edges.push(Float::with_val(prec, &top >> k));
            }
            parts.push(quad::composite(&edges, per, prec));
            start = top;
        }
        if alpha.fract() != 0.0 && start > 0 {
            // Panels [x, 2x] keep the branch point at 0 a panel width away.
            let mut edges = vec![start.clone()];
            while edges.last().unwrap().to_f64() < max_width.min(hi.to_f64()) {
                let next = Float::with_val(prec, edges.last().unwrap() * 2u32);
                edges.push(if next > hi { hi.clone() } else { next });
            }
            if edges.len() > 1 {
                start = edges.last().unwrap().clone();
                parts.push(quad::composite(&edges, floor, prec));
            }
        }
    }
    let rest = Float::with_val(prec, &hi - &start).to_f64();
    if rest > 0.0 {
        let panels = (rest / max_width).ceil().max(1.0) as usize;
        let per = (nodes / panels).max(floor);
        let width = Float::with_val(prec, &hi - &start) / panels as u32;
        let edges: Vec<Real> = (0..=panels)
            .map(|i| {
                if i == panels {
                    hi.clone()
                } else {
                    Float::with_val(prec, &start + Float::with_val(prec, &width * i as u32))
                }
            })
            .collect();
        parts.push(quad::composite(&edges, per, prec));
    }
    quad::Rule::concat(parts)
}

fn stieltjes(w: &WeightSpec, win: &Window, n_max: usize, nodes: usize, digits: u32) -> Result<(Vec<Real>, Vec<Real>)> {
    let prec = bits_for_digits(digits);
    let rule = window_rule(w, win, n_max, nodes, digits, prec);
    let mut xs = Vec::with_capacity(rule.len());
    let mut ws = Vec::with_capacity(rule.len());
    for (x, q) in rule.nodes.iter().zip(&rule.weights) {
        let wx = weight_at(w, x)?;
        xs.push(x.clone());
        ws.push(wx * q);
    }
    let mut prev = vec![Float::with_val(prec, 0); xs.len()];
    let mut cur = vec![Float::with_val(prec, 1); xs.len()];
    let mut h = Vec::with_capacity(n_max + 2);
    let mut alpha = Vec::with_capacity(n_max + 1);
    for k in 0..=n_max + 1 {
        let mut norm = Float::with_val(prec, 0);
        let mut first = Float::with_val(prec, 0);
        for i in 0..xs.len() {
            let pw = Float::with_val(prec, cur[i].square_ref()) * &ws[i];
            first += Float::with_val(prec, &pw * &xs[i]);
            norm += pw;
        }
        if !(norm > 0) {
            return Err(Error::IllConditioned { index: k, digits });
        }
        if k == n_max + 1 {
            h.push(norm);
            break;
        }
        let a = first / &norm;
        let b = if k == 0 {
            Float::with_val(prec, 0)
        } else {
            Float::with_val(prec, &norm / &h[k - 1])
        };
        for i in 0..xs.len() {
            let next = Float::with_val(prec, &xs[i] - &a) * &cur[i] - Float::with_val(prec, &b * &prev[i]);
            prev[i] = std::mem::replace(&mut cur[i], next);
        }
        h.push(norm);
        alpha.push(a);
    }
    Ok((h, alpha))
}

/// Builds the system by the discretized Stieltjes procedure at `digits`
/// digits with roughly `nodes` Gauss–Legendre nodes, and confirms it against
/// a run with twice the nodes.
pub fn build_by_quadrature(w: &WeightSpec, win: &Window, n_max: usize, nodes: usize, digits: u32) -> Result<OpSystem> {
    if nodes < 4 * n_max.max(1) {
        return Err(Error::InvalidParameter(format!(
            "need at least {} quadrature nodes for n_max = {n_max}, got {nodes}",
            4 * n_max.max(1)
        )));
    }
    win.check_for(w)?;
    let work = digits + 20;
    let (h, alpha) = stieltjes(w, win, n_max, nodes, work)?;
    let (h2, alpha2) = stieltjes(w, win, n_max, 2 * nodes, work)?;
    let coarse = finish(*w, win, n_max, h, alpha, work, digits);
    let fine = finish(*w, win, n_max, h2, alpha2, work, digits);
    let dev = coarse.max_deviation(&fine);
    if dev > crate::numerics::tolerance(digits, 1.0) * 1e3 {
        return Err(Error::NonConvergence(format!(
            "Stieltjes quadrature with {nodes} nodes disagrees with {} nodes by {dev:e}",
            2 * nodes
        )));
    }
    Ok(fine)
}
