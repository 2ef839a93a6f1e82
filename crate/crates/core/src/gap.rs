//! Gap probabilities `Prob(n, a, b)`, Hankel determinants and `H_n`.
//!
//! `H_n` is `(d_a + d_b) ln D_n` for the Gaussian weight and
//! `(a d_a + b d_b) ln D_n` for the Laguerre weight. Both reduce to the
//! sub-leading coefficient: `H = 2 p1(n)` and `H = n(alpha + n) + p1(n)`.
//! Nothing here differentiates numerically; see [`crate::calculus`] for the
//! finite-difference checks against these closed forms.

use rayon::prelude::*;
use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{format_real, PrecisionPolicy, Real};
use crate::orthopoly::{build_from_moments, OpSystem};
use crate::quad;
use crate::weights::{log_whole_interval_norm, WeightSpec, Window};

/// Gap data at one window for a fixed `n`.
#[derive(Debug, Clone)]
pub struct GapPoint {
    pub n: usize,
    pub window: Window,
    pub log_d: Real,
    pub log_prob: Real,
    pub h: Real,
    pub p1: Real,
}

/// `ln D_n = sum_{j<n} ln h_j`, `n <= n_max + 1`.
pub fn log_hankel_det(sys: &OpSystem, n: usize) -> Result<Real> {
    if n > sys.n_max + 1 {
        return Err(Error::InvalidParameter(format!(
            "determinant order {n} exceeds n_max+1 = {}",
            sys.n_max + 1
        )));
    }
    Ok(sys.log_det(n))
}

/// `ln Prob(n, a, b) = sum_{j<n} [ln h_j(a,b) - ln h_j(I)]`.
pub fn log_gap_probability(sys: &OpSystem, n: usize) -> Result<Real> {
    let mut acc = log_hankel_det(sys, n)?;
    for j in 0..n {
        acc -= log_whole_interval_norm(&sys.weight, j, sys.digits_used + 10);
    }
    Ok(acc)
}

pub fn gap_probability(sys: &OpSystem, n: usize) -> Result<Real> {
    Ok(log_gap_probability(sys, n)?.exp())
}

/// `H_n` alone: `2 p1(n)` or `n(alpha + n) + p1(n)`.
pub fn h_from_p1(sys: &OpSystem, n: usize) -> Result<Real> {
    if n > sys.n_max {
        return Err(Error::InvalidParameter(format!("n = {n} exceeds n_max = {}", sys.n_max)));
    }
    let prec = sys.prec();
    let p1 = &sys.p1[n];
    Ok(match sys.weight {
        WeightSpec::Gaussian => Float::with_val(prec, p1 * 2u32),
        WeightSpec::Laguerre { alpha } => (Float::with_val(prec, n) + alpha) * n as u32 + p1,
    })
}

/// `H_n` from `p1(n)`, together with `ln D_n` and `ln Prob`.
pub fn h_value(sys: &OpSystem, n: usize) -> Result<GapPoint> {
    let h = h_from_p1(sys, n)?;
    let p1 = sys.p1[n].clone();
    Ok(GapPoint {
        n,
        window: sys.window.clone(),
        log_d: log_hankel_det(sys, n)?,
        log_prob: log_gap_probability(sys, n)?,
        h,
        p1,
    })
}

/// Builds the system for `win` and returns its [`GapPoint`].
pub fn gap_point(w: &WeightSpec, n: usize, win: &Window, policy: &PrecisionPolicy) -> Result<GapPoint> {
    let sys = build_from_moments(w, win, n.max(1), policy)?;
    h_value(&sys, n)
}

/// `ln Prob(n, a, b)` rebuilt from `H_n` along the diagonal path
/// `t -> (t, t + b - a)`:
///
/// `ln Prob(n, a, b) = int_0^a H_n(t, t + b - a) dt + ln Prob(n, 0, b - a)`.
///
/// Composite Gauss–Legendre with `ceil(|a|)` panels of `steps` nodes; the
/// result must agree with a run at `2 * steps` to `10^{-digits/3}`.
pub fn reconstruct_logprob(
    n: usize,
    w: &WeightSpec,
    a: &Real,
    b: &Real,
    steps: usize,
    policy: &PrecisionPolicy,
) -> Result<Real> {
    if !w.is_gaussian() {
        return Err(Error::EnsembleMismatch {
            expected: "gaussian",
            found: w.name(),
        });
    }
    if steps < 16 {
        return Err(Error::InvalidParameter(format!("need at least 16 steps, got {steps}")));
    }
    let prec = policy.bits() + 32;
    let width = Float::with_val(prec, b - a);
    let base_win = Window::new(Float::with_val(prec, 0), width.clone())?;
    let base = log_gap_probability(&build_from_moments(w, &base_win, n.max(1), policy)?, n)?;
    if a.is_zero() {
        return Ok(base);
    }
    let path = |count: usize| -> Result<Real> {
        let panels = a.to_f64().abs().ceil().max(1.0) as u32;
        let end = Float::with_val(prec, a);
        let edges: Vec<Real> = (0..=panels)
            .map(|i| Float::with_val(prec, &end * i) / panels)
            .collect();
        // For a < 0 the edges decrease and the weights come out negative.
        let rule = quad::composite(&edges, count, prec);
        let values: Vec<Result<Real>> = rule
            .nodes
            .par_iter()
            .map(|t| {
                let win = Window::new(t.clone(), Float::with_val(prec, t + &width))?;
                Ok(gap_point(w, n, &win, policy)?.h)
            })
            .collect();
        let mut acc = Float::with_val(prec, 0);
        for (v, q) in values.into_iter().zip(&rule.weights) {
            acc += v? * q;
        }
        Ok(acc)
    };
    let coarse = path(steps)?;
    let fine = path(2 * steps)?;
    let tol = crate::numerics::tolerance(policy.digits(), 3.0) * fine.to_f64().abs().max(1.0);
    let diff = Float::with_val(prec, &coarse - &fine).abs().to_f64();
    if diff > tol {
        return Err(Error::NonConvergence(format!(
            "path integral changed by {diff:e} when doubling {steps} steps"
        )));
    }
    Ok(fine + base)
}

/// Gap data on a rectangular `(a, b)` grid, row-major in `a`.
#[derive(Debug, Clone)]
pub struct GapSurface {
    pub n: usize,
    pub weight: WeightSpec,
    pub digits: u32,
    pub a_grid: Vec<Real>,
    pub b_grid: Vec<Real>,
    pub points: Vec<Vec<GapPoint>>,
}

/// One exported surface row.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceRow {
    pub a: String,
    pub b: String,
    #[serde(rename = "logD")]
    pub log_d: String,
    #[serde(rename = "logProb")]
    pub log_prob: String,
    #[serde(rename = "H")]
    pub h: String,
    pub p1: String,
}

#[derive(Serialize)]
struct SurfaceJson<'a> {
    n: usize,
    weight: WeightSpec,
    digits: u32,
    rows: &'a [SurfaceRow],
}

impl GapSurface {
    /// Significant figures used on export.
    pub fn sig_figs(&self) -> usize {
        self.digits.min(30) as usize
    }

    pub fn rows(&self) -> Vec<SurfaceRow> {
        let sig = self.sig_figs();
        self.points
            .iter()
            .flatten()
            .map(|p| SurfaceRow {
                a: format_real(p.window.a(), sig),
                b: format_real(p.window.b(), sig),
                log_d: format_real(&p.log_d, sig),
                log_prob: format_real(&p.log_prob, sig),
                h: format_real(&p.h, sig),
                p1: format_real(&p.p1, sig),
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let rows = self.rows();
        serde_json::to_string_pretty(&SurfaceJson {
            n: self.n,
            weight: self.weight,
            digits: self.digits,
            rows: &rows,
        })
        .expect("surface serializes")
    }
}

fn strictly_increasing(g: &[Real]) -> bool {
    g.windows(2).all(|p| p[0] < p[1])
}

/// Evaluates [`gap_point`] on every grid node in parallel. Each node builds
/// its own system; results are placed by grid index.
pub fn surface(
    w: &WeightSpec,
    n: usize,
    a_grid: &[Real],
    b_grid: &[Real],
    policy: &PrecisionPolicy,
) -> Result<GapSurface> {
    if a_grid.is_empty() || b_grid.is_empty() || !strictly_increasing(a_grid) || !strictly_increasing(b_grid) {
        return Err(Error::InvalidParameter("grids must be non-empty and strictly increasing".into()));
    }
    if a_grid.last().expect("non-empty") >= b_grid.first().expect("non-empty") {
        return Err(Error::InvalidParameter("every a must lie below every b".into()));
    }
    let nodes: Vec<(usize, usize)> = (0..a_grid.len())
        .flat_map(|i| (0..b_grid.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<Result<GapPoint>> = nodes
        .par_iter()
        .map(|&(i, j)| {
            let win = Window::new(a_grid[i].clone(), b_grid[j].clone())?;
            gap_point(w, n, &win, policy).map_err(|e| Error::AtNode {
                a: a_grid[i].to_f64(),
                b: b_grid[j].to_f64(),
                source: Box::new(e),
            })
        })
        .collect();
    let mut points: Vec<Vec<GapPoint>> = Vec::with_capacity(a_grid.len());
    let mut it = results.into_iter();
    for _ in 0..a_grid.len() {
        let mut row = Vec::with_capacity(b_grid.len());
        for _ in 0..b_grid.len() {
            row.push(it.next().expect("grid size")?);
        }
        points.push(row);
    }
    Ok(GapSurface {
        n,
        weight: *w,
        digits: policy.digits(),
        a_grid: a_grid.to_vec(),
        b_grid: b_grid.to_vec(),
        points,
    })
}
