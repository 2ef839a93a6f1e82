//! Independent references for the gap probability: Monte Carlo sampling of
//! random matrices and direct quadrature of the joint eigenvalue density.
//!
//! Sampling conventions. The Gaussian density `exp(-Tr H^2)` factors over
//! entries as `Tr H^2 = sum_i H_ii^2 + 2 sum_{i<j} |H_ij|^2`, so diagonal
//! entries are `N(0, 1/2)` and the real and imaginary parts of each
//! off-diagonal entry are `N(0, 1/4)`. The eigenvalue density is then
//! proportional to `Delta^2 prod exp(-x^2)`. For the Laguerre weight,
//! `W = G G^*` with `G` an `n x m` matrix of standard complex Gaussians
//! (`E|g|^2 = 1`) has eigenvalue density proportional to
//! `Delta^2 prod x^{m-n} exp(-x)`, so only integer `alpha = m - n` is sampled.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{bits_for_digits, Real};
use crate::quad;
use crate::weights::{weight_at, whole_interval_norm, WeightSpec, Window};

/// Monte Carlo run parameters. Results depend only on these fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MCConfig {
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub p_hat: f64,
    /// `1.96 sqrt(p_hat (1 - p_hat) / trials)`.
    pub ci95_halfwidth: f64,
    pub trials: u64,
    pub hits: u64,
}

impl MCEstimate {
    fn from_counts(hits: u64, trials: u64) -> Self {
        let p = hits as f64 / trials as f64;
        MCEstimate {
            p_hat: p,
            ci95_halfwidth: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
            hits,
        }
    }

    /// Whether `value` lies in the 95% interval widened by `slack`.
    pub fn contains(&self, value: f64, slack: f64) -> bool {
        (self.p_hat - value).abs() <= self.ci95_halfwidth + slack
    }
}

/// Trials per independently seeded chunk. Fixed so that estimates do not
/// depend on the number of worker threads.
const CHUNK: u64 = 2048;

/// `m - n` for an integer Laguerre exponent.
fn wishart_excess(w: &WeightSpec) -> Result<Option<usize>> {
    match *w {
        WeightSpec::Gaussian => Ok(None),
        WeightSpec::Laguerre { alpha } => {
            if alpha >= 0.0 && alpha.fract() == 0.0 && alpha < 1e6 {
                Ok(Some(alpha as usize))
            } else {
                Err(Error::InvalidParameter(format!(
                    "the Wishart sampler needs an integer Laguerre exponent, got {alpha}"
                )))
            }
        }
    }
}

/// Eigenvalues, ascending, of one random matrix from the ensemble.
pub fn sample_eigenvalues<R: Rng + ?Sized>(w: &WeightSpec, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let excess = wishart_excess(w)?;
    let mut eig: Vec<f64> = match excess {
        None => {
            let diag = Normal::new(0.0, 0.5f64.sqrt()).expect("valid normal");
            let off = Normal::new(0.0, 0.5).expect("valid normal");
            let mut h = DMatrix::<Complex<f64>>::zeros(n, n);
            for i in 0..n {
                h[(i, i)] = Complex::new(diag.sample(rng), 0.0);
                for j in 0..i {
                    let z = Complex::new(off.sample(rng), off.sample(rng));
                    h[(i, j)] = z;
                    h[(j, i)] = z.conj();
                }
            }
            h.symmetric_eigenvalues().iter().copied().collect()
        }
        Some(excess) => {
            let m = n + excess;
            let unit = Normal::new(0.0, 0.5f64.sqrt()).expect("valid normal");
            let g = DMatrix::<Complex<f64>>::from_fn(n, m, |_, _| Complex::new(unit.sample(rng), unit.sample(rng)));
            let wish = &g * g.adjoint();
            wish.symmetric_eigenvalues().iter().copied().collect()
        }
    };
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Fraction of sampled matrices with every eigenvalue in `(a, b)`.
pub fn mc_gap_probability(w: &WeightSpec, n: usize, win: &Window, cfg: &MCConfig) -> Result<MCEstimate> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    wishart_excess(w)?;
    win.check_for(w)?;
    let (a, b) = (win.a_f64(), win.b_f64());
    let chunks = cfg.trials.div_ceil(CHUNK);
    let hits = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c);
            let count = CHUNK.min(cfg.trials - c * CHUNK);
            let mut hits = 0u64;
            for _ in 0..count {
                let eig = sample_eigenvalues(w, n, &mut rng)?;
                if eig[0] > a && eig[n - 1] < b {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    Ok(MCEstimate::from_counts(hits, cfg.trials))
}

/// Mean of the largest eigenvalue over `trials` seeded samples, with its
/// standard error.
pub fn mc_largest_eigenvalue(w: &WeightSpec, n: usize, cfg: &MCConfig) -> Result<(f64, f64)> {
    if cfg.trials < 2 {
        return Err(Error::InvalidParameter("need at least 2 trials".into()));
    }
    let chunks = cfg.trials.div_ceil(CHUNK);
    let samples: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c);
            let count = CHUNK.min(cfg.trials - c * CHUNK);
            (0..count)
                .map(|_| Ok(*sample_eigenvalues(w, n, &mut rng)?.last().expect("n >= 1")))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok((mean, (var / k).sqrt()))
}

/// Largest `n` accepted by [`direct_quadrature_prob`].
pub const QUADRATURE_MAX_N: usize = 3;

/// Finite stand-in for an infinite window end; the relative mass beyond it
/// is below `1e-30`.
fn finite_end(w: &WeightSpec, n: usize, x: &Real, prec: u32) -> Real {
    if x.is_finite() {
        return Float::with_val(prec, x);
    }
    let cut = match w {
        WeightSpec::Gaussian => 9.0,
        WeightSpec::Laguerre { alpha } => 100.0 + 10.0 * n as f64 + 2.0 * alpha,
    };
    Float::with_val(prec, if x.is_sign_negative() { -cut } else { cut })
}

/// `sum_{i_1 < ... < i_n} prod w_k Delta^2` over a tensor rule: the density
/// vanishes on coinciding nodes and is symmetric, so this equals the full
/// tensor sum divided by `n!`. Partial sums are added in index order so the
/// result does not depend on the thread schedule.
fn ordered_sum(rule: &quad::Rule, n: usize, prec: u32) -> Real {
    let wx = &rule.nodes;
    let len = wx.len();
    let zero = Float::with_val(prec, 0);
    match n {
        1 => rule.weights.iter().fold(zero, |acc, w| acc + w),
        2 => (0..len)
            .into_par_iter()
            .map(|i| {
                let mut acc = Float::with_val(prec, 0);
                for j in i + 1..len {
                    let d = Float::with_val(prec, &wx[i] - &wx[j]);
                    acc += Float::with_val(prec, d.square_ref()) * &rule.weights[j];
                }
                acc * &rule.weights[i]
            })
            .collect::<Vec<Real>>()
            .into_iter()
            .fold(Float::with_val(prec, 0), |a, b| a + b),
        _ => (0..len)
            .into_par_iter()
            .map(|i| {
                let mut acc = Float::with_val(prec, 0);
                for j in i + 1..len {
                    let dij = Float::with_val(prec, &wx[i] - &wx[j]);
                    let mut inner = Float::with_val(prec, 0);
                    for k in j + 1..len {
                        let d = Float::with_val(prec, &wx[i] - &wx[k]) * Float::with_val(prec, &wx[j] - &wx[k]);
                        inner += Float::with_val(prec, d.square_ref()) * &rule.weights[k];
                    }
                    acc += inner * Float::with_val(prec, dij.square_ref()) * &rule.weights[j];
                }
                acc * &rule.weights[i]
            })
            .collect::<Vec<Real>>()
            .into_iter()
            .fold(Float::with_val(prec, 0), |a, b| a + b),
    }
}

fn quadrature_at(w: &WeightSpec, n: usize, a: &Real, b: &Real, nodes: usize, prec: u32) -> Result<Real> {
    let base = quad::mapped(nodes, a, b, prec);
    // Fold the weight into the quadrature weights.
    let weights = base
        .nodes
        .iter()
        .zip(&base.weights)
        .map(|(x, q)| Ok(weight_at(w, x)? * q))
        .collect::<Result<Vec<Real>>>()?;
    let rule = quad::Rule {
        nodes: base.nodes,
        weights,
    };
    Ok(ordered_sum(&rule, n, prec))
}

/// `Prob(n, a, b)` as the `n`-fold Gauss–Legendre integral of
/// `Delta^2 prod w` over `(a, b)^n`, divided by `n! prod h_j(I)`.
/// The rule uses `nodes` points per axis and must agree with the rule at
/// `2 nodes` to `10^{-digits/2}` relative.
pub fn direct_quadrature_prob(w: &WeightSpec, n: usize, win: &Window, nodes: usize, digits: u32) -> Result<Real> {
    if n == 0 || n > QUADRATURE_MAX_N {
        return Err(Error::InvalidParameter(format!(
            "direct quadrature supports 1 <= n <= {QUADRATURE_MAX_N}, got {n}"
        )));
    }
    if nodes < 2 {
        return Err(Error::InvalidParameter("need at least 2 nodes per axis".into()));
    }
    win.check_for(w)?;
    let prec = bits_for_digits(digits + 10);
    let a = finite_end(w, n, win.a(), prec);
    let b = finite_end(w, n, win.b(), prec);
    let coarse = quadrature_at(w, n, &a, &b, nodes, prec)?;
    let fine = quadrature_at(w, n, &a, &b, 2 * nodes, prec)?;
    let change = Float::with_val(prec, &coarse - &fine).abs() / Float::with_val(prec, fine.abs_ref());
    if !(change.to_f64() < 10f64.powf(-f64::from(digits) / 2.0)) {
        return Err(Error::NonConvergence(format!(
            "tensor quadrature moved by {:e} when doubling {nodes} nodes",
            change.to_f64()
        )));
    }
    let mut norm = Float::with_val(prec, 1);
    for j in 0..n {
        norm *= whole_interval_norm(w, j, digits + 10);
    }
    Ok(Float::with_val(bits_for_digits(digits), fine / norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap::gap_probability;
    use crate::numerics::{erf, PrecisionPolicy};
    use crate::orthopoly::build_from_moments;

    fn hankel_prob(w: &WeightSpec, n: usize, a: f64, b: f64, digits: u32) -> f64 {
        let policy = PrecisionPolicy::new(digits).unwrap();
        let win = Window::from_f64(a, b, policy.bits()).unwrap();
        let sys = build_from_moments(w, &win, n, &policy).unwrap();
        gap_probability(&sys, n).unwrap().to_f64()
    }

    #[test]
    fn gue_single_eigenvalue_has_variance_one_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = 100_000;
        let xs: Vec<f64> = (0..k)
            .map(|_| sample_eigenvalues(&WeightSpec::Gaussian, 1, &mut rng).unwrap()[0])
            .collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / k as f64;
        // The sample variance of N(0, s^2) has standard deviation s^2 sqrt(2/k).
        assert!((var - 0.5).abs() < 3.0 * 0.5 * (2.0 / k as f64).sqrt(), "{var}");
    }

    #[test]
    fn lue_single_eigenvalue_is_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = WeightSpec::Laguerre { alpha: 0.0 };
        let k = 100_000;
        let mean = (0..k).map(|_| sample_eigenvalues(&w, 1, &mut rng).unwrap()[0]).sum::<f64>() / k as f64;
        assert!((mean - 1.0).abs() < 1.96 / (k as f64).sqrt() * 1.5, "{mean}");
    }

    #[test]
    fn samples_are_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for w in [WeightSpec::Gaussian, WeightSpec::Laguerre { alpha: 2.0 }] {
            let e = sample_eigenvalues(&w, 7, &mut rng).unwrap();
            assert!(e.windows(2).all(|p| p[0] <= p[1]));
        }
    }

    #[test]
    fn fractional_exponent_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = WeightSpec::laguerre(0.5).unwrap();
        assert!(matches!(sample_eigenvalues(&w, 2, &mut rng), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn zero_trials_rejected() {
        let win = Window::from_f64(-1.0, 1.0, 64).unwrap();
        let cfg = MCConfig { trials: 0, seed: 1 };
        assert!(mc_gap_probability(&WeightSpec::Gaussian, 1, &win, &cfg).is_err());
    }

    #[test]
    fn mc_reproduces_erf_one() {
        let win = Window::from_f64(-1.0, 1.0, 64).unwrap();
        let cfg = MCConfig { trials: 100_000, seed: 11 };
        let est = mc_gap_probability(&WeightSpec::Gaussian, 1, &win, &cfg).unwrap();
        let exact = erf(&Float::with_val(64, 1), 30).to_f64();
        assert!(est.contains(exact, 0.0), "{est:?} vs {exact}");
    }

    #[test]
    fn full_support_is_certain() {
        let win = Window::from_f64(f64::NEG_INFINITY, f64::INFINITY, 64).unwrap();
        let cfg = MCConfig { trials: 5000, seed: 2 };
        let est = mc_gap_probability(&WeightSpec::Gaussian, 3, &win, &cfg).unwrap();
        assert_eq!(est.p_hat, 1.0);
        assert_eq!(est.ci95_halfwidth, 0.0);
    }

    #[test]
    fn mc_is_seed_deterministic() {
        let win = Window::from_f64(-1.5, 2.0, 64).unwrap();
        let cfg = MCConfig { trials: 10_000, seed: 42 };
        let a = mc_gap_probability(&WeightSpec::Gaussian, 3, &win, &cfg).unwrap();
        let b = mc_gap_probability(&WeightSpec::Gaussian, 3, &win, &cfg).unwrap();
        assert_eq!(a, b);
        let other = mc_gap_probability(&WeightSpec::Gaussian, 3, &win, &MCConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.hits, other.hits);
    }

    #[test]
    fn mc_agrees_with_hankel_route() {
        let win = Window::from_f64(-2.5, 2.5, 64).unwrap();
        let cfg = MCConfig { trials: 100_000, seed: 5 };
        let est = mc_gap_probability(&WeightSpec::Gaussian, 4, &win, &cfg).unwrap();
        let exact = hankel_prob(&WeightSpec::Gaussian, 4, -2.5, 2.5, 50);
        assert!(est.contains(exact, 0.0), "{est:?} vs {exact}");
    }

    #[test]
    fn single_eigenvalue_quadrature_is_mass_over_norm() {
        let win = Window::from_f64(-1.0, 1.0, 200).unwrap();
        let p = direct_quadrature_prob(&WeightSpec::Gaussian, 1, &win, 40, 40).unwrap();
        let exact = erf(&Float::with_val(200, 1), 50);
        assert!(Float::with_val(200, &p - &exact).abs().to_f64() < 1e-38);
    }

    #[test]
    fn quadrature_matches_hankel_gue_n2() {
        let win = Window::from_f64(-1.0, 1.0, 220).unwrap();
        let q = direct_quadrature_prob(&WeightSpec::Gaussian, 2, &win, 64, 60).unwrap().to_f64();
        let h = hankel_prob(&WeightSpec::Gaussian, 2, -1.0, 1.0, 60);
        assert!((q - h).abs() < 1e-15, "{q} vs {h}");
    }

    #[test]
    fn quadrature_matches_hankel_lue_n3() {
        let w = WeightSpec::laguerre(1.0).unwrap();
        let win = Window::from_f64(0.3, 5.0, 200).unwrap();
        let q = direct_quadrature_prob(&w, 3, &win, 32, 40).unwrap().to_f64();
        let h = hankel_prob(&w, 3, 0.3, 5.0, 50);
        assert!((q - h).abs() < 1e-12, "{q} vs {h}");
    }

    #[test]
    fn quadrature_handles_infinite_ends() {
        let win = Window::from_f64(-0.5, f64::INFINITY, 200).unwrap();
        let q = direct_quadrature_prob(&WeightSpec::Gaussian, 2, &win, 96, 30).unwrap().to_f64();
        let h = hankel_prob(&WeightSpec::Gaussian, 2, -0.5, f64::INFINITY, 50);
        assert!((q - h).abs() < 1e-13, "{q} vs {h}");
    }

    #[test]
    fn quadrature_rejects_large_n() {
        let win = Window::from_f64(-1.0, 1.0, 64).unwrap();
        assert!(direct_quadrature_prob(&WeightSpec::Gaussian, 4, &win, 8, 20).is_err());
    }

    #[test]
    fn gue_edge_mean_follows_tracy_widom_shift() {
        // lambda_max ~ sqrt(2n) + s / (sqrt2 n^{1/6}) with E[s] = -1.7711
        let n = 200;
        let cfg = MCConfig { trials: 400, seed: 3 };
        let (mean, se) = mc_largest_eigenvalue(&WeightSpec::Gaussian, n, &cfg).unwrap();
        let edge = (2.0 * n as f64).sqrt();
        let predicted = edge - 1.7711 / (2f64.sqrt() * (n as f64).powf(1.0 / 6.0));
        assert!((mean - predicted).abs() < 4.0 * se + 0.02, "{mean} vs {predicted} (se {se})");
        assert!((mean / edge - 1.0).abs() < 0.04);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(8))]

        #[test]
        fn quadrature_probability_grows_with_the_window(a in -2.0f64..0.0, w in 0.5f64..2.0, grow in 0.1f64..1.0) {
            let g = WeightSpec::Gaussian;
            let inner = Window::from_f64(a, a + w, 200).unwrap();
            let outer = Window::from_f64(a - grow, a + w + grow, 200).unwrap();
            let p = direct_quadrature_prob(&g, 2, &inner, 48, 30).unwrap();
            let q = direct_quadrature_prob(&g, 2, &outer, 48, 30).unwrap();
            proptest::prop_assert!(p > 0 && p < q && q < 1);
        }

        #[test]
        fn mc_estimate_is_a_frequency(seed in 0u64..1000, b in 0.2f64..3.0) {
            let win = Window::from_f64(-1.0, b, 128).unwrap();
            let cfg = MCConfig { trials: 500, seed };
            let est = mc_gap_probability(&WeightSpec::Gaussian, 2, &win, &cfg).unwrap();
            proptest::prop_assert!((0.0..=1.0).contains(&est.p_hat));
            proptest::prop_assert_eq!(est.p_hat, est.hits as f64 / 500.0);
        }
    }
}
