//! Ensemble weights, integration windows and truncated moments.

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bits_for_digits, erf, infinity, log10_abs, lower_incomplete_gamma, pi, Real};

/// The two unitary-ensemble weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightSpec {
    /// `e^{-x^2}` on the real line.
    Gaussian,
    /// `x^alpha e^{-x}` on the positive half-line, `alpha > 0`.
    Laguerre { alpha: f64 },
}

impl WeightSpec {
    pub fn laguerre(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Laguerre exponent must be positive, got {alpha}"
            )));
        }
        Ok(WeightSpec::Laguerre { alpha })
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightSpec::Gaussian => "gaussian",
            WeightSpec::Laguerre { .. } => "laguerre",
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, WeightSpec::Gaussian)
    }

    /// Laguerre exponent; zero for the Gaussian weight.
    pub fn alpha(&self) -> f64 {
        match self {
            WeightSpec::Gaussian => 0.0,
            WeightSpec::Laguerre { alpha } => *alpha,
        }
    }

    /// The full support as a window.
    pub fn support(&self, prec: u32) -> Window {
        match self {
            WeightSpec::Gaussian => Window {
                a: infinity(prec, true),
                b: infinity(prec, false),
            },
            WeightSpec::Laguerre { .. } => Window {
                a: Float::with_val(prec, 0),
                b: infinity(prec, false),
            },
        }
    }

    /// `v'(z)` where `v = -ln w`.
    pub fn v_prime(&self, z: &Real) -> Real {
        let prec = z.prec();
        match self {
            WeightSpec::Gaussian => Float::with_val(prec, z * 2u32),
            WeightSpec::Laguerre { alpha } => {
                Float::with_val(prec, 1) - Float::with_val(prec, *alpha) / z
            }
        }
    }

    fn in_support(&self, x: &Real) -> bool {
        match self {
            WeightSpec::Gaussian => x.is_finite(),
            WeightSpec::Laguerre { .. } => x.is_finite() && *x >= 0,
        }
    }

    /// `w(t)` at a window endpoint, with infinite endpoints contributing 0.
    pub fn endpoint_weight(&self, t: &Real, prec: u32) -> Real {
        if t.is_infinite() {
            return Float::with_val(prec, 0);
        }
        weight_at(self, &Float::with_val(prec, t)).unwrap_or_else(|_| Float::with_val(prec, 0))
    }
}

/// Open interval `(a, b)`; `a = -inf` and `b = +inf` mark the unbounded ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    a: Real,
    b: Real,
}

impl Window {
    pub fn new(a: Real, b: Real) -> Result<Self> {
        if a.is_nan() || b.is_nan() {
            return Err(Error::InvalidParameter("window endpoint is NaN".into()));
        }
        if a >= b {
            return Err(Error::InvalidParameter(format!(
                "window needs a < b, got ({}, {})",
                a.to_f64(),
                b.to_f64()
            )));
        }
        if (a.is_infinite() && !a.is_sign_negative()) || (b.is_infinite() && b.is_sign_negative()) {
            return Err(Error::InvalidParameter("window endpoints out of order".into()));
        }
        Ok(Window { a, b })
    }

    /// Window from `f64` endpoints at `prec` bits; infinities are allowed.
    pub fn from_f64(a: f64, b: f64, prec: u32) -> Result<Self> {
        Window::new(Float::with_val(prec, a), Float::with_val(prec, b))
    }

    pub fn a(&self) -> &Real {
        &self.a
    }

    pub fn b(&self) -> &Real {
        &self.b
    }

    pub fn a_f64(&self) -> f64 {
        self.a.to_f64()
    }

    pub fn b_f64(&self) -> f64 {
        self.b.to_f64()
    }

    /// Checks the window against the weight's support.
    pub fn check_for(&self, w: &WeightSpec) -> Result<()> {
        if let WeightSpec::Laguerre { .. } = w {
            if self.a < 0 {
                return Err(Error::Domain(format!(
                    "Laguerre window must lie in (0, inf), got a = {}",
                    self.a.to_f64()
                )));
            }
        }
        Ok(())
    }

    /// Same window with both endpoints rounded to `prec` bits.
    pub fn with_prec(&self, prec: u32) -> Window {
        Window {
            a: Float::with_val(prec, &self.a),
            b: Float::with_val(prec, &self.b),
        }
    }

    /// Shifts the finite endpoints by `(da, db)`.
    pub fn shifted(&self, da: &Real, db: &Real) -> Result<Window> {
        let prec = da.prec().max(self.a.prec());
        let a = if self.a.is_finite() {
            Float::with_val(prec, &self.a + da)
        } else {
            self.a.clone()
        };
        let b = if self.b.is_finite() {
            Float::with_val(prec, &self.b + db)
        } else {
            self.b.clone()
        };
        Window::new(a, b)
    }
}

/// `w(x)` for `x` in the support, at the precision of `x`.
pub fn weight_at(w: &WeightSpec, x: &Real) -> Result<Real> {
    if !w.in_support(x) {
        return Err(Error::Domain(format!(
            "{} weight evaluated outside its support at {}",
            w.name(),
            x.to_f64()
        )));
    }
    let prec = x.prec();
    Ok(match w {
        WeightSpec::Gaussian => Float::with_val(prec, -x.clone().square()).exp(),
        WeightSpec::Laguerre { alpha } => {
            if x.is_zero() {
                Float::with_val(prec, 0)
            } else {
                let log = Float::with_val(prec, x.ln_ref()) * *alpha - x;
                log.exp()
            }
        }
    })
}

/// `int_0^t x^j w(x) dx` (Gaussian) or `int_0^t x^j w(x) dx` from the left
/// support end (Laguerre), through the incomplete gamma function.
fn antiderivative(w: &WeightSpec, t: &Real, j: usize, digits: u32) -> Result<Real> {
    let prec = bits_for_digits(digits);
    match w {
        WeightSpec::Gaussian => {
            let s = Float::with_val(prec, j + 1) / 2u32;
            let t2 = if t.is_infinite() {
                infinity(prec, false)
            } else {
                Float::with_val(prec, t.square_ref())
            };
            let half = lower_incomplete_gamma(&s, &t2, digits)? / 2u32;
            // Odd powers flip sign on the negative axis, even powers do not.
            if t.is_sign_negative() && j % 2 == 0 {
                Ok(-half)
            } else {
                Ok(half)
            }
        }
        WeightSpec::Laguerre { alpha } => {
            let s = Float::with_val(prec, j + 1) + *alpha;
            lower_incomplete_gamma(&s, &Float::with_val(prec, t), digits)
        }
    }
}

/// Truncated moment `mu_j(a, b) = int_a^b x^j w(x) dx` to `digits` digits.
///
/// Evaluated as a difference of incomplete gamma functions; guard digits are
/// raised until the subtraction keeps `digits` significant digits.
pub fn moment(w: &WeightSpec, win: &Window, j: usize, digits: u32) -> Result<Real> {
    win.check_for(w)?;
    let out_prec = bits_for_digits(digits);
    let mut guard = 20u32;
    for _ in 0..6 {
        let d = digits + guard;
        let hi = antiderivative(w, win.b(), j, d)?;
        let lo = antiderivative(w, win.a(), j, d)?;
        let mu = Float::with_val(bits_for_digits(d), &hi - &lo);
        if mu.is_zero() {
            return Ok(Float::with_val(out_prec, 0));
        }
        let big = log10_abs(&hi).max(log10_abs(&lo));
        let loss = (big - log10_abs(&mu)).max(0.0);
        if loss + 5.0 < f64::from(guard) {
            return Ok(Float::with_val(out_prec, mu));
        }
        guard = (loss.ceil() as u32) + 20;
    }
    Err(Error::NonConvergence(format!(
        "moment {j} lost all significant digits on ({}, {})",
        win.a_f64(),
        win.b_f64()
    )))
}

/// `t^k w(t)` at a finite endpoint, or zero at an infinite one; `k` may be
/// fractional for the Laguerre weight.
fn boundary_power(w: &WeightSpec, t: &Real, k: usize, prec: u32) -> Real {
    if t.is_infinite() {
        return Float::with_val(prec, 0);
    }
    let t = Float::with_val(prec, t);
    match w {
        WeightSpec::Gaussian => {
            let e = Float::with_val(prec, -t.clone().square()).exp();
            Float::with_val(prec, rug::ops::Pow::pow(&t, k as u32)) * e
        }
        WeightSpec::Laguerre { alpha } => {
            if t.is_zero() {
                return Float::with_val(prec, 0);
            }
            let expo = Float::with_val(prec, k) + *alpha;
            (expo * Float::with_val(prec, t.ln_ref()) - &t).exp()
        }
    }
}

/// Moments `mu_0 .. mu_m` by the integration-by-parts forward recurrence.
///
/// Gaussian: `mu_{j+1} = (j mu_{j-1} - [x^j e^{-x^2}]_a^b) / 2`.
/// Laguerre: `mu_{j+1} = (j+1+alpha) mu_j - [x^{j+1+alpha} e^{-x}]_a^b`.
/// The recurrence runs with `2m + 10` guard digits; its last two entries are
/// checked against [`moment`] and the guard is doubled on disagreement.
pub fn moment_vector(w: &WeightSpec, win: &Window, m: usize, digits: u32) -> Result<Vec<Real>> {
    win.check_for(w)?;
    let out_prec = bits_for_digits(digits);
    let mut guard = 2 * m as u32 + 10;
    for _ in 0..4 {
        let d = digits + guard;
        let prec = bits_for_digits(d);
        let mut mu: Vec<Real> = Vec::with_capacity(m + 1);
        mu.push(moment(w, win, 0, d)?);
        match w {
            WeightSpec::Gaussian => {
                if m >= 1 {
                    let ea = w.endpoint_weight(win.a(), prec);
                    let eb = w.endpoint_weight(win.b(), prec);
                    mu.push((ea - eb) / 2u32);
                }
                for j in 1..m {
                    let edge = boundary_power(w, win.b(), j, prec) - boundary_power(w, win.a(), j, prec);
                    let next = (Float::with_val(prec, &mu[j - 1] * j as u32) - edge) / 2u32;
                    mu.push(next);
                }
            }
            WeightSpec::Laguerre { alpha } => {
                for j in 0..m {
                    let factor = Float::with_val(prec, j + 1) + *alpha;
                    let edge = boundary_power(w, win.a(), j + 1, prec) - boundary_power(w, win.b(), j + 1, prec);
                    let next = factor * &mu[j] + edge;
                    mu.push(next);
                }
            }
        }
        let mut ok = true;
        for j in m.saturating_sub(1)..=m {
            let direct = moment(w, win, j, digits)?;
            let diff = Float::with_val(prec, &mu[j] - &direct).abs();
            let scale = direct.clone().abs();
            if scale.is_zero() {
                ok &= log10_abs(&diff) < -f64::from(digits);
            } else {
                ok &= log10_abs(&diff) - log10_abs(&scale) < -(f64::from(digits) - 5.0);
            }
        }
        if ok {
            return Ok(mu.into_iter().map(|x| Float::with_val(out_prec, x)).collect());
        }
        guard *= 2;
    }
    Err(Error::NonConvergence(format!(
        "moment recurrence unstable on ({}, {}) up to order {m}",
        win.a_f64(),
        win.b_f64()
    )))
}

/// Norm `h_n` of the classical monic polynomial over the full support:
/// Hermite `sqrt(pi) n! / 2^n`, Laguerre `n! Gamma(n + alpha + 1)`.
pub fn whole_interval_norm(w: &WeightSpec, n: usize, digits: u32) -> Real {
    let prec = bits_for_digits(digits) + 16;
    let fact = Float::with_val(prec, Float::factorial(n as u32));
    let out = match w {
        WeightSpec::Gaussian => pi(prec).sqrt() * fact / Float::with_val(prec, Float::u_pow_u(2, n as u32)),
        WeightSpec::Laguerre { alpha } => {
            let g = (Float::with_val(prec, n + 1) + *alpha).gamma();
            fact * g
        }
    };
    Float::with_val(bits_for_digits(digits), out)
}

/// `ln h_n(I)` for the full support.
pub fn log_whole_interval_norm(w: &WeightSpec, n: usize, digits: u32) -> Real {
    let prec = bits_for_digits(digits) + 16;
    let ln_fact = Float::with_val(prec, n + 1).ln_gamma();
    let out = match w {
        WeightSpec::Gaussian => {
            pi(prec).sqrt().ln() + ln_fact - Float::with_val(prec, 2).ln() * n as u32
        }
        WeightSpec::Laguerre { alpha } => {
            ln_fact + (Float::with_val(prec, n + 1) + *alpha).ln_gamma()
        }
    };
    Float::with_val(bits_for_digits(digits), out)
}

/// `erf`-based mass of the Gaussian weight on the window (closed form).
pub fn gaussian_mass(win: &Window, digits: u32) -> Real {
    let prec = bits_for_digits(digits + 10);
    let diff = erf(&Float::with_val(prec, win.b()), digits + 10) - erf(&Float::with_val(prec, win.a()), digits + 10);
    Float::with_val(bits_for_digits(digits), diff * pi(prec).sqrt() / 2u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use rand::{Rng, SeedableRng};

    fn close(a: &Real, b: &Real, rel: f64) -> bool {
        let d = Float::with_val(a.prec().max(64), a - b).abs();
        let s = Float::with_val(64, b.abs_ref()).max(&Float::with_val(64, 1e-300));
        (d / s).to_f64() < rel
    }

    /// Composite Gauss–Legendre oracle for `int_a^b x^j w(x) dx` on a finite
    /// window, evaluated at twice the requested digits.
    fn quad_moment(w: &WeightSpec, a: f64, b: f64, j: u32, digits: u32) -> Real {
        let prec = bits_for_digits(2 * digits);
        let panels = ((b - a) / 0.5).ceil() as usize;
        let edges: Vec<Real> = (0..=panels)
            .map(|i| {
                let (fa, fb) = (Float::with_val(prec, a), Float::with_val(prec, b));
                let width = Float::with_val(prec, &fb - &fa);
                fa + width * i as u32 / panels as u32
            })
            .collect();
        let rule = quad::composite(&edges, 48, prec);
        rule.integrate(|x| Float::with_val(prec, rug::ops::Pow::pow(x, j)) * weight_at(w, x).unwrap())
    }

    #[test]
    fn weight_values() {
        let one = Float::with_val(200, 1);
        assert_eq!(weight_at(&WeightSpec::Gaussian, &Float::with_val(200, 0)).unwrap(), 1);
        let lw = weight_at(&WeightSpec::laguerre(2.0).unwrap(), &one).unwrap();
        assert!(close(&lw, &Float::with_val(200, -1).exp(), 1e-55));
        let g2 = weight_at(&WeightSpec::Gaussian, &Float::with_val(200, 2)).unwrap();
        assert!(close(&g2, &Float::with_val(200, -4).exp(), 1e-55));
        assert!(crate::numerics::format_real(&g2, 6).starts_with("1.83156"));
        let err = weight_at(&WeightSpec::laguerre(1.0).unwrap(), &Float::with_val(200, -1.0));
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn laguerre_alpha_must_be_positive() {
        assert!(WeightSpec::laguerre(0.0).is_err());
        assert!(WeightSpec::laguerre(-0.5).is_err());
        assert!(WeightSpec::laguerre(f64::NAN).is_err());
    }

    #[test]
    fn window_validation() {
        assert!(Window::from_f64(1.0, 1.0, 64).is_err());
        assert!(Window::from_f64(2.0, 1.0, 64).is_err());
        let w = Window::from_f64(-0.5, 3.0, 64).unwrap();
        assert!(w.check_for(&WeightSpec::laguerre(1.0).unwrap()).is_err());
        assert!(w.check_for(&WeightSpec::Gaussian).is_ok());
    }

    #[test]
    fn classical_moments() {
        let g = WeightSpec::Gaussian;
        let full = g.support(256);
        let m0 = moment(&g, &full, 0, 60).unwrap();
        assert!(close(&m0, &pi(256).sqrt(), 1e-58));
        let half = Window::from_f64(0.0, f64::INFINITY, 256).unwrap();
        let m1 = moment(&g, &half, 1, 60).unwrap();
        assert!(close(&m1, &Float::with_val(256, 0.5), 1e-58));
        let lag = WeightSpec::laguerre(1.0).unwrap();
        let m = moment(&lag, &lag.support(256), 0, 60).unwrap();
        assert!(close(&m, &Float::with_val(256, 1), 1e-58));
    }

    #[test]
    fn gaussian_moment_matches_quadrature() {
        let g = WeightSpec::Gaussian;
        let win = Window::from_f64(-1.0, 2.0, 256).unwrap();
        let got = moment(&g, &win, 4, 60).unwrap();
        let want = quad_moment(&g, -1.0, 2.0, 4, 60);
        assert!(close(&got, &want, 1e-55));
    }

    #[test]
    fn moment_vector_symmetric_window_has_zero_odd_moments() {
        let g = WeightSpec::Gaussian;
        let win = Window::from_f64(-1.7, 1.7, 256).unwrap();
        let mu = moment_vector(&g, &win, 9, 50).unwrap();
        for j in (1..=9).step_by(2) {
            assert!(mu[j].is_zero(), "mu_{j} = {}", mu[j]);
        }
    }

    #[test]
    fn moment_vector_matches_quadrature() {
        let g = WeightSpec::Gaussian;
        let win = Window::from_f64(-1.0, 2.0, 256).unwrap();
        let mu = moment_vector(&g, &win, 6, 60).unwrap();
        for (j, m) in mu.iter().enumerate() {
            let q = quad_moment(&g, -1.0, 2.0, j as u32, 60);
            assert!(close(m, &q, 1e-55), "j={j}");
        }
    }

    #[test]
    fn laguerre_full_moments_are_gamma_values() {
        let lag = WeightSpec::laguerre(1.0).unwrap();
        let mu = moment_vector(&lag, &lag.support(256), 3, 50).unwrap();
        for (m, want) in mu.iter().zip([1u32, 2, 6, 24]) {
            assert!(close(m, &Float::with_val(256, want), 1e-48));
        }
    }

    #[test]
    fn recurrence_agrees_with_quadrature_on_random_windows() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let digits = 40;
        for i in 0..20 {
            let (w, a, b) = if i % 2 == 0 {
                let a: f64 = rng.gen_range(-3.0..1.0);
                (WeightSpec::Gaussian, a, a + rng.gen_range(0.3..4.0))
            } else {
                let a: f64 = rng.gen_range(0.1..3.0);
                (WeightSpec::laguerre(rng.gen_range(0.5..3.0)).unwrap(), a, a + rng.gen_range(0.5..6.0))
            };
            let win = Window::from_f64(a, b, 256).unwrap();
            let mu = moment_vector(&w, &win, 12, digits).unwrap();
            for (j, m) in mu.iter().enumerate() {
                let q = quad_moment(&w, a, b, j as u32, digits);
                assert!(close(m, &q, 1e-20), "{w:?} ({a},{b}) j={j}");
            }
        }
    }

    #[test]
    fn enlarging_window_increases_mass() {
        let g = WeightSpec::Gaussian;
        let mut prev = Float::with_val(64, 0);
        for k in 1..8 {
            let r = 0.4 * f64::from(k);
            let m = moment(&g, &Window::from_f64(-r, r * 0.9, 256).unwrap(), 0, 40).unwrap();
            assert!(m > prev);
            prev = m;
        }
    }

    #[test]
    fn large_window_approaches_whole_line() {
        let g = WeightSpec::Gaussian;
        let win = Window::from_f64(-20.0, 20.0, 512).unwrap();
        let full = g.support(512);
        for j in 0..8 {
            let m = moment(&g, &win, j, 60).unwrap();
            let f = moment(&g, &full, j, 60).unwrap();
            if f.is_zero() {
                assert!(m.clone().abs() < Float::with_val(64, 1e-40));
            } else {
                assert!(close(&m, &f, 1e-40), "j={j}");
            }
        }
    }

    #[test]
    fn whole_interval_norms() {
        let g = WeightSpec::Gaussian;
        assert!(close(&whole_interval_norm(&g, 0, 50), &pi(200).sqrt(), 1e-48));
        let h3 = whole_interval_norm(&g, 3, 50);
        assert!(close(&h3, &(pi(200).sqrt() * 3u32 / 4u32), 1e-48));
        let lag = WeightSpec::laguerre(1.0).unwrap();
        assert!(close(&whole_interval_norm(&lag, 2, 50), &Float::with_val(200, 12), 1e-48));
        let ln = log_whole_interval_norm(&lag, 2, 50);
        assert!(close(&ln.exp(), &Float::with_val(200, 12), 1e-45));
    }

    #[test]
    fn mass_matches_erf_form() {
        let win = Window::from_f64(-1.0, 1.0, 256).unwrap();
        let m = moment(&WeightSpec::Gaussian, &win, 0, 50).unwrap();
        assert!(close(&m, &gaussian_mass(&win, 50), 1e-48));
    }
}
