//! Gauss–Legendre quadrature at arbitrary precision.
//!
//! Nodes on `[-1, 1]` are computed by Newton iteration on the Legendre
//! recurrence and memoized per `(count, precision)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rug::Float;

use crate::numerics::Real;

/// A quadrature rule: `sum_i weights[i] * f(nodes[i])`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<Real>,
    pub weights: Vec<Real>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F>(&self, mut f: F) -> Real
    where
        F: FnMut(&Real) -> Real,
    {
        let prec = self.weights.first().map_or(64, Float::prec);
        let mut acc = Float::with_val(prec, 0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(x) * w;
        }
        acc
    }

    /// Concatenates rules (panels) into one composite rule.
    pub fn concat(parts: Vec<Rule>) -> Rule {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for p in parts {
            nodes.extend(p.nodes);
            weights.extend(p.weights);
        }
        Rule { nodes, weights }
    }
}

type Cache = Mutex<HashMap<(usize, u32), Arc<Rule>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `count`-point Gauss–Legendre rule on `[-1, 1]` at `prec` bits.
pub fn gauss_legendre(count: usize, prec: u32) -> Arc<Rule> {
    assert!(count >= 1, "Gauss-Legendre rule needs at least one node");
    if let Some(rule) = cache().lock().expect("quadrature cache poisoned").get(&(count, prec)) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(compute_gauss_legendre(count, prec));
    cache()
        .lock()
        .expect("quadrature cache poisoned")
        .insert((count, prec), Arc::clone(&rule));
    rule
}

/// Legendre `P_n(x)` and `P_{n-1}(x)` by the three-term recurrence.
fn legendre_pair(n: usize, x: &Real) -> (Real, Real) {
    let prec = x.prec();
    let mut p_prev = Float::with_val(prec, 1);
    let mut p = x.clone();
    for k in 1..n {
        let k = k as u32;
        let next = (Float::with_val(prec, x * &p) * (2 * k + 1) - p_prev * k) / (k + 1);
        p_prev = std::mem::replace(&mut p, next);
    }
    (p, p_prev)
}

fn legendre_pair_f64(n: usize, x: f64) -> (f64, f64) {
    let (mut p_prev, mut p) = (1.0, x);
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0) * x * p - k * p_prev) / (k + 1.0);
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

fn compute_gauss_legendre(n: usize, prec: u32) -> Rule {
    let work = prec + 32;
    let half = n / 2;
    let mut pos_nodes = Vec::with_capacity(half + 1);
    let mut pos_weights = Vec::with_capacity(half + 1);
    let eps = Float::with_val(work, 1) >> (prec + 8);
    for i in 0..half {
        // i-th largest root.
        let theta = std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5);
        let mut xf = theta.cos();
        for _ in 0..3 {
            let (p, q) = legendre_pair_f64(n, xf);
            let dp = n as f64 * (xf * p - q) / (xf * xf - 1.0);
            xf -= p / dp;
        }
        let mut x = Float::with_val(work, xf);
        let mut dp;
        let mut iters = 0;
        loop {
            let (p, q) = legendre_pair(n, &x);
            let x2m1 = Float::with_val(work, x.square_ref()) - 1u32;
            dp = (Float::with_val(work, &x * &p) - q) * (n as u32) / x2m1;
            let dx = Float::with_val(work, &p / &dp);
            x -= &dx;
            iters += 1;
            if dx.abs() < eps || iters > 60 {
                break;
            }
        }
        let (p, q) = legendre_pair(n, &x);
        let x2m1 = Float::with_val(work, x.square_ref()) - 1u32;
        dp = (Float::with_val(work, &x * &p) - q) * (n as u32) / &x2m1;
        let one_minus = -x2m1;
        let w = Float::with_val(work, 2) / (one_minus * dp.square());
        pos_nodes.push(x);
        pos_weights.push(w);
    }
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (x, w) in pos_nodes.iter().zip(&pos_weights) {
        nodes.push(Float::with_val(prec, -x.clone()));
        weights.push(Float::with_val(prec, w));
    }
    if n % 2 == 1 {
        let zero = Float::with_val(work, 0);
        let (_, q) = legendre_pair(n, &zero);
        // P'_n(0) = n P_{n-1}(0) for odd n.
        let dp = q * (n as u32);
        nodes.push(Float::with_val(prec, 0));
        weights.push(Float::with_val(prec, Float::with_val(work, 2) / dp.square()));
    }
    for (x, w) in pos_nodes.iter().zip(&pos_weights).rev() {
        nodes.push(Float::with_val(prec, x));
        weights.push(Float::with_val(prec, w));
    }
    Rule { nodes, weights }
}

/// Gauss–Legendre rule mapped affinely onto `[lo, hi]`.
pub fn mapped(count: usize, lo: &Real, hi: &Real, prec: u32) -> Rule {
    let base = gauss_legendre(count, prec);
    let half = Float::with_val(prec, hi - lo) / 2u32;
    let mid = Float::with_val(prec, hi + lo) / 2u32;
    let nodes = base
        .nodes
        .iter()
        .map(|t| Float::with_val(prec, t * &half) + &mid)
        .collect();
    let weights = base.weights.iter().map(|w| Float::with_val(prec, w * &half)).collect();
    Rule { nodes, weights }
}

/// Composite rule over consecutive panel edges `edges[0] < edges[1] < ...`.
pub fn composite(edges: &[Real], per_panel: usize, prec: u32) -> Rule {
    Rule::concat(
        edges
            .windows(2)
            .map(|e| mapped(per_panel, &e[0], &e[1], prec))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{bits_for_digits, pi};
    use rug::ops::Pow;

    #[test]
    fn weights_sum_to_two_and_nodes_symmetric() {
        let prec = bits_for_digits(60);
        for n in [1usize, 2, 5, 16, 33] {
            let r = gauss_legendre(n, prec);
            let s = r.integrate(|_| Float::with_val(prec, 1));
            assert!(Float::with_val(prec, s - 2u32).abs() < Float::with_val(64, 1e-58));
            for i in 0..n {
                let sym = Float::with_val(prec, &r.nodes[i] + &r.nodes[n - 1 - i]);
                assert!(sym.abs() < Float::with_val(64, 1e-58));
            }
        }
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        let prec = bits_for_digits(50);
        let r = gauss_legendre(12, prec);
        // int_{-1}^{1} x^22 dx = 2/23
        let got = r.integrate(|x| Float::with_val(prec, x.clone().square()).pow(11u32));
        let want = Float::with_val(prec, 2) / 23u32;
        assert!(Float::with_val(prec, got - want).abs() < Float::with_val(64, 1e-48));
    }

    #[test]
    fn mapped_rule_integrates_gaussian() {
        let prec = bits_for_digits(50);
        let lo = Float::with_val(prec, -12);
        let hi = Float::with_val(prec, 12);
        let edges: Vec<Real> = (0..=12)
            .map(|i| Float::with_val(prec, &lo + Float::with_val(prec, 2 * i)))
            .collect();
        assert_eq!(edges.last().unwrap(), &hi);
        let r = composite(&edges, 40, prec);
        let got = r.integrate(|x| Float::with_val(prec, -x.clone().square()).exp());
        let want = pi(prec).sqrt();
        assert!(Float::with_val(prec, got - want).abs() < Float::with_val(64, 1e-45));
    }
}
