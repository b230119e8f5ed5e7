//! Gaussian quadrature rules and the bridge distribution.

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss-Hermite rule for the weight `exp(-x^2)` (Newton iterations on the
/// orthonormal recurrence).
pub fn gauss_hermite(n: usize) -> Rule {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    Rule { nodes: x, weights: w }
}

/// Rule for `E f(X)` with `X ~ N(0, 1)`. Nodes whose weight is below
/// `1e-30` are dropped.
pub fn standard_normal(n: usize) -> Rule {
    let gh = gauss_hermite(n);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (x, w) in gh.nodes.iter().zip(&gh.weights) {
        let w = w / PI.sqrt();
        if w > 1e-30 {
            nodes.push(x * std::f64::consts::SQRT_2);
            weights.push(w);
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Rule { nodes, weights }
}

/// Gauss-Legendre rule on (0, 1).
pub fn gauss_legendre_unit(n: usize) -> Rule {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    let nf = n as f64;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = 0.5 - 0.5 * z;
        x[n - 1 - i] = 0.5 + 0.5 * z;
        w[i] = 1.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    Rule { nodes: x, weights: w }
}

/// The bridge distribution with scale `phi` in (0, 1): if `Z` follows it,
/// `E[expit(a + Z)] = expit(phi * a)` for every real `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bridge {
    pub phi: f64,
}

impl Bridge {
    pub fn new(phi: f64) -> Self {
        assert!(phi > 0.0 && phi < 1.0, "bridge scale must lie in (0, 1)");
        Self { phi }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let a = self.phi * PI;
        ((a * u).sin() / (a * (1.0 - u)).sin()).ln() / self.phi
    }

    pub fn cdf(&self, b: f64) -> f64 {
        let a = self.phi * PI;
        let e = (self.phi * b).exp();
        if !e.is_finite() {
            return 1.0;
        }
        (e * a.sin()).atan2(1.0 + e * a.cos()) / a
    }

    pub fn variance(&self) -> f64 {
        PI * PI / 3.0 * (1.0 / (self.phi * self.phi) - 1.0)
    }

    /// Quadrature nodes and weights for `E f(Z)`.
    pub fn rule(&self, n: usize) -> Rule {
        let gl = gauss_legendre_unit(n);
        Rule {
            nodes: gl.nodes.iter().map(|&u| self.quantile(u)).collect(),
            weights: gl.weights,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::expit;

    #[test]
    fn hermite_integrates_gaussian_moments() {
        let r = standard_normal(101);
        assert!((r.integrate(|_| 1.0) - 1.0).abs() < 1e-12);
        assert!(r.integrate(|x| x).abs() < 1e-12);
        assert!((r.integrate(|x| x * x) - 1.0).abs() < 1e-10);
        assert!((r.integrate(|x| x.powi(4)) - 3.0).abs() < 1e-9);
        // E exp(X) = exp(1/2)
        assert!((r.integrate(f64::exp) - 0.5f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let r = gauss_legendre_unit(21);
        assert!((r.integrate(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((r.integrate(|x| x.powi(5)) - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn bridge_cdf_inverts_quantile() {
        let b = Bridge::new(0.85);
        for u in [0.001, 0.1, 0.37, 0.5, 0.8, 0.999] {
            assert!((b.cdf(b.quantile(u)) - u).abs() < 1e-12);
        }
        assert!(b.quantile(0.5).abs() < 1e-12);
    }

    #[test]
    fn bridge_marginalizes_the_logistic() {
        let b = Bridge::new(0.85);
        let rule = b.rule(101);
        for a in [-2.0, -0.3, 0.0, 0.9, 2.5] {
            let q = rule.integrate(|z| expit(a + z));
            assert!((q - expit(b.phi * a)).abs() < 1e-6, "a={a}: {q}");
        }
        let var = rule.integrate(|z| z * z);
        assert!((var - b.variance()).abs() / b.variance() < 1e-2);
    }
}
