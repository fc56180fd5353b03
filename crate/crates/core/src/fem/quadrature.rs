//! Quadrature on the reference triangle `{ξ, η ≥ 0, ξ + η ≤ 1}` and on
//! `[0, 1]`.

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    /// Reference coordinates (a single coordinate for line rules is stored
    /// in the first slot).
    pub points: Vec<[f64; 2]>,
    /// Weights; triangle rules sum to 1/2, line rules to 1.
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`, exact to degree `2n − 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { t } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (t * pn - pm) / (t * t - 1.0);
            let step = pn / dp;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - t);
        w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

/// Line rule on `[0, 1]` exact for polynomials of the given degree.
pub fn line_rule(degree: usize) -> Rule {
    let (x, w) = gauss_legendre(degree / 2 + 1);
    Rule { points: x.iter().map(|&t| [t, 0.0]).collect(), weights: w }
}

// Six-point rule of degree four, as barycentric orbits with weights summing to one.
const D4_ORBITS: [(f64, f64, f64); 2] = [
    (0.223381589678011, 0.108103018168070, 0.445948490915965),
    (0.109951743655322, 0.816847572980459, 0.091576213509771),
];

/// Triangle rule exact for polynomials of the given degree: the six-point
/// degree-4 rule up to degree 4, collapsed Gauss products beyond.
pub fn triangle_rule(degree: usize) -> Rule {
    if degree <= 4 {
        let mut points = Vec::with_capacity(6);
        let mut weights = Vec::with_capacity(6);
        for &(w, a, b) in &D4_ORBITS {
            for l in [[a, b, b], [b, a, b], [b, b, a]] {
                points.push([l[1], l[2]]);
                weights.push(0.5 * w);
            }
        }
        return Rule { points, weights };
    }
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (u, v) = (x[i], x[j]);
            points.push([u, v * (1.0 - u)]);
            weights.push(w[i] * w[j] * (1.0 - u));
        }
    }
    Rule { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn triangle_rules_integrate_monomials() {
        for deg in [1, 2, 4, 6, 8, 10] {
            let r = triangle_rule(deg);
            for a in 0..=deg as u32 {
                for b in 0..=(deg as u32 - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let q: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    assert!((q - exact).abs() < 1e-14, "deg {deg} x^{a} y^{b}: {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn line_rules_integrate_monomials() {
        for deg in 0..12 {
            let r = line_rule(deg);
            for a in 0..=deg as i32 {
                let q: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0].powi(a)).sum();
                assert!((q - 1.0 / (a as f64 + 1.0)).abs() < 1e-14);
            }
        }
    }
}
