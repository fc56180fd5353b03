//! Rational filters with simple poles,
//!
//! ```text
//! r(z) = ω₀ + Σⱼ ωⱼ / (zⱼ − z),
//! ```
//!
//! their construction from trapezoidal quadrature on a circle (Butterworth
//! filters) or as a Cayley transform, inverse images `r⁻¹(μ)`, and the check
//! that a filter separates a cluster from the rest of a spectrum.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::linalg::{self, CMatrix};
use crate::{c64, Error, Result, I};

/// Distance below which an evaluation point counts as a pole.
pub const POLE_EVAL_TOL: f64 = 1e-14;
/// Default residual tolerance for inverse images.
pub const DEFAULT_TOL_ROOT: f64 = 1e-8;
/// Relative radius within which a root is identified with a pole.
pub const POLE_MATCH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub z: c64,
    pub weight: c64,
}

impl Pole {
    pub fn new(z: c64, weight: c64) -> Self {
        Self { z, weight }
    }
}

/// `r(z) = ω₀ + Σⱼ ωⱼ/(zⱼ − z)` with pairwise distinct poles.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFilter {
    omega0: c64,
    poles: Vec<Pole>,
}

impl RationalFilter {
    pub fn new(omega0: c64, poles: Vec<Pole>) -> Result<Self> {
        if poles.is_empty() {
            return Err(Error::InvalidFilter("a filter needs at least one pole".into()));
        }
        let finite = |c: c64| c.re.is_finite() && c.im.is_finite();
        if !finite(omega0) || poles.iter().any(|p| !finite(p.z) || !finite(p.weight)) {
            return Err(Error::InvalidFilter("non-finite coefficient".into()));
        }
        for (i, a) in poles.iter().enumerate() {
            for b in &poles[..i] {
                if a.z == b.z {
                    return Err(Error::InvalidFilter(format!(
                        "repeated pole {} (only simple poles are supported)",
                        a.z
                    )));
                }
            }
        }
        Ok(Self { omega0, poles })
    }

    pub fn omega0(&self) -> c64 {
        self.omega0
    }

    pub fn poles(&self) -> &[Pole] {
        &self.poles
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn eval(&self, z: c64) -> Result<c64> {
        let mut acc = self.omega0;
        for p in &self.poles {
            let d = p.z - z;
            if d.norm() < POLE_EVAL_TOL {
                return Err(Error::PoleEvaluation { pole: p.z, distance: d.norm() });
            }
            acc += p.weight / d;
        }
        Ok(acc)
    }

    /// Trapezoidal rule with `N` nodes applied to the Cauchy integral over
    /// the circle `O + Rφe^{iθ}`: `ωⱼ = ŵ^{j−1}Rφ/N`, `zⱼ = Rφŵ^{j−1} + O`,
    /// `ŵ = e^{2πi/N}`.
    pub fn butterworth(contour: &ContourCircle) -> Self {
        let n = contour.nquad;
        let rphi = contour.phase * contour.radius;
        let poles = (0..n)
            .map(|j| {
                let root = c64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64);
                Pole::new(rphi * root + contour.center, root * rphi / n as f64)
            })
            .collect();
        Self { omega0: c64::new(0.0, 0.0), poles }
    }

    /// `r(z) = (z − i)/(z + i) = 1 − 2i/(z + i)`.
    pub fn cayley() -> Self {
        // 1 − 2i/(z + i) = 1 + 2i/(−i − z)
        Self { omega0: c64::new(1.0, 0.0), poles: vec![Pole::new(-I, 2.0 * I)] }
    }

    /// Coefficients (ascending powers) of `p(z) − μ q(z)` where
    /// `q(z) = Πⱼ(zⱼ − z)` and `r = p/q`.
    pub fn shifted_numerator(&self, mu: c64) -> Vec<c64> {
        let n = self.poles.len();
        let mut out = vec![c64::new(0.0, 0.0); n + 1];
        let q = poly_from_factors(self.poles.iter().map(|p| p.z));
        for (o, c) in out.iter_mut().zip(&q) {
            *o += (self.omega0 - mu) * c;
        }
        for (j, pj) in self.poles.iter().enumerate() {
            let others = poly_from_factors(
                self.poles.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, p)| p.z),
            );
            for (o, c) in out.iter_mut().zip(&others) {
                *o += pj.weight * c;
            }
        }
        out
    }

    /// `r⁻¹(μ)`: roots of `p − μq` with roots at poles cancelled.
    pub fn inverse_image(&self, mu: c64, tol_root: f64) -> Result<InverseImage> {
        let coeffs = self.shifted_numerator(mu);
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let lead = coeffs[coeffs.len() - 1];
        if lead.norm() <= 1e-14 * scale.max(1.0) || (self.omega0 - mu).norm() <= 1e-14 {
            return Err(Error::DegenerateFilter { mu });
        }
        let mut roots = polynomial_roots(&coeffs)?;

        let mut cancelled = 0;
        for p in &self.poles {
            let radius = POLE_MATCH_TOL * (1.0 + p.z.norm());
            if let Some((idx, d)) = roots
                .iter()
                .enumerate()
                .map(|(i, r)| (i, (r - p.z).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
            {
                if d <= radius {
                    roots.remove(idx);
                    cancelled += 1;
                }
            }
        }

        let residuals: Vec<f64> = roots
            .iter()
            .map(|&r| self.eval(r).map(|v| (v - mu).norm()).unwrap_or(f64::INFINITY))
            .collect();
        if residuals.iter().any(|&res| !(res < tol_root * (1.0 + mu.norm()))) {
            return Err(Error::RootFinding { residuals });
        }
        Ok(InverseImage { mu, roots, cancelled })
    }

    /// Checks that `ω₀ ∉ r(Λ)` and that every inverse image of a mapped
    /// cluster value which lies in the spectrum lies in the cluster.
    pub fn check_separation(
        &self,
        cluster: &[c64],
        spectrum: &[c64],
        tol: f64,
    ) -> Result<SeparationReport> {
        let near = |a: c64, set: &[c64]| set.iter().any(|&s| (a - s).norm() < tol);
        if let Some(&c) = cluster.iter().find(|&&c| !near(c, spectrum)) {
            return Err(Error::DimensionMismatch(format!(
                "cluster point {c} is not in the spectrum"
            )));
        }
        let mapped: Vec<c64> = cluster.iter().map(|&c| self.eval(c)).collect::<Result<_>>()?;
        let omega0_in_image = near(self.omega0, &mapped);
        let mut violations = Vec::new();
        if !omega0_in_image {
            for &mu in &mapped {
                let inv = self.inverse_image(mu, DEFAULT_TOL_ROOT)?;
                for &root in &inv.roots {
                    if near(root, spectrum) && !near(root, cluster) {
                        violations.push(Violation { mu, preimage: root });
                    }
                }
            }
        }
        Ok(SeparationReport {
            holds: !omega0_in_image && violations.is_empty(),
            mapped,
            omega0_in_image,
            violations,
        })
    }

    /// Text form: `omega0 <re> <im>` followed by `pole <zre> <zim> <wre> <wim>`
    /// lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "omega0 {:e} {:e}", self.omega0.re, self.omega0.im);
        for p in &self.poles {
            let _ = writeln!(
                s,
                "pole {:e} {:e} {:e} {:e}",
                p.z.re, p.z.im, p.weight.re, p.weight.im
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut omega0 = None;
        let mut poles = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { line: lineno + 1, message };
            let mut parts = line.split_whitespace();
            let tag = parts.next().unwrap_or_default();
            let nums: Vec<f64> = parts
                .map(|t| t.parse::<f64>().map_err(|e| err(format!("{t:?}: {e}"))))
                .collect::<Result<_>>()?;
            match (tag, nums.as_slice()) {
                ("omega0", &[re, im]) => {
                    if omega0.replace(c64::new(re, im)).is_some() {
                        return Err(err("duplicate omega0 line".into()));
                    }
                }
                ("pole", &[zr, zi, wr, wi]) => {
                    poles.push(Pole::new(c64::new(zr, zi), c64::new(wr, wi)))
                }
                _ => return Err(err(format!("unrecognised line {line:?}"))),
            }
        }
        let omega0 = omega0.ok_or(Error::Parse { line: 0, message: "missing omega0 line".into() })?;
        Self::new(omega0, poles)
    }
}

/// Circle `{O + Rφe^{iθ}}` with an `N`-point trapezoidal rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourCircle {
    pub center: c64,
    pub radius: f64,
    pub phase: c64,
    pub nquad: usize,
}

impl ContourCircle {
    /// Circle with the conventional phase `φ = e^{iπ/N}`.
    pub fn new(center: c64, radius: f64, nquad: usize) -> Result<Self> {
        if nquad < 2 {
            return Err(Error::InvalidFilter(format!("nquad = {nquad} < 2")));
        }
        Self::with_phase(center, radius, c64::from_polar(1.0, PI / nquad as f64), nquad)
    }

    /// `φ = sign · e^{iπ/N}` with `sign = ±1`.
    pub fn with_phase_sign(center: c64, radius: f64, nquad: usize, negative: bool) -> Result<Self> {
        let c = Self::new(center, radius, nquad)?;
        Ok(if negative { Self { phase: -c.phase, ..c } } else { c })
    }

    pub fn with_phase(center: c64, radius: f64, phase: c64, nquad: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidFilter(format!("radius {radius} must be positive")));
        }
        if (phase.norm() - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidFilter(format!("|phase| = {} != 1", phase.norm())));
        }
        if nquad < 2 {
            return Err(Error::InvalidFilter(format!("nquad = {nquad} < 2")));
        }
        Ok(Self { center, radius, phase, nquad })
    }

    /// Whether `z` lies in the closed disk enlarged by `margin · R`.
    pub fn contains(&self, z: c64, margin: f64) -> bool {
        (z - self.center).norm() <= self.radius * (1.0 + margin)
    }

    /// Quadrature nodes `O + Rφŵ^j`.
    pub fn nodes(&self) -> Vec<c64> {
        (0..self.nquad)
            .map(|j| {
                self.center
                    + self.phase * self.radius * c64::from_polar(1.0, 2.0 * PI * j as f64 / self.nquad as f64)
            })
            .collect()
    }
}

/// Roots of `p − μq`, excluding those cancelled against a pole.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseImage {
    pub mu: c64,
    pub roots: Vec<c64>,
    /// Roots removed because they coincide with a pole.
    pub cancelled: usize,
}

impl InverseImage {
    /// Roots merged within `tol` (multiple roots collapse to one point).
    pub fn distinct_roots(&self, tol: f64) -> Vec<c64> {
        let mut out: Vec<c64> = Vec::new();
        for &r in &self.roots {
            if !out.iter().any(|&o| (o - r).norm() <= tol * (1.0 + r.norm())) {
                out.push(r);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub mu: c64,
    pub preimage: c64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    pub holds: bool,
    /// `r(Λ)`, in cluster order.
    pub mapped: Vec<c64>,
    pub omega0_in_image: bool,
    /// Spectrum points outside the cluster that map onto `r(Λ)`.
    pub violations: Vec<Violation>,
}

/// Coefficients (ascending) of `Π (a − z)`.
fn poly_from_factors(roots: impl Iterator<Item = c64>) -> Vec<c64> {
    let mut poly = vec![c64::new(1.0, 0.0)];
    for a in roots {
        let mut next = vec![c64::new(0.0, 0.0); poly.len() + 1];
        for (k, &c) in poly.iter().enumerate() {
            next[k] += a * c;
            next[k + 1] -= c;
        }
        poly = next;
    }
    poly
}

fn horner(coeffs: &[c64], z: c64) -> (c64, c64) {
    let mut p = c64::new(0.0, 0.0);
    let mut dp = c64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Roots of a polynomial with nonzero leading coefficient, via companion
/// matrix eigenvalues followed by a few guarded Newton steps.
pub fn polynomial_roots(coeffs: &[c64]) -> Result<Vec<c64>> {
    let deg = coeffs.len().saturating_sub(1);
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[deg];
    let mut companion = CMatrix::zeros(deg, deg);
    for i in 1..deg {
        companion[(i, i - 1)] = c64::new(1.0, 0.0);
    }
    for i in 0..deg {
        companion[(i, deg - 1)] = -coeffs[i] / lead;
    }
    let mut roots = linalg::eigenvalues(&companion)?;
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner(coeffs, *r);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            let candidate = *r - step;
            if horner(coeffs, candidate).0.norm() < p.norm() {
                *r = candidate;
            } else {
                break;
            }
        }
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inverse_quadratic() -> RationalFilter {
        // −1/(z² + 1) = (−i/2)/(i − z) + (i/2)/(−i − z)
        RationalFilter::new(
            c64::new(0.0, 0.0),
            vec![Pole::new(I, -0.5 * I), Pole::new(-I, 0.5 * I)],
        )
        .unwrap()
    }

    fn close(a: c64, b: c64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    fn sorted(mut v: Vec<c64>) -> Vec<c64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn eval_inverse_quadratic_at_half() {
        let r = inverse_quadratic();
        assert!(close(r.eval(c64::from(0.5)).unwrap(), c64::from(-0.8), 1e-15));
    }

    #[test]
    fn eval_cayley() {
        let r = RationalFilter::cayley();
        assert!(close(r.eval(c64::new(10.0, -1.0)).unwrap(), c64::new(5.0, -1.0) / 5.0, 1e-15));
        assert!(close(r.eval(c64::new(10.0, 1.0)).unwrap(), c64::new(25.0, -5.0) / 26.0, 1e-15));
        assert!(close(r.eval(c64::from(0.0)).unwrap(), c64::from(-1.0), 1e-15));
        assert!(close(r.eval(I).unwrap(), c64::from(0.0), 1e-15));
    }

    #[test]
    fn constant_filter() {
        let r = RationalFilter::new(c64::from(3.0), vec![Pole::new(c64::from(1.0), c64::from(0.0))])
            .unwrap();
        assert_eq!(r.eval(c64::new(-4.0, 2.0)).unwrap(), c64::from(3.0));
    }

    #[test]
    fn eval_at_pole_is_an_error() {
        let r = inverse_quadratic();
        assert!(matches!(r.eval(I), Err(Error::PoleEvaluation { .. })));
    }

    #[test]
    fn invalid_filters_rejected() {
        assert!(RationalFilter::new(c64::from(0.0), vec![]).is_err());
        let p = Pole::new(c64::from(1.0), c64::from(1.0));
        let err = RationalFilter::new(c64::from(0.0), vec![p, p]).unwrap_err();
        assert!(err.to_string().contains("simple poles"));
    }

    #[test]
    fn butterworth_two_point_nodes() {
        let c = ContourCircle::with_phase(c64::from(0.0), 1.0, I, 2).unwrap();
        let r = RationalFilter::butterworth(&c);
        let p = r.poles();
        assert!(close(p[0].z, I, 1e-15) && close(p[1].z, -I, 1e-15));
        assert!(close(p[0].weight, 0.5 * I, 1e-15) && close(p[1].weight, -0.5 * I, 1e-15));
        // the closed form with this phase is +1/(1 + z²)
        assert!(close(r.eval(c64::from(0.5)).unwrap(), c64::from(0.8), 1e-15));
    }

    #[test]
    fn butterworth_is_one_at_center() {
        for phase in [c64::from(1.0), I, c64::from_polar(1.0, 0.7)] {
            let c = ContourCircle::with_phase(c64::from(0.0), 1.0, phase, 4).unwrap();
            let r = RationalFilter::butterworth(&c);
            assert!(close(r.eval(c64::from(0.0)).unwrap(), c64::from(1.0), 1e-14));
        }
    }

    #[test]
    fn butterworth_matches_closed_form() {
        let phase = c64::from_polar(1.0, PI / 8.0);
        let c = ContourCircle::with_phase(c64::from(2.0), 3.0, phase, 8).unwrap();
        let r = RationalFilter::butterworth(&c);
        let z = c64::new(2.0, 1.5);
        let closed = 1.0 / (1.0 - ((z - c.center) / (phase * c.radius)).powu(8));
        assert!(close(r.eval(z).unwrap(), closed, 1e-12));
    }

    #[test]
    fn default_phase_and_sign() {
        let c = ContourCircle::new(c64::from(0.0), 1.0, 4).unwrap();
        assert!(close(c.phase, c64::from_polar(1.0, PI / 4.0), 1e-15));
        let n = ContourCircle::with_phase_sign(c64::from(0.0), 1.0, 4, true).unwrap();
        assert!(close(n.phase, -c.phase, 1e-15));
        assert!(ContourCircle::new(c64::from(0.0), 0.0, 4).is_err());
        assert!(ContourCircle::new(c64::from(0.0), 1.0, 1).is_err());
        assert!(ContourCircle::with_phase(c64::from(0.0), 1.0, c64::from(1.1), 4).is_err());
    }

    #[test]
    fn inverse_image_inverse_quadratic() {
        let inv = inverse_quadratic().inverse_image(c64::from(-0.8), DEFAULT_TOL_ROOT).unwrap();
        let roots = sorted(inv.roots);
        assert_eq!(roots.len(), 2);
        assert!(close(roots[0], c64::from(-0.5), 1e-12));
        assert!(close(roots[1], c64::from(0.5), 1e-12));
        assert_eq!(inv.cancelled, 0);
    }

    #[test]
    fn inverse_image_cayley_is_singleton() {
        let r = RationalFilter::cayley();
        let lam = c64::new(3.0, 2.0);
        let inv = r.inverse_image(r.eval(lam).unwrap(), DEFAULT_TOL_ROOT).unwrap();
        assert_eq!(inv.roots.len(), 1);
        assert!(close(inv.roots[0], lam, 1e-12));
    }

    #[test]
    fn inverse_image_butterworth_rotations() {
        let c = ContourCircle::new(c64::from(0.0), 1.0, 4).unwrap();
        let r = RationalFilter::butterworth(&c);
        let inv = r.inverse_image(r.eval(c64::from(0.3)).unwrap(), DEFAULT_TOL_ROOT).unwrap();
        assert_eq!(inv.roots.len(), 4);
        for l in 0..4 {
            let zeta = 0.3 * c64::from_polar(1.0, 2.0 * PI * l as f64 / 4.0);
            assert!(inv.roots.iter().any(|&x| close(x, zeta, 1e-10)), "missing {zeta}");
        }
    }

    #[test]
    fn inverse_image_at_omega0_is_degenerate() {
        let r = RationalFilter::cayley();
        assert!(matches!(
            r.inverse_image(c64::from(1.0), DEFAULT_TOL_ROOT),
            Err(Error::DegenerateFilter { .. })
        ));
    }

    #[test]
    fn zero_weight_pole_cancels() {
        // r(z) = 1/(1 − z) + 0/(2 − z): the second pole is a removable one.
        let r = RationalFilter::new(
            c64::from(0.0),
            vec![
                Pole::new(c64::from(1.0), c64::from(1.0)),
                Pole::new(c64::from(2.0), c64::from(0.0)),
            ],
        )
        .unwrap();
        let inv = r.inverse_image(c64::from(0.5), DEFAULT_TOL_ROOT).unwrap();
        assert_eq!(inv.cancelled, 1);
        assert_eq!(inv.roots.len(), 1);
        assert!(close(inv.roots[0], c64::from(-1.0), 1e-12));
    }

    #[test]
    fn separation_examples() {
        let rep = inverse_quadratic()
            .check_separation(&[c64::from(-0.5), c64::from(0.5)], &[c64::from(-0.5), c64::from(0.5)], 1e-8)
            .unwrap();
        assert!(rep.holds);

        let cl = [c64::new(10.0, -1.0), c64::new(10.0, 1.0)];
        assert!(RationalFilter::cayley().check_separation(&cl, &cl, 1e-8).unwrap().holds);

        let c = ContourCircle::new(c64::from(0.0), 1.0, 4).unwrap();
        let rep = RationalFilter::butterworth(&c)
            .check_separation(&[c64::from(0.3)], &[c64::from(0.3), c64::new(0.0, 0.3)], 1e-8)
            .unwrap();
        assert!(!rep.holds);
        assert_eq!(rep.violations.len(), 1);
        assert!(close(rep.violations[0].preimage, c64::new(0.0, 0.3), 1e-10));
    }

    #[test]
    fn omega0_in_image_fails_separation() {
        // r(z) = 1/(1 − z) + 1/(−1 − z) vanishes at 0 = ω₀
        let r = RationalFilter::new(
            c64::from(0.0),
            vec![
                Pole::new(c64::from(1.0), c64::from(1.0)),
                Pole::new(c64::from(-1.0), c64::from(1.0)),
            ],
        )
        .unwrap();
        let rep = r.check_separation(&[c64::from(0.0)], &[c64::from(0.0)], 1e-10).unwrap();
        assert!(rep.omega0_in_image && !rep.holds);
    }

    #[test]
    fn text_round_trip_and_errors() {
        let c = ContourCircle::new(c64::new(2.0, 1.0), 3.0, 8).unwrap();
        let r = RationalFilter::butterworth(&c);
        assert_eq!(RationalFilter::from_text(&r.to_text()).unwrap(), r);
        assert!(RationalFilter::from_text("pole 1 0 1 0\n").is_err());
        let e = RationalFilter::from_text("omega0 0 0\npole 1 x 1 0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(RationalFilter::from_text("omega0 0 0\npole 1 0 1 0\npole 1 0 2 0\n").is_err());
    }
}
