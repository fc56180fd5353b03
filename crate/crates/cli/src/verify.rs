//! Matrix-level checks of filters, the mapping lemma and Riesz projectors.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, Result};
use clustergap::dense_oracle::{
    apply_filter, examples, random_jordan_instance, riesz_projector, verify_mapping_lemma, DenseOperator,
    DEFAULT_RANK_TOL,
};
use clustergap::filters::{ContourCircle, RationalFilter, DEFAULT_TOL_ROOT};
use clustergap::linalg::{self, CMatrix, CVector};
use clustergap::{c64, I};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CASES: &[&str] = &["3x3", "cayley", "butterworth", "lemma", "riesz"];

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub cases: Vec<String>,
    pub seed: u64,
    /// Random instances for the mapping lemma check.
    pub random: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { cases: CASES.iter().map(|s| s.to_string()).collect(), seed: 0, random: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn fmt_matrix(m: &CMatrix) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:>10.6}{:+.6}i", m[(i, j)].re, m[(i, j)].im)).collect();
        let _ = writeln!(s, "  [{}]", row.join("  "));
    }
    s
}

/// `r(A)` for the Jordan matrix `diag(−1/2, J₂(1/2))` and `r(z) = −1/(z² + 1)`.
fn check_3x3() -> Result<(bool, String)> {
    let a = examples::jordan_3x3();
    let r = examples::inverse_quadratic();
    let ra = apply_filter(&a, &r)?;
    let mut want = CMatrix::identity(3, 3) * c64::from(-0.8);
    want[(1, 2)] = c64::from(16.0 / 25.0);
    let err = (ra.matrix() - &want).iter().map(|e| e.norm()).fold(0.0, f64::max);
    let mut roots = r.inverse_image(c64::from(-0.8), DEFAULT_TOL_ROOT)?.roots;
    roots.sort_by(|x, y| x.re.total_cmp(&y.re));
    let root_err = if roots.len() == 2 {
        (roots[0] + 0.5).norm().max((roots[1] - 0.5).norm())
    } else {
        f64::INFINITY
    };
    let shown: Vec<String> = roots.iter().map(|z| format!("{:.6}{:+.6}i", z.re, z.im)).collect();
    let mut detail = format!("r(A) =\n{}", fmt_matrix(ra.matrix()));
    let _ = write!(
        detail,
        "  max entry error {err:.2e}; inverse image of -4/5: [{}] (error {root_err:.2e})",
        shown.join(", ")
    );
    Ok((err < 1e-12 && root_err < 1e-10, detail))
}

/// Cayley values and the off-diagonal entry `r'(10 + i)` of `r(A)`.
fn check_cayley() -> Result<(bool, String)> {
    let r = RationalFilter::cayley();
    let v1 = r.eval(c64::new(10.0, -1.0))?;
    let v2 = r.eval(c64::new(10.0, 1.0))?;
    let e1 = (v1 - c64::new(5.0, -1.0) / 5.0).norm();
    let e2 = (v2 - c64::new(25.0, -5.0) / 26.0).norm();
    let ra = apply_filter(&examples::cayley_3x3(), &r)?;
    // r(z) = 1 − 2i/(z + i), so r'(z) = 2i/(z + i)²
    let lam = c64::new(10.0, 1.0);
    let deriv = 2.0 * I / ((lam + I) * (lam + I));
    let e3 = (ra.matrix()[(1, 2)] - deriv).norm();
    let detail = format!(
        "r(10-i) = {v1} (error {e1:.2e}); r(10+i) = {v2} (error {e2:.2e}); r(A)[2,3] = {} vs r'(10+i) = {deriv} (error {e3:.2e})",
        ra.matrix()[(1, 2)]
    );
    Ok((e1 < 1e-12 && e2 < 1e-12 && e3 < 1e-12, detail))
}

fn check_butterworth(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in [2, 4, 8] {
        for o in [c64::from(0.0), c64::new(2.0, 1.0)] {
            for radius in [1.0, 3.0] {
                let c = ContourCircle::new(o, radius, n)?;
                let r = RationalFilter::butterworth(&c);
                let mut done = 0;
                while done < 100 {
                    let z = o + c64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)) * radius;
                    if r.poles().iter().any(|p| (p.z - z).norm() < 1e-6) {
                        continue;
                    }
                    let v = r.eval(z)?;
                    let closed = 1.0 / (1.0 - ((z - o) / (c.phase * radius)).powu(n as u32));
                    worst = worst.max((v - closed).norm() / (1.0 + v.norm()));
                    done += 1;
                }
            }
        }
    }
    let c = ContourCircle::new(c64::new(2.0, 1.0), 3.0, 8)?;
    let r = RationalFilter::butterworth(&c);
    let mut smallest = f64::INFINITY;
    for _ in 0..1000 {
        let z = c.center + c64::from_polar(rng.random_range(0.0..0.999) * c.radius, rng.random_range(0.0..2.0 * PI));
        smallest = smallest.min(r.eval(z)?.norm());
    }
    let detail = format!("worst relative closed-form deviation {worst:.2e}; min |r| inside the disk {smallest:.4}");
    Ok((worst < 1e-10 && smallest > 0.5, detail))
}

fn check_lemma(rng: &mut ChaCha8Rng, count: usize) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    for _ in 0..count {
        let inst = random_jordan_instance(rng, 8);
        let check = verify_mapping_lemma(&inst.operator, &inst.filter, inst.mu, DEFAULT_RANK_TOL)?;
        worst = worst.max(check.gap);
        if !check.multiplicities_match() {
            mismatches += 1;
        }
    }
    let detail = format!("{count} instances: worst gap {worst:.2e}, multiplicity mismatches {mismatches}");
    Ok((worst < 1e-7 && mismatches == 0, detail))
}

/// Normal matrix with three eigenvalues within `R/2` of the centre and the
/// rest at distance at least `3R/2`, with its exact spectral projector.
pub fn random_normal_with_cluster(rng: &mut ChaCha8Rng, n: usize) -> (DenseOperator, CMatrix, ContourCircle) {
    let center = c64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let radius = rng.random_range(0.5..2.0);
    let mut eig = Vec::with_capacity(n);
    for k in 0..n {
        let rho = if k < 3 { rng.random_range(0.0..0.5) } else { rng.random_range(1.5..4.0) };
        eig.push(center + c64::from_polar(rho * radius, rng.random_range(0.0..2.0 * PI)));
    }
    let u = linalg::random_unitary(rng, n);
    let d = CMatrix::from_diagonal(&CVector::from_column_slice(&eig));
    let mut mask = CMatrix::zeros(n, n);
    for i in 0..3 {
        mask[(i, i)] = c64::from(1.0);
    }
    let a = &u * d * u.adjoint();
    let p = &u * mask * u.adjoint();
    let contour = ContourCircle::new(center, radius, 128).expect("valid contour");
    (DenseOperator::new(a).expect("finite matrix"), p, contour)
}

fn check_riesz(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (mut worst_p, mut worst_tr): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let n = rng.random_range(4..12);
        let (a, exact, contour) = random_normal_with_cluster(rng, n);
        let p = riesz_projector(&a, &contour)?.projector;
        worst_p = worst_p.max((&p - &exact).norm());
        worst_tr = worst_tr.max((p.trace() - c64::from(3.0)).norm());
    }
    let detail = format!("20 matrices: worst projector error {worst_p:.2e}, worst trace error {worst_tr:.2e}");
    Ok((worst_p < 1e-8 && worst_tr < 1e-8, detail))
}

/// Runs the selected checks; each random check draws from its own stream
/// seeded by `seed`, so the outcome does not depend on the selection.
pub fn run_checks(opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for (k, name) in opts.cases.iter().enumerate() {
        if opts.cases[..k].contains(name) {
            continue;
        }
        let Some(idx) = CASES.iter().position(|c| c == name) else {
            bail!("unknown check `{name}`; known checks: {}", CASES.join(", "));
        };
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(idx as u64));
        let start = Instant::now();
        let result = match name.as_str() {
            "3x3" => check_3x3(),
            "cayley" => check_cayley(),
            "butterworth" => check_butterworth(&mut rng),
            "lemma" => check_lemma(&mut rng, opts.random),
            _ => check_riesz(&mut rng),
        };
        let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
        out.push(CheckOutcome { name: name.clone(), passed, detail, seconds: start.elapsed().as_secs_f64() });
    }
    Ok(out)
}
