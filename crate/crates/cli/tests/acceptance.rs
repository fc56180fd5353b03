//! Acceptance criteria 1 to 11. Prints one PASS/FAIL line per criterion and
//! exits nonzero if a criterion fails that is not listed in `KNOWN_FAILURES`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use clustergap::cluster_gap::{analytic_gap, estimate_cluster_gap, hausdorff, GapEstimate};
use clustergap::dense_oracle::{
    apply_filter, examples, random_jordan_instance, riesz_projector, verify_mapping_lemma, DEFAULT_RANK_TOL,
};
use clustergap::estimators::{FoslsEstimator, ResidualEstimator};
use clustergap::exec::Exec;
use clustergap::feast::{feast_iterate, ClusterResult, FeastOptions, ResolventBackend};
use clustergap::fem::{inner_product, CgResolvent, FoslsResolvent, InnerKind, LagrangeSpace, OperatorSpec};
use clustergap::filters::{ContourCircle, RationalFilter, DEFAULT_TOL_ROOT};
use clustergap::linalg::{self, CMatrix, CVector};
use clustergap::mesh::{lshape_polygon, TriMesh, LSHAPE_CORNER};
use clustergap::{c64, I};
use clustergap_cli::adapt::run_adapt;
use clustergap_cli::config::{Problem, RunConfig};
use clustergap_cli::verify::random_normal_with_cluster;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria whose stated value is inconsistent with the stated setup; they
/// are still checked and reported, but do not fail the run.
const KNOWN_FAILURES: &[usize] = &[2];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn sci(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", items.join(", "))
}

fn ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[0] / w[1]).collect()
}

fn c1() -> Outcome {
    let start = Instant::now();
    let ra = apply_filter(&examples::jordan_3x3(), &examples::inverse_quadratic()).unwrap();
    let mut want = CMatrix::identity(3, 3) * c64::from(-4.0 / 5.0);
    want[(1, 2)] = c64::from(16.0 / 25.0);
    let err = (ra.matrix() - &want).iter().map(|e| e.norm()).fold(0.0, f64::max);
    let inv = examples::inverse_quadratic().inverse_image(c64::from(-0.8), DEFAULT_TOL_ROOT).unwrap();
    let mut roots = inv.roots.clone();
    roots.sort_by(|a, b| a.re.total_cmp(&b.re));
    let root_err = if roots.len() == 2 { (roots[0] + 0.5).norm().max((roots[1] - 0.5).norm()) } else { f64::INFINITY };
    let t = start.elapsed().as_secs_f64();
    outcome(
        err < 1e-12 && root_err < 1e-10 && t < 1.0,
        format!("max |r(A) - expected| = {err:.1e}, inverse image error {root_err:.1e}, {t:.3} s"),
    )
}

fn c2() -> Outcome {
    let start = Instant::now();
    let r = RationalFilter::cayley();
    let e1 = (r.eval(c64::new(10.0, -1.0)).unwrap() - c64::new(5.0, -1.0) / 5.0).norm();
    let e2 = (r.eval(c64::new(10.0, 1.0)).unwrap() - c64::new(25.0, -5.0) / 26.0).norm();
    let entry = apply_filter(&examples::cayley_3x3(), &r).unwrap().matrix()[(1, 2)];
    let stated = c64::new(5.0, 507.0) / 676.0;
    let e3 = (entry - stated).norm();
    // For a Jordan block J₂(λ), r(J)[1, 2] = r'(λ); here r'(z) = 2i/(z + i)².
    let lam = c64::new(10.0, 1.0);
    let derivative = 2.0 * I / ((lam + I) * (lam + I));
    let e4 = (entry - derivative).norm();
    let t = start.elapsed().as_secs_f64();
    outcome(
        e1 < 1e-12 && e2 < 1e-12 && e3 < 1e-12 && t < 1.0,
        format!(
            "r(10-i) error {e1:.1e}, r(10+i) error {e2:.1e}, r(A)[2,3] = {entry:.6} vs stated (5+507i)/676 error {e3:.1e}; \
             vs r'(10+i) = (5+12i)/676 error {e4:.1e}; {t:.3} s"
        ),
    )
}

fn c3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst, mut smallest) = (0.0f64, f64::INFINITY);
    for n in [2usize, 4, 8] {
        for o in [c64::from(0.0), c64::new(2.0, 1.0)] {
            for radius in [1.0, 3.0] {
                let c = ContourCircle::new(o, radius, n).unwrap();
                let r = RationalFilter::butterworth(&c);
                let mut k = 0;
                while k < 100 {
                    let z = o + c64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)) * radius;
                    if r.poles().iter().any(|p| (p.z - z).norm() < 1e-6) {
                        continue;
                    }
                    let v = r.eval(z).unwrap();
                    let closed = 1.0 / (1.0 - ((z - o) / (c.phase * radius)).powi(n as i32));
                    worst = worst.max((v - closed).norm() / (1.0 + v.norm()));
                    k += 1;
                }
                for _ in 0..1000 {
                    let z = o + c64::from_polar(radius * rng.random::<f64>().sqrt() * (1.0 - 1e-9), rng.random_range(0.0..2.0 * PI));
                    smallest = smallest.min(r.eval(z).unwrap().norm());
                }
            }
        }
    }
    let t = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-10 && smallest > 0.5 && t < 1.0,
        format!("worst relative deviation {worst:.1e}, min |r| in disk {smallest:.4}, {t:.3} s"),
    )
}

fn c4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst, mut mismatches) = (0.0f64, 0);
    for _ in 0..200 {
        let inst = random_jordan_instance(&mut rng, 8);
        let check = verify_mapping_lemma(&inst.operator, &inst.filter, inst.mu, DEFAULT_RANK_TOL).unwrap();
        worst = worst.max(check.gap);
        mismatches += usize::from(!check.multiplicities_match());
    }
    let t = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-7 && mismatches == 0 && t < 30.0,
        format!("200 instances, worst gap {worst:.1e}, multiplicity mismatches {mismatches}, {t:.2} s"),
    )
}

fn c5() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut wp, mut wt) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let n = rng.random_range(4..=12);
        let (a, exact, contour) = random_normal_with_cluster(&mut rng, n);
        let p = riesz_projector(&a, &contour).unwrap().projector;
        wp = wp.max(linalg::spectral_norm(&(&p - &exact)));
        wt = wt.max((p.trace() - c64::from(3.0)).norm());
    }
    let t = start.elapsed().as_secs_f64();
    outcome(
        wp < 1e-8 && wt < 1e-8 && t < 5.0,
        format!("50 matrices, worst ||P - P_exact|| {wp:.1e}, worst trace error {wt:.1e}, {t:.2} s"),
    )
}

/// P2 cluster benchmark on the unit square at one mesh level.
struct Level {
    n: usize,
    res: Arc<CgResolvent>,
    cluster: ClusterResult,
    filter: RationalFilter,
}

fn benchmark_contour() -> ContourCircle {
    ContourCircle::new(c64::from(5.0 * PI * PI), 5.0, 4).unwrap()
}

fn levels() -> &'static (Vec<Level>, f64) {
    static LEVELS: OnceLock<(Vec<Level>, f64)> = OnceLock::new();
    LEVELS.get_or_init(|| {
        let start = Instant::now();
        let contour = benchmark_contour();
        let filter = RationalFilter::butterworth(&contour);
        let levels = [8, 16, 32]
            .iter()
            .map(|&n| {
                let space = LagrangeSpace::new(Arc::new(TriMesh::structured_square(n)), 2).unwrap();
                let res = Arc::new(CgResolvent::new(space, OperatorSpec::laplacian(), Exec::Parallel));
                let cluster = feast_iterate(res.as_ref(), &filter, &contour, &FeastOptions::for_multiplicity(2)).unwrap();
                Level { n, res, cluster, filter: filter.clone() }
            })
            .collect();
        (levels, start.elapsed().as_secs_f64())
    })
}

/// Gap to `span{sin(πx)sin(2πy), sin(2πx)sin(πy)}` in `H¹`.
fn exact_gap(level: &Level) -> f64 {
    let space = level.res.space();
    let modes = [(1.0, 2.0), (2.0, 1.0)];
    let mut cross = CMatrix::zeros(space.ndofs(), 2);
    for (k, &(a, b)) in modes.iter().enumerate() {
        let w = move |x: [f64; 2]| c64::from((a * PI * x[0]).sin() * (b * PI * x[1]).sin());
        let gw = move |x: [f64; 2]| {
            [
                c64::from(a * PI * (a * PI * x[0]).cos() * (b * PI * x[1]).sin()),
                c64::from(b * PI * (a * PI * x[0]).sin() * (b * PI * x[1]).cos()),
            ]
        };
        cross.set_column(k, &space.h1_functional(w, gw, 10));
    }
    let w_gram = CMatrix::identity(2, 2) * c64::from((1.0 + 5.0 * PI * PI) / 4.0);
    analytic_gap(&level.cluster.basis, |x: &CMatrix| level.res.apply_gram(x), &cross, &w_gram).unwrap()
}

fn residual_estimate(level: &Level) -> GapEstimate {
    let est = ResidualEstimator::new(level.res.clone(), &level.filter);
    estimate_cluster_gap(&level.cluster.basis, |x: &CMatrix| level.res.apply_gram(x), &est).unwrap()
}

fn c6() -> Outcome {
    let (levels, secs) = levels();
    let exact = [c64::from(5.0 * PI * PI)];
    let dims: Vec<usize> = levels.iter().map(|l| l.cluster.dim()).collect();
    let dist: Vec<f64> = levels.iter().map(|l| hausdorff(&l.cluster.ritz_values, &exact).unwrap()).collect();
    let gaps: Vec<f64> = levels.iter().map(exact_gap).collect();
    let (rd, rg) = (ratios(&dist), ratios(&gaps));
    let passed = dims.iter().all(|&d| d == 2) && rd.iter().all(|&r| r >= 8.0) && rg.iter().all(|&r| r >= 3.0) && *secs < 120.0;
    outcome(
        passed,
        format!(
            "h = 1/{:?}: dim {dims:?}, hausdorff {} (ratios {rd:.1?}), gap {} (ratios {rg:.2?}), {secs:.1} s",
            levels.iter().map(|l| l.n).collect::<Vec<_>>(),
            sci(&dist),
            sci(&gaps)
        ),
    )
}

fn c7() -> Outcome {
    let (levels, _) = levels();
    let ests: Vec<GapEstimate> = levels.iter().map(residual_estimate).collect();
    let eta: Vec<f64> = ests.iter().map(|e| e.eta_global).collect();
    let ratio: Vec<f64> = levels.iter().zip(&eta).map(|(l, e)| exact_gap(l) / e).collect();
    let spread = ratio.iter().copied().fold(0.0, f64::max) / ratio.iter().copied().fold(f64::INFINITY, f64::min);
    let consistency = ests.iter().map(|e| (e.eta_global.powi(2) - e.lambda_hat).abs() / e.lambda_hat).fold(0.0, f64::max);
    let monotone = eta.windows(2).all(|w| w[1] < w[0]);
    outcome(
        spread < 10.0 && monotone && consistency < 1e-8,
        format!("eta_global {}, gap/eta {ratio:.3?} (max/min {spread:.2}), max |eta^2 - lambda|/lambda {consistency:.1e}", sci(&eta)),
    )
}

fn c8() -> Outcome {
    let start = Instant::now();
    let space = LagrangeSpace::new(Arc::new(TriMesh::structured_square(6)), 1).unwrap();
    let res = CgResolvent::new(space, OperatorSpec::left_half(c64::new(0.0, 20.0)), Exec::Parallel);
    let n = res.dim();
    let a = res.apply_operator(&CMatrix::identity(n, n));
    let m = res.apply_mass(&CMatrix::identity(n, n));
    let mut eig = linalg::eigenvalues(&linalg::lu_solve(&m, &a).unwrap()).unwrap();
    eig.sort_by(|x, y| x.re.total_cmp(&y.re));
    let mut worst = 0.0f64;
    let mut found = Vec::new();
    for &target in &eig[..3] {
        let sep = eig.iter().filter(|&&l| l != target).map(|l| (l - target).norm()).fold(f64::INFINITY, f64::min);
        let contour = ContourCircle::new(target, 0.5 * sep, 8).unwrap();
        let filter = RationalFilter::butterworth(&contour);
        let cluster = feast_iterate(&res, &filter, &contour, &FeastOptions::for_multiplicity(1)).unwrap();
        let inside: Vec<c64> = eig.iter().copied().filter(|&l| contour.contains(l, 0.0)).collect();
        worst = worst.max(hausdorff(&cluster.ritz_values, &inside).unwrap() / (1.0 + target.norm()));
        found.push(cluster.ritz_values[0]);
    }
    let t = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-8 && t < 30.0,
        format!("three lowest eigenvalues {:?}, worst relative deviation {worst:.1e}, {t:.2} s", found.iter().map(|z| format!("{z:.6}")).collect::<Vec<_>>()),
    )
}

/// Fraction of elements with centroid within `0.2` of the re-entrant corner,
/// relative to the area fraction of that region.
fn corner_concentration(mesh: &TriMesh) -> (f64, f64) {
    let near = |p: [f64; 2]| (p[0] - LSHAPE_CORNER[0]).hypot(p[1] - LSHAPE_CORNER[1]) < 0.2;
    let count = (0..mesh.n_triangles()).filter(|&t| near(mesh.centroid(t))).count();
    let elem_share = count as f64 / mesh.n_triangles() as f64;
    // three quarters of the disk lie in the domain of area 3/4
    let area_share = 0.75 * PI * 0.04 / 0.75;
    (elem_share, area_share)
}

fn c9() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        problem: Problem::Lshape,
        n: 4,
        degree: 2,
        center: c64::from(38.6),
        radius: 5.0,
        nquad: 4,
        cluster_dim_hint: 1,
        theta: 0.9,
        max_rounds: 8,
        output_prefix: dir.path().join("lshape"),
        ..RunConfig::default()
    };
    let out = run_adapt(&cfg, Exec::Parallel, &mut std::io::sink()).unwrap();
    let last = TriMesh::read(out.mesh_paths.last().unwrap()).unwrap();
    let (elem, area) = corner_concentration(&last);
    let eta: Vec<f64> = out.rows.iter().map(|r| r.l2_eta).collect();
    let decreasing = eta[1..].windows(2).all(|w| w[1] < w[0]) && eta[1] < eta[0];
    let t = start.elapsed().as_secs_f64();
    outcome(
        out.rows.len() == 8 && elem >= 2.0 * area && decreasing && t < 180.0,
        format!(
            "{} rounds, final ndofs {}, corner element share {elem:.3} vs area share {area:.3}, l2_eta {}, {t:.2} s",
            out.rows.len(),
            out.rows.last().unwrap().ndofs,
            sci(&eta)
        ),
    )
}

fn c10() -> Outcome {
    let z = c64::from(-10.0);
    let diffs: Vec<f64> = [4, 8, 16, 32]
        .iter()
        .map(|&n| {
            let fosls = FoslsResolvent::p1(Arc::new(TriMesh::structured_square(n)), Exec::Parallel).unwrap();
            let space = fosls.scalar_space().clone();
            let cg = CgResolvent::new(space.clone(), OperatorSpec::laplacian(), Exec::Parallel);
            let f = space.interpolate(|_| c64::from(1.0));
            let (_, uf) = fosls.solve(z, &f).unwrap();
            let uc = cg.solve(z, &f).unwrap();
            let d = space.field(&uf.coeffs - &uc.coeffs).unwrap();
            inner_product(cg.forms(), &space, InnerKind::L2, &d, &d).unwrap().re.sqrt()
        })
        .collect();
    let monotone = diffs.windows(2).all(|w| w[1] < w[0]);

    let (levels, _) = levels();
    let mut pairs = Vec::new();
    for level in levels {
        let space = level.res.space();
        let scalar = LagrangeSpace::new(space.mesh().clone(), 1).unwrap();
        let fosls = Arc::new(FoslsResolvent::new(scalar, space.clone(), Exec::Parallel).unwrap());
        let est = FoslsEstimator::new(fosls, &level.filter);
        let ls = estimate_cluster_gap(&level.cluster.basis, |x: &CMatrix| level.res.apply_gram(x), &est).unwrap();
        pairs.push((ls.eta_global, residual_estimate(level).eta_global));
    }
    let factors: Vec<f64> = pairs.iter().map(|(a, b)| (a / b).max(b / a)).collect();
    outcome(
        monotone && factors.iter().all(|&f| f <= 10.0),
        format!(
            "||u_ls - u_cg|| for h = 1/4..1/32: {}; eta_global least squares {}, residual {}, factors {factors:.2?}",
            sci(&diffs),
            sci(&pairs.iter().map(|p| p.0).collect::<Vec<_>>()),
            sci(&pairs.iter().map(|p| p.1).collect::<Vec<_>>())
        ),
    )
}

fn c11() -> Outcome {
    let (levels, _) = levels();
    let level = &levels[0];
    let gram = |x: &CMatrix| level.res.apply_gram(x);
    let est = ResidualEstimator::new(level.res.clone(), &level.filter);
    let base = estimate_cluster_gap(&level.cluster.basis, gram, &est).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    let mut rotation = 0.0f64;
    for _ in 0..5 {
        let u = linalg::random_unitary(&mut rng, 2);
        let r = estimate_cluster_gap(&(&level.cluster.basis * u), gram, &est).unwrap();
        rotation = rotation.max((r.eta_global - base.eta_global).abs() / base.eta_global);
    }

    let mut rayleigh_max = 0.0f64;
    for _ in 0..200 {
        let x: CVector = linalg::random_matrix(&mut rng, 2, 1).column(0).into_owned();
        let q = (x.adjoint() * &base.g * &x)[(0, 0)].re / (x.adjoint() * &base.m * &x)[(0, 0)].re;
        rayleigh_max = rayleigh_max.max(q / base.lambda_hat);
    }

    let mut metric_ok = true;
    let set = |rng: &mut ChaCha8Rng| -> Vec<c64> {
        let k = rng.random_range(1..6);
        (0..k).map(|_| c64::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0))).collect()
    };
    for _ in 0..1000 {
        let (a, b, c) = (set(&mut rng), set(&mut rng), set(&mut rng));
        let (ab, ba, bc, ac) = (
            hausdorff(&a, &b).unwrap(),
            hausdorff(&b, &a).unwrap(),
            hausdorff(&b, &c).unwrap(),
            hausdorff(&a, &c).unwrap(),
        );
        metric_ok &= hausdorff(&a, &a).unwrap() == 0.0 && ab == ba && ab >= 0.0 && ac <= ab + bc + 1e-12;
    }

    let mut refinements = 0;
    let mut mesh_ok = true;
    for (start, area) in [
        (TriMesh::structured_square(3), 1.0),
        (TriMesh::from_polygon(&lshape_polygon(), 0.3).unwrap(), 0.75),
    ] {
        let mut mesh = start;
        for _ in 0..8 {
            let nt = mesh.n_triangles();
            let marks: Vec<usize> = (0..rng.random_range(1..=nt / 3 + 1)).map(|_| rng.random_range(0..nt)).collect();
            mesh = mesh.refine(&marks).unwrap();
            mesh_ok &= mesh.check_conforming().is_ok() && (mesh.total_area() - area).abs() < 1e-12;
            refinements += 1;
        }
    }

    outcome(
        rotation < 1e-8 && rayleigh_max <= 1.0 + 1e-12 && metric_ok && mesh_ok,
        format!(
            "rotation change {rotation:.1e}, max Rayleigh/lambda {rayleigh_max:.12}, metric axioms on 1000 triples {metric_ok}, \
             {refinements} refinements conforming {mesh_ok}"
        ),
    )
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 11] = [
        (1, "3x3 Jordan example", c1),
        (2, "Cayley example", c2),
        (3, "Butterworth identity", c3),
        (4, "mapping lemma brute force", c4),
        (5, "Riesz projector", c5),
        (6, "unit-square cluster convergence", c6),
        (7, "estimator reliability trend", c7),
        (8, "nonselfadjoint dense comparison", c8),
        (9, "adaptive corner refinement", c9),
        (10, "least-squares and Galerkin cross-validation", c10),
        (11, "invariance battery", c11),
    ];
    let mut unexpected = Vec::new();
    for (k, name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let status = if o.passed { "PASS" } else { "FAIL" };
        let note = if !o.passed && KNOWN_FAILURES.contains(&k) { " [known]" } else { "" };
        println!("{status} criterion {k:>2} ({name}){note}: {} [{:.2} s]", o.detail, start.elapsed().as_secs_f64());
        if !o.passed && !KNOWN_FAILURES.contains(&k) {
            unexpected.push(k);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
