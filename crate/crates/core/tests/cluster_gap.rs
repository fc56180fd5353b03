use std::f64::consts::PI;
use std::sync::Arc;

use clustergap::cluster_gap::{analytic_gap, assemble_gm, ehat, estimate_cluster_gap, hausdorff, subspace_gap, worst_direction};
use clustergap::estimators::{SourceEstimator, ResidualEstimator, ZeroEstimator};
use clustergap::exec::Exec;
use clustergap::feast::{feast_iterate, FeastOptions, ResolventBackend};
use clustergap::fem::{CgResolvent, LagrangeSpace, OperatorSpec};
use clustergap::filters::{ContourCircle, RationalFilter};
use clustergap::linalg::{self, CMatrix, CVector};
use clustergap::mesh::TriMesh;
use clustergap::c64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Benchmark {
    res: Arc<CgResolvent>,
    basis: CMatrix,
    estimator: ResidualEstimator,
}

fn benchmark(n: usize) -> Benchmark {
    let mesh = Arc::new(TriMesh::structured_square(n));
    let res = Arc::new(CgResolvent::new(LagrangeSpace::new(mesh, 2).unwrap(), OperatorSpec::laplacian(), Exec::Parallel));
    let contour = ContourCircle::new(c64::from(5.0 * PI * PI), 5.0, 4).unwrap();
    let filter = RationalFilter::butterworth(&contour);
    let cluster = feast_iterate(res.as_ref(), &filter, &contour, &FeastOptions::for_multiplicity(2)).unwrap();
    assert_eq!(cluster.dim(), 2);
    let estimator = ResidualEstimator::new(res.clone(), &filter);
    Benchmark { res, basis: cluster.basis, estimator }
}

fn random_hermitian_pd(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = linalg::random_matrix(rng, n, n);
    &a * a.adjoint() + CMatrix::identity(n, n) * c64::from(0.1)
}

fn rayleigh(g: &CMatrix, m: &CMatrix, x: &CVector) -> f64 {
    (x.adjoint() * g * x)[(0, 0)].re / (x.adjoint() * m * x)[(0, 0)].re
}

#[test]
fn one_by_one_and_orthonormal_bases() {
    let b = benchmark(4);
    let gram = |x: &CMatrix| b.res.apply_gram(x);
    let e = b.basis.columns(0, 1).into_owned() * c64::new(2.0, -1.0);
    let fields = b.estimator.estimate_block(&e).unwrap();
    let (g, m) = assemble_gm(&fields, &e, gram).unwrap();
    assert!((g[(0, 0)].re - fields[0].norm_sqr()).abs() <= 1e-12 * g[(0, 0)].re);
    assert!((m[(0, 0)].re - 5.0).abs() < 1e-10);
    let est = estimate_cluster_gap(&e, gram, &b.estimator).unwrap();
    assert!((est.eta_global - fields[0].norm() / 5f64.sqrt()).abs() <= 1e-10 * est.eta_global);

    let fields = b.estimator.estimate_block(&b.basis).unwrap();
    let (_, m) = assemble_gm(&fields, &b.basis, gram).unwrap();
    assert!((m - CMatrix::identity(2, 2)).norm() < 1e-10);
}

#[test]
fn rotated_basis_transforms_the_pencil() {
    let b = benchmark(4);
    let gram = |x: &CMatrix| b.res.apply_gram(x);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let u = linalg::random_unitary(&mut rng, 2);
    let rotated = &b.basis * &u;
    let (g, m) = assemble_gm(&b.estimator.estimate_block(&b.basis).unwrap(), &b.basis, gram).unwrap();
    let (g2, m2) = assemble_gm(&b.estimator.estimate_block(&rotated).unwrap(), &rotated, gram).unwrap();
    assert!((&g2 - u.adjoint() * &g * &u).norm() <= 1e-10 * g.norm());
    assert!((&m2 - u.adjoint() * &m * &u).norm() <= 1e-10);
}

#[test]
fn benchmark_estimate_is_consistent_and_basis_invariant() {
    let b = benchmark(8);
    let gram = |x: &CMatrix| b.res.apply_gram(x);
    let est = estimate_cluster_gap(&b.basis, gram, &b.estimator).unwrap();
    assert!((est.eta_global.powi(2) - est.lambda_hat).abs() <= 1e-8 * est.lambda_hat);
    let l2: f64 = est.eta_local.iter().map(|e| e * e).sum();
    assert!((l2 - est.eta_l2.powi(2)).abs() <= 1e-10 * l2);
    assert!((est.eta_l2 - est.eta_global).abs() <= 1e-10 * est.eta_global);
    let e = CMatrix::from_column_slice(est.ehat.len(), 1, est.ehat.as_slice());
    assert!(((e.adjoint() * gram(&e))[(0, 0)].re - 1.0).abs() < 1e-10);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rotated = &b.basis * linalg::random_unitary(&mut rng, 2);
    let est2 = estimate_cluster_gap(&rotated, gram, &b.estimator).unwrap();
    assert!((est2.eta_global - est.eta_global).abs() <= 1e-8 * est.eta_global);
    assert!((est2.lambda_hat - est.lambda_hat).abs() <= 1e-8 * est.lambda_hat);

    // no direction in the span has a larger estimator quotient
    let fields = b.estimator.estimate_block(&b.basis).unwrap();
    let (g, m) = assemble_gm(&fields, &b.basis, gram).unwrap();
    for _ in 0..200 {
        let x = linalg::random_matrix(&mut rng, 2, 1).column(0).into_owned();
        assert!(rayleigh(&g, &m, &x) <= est.lambda_hat * (1.0 + 1e-12));
    }
    assert!(est.report(true).lines().count() > 5);
}

#[test]
fn zero_estimator_gives_zero() {
    let b = benchmark(4);
    let zero = ZeroEstimator::new(b.res.space().clone(), 4);
    let est = estimate_cluster_gap(&b.basis, |x: &CMatrix| b.res.apply_gram(x), &zero).unwrap();
    assert_eq!(est.lambda_hat, 0.0);
    assert_eq!(est.eta_global, 0.0);
    assert!(est.eta_local.iter().all(|&e| e == 0.0));
}

#[test]
fn analytic_gap_decreases_under_refinement() {
    let gaps: Vec<f64> = [4, 8]
        .iter()
        .map(|&n| {
            let b = benchmark(n);
            let space = b.res.space();
            let modes = [(1.0, 2.0), (2.0, 1.0)];
            let mut cross = CMatrix::zeros(space.ndofs(), 2);
            for (k, &(a, c)) in modes.iter().enumerate() {
                let w = move |x: [f64; 2]| c64::from((a * PI * x[0]).sin() * (c * PI * x[1]).sin());
                let gw = move |x: [f64; 2]| {
                    [
                        c64::from(a * PI * (a * PI * x[0]).cos() * (c * PI * x[1]).sin()),
                        c64::from(c * PI * (a * PI * x[0]).sin() * (c * PI * x[1]).cos()),
                    ]
                };
                cross.set_column(k, &space.h1_functional(w, gw, 10));
            }
            // the modes are H¹-orthogonal with norm² (1 + 5π²)/4
            let w_gram = CMatrix::identity(2, 2) * c64::from((1.0 + 5.0 * PI * PI) / 4.0);
            analytic_gap(&b.basis, |x: &CMatrix| b.res.apply_gram(x), &cross, &w_gram).unwrap()
        })
        .collect();
    assert!(gaps[1] < gaps[0] / 3.0, "{gaps:?}");
}

#[test]
fn pencil_maximum_against_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let a = linalg::random_matrix(&mut rng, 5, 5);
    let g = linalg::hermitian_part(&a);
    let m = random_hermitian_pd(&mut rng, 5);
    let (lambda, x) = worst_direction(&g, &m).unwrap();
    assert!((rayleigh(&g, &m, &x) - lambda).abs() <= 1e-10 * lambda.abs().max(1.0));
    // independent oracle: largest eigenvalue of M⁻¹G by a general Schur solve
    let ev = linalg::eigenvalues(&linalg::lu_solve(&m, &g).unwrap()).unwrap();
    let top = ev.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    assert!((top - lambda).abs() <= 1e-10 * lambda.abs().max(1.0));
    // brute force: 10⁵ random directions, then hill climbing from the best
    let mut best = linalg::random_matrix(&mut rng, 5, 1).column(0).into_owned();
    let mut best_q = rayleigh(&g, &m, &best);
    for _ in 0..100_000 {
        let y = linalg::random_matrix(&mut rng, 5, 1).column(0).into_owned();
        let q = rayleigh(&g, &m, &y);
        assert!(q <= lambda * (1.0 + 1e-12) + 1e-12);
        if q > best_q {
            best = y;
            best_q = q;
        }
    }
    let mut step = 0.1;
    while step > 1e-8 {
        let mut improved = false;
        for _ in 0..200 {
            let y = &best + linalg::random_matrix(&mut rng, 5, 1).column(0) * c64::from(step * best.norm());
            let q = rayleigh(&g, &m, &y);
            if q > best_q {
                best = y;
                best_q = q;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    assert!((best_q - lambda).abs() <= 1e-6 * lambda.abs(), "{best_q} vs {lambda}");

    let (one, _) = worst_direction(&m, &m).unwrap();
    assert!((one - 1.0).abs() < 1e-12);
}

#[test]
fn ehat_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let gm = random_hermitian_pd(&mut rng, 6);
    let gram = |x: &CMatrix| &gm * x;
    let basis = linalg::random_matrix(&mut rng, 6, 3);
    let x = linalg::random_matrix(&mut rng, 3, 1).column(0).into_owned();
    let e1 = ehat(&basis, &x, gram).unwrap();
    let e2 = ehat(&basis, &(&x * c64::from_polar(7.0, 1.3)), gram).unwrap();
    let v = |a: &CVector, b: &CVector| (b.adjoint() * &gm * a)[(0, 0)];
    assert!((v(&e1, &e1).re - 1.0).abs() < 1e-10);
    assert!((v(&e1, &e2).norm() - 1.0).abs() < 1e-10);
    let single = ehat(&basis.columns(0, 1).into_owned(), &CVector::from_element(1, c64::from(1.0)), gram).unwrap();
    let col = basis.column(0).into_owned();
    let scale = v(&col, &col).re.sqrt();
    assert!((single - col / c64::from(scale)).norm() < 1e-12);
    assert!(ehat(&basis, &CVector::zeros(3), gram).is_err());
}

#[test]
fn gap_symmetry_and_equal_spans() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gm = random_hermitian_pd(&mut rng, 7);
    let gram = |x: &CMatrix| &gm * x;
    for _ in 0..20 {
        let u = linalg::random_matrix(&mut rng, 7, 3);
        let w = linalg::random_matrix(&mut rng, 7, 3);
        let a = subspace_gap(&u, &w, gram).unwrap();
        let b = subspace_gap(&w, &u, gram).unwrap();
        assert!((a - b).abs() < 1e-12 && (0.0..=1.0).contains(&a));
        let same = &u * linalg::random_matrix(&mut rng, 3, 3);
        assert!(subspace_gap(&u, &same, gram).unwrap() < 1e-10);
    }
    let dependent = CMatrix::from_fn(7, 2, |i, _| c64::from(i as f64));
    assert!(subspace_gap(&dependent, &dependent, gram).is_err());
}

#[test]
fn hausdorff_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let a: Vec<c64> = (0..rng.random_range(1..8)).map(|_| c64::new(rng.random(), rng.random())).collect();
        let b: Vec<c64> = (0..rng.random_range(1..8)).map(|_| c64::new(rng.random(), rng.random())).collect();
        let mut d: f64 = 0.0;
        for x in &a {
            let mut m = f64::INFINITY;
            for y in &b {
                m = m.min((x - y).norm());
            }
            d = d.max(m);
        }
        for y in &b {
            let mut m = f64::INFINITY;
            for x in &a {
                m = m.min((x - y).norm());
            }
            d = d.max(m);
        }
        assert_eq!(hausdorff(&a, &b).unwrap(), d);
    }
}

fn cset() -> impl Strategy<Value = Vec<c64>> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0).prop_map(|(a, b)| c64::new(a, b)), 1..6)
}

proptest! {
    #[test]
    fn hausdorff_is_a_metric(a in cset(), b in cset(), c in cset()) {
        let ab = hausdorff(&a, &b).unwrap();
        prop_assert_eq!(ab, hausdorff(&b, &a).unwrap());
        prop_assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        prop_assert!(ab <= hausdorff(&a, &c).unwrap() + hausdorff(&c, &b).unwrap() + 1e-12);
    }
}
