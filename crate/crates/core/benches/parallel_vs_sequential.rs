use std::f64::consts::PI;
use std::sync::Arc;

use clustergap::dense_oracle::{random_jordan_instance, verify_mapping_lemma, DEFAULT_RANK_TOL};
use clustergap::estimators::{ResidualEstimator, SourceEstimator};
use clustergap::exec::Exec;
use clustergap::feast::{apply_filter_block, initial_block, ResolventBackend};
use clustergap::fem::{CgResolvent, LagrangeSpace, OperatorSpec};
use clustergap::filters::{ContourCircle, RationalFilter};
use clustergap::mesh::TriMesh;
use clustergap::c64;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn setup(exec: Exec) -> (Arc<CgResolvent>, RationalFilter) {
    let space = LagrangeSpace::new(Arc::new(TriMesh::structured_square(16)), 2).unwrap();
    let res = Arc::new(CgResolvent::new(space, OperatorSpec::laplacian(), exec));
    let contour = ContourCircle::new(c64::from(5.0 * PI * PI), 5.0, 8).unwrap();
    let filter = RationalFilter::butterworth(&contour);
    let zs: Vec<c64> = filter.poles().iter().map(|p| p.z).collect();
    res.prepare(&zs).unwrap();
    (res, filter)
}

fn pole_solves(c: &mut Criterion) {
    let mut g = c.benchmark_group("filter_block");
    for (name, exec) in POLICIES {
        let (res, filter) = setup(exec);
        let q = initial_block(res.dim(), 4, 1);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| apply_filter_block(res.as_ref(), &filter, &q, exec).unwrap())
        });
    }
    g.finish();
}

fn estimator_batch(c: &mut Criterion) {
    let mut g = c.benchmark_group("residual_estimator");
    for (name, exec) in POLICIES {
        let (res, filter) = setup(exec);
        let est = ResidualEstimator::new(res.clone(), &filter);
        let q = initial_block(res.dim(), 4, 2);
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| est.estimate_block(&q).unwrap()));
    }
    g.finish();
}

fn lemma_battery(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let instances: Vec<_> = (0..64).map(|_| random_jordan_instance(&mut rng, 8)).collect();
    let mut g = c.benchmark_group("mapping_lemma");
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.map(&instances, |inst| {
                    verify_mapping_lemma(&inst.operator, &inst.filter, inst.mu, DEFAULT_RANK_TOL).unwrap().gap
                })
            })
        });
    }
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = pole_solves, estimator_batch, lemma_battery
}
criterion_main!(benches);
