use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use proxqn::linalg::DenseMatrix;
use proxqn::par::Execution;
use proxqn::{scaled_prox, LowRankMetric, ProxOperator, RootFinder, Sign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn matvec(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("matvec");
    for (m, n) in [(150, 300), (1500, 3000)] {
        let a = DenseMatrix::from_row_major(m, n, normal_vec(&mut rng, m * n)).unwrap();
        let x = normal_vec(&mut rng, n);
        let y = normal_vec(&mut rng, m);
        let mut out = vec![0.0; m];
        let mut out_t = vec![0.0; n];
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, format!("{m}x{n}")), &exec, |b, &exec| {
                b.iter(|| {
                    a.matvec_with(exec, &x, &mut out);
                    a.matvec_t_with(exec, &y, &mut out_t);
                })
            });
        }
    }
    group.finish();
}

fn batch_scaled_prox(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 2000;
    let h = ProxOperator::l1(0.5).unwrap();
    let batch: Vec<(LowRankMetric, Vec<f64>)> = (0..64)
        .map(|_| {
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
            let u: Vec<f64> = normal_vec(&mut rng, n).into_iter().map(|v| v / (n as f64).sqrt()).collect();
            (LowRankMetric::rank_one(d, u, Sign::Plus).unwrap(), normal_vec(&mut rng, n))
        })
        .collect();
    let mut group = c.benchmark_group("scaled_prox_batch");
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| {
            b.iter(|| exec.map(&batch, |(m, x)| scaled_prox(m, &h, x, 1.0, &RootFinder::Exact).unwrap().0))
        });
    }
    group.finish();
}

criterion_group!(benches, matvec, batch_scaled_prox);
criterion_main!(benches);
