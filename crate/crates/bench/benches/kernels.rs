use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ekgw_core::gw::{determinant_expansion, t_hat_closed, t_numeric, GwPoint};
use ekgw_core::kronecker::{EkRoute, Kronecker};
use ekgw_core::qseries::{qexpand, QTarget};
use ekgw_core::symbolic::{loop_closed_form, symbolic_reg_integrate_all, xi_loop};
use ekgw_core::{Complex64, ModularPoint, ThetaEvaluator};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn theta(cr: &mut Criterion) {
    let th = ThetaEvaluator::new(ModularPoint::new(c(0.1, 1.05)).unwrap());
    cr.bench_function("theta/value", |b| b.iter(|| th.theta(black_box(c(0.23, 0.17)), false)));
    cr.bench_function("theta/jet-order-8", |b| b.iter(|| th.theta_jet(black_box(c(0.23, 0.17)), 8)));
}

fn laurent(cr: &mut Criterion) {
    let k = Kronecker::from_modular(ModularPoint::new(c(0.1, 1.05)).unwrap());
    let mut g = cr.benchmark_group("ek-coeffs-m8");
    for (name, route) in
        [("jet", EkRoute::JetExtraction), ("bell", EkRoute::BellPolynomial), ("binomial", EkRoute::BinomialCompletion)]
    {
        g.bench_function(name, |b| b.iter(|| k.ek_coeffs(8, black_box(c(0.31, 0.22)), true, route).unwrap()));
    }
    g.finish();
}

fn closed_forms(cr: &mut Criterion) {
    let k = Kronecker::from_modular(ModularPoint::new(c(0.1, 1.05)).unwrap());
    let ws = [0.17, 0.38, -0.29, 0.07, -0.44];
    let mut g = cr.benchmark_group("t-closed");
    for n in 2..=5 {
        let p = GwPoint::new(ws[..n].iter().map(|x| c(*x, 0.0)).collect(), k.modular()).unwrap();
        let set: Vec<usize> = (1..=n).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| t_hat_closed(&set, &p, &k, true).unwrap())
        });
    }
    g.finish();
}

fn symbolic(cr: &mut Criterion) {
    cr.bench_function("symbolic/loop-n4", |b| {
        b.iter(|| {
            let v = symbolic_reg_integrate_all(&xi_loop(black_box(&[1, 2, 1, 1])), 4).unwrap();
            assert_eq!(v, loop_closed_form(&[1, 2, 1, 1]));
        })
    });
    cr.bench_function("symbolic/determinant-expansion-n4", |b| b.iter(|| determinant_expansion(black_box(4)).unwrap()));
}

fn numeric(cr: &mut Criterion) {
    let k = Kronecker::from_modular(ModularPoint::new(c(0.1, 1.05)).unwrap());
    let p = GwPoint::new(vec![c(0.17, 0.0), c(0.38, 0.0)], k.modular()).unwrap();
    let mut g = cr.benchmark_group("a-cycle");
    g.sample_size(10);
    g.bench_function("varpi2-128", |b| b.iter(|| t_numeric(&k, &p, &[0.04, 0.02], 128).unwrap()));
    g.finish();
}

fn qseries(cr: &mut Criterion) {
    cr.bench_function("qexp/theta-order-12", |b| b.iter(|| qexpand(QTarget::Theta, black_box(12)).unwrap()));
    cr.bench_function("qexp/t2-order-8", |b| b.iter(|| qexpand(QTarget::T { n: 2 }, black_box(8)).unwrap()));
}

criterion_group!(benches, theta, laurent, closed_forms, symbolic, numeric, qseries);
criterion_main!(benches);
