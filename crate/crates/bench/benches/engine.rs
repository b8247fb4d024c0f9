use criterion::{black_box, criterion_group, criterion_main, Criterion};
use qtoroidal::distr::{verify_commutator, verify_contraction, verify_exchange, WindowSpec};
use qtoroidal::fock::enumerate_basis;
use qtoroidal::polyid::{quartic_bracket_identity, serre_polynomial_check};
use qtoroidal::qscalar::quantum_integer;
use qtoroidal::toroidal::{verify_relation, CheckParams, RelationId};
use qtoroidal::vertexop::VertexWord;
use qtoroidal::{FockVector, Monomial, QScalar, Weight};

fn scalars(c: &mut Criterion) {
    c.bench_function("quantum integer products", |b| {
        b.iter(|| {
            (1..=12).fold(QScalar::one(), |acc, m| {
                (&acc * &quantum_integer(black_box(m)))
                    .checked_div(&quantum_integer(m + 1))
                    .unwrap()
            })
        })
    });
}

fn components(c: &mut Criterion) {
    let x = VertexWord::x(0, 1, Monomial::ONE).unwrap().compile();
    let states: Vec<FockVector> = enumerate_basis(4, 0).into_iter().map(FockVector::basis).collect();
    c.bench_function("X01 components, degree <= 4", |b| {
        b.iter(|| {
            for v in &states {
                for n in -4..=4 {
                    black_box(x.component(n, v));
                }
            }
        })
    });
}

fn products(c: &mut Criterion) {
    let mut g = c.benchmark_group("products");
    g.sample_size(10);
    let st = enumerate_basis(3, 0);
    g.bench_function("exchange, k <= 4", |b| {
        b.iter(|| verify_exchange(Weight::basis(1), -Weight::basis(2), 4, &st))
    });
    g.bench_function("contraction X01 X10, window 3", |b| {
        b.iter(|| {
            verify_contraction(
                (0, 1, Monomial::ONE),
                (1, 0, Monomial::MINUS_ONE),
                &st,
                WindowSpec::square(3),
            )
            .unwrap()
        })
    });
    g.bench_function("commutator X01 X10, window 3", |b| {
        b.iter(|| verify_commutator(0, 1, Monomial::ONE, Monomial::ONE, &st, WindowSpec::square(3)).unwrap())
    });
    let p = CheckParams {
        window: 3,
        max_degree: 2,
        ..CheckParams::default()
    };
    g.bench_function("GS16, window 3", |b| {
        b.iter(|| verify_relation(RelationId::GS16, &p).unwrap())
    });
    g.finish();
}

fn polynomials(c: &mut Criterion) {
    let mut g = c.benchmark_group("polynomials");
    g.sample_size(10);
    g.bench_function("serre polynomial", |b| b.iter(serre_polynomial_check));
    g.bench_function("quartic bracket reduction", |b| b.iter(quartic_bracket_identity));
    g.finish();
}

criterion_group!(benches, scalars, components, products, polynomials);
criterion_main!(benches);
