use criterion::{criterion_group, criterion_main, Criterion};
use qsmt_core::oracle::{build_oracle, LayoutMode};
use qsmt_core::simkernel::extract_effective_oracle;
use qsmt_core::solver::{grover_probabilities, run_grover_dense};
use qsmt_core::parse_problem;

const F_EVAL: &str = "(problem
  (vars (a 2) (b 2))
  (cnf (clause x y z) (clause x (not y) z))
  (atom x (< (+ a b) (^ a b)))
  (atom y (> (+ a b) (^ a b)))
  (atom z (= (+ a b) 1)))";

const F_EVAL_1BIT: &str = "(problem
  (vars (a 1) (b 1))
  (cnf (clause x y z) (clause x (not y) z))
  (atom x (< (+ a b) (^ a b)))
  (atom y (> (+ a b) (^ a b)))
  (atom z (= (+ a b) 1)))";

fn bench_oracle_build(c: &mut Criterion) {
    let p = parse_problem(F_EVAL).unwrap();
    c.bench_function("oracle_build_paper", |b| {
        b.iter(|| build_oracle(&p, LayoutMode::Paper).unwrap())
    });
    c.bench_function("oracle_build_compact", |b| {
        b.iter(|| build_oracle(&p, LayoutMode::Compact).unwrap())
    });
}

fn bench_effective_extraction(c: &mut Criterion) {
    let p = parse_problem(F_EVAL).unwrap();
    let (circuit, layout) = build_oracle(&p, LayoutMode::Compact).unwrap();
    c.bench_function("effective_oracle_extraction_256", |b| {
        b.iter(|| extract_effective_oracle(&circuit, &layout.search).unwrap())
    });
}

fn bench_grover(c: &mut Criterion) {
    let p = parse_problem(F_EVAL).unwrap();
    let (circuit, layout) = build_oracle(&p, LayoutMode::Compact).unwrap();
    let table = extract_effective_oracle(&circuit, &layout.search).unwrap();
    c.bench_function("grover_effective_k5", |b| {
        b.iter(|| grover_probabilities(&table, 5))
    });

    let p1 = parse_problem(F_EVAL_1BIT).unwrap();
    let (c1, l1) = build_oracle(&p1, LayoutMode::Compact).unwrap();
    c.bench_function("grover_dense_1bit_k4", |b| {
        b.iter(|| run_grover_dense(&c1, &l1.search, 4, 26).unwrap())
    });
}

criterion_group!(benches, bench_oracle_build, bench_effective_extraction, bench_grover);
criterion_main!(benches);
