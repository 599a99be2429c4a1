use std::f64::consts::PI;

use caputo_core::ivp::{solve_ivp, IvpProblem};
use caputo_core::pde::{solve_parabolic, LinearSolverKind, ParabolicProblem, SolverOptions, SpatialGrid2D};
use caputo_core::{DiscreteCaputo, SchemeKind, TemporalMesh};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn weights(c: &mut Criterion) {
    let mut group = c.benchmark_group("weight_rows");
    for m in [256usize, 1024] {
        let mesh = TemporalMesh::graded(1.0, m, 2.0).unwrap();
        for scheme in [SchemeKind::L1, SchemeKind::Alikhanov] {
            let op = DiscreteCaputo::new(scheme, &mesh, 0.5).unwrap();
            group.bench_with_input(BenchmarkId::new(scheme.name(), m), &op, |b, op| {
                let mut row = Vec::new();
                b.iter(|| {
                    for level in 1..=m {
                        op.row_into(level, &mut row);
                    }
                    black_box(row.len())
                })
            });
        }
    }
    group.finish();
}

fn ivp(c: &mut Criterion) {
    let problem = IvpProblem::power_alpha(0.5).unwrap();
    let mut group = c.benchmark_group("ivp_solve");
    group.sample_size(10);
    for m in [512usize, 2048] {
        let mesh = TemporalMesh::graded(1.0, m, 2.0).unwrap();
        group.bench_with_input(BenchmarkId::new("alikhanov", m), &mesh, |b, mesh| {
            b.iter(|| solve_ivp(SchemeKind::Alikhanov, mesh, &problem).unwrap().final_error())
        });
    }
    group.finish();
}

fn pde(c: &mut Criterion) {
    let problem = ParabolicProblem::reference(0.5).unwrap();
    let mesh = TemporalMesh::graded(1.0, 32, (2.0 - 0.5) / 0.9).unwrap();
    let mut group = c.benchmark_group("pde_solve_M32");
    group.sample_size(10);
    for (name, method) in [("cg", LinearSolverKind::ConjugateGradient), ("pcg", LinearSolverKind::PreconditionedCg)] {
        for n in [32usize, 64] {
            let grid = SpatialGrid2D::square(PI, n).unwrap();
            let options = SolverOptions::with_method(method);
            group.bench_with_input(BenchmarkId::new(name, n), &grid, |b, grid| {
                b.iter(|| solve_parabolic(SchemeKind::L1, &mesh, grid, &problem, &options).unwrap().levels.len())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, weights, ivp, pde);
criterion_main!(benches);
