use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use porocrack::fem::{apply_dirichlet, mode_one_tension, Assembler};
use porocrack::material::MaterialParams;
use porocrack::mesh::{generate_notched_plate, MeshResolution, NotchedPlateGeometry};
use porocrack::solver::{picard_solve_with, solve_linear, LinearSolverKind, SolverConfig};

fn plate(levels: usize) -> (NotchedPlateGeometry, porocrack::Mesh) {
    let geom = NotchedPlateGeometry::default();
    let res = MeshResolution { tip_refine_levels: levels, ..MeshResolution::default() };
    (geom, generate_notched_plate(&geom, &res).unwrap())
}

fn assembly(c: &mut Criterion) {
    let (geom, mesh) = plate(6);
    let loads = mode_one_tension(&mesh, &geom, -1.0, 1.0);
    let assembler = Assembler::new(&mesh);
    let params = MaterialParams::new(1.0e4, 0.3, -10.0).unwrap();
    let sys = assembler.assemble(&mesh, &params.with_beta(0.0), None, &loads).unwrap();
    let u = solve_linear(&apply_dirichlet(&sys, &loads, &mesh).unwrap(), &SolverConfig::default()).unwrap();
    let u: Vec<f64> = u.0.iter().map(|v| 0.3 * v).collect();
    c.bench_function("assemble coarse plate", |b| {
        b.iter(|| assembler.assemble(&mesh, black_box(&params), Some(&u), &loads).unwrap())
    });
}

fn linear_solvers(c: &mut Criterion) {
    let (geom, mesh) = plate(6);
    let loads = mode_one_tension(&mesh, &geom, -1.0, 1.0);
    let sys = Assembler::new(&mesh).assemble(&mesh, &MaterialParams::default(), None, &loads).unwrap();
    let reduced = apply_dirichlet(&sys, &loads, &mesh).unwrap();
    let mut group = c.benchmark_group("linear solve coarse plate");
    group.sample_size(20);
    for kind in [LinearSolverKind::Cg, LinearSolverKind::Direct] {
        let config = SolverConfig { linear_solver: kind, ..SolverConfig::default() };
        group.bench_function(kind.as_str(), |b| b.iter(|| solve_linear(black_box(&reduced), &config).unwrap()));
    }
    group.finish();
}

fn picard(c: &mut Criterion) {
    let (geom, mesh) = plate(3);
    let loads = mode_one_tension(&mesh, &geom, -1.0, 1.0);
    let assembler = Assembler::new(&mesh);
    let config = SolverConfig::default();
    let mut group = c.benchmark_group("picard");
    group.sample_size(10);
    for beta in [-10.0, 10.0] {
        let params = MaterialParams::new(1.0e4, 0.3, beta).unwrap();
        group.bench_function(format!("beta {beta}"), |b| {
            b.iter(|| picard_solve_with(&assembler, &mesh, black_box(&params), &loads, &config, None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, linear_solvers, picard);
criterion_main!(benches);
