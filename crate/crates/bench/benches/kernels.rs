use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use modalvox::convequiv::{conv_matvec, kernel_from_element, KernelKind};
use modalvox::eigensolve::{mixed_solve, random_block, LobpcgOptions, WarmStart};
use modalvox::hexfem::{assemble, element_matrices, Material};
use modalvox::radiation::{assemble_cbie, build_surface, solve_surface_pressure, Air, HelmholtzContext};
use modalvox::shapes::{ShapeKind, DEFAULT_VOXEL_SIZE};
use modalvox_bench::{grid, system};
use num_complex::Complex64;

fn assembly(c: &mut Criterion) {
    let em = element_matrices(&Material::by_name("ceramic").unwrap(), DEFAULT_VOXEL_SIZE).unwrap();
    let mut group = c.benchmark_group("assembly");
    for res in [8, 16] {
        let g = grid(ShapeKind::Cube, res);
        group.bench_with_input(BenchmarkId::from_parameter(res), &g, |b, g| b.iter(|| assemble(black_box(g), &em)));
    }
    group.finish();
}

fn matvec(c: &mut Criterion) {
    let sys = system(ShapeKind::Blob { seed: 3 }, 16);
    let x = random_block(sys.ndof(), 1, 0);
    let ker = kernel_from_element(&sys.element, KernelKind::Stiffness);
    let mut group = c.benchmark_group("matvec");
    group.bench_function("csr", |b| b.iter(|| sys.k.mul_vec(black_box(x.as_slice()))));
    group.bench_function("conv", |b| b.iter(|| conv_matvec(&sys.grid, &ker, black_box(x.as_slice())).unwrap()));
    group.finish();
}

fn eigensolve(c: &mut Criterion) {
    let sys = system(ShapeKind::L, 8);
    let opts = LobpcgOptions { modes: 14, tol: 1e-3, ..Default::default() };
    let mut group = c.benchmark_group("eigensolve");
    group.sample_size(10);
    for warm in [WarmStart::Random, WarmStart::Krylov { modes: 20, depth: 1 }] {
        group.bench_function(warm.to_string(), |b| b.iter(|| mixed_solve(&sys, &warm, &opts).unwrap()));
    }
    group.finish();
}

fn bem(c: &mut Criterion) {
    let g = grid(ShapeKind::Cube, 8);
    let surface = build_surface(&g, &g.surface_exposure()).unwrap();
    let ctx = HelmholtzContext::new(3000.0, Air::default()).unwrap();
    let q = vec![Complex64::new(1.0, 0.0); surface.len()];
    let mut group = c.benchmark_group("bem");
    group.sample_size(10);
    group.bench_function("assemble", |b| b.iter(|| assemble_cbie(&surface, &ctx).unwrap()));
    let sys = assemble_cbie(&surface, &ctx).unwrap();
    group.bench_function("solve", |b| b.iter(|| solve_surface_pressure(&sys, black_box(&q)).unwrap()));
    group.finish();
}

criterion_group!(benches, assembly, matvec, eigensolve, bem);
criterion_main!(benches);
