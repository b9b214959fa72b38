use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gpcsim_bench::{circuit, CS_AMP, MIXER, SRAM};
use gpcsim_core::engine::DaeProblem;
use gpcsim_core::uq::{mc_solve, sc_solve, Analysis, McOptions, ScOptions, SgSolver, StSolver};
use gpcsim_core::TranOptions;

/// One Newton linear solve: decoupled ST against dense SG.
fn linear_solve(c: &mut Criterion) {
    let ckt = circuit(MIXER);
    let mut g = c.benchmark_group("linear_solve");
    g.sample_size(10);
    for p in 1..=4 {
        let st = StSolver::new(&ckt, p, 1e-2).unwrap();
        let x = st.initial_guess().unwrap();
        let prob = st.problem();
        let e = prob.evaluate(&x, 0.0, 1.0, 0.0).unwrap();
        g.bench_with_input(BenchmarkId::new("st", st.basis.len()), &e.fb, |b, fb| {
            b.iter(|| {
                let mut r = fb.clone();
                prob.solve_decoupled(&e.jac, &mut r).unwrap();
                r
            })
        });
        let sg = SgSolver::new(&ckt, p).unwrap();
        let sp = sg.problem().unwrap();
        let e = sp.evaluate(&x, 0.0, 1.0, 0.0).unwrap();
        g.bench_with_input(BenchmarkId::new("sg", sg.basis.len()), &e.fb, |b, fb| {
            b.iter(|| {
                let mut r = fb.clone();
                sp.solve(&e.jac, &mut r).unwrap();
                r
            })
        });
    }
    g.finish();
}

/// Full DC solves of the common-source amplifier with every method.
fn dc_methods(c: &mut Criterion) {
    let ckt = circuit(CS_AMP);
    let mut g = c.benchmark_group("cs_amp_dc");
    g.sample_size(10);
    g.bench_function("st_p3", |b| b.iter(|| StSolver::new(&ckt, 3, 1e-2).unwrap().solve(&Analysis::Dc).unwrap()));
    g.bench_function("sg_p3", |b| b.iter(|| SgSolver::new(&ckt, 3).unwrap().solve(&Analysis::Dc).unwrap()));
    g.bench_function("sc_p3", |b| b.iter(|| sc_solve(&ckt, &ScOptions::new(3), &Analysis::Dc).unwrap()));
    g.bench_function("mc_1000", |b| b.iter(|| mc_solve(&ckt, &McOptions::new(1000, 1), &Analysis::Dc).unwrap()));
    g.finish();
}

fn sram_transient(c: &mut Criterion) {
    let ckt = circuit(SRAM);
    let analysis = Analysis::from_spec(&ckt, &ckt.analyses()[0], &TranOptions::new(1.0)).unwrap();
    let mut g = c.benchmark_group("sram_tran");
    g.sample_size(10);
    g.bench_function("st_p2", |b| b.iter(|| StSolver::new(&ckt, 2, 1e-2).unwrap().solve(&analysis).unwrap()));
    g.finish();
}

criterion_group!(benches, linear_solve, dc_methods, sram_transient);
criterion_main!(benches);
