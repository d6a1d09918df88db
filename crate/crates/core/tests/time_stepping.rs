use std::f64::consts::PI;
use std::sync::Arc;

use ecodamp::solver1d::Solver1D;
use ecodamp::{
    integrate_1d, ChebGrid, ModelVariant, ParameterSet, SolverConfig1D, StateField1D, StepControllerCfg,
    Verdict,
};

fn riccati() -> ParameterSet {
    let mut p = ParameterSet::refuge_1d();
    p.c = 0.055;
    p.w3 = 0.0;
    p
}

fn grid() -> Arc<ChebGrid> {
    Arc::new(ChebGrid::new(6, 0.0, PI).unwrap())
}

/// Error at `t = 1` of fixed-step trapezoidal integration of `r' = c r^2`.
fn riccati_error(dt: f64) -> f64 {
    let p = riccati();
    let variant = ModelVariant::classical();
    let mut solver = Solver1D::new(&variant, &p, grid(), SolverConfig1D::default()).unwrap();
    let mut f = StateField1D::constant(grid(), 0.0, 0.0, 10.0);
    let steps = (1.0 / dt).round() as usize;
    for _ in 0..steps {
        f = solver.step(&f, dt).unwrap().0;
    }
    let exact = 10.0 / (1.0 - p.c * 10.0);
    (f.r[3] - exact).abs()
}

#[test]
fn trapezoidal_rule_is_second_order() {
    let e: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&dt| riccati_error(dt)).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.9..2.2).contains(&order), "{e:?}");
    }
}

#[test]
fn riccati_blowup_time() {
    let ic = StateField1D::constant(grid(), 0.0, 0.0, 10.0);
    let tr = integrate_1d(&ModelVariant::classical(), &riccati(), &ic, 3.0, &StepControllerCfg::new(1e-3))
        .unwrap();
    let Verdict::BlewUp { t_star } = tr.report.verdict else {
        panic!("expected blow-up, got {:?}", tr.report.verdict);
    };
    let exact = 1.0 / 0.55;
    assert!((t_star - exact).abs() < 0.02 * exact, "{t_star}");
    assert!(tr.report.rejection_count > 0);
}

#[test]
fn step_is_deterministic() {
    let p = ParameterSet::refuge_1d();
    let ic = StateField1D::from_fn(grid(), |x| (10.0, 2000.0, 10.0 + x));
    let a = ecodamp::step_am2(&ModelVariant::classical(), &p, &ic, 1e-3, &SolverConfig1D::default()).unwrap();
    let b = ecodamp::step_am2(&ModelVariant::classical(), &p, &ic, 1e-3, &SolverConfig1D::default()).unwrap();
    assert_eq!(a.0.r, b.0.r);
    assert_eq!(a.0.v, b.0.v);
}
