use std::f64::consts::PI;
use std::sync::Arc;

use ecodamp::{integrate_1d, ChebGrid, ModelVariant, ParameterSet, StateField1D, StepControllerCfg};

fn inert() -> ParameterSet {
    ParameterSet {
        a1: 0.0,
        a2: 0.0,
        b2: 0.0,
        c: 0.0,
        w0: 0.0,
        w1: 0.0,
        w2: 0.0,
        w3: 0.0,
        w4: 0.0,
        w5: 0.0,
        sat0: 1.0,
        sat1: 1.0,
        sat2: 1.0,
        sat3: 1.0,
        sat4: 1.0,
        d1: 0.1,
        d2: 0.05,
        d3: 0.2,
        d4: 0.0,
    }
}

#[test]
fn polynomials_differentiated_exactly() {
    let g = ChebGrid::new(12, -1.0, 2.0).unwrap();
    for deg in 0..=12 {
        let vals: Vec<f64> = g.nodes().iter().map(|x| x.powi(deg)).collect();
        let d = g.derivative(&vals);
        let dd = g.second_derivative(&vals);
        for (i, &x) in g.nodes().iter().enumerate() {
            let k = deg as f64;
            let exact = if deg >= 1 { k * x.powi(deg - 1) } else { 0.0 };
            let exact2 = if deg >= 2 { k * (k - 1.0) * x.powi(deg - 2) } else { 0.0 };
            let scale = 1.0 + 2f64.powi(deg) * k * k;
            assert!((d[i] - exact).abs() < 1e-11 * scale, "deg {deg} node {i}");
            assert!((dd[i] - exact2).abs() < 1e-9 * scale, "deg {deg} node {i}");
        }
    }
}

#[test]
fn smooth_function_converges_spectrally() {
    let err = |n: usize| {
        let g = ChebGrid::new(n, 0.0, PI).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|x| x.sin().exp()).collect();
        let d = g.derivative(&vals);
        g.nodes()
            .iter()
            .zip(&d)
            .map(|(x, dv)| (dv - x.cos() * x.sin().exp()).abs())
            .fold(0.0, f64::max)
    };
    let (e8, e16, e32) = (err(8), err(16), err(32));
    assert!(e16 < e8 * 1e-3, "{e8} {e16}");
    assert!(e32 < 1e-10, "{e32}");
}

#[test]
fn quadrature_integrates_polynomials() {
    let g = ChebGrid::new(10, 0.0, 2.0).unwrap();
    let vals: Vec<f64> = g.nodes().iter().map(|x| x.powi(5)).collect();
    assert!((g.integrate(&vals) - 64.0 / 6.0).abs() < 1e-12);
}

#[test]
fn neumann_extension_has_zero_flux() {
    let g = ChebGrid::new(20, 0.0, PI).unwrap();
    let interior: Vec<f64> = (1..20).map(|j| (g.nodes()[j] * 2.0).cos() + g.nodes()[j]).collect();
    let mut full = vec![0.0; 21];
    g.extend(&interior, &mut full);
    let d = g.derivative(&full);
    assert!(d[0].abs() < 1e-10, "{}", d[0]);
    assert!(d[20].abs() < 1e-10, "{}", d[20]);
}

#[test]
fn diffusion_conserves_mass() {
    let grid = Arc::new(ChebGrid::new(40, 0.0, PI).unwrap());
    let ic = StateField1D::from_fn(grid, |x| (2.0 + (5.0 * x).cos() + x, 1.0 + x * x, 3.0 + x.sin()));
    let mut cfg = StepControllerCfg::new(2e-3);
    cfg.threshold = 1e12;
    let tr = integrate_1d(&ModelVariant::classical(), &inert(), &ic, 0.5, &cfg).unwrap();
    let (a, b) = (ic.populations(), tr.final_field.populations());
    for (x, y) in [(a.0, b.0), (a.1, b.1), (a.2, b.2)] {
        assert!((x - y).abs() <= 1e-8 * x.abs(), "{x} {y}");
    }
}

#[test]
fn heat_mode_decay() {
    let p = inert();
    let grid = Arc::new(ChebGrid::new(24, 0.0, PI).unwrap());
    let ic = StateField1D::from_fn(grid, |x| ((2.0 * x).cos(), 0.0, 0.0));
    let mut cfg = StepControllerCfg::new(1e-3);
    cfg.threshold = 1e12;
    let tr = integrate_1d(&ModelVariant::classical(), &p, &ic, 0.2, &cfg).unwrap();
    let decay = (-4.0 * p.d1 * 0.2f64).exp();
    for (u, x) in tr.final_field.u.iter().zip(ic.grid.nodes()) {
        assert!((u - decay * (2.0 * x).cos()).abs() < 1e-4 * decay);
    }
}
