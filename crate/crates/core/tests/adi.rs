use std::f64::consts::PI;

use ecodamp::solver2d::AdiStepper;
use ecodamp::stability::interior_equilibrium;
use ecodamp::{
    integrate_2d, FDGrid2D, ModelVariant, ParameterSet, Rates, ReactionLag, StateField2D, StepControllerCfg,
    TridiagonalOperator,
};
use nalgebra::DMatrix;

fn zero_rates(_: f64, _: usize, _: f64, _: f64, _: f64) -> Rates {
    Rates::default()
}

/// Max error of the manufactured solution `e^{-t} cos(πx) cos(πy)` at `t = 0.05`.
fn manufactured_error(n: usize) -> f64 {
    let g = FDGrid2D::new(n, n).unwrap();
    let d = 0.1;
    let shape = |k: usize| (PI * g.x(k / n)).cos() * (PI * g.y(k % n)).cos();
    let amp = -1.0 + 2.0 * d * PI * PI;
    let mut adi = AdiStepper::new(g, [d; 3], ReactionLag::default()).unwrap();
    let mut w = StateField2D::from_fn(g, |x, y| ((PI * x).cos() * (PI * y).cos(), 0.0, 0.0));
    for _ in 0..500 {
        w = adi
            .step(&w, 1e-4, |t, k, _, _, _| Rates { f: amp * (-t).exp() * shape(k), g: 0.0, h: 0.0 })
            .unwrap();
    }
    let decay = (-0.05f64).exp();
    (0..g.len()).map(|k| (w.u[k] - decay * shape(k)).abs()).fold(0.0, f64::max)
}

#[test]
fn spatial_order_is_two() {
    let e: Vec<f64> = [33, 65, 129].iter().map(|&n| manufactured_error(n)).collect();
    for w in e.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "{e:?}");
    }
}

fn dense(op: &TridiagonalOperator) -> DMatrix<f64> {
    let n = op.len();
    DMatrix::from_fn(n, n, |i, j| match j as isize - i as isize {
        0 => op.main[i],
        -1 => op.sub[i],
        1 => op.sup[i],
        _ => 0.0,
    })
}

#[test]
fn matches_dense_peaceman_rachford_and_trapezoid() {
    let n = 9;
    let g = FDGrid2D::new(n, n).unwrap();
    let d = 0.3;
    let l = dense(&TridiagonalOperator::neumann_laplacian(n, g.hx, d).unwrap());
    let id = DMatrix::<f64>::identity(n, n);
    let a = l.kronecker(&id);
    let b = id.kronecker(&l);
    let big = DMatrix::<f64>::identity(n * n, n * n);
    let field = StateField2D::from_fn(g, |x, y| (1.0 + (2.0 * x).sin() * y + x * x, 0.0, 0.0));
    let w = nalgebra::DVector::from_column_slice(&field.u);

    for dt in [0.01, 0.001] {
        let h = 0.5 * dt;
        let half = (&big - &a * h).lu().solve(&((&big + &b * h) * &w)).unwrap();
        let pr = (&big - &b * h).lu().solve(&((&big + &a * h) * half)).unwrap();
        let sum = &a + &b;
        let trap = (&big - &sum * h).lu().solve(&((&big + &sum * h) * &w)).unwrap();

        let mut adi = AdiStepper::new(g, [d; 3], ReactionLag::default()).unwrap();
        let got = adi.step(&field, dt, zero_rates).unwrap();
        let err_pr = (0..n * n).map(|k| (got.u[k] - pr[k]).abs()).fold(0.0, f64::max);
        let err_trap = (0..n * n).map(|k| (got.u[k] - trap[k]).abs()).fold(0.0, f64::max);
        assert!(err_pr < 1e-12, "{err_pr}");
        assert!(err_trap < 10.0 * dt.powi(3) * d * d / g.hx.powi(4), "{dt} {err_trap}");
    }
}

#[test]
fn equilibrium_persists_in_two_dimensions() {
    let p = ParameterSet::turing();
    let eq = interior_equilibrium(&p).unwrap();
    let g = FDGrid2D::new(12, 12).unwrap();
    let ic = StateField2D::from_fn(g, |_, _| (eq.u_star, eq.v_star, eq.r_star));
    let tr = integrate_2d(&ModelVariant::classical(), &p, &ic, 5.0, &StepControllerCfg::new(0.05)).unwrap();
    for k in 0..g.len() {
        assert!((tr.final_field.u[k] - eq.u_star).abs() < 1e-8 * eq.u_star);
        assert!((tr.final_field.v[k] - eq.v_star).abs() < 1e-8 * eq.v_star);
        assert!((tr.final_field.r[k] - eq.r_star).abs() < 1e-8 * eq.r_star);
    }
}

#[test]
fn thomas_matches_dense_solve() {
    let n = 40;
    let mut op = TridiagonalOperator::identity(n);
    for i in 0..n {
        let s = i as f64;
        op.main[i] = 3.0 + (0.7 * s).sin();
        if i > 0 {
            op.sub[i] = (1.3 * s).cos();
        }
        if i + 1 < n {
            op.sup[i] = 0.5 * (0.4 * s).sin() - 0.3;
        }
    }
    let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos()).collect();
    let x = ecodamp::thomas_solve(&op, &rhs).unwrap();
    let y = dense(&op).lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
    for i in 0..n {
        assert!((x[i] - y[i]).abs() < 1e-12);
    }
}
