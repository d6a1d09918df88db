use ecodamp::stability::{
    classify_pattern, dispersion_sweep, interior_equilibrium, jacobian, max_real_root, routh_hurwitz_stable,
};
use ecodamp::{ParameterSet, Pattern};
use nalgebra::Matrix3;
use proptest::prelude::*;

#[test]
fn turing_equilibrium_regression() {
    let eq = interior_equilibrium(&ParameterSet::turing()).unwrap();
    assert!((eq.u_star - 10.110031).abs() < 1e-4);
    assert!((eq.v_star - 10.0).abs() < 1e-4);
    assert!((eq.r_star - 2.997897).abs() < 1e-4);
}

#[test]
fn jacobian_has_zero_r_diagonal_at_equilibrium() {
    let p = ParameterSet::turing();
    let j = jacobian(&p, &interior_equilibrium(&p).unwrap());
    assert!(j.get(2, 2).abs() < 1e-12);
}

#[test]
fn overcrowding_changes_pattern_type() {
    let p = ParameterSet::turing();
    let eq = interior_equilibrium(&p).unwrap();
    let ks: Vec<f64> = (0..=8000).map(|i| 80.0 * i as f64 / 8000.0).collect();
    let plain = dispersion_sweep(&p, &eq, 0.0, &ks);
    let crowded = dispersion_sweep(&p, &eq, 0.16, &ks);
    assert_eq!(classify_pattern(&plain).unwrap(), Pattern::SpatioTemporal);
    assert_eq!(classify_pattern(&crowded).unwrap(), Pattern::FixedSpatial);
    assert!(crowded[0].stable);
    let unstable: Vec<bool> = crowded.iter().map(|d| d.max_real_part > 0.0).collect();
    let a = unstable.iter().position(|u| *u).unwrap();
    let b = unstable.iter().rposition(|u| *u).unwrap();
    assert!(unstable[a..=b].iter().all(|u| *u));
}

fn coefficients(j: &Matrix3<f64>) -> (f64, f64, f64) {
    let m = |r: usize, c: usize| j[(r, c)];
    let minors = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)
        + m(1, 1) * m(2, 2)
        - m(1, 2) * m(2, 1);
    (-j.trace(), minors, -j.determinant())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn routh_hurwitz_agrees_with_eigenvalues(entries in proptest::array::uniform9(-3.0f64..3.0)) {
        let j = Matrix3::from_row_slice(&entries);
        let (a2, a1, a0) = coefficients(&j);
        let companion = max_real_root(a2, a1, a0);
        let direct = j.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(companion.abs() > 1e-8 && direct.abs() > 1e-8);
        let rh = routh_hurwitz_stable(1.0, a2, a1, a0);
        prop_assert_eq!(rh, companion < 0.0);
        prop_assert_eq!(rh, direct < 0.0);
    }
}
