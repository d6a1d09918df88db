//! Interior equilibrium, linearization, dispersion relation and the
//! closed-form existence and blow-up estimates.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::cheb::ChebGrid;
use crate::error::{Error, Result};
use crate::kinetics::ParameterSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub u_star: f64,
    pub v_star: f64,
    pub r_star: f64,
}

/// Positive interior steady state of the classical kinetics.
///
/// `v*` solves `h = 0` with `r ≠ 0`; `u*` is the larger root of `f/u = 0`
/// and `r*` follows from `g = 0`.
pub fn interior_equilibrium(p: &ParameterSet) -> Result<Equilibrium> {
    let v_star = p.w3 / p.c - p.sat3;
    if !(v_star > 0.0) {
        return Err(Error::NoPositiveEquilibrium(format!(
            "v* = w3/c - sat3 = {v_star} is not positive"
        )));
    }
    let q = (p.a1 - p.b2 * p.sat0) / (2.0 * p.b2);
    let disc = q * q - (p.w0 * v_star - p.a1 * p.sat0) / p.b2;
    if !(disc >= 0.0) {
        return Err(Error::NoPositiveEquilibrium(format!(
            "negative discriminant {disc} in the u* quadratic"
        )));
    }
    let u_star = q + disc.sqrt();
    if !(u_star > 0.0) {
        return Err(Error::NoPositiveEquilibrium(format!("u* = {u_star} is not positive")));
    }
    let r_star = (v_star + p.sat2) / p.w2 * (p.w1 * u_star / (u_star + p.sat1) - p.a2);
    if !(r_star >= 0.0) {
        return Err(Error::NoPositiveEquilibrium(format!("r* = {r_star} is negative")));
    }
    Ok(Equilibrium {
        u_star,
        v_star,
        r_star,
    })
}

/// Kinetic Jacobian at the interior equilibrium, rows are equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianMatrix(pub [[f64; 3]; 3]);

impl JacobianMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.0[i][j])
    }
}

pub fn jacobian(p: &ParameterSet, eq: &Equilibrium) -> JacobianMatrix {
    let (u, v, r) = (eq.u_star, eq.v_star, eq.r_star);
    let a11 = u * (-p.b2 + p.w0 * v / ((u + p.sat0) * (u + p.sat0)));
    let a12 = -u * p.w0 / (u + p.sat0);
    let a21 = v * p.sat1 * p.w1 / ((u + p.sat1) * (u + p.sat1));
    let a22 = v * p.w2 * r / ((v + p.sat2) * (v + p.sat2));
    let a23 = -v * p.w2 / (v + p.sat2);
    let a32 = r * r * p.w3 / ((v + p.sat3) * (v + p.sat3));
    JacobianMatrix([[a11, a12, 0.0], [a21, a22, a23], [0.0, a32, 0.0]])
}

/// Sign pattern rows of the coefficient table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternCase {
    /// `A0 > 0`, `A2 A1 - A0 < 0`, `A1 < 0`.
    SpatioTemporal,
    /// `A0 < 0`, `A2 A1 - A0 > 0`, `A1 > 0`.
    FixedSpatial,
}

impl PatternCase {
    pub fn from_coefficients(a2: f64, a1: f64, a0: f64) -> Option<Self> {
        let h = a2 * a1 - a0;
        if a0 > 0.0 && h < 0.0 && a1 < 0.0 {
            Some(PatternCase::SpatioTemporal)
        } else if a0 < 0.0 && h > 0.0 && a1 > 0.0 {
            Some(PatternCase::FixedSpatial)
        } else {
            None
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PatternCase::SpatioTemporal => "spatio-temporal",
            PatternCase::FixedSpatial => "fixed-spatial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionResult {
    pub k_squared: f64,
    pub a3: f64,
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    pub max_real_part: f64,
    pub stable: bool,
    pub case: Option<PatternCase>,
}

impl DispersionResult {
    pub fn hurwitz_gap(&self) -> f64 {
        self.a1 * self.a2 - self.a0
    }
}

/// Diffusion entry of `r`, including the overcrowding linearization.
pub fn effective_r_diffusion(p: &ParameterSet, eq: &Equilibrium, d4: f64) -> f64 {
    p.d3 + 2.0 * d4 * eq.r_star
}

/// Coefficients of `det(λI - (J - k^2 D)) = λ^3 + A2 λ^2 + A1 λ + A0`.
pub fn dispersion(p: &ParameterSet, eq: &Equilibrium, d4: f64, k_squared: f64) -> DispersionResult {
    let j = jacobian(p, eq);
    let (a11, a12, a21, a22, a23, a32, a33) = (
        j.get(0, 0),
        j.get(0, 1),
        j.get(1, 0),
        j.get(1, 1),
        j.get(1, 2),
        j.get(2, 1),
        j.get(2, 2),
    );
    let (d1, d2) = (p.d1, p.d2);
    let d33 = effective_r_diffusion(p, eq, d4);
    let k2 = k_squared;
    let k4 = k2 * k2;
    let a2 = (d1 + d2 + d33) * k2 - a11 - a22 - a33;
    let minor23 = a22 * a33 - a22 * d33 * k2 - a23 * a32 - d2 * a33 * k2 + d2 * d33 * k4;
    let a1 = minor23 - a12 * a21 + (d1 * k2 - a11) * (d2 * k2 + d33 * k2 - a22 - a33);
    let a0 = (d1 * k2 - a11) * minor23 - a12 * a21 * d33 * k2 + a12 * a21 * a33;
    DispersionResult {
        k_squared,
        a3: 1.0,
        a2,
        a1,
        a0,
        max_real_part: max_real_root(a2, a1, a0),
        stable: routh_hurwitz_stable(1.0, a2, a1, a0),
        case: PatternCase::from_coefficients(a2, a1, a0),
    }
}

/// Dispersion results at each wavenumber `k` (not `k^2`).
pub fn dispersion_sweep(
    p: &ParameterSet,
    eq: &Equilibrium,
    d4: f64,
    wavenumbers: &[f64],
) -> Vec<DispersionResult> {
    wavenumbers
        .iter()
        .map(|k| dispersion(p, eq, d4, k * k))
        .collect()
}

/// Largest real part among the roots of `λ^3 + a2 λ^2 + a1 λ + a0`, from the
/// eigenvalues of its companion matrix.
pub fn max_real_root(a2: f64, a1: f64, a0: f64) -> f64 {
    let companion = Matrix3::new(-a2, -a1, -a0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn routh_hurwitz_stable(a3: f64, a2: f64, a1: f64, a0: f64) -> bool {
    a3 > 0.0 && a2 > 0.0 && a1 > 0.0 && a0 > 0.0 && a1 * a2 > a0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    None,
    SpatioTemporal,
    FixedSpatial,
}

/// Pattern type of a sweep that starts at `k = 0`.
pub fn classify_pattern(sweep: &[DispersionResult]) -> Result<Pattern> {
    let Some(first) = sweep.first() else {
        return Err(Error::InvalidArgument("empty dispersion sweep".into()));
    };
    if first.k_squared != 0.0 {
        return Err(Error::InvalidArgument("sweep must start at k = 0".into()));
    }
    if first.max_real_part >= 0.0 {
        return Ok(Pattern::None);
    }
    let worst = sweep[1..]
        .iter()
        .filter(|d| d.max_real_part > 0.0)
        .max_by(|a, b| a.max_real_part.total_cmp(&b.max_real_part));
    let Some(worst) = worst else {
        return Ok(Pattern::None);
    };
    match worst.case {
        Some(PatternCase::SpatioTemporal) => Ok(Pattern::SpatioTemporal),
        Some(PatternCase::FixedSpatial) => Ok(Pattern::FixedSpatial),
        None => Err(Error::AmbiguousSigns {
            k_squared: worst.k_squared,
        }),
    }
}

/// Largest `c` for which solutions stay uniformly bounded.
pub fn aziz_bound(p: &ParameterSet) -> f64 {
    let prey = p.w1 * (p.a1 + p.a1 * p.a1 / (4.0 * p.a2));
    let top = p.w0 * p.b2 * p.sat3;
    top / (prey + top) * (p.w3 / p.sat3)
}

pub fn satisfies_aziz_bound(p: &ParameterSet) -> bool {
    p.c < aziz_bound(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalThreshold {
    /// Minimal `a2` for global existence.
    pub a2_threshold: f64,
    /// Time for `v` to decay to `w3/c - sat3`; infinite when `a2 <= w1`.
    pub t_star: f64,
    /// Blow-up time `1/(c r0)` of `r' = c r^2`.
    pub t_star_star: f64,
}

pub fn a2_global_threshold(p: &ParameterSet, r0_max: f64, v0_max: f64) -> Result<GlobalThreshold> {
    let v_crit = p.w3 / p.c - p.sat3;
    if !(v_crit > 0.0) {
        return Err(Error::Domain(format!("w3/c - sat3 = {v_crit} is not positive")));
    }
    if v0_max < v_crit {
        return Err(Error::Domain(format!(
            "v0 = {v0_max} lies below w3/c - sat3 = {v_crit}; the threshold is vacuous"
        )));
    }
    let log = (v0_max.abs() / v_crit).ln();
    let t_star = if p.a2 > p.w1 {
        log / (p.a2 - p.w1)
    } else {
        f64::INFINITY
    };
    Ok(GlobalThreshold {
        a2_threshold: p.w1 + p.c * r0_max.abs() * log,
        t_star,
        t_star_star: 1.0 / (p.c * r0_max.abs()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyDiagnostics {
    /// `‖r'‖² - (2/3)‖r‖³₃` with plain integrals.
    pub e0: f64,
    /// `3 / ‖r0‖²`.
    pub t_star_upper: f64,
    pub small_data_ok: bool,
}

pub fn energy_diagnostics(grid: &ChebGrid, r0: &[f64]) -> Result<EnergyDiagnostics> {
    if r0.len() != grid.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} node values, got {}",
            grid.len(),
            r0.len()
        )));
    }
    let slope = grid.derivative(r0);
    let grad: Vec<f64> = slope.iter().map(|s| s * s).collect();
    let cube: Vec<f64> = r0.iter().map(|r| r.abs().powi(3)).collect();
    let square: Vec<f64> = r0.iter().map(|r| r * r).collect();
    let grad_norm = grid.integrate(&grad);
    let cube_norm = grid.integrate(&cube);
    let l2 = grid.integrate(&square);
    Ok(EnergyDiagnostics {
        e0: grad_norm - 2.0 / 3.0 * cube_norm,
        t_star_upper: if l2 > 0.0 { 3.0 / l2 } else { f64::INFINITY },
        small_data_ok: grad_norm >= 2.0 / 3.0 * cube_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{reaction, ModelVariant};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn det3(m: &Matrix3<f64>) -> f64 {
        m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
            - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
            + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
    }

    /// `(A2, A1, A0)` of `det(λI - M)` by cofactor expansion.
    fn char_poly(m: &Matrix3<f64>) -> (f64, f64, f64) {
        let tr = m.trace();
        let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
            + m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)]
            + m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)];
        (-tr, minors, -det3(m))
    }

    #[test]
    fn turing_equilibrium() {
        let eq = interior_equilibrium(&ParameterSet::turing()).unwrap();
        assert_abs_diff_eq!(eq.u_star, 10.110031, epsilon = 1e-4);
        assert_abs_diff_eq!(eq.v_star, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eq.r_star, 2.997897, epsilon = 1e-4);
    }

    #[test]
    fn no_equilibrium_when_c_too_large() {
        let mut p = ParameterSet::turing();
        p.c = p.w3 / p.sat3;
        assert!(matches!(interior_equilibrium(&p), Err(Error::NoPositiveEquilibrium(_))));
    }

    #[test]
    fn jacobian_structure_and_cofactor_oracle() {
        let p = ParameterSet::turing();
        let eq = interior_equilibrium(&p).unwrap();
        let j = jacobian(&p, &eq);
        assert_eq!((j.get(0, 2), j.get(2, 0), j.get(2, 2)), (0.0, 0.0, 0.0));
        assert!(j.get(0, 1) < 0.0 && j.get(1, 2) < 0.0);
        let (a2, a1, a0) = char_poly(&j.to_matrix());
        for d4 in [0.0, 0.16, 3.0] {
            let d = dispersion(&p, &eq, d4, 0.0);
            assert_abs_diff_eq!(d.a2, a2, epsilon = 1e-10);
            assert_abs_diff_eq!(d.a1, a1, epsilon = 1e-10);
            assert_abs_diff_eq!(d.a0, a0, epsilon = 1e-10);
        }
    }

    #[test]
    fn jacobian_matches_kinetics_derivatives() {
        let p = ParameterSet::turing();
        let eq = interior_equilibrium(&p).unwrap();
        let k = crate::kinetics::Kinetics::new(crate::kinetics::VariantKind::Classical, &p);
        let exact = k.jacobian(0.0, eq.u_star, eq.v_star, eq.r_star);
        let j = jacobian(&p, &eq);
        for row in 0..3 {
            for col in 0..3 {
                assert_abs_diff_eq!(j.get(row, col), exact[row][col], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn triple_root_is_stable() {
        assert!(routh_hurwitz_stable(1.0, 3.0, 3.0, 1.0));
        assert_abs_diff_eq!(max_real_root(3.0, 3.0, 1.0), -1.0, epsilon = 1e-4);
        assert!(!routh_hurwitz_stable(1.0, 3.0, 3.0, -1.0));
    }

    #[test]
    fn turing_patterns_change_type_with_overcrowding() {
        let p = ParameterSet::turing();
        let eq = interior_equilibrium(&p).unwrap();
        let ks: Vec<f64> = (0..=3000).map(|i| i as f64 * 0.01).collect();
        let plain = dispersion_sweep(&p, &eq, 0.0, &ks);
        assert_eq!(classify_pattern(&plain).unwrap(), Pattern::SpatioTemporal);
        let crowded = dispersion_sweep(&p, &eq, 0.16, &ks);
        assert_eq!(classify_pattern(&crowded).unwrap(), Pattern::FixedSpatial);
        assert!(crowded[0].max_real_part < 0.0);
    }

    #[test]
    fn all_stable_sweep_has_no_pattern() {
        let stable = DispersionResult {
            k_squared: 0.0,
            a3: 1.0,
            a2: 3.0,
            a1: 3.0,
            a0: 1.0,
            max_real_part: -1.0,
            stable: true,
            case: None,
        };
        let mut later = stable;
        later.k_squared = 1.0;
        assert_eq!(classify_pattern(&[stable, later]).unwrap(), Pattern::None);
    }

    #[test]
    fn aziz_bound_arithmetic() {
        let p = ParameterSet::refuge_1d();
        assert_abs_diff_eq!(aziz_bound(&p), 5.5 / 5.625 * 0.06, epsilon = 1e-15);
        assert!(satisfies_aziz_bound(&p));
        let mut q = p;
        q.w1 = 0.0;
        assert_abs_diff_eq!(aziz_bound(&q), q.w3 / q.sat3, epsilon = 1e-15);
    }

    #[test]
    fn global_threshold_arithmetic() {
        let p = ParameterSet::refuge_1d();
        let g = a2_global_threshold(&p, 10.0, 2000.0).unwrap();
        let expected = 0.1 + 0.55 * (2000.0f64 / (1.2 / 0.055 - 20.0)).ln();
        assert_abs_diff_eq!(g.a2_threshold, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(g.a2_threshold, 3.951686, epsilon = 1e-6);
        assert_abs_diff_eq!(g.t_star_star, 1.0 / 0.55, epsilon = 1e-12);
        let at = a2_global_threshold(&p, 10.0, 1.2 / 0.055 - 20.0).unwrap();
        assert_abs_diff_eq!(at.a2_threshold, p.w1, epsilon = 1e-12);
        assert!(matches!(a2_global_threshold(&p, 10.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn energy_of_simple_profiles() {
        let g = ChebGrid::new(32, 0.0, 2.0).unwrap();
        let zero = energy_diagnostics(&g, &vec![0.0; 33]).unwrap();
        assert_eq!(zero.e0, 0.0);
        assert!(zero.small_data_ok);
        let kappa = 1.5;
        let c = energy_diagnostics(&g, &vec![kappa; 33]).unwrap();
        assert_abs_diff_eq!(c.e0, -2.0 / 3.0 * kappa.powi(3) * 2.0, epsilon = 1e-10);
        assert!(!c.small_data_ok);
        // ∫ r^2 = 3 on (0, 2) with r constant sqrt(1.5).
        let s = energy_diagnostics(&g, &vec![1.5f64.sqrt(); 33]).unwrap();
        assert_abs_diff_eq!(s.t_star_upper, 1.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn equilibrium_is_a_rest_point(a1 in 0.5f64..3.0, a2 in 0.1f64..1.0, b2 in 0.05f64..0.5,
                c in 0.03f64..0.055, w1 in 1.0f64..3.0) {
            let mut p = ParameterSet::turing();
            p.a1 = a1; p.a2 = a2; p.b2 = b2; p.c = c; p.w1 = w1;
            if let Ok(eq) = interior_equilibrium(&p) {
                let rates = reaction(&ModelVariant::classical(), &p,
                    (eq.u_star, eq.v_star, eq.r_star), (0.0, 0.0)).unwrap();
                let scale = eq.u_star.max(eq.v_star).max(eq.r_star).max(1.0);
                prop_assert!(rates.f.abs() <= 1e-10 * scale * scale);
                prop_assert!(rates.g.abs() <= 1e-10 * scale * scale);
                prop_assert!(rates.h.abs() <= 1e-10 * scale * scale);
            }
        }

        #[test]
        fn coefficients_match_characteristic_polynomial(a1 in 0.5f64..3.0, a2 in 0.1f64..1.0,
                b2 in 0.05f64..0.5, c in 0.03f64..0.055, w1 in 1.0f64..3.0,
                d in prop::array::uniform3(1e-4f64..1.0), d4 in 0.0f64..1.0, k2 in 0.0f64..50.0) {
            let mut p = ParameterSet::turing();
            p.a1 = a1; p.a2 = a2; p.b2 = b2; p.c = c; p.w1 = w1;
            p.d1 = d[0]; p.d2 = d[1]; p.d3 = d[2];
            if let Ok(eq) = interior_equilibrium(&p) {
                let m = jacobian(&p, &eq).to_matrix()
                    - Matrix3::from_diagonal(&nalgebra::Vector3::new(
                        p.d1, p.d2, effective_r_diffusion(&p, &eq, d4))) * k2;
                let (a2o, a1o, a0o) = char_poly(&m);
                let res = dispersion(&p, &eq, d4, k2);
                for (x, y) in [(res.a2, a2o), (res.a1, a1o), (res.a0, a0o)] {
                    prop_assert!((x - y).abs() <= 1e-8 * y.abs().max(1.0), "{} vs {}", x, y);
                }
            }
        }

        #[test]
        fn overcrowding_raises_r_diffusion(d4a in 0.0f64..1.0, extra in 1e-3f64..1.0) {
            let p = ParameterSet::turing();
            let eq = interior_equilibrium(&p).unwrap();
            prop_assert!(effective_r_diffusion(&p, &eq, d4a + extra) > effective_r_diffusion(&p, &eq, d4a));
        }
    }
}
