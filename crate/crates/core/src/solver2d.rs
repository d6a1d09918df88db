//! Two-dimensional finite differences on `(-1, 1)^2` advanced by
//! Peaceman-Rachford ADI with trapezoidal reaction quadrature.
//!
//! Arrays are row-major with `idx = i * ny + j`, `i` along `x`.

use serde::{Deserialize, Serialize};

use crate::controller::{self, BlowupReport, ControllerState, Monitored, StepControllerCfg};
use crate::error::{Error, Result};
use crate::kinetics::{Kinetics, ModelVariant, ParameterSet, Rates, VariantKind};
use crate::solver1d::PopulationSample;
use crate::tridiag::{ThomasFactor, TridiagonalOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FDGrid2D {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl FDGrid2D {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3x3 nodes, got {nx}x{ny}")));
        }
        Ok(Self {
            nx,
            ny,
            hx: 2.0 / (nx - 1) as f64,
            hy: 2.0 / (ny - 1) as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: usize) -> f64 {
        -1.0 + i as f64 * self.hx
    }

    pub fn y(&self, j: usize) -> f64 {
        -1.0 + j as f64 * self.hy
    }

    /// Trapezoidal rule over the square.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.nx {
            let wx = if i == 0 || i + 1 == self.nx { 0.5 } else { 1.0 };
            let row = &values[i * self.ny..(i + 1) * self.ny];
            let mut s = 0.5 * (row[0] + row[self.ny - 1]);
            s += row[1..self.ny - 1].iter().sum::<f64>();
            total += wx * s;
        }
        total * self.hx * self.hy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateField2D {
    pub grid: FDGrid2D,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub time: f64,
}

impl StateField2D {
    pub fn new(grid: FDGrid2D, u: Vec<f64>, v: Vec<f64>, r: Vec<f64>, time: f64) -> Result<Self> {
        let n = grid.len();
        if u.len() != n || v.len() != n || r.len() != n {
            return Err(Error::InvalidArgument(format!(
                "field arrays must have {n} entries"
            )));
        }
        let field = Self { grid, u, v, r, time };
        if !Monitored::is_finite(&field) {
            return Err(Error::NonFinite("initial field"));
        }
        Ok(field)
    }

    pub fn from_fn(grid: FDGrid2D, f: impl Fn(f64, f64) -> (f64, f64, f64)) -> Self {
        let n = grid.len();
        let (mut u, mut v, mut r) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                let (a, b, c) = f(grid.x(i), grid.y(j));
                u.push(a);
                v.push(b);
                r.push(c);
            }
        }
        Self { grid, u, v, r, time: 0.0 }
    }

    pub fn populations(&self) -> (f64, f64, f64) {
        (
            self.grid.integrate(&self.u),
            self.grid.integrate(&self.v),
            self.grid.integrate(&self.r),
        )
    }
}

impl Monitored for StateField2D {
    fn time(&self) -> f64 {
        self.time
    }

    fn sup_r(&self) -> f64 {
        self.r.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn is_finite(&self) -> bool {
        self.u
            .iter()
            .chain(&self.v)
            .chain(&self.r)
            .all(|x| x.is_finite())
    }
}

/// State at which the reaction of the second half-sweep is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionLag {
    /// `2 w̃ - w`, a linear extrapolation to the end of the step.
    #[default]
    Extrapolated,
    /// The half-step field `w̃` itself.
    Intermediate,
}

/// Peaceman-Rachford stepper for a diagonal diffusion and an arbitrary
/// pointwise source `f(t, idx, u, v, r)`.
pub struct AdiStepper {
    grid: FDGrid2D,
    lx: [TridiagonalOperator; 3],
    ly: [TridiagonalOperator; 3],
    cached: Option<(u64, [ThomasFactor; 3], [ThomasFactor; 3])>,
    pub lag: ReactionLag,
}

impl AdiStepper {
    pub fn new(grid: FDGrid2D, diffusion: [f64; 3], lag: ReactionLag) -> Result<Self> {
        let mk = |n, h| -> Result<[TridiagonalOperator; 3]> {
            Ok([
                TridiagonalOperator::neumann_laplacian(n, h, diffusion[0])?,
                TridiagonalOperator::neumann_laplacian(n, h, diffusion[1])?,
                TridiagonalOperator::neumann_laplacian(n, h, diffusion[2])?,
            ])
        };
        Ok(Self {
            lx: mk(grid.nx, grid.hx)?,
            ly: mk(grid.ny, grid.hy)?,
            grid,
            cached: None,
            lag,
        })
    }

    fn factors(&mut self, dt: f64) -> Result<()> {
        if self.cached.as_ref().map(|c| c.0) == Some(dt.to_bits()) {
            return Ok(());
        }
        let f = |ops: &[TridiagonalOperator; 3]| -> Result<[ThomasFactor; 3]> {
            Ok([
                ops[0].shifted(1.0, -0.5 * dt).factor()?,
                ops[1].shifted(1.0, -0.5 * dt).factor()?,
                ops[2].shifted(1.0, -0.5 * dt).factor()?,
            ])
        };
        self.cached = Some((dt.to_bits(), f(&self.lx)?, f(&self.ly)?));
        Ok(())
    }

    /// One step:
    /// `(I - dt/2 A) w̃ = (I + dt/2 B) w + dt/2 f(t, w)`, then
    /// `(I - dt/2 B) w⁺ = (I + dt/2 A) w̃ + dt/2 f(t + dt, w_lag)`.
    pub fn step<F>(&mut self, field: &StateField2D, dt: f64, source: F) -> Result<StateField2D>
    where
        F: Fn(f64, usize, f64, f64, f64) -> Rates,
    {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        self.factors(dt)?;
        let (_, fx, fy) = self.cached.as_ref().unwrap();
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let n = self.grid.len();
        let half = 0.5 * dt;

        let eval = |t: f64, w: [&[f64]; 3]| -> [Vec<f64>; 3] {
            let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for k in 0..n {
                let rates = source(t, k, w[0][k], w[1][k], w[2][k]);
                out[0][k] = rates.f;
                out[1][k] = rates.g;
                out[2][k] = rates.h;
            }
            out
        };

        let w = [&field.u[..], &field.v[..], &field.r[..]];
        let f0 = eval(field.time, w);
        let mut line = vec![0.0; nx.max(ny)];
        let mut applied = vec![0.0; nx.max(ny)];

        // First half-sweep: implicit in x, explicit in y.
        let mut tilde = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for s in 0..3 {
            let mut rhs = vec![0.0; n];
            for i in 0..nx {
                let row = &w[s][i * ny..(i + 1) * ny];
                self.ly[s].apply(row, &mut applied[..ny]);
                for j in 0..ny {
                    rhs[i * ny + j] = row[j] + half * applied[j] + half * f0[s][i * ny + j];
                }
            }
            for j in 0..ny {
                for i in 0..nx {
                    line[i] = rhs[i * ny + j];
                }
                fx[s].solve_in_place(&mut line[..nx]);
                for i in 0..nx {
                    tilde[s][i * ny + j] = line[i];
                }
            }
        }

        let lagged: [Vec<f64>; 3] = match self.lag {
            ReactionLag::Extrapolated => [0, 1, 2].map(|s| {
                tilde[s].iter().zip(w[s]).map(|(a, b)| 2.0 * a - b).collect()
            }),
            ReactionLag::Intermediate => tilde.clone(),
        };
        let f1 = eval(field.time + dt, [&lagged[0], &lagged[1], &lagged[2]]);

        // Second half-sweep: implicit in y, explicit in x.
        let mut next = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for s in 0..3 {
            let mut rhs = vec![0.0; n];
            for j in 0..ny {
                for i in 0..nx {
                    line[i] = tilde[s][i * ny + j];
                }
                self.lx[s].apply(&line[..nx], &mut applied[..nx]);
                for i in 0..nx {
                    rhs[i * ny + j] = line[i] + half * applied[i] + half * f1[s][i * ny + j];
                }
            }
            for i in 0..nx {
                let out = &mut next[s][i * ny..(i + 1) * ny];
                out.copy_from_slice(&rhs[i * ny..(i + 1) * ny]);
                fy[s].solve_in_place(out);
            }
        }
        let [u, v, r] = next;
        let out = StateField2D {
            grid: self.grid,
            u,
            v,
            r,
            time: field.time + dt,
        };
        if !Monitored::is_finite(&out) {
            return Err(Error::NonFinite("ADI step"));
        }
        Ok(out)
    }
}

/// Model-specific ADI solver; supports the classical and refuge-only variants.
pub struct Solver2D<'a> {
    kin: Kinetics<'a>,
    b1: Vec<f64>,
    adi: AdiStepper,
}

impl<'a> Solver2D<'a> {
    pub fn new(
        variant: &ModelVariant,
        params: &'a ParameterSet,
        grid: FDGrid2D,
        lag: ReactionLag,
    ) -> Result<Self> {
        params.validate()?;
        variant.validate()?;
        match variant.kind {
            VariantKind::Classical if params.d4 > 0.0 => {
                return Err(Error::UnsupportedVariant(
                    "classical with overcrowding (2-D has no overcrowding flux)".into(),
                ))
            }
            VariantKind::Classical | VariantKind::RefugeOnly => {}
            other => return Err(Error::UnsupportedVariant(other.name().into())),
        }
        let mut b1 = Vec::with_capacity(grid.len());
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                b1.push(variant.refuge_at(grid.x(i), grid.y(j)));
            }
        }
        Ok(Self {
            kin: Kinetics::new(variant.kind, params),
            b1,
            adi: AdiStepper::new(grid, [params.d1, params.d2, params.d3], lag)?,
        })
    }

    pub fn step(&mut self, field: &StateField2D, dt: f64) -> Result<StateField2D> {
        if field.grid != self.adi.grid {
            return Err(Error::InvalidArgument("field grid does not match solver grid".into()));
        }
        let kin = self.kin;
        let b1 = &self.b1;
        self.adi.step(field, dt, |_, k, u, v, r| {
            kin.rates(b1[k], u.max(0.0), v.max(0.0), r.max(0.0))
        })
    }
}

pub fn step_peaceman_rachford(
    variant: &ModelVariant,
    params: &ParameterSet,
    field: &StateField2D,
    dt: f64,
) -> Result<StateField2D> {
    Solver2D::new(variant, params, field.grid, ReactionLag::default())?.step(field, dt)
}

#[derive(Debug, Clone)]
pub struct Trajectory2D {
    pub final_field: StateField2D,
    pub snapshots: Vec<StateField2D>,
    pub population: Vec<PopulationSample>,
    pub report: BlowupReport,
    pub controller: ControllerState,
}

fn population_sample(field: &StateField2D) -> PopulationSample {
    let (u, v, r) = field.populations();
    PopulationSample { t: field.time, u, v, r }
}

pub fn integrate_2d(
    variant: &ModelVariant,
    params: &ParameterSet,
    ic: &StateField2D,
    horizon: f64,
    controller: &StepControllerCfg,
) -> Result<Trajectory2D> {
    integrate_2d_with(
        variant,
        params,
        ic.clone(),
        horizon,
        controller,
        ControllerState::new(controller),
        ReactionLag::default(),
        |_, _| {},
    )
}

#[allow(clippy::too_many_arguments)]
pub fn integrate_2d_with<O>(
    variant: &ModelVariant,
    params: &ParameterSet,
    ic: StateField2D,
    horizon: f64,
    controller: &StepControllerCfg,
    mut state: ControllerState,
    lag: ReactionLag,
    mut observe: O,
) -> Result<Trajectory2D>
where
    O: FnMut(&StateField2D, &ControllerState),
{
    controller.validate()?;
    if !(horizon >= ic.time) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} precedes the initial time {}",
            ic.time
        )));
    }
    if !Monitored::is_finite(&ic) {
        return Err(Error::NonFinite("initial field"));
    }
    let mut solver = Solver2D::new(variant, params, ic.grid, lag)?;
    let mut snapshots = vec![ic.clone()];
    let mut population = vec![population_sample(&ic)];
    let stride = controller.snapshot_stride;
    let (final_field, verdict) = controller::drive(
        ic,
        horizon,
        controller,
        &mut state,
        |f, dt| solver.step(f, dt),
        |f, st| {
            population.push(population_sample(f));
            if stride > 0 && st.accepted % stride == 0 {
                snapshots.push(f.clone());
            }
            observe(f, st);
        },
    )?;
    if snapshots.last().map(|s| s.time) != Some(final_field.time) {
        snapshots.push(final_field.clone());
    }
    let report = BlowupReport {
        verdict,
        terminal_sup_norm: final_field.sup_r(),
        terminal_population: final_field.grid.integrate(&final_field.r),
        rejection_count: state.rejections,
        accepted_steps: state.accepted,
    };
    Ok(Trajectory2D {
        final_field,
        snapshots,
        population,
        report,
        controller: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::RefugeProfile;
    use std::f64::consts::PI;

    fn zero_rates(_: f64, _: usize, _: f64, _: f64, _: f64) -> Rates {
        Rates::default()
    }

    #[test]
    fn grid_spacing_and_area() {
        let g = FDGrid2D::new(50, 50).unwrap();
        assert!((g.hx - 2.0 / 49.0).abs() < 1e-15);
        assert_eq!(g.x(0), -1.0);
        assert!((g.x(49) - 1.0).abs() < 1e-14);
        let ones = vec![1.0; g.len()];
        assert!((g.integrate(&ones) - 4.0).abs() < 1e-12);
        assert!(FDGrid2D::new(2, 5).is_err());
    }

    #[test]
    fn constant_field_unchanged_without_reactions() {
        let g = FDGrid2D::new(9, 11).unwrap();
        let field = StateField2D::from_fn(g, |_, _| (1.5, 2.5, 3.5));
        let mut adi = AdiStepper::new(g, [0.1, 0.2, 0.3], ReactionLag::default()).unwrap();
        let next = adi.step(&field, 0.01, zero_rates).unwrap();
        for k in 0..g.len() {
            assert!((next.u[k] - 1.5).abs() < 1e-13);
            assert!((next.r[k] - 3.5).abs() < 1e-13);
        }
    }

    #[test]
    fn diffusion_conserves_trapezoid_integral() {
        let g = FDGrid2D::new(21, 17).unwrap();
        let field = StateField2D::from_fn(g, |x, y| ((3.0 * x).sin() + y * y, x * y + 1.0, (x + y).exp()));
        let mut adi = AdiStepper::new(g, [0.1, 0.05, 0.2], ReactionLag::default()).unwrap();
        let before = field.populations();
        let mut f = field;
        for _ in 0..10 {
            f = adi.step(&f, 1e-3, zero_rates).unwrap();
        }
        let after = f.populations();
        assert!((after.0 - before.0).abs() <= 1e-10 * before.0.abs().max(1.0) * 10.0);
        assert!((after.2 - before.2).abs() <= 1e-10 * before.2.abs() * 10.0);
    }

    #[test]
    fn unsupported_variants_rejected() {
        let p = ParameterSet::refuge_1d();
        let g = FDGrid2D::new(5, 5).unwrap();
        let v = ModelVariant::with_refuge(VariantKind::RefugeOvercrowd, RefugeProfile::One).unwrap();
        assert!(matches!(
            Solver2D::new(&v, &p, g, ReactionLag::default()),
            Err(Error::UnsupportedVariant(_))
        ));
        let mut p4 = p;
        p4.d4 = 0.1;
        assert!(Solver2D::new(&ModelVariant::classical(), &p4, g, ReactionLag::default()).is_err());
    }

    #[test]
    fn separable_mode_decay() {
        let g = FDGrid2D::new(50, 50).unwrap();
        let d = 0.1;
        let field = StateField2D::from_fn(g, |x, y| ((PI * x).cos() * (PI * y).cos(), 0.0, 0.0));
        let mut adi = AdiStepper::new(g, [d, d, d], ReactionLag::default()).unwrap();
        let mut f = field.clone();
        let steps = 100;
        for _ in 0..steps {
            f = adi.step(&f, 1e-3, zero_rates).unwrap();
        }
        let t = 0.1;
        let expected = (-2.0 * d * PI * PI * t).exp();
        let ratio = f.u[0] / field.u[0];
        assert!((ratio - expected).abs() / expected < 0.01, "{ratio} vs {expected}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let p = ParameterSet::avoided_2d();
        let g = FDGrid2D::new(9, 9).unwrap();
        let ic = StateField2D::from_fn(g, |_, _| (0.0, 0.0, 0.0));
        let tr = integrate_2d(&ModelVariant::classical(), &p, &ic, 0.1, &StepControllerCfg::new(0.01)).unwrap();
        assert!(tr.final_field.r.iter().all(|v| *v == 0.0));
    }
}
