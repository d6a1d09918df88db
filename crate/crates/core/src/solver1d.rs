//! One-dimensional Chebyshev collocation solver with trapezoidal (AM2) time
//! stepping, Newton iterations and preconditioned GMRES.
//!
//! The unknowns are the interior node values of `u`, `v` and `r`; the two
//! boundary values of each species follow from the homogeneous Neumann
//! condition `(D1 w)_0 = (D1 w)_N = 0`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::cheb::ChebGrid;
use crate::controller::{self, BlowupReport, ControllerState, Monitored, StepControllerCfg, Verdict};
use crate::error::{Error, Result};
use crate::gmres::{gmres, GmresConfig};
use crate::kinetics::{Kinetics, ModelVariant, ParameterSet};

#[derive(Debug, Clone)]
pub struct StateField1D {
    pub grid: Arc<ChebGrid>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub time: f64,
}

impl StateField1D {
    pub fn new(grid: Arc<ChebGrid>, u: Vec<f64>, v: Vec<f64>, r: Vec<f64>, time: f64) -> Result<Self> {
        let n = grid.len();
        if u.len() != n || v.len() != n || r.len() != n {
            return Err(Error::InvalidArgument(format!(
                "field arrays must have {n} entries, got {}, {}, {}",
                u.len(),
                v.len(),
                r.len()
            )));
        }
        let field = Self { grid, u, v, r, time };
        if !Monitored::is_finite(&field) {
            return Err(Error::NonFinite("initial field"));
        }
        Ok(field)
    }

    pub fn constant(grid: Arc<ChebGrid>, u: f64, v: f64, r: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            u: vec![u; n],
            v: vec![v; n],
            r: vec![r; n],
            time: 0.0,
        }
    }

    /// Field with each species sampled from a function of `x`.
    pub fn from_fn(grid: Arc<ChebGrid>, f: impl Fn(f64) -> (f64, f64, f64)) -> Self {
        let (mut u, mut v, mut r) = (Vec::new(), Vec::new(), Vec::new());
        for &x in grid.nodes() {
            let (a, b, c) = f(x);
            u.push(a);
            v.push(b);
            r.push(c);
        }
        Self { grid, u, v, r, time: 0.0 }
    }

    /// `(∫u, ∫v, ∫r)` by Clenshaw-Curtis quadrature.
    pub fn populations(&self) -> (f64, f64, f64) {
        (
            self.grid.integrate(&self.u),
            self.grid.integrate(&self.v),
            self.grid.integrate(&self.r),
        )
    }

    fn interior(&self) -> Vec<f64> {
        let n = self.grid.degree();
        let mut x = Vec::with_capacity(3 * (n - 1));
        for s in [&self.u, &self.v, &self.r] {
            x.extend_from_slice(&s[1..n]);
        }
        x
    }
}

impl Monitored for StateField1D {
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    #[default]
    Analytic,
    /// Directional differences of the right-hand side.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Max-norm residual target, scaled by `max(1, ‖X‖∞)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverConfig1D {
    pub newton: NewtonConfig,
    pub gmres: GmresConfig,
    pub jacobian: JacobianMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub newton_iterations: usize,
    pub gmres_iterations: usize,
    pub residual: f64,
    /// Negative node values in the new state (reactions see them as zero).
    pub clamped: usize,
}

/// Semi-discrete right-hand side on full node arrays.
///
/// Interior rows apply `D2` to the given arrays; boundary rows are the rates
/// of the closure-implied boundary values.
pub fn apply_rhs_1d(
    variant: &ModelVariant,
    params: &ParameterSet,
    field: &StateField1D,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if !Monitored::is_finite(field) {
        return Err(Error::NonFinite("rhs input"));
    }
    let op = Operator::new(variant, params, field.grid.clone())?;
    let n = field.grid.degree();
    let m = n - 1;
    let mut full = DMatrix::zeros(n + 1, 4);
    for i in 0..=n {
        full[(i, 0)] = field.u[i];
        full[(i, 1)] = field.v[i];
        full[(i, 2)] = field.r[i];
        full[(i, 3)] = field.r[i] * field.r[i];
    }
    let mut out = vec![0.0; 3 * m];
    op.rhs_from_full(&full, &mut out);
    let mut result = Vec::with_capacity(3);
    for s in 0..3 {
        let mut arr = vec![0.0; n + 1];
        field.grid.extend(&out[s * m..(s + 1) * m], &mut arr);
        result.push(arr);
    }
    let r = result.pop().unwrap();
    let v = result.pop().unwrap();
    let u = result.pop().unwrap();
    Ok((u, v, r))
}

/// Discrete operator: diffusion, overcrowding and reactions on interior nodes.
struct Operator<'a> {
    kin: Kinetics<'a>,
    grid: Arc<ChebGrid>,
    /// Rows `1..N` of `D2`.
    d2_interior: DMatrix<f64>,
    b1: Vec<f64>,
    diffusion: [f64; 3],
    d4: f64,
}

impl<'a> Operator<'a> {
    fn new(variant: &ModelVariant, params: &'a ParameterSet, grid: Arc<ChebGrid>) -> Result<Self> {
        params.validate()?;
        variant.validate()?;
        let n = grid.degree();
        let d2_interior = grid.d2().rows(1, n - 1).into_owned();
        let b1 = grid.nodes()[1..n]
            .iter()
            .map(|&x| variant.refuge_at(x, 0.0))
            .collect();
        Ok(Self {
            kin: Kinetics::new(variant.kind, params),
            d2_interior,
            b1,
            diffusion: [params.d1, params.d2, params.d3],
            d4: variant.overcrowding(params),
            grid,
        })
    }

    fn m(&self) -> usize {
        self.grid.interior_len()
    }

    /// Columns `u, v, r, r^2` of the full node arrays for interior unknowns.
    fn extend_state(&self, x: &[f64]) -> DMatrix<f64> {
        let m = self.m();
        let mut full = DMatrix::zeros(m + 2, 4);
        let mut buf = vec![0.0; m + 2];
        for s in 0..3 {
            self.grid.extend(&x[s * m..(s + 1) * m], &mut buf);
            full.column_mut(s).copy_from_slice(&buf);
        }
        for i in 0..m + 2 {
            full[(i, 3)] = full[(i, 2)] * full[(i, 2)];
        }
        full
    }

    fn rhs_from_full(&self, full: &DMatrix<f64>, out: &mut [f64]) {
        let m = self.m();
        let lap = &self.d2_interior * full;
        for i in 0..m {
            let u = full[(i + 1, 0)].max(0.0);
            let v = full[(i + 1, 1)].max(0.0);
            let r = full[(i + 1, 2)].max(0.0);
            let rates = self.kin.rates(self.b1[i], u, v, r);
            out[i] = self.diffusion[0] * lap[(i, 0)] + rates.f;
            out[m + i] = self.diffusion[1] * lap[(i, 1)] + rates.g;
            out[2 * m + i] = self.diffusion[2] * lap[(i, 2)] + self.d4 * lap[(i, 3)] + rates.h;
        }
    }

    fn rhs(&self, x: &[f64], out: &mut [f64]) {
        let full = self.extend_state(x);
        self.rhs_from_full(&full, out);
    }

    /// Pointwise reaction Jacobians and the full `r` array at `x`.
    fn linearize(&self, x: &[f64]) -> Linearization {
        let m = self.m();
        let local = (0..m)
            .map(|i| {
                let u = x[i].max(0.0);
                let v = x[m + i].max(0.0);
                let r = x[2 * m + i].max(0.0);
                let mut jac = self.kin.jacobian(self.b1[i], u, v, r);
                // Clamped components are frozen.
                for (col, val) in [u, v, r].iter().enumerate() {
                    if x[col * m + i] < 0.0 && *val == 0.0 {
                        for row in jac.iter_mut() {
                            row[col] = 0.0;
                        }
                    }
                }
                jac
            })
            .collect();
        let mut r_full = vec![0.0; m + 2];
        self.grid.extend(&x[2 * m..], &mut r_full);
        Linearization { local, r_full }
    }

    /// `J(x) dx` for the right-hand side.
    fn jac_apply(&self, lin: &Linearization, dx: &[f64], out: &mut [f64]) {
        let m = self.m();
        let mut full = DMatrix::zeros(m + 2, 4);
        let mut buf = vec![0.0; m + 2];
        for s in 0..3 {
            self.grid.extend(&dx[s * m..(s + 1) * m], &mut buf);
            full.column_mut(s).copy_from_slice(&buf);
        }
        for i in 0..m + 2 {
            full[(i, 3)] = 2.0 * lin.r_full[i] * full[(i, 2)];
        }
        let lap = &self.d2_interior * &full;
        for i in 0..m {
            let j = &lin.local[i];
            let d = [dx[i], dx[m + i], dx[2 * m + i]];
            for s in 0..3 {
                let react = j[s][0] * d[0] + j[s][1] * d[1] + j[s][2] * d[2];
                let mut value = self.diffusion[s] * lap[(i, s)] + react;
                if s == 2 {
                    value += self.d4 * lap[(i, 3)];
                }
                out[s * m + i] = value;
            }
        }
    }
}

struct Linearization {
    local: Vec<[[f64; 3]; 3]>,
    r_full: Vec<f64>,
}

/// Owns the cached preconditioner factors for one variant, parameter set and
/// grid. Confined to one thread at a time.
pub struct Solver1D<'a> {
    op: Operator<'a>,
    cfg: SolverConfig1D,
    /// LU factors of `I - dt/2 d_s N2` for `u` and `v`, keyed by `dt`.
    cached: Option<(u64, [LU<f64, nalgebra::Dyn, nalgebra::Dyn>; 3])>,
}

impl<'a> Solver1D<'a> {
    pub fn new(
        variant: &ModelVariant,
        params: &'a ParameterSet,
        grid: Arc<ChebGrid>,
        cfg: SolverConfig1D,
    ) -> Result<Self> {
        Ok(Self {
            op: Operator::new(variant, params, grid)?,
            cfg,
            cached: None,
        })
    }

    fn diffusion_factor(&self, s: usize, dt: f64) -> LU<f64, nalgebra::Dyn, nalgebra::Dyn> {
        let m = self.op.m();
        let mut a = self.op.grid.neumann_d2() * (-0.5 * dt * self.op.diffusion[s]);
        for i in 0..m {
            a[(i, i)] += 1.0;
        }
        a.lu()
    }

    /// `I - dt/2 (d3 N2 + d4 D2 diag(2r) E)` for the `r` block.
    fn overcrowd_factor(&self, dt: f64, r_full: &[f64]) -> LU<f64, nalgebra::Dyn, nalgebra::Dyn> {
        let m = self.op.m();
        let grid = &self.op.grid;
        let bmap = grid.boundary_map();
        let n = grid.degree();
        // E maps interior values to full values.
        let mut e = DMatrix::zeros(n + 1, m);
        for k in 0..m {
            e[(0, k)] = bmap[(0, k)] * 2.0 * r_full[0];
            e[(k + 1, k)] = 2.0 * r_full[k + 1];
            e[(n, k)] = bmap[(1, k)] * 2.0 * r_full[n];
        }
        let over = &self.op.d2_interior * e;
        let mut a = grid.neumann_d2() * self.op.diffusion[2] + over * self.op.d4;
        a *= -0.5 * dt;
        for i in 0..m {
            a[(i, i)] += 1.0;
        }
        a.lu()
    }

    fn factors(&mut self, dt: f64) -> &[LU<f64, nalgebra::Dyn, nalgebra::Dyn>; 3] {
        let key = dt.to_bits();
        if self.cached.as_ref().map(|c| c.0) != Some(key) {
            let f = [
                self.diffusion_factor(0, dt),
                self.diffusion_factor(1, dt),
                self.diffusion_factor(2, dt),
            ];
            self.cached = Some((key, f));
        }
        &self.cached.as_ref().unwrap().1
    }

    /// One trapezoidal step `W+ = W + dt/2 (F(W) + F(W+))`.
    pub fn step(&mut self, field: &StateField1D, dt: f64) -> Result<(StateField1D, StepStats)> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if !Arc::ptr_eq(&field.grid, &self.op.grid) && field.grid.len() != self.op.grid.len() {
            return Err(Error::InvalidArgument("field grid does not match solver grid".into()));
        }
        let m = self.op.m();
        let w = field.interior();
        let mut r0 = vec![0.0; 3 * m];
        self.op.rhs(&w, &mut r0);

        let overcrowd = self.op.d4 > 0.0;
        let r_factor = if overcrowd {
            let mut r_full = vec![0.0; m + 2];
            self.op.grid.extend(&w[2 * m..], &mut r_full);
            Some(self.overcrowd_factor(dt, &r_full))
        } else {
            None
        };
        self.factors(dt);
        let factors = &self.cached.as_ref().unwrap().1;
        let precondition = |v: &[f64], out: &mut [f64]| {
            for s in 0..3 {
                let lu = if s == 2 {
                    r_factor.as_ref().unwrap_or(&factors[2])
                } else {
                    &factors[s]
                };
                let mut b = DVector::from_column_slice(&v[s * m..(s + 1) * m]);
                if !lu.solve_mut(&mut b) {
                    out[s * m..(s + 1) * m].copy_from_slice(&v[s * m..(s + 1) * m]);
                } else {
                    out[s * m..(s + 1) * m].copy_from_slice(b.as_slice());
                }
            }
        };

        // Explicit Euler predictor.
        let mut x: Vec<f64> = w.iter().zip(&r0).map(|(a, b)| a + dt * b).collect();
        if x.iter().any(|v| !v.is_finite()) {
            x.copy_from_slice(&w);
        }
        let mut fx = vec![0.0; 3 * m];
        let mut resid = vec![0.0; 3 * m];
        let mut stats = StepStats::default();
        let half = 0.5 * dt;
        for iter in 0..=self.cfg.newton.max_iter {
            self.op.rhs(&x, &mut fx);
            let mut res_norm: f64 = 0.0;
            let mut x_norm: f64 = 0.0;
            for i in 0..3 * m {
                resid[i] = x[i] - w[i] - half * (r0[i] + fx[i]);
                res_norm = res_norm.max(resid[i].abs());
                x_norm = x_norm.max(x[i].abs());
            }
            if !res_norm.is_finite() {
                return Err(Error::NonFinite("Newton residual"));
            }
            stats.residual = res_norm;
            stats.newton_iterations = iter;
            if res_norm <= self.cfg.newton.tol * x_norm.max(1.0) {
                break;
            }
            if iter == self.cfg.newton.max_iter {
                return Err(Error::NewtonDivergence {
                    residual: res_norm,
                    iterations: iter,
                });
            }
            let neg: Vec<f64> = resid.iter().map(|v| -v).collect();
            let mut delta = vec![0.0; 3 * m];
            let gstats = match self.cfg.jacobian {
                JacobianMode::Analytic => {
                    let lin = self.op.linearize(&x);
                    let op = &self.op;
                    let apply = |dv: &[f64], out: &mut [f64]| {
                        op.jac_apply(&lin, dv, out);
                        for i in 0..dv.len() {
                            out[i] = dv[i] - half * out[i];
                        }
                    };
                    gmres(apply, &precondition, &neg, &mut delta, &self.cfg.gmres)?
                }
                JacobianMode::FiniteDifference => {
                    let op = &self.op;
                    let x_ref = &x;
                    let fx_ref = &fx;
                    let apply = |dv: &[f64], out: &mut [f64]| {
                        let dn = dv.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                        if dn == 0.0 {
                            out.iter_mut().for_each(|o| *o = 0.0);
                            return;
                        }
                        let xn = x_ref.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                        let eps = f64::EPSILON.sqrt() * xn.max(1.0) / dn;
                        let shifted: Vec<f64> =
                            x_ref.iter().zip(dv).map(|(a, b)| a + eps * b).collect();
                        op.rhs(&shifted, out);
                        for i in 0..dv.len() {
                            out[i] = dv[i] - half * (out[i] - fx_ref[i]) / eps;
                        }
                    };
                    gmres(apply, &precondition, &neg, &mut delta, &self.cfg.gmres)?
                }
            };
            stats.gmres_iterations += gstats.iterations;
            for i in 0..3 * m {
                x[i] += delta[i];
            }
        }

        let mut species = Vec::with_capacity(3);
        for s in 0..3 {
            let mut arr = vec![0.0; m + 2];
            self.op.grid.extend(&x[s * m..(s + 1) * m], &mut arr);
            species.push(arr);
        }
        stats.clamped = species.iter().flatten().filter(|v| **v < 0.0).count();
        let r = species.pop().unwrap();
        let v = species.pop().unwrap();
        let u = species.pop().unwrap();
        let next = StateField1D {
            grid: field.grid.clone(),
            u,
            v,
            r,
            time: field.time + dt,
        };
        if !Monitored::is_finite(&next) {
            return Err(Error::NonFinite("step result"));
        }
        Ok((next, stats))
    }
}

/// One trapezoidal step with a fresh solver.
pub fn step_am2(
    variant: &ModelVariant,
    params: &ParameterSet,
    field: &StateField1D,
    dt: f64,
    cfg: &SolverConfig1D,
) -> Result<(StateField1D, StepStats)> {
    Solver1D::new(variant, params, field.grid.clone(), *cfg)?.step(field, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationSample {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory1D {
    pub final_field: StateField1D,
    /// Initial state, every `snapshot_stride`-th accepted state, and the final state.
    pub snapshots: Vec<StateField1D>,
    /// Populations at the initial and every accepted state.
    pub population: Vec<PopulationSample>,
    pub report: BlowupReport,
    pub controller: ControllerState,
    pub clamped: usize,
}

fn population_sample(field: &StateField1D) -> PopulationSample {
    let (u, v, r) = field.populations();
    PopulationSample { t: field.time, u, v, r }
}

/// Integrates to `horizon` from `ic`.
pub fn integrate_1d(
    variant: &ModelVariant,
    params: &ParameterSet,
    ic: &StateField1D,
    horizon: f64,
    controller: &StepControllerCfg,
) -> Result<Trajectory1D> {
    integrate_1d_with(
        variant,
        params,
        ic.clone(),
        horizon,
        controller,
        ControllerState::new(controller),
        &SolverConfig1D::default(),
        |_, _| {},
    )
}

/// Integration with an explicit starting controller state and an observer
/// called after every accepted step (used for checkpoints).
#[allow(clippy::too_many_arguments)]
pub fn integrate_1d_with<O>(
    variant: &ModelVariant,
    params: &ParameterSet,
    ic: StateField1D,
    horizon: f64,
    controller: &StepControllerCfg,
    mut state: ControllerState,
    solver_cfg: &SolverConfig1D,
    mut observe: O,
) -> Result<Trajectory1D>
where
    O: FnMut(&StateField1D, &ControllerState),
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
    let mut solver = Solver1D::new(variant, params, ic.grid.clone(), *solver_cfg)?;
    let mut snapshots = vec![ic.clone()];
    let mut population = vec![population_sample(&ic)];
    let mut clamped = 0;
    let stride = controller.snapshot_stride;
    let (final_field, verdict) = controller::drive(
        ic,
        horizon,
        controller,
        &mut state,
        |f, dt| {
            let (next, stats) = solver.step(f, dt)?;
            clamped += stats.clamped;
            Ok(next)
        },
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
    debug_assert!(!matches!(verdict, Verdict::BlewUp { t_star } if t_star > horizon));
    Ok(Trajectory1D {
        final_field,
        snapshots,
        population,
        report,
        controller: state,
        clamped,
    })
}
