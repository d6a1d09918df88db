//! Refuge sweeps, critical-size searches, twin-run divergence and
//! population series.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cheb::ChebGrid;
use crate::controller::{BlowupReport, StepControllerCfg};
use crate::error::{Error, Result};
use crate::kinetics::{ModelVariant, ParameterSet, RefugeProfile, RefugeShape, VariantKind};
use crate::solver1d::{integrate_1d, PopulationSample, SolverConfig1D, Solver1D, StateField1D};
use crate::solver2d::{integrate_2d_with, FDGrid2D, ReactionLag, StateField2D};

pub use crate::controller::detect_blowup;

/// One-dimensional blow-up run parameterized by the refuge edge `a`.
#[derive(Debug, Clone)]
pub struct RefugeExperiment {
    pub params: ParameterSet,
    pub kind: VariantKind,
    /// Width of the tanh refuge edge.
    pub width: f64,
    pub ic: StateField1D,
    pub horizon: f64,
    pub controller: StepControllerCfg,
}

impl RefugeExperiment {
    /// Uniform data `(10, v0, 10)` on `(0, π)` with `N + 1` Chebyshev nodes,
    /// `dt = 1e-3` and horizon 12.
    pub fn uniform(kind: VariantKind, params: ParameterSet, degree: usize, v0: f64) -> Result<Self> {
        let grid = Arc::new(ChebGrid::new(degree, 0.0, PI)?);
        Ok(Self {
            params,
            kind,
            width: 0.04,
            ic: StateField1D::constant(grid, 10.0, v0, 10.0),
            horizon: 12.0,
            controller: StepControllerCfg::new(1e-3),
        })
    }

    pub fn with_initial_v(&self, v0: f64) -> Self {
        let mut out = self.clone();
        out.ic.v.iter_mut().for_each(|v| *v = v0);
        out
    }

    pub fn variant(&self, a: f64) -> Result<ModelVariant> {
        match self.kind {
            VariantKind::Classical => Ok(ModelVariant::classical()),
            kind => ModelVariant::with_refuge(kind, RefugeProfile::tanh_step(a, self.width)),
        }
    }

    pub fn run_variant(&self, variant: &ModelVariant) -> Result<BlowupReport> {
        Ok(integrate_1d(variant, &self.params, &self.ic, self.horizon, &self.controller)?.report)
    }

    pub fn run(&self, a: f64) -> Result<BlowupReport> {
        self.run_variant(&self.variant(a)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub a: f64,
    pub outcome: std::result::Result<BlowupReport, String>,
}

impl SweepPoint {
    /// Blow-up time, or `None` for survival or failure.
    pub fn blowup_time(&self) -> Option<f64> {
        match &self.outcome {
            Ok(report) => match report.verdict {
                crate::controller::Verdict::BlewUp { t_star } => Some(t_star),
                _ => None,
            },
            Err(_) => None,
        }
    }

    pub fn survived(&self) -> bool {
        matches!(&self.outcome, Ok(r) if !r.verdict.blew_up())
    }
}

/// Runs every refuge edge in parallel; failures are recorded per point.
pub fn refuge_sweep(exp: &RefugeExperiment, a_grid: &[f64]) -> Vec<SweepPoint> {
    a_grid
        .par_iter()
        .map(|&a| SweepPoint {
            a,
            outcome: exp.run(a).map_err(|e| e.to_string()),
        })
        .collect()
}

/// Points where survival is followed by blow-up at a larger `a`, or the
/// blow-up time decreases with `a`.
pub fn monotonicity_warnings(points: &[SweepPoint]) -> Vec<String> {
    let mut warnings = Vec::new();
    let mut sorted: Vec<&SweepPoint> = points.iter().filter(|p| p.outcome.is_ok()).collect();
    sorted.sort_by(|a, b| a.a.total_cmp(&b.a));
    for pair in sorted.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if lo.survived() && !hi.survived() {
            warnings.push(format!("survival at a={} but blow-up at a={}", lo.a, hi.a));
        }
        if let (Some(t0), Some(t1)) = (lo.blowup_time(), hi.blowup_time()) {
            if t1 < t0 {
                warnings.push(format!(
                    "blow-up time drops from {t0} at a={} to {t1} at a={}",
                    lo.a, hi.a
                ));
            }
        }
    }
    warnings
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalSearch {
    /// Midpoint of the final bracket.
    pub critical: f64,
    pub lo: f64,
    pub hi: f64,
    pub bisections: usize,
}

/// Bisection on a monotone blow-up predicate; `blows_up(lo)` and
/// `!blows_up(hi)` are checked first.
pub fn bisect_transition<F>(bracket: (f64, f64), tol: f64, blows_up: F) -> Result<CriticalSearch>
where
    F: Fn(f64) -> Result<bool> + Sync,
{
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need lo < hi and tol > 0, got ({lo}, {hi}), tol {tol}"
        )));
    }
    let (at_lo, at_hi) = rayon::join(|| blows_up(lo), || blows_up(hi));
    if !at_lo? {
        return Err(Error::BracketInvalid {
            lo,
            hi,
            reason: "the lower end survives".into(),
        });
    }
    if at_hi? {
        return Err(Error::BracketInvalid {
            lo,
            hi,
            reason: "the upper end blows up".into(),
        });
    }
    let mut bisections = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if blows_up(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        bisections += 1;
    }
    Ok(CriticalSearch {
        critical: 0.5 * (lo + hi),
        lo,
        hi,
        bisections,
    })
}

/// Smallest refuge edge `a` beyond which the solution survives the horizon.
pub fn critical_refuge_size(
    exp: &RefugeExperiment,
    bracket: (f64, f64),
    tol: f64,
) -> Result<CriticalSearch> {
    bisect_transition(bracket, tol, |a| Ok(exp.run(a)?.verdict.blew_up()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub alpha: f64,
    pub beta: f64,
    /// Root-mean-square residual of `α ln v0 + β`.
    pub rms: f64,
    /// Spread `max - min` of the data.
    pub range: f64,
}

impl LogFit {
    /// Residual as a fraction of the curve range.
    pub fn relative_rms(&self) -> f64 {
        if self.range > 0.0 {
            self.rms / self.range
        } else {
            0.0
        }
    }
}

/// Least-squares fit `y ≈ α ln x + β`; `None` for fewer than two points.
pub fn log_fit(points: &[(f64, f64)]) -> Option<LogFit> {
    if points.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (alpha, beta) = linear_fit(&xs, &ys)?;
    let n = points.len() as f64;
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (alpha * x + beta - y).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    Some(LogFit {
        alpha,
        beta,
        rms,
        range: max - min,
    })
}

/// Slope and intercept of the least-squares line.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCurve {
    pub points: Vec<(f64, std::result::Result<f64, String>)>,
    pub fit: Option<LogFit>,
}

impl CriticalCurve {
    pub fn successful(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|(v, a)| a.as_ref().ok().map(|a| (*v, *a)))
            .collect()
    }

    pub fn nondecreasing(&self) -> bool {
        let mut ok = self.successful();
        ok.sort_by(|a, b| a.0.total_cmp(&b.0));
        ok.windows(2).all(|w| w[1].1 >= w[0].1)
    }
}

/// Critical refuge edge for each initial `v0`, with a logarithmic fit.
pub fn critical_vs_initial_v(
    exp: &RefugeExperiment,
    v0_grid: &[f64],
    bracket: (f64, f64),
    tol: f64,
) -> CriticalCurve {
    let points: Vec<(f64, std::result::Result<f64, String>)> = v0_grid
        .par_iter()
        .map(|&v0| {
            let e = exp.with_initial_v(v0);
            let found = critical_refuge_size(&e, bracket, tol)
                .map(|s| s.critical)
                .map_err(|e| e.to_string());
            (v0, found)
        })
        .collect();
    let ok: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|(v, a)| a.as_ref().ok().map(|a| (*v, *a)))
        .collect();
    let fit = if ok.len() >= 2 { log_fit(&ok) } else { None };
    CriticalCurve { points, fit }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AreaShape {
    Square,
    Circle,
}

impl AreaShape {
    /// Shape for a size parameter: half-width of the square or circle radius.
    pub fn with_size(&self, size: f64) -> RefugeShape {
        match self {
            AreaShape::Square => RefugeShape::Square { halfwidth: size },
            AreaShape::Circle => RefugeShape::Circle {
                radius_sq: size * size,
            },
        }
    }
}

/// Two-dimensional refuge-only run on `(-1, 1)^2`.
#[derive(Debug, Clone)]
pub struct AreaExperiment {
    pub params: ParameterSet,
    pub ic: StateField2D,
    pub horizon: f64,
    pub controller: StepControllerCfg,
    pub lag: ReactionLag,
}

impl AreaExperiment {
    /// `u = r = cos(2πx)cos(2πy) + 30`, `v = u + 200` on an `n × n` grid,
    /// `dt = 1e-3`, horizon 10.
    pub fn standard(params: ParameterSet, n: usize) -> Result<Self> {
        let grid = FDGrid2D::new(n, n)?;
        let ic = StateField2D::from_fn(grid, |x, y| {
            let base = (2.0 * PI * x).cos() * (2.0 * PI * y).cos() + 30.0;
            (base, base + 200.0, base)
        });
        Ok(Self {
            params,
            ic,
            horizon: 10.0,
            controller: StepControllerCfg::new(1e-3),
            lag: ReactionLag::default(),
        })
    }

    pub fn run_variant(&self, variant: &ModelVariant) -> Result<BlowupReport> {
        let traj = integrate_2d_with(
            variant,
            &self.params,
            self.ic.clone(),
            self.horizon,
            &self.controller,
            crate::controller::ControllerState::new(&self.controller),
            self.lag,
            |_, _| {},
        )?;
        Ok(traj.report)
    }

    pub fn run(&self, shape: RefugeShape) -> Result<BlowupReport> {
        let variant =
            ModelVariant::with_refuge(VariantKind::RefugeOnly, RefugeProfile::Indicator2D(shape))?;
        self.run_variant(&variant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaResult {
    pub shape: AreaShape,
    pub size: f64,
    pub critical_area: f64,
    /// Critical area over the domain area 4.
    pub fraction_of_domain: f64,
    pub search: CriticalSearch,
}

/// Critical refuge area by bisection on the size parameter.
pub fn critical_area_2d(
    shape: AreaShape,
    exp: &AreaExperiment,
    bracket: (f64, f64),
    tol: f64,
) -> Result<AreaResult> {
    let search = bisect_transition(bracket, tol, |s| {
        Ok(exp.run(shape.with_size(s))?.verdict.blew_up())
    })?;
    let area = shape.with_size(search.critical).area();
    Ok(AreaResult {
        shape,
        size: search.critical,
        critical_area: area,
        fraction_of_domain: area / 4.0,
        search,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSeries {
    pub times: Vec<f64>,
    pub d_l1: Vec<f64>,
    pub d_l2: Vec<f64>,
    pub d_linf: Vec<f64>,
    /// Slopes of `ln d` over the fit window in `L1`, `L2`, `L∞`.
    pub rate_l1: f64,
    pub rate_l2: f64,
    pub rate_linf: f64,
}

impl DivergenceSeries {
    pub fn fitted_rate(&self) -> f64 {
        self.rate_l2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChaosSetup {
    pub params: ParameterSet,
    pub base: (f64, f64, f64),
    pub degree: usize,
    pub interval: (f64, f64),
    pub dt: f64,
    pub horizon: f64,
    pub fit_window: (f64, f64),
    /// Record every `stride`-th step.
    pub stride: usize,
}

impl ChaosSetup {
    /// Base state `(25, 13, 9)`, 128 nodes on `(0, π)`, `dt = 1e-2`,
    /// horizon 1000.
    pub fn standard() -> Self {
        Self {
            params: ParameterSet::chaos(),
            base: (25.0, 13.0, 9.0),
            degree: 127,
            interval: (0.0, PI),
            dt: 1e-2,
            horizon: 1000.0,
            fit_window: (0.0, 1000.0),
            stride: 10,
        }
    }
}

/// Twin runs from `base + amp cos²(x)` in every species, stepped in lockstep
/// with a fixed `dt`; records `‖r1 - r2‖` in three norms.
pub fn chaos_divergence(setup: &ChaosSetup, amp1: f64, amp2: f64) -> Result<DivergenceSeries> {
    if !(setup.dt > 0.0 && setup.horizon > 0.0 && setup.stride > 0) {
        return Err(Error::InvalidArgument("dt, horizon and stride must be positive".into()));
    }
    let grid = Arc::new(ChebGrid::new(setup.degree, setup.interval.0, setup.interval.1)?);
    let (u0, v0, r0) = setup.base;
    let start = |amp: f64| {
        StateField1D::from_fn(grid.clone(), |x| {
            let p = amp * x.cos().powi(2);
            (u0 + p, v0 + p, r0 + p)
        })
    };
    let variant = ModelVariant::classical();
    let cfg = SolverConfig1D::default();
    let mut solvers = (
        Solver1D::new(&variant, &setup.params, grid.clone(), cfg)?,
        Solver1D::new(&variant, &setup.params, grid.clone(), cfg)?,
    );
    let mut a = start(amp1);
    let mut b = start(amp2);
    let steps = (setup.horizon / setup.dt).round() as usize;
    let mut series = DivergenceSeries {
        times: Vec::new(),
        d_l1: Vec::new(),
        d_l2: Vec::new(),
        d_linf: Vec::new(),
        rate_l1: f64::NAN,
        rate_l2: f64::NAN,
        rate_linf: f64::NAN,
    };
    let record = |series: &mut DivergenceSeries, a: &StateField1D, b: &StateField1D| {
        let diff: Vec<f64> = a.r.iter().zip(&b.r).map(|(x, y)| x - y).collect();
        let abs: Vec<f64> = diff.iter().map(|d| d.abs()).collect();
        let sq: Vec<f64> = diff.iter().map(|d| d * d).collect();
        series.times.push(a.time);
        series.d_l1.push(grid.integrate(&abs));
        series.d_l2.push(grid.integrate(&sq).max(0.0).sqrt());
        series.d_linf.push(abs.iter().cloned().fold(0.0, f64::max));
    };
    record(&mut series, &a, &b);
    for k in 1..=steps {
        let t = k as f64 * setup.dt;
        let (sa, sb) = (&mut solvers.0, &mut solvers.1);
        let (na, nb) = rayon::join(|| sa.step(&a, setup.dt), || sb.step(&b, setup.dt));
        let t_prev = a.time;
        let failure = |e: Error| match e {
            Error::NewtonDivergence { .. } | Error::NonFinite(_) => Error::TwinRunBlowup(t_prev),
            other => other,
        };
        a = na.map_err(failure)?.0;
        b = nb.map_err(failure)?.0;
        a.time = t;
        b.time = t;
        if k % setup.stride == 0 || k == steps {
            record(&mut series, &a, &b);
        }
    }
    let rate = |d: &[f64]| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = series
            .times
            .iter()
            .zip(d)
            .filter(|(t, v)| **t >= setup.fit_window.0 && **t <= setup.fit_window.1 && **v > 0.0)
            .map(|(t, v)| (*t, v.ln()))
            .unzip();
        linear_fit(&xs, &ys).map_or(f64::NAN, |f| f.0)
    };
    series.rate_l1 = rate(&series.d_l1);
    series.rate_l2 = rate(&series.d_l2);
    series.rate_linf = rate(&series.d_linf);
    Ok(series)
}

/// `(t, ∫u, ∫v, ∫r)` for each 1-D snapshot (Clenshaw-Curtis quadrature).
pub fn population_series_1d(snapshots: &[StateField1D]) -> Vec<PopulationSample> {
    snapshots
        .iter()
        .map(|s| {
            let (u, v, r) = s.populations();
            PopulationSample { t: s.time, u, v, r }
        })
        .collect()
}

/// `(t, ∫u, ∫v, ∫r)` for each 2-D snapshot (trapezoidal rule).
pub fn population_series_2d(snapshots: &[StateField2D]) -> Vec<PopulationSample> {
    snapshots
        .iter()
        .map(|s| {
            let (u, v, r) = s.populations();
            PopulationSample { t: s.time, u, v, r }
        })
        .collect()
}

/// True when the `r` population has an interior maximum exceeding both
/// endpoints by a relative margin.
pub fn rises_then_falls(series: &[PopulationSample], margin: f64) -> bool {
    if series.len() < 3 {
        return false;
    }
    let (k, peak) = series
        .iter()
        .enumerate()
        .map(|(k, s)| (k, s.r))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let first = series[0].r;
    let last = series[series.len() - 1].r;
    k > 0 && k + 1 < series.len() && peak > first * (1.0 + margin) && peak > last * (1.0 + margin)
}
