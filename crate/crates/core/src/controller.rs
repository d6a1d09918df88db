//! Variable step control and blow-up detection shared by both integrators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepControllerCfg {
    /// Initial and maximum step.
    pub dt: f64,
    pub dt_min: f64,
    /// Sup-norm of `r` at which blow-up is declared.
    pub threshold: f64,
    /// A step whose sup-norm grows by more than this factor is rejected.
    #[serde(default = "defaults::growth_limit")]
    pub growth_limit: f64,
    #[serde(default = "defaults::shrink")]
    pub shrink: f64,
    #[serde(default = "defaults::grow")]
    pub grow: f64,
    /// Accepted steps in a row before `dt` is enlarged.
    #[serde(default = "defaults::grow_after")]
    pub grow_after: usize,
    /// Accepted steps between stored snapshots; 0 keeps only the endpoints.
    #[serde(default)]
    pub snapshot_stride: usize,
}

mod defaults {
    pub fn growth_limit() -> f64 {
        10.0
    }
    pub fn shrink() -> f64 {
        0.5
    }
    pub fn grow() -> f64 {
        1.2
    }
    pub fn grow_after() -> usize {
        20
    }
}

/// Number of accepted steps used to extrapolate the blow-up time.
pub const TAIL_LEN: usize = 5;

impl StepControllerCfg {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            dt_min: 1e-8,
            threshold: 1e6,
            growth_limit: defaults::growth_limit(),
            shrink: defaults::shrink(),
            grow: defaults::grow(),
            grow_after: defaults::grow_after(),
            snapshot_stride: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", "must be positive");
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt) {
            return bad("dt_min", "must lie in (0, dt]");
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return bad("threshold", "must be positive");
        }
        if !(self.growth_limit > 1.0) {
            return bad("growth_limit", "must exceed 1");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink", "must lie in (0, 1)");
        }
        if !(self.grow >= 1.0) {
            return bad("grow", "must be at least 1");
        }
        Ok(())
    }
}

/// Mutable controller state; saved in checkpoints so a resumed run takes
/// the same steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub dt: f64,
    pub streak: usize,
    pub accepted: usize,
    pub rejections: usize,
    /// `(t, sup r)` of the most recent accepted states, oldest first.
    pub tail: Vec<(f64, f64)>,
}

impl ControllerState {
    pub fn new(cfg: &StepControllerCfg) -> Self {
        Self {
            dt: cfg.dt,
            streak: 0,
            accepted: 0,
            rejections: 0,
            tail: Vec::with_capacity(TAIL_LEN),
        }
    }

    fn record(&mut self, t: f64, sup: f64) {
        if self.tail.len() == TAIL_LEN {
            self.tail.remove(0);
        }
        self.tail.push((t, sup));
    }

    fn growing(&self) -> bool {
        match (self.tail.first(), self.tail.last()) {
            (Some(a), Some(b)) => b.1 > a.1,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    BlewUp { t_star: f64 },
    Survived { horizon: f64 },
}

impl Verdict {
    pub fn blew_up(&self) -> bool {
        matches!(self, Verdict::BlewUp { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub verdict: Verdict,
    pub terminal_sup_norm: f64,
    /// `∫ r` over the domain at the final accepted state.
    pub terminal_population: f64,
    pub rejection_count: usize,
    pub accepted_steps: usize,
}

/// Zero of the least-squares line through `(t, 1/s)`.
///
/// Falls back to the last time when the fit is not decreasing.
pub fn extrapolate_blowup_time(tail: &[(f64, f64)]) -> Option<f64> {
    let points: Vec<(f64, f64)> = tail
        .iter()
        .filter(|(_, s)| *s > 0.0 && s.is_finite())
        .map(|&(t, s)| (t, 1.0 / s))
        .collect();
    let last = points.last()?.0;
    if points.len() < 2 {
        return Some(last);
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    if sxx == 0.0 || sxy >= 0.0 {
        return Some(last);
    }
    let slope = sxy / sxx;
    let root = mt - my / slope;
    Some(root.max(last))
}

/// Scans an accepted-step record `(t, sup r, dt)` for blow-up.
///
/// Blow-up is declared when the sup-norm reaches `threshold`, or when `dt`
/// has fallen below `dt_min` while the norm is growing.
pub fn detect_blowup<I>(records: I, threshold: f64, dt_min: f64, horizon: f64) -> BlowupReport
where
    I: IntoIterator<Item = (f64, f64, f64)>,
{
    let mut state = ControllerState {
        dt: f64::INFINITY,
        streak: 0,
        accepted: 0,
        rejections: 0,
        tail: Vec::new(),
    };
    let mut last_sup = 0.0;
    for (t, sup, dt) in records {
        state.record(t, sup);
        state.accepted += 1;
        last_sup = sup;
        if sup >= threshold || (dt < dt_min && state.growing()) {
            let t_star = extrapolate_blowup_time(&state.tail).unwrap_or(t).min(horizon);
            return BlowupReport {
                verdict: Verdict::BlewUp { t_star },
                terminal_sup_norm: sup,
                terminal_population: f64::NAN,
                rejection_count: 0,
                accepted_steps: state.accepted,
            };
        }
    }
    BlowupReport {
        verdict: Verdict::Survived { horizon },
        terminal_sup_norm: last_sup,
        terminal_population: f64::NAN,
        rejection_count: 0,
        accepted_steps: state.accepted,
    }
}

/// Time, sup-norm of `r` and population of a field type.
pub(crate) trait Monitored {
    fn time(&self) -> f64;
    fn sup_r(&self) -> f64;
    fn is_finite(&self) -> bool;
}

fn retryable(err: &Error) -> bool {
    matches!(
        err,
        Error::NewtonDivergence { .. }
            | Error::LinearSolveStall { .. }
            | Error::NonFinite(_)
            | Error::ZeroPivot(_)
    )
}

/// Advances `field` to `horizon` with the step controller.
///
/// `observe` sees every accepted state together with the controller state
/// that will produce the next step.
pub(crate) fn drive<F, S, O>(
    mut field: F,
    horizon: f64,
    cfg: &StepControllerCfg,
    state: &mut ControllerState,
    mut step: S,
    mut observe: O,
) -> Result<(F, Verdict)>
where
    F: Monitored,
    S: FnMut(&F, f64) -> Result<F>,
    O: FnMut(&F, &ControllerState),
{
    if state.tail.is_empty() {
        state.record(field.time(), field.sup_r());
    }
    if field.sup_r() >= cfg.threshold {
        let t_star = field.time().min(horizon);
        return Ok((field, Verdict::BlewUp { t_star }));
    }
    loop {
        let t = field.time();
        let remaining = horizon - t;
        if remaining <= horizon.abs().max(1.0) * 1e-12 {
            return Ok((field, Verdict::Survived { horizon }));
        }
        let dt = state.dt.min(remaining);
        let sup_old = field.sup_r();
        let attempt = step(&field, dt);
        let rejection = match attempt {
            Ok(next) => {
                let sup = next.sup_r();
                if !next.is_finite() {
                    Some(Error::NonFinite("accepted state"))
                } else if sup_old > 0.0 && sup > cfg.growth_limit * sup_old {
                    Some(Error::NonFinite("growth limit"))
                } else {
                    field = next;
                    state.accepted += 1;
                    state.streak += 1;
                    state.record(field.time(), sup);
                    if state.streak >= cfg.grow_after {
                        state.dt = (state.dt * cfg.grow).min(cfg.dt);
                        state.streak = 0;
                    }
                    observe(&field, state);
                    if sup >= cfg.threshold {
                        let t_star = extrapolate_blowup_time(&state.tail)
                            .unwrap_or(field.time())
                            .min(horizon);
                        return Ok((field, Verdict::BlewUp { t_star }));
                    }
                    None
                }
            }
            Err(err) if retryable(&err) => Some(err),
            Err(err) => return Err(err),
        };
        if let Some(err) = rejection {
            state.rejections += 1;
            state.streak = 0;
            state.dt *= cfg.shrink;
            if state.dt < cfg.dt_min {
                if state.growing() {
                    let t_star = extrapolate_blowup_time(&state.tail)
                        .unwrap_or(t)
                        .min(horizon);
                    return Ok((field, Verdict::BlewUp { t_star }));
                }
                return Err(match err {
                    Error::NonFinite(_) => Error::StepSizeUnderflow {
                        time: t,
                        dt_min: cfg.dt_min,
                    },
                    other => other,
                });
            }
        }
    }
}
