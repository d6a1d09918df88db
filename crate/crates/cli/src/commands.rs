//! Subcommand implementations. Each writes its artifacts and a manifest
//! into one output directory.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ecodamp::experiments::{
    chaos_divergence, critical_area_2d, critical_refuge_size, critical_vs_initial_v,
    monotonicity_warnings, refuge_sweep, AreaExperiment, ChaosSetup, RefugeExperiment,
};
use ecodamp::solver1d::integrate_1d_with;
use ecodamp::solver2d::integrate_2d_with;
use ecodamp::stability::{
    a2_global_threshold, aziz_bound, classify_pattern, dispersion, dispersion_sweep,
    energy_diagnostics, interior_equilibrium, jacobian, satisfies_aziz_bound,
};
use ecodamp::{
    BlowupReport, ChebGrid, ControllerState, FDGrid2D, SolverConfig1D, StateField1D,
    StateField2D, Verdict,
};
use serde_json::{json, Value};

use crate::config::{GridSpec, InitialSpec, RunConfig};
use crate::error::CliError;
use crate::output::{num, opt_num, param_digest, Artifacts, Manifest};
use crate::snapshot::Snapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    Sweep,
    Critical,
    Area,
    Stability,
    Dispersion,
    Chaos,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Critical => "critical",
            Command::Area => "area",
            Command::Stability => "stability",
            Command::Dispersion => "dispersion",
            Command::Chaos => "chaos",
        }
    }
}

pub const POPULATION_HEADER: [&str; 4] = ["t", "u", "v", "r"];
pub const SWEEP_HEADER: [&str; 8] = [
    "a",
    "verdict",
    "t_star",
    "terminal_sup_norm",
    "terminal_population",
    "rejections",
    "accepted_steps",
    "error",
];
pub const CRITICAL_HEADER: [&str; 6] = ["v0", "a_critical", "lo", "hi", "bisections", "error"];
pub const AREA_HEADER: [&str; 8] = [
    "shape",
    "size",
    "critical_area",
    "fraction_of_domain",
    "lo",
    "hi",
    "bisections",
    "error",
];
pub const DISPERSION_HEADER: [&str; 13] = [
    "d4",
    "k",
    "k_squared",
    "a2",
    "a1",
    "a0",
    "a2a1_minus_a0",
    "max_real_part",
    "stable",
    "sign_a0",
    "sign_a2a1_minus_a0",
    "sign_a1",
    "case",
];
pub const DISPERSION_SUMMARY_HEADER: [&str; 6] =
    ["d4", "pattern", "band_k_min", "band_k_max", "max_growth", "k_at_max"];
pub const DIVERGENCE_HEADER: [&str; 4] = ["t", "d_l1", "d_l2", "d_linf"];
pub const STABILITY_HEADER: [&str; 2] = ["quantity", "value"];

/// Runs `command` with its artifacts in `out`. The manifest is written
/// whether or not the command succeeds.
pub fn run(
    command: Command,
    cfg: &RunConfig,
    out: &Path,
    resume: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<Manifest, CliError> {
    if resume.is_some() && command != Command::Simulate {
        return Err(CliError::config("--resume only applies to simulate"));
    }
    let mut art = Artifacts::create(out)?;
    art.write_config(cfg)?;
    let result = match command {
        Command::Simulate => simulate(cfg, &mut art, resume, stdout),
        Command::Sweep => sweep(cfg, &mut art, stdout),
        Command::Critical => critical(cfg, &mut art, stdout),
        Command::Area => area(cfg, &mut art, stdout),
        Command::Stability => stability(cfg, &mut art, stdout),
        Command::Dispersion => dispersion_cmd(cfg, &mut art, stdout),
        Command::Chaos => chaos(cfg, &mut art, stdout),
    };
    let manifest = art.finish(command.name(), cfg, result.as_ref().map(Value::clone), resume)?;
    result.map(|_| manifest)
}

pub enum Field {
    OneD(StateField1D),
    TwoD(StateField2D),
}

/// Initial field described by the config.
pub fn initial_field(cfg: &RunConfig) -> Result<Field, CliError> {
    let mismatch = || CliError::config("initial preset does not fit the grid");
    match (cfg.grid, &cfg.initial) {
        (grid, InitialSpec::Tabulated { path }) => {
            let snap = Snapshot::read(path)?;
            if snap.grid != grid {
                return Err(CliError::Config(format!(
                    "{} was written on a different grid",
                    path.display()
                )));
            }
            match grid {
                GridSpec::Chebyshev { .. } => Ok(Field::OneD(snap.to_field_1d()?)),
                GridSpec::FiniteDifference { .. } => Ok(Field::TwoD(snap.to_field_2d()?)),
            }
        }
        (GridSpec::Chebyshev { degree, interval }, init) => {
            let grid = Arc::new(ChebGrid::new(degree, interval[0], interval[1])?);
            let field = match *init {
                InitialSpec::Uniform { u, v, r } => StateField1D::constant(grid, u, v, r),
                InitialSpec::PerturbedEquilibrium { amplitude, mode } => {
                    let eq = interior_equilibrium(&cfg.effective_params())?;
                    StateField1D::from_fn(grid, |x| {
                        let p = amplitude * (mode * x).cos();
                        (eq.u_star + p, eq.v_star + p, eq.r_star + p)
                    })
                }
                InitialSpec::ChaosPair { base, amp1, .. } => StateField1D::from_fn(grid, |x| {
                    let p = amp1 * x.cos().powi(2);
                    (base[0] + p, base[1] + p, base[2] + p)
                }),
                _ => return Err(mismatch()),
            };
            Ok(Field::OneD(field))
        }
        (GridSpec::FiniteDifference { nx, ny }, init) => {
            let grid = FDGrid2D::new(nx, ny)?;
            let cc = |x: f64, y: f64| {
                (2.0 * std::f64::consts::PI * x).cos() * (2.0 * std::f64::consts::PI * y).cos()
            };
            let field = match *init {
                InitialSpec::Uniform { u, v, r } => StateField2D::from_fn(grid, |_, _| (u, v, r)),
                InitialSpec::Gaussian {
                    amplitude,
                    sharpness,
                } => StateField2D::from_fn(grid, |x, y| {
                    let u = cc(x, y) + 30.0;
                    (u, u + 200.0, amplitude * (-sharpness * (x * x + y * y)).exp())
                }),
                InitialSpec::AreaCosine { offset, v_excess } => StateField2D::from_fn(grid, |x, y| {
                    let base = cc(x, y) + offset;
                    (base, base + v_excess, base)
                }),
                _ => return Err(mismatch()),
            };
            Ok(Field::TwoD(field))
        }
    }
}

fn one_d(cfg: &RunConfig, command: &str) -> Result<StateField1D, CliError> {
    match initial_field(cfg)? {
        Field::OneD(f) => Ok(f),
        Field::TwoD(_) => Err(CliError::Config(format!("{command} needs a 1-D grid"))),
    }
}

fn two_d(cfg: &RunConfig, command: &str) -> Result<StateField2D, CliError> {
    match initial_field(cfg)? {
        Field::TwoD(f) => Ok(f),
        Field::OneD(_) => Err(CliError::Config(format!("{command} needs a 2-D grid"))),
    }
}

fn verdict_fields(v: &Verdict) -> (&'static str, Option<f64>) {
    match v {
        Verdict::BlewUp { t_star } => ("blew-up", Some(*t_star)),
        Verdict::Survived { .. } => ("survived", None),
    }
}

fn report_json(report: &BlowupReport) -> Value {
    serde_json::to_value(report).expect("report serializes")
}

/// Streams population rows and checkpoints while a simulation runs.
struct Recorder {
    population: csv::Writer<std::fs::File>,
    checkpoint_every: usize,
    checkpoint_dir: PathBuf,
    digest: String,
    checkpoints: Vec<String>,
    last: Option<Snapshot>,
    error: Option<CliError>,
}

impl Recorder {
    fn new(art: &mut Artifacts, cfg: &RunConfig, digest: &str) -> Result<Self, CliError> {
        Ok(Self {
            population: art.csv_writer("population.csv", &POPULATION_HEADER)?,
            checkpoint_every: cfg.time.checkpoint_every,
            checkpoint_dir: art.root().join("checkpoints"),
            digest: digest.to_string(),
            checkpoints: Vec::new(),
            last: None,
            error: None,
        })
    }

    fn sample(&mut self, t: f64, pops: (f64, f64, f64)) {
        let row = [num(t), num(pops.0), num(pops.1), num(pops.2)];
        if let Err(e) = self.population.write_record(&row) {
            self.error.get_or_insert(CliError::Io(std::io::Error::other(e)));
        }
    }

    fn accepted(&mut self, state: &ControllerState, snap: impl FnOnce(&str) -> Snapshot) {
        let snap = snap(&self.digest);
        if self.checkpoint_every > 0 && state.accepted % self.checkpoint_every == 0 {
            let name = format!("checkpoints/step_{:08}.snap", state.accepted);
            let res = std::fs::create_dir_all(&self.checkpoint_dir)
                .map_err(CliError::from)
                .and_then(|_| snap.write(&self.checkpoint_dir.join(format!("step_{:08}.snap", state.accepted))));
            match res {
                Ok(()) => self.checkpoints.push(name),
                Err(e) => {
                    self.error.get_or_insert(e);
                }
            }
        }
        self.last = Some(snap);
    }

    /// Flushes the population table; on failure saves the last accepted
    /// state and a report describing the error.
    fn close(mut self, art: &mut Artifacts, failure: Option<&CliError>) -> Result<(), CliError> {
        self.population.flush()?;
        for name in &self.checkpoints {
            art.path(name)?;
        }
        if let Some(e) = failure {
            let last = self.last.as_ref();
            if let Some(snap) = last {
                snap.write(&art.path("last_accepted.snap")?)?;
            }
            art.json(
                "report.json",
                &json!({
                    "status": "failed",
                    "error": e.to_string(),
                    "last_accepted_time": last.map(|s| s.time),
                    "accepted_steps": last.and_then(|s| s.controller.as_ref()).map(|c| c.accepted),
                }),
            )?;
        }
        match self.error {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

fn simulate(
    cfg: &RunConfig,
    art: &mut Artifacts,
    resume: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<Value, CliError> {
    let params = cfg.effective_params();
    let variant = cfg.variant()?;
    let digest = param_digest(&params);
    let ctrl = cfg.controller_cfg();
    let (start, state) = match resume {
        Some(path) => {
            let snap = Snapshot::read(path)?;
            if snap.grid != cfg.grid {
                return Err(CliError::config("checkpoint grid differs from the config grid"));
            }
            if snap.digest != digest {
                return Err(CliError::config("checkpoint was written with different parameters"));
            }
            let state = snap
                .controller
                .clone()
                .ok_or_else(|| CliError::config("snapshot has no controller state; not a checkpoint"))?;
            let field = match cfg.grid {
                GridSpec::Chebyshev { .. } => Field::OneD(snap.to_field_1d()?),
                GridSpec::FiniteDifference { .. } => Field::TwoD(snap.to_field_2d()?),
            };
            (field, state)
        }
        None => (initial_field(cfg)?, ControllerState::new(&ctrl)),
    };
    let mut rec = Recorder::new(art, cfg, &digest)?;
    let horizon = cfg.time.horizon;

    let (snapshots, final_snap, report, extra) = match start {
        Field::OneD(ic) => {
            rec.sample(ic.time, ic.populations());
            let run = integrate_1d_with(
                &variant,
                &params,
                ic,
                horizon,
                &ctrl,
                state,
                &SolverConfig1D::default(),
                |f, st| {
                    rec.sample(f.time, f.populations());
                    rec.accepted(st, |d| Snapshot::from_1d(f, d, Some(st)));
                },
            );
            let traj = match run {
                Ok(t) => t,
                Err(e) => {
                    let e = CliError::from(e);
                    rec.close(art, Some(&e))?;
                    return Err(e);
                }
            };
            let snaps: Vec<Snapshot> = traj
                .snapshots
                .iter()
                .map(|f| Snapshot::from_1d(f, &digest, None))
                .collect();
            let fin = Snapshot::from_1d(&traj.final_field, &digest, Some(&traj.controller));
            (snaps, fin, traj.report, json!({ "clamped_values": traj.clamped }))
        }
        Field::TwoD(ic) => {
            rec.sample(ic.time, ic.populations());
            let run = integrate_2d_with(
                &variant,
                &params,
                ic,
                horizon,
                &ctrl,
                state,
                cfg.experiment.lag,
                |f, st| {
                    rec.sample(f.time, f.populations());
                    rec.accepted(st, |d| Snapshot::from_2d(f, d, Some(st)));
                },
            );
            let traj = match run {
                Ok(t) => t,
                Err(e) => {
                    let e = CliError::from(e);
                    rec.close(art, Some(&e))?;
                    return Err(e);
                }
            };
            let snaps: Vec<Snapshot> = traj
                .snapshots
                .iter()
                .map(|f| Snapshot::from_2d(f, &digest, None))
                .collect();
            let fin = Snapshot::from_2d(&traj.final_field, &digest, Some(&traj.controller));
            (snaps, fin, traj.report, Value::Null)
        }
    };
    rec.close(art, None)?;

    for (i, snap) in snapshots.iter().enumerate() {
        snap.write(&art.path(&format!("snapshots/snap_{i:05}.snap"))?)?;
    }
    final_snap.write(&art.path("final.snap")?)?;
    let mut report_value = report_json(&report);
    report_value["status"] = json!("ok");
    report_value["final_time"] = json!(final_snap.time);
    if !extra.is_null() {
        report_value["clamped_values"] = extra["clamped_values"].clone();
    }
    art.json("report.json", &report_value)?;
    if cfg.output.heatmaps {
        heatmaps(art, &snapshots, &final_snap)?;
    }

    let (verdict, t_star) = verdict_fields(&report.verdict);
    writeln!(
        stdout,
        "{verdict} t={} sup r={:.6e} population r={:.6e} steps={} rejections={}",
        t_star.unwrap_or(final_snap.time),
        report.terminal_sup_norm,
        report.terminal_population,
        report.accepted_steps,
        report.rejection_count
    )?;
    Ok(json!({
        "verdict": verdict,
        "t_star": t_star,
        "final_time": final_snap.time,
        "terminal_sup_norm": report.terminal_sup_norm,
        "terminal_population": report.terminal_population,
        "accepted_steps": report.accepted_steps,
        "rejections": report.rejection_count,
        "snapshots": snapshots.len(),
    }))
}

/// x–t maps (1-D, node order left to right, time downwards) or final field
/// maps (2-D, `y` upwards).
fn heatmaps(art: &mut Artifacts, snaps: &[Snapshot], fin: &Snapshot) -> Result<(), CliError> {
    match fin.grid {
        GridSpec::Chebyshev { degree, .. } => {
            let w = degree + 1;
            for (name, pick) in species() {
                let data: Vec<f64> = snaps
                    .iter()
                    .flat_map(|s| pick(s).iter().rev().copied())
                    .collect();
                art.graymap(&format!("heatmaps/xt_{name}.pgm"), w, snaps.len(), &data)?;
            }
        }
        GridSpec::FiniteDifference { nx, ny } => {
            for (name, pick) in species() {
                let values = pick(fin);
                let data: Vec<f64> = (0..ny)
                    .rev()
                    .flat_map(|j| (0..nx).map(move |i| values[i * ny + j]))
                    .collect();
                art.graymap(&format!("heatmaps/final_{name}.pgm"), nx, ny, &data)?;
            }
        }
    }
    Ok(())
}

type Pick = fn(&Snapshot) -> &Vec<f64>;

fn species() -> [(&'static str, Pick); 3] {
    [("u", |s| &s.u), ("v", |s| &s.v), ("r", |s| &s.r)]
}

fn refuge_experiment(cfg: &RunConfig, command: &str) -> Result<RefugeExperiment, CliError> {
    Ok(RefugeExperiment {
        params: cfg.effective_params(),
        kind: cfg.model.variant,
        width: cfg.experiment.refuge_width,
        ic: one_d(cfg, command)?,
        horizon: cfg.time.horizon,
        controller: cfg.controller_cfg(),
    })
}

fn sweep(cfg: &RunConfig, art: &mut Artifacts, stdout: &mut dyn Write) -> Result<Value, CliError> {
    let exp = refuge_experiment(cfg, "sweep")?;
    let points = refuge_sweep(&exp, &cfg.experiment.a_grid);
    let rows = points.iter().map(|p| match &p.outcome {
        Ok(r) => {
            let (verdict, t_star) = verdict_fields(&r.verdict);
            vec![
                num(p.a),
                verdict.to_string(),
                opt_num(t_star),
                num(r.terminal_sup_norm),
                num(r.terminal_population),
                r.rejection_count.to_string(),
                r.accepted_steps.to_string(),
                String::new(),
            ]
        }
        Err(e) => {
            let mut row = vec![num(p.a), "failed".to_string()];
            row.extend(std::iter::repeat(String::new()).take(5));
            row.push(e.clone());
            row
        }
    });
    art.csv("sweep.csv", &SWEEP_HEADER, rows)?;
    let warnings = monotonicity_warnings(&points);
    for w in &warnings {
        writeln!(stdout, "warning: {w}")?;
    }
    let failed = points.iter().filter(|p| p.outcome.is_err()).count();
    writeln!(
        stdout,
        "{} points, {} blew up, {} survived, {} failed",
        points.len(),
        points.iter().filter(|p| p.blowup_time().is_some()).count(),
        points.iter().filter(|p| p.survived()).count(),
        failed
    )?;
    Ok(json!({ "points": points.len(), "failed": failed, "warnings": warnings }))
}

fn critical(cfg: &RunConfig, art: &mut Artifacts, stdout: &mut dyn Write) -> Result<Value, CliError> {
    let exp = refuge_experiment(cfg, "critical")?;
    let e = &cfg.experiment;
    let bracket = (e.bracket[0], e.bracket[1]);
    if e.v0_grid.is_empty() {
        let v0 = uniform_v(cfg);
        match critical_refuge_size(&exp, bracket, e.tol) {
            Ok(s) => {
                art.csv(
                    "critical.csv",
                    &CRITICAL_HEADER,
                    [vec![
                        opt_num(v0),
                        num(s.critical),
                        num(s.lo),
                        num(s.hi),
                        s.bisections.to_string(),
                        String::new(),
                    ]],
                )?;
                writeln!(stdout, "critical a = {:.6} (bracket [{:.6}, {:.6}])", s.critical, s.lo, s.hi)?;
                Ok(serde_json::to_value(s).expect("search serializes"))
            }
            Err(err) => {
                art.csv(
                    "critical.csv",
                    &CRITICAL_HEADER,
                    [vec![
                        opt_num(v0),
                        String::new(),
                        num(bracket.0),
                        num(bracket.1),
                        String::new(),
                        err.to_string(),
                    ]],
                )?;
                Err(err.into())
            }
        }
    } else {
        let curve = critical_vs_initial_v(&exp, &e.v0_grid, bracket, e.tol);
        let rows = curve.points.iter().map(|(v0, res)| match res {
            Ok(a) => vec![num(*v0), num(*a), String::new(), String::new(), String::new(), String::new()],
            Err(err) => vec![num(*v0), String::new(), String::new(), String::new(), String::new(), err.clone()],
        });
        art.csv("critical.csv", &CRITICAL_HEADER, rows)?;
        let fit = curve.fit.map(|f| {
            json!({
                "alpha": f.alpha, "beta": f.beta, "rms": f.rms, "range": f.range,
                "relative_rms": f.relative_rms(),
            })
        });
        for (v0, res) in &curve.points {
            match res {
                Ok(a) => writeln!(stdout, "v0 = {v0:.6e}: critical a = {a:.6}")?,
                Err(err) => writeln!(stdout, "v0 = {v0:.6e}: {err}")?,
            }
        }
        if let Some(f) = &curve.fit {
            writeln!(
                stdout,
                "fit a = {:.6} ln v0 + {:.6}, rms {:.3e} ({:.1}% of range)",
                f.alpha,
                f.beta,
                f.rms,
                100.0 * f.relative_rms()
            )?;
        }
        if curve.successful().is_empty() {
            return Err(CliError::Experiment(ecodamp::Error::BracketInvalid {
                lo: bracket.0,
                hi: bracket.1,
                reason: "no initial level produced a critical size".into(),
            }));
        }
        Ok(json!({
            "points": curve.successful(),
            "failed": curve.points.len() - curve.successful().len(),
            "nondecreasing": curve.nondecreasing(),
            "fit": fit,
        }))
    }
}

fn uniform_v(cfg: &RunConfig) -> Option<f64> {
    match cfg.initial {
        InitialSpec::Uniform { v, .. } => Some(v),
        _ => None,
    }
}

fn area(cfg: &RunConfig, art: &mut Artifacts, stdout: &mut dyn Write) -> Result<Value, CliError> {
    let exp = AreaExperiment {
        params: cfg.effective_params(),
        ic: two_d(cfg, "area")?,
        horizon: cfg.time.horizon,
        controller: cfg.controller_cfg(),
        lag: cfg.experiment.lag,
    };
    let e = &cfg.experiment;
    let bracket = (e.size_bracket[0], e.size_bracket[1]);
    let results: Vec<_> = e
        .shapes
        .iter()
        .map(|&shape| (shape, critical_area_2d(shape, &exp, bracket, e.tol)))
        .collect();
    let name = |s: &ecodamp::experiments::AreaShape| {
        serde_json::to_value(s).expect("shape").as_str().unwrap_or_default().to_string()
    };
    let rows = results.iter().map(|(shape, res)| match res {
        Ok(r) => vec![
            name(shape),
            num(r.size),
            num(r.critical_area),
            num(r.fraction_of_domain),
            num(r.search.lo),
            num(r.search.hi),
            r.search.bisections.to_string(),
            String::new(),
        ],
        Err(err) => {
            let mut row = vec![name(shape)];
            row.extend(std::iter::repeat(String::new()).take(6));
            row.push(err.to_string());
            row
        }
    });
    art.csv("area.csv", &AREA_HEADER, rows)?;
    let mut summary = Vec::new();
    let mut first_error = None;
    for (shape, res) in results {
        match res {
            Ok(r) => {
                writeln!(
                    stdout,
                    "{}: critical area {:.4} ({:.1}% of domain), size {:.4}",
                    name(&shape),
                    r.critical_area,
                    100.0 * r.fraction_of_domain,
                    r.size
                )?;
                summary.push(serde_json::to_value(r).expect("result serializes"));
            }
            Err(err) => {
                writeln!(stdout, "{}: {err}", name(&shape))?;
                first_error.get_or_insert(err);
            }
        }
    }
    match first_error {
        Some(err) => Err(err.into()),
        None => Ok(Value::Array(summary)),
    }
}

fn stability(cfg: &RunConfig, art: &mut Artifacts, stdout: &mut dyn Write) -> Result<Value, CliError> {
    let p = cfg.effective_params();
    let eq = interior_equilibrium(&p)?;
    let j = jacobian(&p, &eq);
    let at_zero = dispersion(&p, &eq, p.d4, 0.0);
    let bound = aziz_bound(&p);
    writeln!(
        stdout,
        "E6 = ({:.6}, {:.6}, {:.6})",
        eq.u_star, eq.v_star, eq.r_star
    )?;
    writeln!(
        stdout,
        "k=0: A2={:.6e} A1={:.6e} A0={:.6e} max Re={:.6e} ({})",
        at_zero.a2,
        at_zero.a1,
        at_zero.a0,
        at_zero.max_real_part,
        if at_zero.stable { "stable" } else { "unstable" }
    )?;
    writeln!(stdout, "c = {} vs bound {:.6e}", p.c, bound)?;

    let mut rows: Vec<(String, f64)> = vec![
        ("u_star".into(), eq.u_star),
        ("v_star".into(), eq.v_star),
        ("r_star".into(), eq.r_star),
    ];
    for r in 0..3 {
        for c in 0..3 {
            rows.push((format!("j{}{}", r + 1, c + 1), j.get(r, c)));
        }
    }
    rows.extend([
        ("a2_k0".into(), at_zero.a2),
        ("a1_k0".into(), at_zero.a1),
        ("a0_k0".into(), at_zero.a0),
        ("max_real_part_k0".into(), at_zero.max_real_part),
        ("c_bound".into(), bound),
    ]);

    let mut summary = json!({
        "equilibrium": eq,
        "jacobian": j.0,
        "k0": at_zero,
        "c_bound": bound,
        "satisfies_c_bound": satisfies_aziz_bound(&p),
        "subcritical": p.subcritical(),
    });

    let ic = initial_field(cfg).ok();
    let data_max = |pick: fn(&Field) -> &Vec<f64>| {
        ic.as_ref().map(|f| pick(f).iter().copied().fold(f64::NEG_INFINITY, f64::max))
    };
    let r0 = cfg.experiment.r0_max.or_else(|| data_max(|f| match f {
        Field::OneD(s) => &s.r,
        Field::TwoD(s) => &s.r,
    }));
    let v0 = cfg.experiment.v0_max.or_else(|| data_max(|f| match f {
        Field::OneD(s) => &s.v,
        Field::TwoD(s) => &s.v,
    }));
    if let (Some(r0), Some(v0)) = (r0, v0) {
        match a2_global_threshold(&p, r0, v0) {
            Ok(g) => {
                writeln!(stdout, "a2 threshold {:.6} for r0 <= {r0}, v0 <= {v0}", g.a2_threshold)?;
                rows.push(("a2_threshold".into(), g.a2_threshold));
                summary["global_threshold"] = serde_json::to_value(g).expect("threshold");
            }
            Err(e) => summary["global_threshold"] = json!(e.to_string()),
        }
    }
    if let Some(Field::OneD(f)) = &ic {
        if let Ok(en) = energy_diagnostics(&f.grid, &f.r) {
            rows.push(("energy_e0".into(), en.e0));
            summary["energy"] = serde_json::to_value(en).expect("energy");
        }
    }
    art.csv(
        "stability.csv",
        &STABILITY_HEADER,
        rows.into_iter().map(|(k, v)| vec![k, num(v)]),
    )?;
    art.json("stability.json", &summary)?;
    Ok(summary)
}

fn sign(x: f64) -> &'static str {
    if x > 0.0 {
        "+"
    } else if x < 0.0 {
        "-"
    } else {
        "0"
    }
}

fn wavenumbers(cfg: &RunConfig) -> Vec<f64> {
    let (k_max, n) = (cfg.experiment.k_max, cfg.experiment.k_count);
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| k_max * i as f64 / (n - 1) as f64).collect(),
    }
}

fn dispersion_cmd(cfg: &RunConfig, art: &mut Artifacts, stdout: &mut dyn Write) -> Result<Value, CliError> {
    let p = cfg.effective_params();
    let eq = interior_equilibrium(&p)?;
    let ks = wavenumbers(cfg);
    let mut rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut summary = Vec::new();
    for &d4 in &cfg.experiment.d4_values {
        let sweep = dispersion_sweep(&p, &eq, d4, &ks);
        for (k, d) in ks.iter().zip(&sweep) {
            rows.push(vec![
                num(d4),
                num(*k),
                num(d.k_squared),
                num(d.a2),
                num(d.a1),
                num(d.a0),
                num(d.hurwitz_gap()),
                num(d.max_real_part),
                d.stable.to_string(),
                sign(d.a0).to_string(),
                sign(d.hurwitz_gap()).to_string(),
                sign(d.a1).to_string(),
                d.case.map(|c| c.name()).unwrap_or("").to_string(),
            ]);
        }
        if sweep.is_empty() {
            continue;
        }
        let pattern = match classify_pattern(&sweep) {
            Ok(p) => serde_json::to_value(p).expect("pattern").as_str().unwrap_or_default().to_string(),
            Err(e) => format!("error: {e}"),
        };
        let unstable: Vec<(f64, f64)> = ks
            .iter()
            .zip(&sweep)
            .filter(|(_, d)| d.max_real_part > 0.0)
            .map(|(k, d)| (*k, d.max_real_part))
            .collect();
        let band = (
            unstable.first().map(|u| u.0),
            unstable.last().map(|u| u.0),
        );
        let peak = unstable.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1));
        writeln!(
            stdout,
            "d4 = {d4}: {pattern}, unstable k in [{}, {}], peak growth {} at k = {}",
            opt_num(band.0),
            opt_num(band.1),
            opt_num(peak.map(|p| p.1)),
            opt_num(peak.map(|p| p.0)),
        )?;
        summary_rows.push(vec![
            num(d4),
            pattern.clone(),
            opt_num(band.0),
            opt_num(band.1),
            opt_num(peak.map(|p| p.1)),
            opt_num(peak.map(|p| p.0)),
        ]);
        summary.push(json!({
            "d4": d4,
            "pattern": pattern,
            "band": [band.0, band.1],
            "peak": peak,
        }));
    }
    art.csv("dispersion.csv", &DISPERSION_HEADER, rows)?;
    art.csv("dispersion_summary.csv", &DISPERSION_SUMMARY_HEADER, summary_rows)?;
    Ok(Value::Array(summary))
}

fn chaos(cfg: &RunConfig, art: &mut Artifacts, stdout: &mut dyn Write) -> Result<Value, CliError> {
    let InitialSpec::ChaosPair { base, amp1, amp2 } = cfg.initial else {
        return Err(CliError::config("chaos needs initial.preset = \"chaos-pair\""));
    };
    let GridSpec::Chebyshev { degree, interval } = cfg.grid else {
        return Err(CliError::config("chaos needs a 1-D grid"));
    };
    let e = &cfg.experiment;
    let setup = ChaosSetup {
        params: cfg.effective_params(),
        base: (base[0], base[1], base[2]),
        degree,
        interval: (interval[0], interval[1]),
        dt: cfg.time.dt,
        horizon: cfg.time.horizon,
        fit_window: (e.fit_window[0], e.fit_window[1]),
        stride: e.record_stride,
    };
    let series = chaos_divergence(&setup, amp1, amp2)?;
    let rows = (0..series.times.len()).map(|i| {
        vec![
            num(series.times[i]),
            num(series.d_l1[i]),
            num(series.d_l2[i]),
            num(series.d_linf[i]),
        ]
    });
    art.csv("divergence.csv", &DIVERGENCE_HEADER, rows)?;
    writeln!(
        stdout,
        "divergence rates: L1 {:.6e}, L2 {:.6e}, Linf {:.6e}",
        series.rate_l1, series.rate_l2, series.rate_linf
    )?;
    Ok(json!({
        "rate_l1": series.rate_l1,
        "rate_l2": series.rate_l2,
        "rate_linf": series.rate_linf,
        "samples": series.times.len(),
    }))
}
