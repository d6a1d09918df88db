//! Run configuration: TOML with dotted sections, named presets and
//! `key=value` overrides.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ecodamp::experiments::AreaShape;
use ecodamp::{
    ModelVariant, ParameterSet, ReactionLag, RefugeProfile, RefugeShape, StepControllerCfg,
    VariantKind,
};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

pub const PRESETS: [&str; 5] = [
    "fig2-uniform",
    "fig4-gaussian",
    "fig9-perturbed-equilibrium",
    "chaos-pair",
    "area-cosine",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub params: ParameterSet,
    pub grid: GridSpec,
    pub initial: InitialSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub controller: ControllerSpec,
    #[serde(default)]
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub variant: VariantKind,
    /// Sets `d4 = k |c - w3/sat3|`, replacing `params.d4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overcrowd_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refuge: Option<RefugeProfile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridSpec {
    /// `degree + 1` Chebyshev nodes on `interval`.
    Chebyshev { degree: usize, interval: [f64; 2] },
    /// `nx × ny` nodes on `(-1, 1)^2`.
    FiniteDifference { nx: usize, ny: usize },
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        match self {
            GridSpec::Chebyshev { .. } => 1,
            GridSpec::FiniteDifference { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", deny_unknown_fields)]
pub enum InitialSpec {
    /// Constant `(u, v, r)`.
    #[serde(rename = "fig2-uniform")]
    Uniform { u: f64, v: f64, r: f64 },
    /// `u = cos(2πx)cos(2πy) + 30`, `v = u + 200`,
    /// `r = amplitude · exp(-sharpness (x² + y²))`.
    #[serde(rename = "fig4-gaussian")]
    Gaussian { amplitude: f64, sharpness: f64 },
    /// Interior equilibrium plus `amplitude · cos(mode · x)` in every species.
    #[serde(rename = "fig9-perturbed-equilibrium")]
    PerturbedEquilibrium { amplitude: f64, mode: f64 },
    /// `base + amp · cos²(x)`; `simulate` runs the first member.
    #[serde(rename = "chaos-pair")]
    ChaosPair { base: [f64; 3], amp1: f64, amp2: f64 },
    /// `u = r = cos(2πx)cos(2πy) + offset`, `v = u + v_excess`.
    #[serde(rename = "area-cosine")]
    AreaCosine { offset: f64, v_excess: f64 },
    /// Arrays read from a snapshot file.
    #[serde(rename = "tabulated")]
    Tabulated { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub dt: f64,
    pub horizon: f64,
    /// Keep every `snapshot_stride`-th accepted step; 0 keeps only the ends.
    #[serde(default)]
    pub snapshot_stride: usize,
    /// Write a checkpoint every this many accepted steps; 0 disables.
    #[serde(default)]
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
}

fn default_threshold() -> f64 {
    1e6
}

fn default_dt_min() -> f64 {
    1e-8
}

impl Default for ControllerSpec {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
            dt_min: default_dt_min(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Refuge edges for `sweep`.
    pub a_grid: Vec<f64>,
    /// Refuge edge bracket for `critical`.
    pub bracket: [f64; 2],
    pub tol: f64,
    /// Edge width of the tanh refuge.
    pub refuge_width: f64,
    /// Initial `v` levels for `critical`; empty runs a single search.
    pub v0_grid: Vec<f64>,
    pub shapes: Vec<AreaShape>,
    /// Half-width / radius bracket for `area`.
    pub size_bracket: [f64; 2],
    pub lag: ReactionLag,
    pub k_max: f64,
    pub k_count: usize,
    pub d4_values: Vec<f64>,
    pub fit_window: [f64; 2],
    /// Record the chaos divergence every this many steps.
    pub record_stride: usize,
    /// Bounds on the initial data for the global threshold in `stability`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0_max: Option<f64>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            a_grid: Vec::new(),
            bracket: [1.5, 3.14],
            tol: 0.01,
            refuge_width: 0.04,
            v0_grid: Vec::new(),
            shapes: vec![AreaShape::Square, AreaShape::Circle],
            size_bracket: [0.3, 1.45],
            lag: ReactionLag::default(),
            k_max: 30.0,
            k_count: 3001,
            d4_values: vec![0.0],
            fit_window: [0.0, f64::MAX],
            record_stride: 10,
            r0_max: None,
            v0_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub heatmaps: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { heatmaps: true }
    }
}

impl RunConfig {
    /// Checks everything that can be checked without running a solver.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate()?;
        self.variant()?;
        self.controller_cfg().validate()?;
        match self.grid {
            GridSpec::Chebyshev { degree, interval } => {
                if degree < 2 {
                    return Err(CliError::config("grid.degree must be at least 2"));
                }
                if !(interval[0] < interval[1]) || !interval.iter().all(|v| v.is_finite()) {
                    return Err(CliError::config("grid.interval must be increasing and finite"));
                }
            }
            GridSpec::FiniteDifference { nx, ny } => {
                if nx < 3 || ny < 3 {
                    return Err(CliError::config("grid.nx and grid.ny must be at least 3"));
                }
            }
        }
        let needs_2d = matches!(
            self.initial,
            InitialSpec::Gaussian { .. } | InitialSpec::AreaCosine { .. }
        );
        let needs_1d = matches!(
            self.initial,
            InitialSpec::PerturbedEquilibrium { .. } | InitialSpec::ChaosPair { .. }
        );
        if (needs_2d && self.grid.dim() != 2) || (needs_1d && self.grid.dim() != 1) {
            return Err(CliError::config(format!(
                "initial preset does not fit a {}-D grid",
                self.grid.dim()
            )));
        }
        if !(self.time.dt > 0.0 && self.time.dt.is_finite()) {
            return Err(CliError::config("time.dt must be positive"));
        }
        if !(self.time.horizon >= 0.0 && self.time.horizon.is_finite()) {
            return Err(CliError::config("time.horizon must be nonnegative"));
        }
        let e = &self.experiment;
        if !(e.tol > 0.0) {
            return Err(CliError::config("experiment.tol must be positive"));
        }
        if !(e.refuge_width > 0.0) {
            return Err(CliError::config("experiment.refuge_width must be positive"));
        }
        if e.record_stride == 0 {
            return Err(CliError::config("experiment.record_stride must be positive"));
        }
        if e.k_count > 0 && !(e.k_max >= 0.0 && e.k_max.is_finite()) {
            return Err(CliError::config("experiment.k_max must be nonnegative"));
        }
        Ok(())
    }

    /// Parameters with `overcrowd_factor` applied.
    pub fn effective_params(&self) -> ParameterSet {
        let mut p = self.params.clone();
        if let Some(k) = self.model.overcrowd_factor {
            p.d4 = p.overcrowding_from_factor(k);
        }
        p
    }

    pub fn variant(&self) -> Result<ModelVariant, CliError> {
        let v = match (&self.model.refuge, self.model.variant) {
            (_, VariantKind::Classical) => ModelVariant::classical(),
            (Some(refuge), kind) => ModelVariant::with_refuge(kind, refuge.clone())?,
            (None, kind) => {
                return Err(CliError::config(format!(
                    "variant {} needs model.refuge",
                    kind.name()
                )))
            }
        };
        Ok(v)
    }

    pub fn controller_cfg(&self) -> StepControllerCfg {
        let mut cfg = StepControllerCfg::new(self.time.dt);
        cfg.dt_min = self.controller.dt_min;
        cfg.threshold = self.controller.threshold;
        cfg.snapshot_stride = self.time.snapshot_stride;
        cfg
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }
}

/// Base configuration of a named preset.
pub fn preset(name: &str) -> Result<RunConfig, CliError> {
    let cfg = match name {
        "fig2-uniform" => RunConfig {
            model: ModelSpec {
                variant: VariantKind::RefugeOnly,
                overcrowd_factor: None,
                refuge: Some(RefugeProfile::tanh_step(2.8, 0.04)),
            },
            params: ParameterSet::refuge_1d(),
            grid: GridSpec::Chebyshev {
                degree: 127,
                interval: [0.0, PI],
            },
            initial: InitialSpec::Uniform {
                u: 10.0,
                v: 2000.0,
                r: 10.0,
            },
            time: TimeSpec {
                dt: 1e-3,
                horizon: 12.0,
                snapshot_stride: 100,
                checkpoint_every: 0,
            },
            controller: ControllerSpec::default(),
            experiment: ExperimentSpec {
                a_grid: (0..=12).map(|i| 1.6 + 0.1 * i as f64).collect(),
                bracket: [1.5, 3.14],
                ..ExperimentSpec::default()
            },
            output: OutputSpec::default(),
        },
        "fig4-gaussian" => RunConfig {
            model: ModelSpec {
                variant: VariantKind::RefugeOnly,
                overcrowd_factor: None,
                refuge: Some(RefugeProfile::Indicator2D(RefugeShape::Circle { radius_sq: 0.5 })),
            },
            params: ParameterSet::avoided_2d(),
            grid: GridSpec::FiniteDifference { nx: 50, ny: 50 },
            initial: InitialSpec::Gaussian {
                amplitude: 100.0,
                sharpness: 10.0,
            },
            time: TimeSpec {
                dt: 1e-3,
                horizon: 10.0,
                snapshot_stride: 500,
                checkpoint_every: 0,
            },
            controller: ControllerSpec::default(),
            experiment: ExperimentSpec::default(),
            output: OutputSpec::default(),
        },
        "fig9-perturbed-equilibrium" => RunConfig {
            model: ModelSpec {
                variant: VariantKind::Classical,
                overcrowd_factor: None,
                refuge: None,
            },
            params: ParameterSet::turing(),
            grid: GridSpec::Chebyshev {
                degree: 127,
                interval: [0.0, PI],
            },
            initial: InitialSpec::PerturbedEquilibrium {
                amplitude: 0.01,
                mode: 24.0,
            },
            time: TimeSpec {
                dt: 1e-1,
                horizon: 1000.0,
                snapshot_stride: 50,
                checkpoint_every: 0,
            },
            controller: ControllerSpec::default(),
            experiment: ExperimentSpec {
                k_max: 80.0,
                k_count: 8001,
                d4_values: vec![0.0, 0.16],
                ..ExperimentSpec::default()
            },
            output: OutputSpec::default(),
        },
        "chaos-pair" => RunConfig {
            model: ModelSpec {
                variant: VariantKind::Classical,
                overcrowd_factor: None,
                refuge: None,
            },
            params: ParameterSet::chaos(),
            grid: GridSpec::Chebyshev {
                degree: 127,
                interval: [0.0, PI],
            },
            initial: InitialSpec::ChaosPair {
                base: [25.0, 13.0, 9.0],
                amp1: 0.1,
                amp2: 0.11,
            },
            time: TimeSpec {
                dt: 1e-2,
                horizon: 1000.0,
                snapshot_stride: 100,
                checkpoint_every: 0,
            },
            controller: ControllerSpec::default(),
            experiment: ExperimentSpec {
                fit_window: [0.0, 1000.0],
                record_stride: 10,
                ..ExperimentSpec::default()
            },
            output: OutputSpec::default(),
        },
        "area-cosine" => RunConfig {
            model: ModelSpec {
                variant: VariantKind::RefugeOnly,
                overcrowd_factor: None,
                refuge: Some(RefugeProfile::Indicator2D(RefugeShape::Square { halfwidth: 0.8 })),
            },
            params: ParameterSet::critical_area_2d(),
            grid: GridSpec::FiniteDifference { nx: 50, ny: 50 },
            initial: InitialSpec::AreaCosine {
                offset: 30.0,
                v_excess: 200.0,
            },
            time: TimeSpec {
                dt: 1e-3,
                horizon: 10.0,
                snapshot_stride: 500,
                checkpoint_every: 0,
            },
            controller: ControllerSpec::default(),
            experiment: ExperimentSpec::default(),
            output: OutputSpec::default(),
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown preset `{other}`; known presets: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(cfg)
}

/// Splits `a.b.c=value`; the value is read as a TOML literal, falling back
/// to a bare string.
pub fn parse_override(spec: &str) -> Result<(Vec<String>, Value), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{spec}` is not key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(|s| s.trim().to_string()).collect();
    if path.iter().any(|s| s.is_empty()) {
        return Err(CliError::Config(format!("override `{spec}` has an empty key segment")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((path, value))
}

fn set_path(table: &mut Table, path: &[String], value: Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut cur = table;
    for seg in parents {
        let entry = cur
            .entry(seg.clone())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(CliError::Config(format!(
                    "override path `{}` crosses a non-table value at `{seg}`",
                    path.join(".")
                )))
            }
        };
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// Recursively merges `top` into `base`. A table that changes its `kind` or
/// `preset` tag replaces the base table instead of merging with it.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) if !retagged(b, &t) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn retagged(base: &Table, top: &Table) -> bool {
    ["kind", "preset"]
        .iter()
        .any(|tag| matches!((base.get(*tag), top.get(*tag)), (Some(a), Some(b)) if a != b))
}

/// Resolves preset, file and overrides into a validated configuration.
pub fn load(
    preset_name: Option<&str>,
    file: Option<&Path>,
    overrides: &[String],
) -> Result<RunConfig, CliError> {
    let file_text = match file {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?),
        None => None,
    };
    let cfg = match (preset_name, &file_text, overrides.is_empty()) {
        // A lone file is parsed directly so errors carry line numbers.
        (None, Some(text), true) => toml::from_str::<RunConfig>(text).map_err(|e| {
            CliError::Config(format!("{}: {e}", file.expect("file given").display()))
        })?,
        (None, None, _) => {
            return Err(CliError::config("either --preset or --config is required"));
        }
        _ => {
            let mut table = match preset_name {
                Some(name) => Table::try_from(preset(name)?).expect("preset serializes"),
                None => Table::new(),
            };
            if let Some(text) = &file_text {
                let top: Table = toml::from_str(text).map_err(|e| {
                    CliError::Config(format!("{}: {e}", file.expect("file given").display()))
                })?;
                merge(&mut table, top);
            }
            for spec in overrides {
                let (path, value) = parse_override(spec)?;
                set_path(&mut table, &path, value)?;
            }
            Value::Table(table)
                .try_into::<RunConfig>()
                .map_err(|e| CliError::Config(format!("invalid config: {e}")))?
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let cfg = load(
            Some("fig2-uniform"),
            None,
            &[
                "params.a2=2.5".into(),
                "experiment.a_grid=[2.0, 2.5]".into(),
                "model.refuge.center=2.0".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.params.a2, 2.5);
        assert_eq!(cfg.experiment.a_grid, vec![2.0, 2.5]);
        assert_eq!(cfg.model.refuge, Some(RefugeProfile::tanh_step(2.0, 0.04)));
    }

    #[test]
    fn retagging_replaces_the_table() {
        let cfg = load(
            Some("fig2-uniform"),
            None,
            &["initial={preset = \"chaos-pair\", base = [1.0, 2.0, 3.0], amp1 = 0.1, amp2 = 0.2}".into()],
        )
        .unwrap();
        assert!(matches!(cfg.initial, InitialSpec::ChaosPair { .. }));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = load(Some("fig2-uniform"), None, &["params.a7=1".into()]).unwrap_err();
        assert!(err.to_string().contains("a7"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn file_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        let mut text = preset("fig2-uniform").unwrap().to_toml();
        text = text.replace("a2 = ", "a2 = \"oops\"\nb2x = ");
        std::fs::write(&path, text).unwrap();
        let err = load(None, Some(&path), &[]).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn mismatched_preset_and_grid_fail_validation() {
        let err = load(
            Some("fig4-gaussian"),
            None,
            &["grid={kind = \"chebyshev\", degree = 16, interval = [0.0, 1.0]}".into()],
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn override_values_fall_back_to_strings() {
        let (path, v) = parse_override("model.variant=refuge-only").unwrap();
        assert_eq!(path, vec!["model", "variant"]);
        assert_eq!(v, Value::String("refuge-only".into()));
        assert!(parse_override("novalue").is_err());
    }
}
