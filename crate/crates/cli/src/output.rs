//! Artifact directory: CSV tables, graymaps, JSON documents and the run
//! manifest.

use std::fs;
use std::path::{Path, PathBuf};

use ecodamp::ParameterSet;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.toml";

/// SHA-256 over `name=<bits as hex>` lines in field order.
pub fn param_digest(p: &ParameterSet) -> String {
    let mut h = Sha256::new();
    for (name, value) in p.fields() {
        h.update(format!("{name}={:016x}\n", value.to_bits()));
    }
    hex::encode(h.finalize())
}

/// Shortest representation that reads back to the same bits.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapInfo {
    pub file: String,
    pub width: usize,
    pub height: usize,
    /// Value mapped to 0.
    pub min: f64,
    /// Value mapped to 255.
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// `ok`, or the error that ended the run.
    pub status: String,
    pub exit_code: i32,
    pub param_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resumed_from: Option<String>,
    pub config: RunConfig,
    pub artifacts: Vec<String>,
    pub heatmaps: Vec<HeatmapInfo>,
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        serde_json::from_str(&text).map_err(|e| CliError::Format(format!("manifest: {e}")))
    }
}

/// Writer for one run's output directory. Every file is written once by
/// this owner.
#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    files: Vec<String>,
    heatmaps: Vec<HeatmapInfo>,
}

impl Artifacts {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            heatmaps: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Registers `name` and returns its full path, creating parent
    /// directories.
    pub fn path(&mut self, name: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(path)
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = self.csv_writer(name, header)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv_writer(&mut self, name: &str, header: &[&str]) -> Result<csv::Writer<fs::File>, CliError> {
        let mut w = csv::Writer::from_path(self.path(name)?).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        Ok(w)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Format(e.to_string()))?;
        fs::write(self.path(name)?, text + "\n")?;
        Ok(())
    }

    /// 8-bit binary graymap of a row-major `height × width` array, scaled
    /// linearly from its own min (black) to max (white). Non-finite values
    /// are drawn white and excluded from the scale.
    pub fn graymap(&mut self, name: &str, width: usize, height: usize, data: &[f64]) -> Result<(), CliError> {
        assert_eq!(data.len(), width * height, "graymap size mismatch");
        let (min, max) = data
            .iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let (min, max) = if min <= max { (min, max) } else { (0.0, 0.0) };
        let span = max - min;
        let pixels: Vec<u8> = data
            .iter()
            .map(|&v| {
                if !v.is_finite() {
                    255
                } else if span > 0.0 {
                    ((v - min) / span * 255.0).round().clamp(0.0, 255.0) as u8
                } else {
                    0
                }
            })
            .collect();
        let file = fs::File::create(self.path(name)?)?;
        PnmEncoder::new(std::io::BufWriter::new(file))
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(&pixels, width as u32, height as u32, ExtendedColorType::L8)
            .map_err(|e| CliError::Format(format!("graymap {name}: {e}")))?;
        self.heatmaps.push(HeatmapInfo {
            file: name.to_string(),
            width,
            height,
            min,
            max,
        });
        Ok(())
    }

    pub fn write_config(&mut self, cfg: &RunConfig) -> Result<(), CliError> {
        fs::write(self.path(CONFIG)?, cfg.to_toml())?;
        Ok(())
    }

    /// Writes the manifest listing every artifact written so far.
    pub fn finish(
        mut self,
        command: &str,
        cfg: &RunConfig,
        outcome: Result<serde_json::Value, &CliError>,
        resumed_from: Option<&Path>,
    ) -> Result<Manifest, CliError> {
        let (status, exit_code, summary) = match outcome {
            Ok(summary) => ("ok".to_string(), 0, summary),
            Err(e) => (e.to_string(), e.exit_code(), serde_json::Value::Null),
        };
        self.files.push(MANIFEST.to_string());
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            status,
            exit_code,
            param_digest: param_digest(&cfg.effective_params()),
            resumed_from: resumed_from.map(|p| p.display().to_string()),
            config: cfg.clone(),
            artifacts: self.files.clone(),
            heatmaps: self.heatmaps.clone(),
            summary,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Format(e.to_string()))?;
        fs::write(self.root.join(MANIFEST), text + "\n")?;
        Ok(manifest)
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}
