//! Plain-text snapshot and checkpoint files.
//!
//! ```text
//! ecodamp-snapshot 1
//! grid chebyshev <degree> <lo> <hi>        | grid finite-difference <nx> <ny>
//! time <t>
//! digest <sha256 of the parameter set>
//! controller <dt> <streak> <accepted> <rejections>   (checkpoints only)
//! tail <n> <t_1> <s_1> ... <t_n> <s_n>             (checkpoints only)
//! field u <len>
//! <one value per line>
//! field v <len>
//! ...
//! field r <len>
//! ...
//! end
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! gives the same bits. Two-dimensional arrays are row-major in `x`
//! (index `i * ny + j`); one-dimensional arrays follow the Chebyshev node
//! order, which runs from the right end of the interval to the left.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use ecodamp::{ChebGrid, ControllerState, FDGrid2D, StateField1D, StateField2D};

use crate::config::GridSpec;
use crate::error::CliError;

pub const MAGIC: &str = "ecodamp-snapshot";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: GridSpec,
    pub time: f64,
    pub digest: String,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub controller: Option<ControllerState>,
}

impl Snapshot {
    pub fn from_1d(field: &StateField1D, digest: &str, controller: Option<&ControllerState>) -> Self {
        let (lo, hi) = field.grid.interval();
        Self {
            grid: GridSpec::Chebyshev {
                degree: field.grid.degree(),
                interval: [lo, hi],
            },
            time: field.time,
            digest: digest.to_string(),
            u: field.u.clone(),
            v: field.v.clone(),
            r: field.r.clone(),
            controller: controller.cloned(),
        }
    }

    pub fn from_2d(field: &StateField2D, digest: &str, controller: Option<&ControllerState>) -> Self {
        Self {
            grid: GridSpec::FiniteDifference {
                nx: field.grid.nx,
                ny: field.grid.ny,
            },
            time: field.time,
            digest: digest.to_string(),
            u: field.u.clone(),
            v: field.v.clone(),
            r: field.r.clone(),
            controller: controller.cloned(),
        }
    }

    pub fn to_field_1d(&self) -> Result<StateField1D, CliError> {
        let GridSpec::Chebyshev { degree, interval } = self.grid else {
            return Err(CliError::Format("snapshot holds a 2-D field".into()));
        };
        let grid = Arc::new(ChebGrid::new(degree, interval[0], interval[1])?);
        Ok(StateField1D::new(
            grid,
            self.u.clone(),
            self.v.clone(),
            self.r.clone(),
            self.time,
        )?)
    }

    pub fn to_field_2d(&self) -> Result<StateField2D, CliError> {
        let GridSpec::FiniteDifference { nx, ny } = self.grid else {
            return Err(CliError::Format("snapshot holds a 1-D field".into()));
        };
        Ok(StateField2D::new(
            FDGrid2D::new(nx, ny)?,
            self.u.clone(),
            self.v.clone(),
            self.r.clone(),
            self.time,
        )?)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{MAGIC} {VERSION}").unwrap();
        match self.grid {
            GridSpec::Chebyshev { degree, interval } => {
                writeln!(s, "grid chebyshev {degree} {:?} {:?}", interval[0], interval[1]).unwrap()
            }
            GridSpec::FiniteDifference { nx, ny } => {
                writeln!(s, "grid finite-difference {nx} {ny}").unwrap()
            }
        }
        writeln!(s, "time {:?}", self.time).unwrap();
        writeln!(s, "digest {}", self.digest).unwrap();
        if let Some(c) = &self.controller {
            writeln!(s, "controller {:?} {} {} {}", c.dt, c.streak, c.accepted, c.rejections).unwrap();
            write!(s, "tail {}", c.tail.len()).unwrap();
            for (t, v) in &c.tail {
                write!(s, " {t:?} {v:?}").unwrap();
            }
            s.push('\n');
        }
        for (name, values) in [("u", &self.u), ("v", &self.v), ("r", &self.r)] {
            writeln!(s, "field {name} {}", values.len()).unwrap();
            for x in values {
                writeln!(s, "{x:?}").unwrap();
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| CliError::Format(format!("unexpected end of file, expected {what}")))
        };

        let (n, header) = next("header")?;
        let mut words = header.split_whitespace();
        if words.next() != Some(MAGIC) {
            return Err(bad(n, "not a snapshot file"));
        }
        let version: u32 = parse_word(words.next(), n, "version")?;
        if version != VERSION {
            return Err(bad(n, &format!("unsupported version {version}")));
        }

        let (n, line) = next("grid")?;
        let w: Vec<&str> = line.split_whitespace().collect();
        let grid = match w.as_slice() {
            ["grid", "chebyshev", deg, lo, hi] => GridSpec::Chebyshev {
                degree: parse_word(Some(deg), n, "degree")?,
                interval: [parse_word(Some(lo), n, "lo")?, parse_word(Some(hi), n, "hi")?],
            },
            ["grid", "finite-difference", nx, ny] => GridSpec::FiniteDifference {
                nx: parse_word(Some(nx), n, "nx")?,
                ny: parse_word(Some(ny), n, "ny")?,
            },
            _ => return Err(bad(n, "expected a grid line")),
        };

        let (n, line) = next("time")?;
        let time = match line.split_once(' ') {
            Some(("time", t)) => parse_word(Some(t), n, "time")?,
            _ => return Err(bad(n, "expected a time line")),
        };
        let (n, line) = next("digest")?;
        let digest = match line.split_once(' ') {
            Some(("digest", d)) => d.to_string(),
            _ => return Err(bad(n, "expected a digest line")),
        };

        let (mut n, mut line) = next("field or controller")?;
        let mut controller = None;
        if line.starts_with("controller") {
            let w: Vec<&str> = line.split_whitespace().collect();
            let [_, dt, streak, accepted, rejections] = w.as_slice() else {
                return Err(bad(n, "controller line needs four values"));
            };
            let mut state = ControllerState {
                dt: parse_word(Some(dt), n, "dt")?,
                streak: parse_word(Some(streak), n, "streak")?,
                accepted: parse_word(Some(accepted), n, "accepted")?,
                rejections: parse_word(Some(rejections), n, "rejections")?,
                tail: Vec::new(),
            };
            let (tn, tline) = next("tail")?;
            let w: Vec<&str> = tline.split_whitespace().collect();
            if w.first() != Some(&"tail") || w.len() < 2 {
                return Err(bad(tn, "expected a tail line"));
            }
            let len: usize = parse_word(w.get(1), tn, "tail length")?;
            if w.len() != 2 + 2 * len {
                return Err(bad(tn, "tail length does not match its values"));
            }
            for pair in w[2..].chunks(2) {
                state.tail.push((
                    parse_word(Some(&pair[0]), tn, "tail time")?,
                    parse_word(Some(&pair[1]), tn, "tail value")?,
                ));
            }
            controller = Some(state);
            (n, line) = next("field")?;
        }

        let mut fields: Vec<Vec<f64>> = Vec::with_capacity(3);
        for name in ["u", "v", "r"] {
            let w: Vec<&str> = line.split_whitespace().collect();
            let ["field", fname, len] = w.as_slice() else {
                return Err(bad(n, &format!("expected `field {name} <len>`")));
            };
            if *fname != name {
                return Err(bad(n, &format!("expected field {name}, found {fname}")));
            }
            let len: usize = parse_word(Some(len), n, "field length")?;
            let mut values = Vec::with_capacity(len);
            for _ in 0..len {
                let (vn, v) = next("value")?;
                values.push(parse_word(Some(&v), vn, "value")?);
            }
            fields.push(values);
            (n, line) = next(if name == "r" { "end" } else { "field" })?;
        }
        if line != "end" {
            return Err(bad(n, "expected `end`"));
        }
        let expected = match grid {
            GridSpec::Chebyshev { degree, .. } => degree + 1,
            GridSpec::FiniteDifference { nx, ny } => nx * ny,
        };
        if fields.iter().any(|f| f.len() != expected) {
            return Err(CliError::Format(format!(
                "field lengths do not match the grid ({expected} values expected)"
            )));
        }
        let r = fields.pop().unwrap();
        let v = fields.pop().unwrap();
        let u = fields.pop().unwrap();
        Ok(Self {
            grid,
            time,
            digest,
            u,
            v,
            r,
            controller,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Format(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Format(m) => CliError::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn bad(line: usize, msg: &str) -> CliError {
    CliError::Format(format!("line {line}: {msg}"))
}

fn parse_word<T: std::str::FromStr, S: AsRef<str>>(word: Option<S>, line: usize, what: &str) -> Result<T, CliError> {
    word.and_then(|w| w.as_ref().parse().ok())
        .ok_or_else(|| bad(line, &format!("cannot read {what}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Snapshot {
        Snapshot {
            grid: GridSpec::Chebyshev {
                degree: 3,
                interval: [0.0, std::f64::consts::PI],
            },
            time: 0.1 + 0.2,
            digest: "abc".into(),
            u: vec![1.0, 1e-300, 0.1, 2.5e10],
            v: vec![0.0, 1.0 / 3.0, 7.0, 8.0],
            r: vec![f64::MIN_POSITIVE, 5.0, 6.0, 1e6],
            controller: Some(ControllerState {
                dt: 1e-3 * 1.2,
                streak: 3,
                accepted: 17,
                rejections: 1,
                tail: vec![(0.5, 0.25), (0.6, 1.0 / 7.0)],
            }),
        }
    }

    #[test]
    fn round_trips_bitwise() {
        let s = sample();
        let back = Snapshot::parse(&s.render()).unwrap();
        assert_eq!(back, s);
        for (a, b) in back.v.iter().zip(&s.v) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn plain_snapshot_has_no_controller() {
        let mut s = sample();
        s.controller = None;
        s.grid = GridSpec::FiniteDifference { nx: 2, ny: 2 };
        let text = s.render();
        assert!(!text.contains("controller"));
        assert_eq!(Snapshot::parse(&text).unwrap(), s);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let text = sample().render();
        let cut = &text[..text.len() / 2];
        assert!(matches!(Snapshot::parse(cut), Err(CliError::Format(_))));
        let wrong = text.replace("field v 4", "field v 5");
        assert!(Snapshot::parse(&wrong).is_err());
    }
}
