use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    /// Cycles per sample.
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceKind {
    Constant {
        value: f64,
    },
    SinusoidSum {
        #[serde(default)]
        offset: f64,
        components: Vec<Sinusoid>,
    },
    Square {
        amplitude: f64,
        /// Period in samples.
        period: u64,
        #[serde(default)]
        offset: f64,
    },
    /// One value per line; blank lines and `#` comments are skipped.
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpec {
    #[serde(flatten)]
    pub kind: ReferenceKind,
    /// Declared sufficient-richness order, checked at run time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_sr_order: Option<usize>,
}

impl ReferenceSpec {
    pub fn constant(value: f64) -> Self {
        Self {
            kind: ReferenceKind::Constant { value },
            nominal_sr_order: Some(if value == 0.0 { 0 } else { 1 }),
        }
    }

    pub fn sinusoid(amplitude: f64, frequency: f64) -> Self {
        Self {
            kind: ReferenceKind::SinusoidSum {
                offset: 0.0,
                components: vec![Sinusoid {
                    amplitude,
                    frequency,
                    phase: 0.0,
                }],
            },
            nominal_sr_order: Some(2),
        }
    }

    pub fn validate(&self, _horizon: u64, _d2: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::Reference(m.to_string()));
        match &self.kind {
            ReferenceKind::Constant { value } if !value.is_finite() => bad("constant must be finite"),
            ReferenceKind::SinusoidSum { components, offset } => {
                if !offset.is_finite() {
                    return bad("offset must be finite");
                }
                for c in components {
                    if !(c.amplitude.is_finite() && c.frequency.is_finite() && c.phase.is_finite()) {
                        return bad("sinusoid parameters must be finite");
                    }
                    if !(0.0..=0.5).contains(&c.frequency) {
                        return bad("sinusoid frequency must lie in [0, 0.5] cycles per sample");
                    }
                }
                Ok(())
            }
            ReferenceKind::Square { period, .. } if *period < 2 => bad("square period must be at least 2 samples"),
            ReferenceKind::File { path } if path.as_os_str().is_empty() => bad("file path is empty"),
            _ => Ok(()),
        }
    }

    /// Makes a relative file path relative to `base`.
    pub fn resolve_relative_to(&mut self, base: Option<&Path>) {
        if let (ReferenceKind::File { path }, Some(base)) = (&mut self.kind, base) {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    /// Samples `y_ref(0) … y_ref(len−1)`.
    pub fn generate(&self, len: usize) -> Result<Vec<f64>> {
        match &self.kind {
            ReferenceKind::Constant { value } => Ok(vec![*value; len]),
            ReferenceKind::SinusoidSum { offset, components } => Ok((0..len)
                .map(|k| {
                    offset
                        + components
                            .iter()
                            .map(|c| c.amplitude * (TAU * c.frequency * k as f64 + c.phase).sin())
                            .sum::<f64>()
                })
                .collect()),
            ReferenceKind::Square {
                amplitude,
                period,
                offset,
            } => Ok((0..len as u64)
                .map(|k| {
                    let high = (k % period) < period / 2;
                    offset + if high { *amplitude } else { -amplitude }
                })
                .collect()),
            ReferenceKind::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                let values = text
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .enumerate()
                    .map(|(i, l)| {
                        l.parse::<f64>()
                            .map_err(|e| Error::Reference(format!("{}: value {}: {e}", path.display(), i + 1)))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if values.len() < len {
                    return Err(Error::Reference(format!(
                        "{} holds {} samples, the scenario needs {len} (horizon plus d2 lookahead)",
                        path.display(),
                        values.len()
                    )));
                }
                Ok(values[..len].to_vec())
            }
        }
    }
}
