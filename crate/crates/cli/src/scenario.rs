//! TOML scenario files.
//!
//! ```toml
//! schema = 1
//! units = "natural units, lengths and times in units of sigma"
//! id = "packet-sweep"
//! n = 3
//!
//! [[detectors]]
//! coupling = 1.0
//! switch_weight = 1.0
//! switch_time = 0.0
//! position = [0.0, 0.0, 0.0]
//! smearing = { family = "gaussian", sigma = 1.0 }
//!
//! [amplitude]
//! family = "gaussian_packet"
//! peak = 1.0
//! center = [1.0, 0.0, 0.0]
//! spread = 0.5
//!
//! [sweep]
//! path = "amplitude.peak"
//! values = [0.0, 0.5, 1.0]
//! ```

use std::path::Path;

use harvest_core::kernel::{CoherentAmplitude, DetectorParams};
use harvest_core::oracle::DEFAULT_BUDGET;
use harvest_core::quadrature::QuadratureConfig;
use serde::{Deserialize, Serialize};

use crate::ConfigError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    /// Maximum occupation per mode.
    pub truncation: usize,
    pub budget: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            truncation: 60,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path to a numeric field, array entries by index:
    /// `detectors.1.position.0`, `amplitude.packets.0.peak`.
    pub path: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    /// Free-text declaration of the base unit all lengths and times use.
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub n: usize,
    pub detectors: Vec<DetectorParams>,
    #[serde(default)]
    pub amplitude: CoherentAmplitude,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxis>,
}

/// One evaluation of a scenario, after any sweep value is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPoint {
    pub id: String,
    pub units: String,
    pub scenario: Scenario,
    pub sweep: Option<(String, f64)>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let file = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            file: file.clone(),
            source,
        })?;
        let mut scenario = Self::parse(&text, &file)?;
        if scenario.id.is_none() {
            scenario.id = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(scenario)
    }

    pub fn parse(text: &str, file: &str) -> Result<Self, ConfigError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| ConfigError::Parse {
            file: file.to_string(),
            message: e.to_string(),
        })?;
        scenario.validate(file)?;
        Ok(scenario)
    }

    pub fn id(&self) -> &str {
        self.id.as_deref().unwrap_or("scenario")
    }

    pub fn validate(&self, file: &str) -> Result<(), ConfigError> {
        let invalid = |field: &str, message: String| ConfigError::Invalid {
            file: file.to_string(),
            field: field.to_string(),
            message,
        };
        if self.schema != SCHEMA_VERSION {
            return Err(invalid("schema", format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema)));
        }
        if self.units.trim().is_empty() {
            return Err(invalid("units", "a units declaration is required".into()));
        }
        if !(1..=3).contains(&self.n) {
            return Err(invalid("n", format!("spatial dimension must be 1, 2 or 3, got {}", self.n)));
        }
        if !(1..=2).contains(&self.detectors.len()) {
            return Err(invalid("detectors", format!("expected one or two detectors, got {}", self.detectors.len())));
        }
        for (i, det) in self.detectors.iter().enumerate() {
            det.validate(self.n).map_err(|e| invalid(&format!("detectors.{i}"), e.to_string()))?;
        }
        self.amplitude
            .validate(self.n)
            .map_err(|e| invalid("amplitude", e.to_string()))?;
        self.quadrature
            .validate()
            .map_err(|e| invalid("quadrature", e.to_string()))?;
        if let Some(o) = &self.oracle {
            if o.truncation == 0 || o.budget == 0 {
                return Err(invalid("oracle", "truncation and budget must be positive".into()));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(invalid("sweep.values", "at least one value is required".into()));
            }
            if sweep.values.iter().any(|v| !v.is_finite()) {
                return Err(invalid("sweep.values", "values must be finite".into()));
            }
            if sweep.path.starts_with("sweep") {
                return Err(invalid("sweep.path", "the sweep cannot modify itself".into()));
            }
            let tree = self.tree().map_err(|m| invalid("sweep", m))?;
            lookup_number(&tree, &sweep.path).map_err(|m| invalid("sweep.path", m))?;
        }
        Ok(())
    }

    fn tree(&self) -> Result<toml::Value, String> {
        toml::Value::try_from(self).map_err(|e| e.to_string())
    }

    /// Every point to evaluate: one per sweep value, or the scenario itself.
    pub fn points(&self) -> Result<Vec<ScenarioPoint>, ConfigError> {
        let file = self.id().to_string();
        let Some(sweep) = &self.sweep else {
            let mut scenario = self.clone();
            scenario.sweep = None;
            return Ok(vec![ScenarioPoint {
                id: self.id().to_string(),
                units: self.units.clone(),
                scenario,
                sweep: None,
            }]);
        };
        let invalid = |field: String, message: String| ConfigError::Invalid {
            file: file.clone(),
            field,
            message,
        };
        let mut base = self.clone();
        base.sweep = None;
        let tree = base.tree().map_err(|m| invalid("sweep".into(), m))?;
        sweep
            .values
            .iter()
            .enumerate()
            .map(|(i, &value)| {
                let mut t = tree.clone();
                set_number(&mut t, &sweep.path, value).map_err(|m| invalid("sweep.path".into(), m))?;
                let scenario: Scenario = t
                    .try_into()
                    .map_err(|e: toml::de::Error| invalid(sweep.path.clone(), e.to_string()))?;
                scenario
                    .validate(&file)
                    .map_err(|e| invalid(format!("{} = {value}", sweep.path), e.to_string()))?;
                Ok(ScenarioPoint {
                    id: format!("{}#{i}", self.id()),
                    units: self.units.clone(),
                    scenario,
                    sweep: Some((sweep.path.clone(), value)),
                })
            })
            .collect()
    }
}

fn step<'a>(node: &'a mut toml::Value, key: &str, path: &str) -> Result<&'a mut toml::Value, String> {
    let missing = || format!("path `{path}` does not exist (no `{key}`)");
    match node {
        toml::Value::Table(t) => t.get_mut(key).ok_or_else(missing),
        toml::Value::Array(a) => {
            let idx: usize = key.parse().map_err(|_| missing())?;
            a.get_mut(idx).ok_or_else(missing)
        }
        _ => Err(missing()),
    }
}

fn lookup_number(tree: &toml::Value, path: &str) -> Result<f64, String> {
    let mut node = tree.clone();
    let mut cur = &mut node;
    for key in path.split('.') {
        cur = step(cur, key, path)?;
    }
    match cur {
        toml::Value::Float(v) => Ok(*v),
        toml::Value::Integer(v) => Ok(*v as f64),
        other => Err(format!("path `{path}` holds a {}, not a number", other.type_str())),
    }
}

fn set_number(tree: &mut toml::Value, path: &str, value: f64) -> Result<(), String> {
    let mut cur = tree;
    for key in path.split('.') {
        cur = step(cur, key, path)?;
    }
    match cur {
        toml::Value::Integer(_) if value.fract() == 0.0 && value.abs() < 9.0e15 => {
            *cur = toml::Value::Integer(value as i64);
            Ok(())
        }
        toml::Value::Float(_) | toml::Value::Integer(_) => {
            *cur = toml::Value::Float(value);
            Ok(())
        }
        other => Err(format!("path `{path}` holds a {}, not a number", other.type_str())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema = 1
units = "natural, lengths in sigma"
n = 3

[[detectors]]
coupling = 1.0
switch_weight = 1.0
switch_time = 0.0
position = [0, 0, 0]
smearing = { family = "gaussian", sigma = 1.0 }

[amplitude]
family = "gaussian_packet"
peak = 1.0
center = [1.0, 0.0, 0.0]
spread = 0.5
"#;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::parse(BASE, "base.toml").unwrap();
        assert_eq!(s.detectors.len(), 1);
        assert_eq!(s.quadrature, QuadratureConfig::default());
        assert!(matches!(s.amplitude, CoherentAmplitude::GaussianPacket(_)));
        assert_eq!(s.points().unwrap().len(), 1);
    }

    #[test]
    fn units_are_mandatory() {
        let text = BASE.replace("units = \"natural, lengths in sigma\"\n", "");
        let err = Scenario::parse(&text, "f.toml").unwrap_err().to_string();
        assert!(err.contains("units"), "{err}");
        let text = BASE.replace("natural, lengths in sigma", " ");
        assert!(matches!(Scenario::parse(&text, "f.toml"), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = BASE.replace("coupling = 1.0", "coupling = \"big\"");
        let err = Scenario::parse(&text, "f.toml").unwrap_err().to_string();
        assert!(err.contains("line 7") || err.contains(":7:"), "{err}");
        let text = BASE.replace("coupling = 1.0", "coupling = 1.0\ncolour = 2");
        assert!(Scenario::parse(&text, "f.toml").unwrap_err().to_string().contains("colour"));
    }

    #[test]
    fn sweep_expands_in_order() {
        let text = format!("{BASE}\n[sweep]\npath = \"amplitude.peak\"\nvalues = [0.0, 0.5, 2.0]\n");
        let s = Scenario::parse(&text, "f.toml").unwrap();
        let points = s.points().unwrap();
        let peaks: Vec<f64> = points
            .iter()
            .map(|p| match &p.scenario.amplitude {
                CoherentAmplitude::GaussianPacket(g) => g.peak,
                _ => f64::NAN,
            })
            .collect();
        assert_eq!(peaks, vec![0.0, 0.5, 2.0]);
        assert_eq!(points[2].id, "scenario#2");
        assert!(points.iter().all(|p| p.scenario.sweep.is_none()));
    }

    #[test]
    fn sweep_reaches_array_entries_and_defaults() {
        let text = format!("{BASE}\n[sweep]\npath = \"detectors.0.position.2\"\nvalues = [1.5]\n");
        let p = Scenario::parse(&text, "f.toml").unwrap().points().unwrap();
        assert_eq!(p[0].scenario.detectors[0].position, vec![0.0, 0.0, 1.5]);
        // `gap` is defaulted, yet addressable
        let text = format!("{BASE}\n[sweep]\npath = \"detectors.0.gap\"\nvalues = [2.0]\n");
        let p = Scenario::parse(&text, "f.toml").unwrap().points().unwrap();
        assert_eq!(p[0].scenario.detectors[0].gap, 2.0);
    }

    #[test]
    fn bad_sweeps_are_rejected() {
        for (path, values) in [
            ("amplitude.width", "[1.0]"),
            ("detectors.3.coupling", "[1.0]"),
            ("detectors.0.smearing.family", "[1.0]"),
            ("amplitude.peak", "[]"),
        ] {
            let text = format!("{BASE}\n[sweep]\npath = \"{path}\"\nvalues = {values}\n");
            assert!(matches!(Scenario::parse(&text, "f.toml"), Err(ConfigError::Invalid { .. })), "{path}");
        }
        let text = format!("{BASE}\n[sweep]\npath = \"amplitude.spread\"\nvalues = [-1.0]\n");
        let s = Scenario::parse(&text, "f.toml").unwrap();
        assert!(s.points().is_err());
    }

    #[test]
    fn invalid_physics_names_the_field() {
        let text = BASE.replace("position = [0, 0, 0]", "position = [0, 0]");
        let err = Scenario::parse(&text, "f.toml").unwrap_err().to_string();
        assert!(err.contains("detectors.0"), "{err}");
        let text = BASE.replace("n = 3", "n = 4");
        assert!(Scenario::parse(&text, "f.toml").unwrap_err().to_string().contains("`n`"));
    }
}
