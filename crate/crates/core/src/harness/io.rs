use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_instance, InitialState, Instance, Microgrid, UnitParams, ValidationErrors};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid instance: {0}")]
    Invalid(#[from] ValidationErrors),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitFile {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub t_on: usize,
    pub t_off: usize,
    #[serde(default)]
    pub init_on: bool,
    /// Hours spent in the initial state; defaults to `t_off`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_duration: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrogridFile {
    pub id: usize,
    pub demand: Vec<f64>,
    pub units: Vec<UnitFile>,
}

/// On-disk instance layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub horizon_t: usize,
    pub microgrids: Vec<MicrogridFile>,
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<Instance, ValidationErrors> {
        let mgs = self
            .microgrids
            .into_iter()
            .map(|mg| Microgrid {
                id: mg.id,
                demand: mg.demand,
                units: mg
                    .units
                    .into_iter()
                    .map(|u| UnitParams {
                        a: u.a,
                        b: u.b,
                        c: u.c,
                        d: u.d,
                        p_min: u.p_min,
                        p_max: u.p_max,
                        t_on: u.t_on,
                        t_off: u.t_off,
                        initial: InitialState {
                            was_on: u.init_on,
                            duration: u.init_duration.unwrap_or(u.t_off),
                        },
                    })
                    .collect(),
            })
            .collect();
        validate_instance(self.horizon_t, mgs)
    }

    pub fn from_instance(inst: &Instance) -> Self {
        Self {
            horizon_t: inst.horizon(),
            microgrids: inst
                .microgrids()
                .iter()
                .map(|mg| MicrogridFile {
                    id: mg.id,
                    demand: mg.demand.clone(),
                    units: mg
                        .units
                        .iter()
                        .map(|u| UnitFile {
                            a: u.a,
                            b: u.b,
                            c: u.c,
                            d: u.d,
                            p_min: u.p_min,
                            p_max: u.p_max,
                            t_on: u.t_on,
                            t_off: u.t_off,
                            init_on: u.initial.was_on,
                            init_duration: Some(u.initial.duration),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

pub fn parse_instance(text: &str) -> Result<Instance, IoError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|source| IoError::Json {
        path: "<input>".into(),
        source,
    })?;
    Ok(file.into_instance()?)
}

pub fn instance_to_json(inst: &Instance) -> String {
    let mut s = serde_json::to_string_pretty(&InstanceFile::from_instance(inst)).expect("instance serializes");
    s.push('\n');
    s
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_instance(path: &Path) -> Result<Instance, IoError> {
    let text = read_text(path)?;
    let file: InstanceFile = serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })?;
    Ok(file.into_instance()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_round_trip() {
        let text = r#"{"horizon_t": 2, "microgrids": [{"id": 4, "demand": [1.0, 2.0],
            "units": [{"a": 0.1, "b": 2, "c": 3, "d": 0, "p_min": 0, "p_max": 5, "t_on": 2, "t_off": 3}]}]}"#;
        let inst = parse_instance(text).unwrap();
        let u = inst.unit(0);
        assert_eq!(u.initial, InitialState { was_on: false, duration: 3 });
        assert_eq!(inst.microgrids()[0].id, 4);
        let again = parse_instance(&instance_to_json(&inst)).unwrap();
        assert_eq!(again, inst);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_data() {
        assert!(parse_instance(r#"{"horizon_t": 1, "microgrids": [], "extra": 1}"#).is_err());
        let bad = r#"{"horizon_t": 1, "microgrids": [{"id": 0, "demand": [1.0],
            "units": [{"a": 0, "b": 1, "c": 0, "d": 0, "p_min": 5, "p_max": 2, "t_on": 1, "t_off": 1}]}]}"#;
        assert!(matches!(parse_instance(bad), Err(IoError::Invalid(_))));
    }
}
