//! Sweep configuration: JSON schema, defaults and validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{build_domain, build_hole, DomainSpec, HoleShape, HoleSpec, Point};
use crate::potential::FieldConfig;
use crate::{Error, Result};

pub const DEFAULT_M: usize = 6;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_SEED: u64 = 20240611;

/// Hole shape and position; the scale comes from the ε list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleTemplate {
    pub shape: HoleShape,
    pub center: Point,
}

impl HoleTemplate {
    pub fn at(&self, epsilon: f64) -> HoleSpec {
        HoleSpec::new(self.shape.clone(), self.center, epsilon)
    }
}

/// The file as written; optional fields get defaults in [`SweepConfig`].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    domain: DomainSpec,
    hole: HoleTemplate,
    epsilons: Vec<f64>,
    #[serde(default)]
    field: FieldConfig,
    h: Option<f64>,
    m: Option<usize>,
    tol: Option<f64>,
    eta: Option<f64>,
    seed: Option<u64>,
    #[serde(default)]
    timing: bool,
}

/// A validated sweep configuration with all defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub domain: DomainSpec,
    pub hole: HoleTemplate,
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    pub field: FieldConfig,
    pub h: f64,
    pub m: usize,
    pub tol: f64,
    /// Matching threshold; `None` means three times the mesh floor.
    pub eta: Option<f64>,
    pub seed: u64,
    /// Record wall-clock times in the CSV (breaks byte-identical reruns).
    pub timing: bool,
}

pub fn load_config(path: &Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("cannot read config {}", path.display()), e))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "config".to_string() } else { path };
        Error::config(field, e.into_inner().to_string())
    })?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<SweepConfig> {
    let domain = build_domain(&raw.domain).map_err(|e| Error::config("domain", e.to_string()))?;
    let eps = &raw.epsilons;
    if eps.is_empty() {
        return Err(Error::config("epsilons", "must list at least one value"));
    }
    if eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::config("epsilons", "values must be positive and finite"));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("epsilons", "must be strictly decreasing"));
    }
    let eps_min = *eps.last().unwrap();
    let h = raw.h.unwrap_or(eps_min / 8.0);
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::config("h", "must be positive"));
    }
    if h > eps_min / 4.0 {
        return Err(Error::config(
            "h",
            format!("{h} does not resolve the smallest epsilon {eps_min} (need h <= epsilon/4)"),
        ));
    }
    let m = raw.m.unwrap_or(DEFAULT_M);
    if m == 0 {
        return Err(Error::config("m", "must be at least 1"));
    }
    let tol = raw.tol.unwrap_or(DEFAULT_TOL);
    if !(tol > 1e-12 && tol < 1e-4) {
        return Err(Error::config("tol", "must lie in (1e-12, 1e-4)"));
    }
    if let Some(eta) = raw.eta {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::config("eta", "must be positive"));
        }
    }
    raw.field.to_model()?;
    for &e in eps {
        let spec = raw.hole.at(e);
        build_hole(&spec).map_err(|err| Error::config("hole.shape", err.to_string()))?;
        if !domain.contains(spec.center) {
            return Err(Error::config("hole.center", "must lie inside the domain"));
        }
        spec.check_clearance(&domain, 2.0)
            .map_err(|err| Error::config("epsilons", format!("at epsilon = {e}: {err}")))?;
    }
    Ok(SweepConfig {
        domain: raw.domain,
        hole: raw.hole,
        epsilons: raw.epsilons,
        field: raw.field,
        h,
        m,
        tol,
        eta: raw.eta,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        timing: raw.timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "domain": {"kind": "rectangle", "min": [0, 0], "max": [1, 1]},
        "hole": {"shape": {"kind": "disk"}, "center": [0.5, 0.5]},
        "epsilons": [0.2, 0.1]
    }"#;

    fn field_of(err: Error) -> String {
        match err {
            Error::Config { field, .. } => field,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn defaults_are_filled() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.h, 0.1 / 8.0);
        assert_eq!(c.m, 6);
        assert_eq!(c.tol, 1e-8);
        assert_eq!(c.eta, None);
        assert_eq!(c.seed, DEFAULT_SEED);
        assert_eq!(c.field.b0, 0.0);
        assert!(!c.timing);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("\"hole\"", "\"holes\"");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("holes"), "{err}");
        let nested = MINIMAL.replace("\"center\"", "\"centre\"");
        assert!(parse_config(&nested).unwrap_err().to_string().contains("centre"));
    }

    #[test]
    fn ordering_and_resolution_rules() {
        let text = MINIMAL.replace("[0.2, 0.1]", "[0.1, 0.2]");
        assert_eq!(field_of(parse_config(&text).unwrap_err()), "epsilons");
        let text = MINIMAL.replace("\"epsilons\"", "\"h\": 0.05, \"epsilons\"");
        assert_eq!(field_of(parse_config(&text).unwrap_err()), "h");
        let text = MINIMAL.replace("[0.2, 0.1]", "[0.3, 0.1]");
        assert_eq!(field_of(parse_config(&text).unwrap_err()), "epsilons");
        let text = MINIMAL.replace("\"epsilons\"", "\"tol\": 0.1, \"epsilons\"");
        assert_eq!(field_of(parse_config(&text).unwrap_err()), "tol");
    }

    #[test]
    fn type_errors_carry_a_path() {
        let text = MINIMAL.replace("[0.5, 0.5]", "\"middle\"");
        assert_eq!(field_of(parse_config(&text).unwrap_err()), "hole.center");
        let text = MINIMAL.replace("\"epsilons\"", "\"field\": {\"b0\": 1, \"gauge\": {\"chi\": \"cosh\", \"amplitude\": 1}}, \"epsilons\"");
        assert_eq!(field_of(parse_config(&text).unwrap_err()), "field.gauge.chi");
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = load_config(Path::new("/nonexistent/sweep.json")).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("/nonexistent/sweep.json"));
    }
}
