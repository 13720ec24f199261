//! TOML run configuration.
//!
//! ```toml
//! [model]
//! p = 2
//! alpha = 2.0
//! sigma = 1.0
//! u0 = 8.0              # scalar, or one value per compartment
//!
//! [solver]
//! rtol = 1e-8
//!
//! [growth]
//! seed = 42
//!
//! [output]
//! formats = ["json", "svg"]
//! ```
//!
//! Every section and key is optional; unknown keys are rejected.

use crate::growth::{GrowthConfig, GrowthError, Model};
use crate::integrator::SolverConfig;
use crate::kinetics::{KineticParams, SpeciesState};
use crate::padic::{is_prime, DEFAULT_SIZE_CAP};
use crate::vladimirov::OperatorRegistry;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid override `{spec}`: {message}")]
    Override { spec: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_string(),
        message: message.into(),
    }
}

/// A per-compartment initial value: one number for all, or one each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialValue {
    Uniform(f64),
    PerBranch(Vec<f64>),
}

impl InitialValue {
    fn expand(&self, n: usize, path: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            InitialValue::Uniform(x) => Ok(vec![*x; n]),
            InitialValue::PerBranch(xs) if xs.len() == n => Ok(xs.clone()),
            InitialValue::PerBranch(xs) => Err(invalid(
                path,
                format!("expected {n} values for {n} compartments, got {}", xs.len()),
            )),
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            InitialValue::Uniform(x) => vec![*x],
            InitialValue::PerBranch(xs) => xs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub p: u64,
    pub alpha: f64,
    pub d: f64,
    pub eta: f64,
    pub beta: f64,
    pub sigma: f64,
    pub kappa_sp: f64,
    pub u0: InitialValue,
    pub v0: InitialValue,
    pub w0: InitialValue,
    pub allow_nonnegative_beta: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let k = KineticParams::default();
        Self {
            p: 2,
            alpha: 2.0,
            d: k.d,
            eta: k.eta,
            beta: k.beta,
            sigma: k.sigma,
            kappa_sp: k.kappa_sp,
            u0: InitialValue::Uniform(8.0),
            v0: InitialValue::Uniform(10.0),
            w0: InitialValue::Uniform(0.0),
            allow_nonnegative_beta: false,
        }
    }
}

impl ModelSection {
    pub fn kinetics(&self) -> KineticParams {
        KineticParams {
            d: self.d,
            eta: self.eta,
            beta: self.beta,
            sigma: self.sigma,
            kappa_sp: self.kappa_sp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    pub event_tol: f64,
    /// end time for `react` and `simulate`
    pub t_end: f64,
    /// diffusion operator strategy name
    pub operator: String,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            rtol: s.rtol,
            atol: s.atol,
            h_init: s.h_init,
            h_min: s.h_min,
            h_max: s.h_max,
            max_steps: s.max_steps,
            event_tol: s.event_tol,
            t_end: 100.0,
            operator: "auto".to_string(),
        }
    }
}

impl SolverSection {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            rtol: self.rtol,
            atol: self.atol,
            h_init: self.h_init,
            h_min: self.h_min,
            h_max: self.h_max,
            max_steps: self.max_steps,
            event_tol: self.event_tol,
        }
    }
}

pub type GrowthSection = GrowthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    pub formats: Vec<String>,
    /// fan angle in degrees
    pub svg_angle: f64,
    /// drawing units per time unit; fitted to the canvas when absent
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg_length_scale: Option<f64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: None,
            formats: vec!["json".into(), "svg".into()],
            svg_angle: 25.0,
            svg_length_scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub solver: SolverSection,
    pub growth: GrowthSection,
    pub output: OutputSection,
}

pub const KNOWN_FORMATS: [&str; 4] = ["csv", "json", "svg", "lsys"];

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if !is_prime(m.p) {
            return Err(invalid("model.p", format!("p must be prime, got {}", m.p)));
        }
        if !(m.alpha > 0.0 && m.alpha.is_finite()) {
            return Err(invalid(
                "model.alpha",
                format!("alpha must be positive, got {}", m.alpha),
            ));
        }
        m.kinetics().validate(m.allow_nonnegative_beta).map_err(|e| match e {
            crate::kinetics::KineticsError::Invalid {
                field,
                requirement,
                value,
            } => invalid(
                &format!("model.{field}"),
                format!("{field} must be {requirement}, got {value}"),
            ),
        })?;
        for (name, value) in [("u0", &m.u0), ("v0", &m.v0), ("w0", &m.w0)] {
            if value.values().iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(invalid(
                    &format!("model.{name}"),
                    format!("{name} must be non-negative"),
                ));
            }
        }

        self.solver()
            .validate()
            .map_err(|e| invalid(&format!("solver.{}", e.field), e.message))?;
        let s = &self.solver;
        if !(s.t_end > 0.0 && s.t_end.is_finite()) {
            return Err(invalid("solver.t_end", "t_end must be positive"));
        }
        let registry = OperatorRegistry::default();
        if !registry.contains(&s.operator) {
            return Err(invalid(
                "solver.operator",
                format!(
                    "unknown operator `{}`, expected one of {:?}",
                    s.operator,
                    registry.names()
                ),
            ));
        }

        self.growth.validate().map_err(|e| match e {
            GrowthError::Config { field, message } => invalid(&format!("growth.{field}"), message),
            other => invalid("growth", other.to_string()),
        })?;
        let size = (m.p as f64).powi(self.growth.m_max as i32);
        if size > DEFAULT_SIZE_CAP as f64 {
            return Err(invalid(
                "growth.m_max",
                format!("p^m_max = {size} exceeds the compartment cap {DEFAULT_SIZE_CAP}"),
            ));
        }

        let o = &self.output;
        for f in &o.formats {
            if !KNOWN_FORMATS.contains(&f.as_str()) {
                return Err(invalid(
                    "output.formats",
                    format!("unknown format `{f}`, expected one of {KNOWN_FORMATS:?}"),
                ));
            }
        }
        if !o.svg_angle.is_finite() {
            return Err(invalid("output.svg_angle", "svg_angle must be finite"));
        }
        if let Some(scale) = o.svg_length_scale {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(invalid("output.svg_length_scale", "svg_length_scale must be positive"));
            }
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverConfig {
        self.solver.solver()
    }

    pub fn model(&self) -> Model {
        Model {
            p: self.model.p,
            alpha: self.model.alpha,
            operator: self.solver.operator.clone(),
            kinetics: self.model.kinetics(),
            solver: self.solver(),
        }
    }

    /// Initial states for `n` compartments.
    pub fn initial_states(&self, n: usize) -> Result<Vec<SpeciesState>, ConfigError> {
        let u = self.model.u0.expand(n, "model.u0")?;
        let v = self.model.v0.expand(n, "model.v0")?;
        let w = self.model.w0.expand(n, "model.w0")?;
        Ok((0..n).map(|i| SpeciesState::new(u[i], v[i], w[i])).collect())
    }

    /// True when the run leaves the physical parameter regime.
    pub fn out_of_regime(&self) -> bool {
        self.model.beta >= 0.0
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let (line, column) = e.span().map_or((1, 1), |s| position(text, s.start));
    ConfigError::Parse {
        line,
        column,
        message: e.message().to_string(),
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, &[])
}

/// Like [`parse_config`], applying `key.path=value` overrides first.
/// Values are read as TOML literals, falling back to plain strings.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = if overrides.is_empty() {
        toml::from_str(text).map_err(|e| parse_error(text, &e))?
    } else {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
        for spec in overrides {
            apply_override(&mut table, spec)?;
        }
        let merged = toml::to_string(&table).expect("table serializes");
        toml::from_str(&merged).map_err(|e| ConfigError::Override {
            spec: overrides.join(" "),
            message: e.message().to_string(),
        })?
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let err = |message: &str| ConfigError::Override {
        spec: spec.to_string(),
        message: message.to_string(),
    };
    let (key, raw) = spec.split_once('=').ok_or_else(|| err("expected key=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(err("empty key segment"));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for part in parents {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| err(&format!("`{part}` is not a section")))?;
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_reference_parameters() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!((cfg.model.p, cfg.model.alpha, cfg.model.d), (2, 2.0, 0.1));
        assert_eq!((cfg.model.sigma, cfg.model.eta, cfg.model.beta), (1.0, 1.0, -0.2));
    }

    #[test]
    fn positive_beta_is_rejected_with_path() {
        let err = parse_config("[model]\nbeta = 0.2\n").unwrap_err();
        let ConfigError::Invalid { path, message } = &err else {
            panic!("{err:?}")
        };
        assert_eq!(path, "model.beta");
        assert!(message.contains("beta must be negative"), "{message}");
        let ok = parse_config("[model]\nbeta = 0.2\nallow_nonnegative_beta = true\n").unwrap();
        assert!(ok.out_of_regime());
    }

    #[test]
    fn single_field_override() {
        let cfg = parse_config_with("", &["model.sigma=0.5".to_string()]).unwrap();
        let mut want = RunConfig::default();
        want.model.sigma = 0.5;
        assert_eq!(cfg, want);
        assert_eq!(cfg, parse_config("[model]\nsigma = 0.5").unwrap());
    }

    #[test]
    fn overrides_take_precedence_over_the_file() {
        let text = "[growth]\nseed = 3\nm_max = 2\n";
        let cfg = parse_config_with(text, &["growth.seed=9".into(), "output.formats=[\"lsys\"]".into()]).unwrap();
        assert_eq!((cfg.growth.seed, cfg.growth.m_max), (9, 2));
        assert_eq!(cfg.output.formats, vec!["lsys"]);
        let cfg = parse_config_with("", &["solver.operator=dense".into()]).unwrap();
        assert_eq!(cfg.solver.operator, "dense");
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(matches!(
            parse_config("[model]\ngamma = 1\n"),
            Err(ConfigError::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_config("[extra]\n"), Err(ConfigError::Parse { .. })));
        assert!(matches!(
            parse_config_with("", &["model.gamma=1".into()]),
            Err(ConfigError::Override { .. })
        ));
        assert!(matches!(
            parse_config_with("", &["nonsense".into()]),
            Err(ConfigError::Override { .. })
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_config("[model]\np = 2\nalpha = = 3\n").unwrap_err();
        let ConfigError::Parse { line, column, .. } = err else {
            panic!("{err:?}")
        };
        assert_eq!(line, 3);
        assert!(column > 1);
    }

    #[test]
    fn validation_paths() {
        let cases = [
            ("[model]\np = 4", "model.p"),
            ("[model]\nalpha = 0.0", "model.alpha"),
            ("[model]\nd = -1.0", "model.d"),
            ("[model]\nu0 = [1.0, -2.0]", "model.u0"),
            ("[solver]\nrtol = 0.0", "solver.rtol"),
            ("[solver]\nh_init = 5.0", "solver.h_max"),
            ("[solver]\noperator = \"magic\"", "solver.operator"),
            ("[growth]\ntheta_delta = 0.7", "growth.theta_delta"),
            ("[growth]\nm_max = 40", "growth.m_max"),
            ("[output]\nformats = [\"png\"]", "output.formats"),
        ];
        for (text, want) in cases {
            match parse_config(text) {
                Err(ConfigError::Invalid { path, .. }) => assert_eq!(path, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn per_branch_initial_values() {
        let cfg = parse_config("[model]\nu0 = [10.0, 15.0]\nv0 = [8.0, 13.0]\n").unwrap();
        let s = cfg.initial_states(2).unwrap();
        assert_eq!(s[1], SpeciesState::new(15.0, 13.0, 0.0));
        assert!(matches!(cfg.initial_states(4), Err(ConfigError::Invalid { .. })));
        assert_eq!(RunConfig::default().initial_states(3).unwrap().len(), 3);
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.model.sigma = 0.1 + 0.2;
        cfg.model.u0 = InitialValue::PerBranch(vec![1.0 / 3.0, 2.5]);
        cfg.growth.seed = u32::MAX as u64 + 7;
        cfg.output.directory = Some("runs/a".into());
        cfg.output.svg_length_scale = Some(12.5);
        cfg.solver.rtol = 1e-11;
        let text = cfg.to_toml();
        assert_eq!(parse_config(&text).unwrap(), cfg);
        assert_eq!(
            parse_config(&RunConfig::default().to_toml()).unwrap(),
            RunConfig::default()
        );
    }
}
