//! Scenario files: flat `[section]` / `key = value` text.
//!
//! ```text
//! [scenario]
//! model = cir
//!
//! [sis]
//! gamma = 0.1
//! x0 = 0.3
//!
//! [cir]
//! a = 0.02
//! b = 0.2
//! sigma = 0.032
//! y0 = 0.2
//! ```
//!
//! Lines starting with `#` or `;` are comments. Section and key names are
//! case-sensitive. A `[meta]` section is accepted and ignored, so metadata
//! written next to run outputs can be fed back in unchanged.

use std::fmt;
use std::path::PathBuf;

use crate::corrections::{CorrectionConfig, DerivativeScope, GrayWeight};
use crate::diffusions::{CirParams, CoefficientPair, GrayParams, LogisticParams, NaturalModel};
use crate::sis::SisParams;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    /// Malformed text; positions are 1-based.
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    /// Well-formed text with a missing or bad field (`section` or
    /// `section.key`).
    Invalid { field: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Parse {
                line,
                column,
                message,
            } => write!(f, "parse error at line {line}, column {column}: {message}"),
            Self::Invalid { field, message } => write!(f, "invalid `{field}`: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// A parsed document: sections in file order, keys in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ini {
    sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Section {
    name: String,
    entries: Vec<(String, String)>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut ini = Ini::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let indent = raw.len() - raw.trim_start().len();
            let body = raw.trim();
            let err = |column: usize, message: String| ConfigError::Parse {
                line,
                column,
                message,
            };
            if body.is_empty() || body.starts_with('#') || body.starts_with(';') {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let Some(close) = rest.find(']') else {
                    return Err(err(
                        indent + body.chars().count() + 1,
                        "expected `]`".into(),
                    ));
                };
                let name = rest[..close].trim();
                if !valid_name(name) {
                    return Err(err(indent + 2, format!("bad section name `{name}`")));
                }
                let trailing = rest[close + 1..].trim();
                if !trailing.is_empty() {
                    let col = indent + 1 + rest[..close + 1].chars().count() + 1;
                    return Err(err(
                        col,
                        format!("unexpected `{trailing}` after section header"),
                    ));
                }
                if ini.sections.iter().any(|s| s.name == name) {
                    return Err(err(indent + 2, format!("duplicate section `{name}`")));
                }
                ini.sections.push(Section {
                    name: name.to_string(),
                    entries: Vec::new(),
                });
                continue;
            }
            let Some(eq) = body.find('=') else {
                return Err(err(
                    indent + 1,
                    "expected `key = value` or `[section]`".into(),
                ));
            };
            let key = body[..eq].trim();
            if !valid_name(key) {
                return Err(err(indent + 1, format!("bad key `{key}`")));
            }
            let value = body[eq + 1..].trim();
            let Some(section) = ini.sections.last_mut() else {
                return Err(err(indent + 1, format!("key `{key}` outside any section")));
            };
            if section.entries.iter().any(|(k, _)| k == key) {
                return Err(err(
                    indent + 1,
                    format!("duplicate key `{key}` in [{}]", section.name),
                ));
            }
            section.entries.push((key.to_string(), value.to_string()));
        }
        Ok(ini)
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.iter().any(|s| s.name == name)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|s| s.name == section)?
            .entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|s| s.name.as_str())
    }

    pub fn keys<'a>(&'a self, section: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.sections
            .iter()
            .filter(move |s| s.name == section)
            .flat_map(|s| s.entries.iter().map(|(k, _)| k.as_str()))
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        let value = value.into();
        let idx = match self.sections.iter().position(|s| s.name == section) {
            Some(i) => i,
            None => {
                self.sections.push(Section {
                    name: section.to_string(),
                    entries: Vec::new(),
                });
                self.sections.len() - 1
            }
        };
        let entries = &mut self.sections[idx].entries;
        match entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => entries.push((key.to_string(), value)),
        }
    }
}

impl fmt::Display for Ini {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            writeln!(f, "[{}]", s.name)?;
            for (k, v) in &s.entries {
                writeln!(f, "{k} = {v}")?;
            }
        }
        Ok(())
    }
}

/// The perturbation driving transmission.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Cir(CirParams),
    Logistic(LogisticParams),
    /// Additive noise of amplitude `sigma` around a constant `beta`.
    Gray {
        beta: f64,
        sigma: f64,
    },
    /// Polynomial unscaled coefficients `ã(y) = Σ drift[k] yᵏ` and
    /// `b̃(y)² = Σ diffusion_sq[k] yᵏ`; the process uses `c·ã` and `√c·b̃`.
    Generic {
        drift: Vec<f64>,
        diffusion_sq: Vec<f64>,
        y0: f64,
    },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Cir(_) => "cir",
            Self::Logistic(_) => "logistic",
            Self::Gray { .. } => "gray",
            Self::Generic { .. } => "generic",
        }
    }

    pub fn natural(&self) -> Option<NaturalModel> {
        match self {
            Self::Cir(p) => Some(NaturalModel::Cir(*p)),
            Self::Logistic(p) => Some(NaturalModel::Logistic(*p)),
            _ => None,
        }
    }

    /// Scaled coefficient pair of a natural or generic model.
    pub fn coefficient_pair(&self, scale_c: f64) -> crate::Result<Option<CoefficientPair>> {
        match self {
            Self::Cir(_) | Self::Logistic(_) => {
                Ok(Some(self.natural().unwrap().coefficient_pair(scale_c)?))
            }
            Self::Generic {
                drift,
                diffusion_sq,
                ..
            } => Ok(Some(CoefficientPair::polynomial(
                drift.clone(),
                diffusion_sq.clone(),
                scale_c,
            )?)),
            Self::Gray { .. } => Ok(None),
        }
    }

    /// Initial value of the perturbation (`β` for the additive model).
    pub fn y0(&self) -> f64 {
        match self {
            Self::Cir(p) => p.y0,
            Self::Logistic(p) => p.y0,
            Self::Gray { beta, .. } => *beta,
            Self::Generic { y0, .. } => *y0,
        }
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub model: ModelSpec,
    pub gamma: f64,
    pub x0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    /// Noise scale used to split effective coefficients into `c·ã`, `√c·b̃`.
    pub scale_c: f64,
    pub corrections: CorrectionConfig,
    /// Number of evenly spaced output times, endpoints included.
    pub output_nodes: usize,
    pub out_dir: Option<PathBuf>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("scenario", &["name", "model"]),
    ("sis", &["beta", "gamma", "x0"]),
    ("cir", &["a", "b", "sigma", "y0"]),
    ("logistic", &["a", "b", "sigma", "y0"]),
    ("gray", &["sigma"]),
    ("generic", &["drift", "diffusion_sq", "y0"]),
    ("grid", &["t_end", "dt", "output_nodes"]),
    ("ensemble", &["paths", "seed"]),
    (
        "corrections",
        &[
            "c",
            "panels",
            "nodes_per_panel",
            "fd_step_y",
            "fd_step_x",
            "max_order",
            "richardson",
            "scope",
            "gray_weight",
        ],
    ),
    ("output", &["dir"]),
];

/// Section written by runs and skipped by the parser.
pub const META_SECTION: &str = "meta";

struct Reader<'a> {
    ini: &'a Ini,
}

impl Reader<'_> {
    fn raw(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        if !self.ini.has_section(section) {
            return Err(invalid(section, "section is missing"));
        }
        self.ini
            .get(section, key)
            .ok_or_else(|| invalid(format!("{section}.{key}"), "key is missing"))
    }

    fn f64(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        let raw = self.raw(section, key)?;
        let v: f64 = raw.parse().map_err(|_| {
            invalid(
                format!("{section}.{key}"),
                format!("`{raw}` is not a number"),
            )
        })?;
        if !v.is_finite() {
            return Err(invalid(format!("{section}.{key}"), "must be finite"));
        }
        Ok(v)
    }

    fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        if self.ini.get(section, key).is_some() {
            self.f64(section, key)
        } else {
            Ok(default)
        }
    }

    fn uint<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T, ConfigError> {
        let raw = self.raw(section, key)?;
        raw.parse().map_err(|_| {
            invalid(
                format!("{section}.{key}"),
                format!("`{raw}` is not a nonnegative integer"),
            )
        })
    }

    fn uint_or<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
        default: T,
    ) -> Result<T, ConfigError> {
        if self.ini.get(section, key).is_some() {
            self.uint(section, key)
        } else {
            Ok(default)
        }
    }

    fn list(&self, section: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.raw(section, key)?;
        let field = format!("{section}.{key}");
        if raw.is_empty() {
            return Err(invalid(field, "needs at least one coefficient"));
        }
        raw.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| invalid(field.clone(), format!("`{s}` is not a finite number")))
            })
            .collect()
    }
}

fn model_error(section: &str, e: crate::Error) -> ConfigError {
    let field = match &e {
        crate::Error::InvalidParameter { name, .. } | crate::Error::Domain { name, .. } => {
            let key = name.rsplit('.').next().unwrap_or(name);
            format!("{section}.{key}")
        }
        _ => section.to_string(),
    };
    invalid(field, e.to_string())
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_ini(&Ini::parse(text)?)
    }

    pub fn from_ini(ini: &Ini) -> Result<Self, ConfigError> {
        for section in ini.section_names() {
            if section == META_SECTION {
                continue;
            }
            let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| *s == section) else {
                return Err(invalid(section, "unknown section"));
            };
            for key in ini.keys(section) {
                if !keys.contains(&key) {
                    return Err(invalid(format!("{section}.{key}"), "unknown key"));
                }
            }
        }
        let r = Reader { ini };
        let model_name = r.raw("scenario", "model")?;
        let name = ini.get("scenario", "name").unwrap_or("").to_string();
        let gamma = r.f64("sis", "gamma")?;
        let x0 = r.f64("sis", "x0")?;
        let scale_c = r.f64_or("corrections", "c", 0.1)?;

        let model = match model_name {
            "cir" => {
                let p = CirParams {
                    a: r.f64("cir", "a")?,
                    b: r.f64("cir", "b")?,
                    sigma: r.f64("cir", "sigma")?,
                    y0: r.f64("cir", "y0")?,
                };
                p.validate().map_err(|e| model_error("cir", e))?;
                ModelSpec::Cir(p)
            }
            "logistic" => {
                let p = LogisticParams {
                    a: r.f64("logistic", "a")?,
                    b: r.f64("logistic", "b")?,
                    sigma: r.f64("logistic", "sigma")?,
                    y0: r.f64("logistic", "y0")?,
                };
                p.validate().map_err(|e| model_error("logistic", e))?;
                ModelSpec::Logistic(p)
            }
            "gray" => {
                let beta = r.f64("sis", "beta")?;
                let sigma = r.f64("gray", "sigma")?;
                GrayParams::from_sigma(beta, gamma, sigma, scale_c)
                    .map_err(|e| model_error("gray", e))?;
                ModelSpec::Gray { beta, sigma }
            }
            "generic" => {
                let drift = r.list("generic", "drift")?;
                let diffusion_sq = r.list("generic", "diffusion_sq")?;
                let y0 = r.f64("generic", "y0")?;
                if y0 < 0.0 {
                    return Err(invalid("generic.y0", "must be nonnegative"));
                }
                CoefficientPair::polynomial(drift.clone(), diffusion_sq.clone(), scale_c.max(0.0))
                    .map_err(|e| model_error("generic", e))?;
                ModelSpec::Generic {
                    drift,
                    diffusion_sq,
                    y0,
                }
            }
            other => {
                return Err(invalid(
                    "scenario.model",
                    format!("`{other}` is not one of cir, logistic, gray, generic"),
                ))
            }
        };
        if model_name != "gray" && ini.get("sis", "beta").is_some() {
            return Err(invalid(
                "sis.beta",
                "only used by the gray model; transmission is the perturbation itself",
            ));
        }

        let sis_beta = if let ModelSpec::Gray { beta, .. } = model {
            beta
        } else {
            0.0
        };
        SisParams::new(sis_beta, gamma, x0).map_err(|e| model_error("sis", e))?;

        let t_end = r.f64("grid", "t_end")?;
        let dt = r.f64("grid", "dt")?;
        if t_end <= 0.0 {
            return Err(invalid("grid.t_end", "must be positive"));
        }
        if !(dt > 0.0 && dt <= t_end) {
            return Err(invalid("grid.dt", "must be positive and at most t_end"));
        }
        let steps = t_end / dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(invalid(
                "grid.dt",
                "must divide t_end into a whole number of steps",
            ));
        }
        let output_nodes: usize = r.uint_or("grid", "output_nodes", 51)?;
        if output_nodes < 2 {
            return Err(invalid("grid.output_nodes", "must be at least 2"));
        }
        if output_nodes - 1 > steps.round() as usize {
            return Err(invalid(
                "grid.output_nodes",
                "exceeds the number of grid steps + 1",
            ));
        }

        let paths: usize = r.uint("ensemble", "paths")?;
        if paths == 0 {
            return Err(invalid("ensemble.paths", "must be at least 1"));
        }
        let seed: u64 = r.uint("ensemble", "seed")?;

        if !(0.0..1.0).contains(&scale_c) {
            return Err(invalid("corrections.c", "must lie in [0, 1)"));
        }
        let d = CorrectionConfig::default();
        let richardson = match ini.get("corrections", "richardson") {
            None => d.richardson,
            Some("true") => true,
            Some("false") => false,
            Some(v) => {
                return Err(invalid(
                    "corrections.richardson",
                    format!("`{v}` is not true or false"),
                ))
            }
        };
        let scope = match ini.get("corrections", "scope") {
            None => d.scope,
            Some(v) => DerivativeScope::parse(v).ok_or_else(|| {
                invalid("corrections.scope", format!("`{v}` is not state or total"))
            })?,
        };
        let gray_weight = match ini.get("corrections", "gray_weight") {
            None => d.gray_weight,
            Some(v) => GrayWeight::parse(v).ok_or_else(|| {
                invalid(
                    "corrections.gray_weight",
                    format!("`{v}` is not generator, linear or unweighted"),
                )
            })?,
        };
        let corrections = CorrectionConfig {
            panels: r.uint_or("corrections", "panels", d.panels)?,
            nodes_per_panel: r.uint_or("corrections", "nodes_per_panel", d.nodes_per_panel)?,
            fd_step_y: r.f64_or("corrections", "fd_step_y", d.fd_step_y)?,
            fd_step_x: r.f64_or("corrections", "fd_step_x", d.fd_step_x)?,
            max_order: r.uint_or("corrections", "max_order", d.max_order)?,
            richardson,
            scope,
            gray_weight,
        };
        corrections
            .validate()
            .map_err(|e| model_error("corrections", e))?;

        let out_dir = ini.get("output", "dir").map(PathBuf::from);

        Ok(Self {
            name,
            model,
            gamma,
            x0,
            t_end,
            dt,
            paths,
            seed,
            scale_c,
            corrections,
            output_nodes,
            out_dir,
        })
    }

    /// Full resolved parameter set; parses back to an equal scenario.
    pub fn to_ini(&self) -> Ini {
        let mut ini = Ini::default();
        if !self.name.is_empty() {
            ini.set("scenario", "name", &self.name);
        }
        ini.set("scenario", "model", self.model.name());
        if let ModelSpec::Gray { beta, .. } = self.model {
            ini.set("sis", "beta", beta.to_string());
        }
        ini.set("sis", "gamma", self.gamma.to_string());
        ini.set("sis", "x0", self.x0.to_string());
        match &self.model {
            ModelSpec::Cir(p) => {
                ini.set("cir", "a", p.a.to_string());
                ini.set("cir", "b", p.b.to_string());
                ini.set("cir", "sigma", p.sigma.to_string());
                ini.set("cir", "y0", p.y0.to_string());
            }
            ModelSpec::Logistic(p) => {
                ini.set("logistic", "a", p.a.to_string());
                ini.set("logistic", "b", p.b.to_string());
                ini.set("logistic", "sigma", p.sigma.to_string());
                ini.set("logistic", "y0", p.y0.to_string());
            }
            ModelSpec::Gray { sigma, .. } => ini.set("gray", "sigma", sigma.to_string()),
            ModelSpec::Generic {
                drift,
                diffusion_sq,
                y0,
            } => {
                let join = |v: &[f64]| {
                    v.iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                ini.set("generic", "drift", join(drift));
                ini.set("generic", "diffusion_sq", join(diffusion_sq));
                ini.set("generic", "y0", y0.to_string());
            }
        }
        ini.set("grid", "t_end", self.t_end.to_string());
        ini.set("grid", "dt", self.dt.to_string());
        ini.set("grid", "output_nodes", self.output_nodes.to_string());
        ini.set("ensemble", "paths", self.paths.to_string());
        ini.set("ensemble", "seed", self.seed.to_string());
        let c = &self.corrections;
        ini.set("corrections", "c", self.scale_c.to_string());
        ini.set("corrections", "panels", c.panels.to_string());
        ini.set(
            "corrections",
            "nodes_per_panel",
            c.nodes_per_panel.to_string(),
        );
        ini.set("corrections", "fd_step_y", c.fd_step_y.to_string());
        ini.set("corrections", "fd_step_x", c.fd_step_x.to_string());
        ini.set("corrections", "max_order", c.max_order.to_string());
        ini.set("corrections", "richardson", c.richardson.to_string());
        ini.set("corrections", "scope", c.scope.as_str());
        ini.set("corrections", "gray_weight", c.gray_weight.as_str());
        if let Some(dir) = &self.out_dir {
            ini.set("output", "dir", dir.display().to_string());
        }
        ini
    }

    pub fn sis(&self) -> SisParams {
        SisParams {
            beta: match self.model {
                ModelSpec::Gray { beta, .. } => beta,
                _ => self.model.y0(),
            },
            gamma: self.gamma,
            x0: self.x0,
        }
    }

    pub fn gray_params(&self) -> Option<GrayParams> {
        match self.model {
            ModelSpec::Gray { beta, sigma } => {
                GrayParams::from_sigma(beta, self.gamma, sigma, self.scale_c).ok()
            }
            _ => None,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Grid indices of the output times.
    pub fn output_indices(&self) -> Vec<usize> {
        let n = self.n_steps();
        let m = self.output_nodes - 1;
        (0..=m).map(|k| (k * n + m / 2) / m).collect()
    }
}
