//! Sectioned key-value scenario files.
//!
//! ```text
//! # comment
//! [plant]
//! kind = mass_spring
//! alpha = 20          # trailing comments are allowed
//! [gains]
//! C = 3
//! A = 0.3
//! ```
//!
//! Vectors are comma-separated. Coordinates in `objective.coordinates` are
//! 1-based. In strict mode (the default, see [`strict_from_env`]) unknown
//! sections and keys are errors; otherwise they are logged and ignored.

use std::path::PathBuf;

use thiserror::Error;

use crate::baselines::{LieBracketBaselineParams, TwoDitherBaselineParams};
use crate::benchmarks::{Damping, FlappingParams, MassSpringParams, PendulumParams};
use crate::error::EscError;
use crate::gains::EscGains;
use crate::scenario::{
    ControllerSpec, IntegrationSpec, ObjectiveSpec, OutputSpec, PlantSpec, Scenario, StepSpec,
};
use crate::state::StateVector;

/// Environment variable toggling strict parsing (`0` disables).
pub const STRICT_ENV: &str = "VIBRESC_STRICT";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("missing section [{0}]")]
    MissingSection(String),
    #[error("missing key `{section}.{key}`")]
    MissingKey { section: String, key: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { section: String, line: usize },
    #[error("line {line}: unknown key `{section}.{key}`")]
    UnknownKey {
        section: String,
        key: String,
        line: usize,
    },
    #[error("line {line}: section [{section}] does not belong to controller `{controller}`")]
    InactiveBlock {
        section: String,
        controller: String,
        line: usize,
    },
    #[error("line {line}: duplicate key `{section}.{key}`")]
    DuplicateKey {
        section: String,
        key: String,
        line: usize,
    },
    #[error("line {line}, column {column}: invalid value for `{section}.{key}`: {message}")]
    InvalidValue {
        section: String,
        key: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid override `{0}`: expected --section.key=value")]
    BadOverride(String),
    #[error("{0}")]
    Semantic(#[from] EscError),
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

/// `VIBRESC_STRICT=0` turns strict mode off; anything else (or unset) keeps
/// it on.
pub fn strict_from_env() -> bool {
    std::env::var(STRICT_ENV).map_or(true, |v| v.trim() != "0")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    /// 1-based; 0 for command-line overrides.
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

/// Raw parsed document, before interpretation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub sections: Vec<Section>,
}

impl Document {
    pub fn parse(text: &str) -> ConfigResult<Self> {
        let mut doc = Document::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = strip_comment(raw);
            let trimmed = content.trim();
            if trimmed.is_empty() {
                continue;
            }
            let indent = content.len() - content.trim_start().len();
            if let Some(rest) = trimmed.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(ConfigError::Syntax {
                        line,
                        column: indent + trimmed.len() + 1,
                        message: "expected `]` to close section header".into(),
                    });
                };
                let name = name.trim();
                if !is_identifier(name) {
                    return Err(ConfigError::Syntax {
                        line,
                        column: indent + 2,
                        message: format!("invalid section name `{name}`"),
                    });
                }
                if doc.section(name).is_some() {
                    return Err(ConfigError::Syntax {
                        line,
                        column: indent + 1,
                        message: format!("section [{name}] appears twice"),
                    });
                }
                doc.sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let Some(eq) = content.find('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    column: indent + 1,
                    message: "expected `key = value` or `[section]`".into(),
                });
            };
            let key = content[..eq].trim();
            if !is_identifier(key) {
                return Err(ConfigError::Syntax {
                    line,
                    column: indent + 1,
                    message: format!("invalid key `{key}`"),
                });
            }
            let after = &content[eq + 1..];
            let value = after.trim();
            let column = eq + 2 + (after.len() - after.trim_start().len());
            let Some(section) = doc.sections.last_mut() else {
                return Err(ConfigError::Syntax {
                    line,
                    column: indent + 1,
                    message: "key outside of any section".into(),
                });
            };
            if section.entries.iter().any(|e| e.key == key) {
                return Err(ConfigError::DuplicateKey {
                    section: section.name.clone(),
                    key: key.to_string(),
                    line,
                });
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
                column,
            });
        }
        Ok(doc)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Sets `section.key = value`, creating the section if needed.
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        let idx = match self.sections.iter().position(|s| s.name == section) {
            Some(i) => i,
            None => {
                self.sections.push(Section {
                    name: section.to_string(),
                    line: 0,
                    entries: Vec::new(),
                });
                self.sections.len() - 1
            }
        };
        let sec = &mut self.sections[idx];
        match sec.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => {
                e.value = value.to_string();
                e.line = 0;
                e.column = 0;
            }
            None => sec.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line: 0,
                column: 0,
            }),
        }
    }

    pub fn remove(&mut self, section: &str, key: &str) {
        if let Some(sec) = self.sections.iter_mut().find(|s| s.name == section) {
            sec.entries.retain(|e| e.key != key);
        }
    }

    /// Applies `section.key=value` overrides (a leading `--` is accepted).
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> ConfigResult<()> {
        for raw in overrides {
            let raw = raw.as_ref();
            let body = raw.strip_prefix("--").unwrap_or(raw);
            let (path, value) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::BadOverride(raw.to_string()))?;
            let (section, key) = path
                .split_once('.')
                .filter(|(s, k)| is_identifier(s) && is_identifier(k))
                .ok_or_else(|| ConfigError::BadOverride(raw.to_string()))?;
            // dt and steps_per_period are alternatives; the override wins
            match (section, key) {
                ("integration", "dt") => self.remove("integration", "steps_per_period"),
                ("integration", "steps_per_period") => self.remove("integration", "dt"),
                _ => {}
            }
            self.set(section, key, value.trim());
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Tracks which keys of a section were read, for strict-mode checks.
struct Reader<'a> {
    section: &'a Section,
    used: Vec<bool>,
}

impl<'a> Reader<'a> {
    fn new(section: &'a Section) -> Self {
        Self {
            section,
            used: vec![false; section.entries.len()],
        }
    }

    fn entry(&mut self, key: &str) -> Option<&'a Entry> {
        let i = self.section.entries.iter().position(|e| e.key == key)?;
        self.used[i] = true;
        Some(&self.section.entries[i])
    }

    fn invalid(&self, e: &Entry, message: impl Into<String>) -> ConfigError {
        ConfigError::InvalidValue {
            section: self.section.name.clone(),
            key: e.key.clone(),
            line: e.line,
            column: e.column,
            message: message.into(),
        }
    }

    fn missing(&self, key: &str) -> ConfigError {
        ConfigError::MissingKey {
            section: self.section.name.clone(),
            key: key.to_string(),
        }
    }

    fn string(&mut self, key: &str) -> ConfigResult<Option<String>> {
        Ok(self.entry(key).map(|e| e.value.clone()))
    }

    fn req_string(&mut self, key: &str) -> ConfigResult<String> {
        self.string(key)?.ok_or_else(|| self.missing(key))
    }

    fn f64(&mut self, key: &str) -> ConfigResult<Option<f64>> {
        let Some(e) = self.entry(key) else {
            return Ok(None);
        };
        parse_f64(&e.value)
            .map(Some)
            .map_err(|m| self.invalid(e, m))
    }

    fn req_f64(&mut self, key: &str) -> ConfigResult<f64> {
        self.f64(key)?.ok_or_else(|| self.missing(key))
    }

    fn f64_or(&mut self, key: &str, default: f64) -> ConfigResult<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn vec(&mut self, key: &str) -> ConfigResult<Option<Vec<f64>>> {
        let Some(e) = self.entry(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|p| parse_f64(p.trim()))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
            .map_err(|m| self.invalid(e, m))
    }

    fn req_vec(&mut self, key: &str) -> ConfigResult<Vec<f64>> {
        self.vec(key)?.ok_or_else(|| self.missing(key))
    }

    fn usize(&mut self, key: &str) -> ConfigResult<Option<usize>> {
        let Some(e) = self.entry(key) else {
            return Ok(None);
        };
        e.value.parse::<usize>().map(Some).map_err(|_| {
            self.invalid(
                e,
                format!("expected a non-negative integer, got `{}`", e.value),
            )
        })
    }

    fn bool(&mut self, key: &str) -> ConfigResult<Option<bool>> {
        let Some(e) = self.entry(key) else {
            return Ok(None);
        };
        match e.value.as_str() {
            "true" | "1" | "yes" => Ok(Some(true)),
            "false" | "0" | "no" => Ok(Some(false)),
            other => Err(self.invalid(e, format!("expected true or false, got `{other}`"))),
        }
    }

    fn finish(self, strict: bool) -> ConfigResult<()> {
        for (e, used) in self.section.entries.iter().zip(&self.used) {
            if !used {
                let err = ConfigError::UnknownKey {
                    section: self.section.name.clone(),
                    key: e.key.clone(),
                    line: e.line,
                };
                if strict {
                    return Err(err);
                }
                log::warn!("{err} (ignored)");
            }
        }
        Ok(())
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(format!("`{s}` is not finite")),
        Err(_) => Err(format!("expected a number, got `{s}`")),
    }
}

const SECTIONS: [&str; 10] = [
    "scenario",
    "plant",
    "objective",
    "controller",
    "gains",
    "lie_bracket_baseline",
    "two_dither_baseline",
    "integration",
    "initial_state",
    "outputs",
];

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str, strict: bool) -> ConfigResult<Scenario> {
    scenario_from_document(&Document::parse(text)?, strict)
}

/// Parses a document, applies overrides, then interprets it.
pub fn parse_scenario_with_overrides<S: AsRef<str>>(
    text: &str,
    overrides: &[S],
    strict: bool,
) -> ConfigResult<Scenario> {
    let mut doc = Document::parse(text)?;
    doc.apply_overrides(overrides)?;
    scenario_from_document(&doc, strict)
}

pub fn scenario_from_document(doc: &Document, strict: bool) -> ConfigResult<Scenario> {
    for s in &doc.sections {
        if !SECTIONS.contains(&s.name.as_str()) {
            let err = ConfigError::UnknownSection {
                section: s.name.clone(),
                line: s.line,
            };
            if strict {
                return Err(err);
            }
            log::warn!("{err} (ignored)");
        }
    }
    let need = |name: &str| {
        doc.section(name)
            .ok_or_else(|| ConfigError::MissingSection(name.into()))
    };

    let plant = {
        let mut r = Reader::new(need("plant")?);
        let kind = r.req_string("kind")?;
        let plant = match kind.as_str() {
            "mass_spring" => {
                let d = MassSpringParams::<f64>::published();
                let damping = match r.entry("damping") {
                    None => d.damping,
                    Some(e) => e.value.parse::<Damping>().map_err(|m| r.invalid(e, m))?,
                };
                let p = MassSpringParams {
                    m: r.f64_or("m", d.m)?,
                    alpha: r.f64_or("alpha", d.alpha)?,
                    beta: r.f64_or("beta", d.beta)?,
                    damping,
                };
                p.validate()?;
                PlantSpec::MassSpring(p)
            }
            "pendulum" => {
                let d = PendulumParams::<f64>::published();
                let p = PendulumParams {
                    m: r.f64_or("m", d.m)?,
                    length: r.f64_or("length", d.length)?,
                    g: r.f64_or("g", d.g)?,
                    beta: r.f64_or("beta", d.beta)?,
                };
                p.validate()?;
                PlantSpec::Pendulum(p)
            }
            "flapping" => {
                let d = FlappingParams::<f64>::published();
                let p = FlappingParams {
                    inertia: r.f64_or("inertia", d.inertia)?,
                    kd1: r.f64_or("kd1", d.kd1)?,
                    k_lift: r.f64_or("k_lift", d.k_lift)?,
                    kd2: r.f64_or("kd2", d.kd2)?,
                    kd3: r.f64_or("kd3", d.kd3)?,
                    g: r.f64_or("g", d.g)?,
                    flap_freq_hz: r.f64_or("flap_freq_hz", d.flap_freq_hz)?,
                };
                p.validate()?;
                PlantSpec::Flapping(p)
            }
            _ => {
                let e = r.entry("kind").expect("read above");
                return Err(r.invalid(e, "expected mass_spring, pendulum or flapping"));
            }
        };
        r.finish(strict)?;
        plant
    };
    let n = plant.n();

    let objective = {
        let mut r = Reader::new(need("objective")?);
        if let Some(e) = r.entry("kind") {
            if e.value != "quadratic" {
                return Err(r.invalid(e, "only `quadratic` objectives are supported"));
            }
        }
        let target = r.req_vec("target")?;
        let coordinates = match r.entry("coordinates") {
            None => None,
            Some(e) => Some(
                e.value
                    .split(',')
                    .map(|p| match p.trim().parse::<usize>() {
                        Ok(i) if i >= 1 => Ok(i - 1),
                        _ => Err(r.invalid(
                            e,
                            format!("expected 1-based coordinate indices, got `{}`", e.value),
                        )),
                    })
                    .collect::<ConfigResult<Vec<_>>>()?,
            ),
        };
        r.finish(strict)?;
        ObjectiveSpec {
            target,
            coordinates,
        }
    };

    let kind = match doc.section("controller") {
        None => "proposed".to_string(),
        Some(sec) => {
            let mut r = Reader::new(sec);
            let k = r.string("kind")?.unwrap_or_else(|| "proposed".into());
            r.finish(strict)?;
            k
        }
    };
    let blocks = [
        ("proposed", "gains"),
        ("lie_bracket_baseline", "lie_bracket_baseline"),
        ("two_dither_baseline", "two_dither_baseline"),
    ];
    if !blocks.iter().any(|(k, _)| *k == kind) {
        return Err(ConfigError::Syntax {
            line: doc.section("controller").map_or(0, |s| s.line),
            column: 1,
            message: format!("unknown controller `{kind}` (expected proposed, lie_bracket_baseline or two_dither_baseline)"),
        });
    }
    for (k, sec) in blocks {
        if k != kind {
            if let Some(s) = doc.section(sec) {
                let err = ConfigError::InactiveBlock {
                    section: sec.to_string(),
                    controller: kind.clone(),
                    line: s.line,
                };
                if strict {
                    return Err(err);
                }
                log::warn!("{err} (ignored)");
            }
        }
    }
    let controller = match kind.as_str() {
        "proposed" => {
            let mut r = Reader::new(need("gains")?);
            let g = EscGains::new(
                r.req_vec("C")?,
                r.req_vec("A")?,
                r.req_f64("k")?,
                r.req_f64("omega")?,
            )?;
            r.finish(strict)?;
            ControllerSpec::Proposed(g)
        }
        "lie_bracket_baseline" => {
            let mut r = Reader::new(need("lie_bracket_baseline")?);
            let d = LieBracketBaselineParams::<f64>::published();
            let p = LieBracketBaselineParams {
                gamma: r.f64_or("gamma", d.gamma)?,
                eta: r.f64_or("eta", d.eta)?,
                eps_b: r.f64_or("eps_b", d.eps_b)?,
                k_b: r.f64_or("k_b", d.k_b)?,
                mu: r.f64_or("mu", d.mu)?,
                frequency: r.f64_or("frequency", d.frequency)?,
            };
            p.validate()?;
            r.finish(strict)?;
            ControllerSpec::LieBracketBaseline(p)
        }
        _ => {
            let mut r = Reader::new(need("two_dither_baseline")?);
            let d = TwoDitherBaselineParams::<f64>::published();
            let p = TwoDitherBaselineParams {
                lambda1: r.f64_or("lambda1", d.lambda1)?,
                lambda2: r.f64_or("lambda2", d.lambda2)?,
                mu1: r.f64_or("mu1", d.mu1)?,
                mu2: r.f64_or("mu2", d.mu2)?,
                omega: r.f64_or("omega", d.omega)?,
            };
            p.validate()?;
            r.finish(strict)?;
            ControllerSpec::TwoDitherBaseline(p)
        }
    };

    let integration = {
        let sec = need("integration")?;
        let mut r = Reader::new(sec);
        let t0 = r.f64_or("t0", 0.0)?;
        let tf = r.req_f64("tf")?;
        let dt = r.f64("dt")?;
        let spp = r.usize("steps_per_period")?;
        let step = match (dt, spp) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Syntax {
                    line: sec.line,
                    column: 1,
                    message: "give either `dt` or `steps_per_period`, not both".into(),
                })
            }
            (Some(dt), None) => StepSpec::Dt(dt),
            (None, Some(k)) => StepSpec::StepsPerPeriod(k),
            (None, None) => StepSpec::StepsPerPeriod(crate::integrator::DEFAULT_STEPS_PER_PERIOD),
        };
        r.finish(strict)?;
        IntegrationSpec { t0, tf, step }
    };

    let initial_state = match doc.section("initial_state") {
        None => StateVector::zeros(n),
        Some(sec) => {
            let mut r = Reader::new(sec);
            let q = r.vec("q")?.unwrap_or_else(|| vec![0.0; n]);
            let qdot = r.vec("qdot")?.unwrap_or_else(|| vec![0.0; n]);
            let uhat = r.f64_or("uhat", 0.0)?;
            r.finish(strict)?;
            if q.len() != n {
                return Err(EscError::DimensionMismatch {
                    field: "initial_state.q",
                    expected: n,
                    got: q.len(),
                }
                .into());
            }
            StateVector::pack(&q, &qdot, uhat)?
        }
    };

    let name = match doc.section("scenario") {
        None => "scenario".to_string(),
        Some(sec) => {
            let mut r = Reader::new(sec);
            let name = r.req_string("name")?;
            r.finish(strict)?;
            name
        }
    };

    let outputs = match doc.section("outputs") {
        None => OutputSpec::named(&name, false),
        Some(sec) => {
            let mut r = Reader::new(sec);
            let path = |v: Option<String>| {
                v.filter(|s| !s.is_empty() && s != "none")
                    .map(PathBuf::from)
            };
            let out = OutputSpec {
                csv: path(r.string("csv")?),
                svg: path(r.string("svg")?),
                averaged: r.bool("averaged")?.unwrap_or(false),
                stride: r.usize("stride")?.unwrap_or(1),
            };
            r.finish(strict)?;
            out
        }
    };

    let scenario = Scenario {
        name,
        plant,
        objective,
        controller,
        integration,
        initial_state,
        outputs,
    };
    if scenario.outputs.averaged && scenario.proposed_gains().is_none() {
        return Err(EscError::InvalidParameter {
            field: "outputs.averaged",
            reason: "the averaged system exists only for the proposed controller".into(),
        }
        .into());
    }
    scenario.validate(strict)?;
    Ok(scenario)
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Writes a scenario in the config format. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn emit_scenario(s: &Scenario) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "[scenario]\nname = {}\n", s.name);
    let _ = writeln!(w, "[plant]\nkind = {}", s.plant.kind());
    match &s.plant {
        PlantSpec::MassSpring(p) => {
            let _ = writeln!(
                w,
                "m = {}\nalpha = {}\nbeta = {}\ndamping = {}",
                p.m,
                p.alpha,
                p.beta,
                p.damping.as_str()
            );
        }
        PlantSpec::Pendulum(p) => {
            let _ = writeln!(
                w,
                "m = {}\nlength = {}\ng = {}\nbeta = {}",
                p.m, p.length, p.g, p.beta
            );
        }
        PlantSpec::Flapping(p) => {
            let _ = writeln!(
                w,
                "inertia = {}\nkd1 = {}\nk_lift = {}\nkd2 = {}\nkd3 = {}\ng = {}\nflap_freq_hz = {}",
                p.inertia, p.kd1, p.k_lift, p.kd2, p.kd3, p.g, p.flap_freq_hz
            );
        }
    }
    let _ = writeln!(
        w,
        "\n[objective]\nkind = quadratic\ntarget = {}",
        fmt_vec(&s.objective.target)
    );
    if let Some(c) = &s.objective.coordinates {
        let one_based: Vec<String> = c.iter().map(|i| (i + 1).to_string()).collect();
        let _ = writeln!(w, "coordinates = {}", one_based.join(", "));
    }
    let _ = writeln!(w, "\n[controller]\nkind = {}\n", s.controller.kind());
    match &s.controller {
        ControllerSpec::Proposed(g) => {
            let _ = writeln!(
                w,
                "[gains]\nC = {}\nA = {}\nk = {}\nomega = {}",
                fmt_vec(g.c()),
                fmt_vec(g.a()),
                g.k(),
                g.omega()
            );
        }
        ControllerSpec::LieBracketBaseline(p) => {
            let _ = writeln!(
                w,
                "[lie_bracket_baseline]\ngamma = {}\neta = {}\neps_b = {}\nk_b = {}\nmu = {}\nfrequency = {}",
                p.gamma, p.eta, p.eps_b, p.k_b, p.mu, p.frequency
            );
        }
        ControllerSpec::TwoDitherBaseline(p) => {
            let _ = writeln!(
                w,
                "[two_dither_baseline]\nlambda1 = {}\nlambda2 = {}\nmu1 = {}\nmu2 = {}\nomega = {}",
                p.lambda1, p.lambda2, p.mu1, p.mu2, p.omega
            );
        }
    }
    let i = &s.integration;
    let _ = writeln!(w, "\n[integration]\nt0 = {}\ntf = {}", i.t0, i.tf);
    let _ = match i.step {
        StepSpec::Dt(dt) => writeln!(w, "dt = {dt}"),
        StepSpec::StepsPerPeriod(k) => writeln!(w, "steps_per_period = {k}"),
    };
    let x = &s.initial_state;
    let _ = writeln!(
        w,
        "\n[initial_state]\nq = {}\nqdot = {}\nuhat = {}",
        fmt_vec(x.q()),
        fmt_vec(x.qdot()),
        x.uhat()
    );
    let o = &s.outputs;
    let path = |p: &Option<PathBuf>| {
        p.as_ref()
            .map_or("none".to_string(), |p| p.display().to_string())
    };
    let _ = writeln!(
        w,
        "\n[outputs]\ncsv = {}\nsvg = {}\naveraged = {}\nstride = {}",
        path(&o.csv),
        path(&o.svg),
        o.averaged,
        o.stride
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{scenario_defaults, ScenarioName};

    #[test]
    fn empty_document_names_plant() {
        let err = parse_scenario("", true).unwrap_err();
        assert_eq!(err.to_string(), "missing section [plant]");
    }

    #[test]
    fn round_trip_all_defaults() {
        for name in ScenarioName::ALL {
            let s = scenario_defaults(name);
            let text = emit_scenario(&s);
            assert_eq!(parse_scenario(&text, true).unwrap(), s, "{name}");
        }
    }

    #[test]
    fn negative_amplitude_rejected() {
        let mut doc =
            Document::parse(&emit_scenario(&scenario_defaults(ScenarioName::MassSpring))).unwrap();
        doc.set("gains", "A", "-0.3");
        let err = scenario_from_document(&doc, true).unwrap_err();
        assert!(err.to_string().contains("A must be positive"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_scenario("[plant]\nkind mass_spring\n", true).unwrap_err();
        assert!(
            matches!(
                err,
                ConfigError::Syntax {
                    line: 2,
                    column: 1,
                    ..
                }
            ),
            "{err:?}"
        );
        let err = parse_scenario("[plant\n", true).unwrap_err();
        assert!(
            matches!(err, ConfigError::Syntax { line: 1, .. }),
            "{err:?}"
        );
        let text = "[plant]\nkind = mass_spring\nalpha =  abc\n";
        match parse_scenario(text, true).unwrap_err() {
            ConfigError::InvalidValue {
                line, column, key, ..
            } => {
                assert_eq!((line, column, key.as_str()), (3, 10, "alpha"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_strict_and_lax() {
        let mut text = emit_scenario(&scenario_defaults(ScenarioName::MassSpring));
        text = text.replace("[gains]\n", "[gains]\nbogus = 1\n");
        let err = parse_scenario(&text, true).unwrap_err();
        assert!(
            matches!(err, ConfigError::UnknownKey { ref key, .. } if key == "bogus"),
            "{err:?}"
        );
        assert!(err.to_string().starts_with("line "));
        assert_eq!(
            parse_scenario(&text, false).unwrap(),
            scenario_defaults(ScenarioName::MassSpring)
        );
    }

    #[test]
    fn overrides_win_over_file() {
        let text = emit_scenario(&scenario_defaults(ScenarioName::MassSpring));
        let s = parse_scenario_with_overrides(
            &text,
            &["--gains.omega=100", "integration.dt=0.001"],
            true,
        )
        .unwrap();
        assert_eq!(s.proposed_gains().unwrap().omega(), 100.0);
        assert_eq!(s.integration.step, StepSpec::Dt(0.001));
        assert!(matches!(
            parse_scenario_with_overrides(&text, &["--gains"], true),
            Err(ConfigError::BadOverride(_))
        ));
    }

    #[test]
    fn coarse_steps_refused_when_strict() {
        let text = emit_scenario(&scenario_defaults(ScenarioName::MassSpring));
        let over = ["integration.steps_per_period=2"];
        assert!(parse_scenario_with_overrides(&text, &over, true).is_err());
        assert!(parse_scenario_with_overrides(&text, &over, false).is_ok());
    }

    #[test]
    fn comments_and_whitespace() {
        let text = "# header\n[plant]   # trailing\n  kind = pendulum\n[objective]\ntarget = 2\n[gains]\nC=1\nA = 0.5\nk = 2\nomega = 50\n[integration]\ntf = 30\n";
        let s = parse_scenario(text, true).unwrap();
        assert_eq!(s.initial_state.as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(s.plant, PlantSpec::Pendulum(PendulumParams::published()));
    }
}
