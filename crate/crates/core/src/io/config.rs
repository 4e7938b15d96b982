//! Run configuration in TOML.
//!
//! ```toml
//! surface = "sphere"        # or "sixhole"
//! radius = 1.0
//! box_lo = -1.25            # cube [box_lo, box_hi]³
//! box_hi = 1.25
//! h = 0.1                   # or n = 25 cells per axis
//! epsilon = 0.05
//! mobility = 1.0
//! beta_s = 2.0
//! seed = 42
//! initial = "random"        # random | ritz | interpolate
//! schedule = "staged"       # or [[t_end, tau], ...]
//! final_time = 5.0          # truncates the schedule
//! snapshot_times = [0.0, 1.0, 5.0]
//! output = "out"
//!
//! [potential]
//! K = 1.1
//!
//! [converge]
//! levels = [0.4, 0.2, 0.1, 0.05]
//! final_time = 0.1
//! tau_factor = 0.5
//! epsilon = 0.1
//! ```

use std::ops::Range;
use std::path::PathBuf;

use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use crate::mesh::Box3;
use crate::potential::Potential;
use crate::solver::{Schedule, SchemeParams};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Converge,
    Simulate,
    ProjectTest,
    GeometryCheck,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "converge" => Some(Self::Converge),
            "simulate" => Some(Self::Simulate),
            "project-test" => Some(Self::ProjectTest),
            "geometry-check" => Some(Self::GeometryCheck),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    Sphere { radius: f64 },
    SixHole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCondition {
    Random,
    Ritz,
    Interpolate,
}

/// Mesh resolution: explicit cell count or target size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution {
    Cells(usize),
    Target(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeConfig {
    pub levels: Vec<f64>,
    pub final_time: f64,
    pub tau_factor: f64,
    pub epsilon: f64,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self {
            levels: vec![0.4, 0.2, 0.1, 0.05],
            final_time: 0.1,
            tau_factor: 0.5,
            epsilon: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub surface: Surface,
    pub bounds: Box3,
    pub resolution: Resolution,
    pub params: SchemeParams,
    pub seed: u64,
    pub initial: InitialCondition,
    pub schedule: Schedule,
    pub snapshot_times: Vec<f64>,
    pub output: PathBuf,
    pub threads: Option<usize>,
    pub converge: ConvergeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("empty config is valid")
    }
}

impl RunConfig {
    pub fn cells_per_axis(&self) -> usize {
        match self.resolution {
            Resolution::Cells(n) => n,
            Resolution::Target(h) => ((self.bounds.edges()[0] / h).round() as usize).max(1),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScheduleSpec {
    Named(String),
    Pairs(Vec<(f64, f64)>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    #[serde(rename = "K")]
    k: Option<Spanned<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConverge {
    levels: Option<Spanned<Vec<f64>>>,
    final_time: Option<Spanned<f64>>,
    tau_factor: Option<Spanned<f64>>,
    epsilon: Option<Spanned<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Spanned<String>>,
    surface: Option<Spanned<String>>,
    radius: Option<Spanned<f64>>,
    box_lo: Option<Spanned<f64>>,
    box_hi: Option<Spanned<f64>>,
    n: Option<Spanned<i64>>,
    h: Option<Spanned<f64>>,
    epsilon: Option<Spanned<f64>>,
    mobility: Option<Spanned<f64>>,
    beta_s: Option<Spanned<f64>>,
    seed: Option<Spanned<i64>>,
    initial: Option<Spanned<String>>,
    schedule: Option<Spanned<ScheduleSpec>>,
    final_time: Option<Spanned<f64>>,
    snapshot_times: Option<Spanned<Vec<f64>>>,
    output: Option<Spanned<String>>,
    threads: Option<Spanned<i64>>,
    potential: Option<RawPotential>,
    converge: Option<RawConverge>,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn err<T>(&self, span: Range<usize>, key: &str, msg: impl std::fmt::Display) -> Result<T, ConfigError> {
        Err(ConfigError {
            line: Some(line_of(self.text, span)),
            message: format!("`{key}` {msg}"),
        })
    }

    fn positive(&self, v: &Option<Spanned<f64>>, key: &str, default: f64) -> Result<f64, ConfigError> {
        match v {
            None => Ok(default),
            Some(s) if s.get_ref().is_finite() && *s.get_ref() > 0.0 => Ok(*s.get_ref()),
            Some(s) => self.err(s.span(), key, format!("must be positive, got {}", s.get_ref())),
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| line_of(text, s)),
        message: e.message().trim().to_string(),
    })?;
    let cx = Ctx { text };

    let mode = match &raw.mode {
        None => None,
        Some(s) => match Mode::parse(s.get_ref()) {
            Some(m) => Some(m),
            None => return cx.err(s.span(), "mode", format!("has unknown value `{}`", s.get_ref())),
        },
    };

    let radius = cx.positive(&raw.radius, "radius", 1.0)?;
    let surface = match raw.surface.as_ref().map(|s| s.get_ref().as_str()) {
        None | Some("sphere") => Surface::Sphere { radius },
        Some("sixhole") | Some("six-hole") => Surface::SixHole,
        Some(other) => {
            let s = raw.surface.as_ref().unwrap();
            return cx.err(s.span(), "surface", format!("has unknown value `{other}` (sphere | sixhole)"));
        }
    };
    if let (Surface::SixHole, Some(r)) = (surface, &raw.radius) {
        return cx.err(r.span(), "radius", "only applies to the sphere");
    }

    let default_half = match surface {
        Surface::Sphere { radius } => 1.25 * radius,
        Surface::SixHole => 2.25,
    };
    let lo = raw.box_lo.as_ref().map_or(-default_half, |s| *s.get_ref());
    let hi = raw.box_hi.as_ref().map_or(default_half, |s| *s.get_ref());
    let bounds = match Box3::cube(lo, hi) {
        Ok(b) if lo.is_finite() && hi.is_finite() => b,
        _ => {
            let span = raw.box_hi.as_ref().or(raw.box_lo.as_ref()).map_or(0..0, |s| s.span());
            return cx.err(span, "box_hi", format!("must exceed box_lo ({lo} vs {hi})"));
        }
    };

    let resolution = match (&raw.n, &raw.h) {
        (Some(n), Some(_)) => return cx.err(n.span(), "n", "conflicts with `h`; give one of them"),
        (Some(n), None) => {
            if *n.get_ref() < 1 {
                return cx.err(n.span(), "n", format!("must be at least 1, got {}", n.get_ref()));
            }
            Resolution::Cells(*n.get_ref() as usize)
        }
        (None, h) => Resolution::Target(cx.positive(h, "h", 0.1)?),
    };

    let k = match &raw.potential.as_ref().and_then(|p| p.k.clone()) {
        None => 1.1,
        Some(s) => match Potential::new(*s.get_ref()) {
            Ok(_) => *s.get_ref(),
            Err(e) => return cx.err(s.span(), "potential.K", e),
        },
    };
    let potential = Potential::new(k).expect("validated above");

    let beta_s = match &raw.beta_s {
        None => 2.0,
        Some(s) if s.get_ref().is_finite() && *s.get_ref() >= 0.0 => *s.get_ref(),
        Some(s) => return cx.err(s.span(), "beta_s", format!("must be non-negative, got {}", s.get_ref())),
    };
    let params = SchemeParams {
        epsilon: cx.positive(&raw.epsilon, "epsilon", 0.05)?,
        mobility: cx.positive(&raw.mobility, "mobility", 1.0)?,
        beta_s,
        potential,
    };

    let seed = match &raw.seed {
        None => 42,
        Some(s) if *s.get_ref() >= 0 => *s.get_ref() as u64,
        Some(s) => return cx.err(s.span(), "seed", "must be non-negative"),
    };

    let initial = match raw.initial.as_ref().map(|s| s.get_ref().as_str()) {
        None | Some("random") => InitialCondition::Random,
        Some("ritz") => InitialCondition::Ritz,
        Some("interpolate") => InitialCondition::Interpolate,
        Some(other) => {
            let s = raw.initial.as_ref().unwrap();
            return cx.err(s.span(), "initial", format!("has unknown value `{other}` (random | ritz | interpolate)"));
        }
    };

    let mut schedule = match &raw.schedule {
        None => Schedule::staged(),
        Some(s) => match s.get_ref() {
            ScheduleSpec::Named(name) if name == "staged" => Schedule::staged(),
            ScheduleSpec::Named(name) => {
                return cx.err(s.span(), "schedule", format!("has unknown name `{name}`"))
            }
            ScheduleSpec::Pairs(pairs) => match Schedule::new(pairs.clone()) {
                Ok(sch) => sch,
                Err(e) => return cx.err(s.span(), "schedule", e),
            },
        },
    };
    let final_time = match &raw.final_time {
        None => 5.0,
        Some(s) if s.get_ref().is_finite() && *s.get_ref() >= 0.0 => *s.get_ref(),
        Some(s) => return cx.err(s.span(), "final_time", "must be non-negative"),
    };
    schedule = schedule.truncated(final_time);

    let snapshot_times = match &raw.snapshot_times {
        None => vec![],
        Some(s) => {
            let v = s.get_ref().clone();
            if v.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return cx.err(s.span(), "snapshot_times", "must be non-negative times");
            }
            v
        }
    };

    let output = raw
        .output
        .as_ref()
        .map_or_else(|| PathBuf::from("out"), |s| PathBuf::from(s.get_ref()));
    let threads = match &raw.threads {
        None => None,
        Some(s) if *s.get_ref() >= 1 => Some(*s.get_ref() as usize),
        Some(s) => return cx.err(s.span(), "threads", "must be at least 1"),
    };

    let rc = raw.converge.unwrap_or_default();
    let defaults = ConvergeConfig::default();
    let levels = match &rc.levels {
        None => defaults.levels,
        Some(s) => {
            let v = s.get_ref().clone();
            if v.is_empty() || v.iter().any(|h| !h.is_finite() || *h <= 0.0) {
                return cx.err(s.span(), "converge.levels", "must be a non-empty list of positive sizes");
            }
            if v.windows(2).any(|w| w[1] >= w[0]) {
                return cx.err(s.span(), "converge.levels", "must strictly decrease");
            }
            v
        }
    };
    let converge = ConvergeConfig {
        levels,
        final_time: cx.positive(&rc.final_time, "converge.final_time", defaults.final_time)?,
        tau_factor: cx.positive(&rc.tau_factor, "converge.tau_factor", defaults.tau_factor)?,
        epsilon: cx.positive(&rc.epsilon, "converge.epsilon", defaults.epsilon)?,
    };

    Ok(RunConfig {
        mode,
        surface,
        bounds,
        resolution,
        params,
        seed,
        initial,
        schedule,
        snapshot_times,
        output,
        threads,
        converge,
    })
}
