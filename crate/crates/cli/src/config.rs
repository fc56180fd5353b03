//! Run configuration: `key = value` lines, `#` comments, flags override
//! file values.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clustergap::c64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`: {reason}")]
    BadValue { line: usize, key: String, value: String, reason: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Square,
    Lshape,
    /// Polygon vertices (`x y` per line) meshed with `hmax`.
    Polygon,
    /// A mesh in the text mesh format.
    Mesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Residual,
    Fosls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Cg,
    Fosls,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: Problem,
    /// Cells per unit length of the structured square and L-shape meshes.
    pub n: usize,
    pub hmax: f64,
    pub geometry: Option<PathBuf>,
    pub degree: usize,
    pub estimator: EstimatorKind,
    pub backend: BackendKind,
    pub center: c64,
    pub radius: f64,
    pub nquad: usize,
    /// `φ = −e^{iπ/N}` instead of `e^{iπ/N}`.
    pub negative_phase: bool,
    /// Constant potential on `{x < 1/2}`.
    pub potential: c64,
    pub cluster_dim_hint: usize,
    /// Block size; `0` means `cluster_dim_hint + 2`.
    pub block: usize,
    pub theta: f64,
    pub max_rounds: usize,
    pub tol_feast: f64,
    pub maxit: usize,
    pub seed: u64,
    pub output_prefix: PathBuf,
    pub reference: Vec<c64>,
    pub max_ndofs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: Problem::Square,
            n: 8,
            hmax: 0.25,
            geometry: None,
            degree: 2,
            estimator: EstimatorKind::Residual,
            backend: BackendKind::Cg,
            center: c64::from(5.0 * std::f64::consts::PI.powi(2)),
            radius: 5.0,
            nquad: 4,
            negative_phase: false,
            potential: c64::from(0.0),
            cluster_dim_hint: 2,
            block: 0,
            theta: 0.9,
            max_rounds: 6,
            tol_feast: 1e-10,
            maxit: 50,
            seed: 0,
            output_prefix: PathBuf::from("clustergap"),
            reference: Vec::new(),
            max_ndofs: 200_000,
        }
    }
}

pub const KEYS: &[&str] = &[
    "problem",
    "n",
    "hmax",
    "geometry",
    "degree",
    "estimator",
    "backend",
    "center",
    "radius",
    "nquad",
    "phase_sign",
    "potential",
    "cluster_dim_hint",
    "block",
    "theta",
    "max_rounds",
    "tol_feast",
    "maxit",
    "seed",
    "output_prefix",
    "reference",
    "max_ndofs",
];

fn parse<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| e.to_string())
}

/// Complex numbers as `a`, `a+bi`, `bi`.
pub fn parse_complex(value: &str) -> Result<c64, String> {
    let s: String = value.chars().filter(|c| !c.is_whitespace()).collect();
    c64::from_str(&s).map_err(|e| format!("{e:?}"))
}

fn format_complex(z: c64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im.is_sign_negative() {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

impl RunConfig {
    /// Sets one key; `line` is used in error messages.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |reason: String| ConfigError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
            reason,
        };
        match key {
            "problem" => {
                self.problem = match value {
                    "square" => Problem::Square,
                    "lshape" => Problem::Lshape,
                    "polygon" => Problem::Polygon,
                    "mesh" => Problem::Mesh,
                    _ => return Err(bad("expected square, lshape, polygon or mesh".into())),
                }
            }
            "n" => self.n = parse(value).map_err(bad)?,
            "hmax" => self.hmax = parse(value).map_err(bad)?,
            "geometry" => self.geometry = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "degree" => self.degree = parse(value).map_err(bad)?,
            "estimator" => {
                self.estimator = match value {
                    "residual" => EstimatorKind::Residual,
                    "fosls" => EstimatorKind::Fosls,
                    _ => return Err(bad("expected residual or fosls".into())),
                }
            }
            "backend" => {
                self.backend = match value {
                    "cg" => BackendKind::Cg,
                    "fosls" => BackendKind::Fosls,
                    _ => return Err(bad("expected cg or fosls".into())),
                }
            }
            "center" => self.center = parse_complex(value).map_err(bad)?,
            "radius" => self.radius = parse(value).map_err(bad)?,
            "nquad" => self.nquad = parse(value).map_err(bad)?,
            "phase_sign" => {
                self.negative_phase = match value {
                    "+1" | "1" | "+" => false,
                    "-1" | "-" => true,
                    _ => return Err(bad("expected +1 or -1".into())),
                }
            }
            "potential" => self.potential = parse_complex(value).map_err(bad)?,
            "cluster_dim_hint" => self.cluster_dim_hint = parse(value).map_err(bad)?,
            "block" => self.block = parse(value).map_err(bad)?,
            "theta" => self.theta = parse(value).map_err(bad)?,
            "max_rounds" => self.max_rounds = parse(value).map_err(bad)?,
            "tol_feast" => self.tol_feast = parse(value).map_err(bad)?,
            "maxit" => self.maxit = parse(value).map_err(bad)?,
            "seed" => self.seed = parse(value).map_err(bad)?,
            "output_prefix" => self.output_prefix = PathBuf::from(value),
            "reference" => {
                self.reference = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(parse_complex)
                    .collect::<Result<_, _>>()
                    .map_err(bad)?
            }
            "max_ndofs" => self.max_ndofs = parse(value).map_err(bad)?,
            _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value.trim(), i + 1)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_text(&text)
    }

    /// Applies `key=value` overrides, numbered from 1 in error messages.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for (i, o) in overrides.iter().enumerate() {
            let (key, value) = o.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value.trim(), i + 1)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Invalid(m));
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return fail(format!("theta = {} must lie in (0, 1)", self.theta));
        }
        if self.nquad < 2 {
            return fail(format!("nquad = {} must be at least 2", self.nquad));
        }
        if !(1..=3).contains(&self.degree) {
            return fail(format!("degree = {} must be 1, 2 or 3", self.degree));
        }
        if !(self.radius > 0.0) {
            return fail(format!("radius = {} must be positive", self.radius));
        }
        if self.n == 0 {
            return fail("n must be positive".into());
        }
        if self.problem == Problem::Lshape && self.n % 2 != 0 {
            return fail(format!("the L-shape needs an even n, got {}", self.n));
        }
        if matches!(self.problem, Problem::Polygon | Problem::Mesh) && self.geometry.is_none() {
            return fail("polygon and mesh problems need `geometry`".into());
        }
        if self.backend == BackendKind::Fosls && self.degree != 1 {
            return fail("the least-squares backend needs degree = 1".into());
        }
        if self.backend == BackendKind::Fosls && self.potential != c64::from(0.0) {
            return fail("the least-squares path supports V = 0 only".into());
        }
        if self.estimator == EstimatorKind::Fosls && self.potential != c64::from(0.0) {
            return fail("the least-squares estimator supports V = 0 only".into());
        }
        if self.cluster_dim_hint == 0 {
            return fail("cluster_dim_hint must be positive".into());
        }
        Ok(())
    }

    /// Block size used by the subspace iteration.
    pub fn block_size(&self) -> usize {
        if self.block == 0 {
            self.cluster_dim_hint + 2
        } else {
            self.block
        }
    }

    /// Every key, in a form [`RunConfig::from_text`] reads back exactly.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let problem = match self.problem {
            Problem::Square => "square",
            Problem::Lshape => "lshape",
            Problem::Polygon => "polygon",
            Problem::Mesh => "mesh",
        };
        let _ = writeln!(s, "problem = {problem}");
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "hmax = {}", self.hmax);
        let _ = writeln!(s, "geometry = {}", self.geometry.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        let _ = writeln!(s, "degree = {}", self.degree);
        let estimator = match self.estimator {
            EstimatorKind::Residual => "residual",
            EstimatorKind::Fosls => "fosls",
        };
        let _ = writeln!(s, "estimator = {estimator}");
        let backend = match self.backend {
            BackendKind::Cg => "cg",
            BackendKind::Fosls => "fosls",
        };
        let _ = writeln!(s, "backend = {backend}");
        let _ = writeln!(s, "center = {}", format_complex(self.center));
        let _ = writeln!(s, "radius = {}", self.radius);
        let _ = writeln!(s, "nquad = {}", self.nquad);
        let _ = writeln!(s, "phase_sign = {}", if self.negative_phase { "-1" } else { "+1" });
        let _ = writeln!(s, "potential = {}", format_complex(self.potential));
        let _ = writeln!(s, "cluster_dim_hint = {}", self.cluster_dim_hint);
        let _ = writeln!(s, "block = {}", self.block);
        let _ = writeln!(s, "theta = {}", self.theta);
        let _ = writeln!(s, "max_rounds = {}", self.max_rounds);
        let _ = writeln!(s, "tol_feast = {:e}", self.tol_feast);
        let _ = writeln!(s, "maxit = {}", self.maxit);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "output_prefix = {}", self.output_prefix.display());
        let refs: Vec<String> = self.reference.iter().map(|&z| format_complex(z)).collect();
        let _ = writeln!(s, "reference = {}", refs.join(", "));
        let _ = writeln!(s, "max_ndofs = {}", self.max_ndofs);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_values() {
        assert_eq!(parse_complex("3").unwrap(), c64::from(3.0));
        assert_eq!(parse_complex("1.5-2i").unwrap(), c64::new(1.5, -2.0));
        assert_eq!(parse_complex(" 0 + 20i ").unwrap(), c64::new(0.0, 20.0));
        assert!(parse_complex("x").is_err());
        for z in [c64::new(1.0, -0.25), c64::new(-3.5, 1e-20), c64::from(49.34802200544679)] {
            assert_eq!(parse_complex(&format_complex(z)).unwrap(), z);
        }
    }
}
