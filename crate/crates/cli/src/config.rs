//! The run configuration file.
//!
//! A TOML document with top-level `dimension`, `V`, `K` and `output`, and
//! the tables `[nonlinearity]`, `[envelope]`, `[mesh]`, `[solver]`,
//! `[verify]` and `[rates]`. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use dualmp::exponents::{rational_str, Dimension};
use dualmp::mesh::{MeshParams, RadialMesh};
use dualmp::mountain_pass::SolverParams;
use dualmp::verify::RateParams;
use dualmp::{Envelope, Nonlinearity, NonlinearityKind, Potential, Rational};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: Dimension,
    #[serde(rename = "V")]
    pub v: Potential,
    #[serde(rename = "K")]
    pub k: Potential,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub envelope: Envelopes,
    #[serde(default)]
    pub mesh: MeshParams,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub verify: Thresholds,
    #[serde(default)]
    pub rates: RatesConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    SinglePower,
    MinPower,
    RatioPower,
    Zero,
}

/// `kind` plus the exponents it needs; `theta` defaults to `min(q1, q2) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub kind: KindName,
    #[serde(default, with = "rational_str::option", skip_serializing_if = "Option::is_none")]
    pub q: Option<Rational>,
    #[serde(default, with = "rational_str::option", skip_serializing_if = "Option::is_none")]
    pub q1: Option<Rational>,
    #[serde(default, with = "rational_str::option", skip_serializing_if = "Option::is_none")]
    pub q2: Option<Rational>,
    #[serde(default, with = "rational_str::option")]
    pub theta: Option<Rational>,
    #[serde(default = "yes")]
    pub truncate_negative: bool,
}

fn yes() -> bool {
    true
}

impl NonlinearitySpec {
    pub fn kind(&self) -> Result<NonlinearityKind> {
        let need = |name: &str, q: Option<Rational>| {
            q.ok_or_else(|| anyhow!("nonlinearity kind {:?} needs `{name}`", self.kind))
        };
        let forbid = |names: &[(&str, Option<Rational>)]| -> Result<()> {
            for (name, q) in names {
                if q.is_some() {
                    bail!("nonlinearity kind {:?} does not take `{name}`", self.kind);
                }
            }
            Ok(())
        };
        Ok(match self.kind {
            KindName::SinglePower => {
                forbid(&[("q1", self.q1), ("q2", self.q2)])?;
                NonlinearityKind::SinglePower { q: need("q", self.q)? }
            }
            KindName::MinPower | KindName::RatioPower => {
                forbid(&[("q", self.q)])?;
                let (q1, q2) = (need("q1", self.q1)?, need("q2", self.q2)?);
                if self.kind == KindName::MinPower {
                    NonlinearityKind::MinPower { q1, q2 }
                } else {
                    NonlinearityKind::RatioPower { q1, q2 }
                }
            }
            KindName::Zero => {
                forbid(&[("q", self.q), ("q1", self.q1), ("q2", self.q2)])?;
                NonlinearityKind::Zero
            }
        })
    }

    pub fn build(&self) -> Result<Nonlinearity> {
        let kind = self.kind()?;
        let theta = self.theta.unwrap_or_else(|| kind.default_theta());
        Ok(Nonlinearity::new(kind, theta, self.truncate_negative)?)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelopes {
    #[serde(default)]
    pub zero: Vec<Envelope>,
    #[serde(default)]
    pub infinity: Vec<Envelope>,
}

/// Pass/fail limits of `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub grad_norm: f64,
    pub weak_form_defect: f64,
    pub min_value: f64,
    /// Allowed ratio of the solution's decay constant to the library maximum.
    pub decay_factor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { grad_norm: 1e-10, weak_form_defect: 1e-6, min_value: -1e-12, decay_factor: 1.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSides {
    Zero,
    Infinity,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    #[serde(default = "both")]
    pub side: RateSides,
    /// Exponent used at the origin; defaults to `q1`.
    #[serde(default, with = "rational_str::option")]
    pub q_zero: Option<Rational>,
    /// Exponent used at infinity; defaults to `q2`.
    #[serde(default, with = "rational_str::option")]
    pub q_infinity: Option<Rational>,
    #[serde(default = "rate_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "rate_mesh")]
    pub mesh: MeshParams,
}

fn both() -> RateSides {
    RateSides::Both
}

fn rate_samples() -> usize {
    RateParams::default().samples
}

fn rate_mesh() -> MeshParams {
    RateParams::default().mesh
}

impl Default for RatesConfig {
    fn default() -> Self {
        Self { side: both(), q_zero: None, q_infinity: None, samples: rate_samples(), seed: 0, mesh: rate_mesh() }
    }
}

impl RatesConfig {
    pub fn params(&self) -> RateParams {
        RateParams { samples: self.samples, seed: self.seed, mesh: self.mesh }
    }
}

/// Byte offset to 1-based `(line, column)`.
pub fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

impl RunConfig {
    /// Parse and validate. Errors carry the line and column of the offending
    /// value when TOML reports one.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            bail!("config is empty");
        }
        let mut config: RunConfig = toml::from_str(text).map_err(|e| match e.span() {
            Some(span) => {
                let (line, column) = line_column(text, span.start);
                anyhow!("line {line}, column {column}: {}", e.message())
            }
            None => anyhow!("{}", e.message()),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Fill in derived defaults so the echoed config is the effective one.
    fn validate(&mut self) -> Result<()> {
        let g = self.nonlinearity.build()?;
        self.nonlinearity.theta = Some(g.theta());
        for e in self.envelope.zero.iter().chain(&self.envelope.infinity) {
            Envelope::with_radius(e.alpha, e.beta, e.radius)?;
        }
        RadialMesh::new(self.dimension, self.mesh)?;
        RadialMesh::new(self.dimension, self.rates.mesh)?;
        self.v.check_sign(false).context("V")?;
        self.k.check_sign(false).context("K")?;
        Ok(())
    }

    /// `(q1, q2)` as given (single powers repeat `q`; `zero` has none).
    pub fn exponents(&self) -> Option<(Rational, Rational)> {
        self.nonlinearity.kind().ok()?.exponents()
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        self.nonlinearity.build()
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.solver.seed = seed;
        self.rates.seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
dimension = 3
V = "r^-2"
K = "min(r^3, 1)"

[nonlinearity]
kind = "single_power"
q = 8
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.mesh, MeshParams::default());
        assert_eq!(c.solver, SolverParams::default());
        assert_eq!(c.nonlinearity.theta, Some(Rational::from_integer(4)));
        assert_eq!(c.output, PathBuf::from("out"));
    }

    #[test]
    fn unknown_key_reports_line_and_column() {
        let text = format!("{MINIMAL}\n[mesh]\nnodez = 10\n");
        let err = format!("{:#}", RunConfig::parse(&text).unwrap_err());
        assert!(err.contains("line 11, column 1"), "{err}");
        assert!(err.contains("nodez"), "{err}");
    }

    #[test]
    fn bad_potential_is_located() {
        let text = MINIMAL.replace("min(r^3, 1)", "min(r^3, ");
        let err = format!("{:#}", RunConfig::parse(&text).unwrap_err());
        assert!(err.contains("line 4"), "{err}");
    }

    #[test]
    fn empty_config_is_an_error() {
        assert!(RunConfig::parse("  \n").is_err());
    }

    #[test]
    fn rational_strings_and_integers_agree() {
        let a = RunConfig::parse(MINIMAL).unwrap();
        let b = RunConfig::parse(&MINIMAL.replace("q = 8", "q = \"8\"")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kind_checks_its_exponents() {
        let text = MINIMAL.replace("q = 8", "q1 = 8");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn line_column_counts_from_one() {
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
        assert_eq!(line_column("ab", 0), (1, 1));
    }
}
