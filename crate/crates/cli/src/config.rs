//! Experiment configuration as read from JSON.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use radon_core::kernels::{CZKernel, KernelSpec};
use radon_core::multipliers::MultiplierSpec;
use radon_core::polyalg::PolySpec;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Uniformity,
    MinorDecay,
    GaussDecay,
    Decompose,
    Factorize,
    Identities,
    DirichletAudit,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Uniformity,
        ExperimentKind::MinorDecay,
        ExperimentKind::GaussDecay,
        ExperimentKind::Decompose,
        ExperimentKind::Factorize,
        ExperimentKind::Identities,
        ExperimentKind::DirichletAudit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Uniformity => "uniformity",
            ExperimentKind::MinorDecay => "minor-decay",
            ExperimentKind::GaussDecay => "gauss-decay",
            ExperimentKind::Decompose => "decompose",
            ExperimentKind::Factorize => "factorize",
            ExperimentKind::Identities => "identities",
            ExperimentKind::DirichletAudit => "dirichlet-audit",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::config("cli", format!("unknown experiment `{s}`")))
    }
}

/// How random coefficients are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub count: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Probability that a real coefficient is drawn as a rational `a/q`.
    #[serde(default)]
    pub rational_fraction: f64,
    #[serde(default = "default_max_denominator")]
    pub max_denominator: i64,
    /// Largest polynomial degree drawn.
    #[serde(default)]
    pub degree: Option<u32>,
    /// Integer coefficients are drawn from `-int_range..=int_range`.
    #[serde(default)]
    pub int_range: Option<i64>,
}

fn default_max_denominator() -> i64 {
    12
}

/// Full configuration; each experiment reads the fields it needs and
/// falls back to its documented defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub poly: Option<PolySpec>,
    /// Operator family swept by `uniformity`: `TPQ` or `OscT`.
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default)]
    pub radii: Option<Vec<i64>>,
    #[serde(default)]
    pub p_values: Option<Vec<f64>>,
    #[serde(default)]
    pub sampling: Option<SamplingSpec>,
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    #[serde(default)]
    pub j_range: Option<[u32; 2]>,
    #[serde(default)]
    pub moduli: Option<Vec<i64>>,
    /// First scale of each factorization window.
    #[serde(default)]
    pub windows: Option<Vec<u32>>,
    /// Multiplier `a` in the Gauss phase `a r l / q`.
    #[serde(default)]
    pub gauss_a: Option<i64>,
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub truncation: Option<i64>,
    #[serde(default)]
    pub period: Option<i64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub multiplier: Option<MultiplierSpec>,
    #[serde(default)]
    pub lower_iterations: Option<usize>,
    #[serde(default)]
    pub lower_starts: Option<usize>,
    #[serde(default)]
    pub audit_denominator: Option<i64>,
    #[serde(default)]
    pub audit_max_n: Option<u32>,
    /// Directory for the report files; `--out` takes precedence.
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config("cli", format!("config schema: {e}")))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(20240917)
    }

    pub fn sampling_seed(&self) -> u64 {
        self.sampling.as_ref().and_then(|s| s.seed).unwrap_or_else(|| self.seed())
    }

    pub fn kernel(&self) -> Result<CZKernel, CliError> {
        match &self.kernel {
            None => Ok(CZKernel::hilbert()),
            Some(spec) => spec.build().map_err(|e| CliError::core("kernels", e)),
        }
    }

    pub fn count(&self, default: usize) -> Result<usize, CliError> {
        let n = self.sampling.as_ref().map_or(default, |s| s.count);
        if n == 0 {
            return Err(CliError::config("cli", "sampling.count must be positive"));
        }
        Ok(n)
    }

    pub fn j_range(&self, default: [u32; 2]) -> Result<(u32, u32), CliError> {
        let [a, b] = self.j_range.unwrap_or(default);
        if a > b {
            return Err(CliError::config("cli", format!("j_range [{a}, {b}] is empty")));
        }
        Ok((a, b))
    }
}

/// Non-empty list or its default.
pub fn list_or<T: Clone>(value: &Option<Vec<T>>, default: &[T], field: &str) -> Result<Vec<T>, CliError> {
    match value {
        None => Ok(default.to_vec()),
        Some(v) if v.is_empty() => Err(CliError::config("cli", format!("`{field}` must not be empty"))),
        Some(v) => Ok(v.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("minor_decay".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn empty_object_takes_defaults() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.count(7).unwrap(), 7);
        assert_eq!(cfg.j_range([2, 5]).unwrap(), (2, 5));
        assert_eq!(cfg.sampling_seed(), cfg.seed());
    }

    #[test]
    fn unknown_fields_are_errors() {
        assert!(ExperimentConfig::from_json(r#"{ "radius": [3] }"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{ "sampling": { "count": 3, "extra": 1 } }"#).is_err());
    }

    #[test]
    fn sampling_overrides() {
        let cfg = ExperimentConfig::from_json(r#"{ "seed": 5, "sampling": { "count": 3, "seed": 9 } }"#).unwrap();
        assert_eq!(cfg.count(100).unwrap(), 3);
        assert_eq!((cfg.seed(), cfg.sampling_seed()), (5, 9));
        assert_eq!(cfg.sampling.unwrap().max_denominator, 12);
    }

    #[test]
    fn invalid_ranges() {
        let cfg = ExperimentConfig::from_json(r#"{ "j_range": [6, 2], "sampling": { "count": 0 } }"#).unwrap();
        assert!(cfg.j_range([0, 1]).is_err());
        assert!(cfg.count(1).is_err());
    }

    #[test]
    fn list_defaults() {
        assert_eq!(list_or(&None, &[1, 2], "x").unwrap(), vec![1, 2]);
        assert_eq!(list_or(&Some(vec![4]), &[1, 2], "x").unwrap(), vec![4]);
        assert!(list_or::<i64>(&Some(vec![]), &[1], "x").is_err());
    }
}
