use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which network components are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Aggregation followed by the gated retention cell.
    Full,
    /// Aggregation only; each layer's output replaces the previous state.
    AggregationOnly,
    /// Retention cell only, fed the previous state on both inputs.
    RetentionOnly,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Full, Mode::AggregationOnly, Mode::RetentionOnly];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::AggregationOnly => "aggregation-only",
            Mode::RetentionOnly => "retention-only",
        }
    }

    pub fn uses_aggregation(self) -> bool {
        self != Mode::RetentionOnly
    }

    pub fn uses_retention(self) -> bool {
        self != Mode::AggregationOnly
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown mode `{s}` (expected full, aggregation-only or retention-only)"
            ))
        })
    }
}

/// When the optimizer steps during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepGranularity {
    /// One step per commit on the summed loss of its pairs.
    Commit,
    /// One step per pair.
    Pair,
}

impl FromStr for StepGranularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "commit" => Ok(StepGranularity::Commit),
            "pair" => Ok(StepGranularity::Pair),
            _ => Err(Error::Config(format!(
                "unknown step granularity `{s}` (expected commit or pair)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub out_dim: usize,
    pub mode: Mode,
    pub include_tie_pairs: bool,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Logistic scale applied to score differences.
    pub sigma: f64,
    pub step: StepGranularity,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            heads: 8,
            layers: 2,
            out_dim: 64,
            mode: Mode::Full,
            include_tie_pairs: false,
            lr: 5e-6,
            epochs: 50,
            seed: 42,
            sigma: 1.0,
            step: StepGranularity::Commit,
        }
    }
}

impl ModelConfig {
    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.out_dim == 0 {
            return Err(Error::Config("dim and out_dim must be positive".into()));
        }
        if self.heads == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "heads must divide dim (heads={}, dim={})",
                self.heads, self.dim
            )));
        }
        if self.layers == 0 {
            return Err(Error::Config("layers must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!((c.dim, c.heads, c.layers, c.lr), (64, 8, 2, 5e-6));
    }

    #[test]
    fn heads_must_divide_dim() {
        let c = ModelConfig {
            heads: 7,
            ..ModelConfig::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("heads must divide dim"));
    }

    #[test]
    fn mode_names_roundtrip() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert!("gat".parse::<Mode>().is_err());
    }
}
