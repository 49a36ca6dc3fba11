//! Experiment grid and parameter overrides.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::baselines::{BaselineParams, Variant};
use crate::error::{Error, Result};
use crate::sim::{SimConfig, SpeedBand};

fn invalid(key: &str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig { key: key.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComposerKind {
    Copernic,
    Gocomo,
    Coopc,
}

impl ComposerKind {
    pub const ALL: [ComposerKind; 3] = [ComposerKind::Copernic, ComposerKind::Gocomo, ComposerKind::Coopc];

    pub fn name(self) -> &'static str {
        match self {
            ComposerKind::Copernic => "copernic",
            ComposerKind::Gocomo => "gocomo",
            ComposerKind::Coopc => "coopc",
        }
    }
}

impl fmt::Display for ComposerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ComposerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "copernic" => Ok(ComposerKind::Copernic),
            "gocomo" | "gocomo-like" => Ok(ComposerKind::Gocomo),
            "coopc" | "coopc-like" => Ok(ComposerKind::Coopc),
            _ => Err(invalid("composer", format!("unknown composer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mobility {
    #[serde(rename = "M-0")]
    Static,
    #[serde(rename = "M-S")]
    Slow,
    #[serde(rename = "M-M")]
    Medium,
    #[serde(rename = "M-F")]
    Fast,
}

impl Mobility {
    pub const GRID: [Mobility; 3] = [Mobility::Slow, Mobility::Medium, Mobility::Fast];

    pub fn band(self) -> SpeedBand {
        match self {
            Mobility::Static => SpeedBand::STATIC,
            Mobility::Slow => SpeedBand::SLOW,
            Mobility::Medium => SpeedBand::MEDIUM,
            Mobility::Fast => SpeedBand::FAST,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mobility::Static => "M-0",
            Mobility::Slow => "M-S",
            Mobility::Medium => "M-M",
            Mobility::Fast => "M-F",
        }
    }
}

impl fmt::Display for Mobility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Mobility {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "M-0" | "STATIC" => Ok(Mobility::Static),
            "M-S" | "SLOW" => Ok(Mobility::Slow),
            "M-M" | "MEDIUM" => Ok(Mobility::Medium),
            "M-F" | "FAST" => Ok(Mobility::Fast),
            _ => Err(invalid("mobility", format!("unknown mobility {s:?}"))),
        }
    }
}

/// Deployed service count: SD-S 20, SD-M 40, SD-D 60, or any positive value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Density(pub usize);

impl Density {
    pub const SPARSE: Density = Density(20);
    pub const MEDIUM: Density = Density(40);
    pub const DENSE: Density = Density(60);
    pub const GRID: [Density; 3] = [Density::SPARSE, Density::MEDIUM, Density::DENSE];

    pub fn label(self) -> String {
        match self.0 {
            20 => "SD-S".into(),
            40 => "SD-M".into(),
            60 => "SD-D".into(),
            n => format!("SD-{n}"),
        }
    }
}

impl FromStr for Density {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = match s.to_ascii_uppercase().as_str() {
            "SD-S" => 20,
            "SD-M" => 40,
            "SD-D" => 60,
            other => other
                .trim_start_matches("SD-")
                .parse()
                .map_err(|_| invalid("density", format!("unknown density {s:?}")))?,
        };
        if n == 0 {
            return Err(invalid("density", "must be positive"));
        }
        Ok(Density(n))
    }
}

/// Composition length in abstract services (CL-5, CL-10).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChainLength(pub usize);

impl ChainLength {
    pub const GRID: [ChainLength; 2] = [ChainLength(5), ChainLength(10)];

    pub fn label(self) -> String {
        format!("CL-{}", self.0)
    }
}

impl FromStr for ChainLength {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n: usize = s
            .to_ascii_uppercase()
            .trim_start_matches("CL-")
            .parse()
            .map_err(|_| invalid("length", format!("unknown chain length {s:?}")))?;
        if n == 0 {
            return Err(invalid("length", "must be positive"));
        }
        Ok(ChainLength(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Cell {
    pub composer: ComposerKind,
    pub density: Density,
    pub length: ChainLength,
    pub mobility: Mobility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub composers: Vec<ComposerKind>,
    pub densities: Vec<Density>,
    pub lengths: Vec<ChainLength>,
    pub mobilities: Vec<Mobility>,
    pub replications: usize,
    pub seed: u64,
    /// Seconds each request has to complete.
    pub deadline: f64,
    pub sim: SimConfig,
    pub agent: AgentConfig,
    pub gocomo: BaselineParams,
    pub coopc: BaselineParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        ExperimentConfig {
            composers: ComposerKind::ALL.to_vec(),
            densities: Density::GRID.to_vec(),
            lengths: ChainLength::GRID.to_vec(),
            mobilities: Mobility::GRID.to_vec(),
            replications: 30,
            seed: 1,
            deadline: sim.deadline,
            sim,
            agent: AgentConfig::default(),
            gocomo: BaselineParams::for_variant(Variant::GoCoMo),
            coopc: BaselineParams::for_variant(Variant::CoopC),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("replications", "must be at least 1"));
        }
        for (key, empty) in [
            ("composers", self.composers.is_empty()),
            ("densities", self.densities.is_empty()),
            ("lengths", self.lengths.is_empty()),
            ("mobilities", self.mobilities.is_empty()),
        ] {
            if empty {
                return Err(invalid(key, "must not be empty"));
            }
        }
        if !(self.deadline > 0.0) {
            return Err(invalid("deadline", "must be positive"));
        }
        if let Some(d) = self.densities.iter().find(|d| d.0 == 0) {
            return Err(invalid("densities", format!("{} is not positive", d.0)));
        }
        for l in &self.lengths {
            if l.0 == 0 || l.0 > self.sim.stages {
                return Err(invalid("lengths", format!("{} outside 1..={}", l.0, self.sim.stages)));
            }
        }
        for (key, p) in [("gocomo", &self.gocomo), ("coopc", &self.coopc)] {
            if !(p.window > 0.0 && p.fragment_timeout > 0.0 && p.resend > 0.0) || p.ttl == 0 {
                return Err(invalid(key, "timers and ttl must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.agent.epsilon) {
            return Err(invalid("agent.epsilon", "must lie in [0,1]"));
        }
        for cell in self.cells() {
            self.sim_config(&cell, self.seed).validate()?;
        }
        Ok(())
    }

    /// Grid cells ordered by composer, density, length, mobility.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &composer in &self.composers {
            for &density in &self.densities {
                for &length in &self.lengths {
                    for &mobility in &self.mobilities {
                        out.push(Cell { composer, density, length, mobility });
                    }
                }
            }
        }
        out
    }

    pub fn sim_config(&self, cell: &Cell, seed: u64) -> SimConfig {
        SimConfig {
            density: cell.density.0,
            chain_length: cell.length.0,
            mobility: cell.mobility.band(),
            deadline: self.deadline,
            seed,
            ..self.sim.clone()
        }
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.replications as u64).map(move |r| self.seed.wrapping_add(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_has_54_cells() {
        assert_eq!(ExperimentConfig::default().cells().len(), 54);
    }

    #[test]
    fn labels_parse_back() {
        for m in [Mobility::Static, Mobility::Slow, Mobility::Medium, Mobility::Fast] {
            assert_eq!(m.label().parse::<Mobility>().unwrap(), m);
        }
        for d in Density::GRID {
            assert_eq!(d.label().parse::<Density>().unwrap(), d);
        }
        assert_eq!("CL-10".parse::<ChainLength>().unwrap(), ChainLength(10));
        assert_eq!("coopc".parse::<ComposerKind>().unwrap(), ComposerKind::Coopc);
    }

    #[test]
    fn invalid_values_name_their_key() {
        let cfg = ExperimentConfig { replications: 0, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig { key, .. }) if key == "replications"));
        let cfg = ExperimentConfig { lengths: vec![ChainLength(11)], ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig { key, .. }) if key == "lengths"));
        assert!(matches!("SD-0".parse::<Density>(), Err(Error::InvalidConfig { key, .. }) if key == "density"));
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn config_file_overrides_fields() {
        let cfg = ExperimentConfig::from_json(r#"{"replications": 3, "mobilities": ["M-F"], "sim": {"radio_range": 120.0}}"#).unwrap();
        assert_eq!(cfg.replications, 3);
        assert_eq!(cfg.mobilities, vec![Mobility::Fast]);
        assert_eq!(cfg.sim.radio_range, 120.0);
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
