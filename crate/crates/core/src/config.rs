//! Run configuration: a TOML file overlaid on a named preset.
//!
//! Unknown keys anywhere are errors. [`RunConfig::to_toml`] writes the fully
//! resolved configuration so every run can record exactly what it used.

use serde::{Deserialize, Serialize};

use crate::data::DataConfig;
use crate::error::{Error, Result};
use crate::fed::FedConfig;
use crate::recon::NetConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Small enough for a full search + train on one desktop in minutes.
    Desk,
    /// Round and epoch counts of the full-scale protocol.
    Paper,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Write a global checkpoint every this many rounds (0: final only).
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub net: NetConfig,
    pub fed: FedConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        let mut fed = FedConfig::default();
        let data = DataConfig { samples_per_client: 8, test_per_client: 4, ..DataConfig::default() };
        match p {
            Preset::Desk => {
                fed.search.rounds = 8;
                fed.search.local_epochs = 2;
                fed.train.rounds = 24;
                fed.train.local_epochs = 2;
            }
            Preset::Paper => {
                fed.search.rounds = 50;
                fed.search.local_epochs = 5;
                fed.train.rounds = 150;
                fed.train.local_epochs = 5;
            }
        }
        RunConfig { data, net: NetConfig::default(), fed, output: OutputConfig { checkpoint_every: 0 } }
    }

    /// Parses `text` as overrides on top of `preset`.
    pub fn from_toml(text: &str, preset: Preset) -> Result<Self> {
        let overrides: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut base = toml::Table::try_from(Self::preset(preset)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, overrides);
        let cfg: RunConfig =
            toml::Value::Table(base).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        self.fed.validate()?;
        if self.net.channels == 0 || self.net.nodes == 0 {
            return Err(Error::Config("net.channels and net.nodes must be ≥ 1".into()));
        }
        if self.data.samples_per_client < 2 {
            return Err(Error::Config("data.samples_per_client must be ≥ 2 (train + validation)".into()));
        }
        if !self.data.size.is_power_of_two() || self.data.size < 4 {
            return Err(Error::Config(format!("data.size must be a power of two ≥ 4, got {}", self.data.size)));
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_preset() {
        assert_eq!(RunConfig::from_toml("", Preset::Desk).unwrap(), RunConfig::preset(Preset::Desk));
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::from_toml("[fed.train]\ngamma = 0.5\n[data]\nsize = 16\n", Preset::Paper).unwrap();
        assert_eq!(cfg.fed.train.gamma, 0.5);
        assert_eq!(cfg.fed.train.rounds, 150);
        assert_eq!(RunConfig::from_toml(&cfg.to_toml(), Preset::Desk).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(RunConfig::from_toml("[fed]\ncolour = 1\n", Preset::Desk).is_err());
        assert!(RunConfig::from_toml("typo = 1\n", Preset::Desk).is_err());
        assert!(RunConfig::from_toml("[fed.train]\ngamma = 1.0\n", Preset::Desk).is_err());
        assert!(RunConfig::from_toml("[fed.search]\nbeta = -1.0\n", Preset::Desk).is_err());
        assert!(RunConfig::from_toml("[data]\nsize = 12\n", Preset::Desk).is_err());
        assert!(RunConfig::from_toml("not toml", Preset::Desk).is_err());
    }
}
