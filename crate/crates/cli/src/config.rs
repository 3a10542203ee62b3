use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use ambihedge::econometrics::AttenuationConfig;
use ambihedge::elicitation::DEFAULT_DEPTH;
use ambihedge::estimate::EstimationConfig;
use ambihedge::pipeline::synthetic::StudySpec;
use ambihedge::pipeline::AnalysisConfig;
use ambihedge::simulate::{derive_seed, PopulationSpec};
use anyhow::Context;
use serde::{Deserialize, Serialize};

/// Everything a run can be configured with. Flags override the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Master seed; every stage seed is derived from it.
    pub seed: u64,
    pub out: PathBuf,
    /// Comma-separated sample filters for the regressions.
    pub filters: String,
    pub population: PopulationSpec,
    pub simulation: SimulationConfig,
    pub estimation: EstimationConfig,
    pub study: StudySpec,
    pub analysis: AnalysisConfig,
    pub attenuation: AttenuationConfig,
    pub service: ServiceConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            filters: String::new(),
            population: PopulationSpec::default(),
            simulation: SimulationConfig::default(),
            estimation: EstimationConfig::default(),
            study: StudySpec::default(),
            analysis: AnalysisConfig::default(),
            attenuation: AttenuationConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub depth: u32,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { depth: DEFAULT_DEPTH }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    /// Event log; relative paths resolve against `out`.
    pub log: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { addr: SocketAddr::from(([127, 0, 0, 1], 8080)), log: PathBuf::from("sessions.jsonl") }
    }
}

/// Stage seeds, fixed functions of the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub population: u64,
    pub panel: u64,
    pub study: u64,
    pub estimation: u64,
    pub attenuation: u64,
}

impl Seeds {
    pub fn derive(master: u64) -> Self {
        Self {
            master,
            population: derive_seed(master, &[0]),
            panel: derive_seed(master, &[1]),
            study: derive_seed(master, &[2]),
            estimation: derive_seed(master, &[3]),
            attenuation: derive_seed(master, &[4]),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Pushes the derived seeds into the stage configs.
    pub fn seeded(mut self) -> (Self, Seeds) {
        let seeds = Seeds::derive(self.seed);
        self.population.seed = seeds.population;
        self.estimation.seed = seeds.estimation;
        self.attenuation.seed = seeds.attenuation;
        (self, seeds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_keep_defaults() {
        let c: Config = toml::from_str("seed = 9\n[population]\ncount = 12\n[analysis]\nmode = \"extended\"\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.population.count, 12);
        assert_eq!(c.population.waves, PopulationSpec::default().waves);
        assert_eq!(c.analysis.mode, ambihedge::pipeline::ClassificationMode::Extended);
        assert_eq!(c.estimation, EstimationConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Config>("sed = 1\n").is_err());
    }

    #[test]
    fn default_config_round_trips() {
        let c = Config::default();
        assert_eq!(toml::from_str::<Config>(&toml::to_string(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn stage_seeds_differ_and_follow_the_master() {
        let s = Seeds::derive(5);
        let all = [s.population, s.panel, s.study, s.estimation, s.attenuation];
        for (i, a) in all.iter().enumerate() {
            assert!(all[i + 1..].iter().all(|b| a != b));
        }
        assert_eq!(Seeds::derive(5), s);
        assert_ne!(Seeds::derive(6).population, s.population);
    }
}
