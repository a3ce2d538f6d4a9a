//! Simulation configuration file (TOML).
//!
//! ```toml
//! schema_version = 1
//! config_id = "mub67-k4-d4"
//! seed = 20240601
//!
//! [dictionary]
//! prime = 67            # or: path = "dict.txt"
//! sections = 4          # or: section_sizes = [1024, 1024, 1024, 1024]
//!
//! [channel]
//! antennas = 4
//! sigma_h_sq = 0.25     # optional, default 1/D
//!
//! [sweep]
//! ebn0_db = [4.0, 6.0, 8.0]
//! max_trials = 10000
//! min_errors = 200
//! batch = 64           # trials per parallel batch
//!
//! [[decoder]]
//! kind = "mlmp"         # mlmp | bomp | mbomp | samp | bruteforce
//! paths = 8
//!
//! [[decoder]]
//! kind = "samp"
//! se = "online"         # offline | online
//! iterations = 50       # optional: force this many iterations
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dictionary::{build_mub_prime, load_dictionary, Dictionary, SectionPlan};
use crate::error::{Error, Result};
use crate::samp::{SeMode, DEFAULT_REL_TOL, DEFAULT_SE_DRAWS, DEFAULT_T_MAX};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionarySource {
    /// Generate the prime-dimension MUB dictionary of this size.
    #[serde(default)]
    pub prime: Option<usize>,
    /// Load a dictionary file instead.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Number of sections `K`, partitioned greedily.
    #[serde(default)]
    pub sections: Option<usize>,
    /// Explicit power-of-two section sizes.
    #[serde(default)]
    pub section_sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub antennas: usize,
    /// Defaults to `1 / D` (unit array gain).
    #[serde(default)]
    pub sigma_h_sq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub ebn0_db: Vec<f64>,
    #[serde(default = "default_max_trials")]
    pub max_trials: u64,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    /// Trials decoded in parallel between stop-rule checks.
    #[serde(default = "default_batch")]
    pub batch: usize,
}

fn default_batch() -> usize {
    64
}

fn default_max_trials() -> u64 {
    10_000
}

fn default_min_errors() -> u64 {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Mlmp,
    Bomp,
    Mbomp,
    Samp,
    Bruteforce,
}

impl DecoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DecoderKind::Mlmp => "mlmp",
            DecoderKind::Bomp => "bomp",
            DecoderKind::Mbomp => "mbomp",
            DecoderKind::Samp => "samp",
            DecoderKind::Bruteforce => "bruteforce",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeModeConfig {
    Offline,
    Online,
}

impl From<SeModeConfig> for SeMode {
    fn from(m: SeModeConfig) -> Self {
        match m {
            SeModeConfig::Offline => SeMode::Offline,
            SeModeConfig::Online => SeMode::Online,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSpec {
    pub kind: DecoderKind,
    /// Label used in the output; derived from the settings when absent.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "one")]
    pub paths: usize,
    #[serde(default = "default_se")]
    pub se: SeModeConfig,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default = "default_se_draws")]
    pub se_draws: usize,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn one() -> usize {
    1
}

fn default_se() -> SeModeConfig {
    SeModeConfig::Offline
}

fn default_se_draws() -> usize {
    DEFAULT_SE_DRAWS
}

fn default_t_max() -> usize {
    DEFAULT_T_MAX
}

fn default_rel_tol() -> f64 {
    DEFAULT_REL_TOL
}

impl DecoderSpec {
    pub fn new(kind: DecoderKind) -> Self {
        Self {
            kind,
            name: None,
            paths: 1,
            se: default_se(),
            iterations: None,
            se_draws: DEFAULT_SE_DRAWS,
            t_max: DEFAULT_T_MAX,
            rel_tol: DEFAULT_REL_TOL,
        }
    }

    pub fn with_paths(mut self, paths: usize) -> Self {
        self.paths = paths;
        self
    }

    pub fn with_se(mut self, se: SeModeConfig) -> Self {
        self.se = se;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = Some(iterations);
        self
    }

    pub fn label(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        match self.kind {
            DecoderKind::Samp => {
                let mode = match self.se {
                    SeModeConfig::Offline => "offline",
                    SeModeConfig::Online => "online",
                };
                match self.iterations {
                    Some(it) => format!("samp-{mode}-{it}it"),
                    None => format!("samp-{mode}"),
                }
            }
            DecoderKind::Bruteforce => "bruteforce".into(),
            kind => format!("{}-p{}", kind.as_str(), self.paths),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::Config(format!("decoder {}: paths must be >= 1", self.label())));
        }
        if self.kind == DecoderKind::Samp {
            if self.t_max == 0 || self.se_draws == 0 || !(self.rel_tol > 0.0) {
                return Err(Error::Config(format!(
                    "decoder {}: need t_max >= 1, se_draws >= 1, rel_tol > 0",
                    self.label()
                )));
            }
            if self.iterations == Some(0) {
                return Err(Error::Config(format!("decoder {}: iterations must be >= 1", self.label())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub schema_version: u32,
    pub config_id: String,
    #[serde(default)]
    pub seed: u64,
    pub dictionary: DictionarySource,
    pub channel: ChannelConfig,
    pub sweep: SweepConfig,
    #[serde(rename = "decoder")]
    pub decoders: Vec<DecoderSpec>,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative dictionary path is resolved against
    /// the config file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(dict_path), Some(dir)) = (&cfg.dictionary.path, path.parent()) {
            if dict_path.is_relative() {
                cfg.dictionary.path = Some(dir.join(dict_path));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let d = &self.dictionary;
        if d.prime.is_some() == d.path.is_some() {
            return Err(Error::Config("dictionary needs exactly one of `prime` or `path`".into()));
        }
        if d.sections.is_some() == d.section_sizes.is_some() {
            return Err(Error::Config(
                "dictionary needs exactly one of `sections` or `section_sizes`".into(),
            ));
        }
        if self.channel.antennas == 0 {
            return Err(Error::Config("antennas must be >= 1".into()));
        }
        if let Some(s) = self.channel.sigma_h_sq {
            if !(s > 0.0) {
                return Err(Error::Config("sigma_h_sq must be positive".into()));
            }
        }
        if self.sweep.ebn0_db.is_empty() || self.sweep.ebn0_db.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("ebn0_db must be a non-empty list of finite values".into()));
        }
        if self.sweep.max_trials == 0 || self.sweep.batch == 0 {
            return Err(Error::Config("max_trials and batch must be >= 1".into()));
        }
        if self.decoders.is_empty() {
            return Err(Error::Config("at least one [[decoder]] is required".into()));
        }
        let mut labels: Vec<String> = self.decoders.iter().map(DecoderSpec::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("decoder labels must be unique; set `name`".into()));
        }
        self.decoders.iter().try_for_each(DecoderSpec::validate)
    }

    pub fn sigma_h_sq(&self) -> f64 {
        self.channel
            .sigma_h_sq
            .unwrap_or(1.0 / self.channel.antennas as f64)
    }

    /// Builds or loads the dictionary and applies the section plan.
    pub fn build_dictionary(&self) -> Result<Dictionary> {
        let d = &self.dictionary;
        let base = match (&d.prime, &d.path) {
            (Some(p), None) => build_mub_prime(*p)?,
            (None, Some(path)) => load_dictionary(path)?,
            _ => return Err(Error::Config("dictionary needs exactly one of `prime` or `path`".into())),
        };
        match (&d.sections, &d.section_sizes) {
            (Some(k), None) => base.partitioned(*k),
            (None, Some(sizes)) => base.with_sections(&SectionPlan::from_sizes(sizes.clone())?),
            _ => Err(Error::Config("dictionary needs exactly one of `sections` or `section_sizes`".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
schema_version = 1
config_id = "t"
seed = 7
[dictionary]
prime = 13
sections = 2
[channel]
antennas = 4
[sweep]
ebn0_db = [0.0, 4.0]
[[decoder]]
kind = "mlmp"
paths = 4
[[decoder]]
kind = "samp"
se = "online"
iterations = 50
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = SimConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(cfg.sigma_h_sq(), 0.25);
        assert_eq!(cfg.sweep.max_trials, 10_000);
        assert_eq!(cfg.sweep.min_errors, 200);
        assert_eq!(cfg.decoders[0].label(), "mlmp-p4");
        assert_eq!(cfg.decoders[1].label(), "samp-online-50it");
        let dict = cfg.build_dictionary().unwrap();
        assert_eq!(dict.section_sizes(), vec![64, 64]);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            EXAMPLE.replace("schema_version = 1", "schema_version = 2"),
            EXAMPLE.replace("prime = 13", "prime = 13\npath = \"x\""),
            EXAMPLE.replace("ebn0_db = [0.0, 4.0]", "ebn0_db = []"),
            EXAMPLE.replace("paths = 4", "paths = 0"),
            EXAMPLE.replace("antennas = 4", "antennas = 4\nbogus = 1"),
            EXAMPLE.replace("kind = \"mlmp\"", "kind = \"viterbi\""),
            EXAMPLE.replace("paths = 4", "paths = 1\nname = \"samp-online-50it\""),
        ];
        for text in bad {
            let err = SimConfig::from_toml_str(&text).unwrap_err();
            assert!(err.is_config(), "{err}");
        }
    }
}
