//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, ArrayGeometry, UserGeometry};
use crate::constellation::{mode_dictionary, ModeDictionary};
use crate::entropy::McConfig;
use crate::error::{Error, Result};
use crate::optimizer::{ObjectiveKind, OptimizerConfig};
use crate::rate::{RateMethod, Receiver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    RsmaSic,
    RsmaSicfree,
    Sdma,
    Noma,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::RsmaSic => "rsma_sic",
            Scheme::RsmaSicfree => "rsma_sicfree",
            Scheme::Sdma => "sdma",
            Scheme::Noma => "noma",
        }
    }

    pub fn receiver(self) -> Receiver {
        match self {
            Scheme::RsmaSicfree => Receiver::SicFree,
            _ => Receiver::Sic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// Greedy pairing by channel similarity.
    Ordered,
    /// Seeded uniformly random pairing.
    Random,
}

impl Grouping {
    pub fn name(self) -> &'static str {
        match self {
            Grouping::Ordered => "ordered",
            Grouping::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DictionarySpec {
    Builtin {
        #[serde(rename = "K")]
        k: usize,
        r_max_bits: u32,
    },
    File {
        file: PathBuf,
    },
}

impl DictionarySpec {
    /// Relative file paths resolve against `base` (the config's directory).
    pub fn load(&self, base: Option<&Path>) -> Result<ModeDictionary> {
        match self {
            DictionarySpec::Builtin { k, r_max_bits } => mode_dictionary(*k, *r_max_bits),
            DictionarySpec::File { file } => {
                let path = match base {
                    Some(b) if file.is_relative() => b.join(file),
                    _ => file.clone(),
                };
                ModeDictionary::from_file(&path)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    #[serde(default)]
    pub theta_az: f64,
    #[serde(default)]
    pub theta_el: f64,
    pub kappa_db: f64,
}

/// Per-realization uniform angle draws replacing the fixed user angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleRanges {
    pub az: [f64; 2],
    #[serde(default)]
    pub el: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionGrid {
    pub w_min: f64,
    pub w_max: f64,
    pub points: usize,
}

impl Default for RegionGrid {
    fn default() -> Self {
        RegionGrid {
            w_min: -2.0,
            w_max: 2.0,
            points: 21,
        }
    }
}

impl RegionGrid {
    /// `(1, 10^w)` over the grid followed by the swapped pairs.
    pub fn weight_pairs(&self) -> Vec<[f64; 2]> {
        let ws: Vec<f64> = if self.points == 1 {
            vec![self.w_min]
        } else {
            (0..self.points)
                .map(|i| self.w_min + (self.w_max - self.w_min) * i as f64 / (self.points - 1) as f64)
                .collect()
        };
        let mut out: Vec<[f64; 2]> = ws.iter().map(|w| [1.0, 10f64.powf(*w)]).collect();
        out.extend(ws.iter().map(|w| [10f64.powf(*w), 1.0]));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: OneOrMany<Scheme>,
    #[serde(default = "default_objective")]
    pub objective: ObjectiveKind,
    /// Defaults to all ones.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub geometry: ArrayGeometry,
    pub users: Vec<UserConfig>,
    #[serde(default)]
    pub random_angles: Option<AngleRanges>,
    pub snr_db: Vec<f64>,
    pub dictionary: DictionarySpec,
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
    /// `p_t` is overwritten by each SNR point.
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub large_scale: bool,
    #[serde(default = "default_grouping")]
    pub grouping: OneOrMany<Grouping>,
    #[serde(default = "default_method")]
    pub method: RateMethod,
    #[serde(default)]
    pub mc: McConfig,
    /// Modes whose objective is within this of the best count as tied; the
    /// lowest index wins.
    #[serde(default = "default_tie")]
    pub mode_tie_tolerance: f64,
    #[serde(default)]
    pub rate_region: RegionGrid,
}

fn default_objective() -> ObjectiveKind {
    ObjectiveKind::Wsr
}

fn default_grouping() -> OneOrMany<Grouping> {
    OneOrMany::One(Grouping::Ordered)
}

fn default_method() -> RateMethod {
    RateMethod::Approx
}

fn default_tie() -> f64 {
    1e-4
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, what: &str| Err(Error::Config(format!("config key `{key}`: {what}")));
        if self.scheme.to_vec().is_empty() {
            return bad("scheme", "at least one scheme is required");
        }
        if self.realizations == 0 {
            return bad("realizations", "must be at least 1");
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_db", "must be a nonempty list of finite values");
        }
        if self.users.is_empty() {
            return bad("users", "at least one user is required");
        }
        if let Some(w) = &self.weights {
            if w.len() != self.users.len() || w.iter().any(|x| !(*x >= 0.0)) {
                return bad("weights", "one nonnegative weight per user");
            }
        }
        if self.grouping.to_vec().is_empty() {
            return bad("grouping", "at least one grouping is required");
        }
        if !(self.mode_tie_tolerance >= 0.0) {
            return bad("mode_tie_tolerance", "must be nonnegative");
        }
        if self.rate_region.points == 0 {
            return bad("rate_region.points", "must be positive");
        }
        self.geometry.validate()?;
        self.optimizer.validate().map_err(|e| Error::Config(format!("config key `optimizer`: {e}")))?;
        self.mc.validate()?;
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.users.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.weights.clone().unwrap_or_else(|| vec![1.0; self.k()])
    }

    pub fn schemes(&self) -> Vec<Scheme> {
        self.scheme.to_vec()
    }

    pub fn user_geometries(&self) -> Vec<UserGeometry> {
        self.users
            .iter()
            .map(|u| UserGeometry::new(u.theta_az, u.theta_el, db_to_linear(u.kappa_db)))
            .collect()
    }

    pub fn optimizer_for(&self, snr_db: f64, realization: u64) -> OptimizerConfig {
        OptimizerConfig {
            p_t: snr_to_power(snr_db),
            seed: self.optimizer.seed ^ self.seed.rotate_left(17) ^ realization,
            ..self.optimizer
        }
    }
}

/// With unit noise variance the power budget equals the linear SNR.
pub fn snr_to_power(snr_db: f64) -> f64 {
    db_to_linear(snr_db)
}
