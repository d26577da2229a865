use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SynthShiftSpec;
use crate::eda::{AlphaRule, EdaParams};
use crate::error::{EdaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ELM_S")]
    ElmS,
    #[serde(rename = "ELM_T")]
    ElmT,
    #[serde(rename = "ELM_ST")]
    ElmSt,
    #[serde(rename = "SS-ELM")]
    SsElm,
    /// EDA fed by the ridge-ELM pre-classifier.
    #[serde(rename = "EDA")]
    Eda,
    #[serde(rename = "EDA_lap")]
    EdaLap,
    #[serde(rename = "EDA_inv")]
    EdaInv,
    #[serde(rename = "EDA_avg")]
    EdaAvg,
    #[serde(rename = "MvEDA")]
    MvEda,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::ElmS,
        Method::ElmT,
        Method::ElmSt,
        Method::SsElm,
        Method::Eda,
        Method::EdaLap,
        Method::EdaInv,
        Method::EdaAvg,
        Method::MvEda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ElmS => "ELM_S",
            Method::ElmT => "ELM_T",
            Method::ElmSt => "ELM_ST",
            Method::SsElm => "SS-ELM",
            Method::Eda => "EDA",
            Method::EdaLap => "EDA_lap",
            Method::EdaInv => "EDA_inv",
            Method::EdaAvg => "EDA_avg",
            Method::MvEda => "MvEDA",
        }
    }

    /// Name used in human-readable reports.
    pub fn display_name(self) -> &'static str {
        match self {
            Method::SsElm => "SS-ELM (simplified)",
            other => other.name(),
        }
    }

    pub fn is_eda(self) -> bool {
        matches!(
            self,
            Method::Eda | Method::EdaLap | Method::EdaInv | Method::EdaAvg | Method::MvEda
        )
    }
}

impl std::str::FromStr for Method {
    type Err = EdaError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("SSELM") && *m == Method::SsElm))
            .ok_or_else(|| EdaError::UnknownMethod(s.to_string()))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Accuracy,
    Map,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    /// Regenerated for every seed; `spec.seed` is replaced by the run seed
    /// and the labeled-target count per class by `m`.
    Synthetic {
        #[serde(default)]
        spec: SynthShiftSpec,
        /// Noise features appended to build the second view for MvEDA.
        #[serde(default = "default_noise_dims")]
        noise_dims: usize,
        #[serde(default = "default_noise_std")]
        noise_std: f64,
    },
    /// Labeled target pool (`target_labeled ∪ target_test`) is resplit per
    /// seed into `m` labeled samples per class and a test set.
    Manifest { path: PathBuf },
}

fn default_noise_dims() -> usize {
    2
}

fn default_noise_std() -> f64 {
    1.0
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            spec: SynthShiftSpec::default(),
            noise_dims: default_noise_dims(),
            noise_std: default_noise_std(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub metric: Metric,
    pub seeds: Vec<u64>,
    /// Labeled target samples per class.
    pub m: usize,
    /// Candidate values for `C`, `C_S` and `C_T`.
    pub c_grid: Vec<f64>,
    /// Ridge `C` of the ELM baselines in the fixed-default column.
    pub default_c: f64,
    /// Ridge `C` of the ELM pre-classifier.
    pub pre_c: f64,
    /// Ridge of the kernel pre-classifiers.
    pub kernel_ridge: f64,
    /// Score EDA with `Θ⁻¹` applied.
    pub detransform: bool,
    pub alpha_rule: AlphaRule,
    pub params: EdaParams,
    pub data: DataSource,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: vec![
                Method::ElmS,
                Method::ElmT,
                Method::ElmSt,
                Method::SsElm,
                Method::Eda,
                Method::EdaAvg,
            ],
            metric: Metric::Accuracy,
            seeds: (0..5).collect(),
            m: 3,
            c_grid: vec![1.0, 10.0, 100.0, 1000.0, 10000.0],
            default_c: 100.0,
            pre_c: 10.0,
            kernel_ridge: 1.0,
            detransform: false,
            alpha_rule: AlphaRule::default(),
            params: EdaParams::default(),
            data: DataSource::default(),
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| EdaError::Serde(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| EdaError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // Manifest paths in a config are relative to the config file.
        if let DataSource::Manifest { path: p } = &mut cfg.data {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| EdaError::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.methods.is_empty() || self.seeds.is_empty() || self.c_grid.is_empty() {
            return Err(EdaError::Parameter("methods, seeds and c_grid must be non-empty".into()));
        }
        if self.m == 0 {
            return Err(EdaError::Parameter("m must be at least 1".into()));
        }
        if self.c_grid.iter().chain([&self.default_c, &self.pre_c, &self.kernel_ridge]).any(|&c| !(c > 0.0)) {
            return Err(EdaError::Parameter("all C values and ridges must be positive".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical TOML form; stable across runs.
    pub fn hash(&self) -> Result<String> {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!(matches!("SVM".parse::<Method>(), Err(EdaError::UnknownMethod(_))));
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = BenchConfig::default();
        let back = BenchConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg = BenchConfig::from_toml("methods = [\"ELM_S\", \"EDA\"]\nseeds = [3]\n[params]\nhidden = 50\n").unwrap();
        assert_eq!(cfg.methods, vec![Method::ElmS, Method::Eda]);
        assert_eq!(cfg.params.hidden, 50);
        assert_eq!(cfg.params.tau, 1000.0);
        assert_eq!(cfg.c_grid, vec![1.0, 10.0, 100.0, 1000.0, 10000.0]);
    }

    #[test]
    fn unknown_method_in_config() {
        assert!(BenchConfig::from_toml("methods = [\"A-MKL\"]").is_err());
    }
}
