//! TOML run configuration. Every key is optional; defaults give 16 kHz input,
//! delta and double-delta CQCCs without normalization, and 2048 Gaussians.
//!
//! ```toml
//! seed = 0
//! sample_rate = 16000
//!
//! [cqt]
//! bins_per_octave = 96
//! # f_min, f_max and hop default to Nyquist/512, Nyquist and 10 ms
//!
//! [features]
//! variant = "d+dd"
//! cmvn = false
//! num_ceps = 29
//! resample_period = 16
//!
//! [gmm]
//! components = 2048
//! em_iters = 10
//!
//! [paths]
//! nat = "train_nat.tsv"
//! artif = "train_artif.tsv"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cqt::CqtConfig;
use crate::detector::FeatureConfig;
use crate::error::{Error, Result};
use crate::features::CqccConfig;
use crate::gmm::GmmTrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub sample_rate: u32,
    pub cqt: CqtSection,
    pub features: FeatureSection,
    pub gmm: GmmSection,
    pub paths: PathSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CqtSection {
    pub bins_per_octave: u32,
    pub f_min: Option<f64>,
    pub f_max: Option<f64>,
    pub hop: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub variant: String,
    pub cmvn: bool,
    pub num_ceps: usize,
    pub resample_period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmSection {
    pub components: usize,
    pub em_iters: usize,
    pub variance_floor_factor: f64,
    pub convergence_tol: f64,
}

/// Manifest locations; relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSection {
    pub nat: Option<PathBuf>,
    pub artif: Option<PathBuf>,
    pub eval: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sample_rate: 16_000,
            cqt: CqtSection::default(),
            features: FeatureSection::default(),
            gmm: GmmSection::default(),
            paths: PathSection::default(),
        }
    }
}

impl Default for CqtSection {
    fn default() -> Self {
        Self {
            bins_per_octave: 96,
            f_min: None,
            f_max: None,
            hop: None,
        }
    }
}

impl Default for FeatureSection {
    fn default() -> Self {
        let d = CqccConfig::default();
        Self {
            variant: d.variant_name(),
            cmvn: d.apply_cmvn,
            num_ceps: d.num_ceps,
            resample_period: d.resample_period,
        }
    }
}

impl Default for GmmSection {
    fn default() -> Self {
        let d = GmmTrainConfig::default();
        Self {
            components: d.target_components,
            em_iters: d.em_iters_per_stage,
            variance_floor_factor: d.variance_floor_factor,
            convergence_tol: d.convergence_tol,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| e.in_file(path))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for p in [&mut cfg.paths.nat, &mut cfg.paths.artif, &mut cfg.paths.eval]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn feature_config(&self) -> Result<FeatureConfig> {
        let defaults = CqtConfig::default_for_rate(self.sample_rate.max(1));
        let cqt = CqtConfig {
            bins_per_octave: self.cqt.bins_per_octave,
            f_max: self.cqt.f_max.unwrap_or(defaults.f_max),
            f_min: self
                .cqt
                .f_min
                .unwrap_or_else(|| self.cqt.f_max.unwrap_or(defaults.f_max) / 512.0),
            hop: self.cqt.hop.unwrap_or(defaults.hop),
        };
        let cqcc = CqccConfig {
            num_ceps: self.features.num_ceps,
            resample_period: self.features.resample_period,
            ..CqccConfig::from_variant(&self.features.variant, self.features.cmvn)?
        };
        let cfg = FeatureConfig {
            sample_rate: self.sample_rate,
            cqt,
            cqcc,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn gmm_config(&self) -> Result<GmmTrainConfig> {
        let cfg = GmmTrainConfig {
            target_components: self.gmm.components,
            em_iters_per_stage: self.gmm.em_iters,
            variance_floor_factor: self.gmm.variance_floor_factor,
            seed: self.seed,
            convergence_tol: self.gmm.convergence_tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Single-line JSON for audit headers.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let fc = cfg.feature_config().unwrap();
        assert_eq!(fc.dim(), 58);
        assert_eq!(fc.cqt, CqtConfig::default_for_rate(16_000));
        let g = cfg.gmm_config().unwrap();
        assert_eq!(g.target_components, 2048);
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = RunConfig::from_toml_str(
            r#"
            seed = 7
            sample_rate = 8000
            [cqt]
            bins_per_octave = 24
            f_min = 125.0
            [features]
            variant = "full"
            cmvn = true
            [gmm]
            components = 64
            "#,
        )
        .unwrap();
        let fc = cfg.feature_config().unwrap();
        assert_eq!(fc.dim(), 90);
        assert!(fc.cqcc.apply_cmvn);
        assert_eq!(fc.cqt.f_max, 4000.0);
        assert_eq!(fc.cqt.f_min, 125.0);
        assert_eq!(fc.cqt.hop, 80);
        let g = cfg.gmm_config().unwrap();
        assert_eq!((g.seed, g.target_components), (7, 64));
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        assert!(matches!(RunConfig::from_toml_str("sede = 1"), Err(Error::InvalidConfig(_))));
        let bad_variant = RunConfig::from_toml_str("[features]\nvariant = \"x+y\"").unwrap();
        assert!(bad_variant.feature_config().is_err());
        let bad_rate = RunConfig::from_toml_str("sample_rate = 8000\n[cqt]\nf_max = 8000.0").unwrap();
        assert!(bad_rate.feature_config().is_err());
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        fs::write(&p, "[paths]\nnat = \"n.tsv\"\nartif = \"/abs/a.tsv\"\n").unwrap();
        let cfg = RunConfig::load(&p).unwrap();
        assert_eq!(cfg.paths.nat.unwrap(), dir.path().join("n.tsv"));
        assert_eq!(cfg.paths.artif.unwrap(), PathBuf::from("/abs/a.tsv"));
        assert!(cfg.paths.eval.is_none());
    }
}
