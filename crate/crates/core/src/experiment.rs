//! Front-end variant by mixture-size grid: one training and evaluation per cell.
//!
//! Static cepstra are extracted once per utterance and every variant is built
//! from them; mixture sizes are taken as snapshots of a single splitting run,
//! which equals training each size on its own.

use rayon::prelude::*;

use crate::cache::FeatureCache;
use crate::detector::{collect_all, FeatureConfig};
use crate::error::{Error, Result};
use crate::features::{assemble_features, CqccConfig, FeatureMatrix};
use crate::gmm::{train_gmm, train_gmm_snapshots, DiagGmm, GmmTrainConfig};
use crate::manifest::Manifest;
use crate::matrix::Matrix;
use crate::metrics::{attack_averaged_eer, ScoreRecord, ScoreSet};

/// A front-end variant with or without utterance normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantSpec {
    pub name: String,
    pub cmvn: bool,
}

/// Parse `name[:raw|:cmvn]` items separated by commas, e.g. `d+dd,full:cmvn`.
pub fn parse_variants(list: &str) -> Result<Vec<VariantSpec>> {
    let specs = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (name, cmvn) = match item.split_once(':') {
                None => (item, false),
                Some((n, "raw")) => (n, false),
                Some((n, "cmvn")) => (n, true),
                Some((_, other)) => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown normalization '{other}' (expected raw or cmvn)"
                    )))
                }
            };
            let cfg = CqccConfig::from_variant(name, cmvn)?;
            Ok(VariantSpec {
                name: cfg.variant_name(),
                cmvn,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if specs.is_empty() {
        return Err(Error::InvalidConfig("no variants given".into()));
    }
    Ok(specs)
}

/// Comma-separated powers of two.
pub fn parse_gaussians(list: &str) -> Result<Vec<usize>> {
    let sizes = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .ok()
                .filter(|c| c.is_power_of_two())
                .ok_or_else(|| Error::InvalidConfig(format!("'{s}' is not a power of two")))
        })
        .collect::<Result<Vec<_>>>()?;
    if sizes.is_empty() {
        return Err(Error::InvalidConfig("no Gaussian counts given".into()));
    }
    Ok(sizes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub variant: String,
    pub cmvn: bool,
    pub components: usize,
    /// Attack-averaged EER in percent, or the reason the cell failed.
    pub outcome: std::result::Result<f64, String>,
}

pub const GRID_HEADER: &str = "variant\tcmvn\tC\teer_percent\tstatus";

pub fn grid_tsv(rows: &[GridRow], preamble: &[String]) -> String {
    let mut out: String = preamble.iter().map(|l| format!("# {l}\n")).collect();
    out.push_str(GRID_HEADER);
    out.push('\n');
    for r in rows {
        let (eer, status) = match &r.outcome {
            Ok(e) => (e.to_string(), "ok".to_string()),
            Err(reason) => ("-".to_string(), format!("failed: {}", reason.replace(['\t', '\n'], " "))),
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{eer}\t{status}\n",
            r.variant, r.cmvn, r.components
        ));
    }
    out
}

/// Static cepstra (zeroth included) of one manifest.
pub struct StaticSet<'a> {
    pub manifest: &'a Manifest,
    pub cepstra: Vec<FeatureMatrix>,
}

impl<'a> StaticSet<'a> {
    pub fn extract(manifest: &'a Manifest, config: &FeatureConfig, cache: Option<&FeatureCache>) -> Result<Self> {
        manifest.require_non_empty()?;
        let cepstra = collect_all(
            manifest
                .entries
                .par_iter()
                .map(|e| config.file_static(&e.path, &e.utt_id, cache)),
        )?;
        Ok(Self { manifest, cepstra })
    }

    fn assemble(&self, cqcc: &CqccConfig) -> Result<Vec<FeatureMatrix>> {
        self.cepstra
            .par_iter()
            .map(|s| assemble_features(&s.frames, cqcc, &s.source_id))
            .collect()
    }
}

fn pooled(feats: &[FeatureMatrix]) -> Result<Matrix> {
    Matrix::vstack(feats.iter().map(|f| &f.frames)).ok_or(Error::EmptyFeatures)
}

/// One model per requested size; a failed size does not affect the others.
fn models_per_size(frames: &Matrix, gmm: &GmmTrainConfig, sizes: &[usize]) -> Vec<Result<DiagGmm>> {
    match train_gmm_snapshots(frames, gmm, sizes) {
        Ok(models) => models.into_iter().map(Ok).collect(),
        Err(_) => sizes
            .iter()
            .map(|&c| {
                train_gmm(
                    frames,
                    &GmmTrainConfig {
                        target_components: c,
                        ..gmm.clone()
                    },
                )
            })
            .collect(),
    }
}

fn evaluate(nat: &DiagGmm, artif: &DiagGmm, eval: &StaticSet, feats: &[FeatureMatrix]) -> Result<f64> {
    let llrs = feats
        .par_iter()
        .map(|f| Ok(nat.avg_log_likelihood(f)? - artif.avg_log_likelihood(f)?))
        .collect::<Result<Vec<f64>>>()?;
    let scores = ScoreSet {
        records: eval
            .manifest
            .entries
            .iter()
            .zip(llrs)
            .map(|(e, llr)| ScoreRecord {
                utt_id: e.utt_id.clone(),
                label: e.label,
                system_id: e.system_id.clone(),
                llr,
            })
            .collect(),
    };
    Ok(attack_averaged_eer(&scores)?.average_percent)
}

/// Train on `nat`/`artif` and evaluate on `eval` for every variant and size.
/// Rows follow variant order, then size order.
pub fn run_grid(
    nat: &StaticSet,
    artif: &StaticSet,
    eval: &StaticSet,
    base: &FeatureConfig,
    gmm: &GmmTrainConfig,
    variants: &[VariantSpec],
    sizes: &[usize],
) -> Vec<GridRow> {
    let mut rows = Vec::with_capacity(variants.len() * sizes.len());
    for v in variants {
        log::info!("grid: variant {} (cmvn={})", v.name, v.cmvn);
        let cells = variant_cells(nat, artif, eval, base, gmm, v, sizes);
        rows.extend(sizes.iter().zip(cells).map(|(&c, outcome)| GridRow {
            variant: v.name.clone(),
            cmvn: v.cmvn,
            components: c,
            outcome: outcome.map_err(|e| e.to_string()),
        }));
    }
    rows
}

fn variant_cells(
    nat: &StaticSet,
    artif: &StaticSet,
    eval: &StaticSet,
    base: &FeatureConfig,
    gmm: &GmmTrainConfig,
    v: &VariantSpec,
    sizes: &[usize],
) -> Vec<Result<f64>> {
    let prepared = (|| -> Result<_> {
        let cqcc = CqccConfig {
            num_ceps: base.cqcc.num_ceps,
            resample_period: base.cqcc.resample_period,
            ..CqccConfig::from_variant(&v.name, v.cmvn)?
        };
        let nat_frames = pooled(&nat.assemble(&cqcc)?)?;
        let artif_frames = pooled(&artif.assemble(&cqcc)?)?;
        let eval_feats = eval.assemble(&cqcc)?;
        Ok((nat_frames, artif_frames, eval_feats))
    })();
    let (nat_frames, artif_frames, eval_feats) = match prepared {
        Ok(p) => p,
        Err(e) => {
            let reason = e.to_string();
            return sizes.iter().map(|_| Err(Error::InvalidConfig(reason.clone()))).collect();
        }
    };
    let (nat_models, artif_models) = rayon::join(
        || models_per_size(&nat_frames, gmm, sizes),
        || models_per_size(&artif_frames, gmm, sizes),
    );
    nat_models
        .into_iter()
        .zip(artif_models)
        .map(|(n, a)| evaluate(&n?, &a?, eval, &eval_feats))
        .collect()
}
