//! Two-class GMM detector: one mixture for natural speech, one for artificial
//! speech, scored by the difference of average frame log-likelihoods.
//! Positive scores mean "more human-like".

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::{decode_wav, resample, AudioSignal};
use crate::cache::FeatureCache;
use crate::cqt::CqtConfig;
use crate::error::{Error, Result};
use crate::features::{extract_cqcc, static_cepstra, CqccConfig, FeatureMatrix, UniformGrid};
use crate::gmm::{train_gmm, DiagGmm, GmmTrainConfig};
use crate::manifest::Manifest;
use crate::matrix::Matrix;
use crate::metrics::{ScoreRecord, ScoreSet};
use crate::output::write_atomic;

pub const MODEL_FORMAT_VERSION: u64 = 1;

/// Everything that determines the feature pipeline. Audio at another rate is
/// resampled to `sample_rate` first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub cqt: CqtConfig,
    pub cqcc: CqccConfig,
}

impl FeatureConfig {
    pub fn for_rate(sample_rate: u32) -> Self {
        Self {
            sample_rate,
            cqt: CqtConfig::default_for_rate(sample_rate),
            cqcc: CqccConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidRate("sample rate must be positive".into()));
        }
        self.cqt.validate(self.sample_rate)?;
        self.cqcc.validate()?;
        let grid = self.grid();
        let needed = self.cqcc.num_ceps + 1;
        if grid.len < needed {
            return Err(Error::GridTooSmall {
                grid: grid.len,
                required: needed,
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.cqcc.dim()
    }

    pub fn grid(&self) -> UniformGrid {
        UniformGrid::for_config(&self.cqt, self.cqcc.resample_period)
    }

    /// Samples needed at `sample_rate` for one full-length kernel.
    pub fn min_samples(&self) -> usize {
        self.cqt.longest_window(self.sample_rate)
    }

    fn conform(&self, signal: &AudioSignal) -> Result<Option<AudioSignal>> {
        if signal.sample_rate() == self.sample_rate {
            Ok(None)
        } else {
            resample(signal, self.sample_rate).map(Some)
        }
    }

    pub fn extract(&self, signal: &AudioSignal, source_id: &str) -> Result<FeatureMatrix> {
        let resampled = self.conform(signal)?;
        let signal = resampled.as_ref().unwrap_or(signal);
        extract_cqcc(signal, &self.cqt, &self.cqcc, source_id)
    }

    /// Static cepstra including the zeroth coefficient, the shared input of
    /// every front-end variant with this `num_ceps`.
    pub fn extract_static(&self, signal: &AudioSignal, source_id: &str) -> Result<FeatureMatrix> {
        let resampled = self.conform(signal)?;
        let signal = resampled.as_ref().unwrap_or(signal);
        let m = static_cepstra(
            signal,
            &self.cqt,
            self.cqcc.num_ceps,
            true,
            self.cqcc.resample_period,
        )?;
        FeatureMatrix::new(m, source_id)
    }

    fn cache_settings(&self, kind: &str) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{kind}:{json}")
    }

    /// Features of one audio file, through the cache when one is given.
    pub fn file_features(
        &self,
        path: &Path,
        source_id: &str,
        cache: Option<&FeatureCache>,
    ) -> Result<FeatureMatrix> {
        self.file_features_with(path, source_id, cache, "cqcc", |sig| self.extract(sig, source_id))
    }

    /// Like [`FeatureConfig::file_features`] for [`FeatureConfig::extract_static`].
    pub fn file_static(
        &self,
        path: &Path,
        source_id: &str,
        cache: Option<&FeatureCache>,
    ) -> Result<FeatureMatrix> {
        let base = FeatureConfig {
            cqcc: CqccConfig {
                include_zeroth: true,
                use_static: true,
                use_delta: false,
                use_delta2: false,
                apply_cmvn: false,
                ..self.cqcc.clone()
            },
            ..self.clone()
        };
        base.file_features_with(path, source_id, cache, "static", |sig| {
            base.extract_static(sig, source_id)
        })
    }

    fn file_features_with(
        &self,
        path: &Path,
        source_id: &str,
        cache: Option<&FeatureCache>,
        kind: &str,
        compute: impl FnOnce(&AudioSignal) -> Result<FeatureMatrix>,
    ) -> Result<FeatureMatrix> {
        let run = || -> Result<FeatureMatrix> {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            FeatureCache::get_or_compute(
                cache,
                || FeatureCache::key(&bytes, &self.cache_settings(kind)),
                source_id,
                || compute(&decode_wav(&bytes)?),
            )
        };
        run().map_err(|e| e.in_file(path))
    }
}

/// Provenance of one class's training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSet {
    /// Manifest path as given on the command line, if training came from one.
    pub manifest: Option<String>,
    pub utterances: usize,
    pub frames: usize,
    /// SHA-256 of the newline-joined utterance ids, in training order.
    pub utt_id_digest: String,
}

impl TrainingSet {
    fn describe(feats: &[FeatureMatrix], manifest: Option<String>) -> Self {
        let mut h = Sha256::new();
        for f in feats {
            h.update(f.source_id.as_bytes());
            h.update(b"\n");
        }
        Self {
            manifest,
            utterances: feats.len(),
            frames: feats.iter().map(FeatureMatrix::num_frames).sum(),
            utt_id_digest: hex::encode(h.finalize()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMetadata {
    pub tool_version: String,
    pub seed: u64,
    pub gmm_config: GmmTrainConfig,
    pub nat_training: TrainingSet,
    pub artif_training: TrainingSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    feature_config: FeatureConfig,
    nat: DiagGmm,
    artif: DiagGmm,
    metadata: ModelMetadata,
}

/// On-disk layout; field order fixes the key order of the document.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format_version: u64,
    feature_config: FeatureConfig,
    grid: UniformGrid,
    nat: DiagGmm,
    artif: DiagGmm,
    metadata: ModelMetadata,
}

impl DetectorModel {
    pub fn new(
        feature_config: FeatureConfig,
        nat: DiagGmm,
        artif: DiagGmm,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        feature_config.validate()?;
        let dim = feature_config.dim();
        for g in [&nat, &artif] {
            if g.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: g.dim(),
                });
            }
        }
        Ok(Self {
            feature_config,
            nat,
            artif,
            metadata,
        })
    }

    /// Train both class models with the same GMM settings.
    pub fn train(
        feature_config: FeatureConfig,
        nat_feats: &[FeatureMatrix],
        artif_feats: &[FeatureMatrix],
        gmm_config: &GmmTrainConfig,
    ) -> Result<Self> {
        Self::train_labeled(feature_config, nat_feats, artif_feats, gmm_config, None, None)
    }

    fn train_labeled(
        feature_config: FeatureConfig,
        nat_feats: &[FeatureMatrix],
        artif_feats: &[FeatureMatrix],
        gmm_config: &GmmTrainConfig,
        nat_manifest: Option<String>,
        artif_manifest: Option<String>,
    ) -> Result<Self> {
        feature_config.validate()?;
        gmm_config.validate()?;
        let pool = |feats: &[FeatureMatrix]| -> Result<Matrix> {
            let dim = feature_config.dim();
            if let Some(bad) = feats.iter().find(|f| f.dim() != dim) {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: bad.dim(),
                });
            }
            Matrix::vstack(feats.iter().map(|f| &f.frames)).ok_or(Error::EmptyFeatures)
        };
        let nat_frames = pool(nat_feats)?;
        let artif_frames = pool(artif_feats)?;
        let (nat, artif) = rayon::join(
            || train_gmm(&nat_frames, gmm_config),
            || train_gmm(&artif_frames, gmm_config),
        );
        let metadata = ModelMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: gmm_config.seed,
            gmm_config: gmm_config.clone(),
            nat_training: TrainingSet::describe(nat_feats, nat_manifest),
            artif_training: TrainingSet::describe(artif_feats, artif_manifest),
        };
        Self::new(feature_config, nat?, artif?, metadata)
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.feature_config
    }

    pub fn nat(&self) -> &DiagGmm {
        &self.nat
    }

    pub fn artif(&self) -> &DiagGmm {
        &self.artif
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    /// Same model with the class mixtures exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            nat: self.artif.clone(),
            artif: self.nat.clone(),
            ..self.clone()
        }
    }

    /// Average-frame log-likelihood ratio, natural over artificial.
    pub fn llr(&self, feats: &FeatureMatrix) -> Result<f64> {
        if feats.dim() != self.feature_config.dim() {
            return Err(Error::DimMismatch {
                expected: self.feature_config.dim(),
                got: feats.dim(),
            });
        }
        let score = self.nat.avg_log_likelihood(feats)? - self.artif.avg_log_likelihood(feats)?;
        if !score.is_finite() {
            return Err(Error::Numerical(format!("non-finite score for {}", feats.source_id)));
        }
        Ok(score)
    }

    pub fn llr_signal(&self, signal: &AudioSignal, source_id: &str) -> Result<f64> {
        self.llr(&self.feature_config.extract(signal, source_id)?)
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            feature_config: self.feature_config.clone(),
            grid: self.feature_config.grid(),
            nat: self.nat.clone(),
            artif: self.artif.clone(),
            metadata: self.metadata.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let version = value
            .get("format_version")
            .ok_or_else(|| Error::Schema("missing format_version".into()))?
            .as_u64()
            .ok_or_else(|| Error::Schema("format_version is not an unsigned integer".into()))?;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let doc: ModelDocument =
            serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        if doc.grid != doc.feature_config.grid() {
            return Err(Error::Schema(
                "grid descriptor disagrees with the feature configuration".into(),
            ));
        }
        Self::new(doc.feature_config, doc.nat, doc.artif, doc.metadata)
            .map_err(|e| Error::Schema(e.to_string()))
    }

    /// Hex SHA-256 of the serialized model.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

pub fn save_model(model: &DetectorModel, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, model.to_json().as_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DetectorModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DetectorModel::from_json(&text).map_err(|e| e.in_file(path))
}

/// Extract features for every manifest row in order. All rows are attempted;
/// every failure is logged and the first one is returned.
pub fn manifest_features(
    manifest: &Manifest,
    config: &FeatureConfig,
    cache: Option<&FeatureCache>,
) -> Result<Vec<FeatureMatrix>> {
    collect_all(manifest.entries.par_iter().map(|e| config.file_features(&e.path, &e.utt_id, cache)))
}

pub(crate) fn collect_all<T: Send>(results: impl IndexedParallelIterator<Item = Result<T>>) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = results.collect();
    let failures = results.iter().filter(|r| r.is_err()).count();
    let mut out = Vec::with_capacity(results.len());
    let mut first = None;
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                log::error!("{e}");
                first.get_or_insert(e);
            }
        }
    }
    match first {
        Some(e) => {
            if failures > 1 {
                log::error!("{failures} files failed");
            }
            Err(e)
        }
        None => Ok(out),
    }
}

/// Train a detector from two manifests. Only the two training manifests are
/// ever read.
pub fn train_detector(
    nat_manifest: &Manifest,
    artif_manifest: &Manifest,
    feature_config: &FeatureConfig,
    gmm_config: &GmmTrainConfig,
    cache: Option<&FeatureCache>,
) -> Result<DetectorModel> {
    nat_manifest.require_non_empty()?;
    artif_manifest.require_non_empty()?;
    feature_config.validate()?;
    gmm_config.validate()?;
    let nat = manifest_features(nat_manifest, feature_config, cache)?;
    let artif = manifest_features(artif_manifest, feature_config, cache)?;
    DetectorModel::train_labeled(
        feature_config.clone(),
        &nat,
        &artif,
        gmm_config,
        Some(nat_manifest.source.display().to_string()),
        Some(artif_manifest.source.display().to_string()),
    )
}

/// Score every manifest row; records keep manifest order. Any failed file
/// fails the batch.
pub fn score_batch(
    model: &DetectorModel,
    manifest: &Manifest,
    cache: Option<&FeatureCache>,
) -> Result<ScoreSet> {
    manifest.require_non_empty()?;
    let llrs = collect_all(manifest.entries.par_iter().map(|e| {
        model
            .feature_config
            .file_features(&e.path, &e.utt_id, cache)
            .and_then(|f| model.llr(&f))
            .map_err(|err| err.in_file(&e.path))
    }))?;
    Ok(ScoreSet {
        records: manifest
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
    })
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use super::*;
    use proptest::prelude::*;
    use crate::audio::write_wav;
    use crate::manifest::parse_manifest;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Three octaves at 12 bins each; kernels are a few hundred samples.
    /// Static coefficients are kept so stationary test tones stay separable.
    fn small_config() -> FeatureConfig {
        FeatureConfig {
            sample_rate: 16_000,
            cqt: CqtConfig {
                bins_per_octave: 12,
                f_min: 1000.0,
                f_max: 8000.0,
                hop: 160,
            },
            cqcc: CqccConfig {
                num_ceps: 8,
                use_static: true,
                ..CqccConfig::default()
            },
        }
    }

    /// Two-dimensional static-only features so synthetic frames can stand in.
    fn tiny_config() -> FeatureConfig {
        FeatureConfig {
            cqcc: CqccConfig {
                num_ceps: 2,
                use_static: true,
                use_delta: false,
                use_delta2: false,
                ..CqccConfig::default()
            },
            ..small_config()
        }
    }

    fn cluster(center: f64, n: usize, seed: u64, id: &str) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let data = (0..2 * n).map(|_| center + noise.sample(&mut rng)).collect();
        FeatureMatrix::new(Matrix::from_vec(n, 2, data), id).unwrap()
    }

    fn gmm(c: usize) -> GmmTrainConfig {
        GmmTrainConfig {
            target_components: c,
            ..GmmTrainConfig::default()
        }
    }

    fn two_cluster_model() -> DetectorModel {
        static MODEL: OnceLock<DetectorModel> = OnceLock::new();
        MODEL
            .get_or_init(|| {
                let nat = [cluster(3.0, 400, 1, "n0"), cluster(3.0, 400, 2, "n1")];
                let artif = [cluster(-3.0, 400, 3, "a0")];
                DetectorModel::train(tiny_config(), &nat, &artif, &gmm(2)).unwrap()
            })
            .clone()
    }

    proptest! {
        #[test]
        fn swap_negates_exactly(center in -8.0f64..8.0, n in 1usize..60, seed in any::<u64>()) {
            let m = two_cluster_model();
            let f = cluster(center, n, seed, "u");
            prop_assert_eq!(m.swapped().llr(&f).unwrap(), -m.llr(&f).unwrap());
        }

        #[test]
        fn repeating_frames_leaves_score_unchanged(center in -8.0f64..8.0, n in 1usize..100, seed in any::<u64>()) {
            let m = two_cluster_model();
            let f = cluster(center, n, seed, "u");
            let doubled = FeatureMatrix::new(Matrix::vstack([&f.frames, &f.frames]).unwrap(), "u2").unwrap();
            prop_assert!((m.llr(&f).unwrap() - m.llr(&doubled).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn sign_follows_the_generating_class() {
        let m = two_cluster_model();
        assert!(m.llr(&cluster(3.0, 50, 10, "x")).unwrap() > 0.0);
        assert!(m.llr(&cluster(-3.0, 50, 11, "y")).unwrap() < 0.0);
    }

    #[test]
    fn identical_classes_score_zero() {
        let feats = [cluster(0.0, 300, 4, "n")];
        let m = DetectorModel::train(tiny_config(), &feats, &feats, &gmm(4)).unwrap();
        assert_eq!(m.llr(&cluster(1.0, 20, 5, "u")).unwrap(), 0.0);
    }

    #[test]
    fn single_component_matches_pooled_statistics() {
        let nat = [cluster(1.0, 100, 6, "a"), cluster(2.0, 50, 7, "b")];
        let m = DetectorModel::train(tiny_config(), &nat, &nat, &gmm(1)).unwrap();
        let pooled = Matrix::vstack(nat.iter().map(|f| &f.frames)).unwrap();
        let n = pooled.rows() as f64;
        for d in 0..2 {
            let mean = pooled.iter_rows().map(|r| r[d]).sum::<f64>() / n;
            let var = pooled.iter_rows().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n;
            assert!((m.nat().means().get(0, d) - mean).abs() < 1e-9);
            assert!((m.nat().variances().get(0, d) - var).abs() < 1e-9);
        }
        assert_eq!(m.metadata().nat_training.utterances, 2);
        assert_eq!(m.metadata().nat_training.frames, 150);
    }

    #[test]
    fn dimension_checked() {
        let m = two_cluster_model();
        let f = FeatureMatrix::new(Matrix::zeros(3, 5), "u").unwrap();
        assert!(matches!(m.llr(&f), Err(Error::DimMismatch { expected: 2, got: 5 })));
    }

    #[test]
    fn json_roundtrip_is_canonical() {
        let m = two_cluster_model();
        let text = m.to_json();
        let back = DetectorModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
        let f = cluster(0.3, 40, 13, "u");
        assert_eq!(back.llr(&f).unwrap().to_bits(), m.llr(&f).unwrap().to_bits());
        let keys: Vec<String> = serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(&text)
            .unwrap()
            .keys()
            .cloned()
            .collect();
        for k in ["format_version", "feature_config", "grid", "nat", "artif", "metadata"] {
            assert!(keys.iter().any(|x| x == k), "missing key {k}");
        }
    }

    #[test]
    fn json_rejections() {
        let text = two_cluster_model().to_json();
        let future = text.replacen("\"format_version\": 1", "\"format_version\": 99", 1);
        assert!(matches!(
            DetectorModel::from_json(&future),
            Err(Error::VersionMismatch { found: 99, expected: 1 })
        ));
        let truncated = &text[..text.len() / 2];
        assert!(matches!(DetectorModel::from_json(truncated), Err(Error::Schema(_))));
        let bad_grid = text.replacen("\"len\": ", "\"len\": 1", 1);
        assert!(matches!(DetectorModel::from_json(&bad_grid), Err(Error::Schema(_))));
    }

    fn tone(freq: f64, secs: f64, noise: f64, seed: u64) -> AudioSignal {
        let rate = 16_000.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, noise).unwrap();
        let samples = (0..(secs * rate) as usize)
            .map(|i| 0.3 * (2.0 * std::f64::consts::PI * freq * i as f64 / rate).sin() + n.sample(&mut rng))
            .collect();
        AudioSignal::new(samples, 16_000).unwrap()
    }

    /// Writes `name.tsv` listing one WAV per signal.
    fn write_manifest(dir: &Path, name: &str, rows: &[(&str, AudioSignal, &str)]) -> std::path::PathBuf {
        let mut text = String::from("utt_id\tpath\tlabel\tsystem_id\n");
        for (id, sig, sys) in rows {
            let file = format!("{id}.wav");
            write_wav(dir.join(&file), sig).unwrap();
            let label = if *sys == "-" { "bonafide" } else { "spoof" };
            text.push_str(&format!("{id}\t{file}\t{label}\t{sys}\n"));
        }
        let p = dir.join(format!("{name}.tsv"));
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn manifest_training_and_batch_scoring() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let nat = write_manifest(d, "nat", &[("n0", tone(2000.0, 0.5, 0.01, 1), "-"), ("n1", tone(2100.0, 0.5, 0.01, 2), "-")]);
        let artif = write_manifest(d, "artif", &[("s0", tone(5000.0, 0.5, 0.05, 3), "S1"), ("s1", tone(5200.0, 0.5, 0.05, 4), "S1")]);
        let eval = write_manifest(
            d,
            "eval",
            &[
                ("e0", tone(2050.0, 0.4, 0.01, 5), "-"),
                ("e1", tone(5100.0, 0.4, 0.05, 6), "S1"),
                ("e2", tone(1950.0, 0.4, 0.01, 7), "-"),
            ],
        );
        let (nat, artif, eval) = (
            parse_manifest(nat).unwrap(),
            parse_manifest(artif).unwrap(),
            parse_manifest(eval).unwrap(),
        );
        let model = train_detector(&nat, &artif, &small_config(), &gmm(4), None).unwrap();
        let scores = score_batch(&model, &eval, None).unwrap();
        let ids: Vec<&str> = scores.records.iter().map(|r| r.utt_id.as_str()).collect();
        assert_eq!(ids, ["e0", "e1", "e2"]);
        assert!(scores.records[0].llr > 0.0 && scores.records[2].llr > 0.0);
        assert!(scores.records[1].llr < 0.0);

        let cache = FeatureCache::new(d.join("cache")).unwrap();
        let cached = score_batch(&model, &eval, Some(&cache)).unwrap();
        let again = score_batch(&model, &eval, Some(&cache)).unwrap();
        assert_eq!(cached, scores);
        assert_eq!(again, scores);
        assert_eq!(fs::read_dir(cache.dir()).unwrap().count(), 3);

        let same = train_detector(&nat, &nat, &small_config(), &gmm(2), None).unwrap();
        assert!(score_batch(&same, &eval, None).unwrap().records.iter().all(|r| r.llr == 0.0));
    }

    #[test]
    fn missing_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let p = write_manifest(d, "nat", &[("n0", tone(2000.0, 0.5, 0.01, 1), "-")]);
        let mut m = parse_manifest(p).unwrap();
        m.entries[0].path = d.join("absent.wav");
        let err = train_detector(&m, &m, &small_config(), &gmm(1), None).unwrap_err();
        match err {
            Error::FileNotFound(p) => assert!(p.ends_with("absent.wav")),
            e => panic!("{e}"),
        }
        let empty = Manifest {
            source: "empty.tsv".into(),
            entries: vec![],
        };
        assert!(matches!(
            train_detector(&empty, &m, &small_config(), &gmm(1), None),
            Err(Error::EmptyManifest(_))
        ));
    }

    #[test]
    fn resamples_to_model_rate() {
        let cfg = small_config();
        let sig = tone(2000.0, 0.5, 0.0, 1);
        let up = resample(&sig, 22_050).unwrap();
        let a = cfg.extract(&sig, "a").unwrap();
        let b = cfg.extract(&up, "b").unwrap();
        assert_eq!(a.dim(), b.dim());
        assert!((a.num_frames() as i64 - b.num_frames() as i64).abs() <= 1);
    }
}
