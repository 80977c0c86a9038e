//! On-disk feature cache keyed by audio content and extraction settings.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{decode_feature_cache, encode_feature_cache, FeatureMatrix};

/// Environment variable naming the cache directory.
pub const CACHE_DIR_ENV: &str = "CQCC_CACHE_DIR";

#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    /// Cache rooted at `$CQCC_CACHE_DIR`, if set and non-empty.
    pub fn from_env() -> Result<Option<Self>> {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => Self::new(PathBuf::from(d)).map(Some),
            _ => Ok(None),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(content: &[u8], settings: &str) -> String {
        let mut h = Sha256::new();
        h.update((content.len() as u64).to_le_bytes());
        h.update(content);
        h.update(settings.as_bytes());
        hex::encode(h.finalize())
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.feat"))
    }

    pub fn get(&self, key: &str, source_id: &str) -> Option<FeatureMatrix> {
        let path = self.entry_path(key);
        let bytes = fs::read(&path).ok()?;
        match decode_feature_cache(&bytes, source_id) {
            Ok(f) => Some(f),
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {}: {e}", path.display());
                None
            }
        }
    }

    /// Written through a temporary file so concurrent readers never see a partial entry.
    pub fn put(&self, key: &str, feats: &FeatureMatrix) -> Result<()> {
        let path = self.entry_path(key);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        tmp.write_all(&encode_feature_cache(feats))
            .map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }

    /// Look up `key`, computing and storing the features on a miss.
    /// A failed store is logged, not returned.
    pub fn get_or_compute(
        cache: Option<&Self>,
        key: impl FnOnce() -> String,
        source_id: &str,
        compute: impl FnOnce() -> Result<FeatureMatrix>,
    ) -> Result<FeatureMatrix> {
        let Some(cache) = cache else {
            return compute();
        };
        let key = key();
        if let Some(f) = cache.get(&key, source_id) {
            return Ok(f);
        }
        let feats = compute()?;
        if let Err(e) = cache.put(&key, &feats) {
            log::warn!("could not write feature cache: {e}");
        }
        Ok(feats)
    }
}
