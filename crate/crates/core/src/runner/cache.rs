use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evaluation::MetricsReport;
use crate::objective::Checkpoint;

/// Identity of one training run. Equal keys give bit-identical outcomes.
///
/// `config_hash` covers everything else that influences training: trainer
/// settings, feature mask, objective spec, dataset content and CV plan.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub config_hash: String,
    pub fold: usize,
    pub seed: u64,
    pub epochs: u32,
}

impl CacheKey {
    /// File stem `{config_hash}-f{fold}-s{seed}-e{epochs}`.
    pub fn stem(&self) -> String {
        format!("{}-f{}-s{}-e{}", self.config_hash, self.fold, self.seed, self.epochs)
    }

    fn at_epochs(&self, epochs: u32) -> CacheKey {
        CacheKey { epochs, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedOutcome {
    pub objective: f64,
    pub report: MetricsReport,
}

/// Outcome and checkpoint store: `<stem>.json` holds the scored outcome,
/// `<stem>.ckpt` the training state for resumption. Safe to share between
/// workers.
pub struct CheckpointCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<CacheKey, CachedOutcome>>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp-{:?}", std::thread::current().id()).replace(['(', ')'], ""));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl CheckpointCache {
    pub fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self {
            dir,
            memory: Mutex::new(HashMap::new()),
        })
    }

    pub fn disabled() -> Self {
        Self {
            dir: None,
            memory: Mutex::new(HashMap::new()),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.dir.is_some()
    }

    fn path(&self, key: &CacheKey, ext: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}.{ext}", key.stem())))
    }

    pub fn get(&self, key: &CacheKey) -> Option<CachedOutcome> {
        self.dir.as_ref()?;
        if let Some(hit) = self.memory.lock().expect("cache lock").get(key) {
            return Some(hit.clone());
        }
        let text = fs::read(self.path(key, "json")?).ok()?;
        let outcome: CachedOutcome = serde_json::from_slice(&text).ok()?;
        self.memory
            .lock()
            .expect("cache lock")
            .insert(key.clone(), outcome.clone());
        Some(outcome)
    }

    pub fn put(&self, key: &CacheKey, outcome: &CachedOutcome, checkpoint: Option<&Checkpoint>) -> Result<()> {
        let Some(json_path) = self.path(key, "json") else {
            return Ok(());
        };
        if let Some(c) = checkpoint {
            write_atomic(&self.path(key, "ckpt").expect("enabled"), &c.to_bytes())?;
        }
        write_atomic(&json_path, &serde_json::to_vec(outcome)?)?;
        self.memory
            .lock()
            .expect("cache lock")
            .insert(key.clone(), outcome.clone());
        Ok(())
    }

    /// The checkpoint with the most epochs below `key.epochs`, if any.
    pub fn latest_checkpoint_below(&self, key: &CacheKey) -> Option<Checkpoint> {
        self.dir.as_ref()?;
        (1..key.epochs).rev().find_map(|e| {
            let bytes = fs::read(self.path(&key.at_epochs(e), "ckpt")?).ok()?;
            Checkpoint::from_bytes(&bytes).ok()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{binary_metrics, MetricsReport};
    use crate::objective::Network;

    fn report() -> MetricsReport {
        let mut r = binary_metrics(&[true, false, true], &[true, false, false]).unwrap();
        r.auc = Some(0.1 + 0.2);
        r
    }

    #[test]
    fn stores_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CheckpointCache::new(Some(dir.path().to_path_buf())).unwrap();
        let key = CacheKey {
            config_hash: "abc".into(),
            fold: 1,
            seed: 9,
            epochs: 3,
        };
        assert!(cache.get(&key).is_none());
        let outcome = CachedOutcome {
            objective: -1.0 / 3.0,
            report: report(),
        };
        let mut ckpt = Checkpoint::fresh(Network::new(2, 3, 1, 0).unwrap());
        ckpt.epochs = 3;
        cache.put(&key, &outcome, Some(&ckpt)).unwrap();
        assert!(dir.path().join("abc-f1-s9-e3.json").is_file());

        // a fresh handle reads back from disk, bit-exact
        let reopened = CheckpointCache::new(Some(dir.path().to_path_buf())).unwrap();
        assert_eq!(reopened.get(&key).unwrap(), outcome);
        let later = CacheKey { epochs: 9, ..key.clone() };
        assert_eq!(reopened.latest_checkpoint_below(&later).unwrap(), ckpt);
        assert!(reopened.latest_checkpoint_below(&key).is_none());
    }

    #[test]
    fn disabled_cache_is_inert() {
        let cache = CheckpointCache::disabled();
        let key = CacheKey {
            config_hash: "x".into(),
            fold: 0,
            seed: 0,
            epochs: 1,
        };
        cache
            .put(&key, &CachedOutcome { objective: 0.0, report: report() }, None)
            .unwrap();
        assert!(cache.get(&key).is_none());
    }
}
