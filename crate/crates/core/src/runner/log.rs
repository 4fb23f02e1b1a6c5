use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evaluation::MetricsReport;
use crate::search_space::Configuration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Search,
    Final,
}

/// One training (or benchmark evaluation) in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Monotone, gap-free within a run.
    pub trial_id: u64,
    pub phase: Phase,
    /// Serial of the evaluated candidate; its folds share it.
    pub candidate: u64,
    /// Final-phase repetition index.
    pub repeat: Option<usize>,
    pub genotype: Option<Vec<f64>>,
    pub config: Configuration,
    /// Feature mask as a bit string, when one is searched.
    pub mask: Option<String>,
    pub fold: Option<usize>,
    pub seed: u64,
    /// Epochs (training budget).
    pub budget: u32,
    pub duration_ms: u64,
    pub metrics: Option<MetricsReport>,
    /// Scalar objective; absent when the evaluation failed.
    pub objective: Option<f64>,
    pub cache_hit: bool,
    pub error: Option<String>,
}

/// Append-only line-delimited JSON log, flushed after every batch.
pub struct TrialLog {
    out: BufWriter<File>,
    next_id: u64,
}

impl TrialLog {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
            next_id: 0,
        })
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// Assigns the next trial id and appends the record.
    pub fn append(&mut self, mut record: TrialRecord) -> Result<u64> {
        record.trial_id = self.next_id;
        self.next_id += 1;
        serde_json::to_writer(&mut self.out, &record)?;
        self.out.write_all(b"\n")?;
        Ok(record.trial_id)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> TrialRecord {
        TrialRecord {
            trial_id: 99,
            phase: Phase::Search,
            candidate: 0,
            repeat: None,
            genotype: Some(vec![0.5]),
            config: Configuration::default(),
            mask: None,
            fold: Some(0),
            seed: 1,
            budget: 3,
            duration_ms: 5,
            metrics: None,
            objective: None,
            cache_hit: false,
            error: Some("diverged".into()),
        }
    }

    #[test]
    fn ids_are_gap_free() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.jsonl");
        let mut log = TrialLog::create(&path).unwrap();
        for _ in 0..3 {
            log.append(record()).unwrap();
        }
        log.flush().unwrap();
        let back = read_trials(&path).unwrap();
        assert_eq!(back.iter().map(|r| r.trial_id).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(back[0].error.as_deref(), Some("diverged"));
    }
}
