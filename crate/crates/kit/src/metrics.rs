//! Line-delimited JSON metrics log, one record per epoch.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub smoothed_loss: f64,
    pub acc_no_rotation: Option<f64>,
    pub acc_arbitrary_rotation: Option<f64>,
}

pub struct MetricsLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl MetricsLog {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self { path: path.into(), out: BufWriter::new(file) })
    }

    pub fn append(&mut self, rec: &EpochRecord) -> Result<()> {
        let line = serde_json::to_string(rec).expect("plain record serializes");
        writeln!(self.out, "{line}").and_then(|_| self.out.flush()).map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|source| Error::Checkpoint { path: path.into(), source }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.jsonl");
        let recs = vec![
            EpochRecord { epoch: 1, train_loss: 3.1, smoothed_loss: 3.1, acc_no_rotation: Some(0.25), acc_arbitrary_rotation: None },
            EpochRecord { epoch: 2, train_loss: 2.9, smoothed_loss: 2.9, acc_no_rotation: Some(0.5), acc_arbitrary_rotation: Some(0.1) },
        ];
        let mut log = MetricsLog::create(&path).unwrap();
        for r in &recs {
            log.append(r).unwrap();
        }
        drop(log);
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
        assert_eq!(read_metrics(&path).unwrap(), recs);
    }
}
