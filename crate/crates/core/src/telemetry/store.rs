//! Newline-delimited JSON stores, append-only and ordered by timestamp.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use log::warn;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::time::SimTime;

pub trait Timestamped {
    fn timestamp(&self) -> SimTime;
}

/// Single-writer handle over one store file. Readers may open the same path
/// concurrently through [`JsonlStore::read_path`].
#[derive(Debug)]
pub struct JsonlStore<T> {
    path: PathBuf,
    writer: BufWriter<File>,
    last: Option<SimTime>,
    _record: PhantomData<T>,
}

impl<T> JsonlStore<T>
where
    T: Serialize + DeserializeOwned + Timestamped,
{
    /// Opens (creating if needed) a store for appending.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let last = if path.exists() {
            Self::read_path(&path)?.last().map(Timestamped::timestamp)
        } else {
            None
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(JsonlStore {
            path,
            writer: BufWriter::new(file),
            last,
            _record: PhantomData,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends and flushes one record.
    pub fn append(&mut self, record: &T) -> Result<()> {
        self.write(record)?;
        self.flush()
    }

    pub fn append_all<'a>(&mut self, records: impl IntoIterator<Item = &'a T>) -> Result<()>
    where
        T: 'a,
    {
        for r in records {
            self.write(r)?;
        }
        self.flush()
    }

    /// Appends without flushing; call [`JsonlStore::flush`] before readers
    /// need the record.
    pub fn write_buffered(&mut self, record: &T) -> Result<()> {
        self.write(record)
    }

    fn write(&mut self, record: &T) -> Result<()> {
        let ts = record.timestamp();
        if let Some(last) = self.last {
            if ts < last {
                return Err(Error::InvalidArgument(format!(
                    "{}: record at {ts} precedes last record at {last}",
                    self.path.display()
                )));
            }
        }
        let line = serde_json::to_string(record)?;
        writeln!(self.writer, "{line}").map_err(|e| Error::io(&self.path, e))?;
        self.last = Some(ts);
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }

    /// Records with `from <= timestamp <= to`.
    pub fn read_range(&self, from: SimTime, to: SimTime) -> Result<Vec<T>> {
        read_range(&self.path, from, to)
    }

    /// Every well-formed record in a store file. Corrupt lines are skipped
    /// with a warning.
    pub fn read_path(path: &Path) -> Result<Vec<T>> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<T>(&line) {
                Ok(r) => out.push(r),
                Err(e) => warn!("{}:{}: skipping corrupt record: {e}", path.display(), i + 1),
            }
        }
        Ok(out)
    }
}

pub fn read_range<T>(path: &Path, from: SimTime, to: SimTime) -> Result<Vec<T>>
where
    T: Serialize + DeserializeOwned + Timestamped,
{
    Ok(JsonlStore::<T>::read_path(path)?
        .into_iter()
        .filter(|r| (from..=to).contains(&r.timestamp()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{ControllerKind, MpcMovement};

    fn mv(t: SimTime, u: f64) -> MpcMovement {
        MpcMovement {
            date: t,
            ait: 21.0,
            setpoint: 22.5,
            u,
            on_minutes: u * 30.0,
            controller: ControllerKind::Mpc,
        }
    }

    #[test]
    fn write_then_read_and_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("movements.jsonl");
        let t = SimTime::from_ymd_hm(2023, 1, 9, 6, 0);
        let records: Vec<_> = (0..6).map(|k| mv(t + 30 * k, k as f64 / 10.0)).collect();
        {
            let mut store = JsonlStore::open(&path).unwrap();
            store.append_all(&records).unwrap();
        }
        assert_eq!(JsonlStore::<MpcMovement>::read_path(&path).unwrap(), records);
        let store = JsonlStore::<MpcMovement>::open(&path).unwrap();
        assert_eq!(store.read_range(t + 30, t + 90).unwrap(), records[1..4].to_vec());
        assert!(store.read_range(t + 1000, t + 2000).unwrap().is_empty());
    }

    #[test]
    fn survives_reopen_and_enforces_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let t = SimTime::from_ymd_hm(2023, 1, 9, 6, 0);
        JsonlStore::open(&path).unwrap().append(&mv(t + 30, 0.1)).unwrap();
        let mut store = JsonlStore::open(&path).unwrap();
        assert!(store.append(&mv(t, 0.2)).is_err());
        store.append(&mv(t + 60, 0.3)).unwrap();
        assert_eq!(JsonlStore::<MpcMovement>::read_path(&path).unwrap().len(), 2);
    }

    #[test]
    fn corrupt_lines_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let t = SimTime::from_ymd_hm(2023, 1, 9, 6, 0);
        let good = serde_json::to_string(&mv(t, 0.5)).unwrap();
        std::fs::write(&path, format!("{good}\n{{\"date\": broken\n\n{good}\n")).unwrap();
        assert_eq!(JsonlStore::<MpcMovement>::read_path(&path).unwrap().len(), 2);
    }
}
