//! Append-only JSONL log of every endpoint attempt.
//!
//! Records are sent over a channel to a single writer thread; callers never
//! touch the underlying file.

use std::fs::OpenOptions;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use chrono::{DateTime, SecondsFormat};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogRecord {
    /// RFC 3339 UTC timestamp of the attempt start.
    pub timestamp: String,
    pub endpoint: String,
    pub fingerprint: String,
    /// `ok`, `http_<code>`, `transport_error`, `malformed`, `image_error` ...
    pub status: String,
    pub latency_ms: u64,
    pub attempt: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_role: Option<String>,
}

pub fn rfc3339(epoch_ms: u64) -> String {
    DateTime::from_timestamp_millis(epoch_ms as i64)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Millis, true))
        .unwrap_or_default()
}

pub struct RunLog {
    tx: Option<Sender<String>>,
    writer: Option<JoinHandle<io::Result<()>>>,
    lines: AtomicUsize,
}

impl RunLog {
    pub fn to_writer<W: Write + Send + 'static>(out: W) -> Self {
        let (tx, rx) = mpsc::channel::<String>();
        let writer = std::thread::spawn(move || {
            let mut out = out;
            for line in rx {
                out.write_all(line.as_bytes())?;
                out.write_all(b"\n")?;
            }
            out.flush()
        });
        RunLog {
            tx: Some(tx),
            writer: Some(writer),
            lines: AtomicUsize::new(0),
        }
    }

    /// Appends to `path`, creating it if needed.
    pub fn append_to(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(RunLog::to_writer(BufWriter::new(file)))
    }

    /// In-memory log; the returned buffer fills as records arrive.
    pub fn memory() -> (Self, SharedBuffer) {
        let buf = SharedBuffer::default();
        (RunLog::to_writer(buf.clone()), buf)
    }

    pub fn discard() -> Self {
        RunLog::to_writer(io::sink())
    }

    pub fn append(&self, record: &RunLogRecord) {
        let line = serde_json::to_string(record).expect("run log records serialize");
        if let Some(tx) = &self.tx {
            // a dead writer surfaces its io error from finish()
            let _ = tx.send(line);
        }
        self.lines.fetch_add(1, Ordering::Relaxed);
    }

    /// Records appended so far.
    pub fn len(&self) -> usize {
        self.lines.load(Ordering::Relaxed)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flushes and joins the writer thread.
    pub fn finish(mut self) -> io::Result<()> {
        self.close()
    }

    fn close(&mut self) -> io::Result<()> {
        drop(self.tx.take());
        match self.writer.take() {
            Some(handle) => handle
                .join()
                .unwrap_or_else(|_| Err(io::Error::other("run log writer panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for RunLog {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

/// Cloneable in-memory sink.
#[derive(Debug, Clone, Default)]
pub struct SharedBuffer(Arc<Mutex<Vec<u8>>>);

impl SharedBuffer {
    pub fn contents(&self) -> String {
        String::from_utf8_lossy(&self.0.lock().unwrap()).into_owned()
    }

    pub fn records(&self) -> Vec<RunLogRecord> {
        self.contents()
            .lines()
            .map(|l| serde_json::from_str(l).expect("valid run log line"))
            .collect()
    }
}

impl Write for SharedBuffer {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(i: u32) -> RunLogRecord {
        RunLogRecord {
            timestamp: rfc3339(0),
            endpoint: "e".into(),
            fingerprint: format!("f{i}"),
            status: "ok".into(),
            latency_ms: 1,
            attempt: 1,
            raw_text: Some("x".into()),
            error: None,
            temperature: None,
            prompt_role: None,
        }
    }

    #[test]
    fn writes_one_line_per_record_from_many_threads() {
        let (log, buf) = RunLog::memory();
        std::thread::scope(|s| {
            for t in 0..4 {
                let log = &log;
                s.spawn(move || {
                    for i in 0..25 {
                        log.append(&record(t * 100 + i));
                    }
                });
            }
        });
        assert_eq!(log.len(), 100);
        log.finish().unwrap();
        assert_eq!(buf.records().len(), 100);
    }

    #[test]
    fn timestamp_format() {
        assert_eq!(rfc3339(0), "1970-01-01T00:00:00.000Z");
        assert_eq!(rfc3339(1_700_000_000_123), "2023-11-14T22:13:20.123Z");
    }
}
