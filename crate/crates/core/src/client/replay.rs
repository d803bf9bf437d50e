use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{request_body, ChatTransport, ClientError, Exchange, ModelRequest, ModelResponse};
use crate::render::hex_digest;

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub fingerprint: String,
    pub response: ModelResponse,
    pub raw_request: String,
    pub raw_response: String,
}

/// SHA-256 of the serialized request body, hex-encoded.
pub fn fingerprint(request: &ModelRequest) -> String {
    hex_digest(request_body(request).as_bytes())
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, ClientError> {
    let file = File::open(path).map_err(|e| ClientError::Transcript(format!("{}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ClientError::Transcript(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line)
            .map_err(|e| ClientError::Transcript(format!("{}:{}: {e}", path.display(), i + 1)))?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Wraps a transport and appends every exchange to a JSONL transcript.
pub struct RecordingTransport<T> {
    inner: T,
    path: PathBuf,
    file: Mutex<File>,
}

impl<T: ChatTransport> RecordingTransport<T> {
    /// Truncates `path`.
    pub fn create(inner: T, path: impl Into<PathBuf>) -> Result<Self, ClientError> {
        let path = path.into();
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&path)
            .map_err(|e| ClientError::Transcript(format!("{}: {e}", path.display())))?;
        Ok(RecordingTransport { inner, path, file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn into_inner(self) -> T {
        self.inner
    }
}

#[async_trait]
impl<T: ChatTransport> ChatTransport for RecordingTransport<T> {
    async fn exchange(&self, request: &ModelRequest) -> Result<Exchange, ClientError> {
        let exchange = self.inner.exchange(request).await?;
        let entry = TranscriptEntry {
            fingerprint: hex_digest(exchange.request_body.as_bytes()),
            response: exchange.response.clone(),
            raw_request: exchange.request_body.clone(),
            raw_response: exchange.raw_response.clone(),
        };
        let mut line = serde_json::to_string(&entry).expect("entry serializes");
        line.push('\n');
        let mut file = self.file.lock().unwrap();
        file.write_all(line.as_bytes()).map_err(|e| ClientError::Transcript(e.to_string()))?;
        Ok(exchange)
    }
}

/// Serves a transcript strictly in order, checking each request's
/// fingerprint against the recorded one. Concurrent callers would race for
/// positions, so replays should run one request at a time.
pub struct ReplayTransport {
    entries: Vec<TranscriptEntry>,
    cursor: Mutex<usize>,
}

impl ReplayTransport {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        ReplayTransport { entries, cursor: Mutex::new(0) }
    }

    pub fn open(path: &Path) -> Result<Self, ClientError> {
        Ok(Self::new(read_transcript(path)?))
    }

    pub fn served(&self) -> usize {
        *self.cursor.lock().unwrap()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[async_trait]
impl ChatTransport for ReplayTransport {
    async fn exchange(&self, request: &ModelRequest) -> Result<Exchange, ClientError> {
        super::check_request(request)?;
        let body = request_body(request);
        let actual = hex_digest(body.as_bytes());
        let mut cursor = self.cursor.lock().unwrap();
        let index = *cursor;
        let entry = self.entries.get(index).ok_or(ClientError::ReplayExhausted(index))?;
        if entry.fingerprint != actual {
            return Err(ClientError::ReplayMismatch { index, expected: entry.fingerprint.clone(), actual });
        }
        *cursor += 1;
        Ok(Exchange { request_body: body, response: entry.response.clone(), raw_response: entry.raw_response.clone() })
    }
}
