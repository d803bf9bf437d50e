//! Model transports: an HTTP client for chat-completions endpoints, a
//! scripted mock, and record/replay wrappers.

mod http;
mod replay;
mod wire;

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use async_trait::async_trait;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::{ChatMessage, Detail, ImagePart};

pub use http::{HttpConfig, HttpTransport, DEFAULT_BASE_URL, DEFAULT_MAX_IN_FLIGHT};
pub use replay::{fingerprint, read_transcript, RecordingTransport, ReplayTransport, TranscriptEntry};
pub use wire::{parse_response_body, request_body, response_body};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRequest {
    pub model_name: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub finish_reason: String,
}

impl ModelResponse {
    pub fn new(text: impl Into<String>, prompt_tokens: u64, completion_tokens: u64) -> Self {
        ModelResponse { text: text.into(), prompt_tokens, completion_tokens, finish_reason: "stop".into() }
    }
}

/// A response together with the exact bytes that went over the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub request_body: String,
    pub response: ModelResponse,
    pub raw_response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("transport error{}: {excerpt}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transport { status: Option<u16>, excerpt: String },
    #[error("authentication missing or rejected: {0}")]
    AuthMissing(String),
    #[error("replay mismatch at entry {index}: expected request {expected}, got {actual}")]
    ReplayMismatch { index: usize, expected: String, actual: String },
    #[error("replay transcript exhausted after {0} entries")]
    ReplayExhausted(usize),
    #[error("scripted transport has no replies left")]
    ScriptExhausted,
    #[error("cannot read image: {0}")]
    UnreadableImage(String),
    #[error("transcript error: {0}")]
    Transcript(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[async_trait]
pub trait ChatTransport: Send + Sync {
    async fn exchange(&self, request: &ModelRequest) -> Result<Exchange, ClientError>;

    async fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, ClientError> {
        Ok(self.exchange(request).await?.response)
    }
}

pub(crate) fn check_request(request: &ModelRequest) -> Result<(), ClientError> {
    match request.messages.first() {
        None => Err(ClientError::InvalidRequest("no messages".into())),
        Some(first) if first.role == crate::render::Role::Assistant => {
            Err(ClientError::InvalidRequest("first message must be system or user".into()))
        }
        Some(_) => Ok(()),
    }
}

/// Serves queued replies in order and keeps every request it saw.
#[derive(Debug, Default)]
pub struct ScriptedTransport {
    replies: Mutex<VecDeque<ModelResponse>>,
    seen: Mutex<Vec<ModelRequest>>,
}

impl ScriptedTransport {
    pub fn new(replies: impl IntoIterator<Item = ModelResponse>) -> Self {
        ScriptedTransport { replies: Mutex::new(replies.into_iter().collect()), seen: Mutex::default() }
    }

    /// Replies with fixed usage of 100 prompt and 20 completion tokens each.
    pub fn from_texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        Self::new(texts.into_iter().map(|t| ModelResponse::new(t, 100, 20)))
    }

    pub fn requests(&self) -> Vec<ModelRequest> {
        self.seen.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().unwrap().len()
    }
}

#[async_trait]
impl ChatTransport for ScriptedTransport {
    async fn exchange(&self, request: &ModelRequest) -> Result<Exchange, ClientError> {
        check_request(request)?;
        self.seen.lock().unwrap().push(request.clone());
        let response = self.replies.lock().unwrap().pop_front().ok_or(ClientError::ScriptExhausted)?;
        Ok(Exchange {
            request_body: request_body(request),
            raw_response: response_body(&response),
            response,
        })
    }
}

pub enum ImageSource<'a> {
    Path(&'a Path),
    Bytes(&'a [u8]),
}

/// Media type guessed from a file extension.
pub fn media_type_for(path: &Path) -> Option<&'static str> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    Some(match ext.as_str() {
        "jpg" | "jpeg" => "image/jpeg",
        "png" => "image/png",
        "gif" => "image/gif",
        "webp" => "image/webp",
        _ => return None,
    })
}

/// Base64-encodes an image. `media_type` may be omitted for paths with a
/// known extension.
pub fn encode_image(source: ImageSource<'_>, media_type: Option<&str>, detail: Detail) -> Result<ImagePart, ClientError> {
    let (bytes, guessed) = match source {
        ImageSource::Path(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| ClientError::UnreadableImage(format!("{}: {e}", path.display())))?;
            (bytes, media_type_for(path))
        }
        ImageSource::Bytes(bytes) => (bytes.to_vec(), None),
    };
    if bytes.is_empty() {
        return Err(ClientError::UnreadableImage("empty image payload".into()));
    }
    let media_type = media_type
        .or(guessed)
        .ok_or_else(|| ClientError::UnreadableImage("unknown media type".into()))?;
    Ok(ImagePart {
        media_type: media_type.to_string(),
        base64: base64::engine::general_purpose::STANDARD.encode(&bytes),
        detail,
    })
}
