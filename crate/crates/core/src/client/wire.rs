//! Chat-completions JSON bodies.

use serde::{Deserialize, Serialize};

use super::{ClientError, ModelRequest, ModelResponse};
use crate::render::{ChatMessage, ContentPart};

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: WireContent<'a>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum WireContent<'a> {
    Text(&'a str),
    Parts(Vec<WirePart<'a>>),
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum WirePart<'a> {
    Text { text: &'a str },
    ImageUrl { image_url: WireImageUrl },
}

#[derive(Serialize)]
struct WireImageUrl {
    url: String,
    detail: &'static str,
}

fn wire_message(message: &ChatMessage) -> WireMessage<'_> {
    let content = match message.content.as_slice() {
        [ContentPart::Text(text)] => WireContent::Text(text),
        parts => WireContent::Parts(
            parts
                .iter()
                .map(|part| match part {
                    ContentPart::Text(text) => WirePart::Text { text },
                    ContentPart::Image(image) => WirePart::ImageUrl {
                        image_url: WireImageUrl { url: image.data_url(), detail: image.detail.as_str() },
                    },
                })
                .collect(),
        ),
    };
    WireMessage { role: message.role.as_str(), content }
}

/// The request body exactly as sent. A message with a single text part
/// carries plain string content; anything else becomes a part array.
pub fn request_body(request: &ModelRequest) -> String {
    let body = WireRequest {
        model: &request.model_name,
        messages: request.messages.iter().map(wire_message).collect(),
        temperature: request.temperature,
        max_tokens: request.max_output_tokens,
    };
    serde_json::to_string(&body).expect("request body serializes")
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReply,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireReply {
    content: Option<String>,
}

#[derive(Deserialize, Serialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

/// Reads `choices[0].message.content`, its finish reason, and `usage`.
/// Usage absent from the body counts as zero.
pub fn parse_response_body(body: &str) -> Result<ModelResponse, ClientError> {
    let wire: WireResponse = serde_json::from_str(body)
        .map_err(|e| ClientError::Transport { status: None, excerpt: format!("malformed response body: {e}") })?;
    let choice = wire
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| ClientError::Transport { status: None, excerpt: "response has no choices".into() })?;
    let usage = wire.usage.unwrap_or(WireUsage { prompt_tokens: 0, completion_tokens: 0 });
    Ok(ModelResponse {
        text: choice.message.content.unwrap_or_default(),
        prompt_tokens: usage.prompt_tokens,
        completion_tokens: usage.completion_tokens,
        finish_reason: choice.finish_reason.unwrap_or_else(|| "unknown".into()),
    })
}

/// A minimal response body carrying `response`; used where no endpoint is
/// involved.
pub fn response_body(response: &ModelResponse) -> String {
    serde_json::json!({
        "object": "chat.completion",
        "choices": [{
            "index": 0,
            "message": { "role": "assistant", "content": response.text },
            "finish_reason": response.finish_reason,
        }],
        "usage": {
            "prompt_tokens": response.prompt_tokens,
            "completion_tokens": response.completion_tokens,
            "total_tokens": response.prompt_tokens + response.completion_tokens,
        },
    })
    .to_string()
}
