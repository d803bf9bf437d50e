use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use tokio::sync::Semaphore;

use super::{check_request, parse_response_body, request_body, ChatTransport, ClientError, Exchange, ModelRequest};

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Up to but excluding `/chat/completions`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: DEFAULT_BASE_URL.into(),
            api_key: None,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            timeout: Duration::from_secs(120),
        }
    }
}

/// Talks to an OpenAI-compatible `/chat/completions` endpoint.
pub struct HttpTransport {
    client: reqwest::Client,
    url: String,
    api_key: Option<String>,
    permits: Arc<Semaphore>,
}

impl HttpTransport {
    pub fn new(config: HttpConfig) -> Result<Self, ClientError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ClientError::Transport { status: None, excerpt: e.to_string() })?;
        Ok(HttpTransport {
            client,
            url: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            api_key: config.api_key.filter(|k| !k.is_empty()),
            permits: Arc::new(Semaphore::new(config.max_in_flight.max(1))),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

fn excerpt(body: &str) -> String {
    const LIMIT: usize = 300;
    let mut out: String = body.chars().take(LIMIT).collect();
    if body.chars().count() > LIMIT {
        out.push_str("...");
    }
    out
}

#[async_trait]
impl ChatTransport for HttpTransport {
    async fn exchange(&self, request: &ModelRequest) -> Result<Exchange, ClientError> {
        check_request(request)?;
        let Some(key) = &self.api_key else {
            return Err(ClientError::AuthMissing("no API key configured".into()));
        };
        let body = request_body(request);
        let _permit = self.permits.acquire().await.expect("semaphore is never closed");
        let response = self
            .client
            .post(&self.url)
            .bearer_auth(key)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.clone())
            .send()
            .await
            .map_err(|e| ClientError::Transport { status: None, excerpt: e.to_string() })?;
        let status = response.status();
        let raw = response
            .text()
            .await
            .map_err(|e| ClientError::Transport { status: Some(status.as_u16()), excerpt: e.to_string() })?;
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(ClientError::AuthMissing(format!("HTTP {}: {}", status.as_u16(), excerpt(&raw))));
        }
        if !status.is_success() {
            return Err(ClientError::Transport { status: Some(status.as_u16()), excerpt: excerpt(&raw) });
        }
        let parsed = parse_response_body(&raw)?;
        Ok(Exchange { request_body: body, response: parsed, raw_response: raw })
    }
}
