//! One call end to end: render, query, extract, parse, conform, and repair.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::client::{ChatTransport, ClientError, ModelRequest};
use crate::notation::{extract_block, extract_candidate_output, parse_value, Provenance, SourceError};
use crate::render::{render_type_expr, Binding, ChatMessage, Method, PromptError, PromptSpec, Renderer, Role};
use crate::notation::Value;
use crate::validate::{conform, describe_errors, TypedValue, ValidationError};

pub const DEFAULT_RETRY_CEILING: u32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CallPolicy {
    pub model_name: String,
    /// Attempts allowed after the first.
    pub max_retries: u32,
    pub temperature: f64,
    /// When a reply has no `output` block and its fallback candidate does
    /// not parse, ask the model to restate its answer instead of reporting
    /// a parse error.
    pub allow_llm_reextraction: bool,
    pub max_output_tokens: Option<u32>,
    pub retry_ceiling: u32,
}

impl Default for CallPolicy {
    fn default() -> Self {
        CallPolicy {
            model_name: "gpt-4o-mini".into(),
            max_retries: 2,
            temperature: 0.0,
            allow_llm_reextraction: true,
            max_output_tokens: None,
            retry_ceiling: DEFAULT_RETRY_CEILING,
        }
    }
}

impl CallPolicy {
    pub fn with_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries;
        self
    }

    pub fn check(&self) -> Result<(), RuntimeError> {
        if self.max_retries > self.retry_ceiling {
            return Err(RuntimeError::InvalidPolicy(format!(
                "max_retries {} exceeds the ceiling of {}",
                self.max_retries, self.retry_ceiling
            )));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(RuntimeError::InvalidPolicy(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.model_name.is_empty() {
            return Err(RuntimeError::InvalidPolicy("model name is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AttemptFailure {
    ExtractionFailed,
    ParseFailed { error: SourceError },
    ValidationFailed { errors: Vec<ValidationError> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// Free-form first stage of a two-stage call; never parsed.
    Reasoning,
    /// An attempt whose reply is expected to hold the typed output.
    Output,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub stage: Stage,
    #[serde(skip)]
    pub request_messages: Vec<ChatMessage>,
    pub raw_reply: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    pub failure: Option<AttemptFailure>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub finish_reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CallOutcome {
    pub result: Option<TypedValue>,
    pub attempts: Vec<Attempt>,
    pub reasoning_trace: Option<String>,
    pub total_prompt_tokens: u64,
    pub total_completion_tokens: u64,
}

impl CallOutcome {
    fn new() -> Self {
        CallOutcome {
            result: None,
            attempts: Vec::new(),
            reasoning_trace: None,
            total_prompt_tokens: 0,
            total_completion_tokens: 0,
        }
    }

    fn push(&mut self, attempt: Attempt) {
        self.total_prompt_tokens += attempt.prompt_tokens;
        self.total_completion_tokens += attempt.completion_tokens;
        self.attempts.push(attempt);
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_prompt_tokens + self.total_completion_tokens
    }

    /// Attempts that expected typed output.
    pub fn output_attempts(&self) -> usize {
        self.attempts.iter().filter(|a| a.stage == Stage::Output).count()
    }
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("no valid output after {} attempts", .0.attempts.len())]
    Exhausted(Box<CallOutcome>),
    #[error(transparent)]
    Transport(#[from] ClientError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("invalid call policy: {0}")]
    InvalidPolicy(String),
}

impl RuntimeError {
    /// The partial outcome of an exhausted call.
    pub fn outcome(&self) -> Option<&CallOutcome> {
        match self {
            RuntimeError::Exhausted(outcome) => Some(outcome),
            _ => None,
        }
    }
}

/// Messages appended after a failed attempt: the model's own reply
/// followed by a user message describing what was wrong.
pub fn repair_messages(spec: &PromptSpec, previous_raw: &str, failure: &AttemptFailure) -> Vec<ChatMessage> {
    let ty = render_type_expr(&spec.output_type);
    let problem = match failure {
        AttemptFailure::ExtractionFailed => {
            "The previous output was invalid: the reply has no fenced block labeled output, and no value could be read from it. \
             Extract the final answer from your previous reply."
                .to_string()
        }
        AttemptFailure::ParseFailed { error } => format!(
            "The previous output was invalid: it could not be parsed at line {}, column {}: {}.\n{}",
            error.line,
            error.column,
            error.message,
            error.display_with_excerpt().lines().skip(1).collect::<Vec<_>>().join("\n")
        ),
        AttemptFailure::ValidationFailed { errors } => format!(
            "The previous output was invalid: it does not match the type `{ty}`.\n{}",
            describe_errors(errors)
        ),
    };
    let instruction = format!(
        "Reply with exactly one value of type `{ty}` in the object notation of the Type Definitions, \
         inside a fenced block labeled output:\n\n```output\n<value of type {ty}>\n```"
    );
    vec![
        ChatMessage::text(Role::Assistant, previous_raw),
        ChatMessage::text(Role::User, format!("{problem}\n\n{instruction}")),
    ]
}

/// Reads the typed output from one reply.
pub fn read_reply(
    reply: &str,
    spec: &PromptSpec,
    allow_reextraction: bool,
) -> (Provenance, Result<TypedValue, AttemptFailure>) {
    let candidate = extract_candidate_output(reply);
    let labeled = matches!(candidate.provenance, Provenance::Labeled { .. });
    let outcome = match parse_value(&candidate.text) {
        Err(_) if !labeled && allow_reextraction => Err(AttemptFailure::ExtractionFailed),
        Err(error) => Err(AttemptFailure::ParseFailed { error }),
        Ok(value) => conform(&value, &spec.output_type, &spec.registry)
            .map_err(|errors| AttemptFailure::ValidationFailed { errors }),
    };
    (candidate.provenance, outcome)
}

/// Runs calls against a transport.
pub struct Engine {
    pub renderer: Renderer,
    transport: Arc<dyn ChatTransport>,
}

impl Engine {
    pub fn new(transport: Arc<dyn ChatTransport>) -> Self {
        Engine { renderer: Renderer::default(), transport }
    }

    pub fn with_renderer(transport: Arc<dyn ChatTransport>, renderer: Renderer) -> Self {
        Engine { renderer, transport }
    }

    pub fn transport(&self) -> &Arc<dyn ChatTransport> {
        &self.transport
    }

    /// Dispatches on `spec.method`.
    pub async fn call(&self, spec: &PromptSpec, policy: &CallPolicy) -> Result<CallOutcome, RuntimeError> {
        match spec.method {
            Method::NlToFormat => self.invoke_nl_to_format(spec, policy).await,
            _ => self.invoke(spec, policy).await,
        }
    }

    fn request(&self, policy: &CallPolicy, messages: Vec<ChatMessage>) -> ModelRequest {
        ModelRequest {
            model_name: policy.model_name.clone(),
            messages,
            temperature: policy.temperature,
            max_output_tokens: policy.max_output_tokens,
        }
    }

    pub async fn invoke(&self, spec: &PromptSpec, policy: &CallPolicy) -> Result<CallOutcome, RuntimeError> {
        policy.check()?;
        let messages = self.renderer.render_prompt(spec)?;
        let mut outcome = CallOutcome::new();
        self.repair_loop(spec, policy, messages, &mut outcome).await?;
        if let Some(label) = spec.method.reasoning_label() {
            outcome.reasoning_trace =
                outcome.attempts.iter().rev().find_map(|a| extract_block(&a.raw_reply, label).ok());
        }
        finish(outcome)
    }

    /// Two stages: a free natural-language answer, then a conversion
    /// prompt that shows that answer as Information.
    pub async fn invoke_nl_to_format(&self, spec: &PromptSpec, policy: &CallPolicy) -> Result<CallOutcome, RuntimeError> {
        policy.check()?;
        let first = self.renderer.render_free_answer(spec)?;
        let request = self.request(policy, first.clone());
        let response = self.transport.complete(&request).await?;
        let mut outcome = CallOutcome::new();
        outcome.reasoning_trace = Some(response.text.clone());
        outcome.push(Attempt {
            stage: Stage::Reasoning,
            request_messages: first,
            raw_reply: response.text.clone(),
            provenance: None,
            failure: None,
            prompt_tokens: response.prompt_tokens,
            completion_tokens: response.completion_tokens,
            finish_reason: response.finish_reason,
        });

        let mut second = spec.clone();
        second.method = Method::NlToFormat;
        second.info.push(Binding::new(
            "Natural Language Answer",
            "nl_answer",
            None,
            Value::Str(response.text),
        ));
        let messages = self.renderer.render_prompt(&second)?;
        self.repair_loop(&second, policy, messages, &mut outcome).await?;
        finish(outcome)
    }

    async fn repair_loop(
        &self,
        spec: &PromptSpec,
        policy: &CallPolicy,
        mut messages: Vec<ChatMessage>,
        outcome: &mut CallOutcome,
    ) -> Result<(), RuntimeError> {
        for attempt_no in 0..=policy.max_retries {
            let request = self.request(policy, messages.clone());
            let response = self.transport.complete(&request).await?;
            let (provenance, read) = read_reply(&response.text, spec, policy.allow_llm_reextraction);
            let failure = read.as_ref().err().cloned();
            outcome.push(Attempt {
                stage: Stage::Output,
                request_messages: messages.clone(),
                raw_reply: response.text.clone(),
                provenance: Some(provenance),
                failure: failure.clone(),
                prompt_tokens: response.prompt_tokens,
                completion_tokens: response.completion_tokens,
                finish_reason: response.finish_reason,
            });
            match (read, failure) {
                (Ok(value), _) => {
                    outcome.result = Some(value);
                    return Ok(());
                }
                (Err(_), Some(failure)) if attempt_no < policy.max_retries => {
                    messages.extend(repair_messages(spec, &response.text, &failure));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn finish(outcome: CallOutcome) -> Result<CallOutcome, RuntimeError> {
    if outcome.result.is_some() {
        Ok(outcome)
    } else {
        Err(RuntimeError::Exhausted(Box::new(outcome)))
    }
}
