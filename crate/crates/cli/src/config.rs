//! Settings resolved from flags, then environment, then a TOML file.

use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use typed_prompt::client::{HttpConfig, DEFAULT_BASE_URL, DEFAULT_MAX_IN_FLIGHT};
use typed_prompt::runtime::CallPolicy;

use crate::CliError;

pub const ENV_API_KEY: &str = "OPENAI_API_KEY";
pub const ENV_BASE_URL: &str = "OPENAI_BASE_URL";
pub const ENV_MODEL: &str = "TYPED_PROMPT_MODEL";
pub const ENV_CONFIG: &str = "TYPED_PROMPT_CONFIG";

#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<String>,
    pub base_url: Option<String>,
    pub api_key: Option<String>,
    pub retries: Option<u32>,
    pub temperature: Option<f64>,
    pub max_output_tokens: Option<u32>,
    pub max_in_flight: Option<usize>,
    pub timeout_secs: Option<u64>,
}

/// Values given on the command line.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Overrides {
    pub model: Option<String>,
    pub base_url: Option<String>,
    pub retries: Option<u32>,
    pub temperature: Option<f64>,
    pub max_output_tokens: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub model: String,
    pub base_url: String,
    pub api_key: Option<String>,
    pub retries: u32,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl Settings {
    pub fn policy(&self) -> CallPolicy {
        CallPolicy {
            model_name: self.model.clone(),
            max_retries: self.retries,
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
            ..CallPolicy::default()
        }
    }

    pub fn http(&self) -> HttpConfig {
        HttpConfig {
            base_url: self.base_url.clone(),
            api_key: self.api_key.clone(),
            max_in_flight: self.max_in_flight,
            timeout: self.timeout,
        }
    }
}

pub fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn resolve(flags: &Overrides, env: &dyn Fn(&str) -> Option<String>, file: &ConfigFile) -> Settings {
    let defaults = CallPolicy::default();
    let env = |k: &str| env(k).filter(|v| !v.is_empty());
    Settings {
        model: flags.model.clone().or_else(|| env(ENV_MODEL)).or_else(|| file.model.clone()).unwrap_or(defaults.model_name),
        base_url: flags
            .base_url
            .clone()
            .or_else(|| env(ENV_BASE_URL))
            .or_else(|| file.base_url.clone())
            .unwrap_or_else(|| DEFAULT_BASE_URL.to_string()),
        api_key: env(ENV_API_KEY).or_else(|| file.api_key.clone()),
        retries: flags.retries.or(file.retries).unwrap_or(defaults.max_retries),
        temperature: flags.temperature.or(file.temperature).unwrap_or(defaults.temperature),
        max_output_tokens: flags.max_output_tokens.or(file.max_output_tokens),
        max_in_flight: file.max_in_flight.unwrap_or(DEFAULT_MAX_IN_FLIGHT),
        timeout: Duration::from_secs(file.timeout_secs.unwrap_or(120)),
    }
}
