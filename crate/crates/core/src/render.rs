//! Prompt assembly.
//!
//! The system message carries, in this order: Goal, Type Definitions,
//! Information, Context, Output Type and Instructions, each as a `##`
//! markdown section. Information and Context are left out when empty, and
//! so is Type Definitions when the output involves no named types. The user
//! message carries the Inputs section; image inputs become image parts.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::notation::{render_value, Value};
use crate::schema::{SchemaError, TypeDef, TypeExpr, TypeRegistry};
use crate::validate::{conform, describe_errors};

/// Prompting strategy; selects the instruction template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Standard,
    ChainOfThought,
    Reason,
    NlToFormat,
}

impl Method {
    /// Label of the fenced block holding the reasoning trace, if the method
    /// asks for one.
    pub fn reasoning_label(self) -> Option<&'static str> {
        match self {
            Method::ChainOfThought => Some("chain-of-thoughts"),
            Method::Reason => Some("reasoning"),
            Method::Standard | Method::NlToFormat => None,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "standard" => Ok(Method::Standard),
            "cot" | "chain-of-thought" | "chain-of-thoughts" => Ok(Method::ChainOfThought),
            "reason" => Ok(Method::Reason),
            "nl-to-format" | "nl2format" => Ok(Method::NlToFormat),
            other => Err(format!(
                "unknown method `{other}` (expected standard, cot, reason or nl-to-format)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Detail {
    Low,
    High,
    #[default]
    Auto,
}

impl Detail {
    pub fn as_str(self) -> &'static str {
        match self {
            Detail::Low => "low",
            Detail::High => "high",
            Detail::Auto => "auto",
        }
    }
}

impl std::str::FromStr for Detail {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(Detail::Low),
            "high" => Ok(Detail::High),
            "auto" => Ok(Detail::Auto),
            other => Err(format!("unknown image detail `{other}` (expected low, high or auto)")),
        }
    }
}

/// An image, base64-encoded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePart {
    pub media_type: String,
    pub base64: String,
    pub detail: Detail,
}

impl ImagePart {
    pub fn data_url(&self) -> String {
        format!("data:{};base64,{}", self.media_type, self.base64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContentPart {
    Text(String),
    Image(ImagePart),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: Role,
    pub content: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn text(role: Role, text: impl Into<String>) -> Self {
        ChatMessage { role, content: vec![ContentPart::Text(text.into())] }
    }

    /// All text parts joined by blank lines.
    pub fn text_content(&self) -> String {
        let texts: Vec<&str> = self
            .content
            .iter()
            .filter_map(|p| match p {
                ContentPart::Text(t) => Some(t.as_str()),
                ContentPart::Image(_) => None,
            })
            .collect();
        texts.join("\n\n")
    }

    pub fn images(&self) -> impl Iterator<Item = &ImagePart> {
        self.content.iter().filter_map(|p| match p {
            ContentPart::Image(img) => Some(img),
            ContentPart::Text(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BindingValue {
    Value(Value),
    Image(ImagePart),
}

/// A named value shown to the model, either as Information or as an Input.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    /// Display name, e.g. "Name of the Person".
    pub meaning: String,
    pub name: String,
    pub ty: Option<TypeExpr>,
    pub value: BindingValue,
}

impl Binding {
    pub fn new(meaning: impl Into<String>, name: impl Into<String>, ty: Option<TypeExpr>, value: Value) -> Self {
        Binding { meaning: meaning.into(), name: name.into(), ty, value: BindingValue::Value(value) }
    }

    pub fn image(meaning: impl Into<String>, name: impl Into<String>, image: ImagePart) -> Self {
        Binding { meaning: meaning.into(), name: name.into(), ty: None, value: BindingValue::Image(image) }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PromptError {
    #[error("goal must not be empty")]
    EmptyGoal,
    #[error("duplicate input name `{0}`")]
    DuplicateInput(String),
    #[error("unresolved type: {}", .0.join(", "))]
    UnresolvedType(Vec<String>),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("binding `{name}` does not match its type:\n{details}")]
    BindingMismatch { name: String, details: String },
}

/// A fully resolved call description.
#[derive(Debug, Clone)]
pub struct PromptSpec {
    pub goal: String,
    pub registry: Arc<TypeRegistry>,
    pub info: Vec<Binding>,
    pub context: Option<String>,
    pub output_type: TypeExpr,
    pub inputs: Vec<Binding>,
    pub method: Method,
}

impl PromptSpec {
    pub fn builder(registry: Arc<TypeRegistry>, goal: impl Into<String>, output_type: TypeExpr) -> PromptSpecBuilder {
        PromptSpecBuilder {
            spec: PromptSpec {
                goal: goal.into(),
                registry,
                info: Vec::new(),
                context: None,
                output_type,
                inputs: Vec::new(),
                method: Method::Standard,
            },
        }
    }

    fn referenced_types(&self) -> impl Iterator<Item = &TypeExpr> {
        std::iter::once(&self.output_type)
            .chain(self.info.iter().filter_map(|b| b.ty.as_ref()))
            .chain(self.inputs.iter().filter_map(|b| b.ty.as_ref()))
    }

    /// Every definition reachable from the output and binding types,
    /// dependencies first.
    pub fn type_definitions(&self) -> Result<Vec<&TypeDef>, PromptError> {
        let mut missing = Vec::new();
        for ty in self.referenced_types() {
            for name in self.registry.resolve(ty) {
                if !missing.contains(&name) {
                    missing.push(name);
                }
            }
        }
        if !missing.is_empty() {
            return Err(PromptError::UnresolvedType(missing));
        }
        Ok(self.registry.collect_dependencies_all(self.referenced_types())?)
    }

    /// Checks the invariants and puts typed binding values in canonical form.
    pub fn validate(&mut self) -> Result<(), PromptError> {
        if self.goal.trim().is_empty() {
            return Err(PromptError::EmptyGoal);
        }
        for (i, input) in self.inputs.iter().enumerate() {
            if self.inputs[..i].iter().any(|b| b.name == input.name) {
                return Err(PromptError::DuplicateInput(input.name.clone()));
            }
        }
        for ty in self.referenced_types() {
            ty.check()?;
        }
        self.type_definitions()?;
        let registry = Arc::clone(&self.registry);
        for binding in self.info.iter_mut().chain(self.inputs.iter_mut()) {
            let (Some(ty), BindingValue::Value(value)) = (&binding.ty, &mut binding.value) else {
                continue;
            };
            match conform(value, ty, &registry) {
                Ok(typed) => *value = typed.value,
                Err(errors) => {
                    return Err(PromptError::BindingMismatch {
                        name: binding.name.clone(),
                        details: describe_errors(&errors),
                    })
                }
            }
        }
        Ok(())
    }
}

pub struct PromptSpecBuilder {
    spec: PromptSpec,
}

impl PromptSpecBuilder {
    pub fn info(mut self, binding: Binding) -> Self {
        self.spec.info.push(binding);
        self
    }

    pub fn input(mut self, binding: Binding) -> Self {
        self.spec.inputs.push(binding);
        self
    }

    pub fn context(mut self, context: impl Into<String>) -> Self {
        self.spec.context = Some(context.into());
        self
    }

    pub fn method(mut self, method: Method) -> Self {
        self.spec.method = method;
        self
    }

    pub fn build(mut self) -> Result<PromptSpec, PromptError> {
        self.spec.validate()?;
        Ok(self.spec)
    }
}

/// Goal text derived from a function name: `extract_entities` becomes
/// `Extract entities`.
pub fn default_goal(function_name: &str) -> String {
    let spaced = function_name.replace('_', " ");
    let mut chars = spaced.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub fn render_type_expr(expr: &TypeExpr) -> String {
    match expr {
        TypeExpr::Primitive(p) => p.name().to_string(),
        TypeExpr::List(elem) => format!("list[{}]", render_type_expr(elem)),
        TypeExpr::Tuple(elems) => {
            let inner: Vec<String> = elems.iter().map(render_type_expr).collect();
            format!("tuple[{}]", inner.join(", "))
        }
        TypeExpr::Mapping(key, value) => {
            format!("dict[{}, {}]", render_type_expr(key), render_type_expr(value))
        }
        TypeExpr::Optional(inner) => format!("{} | None", render_type_expr(inner)),
        TypeExpr::Named(name) => name.clone(),
        TypeExpr::Semantic(inner, meaning) => format!("{} - {}", render_type_expr(inner), meaning),
    }
}

pub fn render_type_definition(def: &TypeDef) -> String {
    match def {
        TypeDef::Record(record) => {
            let fields: Vec<String> = record
                .fields
                .iter()
                .map(|f| format!("{}: {}", f.name, render_type_expr(&f.ty)))
                .collect();
            let mut line = format!("{0} (Class) -> {0}({1})", record.name, fields.join(", "));
            if let Some(meaning) = &record.meaning {
                line.push_str(" - ");
                line.push_str(meaning);
            }
            line
        }
        TypeDef::Enum(def) => {
            let members: Vec<String> = def.members.iter().map(|m| format!("{}.{}", def.name, m)).collect();
            let mut line = format!("{} (Enum) -> {}", def.name, members.join(" | "));
            if let Some(meaning) = &def.meaning {
                line.push_str(" - ");
                line.push_str(meaning);
            }
            line
        }
    }
}

pub fn render_binding(binding: &Binding) -> String {
    let mut line = format!("{} ({})", binding.meaning, binding.name);
    match &binding.value {
        BindingValue::Image(_) => line.push_str(" (Image) = <attached>"),
        BindingValue::Value(value) => {
            if let Some(ty) = &binding.ty {
                line.push_str(&format!(" ({})", render_type_expr(ty)));
            }
            line.push_str(" = ");
            line.push_str(&render_value(value));
        }
    }
    line
}

/// Instruction texts, one per method, plus the free-answer text used by the
/// first stage of natural-language-then-format calls. `{output_type}` is
/// replaced by the rendered output type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub standard: String,
    pub chain_of_thought: String,
    pub reason: String,
    pub nl_to_format: String,
    pub nl_answer: String,
}

const TEMPLATE_FILES: [&str; 5] =
    ["standard.txt", "chain_of_thought.txt", "reason.txt", "nl_to_format.txt", "nl_answer.txt"];

impl Default for Templates {
    fn default() -> Self {
        Templates {
            standard: include_str!("../templates/standard.txt").to_string(),
            chain_of_thought: include_str!("../templates/chain_of_thought.txt").to_string(),
            reason: include_str!("../templates/reason.txt").to_string(),
            nl_to_format: include_str!("../templates/nl_to_format.txt").to_string(),
            nl_answer: include_str!("../templates/nl_answer.txt").to_string(),
        }
    }
}

impl Templates {
    /// Loads overrides from `dir`; files that are absent keep the built-in text.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut templates = Templates::default();
        for file in TEMPLATE_FILES {
            let path = dir.join(file);
            if path.exists() {
                *templates.slot_mut(file) = std::fs::read_to_string(path)?;
            }
        }
        Ok(templates)
    }

    fn slot_mut(&mut self, file: &str) -> &mut String {
        match file {
            "standard.txt" => &mut self.standard,
            "chain_of_thought.txt" => &mut self.chain_of_thought,
            "reason.txt" => &mut self.reason,
            "nl_to_format.txt" => &mut self.nl_to_format,
            _ => &mut self.nl_answer,
        }
    }

    pub fn for_method(&self, method: Method) -> &str {
        match method {
            Method::Standard => &self.standard,
            Method::ChainOfThought => &self.chain_of_thought,
            Method::Reason => &self.reason,
            Method::NlToFormat => &self.nl_to_format,
        }
    }

    /// SHA-256 of each template, keyed by file name.
    pub fn hashes(&self) -> Vec<(&'static str, String)> {
        let texts = [&self.standard, &self.chain_of_thought, &self.reason, &self.nl_to_format, &self.nl_answer];
        TEMPLATE_FILES
            .iter()
            .zip(texts)
            .map(|(file, text)| (*file, hex_digest(text.as_bytes())))
            .collect()
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn fill(template: &str, output_type: &str) -> String {
    template.trim_end().replace("{output_type}", output_type)
}

/// Turns a [`PromptSpec`] into chat messages.
#[derive(Debug, Clone, Default)]
pub struct Renderer {
    pub templates: Templates,
}

impl Renderer {
    pub fn new(templates: Templates) -> Self {
        Renderer { templates }
    }

    pub fn render_prompt(&self, spec: &PromptSpec) -> Result<Vec<ChatMessage>, PromptError> {
        let instructions = self.templates.for_method(spec.method);
        self.render_with_instructions(spec, instructions)
    }

    /// Prompt asking for a free natural-language answer.
    pub fn render_free_answer(&self, spec: &PromptSpec) -> Result<Vec<ChatMessage>, PromptError> {
        self.render_with_instructions(spec, &self.templates.nl_answer)
    }

    fn render_with_instructions(&self, spec: &PromptSpec, instructions: &str) -> Result<Vec<ChatMessage>, PromptError> {
        let definitions = spec.type_definitions()?;
        let output_type = render_type_expr(&spec.output_type);

        let mut sections: Vec<(&str, String)> = vec![("Goal", spec.goal.trim().to_string())];
        if !definitions.is_empty() {
            let lines: Vec<String> = definitions.iter().map(|d| render_type_definition(d)).collect();
            sections.push(("Type Definitions", lines.join("\n")));
        }
        if !spec.info.is_empty() {
            let lines: Vec<String> = spec.info.iter().map(render_binding).collect();
            sections.push(("Information", lines.join("\n")));
        }
        if let Some(context) = spec.context.as_deref().map(str::trim).filter(|c| !c.is_empty()) {
            sections.push(("Context", context.to_string()));
        }
        sections.push(("Output Type", output_type.clone()));
        sections.push(("Instructions", fill(instructions, &output_type)));
        let system = sections
            .iter()
            .map(|(title, body)| format!("## {title}\n{body}"))
            .collect::<Vec<_>>()
            .join("\n\n");

        let inputs = if spec.inputs.is_empty() {
            format!("No inputs are given for this task. Produce the output for the goal: {}", spec.goal.trim())
        } else {
            spec.inputs.iter().map(render_binding).collect::<Vec<_>>().join("\n")
        };
        let mut user = vec![ContentPart::Text(format!("## Inputs\n{inputs}"))];
        for input in &spec.inputs {
            if let BindingValue::Image(image) = &input.value {
                user.push(ContentPart::Image(image.clone()));
            }
        }

        Ok(vec![
            ChatMessage::text(Role::System, system),
            ChatMessage { role: Role::User, content: user },
        ])
    }
}

/// [`Renderer::render_prompt`] with the built-in templates.
pub fn render_prompt(spec: &PromptSpec) -> Result<Vec<ChatMessage>, PromptError> {
    Renderer::default().render_prompt(spec)
}
