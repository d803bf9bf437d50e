//! Schema and call files: JSON with type text in string fields.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use typed_prompt::client::{encode_image, ImageSource};
use typed_prompt::notation::{parse_value, SourceError};
use typed_prompt::render::{default_goal, Binding, Detail, Method, PromptSpec};
use typed_prompt::schema::{EnumDef, Field, RecordDef, TypeExpr, TypeRegistry};

use crate::typetext::parse_type_text;
use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    #[serde(default)]
    pub records: Vec<RecordEntry>,
    #[serde(default)]
    pub enums: Vec<EnumEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordEntry {
    pub name: String,
    pub meaning: Option<String>,
    pub fields: Vec<FieldEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldEntry {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumEntry {
    pub name: String,
    pub meaning: Option<String>,
    pub members: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallFile {
    /// Used for the goal when `goal` is absent.
    pub function: Option<String>,
    pub goal: Option<String>,
    pub context: Option<String>,
    pub method: Option<String>,
    pub output_type: String,
    #[serde(default)]
    pub info: Vec<BindingEntry>,
    #[serde(default)]
    pub inputs: Vec<BindingEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingEntry {
    pub meaning: String,
    pub name: String,
    #[serde(rename = "type")]
    pub ty: Option<String>,
    /// Object-notation text.
    pub value: Option<String>,
    /// Image path, relative to the call file.
    pub image: Option<PathBuf>,
    pub detail: Option<String>,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn located(path: &Path, what: &str, e: &SourceError) -> CliError {
    CliError::Usage(format!("{}: {what}: {}", path.display(), e.display_with_excerpt()))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| {
        let err = SourceError {
            message: e.to_string(),
            line: e.line(),
            column: e.column(),
            excerpt: text.lines().nth(e.line().saturating_sub(1)).unwrap_or("").chars().take(160).collect(),
        };
        CliError::Usage(format!("{}: {}", path.display(), err.display_with_excerpt()))
    })
}

pub fn type_text(path: &Path, what: &str, text: &str) -> Result<TypeExpr, CliError> {
    parse_type_text(text).map_err(|e| located(path, what, &e))
}

pub fn load_schema(path: &Path) -> Result<TypeRegistry, CliError> {
    let file: SchemaFile = parse_json(path, &read(path)?)?;
    let mut registry = TypeRegistry::new();
    let usage = |e: typed_prompt::schema::SchemaError| CliError::Usage(format!("{}: {e}", path.display()));
    for def in file.enums {
        let mut e = EnumDef::new(def.name, def.members);
        if let Some(m) = def.meaning {
            e = e.with_meaning(m);
        }
        registry.register(e).map_err(usage)?;
    }
    for (i, def) in file.records.iter().enumerate() {
        let fields = def
            .fields
            .iter()
            .enumerate()
            .map(|(j, f)| Ok(Field::new(&f.name, type_text(path, &format!("records[{i}].fields[{j}].type"), &f.ty)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        let mut record = RecordDef::new(&def.name, fields);
        if let Some(m) = &def.meaning {
            record = record.with_meaning(m);
        }
        registry.register(record).map_err(usage)?;
    }
    registry.verify().map_err(usage)?;
    Ok(registry)
}

fn binding(path: &Path, what: &str, entry: &BindingEntry) -> Result<Binding, CliError> {
    let ty = entry.ty.as_deref().map(|t| type_text(path, &format!("{what}.type"), t)).transpose()?;
    match (&entry.value, &entry.image) {
        (Some(value), None) => {
            let value = parse_value(value).map_err(|e| located(path, &format!("{what}.value"), &e))?;
            Ok(Binding::new(&entry.meaning, &entry.name, ty, value))
        }
        (None, Some(image)) => {
            let detail: Detail = match &entry.detail {
                Some(d) => d.parse().map_err(|e: String| CliError::Usage(format!("{}: {what}.detail: {e}", path.display())))?,
                None => Detail::Auto,
            };
            let full = path.parent().unwrap_or(Path::new(".")).join(image);
            let part = encode_image(ImageSource::Path(&full), None, detail)
                .map_err(|e| CliError::Usage(format!("{}: {what}.image: {e}", path.display())))?;
            Ok(Binding::image(&entry.meaning, &entry.name, part))
        }
        _ => Err(CliError::Usage(format!("{}: {what}: give exactly one of `value` or `image`", path.display()))),
    }
}

pub fn load_call(path: &Path, registry: TypeRegistry, method: Option<Method>) -> Result<PromptSpec, CliError> {
    let file: CallFile = parse_json(path, &read(path)?)?;
    let goal = match (&file.goal, &file.function) {
        (Some(goal), _) => goal.clone(),
        (None, Some(function)) => default_goal(function),
        (None, None) => return Err(CliError::Usage(format!("{}: give `goal` or `function`", path.display()))),
    };
    let output_type = type_text(path, "output_type", &file.output_type)?;
    let method = match (method, &file.method) {
        (Some(m), _) => m,
        (None, Some(m)) => m.parse().map_err(|e: String| CliError::Usage(format!("{}: method: {e}", path.display())))?,
        (None, None) => Method::Standard,
    };
    let mut builder = PromptSpec::builder(Arc::new(registry), goal, output_type).method(method);
    if let Some(context) = &file.context {
        builder = builder.context(context);
    }
    for (i, entry) in file.info.iter().enumerate() {
        builder = builder.info(binding(path, &format!("info[{i}]"), entry)?);
    }
    for (i, entry) in file.inputs.iter().enumerate() {
        builder = builder.input(binding(path, &format!("inputs[{i}]"), entry)?);
    }
    builder.build().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}
