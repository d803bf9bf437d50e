//! The three benchmark tasks: schemas, prompts, and dataset rows.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::notation::Value;
use crate::render::{default_goal, Binding, Method, PromptError, PromptSpec};
use crate::schema::{EnumDef, Field, RecordDef, TypeDef, TypeExpr, TypeRegistry};

pub const LABELS: [&str; 49] = [
    "lists_createoradd",
    "calendar_query",
    "email_sendemail",
    "news_query",
    "play_music",
    "play_radio",
    "qa_maths",
    "email_query",
    "weather_query",
    "calendar_set",
    "iot_hue_lightdim",
    "takeaway_query",
    "social_post",
    "email_querycontact",
    "qa_factoid",
    "calendar_remove",
    "cooking_recipe",
    "lists_query",
    "general_quirky",
    "alarm_query",
    "takeaway_order",
    "iot_hue_lightup",
    "lists_remove",
    "qa_currency",
    "play_game",
    "play_audiobook",
    "qa_definition",
    "music_query",
    "datetime_query",
    "transport_query",
    "iot_hue_lightoff",
    "iot_hue_lightchange",
    "iot_hue_lighton",
    "alarm_set",
    "music_likeness",
    "recommendation_movies",
    "transport_ticket",
    "recommendation_locations",
    "audio_volume_mute",
    "iot_wemo_on",
    "play_podcasts",
    "datetime_convert",
    "audio_volume_other",
    "recommendation_events",
    "alarm_remove",
    "iot_coffee",
    "music_dislikeness",
    "general_joke",
    "social_query",
];

pub const NER_ENTITIES: [&str; 21] = [
    "passport_number",
    "bank_routing_number",
    "account_pin",
    "swift_bic_code",
    "password",
    "credit_card_number",
    "email",
    "phone_number",
    "person_name",
    "iban",
    "ipv6",
    "api_key",
    "street_address",
    "company",
    "local_latlng",
    "time",
    "employee_id",
    "customer_id",
    "date_of_birth",
    "ipv4",
    "bban",
];

pub const SYNTHETIC_GOAL: &str = "Generate a random person's information. The name must be chosen at random. \
Make it something you wouldn't normally choose.";

pub fn label_enum() -> EnumDef {
    EnumDef::new("Label", LABELS).with_meaning("Multilabel Classes")
}

/// Every entity class is an optional list of phrases.
pub fn ner_record() -> RecordDef {
    RecordDef::new(
        "NER",
        NER_ENTITIES.iter().map(|e| Field::new(*e, TypeExpr::optional(TypeExpr::list(TypeExpr::str())))).collect(),
    )
}

/// `UserAddress` then `User`.
pub fn user_types() -> Vec<TypeDef> {
    vec![
        RecordDef::new(
            "UserAddress",
            vec![
                Field::new("street", TypeExpr::str()),
                Field::new("city", TypeExpr::str()),
                Field::new("six_digit_postal_code", TypeExpr::int()),
                Field::new("country", TypeExpr::str()),
            ],
        )
        .into(),
        RecordDef::new(
            "User",
            vec![
                Field::new("name", TypeExpr::str()),
                Field::new("age", TypeExpr::int()),
                Field::new("address", TypeExpr::named("UserAddress")),
            ],
        )
        .into(),
    ]
}

/// Schemas of the food-image analysis example.
pub fn food_analysis_types() -> Vec<TypeDef> {
    let nutrients = ["calories", "protein", "carbohydrates", "fats", "fiber", "sodium"];
    vec![
        RecordDef::new("NutritionInformation", nutrients.iter().map(|n| Field::new(*n, TypeExpr::int())).collect())
            .into(),
        RecordDef::new(
            "FoodAnalysis",
            vec![
                Field::new("nutrition_info", TypeExpr::named("NutritionInformation")),
                Field::new("ingredients", TypeExpr::list(TypeExpr::str())),
                Field::new("health_rating", TypeExpr::semantic(TypeExpr::str(), "How Healthy is the Food")),
            ],
        )
        .into(),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Multilabel,
    Ner,
    SyntheticGen,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Multilabel => "multilabel",
            TaskKind::Ner => "ner",
            TaskKind::SyntheticGen => "synthetic",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multilabel" => Ok(TaskKind::Multilabel),
            "ner" => Ok(TaskKind::Ner),
            "synthetic" | "synthetic-gen" => Ok(TaskKind::SyntheticGen),
            other => Err(format!("unknown task `{other}` (expected multilabel, ner or synthetic)")),
        }
    }
}

/// One dataset sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetRow {
    Multilabel { id: String, text: String, labels: Vec<String> },
    Ner { id: String, text: String, entities: BTreeMap<String, Vec<String>> },
    Synthetic { id: String },
}

impl DatasetRow {
    pub fn synthetic(index: usize) -> Self {
        DatasetRow::Synthetic { id: format!("gen-{index:04}") }
    }

    pub fn id(&self) -> &str {
        match self {
            DatasetRow::Multilabel { id, .. } | DatasetRow::Ner { id, .. } | DatasetRow::Synthetic { id } => id,
        }
    }
}

/// Item sets compared by precision and recall: `("label", member)` for
/// classification, `(entity_field, phrase)` for NER.
pub type ItemSet = BTreeSet<(String, String)>;

#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub registry: Arc<TypeRegistry>,
    pub goal: String,
    pub context: Option<String>,
    pub output_type: TypeExpr,
    pub method: Method,
}

impl TaskSpec {
    pub fn new(kind: TaskKind) -> Self {
        let mut reg = TypeRegistry::new();
        let (goal, output_type) = match kind {
            TaskKind::Multilabel => {
                reg.register(label_enum()).expect("fixture schema");
                (default_goal("classify"), TypeExpr::list(TypeExpr::named("Label")))
            }
            TaskKind::Ner => {
                reg.register(ner_record()).expect("fixture schema");
                (default_goal("extract_entities"), TypeExpr::named("NER"))
            }
            TaskKind::SyntheticGen => {
                for def in user_types() {
                    reg.register(def).expect("fixture schema");
                }
                (SYNTHETIC_GOAL.to_string(), TypeExpr::named("User"))
            }
        };
        TaskSpec { kind, registry: Arc::new(reg), goal, context: None, output_type, method: Method::Standard }
    }

    pub fn multilabel() -> Self {
        Self::new(TaskKind::Multilabel)
    }

    pub fn ner() -> Self {
        Self::new(TaskKind::Ner)
    }

    pub fn synthetic() -> Self {
        Self::new(TaskKind::SyntheticGen)
    }

    pub fn prompt_for(&self, row: &DatasetRow) -> Result<PromptSpec, PromptError> {
        let mut builder = PromptSpec::builder(Arc::clone(&self.registry), self.goal.clone(), self.output_type.clone())
            .method(self.method);
        if let Some(context) = &self.context {
            builder = builder.context(context.clone());
        }
        match row {
            DatasetRow::Multilabel { text, .. } | DatasetRow::Ner { text, .. } => {
                builder = builder.input(Binding::new("Text", "text", Some(TypeExpr::str()), Value::str(text.clone())));
            }
            DatasetRow::Synthetic { .. } => {}
        }
        builder.build()
    }

    /// Gold answer of a row in the output type's canonical form.
    pub fn gold(&self, row: &DatasetRow) -> Option<Value> {
        match row {
            DatasetRow::Multilabel { labels, .. } => {
                Some(Value::List(labels.iter().map(|l| Value::enum_ref("Label", l.clone())).collect()))
            }
            DatasetRow::Ner { entities, .. } => Some(Value::object(
                "NER",
                NER_ENTITIES.iter().map(|field| {
                    let phrases = entities
                        .get(*field)
                        .map(|ps| Value::List(ps.iter().map(|p| Value::str(p.clone())).collect()))
                        .unwrap_or(Value::Null);
                    (*field, phrases)
                }),
            )),
            DatasetRow::Synthetic { .. } => None,
        }
    }

    /// Items of a canonical output value.
    pub fn items(&self, value: &Value) -> ItemSet {
        let mut set = ItemSet::new();
        match (self.kind, value) {
            (TaskKind::Multilabel, Value::List(items)) => {
                for item in items {
                    if let Value::EnumRef { member, .. } = item {
                        set.insert(("label".to_string(), member.clone()));
                    }
                }
            }
            (TaskKind::Ner, Value::Object { args, .. }) => {
                for (name, phrases) in args {
                    if let (Some(name), Value::List(phrases)) = (name, phrases) {
                        for p in phrases.iter().filter_map(Value::as_str) {
                            set.insert((name.clone(), p.to_string()));
                        }
                    }
                }
            }
            _ => {}
        }
        set
    }

    /// The generated name of a synthetic `User`.
    pub fn generated_name(value: &Value) -> Option<&str> {
        value.arg("name").and_then(Value::as_str)
    }
}
