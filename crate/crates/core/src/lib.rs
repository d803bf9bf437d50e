//! Structured output from language models through typed prompts.
//!
//! A call is described by a [`render::PromptSpec`]: a goal, typed input
//! bindings, optional information and context, and an output type drawn
//! from a [`schema::TypeRegistry`]. The prompt lists every type the output
//! depends on, one line each, with meanings attached to fields. The model
//! answers in a small constructor-call notation ([`notation`]), which is
//! parsed without evaluation and conformed to the output type
//! ([`validate`]). Failures are fed back to the model by the repair loop in
//! [`runtime`].
//!
//! ```
//! use std::sync::Arc;
//! use typed_prompt::client::{ChatTransport, ScriptedTransport};
//! use typed_prompt::notation::Value;
//! use typed_prompt::render::{Binding, PromptSpec};
//! use typed_prompt::runtime::{CallPolicy, Engine};
//! use typed_prompt::schema::{Field, RecordDef, TypeExpr, TypeRegistry};
//!
//! let mut registry = TypeRegistry::new();
//! registry
//!     .register(RecordDef::new("City", vec![
//!         Field::new("name", TypeExpr::str()),
//!         Field::new("population", TypeExpr::semantic(TypeExpr::int(), "Residents")),
//!     ]))
//!     .unwrap();
//! let spec = PromptSpec::builder(Arc::new(registry), "Largest city of the country", TypeExpr::named("City"))
//!     .input(Binding::new("Country", "country", Some(TypeExpr::str()), Value::str("Japan")))
//!     .build()
//!     .unwrap();
//!
//! let transport = ScriptedTransport::from_texts([
//!     "```output\nCity(name=\"Tokyo\", population=13960000)\n```",
//! ]);
//! let engine = Engine::new(Arc::new(transport) as Arc<dyn ChatTransport>);
//! let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
//! let outcome = rt.block_on(engine.invoke(&spec, &CallPolicy::default())).unwrap();
//! assert_eq!(
//!     outcome.result.unwrap().value.to_string(),
//!     "City(name=\"Tokyo\", population=13960000)"
//! );
//! ```

pub mod bench;
pub mod client;
pub mod notation;
pub mod render;
pub mod runtime;
pub mod schema;
pub mod validate;
