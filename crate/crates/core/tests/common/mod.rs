//! Seeded generators and independent oracles shared by the integration
//! tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeSet;

use num_bigint::BigInt;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use typed_prompt::notation::Value;
use typed_prompt::schema::{EnumDef, Field, RecordDef, TypeDef, TypeExpr, TypeRegistry};
use typed_prompt::validate::{FieldPath, PathSegment};

pub const MAX_DEPTH: usize = 6;
pub const MAX_WIDTH: usize = 8;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const WORDS: [&str; 12] =
    ["alpha", "beta", "gamma", "delta", "city", "name", "label", "score", "item", "kind", "zeta", "omega"];

fn ident(rng: &mut ChaCha8Rng, prefix: &str, n: usize) -> String {
    format!("{prefix}{}_{n}", WORDS.choose(rng).unwrap())
}

fn meaning(rng: &mut ChaCha8Rng) -> String {
    ["Year of Birth", "Farenheit", "How Healthy is the Food", "Residents", "Full Name"].choose(rng).unwrap().to_string()
}

/// A random acyclic registry: a few enums, then records whose fields only
/// reference definitions created before them.
pub fn random_registry(rng: &mut ChaCha8Rng) -> TypeRegistry {
    let mut reg = TypeRegistry::new();
    let mut names: Vec<String> = Vec::new();
    for e in 0..rng.random_range(0..=2) {
        let name = format!("E{e}");
        let members: Vec<String> = (0..rng.random_range(1..=6)).map(|m| ident(rng, "m", m)).collect();
        let mut def = EnumDef::new(name.clone(), members);
        if rng.random_bool(0.5) {
            def = def.with_meaning(meaning(rng));
        }
        reg.register(def).unwrap();
        names.push(name);
    }
    for r in 0..rng.random_range(1..=4) {
        let name = format!("R{r}");
        let fields = (0..rng.random_range(1..=4))
            .map(|f| Field::new(ident(rng, "f", f), random_type(rng, 2, &names)))
            .collect();
        reg.register(RecordDef::new(name.clone(), fields)).unwrap();
        names.push(name);
    }
    reg
}

pub fn defined_names(reg: &TypeRegistry) -> Vec<String> {
    reg.iter().map(|d| d.name().to_string()).collect()
}

/// A valid type expression of nesting at most `depth` over `names`.
pub fn random_type(rng: &mut ChaCha8Rng, depth: usize, names: &[String]) -> TypeExpr {
    let roll = if depth == 0 { rng.random_range(0..5) } else { rng.random_range(0..11) };
    match roll {
        0 => TypeExpr::int(),
        1 => TypeExpr::float(),
        2 => TypeExpr::str(),
        3 => TypeExpr::bool(),
        4 => match names.choose(rng) {
            Some(n) => TypeExpr::named(n.clone()),
            None => TypeExpr::str(),
        },
        5 | 6 => TypeExpr::list(random_type(rng, depth - 1, names)),
        7 => TypeExpr::tuple((0..rng.random_range(0..=3)).map(|_| random_type(rng, depth - 1, names)).collect()),
        8 => {
            let key = if rng.random_bool(0.5) { TypeExpr::str() } else { TypeExpr::int() };
            TypeExpr::mapping(key, random_type(rng, depth - 1, names))
        }
        9 => {
            let inner = random_type(rng, depth - 1, names);
            if inner.is_optional() {
                inner
            } else {
                TypeExpr::optional(inner)
            }
        }
        _ => {
            let inner = random_type(rng, depth - 1, names);
            if matches!(inner, TypeExpr::Semantic(..)) {
                inner
            } else {
                TypeExpr::semantic(inner, meaning(rng))
            }
        }
    }
}

/// A random registry and a root type over it.
pub fn random_schema(rng: &mut ChaCha8Rng) -> (TypeRegistry, TypeExpr) {
    let reg = random_registry(rng);
    let names = defined_names(&reg);
    let root = random_type(rng, 3, &names);
    (reg, root)
}

pub fn random_string(rng: &mut ChaCha8Rng) -> String {
    const POOL: [&str; 16] =
        ["a", "Z", " ", "\"", "'", "\\", "\n", "\t", "\r", "é", "日本", "🦀", "\u{1}", "\u{7f}", "x=1", ")"];
    (0..rng.random_range(0..=8)).map(|_| *POOL.choose(rng).unwrap()).collect()
}

pub fn random_int(rng: &mut ChaCha8Rng) -> BigInt {
    match rng.random_range(0..4) {
        0 => BigInt::from(rng.random_range(-10i64..=10)),
        1 => BigInt::from(rng.random::<i64>()),
        2 => BigInt::from(rng.random::<i64>()) * BigInt::from(rng.random::<u64>()) * BigInt::from(rng.random::<u64>()),
        _ => BigInt::from(rng.random_range(0..2000)),
    }
}

pub fn random_float(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..5) {
        0 => rng.random_range(-1000.0..1000.0),
        1 => *[0.0, 1.0, -0.5, 0.1 + 0.2, 1e21, 1.5e-9, f64::MAX, f64::MIN_POSITIVE].choose(rng).unwrap(),
        2 => f64::from_bits(rng.random::<u64>() & !(0x7ff << 52) | (rng.random_range(1..0x7fe_u64) << 52)),
        3 => rng.random_range(-10i32..10) as f64,
        _ => rng.random::<f64>() * 10f64.powi(rng.random_range(-30..30)),
    }
}

/// A canonical value of `ty`: objects carry every field by name in
/// declaration order, enums are `EnumRef`s, floats are `Float`s.
pub fn random_value(rng: &mut ChaCha8Rng, ty: &TypeExpr, reg: &TypeRegistry, depth: usize) -> Value {
    match ty {
        TypeExpr::Primitive(p) => match p.name() {
            "int" => Value::Int(random_int(rng)),
            "float" => Value::Float(random_float(rng)),
            "str" => Value::Str(random_string(rng)),
            _ => Value::Bool(rng.random_bool(0.5)),
        },
        TypeExpr::Semantic(inner, _) => random_value(rng, inner, reg, depth),
        TypeExpr::Optional(inner) => {
            if depth >= MAX_DEPTH || rng.random_bool(0.3) {
                Value::Null
            } else {
                random_value(rng, inner, reg, depth)
            }
        }
        TypeExpr::List(elem) => {
            let n = if depth >= MAX_DEPTH { 0 } else { rng.random_range(0..=MAX_WIDTH.min(4)) };
            Value::List((0..n).map(|_| random_value(rng, elem, reg, depth + 1)).collect())
        }
        TypeExpr::Tuple(elems) => Value::Tuple(elems.iter().map(|e| random_value(rng, e, reg, depth + 1)).collect()),
        TypeExpr::Mapping(key, value) => {
            let n = if depth >= MAX_DEPTH { 0 } else { rng.random_range(0..=4) };
            let mut pairs: Vec<(Value, Value)> = Vec::new();
            for _ in 0..n {
                let k = random_value(rng, key, reg, depth + 1);
                if pairs.iter().all(|(existing, _)| existing != &k) {
                    pairs.push((k, random_value(rng, value, reg, depth + 1)));
                }
            }
            Value::Map(pairs)
        }
        TypeExpr::Named(name) => match reg.get(name).expect("generated names resolve") {
            TypeDef::Enum(def) => Value::enum_ref(def.name.clone(), def.members.choose(rng).unwrap().clone()),
            TypeDef::Record(rec) => Value::Object {
                type_name: rec.name.clone(),
                args: rec
                    .fields
                    .iter()
                    .map(|f| (Some(f.name.clone()), random_value(rng, &f.ty, reg, depth + 1)))
                    .collect(),
            },
        },
    }
}

/// Any syntactically valid value, schema or not, including positional
/// object arguments.
pub fn random_free_value(rng: &mut ChaCha8Rng, depth: usize) -> Value {
    let roll = if depth >= MAX_DEPTH { rng.random_range(0..6) } else { rng.random_range(0..11) };
    match roll {
        0 => Value::Null,
        1 => Value::Bool(rng.random_bool(0.5)),
        2 => Value::Int(random_int(rng)),
        3 => Value::Float(random_float(rng)),
        4 => Value::Str(random_string(rng)),
        5 => Value::enum_ref(ident(rng, "E", 0), ident(rng, "m", 1)),
        6 => Value::List((0..rng.random_range(0..=MAX_WIDTH)).map(|_| random_free_value(rng, depth + 1)).collect()),
        7 => Value::Tuple((0..rng.random_range(0..=3)).map(|_| random_free_value(rng, depth + 1)).collect()),
        8 => {
            let mut pairs: Vec<(Value, Value)> = Vec::new();
            for _ in 0..rng.random_range(0..=4) {
                let k = if rng.random_bool(0.5) { Value::Str(random_string(rng)) } else { Value::Int(random_int(rng)) };
                if pairs.iter().all(|(e, _)| e != &k) {
                    pairs.push((k, random_free_value(rng, depth + 1)));
                }
            }
            Value::Map(pairs)
        }
        _ => {
            let positional = rng.random_range(0..=2);
            let named = rng.random_range(0..=3);
            let mut args: Vec<(Option<String>, Value)> =
                (0..positional).map(|_| (None, random_free_value(rng, depth + 1))).collect();
            for i in 0..named {
                args.push((Some(ident(rng, "a", i)), random_free_value(rng, depth + 1)));
            }
            Value::Object { type_name: ident(rng, "T", 0), args }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corruption {
    DropField,
    WrongType,
    BadEnumMember,
}

/// A site in a canonical value where a corruption can be applied.
#[derive(Debug, Clone)]
struct Site {
    path: Vec<PathSegment>,
    kind: Corruption,
    ty: TypeExpr,
    field: Option<String>,
}

fn collect_sites(value: &Value, ty: &TypeExpr, reg: &TypeRegistry, path: &mut Vec<PathSegment>, out: &mut Vec<Site>) {
    let bare = match ty {
        TypeExpr::Semantic(inner, _) => return collect_sites(value, inner, reg, path, out),
        TypeExpr::Optional(inner) => {
            if *value == Value::Null {
                out.push(Site { path: path.clone(), kind: Corruption::WrongType, ty: ty.clone(), field: None });
                return;
            }
            return collect_sites(value, inner, reg, path, out);
        }
        other => other,
    };
    out.push(Site { path: path.clone(), kind: Corruption::WrongType, ty: bare.clone(), field: None });
    match (bare, value) {
        (TypeExpr::List(elem), Value::List(items)) => {
            for (i, item) in items.iter().enumerate() {
                path.push(PathSegment::Index(i));
                collect_sites(item, elem, reg, path, out);
                path.pop();
            }
        }
        (TypeExpr::Tuple(elems), Value::Tuple(items)) => {
            for (i, (item, elem)) in items.iter().zip(elems).enumerate() {
                path.push(PathSegment::Index(i));
                collect_sites(item, elem, reg, path, out);
                path.pop();
            }
        }
        (TypeExpr::Mapping(_, vt), Value::Map(pairs)) => {
            for (k, v) in pairs {
                path.push(PathSegment::Key(typed_prompt::notation::render_value(k)));
                collect_sites(v, vt, reg, path, out);
                path.pop();
            }
        }
        (TypeExpr::Named(name), _) => match reg.get(name) {
            Some(TypeDef::Enum(_)) => {
                out.push(Site { path: path.clone(), kind: Corruption::BadEnumMember, ty: bare.clone(), field: None })
            }
            Some(TypeDef::Record(rec)) => {
                for field in &rec.fields {
                    path.push(PathSegment::Field(field.name.clone()));
                    if !field.ty.is_optional() {
                        out.push(Site {
                            path: path.clone(),
                            kind: Corruption::DropField,
                            ty: field.ty.clone(),
                            field: Some(field.name.clone()),
                        });
                    }
                    collect_sites(value.arg(&field.name).unwrap(), &field.ty, reg, path, out);
                    path.pop();
                }
            }
            None => {}
        },
        _ => {}
    }
}

/// A value that `ty` (with wrappers removed) never accepts.
fn wrong_value(rng: &mut ChaCha8Rng, ty: &TypeExpr) -> Value {
    let alien = Value::Object { type_name: "Corrupted".into(), args: vec![] };
    if rng.random_bool(0.3) {
        return alien;
    }
    match ty.without_meaning() {
        TypeExpr::Optional(_) => Value::Tuple(vec![Value::Bool(true), Value::Bool(false), Value::Null]),
        TypeExpr::Primitive(p) => match p.name() {
            "int" => Value::str("7"),
            "float" => Value::Bool(true),
            "str" => Value::int(7),
            _ => Value::Float(1.0),
        },
        TypeExpr::List(_) => Value::str("[]"),
        TypeExpr::Tuple(_) => Value::List(vec![]),
        TypeExpr::Mapping(..) => Value::List(vec![]),
        TypeExpr::Named(_) => Value::Float(0.5),
        TypeExpr::Semantic(..) => alien,
    }
}

fn replace_at(value: &mut Value, path: &[PathSegment], f: &mut dyn FnMut(&mut Value)) {
    let Some((head, rest)) = path.split_first() else {
        f(value);
        return;
    };
    let child = match (head, value) {
        (PathSegment::Index(i), Value::List(items) | Value::Tuple(items)) => &mut items[*i],
        (PathSegment::Key(k), Value::Map(pairs)) => {
            &mut pairs.iter_mut().find(|(key, _)| &typed_prompt::notation::render_value(key) == k).unwrap().1
        }
        (PathSegment::Field(name), Value::Object { args, .. }) => {
            &mut args.iter_mut().find(|(n, _)| n.as_deref() == Some(name.as_str())).unwrap().1
        }
        _ => panic!("path does not address the value"),
    };
    replace_at(child, rest, f);
}

/// Applies one random corruption; returns the corrupted value, the kind,
/// and the path it should be reported at.
pub fn corrupt(
    rng: &mut ChaCha8Rng,
    value: &Value,
    ty: &TypeExpr,
    reg: &TypeRegistry,
) -> (Value, Corruption, FieldPath) {
    let mut sites = Vec::new();
    collect_sites(value, ty, reg, &mut Vec::new(), &mut sites);
    let kind = *[Corruption::DropField, Corruption::WrongType, Corruption::BadEnumMember].choose(rng).unwrap();
    let matching: Vec<&Site> = sites.iter().filter(|s| s.kind == kind).collect();
    let site = if matching.is_empty() { sites.choose(rng).unwrap() } else { matching.choose(rng).unwrap() };
    let mut out = value.clone();
    match site.kind {
        Corruption::DropField => {
            let (_, parent) = site.path.split_last().unwrap();
            let field = site.field.clone().unwrap();
            replace_at(&mut out, parent, &mut |v| {
                if let Value::Object { args, .. } = v {
                    args.retain(|(n, _)| n.as_deref() != Some(field.as_str()));
                }
            });
        }
        Corruption::WrongType => {
            let bad = wrong_value(rng, &site.ty);
            replace_at(&mut out, &site.path, &mut |v| *v = bad.clone());
        }
        Corruption::BadEnumMember => {
            replace_at(&mut out, &site.path, &mut |v| {
                if let Value::EnumRef { member, .. } = v {
                    member.push_str("_not_a_member");
                }
            });
        }
    }
    (out, site.kind, FieldPath(site.path.clone()))
}

/// Brute-force pooled counts: walks the label universe instead of set
/// intersections.
pub fn oracle_prf(predicted: &[BTreeSet<u8>], gold: &[BTreeSet<u8>], universe: u8) -> (f64, f64, f64) {
    let (mut tp, mut fp, mut fn_) = (0u32, 0u32, 0u32);
    for s in 0..gold.len() {
        for label in 0..universe {
            match (predicted[s].contains(&label), gold[s].contains(&label)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// A random small instance: up to 10 samples over up to 6 labels.
pub fn random_prf_instance(rng: &mut ChaCha8Rng) -> (Vec<BTreeSet<u8>>, Vec<BTreeSet<u8>>, u8) {
    let universe = rng.random_range(1..=6u8);
    let samples = rng.random_range(0..=10);
    let set = |rng: &mut ChaCha8Rng| (0..universe).filter(|_| rng.random_bool(0.4)).collect::<BTreeSet<u8>>();
    let predicted = (0..samples).map(|_| set(rng)).collect();
    let gold = (0..samples).map(|_| set(rng)).collect();
    (predicted, gold, universe)
}

/// Byte-level mutations of `text` for fuzzing.
pub fn mutate(rng: &mut ChaCha8Rng, text: &str) -> String {
    const JUNK: [&str; 14] = ["(", ")", "[", "]", "{", "}", ",", "=", ".", "\"", "'", "\\u12", "1e", "\u{0}"];
    let mut chars: Vec<char> = text.chars().collect();
    for _ in 0..rng.random_range(1..=4) {
        let at = rng.random_range(0..=chars.len());
        match rng.random_range(0..3) {
            0 if at < chars.len() => {
                chars.remove(at);
            }
            1 => {
                for (i, c) in JUNK.choose(rng).unwrap().chars().enumerate() {
                    chars.insert(at + i, c);
                }
            }
            _ => chars.truncate(at),
        }
    }
    chars.into_iter().collect()
}

pub fn fixtures_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub const PERSON_LINE: &str =
    "Person (Class) -> Person(first_name: str, last_name: str, yob: int - Year of Birth, likes: list[str])";
pub const PERSON_INPUT_LINE: &str = "Name of the Person (name) (str) = \"Albert Einstein\"";
pub const PERSON_REPLY: &str =
    "```output\nPerson(first_name=\"Albert\", last_name=\"Einstein\", yob=1879, likes=[\"Physics\", \"Violin\"])\n```";
pub const PERSON_MALFORMED_REPLY: &str = "```output\nPerson(first_name=\"A\"\n```";

pub fn person_registry() -> TypeRegistry {
    let mut reg = TypeRegistry::new();
    reg.register(RecordDef::new(
        "Person",
        vec![
            Field::new("first_name", TypeExpr::str()),
            Field::new("last_name", TypeExpr::str()),
            Field::new("yob", TypeExpr::semantic(TypeExpr::int(), "Year of Birth")),
            Field::new("likes", TypeExpr::list(TypeExpr::str())),
        ],
    ))
    .unwrap();
    reg
}

pub fn person_spec() -> typed_prompt::render::PromptSpec {
    use typed_prompt::render::{Binding, PromptSpec};
    PromptSpec::builder(
        std::sync::Arc::new(person_registry()),
        "Get the Famous Person for the Given Name",
        TypeExpr::named("Person"),
    )
    .input(Binding::new("Name of the Person", "name", Some(TypeExpr::str()), Value::str("Albert Einstein")))
    .build()
    .unwrap()
}

pub fn transcripts_dir() -> std::path::PathBuf {
    fixtures_dir().join("transcripts")
}

/// Compares `actual` with the stored file byte for byte. With
/// `UPDATE_GOLDEN=1` in the environment the file is rewritten instead.
pub fn check_file(path: &std::path::Path, actual: &str) -> Result<(), String> {
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        let at = expected.bytes().zip(actual.bytes()).take_while(|(a, b)| a == b).count();
        Err(format!("{} differs from the stored copy at byte {at}", path.display()))
    }
}

pub fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap()
}

/// Records one run of `spec` over scripted replies into a transcript and
/// returns the transcript text.
pub fn record_call(
    spec: &typed_prompt::render::PromptSpec,
    policy: &typed_prompt::runtime::CallPolicy,
    replies: &[&str],
) -> String {
    use std::sync::Arc;
    use typed_prompt::client::{ChatTransport, RecordingTransport, ScriptedTransport};
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let recorder = RecordingTransport::create(ScriptedTransport::from_texts(replies.iter().copied()), &path).unwrap();
    let engine = typed_prompt::runtime::Engine::new(Arc::new(recorder) as Arc<dyn ChatTransport>);
    let _ = runtime().block_on(engine.invoke(spec, policy));
    std::fs::read_to_string(&path).unwrap()
}

/// Runs `spec` against a stored transcript and returns the outcome as
/// JSON, whether or not it succeeded.
pub fn replay_call(
    spec: &typed_prompt::render::PromptSpec,
    policy: &typed_prompt::runtime::CallPolicy,
    transcript: &std::path::Path,
) -> (bool, typed_prompt::runtime::CallOutcome, String) {
    use std::sync::Arc;
    use typed_prompt::client::{ChatTransport, ReplayTransport};
    use typed_prompt::runtime::{Engine, RuntimeError};
    let replay = ReplayTransport::open(transcript).unwrap();
    let engine = Engine::new(Arc::new(replay) as Arc<dyn ChatTransport>);
    let (ok, outcome) = match runtime().block_on(engine.invoke(spec, policy)) {
        Ok(o) => (true, o),
        Err(RuntimeError::Exhausted(o)) => (false, *o),
        Err(e) => panic!("replay failed: {e}"),
    };
    let json = serde_json::to_string_pretty(&outcome).unwrap();
    (ok, outcome, json)
}
