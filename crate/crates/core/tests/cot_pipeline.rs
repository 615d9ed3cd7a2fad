mod common;

use common::mini_kg;
use kgcot_core::cot_pipeline::{
    build_generation_prompt, build_pruning_prompt, chain_of, default_generation_template, default_pruning_template,
    export_sft_records, generate_cot, prune_cot, read_sft_records, run_batch, BatchOptions, ClientError, CoTRecord,
    CotError, DecodeOptions, FixedClock, HttpClient, MockBehavior, MockClient, PromptTemplate, Provenance, TemplateRole,
    TextGenClient, ASIDE_TAG, NO_PATHS,
};
use kgcot_core::path_engine::PathEngine;
use kgcot_core::qa_forge::{attach_paths_and_difficulty, default_category_specs, generate_qa, AttachOptions};
use kgcot_core::{InverseMode, QaRecord, TaskCategory};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

fn fixture_records() -> Vec<QaRecord> {
    let g = mini_kg(InverseMode::Virtual);
    let specs = default_category_specs();
    let spec = specs.iter().find(|s| s.name == TaskCategory::Indication).unwrap();
    let items = generate_qa(&g, spec, 100, 1).unwrap().items;
    let items = attach_paths_and_difficulty(items, &g, &specs, &PathEngine::standard(4), 4, &AttachOptions::default())
        .unwrap();
    items.iter().map(|i| i.to_record(&g)).collect()
}

fn record_with_paths(n: usize) -> QaRecord {
    fixture_records().into_iter().find(|r| r.paths.len() >= n).expect("fixture item with enough paths")
}

#[test]
fn generation_prompt_embeds_paths_in_order() {
    let mut rec = record_with_paths(2);
    rec.paths.truncate(2);
    let prompt = build_generation_prompt(&rec, &default_generation_template()).unwrap();
    let first = prompt.find(&rec.paths[0]).unwrap();
    let second = prompt.find(&rec.paths[1]).unwrap();
    assert!(first < second);
    assert_eq!(prompt.matches(rec.paths[0].as_str()).count(), 1);
    assert!(prompt.contains(&rec.question) && prompt.contains(&format!("Answer: {}", rec.answer())));
    assert!(!prompt.contains(NO_PATHS));

    rec.paths.clear();
    let prompt = build_generation_prompt(&rec, &default_generation_template()).unwrap();
    assert!(prompt.contains(NO_PATHS));
}

#[test]
fn pruning_prompt_contains_chain_once() {
    let chain = "Step 1: X treats Y.\nAdditional knowledge: Y is chronic.\nSo the answer is Y.";
    let prompt = build_pruning_prompt("Q?", chain, &default_pruning_template()).unwrap();
    assert_eq!(prompt.matches(chain).count(), 1);
    assert_eq!(chain_of(&prompt), Some(chain));
    assert!(matches!(build_pruning_prompt("Q?", "  \n", &default_pruning_template()), Err(CotError::Template(_))));
    // Templates are role-checked.
    assert!(build_pruning_prompt("Q?", chain, &default_generation_template()).is_err());
    assert!(PromptTemplate::new("p", TemplateRole::Pruning, "{question} {chain} {answer}").is_err());
}

#[test]
fn mock_clients_are_pure() {
    let opts = DecodeOptions::default();
    let prompt = build_pruning_prompt("Q?", "a\nAdditional knowledge: b\nc", &default_pruning_template()).unwrap();
    assert_eq!(MockClient::new(MockBehavior::EchoChain).complete(&prompt, &opts).unwrap(), "a\nAdditional knowledge: b\nc");
    assert_eq!(MockClient::new(MockBehavior::DropLines("b".into())).complete(&prompt, &opts).unwrap(), "a\nc");
    assert_eq!(MockClient::scripted().complete(&prompt, &opts).unwrap(), "a\nc");
    let table = MockClient::table([("hello", "world")], None);
    assert_eq!(table.complete("hello", &opts).unwrap(), "world");
    assert!(matches!(table.complete("other", &opts), Err(ClientError::Mock(_))));
    assert!(matches!(generate_cot(&MockClient::canned("  "), "p", &opts), Err(CotError::EmptyCompletion { .. })));
}

#[test]
fn scripted_generation_then_pruning() {
    let rec = record_with_paths(1);
    let mock = MockClient::scripted();
    let opts = DecodeOptions::default();
    let gen = build_generation_prompt(&rec, &default_generation_template()).unwrap();
    let chain = generate_cot(&mock, &gen, &opts).unwrap();
    assert!(chain.contains(ASIDE_TAG));
    assert!(chain.ends_with(&format!("the answer is {}.", rec.answer())));
    let pruned = prune_cot(&mock, &build_pruning_prompt(&rec.question, &chain, &default_pruning_template()).unwrap(), &opts)
        .unwrap();
    assert!(!pruned.contains(ASIDE_TAG));
    assert_eq!(pruned.lines().count(), chain.lines().count() - 1);
}

fn sample_record(id: &str) -> CoTRecord {
    CoTRecord {
        item_id: id.into(),
        question: "Which disease can be treated with \"X\"?".into(),
        answer: "Y".into(),
        paths_text: "linear\td=1\tBasic\tX -[indication]-> Y".into(),
        chain_raw: "line one\nline two\ttabbed\nünïcode".into(),
        chain_pruned: "line one\r\nline two".into(),
        provenance: Provenance { client: "mock:canned".into(), decode: DecodeOptions::default(), started_ms: 1, finished_ms: 2 },
    }
}

#[test]
fn export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sft.jsonl");
    let recs = vec![sample_record("a"), sample_record("b"), sample_record("c")];
    assert_eq!(export_sft_records(&recs, &path).unwrap(), 3);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(read_sft_records(&path).unwrap(), recs);

    let empty = dir.path().join("empty.jsonl");
    assert_eq!(export_sft_records(&[], &empty).unwrap(), 0);
    assert_eq!(std::fs::read(&empty).unwrap(), b"");

    let mut bad = sample_record("d");
    bad.chain_pruned.clear();
    assert!(matches!(export_sft_records(&[bad], &path), Err(CotError::Incomplete(id)) if id == "d"));
    assert_eq!(read_sft_records(&path).unwrap(), recs, "failed export leaves the old file");

    let missing = dir.path().join("no/such/dir/out.jsonl");
    assert!(matches!(export_sft_records(&recs, &missing), Err(CotError::Io { .. })));
    assert!(!missing.exists());
}

#[test]
fn batch_is_deterministic_across_jobs() {
    let items = fixture_records();
    let (gen, prune) = (default_generation_template(), default_pruning_template());
    let run = |jobs| {
        let opts = BatchOptions { jobs, ..Default::default() };
        run_batch(&items, &MockClient::scripted(), &gen, &prune, &opts, &FixedClock(7)).unwrap()
    };
    let one = run(1);
    assert_eq!(one.records.len(), items.len());
    assert!(one.failures.is_empty());
    assert_eq!(kgcot_core::cot_pipeline::records_to_jsonl(&one.records), kgcot_core::cot_pipeline::records_to_jsonl(&run(4).records));
}

/// Fails on prompts mentioning a chosen item's question.
struct Flaky {
    bad: String,
    calls: Mutex<usize>,
}

impl TextGenClient for Flaky {
    fn name(&self) -> String {
        "flaky".into()
    }

    fn complete(&self, prompt: &str, options: &DecodeOptions) -> Result<String, ClientError> {
        *self.calls.lock().unwrap() += 1;
        if prompt.contains(&self.bad) {
            return Err(ClientError::Transport { attempts: 3, message: "refused".into() });
        }
        MockClient::scripted().complete(prompt, options)
    }
}

#[test]
fn batch_failure_is_per_record_and_resumable() {
    let items = fixture_records();
    assert!(items.len() >= 3);
    let (gen, prune) = (default_generation_template(), default_pruning_template());
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("ckpt.jsonl");
    let opts = BatchOptions { jobs: 2, checkpoint: Some(ckpt.clone()), ..Default::default() };

    let flaky = Flaky { bad: items[1].question.clone(), calls: Mutex::new(0) };
    let first = run_batch(&items, &flaky, &gen, &prune, &opts, &FixedClock(0)).unwrap();
    let failed: Vec<&str> = first.failures.iter().map(|f| f.item_id.as_str()).collect();
    assert!(failed.contains(&items[1].id.as_str()));
    assert_eq!(first.records.len() + first.failures.len(), items.len());

    let calls = Mutex::new(0);
    let healthy = Flaky { bad: "\u{0}never".into(), calls };
    let second = run_batch(&items, &healthy, &gen, &prune, &opts, &FixedClock(0)).unwrap();
    assert_eq!(second.resumed, first.records.len());
    assert_eq!(*healthy.calls.lock().unwrap(), 2 * first.failures.len());
    assert_eq!(second.records.len(), items.len());
    assert!(second.failures.is_empty());
}

#[test]
fn template_errors_fail_batch_up_front() {
    let items = fixture_records();
    let flaky = Flaky { bad: String::new(), calls: Mutex::new(0) };
    let err = run_batch(&items, &flaky, &default_pruning_template(), &default_pruning_template(), &BatchOptions::default(), &FixedClock(0));
    assert!(err.is_err());
    assert_eq!(*flaky.calls.lock().unwrap(), 0);
}

struct Seen {
    body: String,
    auth: Option<String>,
}

/// Serves one canned (status, body) reply per connection, recording requests.
fn stub(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/complete", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let (mut len, mut auth) = (0, None);
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (k, v) = line.split_once(':').unwrap_or((line, ""));
                match k.to_ascii_lowercase().as_str() {
                    "content-length" => len = v.trim().parse().unwrap(),
                    "authorization" => auth = Some(v.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen { body: String::from_utf8(buf).unwrap(), auth });
            let mut out = stream;
            write!(
                out,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

#[test]
fn http_client_round_trip_with_token() {
    std::env::set_var("KGCOT_TEST_TOKEN_A", "s3cret");
    let (url, seen) = stub(vec![(200, r#"{"text":"Step 1.\nDone."}"#.into())]);
    let client = HttpClient::new(url, "KGCOT_TEST_TOKEN_A", Duration::from_secs(5));
    let opts = DecodeOptions { max_tokens: 64, temperature: 0.5 };
    assert_eq!(client.complete("hi \"there\"", &opts).unwrap(), "Step 1.\nDone.");
    let seen = seen.lock().unwrap();
    let body: serde_json::Value = serde_json::from_str(&seen[0].body).unwrap();
    assert_eq!(body["prompt"], "hi \"there\"");
    assert_eq!(body["max_tokens"], 64);
    assert_eq!(body["temperature"], 0.5);
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer s3cret"));
}

#[test]
fn http_client_retries_server_errors() {
    let (url, seen) = stub(vec![(503, "{}".into()), (429, "{}".into()), (200, r#"{"text":"ok"}"#.into())]);
    let client = HttpClient::new(url, "KGCOT_TEST_TOKEN_UNSET", Duration::from_secs(5)).with_retry(3, Duration::from_millis(1));
    assert_eq!(client.complete("p", &DecodeOptions::default()).unwrap(), "ok");
    assert_eq!(seen.lock().unwrap().len(), 3);
    assert!(seen.lock().unwrap()[0].auth.is_none());

    let (url, _) = stub(vec![(500, "{}".into()), (502, "{}".into())]);
    let client = HttpClient::new(url, "KGCOT_TEST_TOKEN_UNSET", Duration::from_secs(5)).with_retry(2, Duration::from_millis(1));
    assert!(matches!(client.complete("p", &DecodeOptions::default()), Err(ClientError::Transport { attempts: 2, .. })));
}

#[test]
fn http_client_client_errors_are_fatal() {
    let (url, seen) = stub(vec![(400, "bad prompt".into()), (200, r#"{"text":"late"}"#.into())]);
    let client = HttpClient::new(url, "KGCOT_TEST_TOKEN_UNSET", Duration::from_secs(5)).with_retry(3, Duration::from_millis(1));
    match client.complete("p", &DecodeOptions::default()) {
        Err(ClientError::Status { status: 400, body }) => assert_eq!(body, "bad prompt"),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 1);

    let (url, _) = stub(vec![(200, "not json".into())]);
    let client = HttpClient::new(url, "KGCOT_TEST_TOKEN_UNSET", Duration::from_secs(5));
    assert!(matches!(client.complete("p", &DecodeOptions::default()), Err(ClientError::Content(_))));
}
