use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use prehoc::corpus::{write_jsonl, GoldDoc, Split};
use prehoc::suite::{planted_labeled, planted_vocabularies, two_topic_suite};
use prehoc_core::synth::planted_low;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn prehoc(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prehoc")).arg("--store").arg(store).args(args).output().unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn train_explain_segment_and_jargon() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let corpus = dir.path().join("corpus.jsonl");
    write_jsonl(&corpus, &planted_labeled(40, 5, Split::Train)).unwrap();
    let c = corpus.to_str().unwrap();

    let meta = json(&prehoc(&store, &["--seed", "9", "train", "--corpus", "laptops", "--input", c]));
    assert_eq!(meta["version"], 1);
    assert_eq!(meta["seed"], 9);
    let again = json(&prehoc(&store, &["--seed", "9", "train", "--corpus", "laptops", "--input", c]));
    assert_eq!(again["version"], 2);
    let v1 = std::fs::read(store.join("laptops/v1/doc_model.json")).unwrap();
    assert_eq!(v1, std::fs::read(store.join("laptops/v2/doc_model.json")).unwrap());

    let review = dir.path().join("review.txt");
    let text = planted_low(&mut ChaCha8Rng::seed_from_u64(1), &planted_vocabularies());
    std::fs::write(&review, &text).unwrap();
    let r = review.to_str().unwrap();
    let first = prehoc(&store, &["explain", "--corpus", "laptops", "--file", r]);
    assert!(json(&first)["docQuality"]["label"].is_string());
    assert_eq!(first.stdout, prehoc(&store, &["explain", "--corpus", "laptops", "--file", r]).stdout);

    let seg = json(&prehoc(&store, &["segment", "--model", "laptops", "--window", "2", "--threshold", "auto", "--file", r]));
    let segs = seg["segments"].as_array().unwrap();
    let chars: Vec<char> = text.chars().collect();
    for s in segs {
        let (a, b) = (s["startChar"].as_u64().unwrap() as usize, s["endChar"].as_u64().unwrap() as usize);
        assert_eq!(chars[a..b].iter().collect::<String>(), s["text"].as_str().unwrap());
    }

    let sets = json(&prehoc(&store, &["mine-jargon", "--input", c, "--min-support", "0.5"]));
    for s in sets.as_array().unwrap() {
        assert!(s["support"].as_f64().unwrap() >= 0.5);
    }

    let bad = prehoc(&store, &["explain", "--corpus", "missing", "--file", r]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("missing"));
    let bad = prehoc(&store, &["segment", "--model", "laptops", "--threshold", "deep", "--file", r]);
    assert!(!bad.status.success());
}

#[test]
fn validate_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let v = json(&prehoc(&store, &["validate", "--table", "reviews", "--record", r#"{"rating": 7}"#]));
    let vs = v["results"][0]["violations"].as_array().unwrap();
    assert_eq!(vs.len(), 1);
    assert_eq!(vs[0]["constraintName"], "reviews_rating_domain");
    assert!(!prehoc(&store, &["validate", "--table", "nope", "--record", "{}"]).status.success());

    let rep = json(&prehoc(&store, &["--seed", "7", "oracle-report", "--instances", "10"]));
    assert_eq!(rep["instances"], 10);
    assert!(rep["top1Agreement"].as_f64().unwrap() <= 1.0);
    assert!(rep["meanRankCorrelation"].is_number());

    let suite = two_topic_suite(12, 3).unwrap();
    let gold = dir.path().join("gold.jsonl");
    write_jsonl::<GoldDoc>(&gold, &suite.gold).unwrap();
    let lda = dir.path().join("lda.json");
    std::fs::write(&lda, serde_json::to_vec(&suite.model).unwrap()).unwrap();
    let bench = json(&prehoc(&store, &["bench-segment", "--gold", gold.to_str().unwrap(), "--model", lda.to_str().unwrap()]));
    let ranking = bench["ranking"].as_array().unwrap();
    assert_eq!(ranking.len(), 5);
    assert!(bench["recommended"].as_str().unwrap().starts_with("topictiling"));
}

#[test]
fn serve_on_an_ephemeral_port() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_prehoc"))
        .args(["--store", dir.path().to_str().unwrap(), "serve", "--port", "0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("address line").to_string();
    let port: u16 = addr.rsplit(':').next().unwrap().parse().unwrap();
    assert_ne!(port, 0);

    let mut s = TcpStream::connect(&addr).unwrap();
    write!(s, "GET /models HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.ends_with("{\"models\":[]}"), "{resp}");
}
