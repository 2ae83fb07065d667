use std::fs;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::mpsc;
use std::thread;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn kgbuild(args: &[&str]) -> Output {
    kgbuild_env(args, &[])
}

fn kgbuild_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kgbuild"));
    cmd.args(args).env_remove("RUST_LOG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_writes_golden_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixtures().join("e2e/triples.json");
    let out = kgbuild(&["pipeline", path(&config), "--output-dir", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["kb.json", "triples.jsonl", "quality.json", "graph.dot"] {
        let got = fs::read(dir.path().join(name)).unwrap();
        let want = fs::read(fixtures().join("e2e/golden/triples").join(name)).unwrap();
        assert!(got == want, "{name} differs from golden");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["counts"]["kb_triples"], 23);
}

#[test]
fn pipeline_mode_override_is_checked_against_backend() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixtures().join("e2e/triples.json");
    let out = kgbuild(&["pipeline", path(&config), "--output-dir", path(dir.path()), "--mode", "ontology"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("mode"), "{}", stderr(&out));
}

#[test]
fn bad_config_exits_2_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixtures().join("e2e/triples.json")).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json["backends"][0]["temperature"] = serde_json::json!("warm");
    let config = dir.path().join("bad.json");
    fs::write(&config, json.to_string()).unwrap();
    let out = kgbuild(&["pipeline", path(&config)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("backends[0].temperature"), "{}", stderr(&out));

    let out = kgbuild(&["pipeline", path(&dir.path().join("missing.json"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn failing_stage_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixtures().join("e2e/triples.json")).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json["corpus"] = serde_json::json!(path(&dir.path().join("absent.jsonl")));
    json["backends"][0]["fixture_dir"] = serde_json::json!(path(&fixtures().join("e2e/replay/rebel")));
    json["linking"]["fixture"] = serde_json::json!(path(&fixtures().join("lookup.json")));
    let config = dir.path().join("c.json");
    fs::write(&config, json.to_string()).unwrap();
    let out = kgbuild(&["pipeline", path(&config), "--output-dir", path(&dir.path().join("out"))]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("ingest"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&kgbuild(&["no-such-command"])), 2);
    assert_eq!(code(&kgbuild(&["export", "kb.json", "--format", "png"])), 2);
    // keys never come from flags
    let out = kgbuild(&["fetch", "--api-key", "secret", "--keyword", "x", "--from", "2023-01-01", "--to", "2023-01-02", "-o", "x"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn stats_table_for_two_kbs() {
    let f = fixtures();
    let out = kgbuild(&[
        "stats",
        path(&f.join("e2e/golden/triples/kb.json")),
        path(&f.join("e2e/golden/ontology/kb.json")),
        "--name",
        "seq2seq",
        "--name",
        "chat",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "| Algorithm | Entities | Relations | Triples |");
    assert_eq!(lines[2], "| seq2seq   | 35       | 12        | 23      |");
    assert_eq!(lines[3], "| chat      | 23       | 9         | 31      |");
}

#[test]
fn top_relations_lists_counts() {
    let out = kgbuild(&["top-relations", path(&fixtures().join("quality_kb.json")), "-k", "2"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "6\thas a very long relation name\n5\towns\n");
}

#[test]
fn validate_reports_errors_with_exit_code() {
    let out = kgbuild(&["validate", path(&fixtures().join("starbucks.ttl"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ttl");
    fs::write(&bad, "@prefix : <http://e.org/> .\n:a :p :b .\n").unwrap();
    let out = kgbuild(&["validate", path(&bad), "--json"]);
    assert_eq!(code(&out), 1);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["errors"].as_array().unwrap().len(), 1);
    assert_eq!(report["errors"][0]["code"], "UndeclaredProperty");
}

#[test]
fn ttl2kb_then_export() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("kb.json");
    let out = kgbuild(&["ttl2kb", path(&fixtures().join("soluna.ttl")), "-o", path(&kb)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&kb).unwrap();
    assert!(text.contains("\"Excess Energy\""));

    let out = kgbuild(&["export", path(&kb), "--format", "dot", "--seed", "Soluna", "--radius", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let dot = stdout(&out);
    assert!(dot.starts_with("digraph kg {"));
    assert!(dot.contains("\"Soluna\" -> \"Excess Energy\" [label=\"utilizes\"];"));

    let graphml = dir.path().join("g.graphml");
    let out = kgbuild(&["export", path(&kb), "--format", "graphml", "-o", path(&graphml)]);
    assert_eq!(code(&out), 0);
    assert!(fs::read_to_string(&graphml).unwrap().contains("<graphml"));

    let out = kgbuild(&["export", path(&kb), "--format", "json", "--seed", "Nobody"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("Nobody"));
}

#[test]
fn merge_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixtures();
    let merged = dir.path().join("merged.json");
    let quality = f.join("quality_kb.json");
    let out = kgbuild(&["merge", path(&quality), path(&quality), "-o", path(&merged)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&merged).unwrap(), fs::read_to_string(&quality).unwrap());

    let report = dir.path().join("q.json");
    let out = kgbuild(&["eval", path(&merged), "-o", path(&report)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["headline"]["duplicate_ratio"]["value"], 0.25);
    assert_eq!(json["principles"].as_array().unwrap().len(), 18);

    let out = kgbuild(&["eval", path(&merged), "--baseline", path(&report)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("duplicate_ratio"));
}

#[test]
fn chunk_writes_batches() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    let body = fs::read_to_string(fixtures().join("long_article.txt")).unwrap();
    let record = serde_json::json!({
        "id": "long", "title": "t", "body": body, "source_domain": "example.com",
        "published_at": "2023-03-01", "language": "en"
    });
    fs::write(&corpus, format!("{record}\n")).unwrap();
    let out = kgbuild(&["chunk", path(&corpus)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 3);
    assert_eq!(code(&kgbuild(&["chunk", path(&corpus), "--batch-size", "0"])), 2);
}

/// Serves one canned response and hands back the raw request.
fn one_shot_server(body: &'static str) -> (String, mpsc::Receiver<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v2/everything", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut buf = Vec::new();
        let mut chunk = [0u8; 1024];
        while !buf.windows(4).any(|w| w == b"\r\n\r\n") {
            let n = stream.read(&mut chunk).unwrap();
            if n == 0 {
                break;
            }
            buf.extend_from_slice(&chunk[..n]);
        }
        tx.send(String::from_utf8_lossy(&buf).into_owned()).unwrap();
        let resp = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        stream.write_all(resp.as_bytes()).unwrap();
    });
    (url, rx)
}

#[test]
fn fetch_reads_key_from_environment() {
    let (url, rx) = one_shot_server(
        r#"{"status":"ok","totalResults":1,"articles":[{"source":{"name":"Example"},"title":"Solar","description":"d","content":"Solar farms grow.","url":"https://example.com/solar","publishedAt":"2023-02-20T08:00:00Z"}]}"#,
    );
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    let out = kgbuild_env(
        &[
            "fetch", "--endpoint", &url, "--keyword", "solar", "--from", "2023-02-15", "--to", "2023-03-19",
            "--page-size", "10", "--api-key-env", "KGB_TEST_NEWS_KEY", "-o", path(&corpus),
        ],
        &[("KGB_TEST_NEWS_KEY", "k-123")],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let request = rx.recv().unwrap().to_lowercase();
    assert!(request.contains("x-api-key: k-123"), "{request}");
    assert!(request.contains("q=solar"));
    let text = fs::read_to_string(&corpus).unwrap();
    let record: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(record["source_domain"], "example.com");
    assert_eq!(record["published_at"], "2023-02-20");
}
