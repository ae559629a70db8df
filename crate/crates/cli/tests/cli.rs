use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::OnceLock;

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_anchorlink"));
    cmd.env_remove("ANCHORLINK_CORPUS")
        .env_remove("ANCHORLINK_MODEL")
        .env_remove("ANCHORLINK_DICT");
    cmd
}

fn ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn");
    assert!(
        out.status.success(),
        "{:?} failed\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Synth corpus plus full pipeline output, built once for all tests.
struct Built {
    dir: TempDir,
}

impl Built {
    fn corpus(&self) -> PathBuf {
        self.dir.path().join("corpus.jsonl")
    }

    fn art(&self, name: &str) -> PathBuf {
        self.dir.path().join("art").join(name)
    }

    fn scoring(&self, cmd: &mut Command) {
        cmd.arg("--corpus")
            .arg(self.corpus())
            .arg("--dict")
            .arg(self.art("dict.jsonl"))
            .arg("--content-vectors")
            .arg(self.art("content.vec"))
            .arg("--nav-vectors")
            .arg(self.art("navigation.vec"))
            .arg("--model")
            .arg(self.art("model.json"));
    }

    fn first_title(&self) -> String {
        let text = std::fs::read_to_string(self.corpus()).unwrap();
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            if v["redirect_to"].is_null() && v["text"].as_str().unwrap().contains("[[") {
                return v["title"].as_str().unwrap().to_string();
            }
        }
        panic!("no content article")
    }
}

fn built() -> &'static Built {
    static BUILT: OnceLock<Built> = OnceLock::new();
    BUILT.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        ok(bin().args(["synth", "--out"]).arg(dir.path()));
        let out = ok(bin()
            .arg("pipeline")
            .arg("--corpus")
            .arg(dir.path().join("corpus.jsonl"))
            .arg("--sessions")
            .arg(dir.path().join("sessions.tsv"))
            .arg("--out")
            .arg(dir.path().join("art")));
        assert!(out.contains("model "), "{out}");
        Built { dir }
    })
}

#[test]
fn pipeline_writes_every_artifact() {
    let b = built();
    for name in [
        "dict.jsonl",
        "content.vec",
        "navigation.vec",
        "gold.jsonl",
        "instances.jsonl",
        "model.json",
    ] {
        assert!(b.art(name).metadata().unwrap().len() > 0, "{name}");
    }
}

#[test]
fn recommend_json_and_text_agree() {
    let b = built();
    let title = b.first_title();
    let mut cmd = bin();
    cmd.arg("recommend");
    b.scoring(&mut cmd);
    let json = ok(cmd.args(["--article", &title, "--format", "json"]));
    let recs: Vec<serde_json::Value> = serde_json::from_str(&json).unwrap();
    assert!(!recs.is_empty());

    let mut cmd = bin();
    cmd.arg("recommend");
    b.scoring(&mut cmd);
    let text = ok(cmd.args(["--article", &title, "--format", "text"]));
    assert_eq!(text.lines().count(), recs.len());
    for (line, rec) in text.lines().zip(&recs) {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols[0], title);
        assert_eq!(cols[3], rec["target"].as_str().unwrap());
        let p: f64 = cols[4].parse().unwrap();
        assert!(p >= 0.5);
    }
}

#[test]
fn recommend_rejects_unknown_article() {
    let b = built();
    let mut cmd = bin();
    cmd.arg("recommend");
    b.scoring(&mut cmd);
    let out: Output = cmd.args(["--article", "No Such Page"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("No Such Page"));
}

#[test]
fn evaluate_reports_sweep_and_subtasks() {
    let b = built();
    let report = b.dir.path().join("report.jsonl");
    let mut cmd = bin();
    cmd.arg("evaluate");
    b.scoring(&mut cmd);
    let out = ok(cmd
        .arg("--gold")
        .arg(b.art("gold.jsonl"))
        .args(["--sweep", "--subtask", "disambiguation", "--out"])
        .arg(&report));
    assert!(out.contains("disambiguation precision"), "{out}");
    // one line per threshold plus the disambiguation report
    let lines = std::fs::read_to_string(&report).unwrap();
    assert_eq!(lines.lines().count(), 11);

    let mut cmd = bin();
    cmd.arg("evaluate");
    b.scoring(&mut cmd);
    let out = cmd.arg("--gold").arg(b.art("gold.jsonl")).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn evaluate_ablation_lists_every_feature() {
    let b = built();
    let mut cmd = bin();
    cmd.arg("evaluate");
    b.scoring(&mut cmd);
    let out = ok(cmd
        .arg("--gold")
        .arg(b.art("gold.jsonl"))
        .arg("--ablation")
        .arg("--instances")
        .arg(b.art("instances.jsonl"))
        .args(["--rounds", "10"]));
    for name in ["Frq", "Nav", "Ent"] {
        assert!(out.contains(name), "{name} missing from\n{out}");
    }
}

#[test]
fn step_by_step_commands_chain() {
    let b = built();
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let out = ok(bin()
        .arg("build-dict")
        .env("ANCHORLINK_CORPUS", b.corpus())
        .arg("--out")
        .arg(p("dict.jsonl")));
    assert!(out.contains("mentions"));
    ok(bin()
        .args([
            "train-embeddings",
            "--kind",
            "content",
            "--dim",
            "8",
            "--epochs",
            "1",
        ])
        .arg("--corpus")
        .arg(b.corpus())
        .arg("--out")
        .arg(p("content.vec")));
    let err = bin()
        .args(["train-embeddings", "--kind", "navigation"])
        .arg("--corpus")
        .arg(b.corpus())
        .arg("--out")
        .arg(p("nav.vec"))
        .output()
        .unwrap();
    assert!(!err.status.success());
    ok(bin()
        .arg("build-gold")
        .arg("--corpus")
        .arg(b.corpus())
        .args(["--max-sentences", "200", "--out"])
        .arg(p("gold.jsonl")));
    ok(bin()
        .arg("generate-training-data")
        .arg("--dict")
        .arg(p("dict.jsonl"))
        .arg("--content-vectors")
        .arg(p("content.vec"))
        .arg("--gold")
        .arg(p("gold.jsonl"))
        .arg("--out")
        .arg(p("instances.jsonl")));
    let out = ok(bin()
        .arg("train")
        .arg("--instances")
        .arg(p("instances.jsonl"))
        .args(["--rounds", "5", "--out"])
        .arg(p("model.json")));
    assert!(out.contains("trained on"));
    assert!(p("model.json").exists());
}

fn get(addr: &str, path: &str) -> (u16, serde_json::Value) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(
        s,
        "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).unwrap();
    let status = raw[9..12].parse().unwrap();
    let body = raw.split("\r\n\r\n").nth(1).unwrap_or("");
    (
        status,
        serde_json::from_str(body).unwrap_or(serde_json::Value::Null),
    )
}

fn regenerate(b: &Built, batches: &Path) -> String {
    let mut cmd = bin();
    cmd.arg("regenerate");
    b.scoring(&mut cmd);
    ok(cmd.arg("--batches").arg(batches))
}

#[test]
fn regenerate_then_serve() {
    let b = built();
    let dir = tempfile::tempdir().unwrap();
    let batches = dir.path().join("batches");
    let out = regenerate(b, &batches);
    assert!(out.contains("batches published"), "{out}");
    assert!(batches.join("CURRENT").exists());

    let mut child = bin()
        .arg("serve")
        .args(["--port", "0"])
        .arg("--corpus")
        .arg(b.corpus())
        .arg("--batches")
        .arg(&batches)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .trim_start_matches("listening on http://")
        .to_string();

    let (status, _) = get(&addr, "/v1/health");
    assert_eq!(status, 200);
    let (status, tasks) = get(&addr, "/v1/tasks?min_links=1");
    assert_eq!(status, 200);
    let tasks = tasks.as_array().cloned().unwrap_or_default();
    assert!(!tasks.is_empty());
    let (status, _) = get(&addr, "/v1/recommendations/No%20Such%20Page");
    assert_eq!(status, 404);

    child.kill().unwrap();
    child.wait().unwrap();
}
