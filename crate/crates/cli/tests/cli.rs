//! End-to-end runs of the `echotrace` binary on small synthetic corpora.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

const SR: u32 = 16_000;
const N: usize = 163_872;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_echotrace"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(stdout.trim()).unwrap_or(Value::Null)
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("json error line");
    serde_json::from_str(line).unwrap()
}

/// Tones and filtered noise bursts over a quiet bed.
fn clip(rng: &mut ChaCha8Rng) -> Vec<f32> {
    let sr = SR as f64;
    let bed = 10f64.powf(rng.gen_range(-2.5..-1.5));
    let mut x: Vec<f64> = (0..N).map(|_| bed * rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..rng.gen_range(2..=5) {
        let dur = (rng.gen_range(0.2..1.8) * sr) as usize;
        let start = rng.gen_range(0..N - dur);
        let amp = rng.gen_range(0.1..0.8);
        let f0 = 10f64.powf(rng.gen_range(2.3..3.7));
        let harmonics = rng.gen_range(1..=4);
        for i in 0..dur {
            let t = i as f64 / sr;
            let env = (PI * i as f64 / dur as f64).sin().powi(2);
            let s: f64 = (1..=harmonics)
                .filter(|&h| f0 * (h as f64) < sr / 2.0)
                .map(|h| (2.0 * PI * f0 * h as f64 * t).sin() / h as f64)
                .sum();
            x[start + i] += amp * env * s;
        }
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-9);
    x.iter().map(|v| (0.95 * v / peak) as f32).collect()
}

fn noisy(x: &[f32], snr_db: f64, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let p = x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / x.len() as f64;
    let a = (3.0 * p / 10f64.powf(snr_db / 10.0)).sqrt();
    x.iter().map(|&v| (v as f64 + rng.gen_range(-a..a)).clamp(-1.0, 1.0) as f32).collect()
}

fn write_wav(path: &Path, samples: &[f32]) {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SR,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for &s in samples {
        w.write_sample(s).unwrap();
    }
    w.finalize().unwrap();
}

/// Writes `<dir>/<name>/<id>.wav` files and the manifest `<dir>/<name>.jsonl`.
fn corpus(dir: &Path, name: &str, clips: &[(String, Vec<f32>)]) -> PathBuf {
    fs::create_dir_all(dir.join(name)).unwrap();
    let mut manifest = String::new();
    for (id, samples) in clips {
        write_wav(&dir.join(name).join(format!("{id}.wav")), samples);
        manifest.push_str(&format!("{{\"id\":\"{id}\",\"path\":\"{name}/{id}.wav\"}}\n"));
    }
    let path = dir.join(format!("{name}.jsonl"));
    fs::write(&path, manifest).unwrap();
    path
}

fn fresh(prefix: &str, n: usize, rng: &mut ChaCha8Rng) -> Vec<(String, Vec<f32>)> {
    (0..n).map(|i| (format!("{prefix}{i:02}"), clip(rng))).collect()
}

fn extract(dir: &Path, name: &str, clips: &[(String, Vec<f32>)]) -> PathBuf {
    let manifest = corpus(dir, name, clips);
    let out = dir.join(format!("{name}.adsc"));
    ok(&["extract", "--manifest", s(&manifest), "--out", s(&out)]);
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn retrieved(lines: &[Value]) -> Vec<&Value> {
    lines.iter().filter(|v| v["record"] == "match" && v["retrieved"] == true).collect()
}

fn records<'a>(lines: &'a [Value], kind: &str) -> Vec<&'a Value> {
    lines.iter().filter(|v| v["record"] == kind).collect()
}

/// Reference, background and query corpora where query `gen00` is a 30 dB
/// copy of reference `tr03` and the other queries are novel.
struct Fixture {
    dir: TempDir,
    refs: PathBuf,
    bg: PathBuf,
    queries: PathBuf,
}

fn fixture() -> Fixture {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let train = fresh("tr", 16, &mut rng);
    let background = fresh("bg", 12, &mut rng);
    let mut gen = vec![("gen00".to_string(), noisy(&train[3].1, 30.0, &mut rng))];
    gen.extend(fresh("new", 5, &mut rng));
    let refs = extract(dir.path(), "train", &train);
    let bg = extract(dir.path(), "background", &background);
    let queries = extract(dir.path(), "gen", &gen);
    Fixture { dir, refs, bg, queries }
}

#[test]
fn extract_reuses_unchanged_rows() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let manifest = corpus(dir.path(), "small", &fresh("c", 3, &mut rng));
    let out = dir.path().join("small.adsc");
    let first = ok(&["extract", "--manifest", s(&manifest), "--out", s(&out)]);
    assert_eq!(first["rows"], 3);
    assert_eq!(first["dim"], 1712);
    assert_eq!(first["cache_hits"], 0);
    assert_eq!(first["pipeline"]["command"], "extract");
    let bytes = fs::read(&out).unwrap();

    let second = ok(&["--workers", "2", "extract", "--manifest", s(&manifest), "--out", s(&out)]);
    assert_eq!(second["cache_hits"], 3);
    assert_eq!(fs::read(&out).unwrap(), bytes);
}

#[test]
fn extract_names_every_unreadable_clip() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let manifest = corpus(dir.path(), "mixed", &fresh("ok", 2, &mut rng));
    fs::write(dir.path().join("mixed/garbage.wav"), b"not a wav file").unwrap();
    let mut text = fs::read_to_string(&manifest).unwrap();
    text.push_str("{\"id\":\"garbage\",\"path\":\"mixed/garbage.wav\"}\n");
    text.push_str("{\"id\":\"gone\",\"path\":\"mixed/gone.wav\"}\n");
    fs::write(&manifest, text).unwrap();
    let out_path = dir.path().join("mixed.adsc");

    let out = run(&["extract", "--manifest", s(&manifest), "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "ingestion");
    let listed = err["error"]["failures"].to_string();
    assert!(listed.contains("garbage"), "{listed}");
    assert!(listed.contains("gone"), "{listed}");
}

#[test]
fn retrieve_finds_the_planted_copy() {
    let f = fixture();
    let out = f.dir.path().join("ret.jsonl");
    let summary = ok(&[
        "retrieve", "--queries", s(&f.queries), "--refs", s(&f.refs), "--background", s(&f.bg), "--out", s(&out),
    ]);
    assert_eq!(summary["queries"], 6);
    let lines = jsonl(&out);
    assert_eq!(lines[0]["record"], "config");
    assert_eq!(lines[0]["pipeline"]["command"], "retrieve");
    let hits = retrieved(&lines);
    assert_eq!(records(&lines, "match").len(), 6);
    assert_eq!(hits.len(), 1, "{hits:?}");
    assert_eq!(hits[0]["query"], "gen00");
    assert_eq!(hits[0]["reference"], "tr03");

    // an unreachable threshold retrieves nothing but still lists every top-1
    let high = f.dir.path().join("high.jsonl");
    let summary = ok(&[
        "retrieve", "--queries", s(&f.queries), "--refs", s(&f.refs), "--background", s(&f.bg), "--out", s(&high),
        "--tau", "2",
    ]);
    assert_eq!(summary["retrieved"], 0);
    assert_eq!(summary["tau"], 2.0);
}

#[test]
fn retrieve_is_independent_of_worker_count() {
    let f = fixture();
    let a = f.dir.path().join("a.jsonl");
    let b = f.dir.path().join("b.jsonl");
    for (workers, out) in [("1", &a), ("3", &b)] {
        ok(&[
            "--workers", workers, "retrieve", "--queries", s(&f.queries), "--refs", s(&f.refs), "--background",
            s(&f.bg), "--out", s(out),
        ]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn retrieve_with_no_queries_succeeds() {
    let f = fixture();
    let empty = extract(f.dir.path(), "none", &[]);
    let out = f.dir.path().join("none.jsonl");
    let summary = ok(&[
        "retrieve", "--queries", s(&empty), "--refs", s(&f.refs), "--background", s(&f.bg), "--out", s(&out),
    ]);
    assert_eq!(summary["queries"], 0);
    assert_eq!(summary["retrieved"], 0);
}

#[test]
fn dedup_clusters_copies_and_sweeps() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut clips = fresh("d", 10, &mut rng);
    clips.push(("d02copy".into(), clips[2].1.clone()));
    let refs = extract(dir.path(), "pool", &clips);
    let bg = extract(dir.path(), "bg", &fresh("b", 12, &mut rng));
    let out = dir.path().join("clusters.jsonl");
    let summary = ok(&[
        "dedup", "--refs", s(&refs), "--background", s(&bg), "--out", s(&out), "--sweep", "0.4,0.5025,2",
    ]);
    assert_eq!(summary["clusters"], 1);
    assert_eq!(summary["duplicates"], 1);

    let lines = jsonl(&out);
    let clusters = records(&lines, "cluster");
    assert_eq!(clusters.len(), 1);
    let members = clusters[0]["members"].to_string();
    assert!(members.contains("\"d02\"") && members.contains("\"d02copy\""), "{members}");
    let sweep = records(&lines, "sweep");
    assert_eq!(sweep.len(), 3);
    let edges: Vec<u64> = sweep.iter().map(|p| p["edges"].as_u64().unwrap()).collect();
    assert!(edges.windows(2).all(|w| w[0] >= w[1]), "{edges:?}");
    assert_eq!(sweep[1]["clusters"], 1);
    assert_eq!(sweep[2]["edges"], 0);
}

#[test]
fn dedup_of_a_single_clip_has_no_clusters() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let refs = extract(dir.path(), "one", &fresh("x", 1, &mut rng));
    let bg = extract(dir.path(), "bg", &fresh("b", 6, &mut rng));
    let out = dir.path().join("one.jsonl");
    let summary = ok(&["dedup", "--refs", s(&refs), "--background", s(&bg), "--out", s(&out)]);
    assert_eq!(summary["clips"], 1);
    assert_eq!(summary["clusters"], 0);
}

#[test]
fn hist_writes_histograms_and_calibration() {
    let f = fixture();
    let out = f.dir.path().join("hist.jsonl");
    let summary = ok(&[
        "hist", "--queries", s(&f.queries), "--refs", s(&f.refs), "--background", s(&f.bg), "--out", s(&out),
        "--bins", "20",
    ]);
    assert_eq!(summary["queries"], 6);
    assert_eq!(summary["references"], 16);
    let lines = jsonl(&out);
    let kinds: Vec<&str> = lines.iter().map(|v| v["record"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["config", "histogram", "histogram", "calibration"]);
    assert_eq!(lines[0]["bins"], 20);
    for h in &lines[1..3] {
        let counts: u64 = h["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum();
        assert!(counts == 6 || counts == 16, "{counts}");
        assert_eq!(h["bin_edges"].as_array().unwrap().len(), 21);
        assert_eq!(h["bin_edges"], lines[1]["bin_edges"]);
    }

    let q_only = f.dir.path().join("q.jsonl");
    ok(&[
        "hist", "--queries", s(&f.queries), "--refs", s(&f.refs), "--background", s(&f.bg), "--out", s(&q_only),
        "--no-self",
    ]);
    assert_eq!(jsonl(&q_only).len(), 2);
}

#[test]
fn match_count_hits_requested_counts() {
    let f = fixture();
    let res = f.dir.path().join("ret.jsonl");
    ok(&[
        "retrieve", "--queries", s(&f.queries), "--refs", s(&f.refs), "--background", s(&f.bg), "--out", s(&res),
    ]);
    let none = ok(&["match-count", "--result", s(&res), "--n", "0"]);
    assert_eq!(none["count"], 0);
    let all = ok(&["match-count", "--result", s(&res), "--n", "6"]);
    assert_eq!(all["count"], 6);
    assert!(all["tau"].is_f64());

    let rethresholded = f.dir.path().join("three.jsonl");
    let three = ok(&["match-count", "--result", s(&res), "--n", "3", "--out", s(&rethresholded)]);
    assert_eq!(three["count"], 3);
    assert_eq!(retrieved(&jsonl(&rethresholded)).len(), 3);

    let like = ok(&["match-count", "--result", s(&res), "--like", s(&rethresholded)]);
    assert_eq!(like["requested"], 3);
    assert_eq!(like["count"], 3);
}

#[test]
fn config_file_overrides_and_rejects_unknown_keys() {
    let dir = TempDir::new().unwrap();
    let good = dir.path().join("good.toml");
    fs::write(&good, "[similarity]\nk = 3\n").unwrap();
    let out = run(&["--config", s(&good), "config"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("k = 3"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[similarity]\nkay = 3\n").unwrap();
    let out = run(&["--config", s(&bad), "config"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["kind"], "config");

    assert_eq!(run(&["--workers", "0", "config"]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn contract_violations_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let empty = extract(dir.path(), "empty", &[]);
    let bg = extract(dir.path(), "bg", &fresh("b", 6, &mut rng));
    let out = run(&[
        "dedup", "--refs", s(&empty), "--background", s(&bg), "--out", s(&dir.path().join("c.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stderr_json(&out)["error"]["kind"], "contract");
}

#[test]
fn missing_input_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "retrieve", "--queries", "nope.adsc", "--refs", "nope.adsc", "--background", "nope.adsc", "--out",
        s(&dir.path().join("r.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["kind"], "io");
}
