use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use echotrace_core::corpus::{import_embeddings, ingest_corpus_cached, CorpusManifest, DescriptorSet};
use echotrace_core::dedup::{self, tau_sweep, ClusterRecord};
use echotrace_core::retrieval::{
    self, calibrate_threshold, match_count_threshold, top1_scores, uniform_edges, HistogramRecord, ScoreHistogram,
};
use echotrace_core::simcore::BackgroundSet;
use echotrace_core::Error;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::ScoreFlags;

/// A command error with its exit code and machine-readable report.
#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Triage(echotrace_triage::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<echotrace_triage::Error> for Failure {
    fn from(e: echotrace_triage::Error) -> Self {
        match e {
            echotrace_triage::Error::Core(c) => Failure::Core(c),
            other => Failure::Triage(other),
        }
    }
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_contract_violation() => 2,
            _ => 1,
        }
    }

    /// One JSON object on one line.
    pub fn report(&self) -> String {
        let body = match self {
            Failure::Core(Error::Ingestion(failures)) => json!({
                "kind": "ingestion",
                "message": self.message(),
                "failures": failures,
            }),
            Failure::Core(Error::MissingIds(ids)) => json!({
                "kind": "missing_ids",
                "message": self.message(),
                "ids": ids,
            }),
            Failure::Core(e) => json!({
                "kind": core_kind(e),
                "message": self.message(),
            }),
            Failure::Triage(echotrace_triage::Error::MissingFiles(files)) => json!({
                "kind": "missing_files",
                "message": self.message(),
                "files": files,
            }),
            Failure::Triage(_) => json!({
                "kind": "session",
                "message": self.message(),
            }),
        };
        json!({ "error": body }).to_string()
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Triage(e) => e.to_string(),
        }
    }
}

fn core_kind(e: &Error) -> &'static str {
    match e {
        Error::Io { .. } => "io",
        Error::Decode { .. } => "decode",
        Error::SampleRate { .. } => "sample_rate",
        Error::Ingestion(_) => "ingestion",
        Error::MissingIds(_) => "missing_ids",
        Error::Format { .. } => "format",
        Error::Config(_) => "config",
        Error::Contract(_) => "contract",
    }
}

type CmdResult = Result<(), Failure>;

pub fn apply_score_flags(cfg: &mut PipelineConfig, f: &ScoreFlags) -> Result<(), Error> {
    if let Some(k) = f.k {
        cfg.similarity.k = k;
    }
    if let Some(b) = f.beta {
        cfg.similarity.beta = b;
    }
    if let Some(b) = f.block_size {
        cfg.similarity.block_size = b;
    }
    cfg.validate()
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io { path: path.into(), source: e })
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), Error> {
    w.flush().map_err(|e| Error::Io { path: path.into(), source: e })
}

fn background(cfg: &PipelineConfig, path: &Path) -> Result<BackgroundSet, Error> {
    BackgroundSet::new(DescriptorSet::read(path)?, cfg.similarity.k, cfg.similarity.beta)
}

pub fn extract(cfg: &PipelineConfig, manifest: &Path, out: &Path) -> CmdResult {
    let m = CorpusManifest::load(manifest)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    }
    log::info!("extracting {} clips from {}", m.len(), manifest.display());
    let ing = ingest_corpus_cached(&m, &cfg.descriptor, out)?;
    log::info!("{} rows reused from {}", ing.cache_hits, out.display());
    let report = json!({
        "corpus_id": ing.set.corpus_id(),
        "rows": ing.set.len(),
        "dim": ing.set.dim(),
        "cache_hits": ing.cache_hits,
        "degenerate": ing.degenerate,
        "truncated": ing.truncated,
        "pipeline": cfg.echo("extract"),
    });
    println!("{report}");
    Ok(())
}

pub fn import(manifest: &Path, embeddings: &Path, out: &Path) -> CmdResult {
    let m = CorpusManifest::load(manifest)?;
    let set = import_embeddings(&m, embeddings)?;
    set.write(out)?;
    println!(
        "{}",
        json!({ "corpus_id": set.corpus_id(), "rows": set.len(), "dim": set.dim() })
    );
    Ok(())
}

pub fn retrieve(cfg: &PipelineConfig, queries: &Path, refs: &Path, bg: &Path, out: &Path) -> CmdResult {
    let q = DescriptorSet::read(queries)?;
    let r = DescriptorSet::read(refs)?;
    let bg = background(cfg, bg)?;
    let rcfg = cfg.retrieval_config(q.kind());
    log::info!("scoring {} queries against {} references", q.len(), r.len());
    let result = retrieval::retrieve(&q, &r, &bg, &rcfg)?;
    let mut w = create(out)?;
    retrieval::write_jsonl(&result, Some(&cfg.echo("retrieve")), &mut w)?;
    finish(w, out)?;
    println!(
        "{}",
        json!({ "queries": result.query_count, "retrieved": result.retrieved.len(), "tau": rcfg.tau })
    );
    Ok(())
}

pub fn dedup(cfg: &PipelineConfig, refs: &Path, bg: &Path, out: &Path, sweep: &[f64]) -> CmdResult {
    let r = DescriptorSet::read(refs)?;
    let bg = background(cfg, bg)?;
    let dcfg = cfg.dedup_config();
    log::info!("self-similarity over {} clips", r.len());
    let report = dedup::dedup_corpus(&r, &bg, &dcfg)?;
    let points = if sweep.is_empty() {
        Vec::new()
    } else {
        tau_sweep(&r, &bg, sweep, &dcfg)?
    };
    let mut w = create(out)?;
    dedup::write_jsonl(&report, Some(&cfg.echo("dedup")), &mut w)?;
    for p in &points {
        let line = serde_json::to_string(&ClusterRecord::Sweep { point: *p }).expect("serializable");
        writeln!(w, "{line}").map_err(|e| Error::Io { path: out.into(), source: e })?;
    }
    finish(w, out)?;
    println!(
        "{}",
        json!({
            "clips": report.clip_count,
            "edges": report.edge_count,
            "clusters": report.clusters.len(),
            "duplicates": report.clusters.iter().map(|c| c.members.len() - 1).sum::<usize>(),
            "sweep": points,
        })
    );
    Ok(())
}

pub fn hist(cfg: &PipelineConfig, queries: &Path, refs: &Path, bg: &Path, out: &Path, with_self: bool) -> CmdResult {
    let q = DescriptorSet::read(queries)?;
    let r = DescriptorSet::read(refs)?;
    let bg = background(cfg, bg)?;
    let block = cfg.similarity.block_size;
    let q_scores = top1_scores(&q, &r, &bg, block)?;
    let s_scores = if with_self { Some(top1_scores(&r, &r, &bg, block)?) } else { None };
    let mut series: Vec<&[f64]> = vec![&q_scores];
    if let Some(s) = &s_scores {
        series.push(s);
    }
    let edges = uniform_edges(&series, cfg.histogram.bins)?;
    let hq = ScoreHistogram::from_scores(format!("{}->{}", q.corpus_id(), r.corpus_id()), &q_scores, edges.clone())?;
    let mut records = vec![
        HistogramRecord::Config {
            k: cfg.similarity.k,
            beta: cfg.similarity.beta,
            bins: cfg.histogram.bins,
            pipeline: Some(cfg.echo("hist")),
        },
        HistogramRecord::Histogram { hist: hq.clone() },
    ];
    let mut summary = json!({ "queries": q_scores.len() });
    if let Some(s) = &s_scores {
        let hs = ScoreHistogram::from_scores(format!("{}->{}", r.corpus_id(), r.corpus_id()), s, edges)?;
        let report = calibrate_threshold(&hq, &hs)?;
        summary = json!({
            "queries": q_scores.len(),
            "references": s.len(),
            "separation": report.separation,
            "suggested_tau": report.suggested_tau,
            "first_clear_edge": report.first_clear_edge,
        });
        records.push(HistogramRecord::Histogram { hist: hs });
        records.push(HistogramRecord::Calibration { report });
    }
    let mut w = create(out)?;
    for rec in &records {
        let line = serde_json::to_string(rec).expect("serializable");
        writeln!(w, "{line}").map_err(|e| Error::Io { path: out.into(), source: e })?;
    }
    finish(w, out)?;
    println!("{summary}");
    Ok(())
}

fn read_result(path: &Path) -> Result<retrieval::RetrievalResult, Error> {
    let f = File::open(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    retrieval::read_jsonl(BufReader::new(f))
}

pub fn match_count(cfg: &PipelineConfig, result: &Path, n: Option<usize>, like: Option<&Path>, out: Option<&Path>) -> CmdResult {
    let res = read_result(result)?;
    let n = match (n, like) {
        (Some(n), _) => n,
        (None, Some(other)) => read_result(other)?.retrieved.len(),
        (None, None) => return Err(Error::Config("give --n or --like".into()).into()),
    };
    let found = match_count_threshold(&res, n);
    if let Some(out) = out {
        let mut w = create(out)?;
        let mut echo = cfg.echo("match-count");
        echo["requested_count"] = json!(n);
        retrieval::write_jsonl(&res.with_tau(found.tau), Some(&echo), &mut w)?;
        finish(w, out)?;
    }
    println!(
        "{}",
        json!({
            "requested": n,
            "count": found.count,
            "tau": tau_json(found.tau),
        })
    );
    Ok(())
}

fn tau_json(t: f64) -> serde_json::Value {
    if t.is_finite() {
        json!(t)
    } else if t > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn serve(session: &Path, addr: &str) -> CmdResult {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Config(format!("cannot start the async runtime: {e}")))?;
    rt.block_on(echotrace_triage::serve(session, addr))?;
    Ok(())
}

pub fn print_config(cfg: &PipelineConfig) -> CmdResult {
    let text = toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?;
    print!("{text}");
    Ok(())
}
