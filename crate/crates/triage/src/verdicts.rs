//! Append-only verdict log (`verdicts.jsonl`, one JSON verdict per line).
//! Replaying the log reconstructs the current state: the latest verdict per
//! (key, annotator) wins, earlier ones stay in the file for audit.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use echotrace_core::corpus::ClipId;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum VerdictKey {
    Pair { query: ClipId, reference: ClipId },
    Cluster { component_id: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Replicated,
    NotReplicated,
    Unsure,
    Confirmed,
    Rejected,
}

impl Label {
    pub fn applies_to(self, key: &VerdictKey) -> bool {
        match key {
            VerdictKey::Pair { .. } => matches!(self, Label::Replicated | Label::NotReplicated | Label::Unsure),
            VerdictKey::Cluster { .. } => matches!(self, Label::Confirmed | Label::Rejected),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verdict {
    pub key: VerdictKey,
    pub label: Label,
    pub annotator: String,
    #[serde(with = "utc_millis")]
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A verdict as posted by a client; the server stamps the time if omitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictSubmission {
    pub key: VerdictKey,
    pub label: Label,
    pub annotator: String,
    #[serde(default, with = "opt_utc_millis")]
    pub timestamp: Option<DateTime<Utc>>,
    #[serde(default)]
    pub note: Option<String>,
}

impl VerdictSubmission {
    pub fn into_verdict(self, now: DateTime<Utc>) -> Verdict {
        Verdict {
            key: self.key,
            label: self.label,
            annotator: self.annotator,
            timestamp: self.timestamp.unwrap_or(now),
            note: self.note,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Recorded {
    Appended,
    /// Same label and note as the annotator's current verdict; nothing written.
    Unchanged,
}

#[derive(Debug)]
pub struct VerdictStore {
    path: PathBuf,
    file: File,
    current: BTreeMap<(VerdictKey, String), Verdict>,
    log_len: usize,
}

impl VerdictStore {
    /// Opens (creating if needed) the log at `path` and replays it. A torn
    /// final line, left by a crash mid-write, is dropped with a warning.
    pub fn open(path: &Path) -> Result<VerdictStore> {
        let mut current = BTreeMap::new();
        let mut log_len = 0;
        if path.exists() {
            let f = File::open(path).map_err(|e| Error::io(path, e))?;
            let lines: Vec<String> = BufReader::new(f)
                .lines()
                .collect::<std::io::Result<_>>()
                .map_err(|e| Error::io(path, e))?;
            let last = lines.len();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Verdict>(line) {
                    Ok(v) => {
                        validate(&v).map_err(|reason| Error::Log {
                            path: path.into(),
                            line: i + 1,
                            reason,
                        })?;
                        current.insert((v.key.clone(), v.annotator.clone()), v);
                        log_len += 1;
                    }
                    Err(e) if i + 1 == last => {
                        log::warn!("dropping unreadable last line of {}: {e}", path.display());
                        truncate_to_valid(path, &lines[..i])?;
                    }
                    Err(e) => {
                        return Err(Error::Log {
                            path: path.into(),
                            line: i + 1,
                            reason: e.to_string(),
                        })
                    }
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(VerdictStore {
            path: path.to_path_buf(),
            file,
            current,
            log_len,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends `v` unless it repeats the annotator's current verdict.
    pub fn record(&mut self, v: Verdict) -> Result<Recorded> {
        validate(&v).map_err(Error::Rejected)?;
        let slot = (v.key.clone(), v.annotator.clone());
        if let Some(cur) = self.current.get(&slot) {
            if cur.label == v.label && cur.note == v.note {
                return Ok(Recorded::Unchanged);
            }
        }
        let mut line = serde_json::to_string(&v).expect("verdicts always serialize");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| Error::io(&self.path, e))?;
        self.current.insert(slot, v);
        self.log_len += 1;
        Ok(Recorded::Appended)
    }

    /// Current verdicts, ordered by key then annotator.
    pub fn current(&self) -> impl Iterator<Item = &Verdict> {
        self.current.values()
    }

    pub fn for_key<'a>(&'a self, key: &'a VerdictKey) -> impl Iterator<Item = &'a Verdict> {
        self.current
            .range((key.clone(), String::new())..)
            .take_while(move |((k, _), _)| k == key)
            .map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    /// Number of lines in the log, superseded verdicts included.
    pub fn log_len(&self) -> usize {
        self.log_len
    }
}

fn validate(v: &Verdict) -> std::result::Result<(), String> {
    if v.annotator.trim().is_empty() {
        return Err("annotator is empty".into());
    }
    if v.annotator.chars().any(char::is_control) {
        return Err("annotator contains control characters".into());
    }
    if !v.label.applies_to(&v.key) {
        let what = match v.key {
            VerdictKey::Pair { .. } => "pair",
            VerdictKey::Cluster { .. } => "cluster",
        };
        return Err(format!("label {:?} does not apply to a {what}", v.label));
    }
    Ok(())
}

fn truncate_to_valid(path: &Path, keep: &[String]) -> Result<()> {
    let mut text = String::new();
    for l in keep {
        text.push_str(l);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

mod utc_millis {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

mod opt_utc_millis {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => utc_millis::serialize(t, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| {
                DateTime::parse_from_rfc3339(&s)
                    .map(|t| t.with_timezone(&Utc))
                    .map_err(serde::de::Error::custom)
            })
            .transpose()
    }
}
