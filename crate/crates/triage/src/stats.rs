//! Replication statistics, a pure function of the session and the current
//! verdicts.

use std::collections::{BTreeMap, BTreeSet};

use echotrace_core::corpus::ClipId;
use serde::{Deserialize, Serialize};

use crate::session::Session;
use crate::verdicts::{Label, Verdict, VerdictKey};

/// How the verdicts of several annotators on one key are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Consensus {
    /// The most frequent label; a tie is `unsure` for pairs and undecided
    /// for clusters.
    #[default]
    Majority,
    /// Positive if any annotator said so.
    AnyPositive,
}

pub fn consensus(labels: &[Label], policy: Consensus) -> Option<Label> {
    if labels.is_empty() {
        return None;
    }
    match policy {
        Consensus::AnyPositive => [Label::Replicated, Label::Confirmed, Label::NotReplicated, Label::Rejected, Label::Unsure]
            .into_iter()
            .find(|l| labels.contains(l)),
        Consensus::Majority => {
            let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
            for &l in labels {
                *counts.entry(l).or_default() += 1;
            }
            let best = counts.values().copied().max().unwrap_or(0);
            let mut top = counts.iter().filter(|(_, &c)| c == best).map(|(&l, _)| l);
            match (top.next(), top.next()) {
                (Some(l), None) => Some(l),
                _ if labels[0].applies_to(&VerdictKey::Cluster { component_id: 0 }) => None,
                _ => Some(Label::Unsure),
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RetrievalSummary {
    pub label: String,
    pub query_count: usize,
    pub retrieved: usize,
    pub reviewed: usize,
    pub replicated: usize,
    pub not_replicated: usize,
    pub unsure: usize,
    /// `replicated / retrieved`; `None` until some pair is reviewed.
    pub replication_rate: Option<f64>,
    /// `replicated / reviewed`.
    pub reviewed_rate: Option<f64>,
    /// Replicated pairs per 10,000 queries.
    pub per_10k_queries: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Overlap {
    pub a: String,
    pub b: String,
    /// Queries judged replicated under both retrievals.
    pub both: usize,
    pub queries: Vec<ClipId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub total: usize,
    pub reviewed: usize,
    pub confirmed: usize,
    pub rejected: usize,
    pub undecided: usize,
    /// Clips in confirmed clusters beyond one kept representative each.
    pub confirmed_duplicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotatorSummary {
    pub annotator: String,
    pub verdicts: usize,
    pub retrievals: Vec<RetrievalSummary>,
    pub clusters: Option<ClusterSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub consensus: Consensus,
    pub verdicts: usize,
    pub annotators: usize,
    pub retrievals: Vec<RetrievalSummary>,
    pub overlaps: Vec<Overlap>,
    pub clusters: Option<ClusterSummary>,
    pub per_annotator: Vec<AnnotatorSummary>,
}

/// Number of shared elements.
pub fn overlap<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> usize {
    a.intersection(b).count()
}

pub fn replication_stats<'a>(
    session: &Session,
    verdicts: impl IntoIterator<Item = &'a Verdict>,
    policy: Consensus,
) -> Summary {
    let verdicts: Vec<&Verdict> = verdicts.into_iter().collect();
    let (retrievals, replicated_sets, clusters) = summarize(session, &verdicts, policy);

    let mut overlaps = Vec::new();
    for i in 0..retrievals.len() {
        for j in i + 1..retrievals.len() {
            let queries: Vec<ClipId> = replicated_sets[i].intersection(&replicated_sets[j]).cloned().collect();
            overlaps.push(Overlap {
                a: retrievals[i].label.clone(),
                b: retrievals[j].label.clone(),
                both: queries.len(),
                queries,
            });
        }
    }

    let names: BTreeSet<&str> = verdicts.iter().map(|v| v.annotator.as_str()).collect();
    let per_annotator = names
        .iter()
        .map(|&name| {
            let own: Vec<&Verdict> = verdicts.iter().copied().filter(|v| v.annotator == name).collect();
            let (retrievals, _, clusters) = summarize(session, &own, policy);
            AnnotatorSummary {
                annotator: name.to_string(),
                verdicts: own.len(),
                retrievals,
                clusters,
            }
        })
        .collect();

    Summary {
        consensus: policy,
        verdicts: verdicts.len(),
        annotators: names.len(),
        retrievals,
        overlaps,
        clusters,
        per_annotator,
    }
}

type Parts = (Vec<RetrievalSummary>, Vec<BTreeSet<ClipId>>, Option<ClusterSummary>);

fn summarize(session: &Session, verdicts: &[&Verdict], policy: Consensus) -> Parts {
    let mut by_key: BTreeMap<&VerdictKey, Vec<Label>> = BTreeMap::new();
    for v in verdicts {
        by_key.entry(&v.key).or_default().push(v.label);
    }

    let mut summaries = Vec::new();
    let mut sets = Vec::new();
    for r in &session.retrievals {
        let mut s = RetrievalSummary {
            label: r.label.clone(),
            query_count: r.result.query_count,
            retrieved: r.result.retrieved.len(),
            ..Default::default()
        };
        let mut replicated = BTreeSet::new();
        for m in &r.result.retrieved {
            let key = VerdictKey::Pair {
                query: m.query.clone(),
                reference: m.reference.clone(),
            };
            let Some(labels) = by_key.get(&key) else { continue };
            s.reviewed += 1;
            match consensus(labels, policy) {
                Some(Label::Replicated) => {
                    s.replicated += 1;
                    replicated.insert(m.query.clone());
                }
                Some(Label::NotReplicated) => s.not_replicated += 1,
                _ => s.unsure += 1,
            }
        }
        if s.reviewed > 0 {
            s.replication_rate = Some(s.replicated as f64 / s.retrieved as f64);
            s.reviewed_rate = Some(s.replicated as f64 / s.reviewed as f64);
            if s.query_count > 0 {
                s.per_10k_queries = Some(s.replicated as f64 * 10_000.0 / s.query_count as f64);
            }
        }
        summaries.push(s);
        sets.push(replicated);
    }

    let clusters = session.clusters.as_ref().map(|report| {
        let mut c = ClusterSummary {
            total: report.clusters.len(),
            ..Default::default()
        };
        for cl in &report.clusters {
            let key = VerdictKey::Cluster {
                component_id: cl.component_id,
            };
            let Some(labels) = by_key.get(&key) else { continue };
            c.reviewed += 1;
            match consensus(labels, policy) {
                Some(Label::Confirmed) => {
                    c.confirmed += 1;
                    c.confirmed_duplicates += cl.members.len() - 1;
                }
                Some(Label::Rejected) => c.rejected += 1,
                _ => c.undecided += 1,
            }
        }
        c
    });
    (summaries, sets, clusters)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_and_any_positive() {
        use Label::*;
        assert_eq!(consensus(&[], Consensus::Majority), None);
        assert_eq!(consensus(&[Replicated, Replicated, NotReplicated], Consensus::Majority), Some(Replicated));
        assert_eq!(consensus(&[Replicated, NotReplicated], Consensus::Majority), Some(Unsure));
        assert_eq!(consensus(&[Replicated, NotReplicated], Consensus::AnyPositive), Some(Replicated));
        assert_eq!(consensus(&[Unsure, NotReplicated], Consensus::AnyPositive), Some(NotReplicated));
        assert_eq!(consensus(&[Unsure], Consensus::AnyPositive), Some(Unsure));
        assert_eq!(consensus(&[Confirmed, Rejected], Consensus::Majority), None);
        assert_eq!(consensus(&[Confirmed, Rejected], Consensus::AnyPositive), Some(Confirmed));
        assert_eq!(consensus(&[Rejected, Rejected, Confirmed], Consensus::Majority), Some(Rejected));
    }

    #[test]
    fn set_overlap() {
        let a: BTreeSet<&str> = ["a", "b", "c"].into();
        let b: BTreeSet<&str> = ["c", "d"].into();
        assert_eq!(overlap(&a, &b), 1);
    }
}
