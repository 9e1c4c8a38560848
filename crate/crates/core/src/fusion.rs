//! Rank-averaging fusion.
//!
//! Each system gives a document `base - rank` points when it ranks the
//! document within `cutoff`, and nothing otherwise. The fused score is the
//! mean over *all* systems, so a system that does not retrieve a document
//! still counts in the denominator.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::trec_io::{JudgmentSet, RankedRun, RunEntry, Topic};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FusionConfig {
    pub cutoff: u32,
    /// Either `cutoff` or `cutoff + 1`; the latter keeps rank `cutoff`
    /// distinguishable from "not retrieved".
    pub base: u32,
    pub take: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            cutoff: 100,
            base: 101,
            take: 100,
        }
    }
}

impl FusionConfig {
    pub fn new(cutoff: u32, base: u32, take: usize) -> Result<Self> {
        let cfg = FusionConfig { cutoff, base, take };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cutoff == 0 || self.take == 0 {
            return Err(Error::InvalidConfig("cutoff and take must be positive".into()));
        }
        if self.base != self.cutoff && self.base != self.cutoff + 1 {
            return Err(Error::InvalidConfig(format!(
                "base must be {} or {}, got {}",
                self.cutoff,
                self.cutoff + 1,
                self.base
            )));
        }
        Ok(())
    }

    /// Largest score any single entry can earn.
    pub fn max_score(&self) -> u32 {
        self.base - 1
    }
}

pub fn score_entry(rank: u32, cfg: &FusionConfig) -> u32 {
    if rank >= 1 && rank <= cfg.cutoff {
        cfg.base - rank
    } else {
        0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FusedDoc {
    pub doc_id: String,
    pub score: f64,
    /// Integer sum of per-system scores; ordering uses this, not `score`.
    pub total: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FusedRun {
    pub num_systems: usize,
    pub topics: BTreeMap<Topic, Vec<FusedDoc>>,
}

impl FusedRun {
    pub fn list(&self, topic: &Topic) -> Option<&[FusedDoc]> {
        self.topics.get(topic).map(Vec::as_slice)
    }

    /// The fused lists as a regular run, ranks from 1.
    pub fn to_ranked_run(&self, tag: &str) -> RankedRun {
        let entries = self
            .topics
            .iter()
            .flat_map(|(topic, docs)| {
                docs.iter().enumerate().map(move |(i, d)| RunEntry {
                    topic: topic.clone(),
                    doc_id: d.doc_id.clone(),
                    rank: i as u32 + 1,
                    score: d.score,
                    system: tag.to_string(),
                })
            })
            .collect();
        RankedRun::from_entries(tag, entries).expect("fused lists are contiguous and unique")
    }
}

/// Fuses runs topic by topic. Topics missing from a run contribute zeros.
pub fn fuse(runs: &[RankedRun], cfg: &FusionConfig) -> Result<FusedRun> {
    if runs.is_empty() {
        return Err(Error::EmptyRunSet);
    }
    cfg.validate()?;
    let m = runs.len();
    let topics: BTreeSet<&Topic> = runs.iter().flat_map(RankedRun::topics).collect();
    let mut out = BTreeMap::new();
    for topic in topics {
        let mut totals: HashMap<&str, u64> = HashMap::new();
        for run in runs {
            for e in run.list(topic).unwrap_or(&[]) {
                if e.rank > cfg.cutoff {
                    break;
                }
                *totals.entry(e.doc_id.as_str()).or_insert(0) += u64::from(score_entry(e.rank, cfg));
            }
        }
        let mut docs: Vec<(&str, u64)> = totals.into_iter().collect();
        docs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        docs.truncate(cfg.take);
        let docs = docs
            .into_iter()
            .map(|(d, total)| FusedDoc {
                doc_id: d.to_string(),
                score: total as f64 / m as f64,
                total,
            })
            .collect();
        out.insert(topic.clone(), docs);
    }
    Ok(FusedRun {
        num_systems: m,
        topics: out,
    })
}

/// One row of the fusion evaluation table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FusionReport {
    pub topic: Topic,
    /// Relevant documents in the fused top `take`.
    pub f: usize,
    /// Individual systems with strictly more relevant documents in their top `take`.
    pub b: usize,
    /// Distinct relevant documents across all systems' top `cutoff`.
    pub g: usize,
}

pub fn evaluate_fusion(
    fused: &FusedRun,
    individuals: &[RankedRun],
    q: &JudgmentSet,
    cfg: &FusionConfig,
) -> Vec<FusionReport> {
    fused
        .topics
        .iter()
        .map(|(topic, docs)| {
            let f = docs
                .iter()
                .take(cfg.take)
                .filter(|d| q.is_relevant(topic, &d.doc_id))
                .count();
            let mut b = 0;
            let mut pool: HashSet<&str> = HashSet::new();
            for run in individuals {
                let list = run.list(topic).unwrap_or(&[]);
                let hits = list
                    .iter()
                    .take(cfg.take)
                    .filter(|e| q.is_relevant(topic, &e.doc_id))
                    .count();
                if hits > f {
                    b += 1;
                }
                pool.extend(
                    list.iter()
                        .take(cfg.cutoff as usize)
                        .filter(|e| q.is_relevant(topic, &e.doc_id))
                        .map(|e| e.doc_id.as_str()),
                );
            }
            FusionReport {
                topic: topic.clone(),
                f,
                b,
                g: pool.len(),
            }
        })
        .collect()
}
