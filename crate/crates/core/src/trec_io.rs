//! Run and qrels files in the classic TREC layouts.
//!
//! Run lines are `<topic> Q0 <doc_id> <rank> <score> <tag>`, qrels lines are
//! `<topic> <iter> <doc_id> <rel>`. Blank lines and lines starting with `#`
//! are skipped; LF and CRLF both work.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Topic identifier. Ordered numerically when both sides are integers,
/// lexically otherwise, so `54 < 111 < 10002`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Topic(pub String);

impl Topic {
    pub fn new(id: impl Into<String>) -> Self {
        Topic(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Ord for Topic {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.0.parse::<u64>(), other.0.parse::<u64>()) {
            (Ok(a), Ok(b)) => a.cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Ok(_), Err(_)) => Ordering::Less,
            (Err(_), Ok(_)) => Ordering::Greater,
            _ => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for Topic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Topic {
    fn from(s: &str) -> Self {
        Topic(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub topic: Topic,
    pub doc_id: String,
    pub rank: u32,
    /// Informational only; nothing downstream reads it.
    pub score: f64,
    pub system: String,
}

/// One system's ranked lists, keyed by topic. Every list is sorted by rank
/// and contiguous from rank 1.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RankedRun {
    pub system: String,
    lists: BTreeMap<Topic, Vec<RunEntry>>,
}

impl RankedRun {
    /// Builds a run from unordered entries, enforcing rank uniqueness,
    /// document uniqueness and rank contiguity per topic.
    pub fn from_entries(system: impl Into<String>, entries: Vec<RunEntry>) -> Result<Self> {
        let system = system.into();
        let mut lists: BTreeMap<Topic, Vec<RunEntry>> = BTreeMap::new();
        for mut e in entries {
            e.system = system.clone();
            lists.entry(e.topic.clone()).or_default().push(e);
        }
        for (topic, list) in lists.iter_mut() {
            list.sort_by_key(|e| e.rank);
            let mut seen = HashSet::with_capacity(list.len());
            for (i, e) in list.iter().enumerate() {
                let expected = i as u32 + 1;
                if i > 0 && list[i - 1].rank == e.rank {
                    return Err(Error::DuplicateRank {
                        topic: topic.to_string(),
                        rank: e.rank,
                    });
                }
                if e.rank != expected {
                    return Err(Error::RankGap {
                        topic: topic.to_string(),
                        expected,
                        found: e.rank,
                    });
                }
                if !seen.insert(e.doc_id.as_str()) {
                    return Err(Error::DuplicateDoc {
                        topic: topic.to_string(),
                        doc: e.doc_id.clone(),
                    });
                }
            }
        }
        Ok(RankedRun { system, lists })
    }

    /// Builds a run from per-topic document lists already in rank order.
    pub fn from_ranked_docs(
        system: impl Into<String>,
        lists: impl IntoIterator<Item = (Topic, Vec<(String, f64)>)>,
    ) -> Result<Self> {
        let system = system.into();
        let mut entries = Vec::new();
        for (topic, docs) in lists {
            for (i, (doc_id, score)) in docs.into_iter().enumerate() {
                entries.push(RunEntry {
                    topic: topic.clone(),
                    doc_id,
                    rank: i as u32 + 1,
                    score,
                    system: system.clone(),
                });
            }
        }
        Self::from_entries(system, entries)
    }

    pub fn topics(&self) -> impl Iterator<Item = &Topic> {
        self.lists.keys()
    }

    pub fn list(&self, topic: &Topic) -> Option<&[RunEntry]> {
        self.lists.get(topic).map(Vec::as_slice)
    }

    pub fn lists(&self) -> &BTreeMap<Topic, Vec<RunEntry>> {
        &self.lists
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }
}

fn malformed(line: usize, msg: impl Into<String>) -> Error {
    Error::Malformed {
        line,
        msg: msg.into(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            None
        } else {
            Some((i + 1, l.split_whitespace().collect()))
        }
    })
}

/// Parses a six-column run file. The system identifier is the tag column,
/// which must be the same on every line.
pub fn parse_run(text: &str) -> Result<RankedRun> {
    let mut system: Option<String> = None;
    let mut entries = Vec::new();
    for (line, fields) in content_lines(text) {
        if fields.len() != 6 {
            return Err(malformed(
                line,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        let rank: u32 = fields[3]
            .parse()
            .map_err(|_| malformed(line, format!("bad rank {:?}", fields[3])))?;
        if rank == 0 {
            return Err(malformed(line, "rank must be at least 1"));
        }
        let score: f64 = fields[4]
            .parse()
            .map_err(|_| malformed(line, format!("bad score {:?}", fields[4])))?;
        let tag = fields[5];
        match &system {
            None => system = Some(tag.to_string()),
            Some(s) if s != tag => {
                return Err(Error::NonUniformTag {
                    line,
                    expected: s.clone(),
                    found: tag.to_string(),
                })
            }
            Some(_) => {}
        }
        entries.push(RunEntry {
            topic: Topic::new(fields[0]),
            doc_id: fields[2].to_string(),
            rank,
            score,
            system: tag.to_string(),
        });
    }
    RankedRun::from_entries(system.unwrap_or_default(), entries)
}

pub fn read_run(path: impl AsRef<Path>) -> Result<RankedRun> {
    parse_run(&fs::read_to_string(path)?)
}

/// Formats a score with six significant digits, trailing zeros trimmed.
pub fn format_score(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{:.5e}", x)
    };
    trim_zeros(&s)
}

fn trim_zeros(s: &str) -> String {
    let (mantissa, exp) = match s.find('e') {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    };
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.')
    } else {
        mantissa
    };
    format!("{mantissa}{exp}")
}

/// Writes a run back out, grouped by topic (ascending) and rank.
pub fn write_run(run: &RankedRun) -> String {
    let mut out = String::new();
    for list in run.lists.values() {
        for e in list {
            out.push_str(&format!(
                "{} Q0 {} {} {} {}\n",
                e.topic,
                e.doc_id,
                e.rank,
                format_score(e.score),
                run.system
            ));
        }
    }
    out
}

/// Binary relevance judgments keyed by (topic, document).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JudgmentSet {
    judgments: BTreeMap<(Topic, String), bool>,
}

impl JudgmentSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a judgment. Re-asserting the same value is accepted, a
    /// conflicting one is not.
    pub fn insert(&mut self, topic: Topic, doc_id: impl Into<String>, relevant: bool) -> Result<()> {
        let doc_id = doc_id.into();
        match self.judgments.get(&(topic.clone(), doc_id.clone())) {
            Some(&prev) if prev != relevant => Err(Error::ConflictingJudgment {
                topic: topic.to_string(),
                doc: doc_id,
            }),
            _ => {
                self.judgments.insert((topic, doc_id), relevant);
                Ok(())
            }
        }
    }

    /// `Some(true|false)` for judged pairs, `None` when unjudged.
    pub fn get(&self, topic: &Topic, doc_id: &str) -> Option<bool> {
        self.judgments
            .get(&(topic.clone(), doc_id.to_string()))
            .copied()
    }

    /// Unjudged documents count as irrelevant.
    pub fn is_relevant(&self, topic: &Topic, doc_id: &str) -> bool {
        self.get(topic, doc_id).unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Topic, &str, bool)> {
        self.judgments.iter().map(|((t, d), r)| (t, d.as_str(), *r))
    }
}

/// Parses a four-column qrels file. Relevance values above zero collapse to 1.
pub fn parse_qrels(text: &str) -> Result<JudgmentSet> {
    let mut set = JudgmentSet::new();
    for (line, fields) in content_lines(text) {
        if fields.len() != 4 {
            return Err(malformed(
                line,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let rel: i64 = fields[3]
            .parse()
            .map_err(|_| malformed(line, format!("bad relevance {:?}", fields[3])))?;
        set.insert(Topic::new(fields[0]), fields[2], rel > 0)?;
    }
    Ok(set)
}

pub fn read_qrels(path: impl AsRef<Path>) -> Result<JudgmentSet> {
    parse_qrels(&fs::read_to_string(path)?)
}

pub fn write_qrels(q: &JudgmentSet) -> String {
    let mut out = String::new();
    for (topic, doc, rel) in q.iter() {
        out.push_str(&format!("{} 0 {} {}\n", topic, doc, u8::from(rel)));
    }
    out
}

/// A ranked list for one (system, topic) with its relevance bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JudgedList {
    pub system: String,
    pub topic: Topic,
    pub doc_ids: Vec<String>,
    /// `bits[i]` is the relevance of the document at rank `i + 1`.
    pub bits: Vec<bool>,
}

impl JudgedList {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Extends a short list with irrelevant filler up to `depth`.
    /// Filler slots carry an empty document id and never count as hits.
    pub fn padded_to(mut self, depth: usize) -> Self {
        while self.bits.len() < depth {
            self.bits.push(false);
            self.doc_ids.push(String::new());
        }
        self
    }
}

/// Judges the top `depth` documents of `run` for `topic`.
pub fn judge(run: &RankedRun, q: &JudgmentSet, topic: &Topic, depth: usize) -> Result<JudgedList> {
    if depth == 0 {
        return Err(Error::InvalidConfig("depth must be at least 1".into()));
    }
    let list = run.list(topic).ok_or_else(|| Error::MissingTopic {
        system: run.system.clone(),
        topic: topic.to_string(),
    })?;
    let top = &list[..depth.min(list.len())];
    Ok(JudgedList {
        system: run.system.clone(),
        topic: topic.clone(),
        doc_ids: top.iter().map(|e| e.doc_id.clone()).collect(),
        bits: top.iter().map(|e| q.is_relevant(topic, &e.doc_id)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_entry() {
        let run = parse_run("62 Q0 F128 1 17.5 att97re\n").unwrap();
        assert_eq!(run.system, "att97re");
        let e = &run.list(&"62".into()).unwrap()[0];
        assert_eq!(e.doc_id, "F128");
        assert_eq!(e.rank, 1);
        assert_eq!(e.score, 17.5);
    }

    #[test]
    fn empty_input_gives_empty_run() {
        let run = parse_run("").unwrap();
        assert!(run.is_empty());
        let run = parse_run("# comment\n\n   \n").unwrap();
        assert!(run.is_empty());
    }

    #[test]
    fn rank_gap_is_rejected() {
        let err = parse_run("1 Q0 a 1 1.0 s\n1 Q0 b 3 0.5 s\n").unwrap_err();
        assert!(matches!(err, Error::RankGap { expected: 2, found: 3, .. }), "{err}");
        assert!(err.to_string().contains("rank gap"));
    }

    #[test]
    fn duplicates_are_rejected() {
        let err = parse_run("1 Q0 a 1 1 s\n1 Q0 b 1 1 s\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateRank { rank: 1, .. }));
        let err = parse_run("1 Q0 a 1 1 s\n1 Q0 a 2 1 s\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateDoc { .. }));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_run("1 Q0 a 1 1 s\n\n1 Q0 b x 1 s\n").unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 3, .. }), "{err}");
        let err = parse_run("1 Q0 a 1 s\n").unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 1, .. }));
        let err = parse_run("1 Q0 a 0 1 s\n").unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 1, .. }));
    }

    #[test]
    fn tag_must_be_uniform() {
        let err = parse_run("1 Q0 a 1 1 s\n1 Q0 b 2 1 t\n").unwrap_err();
        assert!(matches!(err, Error::NonUniformTag { line: 2, .. }));
    }

    #[test]
    fn crlf_is_accepted() {
        let run = parse_run("1 Q0 a 1 1 s\r\n1 Q0 b 2 1 s\r\n").unwrap();
        assert_eq!(run.list(&"1".into()).unwrap().len(), 2);
    }

    #[test]
    fn qrels_collapse_to_binary() {
        let q = parse_qrels("1 0 F234 1\n1 0 F983 0\n1 0 X 2\n").unwrap();
        let t = Topic::from("1");
        assert_eq!(q.get(&t, "F234"), Some(true));
        assert_eq!(q.get(&t, "F983"), Some(false));
        assert_eq!(q.get(&t, "X"), Some(true));
        assert_eq!(q.get(&t, "nope"), None);
    }

    #[test]
    fn qrels_conflict_and_repeat() {
        assert!(parse_qrels("1 0 a 1\n1 0 a 2\n").is_ok());
        let err = parse_qrels("1 0 a 1\n1 0 a 0\n").unwrap_err();
        assert!(matches!(err, Error::ConflictingJudgment { .. }));
        assert!(matches!(
            parse_qrels("1 0 a\n").unwrap_err(),
            Error::Malformed { line: 1, .. }
        ));
    }

    #[test]
    fn topic_order_is_numeric() {
        let mut t: Vec<Topic> = ["10002", "62", "111", "54", "abc"].map(Topic::from).to_vec();
        t.sort();
        let s: Vec<&str> = t.iter().map(Topic::as_str).collect();
        assert_eq!(s, ["54", "62", "111", "10002", "abc"]);
    }

    #[test]
    fn write_groups_by_topic_and_rank() {
        let run = parse_run("2 Q0 b 2 1 s\n10 Q0 z 1 3 s\n2 Q0 a 1 2 s\n").unwrap();
        assert_eq!(
            write_run(&run),
            "2 Q0 a 1 2 s\n2 Q0 b 2 1 s\n10 Q0 z 1 3 s\n"
        );
    }

    #[test]
    fn score_formatting() {
        assert_eq!(format_score(17.5), "17.5");
        assert_eq!(format_score(98.5), "98.5");
        assert_eq!(format_score(100.0 / 3.0), "33.3333");
        assert_eq!(format_score(0.0), "0");
        assert_eq!(format_score(-2.25), "-2.25");
        assert_eq!(format_score(1234567.0), "1.23457e6");
        assert_eq!(format_score(0.000123456789), "0.000123457");
    }

    #[test]
    fn judge_truncates_and_defaults_to_irrelevant() {
        let run = parse_run("1 Q0 a 1 1 s\n1 Q0 b 2 1 s\n1 Q0 c 3 1 s\n").unwrap();
        let q = parse_qrels("1 0 b 1\n").unwrap();
        let j = judge(&run, &q, &"1".into(), 2).unwrap();
        assert_eq!(j.bits, vec![false, true]);
        let j = judge(&run, &q, &"1".into(), 10).unwrap();
        assert_eq!(j.len(), 3);
        let j = judge(&run, &JudgmentSet::new(), &"1".into(), 3).unwrap();
        assert!(j.bits.iter().all(|b| !b));
        assert!(matches!(
            judge(&run, &q, &"2".into(), 2).unwrap_err(),
            Error::MissingTopic { .. }
        ));
    }
}
