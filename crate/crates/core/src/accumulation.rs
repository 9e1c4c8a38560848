//! Accumulated relevant counts per rank.
//!
//! `a_i(r)` counts relevant documents in system `i`'s top `r`. The overlap
//! curve `a_S(r)` counts relevant documents sitting in the top-`r` prefix of
//! *every* system in `S` at once.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::trec_io::{JudgedList, Topic};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccumulationCurve {
    pub system: String,
    pub topic: Topic,
    /// `values[r - 1] = a(r)`.
    pub values: Vec<u32>,
}

impl AccumulationCurve {
    pub fn depth(&self) -> usize {
        self.values.len()
    }

    /// `a(r)` for 1-based `r`.
    pub fn at(&self, r: usize) -> u32 {
        self.values[r - 1]
    }

    pub fn last(&self) -> u32 {
        self.values.last().copied().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlapCurve {
    pub systems: Vec<String>,
    pub topic: Topic,
    pub values: Vec<u32>,
}

impl OverlapCurve {
    pub fn depth(&self) -> usize {
        self.values.len()
    }

    pub fn at(&self, r: usize) -> u32 {
        self.values[r - 1]
    }

    pub fn last(&self) -> u32 {
        self.values.last().copied().unwrap_or(0)
    }
}

pub fn accumulate(list: &JudgedList) -> AccumulationCurve {
    let values = list
        .bits
        .iter()
        .scan(0u32, |acc, &b| {
            *acc += u32::from(b);
            Some(*acc)
        })
        .collect();
    AccumulationCurve {
        system: list.system.clone(),
        topic: list.topic.clone(),
        values,
    }
}

/// Overlap curve of two or more judged lists over the same topic and depth.
///
/// A relevant document joins the intersection at the largest of its ranks
/// across the lists; documents missing from any list never join.
pub fn overlap(lists: &[&JudgedList]) -> Result<OverlapCurve> {
    let Some(first) = lists.first() else {
        return Err(Error::Mismatch("overlap needs at least two lists".into()));
    };
    if lists.len() < 2 {
        return Err(Error::Mismatch("overlap needs at least two lists".into()));
    }
    let depth = first.len();
    for l in &lists[1..] {
        if l.topic != first.topic {
            return Err(Error::Mismatch(format!(
                "topics {} and {} differ",
                first.topic, l.topic
            )));
        }
        if l.len() != depth {
            return Err(Error::Mismatch(format!(
                "depths {} and {} differ",
                depth,
                l.len()
            )));
        }
    }

    // doc -> (lists containing it as relevant, latest rank seen)
    let mut joined: HashMap<&str, (usize, usize)> = HashMap::new();
    for l in lists {
        for (i, (doc, &rel)) in l.doc_ids.iter().zip(&l.bits).enumerate() {
            if rel {
                let slot = joined.entry(doc.as_str()).or_insert((0, 0));
                slot.0 += 1;
                slot.1 = slot.1.max(i + 1);
            }
        }
    }
    let mut increments = vec![0u32; depth + 1];
    for &(count, rank) in joined.values() {
        if count == lists.len() {
            increments[rank] += 1;
        }
    }
    let values = increments[1..]
        .iter()
        .scan(0u32, |acc, &n| {
            *acc += n;
            Some(*acc)
        })
        .collect();
    Ok(OverlapCurve {
        systems: lists.iter().map(|l| l.system.clone()).collect(),
        topic: first.topic.clone(),
        values,
    })
}
