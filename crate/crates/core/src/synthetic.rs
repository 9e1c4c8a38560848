//! Seeded synthetic ensembles with known ground truth.
//!
//! Per topic there is a pool of relevant documents, each with a latent
//! position in `[0, 1)`. A system includes a relevant document with
//! probability `recall_i`; with probability `overlap_boost` the inclusion
//! coin (and the ordering jitter) come from the topic's shared stream rather
//! than the system's own, which correlates the systems. The inclusion coins
//! are Weyl sequences with random offsets, so hits are spread evenly along
//! the latent order rather than clumped. Each relevant
//! document owns a home rank, drawn uniformly without replacement and shared
//! by all systems; a system places its documents on their home ranks, with
//! jitter on the latent position shuffling neighbours among those slots. So
//! accumulated curves and overlap curves all grow nearly linearly with rank.
//! The remaining ranks are filled with irrelevant noise documents private
//! to each system.
//!
//! Every (topic, system) pair draws from its own ChaCha stream, so topics
//! can be generated in any order or in parallel with identical output.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trec_io::{JudgmentSet, RankedRun, RunEntry, Topic};

const SHARED_STREAM: u64 = 0xFFFF;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProfile {
    pub num_systems: usize,
    pub num_topics: usize,
    /// Relevant documents per topic.
    pub pool_size: usize,
    /// Length of every ranked list.
    pub depth: usize,
    /// Per-system probability of retrieving each relevant document.
    pub recall: Vec<f64>,
    /// Probability that a system follows the shared stream for a document.
    pub overlap_boost: f64,
    /// Size of the per-topic irrelevant vocabulary.
    pub noise_docs: usize,
    /// Half-width of the uniform jitter added to latent positions.
    pub rank_jitter: f64,
    /// Home ranks are drawn from `1..=relevant_span`; `None` means the full depth.
    #[serde(default)]
    pub relevant_span: Option<usize>,
    pub seed: u64,
}

impl Default for SyntheticProfile {
    fn default() -> Self {
        SyntheticProfile {
            num_systems: 5,
            num_topics: 20,
            pool_size: 80,
            depth: 100,
            recall: vec![0.85, 0.8, 0.75, 0.7, 0.65],
            overlap_boost: 0.5,
            noise_docs: 1000,
            rank_jitter: 0.05,
            relevant_span: None,
            seed: 42,
        }
    }
}

impl SyntheticProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidProfile(m));
        if self.num_systems == 0 || self.num_topics == 0 {
            return bad("need at least one system and one topic".into());
        }
        if self.num_systems >= SHARED_STREAM as usize {
            return bad(format!("too many systems ({})", self.num_systems));
        }
        if self.depth == 0 || self.pool_size == 0 {
            return bad("depth and pool_size must be at least 1".into());
        }
        if self.recall.len() != self.num_systems {
            return bad(format!(
                "{} recall values for {} systems",
                self.recall.len(),
                self.num_systems
            ));
        }
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        if !self.recall.iter().copied().all(unit) || !unit(self.overlap_boost) {
            return bad("probabilities must lie in [0, 1]".into());
        }
        if !(self.rank_jitter >= 0.0 && self.rank_jitter.is_finite()) {
            return bad("rank_jitter must be non-negative".into());
        }
        if self.pool_size > self.depth && self.recall.iter().any(|&r| r >= 1.0) {
            return bad(format!(
                "pool of {} cannot fit in depth {} with recall 1",
                self.pool_size, self.depth
            ));
        }
        if self.relevant_span == Some(0) {
            return bad("relevant_span must be at least 1".into());
        }
        if self.noise_docs < self.depth {
            return bad(format!(
                "noise vocabulary {} smaller than depth {}",
                self.noise_docs, self.depth
            ));
        }
        Ok(())
    }

    pub fn system_names(&self) -> Vec<String> {
        (1..=self.num_systems).map(|i| format!("sys{i}")).collect()
    }

    pub fn topics(&self) -> Vec<Topic> {
        (1..=self.num_topics).map(|t| Topic(t.to_string())).collect()
    }
}

pub fn relevant_doc_id(index: usize) -> String {
    format!("R{index:04}")
}

pub fn noise_doc_id(index: usize) -> String {
    format!("N{index:05}")
}

fn stream(seed: u64, topic: usize, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((topic as u64) << 16) | slot);
    rng
}

/// Relevant hits of one system on one topic: `(relevant doc index, rank)`
/// in ascending rank order.
pub type Hits = Vec<(usize, u32)>;

/// Exact retrieval facts behind a generated ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub systems: Vec<String>,
    pub topics: Vec<Topic>,
    /// `hits[topic][system]`.
    pub hits: Vec<Vec<Hits>>,
}

impl GroundTruth {
    fn topic_index(&self, topic: &Topic) -> Result<usize> {
        self.topics
            .iter()
            .position(|t| t == topic)
            .ok_or_else(|| Error::MissingTopic {
                system: "ground truth".into(),
                topic: topic.to_string(),
            })
    }

    fn system_index(&self, system: &str) -> Result<usize> {
        self.systems
            .iter()
            .position(|s| s == system)
            .ok_or_else(|| Error::UnknownSystem(system.to_string()))
    }

    /// Relevant documents system `system` retrieves within `depth`.
    pub fn relevant_set(&self, topic: &Topic, system: &str, depth: usize) -> Result<BTreeSet<usize>> {
        let t = self.topic_index(topic)?;
        let s = self.system_index(system)?;
        Ok(self.hits[t][s]
            .iter()
            .take_while(|(_, rank)| *rank as usize <= depth)
            .map(|(d, _)| *d)
            .collect())
    }

    fn sets(&self, topic: &Topic, systems: &[&str], depth: usize) -> Result<Vec<BTreeSet<usize>>> {
        if systems.is_empty() {
            return Err(Error::InvalidConfig("empty system subset".into()));
        }
        systems
            .iter()
            .map(|s| self.relevant_set(topic, s, depth))
            .collect()
    }

    pub fn intersection_count(&self, topic: &Topic, systems: &[&str], depth: usize) -> Result<usize> {
        let sets = self.sets(topic, systems, depth)?;
        Ok(sets[0]
            .iter()
            .filter(|d| sets[1..].iter().all(|s| s.contains(d)))
            .count())
    }

    pub fn union_count(&self, topic: &Topic, systems: &[&str], depth: usize) -> Result<usize> {
        let sets = self.sets(topic, systems, depth)?;
        Ok(sets.iter().flatten().collect::<BTreeSet<_>>().len())
    }

    /// `(topic, subset label, union count)` for every nonempty subset, with
    /// subsets enumerated by bitmask and labelled `sysA+sysB`.
    pub fn union_table(&self, depth: usize) -> Result<Vec<(Topic, String, usize)>> {
        let n = self.systems.len();
        if n > 16 {
            return Err(Error::InvalidConfig(format!(
                "union table over {n} systems is too large"
            )));
        }
        let mut rows = Vec::new();
        for topic in &self.topics {
            for mask in 1u32..(1 << n) {
                let subset: Vec<&str> = (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| self.systems[i].as_str())
                    .collect();
                rows.push((
                    topic.clone(),
                    subset.join("+"),
                    self.union_count(topic, &subset, depth)?,
                ));
            }
        }
        Ok(rows)
    }
}

/// Exact union count of the relevant documents `subset` retrieves within `depth`.
pub fn oracle_union(truth: &GroundTruth, topic: &Topic, subset: &[&str], depth: usize) -> Result<usize> {
    truth.union_count(topic, subset, depth)
}

const WEYL_SHARED: f64 = 0.618_033_988_749_894_9;

/// `d -> frac(offset + d * step)`: equidistributed along document order, so
/// thresholding it spreads hits evenly instead of clumping like i.i.d. coins.
fn weyl(offset: f64, step: f64) -> impl Fn(usize) -> f64 {
    move |d| (offset + d as f64 * step).fract()
}

/// Step for the `i`-th per-system sequence: fractional part of the square
/// root of the `i`-th prime other than 5 (whose root is tied to the shared
/// golden-ratio step).
fn weyl_step(i: usize) -> f64 {
    let mut found = 0;
    let mut n = 1u64;
    loop {
        n += 1;
        if n != 5 && (2..n).take_while(|f| f * f <= n).all(|f| !n.is_multiple_of(f)) {
            if found == i {
                return (n as f64).sqrt().fract();
            }
            found += 1;
        }
    }
}

struct TopicOutput {
    lists: Vec<Vec<(String, f64)>>,
    hits: Vec<Hits>,
    noise_seen: BTreeSet<usize>,
}

fn generate_topic(profile: &SyntheticProfile, topic: usize) -> TopicOutput {
    let pool = profile.pool_size;
    let depth = profile.depth;
    let mut shared = stream(profile.seed, topic, SHARED_STREAM);
    // stratified: one latent position per 1/pool interval
    let latent: Vec<f64> = (0..pool)
        .map(|d| (d as f64 + shared.gen::<f64>()) / pool as f64)
        .collect();
    let shared_coin = weyl(shared.gen(), WEYL_SHARED);
    let shared_jitter: Vec<f64> = (0..pool).map(|_| shared.gen_range(-1.0..1.0)).collect();
    // Home ranks: a uniform sample without replacement, handed out in latent
    // order. Slots past `depth` (only when pool > span) fall off the list.
    let span = profile.relevant_span.unwrap_or(depth).min(depth);
    let mut homes: Vec<usize> = index::sample(&mut shared, span.max(pool), pool).into_vec();
    homes.sort_unstable();

    let mut lists = Vec::with_capacity(profile.num_systems);
    let mut hits = Vec::with_capacity(profile.num_systems);
    let mut noise_seen = BTreeSet::new();
    for (s, &recall) in profile.recall.iter().enumerate() {
        let mut rng = stream(profile.seed, topic, s as u64);
        let own_coin = weyl(rng.gen(), weyl_step(2 * s));
        let follow_coin = weyl(rng.gen(), weyl_step(2 * s + 1));
        let mut included: Vec<(f64, usize)> = Vec::new();
        for d in 0..pool {
            let own_jitter: f64 = rng.gen_range(-1.0..1.0);
            let (coin, jitter) = if follow_coin(d) < profile.overlap_boost {
                (shared_coin(d), shared_jitter[d])
            } else {
                (own_coin(d), own_jitter)
            };
            if coin < recall {
                included.push((latent[d] + profile.rank_jitter * jitter, d));
            }
        }
        // Jitter reorders documents among the home slots they occupy.
        let mut slots: Vec<usize> = included.iter().map(|&(_, d)| homes[d]).collect();
        slots.sort_unstable();
        included.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut ranked: Vec<Option<String>> = vec![None; depth];
        let mut sys_hits = Vec::with_capacity(included.len());
        for (&(_, d), &slot) in included.iter().zip(&slots) {
            if slot < depth {
                ranked[slot] = Some(relevant_doc_id(d));
                sys_hits.push((d, slot as u32 + 1));
            }
        }
        let noise = index::sample(&mut rng, profile.noise_docs, depth - sys_hits.len());
        let mut noise = noise.into_iter();
        let list = ranked
            .into_iter()
            .enumerate()
            .map(|(i, doc)| {
                let doc = doc.unwrap_or_else(|| {
                    let n = noise.next().expect("enough noise documents");
                    noise_seen.insert(n);
                    noise_doc_id(n)
                });
                (doc, (depth - i) as f64)
            })
            .collect();
        lists.push(list);
        hits.push(sys_hits);
    }
    TopicOutput {
        lists,
        hits,
        noise_seen,
    }
}

/// Generates runs, judgments and ground truth for `profile`.
///
/// Judgments mark the whole relevant pool relevant and every retrieved noise
/// document irrelevant.
pub fn generate(profile: &SyntheticProfile) -> Result<(Vec<RankedRun>, JudgmentSet, GroundTruth)> {
    profile.validate()?;
    let names = profile.system_names();
    let topics = profile.topics();
    let outputs: Vec<TopicOutput> = (1..=profile.num_topics)
        .into_par_iter()
        .map(|t| generate_topic(profile, t))
        .collect();

    let mut runs = Vec::with_capacity(profile.num_systems);
    for (s, name) in names.iter().enumerate() {
        let entries = topics
            .iter()
            .zip(&outputs)
            .flat_map(|(topic, out)| {
                out.lists[s].iter().enumerate().map(move |(i, (doc, score))| RunEntry {
                    topic: topic.clone(),
                    doc_id: doc.clone(),
                    rank: i as u32 + 1,
                    score: *score,
                    system: name.clone(),
                })
            })
            .collect();
        runs.push(RankedRun::from_entries(name.clone(), entries)?);
    }

    let mut qrels = JudgmentSet::new();
    for (topic, out) in topics.iter().zip(&outputs) {
        for d in 0..profile.pool_size {
            qrels.insert(topic.clone(), relevant_doc_id(d), true)?;
        }
        for &n in &out.noise_seen {
            qrels.insert(topic.clone(), noise_doc_id(n), false)?;
        }
    }
    let truth = GroundTruth {
        systems: names,
        topics,
        hits: outputs.into_iter().map(|o| o.hits).collect(),
    };
    Ok((runs, qrels, truth))
}

/// A two-system fixture with exactly planted ratios.
///
/// Each block of `block_len` ranks gives the first system `num_hits`
/// relevant documents and the second `den_hits`, of which `shared` are the
/// same documents. At every block boundary `a1 / a2 = num_hits / den_hits`
/// and `a12 / a2 = shared / den_hits`. Hits are spread evenly over the block.
pub fn planted_pair(
    num_hits: usize,
    den_hits: usize,
    shared: usize,
    block_len: usize,
    blocks: usize,
) -> Result<(RankedRun, RankedRun, JudgmentSet)> {
    if num_hits > block_len || den_hits > block_len || shared > num_hits.min(den_hits) {
        return Err(Error::InvalidProfile(format!(
            "cannot plant {num_hits}/{den_hits} hits sharing {shared} in blocks of {block_len}"
        )));
    }
    let topic = Topic::from("1");
    let spread = |hits: usize| -> Vec<usize> { (0..hits).map(|i| i * block_len / hits.max(1)).collect() };
    let mut qrels = JudgmentSet::new();
    let mut lists = [Vec::new(), Vec::new()];
    let mut next_rel = 0usize;
    for b in 0..blocks {
        let common: Vec<String> = (0..shared).map(|i| relevant_doc_id(next_rel + i)).collect();
        next_rel += shared;
        for (side, hits) in [(0usize, num_hits), (1, den_hits)] {
            let mut docs: Vec<String> = common.clone();
            for _ in shared..hits {
                docs.push(relevant_doc_id(next_rel));
                next_rel += 1;
            }
            let positions = spread(hits);
            let mut block: Vec<String> = (0..block_len)
                .map(|i| format!("N{side}-{b}-{i}"))
                .collect();
            for (doc, &pos) in docs.into_iter().zip(&positions) {
                block[pos] = doc;
            }
            lists[side].extend(block.into_iter().map(|d| (d, 0.0)));
        }
    }
    for d in 0..next_rel {
        qrels.insert(topic.clone(), relevant_doc_id(d), true)?;
    }
    let [a, b] = lists;
    Ok((
        RankedRun::from_ranked_docs("planted_a", [(topic.clone(), a)])?,
        RankedRun::from_ranked_docs("planted_b", [(topic, b)])?,
        qrels,
    ))
}
