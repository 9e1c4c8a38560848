//! Union estimates for growing sets of systems.
//!
//! Starting from one system's known relevant count `n1`, every other
//! system's count follows from its relative detection power against the base
//! (`n_i = k_{i,base} * n1`). Pairwise `(k, rho)` give the cosines between all
//! lines; the lines are embedded explicitly and a combined vector `u` absorbs
//! one system at a time: its new length is the length of the vector whose
//! projections onto `u`'s line and the next system's line are `|u|` and `n_i`.
//!
//! When `u` becomes (anti)parallel to the next line the projection formula
//! diverges, and the analytic limits are used instead: `max(|u|, n_i)` for
//! parallel lines (nested sets) and `|u| + n_i` for antiparallel ones
//! (disjoint sets). Such rows are flagged.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    self, cos_angle_from_ratios, decompose, infer_case, sum_magnitude, Angle, AngleCase,
    CombinedVector,
};
use crate::ratio_model::{PairStats, RHO_TOLERANCE};
use crate::trec_io::Topic;

/// `cos` within this distance of +-1 triggers the degenerate fallbacks.
pub const DEGENERATE_COS: f64 = 1e-6;
/// Largest ensemble [`fit_cases`] will search exhaustively.
pub const MAX_FIT_SYSTEMS: usize = 5;
/// Relative slack under which two case assignments count as tied.
const TIE_TOL: f64 = 1e-12;

/// Case per unordered pair of systems, with a default for unlisted pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CaseAssignment {
    pub default: AngleCase,
    overrides: BTreeMap<(String, String), AngleCase>,
}

impl CaseAssignment {
    pub fn uniform(case: AngleCase) -> Self {
        CaseAssignment {
            default: case,
            overrides: BTreeMap::new(),
        }
    }

    fn key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    pub fn set(&mut self, a: &str, b: &str, case: AngleCase) {
        let key = Self::key(a, b);
        if case == self.default {
            self.overrides.remove(&key);
        } else {
            self.overrides.insert(key, case);
        }
    }

    pub fn get(&self, a: &str, b: &str) -> AngleCase {
        self.overrides
            .get(&Self::key(a, b))
            .copied()
            .unwrap_or(self.default)
    }

    pub fn is_uniform(&self, case: AngleCase) -> bool {
        self.default == case && self.overrides.is_empty()
    }
}

impl fmt::Display for CaseAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "all-{}", self.default)?;
        for ((a, b), c) in &self.overrides {
            write!(f, ",{a}/{b}={c}")?;
        }
        Ok(())
    }
}

/// Accepts `all-I`, `a/b=II`, or a comma-separated mix such as
/// `all-I,a/b=II,b/c=III`.
impl FromStr for CaseAssignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = CaseAssignment::default();
        let mut pairs = Vec::new();
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            if let Some(case) = item.strip_prefix("all-") {
                out.default = case.parse()?;
            } else {
                let (pair, case) = item
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidConfig(format!("bad case item {item:?}")))?;
                let (a, b) = pair
                    .split_once('/')
                    .ok_or_else(|| Error::InvalidConfig(format!("bad case pair {pair:?}")))?;
                pairs.push((a.to_string(), b.to_string(), case.parse::<AngleCase>()?));
            }
        }
        for (a, b, c) in pairs {
            out.set(&a, &b, c);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimationConfig {
    /// Combination order; the first entry is the base system.
    pub ordered_systems: Vec<String>,
    pub cases: CaseAssignment,
}

impl EstimationConfig {
    pub fn new(ordered_systems: Vec<String>, cases: CaseAssignment) -> Result<Self> {
        if ordered_systems.is_empty() {
            return Err(Error::InvalidConfig("no systems to combine".into()));
        }
        for (i, s) in ordered_systems.iter().enumerate() {
            if ordered_systems[..i].contains(s) {
                return Err(Error::InvalidConfig(format!("system {s} listed twice")));
            }
        }
        Ok(EstimationConfig {
            ordered_systems,
            cases,
        })
    }

    pub fn base_system(&self) -> &str {
        &self.ordered_systems[0]
    }
}

/// Base first, then the rest by descending `performance`, ties by name.
pub fn order_by_performance(base: &str, performance: &[(String, f64)]) -> Vec<String> {
    let mut rest: Vec<&(String, f64)> = performance.iter().filter(|(s, _)| s != base).collect();
    rest.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    std::iter::once(base.to_string())
        .chain(rest.into_iter().map(|(s, _)| s.clone()))
        .collect()
}

/// Pair statistics for one topic, answering either orientation.
#[derive(Clone, Debug, Default)]
pub struct PairTable {
    stats: HashMap<(String, String), PairStats>,
}

impl PairTable {
    pub fn new(stats: impl IntoIterator<Item = PairStats>) -> Self {
        PairTable {
            stats: stats
                .into_iter()
                .map(|s| ((s.numerator.clone(), s.denominator.clone()), s))
                .collect(),
        }
    }

    pub fn insert(&mut self, s: PairStats) {
        self.stats
            .insert((s.numerator.clone(), s.denominator.clone()), s);
    }

    /// Stats for `numerator / denominator`, derived from the reverse
    /// orientation when only that one is present.
    pub fn get(&self, numerator: &str, denominator: &str) -> Result<PairStats> {
        if let Some(s) = self
            .stats
            .get(&(numerator.to_string(), denominator.to_string()))
        {
            return Ok(s.clone());
        }
        if let Some(s) = self
            .stats
            .get(&(denominator.to_string(), numerator.to_string()))
        {
            return s.reversed();
        }
        Err(Error::MissingPairStats {
            numerator: numerator.to_string(),
            denominator: denominator.to_string(),
        })
    }
}

/// Per-system counts `n_i = k_{i,base} * n1`, in configuration order.
pub fn estimate_counts(n1: f64, config: &EstimationConfig, table: &PairTable) -> Result<Vec<f64>> {
    let base = config.base_system();
    config
        .ordered_systems
        .iter()
        .map(|s| {
            if s == base {
                Ok(n1)
            } else {
                Ok(table.get(s, base)?.k * n1)
            }
        })
        .collect()
}

/// Gram matrix of cosines between the configured systems.
///
/// Overlap ratios that exceed `min(k, 1)` within [`RHO_TOLERANCE`] are
/// clamped; larger violations fail with every offending pair listed.
pub fn pair_cosines(config: &EstimationConfig, table: &PairTable) -> Result<(DMatrix<f64>, Vec<String>)> {
    let systems = &config.ordered_systems;
    let m = systems.len();
    let mut gram = DMatrix::identity(m, m);
    let mut clamped = Vec::new();
    let mut offending = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let stats = table.get(&systems[i], &systems[j])?;
            let cap = stats.k.min(1.0);
            if stats.rho > cap + RHO_TOLERANCE {
                offending.push(format!(
                    "{}/{} (k={:.4}, rho={:.4})",
                    systems[i], systems[j], stats.k, stats.rho
                ));
                continue;
            }
            if stats.rho > cap {
                clamped.push(format!("{}/{}", systems[i], systems[j]));
            }
            let case = config.cases.get(&systems[i], &systems[j]);
            let c = cos_angle_from_ratios(stats.k, stats.rho.min(cap), case)
                .map_err(|e| match e {
                    Error::GeometricInconsistency(msg) => Error::GeometricInconsistency(
                        format!("{}/{}: {msg}", systems[i], systems[j]),
                    ),
                    other => other,
                })?
                .cos();
            gram[(i, j)] = c;
            gram[(j, i)] = c;
        }
    }
    if !offending.is_empty() {
        return Err(Error::GeometricInconsistency(format!(
            "overlap ratio above min(k, 1) for {}",
            offending.join(", ")
        )));
    }
    Ok((gram, clamped))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Degeneracy {
    Parallel,
    Antiparallel,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `(prefix size, kind)` for every step that used a fallback.
    pub degenerate: Vec<(usize, Degeneracy)>,
    /// The raw sequence dipped and was clamped to stay nondecreasing.
    pub clamped: bool,
    pub repair_distance: f64,
    /// Pairs whose overlap ratio was clamped down to `min(k, 1)`.
    pub rho_clamped: Vec<String>,
}

impl Diagnostics {
    pub fn is_clean(&self) -> bool {
        self.degenerate.is_empty()
            && !self.clamped
            && self.repair_distance == 0.0
            && self.rho_clamped.is_empty()
    }

    /// Compact form for the CSV diagnostics column; empty when clean.
    pub fn summary(&self) -> String {
        let mut parts: Vec<String> = self
            .degenerate
            .iter()
            .map(|(step, d)| match d {
                Degeneracy::Parallel => format!("parallel@{step}"),
                Degeneracy::Antiparallel => format!("antiparallel@{step}"),
            })
            .collect();
        if self.clamped {
            parts.push("clamped".into());
        }
        if self.repair_distance > 0.0 {
            parts.push(format!("repair={:.3e}", self.repair_distance));
        }
        for p in &self.rho_clamped {
            parts.push(format!("rho-clamped:{p}"));
        }
        parts.join(";")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub topic: Topic,
    pub base_count: f64,
    /// Estimated individual counts, configuration order.
    pub counts: Vec<f64>,
    /// `cumulative[j]` estimates the union over the first `j + 1` systems.
    pub cumulative: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Estimates union counts for every prefix of the configured order.
pub fn estimate_union(
    config: &EstimationConfig,
    topic: &Topic,
    n1: f64,
    table: &PairTable,
) -> Result<EstimateRow> {
    if !(n1 >= 0.0 && n1.is_finite()) {
        return Err(Error::InvalidConfig(format!("base count {n1} must be >= 0")));
    }
    let counts = estimate_counts(n1, config, table)?;
    let (gram, rho_clamped) = pair_cosines(config, table)?;
    let embedding = geometry::embed(&config.ordered_systems, &gram)?;

    let mut diagnostics = Diagnostics {
        repair_distance: embedding.repair_distance,
        rho_clamped,
        ..Diagnostics::default()
    };
    let mut u = CombinedVector::along(&embedding.directions[0], n1);
    let mut raw = vec![u.magnitude];
    for (i, (dir, &n)) in embedding.directions.iter().zip(&counts).enumerate().skip(1) {
        let step = i + 1;
        if u.magnitude == 0.0 {
            u = CombinedVector::along(dir, n);
            raw.push(u.magnitude);
            continue;
        }
        let cos = u.cos_to(dir);
        let p = u.magnitude;
        let fallback = if cos >= 1.0 - DEGENERATE_COS {
            Some((Degeneracy::Parallel, p.max(n)))
        } else if cos <= -1.0 + DEGENERATE_COS {
            Some((Degeneracy::Antiparallel, p + n))
        } else {
            None
        };
        u = match fallback {
            Some((kind, magnitude)) => {
                diagnostics.degenerate.push((step, kind));
                CombinedVector {
                    coords: &u.coords * (magnitude / p),
                    magnitude,
                }
            }
            None => {
                let angle = Angle::from_cos(cos)?;
                let magnitude = sum_magnitude(p, n, angle)?;
                let case = infer_case(p, n, angle);
                let (alpha, beta) = decompose(p, n, angle, case)?;
                let coords = &u.coords * (alpha / p) + dir * beta;
                CombinedVector { coords, magnitude }
            }
        };
        raw.push(u.magnitude);
    }

    let mut cumulative = Vec::with_capacity(raw.len());
    for &v in &raw {
        let prev = cumulative.last().copied().unwrap_or(f64::NEG_INFINITY);
        if v < prev {
            if prev - v > 1e-12 * prev.max(1.0) {
                diagnostics.clamped = true;
            }
            cumulative.push(prev);
        } else {
            cumulative.push(v);
        }
    }
    Ok(EstimateRow {
        topic: topic.clone(),
        base_count: n1,
        counts,
        cumulative,
        diagnostics,
    })
}

/// Outcome of the exhaustive case search.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseFit {
    pub assignment: CaseAssignment,
    pub error: f64,
    /// Error of the all-Case-I assignment; `None` when it was infeasible.
    pub all_case_i_error: Option<f64>,
    /// Assignments whose error ties the best one (including it).
    pub ties: usize,
    pub evaluated: usize,
    /// Assignments rejected as geometrically inconsistent.
    pub infeasible: usize,
    pub estimates: Vec<f64>,
}

/// Sum of squared relative errors; zero truths fall back to absolute error.
pub fn relative_error(estimates: &[f64], truth: &[f64]) -> f64 {
    estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            let d = (e - t) / t.abs().max(1.0);
            d * d
        })
        .sum()
}

/// Searches every case assignment over the configured pairs for the one
/// whose cumulative estimates best match `truth` (one value per prefix).
/// Ties go to the lexicographically earliest assignment, Case I first.
pub fn fit_cases(
    config: &EstimationConfig,
    topic: &Topic,
    n1: f64,
    table: &PairTable,
    truth: &[f64],
) -> Result<CaseFit> {
    let systems = &config.ordered_systems;
    let m = systems.len();
    if truth.len() != m {
        return Err(Error::TruthLengthMismatch {
            expected: m,
            found: truth.len(),
        });
    }
    if m > MAX_FIT_SYSTEMS {
        return Err(Error::InvalidConfig(format!(
            "case search supports at most {MAX_FIT_SYSTEMS} systems, got {m}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .collect();
    let total = 3usize.pow(pairs.len() as u32);

    let assignment_at = |mut index: usize| {
        let mut cases = CaseAssignment::default();
        for &(i, j) in pairs.iter().rev() {
            cases.set(&systems[i], &systems[j], AngleCase::ALL[index % 3]);
            index /= 3;
        }
        cases
    };

    let results: Vec<Option<(f64, Vec<f64>)>> = (0..total)
        .into_par_iter()
        .map(|index| {
            let cfg = EstimationConfig {
                ordered_systems: systems.clone(),
                cases: assignment_at(index),
            };
            estimate_union(&cfg, topic, n1, table)
                .ok()
                .map(|row| (relative_error(&row.cumulative, truth), row.cumulative))
        })
        .collect();

    let best = results
        .iter()
        .filter_map(|r| r.as_ref().map(|(e, _)| *e))
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::GeometricInconsistency(
            "no case assignment yields a consistent geometry".into(),
        ));
    }
    let within = |e: f64| e <= best + TIE_TOL * best.max(1.0);
    let mut chosen = None;
    let mut ties = 0;
    for (index, r) in results.iter().enumerate() {
        if let Some((e, est)) = r {
            if within(*e) {
                ties += 1;
                if chosen.is_none() {
                    chosen = Some((index, *e, est.clone()));
                }
            }
        }
    }
    let (index, error, estimates) = chosen.expect("best error is attained");
    Ok(CaseFit {
        assignment: assignment_at(index),
        error,
        all_case_i_error: results[0].as_ref().map(|(e, _)| *e),
        ties,
        evaluated: total,
        infeasible: results.iter().filter(|r| r.is_none()).count(),
        estimates,
    })
}
