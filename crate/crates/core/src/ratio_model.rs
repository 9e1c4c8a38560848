//! Constant-ratio fits between accumulated curves.
//!
//! Two systems' accumulated counts grow roughly in proportion across ranks,
//! and so does their overlap. The proportionality constants are estimated by
//! least squares through the origin:
//!
//! ```text
//! slope = sum(x*y) / sum(x^2)        r^2 = 1 - SS_res / sum(y^2)
//! ```
//!
//! The uncentered total sum of squares is the usual choice for a model
//! without intercept.

use serde::{Deserialize, Serialize};

use crate::accumulation::{accumulate, overlap, AccumulationCurve, OverlapCurve};
use crate::error::{Error, Result};
use crate::trec_io::{judge, JudgmentSet, RankedRun, Topic};

/// Default fitting depth: every rank from 1 to 100.
pub const DEFAULT_DEPTH: usize = 100;

/// Slack allowed on `rho <= min(k, 1)` before a pair is flagged.
pub const RHO_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioFit {
    pub slope: f64,
    pub r_square: f64,
    pub n_points: usize,
}

/// Through-origin regression of `y` on `x` over every rank.
pub fn fit_ratio(y: &[u32], x: &[u32]) -> Result<RatioFit> {
    if y.len() != x.len() {
        return Err(Error::Mismatch(format!(
            "curve depths {} and {} differ",
            y.len(),
            x.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Mismatch("fit needs depth of at least 2".into()));
    }
    let (mut sxy, mut sxx, mut syy) = (0.0f64, 0.0f64, 0.0f64);
    for (&xi, &yi) in x.iter().zip(y) {
        let (xi, yi) = (f64::from(xi), f64::from(yi));
        sxy += xi * yi;
        sxx += xi * xi;
        syy += yi * yi;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let slope = sxy / sxx;
    if syy == 0.0 {
        return Ok(RatioFit {
            slope: 0.0,
            r_square: 1.0,
            n_points: x.len(),
        });
    }
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let e = f64::from(yi) - slope * f64::from(xi);
            e * e
        })
        .sum();
    Ok(RatioFit {
        slope,
        r_square: (1.0 - ss_res / syy).clamp(0.0, 1.0),
        n_points: x.len(),
    })
}

/// Fitted relative detection power and overlap ratio for an ordered pair.
/// `k = a_num / a_den` and `rho = a_both / a_den`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub numerator: String,
    pub denominator: String,
    pub topic: Topic,
    pub k: f64,
    pub rho: f64,
    pub fit_k: RatioFit,
    pub fit_rho: RatioFit,
}

impl PairStats {
    /// Stats with exact ratios and perfect fits, for inputs that did not
    /// come from a regression.
    pub fn exact(
        numerator: impl Into<String>,
        denominator: impl Into<String>,
        topic: Topic,
        k: f64,
        rho: f64,
    ) -> Self {
        let perfect = |slope| RatioFit {
            slope,
            r_square: 1.0,
            n_points: 0,
        };
        PairStats {
            numerator: numerator.into(),
            denominator: denominator.into(),
            topic,
            k,
            rho,
            fit_k: perfect(k),
            fit_rho: perfect(rho),
        }
    }

    /// Set when `rho` exceeds `min(k, 1)` by more than the noise tolerance,
    /// which true counts can never do.
    pub fn warn(&self) -> bool {
        self.rho > self.k.min(1.0) + RHO_TOLERANCE
    }

    /// The same pair seen from the other side: `k' = 1/k`, `rho' = rho/k`.
    pub fn reversed(&self) -> Result<Self> {
        if self.k <= 0.0 {
            return Err(Error::UndefinedRatio);
        }
        let flip = |f: RatioFit, slope| RatioFit { slope, ..f };
        Ok(PairStats {
            numerator: self.denominator.clone(),
            denominator: self.numerator.clone(),
            topic: self.topic.clone(),
            k: 1.0 / self.k,
            rho: self.rho / self.k,
            fit_k: flip(self.fit_k, 1.0 / self.k),
            fit_rho: flip(self.fit_rho, self.rho / self.k),
        })
    }
}

/// Fits `k` and `rho` for `a1` over `a2` using their overlap curve `a12`.
pub fn pair_stats(
    a1: &AccumulationCurve,
    a2: &AccumulationCurve,
    a12: &OverlapCurve,
) -> Result<PairStats> {
    if a1.topic != a2.topic || a12.topic != a1.topic {
        return Err(Error::Mismatch("curves cover different topics".into()));
    }
    if a12.depth() != a2.depth() {
        return Err(Error::Mismatch(format!(
            "overlap depth {} differs from {}",
            a12.depth(),
            a2.depth()
        )));
    }
    let fit_k = fit_ratio(&a1.values, &a2.values)?;
    let fit_rho = fit_ratio(&a12.values, &a2.values)?;
    Ok(PairStats {
        numerator: a1.system.clone(),
        denominator: a2.system.clone(),
        topic: a1.topic.clone(),
        k: fit_k.slope,
        rho: fit_rho.slope,
        fit_k,
        fit_rho,
    })
}

/// Fit outcome for one ordered pair; `stats` is `None` when the ratio is
/// undefined (the denominator retrieved nothing relevant).
#[derive(Clone, Debug, PartialEq)]
pub struct PairFit {
    pub numerator: String,
    pub denominator: String,
    pub topic: Topic,
    pub stats: Option<PairStats>,
}

/// Fits every ordered pair of distinct runs on one topic at `depth`.
/// Lists shorter than `depth` are padded with irrelevant filler.
pub fn analyze_topic(
    runs: &[RankedRun],
    qrels: &JudgmentSet,
    topic: &Topic,
    depth: usize,
) -> Result<Vec<PairFit>> {
    let judged = runs
        .iter()
        .map(|r| Ok(judge(r, qrels, topic, depth)?.padded_to(depth)))
        .collect::<Result<Vec<_>>>()?;
    let curves: Vec<AccumulationCurve> = judged.iter().map(accumulate).collect();
    let mut out = Vec::new();
    for (i, a) in judged.iter().enumerate() {
        for (j, b) in judged.iter().enumerate() {
            if i == j {
                continue;
            }
            let both = overlap(&[a, b])?;
            let stats = match pair_stats(&curves[i], &curves[j], &both) {
                Ok(s) => Some(s),
                Err(Error::UndefinedRatio) => None,
                Err(e) => return Err(e),
            };
            out.push(PairFit {
                numerator: a.system.clone(),
                denominator: b.system.clone(),
                topic: topic.clone(),
                stats,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(system: &str, values: Vec<u32>) -> AccumulationCurve {
        AccumulationCurve {
            system: system.into(),
            topic: "1".into(),
            values,
        }
    }

    #[test]
    fn exact_multiples() {
        let x = vec![1, 2, 2, 3, 5, 8];
        let y: Vec<u32> = x.iter().map(|v| 2 * v).collect();
        let f = fit_ratio(&y, &x).unwrap();
        assert_eq!(f.slope, 2.0);
        assert!((f.r_square - 1.0).abs() < 1e-12);
        let f = fit_ratio(&x, &x).unwrap();
        assert_eq!((f.slope, f.r_square, f.n_points), (1.0, 1.0, 6));
    }

    #[test]
    fn zero_denominator_is_undefined() {
        assert!(matches!(
            fit_ratio(&[1, 2], &[0, 0]),
            Err(Error::UndefinedRatio)
        ));
    }

    #[test]
    fn zero_numerator_is_a_perfect_zero_fit() {
        let f = fit_ratio(&[0, 0, 0], &[1, 2, 3]).unwrap();
        assert_eq!((f.slope, f.r_square), (0.0, 1.0));
    }

    #[test]
    fn short_or_mismatched_curves() {
        assert!(fit_ratio(&[1], &[1]).is_err());
        assert!(fit_ratio(&[1, 2], &[1, 2, 3]).is_err());
    }

    #[test]
    fn self_comparison_and_disjoint() {
        let a = curve("a", vec![1, 2, 3, 3, 4]);
        let b = curve("b", vec![0, 1, 1, 2, 3]);
        let same = OverlapCurve {
            systems: vec!["a".into(), "a".into()],
            topic: "1".into(),
            values: a.values.clone(),
        };
        let s = pair_stats(&a, &a, &same).unwrap();
        assert_eq!((s.k, s.rho), (1.0, 1.0));
        assert!(!s.warn());
        let none = OverlapCurve {
            systems: vec!["a".into(), "b".into()],
            topic: "1".into(),
            values: vec![0; 5],
        };
        let s = pair_stats(&a, &b, &none).unwrap();
        assert_eq!(s.rho, 0.0);
        assert_eq!(s.numerator, "a");
        assert_eq!(s.denominator, "b");
    }

    #[test]
    fn warn_flag_threshold() {
        let t = Topic::from("1");
        assert!(!PairStats::exact("a", "b", t.clone(), 0.8, 0.85).warn());
        assert!(PairStats::exact("a", "b", t.clone(), 0.8, 0.86).warn());
        assert!(PairStats::exact("a", "b", t, 2.0, 1.06).warn());
    }

    #[test]
    fn reversed_pair() {
        let s = PairStats::exact("a", "b", "1".into(), 0.5, 0.25).reversed().unwrap();
        assert_eq!((s.numerator.as_str(), s.k, s.rho), ("b", 2.0, 0.5));
    }

    proptest! {
        #[test]
        fn proportional_curves_fit_exactly(
            steps in prop::collection::vec(0u32..3, 2..120),
            mult in 1u32..5,
            cut in 2usize..120,
        ) {
            let x: Vec<u32> = steps.iter().scan(1u32, |a, s| { *a += s; Some(*a) }).collect();
            let y: Vec<u32> = x.iter().map(|v| v * mult).collect();
            let full = fit_ratio(&y, &x).unwrap();
            prop_assert!((full.slope - f64::from(mult)).abs() < 1e-12);
            prop_assert!((full.r_square - 1.0).abs() < 1e-12);
            let d = cut.min(x.len()).max(2);
            let part = fit_ratio(&y[..d], &x[..d]).unwrap();
            prop_assert!((part.slope - full.slope).abs() < 1e-12);
        }

        #[test]
        fn r_square_in_unit_interval(
            x in prop::collection::vec(1u32..50, 2..40),
            y in prop::collection::vec(0u32..50, 2..40),
        ) {
            let n = x.len().min(y.len());
            let f = fit_ratio(&y[..n], &x[..n]).unwrap();
            prop_assert!((0.0..=1.0).contains(&f.r_square));
            prop_assert!(f.slope >= 0.0);
        }
    }
}
