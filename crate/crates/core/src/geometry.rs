//! Lines, projections and angles.
//!
//! A system is a line through the origin. Given the projection lengths `p`
//! and `q` of a vector `u` onto two lines at angle `theta`,
//!
//! ```text
//! |u| = sqrt(p^2 + q^2 - 2 p q cos(theta)) / sin(theta)
//! ```
//!
//! and `u` splits into coefficients along the two unit directions whose
//! signs depend on where `u` sits relative to the wedge between the lines
//! ([`AngleCase`]). Running this backwards, the overlap counts of two systems
//! determine the cosine between their lines ([`cos_angle`]).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack for clamping cosines that overshoot `[-1, 1]` by rounding.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Below this `sin(theta)` the two lines are treated as coincident.
pub const MIN_SIN: f64 = 1e-6;
/// Most negative Gram eigenvalue that eigenvalue clipping may absorb.
pub const MAX_REPAIR: f64 = 0.05;

/// Sign configuration of the decomposition of `u` over two lines.
///
/// * `CaseI`: `u` lies inside the wedge, both coefficients non-negative.
/// * `CaseII`: beyond the second line; the first line's coefficient is negative.
/// * `CaseIII`: beyond the first line; the second line's coefficient is negative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AngleCase {
    #[default]
    CaseI,
    CaseII,
    CaseIII,
}

impl AngleCase {
    pub const ALL: [AngleCase; 3] = [AngleCase::CaseI, AngleCase::CaseII, AngleCase::CaseIII];

    fn coefficient_signs(self) -> (f64, f64) {
        match self {
            AngleCase::CaseI => (1.0, 1.0),
            AngleCase::CaseII => (-1.0, 1.0),
            AngleCase::CaseIII => (1.0, -1.0),
        }
    }
}

impl fmt::Display for AngleCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AngleCase::CaseI => "I",
            AngleCase::CaseII => "II",
            AngleCase::CaseIII => "III",
        })
    }
}

impl FromStr for AngleCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" | "CASEI" => Ok(AngleCase::CaseI),
            "II" | "2" | "CASEII" => Ok(AngleCase::CaseII),
            "III" | "3" | "CASEIII" => Ok(AngleCase::CaseIII),
            other => Err(Error::InvalidConfig(format!("unknown case {other:?}"))),
        }
    }
}

/// Angle between two lines, stored as its cosine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    cos: f64,
}

impl Angle {
    /// Clamps values within [`BOUNDARY_TOL`] of `[-1, 1]`; anything further
    /// out is rejected.
    pub fn from_cos(cos: f64) -> Result<Self> {
        if !cos.is_finite() || cos.abs() > 1.0 + BOUNDARY_TOL {
            return Err(Error::GeometricInconsistency(format!(
                "cosine {cos} outside [-1, 1]"
            )));
        }
        Ok(Angle {
            cos: cos.clamp(-1.0, 1.0),
        })
    }

    pub fn cos(self) -> f64 {
        self.cos
    }

    pub fn sin(self) -> f64 {
        (1.0 - self.cos * self.cos).max(0.0).sqrt()
    }

    pub fn degrees(self) -> f64 {
        self.cos.acos().to_degrees()
    }
}

/// Cosine of the angle between two systems from their relevant counts
/// `a1`, `a2` and the count `a12` retrieved by both.
///
/// With `S = a1 + a2 - a12`:
///
/// ```text
/// cos = (a1 a2 -+ sqrt(S^2 - a1^2) sqrt(S^2 - a2^2)) / S^2
/// ```
///
/// using `-` for [`AngleCase::CaseI`] and `+` otherwise. The formula is
/// homogeneous, so ratios `(k, 1, rho)` work as well as raw counts.
pub fn cos_angle(a1: f64, a2: f64, a12: f64, case: AngleCase) -> Result<Angle> {
    if !(a1 >= 0.0 && a2 >= 0.0 && a12 >= 0.0) {
        return Err(Error::DegenerateInput(format!(
            "counts must be non-negative: ({a1}, {a2}, {a12})"
        )));
    }
    let s = a1 + a2 - a12;
    if s <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "empty union for ({a1}, {a2}, {a12})"
        )));
    }
    let s2 = s * s;
    let r1 = radicand(s2 - a1 * a1, s2, a1, a2, a12)?;
    let r2 = radicand(s2 - a2 * a2, s2, a1, a2, a12)?;
    let root = r1.sqrt() * r2.sqrt();
    let cos = match case {
        AngleCase::CaseI => (a1 * a2 - root) / s2,
        AngleCase::CaseII | AngleCase::CaseIII => (a1 * a2 + root) / s2,
    };
    Angle::from_cos(cos)
}

fn radicand(value: f64, scale: f64, a1: f64, a2: f64, a12: f64) -> Result<f64> {
    if value < -BOUNDARY_TOL * scale.max(1.0) {
        return Err(Error::GeometricInconsistency(format!(
            "overlap {a12} exceeds min({a1}, {a2})"
        )));
    }
    Ok(value.max(0.0))
}

/// [`cos_angle`] in ratio form, `k = a1/a2`, `rho = a12/a2`.
pub fn cos_angle_from_ratios(k: f64, rho: f64, case: AngleCase) -> Result<Angle> {
    cos_angle(k, 1.0, rho, case)
}

/// Length of the vector whose projections onto two lines at `angle` have
/// lengths `p` and `q`.
pub fn sum_magnitude(p: f64, q: f64, angle: Angle) -> Result<f64> {
    if p < 0.0 || q < 0.0 {
        return Err(Error::DegenerateInput(format!(
            "projection lengths must be non-negative: ({p}, {q})"
        )));
    }
    let sin = angle.sin();
    if sin < MIN_SIN {
        return Err(Error::DegenerateAngle { sin });
    }
    let c = angle.cos();
    Ok((p * p + q * q - 2.0 * p * q * c).max(0.0).sqrt() / sin)
}

/// Coefficients `(alpha, beta)` with `u = alpha * e1 + beta * e2`, where
/// `e1`, `e2` are the unit directions of the lines carrying projections `p`
/// and `q`. Magnitudes are `sqrt(U^2 - q^2)/sin` and `sqrt(U^2 - p^2)/sin`;
/// `case` picks the signs.
pub fn decompose(p: f64, q: f64, angle: Angle, case: AngleCase) -> Result<(f64, f64)> {
    let u = sum_magnitude(p, q, angle)?;
    let sin = angle.sin();
    let u2 = u * u;
    let check = |v: f64| -> Result<f64> {
        if v < -BOUNDARY_TOL * u2.max(1.0) {
            Err(Error::GeometricInconsistency(format!(
                "negative radicand {v} in decomposition"
            )))
        } else {
            Ok(v.max(0.0))
        }
    };
    let alpha = check(u2 - q * q)?.sqrt() / sin;
    let beta = check(u2 - p * p)?.sqrt() / sin;
    let (sa, sb) = case.coefficient_signs();
    Ok((sa * alpha, sb * beta))
}

/// The case actually realized by projections `p`, `q` at `angle`, read off
/// the signs of `p - q cos` and `q - p cos`.
pub fn infer_case(p: f64, q: f64, angle: Angle) -> AngleCase {
    let c = angle.cos();
    let tol = BOUNDARY_TOL * p.max(q).max(1.0);
    if p - q * c < -tol {
        AngleCase::CaseII
    } else if q - p * c < -tol {
        AngleCase::CaseIII
    } else {
        AngleCase::CaseI
    }
}

/// Explicit unit directions for a set of systems, realizing a Gram matrix of
/// pairwise cosines.
#[derive(Clone, Debug)]
pub struct SystemEmbedding {
    pub systems: Vec<String>,
    pub directions: Vec<DVector<f64>>,
    /// Gram matrix after repair; equals the input when it was PSD.
    pub gram: DMatrix<f64>,
    /// Magnitude of the most negative clipped eigenvalue (0 when none).
    pub repair_distance: f64,
}

impl SystemEmbedding {
    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    pub fn index_of(&self, system: &str) -> Option<usize> {
        self.systems.iter().position(|s| s == system)
    }
}

/// Factors a matrix of pairwise cosines into unit direction vectors.
///
/// Negative eigenvalues down to `-MAX_REPAIR` are clipped to zero and the
/// rows renormalized; anything more negative is rejected.
pub fn embed(systems: &[String], gram: &DMatrix<f64>) -> Result<SystemEmbedding> {
    let n = gram.nrows();
    if gram.ncols() != n || systems.len() != n {
        return Err(Error::Mismatch(format!(
            "gram is {}x{} for {} systems",
            gram.nrows(),
            gram.ncols(),
            systems.len()
        )));
    }
    for i in 0..n {
        if (gram[(i, i)] - 1.0).abs() > BOUNDARY_TOL {
            return Err(Error::GeometricInconsistency(format!(
                "gram diagonal entry {i} is {}",
                gram[(i, i)]
            )));
        }
        for j in 0..n {
            let g = gram[(i, j)];
            if !g.is_finite() || g.abs() > 1.0 + BOUNDARY_TOL {
                return Err(Error::GeometricInconsistency(format!(
                    "gram entry ({i}, {j}) = {g}"
                )));
            }
            if (g - gram[(j, i)]).abs() > BOUNDARY_TOL {
                return Err(Error::GeometricInconsistency(format!(
                    "gram not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    let eig = SymmetricEigen::new(gram.clone());
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eigenvalue < -MAX_REPAIR {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
    }
    // rounding-level negatives are not a repair
    let repair_distance = if min_eigenvalue < -1e-12 { -min_eigenvalue } else { 0.0 };

    let mut coords = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let scale = lambda.max(0.0).sqrt();
        coords.column_mut(j).scale_mut(scale);
    }
    let mut directions = Vec::with_capacity(n);
    for (i, system) in systems.iter().enumerate() {
        let row: DVector<f64> = coords.row(i).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            return Err(Error::GeometricInconsistency(format!(
                "system {system} collapsed to the origin"
            )));
        }
        directions.push(row / norm);
    }
    let repaired = DMatrix::from_fn(n, n, |i, j| directions[i].dot(&directions[j]));
    Ok(SystemEmbedding {
        systems: systems.to_vec(),
        directions,
        gram: repaired,
        repair_distance,
    })
}

/// A combined relevant-set vector in embedding coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinedVector {
    pub coords: DVector<f64>,
    pub magnitude: f64,
}

impl CombinedVector {
    pub fn new(coords: DVector<f64>) -> Self {
        let magnitude = coords.norm();
        CombinedVector { coords, magnitude }
    }

    /// `n` times a unit direction.
    /// `n` times a unit direction; the magnitude is `n` exactly rather
    /// than the rounded norm of the product.
    pub fn along(direction: &DVector<f64>, n: f64) -> Self {
        Self {
            coords: direction * n,
            magnitude: n.abs(),
        }
    }

    /// Cosine between this vector and a unit direction.
    pub fn cos_to(&self, direction: &DVector<f64>) -> f64 {
        if self.magnitude == 0.0 {
            return 0.0;
        }
        (self.coords.dot(direction) / self.magnitude).clamp(-1.0, 1.0)
    }
}
