//! Classification of yield curve shapes.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveShape {
    Flat,
    Upward,
    Inverted,
    Humped,
    Dipped,
    Mixed,
}

/// Yield range below which a curve counts as flat: one basis point.
pub const FLAT_RANGE: f64 = 1e-4;

/// Classifies yields ordered by tenor. Moves smaller than `FLAT_RANGE / 100`
/// are ignored when reading off the direction of the curve.
pub fn classify(yields: &[f64]) -> CurveShape {
    let lo = yields.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = yields.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if yields.len() < 2 || hi - lo < FLAT_RANGE {
        return CurveShape::Flat;
    }
    let eps = FLAT_RANGE / 100.0;
    let mut signs: Vec<i8> = yields
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| d.abs() > eps)
        .map(|d| if d > 0.0 { 1 } else { -1 })
        .collect();
    signs.dedup();
    match signs.as_slice() {
        [1] => CurveShape::Upward,
        [-1] => CurveShape::Inverted,
        [1, -1] => CurveShape::Humped,
        [-1, 1] => CurveShape::Dipped,
        _ => CurveShape::Mixed,
    }
}
