//! Random mixers `h(u, x)`, prior laws of the hidden variable `X`, and the
//! admissibility check that keeps every Esscher exponent inside the driver's
//! domain.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::filter::FilterDensity;
use crate::process::Driver;
use crate::quadrature::{GaussLegendre, WidthCap};

/// Default number of Gauss-Legendre nodes used to discretise a continuous
/// prior for pricing.
pub const DEFAULT_PRIOR_NODES: usize = 32;

/// Nodes of a continuous prior visited by the admissibility scan.
pub const ADMISSIBILITY_NODES: usize = 201;

/// Number of u-points in the admissibility scan.
pub const ADMISSIBILITY_GRID: usize = 10_000;

/// A priori law of the hidden variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Prior {
    Uniform {
        a: f64,
        b: f64,
    },
    /// Point masses. Zero weights are allowed and stay zero under filtering.
    Discrete {
        points: Vec<f64>,
        weights: Vec<f64>,
    },
}

impl Prior {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        let p = Prior::Uniform { a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn discrete(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let p = Prior::Discrete { points, weights };
        p.validate()?;
        Ok(p)
    }

    /// Two-point law on `{0, 1}` with `P[X = 1] = p1`.
    pub fn binary(p1: f64) -> Result<Self> {
        Self::discrete(vec![0.0, 1.0], vec![1.0 - p1, p1])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Prior::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && *a >= 0.0 && a < b) {
                    return Err(Error::InvalidPrior(format!(
                        "uniform needs 0 <= a < b, got ({a}, {b})"
                    )));
                }
            }
            Prior::Discrete { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(Error::InvalidPrior(format!(
                        "{} points with {} weights",
                        points.len(),
                        weights.len()
                    )));
                }
                if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return Err(Error::InvalidPrior("weights must be non-negative".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidPrior(format!(
                        "weights sum to {total}, not 1"
                    )));
                }
                if points.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidPrior("points must be finite".into()));
                }
                for (i, x) in points.iter().enumerate() {
                    if points[..i].contains(x) {
                        return Err(Error::InvalidPrior(format!("duplicate point {x}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// The prior as a time-zero filter density. Continuous priors are
    /// discretised on `nodes` Gauss-Legendre points over `(a, b)`.
    pub fn density(&self, nodes: usize) -> FilterDensity {
        match self {
            Prior::Uniform { a, b } => {
                let rule = GaussLegendre::new(nodes);
                let (points, weights): (Vec<f64>, Vec<f64>) =
                    rule.mapped(*a, *b).map(|(x, w)| (x, w / (b - a))).unzip();
                FilterDensity::from_masses(points, weights, 0.0)
            }
            Prior::Discrete { points, weights } => {
                let total: f64 = weights.iter().sum();
                FilterDensity::from_masses(
                    points.clone(),
                    weights.iter().map(|w| w / total).collect(),
                    0.0,
                )
            }
        }
    }

    /// Smallest and largest value of the support.
    pub fn support_bounds(&self) -> (f64, f64) {
        match self {
            Prior::Uniform { a, b } => (*a, *b),
            Prior::Discrete { points, .. } => points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                    (lo.min(x), hi.max(x))
                }),
        }
    }

    /// Points at which mixer constraints are checked.
    pub fn check_points(&self, nodes: usize) -> Vec<f64> {
        match self {
            Prior::Uniform { a, b } => {
                let mut pts = self.density(nodes).points().to_vec();
                pts.push(*a);
                pts.push(*b);
                pts
            }
            Prior::Discrete { points, .. } => points.clone(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Prior::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            Prior::Discrete { points, weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (x, w) in points.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return *x;
                    }
                }
                // rounding: fall back to the last atom with positive mass
                *points
                    .iter()
                    .zip(weights)
                    .rev()
                    .find(|(_, w)| **w > 0.0)
                    .map(|(x, _)| x)
                    .unwrap()
            }
        }
    }
}

/// Parametric families of the random mixer `h(u, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MixerSpec {
    /// `c e^{-u x}`: `x` is a random decay rate.
    ExpDecay { c: f64 },
    /// `c e^{-b u (1 - x)}` for binary `x`.
    BinaryExpDecay { c: f64, b: f64 },
    /// `c e^{-b (u - x)^2}`: `x` is a random time.
    GaussBump { c: f64, b: f64 },
    /// `c1 sin(alpha1 u)` up to the random time `x`, then `c2 e^{-alpha2 u}`.
    Chameleon {
        c1: f64,
        alpha1: f64,
        c2: f64,
        alpha2: f64,
    },
    /// `c1 e^{-c2 (s - x)} s`, used by the quadratic OU heat kernel model.
    OuQuadratic { c1: f64, c2: f64 },
}

impl MixerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MixerSpec::ExpDecay { c } => require(c.is_finite(), "c", "must be finite"),
            MixerSpec::BinaryExpDecay { c, b } => {
                require(c.is_finite(), "c", "must be finite")?;
                require(b >= 0.0 && b.is_finite(), "b", "must be non-negative")
            }
            MixerSpec::GaussBump { c, b } => {
                require(c.is_finite(), "c", "must be finite")?;
                require(b > 0.0 && b.is_finite(), "b", "must be positive")
            }
            MixerSpec::Chameleon {
                c1,
                alpha1,
                c2,
                alpha2,
            } => {
                require(c1.is_finite() && c2.is_finite(), "c1/c2", "must be finite")?;
                require(alpha1.is_finite(), "alpha1", "must be finite")?;
                require(
                    alpha2 > 0.0 && alpha2.is_finite(),
                    "alpha2",
                    "must be positive",
                )
            }
            MixerSpec::OuQuadratic { c1, c2 } => {
                require(c1 > 0.0 && c1.is_finite(), "c1", "must be positive")?;
                require(c2 > 0.0 && c2.is_finite(), "c2", "must be positive")
            }
        }
    }

    #[inline]
    pub fn evaluate(&self, u: f64, x: f64) -> f64 {
        match *self {
            MixerSpec::ExpDecay { c } => c * (-u * x).exp(),
            MixerSpec::BinaryExpDecay { c, b } => c * (-b * u * (1.0 - x)).exp(),
            MixerSpec::GaussBump { c, b } => c * (-b * (u - x) * (u - x)).exp(),
            MixerSpec::Chameleon {
                c1,
                alpha1,
                c2,
                alpha2,
            } => {
                if u <= x {
                    c1 * (alpha1 * u).sin()
                } else {
                    c2 * (-alpha2 * u).exp()
                }
            }
            MixerSpec::OuQuadratic { c1, c2 } => c1 * (-c2 * (u - x)).exp() * u,
        }
    }

    /// u-values where `h(., x)` is not smooth for some support point.
    pub fn breakpoints(&self, support: &[f64]) -> Vec<f64> {
        match self {
            MixerSpec::Chameleon { .. } => support.iter().copied().filter(|x| *x > 0.0).collect(),
            _ => Vec::new(),
        }
    }

    /// Panel-width cap resolving the sine branch of a chameleon mixer.
    pub fn width_cap(&self, support: &[f64]) -> Option<WidthCap> {
        match *self {
            MixerSpec::Chameleon { alpha1, c1, .. } if alpha1 != 0.0 && c1 != 0.0 => {
                let until = support.iter().copied().fold(0.0, f64::max);
                Some(WidthCap {
                    until,
                    max_width: PI / (4.0 * alpha1.abs()),
                })
            }
            _ => None,
        }
    }

    /// True when `h(u, x)` does not depend on `u` at this `x`.
    pub fn is_u_independent_at(&self, x: f64) -> bool {
        match *self {
            MixerSpec::ExpDecay { c } => c == 0.0 || x == 0.0,
            MixerSpec::BinaryExpDecay { c, b } => c == 0.0 || b == 0.0 || x == 1.0,
            MixerSpec::GaussBump { c, .. } => c == 0.0,
            MixerSpec::Chameleon { c1, c2, .. } => c1 == 0.0 && c2 == 0.0,
            MixerSpec::OuQuadratic { .. } => false,
        }
    }

    /// u-values where the extremes of `h(., x)` over `[0, horizon]` can sit,
    /// beyond the uniform scan.
    fn critical_points(&self, x: f64, horizon: f64) -> Vec<f64> {
        let mut pts = vec![0.0, horizon];
        match *self {
            MixerSpec::GaussBump { .. } => pts.push(x),
            MixerSpec::Chameleon { alpha1, .. } => {
                pts.push(x);
                pts.push(x * (1.0 + 1e-12) + 1e-12);
                if alpha1 != 0.0 {
                    let step = PI / alpha1.abs();
                    let mut u = 0.5 * step;
                    while u <= x.min(horizon) {
                        pts.push(u);
                        u += step;
                    }
                }
            }
            MixerSpec::OuQuadratic { c2, .. } => pts.push(1.0 / c2),
            _ => {}
        }
        pts.retain(|u| *u >= 0.0 && *u <= horizon);
        pts
    }
}

/// Checks that `h(u, x)` stays in the driver's admissible exponent domain for
/// all `u` in `[0, horizon]` and all `x` in the prior's support. On failure
/// returns the `(u, x)` witness.
///
/// Monotone-in-u variants tend to `h = 0` (or a constant) as `u` grows, which
/// is always admissible, so checking up to the horizon is sufficient.
pub fn validate_admissibility(
    spec: &MixerSpec,
    prior: &Prior,
    driver: &Driver,
    horizon: f64,
) -> Result<()> {
    spec.validate()?;
    prior.validate()?;
    driver.validate()?;
    if matches!(driver, Driver::Brownian) {
        return Ok(());
    }
    let xs = prior.check_points(ADMISSIBILITY_NODES);
    let n = ADMISSIBILITY_GRID;
    for &x in &xs {
        let scan = (0..n).map(|i| horizon * i as f64 / (n - 1) as f64);
        let extra = spec.critical_points(x, horizon);
        for u in scan.chain(extra) {
            let h = spec.evaluate(u, x);
            if driver.check_exponent(h).is_err() {
                return Err(Error::Inadmissible {
                    u,
                    x,
                    h,
                    constraint: driver.constraint().into(),
                });
            }
        }
    }
    Ok(())
}
