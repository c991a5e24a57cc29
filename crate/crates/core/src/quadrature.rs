//! Panel-wise Gauss-Legendre integration over `[t, inf)` and expectations
//! under a filter density.
//!
//! Panels start at `1 / panels_per_year` years and grow geometrically up to
//! `max_panel_width`. Integration stops at `u_horizon`; the remainder is
//! added analytically assuming the integrand decays like `C e^{-r u}`, with
//! `(C, r)` fitted to the two edges of the last panel.

use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::filter::FilterDensity;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Newton iteration from the Tricomi initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Upper limit of explicit integration, in years.
    pub u_horizon: f64,
    /// Panel density next to the lower limit.
    pub panels_per_year: f64,
    /// Gauss-Legendre order per panel.
    pub nodes_per_panel: usize,
    pub rel_tol: f64,
    /// Geometric growth factor of successive panel widths.
    pub panel_growth: f64,
    pub max_panel_width: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            u_horizon: 200.0,
            panels_per_year: 4.0,
            nodes_per_panel: 16,
            rel_tol: 1e-8,
            panel_growth: 1.15,
            max_panel_width: 10.0,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        require(
            self.u_horizon > 0.0 && self.u_horizon.is_finite(),
            "u_horizon",
            "must be positive",
        )?;
        require(
            self.panels_per_year > 0.0,
            "panels_per_year",
            "must be positive",
        )?;
        require(
            self.nodes_per_panel > 0,
            "nodes_per_panel",
            "must be positive",
        )?;
        require(self.rel_tol > 0.0, "rel_tol", "must be positive")?;
        require(
            self.panel_growth >= 1.0,
            "panel_growth",
            "must be at least 1",
        )?;
        require(
            self.max_panel_width > 0.0,
            "max_panel_width",
            "must be positive",
        )
    }

    /// Same layout with every panel split `factor` times finer.
    pub fn refined(&self, factor: f64) -> Self {
        Self {
            panels_per_year: self.panels_per_year * factor,
            max_panel_width: self.max_panel_width / factor,
            ..*self
        }
    }
}

/// Region where panel widths are additionally capped, e.g. to resolve an
/// oscillating integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthCap {
    pub until: f64,
    pub max_width: f64,
}

/// Quadrature nodes on `[start, horizon]` plus the two edges of the last
/// panel used for the tail fit.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub tail_edges: (f64, f64),
    rel_tol: f64,
}

impl NodeSet {
    /// Completes an integral from the weighted node sum and the integrand at
    /// the two tail edges.
    pub fn finish(&self, body: f64, f_a: f64, f_b: f64) -> Result<f64> {
        let (a, b) = self.tail_edges;
        Ok(body + tail_correction(body, f_a, f_b, a, b, self.rel_tol)?)
    }
}

fn tail_correction(body: f64, f_a: f64, f_b: f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if f_b == 0.0 {
        return Ok(0.0);
    }
    if f_a.signum() == f_b.signum() && f_a.abs() > f_b.abs() && b > a {
        let rate = (f_a / f_b).ln() / (b - a);
        return Ok(f_b / rate);
    }
    // not decaying: tolerable only if the integrand is negligible out here
    let ratio = f_b.abs() * b / body.abs().max(f64::MIN_POSITIVE);
    if ratio <= rel_tol {
        Ok(0.0)
    } else {
        Err(Error::Horizon { horizon: b, ratio })
    }
}

#[derive(Debug, Clone)]
pub struct Integrator {
    cfg: QuadratureConfig,
    rule: GaussLegendre,
}

impl Integrator {
    pub fn new(cfg: QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            rule: GaussLegendre::new(cfg.nodes_per_panel),
            cfg,
        })
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.cfg
    }

    /// Panel edges from `start` to the horizon. Every breakpoint inside the
    /// range becomes an edge.
    pub fn panel_edges(
        &self,
        start: f64,
        breakpoints: &[f64],
        cap: Option<WidthCap>,
    ) -> Result<Vec<f64>> {
        let horizon = self.cfg.u_horizon;
        if !(start < horizon) {
            return Err(Error::Horizon {
                horizon,
                ratio: f64::INFINITY,
            });
        }
        let mut bps: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > start && b < horizon)
            .collect();
        bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut bp_iter = bps.into_iter().peekable();

        let mut edges = vec![start];
        let mut a = start;
        let mut width = 1.0 / self.cfg.panels_per_year;
        while a < horizon {
            let mut w = width.min(self.cfg.max_panel_width);
            if let Some(c) = cap {
                if a < c.until {
                    w = w.min(c.max_width);
                }
            }
            let mut b = (a + w).min(horizon);
            while let Some(&bp) = bp_iter.peek() {
                if bp <= a + 1e-12 {
                    bp_iter.next();
                } else {
                    if bp < b {
                        b = bp;
                        bp_iter.next();
                    }
                    break;
                }
            }
            if horizon - b < 1e-9 {
                b = horizon;
            }
            edges.push(b);
            a = b;
            width *= self.cfg.panel_growth;
        }
        Ok(edges)
    }

    pub fn node_set(
        &self,
        start: f64,
        breakpoints: &[f64],
        cap: Option<WidthCap>,
    ) -> Result<NodeSet> {
        let edges = self.panel_edges(start, breakpoints, cap)?;
        let n = (edges.len() - 1) * self.rule.order();
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for w in edges.windows(2) {
            for (x, wt) in self.rule.mapped(w[0], w[1]) {
                points.push(x);
                weights.push(wt);
            }
        }
        let k = edges.len();
        let tail_edges = if k >= 2 {
            (edges[k - 2], edges[k - 1])
        } else {
            (start, start)
        };
        Ok(NodeSet {
            points,
            weights,
            tail_edges,
            rel_tol: self.cfg.rel_tol,
        })
    }

    /// `int_t^inf f(u) du`.
    pub fn integrate_semi_infinite(&self, f: impl FnMut(f64) -> f64, t: f64) -> Result<f64> {
        self.integrate_semi_infinite_with(f, t, &[], None)
    }

    pub fn integrate_semi_infinite_with(
        &self,
        mut f: impl FnMut(f64) -> f64,
        t: f64,
        breakpoints: &[f64],
        cap: Option<WidthCap>,
    ) -> Result<f64> {
        let nodes = self.node_set(t, breakpoints, cap)?;
        let body: f64 = nodes
            .points
            .iter()
            .zip(&nodes.weights)
            .map(|(&u, &w)| w * f(u))
            .sum();
        let (a, b) = nodes.tail_edges;
        nodes.finish(body, f(a), f(b))
    }
}

/// `int_t^inf f(u) du` with the given configuration.
pub fn integrate_semi_infinite(
    f: impl FnMut(f64) -> f64,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    Integrator::new(*cfg)?.integrate_semi_infinite(f, t)
}

/// `E[g(X)]` under the filter: a weighted sum over its support nodes.
pub fn expectation_over_prior(g: impl Fn(f64) -> f64, filter: &FilterDensity) -> f64 {
    filter
        .points()
        .iter()
        .zip(filter.weights())
        .map(|(&x, &w)| w * g(x))
        .sum()
}
