//! Self-checks run by the `validate` command.
//!
//! Each check returns a pass flag and a one-line detail. Checks that cannot
//! be computed count as failures; checks that do not apply to a model are
//! left out of the report.

use std::path::PathBuf;

use anyhow::Result;
use randmix_core::{
    sample_states, value_states, HeatKernelModel, InitialCurve, PricingModel, RngStream, Summary,
    TermStructureModel,
};
use serde::Serialize;

use crate::commands::{RunOptions, STREAM_VALIDATE};
use crate::config::{BuiltModel, ScenarioConfig};
use crate::output::write_json;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Set when the check does not give a meaningful answer for this model.
    pub skipped: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub config: String,
    pub model: &'static str,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Tolerances and sample sizes of the suite.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// Time at which simulated states are examined.
    pub t: f64,
    /// Maturity used by the martingale and numeraire checks.
    pub maturity: f64,
}

const CURVE_TOL: f64 = 1e-6;
const REFINE_TOL: f64 = 1e-6;
const FH_TOL: f64 = 1e-4;
const MC_BAND: f64 = 3.0;

fn record(checks: &mut Vec<Check>, name: &str, outcome: Result<(bool, String)>) {
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e:#}")));
    checks.push(Check {
        name: name.to_string(),
        passed,
        skipped: false,
        detail,
    });
}

fn skip(checks: &mut Vec<Check>, name: &str, reason: &str) {
    checks.push(Check {
        name: name.to_string(),
        passed: true,
        skipped: true,
        detail: format!("skipped: {reason}"),
    });
}

/// Monte Carlo agreement within `MC_BAND` standard errors. The small absolute
/// floor covers deterministic models whose sample variance is pure rounding.
fn agrees(sum: &Summary, target: f64) -> bool {
    (sum.mean - target).abs() <= MC_BAND * sum.std_error() + 1e-12 * target.abs().max(1.0)
}

/// Whether `M_tu(x)` has a finite second moment for every `u` up to the
/// integration horizon and every atom of the pricing prior, i.e. whether `2h`
/// stays inside each driver's exponent domain. Without it Monte Carlo means
/// of kernel quantities have no standard error.
fn finite_variance(m: &PricingModel) -> bool {
    let horizon = m.quadrature().u_horizon;
    let xs = m.spec().prior_density().points();
    (0..=4000).all(|i| {
        let u = horizon * i as f64 / 4000.0;
        xs.iter().all(|&x| {
            m.spec().components().iter().all(|c| {
                c.driver
                    .check_exponent(2.0 * c.mixer.evaluate(u, x))
                    .is_ok()
            })
        })
    })
}

fn stream(s: &Settings, k: u64) -> RngStream {
    RngStream::new(s.seed, STREAM_VALIDATE).child(k)
}

/// Models whose quadrature can be rebuilt finer.
pub trait Refinable: Sized {
    fn refined(&self, factor: f64) -> Result<Self>;
}

impl Refinable for PricingModel {
    fn refined(&self, factor: f64) -> Result<Self> {
        Ok(self.with_quadrature(self.quadrature().refined(factor))?)
    }
}

impl Refinable for HeatKernelModel {
    fn refined(&self, factor: f64) -> Result<Self> {
        Ok(self.with_quadrature(self.quadrature().refined(factor))?)
    }
}

fn positivity<M: TermStructureModel>(m: &M, s: &Settings) -> Result<(bool, String)> {
    let n = s.n_paths.min(500);
    let states = sample_states(m, s.t, s.dt, n, stream(s, 0))?;
    let maturities: Vec<f64> = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0]
        .iter()
        .map(|tau| s.t + tau)
        .collect();
    let vals = value_states(m, s.t, &states, &maturities)?;
    let mut min_rate = f64::INFINITY;
    let mut bad = 0usize;
    for v in &vals {
        min_rate = min_rate.min(v.short_rate);
        let bonds = v.bonds();
        let ok = v.short_rate > 0.0
            && bonds.iter().all(|&p| p > 0.0 && p <= 1.0)
            && bonds.windows(2).all(|w| w[1] < w[0]);
        bad += usize::from(!ok);
    }
    Ok((
        bad == 0,
        format!(
            "{n} states at t = {}: {bad} violations, min short rate {min_rate:.6e}",
            s.t
        ),
    ))
}

fn numeraire<M: TermStructureModel>(m: &M, s: &Settings) -> Result<(bool, String)> {
    let start = m.valuation(&m.initial_state(), &[s.maturity])?;
    let target = start.numerators[0];
    let states = sample_states(m, s.t, s.dt, s.n_paths, stream(s, 1))?;
    let vals = value_states(m, s.t, &states, &[s.maturity])?;
    let sum = Summary::from_iter(vals.iter().map(|v| v.numerators[0]));
    Ok((
        agrees(&sum, target),
        format!(
            "E[pi_t P_tT] = {:.6} +/- {:.2e} vs pi_0 P_0T = {target:.6} (t = {}, T = {})",
            sum.mean,
            sum.std_error(),
            s.t,
            s.maturity
        ),
    ))
}

fn supermartingale<M: TermStructureModel>(m: &M, s: &Settings) -> Result<(bool, String)> {
    let pi0 = m.valuation(&m.initial_state(), &[])?.kernel;
    let mut passed = true;
    let mut parts = Vec::new();
    for (k, t) in [s.t, 2.0 * s.t].into_iter().enumerate() {
        let states = sample_states(m, t, s.dt, s.n_paths, stream(s, 2 + k as u64))?;
        let vals = value_states(m, t, &states, &[])?;
        let sum = Summary::from_iter(vals.iter().map(|v| v.kernel));
        passed &= sum.mean <= pi0 + MC_BAND * sum.std_error() + 1e-12 * pi0;
        parts.push(format!(
            "E[pi_{t}] = {:.6} +/- {:.2e}",
            sum.mean,
            sum.std_error()
        ));
    }
    Ok((passed, format!("pi_0 = {pi0:.6}; {}", parts.join("; "))))
}

fn quadrature<M: TermStructureModel + Refinable>(m: &M, s: &Settings) -> Result<(bool, String)> {
    let fine = m.refined(2.0)?;
    let mut states = vec![m.initial_state()];
    states.extend(sample_states(m, s.t, s.dt, 10, stream(s, 4))?);
    let mut worst = 0.0f64;
    for state in &states {
        let t = m.state_time(state);
        let maturities: Vec<f64> = [1.0, 5.0, 10.0, 20.0].iter().map(|tau| t + tau).collect();
        let a = m.valuation(state, &maturities)?.bonds();
        let b = fine.valuation(state, &maturities)?.bonds();
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok((
        worst < REFINE_TOL,
        format!("max bond price change under 2x refinement {worst:.3e}"),
    ))
}

fn initial_curve(m: &PricingModel) -> Result<(bool, String)> {
    let state = m.initial_state();
    let mut worst = 0.0f64;
    for maturity in [1.0, 2.0, 5.0, 10.0, 20.0] {
        let p = m.bond_price(&state, maturity)?;
        worst = worst.max((p - m.curve().discount(maturity)).abs());
    }
    Ok((
        worst < CURVE_TOL,
        format!("max |P_0T - P0(T)| = {worst:.3e}"),
    ))
}

/// Applies when every atom with positive prior mass gives a mixer that does
/// not depend on `u`; rates are then pinned to the initial forward curve.
fn flat_rate(m: &PricingModel, s: &Settings) -> Option<Result<(bool, String)>> {
    let InitialCurve::FlatContinuous { r0 } = *m.curve() else {
        return None;
    };
    let prior = m.spec().prior_density();
    let degenerate = prior
        .points()
        .iter()
        .zip(prior.weights())
        .filter(|(_, &w)| w > 0.0)
        .all(|(&x, _)| {
            m.spec()
                .components()
                .iter()
                .all(|c| c.mixer.is_u_independent_at(x))
        });
    if !degenerate {
        return None;
    }
    Some((|| {
        let mut worst = 0.0f64;
        for (k, t) in [1.0, 2.0, 5.0].into_iter().enumerate() {
            let states = sample_states(m, t, s.dt, 50, stream(s, 10 + k as u64))?;
            for v in value_states(m, t, &states, &[])? {
                worst = worst.max((v.short_rate - r0).abs());
            }
        }
        Ok((
            worst < CURVE_TOL,
            format!("max |r_t - {r0}| = {worst:.3e} over 150 states"),
        ))
    })())
}

fn martingale(m: &PricingModel, s: &Settings) -> Result<(bool, String)> {
    let mut passed = true;
    let mut parts = Vec::new();
    for (k, t) in [s.t, 0.5 * (s.t + s.maturity)].into_iter().enumerate() {
        let states = sample_states(m, t, s.dt, s.n_paths, stream(s, 20 + k as u64))?;
        let values: Vec<f64> = states
            .iter()
            .map(|st| m.spec().filtered_m_tu(st, s.maturity))
            .collect::<randmix_core::Result<_>>()?;
        let sum = Summary::from_slice(&values);
        passed &= agrees(&sum, 1.0);
        parts.push(format!(
            "E[M_{t},{}] = {:.5} +/- {:.2e}",
            s.maturity,
            sum.mean,
            sum.std_error()
        ));
    }
    Ok((passed, parts.join("; ")))
}

fn fh_equivalence(m: &HeatKernelModel, s: &Settings) -> Result<(bool, String)> {
    let mut states = vec![m.initial_state()];
    states.extend(sample_states(m, s.t, s.dt, 10, stream(s, 30))?);
    let mut worst = 0.0f64;
    let mut passed = true;
    for state in &states {
        let r = m.fh_equivalence(state, FH_TOL)?;
        worst = worst.max(r.relative_gap);
        passed &= r.passed;
    }
    Ok((
        passed,
        format!("max relative gap {worst:.3e} over {} states", states.len()),
    ))
}

const HEAVY_TAILS: &str =
    "M_tu has infinite variance for these parameters, so sample means carry no error bar";

fn common<M: TermStructureModel + Refinable>(
    m: &M,
    s: &Settings,
    mc_valid: bool,
    checks: &mut Vec<Check>,
) {
    record(checks, "positivity-and-monotonicity", positivity(m, s));
    if mc_valid {
        record(checks, "numeraire-consistency", numeraire(m, s));
        record(checks, "supermartingale", supermartingale(m, s));
    } else {
        skip(checks, "numeraire-consistency", HEAVY_TAILS);
        skip(checks, "supermartingale", HEAVY_TAILS);
    }
    record(checks, "quadrature-convergence", quadrature(m, s));
}

pub fn run_checks(model: &BuiltModel, s: &Settings) -> Vec<Check> {
    let mut checks = vec![Check {
        name: "admissibility".into(),
        passed: true,
        skipped: false,
        detail: "parameters and mixer admissible on the integration horizon".into(),
    }];
    match model {
        BuiltModel::Esscher(m) => {
            record(&mut checks, "initial-curve", initial_curve(m));
            if let Some(outcome) = flat_rate(m, s) {
                record(&mut checks, "flat-rate", outcome);
            }
            let mc_valid = finite_variance(m);
            if mc_valid {
                record(&mut checks, "martingale", martingale(m, s));
            } else {
                skip(&mut checks, "martingale", HEAVY_TAILS);
            }
            common(m, s, mc_valid, &mut checks);
        }
        BuiltModel::HeatKernel(m) => {
            record(&mut checks, "fh-equivalence", fh_equivalence(m, s));
            common(m, s, true, &mut checks);
        }
    }
    checks
}

/// Runs the suite and writes `validation.json`. A config that fails to build
/// yields a report with a single failed admissibility check.
pub fn validate_cmd(
    cfg: &ScenarioConfig,
    opts: &RunOptions,
) -> Result<(ValidationReport, PathBuf)> {
    std::fs::create_dir_all(&opts.out)?;
    let settings = Settings {
        n_paths: opts.paths.unwrap_or(cfg.run.validate_paths).max(2),
        dt: cfg.run.dt,
        seed: opts.seed,
        t: 1.0,
        maturity: 5.0,
    };
    let (kind, checks) = match cfg.build_model() {
        Ok(model) => (model.kind(), run_checks(&model, &settings)),
        Err(e) => (
            "invalid",
            vec![Check {
                name: "admissibility".into(),
                passed: false,
                skipped: false,
                detail: format!("{e:#}"),
            }],
        ),
    };
    let report = ValidationReport {
        config: opts.config_path.display().to_string(),
        model: kind,
        seed: opts.seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    let path = opts.out.join("validation.json");
    write_json(&path, &report)?;
    Ok((report, path))
}
