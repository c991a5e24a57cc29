//! Monte Carlo prices of European calls on discount bonds,
//! `C_st = E[pi_t (P_tT - K)^+ | F_s] / pi_s`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{PathRng, TermStructureModel};
use crate::process::RngStream;
use crate::stats::Summary;

/// Call on the bond maturing at `maturity`, exercised at `expiry`, valued at
/// the time of the conditioning state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub expiry: f64,
    pub maturity: f64,
    pub strike: f64,
    pub n_paths: usize,
    pub stream: RngStream,
    /// Largest simulation step for path-dependent information.
    pub dt: f64,
}

impl OptionSpec {
    pub fn validate(&self, s: f64) -> Result<()> {
        if !(s <= self.expiry && self.expiry < self.maturity) {
            return Err(Error::TimeOrder(format!(
                "need s <= expiry < maturity, got s = {s}, expiry = {}, maturity = {}",
                self.expiry, self.maturity
            )));
        }
        if self.n_paths < 2 {
            return Err(Error::InvalidParameter {
                name: "n_paths",
                reason: "need at least two paths for a standard error".into(),
            });
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "must be positive".into(),
            });
        }
        if !self.strike.is_finite() {
            return Err(Error::InvalidParameter {
                name: "strike",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }

    /// Strikes outside `(0, 1)` are priced but unusual for a discount bond.
    pub fn strike_in_domain(&self) -> bool {
        self.strike > 0.0 && self.strike < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptionQuote {
    pub price: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

/// One cell of an option surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub expiry: f64,
    pub strike: f64,
    pub quote: OptionQuote,
}

/// Simulates `(pi_t, pi_t P_tT)` on `n` paths restarted from `state`.
/// Path `i` uses `stream.child(i)`, so strikes priced from the same draws
/// share random numbers.
pub fn simulate_deflated_bonds<M: TermStructureModel>(
    model: &M,
    state: &M::State,
    expiry: f64,
    maturity: f64,
    n: usize,
    dt: f64,
    stream: RngStream,
) -> Result<Vec<(f64, f64)>> {
    let plan = model.plan(expiry, &[maturity])?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = PathRng::new(stream.child(i as u64));
            let x = model.sample_hidden(state, &mut rng);
            let next = model.advance(state, x, expiry, dt, &mut rng)?;
            let v = model.value(&plan, &next)?;
            Ok((v.kernel, v.numerators[0]))
        })
        .collect()
}

fn quote(draws: &[(f64, f64)], strike: f64, pi_s: f64) -> OptionQuote {
    let payoffs: Vec<f64> = draws
        .iter()
        .map(|&(pi_t, num)| (num - strike * pi_t).max(0.0) / pi_s)
        .collect();
    let s = Summary::from_slice(&payoffs);
    OptionQuote {
        price: s.mean,
        std_error: s.std_error(),
        n_paths: s.n,
    }
}

pub fn mc_bond_call<M: TermStructureModel>(
    model: &M,
    state: &M::State,
    spec: &OptionSpec,
) -> Result<OptionQuote> {
    let s = model.state_time(state);
    spec.validate(s)?;
    let pi_s = model.valuation(state, &[])?.kernel;
    let draws = simulate_deflated_bonds(
        model,
        state,
        spec.expiry,
        spec.maturity,
        spec.n_paths,
        spec.dt,
        spec.stream,
    )?;
    Ok(quote(&draws, spec.strike, pi_s))
}

/// Prices every `(expiry, strike)` pair. All strikes of an expiry share the
/// same simulated paths.
#[allow(clippy::too_many_arguments)]
pub fn option_surface<M: TermStructureModel>(
    model: &M,
    state: &M::State,
    maturity: f64,
    expiries: &[f64],
    strikes: &[f64],
    n_paths: usize,
    dt: f64,
    stream: RngStream,
) -> Result<Vec<SurfacePoint>> {
    let s = model.state_time(state);
    let pi_s = model.valuation(state, &[])?.kernel;
    let mut out = Vec::with_capacity(expiries.len() * strikes.len());
    for &expiry in expiries {
        for &strike in strikes {
            OptionSpec {
                expiry,
                maturity,
                strike,
                n_paths,
                stream,
                dt,
            }
            .validate(s)?;
        }
        let draws = simulate_deflated_bonds(model, state, expiry, maturity, n_paths, dt, stream)?;
        out.extend(strikes.iter().map(|&strike| SurfacePoint {
            expiry,
            strike,
            quote: quote(&draws, strike, pi_s),
        }));
    }
    Ok(out)
}
