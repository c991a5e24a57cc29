//! Interface shared by the Flesaker-Hughston and heat-kernel models, and the
//! generic path simulation built on it.

use std::fmt::Debug;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::FilterDensity;
use crate::process::{RngStream, TimeGrid};

/// Independent random streams used along one simulated path.
#[derive(Debug, Clone)]
pub struct PathRng {
    pub driver: ChaCha8Rng,
    pub info: ChaCha8Rng,
    pub hidden: ChaCha8Rng,
}

impl PathRng {
    pub fn new(stream: RngStream) -> Self {
        Self {
            driver: stream.child(0).rng(),
            info: stream.child(1).rng(),
            hidden: stream.child(2).rng(),
        }
    }
}

/// Pricing quantities at one state, for the maturities of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Valuation {
    pub t: f64,
    /// `pi_t`.
    pub kernel: f64,
    pub short_rate: f64,
    pub maturities: Vec<f64>,
    /// `pi_t P_tT` for each maturity. Never exceeds `kernel`.
    pub numerators: Vec<f64>,
    /// Instantaneous forward rates `r_tT`.
    pub forwards: Vec<f64>,
}

impl Valuation {
    pub fn bond(&self, i: usize) -> f64 {
        self.numerators[i] / self.kernel
    }

    pub fn bonds(&self) -> Vec<f64> {
        (0..self.numerators.len()).map(|i| self.bond(i)).collect()
    }

    /// Continuously compounded yield to each maturity; `NaN` at `T = t`.
    pub fn yields(&self) -> Vec<f64> {
        self.maturities
            .iter()
            .enumerate()
            .map(|(i, &m)| -self.bond(i).ln() / (m - self.t))
            .collect()
    }
}

/// A pricing-kernel model with a simulable Markov (or path-augmented) state.
pub trait TermStructureModel: Send + Sync {
    type State: Clone + Debug + Send + Sync;
    /// Precomputed data for repeated valuation at a fixed time.
    type Plan: Send + Sync;

    fn initial_state(&self) -> Self::State;

    fn state_time(&self, state: &Self::State) -> f64;

    fn filter<'a>(&self, state: &'a Self::State) -> &'a FilterDensity;

    /// Observable driver values, one per driver component.
    fn driver_values(&self, state: &Self::State) -> Vec<f64>;

    fn info_value(&self, state: &Self::State) -> f64;

    /// Moves `state` forward to time `to` given the hidden value `x`. Steps
    /// are exact in law; `dt` only bounds the step of path-dependent
    /// information.
    fn advance(
        &self,
        state: &Self::State,
        x: f64,
        to: f64,
        dt: f64,
        rng: &mut PathRng,
    ) -> Result<Self::State>;

    fn plan(&self, t: f64, maturities: &[f64]) -> Result<Self::Plan>;

    fn value(&self, plan: &Self::Plan, state: &Self::State) -> Result<Valuation>;

    /// Draws `X` from the posterior carried by `state`.
    fn sample_hidden(&self, state: &Self::State, rng: &mut PathRng) -> f64 {
        self.filter(state).sample(&mut rng.hidden)
    }

    fn valuation(&self, state: &Self::State, maturities: &[f64]) -> Result<Valuation> {
        let plan = self.plan(self.state_time(state), maturities)?;
        self.value(&plan, state)
    }
}

/// One simulated trajectory of model states together with its hidden value.
#[derive(Debug, Clone)]
pub struct StatePath<S> {
    pub x: f64,
    pub states: Vec<S>,
}

/// Simulates a joint path on `grid` from the initial state.
pub fn simulate_path<M: TermStructureModel>(
    model: &M,
    grid: &TimeGrid,
    dt: f64,
    stream: RngStream,
) -> Result<StatePath<M::State>> {
    let mut rng = PathRng::new(stream);
    let start = model.initial_state();
    let x = model.sample_hidden(&start, &mut rng);
    let mut states = Vec::with_capacity(grid.len());
    states.push(start);
    for &t in &grid.times()[1..] {
        let next = model.advance(states.last().unwrap(), x, t, dt, &mut rng)?;
        states.push(next);
    }
    Ok(StatePath { x, states })
}

/// `n` independent paths, path `i` using `stream.child(i)`.
pub fn simulate_paths<M: TermStructureModel>(
    model: &M,
    grid: &TimeGrid,
    dt: f64,
    n: usize,
    stream: RngStream,
) -> Result<Vec<StatePath<M::State>>> {
    (0..n)
        .into_par_iter()
        .map(|i| simulate_path(model, grid, dt, stream.child(i as u64)))
        .collect()
}

/// `n` independent states at time `t`, each simulated from time zero.
pub fn sample_states<M: TermStructureModel>(
    model: &M,
    t: f64,
    dt: f64,
    n: usize,
    stream: RngStream,
) -> Result<Vec<M::State>> {
    if t < 0.0 {
        return Err(Error::TimeOrder(format!("negative sampling time {t}")));
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = PathRng::new(stream.child(i as u64));
            let start = model.initial_state();
            let x = model.sample_hidden(&start, &mut rng);
            if t == 0.0 {
                Ok(start)
            } else {
                model.advance(&start, x, t, dt, &mut rng)
            }
        })
        .collect()
}

/// Values every state with a single plan at time `t`.
pub fn value_states<M: TermStructureModel>(
    model: &M,
    t: f64,
    states: &[M::State],
    maturities: &[f64],
) -> Result<Vec<Valuation>> {
    let plan = model.plan(t, maturities)?;
    states.par_iter().map(|s| model.value(&plan, s)).collect()
}
