//! Information processes about the hidden variable `X` and the Bayesian
//! posterior `f_t(x)` they induce.
//!
//! Posterior weights are accumulated in log space and normalised by
//! subtracting the largest log-weight before exponentiating.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::process::{GammaParams, SamplePath, TimeGrid};

/// Posterior (or prior) law of `X` on a finite support.
///
/// For a continuous prior the support is a set of quadrature nodes and the
/// weights already include the quadrature weights, so every expectation is
/// a plain weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterDensity {
    points: Vec<f64>,
    weights: Vec<f64>,
    t: f64,
}

impl FilterDensity {
    pub(crate) fn from_masses(points: Vec<f64>, weights: Vec<f64>, t: f64) -> Self {
        debug_assert_eq!(points.len(), weights.len());
        Self { points, weights, t }
    }

    /// Normalises unnormalised log-weights.
    pub fn from_log_weights(points: Vec<f64>, log_weights: &[f64], t: f64) -> Result<Self> {
        let max = log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::DegeneratePosterior { t });
        }
        let mut weights: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { points, weights, t })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Posterior probability of the atom at `x` (zero if `x` is not a node).
    pub fn mass_at(&self, x: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .filter(|(p, _)| **p == x)
            .map(|(_, w)| *w)
            .sum()
    }

    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    /// Draws `X` from the (discretised) posterior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (x, w) in self.points.iter().zip(&self.weights) {
            acc += w;
            if u < acc {
                return *x;
            }
        }
        *self
            .points
            .iter()
            .zip(&self.weights)
            .rev()
            .find(|(_, w)| **w > 0.0)
            .map(|(x, _)| x)
            .unwrap_or(&self.points[self.points.len() - 1])
    }

    fn log_prior(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.ln()).collect()
    }

    fn with_time(&self, t: f64) -> Self {
        Self {
            points: self.points.clone(),
            weights: self.weights.clone(),
            t,
        }
    }
}

/// Signal function `l(t, x)` of a Brownian information process.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Signal {
    /// `sigma x`
    Linear { sigma: f64 },
    /// `sigma x e^{-decay t}`: information about `X` fades over time.
    Fading { sigma: f64, decay: f64 },
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl Signal {
    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Signal::Custom(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Signal::Linear { sigma } => sigma * x,
            Signal::Fading { sigma, decay } => sigma * x * (-decay * t).exp(),
            Signal::Custom(f) => f(t, x),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Signal::Linear { sigma } => require(
                sigma > 0.0 && sigma.is_finite(),
                "sigma",
                "must be positive",
            ),
            Signal::Fading { sigma, decay } => {
                require(
                    sigma > 0.0 && sigma.is_finite(),
                    "sigma",
                    "must be positive",
                )?;
                require(
                    decay >= 0.0 && decay.is_finite(),
                    "decay",
                    "must be non-negative",
                )
            }
            Signal::Custom(_) => Ok(()),
        }
    }
}

impl fmt::Debug for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signal::Linear { sigma } => f.debug_struct("Linear").field("sigma", sigma).finish(),
            Signal::Fading { sigma, decay } => f
                .debug_struct("Fading")
                .field("sigma", sigma)
                .field("decay", decay)
                .finish(),
            Signal::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// How market participants observe `X`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InfoSpec {
    /// `I_t = sigma X t + B_t`; Markov in `(t, I_t)`.
    BrownianLinear { sigma: f64 },
    /// `I_t = int_0^t l(s, X) ds + B_t`; the posterior needs the whole path.
    BrownianGeneral { signal: Signal },
    /// `I_t = X gamma~_t`, requires a strictly positive support.
    GammaNoise { m_tilde: f64, kappa_tilde: f64 },
}

impl InfoSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            InfoSpec::BrownianLinear { sigma } => require(
                *sigma > 0.0 && sigma.is_finite(),
                "sigma",
                "must be positive",
            ),
            InfoSpec::BrownianGeneral { signal } => signal.validate(),
            InfoSpec::GammaNoise {
                m_tilde,
                kappa_tilde,
            } => GammaParams::new(*m_tilde, *kappa_tilde).map(|_| ()),
        }
    }

    pub fn validate_support(&self, support: &[f64]) -> Result<()> {
        if let InfoSpec::GammaNoise { .. } = self {
            if support.iter().any(|x| *x <= 0.0) {
                return Err(Error::InvalidPrior(
                    "gamma information requires a strictly positive support".into(),
                ));
            }
        }
        Ok(())
    }

    /// `l(t, x)` for Brownian information; `None` for gamma noise.
    pub fn signal(&self, t: f64, x: f64) -> Option<f64> {
        match self {
            InfoSpec::BrownianLinear { sigma } => Some(sigma * x),
            InfoSpec::BrownianGeneral { signal } => Some(signal.eval(t, x)),
            InfoSpec::GammaNoise { .. } => None,
        }
    }

    pub fn is_markov(&self) -> bool {
        !matches!(self, InfoSpec::BrownianGeneral { .. })
    }

    /// Information value at time zero.
    pub fn initial_state(&self) -> InfoState {
        match self {
            InfoSpec::BrownianGeneral { .. } => InfoState::Path(
                SamplePath::new(TimeGrid::new(vec![0.0]).unwrap(), vec![0.0]).unwrap(),
            ),
            _ => InfoState::Value(0.0),
        }
    }

    /// Advances the information from `from` to `to` given `X = x`. Brownian
    /// paths with a general signal are stepped with width at most `dt`.
    pub fn advance<R: Rng + ?Sized>(
        &self,
        state: &InfoState,
        x: f64,
        from: f64,
        to: f64,
        dt: f64,
        rng: &mut R,
    ) -> InfoState {
        let h = to - from;
        match (self, state) {
            (InfoSpec::BrownianLinear { sigma }, InfoState::Value(i)) => {
                let z: f64 = StandardNormal.sample(rng);
                InfoState::Value(i + sigma * x * h + h.sqrt() * z)
            }
            (
                InfoSpec::GammaNoise {
                    m_tilde,
                    kappa_tilde,
                },
                InfoState::Value(i),
            ) => {
                let g = GammaParams {
                    m: *m_tilde,
                    kappa: *kappa_tilde,
                }
                .sample_increment(h, rng);
                InfoState::Value(i + x * g)
            }
            (InfoSpec::BrownianGeneral { signal }, InfoState::Path(path)) => {
                let mut times = path.grid.times().to_vec();
                let mut values = path.values.clone();
                let n = ((h / dt) - 1e-9).ceil().max(1.0) as usize;
                let step = h / n as f64;
                let mut level = *values.last().unwrap();
                for k in 0..n {
                    let s = from + k as f64 * step;
                    let z: f64 = StandardNormal.sample(rng);
                    level += signal.eval(s, x) * step + step.sqrt() * z;
                    times.push(if k + 1 == n { to } else { s + step });
                    values.push(level);
                }
                InfoState::Path(
                    SamplePath::new(TimeGrid::new(times).expect("increasing"), values).unwrap(),
                )
            }
            _ => panic!("information state does not match its specification"),
        }
    }

    /// Posterior implied by the observed information at time `t`.
    pub fn posterior(
        &self,
        prior: &FilterDensity,
        state: &InfoState,
        t: f64,
    ) -> Result<FilterDensity> {
        match (self, state) {
            (InfoSpec::BrownianLinear { sigma }, InfoState::Value(i)) => {
                Ok(posterior_brownian_linear(prior, *sigma, *i, t)?)
            }
            (
                InfoSpec::GammaNoise {
                    m_tilde,
                    kappa_tilde,
                },
                InfoState::Value(i),
            ) => posterior_gamma_info(prior, *m_tilde, *kappa_tilde, *i, t),
            (InfoSpec::BrownianGeneral { signal }, InfoState::Path(path)) => {
                posterior_brownian_general(prior, signal, path)
            }
            _ => Err(Error::Unsupported(
                "information state does not match its specification".into(),
            )),
        }
    }
}

/// Observed information at a valuation time.
#[derive(Debug, Clone, PartialEq)]
pub enum InfoState {
    Value(f64),
    /// Full observed path, needed when the posterior is path dependent.
    Path(SamplePath),
}

impl InfoState {
    pub fn value(&self) -> f64 {
        match self {
            InfoState::Value(v) => *v,
            InfoState::Path(p) => p.terminal(),
        }
    }
}

/// Simulates the information path on `grid` given `X = x_true`.
pub fn simulate_information<R: Rng + ?Sized>(
    spec: &InfoSpec,
    x_true: f64,
    grid: &TimeGrid,
    rng: &mut R,
) -> SamplePath {
    match spec {
        InfoSpec::BrownianLinear { sigma } => SamplePath::accumulate(grid, 0.0, |dt| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * x_true * dt + dt.sqrt() * z
        }),
        InfoSpec::BrownianGeneral { signal } => {
            let mut values = Vec::with_capacity(grid.len());
            let mut level = 0.0;
            values.push(level);
            for (s, dt) in grid.steps() {
                let z: f64 = StandardNormal.sample(rng);
                level += signal.eval(s, x_true) * dt + dt.sqrt() * z;
                values.push(level);
            }
            SamplePath {
                grid: grid.clone(),
                values,
            }
        }
        InfoSpec::GammaNoise {
            m_tilde,
            kappa_tilde,
        } => {
            let g = GammaParams {
                m: *m_tilde,
                kappa: *kappa_tilde,
            };
            SamplePath::accumulate(grid, 0.0, |dt| x_true * g.sample_increment(dt, rng))
        }
    }
}

/// `f_t(x) ∝ f_0(x) exp(sigma x I_t - sigma^2 x^2 t / 2)`.
pub fn posterior_brownian_linear(
    prior: &FilterDensity,
    sigma: f64,
    i_t: f64,
    t: f64,
) -> Result<FilterDensity> {
    if t == 0.0 {
        return Ok(prior.with_time(0.0));
    }
    let logs: Vec<f64> = prior
        .log_prior()
        .iter()
        .zip(prior.points())
        .map(|(lp, &x)| lp + sigma * x * i_t - 0.5 * sigma * sigma * x * x * t)
        .collect();
    FilterDensity::from_log_weights(prior.points().to_vec(), &logs, t)
}

/// Posterior for a general signal: `int l dI` by left-endpoint sums on the
/// path's grid and `int l^2 ds` by the trapezoid rule.
pub fn posterior_brownian_general(
    prior: &FilterDensity,
    signal: &Signal,
    info_path: &SamplePath,
) -> Result<FilterDensity> {
    let times = info_path.times();
    let t = *times.last().unwrap();
    let logs: Vec<f64> = prior
        .log_prior()
        .iter()
        .zip(prior.points())
        .map(|(lp, &x)| {
            let mut stoch = 0.0;
            let mut quad = 0.0;
            for k in 0..times.len() - 1 {
                let dt = times[k + 1] - times[k];
                let l0 = signal.eval(times[k], x);
                let l1 = signal.eval(times[k + 1], x);
                stoch += l0 * (info_path.values[k + 1] - info_path.values[k]);
                quad += 0.5 * (l0 * l0 + l1 * l1) * dt;
            }
            lp + stoch - 0.5 * quad
        })
        .collect();
    FilterDensity::from_log_weights(prior.points().to_vec(), &logs, t)
}

/// `f_t(x) ∝ f_0(x) x^{-m~ t} exp(-I_t / (kappa~ x))`. At `t = 0` the prior
/// is returned.
pub fn posterior_gamma_info(
    prior: &FilterDensity,
    m_tilde: f64,
    kappa_tilde: f64,
    i_t: f64,
    t: f64,
) -> Result<FilterDensity> {
    if prior.points().iter().any(|x| *x <= 0.0) {
        return Err(Error::Domain {
            h: prior.points().iter().copied().fold(f64::INFINITY, f64::min),
            constraint: "gamma information needs a strictly positive support".into(),
        });
    }
    if t == 0.0 {
        return Ok(prior.with_time(0.0));
    }
    if !(i_t > 0.0) {
        return Err(Error::Domain {
            h: i_t,
            constraint: "gamma information value must be positive for t > 0".into(),
        });
    }
    let logs: Vec<f64> = prior
        .log_prior()
        .iter()
        .zip(prior.points())
        .map(|(lp, &x)| lp - m_tilde * t * x.ln() - i_t / (kappa_tilde * x))
        .collect();
    FilterDensity::from_log_weights(prior.points().to_vec(), &logs, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixer::Prior;
    use crate::process::RngStream;
    use crate::stats::Summary;

    fn binary(p1: f64) -> FilterDensity {
        Prior::binary(p1).unwrap().density(0)
    }

    #[test]
    fn brownian_linear_bayes_update() {
        let prior = binary(0.5);
        assert_eq!(
            posterior_brownian_linear(&prior, 0.1, 3.0, 0.0)
                .unwrap()
                .weights(),
            prior.weights()
        );
        let post = posterior_brownian_linear(&prior, 0.1, 2.0, 1.0).unwrap();
        let e = 0.195f64.exp();
        assert!((post.mass_at(1.0) - e / (1.0 + e)).abs() < 1e-15);
        assert!((post.mass_at(1.0) - 0.5486).abs() < 1e-4);
        let null = posterior_brownian_linear(&binary(0.0), 0.1, 50.0, 10.0).unwrap();
        assert_eq!(null.mass_at(1.0), 0.0);
        assert!((null.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn extreme_exponents_stay_normalised() {
        let prior = Prior::discrete(vec![1.0, 2.0, 50.0], vec![0.3, 0.3, 0.4])
            .unwrap()
            .density(0);
        let post = posterior_brownian_linear(&prior, 5.0, 1e4, 1e3).unwrap();
        assert!((post.total_mass() - 1.0).abs() < 1e-12);
        assert!(post.weights().iter().all(|w| w.is_finite() && *w >= 0.0));
    }

    #[test]
    fn gamma_info_bayes_update() {
        let prior = Prior::discrete(vec![1.0, 2.0], vec![0.5, 0.5])
            .unwrap()
            .density(0);
        let post = posterior_gamma_info(&prior, 1.0, 1.0, 2.0, 1.0).unwrap();
        let (a, b) = ((-2.0f64).exp(), 0.5 * (-1.0f64).exp());
        assert!((post.mass_at(1.0) - a / (a + b)).abs() < 1e-15);
        assert!((post.mass_at(1.0) - 0.4239).abs() < 1e-4);
        assert_eq!(
            posterior_gamma_info(&prior, 1.0, 1.0, 0.0, 0.0)
                .unwrap()
                .weights(),
            prior.weights()
        );
        assert!(posterior_gamma_info(&prior, 1.0, 1.0, -1.0, 1.0).is_err());
        assert!(posterior_gamma_info(&binary(0.5), 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn general_signal_edge_cases() {
        let prior = Prior::discrete(vec![0.5, 1.0, 2.0], vec![0.2, 0.5, 0.3])
            .unwrap()
            .density(0);
        let grid = TimeGrid::uniform(2.0, 0.01).unwrap();
        let mut rng = RngStream::new(4, 0).rng();
        let path = simulate_information(
            &InfoSpec::BrownianLinear { sigma: 0.5 },
            1.0,
            &grid,
            &mut rng,
        );
        let none = posterior_brownian_general(&prior, &Signal::custom(|_, _| 0.0), &path).unwrap();
        for (a, b) in none.weights().iter().zip(prior.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
        let flat = SamplePath::new(grid.clone(), vec![0.0; grid.len()]).unwrap();
        let post =
            posterior_brownian_general(&prior, &Signal::Linear { sigma: 0.5 }, &flat).unwrap();
        // prior-weighted likelihood e^{-sigma^2 x^2 t / 2} favours the smallest |x|
        let ratio = post.mass_at(0.5) / post.mass_at(1.0);
        let expected = 0.2 / 0.5 * (0.5f64 * 0.25 * (1.0 - 0.25) * 2.0).exp();
        assert!((ratio - expected).abs() < 1e-12);
    }

    #[test]
    fn linear_signal_matches_markov_posterior() {
        let prior = Prior::uniform(0.0, 2.0).unwrap().density(41);
        for dt in [1.0 / 250.0, 1.0 / 1000.0] {
            let grid = TimeGrid::uniform(3.0, dt).unwrap();
            let mut rng = RngStream::new(8, 1).rng();
            let path = simulate_information(
                &InfoSpec::BrownianLinear { sigma: 0.7 },
                1.3,
                &grid,
                &mut rng,
            );
            let general =
                posterior_brownian_general(&prior, &Signal::Linear { sigma: 0.7 }, &path).unwrap();
            let markov = posterior_brownian_linear(&prior, 0.7, path.terminal(), 3.0).unwrap();
            let gap = general
                .weights()
                .iter()
                .zip(markov.weights())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(gap < dt, "dt={dt} gap={gap}");
        }
    }

    #[test]
    fn information_drifts() {
        let n = 100_000;
        let spec = InfoSpec::BrownianLinear { sigma: 0.1 };
        let grid = TimeGrid::new(vec![0.0, 10.0]).unwrap();
        let mut rng = RngStream::new(21, 0).rng();
        let s = Summary::from_iter(
            (0..n).map(|_| simulate_information(&spec, 1.0, &grid, &mut rng).terminal()),
        );
        assert!(s.within(1.0, 3.0), "{s:?}");
        let pure = simulate_information(&spec, 0.0, &grid, &mut RngStream::new(1, 1).rng());
        let noise = simulate_information(
            &InfoSpec::BrownianLinear { sigma: 5.0 },
            0.0,
            &grid,
            &mut RngStream::new(1, 1).rng(),
        );
        assert_eq!(pure, noise);
        let spec = InfoSpec::GammaNoise {
            m_tilde: 1.0,
            kappa_tilde: 1.0,
        };
        let grid = TimeGrid::uniform(3.0, 0.5).unwrap();
        let s = Summary::from_iter(
            (0..n).map(|_| simulate_information(&spec, 2.0, &grid, &mut rng).terminal()),
        );
        assert!(s.within(6.0, 3.0), "{s:?}");
    }

    #[test]
    fn gamma_info_concentrates_on_truth() {
        let prior = Prior::discrete(vec![1.0, 2.0], vec![0.5, 0.5])
            .unwrap()
            .density(0);
        let (m, k) = (5.0, 1.0);
        let spec = InfoSpec::GammaNoise {
            m_tilde: m,
            kappa_tilde: k,
        };
        let grid = TimeGrid::new(vec![0.0, 20.0]).unwrap();
        let mut rng = RngStream::new(22, 0).rng();
        let hits = (0..1000)
            .filter(|_| {
                let i = simulate_information(&spec, 2.0, &grid, &mut rng).terminal();
                posterior_gamma_info(&prior, m, k, i, 20.0)
                    .unwrap()
                    .mass_at(2.0)
                    > 0.99
            })
            .count();
        assert!(hits >= 950, "{hits}");
    }

    #[test]
    fn advance_matches_specification() {
        let mut rng = RngStream::new(2, 2).rng();
        let spec = InfoSpec::BrownianGeneral {
            signal: Signal::Linear { sigma: 1.0 },
        };
        let s0 = spec.initial_state();
        let s1 = spec.advance(&s0, 1.0, 0.0, 1.0, 0.1, &mut rng);
        match &s1 {
            InfoState::Path(p) => {
                assert_eq!(p.values.len(), 11);
                assert_eq!(p.grid.last(), 1.0);
            }
            _ => panic!(),
        }
    }
}
