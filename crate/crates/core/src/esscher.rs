//! Randomised Esscher martingales `M_tu(X) = exp(h(u,X) L_t) / E[exp(h(u,X) L_t) | X]`
//! and their projections onto the market filtration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{FilterDensity, InfoSpec, InfoState, Signal};
use crate::mixer::{validate_admissibility, MixerSpec, Prior, DEFAULT_PRIOR_NODES};
use crate::model::PathRng;
use crate::process::Driver;

/// One independent driver and the mixer that tilts it. Several components
/// multiply, e.g. a gamma process for small jumps with a compound Poisson
/// process for rare large ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub driver: Driver,
    pub mixer: MixerSpec,
}

/// `exp(h L_t) / E[exp(h L_t)]` for a single driver.
pub fn m_tu(driver: &Driver, h: f64, driver_value: f64, t: f64) -> Result<f64> {
    let log_n = driver.log_normalizer(h, t)?;
    Ok((h * driver_value - log_n).exp())
}

/// Drivers, mixers, prior and information defining a family of filtered
/// Esscher martingales.
#[derive(Debug, Clone)]
pub struct MartingaleSpec {
    components: Vec<Component>,
    prior: Prior,
    info: InfoSpec,
    prior_density: FilterDensity,
}

/// State of the market at time `t`: driver values, observed information and
/// the posterior it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    pub t: f64,
    pub drivers: Vec<f64>,
    pub info: InfoState,
    pub filter: FilterDensity,
}

impl MartingaleSpec {
    /// Validates the mixers against each driver on `[0, horizon]`.
    pub fn new(
        components: Vec<Component>,
        prior: Prior,
        info: InfoSpec,
        horizon: f64,
    ) -> Result<Self> {
        Self::with_prior_nodes(components, prior, info, horizon, DEFAULT_PRIOR_NODES)
    }

    pub fn with_prior_nodes(
        components: Vec<Component>,
        prior: Prior,
        info: InfoSpec,
        horizon: f64,
        prior_nodes: usize,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Unsupported(
                "at least one driver component is required".into(),
            ));
        }
        if prior_nodes == 0 {
            return Err(Error::InvalidPrior("prior_nodes must be positive".into()));
        }
        for c in &components {
            validate_admissibility(&c.mixer, &prior, &c.driver, horizon)?;
        }
        info.validate()?;
        let prior_density = prior.density(prior_nodes);
        info.validate_support(prior_density.points())?;
        info.validate_support(&prior.check_points(prior_nodes))?;
        Ok(Self {
            components,
            prior,
            info,
            prior_density,
        })
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn info(&self) -> &InfoSpec {
        &self.info
    }

    pub fn prior_density(&self) -> &FilterDensity {
        &self.prior_density
    }

    /// Mixer breakpoints over the discretised support.
    pub fn breakpoints(&self) -> Vec<f64> {
        let xs = self.prior_density.points();
        self.components
            .iter()
            .flat_map(|c| c.mixer.breakpoints(xs))
            .collect()
    }

    pub fn width_cap(&self) -> Option<crate::quadrature::WidthCap> {
        let xs = self.prior_density.points();
        self.components
            .iter()
            .filter_map(|c| c.mixer.width_cap(xs))
            .reduce(|a, b| crate::quadrature::WidthCap {
                until: a.until.max(b.until),
                max_width: a.max_width.min(b.max_width),
            })
    }

    pub fn initial_state(&self) -> MarketState {
        MarketState {
            t: 0.0,
            drivers: vec![0.0; self.components.len()],
            info: self.info.initial_state(),
            filter: self.prior_density.clone(),
        }
    }

    /// `ln M_tu(x)` summed over components.
    pub fn log_m_given_x(&self, drivers: &[f64], t: f64, u: f64, x: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (c, l) in self.components.iter().zip(drivers) {
            let h = c.mixer.evaluate(u, x);
            acc += h * l - c.driver.log_normalizer(h, t)?;
        }
        Ok(acc)
    }

    pub fn m_given_x(&self, drivers: &[f64], t: f64, u: f64, x: f64) -> Result<f64> {
        self.log_m_given_x(drivers, t, u, x).map(f64::exp)
    }

    /// `M^_tu = sum_x f_t(x) M_tu(x)`.
    pub fn filtered_m_tu(&self, state: &MarketState, u: f64) -> Result<f64> {
        check_order(state.t, u)?;
        let mut acc = 0.0;
        for (&x, &w) in state.filter.points().iter().zip(state.filter.weights()) {
            if w > 0.0 {
                acc += w * self.m_given_x(&state.drivers, state.t, u, x)?;
            }
        }
        Ok(acc)
    }

    /// Coefficients of `dW` and `dZ` in `dM^_tu`: `E[M h | F_t]` and
    /// `E[M V | F_t]` with `V_t(x) = l(t,x) - E[l(t,X) | F_t]`.
    pub fn filtered_dynamics_coefficients(
        &self,
        state: &MarketState,
        u: f64,
    ) -> Result<(f64, f64)> {
        let mixer = self.brownian_mixer()?;
        check_order(state.t, u)?;
        let f = &state.filter;
        let ell_mean = f.expect(|x| self.info.signal(state.t, x).unwrap());
        let (mut a, mut b) = (0.0, 0.0);
        for (&x, &w) in f.points().iter().zip(f.weights()) {
            if w > 0.0 {
                let m = self.m_given_x(&state.drivers, state.t, u, x)?;
                a += w * m * mixer.evaluate(u, x);
                b += w * m * (self.info.signal(state.t, x).unwrap() - ell_mean);
            }
        }
        Ok((a, b))
    }

    /// The mixer of a single Brownian driver observed through Brownian
    /// information; the only setting with innovations diagnostics.
    pub(crate) fn brownian_mixer(&self) -> Result<&MixerSpec> {
        match (self.components.as_slice(), &self.info) {
            (
                [Component {
                    driver: Driver::Brownian,
                    mixer,
                }],
                InfoSpec::BrownianLinear { .. } | InfoSpec::BrownianGeneral { .. },
            ) => Ok(mixer),
            _ => Err(Error::Unsupported(
                "volatility diagnostics need one Brownian driver and Brownian information".into(),
            )),
        }
    }

    /// Exact one-step transition from `state` to time `to` given `X = x`.
    pub fn advance(
        &self,
        state: &MarketState,
        x: f64,
        to: f64,
        dt: f64,
        rng: &mut PathRng,
    ) -> Result<MarketState> {
        if to < state.t {
            return Err(Error::TimeOrder(format!(
                "cannot move from {} back to {to}",
                state.t
            )));
        }
        if to == state.t {
            return Ok(state.clone());
        }
        let h = to - state.t;
        let drivers = self
            .components
            .iter()
            .zip(&state.drivers)
            .map(|(c, l)| l + c.driver.sample_increment(h, &mut rng.driver))
            .collect();
        let info = self
            .info
            .advance(&state.info, x, state.t, to, dt, &mut rng.info);
        let filter = self.info.posterior(&self.prior_density, &info, to)?;
        Ok(MarketState {
            t: to,
            drivers,
            info,
            filter,
        })
    }

    /// Signal of the information process, if Brownian.
    pub fn signal(&self) -> Option<Signal> {
        match &self.info {
            InfoSpec::BrownianLinear { sigma } => Some(Signal::Linear { sigma: *sigma }),
            InfoSpec::BrownianGeneral { signal } => Some(signal.clone()),
            InfoSpec::GammaNoise { .. } => None,
        }
    }
}

fn check_order(t: f64, u: f64) -> Result<()> {
    if u < t {
        Err(Error::TimeOrder(format!(
            "maturity {u} before valuation time {t}"
        )))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{JumpLaw, RngStream};
    use crate::stats::Summary;
    use rand_distr::{Distribution, StandardNormal};

    fn binary_gamma(p1: f64, c: f64, b: f64) -> MartingaleSpec {
        MartingaleSpec::new(
            vec![Component {
                driver: Driver::Gamma { m: 0.5, kappa: 0.5 },
                mixer: MixerSpec::BinaryExpDecay { c, b },
            }],
            Prior::binary(p1).unwrap(),
            InfoSpec::BrownianLinear { sigma: 0.1 },
            200.0,
        )
        .unwrap()
    }

    #[test]
    fn single_driver_values() {
        let d = Driver::Brownian;
        assert!((m_tu(&d, 0.5, 1.0, 1.0).unwrap() - 0.375f64.exp()).abs() < 1e-15);
        assert!((m_tu(&d, 0.5, 1.0, 1.0).unwrap() - 1.4550).abs() < 1e-4);
        for d in [
            Driver::Brownian,
            Driver::Gamma { m: 0.5, kappa: 0.5 },
            Driver::VarianceGamma {
                theta: -1.5,
                sigma: 2.0,
                nu: 0.25,
            },
        ] {
            assert_eq!(m_tu(&d, 0.3, 0.0, 0.0).unwrap(), 1.0);
            assert_eq!(m_tu(&d, 0.0, 2.7, 3.0).unwrap(), 1.0);
        }
        assert!(m_tu(&Driver::Gamma { m: 0.5, kappa: 0.5 }, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn time_zero_and_binary_closed_form() {
        let spec = binary_gamma(0.65, -2.0, 0.03);
        let s0 = spec.initial_state();
        for u in [0.0, 1.0, 7.0] {
            assert_eq!(spec.filtered_m_tu(&s0, u).unwrap(), 1.0);
        }
        let mut rng = PathRng::new(RngStream::new(5, 0));
        let s = spec.advance(&s0, 1.0, 3.0, 0.01, &mut rng).unwrap();
        let (g, t) = (s.drivers[0], s.t);
        for u in [3.0f64, 4.5, 20.0] {
            let h0 = -2.0 * (-0.03 * u).exp();
            let closed = s.filter.mass_at(0.0) * (1.0 - 0.5 * h0).powf(0.5 * t) * (h0 * g).exp()
                + s.filter.mass_at(1.0) * (1.0 + 1.0f64).powf(0.5 * t) * (-2.0 * g).exp();
            let generic = spec.filtered_m_tu(&s, u).unwrap();
            assert!(
                (closed - generic).abs() < 1e-12 * closed.max(1.0),
                "{closed} {generic}"
            );
        }
        // certain x = 1: u-independent
        let sure = binary_gamma(1.0, -2.0, 0.03);
        let mut rng = PathRng::new(RngStream::new(6, 0));
        let s = sure
            .advance(&sure.initial_state(), 1.0, 2.0, 0.01, &mut rng)
            .unwrap();
        let a = sure.filtered_m_tu(&s, 2.0).unwrap();
        let b = sure.filtered_m_tu(&s, 50.0).unwrap();
        assert_eq!(a, b);
        assert!((a - 2.0f64.powf(1.0) * (-2.0 * s.drivers[0]).exp()).abs() < 1e-12 * a);
        assert!(sure.filtered_m_tu(&s, 1.0).is_err());
    }

    fn martingale_mean(spec: &MartingaleSpec, t: f64, u: f64, n: usize, seed: u64) -> Summary {
        let s0 = spec.initial_state();
        Summary::from_iter((0..n).map(|i| {
            let mut rng = PathRng::new(RngStream::new(seed, 0).child(i as u64));
            let x = s0.filter.sample(&mut rng.hidden);
            let s = spec.advance(&s0, x, t, 0.01, &mut rng).unwrap();
            spec.filtered_m_tu(&s, u).unwrap()
        }))
    }

    #[test]
    fn filtered_martingale_has_unit_mean() {
        let spec = binary_gamma(0.65, -2.0, 0.03);
        for t in [1.0, 4.0] {
            let s = martingale_mean(&spec, t, 5.0, 10_000, 11);
            assert!(s.within(1.0, 3.0), "t={t} {s:?}");
        }
        let cpg = MartingaleSpec::new(
            vec![
                Component {
                    driver: Driver::Gamma { m: 0.5, kappa: 0.5 },
                    mixer: MixerSpec::BinaryExpDecay { c: -1.0, b: 0.03 },
                },
                Component {
                    driver: Driver::CompoundPoisson {
                        lambda: 0.5,
                        jump: JumpLaw::Gaussian {
                            mean: 0.2,
                            std_dev: 0.3,
                        },
                    },
                    mixer: MixerSpec::BinaryExpDecay { c: 0.5, b: 0.05 },
                },
            ],
            Prior::binary(0.5).unwrap(),
            InfoSpec::BrownianLinear { sigma: 0.1 },
            200.0,
        )
        .unwrap();
        let s = martingale_mean(&cpg, 4.0, 5.0, 10_000, 12);
        assert!(s.within(1.0, 3.0), "{s:?}");
        assert!(s.mean > 0.0);
    }

    #[test]
    fn dynamics_coefficients() {
        let zero = MartingaleSpec::new(
            vec![Component {
                driver: Driver::Brownian,
                mixer: MixerSpec::ExpDecay { c: 0.0 },
            }],
            Prior::binary(0.4).unwrap(),
            InfoSpec::BrownianLinear { sigma: 0.3 },
            200.0,
        )
        .unwrap();
        let mut rng = PathRng::new(RngStream::new(1, 0));
        let s = zero
            .advance(&zero.initial_state(), 1.0, 2.0, 0.01, &mut rng)
            .unwrap();
        let (a, b) = zero.filtered_dynamics_coefficients(&s, 3.0).unwrap();
        assert_eq!(a, 0.0);
        assert!(b.abs() < 1e-15);

        let spec = MartingaleSpec::new(
            vec![Component {
                driver: Driver::Brownian,
                mixer: MixerSpec::BinaryExpDecay { c: 0.5, b: 0.2 },
            }],
            Prior::binary(0.4).unwrap(),
            InfoSpec::BrownianLinear { sigma: 0.3 },
            200.0,
        )
        .unwrap();
        let s0 = spec.initial_state();
        let (a, _) = spec.filtered_dynamics_coefficients(&s0, 3.0).unwrap();
        let expect = 0.6 * 0.5 * (-0.6f64).exp() + 0.4 * 0.5;
        assert!((a - expect).abs() < 1e-15);
        assert!(binary_gamma(0.5, 1.0, 0.1)
            .filtered_dynamics_coefficients(&s0, 1.0)
            .is_err());
    }

    /// Regresses one-step increments of `M^` on `(dW, dZ)`.
    #[test]
    fn dynamics_coefficients_match_regression() {
        let sigma = 1.0;
        let spec = MartingaleSpec::new(
            vec![Component {
                driver: Driver::Brownian,
                mixer: MixerSpec::BinaryExpDecay { c: 0.8, b: 0.2 },
            }],
            Prior::binary(0.5).unwrap(),
            InfoSpec::BrownianLinear { sigma },
            200.0,
        )
        .unwrap();
        let mut rng = PathRng::new(RngStream::new(77, 0));
        let s = spec
            .advance(&spec.initial_state(), 1.0, 1.0, 0.01, &mut rng)
            .unwrap();
        let u = 4.0;
        let (ca, cb) = spec.filtered_dynamics_coefficients(&s, u).unwrap();
        let m0 = spec.filtered_m_tu(&s, u).unwrap();
        let dt: f64 = 1e-3;
        let n = 10_000u64;
        let ell_mean = s.filter.expect(|x| sigma * x);
        let mut rows = Vec::with_capacity(n as usize);
        for i in 0..n {
            let mut r = RngStream::new(78, 0).child(i).rng();
            let x = s.filter.sample(&mut r);
            let z1: f64 = StandardNormal.sample(&mut r);
            let z2: f64 = StandardNormal.sample(&mut r);
            let dw = dt.sqrt() * z1;
            let db = dt.sqrt() * z2;
            let di = sigma * x * dt + db;
            let next_i = s.info.value() + di;
            let filter = spec
                .info
                .posterior(spec.prior_density(), &InfoState::Value(next_i), s.t + dt)
                .unwrap();
            let next = MarketState {
                t: s.t + dt,
                drivers: vec![s.drivers[0] + dw],
                info: InfoState::Value(next_i),
                filter,
            };
            let dm = spec.filtered_m_tu(&next, u).unwrap() - m0;
            rows.push((dw, di - ell_mean * dt, dm));
        }
        // least squares without intercept on two regressors
        let (mut sww, mut swz, mut szz, mut swy, mut szy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (w, z, y) in &rows {
            sww += w * w;
            swz += w * z;
            szz += z * z;
            swy += w * y;
            szy += z * y;
        }
        let det = sww * szz - swz * swz;
        let beta_w = (szz * swy - swz * szy) / det;
        let beta_z = (sww * szy - swz * swy) / det;
        assert!((beta_w / ca - 1.0).abs() < 0.1, "{beta_w} vs {ca}");
        assert!((beta_z / cb - 1.0).abs() < 0.1, "{beta_z} vs {cb}");
    }
}
