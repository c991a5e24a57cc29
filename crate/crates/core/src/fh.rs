//! Flesaker-Hughston pricing kernels `pi_t = int_t^inf rho(u) M^_tu du` built
//! from filtered Esscher martingales, and the bond prices, rates and yields
//! they imply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esscher::{MarketState, MartingaleSpec};
use crate::filter::FilterDensity;
use crate::model::{PathRng, TermStructureModel, Valuation};
use crate::quadrature::{Integrator, NodeSet, QuadratureConfig};

/// Today's discount curve `P_0t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCurve {
    /// `P_0t = exp(-r0 t)`.
    FlatContinuous { r0: f64 },
    /// Log-linear interpolation of discount factors; flat forward beyond the
    /// last knot.
    Tabulated {
        times: Vec<f64>,
        discounts: Vec<f64>,
    },
}

impl InitialCurve {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialCurve::FlatContinuous { r0 } => {
                if !(*r0 > 0.0 && r0.is_finite()) {
                    return Err(Error::CurveArbitrage { t: 0.0, rho: *r0 });
                }
            }
            InitialCurve::Tabulated { times, discounts } => {
                if times.len() < 2 || times.len() != discounts.len() {
                    return Err(Error::InvalidParameter {
                        name: "initial_curve",
                        reason: "need at least two (time, discount) pairs of equal length".into(),
                    });
                }
                if times[0] != 0.0 || discounts[0] != 1.0 {
                    return Err(Error::InvalidParameter {
                        name: "initial_curve",
                        reason: "curve must start at (0, 1)".into(),
                    });
                }
                for i in 1..times.len() {
                    if !(times[i] > times[i - 1]) {
                        return Err(Error::InvalidParameter {
                            name: "initial_curve.times",
                            reason: "must be strictly increasing".into(),
                        });
                    }
                    if !(discounts[i] < discounts[i - 1] && discounts[i] > 0.0) {
                        return Err(Error::CurveArbitrage {
                            t: times[i],
                            rho: (discounts[i - 1] - discounts[i]) / (times[i] - times[i - 1]),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn discount(&self, t: f64) -> f64 {
        match self {
            InitialCurve::FlatContinuous { r0 } => (-r0 * t).exp(),
            InitialCurve::Tabulated { times, discounts } => {
                let n = times.len();
                // segment index, extended linearly in log space at both ends
                let i = match times.iter().position(|&k| k > t) {
                    Some(0) => 0,
                    Some(i) => i - 1,
                    None => n - 2,
                };
                let (t0, t1) = (times[i], times[i + 1]);
                let (l0, l1) = (discounts[i].ln(), discounts[i + 1].ln());
                (l0 + (l1 - l0) * (t - t0) / (t1 - t0)).exp()
            }
        }
    }

    /// `rho(t) = -dP_0t/dt`.
    pub fn rho(&self, t: f64) -> Result<f64> {
        let rho = match self {
            InitialCurve::FlatContinuous { r0 } => r0 * (-r0 * t).exp(),
            InitialCurve::Tabulated { .. } => {
                let h = 1e-6 * t.max(1.0);
                (self.discount(t - h) - self.discount(t + h)) / (2.0 * h)
            }
        };
        if rho < 0.0 || !rho.is_finite() {
            return Err(Error::CurveArbitrage { t, rho });
        }
        Ok(rho)
    }

    /// Knots where `rho` has kinks.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            InitialCurve::FlatContinuous { .. } => Vec::new(),
            InitialCurve::Tabulated { times, .. } => times.clone(),
        }
    }
}

/// Free-function form of [`InitialCurve::rho`].
pub fn rho(curve: &InitialCurve, t: f64) -> Result<f64> {
    curve.rho(t)
}

/// A Flesaker-Hughston model: martingale family, initial curve and the
/// quadrature used for every maturity integral.
#[derive(Debug, Clone)]
pub struct PricingModel {
    spec: MartingaleSpec,
    curve: InitialCurve,
    integrator: Integrator,
}

/// Bond price and yield at one maturity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub maturity: f64,
    pub price: f64,
    pub yield_: f64,
}

/// Volatility structure of a bond under a Brownian driver and Brownian
/// information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolatilityStructure {
    pub theta_tt: f64,
    pub theta_t_maturity: f64,
    pub nu_tt: f64,
    pub nu_t_maturity: f64,
    /// Market prices of risk `-theta_tt` and `-nu_tt`.
    pub lambda1: f64,
    pub lambda2: f64,
}

impl VolatilityStructure {
    /// Loadings of `dP/P` on `dW` and `dZ`.
    pub fn bond_volatilities(&self) -> (f64, f64) {
        (
            self.theta_t_maturity - self.theta_tt,
            self.nu_t_maturity - self.nu_tt,
        )
    }
}

impl PricingModel {
    pub fn new(spec: MartingaleSpec, curve: InitialCurve, quad: QuadratureConfig) -> Result<Self> {
        curve.validate()?;
        let integrator = Integrator::new(quad)?;
        if curve.discount(quad.u_horizon) >= 1.0 {
            return Err(Error::CurveArbitrage {
                t: quad.u_horizon,
                rho: 0.0,
            });
        }
        // mixers were checked up to the spec's own horizon; recheck here
        for c in spec.components() {
            crate::mixer::validate_admissibility(
                &c.mixer,
                spec.prior(),
                &c.driver,
                quad.u_horizon,
            )?;
        }
        Ok(Self {
            spec,
            curve,
            integrator,
        })
    }

    pub fn spec(&self) -> &MartingaleSpec {
        &self.spec
    }

    pub fn curve(&self) -> &InitialCurve {
        &self.curve
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        self.integrator.config()
    }

    /// Same model on a refined quadrature.
    pub fn with_quadrature(&self, quad: QuadratureConfig) -> Result<Self> {
        Self::new(self.spec.clone(), self.curve.clone(), quad)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.spec.breakpoints();
        b.extend(self.curve.breakpoints());
        b
    }

    /// `int_T^inf rho(u) E[M_tu(X) g(u, X) | F_t] du`.
    fn weighted_integral(
        &self,
        state: &MarketState,
        from: f64,
        g: impl Fn(f64, f64) -> f64,
    ) -> Result<f64> {
        let f = &state.filter;
        let mut err = None;
        let value = self.integrator.integrate_semi_infinite_with(
            |u| {
                let mut acc = 0.0;
                for (&x, &w) in f.points().iter().zip(f.weights()) {
                    if w > 0.0 {
                        match self.spec.m_given_x(&state.drivers, state.t, u, x) {
                            Ok(m) => acc += w * m * g(u, x),
                            Err(e) => err = Some(e),
                        }
                    }
                }
                self.curve.rho(u).unwrap_or(f64::NAN) * acc
            },
            from,
            &self.breakpoints(),
            self.spec.width_cap(),
        )?;
        match err {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }

    pub fn pricing_kernel(&self, state: &MarketState) -> Result<f64> {
        self.valuation(state, &[]).map(|v| v.kernel)
    }

    pub fn bond_price(&self, state: &MarketState, maturity: f64) -> Result<f64> {
        self.valuation(state, &[maturity]).map(|v| v.bond(0))
    }

    pub fn short_rate(&self, state: &MarketState) -> Result<f64> {
        self.valuation(state, &[]).map(|v| v.short_rate)
    }

    pub fn forward_rate(&self, state: &MarketState, maturity: f64) -> Result<f64> {
        self.valuation(state, &[maturity]).map(|v| v.forwards[0])
    }

    pub fn yield_curve(&self, state: &MarketState, taus: &[f64]) -> Result<Vec<CurvePoint>> {
        yield_curve_of(self, state, taus)
    }

    /// `theta_tT`, `nu_tT` and the market prices of risk.
    pub fn bond_volatility_structure(
        &self,
        state: &MarketState,
        maturity: f64,
    ) -> Result<VolatilityStructure> {
        let mixer = *self.spec.brownian_mixer()?;
        if maturity < state.t {
            return Err(Error::TimeOrder(format!(
                "maturity {maturity} before {}",
                state.t
            )));
        }
        let t = state.t;
        let info = self.spec.info();
        let ell_mean = state.filter.expect(|x| info.signal(t, x).unwrap());
        let ratios = |from: f64| -> Result<(f64, f64)> {
            let d = self.weighted_integral(state, from, |_, _| 1.0)?;
            let a = self.weighted_integral(state, from, |u, x| mixer.evaluate(u, x))?;
            let b =
                self.weighted_integral(state, from, |_, x| info.signal(t, x).unwrap() - ell_mean)?;
            Ok((a / d, b / d))
        };
        let (theta_tt, nu_tt) = ratios(t)?;
        let (theta_t_maturity, nu_t_maturity) = if maturity == t {
            (theta_tt, nu_tt)
        } else {
            ratios(maturity)?
        };
        Ok(VolatilityStructure {
            theta_tt,
            theta_t_maturity,
            nu_tt,
            nu_t_maturity,
            lambda1: -theta_tt,
            lambda2: -nu_tt,
        })
    }
}

/// Yield curve points `Y = -ln P / tau` at tenors `taus` from the state's time.
pub fn yield_curve_of<M: TermStructureModel>(
    model: &M,
    state: &M::State,
    taus: &[f64],
) -> Result<Vec<CurvePoint>> {
    if let Some(bad) = taus.iter().find(|&&tau| !(tau > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "tenor",
            reason: format!("tenors must be positive, got {bad}"),
        });
    }
    let t = model.state_time(state);
    let maturities: Vec<f64> = taus.iter().map(|tau| t + tau).collect();
    let v = model.valuation(state, &maturities)?;
    Ok(taus
        .iter()
        .enumerate()
        .map(|(i, &tau)| {
            let price = v.bond(i);
            CurvePoint {
                t,
                maturity: maturities[i],
                price,
                yield_: -price.ln() / tau,
            }
        })
        .collect())
}

/// Quadrature nodes on `[t, inf)` with every requested maturity as a panel
/// edge, so that each `int_T^inf` is a suffix of one weighted sum.
#[derive(Debug, Clone)]
pub(crate) struct SuffixNodes {
    pub nodes: NodeSet,
    /// Index of the first node at or after each maturity.
    pub starts: Vec<usize>,
}

impl SuffixNodes {
    pub fn new(
        integrator: &Integrator,
        t: f64,
        maturities: &[f64],
        breakpoints: &[f64],
        cap: Option<crate::quadrature::WidthCap>,
    ) -> Result<Self> {
        let horizon = integrator.config().u_horizon;
        for &m in maturities {
            if m < t {
                return Err(Error::TimeOrder(format!(
                    "maturity {m} before valuation time {t}"
                )));
            }
            if m >= horizon {
                return Err(Error::Horizon {
                    horizon,
                    ratio: f64::INFINITY,
                });
            }
        }
        let mut bps = breakpoints.to_vec();
        bps.extend_from_slice(maturities);
        let nodes = integrator.node_set(t, &bps, cap)?;
        let starts = maturities
            .iter()
            .map(|&m| nodes.points.partition_point(|&u| u < m))
            .collect();
        Ok(Self { nodes, starts })
    }

    /// Evaluation points: nodes, then the two tail edges.
    pub fn eval_points(&self) -> Vec<f64> {
        let mut p = self.nodes.points.clone();
        p.push(self.nodes.tail_edges.0);
        p.push(self.nodes.tail_edges.1);
        p
    }

    /// Turns integrand values (nodes then tail edges, already multiplied by
    /// everything except the quadrature weight) into `(total, suffixes)`.
    pub fn integrate(&self, values: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = self.nodes.points.len();
        let mut suffix = vec![0.0; n + 1];
        for i in (0..n).rev() {
            suffix[i] = suffix[i + 1] + self.nodes.weights[i] * values[i];
        }
        let body = suffix[0];
        let tail = self.nodes.finish(body, values[n], values[n + 1])? - body;
        let total = body + tail;
        let parts = self.starts.iter().map(|&s| suffix[s] + tail).collect();
        Ok((total, parts))
    }
}

/// Precomputed exponents for valuing many states at one time.
#[derive(Debug, Clone)]
pub struct FhPlan {
    t: f64,
    maturities: Vec<f64>,
    grid: SuffixNodes,
    xs: Vec<f64>,
    /// rho at every evaluation point: nodes, tail edges, `t`, maturities.
    rho: Vec<f64>,
    /// `h_k(u_p, x_j)` flattened as `[p][j][k]`.
    h: Vec<f64>,
    /// `sum_k ln E[exp(h_k L^k_t)]` flattened as `[p][j]`.
    log_norm: Vec<f64>,
}

impl FhPlan {
    fn n_points(&self) -> usize {
        self.rho.len()
    }
}

impl PricingModel {
    pub fn plan_at(&self, t: f64, maturities: &[f64]) -> Result<FhPlan> {
        let grid = SuffixNodes::new(
            &self.integrator,
            t,
            maturities,
            &self.breakpoints(),
            self.spec.width_cap(),
        )?;
        let mut points = grid.eval_points();
        points.push(t);
        points.extend_from_slice(maturities);
        let xs = self.spec.prior_density().points().to_vec();
        let comps = self.spec.components();
        let mut h = Vec::with_capacity(points.len() * xs.len() * comps.len());
        let mut log_norm = Vec::with_capacity(points.len() * xs.len());
        let mut rho = Vec::with_capacity(points.len());
        for &u in &points {
            rho.push(self.curve.rho(u)?);
            for &x in &xs {
                let mut ln = 0.0;
                for c in comps {
                    let hk = c.mixer.evaluate(u, x);
                    ln += c.driver.log_normalizer(hk, t)?;
                    h.push(hk);
                }
                log_norm.push(ln);
            }
        }
        Ok(FhPlan {
            t,
            maturities: maturities.to_vec(),
            grid,
            xs,
            rho,
            h,
            log_norm,
        })
    }

    pub fn value_with(&self, plan: &FhPlan, state: &MarketState) -> Result<Valuation> {
        if state.t != plan.t {
            return Err(Error::TimeOrder(format!(
                "plan for t = {} used at t = {}",
                plan.t, state.t
            )));
        }
        let weights = state.filter.weights();
        debug_assert_eq!(weights.len(), plan.xs.len());
        let k = state.drivers.len();
        let nx = plan.xs.len();
        let mhat: Vec<f64> = (0..plan.n_points())
            .map(|p| {
                let mut acc = 0.0;
                for (j, &w) in weights.iter().enumerate() {
                    if w > 0.0 {
                        let base = (p * nx + j) * k;
                        let mut e = -plan.log_norm[p * nx + j];
                        for (c, l) in state.drivers.iter().enumerate() {
                            e += plan.h[base + c] * l;
                        }
                        acc += w * e.exp();
                    }
                }
                acc
            })
            .collect();
        let n_eval = plan.grid.nodes.points.len() + 2;
        let values: Vec<f64> = (0..n_eval).map(|p| plan.rho[p] * mhat[p]).collect();
        let (kernel, numerators) = plan.grid.integrate(&values)?;
        let at_t = n_eval;
        let short_rate = plan.rho[at_t] * mhat[at_t] / kernel;
        let forwards = numerators
            .iter()
            .enumerate()
            .map(|(i, n)| plan.rho[at_t + 1 + i] * mhat[at_t + 1 + i] / n)
            .collect();
        Ok(Valuation {
            t: plan.t,
            kernel,
            short_rate,
            maturities: plan.maturities.clone(),
            numerators,
            forwards,
        })
    }
}

impl TermStructureModel for PricingModel {
    type State = MarketState;
    type Plan = FhPlan;

    fn initial_state(&self) -> MarketState {
        self.spec.initial_state()
    }

    fn state_time(&self, state: &MarketState) -> f64 {
        state.t
    }

    fn filter<'a>(&self, state: &'a MarketState) -> &'a FilterDensity {
        &state.filter
    }

    fn driver_values(&self, state: &MarketState) -> Vec<f64> {
        state.drivers.clone()
    }

    fn info_value(&self, state: &MarketState) -> f64 {
        state.info.value()
    }

    fn advance(
        &self,
        state: &MarketState,
        x: f64,
        to: f64,
        dt: f64,
        rng: &mut PathRng,
    ) -> Result<MarketState> {
        self.spec.advance(state, x, to, dt, rng)
    }

    fn plan(&self, t: f64, maturities: &[f64]) -> Result<FhPlan> {
        self.plan_at(t, maturities)
    }

    fn value(&self, plan: &FhPlan, state: &MarketState) -> Result<Valuation> {
        self.value_with(plan, state)
    }
}
