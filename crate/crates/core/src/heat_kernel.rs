//! Weighted heat kernel models driven by an Ornstein-Uhlenbeck process:
//! `pi_t = int_0^inf w(t,v) E[h(t+v,X) Y_{t+v}^2 | F_t] dv`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fh::SuffixNodes;
use crate::filter::{FilterDensity, InfoSpec, InfoState};
use crate::mixer::{MixerSpec, Prior, DEFAULT_PRIOR_NODES};
use crate::model::{PathRng, TermStructureModel, Valuation};
use crate::process::OuParams;
use crate::quadrature::{Integrator, NodeSet, QuadratureConfig};

/// Weight `w(t, v)` of the heat kernel.
#[derive(Clone)]
pub enum WeightFunction {
    /// `exp(-j (t + v))`, a function of `t + v` only.
    SeparableExp {
        j: f64,
    },
    General(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFunction::SeparableExp { j } => {
                f.debug_struct("SeparableExp").field("j", j).finish()
            }
            WeightFunction::General(_) => f.write_str("General(..)"),
        }
    }
}

/// Grid on which a general weight is checked.
const WEIGHT_CHECK_GRID: [f64; 8] = [0.0, 0.25, 1.0, 2.0, 5.0, 10.0, 25.0, 60.0];

impl WeightFunction {
    pub fn general(w: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        WeightFunction::General(Arc::new(w))
    }

    #[inline]
    pub fn eval(&self, t: f64, v: f64) -> f64 {
        match self {
            WeightFunction::SeparableExp { j } => (-j * (t + v)).exp(),
            WeightFunction::General(w) => w(t, v),
        }
    }

    /// Positivity and `w(t, v - s) <= w(t - s, v)` for `s <= min(t, v)`,
    /// sampled on a grid. Returns the first violating `(t, v, s)`.
    pub fn check(&self) -> std::result::Result<(), (f64, f64, f64)> {
        for &t in &WEIGHT_CHECK_GRID {
            for &v in &WEIGHT_CHECK_GRID {
                if !(self.eval(t, v) > 0.0) {
                    return Err((t, v, 0.0));
                }
                let top = t.min(v);
                for k in 0..=8 {
                    let s = top * k as f64 / 8.0;
                    let lhs = self.eval(t, v - s);
                    let rhs = self.eval(t - s, v);
                    if lhs > rhs * (1.0 + 1e-12) {
                        return Err((t, v, s));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if let WeightFunction::SeparableExp { j } = self {
            if !(*j > 0.0 && j.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "j",
                    reason: "weight decay must be positive".into(),
                });
            }
        }
        self.check().map_err(|(t, v, s)| Error::InvalidParameter {
            name: "weight",
            reason: format!("weight inequality fails at t = {t}, v = {v}, s = {s}"),
        })
    }

    pub fn is_separable(&self) -> bool {
        matches!(self, WeightFunction::SeparableExp { .. })
    }
}

/// `E[h Y_{t+v}^2 | Y_t = y]`: `h (Var + Mean^2)` of the OU transition.
pub fn propagator_ou_quadratic(params: &OuParams, h_value: f64, y_t: f64, v: f64) -> f64 {
    let (mean, var) = params.transition_moments(y_t, v);
    h_value * (var + mean * mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatKernelState {
    pub t: f64,
    pub y: f64,
    pub info: InfoState,
    pub filter: FilterDensity,
}

/// Heat kernel model with `G(h, y) = h y^2` and an OU driver.
#[derive(Debug, Clone)]
pub struct HeatKernelModel {
    ou: OuParams,
    mixer: MixerSpec,
    prior: Prior,
    info: InfoSpec,
    weight: WeightFunction,
    integrator: Integrator,
    prior_density: FilterDensity,
}

/// Comparison of the direct kernel with its Flesaker-Hughston form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FhEquivalenceReport {
    pub t: f64,
    pub direct: f64,
    pub fh_form: f64,
    pub pi0: f64,
    pub relative_gap: f64,
    pub weight_inequality_holds: bool,
    pub passed: bool,
}

/// Step of the finite differences used for rates under a general weight.
const RATE_STEP: f64 = 1e-3;

impl HeatKernelModel {
    pub fn new(
        ou: OuParams,
        mixer: MixerSpec,
        prior: Prior,
        info: InfoSpec,
        weight: WeightFunction,
        quad: QuadratureConfig,
    ) -> Result<Self> {
        Self::with_prior_nodes(ou, mixer, prior, info, weight, quad, DEFAULT_PRIOR_NODES)
    }

    pub fn with_prior_nodes(
        ou: OuParams,
        mixer: MixerSpec,
        prior: Prior,
        info: InfoSpec,
        weight: WeightFunction,
        quad: QuadratureConfig,
        prior_nodes: usize,
    ) -> Result<Self> {
        ou.validate()?;
        mixer.validate()?;
        if !matches!(mixer, MixerSpec::OuQuadratic { .. }) {
            return Err(Error::Unsupported(
                "the heat kernel model needs the ou-quadratic mixer".into(),
            ));
        }
        prior.validate()?;
        info.validate()?;
        weight.validate()?;
        let prior_density = prior.density(prior_nodes);
        info.validate_support(prior_density.points())?;
        for &x in &prior.check_points(prior_nodes) {
            for i in 0..=200 {
                let u = quad.u_horizon * i as f64 / 200.0;
                let h = mixer.evaluate(u, x);
                if !(h >= 0.0 && h.is_finite()) {
                    return Err(Error::Inadmissible {
                        u,
                        x,
                        h,
                        constraint: "h >= 0".into(),
                    });
                }
            }
        }
        Ok(Self {
            ou,
            mixer,
            prior,
            info,
            weight,
            integrator: Integrator::new(quad)?,
            prior_density,
        })
    }

    pub fn ou(&self) -> &OuParams {
        &self.ou
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.weight
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn mixer(&self) -> &MixerSpec {
        &self.mixer
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        self.integrator.config()
    }

    pub fn with_quadrature(&self, quad: QuadratureConfig) -> Result<Self> {
        let mut m = self.clone();
        m.integrator = Integrator::new(quad)?;
        Ok(m)
    }

    /// `E[h(u, X) | F_t]`.
    fn mean_mixer(&self, filter: &FilterDensity, u: f64) -> f64 {
        filter.expect(|x| self.mixer.evaluate(u, x))
    }

    /// `int_0^inf w(t, v) E[G(h(t+v, X), Y_{t+v}) | F_t] dv`.
    pub fn pricing_kernel_whk(&self, state: &HeatKernelState) -> Result<f64> {
        self.integrator.integrate_semi_infinite(
            |v| {
                self.weight.eval(state.t, v)
                    * self.mean_mixer(&state.filter, state.t + v)
                    * propagator_ou_quadratic(&self.ou, 1.0, state.y, v)
            },
            0.0,
        )
    }

    /// `P_tT` via the propagator shifted to horizon `T + v - t`.
    pub fn bond_price_whk(&self, state: &HeatKernelState, maturity: f64) -> Result<f64> {
        self.valuation(state, &[maturity]).map(|v| v.bond(0))
    }

    pub fn short_rate_whk(&self, state: &HeatKernelState) -> Result<f64> {
        self.valuation(state, &[]).map(|v| v.short_rate)
    }

    /// `E[G(h(u, X), Y_u)]` at time zero.
    pub fn unconditional_g(&self, u: f64) -> f64 {
        self.mean_mixer(&self.prior_density, u)
            * propagator_ou_quadratic(&self.ou, 1.0, self.ou.y0, u)
    }

    /// Checks `pi_t = pi_0 int_t^inf rho_FH(u) m_tu du` with
    /// `rho_FH(u) = psi(u) E[G_u] / pi_0` and `m_tu = E[G_u | F_t] / E[G_u]`.
    pub fn fh_equivalence(&self, state: &HeatKernelState, tol: f64) -> Result<FhEquivalenceReport> {
        let WeightFunction::SeparableExp { j } = self.weight else {
            return Err(Error::Unsupported(
                "Flesaker-Hughston form needs a weight of the form psi(t + v)".into(),
            ));
        };
        let psi = |u: f64| (-j * u).exp();
        let direct = self.pricing_kernel_whk(state)?;
        let pi0 = self
            .integrator
            .integrate_semi_infinite(|u| psi(u) * self.unconditional_g(u), 0.0)?;
        let fh_form = pi0
            * self.integrator.integrate_semi_infinite(
                |u| {
                    let eg = self.unconditional_g(u);
                    if eg == 0.0 {
                        return 0.0;
                    }
                    let rho_fh = psi(u) * eg / pi0;
                    let conditional = self.mean_mixer(&state.filter, u)
                        * propagator_ou_quadratic(&self.ou, 1.0, state.y, u - state.t);
                    rho_fh * conditional / eg
                },
                state.t,
            )?;
        let relative_gap = (direct - fh_form).abs() / direct.abs();
        let weight_inequality_holds = self.weight.check().is_ok();
        Ok(FhEquivalenceReport {
            t: state.t,
            direct,
            fh_form,
            pi0,
            relative_gap,
            weight_inequality_holds,
            passed: relative_gap < tol && weight_inequality_holds,
        })
    }
}

/// Valuation data at a fixed time.
#[derive(Debug, Clone)]
pub struct HeatKernelPlan(PlanKind);

#[derive(Debug, Clone)]
enum PlanKind {
    /// Suffix sums over `u = t + v` on one node set.
    Separable {
        t: f64,
        maturities: Vec<f64>,
        grid: SuffixNodes,
        /// Per evaluation point (nodes, tail edges, `t`, maturities):
        /// `psi(u)`, OU variance and decay over `u - t`.
        psi: Vec<f64>,
        var: Vec<f64>,
        decay: Vec<f64>,
        /// `h(u_p, x_j)` as `[p][j]`.
        h: Vec<f64>,
    },
    /// One integral in `v` per maturity, including the finite-difference
    /// offsets used for rates.
    General {
        t: f64,
        maturities: Vec<f64>,
        integrals: Vec<GeneralIntegral>,
    },
}

#[derive(Debug, Clone)]
struct GeneralIntegral {
    nodes: NodeSet,
    /// `w(T, v)`, variance, decay over `T + v - t` and `h(T + v, x_j)`, per
    /// node then the two tail edges.
    w: Vec<f64>,
    var: Vec<f64>,
    decay: Vec<f64>,
    h: Vec<f64>,
}

impl HeatKernelModel {
    #[allow(clippy::too_many_arguments)]
    fn horizon_point(
        &self,
        p: &mut Vec<f64>,
        var: &mut Vec<f64>,
        decay: &mut Vec<f64>,
        h: &mut Vec<f64>,
        u: f64,
        lag: f64,
        scale: f64,
    ) {
        let (_, v) = self.ou.transition_moments(0.0, lag);
        p.push(scale);
        var.push(v);
        decay.push((-self.ou.delta * lag).exp());
        for &x in self.prior_density.points() {
            h.push(self.mixer.evaluate(u, x));
        }
    }

    pub fn plan_at(&self, t: f64, maturities: &[f64]) -> Result<HeatKernelPlan> {
        match self.weight {
            WeightFunction::SeparableExp { j } => {
                let grid = SuffixNodes::new(&self.integrator, t, maturities, &[], None)?;
                let mut points = grid.eval_points();
                points.push(t);
                points.extend_from_slice(maturities);
                let (mut psi, mut var, mut decay, mut h) = (vec![], vec![], vec![], vec![]);
                for &u in &points {
                    self.horizon_point(
                        &mut psi,
                        &mut var,
                        &mut decay,
                        &mut h,
                        u,
                        u - t,
                        (-j * u).exp(),
                    );
                }
                Ok(HeatKernelPlan(PlanKind::Separable {
                    t,
                    maturities: maturities.to_vec(),
                    grid,
                    psi,
                    var,
                    decay,
                    h,
                }))
            }
            WeightFunction::General(_) => {
                let horizon = self.integrator.config().u_horizon;
                let mut targets = vec![t, t + RATE_STEP, t + 2.0 * RATE_STEP];
                for &m in maturities {
                    if m < t {
                        return Err(Error::TimeOrder(format!(
                            "maturity {m} before valuation time {t}"
                        )));
                    }
                    targets.extend([m, m + RATE_STEP, m + 2.0 * RATE_STEP]);
                }
                let mut integrals = Vec::with_capacity(targets.len());
                for &big_t in &targets {
                    if big_t >= horizon {
                        return Err(Error::Horizon {
                            horizon,
                            ratio: f64::INFINITY,
                        });
                    }
                    let nodes = self.integrator.node_set(0.0, &[], None)?;
                    let (mut w, mut var, mut decay, mut h) = (vec![], vec![], vec![], vec![]);
                    let mut vs = nodes.points.clone();
                    vs.push(nodes.tail_edges.0);
                    vs.push(nodes.tail_edges.1);
                    for &v in &vs {
                        let scale = self.weight.eval(big_t, v);
                        self.horizon_point(
                            &mut w,
                            &mut var,
                            &mut decay,
                            &mut h,
                            big_t + v,
                            big_t + v - t,
                            scale,
                        );
                    }
                    integrals.push(GeneralIntegral {
                        nodes,
                        w,
                        var,
                        decay,
                        h,
                    });
                }
                Ok(HeatKernelPlan(PlanKind::General {
                    t,
                    maturities: maturities.to_vec(),
                    integrals,
                }))
            }
        }
    }

    /// Integrand values `scale * E[h | F_t] * (var + mean^2)` at every point.
    fn integrand(
        &self,
        state: &HeatKernelState,
        scale: &[f64],
        var: &[f64],
        decay: &[f64],
        h: &[f64],
    ) -> Vec<f64> {
        let weights = state.filter.weights();
        let nx = weights.len();
        let beta = self.ou.beta;
        (0..scale.len())
            .map(|p| {
                let hbar: f64 = weights
                    .iter()
                    .zip(&h[p * nx..(p + 1) * nx])
                    .map(|(w, hv)| w * hv)
                    .sum();
                let mean = state.y * decay[p] + beta * (1.0 - decay[p]);
                scale[p] * hbar * (var[p] + mean * mean)
            })
            .collect()
    }

    pub fn value_with(&self, plan: &HeatKernelPlan, state: &HeatKernelState) -> Result<Valuation> {
        match &plan.0 {
            PlanKind::Separable {
                t,
                maturities,
                grid,
                psi,
                var,
                decay,
                h,
            } => {
                check_time(*t, state.t)?;
                let g = self.integrand(state, psi, var, decay, h);
                let n_eval = grid.nodes.points.len() + 2;
                let (kernel, numerators) = grid.integrate(&g[..n_eval])?;
                let short_rate = g[n_eval] / kernel;
                let forwards = numerators
                    .iter()
                    .enumerate()
                    .map(|(i, n)| g[n_eval + 1 + i] / n)
                    .collect();
                Ok(Valuation {
                    t: *t,
                    kernel,
                    short_rate,
                    maturities: maturities.clone(),
                    numerators,
                    forwards,
                })
            }
            PlanKind::General {
                t,
                maturities,
                integrals,
            } => {
                check_time(*t, state.t)?;
                let values = integrals
                    .iter()
                    .map(|gi| {
                        let g = self.integrand(state, &gi.w, &gi.var, &gi.decay, &gi.h);
                        let n = gi.nodes.points.len();
                        let body: f64 = gi
                            .nodes
                            .weights
                            .iter()
                            .zip(&g[..n])
                            .map(|(w, v)| w * v)
                            .sum();
                        gi.nodes.finish(body, g[n], g[n + 1])
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let kernel = values[0];
                let slope = |k: usize| {
                    let (a, b, c) = (values[k].ln(), values[k + 1].ln(), values[k + 2].ln());
                    -(-3.0 * a + 4.0 * b - c) / (2.0 * RATE_STEP)
                };
                let short_rate = slope(0);
                let numerators = (0..maturities.len()).map(|i| values[3 + 3 * i]).collect();
                let forwards = (0..maturities.len()).map(|i| slope(3 + 3 * i)).collect();
                Ok(Valuation {
                    t: *t,
                    kernel,
                    short_rate,
                    maturities: maturities.clone(),
                    numerators,
                    forwards,
                })
            }
        }
    }
}

fn check_time(plan_t: f64, t: f64) -> Result<()> {
    if plan_t == t {
        Ok(())
    } else {
        Err(Error::TimeOrder(format!(
            "plan for t = {plan_t} used at t = {t}"
        )))
    }
}

impl TermStructureModel for HeatKernelModel {
    type State = HeatKernelState;
    type Plan = HeatKernelPlan;

    fn initial_state(&self) -> HeatKernelState {
        HeatKernelState {
            t: 0.0,
            y: self.ou.y0,
            info: self.info.initial_state(),
            filter: self.prior_density.clone(),
        }
    }

    fn state_time(&self, state: &HeatKernelState) -> f64 {
        state.t
    }

    fn filter<'a>(&self, state: &'a HeatKernelState) -> &'a FilterDensity {
        &state.filter
    }

    fn driver_values(&self, state: &HeatKernelState) -> Vec<f64> {
        vec![state.y]
    }

    fn info_value(&self, state: &HeatKernelState) -> f64 {
        state.info.value()
    }

    fn advance(
        &self,
        state: &HeatKernelState,
        x: f64,
        to: f64,
        dt: f64,
        rng: &mut PathRng,
    ) -> Result<HeatKernelState> {
        if to < state.t {
            return Err(Error::TimeOrder(format!(
                "cannot move from {} back to {to}",
                state.t
            )));
        }
        if to == state.t {
            return Ok(state.clone());
        }
        let y = self
            .ou
            .sample_transition(state.y, to - state.t, &mut rng.driver);
        let info = self
            .info
            .advance(&state.info, x, state.t, to, dt, &mut rng.info);
        let filter = self.info.posterior(&self.prior_density, &info, to)?;
        Ok(HeatKernelState {
            t: to,
            y,
            info,
            filter,
        })
    }

    fn plan(&self, t: f64, maturities: &[f64]) -> Result<HeatKernelPlan> {
        self.plan_at(t, maturities)
    }

    fn value(&self, plan: &HeatKernelPlan, state: &HeatKernelState) -> Result<Valuation> {
        self.value_with(plan, state)
    }
}
