//! Interest rate models built from randomised mixtures of Lévy processes
//! observed through noisy information.
//!
//! The hidden variable `X` selects how the drivers are mixed at each
//! maturity. Market participants only see the drivers and an information
//! process, so prices depend on the posterior of `X`. Two families of
//! positive-rate pricing kernels are provided:
//!
//! * [`PricingModel`]: Flesaker-Hughston kernels `int_t^inf rho(u) M^_tu du`
//!   from filtered Esscher martingales.
//! * [`HeatKernelModel`]: weighted heat kernels over an Ornstein-Uhlenbeck
//!   driver.
//!
//! Both implement [`TermStructureModel`], which drives path simulation and
//! Monte Carlo option pricing.

// Guards such as `!(x > 0.0)` are written that way so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod esscher;
pub mod fh;
pub mod filter;
pub mod heat_kernel;
pub mod mixer;
pub mod model;
pub mod option;
pub mod process;
pub mod quadrature;
pub mod stats;

pub use error::{Error, Result};
pub use esscher::{m_tu, Component, MarketState, MartingaleSpec};
pub use fh::{
    rho, yield_curve_of, CurvePoint, FhPlan, InitialCurve, PricingModel, VolatilityStructure,
};
pub use filter::{
    posterior_brownian_general, posterior_brownian_linear, posterior_gamma_info,
    simulate_information, FilterDensity, InfoSpec, InfoState, Signal,
};
pub use heat_kernel::{
    propagator_ou_quadratic, FhEquivalenceReport, HeatKernelModel, HeatKernelPlan, HeatKernelState,
    WeightFunction,
};
pub use mixer::{validate_admissibility, MixerSpec, Prior, DEFAULT_PRIOR_NODES};
pub use model::{
    sample_states, simulate_path, simulate_paths, value_states, PathRng, StatePath,
    TermStructureModel, Valuation,
};
pub use option::{
    mc_bond_call, option_surface, simulate_deflated_bonds, OptionQuote, OptionSpec, SurfacePoint,
};
pub use process::{
    esscher_normalizer, ou_conditional_moments, simulate_brownian, simulate_compound_poisson,
    simulate_gamma, simulate_ou, simulate_vg, CompoundPoissonParams, Driver, GammaParams, JumpLaw,
    OuParams, RngStream, SamplePath, TimeGrid, VgParams,
};
pub use quadrature::{
    expectation_over_prior, integrate_semi_infinite, GaussLegendre, Integrator, QuadratureConfig,
};
pub use stats::{pairwise_sum, Summary};
