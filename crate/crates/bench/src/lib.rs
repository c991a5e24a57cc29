//! Model fixtures shared by the benchmarks.

use randmix_core::{
    Component, Driver, HeatKernelModel, InfoSpec, InitialCurve, MartingaleSpec, MixerSpec,
    OuParams, PricingModel, Prior, QuadratureConfig, WeightFunction,
};

const FLAT: InitialCurve = InitialCurve::FlatContinuous { r0: 0.04 };

fn esscher(driver: Driver, mixer: MixerSpec, prior: Prior) -> PricingModel {
    let spec = MartingaleSpec::new(
        vec![Component { driver, mixer }],
        prior,
        InfoSpec::BrownianLinear { sigma: 0.1 },
        200.0,
    )
    .expect("admissible fixture");
    PricingModel::new(spec, FLAT, QuadratureConfig::default()).expect("valid fixture")
}

/// Binary gamma model with a 50/50 prior.
pub fn binary_gamma() -> PricingModel {
    esscher(
        Driver::Gamma { m: 0.5, kappa: 0.5 },
        MixerSpec::BinaryExpDecay { c: -2.0, b: 0.03 },
        Prior::binary(0.5).unwrap(),
    )
}

/// Brownian driver with a continuous uniform prior.
pub fn brownian_uniform() -> PricingModel {
    esscher(
        Driver::Brownian,
        MixerSpec::ExpDecay { c: 0.5 },
        Prior::uniform(0.0, 0.1).unwrap(),
    )
}

/// Chameleon mixer with a fast sine, the most panel-hungry configuration.
pub fn chameleon() -> PricingModel {
    esscher(
        Driver::Gamma { m: 0.5, kappa: 0.5 },
        MixerSpec::Chameleon {
            c1: 0.35,
            alpha1: 3.0,
            c2: 1.0,
            alpha2: 0.03,
        },
        Prior::discrete(vec![2.0, 5.0, 10.0, 20.0], vec![0.15, 0.35, 0.35, 0.15]).unwrap(),
    )
}

pub fn heat_kernel() -> HeatKernelModel {
    HeatKernelModel::new(
        OuParams::new(0.02, 0.5, 0.2, 1.0).unwrap(),
        MixerSpec::OuQuadratic { c1: 0.02, c2: 0.1 },
        Prior::discrete(vec![1.0, 2.0], vec![0.3, 0.7]).unwrap(),
        InfoSpec::BrownianLinear { sigma: 0.1 },
        WeightFunction::SeparableExp { j: 0.04 },
        QuadratureConfig::default(),
    )
    .expect("valid fixture")
}

/// Tenors of a typical yield curve.
pub const TENORS: [f64; 12] = [
    0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 25.0, 30.0,
];
