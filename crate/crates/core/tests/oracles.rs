//! Closed-form and Monte Carlo oracles through the public API.

use randmix_core::*;

fn brownian_model(prior: Prior) -> PricingModel {
    let spec = MartingaleSpec::new(
        vec![Component {
            driver: Driver::Brownian,
            mixer: MixerSpec::ExpDecay { c: 0.5 },
        }],
        prior,
        InfoSpec::BrownianLinear { sigma: 0.1 },
        200.0,
    )
    .unwrap();
    PricingModel::new(
        spec,
        InitialCurve::FlatContinuous { r0: 0.04 },
        QuadratureConfig::default(),
    )
    .unwrap()
}

fn binary_gamma(p1: f64, c: f64, b: f64) -> PricingModel {
    let spec = MartingaleSpec::new(
        vec![Component {
            driver: Driver::Gamma { m: 0.5, kappa: 0.5 },
            mixer: MixerSpec::BinaryExpDecay { c, b },
        }],
        Prior::binary(p1).unwrap(),
        InfoSpec::BrownianLinear { sigma: 0.1 },
        200.0,
    )
    .unwrap();
    PricingModel::new(
        spec,
        InitialCurve::FlatContinuous { r0: 0.04 },
        QuadratureConfig::default(),
    )
    .unwrap()
}

#[test]
fn bond_at_time_zero_is_the_input_curve() {
    let m = brownian_model(Prior::uniform(0.0, 0.1).unwrap());
    let s0 = m.initial_state();
    let p = m.bond_price(&s0, 5.0).unwrap();
    assert!((p - 0.81873).abs() < 1e-5, "{p}");
    assert!((p - (-0.2f64).exp()).abs() < 1e-8);
    assert!((m.short_rate(&s0).unwrap() - 0.04).abs() < 1e-8);
    assert_eq!(m.bond_price(&s0, 0.0).unwrap(), 1.0);
    for point in m.yield_curve(&s0, &[0.5, 1.0, 10.0, 30.0]).unwrap() {
        assert!((point.yield_ - 0.04).abs() < 1e-8);
    }
}

#[test]
fn ou_moments_at_horizon_ten() {
    let ou = OuParams::new(0.02, 0.5, 0.2, 1.0).unwrap();
    let (mean, var) = ou_conditional_moments(&ou, 1.0, 0.0, 10.0).unwrap();
    assert!((mean - 0.9094).abs() < 5e-5, "{mean}");
    assert!((var - 0.3297).abs() < 5e-5, "{var}");
    assert_eq!(
        ou_conditional_moments(&ou, 1.3, 4.0, 4.0).unwrap(),
        (1.3, 0.0)
    );
    let (m_inf, v_inf) = ou_conditional_moments(&ou, 1.0, 0.0, 5000.0).unwrap();
    assert!((m_inf - 0.5).abs() < 1e-12 && (v_inf - 1.0).abs() < 1e-12);
}

#[test]
fn brownian_esscher_martingale_value() {
    let v = m_tu(&Driver::Brownian, 0.5, 1.0, 1.0).unwrap();
    assert!((v - 0.375f64.exp()).abs() < 1e-12);
    assert!((v - 1.4550).abs() < 5e-5);
    assert_eq!(
        m_tu(&Driver::Gamma { m: 0.5, kappa: 0.5 }, 0.0, 3.0, 2.0).unwrap(),
        1.0
    );
}

#[test]
fn esscher_normalizers() {
    let g = esscher_normalizer(&Driver::Gamma { m: 0.5, kappa: 0.5 }, 1.0, 2.0).unwrap();
    assert!((g - 2.0).abs() < 1e-12);
    let vg = Driver::VarianceGamma {
        theta: -1.5,
        sigma: 2.0,
        nu: 0.25,
    };
    let v = esscher_normalizer(&vg, 0.1, 1.0).unwrap();
    assert!((v - 1.0325f64.powf(-4.0)).abs() < 1e-12, "{v}");
    assert!(esscher_normalizer(&Driver::Gamma { m: 0.5, kappa: 0.5 }, 2.0, 1.0).is_err());
}

#[test]
fn quadrature_examples() {
    let cfg = QuadratureConfig::default();
    let a = integrate_semi_infinite(|u| 0.04 * (-0.04 * u).exp(), 0.0, &cfg).unwrap();
    assert!((a - 1.0).abs() < 1e-8, "{a}");
    let b = integrate_semi_infinite(|u| (-u).exp(), 2.0, &cfg).unwrap();
    assert!((b / (-2.0f64).exp() - 1.0).abs() < 1e-8);

    let uniform = Prior::uniform(0.0, 0.1)
        .unwrap()
        .density(DEFAULT_PRIOR_NODES);
    assert!((expectation_over_prior(|x| x, &uniform) - 0.05).abs() < 1e-12);
    assert!((expectation_over_prior(|_| 1.0, &uniform) - 1.0).abs() < 1e-12);
    let binary = Prior::binary(0.65).unwrap().density(2);
    assert!((expectation_over_prior(|x| x, &binary) - 0.65).abs() < 1e-15);
}

#[test]
fn mixer_values() {
    assert_eq!(MixerSpec::ExpDecay { c: 0.5 }.evaluate(0.0, 7.0), 0.5);
    assert_eq!(
        MixerSpec::BinaryExpDecay { c: -2.0, b: 0.03 }.evaluate(13.0, 1.0),
        -2.0
    );
    let cham = MixerSpec::Chameleon {
        c1: 0.2625,
        alpha1: 0.75,
        c2: 0.75,
        alpha2: 0.02,
    };
    assert!((cham.evaluate(3.0, 5.0) - 0.2042).abs() < 5e-5);
}

#[test]
fn bayes_posteriors() {
    let binary = Prior::binary(0.5).unwrap().density(2);
    let f = posterior_brownian_linear(&binary, 0.1, 2.0, 1.0).unwrap();
    assert!((f.mass_at(1.0) - 0.5486).abs() < 5e-5);
    let pair = Prior::discrete(vec![1.0, 2.0], vec![0.5, 0.5])
        .unwrap()
        .density(2);
    let g = posterior_gamma_info(&pair, 1.0, 1.0, 2.0, 1.0).unwrap();
    assert!((g.mass_at(1.0) - 0.4239).abs() < 5e-5);
}

#[test]
fn certain_binary_prior_gives_flat_deterministic_curve() {
    let m = binary_gamma(1.0, -2.0, 0.03);
    for s in sample_states(&m, 3.0, 0.01, 5, RngStream::new(3, 0)).unwrap() {
        let v = m.valuation(&s, &[4.0, 13.0]).unwrap();
        assert!((v.short_rate - 0.04).abs() < 1e-10);
        assert!((v.bond(1) - (-0.4f64).exp()).abs() < 1e-10);
    }
}

#[test]
fn posterior_is_a_martingale() {
    let prior = Prior::binary(0.3).unwrap();
    let density = prior.density(2);
    let info = InfoSpec::BrownianLinear { sigma: 0.5 };
    let grid = TimeGrid::new(vec![0.0, 2.0]).unwrap();
    let stream = RngStream::new(11, 0);
    let weights: Vec<f64> = (0..10_000u64)
        .map(|i| {
            let mut rng = stream.child(i).rng();
            let x = prior.sample(&mut rng);
            let path = simulate_information(&info, x, &grid, &mut rng);
            posterior_brownian_linear(&density, 0.5, path.values[1], 2.0)
                .unwrap()
                .mass_at(1.0)
        })
        .collect();
    assert!(Summary::from_slice(&weights).within(0.3, 3.0));
}

#[test]
fn driver_moments() {
    let grid = TimeGrid::new(vec![0.0, 4.0]).unwrap();
    let n = 100_000u64;
    let stream = RngStream::new(5, 0);
    let gamma = GammaParams::new(0.5, 0.5).unwrap();
    let g = Summary::from_iter(
        (0..n).map(|i| simulate_gamma(&gamma, &grid, &mut stream.child(i).rng()).values[1]),
    );
    assert!(g.within(1.0, 3.0), "{g:?}");
    assert!((g.variance / 0.5 - 1.0).abs() < 0.05);

    let vg = VgParams::new(-1.5, 2.0, 0.25).unwrap();
    let grid2 = TimeGrid::new(vec![0.0, 2.0]).unwrap();
    let v = Summary::from_iter(
        (0..n).map(|i| simulate_vg(&vg, &grid2, &mut stream.child(n + i).rng()).values[1]),
    );
    assert!(v.within(-3.0, 3.0), "{v:?}");
    assert!((v.variance / 9.125 - 1.0).abs() < 0.05);
}
