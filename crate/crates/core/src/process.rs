//! Driver processes: Brownian motion, gamma, compound Poisson, variance gamma
//! and Ornstein-Uhlenbeck, all sampled from their exact transition laws.
//!
//! Every Lévy driver starts at zero. The closed-form Esscher normalizers
//! `E[exp(h L_t)]` live next to the samplers so that the admissible exponent
//! domain is defined in exactly one place.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};

/// Strictly increasing observation times starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidGrid(format!(
                "grid must start at 0, got {}",
                times[0]
            )));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "times must be finite and strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { times })
    }

    /// Uniform grid `0, dt, 2dt, ...` ending exactly at `horizon` (the last
    /// step is shortened when `horizon` is not a multiple of `dt`).
    pub fn uniform(horizon: f64, dt: f64) -> Result<Self> {
        require(dt > 0.0 && dt.is_finite(), "dt", "must be positive")?;
        require(
            horizon >= 0.0 && horizon.is_finite(),
            "horizon",
            "must be non-negative",
        )?;
        let n = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
        let mut times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        if times.is_empty() {
            times.push(0.0);
        }
        if horizon > *times.last().unwrap() {
            times.push(horizon);
        }
        Self::new(times)
    }

    /// Uniform grid refined so that every time in `marks` is a grid point.
    pub fn uniform_with_marks(horizon: f64, dt: f64, marks: &[f64]) -> Result<Self> {
        let base = Self::uniform(horizon, dt)?;
        let mut times = base.times;
        for &m in marks {
            if m > 0.0 && m <= horizon {
                times.push(m);
            }
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.windows(2).map(|w| (w[0], w[1] - w[0]))
    }
}

/// Deterministic random stream identified by `(seed, stream_id)`.
///
/// Streams with different ids are ChaCha streams under the same key, so
/// they never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Derived stream, e.g. one per Monte Carlo path.
    pub fn child(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(0x9E37_79B9))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaParams {
    /// Rate per year.
    pub m: f64,
    /// Scale.
    pub kappa: f64,
}

impl GammaParams {
    pub fn new(m: f64, kappa: f64) -> Result<Self> {
        let p = Self { m, kappa };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require(
            self.m > 0.0 && self.m.is_finite(),
            "m",
            "gamma rate must be positive",
        )?;
        require(
            self.kappa > 0.0 && self.kappa.is_finite(),
            "kappa",
            "gamma scale must be positive",
        )
    }

    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        sample_gamma(self.m * dt, self.kappa, rng)
    }
}

fn sample_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    if shape <= 0.0 {
        return 0.0;
    }
    Gamma::new(shape, scale)
        .expect("validated gamma parameters")
        .sample(rng)
}

/// Law of the compound Poisson jump sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpLaw {
    /// Gaussian jumps; `std_dev = 0` gives fixed-size jumps.
    Gaussian { mean: f64, std_dev: f64 },
}

impl JumpLaw {
    pub fn mgf(&self, h: f64) -> f64 {
        match *self {
            JumpLaw::Gaussian { mean, std_dev } => {
                (mean * h + 0.5 * std_dev * std_dev * h * h).exp()
            }
        }
    }

    fn log_mgf(&self, h: f64) -> f64 {
        match *self {
            JumpLaw::Gaussian { mean, std_dev } => mean * h + 0.5 * std_dev * std_dev * h * h,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Gaussian { mean, std_dev } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std_dev * z
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            JumpLaw::Gaussian { mean, std_dev } => {
                require(mean.is_finite(), "jump.mean", "must be finite")?;
                require(
                    std_dev >= 0.0 && std_dev.is_finite(),
                    "jump.std_dev",
                    "must be non-negative",
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompoundPoissonParams {
    /// Jump intensity per year.
    pub lambda: f64,
    pub jump: JumpLaw,
}

impl CompoundPoissonParams {
    pub fn new(lambda: f64, jump: JumpLaw) -> Result<Self> {
        let p = Self { lambda, jump };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require(
            self.lambda > 0.0 && self.lambda.is_finite(),
            "lambda",
            "intensity must be positive",
        )?;
        self.jump.validate()
    }

    /// Returns `(jump count, summed jump size)` over a step of length `dt`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> (u64, f64) {
        let mean = self.lambda * dt;
        if mean <= 0.0 {
            return (0, 0.0);
        }
        let n = Poisson::new(mean).expect("positive intensity").sample(rng) as u64;
        let sum = (0..n).map(|_| self.jump.sample(rng)).sum();
        (n, sum)
    }
}

/// Variance gamma as Brownian motion with drift `theta` and volatility
/// `sigma`, time-changed by a gamma subordinator with variance rate `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VgParams {
    pub theta: f64,
    pub sigma: f64,
    pub nu: f64,
}

impl VgParams {
    pub fn new(theta: f64, sigma: f64, nu: f64) -> Result<Self> {
        let p = Self { theta, sigma, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require(self.theta.is_finite(), "theta", "must be finite")?;
        require(
            self.sigma > 0.0 && self.sigma.is_finite(),
            "sigma",
            "must be positive",
        )?;
        require(
            self.nu > 0.0 && self.nu.is_finite(),
            "nu",
            "must be positive",
        )
    }

    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        let g = sample_gamma(dt / self.nu, self.nu, rng);
        let z: f64 = StandardNormal.sample(rng);
        self.theta * g + self.sigma * g.sqrt() * z
    }

    /// `1 - theta nu h - sigma^2 nu h^2 / 2`, positive on the admissible domain.
    pub fn mgf_base(&self, h: f64) -> f64 {
        1.0 - self.theta * self.nu * h - 0.5 * self.sigma * self.sigma * self.nu * h * h
    }
}

/// Ornstein-Uhlenbeck process `dY = delta (beta - Y) dt + upsilon dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuParams {
    pub delta: f64,
    pub beta: f64,
    pub upsilon: f64,
    pub y0: f64,
}

impl OuParams {
    pub fn new(delta: f64, beta: f64, upsilon: f64, y0: f64) -> Result<Self> {
        let p = Self {
            delta,
            beta,
            upsilon,
            y0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require(
            self.delta > 0.0 && self.delta.is_finite(),
            "delta",
            "reversion speed must be positive",
        )?;
        require(self.beta.is_finite(), "beta", "must be finite")?;
        require(
            self.upsilon > 0.0 && self.upsilon.is_finite(),
            "upsilon",
            "volatility must be positive",
        )?;
        require(self.y0.is_finite(), "y0", "must be finite")
    }

    /// Mean and variance of `Y_{s+horizon}` given `Y_s = y`.
    pub fn transition_moments(&self, y: f64, horizon: f64) -> (f64, f64) {
        let decay = (-self.delta * horizon).exp();
        let mean = y * decay + self.beta * (1.0 - decay);
        let var = self.upsilon * self.upsilon / (2.0 * self.delta)
            * (1.0 - (-2.0 * self.delta * horizon).exp());
        (mean, var)
    }

    pub fn stationary_variance(&self) -> f64 {
        self.upsilon * self.upsilon / (2.0 * self.delta)
    }

    pub fn sample_transition<R: Rng + ?Sized>(&self, y: f64, horizon: f64, rng: &mut R) -> f64 {
        let (mean, var) = self.transition_moments(y, horizon);
        let z: f64 = StandardNormal.sample(rng);
        mean + var.sqrt() * z
    }
}

/// One independent Lévy component of the market driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Driver {
    Brownian,
    Gamma { m: f64, kappa: f64 },
    CompoundPoisson { lambda: f64, jump: JumpLaw },
    VarianceGamma { theta: f64, sigma: f64, nu: f64 },
}

impl Driver {
    pub fn gamma(p: GammaParams) -> Self {
        Driver::Gamma {
            m: p.m,
            kappa: p.kappa,
        }
    }

    pub fn compound_poisson(p: CompoundPoissonParams) -> Self {
        Driver::CompoundPoisson {
            lambda: p.lambda,
            jump: p.jump,
        }
    }

    pub fn variance_gamma(p: VgParams) -> Self {
        Driver::VarianceGamma {
            theta: p.theta,
            sigma: p.sigma,
            nu: p.nu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Driver::Brownian => Ok(()),
            Driver::Gamma { m, kappa } => GammaParams { m, kappa }.validate(),
            Driver::CompoundPoisson { lambda, jump } => {
                CompoundPoissonParams { lambda, jump }.validate()
            }
            Driver::VarianceGamma { theta, sigma, nu } => VgParams { theta, sigma, nu }.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Driver::Brownian => "brownian",
            Driver::Gamma { .. } => "gamma",
            Driver::CompoundPoisson { .. } => "compound-poisson",
            Driver::VarianceGamma { .. } => "variance-gamma",
        }
    }

    /// Checks that `E[exp(h L_t)]` is finite.
    pub fn check_exponent(&self, h: f64) -> Result<()> {
        let ok = match *self {
            Driver::Brownian | Driver::CompoundPoisson { .. } => h.is_finite(),
            Driver::Gamma { kappa, .. } => h.is_finite() && kappa * h < 1.0,
            Driver::VarianceGamma { theta, sigma, nu } => {
                h.is_finite() && VgParams { theta, sigma, nu }.mgf_base(h) > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain {
                h,
                constraint: self.constraint().into(),
            })
        }
    }

    /// Human-readable admissibility constraint.
    pub fn constraint(&self) -> &'static str {
        match self {
            Driver::Brownian => "h finite",
            Driver::Gamma { .. } => "h < 1/kappa",
            Driver::CompoundPoisson { .. } => "M_Y(h) finite",
            Driver::VarianceGamma { .. } => "1 - theta nu h - sigma^2 nu h^2 / 2 > 0",
        }
    }

    /// `ln E[exp(h L_t)]` without domain checks; callers validate `h` first.
    #[inline]
    pub fn log_normalizer_unchecked(&self, h: f64, t: f64) -> f64 {
        match *self {
            Driver::Brownian => 0.5 * h * h * t,
            Driver::Gamma { m, kappa } => -m * t * (-kappa * h).ln_1p(),
            Driver::CompoundPoisson { lambda, jump } => lambda * t * jump.log_mgf(h).exp_m1(),
            Driver::VarianceGamma { theta, sigma, nu } => {
                -(t / nu) * VgParams { theta, sigma, nu }.mgf_base(h).ln()
            }
        }
    }

    pub fn log_normalizer(&self, h: f64, t: f64) -> Result<f64> {
        self.check_exponent(h)?;
        if t < 0.0 {
            return Err(Error::TimeOrder(format!("negative time {t}")));
        }
        Ok(self.log_normalizer_unchecked(h, t))
    }

    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        match *self {
            Driver::Brownian => {
                let z: f64 = StandardNormal.sample(rng);
                dt.sqrt() * z
            }
            Driver::Gamma { m, kappa } => GammaParams { m, kappa }.sample_increment(dt, rng),
            Driver::CompoundPoisson { lambda, jump } => {
                CompoundPoissonParams { lambda, jump }
                    .sample_increment(dt, rng)
                    .1
            }
            Driver::VarianceGamma { theta, sigma, nu } => {
                VgParams { theta, sigma, nu }.sample_increment(dt, rng)
            }
        }
    }

    pub fn simulate<R: Rng + ?Sized>(&self, grid: &TimeGrid, rng: &mut R) -> SamplePath {
        SamplePath::accumulate(grid, 0.0, |dt| self.sample_increment(dt, rng))
    }
}

/// `E[exp(h L_t)]` in closed form for the given driver.
pub fn esscher_normalizer(driver: &Driver, h: f64, t: f64) -> Result<f64> {
    driver.log_normalizer(h, t).map(f64::exp)
}

/// Values of a process on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} grid times",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn accumulate(
        grid: &TimeGrid,
        start: f64,
        mut step: impl FnMut(f64) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut level = start;
        values.push(level);
        for (_, dt) in grid.steps() {
            level += step(dt);
            values.push(level);
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Restriction to the grid points whose index is a multiple of `every`.
    pub fn subsample(&self, every: usize) -> Result<Self> {
        require(every > 0, "every", "must be positive")?;
        let idx: Vec<usize> = (0..self.values.len()).step_by(every).collect();
        let times = idx.iter().map(|&i| self.grid.times()[i]).collect();
        let values = idx.iter().map(|&i| self.values[i]).collect();
        Self::new(TimeGrid::new(times)?, values)
    }
}

pub fn simulate_brownian<R: Rng + ?Sized>(grid: &TimeGrid, rng: &mut R) -> SamplePath {
    Driver::Brownian.simulate(grid, rng)
}

pub fn simulate_gamma<R: Rng + ?Sized>(
    params: &GammaParams,
    grid: &TimeGrid,
    rng: &mut R,
) -> SamplePath {
    SamplePath::accumulate(grid, 0.0, |dt| params.sample_increment(dt, rng))
}

/// Compound Poisson path. The returned pair holds the jump-count path `N_t`
/// and the compound path `C_t`.
pub fn simulate_compound_poisson<R: Rng + ?Sized>(
    params: &CompoundPoissonParams,
    grid: &TimeGrid,
    rng: &mut R,
) -> (SamplePath, SamplePath) {
    let mut counts = Vec::with_capacity(grid.len());
    let mut sums = Vec::with_capacity(grid.len());
    let (mut n, mut c) = (0u64, 0.0);
    counts.push(0.0);
    sums.push(0.0);
    for (_, dt) in grid.steps() {
        let (dn, dc) = params.sample_increment(dt, rng);
        n += dn;
        c += dc;
        counts.push(n as f64);
        sums.push(c);
    }
    (
        SamplePath {
            grid: grid.clone(),
            values: counts,
        },
        SamplePath {
            grid: grid.clone(),
            values: sums,
        },
    )
}

pub fn simulate_vg<R: Rng + ?Sized>(params: &VgParams, grid: &TimeGrid, rng: &mut R) -> SamplePath {
    SamplePath::accumulate(grid, 0.0, |dt| params.sample_increment(dt, rng))
}

pub fn simulate_ou<R: Rng + ?Sized>(params: &OuParams, grid: &TimeGrid, rng: &mut R) -> SamplePath {
    let mut values = Vec::with_capacity(grid.len());
    let mut y = params.y0;
    values.push(y);
    for (_, dt) in grid.steps() {
        y = params.sample_transition(y, dt, rng);
        values.push(y);
    }
    SamplePath {
        grid: grid.clone(),
        values,
    }
}

/// Mean and variance of `Y_t` given `Y_s = y_s`.
pub fn ou_conditional_moments(params: &OuParams, y_s: f64, s: f64, t: f64) -> Result<(f64, f64)> {
    if s > t {
        return Err(Error::TimeOrder(format!(
            "conditioning time {s} after target time {t}"
        )));
    }
    Ok(params.transition_moments(y_s, t - s))
}
