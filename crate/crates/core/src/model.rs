//! Range measurement model `r_i = d_i + η_i`, `η_i ~ N(0, δ₀² d_i^γ)` with the
//! reference distance fixed at 1 m.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::oracle::GridSpec;
use crate::vmp::{GammaBelief, GaussianBelief2D, Priors, ScalarGaussianBelief};
use crate::{Error, Mat2, Result, Vec2};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Distances below this are treated as coincident points.
pub const MIN_DISTANCE: f64 = 1e-9;

/// Ground truth plus the prior hyperparameters handed to the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub target_true: Vec2,
    pub sensors_true: Vec<Vec2>,
    pub sensor_prior_means: Vec<Vec2>,
    pub sensor_prior_cov: Vec<Mat2>,
    pub target_prior_mean: Vec2,
    pub target_prior_cov: Mat2,
    pub gamma_true: f64,
    pub delta0_sq_true: f64,
    pub gamma_prior: ScalarGaussianBelief,
    pub lambda_prior: GammaBelief,
    /// Offset already applied to the sensor coordinates above; kept for reporting.
    pub sensor_offset: Vec2,
}

/// Sensor coordinates of the reference 100 m × 100 m layout.
pub const REFERENCE_SENSORS: [[f64; 2]; 5] =
    [[10.0, 20.0], [80.0, 90.0], [30.0, 40.0], [10.0, 90.0], [60.0, 20.0]];

impl Scenario {
    /// Reference layout with the target at the field centre and every prior
    /// centred on the truth: μ = 0.1, Σ = 100 I, γ = 3, δ_γ = 0.01, δ₀² = 1e-6
    /// and a Gamma(1000, 1000·δ₀²) belief on Λ₀.
    pub fn reference() -> Self {
        let sensors: Vec<Vec2> = REFERENCE_SENSORS.iter().map(|s| Vec2::new(s[0], s[1])).collect();
        let mu: f64 = 0.1;
        let delta0_sq = 1e-6;
        let a = 1000.0;
        Scenario {
            target_true: Vec2::new(50.0, 50.0),
            sensors_true: sensors.clone(),
            sensor_prior_cov: vec![Mat2::identity() * mu * mu; sensors.len()],
            sensor_prior_means: sensors,
            target_prior_mean: Vec2::new(50.0, 50.0),
            target_prior_cov: Mat2::identity() * 100.0,
            gamma_true: 3.0,
            delta0_sq_true: delta0_sq,
            gamma_prior: ScalarGaussianBelief::new(3.0, 0.01),
            lambda_prior: GammaBelief::new(a, a * delta0_sq),
            sensor_offset: Vec2::zeros(),
        }
    }

    pub fn n_sensors(&self) -> usize {
        self.sensors_true.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sensors_true.len();
        if n < 3 {
            return Err(Error::domain(format!("need at least 3 sensors, got {n}")));
        }
        if self.sensor_prior_means.len() != n || self.sensor_prior_cov.len() != n {
            return Err(Error::domain("sensor prior lists do not match the sensor count"));
        }
        check_spd(&self.target_prior_cov, "target prior covariance")?;
        for (i, c) in self.sensor_prior_cov.iter().enumerate() {
            check_spd(c, &format!("sensor {i} prior covariance"))?;
        }
        let positive = [
            ("gamma_true", self.gamma_true),
            ("delta0_sq_true", self.delta0_sq_true),
            ("gamma prior variance", self.gamma_prior.variance),
            ("lambda prior shape", self.lambda_prior.shape),
            ("lambda prior rate", self.lambda_prior.rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Prior beliefs as the estimators see them.
    pub fn priors(&self) -> Priors {
        Priors {
            target: GaussianBelief2D::new(self.target_prior_mean, self.target_prior_cov),
            sensors: self
                .sensor_prior_means
                .iter()
                .zip(&self.sensor_prior_cov)
                .map(|(m, c)| GaussianBelief2D::new(*m, *c))
                .collect(),
            gamma: self.gamma_prior,
            lambda0: self.lambda_prior,
        }
    }
}

pub(crate) fn check_spd(m: &Mat2, what: &str) -> Result<()> {
    let sym = (m[(0, 1)] - m[(1, 0)]).abs() <= 1e-12 * m.abs().max().max(1.0);
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !sym || !(m[(0, 0)] > 0.0) || !(det > 0.0) || !m.iter().all(|v| v.is_finite()) {
        return Err(Error::domain(format!("{what} is not symmetric positive-definite")));
    }
    Ok(())
}

/// Ranges, index-aligned with the scenario's sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub r: Vec<f64>,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

pub fn distance(x: &Vec2, xi: &Vec2) -> f64 {
    (x - xi).norm()
}

/// δ₀²·d^γ (reference distance 1 m).
pub fn noise_variance(d: f64, gamma: f64, delta0_sq: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain(format!("noise variance at non-positive distance {d}")));
    }
    Ok(delta0_sq * d.powf(gamma))
}

pub fn sample_measurements(scenario: &Scenario, seed: u64) -> MeasurementSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = scenario
        .sensors_true
        .iter()
        .map(|s| {
            let d = distance(&scenario.target_true, s);
            let z: f64 = StandardNormal.sample(&mut rng);
            if scenario.delta0_sq_true == 0.0 {
                d
            } else {
                d + (scenario.delta0_sq_true * d.powf(scenario.gamma_true)).sqrt() * z
            }
        })
        .collect();
    MeasurementSet { r }
}

fn checked_distance(x: &Vec2, xi: &Vec2, i: usize) -> Result<f64> {
    let d = distance(x, xi);
    if d < MIN_DISTANCE || !d.is_finite() {
        return Err(Error::domain(format!("position coincides with sensor {i} (d = {d:e})")));
    }
    Ok(d)
}

/// Fully normalised log-likelihood of the ranges.
pub fn log_likelihood(r: &MeasurementSet, x: &Vec2, sensors: &[Vec2], gamma: f64, lambda0: f64) -> Result<f64> {
    if !(lambda0 > 0.0) {
        return Err(Error::domain(format!("lambda0 must be positive, got {lambda0}")));
    }
    if r.len() != sensors.len() {
        return Err(Error::domain("measurement count does not match sensor count"));
    }
    let mut acc = 0.0;
    for (i, (ri, s)) in r.r.iter().zip(sensors).enumerate() {
        let d = checked_distance(x, s, i)?;
        let res = ri - d;
        acc += -0.5 * LN_2PI + 0.5 * lambda0.ln() - 0.5 * gamma * d.ln() - lambda0 * res * res / (2.0 * d.powf(gamma));
    }
    Ok(acc)
}

pub fn gaussian2_log_pdf(x: &Vec2, belief: &GaussianBelief2D) -> f64 {
    let c = &belief.cov;
    let det = c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)];
    let e = x - belief.mean;
    let q = (c[(1, 1)] * e.x * e.x - (c[(0, 1)] + c[(1, 0)]) * e.x * e.y + c[(0, 0)] * e.y * e.y) / det;
    -LN_2PI - 0.5 * det.ln() - 0.5 * q
}

pub fn normal_log_pdf(z: f64, belief: &ScalarGaussianBelief) -> f64 {
    let e = z - belief.mean;
    -0.5 * LN_2PI - 0.5 * belief.variance.ln() - 0.5 * e * e / belief.variance
}

pub fn gamma_log_pdf(z: f64, belief: &GammaBelief) -> f64 {
    let (a, b) = (belief.shape, belief.rate);
    a * b.ln() - ln_gamma(a) + (a - 1.0) * z.ln() - b * z
}

/// Log-likelihood plus every prior log-density.
pub fn log_joint(
    r: &MeasurementSet,
    x: &Vec2,
    sensors: &[Vec2],
    gamma: f64,
    lambda0: f64,
    priors: &Priors,
) -> Result<f64> {
    if priors.sensors.len() != sensors.len() {
        return Err(Error::domain("prior count does not match sensor count"));
    }
    let mut acc = log_likelihood(r, x, sensors, gamma, lambda0)?;
    acc += gaussian2_log_pdf(x, &priors.target);
    for (s, p) in sensors.iter().zip(&priors.sensors) {
        acc += gaussian2_log_pdf(s, p);
    }
    acc += normal_log_pdf(gamma, &priors.gamma);
    acc += gamma_log_pdf(lambda0, &priors.lambda0);
    Ok(acc)
}

/// Log-likelihood evaluated at grid cell centres, row-major with rows along y.
#[derive(Debug, Clone)]
pub struct LikelihoodGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `None` marks cells whose centre coincides with a sensor.
    pub values: Vec<Option<f64>>,
}

impl LikelihoodGrid {
    pub fn get(&self, ix: usize, iy: usize) -> Option<f64> {
        self.values[iy * self.xs.len() + ix]
    }

    /// Centre of the highest cell.
    pub fn argmax(&self) -> Option<Vec2> {
        let mut best: Option<(usize, f64)> = None;
        for (k, v) in self.values.iter().enumerate() {
            if let Some(v) = v {
                if best.map_or(true, |(_, b)| *v > b) {
                    best = Some((k, *v));
                }
            }
        }
        best.map(|(k, _)| {
            let n = self.xs.len();
            Vec2::new(self.xs[k % n], self.ys[k / n])
        })
    }
}

pub fn likelihood_grid(
    r: &MeasurementSet,
    sensors: &[Vec2],
    gamma: f64,
    lambda0: f64,
    grid: &GridSpec,
) -> Result<LikelihoodGrid> {
    if grid.resolution == 0 {
        return Err(Error::domain("grid resolution must be at least 1"));
    }
    let xs = grid.x_centres();
    let ys = grid.y_centres();
    let mut values = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            let p = Vec2::new(x, y);
            if sensors.iter().any(|s| distance(&p, s) < MIN_DISTANCE) {
                values.push(None);
            } else {
                values.push(Some(log_likelihood(r, &p, sensors, gamma, lambda0)?));
            }
        }
    }
    Ok(LikelihoodGrid { xs, ys, values })
}
