//! Brute-force references: exhaustive grid MAP, one-dimensional posterior
//! quadratures for Λ₀ and γ, and a Levenberg–Marquardt ML baseline.
//!
//! None of these use the expansions or conjugate shortcuts of [`crate::vmp`].

use rayon::prelude::*;

use crate::linearization::position_linearize;
use crate::model::{distance, gamma_log_pdf, gaussian2_log_pdf, log_likelihood, normal_log_pdf, MeasurementSet, MIN_DISTANCE};
use crate::vmp::{GammaBelief, Priors, ScalarGaussianBelief};
use crate::{Error, Mat2, Result, Vec2};

/// Axis-aligned grid of `resolution × resolution` cells; evaluation happens at
/// the cell centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), resolution: usize) -> Self {
        Self { x_range, y_range, resolution }
    }

    fn centres(range: (f64, f64), n: usize) -> Vec<f64> {
        let h = (range.1 - range.0) / n as f64;
        (0..n).map(|k| range.0 + (k as f64 + 0.5) * h).collect()
    }

    pub fn x_centres(&self) -> Vec<f64> {
        Self::centres(self.x_range, self.resolution)
    }

    pub fn y_centres(&self) -> Vec<f64> {
        Self::centres(self.y_range, self.resolution)
    }

    pub fn cell_size(&self) -> Vec2 {
        Vec2::new(
            (self.x_range.1 - self.x_range.0) / self.resolution as f64,
            (self.y_range.1 - self.y_range.0) / self.resolution as f64,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::domain("grid resolution must be at least 2"));
        }
        if !(self.x_range.1 > self.x_range.0 && self.y_range.1 > self.y_range.0) {
            return Err(Error::domain("grid ranges must be non-degenerate"));
        }
        Ok(())
    }
}

/// Grid cell maximising log-likelihood plus target log-prior, with sensors at
/// their prior means and γ, Λ₀ fixed.
pub fn grid_map(r: &MeasurementSet, priors: &Priors, grid: &GridSpec, gamma_fixed: f64, lambda0_fixed: f64) -> Result<Vec2> {
    grid.validate()?;
    let sensors: Vec<Vec2> = priors.sensors.iter().map(|s| s.mean).collect();
    let xs = grid.x_centres();
    let ys = grid.y_centres();
    let rows: Vec<Result<Option<(f64, Vec2)>>> = ys
        .par_iter()
        .map(|&y| {
            let mut best: Option<(f64, Vec2)> = None;
            for &x in &xs {
                let p = Vec2::new(x, y);
                if sensors.iter().any(|s| distance(&p, s) < MIN_DISTANCE) {
                    continue;
                }
                let v = log_likelihood(r, &p, &sensors, gamma_fixed, lambda0_fixed)? + gaussian2_log_pdf(&p, &priors.target);
                if best.map_or(true, |(b, _)| v > b) {
                    best = Some((v, p));
                }
            }
            Ok(best)
        })
        .collect();
    let mut best: Option<(f64, Vec2)> = None;
    for row in rows {
        if let Some((v, p)) = row? {
            if best.map_or(true, |(b, _)| v > b) {
                best = Some((v, p));
            }
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| Error::domain("every grid cell is masked"))
}

/// Posterior moments of a density given by its log on a uniform grid, by the
/// trapezoid rule. `transform` maps the grid variable to the moment variable.
fn trapezoid_moments(lo: f64, hi: f64, n: usize, logf: &dyn Fn(f64) -> f64, transform: &dyn Fn(f64) -> f64) -> (f64, f64, f64, f64) {
    let h = (hi - lo) / (n - 1) as f64;
    let vals: Vec<f64> = (0..n).map(|k| logf(lo + k as f64 * h)).collect();
    let lmax = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (k, l) in vals.iter().enumerate() {
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let f = w * (l - lmax).exp();
        let z = transform(lo + k as f64 * h);
        m0 += f;
        m1 += f * z;
        m2 += f * z * z;
    }
    let mean = m1 / m0;
    let edge = (vals[0].max(vals[n - 1]) - lmax).exp();
    (mean, m2 / m0 - mean * mean, edge, lmax)
}

const QUAD_POINTS: usize = 10_000;
const QUAD_TOL: f64 = 1e-6;

fn doubled_quadrature(lo: f64, hi: f64, logf: &dyn Fn(f64) -> f64, transform: &dyn Fn(f64) -> f64) -> Result<(f64, f64)> {
    let (m_a, _, edge, _) = trapezoid_moments(lo, hi, QUAD_POINTS, logf, transform);
    let (m_b, v_b, _, _) = trapezoid_moments(lo, hi, 2 * QUAD_POINTS, logf, transform);
    if !(m_b.is_finite() && v_b.is_finite()) {
        return Err(Error::numerical("quadrature produced non-finite moments"));
    }
    if edge > 1e-12 {
        return Err(Error::numerical(format!("posterior mass at the integration boundary ({edge:e})")));
    }
    if (m_a - m_b).abs() > QUAD_TOL * m_b.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::numerical(format!("quadrature not converged: {m_a} vs {m_b}")));
    }
    Ok((m_b, v_b))
}

/// Posterior mean and variance of Λ₀ with distances and γ known, integrating
/// likelihood × Gamma prior in log Λ₀.
pub fn lambda_posterior_quadrature(r: &MeasurementSet, distances: &[f64], gamma: f64, prior: &GammaBelief) -> Result<(f64, f64)> {
    if r.len() != distances.len() {
        return Err(Error::domain("measurement count does not match distance count"));
    }
    if distances.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::domain("distances must be positive"));
    }
    let logf = |u: f64| {
        let lam = u.exp();
        let mut ll = 0.0;
        for (ri, d) in r.r.iter().zip(distances) {
            let var = d.powf(gamma) / lam;
            ll += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (ri - d).powi(2) / (2.0 * var);
        }
        ll + gamma_log_pdf(lam, prior) + u
    };
    // locate the log-space mode with a coarse scan around the prior mean
    let centre = prior.mean().ln();
    let coarse = 4001;
    let (mut best_u, mut best_l) = (centre, f64::NEG_INFINITY);
    for k in 0..coarse {
        let u = centre - 60.0 + 120.0 * k as f64 / (coarse - 1) as f64;
        let l = logf(u);
        if l > best_l {
            best_l = l;
            best_u = u;
        }
    }
    let span = 1e3f64.ln();
    let (mut lo, mut hi) = (best_u - span, best_u + span);
    while logf(lo) > best_l - 50.0 {
        lo -= span;
    }
    while logf(hi) > best_l - 50.0 {
        hi += span;
    }
    doubled_quadrature(lo, hi, &logf, &|u: f64| u.exp())
}

/// Posterior mean and variance of γ with positions and Λ₀ known.
pub fn gamma_posterior_quadrature(
    r: &MeasurementSet,
    x: &Vec2,
    sensors: &[Vec2],
    lambda0: f64,
    prior: &ScalarGaussianBelief,
) -> Result<(f64, f64)> {
    if r.len() != sensors.len() {
        return Err(Error::domain("measurement count does not match sensor count"));
    }
    let mut ds = Vec::with_capacity(sensors.len());
    for (i, s) in sensors.iter().enumerate() {
        let d = distance(x, s);
        if d < MIN_DISTANCE {
            return Err(Error::domain(format!("target coincides with sensor {i}")));
        }
        ds.push(d);
    }
    let logf = |g: f64| {
        let mut acc = normal_log_pdf(g, prior);
        for (ri, d) in r.r.iter().zip(&ds) {
            acc += -0.5 * g * d.ln() - lambda0 * (ri - d).powi(2) / (2.0 * d.powf(g));
        }
        acc
    };
    let w = 8.0 * prior.variance.sqrt();
    doubled_quadrature(prior.mean - w, prior.mean + w, &logf, &|g| g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussNewtonOptions {
    pub max_iter: usize,
    pub step_tol: f64,
    pub damping_init: f64,
    /// Any proposed step longer than this aborts the solve.
    pub divergence_step: f64,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            step_tol: 1e-6,
            damping_init: 1e-3,
            divergence_step: 100.0 * std::f64::consts::SQRT_2,
        }
    }
}

fn weighted_cost(r: &MeasurementSet, x: &Vec2, sensors: &[Vec2], gamma: f64, lambda0: f64) -> Option<f64> {
    let mut c = 0.0;
    for (ri, s) in r.r.iter().zip(sensors) {
        let d = distance(x, s);
        if d < MIN_DISTANCE {
            return None;
        }
        c += (ri - d).powi(2) / d.powf(gamma);
    }
    Some(0.5 * lambda0 * c)
}

/// Minimises Σ(r_i − d_i)²/d_i^γ over the target position with
/// Levenberg–Marquardt, trusting the sensor means and channel parameters.
pub fn gauss_newton_ml(
    r: &MeasurementSet,
    sensor_means: &[Vec2],
    gamma_known: f64,
    lambda0_known: f64,
    x_init: &Vec2,
    options: &GaussNewtonOptions,
) -> Result<Vec2> {
    if r.len() != sensor_means.len() {
        return Err(Error::domain("measurement count does not match sensor count"));
    }
    let mut x = *x_init;
    let mut cost = weighted_cost(r, &x, sensor_means, gamma_known, lambda0_known)
        .ok_or_else(|| Error::domain("initial point coincides with a sensor"))?;
    let mut damping = options.damping_init;
    let mut trace: Vec<Vec2> = vec![x];
    for _ in 0..options.max_iter {
        let mut h = Mat2::zeros();
        let mut g = Vec2::zeros();
        for (ri, s) in r.r.iter().zip(sensor_means) {
            let lin = position_linearize(&x, s, *ri, gamma_known)?;
            h += lin.gamma_grad * lin.gamma_grad.transpose();
            g += lin.gamma_grad * lin.upsilon;
        }
        let mut lhs = h;
        lhs[(0, 0)] += damping * h[(0, 0)];
        lhs[(1, 1)] += damping * h[(1, 1)];
        let step = match lhs.try_inverse() {
            Some(inv) => -(inv * g),
            None => return Err(Error::numerical("singular normal equations")),
        };
        if !step.iter().all(|v| v.is_finite()) || step.norm() > options.divergence_step {
            return Err(Error::Divergence(format!(
                "step of {:.3e} m from {:?}; trace {:?}",
                step.norm(),
                x.as_slice(),
                trace.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>()
            )));
        }
        let candidate = x + step;
        match weighted_cost(r, &candidate, sensor_means, gamma_known, lambda0_known) {
            Some(c) if c < cost => {
                x = candidate;
                cost = c;
                damping /= 10.0;
                trace.push(x);
                if step.norm() < options.step_tol {
                    break;
                }
            }
            _ => {
                damping *= 10.0;
                if step.norm() < options.step_tol {
                    break;
                }
            }
        }
    }
    Ok(x)
}
