//! Mean-field beliefs q(x)·Πq(x_i)·q(γ)·q(Λ₀), their updates and the
//! iteration loop.
//!
//! Position and γ beliefs are Gaussian, Λ₀ is Gamma. Each update adds a
//! likelihood message (natural parameters) to the prior of the variable,
//! evaluating the expansion at the current means.

use crate::linearization::{gamma_linearize, position_linearize, PositionLinearization};
use crate::model::{distance, MeasurementSet, MIN_DISTANCE};
use crate::{Error, Mat2, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarGaussianBelief {
    pub mean: f64,
    pub variance: f64,
}

impl ScalarGaussianBelief {
    pub fn new(mean: f64, variance: f64) -> Self {
        Self { mean, variance }
    }

    /// Posterior after a message with precision `a` and linear term `u`.
    pub fn with_message(&self, a: f64, u: f64) -> Self {
        let variance = 1.0 / (1.0 / self.variance + a);
        Self {
            mean: variance * (self.mean / self.variance + u),
            variance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaBelief {
    pub shape: f64,
    pub rate: f64,
}

impl GammaBelief {
    pub fn new(shape: f64, rate: f64) -> Self {
        Self { shape, rate }
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief2D {
    pub mean: Vec2,
    pub cov: Mat2,
}

impl GaussianBelief2D {
    pub fn new(mean: Vec2, cov: Mat2) -> Self {
        Self { mean, cov }
    }

    pub fn natural(&self) -> Result<NaturalStatsPair> {
        let prec = invert_spd(&self.cov)?;
        Ok(NaturalStatsPair {
            eta1: prec * self.mean,
            eta2: prec * -0.5,
        })
    }
}

/// Gaussian natural parameters: `eta1 = Pμ`, `eta2 = −½P` for precision `P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaturalStatsPair {
    pub eta1: Vec2,
    pub eta2: Mat2,
}

impl NaturalStatsPair {
    /// Message carrying precision `a` and linear term `u`.
    pub fn message(a: Mat2, u: Vec2) -> Self {
        Self { eta1: u, eta2: a * -0.5 }
    }

    pub fn combine(&self, other: &Self) -> Self {
        Self {
            eta1: self.eta1 + other.eta1,
            eta2: self.eta2 + other.eta2,
        }
    }

    pub fn to_belief(&self) -> Result<GaussianBelief2D> {
        let cov = invert_spd(&(self.eta2 * -2.0))?;
        Ok(GaussianBelief2D {
            mean: cov * self.eta1,
            cov,
        })
    }
}

fn invert_spd(m: &Mat2) -> Result<Mat2> {
    let sym = (m + m.transpose()) * 0.5;
    let det = sym[(0, 0)] * sym[(1, 1)] - sym[(0, 1)] * sym[(1, 0)];
    if !(sym[(0, 0)] > 0.0 && det > 0.0 && det.is_finite()) {
        return Err(Error::numerical("matrix is not positive-definite"));
    }
    let inv = Mat2::new(sym[(1, 1)], -sym[(0, 1)], -sym[(1, 0)], sym[(0, 0)]) / det;
    Ok(inv)
}

/// Prior beliefs of all unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub target: GaussianBelief2D,
    pub sensors: Vec<GaussianBelief2D>,
    pub gamma: ScalarGaussianBelief,
    pub lambda0: GammaBelief,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    pub target: GaussianBelief2D,
    pub sensors: Vec<GaussianBelief2D>,
    pub gamma: ScalarGaussianBelief,
    pub lambda0: GammaBelief,
    pub iteration: usize,
    pub convergence_metric: f64,
}

impl PosteriorState {
    pub fn from_priors(priors: &Priors) -> Self {
        Self {
            target: priors.target,
            sensors: priors.sensors.clone(),
            gamma: priors.gamma,
            lambda0: priors.lambda0,
            iteration: 0,
            convergence_metric: 0.0,
        }
    }

    fn sensor_means(&self) -> impl Iterator<Item = &Vec2> {
        self.sensors.iter().map(|s| &s.mean)
    }

    fn is_finite(&self) -> bool {
        let pos_ok = |b: &GaussianBelief2D| b.mean.iter().chain(b.cov.iter()).all(|v| v.is_finite());
        pos_ok(&self.target)
            && self.sensors.iter().all(pos_ok)
            && self.gamma.mean.is_finite()
            && self.gamma.variance.is_finite()
            && self.lambda0.mean().is_finite()
            && self.lambda0.mean() > 0.0
    }
}

/// Form of the `ω` (log-distance) term in the position messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UxForm {
    /// `−½Σω` for the target, `+½ω` for a sensor: the gradient of `−(γ/2)ln d`.
    #[default]
    Corrected,
    /// `+Λ₀Σω` for the target, `−Λ₀ω` inside the sensor term, as printed.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JlceOptions {
    pub max_iter: usize,
    pub threshold: f64,
    pub ux_form: UxForm,
}

impl Default for JlceOptions {
    fn default() -> Self {
        Self {
            max_iter: 20,
            threshold: 1e-3,
            ux_form: UxForm::Corrected,
        }
    }
}

fn current_distance(state: &PosteriorState, i: usize) -> Result<f64> {
    let d = distance(&state.target.mean, &state.sensors[i].mean);
    if d < MIN_DISTANCE || !d.is_finite() {
        return Err(Error::domain(format!("target and sensor {i} coincide (d = {d:e})")));
    }
    Ok(d)
}

fn check_lengths(state: &PosteriorState, r: &MeasurementSet) -> Result<()> {
    if state.sensors.len() != r.len() {
        return Err(Error::domain(format!(
            "{} sensors but {} measurements",
            state.sensors.len(),
            r.len()
        )));
    }
    Ok(())
}

/// γ belief from the linearised residuals.
pub fn update_gamma(state: &PosteriorState, r: &MeasurementSet, prior: &ScalarGaussianBelief) -> Result<ScalarGaussianBelief> {
    check_lengths(state, r)?;
    let lam = state.lambda0.mean();
    let gamma = state.gamma.mean;
    let (mut a, mut u) = (0.0, 0.0);
    for (i, ri) in r.r.iter().enumerate() {
        let d = current_distance(state, i)?;
        let lin = gamma_linearize(*ri, d, gamma)?;
        let dd = lin.delta_gamma * lin.delta_gamma;
        a += dd * lam;
        u += dd * (gamma * lam - lin.g * lam - 0.25 * d.ln());
    }
    Ok(prior.with_message(a, u))
}

/// Conjugate Gamma update: shape grows by N/2, rate by Σ(r−d)²/(2d^γ).
pub fn update_lambda(state: &PosteriorState, r: &MeasurementSet, prior: &GammaBelief) -> Result<GammaBelief> {
    check_lengths(state, r)?;
    let gamma = state.gamma.mean;
    let mut s = 0.0;
    for (i, ri) in r.r.iter().enumerate() {
        let d = current_distance(state, i)?;
        s += (ri - d).powi(2) / (2.0 * d.powf(gamma));
    }
    Ok(GammaBelief::new(prior.shape + 0.5 * r.len() as f64, prior.rate + s))
}

fn linearize_all(state: &PosteriorState, r: &MeasurementSet) -> Result<Vec<PositionLinearization>> {
    state
        .sensor_means()
        .zip(&r.r)
        .map(|(s, ri)| position_linearize(&state.target.mean, s, *ri, state.gamma.mean))
        .collect()
}

/// Target message: precision `A_x` and linear term `U_x`.
pub fn target_message(state: &PosteriorState, r: &MeasurementSet, form: UxForm) -> Result<(Mat2, Vec2)> {
    check_lengths(state, r)?;
    let lam = state.lambda0.mean();
    let x = state.target.mean;
    let mut a = Mat2::zeros();
    let mut u = Vec2::zeros();
    let mut omega = Vec2::zeros();
    for lin in linearize_all(state, r)? {
        let gg = lin.gamma_grad * lin.gamma_grad.transpose();
        a += gg * lam;
        u += gg * x * lam - lin.gamma_grad * (lam * lin.upsilon);
        omega += lin.omega;
    }
    match form {
        UxForm::Corrected => u -= omega * 0.5,
        UxForm::PaperLiteral => u += omega * lam,
    }
    Ok((a, u))
}

pub fn update_target(state: &PosteriorState, r: &MeasurementSet, prior: &GaussianBelief2D, form: UxForm) -> Result<GaussianBelief2D> {
    let (a, u) = target_message(state, r, form)?;
    prior.natural()?.combine(&NaturalStatsPair::message(a, u)).to_belief()
}

/// Message to sensor `i`: precision `A_{x_i}` and linear term `U_{x_i}`.
pub fn sensor_message(state: &PosteriorState, i: usize, r: &MeasurementSet, form: UxForm) -> Result<(Mat2, Vec2)> {
    check_lengths(state, r)?;
    if i >= state.sensors.len() {
        return Err(Error::domain(format!("sensor index {i} out of range")));
    }
    let lam = state.lambda0.mean();
    let xi = state.sensors[i].mean;
    let lin = position_linearize(&state.target.mean, &xi, r.r[i], state.gamma.mean)?;
    let gg = lin.gamma_grad * lin.gamma_grad.transpose();
    let a = gg * lam;
    let base = gg * xi + lin.gamma_grad * lin.upsilon;
    let u = match form {
        UxForm::Corrected => base * lam + lin.omega * 0.5,
        UxForm::PaperLiteral => (base - lin.omega) * lam,
    };
    Ok((a, u))
}

pub fn update_sensor(
    state: &PosteriorState,
    i: usize,
    r: &MeasurementSet,
    prior: &GaussianBelief2D,
    form: UxForm,
) -> Result<GaussianBelief2D> {
    let (a, u) = sensor_message(state, i, r, form)?;
    prior.natural()?.combine(&NaturalStatsPair::message(a, u)).to_belief()
}

/// Squared drift of all point estimates between two states; Λ₀ enters relative
/// to its previous value.
pub fn convergence_metric(current: &PosteriorState, previous: &PosteriorState) -> f64 {
    let mut m = (current.target.mean - previous.target.mean).norm_squared();
    for (c, p) in current.sensors.iter().zip(&previous.sensors) {
        m += (c.mean - p.mean).norm_squared();
    }
    m += (current.gamma.mean - previous.gamma.mean).powi(2);
    let (lc, lp) = (current.lambda0.mean(), previous.lambda0.mean());
    m + ((lc - lp) / lp).powi(2)
}

/// One sweep in the order γ, Λ₀, x, x_1..x_N, each using the freshest beliefs.
pub fn sweep_once(state: &PosteriorState, priors: &Priors, r: &MeasurementSet, form: UxForm) -> Result<PosteriorState> {
    let it = state.iteration + 1;
    let mut s = state.clone();
    s.gamma = update_gamma(&s, r, &priors.gamma).map_err(|e| e.at(it, None))?;
    s.lambda0 = update_lambda(&s, r, &priors.lambda0).map_err(|e| e.at(it, None))?;
    s.target = update_target(&s, r, &priors.target, form).map_err(|e| e.at(it, None))?;
    for i in 0..s.sensors.len() {
        s.sensors[i] = update_sensor(&s, i, r, &priors.sensors[i], form).map_err(|e| e.at(it, Some(i)))?;
    }
    s.iteration = it;
    s.convergence_metric = convergence_metric(&s, state);
    if !s.is_finite() || !s.convergence_metric.is_finite() {
        return Err(Error::numerical("non-finite belief").at(it, None));
    }
    Ok(s)
}

/// Runs the iteration from the priors. The returned trajectory starts with the
/// priors and ends with the final beliefs.
pub fn run_jlce(priors: &Priors, r: &MeasurementSet, options: &JlceOptions) -> Result<Vec<PosteriorState>> {
    if priors.sensors.len() != r.len() {
        return Err(Error::domain("measurement count does not match sensor count"));
    }
    let mut traj = vec![PosteriorState::from_priors(priors)];
    for _ in 0..options.max_iter {
        let next = sweep_once(traj.last().expect("trajectory is never empty"), priors, r, options.ux_form)?;
        let done = next.convergence_metric < options.threshold;
        traj.push(next);
        if done {
            break;
        }
    }
    Ok(traj)
}

/// Whether the trajectory stopped on the threshold rather than the iteration cap.
pub fn converged(trajectory: &[PosteriorState], threshold: f64) -> bool {
    trajectory.len() > 1 && trajectory.last().is_some_and(|s| s.convergence_metric < threshold)
}
