//! Monte Carlo trials, parameter sweeps and the CSV result table.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bcrb::{bcrb_x, fim_closed, AppendixVariant};
use crate::model::{distance, sample_measurements, Scenario, REFERENCE_SENSORS};
use crate::oracle::{gauss_newton_ml, grid_map, GaussNewtonOptions, GridSpec};
use crate::vmp::{converged, run_jlce, GammaBelief, JlceOptions, PosteriorState, ScalarGaussianBelief, UxForm};
use crate::{Error, Mat2, Result, Vec2};

/// Targets closer than this to any sensor are redrawn.
pub const TARGET_REJECT_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Jlce,
    GaussNewtonMl,
    GridMap,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Jlce => "jlce",
            Algorithm::GaussNewtonMl => "gauss_newton_ml",
            Algorithm::GridMap => "grid_map",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jlce" => Ok(Algorithm::Jlce),
            "gauss_newton_ml" => Ok(Algorithm::GaussNewtonMl),
            "grid_map" => Ok(Algorithm::GridMap),
            other => Err(Error::Validation(format!(
                "unknown algorithm `{other}` (expected jlce, gauss_newton_ml or grid_map)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Reference noise amplitude δ₀ (the noise power is δ₀²).
    Delta0,
    /// Sensor position standard deviation.
    Mu,
    /// Coordinate offset v applied as [v, v] to every sensor.
    Offset,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Delta0 => "delta0",
            SweepParam::Mu => "mu",
            SweepParam::Offset => "offset",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta0" => Ok(SweepParam::Delta0),
            "mu" => Ok(SweepParam::Mu),
            "offset" => Ok(SweepParam::Offset),
            other => Err(Error::Validation(format!(
                "unknown sweep parameter `{other}` (expected delta0, mu or offset)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetPriorMean {
    /// Centre the target prior on each trial's true position.
    Truth,
    Fixed(Vec2),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRate {
    /// `b = a·δ₀²`, so the prior mean of Λ₀ matches the true precision.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub field: Vec2,
    pub sensors: Vec<Vec2>,
    pub target_prior_mean: TargetPriorMean,
    pub target_prior_cov: Mat2,
    pub mu: f64,
    pub gamma_mean: f64,
    pub gamma_var: f64,
    pub lambda_shape: f64,
    pub lambda_rate: LambdaRate,
    pub delta0_sq: f64,
    pub offset: f64,
    pub max_iter: usize,
    pub threshold: f64,
    pub trials: usize,
    pub seed: u64,
    pub sweep: Option<Sweep>,
    pub algorithms: Vec<Algorithm>,
    pub bcrb: bool,
    pub record_iterations: bool,
    pub ux_form: UxForm,
    pub record_timing: bool,
    /// Grid cells per field width for `grid_map` and the likelihood grid.
    pub grid_resolution: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            field: Vec2::new(100.0, 100.0),
            sensors: REFERENCE_SENSORS.iter().map(|s| Vec2::new(s[0], s[1])).collect(),
            target_prior_mean: TargetPriorMean::Truth,
            target_prior_cov: Mat2::identity() * 100.0,
            mu: 0.1,
            gamma_mean: 3.0,
            gamma_var: 0.01,
            lambda_shape: 1000.0,
            lambda_rate: LambdaRate::Auto,
            delta0_sq: 1e-6,
            offset: 0.0,
            max_iter: 20,
            threshold: 1e-3,
            trials: 500,
            seed: 0,
            sweep: None,
            algorithms: vec![Algorithm::Jlce, Algorithm::GaussNewtonMl],
            bcrb: false,
            record_iterations: false,
            ux_form: UxForm::Corrected,
            record_timing: false,
            grid_resolution: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.sensors.len() < 3 {
            return bad(format!("sensors: need at least 3, got {}", self.sensors.len()));
        }
        if !(self.field.x > 0.0 && self.field.y > 0.0) {
            return bad("field.width and field.height must be positive".into());
        }
        for (key, v) in [
            ("sensor.mu", self.mu),
            ("gamma.mean", self.gamma_mean),
            ("gamma.var", self.gamma_var),
            ("lambda0.a", self.lambda_shape),
            ("noise.delta0_sq", self.delta0_sq),
            ("run.threshold", self.threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{key} must be positive, got {v}"));
            }
        }
        if let LambdaRate::Fixed(b) = self.lambda_rate {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("lambda0.b must be positive, got {b}"));
            }
        }
        if !(self.offset >= 0.0 && self.offset.is_finite()) {
            return bad(format!("offset must be non-negative, got {}", self.offset));
        }
        if crate::model::check_spd(&self.target_prior_cov, "target.prior_cov").is_err() {
            return bad("target.prior_cov must be symmetric positive-definite".into());
        }
        if self.trials == 0 {
            return bad("run.trials must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("run.algorithms must not be empty".into());
        }
        if self.grid_resolution < 2 {
            return bad("grid.resolution must be at least 2".into());
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep.values must not be empty".into());
            }
            for v in &s.values {
                let ok = match s.param {
                    SweepParam::Offset => *v >= 0.0 && v.is_finite(),
                    _ => *v > 0.0 && v.is_finite(),
                };
                if !ok {
                    return bad(format!("sweep.values: invalid {} value {v}", s.param.name()));
                }
            }
        }
        Ok(())
    }

    /// Copy with one sweep value substituted.
    pub fn with_value(&self, param: SweepParam, value: f64) -> Self {
        let mut c = self.clone();
        match param {
            SweepParam::Delta0 => c.delta0_sq = value * value,
            SweepParam::Mu => c.mu = value,
            SweepParam::Offset => c.offset = value,
        }
        c
    }

    pub fn lambda_prior(&self) -> GammaBelief {
        let rate = match self.lambda_rate {
            LambdaRate::Auto => self.lambda_shape * self.delta0_sq,
            LambdaRate::Fixed(b) => b,
        };
        GammaBelief::new(self.lambda_shape, rate)
    }

    pub fn jlce_options(&self) -> JlceOptions {
        JlceOptions {
            max_iter: self.max_iter,
            threshold: self.threshold,
            ux_form: self.ux_form,
        }
    }

    /// Scenario of trial `t`. Sensors are drawn before the target so that every
    /// sweep value sees the same underlying random numbers.
    pub fn draw_scenario(&self, trial: u64) -> (Scenario, u64, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        let shift = Vec2::new(self.offset, self.offset);
        let means: Vec<Vec2> = self.sensors.iter().map(|s| s + shift).collect();
        let truths: Vec<Vec2> = means
            .iter()
            .map(|m| {
                let z = Vec2::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                m + z * self.mu
            })
            .collect();
        let mut rejections = 0;
        let target = loop {
            let t = Vec2::new(rng.random::<f64>() * self.field.x, rng.random::<f64>() * self.field.y);
            let near = truths.iter().chain(&means).any(|s| distance(&t, s) < TARGET_REJECT_RADIUS);
            if !near {
                break t;
            }
            rejections += 1;
        };
        let meas_seed = rng.next_u64();
        let n = means.len();
        let scenario = Scenario {
            target_true: target,
            sensors_true: truths,
            sensor_prior_means: means,
            sensor_prior_cov: vec![Mat2::identity() * self.mu * self.mu; n],
            target_prior_mean: match self.target_prior_mean {
                TargetPriorMean::Truth => target,
                TargetPriorMean::Fixed(m) => m,
            },
            target_prior_cov: self.target_prior_cov,
            gamma_true: self.gamma_mean,
            delta0_sq_true: self.delta0_sq,
            gamma_prior: ScalarGaussianBelief::new(self.gamma_mean, self.gamma_var),
            lambda_prior: self.lambda_prior(),
            sensor_offset: shift,
        };
        (scenario, meas_seed, rejections)
    }

    /// Grid over the target prior's ±4σ box with cells of `field.width / grid.resolution`.
    pub fn map_grid(&self, prior_mean: &Vec2) -> GridSpec {
        let sigma = self.target_prior_cov[(0, 0)].max(self.target_prior_cov[(1, 1)]).sqrt();
        let cell = self.field.x / self.grid_resolution as f64;
        let half = 4.0 * sigma;
        let res = ((2.0 * half / cell).ceil() as usize).max(2);
        let half = 0.5 * res as f64 * cell;
        GridSpec::new((prior_mean.x - half, prior_mean.x + half), (prior_mean.y - half, prior_mean.y + half), res)
    }
}

/// Squared errors of one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SquaredErrors {
    pub target: f64,
    /// Mean over sensors of the squared position error.
    pub sensors: f64,
    pub gamma: f64,
    pub lambda0_rel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmRun {
    /// One entry per recorded iteration (JLCE: 0..=max_iter, padded with the
    /// final state after stopping); other algorithms have a single entry.
    pub errors: Vec<SquaredErrors>,
    pub iterations: usize,
    pub converged: bool,
    pub initial_sensor_error: f64,
    pub final_sensor_error: f64,
    pub seconds: f64,
}

impl AlgorithmRun {
    pub fn final_errors(&self) -> SquaredErrors {
        *self.errors.last().expect("runs record at least one entry")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub scenario: Scenario,
    pub target_rejections: usize,
    pub bcrb_x: Option<f64>,
    /// Aligned with the configured algorithms; `Err` holds the failure message.
    pub runs: Vec<std::result::Result<AlgorithmRun, String>>,
}

fn mean_sensor_error(est: &[Vec2], truth: &[Vec2]) -> (f64, f64) {
    let n = truth.len() as f64;
    let sq: f64 = est.iter().zip(truth).map(|(e, t)| (e - t).norm_squared()).sum::<f64>() / n;
    let abs: f64 = est.iter().zip(truth).map(|(e, t)| (e - t).norm()).sum::<f64>() / n;
    (sq, abs)
}

fn state_errors(s: &Scenario, st: &PosteriorState) -> SquaredErrors {
    let est: Vec<Vec2> = st.sensors.iter().map(|b| b.mean).collect();
    let lam_true = 1.0 / s.delta0_sq_true;
    SquaredErrors {
        target: (st.target.mean - s.target_true).norm_squared(),
        sensors: mean_sensor_error(&est, &s.sensors_true).0,
        gamma: (st.gamma.mean - s.gamma_true).powi(2),
        lambda0_rel: ((st.lambda0.mean() - lam_true) / lam_true).powi(2),
    }
}

fn run_algorithm(cfg: &ExperimentConfig, alg: Algorithm, s: &Scenario, meas_seed: u64) -> Result<AlgorithmRun> {
    let r = sample_measurements(s, meas_seed);
    let priors = s.priors();
    let initial = PosteriorState::from_priors(&priors);
    let prior_means: Vec<Vec2> = priors.sensors.iter().map(|b| b.mean).collect();
    let (_, initial_sensor_error) = mean_sensor_error(&prior_means, &s.sensors_true);
    let start = Instant::now();
    let run = match alg {
        Algorithm::Jlce => {
            let traj = run_jlce(&priors, &r, &cfg.jlce_options())?;
            let conv = converged(&traj, cfg.threshold);
            let last = traj.last().expect("trajectory is never empty");
            let errors = if cfg.record_iterations {
                (0..=cfg.max_iter).map(|k| state_errors(s, &traj[k.min(traj.len() - 1)])).collect()
            } else {
                vec![state_errors(s, last)]
            };
            let est: Vec<Vec2> = last.sensors.iter().map(|b| b.mean).collect();
            AlgorithmRun {
                errors,
                iterations: last.iteration,
                converged: conv,
                initial_sensor_error,
                final_sensor_error: mean_sensor_error(&est, &s.sensors_true).1,
                seconds: 0.0,
            }
        }
        Algorithm::GaussNewtonMl | Algorithm::GridMap => {
            let (g, lam) = (priors.gamma.mean, priors.lambda0.mean());
            let x = if alg == Algorithm::GaussNewtonMl {
                let opts = GaussNewtonOptions {
                    divergence_step: cfg.field.norm(),
                    ..GaussNewtonOptions::default()
                };
                gauss_newton_ml(&r, &prior_means, g, lam, &priors.target.mean, &opts)?
            } else {
                grid_map(&r, &priors, &cfg.map_grid(&priors.target.mean), g, lam)?
            };
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::numerical("non-finite estimate"));
            }
            let mut st = initial.clone();
            st.target.mean = x;
            AlgorithmRun {
                errors: vec![state_errors(s, &st)],
                iterations: 0,
                converged: true,
                initial_sensor_error,
                final_sensor_error: initial_sensor_error,
                seconds: 0.0,
            }
        }
    };
    Ok(AlgorithmRun {
        seconds: start.elapsed().as_secs_f64(),
        ..run
    })
}

fn run_trial(cfg: &ExperimentConfig, t: u64) -> Result<TrialResult> {
    let (scenario, meas_seed, target_rejections) = cfg.draw_scenario(t);
    let bcrb_x = if cfg.bcrb {
        Some(bcrb_x(&fim_closed(&scenario, AppendixVariant::Exact)?).map_err(|e| Error::numerical(format!("trial {t}: {e}")))?)
    } else {
        None
    };
    let runs = cfg
        .algorithms
        .iter()
        .map(|alg| {
            run_algorithm(cfg, *alg, &scenario, meas_seed).map_err(|e| format!("trial {t}: {e}"))
        })
        .collect();
    Ok(TrialResult {
        scenario,
        target_rejections,
        bcrb_x,
        runs,
    })
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// √(mean of squares).
pub fn rmse(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("rmse of an empty list"));
    }
    Ok((compensated_sum(values.iter().map(|v| v * v)) / values.len() as f64).sqrt())
}

/// √(mean of squared norms).
pub fn rmse_vec(values: &[Vec2]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("rmse of an empty list"));
    }
    Ok((compensated_sum(values.iter().map(|v| v.norm_squared())) / values.len() as f64).sqrt())
}

/// RMSE with Monte Carlo uncertainty derived from the squared errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseSummary {
    pub n: usize,
    pub mse: f64,
    pub rmse: f64,
    pub se_mse: f64,
    /// Delta-method standard error of the RMSE.
    pub se_rmse: f64,
    /// 95% interval from the normal interval on the MSE.
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RmseSummary {
    pub fn from_squared(sq: &[f64]) -> Result<Self> {
        if sq.is_empty() {
            return Err(Error::domain("no successful trials to summarise"));
        }
        let n = sq.len() as f64;
        let mse = compensated_sum(sq.iter().copied()) / n;
        let var = if sq.len() > 1 {
            compensated_sum(sq.iter().map(|v| (v - mse).powi(2))) / (n - 1.0)
        } else {
            0.0
        };
        let se_mse = (var / n).sqrt();
        let rmse = mse.sqrt();
        Ok(Self {
            n: sq.len(),
            mse,
            rmse,
            se_mse,
            se_rmse: if rmse > 0.0 { se_mse / (2.0 * rmse) } else { 0.0 },
            ci_low: (mse - 1.96 * se_mse).max(0.0).sqrt(),
            ci_high: (mse + 1.96 * se_mse).sqrt(),
        })
    }
}

/// All trials of one configuration.
#[derive(Debug, Clone)]
pub struct TrialSet {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
}

impl TrialSet {
    fn algorithm_index(&self, alg: Algorithm) -> Result<usize> {
        self.config
            .algorithms
            .iter()
            .position(|a| *a == alg)
            .ok_or_else(|| Error::domain(format!("{} was not run", alg.name())))
    }

    /// Successful runs of one algorithm, in trial order.
    pub fn runs(&self, alg: Algorithm) -> Result<Vec<&AlgorithmRun>> {
        let k = self.algorithm_index(alg)?;
        Ok(self.trials.iter().filter_map(|t| t.runs[k].as_ref().ok()).collect())
    }

    pub fn failures(&self, alg: Algorithm) -> Result<Vec<&str>> {
        let k = self.algorithm_index(alg)?;
        Ok(self.trials.iter().filter_map(|t| t.runs[k].as_ref().err().map(|s| s.as_str())).collect())
    }

    fn squared(&self, alg: Algorithm, iteration: Option<usize>, pick: fn(&SquaredErrors) -> f64) -> Result<Vec<f64>> {
        Ok(self
            .runs(alg)?
            .iter()
            .map(|r| {
                let e = match iteration {
                    Some(k) => r.errors.get(k).copied().unwrap_or_else(|| r.final_errors()),
                    None => r.final_errors(),
                };
                pick(&e)
            })
            .collect())
    }

    /// Target RMSE of an algorithm at a recorded iteration (or the final estimate).
    pub fn target_summary(&self, alg: Algorithm, iteration: Option<usize>) -> Result<RmseSummary> {
        RmseSummary::from_squared(&self.squared(alg, iteration, |e| e.target)?)
    }

    pub fn summary(&self, alg: Algorithm, iteration: Option<usize>) -> Result<[RmseSummary; 4]> {
        Ok([
            RmseSummary::from_squared(&self.squared(alg, iteration, |e| e.target)?)?,
            RmseSummary::from_squared(&self.squared(alg, iteration, |e| e.sensors)?)?,
            RmseSummary::from_squared(&self.squared(alg, iteration, |e| e.gamma)?)?,
            RmseSummary::from_squared(&self.squared(alg, iteration, |e| e.lambda0_rel)?)?,
        ])
    }

    /// Mean of the per-trial position bounds.
    pub fn mean_bcrb(&self) -> Option<f64> {
        let v: Vec<f64> = self.trials.iter().filter_map(|t| t.bcrb_x).collect();
        if v.is_empty() {
            None
        } else {
            Some(compensated_sum(v.iter().copied()) / v.len() as f64)
        }
    }

    fn rows(&self, sweep_value: Option<f64>) -> Result<Vec<ResultRow>> {
        let bcrb = self.mean_bcrb();
        let mut rows = Vec::new();
        for &alg in &self.config.algorithms {
            let runs = self.runs(alg)?;
            let seconds = self.config.record_timing.then(|| compensated_sum(runs.iter().map(|r| r.seconds)));
            let iterations: Vec<Option<usize>> = if alg == Algorithm::Jlce && self.config.record_iterations {
                (0..=self.config.max_iter).map(Some).collect()
            } else {
                vec![None]
            };
            for it in iterations {
                let [t, s, g, l] = self.summary(alg, it)?;
                rows.push(ResultRow {
                    sweep_value,
                    algorithm: alg,
                    iteration: it,
                    rmse_target: t.rmse,
                    rmse_sensors: s.rmse,
                    rmse_gamma: g.rmse,
                    rmse_lambda0_rel: l.rmse,
                    bcrb_x: bcrb,
                    trials: t.n,
                    wall_time_s: seconds,
                });
            }
        }
        Ok(rows)
    }
}

/// Runs every trial of `config` (ignoring any sweep) and checks failure rates.
pub fn run_trials_detailed(config: &ExperimentConfig) -> Result<TrialSet> {
    config.validate()?;
    let results: Vec<Result<TrialResult>> = (0..config.trials as u64).into_par_iter().map(|t| run_trial(config, t)).collect();
    let trials = results.into_iter().collect::<Result<Vec<_>>>()?;
    let set = TrialSet {
        config: config.clone(),
        trials,
    };
    for &alg in &config.algorithms {
        let failures = set.failures(alg)?;
        if failures.len() as f64 > 0.01 * config.trials as f64 {
            return Err(Error::TooManyFailures {
                algorithm: alg.name().to_string(),
                failures: failures.len(),
                trials: config.trials,
                first: failures[0].to_string(),
            });
        }
    }
    Ok(set)
}

pub fn run_trials(config: &ExperimentConfig) -> Result<ResultTable> {
    Ok(ResultTable {
        rows: run_trials_detailed(config)?.rows(None)?,
    })
}

fn sweep_spec(config: &ExperimentConfig) -> Result<&Sweep> {
    config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Validation("sweep.param and sweep.values are required for a sweep".into()))
}

pub fn sweep_detailed(config: &ExperimentConfig) -> Result<Vec<(f64, TrialSet)>> {
    config.validate()?;
    let sw = sweep_spec(config)?;
    sw.values
        .iter()
        .map(|&v| Ok((v, run_trials_detailed(&config.with_value(sw.param, v))?)))
        .collect()
}

pub fn sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    let mut rows = Vec::new();
    for (v, set) in sweep_detailed(config)? {
        rows.extend(set.rows(Some(v))?);
    }
    Ok(ResultTable { rows })
}

/// Mean per-trial BCRB_x for every sweep value (or the base configuration).
pub fn bcrb_table(config: &ExperimentConfig) -> Result<Vec<(Option<f64>, f64)>> {
    config.validate()?;
    let points: Vec<(Option<f64>, ExperimentConfig)> = match &config.sweep {
        Some(sw) => sw.values.iter().map(|&v| (Some(v), config.with_value(sw.param, v))).collect(),
        None => vec![(None, config.clone())],
    };
    points
        .into_iter()
        .map(|(v, cfg)| {
            let bounds: Vec<Result<f64>> = (0..cfg.trials as u64)
                .into_par_iter()
                .map(|t| bcrb_x(&fim_closed(&cfg.draw_scenario(t).0, AppendixVariant::Exact)?))
                .collect();
            let bounds = bounds.into_iter().collect::<Result<Vec<_>>>()?;
            Ok((v, compensated_sum(bounds.iter().copied()) / bounds.len() as f64))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: Option<f64>,
    pub algorithm: Algorithm,
    /// `None` marks the final estimate.
    pub iteration: Option<usize>,
    pub rmse_target: f64,
    pub rmse_sensors: f64,
    pub rmse_gamma: f64,
    pub rmse_lambda0_rel: f64,
    pub bcrb_x: Option<f64>,
    pub trials: usize,
    pub wall_time_s: Option<f64>,
}

pub const CSV_HEADER: &str =
    "sweep_value,algorithm,iteration,rmse_target_m,rmse_sensors_m,rmse_gamma,rmse_lambda0_rel,bcrb_x_m2,trials,wall_time_s";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let iteration = r.iteration.map_or_else(|| "final".to_string(), |k| k.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                opt(r.sweep_value),
                r.algorithm.name(),
                iteration,
                r.rmse_target,
                r.rmse_sensors,
                r.rmse_gamma,
                r.rmse_lambda0_rel,
                opt(r.bcrb_x),
                r.trials,
                opt(r.wall_time_s)
            );
        }
        out
    }

    pub fn find(&self, sweep_value: Option<f64>, alg: Algorithm, iteration: Option<usize>) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.algorithm == alg && r.iteration == iteration)
    }
}
