//! Bayesian Fisher information over Θ = [x, x_1..x_N, γ, Λ₀] and the Schur
//! complement bound on the target position.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::model::{distance, Scenario};
use crate::linearization::position_linearize;
use crate::{Error, Mat2, Result, Vec2};

type Mat6 = SMatrix<f64, 6, 6>;
type Vec6 = SVector<f64, 6>;

/// Draws closer than this to a sensor are rejected by the Monte Carlo FIM.
pub const MC_REJECT_RADIUS: f64 = 1.0;

fn fd_step(mean: f64) -> f64 {
    1e-5 * mean.abs().max(1.0)
}

/// Second-order approximation `f(m) + ½f''(m)·v` with a central-difference
/// second derivative.
pub fn taylor_expectation(f: impl Fn(f64) -> f64, mean: f64, variance: f64) -> Result<f64> {
    let h = fd_step(mean);
    let (lo, mid, hi) = (f(mean - h), f(mean), f(mean + h));
    if !(lo.is_finite() && mid.is_finite() && hi.is_finite()) {
        return Err(Error::numerical(format!("non-finite function value near {mean}")));
    }
    Ok(mid + 0.5 * (hi - 2.0 * mid + lo) / (h * h) * variance)
}

/// Assembled symmetric information matrix, ordered `[x(2), x_1..x_N(2N), γ, Λ₀]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FimMatrix {
    pub n_sensors: usize,
    pub matrix: DMatrix<f64>,
}

/// Which cross terms to use for the measurement blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AppendixVariant {
    /// Fisher information of one Gaussian range with mean d and variance d^γ/Λ₀.
    #[default]
    Exact,
    /// As printed: x–x_i uses `(2Λ₀ − γ²d^{γ−2})/(2d^γ)` and x–Λ₀ has the opposite sign.
    Printed,
}

impl FimMatrix {
    pub fn zeros(n_sensors: usize) -> Self {
        let dim = 2 * n_sensors + 4;
        Self {
            n_sensors,
            matrix: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.n_sensors + 4
    }

    pub fn gamma_index(&self) -> usize {
        2 * self.n_sensors + 2
    }

    pub fn lambda_index(&self) -> usize {
        2 * self.n_sensors + 3
    }

    pub fn j_x(&self) -> Mat2 {
        Mat2::from_fn(|i, j| self.matrix[(i, j)])
    }

    /// Cross block between x and the remaining parameters, (2N+2)×2.
    pub fn j_x_rest(&self) -> DMatrix<f64> {
        self.matrix.view((2, 0), (self.dim() - 2, 2)).into_owned()
    }

    pub fn j_rest(&self) -> DMatrix<f64> {
        let n = self.dim() - 2;
        self.matrix.view((2, 2), (n, n)).into_owned()
    }

    pub fn add(&self, other: &FimMatrix) -> FimMatrix {
        FimMatrix {
            n_sensors: self.n_sensors,
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn scale(&self, s: f64) -> FimMatrix {
        FimMatrix {
            n_sensors: self.n_sensors,
            matrix: &self.matrix * s,
        }
    }

    fn add_sensor_block(&mut self, i: usize, block: &Mat6) {
        let idx = [0, 1, 2 + 2 * i, 3 + 2 * i, self.gamma_index(), self.lambda_index()];
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                self.matrix[(ia, ib)] += block[(a, b)];
            }
        }
    }

    /// Named sub-blocks, used for reporting.
    pub fn blocks(&self) -> Vec<(&'static str, DMatrix<f64>)> {
        let n = self.n_sensors;
        let (g, l) = (self.gamma_index(), self.lambda_index());
        let v = |r0: usize, c0: usize, nr: usize, nc: usize| self.matrix.view((r0, c0), (nr, nc)).into_owned();
        vec![
            ("x,x", v(0, 0, 2, 2)),
            ("x,sensors", v(0, 2, 2, 2 * n)),
            ("x,gamma", v(0, g, 2, 1)),
            ("x,lambda0", v(0, l, 2, 1)),
            ("sensors,sensors", v(2, 2, 2 * n, 2 * n)),
            ("sensors,gamma", v(2, g, 2 * n, 1)),
            ("sensors,lambda0", v(2, l, 2 * n, 1)),
            ("gamma,gamma", v(g, g, 1, 1)),
            ("gamma,lambda0", v(g, l, 1, 1)),
            ("lambda0,lambda0", v(l, l, 1, 1)),
        ]
    }
}

/// Relative Frobenius distance ‖a − b‖/‖b‖.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let nb = b.norm();
    if nb == 0.0 {
        (a - b).norm()
    } else {
        (a - b).norm() / nb
    }
}

/// Per-block relative Frobenius deltas of `a` against the reference `b`.
pub fn block_deltas(a: &FimMatrix, b: &FimMatrix) -> Vec<(&'static str, f64)> {
    a.blocks()
        .into_iter()
        .zip(b.blocks())
        .map(|((name, x), (_, y))| (name, relative_frobenius(&x, &y)))
        .collect()
}

fn inverse2(m: &Mat2) -> Result<Mat2> {
    m.try_inverse().ok_or_else(|| Error::numerical("singular 2×2 covariance"))
}

/// Prior information: Σ⁻¹, Σ_i⁻¹, 1/δ_γ and the Gamma curvature (a−1)E[Λ₀⁻²].
pub fn fim_prior_blocks(scenario: &Scenario) -> Result<FimMatrix> {
    let n = scenario.n_sensors();
    let mut j = FimMatrix::zeros(n);
    let sx = inverse2(&scenario.target_prior_cov)?;
    for a in 0..2 {
        for b in 0..2 {
            j.matrix[(a, b)] = sx[(a, b)];
        }
    }
    for (i, c) in scenario.sensor_prior_cov.iter().enumerate() {
        let si = inverse2(c)?;
        for a in 0..2 {
            for b in 0..2 {
                j.matrix[(2 + 2 * i + a, 2 + 2 * i + b)] = si[(a, b)];
            }
        }
    }
    let (g, l) = (j.gamma_index(), j.lambda_index());
    j.matrix[(g, g)] = 1.0 / scenario.gamma_prior.variance;
    j.matrix[(l, l)] = gamma_prior_curvature(scenario.lambda_prior.shape, scenario.lambda_prior.rate)?;
    Ok(j)
}

/// (a−1)·E[Λ⁻²] for Λ ~ Gamma(a, b), which equals b²/(a−2).
pub fn gamma_prior_curvature(shape: f64, rate: f64) -> Result<f64> {
    if shape <= 2.0 {
        return Err(Error::domain(format!(
            "Gamma prior with shape {shape} ≤ 2 has unbounded expected curvature"
        )));
    }
    Ok(rate * rate / (shape - 2.0))
}

/// Conditional information of a single range about (x, x_i, γ, Λ₀) at `z`.
fn range_information(z: &Vec6, variant: AppendixVariant) -> Mat6 {
    let x = Vec2::new(z[0], z[1]);
    let s = Vec2::new(z[2], z[3]);
    let (g, lam) = (z[4], z[5]);
    let d = distance(&x, &s);
    let u = (x - s) / d;
    let m = Vec6::new(u.x, u.y, -u.x, -u.y, 0.0, 0.0);
    let ln_var = Vec6::new(g * u.x / d, g * u.y / d, -g * u.x / d, -g * u.y / d, d.ln(), -1.0 / lam);
    let mut f = m * m.transpose() * (lam / d.powf(g)) + ln_var * ln_var.transpose() * 0.5;
    if variant == AppendixVariant::Printed {
        let uu = u * u.transpose();
        let cross = uu * -(lam / d.powf(g) - g * g / (2.0 * d * d));
        let xl = u * (g / (2.0 * d * lam));
        for a in 0..2 {
            for b in 0..2 {
                f[(a, 2 + b)] = cross[(a, b)];
                f[(2 + b, a)] = cross[(a, b)];
            }
            f[(a, 5)] = xl[a];
            f[(5, a)] = xl[a];
            f[(2 + a, 5)] = -xl[a];
            f[(5, 2 + a)] = -xl[a];
        }
    }
    f
}

/// Coordinate-wise second-order expectation of a matrix-valued function.
fn taylor_expectation_block(f: impl Fn(&Vec6) -> Mat6, mean: &Vec6, var: &Vec6) -> Result<Mat6> {
    let f0 = f(mean);
    let mut acc = f0;
    for k in 0..6 {
        if var[k] == 0.0 {
            continue;
        }
        let h = fd_step(mean[k]);
        let mut up = *mean;
        let mut dn = *mean;
        up[k] += h;
        dn[k] -= h;
        acc += (f(&up) - f0 * 2.0 + f(&dn)) * (0.5 * var[k] / (h * h));
    }
    if !acc.iter().all(|v| v.is_finite()) {
        return Err(Error::numerical("non-finite expected information"));
    }
    Ok(acc)
}

/// Measurement information with expectations over Θ taken by the
/// second-order Taylor rule around the prior means.
pub fn fim_measurement_closed(scenario: &Scenario, variant: AppendixVariant) -> Result<FimMatrix> {
    let n = scenario.n_sensors();
    let mut j = FimMatrix::zeros(n);
    let xm = scenario.target_prior_mean;
    let lam = scenario.lambda_prior;
    for i in 0..n {
        let sm = scenario.sensor_prior_means[i];
        if distance(&xm, &sm) < crate::model::MIN_DISTANCE {
            return Err(Error::domain(format!("target prior mean coincides with sensor {i}")));
        }
        let sc = &scenario.sensor_prior_cov[i];
        let tc = &scenario.target_prior_cov;
        let mean = Vec6::new(xm.x, xm.y, sm.x, sm.y, scenario.gamma_prior.mean, lam.mean());
        let var = Vec6::new(tc[(0, 0)], tc[(1, 1)], sc[(0, 0)], sc[(1, 1)], scenario.gamma_prior.variance, lam.variance());
        let block = taylor_expectation_block(|z| range_information(z, variant), &mean, &var)?;
        j.add_sensor_block(i, &block);
    }
    Ok(j)
}

/// Prior plus closed-form measurement information.
pub fn fim_closed(scenario: &Scenario, variant: AppendixVariant) -> Result<FimMatrix> {
    Ok(fim_prior_blocks(scenario)?.add(&fim_measurement_closed(scenario, variant)?))
}

/// Score ∇_Θ ln p(r | Θ) at one parameter draw.
pub fn score(r: &[f64], x: &Vec2, sensors: &[Vec2], gamma: f64, lambda0: f64) -> Result<DVector<f64>> {
    let n = sensors.len();
    let mut s = DVector::zeros(2 * n + 4);
    for (i, (ri, xi)) in r.iter().zip(sensors).enumerate() {
        let lin = position_linearize(x, xi, *ri, gamma)?;
        // ∇ₓ of −½γ ln d − ½Λ₀h₂²
        let gx = -lin.omega * 0.5 - lin.gamma_grad * (lambda0 * lin.upsilon);
        s[0] += gx.x;
        s[1] += gx.y;
        s[2 + 2 * i] = -gx.x;
        s[3 + 2 * i] = -gx.y;
        let w = (ri - lin.d).powi(2) / lin.d.powf(gamma);
        s[2 * n + 2] += -0.5 * lin.d.ln() + 0.5 * lambda0 * w * lin.d.ln();
        s[2 * n + 3] += 0.5 / lambda0 - 0.5 * w;
    }
    Ok(s)
}

const MC_CHUNK: usize = 10_000;

/// Monte Carlo estimate of E[score·scoreᵀ] under prior × likelihood.
pub fn fim_measurement_mc(scenario: &Scenario, samples: usize, seed: u64) -> Result<FimMatrix> {
    if samples == 0 {
        return Err(Error::domain("at least one Monte Carlo sample is required"));
    }
    let n = scenario.n_sensors();
    let dim = 2 * n + 4;
    let lam = scenario.lambda_prior;
    let gamma_dist = Gamma::new(lam.shape, 1.0 / lam.rate).map_err(|e| Error::domain(e.to_string()))?;
    let chol_t = scenario
        .target_prior_cov
        .cholesky()
        .ok_or_else(|| Error::domain("target prior covariance is not positive-definite"))?
        .l();
    let chol_s: Vec<Mat2> = scenario
        .sensor_prior_cov
        .iter()
        .map(|c| c.cholesky().map(|c| c.l()).ok_or_else(|| Error::domain("sensor prior covariance is not positive-definite")))
        .collect::<Result<_>>()?;
    let chunks: Vec<(usize, usize)> = (0..samples.div_ceil(MC_CHUNK))
        .map(|c| (c, MC_CHUNK.min(samples - c * MC_CHUNK)))
        .collect();
    let parts: Vec<Result<(DMatrix<f64>, usize)>> = chunks
        .par_iter()
        .map(|&(c, count)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut acc = DMatrix::zeros(dim, dim);
            let mut rejected = 0usize;
            let mut accepted = 0usize;
            let normal2 = |rng: &mut ChaCha8Rng| Vec2::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
            while accepted < count {
                let x = scenario.target_prior_mean + chol_t * normal2(&mut rng);
                let sensors: Vec<Vec2> = scenario
                    .sensor_prior_means
                    .iter()
                    .zip(&chol_s)
                    .map(|(m, l)| m + l * normal2(&mut rng))
                    .collect();
                let z: f64 = StandardNormal.sample(&mut rng);
                let g = scenario.gamma_prior.mean + scenario.gamma_prior.variance.sqrt() * z;
                let l = gamma_dist.sample(&mut rng);
                if sensors.iter().any(|s| distance(&x, s) < MC_REJECT_RADIUS) {
                    rejected += 1;
                    if rejected > count {
                        return Err(Error::numerical(format!(
                            "Monte Carlo FIM rejected more draws than it accepted in chunk {c}"
                        )));
                    }
                    continue;
                }
                let r: Vec<f64> = sensors
                    .iter()
                    .map(|s| {
                        let d = distance(&x, s);
                        let e: f64 = StandardNormal.sample(&mut rng);
                        d + (d.powf(g) / l).sqrt() * e
                    })
                    .collect();
                let sc = score(&r, &x, &sensors, g, l)?;
                acc.ger(1.0, &sc, &sc, 1.0);
                accepted += 1;
            }
            Ok((acc, rejected))
        })
        .collect();
    let mut total = DMatrix::zeros(dim, dim);
    let mut rejected = 0;
    for p in parts {
        let (m, rj) = p?;
        total += m;
        rejected += rj;
    }
    if rejected as f64 > 0.01 * samples as f64 {
        return Err(Error::numerical(format!("Monte Carlo FIM rejected {rejected} of {samples} draws")));
    }
    Ok(FimMatrix {
        n_sensors: n,
        matrix: total / samples as f64,
    })
}

/// tr[(J_x − J_{x,r}ᵀ J_r⁻¹ J_{x,r})⁻¹] in m².
pub fn bcrb_x(fim: &FimMatrix) -> Result<f64> {
    let rest = fim.j_rest();
    let cross = fim.j_x_rest();
    let chol = rest
        .cholesky()
        .ok_or_else(|| Error::numerical("information of the nuisance parameters is not positive-definite"))?;
    let solved = chol.solve(&cross);
    let correction = cross.transpose() * solved;
    let schur = fim.j_x() - Mat2::from_fn(|i, j| correction[(i, j)]);
    let inv = schur
        .try_inverse()
        .ok_or_else(|| Error::numerical("position Schur complement is singular"))?;
    let t = inv.trace();
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::numerical(format!("position bound is not positive ({t})")));
    }
    Ok(t)
}
