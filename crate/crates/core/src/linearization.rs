//! First-order expansion terms shared by the belief updates.
//!
//! With `h₁ = γ ln d_i` and `h₂ = (r_i − d_i)/d_i^{γ/2}` the per-range
//! log-likelihood is `−½h₁ − ½Λ₀h₂²` up to constants.

use crate::model::MIN_DISTANCE;
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaLinearization {
    /// Standardised residual `(r − d)/d^{γ/2}`.
    pub g: f64,
    /// `∂g/∂γ = −½(r − d) d^{−γ/2} ln d`.
    pub delta_gamma: f64,
}

pub fn gamma_linearize(r: f64, d: f64, gamma: f64) -> Result<GammaLinearization> {
    if !(d > 0.0) {
        return Err(Error::domain(format!("gamma linearization at non-positive distance {d}")));
    }
    let g = (r - d) * d.powf(-0.5 * gamma);
    Ok(GammaLinearization {
        g,
        delta_gamma: -0.5 * g * d.ln(),
    })
}

/// Gradients with respect to the target position. For the sensor position
/// every gradient flips sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionLinearization {
    /// `∂d/∂x = (x − x_i)/d`.
    pub unit: Vec2,
    /// `∇ₓ(γ ln d) = γ·unit/d`.
    pub omega: Vec2,
    /// `h₂` at the expansion point.
    pub upsilon: f64,
    /// `∇ₓh₂ = −[(1 + ½γ(r − d)/d)/d^{γ/2}]·unit`.
    pub gamma_grad: Vec2,
    pub d: f64,
}

pub fn position_linearize(x: &Vec2, xi: &Vec2, r: f64, gamma: f64) -> Result<PositionLinearization> {
    let diff = x - xi;
    let d = diff.norm();
    if d < MIN_DISTANCE || !d.is_finite() {
        return Err(Error::domain(format!("target and sensor coincide (d = {d:e})")));
    }
    let unit = diff / d;
    let scale = d.powf(-0.5 * gamma);
    let res = r - d;
    Ok(PositionLinearization {
        unit,
        omega: unit * (gamma / d),
        upsilon: res * scale,
        gamma_grad: -unit * ((1.0 + 0.5 * gamma * res / d) * scale),
        d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn g_of(r: f64, d: f64, gamma: f64) -> f64 {
        (r - d) / d.powf(gamma / 2.0)
    }

    fn h2(x: &Vec2, xi: &Vec2, r: f64, gamma: f64) -> f64 {
        let d = (x - xi).norm();
        (r - d) / d.powf(gamma / 2.0)
    }

    fn fd_grad(f: impl Fn(&Vec2) -> f64, x: &Vec2, h: f64) -> Vec2 {
        let ex = Vec2::new(h, 0.0);
        let ey = Vec2::new(0.0, h);
        Vec2::new((f(&(x + ex)) - f(&(x - ex))) / (2.0 * h), (f(&(x + ey)) - f(&(x - ey))) / (2.0 * h))
    }

    #[test]
    fn gamma_examples() {
        let z = gamma_linearize(5.0, 5.0, 2.7).unwrap();
        assert_eq!((z.g, z.delta_gamma), (0.0, 0.0));
        let z = gamma_linearize(2.0, 1.0, 3.0).unwrap();
        assert_eq!(z.g, 1.0);
        assert_eq!(z.delta_gamma, 0.0);
        assert!(gamma_linearize(1.0, 0.0, 3.0).is_err());
    }

    #[test]
    fn gamma_derivative_matches_fd() {
        let (r, d, g) = (11.0, 10.0, 2.0);
        let h = 1e-5;
        let fd = (g_of(r, d, g + h) - g_of(r, d, g - h)) / (2.0 * h);
        assert_relative_eq!(gamma_linearize(r, d, g).unwrap().delta_gamma, fd, max_relative = 1e-8);
    }

    #[test]
    fn position_example() {
        let p = position_linearize(&Vec2::new(1.0, 0.0), &Vec2::zeros(), 1.0, 2.0).unwrap();
        assert_eq!(p.unit, Vec2::new(1.0, 0.0));
        assert_eq!(p.omega, Vec2::new(2.0, 0.0));
        assert_eq!(p.upsilon, 0.0);
        assert_eq!(p.gamma_grad, Vec2::new(-1.0, 0.0));
        assert!(position_linearize(&Vec2::new(3.0, 3.0), &Vec2::new(3.0, 3.0), 1.0, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn zero_residual_gradient(px in -50.0f64..50.0, py in -50.0f64..50.0, g in 0.5f64..5.0) {
            let x = Vec2::new(px, py);
            let xi = Vec2::new(3.0, -7.0);
            let d = (x - xi).norm();
            prop_assume!(d > 1e-3);
            let p = position_linearize(&x, &xi, d, g).unwrap();
            let expect = -p.unit / d.powf(g / 2.0);
            prop_assert!((p.gamma_grad - expect).norm() <= 1e-14 * expect.norm());
            prop_assert!((p.unit.norm() - 1.0).abs() < 1e-14);
        }

        #[test]
        fn gradients_match_fd(px in 0.0f64..100.0, py in 0.0f64..100.0, sx in 0.0f64..100.0, sy in 0.0f64..100.0,
                              noise in -3.0f64..3.0, g in 1.5f64..4.5) {
            let x = Vec2::new(px, py);
            let xi = Vec2::new(sx, sy);
            let d = (x - xi).norm();
            prop_assume!(d > 1.0);
            let r = d + noise;
            let p = position_linearize(&x, &xi, r, g).unwrap();
            let h = 1e-6 * d.max(1.0);
            let w = fd_grad(|y| g * (y - xi).norm().ln(), &x, h);
            prop_assert!((p.omega - w).norm() <= 1e-6 * p.omega.norm());
            let gg = fd_grad(|y| h2(y, &xi, r, g), &x, h);
            // the bracket (1 + ½γ(r−d)/d) can cancel; measure against its terms' size
            let scale = (1.0 + (0.5 * g * noise / d).abs()) / d.powf(g / 2.0);
            prop_assert!((p.gamma_grad - gg).norm() <= 1e-6 * scale);
            // sensor-side gradients are the negations
            let ws = fd_grad(|y| g * (x - y).norm().ln(), &xi, h);
            prop_assert!((p.omega + ws).norm() <= 1e-6 * p.omega.norm());
            let gs = fd_grad(|y| h2(&x, y, r, g), &xi, h);
            prop_assert!((p.gamma_grad + gs).norm() <= 1e-6 * scale);
        }

        #[test]
        fn gamma_delta_matches_fd(d in 0.1f64..150.0, noise in -5.0f64..5.0, g in 1.0f64..5.0) {
            let r = d + noise;
            let z = gamma_linearize(r, d, g).unwrap();
            let h = 1e-6 * g;
            let fd = (g_of(r, d, g + h) - g_of(r, d, g - h)) / (2.0 * h);
            prop_assert!((z.delta_gamma - fd).abs() <= 1e-6 * z.delta_gamma.abs().max(1e-3 * z.g.abs()));
        }
    }
}
