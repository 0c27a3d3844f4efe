//! Leading-order semiclassics in the rescaled coordinate `x = λ^{1/4} y`, `E = λ^{3/2} ε`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

pub const DEFAULT_MIN_LAMBDA: f64 = 10.0;
const NODES: usize = 96;

/// Minimum of the rescaled potential, `-8 / (3√3)`.
pub fn rescaled_minimum() -> f64 {
    -8.0 / (3.0 * 3f64.sqrt())
}

/// `U(y) = (y^6 - 4y^2) / 2`.
pub fn rescaled_potential(y: f64) -> f64 {
    let y2 = y * y;
    0.5 * y2 * (y2 * y2 - 4.0)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct WkbResult {
    pub n: usize,
    pub lambda: f64,
    pub epsilon_n: f64,
    pub energy: f64,
    /// Inner and outer turning points of the right well.
    pub turning_points: (f64, f64),
    /// Barrier action in physical units, `λ` times the rescaled action.
    pub action: f64,
    pub splitting_estimate: f64,
}

fn check_band(epsilon: f64) -> Result<()> {
    if !(epsilon > rescaled_minimum() && epsilon < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rescaled energy {epsilon} outside the trapped band ({}, 0)",
            rescaled_minimum()
        )));
    }
    Ok(())
}

/// Positive roots `y1 < y2` of `y^6 - 4y^2 = 2ε` for `ε` in the trapped band.
pub fn turning_points(epsilon: f64) -> Result<(f64, f64)> {
    check_band(epsilon)?;
    // t = y^2 solves t^3 - 4t - 2ε = 0; trigonometric form for three real roots
    let r = 4.0 / 3f64.sqrt();
    let arg = (3.0 * 3f64.sqrt() * epsilon / 8.0).clamp(-1.0, 1.0);
    let phi = arg.acos() / 3.0;
    let refine = |mut t: f64| {
        let f = t * t * t - 4.0 * t - 2.0 * epsilon;
        let d = 3.0 * t * t - 4.0;
        if d != 0.0 {
            t -= f / d;
        }
        t.max(0.0)
    };
    let outer = refine(r * phi.cos());
    let inner = refine(r * (phi - 2.0 * PI / 3.0).cos());
    Ok((inner.sqrt(), outer.sqrt()))
}

/// `∫_a^b sqrt(g(y)) dy` with `g` vanishing at both ends, via `y = m - h cos θ`.
fn endpoint_integral<G: Fn(f64) -> f64>(a: f64, b: f64, g: G) -> f64 {
    let (t, w) = gauss_legendre(NODES);
    let m = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for (ti, wi) in t.iter().zip(&w) {
        let theta = 0.5 * PI * (ti + 1.0);
        let y = m - h * theta.cos();
        s += wi * g(y).max(0.0).sqrt() * theta.sin();
    }
    s * h * 0.5 * PI
}

/// `∫ sqrt(2ε - (y^6 - 4y^2)) dy` across the right well.
pub fn well_action(epsilon: f64) -> Result<f64> {
    let (y1, y2) = turning_points(epsilon)?;
    Ok(endpoint_integral(y1, y2, |y| 2.0 * (epsilon - rescaled_potential(y))))
}

fn well_action_at_top() -> f64 {
    endpoint_integral(0.0, 2f64.sqrt(), |y| -2.0 * rescaled_potential(y))
}

/// Rescaled barrier action `∫ sqrt(y^6 - 4y^2 - 2ε) dy` over `[-y1, y1]` and `e^{-S}`.
pub fn splitting(epsilon: f64) -> Result<(f64, f64)> {
    let (y1, _) = turning_points(epsilon)?;
    let s = endpoint_integral(-y1, y1, |y| 2.0 * (rescaled_potential(y) - epsilon));
    Ok((s, (-s).exp()))
}

pub fn quantize(n: usize, lambda: f64) -> Result<WkbResult> {
    quantize_with_guard(n, lambda, DEFAULT_MIN_LAMBDA)
}

pub fn quantize_with_guard(n: usize, lambda: f64, min_lambda: f64) -> Result<WkbResult> {
    if !(lambda >= min_lambda) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "semiclassical quantization needs λ ≥ {min_lambda}, got {lambda}"
        )));
    }
    let target = (n as f64 + 0.5) * PI / lambda;
    if target >= well_action_at_top() {
        return Err(Error::NotTrapped(n));
    }
    let mut lo = rescaled_minimum();
    let mut hi = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let a = well_action(mid)?;
        if a < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let epsilon = 0.5 * (lo + hi);
    let (s, _) = splitting(epsilon)?;
    Ok(WkbResult {
        n,
        lambda,
        epsilon_n: epsilon,
        energy: lambda.powf(1.5) * epsilon,
        turning_points: turning_points(epsilon)?,
        action: lambda * s,
        splitting_estimate: (-lambda * s).exp(),
    })
}

/// Deep single-well limit `√|λ| (1 + 2n)`.
pub fn harmonic_limit(n: usize, lambda: f64) -> Result<f64> {
    if !(lambda < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "harmonic limit needs λ < 0, got {lambda}"
        )));
    }
    Ok(lambda.abs().sqrt() * (1.0 + 2.0 * n as f64))
}
