//! The sextic family `V(x) = (x^6 + 2x^4 - 2(2λ+1)x^2) / 2` and its geometry.

use crate::error::{Error, Result};

/// Coupling plus numerical tolerances identifying one member of the family.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub tol_energy: f64,
    pub tol_quad: f64,
}

impl ModelParams {
    pub const DEFAULT_TOL_ENERGY: f64 = 1e-10;
    pub const DEFAULT_TOL_QUAD: f64 = 1e-16;

    pub fn new(lambda: f64) -> Result<Self> {
        Self::with_tolerances(lambda, Self::DEFAULT_TOL_ENERGY, Self::DEFAULT_TOL_QUAD)
    }

    pub fn with_tolerances(lambda: f64, tol_energy: f64, tol_quad: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite, got {lambda}")));
        }
        if !(tol_energy > 0.0) || !(tol_quad > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerances must be positive (tol_energy = {tol_energy}, tol_quad = {tol_quad})"
            )));
        }
        Ok(Self {
            lambda,
            tol_energy,
            tol_quad,
        })
    }

    /// Coefficient of `x^2` in `V`, i.e. `-(2λ+1)`.
    pub fn quadratic_coefficient(&self) -> f64 {
        -(2.0 * self.lambda + 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct WellGeometry {
    /// `(x-, x+)`; both zero for the single well.
    pub minima_positions: (f64, f64),
    pub minima_value: f64,
    pub barrier_value: f64,
    pub is_double_well: bool,
}

pub fn evaluate(params: &ModelParams, x: f64) -> f64 {
    let x2 = x * x;
    0.5 * x2 * (x2 * (x2 + 2.0) + 2.0 * params.quadratic_coefficient())
}

/// `dV/dx = 3x^5 + 4x^3 - 2(2λ+1)x`.
pub fn derivative(params: &ModelParams, x: f64) -> f64 {
    let x2 = x * x;
    x * (3.0 * x2 * x2 + 4.0 * x2 + 2.0 * params.quadratic_coefficient())
}

/// `d²V/dx² = 15x^4 + 12x^2 - 2(2λ+1)`.
pub fn second_derivative(params: &ModelParams, x: f64) -> f64 {
    let x2 = x * x;
    15.0 * x2 * x2 + 12.0 * x2 + 2.0 * params.quadratic_coefficient()
}

pub fn geometry(params: &ModelParams) -> WellGeometry {
    // stationary points: x = 0 or 3t^2 + 4t - 2(2λ+1) = 0 with t = x^2
    if params.lambda > -0.5 {
        let c = 2.0 * (2.0 * params.lambda + 1.0);
        // positive root written to avoid cancellation for small c
        let t = 2.0 * c / (4.0 + (16.0 + 12.0 * c).sqrt());
        let xp = t.sqrt();
        WellGeometry {
            minima_positions: (-xp, xp),
            minima_value: evaluate(params, xp),
            barrier_value: 0.0,
            is_double_well: true,
        }
    } else {
        WellGeometry {
            minima_positions: (0.0, 0.0),
            minima_value: 0.0,
            barrier_value: 0.0,
            is_double_well: false,
        }
    }
}

/// Large-λ estimate `x± ≈ √2 (λ/3)^{1/4}`.
pub fn asymptotic_minimum_position(lambda: f64) -> f64 {
    2f64.sqrt() * (lambda / 3.0).powf(0.25)
}

/// Large-λ estimate `V(x±) ≈ (4/9) λ (3 - 2√(3λ))`.
pub fn asymptotic_minimum_value(lambda: f64) -> f64 {
    4.0 / 9.0 * lambda * (3.0 - 2.0 * (3.0 * lambda).sqrt())
}

/// Outermost classical turning point at energy `e` (`V(x) = e`, `x > 0`).
pub fn outer_turning_point(params: &ModelParams, e: f64) -> f64 {
    let geo = geometry(params);
    let mut lo = geo.minima_positions.1;
    if e <= geo.minima_value {
        return lo;
    }
    let mut hi = lo.max(1.0);
    while evaluate(params, hi) < e {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if evaluate(params, mid) < e {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(lambda: f64) -> ModelParams {
        ModelParams::new(lambda).unwrap()
    }

    #[test]
    fn barrier_top_is_zero() {
        for l in [-0.75, 0.0, 2.0, 6.0] {
            assert_eq!(evaluate(&p(l), 0.0), 0.0);
        }
    }

    #[test]
    fn direct_arithmetic_value() {
        assert_relative_eq!(evaluate(&p(0.5), 1.0), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(f64::NAN).is_err());
        assert!(ModelParams::new(f64::INFINITY).is_err());
        assert!(ModelParams::with_tolerances(1.0, 0.0, 1e-16).is_err());
        assert!(ModelParams::with_tolerances(1.0, 1e-10, -1.0).is_err());
    }

    #[test]
    fn single_well_below_minus_half() {
        let g = geometry(&p(-0.75));
        assert!(!g.is_double_well);
        assert_eq!(g.minima_positions, (0.0, 0.0));
        // the boundary merges the minima at the origin
        assert!(!geometry(&p(-0.5)).is_double_well);
        assert!(geometry(&p(-0.4999)).is_double_well);
    }

    #[test]
    fn minimum_at_lambda_six() {
        let params = p(6.0);
        let g = geometry(&params);
        // quadratic formula in t = x^2 for 3t^2 + 4t - 26 = 0
        let t = (-4.0 + (16.0f64 + 12.0 * 26.0).sqrt()) / 6.0;
        assert_relative_eq!(g.minima_positions.1, t.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(g.minima_positions.1, 1.5336, epsilon = 1e-4);
        assert_eq!(g.minima_positions.0, -g.minima_positions.1);
        let asym = asymptotic_minimum_position(6.0);
        assert_relative_eq!(asym, 1.682, epsilon = 1e-3);
        assert!((g.minima_positions.1 - asym).abs() / asym < 0.10);
        assert!(g.minima_value < 0.0);
        // large-λ depth estimate is the right order of magnitude already at λ = 6
        let est = asymptotic_minimum_value(6.0);
        assert!(est < 0.0 && (g.minima_value / est) > 0.5 && (g.minima_value / est) < 1.5);
    }

    #[test]
    fn minima_are_stationary() {
        for l in [-0.45, 0.0, 0.7, 3.0, 6.0, 50.0] {
            let params = p(l);
            let xp = geometry(&params).minima_positions.1;
            let h = 1e-5;
            let fd = (evaluate(&params, xp + h) - evaluate(&params, xp - h)) / (2.0 * h);
            assert!(derivative(&params, xp).abs() < 1e-12 * (1.0 + l.abs()), "λ = {l}");
            assert!(fd.abs() < 1e-6 * (1.0 + l.abs()));
            assert!(evaluate(&params, xp) < 0.0);
        }
    }

    #[test]
    fn asymptote_error_shrinks() {
        let errs: Vec<f64> = [10.0, 1e2, 1e3, 1e4]
            .iter()
            .map(|&l| {
                let x = geometry(&p(l)).minima_positions.1;
                (x / asymptotic_minimum_position(l) - 1.0).abs()
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[3] < 0.02);
    }

    #[test]
    fn turning_point_solves_v_equals_e() {
        let params = p(2.0);
        let x = outer_turning_point(&params, 3.0);
        assert_relative_eq!(evaluate(&params, x), 3.0, epsilon = 1e-10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn potential_is_even(l in -5.0f64..20.0, x in -5.0f64..5.0) {
                let params = ModelParams::new(l).unwrap();
                prop_assert_eq!(evaluate(&params, x), evaluate(&params, -x));
            }
        }
    }
}
