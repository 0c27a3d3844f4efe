//! Quartic-weight moments, composite Gauss–Legendre rules and tail-driven truncation.

use crate::error::{Error, Result};

const GAMMA_QUARTER: f64 = 3.625_609_908_221_908;
const GAMMA_THREE_QUARTERS: f64 = 1.225_416_702_465_177_6;

pub const DEFAULT_PANELS: usize = 128;
pub const DEFAULT_ORDER: usize = 16;

/// `ln Γ((q+1)/4)` for even `q ≥ 0`.
pub(crate) fn ln_gamma_quarter(q: usize) -> f64 {
    debug_assert!(q.is_multiple_of(2));
    let (mut z, mut acc) = if q.is_multiple_of(4) {
        (0.25, GAMMA_QUARTER.ln())
    } else {
        (0.75, GAMMA_THREE_QUARTERS.ln())
    };
    let target = (q as f64 + 1.0) / 4.0;
    while z + 0.5 < target {
        acc += z.ln();
        z += 1.0;
    }
    acc
}

/// `ln ∫ x^q e^{-2β x^4} dx` over the real line, `q` even.
pub(crate) fn ln_weight_moment(q: usize, beta: f64) -> f64 {
    let a = 2.0 * beta;
    -(q as f64 + 1.0) / 4.0 * a.ln() + ln_gamma_quarter(q) - std::f64::consts::LN_2
}

/// `∫_{-∞}^{∞} x^q e^{-2β x^4} dx = (2β)^{-(q+1)/4} Γ((q+1)/4) / 2`.
pub fn weight_moment(q: usize, beta: f64) -> Result<f64> {
    if q % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "weight moment needs an even power, got q = {q}"
        )));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    Ok(ln_weight_moment(q, beta).exp())
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule on `[-L, L]` with equal panels; nodes ascend.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub half_width: f64,
    panels: usize,
    order: usize,
    local_nodes: Vec<f64>,
    local_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panel_width(&self) -> f64 {
        2.0 * self.half_width / self.panels as f64
    }

    /// Reference Gauss–Legendre nodes and weights on `[-1, 1]` used inside each panel.
    pub fn reference(&self) -> (&[f64], &[f64]) {
        (&self.local_nodes, &self.local_weights)
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        compensated_sum(self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)))
    }

    /// Weighted sum of values already sampled at the nodes.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.nodes.len());
        compensated_sum(values.iter().zip(&self.weights).map(|(v, w)| v * w))
    }

    pub fn same_layout(&self, other: &QuadratureRule) -> bool {
        self.panels == other.panels && self.order == other.order && self.half_width == other.half_width
    }
}

pub fn build_rule(half_width: f64, panels: usize, order: usize) -> Result<QuadratureRule> {
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "half width must be positive, got {half_width}"
        )));
    }
    if panels == 0 || order == 0 {
        return Err(Error::InvalidParameter(format!(
            "panels and order must be positive (panels = {panels}, order = {order})"
        )));
    }
    let (ln, lw) = gauss_legendre(order);
    let width = 2.0 * half_width / panels as f64;
    let half = 0.5 * width;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let c = -half_width + (p as f64 + 0.5) * width;
        for (&t, &w) in ln.iter().zip(&lw) {
            nodes.push(c + half * t);
            weights.push(half * w);
        }
    }
    // enforce exact node symmetry
    let n = nodes.len();
    for i in 0..n / 2 {
        nodes[n - 1 - i] = -nodes[i];
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        half_width,
        panels,
        order,
        local_nodes: ln,
        local_weights: lw,
    })
}

/// How a density decays at large |x|.
pub enum Decay<'a> {
    /// Bounded by `|x|^degree e^{-rate x^4}`.
    Quartic { rate: f64, degree: u32 },
    /// Sampled density; the half width is found by doubling then bisection.
    Empirical(&'a dyn Fn(f64) -> f64),
}

pub fn choose_half_width(decay: Decay<'_>, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tail tolerance must be positive, got {tol}"
        )));
    }
    match decay {
        Decay::Quartic { rate, degree } => {
            if !(rate > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "decay rate must be positive, got {rate}"
                )));
            }
            let d = degree as f64;
            // two-sided tail of x^d e^{-a x^4}: ≤ 2 L^{d-3} e^{-a L^4} / (4a - max(d-3, 0)/L^4)
            let bound = |l: f64| {
                let denom = 4.0 * rate - (d - 3.0).max(0.0) / l.powi(4);
                if denom <= 0.0 {
                    f64::INFINITY
                } else {
                    2.0 * ((d - 3.0) * l.ln() - rate * l.powi(4)).exp() / denom
                }
            };
            let mut hi = 1.0;
            while bound(hi) >= tol {
                hi *= 1.25;
                if hi > 1e6 {
                    return Err(Error::NoConvergence("tail half-width search".into()));
                }
            }
            let mut lo = hi / 1.25;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if bound(mid) < tol {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi)
        }
        Decay::Empirical(density) => {
            let (t, w) = gauss_legendre(8);
            // mass of the density on [a, b] ∪ [-b, -a], per panel
            let panel_masses = |a: f64, b: f64, panels: usize| -> Vec<f64> {
                let h = (b - a) / panels as f64;
                (0..panels)
                    .map(|p| {
                        let c = a + (p as f64 + 0.5) * h;
                        compensated_sum(t.iter().zip(&w).map(|(&ti, &wi)| {
                            let x = c + 0.5 * h * ti;
                            0.5 * h * wi * (density(x).abs() + density(-x).abs())
                        }))
                    })
                    .collect()
            };
            let mut l = 1.0;
            while compensated_sum(panel_masses(l, 4.0 * l, 24)) >= tol {
                l *= 2.0;
                if l > 1e6 {
                    return Err(Error::NoConvergence("empirical tail doubling".into()));
                }
            }
            // smallest panel edge in [l/2, 4l] whose outer tail is below tol
            let (lo, hi, panels) = (0.5 * l, 4.0 * l, 112);
            let masses = panel_masses(lo, hi, panels);
            let h = (hi - lo) / panels as f64;
            let mut tail = 0.0;
            let mut edge = hi;
            for i in (0..panels).rev() {
                tail += masses[i];
                if tail >= tol {
                    break;
                }
                edge = lo + i as f64 * h;
            }
            Ok(edge)
        }
    }
}

/// Default position-space rule for densities bounded by a degree-`degree` polynomial times `e^{-x^4/2}`.
pub fn position_rule(degree: u32, tol_quad: f64) -> Result<QuadratureRule> {
    let l = choose_half_width(Decay::Quartic { rate: 0.5, degree }, tol_quad)?;
    build_rule(l, DEFAULT_PANELS, DEFAULT_ORDER)
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
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

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // independent oracle: adaptive Simpson on [-L, L]
    #[allow(clippy::too_many_arguments)]
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(
            f: &F,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        // split first so narrow peaks cannot hide from the initial samples
        let pieces = 256;
        let h = (b - a) / pieces as f64;
        (0..pieces)
            .map(|i| {
                let lo = a + i as f64 * h;
                let hi = lo + h;
                let (fa, fm, fb) = (f(lo), f(lo + 0.5 * h), f(hi));
                rec(
                    f,
                    lo,
                    hi,
                    fa,
                    fm,
                    fb,
                    h / 6.0 * (fa + 4.0 * fm + fb),
                    tol / pieces as f64,
                    18,
                )
            })
            .sum()
    }

    #[test]
    fn moment_zero_quarter() {
        let v = weight_moment(0, 0.25).unwrap();
        assert_relative_eq!(v, 2.155802, epsilon = 2e-6);
        let oracle = simpson(&|x: f64| (-0.5 * x.powi(4)).exp(), -8.0, 8.0, 1e-15);
        assert_relative_eq!(v, oracle, max_relative = 1e-12);
    }

    #[test]
    fn moment_two_quarter() {
        let v = weight_moment(2, 0.25).unwrap();
        let oracle = simpson(&|x: f64| x * x * (-0.5 * x.powi(4)).exp(), -8.0, 8.0, 1e-15);
        assert_relative_eq!(v, oracle, max_relative = 1e-12);
    }

    #[test]
    fn moment_recurrence() {
        for beta in [0.25, 0.5] {
            for q in (0..40).step_by(2) {
                let a = weight_moment(q, beta).unwrap();
                let b = weight_moment(q + 4, beta).unwrap();
                assert_relative_eq!(b, (q as f64 + 1.0) / (8.0 * beta) * a, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn odd_moment_rejected() {
        assert!(weight_moment(3, 0.25).is_err());
    }

    #[test]
    fn constant_and_quadratic() {
        let r = build_rule(3.0, 7, 5).unwrap();
        assert_relative_eq!(r.integrate(|_| 1.0), 6.0, epsilon = 1e-14);
        assert_relative_eq!(r.weights.iter().sum::<f64>(), 6.0, epsilon = 1e-12);
        let r = build_rule(1.0, 1, 2).unwrap();
        assert_relative_eq!(r.integrate(|x| x * x), 2.0 / 3.0, epsilon = 1e-15);
        assert!(r.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn exact_on_monomials_up_to_design_degree() {
        for order in 1..=20 {
            let r = build_rule(1.0, 1, order).unwrap();
            for d in 0..2 * order {
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                assert!(
                    (r.integrate(|x| x.powi(d as i32)) - exact).abs() < 1e-13,
                    "order {order} degree {d}"
                );
            }
        }
    }

    #[test]
    fn nodes_symmetric_and_sorted() {
        for panels in [1, 2, 5, 128] {
            let r = build_rule(6.0, panels, 16).unwrap();
            let n = r.len();
            for i in 0..n {
                assert_eq!(r.nodes[i], -r.nodes[n - 1 - i]);
                assert_eq!(r.weights[i], r.weights[n - 1 - i]);
            }
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(r.integrate(|x| x.powi(3) * (-x * x).exp() + x.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn rule_matches_closed_form_moments() {
        let r = build_rule(6.0, 64, 16).unwrap();
        let v = r.integrate(|x| (-0.5 * x.powi(4)).exp());
        assert_relative_eq!(v, weight_moment(0, 0.25).unwrap(), max_relative = 1e-13);
        let r = build_rule(8.0, 128, 16).unwrap();
        for beta in [0.25, 0.5] {
            for q in (0..=40).step_by(2) {
                let num = r.integrate(|x| x.powi(q as i32) * (-2.0 * beta * x.powi(4)).exp());
                assert_relative_eq!(num, weight_moment(q, beta).unwrap(), max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn invalid_rules() {
        assert!(build_rule(0.0, 4, 4).is_err());
        assert!(build_rule(1.0, 0, 4).is_err());
        assert!(build_rule(1.0, 4, 0).is_err());
    }

    #[test]
    fn half_width_position_bound() {
        for degree in [0, 20, 42] {
            let l = choose_half_width(Decay::Quartic { rate: 0.5, degree }, 1e-16).unwrap();
            assert!(l <= 8.0, "degree {degree}: {l}");
            let tail = 2.0
                * simpson(
                    &|x: f64| x.powi(degree as i32) * (-0.5 * x.powi(4)).exp(),
                    l,
                    l + 4.0,
                    1e-30,
                );
            assert!(tail < 1e-16, "degree {degree}: L = {l}, tail = {tail}");
        }
    }

    #[test]
    fn half_width_doubling_on_gaussian() {
        let g = |x: f64| (-x * x).exp() / std::f64::consts::PI.sqrt();
        let l = choose_half_width(Decay::Empirical(&g), 1e-16).unwrap();
        // erfc(L) < 1e-16 needs L ≈ 5.8
        assert!(l > 5.0 && l < 7.0, "{l}");
    }

    #[test]
    fn zero_tolerance_rejected() {
        assert!(choose_half_width(Decay::Quartic { rate: 0.5, degree: 0 }, 0.0).is_err());
        let g = |x: f64| (-x * x).exp();
        assert!(choose_half_width(Decay::Empirical(&g), 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn odd_integrands_vanish(l in 0.5f64..10.0, panels in 1usize..40, order in 1usize..24, a in -3.0f64..3.0) {
                let r = build_rule(l, panels, order).unwrap();
                let v = r.integrate(|x| x * (a * x * x).cos() * (-x * x).exp() + x.powi(5));
                prop_assert!(v.abs() < 1e-13 * (1.0 + l.powi(6)));
            }

            #[test]
            fn weights_sum_to_width(l in 0.1f64..20.0, panels in 1usize..200, order in 1usize..24) {
                let r = build_rule(l, panels, order).unwrap();
                prop_assert!((r.weights.iter().sum::<f64>() - 2.0 * l).abs() < 1e-12 * (1.0 + l));
                prop_assert!(r.weights.iter().all(|&w| w > 0.0));
            }
        }
    }
}
