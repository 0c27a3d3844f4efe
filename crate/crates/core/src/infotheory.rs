//! Uncertainties, Shannon entropies and KL / cumulative-residual divergences.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::momentum::{self, FourierEvaluator, Wavefunction};
use crate::quadrature::{compensated_sum, QuadratureRule};

pub const FLOOR: f64 = 1e-300;
const SURVIVAL_NEGLIGIBLE: f64 = 1e-15;
const NORM_DRIFT: f64 = 1e-6;

/// Lower bound `1 + ln π` of the position-momentum entropy sum.
pub fn entropic_bound() -> f64 {
    1.0 + PI.ln()
}

/// Density sampled at the nodes of a quadrature rule.
#[derive(Clone, Debug)]
pub struct Density {
    pub rule: Arc<QuadratureRule>,
    pub values: Vec<f64>,
}

impl Density {
    pub fn from_fn<F: Fn(f64) -> f64>(rule: Arc<QuadratureRule>, f: F) -> Self {
        let values = rule.nodes.iter().map(|&x| f(x)).collect();
        Self { rule, values }
    }

    pub fn of_state<W: Wavefunction + ?Sized>(state: &W, rule: Arc<QuadratureRule>) -> Self {
        Self::from_fn(rule, |x| state.value(x).powi(2))
    }

    pub fn total(&self) -> f64 {
        self.rule.integrate_values(&self.values)
    }

    fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        compensated_sum(
            self.rule
                .nodes
                .iter()
                .zip(&self.rule.weights)
                .zip(&self.values)
                .map(|((&x, &w), &r)| w * r * f(x)),
        )
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn spread(&self) -> f64 {
        let m = self.mean();
        (self.expect(|x| x * x) - m * m).max(0.0).sqrt()
    }

    pub fn shannon(&self) -> f64 {
        -compensated_sum(
            self.values
                .iter()
                .zip(&self.rule.weights)
                .map(|(&r, &w)| if r < FLOOR { 0.0 } else { w * r * r.ln() }),
        )
    }

    /// `S(x_i) = ∫_{x_i}^{L} ρ`, evaluated from the in-panel Legendre interpolant.
    pub fn survival(&self) -> Vec<f64> {
        let rule = &self.rule;
        let order = rule.order();
        let panels = rule.panels();
        let (t, w) = rule.reference();
        let matrix = partial_integration_matrix(t, w);
        let half = 0.5 * rule.panel_width();
        let mut out = vec![0.0; rule.len()];
        let mut right_mass = 0.0;
        let mut comp = 0.0;
        for p in (0..panels).rev() {
            let f = &self.values[p * order..(p + 1) * order];
            for i in 0..order {
                let inner = half * compensated_sum((0..order).map(|j| matrix[i * order + j] * f[j]));
                out[p * order + i] = (right_mass + comp + inner).clamp(FLOOR, 1.0);
            }
            let mass = half * compensated_sum(w.iter().zip(f).map(|(a, b)| a * b));
            let y = mass - comp;
            let s = right_mass + y;
            comp = (s - right_mass) - y;
            right_mass = s;
        }
        out
    }
}

/// `A_ij` with `∫_{t_i}^{1} f ≈ Σ_j A_ij f(t_j)` for the degree `n - 1` interpolant.
fn partial_integration_matrix(t: &[f64], w: &[f64]) -> Vec<f64> {
    let n = t.len();
    let legendre = |x: f64| {
        let mut p = vec![0.0; n + 1];
        p[0] = 1.0;
        if n >= 1 {
            p[1] = x;
        }
        for k in 1..n {
            let kf = k as f64;
            p[k + 1] = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        }
        p
    };
    let at_nodes: Vec<Vec<f64>> = t.iter().map(|&x| legendre(x)).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        let pi = &at_nodes[i];
        for j in 0..n {
            let pj = &at_nodes[j];
            let mut s = 0.5 * (1.0 - t[i]);
            for k in 1..n {
                s -= 0.5 * pj[k] * (pi[k + 1] - pi[k - 1]);
            }
            a[i * n + j] = w[j] * s;
        }
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct MeasureReport {
    pub delta_x: f64,
    pub delta_p: f64,
    pub s_x: f64,
    pub s_p: f64,
    pub s_t: f64,
    pub heisenberg: f64,
    pub mean_x: f64,
    pub mean_p: f64,
}

pub fn measure(position: &Density, momentum: &Density) -> Result<MeasureReport> {
    for d in [position, momentum] {
        let t = d.total();
        if (t - 1.0).abs() > NORM_DRIFT {
            return Err(Error::Normalization(t));
        }
    }
    let delta_x = position.spread();
    let delta_p = momentum.spread();
    let s_x = position.shannon();
    let s_p = momentum.shannon();
    Ok(MeasureReport {
        delta_x,
        delta_p,
        s_x,
        s_p,
        s_t: s_x + s_p,
        heisenberg: delta_x * delta_p,
        mean_x: position.mean(),
        mean_p: momentum.mean(),
    })
}

/// Position and momentum densities of a state on shared position rule, plus its momentum rule.
pub fn state_densities<W: Wavefunction + ?Sized>(
    state: &W,
    position_rule: Arc<QuadratureRule>,
) -> Result<(Density, Density)> {
    let fourier_rule = crate::quadrature::build_rule(position_rule.half_width, 64, 16)?;
    let ev = FourierEvaluator::new(state, &fourier_rule);
    let mrule = Arc::new(momentum::momentum_rule(&ev, momentum::MOMENTUM_TAIL_TOL)?);
    let mvalues = mrule
        .nodes
        .iter()
        .map(|&p| ev.eval(p).map(|z| z.norm_sqr()))
        .collect::<Result<Vec<_>>>()?;
    let position = Density::of_state(state, position_rule);
    Ok((
        position,
        Density {
            rule: mrule,
            values: mvalues,
        },
    ))
}

pub fn measure_state<W: Wavefunction + ?Sized>(state: &W, position_rule: Arc<QuadratureRule>) -> Result<MeasureReport> {
    let (x, p) = state_densities(state, position_rule)?;
    measure(&x, &p)
}

fn same_grid(a: &Density, b: &Density) -> Result<()> {
    if !a.rule.same_layout(&b.rule) || a.values.len() != b.values.len() {
        return Err(Error::GridMismatch(format!(
            "{} nodes on [-{}, {}] vs {} nodes on [-{}, {}]",
            a.values.len(),
            a.rule.half_width,
            a.rule.half_width,
            b.values.len(),
            b.rule.half_width,
            b.rule.half_width
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct KlResult {
    pub value: f64,
    /// Some node had `ρ_b` below the floor while `ρ_a` was not.
    pub near_singular: bool,
}

/// `D(a‖b) = ∫ ρ_a ln(ρ_a / ρ_b)`.
pub fn kl_divergence(a: &Density, b: &Density) -> Result<KlResult> {
    same_grid(a, b)?;
    let mut near_singular = false;
    let terms: Vec<f64> = a
        .values
        .iter()
        .zip(&b.values)
        .zip(&a.rule.weights)
        .map(|((&ra, &rb), &w)| {
            if ra < FLOOR {
                return 0.0;
            }
            let rb = if rb < FLOOR {
                near_singular = true;
                FLOOR
            } else {
                rb
            };
            w * ra * (ra / rb).ln()
        })
        .collect();
    Ok(KlResult {
        value: compensated_sum(terms),
        near_singular,
    })
}

/// Symmetrized divergence of survival functions, `∫ (S_a - S_b) ln(S_a / S_b)`.
pub fn crj_divergence(a: &Density, b: &Density) -> Result<f64> {
    same_grid(a, b)?;
    let sa = a.survival();
    let sb = b.survival();
    Ok(compensated_sum(sa.iter().zip(&sb).zip(&a.rule.weights).map(
        |((&x, &y), &w)| {
            if x < SURVIVAL_NEGLIGIBLE && y < SURVIVAL_NEGLIGIBLE {
                0.0
            } else {
                w * (x - y) * (x / y).ln()
            }
        },
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct DivergenceReport {
    pub kl: f64,
    pub crj: f64,
    pub kl_near_singular: bool,
}

impl DivergenceReport {
    pub const DIRECTION: &'static str = "kl = D(first || second) = integral of first * ln(first / second)";
}

pub fn divergences(a: &Density, b: &Density) -> Result<DivergenceReport> {
    let kl = kl_divergence(a, b)?;
    Ok(DivergenceReport {
        kl: kl.value,
        crj: crj_divergence(a, b)?,
        kl_near_singular: kl.near_singular,
    })
}

/// Default oscillator frequency for the harmonic comparison.
pub fn default_ho_omega(lambda: f64) -> f64 {
    if lambda < 0.0 {
        2.0 * lambda.abs().sqrt()
    } else {
        2f64.sqrt()
    }
}

/// Harmonic-oscillator `|ψ_n|^2` with frequency `omega`.
pub fn ho_reference_density(n: usize, omega: f64, rule: Arc<QuadratureRule>) -> Result<Density> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "oscillator frequency must be positive, got {omega}"
        )));
    }
    let s = omega.sqrt();
    Ok(Density::from_fn(rule, |x| {
        let f = crate::lagrange_mesh::hermite_functions(n + 1, s * x);
        s * f[n] * f[n]
    }))
}
