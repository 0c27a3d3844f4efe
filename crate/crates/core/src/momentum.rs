//! Momentum-space wavefunctions by oscillatory quadrature and by moment series.

use std::f64::consts::PI;

use nalgebra::Complex;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::qes_exact::ExactState;
use crate::quadrature::{self, compensated_sum, Decay, QuadratureRule};
use crate::variational::{EigenState, ParitySector, WaveSample};

pub const NODES_PER_PERIOD: usize = 12;
pub const CANCELLATION_LIMIT: f64 = 1e6;
pub const MOMENTUM_TAIL_TOL: f64 = 1e-12;
const SERIES_CUTOFF: f64 = 1e-20;
const SERIES_MAX_TERMS: usize = 4000;

/// A real position-space wavefunction of definite parity.
pub trait Wavefunction: Sync {
    fn value(&self, x: f64) -> f64;
    fn parity(&self) -> ParitySector;
}

impl Wavefunction for EigenState {
    fn value(&self, x: f64) -> f64 {
        EigenState::value(self, x)
    }
    fn parity(&self) -> ParitySector {
        self.parity
    }
}

impl Wavefunction for ExactState {
    fn value(&self, x: f64) -> f64 {
        ExactState::value(self, x)
    }
    fn parity(&self) -> ParitySector {
        self.parity
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Method {
    Quadrature,
    Series,
}

#[derive(Clone, Debug)]
pub struct MomentumSample {
    pub grid: Vec<f64>,
    pub amplitude: Vec<Complex<f64>>,
    pub density: Vec<f64>,
    pub method: Method,
}

/// Position samples of a state, ready for repeated Fourier evaluation.
pub struct FourierEvaluator {
    nodes: Vec<f64>,
    weighted: Vec<f64>,
    half_width: f64,
    count: usize,
}

impl FourierEvaluator {
    pub fn new<W: Wavefunction + ?Sized>(state: &W, rule: &QuadratureRule) -> Self {
        let nodes = rule.nodes.clone();
        let weighted = nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * state.value(x))
            .collect();
        Self {
            nodes,
            weighted,
            half_width: rule.half_width,
            count: rule.len(),
        }
    }

    /// Largest |p| satisfying the node-density guard.
    pub fn max_momentum(&self) -> f64 {
        2.0 * PI * self.count as f64 / (NODES_PER_PERIOD as f64 * 2.0 * self.half_width)
    }

    fn check(&self, p: f64) -> Result<()> {
        if p.abs() > self.max_momentum() {
            let required = (NODES_PER_PERIOD as f64 * 2.0 * self.half_width * p.abs() / (2.0 * PI)).ceil();
            return Err(Error::NodeDensity {
                p,
                required_nodes: required as usize,
                available: self.count,
            });
        }
        Ok(())
    }

    pub fn eval(&self, p: f64) -> Result<Complex<f64>> {
        self.check(p)?;
        let n = self.nodes.len();
        // pair x with -x so parity cancellations are exact
        let half = n / 2;
        let mut re = Vec::with_capacity(half + 1);
        let mut im = Vec::with_capacity(half + 1);
        for i in 0..half {
            let j = n - 1 - i;
            let (s, c) = (p * self.nodes[j]).sin_cos();
            re.push(c * (self.weighted[j] + self.weighted[i]));
            im.push(-s * (self.weighted[j] - self.weighted[i]));
        }
        if n % 2 == 1 {
            re.push(self.weighted[half]);
        }
        let norm = (2.0 * PI).sqrt().recip();
        Ok(Complex::new(compensated_sum(re) * norm, compensated_sum(im) * norm))
    }
}

pub fn transform_quadrature<W: Wavefunction + ?Sized>(
    state: &W,
    rule: &QuadratureRule,
    grid: &[f64],
) -> Result<MomentumSample> {
    let ev = FourierEvaluator::new(state, rule);
    let amplitude = grid.iter().map(|&p| ev.eval(p)).collect::<Result<Vec<_>>>()?;
    let density = amplitude.iter().map(|a| a.norm_sqr()).collect();
    Ok(MomentumSample {
        grid: grid.to_vec(),
        amplitude,
        density,
        method: Method::Quadrature,
    })
}

/// `ln ∫ x^q e^{-x^4/4} dx`.
fn ln_quartic_moment(q: usize) -> f64 {
    quadrature::ln_weight_moment(q, 0.125)
}

/// Maclaurin series `(2π)^{-1/2} Σ_k (-ip)^k/k! Σ_j c_j ∫x^{m_j+k} e^{-x^4/4} dx`
/// for `ψ = Σ_j c_j x^{m_j} e^{-x^4/4}` with unit-norm coefficients.
pub fn transform_series(coefficients: &[f64], parity: ParitySector, p: f64) -> Result<Complex<f64>> {
    if coefficients.is_empty() {
        return Err(Error::InvalidParameter("empty coefficient vector".into()));
    }
    let reference: f64 = coefficients
        .iter()
        .enumerate()
        .map(|(j, c)| c.abs() * ln_quartic_moment(parity.exponent(j) + parity.exponent(0) % 2).exp())
        .sum();
    let start = match parity {
        ParitySector::Even => 0,
        ParitySector::Odd => 1,
    };
    // Even moments of e^{-x^4/4} in double-double: seeds Γ(1/4)/√2 and √2·Γ(3/4),
    // then M(q+4) = (q+1)·M(q).
    let mut moments = vec![
        TwoFloat::new_add(2.5636933520408474, 2.1104275802190307e-16),
        TwoFloat::new_add(1.73300092018477, -6.99719215213055e-17),
    ];
    let mut moment = |q: usize| {
        while moments.len() <= q / 2 {
            let i = moments.len();
            moments.push(moments[i - 2] * (2 * i - 3) as f64);
        }
        moments[q / 2]
    };
    let p2 = TwoFloat::new_mul(p, p);
    let mut factor = if start == 0 {
        TwoFloat::from(1.0)
    } else {
        TwoFloat::from(p)
    };
    let mut total = TwoFloat::from(0.0);
    let mut abs_total = 0.0;
    let mut running_max = 0.0f64;
    let mut k = start;
    let mut small_run = 0;
    while k < SERIES_MAX_TERMS {
        let sign_k = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let mut chunk = 0.0;
        for (j, &c) in coefficients.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let term = factor * moment(parity.exponent(j) + k) * (sign_k * c);
            total += term;
            chunk += term.hi().abs();
        }
        abs_total += chunk;
        running_max = running_max.max(chunk);
        if chunk < SERIES_CUTOFF * running_max || (p == 0.0 && k > start) {
            small_run += 1;
            if small_run >= 2 {
                break;
            }
        } else {
            small_run = 0;
        }
        factor = factor * p2 / (((k + 1) * (k + 2)) as f64);
        k += 2;
    }
    if k >= SERIES_MAX_TERMS {
        return Err(Error::NoConvergence(format!("momentum series at p = {p}")));
    }
    let ratio = abs_total / reference;
    if ratio > CANCELLATION_LIMIT {
        return Err(Error::Cancellation {
            p,
            lost_digits: ratio.log10(),
        });
    }
    let total = (total.hi() + total.lo()) / (2.0 * PI).sqrt();
    Ok(match parity {
        // (-i)^k is real for even k and (-i)·(±1) for odd k
        ParitySector::Even => Complex::new(total, 0.0),
        ParitySector::Odd => Complex::new(0.0, -total),
    })
}

pub fn series_sample(state: &EigenState, grid: &[f64]) -> Result<MomentumSample> {
    let c = state.normalized_coefficients();
    let amplitude = grid
        .iter()
        .map(|&p| transform_series(&c, state.parity, p))
        .collect::<Result<Vec<_>>>()?;
    let density = amplitude.iter().map(|a| a.norm_sqr()).collect();
    Ok(MomentumSample {
        grid: grid.to_vec(),
        amplitude,
        density,
        method: Method::Series,
    })
}

/// Momentum rule wide enough that the density tail beyond it is below `tol`.
pub fn momentum_rule(ev: &FourierEvaluator, tol: f64) -> Result<QuadratureRule> {
    let density = |p: f64| ev.eval(p).map(|z| z.norm_sqr()).unwrap_or(f64::INFINITY);
    let half = quadrature::choose_half_width(Decay::Empirical(&density), tol)?;
    let half = half.min(ev.max_momentum());
    let panels = ((half / 0.25).ceil() as usize).max(16);
    quadrature::build_rule(half, panels, 16)
}

/// Uniform grid `-p_max..=p_max` with the given spacing.
pub fn uniform_grid(p_max: f64, spacing: f64) -> Vec<f64> {
    let n = (p_max / spacing).round() as i64;
    (-n..=n).map(|i| i as f64 * spacing).collect()
}

/// Left- and right-localized combinations `(ψ_+ ∓ ψ_-)/√2` of a tunneling pair.
pub fn localized_pair(
    state_plus: &EigenState,
    state_minus: &EigenState,
    grid: &[f64],
) -> Result<(WaveSample, WaveSample)> {
    if state_plus.parity != ParitySector::Even
        || state_minus.parity != ParitySector::Odd
        || state_minus.n != state_plus.n + 1
    {
        return Err(Error::ParityMismatch(format!(
            "need an even state n and odd state n+1, got n = {} ({}) and n = {} ({})",
            state_plus.n,
            state_plus.parity.label(),
            state_minus.n,
            state_minus.parity.label()
        )));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let build = |sign: f64| {
        let amplitude: Vec<f64> = grid
            .iter()
            .map(|&x| r * (state_plus.value(x) + sign * state_minus.value(x)))
            .collect();
        let density = amplitude.iter().map(|a| a * a).collect();
        WaveSample {
            grid: grid.to_vec(),
            amplitude,
            density,
        }
    };
    Ok((build(-1.0), build(1.0)))
}
