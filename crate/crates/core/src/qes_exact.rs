//! Exact polynomial sector at non-negative integer and half-integer coupling.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::variational::{ParitySector, WaveSample};

const REALNESS_TOL: f64 = 1e-10;

/// Dense polynomial in `x`, lowest power first.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn monomial(m: usize) -> Self {
        let mut c = vec![0.0; m + 1];
        c[m] = 1.0;
        Poly(c)
    }

    pub fn derivative(&self) -> Self {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    pub fn mul(&self, other: &Poly) -> Self {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn add(&self, other: &Poly) -> Self {
        let n = self.0.len().max(other.0.len());
        Poly((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Poly(self.0.iter().map(|c| c * s).collect())
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

/// Reduced operator `P ↦ -P''/2 + (x^3 + x) P' + (1/2 - 2λ x^2) P` left after
/// factoring `e^{-x^4/4 - x^2/2}` out of the Schrödinger equation.
pub fn reduced_operator(lambda: f64, p: &Poly) -> Poly {
    let d1 = p.derivative();
    let d2 = d1.derivative();
    let drift = Poly(vec![0.0, 1.0, 0.0, 1.0]);
    let mass = Poly(vec![0.5, 0.0, -2.0 * lambda]);
    d2.scale(-0.5).add(&drift.mul(&d1)).add(&mass.mul(p))
}

#[derive(Clone, Debug)]
pub struct AlgebraicSector {
    pub lambda: f64,
    pub parity: ParitySector,
    pub dimension: usize,
    /// Column `j` holds the image of the `j`-th basis monomial.
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Prefactor coefficients in the sector basis (`x^{2i}` or `x^{2i+1}`), lowest equal to 1.
    pub polynomials: Vec<Vec<f64>>,
}

/// Admissible couplings: `λ = N` (even sector) or `λ = N + 1/2` (odd sector).
pub fn sector_shape(lambda: f64) -> Result<(ParitySector, usize)> {
    let twice = 2.0 * lambda;
    let r = twice.round();
    if !lambda.is_finite() || lambda < 0.0 || (twice - r).abs() > 1e-12 || r > 1e6 {
        return Err(Error::NotAlgebraic(lambda));
    }
    let r = r as usize;
    if r.is_multiple_of(2) {
        Ok((ParitySector::Even, r / 2))
    } else {
        Ok((ParitySector::Odd, (r - 1) / 2))
    }
}

pub fn build_sector(lambda: f64) -> Result<AlgebraicSector> {
    let (parity, n) = sector_shape(lambda)?;
    let dim = n + 1;
    let mut matrix = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let image = reduced_operator(lambda, &Poly::monomial(parity.exponent(j)));
        for (k, &c) in image.0.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let inside = k % 2 == parity.exponent(0) % 2 && (k - parity.exponent(0)) / 2 < dim;
            if !inside {
                return Err(Error::NoConvergence(format!(
                    "sector at λ = {lambda} is not closed (x^{k} coefficient {c})"
                )));
            }
            matrix[((k - parity.exponent(0)) / 2, j)] = c;
        }
    }

    let complex = matrix.complex_eigenvalues();
    let mut eigenvalues = Vec::with_capacity(dim);
    for z in complex.iter() {
        if z.im.abs() > REALNESS_TOL * (1.0 + z.re.abs()) {
            return Err(Error::NoConvergence(format!(
                "sector eigenvalue {z} at λ = {lambda} is not real"
            )));
        }
        eigenvalues.push(z.re);
    }
    eigenvalues.sort_by(f64::total_cmp);

    // diagonal similarity makes the tridiagonal matrix symmetric
    let mut d = vec![1.0; dim];
    for i in 0..dim.saturating_sub(1) {
        d[i + 1] = d[i] * (matrix[(i + 1, i)] / matrix[(i, i + 1)]).sqrt();
    }
    let sym = DMatrix::from_fn(dim, dim, |i, j| matrix[(i, j)] * d[j] / d[i]);
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let polynomials = order
        .iter()
        .map(|&c| {
            let v: Vec<f64> = (0..dim).map(|i| eig.eigenvectors[(i, c)] * d[i]).collect();
            let lead = v[0];
            v.iter().map(|x| x / lead).collect()
        })
        .collect();

    Ok(AlgebraicSector {
        lambda,
        parity,
        dimension: dim,
        matrix,
        eigenvalues,
        polynomials,
    })
}

/// Exact eigenfunction `P(x) e^{-x^4/4 - x^2/2}`, unit norm.
#[derive(Clone, Debug)]
pub struct ExactState {
    pub parity: ParitySector,
    pub energy: f64,
    pub prefactor: Poly,
    pub norm_constant: f64,
}

impl ExactState {
    pub fn value(&self, x: f64) -> f64 {
        let x2 = x * x;
        self.norm_constant * self.prefactor.eval(x) * (-0.25 * x2 * x2 - 0.5 * x2).exp()
    }
}

impl AlgebraicSector {
    pub fn state(&self, which: usize) -> Result<ExactState> {
        if which >= self.dimension {
            return Err(Error::InvalidParameter(format!(
                "sector has {} states, index {which} requested",
                self.dimension
            )));
        }
        let mut coeffs = vec![0.0; self.parity.exponent(self.dimension - 1) + 1];
        for (i, c) in self.polynomials[which].iter().enumerate() {
            coeffs[self.parity.exponent(i)] = *c;
        }
        let prefactor = Poly(coeffs);
        let degree = 2 * self.parity.exponent(self.dimension - 1) as u32;
        let rule = quadrature::position_rule(degree, 1e-18)?;
        let norm2 = rule.integrate(|x| {
            let x2 = x * x;
            prefactor.eval(x).powi(2) * (-0.5 * x2 * x2 - x2).exp()
        });
        Ok(ExactState {
            parity: self.parity,
            energy: self.eigenvalues[which],
            prefactor,
            norm_constant: 1.0 / norm2.sqrt(),
        })
    }

    /// Largest spread of the mirrored pair sums `E_i + E_{N-i}`; zero for a reflection-symmetric spectrum.
    pub fn reflection_defect(&self) -> f64 {
        let n = self.dimension - 1;
        let sums: Vec<f64> = (0..=n).map(|i| self.eigenvalues[i] + self.eigenvalues[n - i]).collect();
        let max = sums.iter().cloned().fold(f64::MIN, f64::max);
        let min = sums.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    }

    /// Index of the same state in the merged spectrum of both parities.
    pub fn global_index(&self, which: usize) -> usize {
        match self.parity {
            ParitySector::Even => 2 * which,
            ParitySector::Odd => 2 * which + 1,
        }
    }
}

pub fn exact_density(sector: &AlgebraicSector, which: usize, grid: &[f64]) -> Result<WaveSample> {
    let st = sector.state(which)?;
    let amplitude: Vec<f64> = grid.iter().map(|&x| st.value(x)).collect();
    let density = amplitude.iter().map(|a| a * a).collect();
    Ok(WaveSample {
        grid: grid.to_vec(),
        amplitude,
        density,
    })
}
