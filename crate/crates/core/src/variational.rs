//! Rayleigh–Ritz solver over polynomial prefactors times `e^{-x^4/4}`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::lagrange_mesh::MeshExpansion;
use crate::potential::ModelParams;
use crate::quadrature::{self, QuadratureRule};

pub const DEFAULT_BASIS: usize = 10;
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ParitySector {
    Even,
    Odd,
}

impl ParitySector {
    /// Power of `x` carried by the `j`-th basis function.
    pub fn exponent(self, j: usize) -> usize {
        match self {
            ParitySector::Even => 2 * j,
            ParitySector::Odd => 2 * j + 1,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            ParitySector::Even => 1.0,
            ParitySector::Odd => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ParitySector::Even => "even",
            ParitySector::Odd => "odd",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenState {
    pub n: usize,
    pub parity: ParitySector,
    pub energy: f64,
    /// Monomial-basis coefficients, lowest degree first and equal to 1. Empty for mesh states.
    pub coefficients: Vec<f64>,
    pub norm_constant: f64,
    pub mesh: Option<Arc<MeshExpansion>>,
}

impl EigenState {
    pub fn value(&self, x: f64) -> f64 {
        if let Some(mesh) = &self.mesh {
            return mesh.value(x);
        }
        let x2 = x * x;
        let mut acc = 0.0;
        for &c in self.coefficients.iter().rev() {
            acc = acc * x2 + c;
        }
        if self.parity == ParitySector::Odd {
            acc *= x;
        }
        self.norm_constant * acc * (-0.25 * x2 * x2).exp()
    }

    /// Highest power of `x` in `|ψ|^2` excluding the Gaussian-quartic factor.
    pub fn density_degree(&self) -> u32 {
        if self.mesh.is_some() {
            return 0;
        }
        2 * self.parity.exponent(self.coefficients.len().saturating_sub(1)) as u32
    }

    /// Coefficients scaled to a unit-norm wavefunction.
    pub fn normalized_coefficients(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c * self.norm_constant).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub params: ModelParams,
    pub states: Vec<EigenState>,
    pub basis_sizes: (usize, usize),
    pub warnings: Vec<String>,
}

impl SpectrumResult {
    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.energy).collect()
    }

    pub fn state(&self, n: usize) -> Option<&EigenState> {
        self.states.get(n)
    }
}

/// Real wavefunction sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveSample {
    pub grid: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub density: Vec<f64>,
}

fn moment(q: usize) -> f64 {
    quadrature::ln_weight_moment(q, 0.25).exp()
}

/// Matrices over `k + 1` basis functions without the conditioning check.
fn assemble(params: &ModelParams, sector: ParitySector, k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let size = k + 1;
    let lam = params.lambda;
    let mut h = DMatrix::zeros(size, size);
    let mut s = DMatrix::zeros(size, size);
    for i in 0..size {
        for j in i..size {
            let mi = sector.exponent(i);
            let mj = sector.exponent(j);
            let a = mi + mj;
            let kinetic_low = if mi * mj > 0 {
                (mi * mj) as f64 * moment(a - 2)
            } else {
                0.0
            };
            // ½⟨φ_i'|φ_j'⟩ with φ_m' = (m x^{m-1} - x^{m+3}) e^{-x^4/4}
            let kinetic = 0.5 * (kinetic_low - (mi + mj) as f64 * moment(a + 2) + moment(a + 6));
            let potential = 0.5 * moment(a + 6) + moment(a + 4) - (2.0 * lam + 1.0) * moment(a + 2);
            h[(i, j)] = kinetic + potential;
            h[(j, i)] = h[(i, j)];
            s[(i, j)] = moment(a);
            s[(j, i)] = s[(i, j)];
        }
    }
    (h, s)
}

fn equilibrate(h: &DMatrix<f64>, s: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let d = s.diagonal().map(|v| 1.0 / v.sqrt());
    let scale = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[i] * d[j]);
    (d.clone(), scale(h), scale(s))
}

/// Condition number of the diagonally equilibrated overlap matrix.
pub fn overlap_condition(s: &DMatrix<f64>) -> f64 {
    let d = s.diagonal().map(|v| 1.0 / v.sqrt());
    let scaled = DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)] * d[i] * d[j]);
    let ev = SymmetricEigen::new(scaled).eigenvalues;
    let max = ev.iter().cloned().fold(f64::MIN, f64::max);
    let min = ev.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Hamiltonian and overlap over the `k + 1` sector functions `x^m e^{-x^4/4}`.
pub fn hamiltonian_and_overlap(
    params: &ModelParams,
    sector: ParitySector,
    k: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if k < 1 {
        return Err(Error::InvalidParameter("basis size k must be at least 1".into()));
    }
    let (h, s) = assemble(params, sector, k);
    let condition = overlap_condition(&s);
    if condition > CONDITION_LIMIT {
        return Err(Error::Conditioning {
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    Ok((h, s))
}

struct SectorSolution {
    energies: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

fn solve_sector(h: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<SectorSolution> {
    let (d, hs, ss) = equilibrate(h, s);
    let chol = ss.cholesky().ok_or(Error::Conditioning {
        condition: f64::INFINITY,
        limit: CONDITION_LIMIT,
    })?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or(Error::Conditioning {
        condition: f64::INFINITY,
        limit: CONDITION_LIMIT,
    })?;
    let mut a = &linv * hs * linv.transpose();
    a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt_inv = linv.transpose();
    let mut energies = Vec::new();
    let mut vectors = Vec::new();
    let mut norms = Vec::new();
    for i in order {
        let y = eig.eigenvectors.column(i).into_owned();
        let c_scaled = &lt_inv * y;
        let c: DVector<f64> = c_scaled.component_mul(&d);
        let lead = c[0];
        if lead == 0.0 {
            return Err(Error::NoConvergence(
                "eigenvector with vanishing leading coefficient".into(),
            ));
        }
        let c = c / lead;
        let norm2 = (c.transpose() * s * &c)[(0, 0)];
        energies.push(eig.eigenvalues[i]);
        norms.push(1.0 / norm2.sqrt());
        vectors.push(c.iter().cloned().collect());
    }
    Ok(SectorSolution {
        energies,
        vectors,
        norms,
    })
}

/// Largest usable `k ≤ requested`, with a warning when reduced.
fn guarded_matrices(
    params: &ModelParams,
    sector: ParitySector,
    requested: usize,
    warnings: &mut Vec<String>,
) -> Result<(usize, DMatrix<f64>, DMatrix<f64>)> {
    let mut k = requested;
    loop {
        match hamiltonian_and_overlap(params, sector, k) {
            Ok((h, s)) => {
                if k != requested {
                    warnings.push(format!(
                        "{} basis reduced from k = {requested} to k = {k} by the overlap conditioning guard",
                        sector.label()
                    ));
                }
                return Ok((k, h, s));
            }
            Err(Error::Conditioning { .. }) if k > 1 => k -= 1,
            Err(e) => return Err(e),
        }
    }
}

pub fn solve(params: &ModelParams, k_even: usize, k_odd: usize) -> Result<SpectrumResult> {
    if !params.lambda.is_finite() {
        return Err(Error::InvalidParameter("lambda must be finite".into()));
    }
    let mut warnings = Vec::new();
    let mut states = Vec::new();
    let mut sizes = [0usize; 2];
    for (slot, (sector, k)) in [(ParitySector::Even, k_even), (ParitySector::Odd, k_odd)]
        .into_iter()
        .enumerate()
    {
        let (k_used, h, s) = guarded_matrices(params, sector, k, &mut warnings)?;
        sizes[slot] = k_used;
        let sol = solve_sector(&h, &s)?;
        for ((e, c), norm) in sol.energies.into_iter().zip(sol.vectors).zip(sol.norms) {
            states.push(EigenState {
                n: 0,
                parity: sector,
                energy: e,
                coefficients: c,
                norm_constant: norm,
                mesh: None,
            });
        }
    }
    states.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    for (n, st) in states.iter_mut().enumerate() {
        st.n = n;
    }
    Ok(SpectrumResult {
        params: *params,
        states,
        basis_sizes: (sizes[0], sizes[1]),
        warnings,
    })
}

pub fn rayleigh_quotient(params: &ModelParams, sector: ParitySector, coefficients: &[f64]) -> Result<f64> {
    if coefficients.is_empty() || coefficients.iter().all(|&c| c == 0.0) {
        return Err(Error::InvalidParameter("zero coefficient vector".into()));
    }
    let (h, s) = assemble(params, sector, coefficients.len() - 1);
    let c = DVector::from_column_slice(coefficients);
    let num = (c.transpose() * &h * &c)[(0, 0)];
    let den = (c.transpose() * &s * &c)[(0, 0)];
    Ok(num / den)
}

/// `⟨x^2⟩` of a monomial-basis state from closed-form moments.
pub fn expectation_x2(state: &EigenState) -> f64 {
    let c = state.normalized_coefficients();
    let mut acc = 0.0;
    for (i, ci) in c.iter().enumerate() {
        for (j, cj) in c.iter().enumerate() {
            acc += ci * cj * moment(state.parity.exponent(i) + state.parity.exponent(j) + 2);
        }
    }
    acc
}

pub fn evaluate_wavefunction(state: &EigenState, grid: &[f64]) -> WaveSample {
    let amplitude: Vec<f64> = grid.iter().map(|&x| state.value(x)).collect();
    let density = amplitude.iter().map(|a| a * a).collect();
    WaveSample {
        grid: grid.to_vec(),
        amplitude,
        density,
    }
}

/// Default position rule wide enough for every state of this basis size.
pub fn default_rule(params: &ModelParams, k_max: usize) -> Result<QuadratureRule> {
    quadrature::position_rule(2 * (2 * k_max as u32 + 1), params.tol_quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(l: f64) -> ModelParams {
        ModelParams::new(l).unwrap()
    }

    fn apply_h(lam: f64, m: usize, x: f64) -> f64 {
        let mf = m as f64;
        let low = if m >= 2 {
            -0.5 * mf * (mf - 1.0) * x.powi(m as i32 - 2)
        } else {
            0.0
        };
        (low + (mf + 0.5 - 2.0 * lam) * x.powi(m as i32 + 2) + x.powi(m as i32 + 4)) * (-0.25 * x.powi(4)).exp()
    }

    #[test]
    fn matrices_match_quadrature_oracle() {
        let rule = quadrature::build_rule(9.0, 256, 20).unwrap();
        for lam in [-0.75, 0.0, 3.0] {
            for sector in [ParitySector::Even, ParitySector::Odd] {
                let k = 8;
                let (h, s) = hamiltonian_and_overlap(&p(lam), sector, k).unwrap();
                for i in 0..=k {
                    for j in 0..=k {
                        let mi = sector.exponent(i) as i32;
                        let mj = sector.exponent(j);
                        let hq = rule.integrate(|x| x.powi(mi) * (-0.25 * x.powi(4)).exp() * apply_h(lam, mj, x));
                        let sq = rule.integrate(|x| x.powi(mi + mj as i32) * (-0.5 * x.powi(4)).exp());
                        assert_relative_eq!(h[(i, j)], hq, max_relative = 1e-10, epsilon = 1e-12);
                        assert_relative_eq!(s[(i, j)], sq, max_relative = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn overlap_entry_is_moment() {
        let (_, s) = hamiltonian_and_overlap(&p(0.3), ParitySector::Even, 3).unwrap();
        assert_eq!(s[(0, 0)], quadrature::weight_moment(0, 0.25).unwrap());
    }

    #[test]
    fn hamiltonian_symmetric() {
        let (h, _) = hamiltonian_and_overlap(&p(2.2), ParitySector::Odd, 10).unwrap();
        assert!((&h - h.transpose()).amax() < 1e-12);
    }

    #[test]
    fn zero_basis_rejected() {
        assert!(hamiltonian_and_overlap(&p(0.0), ParitySector::Even, 0).is_err());
    }

    #[test]
    fn conditioning_guard_trips_for_huge_basis() {
        let r = hamiltonian_and_overlap(&p(0.0), ParitySector::Even, 30);
        assert!(matches!(r, Err(Error::Conditioning { .. })));
        let spec = solve(&p(0.0), 30, 10).unwrap();
        assert!(spec.basis_sizes.0 < 30);
        assert!(!spec.warnings.is_empty());
        assert_relative_eq!(spec.states[0].energy, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn exact_energies() {
        let s0 = solve(&p(0.0), 10, 10).unwrap();
        assert!((s0.states[0].energy - 0.5).abs() < 1e-9);
        let s1 = solve(&p(1.0), 10, 10).unwrap();
        let r3 = 3f64.sqrt();
        assert!((s1.states[0].energy - (1.5 - r3)).abs() < 1e-8);
        assert!((s1.states[2].energy - (1.5 + r3)).abs() < 1e-8);
        let sh = solve(&p(0.5), 10, 10).unwrap();
        assert!((sh.states[1].energy - 1.5).abs() < 1e-8);
    }

    #[test]
    fn ground_coefficients_near_tabulated() {
        let s = solve(&p(0.0), 5, 5).unwrap();
        let c = &s.states[0].coefficients;
        assert_eq!(c[0], 1.0);
        let table = [-0.49981, 0.12433, -0.01995, 0.00208, -0.00011];
        for (a, b) in c[1..].iter().zip(table) {
            assert!((a - b).abs() < 2e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn own_eigenvector_quotient() {
        for lam in [-0.5, 1.3, 4.0] {
            let s = solve(&p(lam), 10, 10).unwrap();
            for st in &s.states[..4] {
                let q = rayleigh_quotient(&p(lam), st.parity, &st.coefficients).unwrap();
                assert_relative_eq!(q, st.energy, epsilon = 1e-12 * (1.0 + st.energy.abs()));
            }
        }
        assert!(rayleigh_quotient(&p(0.0), ParitySector::Even, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn truncated_exact_state_approaches_sector_energy() {
        // e^{-x^2/2}(1 + c x^2) e^{-x^4/4}, with the Gaussian factor Taylor-expanded
        let r3 = 3f64.sqrt();
        let e0 = 1.5 - r3;
        // λ=1 sector ground polynomial: -2 + (e0 - 5/2)... from the sector matrix eigenvector
        let c1 = (e0 - 0.5) / -1.0;
        let mut errors = Vec::new();
        for k in [3usize, 5, 7, 9] {
            let mut coeffs = vec![0.0; k + 1];
            let mut g = 1.0;
            for j in 0..=k {
                if j > 0 {
                    g *= -0.5 / j as f64;
                }
                coeffs[j] += g;
                if j < k {
                    coeffs[j + 1] += c1 * g;
                }
            }
            let q = rayleigh_quotient(&p(1.0), ParitySector::Even, &coeffs).unwrap();
            errors.push((q - e0).abs());
        }
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
        assert!(errors[3] < 1e-3);
    }

    #[test]
    fn normalization_and_parity() {
        let s = solve(&p(6.0), 10, 10).unwrap();
        let rule = default_rule(&s.params, 10).unwrap();
        for st in &s.states[..4] {
            let norm = rule.integrate(|x| st.value(x).powi(2));
            assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
            assert!(st.value(1e-3) > 0.0);
        }
        let odd = &s.states[1];
        assert_eq!(odd.parity, ParitySector::Odd);
        assert_eq!(odd.value(0.0), 0.0);
    }

    #[test]
    fn deep_well_ground_density_is_bimodal() {
        let s = solve(&p(6.0), 10, 10).unwrap();
        let grid: Vec<f64> = (-300..=300).map(|i| i as f64 * 0.01).collect();
        let w = evaluate_wavefunction(&s.states[0], &grid);
        for i in 0..grid.len() {
            assert!((w.density[i] - w.density[grid.len() - 1 - i]).abs() < 1e-14);
        }
        let xp = crate::potential::geometry(&s.params).minima_positions.1;
        let imax = (301..grid.len())
            .max_by(|&a, &b| w.density[a].total_cmp(&w.density[b]))
            .unwrap();
        assert!((grid[imax] - xp).abs() < 0.1);
        assert!(w.density[300] < w.density[299] && w.density[300] < w.density[301]);
        let rule = default_rule(&s.params, 10).unwrap();
        assert_relative_eq!(rule.integrate(|x| s.states[0].value(x).powi(2)), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn parity_pattern_and_order() {
        for i in 0..=27 {
            let lam = -0.75 + 0.25 * i as f64;
            let s = solve(&p(lam), 10, 10).unwrap();
            let e = s.energies();
            assert!(e[0] < e[1] && e[1] < e[2] && e[2] < e[3], "λ = {lam}");
            let pat: Vec<_> = s.states[..4].iter().map(|st| st.parity).collect();
            assert_eq!(
                pat,
                vec![
                    ParitySector::Even,
                    ParitySector::Odd,
                    ParitySector::Even,
                    ParitySector::Odd
                ]
            );
        }
    }

    #[test]
    fn energies_decrease_with_lambda_and_match_hellmann_feynman() {
        let grid: Vec<f64> = (0..=27).map(|i| -0.75 + 0.25 * i as f64).collect();
        let energies: Vec<Vec<f64>> = grid.iter().map(|&l| solve(&p(l), 10, 10).unwrap().energies()).collect();
        for n in 0..4 {
            assert!(energies.windows(2).all(|w| w[1][n] < w[0][n]), "n = {n}");
        }
        let d = 1e-4;
        for lam in [-0.5, 1.0, 2.5, 5.0] {
            let s = solve(&p(lam), 10, 10).unwrap();
            let up = solve(&p(lam + d), 10, 10).unwrap();
            let dn = solve(&p(lam - d), 10, 10).unwrap();
            for n in 0..4 {
                let fd = (up.states[n].energy - dn.states[n].energy) / (2.0 * d);
                let hf = -2.0 * expectation_x2(&s.states[n]);
                assert_relative_eq!(fd, hf, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn splitting_collapse() {
        let g = |l: f64| {
            let e = solve(&p(l), 10, 10).unwrap().energies();
            e[1] - e[0]
        };
        assert!(g(6.0) < 1e-2 * g(2.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn growing_even_basis_never_raises_energies(lam in -0.75f64..6.0, k in 2usize..10) {
                let a = solve(&p(lam), k, 4).unwrap();
                let b = solve(&p(lam), k + 1, 4).unwrap();
                let ea: Vec<f64> = a.states.iter().filter(|s| s.parity == ParitySector::Even).map(|s| s.energy).collect();
                let eb: Vec<f64> = b.states.iter().filter(|s| s.parity == ParitySector::Even).map(|s| s.energy).collect();
                for (x, y) in ea.iter().zip(&eb) {
                    prop_assert!(*y <= *x + 1e-12 * (1.0 + x.abs()));
                }
            }
        }
    }
}
