//! Hermite Lagrange-mesh eigensolver used as an independent reference.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::potential::{self, ModelParams};
use crate::variational::{EigenState, ParitySector, SpectrumResult};

const RESCALE: f64 = 1e150;
const ROOT_TOL: f64 = 1e-14;
/// Forbidden-region action beyond the reference turning point that the mesh must cover.
const TAIL_ACTION: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct MeshConfig {
    pub size: usize,
    pub scale: f64,
}

impl MeshConfig {
    pub fn new(size: usize, scale: f64) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidParameter(format!(
                "mesh size must be at least 2, got {size}"
            )));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mesh scale must be positive, got {scale}"
            )));
        }
        Ok(Self { size, scale })
    }

    /// Scale chosen so the outermost node sits where the `count`-th state has decayed.
    pub fn auto(params: &ModelParams, size: usize, count: usize) -> Result<Self> {
        let extent = MeshExtent::new(params, count);
        Self::new(size, 1.2 * extent.reach / (2.0 * size as f64).sqrt())
    }

    /// Size large enough to resolve both the spatial reach and peak momentum, with the auto scale.
    pub fn suggested(params: &ModelParams, count: usize) -> Result<Self> {
        let extent = MeshExtent::new(params, count);
        let size = ((1.5 * extent.reach * extent.momentum).ceil() as usize).max(60);
        Self::auto(params, size, count)
    }
}

struct MeshExtent {
    reach: f64,
    momentum: f64,
}

impl MeshExtent {
    fn new(params: &ModelParams, count: usize) -> Self {
        let geo = potential::geometry(params);
        let xm = geo.minima_positions.1;
        let omega = potential::second_derivative(params, xm).max(1.0).sqrt();
        let e_ref = geo.minima_value + (count as f64 + 1.0) * omega;
        let xt = potential::outer_turning_point(params, e_ref);
        let momentum = (2.0 * (e_ref - geo.minima_value)).sqrt();
        let kappa = |x: f64| (2.0 * (potential::evaluate(params, x) - e_ref)).max(0.0).sqrt();
        let step = 0.02 * xt.max(0.5);
        let mut action = 0.0;
        let mut x = xt;
        // Simpson panels until the accumulated decay action is reached
        loop {
            let piece = step / 6.0 * (kappa(x) + 4.0 * kappa(x + 0.5 * step) + kappa(x + step));
            if action + piece >= TAIL_ACTION {
                let frac = (TAIL_ACTION - action) / piece;
                x += frac * step;
                break;
            }
            action += piece;
            x += step;
        }
        Self { reach: x, momentum }
    }
}

/// Which potential the mesh Hamiltonian uses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeshPotential {
    Model,
    /// `x^2 / 2`, exact on the Hermite mesh with unit scale.
    Harmonic,
}

/// Normalized Hermite functions `φ_0..φ_{n-1}` at `u`, via a rescaled recurrence.
pub fn hermite_functions(n: usize, u: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let mut logs = vec![0.0; n];
    let mut log_scale = 0.0;
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    for k in 0..n {
        out[k] = cur;
        logs[k] = log_scale;
        let kf = k as f64;
        let next = u * (2.0 / (kf + 1.0)).sqrt() * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    let g = -0.5 * u * u;
    for k in 0..n {
        out[k] *= (logs[k] + g).exp();
    }
    out
}

/// Newton step `p_n(u) / p_n'(u)` for the orthonormal Hermite polynomial of degree `n`.
fn newton_ratio(n: usize, u: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let kf = k as f64;
        let next = u * (2.0 / (kf + 1.0)).sqrt() * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
        }
    }
    cur / ((2.0 * n as f64).sqrt() * prev)
}

/// Roots of `H_n`, ascending: Jacobi-matrix eigenvalues polished by Newton steps.
pub fn hermite_roots(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (0.5 * i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut guesses: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().cloned().collect();
    guesses.sort_by(f64::total_cmp);
    let mut roots = Vec::with_capacity(n);
    for (i, &g) in guesses.iter().enumerate() {
        let mut z = g;
        let mut converged = false;
        for _ in 0..20 {
            let dz = newton_ratio(n, z);
            z -= dz;
            if dz.abs() <= ROOT_TOL * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged || !z.is_finite() || (z - g).abs() > 1e-6 * g.abs().max(1.0) {
            return Err(Error::NoConvergence(format!("Hermite root {i} of degree {n}")));
        }
        roots.push(z);
    }
    // exact mirror symmetry
    for i in 0..n / 2 {
        let r = 0.5 * (roots[n - 1 - i] - roots[i]);
        roots[i] = -r;
        roots[n - 1 - i] = r;
    }
    if n % 2 == 1 {
        roots[n / 2] = 0.0;
    }
    if roots.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::NoConvergence(format!(
            "Hermite roots of degree {n} are not distinct"
        )));
    }
    Ok(roots)
}

/// Mesh wavefunction as a Hermite-function expansion in the scaled coordinate.
#[derive(Debug)]
pub struct MeshExpansion {
    pub scale: f64,
    pub node_values: Vec<f64>,
    pub nodes: Vec<f64>,
    hermite_coefficients: Vec<f64>,
}

impl MeshExpansion {
    pub fn value(&self, x: f64) -> f64 {
        let n = self.hermite_coefficients.len();
        let u = x / self.scale;
        let mut sum = 0.0;
        let mut prev = 0.0;
        let mut cur = std::f64::consts::PI.powf(-0.25);
        let mut log_scale = 0.0;
        for k in 0..n {
            sum += self.hermite_coefficients[k] * cur;
            let kf = k as f64;
            let next = u * (2.0 / (kf + 1.0)).sqrt() * cur - (kf / (kf + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
            if cur.abs() > RESCALE {
                cur /= RESCALE;
                prev /= RESCALE;
                sum /= RESCALE;
                log_scale += RESCALE.ln();
            }
        }
        sum * (log_scale - 0.5 * u * u).exp() / self.scale.sqrt()
    }
}

pub fn mesh_solve(params: &ModelParams, config: &MeshConfig, count: usize) -> Result<SpectrumResult> {
    mesh_solve_with(params, config, count, MeshPotential::Model)
}

pub fn mesh_solve_with(
    params: &ModelParams,
    config: &MeshConfig,
    count: usize,
    which: MeshPotential,
) -> Result<SpectrumResult> {
    let n = config.size;
    if count == 0 || 4 * count > n {
        return Err(Error::InvalidParameter(format!(
            "mesh of size {n} supports at most {} states, {count} requested",
            n / 4
        )));
    }
    let h = config.scale;
    let u = hermite_roots(n)?;
    let nf = n as f64;
    let mut ham = DMatrix::zeros(n, n);
    let kin = 1.0 / (2.0 * h * h);
    for i in 0..n {
        for j in 0..n {
            let t = if i == j {
                (4.0 * nf - 1.0 - 2.0 * u[i] * u[i]) / 6.0
            } else {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                sign * (2.0 / (u[i] - u[j]).powi(2) - 0.5)
            };
            ham[(i, j)] = kin * t;
        }
        let x = h * u[i];
        ham[(i, i)] += match which {
            MeshPotential::Model => potential::evaluate(params, x),
            MeshPotential::Harmonic => 0.5 * x * x,
        };
    }
    let eig = SymmetricEigen::new(ham);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    // λ_j^{-1/2} = √N |φ_{N-1}(u_j)|; Φ_kj = λ_j^{1/2} φ_k(u_j) is orthogonal
    let phis: Vec<Vec<f64>> = u.iter().map(|&uj| hermite_functions(n, uj)).collect();
    let sqrt_lambda: Vec<f64> = phis.iter().map(|p| 1.0 / (nf.sqrt() * p[n - 1].abs())).collect();
    let mut states = Vec::with_capacity(count);
    for (idx, &col) in order.iter().take(count).enumerate() {
        let mut c: Vec<f64> = eig.eigenvectors.column(col).iter().cloned().collect();
        let mirror: f64 = (0..n).map(|j| c[j] * c[n - 1 - j]).sum();
        let parity = if mirror > 0.0 {
            ParitySector::Even
        } else {
            ParitySector::Odd
        };
        // sign convention: positive just right of the origin
        let first_pos = (0..n).find(|&j| u[j] > 0.0).unwrap_or(n - 1);
        let probe = match parity {
            ParitySector::Even => c[first_pos] + if n % 2 == 1 { c[n / 2] } else { 0.0 },
            ParitySector::Odd => c[first_pos],
        };
        if probe < 0.0 {
            c.iter_mut().for_each(|v| *v = -*v);
        }
        let mut hc = vec![0.0; n];
        for (j, cj) in c.iter().enumerate() {
            let w = cj * sqrt_lambda[j];
            for k in 0..n {
                hc[k] += w * phis[j][k];
            }
        }
        let node_values = c
            .iter()
            .zip(&sqrt_lambda)
            .map(|(cj, sl)| cj / (sl * h.sqrt()))
            .collect();
        states.push(EigenState {
            n: idx,
            parity,
            energy: eig.eigenvalues[col],
            coefficients: Vec::new(),
            norm_constant: 1.0,
            mesh: Some(Arc::new(MeshExpansion {
                scale: h,
                node_values,
                nodes: u.iter().map(|v| v * h).collect(),
                hermite_coefficients: hc,
            })),
        });
    }
    Ok(SpectrumResult {
        params: *params,
        states,
        basis_sizes: (n, n),
        warnings: Vec::new(),
    })
}

/// Lowest four energies for each mesh size, with the auto scale.
pub fn convergence_scan(params: &ModelParams, sizes: &[usize]) -> Result<Vec<(usize, [f64; 4])>> {
    sizes
        .iter()
        .map(|&size| {
            let cfg = MeshConfig::auto(params, size, 4)?;
            let spec = mesh_solve(params, &cfg, 4)?;
            let e = spec.energies();
            Ok((size, [e[0], e[1], e[2], e[3]]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature;
    use approx::assert_relative_eq;

    fn p(l: f64) -> ModelParams {
        ModelParams::new(l).unwrap()
    }

    fn solve_auto(l: f64, size: usize) -> SpectrumResult {
        let cfg = MeshConfig::auto(&p(l), size, 4).unwrap();
        mesh_solve(&p(l), &cfg, 4).unwrap()
    }

    #[test]
    fn roots_are_roots() {
        for n in [1, 2, 5, 20, 60, 201, 400] {
            let r = hermite_roots(n).unwrap();
            assert_eq!(r.len(), n);
            for &x in &r {
                assert!(newton_ratio(n, x).abs() < 1e-12 * x.abs().max(1.0));
            }
        }
        let r = hermite_roots(2).unwrap();
        assert_relative_eq!(r[1], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn hermite_functions_orthonormal() {
        let rule = quadrature::build_rule(12.0, 200, 16).unwrap();
        let n = 12;
        for a in 0..n {
            for b in 0..n {
                let v = rule.integrate(|u| {
                    let f = hermite_functions(n, u);
                    f[a] * f[b]
                });
                assert!((v - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn harmonic_mode_is_exact() {
        let cfg = MeshConfig::new(40, 1.0).unwrap();
        let s = mesh_solve_with(&p(0.0), &cfg, 6, MeshPotential::Harmonic).unwrap();
        for (n, st) in s.states.iter().enumerate() {
            assert!((st.energy - (n as f64 + 0.5)).abs() < 1e-11);
        }
    }

    #[test]
    fn exact_targets() {
        let s = solve_auto(0.0, 60);
        assert!((s.states[0].energy - 0.5).abs() < 1e-10);
        let s = solve_auto(1.0, 60);
        assert!((s.states[0].energy - (1.5 - 3f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn count_guard() {
        let cfg = MeshConfig::new(20, 0.5).unwrap();
        assert!(mesh_solve(&p(0.0), &cfg, 6).is_err());
        assert!(MeshConfig::new(20, 0.0).is_err());
    }

    #[test]
    fn self_convergence() {
        let t = convergence_scan(&p(6.0), &[40, 60, 80]).unwrap();
        let d1 = (t[1].1[0] - t[0].1[0]).abs();
        let d2 = (t[2].1[0] - t[1].1[0]).abs();
        assert!(d2 < d1 || d1 < 1e-12, "{d1} {d2}");
        let t = convergence_scan(&p(-0.75), &[40, 80]).unwrap();
        assert!((t[1].1[0] - t[0].1[0]).abs() < 1e-10);
        assert!(convergence_scan(&p(0.0), &[]).unwrap().is_empty());
    }

    #[test]
    fn scale_robustness() {
        for l in [-0.75, 0.0, 1.0, 3.0, 6.0] {
            let base = MeshConfig::auto(&p(l), 80, 4).unwrap();
            let e0 = mesh_solve(&p(l), &base, 4).unwrap().states[0].energy;
            for f in [0.75, 1.25] {
                let cfg = MeshConfig::new(80, base.scale * f).unwrap();
                let e = mesh_solve(&p(l), &cfg, 4).unwrap().states[0].energy;
                assert!((e - e0).abs() < 1e-9, "λ = {l}, factor {f}: {e} vs {e0}");
            }
        }
    }

    #[test]
    fn bound_consistency_with_variational() {
        for l in [-0.75, 0.0, 1.5, 3.0, 6.0] {
            let mesh = solve_auto(l, 80);
            let var = crate::variational::solve(&p(l), 10, 10).unwrap();
            for n in 0..4 {
                assert!(mesh.states[n].energy <= var.states[n].energy + 1e-10);
            }
        }
    }

    #[test]
    fn eigenvectors_orthonormal_and_interpolate() {
        let s = solve_auto(2.0, 60);
        let rule = quadrature::build_rule(6.0, 128, 16).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let ma = s.states[a].mesh.as_ref().unwrap();
                let mb = s.states[b].mesh.as_ref().unwrap();
                // Gauss sum over mesh weights: Σ ψ_a(x_j) ψ_b(x_j) h λ_j = Σ c_a c_b
                let gauss: f64 = ma
                    .node_values
                    .iter()
                    .zip(&mb.node_values)
                    .zip(&ma.nodes)
                    .map(|((va, vb), &x)| {
                        let u = x / ma.scale;
                        let f = hermite_functions(60, u);
                        va * vb * ma.scale / (60.0 * f[59] * f[59])
                    })
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((gauss - want).abs() < 1e-10);
                let cont = rule.integrate(|x| s.states[a].value(x) * s.states[b].value(x));
                assert!((cont - want).abs() < 1e-10);
            }
            let m = s.states[a].mesh.as_ref().unwrap();
            for (x, v) in m.nodes.iter().zip(&m.node_values) {
                assert!((s.states[a].value(*x) - v).abs() < 1e-10);
            }
        }
        assert_eq!(s.states[0].parity, ParitySector::Even);
        assert_eq!(s.states[1].parity, ParitySector::Odd);
        assert!(s.states[1].value(0.0).abs() < 1e-12);
    }
}
