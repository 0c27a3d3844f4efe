//! λ sweeps, critical couplings and tunneling-pair diagnostics.

use std::cell::Cell as StdCell;
use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use roots::{find_root_brent, SimpleConvergency};

use crate::error::{Error, Result};
use crate::infotheory::{self, Density};
use crate::lagrange_mesh::{self, MeshConfig};
use crate::output::{Cell, Table};
use crate::potential::ModelParams;
use crate::quadrature::QuadratureRule;
use crate::variational::{self, SpectrumResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum Quantity {
    Energy,
    Dx,
    Dp,
    Sx,
    Sp,
    St,
    Heisenberg,
    KlPairs,
    CrjPairs,
    CrjHo,
}

impl Quantity {
    pub const ALL: [Quantity; 10] = [
        Quantity::Energy,
        Quantity::Dx,
        Quantity::Dp,
        Quantity::Sx,
        Quantity::Sp,
        Quantity::St,
        Quantity::Heisenberg,
        Quantity::KlPairs,
        Quantity::CrjPairs,
        Quantity::CrjHo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Energy => "energy",
            Quantity::Dx => "dx",
            Quantity::Dp => "dp",
            Quantity::Sx => "sx",
            Quantity::Sp => "sp",
            Quantity::St => "st",
            Quantity::Heisenberg => "heisenberg",
            Quantity::KlPairs => "kl_pairs",
            Quantity::CrjPairs => "crj_pairs",
            Quantity::CrjHo => "crj_ho",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown quantity '{s}'")))
    }

    fn needs_measures(self) -> bool {
        matches!(
            self,
            Quantity::Dx | Quantity::Dp | Quantity::Sx | Quantity::Sp | Quantity::St | Quantity::Heisenberg
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Solver {
    Variational,
    Mesh,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ScanSpec {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub step: f64,
    pub states: Vec<usize>,
    pub quantities: BTreeSet<Quantity>,
    pub solver: Solver,
    pub k_even: usize,
    pub k_odd: usize,
    pub mesh_size: Option<usize>,
    pub mesh_scale: Option<f64>,
    pub ho_omega: Option<f64>,
}

impl ScanSpec {
    pub fn new(lambda_min: f64, lambda_max: f64, step: f64) -> Result<Self> {
        let spec = Self {
            lambda_min,
            lambda_max,
            step,
            states: vec![0, 1, 2, 3],
            quantities: [Quantity::Energy].into_iter().collect(),
            solver: Solver::Variational,
            k_even: variational::DEFAULT_BASIS,
            k_odd: variational::DEFAULT_BASIS,
            mesh_size: None,
            mesh_scale: None,
            ho_omega: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scan step must be positive, got {}",
                self.step
            )));
        }
        if !(self.lambda_min < self.lambda_max) || !self.lambda_min.is_finite() || !self.lambda_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need lambda_min < lambda_max, got {} and {}",
                self.lambda_min, self.lambda_max
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let count = ((self.lambda_max - self.lambda_min) / self.step + 1e-9).floor() as usize;
        (0..=count).map(|i| self.lambda_min + i as f64 * self.step).collect()
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec!["lambda".to_string(), "n".to_string()];
        cols.extend(self.quantities.iter().map(|q| q.name().to_string()));
        cols.push("flag".to_string());
        cols
    }
}

/// Tunneling partner of state `n`: 0↔1, 2↔3, ...
pub fn partner(n: usize) -> usize {
    n ^ 1
}

pub fn solve_with(
    params: &ModelParams,
    solver: Solver,
    k_even: usize,
    k_odd: usize,
    mesh_size: Option<usize>,
    mesh_scale: Option<f64>,
    count: usize,
) -> Result<SpectrumResult> {
    match solver {
        Solver::Variational => variational::solve(params, k_even, k_odd),
        Solver::Mesh => {
            let base = MeshConfig::suggested(params, count)?;
            let size = mesh_size.unwrap_or(base.size).max(4 * count);
            let cfg = match mesh_scale {
                Some(h) => MeshConfig::new(size, h)?,
                None => MeshConfig::auto(params, size, count)?,
            };
            lagrange_mesh::mesh_solve(params, &cfg, count)
        }
    }
}

fn position_rule(spec_k: usize) -> Result<Arc<QuadratureRule>> {
    Ok(Arc::new(crate::quadrature::position_rule(
        2 * (2 * spec_k as u32 + 1),
        ModelParams::DEFAULT_TOL_QUAD,
    )?))
}

fn scan_point(spec: &ScanSpec, lambda: f64) -> Result<Vec<Vec<Cell>>> {
    let params = ModelParams::new(lambda)?;
    let needs_partner = spec.quantities.contains(&Quantity::KlPairs) || spec.quantities.contains(&Quantity::CrjPairs);
    let top = spec
        .states
        .iter()
        .map(|&n| if needs_partner { n.max(partner(n)) } else { n })
        .max()
        .unwrap_or(0);
    let spectrum = solve_with(
        &params,
        spec.solver,
        spec.k_even,
        spec.k_odd,
        spec.mesh_size,
        spec.mesh_scale,
        top + 1,
    )?;
    if spectrum.states.len() <= top {
        return Err(Error::InvalidParameter(format!(
            "solver returned {} states, need {}",
            spectrum.states.len(),
            top + 1
        )));
    }
    let rule = position_rule(spec.k_even.max(spec.k_odd))?;
    let densities: Vec<Option<Density>> = (0..=top)
        .map(|n| {
            let wanted = spec.states.contains(&n) || (needs_partner && spec.states.iter().any(|&m| partner(m) == n));
            wanted.then(|| Density::of_state(&spectrum.states[n], rule.clone()))
        })
        .collect();
    let omega = spec.ho_omega.unwrap_or_else(|| infotheory::default_ho_omega(lambda));
    let mut rows = Vec::with_capacity(spec.states.len());
    for &n in &spec.states {
        let state = &spectrum.states[n];
        let report = if spec.quantities.iter().any(|q| q.needs_measures()) {
            Some(infotheory::measure_state(state, rule.clone())?)
        } else {
            None
        };
        let rho = densities[n].as_ref().expect("density computed for requested state");
        let mut row = vec![Cell::Num(lambda), Cell::Int(n as i64)];
        for q in &spec.quantities {
            let v = match q {
                Quantity::Energy => state.energy,
                Quantity::Dx => report.unwrap().delta_x,
                Quantity::Dp => report.unwrap().delta_p,
                Quantity::Sx => report.unwrap().s_x,
                Quantity::Sp => report.unwrap().s_p,
                Quantity::St => report.unwrap().s_t,
                Quantity::Heisenberg => report.unwrap().heisenberg,
                Quantity::KlPairs => {
                    let other = densities[partner(n)].as_ref().expect("partner density");
                    infotheory::kl_divergence(rho, other)?.value
                }
                Quantity::CrjPairs => {
                    let other = densities[partner(n)].as_ref().expect("partner density");
                    infotheory::crj_divergence(rho, other)?
                }
                Quantity::CrjHo => {
                    let ho = infotheory::ho_reference_density(n, omega, rule.clone())?;
                    infotheory::crj_divergence(rho, &ho)?
                }
            };
            row.push(Cell::Num(v));
        }
        row.push(Cell::Text(spectrum.warnings.join("; ")));
        rows.push(row);
    }
    Ok(rows)
}

/// One row per `(λ, n)`, λ-major; a failing grid point yields flagged rows.
pub fn run_scan(spec: &ScanSpec) -> Result<Table> {
    spec.validate()?;
    let mut table = Table::new(spec.columns());
    if spec.quantities.is_empty() {
        return Ok(table);
    }
    let grid = spec.grid();
    let blocks: Vec<Vec<Vec<Cell>>> = grid
        .par_iter()
        .map(|&lambda| {
            scan_point(spec, lambda).unwrap_or_else(|e| {
                spec.states
                    .iter()
                    .map(|&n| {
                        let mut row = vec![Cell::Num(lambda), Cell::Int(n as i64)];
                        row.extend(spec.quantities.iter().map(|_| Cell::Num(f64::NAN)));
                        row.push(Cell::Text(format!("failed: {e}")));
                        row
                    })
                    .collect()
            })
        })
        .collect();
    for block in blocks {
        for row in block {
            table.push(row);
        }
    }
    Ok(table)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CriticalCoupling {
    pub n: usize,
    pub lambda_c: f64,
    pub bracket: (f64, f64),
    pub residual: f64,
    /// `|E_n|` from the mesh solver at the root.
    pub mesh_residual: f64,
}

pub fn find_critical(n: usize, bracket: (f64, f64), k_even: usize, k_odd: usize) -> Result<CriticalCoupling> {
    let (lo, hi) = bracket;
    let failure: StdCell<Option<Error>> = StdCell::new(None);
    let energy = |lambda: f64| -> f64 {
        let r = ModelParams::new(lambda).and_then(|p| variational::solve(&p, k_even, k_odd));
        match r {
            Ok(s) if s.states.len() > n => s.states[n].energy,
            Ok(_) => {
                failure.set(Some(Error::InvalidParameter(format!("state {n} not available"))));
                f64::NAN
            }
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        }
    };
    let (elo, ehi) = (energy(lo), energy(hi));
    if let Some(e) = failure.take() {
        return Err(e);
    }
    if !(elo > 0.0 && ehi < 0.0) {
        return Err(Error::NoSignChange { n, lo, hi });
    }
    let mut conv = SimpleConvergency {
        eps: 1e-14f64,
        max_iter: 200,
    };
    let root = find_root_brent(lo, hi, &energy, &mut conv)
        .map_err(|e| Error::NoConvergence(format!("critical coupling search for n = {n}: {e:?}")))?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let residual = energy(root).abs();
    let params = ModelParams::new(root)?;
    let cfg = MeshConfig::auto(&params, 80, n + 1)?;
    let mesh = lagrange_mesh::mesh_solve(&params, &cfg, n + 1)?;
    Ok(CriticalCoupling {
        n,
        lambda_c: root,
        bracket,
        residual,
        mesh_residual: mesh.states[n].energy.abs(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct PairingReport {
    pub lambda: f64,
    pub gap_01: f64,
    pub gap_23: f64,
    pub crj_01: f64,
    pub crj_23: f64,
}

pub fn pairing_report(lambda: f64, k_even: usize, k_odd: usize) -> Result<PairingReport> {
    let params = ModelParams::new(lambda)?;
    let s = variational::solve(&params, k_even, k_odd)?;
    let rule = position_rule(k_even.max(k_odd))?;
    let d: Vec<Density> = s.states[..4]
        .iter()
        .map(|st| Density::of_state(st, rule.clone()))
        .collect();
    Ok(PairingReport {
        lambda,
        gap_01: s.states[1].energy - s.states[0].energy,
        gap_23: s.states[3].energy - s.states[2].energy,
        crj_01: infotheory::crj_divergence(&d[0], &d[1])?,
        crj_23: infotheory::crj_divergence(&d[2], &d[3])?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_validation() {
        let s = ScanSpec::new(-0.75, 6.0, 0.25).unwrap();
        let g = s.grid();
        assert_eq!(g.len(), 28);
        assert_eq!(g[27], 6.0);
        assert!(ScanSpec::new(1.0, 0.0, 0.1).is_err());
        assert!(ScanSpec::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn energy_scan_monotone_and_ordered() {
        let s = ScanSpec::new(-0.75, 6.0, 0.25).unwrap();
        let t = run_scan(&s).unwrap();
        assert_eq!(t.rows.len(), 28 * 4);
        for n in 0..4 {
            let e: Vec<f64> = t
                .rows
                .iter()
                .filter(|r| r[1] == Cell::Int(n))
                .map(|r| r[2].as_f64().unwrap())
                .collect();
            assert!(e.windows(2).all(|w| w[1] < w[0]));
        }
        let lam: Vec<f64> = t.rows.iter().map(|r| r[0].as_f64().unwrap()).collect();
        assert!(lam.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn empty_quantities_header_only() {
        let mut s = ScanSpec::new(0.0, 1.0, 0.5).unwrap();
        s.quantities.clear();
        let t = run_scan(&s).unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.columns, vec!["lambda", "n", "flag"]);
    }

    #[test]
    fn failures_become_flagged_rows() {
        let mut s = ScanSpec::new(0.0, 1.0, 0.5).unwrap();
        s.states = vec![0, 30];
        let t = run_scan(&s).unwrap();
        assert_eq!(t.rows.len(), 6);
        assert!(t
            .rows
            .iter()
            .all(|r| matches!(&r[3], Cell::Text(f) if f.starts_with("failed"))));
    }

    #[test]
    fn deterministic() {
        let mut s = ScanSpec::new(0.0, 2.0, 1.0).unwrap();
        s.quantities = [Quantity::Energy, Quantity::St, Quantity::CrjPairs]
            .into_iter()
            .collect();
        let a = run_scan(&s).unwrap();
        let b = run_scan(&s).unwrap();
        assert_eq!(crate::output::to_csv(&a), crate::output::to_csv(&b));
    }

    #[test]
    fn critical_ground() {
        let c = find_critical(0, (0.5, 1.0), 10, 10).unwrap();
        assert!((c.lambda_c - 0.7329531).abs() < 1e-5);
        assert!(c.residual < 1e-9);
        assert!(c.mesh_residual < 1e-7);
        assert!(c.lambda_c > c.bracket.0 && c.lambda_c < c.bracket.1);
        assert!(matches!(
            find_critical(0, (2.0, 3.0), 10, 10),
            Err(Error::NoSignChange { .. })
        ));
    }

    #[test]
    fn pairing() {
        let a = pairing_report(0.0, 10, 10).unwrap();
        let b = pairing_report(6.0, 10, 10).unwrap();
        assert!(a.gap_01 > 0.0 && b.gap_01 > 0.0);
        assert!(b.gap_01 < 1e-2 * a.gap_01);
    }
}
