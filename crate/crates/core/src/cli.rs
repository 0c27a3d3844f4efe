//! Command-line front end.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::config;
use crate::error::Error;
use crate::infotheory::{self, Density};
use crate::lagrange_mesh::{self, MeshConfig, MeshPotential};
use crate::momentum::{self, FourierEvaluator};
use crate::output::{self, Cell, Format, Meta, Table};
use crate::potential::{self, ModelParams};
use crate::qes_exact;
use crate::quadrature;
use crate::scans::{self, Quantity, ScanSpec, Solver};
use crate::variational::{self, ParitySector};
use crate::wkb;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "qes-sextic",
    version,
    about = "Quasi-exactly solvable sextic double well: spectra, entropies, divergences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Coupling value, or a comma-separated list
    #[arg(long, global = true, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Coupling sweep as lo,hi,step
    #[arg(long = "lambda-range", global = true, allow_hyphen_values = true)]
    lambda_range: Option<String>,
    /// State indices, e.g. 0..3 or 0,2
    #[arg(long, global = true)]
    states: Option<String>,
    #[arg(long = "k-even", global = true)]
    k_even: Option<String>,
    #[arg(long = "k-odd", global = true)]
    k_odd: Option<String>,
    #[arg(long = "mesh-size", global = true)]
    mesh_size: Option<String>,
    #[arg(long = "mesh-scale", global = true)]
    mesh_scale: Option<String>,
    /// Oscillator frequency for the harmonic comparison
    #[arg(long = "ho-omega", global = true)]
    ho_omega: Option<String>,
    /// csv or json
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// key = value file; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// variational or mesh
    #[arg(long, global = true)]
    solver: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Energies and coefficients at one or more couplings
    Solve,
    /// Sweep quantities over a coupling range
    Scan {
        /// Comma-separated: energy,dx,dp,sx,sp,st,heisenberg,kl_pairs,crj_pairs,crj_ho
        #[arg(long)]
        quantities: Option<String>,
    },
    /// Coupling where E_n crosses zero
    Critical {
        #[arg(long)]
        n: Option<String>,
        /// lo,hi
        #[arg(long)]
        bracket: Option<String>,
    },
    /// Uncertainties and Shannon entropies per state
    Entropy,
    /// KL and CRJ divergences between states, oscillator and exact densities
    Divergence {
        /// Ordered pairs a:b, comma-separated
        #[arg(long)]
        pairs: Option<String>,
    },
    /// Semiclassical quantities for large |λ|
    Wkb,
    /// Exact sector against the variational solver
    QesCheck,
    /// Run the built-in invariant suite
    Selftest,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::NotAlgebraic(_)
            | Error::ParityMismatch(_)
            | Error::GridMismatch(_)
            | Error::Io { .. } => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Effective settings: config file entries overridden by flags.
struct Settings {
    map: BTreeMap<String, String>,
    out: Option<PathBuf>,
}

impl Settings {
    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn lambdas(&self) -> CliResult<Vec<f64>> {
        match (self.get("lambda"), self.get("lambda_range")) {
            (Some(l), _) => Ok(config::parse_reals("lambda", l)?),
            (None, Some(r)) => Ok(range_spec(r)?.grid()),
            (None, None) => Err(Failure::Usage("--lambda or --lambda-range is required".into())),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> CliResult<usize> {
        match self.get(key) {
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("{key}: '{v}' is not a non-negative integer"))),
            None => Ok(default),
        }
    }

    fn real(&self, key: &str) -> CliResult<Option<f64>> {
        self.get(key)
            .map(|v| config::parse_real(key, v))
            .transpose()
            .map_err(Failure::from)
    }

    fn states(&self, default: &[usize]) -> CliResult<Vec<usize>> {
        match self.get("states") {
            Some(s) => Ok(config::parse_indices("states", s)?),
            None => Ok(default.to_vec()),
        }
    }

    fn k(&self) -> CliResult<(usize, usize)> {
        Ok((
            self.usize_or("k_even", variational::DEFAULT_BASIS)?,
            self.usize_or("k_odd", variational::DEFAULT_BASIS)?,
        ))
    }

    fn solver(&self) -> CliResult<Solver> {
        match self.get("solver").unwrap_or("variational") {
            "variational" => Ok(Solver::Variational),
            "mesh" => Ok(Solver::Mesh),
            other => Err(Failure::Usage(format!("unknown solver '{other}'"))),
        }
    }

    fn format(&self) -> CliResult<Format> {
        Ok(Format::parse(self.get("format").unwrap_or("csv"))?)
    }

    fn mesh(&self) -> CliResult<(Option<usize>, Option<f64>)> {
        let size = self
            .get("mesh_size")
            .map(|_| self.usize_or("mesh_size", 0))
            .transpose()?;
        Ok((size, self.real("mesh_scale")?))
    }
}

fn range_spec(r: &str) -> crate::Result<ScanSpec> {
    let v = config::parse_reals("lambda_range", r)?;
    if v.len() != 3 {
        return Err(Error::InvalidParameter(format!(
            "lambda_range needs lo,hi,step, got '{r}'"
        )));
    }
    ScanSpec::new(v[0], v[1], v[2])
}

fn collect_settings(common: &Common, command: &Command) -> CliResult<Settings> {
    let mut map = match &common.config {
        Some(p) => config::load(p)?,
        None => BTreeMap::new(),
    };
    let mut set = |k: &str, v: &Option<String>| {
        if let Some(v) = v {
            map.insert(k.to_string(), v.clone());
        }
    };
    set("lambda", &common.lambda);
    set("lambda_range", &common.lambda_range);
    set("states", &common.states);
    set("k_even", &common.k_even);
    set("k_odd", &common.k_odd);
    set("mesh_size", &common.mesh_size);
    set("mesh_scale", &common.mesh_scale);
    set("ho_omega", &common.ho_omega);
    set("format", &common.format);
    set("solver", &common.solver);
    match command {
        Command::Scan { quantities } => set("quantities", quantities),
        Command::Critical { n, bracket } => {
            set("n", n);
            set("bracket", bracket);
        }
        Command::Divergence { pairs } => set("pairs", pairs),
        _ => {}
    }
    let out = common.out.clone().or_else(|| map.get("out").map(PathBuf::from));
    map.remove("out");
    Ok(Settings { map, out })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Solve => "solve",
        Command::Scan { .. } => "scan",
        Command::Critical { .. } => "critical",
        Command::Entropy => "entropy",
        Command::Divergence { .. } => "divergence",
        Command::Wkb => "wkb",
        Command::QesCheck => "qes-check",
        Command::Selftest => "selftest",
    }
}

fn num(v: f64) -> Cell {
    Cell::Num(v)
}

fn text<S: Into<String>>(s: S) -> Cell {
    Cell::Text(s.into())
}

fn cmd_solve(s: &Settings) -> CliResult<Table> {
    let lambdas = s.lambdas()?;
    let (ke, ko) = s.k()?;
    let solver = s.solver()?;
    let (mesh_size, mesh_scale) = s.mesh()?;
    let states = s.states(&[0, 1, 2, 3])?;
    let count = states.iter().max().map_or(1, |m| m + 1);
    let mut t = Table::new(["lambda", "n", "parity", "energy", "norm_constant", "coefficients"]);
    for lambda in lambdas {
        let params = ModelParams::new(lambda)?;
        let spec = scans::solve_with(&params, solver, ke, ko, mesh_size, mesh_scale, count)?;
        for w in &spec.warnings {
            eprintln!("warning: λ = {lambda}: {w}");
        }
        for &n in &states {
            let st = spec
                .states
                .get(n)
                .ok_or_else(|| Failure::Usage(format!("state {n} is beyond the computed spectrum")))?;
            let coeffs: Vec<String> = st.coefficients.iter().map(|c| output::format_number(*c)).collect();
            t.push(vec![
                num(lambda),
                Cell::Int(n as i64),
                text(st.parity.label()),
                num(st.energy),
                num(st.norm_constant),
                text(coeffs.join(";")),
            ]);
        }
    }
    Ok(t)
}

fn cmd_scan(s: &Settings) -> CliResult<Table> {
    let range = s
        .get("lambda_range")
        .ok_or_else(|| Failure::Usage("scan needs --lambda-range lo,hi,step".into()))?;
    let mut spec = range_spec(range)?;
    spec.states = s.states(&[0, 1, 2, 3])?;
    if let Some(q) = s.get("quantities") {
        spec.quantities = q
            .split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(Quantity::parse)
            .collect::<crate::Result<_>>()?;
    }
    spec.solver = s.solver()?;
    (spec.k_even, spec.k_odd) = s.k()?;
    (spec.mesh_size, spec.mesh_scale) = s.mesh()?;
    spec.ho_omega = s.real("ho_omega")?;
    Ok(scans::run_scan(&spec)?)
}

/// Brackets that contain the zero crossing of each of the four lowest levels.
fn default_bracket(n: usize) -> Option<(f64, f64)> {
    match n {
        0 => Some((0.5, 1.0)),
        1 => Some((1.0, 2.0)),
        2 => Some((3.0, 3.5)),
        3 => Some((3.5, 4.5)),
        _ => None,
    }
}

fn cmd_critical(s: &Settings) -> CliResult<Table> {
    let ns = match s.get("n") {
        Some(v) => config::parse_indices("n", v)?,
        None => vec![0],
    };
    let (ke, ko) = s.k()?;
    let explicit = s
        .get("bracket")
        .map(|b| config::parse_reals("bracket", b))
        .transpose()?;
    if let Some(b) = &explicit {
        if b.len() != 2 || ns.len() != 1 {
            return Err(Failure::Usage("--bracket takes lo,hi and a single --n".into()));
        }
    }
    let mut t = Table::new(["n", "lambda_c", "bracket_lo", "bracket_hi", "residual", "mesh_residual"]);
    for n in ns {
        let bracket = match &explicit {
            Some(b) => (b[0], b[1]),
            None => default_bracket(n)
                .ok_or_else(|| Failure::Usage(format!("no default bracket for n = {n}; pass --bracket")))?,
        };
        let c = scans::find_critical(n, bracket, ke, ko)?;
        t.push(vec![
            Cell::Int(n as i64),
            num(c.lambda_c),
            num(c.bracket.0),
            num(c.bracket.1),
            num(c.residual),
            num(c.mesh_residual),
        ]);
    }
    Ok(t)
}

fn cmd_entropy(s: &Settings) -> CliResult<Table> {
    let lambdas = s.lambdas()?;
    let (ke, ko) = s.k()?;
    let states = s.states(&[0, 1, 2, 3])?;
    let solver = s.solver()?;
    let (mesh_size, mesh_scale) = s.mesh()?;
    let count = states.iter().max().map_or(1, |m| m + 1);
    let mut t = Table::new([
        "lambda",
        "n",
        "delta_x",
        "delta_p",
        "s_x",
        "s_p",
        "s_t",
        "heisenberg",
        "mean_x",
        "mean_p",
    ]);
    for lambda in lambdas {
        let params = ModelParams::new(lambda)?;
        let spec = scans::solve_with(&params, solver, ke, ko, mesh_size, mesh_scale, count)?;
        let rule = Arc::new(variational::default_rule(&params, ke.max(ko))?);
        for &n in &states {
            let st = spec
                .states
                .get(n)
                .ok_or_else(|| Failure::Usage(format!("state {n} unavailable")))?;
            let m = infotheory::measure_state(st, rule.clone())?;
            t.push(vec![
                num(lambda),
                Cell::Int(n as i64),
                num(m.delta_x),
                num(m.delta_p),
                num(m.s_x),
                num(m.s_p),
                num(m.s_t),
                num(m.heisenberg),
                num(m.mean_x),
                num(m.mean_p),
            ]);
        }
    }
    Ok(t)
}

fn parse_pairs(s: &str) -> CliResult<Vec<(usize, usize)>> {
    s.split(',')
        .map(|p| {
            let (a, b) = p
                .split_once(':')
                .ok_or_else(|| Failure::Usage(format!("pair '{p}' must look like a:b")))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<usize>()
                    .map_err(|_| Failure::Usage(format!("bad index in pair '{p}'")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

fn cmd_divergence(s: &Settings) -> CliResult<Table> {
    let lambdas = s.lambdas()?;
    let (ke, ko) = s.k()?;
    let pairs = parse_pairs(s.get("pairs").unwrap_or("1:0,0:1,3:2,2:3"))?;
    let states = s.states(&[0, 1, 2, 3])?;
    let mut t = Table::new(["lambda", "kind", "a", "b", "value", "note"]);
    for lambda in lambdas {
        let params = ModelParams::new(lambda)?;
        let spec = variational::solve(&params, ke, ko)?;
        let rule = Arc::new(variational::default_rule(&params, ke.max(ko))?);
        let density = |n: usize| -> CliResult<Density> {
            let st = spec
                .states
                .get(n)
                .ok_or_else(|| Failure::Usage(format!("state {n} unavailable")))?;
            Ok(Density::of_state(st, rule.clone()))
        };
        for &(a, b) in &pairs {
            let (da, db) = (density(a)?, density(b)?);
            let kl = infotheory::kl_divergence(&da, &db)?;
            let note = if kl.near_singular { "near-singular" } else { "" };
            t.push(vec![
                num(lambda),
                text("kl"),
                Cell::Int(a as i64),
                Cell::Int(b as i64),
                num(kl.value),
                text(note),
            ]);
            t.push(vec![
                num(lambda),
                text("crj"),
                Cell::Int(a as i64),
                Cell::Int(b as i64),
                num(infotheory::crj_divergence(&da, &db)?),
                text(""),
            ]);
        }
        let omega = s
            .real("ho_omega")?
            .unwrap_or_else(|| infotheory::default_ho_omega(lambda));
        for &n in &states {
            let ho = infotheory::ho_reference_density(n, omega, rule.clone())?;
            t.push(vec![
                num(lambda),
                text("crj_ho"),
                Cell::Int(n as i64),
                Cell::Int(n as i64),
                num(infotheory::crj_divergence(&density(n)?, &ho)?),
                text(format!("omega={}", output::format_number(omega))),
            ]);
        }
        if let Ok(sector) = qes_exact::build_sector(lambda) {
            for i in 0..sector.dimension {
                let g = sector.global_index(i);
                if !states.contains(&g) {
                    continue;
                }
                let exact = Density::of_state(&sector.state(i)?, rule.clone());
                t.push(vec![
                    num(lambda),
                    text("crj_exact"),
                    Cell::Int(g as i64),
                    Cell::Int(g as i64),
                    num(infotheory::crj_divergence(&exact, &density(g)?)?),
                    text("exact sector vs variational"),
                ]);
            }
        }
    }
    Ok(t)
}

fn cmd_wkb(s: &Settings) -> CliResult<Table> {
    let lambdas = s.lambdas()?;
    let states = s.states(&[0])?;
    let mut t = Table::new([
        "lambda",
        "n",
        "regime",
        "epsilon",
        "energy",
        "y_inner",
        "y_outer",
        "action",
        "splitting_estimate",
        "mesh_index",
        "mesh_energy",
        "relative_error",
    ]);
    let (mesh_size, mesh_scale) = s.mesh()?;
    for lambda in lambdas {
        let params = ModelParams::new(lambda)?;
        // In the double well each single-well level n is the doublet (2n, 2n+1).
        let index = |n: usize| if lambda > 0.0 { 2 * n } else { n };
        let count = states.iter().map(|&n| index(n) + 1).max().unwrap_or(1);
        let mesh = scans::solve_with(&params, Solver::Mesh, 0, 0, mesh_size, mesh_scale, count)?;
        for &n in &states {
            let me = mesh.states[index(n)].energy;
            let mi = Cell::Int(index(n) as i64);
            if lambda < 0.0 {
                let e = wkb::harmonic_limit(n, lambda)?;
                let nan = f64::NAN;
                t.push(vec![
                    num(lambda),
                    Cell::Int(n as i64),
                    text("harmonic"),
                    num(nan),
                    num(e),
                    num(nan),
                    num(nan),
                    num(nan),
                    num(nan),
                    mi,
                    num(me),
                    num((e - me).abs() / me.abs()),
                ]);
            } else {
                let r = wkb::quantize(n, lambda)?;
                t.push(vec![
                    num(lambda),
                    Cell::Int(n as i64),
                    text("double-well"),
                    num(r.epsilon_n),
                    num(r.energy),
                    num(r.turning_points.0),
                    num(r.turning_points.1),
                    num(r.action),
                    num(r.splitting_estimate),
                    mi,
                    num(me),
                    num((r.energy - me).abs() / me.abs()),
                ]);
            }
        }
    }
    Ok(t)
}

fn cmd_qes_check(s: &Settings) -> CliResult<Table> {
    let lambdas = match s.get("lambda") {
        Some(_) => s.lambdas()?,
        None => vec![0.0, 0.5, 1.0, 2.0, 3.0],
    };
    let (ke, ko) = s.k()?;
    let mut t = Table::new([
        "lambda",
        "parity",
        "index",
        "n",
        "sector_energy",
        "variational_energy",
        "relative_delta",
        "reflection_defect",
    ]);
    for lambda in lambdas {
        let sector = qes_exact::build_sector(lambda)?;
        let spec = variational::solve(&ModelParams::new(lambda)?, ke, ko)?;
        for (i, &e) in sector.eigenvalues.iter().enumerate() {
            let g = sector.global_index(i);
            let v = spec.states.get(g).map_or(f64::NAN, |st| st.energy);
            t.push(vec![
                num(lambda),
                text(sector.parity.label()),
                Cell::Int(i as i64),
                Cell::Int(g as i64),
                num(e),
                num(v),
                num((v - e).abs() / e.abs().max(1.0)),
                num(sector.reflection_defect()),
            ]);
        }
    }
    Ok(t)
}

/// Fast invariant checks across all modules: `(name, passed, detail)`.
pub fn selftest_checks() -> Vec<(&'static str, bool, String)> {
    let mut out: Vec<(&'static str, bool, String)> = Vec::new();
    let mut check = |name: &'static str, f: &dyn Fn() -> crate::Result<(bool, String)>| match f() {
        Ok((ok, d)) => out.push((name, ok, d)),
        Err(e) => out.push((name, false, format!("error: {e}"))),
    };
    let p = |l: f64| ModelParams::new(l);

    check("potential parity and minima", &|| {
        let params = p(3.0)?;
        let even = (0..50).all(|i| {
            let x = 0.1 * i as f64;
            potential::evaluate(&params, x) == potential::evaluate(&params, -x)
        });
        let xm = potential::geometry(&params).minima_positions.1;
        let d = potential::derivative(&params, xm).abs();
        Ok((even && d < 1e-12, format!("|V'(x+)| = {d:.2e}")))
    });
    check("weight moments vs quadrature", &|| {
        let rule = quadrature::build_rule(8.0, 128, 16)?;
        let mut worst = 0.0f64;
        for q in (0..=40).step_by(2) {
            let m = quadrature::weight_moment(q, 0.25)?;
            let v = rule.integrate(|x| x.powi(q as i32) * (-0.5 * x.powi(4)).exp());
            worst = worst.max((v / m - 1.0).abs());
        }
        Ok((worst < 1e-11, format!("max relative deviation {worst:.2e}")))
    });
    check("variational exact energies", &|| {
        let e0 = variational::solve(&p(0.0)?, 10, 10)?.states[0].energy;
        let e1 = variational::solve(&p(1.0)?, 10, 10)?.states[0].energy;
        let d = (e0 - 0.5).abs().max((e1 - (1.5 - 3f64.sqrt())).abs());
        Ok((d < 1e-8, format!("max deviation {d:.2e}")))
    });
    check("mesh harmonic mode", &|| {
        let s = lagrange_mesh::mesh_solve_with(&p(0.0)?, &MeshConfig::new(40, 1.0)?, 6, MeshPotential::Harmonic)?;
        let d = s
            .states
            .iter()
            .enumerate()
            .map(|(n, st)| (st.energy - n as f64 - 0.5).abs())
            .fold(0.0, f64::max);
        Ok((d < 1e-11, format!("max deviation {d:.2e}")))
    });
    check("mesh vs variational", &|| {
        let mut worst = 0.0f64;
        for l in [-0.75, 0.0, 3.0, 6.0] {
            let params = p(l)?;
            let v = variational::solve(&params, 10, 10)?;
            let m = lagrange_mesh::mesh_solve(&params, &MeshConfig::auto(&params, 80, 4)?, 4)?;
            for n in 0..3 {
                worst = worst.max((v.states[n].energy - m.states[n].energy).abs() / m.states[n].energy.abs().max(1.0));
            }
        }
        Ok((worst < 1e-7, format!("max relative deviation {worst:.2e}")))
    });
    check("exact sector vs variational", &|| {
        let mut worst = 0.0f64;
        for l in [0.0, 0.5, 1.0, 2.0, 3.0] {
            let sector = qes_exact::build_sector(l)?;
            let v = variational::solve(&p(l)?, 10, 10)?;
            for i in 0..sector.dimension.min(2) {
                let e = sector.eigenvalues[i];
                worst = worst.max((v.states[sector.global_index(i)].energy - e).abs() / e.abs().max(1.0));
            }
        }
        Ok((worst < 1e-8, format!("max relative deviation {worst:.2e}")))
    });
    check("two-level sectors mirror about their mean", &|| {
        let d = [0.0, 0.5, 1.0, 1.5]
            .iter()
            .map(|&l| qes_exact::build_sector(l).map(|s| s.reflection_defect()))
            .collect::<crate::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok((d < 1e-12, format!("max defect {d:.2e}")))
    });
    check("momentum parity, Parseval and series", &|| {
        let params = p(1.0)?;
        let s = variational::solve(&params, 10, 10)?;
        let rule = variational::default_rule(&params, 10)?;
        let mut worst = 0.0f64;
        for st in &s.states[..4] {
            let ev = FourierEvaluator::new(st, &rule);
            let mrule = momentum::momentum_rule(&ev, momentum::MOMENTUM_TAIL_TOL)?;
            let norm = mrule.integrate(|q| ev.eval(q).map(|z| z.norm_sqr()).unwrap_or(f64::NAN));
            worst = worst.max((norm - 1.0).abs());
            let c = st.normalized_coefficients();
            for i in 0..=12 {
                let q = 0.5 * i as f64;
                let a = ev.eval(q)?;
                let b = momentum::transform_series(&c, st.parity, q)?;
                worst = worst.max((a - b).norm());
                let wrong = if st.parity == ParitySector::Even { a.im } else { a.re };
                worst = worst.max(wrong.abs());
            }
        }
        Ok((worst < 1e-9, format!("max deviation {worst:.2e}")))
    });
    check("uncertainty bounds", &|| {
        let mut slack = f64::INFINITY;
        for l in [-0.75, 1.0, 6.0] {
            let params = p(l)?;
            let s = variational::solve(&params, 10, 10)?;
            let rule = Arc::new(variational::default_rule(&params, 10)?);
            for st in &s.states[..4] {
                let m = infotheory::measure_state(st, rule.clone())?;
                slack = slack.min(m.heisenberg - 0.5).min(m.s_t - infotheory::entropic_bound());
            }
        }
        Ok((slack > -1e-9, format!("smallest slack {slack:.3e}")))
    });
    check("divergence identities", &|| {
        let params = p(2.0)?;
        let s = variational::solve(&params, 10, 10)?;
        let rule = Arc::new(variational::default_rule(&params, 10)?);
        let a = Density::of_state(&s.states[0], rule.clone());
        let b = Density::of_state(&s.states[2], rule);
        let self_kl = infotheory::kl_divergence(&a, &a)?.value.abs();
        let self_crj = infotheory::crj_divergence(&a, &a)?.abs();
        let sym = (infotheory::crj_divergence(&a, &b)? - infotheory::crj_divergence(&b, &a)?).abs();
        let worst = self_kl.max(self_crj).max(sym);
        Ok((worst < 1e-12, format!("max deviation {worst:.2e}")))
    });
    check("semiclassical levels ordered", &|| {
        let e: Vec<f64> = (0..4)
            .map(|n| wkb::quantize(n, 100.0).map(|r| r.epsilon_n))
            .collect::<crate::Result<_>>()?;
        let ok = e.windows(2).all(|w| w[1] > w[0]) && e[0] > wkb::rescaled_minimum();
        Ok((ok, format!("ε = {e:?}")))
    });
    check("ground critical coupling", &|| {
        let c = scans::find_critical(0, (0.5, 1.0), 10, 10)?;
        Ok((
            (c.lambda_c - 0.7329531).abs() < 1e-5 && c.residual < 1e-9,
            format!("λc = {:.10}", c.lambda_c),
        ))
    });
    out
}

fn cmd_selftest() -> (Table, bool) {
    let mut t = Table::new(["check", "status", "detail"]);
    let mut all = true;
    for (name, ok, detail) in selftest_checks() {
        all &= ok;
        t.push(vec![text(name), text(if ok { "pass" } else { "FAIL" }), text(detail)]);
    }
    (t, all)
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("usage: qes-sextic <solve|scan|critical|entropy|divergence|wkb|qes-check|selftest> [options]; see --help");
            EXIT_USAGE
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            EXIT_NUMERICAL
        }
    }
}

fn execute(cli: &Cli) -> CliResult<i32> {
    let settings = collect_settings(&cli.common, &cli.command)?;
    let format = settings.format()?;
    let mut code = EXIT_OK;
    let table = match &cli.command {
        Command::Solve => cmd_solve(&settings)?,
        Command::Scan { .. } => cmd_scan(&settings)?,
        Command::Critical { .. } => cmd_critical(&settings)?,
        Command::Entropy => cmd_entropy(&settings)?,
        Command::Divergence { .. } => cmd_divergence(&settings)?,
        Command::Wkb => cmd_wkb(&settings)?,
        Command::QesCheck => cmd_qes_check(&settings)?,
        Command::Selftest => {
            let (t, ok) = cmd_selftest();
            if !ok {
                code = EXIT_NUMERICAL;
            }
            t
        }
    };
    let meta = Meta {
        command: command_name(&cli.command).to_string(),
        config: settings.map.clone(),
    };
    output::write_output(&table, format, settings.out.as_deref(), &meta)?;
    Ok(code)
}
