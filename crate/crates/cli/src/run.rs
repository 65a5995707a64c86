//! Command implementations.

use std::fs;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::Serialize;

use qwalk_core::asymptotics::{
    linear_grid, log_grid, predict_on_support, timescale, AsymptoticPrediction, TimescaleMode,
};
use qwalk_core::experiments::{
    disorder_ensemble, fit_grid, fit_pairs, reachable_pairs, transition_probabilities, verify_bound,
    DisorderConfig, DEFAULT_REALIZATIONS, FIT_POINTS, FIT_WINDOW, ORACLE_SLACK,
};
use qwalk_core::gauge::{gauge_trivialize, DEFAULT_GAUGE_TOL};
use qwalk_core::generators::{
    chiral_matrix, ctrw_generator, gaussian_vector, rotating_frame_generator, tight_binding_matrix, Generator,
    Readout,
};
use qwalk_core::graph::Graph;
use qwalk_core::lindblad::{
    evolve_density, lgraph_geometry, rho_short_time, LGraphGeometry, LindbladianExport, QswLindbladian, RhoEstimate,
    RhoMode,
};
use qwalk_core::linalg::DEFAULT_TOL;
use qwalk_core::{CMatrix, Error};

use crate::config::{ExperimentConfig, GridKind, Omega, Pairs, PotentialSpec, WalkKind};
use crate::error::{CliError, CliResult};
use crate::io::{export_complex_series, export_series, load_graph, load_vector, write_json, GraphFile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Exact transition probabilities per pair (CSV).
    Simulate,
    /// Leading-order asymptotics per pair (JSON).
    Predict,
    /// Truncation error against its envelope on the time grid (JSON).
    VerifyBound,
    /// Power-law fits of the transition probabilities (JSON).
    Fit,
    /// Gauge reduction of the Hamiltonian's phases (JSON).
    Gauge,
    /// Density-matrix entries, Lindbladian geometry and matrix.
    Lindblad,
    /// Tight-binding walks over random on-site potentials (JSON).
    Disorder,
}

const DEFAULT_POINTS: usize = 40;
const GRID_START: f64 = 1e-4;
const GRID_END: f64 = 2.0;

/// Runs `command` and returns the files written, in order.
pub fn run(cfg: &ExperimentConfig, command: Command) -> CliResult<Vec<PathBuf>> {
    cfg.validate()?;
    let file = load_graph(cfg.graph.as_deref().expect("validated"))?;
    let mut out = Output::new(cfg.output_dir())?;
    if file.labels.iter().enumerate().any(|(i, l)| *l != i.to_string()) {
        out.json("vertices.json", &file.labels)?;
    }
    match command {
        Command::Simulate => simulate(cfg, &file, &mut out)?,
        Command::Predict => predict(cfg, &file, &mut out)?,
        Command::VerifyBound => verify(cfg, &file, &mut out)?,
        Command::Fit => fit(cfg, &file, &mut out)?,
        Command::Gauge => gauge(cfg, &file, &mut out)?,
        Command::Lindblad => lindblad(cfg, &file, &mut out)?,
        Command::Disorder => disorder(cfg, &file, &mut out)?,
    }
    Ok(out.written)
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(dir: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Output { dir, written: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let p = self.path(name);
        write_json(value, &p)
    }
}

/// The walk selected by the configuration.
enum Walk {
    Closed(Generator),
    Open(Box<QswLindbladian>),
}

impl Walk {
    fn build(cfg: &ExperimentConfig, file: &GraphFile) -> CliResult<Walk> {
        let g = &file.graph;
        let potential = load_potential(cfg, g.n())?;
        let minus_i = Complex64::new(0.0, -1.0);
        let with_potential = |m: CMatrix, scale: Complex64, readout: Readout| -> CliResult<Generator> {
            Ok(match &potential {
                Some(v) => {
                    let mut m = m;
                    for (i, x) in v.iter().enumerate() {
                        m[(i, i)] += scale * x;
                    }
                    Generator::interaction(&m, readout)?
                }
                None => Generator::from_matrix(m, readout)?,
            })
        };
        Ok(match cfg.kind {
            WalkKind::Ctrw => {
                let m = ctrw_generator(g)?.evaluate(0.0);
                Walk::Closed(with_potential(m, Complex64::new(1.0, 0.0), Readout::Direct)?)
            }
            WalkKind::Ctqw => {
                let h = tight_binding_matrix(g, &vec![0.0; g.n()])?;
                Walk::Closed(with_potential(h * minus_i, minus_i, Readout::SquaredModulus)?)
            }
            WalkKind::Chiral => {
                let h = chiral_matrix(g, &file.phases)?;
                Walk::Closed(with_potential(h * minus_i, minus_i, Readout::SquaredModulus)?)
            }
            WalkKind::Rotating => {
                if potential.is_some() {
                    return Err(CliError::Input("potential: not supported for the rotating kind".into()));
                }
                let w = match &cfg.omega {
                    Some(Omega::Vector(w)) => w.clone(),
                    Some(Omega::Scalar(w)) if g.n() > 0 => {
                        let mut v = vec![0.0; g.n()];
                        v[0] = *w;
                        v
                    }
                    _ => return Err(CliError::Input("omega: the rotating kind needs frequencies".into())),
                };
                Walk::Closed(
                    rotating_frame_generator(g, &w).map_err(|e| CliError::Input(format!("omega: {e}")))?,
                )
            }
            WalkKind::Qsw => Walk::Open(Box::new(build_qsw(cfg, g, potential)?)),
        })
    }

    fn tau(&self) -> CliResult<f64> {
        let tau = match self {
            Walk::Closed(gen) => {
                let mode = match gen.kind() {
                    qwalk_core::generators::GeneratorKind::Interaction { .. } => TimescaleMode::OffDiagonal,
                    _ => TimescaleMode::GeneratorNorm,
                };
                timescale(gen, 0.0, mode)?
            }
            Walk::Open(ql) => ql.timescale()?,
        };
        if tau.is_finite() {
            Ok(tau)
        } else {
            Err(CliError::Input("graph: the walk does not move (no edges)".into()))
        }
    }

    /// Generator acting on vertices, or on vectorized density matrices with
    /// vertex pairs mapped to population pairs.
    fn generator(&self, pairs: &[(usize, usize)]) -> CliResult<(Generator, Vec<(usize, usize)>)> {
        Ok(match self {
            Walk::Closed(gen) => (gen.clone(), pairs.to_vec()),
            Walk::Open(ql) => (
                ql.generator()?,
                pairs.iter().map(|&(s, t)| (ql.flat_index(s, s), ql.flat_index(t, t))).collect(),
            ),
        })
    }
}

fn build_qsw(cfg: &ExperimentConfig, g: &Graph, potential: Option<Vec<f64>>) -> CliResult<QswLindbladian> {
    let omega = match cfg.omega {
        None => 0.0,
        Some(Omega::Scalar(w)) if w >= 0.0 => w,
        _ => return Err(CliError::Input("omega: the Lindbladian needs one nonnegative rate".into())),
    };
    let v = potential.unwrap_or_else(|| vec![0.0; g.n()]);
    Ok(QswLindbladian::new(g, &v, omega)?)
}

fn load_potential(cfg: &ExperimentConfig, n: usize) -> CliResult<Option<Vec<f64>>> {
    Ok(match &cfg.potential {
        PotentialSpec::None => None,
        PotentialSpec::File { path } => Some(load_vector(path, n, "potential")?),
        PotentialSpec::Gaussian { seed } => Some(gaussian_vector(n, seed.unwrap_or(cfg.seed), 0)),
    })
}

fn pairs(cfg: &ExperimentConfig, g: &Graph) -> CliResult<Vec<(usize, usize)>> {
    match &cfg.pairs {
        Pairs::All => Ok(reachable_pairs(g)?),
        Pairs::List(list) => {
            if let Some(&(s, t)) = list.iter().find(|&&(s, t)| s >= g.n() || t >= g.n()) {
                return Err(CliError::Input(format!("pairs: ({s}, {t}) out of range (n = {})", g.n())));
            }
            Ok(list.clone())
        }
    }
}

/// Configured time grid, or `[1e-4 tau, 2 tau]` (from 0 for linear grids).
fn time_grid(cfg: &ExperimentConfig, tau: f64) -> Vec<f64> {
    let points = cfg.points.unwrap_or(DEFAULT_POINTS);
    let hi = cfg.t_max.unwrap_or(GRID_END * tau);
    match cfg.grid {
        GridKind::Log => log_grid(cfg.t_min.unwrap_or(GRID_START * tau).min(hi / 2.0), hi, points),
        GridKind::Linear => linear_grid(cfg.t_min.unwrap_or(0.0).min(hi / 2.0), hi, points),
    }
}

fn tol(cfg: &ExperimentConfig) -> f64 {
    cfg.tol.unwrap_or(DEFAULT_TOL)
}

/// Exact probabilities. Interaction-picture walks are exponentiated in the
/// lab frame.
fn lab_frame(gen: Generator) -> CliResult<Generator> {
    match gen.lab_frame_matrix() {
        Some(m) => Ok(Generator::from_matrix(m, gen.readout())?),
        None => Ok(gen),
    }
}

/// Replaces generator-level pairs by the vertex pairs they came from.
/// Reports may omit pairs, so they are matched by value.
fn relabel<T>(
    reports: &mut [T],
    gen_pairs: &[(usize, usize)],
    vertex_pairs: &[(usize, usize)],
    pair: impl Fn(&mut T) -> &mut (usize, usize),
) {
    for r in reports {
        let p = pair(r);
        if let Some(i) = gen_pairs.iter().position(|q| q == p) {
            *p = vertex_pairs[i];
        }
    }
}

fn simulate(cfg: &ExperimentConfig, file: &GraphFile, out: &mut Output) -> CliResult<()> {
    let walk = Walk::build(cfg, file)?;
    let times = time_grid(cfg, walk.tau()?);
    let vertex_pairs = pairs(cfg, &file.graph)?;
    let (gen, gen_pairs) = walk.generator(&vertex_pairs)?;
    let values = transition_probabilities(&lab_frame(gen)?, &gen_pairs, &times, tol(cfg))?;
    for ((s, t), v) in vertex_pairs.iter().zip(values) {
        let p = out.path(&format!("p_{s}_{t}.csv"));
        export_series(&times, &v, &p)?;
    }
    Ok(())
}

fn predict(cfg: &ExperimentConfig, file: &GraphFile, out: &mut Output) -> CliResult<()> {
    let walk = Walk::build(cfg, file)?;
    let tau = walk.tau()?;
    let vertex_pairs = pairs(cfg, &file.graph)?;
    let (gen, gen_pairs) = walk.generator(&vertex_pairs)?;
    let predictions: Vec<AsymptoticPrediction> = gen_pairs
        .iter()
        .zip(&vertex_pairs)
        .map(|(&(s, t), &(vs, vt))| {
            let mut p = predict_on_support(&gen, s, t, tau)?.prediction;
            (p.source, p.target) = (vs, vt);
            Ok(p)
        })
        .collect::<CliResult<_>>()?;
    out.json("predictions.json", &predictions)
}

fn verify(cfg: &ExperimentConfig, file: &GraphFile, out: &mut Output) -> CliResult<()> {
    let walk = Walk::build(cfg, file)?;
    let times = time_grid(cfg, walk.tau()?);
    let vertex_pairs = pairs(cfg, &file.graph)?;
    let (gen, gen_pairs) = walk.generator(&vertex_pairs)?;
    let mut reports = verify_bound(&gen, &gen_pairs, &times, tol(cfg), ORACLE_SLACK)?;
    relabel(&mut reports, &gen_pairs, &vertex_pairs, |r| &mut r.pair);
    out.json("bound_report.json", &reports)?;
    let violated = reports.iter().filter(|r| r.violated).count();
    if violated > 0 {
        return Err(CliError::Violation(format!(
            "error bound violated for {violated} of {} pairs",
            reports.len()
        )));
    }
    Ok(())
}

fn fit(cfg: &ExperimentConfig, file: &GraphFile, out: &mut Output) -> CliResult<()> {
    let walk = Walk::build(cfg, file)?;
    let tau = walk.tau()?;
    let times = if cfg.t_min.is_some() || cfg.t_max.is_some() {
        time_grid(cfg, tau)
    } else {
        fit_grid(tau, FIT_WINDOW, cfg.points.unwrap_or(FIT_POINTS))
    };
    let window = (times[0], times[times.len() - 1]);
    if !(window.0 > 0.0) {
        return Err(CliError::Input("t_min: fits need a positive start time".into()));
    }
    let vertex_pairs = pairs(cfg, &file.graph)?;
    let (gen, gen_pairs) = walk.generator(&vertex_pairs)?;
    let mut fits = fit_pairs(&lab_frame(gen)?, &gen_pairs, &times, window, tol(cfg))?;
    relabel(&mut fits, &gen_pairs, &vertex_pairs, |f| &mut f.pair);
    out.json("fits.json", &fits)
}

fn gauge(cfg: &ExperimentConfig, file: &GraphFile, out: &mut Output) -> CliResult<()> {
    let g = &file.graph;
    let mut h = match cfg.kind {
        WalkKind::Chiral => chiral_matrix(g, &file.phases)?,
        _ => tight_binding_matrix(g, &vec![0.0; g.n()])?,
    };
    if let Some(v) = load_potential(cfg, g.n())? {
        for (i, x) in v.iter().enumerate() {
            h[(i, i)] += x;
        }
    }
    let result = gauge_trivialize(&h, cfg.tol.unwrap_or(DEFAULT_GAUGE_TOL))?;
    out.json("gauge.json", &result)
}

#[derive(Serialize)]
struct UnitReport {
    unit: (usize, usize),
    /// Shortest route from the initial population; absent if unreachable.
    geometry: Option<LGraphGeometry>,
    /// Leading term at the first positive grid time.
    leading: Option<RhoEstimate>,
}

fn lindblad(cfg: &ExperimentConfig, file: &GraphFile, out: &mut Output) -> CliResult<()> {
    let g = &file.graph;
    let ql = build_qsw(cfg, g, load_potential(cfg, g.n())?)?;
    let n = g.n();
    let u = cfg.initial_vertex;
    if u >= n {
        return Err(CliError::Input(format!("initial_vertex: {u} out of range (n = {n})")));
    }
    let units = match &cfg.units {
        Some(units) => {
            if let Some(&(a, b)) = units.iter().find(|&&(a, b)| a >= n || b >= n) {
                return Err(CliError::Input(format!("units: ({a}, {b}) out of range (n = {n})")));
            }
            units.clone()
        }
        None => (0..n).map(|k| (k, k)).collect(),
    };
    let tau = ql.timescale()?;
    if !tau.is_finite() {
        return Err(CliError::Input("graph: the walk does not move (no edges)".into()));
    }
    let times = time_grid(cfg, tau);
    let mut rho0 = CMatrix::zeros(n, n);
    rho0[(u, u)] = Complex64::new(1.0, 0.0);
    let states = evolve_density(&ql, &rho0, &times)?;
    for &(a, b) in &units {
        let series: Vec<Complex64> = states.iter().map(|rho| rho[(a, b)]).collect();
        let p = out.path(&format!("rho_{a}_{b}.csv"));
        export_complex_series(&times, &series, &p)?;
    }
    let t_first = times.iter().copied().find(|&t| t > 0.0).unwrap_or(0.0);
    let reports = units
        .iter()
        .map(|&unit| {
            let geometry = optional(lgraph_geometry(&ql, (u, u), unit))?;
            let leading = optional(rho_short_time(&ql, u, unit, t_first, RhoMode::PathSum))?;
            Ok(UnitReport {
                unit,
                geometry,
                leading,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    out.json("geometry.json", &reports)?;
    out.json("lindbladian.json", &LindbladianExport::from(&ql))
}

fn optional<T>(r: qwalk_core::Result<T>) -> CliResult<Option<T>> {
    match r {
        Ok(x) => Ok(Some(x)),
        Err(Error::NoPath { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn disorder(cfg: &ExperimentConfig, file: &GraphFile, out: &mut Output) -> CliResult<()> {
    if cfg.kind != WalkKind::Ctqw {
        return Err(CliError::Input("kind: disorder ensembles use the ctqw kind".into()));
    }
    if cfg.potential != PotentialSpec::None {
        return Err(CliError::Input("potential: disorder ensembles draw their own potentials".into()));
    }
    let config = DisorderConfig {
        realizations: cfg.realizations.unwrap_or(DEFAULT_REALIZATIONS),
        seed: cfg.seed,
        window: FIT_WINDOW,
        points: cfg.points.unwrap_or(FIT_POINTS),
    };
    let vertex_pairs: Vec<(usize, usize)> = pairs(cfg, &file.graph)?
        .into_iter()
        .filter(|(s, t)| s != t || cfg.pairs != Pairs::All)
        .collect();
    let report = disorder_ensemble(&file.graph, &vertex_pairs, &config)?;
    out.json("disorder.json", &report)
}
