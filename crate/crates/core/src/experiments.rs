//! Sweeps over pairs, time grids and disorder realizations: exact
//! transition data, envelope checks and power-law fits.

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{
    fit_exponent, lambda_shift, log_grid, path_amplitude, timescale, ErrorEnvelope, ExponentFit, TimescaleMode,
};
use crate::generators::{ctqw_generator, gaussian_vector, Generator, GeneratorKind, Readout};
use crate::graph::{distances_and_counts, enumerate_shortest_paths, Graph};
use crate::linalg::{propagate, PropagationResult, StaticPropagator};
use crate::{CMatrix, Error, Result, C64};

/// Added to the envelope to absorb the error of the exact oracle.
pub const ORACLE_SLACK: f64 = 1e-9;

/// Default fit window in units of the timescale.
pub const FIT_WINDOW: (f64, f64) = (1e-3, 1e-2);

/// Default number of fit points.
pub const FIT_POINTS: usize = 20;

/// Default ensemble size of the disorder experiment.
pub const DEFAULT_REALIZATIONS: usize = 75;

/// Transition probability read from a propagator entry.
pub fn probability(readout: Readout, amplitude: C64) -> f64 {
    match readout {
        Readout::Direct => amplitude.re,
        Readout::SquaredModulus => amplitude.norm_sqr(),
    }
}

fn check_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<()> {
    match pairs.iter().find(|&&(s, t)| s >= n || t >= n) {
        Some(&(s, t)) => Err(Error::domain(format!("pair ({s}, {t}) out of range (n = {n})"))),
        None => Ok(()),
    }
}

/// Every ordered pair `(s, t)` with `t` reachable from `s`.
pub fn reachable_pairs(g: &Graph) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for s in 0..g.n() {
        let sp = distances_and_counts(g, s)?;
        out.extend((0..g.n()).filter(|&t| sp.distance[t].is_some()).map(|t| (s, t)));
    }
    Ok(out)
}

/// Exact propagator on the grid; for the interaction picture, the lab-frame
/// `exp((V + M) t)`.
fn exact_states(gen: &Generator, times: &[f64], tol: f64) -> Result<Vec<CMatrix>> {
    match gen.lab_frame_matrix() {
        Some(lab) => {
            let prop = StaticPropagator::new(&lab)?;
            Ok(times.par_iter().map(|&t| prop.at(t)).collect())
        }
        None => Ok(propagate(gen, times, tol)?.states),
    }
}

/// Transition probabilities `values[pair][time]` from the exact propagator.
pub fn transition_probabilities(
    gen: &Generator,
    pairs: &[(usize, usize)],
    times: &[f64],
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    check_pairs(gen.dim(), pairs)?;
    let PropagationResult { states, .. } = propagate(gen, times, tol)?;
    let readout = gen.readout();
    Ok(pairs
        .iter()
        .map(|&(s, t)| states.iter().map(|x| probability(readout, x[(t, s)])).collect())
        .collect())
}

/// Result of comparing one pair's exact entry with its shortest-path sum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub pair: (usize, usize),
    pub distance: usize,
    pub tau: f64,
    pub lambda_shift: f64,
    pub max_residual: f64,
    pub max_bound: f64,
    /// Grid points where the residual exceeds the envelope plus the slack.
    pub violations: usize,
    pub violated: bool,
}

/// Checks `|<t|X(t)|s> - sum_p Phi_p(t)| <= bound(t) + slack` on the grid.
///
/// Interaction-picture generators are compared in the lab frame,
/// `<t|exp((V + M) t)|s>` against `exp(V_t t) sum_p Phi_p(t)`, with the
/// shifted envelope and the off-diagonal timescale. All others use the
/// generator-norm timescale over `[0, max(times)]`. Unreachable pairs are
/// skipped.
pub fn verify_bound(
    gen: &Generator,
    pairs: &[(usize, usize)],
    times: &[f64],
    tol: f64,
    slack: f64,
) -> Result<Vec<BoundReport>> {
    check_pairs(gen.dim(), pairs)?;
    let horizon = times.iter().copied().fold(0.0, f64::max);
    let (tau, lambda) = match gen.kind() {
        GeneratorKind::Interaction { .. } => (timescale(gen, horizon, TimescaleMode::OffDiagonal)?, lambda_shift(gen)),
        _ => (timescale(gen, horizon, TimescaleMode::GeneratorNorm)?, 0.0),
    };
    let states = exact_states(gen, times, tol)?;
    let support = gen.support_graph();
    pairs
        .par_iter()
        .filter_map(|&(s, t)| {
            let paths = match enumerate_shortest_paths(&support, s, t) {
                Ok(p) => p,
                Err(e) => return Some(Err(e)),
            };
            let distance = paths.distance?;
            let env = ErrorEnvelope {
                tau,
                lambda_shift: lambda,
                distance,
            };
            Some(bound_report(gen, &paths.paths, &states, times, env, slack, (s, t)))
        })
        .collect()
}

fn bound_report(
    gen: &Generator,
    paths: &[Vec<usize>],
    states: &[CMatrix],
    times: &[f64],
    env: ErrorEnvelope,
    slack: f64,
    (s, t): (usize, usize),
) -> Result<BoundReport> {
    let mut report = BoundReport {
        pair: (s, t),
        distance: env.distance,
        tau: env.tau,
        lambda_shift: env.lambda_shift,
        max_residual: 0.0,
        max_bound: 0.0,
        violations: 0,
        violated: false,
    };
    for (x, &time) in states.iter().zip(times) {
        let leading = paths
            .iter()
            .map(|p| path_amplitude(gen, p, time))
            .sum::<Result<C64>>()?
            * gen.lab_frame_factor(t, time);
        let residual = (x[(t, s)] - leading).norm();
        let bound = env.bound(time)?;
        report.max_residual = report.max_residual.max(residual);
        report.max_bound = report.max_bound.max(bound);
        if residual > bound + slack {
            report.violations += 1;
        }
    }
    report.violated = report.violations > 0;
    Ok(report)
}

/// Fitted power law of one pair's transition probability.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairFit {
    pub pair: (usize, usize),
    /// BFS distance in the generator's graph, if reachable.
    pub distance: Option<usize>,
    pub fit: ExponentFit,
    pub inferred_distance: usize,
}

/// Distance implied by a probability exponent: `round(slope / 2)` when the
/// probability is a squared amplitude, `round(slope)` otherwise.
pub fn infer_distance(readout: Readout, slope: f64) -> usize {
    let d = match readout {
        Readout::Direct => slope,
        Readout::SquaredModulus => slope / 2.0,
    };
    d.round().max(0.0) as usize
}

/// Fits `p(t) = c t^k` per pair on `times` restricted to `window`.
pub fn fit_pairs(
    gen: &Generator,
    pairs: &[(usize, usize)],
    times: &[f64],
    window: (f64, f64),
    tol: f64,
) -> Result<Vec<PairFit>> {
    let values = transition_probabilities(gen, pairs, times, tol)?;
    let support = gen.support_graph();
    pairs
        .iter()
        .zip(values)
        .map(|(&(s, t), v)| {
            let series: Vec<(f64, f64)> = times.iter().copied().zip(v).collect();
            let fit = fit_exponent(&series, window)?;
            Ok(PairFit {
                pair: (s, t),
                distance: distances_and_counts(&support, s)?.distance[t],
                fit,
                inferred_distance: infer_distance(gen.readout(), fit.slope),
            })
        })
        .collect()
}

/// Default fit grid: `points` log-spaced times over the window scaled by `tau`.
pub fn fit_grid(tau: f64, window: (f64, f64), points: usize) -> Vec<f64> {
    log_grid(window.0 * tau, window.1 * tau, points)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DisorderConfig {
    pub realizations: usize,
    pub seed: u64,
    /// Fit window in units of each realization's own timescale.
    pub window: (f64, f64),
    pub points: usize,
}

impl Default for DisorderConfig {
    fn default() -> Self {
        DisorderConfig {
            realizations: DEFAULT_REALIZATIONS,
            seed: 0,
            window: FIT_WINDOW,
            points: FIT_POINTS,
        }
    }
}

/// Fits of one potential realization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RealizationFit {
    pub index: usize,
    /// `1 / ||A + V||`.
    pub tau: f64,
    pub slopes: Vec<f64>,
    /// `p / t^(2d)` averaged geometrically over the fit grid.
    pub coefficients: Vec<f64>,
    /// Probability at the realization's point of the shared scaled grid.
    pub diagonal_sample: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpreadSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// `(max - min) / |mean|`.
    pub relative_spread: f64,
}

impl SpreadSummary {
    fn of(values: &[f64]) -> Self {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        SpreadSummary {
            mean,
            min,
            max,
            relative_spread: (max - min) / mean.abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCollapse {
    pub pair: (usize, usize),
    pub distance: usize,
    /// `(count / d!)^2`, the potential-independent limit of `p / t^(2d)`.
    pub expected_coefficient: f64,
    pub slope: SpreadSummary,
    pub coefficient: SpreadSummary,
    /// Slope of the diagonal sequence `(x_a, p_a(x_a tau_a))` over the points
    /// with `x_a` inside the fit window, if there are at least three.
    pub diagonal_slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DisorderReport {
    pub config: DisorderConfig,
    pub realizations: Vec<RealizationFit>,
    pub pairs: Vec<PairCollapse>,
}

/// Geometric mean of `p / t^k`: the coefficient of a power law with known
/// exponent, insensitive to the slope noise of a free fit.
pub fn fixed_exponent_coefficient(series: &[(f64, f64)], exponent: usize) -> f64 {
    let logs: Vec<f64> = series
        .iter()
        .filter(|(_, p)| *p > crate::asymptotics::UNDERFLOW_FLOOR)
        .map(|(t, p)| p.ln() - exponent as f64 * t.ln())
        .collect();
    (logs.iter().sum::<f64>() / logs.len() as f64).exp()
}

/// Scaled times `t / tau` of the diagonal sequence.
pub const DIAGONAL_RANGE: (f64, f64) = (0.5e-5, 1.5);

/// Tight-binding walks `exp(-i (A + V_a) t)` with i.i.d. standard normal
/// potentials `V_a` drawn from stream `a` of `seed`. Each realization is
/// fitted on its own window `[lo tau_a, hi tau_a]`; realization `a` also
/// contributes the `a`-th point of a shared log grid in `t / tau`.
pub fn disorder_ensemble(g: &Graph, pairs: &[(usize, usize)], config: &DisorderConfig) -> Result<DisorderReport> {
    if config.realizations == 0 {
        return Err(Error::domain("need at least one realization"));
    }
    check_pairs(g.n(), pairs)?;
    let mut geometry = Vec::with_capacity(pairs.len());
    for &(s, t) in pairs {
        let sp = distances_and_counts(g, s)?;
        let d = sp.distance[t].ok_or(Error::NoPath { from: s, to: t })?;
        let factorial: f64 = (2..=d).map(|k| k as f64).product();
        geometry.push((d, (sp.count[t] as f64 / factorial).powi(2)));
    }
    let diagonal = log_grid(DIAGONAL_RANGE.0, DIAGONAL_RANGE.1, config.realizations);

    let realizations = (0..config.realizations)
        .into_par_iter()
        .map(|a| {
            let v = gaussian_vector(g.n(), config.seed, a as u64);
            let gen = ctqw_generator(g, &v)?;
            let tau = timescale(&gen, 0.0, TimescaleMode::GeneratorNorm)?;
            let times = fit_grid(tau, config.window, config.points);
            let window = (config.window.0 * tau, config.window.1 * tau);
            let values = transition_probabilities(&gen, pairs, &times, crate::linalg::DEFAULT_TOL)?;
            let sampled = transition_probabilities(&gen, pairs, &[diagonal[a] * tau], crate::linalg::DEFAULT_TOL)?;
            let mut slopes = Vec::with_capacity(pairs.len());
            let mut coefficients = Vec::with_capacity(pairs.len());
            let mut diagonal_sample = Vec::with_capacity(pairs.len());
            for ((v, x), &(d, _)) in values.iter().zip(&sampled).zip(&geometry) {
                let series: Vec<(f64, f64)> = times.iter().copied().zip(v.iter().copied()).collect();
                let fit = fit_exponent(&series, window)?;
                slopes.push(fit.slope);
                coefficients.push(fixed_exponent_coefficient(&series, 2 * d));
                diagonal_sample.push((diagonal[a], x[0]));
            }
            Ok(RealizationFit {
                index: a,
                tau,
                slopes,
                coefficients,
                diagonal_sample,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let pairs = pairs
        .iter()
        .enumerate()
        .map(|(i, &pair)| {
            let slopes: Vec<f64> = realizations.iter().map(|r| r.slopes[i]).collect();
            let coefficients: Vec<f64> = realizations.iter().map(|r| r.coefficients[i]).collect();
            let diag: Vec<(f64, f64)> = realizations.iter().map(|r| r.diagonal_sample[i]).collect();
            PairCollapse {
                pair,
                distance: geometry[i].0,
                expected_coefficient: geometry[i].1,
                slope: SpreadSummary::of(&slopes),
                coefficient: SpreadSummary::of(&coefficients),
                diagonal_slope: fit_exponent(&diag, config.window).ok().map(|f| f.slope),
            }
        })
        .collect();
    Ok(DisorderReport {
        config: *config,
        realizations,
        pairs,
    })
}
