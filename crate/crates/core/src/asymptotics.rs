//! Leading short-time behaviour of propagator entries.
//!
//! For `dX/dt = M(t) X` the entry `<m|X(t)|n>` is approximated by the sum of
//! path amplitudes over the shortest directed paths from `n` to `m`. Each
//! amplitude is the iterated integral of generator entries along the path;
//! the remainder is bounded by `exp(l t) exp(t/tau) (t/tau)^(d+1) / (d+1)!`.

use serde::{Serialize, Serializer};

use crate::generators::{Generator, GeneratorKind, Readout};
use crate::graph::{enumerate_shortest_paths, Graph};
use crate::linalg::{expm, ode, spectral_norm};
use crate::{CMatrix, Error, Result, C64};

/// Relative size below which a sum of path coefficients counts as cancelled.
pub const CANCELLATION_THRESHOLD: f64 = 1e-12;

/// How many orders past the distance the cancellation probe looks.
pub const NEXT_ORDER_PROBE: usize = 4;

/// Values below this are treated as underflow and left out of fits.
pub const UNDERFLOW_FLOOR: f64 = 1e-30;

const PATH_ODE_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimescaleMode {
    /// `1 / max_{0<=t<=T} ||M(t)||`.
    GeneratorNorm,
    /// `1 / (||A|| max |M_off|)` with `A` the 0/1 support of the off-diagonal part.
    OffDiagonal,
    /// `1 / (d_max max |M_off|)`, the degree bound on `||A||`.
    DegreeBound,
}

/// Timescale of the short-time regime. Returns `f64::INFINITY` for a
/// generator whose relevant part vanishes.
pub fn timescale(gen: &Generator, horizon: f64, mode: TimescaleMode) -> Result<f64> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::domain("horizon must be finite and nonnegative"));
    }
    let rate = match mode {
        TimescaleMode::GeneratorNorm => max_norm(gen, horizon)?,
        TimescaleMode::OffDiagonal | TimescaleMode::DegreeBound => {
            let off = gen.off_diagonal_part();
            let max_entry = off.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
            let support = off.map(|z| {
                if z != C64::new(0.0, 0.0) {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            let a_norm = if mode == TimescaleMode::OffDiagonal {
                spectral_norm(&support)?
            } else {
                degree_bound(&support)
            };
            a_norm * max_entry
        }
    };
    Ok(if rate == 0.0 { f64::INFINITY } else { 1.0 / rate })
}

/// Largest in- or out-degree of a 0/1 support matrix; equals the maximum
/// degree for symmetric supports and bounds the spectral norm in general.
fn degree_bound(support: &CMatrix) -> f64 {
    let rows = support.row_iter().map(|r| r.iter().filter(|z| z.re != 0.0).count());
    let cols = support.column_iter().map(|c| c.iter().filter(|z| z.re != 0.0).count());
    rows.chain(cols).max().unwrap_or(0) as f64
}

/// `max ||M(t)||` over `[0, horizon]`, refined by grid doubling until the
/// maximum stops changing.
fn max_norm(gen: &Generator, horizon: f64) -> Result<f64> {
    if gen.is_static() || horizon == 0.0 {
        return spectral_norm(&gen.evaluate(0.0));
    }
    let sample = |points: usize| -> Result<f64> {
        (0..=points)
            .map(|k| spectral_norm(&gen.evaluate(horizon * k as f64 / points as f64)))
            .try_fold(0.0f64, |acc, x| x.map(|v| acc.max(v)))
    };
    let mut points = 32;
    let mut best = sample(points)?;
    while points < 4096 {
        points *= 2;
        let refined = sample(points)?;
        let converged = (refined - best).abs() <= 1e-12 * refined.max(1e-300);
        best = best.max(refined);
        if converged {
            break;
        }
    }
    Ok(best)
}

/// Smallest `l >= 0` with `Re(V - l) <= 0` for the diagonal part `V`.
pub fn lambda_shift(gen: &Generator) -> f64 {
    gen.diagonal_part().iter().fold(0.0f64, |acc, v| acc.max(v.re))
}

/// Parameters of the truncation envelope
/// `exp(l t) exp(t/tau) (t/tau)^(d+1) / (d+1)!`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorEnvelope {
    pub tau: f64,
    pub lambda_shift: f64,
    pub distance: usize,
}

impl ErrorEnvelope {
    pub fn bound(&self, t: f64) -> Result<f64> {
        error_bound(self, t)
    }
}

pub fn error_bound(env: &ErrorEnvelope, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("error bound at negative time {t}")));
    }
    if t == 0.0 || env.tau.is_infinite() {
        return Ok(0.0);
    }
    let x = t / env.tau;
    let k = env.distance as f64 + 1.0;
    let log = env.lambda_shift * t + x + k * x.ln() - ln_factorial(env.distance + 1);
    Ok(log.exp())
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn factorial(n: usize) -> f64 {
    (2..=n).map(|k| k as f64).product()
}

fn check_path(gen: &Generator, path: &[usize]) -> Result<()> {
    let n = gen.dim();
    if path.is_empty() {
        return Err(Error::domain("empty path"));
    }
    if let Some(&v) = path.iter().find(|&&v| v >= n) {
        return Err(Error::domain(format!("path vertex {v} out of range (n = {n})")));
    }
    for w in path.windows(2) {
        if !gen.has_transition(w[0], w[1]) {
            return Err(Error::domain(format!("{} -> {} is not an edge of the generator", w[0], w[1])));
        }
    }
    Ok(())
}

/// Iterated integral of generator entries along `path` up to time `t`.
///
/// Static generators use the closed form `prod(entries) t^d / d!`; the
/// interaction picture uses divided differences of the exponential at the
/// diagonal entries along the path; the rotating frame integrates the
/// triangular ODE chain.
pub fn path_amplitude(gen: &Generator, path: &[usize], t: f64) -> Result<C64> {
    check_path(gen, path)?;
    check_time(t)?;
    let d = path.len() - 1;
    if d == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    match gen.kind() {
        GeneratorKind::Static(m) => {
            let prod: C64 = path.windows(2).map(|w| m[(w[1], w[0])]).product();
            Ok(prod * t.powi(d as i32) / factorial(d))
        }
        GeneratorKind::Interaction {
            diagonal,
            off_diagonal,
        } => {
            let prod: C64 = path.windows(2).map(|w| off_diagonal[(w[1], w[0])]).product();
            let nodes: Vec<C64> = path.iter().map(|&v| diagonal[v]).collect();
            Ok(prod * shifted_exp_divided_difference(&nodes, t))
        }
        GeneratorKind::RotatingFrame { .. } => path_amplitude_ode(gen, path, t),
    }
}

/// `t^d exp[x_0 t, ..., x_d t] exp(-x_d t)`: the nested integral of
/// `prod_k exp((x_(k-1) - x_k) s_k)` over the ordered simplex.
///
/// The divided difference is read off the exponential of the bidiagonal
/// matrix with the scaled nodes on the diagonal and ones above it.
fn shifted_exp_divided_difference(nodes: &[C64], t: f64) -> C64 {
    let d = nodes.len() - 1;
    let shift = nodes[d];
    let z = CMatrix::from_fn(d + 1, d + 1, |r, c| {
        if r == c {
            (nodes[r] - shift) * t
        } else if c == r + 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    expm(&z)[(0, d)] * t.powi(d as i32)
}

/// Path amplitude by integrating `phi_k' = M(t)_{p_k p_(k-1)} phi_(k-1)`,
/// `phi_0 = 1`, `phi_k(0) = 0`. Valid for every generator kind.
pub fn path_amplitude_ode(gen: &Generator, path: &[usize], t: f64) -> Result<C64> {
    check_path(gen, path)?;
    check_time(t)?;
    let d = path.len() - 1;
    if d == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    if t == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let links: Vec<(usize, usize)> = path.windows(2).map(|w| (w[1], w[0])).collect();
    let rate = links
        .iter()
        .map(|&(m, n)| gen.entry(m, n, 0.0).norm().max(gen.entry(m, n, t).norm()))
        .fold(0.0f64, f64::max);
    // Natural size of phi_k is (rate t)^k / k!.
    let atol: Vec<f64> = (1..=d)
        .map(|k| (PATH_ODE_RTOL * (rate * t).powi(k as i32) / factorial(k)).max(1e-300))
        .collect();
    let opts = ode::OdeOptions {
        rtol: PATH_ODE_RTOL,
        atol,
        max_steps: 200_000,
        initial_step: (0.05 / rate).min(t),
    };
    let sol = ode::integrate(
        |s, phi, dphi| {
            let mut prev = C64::new(1.0, 0.0);
            for (k, &(m, n)) in links.iter().enumerate() {
                dphi[k] = gen.entry(m, n, s) * prev;
                prev = phi[k];
            }
        },
        vec![C64::new(0.0, 0.0); d],
        &[t],
        &opts,
    )?;
    Ok(sol.states[0][d - 1])
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("time must be finite and nonnegative, got {t}")))
    }
}

fn serialize_complex<S: Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// First nonvanishing Dyson order when the shortest paths cancel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NextOrder {
    pub order: usize,
    #[serde(serialize_with = "serialize_complex")]
    pub amplitude_coefficient: C64,
    pub probability_exponent: usize,
}

/// Leading-order prediction for one source-target pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticPrediction {
    pub source: usize,
    pub target: usize,
    pub distance: usize,
    #[serde(rename = "count")]
    pub path_count: usize,
    /// Coefficient of `t^d` in `<target|X(t)|source>`.
    #[serde(serialize_with = "serialize_complex")]
    pub amplitude_coefficient: C64,
    pub probability_coefficient: f64,
    pub amplitude_exponent: usize,
    #[serde(rename = "exponent")]
    pub probability_exponent: usize,
    pub tau: f64,
    pub lambda_shift: f64,
    pub cancelled: bool,
    pub readout: Readout,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub next_order: Option<NextOrder>,
}

impl AsymptoticPrediction {
    pub fn envelope(&self) -> ErrorEnvelope {
        ErrorEnvelope {
            tau: self.tau,
            lambda_shift: self.lambda_shift,
            distance: self.distance,
        }
    }

    /// Exponent of the first nonvanishing term of the transition probability.
    pub fn effective_probability_exponent(&self) -> Option<usize> {
        if self.cancelled {
            self.next_order.map(|n| n.probability_exponent)
        } else {
            Some(self.probability_exponent)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub prediction: AsymptoticPrediction,
    /// `sum_p Phi_p(t)` over the shortest paths.
    pub leading_amplitude: C64,
}

/// Leading-order prediction for `<target|X(t)|source>`.
///
/// `g` must have the same directed edge set as the generator's graph.
pub fn predict(gen: &Generator, g: &Graph, source: usize, target: usize, t: f64) -> Result<Prediction> {
    if !g.same_topology(&gen.support_graph()) {
        return Err(Error::domain("graph does not match the generator's support"));
    }
    check_time(t)?;
    let paths = enumerate_shortest_paths(g, source, target)?;
    let Some(distance) = paths.distance else {
        return Err(Error::NoPath { from: source, to: target });
    };

    let coefficients: Vec<C64> = paths
        .paths
        .iter()
        .map(|p| p.windows(2).map(|w| gen.entry(w[1], w[0], 0.0)).product())
        .collect();
    let sum: C64 = coefficients.iter().sum();
    let scale: f64 = coefficients.iter().map(|c| c.norm()).sum();
    let cancelled = sum.norm() < CANCELLATION_THRESHOLD * scale;
    let amplitude_coefficient = if cancelled {
        C64::new(0.0, 0.0)
    } else {
        sum / factorial(distance)
    };

    let leading_amplitude = paths
        .paths
        .iter()
        .map(|p| path_amplitude(gen, p, t))
        .sum::<Result<C64>>()?;
    let leading_amplitude = if cancelled {
        C64::new(0.0, 0.0)
    } else {
        leading_amplitude
    };

    let (tau, lambda) = match gen.kind() {
        GeneratorKind::Interaction { .. } => (timescale(gen, t, TimescaleMode::OffDiagonal)?, lambda_shift(gen)),
        _ => (timescale(gen, t, TimescaleMode::GeneratorNorm)?, 0.0),
    };

    let readout = gen.readout();
    let (probability_coefficient, probability_exponent) = probability_law(readout, amplitude_coefficient, distance);
    let next_order = if cancelled { probe_next_order(gen, source, target, distance) } else { None };

    Ok(Prediction {
        prediction: AsymptoticPrediction {
            source,
            target,
            distance,
            path_count: paths.paths.len(),
            amplitude_coefficient,
            probability_coefficient,
            amplitude_exponent: distance,
            probability_exponent,
            tau,
            lambda_shift: lambda,
            cancelled,
            readout,
            next_order,
        },
        leading_amplitude,
    })
}

/// Same as [`predict`] with the generator's own support graph.
pub fn predict_on_support(gen: &Generator, source: usize, target: usize, t: f64) -> Result<Prediction> {
    predict(gen, &gen.support_graph(), source, target, t)
}

fn probability_law(readout: Readout, amplitude: C64, order: usize) -> (f64, usize) {
    match readout {
        Readout::Direct => (amplitude.re, order),
        Readout::SquaredModulus => (amplitude.norm_sqr(), 2 * order),
    }
}

/// Sums all walks (not just shortest paths) of lengths `d+1 ..= d+4` for a
/// static generator and returns the first order whose total survives.
fn probe_next_order(gen: &Generator, source: usize, target: usize, distance: usize) -> Option<NextOrder> {
    let GeneratorKind::Static(m) = gen.kind() else {
        return None;
    };
    let n = m.nrows();
    let abs = m.map(|z| C64::new(z.norm(), 0.0));
    let mut walk = nalgebra::DVector::<C64>::zeros(n);
    walk[source] = C64::new(1.0, 0.0);
    let mut walk_abs = walk.clone();
    for order in 1..=distance + NEXT_ORDER_PROBE {
        walk = m * walk;
        walk_abs = &abs * walk_abs;
        if order <= distance {
            continue;
        }
        let total = walk[target];
        if total.norm() > CANCELLATION_THRESHOLD * walk_abs[target].re {
            let amplitude_coefficient = total / factorial(order);
            let (_, probability_exponent) = probability_law(gen.readout(), amplitude_coefficient, order);
            return Some(NextOrder {
                order,
                amplitude_coefficient,
                probability_exponent,
            });
        }
    }
    None
}

/// Least-squares line through `(ln t, ln value)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    /// Power-law exponent estimate.
    pub slope: f64,
    /// `exp(intercept)` estimates the coefficient.
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub points: usize,
}

impl ExponentFit {
    pub fn coefficient(&self) -> f64 {
        self.intercept.exp()
    }
}

/// Fits `value = c t^slope` on the points with `t` inside `window`.
/// Values below [`UNDERFLOW_FLOOR`] are skipped as underflow.
pub fn fit_exponent(series: &[(f64, f64)], window: (f64, f64)) -> Result<ExponentFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::domain(format!("invalid fit window [{lo}, {hi}]")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(t, v) in series {
        if !(t > 0.0) {
            return Err(Error::domain(format!("fit needs positive times, got {t}")));
        }
        if t < lo || t > hi {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::domain(format!("nonpositive value {v} at t = {t} inside the fit window")));
        }
        if v < UNDERFLOW_FLOOR {
            continue;
        }
        xs.push(t.ln());
        ys.push(v.ln());
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::domain(format!("fit needs at least 3 usable points, got {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit needs distinct times"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    Ok(ExponentFit {
        slope,
        intercept,
        residual,
        points: n,
    })
}

/// `points` logarithmically spaced times from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut grid: Vec<f64> = (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect();
    grid[0] = lo;
    grid[points - 1] = hi;
    grid
}

/// `points` evenly spaced times from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}
