//! End-to-end acceptance checks. Each check prints one PASS/FAIL line with
//! its seed and the measured figures; the process exits nonzero if any fail.

use std::f64::consts::PI;
use std::time::Instant;

use qwalk_core::asymptotics::{fit_exponent, predict, timescale, TimescaleMode};
use qwalk_core::experiments::{
    disorder_ensemble, fit_grid, fit_pairs, reachable_pairs, transition_probabilities, verify_bound,
    DisorderConfig, BoundReport, FIT_POINTS, FIT_WINDOW, ORACLE_SLACK,
};
use qwalk_core::gauge::{apply_gauge, cycle_phase, gauge_trivialize, DEFAULT_GAUGE_TOL};
use qwalk_core::generators::{
    chiral_hamiltonian, chiral_matrix, ctqw_generator, ctrw_generator, gaussian_vector, rotating_frame_generator,
    EdgePhases, Generator, Readout,
};
use qwalk_core::graph::{adjacency_matrix, distances_and_counts, families, Graph};
use qwalk_core::lindblad::{commutator_superoperator, evolve_density, QswLindbladian};
use qwalk_core::linalg::{expm, propagate, spectral_norm, StaticPropagator, DEFAULT_TOL};
use qwalk_core::asymptotics::log_grid;
use qwalk_core::{CMatrix, Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn random_phases<R: Rng>(g: &Graph, rng: &mut R) -> EdgePhases {
    let mut p = EdgePhases::new();
    for (u, v) in g.undirected_edges() {
        p.insert(u, v, rng.random_range(-PI..PI));
    }
    p
}

/// Envelope grid: 40 log-spaced points in `(1e-4 tau, 2 tau]`.
fn envelope_grid(tau: f64) -> Vec<f64> {
    log_grid(1e-4 * tau, 2.0 * tau, 41).split_off(1)
}

fn count_violations(reports: &[BoundReport]) -> (usize, usize) {
    let v = reports.iter().map(|r| r.violations).sum();
    (v, reports.len())
}

fn with_diagonal(m: &CMatrix, diag: impl Iterator<Item = C64>) -> CMatrix {
    let mut m = m.clone();
    for (i, v) in diag.enumerate() {
        m[(i, i)] += v;
    }
    m
}

fn static_bound() -> Result<Outcome> {
    const SEED: u64 = 101;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut violations, mut pairs, mut points) = (0, 0, 0);
    for _ in 0..50 {
        let n = rng.random_range(3..=10);
        let g = families::random_connected(n, 0.3, &mut rng);
        let phases = random_phases(&g, &mut rng);
        let gens = [
            ctrw_generator(&g)?,
            ctqw_generator(&g, &vec![0.0; n])?,
            chiral_hamiltonian(&g, &phases)?,
        ];
        for gen in &gens {
            let tau = timescale(gen, 0.0, TimescaleMode::GeneratorNorm)?;
            let times = envelope_grid(tau);
            let reports = verify_bound(gen, &reachable_pairs(&g)?, &times, DEFAULT_TOL, ORACLE_SLACK)?;
            let (v, p) = count_violations(&reports);
            violations += v;
            pairs += p;
            points += p * times.len();
        }
    }
    outcome(
        violations == 0,
        format!("seed {SEED}: {violations} violations over {pairs} pairs, {points} points"),
    )
}

fn interaction_bound() -> Result<Outcome> {
    const SEED: u64 = 202;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut violations, mut pairs, mut worst_lambda) = (0, 0, 0.0f64);
    for k in 0..50 {
        let n = rng.random_range(3..=10);
        let g = families::random_connected(n, 0.3, &mut rng);
        let phases = random_phases(&g, &mut rng);
        let v = gaussian_vector(n, SEED, k);
        let laplacian = ctrw_generator(&g)?.evaluate(0.0);
        let adjacency = adjacency_matrix(&g);
        let chiral = chiral_matrix(&g, &phases)?;
        let minus_i = C64::new(0.0, -1.0);
        let matrices = [
            (with_diagonal(&laplacian, v.iter().map(|x| C64::new(*x, 0.0))), Readout::Direct),
            (
                with_diagonal(&adjacency, v.iter().map(|x| C64::new(*x, 0.0))).map(|z| z * minus_i),
                Readout::SquaredModulus,
            ),
            (
                with_diagonal(&chiral, v.iter().map(|x| C64::new(*x, 0.0))).map(|z| z * minus_i),
                Readout::SquaredModulus,
            ),
        ];
        for (m, readout) in matrices {
            let gen = Generator::interaction(&m, readout)?;
            let tau = timescale(&gen, 0.0, TimescaleMode::OffDiagonal)?;
            let reports = verify_bound(&gen, &reachable_pairs(&g)?, &envelope_grid(tau), DEFAULT_TOL, ORACLE_SLACK)?;
            worst_lambda = reports.iter().fold(worst_lambda, |a, r| a.max(r.lambda_shift));
            let (vi, p) = count_violations(&reports);
            violations += vi;
            pairs += p;
        }
    }
    outcome(
        violations == 0,
        format!("seed {SEED}: {violations} violations over {pairs} pairs, largest shift {worst_lambda:.3}"),
    )
}

/// Pairs of the depth-3 binary tree at distances 1 to 4.
const TREE_PAIRS: [(usize, usize); 4] = [(0, 1), (0, 3), (0, 7), (7, 9)];

fn exponent_laws() -> Result<Outcome> {
    let g = families::binary_tree(3);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (gen, factor) in [(ctrw_generator(&g)?, 1.0), (ctqw_generator(&g, &[0.0; 15])?, 2.0)] {
        let tau = timescale(&gen, 0.0, TimescaleMode::GeneratorNorm)?;
        let times = fit_grid(tau, FIT_WINDOW, FIT_POINTS);
        let window = (FIT_WINDOW.0 * tau, FIT_WINDOW.1 * tau);
        for f in fit_pairs(&gen, &TREE_PAIRS, &times, window, DEFAULT_TOL)? {
            let expected = factor * f.distance.unwrap_or(0) as f64;
            worst = worst.max((f.fit.slope / expected - 1.0).abs());
            parts.push(format!("{:.4}", f.fit.slope));
        }
    }
    outcome(
        worst <= 0.02,
        format!("slopes CTRW/CTQW [{}], worst relative deviation {worst:.2e}", parts.join(", ")),
    )
}

fn coefficient_law() -> Result<Outcome> {
    let g = families::binary_tree(3);
    let mut worst = 0.0f64;
    for (gen, squared) in [(ctrw_generator(&g)?, false), (ctqw_generator(&g, &[0.0; 15])?, true)] {
        let tau = timescale(&gen, 0.0, TimescaleMode::GeneratorNorm)?;
        let t = 1e-4 * tau;
        let values = transition_probabilities(&gen, &TREE_PAIRS, &[t], DEFAULT_TOL)?;
        for (&(s, x), v) in TREE_PAIRS.iter().zip(values) {
            let sp = distances_and_counts(&g, s)?;
            let d = sp.distance[x].expect("connected");
            let factorial: f64 = (2..=d).map(|k| k as f64).product();
            let base = sp.count[x] as f64 / factorial;
            let (expected, power) = if squared { (base * base, 2 * d) } else { (base, d) };
            worst = worst.max((v[0] / t.powi(power as i32) / expected - 1.0).abs());
        }
    }
    outcome(worst <= 1e-3, format!("worst relative deviation {worst:.2e} at t = 1e-4 tau"))
}

fn universality() -> Result<Outcome> {
    const SEED: u64 = 303;
    let g = families::heap_tree(6);
    let config = DisorderConfig {
        seed: SEED,
        ..DisorderConfig::default()
    };
    let report = disorder_ensemble(&g, &[(0, 1), (0, 3), (3, 2)], &config)?;
    let slope_spread = report.pairs.iter().map(|p| p.slope.relative_spread).fold(0.0, f64::max);
    let coef_spread = report.pairs.iter().map(|p| p.coefficient.relative_spread).fold(0.0, f64::max);
    let slopes: Vec<String> = report.pairs.iter().map(|p| format!("{:.4}", p.slope.mean)).collect();
    outcome(
        slope_spread < 0.02 && coef_spread < 0.02,
        format!(
            "seed {SEED}, {} realizations: mean slopes [{}], slope spread {slope_spread:.2e}, coefficient spread {coef_spread:.2e}",
            config.realizations,
            slopes.join(", ")
        ),
    )
}

fn chiral_cancellation() -> Result<Outcome> {
    let g = families::diamond_with_chord();
    let cancelling = EdgePhases::new().with(0, 2, PI).with(2, 3, PI / 2.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for (phases, exponent, cancelled) in [(cancelling, 6.0, true), (EdgePhases::new(), 4.0, false)] {
        let gen = chiral_hamiltonian(&g, &phases)?;
        let tau = timescale(&gen, 0.0, TimescaleMode::GeneratorNorm)?;
        let times = fit_grid(tau, FIT_WINDOW, FIT_POINTS);
        let window = (FIT_WINDOW.0 * tau, FIT_WINDOW.1 * tau);
        let slope = fit_pairs(&gen, &[(0, 1)], &times, window, DEFAULT_TOL)?[0].fit.slope;
        let p = predict(&gen, &g, 0, 1, times[0])?.prediction;
        pass &= (slope / exponent - 1.0).abs() <= 0.02 && p.cancelled == cancelled;
        parts.push(format!("slope {slope:.4} (cancelled = {})", p.cancelled));
    }
    outcome(pass, parts.join(", "))
}

fn non_bridge_edge(g: &Graph) -> Result<Option<(usize, usize)>> {
    let edges: Vec<(usize, usize)> = g.undirected_edges().collect();
    for &(u, v) in &edges {
        let rest = Graph::from_edges(g.n(), false, edges.iter().copied().filter(|&e| e != (u, v)))?;
        if distances_and_counts(&rest, u)?.distance[v].is_some() {
            return Ok(Some((u, v)));
        }
    }
    Ok(None)
}

fn gauge() -> Result<Outcome> {
    const SEED: u64 = 404;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    let mut trees_ok = 0;
    for _ in 0..20 {
        let n = rng.random_range(2..=10);
        let g = families::random_tree(n, &mut rng);
        let h = chiral_matrix(&g, &random_phases(&g, &mut rng))?;
        let res = gauge_trivialize(&h, DEFAULT_GAUGE_TOL)?;
        let Some(lambda) = res.lambda.as_ref().filter(|_| res.trivializable) else { continue };
        trees_ok += 1;
        let r = apply_gauge(&h, lambda);
        let (ph, pr) = (
            StaticPropagator::new(&h.map(|z| z * C64::new(0.0, -1.0)))?,
            StaticPropagator::new(&r.map(|z| z * C64::new(0.0, -1.0)))?,
        );
        for t in log_grid(1e-2, 5.0, 12) {
            let (a, b) = (ph.at(t), pr.at(t));
            for (x, y) in a.iter().zip(b.iter()) {
                worst = worst.max((x.norm_sqr() - y.norm_sqr()).abs());
            }
        }
    }
    let mut witnesses_ok = 0;
    for _ in 0..20 {
        let n = rng.random_range(3..=10);
        let g = families::random_cyclic(n, 0.25, &mut rng);
        // A pure gauge everywhere plus flux pi through one cycle edge.
        let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
        let mut phases = EdgePhases::new();
        for (u, v) in g.undirected_edges() {
            phases.insert(u, v, alpha[v] - alpha[u]);
        }
        let (u, v) = non_bridge_edge(&g)?.expect("cyclic graph");
        phases.insert(u, v, alpha[v] - alpha[u] + PI);
        let h = chiral_matrix(&g, &phases)?;
        let res = gauge_trivialize(&h, DEFAULT_GAUGE_TOL)?;
        let Some(w) = res.witness_cycle.as_ref().filter(|_| !res.trivializable) else { continue };
        let closed = w.vertices.len() >= 4 && w.vertices.first() == w.vertices.last();
        let adjacent = w.vertices.windows(2).all(|p| g.has_edge(p[0], p[1]));
        let recomputed = cycle_phase(&h, &w.vertices);
        if closed && adjacent && (recomputed - w.phase).norm() < 1e-12 && (w.phase + 1.0).norm() < 1e-9 {
            witnesses_ok += 1;
        }
    }
    outcome(
        trees_ok == 20 && witnesses_ok == 20 && worst <= 1e-10,
        format!(
            "seed {SEED}: {trees_ok}/20 trees trivialized (probability deviation {worst:.1e}), {witnesses_ok}/20 flux witnesses verified"
        ),
    )
}

fn rotating_frame() -> Result<Outcome> {
    let g = families::path(4);
    let omega = [1.0, 0.0, 0.0, 0.0];
    let gen = rotating_frame_generator(&g, &omega)?;
    let horizon = 2.0 / spectral_norm(&adjacency_matrix(&g))?;
    let tau = timescale(&gen, horizon, TimescaleMode::GeneratorNorm)?;
    let times = envelope_grid(tau);
    let reports = verify_bound(&gen, &reachable_pairs(&g)?, &times, 1e-12, ORACLE_SLACK)?;
    let (violations, pairs) = count_violations(&reports);

    let norms: Vec<f64> = log_grid(1e-3, 50.0, 200)
        .into_iter()
        .map(|t| spectral_norm(&gen.evaluate(t)))
        .collect::<Result<_>>()?;
    let spread = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max) - norms.iter().copied().fold(f64::INFINITY, f64::min);

    // Independent route: X(t) = exp(i W t) exp(-i (A + W) t).
    let a = adjacency_matrix(&g);
    let lab = with_diagonal(&a, omega.iter().map(|w| C64::new(*w, 0.0))).map(|z| z * C64::new(0.0, -1.0));
    let ode = propagate(&gen, &times, 1e-12)?;
    let mut frame_error = 0.0f64;
    for (x, &t) in ode.states.iter().zip(&times) {
        let closed = expm(&lab.map(|z| z * t));
        for r in 0..4 {
            for c in 0..4 {
                let y = C64::from_polar(1.0, omega[r] * t) * closed[(r, c)];
                frame_error = frame_error.max((x[(r, c)] - y).norm());
            }
        }
    }
    outcome(
        violations == 0 && spread <= 1e-10 && frame_error <= 1e-9,
        format!(
            "{violations} violations over {pairs} pairs, norm spread {spread:.1e}, ODE vs closed-form frame {frame_error:.1e}"
        ),
    )
}

fn lindblad_structure() -> Result<Outcome> {
    const SEED: u64 = 505;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut ok, mut worst_trace) = (0, 0.0f64);
    for _ in 0..10 {
        let n = rng.random_range(2..=6);
        let g = families::random_connected(n, 0.4, &mut rng);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let omega = rng.random_range(0.1..2.0);
        let ql = QswLindbladian::new(&g, &v, omega)?;
        let q0 = QswLindbladian::new(&g, &v, 0.0)?;
        worst_trace = worst_trace.max(ql.trace_residual()).max(q0.trace_residual());
        let exact_blocks = *ql.matrix() == ql.reassemble() && *q0.matrix() == q0.reassemble();
        let commutator = *q0.matrix() == commutator_superoperator(q0.hamiltonian());
        if exact_blocks && commutator {
            ok += 1;
        }
    }
    outcome(
        ok == 10 && worst_trace < 1e-12,
        format!("seed {SEED}: {ok}/10 graphs with exact block and commutator agreement, trace residual {worst_trace:.1e}"),
    )
}

fn exponent_halving() -> Result<Outcome> {
    let g = families::path(4);
    let mut rho0 = CMatrix::zeros(4, 4);
    rho0[(0, 0)] = C64::new(1.0, 0.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for (omega, expected) in [(0.0, 6.0), (0.5, 3.0)] {
        let ql = QswLindbladian::new(&g, &[0.0; 4], omega)?;
        let tau = ql.timescale()?;
        let times = fit_grid(tau, FIT_WINDOW, FIT_POINTS);
        let series: Vec<(f64, f64)> = evolve_density(&ql, &rho0, &times)?
            .iter()
            .zip(&times)
            .map(|(rho, &t)| (t, rho[(3, 3)].re))
            .collect();
        let slope = fit_exponent(&series, (FIT_WINDOW.0 * tau, FIT_WINDOW.1 * tau))?.slope;
        pass &= (slope / expected - 1.0).abs() <= 0.03;
        parts.push(format!("omega {omega}: slope {slope:.4}"));
    }
    outcome(pass, parts.join(", "))
}

fn distance_oracle() -> Result<Outcome> {
    const SEED: u64 = 606;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut matched, mut total) = (0, 0);
    for _ in 0..20 {
        let n = rng.random_range(3..=8);
        let g = families::random_connected(n, 0.3, &mut rng);
        let gen = ctqw_generator(&g, &vec![0.0; n])?;
        let pairs: Vec<(usize, usize)> = reachable_pairs(&g)?
            .into_iter()
            .filter(|&(s, t)| distances_and_counts(&g, s).map(|sp| sp.distance[t] <= Some(3)).unwrap_or(false))
            .collect();
        let tau = timescale(&gen, 0.0, TimescaleMode::GeneratorNorm)?;
        let window = (FIT_WINDOW.0 * tau, FIT_WINDOW.1 * tau);
        for f in fit_pairs(&gen, &pairs, &fit_grid(tau, FIT_WINDOW, FIT_POINTS), window, DEFAULT_TOL)? {
            total += 1;
            if Some(f.inferred_distance) == f.distance {
                matched += 1;
            }
        }
    }
    outcome(matched == total, format!("seed {SEED}: {matched}/{total} pairs with d <= 3 recovered"))
}

fn main() {
    type Check = fn() -> Result<Outcome>;
    let checks: [(&str, Check); 11] = [
        ("static envelope", static_bound),
        ("interaction-picture envelope", interaction_bound),
        ("exponent laws", exponent_laws),
        ("coefficient law", coefficient_law),
        ("potential universality", universality),
        ("chiral cancellation", chiral_cancellation),
        ("gauge trivialization", gauge),
        ("rotating frame", rotating_frame),
        ("lindbladian structure", lindblad_structure),
        ("exponent halving", exponent_halving),
        ("distance oracle", distance_oracle),
    ];
    let mut failures = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] {:>2} {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} acceptance checks passed", checks.len() - failures, checks.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
