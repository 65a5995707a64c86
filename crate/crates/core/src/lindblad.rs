//! Quantum stochastic walks: the Lindbladian
//! `L X = -i[H, X] + w sum_e (L_e X L_e^† - {L_e^† L_e, X} / 2)`
//! with `H = diag(V) + A` and one jump operator `L_e = |t><h|` per directed
//! edge `e = t -> h` of the graph.
//!
//! Matrices are vectorized row-major: the unit `E_nm = |n><m|` sits at flat
//! index `n d + m`. A directed edge `f = t -> h` of the complete graph is
//! identified with the coherence `E_ht`.

use serde::{Serialize, Serializer};

use crate::asymptotics::{predict_on_support, ErrorEnvelope};
use crate::generators::{Generator, Readout};
use crate::graph::{distances_and_counts, standard_matrices, Graph, ShortestPaths};
use crate::linalg::{check_capacity, check_finite, hs_norm, spectral_norm, StaticPropagator, MAX_DIM};
use crate::{CMatrix, Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Tolerance on Hermiticity, trace and positivity of an input density matrix.
pub const DENSITY_TOL: f64 = 1e-10;

/// The four blocks of the Lindbladian in the population/coherence split.
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladBlocks {
    /// `-w L`, populations to populations.
    pub population: CMatrix,
    /// `i I^T`, coherences to populations.
    pub coherence_to_population: CMatrix,
    /// `i I` with the signed incidence matrix `I`, populations to coherences.
    pub population_to_coherence: CMatrix,
    /// `V(w) - i Â`.
    pub coherence: CMatrix,
}

#[derive(Clone, Debug)]
pub struct QswLindbladian {
    omega: f64,
    graph: Graph,
    potential: Vec<f64>,
    hamiltonian: CMatrix,
    degrees: Vec<f64>,
    matrix: CMatrix,
    blocks: LindbladBlocks,
    /// Coherence units `(n, m)`, `n != m`, in flat-index order.
    coherences: Vec<(usize, usize)>,
}

impl QswLindbladian {
    /// Builds the Lindbladian twice, once by applying the map to every matrix
    /// unit and once from its blocks, and fails if the two disagree in any
    /// entry.
    pub fn new(g: &Graph, potential: &[f64], omega: f64) -> Result<Self> {
        let sm = standard_matrices(g)?;
        let d = g.n();
        if potential.len() != d {
            return Err(Error::domain(format!(
                "potential has length {}, graph has {d} vertices",
                potential.len()
            )));
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite potential"));
        }
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(Error::domain(format!("omega must be finite and nonnegative, got {omega}")));
        }
        if d * d > MAX_DIM {
            return Err(Error::Capacity { dim: d * d, limit: MAX_DIM });
        }
        let mut hamiltonian = sm.adjacency.map(|a| C64::new(a, 0.0));
        for (v, &x) in potential.iter().enumerate() {
            hamiltonian[(v, v)] = C64::new(x, 0.0);
        }
        let coherences = (0..d)
            .flat_map(|n| (0..d).filter(move |&m| m != n).map(move |m| (n, m)))
            .collect();
        let mut ql = QswLindbladian {
            omega,
            graph: g.clone(),
            potential: potential.to_vec(),
            hamiltonian,
            degrees: sm.degree.diagonal().iter().copied().collect(),
            matrix: CMatrix::zeros(0, 0),
            blocks: LindbladBlocks {
                population: CMatrix::zeros(0, 0),
                coherence_to_population: CMatrix::zeros(0, 0),
                population_to_coherence: CMatrix::zeros(0, 0),
                coherence: CMatrix::zeros(0, 0),
            },
            coherences,
        };
        ql.matrix = ql.matrix_from_units();
        ql.blocks = ql.blocks_from_graph();
        let reassembled = ql.reassemble();
        if let Some((r, c)) = first_mismatch(&ql.matrix, &reassembled) {
            return Err(Error::Consistency(format!(
                "Lindbladian block assembly differs at ({r}, {c}): {} vs {}",
                ql.matrix[(r, c)],
                reassembled[(r, c)]
            )));
        }
        if omega == 0.0 {
            let commutator = commutator_superoperator(&ql.hamiltonian);
            if let Some((r, c)) = first_mismatch(&ql.matrix, &commutator) {
                return Err(Error::Consistency(format!("coherent Lindbladian differs from -i[H, .] at ({r}, {c})")));
            }
        }
        Ok(ql)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Hilbert-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.graph.n()
    }

    /// The `d^2 x d^2` matrix in the `E_nm` basis.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn blocks(&self) -> &LindbladBlocks {
        &self.blocks
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn flat_index(&self, n: usize, m: usize) -> usize {
        n * self.dim() + m
    }

    pub fn unit(&self, index: usize) -> (usize, usize) {
        (index / self.dim(), index % self.dim())
    }

    pub fn coherence_units(&self) -> &[(usize, usize)] {
        &self.coherences
    }

    fn check_unit(&self, (n, m): (usize, usize)) -> Result<()> {
        let d = self.dim();
        if n < d && m < d {
            Ok(())
        } else {
            Err(Error::domain(format!("matrix unit ({n}, {m}) out of range (d = {d})")))
        }
    }

    /// Applies the Lindbladian to an arbitrary `d x d` matrix.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let h = &self.hamiltonian;
        let coherent = (h * x - x * h).map(|z| -C64::i() * z);
        let mut jumps = CMatrix::zeros(x.nrows(), x.ncols());
        for (t, hd, _) in self.graph.directed_edges() {
            jumps[(t, t)] += x[(hd, hd)];
        }
        let half = self.omega / 2.0;
        let anti = CMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
            (x[(r, c)] * self.degrees[r] + x[(r, c)] * self.degrees[c]) * half
        });
        coherent + jumps.map(|z| z * self.omega) - anti
    }

    fn matrix_from_units(&self) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d * d, d * d);
        for k in 0..d {
            for l in 0..d {
                let mut unit = CMatrix::zeros(d, d);
                unit[(k, l)] = C64::new(1.0, 0.0);
                let image = self.apply(&unit);
                let col = self.flat_index(k, l);
                for n in 0..d {
                    for m in 0..d {
                        out[(self.flat_index(n, m), col)] = image[(n, m)];
                    }
                }
            }
        }
        out
    }

    fn blocks_from_graph(&self) -> LindbladBlocks {
        let d = self.dim();
        let w = self.omega;
        let g = &self.graph;
        let f = self.coherences.len();
        let population = CMatrix::from_fn(d, d, |v, u| {
            if v == u {
                C64::new(-(w / 2.0 * (self.degrees[u] + self.degrees[u])), 0.0)
            } else if g.has_edge(u, v) {
                C64::new(w, 0.0)
            } else {
                ZERO
            }
        });
        // Signed incidence: +1 at the head, -1 at the tail of graph edges.
        let incidence = |fi: usize, v: usize| -> f64 {
            let (hd, t) = self.coherences[fi];
            if !g.has_edge(t, hd) {
                0.0
            } else if v == hd {
                1.0
            } else if v == t {
                -1.0
            } else {
                0.0
            }
        };
        let population_to_coherence = CMatrix::from_fn(f, d, |fi, v| C64::new(0.0, incidence(fi, v)));
        let coherence_to_population = CMatrix::from_fn(d, f, |v, fi| C64::new(0.0, incidence(fi, v)));
        let coherence = CMatrix::from_fn(f, f, |ei, fi| {
            let (he, te) = self.coherences[ei];
            let (hf, tf) = self.coherences[fi];
            if ei == fi {
                let decay = -(w / 2.0 * (self.degrees[hf] + self.degrees[tf]));
                let phase = -(self.potential[hf] - self.potential[tf]);
                return C64::new(decay, phase);
            }
            let signed = if te == tf && g.has_edge(hf, he) {
                1.0
            } else if he == hf && g.has_edge(te, tf) {
                -1.0
            } else {
                0.0
            };
            C64::new(0.0, -signed)
        });
        LindbladBlocks {
            population,
            coherence_to_population,
            population_to_coherence,
            coherence,
        }
    }

    /// The full matrix rebuilt from [`Self::blocks`].
    pub fn reassemble(&self) -> CMatrix {
        let d = self.dim();
        let b = &self.blocks;
        let mut out = CMatrix::zeros(d * d, d * d);
        let pop = |v: usize| v * d + v;
        let coh = |fi: usize| {
            let (n, m) = self.coherences[fi];
            n * d + m
        };
        for v in 0..d {
            for u in 0..d {
                out[(pop(v), pop(u))] = b.population[(v, u)];
            }
            for fi in 0..self.coherences.len() {
                out[(pop(v), coh(fi))] = b.coherence_to_population[(v, fi)];
                out[(coh(fi), pop(v))] = b.population_to_coherence[(fi, v)];
            }
        }
        for ei in 0..self.coherences.len() {
            for fi in 0..self.coherences.len() {
                out[(coh(ei), coh(fi))] = b.coherence[(ei, fi)];
            }
        }
        out
    }

    /// `max_j |sum_v L[vv, j]|`: how far the map is from preserving trace.
    pub fn trace_residual(&self) -> f64 {
        let d = self.dim();
        (0..d * d)
            .map(|j| (0..d).map(|v| self.matrix[(v * d + v, j)]).sum::<C64>().norm())
            .fold(0.0, f64::max)
    }

    /// `1 / ||L||` with the spectral norm over Hilbert-Schmidt space.
    pub fn timescale(&self) -> Result<f64> {
        let norm = spectral_norm(&self.matrix)?;
        Ok(if norm == 0.0 { f64::INFINITY } else { 1.0 / norm })
    }

    /// The Lindbladian as a static generator on the `d^2` matrix units.
    pub fn generator(&self) -> Result<Generator> {
        Generator::from_matrix(self.matrix.clone(), Readout::Direct)
    }

    /// Support graph of the matrix: `E_kl -> E_nm` iff the entry is nonzero.
    pub fn support_graph(&self) -> Result<Graph> {
        Graph::from_support(&self.matrix)
    }
}

fn first_mismatch(a: &CMatrix, b: &CMatrix) -> Option<(usize, usize)> {
    (0..a.ncols())
        .flat_map(|c| (0..a.nrows()).map(move |r| (r, c)))
        .find(|&(r, c)| a[(r, c)] != b[(r, c)])
}

/// `-i (H (x) 1 - 1 (x) H^T)`, the row-major vectorization of `-i[H, .]`.
pub fn commutator_superoperator(h: &CMatrix) -> CMatrix {
    let n = h.nrows();
    let id = CMatrix::identity(n, n);
    (h.kronecker(&id) - id.kronecker(&h.transpose())).map(|z| -C64::i() * z)
}

fn serialize_complex<S: Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// Shortest-path data between two matrix units in the graph of the
/// Lindbladian, obtained from distances in the base graph.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LGraphGeometry {
    pub source_unit: (usize, usize),
    pub target_unit: (usize, usize),
    pub distance: usize,
    pub path_count: u128,
    /// Sum over shortest paths of the product of matrix entries, divided by
    /// `distance!`: the coefficient of `t^distance`.
    #[serde(serialize_with = "serialize_complex")]
    pub amplitude_coefficient: C64,
    /// Pairs `(u, v)`, `u != v`, whose route through the dissipative
    /// population hops `u -> ... -> v` is shortest.
    pub minimizing_pairs: Vec<(usize, usize)>,
    /// Whether a purely coherent route is among the shortest.
    pub coherent_route: bool,
}

/// Distance, count and summed amplitude of coherent paths `E_nm -> E_kl`:
/// `d(n,k) + d(m,l)`, `l(n,k) l(m,l) binom(D, d(n,k))` and
/// `(-i)^d(n,k) i^d(m,l)` per path.
#[derive(Clone, Copy)]
struct Coherent {
    distance: usize,
    count: u128,
    amplitude: C64,
}

struct BaseGeometry {
    paths: Vec<ShortestPaths>,
}

impl BaseGeometry {
    fn new(g: &Graph) -> Result<Self> {
        let paths = (0..g.n()).map(|s| distances_and_counts(g, s)).collect::<Result<_>>()?;
        Ok(BaseGeometry { paths })
    }

    fn distance(&self, a: usize, b: usize) -> Option<usize> {
        self.paths[a].distance[b]
    }

    fn count(&self, a: usize, b: usize) -> u128 {
        self.paths[a].count[b]
    }

    fn coherent(&self, (n, m): (usize, usize), (k, l): (usize, usize)) -> Option<Coherent> {
        let a = self.distance(n, k)?;
        let b = self.distance(m, l)?;
        let count = self
            .count(n, k)
            .checked_mul(self.count(m, l))?
            .checked_mul(binomial(a + b, a)?)?;
        let amplitude = C64::new(0.0, -1.0).powi(a as i32) * C64::new(0.0, 1.0).powi(b as i32) * count as f64;
        Some(Coherent {
            distance: a + b,
            count,
            amplitude,
        })
    }
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

fn factorial(n: usize) -> f64 {
    (2..=n).map(|k| k as f64).product()
}

/// Geometry of the pair `source -> target` in the Lindbladian graph.
///
/// At `w = 0` only coherent hops exist. For `w > 0` a shortest path either
/// stays coherent or reaches a population `E_uu`, follows dissipative
/// population hops to `E_vv` and continues coherently to the target.
pub fn lgraph_geometry(
    ql: &QswLindbladian,
    source_unit: (usize, usize),
    target_unit: (usize, usize),
) -> Result<LGraphGeometry> {
    ql.check_unit(source_unit)?;
    ql.check_unit(target_unit)?;
    let base = BaseGeometry::new(&ql.graph)?;
    let no_path = || Error::NoPath {
        from: ql.flat_index(source_unit.0, source_unit.1),
        to: ql.flat_index(target_unit.0, target_unit.1),
    };
    let direct = base.coherent(source_unit, target_unit);

    let mut routes = Vec::new();
    if ql.omega > 0.0 {
        let d = ql.dim();
        for u in 0..d {
            let Some(first) = base.coherent(source_unit, (u, u)) else { continue };
            for v in (0..d).filter(|&v| v != u) {
                let Some(hop) = base.distance(u, v) else { continue };
                let Some(last) = base.coherent((v, v), target_unit) else { continue };
                routes.push(((u, v), first.distance + hop + last.distance, first, hop, last));
            }
        }
    }

    let best = routes
        .iter()
        .map(|r| r.1)
        .chain(direct.as_ref().map(|c| c.distance))
        .min()
        .ok_or_else(no_path)?;

    let mut count: u128 = 0;
    let mut sum = ZERO;
    let coherent_route = direct.as_ref().is_some_and(|c| c.distance == best);
    if let Some(c) = direct.as_ref().filter(|_| coherent_route) {
        count = c.count;
        sum = c.amplitude;
    }
    let mut minimizing_pairs = Vec::new();
    for ((u, v), dist, first, hop, last) in &routes {
        if *dist != best {
            continue;
        }
        minimizing_pairs.push((*u, *v));
        let hops = base.count(*u, *v);
        count = first
            .count
            .checked_mul(hops)
            .and_then(|x| x.checked_mul(last.count))
            .and_then(|x| x.checked_add(count))
            .ok_or(Error::CountOverflow)?;
        sum += first.amplitude * ql.omega.powi(*hop as i32) * hops as f64 * last.amplitude;
    }
    Ok(LGraphGeometry {
        source_unit,
        target_unit,
        distance: best,
        path_count: count,
        amplitude_coefficient: sum / factorial(best),
        minimizing_pairs,
        coherent_route,
    })
}

/// How [`rho_short_time`] evaluates the leading term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhoMode {
    /// Shortest-path sum over the assembled matrix.
    PathSum,
    /// Closed form from base-graph distances and counts.
    ClosedForm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RhoEstimate {
    pub distance: usize,
    /// Coefficient of `t^distance`.
    #[serde(serialize_with = "serialize_complex")]
    pub coefficient: C64,
    #[serde(serialize_with = "serialize_complex")]
    pub value: C64,
    /// Envelope of the truncation error with `tau = 1 / ||L||`.
    pub envelope: ErrorEnvelope,
}

/// Leading short-time term of `rho_nm(t)` for the initial state `E_uu`.
pub fn rho_short_time(
    ql: &QswLindbladian,
    initial_vertex: usize,
    target_unit: (usize, usize),
    t: f64,
    mode: RhoMode,
) -> Result<RhoEstimate> {
    ql.check_unit((initial_vertex, initial_vertex))?;
    ql.check_unit(target_unit)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("time must be finite and nonnegative, got {t}")));
    }
    let tau = ql.timescale()?;
    let (distance, coefficient) = match mode {
        RhoMode::PathSum => {
            let gen = ql.generator()?;
            let source = ql.flat_index(initial_vertex, initial_vertex);
            let target = ql.flat_index(target_unit.0, target_unit.1);
            let p = predict_on_support(&gen, source, target, t)?.prediction;
            (p.distance, p.amplitude_coefficient)
        }
        RhoMode::ClosedForm => {
            let geo = lgraph_geometry(ql, (initial_vertex, initial_vertex), target_unit)?;
            (geo.distance, geo.amplitude_coefficient)
        }
    };
    Ok(RhoEstimate {
        distance,
        coefficient,
        value: coefficient * t.powi(distance as i32),
        envelope: ErrorEnvelope {
            tau,
            lambda_shift: 0.0,
            distance,
        },
    })
}

fn check_density(rho: &CMatrix, d: usize) -> Result<()> {
    if rho.shape() != (d, d) {
        return Err(Error::domain(format!("density matrix must be {d}x{d}, got {:?}", rho.shape())));
    }
    check_finite(rho)?;
    if hs_norm(&(rho - rho.adjoint())) > DENSITY_TOL {
        return Err(Error::domain("density matrix is not Hermitian"));
    }
    let trace = rho.trace();
    if (trace - 1.0).norm() > DENSITY_TOL {
        return Err(Error::domain(format!("density matrix has trace {trace}, expected 1")));
    }
    let hermitian = (rho + rho.adjoint()).map(|z| z * 0.5);
    let min = hermitian.symmetric_eigenvalues().min();
    if min < -DENSITY_TOL {
        return Err(Error::domain(format!("density matrix has negative eigenvalue {min:.3e}")));
    }
    Ok(())
}

/// `rho(t)` on a time grid by exponentiating the vectorized Lindbladian.
pub fn evolve_density(ql: &QswLindbladian, rho0: &CMatrix, times: &[f64]) -> Result<Vec<CMatrix>> {
    let d = ql.dim();
    check_density(rho0, d)?;
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::domain("time grid must be finite and nonnegative"));
    }
    check_capacity(d * d)?;
    let prop = StaticPropagator::new(&ql.matrix)?;
    let vec0 = nalgebra::DVector::from_iterator(d * d, (0..d).flat_map(|n| (0..d).map(move |m| rho0[(n, m)])));
    Ok(times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return rho0.clone();
            }
            let v = prop.at(t) * &vec0;
            CMatrix::from_fn(d, d, |n, m| v[n * d + m])
        })
        .collect())
}

/// Dense export of the Lindbladian matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LindbladianExport {
    pub omega: f64,
    pub dim: usize,
    /// Flat index of `E_nm` is `n * dim + m`.
    pub index: &'static str,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&QswLindbladian> for LindbladianExport {
    fn from(ql: &QswLindbladian) -> Self {
        let rows = |f: fn(&C64) -> f64| ql.matrix.row_iter().map(|r| r.iter().map(f).collect()).collect();
        LindbladianExport {
            omega: ql.omega,
            dim: ql.dim(),
            index: "n * dim + m",
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}
