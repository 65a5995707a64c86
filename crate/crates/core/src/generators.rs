//! Generator families `M(t)` for `dX/dt = M(t) X`.
//!
//! Static generators cover the classical walk `-L`, tight-binding walks
//! `-i(A + V)` and chiral walks `-i H_ch`. Two time-dependent families are
//! supported: the interaction picture `exp(-V t) M exp(V t)` of a static
//! matrix split into diagonal and off-diagonal parts, and the rotating frame
//! `-i exp(i W t) A exp(-i W t)` with a real diagonal frequency matrix `W`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::{adjacency_matrix, standard_matrices, Graph};
use crate::linalg::{check_capacity, check_finite};
use crate::{CMatrix, Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// How transition probabilities are read off the propagator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// The entry itself is the probability (stochastic evolution).
    Direct,
    /// The probability is the squared modulus of the entry (unitary evolution).
    SquaredModulus,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorKind {
    Static(CMatrix),
    /// `M(t) = exp(-V t) M_off exp(V t)` with diagonal `V` and zero-diagonal `M_off`.
    Interaction {
        diagonal: Vec<C64>,
        off_diagonal: CMatrix,
    },
    /// `M(t)_{mn} = -i A_{mn} exp(i (W_m - W_n) t)`.
    RotatingFrame {
        frequencies: Vec<f64>,
        adjacency: CMatrix,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    kind: GeneratorKind,
    readout: Readout,
}

impl Generator {
    /// Static generator from an arbitrary square matrix.
    pub fn from_matrix(m: CMatrix, readout: Readout) -> Result<Self> {
        validate_square(&m)?;
        Ok(Generator {
            kind: GeneratorKind::Static(m),
            readout,
        })
    }

    /// Interaction-picture generator obtained by splitting `m` into its
    /// diagonal and off-diagonal parts.
    pub fn interaction(m: &CMatrix, readout: Readout) -> Result<Self> {
        validate_square(m)?;
        let diagonal: Vec<C64> = m.diagonal().iter().copied().collect();
        let mut off_diagonal = m.clone();
        off_diagonal.fill_diagonal(ZERO);
        Ok(Generator {
            kind: GeneratorKind::Interaction {
                diagonal,
                off_diagonal,
            },
            readout,
        })
    }

    pub fn interaction_parts(
        diagonal: Vec<C64>,
        off_diagonal: CMatrix,
        readout: Readout,
    ) -> Result<Self> {
        validate_square(&off_diagonal)?;
        if diagonal.len() != off_diagonal.nrows() {
            return Err(Error::domain(format!(
                "diagonal has length {}, off-diagonal part is {}x{}",
                diagonal.len(),
                off_diagonal.nrows(),
                off_diagonal.ncols()
            )));
        }
        if diagonal.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::domain("non-finite diagonal entry"));
        }
        if off_diagonal.diagonal().iter().any(|&z| z != ZERO) {
            return Err(Error::domain("off-diagonal part has a nonzero diagonal"));
        }
        Ok(Generator {
            kind: GeneratorKind::Interaction {
                diagonal,
                off_diagonal,
            },
            readout,
        })
    }

    pub fn kind(&self) -> &GeneratorKind {
        &self.kind
    }

    pub fn readout(&self) -> Readout {
        self.readout
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            GeneratorKind::Static(m) => m.nrows(),
            GeneratorKind::Interaction { diagonal, .. } => diagonal.len(),
            GeneratorKind::RotatingFrame { frequencies, .. } => frequencies.len(),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self.kind, GeneratorKind::Static(_))
    }

    /// Dense `M(t)`.
    pub fn evaluate(&self, t: f64) -> CMatrix {
        match &self.kind {
            GeneratorKind::Static(m) => m.clone(),
            _ => {
                let n = self.dim();
                CMatrix::from_fn(n, n, |r, c| self.entry(r, c, t))
            }
        }
    }

    /// Scalar `<m|M(t)|n>`.
    pub fn entry(&self, m: usize, n: usize, t: f64) -> C64 {
        match &self.kind {
            GeneratorKind::Static(mat) => mat[(m, n)],
            GeneratorKind::Interaction {
                diagonal,
                off_diagonal,
            } => {
                let x = off_diagonal[(m, n)];
                if x == ZERO {
                    ZERO
                } else {
                    x * ((diagonal[n] - diagonal[m]) * t).exp()
                }
            }
            GeneratorKind::RotatingFrame {
                frequencies,
                adjacency,
            } => {
                let a = adjacency[(m, n)];
                if a == ZERO {
                    ZERO
                } else {
                    -I * a * C64::from_polar(1.0, (frequencies[m] - frequencies[n]) * t)
                }
            }
        }
    }

    /// Whether `n -> m` is an edge of the generator's graph, i.e. the entry
    /// `<m|M(t)|n>` is not identically zero.
    pub fn has_transition(&self, n: usize, m: usize) -> bool {
        n != m && self.structural_off_diagonal()[(m, n)] != ZERO
    }

    /// A time-independent matrix with the same off-diagonal support as `M(t)`.
    fn structural_off_diagonal(&self) -> &CMatrix {
        match &self.kind {
            GeneratorKind::Static(m) => m,
            GeneratorKind::Interaction { off_diagonal, .. } => off_diagonal,
            GeneratorKind::RotatingFrame { adjacency, .. } => adjacency,
        }
    }

    /// Directed graph of the generator: `n -> m` iff `<m|M(t)|n>` is not
    /// identically zero.
    pub fn support_graph(&self) -> Graph {
        Graph::from_support(self.structural_off_diagonal()).expect("square by construction")
    }

    /// Off-diagonal part whose entries moduli do not depend on time.
    pub fn off_diagonal_part(&self) -> CMatrix {
        match &self.kind {
            GeneratorKind::Static(m) => {
                let mut o = m.clone();
                o.fill_diagonal(ZERO);
                o
            }
            GeneratorKind::Interaction { off_diagonal, .. } => off_diagonal.clone(),
            GeneratorKind::RotatingFrame { adjacency, .. } => adjacency.map(|a| -I * a),
        }
    }

    /// Diagonal part used by the interaction-picture envelope.
    pub fn diagonal_part(&self) -> Vec<C64> {
        match &self.kind {
            GeneratorKind::Static(m) => m.diagonal().iter().copied().collect(),
            GeneratorKind::Interaction { diagonal, .. } => diagonal.clone(),
            GeneratorKind::RotatingFrame { frequencies, .. } => vec![ZERO; frequencies.len()],
        }
    }

    /// For the interaction picture, the static lab-frame matrix
    /// `diag(V) + M_off` whose exponential the interaction picture factorises.
    pub fn lab_frame_matrix(&self) -> Option<CMatrix> {
        match &self.kind {
            GeneratorKind::Interaction {
                diagonal,
                off_diagonal,
            } => {
                let mut m = off_diagonal.clone();
                for (i, &v) in diagonal.iter().enumerate() {
                    m[(i, i)] = v;
                }
                Some(m)
            }
            _ => None,
        }
    }

    /// `exp(V_m t)` relating interaction-picture and lab-frame entries in row
    /// `m`; 1 for the other kinds.
    pub fn lab_frame_factor(&self, m: usize, t: f64) -> C64 {
        match &self.kind {
            GeneratorKind::Interaction { diagonal, .. } => (diagonal[m] * t).exp(),
            _ => C64::new(1.0, 0.0),
        }
    }
}

fn validate_square(m: &CMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::domain(format!(
            "generator must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    check_capacity(m.nrows())?;
    check_finite(m)
}

/// Classical walk generator `-L`.
pub fn ctrw_generator(g: &Graph) -> Result<Generator> {
    let sm = standard_matrices(g)?;
    let m = sm.laplacian.map(|x| C64::new(-x, 0.0));
    Generator::from_matrix(m, Readout::Direct)
}

/// Tight-binding generator `-i (A + diag(v))`.
pub fn ctqw_generator(g: &Graph, potential: &[f64]) -> Result<Generator> {
    Generator::from_matrix(tight_binding_matrix(g, potential)?.map(|h| -I * h), Readout::SquaredModulus)
}

/// Hamiltonian `A + diag(v)` of an undirected graph.
pub fn tight_binding_matrix(g: &Graph, potential: &[f64]) -> Result<CMatrix> {
    if g.is_directed() {
        return Err(Error::domain("tight-binding Hamiltonian needs an undirected graph"));
    }
    check_len("potential", potential.len(), g.n())?;
    if potential.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite potential entry"));
    }
    let mut h = adjacency_matrix(g);
    for (i, &v) in potential.iter().enumerate() {
        h[(i, i)] = C64::new(v, 0.0);
    }
    Ok(h)
}

/// Hopping phases, one angle per undirected edge.
///
/// Angles are stored under the key `(u, v)` with `u < v`; the transition
/// `u -> v` picks up `exp(i theta)` and `v -> u` the conjugate. Inserting an
/// angle for `(v, u)` stores `-theta` under `(u, v)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgePhases(BTreeMap<(usize, usize), f64>);

impl EdgePhases {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, tail: usize, head: usize, theta: f64) {
        if tail < head {
            self.0.insert((tail, head), theta);
        } else {
            self.0.insert((head, tail), -theta);
        }
    }

    pub fn with(mut self, tail: usize, head: usize, theta: f64) -> Self {
        self.insert(tail, head, theta);
        self
    }

    /// Angle picked up by the transition `tail -> head` (0 when unset).
    pub fn angle(&self, tail: usize, head: usize) -> f64 {
        if tail < head {
            self.0.get(&(tail, head)).copied().unwrap_or(0.0)
        } else {
            -self.0.get(&(head, tail)).copied().unwrap_or(0.0)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &f64)> {
        self.0.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Chiral Hamiltonian: entry `(v, u)` is `w_{u->v} exp(i theta_{u->v})`.
pub fn chiral_matrix(g: &Graph, phases: &EdgePhases) -> Result<CMatrix> {
    if g.is_directed() {
        return Err(Error::domain("chiral Hamiltonian needs an undirected graph"));
    }
    for (&(u, v), theta) in phases.iter() {
        if !g.has_edge(u, v) {
            return Err(Error::domain(format!("phase given for non-edge {u}-{v}")));
        }
        if !theta.is_finite() {
            return Err(Error::domain(format!("non-finite phase on edge {u}-{v}")));
        }
    }
    let n = g.n();
    let mut h = CMatrix::zeros(n, n);
    for (t, hd, w) in g.directed_edges() {
        h[(hd, t)] = w * C64::from_polar(1.0, phases.angle(t, hd));
    }
    Ok(h)
}

/// Chiral walk generator `-i H_ch`.
pub fn chiral_hamiltonian(g: &Graph, phases: &EdgePhases) -> Result<Generator> {
    Generator::from_matrix(chiral_matrix(g, phases)?.map(|h| -I * h), Readout::SquaredModulus)
}

/// Rotating-frame generator `-i exp(i W t) A exp(-i W t)`.
pub fn rotating_frame_generator(g: &Graph, frequencies: &[f64]) -> Result<Generator> {
    let sm = standard_matrices(g)?;
    check_len("frequency vector", frequencies.len(), g.n())?;
    if frequencies.iter().any(|w| !w.is_finite()) {
        return Err(Error::domain("non-finite frequency"));
    }
    check_capacity(g.n())?;
    Ok(Generator {
        kind: GeneratorKind::RotatingFrame {
            frequencies: frequencies.to_vec(),
            adjacency: sm.adjacency.map(|a| C64::new(a, 0.0)),
        },
        readout: Readout::SquaredModulus,
    })
}

fn check_len(what: &str, got: usize, n: usize) -> Result<()> {
    if got == n {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} has length {got}, graph has {n} vertices")))
    }
}

/// `n` independent standard normal draws from the stream `(seed, stream)`.
///
/// Each stream is independent of the others, so realisation `k` of an
/// ensemble can be generated without drawing realisations `0..k`.
pub fn gaussian_vector(n: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::families;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn ctrw_single_edge() {
        let g = ctrw_generator(&families::path(2)).unwrap();
        assert_eq!(
            g.evaluate(0.0),
            CMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)])
        );
        assert_eq!(g.readout(), Readout::Direct);
    }

    #[test]
    fn ctrw_column_sums_and_diagonal() {
        let m = ctrw_generator(&families::path(3)).unwrap().evaluate(0.0);
        let diag: Vec<f64> = m.diagonal().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![-1.0, -2.0, -1.0]);
        for col in 0..3 {
            assert_eq!(m.column(col).sum(), c(0.0, 0.0));
        }
        let m = ctrw_generator(&families::binary_tree(2)).unwrap().evaluate(0.0);
        for col in 0..m.ncols() {
            assert_eq!(m.column(col).sum(), c(0.0, 0.0));
        }
    }

    #[test]
    fn ctrw_rejects_directed() {
        let g = Graph::from_edges(2, true, [(0, 1)]).unwrap();
        assert!(ctrw_generator(&g).is_err());
    }

    #[test]
    fn ctqw_single_edge() {
        let g = families::path(2);
        let m = ctqw_generator(&g, &[0.0, 0.0]).unwrap().evaluate(0.0);
        assert_eq!(m, CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, -1.0), c(0.0, 0.0)]));
        let m = ctqw_generator(&g, &[1.0, 2.0]).unwrap().evaluate(0.0);
        assert_eq!(m, CMatrix::from_row_slice(2, 2, &[c(0.0, -1.0), c(0.0, -1.0), c(0.0, -1.0), c(0.0, -2.0)]));
        assert_eq!(m.adjoint(), -m);
        assert!(ctqw_generator(&g, &[1.0]).is_err());
    }

    #[test]
    fn chiral_orientation_convention() {
        let g = families::path(2);
        let h = chiral_matrix(&g, &EdgePhases::new().with(0, 1, FRAC_PI_2)).unwrap();
        assert!((h[(1, 0)] - c(0.0, 1.0)).norm() < 1e-15);
        assert!((h[(0, 1)] - c(0.0, -1.0)).norm() < 1e-15);
        // Inserting the reversed orientation stores the negated angle.
        let h2 = chiral_matrix(&g, &EdgePhases::new().with(1, 0, -FRAC_PI_2)).unwrap();
        assert_eq!(h, h2);
    }

    #[test]
    fn chiral_zero_phases_is_adjacency() {
        let g = families::diamond_with_chord();
        let h = chiral_matrix(&g, &EdgePhases::new()).unwrap();
        assert_eq!(h, adjacency_matrix(&g));
    }

    #[test]
    fn chiral_rejects_non_edge() {
        let g = families::path(3);
        assert!(chiral_hamiltonian(&g, &EdgePhases::new().with(0, 2, 1.0)).is_err());
    }

    #[test]
    fn chiral_full_turns_equal_ctqw() {
        let g = families::diamond_with_chord();
        let mut phases = EdgePhases::new();
        for (k, (u, v)) in g.undirected_edges().enumerate() {
            phases.insert(u, v, 2.0 * PI * k as f64);
        }
        let a = chiral_hamiltonian(&g, &phases).unwrap().evaluate(0.0);
        let b = ctqw_generator(&g, &[0.0; 4]).unwrap().evaluate(0.0);
        assert!((a - b).iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn diamond_cancellation_by_hand() {
        let g = families::diamond_with_chord();
        let m = chiral_hamiltonian(&g, &EdgePhases::new().with(0, 2, PI)).unwrap().evaluate(0.0);
        // The two distance-2 routes 0-a-1 and 0-b-1 (a = 2, b = 3).
        let sum = m[(1, 2)] * m[(2, 0)] + m[(1, 3)] * m[(3, 0)];
        assert!(sum.norm() < 1e-15);
    }

    #[test]
    fn rotating_frame_entries() {
        let g = families::path(3);
        let omega = 0.7;
        let gen = rotating_frame_generator(&g, &[omega, 0.0, 0.0]).unwrap();
        for &t in &[0.0, 0.3, 2.0] {
            let e = I * gen.entry(1, 0, t);
            assert!((e - C64::from_polar(1.0, -omega * t)).norm() < 1e-15);
            // Direct product exp(i W t) A exp(-i W t).
            let lam = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                C64::from_polar(1.0, -omega * t),
                c(1.0, 0.0),
                c(1.0, 0.0),
            ]));
            let a = adjacency_matrix(&g);
            let direct = lam.adjoint() * a * &lam;
            assert!((gen.evaluate(t) - direct.map(|z| -I * z)).iter().all(|z| z.norm() < 1e-15));
        }
        let still = rotating_frame_generator(&g, &[0.0; 3]).unwrap();
        assert_eq!(still.evaluate(1.3), ctqw_generator(&g, &[0.0; 3]).unwrap().evaluate(0.0));
        assert!(rotating_frame_generator(&g, &[0.0; 2]).is_err());
    }

    #[test]
    fn interaction_entry_matches_matrix_product() {
        let g = families::diamond_with_chord();
        let v = gaussian_vector(4, 3, 0);
        let m = ctqw_generator(&g, &v).unwrap().evaluate(0.0);
        let gen = Generator::interaction(&m, Readout::SquaredModulus).unwrap();
        let GeneratorKind::Interaction { diagonal, off_diagonal } = gen.kind() else {
            panic!("interaction kind")
        };
        for &t in &[0.0, 0.25, 1.5] {
            let e = |s: f64| {
                CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(4, diagonal.iter().map(|d| (d * s).exp())))
            };
            let prod = e(-t) * off_diagonal * e(t);
            let diff = prod - gen.evaluate(t);
            assert!(diff.iter().all(|z| z.norm() < 1e-14));
        }
        assert!(gen.evaluate(0.0).diagonal().iter().all(|&z| z == ZERO));
        assert_eq!(gen.lab_frame_matrix().unwrap(), m);
    }

    #[test]
    fn interaction_parts_validation() {
        let mut off = CMatrix::zeros(2, 2);
        off[(0, 0)] = c(1.0, 0.0);
        assert!(Generator::interaction_parts(vec![ZERO; 2], off, Readout::Direct).is_err());
        assert!(Generator::interaction_parts(vec![ZERO; 3], CMatrix::zeros(2, 2), Readout::Direct).is_err());
    }

    #[test]
    fn gaussian_streams_are_reproducible_and_distinct() {
        assert_eq!(gaussian_vector(5, 42, 3), gaussian_vector(5, 42, 3));
        assert_ne!(gaussian_vector(5, 42, 3), gaussian_vector(5, 42, 4));
        assert_ne!(gaussian_vector(5, 42, 3), gaussian_vector(5, 43, 3));
        let big = gaussian_vector(20_000, 1, 0);
        let mean = big.iter().sum::<f64>() / big.len() as f64;
        let var = big.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / big.len() as f64;
        assert!(mean.abs() < 0.05 && (var - 1.0).abs() < 0.05);
    }

    #[test]
    fn support_graph_of_generators() {
        let g = families::cycle(5);
        assert!(ctqw_generator(&g, &[0.0; 5]).unwrap().support_graph().same_topology(&g));
        assert!(rotating_frame_generator(&g, &[1.0; 5]).unwrap().support_graph().same_topology(&g));
        assert!(ctrw_generator(&g).unwrap().support_graph().same_topology(&g));
    }
}
