//! Dense complex linear algebra: norms, the Hilbert–Schmidt product and
//! exact propagation of `dX/dt = M(t) X`.

mod expm;
pub(crate) mod ode;

pub use expm::expm;
pub(crate) use expm::one_norm;

use nalgebra::{DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::generators::{Generator, GeneratorKind};
use crate::{CMatrix, Error, Result, C64};

/// Largest dimension handled by the dense routines.
pub const MAX_DIM: usize = 256;

/// Default propagation tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Relative Hilbert–Schmidt threshold below which a matrix counts as
/// Hermitian or anti-Hermitian.
const SYMMETRY_THRESHOLD: f64 = 1e-12;

/// Above this value of `||M|| t` static propagation switches from the Padé
/// route to the eigendecomposition.
const EIGEN_SWITCH: f64 = 1.0;

const ODE_MAX_STEPS: usize = 200_000;

pub(crate) fn check_capacity(dim: usize) -> Result<()> {
    if dim > MAX_DIM {
        Err(Error::Capacity { dim, limit: MAX_DIM })
    } else {
        Ok(())
    }
}

pub(crate) fn check_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::domain("matrix has non-finite entries"))
    }
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::domain(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())))
    }
}

/// `trace(a^† b)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Result<C64> {
    if a.shape() != b.shape() {
        return Err(Error::domain(format!(
            "shape mismatch {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

pub fn hs_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    Hermitian,
    AntiHermitian,
    General,
}

pub fn classify(m: &CMatrix) -> Symmetry {
    if !m.is_square() {
        return Symmetry::General;
    }
    let scale = hs_norm(m);
    if scale == 0.0 {
        return Symmetry::Hermitian;
    }
    let adj = m.adjoint();
    if hs_norm(&(m - &adj)) < SYMMETRY_THRESHOLD * scale {
        Symmetry::Hermitian
    } else if hs_norm(&(m + &adj)) < SYMMETRY_THRESHOLD * scale {
        Symmetry::AntiHermitian
    } else {
        Symmetry::General
    }
}

/// Operator 2-norm `max ||M psi|| / ||psi||`.
pub fn spectral_norm(m: &CMatrix) -> Result<f64> {
    check_square(m)?;
    check_capacity(m.nrows())?;
    check_finite(m)?;
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let eig_max = |h: CMatrix| {
        h.symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |acc, l| acc.max(l.abs()))
    };
    Ok(match classify(m) {
        Symmetry::Hermitian => eig_max(hermitian_part(m)),
        Symmetry::AntiHermitian => eig_max(hermitian_part(&m.map(|z| z * C64::i()))),
        Symmetry::General => m.clone().singular_values().max(),
    })
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// `exp(M t)` for a fixed matrix at many times.
///
/// Short times (`||M|| t <= 1`) use the Padé route, which keeps entries that
/// are tiny because of graph distance accurate to relative precision. Longer
/// times of Hermitian or anti-Hermitian generators use a single
/// eigendecomposition.
pub struct StaticPropagator {
    m: CMatrix,
    norm: f64,
    spectral: Option<Spectral>,
}

struct Spectral {
    /// Eigenvalue multipliers: `exp(lambda t)` or `exp(-i lambda t)`.
    anti: bool,
    values: DVector<f64>,
    vectors: CMatrix,
}

impl StaticPropagator {
    pub fn new(m: &CMatrix) -> Result<Self> {
        check_square(m)?;
        check_capacity(m.nrows())?;
        check_finite(m)?;
        let norm = one_norm(m);
        let spectral = match classify(m) {
            Symmetry::Hermitian => Some((false, hermitian_part(m))),
            Symmetry::AntiHermitian => Some((true, hermitian_part(&m.map(|z| z * C64::i())))),
            Symmetry::General => None,
        }
        .map(|(anti, h)| {
            let eig = SymmetricEigen::new(h);
            Spectral {
                anti,
                values: eig.eigenvalues,
                vectors: eig.eigenvectors,
            }
        });
        Ok(StaticPropagator {
            m: m.clone(),
            norm,
            spectral,
        })
    }

    pub fn at(&self, t: f64) -> CMatrix {
        let n = self.m.nrows();
        if t == 0.0 {
            return CMatrix::identity(n, n);
        }
        match &self.spectral {
            Some(sp) if self.norm * t > EIGEN_SWITCH => {
                let phases = sp.values.map(|l| {
                    if sp.anti {
                        C64::from_polar(1.0, -l * t)
                    } else {
                        C64::new((l * t).exp(), 0.0)
                    }
                });
                let scaled = CMatrix::from_fn(n, n, |r, c| sp.vectors[(r, c)] * phases[c]);
                scaled * sp.vectors.adjoint()
            }
            _ => expm(&self.m.map(|z| z * t)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PropagationResult {
    pub times: Vec<f64>,
    /// `X(t)` at each grid time.
    pub states: Vec<CMatrix>,
    /// Error estimate per grid time.
    pub estimated_error: Vec<f64>,
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::domain("time grid must be finite and nonnegative"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("time grid must be sorted"));
    }
    Ok(())
}

/// Exact solution of `dX/dt = M(t) X`, `X(0) = 1`, on a time grid.
///
/// Static generators are exponentiated directly. Time-dependent generators
/// are integrated with an adaptive Dormand–Prince 5(4) pair to local
/// tolerance `tol`.
pub fn propagate(gen: &Generator, times: &[f64], tol: f64) -> Result<PropagationResult> {
    check_grid(times)?;
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let n = gen.dim();
    match gen.kind() {
        GeneratorKind::Static(m) => {
            let prop = StaticPropagator::new(m)?;
            let states: Vec<CMatrix> = times.par_iter().map(|&t| prop.at(t)).collect();
            let estimated_error = times
                .iter()
                .map(|&t| f64::EPSILON * n as f64 * (1.0 + prop.norm * t))
                .collect();
            Ok(PropagationResult {
                times: times.to_vec(),
                states,
                estimated_error,
            })
        }
        _ => {
            let rate = one_norm(&gen.evaluate(0.0)).max(f64::MIN_POSITIVE);
            let opts = ode::OdeOptions {
                rtol: tol,
                atol: vec![tol],
                max_steps: ODE_MAX_STEPS,
                initial_step: 0.05 / rate,
            };
            let identity: Vec<C64> = CMatrix::identity(n, n).as_slice().to_vec();
            let sol = ode::integrate(
                |t, x, dx| {
                    let xm = nalgebra::DMatrixView::<C64>::from_slice(x, n, n);
                    let prod = gen.evaluate(t) * xm;
                    dx.copy_from_slice(prod.as_slice());
                },
                identity,
                times,
                &opts,
            )?;
            let states = sol
                .states
                .into_iter()
                .map(|s| CMatrix::from_column_slice(n, n, &s))
                .collect();
            Ok(PropagationResult {
                times: times.to_vec(),
                states,
                estimated_error: sol.local_error,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{ctqw_generator, ctrw_generator, Readout};
    use crate::graph::{adjacency_matrix, families};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_norm_is_one() {
        for n in 1..6 {
            assert!((spectral_norm(&CMatrix::identity(n, n)).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    /// Eigenvalues of the 4-cycle adjacency are 2 cos(pi k / 2): {2, 0, -2, 0}.
    #[test]
    fn cycle_and_star_norms() {
        let a = adjacency_matrix(&families::cycle(4));
        assert!((spectral_norm(&a).unwrap() - 2.0).abs() < 1e-12);
        let s = adjacency_matrix(&families::star(3));
        assert!((spectral_norm(&s).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        // Anti-Hermitian and general routes agree on the same magnitude.
        assert!((spectral_norm(&a.map(|z| z * c(0.0, -1.0))).unwrap() - 2.0).abs() < 1e-12);
        let mut up = CMatrix::zeros(2, 2);
        up[(0, 1)] = c(3.0, 0.0);
        assert!((spectral_norm(&up).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_rejects_non_square() {
        assert!(spectral_norm(&CMatrix::zeros(2, 3)).is_err());
        let mut bad = CMatrix::zeros(2, 2);
        bad[(0, 0)] = c(f64::NAN, 0.0);
        assert!(spectral_norm(&bad).is_err());
        assert!(matches!(spectral_norm(&CMatrix::zeros(300, 300)), Err(Error::Capacity { .. })));
    }

    #[test]
    fn hs_inner_examples() {
        let mut e01 = CMatrix::zeros(3, 3);
        e01[(0, 1)] = c(1.0, 0.0);
        let mut e10 = CMatrix::zeros(3, 3);
        e10[(1, 0)] = c(1.0, 0.0);
        assert_eq!(hs_inner(&e01, &e01).unwrap(), c(1.0, 0.0));
        assert_eq!(hs_inner(&e01, &e10).unwrap(), c(0.0, 0.0));
        let id = CMatrix::identity(3, 3);
        assert_eq!(hs_inner(&id, &id).unwrap(), c(3.0, 0.0));
        assert!(hs_inner(&id, &CMatrix::zeros(2, 2)).is_err());
        assert_eq!(hs_inner(&e10.map(|z| z * c(0.0, 1.0)), &e10).unwrap(), c(0.0, -1.0));
    }

    #[test]
    fn zero_generator_is_identity() {
        let gen = Generator::from_matrix(CMatrix::zeros(3, 3), Readout::Direct).unwrap();
        let r = propagate(&gen, &[0.0, 0.5, 10.0], DEFAULT_TOL).unwrap();
        for s in &r.states {
            assert_eq!(*s, CMatrix::identity(3, 3));
        }
    }

    #[test]
    fn single_edge_closed_forms() {
        let g = families::path(2);
        let times = [0.0, 1e-3, 0.3, 0.9, 2.0, 7.5];
        let q = propagate(&ctqw_generator(&g, &[0.0, 0.0]).unwrap(), &times, DEFAULT_TOL).unwrap();
        let r = propagate(&ctrw_generator(&g).unwrap(), &times, DEFAULT_TOL).unwrap();
        assert_eq!(q.states[0], CMatrix::identity(2, 2));
        for (k, &t) in times.iter().enumerate() {
            let amp = q.states[k][(1, 0)];
            assert!((amp - c(0.0, -t.sin())).norm() < 1e-13, "t = {t}");
            let p = r.states[k][(1, 0)];
            assert!((p.re - (1.0 - (-2.0 * t).exp()) / 2.0).abs() < 1e-13, "t = {t}");
        }
        // Relative accuracy at the shortest time.
        let amp = q.states[1][(1, 0)];
        assert!((amp.im + (1e-3f64).sin()).abs() < 1e-15 * 1e-3);
    }

    #[test]
    fn rotating_frame_reduces_to_static_when_frequencies_vanish() {
        let g = families::cycle(4);
        let rot = crate::generators::rotating_frame_generator(&g, &[0.0; 4]).unwrap();
        let stat = ctqw_generator(&g, &[0.0; 4]).unwrap();
        let times = [0.1, 0.7, 1.3];
        let a = propagate(&rot, &times, 1e-12).unwrap();
        let b = propagate(&stat, &times, 1e-12).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!((x - y).iter().all(|z| z.norm() < 1e-10));
        }
        assert!(a.estimated_error.iter().all(|&e| e <= 1e-12));
    }

    #[test]
    fn rejects_bad_grids() {
        let gen = ctrw_generator(&families::path(2)).unwrap();
        assert!(propagate(&gen, &[0.5, 0.1], DEFAULT_TOL).is_err());
        assert!(propagate(&gen, &[-0.1], DEFAULT_TOL).is_err());
        assert!(propagate(&gen, &[0.1], 0.0).is_err());
    }
}
