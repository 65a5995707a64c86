//! Removing hopping phases by a diagonal unitary change of basis.
//!
//! A Hermitian `H` is gauge-equivalent to its entrywise modulus `R` exactly
//! when every cycle of its support graph carries total phase 1. The
//! construction fixes `lambda = 1` at a root of each component, propagates
//! along a BFS spanning tree and then checks the remaining edges.

use std::collections::VecDeque;

use serde::{Serialize, Serializer};

use crate::linalg::{check_capacity, check_finite, hs_norm};
use crate::{CMatrix, Error, Result, C64};

pub const DEFAULT_GAUGE_TOL: f64 = 1e-9;

const HERMITIAN_TOL: f64 = 1e-12;

/// Closed vertex sequence `c_0, c_1, ..., c_k = c_0` and the product of
/// transition phases `H_{c_(i+1) c_i} / |H_{c_(i+1) c_i}|` along it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessCycle {
    pub vertices: Vec<usize>,
    #[serde(serialize_with = "serialize_complex")]
    pub phase: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaugeResult {
    pub trivializable: bool,
    /// Diagonal of `Lambda` with `Lambda^† H Lambda = R`.
    #[serde(serialize_with = "serialize_complex_vec")]
    pub lambda: Option<Vec<C64>>,
    pub witness_cycle: Option<WitnessCycle>,
}

fn serialize_complex<S: Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

fn serialize_complex_vec<S: Serializer>(v: &Option<Vec<C64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.as_ref()
        .map(|v| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
        .serialize(s)
}

/// Phase of the transition `a -> b`.
fn link_phase(h: &CMatrix, a: usize, b: usize) -> C64 {
    let x = h[(b, a)];
    x / x.norm()
}

/// Product of transition phases around a closed vertex sequence.
pub fn cycle_phase(h: &CMatrix, cycle: &[usize]) -> C64 {
    cycle.windows(2).map(|w| link_phase(h, w[0], w[1])).product()
}

/// `Lambda^† H Lambda`.
pub fn apply_gauge(h: &CMatrix, lambda: &[C64]) -> CMatrix {
    CMatrix::from_fn(h.nrows(), h.ncols(), |r, c| lambda[r].conj() * h[(r, c)] * lambda[c])
}

pub fn gauge_trivialize(h: &CMatrix, tol: f64) -> Result<GaugeResult> {
    gauge_trivialize_rooted(h, tol, 0)
}

/// Same as [`gauge_trivialize`] with the spanning tree of the component
/// containing `root` grown from `root`; other components use their smallest
/// vertex.
pub fn gauge_trivialize_rooted(h: &CMatrix, tol: f64, root: usize) -> Result<GaugeResult> {
    check_hermitian(h)?;
    if !(tol > 0.0) {
        return Err(Error::domain("gauge tolerance must be positive"));
    }
    let n = h.nrows();
    if n > 0 && root >= n {
        return Err(Error::domain(format!("root {root} out of range (n = {n})")));
    }
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|a| (0..n).filter(|&b| b != a && h[(b, a)] != C64::new(0.0, 0.0)).collect())
        .collect();

    let mut lambda = vec![C64::new(0.0, 0.0); n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut depth = vec![0usize; n];
    let mut seen = vec![false; n];
    let roots = std::iter::once(root).chain(0..n).filter(|&r| r < n);
    for r in roots {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        lambda[r] = C64::new(1.0, 0.0);
        let mut queue = VecDeque::from([r]);
        while let Some(a) = queue.pop_front() {
            for &b in &neighbours[a] {
                if !seen[b] {
                    seen[b] = true;
                    parent[b] = Some(a);
                    depth[b] = depth[a] + 1;
                    lambda[b] = lambda[a] * link_phase(h, a, b);
                    queue.push_back(b);
                }
            }
        }
    }

    for a in 0..n {
        for &b in neighbours[a].iter().filter(|&&b| b > a) {
            if parent[b] == Some(a) || parent[a] == Some(b) {
                continue;
            }
            let residual = lambda[b].conj() * link_phase(h, a, b) * lambda[a];
            if (residual - 1.0).norm() > tol {
                let vertices = fundamental_cycle(&parent, &depth, a, b);
                let phase = cycle_phase(h, &vertices);
                return Ok(GaugeResult {
                    trivializable: false,
                    lambda: None,
                    witness_cycle: Some(WitnessCycle { vertices, phase }),
                });
            }
        }
    }
    Ok(GaugeResult {
        trivializable: true,
        lambda: Some(lambda),
        witness_cycle: None,
    })
}

/// Cycle `a -> b`, then up the tree from `b` to the common ancestor and down
/// to `a`.
fn fundamental_cycle(parent: &[Option<usize>], depth: &[usize], a: usize, b: usize) -> Vec<usize> {
    let (mut x, mut y) = (a, b);
    let mut from_a = vec![a];
    let mut from_b = vec![b];
    while depth[x] > depth[y] {
        x = parent[x].expect("non-root has a parent");
        from_a.push(x);
    }
    while depth[y] > depth[x] {
        y = parent[y].expect("non-root has a parent");
        from_b.push(y);
    }
    while x != y {
        x = parent[x].expect("non-root has a parent");
        y = parent[y].expect("non-root has a parent");
        from_a.push(x);
        from_b.push(y);
    }
    // from_b ends at the ancestor, from_a reversed starts there.
    from_a.pop();
    let mut cycle = vec![a];
    cycle.extend(from_b);
    cycle.extend(from_a.into_iter().rev());
    cycle
}

fn check_hermitian(h: &CMatrix) -> Result<()> {
    if !h.is_square() {
        return Err(Error::domain(format!("expected a square matrix, got {}x{}", h.nrows(), h.ncols())));
    }
    check_capacity(h.nrows())?;
    check_finite(h)?;
    let defect = hs_norm(&(h - h.adjoint()));
    if defect > HERMITIAN_TOL * hs_norm(h).max(1.0) {
        return Err(Error::domain(format!("matrix is not Hermitian (defect {defect:.3e})")));
    }
    Ok(())
}
