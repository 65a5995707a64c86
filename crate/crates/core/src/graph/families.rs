//! Small named graphs used by examples and tests, plus seeded random graphs.

use rand::seq::SliceRandom;
use rand::Rng;

use super::Graph;

/// Path `0 - 1 - ... - (n-1)`.
pub fn path(n: usize) -> Graph {
    Graph::from_edges(n, false, (1..n).map(|v| (v - 1, v))).expect("valid path")
}

/// Cycle `0 - 1 - ... - (n-1) - 0`, `n >= 3`.
pub fn cycle(n: usize) -> Graph {
    assert!(n >= 3, "cycle needs at least 3 vertices");
    Graph::from_edges(n, false, (0..n).map(|v| (v, (v + 1) % n))).expect("valid cycle")
}

/// Star with center 0 and leaves `1..=leaves`.
pub fn star(leaves: usize) -> Graph {
    Graph::from_edges(leaves + 1, false, (1..=leaves).map(|v| (0, v))).expect("valid star")
}

pub fn complete(n: usize) -> Graph {
    let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
    Graph::from_edges(n, false, edges).expect("valid complete graph")
}

/// First `n` vertices of a heap-ordered binary tree: the parent of `v > 0` is
/// `(v - 1) / 2`.
pub fn heap_tree(n: usize) -> Graph {
    Graph::from_edges(n, false, (1..n).map(|v| ((v - 1) / 2, v))).expect("valid tree")
}

/// Complete binary tree of the given depth (root at depth 0), heap-ordered.
pub fn binary_tree(depth: u32) -> Graph {
    heap_tree((1usize << (depth + 1)) - 1)
}

/// Square `0 - a - 1 - b - 0` with the chord `a - b`, where `a = 2` and `b = 3`.
///
/// Vertices 0 and 1 are at distance 2 with two shortest paths, and the chord
/// closes two triangles, so hopping phases can cancel the distance-2
/// amplitude without cancelling the distance-3 one.
pub fn diamond_with_chord() -> Graph {
    const A: usize = 2;
    const B: usize = 3;
    Graph::from_edges(4, false, [(0, A), (0, B), (A, 1), (B, 1), (A, B)]).expect("valid diamond")
}

/// Uniform random recursive tree on `n` vertices with shuffled labels.
pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Graph {
    let labels = shuffled_labels(n, rng);
    let mut g = Graph::new(n, false);
    for v in 1..n {
        let parent = rng.random_range(0..v);
        g.add_edge(labels[parent], labels[v]).expect("tree edge");
    }
    g
}

/// Random connected graph: a random tree plus every other vertex pair
/// independently with probability `extra`.
pub fn random_connected<R: Rng + ?Sized>(n: usize, extra: f64, rng: &mut R) -> Graph {
    let mut g = random_tree(n, rng);
    for u in 0..n {
        for v in u + 1..n {
            if !g.has_edge(u, v) && rng.random_bool(extra) {
                g.add_edge(u, v).expect("fresh edge");
            }
        }
    }
    g
}

/// Random connected graph that is guaranteed to contain a cycle (`n >= 3`).
pub fn random_cyclic<R: Rng + ?Sized>(n: usize, extra: f64, rng: &mut R) -> Graph {
    assert!(n >= 3, "a simple cycle needs at least 3 vertices");
    loop {
        let g = random_connected(n, extra, rng);
        if g.undirected_edges().count() >= n {
            return g;
        }
    }
}

fn shuffled_labels<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).collect();
    labels.shuffle(rng);
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sizes() {
        assert_eq!(binary_tree(3).n(), 15);
        assert_eq!(binary_tree(3).undirected_edges().count(), 14);
        assert_eq!(cycle(5).undirected_edges().count(), 5);
        assert_eq!(complete(4).undirected_edges().count(), 6);
        assert_eq!(diamond_with_chord().undirected_edges().count(), 5);
    }

    #[test]
    fn random_graphs_are_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..12 {
            let t = random_tree(n, &mut rng);
            assert!(t.is_connected());
            assert_eq!(t.undirected_edges().count(), n.saturating_sub(1));
            assert!(random_connected(n, 0.3, &mut rng).is_connected());
        }
        let c = random_cyclic(6, 0.1, &mut rng);
        assert!(c.undirected_edges().count() >= 6);
    }
}
