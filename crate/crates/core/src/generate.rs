//! Seeded synthetic graphs: paths, stars, cliques, G(n, p) and planted
//! block communities. All generators return undirected graphs with unit
//! weights and no self-loops.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::matrix::{permute_symmetric, Graph, Permutation, SparseCsr};

pub fn path(n: usize) -> Graph {
    let edges: Vec<(usize, usize)> = (1..n).map(|v| (v - 1, v)).collect();
    Graph::from_edges(n, &edges, true).expect("path edges in range")
}

/// Vertex 0 joined to every other vertex.
pub fn star(n: usize) -> Graph {
    let edges: Vec<(usize, usize)> = (1..n).map(|v| (0, v)).collect();
    Graph::from_edges(n, &edges, true).expect("star edges in range")
}

pub fn clique(n: usize) -> Graph {
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v));
        }
    }
    Graph::from_edges(n, &edges, true).expect("clique edges in range")
}

/// Erdos-Renyi graph: every pair joined independently with probability `p`.
pub fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges, true).expect("gnp edges in range")
}

/// `communities` blocks of `size` consecutive vertices; pairs inside a block
/// are joined with probability `p_in`, pairs across blocks with `p_out`.
pub fn block_community(communities: usize, size: usize, p_in: f64, p_out: f64, seed: u64) -> Graph {
    let n = communities * size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if u / size == v / size { p_in } else { p_out };
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges, true).expect("block edges in range")
}

/// A uniformly random relabeling of `g`, with the permutation used.
pub fn scramble(g: &Graph, seed: u64) -> Result<(Graph, Permutation)> {
    let mut order: Vec<usize> = (0..g.num_vertices()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let perm = Permutation::new(order)?;
    let adjacency = permute_symmetric(g.adjacency(), &perm)?;
    Ok((Graph::new(adjacency, g.is_undirected())?, perm))
}

/// A random square matrix with roughly `density * n * n` entries drawn
/// uniformly from `[-1, 1)`.
pub fn random_sparse(n: usize, density: f64, seed: u64) -> SparseCsr<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = ((n * n) as f64 * density).round() as usize;
    let mut t = Vec::with_capacity(target);
    for _ in 0..target {
        t.push((rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(-1.0..1.0)));
    }
    // drop repeated coordinates so values stay in [-1, 1)
    t.sort_by_key(|&(r, c, _)| (r, c));
    t.dedup_by_key(|&mut (r, c, _)| (r, c));
    SparseCsr::from_triplets(n, n, &t).expect("coordinates in range")
}
