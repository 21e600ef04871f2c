//! Brute-force oracles shared by the integration suites. Nothing here calls
//! into the production filtration, reduction or depth code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokencurves::homology::BettiCurve;

/// Symmetric weight matrix; `None` marks a missing edge.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    pub n: usize,
    pub w: Vec<Vec<Option<f64>>>,
}

impl WeightedGraph {
    pub fn edges(&self) -> Vec<(u32, u32, f64)> {
        let mut out = Vec::new();
        for (a, row) in self.w.iter().enumerate() {
            for (b, x) in row.iter().enumerate().skip(a + 1) {
                if let Some(x) = x {
                    out.push((a as u32, b as u32, *x));
                }
            }
        }
        out
    }

    pub fn weights(&self) -> Vec<f64> {
        let mut ws: Vec<f64> = self.edges().iter().map(|e| e.2).collect();
        ws.sort_by(f64::total_cmp);
        ws.dedup();
        ws
    }

    /// Largest clique size (brute force).
    pub fn clique_number(&self) -> usize {
        subsets(self.n, self.n)
            .into_iter()
            .filter(|s| is_clique(self, s, f64::INFINITY))
            .map(|s| s.len())
            .max()
            .unwrap_or(0)
    }
}

#[allow(clippy::needless_range_loop)]
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> WeightedGraph {
    let mut w = vec![vec![None; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                // coarse grid so ties between weights occur
                let x = if rng.random_bool(0.3) {
                    0.1 + 0.1 * rng.random_range(0..10) as f64
                } else {
                    rng.random_range(0.1..=1.0)
                };
                w[a][b] = Some(x);
                w[b][a] = Some(x);
            }
        }
    }
    WeightedGraph { n, w }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All vertex subsets of `0..n` with 1..=max_size elements, ascending.
pub fn subsets(n: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for v in start..n {
            cur.push(v);
            out.push(cur.clone());
            if cur.len() < max {
                rec(v + 1, n, max, cur, out);
            }
            cur.pop();
        }
    }
    rec(0, n, max_size, &mut cur, &mut out);
    out
}

fn is_clique(g: &WeightedGraph, s: &[usize], eps: f64) -> bool {
    s.iter().enumerate().all(|(i, &a)| {
        s[i + 1..]
            .iter()
            .all(|&b| g.w[a][b].is_some_and(|x| x <= eps))
    })
}

/// Rank over the two-element field by Gaussian elimination on dense rows.
pub fn rank_gf2(mut rows: Vec<Vec<bool>>) -> usize {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][c]) else {
            continue;
        };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && rows[r][c] {
                let pivot = rows[rank].clone();
                for (x, y) in rows[r].iter_mut().zip(pivot) {
                    *x ^= y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Simplices of the Rips complex at scale `eps`, grouped by dimension
/// `0..=max_simplex_dim`.
pub fn rips_simplices(g: &WeightedGraph, eps: f64, max_simplex_dim: usize) -> Vec<Vec<Vec<usize>>> {
    let mut by_dim = vec![Vec::new(); max_simplex_dim + 1];
    for s in subsets(g.n, max_simplex_dim + 1) {
        if is_clique(g, &s, eps) {
            by_dim[s.len() - 1].push(s);
        }
    }
    by_dim
}

fn boundary_rank(faces: &[Vec<usize>], cofaces: &[Vec<usize>]) -> usize {
    if faces.is_empty() || cofaces.is_empty() {
        return 0;
    }
    let rows: Vec<Vec<bool>> = cofaces
        .iter()
        .map(|c| {
            faces
                .iter()
                .map(|f| f.iter().all(|v| c.contains(v)))
                .collect()
        })
        .collect();
    rank_gf2(rows)
}

/// Betti numbers `b_0..=b_max_dim` of the Rips complex at `eps` by rank-nullity.
pub fn oracle_betti(g: &WeightedGraph, eps: f64, max_dim: usize) -> Vec<usize> {
    let simplices = rips_simplices(g, eps, max_dim + 1);
    (0..=max_dim)
        .map(|p| {
            let cp = simplices[p].len();
            let rank_p = if p == 0 {
                0
            } else {
                boundary_rank(&simplices[p - 1], &simplices[p])
            };
            let rank_next = boundary_rank(&simplices[p], &simplices[p + 1]);
            cp - rank_p - rank_next
        })
        .collect()
}

/// Scales at which to compare curves: 0, every edge weight, midpoints
/// between consecutive weights and the right end.
pub fn probe_scales(g: &WeightedGraph) -> Vec<f64> {
    let ws = g.weights();
    let mut probes = vec![0.0, 1.0];
    probes.extend(ws.iter().copied());
    let mut prev = 0.0;
    for w in &ws {
        probes.push((prev + w) / 2.0);
        prev = *w;
    }
    probes.sort_by(f64::total_cmp);
    probes.dedup();
    probes
}

/// Modified band depth by a midpoint Riemann sum on a uniform mesh.
pub fn grid_mbd(subject: &BettiCurve, collection: &[&BettiCurve], mesh: f64) -> f64 {
    let cap = subject.scale_cap();
    let steps = (cap / mesh).round() as usize;
    let m = collection.len();
    let mut total = 0.0;
    for j in 0..steps {
        let x = (j as f64 + 0.5) * mesh;
        let y = subject.value_at(x);
        let vals: Vec<usize> = collection.iter().map(|c| c.value_at(x)).collect();
        let mut inside = 0usize;
        for a in 0..m {
            for b in a + 1..m {
                let (lo, hi) = (vals[a].min(vals[b]), vals[a].max(vals[b]));
                if lo <= y && y <= hi {
                    inside += 1;
                }
            }
        }
        total += inside as f64 * mesh;
    }
    total / ((m * (m - 1) / 2) as f64 * cap)
}

/// Random right-continuous step curve with up to `max_jumps` jumps.
pub fn random_step_curve(rng: &mut ChaCha8Rng, max_jumps: usize, max_value: usize) -> BettiCurve {
    let jumps = rng.random_range(0..=max_jumps);
    let mut bps: Vec<f64> = (0..jumps).map(|_| rng.random_range(0.001..0.999)).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let mut breakpoints = vec![0.0];
    breakpoints.extend(bps);
    let values = (0..breakpoints.len())
        .map(|_| rng.random_range(0..=max_value))
        .collect();
    BettiCurve::new(0, breakpoints, values, 1.0).unwrap()
}
