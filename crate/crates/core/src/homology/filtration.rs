use std::cmp::Ordering;

use super::FiltrationSpec;
use crate::ingest::DailyGraph;

/// A simplex of dimension at most 3, vertices ascending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simplex {
    vertices: [u32; 4],
    len: u8,
    /// Largest pairwise dissimilarity among the vertices (0 for a vertex).
    pub value: f64,
}

impl Simplex {
    pub fn vertices(&self) -> &[u32] {
        &self.vertices[..self.len as usize]
    }

    pub fn dim(&self) -> usize {
        self.len as usize - 1
    }

    pub(crate) fn key(&self) -> ([u32; 4], u8) {
        (self.vertices, self.len)
    }

    /// Keys of the codimension-one faces.
    pub(crate) fn facet_keys(&self) -> impl Iterator<Item = ([u32; 4], u8)> + '_ {
        let n = self.len as usize;
        (0..n).filter(move |_| n > 1).map(move |skip| {
            let mut v = [u32::MAX; 4];
            let mut j = 0;
            for (i, x) in self.vertices[..n].iter().enumerate() {
                if i != skip {
                    v[j] = *x;
                    j += 1;
                }
            }
            (v, self.len - 1)
        })
    }
}

/// Simplices in filtration order: by value, then dimension, then vertex list.
#[derive(Debug, Clone, Default)]
pub struct Filtration {
    pub n_vertices: usize,
    pub simplices: Vec<Simplex>,
}

impl Filtration {
    /// Flag filtration of a graph on vertices `0..n` with the given weighted
    /// edges, enumerating simplices up to `max_simplex_dim`.
    pub fn from_edges(n: usize, edges: &[(u32, u32, f64)], max_simplex_dim: usize) -> Self {
        // forward adjacency: neighbours with a larger index, ascending
        let mut fwd: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            assert!(a != b, "self-loop in filtration input");
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            fwd[lo as usize].push((hi, w));
        }
        for list in &mut fwd {
            list.sort_by_key(|(v, _)| *v);
            list.dedup_by_key(|(v, _)| *v);
        }

        let mut simplices: Vec<Simplex> = (0..n as u32)
            .map(|v| Simplex {
                vertices: [v, u32::MAX, u32::MAX, u32::MAX],
                len: 1,
                value: 0.0,
            })
            .collect();
        if max_simplex_dim >= 1 {
            for v in 0..n {
                let base = Simplex {
                    vertices: [v as u32, u32::MAX, u32::MAX, u32::MAX],
                    len: 1,
                    value: 0.0,
                };
                expand(&fwd, base, &fwd[v], max_simplex_dim.min(3), &mut simplices);
            }
        }
        simplices.sort_by(filtration_order);
        Self {
            n_vertices: n,
            simplices,
        }
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }
}

/// Clique expansion: `candidates` are the common forward neighbours of every
/// vertex in `base`, each paired with its largest weight to `base`.
fn expand(
    fwd: &[Vec<(u32, f64)>],
    base: Simplex,
    candidates: &[(u32, f64)],
    max_dim: usize,
    out: &mut Vec<Simplex>,
) {
    for (i, &(v, w)) in candidates.iter().enumerate() {
        let mut s = base;
        s.vertices[s.len as usize] = v;
        s.len += 1;
        s.value = base.value.max(w);
        out.push(s);
        if s.dim() < max_dim {
            let next = intersect(&candidates[i + 1..], &fwd[v as usize]);
            if !next.is_empty() {
                expand(fwd, s, &next, max_dim, out);
            }
        }
    }
}

fn intersect(a: &[(u32, f64)], b: &[(u32, f64)]) -> Vec<(u32, f64)> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                out.push((a[i].0, a[i].1.max(b[j].1)));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn filtration_order(a: &Simplex, b: &Simplex) -> Ordering {
    a.value
        .total_cmp(&b.value)
        .then(a.len.cmp(&b.len))
        .then_with(|| a.vertices().cmp(b.vertices()))
}

/// Vietoris–Rips filtration of a daily graph. Vertices are indexed by
/// ascending address.
pub fn build_filtration(g: &DailyGraph, spec: &FiltrationSpec) -> Filtration {
    let index: std::collections::BTreeMap<&str, u32> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i as u32))
        .collect();
    let edges: Vec<(u32, u32, f64)> = g
        .edges
        .iter()
        .map(|((a, b), e)| (index[a.as_str()], index[b.as_str()], e.weight))
        .collect();
    Filtration::from_edges(g.nodes.len(), &edges, spec.max_homology_dim + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(f: &Filtration) -> Vec<(Vec<u32>, f64)> {
        f.simplices
            .iter()
            .map(|s| (s.vertices().to_vec(), s.value))
            .collect()
    }

    #[test]
    fn single_edge() {
        let f = Filtration::from_edges(2, &[(0, 1, 0.4)], 3);
        assert_eq!(
            summary(&f),
            vec![(vec![0], 0.0), (vec![1], 0.0), (vec![0, 1], 0.4)]
        );
    }

    #[test]
    fn triangle_enters_at_max_edge() {
        let f = Filtration::from_edges(3, &[(0, 1, 0.2), (1, 2, 0.3), (0, 2, 0.5)], 3);
        let tri = f.simplices.iter().find(|s| s.dim() == 2).unwrap();
        assert_eq!(tri.value, 0.5);
        assert_eq!(f.simplices.last().unwrap().dim(), 2);
        assert_eq!(f.len(), 7);
    }

    #[test]
    fn four_cycle_has_no_triangles() {
        let f = Filtration::from_edges(4, &[(0, 1, 0.5), (1, 2, 0.5), (2, 3, 0.5), (0, 3, 0.5)], 3);
        assert!(f.simplices.iter().all(|s| s.dim() <= 1));
    }

    #[test]
    fn k4_counts_and_dimension_cap() {
        let edges: Vec<_> = (0..4u32)
            .flat_map(|a| (a + 1..4).map(move |b| (a, b, 0.1 * (a + b) as f64)))
            .collect();
        let full = Filtration::from_edges(4, &edges, 3);
        assert_eq!(full.len(), 4 + 6 + 4 + 1);
        let capped = Filtration::from_edges(4, &edges, 2);
        assert_eq!(capped.len(), 14);
        // faces precede cofaces
        for (i, s) in full.simplices.iter().enumerate() {
            for (j, t) in full.simplices.iter().enumerate() {
                if t.len > s.len && s.vertices().iter().all(|v| t.vertices().contains(v)) {
                    assert!(i < j);
                }
            }
        }
    }
}
