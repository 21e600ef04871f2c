use std::collections::HashMap;

use super::{BettiCurve, Filtration, FiltrationSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceInterval {
    pub dim: usize,
    pub birth: f64,
    /// `None` for classes that never die.
    pub death: Option<f64>,
}

/// Adds `src` into `dst` over the two-element field (symmetric difference of
/// sorted index lists).
fn add_column(dst: &mut Vec<usize>, src: &[usize], scratch: &mut Vec<usize>) {
    scratch.clear();
    let (mut i, mut j) = (0, 0);
    while i < dst.len() && j < src.len() {
        match dst[i].cmp(&src[j]) {
            std::cmp::Ordering::Less => {
                scratch.push(dst[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                scratch.push(src[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    scratch.extend_from_slice(&dst[i..]);
    scratch.extend_from_slice(&src[j..]);
    std::mem::swap(dst, scratch);
}

/// Persistence barcodes for dimensions `0..=max_dim` via standard column
/// reduction, processed from the top dimension down so that columns already
/// known to be births can be skipped.
pub fn barcodes(complex: &Filtration, max_dim: usize) -> Vec<PersistenceInterval> {
    let simplices = &complex.simplices;
    let index: HashMap<([u32; 4], u8), usize> = simplices
        .iter()
        .enumerate()
        .filter(|(_, s)| s.dim() <= max_dim)
        .map(|(i, s)| (s.key(), i))
        .collect();

    // pivot_owner[row] = column whose lowest entry is `row`
    let mut pivot_owner: Vec<Option<usize>> = vec![None; simplices.len()];
    let mut reduced: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut is_birth = vec![false; simplices.len()];
    let mut scratch = Vec::new();

    for dim in (1..=max_dim + 1).rev() {
        for (j, s) in simplices.iter().enumerate() {
            if s.dim() != dim || is_birth[j] {
                continue;
            }
            let mut col: Vec<usize> = s.facet_keys().map(|k| index[&k]).collect();
            col.sort_unstable();
            while let Some(&low) = col.last() {
                match pivot_owner[low] {
                    Some(other) => add_column(&mut col, &reduced[&other], &mut scratch),
                    None => break,
                }
            }
            if let Some(&low) = col.last() {
                pivot_owner[low] = Some(j);
                is_birth[low] = true;
                reduced.insert(j, col);
            }
        }
    }

    let mut out = Vec::new();
    for (i, s) in simplices.iter().enumerate() {
        if s.dim() > max_dim {
            continue;
        }
        let killed = reduced.contains_key(&i);
        if killed {
            // negative column: kills a class of dimension dim - 1
            continue;
        }
        let death = pivot_owner[i].map(|j| simplices[j].value);
        out.push(PersistenceInterval {
            dim: s.dim(),
            birth: s.value,
            death,
        });
    }
    out
}

/// Betti curves `B_0..B_d` read off one persistence pass.
pub fn betti_curves(complex: &Filtration, spec: &FiltrationSpec) -> Vec<BettiCurve> {
    let bars = barcodes(complex, spec.max_homology_dim);
    (0..=spec.max_homology_dim)
        .map(|p| {
            BettiCurve::from_intervals(
                p,
                bars.iter()
                    .filter(|b| b.dim == p)
                    .map(|b| (b.birth, b.death)),
                spec.scale_cap,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curves(n: usize, edges: &[(u32, u32, f64)]) -> Vec<BettiCurve> {
        let f = Filtration::from_edges(n, edges, 3);
        betti_curves(&f, &FiltrationSpec::default())
    }

    #[test]
    fn isolated_nodes() {
        let c = curves(5, &[]);
        assert_eq!(c[0], BettiCurve::constant(0, 5, 1.0));
        assert_eq!(c[1], BettiCurve::constant(1, 0, 1.0));
        assert_eq!(c[2], BettiCurve::constant(2, 0, 1.0));
    }

    #[test]
    fn empty_graph() {
        let c = curves(0, &[]);
        assert!(c.iter().all(|c| c.values() == [0]));
    }

    #[test]
    fn four_cycle() {
        let c = curves(4, &[(0, 1, 0.5), (1, 2, 0.5), (2, 3, 0.5), (0, 3, 0.5)]);
        assert_eq!(c[0].breakpoints(), &[0.0, 0.5]);
        assert_eq!(c[0].values(), &[4, 1]);
        assert_eq!(c[1].breakpoints(), &[0.0, 0.5]);
        assert_eq!(c[1].values(), &[0, 1]);
        assert_eq!(c[2].values(), &[0]);
    }

    #[test]
    fn octahedron_void() {
        // K_{2,2,2}: antipodal pairs (0,1), (2,3), (4,5) absent
        let mut edges = Vec::new();
        for a in 0..6u32 {
            for b in a + 1..6 {
                if a / 2 != b / 2 {
                    edges.push((a, b, 0.5));
                }
            }
        }
        let c = curves(6, &edges);
        assert_eq!(c[0].values(), &[6, 1]);
        assert_eq!(c[1].values(), &[0]);
        assert_eq!(c[2].breakpoints(), &[0.0, 0.5]);
        assert_eq!(c[2].values(), &[0, 1]);
    }

    #[test]
    fn loop_filled_later() {
        // square closes at 0.4, diagonal at 0.7 fills it with two triangles
        let c = curves(
            4,
            &[
                (0, 1, 0.1),
                (1, 2, 0.2),
                (2, 3, 0.3),
                (0, 3, 0.4),
                (0, 2, 0.7),
            ],
        );
        assert_eq!(c[1].breakpoints(), &[0.0, 0.4, 0.7]);
        assert_eq!(c[1].values(), &[0, 1, 0]);
    }
}
