//! Vietoris–Rips filtrations of weighted daily graphs and their exact Betti curves.
//!
//! A graph's dissimilarities are its edge weights; non-adjacent pairs are at
//! infinite distance, so a simplex exists iff its vertices form a clique.
//! One persistence pass per graph yields barcodes, and each Betti curve is
//! read off the barcode as a right-continuous step function on `[0, L]`.

mod curve;
mod filtration;
mod reduction;

pub use curve::BettiCurve;
pub use filtration::{build_filtration, Filtration, Simplex};
pub use reduction::{barcodes, betti_curves, PersistenceInterval};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::DailyGraph;

/// Highest homology dimension supported.
pub const MAX_HOMOLOGY_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiltrationSpec {
    /// Betti curves are produced for dimensions `0..=max_homology_dim`;
    /// simplices are enumerated one dimension higher.
    pub max_homology_dim: usize,
    /// Right end `L` of the scale domain.
    pub scale_cap: f64,
}

impl Default for FiltrationSpec {
    fn default() -> Self {
        Self {
            max_homology_dim: 2,
            scale_cap: 1.0,
        }
    }
}

impl FiltrationSpec {
    pub fn new(max_homology_dim: usize, scale_cap: f64) -> Result<Self> {
        let spec = Self {
            max_homology_dim,
            scale_cap,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_homology_dim > MAX_HOMOLOGY_DIM {
            return Err(Error::domain(format!(
                "max homology dimension {} exceeds {MAX_HOMOLOGY_DIM}",
                self.max_homology_dim
            )));
        }
        if !(self.scale_cap.is_finite() && self.scale_cap > 0.0) {
            return Err(Error::domain(format!("bad scale cap {}", self.scale_cap)));
        }
        Ok(())
    }
}

/// Betti curves `B_0..B_d` of one daily graph.
pub fn graph_betti_curves(g: &DailyGraph, spec: &FiltrationSpec) -> Result<Vec<BettiCurve>> {
    spec.validate()?;
    if let Some(w) = g
        .edges
        .values()
        .map(|e| e.weight)
        .find(|w| *w > spec.scale_cap)
    {
        return Err(Error::domain(format!(
            "edge weight {w} exceeds scale cap {}",
            spec.scale_cap
        )));
    }
    let complex = build_filtration(g, spec);
    Ok(betti_curves(&complex, spec))
}
