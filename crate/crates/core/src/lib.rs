//! Topological descriptors of token transaction graphs.
//!
//! Daily transaction graphs are turned into Vietoris–Rips filtrations whose
//! exact Betti curves are ranked with a functional depth. The resulting
//! rolling depths feed random forest forecasts of price shocks and a
//! pairwise cointegration analysis.
//!
//! Interchangeable strategies (depth measures, cointegration tests) are
//! trait objects looked up by name through [`registry::Registry`].

pub mod cointegration;
pub mod depth;
pub mod error;
pub mod features;
pub mod forecast;
pub mod homology;
pub mod ingest;
pub mod pipeline;
pub mod registry;
pub mod synth;

pub use error::{Error, Result};
