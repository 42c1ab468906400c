//! Overlapping Schwarz domain decomposition and Krylov iteration.

mod gmres;
mod oras;
mod partition;

pub use gmres::{gmres, GmresOptions, GmresOutcome};
pub use oras::{build_oras, OrasPreconditioner};
pub use partition::{partition, Partition, Subdomain};
