//! Wave propagation in discrete mass-spring lattices: dispersion, resonances,
//! localized primitive waveforms and time-domain simulation.

pub mod analysis;
pub mod dispersion;
pub mod error;
pub mod lattice;
pub mod lpw;
pub mod oracle;
pub mod transient;

pub use dispersion::{
    band_edges, beaming_directions, branch_range, equifrequency_contour, group_velocity, group_velocity_field,
    omega, resonance_catalog, AngleFrame, Branch, ContourSet, DispersionSample, GroupVelocity, ResonanceEntry,
    ResonanceKind,
};
pub use error::{LatticeError, Result};
pub use lattice::{Boundary, FieldState, Family, LatticeSpec, NodeIndex, Sublattice, WaveVector, Window};
pub use lpw::{construct_lpw, lpw_time_evolution_check, verify_lpw, LpwMode, LpwPattern};
pub use transient::{simulate, step, ProbeRecord, SimConfig, SimOutput, Snapshot, SourceKind, SourceSpec, WindowSpec};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
