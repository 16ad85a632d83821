//! Non-neural core for symmetry-aware point-cloud generation and evaluation:
//! reflection/rotation algebra, finite symmetry-group generation and
//! fundamental-domain extraction, mean-shift symmetry detection in a
//! reflection metric space, annealed Langevin sampling driven by an empirical
//! kernel score, DDPM forward/reverse machinery, part assembly transforms,
//! and shape metrics (Chamfer, EMD, SDI, 1-NNA).
//!
//! All operations are pure given an explicit seeded RNG; every type is
//! immutable after construction and safe to share across threads.

pub mod assembly;
pub mod ddpm;
pub mod detect;
mod error;
pub mod geom;
pub mod metrics;
pub mod sampler;
pub mod symgroup;

pub use error::{Error, Result};
