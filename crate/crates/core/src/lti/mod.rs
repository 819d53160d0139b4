//! Linear time-invariant building blocks: rational transfer functions,
//! state-space realizations and the frequency-domain checks used to decide
//! whether a feedback loop has approximately-finite memory.

mod checks;
pub mod poly;
mod realization;
mod tf;

pub use checks::{
    check_circle_condition, check_positive_real, default_grid, impulse_l1_norm, log_grid,
    CircleReport, PositiveRealReport, SectorBounds,
};
pub use realization::StateSpace;
pub use tf::RationalTF;
