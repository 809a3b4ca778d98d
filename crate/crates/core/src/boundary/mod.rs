//! Cell tags and the wall, moving-wall, inlet and outlet treatments.

mod flags;
mod links;
mod ops;

pub use flags::{CellFlags, CellType, FlagViolation, DEFAULT_INTERFACE_FILL};
pub use links::BoundarySet;
pub use ops::{
    apply_inlet, apply_outlet, bounce_back, moving_wall_bounce_back, validate_boundary_speed,
};
