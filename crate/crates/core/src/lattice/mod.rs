//! Lattice-Boltzmann BGK core: velocity sets, field storage and the
//! collide/stream kernel.

mod field;
mod grid;
pub mod kernel;
mod model;

pub use field::LatticeField;
pub use grid::{Dims, Region};
pub use kernel::{
    cell_moments, collide, collide_cell, equilibrium, equilibrium_into, moments, stream,
    FluidParams, MAX_BOUNDARY_SPEED,
};
pub use model::{Lattice, LatticeModel, CS2, D2Q9, D3Q19, MAX_Q};
