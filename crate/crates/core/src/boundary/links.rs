use std::collections::{BTreeMap, BTreeSet};

use super::{CellFlags, CellType};
use crate::lattice::LatticeModel;

/// Link lists derived from the flag grid.
///
/// `wall` maps every non-Wall cell with at least one Wall neighbour to a
/// bit mask of the directions `i` whose upstream cell `x - c_i` is a Wall.
/// The lists depend only on Wall/Inlet/Outlet tags, so free-surface
/// conversions never invalidate them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundarySet {
    wall: BTreeMap<usize, u32>,
    inlets: BTreeSet<usize>,
    outlets: BTreeMap<usize, Option<usize>>,
}

impl BoundarySet {
    pub fn build(flags: &CellFlags, model: &LatticeModel) -> Self {
        let mut set = BoundarySet::default();
        for cell in 0..flags.dims().cells() {
            set.refresh_wall_mask(flags, model, cell);
            match flags.kind(cell) {
                CellType::Inlet => {
                    set.inlets.insert(cell);
                }
                CellType::Outlet => {
                    set.outlets.insert(cell, None);
                }
                _ => {}
            }
        }
        set.refresh_outlet_sources(flags);
        set
    }

    /// Incremental maintenance after the flag of `cell` changed.
    pub fn update_cell(&mut self, flags: &CellFlags, model: &LatticeModel, cell: usize) {
        let dims = flags.dims();
        self.refresh_wall_mask(flags, model, cell);
        for &c in &model.velocities[1..] {
            self.refresh_wall_mask(flags, model, dims.neighbor(cell, c));
        }
        self.inlets.remove(&cell);
        self.outlets.remove(&cell);
        match flags.kind(cell) {
            CellType::Inlet => {
                self.inlets.insert(cell);
            }
            CellType::Outlet => {
                self.outlets.insert(cell, None);
            }
            _ => {}
        }
        self.refresh_outlet_sources(flags);
    }

    fn refresh_wall_mask(&mut self, flags: &CellFlags, model: &LatticeModel, cell: usize) {
        let dims = flags.dims();
        let mut mask = 0u32;
        if flags.kind(cell) != CellType::Wall {
            for (i, c) in model.velocities.iter().enumerate().skip(1) {
                let src = dims.neighbor(cell, [-c[0], -c[1], -c[2]]);
                if flags.kind(src) == CellType::Wall {
                    mask |= 1 << i;
                }
            }
        }
        if mask == 0 {
            self.wall.remove(&cell);
        } else {
            self.wall.insert(cell, mask);
        }
    }

    fn refresh_outlet_sources(&mut self, flags: &CellFlags) {
        let dims = flags.dims();
        for (&outlet, source) in self.outlets.iter_mut() {
            *source = dims.boundary_normal(outlet).and_then(|n| {
                let inward = [-n[0], -n[1], -n[2]];
                let mut p = dims.offset(outlet, inward)?;
                while flags.kind(p) == CellType::Wall {
                    p = dims.offset(p, inward)?;
                }
                Some(p)
            });
        }
    }

    /// `(cell, direction mask)` for every wall-adjacent cell, row-major.
    pub fn wall_links(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.wall.iter().map(|(&c, &m)| (c, m))
    }

    pub fn wall_link_count(&self) -> usize {
        self.wall.values().map(|m| m.count_ones() as usize).sum()
    }

    pub fn inlets(&self) -> impl Iterator<Item = usize> + '_ {
        self.inlets.iter().copied()
    }

    /// `(outlet, source)` pairs; the source is the nearest non-Wall cell
    /// inward along the outlet normal.
    pub fn outlets(&self) -> impl Iterator<Item = (usize, Option<usize>)> + '_ {
        self.outlets.iter().map(|(&o, &s)| (o, s))
    }
}
