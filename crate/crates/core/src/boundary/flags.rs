use crate::error::SimError;
use crate::lattice::{Dims, LatticeModel};

/// Per-cell type tag. The discriminants are the flag bytes used on the wire
/// and in frame dumps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum CellType {
    Gas = 0,
    Fluid = 1,
    Interface = 2,
    Wall = 3,
    Inlet = 4,
    Outlet = 5,
}

impl CellType {
    pub fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            0 => CellType::Gas,
            1 => CellType::Fluid,
            2 => CellType::Interface,
            3 => CellType::Wall,
            4 => CellType::Inlet,
            5 => CellType::Outlet,
            _ => return None,
        })
    }

    /// Cells that carry liquid and are collided.
    #[inline]
    pub fn is_liquid(self) -> bool {
        matches!(self, CellType::Fluid | CellType::Interface)
    }

    /// Cells whose populations may be streamed into a neighbour.
    #[inline]
    pub fn is_source(self) -> bool {
        matches!(
            self,
            CellType::Fluid | CellType::Interface | CellType::Inlet | CellType::Outlet
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            CellType::Gas => "gas",
            CellType::Fluid => "fluid",
            CellType::Interface => "interface",
            CellType::Wall => "wall",
            CellType::Inlet => "inlet",
            CellType::Outlet => "outlet",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            CellType::Gas,
            CellType::Fluid,
            CellType::Interface,
            CellType::Wall,
            CellType::Inlet,
            CellType::Outlet,
        ]
        .into_iter()
        .find(|t| t.name() == s)
    }

    /// Fill fraction implied by the type; `None` for Interface.
    pub fn implied_fill(self) -> Option<f64> {
        match self {
            CellType::Fluid | CellType::Inlet | CellType::Outlet => Some(1.0),
            CellType::Gas | CellType::Wall => Some(0.0),
            CellType::Interface => None,
        }
    }
}

/// Default fill of Interface cells created without an explicit fraction.
pub const DEFAULT_INTERFACE_FILL: f64 = 0.5;

/// A broken `CellFlags` invariant found by [`CellFlags::violations`].
#[derive(Clone, Debug, PartialEq)]
pub enum FlagViolation {
    FillOutOfRange { cell: usize, fill: f64 },
    FluidTouchesGas { fluid: usize, gas: usize },
    OpenBoundaryInside { cell: usize },
}

/// The mutable boundary-condition state: one type tag and fill fraction per
/// cell, plus wall and inlet velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFlags {
    dims: Dims,
    kind: Vec<CellType>,
    fill: Vec<f64>,
    wall_velocity: Vec<[f64; 3]>,
    inlet_velocity: Vec<[f64; 3]>,
}

impl CellFlags {
    pub fn new(dims: Dims, background: CellType) -> Self {
        let n = dims.cells();
        CellFlags {
            dims,
            kind: vec![background; n],
            fill: vec![background.implied_fill().unwrap_or(DEFAULT_INTERFACE_FILL); n],
            wall_velocity: vec![[0.0; 3]; n],
            inlet_velocity: vec![[0.0; 3]; n],
        }
    }

    /// Builds flags from raw flag bytes and fill fractions (the GEOMETRY
    /// payload). Fill is only honoured for Interface cells.
    pub fn from_raw(dims: Dims, bytes: &[u8], fill: &[f32]) -> Result<Self, SimError> {
        let n = dims.cells();
        if n == 0 {
            return Err(SimError::Config("grid has zero cells".into()));
        }
        if bytes.len() != n || fill.len() != n {
            return Err(SimError::Config(format!(
                "expected {n} flag bytes and fill values, got {} and {}",
                bytes.len(),
                fill.len()
            )));
        }
        let mut flags = CellFlags::new(dims, CellType::Gas);
        for (cell, (&b, &f)) in bytes.iter().zip(fill).enumerate() {
            let t = CellType::from_u8(b).ok_or_else(|| {
                SimError::Config(format!("unknown flag byte {b} at cell {cell}"))
            })?;
            flags.set(cell, t, Some(f as f64));
        }
        Ok(flags)
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn kind(&self, cell: usize) -> CellType {
        self.kind[cell]
    }

    #[inline]
    pub fn kinds(&self) -> &[CellType] {
        &self.kind
    }

    #[inline]
    pub fn fill(&self, cell: usize) -> f64 {
        self.fill[cell]
    }

    pub fn fills(&self) -> &[f64] {
        &self.fill
    }

    pub fn wall_velocity(&self, cell: usize) -> [f64; 3] {
        self.wall_velocity[cell]
    }

    pub fn inlet_velocity(&self, cell: usize) -> [f64; 3] {
        self.inlet_velocity[cell]
    }

    /// Sets the type of a cell. Fill is forced by the type except for
    /// Interface cells, which take `fill` clamped to [0, 1] (default 0.5).
    pub fn set(&mut self, cell: usize, kind: CellType, fill: Option<f64>) {
        self.kind[cell] = kind;
        self.fill[cell] = match kind.implied_fill() {
            Some(f) => f,
            None => fill
                .filter(|f| f.is_finite())
                .unwrap_or(DEFAULT_INTERFACE_FILL)
                .clamp(0.0, 1.0),
        };
        if kind != CellType::Wall {
            self.wall_velocity[cell] = [0.0; 3];
        }
    }

    pub(crate) fn set_fill(&mut self, cell: usize, fill: f64) {
        self.fill[cell] = fill;
    }

    pub fn set_wall_velocity(&mut self, cell: usize, u: [f64; 3]) {
        self.wall_velocity[cell] = u;
    }

    pub fn set_inlet_velocity(&mut self, cell: usize, u: [f64; 3]) {
        self.inlet_velocity[cell] = u;
    }

    pub fn count(&self, kind: CellType) -> usize {
        self.kind.iter().filter(|&&k| k == kind).count()
    }

    pub fn has_free_surface(&self) -> bool {
        self.kind
            .iter()
            .any(|k| matches!(k, CellType::Gas | CellType::Interface))
    }

    /// Raw flag bytes in cell order.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.kind.iter().map(|&k| k as u8).collect()
    }

    /// Full-grid invariant scan.
    pub fn violations(&self, model: &LatticeModel) -> Vec<FlagViolation> {
        let mut out = Vec::new();
        for cell in 0..self.dims.cells() {
            let kind = self.kind[cell];
            let fill = self.fill[cell];
            let ok = match kind.implied_fill() {
                Some(f) => fill == f,
                None => (0.0..=1.0).contains(&fill),
            };
            if !ok {
                out.push(FlagViolation::FillOutOfRange { cell, fill });
            }
            if matches!(kind, CellType::Inlet | CellType::Outlet) && !self.dims.on_boundary(cell) {
                out.push(FlagViolation::OpenBoundaryInside { cell });
            }
            if kind == CellType::Fluid {
                for &c in &model.velocities[1..] {
                    let n = self.dims.neighbor(cell, c);
                    if self.kind[n] == CellType::Gas {
                        out.push(FlagViolation::FluidTouchesGas {
                            fluid: cell,
                            gas: n,
                        });
                    }
                }
            }
        }
        out
    }

    /// True if no Fluid cell is lattice-adjacent to a Gas cell.
    pub fn fluid_gas_separated(&self, model: &LatticeModel) -> bool {
        (0..self.dims.cells()).all(|cell| {
            self.kind[cell] != CellType::Fluid
                || model.velocities[1..]
                    .iter()
                    .all(|&c| self.kind[self.dims.neighbor(cell, c)] != CellType::Gas)
        })
    }

    /// Turns every Fluid cell touching Gas into an Interface cell with the
    /// default fill. Returns the repaired cells in row-major order.
    pub fn repair(&mut self, model: &LatticeModel) -> Vec<usize> {
        self.repair_cells(model, 0..self.dims.cells())
    }

    /// [`Self::repair`] restricted to the given candidate cells.
    pub fn repair_cells(
        &mut self,
        model: &LatticeModel,
        candidates: impl IntoIterator<Item = usize>,
    ) -> Vec<usize> {
        let mut repaired: Vec<usize> = candidates
            .into_iter()
            .filter(|&cell| {
                self.kind[cell] == CellType::Fluid
                    && model.velocities[1..]
                        .iter()
                        .any(|&c| self.kind[self.dims.neighbor(cell, c)] == CellType::Gas)
            })
            .collect();
        repaired.sort_unstable();
        repaired.dedup();
        for &cell in &repaired {
            self.set(cell, CellType::Interface, Some(DEFAULT_INTERFACE_FILL));
        }
        repaired
    }
}
