//! Grid and parameter mutations applied between iterations.

use std::collections::BTreeSet;

use crate::boundary::{validate_boundary_speed, CellType};
use crate::error::SimError;
use crate::lattice::{Region, MAX_Q};
use crate::Simulation;

/// One cell assignment. `fill` only matters for Interface cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellEdit {
    pub cell: usize,
    pub kind: CellType,
    pub fill: Option<f64>,
}

impl CellEdit {
    pub fn new(cell: usize, kind: CellType) -> Self {
        CellEdit {
            cell,
            kind,
            fill: None,
        }
    }

    /// Every cell of `region`, in row-major order.
    pub fn region(
        sim: &Simulation,
        region: Region,
        kind: CellType,
        fill: Option<f64>,
    ) -> Vec<CellEdit> {
        region
            .cells(sim.dims())
            .map(|cell| CellEdit { cell, kind, fill })
            .collect()
    }
}

/// Cells touched by an edit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EditReport {
    /// Cells whose type or fill changed.
    pub changed: Vec<usize>,
    /// Cells whose populations were replaced by an equilibrium.
    pub reinitialized: Vec<usize>,
    /// Fluid cells turned into Interface because they now touch Gas.
    pub repaired: Vec<usize>,
}

impl EditReport {
    fn merge(&mut self, other: EditReport) {
        self.changed.extend(other.changed);
        self.reinitialized.extend(other.reinitialized);
        self.repaired.extend(other.repaired);
    }
}

fn check_region(sim: &Simulation, region: Region) -> Result<(), SimError> {
    if !region.within(sim.dims()) {
        return Err(SimError::Edit(format!(
            "region {:?}..{:?} is outside the {:?} grid",
            region.lo,
            region.hi,
            sim.dims().as_array()
        )));
    }
    Ok(())
}

/// Applies cell assignments in order (a later edit of the same cell wins).
/// The whole list is validated before anything is written.
///
/// Cells that become liquid from a non-liquid type start at rest with the
/// mean density of their untouched Fluid neighbours (1 if there are none);
/// new Inlet cells take the equilibrium of their inlet velocity; cells that
/// stay liquid keep their populations. Afterwards Fluid cells among the
/// edited cells and their neighbours that touch Gas become Interface cells.
pub fn apply_cell_edits(sim: &mut Simulation, edits: &[CellEdit]) -> Result<EditReport, SimError> {
    let dims = sim.dims();
    let n = dims.cells();
    for e in edits {
        if e.cell >= n {
            return Err(SimError::Edit(format!(
                "cell index {} is outside the grid of {n} cells",
                e.cell
            )));
        }
        if matches!(e.kind, CellType::Inlet | CellType::Outlet) && !dims.on_boundary(e.cell) {
            return Err(SimError::Edit(format!(
                "{} cell {:?} must lie on the domain boundary",
                e.kind.name(),
                dims.coords(e.cell)
            )));
        }
    }

    let mut last = std::collections::BTreeMap::new();
    for e in edits {
        last.insert(e.cell, *e);
    }
    let edited: BTreeSet<usize> = last.keys().copied().collect();
    let model = sim.model();

    // Densities for fresh liquid cells, read before any flag is written.
    let fresh_rho: Vec<(usize, f64)> = last
        .values()
        .filter(|e| e.kind.is_liquid() && !sim.flags.kind(e.cell).is_liquid())
        .map(|e| {
            let (sum, count) = model.velocities[1..]
                .iter()
                .map(|&c| dims.neighbor(e.cell, c))
                .filter(|nb| !edited.contains(nb) && sim.flags.kind(*nb) == CellType::Fluid)
                .fold((0.0, 0usize), |(s, k), nb| (s + sim.field.rho(nb), k + 1));
            (e.cell, if count > 0 { sum / count as f64 } else { 1.0 })
        })
        .collect();

    let mut report = EditReport::default();
    for e in last.values() {
        let (old_kind, old_fill) = (sim.flags.kind(e.cell), sim.flags.fill(e.cell));
        sim.flags.set(e.cell, e.kind, e.fill);
        if sim.flags.kind(e.cell) == old_kind && sim.flags.fill(e.cell) == old_fill {
            continue;
        }
        report.changed.push(e.cell);
    }

    let mut buf = [0.0; MAX_Q];
    for &cell in &report.changed {
        let kind = sim.flags.kind(cell);
        let reinit = match kind {
            CellType::Fluid | CellType::Interface | CellType::Outlet => fresh_rho
                .iter()
                .find(|(c, _)| *c == cell)
                .map(|&(_, rho)| (rho, [0.0; 3])),
            CellType::Inlet => Some((1.0, sim.flags.inlet_velocity(cell))),
            CellType::Wall => Some((1.0, [0.0; 3])),
            CellType::Gas => None,
        };
        if let Some((rho, u)) = reinit {
            let q = model.q();
            crate::lattice::equilibrium_into(model, rho, u, &mut buf[..q]);
            sim.field.populations_mut(cell).copy_from_slice(&buf[..q]);
            sim.field.set_moments(cell, rho, u);
            report.reinitialized.push(cell);
        }
        update_mass(sim, cell);
    }

    if sim.flags.has_free_surface() {
        let candidates: BTreeSet<usize> = report
            .changed
            .iter()
            .flat_map(|&c| model.velocities.iter().map(move |&v| dims.neighbor(c, v)))
            .collect();
        report.repaired = sim.flags.repair_cells(model, candidates);
        for &cell in &report.repaired {
            update_mass(sim, cell);
        }
    }

    for &cell in report.changed.iter().chain(&report.repaired) {
        sim.boundary.update_cell(&sim.flags, model, cell);
    }
    Ok(report)
}

fn update_mass(sim: &mut Simulation, cell: usize) {
    let m = match sim.flags.kind(cell) {
        CellType::Fluid => sim.field.rho(cell),
        CellType::Interface => sim.flags.fill(cell) * sim.field.rho(cell),
        _ => 0.0,
    };
    sim.mass.set(cell, m);
}

/// Moves the Wall cells of `region` by `offset`: the old wall cells become
/// Fluid, then the translated cells become Wall, as two consecutive edits.
pub fn move_wall_region(
    sim: &mut Simulation,
    region: Region,
    offset: [i64; 3],
) -> Result<EditReport, SimError> {
    check_region(sim, region)?;
    let dims = sim.dims();
    if !region.translated(offset).is_some_and(|r| r.within(dims)) {
        return Err(SimError::Edit(format!(
            "region {:?}..{:?} moved by {offset:?} leaves the grid",
            region.lo, region.hi
        )));
    }
    let walls: Vec<usize> = region
        .cells(dims)
        .filter(|&c| sim.flags.kind(c) == CellType::Wall)
        .collect();
    let targets: Vec<CellEdit> = walls
        .iter()
        .map(|&c| {
            let p = dims.coords(c);
            let q = [0, 1, 2].map(|a| (p[a] as i64 + offset[a]) as usize);
            CellEdit::new(dims.index(q[0], q[1], q[2]), CellType::Wall)
        })
        .collect();
    let clear: Vec<CellEdit> = walls
        .iter()
        .map(|&c| CellEdit::new(c, CellType::Fluid))
        .collect();
    let mut report = apply_cell_edits(sim, &clear)?;
    report.merge(apply_cell_edits(sim, &targets)?);
    Ok(report)
}

fn boundary_cells(
    sim: &Simulation,
    kind: CellType,
    region: Option<Region>,
) -> Result<Vec<usize>, SimError> {
    let region = match region {
        Some(r) => {
            check_region(sim, r)?;
            r
        }
        None => Region::whole(sim.dims()),
    };
    Ok(region
        .cells(sim.dims())
        .filter(|&c| sim.flags.kind(c) == kind)
        .collect())
}

/// Sets the prescribed velocity of the Inlet cells in `region` (all Inlet
/// cells when `None`). Takes effect at the next iteration.
pub fn set_inlet_velocity(
    sim: &mut Simulation,
    u: [f64; 3],
    region: Option<Region>,
) -> Result<usize, SimError> {
    validate_boundary_speed("inlet_velocity", u)?;
    let cells = boundary_cells(sim, CellType::Inlet, region)?;
    for &c in &cells {
        sim.flags.set_inlet_velocity(c, u);
    }
    Ok(cells.len())
}

/// Sets the tangential velocity of the Wall cells in `region`.
pub fn set_wall_velocity(
    sim: &mut Simulation,
    u: [f64; 3],
    region: Option<Region>,
) -> Result<usize, SimError> {
    validate_boundary_speed("wall_velocity", u)?;
    let cells = boundary_cells(sim, CellType::Wall, region)?;
    for &c in &cells {
        sim.flags.set_wall_velocity(c, u);
    }
    Ok(cells.len())
}
