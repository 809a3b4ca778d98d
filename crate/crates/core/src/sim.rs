//! One simulation instance: field, flags, mass and the per-iteration
//! composition moments -> collide -> stream -> boundaries -> free surface.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::boundary::{
    apply_inlet, apply_outlet, moving_wall_bounce_back, validate_boundary_speed, BoundarySet,
    CellFlags, CellType, FlagViolation,
};
use crate::error::SimError;
use crate::free_surface::{
    convert_cells, mass_exchange, reconstruct_interface_populations, sync_fill, ConversionReport,
    MassField, CONVERSION_EPSILON,
};
use crate::lattice::{
    cell_moments, collide, equilibrium_into, kernel, stream, Dims, FluidParams, Lattice,
    LatticeField, LatticeModel,
};

/// Cumulative wall time per kernel phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub collide: Duration,
    pub stream: Duration,
    pub boundary: Duration,
    pub free_surface: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.collide + self.stream + self.boundary + self.free_surface
    }
}

/// Result of one iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub iteration: u64,
    pub total_mass: f64,
    pub max_speed: f64,
    pub wall_time: Duration,
    pub conversions: ConversionReport,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub(crate) lattice: Lattice,
    pub(crate) field: LatticeField,
    pub(crate) flags: CellFlags,
    pub(crate) mass: MassField,
    pub(crate) params: FluidParams,
    pub(crate) boundary: BoundarySet,
    pub(crate) iteration: u64,
    pub(crate) parallel: bool,
    pub(crate) timings: PhaseTimings,
}

impl Simulation {
    /// Builds the initial state from a flag grid. Fluid-Gas contacts are
    /// repaired by inserting Interface cells; the repaired cells are
    /// returned alongside the simulation.
    pub fn from_flags(
        lattice: Lattice,
        mut flags: CellFlags,
        params: FluidParams,
    ) -> Result<(Self, Vec<usize>), SimError> {
        params.validate()?;
        let dims = flags.dims();
        if dims.cells() == 0 {
            return Err(SimError::Config("grid has zero cells".into()));
        }
        if lattice == Lattice::D2Q9 && dims.nz != 1 {
            return Err(SimError::Config(format!(
                "d2q9 needs nz = 1, got {}",
                dims.nz
            )));
        }
        if lattice == Lattice::D3Q19 && dims.nz < 2 {
            return Err(SimError::Config("d3q19 needs nz >= 2".into()));
        }
        let model = lattice.model();
        let repaired = flags.repair(model);
        if let Some(v) = flags.violations(model).into_iter().next() {
            return Err(SimError::Config(match v {
                FlagViolation::OpenBoundaryInside { cell } => format!(
                    "inlet/outlet cell {:?} is not on the domain boundary",
                    dims.coords(cell)
                ),
                other => format!("{other:?}"),
            }));
        }
        for cell in 0..dims.cells() {
            if flags.kind(cell) == CellType::Inlet {
                validate_boundary_speed("inlet_velocity", flags.inlet_velocity(cell))?;
            }
            if flags.kind(cell) == CellType::Wall {
                validate_boundary_speed("wall_velocity", flags.wall_velocity(cell))?;
            }
        }
        let mut field = LatticeField::at_rest(dims, model);
        for cell in 0..dims.cells() {
            if flags.kind(cell) == CellType::Inlet {
                let u = flags.inlet_velocity(cell);
                equilibrium_into(model, 1.0, u, field.populations_mut(cell));
                field.set_moments(cell, 1.0, u);
            }
        }
        let mass = MassField::from_state(&flags, &field);
        let boundary = BoundarySet::build(&flags, model);
        Ok((
            Simulation {
                lattice,
                field,
                flags,
                mass,
                params,
                boundary,
                iteration: 0,
                parallel: false,
                timings: PhaseTimings::default(),
            },
            repaired,
        ))
    }

    /// Convenience for fully-periodic single-fluid domains.
    pub fn periodic(lattice: Lattice, dims: Dims, params: FluidParams) -> Result<Self, SimError> {
        Ok(Self::from_flags(lattice, CellFlags::new(dims, CellType::Fluid), params)?.0)
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn model(&self) -> &'static LatticeModel {
        self.lattice.model()
    }

    pub fn dims(&self) -> Dims {
        self.field.dims()
    }

    pub fn field(&self) -> &LatticeField {
        &self.field
    }

    pub fn flags(&self) -> &CellFlags {
        &self.flags
    }

    pub fn mass(&self) -> &MassField {
        &self.mass
    }

    pub fn params(&self) -> FluidParams {
        self.params
    }

    pub fn boundary(&self) -> &BoundarySet {
        &self.boundary
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn timings(&self) -> PhaseTimings {
        self.timings
    }

    pub fn reset_timings(&mut self) {
        self.timings = PhaseTimings::default();
    }

    /// Enables rayon data parallelism for collision, streaming and moments.
    pub fn set_parallel(&mut self, parallel: bool) {
        self.parallel = parallel;
    }

    pub fn set_params(&mut self, params: FluidParams) -> Result<(), SimError> {
        params.validate()?;
        self.params = params;
        Ok(())
    }

    /// Overwrites the populations of one cell and refreshes its moments.
    pub fn set_populations(&mut self, cell: usize, f: &[f64]) {
        self.field.populations_mut(cell).copy_from_slice(f);
        self.refresh_moments(cell);
    }

    pub(crate) fn refresh_moments(&mut self, cell: usize) {
        let model = self.model();
        let g = if self.flags.kind(cell).is_liquid() {
            self.params.gravity
        } else {
            [0.0; 3]
        };
        let (rho, u) = cell_moments(model, self.field.populations(cell), g);
        self.field.set_moments(cell, rho, u);
    }

    /// Replaces every population by the equilibrium of the stored moments'
    /// density and the given velocity field; used to seed analytic flows.
    pub fn set_equilibrium(&mut self, cell: usize, rho: f64, u: [f64; 3]) {
        let model = self.model();
        equilibrium_into(model, rho, u, self.field.populations_mut(cell));
        self.field.set_moments(cell, rho, u);
        if self.flags.kind(cell) == CellType::Fluid {
            self.mass.set(cell, rho);
        }
    }

    /// Seeds the populations of every Gas cell with NaN, so any kernel that
    /// consumes them poisons the field.
    pub fn poison_gas(&mut self) {
        for cell in 0..self.dims().cells() {
            if self.flags.kind(cell) == CellType::Gas {
                self.field.populations_mut(cell).fill(f64::NAN);
            }
        }
    }

    /// Liquid mass: density of Fluid cells plus tracked Interface mass.
    pub fn total_mass(&self) -> f64 {
        self.mass.total(&self.flags)
    }

    /// Sum of every population of every liquid cell.
    pub fn population_sum(&self) -> f64 {
        (0..self.dims().cells())
            .filter(|&c| self.flags.kind(c).is_liquid())
            .map(|c| self.field.populations(c).iter().sum::<f64>())
            .sum()
    }

    pub fn max_speed(&self) -> f64 {
        (0..self.dims().cells())
            .filter(|&c| self.flags.kind(c).is_liquid())
            .map(|c| {
                let u = self.field.velocity(c);
                (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt()
            })
            .fold(0.0, f64::max)
    }

    fn diverged(&self, cell: [usize; 3], reason: String) -> SimError {
        SimError::Divergence {
            iteration: self.iteration,
            cell,
            reason,
        }
    }

    /// Advances one iteration. On divergence nothing is committed: the
    /// populations, flags and mass of the last good iteration are kept.
    pub fn step(&mut self) -> Result<StepDiagnostics, SimError> {
        let start = Instant::now();
        let model = self.lattice.model();
        let free_surface = self.flags.has_free_surface();

        let t = Instant::now();
        collide(model, &mut self.field, &self.flags, &self.params, self.parallel).map_err(
            |e| match e {
                SimError::Divergence { cell, reason, .. } => self.diverged(cell, reason),
                other => other,
            },
        )?;
        self.timings.collide += t.elapsed();

        let t = Instant::now();
        stream(model, &mut self.field, &self.flags, self.parallel);
        self.timings.stream += t.elapsed();

        let t = Instant::now();
        moving_wall_bounce_back(model, &mut self.field, &self.flags, &self.boundary);
        apply_inlet(model, &mut self.field, &self.flags, &self.boundary);
        apply_outlet(model, &mut self.field, &self.flags, &self.boundary);
        self.timings.boundary += t.elapsed();

        let t = Instant::now();
        if free_surface {
            reconstruct_interface_populations(model, &mut self.field, &self.flags);
        }
        self.timings.free_surface += t.elapsed();

        let t = Instant::now();
        self.streamed_moments(model)?;
        self.field.commit();
        self.timings.stream += t.elapsed();

        let t = Instant::now();
        let mut conversions = ConversionReport::default();
        if free_surface {
            mass_exchange(model, &self.field, &self.flags, &mut self.mass);
            conversions = convert_cells(
                model,
                &mut self.flags,
                &mut self.mass,
                &mut self.field,
                self.params.gravity,
                CONVERSION_EPSILON,
            );
        }
        sync_fill(&mut self.flags, &mut self.mass, &self.field);
        self.timings.free_surface += t.elapsed();

        self.iteration += 1;
        Ok(StepDiagnostics {
            iteration: self.iteration,
            total_mass: self.total_mass(),
            max_speed: self.max_speed(),
            wall_time: start.elapsed(),
            conversions,
        })
    }

    /// Moments of the streamed buffer into the scratch moment arrays.
    fn streamed_moments(&mut self, model: &LatticeModel) -> Result<(), SimError> {
        let q = model.q();
        let dims = self.dims();
        let gravity = self.params.gravity;
        let kinds = self.flags.kinds();
        let LatticeField {
            f_tmp,
            rho_tmp,
            u_tmp,
            ..
        } = &mut self.field;
        let f_tmp = &*f_tmp;
        let op = |cell: usize, rho: &mut f64, u: &mut [f64; 3]| -> bool {
            let kind = kinds[cell];
            if !kind.is_source() {
                return true;
            }
            let g = if kind.is_liquid() { gravity } else { [0.0; 3] };
            let (r, v) = cell_moments(model, &f_tmp[cell * q..(cell + 1) * q], g);
            *rho = r;
            *u = v;
            kernel::check_cell(dims, cell, r, v, 0).is_ok()
        };
        let bad = if self.parallel {
            rho_tmp
                .par_iter_mut()
                .zip(u_tmp.par_iter_mut())
                .enumerate()
                .filter_map(|(c, (r, u))| (!op(c, r, u)).then_some(c))
                .min()
        } else {
            rho_tmp
                .iter_mut()
                .zip(u_tmp.iter_mut())
                .enumerate()
                .filter_map(|(c, (r, u))| (!op(c, r, u)).then_some(c))
                .min()
        };
        if let Some(cell) = bad {
            let r = self.field.rho_tmp[cell];
            let u = self.field.u_tmp[cell];
            let reason = kernel::check_cell(dims, cell, r, u, self.iteration)
                .err()
                .map(|e| match e {
                    SimError::Divergence { reason, .. } => reason,
                    other => other.to_string(),
                })
                .unwrap_or_default();
            return Err(self.diverged(dims.coords(cell), reason));
        }
        Ok(())
    }

    pub fn step_n(&mut self, n: u64) -> Result<Option<StepDiagnostics>, SimError> {
        let mut last = None;
        for _ in 0..n {
            last = Some(self.step()?);
        }
        Ok(last)
    }
}
