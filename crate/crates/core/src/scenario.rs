//! Scenario files: a TOML description of the grid, fluid parameters,
//! painted regions, a command schedule and run length.
//!
//! ```toml
//! dims = [60, 40]
//! tau = 0.7
//! gravity = [0.0, -1e-4]
//! background = "gas"
//! walls = true
//! iterations = 1000
//! output_every = 50
//! fields = ["fill"]
//!
//! [[region]]
//! lo = [1, 1]
//! hi = [25, 31]
//! flag = "fluid"
//!
//! [[schedule]]
//! at = 100
//! command = "set_cells"
//! lo = [30, 1]
//! hi = [31, 10]
//! flag = "wall"
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::boundary::{CellFlags, CellType};
use crate::engine::{CellEdit, Control, Geometry, ParamUpdate, SteerCommand};
use crate::error::SimError;
use crate::extract::{Axis, FieldId, SliceSpec};
use crate::lattice::{Dims, FluidParams, Lattice, Region};
use crate::Simulation;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    lattice: Option<Lattice>,
    dims: Vec<usize>,
    tau: f64,
    #[serde(default)]
    gravity: Vec<f64>,
    background: Option<String>,
    #[serde(default)]
    walls: bool,
    #[serde(default)]
    noise: f64,
    #[serde(default)]
    iterations: u64,
    output_every: Option<u64>,
    #[serde(default)]
    fields: Vec<String>,
    slice: Option<RawSlice>,
    #[serde(default)]
    autostart: bool,
    #[serde(default)]
    region: Vec<RawRegion>,
    #[serde(default)]
    schedule: Vec<RawEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSlice {
    axis: String,
    index: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    lo: Vec<usize>,
    hi: Vec<usize>,
    flag: String,
    fill: Option<f64>,
    velocity: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    at: u64,
    command: String,
    lo: Option<Vec<usize>>,
    hi: Option<Vec<usize>>,
    flag: Option<String>,
    fill: Option<f64>,
    offset: Option<Vec<i64>>,
    name: Option<String>,
    value: Option<Vec<f64>>,
    n: Option<u64>,
}

/// A scheduled command: delivered when the simulation reaches `at`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduledCommand {
    pub at: u64,
    pub cmd: SteerCommand,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub lattice: Lattice,
    pub flags: CellFlags,
    pub params: FluidParams,
    pub noise: f64,
    pub iterations: u64,
    pub output_every: u64,
    pub fields: Vec<FieldId>,
    pub slice: SliceSpec,
    /// Whether a server loading this scenario starts stepping right away.
    /// Headless runs always start.
    pub autostart: bool,
    pub schedule: Vec<ScheduledCommand>,
}

fn vec3<T: Copy + Default>(v: &[T], what: &str, flat_default: T) -> Result<[T; 3], ScenarioError> {
    match v.len() {
        2 => Ok([v[0], v[1], flat_default]),
        3 => Ok([v[0], v[1], v[2]]),
        n => invalid(format!("{what} needs 2 or 3 components, got {n}")),
    }
}

fn region(dims: Dims, lo: &[usize], hi: &[usize], what: &str) -> Result<Region, ScenarioError> {
    let lo = vec3(lo, &format!("{what} lo"), 0)?;
    let hi = vec3(hi, &format!("{what} hi"), 1)?;
    let r = Region::new(lo, hi);
    if !r.within(dims) {
        return invalid(format!(
            "{what} {lo:?}..{hi:?} lies outside the {:?} grid",
            dims.as_array()
        ));
    }
    Ok(r)
}

fn cell_type(name: &str) -> Result<CellType, ScenarioError> {
    CellType::from_name(name).map_or_else(
        || invalid(format!("unknown flag `{name}` (fluid, wall, gas, interface, inlet, outlet)")),
        Ok,
    )
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let default_name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
        Self::parse(&text, &default_name)
    }

    pub fn parse(text: &str, default_name: &str) -> Result<Self, ScenarioError> {
        let raw: RawScenario =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let [nx, ny, nz] = vec3(&raw.dims, "dims", 1)?;
        let dims = Dims::new(nx, ny, nz);
        if dims.cells() == 0 {
            return invalid("dims must be positive");
        }
        let lattice = raw.lattice.unwrap_or(Lattice::for_depth(nz));
        let gravity = if raw.gravity.is_empty() {
            [0.0; 3]
        } else {
            vec3(&raw.gravity, "gravity", 0.0)?
        };
        let params = FluidParams::new(raw.tau, gravity)?;

        let background = cell_type(raw.background.as_deref().unwrap_or("fluid"))?;
        let mut flags = CellFlags::new(dims, background);
        if raw.walls {
            for cell in 0..dims.cells() {
                if dims.on_boundary(cell) {
                    flags.set(cell, CellType::Wall, None);
                }
            }
        }
        for (k, r) in raw.region.iter().enumerate() {
            let what = format!("region #{}", k + 1);
            let reg = region(dims, &r.lo, &r.hi, &what)?;
            let kind = cell_type(&r.flag)?;
            let velocity = r
                .velocity
                .as_deref()
                .map(|v| vec3(v, &format!("{what} velocity"), 0.0))
                .transpose()?;
            for cell in reg.cells(dims).collect::<Vec<_>>() {
                flags.set(cell, kind, r.fill);
                match (kind, velocity) {
                    (CellType::Inlet, Some(u)) => flags.set_inlet_velocity(cell, u),
                    (CellType::Wall, Some(u)) => flags.set_wall_velocity(cell, u),
                    (_, Some(_)) => {
                        return invalid(format!("{what}: velocity only applies to inlet and wall"))
                    }
                    _ => {}
                }
            }
        }

        let slice = match &raw.slice {
            None => SliceSpec::z(if nz > 1 { (nz / 2) as u32 } else { 0 }),
            Some(s) => {
                let axis = match s.axis.as_str() {
                    "x" => Axis::X,
                    "y" => Axis::Y,
                    "z" => Axis::Z,
                    other => return invalid(format!("unknown slice axis `{other}`")),
                };
                SliceSpec {
                    axis,
                    index: s.index,
                }
            }
        };
        let fields = raw
            .fields
            .iter()
            .map(|f| {
                FieldId::from_name(f).map_or_else(|| invalid(format!("unknown field `{f}`")), Ok)
            })
            .collect::<Result<Vec<_>, _>>()?;
        for &f in &fields {
            let ok = if f == FieldId::Isosurface {
                !dims.is_2d()
            } else {
                slice.validate(dims).is_ok()
            };
            if !ok {
                return invalid(format!("field `{}` cannot be taken on this grid/slice", f.name()));
            }
        }
        let output_every = raw.output_every.unwrap_or(100);
        if output_every == 0 {
            return invalid("output_every must be at least 1");
        }

        let mut schedule = Vec::with_capacity(raw.schedule.len());
        for (k, e) in raw.schedule.iter().enumerate() {
            let cmd = schedule_command(dims, e)
                .map_err(|err| ScenarioError::Invalid(format!("schedule #{}: {err}", k + 1)))?;
            schedule.push(ScheduledCommand { at: e.at, cmd });
        }
        schedule.sort_by_key(|s| s.at);

        Ok(Scenario {
            name: raw.name.unwrap_or_else(|| default_name.to_string()),
            lattice,
            flags,
            params,
            noise: raw.noise,
            iterations: raw.iterations,
            output_every,
            fields,
            slice,
            autostart: raw.autostart,
            schedule,
        })
    }

    pub fn dims(&self) -> Dims {
        self.flags.dims()
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            flags: self.flags.clone(),
        }
    }

    /// Builds the initial simulation. A nonzero `noise` perturbs the
    /// density of Fluid cells uniformly in `±noise`, drawn from `seed`.
    pub fn build(&self, seed: u64) -> Result<(Simulation, Vec<usize>), ScenarioError> {
        let (mut sim, repaired) = Simulation::from_flags(self.lattice, self.flags.clone(), self.params)?;
        if self.noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for cell in 0..sim.dims().cells() {
                if sim.flags().kind(cell) == CellType::Fluid {
                    let rho = 1.0 + rng.gen_range(-self.noise..=self.noise);
                    sim.set_equilibrium(cell, rho, [0.0; 3]);
                }
            }
        }
        Ok((sim, repaired))
    }
}

fn schedule_command(dims: Dims, e: &RawEntry) -> Result<SteerCommand, ScenarioError> {
    let need_region = || -> Result<Region, ScenarioError> {
        match (&e.lo, &e.hi) {
            (Some(lo), Some(hi)) => region(dims, lo, hi, "region"),
            _ => invalid(format!("`{}` needs lo and hi", e.command)),
        }
    };
    let opt_region = || -> Result<Option<Region>, ScenarioError> {
        match (&e.lo, &e.hi) {
            (None, None) => Ok(None),
            _ => need_region().map(Some),
        }
    };
    Ok(match e.command.as_str() {
        "set_cells" => {
            let r = need_region()?;
            let kind = cell_type(
                e.flag
                    .as_deref()
                    .ok_or_else(|| ScenarioError::Invalid("set_cells needs flag".into()))?,
            )?;
            SteerCommand::SetCells(
                r.cells(dims)
                    .map(|cell| CellEdit {
                        cell,
                        kind,
                        fill: e.fill,
                    })
                    .collect(),
            )
        }
        "move_wall_region" => {
            let offset = e
                .offset
                .as_deref()
                .ok_or_else(|| ScenarioError::Invalid("move_wall_region needs offset".into()))?;
            SteerCommand::MoveWallRegion {
                region: need_region()?,
                offset: vec3(offset, "offset", 0)?,
            }
        }
        "set_param" => {
            let name = e.name.as_deref().unwrap_or_default();
            let value = e.value.as_deref().unwrap_or_default();
            SteerCommand::SetParam(match (name, value) {
                ("tau", [tau]) => ParamUpdate::Tau(*tau),
                ("gravity", g) => ParamUpdate::Gravity(vec3(g, "gravity", 0.0)?),
                ("inlet_velocity", u) => ParamUpdate::InletVelocity {
                    u: vec3(u, "inlet_velocity", 0.0)?,
                    region: opt_region()?,
                },
                ("wall_velocity", u) => ParamUpdate::WallVelocity {
                    u: vec3(u, "wall_velocity", 0.0)?,
                    region: opt_region()?,
                },
                _ => return invalid(format!("bad set_param name `{name}` / value {value:?}")),
            })
        }
        "start" => SteerCommand::Control(Control::Start),
        "pause" => SteerCommand::Control(Control::Pause),
        "resume" => SteerCommand::Control(Control::Resume),
        "step_n" => SteerCommand::Control(Control::StepN(
            e.n.ok_or_else(|| ScenarioError::Invalid("step_n needs n".into()))?,
        )),
        other => return invalid(format!("unknown command `{other}`")),
    })
}
