use crate::boundary::{CellFlags, CellType};
use crate::error::SimError;
use crate::extract::{Axis, FieldId, SliceSpec};
use crate::lattice::{Dims, FluidParams, Lattice, Region};
use crate::protocol::{param, CellRecord, ErrorCode, GeometryMsg, Message};
use crate::Simulation;

use super::CellEdit;

/// Who sent a command; replies are routed back to it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    /// The scenario schedule of a headless run.
    Script,
    Session(u64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamUpdate {
    Tau(f64),
    Gravity([f64; 3]),
    InletVelocity { u: [f64; 3], region: Option<Region> },
    WallVelocity { u: [f64; 3], region: Option<Region> },
}

/// A flag grid as shipped in GEOMETRY and RESET.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub flags: CellFlags,
}

impl Geometry {
    pub fn from_message(g: &GeometryMsg) -> Result<Self, SimError> {
        let [nx, ny, nz] = g.dims.map(|d| d as usize);
        let flags = CellFlags::from_raw(Dims::new(nx, ny, nz), &g.flags, &g.fill)?;
        Ok(Geometry { flags })
    }

    pub fn to_message(&self) -> GeometryMsg {
        let d = self.flags.dims().as_array();
        GeometryMsg {
            dims: d.map(|v| v as u32),
            flags: self.flags.to_bytes(),
            fill: self.flags.fills().iter().map(|&f| f as f32).collect(),
        }
    }

    /// D2Q9 for single-layer grids, D3Q19 otherwise.
    pub fn lattice(&self) -> Lattice {
        Lattice::for_depth(self.flags.dims().nz)
    }

    pub fn build(&self, params: FluidParams) -> Result<(Simulation, Vec<usize>), SimError> {
        Simulation::from_flags(self.lattice(), self.flags.clone(), params)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Control {
    Start,
    Pause,
    Resume,
    Reset(Geometry),
    /// Run exactly `n` iterations before reading further commands.
    StepN(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SteerCommand {
    SetCells(Vec<CellEdit>),
    MoveWallRegion { region: Region, offset: [i64; 3] },
    SetParam(ParamUpdate),
    Control(Control),
    Geometry(Geometry),
    Subscribe { field: FieldId, slice: SliceSpec, every_n: u32 },
    Unsubscribe { id: u32 },
    /// The origin went away; drop its subscriptions.
    Disconnect,
}

impl SteerCommand {
    pub fn name(&self) -> &'static str {
        match self {
            SteerCommand::SetCells(_) => "set_cells",
            SteerCommand::MoveWallRegion { .. } => "move_wall_region",
            SteerCommand::SetParam(_) => "set_param",
            SteerCommand::Control(Control::Start) => "start",
            SteerCommand::Control(Control::Pause) => "pause",
            SteerCommand::Control(Control::Resume) => "resume",
            SteerCommand::Control(Control::Reset(_)) => "reset",
            SteerCommand::Control(Control::StepN(_)) => "step_n",
            SteerCommand::Geometry(_) => "geometry",
            SteerCommand::Subscribe { .. } => "subscribe",
            SteerCommand::Unsubscribe { .. } => "unsubscribe",
            SteerCommand::Disconnect => "disconnect",
        }
    }
}

/// A queued command with its origin and the origin's sequence number,
/// which is echoed in ACK and ERROR replies.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub origin: Origin,
    pub seq: u64,
    pub cmd: SteerCommand,
}

fn region_of(r: &[f64]) -> Option<Region> {
    (r.len() == 6).then(|| {
        let v: Vec<usize> = r.iter().map(|&x| x as usize).collect();
        Region::new([v[0], v[1], v[2]], [v[3], v[4], v[5]])
    })
}

fn velocity_param(name: &str, values: &[f64]) -> Result<([f64; 3], Option<Region>), String> {
    match values.len() {
        3 => Ok(([values[0], values[1], values[2]], None)),
        9 => {
            let r = &values[3..];
            if r.iter().any(|&x| !(x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64)) {
                return Err(format!("{name} region bounds must be non-negative integers"));
            }
            Ok(([values[0], values[1], values[2]], region_of(r)))
        }
        n => Err(format!("{name} takes 3 or 9 values, got {n}")),
    }
}

/// Translates a client-to-server wire message into an engine command.
/// Session-level messages (HELLO, BYE) and server-to-client messages are
/// not commands and yield a protocol error.
pub fn command_from_message(msg: &Message) -> Result<SteerCommand, (ErrorCode, String)> {
    let bad = |code, text: String| Err((code, text));
    Ok(match msg {
        Message::Geometry(g) => SteerCommand::Geometry(
            Geometry::from_message(g).map_err(|e| (ErrorCode::Configuration, e.to_string()))?,
        ),
        Message::Reset(g) => SteerCommand::Control(Control::Reset(
            Geometry::from_message(g).map_err(|e| (ErrorCode::Configuration, e.to_string()))?,
        )),
        Message::Start => SteerCommand::Control(Control::Start),
        Message::Pause => SteerCommand::Control(Control::Pause),
        Message::Resume => SteerCommand::Control(Control::Resume),
        Message::StepN { n } => SteerCommand::Control(Control::StepN(*n)),
        Message::SetCells(cells) => {
            let mut edits = Vec::with_capacity(cells.len());
            for c in cells {
                let kind = CellType::from_u8(c.flag).ok_or_else(|| {
                    (
                        ErrorCode::InvalidCells,
                        format!("unknown flag byte {} for cell {}", c.flag, c.index),
                    )
                })?;
                let cell = usize::try_from(c.index)
                    .map_err(|_| (ErrorCode::InvalidCells, format!("cell {} out of range", c.index)))?;
                edits.push(CellEdit {
                    cell,
                    kind,
                    fill: (!c.fill.is_nan()).then_some(c.fill as f64),
                });
            }
            SteerCommand::SetCells(edits)
        }
        Message::MoveRegion { region, offset } => SteerCommand::MoveWallRegion {
            region: Region::new(
                [region[0], region[1], region[2]].map(|v| v as usize),
                [region[3], region[4], region[5]].map(|v| v as usize),
            ),
            offset: offset.map(|v| v as i64),
        },
        Message::SetParam { id, values } => SteerCommand::SetParam(match *id {
            param::TAU => match values[..] {
                [tau] => ParamUpdate::Tau(tau),
                _ => return bad(ErrorCode::Parameter, "tau takes 1 value".into()),
            },
            param::GRAVITY => match values[..] {
                [x, y] => ParamUpdate::Gravity([x, y, 0.0]),
                [x, y, z] => ParamUpdate::Gravity([x, y, z]),
                _ => return bad(ErrorCode::Parameter, "gravity takes 2 or 3 values".into()),
            },
            param::INLET_VELOCITY => {
                let (u, region) = velocity_param("inlet_velocity", values)
                    .map_err(|e| (ErrorCode::Parameter, e))?;
                ParamUpdate::InletVelocity { u, region }
            }
            param::WALL_VELOCITY => {
                let (u, region) = velocity_param("wall_velocity", values)
                    .map_err(|e| (ErrorCode::Parameter, e))?;
                ParamUpdate::WallVelocity { u, region }
            }
            other => return bad(ErrorCode::Parameter, format!("unknown parameter id {other}")),
        }),
        Message::Subscribe {
            field,
            axis,
            index,
            every_n,
        } => {
            let field = FieldId::from_u16(*field)
                .ok_or_else(|| (ErrorCode::Subscription, format!("unknown field id {field}")))?;
            let axis = Axis::from_u8(*axis)
                .ok_or_else(|| (ErrorCode::Subscription, format!("unknown axis {axis}")))?;
            if *every_n == 0 {
                return bad(ErrorCode::Subscription, "every_n must be at least 1".into());
            }
            SteerCommand::Subscribe {
                field,
                slice: SliceSpec {
                    axis,
                    index: *index,
                },
                every_n: *every_n,
            }
        }
        Message::Unsubscribe { id } => SteerCommand::Unsubscribe { id: *id },
        other => {
            return bad(
                ErrorCode::Protocol,
                format!("{} is not a command", other.name()),
            )
        }
    })
}

fn region_values(u: [f64; 3], region: Option<Region>) -> Vec<f64> {
    let mut v = u.to_vec();
    if let Some(r) = region {
        v.extend(r.lo.iter().chain(&r.hi).map(|&x| x as f64));
    }
    v
}

/// The wire message a client sends for `cmd`; `None` for commands that
/// have no client-side form. Cell fills travel as `f32`.
pub fn message_from_command(cmd: &SteerCommand) -> Option<Message> {
    Some(match cmd {
        SteerCommand::SetCells(edits) => Message::SetCells(
            edits
                .iter()
                .map(|e| CellRecord {
                    index: e.cell as u64,
                    flag: e.kind as u8,
                    fill: e.fill.map_or(f32::NAN, |f| f as f32),
                })
                .collect(),
        ),
        SteerCommand::MoveWallRegion { region, offset } => {
            let [a, b, c] = region.lo.map(|v| v as u32);
            let [d, e, f] = region.hi.map(|v| v as u32);
            Message::MoveRegion {
                region: [a, b, c, d, e, f],
                offset: offset.map(|v| v as i32),
            }
        }
        SteerCommand::SetParam(p) => {
            let (id, values) = match *p {
                ParamUpdate::Tau(t) => (param::TAU, vec![t]),
                ParamUpdate::Gravity(g) => (param::GRAVITY, g.to_vec()),
                ParamUpdate::InletVelocity { u, region } => {
                    (param::INLET_VELOCITY, region_values(u, region))
                }
                ParamUpdate::WallVelocity { u, region } => {
                    (param::WALL_VELOCITY, region_values(u, region))
                }
            };
            Message::SetParam { id, values }
        }
        SteerCommand::Control(c) => match c {
            Control::Start => Message::Start,
            Control::Pause => Message::Pause,
            Control::Resume => Message::Resume,
            Control::Reset(g) => Message::Reset(g.to_message()),
            Control::StepN(n) => Message::StepN { n: *n },
        },
        SteerCommand::Geometry(g) => Message::Geometry(g.to_message()),
        SteerCommand::Subscribe {
            field,
            slice,
            every_n,
        } => Message::Subscribe {
            field: *field as u16,
            axis: slice.axis as u8,
            index: slice.index,
            every_n: *every_n,
        },
        SteerCommand::Unsubscribe { id } => Message::Unsubscribe { id: *id },
        SteerCommand::Disconnect => return None,
    })
}

/// Wire error code for an engine error.
pub fn error_code(e: &SimError) -> ErrorCode {
    match e {
        SimError::Divergence { .. } => ErrorCode::Divergence,
        SimError::Parameter { .. } => ErrorCode::Parameter,
        SimError::Config(_) => ErrorCode::Configuration,
        SimError::Edit(_) => ErrorCode::InvalidCells,
    }
}
