/// Version sent in HELLO; the server refuses any other.
pub const PROTOCOL_VERSION: u16 = 1;

/// Upper bound on the `length` field (type tag plus payload).
pub const MAX_MESSAGE_LEN: usize = 64 << 20;

/// Message type tags.
pub mod tag {
    pub const HELLO: u16 = 1;
    pub const GEOMETRY: u16 = 2;
    pub const START: u16 = 3;
    pub const PAUSE: u16 = 4;
    pub const RESUME: u16 = 5;
    pub const RESET: u16 = 6;
    pub const SET_CELLS: u16 = 7;
    pub const MOVE_REGION: u16 = 8;
    pub const SET_PARAM: u16 = 9;
    pub const SUBSCRIBE: u16 = 10;
    pub const UNSUBSCRIBE: u16 = 11;
    pub const FRAME: u16 = 12;
    pub const STATS: u16 = 13;
    pub const ACK: u16 = 14;
    pub const ERROR: u16 = 15;
    pub const BYE: u16 = 16;
    pub const STEP_N: u16 = 17;
}

/// SET_PARAM parameter ids.
pub mod param {
    pub const TAU: u16 = 1;
    pub const GRAVITY: u16 = 2;
    pub const INLET_VELOCITY: u16 = 3;
    pub const WALL_VELOCITY: u16 = 4;
}

/// ERROR codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum ErrorCode {
    Version = 1,
    Protocol = 2,
    Parameter = 3,
    State = 4,
    InvalidCells = 5,
    Subscription = 6,
    Divergence = 7,
    Configuration = 8,
}

impl ErrorCode {
    pub fn from_u16(v: u16) -> Option<Self> {
        use ErrorCode::*;
        [
            Version,
            Protocol,
            Parameter,
            State,
            InvalidCells,
            Subscription,
            Divergence,
            Configuration,
        ]
        .into_iter()
        .find(|c| *c as u16 == v)
    }
}

/// GEOMETRY / RESET payload: dimensions, one flag byte and one fill value
/// per cell in x-fastest order.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometryMsg {
    pub dims: [u32; 3],
    pub flags: Vec<u8>,
    pub fill: Vec<f32>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellRecord {
    pub index: u64,
    pub flag: u8,
    pub fill: f32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameMsg {
    pub subscription: u32,
    pub iteration: u64,
    /// `[width, height, components]`.
    pub dims: [u32; 3],
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    Hello { version: u16 },
    Geometry(GeometryMsg),
    Start,
    Pause,
    Resume,
    Reset(GeometryMsg),
    SetCells(Vec<CellRecord>),
    /// Half-open region `lo..hi` per axis, then a translation.
    MoveRegion { region: [u32; 6], offset: [i32; 3] },
    SetParam { id: u16, values: Vec<f64> },
    Subscribe { field: u16, axis: u8, index: u32, every_n: u32 },
    Unsubscribe { id: u32 },
    Frame(FrameMsg),
    Stats { iteration: u64, it_per_sec: f64, mass: f64 },
    Ack { seq: u64 },
    Error { code: u16, text: String },
    Bye,
    /// Advance exactly `n` iterations before reading further commands.
    StepN { n: u64 },
    /// A type this build does not know; kept so it can be skipped.
    Unknown { msg_type: u16, payload: Vec<u8> },
}

impl Message {
    pub fn msg_type(&self) -> u16 {
        match self {
            Message::Hello { .. } => tag::HELLO,
            Message::Geometry(_) => tag::GEOMETRY,
            Message::Start => tag::START,
            Message::Pause => tag::PAUSE,
            Message::Resume => tag::RESUME,
            Message::Reset(_) => tag::RESET,
            Message::SetCells(_) => tag::SET_CELLS,
            Message::MoveRegion { .. } => tag::MOVE_REGION,
            Message::SetParam { .. } => tag::SET_PARAM,
            Message::Subscribe { .. } => tag::SUBSCRIBE,
            Message::Unsubscribe { .. } => tag::UNSUBSCRIBE,
            Message::Frame(_) => tag::FRAME,
            Message::Stats { .. } => tag::STATS,
            Message::Ack { .. } => tag::ACK,
            Message::Error { .. } => tag::ERROR,
            Message::Bye => tag::BYE,
            Message::StepN { .. } => tag::STEP_N,
            Message::Unknown { msg_type, .. } => *msg_type,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "HELLO",
            Message::Geometry(_) => "GEOMETRY",
            Message::Start => "START",
            Message::Pause => "PAUSE",
            Message::Resume => "RESUME",
            Message::Reset(_) => "RESET",
            Message::SetCells(_) => "SET_CELLS",
            Message::MoveRegion { .. } => "MOVE_REGION",
            Message::SetParam { .. } => "SET_PARAM",
            Message::Subscribe { .. } => "SUBSCRIBE",
            Message::Unsubscribe { .. } => "UNSUBSCRIBE",
            Message::Frame(_) => "FRAME",
            Message::Stats { .. } => "STATS",
            Message::Ack { .. } => "ACK",
            Message::Error { .. } => "ERROR",
            Message::Bye => "BYE",
            Message::StepN { .. } => "STEP_N",
            Message::Unknown { .. } => "UNKNOWN",
        }
    }

    pub fn error(code: ErrorCode, text: impl Into<String>) -> Self {
        Message::Error {
            code: code as u16,
            text: text.into(),
        }
    }
}
