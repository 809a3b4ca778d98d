//! A fixed message sequence covering every message type, used as the
//! cross-implementation test vector file (`testdata/test-vectors.bin`).

use super::*;

pub fn messages() -> Vec<Message> {
    vec![
        Message::Hello {
            version: PROTOCOL_VERSION,
        },
        Message::Geometry(GeometryMsg {
            dims: [4, 3, 1],
            flags: vec![3, 3, 3, 3, 3, 1, 2, 3, 3, 0, 0, 3],
            fill: vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0],
        }),
        Message::Start,
        Message::Pause,
        Message::Resume,
        Message::Reset(GeometryMsg {
            dims: [2, 2, 2],
            flags: vec![1, 1, 1, 1, 3, 3, 3, 3],
            fill: vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        }),
        Message::SetCells(vec![
            CellRecord {
                index: 5,
                flag: 3,
                fill: 0.0,
            },
            CellRecord {
                index: 6,
                flag: 2,
                fill: 0.75,
            },
            CellRecord {
                index: 1 << 40,
                flag: 1,
                fill: 1.0,
            },
        ]),
        Message::MoveRegion {
            region: [10, 0, 0, 12, 8, 1],
            offset: [-3, 1, 0],
        },
        Message::SetParam {
            id: param::TAU,
            values: vec![0.8],
        },
        Message::SetParam {
            id: param::GRAVITY,
            values: vec![0.0, -1e-4, 0.0],
        },
        Message::SetParam {
            id: param::INLET_VELOCITY,
            values: vec![0.05, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 31.0, 1.0],
        },
        Message::SetParam {
            id: param::WALL_VELOCITY,
            values: vec![0.1, 0.0, 0.0],
        },
        Message::Subscribe {
            field: 5,
            axis: 2,
            index: 0,
            every_n: 10,
        },
        Message::Subscribe {
            field: 4,
            axis: 0,
            index: 7,
            every_n: 1,
        },
        Message::Unsubscribe { id: 12 },
        Message::Frame(FrameMsg {
            subscription: 12,
            iteration: 40,
            dims: [3, 2, 1],
            data: vec![0.0, -0.0, 1.5, f32::INFINITY, f32::MIN_POSITIVE / 2.0, -2.25],
        }),
        Message::Frame(FrameMsg {
            subscription: 13,
            iteration: u64::MAX,
            dims: [2, 1, 2],
            data: vec![0.01, -0.02, 0.03, 0.04],
        }),
        Message::Frame(FrameMsg {
            subscription: 14,
            iteration: 0,
            dims: [0, 1, 4],
            data: vec![],
        }),
        Message::Stats {
            iteration: 123_456,
            it_per_sec: 42.5,
            mass: 1234.0625,
        },
        Message::Ack { seq: 7 },
        Message::Error {
            code: ErrorCode::Parameter as u16,
            text: "#9 tau must exceed 0.5 (got 0.4)".into(),
        },
        Message::Error {
            code: ErrorCode::Divergence as u16,
            text: "écoulement divergé · 水".into(),
        },
        Message::StepN { n: 500 },
        Message::Unknown {
            msg_type: 999,
            payload: vec![0xde, 0xad, 0xbe, 0xef],
        },
        Message::Bye,
    ]
}

pub fn encode_vectors() -> Vec<u8> {
    let mut out = Vec::new();
    for m in messages() {
        encode_into(&m, &mut out).expect("golden messages are valid");
    }
    out
}
