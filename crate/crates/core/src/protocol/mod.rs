//! Length-prefixed binary messages shared by the TCP and WebSocket
//! transports. Every integer and float is little-endian; there is no
//! padding. A message is `length: u32`, `type: u16`, then `length - 2`
//! payload bytes.

mod codec;
pub mod golden;
mod message;

pub use codec::{
    decode_all, decode_payload, encode, encode_frame, encode_into, known_type, Decoder, EncodeError,
    ProtocolError, ProtocolErrorKind,
};
pub use message::{
    param, tag, CellRecord, ErrorCode, FrameMsg, GeometryMsg, Message, MAX_MESSAGE_LEN,
    PROTOCOL_VERSION,
};
