use thiserror::Error;

use super::message::*;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("message of {len} bytes exceeds the {cap} byte cap")]
    TooLarge { len: usize, cap: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ProtocolErrorKind {
    #[error("declared length {0} exceeds the cap")]
    TooLong(u64),
    #[error("declared length {0} is shorter than the type tag")]
    TooShort(u32),
    #[error("malformed {name} payload: {reason}")]
    Malformed { name: &'static str, reason: String },
    #[error("stream ended inside a message ({0} bytes pending)")]
    Truncated(usize),
}

/// A framing or payload error, located by the stream offset of the
/// offending message's length prefix.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("protocol error at byte {offset}: {kind}")]
pub struct ProtocolError {
    pub offset: u64,
    pub kind: ProtocolErrorKind,
}

/// Appends the encoded message to `out`.
pub fn encode_into(msg: &Message, out: &mut Vec<u8>) -> Result<(), EncodeError> {
    let start = out.len();
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&msg.msg_type().to_le_bytes());
    let res = write_payload(msg, out);
    let len = out.len() - start - 4;
    if let Err(e) = res {
        out.truncate(start);
        return Err(e);
    }
    if len > MAX_MESSAGE_LEN {
        out.truncate(start);
        return Err(EncodeError::TooLarge {
            len,
            cap: MAX_MESSAGE_LEN,
        });
    }
    out[start..start + 4].copy_from_slice(&(len as u32).to_le_bytes());
    Ok(())
}

pub fn encode(msg: &Message) -> Result<Vec<u8>, EncodeError> {
    let mut out = Vec::new();
    encode_into(msg, &mut out)?;
    Ok(out)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, v: &[f32]) {
    out.reserve(v.len() * 4);
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn cell_count(dims: [u32; 3]) -> Option<usize> {
    (dims[0] as usize)
        .checked_mul(dims[1] as usize)?
        .checked_mul(dims[2] as usize)
}

fn write_geometry(g: &GeometryMsg, out: &mut Vec<u8>) -> Result<(), EncodeError> {
    let n = cell_count(g.dims).ok_or_else(|| EncodeError::Invalid("geometry too large".into()))?;
    if g.flags.len() != n || g.fill.len() != n {
        return Err(EncodeError::Invalid(format!(
            "geometry of {n} cells carries {} flags and {} fill values",
            g.flags.len(),
            g.fill.len()
        )));
    }
    g.dims.iter().for_each(|&d| put_u32(out, d));
    out.extend_from_slice(&g.flags);
    put_f32s(out, &g.fill);
    Ok(())
}

fn write_payload(msg: &Message, out: &mut Vec<u8>) -> Result<(), EncodeError> {
    match msg {
        Message::Hello { version } => out.extend_from_slice(&version.to_le_bytes()),
        Message::Geometry(g) | Message::Reset(g) => write_geometry(g, out)?,
        Message::Start | Message::Pause | Message::Resume | Message::Bye => {}
        Message::SetCells(cells) => {
            put_u32(out, cells.len() as u32);
            for c in cells {
                put_u64(out, c.index);
                out.push(c.flag);
                out.extend_from_slice(&c.fill.to_le_bytes());
            }
        }
        Message::MoveRegion { region, offset } => {
            region.iter().for_each(|&v| put_u32(out, v));
            offset
                .iter()
                .for_each(|&v| out.extend_from_slice(&v.to_le_bytes()));
        }
        Message::SetParam { id, values } => {
            out.extend_from_slice(&id.to_le_bytes());
            values
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
        Message::Subscribe {
            field,
            axis,
            index,
            every_n,
        } => {
            out.extend_from_slice(&field.to_le_bytes());
            out.push(*axis);
            put_u32(out, *index);
            put_u32(out, *every_n);
        }
        Message::Unsubscribe { id } => put_u32(out, *id),
        Message::Frame(f) => write_frame(f.subscription, f.iteration, f.dims, &f.data, out)?,
        Message::Stats {
            iteration,
            it_per_sec,
            mass,
        } => {
            put_u64(out, *iteration);
            out.extend_from_slice(&it_per_sec.to_le_bytes());
            out.extend_from_slice(&mass.to_le_bytes());
        }
        Message::Ack { seq } => put_u64(out, *seq),
        Message::Error { code, text } => {
            out.extend_from_slice(&code.to_le_bytes());
            out.extend_from_slice(text.as_bytes());
        }
        Message::StepN { n } => put_u64(out, *n),
        Message::Unknown { msg_type, payload } => {
            if known_type(*msg_type) {
                return Err(EncodeError::Invalid(format!(
                    "type {msg_type} is known and cannot be sent as opaque"
                )));
            }
            out.extend_from_slice(payload);
        }
    }
    Ok(())
}

fn write_frame(
    subscription: u32,
    iteration: u64,
    dims: [u32; 3],
    data: &[f32],
    out: &mut Vec<u8>,
) -> Result<(), EncodeError> {
    let n = cell_count(dims).ok_or_else(|| EncodeError::Invalid("frame too large".into()))?;
    if data.len() != n {
        return Err(EncodeError::Invalid(format!(
            "frame dims {dims:?} need {n} values, got {}",
            data.len()
        )));
    }
    let len = 2 + 24 + 4 * n;
    if len > MAX_MESSAGE_LEN {
        return Err(EncodeError::TooLarge {
            len,
            cap: MAX_MESSAGE_LEN,
        });
    }
    put_u32(out, subscription);
    put_u64(out, iteration);
    dims.iter().for_each(|&d| put_u32(out, d));
    put_f32s(out, data);
    Ok(())
}

/// Encodes a FRAME straight from borrowed data.
pub fn encode_frame(
    subscription: u32,
    iteration: u64,
    dims: [u32; 3],
    data: &[f32],
) -> Result<Vec<u8>, EncodeError> {
    let mut out = Vec::with_capacity(6 + 24 + 4 * data.len());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&tag::FRAME.to_le_bytes());
    write_frame(subscription, iteration, dims, data, &mut out)?;
    let len = (out.len() - 4) as u32;
    out[..4].copy_from_slice(&len.to_le_bytes());
    Ok(out)
}

pub fn known_type(t: u16) -> bool {
    (tag::HELLO..=tag::STEP_N).contains(&t)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    name: &'static str,
}

type PayloadResult<T> = Result<T, (usize, String)>;

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> PayloadResult<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err((
                self.pos,
                format!("need {n} more bytes, {} left", self.buf.len() - self.pos),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> PayloadResult<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u8(&mut self) -> PayloadResult<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> PayloadResult<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    fn u32(&mut self) -> PayloadResult<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn i32(&mut self) -> PayloadResult<i32> {
        Ok(i32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> PayloadResult<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f32(&mut self) -> PayloadResult<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> PayloadResult<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn f32s(&mut self, n: usize) -> PayloadResult<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or((self.pos, "count overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.buf[self.pos..];
        self.pos = self.buf.len();
        s
    }

    fn end(&self) -> PayloadResult<()> {
        if self.pos != self.buf.len() {
            return Err((
                self.pos,
                format!("{} trailing bytes in {}", self.buf.len() - self.pos, self.name),
            ));
        }
        Ok(())
    }

    fn geometry(&mut self) -> PayloadResult<GeometryMsg> {
        let dims = [self.u32()?, self.u32()?, self.u32()?];
        let n = cell_count(dims).ok_or((self.pos, "cell count overflow".into()))?;
        // Checked before allocating: the remaining payload must hold 5 bytes per cell.
        let left = self.buf.len() - self.pos;
        if n.checked_mul(5) != Some(left) {
            return Err((
                self.pos,
                format!("dims {dims:?} need {} bytes of cells, payload has {left}", n.saturating_mul(5)),
            ));
        }
        let flags = self.take(n)?.to_vec();
        let fill = self.f32s(n)?;
        Ok(GeometryMsg { dims, flags, fill })
    }
}

fn type_name(t: u16) -> &'static str {
    match t {
        tag::HELLO => "HELLO",
        tag::GEOMETRY => "GEOMETRY",
        tag::START => "START",
        tag::PAUSE => "PAUSE",
        tag::RESUME => "RESUME",
        tag::RESET => "RESET",
        tag::SET_CELLS => "SET_CELLS",
        tag::MOVE_REGION => "MOVE_REGION",
        tag::SET_PARAM => "SET_PARAM",
        tag::SUBSCRIBE => "SUBSCRIBE",
        tag::UNSUBSCRIBE => "UNSUBSCRIBE",
        tag::FRAME => "FRAME",
        tag::STATS => "STATS",
        tag::ACK => "ACK",
        tag::ERROR => "ERROR",
        tag::BYE => "BYE",
        tag::STEP_N => "STEP_N",
        _ => "UNKNOWN",
    }
}

/// Decodes one payload of the given type. On error returns the offset
/// within the payload and a reason.
pub fn decode_payload(msg_type: u16, payload: &[u8]) -> Result<Message, (usize, String)> {
    let mut r = Reader {
        buf: payload,
        pos: 0,
        name: type_name(msg_type),
    };
    let msg = match msg_type {
        tag::HELLO => Message::Hello { version: r.u16()? },
        tag::GEOMETRY => Message::Geometry(r.geometry()?),
        tag::START => Message::Start,
        tag::PAUSE => Message::Pause,
        tag::RESUME => Message::Resume,
        tag::RESET => Message::Reset(r.geometry()?),
        tag::SET_CELLS => {
            let count = r.u32()? as usize;
            let left = payload.len() - r.pos;
            if count.checked_mul(13) != Some(left) {
                return Err((r.pos, format!("{count} cells need {} bytes, payload has {left}", count.saturating_mul(13))));
            }
            let mut cells = Vec::with_capacity(count);
            for _ in 0..count {
                cells.push(CellRecord {
                    index: r.u64()?,
                    flag: r.u8()?,
                    fill: r.f32()?,
                });
            }
            Message::SetCells(cells)
        }
        tag::MOVE_REGION => {
            let mut region = [0u32; 6];
            for v in &mut region {
                *v = r.u32()?;
            }
            Message::MoveRegion {
                region,
                offset: [r.i32()?, r.i32()?, r.i32()?],
            }
        }
        tag::SET_PARAM => {
            let id = r.u16()?;
            let rest = r.rest();
            if rest.len() % 8 != 0 {
                return Err((2, format!("{} value bytes is not a multiple of 8", rest.len())));
            }
            let values = rest
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Message::SetParam { id, values }
        }
        tag::SUBSCRIBE => Message::Subscribe {
            field: r.u16()?,
            axis: r.u8()?,
            index: r.u32()?,
            every_n: r.u32()?,
        },
        tag::UNSUBSCRIBE => Message::Unsubscribe { id: r.u32()? },
        tag::FRAME => {
            let subscription = r.u32()?;
            let iteration = r.u64()?;
            let dims = [r.u32()?, r.u32()?, r.u32()?];
            let n = cell_count(dims).ok_or((r.pos, "value count overflow".into()))?;
            let left = payload.len() - r.pos;
            if n.checked_mul(4) != Some(left) {
                return Err((r.pos, format!("dims {dims:?} need {} data bytes, payload has {left}", n.saturating_mul(4))));
            }
            Message::Frame(FrameMsg {
                subscription,
                iteration,
                dims,
                data: r.f32s(n)?,
            })
        }
        tag::STATS => Message::Stats {
            iteration: r.u64()?,
            it_per_sec: r.f64()?,
            mass: r.f64()?,
        },
        tag::ACK => Message::Ack { seq: r.u64()? },
        tag::ERROR => {
            let code = r.u16()?;
            let text = std::str::from_utf8(r.rest())
                .map_err(|e| (2 + e.valid_up_to(), "text is not UTF-8".to_string()))?
                .to_owned();
            Message::Error { code, text }
        }
        tag::BYE => Message::Bye,
        tag::STEP_N => Message::StepN { n: r.u64()? },
        other => Message::Unknown {
            msg_type: other,
            payload: r.rest().to_vec(),
        },
    };
    r.end()?;
    Ok(msg)
}

/// One-shot decode of a buffer holding whole messages.
pub fn decode_all(bytes: &[u8]) -> Result<Vec<Message>, ProtocolError> {
    let mut d = Decoder::new();
    d.push(bytes);
    let mut out = Vec::new();
    while let Some(m) = d.next_message()? {
        out.push(m);
    }
    d.finish()?;
    Ok(out)
}

/// Incremental decoder for a byte stream with arbitrary chunking. The
/// length prefix is checked against the cap before any payload is
/// buffered; after an error the decoder stays failed.
#[derive(Debug)]
pub struct Decoder {
    buf: Vec<u8>,
    start: usize,
    consumed: u64,
    cap: usize,
    failed: Option<ProtocolError>,
}

impl Default for Decoder {
    fn default() -> Self {
        Self::new()
    }
}

impl Decoder {
    pub fn new() -> Self {
        Self::with_cap(MAX_MESSAGE_LEN)
    }

    /// A decoder with a tighter length cap (never above the protocol cap).
    pub fn with_cap(cap: usize) -> Self {
        Decoder {
            buf: Vec::new(),
            start: 0,
            consumed: 0,
            cap: cap.min(MAX_MESSAGE_LEN),
            failed: None,
        }
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.failed.is_some() {
            return;
        }
        if self.start > 0 && self.start * 2 >= self.buf.len() {
            self.buf.drain(..self.start);
            self.start = 0;
        }
        self.buf.extend_from_slice(bytes);
        if let Err(e) = self.check_header() {
            self.failed = Some(e);
        }
    }

    /// Bytes received but not yet returned as messages.
    pub fn pending(&self) -> usize {
        self.buf.len() - self.start
    }

    fn fail(&mut self, kind: ProtocolErrorKind) -> ProtocolError {
        let e = ProtocolError {
            offset: self.consumed,
            kind,
        };
        self.failed = Some(e.clone());
        self.buf = Vec::new();
        self.start = 0;
        e
    }

    fn check_header(&mut self) -> Result<(), ProtocolError> {
        let avail = &self.buf[self.start..];
        if avail.len() < 4 {
            return Ok(());
        }
        let len = u32::from_le_bytes(avail[..4].try_into().unwrap());
        if len as usize > self.cap {
            return Err(self.fail(ProtocolErrorKind::TooLong(len as u64)));
        }
        if len < 2 {
            return Err(self.fail(ProtocolErrorKind::TooShort(len)));
        }
        Ok(())
    }

    /// Returns the next complete message, `Ok(None)` if more bytes are
    /// needed, or the protocol error that poisoned the stream.
    pub fn next_message(&mut self) -> Result<Option<Message>, ProtocolError> {
        if let Some(e) = &self.failed {
            return Err(e.clone());
        }
        self.check_header()?;
        let avail = &self.buf[self.start..];
        if avail.len() < 4 {
            return Ok(None);
        }
        let len = u32::from_le_bytes(avail[..4].try_into().unwrap()) as usize;
        if avail.len() < 4 + len {
            return Ok(None);
        }
        let msg_type = u16::from_le_bytes(avail[4..6].try_into().unwrap());
        let payload = &avail[6..4 + len];
        match decode_payload(msg_type, payload) {
            Ok(m) => {
                self.start += 4 + len;
                self.consumed += 4 + len as u64;
                if self.start == self.buf.len() {
                    self.buf.clear();
                    self.start = 0;
                }
                Ok(Some(m))
            }
            Err((at, reason)) => Err(self.fail(ProtocolErrorKind::Malformed {
                name: type_name(msg_type),
                reason: format!("{reason} (payload byte {at})"),
            })),
        }
    }

    /// Call at end of stream: leftover bytes are a truncated message.
    pub fn finish(&self) -> Result<(), ProtocolError> {
        if let Some(e) = &self.failed {
            return Err(e.clone());
        }
        if self.pending() > 0 {
            return Err(ProtocolError {
                offset: self.consumed,
                kind: ProtocolErrorKind::Truncated(self.pending()),
            });
        }
        Ok(())
    }
}
