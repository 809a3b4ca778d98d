use lbsteer::protocol::*;
use rand::Rng;

fn small_vec<T>(rng: &mut impl Rng, max: usize, mut f: impl FnMut(&mut dyn rand::RngCore) -> T) -> Vec<T> {
    let n = rng.gen_range(0..=max);
    (0..n).map(|_| f(rng)).collect()
}

fn finite_f32(rng: &mut dyn rand::RngCore) -> f32 {
    match rng.gen_range(0..4) {
        0 => 0.0,
        1 => rng.gen_range(-1.0f32..1.0),
        2 => f32::from_bits(rng.gen_range(0..0x7f00_0000u32)) * if rng.gen() { 1.0 } else { -1.0 },
        _ => rng.gen_range(-1e6f32..1e6),
    }
}

fn finite_f64(rng: &mut dyn rand::RngCore) -> f64 {
    match rng.gen_range(0..3) {
        0 => rng.gen_range(-1.0..1.0),
        1 => f64::from_bits(rng.gen_range(0..0x7fe0_0000_0000_0000u64)),
        _ => -f64::from_bits(rng.gen_range(0..0x7fe0_0000_0000_0000u64)),
    }
}

fn geometry(rng: &mut impl Rng) -> GeometryMsg {
    let dims = [rng.gen_range(0..6), rng.gen_range(0..6), rng.gen_range(0..3)];
    let n = (dims[0] * dims[1] * dims[2]) as usize;
    GeometryMsg {
        dims,
        flags: (0..n).map(|_| rng.gen()).collect(),
        fill: (0..n).map(|_| finite_f32(rng)).collect(),
    }
}

fn text(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(0..24);
    (0..n)
        .map(|_| match rng.gen_range(0..4) {
            0 => 'é',
            1 => '水',
            _ => rng.gen_range(' '..='~'),
        })
        .collect()
}

/// A random valid message with finite floats, so `==` is exact.
pub fn random_message(rng: &mut impl Rng) -> Message {
    match rng.gen_range(0..18) {
        0 => Message::Hello { version: rng.gen() },
        1 => Message::Geometry(geometry(rng)),
        2 => Message::Start,
        3 => Message::Pause,
        4 => Message::Resume,
        5 => Message::Reset(geometry(rng)),
        6 => Message::SetCells(small_vec(rng, 8, |r| CellRecord {
            index: r.gen(),
            flag: r.gen(),
            fill: finite_f32(r),
        })),
        7 => Message::MoveRegion {
            region: rng.gen(),
            offset: rng.gen(),
        },
        8 => Message::SetParam {
            id: rng.gen(),
            values: small_vec(rng, 9, finite_f64),
        },
        9 => Message::Subscribe {
            field: rng.gen(),
            axis: rng.gen(),
            index: rng.gen(),
            every_n: rng.gen(),
        },
        10 => Message::Unsubscribe { id: rng.gen() },
        11 => {
            let dims = [rng.gen_range(0..8), rng.gen_range(0..5), rng.gen_range(1..4)];
            let n = (dims[0] * dims[1] * dims[2]) as usize;
            Message::Frame(FrameMsg {
                subscription: rng.gen(),
                iteration: rng.gen(),
                dims,
                data: (0..n).map(|_| finite_f32(rng)).collect(),
            })
        }
        12 => Message::Stats {
            iteration: rng.gen(),
            it_per_sec: finite_f64(rng),
            mass: finite_f64(rng),
        },
        13 => Message::Ack { seq: rng.gen() },
        14 => Message::Error {
            code: rng.gen(),
            text: text(rng),
        },
        15 => Message::Bye,
        16 => Message::StepN { n: rng.gen() },
        _ => Message::Unknown {
            msg_type: rng.gen_range(18..=u16::MAX),
            payload: small_vec(rng, 16, |r| r.gen()),
        },
    }
}

/// Splits `bytes` at random points into chunks of 0..=max_chunk bytes.
pub fn rechunk<'a>(rng: &mut impl Rng, bytes: &'a [u8], max_chunk: usize) -> Vec<&'a [u8]> {
    let mut out = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        let n = rng.gen_range(0..=max_chunk).min(bytes.len() - at);
        out.push(&bytes[at..at + n]);
        at += n;
    }
    out
}

pub fn decode_chunks(chunks: &[&[u8]]) -> Result<Vec<Message>, ProtocolError> {
    let mut d = Decoder::new();
    let mut out = Vec::new();
    for c in chunks {
        d.push(c);
        while let Some(m) = d.next_message()? {
            out.push(m);
        }
    }
    d.finish()?;
    Ok(out)
}
