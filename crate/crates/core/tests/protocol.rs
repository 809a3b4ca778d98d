mod common;

use common::wire::*;
use lbsteer::protocol::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn pause_bytes() {
    assert_eq!(encode(&Message::Pause).unwrap(), [2, 0, 0, 0, 4, 0]);
}

#[test]
fn set_param_tau_bytes() {
    let bytes = encode(&Message::SetParam {
        id: param::TAU,
        values: vec![1.0],
    })
    .unwrap();
    let mut expected = vec![12, 0, 0, 0, 9, 0, 1, 0];
    expected.extend_from_slice(&1.0f64.to_le_bytes());
    assert_eq!(bytes, expected);
    assert_eq!(&bytes[8..], &[0, 0, 0, 0, 0, 0, 0xf0, 0x3f]);
}

#[test]
fn fixed_layouts() {
    let cases: Vec<(Message, Vec<u8>)> = vec![
        (Message::Hello { version: 1 }, vec![4, 0, 0, 0, 1, 0, 1, 0]),
        (Message::Start, vec![2, 0, 0, 0, 3, 0]),
        (Message::Bye, vec![2, 0, 0, 0, 16, 0]),
        (
            Message::Ack { seq: 0x0102 },
            vec![10, 0, 0, 0, 14, 0, 2, 1, 0, 0, 0, 0, 0, 0],
        ),
        (
            Message::Unsubscribe { id: 7 },
            vec![6, 0, 0, 0, 11, 0, 7, 0, 0, 0],
        ),
        (
            Message::Subscribe {
                field: 5,
                axis: 2,
                index: 3,
                every_n: 10,
            },
            vec![13, 0, 0, 0, 10, 0, 5, 0, 2, 3, 0, 0, 0, 10, 0, 0, 0],
        ),
        (
            Message::Error {
                code: 3,
                text: "bad".into(),
            },
            vec![7, 0, 0, 0, 15, 0, 3, 0, b'b', b'a', b'd'],
        ),
        (
            Message::MoveRegion {
                region: [1, 2, 0, 3, 4, 1],
                offset: [1, -1, 0],
            },
            [
                &[38u8, 0, 0, 0, 8, 0][..],
                &[1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 3, 0, 0, 0, 4, 0, 0, 0, 1, 0, 0, 0],
                &[1, 0, 0, 0, 0xff, 0xff, 0xff, 0xff, 0, 0, 0, 0],
            ]
            .concat(),
        ),
        (
            Message::SetCells(vec![CellRecord {
                index: 5,
                flag: 3,
                fill: 0.5,
            }]),
            [
                &[19u8, 0, 0, 0, 7, 0, 1, 0, 0, 0][..],
                &[5, 0, 0, 0, 0, 0, 0, 0, 3],
                &0.5f32.to_le_bytes(),
            ]
            .concat(),
        ),
        (
            Message::Geometry(GeometryMsg {
                dims: [2, 1, 1],
                flags: vec![1, 3],
                fill: vec![1.0, 0.0],
            }),
            [
                &[24u8, 0, 0, 0, 2, 0][..],
                &[2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 3],
                &1.0f32.to_le_bytes(),
                &0.0f32.to_le_bytes(),
            ]
            .concat(),
        ),
        (
            Message::Frame(FrameMsg {
                subscription: 9,
                iteration: 10,
                dims: [1, 1, 1],
                data: vec![2.0],
            }),
            [
                &[30u8, 0, 0, 0, 12, 0][..],
                &[9, 0, 0, 0, 10, 0, 0, 0, 0, 0, 0, 0],
                &[1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0],
                &2.0f32.to_le_bytes(),
            ]
            .concat(),
        ),
        (
            Message::StepN { n: 100 },
            vec![10, 0, 0, 0, 17, 0, 100, 0, 0, 0, 0, 0, 0, 0],
        ),
    ];
    for (msg, bytes) in cases {
        assert_eq!(encode(&msg).unwrap(), bytes, "{}", msg.name());
        assert_eq!(decode_all(&bytes).unwrap(), vec![msg]);
    }
}

#[test]
fn random_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50_000 {
        let m = random_message(&mut rng);
        let bytes = encode(&m).unwrap();
        assert_eq!(bytes.len(), u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize + 4);
        assert_eq!(decode_all(&bytes).unwrap(), vec![m]);
    }
}

#[test]
fn nan_payloads_survive_bit_for_bit() {
    let m = Message::Frame(FrameMsg {
        subscription: 1,
        iteration: 2,
        dims: [3, 1, 1],
        data: vec![f32::NAN, f32::from_bits(0x7fc0_1234), -0.0],
    });
    let bytes = encode(&m).unwrap();
    let back = decode_all(&bytes).unwrap();
    assert_eq!(encode(&back[0]).unwrap(), bytes);
}

proptest! {
    #[test]
    fn rechunking_is_invariant(seed in any::<u64>(), count in 1usize..40, max_chunk in 1usize..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let msgs: Vec<Message> = (0..count).map(|_| random_message(&mut rng)).collect();
        let mut stream = Vec::new();
        for m in &msgs {
            encode_into(m, &mut stream).unwrap();
        }
        let chunks = rechunk(&mut rng, &stream, max_chunk);
        prop_assert_eq!(decode_chunks(&chunks).unwrap(), msgs);
    }
}

#[test]
fn byte_at_a_time_matches_one_shot() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let msgs: Vec<Message> = (0..200).map(|_| random_message(&mut rng)).collect();
    let mut stream = Vec::new();
    for m in &msgs {
        encode_into(m, &mut stream).unwrap();
    }
    let singles: Vec<&[u8]> = stream.chunks(1).collect();
    assert_eq!(decode_chunks(&singles).unwrap(), decode_all(&stream).unwrap());
    assert_eq!(decode_all(&stream).unwrap(), msgs);
}

#[test]
fn oversized_length_is_rejected_from_the_header() {
    let mut d = Decoder::new();
    d.push(&(2u32 << 30).to_le_bytes());
    let err = d.next_message().unwrap_err();
    assert_eq!(err.offset, 0);
    assert!(matches!(err.kind, ProtocolErrorKind::TooLong(2147483648)));
    assert_eq!(d.pending(), 0, "nothing may be buffered after a cap violation");
    // Poisoned: later bytes are ignored.
    d.push(&encode(&Message::Start).unwrap());
    assert!(d.next_message().is_err());

    let mut d = Decoder::new();
    d.push(&encode(&Message::Start).unwrap());
    d.push(&((MAX_MESSAGE_LEN + 1) as u32).to_le_bytes());
    assert_eq!(d.next_message().unwrap(), Some(Message::Start));
    let err = d.next_message().unwrap_err();
    assert_eq!(err.offset, 6);

    let mut d = Decoder::new();
    d.push(&[1, 0, 0, 0, 3]);
    assert!(matches!(
        d.next_message().unwrap_err().kind,
        ProtocolErrorKind::TooShort(1)
    ));
}

#[test]
fn encoder_enforces_the_cap() {
    let n = MAX_MESSAGE_LEN / 4;
    let big = Message::Frame(FrameMsg {
        subscription: 0,
        iteration: 0,
        dims: [n as u32, 1, 1],
        data: vec![0.0; n],
    });
    assert!(matches!(encode(&big), Err(EncodeError::TooLarge { .. })));
    let ok = n - 7;
    let fits = Message::Frame(FrameMsg {
        subscription: 0,
        iteration: 0,
        dims: [ok as u32, 1, 1],
        data: vec![0.0; ok],
    });
    let len = encode(&fits).unwrap().len();
    assert_eq!(len, 4 + 2 + 24 + 4 * ok);
    assert!(len - 4 <= MAX_MESSAGE_LEN && len - 4 + 4 > MAX_MESSAGE_LEN);
}

#[test]
fn malformed_payloads_name_their_offset() {
    // HELLO with one byte, preceded by a valid START.
    let mut stream = encode(&Message::Start).unwrap();
    stream.extend_from_slice(&[3, 0, 0, 0, 1, 0, 9]);
    let mut d = Decoder::new();
    d.push(&stream);
    assert_eq!(d.next_message().unwrap(), Some(Message::Start));
    let err = d.next_message().unwrap_err();
    assert_eq!(err.offset, 6);
    assert!(err.to_string().contains("HELLO"), "{err}");

    let bad: Vec<Vec<u8>> = vec![
        // START with a payload.
        vec![3, 0, 0, 0, 3, 0, 0],
        // GEOMETRY whose dims disagree with the payload.
        [&[18u8, 0, 0, 0, 2, 0][..], &[2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0]].concat(),
        // SET_CELLS count larger than the records present.
        vec![6, 0, 0, 0, 7, 0, 5, 0, 0, 0],
        // SET_PARAM with a partial f64.
        vec![7, 0, 0, 0, 9, 0, 1, 0, 0, 0, 0],
        // ERROR text that is not UTF-8.
        vec![5, 0, 0, 0, 15, 0, 1, 0, 0xff],
        // FRAME with missing data.
        [&[26u8, 0, 0, 0, 12, 0][..], &[0; 12], &[1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0]].concat(),
    ];
    for b in bad {
        let err = decode_all(&b).unwrap_err();
        assert!(matches!(err.kind, ProtocolErrorKind::Malformed { .. }), "{err}");
    }
}

#[test]
fn geometry_with_huge_dims_fails_without_allocating() {
    let payload = [u32::MAX.to_le_bytes(), u32::MAX.to_le_bytes(), 2u32.to_le_bytes()].concat();
    let mut msg = ((payload.len() + 2) as u32).to_le_bytes().to_vec();
    msg.extend_from_slice(&2u16.to_le_bytes());
    msg.extend_from_slice(&payload);
    assert!(decode_all(&msg).is_err());
}

#[test]
fn truncated_stream_is_reported_at_close() {
    let bytes = encode(&Message::Ack { seq: 3 }).unwrap();
    let mut d = Decoder::new();
    d.push(&bytes[..bytes.len() - 1]);
    assert_eq!(d.next_message().unwrap(), None);
    assert!(matches!(
        d.finish().unwrap_err().kind,
        ProtocolErrorKind::Truncated(13)
    ));
}

#[test]
fn unknown_types_are_skipped_by_length() {
    let mut stream = encode(&Message::Start).unwrap();
    stream.extend_from_slice(&[5, 0, 0, 0, 0xe8, 0x03, 1, 2, 3]);
    stream.extend(encode(&Message::Pause).unwrap());
    let msgs = decode_all(&stream).unwrap();
    assert_eq!(msgs.len(), 3);
    assert_eq!(
        msgs[1],
        Message::Unknown {
            msg_type: 1000,
            payload: vec![1, 2, 3]
        }
    );
    assert!(!known_type(1000));
    assert_eq!(msgs[2], Message::Pause);
    assert!(encode(&Message::Unknown {
        msg_type: tag::ACK,
        payload: vec![]
    })
    .is_err());
}

#[test]
fn concatenations_decode_in_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let n = rng.gen_range(0..60);
        let msgs: Vec<Message> = (0..n).map(|_| random_message(&mut rng)).collect();
        let mut stream = Vec::new();
        for m in &msgs {
            encode_into(m, &mut stream).unwrap();
        }
        assert_eq!(decode_all(&stream).unwrap(), msgs);
    }
}

#[test]
fn golden_vectors_match_checked_in_file() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../testdata/test-vectors.bin");
    let file = std::fs::read(path).expect("testdata/test-vectors.bin is checked in");
    let expected = lbsteer::protocol::golden::encode_vectors();
    assert_eq!(file, expected, "regenerate with `lbsteer test-vectors`");
    let msgs = decode_all(&file).unwrap();
    assert_eq!(msgs, lbsteer::protocol::golden::messages());
}
