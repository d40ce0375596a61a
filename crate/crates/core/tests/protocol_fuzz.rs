use packer_core::kinematics::{DeltaGeometry, Pose};
use packer_core::protocol::{
    decode_command, decode_reply, encode_command, encode_reply, Command, ErrorCode, ProtocolError, RobotCommand,
    RobotReply, MAX_FRAME_BYTES,
};
use packer_core::sim::{SessionState, SimConfig, SimRobot};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Finite doubles from several regimes, including raw bit patterns.
fn any_finite(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v = match rng.random_range(0..4) {
            0 => rng.random_range(-1000.0..1000.0),
            1 => rng.random_range(-100i64..100) as f64,
            2 => f64::from_bits(rng.random()),
            _ => rng.random_range(-1e-300..1e-300),
        };
        if v.is_finite() {
            return v;
        }
    }
}

fn random_command(rng: &mut ChaCha8Rng) -> RobotCommand {
    let command = match rng.random_range(0..5) {
        0 => Command::Move {
            x: any_finite(rng),
            y: any_finite(rng),
            z: any_finite(rng),
        },
        1 => Command::Yaw { deg: any_finite(rng) },
        2 => Command::Grip { width_mm: any_finite(rng) },
        3 => Command::Open { width_mm: any_finite(rng) },
        _ => Command::Status,
    };
    RobotCommand {
        seq: rng.random(),
        command,
    }
}

#[test]
fn ten_thousand_commands_round_trip_byte_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let cmd = random_command(&mut rng);
        let frame = encode_command(&cmd).unwrap();
        assert!(frame.len() <= MAX_FRAME_BYTES);
        assert_eq!(frame.iter().filter(|&&b| b == b'\n').count(), 1);
        let back = decode_command(&frame).unwrap();
        let again = encode_command(&back).unwrap();
        let same_bits = match (cmd.command, back.command) {
            (Command::Move { x, y, z }, Command::Move { x: a, y: b, z: c }) => {
                x.to_bits() == a.to_bits() && y.to_bits() == b.to_bits() && z.to_bits() == c.to_bits()
            }
            (Command::Yaw { deg: a }, Command::Yaw { deg: b })
            | (Command::Grip { width_mm: a }, Command::Grip { width_mm: b })
            | (Command::Open { width_mm: a }, Command::Open { width_mm: b }) => a.to_bits() == b.to_bits(),
            (Command::Status, Command::Status) => true,
            _ => false,
        };
        if back != cmd || again != frame || !same_bits {
            mismatches += 1;
        }
    }
    assert_eq!(mismatches, 0);
}

#[test]
fn replies_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let codes = [None, Some(ErrorCode::Unreachable), Some(ErrorCode::WidthExceedsGripper), Some(ErrorCode::SequenceOutOfOrder)];
    for _ in 0..2000 {
        let reply = RobotReply {
            seq: rng.random(),
            ok: rng.random(),
            pose: Pose::new(any_finite(&mut rng), any_finite(&mut rng), any_finite(&mut rng), any_finite(&mut rng)),
            grip_width_mm: rng.random_range(0.0..80.0),
            force_n: rng.random_range(0.0..50.0),
            grasped: rng.random(),
            error: codes[rng.random_range(0..codes.len())],
        };
        let frame = encode_reply(&reply).unwrap();
        let back = decode_reply(&frame).unwrap();
        assert_eq!(back, reply);
        assert_eq!(encode_reply(&back).unwrap(), frame);
    }
}

fn malformed_corpus() -> Vec<Vec<u8>> {
    let valid = encode_command(&RobotCommand {
        seq: 3,
        command: Command::Move { x: 10.0, y: -5.0, z: -420.0 },
    })
    .unwrap();
    let mut corpus: Vec<Vec<u8>> = (0..valid.len() - 1)
        .map(|n| {
            let mut t = valid[..n].to_vec();
            t.push(b'\n');
            t
        })
        .collect();
    corpus.push(valid[..valid.len() - 1].to_vec());
    let mut huge = br#"{"seq":1,"cmd":"STATUS","pad":""#.to_vec();
    huge.extend(std::iter::repeat_n(b'a', 5000));
    huge.extend(b"\"}\n");
    corpus.push(huge);
    for s in [
        "{\"cmd\":\"FLY\"}\n",
        "{\"seq\":9,\"cmd\":\"FLY\"}\n",
        "{\"seq\":-1,\"cmd\":\"STATUS\"}\n",
        "{\"seq\":1.5,\"cmd\":\"STATUS\"}\n",
        "{\"seq\":1,\"cmd\":\"MOVE\",\"x\":1,\"y\":2}\n",
        "{\"seq\":1,\"cmd\":\"MOVE\",\"x\":1,\"y\":2,\"z\":\"3\"}\n",
        "{\"seq\":1,\"cmd\":\"GRIP\",\"width_mm\":null}\n",
        "{\"seq\":1,\"cmd\":\"STATUS\",\"extra\":true}\n",
        "{\"seq\":1,\"cmd\":7}\n",
        "[1,2,3]\n",
        "\n",
        "{\"seq\":1,\"cmd\":\"STATUS\"}\n{\"seq\":2,\"cmd\":\"STATUS\"}\n",
        "{\"seq\":1,\"cmd\":\"MOVE\",\"x\":1e999,\"y\":0,\"z\":0}\n",
    ] {
        corpus.push(s.as_bytes().to_vec());
    }
    corpus.push(vec![0xff, 0xfe, b'\n']);
    corpus
}

#[test]
fn malformed_frames_are_rejected_without_panicking() {
    let mut robot = SimRobot::new(DeltaGeometry::default(), SimConfig::default(), vec![], 0).unwrap();
    let mut session = SessionState::new();
    let home = robot.pose();
    for frame in malformed_corpus() {
        assert!(decode_command(&frame).is_err(), "{:?}", String::from_utf8_lossy(&frame));
        let reply = session.handle_frame(&mut robot, &frame);
        assert!(!reply.ok);
        assert!(matches!(
            reply.error,
            Some(ErrorCode::MalformedFrame | ErrorCode::UnknownCommand | ErrorCode::FrameTooLong)
        ));
        assert_eq!(robot.pose(), home);
    }
    assert_eq!(decode_command(b"{\"cmd\":\"FLY\"}\n"), Err(ProtocolError::UnknownCommand("FLY".into())));
    let ok = session.handle_frame(&mut robot, b"{\"seq\":1,\"cmd\":\"STATUS\"}\n");
    assert!(ok.ok);
}

proptest! {
    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..600)) {
        let mut robot = SimRobot::new(DeltaGeometry::default(), SimConfig::default(), vec![], 0).unwrap();
        let mut session = SessionState::new();
        let _ = decode_command(&bytes);
        let _ = decode_reply(&bytes);
        let _ = session.handle_frame(&mut robot, &bytes);
    }

    #[test]
    fn reply_seq_echoes_request(seq in 1u64..u64::MAX, x in -50.0f64..50.0) {
        let mut robot = SimRobot::new(DeltaGeometry::default(), SimConfig::default(), vec![], 0).unwrap();
        let mut session = SessionState::new();
        let frame = encode_command(&RobotCommand { seq, command: Command::Move { x, y: 0.0, z: -450.0 } }).unwrap();
        let reply = session.handle_frame(&mut robot, &frame);
        prop_assert_eq!(reply.seq, seq);
        prop_assert!(reply.ok);
    }
}
