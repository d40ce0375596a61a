//! Executor and simulator talking over real TCP sockets.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use packer::client::TcpLink;
use packer::server::{ServerHandle, SimServer};
use packer_core::calibration::{fit_calibration, CalibrationModel, PlaneMap};
use packer_core::executor::{ActionStatus, Executor, ExecutionReport, NoRescan};
use packer_core::geometry::GraspPlan;
use packer_core::kinematics::DeltaGeometry;
use packer_core::link::{LinkError, RobotLink};
use packer_core::planner::{ActionKind, LabelConfig, PickPlaceAction, PlacePose, Plan};
use packer_core::protocol::{decode_reply, ErrorCode};
use packer_core::sim::{ObjectState, SimConfig, SimObject, SimRobot};
use packer_core::Point;

const TIMEOUT: Duration = Duration::from_secs(5);

fn object(label: &str, x: f64, y: f64, psi: f64, width: f64) -> SimObject {
    SimObject {
        label: label.into(),
        center: Point::new(x, y),
        psi,
        width_mm: width,
        depth_mm: -470.0,
        state: ObjectState::Laying,
        graspable: true,
        round: false,
    }
}

fn action(label: &str, src: Point, psi: f64, width: f64, dst: Point) -> PickPlaceAction {
    let half = Point::from_angle(psi) * (width / 2.0);
    PickPlaceAction {
        kind: ActionKind::PickPlace,
        object_id: 0,
        slot: 0,
        label: label.into(),
        confidence: 0.9,
        source: GraspPlan {
            label: label.into(),
            p1: src + half,
            p2: src - half,
            center: src,
            psi,
            width_px: width,
            width_mm: Some(width),
            depth_mm: None,
        },
        destination: PlacePose { x: dst.x, y: dst.y, psi: 0.0 },
        depth_mm: -470.0,
    }
}

fn identity_calibration() -> CalibrationModel {
    let plane = |h| PlaneMap {
        height_mm: h,
        linear: [[1.0, 0.0], [0.0, 1.0]],
        offset: [0.0, 0.0],
        rms_residual_mm: 0.0,
    };
    fit_calibration(vec![plane(400.0), plane(600.0)]).unwrap()
}

fn spawn(objects: Vec<SimObject>, latency: Duration) -> ServerHandle {
    let robot = SimRobot::new(DeltaGeometry::default(), SimConfig::default(), objects, 3).unwrap();
    SimServer::bind("127.0.0.1:0", robot).unwrap().with_latency(latency).spawn().unwrap()
}

fn execute(plan: &Plan, link: &mut TcpLink) -> ExecutionReport {
    let geometry = DeltaGeometry::default();
    let calibration = identity_calibration();
    let config = LabelConfig::default_catering();
    let executor = Executor {
        geometry: &geometry,
        calibration: Some(&calibration),
        config: &config,
    };
    executor.execute(plan, link, &mut NoRescan)
}

fn raw_exchange(stream: &TcpStream, reader: &mut BufReader<TcpStream>, frame: &[u8]) -> packer_core::protocol::RobotReply {
    let mut w = stream;
    w.write_all(frame).unwrap();
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line).unwrap();
    decode_reply(&line).unwrap()
}

fn raw_connect(server: &ServerHandle) -> (TcpStream, BufReader<TcpStream>) {
    let stream = TcpStream::connect(server.addr()).unwrap();
    stream.set_read_timeout(Some(TIMEOUT)).unwrap();
    let reader = BufReader::new(stream.try_clone().unwrap());
    (stream, reader)
}

#[test]
fn pick_place_moves_the_object_to_its_destination() {
    let server = spawn(vec![object("fork", -40.0, 20.0, 30.0, 22.0)], Duration::ZERO);
    let plan = Plan {
        actions: vec![action("fork", Point::new(-40.0, 20.0), 30.0, 22.0, Point::new(60.0, -10.0))],
        missing: vec![],
    };
    let mut link = TcpLink::connect(server.addr(), TIMEOUT).unwrap();
    let report = execute(&plan, &mut link);
    assert!(report.all_succeeded(), "{report:?}");
    assert_eq!(report.placements, 1);
    assert_eq!(report.commands_sent, 11);
    assert_eq!(link.commands_sent(), 11);
    let robot = server.snapshot();
    assert!(robot.objects()[0].center.distance(Point::new(60.0, -10.0)) < 1e-6);
    assert_eq!(robot.held(), None);
}

#[test]
fn malformed_and_oversized_frames_leave_the_session_usable() {
    let server = spawn(vec![], Duration::ZERO);
    let (stream, mut reader) = raw_connect(&server);
    let reply = raw_exchange(&stream, &mut reader, b"not json\n");
    assert_eq!(reply.error, Some(ErrorCode::MalformedFrame));
    let reply = raw_exchange(&stream, &mut reader, b"{\"seq\":5,\"cmd\":\"JUMP\"}\n");
    assert_eq!(reply.error, Some(ErrorCode::UnknownCommand));
    let mut huge = vec![b' '; 10_000];
    huge.push(b'\n');
    let reply = raw_exchange(&stream, &mut reader, &huge);
    assert_eq!(reply.error, Some(ErrorCode::FrameTooLong));
    let reply = raw_exchange(&stream, &mut reader, b"{\"seq\":1,\"cmd\":\"STATUS\"}\n");
    assert!(reply.ok);
    assert_eq!(reply.seq, 1);
}

#[test]
fn sequence_numbers_are_checked_per_connection() {
    let server = spawn(vec![], Duration::ZERO);
    let (a, mut ra) = raw_connect(&server);
    let (b, mut rb) = raw_connect(&server);
    assert!(raw_exchange(&a, &mut ra, b"{\"seq\":7,\"cmd\":\"STATUS\"}\n").ok);
    let stale = raw_exchange(&a, &mut ra, b"{\"seq\":7,\"cmd\":\"STATUS\"}\n");
    assert_eq!(stale.error, Some(ErrorCode::SequenceOutOfOrder));
    // A fresh connection starts its own count.
    assert!(raw_exchange(&b, &mut rb, b"{\"seq\":1,\"cmd\":\"STATUS\"}\n").ok);
}

#[test]
fn connections_share_one_robot() {
    let server = spawn(vec![], Duration::ZERO);
    let mut first = TcpLink::connect(server.addr(), TIMEOUT).unwrap();
    let mut second = TcpLink::connect(server.addr(), TIMEOUT).unwrap();
    assert!(first.move_to(30.0, -20.0, -450.0).unwrap().ok);
    let pose = second.status().unwrap().pose;
    assert!((pose.x - 30.0).abs() < 1e-9 && (pose.y + 20.0).abs() < 1e-9 && (pose.z + 450.0).abs() < 1e-9);
}

#[test]
fn slow_robot_times_out() {
    let server = spawn(vec![], Duration::from_millis(400));
    let mut link = TcpLink::connect(server.addr(), Duration::from_millis(50)).unwrap();
    assert_eq!(link.status().unwrap_err(), LinkError::Timeout);
}

#[test]
fn refused_connection_is_reported() {
    let addr = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    assert!(matches!(TcpLink::connect(addr, TIMEOUT), Err(LinkError::ConnectFailed(_))));
}

#[test]
fn robot_hanging_up_loses_the_session() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let peer = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut line = String::new();
        BufReader::new(&stream).read_line(&mut line).unwrap();
    });
    let mut link = TcpLink::connect(addr, TIMEOUT).unwrap();
    let plan = Plan {
        actions: vec![
            action("fork", Point::new(0.0, 0.0), 0.0, 22.0, Point::new(50.0, 0.0)),
            action("knife", Point::new(20.0, 0.0), 0.0, 18.0, Point::new(60.0, 0.0)),
        ],
        missing: vec![],
    };
    let report = execute(&plan, &mut link);
    peer.join().unwrap();
    assert!(report.session_lost.is_some());
    assert_eq!(report.placements, 0);
    assert_eq!(report.outcomes.last().unwrap().status, ActionStatus::NotAttempted);
}

#[test]
fn low_pass_over_a_standing_object_knocks_it_over() {
    let mut cup = object("cup(standing)", 0.0, 0.0, 0.0, 62.0);
    cup.state = ObjectState::Standing;
    cup.depth_mm = -430.0;
    let server = spawn(vec![cup], Duration::ZERO);
    let mut link = TcpLink::connect(server.addr(), TIMEOUT).unwrap();
    assert!(link.move_to(-60.0, 0.0, -420.0).unwrap().ok);
    assert_eq!(server.snapshot().objects()[0].state, ObjectState::Standing);
    assert!(link.move_to(60.0, 0.0, -420.0).unwrap().ok);
    assert_eq!(server.snapshot().objects()[0].state, ObjectState::Laying);
}

#[test]
fn ungraspable_object_fails_and_the_plan_continues() {
    let mut teabag = object("teabag", -50.0, 0.0, 0.0, 50.0);
    teabag.graspable = false;
    let server = spawn(vec![teabag, object("fork", 30.0, 30.0, 90.0, 22.0)], Duration::ZERO);
    let plan = Plan {
        actions: vec![
            action("teabag", Point::new(-50.0, 0.0), 0.0, 50.0, Point::new(80.0, 0.0)),
            action("fork", Point::new(30.0, 30.0), 90.0, 22.0, Point::new(80.0, -40.0)),
        ],
        missing: vec![],
    };
    let mut link = TcpLink::connect(server.addr(), TIMEOUT).unwrap();
    let report = execute(&plan, &mut link);
    assert_eq!(report.outcomes[0].status, ActionStatus::GraspFailed);
    assert_eq!(report.outcomes[1].status, ActionStatus::Succeeded);
    let robot = server.snapshot();
    assert!(robot.objects()[0].center.distance(Point::new(-50.0, 0.0)) < 1e-9);
    assert!(robot.objects()[1].center.distance(Point::new(80.0, -40.0)) < 1e-6);
}

#[test]
fn empty_plan_sends_no_commands() {
    let server = spawn(vec![], Duration::ZERO);
    let mut link = TcpLink::connect(server.addr(), TIMEOUT).unwrap();
    let report = execute(&Plan::default(), &mut link);
    assert_eq!(report.commands_sent, 0);
    assert_eq!(link.commands_sent(), 0);
    assert!(report.all_succeeded());
}
