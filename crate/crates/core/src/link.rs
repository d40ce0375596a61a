//! Transport-agnostic robot session.

use alloc::rc::Rc;
use alloc::string::String;
use core::cell::RefCell;

use crate::protocol::{decode_reply, encode_command, encode_reply, Command, RobotCommand, RobotReply};
use crate::sim::{SessionState, SimRobot};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinkError {
    #[error("connect failed: {0}")]
    ConnectFailed(String),
    #[error("no reply within the timeout")]
    Timeout,
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// One request in flight at a time; the reply answers the command just sent.
pub trait RobotLink {
    fn send(&mut self, command: Command) -> Result<RobotReply, LinkError>;

    fn move_to(&mut self, x: f64, y: f64, z: f64) -> Result<RobotReply, LinkError> {
        self.send(Command::Move { x, y, z })
    }

    fn set_yaw(&mut self, deg: f64) -> Result<RobotReply, LinkError> {
        self.send(Command::Yaw { deg })
    }

    fn grip(&mut self, width_mm: f64) -> Result<RobotReply, LinkError> {
        self.send(Command::Grip { width_mm })
    }

    fn open(&mut self, width_mm: f64) -> Result<RobotReply, LinkError> {
        self.send(Command::Open { width_mm })
    }

    fn status(&mut self) -> Result<RobotReply, LinkError> {
        self.send(Command::Status)
    }
}

impl<L: RobotLink + ?Sized> RobotLink for &mut L {
    fn send(&mut self, command: Command) -> Result<RobotReply, LinkError> {
        (**self).send(command)
    }
}

/// Drives an in-process [`SimRobot`] through the same wire encoding a TCP
/// session uses. The robot is shared so a scene source can observe it.
#[derive(Debug)]
pub struct LocalLink {
    robot: Rc<RefCell<SimRobot>>,
    session: SessionState,
    seq: u64,
}

impl LocalLink {
    pub fn new(robot: SimRobot) -> Self {
        Self::shared(Rc::new(RefCell::new(robot)))
    }

    pub fn shared(robot: Rc<RefCell<SimRobot>>) -> Self {
        Self {
            robot,
            session: SessionState::new(),
            seq: 0,
        }
    }

    pub fn robot(&self) -> Rc<RefCell<SimRobot>> {
        Rc::clone(&self.robot)
    }

    pub fn commands_sent(&self) -> u64 {
        self.seq
    }
}

impl RobotLink for LocalLink {
    fn send(&mut self, command: Command) -> Result<RobotReply, LinkError> {
        self.seq += 1;
        let request = RobotCommand { seq: self.seq, command };
        let frame = encode_command(&request).map_err(|e| LinkError::Protocol(alloc::format!("{e}")))?;
        let reply = self.session.handle_frame(&mut self.robot.borrow_mut(), &frame);
        let bytes = encode_reply(&reply).map_err(|e| LinkError::Protocol(alloc::format!("{e}")))?;
        let reply = decode_reply(&bytes).map_err(|e| LinkError::Protocol(alloc::format!("{e}")))?;
        if reply.seq != self.seq {
            return Err(LinkError::Protocol(alloc::format!(
                "reply seq {} does not answer {}",
                reply.seq, self.seq
            )));
        }
        Ok(reply)
    }
}
