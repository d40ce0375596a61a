//! Robot session over TCP: one newline-terminated JSON request, one reply.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use packer_core::link::{LinkError, RobotLink};
use packer_core::protocol::{decode_reply, encode_command, Command, RobotCommand, RobotReply, MAX_FRAME_BYTES};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug)]
pub struct TcpLink {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    seq: u64,
}

fn io_error(e: io::Error) -> LinkError {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => LinkError::Timeout,
        _ => LinkError::Io(e.to_string()),
    }
}

impl TcpLink {
    /// Connects to the first resolved address; `timeout` bounds the connect
    /// and every reply.
    pub fn connect(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Self, LinkError> {
        let addrs: Vec<_> = addr
            .to_socket_addrs()
            .map_err(|e| LinkError::ConnectFailed(e.to_string()))?
            .collect();
        let mut last = String::from("no address resolved");
        for a in addrs {
            match TcpStream::connect_timeout(&a, timeout) {
                Ok(stream) => return Self::from_stream(stream, timeout),
                Err(e) => last = format!("{a}: {e}"),
            }
        }
        Err(LinkError::ConnectFailed(last))
    }

    pub fn from_stream(stream: TcpStream, timeout: Duration) -> Result<Self, LinkError> {
        let setup = |s: &TcpStream| -> io::Result<()> {
            s.set_nodelay(true)?;
            s.set_read_timeout(Some(timeout))?;
            s.set_write_timeout(Some(timeout))
        };
        setup(&stream).map_err(|e| LinkError::ConnectFailed(e.to_string()))?;
        let writer = stream.try_clone().map_err(|e| LinkError::ConnectFailed(e.to_string()))?;
        Ok(Self {
            reader: BufReader::new(stream),
            writer,
            seq: 0,
        })
    }

    pub fn commands_sent(&self) -> u64 {
        self.seq
    }

    fn read_frame(&mut self) -> Result<Vec<u8>, LinkError> {
        let mut frame = Vec::new();
        let n = (&mut self.reader)
            .take(MAX_FRAME_BYTES as u64)
            .read_until(b'\n', &mut frame)
            .map_err(io_error)?;
        match n {
            0 => Err(LinkError::Protocol("connection closed by robot".into())),
            _ if frame.last() != Some(&b'\n') => Err(LinkError::Protocol(if n == MAX_FRAME_BYTES {
                "reply frame too long".into()
            } else {
                "connection closed mid-frame".into()
            })),
            _ => Ok(frame),
        }
    }
}

impl RobotLink for TcpLink {
    fn send(&mut self, command: Command) -> Result<RobotReply, LinkError> {
        self.seq += 1;
        let request = RobotCommand { seq: self.seq, command };
        let frame = encode_command(&request).map_err(|e| LinkError::Protocol(e.to_string()))?;
        self.writer.write_all(&frame).map_err(io_error)?;
        let bytes = self.read_frame()?;
        let reply = decode_reply(&bytes).map_err(|e| LinkError::Protocol(e.to_string()))?;
        if reply.seq != self.seq {
            return Err(LinkError::Protocol(format!("reply seq {} does not answer {}", reply.seq, self.seq)));
        }
        log::debug!("{} seq {} -> ok {}", command.name(), reply.seq, reply.ok);
        Ok(reply)
    }
}
