//! TCP front end for the simulated robot.
//!
//! Each connection gets its own thread and sequence check; all of them
//! drive one shared robot under a mutex, so commands apply strictly in
//! arrival order.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use packer_core::protocol::{encode_reply, MAX_FRAME_BYTES};
use packer_core::sim::{SessionState, SimRobot};

pub type SharedRobot = Arc<Mutex<SimRobot>>;

fn lock(robot: &SharedRobot) -> MutexGuard<'_, SimRobot> {
    // A panicking connection thread leaves the robot state intact.
    robot.lock().unwrap_or_else(|e| e.into_inner())
}

pub struct SimServer {
    listener: TcpListener,
    robot: SharedRobot,
    latency: Duration,
}

impl SimServer {
    pub fn bind(addr: impl ToSocketAddrs, robot: SimRobot) -> io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            robot: Arc::new(Mutex::new(robot)),
            latency: Duration::ZERO,
        })
    }

    /// Delay added before every reply.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn robot(&self) -> SharedRobot {
        Arc::clone(&self.robot)
    }

    /// Accepts connections until the process exits.
    pub fn serve(self) -> io::Result<()> {
        self.accept_loop(&AtomicBool::new(false))
    }

    /// Serves on a background thread.
    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let robot = self.robot();
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let thread = thread::spawn(move || {
            if let Err(e) = self.accept_loop(&flag) {
                log::error!("simulator stopped: {e}");
            }
        });
        Ok(ServerHandle {
            addr,
            robot,
            stop,
            thread: Some(thread),
        })
    }

    fn accept_loop(&self, stop: &AtomicBool) -> io::Result<()> {
        for stream in self.listener.incoming() {
            if stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let robot = Arc::clone(&self.robot);
            let latency = self.latency;
            thread::spawn(move || {
                let peer = stream.peer_addr().map_or_else(|_| "?".into(), |a| a.to_string());
                log::info!("connection from {peer}");
                match serve_connection(stream, &robot, latency) {
                    Ok(()) => log::info!("{peer} disconnected"),
                    Err(e) => log::warn!("{peer}: {e}"),
                }
            });
        }
        Ok(())
    }
}

/// Running background server; stops accepting when dropped.
pub struct ServerHandle {
    addr: SocketAddr,
    robot: SharedRobot,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn robot(&self) -> SharedRobot {
        Arc::clone(&self.robot)
    }

    /// Copy of the current robot and scene state.
    pub fn snapshot(&self) -> SimRobot {
        lock(&self.robot).clone()
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        if let Some(thread) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            // Wake the blocking accept.
            let _ = TcpStream::connect(self.addr);
            let _ = thread.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_accepting();
    }
}

enum Frame {
    Line,
    /// Longer than the frame limit; the rest of the line was discarded.
    TooLong,
    /// Peer closed without a trailing newline.
    Partial,
    Eof,
}

fn read_frame(reader: &mut impl BufRead, buf: &mut Vec<u8>) -> io::Result<Frame> {
    buf.clear();
    let n = reader.by_ref().take(MAX_FRAME_BYTES as u64 + 1).read_until(b'\n', buf)?;
    if n == 0 {
        return Ok(Frame::Eof);
    }
    if buf.last() == Some(&b'\n') {
        return Ok(Frame::Line);
    }
    if n <= MAX_FRAME_BYTES {
        return Ok(Frame::Partial);
    }
    let mut sink = Vec::new();
    loop {
        sink.clear();
        let k = reader.by_ref().take(64 * 1024).read_until(b'\n', &mut sink)?;
        if k == 0 || sink.last() == Some(&b'\n') {
            return Ok(Frame::TooLong);
        }
    }
}

/// Answers frames on one connection until the peer disconnects.
pub fn serve_connection(stream: TcpStream, robot: &SharedRobot, latency: Duration) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    let mut session = SessionState::new();
    let mut buf = Vec::new();
    loop {
        let kind = read_frame(&mut reader, &mut buf)?;
        if matches!(kind, Frame::Eof) {
            return Ok(());
        }
        // An oversized prefix decodes as FrameTooLong in the session.
        let reply = session.handle_frame(&mut lock(robot), &buf);
        if !latency.is_zero() {
            thread::sleep(latency);
        }
        let bytes = encode_reply(&reply).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        writer.write_all(&bytes)?;
        if matches!(kind, Frame::Partial) {
            return Ok(());
        }
    }
}
