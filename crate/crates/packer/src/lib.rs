//! Host side of the pack assembler: file formats, the TCP robot link, the
//! simulator server and the grasp-success harness.

pub mod client;
pub mod eval;
pub mod io;
pub mod server;
