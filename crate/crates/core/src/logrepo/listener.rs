//! UDP syslog ingestion: one datagram is one log line.

use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use super::{SharedLogStore, Timestamp};

pub const DEFAULT_SYSLOG_PORT: u16 = 514;

pub fn now_micros() -> Timestamp {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_micros() as Timestamp)
        .unwrap_or_default()
}

/// Strip one trailing line terminator, as sent by many syslog clients.
fn trim_terminator(buf: &[u8]) -> &[u8] {
    let buf = buf.strip_suffix(b"\n").unwrap_or(buf);
    buf.strip_suffix(b"\r").unwrap_or(buf)
}

/// Background thread receiving syslog datagrams into a shared store.
pub struct SyslogListener {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl SyslogListener {
    pub fn bind(addr: SocketAddr, store: SharedLogStore) -> io::Result<Self> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(Duration::from_millis(100)))?;
        let local_addr = socket.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = thread::Builder::new()
            .name("syslog-listener".into())
            .spawn(move || {
                let mut buf = vec![0u8; 65_535];
                while !flag.load(Ordering::Relaxed) {
                    match socket.recv_from(&mut buf) {
                        Ok((n, peer)) => {
                            let line = trim_terminator(&buf[..n]);
                            let mut store = store.write().expect("log store lock poisoned");
                            if let Err(err) = store.ingest_datagram(line, peer.ip(), now_micros())
                            {
                                log::debug!("quarantined syslog line from {peer}: {err}");
                            }
                        }
                        Err(e)
                            if matches!(
                                e.kind(),
                                io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                            ) => {}
                        Err(e) => {
                            log::warn!("syslog listener stopped: {e}");
                            break;
                        }
                    }
                }
            })?;
        Ok(SyslogListener {
            local_addr,
            stop,
            handle: Some(handle),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn shutdown(mut self) {
        self.stop_thread();
    }

    fn stop_thread(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for SyslogListener {
    fn drop(&mut self) {
        self.stop_thread();
    }
}
