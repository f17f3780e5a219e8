//! UDP intake of DHCP DISCOVER/REQUEST datagrams into a lease registry.

use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use chrono::Utc;

use super::{parse_dhcp_message, LeaseRegistry};

pub const DEFAULT_DHCP_PORT: u16 = 6767;

pub type SharedLeaseRegistry = Arc<RwLock<LeaseRegistry>>;

/// Admits nodes as their DHCP messages arrive. No replies are sent.
pub struct DhcpListener {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl DhcpListener {
    pub fn bind(addr: SocketAddr, registry: SharedLeaseRegistry) -> io::Result<Self> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(Duration::from_millis(100)))?;
        let local_addr = socket.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = thread::Builder::new()
            .name("dhcp-listener".into())
            .spawn(move || {
                let mut buf = vec![0u8; 4096];
                while !flag.load(Ordering::Relaxed) {
                    match socket.recv_from(&mut buf) {
                        Ok((n, peer)) => {
                            let msg = match parse_dhcp_message(&buf[..n]) {
                                Ok(m) => m,
                                Err(e) => {
                                    log::debug!("bad DHCP datagram from {peer}: {e}");
                                    continue;
                                }
                            };
                            let mut reg = registry.write().expect("lease registry lock poisoned");
                            match reg.handle_discover(&msg, Utc::now()) {
                                Ok(lease) => log::info!(
                                    "lease {} -> {} ({:?})",
                                    lease.mac,
                                    lease.ip,
                                    lease.os_type
                                ),
                                Err(e) => log::warn!("DHCP from {peer} not admitted: {e}"),
                            }
                        }
                        Err(e)
                            if matches!(
                                e.kind(),
                                io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                            ) => {}
                        Err(e) => {
                            log::warn!("dhcp listener stopped: {e}");
                            break;
                        }
                    }
                }
            })?;
        Ok(DhcpListener {
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

impl Drop for DhcpListener {
    fn drop(&mut self) {
        self.stop_thread();
    }
}
