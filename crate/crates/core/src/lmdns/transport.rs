use std::io::ErrorKind;
use std::net::{Ipv4Addr, SocketAddr, UdpSocket};
use std::time::{Duration, Instant};

use thiserror::Error;

pub const MDNS_PORT: u16 = 5353;
const MDNS_GROUP_V4: Ipv4Addr = Ipv4Addr::new(224, 0, 0, 251);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("transport I/O error: {0}")]
    Io(String),
    #[error("transport closed")]
    Closed,
}

impl From<std::io::Error> for TransportError {
    fn from(e: std::io::Error) -> Self {
        TransportError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Destination {
    Multicast,
    Unicast(SocketAddr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Incoming {
    pub bytes: Vec<u8>,
    pub from: SocketAddr,
    /// The packet was addressed to the multicast group.
    pub multicast: bool,
}

/// Datagram transport shared by the responder and the directory probe.
/// Time is read through [`Transport::now`] so simulated links can run on a
/// logical clock.
pub trait Transport {
    fn send(&mut self, dest: Destination, packet: &[u8]) -> Result<(), TransportError>;

    /// Next packet arriving within `window`, or `None` once it elapses.
    fn recv(&mut self, window: Duration) -> Result<Option<Incoming>, TransportError>;

    /// Monotonic time since the transport was created.
    fn now(&self) -> Duration;
}

/// A UDP socket plus the group address used for multicast sends.
pub struct UdpTransport {
    socket: UdpSocket,
    group: SocketAddr,
    started: Instant,
}

impl UdpTransport {
    /// Joins the IPv4 mDNS group on `iface` and binds port 5353.
    pub fn mdns_v4(iface: Ipv4Addr) -> Result<Self, TransportError> {
        let socket = UdpSocket::bind((Ipv4Addr::UNSPECIFIED, MDNS_PORT))?;
        socket.join_multicast_v4(&MDNS_GROUP_V4, &iface)?;
        socket.set_multicast_loop_v4(true)?;
        Ok(Self::with_group(socket, (MDNS_GROUP_V4, MDNS_PORT).into()))
    }

    /// Uses an existing socket; "multicast" sends go to `group`. Pointing
    /// `group` at a unicast peer gives a loopback-friendly transport.
    pub fn with_group(socket: UdpSocket, group: SocketAddr) -> Self {
        UdpTransport {
            socket,
            group,
            started: Instant::now(),
        }
    }

    pub fn local_addr(&self) -> Result<SocketAddr, TransportError> {
        Ok(self.socket.local_addr()?)
    }
}

impl Transport for UdpTransport {
    fn send(&mut self, dest: Destination, packet: &[u8]) -> Result<(), TransportError> {
        let to = match dest {
            Destination::Multicast => self.group,
            Destination::Unicast(a) => a,
        };
        self.socket.send_to(packet, to)?;
        Ok(())
    }

    fn recv(&mut self, window: Duration) -> Result<Option<Incoming>, TransportError> {
        if window.is_zero() {
            return Ok(None);
        }
        self.socket.set_read_timeout(Some(window))?;
        let mut buf = vec![0u8; 9000];
        match self.socket.recv_from(&mut buf) {
            Ok((n, from)) => {
                buf.truncate(n);
                Ok(Some(Incoming {
                    bytes: buf,
                    from,
                    // std sockets cannot tell the destination address; a
                    // sender on the mDNS port is treated as multicast.
                    multicast: from.port() == MDNS_PORT,
                }))
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn now(&self) -> Duration {
        self.started.elapsed()
    }
}
