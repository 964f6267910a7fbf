//! Lightweight mDNS: the smart-object responder and the directory-side
//! probe, registration handshake and refresh logic.
//!
//! Replies never carry authority or additional records. A directory learns
//! instances through one multicast PTR exchange and only asks for SRV, TXT
//! and AAAA when the instance is new to it.

mod agent;
mod probe;
mod refresh;
mod transport;

pub use agent::{answer_query, SmartObjectProfile};
pub use probe::{
    probe, registration_handshake, select_srv, Discovered, HandshakeError, HandshakeOptions,
    PartialRecords, ResolvedRecords, SrvData,
};
pub use refresh::{
    refresh, DiscoveryCycle, Freshness, RefreshOutcome, RefreshPolicy, Roster, RosterEntry,
};
pub use transport::{Destination, Incoming, Transport, TransportError, UdpTransport, MDNS_PORT};

use std::time::Duration;

/// Probe window on simulated links.
pub const SIM_PROBE_WINDOW: Duration = Duration::from_secs(2);
/// Probe window on loopback or real sockets.
pub const UDP_PROBE_WINDOW: Duration = Duration::from_secs(1);
