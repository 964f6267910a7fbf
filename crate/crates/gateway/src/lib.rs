//! Daemons and client commands for the digstack discovery services.

pub mod api;
pub mod client;
pub mod config;
pub mod digcovery_server;
pub mod digrectory_server;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

/// Seconds since the Unix epoch.
pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Request counters for one daemon.
#[derive(Debug, Default)]
pub struct Traffic {
    pub http_requests: AtomicU64,
    pub dns_packets: AtomicU64,
}

impl Traffic {
    pub fn total(&self) -> u64 {
        self.http_requests.load(Ordering::SeqCst) + self.dns_packets.load(Ordering::SeqCst)
    }
}
