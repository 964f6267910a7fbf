//! Two-tier service discovery for constrained IoT networks.
//!
//! Smart objects answer a lightweight mDNS profile ([`lmdns`]); each local
//! [`digrectory`] keeps full DNS-SD record sets and publishes pointer
//! summaries to the global [`digcovery`] index, which answers type, pattern
//! and geo queries and redirects clients back to the owning directory.

pub mod digcovery;
pub mod digrectory;
pub mod dns;
pub mod fixtures;
pub mod lmdns;
pub mod netsim;
pub mod semantics;
