use std::collections::{BTreeMap, HashSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::probe::{next_id, probe, registration_handshake, HandshakeError, HandshakeOptions};
use super::{Destination, ResolvedRecords, Transport, TransportError};
use crate::dns::{self, Compression, Message, Name, Question, RData, RecordType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefreshPolicy {
    /// Seconds between refresh probes.
    pub refresh_interval: u64,
    /// Consecutive silent probes before an entry expires.
    pub max_missed: u32,
}

impl RefreshPolicy {
    /// A quarter of the lifetime, three misses.
    pub fn for_lifetime(lifetime: u64) -> Self {
        RefreshPolicy {
            refresh_interval: (lifetime / 4).max(1),
            max_missed: 3,
        }
    }

    pub fn validate(&self, ttl: u64) -> Result<(), String> {
        if self.max_missed == 0 {
            return Err("max_missed must be at least 1".into());
        }
        if self.refresh_interval >= ttl {
            return Err(format!(
                "refresh interval {} must be below ttl {ttl}",
                self.refresh_interval
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefreshOutcome {
    Keep,
    Refreshed,
    Expired,
}

/// Per-entry count of consecutive unanswered refresh probes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Freshness {
    pub missed: u32,
}

/// Decides what to do with an entry `age` seconds after its last refresh.
/// `probe_alive` is only called once the interval has elapsed.
pub fn refresh(
    age: u64,
    policy: &RefreshPolicy,
    state: &mut Freshness,
    probe_alive: impl FnOnce() -> bool,
) -> RefreshOutcome {
    if age < policy.refresh_interval {
        return RefreshOutcome::Keep;
    }
    if probe_alive() {
        state.missed = 0;
        RefreshOutcome::Refreshed
    } else {
        state.missed += 1;
        if state.missed >= policy.max_missed {
            RefreshOutcome::Expired
        } else {
            RefreshOutcome::Keep
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RosterEntry {
    pub records: ResolvedRecords,
    pub service_path: Name,
    /// Seconds timestamp of the last successful handshake or refresh.
    pub refreshed_at: u64,
    pub freshness: Freshness,
    pub policy: RefreshPolicy,
}

/// Summary of one [`Roster::discover`] pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiscoveryCycle {
    pub added: Vec<Name>,
    pub already_known: Vec<Name>,
    pub failed: Vec<(Name, HandshakeError)>,
}

/// The directory-side set of instances learnt over lmDNS.
#[derive(Debug, Clone, Default)]
pub struct Roster {
    entries: BTreeMap<Name, RosterEntry>,
}

impl Roster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn known(&self) -> HashSet<Name> {
        self.entries.keys().cloned().collect()
    }

    pub fn get(&self, instance: &Name) -> Option<&RosterEntry> {
        self.entries.get(instance)
    }

    pub fn entries(&self) -> impl Iterator<Item = &RosterEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn remove(&mut self, instance: &Name) -> Option<RosterEntry> {
        self.entries.remove(instance)
    }

    /// Probes `service_path` and runs the handshake for each unseen instance.
    pub fn discover<T: Transport>(
        &mut self,
        transport: &mut T,
        service_path: &Name,
        options: HandshakeOptions,
        now: u64,
    ) -> Result<DiscoveryCycle, TransportError> {
        let found = probe(transport, service_path, options.window)?;
        let mut cycle = DiscoveryCycle::default();
        for d in found {
            let known = self.known();
            match registration_handshake(&known, &d, transport, options) {
                Ok(None) => cycle.already_known.push(d.instance),
                Ok(Some(records)) => {
                    let lifetime = records
                        .metadata()
                        .map(|m| m.lt as u64)
                        .unwrap_or(records.ttl as u64);
                    self.entries.insert(
                        d.instance.clone(),
                        RosterEntry {
                            records,
                            service_path: service_path.clone(),
                            refreshed_at: now,
                            freshness: Freshness::default(),
                            policy: RefreshPolicy::for_lifetime(lifetime),
                        },
                    );
                    cycle.added.push(d.instance);
                }
                Err(HandshakeError::Transport(e)) => return Err(e),
                Err(e) => cycle.failed.push((d.instance, e)),
            }
        }
        Ok(cycle)
    }

    /// Runs [`refresh`] for every entry at time `now`, re-probing with a
    /// unicast PTR question. Expired entries are dropped from the roster.
    pub fn refresh_all<T: Transport>(
        &mut self,
        transport: &mut T,
        window: Duration,
        now: u64,
    ) -> Result<Vec<(Name, RefreshOutcome)>, TransportError> {
        let mut outcomes = Vec::new();
        let names: Vec<Name> = self.entries.keys().cloned().collect();
        for name in names {
            let entry = self.entries[&name].clone();
            let age = now.saturating_sub(entry.refreshed_at);
            let mut freshness = entry.freshness;
            let mut io_error = None;
            let outcome = refresh(age, &entry.policy, &mut freshness, || {
                match still_serves(transport, &entry, window) {
                    Ok(alive) => alive,
                    Err(e) => {
                        io_error = Some(e);
                        false
                    }
                }
            });
            if let Some(e) = io_error {
                return Err(e);
            }
            match outcome {
                RefreshOutcome::Expired => {
                    self.entries.remove(&name);
                }
                _ => {
                    let stored = self.entries.get_mut(&name).expect("key just listed");
                    stored.freshness = freshness;
                    if outcome == RefreshOutcome::Refreshed {
                        stored.refreshed_at = now;
                    }
                }
            }
            outcomes.push((name, outcome));
        }
        Ok(outcomes)
    }
}

fn still_serves<T: Transport>(
    transport: &mut T,
    entry: &RosterEntry,
    window: Duration,
) -> Result<bool, TransportError> {
    let id = next_id();
    let q = Message::query(
        id,
        Question::new(entry.service_path.clone(), RecordType::Ptr),
    );
    let bytes = dns::encode(&q, Compression::On).map_err(|e| TransportError::Io(e.to_string()))?;
    transport.send(Destination::Unicast(entry.records.responder), &bytes)?;
    let deadline = transport.now() + window;
    loop {
        let remaining = deadline.saturating_sub(transport.now());
        let Some(incoming) = transport.recv(remaining)? else {
            return Ok(false);
        };
        let Ok(msg) = dns::decode(&incoming.bytes) else {
            continue;
        };
        if msg.header.qr
            && msg.header.id == id
            && msg
                .answers
                .iter()
                .any(|rr| matches!(&rr.data, RData::Ptr(t) if *t == entry.records.instance))
        {
            return Ok(true);
        }
    }
}
