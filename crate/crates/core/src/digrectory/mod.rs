//! A domain-scoped directory. It holds the full records of its smart
//! objects, answers DNS for them, and publishes pointer summaries upward.

mod entry;
mod epcis;
mod journal;

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv6Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digcovery::PointerSummary;
use crate::dns::{self, rcode, Compression, Message, Name, RData, Record, RecordType};
use crate::semantics::{from_txt, ServiceMetadata};

pub use entry::{DirectoryEntry, GeoPoint, SrvTarget};
pub use epcis::{
    epc_instance_label, epc_metadata, EpcAttributes, EpcMapper, EpcMapping, MockEpcis,
    EPC_DEFAULT_TYPE, EPC_INTERFACE, EPC_LIFETIME,
};
pub use journal::{Journal, JournalRecord};

/// Largest DNS reply sent without TC.
pub const MAX_UDP_REPLY: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DirectoryError {
    #[error("entry belongs to {got}, directory serves {expected}")]
    DomainMismatch { expected: Name, got: Name },
    #[error("invalid entry: {0}")]
    InvalidEntry(String),
    #[error("no such name: {0}")]
    NameError(Name),
    #[error("unknown EPC {0}")]
    UnknownEpc(String),
    #[error("driver {0} already bound")]
    DuplicateDriver(String),
    #[error("unknown driver {0}")]
    UnknownDriver(String),
    #[error("digcovery endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("journal: {0}")]
    Journal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status")]
pub enum RegisterOutcome {
    Created {
        revision: u64,
    },
    /// `changed` is false when only `last_seen` moved.
    Updated {
        revision: u64,
        changed: bool,
    },
}

impl RegisterOutcome {
    pub fn revision(&self) -> u64 {
        match *self {
            RegisterOutcome::Created { revision } | RegisterOutcome::Updated { revision, .. } => {
                revision
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriverKind {
    Mdns,
    Lmdns,
    Epcis,
    Legacy,
}

/// A protocol or technology adapter attached to the directory. `config`
/// is driver specific; legacy drivers describe one static device with it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriverBinding {
    pub id: String,
    pub kind: DriverKind,
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

/// Upstream receiver of pointer summaries, normally a digcovery service.
pub trait PointerSink {
    /// Returns how many summaries were accepted. A snapshot replaces
    /// everything previously published for `domain`.
    fn publish(
        &mut self,
        domain: &Name,
        batch: &[PointerSummary],
        snapshot: bool,
    ) -> Result<usize, String>;
}

/// A batch of pointer summaries taken from a directory at one revision.
#[derive(Debug, Clone, PartialEq)]
pub struct Publication {
    pub batch: Vec<PointerSummary>,
    /// The batch replaces everything published before.
    pub snapshot: bool,
    pub revision: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpcPath {
    /// EPCIS attributes plus the mapper's address.
    Api,
    /// TXT and AAAA lookups on the tag's synthesized hostname.
    Dns,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpcResolution {
    pub meta: ServiceMetadata,
    pub addr6: Ipv6Addr,
}

#[derive(Debug, Clone)]
struct Stored {
    entry: DirectoryEntry,
    revision: u64,
}

pub struct Digrectory {
    domain: Name,
    entries: BTreeMap<Name, Stored>,
    revision: u64,
    /// Removal summaries not yet acknowledged upstream.
    tombstones: Vec<PointerSummary>,
    /// Revision covered by the last accepted publish; `None` forces a
    /// snapshot.
    published: Option<u64>,
    drivers: BTreeMap<String, DriverBinding>,
    epcis: MockEpcis,
    epc_map: EpcMapper,
    journal: Option<Journal>,
}

/// Default /64 for EPC addresses.
pub const DEFAULT_EPC_PREFIX: Ipv6Addr = Ipv6Addr::new(0x2001, 0x720, 0x1710, 0xe9c, 0, 0, 0, 0);

impl Digrectory {
    pub fn new(domain: Name) -> Self {
        Digrectory {
            domain,
            entries: BTreeMap::new(),
            revision: 0,
            tombstones: Vec::new(),
            published: None,
            drivers: BTreeMap::new(),
            epcis: MockEpcis::default(),
            epc_map: EpcMapper::new(DEFAULT_EPC_PREFIX),
            journal: None,
        }
    }

    /// Opens `path` as the journal, replaying any entries it holds.
    pub fn with_journal(domain: Name, path: &Path) -> Result<Self, DirectoryError> {
        let (journal, records) =
            Journal::open(path).map_err(|e| DirectoryError::Journal(e.to_string()))?;
        let mut d = Digrectory::new(domain);
        for r in records {
            match r {
                JournalRecord::Entry(e) => {
                    d.register(*e)?;
                }
                JournalRecord::Remove { remove } => {
                    d.remove(&remove);
                }
            }
        }
        d.journal = Some(journal);
        Ok(d)
    }

    pub fn domain(&self) -> &Name {
        &self.domain
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &DirectoryEntry> {
        self.entries.values().map(|s| &s.entry)
    }

    pub fn get(&self, instance: &str) -> Option<&DirectoryEntry> {
        let key = self.domain.prepend(instance).ok()?;
        self.entries.get(&key).map(|s| &s.entry)
    }

    fn journal_write(&mut self, rec: &JournalRecord) -> Result<(), DirectoryError> {
        if let Some(j) = self.journal.as_mut() {
            j.append(rec)
                .map_err(|e| DirectoryError::Journal(e.to_string()))?;
        }
        Ok(())
    }

    fn tombstone(&mut self, entry: &DirectoryEntry, paths: &[Name]) {
        for p in paths {
            let mut s = PointerSummary::of(entry, p, self.revision);
            s.removed = true;
            self.tombstones.push(s);
        }
    }

    /// Stores or refreshes an entry. Re-registering identical records only
    /// moves `last_seen`; anything else bumps the revision.
    pub fn register(&mut self, entry: DirectoryEntry) -> Result<RegisterOutcome, DirectoryError> {
        if entry.domain != self.domain {
            return Err(DirectoryError::DomainMismatch {
                expected: self.domain.clone(),
                got: entry.domain.clone(),
            });
        }
        entry.validate().map_err(DirectoryError::InvalidEntry)?;
        let key = entry.instance_name();
        let outcome = match self.entries.get_mut(&key) {
            Some(stored) if stored.entry.same_records(&entry) => {
                stored.entry.last_seen = stored.entry.last_seen.max(entry.last_seen);
                RegisterOutcome::Updated {
                    revision: stored.revision,
                    changed: false,
                }
            }
            Some(stored) => {
                let dropped: Vec<Name> = stored
                    .entry
                    .ptr_paths
                    .iter()
                    .filter(|p| !entry.ptr_paths.contains(p))
                    .cloned()
                    .collect();
                let old = stored.entry.clone();
                self.revision += 1;
                let revision = self.revision;
                *stored = Stored {
                    entry: entry.clone(),
                    revision,
                };
                self.tombstone(&old, &dropped);
                RegisterOutcome::Updated {
                    revision,
                    changed: true,
                }
            }
            None => {
                self.revision += 1;
                self.entries.insert(
                    key,
                    Stored {
                        entry: entry.clone(),
                        revision: self.revision,
                    },
                );
                RegisterOutcome::Created {
                    revision: self.revision,
                }
            }
        };
        self.journal_write(&JournalRecord::Entry(Box::new(entry)))?;
        Ok(outcome)
    }

    fn remove(&mut self, instance: &str) -> Option<DirectoryEntry> {
        let key = self.domain.prepend(instance).ok()?;
        let stored = self.entries.remove(&key)?;
        self.revision += 1;
        let paths = stored.entry.ptr_paths.clone();
        self.tombstone(&stored.entry, &paths);
        if stored.entry.origin == "epcis" {
            if let Some(epc) = stored.entry.meta.extra.get("epc") {
                self.epc_map.unmap(epc);
            }
        }
        Some(stored.entry)
    }

    /// Deletes an entry and queues its removal for the next publish.
    pub fn deregister(&mut self, instance: &str) -> Result<DirectoryEntry, DirectoryError> {
        let removed = self.remove(instance).ok_or_else(|| {
            DirectoryError::NameError(
                self.domain
                    .prepend(instance)
                    .unwrap_or_else(|_| self.domain.clone()),
            )
        })?;
        self.journal_write(&JournalRecord::Remove {
            remove: instance.to_string(),
        })?;
        Ok(removed)
    }

    /// Drops entries unseen for longer than their ttl. Their removal
    /// summaries go out with the next [`Digrectory::publish_pointers`].
    pub fn expire_stale(&mut self, now: u64) -> Result<Vec<String>, DirectoryError> {
        let stale: Vec<String> = self
            .entries
            .values()
            .filter(|s| !s.entry.is_live(now))
            .map(|s| s.entry.instance.clone())
            .collect();
        for i in &stale {
            self.deregister(i)?;
        }
        Ok(stale)
    }

    /// Answers one question. Unknown names are a `NameError`; known names
    /// without data of `qtype` give an empty answer.
    pub fn lookup(
        &self,
        name: &Name,
        qtype: RecordType,
        now: u64,
    ) -> Result<Vec<Record>, DirectoryError> {
        let not_found = || DirectoryError::NameError(name.clone());
        if !name.is_subdomain_of(&self.domain)
            && !name
                .labels()
                .last()
                .is_some_and(|l| l.eq_ignore_ascii_case(b"_udp") || l.eq_ignore_ascii_case(b"_tcp"))
        {
            return Err(not_found());
        }
        let live = || {
            self.entries
                .values()
                .map(|s| &s.entry)
                .filter(|e| e.is_live(now))
        };

        // Service path, bare or under the domain.
        let path = name
            .strip_suffix(&self.domain)
            .unwrap_or_else(|| name.clone());
        let ptr: Vec<&DirectoryEntry> = live().filter(|e| e.ptr_paths.contains(&path)).collect();
        if !ptr.is_empty() {
            return Ok(match qtype {
                RecordType::Ptr => ptr
                    .iter()
                    .map(|e| Record::new(name.clone(), e.ttl, RData::Ptr(e.instance_name())))
                    .collect(),
                _ => Vec::new(),
            });
        }

        if let Some(e) = live().find(|e| e.instance_name() == *name) {
            return Ok(match qtype {
                RecordType::Srv => vec![e.srv_record()],
                RecordType::Txt => e.txt_record(name).into_iter().collect(),
                RecordType::Aaaa => e.addr_records(name, true),
                RecordType::A => e.addr_records(name, false),
                _ => Vec::new(),
            });
        }
        let hosts: Vec<&DirectoryEntry> = live().filter(|e| e.srv.target == *name).collect();
        if let Some(first) = hosts.first() {
            return Ok(match qtype {
                RecordType::Txt => first.txt_record(name).into_iter().collect(),
                RecordType::Aaaa | RecordType::A => {
                    let mut seen = BTreeSet::new();
                    hosts
                        .iter()
                        .flat_map(|e| e.addr_records(name, qtype == RecordType::Aaaa))
                        .filter(|r| seen.insert(format!("{:?}", r.data)))
                        .collect()
                }
                _ => Vec::new(),
            });
        }
        if *name == self.domain {
            return Ok(Vec::new());
        }
        Err(not_found())
    }

    /// Full DNS reply to `query`: NXDOMAIN when a name is unknown, TC set
    /// and answers trimmed when the reply would exceed 512 bytes.
    pub fn respond(&self, query: &Message, now: u64) -> Message {
        let mut reply = Message::response_to(query);
        if query.header.qr || query.questions.is_empty() {
            reply.header.rcode = rcode::FORMERR;
            return reply;
        }
        for q in &query.questions {
            match self.lookup(&q.name, q.qtype, now) {
                Ok(rs) => reply.answers.extend(rs),
                Err(_) => reply.header.rcode = rcode::NXDOMAIN,
            }
        }
        while dns::measure(&reply, Compression::On).map_or(true, |n| n > MAX_UDP_REPLY)
            && !reply.answers.is_empty()
        {
            reply.header.tc = true;
            reply.answers.pop();
        }
        reply
    }

    /// Decodes, answers and encodes one datagram. Undecodable input and
    /// responses are dropped.
    pub fn respond_packet(&self, packet: &[u8], now: u64) -> Option<Vec<u8>> {
        let q = dns::decode(packet).ok()?;
        if q.header.qr {
            return None;
        }
        dns::encode(&self.respond(&q, now), Compression::On).ok()
    }

    fn summaries_since(&self, since: Option<u64>, now: u64) -> Vec<PointerSummary> {
        let mut out: Vec<PointerSummary> = self
            .entries
            .values()
            .filter(|s| s.entry.is_live(now) && since.is_none_or(|r| s.revision > r))
            .flat_map(|s| {
                s.entry
                    .ptr_paths
                    .iter()
                    .map(|p| PointerSummary::of(&s.entry, p, s.revision))
            })
            .collect();
        if since.is_some() {
            out.extend(self.tombstones.iter().cloned());
        }
        out
    }

    /// What the next publish would send: a snapshot of live entries after
    /// a failure or on first contact, otherwise changes since the last
    /// accepted revision.
    pub fn pending_pointers(&self, now: u64) -> Vec<PointerSummary> {
        self.summaries_since(self.published, now)
    }

    pub fn publish_pointers(
        &mut self,
        sink: &mut dyn PointerSink,
        now: u64,
    ) -> Result<usize, DirectoryError> {
        let p = self.publication(now);
        match sink.publish(&self.domain, &p.batch, p.snapshot) {
            Ok(_) => {
                self.acknowledge(&p);
                Ok(p.batch.len())
            }
            Err(e) => {
                self.published = None;
                Err(DirectoryError::EndpointUnreachable(e))
            }
        }
    }

    /// The next batch to publish, for callers that send it without holding
    /// the directory. Pass it back to [`Digrectory::acknowledge`] once
    /// accepted, or call [`Digrectory::reset_publication`] on failure.
    pub fn publication(&self, now: u64) -> Publication {
        Publication {
            batch: self.pending_pointers(now),
            snapshot: self.published.is_none(),
            revision: self.revision,
        }
    }

    /// Marks `p` as accepted. Changes made after `p` was taken stay pending.
    pub fn acknowledge(&mut self, p: &Publication) {
        self.published = Some(p.revision);
        self.tombstones.retain(|t| t.revision > p.revision);
    }

    /// Forces the next publish to be a full snapshot.
    pub fn reset_publication(&mut self) {
        self.published = None;
    }

    pub fn bind_driver(&mut self, binding: DriverBinding) -> Result<(), DirectoryError> {
        if self.drivers.contains_key(&binding.id) {
            return Err(DirectoryError::DuplicateDriver(binding.id));
        }
        self.drivers.insert(binding.id.clone(), binding);
        Ok(())
    }

    pub fn drivers(&self) -> impl Iterator<Item = &DriverBinding> {
        self.drivers.values()
    }

    /// Registers the static device a legacy driver describes. Config keys:
    /// `instance`, `host`, `port`, `path`, `rt`, `model`, `if`, `ttl`; others
    /// become metadata extras.
    pub fn load_legacy(
        &mut self,
        driver_id: &str,
        now: u64,
    ) -> Result<RegisterOutcome, DirectoryError> {
        let b = self
            .drivers
            .get(driver_id)
            .ok_or_else(|| DirectoryError::UnknownDriver(driver_id.into()))?;
        let entry = legacy_entry(b, &self.domain, now)?;
        self.register(entry)
    }

    /// Registers every instance of an lmDNS roster.
    pub fn ingest_roster(
        &mut self,
        roster: &crate::lmdns::Roster,
        now: u64,
    ) -> Result<Vec<RegisterOutcome>, DirectoryError> {
        let mut out = Vec::new();
        for r in roster.entries() {
            let e = DirectoryEntry::from_roster(r, now).map_err(DirectoryError::InvalidEntry)?;
            out.push(self.register(e)?);
        }
        Ok(out)
    }

    /// Registers the roster and deregisters lmDNS entries it no longer
    /// holds. Returns the instances removed.
    pub fn sync_roster(
        &mut self,
        roster: &crate::lmdns::Roster,
        now: u64,
    ) -> Result<Vec<String>, DirectoryError> {
        self.ingest_roster(roster, now)?;
        let present: BTreeSet<Name> = roster
            .entries()
            .map(|r| r.records.instance.clone())
            .collect();
        let gone: Vec<String> = self
            .entries
            .iter()
            .filter(|(k, s)| s.entry.origin == "lmdns" && !present.contains(*k))
            .map(|(_, s)| s.entry.instance.clone())
            .collect();
        for i in &gone {
            self.deregister(i)?;
        }
        Ok(gone)
    }

    pub fn epcis(&self) -> &MockEpcis {
        &self.epcis
    }

    pub fn epc_mapper(&self) -> &EpcMapper {
        &self.epc_map
    }

    /// Current mappings with their EPCIS attributes, ordered by EPC.
    pub fn epc_mappings(&self) -> Vec<EpcMapping> {
        let mut out: Vec<EpcMapping> = self
            .epc_map
            .pairs()
            .map(|(epc, addr6)| EpcMapping {
                epc: epc.to_string(),
                addr6,
                attributes: self.epcis.query(epc).cloned().unwrap_or_default(),
            })
            .collect();
        out.sort_by(|a, b| a.epc.cmp(&b.epc));
        out
    }

    /// Stores a tag in the EPCIS, maps it to an address and registers a
    /// directory entry for it.
    pub fn register_epc(
        &mut self,
        epc: &str,
        attributes: EpcAttributes,
        now: u64,
    ) -> Result<Ipv6Addr, DirectoryError> {
        let meta = epc_metadata(epc, &attributes);
        meta.validate()
            .map_err(|e| DirectoryError::InvalidEntry(e.to_string()))?;
        let fresh = self.epc_map.address_of(epc).is_none();
        let addr = self.epc_map.map(epc);
        let host = self
            .domain
            .prepend(epc_instance_label(&addr))
            .map_err(|e| DirectoryError::InvalidEntry(e.to_string()))?;
        let entry = DirectoryEntry {
            instance: epc_instance_label(&addr),
            domain: self.domain.clone(),
            ptr_paths: vec![Name::from_labels(["_epc", "_udp"]).expect("static labels")],
            srv: SrvTarget {
                priority: 0,
                capacity: 0,
                port: 0,
                target: host,
            },
            ttl: meta.lt,
            meta,
            addrs: vec![addr.into()],
            geo: None,
            last_seen: now,
            origin: "epcis".into(),
        };
        if let Err(e) = self.register(entry) {
            if fresh {
                self.epc_map.unmap(epc);
            }
            return Err(e);
        }
        self.epcis.insert(epc, attributes);
        Ok(addr)
    }

    pub fn epcis_resolve(
        &self,
        epc: &str,
        via: EpcPath,
        now: u64,
    ) -> Result<EpcResolution, DirectoryError> {
        let unknown = || DirectoryError::UnknownEpc(epc.to_string());
        let addr = self.epc_map.address_of(epc).ok_or_else(unknown)?;
        match via {
            EpcPath::Api => {
                let attrs = self.epcis.query(epc).ok_or_else(unknown)?;
                Ok(EpcResolution {
                    meta: epc_metadata(epc, attrs),
                    addr6: addr,
                })
            }
            EpcPath::Dns => {
                let host = self
                    .domain
                    .prepend(epc_instance_label(&addr))
                    .map_err(|_| unknown())?;
                let txt = self
                    .lookup(&host, RecordType::Txt, now)
                    .map_err(|_| unknown())?;
                let strings = match txt.first().map(|r| &r.data) {
                    Some(RData::Txt(s)) => s.clone(),
                    _ => return Err(unknown()),
                };
                let meta = from_txt(&strings).map_err(|_| unknown())?;
                let addr6 = self
                    .lookup(&host, RecordType::Aaaa, now)
                    .map_err(|_| unknown())?
                    .into_iter()
                    .find_map(|r| match r.data {
                        RData::Aaaa(a) => Some(a),
                        _ => None,
                    })
                    .ok_or_else(unknown)?;
                Ok(EpcResolution { meta, addr6 })
            }
        }
    }
}

fn legacy_entry(
    b: &DriverBinding,
    domain: &Name,
    now: u64,
) -> Result<DirectoryEntry, DirectoryError> {
    let bad = |m: String| DirectoryError::InvalidEntry(format!("driver {}: {m}", b.id));
    let get = |k: &str| b.config.get(k).map(String::as_str);
    let instance = get("instance").ok_or_else(|| bad("missing instance".into()))?;
    let rt = get("rt").ok_or_else(|| bad("missing rt".into()))?;
    let ttl: u32 = get("ttl")
        .unwrap_or("86400")
        .parse()
        .map_err(|_| bad("bad ttl".into()))?;
    let port: u16 = get("port")
        .unwrap_or("0")
        .parse()
        .map_err(|_| bad("bad port".into()))?;
    let host_label = get("host").unwrap_or(instance);
    let target = domain.prepend(host_label).map_err(|e| bad(e.to_string()))?;
    let path: Name = get("path")
        .unwrap_or("_legacy._udp")
        .parse()
        .map_err(|e: dns::CodecError| bad(e.to_string()))?;
    let mut meta = ServiceMetadata::new(rt, 1, ttl)
        .with_model(get("model").unwrap_or(""))
        .with_interface(get("if").unwrap_or(""));
    const CONSUMED: [&str; 8] = [
        "instance", "host", "port", "path", "rt", "model", "if", "ttl",
    ];
    for (k, v) in &b.config {
        if !CONSUMED.contains(&k.as_str()) {
            meta = meta.with_extra(k.clone(), v.clone());
        }
    }
    Ok(DirectoryEntry {
        instance: instance.into(),
        domain: domain.clone(),
        ptr_paths: vec![path],
        srv: SrvTarget {
            priority: 0,
            capacity: 0,
            port,
            target,
        },
        meta,
        addrs: Vec::new(),
        geo: None,
        ttl,
        last_seen: now,
        origin: "legacy".into(),
    })
}
