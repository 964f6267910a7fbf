use std::collections::HashSet;
use std::net::{Ipv4Addr, Ipv6Addr, SocketAddr};
use std::sync::atomic::{AtomicU16, Ordering};
use std::time::Duration;

use thiserror::Error;

use super::{Destination, Transport, TransportError, SIM_PROBE_WINDOW};
use crate::dns::{self, Compression, Message, Name, Question, RData, Record, RecordType};
use crate::semantics::{from_txt, SemanticsError, ServiceMetadata};

static NEXT_ID: AtomicU16 = AtomicU16::new(1);

pub(super) fn next_id() -> u16 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// An instance seen in a probe and the address that answered for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discovered {
    pub instance: Name,
    pub responder: SocketAddr,
}

fn send_query<T: Transport>(
    transport: &mut T,
    dest: Destination,
    question: Question,
) -> Result<u16, TransportError> {
    let id = next_id();
    let msg = Message::query(id, question);
    let bytes =
        dns::encode(&msg, Compression::On).map_err(|e| TransportError::Io(e.to_string()))?;
    transport.send(dest, &bytes)?;
    Ok(id)
}

/// Collects replies to query `id` until `window` has passed on the
/// transport clock.
fn collect<T: Transport>(
    transport: &mut T,
    id: u16,
    window: Duration,
    mut on_reply: impl FnMut(Message, SocketAddr) -> bool,
) -> Result<(), TransportError> {
    let deadline = transport.now() + window;
    loop {
        let remaining = deadline.saturating_sub(transport.now());
        if remaining.is_zero() {
            return Ok(());
        }
        let Some(incoming) = transport.recv(remaining)? else {
            return Ok(());
        };
        let Ok(msg) = dns::decode(&incoming.bytes) else {
            continue;
        };
        if !msg.header.qr || msg.header.id != id {
            continue;
        }
        if on_reply(msg, incoming.from) {
            return Ok(());
        }
    }
}

/// Multicasts one PTR question for `service_path` and gathers the named
/// instances, keeping the first responder seen for each.
pub fn probe<T: Transport>(
    transport: &mut T,
    service_path: &Name,
    window: Duration,
) -> Result<Vec<Discovered>, TransportError> {
    let id = send_query(
        transport,
        Destination::Multicast,
        Question::new(service_path.clone(), RecordType::Ptr),
    )?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    collect(transport, id, window, |msg, from| {
        for rr in msg.answers {
            if let RData::Ptr(target) = rr.data {
                if rr.name == *service_path && seen.insert(target.clone()) {
                    out.push(Discovered {
                        instance: target,
                        responder: from,
                    });
                }
            }
        }
        false
    })?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrvData {
    pub priority: u16,
    /// The SRV weight field, read as capacity.
    pub capacity: u16,
    pub port: u16,
    pub target: Name,
}

/// Records gathered for one new instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedRecords {
    pub instance: Name,
    pub responder: SocketAddr,
    pub ttl: u32,
    pub srv: SrvData,
    pub txt: Vec<Vec<u8>>,
    pub addr6: Ipv6Addr,
    pub addr4: Option<Ipv4Addr>,
}

impl ResolvedRecords {
    pub fn metadata(&self) -> Result<ServiceMetadata, SemanticsError> {
        from_txt(&self.txt)
    }
}

/// Picks the instance to use among several offering the same service:
/// lowest priority, then highest capacity, then smallest instance name.
pub fn select_srv<'a, I>(candidates: I) -> Option<&'a ResolvedRecords>
where
    I: IntoIterator<Item = &'a ResolvedRecords>,
{
    candidates.into_iter().min_by(|a, b| {
        a.srv
            .priority
            .cmp(&b.srv.priority)
            .then(b.srv.capacity.cmp(&a.srv.capacity))
            .then_with(|| a.instance.cmp(&b.instance))
    })
}

/// Whatever arrived before a handshake gave up.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartialRecords {
    pub srv: Option<SrvData>,
    pub txt: Option<Vec<Vec<u8>>>,
    pub addr6: Option<Ipv6Addr>,
    pub addr4: Option<Ipv4Addr>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HandshakeError {
    #[error("handshake timed out; missing {missing:?}")]
    Timeout {
        missing: Vec<RecordType>,
        partial: PartialRecords,
    },
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandshakeOptions {
    /// How long to wait for each answer.
    pub window: Duration,
    /// Also ask for an A record.
    pub query_a: bool,
}

impl Default for HandshakeOptions {
    fn default() -> Self {
        HandshakeOptions {
            window: SIM_PROBE_WINDOW,
            query_a: false,
        }
    }
}

fn ask<T: Transport>(
    transport: &mut T,
    to: SocketAddr,
    name: &Name,
    qtype: RecordType,
    window: Duration,
) -> Result<Option<Record>, TransportError> {
    let id = send_query(
        transport,
        Destination::Unicast(to),
        Question::new(name.clone(), qtype),
    )?;
    let mut found = None;
    collect(transport, id, window, |msg, _| {
        found = msg
            .answers
            .into_iter()
            .find(|rr| rr.rtype() == qtype && rr.name == *name);
        found.is_some()
    })?;
    Ok(found)
}

/// Resolves SRV, TXT and AAAA (and A if asked) for an instance the
/// directory has not seen before. Known instances cost nothing: no message
/// is sent and `Ok(None)` is returned.
pub fn registration_handshake<T: Transport>(
    known: &HashSet<Name>,
    discovered: &Discovered,
    transport: &mut T,
    options: HandshakeOptions,
) -> Result<Option<ResolvedRecords>, HandshakeError> {
    if known.contains(&discovered.instance) {
        return Ok(None);
    }
    let name = &discovered.instance;
    let to = discovered.responder;
    let mut partial = PartialRecords::default();
    let mut ttl = u32::MAX;

    let mut types = vec![RecordType::Srv, RecordType::Txt, RecordType::Aaaa];
    if options.query_a {
        types.push(RecordType::A);
    }
    let mut missing = Vec::new();
    for qtype in types {
        match ask(transport, to, name, qtype, options.window)? {
            Some(rr) => {
                ttl = ttl.min(rr.ttl);
                match rr.data {
                    RData::Srv {
                        priority,
                        weight,
                        port,
                        target,
                    } => {
                        partial.srv = Some(SrvData {
                            priority,
                            capacity: weight,
                            port,
                            target,
                        })
                    }
                    RData::Txt(parts) => partial.txt = Some(parts),
                    RData::Aaaa(a) => partial.addr6 = Some(a),
                    RData::A(a) => partial.addr4 = Some(a),
                    _ => missing.push(qtype),
                }
            }
            None => missing.push(qtype),
        }
    }
    // A is optional: a silent A question is not a failure.
    missing.retain(|t| *t != RecordType::A);
    match (&partial.srv, &partial.txt, partial.addr6) {
        (Some(srv), Some(txt), Some(addr6)) if missing.is_empty() => Ok(Some(ResolvedRecords {
            instance: name.clone(),
            responder: to,
            ttl,
            srv: srv.clone(),
            txt: txt.clone(),
            addr6,
            addr4: partial.addr4,
        })),
        _ => Err(HandshakeError::Timeout { missing, partial }),
    }
}
