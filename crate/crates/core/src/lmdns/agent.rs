use std::net::{Ipv4Addr, Ipv6Addr};

use serde::{Deserialize, Serialize};

use super::{Destination, Transport, TransportError};
use crate::dns::{self, Compression, Message, Name, RData, Record, RecordType};
use crate::semantics::{to_txt, ServiceMetadata, TxtMode};

/// Everything a smart object advertises about itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmartObjectProfile {
    /// Instance label, e.g. `light_lab`.
    pub instance: String,
    pub domain: Name,
    /// SRV target host.
    pub hostname: Name,
    /// Primary subtype path, e.g. `_lamp._sub._coap._udp`.
    pub service_path: Name,
    /// Further PTR paths (service and technology subtypes) for the same instance.
    #[serde(default)]
    pub aliases: Vec<Name>,
    pub meta: ServiceMetadata,
    pub port: u16,
    #[serde(default)]
    pub priority: u16,
    #[serde(default)]
    pub capacity: u16,
    pub addr6: Ipv6Addr,
    #[serde(default)]
    pub addr4: Option<Ipv4Addr>,
    /// Whether A questions are answered at all.
    #[serde(default)]
    pub answer_a: bool,
    pub ttl: u32,
}

fn ends_in_transport(path: &Name) -> bool {
    path.labels()
        .last()
        .map(|l| l.eq_ignore_ascii_case(b"_udp") || l.eq_ignore_ascii_case(b"_tcp"))
        .unwrap_or(false)
}

impl SmartObjectProfile {
    pub fn instance_name(&self) -> Name {
        self.domain
            .prepend(&self.instance)
            .expect("validated profile has a representable instance name")
    }

    pub fn ptr_paths(&self) -> impl Iterator<Item = &Name> {
        std::iter::once(&self.service_path).chain(&self.aliases)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.instance.is_empty() {
            return Err("empty instance label".into());
        }
        self.domain
            .prepend(&self.instance)
            .map_err(|e| format!("instance name: {e}"))?;
        if let Some(p) = self.ptr_paths().find(|p| !ends_in_transport(p)) {
            return Err(format!("{p} does not end in _udp or _tcp"));
        }
        self.meta.validate().map_err(|e| e.to_string())
    }

    /// A PTR question matches a path given bare, under the profile's domain
    /// or under `local`.
    fn serves_path(&self, qname: &Name) -> bool {
        let local: Name = "local".parse().expect("static name");
        self.ptr_paths().any(|p| {
            qname == p
                || qname.strip_suffix(&self.domain).as_ref() == Some(p)
                || qname.strip_suffix(&local).as_ref() == Some(p)
        })
    }

    fn is_self(&self, qname: &Name) -> bool {
        *qname == self.instance_name() || *qname == self.hostname
    }

    fn answers_for(&self, q: &dns::Question) -> Vec<Record> {
        let ttl = self.ttl;
        let instance = self.instance_name();
        match q.qtype {
            RecordType::Ptr if self.serves_path(&q.name) => {
                vec![Record::new(q.name.clone(), ttl, RData::Ptr(instance))]
            }
            RecordType::Srv if q.name == instance => vec![Record::new(
                instance,
                ttl,
                RData::Srv {
                    priority: self.priority,
                    weight: self.capacity,
                    port: self.port,
                    target: self.hostname.clone(),
                },
            )],
            RecordType::Txt if self.is_self(&q.name) => match to_txt(&self.meta, TxtMode::Single) {
                Ok(parts) => vec![Record::new(q.name.clone(), ttl, RData::Txt(parts))],
                Err(_) => Vec::new(),
            },
            RecordType::Aaaa if self.is_self(&q.name) => {
                vec![Record::new(q.name.clone(), ttl, RData::Aaaa(self.addr6))]
            }
            RecordType::A if self.answer_a && self.is_self(&q.name) => match self.addr4 {
                Some(a) => vec![Record::new(q.name.clone(), ttl, RData::A(a))],
                None => Vec::new(),
            },
            _ => Vec::new(),
        }
    }

    /// Decodes a packet, answers it and encodes the reply.
    pub fn handle_packet(&self, packet: &[u8]) -> Option<Vec<u8>> {
        let query = dns::decode(packet).ok()?;
        let reply = answer_query(self, &query)?;
        dns::encode(&reply, Compression::On).ok()
    }

    /// Serves queries until `keep_running` returns false. Unicast queries
    /// get unicast replies, multicast ones are answered to the group.
    pub fn serve<T: Transport>(
        &self,
        transport: &mut T,
        poll: std::time::Duration,
        mut keep_running: impl FnMut() -> bool,
    ) -> Result<(), TransportError> {
        while keep_running() {
            let Some(incoming) = transport.recv(poll)? else {
                continue;
            };
            if let Some(reply) = self.handle_packet(&incoming.bytes) {
                let dest = if incoming.multicast {
                    Destination::Multicast
                } else {
                    Destination::Unicast(incoming.from)
                };
                transport.send(dest, &reply)?;
            }
        }
        Ok(())
    }
}

/// Answers whatever questions name this object's paths or records. Returns
/// `None` when nothing matches; the reply never has authority or additional
/// records.
pub fn answer_query(profile: &SmartObjectProfile, query: &Message) -> Option<Message> {
    if query.header.qr || query.questions.is_empty() {
        return None;
    }
    let answers: Vec<Record> = query
        .questions
        .iter()
        .flat_map(|q| profile.answers_for(q))
        .collect();
    if answers.is_empty() {
        return None;
    }
    let mut reply = Message::response_to(query);
    reply.answers = answers;
    Some(reply)
}
