//! RFID integration: a stand-in EPCIS store and the EPC to IPv6 mapping.

use std::collections::{BTreeMap, HashMap};
use std::net::Ipv6Addr;

use indexmap::IndexMap;
use sha2::{Digest, Sha256};

use crate::semantics::ServiceMetadata;

/// Attribute map of a tag as the EPCIS API returns it.
pub type EpcAttributes = IndexMap<String, String>;

/// In-memory EPCIS: EPC identifier to attributes.
#[derive(Debug, Clone, Default)]
pub struct MockEpcis {
    tags: BTreeMap<String, EpcAttributes>,
}

impl MockEpcis {
    pub fn insert(&mut self, epc: impl Into<String>, attributes: EpcAttributes) {
        self.tags.insert(epc.into(), attributes);
    }

    pub fn query(&self, epc: &str) -> Option<&EpcAttributes> {
        self.tags.get(epc)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpcMapping {
    pub epc: String,
    pub addr6: Ipv6Addr,
    pub attributes: EpcAttributes,
}

/// Places each EPC at `prefix::/64` plus a hash of the identifier. Hash
/// collisions are resolved by rehashing with a salt, so the mapping stays
/// one-to-one.
#[derive(Debug, Clone)]
pub struct EpcMapper {
    prefix: [u8; 8],
    forward: HashMap<String, Ipv6Addr>,
    reverse: HashMap<Ipv6Addr, String>,
}

fn interface_id(epc: &str, salt: u32) -> [u8; 8] {
    let mut h = Sha256::new();
    h.update(salt.to_be_bytes());
    h.update(epc.as_bytes());
    let digest = h.finalize();
    digest[..8].try_into().expect("sha256 has 32 bytes")
}

impl EpcMapper {
    /// Uses the upper 64 bits of `prefix`.
    pub fn new(prefix: Ipv6Addr) -> Self {
        let octets = prefix.octets();
        EpcMapper {
            prefix: octets[..8].try_into().expect("16 octets"),
            forward: HashMap::new(),
            reverse: HashMap::new(),
        }
    }

    /// Address for `epc`, allocating one if needed.
    pub fn map(&mut self, epc: &str) -> Ipv6Addr {
        if let Some(a) = self.forward.get(epc) {
            return *a;
        }
        let mut salt = 0u32;
        let addr = loop {
            let mut octets = [0u8; 16];
            octets[..8].copy_from_slice(&self.prefix);
            octets[8..].copy_from_slice(&interface_id(epc, salt));
            let addr = Ipv6Addr::from(octets);
            if !self.reverse.contains_key(&addr) {
                break addr;
            }
            salt += 1;
        };
        self.forward.insert(epc.to_string(), addr);
        self.reverse.insert(addr, epc.to_string());
        addr
    }

    pub fn unmap(&mut self, epc: &str) -> Option<Ipv6Addr> {
        let addr = self.forward.remove(epc)?;
        self.reverse.remove(&addr);
        Some(addr)
    }

    pub fn address_of(&self, epc: &str) -> Option<Ipv6Addr> {
        self.forward.get(epc).copied()
    }

    pub fn epc_at(&self, addr: &Ipv6Addr) -> Option<&str> {
        self.reverse.get(addr).map(String::as_str)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, Ipv6Addr)> + '_ {
        self.forward.iter().map(|(epc, a)| (epc.as_str(), *a))
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Both directions agree and have equal size.
    pub fn is_bijective(&self) -> bool {
        self.forward.len() == self.reverse.len()
            && self
                .forward
                .iter()
                .all(|(epc, a)| self.reverse.get(a).map(String::as_str) == Some(epc))
    }
}

pub const EPC_INTERFACE: &str = "epcis";
pub const EPC_DEFAULT_TYPE: &str = "rfid";
pub const EPC_LIFETIME: u32 = 86400;

/// Metadata for a tag. `rt` and `model` attributes fill those fields; the
/// rest, plus the EPC itself, become extras.
pub fn epc_metadata(epc: &str, attributes: &EpcAttributes) -> ServiceMetadata {
    let mut meta = ServiceMetadata::new(
        attributes
            .get("rt")
            .cloned()
            .unwrap_or_else(|| EPC_DEFAULT_TYPE.into()),
        1,
        EPC_LIFETIME,
    )
    .with_interface(EPC_INTERFACE)
    .with_model(attributes.get("model").cloned().unwrap_or_default());
    meta = meta.with_extra("epc", epc);
    for (k, v) in attributes {
        if k != "rt" && k != "model" && k != "epc" {
            meta = meta.with_extra(k.clone(), v.clone());
        }
    }
    meta
}

/// Instance label for a mapped tag, derived from the address so it is
/// unique whenever the mapping is.
pub fn epc_instance_label(addr: &Ipv6Addr) -> String {
    let o = addr.octets();
    let iid: String = o[8..].iter().map(|b| format!("{b:02x}")).collect();
    format!("epc-{iid}")
}
