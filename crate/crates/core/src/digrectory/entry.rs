use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use crate::dns::{Name, RData, Record};
use crate::lmdns::RosterEntry;
use crate::semantics::{to_txt, ServiceMetadata, TxtMode};

/// Latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrvTarget {
    #[serde(default)]
    pub priority: u16,
    #[serde(default)]
    pub capacity: u16,
    pub port: u16,
    pub target: Name,
}

/// A directory's full record set for one service instance. This is also
/// the schema of fixture files and of journal lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectoryEntry {
    /// Instance label, e.g. `light_lab`.
    pub instance: String,
    pub domain: Name,
    pub ptr_paths: Vec<Name>,
    pub srv: SrvTarget,
    pub meta: ServiceMetadata,
    #[serde(default)]
    pub addrs: Vec<IpAddr>,
    #[serde(default)]
    pub geo: Option<GeoPoint>,
    /// Seconds the entry stays visible after `last_seen`.
    pub ttl: u32,
    /// Seconds timestamp.
    #[serde(default)]
    pub last_seen: u64,
    #[serde(default = "default_origin")]
    pub origin: String,
}

fn default_origin() -> String {
    "static".into()
}

impl DirectoryEntry {
    pub fn instance_name(&self) -> Name {
        self.domain
            .prepend(&self.instance)
            .expect("validated entry has a representable instance name")
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.instance.is_empty() {
            return Err("empty instance label".into());
        }
        self.domain
            .prepend(&self.instance)
            .map_err(|e| format!("instance name: {e}"))?;
        if !self.srv.target.is_subdomain_of(&self.domain) {
            return Err(format!(
                "SRV target {} is outside {}",
                self.srv.target, self.domain
            ));
        }
        if let Some(g) = self.geo {
            if !g.is_valid() {
                return Err(format!("geo point out of range: {g:?}"));
            }
        }
        if self.ttl == 0 {
            return Err("ttl must be positive".into());
        }
        self.meta.validate().map_err(|e| e.to_string())
    }

    /// Visible to lookups at `now`.
    pub fn is_live(&self, now: u64) -> bool {
        now.saturating_sub(self.last_seen) <= self.ttl as u64
    }

    /// Equal in everything that is published or answered.
    pub fn same_records(&self, other: &DirectoryEntry) -> bool {
        let mut a = self.clone();
        a.last_seen = other.last_seen;
        a == *other
    }

    pub(crate) fn srv_record(&self) -> Record {
        Record::new(
            self.instance_name(),
            self.ttl,
            RData::Srv {
                priority: self.srv.priority,
                weight: self.srv.capacity,
                port: self.srv.port,
                target: self.srv.target.clone(),
            },
        )
    }

    pub(crate) fn txt_record(&self, owner: &Name) -> Option<Record> {
        let parts = to_txt(&self.meta, TxtMode::Single).ok()?;
        Some(Record::new(owner.clone(), self.ttl, RData::Txt(parts)))
    }

    pub(crate) fn addr_records(&self, owner: &Name, v6: bool) -> Vec<Record> {
        self.addrs
            .iter()
            .filter_map(|a| match (a, v6) {
                (IpAddr::V6(a), true) => Some(RData::Aaaa(*a)),
                (IpAddr::V4(a), false) => Some(RData::A(*a)),
                _ => None,
            })
            .map(|d| Record::new(owner.clone(), self.ttl, d))
            .collect()
    }

    /// Builds an entry from an instance learnt over lmDNS. A `lat`/`lon`
    /// pair in the metadata extras becomes the entry's geo point.
    pub fn from_roster(r: &RosterEntry, now: u64) -> Result<Self, String> {
        let instance = r
            .records
            .instance
            .first_label()
            .ok_or("root instance name")?;
        let meta = r.records.metadata().map_err(|e| e.to_string())?;
        let geo = match (meta.extra.get("lat"), meta.extra.get("lon")) {
            (Some(lat), Some(lon)) => match (lat.parse(), lon.parse()) {
                (Ok(lat), Ok(lon)) => Some(GeoPoint { lat, lon }),
                _ => None,
            },
            _ => None,
        };
        let mut addrs = vec![IpAddr::V6(r.records.addr6)];
        if let Some(a) = r.records.addr4 {
            addrs.push(IpAddr::V4(a));
        }
        Ok(DirectoryEntry {
            instance,
            domain: r.records.instance.parent(),
            ptr_paths: vec![r.service_path.clone()],
            srv: SrvTarget {
                priority: r.records.srv.priority,
                capacity: r.records.srv.capacity,
                port: r.records.srv.port,
                target: r.records.srv.target.clone(),
            },
            ttl: meta.lt,
            meta,
            addrs,
            geo,
            last_seen: now,
            origin: "lmdns".into(),
        })
    }
}
