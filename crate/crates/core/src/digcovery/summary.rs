use serde::{Deserialize, Serialize};

use crate::digrectory::{DirectoryEntry, GeoPoint};
use crate::dns::Name;

fn is_false(b: &bool) -> bool {
    !*b
}

/// What digcovery knows about one instance under one service path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointerSummary {
    /// Instance label within `domain`.
    pub instance: String,
    pub service_path: Name,
    pub domain: Name,
    pub rt: String,
    #[serde(default)]
    pub geo: Option<GeoPoint>,
    pub revision: u64,
    /// Set on the summary that withdraws a pointer.
    #[serde(default, skip_serializing_if = "is_false")]
    pub removed: bool,
}

impl PointerSummary {
    pub fn of(entry: &DirectoryEntry, path: &Name, revision: u64) -> Self {
        PointerSummary {
            instance: entry.instance.clone(),
            service_path: path.clone(),
            domain: entry.domain.clone(),
            rt: entry.meta.rt.clone(),
            geo: entry.geo,
            revision,
            removed: false,
        }
    }

    pub fn key(&self) -> DocKey {
        DocKey {
            domain: self.domain.clone(),
            instance: self.instance.to_ascii_lowercase(),
            service_path: self.service_path.clone(),
        }
    }

    pub fn instance_name(&self) -> Option<Name> {
        self.domain.prepend(&self.instance).ok()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.instance.is_empty() {
            return Err("empty instance".into());
        }
        if self.instance_name().is_none() {
            return Err(format!(
                "instance {} does not form a valid name",
                self.instance
            ));
        }
        if self.service_path.is_root() {
            return Err("empty service path".into());
        }
        if let Some(g) = self.geo {
            if !g.is_valid() {
                return Err(format!("geo point out of range: {g:?}"));
            }
        }
        Ok(())
    }
}

/// Identity of a summary; also the result order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DocKey {
    pub domain: Name,
    pub instance: String,
    pub service_path: Name,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectoryEndpoint {
    pub host: String,
    #[serde(default = "default_dns_port")]
    pub dns_port: u16,
    #[serde(default)]
    pub http_port: Option<u16>,
}

fn default_dns_port() -> u16 {
    5300
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainRecord {
    pub domain: Name,
    pub endpoint: DirectoryEndpoint,
    #[serde(default)]
    pub owner: String,
    /// Seconds timestamp.
    #[serde(default)]
    pub created: u64,
}

/// One query result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub domain: Name,
    pub instance: String,
    pub service_path: Name,
    pub rt: String,
    pub geo: Option<GeoPoint>,
}

impl From<&PointerSummary> for Hit {
    fn from(s: &PointerSummary) -> Self {
        Hit {
            domain: s.domain.clone(),
            instance: s.instance.clone(),
            service_path: s.service_path.clone(),
            rt: s.rt.clone(),
            geo: s.geo,
        }
    }
}
