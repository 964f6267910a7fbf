//! The global discovery service: a registry of domains and their
//! directories, a pointer index over what those directories publish, and
//! the query DSL evaluated against it.

mod index;
mod query;
mod summary;

use std::collections::{BTreeMap, HashMap};
use std::net::IpAddr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digrectory::GeoPoint;
use crate::dns::{rcode, Message, Name, RData, Record, RecordType};

use index::Index;
pub use index::{CacheStats, FilterCache, NodeCacheEvent, DEFAULT_CACHE_CAPACITY};
pub use query::{cacheability, glob_match, Cacheability, Field, NodeKind, Query, Scalar};
pub use summary::{DirectoryEndpoint, DocKey, DomainRecord, Hit, PointerSummary};

pub const DEFAULT_PAGE_LIMIT: usize = 100;
/// TTL on records served by the DNS front.
pub const REDIRECT_TTL: u32 = 300;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DigcoveryError {
    #[error("domain {0} is already registered")]
    DuplicateDomain(Name),
    #[error("domain {0} is not registered")]
    UnknownDomain(Name),
    #[error("invalid summary: {0}")]
    InvalidSummary(String),
    #[error("malformed query: {0}")]
    MalformedQuery(String),
    #[error("malformed pattern: {0}")]
    MalformedPattern(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    #[serde(default)]
    pub offset: usize,
    #[serde(default = "default_limit")]
    pub limit: usize,
}

fn default_limit() -> usize {
    DEFAULT_PAGE_LIMIT
}

impl Default for Page {
    fn default() -> Self {
        Page {
            offset: 0,
            limit: DEFAULT_PAGE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultPage {
    pub total: usize,
    pub offset: usize,
    pub hits: Vec<Hit>,
}

/// A domain holding at least one service that matched a discovery pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainMatch {
    pub domain: Name,
    pub endpoint: DirectoryEndpoint,
    /// Matching summaries in this domain.
    pub services: usize,
}

/// Service path patterns: labels separated by dots, where `*` stands for
/// exactly one label, except as the final label, where it stands for one
/// or more.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathPattern {
    labels: Vec<String>,
}

impl PathPattern {
    pub fn parse(s: &str) -> Result<Self, DigcoveryError> {
        let s = s.strip_suffix('.').unwrap_or(s);
        if s.is_empty() {
            return Err(DigcoveryError::MalformedPattern("empty pattern".into()));
        }
        let labels: Vec<String> = s.split('.').map(str::to_ascii_lowercase).collect();
        if labels.iter().any(String::is_empty) {
            return Err(DigcoveryError::MalformedPattern(format!(
                "empty label in {s:?}"
            )));
        }
        Ok(PathPattern { labels })
    }

    pub fn matches(&self, path: &Name) -> bool {
        let got: Vec<String> = path
            .labels()
            .iter()
            .map(|l| String::from_utf8_lossy(l).to_ascii_lowercase())
            .collect();
        let n = self.labels.len();
        let open_tail = self.labels[n - 1] == "*";
        if open_tail {
            if got.len() < n {
                return false;
            }
        } else if got.len() != n {
            return false;
        }
        self.labels
            .iter()
            .zip(&got)
            .all(|(p, g)| p == "*" || p == g)
    }
}

pub struct Digcovery {
    domains: BTreeMap<Name, DomainRecord>,
    index: Index,
    /// Highest revision applied per summary key, kept across removals so
    /// replayed deltas stay idempotent.
    applied: HashMap<DocKey, u64>,
}

impl Default for Digcovery {
    fn default() -> Self {
        Digcovery::new()
    }
}

impl Digcovery {
    pub fn new() -> Self {
        Digcovery {
            domains: BTreeMap::new(),
            index: Index::new(),
            applied: HashMap::new(),
        }
    }

    pub fn register_domain(&mut self, rec: DomainRecord) -> Result<(), DigcoveryError> {
        if self.domains.contains_key(&rec.domain) {
            return Err(DigcoveryError::DuplicateDomain(rec.domain));
        }
        self.domains.insert(rec.domain.clone(), rec);
        Ok(())
    }

    pub fn domain(&self, d: &Name) -> Option<&DomainRecord> {
        self.domains.get(d)
    }

    pub fn domains(&self) -> impl Iterator<Item = &DomainRecord> {
        self.domains.values()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.len() == 0
    }

    /// Live summaries in result order.
    pub fn summaries(&self) -> impl Iterator<Item = &PointerSummary> {
        self.index.iter()
    }

    fn check_batch(&self, domain: &Name, batch: &[PointerSummary]) -> Result<(), DigcoveryError> {
        if !self.domains.contains_key(domain) {
            return Err(DigcoveryError::UnknownDomain(domain.clone()));
        }
        for s in batch {
            if s.domain != *domain {
                return Err(DigcoveryError::InvalidSummary(format!(
                    "summary for {} in a batch for {domain}",
                    s.domain
                )));
            }
            s.validate().map_err(DigcoveryError::InvalidSummary)?;
        }
        Ok(())
    }

    /// Applies a delta. Summaries at or below the revision already applied
    /// for their key are ignored. Returns how many took effect.
    pub fn ingest(
        &mut self,
        domain: &Name,
        batch: &[PointerSummary],
    ) -> Result<usize, DigcoveryError> {
        self.check_batch(domain, batch)?;
        let mut accepted = 0;
        for s in batch {
            let key = s.key();
            if self.applied.get(&key).is_some_and(|&r| s.revision <= r) {
                continue;
            }
            self.applied.insert(key.clone(), s.revision);
            if s.removed {
                if self.index.remove(&key).is_some() {
                    accepted += 1;
                }
            } else {
                self.index.upsert(s.clone());
                accepted += 1;
            }
        }
        Ok(accepted)
    }

    /// Replaces everything known for `domain` with `batch`. Revision
    /// history for the domain restarts from the snapshot. Returns how many
    /// summaries were new or changed.
    pub fn ingest_snapshot(
        &mut self,
        domain: &Name,
        batch: &[PointerSummary],
    ) -> Result<usize, DigcoveryError> {
        self.check_batch(domain, batch)?;
        let mut wanted: BTreeMap<DocKey, &PointerSummary> = BTreeMap::new();
        for s in batch.iter().filter(|s| !s.removed) {
            let k = s.key();
            if wanted.get(&k).is_none_or(|old| old.revision < s.revision) {
                wanted.insert(k, s);
            }
        }
        let stale: Vec<DocKey> = self
            .index
            .keys_in_domain(domain)
            .filter(|k| !wanted.contains_key(*k))
            .cloned()
            .collect();
        for k in &stale {
            self.index.remove(k);
        }
        self.applied.retain(|k, _| k.domain != *domain);
        let mut accepted = 0;
        for (k, s) in wanted {
            self.applied.insert(k.clone(), s.revision);
            if self.index.get(&k) != Some(s) {
                self.index.upsert(s.clone());
                accepted += 1;
            }
        }
        Ok(accepted)
    }

    pub fn execute(&self, q: &Query) -> Result<Vec<Hit>, DigcoveryError> {
        q.validate()?;
        let set = self.index.eval(q, None);
        Ok(self
            .index
            .collect(&set)
            .into_iter()
            .map(Hit::from)
            .collect())
    }

    pub fn execute_page(&self, q: &Query, page: Page) -> Result<ResultPage, DigcoveryError> {
        let all = self.execute(q)?;
        Ok(ResultPage {
            total: all.len(),
            offset: page.offset,
            hits: all.into_iter().skip(page.offset).take(page.limit).collect(),
        })
    }

    /// Same result as [`Digcovery::execute`]; cacheable nodes go through
    /// `cache`.
    pub fn execute_cached(
        &self,
        q: &Query,
        cache: &FilterCache,
    ) -> Result<(Vec<Hit>, CacheStats), DigcoveryError> {
        q.validate()?;
        let mut stats = CacheStats::default();
        let set = self.index.eval(q, Some((cache, &mut stats)));
        let hits = self
            .index
            .collect(&set)
            .into_iter()
            .map(Hit::from)
            .collect();
        Ok((hits, stats))
    }

    /// Domains with at least one service path matching `pattern`, with the
    /// directory to ask next.
    pub fn discover(&self, pattern: &str) -> Result<Vec<DomainMatch>, DigcoveryError> {
        let p = PathPattern::parse(pattern)?;
        let mut counts: BTreeMap<&Name, usize> = BTreeMap::new();
        for s in self.index.iter().filter(|s| p.matches(&s.service_path)) {
            *counts.entry(&s.domain).or_default() += 1;
        }
        Ok(counts
            .into_iter()
            .filter_map(|(d, n)| {
                self.domains.get(d).map(|rec| DomainMatch {
                    domain: d.clone(),
                    endpoint: rec.endpoint.clone(),
                    services: n,
                })
            })
            .collect())
    }

    /// DNS front. A PTR question names a service path pattern; each
    /// matching domain comes back as a PTR to the domain's directory, with
    /// its address as glue when the endpoint host is a literal address.
    pub fn respond(&self, query: &Message) -> Message {
        let mut reply = Message::response_to(query);
        if query.header.qr || query.questions.is_empty() {
            reply.header.rcode = rcode::FORMERR;
            return reply;
        }
        for q in &query.questions {
            if q.qtype != RecordType::Ptr {
                reply.header.rcode = rcode::NOTIMP;
                continue;
            }
            let matches = match self.discover(&q.name.to_string()) {
                Ok(m) if !m.is_empty() => m,
                _ => {
                    reply.header.rcode = rcode::NXDOMAIN;
                    continue;
                }
            };
            for m in matches {
                reply.answers.push(Record::new(
                    q.name.clone(),
                    REDIRECT_TTL,
                    RData::Ptr(m.domain.clone()),
                ));
                match m.endpoint.host.parse::<IpAddr>() {
                    Ok(IpAddr::V4(a)) => {
                        reply
                            .additional
                            .push(Record::new(m.domain, REDIRECT_TTL, RData::A(a)))
                    }
                    Ok(IpAddr::V6(a)) => {
                        reply
                            .additional
                            .push(Record::new(m.domain, REDIRECT_TTL, RData::Aaaa(a)))
                    }
                    Err(_) => {}
                }
            }
        }
        reply
    }
}

/// Equirectangular distance in kilometres.
pub fn approx_distance_km(a: GeoPoint, b: GeoPoint) -> f64 {
    const EARTH_RADIUS_KM: f64 = 6371.0;
    let mean_lat = ((a.lat + b.lat) / 2.0).to_radians();
    let x = (b.lon - a.lon).to_radians() * mean_lat.cos();
    let y = (b.lat - a.lat).to_radians();
    (x * x + y * y).sqrt() * EARTH_RADIUS_KM
}

/// Orders hits by distance from `origin`, nearest first; hits without a
/// location go last. The sort is stable.
pub fn sort_by_distance(hits: &mut [Hit], origin: GeoPoint) {
    hits.sort_by(|a, b| {
        let d = |h: &Hit| h.geo.map(|g| approx_distance_km(origin, g));
        match (d(a), d(b)) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
    });
}

#[cfg(test)]
mod tests;
