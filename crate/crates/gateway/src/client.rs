//! Single-shot client commands behind the `digstack` binary.

use std::fmt::Write as _;
use std::net::{IpAddr, SocketAddr, UdpSocket};
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use digstack_core::digcovery::{DomainMatch, ResultPage};
use digstack_core::digrectory::{DirectoryEntry, JournalRecord};
use digstack_core::dns::{self, rcode, Compression, Message, Name, Question, RData, RecordType};
use digstack_core::netsim::{reference_report, ComparisonRow, FrameBudget};
use digstack_core::semantics::{from_txt, ServiceMetadata};

use crate::api::{EntryOutcome, ErrorReply, Outcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("parse error in {0}")]
    Parse(String),
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("server error: {0}")]
    Server(String),
    #[error("name error: {0}")]
    NotFound(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::NotFound(_) => 2,
            _ => 1,
        }
    }
}

/// A digrectory DNS server, optionally tied to one domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnsEndpoint {
    pub domain: Option<Name>,
    pub addr: SocketAddr,
}

impl FromStr for DnsEndpoint {
    type Err = String;

    /// `host:port` or `domain=host:port`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (domain, addr) = match s.split_once('=') {
            Some((d, a)) => (Some(d.parse::<Name>().map_err(|e| format!("{d}: {e}"))?), a),
            None => (None, s),
        };
        let addr = addr
            .parse()
            .map_err(|_| format!("{addr:?} is not a host:port address"))?;
        Ok(DnsEndpoint { domain, addr })
    }
}

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub digcovery: String,
    pub digrectory: String,
    pub digrectory_dns: Vec<DnsEndpoint>,
    pub json: bool,
    pub timeout: Duration,
}

impl CliConfig {
    pub fn new(
        digcovery: &str,
        digrectory: &str,
        dns: Vec<DnsEndpoint>,
        timeout_secs: f64,
    ) -> Result<Self, CliError> {
        if !(timeout_secs > 0.0 && timeout_secs.is_finite()) {
            return Err(CliError::Config(format!(
                "timeout must be positive, got {timeout_secs}"
            )));
        }
        Ok(CliConfig {
            digcovery: digcovery.trim_end_matches('/').into(),
            digrectory: digrectory.trim_end_matches('/').into(),
            digrectory_dns: dns,
            json: false,
            timeout: Duration::from_secs_f64(timeout_secs),
        })
    }

    /// The DNS server for `domain`: a domain-specific endpoint if one is
    /// configured, otherwise the first general one.
    pub fn dns_for(&self, domain: &Name) -> Result<SocketAddr, CliError> {
        self.digrectory_dns
            .iter()
            .find(|e| e.domain.as_ref() == Some(domain))
            .or_else(|| self.digrectory_dns.iter().find(|e| e.domain.is_none()))
            .map(|e| e.addr)
            .ok_or_else(|| CliError::Config(format!("no digrectory DNS endpoint for {domain}")))
    }
}

/// Output of a command, as text or JSON.
pub trait Report: Serialize {
    fn text(&self) -> String;

    fn render(&self, json: bool) -> String {
        if json {
            serde_json::to_string_pretty(self).expect("reports serialize")
        } else {
            self.text()
        }
    }
}

pub fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

fn transport(e: ureq::Error, url: &str) -> CliError {
    match e {
        ureq::Error::Timeout(_) => CliError::Timeout(url.into()),
        other => CliError::Unreachable(format!("{url}: {other}")),
    }
}

fn read_reply<T: DeserializeOwned>(
    mut resp: ureq::http::Response<ureq::Body>,
    url: &str,
) -> Result<T, CliError> {
    let status = resp.status().as_u16();
    if (200..300).contains(&status) {
        return resp
            .body_mut()
            .read_json()
            .map_err(|e| CliError::Server(format!("{url}: unreadable reply: {e}")));
    }
    let why = resp
        .body_mut()
        .read_json::<ErrorReply>()
        .map(|r| r.error)
        .unwrap_or_else(|_| format!("status {status}"));
    Err(match status {
        400 => CliError::Malformed(why),
        404 => CliError::NotFound(why),
        _ => CliError::Server(why),
    })
}

/// Reads a fixture file: a JSON array of entries, or journal lines.
pub fn load_entries(path: &Path) -> Result<Vec<DirectoryEntry>, CliError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::FileNotFound(shown.clone()),
        _ => CliError::Config(format!("{shown}: {e}")),
    })?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{shown}: {e}")));
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<JournalRecord>(line) {
            Ok(JournalRecord::Entry(e)) => out.push(*e),
            Ok(JournalRecord::Remove { remove }) => out.retain(|e| e.instance != remove),
            Err(e) => {
                return Err(CliError::Parse(format!("{shown}: line {}: {e}", i + 1)));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterReport {
    pub results: Vec<EntryOutcome>,
    pub created: usize,
    pub updated: usize,
}

impl Report for RegisterReport {
    fn text(&self) -> String {
        let mut s = String::new();
        for r in &self.results {
            let what = match (r.outcome, r.changed) {
                (Outcome::Created, _) => "created",
                (Outcome::Updated, true) => "updated",
                (Outcome::Updated, false) => "updated (unchanged)",
            };
            let _ = writeln!(s, "{} {what} at revision {}", r.instance, r.revision);
        }
        let mut parts = Vec::new();
        if self.created > 0 || self.updated == 0 {
            parts.push(format!("{} created", self.created));
        }
        if self.updated > 0 {
            parts.push(format!("{} updated", self.updated));
        }
        s + &parts.join(", ")
    }
}

pub fn register(cfg: &CliConfig, file: &Path) -> Result<RegisterReport, CliError> {
    let entries = load_entries(file)?;
    let url = format!("{}/api/v1/entries", cfg.digrectory);
    let resp = agent(cfg.timeout)
        .post(&url)
        .send_json(&entries)
        .map_err(|e| transport(e, &url))?;
    let results: Vec<EntryOutcome> = read_reply(resp, &url)?;
    let created = results
        .iter()
        .filter(|r| r.outcome == Outcome::Created)
        .count();
    Ok(RegisterReport {
        updated: results.len() - created,
        created,
        results,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoverReport {
    pub pattern: String,
    pub domains: Vec<DomainMatch>,
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut l = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i + 1 == widths.len() {
                l.push_str(c);
            } else {
                let _ = write!(l, "{c:<w$}  ");
            }
        }
        l.trim_end().to_string()
    };
    let mut out = vec![line(header.to_vec())];
    out.extend(
        rows.iter()
            .map(|r| line(r.iter().map(String::as_str).collect())),
    );
    out.join("\n")
}

impl Report for DiscoverReport {
    fn text(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .domains
            .iter()
            .map(|m| {
                vec![
                    m.domain.to_string(),
                    format!("{}:{}", m.endpoint.host, m.endpoint.dns_port),
                    m.services.to_string(),
                ]
            })
            .collect();
        table(&["DOMAIN", "DIRECTORY", "SERVICES"], &rows)
    }
}

pub fn discover(cfg: &CliConfig, pattern: &str) -> Result<DiscoverReport, CliError> {
    let url = format!("{}/api/v1/discover", cfg.digcovery);
    let resp = agent(cfg.timeout)
        .get(&url)
        .query("pattern", pattern)
        .call()
        .map_err(|e| transport(e, &url))?;
    Ok(DiscoverReport {
        pattern: pattern.into(),
        domains: read_reply(resp, &url)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport(pub ResultPage);

impl Report for QueryReport {
    fn text(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .0
            .hits
            .iter()
            .map(|h| {
                vec![
                    h.domain.to_string(),
                    h.instance.clone(),
                    h.service_path.to_string(),
                    h.rt.clone(),
                    h.geo
                        .map_or("-".into(), |g| format!("{:.4},{:.4}", g.lat, g.lon)),
                ]
            })
            .collect();
        let mut s = table(&["DOMAIN", "INSTANCE", "SERVICE", "RT", "GEO"], &rows);
        let _ = write!(s, "\n{} of {} hits", self.0.hits.len(), self.0.total);
        s
    }
}

pub fn query(cfg: &CliConfig, file: &Path) -> Result<QueryReport, CliError> {
    let shown = file.display().to_string();
    let text = std::fs::read_to_string(file).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::FileNotFound(shown.clone()),
        _ => CliError::Config(format!("{shown}: {e}")),
    })?;
    let body: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{shown}: {e}")))?;
    let url = format!("{}/api/v1/query", cfg.digcovery);
    let resp = agent(cfg.timeout)
        .post(&url)
        .send_json(&body)
        .map_err(|e| transport(e, &url))?;
    Ok(QueryReport(read_reply(resp, &url)?))
}

/// Blocking DNS over UDP against one server.
pub struct DnsClient {
    sock: UdpSocket,
    server: SocketAddr,
    timeout: Duration,
    next_id: u16,
}

impl DnsClient {
    pub fn new(server: SocketAddr, timeout: Duration) -> Result<Self, CliError> {
        let local: SocketAddr = if server.is_ipv4() {
            ([0, 0, 0, 0], 0).into()
        } else {
            (std::net::Ipv6Addr::UNSPECIFIED, 0).into()
        };
        let sock = UdpSocket::bind(local).map_err(|e| CliError::Unreachable(e.to_string()))?;
        Ok(DnsClient {
            sock,
            server,
            timeout,
            next_id: std::process::id() as u16,
        })
    }

    pub fn ask(&mut self, qname: &Name, qtype: RecordType) -> Result<Message, CliError> {
        self.next_id = self.next_id.wrapping_add(1);
        let id = self.next_id;
        let q = Message::query(id, Question::new(qname.clone(), qtype));
        let bytes =
            dns::encode(&q, Compression::On).map_err(|e| CliError::Malformed(e.to_string()))?;
        let unreachable =
            |e: std::io::Error| CliError::Unreachable(format!("{}: {e}", self.server));
        self.sock
            .send_to(&bytes, self.server)
            .map_err(unreachable)?;
        let deadline = Instant::now() + self.timeout;
        let mut buf = [0u8; 4096];
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(CliError::Timeout(format!(
                    "{qtype} {qname} at {}",
                    self.server
                )));
            }
            self.sock
                .set_read_timeout(Some(left))
                .map_err(unreachable)?;
            match self.sock.recv_from(&mut buf) {
                Ok((n, from)) if from == self.server => match dns::decode(&buf[..n]) {
                    Ok(m) if m.header.id == id && m.header.qr => return Ok(m),
                    _ => continue,
                },
                Ok(_) => continue,
                Err(e)
                    if matches!(
                        e.kind(),
                        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                    ) =>
                {
                    return Err(CliError::Timeout(format!(
                        "{qtype} {qname} at {}",
                        self.server
                    )));
                }
                Err(e) => return Err(unreachable(e)),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub instance: Name,
    pub server: SocketAddr,
    pub target: Name,
    pub port: u16,
    pub priority: u16,
    pub weight: u16,
    pub meta: ServiceMetadata,
    pub addrs: Vec<IpAddr>,
}

impl Report for Resolution {
    fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "instance  {}", self.instance);
        let _ = writeln!(s, "target    {}:{}", self.target, self.port);
        let _ = writeln!(s, "priority  {} weight {}", self.priority, self.weight);
        let m = &self.meta;
        let _ = write!(s, "metadata  rt={} ins={} lt={}", m.rt, m.ins, m.lt);
        if !m.model.is_empty() {
            let _ = write!(s, " model={}", m.model);
        }
        if !m.interface.is_empty() {
            let _ = write!(s, " if={}", m.interface);
        }
        if !m.verbs.is_empty() {
            let _ = write!(s, " verbs={}", m.verbs.join(","));
        }
        for (k, v) in &m.extra {
            let _ = write!(s, " {k}={v}");
        }
        for a in &self.addrs {
            let kind = if a.is_ipv6() { "AAAA" } else { "A" };
            let _ = write!(s, "\n{kind:<8}  {a}");
        }
        s
    }
}

fn answer_for(m: &Message, what: &str) -> Result<Vec<RData>, CliError> {
    match m.header.rcode {
        rcode::NOERROR => Ok(m.answers.iter().map(|r| r.data.clone()).collect()),
        rcode::NXDOMAIN => Err(CliError::NotFound(format!("{what} does not exist"))),
        code => Err(CliError::Server(format!("{what}: rcode {code}"))),
    }
}

/// Look-up (SRV, TXT) then query (AAAA, A) against the directory only.
pub fn resolve(cfg: &CliConfig, instance: &str, domain: &str) -> Result<Resolution, CliError> {
    let domain: Name = domain
        .parse()
        .map_err(|e| CliError::Malformed(format!("domain {domain:?}: {e}")))?;
    let name = domain
        .prepend(instance)
        .map_err(|e| CliError::Malformed(format!("instance {instance:?}: {e}")))?;
    let server = cfg.dns_for(&domain)?;
    let mut dns = DnsClient::new(server, cfg.timeout)?;

    let srv = answer_for(&dns.ask(&name, RecordType::Srv)?, &name.to_string())?;
    let Some(RData::Srv {
        priority,
        weight,
        port,
        target,
    }) = srv.into_iter().find(|d| matches!(d, RData::Srv { .. }))
    else {
        return Err(CliError::NotFound(format!("{name} has no SRV record")));
    };
    let txt = answer_for(&dns.ask(&name, RecordType::Txt)?, &name.to_string())?;
    let meta = match txt.into_iter().find_map(|d| match d {
        RData::Txt(parts) => Some(parts),
        _ => None,
    }) {
        Some(parts) => {
            from_txt(&parts).map_err(|e| CliError::Server(format!("TXT of {name}: {e}")))?
        }
        None => return Err(CliError::NotFound(format!("{name} has no TXT record"))),
    };
    let mut addrs = Vec::new();
    for t in [RecordType::Aaaa, RecordType::A] {
        let reply = dns.ask(&target, t)?;
        if reply.header.rcode != rcode::NOERROR {
            continue;
        }
        for r in reply.answers {
            match r.data {
                RData::Aaaa(a) => addrs.push(IpAddr::V6(a)),
                RData::A(a) => addrs.push(IpAddr::V4(a)),
                _ => {}
            }
        }
    }
    Ok(Resolution {
        instance: name,
        server,
        target,
        port,
        priority,
        weight,
        meta,
        addrs,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramesReport {
    pub frame_size: usize,
    pub overhead: usize,
    pub payload_per_frame: usize,
    pub rows: Vec<ComparisonRow>,
}

impl Report for FramesReport {
    fn text(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let c = &r.comparison;
                vec![
                    r.name.clone(),
                    c.bytes_original.to_string(),
                    c.frames_original.to_string(),
                    c.bytes_optimized.to_string(),
                    c.frames_optimized.to_string(),
                    c.byte_savings.to_string(),
                ]
            })
            .collect();
        format!(
            "frame {} B, overhead {} B, payload {} B per frame\n{}",
            self.frame_size,
            self.overhead,
            self.payload_per_frame,
            table(
                &[
                    "EXCHANGE",
                    "BYTES",
                    "FRAMES",
                    "OPT BYTES",
                    "OPT FRAMES",
                    "SAVED"
                ],
                &rows
            )
        )
    }
}

pub fn compare_frames(frame_size: usize, overhead: usize) -> Result<FramesReport, CliError> {
    let budget =
        FrameBudget::new(frame_size, overhead).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(FramesReport {
        frame_size,
        overhead,
        payload_per_frame: budget.payload_per_frame(),
        rows: reference_report(&budget),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dns_endpoint_forms() {
        let e: DnsEndpoint = "127.0.0.1:5300".parse().unwrap();
        assert_eq!(e.domain, None);
        let e: DnsEndpoint = "rd.esiot.com=[::1]:53".parse().unwrap();
        assert_eq!(e.domain, Some("rd.esiot.com".parse().unwrap()));
        assert!("localhost".parse::<DnsEndpoint>().is_err());
    }

    #[test]
    fn endpoint_choice_prefers_the_domain() {
        let mut cfg = CliConfig::new("http://a", "http://b", vec![], 1.0).unwrap();
        let d: Name = "rd.esiot.com".parse().unwrap();
        assert!(matches!(cfg.dns_for(&d), Err(CliError::Config(_))));
        cfg.digrectory_dns = vec![
            "127.0.0.1:1".parse().unwrap(),
            "rd.esiot.com=127.0.0.1:2".parse().unwrap(),
        ];
        assert_eq!(cfg.dns_for(&d).unwrap().port(), 2);
        assert_eq!(cfg.dns_for(&"x.org".parse().unwrap()).unwrap().port(), 1);
    }

    #[test]
    fn timeout_must_be_positive() {
        for t in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                CliConfig::new("a", "b", vec![], t),
                Err(CliError::Config(_))
            ));
        }
    }

    #[test]
    fn journal_lines_load_with_removals() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("j.jsonl");
        let e = digstack_core::fixtures::lab_light_entry(0);
        let mut other = e.clone();
        other.instance = "light_desk".into();
        let text = [
            serde_json::to_string(&e).unwrap(),
            serde_json::to_string(&other).unwrap(),
            r#"{"remove":"light_lab"}"#.to_string(),
        ]
        .join("\n");
        std::fs::write(&p, text).unwrap();
        let got = load_entries(&p).unwrap();
        assert_eq!(got, vec![other]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.json");
        std::fs::write(&p, "[\n  {\"instance\": \"x\",\n  oops\n]").unwrap();
        let err = load_entries(&p).unwrap_err();
        assert!(
            matches!(&err, CliError::Parse(m) if m.contains("line 3")),
            "{err}"
        );
        assert!(matches!(
            load_entries(&dir.path().join("none")),
            Err(CliError::FileNotFound(_))
        ));
    }

    #[test]
    fn register_summary_line() {
        let r = |outcome| EntryOutcome {
            instance: "light_lab".into(),
            outcome,
            revision: 1,
            changed: true,
        };
        let created = RegisterReport {
            results: vec![r(Outcome::Created)],
            created: 1,
            updated: 0,
        };
        assert!(created.text().ends_with("\n1 created"));
        let updated = RegisterReport {
            results: vec![r(Outcome::Updated)],
            created: 0,
            updated: 1,
        };
        assert!(updated.text().ends_with("\n1 updated"));
    }

    #[test]
    fn empty_discover_prints_header_only() {
        let r = DiscoverReport {
            pattern: "_x.*".into(),
            domains: vec![],
        };
        assert_eq!(r.text(), "DOMAIN  DIRECTORY  SERVICES");
    }
}
