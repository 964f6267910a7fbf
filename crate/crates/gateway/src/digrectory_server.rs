//! A local directory daemon: DNS over UDP, a register endpoint and a
//! publish loop towards digcovery.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::Ordering;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{delete, post};
use axum::{Json, Router};
use tokio::net::{TcpListener, UdpSocket};
use tokio::sync::Notify;

use digstack_core::digcovery::{DirectoryEndpoint, DomainRecord, PointerSummary};
use digstack_core::digrectory::{
    Digrectory, DirectoryEntry, DirectoryError, PointerSink, RegisterOutcome,
};
use digstack_core::dns::Name;

use crate::api::{Accepted, EntryOutcome, ErrorReply, Outcome};
use crate::digcovery_server::{parse_body, ApiError};
use crate::{unix_now, Traffic};

#[derive(Debug, Clone)]
pub struct DirectoryConfig {
    pub domain: Name,
    pub dns_listen: SocketAddr,
    pub http_listen: SocketAddr,
    /// Base URL of digcovery; `None` runs the directory standalone.
    pub digcovery: Option<String>,
    pub journal: Option<PathBuf>,
    pub publish_interval: Duration,
    /// Host name or address announced to digcovery for this directory.
    pub advertise_host: String,
    pub timeout: Duration,
}

pub struct DirShared {
    pub directory: Mutex<Digrectory>,
    pub traffic: Traffic,
    kick: Notify,
}

impl DirShared {
    /// Asks the publish loop to run now.
    pub fn publish_soon(&self) {
        self.kick.notify_one();
    }
}

pub struct DirectoryHandle {
    pub http: SocketAddr,
    pub dns: SocketAddr,
    pub shared: Arc<DirShared>,
}

pub async fn spawn(cfg: DirectoryConfig) -> anyhow::Result<DirectoryHandle> {
    let directory = match &cfg.journal {
        Some(path) => Digrectory::with_journal(cfg.domain.clone(), path)?,
        None => Digrectory::new(cfg.domain.clone()),
    };
    let shared = Arc::new(DirShared {
        directory: Mutex::new(directory),
        traffic: Traffic::default(),
        kick: Notify::new(),
    });

    let sock = UdpSocket::bind(cfg.dns_listen).await?;
    let dns = sock.local_addr()?;
    tokio::spawn(dns_loop(sock, shared.clone()));

    let listener = TcpListener::bind(cfg.http_listen).await?;
    let http = listener.local_addr()?;
    let app = router(shared.clone());
    tokio::spawn(async move {
        let _ = axum::serve(listener, app).await;
    });

    if let Some(base) = cfg.digcovery.clone() {
        let record = DomainRecord {
            domain: cfg.domain.clone(),
            endpoint: DirectoryEndpoint {
                host: cfg.advertise_host.clone(),
                dns_port: dns.port(),
                http_port: Some(http.port()),
            },
            owner: String::new(),
            created: 0,
        };
        let sink = HttpSink::new(base, record, cfg.timeout);
        tokio::spawn(publish_loop(shared.clone(), sink, cfg.publish_interval));
    }
    Ok(DirectoryHandle { http, dns, shared })
}

pub fn router(shared: Arc<DirShared>) -> Router {
    Router::new()
        .route("/api/v1/entries", post(register).get(list))
        .route("/api/v1/entries/{instance}", delete(deregister))
        .layer(middleware::from_fn_with_state(shared.clone(), count))
        .with_state(shared)
}

async fn count(State(s): State<Arc<DirShared>>, req: Request, next: Next) -> Response {
    s.traffic.http_requests.fetch_add(1, Ordering::SeqCst);
    next.run(req).await
}

fn directory_error(e: DirectoryError) -> ApiError {
    let status = match e {
        DirectoryError::NameError(_) | DirectoryError::UnknownEpc(_) => StatusCode::NOT_FOUND,
        DirectoryError::Journal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    };
    ApiError(status, e.to_string())
}

/// Accepts one entry or an array. The batch is checked as a whole before
/// anything is stored.
async fn register(
    State(s): State<Arc<DirShared>>,
    body: Bytes,
) -> Result<Json<Vec<EntryOutcome>>, ApiError> {
    let value: serde_json::Value = parse_body(&body)?;
    let mut entries: Vec<DirectoryEntry> = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|e| vec![e])
    }
    .map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("invalid entry: {e}")))?;

    let now = unix_now();
    let mut dir = s.directory.lock().unwrap();
    for e in &mut entries {
        if &e.domain != dir.domain() {
            return Err(directory_error(DirectoryError::DomainMismatch {
                expected: dir.domain().clone(),
                got: e.domain.clone(),
            }));
        }
        e.validate()
            .map_err(|m| ApiError(StatusCode::BAD_REQUEST, format!("{}: {m}", e.instance)))?;
        e.last_seen = now;
    }
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let instance = e.instance.clone();
        let (outcome, changed) = match dir.register(e).map_err(directory_error)? {
            RegisterOutcome::Created { .. } => (Outcome::Created, true),
            RegisterOutcome::Updated { changed, .. } => (Outcome::Updated, changed),
        };
        out.push(EntryOutcome {
            instance,
            outcome,
            revision: dir.revision(),
            changed,
        });
    }
    drop(dir);
    s.publish_soon();
    Ok(Json(out))
}

async fn list(State(s): State<Arc<DirShared>>) -> Json<Vec<DirectoryEntry>> {
    Json(s.directory.lock().unwrap().entries().cloned().collect())
}

async fn deregister(
    State(s): State<Arc<DirShared>>,
    Path(instance): Path<String>,
) -> Result<StatusCode, ApiError> {
    s.directory
        .lock()
        .unwrap()
        .deregister(&instance)
        .map_err(directory_error)?;
    s.publish_soon();
    Ok(StatusCode::NO_CONTENT)
}

async fn dns_loop(sock: UdpSocket, s: Arc<DirShared>) {
    let mut buf = vec![0u8; 4096];
    loop {
        let Ok((n, peer)) = sock.recv_from(&mut buf).await else {
            continue;
        };
        s.traffic.dns_packets.fetch_add(1, Ordering::SeqCst);
        let reply = s
            .directory
            .lock()
            .unwrap()
            .respond_packet(&buf[..n], unix_now());
        if let Some(bytes) = reply {
            let _ = sock.send_to(&bytes, peer).await;
        }
    }
}

/// Publishes to digcovery over HTTP, registering the domain first and
/// again whenever digcovery stops recognising it.
pub struct HttpSink {
    agent: ureq::Agent,
    base: String,
    record: DomainRecord,
    registered: bool,
}

impl HttpSink {
    pub fn new(base: impl Into<String>, record: DomainRecord, timeout: Duration) -> Self {
        HttpSink {
            agent: crate::client::agent(timeout),
            base: base.into().trim_end_matches('/').to_string(),
            record,
            registered: false,
        }
    }

    fn ensure_registered(&mut self) -> Result<(), String> {
        if self.registered {
            return Ok(());
        }
        let url = format!("{}/api/v1/domains", self.base);
        let resp = self
            .agent
            .post(&url)
            .send_json(&self.record)
            .map_err(|e| e.to_string())?;
        // an earlier run may have registered the domain already
        match resp.status().as_u16() {
            200..=299 | 409 => {
                self.registered = true;
                Ok(())
            }
            code => Err(format!("domain registration returned {code}")),
        }
    }
}

impl PointerSink for HttpSink {
    fn publish(
        &mut self,
        domain: &Name,
        batch: &[PointerSummary],
        snapshot: bool,
    ) -> Result<usize, String> {
        self.ensure_registered()?;
        let mut url = format!("{}/api/v1/domains/{}/pointers", self.base, domain);
        if snapshot {
            url.push_str("?snapshot=true");
        }
        let mut resp = self
            .agent
            .post(&url)
            .send_json(batch)
            .map_err(|e| e.to_string())?;
        match resp.status().as_u16() {
            200..=299 => resp
                .body_mut()
                .read_json::<Accepted>()
                .map(|a| a.accepted)
                .map_err(|e| e.to_string()),
            404 => {
                self.registered = false;
                Err(format!("digcovery does not know {domain}"))
            }
            code => {
                let why = resp
                    .body_mut()
                    .read_json::<ErrorReply>()
                    .map(|r| r.error)
                    .unwrap_or_default();
                Err(format!("publish returned {code}: {why}"))
            }
        }
    }
}

/// One publish round. The directory is locked only to take the batch and
/// to record the outcome, never across the HTTP exchange.
fn publish_once(shared: &DirShared, sink: &mut HttpSink) -> Result<usize, String> {
    let now = unix_now();
    let p = {
        let mut dir = shared.directory.lock().unwrap();
        dir.expire_stale(now).map_err(|e| e.to_string())?;
        dir.publication(now)
    };
    let domain = shared.directory.lock().unwrap().domain().clone();
    match sink.publish(&domain, &p.batch, p.snapshot) {
        Ok(_) => {
            shared.directory.lock().unwrap().acknowledge(&p);
            Ok(p.batch.len())
        }
        Err(e) => {
            shared.directory.lock().unwrap().reset_publication();
            Err(e)
        }
    }
}

async fn publish_loop(shared: Arc<DirShared>, sink: HttpSink, every: Duration) {
    let sink = Arc::new(Mutex::new(sink));
    loop {
        let (s, k) = (shared.clone(), sink.clone());
        let result =
            tokio::task::spawn_blocking(move || publish_once(&s, &mut k.lock().unwrap())).await;
        if let Ok(Err(e)) = result {
            eprintln!("publish failed: {e}");
        }
        tokio::select! {
            _ = tokio::time::sleep(every) => {}
            _ = shared.kick.notified() => {}
        }
    }
}
