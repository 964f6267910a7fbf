//! HTTP API and DNS front for the global pointer index.

use std::net::SocketAddr;
use std::sync::atomic::Ordering;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query as Params, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tokio::net::{TcpListener, UdpSocket};

use digstack_core::digcovery::{
    Digcovery, DigcoveryError, DomainMatch, DomainRecord, FilterCache, Page, PointerSummary, Query,
    ResultPage,
};
use digstack_core::dns::{self, Compression, Name};

use crate::api::{Accepted, ErrorReply};
use crate::config::DigcoveryConfig;
use crate::{unix_now, Traffic};

pub struct Shared {
    pub registry: RwLock<Digcovery>,
    pub cache: FilterCache,
    pub traffic: Traffic,
}

/// A running digcovery daemon.
pub struct DigcoveryHandle {
    pub http: SocketAddr,
    pub dns: Option<SocketAddr>,
    pub shared: Arc<Shared>,
}

/// Binds the configured sockets and serves them on the current runtime.
pub async fn spawn(cfg: &DigcoveryConfig) -> std::io::Result<DigcoveryHandle> {
    let shared = Arc::new(Shared {
        registry: RwLock::new(Digcovery::new()),
        cache: FilterCache::new(cfg.cache_capacity),
        traffic: Traffic::default(),
    });
    let listener = TcpListener::bind(cfg.listen).await?;
    let http = listener.local_addr()?;
    let app = router(shared.clone());
    tokio::spawn(async move {
        let _ = axum::serve(listener, app).await;
    });
    let dns = match cfg.dns_listen {
        Some(addr) => {
            let sock = UdpSocket::bind(addr).await?;
            let local = sock.local_addr()?;
            tokio::spawn(dns_front(sock, shared.clone()));
            Some(local)
        }
        None => None,
    };
    Ok(DigcoveryHandle { http, dns, shared })
}

pub fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/api/v1/domains", post(register_domain).get(list_domains))
        .route("/api/v1/domains/{domain}/pointers", post(ingest))
        .route("/api/v1/query", post(query))
        .route("/api/v1/discover", get(discover))
        .layer(middleware::from_fn_with_state(shared.clone(), count))
        .with_state(shared)
}

async fn count(State(s): State<Arc<Shared>>, req: Request, next: Next) -> Response {
    s.traffic.http_requests.fetch_add(1, Ordering::SeqCst);
    next.run(req).await
}

pub(crate) struct ApiError(pub StatusCode, pub String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorReply { error: self.1 })).into_response()
    }
}

impl From<DigcoveryError> for ApiError {
    fn from(e: DigcoveryError) -> Self {
        let status = match e {
            DigcoveryError::DuplicateDomain(_) => StatusCode::CONFLICT,
            DigcoveryError::UnknownDomain(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, e.to_string())
    }
}

pub(crate) fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("invalid body: {e}")))
}

pub(crate) fn parse_name(s: &str) -> Result<Name, ApiError> {
    s.parse()
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("bad name {s:?}: {e}")))
}

async fn register_domain(
    State(s): State<Arc<Shared>>,
    body: Bytes,
) -> Result<(StatusCode, Json<DomainRecord>), ApiError> {
    let mut rec: DomainRecord = parse_body(&body)?;
    if rec.created == 0 {
        rec.created = unix_now();
    }
    s.registry.write().unwrap().register_domain(rec.clone())?;
    Ok((StatusCode::CREATED, Json(rec)))
}

async fn list_domains(State(s): State<Arc<Shared>>) -> Json<Vec<DomainRecord>> {
    Json(s.registry.read().unwrap().domains().cloned().collect())
}

#[derive(Deserialize)]
struct IngestParams {
    #[serde(default)]
    snapshot: bool,
}

async fn ingest(
    State(s): State<Arc<Shared>>,
    Path(domain): Path<String>,
    Params(p): Params<IngestParams>,
    body: Bytes,
) -> Result<Json<Accepted>, ApiError> {
    let domain = parse_name(&domain)?;
    let batch: Vec<PointerSummary> = parse_body(&body)?;
    let mut reg = s.registry.write().unwrap();
    let accepted = if p.snapshot {
        reg.ingest_snapshot(&domain, &batch)?
    } else {
        reg.ingest(&domain, &batch)?
    };
    Ok(Json(Accepted { accepted }))
}

async fn query(
    State(s): State<Arc<Shared>>,
    Params(page): Params<Page>,
    body: Bytes,
) -> Result<Json<ResultPage>, ApiError> {
    let text = std::str::from_utf8(&body)
        .map_err(|_| ApiError(StatusCode::BAD_REQUEST, "body is not UTF-8".into()))?;
    let q = Query::from_json_str(text)?;
    let (hits, _) = s.registry.read().unwrap().execute_cached(&q, &s.cache)?;
    Ok(Json(ResultPage {
        total: hits.len(),
        offset: page.offset,
        hits: hits
            .into_iter()
            .skip(page.offset)
            .take(page.limit)
            .collect(),
    }))
}

#[derive(Deserialize)]
struct DiscoverParams {
    pattern: Option<String>,
}

async fn discover(
    State(s): State<Arc<Shared>>,
    Params(p): Params<DiscoverParams>,
) -> Result<Json<Vec<DomainMatch>>, ApiError> {
    let pattern = p
        .pattern
        .ok_or_else(|| ApiError(StatusCode::BAD_REQUEST, "missing pattern parameter".into()))?;
    Ok(Json(s.registry.read().unwrap().discover(&pattern)?))
}

async fn dns_front(sock: UdpSocket, s: Arc<Shared>) {
    let mut buf = vec![0u8; 4096];
    loop {
        let Ok((n, peer)) = sock.recv_from(&mut buf).await else {
            continue;
        };
        s.traffic.dns_packets.fetch_add(1, Ordering::SeqCst);
        let Ok(msg) = dns::decode(&buf[..n]) else {
            continue;
        };
        let reply = s.registry.read().unwrap().respond(&msg);
        if let Ok(bytes) = dns::encode(&reply, Compression::On) {
            let _ = sock.send_to(&bytes, peer).await;
        }
    }
}
