//! Forward HTTP proxy that delivers document policies in response headers.
//!
//! Plain-HTTP requests in absolute form are forwarded upstream. When the
//! response is HTML, the configured policy is merged into its
//! `Document-Policy` (or `Document-Policy-Report-Only`) header before the
//! response head is sent on; bodies are streamed through untouched.
//! `CONNECT` requests are tunnelled without interception.

use std::convert::Infallible;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use bytes::Bytes;
use http_body_util::combinators::BoxBody;
use http_body_util::{BodyExt, Empty, Full};
use hyper::body::Incoming;
use hyper::header::{self, HeaderMap, HeaderName, HeaderValue};
use hyper::server::conn::http1;
use hyper::service::service_fn;
use hyper::{Method, Request, Response, StatusCode};
use hyper_util::client::legacy::connect::HttpConnector;
use hyper_util::client::legacy::Client;
use hyper_util::rt::{TokioExecutor, TokioIo};
use qoepolicy_core::headers::{merge_header_value, DOCUMENT_POLICY, DOCUMENT_POLICY_REPORT_ONLY};
use qoepolicy_core::model::PolicySet;
use tokio::net::{TcpListener, TcpStream};

type ProxyBody = BoxBody<Bytes, hyper::Error>;
type UpstreamClient = Client<HttpConnector, Incoming>;

#[derive(Debug, thiserror::Error)]
pub enum ProxyError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("accept failed: {0}")]
    Accept(#[source] std::io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Enforce,
    ReportOnly,
}

impl Mode {
    pub fn header_name(self) -> &'static str {
        match self {
            Mode::Enforce => DOCUMENT_POLICY,
            Mode::ReportOnly => DOCUMENT_POLICY_REPORT_ONLY,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProxyConfig {
    pub policy: PolicySet,
    pub mode: Mode,
}

/// Shared, swappable configuration. Each response reads one snapshot.
#[derive(Clone, Debug, Default)]
pub struct ConfigHandle(Arc<RwLock<Arc<ProxyConfig>>>);

impl ConfigHandle {
    pub fn new(config: ProxyConfig) -> Self {
        ConfigHandle(Arc::new(RwLock::new(Arc::new(config))))
    }

    pub fn snapshot(&self) -> Arc<ProxyConfig> {
        self.0.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn replace(&self, config: ProxyConfig) {
        *self.0.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(config);
    }
}

pub struct Proxy {
    listener: TcpListener,
    config: ConfigHandle,
    client: UpstreamClient,
}

impl Proxy {
    pub async fn bind(addr: SocketAddr, config: ProxyConfig) -> Result<Self, ProxyError> {
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|source| ProxyError::Bind { addr, source })?;
        let client = Client::builder(TokioExecutor::new()).build(HttpConnector::new());
        Ok(Proxy {
            listener,
            config: ConfigHandle::new(config),
            client,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener
            .local_addr()
            .expect("bound listener has an address")
    }

    pub fn config(&self) -> ConfigHandle {
        self.config.clone()
    }

    pub async fn serve(self) -> Result<(), ProxyError> {
        self.serve_until(std::future::pending()).await
    }

    /// Accepts connections until `shutdown` resolves.
    pub async fn serve_until(self, shutdown: impl Future<Output = ()>) -> Result<(), ProxyError> {
        tokio::pin!(shutdown);
        loop {
            let (stream, peer) = tokio::select! {
                accepted = self.listener.accept() => accepted.map_err(ProxyError::Accept)?,
                () = &mut shutdown => return Ok(()),
            };
            let config = self.config.clone();
            let client = self.client.clone();
            tokio::spawn(async move {
                let service = service_fn(move |req| handle(req, config.clone(), client.clone()));
                if let Err(e) = http1::Builder::new()
                    .preserve_header_case(true)
                    .serve_connection(TokioIo::new(stream), service)
                    .with_upgrades()
                    .await
                {
                    tracing::debug!(%peer, error = %e, "connection closed with error");
                }
            });
        }
    }
}

/// Serves until the process is stopped.
pub async fn run_proxy(
    listen: SocketAddr,
    policy: PolicySet,
    mode: Mode,
) -> Result<(), ProxyError> {
    let proxy = Proxy::bind(listen, ProxyConfig { policy, mode }).await?;
    tracing::info!(addr = %proxy.local_addr(), ?mode, "proxy listening");
    proxy.serve().await
}

fn full(text: impl Into<Bytes>) -> ProxyBody {
    Full::new(text.into())
        .map_err(|never| match never {})
        .boxed()
}

fn plain(status: StatusCode, text: &str) -> Response<ProxyBody> {
    let mut resp = Response::new(full(text.to_owned()));
    *resp.status_mut() = status;
    resp.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("text/plain"));
    resp
}

async fn handle(
    req: Request<Incoming>,
    config: ConfigHandle,
    client: UpstreamClient,
) -> Result<Response<ProxyBody>, Infallible> {
    if req.method() == Method::CONNECT {
        return Ok(tunnel(req).await);
    }
    if req.uri().scheme_str() != Some("http") || req.uri().authority().is_none() {
        return Ok(plain(
            StatusCode::BAD_REQUEST,
            "expected an absolute http:// request target\n",
        ));
    }

    let (mut parts, body) = req.into_parts();
    strip_hop_by_hop(&mut parts.headers);
    let upstream = match client.request(Request::from_parts(parts, body)).await {
        Ok(resp) => resp,
        Err(e) => {
            tracing::warn!(error = %e, "upstream request failed");
            return Ok(plain(StatusCode::BAD_GATEWAY, "upstream unreachable\n"));
        }
    };

    let (mut parts, body) = upstream.into_parts();
    strip_hop_by_hop(&mut parts.headers);
    if is_html(&parts.headers) {
        inject(&mut parts.headers, &config.snapshot());
    }
    Ok(Response::from_parts(parts, body.boxed()))
}

/// Merges the configured policy into the response's policy header.
pub fn inject(headers: &mut HeaderMap, config: &ProxyConfig) {
    let name = HeaderName::from_static(match config.mode {
        Mode::Enforce => "document-policy",
        Mode::ReportOnly => "document-policy-report-only",
    });
    let existing: Vec<&str> = headers
        .get_all(&name)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .collect();
    let existing = (!existing.is_empty()).then(|| existing.join(", "));
    let merged = merge_header_value(existing.as_deref(), &config.policy);
    headers.remove(&name);
    if let Some(value) = merged.and_then(|v| HeaderValue::from_str(&v).ok()) {
        headers.insert(name, value);
    }
}

pub fn is_html(headers: &HeaderMap) -> bool {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .map(|ct| {
            let essence = ct
                .split(';')
                .next()
                .unwrap_or("")
                .trim()
                .to_ascii_lowercase();
            essence == "text/html" || essence == "application/xhtml+xml"
        })
        .unwrap_or(false)
}

const HOP_BY_HOP: [&str; 8] = [
    "connection",
    "keep-alive",
    "proxy-connection",
    "proxy-authenticate",
    "proxy-authorization",
    "te",
    "trailer",
    "upgrade",
];

/// Removes connection-scoped headers, including any named by `Connection`.
pub fn strip_hop_by_hop(headers: &mut HeaderMap) {
    let named: Vec<String> = headers
        .get_all(header::CONNECTION)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(','))
        .map(|t| t.trim().to_ascii_lowercase())
        .filter(|t| !t.is_empty())
        .collect();
    for name in HOP_BY_HOP
        .iter()
        .copied()
        .chain(named.iter().map(String::as_str))
    {
        headers.remove(name);
    }
    // Framing is re-derived for each hop from the body itself.
    headers.remove(header::TRANSFER_ENCODING);
}

async fn tunnel(req: Request<Incoming>) -> Response<ProxyBody> {
    let Some(authority) = req.uri().authority().map(|a| a.to_string()) else {
        return plain(StatusCode::BAD_REQUEST, "CONNECT needs host:port\n");
    };
    let upstream = match TcpStream::connect(&authority).await {
        Ok(s) => s,
        Err(e) => {
            tracing::warn!(%authority, error = %e, "tunnel connect failed");
            return plain(StatusCode::BAD_GATEWAY, "upstream unreachable\n");
        }
    };
    tokio::spawn(async move {
        match hyper::upgrade::on(req).await {
            Ok(upgraded) => {
                let mut client = TokioIo::new(upgraded);
                let mut upstream = upstream;
                if let Err(e) = tokio::io::copy_bidirectional(&mut client, &mut upstream).await {
                    tracing::debug!(%authority, error = %e, "tunnel closed with error");
                }
            }
            Err(e) => tracing::debug!(%authority, error = %e, "upgrade failed"),
        }
    });
    Response::new(Empty::new().map_err(|never| match never {}).boxed())
}
