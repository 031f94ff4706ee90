//! Page and subresource retrieval for live and on-disk audits.
//!
//! Subresources are fetched one level deep in two waves: everything the
//! document references, then fonts named by the external stylesheets from the
//! first wave. Requests run on a small worker pool that keeps at most
//! `max_in_flight` requests open overall and at most one per host, waiting
//! `politeness_delay` between consecutive requests to the same host.

use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use url::Url;

use crate::error::{Error, FetchError, Result};
use crate::extract::{self, Reference, ReferenceKind, ResourceMap, ResourceRecord};
use crate::model::PageSnapshot;

pub const DEFAULT_USER_AGENT: &str =
    "Mozilla/5.0 (Linux; Android 7.0; Moto G (4)) AppleWebKit/537.36 \
     (KHTML, like Gecko) Chrome/90.0.4430.91 Mobile Safari/537.36";

#[derive(Clone, Debug, PartialEq)]
pub struct FetchConfig {
    pub timeout: Duration,
    pub max_resource_bytes: u64,
    pub user_agent: String,
    pub max_in_flight: usize,
    pub politeness_delay: Duration,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            timeout: Duration::from_secs(30),
            max_resource_bytes: 16 * 1024 * 1024,
            user_agent: DEFAULT_USER_AGENT.to_owned(),
            max_in_flight: 8,
            politeness_delay: Duration::from_millis(250),
        }
    }
}

/// A response body and its declared type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Body {
    pub content_type: String,
    pub bytes: Vec<u8>,
}

/// Anything that can turn a URL into bytes.
pub trait ResourceSource: Sync {
    fn get(&self, url: &str) -> std::result::Result<Body, String>;
}

/// Plain HTTP(S) retrieval.
pub struct HttpSource {
    agent: ureq::Agent,
    max_bytes: u64,
}

impl HttpSource {
    pub fn new(cfg: &FetchConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .user_agent(cfg.user_agent.as_str())
            .proxy(None)
            .build()
            .new_agent();
        HttpSource {
            agent,
            max_bytes: cfg.max_resource_bytes,
        }
    }
}

impl ResourceSource for HttpSource {
    fn get(&self, url: &str) -> std::result::Result<Body, String> {
        let mut resp = self.agent.get(url).call().map_err(|e| e.to_string())?;
        let content_type = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .unwrap_or_default()
            .to_owned();
        let bytes = resp
            .body_mut()
            .with_config()
            .limit(self.max_bytes)
            .read_to_vec()
            .map_err(|e| e.to_string())?;
        Ok(Body {
            content_type,
            bytes,
        })
    }
}

/// Serves URLs from a directory, as if the directory were hosted at `base`.
///
/// `file:` URLs are read directly.
pub struct LocalSource {
    root: PathBuf,
    base: Url,
}

impl LocalSource {
    /// `base` names the URL of `root` itself; a trailing slash is implied.
    pub fn new(root: impl Into<PathBuf>, base: &str) -> Result<Self> {
        let mut base = Url::parse(base).map_err(|_| FetchError::BadUrl(base.to_owned()))?;
        if !base.path().ends_with('/') {
            let path = format!("{}/", base.path());
            base.set_path(&path);
        }
        Ok(LocalSource {
            root: root.into(),
            base,
        })
    }

    fn path_for(&self, url: &Url) -> Option<PathBuf> {
        if url.scheme() == "file" {
            return url.to_file_path().ok();
        }
        if url.origin() != self.base.origin() {
            return None;
        }
        let rel = url.path().strip_prefix(self.base.path())?;
        let mut path = self.root.clone();
        for seg in rel.split('/').filter(|s| !s.is_empty()) {
            let seg = percent_encoding::percent_decode_str(seg).decode_utf8_lossy();
            if seg == ".." {
                return None;
            }
            path.push(seg.as_ref());
        }
        if rel.is_empty() || rel.ends_with('/') {
            path.push("index.html");
        }
        Some(path)
    }
}

impl ResourceSource for LocalSource {
    fn get(&self, url: &str) -> std::result::Result<Body, String> {
        let parsed = Url::parse(url).map_err(|e| e.to_string())?;
        let path = self
            .path_for(&parsed)
            .ok_or_else(|| format!("{url} is outside {}", self.base))?;
        let bytes = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Body {
            content_type: content_type_for(&path),
            bytes,
        })
    }
}

fn content_type_for(path: &Path) -> String {
    mime_guess::from_path(path)
        .first_or_octet_stream()
        .essence_str()
        .to_owned()
}

/// A document and the subresources retrieved for it.
#[derive(Clone, Debug, PartialEq)]
pub struct FetchedPage {
    pub url: String,
    pub html: Vec<u8>,
    pub resources: ResourceMap,
}

impl FetchedPage {
    pub fn snapshot(&self) -> PageSnapshot {
        extract::extract_snapshot(&self.html, &self.url, &self.resources)
    }
}

pub fn fetch_page(url: &str, cfg: &FetchConfig) -> Result<FetchedPage> {
    let parsed = Url::parse(url).map_err(|_| FetchError::BadUrl(url.to_owned()))?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return Err(FetchError::BadUrl(url.to_owned()).into());
    }
    fetch_from(&HttpSource::new(cfg), parsed.as_str(), cfg)
}

/// Loads an HTML file and its assets from disk.
///
/// With `base_url` the page is addressed as if served from that URL (a URL
/// ending in `/` names the directory), so the snapshot matches one taken over
/// HTTP; otherwise `file:` URLs are used.
pub fn load_local(path: &Path, base_url: Option<&str>, cfg: &FetchConfig) -> Result<FetchedPage> {
    let abs = std::path::absolute(path).map_err(|e| Error::io(path, e))?;
    if !abs.is_file() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a file"),
        ));
    }
    let dir = abs.parent().unwrap_or(Path::new("/")).to_path_buf();
    let name = abs
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("index.html");
    let bad = |u: &dyn std::fmt::Display| FetchError::BadUrl(u.to_string());
    let page_url = match base_url {
        Some(b) => {
            let u = Url::parse(b).map_err(|_| bad(&b))?;
            if u.path().ends_with('/') {
                u.join(name).map_err(|_| bad(&b))?
            } else {
                u
            }
        }
        None => Url::from_file_path(&abs).map_err(|_| bad(&abs.display()))?,
    };
    let dir_url = page_url.join(".").map_err(|_| bad(&page_url))?;
    let source = LocalSource::new(&dir, dir_url.as_str())?;
    fetch_from(&source, page_url.as_str(), cfg)
}

/// Retrieves a document and its subresources from any source.
pub fn fetch_from(
    source: &dyn ResourceSource,
    url: &str,
    cfg: &FetchConfig,
) -> Result<FetchedPage> {
    let html = source
        .get(url)
        .map_err(|reason| FetchError::Unreachable {
            url: url.to_owned(),
            reason,
        })?
        .bytes;

    let mut resources = ResourceMap::new();
    let first = extract::html_references(&html, url);
    let mut fonts = Vec::new();
    for (r, body) in first.iter().zip(fetch_all(source, &first, cfg)) {
        let Some(body) = body else { continue };
        let record = ResourceRecord::from_body(&r.url, body.content_type, &body.bytes, r.kind);
        if r.kind == ReferenceKind::Stylesheet {
            if let Some(text) = &record.stylesheet_text {
                fonts.extend(extract::stylesheet_font_references(text, &r.url));
            }
        }
        resources.insert(r.url.clone(), record);
    }

    fonts.sort();
    fonts.dedup();
    fonts.retain(|f| !resources.contains_key(&f.url));
    for (r, body) in fonts.iter().zip(fetch_all(source, &fonts, cfg)) {
        if let Some(body) = body {
            resources.insert(
                r.url.clone(),
                ResourceRecord::from_body(&r.url, body.content_type, &body.bytes, r.kind),
            );
        }
    }

    Ok(FetchedPage {
        url: url.to_owned(),
        html,
        resources,
    })
}

struct HostState {
    queue: VecDeque<usize>,
    busy: bool,
    ready_at: Instant,
}

struct Schedule {
    hosts: BTreeMap<String, HostState>,
    remaining: usize,
}

impl Schedule {
    /// Next runnable request, or how long to wait for one.
    fn take(&mut self, now: Instant) -> std::result::Result<(String, usize), Option<Duration>> {
        let mut wait: Option<Duration> = None;
        for (host, st) in &mut self.hosts {
            if st.busy || st.queue.is_empty() {
                continue;
            }
            if st.ready_at <= now {
                st.busy = true;
                let idx = st.queue.pop_front().expect("non-empty queue");
                return Ok((host.clone(), idx));
            }
            let d = st.ready_at - now;
            wait = Some(wait.map_or(d, |w| w.min(d)));
        }
        Err(wait)
    }
}

/// Fetches `refs` under the politeness contract; failures come back as `None`.
pub fn fetch_all(
    source: &dyn ResourceSource,
    refs: &[Reference],
    cfg: &FetchConfig,
) -> Vec<Option<Body>> {
    if refs.is_empty() {
        return Vec::new();
    }
    let now = Instant::now();
    let mut hosts: BTreeMap<String, HostState> = BTreeMap::new();
    for (i, r) in refs.iter().enumerate() {
        let host = Url::parse(&r.url)
            .ok()
            .and_then(|u| u.host_str().map(str::to_owned))
            .unwrap_or_default();
        hosts
            .entry(host)
            .or_insert_with(|| HostState {
                queue: VecDeque::new(),
                busy: false,
                ready_at: now,
            })
            .queue
            .push_back(i);
    }
    let schedule = Mutex::new(Schedule {
        hosts,
        remaining: refs.len(),
    });
    let wake = Condvar::new();
    let results: Mutex<Vec<Option<Body>>> = Mutex::new(vec![None; refs.len()]);
    let workers = cfg.max_in_flight.clamp(1, refs.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let (host, idx) = {
                    let mut sched = schedule.lock().expect("schedule lock");
                    loop {
                        if sched.remaining == 0 {
                            return;
                        }
                        match sched.take(Instant::now()) {
                            Ok(job) => break job,
                            Err(Some(d)) => {
                                sched = wake.wait_timeout(sched, d).expect("schedule lock").0
                            }
                            Err(None) => sched = wake.wait(sched).expect("schedule lock"),
                        }
                    }
                };
                let body = source.get(&refs[idx].url).ok();
                results.lock().expect("results lock")[idx] = body;
                let mut sched = schedule.lock().expect("schedule lock");
                sched.remaining -= 1;
                if let Some(st) = sched.hosts.get_mut(&host) {
                    st.busy = false;
                    st.ready_at = Instant::now() + cfg.politeness_delay;
                }
                wake.notify_all();
            });
        }
    });
    results.into_inner().expect("results lock")
}
