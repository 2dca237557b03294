use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use dashmap::DashMap;
use texting_robots::Robot;
use tokio::sync::Semaphore;
use url::Url;

use crate::error::ToolError;

#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub timeout: Duration,
    pub per_host: usize,
    pub global: usize,
    pub respect_robots: bool,
    pub user_agent: String,
    pub max_bytes: usize,
    /// Host → address overrides, mainly for local fixtures.
    pub resolve: Vec<(String, SocketAddr)>,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
            per_host: 2,
            global: 16,
            respect_robots: true,
            user_agent: concat!("xmaster-tools/", env!("CARGO_PKG_VERSION")).into(),
            max_bytes: 20 << 20,
            resolve: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fetched {
    pub url: String,
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
}

impl Fetched {
    pub fn ok(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn is_pdf(&self) -> bool {
        self.content_type.contains("application/pdf") || self.body.starts_with(b"%PDF-")
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FetchError {
    Robots,
    Transport(String),
    TooLarge,
}

impl std::fmt::Display for FetchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FetchError::Robots => write!(f, "disallowed by robots.txt"),
            FetchError::Transport(e) => write!(f, "error: {e}"),
            FetchError::TooLarge => write!(f, "response too large"),
        }
    }
}

/// HTTP GET with per-host and global concurrency limits and robots.txt checks.
pub struct Fetcher {
    http: reqwest::Client,
    config: FetchConfig,
    global: Arc<Semaphore>,
    hosts: DashMap<String, Arc<Semaphore>>,
    robots: DashMap<String, Option<Arc<Robot>>>,
}

impl Fetcher {
    pub fn new(config: FetchConfig) -> Result<Self, ToolError> {
        let mut builder = reqwest::Client::builder()
            .timeout(config.timeout)
            .user_agent(config.user_agent.clone())
            .redirect(reqwest::redirect::Policy::limited(10));
        for (host, addr) in &config.resolve {
            builder = builder.resolve(host, *addr);
        }
        let http = builder.build().map_err(|e| ToolError::BadConfig(e.to_string()))?;
        Ok(Self {
            http,
            global: Arc::new(Semaphore::new(config.global.max(1))),
            hosts: DashMap::new(),
            robots: DashMap::new(),
            config,
        })
    }

    pub async fn get(&self, url: &str) -> Result<Fetched, FetchError> {
        let parsed = Url::parse(url).map_err(|e| FetchError::Transport(e.to_string()))?;
        if self.config.respect_robots && !self.allowed(&parsed).await {
            return Err(FetchError::Robots);
        }
        self.get_unchecked(&parsed).await
    }

    async fn get_unchecked(&self, url: &Url) -> Result<Fetched, FetchError> {
        let host = url.host_str().unwrap_or_default().to_string();
        let per_host = self
            .hosts
            .entry(host)
            .or_insert_with(|| Arc::new(Semaphore::new(self.config.per_host.max(1))))
            .clone();
        let _g = self.global.acquire().await.expect("semaphore open");
        let _h = per_host.acquire().await.expect("semaphore open");

        let resp = self
            .http
            .get(url.as_str())
            .send()
            .await
            .map_err(|e| FetchError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let final_url = resp.url().to_string();
        let content_type = resp
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or_default()
            .to_ascii_lowercase();
        if resp.content_length().is_some_and(|n| n as usize > self.config.max_bytes) {
            return Err(FetchError::TooLarge);
        }
        let body = resp.bytes().await.map_err(|e| FetchError::Transport(e.to_string()))?;
        if body.len() > self.config.max_bytes {
            return Err(FetchError::TooLarge);
        }
        Ok(Fetched {
            url: final_url,
            status,
            content_type,
            body: body.to_vec(),
        })
    }

    /// Missing or unreachable robots.txt allows everything.
    async fn allowed(&self, url: &Url) -> bool {
        let origin = url.origin().ascii_serialization();
        let robot = match self.robots.get(&origin) {
            Some(r) => r.clone(),
            None => {
                let robot = match Url::parse(&format!("{origin}/robots.txt")) {
                    Ok(robots_url) => match self.get_unchecked(&robots_url).await {
                        Ok(f) if f.ok() => Robot::new(&self.config.user_agent, &f.body).ok().map(Arc::new),
                        _ => None,
                    },
                    Err(_) => None,
                };
                self.robots.insert(origin, robot.clone());
                robot
            }
        };
        robot.is_none_or(|r| r.allowed(url.as_str()))
    }
}
