use serde_json::{json, Value};
use thiserror::Error;

use crate::types::Diagnostics;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("search provider quota exceeded")]
    ProviderQuota { retry_advised: bool },
    #[error("search provider unavailable: {0}")]
    ProviderDown(String),
    #[error("could not fetch {url}")]
    FetchFailed { url: String, diagnostics: Diagnostics },
    #[error("robots.txt disallows {0}")]
    RobotsDisallowed(String),
    #[error("no text content at {0}")]
    ContentEmpty(String),
    #[error("no recorded fixture for request {0}")]
    FixtureMiss(String),
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("port {0} is in use")]
    PortInUse(u16),
}

impl ToolError {
    pub fn code(&self) -> &'static str {
        match self {
            ToolError::EmptyQuery => "empty_query",
            ToolError::InvalidRequest(_) => "invalid_request",
            ToolError::ProviderQuota { .. } => "provider_quota",
            ToolError::ProviderDown(_) => "provider_down",
            ToolError::FetchFailed { .. } => "fetch_failed",
            ToolError::RobotsDisallowed(_) => "robots_disallowed",
            ToolError::ContentEmpty(_) => "content_empty",
            ToolError::FixtureMiss(_) => "fixture_miss",
            ToolError::BadConfig(_) => "bad_config",
            ToolError::PortInUse(_) => "port_in_use",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            ToolError::EmptyQuery | ToolError::InvalidRequest(_) => 400,
            ToolError::RobotsDisallowed(_) => 403,
            ToolError::FixtureMiss(_) => 404,
            ToolError::ContentEmpty(_) => 422,
            ToolError::ProviderQuota { .. } => 429,
            ToolError::FetchFailed { .. } | ToolError::ProviderDown(_) => 502,
            ToolError::BadConfig(_) | ToolError::PortInUse(_) => 500,
        }
    }

    /// `{"error": {"code", "message", ...}}`
    pub fn to_json(&self) -> Value {
        let mut body = json!({ "code": self.code(), "message": self.to_string() });
        match self {
            ToolError::ProviderQuota { retry_advised } => body["retry_advised"] = json!(retry_advised),
            ToolError::FetchFailed { diagnostics, .. } => body["diagnostics"] = json!(diagnostics),
            _ => {}
        }
        json!({ "error": body })
    }
}

impl ToolError {
    /// Rebuilds an error from its [`ToolError::to_json`] form. Unknown codes
    /// map to `ProviderDown`.
    pub fn from_json(v: &Value) -> ToolError {
        let e = &v["error"];
        let message = e["message"].as_str().unwrap_or_default().to_string();
        let after = |prefix: &str| message.strip_prefix(prefix).unwrap_or(&message).to_string();
        match e["code"].as_str().unwrap_or_default() {
            "empty_query" => ToolError::EmptyQuery,
            "invalid_request" => ToolError::InvalidRequest(after("invalid request: ")),
            "provider_quota" => ToolError::ProviderQuota {
                retry_advised: e["retry_advised"].as_bool().unwrap_or(true),
            },
            "fetch_failed" => ToolError::FetchFailed {
                url: after("could not fetch "),
                diagnostics: serde_json::from_value(e["diagnostics"].clone()).unwrap_or_default(),
            },
            "robots_disallowed" => ToolError::RobotsDisallowed(after("robots.txt disallows ")),
            "content_empty" => ToolError::ContentEmpty(after("no text content at ")),
            "fixture_miss" => ToolError::FixtureMiss(after("no recorded fixture for request ")),
            "bad_config" => ToolError::BadConfig(after("bad config: ")),
            "port_in_use" => ToolError::PortInUse(after("port ").trim_end_matches(" is in use").parse().unwrap_or(0)),
            _ => ToolError::ProviderDown(after("search provider unavailable: ")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut d = Diagnostics::default();
        d.record("html", "status 404");
        for e in [
            ToolError::EmptyQuery,
            ToolError::InvalidRequest("bad".into()),
            ToolError::ProviderQuota { retry_advised: true },
            ToolError::ProviderDown("status 503".into()),
            ToolError::FetchFailed {
                url: "https://a.com/".into(),
                diagnostics: d,
            },
            ToolError::RobotsDisallowed("https://a.com/x".into()),
            ToolError::ContentEmpty("https://a.com/".into()),
            ToolError::FixtureMiss("abc".into()),
            ToolError::BadConfig("x".into()),
            ToolError::PortInUse(8080),
        ] {
            assert_eq!(ToolError::from_json(&e.to_json()), e);
        }
    }

    #[test]
    fn statuses() {
        assert_eq!(ToolError::EmptyQuery.status(), 400);
        assert_eq!(ToolError::FixtureMiss(String::new()).status(), 404);
        assert_eq!(ToolError::ProviderQuota { retry_advised: true }.to_json()["error"]["retry_advised"], true);
    }
}
