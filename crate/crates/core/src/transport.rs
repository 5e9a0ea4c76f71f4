//! Outbound HTTP.
//!
//! Every network call the engine makes (model provider, embedding endpoint,
//! remote tools, catalog/weather/bloom services) goes through [`HttpTransport`].
//! [`RecordingTransport`] wraps another transport and logs each call, which is how
//! the dry-run path is shown to stay offline.

use std::sync::Mutex;
use std::time::Duration;

use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("connection to {url} failed: {message}")]
    Connect { url: String, message: String },
    #[error("{url} returned HTTP {status}: {body}")]
    Status { url: String, status: u16, body: String },
    #[error("invalid response body from {url}: {message}")]
    Decode { url: String, message: String },
}

impl TransportError {
    /// True when the peer could not be reached at all.
    pub fn is_unavailable(&self) -> bool {
        match self {
            TransportError::Connect { .. } => true,
            TransportError::Status { status, .. } => *status == 503 || *status == 502,
            TransportError::Decode { .. } => false,
        }
    }
}

pub trait HttpTransport: Send + Sync {
    fn post_json(&self, url: &str, body: &Value, timeout: Duration) -> Result<Value, TransportError>;
    fn get_json(&self, url: &str, timeout: Duration) -> Result<Value, TransportError>;
}

/// Blocking transport backed by `ureq`.
#[derive(Debug, Default, Clone)]
pub struct UreqTransport;

impl UreqTransport {
    fn map_err(url: &str, err: ureq::Error) -> TransportError {
        match err {
            ureq::Error::Status(status, response) => TransportError::Status {
                url: url.to_string(),
                status,
                body: response.into_string().unwrap_or_default(),
            },
            ureq::Error::Transport(t) => TransportError::Connect {
                url: url.to_string(),
                message: t.to_string(),
            },
        }
    }

    fn decode(url: &str, response: ureq::Response) -> Result<Value, TransportError> {
        response.into_json::<Value>().map_err(|e| TransportError::Decode {
            url: url.to_string(),
            message: e.to_string(),
        })
    }
}

impl HttpTransport for UreqTransport {
    fn post_json(&self, url: &str, body: &Value, timeout: Duration) -> Result<Value, TransportError> {
        let response = ureq::post(url)
            .timeout(timeout)
            .send_json(body.clone())
            .map_err(|e| Self::map_err(url, e))?;
        Self::decode(url, response)
    }

    fn get_json(&self, url: &str, timeout: Duration) -> Result<Value, TransportError> {
        let response = ureq::get(url)
            .timeout(timeout)
            .call()
            .map_err(|e| Self::map_err(url, e))?;
        Self::decode(url, response)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedCall {
    pub method: &'static str,
    pub url: String,
    pub body: Option<Value>,
}

/// Logs every call. Without an inner transport every call fails as unreachable.
pub struct RecordingTransport {
    inner: Option<Box<dyn HttpTransport>>,
    calls: Mutex<Vec<RecordedCall>>,
}

impl RecordingTransport {
    pub fn offline() -> Self {
        Self {
            inner: None,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn wrapping(inner: impl HttpTransport + 'static) -> Self {
        Self {
            inner: Some(Box::new(inner)),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<RecordedCall> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }

    fn unreachable(url: &str) -> TransportError {
        TransportError::Connect {
            url: url.to_string(),
            message: "offline recording transport".to_string(),
        }
    }
}

impl HttpTransport for RecordingTransport {
    fn post_json(&self, url: &str, body: &Value, timeout: Duration) -> Result<Value, TransportError> {
        self.calls.lock().unwrap().push(RecordedCall {
            method: "POST",
            url: url.to_string(),
            body: Some(body.clone()),
        });
        match &self.inner {
            Some(inner) => inner.post_json(url, body, timeout),
            None => Err(Self::unreachable(url)),
        }
    }

    fn get_json(&self, url: &str, timeout: Duration) -> Result<Value, TransportError> {
        self.calls.lock().unwrap().push(RecordedCall {
            method: "GET",
            url: url.to_string(),
            body: None,
        });
        match &self.inner {
            Some(inner) => inner.get_json(url, timeout),
            None => Err(Self::unreachable(url)),
        }
    }
}

/// Joins a base URL and a path with exactly one slash between them.
pub fn join_url(base: &str, path: &str) -> String {
    match (base.ends_with('/'), path.starts_with('/')) {
        (true, true) => format!("{}{}", base, &path[1..]),
        (false, false) if !path.is_empty() => format!("{base}/{path}"),
        _ => format!("{base}{path}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn join_url_normalizes_slashes() {
        assert_eq!(join_url("http://a/", "/b"), "http://a/b");
        assert_eq!(join_url("http://a", "b"), "http://a/b");
        assert_eq!(join_url("http://a", "/b"), "http://a/b");
        assert_eq!(join_url("http://a", ""), "http://a");
    }

    #[test]
    fn offline_transport_records_and_fails() {
        let t = RecordingTransport::offline();
        let err = t
            .post_json("http://x/y", &serde_json::json!({"a": 1}), Duration::from_secs(1))
            .unwrap_err();
        assert!(err.is_unavailable());
        assert_eq!(t.call_count(), 1);
        assert_eq!(t.calls()[0].url, "http://x/y");
    }

    #[test]
    fn refused_connection_is_unavailable() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        drop(listener);
        let err = UreqTransport
            .post_json(
                &format!("http://127.0.0.1:{port}/x"),
                &serde_json::json!({}),
                Duration::from_secs(2),
            )
            .unwrap_err();
        assert!(err.is_unavailable(), "{err}");
    }
}
