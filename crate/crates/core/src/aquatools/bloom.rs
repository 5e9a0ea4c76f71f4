use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::transport::HttpTransport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    Moderate,
    High,
}

/// `low < moderate ≤ density < high ≤ density`, in cells/mL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BloomThresholds {
    pub moderate: f64,
    pub high: f64,
}

impl Default for BloomThresholds {
    fn default() -> Self {
        Self {
            moderate: 20_000.0,
            high: 100_000.0,
        }
    }
}

impl BloomThresholds {
    pub fn severity(&self, density: f64) -> Severity {
        if density >= self.high {
            Severity::High
        } else if density >= self.moderate {
            Severity::Moderate
        } else {
            Severity::Low
        }
    }

    pub fn is_valid(&self) -> bool {
        self.moderate.is_finite() && self.high.is_finite() && 0.0 <= self.moderate && self.moderate <= self.high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub lat: f64,
    pub lon: f64,
}

impl Location {
    pub fn new(lat: f64, lon: f64) -> Result<Self, String> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(format!("coordinates ({lat}, {lon}) out of range"));
        }
        Ok(Self { lat, lon })
    }

    fn distance2(&self, other: &Location) -> f64 {
        (self.lat - other.lat).powi(2) + (self.lon - other.lon).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BloomPrediction {
    pub location: Location,
    pub date: NaiveDate,
    pub density_cells_per_ml: f64,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BloomError {
    #[error("bloom service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("invalid coordinates: {0}")]
    InvalidCoordinates(String),
    #[error("bloom service answer malformed: {0}")]
    Malformed(String),
}

/// The external bloom-prediction service. Returns raw density in cells/mL.
pub trait BloomClient: Send + Sync {
    fn density(&self, location: Location, date: NaiveDate) -> Result<f64, BloomError>;
}

/// Queries the service and maps density to severity with local thresholds.
///
/// Any severity label the service sends is ignored in favour of `thresholds`.
pub fn predict_bloom(
    lat: f64,
    lon: f64,
    date: NaiveDate,
    client: &dyn BloomClient,
    thresholds: &BloomThresholds,
) -> Result<BloomPrediction, BloomError> {
    let location = Location::new(lat, lon).map_err(BloomError::InvalidCoordinates)?;
    let density = client.density(location, date)?;
    if !density.is_finite() || density < 0.0 {
        return Err(BloomError::Malformed(format!("density {density}")));
    }
    Ok(BloomPrediction {
        location,
        date,
        density_cells_per_ml: density,
        severity: thresholds.severity(density),
    })
}

/// `POST {lat, lon, date}` answered by `{density_cells_per_ml, severity}`.
pub struct HttpBloomClient {
    pub url: String,
    pub timeout: Duration,
    transport: Arc<dyn HttpTransport>,
}

impl HttpBloomClient {
    pub fn new(url: &str, transport: Arc<dyn HttpTransport>) -> Self {
        Self {
            url: url.to_string(),
            timeout: Duration::from_secs(30),
            transport,
        }
    }
}

impl BloomClient for HttpBloomClient {
    fn density(&self, location: Location, date: NaiveDate) -> Result<f64, BloomError> {
        let body = json!({"lat": location.lat, "lon": location.lon, "date": date.to_string()});
        let v = self
            .transport
            .post_json(&self.url, &body, self.timeout)
            .map_err(|e| BloomError::ServiceUnavailable(e.to_string()))?;
        v.get("density_cells_per_ml")
            .and_then(|d| d.as_f64())
            .ok_or_else(|| BloomError::Malformed("missing density_cells_per_ml".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubRecord {
    pub lat: f64,
    pub lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<NaiveDate>,
    pub density_cells_per_ml: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StubBloomClient {
    pub records: Vec<StubRecord>,
    pub default_density_cells_per_ml: f64,
    /// Every call fails as unavailable.
    #[serde(default)]
    pub offline: bool,
}

impl StubBloomClient {
    pub fn load(path: &Path) -> Result<Self, BloomError> {
        let text = std::fs::read_to_string(path).map_err(|e| BloomError::Malformed(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| BloomError::Malformed(e.to_string()))
    }

    pub fn offline() -> Self {
        Self {
            offline: true,
            ..Self::default()
        }
    }
}

impl BloomClient for StubBloomClient {
    /// Nearest record within 0.25° that matches the date or is undated; dated wins.
    fn density(&self, location: Location, date: NaiveDate) -> Result<f64, BloomError> {
        if self.offline {
            return Err(BloomError::ServiceUnavailable("stub offline".into()));
        }
        let near = |r: &&StubRecord| location.distance2(&Location { lat: r.lat, lon: r.lon }) <= 0.25 * 0.25;
        let best = self
            .records
            .iter()
            .filter(near)
            .filter(|r| r.date.map(|d| d == date).unwrap_or(true))
            .min_by(|a, b| {
                b.date
                    .is_some()
                    .cmp(&a.date.is_some())
                    .then(location.distance2(&Location { lat: a.lat, lon: a.lon }).total_cmp(
                        &location.distance2(&Location { lat: b.lat, lon: b.lon }),
                    ))
            });
        Ok(best
            .map(|r| r.density_cells_per_ml)
            .unwrap_or(self.default_density_cells_per_ml))
    }
}
