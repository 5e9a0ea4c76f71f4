use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::bloom::Location;
use crate::transport::{HttpTransport, TransportError};
use crate::window::TimeWindow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSample {
    pub date: NaiveDate,
    pub temperature_c: f64,
    pub wind_speed_ms: f64,
    pub precipitation_mm: f64,
}

/// Daily samples at one location. Dates strictly increase; precipitation is non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSeries")]
pub struct WeatherSeries {
    pub location: Location,
    pub samples: Vec<WeatherSample>,
}

#[derive(Deserialize)]
struct RawSeries {
    location: Location,
    samples: Vec<WeatherSample>,
}

impl TryFrom<RawSeries> for WeatherSeries {
    type Error = String;
    fn try_from(r: RawSeries) -> Result<Self, String> {
        WeatherSeries::new(r.location, r.samples)
    }
}

impl WeatherSeries {
    pub fn new(location: Location, samples: Vec<WeatherSample>) -> Result<Self, String> {
        for w in samples.windows(2) {
            if w[1].date <= w[0].date {
                return Err(format!("sample dates not strictly increasing at {}", w[1].date));
            }
        }
        if let Some(s) = samples.iter().find(|s| !(s.precipitation_mm >= 0.0)) {
            return Err(format!("negative precipitation on {}", s.date));
        }
        if let Some(s) = samples
            .iter()
            .find(|s| !s.temperature_c.is_finite() || !(s.wind_speed_ms >= 0.0))
        {
            return Err(format!("invalid temperature or wind on {}", s.date));
        }
        Ok(Self { location, samples })
    }

    pub fn within(&self, window: &TimeWindow) -> Vec<WeatherSample> {
        self.samples.iter().filter(|s| window.contains(s.date)).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WeatherError {
    #[error("weather service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("no weather data for {0}")]
    NoCoverage(String),
    #[error("weather data malformed: {0}")]
    Malformed(String),
}

pub trait WeatherClient: Send + Sync {
    fn fetch(&self, location: Location, window: &TimeWindow) -> Result<WeatherSeries, WeatherError>;
}

pub fn fetch_weather(
    lat: f64,
    lon: f64,
    window: &TimeWindow,
    client: &dyn WeatherClient,
) -> Result<WeatherSeries, WeatherError> {
    let location = Location::new(lat, lon).map_err(WeatherError::Malformed)?;
    let series = client.fetch(location, window)?;
    if series.samples.len() as i64 != window.days() || series.samples.iter().any(|s| !window.contains(s.date)) {
        return Err(WeatherError::NoCoverage(format!(
            "{window}: got {} of {} days",
            series.samples.len(),
            window.days()
        )));
    }
    Ok(series)
}

/// File-backed daily series, one fixture per location; the nearest within 0.5° serves.
#[derive(Debug, Clone, Default)]
pub struct StubWeatherClient {
    series: Vec<WeatherSeries>,
    offline: bool,
}

impl StubWeatherClient {
    pub fn new(series: Vec<WeatherSeries>) -> Self {
        Self { series, offline: false }
    }

    pub fn offline() -> Self {
        Self {
            series: Vec::new(),
            offline: true,
        }
    }

    pub fn parse(text: &str) -> Result<WeatherSeries, WeatherError> {
        serde_json::from_str(text).map_err(|e| WeatherError::Malformed(e.to_string()))
    }

    /// Loads every `*.json` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, WeatherError> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| WeatherError::Malformed(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|x| x == "json").unwrap_or(false))
            .collect();
        paths.sort();
        let mut series = Vec::new();
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(|e| WeatherError::Malformed(e.to_string()))?;
            series.push(Self::parse(&text).map_err(|e| WeatherError::Malformed(format!("{}: {e}", p.display())))?);
        }
        Ok(Self::new(series))
    }
}

fn nearest<'a, T>(items: &'a [T], loc: Location, at: impl Fn(&T) -> Location) -> Option<&'a T> {
    items
        .iter()
        .map(|s| {
            let l = at(s);
            ((l.lat - loc.lat).powi(2) + (l.lon - loc.lon).powi(2), s)
        })
        .filter(|(d, _)| *d <= 0.25)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, s)| s)
}

impl WeatherClient for StubWeatherClient {
    fn fetch(&self, location: Location, window: &TimeWindow) -> Result<WeatherSeries, WeatherError> {
        if self.offline {
            return Err(WeatherError::ServiceUnavailable("stub offline".into()));
        }
        let s = nearest(&self.series, location, |s| s.location)
            .ok_or_else(|| WeatherError::NoCoverage(format!("({}, {})", location.lat, location.lon)))?;
        Ok(WeatherSeries {
            location: s.location,
            samples: s.within(window),
        })
    }
}

/// Open-Meteo historical archive.
pub struct OpenMeteoClient {
    pub base_url: String,
    pub timeout: Duration,
    transport: Arc<dyn HttpTransport>,
}

impl OpenMeteoClient {
    pub const DEFAULT_URL: &'static str = "https://archive-api.open-meteo.com/v1/archive";

    pub fn new(base_url: &str, transport: Arc<dyn HttpTransport>) -> Self {
        Self {
            base_url: base_url.to_string(),
            timeout: Duration::from_secs(30),
            transport,
        }
    }

    pub fn request_url(&self, location: Location, window: &TimeWindow) -> String {
        let mut url = url::Url::parse(&self.base_url).expect("valid weather base url");
        url.query_pairs_mut()
            .append_pair("latitude", &location.lat.to_string())
            .append_pair("longitude", &location.lon.to_string())
            .append_pair("start_date", &window.start().to_string())
            .append_pair("end_date", &window.stop().to_string())
            .append_pair("daily", "temperature_2m_mean,wind_speed_10m_max,precipitation_sum")
            .append_pair("wind_speed_unit", "ms")
            .append_pair("timezone", "UTC");
        url.to_string()
    }
}

#[derive(Deserialize)]
struct OpenMeteoDaily {
    time: Vec<NaiveDate>,
    temperature_2m_mean: Vec<Option<f64>>,
    wind_speed_10m_max: Vec<Option<f64>>,
    precipitation_sum: Vec<Option<f64>>,
}

impl WeatherClient for OpenMeteoClient {
    fn fetch(&self, location: Location, window: &TimeWindow) -> Result<WeatherSeries, WeatherError> {
        let v = self
            .transport
            .get_json(&self.request_url(location, window), self.timeout)
            .map_err(|e: TransportError| WeatherError::ServiceUnavailable(e.to_string()))?;
        let daily: OpenMeteoDaily = serde_json::from_value(v.get("daily").cloned().unwrap_or_default())
            .map_err(|e| WeatherError::Malformed(e.to_string()))?;
        let n = daily.time.len();
        if daily.temperature_2m_mean.len() != n || daily.wind_speed_10m_max.len() != n || daily.precipitation_sum.len() != n {
            return Err(WeatherError::Malformed("daily arrays differ in length".into()));
        }
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let (Some(t), Some(w), Some(p)) = (
                daily.temperature_2m_mean[i],
                daily.wind_speed_10m_max[i],
                daily.precipitation_sum[i],
            ) else {
                return Err(WeatherError::NoCoverage(format!("gap on {}", daily.time[i])));
            };
            samples.push(WeatherSample {
                date: daily.time[i],
                temperature_c: t,
                wind_speed_ms: w,
                precipitation_mm: p,
            });
        }
        WeatherSeries::new(location, samples).map_err(WeatherError::Malformed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyNormal {
    pub temperature_c: f64,
    pub wind_speed_ms: f64,
    pub precipitation_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimatologyRecord {
    pub name: String,
    pub location: Location,
    /// January first.
    pub monthly: Vec<MonthlyNormal>,
}

/// Long-term monthly normals served as a daily series; the fallback when live weather fails.
#[derive(Debug, Clone, Default)]
pub struct ClimatologyClient {
    records: Vec<ClimatologyRecord>,
}

impl ClimatologyClient {
    pub fn new(records: Vec<ClimatologyRecord>) -> Result<Self, WeatherError> {
        if let Some(r) = records.iter().find(|r| r.monthly.len() != 12) {
            return Err(WeatherError::Malformed(format!("`{}` needs 12 monthly normals", r.name)));
        }
        Ok(Self { records })
    }

    pub fn load(path: &Path) -> Result<Self, WeatherError> {
        let text = std::fs::read_to_string(path).map_err(|e| WeatherError::Malformed(format!("{}: {e}", path.display())))?;
        Self::new(serde_json::from_str(&text).map_err(|e| WeatherError::Malformed(e.to_string()))?)
    }
}

impl WeatherClient for ClimatologyClient {
    fn fetch(&self, location: Location, window: &TimeWindow) -> Result<WeatherSeries, WeatherError> {
        let r = nearest(&self.records, location, |r| r.location)
            .ok_or_else(|| WeatherError::NoCoverage(format!("no normals near ({}, {})", location.lat, location.lon)))?;
        let samples = window
            .dates()
            .map(|date| {
                let m = &r.monthly[date.month0() as usize];
                WeatherSample {
                    date,
                    temperature_c: m.temperature_c,
                    wind_speed_ms: m.wind_speed_ms,
                    precipitation_mm: m.precipitation_mm,
                }
            })
            .collect();
        WeatherSeries::new(r.location, samples).map_err(WeatherError::Malformed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::RecordingTransport;

    fn day(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn window(a: &str, b: &str) -> TimeWindow {
        TimeWindow::new(day(a), day(b)).unwrap()
    }

    const FIXTURE: &str = r#"{"location": {"lat": 38.53, "lon": 22.12}, "samples": [
        {"date": "2024-06-01", "temperature_c": 22.1, "wind_speed_ms": 2.0, "precipitation_mm": 0.0},
        {"date": "2024-06-02", "temperature_c": 23.4, "wind_speed_ms": 3.1, "precipitation_mm": 1.2},
        {"date": "2024-06-03", "temperature_c": 24.0, "wind_speed_ms": 1.4, "precipitation_mm": 0.0},
        {"date": "2024-06-04", "temperature_c": 21.7, "wind_speed_ms": 4.2, "precipitation_mm": 6.5}
    ]}"#;

    #[test]
    fn three_day_window_from_stub() {
        let client = StubWeatherClient::new(vec![StubWeatherClient::parse(FIXTURE).unwrap()]);
        let s = fetch_weather(38.5, 22.1, &window("2024-06-01", "2024-06-03"), &client).unwrap();
        assert_eq!(s.samples.len(), 3);
        assert!(s.samples.windows(2).all(|w| w[0].date < w[1].date));
        let one = fetch_weather(38.5, 22.1, &window("2024-06-02", "2024-06-02"), &client).unwrap();
        assert_eq!(one.samples.len(), 1);
        assert!(matches!(
            fetch_weather(38.5, 22.1, &window("2024-06-03", "2024-06-09"), &client),
            Err(WeatherError::NoCoverage(_))
        ));
    }

    #[test]
    fn negative_precipitation_rejected_at_parse() {
        let bad = FIXTURE.replace("\"precipitation_mm\": 1.2", "\"precipitation_mm\": -1.2");
        assert!(StubWeatherClient::parse(&bad).is_err());
        let unordered = FIXTURE.replace("2024-06-03", "2024-06-01");
        assert!(StubWeatherClient::parse(&unordered).is_err());
    }

    #[test]
    fn climatology_covers_any_window() {
        let normals = (1..=12)
            .map(|m| MonthlyNormal {
                temperature_c: m as f64,
                wind_speed_ms: 2.0,
                precipitation_mm: 1.0,
            })
            .collect();
        let c = ClimatologyClient::new(vec![ClimatologyRecord {
            name: "Mornos".into(),
            location: Location { lat: 38.53, lon: 22.12 },
            monthly: normals,
        }])
        .unwrap();
        let s = fetch_weather(38.5, 22.1, &window("2024-06-29", "2024-07-02"), &c).unwrap();
        assert_eq!(s.samples.iter().map(|x| x.temperature_c).collect::<Vec<_>>(), vec![6.0, 6.0, 7.0, 7.0]);
    }

    #[test]
    fn open_meteo_request_and_outage() {
        let t = Arc::new(RecordingTransport::offline());
        let c = OpenMeteoClient::new(OpenMeteoClient::DEFAULT_URL, t.clone());
        let w = window("2024-06-01", "2024-06-03");
        assert!(matches!(
            c.fetch(Location { lat: 38.5, lon: 22.1 }, &w),
            Err(WeatherError::ServiceUnavailable(_))
        ));
        let url = &t.calls()[0].url;
        assert!(url.contains("start_date=2024-06-01") && url.contains("end_date=2024-06-03"));
    }
}
