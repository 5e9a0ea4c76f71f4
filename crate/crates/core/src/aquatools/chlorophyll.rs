use serde::{Deserialize, Serialize};

/// Quadratic NDCI-to-chlorophyll-a model with a floor at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChlorophyllModel {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for ChlorophyllModel {
    fn default() -> Self {
        Self {
            c0: 14.039,
            c1: 86.115,
            c2: 194.325,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("NDCI {0} outside [-1, 1]")]
pub struct OutOfRangeNdci(pub f64);

impl ChlorophyllModel {
    /// Chlorophyll-a in µg/L.
    pub fn estimate(&self, ndci: f64) -> Result<f64, OutOfRangeNdci> {
        if !ndci.is_finite() || !(-1.0..=1.0).contains(&ndci) {
            return Err(OutOfRangeNdci(ndci));
        }
        Ok((self.c0 + self.c1 * ndci + self.c2 * ndci * ndci).max(0.0))
    }
}

pub fn estimate_chlorophyll(ndci: f64, model: &ChlorophyllModel) -> Result<f64, OutOfRangeNdci> {
    model.estimate(ndci)
}
