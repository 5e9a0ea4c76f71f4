use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::raster::RasterGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum IndexKind {
    /// (B5 − B4) / (B5 + B4): red edge against red.
    Ndci,
    /// (B3 − B8) / (B3 + B8): green against near infrared.
    Ndwi,
}

impl IndexKind {
    /// `(x, y)` band names for `(x − y) / (x + y)`.
    pub fn bands(self) -> (&'static str, &'static str) {
        match self {
            IndexKind::Ndci => ("B05", "B04"),
            IndexKind::Ndwi => ("B03", "B08"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IndexError {
    #[error("band {0} missing")]
    MissingBand(String),
    #[error("bands {0} and {1} are on different grids")]
    ShapeMismatch(String, String),
}

/// `(x − y) / (x + y)`, or `None` where undefined.
pub fn normalized_difference(x: f64, y: f64) -> Option<f64> {
    let den = x + y;
    if den == 0.0 || !x.is_finite() || !y.is_finite() {
        return None;
    }
    let v = (x - y) / den;
    // reflectances should be non-negative; clamp guards against negative inputs
    Some(v.clamp(-1.0, 1.0))
}

/// Pixelwise normalized difference. Nodata in either band, or a zero
/// denominator, yields the first band's nodata value.
pub fn compute_index(bands: &BTreeMap<String, RasterGrid>, kind: IndexKind) -> Result<RasterGrid, IndexError> {
    let (xn, yn) = kind.bands();
    let x = bands.get(xn).ok_or_else(|| IndexError::MissingBand(xn.into()))?;
    let y = bands.get(yn).ok_or_else(|| IndexError::MissingBand(yn.into()))?;
    if !x.same_grid(y) {
        return Err(IndexError::ShapeMismatch(xn.into(), yn.into()));
    }
    let nodata = x.nodata();
    let values = x
        .values()
        .iter()
        .zip(y.values())
        .map(|(&a, &b)| {
            if x.is_nodata(a) || y.is_nodata(b) {
                return nodata;
            }
            normalized_difference(a, b).unwrap_or(nodata)
        })
        .collect();
    Ok(x.with_values(values).expect("same shape"))
}
