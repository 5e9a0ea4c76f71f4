use serde::{Deserialize, Serialize};

use super::raster::RasterGrid;
use crate::geo::Polygon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZonalStat {
    Mean,
    Max,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ZonalError {
    #[error("zone polygon is degenerate")]
    DegenerateZone,
    #[error("no pixel center falls inside the zone")]
    NoOverlap,
    #[error("every pixel inside the zone is nodata")]
    AllNodata,
}

/// Valid values of pixels whose centers lie inside `zone`, in row-major order.
pub fn zone_values(raster: &RasterGrid, zone: &Polygon) -> Result<Vec<f64>, ZonalError> {
    if zone.is_degenerate() {
        return Err(ZonalError::DegenerateZone);
    }
    let bbox = zone.bbox();
    let mut selected = 0usize;
    let mut values = Vec::new();
    for row in 0..raster.height() {
        for col in 0..raster.width() {
            let (lon, lat) = raster.pixel_center(row, col);
            if lon < bbox.min_lon || lon > bbox.max_lon || lat < bbox.min_lat || lat > bbox.max_lat {
                continue;
            }
            if !zone.contains(lon, lat) {
                continue;
            }
            selected += 1;
            let v = raster.get(row, col);
            if !raster.is_nodata(v) {
                values.push(v);
            }
        }
    }
    if selected == 0 {
        return Err(ZonalError::NoOverlap);
    }
    if values.is_empty() {
        return Err(ZonalError::AllNodata);
    }
    Ok(values)
}

pub fn zonal_stats(raster: &RasterGrid, zone: &Polygon, stat: ZonalStat) -> Result<f64, ZonalError> {
    let values = zone_values(raster, zone)?;
    Ok(match stat {
        ZonalStat::Mean => values.iter().sum::<f64>() / values.len() as f64,
        ZonalStat::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}
