//! Single-band grids and their file format.
//!
//! A raster file is one line of JSON header
//! `{"width", "height", "origin": [lon, lat], "pixel_size": [dx, dy], "nodata"}`
//! followed by `width * height` little-endian `f64` values in row-major order.
//! Row 0 is the northern edge; `origin` is the top-left corner.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const DEFAULT_NODATA: f64 = -9999.0;

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("raster shape: {0}")]
    Shape(String),
    #[error("raster header: {0}")]
    Header(String),
    #[error("raster io {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    /// `[lon, lat]` of the top-left corner.
    pub origin: [f64; 2],
    /// `[dx, dy]` in degrees, both positive.
    pub pixel_size: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    width: usize,
    height: usize,
    origin: [f64; 2],
    pixel_size: [f64; 2],
    nodata: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    width: usize,
    height: usize,
    transform: GeoTransform,
    nodata: f64,
    values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(
        width: usize,
        height: usize,
        transform: GeoTransform,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Shape("width and height must be positive".into()));
        }
        if values.len() != width * height {
            return Err(RasterError::Shape(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        if !(transform.pixel_size[0] > 0.0 && transform.pixel_size[1] > 0.0) {
            return Err(RasterError::Shape("pixel size must be positive".into()));
        }
        Ok(Self {
            width,
            height,
            transform,
            nodata,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn transform(&self) -> GeoTransform {
        self.transform
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        v == self.nodata || v.is_nan()
    }

    /// `(lon, lat)` of a pixel's center.
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        let [lon0, lat0] = self.transform.origin;
        let [dx, dy] = self.transform.pixel_size;
        (lon0 + (col as f64 + 0.5) * dx, lat0 - (row as f64 + 0.5) * dy)
    }

    pub fn same_grid(&self, other: &RasterGrid) -> bool {
        self.width == other.width && self.height == other.height && self.transform == other.transform
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, RasterError> {
        Self::new(self.width, self.height, self.transform, self.nodata, values)
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let header = Header {
            width: self.width,
            height: self.height,
            origin: self.transform.origin,
            pixel_size: self.transform.pixel_size,
            nodata: self.nodata,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self, RasterError> {
        let mut reader = BufReader::new(r);
        let mut line = String::new();
        reader
            .read_line(&mut line)
            .map_err(|e| RasterError::Header(e.to_string()))?;
        let h: Header = serde_json::from_str(line.trim_end()).map_err(|e| RasterError::Header(e.to_string()))?;
        let mut bytes = Vec::new();
        reader
            .read_to_end(&mut bytes)
            .map_err(|e| RasterError::Header(e.to_string()))?;
        if bytes.len() != h.width * h.height * 8 {
            return Err(RasterError::Shape(format!(
                "{} payload bytes for a {}x{} grid",
                bytes.len(),
                h.width,
                h.height
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(
            h.width,
            h.height,
            GeoTransform {
                origin: h.origin,
                pixel_size: h.pixel_size,
            },
            h.nodata,
            values,
        )
    }

    pub fn read_file(path: &Path) -> Result<Self, RasterError> {
        let f = std::fs::File::open(path).map_err(|e| RasterError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::read_from(f)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), RasterError> {
        let io = |e: std::io::Error| RasterError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        self.write_to(&mut f).map_err(io)?;
        f.flush().map_err(io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RasterGrid {
        RasterGrid::new(
            3,
            2,
            GeoTransform {
                origin: [21.0, 38.0],
                pixel_size: [0.1, 0.05],
            },
            DEFAULT_NODATA,
            vec![0.1, 0.2, 0.3, 0.4, DEFAULT_NODATA, 0.6],
        )
        .unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let g = grid();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        assert_eq!(RasterGrid::read_from(buf.as_slice()).unwrap(), g);
        buf.pop();
        assert!(RasterGrid::read_from(buf.as_slice()).is_err());
    }

    #[test]
    fn pixel_centers_descend_southwards() {
        let g = grid();
        let (lon, lat) = g.pixel_center(1, 2);
        assert!((lon - 21.25).abs() < 1e-12);
        assert!((lat - 37.925).abs() < 1e-12);
    }

    #[test]
    fn shape_is_checked() {
        let t = grid().transform();
        assert!(RasterGrid::new(2, 2, t, DEFAULT_NODATA, vec![0.0; 3]).is_err());
        assert!(RasterGrid::new(0, 2, t, DEFAULT_NODATA, vec![]).is_err());
    }
}
