//! Computes NDCI and NDWI over a small synthetic scene and summarizes them
//! inside a lake polygon.

use std::collections::BTreeMap;

use aquaflow::aquatools::{compute_index, zonal_stats, GeoTransform, IndexKind, RasterGrid, ZonalStat};
use aquaflow::geo::Polygon;

const NODATA: f64 = -9999.0;

fn band(f: impl Fn(usize, usize) -> f64) -> RasterGrid {
    let (w, h) = (8, 6);
    let mut values = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            values.push(f(row, col));
        }
    }
    values[0] = NODATA;
    let transform = GeoTransform {
        origin: [21.30, 38.60],
        pixel_size: [0.01, 0.01],
    };
    RasterGrid::new(w, h, transform, NODATA, values).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bands = BTreeMap::from([
        ("B03".to_string(), band(|_, c| 0.06 + 0.002 * c as f64)),
        ("B04".to_string(), band(|r, _| 0.04 + 0.001 * r as f64)),
        ("B05".to_string(), band(|r, c| 0.05 + 0.001 * (r + c) as f64)),
        ("B08".to_string(), band(|_, _| 0.02)),
    ]);
    let lake = Polygon(vec![[21.32, 38.585], [21.37, 38.585], [21.37, 38.555], [21.32, 38.555]]);

    for kind in [IndexKind::Ndci, IndexKind::Ndwi] {
        let index = compute_index(&bands, kind)?;
        let mean = zonal_stats(&index, &lake, ZonalStat::Mean)?;
        let max = zonal_stats(&index, &lake, ZonalStat::Max)?;
        println!("{kind:?}: mean {mean:.4}, max {max:.4}");
    }

    let elsewhere = Polygon(vec![[22.0, 38.0], [22.1, 38.0], [22.1, 38.1]]);
    let ndci = compute_index(&bands, IndexKind::Ndci)?;
    println!("outside the scene: {:?}", zonal_stats(&ndci, &elsewhere, ZonalStat::Mean));
    Ok(())
}
