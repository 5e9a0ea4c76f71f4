//! Lon/lat polygon geometry used for AOIs, scene footprints and zonal masks.

use serde::{Deserialize, Serialize};

const KM_PER_DEGREE: f64 = 111.32;

/// Simple polygon as a ring of `[lon, lat]` vertices in degrees.
///
/// A closing vertex equal to the first one is accepted and ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon(pub Vec<[f64; 2]>);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BoundingBox {
    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.min_lon <= other.max_lon
            && other.min_lon <= self.max_lon
            && self.min_lat <= other.max_lat
            && other.min_lat <= self.max_lat
    }

    pub fn to_polygon(&self) -> Polygon {
        Polygon(vec![
            [self.min_lon, self.min_lat],
            [self.max_lon, self.min_lat],
            [self.max_lon, self.max_lat],
            [self.min_lon, self.max_lat],
        ])
    }
}

impl Polygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Self {
        Self(vertices)
    }

    /// Vertices with any closing duplicate removed.
    pub fn ring(&self) -> &[[f64; 2]] {
        let v = &self.0;
        if v.len() > 1 && v[0] == v[v.len() - 1] {
            &v[..v.len() - 1]
        } else {
            v
        }
    }

    /// Signed shoelace area in square degrees (positive when counter-clockwise).
    pub fn signed_area(&self) -> f64 {
        let ring = self.ring();
        let n = ring.len();
        if n < 3 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..n {
            let [x0, y0] = ring[i];
            let [x1, y1] = ring[(i + 1) % n];
            acc += x0 * y1 - x1 * y0;
        }
        acc / 2.0
    }

    /// Fewer than three distinct vertices, non-finite coordinates, or zero area.
    pub fn is_degenerate(&self) -> bool {
        let ring = self.ring();
        ring.len() < 3
            || ring.iter().any(|p| !p[0].is_finite() || !p[1].is_finite())
            || self.signed_area() == 0.0
    }

    /// Approximate surface area in km² (equirectangular projection at the centroid latitude).
    pub fn area_km2(&self) -> f64 {
        let lat = self.centroid()[1].to_radians();
        self.signed_area().abs() * KM_PER_DEGREE * KM_PER_DEGREE * lat.cos()
    }

    /// Vertex average; good enough for request coordinates.
    pub fn centroid(&self) -> [f64; 2] {
        let ring = self.ring();
        if ring.is_empty() {
            return [0.0, 0.0];
        }
        let n = ring.len() as f64;
        let (sx, sy) = ring
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        [sx / n, sy / n]
    }

    pub fn bbox(&self) -> BoundingBox {
        let mut b = BoundingBox {
            min_lon: f64::INFINITY,
            min_lat: f64::INFINITY,
            max_lon: f64::NEG_INFINITY,
            max_lat: f64::NEG_INFINITY,
        };
        for p in self.ring() {
            b.min_lon = b.min_lon.min(p[0]);
            b.max_lon = b.max_lon.max(p[0]);
            b.min_lat = b.min_lat.min(p[1]);
            b.max_lat = b.max_lat.max(p[1]);
        }
        b
    }

    /// Even-odd ray casting. Points on the boundary may fall either way.
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        let ring = self.ring();
        let n = ring.len();
        let mut inside = false;
        let mut j = n.wrapping_sub(1);
        for i in 0..n {
            let [xi, yi] = ring[i];
            let [xj, yj] = ring[j];
            if (yi > lat) != (yj > lat) {
                let x_cross = (xj - xi) * (lat - yi) / (yj - yi) + xi;
                if lon < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let ring = self.ring();
        let n = ring.len();
        (0..n).map(move |i| (ring[i], ring[(i + 1) % n]))
    }

    /// True when the two polygons share any area or boundary point.
    pub fn intersects(&self, other: &Polygon) -> bool {
        if !self.bbox().intersects(&other.bbox()) {
            return false;
        }
        if other.ring().iter().any(|p| self.contains(p[0], p[1]))
            || self.ring().iter().any(|p| other.contains(p[0], p[1]))
        {
            return true;
        }
        self.edges()
            .any(|(a, b)| other.edges().any(|(c, d)| segments_intersect(a, b, c, d)))
    }
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, size: f64) -> Polygon {
        Polygon(vec![[x0, y0], [x0 + size, y0], [x0 + size, y0 + size], [x0, y0 + size]])
    }

    #[test]
    fn contains_interior_and_excludes_exterior() {
        let sq = square(0.0, 0.0, 1.0);
        assert!(sq.contains(0.5, 0.5));
        assert!(!sq.contains(1.5, 0.5));
        assert!(!sq.contains(-0.1, 0.5));
    }

    #[test]
    fn closed_ring_is_equivalent() {
        let mut closed = square(0.0, 0.0, 1.0);
        closed.0.push([0.0, 0.0]);
        assert_eq!(closed.ring().len(), 4);
        assert_eq!(closed.signed_area(), 1.0);
    }

    #[test]
    fn degenerate_polygons() {
        assert!(Polygon(vec![[0.0, 0.0], [1.0, 1.0]]).is_degenerate());
        assert!(Polygon(vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_degenerate());
        assert!(!square(0.0, 0.0, 1.0).is_degenerate());
    }

    #[test]
    fn intersection_cases() {
        let a = square(0.0, 0.0, 2.0);
        assert!(a.intersects(&square(1.0, 1.0, 2.0)));
        assert!(a.intersects(&square(0.5, 0.5, 0.5)));
        assert!(square(0.5, 0.5, 0.5).intersects(&a));
        assert!(!a.intersects(&square(3.0, 3.0, 1.0)));
        // crossing without vertex containment
        let bar_h = Polygon(vec![[-1.0, 0.4], [3.0, 0.4], [3.0, 0.6], [-1.0, 0.6]]);
        let bar_v = Polygon(vec![[0.4, -1.0], [0.6, -1.0], [0.6, 3.0], [0.4, 3.0]]);
        assert!(bar_h.intersects(&bar_v));
    }

    #[test]
    fn area_km2_of_a_tenth_degree_square_at_equator() {
        let sq = square(0.0, -0.05, 0.1);
        let expected = 0.01 * KM_PER_DEGREE * KM_PER_DEGREE;
        assert!((sq.area_km2() - expected).abs() / expected < 1e-3);
    }
}
