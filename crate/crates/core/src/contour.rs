//! Closed contour polygons in pixel coordinates and their rasterization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Closed polygon with vertices as `(row, col)` pixel coordinates. The last
/// vertex connects back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon<T> {
    pub vertices: Vec<(T, T)>,
}

impl<T: Real> Polygon<T> {
    pub fn new(vertices: Vec<(T, T)>) -> Self {
        Self { vertices }
    }

    /// Regular `n`-gon approximating a circle.
    pub fn circle(center: (T, T), radius: T, n: usize) -> Self {
        let vertices = (0..n)
            .map(|k| {
                let t = T::TAU() * T::from_count(k) / T::from_count(n);
                (center.0 + radius * t.sin(), center.1 + radius * t.cos())
            })
            .collect();
        Self { vertices }
    }

    pub fn signed_area(&self) -> T {
        let n = self.vertices.len();
        let mut s = T::zero();
        for i in 0..n {
            let (r0, c0) = self.vertices[i];
            let (r1, c1) = self.vertices[(i + 1) % n];
            s = s + c0 * r1 - c1 * r0;
        }
        s / T::lit(2.0)
    }

    pub fn translated(&self, dr: T, dc: T) -> Self {
        Self { vertices: self.vertices.iter().map(|&(r, c)| (r + dr, c + dc)).collect() }
    }

    fn edges(&self) -> impl Iterator<Item = ((T, T), (T, T))> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Even-odd test of a point; used for pixel centres.
    pub fn contains(&self, r: T, c: T) -> bool {
        let mut inside = false;
        for ((r0, c0), (r1, c1)) in self.edges() {
            if (r0 > r) != (r1 > r) {
                let x = c0 + (r - r0) * (c1 - c0) / (r1 - r0);
                if x > c {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Pixel-centre mask of a `rows x cols` grid, row-major. Same even-odd
    /// rule as [`Polygon::contains`], evaluated by scanlines.
    pub fn rasterize(&self, rows: usize, cols: usize) -> Vec<bool> {
        let mut mask = vec![false; rows * cols];
        let mut xs: Vec<T> = Vec::new();
        for row in 0..rows {
            let r = T::from_count(row);
            xs.clear();
            for ((r0, c0), (r1, c1)) in self.edges() {
                if (r0 > r) != (r1 > r) {
                    xs.push(c0 + (r - r0) * (c1 - c0) / (r1 - r0));
                }
            }
            if xs.is_empty() {
                continue;
            }
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for col in 0..cols {
                let c = T::from_count(col);
                // number of crossings strictly right of the centre
                let right = xs.len() - xs.partition_point(|&x| x <= c);
                mask[row * cols + col] = right % 2 == 1;
            }
        }
        mask
    }

    /// Checks vertex count, non-zero area and that no two non-adjacent edges cross.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if n < 3 {
            return Err(Error::MalformedPolygon(format!("{n} vertices")));
        }
        if self.vertices.iter().any(|&(r, c)| !r.is_finite() || !c.is_finite()) {
            return Err(Error::MalformedPolygon("non-finite vertex".into()));
        }
        if self.signed_area().abs() <= T::epsilon() {
            return Err(Error::MalformedPolygon("zero area".into()));
        }
        let edges: Vec<_> = self.edges().collect();
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if segments_cross(edges[i], edges[j]) {
                    return Err(Error::MalformedPolygon(format!("edges {i} and {j} intersect")));
                }
            }
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> ((T, T), (T, T)) {
        self.vertices.iter().fold(
            ((T::infinity(), T::neg_infinity()), (T::infinity(), T::neg_infinity())),
            |((r0, r1), (c0, c1)), &(r, c)| ((r0.min(r), r1.max(r)), (c0.min(c), c1.max(c))),
        )
    }
}

fn orient<T: Real>(a: (T, T), b: (T, T), c: (T, T)) -> T {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn segments_cross<T: Real>(s: ((T, T), (T, T)), t: ((T, T), (T, T))) -> bool {
    let d1 = orient(t.0, t.1, s.0);
    let d2 = orient(t.0, t.1, s.1);
    let d3 = orient(s.0, s.1, t.0);
    let d4 = orient(s.0, s.1, t.1);
    ((d1 > T::zero()) != (d2 > T::zero())) && ((d3 > T::zero()) != (d4 > T::zero())) && d1 != T::zero() && d2 != T::zero() && d3 != T::zero() && d4 != T::zero()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceContours<T> {
    pub endo: Polygon<T>,
    pub epi: Polygon<T>,
}

impl<T: Real> SliceContours<T> {
    pub fn validate(&self) -> Result<()> {
        self.endo.validate()?;
        self.epi.validate()?;
        if let Some(&(r, c)) = self.endo.vertices.iter().find(|&&(r, c)| !self.epi.contains(r, c)) {
            return Err(Error::MalformedPolygon(format!("endocardial vertex ({r}, {c}) lies outside the epicardium")));
        }
        Ok(())
    }

    pub fn translated(&self, dr: T, dc: T) -> Self {
        Self { endo: self.endo.translated(dr, dc), epi: self.epi.translated(dr, dc) }
    }
}

/// Endo/epicardial contours per SA slice, `None` where a slice has none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSet<T> {
    pub slices: Vec<Option<SliceContours<T>>>,
}

impl<T: Real> ContourSet<T> {
    pub fn get(&self, slice: usize) -> Result<&SliceContours<T>> {
        self.slices.get(slice).and_then(|s| s.as_ref()).ok_or(Error::MissingContour { slice })
    }

    pub fn validate(&self) -> Result<()> {
        self.slices.iter().flatten().try_for_each(SliceContours::validate)
    }
}

/// Rasterized regions of one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceRegions {
    pub rows: usize,
    pub cols: usize,
    /// Inside the epicardial contour (the LV).
    pub epi: Vec<bool>,
    /// Inside the endocardial contour (the cavity).
    pub endo: Vec<bool>,
}

impl SliceRegions {
    pub fn rasterize<T: Real>(contours: &SliceContours<T>, rows: usize, cols: usize) -> Self {
        Self { rows, cols, epi: contours.epi.rasterize(rows, cols), endo: contours.endo.rasterize(rows, cols) }
    }

    /// Myocardium: inside the epicardium but not the endocardium.
    pub fn myocardium(&self) -> Vec<bool> {
        self.epi.iter().zip(&self.endo).map(|(&e, &n)| e && !n).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scanline_matches_point_tests() {
        let p = Polygon::<f64>::circle((31.7, 30.2), 10.0, 97);
        let mask = p.rasterize(64, 64);
        for r in 0..64 {
            for c in 0..64 {
                assert_eq!(mask[r * 64 + c], p.contains(r as f64, c as f64), "({r},{c})");
            }
        }
    }

    #[test]
    fn square_interior_count() {
        // vertices at half-pixel offsets enclose exactly a 3x3 block of centres
        let p = Polygon::new(vec![(0.5, 0.5), (0.5, 3.5), (3.5, 3.5), (3.5, 0.5)]);
        assert_eq!(p.rasterize(6, 6).iter().filter(|&&b| b).count(), 9);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn malformed_polygons() {
        let flat = Polygon::new(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        assert!(matches!(flat.validate(), Err(Error::MalformedPolygon(_))));
        let bowtie = Polygon::new(vec![(0.0, 0.0), (2.0, 2.0), (0.0, 2.0), (2.0, 0.0)]);
        assert!(matches!(bowtie.validate(), Err(Error::MalformedPolygon(_))));
        let two = Polygon::new(vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!(two.validate().is_err());
    }

    #[test]
    fn endo_must_be_inside_epi() {
        let good = SliceContours { endo: Polygon::<f64>::circle((20.0, 20.0), 5.0, 32), epi: Polygon::circle((20.0, 20.0), 8.0, 32) };
        assert!(good.validate().is_ok());
        let bad = SliceContours { endo: good.epi.clone(), epi: good.endo.clone() };
        assert!(bad.validate().is_err());
    }
}
