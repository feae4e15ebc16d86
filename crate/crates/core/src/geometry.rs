//! Slice pose algebra in the patient coordinate system.
//!
//! A slice is a planar pixel grid. Pixel `(r, c)` (fractional indices
//! allowed, integer indices at pixel centres) sits at
//! `ipp + r * ps_row * iop_row + c * ps_col * iop_col`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Tolerance used for unit-length and orthogonality checks on orientation vectors.
pub fn orientation_tolerance<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(64.0))
}

/// Below this norm of the normals' cross product two planes are treated as parallel.
pub const PARALLEL_TOLERANCE: f64 = 1e-6;
/// Maximum distance (mm) between a line and a plane for the line to count as in-plane.
pub const IN_PLANE_TOLERANCE_MM: f64 = 1e-6;
/// Largest angle between adjacent SA normals accepted by [`contiguous_regions`].
pub const MAX_CONTIGUOUS_ANGLE_DEG: f64 = 1.0;

/// Pixel coordinates within this distance outside the grid are snapped onto it.
const EDGE_SNAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicePose<T> {
    pub ipp: Vec3<T>,
    pub iop_row: Vec3<T>,
    pub iop_col: Vec3<T>,
    pub ps_row: T,
    pub ps_col: T,
    pub rows: usize,
    pub cols: usize,
}

impl<T: Real> SlicePose<T> {
    /// Builds a pose, rejecting non-orthonormal orientation or non-positive spacing.
    pub fn new(
        ipp: Vec3<T>,
        iop_row: Vec3<T>,
        iop_col: Vec3<T>,
        ps_row: T,
        ps_col: T,
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        let pose = Self { ipp, iop_row, iop_col, ps_row, ps_col, rows, cols };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        let tol = orientation_tolerance::<T>();
        if (self.iop_row.norm() - T::one()).abs() > tol || (self.iop_col.norm() - T::one()).abs() > tol {
            return Err(Error::InvalidPose(format!(
                "orientation vectors must be unit length (|row| = {}, |col| = {})",
                self.iop_row.norm(),
                self.iop_col.norm()
            )));
        }
        let d = self.iop_row.dot(self.iop_col);
        if d.abs() > tol {
            return Err(Error::InvalidPose(format!("orientation vectors not orthogonal (dot = {d})")));
        }
        if !(self.ps_row > T::zero() && self.ps_col > T::zero()) {
            return Err(Error::InvalidPose("pixel spacing must be positive".into()));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidPose("grid must have at least one pixel".into()));
        }
        Ok(())
    }

    /// Unit plane normal, `iop_row x iop_col`.
    pub fn normal(&self) -> Vec3<T> {
        self.iop_row.cross(self.iop_col).normalized()
    }

    /// Signed offset of the plane along its own normal.
    pub fn plane_offset(&self) -> T {
        self.normal().dot(self.ipp)
    }

    pub fn pixel_to_patient(&self, r: T, c: T) -> Vec3<T> {
        self.ipp + self.iop_row * (r * self.ps_row) + self.iop_col * (c * self.ps_col)
    }

    /// Projects a patient point into fractional pixel coordinates; the third
    /// value is the signed distance from the plane in mm.
    pub fn patient_to_pixel(&self, p: Vec3<T>) -> (T, T, T) {
        let d = p - self.ipp;
        (d.dot(self.iop_row) / self.ps_row, d.dot(self.iop_col) / self.ps_col, d.dot(self.normal()))
    }

    pub fn distance_to_plane(&self, p: Vec3<T>) -> T {
        (p - self.ipp).dot(self.normal())
    }

    pub fn translated(&self, delta: Vec3<T>) -> Self {
        Self { ipp: self.ipp + delta, ..*self }
    }

    pub fn min_spacing(&self) -> T {
        self.ps_row.min(self.ps_col)
    }
}

/// A 2D slice with intensities stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceImage<T> {
    pub pose: SlicePose<T>,
    pub pixels: Vec<T>,
}

impl<T: Real> SliceImage<T> {
    pub fn new(pose: SlicePose<T>, pixels: Vec<T>) -> Result<Self> {
        if pixels.len() != pose.rows * pose.cols {
            return Err(Error::ShapeMismatch { left: pixels.len(), right: pose.rows * pose.cols });
        }
        Ok(Self { pose, pixels })
    }

    pub fn filled(pose: SlicePose<T>, value: T) -> Self {
        let n = pose.rows * pose.cols;
        Self { pose, pixels: vec![value; n] }
    }

    pub fn rows(&self) -> usize {
        self.pose.rows
    }

    pub fn cols(&self) -> usize {
        self.pose.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.pixels[r * self.pose.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        let cols = self.pose.cols;
        self.pixels[r * cols + c] = v;
    }

    /// Bilinear interpolation at fractional pixel coordinates, `None` outside the grid.
    pub fn bilinear(&self, r: T, c: T) -> Option<T> {
        let (r0, fr) = interp_axis(r, self.pose.rows)?;
        let (c0, fc) = interp_axis(c, self.pose.cols)?;
        let r1 = (r0 + 1).min(self.pose.rows - 1);
        let c1 = (c0 + 1).min(self.pose.cols - 1);
        let top = self.get(r0, c0) * (T::one() - fc) + self.get(r0, c1) * fc;
        let bottom = self.get(r1, c0) * (T::one() - fc) + self.get(r1, c1) * fc;
        Some(top * (T::one() - fr) + bottom * fr)
    }

    /// Interpolated intensity at a patient point assumed to lie on the plane.
    pub fn sample_patient(&self, p: Vec3<T>) -> Option<T> {
        let (r, c, _) = self.pose.patient_to_pixel(p);
        self.bilinear(r, c)
    }
}

fn interp_axis<T: Real>(x: T, n: usize) -> Option<(usize, T)> {
    let snap = T::lit(EDGE_SNAP);
    let last = T::from_count(n - 1);
    if !x.is_finite() || x < -snap || x > last + snap {
        return None;
    }
    let x = x.max(T::zero()).min(last);
    if n == 1 {
        return Some((0, T::zero()));
    }
    let i = x.floor().to_usize().unwrap_or(0).min(n - 2);
    Some((i, x - T::from_count(i)))
}

/// Inclusive pixel-index rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub row_min: usize,
    pub row_max: usize,
    pub col_min: usize,
    pub col_max: usize,
}

impl Roi {
    pub fn new(row_min: usize, row_max: usize, col_min: usize, col_max: usize) -> Self {
        Self { row_min, row_max, col_min, col_max }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self::new(0, rows.saturating_sub(1), 0, cols.saturating_sub(1))
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if self.row_min > self.row_max || self.row_max >= rows || self.col_min > self.col_max || self.col_max >= cols {
            return Err(Error::InvalidRoi(format!("{self:?} does not fit a {rows}x{cols} grid")));
        }
        Ok(())
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        (self.row_min..=self.row_max).contains(&r) && (self.col_min..=self.col_max).contains(&c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line3<T> {
    pub point: Vec3<T>,
    pub direction: Vec3<T>,
}

impl<T: Real> Line3<T> {
    pub fn new(point: Vec3<T>, direction: Vec3<T>) -> Self {
        Self { point, direction: direction.normalized() }
    }

    pub fn at(&self, t: T) -> Vec3<T> {
        self.point + self.direction * t
    }

    pub fn distance_to(&self, p: Vec3<T>) -> T {
        let d = p - self.point;
        (d - self.direction * d.dot(self.direction)).norm()
    }
}

/// Closed parameter interval `[t_min, t_max]` along a [`Line3`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub t_min: T,
    pub t_max: T,
}

impl<T: Real> Interval<T> {
    pub fn intersect(self, o: Self) -> Option<Self> {
        let t_min = self.t_min.max(o.t_min);
        let t_max = self.t_max.min(o.t_max);
        (t_min <= t_max).then_some(Self { t_min, t_max })
    }

    pub fn length(&self) -> T {
        self.t_max - self.t_min
    }

    /// Sample parameters `t_min + i * step` for every `i` with `t <= t_max`.
    pub fn steps(&self, step: T) -> impl Iterator<Item = T> + '_ {
        let n = ((self.length() / step) + T::lit(1e-9)).floor().to_usize().unwrap_or(0) + 1;
        (0..n).map(move |i| self.t_min + step * T::from_count(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSegment<T> {
    pub values: Vec<T>,
    pub step_mm: T,
}

/// Regular 2D sample grid; `valid[i]` is false where a sample fell outside its slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledRegion<T> {
    pub values: Vec<T>,
    pub valid: Vec<bool>,
    pub rows: usize,
    pub cols: usize,
    pub extent_mm: (T, T),
}

/// Line shared by two slice planes, `None` when they are parallel.
pub fn plane_intersection<T: Real>(a: &SlicePose<T>, b: &SlicePose<T>) -> Option<Line3<T>> {
    let na = a.normal();
    let nb = b.normal();
    let dir = na.cross(nb);
    let s = dir.norm();
    if s < T::lit(PARALLEL_TOLERANCE) {
        return None;
    }
    let ha = na.dot(a.ipp);
    let hb = nb.dot(b.ipp);
    let c = na.dot(nb);
    let det = s * s;
    // point on both planes closest to the origin
    let point = (na * (ha - hb * c) + nb * (hb - ha * c)) / det;
    Some(Line3::new(point, dir))
}

/// Parameter interval over which `line` stays inside `roi` of `slice`.
pub fn clip_line_to_roi<T: Real>(slice: &SliceImage<T>, roi: &Roi, line: &Line3<T>) -> Result<Option<Interval<T>>> {
    let pose = &slice.pose;
    let tol = T::lit(IN_PLANE_TOLERANCE_MM);
    let off = pose.distance_to_plane(line.point).abs();
    let tilt = pose.normal().dot(line.direction).abs();
    if off > tol || tilt > tol {
        return Err(Error::LineNotInPlane { distance_mm: off.max(tilt).as_f64() });
    }
    roi.validate(pose.rows, pose.cols)?;
    let (r0, c0, _) = pose.patient_to_pixel(line.point);
    let dr = line.direction.dot(pose.iop_row) / pose.ps_row;
    let dc = line.direction.dot(pose.iop_col) / pose.ps_col;
    let mut iv = Interval { t_min: T::neg_infinity(), t_max: T::infinity() };
    for (start, rate, lo, hi) in [
        (r0, dr, roi.row_min, roi.row_max),
        (c0, dc, roi.col_min, roi.col_max),
    ] {
        let (lo, hi) = (T::from_count(lo), T::from_count(hi));
        if rate.abs() <= T::epsilon() {
            if start < lo - T::lit(EDGE_SNAP) || start > hi + T::lit(EDGE_SNAP) {
                return Ok(None);
            }
            continue;
        }
        let ta = (lo - start) / rate;
        let tb = (hi - start) / rate;
        match iv.intersect(Interval { t_min: ta.min(tb), t_max: ta.max(tb) }) {
            Some(next) => iv = next,
            None => return Ok(None),
        }
    }
    Ok(Some(iv))
}

/// Bilinear samples of `slice` along `line` every `step_mm` across `interval`.
/// Samples falling outside the image are skipped.
pub fn sample_segment<T: Real>(
    slice: &SliceImage<T>,
    line: &Line3<T>,
    interval: Interval<T>,
    step_mm: T,
) -> Result<SampledSegment<T>> {
    if !(step_mm > T::zero()) {
        return Err(Error::InvalidPose("sampling step must be positive".into()));
    }
    let values: Vec<T> = interval.steps(step_mm).filter_map(|t| slice.sample_patient(line.at(t))).collect();
    if values.len() < 2 {
        return Err(Error::TooFewSamples { found: values.len() });
    }
    Ok(SampledSegment { values, step_mm })
}

/// Samples two slices along a shared line, keeping only positions valid on both.
pub fn sample_segment_pair<T: Real>(
    a: &SliceImage<T>,
    b: &SliceImage<T>,
    line: &Line3<T>,
    interval: Interval<T>,
    step_mm: T,
) -> Result<(SampledSegment<T>, SampledSegment<T>)> {
    if !(step_mm > T::zero()) {
        return Err(Error::InvalidPose("sampling step must be positive".into()));
    }
    let (va, vb): (Vec<T>, Vec<T>) = interval
        .steps(step_mm)
        .filter_map(|t| {
            let p = line.at(t);
            Some((a.sample_patient(p)?, b.sample_patient(p)?))
        })
        .unzip();
    if va.len() < 2 {
        return Err(Error::TooFewSamples { found: va.len() });
    }
    Ok((SampledSegment { values: va, step_mm }, SampledSegment { values: vb, step_mm }))
}

/// Smallest rectangle on the middle plane of two near-parallel slices that
/// contains both ROIs projected along the shared normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidPlaneRect<T> {
    pub normal: Vec3<T>,
    /// Point of the middle plane used as the `(u, v)` origin.
    pub origin: Vec3<T>,
    pub axis_u: Vec3<T>,
    pub axis_v: Vec3<T>,
    pub u_range: (T, T),
    pub v_range: (T, T),
}

impl<T: Real> MidPlaneRect<T> {
    pub fn point(&self, u: T, v: T) -> Vec3<T> {
        self.origin + self.axis_u * u + self.axis_v * v
    }

    /// `(u, v)` coordinates of the projection of `p` onto the middle plane.
    pub fn project(&self, p: Vec3<T>) -> (T, T) {
        let d = p - self.origin;
        (d.dot(self.axis_u), d.dot(self.axis_v))
    }
}

fn roi_corners<T: Real>(pose: &SlicePose<T>, roi: &Roi) -> [Vec3<T>; 4] {
    let (r0, r1) = (T::from_count(roi.row_min), T::from_count(roi.row_max));
    let (c0, c1) = (T::from_count(roi.col_min), T::from_count(roi.col_max));
    [
        pose.pixel_to_patient(r0, c0),
        pose.pixel_to_patient(r0, c1),
        pose.pixel_to_patient(r1, c0),
        pose.pixel_to_patient(r1, c1),
    ]
}

/// Angle between the normals of two slices in degrees, ignoring orientation sign.
pub fn normal_angle_deg<T: Real>(a: &SlicePose<T>, b: &SlicePose<T>) -> f64 {
    let c = a.normal().dot(b.normal()).abs().min(T::one());
    c.as_f64().acos().to_degrees()
}

pub fn common_rectangle<T: Real>(a: &SlicePose<T>, roi_a: &Roi, b: &SlicePose<T>, roi_b: &Roi) -> Result<MidPlaneRect<T>> {
    let angle = normal_angle_deg(a, b);
    if angle >= MAX_CONTIGUOUS_ANGLE_DEG {
        return Err(Error::NotParallel { angle_deg: angle });
    }
    roi_a.validate(a.rows, a.cols)?;
    roi_b.validate(b.rows, b.cols)?;
    let na = a.normal();
    let nb = if na.dot(b.normal()) < T::zero() { -b.normal() } else { b.normal() };
    let normal = (na + nb).normalized();
    let mid = (normal.dot(a.ipp) + normal.dot(b.ipp)) / T::lit(2.0);
    let origin = a.ipp + normal * (mid - normal.dot(a.ipp));
    let axis_u = (a.iop_row - normal * a.iop_row.dot(normal)).normalized();
    let axis_v = normal.cross(axis_u);
    let mut rect = MidPlaneRect {
        normal,
        origin,
        axis_u,
        axis_v,
        u_range: (T::infinity(), T::neg_infinity()),
        v_range: (T::infinity(), T::neg_infinity()),
    };
    for p in roi_corners(a, roi_a).into_iter().chain(roi_corners(b, roi_b)) {
        let (u, v) = rect.project(p);
        rect.u_range = (rect.u_range.0.min(u), rect.u_range.1.max(u));
        rect.v_range = (rect.v_range.0.min(v), rect.v_range.1.max(v));
    }
    Ok(rect)
}

fn project_along<T: Real>(p: Vec3<T>, dir: Vec3<T>, pose: &SlicePose<T>) -> Vec3<T> {
    let n = pose.normal();
    let s = -(p - pose.ipp).dot(n) / dir.dot(n);
    p + dir * s
}

/// Region pair for the contiguous cost of two adjacent SA slices.
pub fn contiguous_regions<T: Real>(
    a: &SliceImage<T>,
    roi_a: &Roi,
    b: &SliceImage<T>,
    roi_b: &Roi,
) -> Result<(SampledRegion<T>, SampledRegion<T>)> {
    let rect = common_rectangle(&a.pose, roi_a, &b.pose, roi_b)?;
    let step = a.pose.min_spacing().min(b.pose.min_spacing());
    let count = |range: (T, T)| ((range.1 - range.0) / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0) + 1;
    let (nu, nv) = (count(rect.u_range), count(rect.v_range));
    let mut out = [a, b].map(|_| SampledRegion {
        values: Vec::with_capacity(nu * nv),
        valid: Vec::with_capacity(nu * nv),
        rows: nu,
        cols: nv,
        extent_mm: (rect.u_range.1 - rect.u_range.0, rect.v_range.1 - rect.v_range.0),
    });
    // the map from (u, v) on the middle plane to pixel coordinates of a
    // slice is affine, so it is evaluated once per slice
    let to_pixel = |slice: &SliceImage<T>, u: T, v: T| {
        let (r, c, _) = slice.pose.patient_to_pixel(project_along(rect.point(u, v), rect.normal, &slice.pose));
        (r, c)
    };
    let (u0, v0) = (rect.u_range.0, rect.v_range.0);
    let maps = [a, b].map(|slice| {
        let base = to_pixel(slice, u0, v0);
        let du = to_pixel(slice, u0 + step, v0);
        let dv = to_pixel(slice, u0, v0 + step);
        (base, (du.0 - base.0, du.1 - base.1), (dv.0 - base.0, dv.1 - base.1))
    });
    for i in 0..nu {
        let fi = T::from_count(i);
        for j in 0..nv {
            let fj = T::from_count(j);
            for ((slice, region), (base, du, dv)) in [a, b].into_iter().zip(out.iter_mut()).zip(maps) {
                let r = base.0 + du.0 * fi + dv.0 * fj;
                let c = base.1 + du.1 * fi + dv.1 * fj;
                match slice.bilinear(r, c) {
                    Some(x) => {
                        region.values.push(x);
                        region.valid.push(true);
                    }
                    None => {
                        region.values.push(T::zero());
                        region.valid.push(false);
                    }
                }
            }
        }
    }
    let [ra, rb] = out;
    Ok((ra, rb))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    fn axial(z: f64, rows: usize, cols: usize) -> SlicePose<f64> {
        SlicePose::new(v(0.0, 0.0, z), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), 1.0, 1.0, rows, cols).unwrap()
    }

    fn close(a: Vec3<f64>, b: Vec3<f64>) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn pixel_to_patient_examples() {
        let p = axial(0.0, 8, 8);
        assert!(close(p.pixel_to_patient(0.0, 0.0), v(0.0, 0.0, 0.0)));
        assert!(close(p.pixel_to_patient(2.0, 3.0), v(2.0, 3.0, 0.0)));
        let q = SlicePose::new(v(1.0, 1.0, 1.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), 2.0, 1.0, 4, 4).unwrap();
        assert!(close(q.pixel_to_patient(1.0, 0.0), v(3.0, 1.0, 1.0)));
    }

    #[test]
    fn rejects_non_orthonormal_orientation() {
        let bad = SlicePose::new(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.1, 0.99498743710662, 0.0), 1.0, 1.0, 4, 4);
        assert!(matches!(bad, Err(Error::InvalidPose(_))));
        let zero_ps = SlicePose::new(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), 0.0, 1.0, 4, 4);
        assert!(zero_ps.is_err());
    }

    #[test]
    fn orthogonal_planes_intersect_along_y() {
        let a = axial(0.0, 4, 4);
        // plane x = 0: rows along y, columns along z
        let b = SlicePose::new(v(0.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(0.0, 0.0, 1.0), 1.0, 1.0, 4, 4).unwrap();
        let line = plane_intersection(&a, &b).unwrap();
        assert!(line.distance_to(v(0.0, 0.0, 0.0)) < 1e-12);
        assert!((line.direction.dot(v(0.0, 1.0, 0.0)).abs() - 1.0).abs() < 1e-12);
        assert!(plane_intersection(&a, &axial(10.0, 4, 4)).is_none());
    }

    #[test]
    fn tilted_plane_intersection_lies_on_both_planes() {
        let a = axial(0.0, 4, 4);
        // plane y = z - 2: contains x-axis direction and (0,1,1)/sqrt2, through (0,-2,0)
        let s = 0.5f64.sqrt();
        let b = SlicePose::new(v(0.0, -2.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, s, s), 1.0, 1.0, 4, 4).unwrap();
        let line = plane_intersection(&a, &b).unwrap();
        for t in [-7.0, 0.0, 3.5] {
            let p = line.at(t);
            assert!(p.z.abs() < 1e-9);
            assert!((p.y - (p.z - 2.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn clip_full_and_disjoint() {
        let img = SliceImage::filled(axial(0.0, 10, 10), 1.0);
        let line = Line3::new(v(4.0, -3.0, 0.0), v(0.0, 1.0, 0.0));
        let iv = clip_line_to_roi(&img, &Roi::full(10, 10), &line).unwrap().unwrap();
        assert!((iv.t_min - 3.0).abs() < 1e-12 && (iv.t_max - 12.0).abs() < 1e-12);
        let away = Line3::new(v(40.0, 0.0, 0.0), v(0.0, 1.0, 0.0));
        assert!(clip_line_to_roi(&img, &Roi::full(10, 10), &away).unwrap().is_none());
        let off_plane = Line3::new(v(4.0, 0.0, 0.5), v(0.0, 1.0, 0.0));
        assert!(matches!(clip_line_to_roi(&img, &Roi::full(10, 10), &off_plane), Err(Error::LineNotInPlane { .. })));
    }

    #[test]
    fn clip_diagonal_hits_roi_corners() {
        let img = SliceImage::filled(axial(0.0, 20, 20), 1.0);
        let roi = Roi::new(5, 14, 5, 14);
        let line = Line3::new(v(0.0, 0.0, 0.0), v(1.0, 1.0, 0.0));
        let iv = clip_line_to_roi(&img, &roi, &line).unwrap().unwrap();
        let (r0, c0, _) = img.pose.patient_to_pixel(line.at(iv.t_min));
        let (r1, c1, _) = img.pose.patient_to_pixel(line.at(iv.t_max));
        assert!((r0 - 5.0).abs() < 1e-9 && (c0 - 5.0).abs() < 1e-9);
        assert!((r1 - 14.0).abs() < 1e-9 && (c1 - 14.0).abs() < 1e-9);
    }

    #[test]
    fn constant_and_ramp_sampling() {
        let pose = SlicePose::new(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), 1.0, 2.0, 8, 8).unwrap();
        let mut img = SliceImage::filled(pose, 7.0);
        let line = Line3::new(v(3.0, 0.0, 0.0), v(0.0, 1.0, 0.0));
        let iv = clip_line_to_roi(&img, &Roi::full(8, 8), &line).unwrap().unwrap();
        let seg = sample_segment(&img, &line, iv, 0.75).unwrap();
        assert!(seg.values.iter().all(|&x| (x - 7.0).abs() < 1e-12));

        for r in 0..8 {
            for c in 0..8 {
                img.set(r, c, c as f64);
            }
        }
        let seg = sample_segment(&img, &line, iv, 0.75).unwrap();
        for (i, w) in seg.values.windows(2).enumerate() {
            assert!((w[1] - w[0] - 0.75 / 2.0).abs() < 1e-12, "step {i}");
        }
        assert!(seg.values[0].abs() < 1e-12);
    }

    #[test]
    fn sampling_needs_two_points() {
        let img = SliceImage::filled(axial(0.0, 4, 4), 1.0);
        let line = Line3::new(v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0));
        let iv = Interval { t_min: 0.0, t_max: 0.5 };
        assert!(matches!(sample_segment(&img, &line, iv, 1.0), Err(Error::TooFewSamples { found: 1 })));
    }

    #[test]
    fn identical_slices_give_roi_subimages() {
        let pose = axial(0.0, 12, 12);
        let pixels: Vec<f64> = (0..144).map(|i| (i * 7 % 13) as f64).collect();
        let img = SliceImage::new(pose, pixels).unwrap();
        let roi = Roi::new(2, 6, 3, 9);
        let (ra, rb) = contiguous_regions(&img, &roi, &img, &roi).unwrap();
        assert_eq!((ra.rows, ra.cols), (5, 7));
        assert_eq!(ra.values.len(), rb.values.len());
        for i in 0..5 {
            for j in 0..7 {
                assert!((ra.values[i * 7 + j] - img.get(2 + i, 3 + j)).abs() < 1e-9);
            }
        }
        assert_eq!(ra.values, rb.values);
    }

    #[test]
    fn shifted_roi_rectangle_is_union_bound() {
        let a = axial(0.0, 40, 40);
        let b = a.translated(v(5.0, 0.0, 10.0));
        let roi = Roi::new(10, 20, 10, 20);
        let rect = common_rectangle(&a, &roi, &b, &roi).unwrap();
        assert!((rect.u_range.0 - 10.0).abs() < 1e-12 && (rect.u_range.1 - 25.0).abs() < 1e-12);
        assert!((rect.v_range.0 - 10.0).abs() < 1e-12 && (rect.v_range.1 - 20.0).abs() < 1e-12);
        let (ra, rb) = contiguous_regions(
            &SliceImage::filled(a, 1.0),
            &roi,
            &SliceImage::filled(b, 1.0),
            &roi,
        )
        .unwrap();
        assert_eq!((ra.rows, ra.cols), (rb.rows, rb.cols));
        assert_eq!((ra.rows, ra.cols), (16, 11));
    }

    #[test]
    fn nested_roi_gives_larger_projection() {
        let a = axial(0.0, 40, 40);
        let b = axial(10.0, 40, 40);
        let rect = common_rectangle(&a, &Roi::new(5, 30, 5, 30), &b, &Roi::new(10, 20, 12, 18)).unwrap();
        assert_eq!(rect.u_range, (5.0, 30.0));
        assert_eq!(rect.v_range, (5.0, 30.0));
    }

    #[test]
    fn rejects_tilted_contiguous_pair() {
        let a = axial(0.0, 10, 10);
        let t = 2f64.to_radians();
        let b = SlicePose::new(v(0.0, 0.0, 10.0), v(1.0, 0.0, 0.0), v(0.0, t.cos(), t.sin()), 1.0, 1.0, 10, 10).unwrap();
        let roi = Roi::full(10, 10);
        assert!(matches!(common_rectangle(&a, &roi, &b, &roi), Err(Error::NotParallel { .. })));
    }
}
