//! Synthetic LGE datasets with known geometry, gains, misalignment and infarcts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::contour::{ContourSet, Polygon, SliceContours};
use crate::dataset::{LgeDataset, SliceRole};
use crate::error::{Error, Result};
use crate::geometry::{Roi, SliceImage, SlicePose};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Vertices per generated contour.
pub const CONTOUR_VERTICES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wedge {
    /// First and last SA slice index (inclusive).
    pub slices: [usize; 2],
    /// Start angle in image convention (counterclockwise from +column, up = 90).
    pub angle_start_deg: f64,
    pub angle_width_deg: f64,
    /// Extent from the endocardium as a fraction of wall thickness; 1 = transmural.
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvoPocket {
    pub wedge: usize,
    pub slices: [usize; 2],
    /// Angular width, centred on the wedge.
    pub angle_width_deg: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intensities {
    pub background: f64,
    pub myocardium: f64,
    pub blood_pool: f64,
    pub infarct: f64,
    pub right_ventricle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    pub n_sa: usize,
    pub la_views: Vec<SliceRole>,
    pub rows: usize,
    pub cols: usize,
    pub pixel_spacing_mm: f64,
    pub slice_thickness_mm: f64,
    pub gap_mm: f64,
    /// Endocardial radius at the basal and apical slice.
    pub endo_radius_mm: [f64; 2],
    pub epi_radius_mm: [f64; 2],
    pub wedges: Vec<Wedge>,
    pub mvo: Vec<MvoPocket>,
    pub intensities: Intensities,
    /// Per-SA-slice multiplicative gains; empty means all 1.
    pub gains: Vec<f64>,
    /// Per-slice IPP displacement in mm, SA then LA; empty means none.
    pub translations: Vec<[f64; 3]>,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Tilt of the long axis away from the patient z axis.
    pub axis_tilt_deg: f64,
    /// In-plane angle (image convention) of the 4C and 2C planes.
    pub la_angles_deg: [f64; 2],
    /// Offset of the LV centre from the SA image centre, `(row, col)` pixels.
    pub lv_offset_px: [f64; 2],
    /// Smooth random blobs added to the background for texture.
    pub background_blobs: usize,
    /// Margin around the epicardium included in each SA region of interest.
    pub roi_margin_mm: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            n_sa: 6,
            la_views: vec![SliceRole::La4c, SliceRole::La2c],
            rows: 128,
            cols: 128,
            pixel_spacing_mm: 1.5,
            slice_thickness_mm: 7.0,
            gap_mm: 3.0,
            endo_radius_mm: [25.0, 12.0],
            epi_radius_mm: [35.0, 22.0],
            wedges: vec![Wedge { slices: [0, 3], angle_start_deg: 90.0, angle_width_deg: 60.0, depth: 1.0 }],
            mvo: vec![MvoPocket { wedge: 0, slices: [1, 2], angle_width_deg: 20.0, depth: 0.5 }],
            intensities: Intensities {
                background: 60.0,
                myocardium: 40.0,
                blood_pool: 200.0,
                infarct: 190.0,
                right_ventricle: 180.0,
            },
            gains: vec![],
            translations: vec![],
            noise_sigma: 20.0,
            seed: 1,
            axis_tilt_deg: 15.0,
            la_angles_deg: [25.0, 115.0],
            lv_offset_px: [2.3, -3.1],
            background_blobs: 24,
            roi_margin_mm: 20.0,
        }
    }
}

impl PhantomConfig {
    pub fn without_infarct(mut self) -> Self {
        self.wedges.clear();
        self.mvo.clear();
        self
    }

    pub fn n_la(&self) -> usize {
        self.la_views.len()
    }

    pub fn slice_spacing(&self) -> f64 {
        self.slice_thickness_mm + self.gap_mm
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidPhantom(m.to_string()));
        if self.n_sa == 0 || self.rows < 8 || self.cols < 8 {
            return bad("need at least one SA slice and an 8x8 grid");
        }
        if !(self.pixel_spacing_mm > 0.0) || !(self.slice_thickness_mm > 0.0) || !(self.gap_mm >= 0.0) {
            return bad("spacings must be positive");
        }
        if self.la_views.iter().any(|&r| r == SliceRole::Sa) {
            return bad("long-axis views must be LA4C or LA2C");
        }
        for k in 0..2 {
            if !(self.endo_radius_mm[k] > 0.0 && self.endo_radius_mm[k] < self.epi_radius_mm[k]) {
                return bad("endocardial radius must be positive and below the epicardial radius");
            }
        }
        let i = &self.intensities;
        if !(i.myocardium < i.infarct && i.infarct <= i.blood_pool) || i.myocardium < 0.0 || i.background < 0.0 {
            return bad("intensities must satisfy myocardium < infarct <= blood pool");
        }
        if !self.gains.is_empty() && (self.gains.len() != self.n_sa || self.gains.iter().any(|&g| !(g > 0.0))) {
            return bad("gains must be positive, one per SA slice");
        }
        if !self.translations.is_empty() && self.translations.len() != self.n_sa + self.n_la() {
            return bad("translations must list every slice");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise sigma must be non-negative");
        }
        for w in &self.wedges {
            if w.slices[0] > w.slices[1] || w.slices[1] >= self.n_sa || !(w.depth > 0.0 && w.depth <= 1.0) || !(w.angle_width_deg > 0.0) {
                return bad("wedge out of range");
            }
        }
        for p in &self.mvo {
            let Some(w) = self.wedges.get(p.wedge) else {
                return bad("MVO pocket refers to a missing wedge");
            };
            if p.slices[0] > p.slices[1] || p.slices[0] < w.slices[0] || p.slices[1] > w.slices[1] {
                return bad("MVO pocket slices must lie within its wedge");
            }
            if !(p.depth > 0.0 && p.depth <= w.depth) || !(p.angle_width_deg > 0.0 && p.angle_width_deg <= w.angle_width_deg) {
                return bad("MVO pocket must fit inside its wedge");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomTruth<T> {
    /// True IPPs, SA then LA.
    pub ipps: Vec<Vec3<T>>,
    pub contours: ContourSet<T>,
    /// Grid `(cols, rows, n_sa)`, x-fastest.
    pub dims: [usize; 3],
    pub myocardium: Vec<bool>,
    pub infarct: Vec<bool>,
    pub gains: Vec<f64>,
    pub translations: Vec<[f64; 3]>,
}

/// Rician magnitude of `signal` with Gaussian noise of `sigma` on both channels.
pub fn rician_sample<R: Rng>(signal: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return signal.abs();
    }
    let n = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let g1 = n.sample(rng);
    let g2 = n.sample(rng);
    ((signal + g1).powi(2) + g2 * g2).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tissue {
    Background,
    Cavity,
    Papillary,
    Myocardium,
    Infarct,
    Mvo,
    RightVentricle,
}

struct Blob {
    center: [f64; 3],
    sigma: f64,
    amplitude: f64,
}

/// Heart-frame model shared by all slices.
struct Model<'a> {
    cfg: &'a PhantomConfig,
    origin: [f64; 3],
    axis: [f64; 3],
    e_r: [f64; 3],
    e_c: [f64; 3],
    apex_h: f64,
    blobs: Vec<Blob>,
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn axpy(p: [f64; 3], s: f64, d: [f64; 3]) -> [f64; 3] {
    [p[0] + s * d[0], p[1] + s * d[1], p[2] + s * d[2]]
}

fn within_arc(angle: f64, start: f64, width: f64) -> bool {
    (angle - start).rem_euclid(360.0) < width
}

impl<'a> Model<'a> {
    fn new(cfg: &'a PhantomConfig, rng: &mut ChaCha8Rng) -> Self {
        let t = cfg.axis_tilt_deg.to_radians();
        let axis = [0.0, t.sin(), t.cos()];
        let e_c = [1.0, 0.0, 0.0];
        let e_r = [0.0, t.cos(), -t.sin()];
        let origin = [12.0, -25.0, 40.0];
        let apex_h = (cfg.n_sa as f64 - 1.0) * cfg.slice_spacing() + 0.5 * cfg.slice_spacing();
        let reach = cfg.epi_radius_mm[0] + 60.0;
        let blobs = (0..cfg.background_blobs)
            .map(|_| Blob {
                center: [
                    rng.random_range(-reach..reach),
                    rng.random_range(-reach..reach),
                    rng.random_range(-30.0..apex_h + 30.0),
                ],
                sigma: rng.random_range(6.0..18.0),
                amplitude: rng.random_range(-0.6..0.9) * cfg.intensities.background,
            })
            .collect();
        Self { cfg, origin, axis, e_r, e_c, apex_h, blobs }
    }

    fn slice_h(&self, k: usize) -> f64 {
        k as f64 * self.cfg.slice_spacing()
    }

    /// Radii at depth `h` along the axis: tapered wall with a spherical apical cap.
    fn radii(&self, h: f64) -> Option<(f64, f64)> {
        let base_top = -0.5 * self.cfg.slice_spacing();
        if h < base_top {
            return None;
        }
        let last = self.slice_h(self.cfg.n_sa - 1).max(1e-9);
        let lerp = |v: [f64; 2], h: f64| v[0] + (v[1] - v[0]) * (h / last);
        let at = h.min(self.apex_h);
        let (endo, epi) = (lerp(self.cfg.endo_radius_mm, at), lerp(self.cfg.epi_radius_mm, at));
        if h <= self.apex_h {
            return Some((endo, epi));
        }
        let d = h - self.apex_h;
        let epi_cap = (epi * epi - d * d).max(0.0).sqrt();
        let endo_cap = (endo * endo - d * d).max(0.0).sqrt();
        (epi_cap > 0.0).then_some((endo_cap, epi_cap))
    }

    /// Heart-frame coordinates `(h, x_r, x_c)` of a patient point.
    fn frame(&self, p: [f64; 3]) -> (f64, f64, f64) {
        let d = [p[0] - self.origin[0], p[1] - self.origin[1], p[2] - self.origin[2]];
        (dot(d, self.axis), dot(d, self.e_r), dot(d, self.e_c))
    }

    fn slab_of(&self, h: f64) -> Option<usize> {
        let k = (h / self.cfg.slice_spacing()).round();
        (k >= 0.0 && (k as usize) < self.cfg.n_sa).then_some(k as usize)
    }

    /// Tissue class of an LV point given its slab, angle and wall depth.
    fn wall_tissue(&self, slab: Option<usize>, angle: f64, depth: f64) -> Tissue {
        let Some(k) = slab else { return Tissue::Myocardium };
        for p in &self.cfg.mvo {
            let w = &self.cfg.wedges[p.wedge];
            let start = w.angle_start_deg + 0.5 * (w.angle_width_deg - p.angle_width_deg);
            if (p.slices[0]..=p.slices[1]).contains(&k) && within_arc(angle, start, p.angle_width_deg) && depth < p.depth {
                return Tissue::Mvo;
            }
        }
        for w in &self.cfg.wedges {
            if (w.slices[0]..=w.slices[1]).contains(&k) && within_arc(angle, w.angle_start_deg, w.angle_width_deg) && depth < w.depth {
                return Tissue::Infarct;
            }
        }
        Tissue::Myocardium
    }

    fn papillary(&self, h: f64, x_r: f64, x_c: f64, endo: f64) -> bool {
        if h < 0.5 * self.cfg.slice_spacing() || h > self.apex_h - self.cfg.slice_spacing() {
            return false;
        }
        let radius = 3.5;
        [235.0f64, 315.0].iter().any(|&deg| {
            let rho = (endo - radius - 1.5).max(0.0);
            let (cr, cc) = (-rho * deg.to_radians().sin(), rho * deg.to_radians().cos());
            (x_r - cr).powi(2) + (x_c - cc).powi(2) < radius * radius
        })
    }

    fn right_ventricle(&self, h: f64, x_r: f64, x_c: f64) -> bool {
        let Some((_, epi)) = self.radii(h) else { return false };
        if h > self.apex_h - 1.5 * self.cfg.slice_spacing() {
            return false;
        }
        // ellipse centred left of the LV on screen
        let (semi_radial, semi_tangent) = (12.0, 28.0);
        let cc = -(epi + 4.0 + semi_radial);
        ((x_c - cc) / semi_radial).powi(2) + (x_r / semi_tangent).powi(2) < 1.0
    }

    /// Tissue from the continuous model.
    fn tissue(&self, p: [f64; 3]) -> (Tissue, f64, f64) {
        let (h, x_r, x_c) = self.frame(p);
        let rho = (x_r * x_r + x_c * x_c).sqrt();
        let angle = (-x_r).atan2(x_c).to_degrees();
        match self.radii(h) {
            Some((endo, epi)) if rho < epi => {
                if rho < endo {
                    let t = if self.papillary(h, x_r, x_c, endo) { Tissue::Papillary } else { Tissue::Cavity };
                    (t, h, angle)
                } else {
                    let depth = (rho - endo) / (epi - endo);
                    (self.wall_tissue(self.slab_of(h), angle, depth), h, angle)
                }
            }
            _ if self.right_ventricle(h, x_r, x_c) => (Tissue::RightVentricle, h, angle),
            _ => (Tissue::Background, h, angle),
        }
    }

    fn signal(&self, tissue: Tissue, p: [f64; 3]) -> f64 {
        let i = &self.cfg.intensities;
        match tissue {
            Tissue::Cavity => i.blood_pool,
            Tissue::Papillary | Tissue::Myocardium | Tissue::Mvo => i.myocardium,
            Tissue::Infarct => i.infarct,
            Tissue::RightVentricle => i.right_ventricle,
            Tissue::Background => {
                let (h, x_r, x_c) = self.frame(p);
                let q = [x_c, x_r, h];
                let texture: f64 = self
                    .blobs
                    .iter()
                    .map(|b| {
                        let d2 = (q[0] - b.center[0]).powi(2) + (q[1] - b.center[1]).powi(2) + (q[2] - b.center[2]).powi(2);
                        b.amplitude * (-d2 / (2.0 * b.sigma * b.sigma)).exp()
                    })
                    .sum();
                (i.background + texture).max(0.0)
            }
        }
    }
}

/// Generates the dataset (recorded, possibly misaligned IPPs) and its truth.
pub fn generate<T: Real>(cfg: &PhantomConfig) -> Result<(LgeDataset<T>, PhantomTruth<T>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = Model::new(cfg, &mut rng);
    let ps = cfg.pixel_spacing_mm;
    let (rows, cols) = (cfg.rows, cfg.cols);
    let center_r = (rows as f64 - 1.0) / 2.0 + cfg.lv_offset_px[0];
    let center_c = (cols as f64 - 1.0) / 2.0 + cfg.lv_offset_px[1];
    let v3 = |a: [f64; 3]| Vec3::new(T::lit(a[0]), T::lit(a[1]), T::lit(a[2]));
    let gains = if cfg.gains.is_empty() { vec![1.0; cfg.n_sa] } else { cfg.gains.clone() };
    let translations = if cfg.translations.is_empty() { vec![[0.0; 3]; cfg.n_sa + cfg.n_la()] } else { cfg.translations.clone() };

    let n_px = rows * cols;
    let mut myocardium = Vec::with_capacity(n_px * cfg.n_sa);
    let mut infarct = Vec::with_capacity(n_px * cfg.n_sa);
    let mut contours = Vec::with_capacity(cfg.n_sa);
    let mut sa = Vec::with_capacity(cfg.n_sa);
    let mut rois = Vec::with_capacity(cfg.n_sa);
    let mut true_ipps = Vec::with_capacity(cfg.n_sa + cfg.n_la());

    for k in 0..cfg.n_sa {
        let h = model.slice_h(k);
        let (endo_mm, epi_mm) = model.radii(h).expect("SA slices lie inside the LV");
        let centre = axpy(model.origin, h, model.axis);
        let ipp = axpy(axpy(centre, -center_r * ps, model.e_r), -center_c * ps, model.e_c);
        let pose = SlicePose::new(v3(ipp), v3(model.e_r), v3(model.e_c), T::lit(ps), T::lit(ps), rows, cols)?;
        let c = SliceContours {
            endo: Polygon::circle((center_r, center_c), endo_mm / ps, CONTOUR_VERTICES),
            epi: Polygon::circle((center_r, center_c), epi_mm / ps, CONTOUR_VERTICES),
        };
        let endo_mask = c.endo.rasterize(rows, cols);
        let epi_mask = c.epi.rasterize(rows, cols);
        let mut signal = vec![0.0; n_px];
        for r in 0..rows {
            for col in 0..cols {
                let i = r * cols + col;
                let p = axpy(axpy(ipp, r as f64 * ps, model.e_r), col as f64 * ps, model.e_c);
                let (x_r, x_c) = ((r as f64 - center_r) * ps, (col as f64 - center_c) * ps);
                let angle = (-x_r).atan2(x_c).to_degrees();
                let tissue = if endo_mask[i] {
                    if model.papillary(h, x_r, x_c, endo_mm) { Tissue::Papillary } else { Tissue::Cavity }
                } else if epi_mask[i] {
                    let rho = (x_r * x_r + x_c * x_c).sqrt();
                    let depth = ((rho - endo_mm) / (epi_mm - endo_mm)).clamp(0.0, 1.0);
                    model.wall_tissue(Some(k), angle, depth)
                } else if model.right_ventricle(h, x_r, x_c) {
                    Tissue::RightVentricle
                } else {
                    Tissue::Background
                };
                signal[i] = model.signal(tissue, p);
                let myo = epi_mask[i] && !endo_mask[i];
                myocardium.push(myo);
                infarct.push(myo && matches!(tissue, Tissue::Infarct | Tissue::Mvo));
            }
        }
        let half = (epi_mm + cfg.roi_margin_mm) / ps;
        let lo = |c: f64| (c - half).floor().max(0.0) as usize;
        let roi = Roi::new(lo(center_r), ((center_r + half).ceil() as usize).min(rows - 1), lo(center_c), ((center_c + half).ceil() as usize).min(cols - 1));
        let pixels = signal.iter().map(|&s| s * gains[k]).collect::<Vec<_>>();
        sa.push((pose, pixels));
        rois.push(roi);
        contours.push(Some(c));
        true_ipps.push(ipp);
    }

    let mut la = Vec::with_capacity(cfg.n_la());
    let mid_h = 0.5 * (model.apex_h + model.cfg.epi_radius_mm[1] - 0.5 * cfg.slice_spacing());
    for &role in &cfg.la_views {
        let theta = cfg.la_angles_deg[(role == SliceRole::La2c) as usize].to_radians();
        let across = axpy([0.0; 3], theta.cos(), model.e_c);
        let across = axpy(across, -theta.sin(), model.e_r);
        let centre = axpy(model.origin, mid_h, model.axis);
        let la_r = (rows as f64 - 1.0) / 2.0;
        let la_c = (cols as f64 - 1.0) / 2.0;
        let ipp = axpy(axpy(centre, -la_r * ps, model.axis), -la_c * ps, across);
        let pose = SlicePose::new(v3(ipp), v3(model.axis), v3(across), T::lit(ps), T::lit(ps), rows, cols)?;
        let mut pixels = vec![0.0; n_px];
        for r in 0..rows {
            for c in 0..cols {
                let p = axpy(axpy(ipp, r as f64 * ps, model.axis), c as f64 * ps, across);
                let (tissue, _, _) = model.tissue(p);
                pixels[r * cols + c] = model.signal(tissue, p);
            }
        }
        la.push((role, pose, pixels));
        true_ipps.push(ipp);
    }

    // noise after all signals, in slice order, so the texture draws stay fixed
    let mut noisy = |pixels: &[f64]| -> Vec<T> {
        pixels
            .iter()
            .map(|&s| T::lit(rician_sample(s, cfg.noise_sigma, &mut rng).round().clamp(0.0, u16::MAX as f64)))
            .collect()
    };
    let mut sa_images = Vec::with_capacity(cfg.n_sa);
    for (k, (pose, pixels)) in sa.into_iter().enumerate() {
        let recorded = pose.translated(v3(translations[k]));
        sa_images.push(SliceImage::new(recorded, noisy(&pixels))?);
    }
    let mut la_images = Vec::with_capacity(la.len());
    for (j, (role, pose, pixels)) in la.into_iter().enumerate() {
        let recorded = pose.translated(v3(translations[cfg.n_sa + j]));
        la_images.push((role, SliceImage::new(recorded, noisy(&pixels))?));
    }

    let dataset = LgeDataset {
        sa: sa_images,
        la: la_images,
        sa_rois: rois,
        slice_thickness_mm: T::lit(cfg.slice_thickness_mm),
        gap_mm: T::lit(cfg.gap_mm),
    };
    let contours = ContourSet {
        slices: contours
            .into_iter()
            .map(|c| {
                c.map(|c: SliceContours<f64>| SliceContours {
                    endo: Polygon::new(c.endo.vertices.iter().map(|&(r, c)| (T::lit(r), T::lit(c))).collect()),
                    epi: Polygon::new(c.epi.vertices.iter().map(|&(r, c)| (T::lit(r), T::lit(c))).collect()),
                })
            })
            .collect(),
    };
    let truth = PhantomTruth {
        ipps: true_ipps.into_iter().map(v3).collect(),
        contours,
        dims: [cols, rows, cfg.n_sa],
        myocardium,
        infarct,
        gains,
        translations,
    };
    Ok((dataset, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::SliceRegions;

    #[test]
    fn deterministic_for_seed() {
        let cfg = PhantomConfig { rows: 48, cols: 48, pixel_spacing_mm: 4.0, ..Default::default() };
        let (a, _) = generate::<f64>(&cfg).unwrap();
        let (b, _) = generate::<f64>(&cfg).unwrap();
        assert_eq!(a, b);
        let (c, _) = generate::<f64>(&PhantomConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a.sa[0].pixels, c.sa[0].pixels);
    }

    #[test]
    fn contours_reproduce_mask() {
        let cfg = PhantomConfig { noise_sigma: 0.0, ..Default::default() };
        let (d, t) = generate::<f64>(&cfg).unwrap();
        let n = cfg.rows * cfg.cols;
        for k in 0..cfg.n_sa {
            let regions = SliceRegions::rasterize(t.contours.get(k).unwrap(), cfg.rows, cfg.cols);
            assert_eq!(regions.myocardium(), t.myocardium[k * n..(k + 1) * n].to_vec());
            // noiseless myocardium is painted exactly at its level outside the wedge
            for i in 0..n {
                if t.myocardium[k * n + i] && !t.infarct[k * n + i] {
                    assert_eq!(d.sa[k].pixels[i], cfg.intensities.myocardium);
                }
            }
        }
        assert!(t.infarct.iter().any(|&b| b));
    }

    #[test]
    fn rayleigh_noise_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sigma = 20.0;
        let n = 100_000;
        let mean = (0..n).map(|_| rician_sample(0.0, sigma, &mut rng)).sum::<f64>() / n as f64;
        let expect = sigma * (std::f64::consts::PI / 2.0).sqrt();
        assert!((mean - expect).abs() / expect < 0.03, "{mean} vs {expect}");
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = PhantomConfig::default();
        c.endo_radius_mm = [40.0, 12.0];
        assert!(generate::<f64>(&c).is_err());
        let mut c = PhantomConfig::default();
        c.intensities.infarct = 300.0;
        assert!(generate::<f64>(&c).is_err());
        let mut c = PhantomConfig::default();
        c.mvo[0].slices = [0, 5];
        assert!(generate::<f64>(&c).is_err());
    }
}
