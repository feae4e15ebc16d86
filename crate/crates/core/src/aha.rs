//! AHA 16-segment partition of the SA myocardium and infarct percentages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::volume::{Labeling, MyocardiumVolume};

pub const SEGMENT_COUNT: usize = 16;
/// Default angular reference: image "up" (the -row direction).
pub const DEFAULT_REFERENCE_DEG: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Basal,
    Mid,
    Apical,
}

impl Level {
    pub fn sectors(self) -> usize {
        match self {
            Level::Basal | Level::Mid => 6,
            Level::Apical => 4,
        }
    }

    pub fn first_segment(self) -> u8 {
        match self {
            Level::Basal => 1,
            Level::Mid => 7,
            Level::Apical => 13,
        }
    }
}

/// Splits `n` slices (base first) into basal/mid/apical groups of
/// `ceil(n/3)`, `round(n/3)` and the remainder.
pub fn assign_levels(n: usize) -> Result<Vec<Level>> {
    if n < 3 {
        return Err(Error::TooFewSlices { found: n });
    }
    let basal = n.div_ceil(3);
    let mid = (n as f64 / 3.0).round() as usize;
    Ok((0..n)
        .map(|k| {
            if k < basal {
                Level::Basal
            } else if k < basal + mid {
                Level::Mid
            } else {
                Level::Apical
            }
        })
        .collect())
}

/// On-screen angle in degrees of the offset `(dr, dc)`, counterclockwise from
/// the +column direction with rows pointing down.
pub fn image_angle_deg(dr: f64, dc: f64) -> f64 {
    (-dr).atan2(dc).to_degrees()
}

/// Segment id of a voxel at angle `angle_deg` on a slice of `level`; sectors
/// start at the reference and are numbered counterclockwise.
pub fn segment_for_angle(level: Level, angle_deg: f64, reference_deg: f64) -> u8 {
    let rel = (angle_deg - reference_deg).rem_euclid(360.0);
    let width = 360.0 / level.sectors() as f64;
    let sector = ((rel / width).floor() as usize).min(level.sectors() - 1);
    level.first_segment() + sector as u8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentModel {
    pub levels: Vec<Level>,
    pub reference_deg: f64,
    /// Per-slice myocardial centroid as `(row, col)`.
    pub centroids: Vec<(f64, f64)>,
    /// Per-voxel segment id in 1..=16, 0 outside the mask.
    pub segment: Vec<u8>,
}

pub fn assign_segments<T: Real>(volume: &MyocardiumVolume<T>, reference_deg: f64) -> Result<SegmentModel> {
    let [nx, ny, nz] = volume.dims;
    let levels = assign_levels(nz)?;
    let mut segment = vec![0u8; volume.len()];
    let mut centroids = Vec::with_capacity(nz);
    for (z, &level) in levels.iter().enumerate() {
        let base = z * nx * ny;
        let (mut sr, mut sc, mut n) = (0.0, 0.0, 0usize);
        for i in base..base + nx * ny {
            if volume.mask[i] {
                let [x, y, _] = volume.coords(i);
                sr += y as f64;
                sc += x as f64;
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::EmptySliceMask { slice: z });
        }
        let (cr, cc) = (sr / n as f64, sc / n as f64);
        centroids.push((cr, cc));
        for i in base..base + nx * ny {
            if volume.mask[i] {
                let [x, y, _] = volume.coords(i);
                segment[i] = segment_for_angle(level, image_angle_deg(y as f64 - cr, x as f64 - cc), reference_deg);
            }
        }
    }
    Ok(SegmentModel { levels, reference_deg, centroids, segment })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentStat {
    pub id: u8,
    pub myocardium_voxels: usize,
    pub infarct_voxels: usize,
    /// 0 when the segment holds no myocardium.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantReport {
    pub volumetric_percent: f64,
    pub myocardium_voxels: usize,
    pub infarct_voxels: usize,
    pub infarct_volume_mm3: f64,
    pub myocardium_volume_mm3: f64,
    pub segments: Vec<SegmentStat>,
}

fn percent(infarct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * infarct as f64 / total as f64
    }
}

pub fn quantify<T: Real>(labeling: &Labeling, volume: &MyocardiumVolume<T>, segments: &SegmentModel) -> Result<QuantReport> {
    if labeling.labels.len() != volume.len() || segments.segment.len() != volume.len() {
        return Err(Error::ShapeMismatch { left: labeling.labels.len().max(segments.segment.len()), right: volume.len() });
    }
    let mut myo = [0usize; SEGMENT_COUNT];
    let mut inf = [0usize; SEGMENT_COUNT];
    for i in 0..volume.len() {
        if !volume.mask[i] {
            continue;
        }
        let s = segments.segment[i] as usize - 1;
        myo[s] += 1;
        if labeling.is_infarct(i) {
            inf[s] += 1;
        }
    }
    let myocardium_voxels: usize = myo.iter().sum();
    let infarct_voxels: usize = inf.iter().sum();
    let voxel = volume.voxel_volume().as_f64();
    Ok(QuantReport {
        volumetric_percent: percent(infarct_voxels, myocardium_voxels),
        myocardium_voxels,
        infarct_voxels,
        infarct_volume_mm3: infarct_voxels as f64 * voxel,
        myocardium_volume_mm3: myocardium_voxels as f64 * voxel,
        segments: (0..SEGMENT_COUNT)
            .map(|s| SegmentStat { id: s as u8 + 1, myocardium_voxels: myo[s], infarct_voxels: inf[s], percent: percent(inf[s], myo[s]) })
            .collect(),
    })
}
