//! Masked voxel grid of the myocardium and its binary labeling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Voxel grid indexed `(x, y, z)` = (column, row, slice), stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct MyocardiumVolume<T> {
    pub dims: [usize; 3],
    /// Physical voxel size in mm: column spacing, row spacing, slice-centre spacing.
    pub spacing: [T; 3],
    pub intensity: Vec<T>,
    pub mask: Vec<bool>,
}

/// Offsets of the 6-connected neighbourhood and the axis each one moves along.
pub const NEIGHBOURS_6: [([isize; 3], usize); 6] = [
    ([-1, 0, 0], 0),
    ([1, 0, 0], 0),
    ([0, -1, 0], 1),
    ([0, 1, 0], 1),
    ([0, 0, -1], 2),
    ([0, 0, 1], 2),
];

impl<T: Real> MyocardiumVolume<T> {
    pub fn new(dims: [usize; 3], spacing: [T; 3], intensity: Vec<T>, mask: Vec<bool>) -> Result<Self> {
        let n = dims.iter().product::<usize>();
        if intensity.len() != n || mask.len() != n {
            return Err(Error::ShapeMismatch { left: intensity.len().max(mask.len()), right: n });
        }
        if spacing.iter().any(|&s| !(s > T::zero())) {
            return Err(Error::InvalidConfig("voxel spacing must be positive".into()));
        }
        if intensity.iter().zip(&mask).any(|(v, &m)| m && !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite intensity inside the mask".into()));
        }
        Ok(Self { dims, spacing, intensity, mask })
    }

    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let x = i % self.dims[0];
        let y = (i / self.dims[0]) % self.dims[1];
        [x, y, i / (self.dims[0] * self.dims[1])]
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// In-grid 6-neighbours of voxel `i` with the axis of each step.
    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        neighbours_in(self.dims, i)
    }

    /// Physical volume of one voxel in mm^3.
    pub fn voxel_volume(&self) -> T {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }
}

pub fn neighbours_in(dims: [usize; 3], i: usize) -> impl Iterator<Item = (usize, usize)> {
    let x = i % dims[0];
    let y = (i / dims[0]) % dims[1];
    let z = i / (dims[0] * dims[1]);
    NEIGHBOURS_6.iter().filter_map(move |&(d, axis)| {
        let nx = x as isize + d[0];
        let ny = y as isize + d[1];
        let nz = z as isize + d[2];
        if nx < 0 || ny < 0 || nz < 0 || nx as usize >= dims[0] || ny as usize >= dims[1] || nz as usize >= dims[2] {
            return None;
        }
        Some((((nz as usize) * dims[1] + ny as usize) * dims[0] + nx as usize, axis))
    })
}

/// Binary per-voxel labels: 1 = infarct, 0 = normal myocardium (and outside the mask).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeling {
    pub dims: [usize; 3],
    pub labels: Vec<u8>,
}

impl Labeling {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self { dims, labels: vec![0; dims.iter().product()] }
    }

    pub fn is_infarct(&self, i: usize) -> bool {
        self.labels[i] == 1
    }

    pub fn infarct_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn infarct_set(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l == 1).collect()
    }

    pub fn from_set(dims: [usize; 3], set: &[bool]) -> Self {
        Self { dims, labels: set.iter().map(|&b| b as u8).collect() }
    }
}

/// Myocardium volume of an SA stack together with the cavity mask (inside
/// the endocardium), both x-fastest over `(col, row, slice)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackVolume<T> {
    pub volume: MyocardiumVolume<T>,
    pub cavity: Vec<bool>,
}

impl<T: Real> StackVolume<T> {
    /// Stacks the slices with `dz` = slice-centre spacing in mm. Every slice
    /// must share the first slice's size and pixel spacing.
    pub fn from_stack(
        stack: &[crate::geometry::SliceImage<T>],
        contours: &crate::contour::ContourSet<T>,
        dz: T,
    ) -> Result<Self> {
        let first = stack.first().ok_or(Error::EmptyInput)?;
        let (rows, cols) = (first.rows(), first.cols());
        let spacing = [first.pose.ps_col, first.pose.ps_row, dz];
        let mut intensity = Vec::with_capacity(rows * cols * stack.len());
        let mut mask = Vec::with_capacity(intensity.capacity());
        let mut cavity = Vec::with_capacity(intensity.capacity());
        for (k, slice) in stack.iter().enumerate() {
            if slice.rows() != rows || slice.cols() != cols {
                return Err(Error::ShapeMismatch { left: slice.rows() * slice.cols(), right: rows * cols });
            }
            let regions = crate::contour::SliceRegions::rasterize(contours.get(k)?, rows, cols);
            let myo = regions.myocardium();
            if !myo.iter().any(|&m| m) {
                return Err(Error::EmptySliceMask { slice: k });
            }
            intensity.extend_from_slice(&slice.pixels);
            mask.extend(myo);
            cavity.extend(regions.endo);
        }
        let volume = MyocardiumVolume::new([cols, rows, stack.len()], spacing, intensity, mask)?;
        Ok(Self { volume, cavity })
    }
}
