//! In-memory LGE dataset: SA stack, long-axis slices and acquisition metadata.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Roi, SliceImage};
use crate::realign::AlignmentProblem;
use crate::scalar::Real;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SliceRole {
    #[serde(rename = "SA")]
    Sa,
    #[serde(rename = "LA4C")]
    La4c,
    #[serde(rename = "LA2C")]
    La2c,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LgeDataset<T> {
    /// Ordered base to apex.
    pub sa: Vec<SliceImage<T>>,
    pub la: Vec<(SliceRole, SliceImage<T>)>,
    pub sa_rois: Vec<Roi>,
    pub slice_thickness_mm: T,
    pub gap_mm: T,
}

impl<T: Real> LgeDataset<T> {
    /// Distance between adjacent SA slice centres.
    pub fn slice_spacing(&self) -> T {
        self.slice_thickness_mm + self.gap_mm
    }

    pub fn slice_count(&self) -> usize {
        self.sa.len() + self.la.len()
    }

    /// IPPs of all slices, SA first then LA.
    pub fn ipps(&self) -> Vec<Vec3<T>> {
        self.sa.iter().map(|s| s.pose.ipp).chain(self.la.iter().map(|(_, s)| s.pose.ipp)).collect()
    }

    pub fn set_ipps(&mut self, ipps: &[Vec3<T>]) -> Result<()> {
        if ipps.len() != self.slice_count() {
            return Err(Error::WrongPositionCount { expected: self.slice_count(), found: ipps.len() });
        }
        let m = self.sa.len();
        for (s, &p) in self.sa.iter_mut().zip(ipps) {
            s.pose.ipp = p;
        }
        for ((_, s), &p) in self.la.iter_mut().zip(&ipps[m..]) {
            s.pose.ipp = p;
        }
        Ok(())
    }

    pub fn alignment_problem(&self, gamma: T) -> Result<AlignmentProblem<T>> {
        AlignmentProblem::new(
            self.sa.clone(),
            self.la.iter().map(|(_, s)| s.clone()).collect(),
            self.sa_rois.clone(),
            gamma,
        )
    }
}
