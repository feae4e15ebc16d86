//! Rule-based cleanup of a graph-cut labeling.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rician::RicianMixtureParams;
use crate::scalar::Real;
use crate::volume::{neighbours_in, Labeling, MyocardiumVolume};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostprocessConfig {
    /// Minimum fraction of boundary-adjacent voxels for a component to count as a rim.
    pub boundary_fraction: f64,
    /// Maximum in-plane thickness (voxels) of a removable rim.
    pub max_rim_thickness: usize,
    pub min_volume_mm3: f64,
    /// Fraction of non-endocardial neighbours that must be infarct for MVO inclusion.
    pub mvo_enclosure: f64,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self { boundary_fraction: 0.95, max_rim_thickness: 1, min_volume_mm3: 100.0, mvo_enclosure: 0.8 }
    }
}

impl PostprocessConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.boundary_fraction) || !unit(self.mvo_enclosure) || !(self.min_volume_mm3 >= 0.0) {
            return Err(Error::InvalidConfig("post-processing thresholds out of range".into()));
        }
        Ok(())
    }
}

/// Which side of the myocardium a voxel borders, from its in-plane neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct MyocardialBoundary {
    pub endo: Vec<bool>,
    pub epi: Vec<bool>,
}

impl MyocardialBoundary {
    /// A masked voxel is endocardial when an in-plane neighbour lies in the
    /// cavity, epicardial when one lies outside both the mask and the cavity
    /// (or off the grid).
    pub fn new<T: Real>(volume: &MyocardiumVolume<T>, cavity: &[bool]) -> Self {
        let n = volume.len();
        let mut endo = vec![false; n];
        let mut epi = vec![false; n];
        let [nx, ny, _] = volume.dims;
        for i in 0..n {
            if !volume.mask[i] {
                continue;
            }
            let [x, y, _] = volume.coords(i);
            if x == 0 || y == 0 || x + 1 == nx || y + 1 == ny {
                epi[i] = true;
            }
            for (j, axis) in volume.neighbours(i) {
                if axis == 2 || volume.mask[j] {
                    continue;
                }
                if cavity[j] {
                    endo[i] = true;
                } else {
                    epi[i] = true;
                }
            }
        }
        Self { endo, epi }
    }

    pub fn touches(&self, i: usize) -> bool {
        self.endo[i] || self.epi[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// Voxel indices in ascending order.
    pub voxels: Vec<usize>,
    pub volume_mm3: f64,
    pub touches_endo: bool,
    pub touches_epi: bool,
}

/// 6-connected components of a voxel set, ordered by their smallest voxel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentGraph {
    pub components: Vec<Component>,
}

impl ComponentGraph {
    pub fn build<T: Real>(set: &[bool], volume: &MyocardiumVolume<T>, boundary: &MyocardialBoundary) -> Self {
        let voxel_mm3 = volume.voxel_volume().as_f64();
        let components = connected_components(set, volume.dims)
            .into_iter()
            .map(|voxels| Component {
                volume_mm3: voxels.len() as f64 * voxel_mm3,
                touches_endo: voxels.iter().any(|&i| boundary.endo[i]),
                touches_epi: voxels.iter().any(|&i| boundary.epi[i]),
                voxels,
            })
            .collect();
        Self { components }
    }

    pub fn total_voxels(&self) -> usize {
        self.components.iter().map(|c| c.voxels.len()).sum()
    }
}

pub fn connected_components(set: &[bool], dims: [usize; 3]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; set.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..set.len() {
        if !set[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut voxels = Vec::new();
        while let Some(i) = queue.pop_front() {
            voxels.push(i);
            for (j, _) in neighbours_in(dims, i) {
                if set[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        voxels.sort_unstable();
        out.push(voxels);
    }
    out
}

/// Largest in-plane (4-connected) erosion depth of a component: 1 when every
/// voxel has an in-plane neighbour outside the component.
pub fn inplane_thickness(voxels: &[usize], dims: [usize; 3]) -> usize {
    let n = dims.iter().product::<usize>();
    let mut inside = vec![false; n];
    for &i in voxels {
        inside[i] = true;
    }
    let mut depth = vec![0usize; n];
    let mut queue = VecDeque::new();
    for &i in voxels {
        let interior = inplane_neighbours(dims, i).iter().all(|j| j.is_some_and(|j| inside[j]));
        if !interior {
            depth[i] = 1;
            queue.push_back(i);
        }
    }
    let mut max = if voxels.is_empty() { 0 } else { 1 };
    while let Some(i) = queue.pop_front() {
        for j in inplane_neighbours(dims, i).into_iter().flatten() {
            if inside[j] && depth[j] == 0 {
                depth[j] = depth[i] + 1;
                max = max.max(depth[j]);
                queue.push_back(j);
            }
        }
    }
    max
}

fn inplane_neighbours(dims: [usize; 3], i: usize) -> [Option<usize>; 4] {
    let x = i % dims[0];
    let y = (i / dims[0]) % dims[1];
    [
        (x > 0).then(|| i - 1),
        (x + 1 < dims[0]).then(|| i + 1),
        (y > 0).then(|| i - dims[0]),
        (y + 1 < dims[1]).then(|| i + dims[0]),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    BoundaryFalsePositive,
    SmallComponent,
    PartialVolume,
    Mvo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub rule: Rule,
    /// `true` when the voxels were relabeled infarct, `false` when removed.
    pub added: bool,
    pub voxels: usize,
    pub volume_mm3: f64,
    /// Smallest voxel index of the affected component, as an identifier.
    pub first_voxel: usize,
}

fn relabel(labeling: &mut Labeling, voxels: &[usize], value: u8) {
    for &i in voxels {
        labeling.labels[i] = value;
    }
}

fn entry(rule: Rule, added: bool, c: &Component) -> AuditEntry {
    AuditEntry { rule, added, voxels: c.voxels.len(), volume_mm3: c.volume_mm3, first_voxel: c.voxels[0] }
}

pub fn remove_boundary_false_positives<T: Real>(
    labeling: &Labeling,
    volume: &MyocardiumVolume<T>,
    boundary: &MyocardialBoundary,
    config: &PostprocessConfig,
    audit: &mut Vec<AuditEntry>,
) -> Labeling {
    let mut out = labeling.clone();
    for c in ComponentGraph::build(&labeling.infarct_set(), volume, boundary).components {
        let near = c.voxels.iter().filter(|&&i| boundary.touches(i)).count();
        let fraction = near as f64 / c.voxels.len() as f64;
        if fraction >= config.boundary_fraction && inplane_thickness(&c.voxels, volume.dims) <= config.max_rim_thickness {
            relabel(&mut out, &c.voxels, 0);
            audit.push(entry(Rule::BoundaryFalsePositive, false, &c));
        }
    }
    out
}

pub fn remove_small_components<T: Real>(
    labeling: &Labeling,
    volume: &MyocardiumVolume<T>,
    boundary: &MyocardialBoundary,
    min_volume_mm3: f64,
    audit: &mut Vec<AuditEntry>,
) -> Labeling {
    let mut out = labeling.clone();
    for c in ComponentGraph::build(&labeling.infarct_set(), volume, boundary).components {
        if c.volume_mm3 < min_volume_mm3 {
            relabel(&mut out, &c.voxels, 0);
            audit.push(entry(Rule::SmallComponent, false, &c));
        }
    }
    out
}

/// Grows infarct regions into 6-adjacent masked voxels with intensity at or
/// above `i_thrh`, to a fixed point.
pub fn recover_partial_volume<T: Real>(
    labeling: &Labeling,
    volume: &MyocardiumVolume<T>,
    params: &RicianMixtureParams<T>,
    audit: &mut Vec<AuditEntry>,
) -> Result<Labeling> {
    let thr = params.i_thrh.ok_or_else(|| Error::InvalidConfig("mixture parameters carry no threshold".into()))?;
    let mut out = labeling.clone();
    let mut queue: VecDeque<usize> = (0..out.labels.len()).filter(|&i| out.is_infarct(i)).collect();
    let mut grown = vec![false; out.labels.len()];
    while let Some(i) = queue.pop_front() {
        for (j, _) in volume.neighbours(i) {
            if volume.mask[j] && out.labels[j] == 0 && volume.intensity[j] >= thr {
                out.labels[j] = 1;
                grown[j] = true;
                queue.push_back(j);
            }
        }
    }
    let voxel_mm3 = volume.voxel_volume().as_f64();
    for voxels in connected_components(&grown, volume.dims) {
        audit.push(AuditEntry {
            rule: Rule::PartialVolume,
            added: true,
            voxels: voxels.len(),
            volume_mm3: voxels.len() as f64 * voxel_mm3,
            first_voxel: voxels[0],
        });
    }
    Ok(out)
}

/// Relabels normal components that touch the endocardium and whose
/// non-cavity neighbours are mostly infarct.
pub fn include_mvo<T: Real>(
    labeling: &Labeling,
    volume: &MyocardiumVolume<T>,
    cavity: &[bool],
    boundary: &MyocardialBoundary,
    enclosure: f64,
    audit: &mut Vec<AuditEntry>,
) -> Labeling {
    let normal: Vec<bool> = (0..labeling.labels.len()).map(|i| volume.mask[i] && !labeling.is_infarct(i)).collect();
    let mut out = labeling.clone();
    let mut in_component = vec![false; normal.len()];
    for c in ComponentGraph::build(&normal, volume, boundary).components {
        if !c.touches_endo {
            continue;
        }
        for &i in &c.voxels {
            in_component[i] = true;
        }
        let mut counted = vec![];
        let (mut infarct, mut total) = (0usize, 0usize);
        for &i in &c.voxels {
            for (j, _) in volume.neighbours(i) {
                if in_component[j] || cavity[j] {
                    continue;
                }
                counted.push(j);
            }
        }
        counted.sort_unstable();
        counted.dedup();
        for &j in &counted {
            total += 1;
            if labeling.is_infarct(j) {
                infarct += 1;
            }
        }
        for &i in &c.voxels {
            in_component[i] = false;
        }
        if total > 0 && infarct as f64 >= enclosure * total as f64 {
            relabel(&mut out, &c.voxels, 1);
            audit.push(entry(Rule::Mvo, true, &c));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostprocessOutcome {
    pub labeling: Labeling,
    pub audit: Vec<AuditEntry>,
}

/// Boundary removal, small-component removal, partial-volume recovery, MVO inclusion.
pub fn postprocess<T: Real>(
    labeling: &Labeling,
    volume: &MyocardiumVolume<T>,
    cavity: &[bool],
    params: &RicianMixtureParams<T>,
    config: &PostprocessConfig,
) -> Result<PostprocessOutcome> {
    config.validate()?;
    if cavity.len() != volume.len() || labeling.labels.len() != volume.len() {
        return Err(Error::ShapeMismatch { left: cavity.len().max(labeling.labels.len()), right: volume.len() });
    }
    let boundary = MyocardialBoundary::new(volume, cavity);
    let mut audit = Vec::new();
    let l = remove_boundary_false_positives(labeling, volume, &boundary, config, &mut audit);
    let l = remove_small_components(&l, volume, &boundary, config.min_volume_mm3, &mut audit);
    let l = recover_partial_volume(&l, volume, params, &mut audit)?;
    let l = include_mvo(&l, volume, cavity, &boundary, config.mvo_enclosure, &mut audit);
    Ok(PostprocessOutcome { labeling: l, audit })
}
