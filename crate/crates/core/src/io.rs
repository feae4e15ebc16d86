//! On-disk formats: JSON manifest with raw u16 pixel files, JSON contours,
//! raw f32 and u8 volumes with JSON headers, and JSON reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::contour::{ContourSet, Polygon, SliceContours};
use crate::dataset::{LgeDataset, SliceRole};
use crate::error::{Error, Result};
use crate::geometry::{orientation_tolerance, Roi, SliceImage, SlicePose};
use crate::scalar::Real;
use crate::vec3::Vec3;
use crate::volume::Labeling;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceEntry {
    pub role: SliceRole,
    pub index: usize,
    pub ipp: [f64; 3],
    pub iop_row: [f64; 3],
    pub iop_col: [f64; 3],
    /// Row and column pixel spacing in mm.
    pub ps: [f64; 2],
    pub rows: usize,
    pub cols: usize,
    /// Relative to the manifest's directory.
    pub pixel_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roi: Option<Roi>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub slice_thickness_mm: f64,
    pub gap_mm: f64,
    pub slices: Vec<SliceEntry>,
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_u16_raw(path: &Path, expected: usize) -> Result<Vec<u16>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected * 2 {
        return Err(Error::DimensionMismatch { path: path.into(), expected, found: bytes.len() / 2 });
    }
    Ok(bytes.chunks_exact(2).map(|b| u16::from_le_bytes([b[0], b[1]])).collect())
}

pub fn write_u16_raw(path: &Path, values: &[u16]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn to_u16<T: Real>(v: T) -> u16 {
    v.as_f64().round().clamp(0.0, u16::MAX as f64) as u16
}

fn vec3<T: Real>(a: [f64; 3]) -> Vec3<T> {
    Vec3::new(T::lit(a[0]), T::lit(a[1]), T::lit(a[2]))
}

fn arr<T: Real>(v: Vec3<T>) -> [f64; 3] {
    [v.x.as_f64(), v.y.as_f64(), v.z.as_f64()]
}

fn check_orientation(entry: &SliceEntry, position: usize) -> Result<()> {
    let r = Vec3::new(entry.iop_row[0], entry.iop_row[1], entry.iop_row[2]);
    let c = Vec3::new(entry.iop_col[0], entry.iop_col[1], entry.iop_col[2]);
    let tol = orientation_tolerance::<f64>().max(1e-6);
    let detail = if (r.norm() - 1.0).abs() > tol || (c.norm() - 1.0).abs() > tol {
        format!("|iop_row| = {}, |iop_col| = {}", r.norm(), c.norm())
    } else if r.dot(c).abs() > tol {
        format!("iop_row . iop_col = {}", r.dot(c))
    } else {
        return Ok(());
    };
    Err(Error::NonOrthonormal { index: position, detail })
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let m: DatasetManifest = read_json(path)?;
    if m.version != FORMAT_VERSION {
        return Err(Error::InvalidManifest(format!("unsupported version {}", m.version)));
    }
    Ok(m)
}

/// Reads a manifest and every pixel file it references.
pub fn load_dataset<T: Real>(manifest_path: &Path) -> Result<LgeDataset<T>> {
    let m = load_manifest(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    if !(m.slice_thickness_mm > 0.0) || !(m.gap_mm >= 0.0) {
        return Err(Error::InvalidManifest("slice thickness must be positive and gap non-negative".into()));
    }
    let mut sa: Vec<(usize, SliceImage<T>, Option<Roi>)> = Vec::new();
    let mut la = Vec::new();
    for (position, e) in m.slices.iter().enumerate() {
        check_orientation(e, position)?;
        let pose = SlicePose::new(vec3(e.ipp), vec3(e.iop_row), vec3(e.iop_col), T::lit(e.ps[0]), T::lit(e.ps[1]), e.rows, e.cols)
            .map_err(|err| Error::InvalidManifest(format!("slice {position}: {err}")))?;
        let file = dir.join(&e.pixel_file);
        let pixels = read_u16_raw(&file, e.rows * e.cols)?;
        let image = SliceImage::new(pose, pixels.into_iter().map(|v| T::lit(v as f64)).collect())?;
        match e.role {
            SliceRole::Sa => sa.push((e.index, image, e.roi)),
            role => la.push((e.index, role, image)),
        }
    }
    sa.sort_by_key(|s| s.0);
    if sa.iter().enumerate().any(|(k, s)| s.0 != k) {
        return Err(Error::InvalidManifest("SA indices must be contiguous from 0".into()));
    }
    la.sort_by_key(|s| s.0);
    let mut rois = Vec::with_capacity(sa.len());
    let mut images = Vec::with_capacity(sa.len());
    for (k, image, roi) in sa {
        let roi = roi.unwrap_or_else(|| Roi::full(image.rows(), image.cols()));
        roi.validate(image.rows(), image.cols()).map_err(|err| Error::InvalidManifest(format!("SA slice {k}: {err}")))?;
        rois.push(roi);
        images.push(image);
    }
    Ok(LgeDataset {
        sa: images,
        la: la.into_iter().map(|(_, role, image)| (role, image)).collect(),
        sa_rois: rois,
        slice_thickness_mm: T::lit(m.slice_thickness_mm),
        gap_mm: T::lit(m.gap_mm),
    })
}

pub fn manifest_of<T: Real>(dataset: &LgeDataset<T>, pixel_names: &[PathBuf]) -> DatasetManifest {
    let entry = |role: SliceRole, index: usize, s: &SliceImage<T>, file: &PathBuf, roi: Option<Roi>| SliceEntry {
        role,
        index,
        ipp: arr(s.pose.ipp),
        iop_row: arr(s.pose.iop_row),
        iop_col: arr(s.pose.iop_col),
        ps: [s.pose.ps_row.as_f64(), s.pose.ps_col.as_f64()],
        rows: s.rows(),
        cols: s.cols(),
        pixel_file: file.clone(),
        roi,
    };
    let m = dataset.sa.len();
    let slices = dataset
        .sa
        .iter()
        .enumerate()
        .map(|(k, s)| entry(SliceRole::Sa, k, s, &pixel_names[k], Some(dataset.sa_rois[k])))
        .chain(dataset.la.iter().enumerate().map(|(j, (role, s))| entry(*role, j, s, &pixel_names[m + j], None)))
        .collect();
    DatasetManifest {
        version: FORMAT_VERSION,
        slice_thickness_mm: dataset.slice_thickness_mm.as_f64(),
        gap_mm: dataset.gap_mm.as_f64(),
        slices,
    }
}

/// Default pixel file names: `sa_000.u16`, ..., `la4c_000.u16`, `la2c_001.u16`.
pub fn default_pixel_names<T: Real>(dataset: &LgeDataset<T>) -> Vec<PathBuf> {
    let sa = (0..dataset.sa.len()).map(|k| PathBuf::from(format!("sa_{k:03}.u16")));
    let la = dataset.la.iter().enumerate().map(|(j, (role, _))| {
        let tag = if *role == SliceRole::La2c { "la2c" } else { "la4c" };
        PathBuf::from(format!("{tag}_{j:03}.u16"))
    });
    sa.chain(la).collect()
}

/// Writes the manifest and pixel files into `dir`; pixel values are rounded
/// and clamped to u16. Returns the manifest path.
pub fn save_dataset<T: Real>(dataset: &LgeDataset<T>, dir: &Path, manifest_name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let names = default_pixel_names(dataset);
    let images = dataset.sa.iter().chain(dataset.la.iter().map(|(_, s)| s));
    for (image, name) in images.zip(&names) {
        let values: Vec<u16> = image.pixels.iter().map(|&v| to_u16(v)).collect();
        write_u16_raw(&dir.join(name), &values)?;
    }
    let path = dir.join(manifest_name);
    write_json(&path, &manifest_of(dataset, &names))?;
    Ok(path)
}

/// Rewrites only the manifest, pointing at existing pixel files (used after realignment).
pub fn save_manifest_with_ipps<T: Real>(
    original: &DatasetManifest,
    original_dir: &Path,
    ipps: &[Vec3<T>],
    path: &Path,
) -> Result<()> {
    let mut m = original.clone();
    let sa: Vec<usize> = (0..m.slices.len()).filter(|&i| m.slices[i].role == SliceRole::Sa).collect();
    let la: Vec<usize> = (0..m.slices.len()).filter(|&i| m.slices[i].role != SliceRole::Sa).collect();
    let mut order: Vec<usize> = sa;
    order.sort_by_key(|&i| m.slices[i].index);
    let mut la_sorted = la;
    la_sorted.sort_by_key(|&i| m.slices[i].index);
    order.extend(la_sorted);
    if order.len() != ipps.len() {
        return Err(Error::WrongPositionCount { expected: order.len(), found: ipps.len() });
    }
    let target_dir = path.parent().unwrap_or(Path::new("."));
    for (&i, &p) in order.iter().zip(ipps) {
        m.slices[i].ipp = arr(p);
        let abs = original_dir.join(&m.slices[i].pixel_file);
        m.slices[i].pixel_file = relative_to(&abs, target_dir);
    }
    write_json(path, &m)
}

fn relative_to(file: &Path, dir: &Path) -> PathBuf {
    let (Ok(f), Ok(d)) = (file.canonicalize(), dir.canonicalize()) else {
        return file.to_path_buf();
    };
    let fc: Vec<_> = f.components().collect();
    let dc: Vec<_> = d.components().collect();
    let common = fc.iter().zip(&dc).take_while(|(a, b)| a == b).count();
    let mut out = PathBuf::new();
    for _ in common..dc.len() {
        out.push("..");
    }
    for c in &fc[common..] {
        out.push(c);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourEntry {
    pub index: usize,
    pub endo: Vec<[f64; 2]>,
    pub epi: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourFile {
    pub version: u32,
    pub slices: Vec<ContourEntry>,
}

impl ContourFile {
    pub fn from_set<T: Real>(set: &ContourSet<T>) -> Self {
        let pts = |p: &Polygon<T>| p.vertices.iter().map(|&(r, c)| [r.as_f64(), c.as_f64()]).collect();
        Self {
            version: FORMAT_VERSION,
            slices: set
                .slices
                .iter()
                .enumerate()
                .filter_map(|(k, s)| s.as_ref().map(|s| ContourEntry { index: k, endo: pts(&s.endo), epi: pts(&s.epi) }))
                .collect(),
        }
    }

    /// Validated contour set covering `n_slices` SA slices; absent slices are `None`.
    pub fn to_set<T: Real>(&self, n_slices: usize) -> Result<ContourSet<T>> {
        let poly = |v: &[[f64; 2]]| Polygon::new(v.iter().map(|p| (T::lit(p[0]), T::lit(p[1]))).collect());
        let mut slices = vec![None; n_slices];
        for e in &self.slices {
            let c = SliceContours { endo: poly(&e.endo), epi: poly(&e.epi) };
            c.validate().map_err(|err| match err {
                Error::MalformedPolygon(m) => Error::MalformedPolygon(format!("slice {}: {m}", e.index)),
                other => other,
            })?;
            let slot = slices
                .get_mut(e.index)
                .ok_or_else(|| Error::InvalidManifest(format!("contour for slice {} beyond the stack", e.index)))?;
            *slot = Some(c);
        }
        Ok(ContourSet { slices })
    }
}

pub fn load_contours<T: Real>(path: &Path, n_slices: usize) -> Result<ContourSet<T>> {
    let f: ContourFile = read_json(path)?;
    if f.version != FORMAT_VERSION {
        return Err(Error::InvalidManifest(format!("unsupported contour file version {}", f.version)));
    }
    f.to_set(n_slices)
}

pub fn save_contours<T: Real>(path: &Path, set: &ContourSet<T>) -> Result<()> {
    write_json(path, &ContourFile::from_set(set))
}

/// Header of a raw volume stored x-fastest over `(col, row, slice)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub version: u32,
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    /// `f32le` or `u8`.
    pub encoding: String,
    pub data_file: PathBuf,
    /// Meaning of the stored codes, for label volumes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub codes: Vec<String>,
}

pub const LABEL_BACKGROUND: u8 = 0;
pub const LABEL_NORMAL: u8 = 1;
pub const LABEL_INFARCT: u8 = 2;

fn data_path(header_path: &Path, header: &VolumeHeader) -> PathBuf {
    header_path.parent().unwrap_or(Path::new(".")).join(&header.data_file)
}

pub fn write_f32_volume(header_path: &Path, data_name: &str, dims: [usize; 3], spacing: [f64; 3], values: &[f32]) -> Result<()> {
    let header = VolumeHeader {
        version: FORMAT_VERSION,
        dims,
        spacing_mm: spacing,
        encoding: "f32le".into(),
        data_file: data_name.into(),
        codes: vec![],
    };
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    let p = data_path(header_path, &header);
    fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    write_json(header_path, &header)
}

pub fn read_f32_volume(header_path: &Path) -> Result<(VolumeHeader, Vec<f32>)> {
    let header: VolumeHeader = read_json(header_path)?;
    if header.encoding != "f32le" {
        return Err(Error::parse(header_path, format!("expected f32le encoding, found {}", header.encoding)));
    }
    let p = data_path(header_path, &header);
    let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
    let expected = header.dims.iter().product::<usize>();
    if bytes.len() != expected * 4 {
        return Err(Error::DimensionMismatch { path: p, expected, found: bytes.len() / 4 });
    }
    Ok((header, bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect()))
}

/// Writes a label volume coded 0 = outside the myocardium, 1 = normal, 2 = infarct.
pub fn write_labeling(header_path: &Path, data_name: &str, labeling: &Labeling, mask: &[bool], spacing: [f64; 3]) -> Result<()> {
    if mask.len() != labeling.labels.len() {
        return Err(Error::ShapeMismatch { left: mask.len(), right: labeling.labels.len() });
    }
    let header = VolumeHeader {
        version: FORMAT_VERSION,
        dims: labeling.dims,
        spacing_mm: spacing,
        encoding: "u8".into(),
        data_file: data_name.into(),
        codes: vec!["background".into(), "normal".into(), "infarct".into()],
    };
    let bytes: Vec<u8> = mask
        .iter()
        .zip(&labeling.labels)
        .map(|(&m, &l)| match (m, l) {
            (false, _) => LABEL_BACKGROUND,
            (true, 1) => LABEL_INFARCT,
            (true, _) => LABEL_NORMAL,
        })
        .collect();
    let p = data_path(header_path, &header);
    fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    write_json(header_path, &header)
}

/// Reads a label volume back into the myocardium mask and the binary labeling.
pub fn read_labeling(header_path: &Path) -> Result<(VolumeHeader, Vec<bool>, Labeling)> {
    let header: VolumeHeader = read_json(header_path)?;
    if header.encoding != "u8" {
        return Err(Error::parse(header_path, format!("expected u8 encoding, found {}", header.encoding)));
    }
    let p = data_path(header_path, &header);
    let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
    let expected = header.dims.iter().product::<usize>();
    if bytes.len() != expected {
        return Err(Error::DimensionMismatch { path: p, expected, found: bytes.len() });
    }
    if let Some(bad) = bytes.iter().find(|&&b| b > LABEL_INFARCT) {
        return Err(Error::parse(header_path, format!("unknown label code {bad}")));
    }
    let mask = bytes.iter().map(|&b| b != LABEL_BACKGROUND).collect();
    let labeling = Labeling { dims: header.dims, labels: bytes.iter().map(|&b| (b == LABEL_INFARCT) as u8).collect() };
    Ok((header, mask, labeling))
}

/// Phantom ground truth: true poses and gains, with the true tissue labels in
/// a separate label volume next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub version: u32,
    /// SA then LA.
    pub ipps: Vec<[f64; 3]>,
    pub gains: Vec<f64>,
    pub translations: Vec<[f64; 3]>,
    pub labels: PathBuf,
}

/// Writes `truth.json`, `truth_labels.json` and `truth_labels.u8` into `dir`.
pub fn save_truth<T: Real>(dir: &Path, truth: &crate::phantom::PhantomTruth<T>, spacing: [f64; 3]) -> Result<PathBuf> {
    let labels = Labeling::from_set(truth.dims, &truth.infarct);
    write_labeling(&dir.join("truth_labels.json"), "truth_labels.u8", &labels, &truth.myocardium, spacing)?;
    let file = TruthFile {
        version: FORMAT_VERSION,
        ipps: truth.ipps.iter().map(|&p| arr(p)).collect(),
        gains: truth.gains.clone(),
        translations: truth.translations.clone(),
        labels: "truth_labels.json".into(),
    };
    let path = dir.join("truth.json");
    write_json(&path, &file)?;
    Ok(path)
}

/// Reads a truth sidecar and its label volume (myocardium mask, infarct labeling).
pub fn load_truth(path: &Path) -> Result<(TruthFile, Vec<bool>, Labeling)> {
    let file: TruthFile = read_json(path)?;
    let labels = path.parent().unwrap_or(Path::new(".")).join(&file.labels);
    let (_, mask, labeling) = read_labeling(&labels)?;
    Ok((file, mask, labeling))
}
