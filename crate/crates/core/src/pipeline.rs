//! Stage driver: realign, restack, normalize, classify, post-process and
//! quantify, with per-stage output files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aha::{assign_segments, quantify, QuantReport, DEFAULT_REFERENCE_DEG};
use crate::contour::ContourSet;
use crate::dataset::LgeDataset;
use crate::error::{Error, Result};
use crate::geometry::{SliceImage, SlicePose};
use crate::graphcut::{classify, energy, GraphCutConfig};
use crate::io::{self, write_json};
use crate::metrics::dice;
use crate::normalize::{iterate_normalization, reference_slice, NormalizationIteration, NormalizationResult, NormalizeOptions};
use crate::phantom::PhantomConfig;
use crate::postprocess::{postprocess, AuditEntry, PostprocessConfig, PostprocessOutcome};
use crate::realign::{optimize_with, AlignmentResult, OptimizerOptions, DEFAULT_GAMMA};
use crate::rician::{MixtureFit, RelativeProbability, RicianMixtureParams, DEFAULT_BINS};
use crate::scalar::Real;
use crate::svg;
use crate::vec3::Vec3;
use crate::volume::{Labeling, MyocardiumVolume, StackVolume};

pub const STAGE_REALIGN: &str = "realign";
pub const STAGE_NORMALIZE: &str = "normalize";
pub const STAGE_CLASSIFY: &str = "classify";
pub const STAGE_POSTPROCESS: &str = "postprocess";
pub const STAGE_QUANTIFY: &str = "quantify";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealignSettings {
    pub enabled: bool,
    pub gamma: f64,
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub bound_mm: f64,
    pub initial_step_mm: f64,
    pub max_evals_per_slice: usize,
}

impl Default for RealignSettings {
    fn default() -> Self {
        let o = OptimizerOptions::<f64>::default();
        Self {
            enabled: true,
            gamma: DEFAULT_GAMMA,
            max_sweeps: o.max_sweeps,
            rel_tol: o.rel_tol,
            bound_mm: o.bound_mm,
            initial_step_mm: o.initial_step_mm,
            max_evals_per_slice: o.max_evals_per_slice,
        }
    }
}

impl RealignSettings {
    pub fn options<T: Real>(&self) -> OptimizerOptions<T> {
        OptimizerOptions {
            max_sweeps: self.max_sweeps,
            rel_tol: T::lit(self.rel_tol),
            bound_mm: T::lit(self.bound_mm),
            initial_step_mm: T::lit(self.initial_step_mm),
            max_evals_per_slice: self.max_evals_per_slice,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizeSettings {
    pub epsilon: f64,
    pub max_iter: usize,
    pub bins: usize,
}

impl Default for NormalizeSettings {
    fn default() -> Self {
        Self { epsilon: 0.01, max_iter: 20, bins: DEFAULT_BINS }
    }
}

impl NormalizeSettings {
    pub fn options<T: Real>(&self) -> NormalizeOptions<T> {
        NormalizeOptions { epsilon: T::lit(self.epsilon), max_iter: self.max_iter, bins: self.bins }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphCutSettings {
    pub lambda: f64,
    /// Width of the interaction potential; the distance between the fitted
    /// component modes when absent.
    pub sigma: Option<f64>,
}

impl Default for GraphCutSettings {
    fn default() -> Self {
        Self { lambda: 1.0, sigma: None }
    }
}

impl GraphCutSettings {
    pub fn config<T: Real>(&self, params: &RicianMixtureParams<T>) -> Result<GraphCutConfig<T>> {
        let cfg = GraphCutConfig { lambda: T::lit(self.lambda), sigma: self.sigma.map(T::lit).unwrap_or_else(|| params.mode_gap()) };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AhaSettings {
    pub reference_deg: f64,
}

impl Default for AhaSettings {
    fn default() -> Self {
        Self { reference_deg: DEFAULT_REFERENCE_DEG }
    }
}

/// Every tunable parameter of the pipeline; missing tables and keys take their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub realign: RealignSettings,
    pub normalize: NormalizeSettings,
    pub graphcut: GraphCutSettings,
    pub postprocess: PostprocessConfig,
    pub aha: AhaSettings,
    pub phantom: PhantomConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::parse(path, m),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.realign;
        if !(r.gamma >= 0.0) || !(r.bound_mm > 0.0) || !(r.initial_step_mm > 0.0) || !(r.rel_tol >= 0.0) {
            return Err(Error::InvalidConfig("realign: gamma, rel_tol must be >= 0 and bound, step > 0".into()));
        }
        if !(self.normalize.epsilon > 0.0) {
            return Err(Error::InvalidConfig("normalize: epsilon must be positive".into()));
        }
        if !(self.graphcut.lambda > 0.0) || self.graphcut.sigma.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::InvalidConfig("graphcut: lambda and sigma must be positive".into()));
        }
        if !self.aha.reference_deg.is_finite() {
            return Err(Error::InvalidConfig("aha: reference angle must be finite".into()));
        }
        self.postprocess.validate()
    }
}

/// Whole-pixel shifts that bring each SA slice onto the anchor slice's grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestackReport {
    pub anchor: usize,
    /// Per SA slice `(rows, cols)`: restacked pixel `(r, c)` is original pixel `(r + dr, c + dc)`.
    pub shifts_px: Vec<[i64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizeReport<T> {
    pub reference_slice: usize,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<NormalizationIteration<T>>,
    pub fit: MixtureFit<T>,
    pub relative_probability: RelativeProbability<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport<T> {
    pub lambda: T,
    pub sigma: T,
    pub energy: T,
    pub infarct_voxels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostprocessReport {
    pub infarct_voxels: usize,
    pub audit: Vec<AuditEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthComparison {
    pub dice: f64,
    pub truth_percent: f64,
    pub auto_percent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport<T: Real> {
    pub version: u32,
    pub stages_completed: Vec<String>,
    pub config: PipelineConfig,
    pub realign: Option<AlignmentResult<T>>,
    pub restack: Option<RestackReport>,
    pub normalize: Option<NormalizeReport<T>>,
    pub classify: Option<ClassifyReport<T>>,
    pub postprocess: Option<PostprocessReport>,
    pub quantification: Option<QuantReport>,
    pub truth: Option<TruthComparison>,
    pub error: Option<String>,
}

/// Where the normalize stage gets its contours; files are read only when the stage starts.
#[derive(Debug, Clone)]
pub enum ContourInput<T> {
    Set(ContourSet<T>),
    File(PathBuf),
}

impl<T: Real> ContourInput<T> {
    pub fn resolve(self, n_slices: usize) -> Result<ContourSet<T>> {
        match self {
            ContourInput::Set(s) => {
                if s.slices.len() < n_slices {
                    return Err(Error::MissingContour { slice: s.slices.len() });
                }
                s.validate()?;
                Ok(s)
            }
            ContourInput::File(p) => io::load_contours(&p, n_slices),
        }
    }
}

/// Runs the translation search and moves every slice of `dataset` to the corrected IPPs.
pub fn realign_dataset<T: Real>(dataset: &mut LgeDataset<T>, settings: &RealignSettings) -> Result<AlignmentResult<T>> {
    let problem = dataset.alignment_problem(T::lit(settings.gamma))?;
    let result = optimize_with(&problem, &settings.options())?;
    dataset.set_ipps(&result.corrected_ipps)?;
    Ok(result)
}

pub fn restack_shifts<T: Real>(sa: &[SliceImage<T>]) -> RestackReport {
    let anchor = reference_slice(sa.len());
    let origin = sa.get(anchor).map(|s| s.pose.ipp).unwrap_or_else(Vec3::zero);
    let shifts_px = sa
        .iter()
        .map(|s| {
            let d = origin - s.pose.ipp;
            let dr = (d.dot(s.pose.iop_row) / s.pose.ps_row).round();
            let dc = (d.dot(s.pose.iop_col) / s.pose.ps_col).round();
            [dr.to_i64().unwrap_or(0), dc.to_i64().unwrap_or(0)]
        })
        .collect();
    RestackReport { anchor, shifts_px }
}

/// Shifts the pixels of `slice` so that new `(r, c)` holds old `(r + dr, c + dc)`,
/// replicating edge pixels, and moves the IPP so the pose stays consistent.
pub fn shift_slice<T: Real>(slice: &SliceImage<T>, dr: i64, dc: i64) -> SliceImage<T> {
    let (rows, cols) = (slice.rows() as i64, slice.cols() as i64);
    let mut out = slice.clone();
    for r in 0..rows {
        for c in 0..cols {
            let sr = (r + dr).clamp(0, rows - 1) as usize;
            let sc = (c + dc).clamp(0, cols - 1) as usize;
            out.set(r as usize, c as usize, slice.get(sr, sc));
        }
    }
    let p = &slice.pose;
    out.pose.ipp = p.ipp + p.iop_row * (T::lit(dr as f64) * p.ps_row) + p.iop_col * (T::lit(dc as f64) * p.ps_col);
    out
}

/// Shifts a per-slice `(col, row, slice)` mask the same way as [`shift_slice`], filling with `false`.
pub fn shift_mask(mask: &[bool], dims: [usize; 3], shifts: &[[i64; 2]]) -> Vec<bool> {
    let [nx, ny, nz] = dims;
    let mut out = vec![false; mask.len()];
    for z in 0..nz {
        let [dr, dc] = shifts.get(z).copied().unwrap_or([0, 0]);
        for y in 0..ny {
            for x in 0..nx {
                let (sy, sx) = (y as i64 + dr, x as i64 + dc);
                if sy >= 0 && sx >= 0 && (sy as usize) < ny && (sx as usize) < nx {
                    out[(z * ny + y) * nx + x] = mask[(z * ny + sy as usize) * nx + sx as usize];
                }
            }
        }
    }
    out
}

/// Puts every SA slice on the anchor's pixel grid by whole-pixel shifts of
/// images and contours.
pub fn restack<T: Real>(sa: &[SliceImage<T>], contours: &ContourSet<T>) -> Result<(Vec<SliceImage<T>>, ContourSet<T>, RestackReport)> {
    let report = restack_shifts(sa);
    let mut stack = Vec::with_capacity(sa.len());
    let mut shifted = Vec::with_capacity(sa.len());
    for (k, (s, &[dr, dc])) in sa.iter().zip(&report.shifts_px).enumerate() {
        stack.push(shift_slice(s, dr, dc));
        shifted.push(Some(contours.get(k)?.translated(T::lit(-dr as f64), T::lit(-dc as f64))));
    }
    Ok((stack, ContourSet { slices: shifted }, report))
}

pub fn normalize_report<T: Real>(result: &NormalizationResult<T>) -> NormalizeReport<T> {
    NormalizeReport {
        reference_slice: reference_slice(result.stack.len()),
        iterations: result.iterations,
        converged: result.converged,
        history: result.history.clone(),
        fit: result.fit,
        relative_probability: result.relative_probability.clone(),
    }
}

pub fn classify_volume<T: Real>(
    volume: &MyocardiumVolume<T>,
    params: &RicianMixtureParams<T>,
    settings: &GraphCutSettings,
) -> Result<(Labeling, ClassifyReport<T>)> {
    let cfg = settings.config(params)?;
    let labeling = classify(volume, params, &cfg)?;
    let report = ClassifyReport { lambda: cfg.lambda, sigma: cfg.sigma, energy: energy(volume, &labeling, params, &cfg), infarct_voxels: labeling.infarct_count() };
    Ok((labeling, report))
}

pub fn quantify_volume<T: Real>(labeling: &Labeling, volume: &MyocardiumVolume<T>, reference_deg: f64) -> Result<QuantReport> {
    let segments = assign_segments(volume, reference_deg)?;
    quantify(labeling, volume, &segments)
}

fn spacing_of<T: Real>(v: &MyocardiumVolume<T>) -> [f64; 3] {
    [v.spacing[0].as_f64(), v.spacing[1].as_f64(), v.spacing[2].as_f64()]
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `realigned/manifest.json` (with copied pixel files) and `realign.json`.
pub fn write_realign_outputs<T: Real>(out: &Path, dataset: &LgeDataset<T>, result: &AlignmentResult<T>) -> Result<()> {
    mkdir(out)?;
    io::save_dataset(dataset, &out.join("realigned"), "manifest.json")?;
    write_json(&out.join("realign.json"), result)
}

/// `normalized.json`/`.f32`, `contours_restacked.json`, `restack.json` and `normalize.json`.
pub fn write_normalize_outputs<T: Real>(
    out: &Path,
    stack: &[SliceImage<T>],
    contours: &ContourSet<T>,
    restack: &RestackReport,
    report: &NormalizeReport<T>,
    dz: T,
) -> Result<()> {
    mkdir(out)?;
    let first = stack.first().ok_or(Error::EmptyInput)?;
    let dims = [first.cols(), first.rows(), stack.len()];
    let spacing = [first.pose.ps_col.as_f64(), first.pose.ps_row.as_f64(), dz.as_f64()];
    let values: Vec<f32> = stack.iter().flat_map(|s| s.pixels.iter().map(|v| v.as_f64() as f32)).collect();
    io::write_f32_volume(&out.join("normalized.json"), "normalized.f32", dims, spacing, &values)?;
    io::save_contours(&out.join("contours_restacked.json"), contours)?;
    write_json(&out.join("restack.json"), restack)?;
    write_json(&out.join("normalize.json"), report)
}

/// Reads what [`write_normalize_outputs`] wrote and rebuilds the myocardium volume.
pub fn load_normalize_outputs<T: Real>(dir: &Path) -> Result<(StackVolume<T>, NormalizeReport<T>, RestackReport)> {
    let (header, values) = io::read_f32_volume(&dir.join("normalized.json"))?;
    let [nx, ny, nz] = header.dims;
    let contours = io::load_contours(&dir.join("contours_restacked.json"), nz)?;
    let report: NormalizeReport<T> = io::read_json(&dir.join("normalize.json"))?;
    let restack: RestackReport = io::read_json(&dir.join("restack.json"))?;
    let [sx, sy, sz] = header.spacing_mm.map(T::lit);
    let pose = SlicePose::new(Vec3::zero(), Vec3::new(T::zero(), T::one(), T::zero()), Vec3::new(T::one(), T::zero(), T::zero()), sy, sx, ny, nx)?;
    let stack = values
        .chunks_exact(nx * ny)
        .map(|c| SliceImage::new(pose, c.iter().map(|&v| T::lit(v as f64)).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok((StackVolume::from_stack(&stack, &contours, sz)?, report, restack))
}

/// `labeling_raw.json`/`.u8` (graph cut) and `classify.json`.
pub fn write_classify_outputs<T: Real>(out: &Path, volume: &MyocardiumVolume<T>, labeling: &Labeling, report: &ClassifyReport<T>) -> Result<()> {
    mkdir(out)?;
    io::write_labeling(&out.join("labeling_raw.json"), "labeling_raw.u8", labeling, &volume.mask, spacing_of(volume))?;
    write_json(&out.join("classify.json"), report)
}

/// `labeling.json`/`.u8` (final) and `postprocess.json`.
pub fn write_postprocess_outputs<T: Real>(out: &Path, volume: &MyocardiumVolume<T>, outcome: &PostprocessOutcome) -> Result<PostprocessReport> {
    mkdir(out)?;
    io::write_labeling(&out.join("labeling.json"), "labeling.u8", &outcome.labeling, &volume.mask, spacing_of(volume))?;
    let report = PostprocessReport { infarct_voxels: outcome.labeling.infarct_count(), audit: outcome.audit.clone() };
    write_json(&out.join("postprocess.json"), &report)?;
    Ok(report)
}

/// Per-case automatic (and, when known, reference) volumetric I/M%, ready for
/// pooling into a Bland-Altman analysis.
pub fn case_csv(auto_percent: f64, reference_percent: Option<f64>) -> String {
    match reference_percent {
        Some(m) => format!("auto_percent,manual_percent\n{auto_percent},{m}\n"),
        None => format!("auto_percent,manual_percent\n{auto_percent},\n"),
    }
}

/// `quant.json`, `bullseye.svg` and `case.csv`.
pub fn write_quantify_outputs(out: &Path, report: &QuantReport, reference_deg: f64, reference_percent: Option<f64>) -> Result<()> {
    mkdir(out)?;
    write_json(&out.join("quant.json"), report)?;
    write_text(&out.join("bullseye.svg"), &svg::bullseye(report, reference_deg))?;
    write_text(&out.join("case.csv"), &case_csv(report.volumetric_percent, reference_percent))
}

/// Infarct mask and myocardium mask stored on the SA grid, used to score the result.
#[derive(Debug, Clone)]
pub struct Reference {
    pub myocardium: Vec<bool>,
    pub infarct: Vec<bool>,
}

fn stage<R>(name: &'static str, f: impl FnOnce() -> Result<R>) -> Result<R> {
    f().map_err(|e| e.in_stage(name))
}

fn run_stages<T: Real>(
    report: &mut PipelineReport<T>,
    mut dataset: LgeDataset<T>,
    contours: ContourInput<T>,
    config: &PipelineConfig,
    out: Option<&Path>,
    reference: Option<&Reference>,
) -> Result<()> {
    if config.realign.enabled {
        let result = stage(STAGE_REALIGN, || {
            let r = realign_dataset(&mut dataset, &config.realign)?;
            if let Some(out) = out {
                write_realign_outputs(out, &dataset, &r)?;
            }
            Ok(r)
        })?;
        report.realign = Some(result);
        report.stages_completed.push(STAGE_REALIGN.into());
    }

    let dz = dataset.slice_spacing();
    let (normalized, stack_contours, restack_report, norm_report) = stage(STAGE_NORMALIZE, || {
        let contours = contours.resolve(dataset.sa.len())?;
        let (stack, shifted, restack_report) = restack(&dataset.sa, &contours)?;
        let result = iterate_normalization(&stack, &shifted, &config.normalize.options())?;
        let nr = normalize_report(&result);
        if let Some(out) = out {
            write_normalize_outputs(out, &result.stack, &shifted, &restack_report, &nr, dz)?;
        }
        Ok((result.stack, shifted, restack_report, nr))
    })?;
    let params = norm_report.fit.params;
    report.restack = Some(restack_report.clone());
    report.normalize = Some(norm_report);
    report.stages_completed.push(STAGE_NORMALIZE.into());

    let (sv, raw) = stage(STAGE_CLASSIFY, || {
        let sv = StackVolume::from_stack(&normalized, &stack_contours, dz)?;
        let (raw, cr) = classify_volume(&sv.volume, &params, &config.graphcut)?;
        if let Some(out) = out {
            write_classify_outputs(out, &sv.volume, &raw, &cr)?;
        }
        report.classify = Some(cr);
        Ok((sv, raw))
    })?;
    report.stages_completed.push(STAGE_CLASSIFY.into());

    let final_labeling = stage(STAGE_POSTPROCESS, || {
        let outcome = postprocess(&raw, &sv.volume, &sv.cavity, &params, &config.postprocess)?;
        report.postprocess = Some(match out {
            Some(out) => write_postprocess_outputs(out, &sv.volume, &outcome)?,
            None => PostprocessReport { infarct_voxels: outcome.labeling.infarct_count(), audit: outcome.audit.clone() },
        });
        Ok(outcome.labeling)
    })?;
    report.stages_completed.push(STAGE_POSTPROCESS.into());

    stage(STAGE_QUANTIFY, || {
        let q = quantify_volume(&final_labeling, &sv.volume, config.aha.reference_deg)?;
        let truth = match reference {
            Some(r) => {
                let dims = sv.volume.dims;
                let infarct = shift_mask(&r.infarct, dims, &restack_report.shifts_px);
                let myo = shift_mask(&r.myocardium, dims, &restack_report.shifts_px);
                if infarct.len() != final_labeling.labels.len() {
                    return Err(Error::ShapeMismatch { left: infarct.len(), right: final_labeling.labels.len() });
                }
                let (ni, nm) = (infarct.iter().filter(|&&b| b).count(), myo.iter().filter(|&&b| b).count());
                Some(TruthComparison {
                    dice: dice(&final_labeling.infarct_set(), &infarct)?,
                    truth_percent: if nm == 0 { 0.0 } else { 100.0 * ni as f64 / nm as f64 },
                    auto_percent: q.volumetric_percent,
                })
            }
            None => None,
        };
        if let Some(out) = out {
            write_quantify_outputs(out, &q, config.aha.reference_deg, truth.as_ref().map(|t| t.truth_percent))?;
        }
        report.truth = truth;
        report.quantification = Some(q);
        Ok(())
    })?;
    report.stages_completed.push(STAGE_QUANTIFY.into());
    Ok(())
}

/// Runs every stage in order. With `out`, each stage writes its files as it
/// completes and `report.json` is written at the end, also on failure (with
/// the stage-tagged error recorded), so completed stages survive.
pub fn run_pipeline<T: Real>(
    dataset: LgeDataset<T>,
    contours: ContourInput<T>,
    config: &PipelineConfig,
    out: Option<&Path>,
    reference: Option<&Reference>,
) -> Result<PipelineReport<T>> {
    config.validate()?;
    let mut report = PipelineReport {
        version: io::FORMAT_VERSION,
        stages_completed: vec![],
        config: config.clone(),
        realign: None,
        restack: None,
        normalize: None,
        classify: None,
        postprocess: None,
        quantification: None,
        truth: None,
        error: None,
    };
    if let Some(out) = out {
        mkdir(out)?;
    }
    let result = run_stages(&mut report, dataset, contours, config, out, reference);
    if let Err(e) = &result {
        report.error = Some(e.to_string());
    }
    if let Some(out) = out {
        write_json(&out.join("report.json"), &report)?;
    }
    result.map(|()| report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_overrides() {
        let cfg = PipelineConfig::from_toml_str("[graphcut]\nlambda = 2.5\n[aha]\nreference_deg = 120.0\n").unwrap();
        assert_eq!(cfg.graphcut.lambda, 2.5);
        assert_eq!(cfg.aha.reference_deg, 120.0);
        assert_eq!(cfg.realign.gamma, 0.01);
        assert_eq!(cfg.normalize.max_iter, 20);
        assert!(PipelineConfig::from_toml_str("[graphcut]\nlamda = 1.0\n").is_err());
        assert!(PipelineConfig::from_toml_str("[normalize]\nepsilon = 0.0\n").is_err());
        let text = toml::to_string(&PipelineConfig::default()).unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&text).unwrap(), PipelineConfig::default());
    }

    #[test]
    fn shift_moves_pixels_and_pose() {
        let pose = SlicePose::new(Vec3::zero(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), 2.0, 1.0, 3, 3).unwrap();
        let s = SliceImage::new(pose, (0..9).map(|v| v as f64).collect()).unwrap();
        let t = shift_slice(&s, 1, -1);
        assert_eq!(t.get(0, 1), s.get(1, 0));
        assert_eq!(t.get(1, 2), s.get(2, 1));
        // the same patient point is hit through both poses
        assert_eq!(t.pose.pixel_to_patient(0.0, 1.0), s.pose.pixel_to_patient(1.0, 0.0));
        let report = restack_shifts(&[t.clone(), s.clone(), t]);
        assert_eq!(report.shifts_px, vec![[-1, 1], [0, 0], [-1, 1]]);
        let mask = [true, false, false, false];
        assert_eq!(shift_mask(&mask, [2, 2, 1], &[[-1, -1]]), vec![false, false, false, true]);
    }

    #[test]
    fn missing_contours_fail_in_normalize() {
        let cfg = PhantomConfig { n_sa: 3, ..PhantomConfig::default() }.without_infarct();
        let (ds, truth) = crate::phantom::generate::<f64>(&cfg).unwrap();
        let mut config = PipelineConfig::default();
        config.realign.enabled = false;
        let mut slices = truth.contours.slices.clone();
        slices[1] = None;
        let err = run_pipeline(ds.clone(), ContourInput::Set(ContourSet { slices }), &config, None, None).unwrap_err();
        assert!(matches!(&err, Error::Stage { stage: STAGE_NORMALIZE, source } if matches!(**source, Error::MissingContour { slice: 1 })));
        let err = run_pipeline(ds, ContourInput::File("/nonexistent/contours.json".into()), &config, None, None).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: STAGE_NORMALIZE, .. }));
    }
}
