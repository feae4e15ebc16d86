use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lge_quant::io::{self, write_json};
use lge_quant::metrics::{bland_altman, dice};
use lge_quant::phantom::generate;
use lge_quant::pipeline::{self as pl, ContourInput, PipelineConfig, Reference};
use lge_quant::volume::MyocardiumVolume;
use lge_quant::{svg, Error, Result};

#[derive(Parser)]
#[command(name = "lge-quant", version, about = "Infarct quantification for LGE cardiac MR stacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Phantom seed (overrides `[phantom] seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    bins: Option<usize>,
    #[arg(long, global = true)]
    reference_deg: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset with contours and ground truth.
    Phantom {
        #[command(flatten)]
        common: Common,
    },
    /// Correct slice positions; writes a realigned manifest.
    Realign {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Restack and normalize the SA stack.
    Normalize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        contours: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Graph-cut classification and post-processing of a normalize output directory.
    Classify {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// AHA segment report and bull's-eye from a labeling.
    Quantify {
        /// Labeling header (`labeling.json`).
        #[arg(long)]
        labeling: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Bland-Altman over per-case pairs, or Dice between two labelings.
    Metrics {
        /// CSV with `auto,manual` columns, one case per row.
        #[arg(long, conflicts_with_all = ["labeling", "reference"])]
        pairs: Option<PathBuf>,
        #[arg(long, requires = "reference")]
        labeling: Option<PathBuf>,
        #[arg(long, requires = "labeling")]
        reference: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Every stage in order. Without `--manifest` a phantom is generated first.
    Pipeline {
        #[arg(long, requires = "contours")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        contours: Option<PathBuf>,
        /// Truth sidecar written by `phantom`; adds Dice to the report.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.phantom.seed = s;
    }
    if let Some(v) = c.gamma {
        cfg.realign.gamma = v;
    }
    if let Some(v) = c.lambda {
        cfg.graphcut.lambda = v;
    }
    if let Some(v) = c.epsilon {
        cfg.normalize.epsilon = v;
    }
    if let Some(v) = c.max_iter {
        cfg.normalize.max_iter = v;
    }
    if let Some(v) = c.bins {
        cfg.normalize.bins = v;
    }
    if let Some(v) = c.reference_deg {
        cfg.aha.reference_deg = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })
}

/// Writes `manifest.json`, pixel files, `contours.json` and the truth sidecar.
fn write_phantom(cfg: &PipelineConfig, dir: &Path) -> Result<(PathBuf, PathBuf, PathBuf)> {
    let (ds, truth) = generate::<f64>(&cfg.phantom)?;
    let manifest = io::save_dataset(&ds, dir, "manifest.json")?;
    let contours = dir.join("contours.json");
    io::save_contours(&contours, &truth.contours)?;
    let ps = cfg.phantom.pixel_spacing_mm;
    let truth_path = io::save_truth(dir, &truth, [ps, ps, cfg.phantom.slice_spacing()])?;
    Ok((manifest, contours, truth_path))
}

fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match fields.as_slice() {
            [a, b, ..] => a.parse::<f64>().and_then(|a| b.parse::<f64>().map(|b| (a, b))),
            _ => return Err(Error::Parse { path: path.into(), message: format!("line {}: expected two columns", n + 1) }),
        };
        match parsed {
            Ok(p) => pairs.push(p),
            Err(_) if n == 0 => {}
            Err(e) => return Err(Error::Parse { path: path.into(), message: format!("line {}: {e}", n + 1) }),
        }
    }
    Ok(pairs)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Phantom { common } => {
            let cfg = load_config(&common)?;
            write_phantom(&cfg, &common.out)?;
        }
        Command::Realign { manifest, common } => {
            let cfg = load_config(&common)?;
            let mut ds = io::load_dataset::<f64>(&manifest)?;
            let result = pl::realign_dataset(&mut ds, &cfg.realign).map_err(|e| e.in_stage(pl::STAGE_REALIGN))?;
            pl::write_realign_outputs(&common.out, &ds, &result)?;
        }
        Command::Normalize { manifest, contours, common } => {
            let cfg = load_config(&common)?;
            let ds = io::load_dataset::<f64>(&manifest)?;
            let run = || -> Result<()> {
                let set = io::load_contours::<f64>(&contours, ds.sa.len())?;
                let (stack, shifted, restack) = pl::restack(&ds.sa, &set)?;
                let result = lge_quant::normalize::iterate_normalization(&stack, &shifted, &cfg.normalize.options())?;
                pl::write_normalize_outputs(&common.out, &result.stack, &shifted, &restack, &pl::normalize_report(&result), ds.slice_spacing())
            };
            run().map_err(|e| e.in_stage(pl::STAGE_NORMALIZE))?;
        }
        Command::Classify { input, common } => {
            let cfg = load_config(&common)?;
            let (sv, norm, _) = pl::load_normalize_outputs::<f64>(&input).map_err(|e| e.in_stage(pl::STAGE_CLASSIFY))?;
            let params = norm.fit.params;
            let (raw, report) = pl::classify_volume(&sv.volume, &params, &cfg.graphcut).map_err(|e| e.in_stage(pl::STAGE_CLASSIFY))?;
            pl::write_classify_outputs(&common.out, &sv.volume, &raw, &report)?;
            let outcome = lge_quant::postprocess::postprocess(&raw, &sv.volume, &sv.cavity, &params, &cfg.postprocess)
                .map_err(|e| e.in_stage(pl::STAGE_POSTPROCESS))?;
            pl::write_postprocess_outputs(&common.out, &sv.volume, &outcome)?;
        }
        Command::Quantify { labeling, common } => {
            let cfg = load_config(&common)?;
            let (header, mask, labels) = io::read_labeling(&labeling)?;
            let volume = MyocardiumVolume::new(header.dims, header.spacing_mm, vec![0.0; mask.len()], mask)?;
            let q = pl::quantify_volume(&labels, &volume, cfg.aha.reference_deg).map_err(|e| e.in_stage(pl::STAGE_QUANTIFY))?;
            pl::write_quantify_outputs(&common.out, &q, cfg.aha.reference_deg, None)?;
        }
        Command::Metrics { pairs, labeling, reference, common } => {
            mkdir(&common.out)?;
            if let Some(p) = pairs {
                let pairs = read_pairs(&p)?;
                let stats = bland_altman(&pairs)?;
                write_json(&common.out.join("bland_altman.json"), &stats)?;
                write_text(&common.out.join("bland_altman.csv"), &svg::bland_altman_csv(&pairs))?;
                write_text(&common.out.join("bland_altman_summary.csv"), &svg::bland_altman_summary_csv(&stats))?;
                write_text(&common.out.join("bland_altman.svg"), &svg::bland_altman_plot(&pairs, &stats))?;
            } else if let (Some(a), Some(b)) = (labeling, reference) {
                let (_, _, la) = io::read_labeling(&a)?;
                let (_, _, lb) = io::read_labeling(&b)?;
                let d = dice(&la.infarct_set(), &lb.infarct_set())?;
                write_json(&common.out.join("dice.json"), &serde_json::json!({ "dice": d }))?;
            } else {
                return Err(Error::InvalidConfig("metrics needs --pairs or --labeling with --reference".into()));
            }
        }
        Command::Pipeline { manifest, contours, truth, common } => {
            let cfg = load_config(&common)?;
            mkdir(&common.out)?;
            let (manifest, contours, truth) = match (manifest, contours) {
                (Some(m), Some(c)) => (m, c, truth),
                _ => {
                    let (m, c, t) = write_phantom(&cfg, &common.out.join("phantom"))?;
                    (m, c, Some(truth.unwrap_or(t)))
                }
            };
            let reference = match truth {
                Some(t) => {
                    let (_, myocardium, labels) = io::load_truth(&t)?;
                    Some(Reference { myocardium, infarct: labels.infarct_set() })
                }
                None => None,
            };
            let ds = io::load_dataset::<f64>(&manifest)?;
            let report = pl::run_pipeline(ds, ContourInput::File(contours), &cfg, Some(&common.out), reference.as_ref())?;
            if let Some(q) = &report.quantification {
                println!("I/M {:.3}%", q.volumetric_percent);
            }
            if let Some(t) = &report.truth {
                println!("Dice vs truth {:.4}", t.dice);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
