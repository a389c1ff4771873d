use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, FieldSpec};
use super::metrics::{format_psnr, psnr, ssim};
use super::netpbm::write_image;
use crate::degrade::{DegradationOperator, FidelityProblem};
use crate::error::{Error, Result};
use crate::flowfield::{read_checkpoint, VectorField};
use crate::fmtrain::Dataset;
use crate::numerics::{derive_stream, mean_and_std, RngStream, Tensor};
use crate::solver::{cauchy_diagnostic, restore};

/// Stream of the clean test images.
pub const IMAGE_STREAM: u64 = 0x696d_6167_6573;
/// Stream of the observation noise.
pub const OBSERVE_STREAM: u64 = 0x6f62_7365_7276;

/// Metrics of one restored test image.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageRow {
    pub seed: u64,
    pub image: usize,
    /// Metrics of the solver's starting point (`A^T w` by default).
    pub psnr_initial: f64,
    pub ssim_initial: Option<f64>,
    pub psnr: f64,
    pub ssim: Option<f64>,
    /// `sum_k ||x_{k+1} - x_k||` over the run.
    pub step_sum: f64,
}

/// Mean and standard deviation across seeds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_and_std(values);
        Self { mean, std }
    }
}

/// Aggregates over seeds of the per-seed image means.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub psnr: Summary,
    pub ssim: Option<Summary>,
    pub psnr_initial: Summary,
    pub ssim_initial: Option<Summary>,
    pub step_sum: Summary,
}

impl Aggregate {
    /// Averages each seed's images first, then takes mean and std over seeds.
    pub fn from_rows(rows: &[ImageRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("no rows to aggregate"));
        }
        let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let per_seed = |f: &dyn Fn(&ImageRow) -> Option<f64>| -> Option<Vec<f64>> {
            seeds
                .iter()
                .map(|s| {
                    let vals: Option<Vec<f64>> = rows.iter().filter(|r| r.seed == *s).map(f).collect();
                    vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect()
        };
        let required = |f: &dyn Fn(&ImageRow) -> f64| Summary::of(&per_seed(&|r| Some(f(r))).expect("always present"));
        Ok(Self {
            psnr: required(&|r| r.psnr),
            ssim: per_seed(&|r| r.ssim).map(|v| Summary::of(&v)),
            psnr_initial: required(&|r| r.psnr_initial),
            ssim_initial: per_seed(&|r| r.ssim_initial).map(|v| Summary::of(&v)),
            step_sum: required(&|r| r.step_sum),
        })
    }
}

/// One seed's PSNR at every iteration, averaged over its images.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedCurve {
    pub seed: u64,
    pub psnr: Vec<f64>,
}

/// The images of one run, kept for the artifact writer.
#[derive(Clone, Debug)]
pub struct ImageOutputs {
    pub seed: u64,
    pub image: usize,
    pub clean: Tensor,
    pub initial: Tensor,
    pub restored: Tensor,
}

#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub config_hash: String,
    pub rows: Vec<ImageRow>,
    pub aggregate: Aggregate,
    pub curves: Vec<SeedCurve>,
    pub outputs: Vec<ImageOutputs>,
    /// Wall-clock seconds; reported in `report.toml` only, never in CSVs.
    pub runtime_secs: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

impl MetricsReport {
    /// Rows of one seed: `image,psnr_initial,ssim_initial,psnr,ssim,step_sum`.
    pub fn seed_csv(&self, seed: u64) -> String {
        let mut out = String::from("image,psnr_initial,ssim_initial,psnr,ssim,step_sum\n");
        for r in self.rows.iter().filter(|r| r.seed == seed) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.10e}",
                r.image,
                format_psnr(r.psnr_initial),
                opt(r.ssim_initial),
                format_psnr(r.psnr),
                opt(r.ssim),
                r.step_sum
            );
        }
        out
    }

    /// `metric,mean,std` over seeds.
    pub fn summary_csv(&self) -> String {
        let a = &self.aggregate;
        let mut out = String::from("metric,mean,std\n");
        let mut line = |name: &str, s: Option<Summary>, psnr_like: bool| {
            if let Some(s) = s {
                let mean = if psnr_like {
                    format_psnr(s.mean)
                } else {
                    format!("{:.6}", s.mean)
                };
                let _ = writeln!(out, "{name},{mean},{:.6}", s.std);
            }
        };
        line("psnr", Some(a.psnr), true);
        line("ssim", a.ssim, false);
        line("psnr_initial", Some(a.psnr_initial), true);
        line("ssim_initial", a.ssim_initial, false);
        out
    }

    /// `k,seed_<s>...`: the per-seed mean PSNR at every iteration.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("k");
        for c in &self.curves {
            let _ = write!(out, ",seed_{}", c.seed);
        }
        out.push('\n');
        let len = self.curves.first().map_or(0, |c| c.psnr.len());
        for k in 0..len {
            let _ = write!(out, "{k}");
            for c in &self.curves {
                let _ = write!(out, ",{}", format_psnr(c.psnr[k]));
            }
            out.push('\n');
        }
        out
    }

    fn report_toml(&self, cfg: &ExperimentConfig) -> String {
        let a = &self.aggregate;
        let mut out = String::new();
        let _ = writeln!(out, "config_hash = \"{}\"", self.config_hash);
        let _ = writeln!(out, "runtime_secs = {:.3}", self.runtime_secs);
        let _ = writeln!(out, "seeds = {}", cfg.seeds.len());
        let _ = writeln!(out, "images_per_seed = {}", cfg.images);
        let _ = writeln!(out, "psnr_mean = \"{}\"", format_psnr(a.psnr.mean));
        let _ = writeln!(out, "psnr_std = {:.6}", a.psnr.std);
        if let Some(s) = a.ssim {
            let _ = writeln!(out, "ssim_mean = {:.6}", s.mean);
            let _ = writeln!(out, "ssim_std = {:.6}", s.std);
        }
        out
    }

    /// Writes per-seed CSVs, curves, the summary, images and `report.toml`.
    /// Every file except `report.toml` is a pure function of the config.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, text: &str| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))
        };
        put("config.toml", &cfg.to_toml_string()?)?;
        for &seed in &cfg.seeds {
            put(&format!("seed_{seed}.csv"), &self.seed_csv(seed))?;
        }
        put("curves.csv", &self.curves_csv())?;
        put("summary.csv", &self.summary_csv())?;
        let images = dir.join("images");
        for o in &self.outputs {
            if o.clean.image_dims().is_err() {
                continue;
            }
            fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
            for (tag, t) in [("clean", &o.clean), ("initial", &o.initial), ("restored", &o.restored)] {
                let ext = if t.shape().len() == 3 { "ppm" } else { "pgm" };
                write_image(&images.join(format!("seed{}_img{}_{tag}.{ext}", o.seed, o.image)), t)?;
            }
        }
        put("report.toml", &self.report_toml(cfg))
    }
}

/// The field named by the config.
pub fn load_field(cfg: &ExperimentConfig, data: &Dataset) -> Result<Box<dyn VectorField>> {
    match &cfg.field {
        FieldSpec::Checkpoint { path } => Ok(Box::new(read_checkpoint(path)?)),
        FieldSpec::Exact => data
            .exact_field()
            .ok_or_else(|| Error::Config("the data source has no exact field; give a checkpoint".into())),
    }
}

/// Clean image `image` of `seed` and its degraded observation.
pub fn test_problem(
    cfg: &ExperimentConfig,
    data: &Dataset,
    seed: u64,
    image: usize,
) -> Result<(Tensor, FidelityProblem)> {
    let clean = data.sample_one(&mut RngStream::new(seed, derive_stream(IMAGE_STREAM, image as u64)))?;
    let op = DegradationOperator::new(&cfg.operator_kind(), clean.shape(), cfg.noise())
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = RngStream::new(seed, derive_stream(OBSERVE_STREAM, image as u64));
    let problem = FidelityProblem::observe(op, &clean, &mut rng)?;
    Ok((clean, problem))
}

/// Solver seed of one test image.
pub fn run_seed(seed: u64, image: usize) -> u64 {
    derive_stream(seed, image as u64)
}

struct Single {
    row: ImageRow,
    curve: Vec<f64>,
    outputs: ImageOutputs,
}

fn run_single(cfg: &ExperimentConfig, data: &Dataset, field: &dyn VectorField, seed: u64, image: usize) -> Result<Single> {
    let (clean, problem) = test_problem(cfg, data, seed, image)?;
    let solver = cfg.solver.build(cfg.task, run_seed(seed, image))?;
    let run = restore(&problem, field, &solver, Some(&clean))?;
    if let Some((step, reason)) = run.divergence {
        return Err(Error::Diverged {
            step,
            reason: format!("seed {seed}, image {image}: {reason}"),
        });
    }
    let traj = &run.trajectory;
    let first = &traj.records[0];
    let restored = traj.last_state().expect("non-empty").clone();
    let curve = traj.records.iter().map(|r| r.psnr.unwrap_or(f64::NAN)).collect();
    let row = ImageRow {
        seed,
        image,
        psnr_initial: psnr(&clean, &first.state)?,
        ssim_initial: first.ssim,
        psnr: psnr(&clean, &restored)?,
        ssim: if clean.shape().len() >= 2 { Some(ssim(&clean, &restored)?) } else { None },
        step_sum: cauchy_diagnostic(traj)?.total(),
    };
    Ok(Single {
        row,
        curve,
        outputs: ImageOutputs {
            seed,
            image,
            clean,
            initial: first.state.clone(),
            restored,
        },
    })
}

/// Degrades, restores and scores every `(seed, image)` pair with `field`.
/// Runs are independent and execute in parallel; results are collected in
/// seed-then-image order, so the report does not depend on scheduling.
pub fn evaluate(cfg: &ExperimentConfig, field: &dyn VectorField) -> Result<MetricsReport> {
    cfg.validate()?;
    let start = Instant::now();
    let data = cfg.data.open()?;
    let jobs: Vec<(u64, usize)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| (0..cfg.images).map(move |i| (s, i)))
        .collect();
    let singles = jobs
        .par_iter()
        .map(|&(s, i)| run_single(cfg, &data, field, s, i))
        .collect::<Result<Vec<_>>>()?;

    let mut curves = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let mine: Vec<&Single> = singles.iter().filter(|r| r.row.seed == seed).collect();
        let len = mine[0].curve.len();
        let psnr = (0..len)
            .map(|k| mine.iter().map(|r| r.curve[k]).sum::<f64>() / mine.len() as f64)
            .collect();
        curves.push(SeedCurve { seed, psnr });
    }
    let rows: Vec<ImageRow> = singles.iter().map(|s| s.row.clone()).collect();
    Ok(MetricsReport {
        config_hash: cfg.hash(),
        aggregate: Aggregate::from_rows(&rows)?,
        rows,
        curves,
        outputs: singles.into_iter().map(|s| s.outputs).collect(),
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// [`evaluate`] with the configured field, writing artifacts to `out_dir`
/// when it is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let data = cfg.data.open()?;
    let field = load_field(cfg, &data)?;
    let report = evaluate(cfg, field.as_ref())?;
    if !cfg.out_dir.as_os_str().is_empty() {
        report.write(cfg, &cfg.out_dir)?;
    }
    Ok(report)
}
