use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{evaluate, load_field, MetricsReport};
use super::metrics::format_psnr;
use crate::error::{Error, Result};
use crate::flowfield::{write_checkpoint, VectorField};
use crate::fmtrain::{mean_jacobian_norm, train, Dataset};
use crate::numerics::{derive_stream, gaussian_sample, RngStream, Tensor};
use crate::schedule::ScheduleKind;

/// Margin under the baseline's final PSNR that counts as reaching it.
pub const REACH_MARGIN_DB: f64 = 0.2;
/// Evaluation points and probes of the Jacobian-norm measure.
pub const JACOBIAN_POINTS: usize = 40;
pub const JACOBIAN_PROBES: usize = 16;
const JACOBIAN_STREAM: u64 = 0x6a61_636f_6269;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    /// Extrapolation coefficient `h`.
    H,
    /// Geometric schedule ratio.
    Lambda,
    /// Jacobian-penalty weight; each value trains its own field.
    Lipschitz,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" => Ok(Axis::H),
            "lambda" => Ok(Axis::Lambda),
            "lipschitz" => Ok(Axis::Lipschitz),
            other => Err(Error::Config(format!(
                "unknown ablation axis '{other}' (expected h, lambda or lipschitz)"
            ))),
        }
    }
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::H => "h",
            Axis::Lambda => "lambda",
            Axis::Lipschitz => "lipschitz",
        }
    }

    /// `base` with the axis set to `value`.
    pub fn apply(self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        match self {
            Axis::H => cfg.solver.h = value,
            Axis::Lambda => {
                let n = cfg.solver.schedule.iterations();
                cfg.solver.schedule = ScheduleKind::Geometric { lambda: value, n };
            }
            Axis::Lipschitz => {
                let train = cfg
                    .train
                    .as_mut()
                    .ok_or_else(|| Error::Config("the lipschitz axis needs a [train] section".into()))?;
                train.lipschitz_coeff = value;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub value: f64,
    pub report: MetricsReport,
    /// Mean over seeds of the post-warm-up iterations needed to come within
    /// [`REACH_MARGIN_DB`] of the baseline's final PSNR (`h` axis only).
    pub reach: Option<f64>,
    /// Mean Hutchinson `||J||_F^2` of the trained field (Lipschitz axis only).
    pub jacobian: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct AblationTable {
    pub axis: Axis,
    pub rows: Vec<AblationRow>,
    pub verdicts: Vec<(String, bool)>,
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,psnr_mean,psnr_std,ssim_mean,ssim_std,reach,jacobian\n");
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        for r in &self.rows {
            let a = &r.report.aggregate;
            let _ = writeln!(
                out,
                "{},{},{:.6},{},{},{},{}",
                r.value,
                format_psnr(a.psnr.mean),
                a.psnr.std,
                opt(a.ssim.map(|s| s.mean)),
                opt(a.ssim.map(|s| s.std)),
                opt(r.reach),
                opt(r.jacobian)
            );
        }
        out
    }

    pub fn verdicts_text(&self) -> String {
        let mut out = String::new();
        for (name, ok) in &self.verdicts {
            let _ = writeln!(out, "{} {name}", if *ok { "PASS" } else { "FAIL" });
        }
        out
    }

    pub fn row(&self, value: f64) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.value == value)
    }
}

/// Post-warm-up iterations each seed needs to come within `margin` of the
/// matching seed's final PSNR in `baseline`, averaged over seeds. A seed
/// that never gets there counts as `N - K + 1`.
pub fn mean_reach(report: &MetricsReport, baseline: &MetricsReport, warmup: usize, margin: f64) -> f64 {
    let mut total = 0.0;
    for (c, b) in report.curves.iter().zip(&baseline.curves) {
        let target = b.psnr.last().copied().unwrap_or(f64::INFINITY) - margin;
        let never = c.psnr.len().saturating_sub(warmup) as f64;
        let hit = c.psnr.iter().skip(warmup).position(|&p| p >= target);
        total += hit.map_or(never, |j| j as f64);
    }
    total / report.curves.len().max(1) as f64
}

/// Evaluation points `(t, t x_1 + (1 - t) xi)` for the Jacobian measure,
/// with `t` cycling through ten times in `[0.1, 0.9]`.
pub fn jacobian_points(data: &Dataset, count: usize, seed: u64) -> Result<Vec<(f64, Tensor)>> {
    let mut rng = RngStream::new(seed, JACOBIAN_STREAM);
    let shape = data.sample_shape();
    (0..count)
        .map(|i| {
            let t = 0.1 + 0.8 * (i % 10) as f64 / 9.0;
            let x1 = data.sample_one(&mut rng)?;
            let xi = gaussian_sample(&mut rng, &shape)?;
            Ok((t, x1.scale(t).axpy(1.0 - t, &xi)?))
        })
        .collect()
}

/// Trains the config's model on its data with its training settings.
pub fn train_field(cfg: &ExperimentConfig, data: &Dataset) -> Result<crate::flowfield::MlpField> {
    let train_cfg = cfg
        .train
        .as_ref()
        .ok_or_else(|| Error::Config("training needs a [train] section".into()))?;
    let model = cfg.model.clone().unwrap_or_default();
    let mut field = model.build(data.dim(), train_cfg.seed)?;
    train(&mut field, data, train_cfg)?;
    Ok(field)
}

fn is_interior_peak(values: &[f64]) -> bool {
    let best = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i);
    matches!(best, Some(i) if i > 0 && i + 1 < values.len())
}

/// One experiment per axis value on the same seeds and images, merged into
/// a table with ordering verdicts. With `out` set, each value's artifacts go
/// to `<out>/<axis>_<value>/` and the table to `<out>/ablation.csv`.
pub fn ablate(base: &ExperimentConfig, axis: Axis, values: &[f64], out: Option<&Path>) -> Result<AblationTable> {
    if values.is_empty() {
        return Err(Error::Config("an ablation needs at least one value".into()));
    }
    base.validate()?;
    let data = base.data.open()?;
    let shared = match axis {
        Axis::Lipschitz => None,
        _ => Some(load_field(base, &data)?),
    };
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let cfg = axis.apply(base, value)?;
        let (report, jacobian) = match &shared {
            Some(field) => (evaluate(&cfg, field.as_ref())?, None),
            None => {
                let field = train_field(&cfg, &data)?;
                let seed = cfg.train.as_ref().map_or(0, |t| t.seed);
                let points = jacobian_points(&data, JACOBIAN_POINTS, seed)?;
                let mut rng = RngStream::new(seed, derive_stream(JACOBIAN_STREAM, 1));
                let jac = mean_jacobian_norm(&field as &dyn VectorField, &points, &mut rng, JACOBIAN_PROBES)?;
                if let Some(dir) = out {
                    write_checkpoint(&dir.join(format!("{}_{value}", axis.name())).join("field.ckpt"), &field)?;
                }
                (evaluate(&cfg, &field)?, Some(jac))
            }
        };
        if let Some(dir) = out {
            report.write(&cfg, &dir.join(format!("{}_{value}", axis.name())))?;
        }
        rows.push(AblationRow {
            value,
            report,
            reach: None,
            jacobian,
        });
    }

    let psnrs: Vec<f64> = rows.iter().map(|r| r.report.aggregate.psnr.mean).collect();
    let mut verdicts = Vec::new();
    match axis {
        Axis::H => {
            let base_idx = rows.iter().position(|r| r.value == 0.0).unwrap_or(0);
            let baseline = rows[base_idx].report.clone();
            for r in rows.iter_mut() {
                r.reach = Some(mean_reach(&r.report, &baseline, base.solver.warmup, REACH_MARGIN_DB));
            }
            let mut order: Vec<&AblationRow> = rows.iter().collect();
            order.sort_by(|a, b| a.value.total_cmp(&b.value));
            let monotone = order.windows(2).all(|w| w[1].reach <= w[0].reach);
            verdicts.push(("larger h reaches the baseline final PSNR no later".to_string(), monotone));
        }
        Axis::Lambda => {
            let mut order: Vec<(f64, f64)> = values.iter().copied().zip(psnrs.iter().copied()).collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let sorted: Vec<f64> = order.iter().map(|p| p.1).collect();
            verdicts.push(("PSNR peaks at an interior lambda".to_string(), is_interior_peak(&sorted)));
        }
        Axis::Lipschitz => {
            let base_idx = rows.iter().position(|r| r.value == 0.0).unwrap_or(0);
            let (j0, p0) = (rows[base_idx].jacobian, psnrs[base_idx]);
            let smaller = rows
                .iter()
                .zip(&psnrs)
                .filter(|(r, _)| r.value > 0.0)
                .all(|(r, _)| r.jacobian < j0);
            let within = rows.iter().zip(&psnrs).all(|(_, p)| *p >= p0 - 0.5);
            verdicts.push(("penalized fields have smaller Jacobian norms".to_string(), smaller));
            verdicts.push(("penalized PSNR within 0.5 dB of unpenalized or better".to_string(), within));
        }
    }
    let table = AblationTable { axis, rows, verdicts };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("ablation.csv");
        fs::write(&path, table.to_csv()).map_err(|e| Error::io(&path, e))?;
        let path = dir.join("verdicts.txt");
        fs::write(&path, table.verdicts_text()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(table)
}
