use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::median_ci;
use super::surface::{dice, surface_distances_with, SurfaceDistanceResult};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::morphology::remove_small_islands;
use crate::volume::BinaryMask;

/// Metric values for one scan. Distances are `None` when either mask is
/// empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanMetrics {
    pub scan_id: String,
    pub dice: f64,
    pub assd_mm: Option<f64>,
    pub masd_mm: Option<f64>,
    pub hd95_mm: Option<f64>,
    #[serde(skip)]
    pub distances: Option<SurfaceDistanceResult>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Dice,
    Assd,
    Masd,
    Hd95,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Dice, Metric::Assd, Metric::Masd, Metric::Hd95];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Dice => "dice",
            Metric::Assd => "assd",
            Metric::Masd => "masd",
            Metric::Hd95 => "hd95",
        }
    }

    fn value(self, s: &ScanMetrics) -> Option<f64> {
        match self {
            Metric::Dice => Some(s.dice),
            Metric::Assd => s.assd_mm,
            Metric::Masd => s.masd_mm,
            Metric::Hd95 => s.hd95_mm,
        }
    }
}

/// Median and CI of one metric over the common scans. `ci_lo`/`ci_hi` are
/// absent when too few values exist for the requested level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub metric: Metric,
    pub n: usize,
    pub median: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    /// Free-form method tag, e.g. `NN-Air` or `TS-Full`.
    pub method: String,
    pub refined: bool,
    pub scans: Vec<ScanMetrics>,
    pub aggregates: Vec<Aggregate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ci_level: f64,
    /// Scans evaluated by every method; aggregates use only these.
    pub common_scans: Vec<String>,
    pub methods: Vec<MethodReport>,
}

/// Per-scan metrics for one pair of masks, refining the prediction first
/// when asked.
pub fn scan_metrics(scan_id: &str, pred: &BinaryMask, reference: &BinaryMask, refine: bool, cfg: &PipelineConfig) -> Result<ScanMetrics> {
    let refined;
    let pred = if refine {
        refined = remove_small_islands(pred, cfg.island_min_voxels);
        &refined
    } else {
        pred
    };
    let d = dice(pred, reference)?;
    let distances = match surface_distances_with(pred, reference, cfg.hd_percentile, cfg.hd_pooled) {
        Ok(r) => Some(r),
        Err(Error::MetricUndefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ScanMetrics {
        scan_id: scan_id.to_string(),
        dice: d,
        assd_mm: distances.as_ref().map(|r| r.assd_mm),
        masd_mm: distances.as_ref().map(|r| r.masd_mm),
        hd95_mm: distances.as_ref().map(|r| r.hd95_mm),
        distances,
    })
}

/// Scores every method against the reference set. Each method maps scan id
/// to prediction; scans missing from any method or from the reference are
/// left out of the aggregates (per-scan rows are still reported).
pub fn evaluate_methods(
    methods: &[(String, &BTreeMap<String, BinaryMask>)],
    reference: &BTreeMap<String, BinaryMask>,
    refine: bool,
    cfg: &PipelineConfig,
) -> Result<MetricsReport> {
    let mut common: BTreeSet<&String> = reference.keys().collect();
    for (_, preds) in methods {
        common.retain(|id| preds.contains_key(*id));
    }
    let mut reports = Vec::new();
    for (tag, preds) in methods {
        let ids: Vec<&String> = preds.keys().filter(|id| reference.contains_key(*id)).collect();
        let scans = ids
            .par_iter()
            .map(|id| scan_metrics(id, &preds[*id], &reference[*id], refine, cfg))
            .collect::<Result<Vec<_>>>()?;
        let aggregates = Metric::ALL
            .iter()
            .map(|&metric| {
                let values: Vec<f64> = scans
                    .iter()
                    .filter(|s| common.contains(&s.scan_id))
                    .filter_map(|s| metric.value(s))
                    .collect();
                aggregate(metric, &values, cfg.ci_level)
            })
            .collect();
        reports.push(MethodReport {
            method: tag.clone(),
            refined: refine,
            scans,
            aggregates,
        });
    }
    Ok(MetricsReport {
        ci_level: cfg.ci_level,
        common_scans: common.into_iter().cloned().collect(),
        methods: reports,
    })
}

/// Single-method evaluation tagged `pred`.
pub fn evaluate(
    pred_set: &BTreeMap<String, BinaryMask>,
    ref_set: &BTreeMap<String, BinaryMask>,
    refine: bool,
    cfg: &PipelineConfig,
) -> Result<MetricsReport> {
    evaluate_methods(&[("pred".to_string(), pred_set)], ref_set, refine, cfg)
}

fn aggregate(metric: Metric, values: &[f64], level: f64) -> Aggregate {
    let n = values.len();
    match median_ci(values, level) {
        Ok(ci) => Aggregate { metric, n, median: Some(ci.median), ci_lo: Some(ci.lo), ci_hi: Some(ci.hi) },
        Err(_) => Aggregate {
            metric,
            n,
            median: super::stats::median(values).ok(),
            ci_lo: None,
            ci_hi: None,
        },
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl MetricsReport {
    pub fn method(&self, tag: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == tag)
    }

    /// One row per method, metric: the table layout of the summary.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::unwritable(path, e))?;
        w.write_record(["method", "refined", "metric", "n", "median", "ci_lo", "ci_hi"])?;
        for m in &self.methods {
            for a in &m.aggregates {
                w.write_record([
                    m.method.clone(),
                    m.refined.to_string(),
                    a.metric.as_str().to_string(),
                    a.n.to_string(),
                    fmt(a.median),
                    fmt(a.ci_lo),
                    fmt(a.ci_hi),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_scans_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::unwritable(path, e))?;
        w.write_record(["method", "refined", "scan_id", "dice", "assd_mm", "masd_mm", "hd95_mm"])?;
        for m in &self.methods {
            for s in &m.scans {
                w.write_record([
                    m.method.clone(),
                    m.refined.to_string(),
                    s.scan_id.clone(),
                    format!("{:.6}", s.dice),
                    fmt(s.assd_mm),
                    fmt(s.masd_mm),
                    fmt(s.hd95_mm),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::unwritable(path, e))
    }

    /// Per-scan histograms of the directed boundary distances, in bins of
    /// `bin_mm`.
    pub fn write_histograms_csv(&self, path: &Path, bin_mm: f64) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::unwritable(path, e))?;
        w.write_record(["method", "scan_id", "bin_lo_mm", "bin_hi_mm", "pred_to_ref", "ref_to_pred"])?;
        for m in &self.methods {
            for s in &m.scans {
                let Some(d) = &s.distances else { continue };
                let (ha, hb) = (histogram(&d.a_to_b, bin_mm), histogram(&d.b_to_a, bin_mm));
                for k in 0..ha.len().max(hb.len()) {
                    w.write_record([
                        m.method.clone(),
                        s.scan_id.clone(),
                        format!("{:.3}", k as f64 * bin_mm),
                        format!("{:.3}", (k + 1) as f64 * bin_mm),
                        ha.get(k).copied().unwrap_or(0).to_string(),
                        hb.get(k).copied().unwrap_or(0).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn histogram(values: &[f64], bin: f64) -> Vec<usize> {
    let mut h = Vec::new();
    for &v in values {
        let k = (v / bin).floor() as usize;
        if h.len() <= k {
            h.resize(k + 1, 0);
        }
        h[k] += 1;
    }
    h
}
