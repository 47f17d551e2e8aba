//! Batch driver: runs the per-scan stages over a directory of volumes and
//! records every outcome in the manifest.
//!
//! Scans are processed on a worker pool; results are appended to the
//! manifest in scan id order once all workers finish, so the log does not
//! depend on scheduling.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::air::{segment_air, validate_scan};
use crate::config::PipelineConfig;
use crate::dataset::{self, LabelMode};
use crate::error::{Error, Result};
use crate::fluid::{self, FluidContext};
use crate::manifest::{Event, Manifest};
use crate::morphology::remove_small_islands;
use crate::nifti;
use crate::record::{ExclusionReason, Gender, Position, ScanRecord, ScanStatus, Verdict};
use crate::volume::{BinaryMask, Label, LabelMap};

/// Scan id of a volume file: the file name without `.nii` / `.nii.gz`.
pub fn scan_id_of(path: &Path) -> Option<String> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_suffix(".nii.gz").or_else(|| name.strip_suffix(".nii"))?;
    (!stem.is_empty()).then(|| stem.to_string())
}

/// `(scan_id, path)` of every NIfTI file in `dir`, sorted by id.
pub fn scan_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::unreadable(dir, e))? {
        let path = entry?.path();
        if path.is_file() {
            if let Some(id) = scan_id_of(&path) {
                out.push((id, path));
            }
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
pub struct RosterRow {
    pub scan_id: String,
    #[serde(default)]
    pub position: Option<Position>,
    #[serde(default)]
    pub gender: Option<Gender>,
    #[serde(default)]
    pub age: Option<u32>,
}

/// Demographics from a CSV with header `scan_id,position,gender,age`.
/// Empty cells are unknown.
pub fn load_roster(path: &Path) -> Result<BTreeMap<String, RosterRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::unreadable(path, e))?;
    let mut out = BTreeMap::new();
    for row in r.deserialize() {
        let row: RosterRow = row?;
        out.insert(row.scan_id.clone(), row);
    }
    Ok(out)
}

/// Runs `f` on a pool of `workers` threads (0 picks the rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Label maps go to `<output_dir>/labels/<id>.nii.gz`.
    pub output_dir: PathBuf,
    pub workers: usize,
    /// Fluid predictions: `<id>.nii[.gz]` masks or `<id>_z<k>.png` slices.
    pub fluid_dir: Option<PathBuf>,
    pub roster: Option<PathBuf>,
    /// Defaults to `<output_dir>/manifest.jsonl`.
    pub manifest: Option<PathBuf>,
}

impl RunOptions {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        RunOptions { output_dir: output_dir.into(), ..Default::default() }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest.clone().unwrap_or_else(|| self.output_dir.join("manifest.jsonl"))
    }

    fn labels_dir(&self) -> PathBuf {
        self.output_dir.join("labels")
    }
}

struct Outcome {
    record: ScanRecord,
    events: Vec<Event>,
}

fn disrupted(e: &Error) -> bool {
    matches!(e, Error::UnreadableFile { .. } | Error::UnsupportedFormat(_) | Error::MissingOrientation(_) | Error::InvalidGeometry(_) | Error::InvalidLabelValue { .. })
}

/// Loads fluid predictions for a scan, if any exist under `dir`.
pub fn find_fluid_prediction(dir: &Path, scan_id: &str, grid: &crate::volume::Grid) -> Result<Option<(BinaryMask, PathBuf)>> {
    for ext in ["nii.gz", "nii"] {
        let p = dir.join(format!("{scan_id}.{ext}"));
        if p.is_file() {
            return Ok(Some((fluid::import_fluid_volume(&p, grid)?, p)));
        }
    }
    let prefix = format!("{scan_id}_z");
    let has_png = std::fs::read_dir(dir)
        .map_err(|e| Error::unreadable(dir, e))?
        .filter_map(|e| e.ok())
        .any(|e| e.file_name().to_str().is_some_and(|n| n.starts_with(&prefix) && n.ends_with(".png")));
    if has_png {
        return Ok(Some((fluid::import_fluid_slices(dir, scan_id, grid)?, dir.to_path_buf())));
    }
    Ok(None)
}

fn process_scan(id: &str, path: &Path, base: ScanRecord, cfg: &PipelineConfig, hash: &str, opts: &RunOptions) -> Result<Outcome> {
    let mut record = base;
    record.paths.image = Some(path.to_path_buf());
    let mut events = Vec::new();
    let volume = match nifti::load_volume(path) {
        Ok(v) => v,
        Err(e) if disrupted(&e) => {
            record.exclude(ExclusionReason::DisruptedFormat, e.to_string());
            return Ok(Outcome { record, events });
        }
        Err(e) => return Err(e),
    };
    if let Err(reason) = validate_scan(&volume, cfg) {
        record.exclude(reason, format!("dims {:?}", volume.dims()));
        return Ok(Outcome { record, events });
    }
    let seg = match segment_air(id, &volume, cfg) {
        Ok(s) => s,
        Err(x) => {
            record.exclude(x.reason, x.detail);
            return Ok(Outcome { record, events });
        }
    };
    drop(volume);
    let mut labels = seg.labels;
    let mut detail = format!("seed {:?}, air volume {:.3} cm3", seg.seed, seg.volume_cm3);
    if let Some(dir) = &opts.fluid_dir {
        if let Some((raw, src)) = find_fluid_prediction(dir, id, labels.grid())? {
            let air = labels.mask_of(Label::Air);
            let ctx = FluidContext::new(&air, &raw, record.position, cfg)?;
            labels = fluid::fluid_postprocess(&ctx)?;
            detail.push_str(&format!(", fluid {} voxels", labels.count(Label::Fluid)));
            record.paths.fluid = Some(src);
        }
    }
    let out = opts.labels_dir().join(format!("{id}.nii.gz"));
    nifti::save_labelmap(&labels, &out)?;
    events.push(Event::stage("segment-air", hash, Some(id)).with_output(&out).with_detail(detail));
    record.paths.labels = Some(out);
    record.include();
    Ok(Outcome { record, events })
}

/// Carries an earlier expert verdict over to a freshly processed record.
fn keep_verdict(mut next: ScanRecord, prior: Option<&ScanRecord>) -> ScanRecord {
    let Some(prior) = prior else { return next };
    if next.is_included() {
        match prior.verdict {
            Some(Verdict::Rejected) => {
                next.exclude(ExclusionReason::ExpertRejected, prior.note.clone());
                next.verdict = prior.verdict;
                next.note = prior.note.clone();
            }
            Some(Verdict::Accepted) => {
                next.verdict = prior.verdict;
                next.note = prior.note.clone();
            }
            None => {}
        }
    }
    next
}

/// Load, validate, segment air, optionally post-process fluid and save the
/// label map for every volume in `input_dir`. Per-scan problems become
/// exclusions; only systemic failures (e.g. an unwritable output) abort.
pub fn run_pipeline(input_dir: &Path, cfg: &PipelineConfig, opts: &RunOptions) -> Result<Manifest> {
    cfg.validate()?;
    let files = scan_files(input_dir)?;
    let roster = opts.roster.as_deref().map(load_roster).transpose()?.unwrap_or_default();
    std::fs::create_dir_all(opts.labels_dir()).map_err(|e| Error::unwritable(opts.labels_dir(), e))?;
    let mut manifest = Manifest::open(&opts.manifest_path())?;
    let hash = cfg.hash();
    let bases: Vec<ScanRecord> = files
        .iter()
        .map(|(id, _)| {
            let row = roster.get(id);
            ScanRecord::pending(id.as_str()).with_demographics(
                row.and_then(|r| r.position),
                row.and_then(|r| r.gender),
                row.and_then(|r| r.age),
            )
        })
        .collect();
    log::info!("processing {} scans with {} workers", files.len(), opts.workers);
    let outcomes = with_workers(opts.workers, || {
        files
            .par_iter()
            .zip(bases)
            .map(|((id, path), base)| process_scan(id, path, base, cfg, &hash, opts))
            .collect::<Result<Vec<_>>>()
    })??;
    manifest.append(Event::stage("run", &hash, None).with_detail(format!("{} scans from {}", files.len(), input_dir.display())))?;
    for o in outcomes {
        for e in o.events {
            manifest.append(e)?;
        }
        let prior = manifest.record(&o.record.scan_id).cloned();
        let rec = keep_verdict(o.record, prior.as_ref());
        manifest.record_snapshot("run", &hash, rec)?;
    }
    Ok(manifest)
}

/// Registers the volumes in `input_dir` and applies the dimension rules.
/// Passing scans stay pending.
pub fn validate_inputs(manifest: &mut Manifest, input_dir: &Path, cfg: &PipelineConfig, roster: Option<&Path>, workers: usize) -> Result<()> {
    let files = scan_files(input_dir)?;
    let roster = roster.map(load_roster).transpose()?.unwrap_or_default();
    let hash = cfg.hash();
    let results = with_workers(workers, || {
        files
            .par_iter()
            .map(|(id, path)| {
                let row = roster.get(id);
                let mut r = ScanRecord::pending(id.as_str()).with_demographics(
                    row.and_then(|r| r.position),
                    row.and_then(|r| r.gender),
                    row.and_then(|r| r.age),
                );
                r.paths.image = Some(path.clone());
                match nifti::load_volume(path) {
                    Ok(v) => {
                        if let Err(reason) = validate_scan(&v, cfg) {
                            r.exclude(reason, format!("dims {:?}", v.dims()));
                        }
                    }
                    Err(e) if disrupted(&e) => r.exclude(ExclusionReason::DisruptedFormat, e.to_string()),
                    Err(e) => return Err(e),
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    for r in results {
        manifest.record_snapshot("validate", &hash, r)?;
    }
    Ok(())
}

fn active(manifest: &Manifest, statuses: &[ScanStatus]) -> Vec<ScanRecord> {
    manifest.records().filter(|r| statuses.contains(&r.status)).cloned().collect()
}

/// Segments air for pending (and re-segments included) scans.
pub fn segment_air_stage(manifest: &mut Manifest, cfg: &PipelineConfig, opts: &RunOptions) -> Result<()> {
    let hash = cfg.hash();
    std::fs::create_dir_all(opts.labels_dir()).map_err(|e| Error::unwritable(opts.labels_dir(), e))?;
    let todo = active(manifest, &[ScanStatus::Pending, ScanStatus::Included]);
    let air_only = RunOptions { fluid_dir: None, ..opts.clone() };
    let outcomes = with_workers(opts.workers, || {
        todo.par_iter()
            .map(|r| {
                let path = r.paths.image.clone().ok_or_else(|| Error::unreadable(Path::new(&r.scan_id), "no image path"))?;
                process_scan(&r.scan_id, &path, r.clone(), cfg, &hash, &air_only)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    for o in outcomes {
        for e in o.events {
            manifest.append(e)?;
        }
        let prior = manifest.record(&o.record.scan_id).cloned();
        let rec = keep_verdict(o.record, prior.as_ref());
        manifest.record_snapshot("segment-air", &hash, rec)?;
    }
    Ok(())
}

/// Post-processes imported fluid predictions for included scans and
/// rewrites their label maps.
pub fn fluid_stage(manifest: &mut Manifest, fluid_dir: &Path, cfg: &PipelineConfig, opts: &RunOptions) -> Result<()> {
    let hash = cfg.hash();
    let todo = active(manifest, &[ScanStatus::Included]);
    let results = with_workers(opts.workers, || {
        todo.par_iter()
            .map(|r| -> Result<Option<(ScanRecord, Event)>> {
                let Some(labels_path) = &r.paths.labels else { return Ok(None) };
                let labels = nifti::load_labelmap(labels_path)?;
                let Some((raw, src)) = find_fluid_prediction(fluid_dir, &r.scan_id, labels.grid())? else {
                    return Ok(None);
                };
                let air = labels.mask_of(Label::Air);
                let ctx = FluidContext::new(&air, &raw, r.position, cfg)?;
                let out = fluid::fluid_postprocess(&ctx)?;
                nifti::save_labelmap(&out, labels_path)?;
                let mut next = r.clone();
                next.paths.fluid = Some(src);
                let ev = Event::stage("fluid-post", &hash, Some(&r.scan_id))
                    .with_output(labels_path)
                    .with_detail(format!("fluid {} voxels", out.count(Label::Fluid)));
                Ok(Some((next, ev)))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    for (rec, ev) in results.into_iter().flatten() {
        manifest.append(ev)?;
        manifest.record_snapshot("fluid-post", &hash, rec)?;
    }
    Ok(())
}

/// Writes `<out_dir>/<id>.nii.gz` masked images for included scans that
/// have a coarse mask `<mask_dir>/<id>.nii[.gz]`.
pub fn prep_masks_stage(manifest: &mut Manifest, mask_dir: &Path, out_dir: &Path, cfg: &PipelineConfig, workers: usize) -> Result<()> {
    let hash = cfg.hash();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::unwritable(out_dir, e))?;
    let todo = active(manifest, &[ScanStatus::Included]);
    let events = with_workers(workers, || {
        todo.par_iter()
            .map(|r| -> Result<Option<Event>> {
                let Some(mask_path) = ["nii.gz", "nii"].iter().map(|e| mask_dir.join(format!("{}.{e}", r.scan_id))).find(|p| p.is_file()) else {
                    log::warn!("{}: no coarse mask in {}", r.scan_id, mask_dir.display());
                    return Ok(None);
                };
                let image = nifti::load_volume(r.paths.image.as_ref().ok_or_else(|| Error::unreadable(Path::new(&r.scan_id), "no image path"))?)?;
                let mask = nifti::load_mask(&mask_path)?;
                let masked = dataset::prepare_masked_image(&image, &mask, cfg)?;
                let out = out_dir.join(format!("{}.nii.gz", r.scan_id));
                nifti::save_volume(&masked, &out)?;
                Ok(Some(Event::stage("prep-masks", &hash, Some(&r.scan_id)).with_output(out)))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    for e in events.into_iter().flatten() {
        manifest.append(e)?;
    }
    Ok(())
}

/// Exports annotation slices for included scans; each scan's seed is
/// derived from `seed` and its id.
pub fn export_slices_stage(manifest: &mut Manifest, out_dir: &Path, cfg: &PipelineConfig, seed: u64, workers: usize) -> Result<Vec<dataset::SliceExport>> {
    let hash = cfg.hash();
    let todo = active(manifest, &[ScanStatus::Included]);
    let exports = with_workers(workers, || {
        todo.par_iter()
            .map(|r| -> Result<Option<dataset::SliceExport>> {
                let (Some(img), Some(lab)) = (&r.paths.image, &r.paths.labels) else { return Ok(None) };
                let v = nifti::load_volume(img)?;
                let air = nifti::load_labelmap(lab)?.mask_of(Label::Air);
                let s = dataset::derive_seed(seed, &r.scan_id);
                Ok(Some(dataset::export_annotation_slices(&r.scan_id, &v, &air, cfg, s, out_dir)?))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let exports: Vec<_> = exports.into_iter().flatten().collect();
    for x in &exports {
        let mut ev = Event::stage("export-slices", &hash, Some(&x.scan_id)).with_seed("slices", x.seed);
        for f in &x.files {
            ev = ev.with_output(f);
        }
        if let Some(w) = &x.warning {
            ev = ev.with_detail(w.clone());
        }
        manifest.append(ev)?;
    }
    Ok(exports)
}

pub fn split_stage(manifest: &mut Manifest, out: &Path, cfg: &PipelineConfig, seed: u64) -> Result<dataset::SplitAssignment> {
    let records: Vec<ScanRecord> = manifest.records().cloned().collect();
    let split = dataset::stratified_split(&records, cfg, seed);
    split.save(out)?;
    manifest.append(
        Event::stage("split", &cfg.hash(), None)
            .with_seed("split", seed)
            .with_output(out)
            .with_detail(format!(
                "{} train / {} test",
                split.count(dataset::Split::Train),
                split.count(dataset::Split::Test)
            )),
    )?;
    Ok(split)
}

pub fn export_training_stage(
    manifest: &mut Manifest,
    split: &dataset::SplitAssignment,
    root: &Path,
    name: &str,
    mode: LabelMode,
    cfg: &PipelineConfig,
) -> Result<dataset::TrainingLayout> {
    let records: Vec<ScanRecord> = manifest.records().cloned().collect();
    let layout = dataset::export_training_layout(root, name, &records, split, mode)?;
    manifest.append(
        Event::stage("export-training", &cfg.hash(), None)
            .with_seed("split", split.seed)
            .with_output(root)
            .with_detail(format!("{mode:?}: {} train, {} test", layout.train.len(), layout.test.len())),
    )?;
    Ok(layout)
}

/// Loads every `<id>.nii[.gz]` label map in `dir` and keeps the target
/// classes of `mode`.
pub fn load_label_dir(dir: &Path, mode: LabelMode) -> Result<BTreeMap<String, BinaryMask>> {
    scan_files(dir)?
        .into_iter()
        .map(|(id, p)| Ok((id, dataset::target_mask(&nifti::load_labelmap(&p)?, mode))))
        .collect()
}

/// Island filtering of every label map in `input` into `output`. Each label
/// class is filtered on its own.
pub fn refine_dir(input: &Path, output: &Path, cfg: &PipelineConfig, workers: usize) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(output).map_err(|e| Error::unwritable(output, e))?;
    let files = scan_files(input)?;
    with_workers(workers, || {
        files
            .par_iter()
            .map(|(id, p)| {
                let lm = nifti::load_labelmap(p)?;
                let air = remove_small_islands(&lm.mask_of(Label::Air), cfg.island_min_voxels);
                let fl = remove_small_islands(&lm.mask_of(Label::Fluid), cfg.island_min_voxels);
                let out = output.join(format!("{id}.nii.gz"));
                nifti::save_labelmap(&LabelMap::from_masks(&air, Some(&fl))?, &out)?;
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })?
}
