//! Dataset preparation: masked images, annotation slice export, stratified
//! train/test splitting and the training directory layout.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::morphology::dilate;
use crate::nifti;
use crate::record::{Gender, Position, ScanRecord};
use crate::render;
use crate::volume::{BinaryMask, Label, LabelMap, Volume};

/// Per-scan seed derived from a batch seed, so selections do not depend on
/// the order scans are processed in.
pub fn derive_seed(base: u64, scan_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(scan_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Keeps voxels inside `dilate(coarse_mask, mask_dilation_voxels)` and sets
/// everything else to `masked_fill_hu`.
pub fn prepare_masked_image(v: &Volume, coarse_mask: &BinaryMask, cfg: &PipelineConfig) -> Result<Volume> {
    v.grid().ensure_same(coarse_mask.grid(), "masked image")?;
    let keep = dilate(coarse_mask, cfg.mask_dilation_voxels);
    let values = v
        .values()
        .iter()
        .zip(keep.bits())
        .map(|(&hu, &k)| if k { hu } else { cfg.masked_fill_hu })
        .collect();
    Volume::new(*v.grid(), values)
}

/// Axial slices holding at least one air voxel.
pub fn air_slices(air: &BinaryMask) -> Vec<usize> {
    let [nx, ny, nz] = air.dims();
    let plane = nx * ny;
    (0..nz)
        .filter(|&z| air.bits()[z * plane..(z + 1) * plane].iter().any(|&b| b))
        .collect()
}

/// Picks `count` distinct candidate slices uniformly at random, returned in
/// ascending order. With `count` or fewer candidates all of them are
/// returned.
pub fn select_slices(candidates: &[usize], count: usize, seed: u64) -> Vec<usize> {
    if candidates.len() <= count {
        return candidates.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, candidates.len(), count)
        .into_iter()
        .map(|k| candidates[k])
        .collect();
    picked.sort_unstable();
    picked
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceExport {
    pub scan_id: String,
    pub seed: u64,
    pub indices: Vec<usize>,
    pub files: Vec<PathBuf>,
    /// Set when fewer candidate slices existed than requested.
    pub warning: Option<String>,
}

pub fn slice_file_name(scan_id: &str, z: usize) -> String {
    format!("{scan_id}_z{z}.png")
}

/// Writes windowed, resized axial PNGs of randomly chosen air-bearing
/// slices to `out_dir`.
pub fn export_annotation_slices(
    scan_id: &str,
    v: &Volume,
    air: &BinaryMask,
    cfg: &PipelineConfig,
    rng_seed: u64,
    out_dir: &Path,
) -> Result<SliceExport> {
    v.grid().ensure_same(air.grid(), "slice export")?;
    let candidates = air_slices(air);
    if candidates.is_empty() {
        return Err(Error::NoAirSlices);
    }
    let indices = select_slices(&candidates, cfg.slices_per_scan, rng_seed);
    let warning = (indices.len() < cfg.slices_per_scan).then(|| {
        let w = format!(
            "{scan_id}: only {} slices contain air, exporting all of them instead of {}",
            indices.len(),
            cfg.slices_per_scan
        );
        log::warn!("{w}");
        w
    });
    std::fs::create_dir_all(out_dir).map_err(|e| Error::unwritable(out_dir, e))?;
    let size = cfg.export_size_px;
    let mut files = Vec::with_capacity(indices.len());
    for &z in &indices {
        let gray = render::slice_gray(v, 2, z, cfg.windowing_hu)?;
        let resized = imageops::resize(&gray, size, size, FilterType::Triangle);
        let path = out_dir.join(slice_file_name(scan_id, z));
        resized.save(&path).map_err(|e| Error::unwritable(&path, e))?;
        files.push(path);
    }
    Ok(SliceExport { scan_id: scan_id.to_string(), seed: rng_seed, indices, files, warning })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// scan_id → side, plus the seed that produced it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub assignments: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn get(&self, scan_id: &str) -> Option<Split> {
        self.assignments.get(scan_id).copied()
    }

    pub fn ids(&self, side: Split) -> impl Iterator<Item = &str> {
        self.assignments.iter().filter(move |(_, &s)| s == side).map(|(k, _)| k.as_str())
    }

    pub fn count(&self, side: Split) -> usize {
        self.ids(side).count()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::unwritable(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::unreadable(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub type Stratum = (Option<Gender>, Option<Position>);

/// Splits the included records so the train share is
/// `round(N · train_fraction)` overall and every (gender, position) stratum
/// gets the floor or ceiling of its own proportional share. Leftover train
/// slots go to the strata with the largest fractional shares. Unknown
/// gender or position forms its own stratum.
pub fn stratified_split(records: &[ScanRecord], cfg: &PipelineConfig, rng_seed: u64) -> SplitAssignment {
    let mut strata: BTreeMap<Stratum, Vec<&str>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_included()) {
        strata.entry((r.gender, r.position)).or_default().push(&r.scan_id);
    }
    let f = cfg.train_fraction;
    let total: usize = strata.values().map(Vec::len).sum();
    let target = (total as f64 * f).round() as usize;
    let mut quota: Vec<(Stratum, usize, f64)> = strata
        .iter()
        .map(|(k, ids)| {
            let share = ids.len() as f64 * f;
            (*k, share.floor() as usize, share - share.floor())
        })
        .collect();
    let mut remaining = target.saturating_sub(quota.iter().map(|q| q.1).sum());
    let mut order: Vec<usize> = (0..quota.len()).collect();
    order.sort_by(|&a, &b| quota[b].2.total_cmp(&quota[a].2).then(a.cmp(&b)));
    for k in order {
        if remaining == 0 {
            break;
        }
        if quota[k].1 < strata[&quota[k].0].len() {
            quota[k].1 += 1;
            remaining -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = SplitAssignment { seed: rng_seed, assignments: BTreeMap::new() };
    for (key, n_train, _) in quota {
        let mut ids = strata[&key].clone();
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        for (k, id) in ids.into_iter().enumerate() {
            let side = if k < n_train { Split::Train } else { Split::Test };
            out.assignments.insert(id.to_string(), side);
        }
    }
    out
}

/// Label targets of the training export.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMode {
    /// Air only: {0 background, 1 air}.
    Air,
    /// Air and fluid merged into one colon class: {0, 1}.
    #[default]
    FullMerged,
    /// Air and fluid kept apart: {0, 1 air, 2 fluid}.
    FullSeparate,
}

impl LabelMode {
    pub fn remap(self, lm: &LabelMap) -> Vec<u8> {
        lm.raw()
            .iter()
            .map(|&l| match (self, l) {
                (_, 0) => 0,
                (LabelMode::Air, 2) => 0,
                (LabelMode::FullSeparate, l) => l,
                _ => 1,
            })
            .collect()
    }

    pub fn label_names(self) -> BTreeMap<&'static str, u8> {
        match self {
            LabelMode::Air => [("background", 0), ("air", 1)].into(),
            LabelMode::FullMerged => [("background", 0), ("colon", 1)].into(),
            LabelMode::FullSeparate => [("background", 0), ("air", 1), ("fluid", 2)].into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub channel_names: BTreeMap<String, String>,
    pub labels: BTreeMap<String, u8>,
    #[serde(rename = "numTraining")]
    pub num_training: usize,
    pub file_ending: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingLayout {
    pub root: PathBuf,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub descriptor: DatasetDescriptor,
}

/// Writes `imagesTr/<id>_0000.nii.gz`, `labelsTr/<id>.nii.gz`,
/// `imagesTs/<id>_0000.nii.gz` and `dataset.json` under `root`. Only
/// included records with a split assignment are exported; images are taken
/// from `paths.image` and label maps from `paths.labels`.
pub fn export_training_layout(
    root: &Path,
    name: &str,
    records: &[ScanRecord],
    split: &SplitAssignment,
    mode: LabelMode,
) -> Result<TrainingLayout> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for r in records.iter().filter(|r| r.is_included()) {
        let Some(side) = split.get(&r.scan_id) else { continue };
        if r.paths.image.is_none() {
            return Err(Error::unreadable(Path::new(&r.scan_id), "record has no image path"));
        }
        match side {
            Split::Train if r.paths.labels.is_none() => return Err(Error::MissingLabel(r.scan_id.clone())),
            Split::Train => train.push(r),
            Split::Test => test.push(r),
        }
    }
    train.sort_by(|a, b| a.scan_id.cmp(&b.scan_id));
    test.sort_by(|a, b| a.scan_id.cmp(&b.scan_id));

    let dirs = ["imagesTr", "labelsTr", "imagesTs"].map(|d| root.join(d));
    for d in &dirs {
        std::fs::create_dir_all(d).map_err(|e| Error::unwritable(d, e))?;
    }
    let image_name = |id: &str| format!("{id}_0000.nii.gz");
    for r in &train {
        let image = nifti::load_volume(r.paths.image.as_ref().expect("checked"))?;
        nifti::save_volume(&image, &dirs[0].join(image_name(&r.scan_id)))?;
        let lm = nifti::load_labelmap(r.paths.labels.as_ref().expect("checked"))?;
        image.grid().ensure_same(lm.grid(), &format!("labels of {}", r.scan_id))?;
        let remapped = LabelMap::from_raw(*lm.grid(), mode.remap(&lm))?;
        nifti::save_labelmap(&remapped, &dirs[1].join(format!("{}.nii.gz", r.scan_id)))?;
    }
    for r in &test {
        let image = nifti::load_volume(r.paths.image.as_ref().expect("checked"))?;
        nifti::save_volume(&image, &dirs[2].join(image_name(&r.scan_id)))?;
    }
    let descriptor = DatasetDescriptor {
        name: name.to_string(),
        channel_names: [("0".to_string(), "CT".to_string())].into(),
        labels: mode.label_names().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        num_training: train.len(),
        file_ending: ".nii.gz".into(),
    };
    let path = root.join("dataset.json");
    std::fs::write(&path, serde_json::to_string_pretty(&descriptor)?).map_err(|e| Error::unwritable(&path, e))?;
    Ok(TrainingLayout {
        root: root.to_path_buf(),
        train: train.iter().map(|r| r.scan_id.clone()).collect(),
        test: test.iter().map(|r| r.scan_id.clone()).collect(),
        descriptor,
    })
}

/// Mask of the label classes a [`LabelMode`] treats as foreground.
pub fn target_mask(lm: &LabelMap, mode: LabelMode) -> BinaryMask {
    match mode {
        LabelMode::Air => lm.mask_of(Label::Air),
        _ => lm.foreground(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::ExclusionReason;
    use crate::volume::Grid;

    #[test]
    fn masked_image_examples() {
        let g = Grid::new([80, 80, 80], [1.0; 3]).unwrap();
        let v = Volume::from_fn(g, |[x, y, z]| (x + y + z) as i16);
        let cfg = PipelineConfig::default();
        assert_eq!(prepare_masked_image(&v, &BinaryMask::full(g), &cfg).unwrap(), v);
        let blank = prepare_masked_image(&v, &BinaryMask::empty(g), &cfg).unwrap();
        assert!(blank.values().iter().all(|&h| h == -1024));

        let mut one = BinaryMask::empty(g);
        one.set(40, 40, 40, true);
        let out = prepare_masked_image(&v, &one, &cfg).unwrap();
        for i in 0..g.len() {
            let [x, y, z] = g.coords(i);
            let d2 = [x, y, z].iter().map(|&c| (c as i64 - 40).pow(2)).sum::<i64>();
            let expect = if d2 <= 35 * 35 { v.values()[i] } else { -1024 };
            assert_eq!(out.values()[i], expect);
        }
    }

    #[test]
    fn slices_within_air_range() {
        let g = Grid::new([16, 16, 300], [1.0; 3]).unwrap();
        let air = BinaryMask::from_fn(g, |[x, y, z]| x == 8 && y == 8 && (100..=200).contains(&z));
        let v = Volume::filled(g, 0);
        let cfg = PipelineConfig { export_size_px: 32, ..Default::default() };
        let dir = tempfile::tempdir().unwrap();
        let e = export_annotation_slices("s1", &v, &air, &cfg, 7, dir.path()).unwrap();
        assert_eq!(e.indices.len(), 7);
        assert!(e.indices.windows(2).all(|w| w[0] < w[1]));
        assert!(e.indices.iter().all(|z| (100..=200).contains(z)));
        assert!(e.warning.is_none());
        let again = export_annotation_slices("s1", &v, &air, &cfg, 7, dir.path()).unwrap();
        assert_eq!(again.indices, e.indices);
        let img = image::open(&e.files[0]).unwrap();
        assert_eq!((img.width(), img.height()), (32, 32));
        assert!(e.files[0].ends_with(format!("s1_z{}.png", e.indices[0])));
    }

    #[test]
    fn few_air_slices_export_all_with_warning() {
        let g = Grid::new([8, 8, 20], [1.0; 3]).unwrap();
        let air = BinaryMask::from_fn(g, |[x, y, z]| x == 1 && y == 1 && [3, 9, 15].contains(&z));
        let cfg = PipelineConfig { export_size_px: 8, ..Default::default() };
        let dir = tempfile::tempdir().unwrap();
        let e = export_annotation_slices("s", &Volume::filled(g, 0), &air, &cfg, 1, dir.path()).unwrap();
        assert_eq!(e.indices, vec![3, 9, 15]);
        assert!(e.warning.is_some());
        let none = BinaryMask::empty(g);
        assert!(matches!(
            export_annotation_slices("s", &Volume::filled(g, 0), &none, &cfg, 1, dir.path()),
            Err(Error::NoAirSlices)
        ));
    }

    fn roster(n: usize) -> Vec<ScanRecord> {
        (0..n)
            .map(|i| {
                let mut r = ScanRecord::pending(format!("scan{i:04}")).with_demographics(
                    Some(if i % 2 == 0 { Position::Supine } else { Position::Prone }),
                    Some(if i % 3 == 0 { Gender::Female } else { Gender::Male }),
                    None,
                );
                r.include();
                r
            })
            .collect()
    }

    #[test]
    fn split_examples() {
        let cfg = PipelineConfig::default();
        let s = stratified_split(&roster(435), &cfg, 3);
        assert_eq!((s.count(Split::Train), s.count(Split::Test)), (290, 145));
        assert_eq!(stratified_split(&roster(435), &cfg, 3), s);

        let three = &roster(6)[..1];
        assert_eq!(stratified_split(three, &cfg, 1).count(Split::Train), 1);
        let mut same: Vec<ScanRecord> = roster(3);
        for r in &mut same {
            r.gender = Some(Gender::Female);
            r.position = Some(Position::Prone);
        }
        let s = stratified_split(&same, &cfg, 9);
        assert_eq!((s.count(Split::Train), s.count(Split::Test)), (2, 1));
        assert!(stratified_split(&[], &cfg, 0).assignments.is_empty());
    }

    #[test]
    fn split_skips_excluded() {
        let cfg = PipelineConfig::default();
        let mut rs = roster(9);
        rs[4].exclude(ExclusionReason::ExpertRejected, "");
        let s = stratified_split(&rs, &cfg, 5);
        assert_eq!(s.assignments.len(), 8);
        assert!(s.get("scan0004").is_none());
    }

    #[test]
    fn label_modes() {
        let g = Grid::new([3, 1, 1], [1.0; 3]).unwrap();
        let lm = LabelMap::from_raw(g, vec![0, 1, 2]).unwrap();
        assert_eq!(LabelMode::Air.remap(&lm), vec![0, 1, 0]);
        assert_eq!(LabelMode::FullMerged.remap(&lm), vec![0, 1, 1]);
        assert_eq!(LabelMode::FullSeparate.remap(&lm), vec![0, 1, 2]);
    }

    #[test]
    fn derived_seeds_differ_per_scan() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_eq!(derive_seed(1, "a"), derive_seed(1, "a"));
    }
}
