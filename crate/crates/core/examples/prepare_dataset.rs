//! Batch run over a directory of small synthetic scans, then annotation
//! slices, a stratified split and the training directory layout.
//!
//! ```bash
//! cargo run --release --example prepare_dataset [OUT_DIR]
//! ```

use std::path::PathBuf;

use colonseg::dataset::{LabelMode, Split};
use colonseg::manifest::report_funnel;
use colonseg::pipeline::{export_slices_stage, export_training_stage, run_pipeline, split_stage, RunOptions};
use colonseg::{nifti, Grid, PipelineConfig, Volume};

/// 48 x 48 x `nz` scan with a straight air tube of the given half-width.
fn scan(nz: usize, half: usize) -> Volume {
    let grid = Grid::new([48, 48, nz], [1.0; 3]).expect("grid");
    Volume::from_fn(grid, |[x, y, z]| {
        let inside = x.abs_diff(24) <= half && y.abs_diff(24) <= half && (3..nz.saturating_sub(3)).contains(&z);
        if inside { -1000 } else { 35 }
    })
}

fn main() -> colonseg::Result<()> {
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("colonseg-dataset"));
    let input = out.join("scans");
    std::fs::create_dir_all(&input)?;
    let roster = out.join("roster.csv");
    let mut csv = String::from("scan_id,position,gender,age\n");
    for i in 0..12 {
        let id = format!("ct{i:02}");
        let half = if i == 11 { 0 } else { 2 + i % 3 };
        let nz = if i == 10 { 12 } else { 40 };
        nifti::save_volume(&scan(nz, half), &input.join(format!("{id}.nii.gz")))?;
        let position = if i % 2 == 0 { "supine" } else { "prone" };
        let gender = if i % 3 == 0 { "female" } else { "male" };
        csv.push_str(&format!("{id},{position},{gender},{}\n", 50 + i));
    }
    std::fs::write(&roster, csv)?;

    // Thresholds scaled to the toy scans.
    let cfg = PipelineConfig {
        min_axial_slices: 30,
        min_inplane_px: 48,
        seed_z_lo: 0,
        seed_z_hi: 39,
        volume_min_cm3: 0.5,
        volume_max_cm3: 5.0,
        island_min_voxels: 20,
        slices_per_scan: 4,
        export_size_px: 128,
        ..Default::default()
    };
    let opts = RunOptions { roster: Some(roster), workers: 2, ..RunOptions::new(out.join("work")) };
    let mut manifest = run_pipeline(&input, &cfg, &opts)?;
    for (bucket, n) in report_funnel(&manifest).nonzero() {
        println!("{bucket:<18} {n}");
    }

    let slices = export_slices_stage(&mut manifest, &out.join("slices"), &cfg, 42, 2)?;
    println!("annotation slices: {}", slices.iter().map(|s| s.files.len()).sum::<usize>());

    let split = split_stage(&mut manifest, &out.join("splits.json"), &cfg, 42)?;
    println!("split: {} train / {} test", split.count(Split::Train), split.count(Split::Test));

    let layout = export_training_stage(&mut manifest, &split, &out.join("Dataset001_Colon"), "Colon", LabelMode::FullMerged, &cfg)?;
    println!("training layout in {} ({} train, {} test)", layout.root.display(), layout.train.len(), layout.test.len());
    println!("manifest: {}", opts.manifest_path().display());
    Ok(())
}
