//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Run with `cargo test --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use colonseg::air::{find_seed, region_grow, segment_air};
use colonseg::dataset::{stratified_split, LabelMode, Split};
use colonseg::fluid::{fluid_postprocess, FluidContext};
use colonseg::manifest::{apply_verdict, report_funnel, EventBody, Manifest};
use colonseg::metrics::{dice, evaluate, surface_distances, Metric};
use colonseg::morphology::{connected_components, dilate, remove_small_islands};
use colonseg::phantom::PhantomSpec;
use colonseg::pipeline::{run_pipeline, with_workers, RunOptions};
use colonseg::record::{ExclusionReason, Gender, Position, ScanRecord, ScanStatus, Verdict};
use colonseg::volume::{threshold_binarize, BinaryMask, Grid, Label, Volume};
use colonseg::{nifti, Connectivity, PipelineConfig};
use rand::Rng;
use sha2::{Digest, Sha256};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn region_growing_oracle() -> Result<String, String> {
    let mut rng = common::rng(11);
    let mut voxels = 0;
    for case in 0..120 {
        let dims = common::random_dims(&mut rng, 20);
        let density = rng.random_range(0.2..0.8);
        let m = common::random_mask(&mut rng, dims, [1.0; 3], density);
        let Some(i) = m.indices().nth(rng.random_range(0..m.count().max(1))) else { continue };
        let seed = m.grid().coords(i);
        for (conn, d2) in [(Connectivity::TwentySix, 3), (Connectivity::Six, 1), (Connectivity::Eighteen, 2)] {
            let got = region_grow(&m, seed, conn).map_err(|e| e.to_string())?;
            let want = common::flood_fill(m.bits(), dims, seed, d2);
            let bad = got.bits().iter().zip(&want).filter(|(a, b)| a != b).count();
            ensure(bad == 0, || format!("case {case} {conn:?}: {bad} mismatched voxels"))?;
        }
        voxels += m.grid().len();
    }
    Ok(format!("120 volumes up to 20^3, {voxels} voxels, 0 mismatches"))
}

fn connectivity_semantics() -> Result<String, String> {
    let grid = Grid::new([3, 3, 3], [1.0; 3]).unwrap();
    let mut corners = 0;
    for o in common::offsets(3) {
        let mut m = BinaryMask::empty(grid);
        m.set(1, 1, 1, true);
        m.set((1 + o[0]) as usize, (1 + o[1]) as usize, (1 + o[2]) as usize, true);
        let l1 = o.iter().map(|v| v.abs()).sum::<i64>();
        let n26 = connected_components(&m, Connectivity::TwentySix).count();
        let n18 = connected_components(&m, Connectivity::Eighteen).count();
        let n6 = connected_components(&m, Connectivity::Six).count();
        ensure(n26 == 1, || format!("offset {o:?}: {n26} components under 26-connectivity"))?;
        ensure(n6 == if l1 == 1 { 1 } else { 2 }, || format!("offset {o:?}: {n6} components under 6-connectivity"))?;
        ensure(n18 == if l1 <= 2 { 1 } else { 2 }, || format!("offset {o:?}: {n18} components under 18-connectivity"))?;
        let grown = region_grow(&m, [1, 1, 1], Connectivity::TwentySix).map_err(|e| e.to_string())?.count();
        ensure(grown == 2, || format!("offset {o:?}: grew {grown} voxels"))?;
        corners += (l1 == 3) as usize;
    }
    Ok(format!("26 offsets checked ({corners} corner-only pairs: 1 component at 26, 2 at 6)"))
}

fn metric_oracle() -> Result<String, String> {
    let mut rng = common::rng(23);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    while pairs < 60 {
        let dims = common::random_dims(&mut rng, 12);
        let spacing = [rng.random_range(0.3..2.5), rng.random_range(0.3..2.5), rng.random_range(0.3..2.5)];
        let (da, db) = (rng.random_range(0.05..0.7), rng.random_range(0.05..0.7));
        let a = common::random_mask(&mut rng, dims, spacing, da);
        let b = common::random_mask(&mut rng, dims, spacing, db);
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let got = surface_distances(&a, &b).map_err(|e| e.to_string())?;
        let (assd, masd, hd95) = common::brute_surface(&a, &b);
        for (name, x, y) in [("ASSD", got.assd_mm, assd), ("MASD", got.masd_mm, masd), ("HD95", got.hd95_mm, hd95)] {
            worst = worst.max((x - y).abs());
            ensure((x - y).abs() <= 1e-9, || format!("pair {pairs}: {name} {x} vs oracle {y}"))?;
        }
        let same = surface_distances(&a, &a).map_err(|e| e.to_string())?;
        ensure(same.assd_mm == 0.0 && same.masd_mm == 0.0 && same.hd95_mm == 0.0, || "identical masks gave non-zero distance".into())?;
        ensure(dice(&a, &a).unwrap() == 1.0, || "identical masks gave Dice != 1".into())?;
        pairs += 1;
    }
    Ok(format!("60 anisotropic pairs up to 12^3, max deviation {worst:.2e} mm"))
}

fn dilation_oracle() -> Result<String, String> {
    let mut rng = common::rng(37);
    let mut checked = 0;
    for case in 0..60 {
        let dims = common::random_dims(&mut rng, 16);
        let density = rng.random_range(0.001..0.05);
        let m = common::random_mask(&mut rng, dims, [1.0; 3], density);
        for r in [0.0, 1.0, 3.0, 5.0] {
            let got = dilate(&m, r);
            let want = common::brute_dilate(m.bits(), dims, r);
            let bad = got.bits().iter().zip(&want).filter(|(a, b)| a != b).count();
            ensure(bad == 0, || format!("case {case} r={r}: {bad} mismatched voxels"))?;
            checked += 1;
        }
    }
    Ok(format!("60 masks up to 16^3 x radii {{0,1,3,5}} = {checked} dilations, exact"))
}

fn island_boundary() -> Result<String, String> {
    let grid = Grid::new([60, 60, 60], [1.0; 3]).unwrap();
    // 20 x 10 x 10 = 2000 voxels, and the same block minus one corner.
    let keep = BinaryMask::from_fn(grid, |[x, y, z]| x < 20 && y < 10 && z < 10);
    let drop = BinaryMask::from_fn(grid, |[x, y, z]| {
        (30..50).contains(&x) && (40..50).contains(&y) && (40..50).contains(&z) && !(x == 49 && y == 49 && z == 49)
    });
    ensure(keep.count() == 2000 && drop.count() == 1999, || "construction sizes".into())?;
    let cfg = PipelineConfig::default();
    let out = remove_small_islands(&keep.union(&drop).unwrap(), cfg.island_min_voxels);
    ensure(out == keep, || format!("kept {} voxels, expected the 2000-voxel block only", out.count()))?;
    Ok(format!("threshold {}: 1999 removed, 2000 kept", cfg.island_min_voxels))
}

fn end_to_end_phantom() -> Result<String, String> {
    let start = Instant::now();
    let result = with_workers(1, || -> Result<String, String> {
        let cfg = PipelineConfig::default();
        let ph = PhantomSpec::cube(256).build();
        let seg = segment_air("phantom", &ph.volume, &cfg).map_err(|x| format!("{}: {}", x.reason, x.detail))?;
        let air = seg.labels.mask_of(Label::Air);
        ensure(air == ph.lumen, || format!("lumen differs: {} grown vs {} truth", air.count(), ph.lumen.count()))?;
        let ctx = FluidContext::new(&air, &ph.fluid_prediction, Some(Position::Supine), &cfg).map_err(|e| e.to_string())?;
        let labels = fluid_postprocess(&ctx).map_err(|e| e.to_string())?;
        let fluid = labels.mask_of(Label::Fluid);
        ensure(fluid == ph.pocket, || format!("fluid has {} voxels, pocket {}", fluid.count(), ph.pocket.count()))?;
        ensure(fluid.intersection(&ph.noise_blob).unwrap().is_empty(), || "noise blob survived".into())?;
        ensure(fluid.intersection(&ph.satellite).unwrap().is_empty(), || "satellite survived".into())?;
        let truth = ph.truth();
        let mut detail = Vec::new();
        for mode in [LabelMode::Air, LabelMode::FullMerged] {
            let pred: BTreeMap<String, BinaryMask> = [("phantom".to_string(), colonseg::dataset::target_mask(&labels, mode))].into();
            let reference = [("phantom".to_string(), colonseg::dataset::target_mask(&truth, mode))].into();
            let report = evaluate(&pred, &reference, false, &cfg).map_err(|e| e.to_string())?;
            for a in &report.methods[0].aggregates {
                let want = if a.metric == Metric::Dice { 1.0 } else { 0.0 };
                ensure(a.median == Some(want), || format!("{mode:?} {}: median {:?}", a.metric.as_str(), a.median))?;
            }
            detail.push(format!("{mode:?}"));
        }
        let fluid_pred = [("phantom".to_string(), fluid.clone())].into();
        let fluid_ref = [("phantom".to_string(), ph.pocket.clone())].into();
        let report = evaluate(&fluid_pred, &fluid_ref, false, &cfg).map_err(|e| e.to_string())?;
        ensure(
            report.methods[0].aggregates.iter().all(|a| a.median == Some(if a.metric == Metric::Dice { 1.0 } else { 0.0 })),
            || "fluid medians not exact".into(),
        )?;
        Ok(format!("seed {:?}, lumen {} voxels exact, pocket kept, distractors removed, medians 0 for air/full/fluid", seg.seed, air.count()))
    })
    .map_err(|e| e.to_string())??;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs <= 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{result}; {secs:.1} s on one worker"))
}

fn write_small(dir: &Path, name: &str, dims: [usize; 3]) {
    let v = Volume::filled(Grid::new(dims, [0.8; 3]).unwrap(), 40);
    nifti::save_volume(&v, &dir.join(name)).unwrap();
}

fn digest(path: &Path) -> String {
    let d = Sha256::digest(std::fs::read(path).unwrap());
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Statuses, label file digests and events with run-specific parts removed.
fn fingerprint(m: &Manifest, out: &Path) -> Vec<String> {
    let mut lines: Vec<String> = m
        .records()
        .map(|r| {
            let labels = r.paths.labels.as_deref().map(digest).unwrap_or_default();
            format!("{} {:?} {:?} {} {labels}", r.scan_id, r.status, r.exclusion_reason, r.exclusion_detail)
        })
        .collect();
    let prefix = out.to_string_lossy().to_string();
    for e in m.events() {
        let body = match &e.body {
            EventBody::Stage { scan_id, seeds, outputs, detail } => {
                let outs: Vec<String> = outputs.iter().map(|p| p.to_string_lossy().replace(&prefix, "<out>")).collect();
                format!("{scan_id:?} {seeds:?} {outs:?} {}", detail.replace(&prefix, "<out>"))
            }
            EventBody::Snapshot { record } => {
                let mut r = record.clone();
                r.paths.labels = r.paths.labels.map(|p| p.to_string_lossy().replace(&prefix, "<out>").into());
                serde_json::to_string(&r).unwrap()
            }
        };
        lines.push(format!("{} {} {body}", e.stage, e.config_hash));
    }
    lines
}

fn exclusion_funnel() -> Result<String, String> {
    let cfg = PipelineConfig::default();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = tmp.path().join("scans");
    std::fs::create_dir(&input).unwrap();
    let clinical = |name: &str, spec: PhantomSpec| nifti::save_volume(&spec.volume(), &input.join(name)).unwrap();
    clinical("a_valid.nii.gz", PhantomSpec::clinical(350));
    clinical("b_rejected.nii.gz", PhantomSpec::clinical(350));
    clinical("c_no_seed.nii.gz", PhantomSpec::clinical(350).with_minor_radius(0.0));
    clinical("d_small.nii.gz", PhantomSpec::clinical(350).with_minor_radius(2.0));
    clinical("e_large.nii.gz", PhantomSpec::clinical(350).with_minor_radius(7.0));
    write_small(&input, "f_few_slices.nii.gz", [512, 512, 349]);
    write_small(&input, "g_many_slices.nii.gz", [16, 16, 701]);
    write_small(&input, "h_small_inplane.nii.gz", [511, 512, 400]);
    write_small(&input, "i_disrupted.nii.gz", [8, 8, 8]);
    let broken = input.join("i_disrupted.nii.gz");
    let bytes = std::fs::read(&broken).unwrap();
    std::fs::write(&broken, &bytes[..bytes.len() / 2]).unwrap();

    let mut prints = Vec::new();
    let mut funnels = Vec::new();
    for (k, workers) in [1usize, 1, 2].into_iter().enumerate() {
        let out = tmp.path().join(format!("run{k}"));
        let opts = RunOptions { output_dir: out.clone(), workers, ..Default::default() };
        let mut m = run_pipeline(&input, &cfg, &opts).map_err(|e| e.to_string())?;
        apply_verdict(&mut m, "b_rejected", Verdict::Rejected, "lumen incomplete", &cfg.hash()).map_err(|e| e.to_string())?;
        let reopened = Manifest::load(&opts.manifest_path()).map_err(|e| e.to_string())?;
        let f = report_funnel(&reopened);
        ensure(f.is_partition() && f.total == 9, || format!("funnel does not partition: {f:?}"))?;
        prints.push(fingerprint(&reopened, &out));
        funnels.push(f);
    }
    let f = &funnels[0];
    for r in ExclusionReason::ALL {
        ensure(f.excluded[&r] == 1, || format!("{r}: {} scans", f.excluded[&r]))?;
    }
    ensure(f.included == 1, || format!("{} included", f.included))?;
    ensure(prints[0] == prints[1], || "rerun with one worker differs".into())?;
    ensure(prints[0] == prints[2], || "two workers differ from one".into())?;
    let buckets: Vec<String> = f.nonzero().into_iter().map(|(k, v)| format!("{k}:{v}")).collect();
    Ok(format!("9 scans -> {}; identical over 2 reruns x {{1,2}} workers", buckets.join(" ")))
}

fn split_stratification() -> Result<String, String> {
    let cfg = PipelineConfig::default();
    let mut rng = common::rng(5);
    let genders = [None, Some(Gender::Female), Some(Gender::Male), Some(Gender::Other)];
    let positions = [None, Some(Position::Supine), Some(Position::Prone)];
    for roster_no in 0..40 {
        let n = rng.random_range(0..400);
        let records: Vec<ScanRecord> = (0..n)
            .map(|i| {
                let mut r = ScanRecord::pending(format!("r{roster_no}_{i:04}")).with_demographics(
                    positions[rng.random_range(0..3)],
                    genders[rng.random_range(0..4)],
                    None,
                );
                if rng.random_bool(0.9) {
                    r.include();
                } else {
                    r.exclude(ExclusionReason::ExpertRejected, "");
                }
                r
            })
            .collect();
        let split = stratified_split(&records, &cfg, roster_no);
        let included: Vec<&ScanRecord> = records.iter().filter(|r| r.status == ScanStatus::Included).collect();
        ensure(split.assignments.len() == included.len(), || format!("roster {roster_no}: not a partition"))?;
        let mut strata: BTreeMap<(Option<Gender>, Option<Position>), (usize, usize)> = BTreeMap::new();
        for r in &included {
            let e = strata.entry((r.gender, r.position)).or_default();
            e.0 += 1;
            e.1 += (split.get(&r.scan_id) == Some(Split::Train)) as usize;
        }
        for (k, (size, train)) in strata {
            let share = size as f64 * cfg.train_fraction;
            ensure((train as f64 - share).abs() < 1.0, || format!("roster {roster_no} stratum {k:?}: {train}/{size}"))?;
        }
        let target = (included.len() as f64 * cfg.train_fraction).round() as usize;
        ensure(split.count(Split::Train) == target, || format!("roster {roster_no}: global train {}", split.count(Split::Train)))?;
        ensure(stratified_split(&records, &cfg, roster_no) == split, || "not deterministic".into())?;
    }
    let roster: Vec<ScanRecord> = (0..435)
        .map(|i| {
            let mut r = ScanRecord::pending(format!("s{i:03}"))
                .with_demographics(Some(positions[1 + i % 2].unwrap()), Some(genders[1 + (i / 2) % 2].unwrap()), None);
            r.include();
            r
        })
        .collect();
    let s = stratified_split(&roster, &cfg, 2024);
    let (tr, te) = (s.count(Split::Train), s.count(Split::Test));
    ensure((tr, te) == (290, 145), || format!("435 split into {tr}/{te}"))?;
    Ok(format!("40 random rosters within 1 scan per stratum; 435 -> {tr}/{te}"))
}

fn performance() -> Result<String, String> {
    let cfg = PipelineConfig::default();
    let v = PhantomSpec::clinical(500).volume();
    let (secs, grown, comps) = with_workers(1, || {
        let start = Instant::now();
        let air = threshold_binarize(&v, cfg.air_threshold_hu, cfg.air_threshold_inclusive);
        let seed = find_seed(&air, &cfg).expect("seed");
        let grown = region_grow(&air, seed, Connectivity::TwentySix).unwrap();
        let labeling = connected_components(&air, Connectivity::TwentySix);
        (start.elapsed().as_secs_f64(), grown.count(), labeling.count())
    })
    .map_err(|e| e.to_string())?;
    ensure(secs <= 10.0, || format!("{secs:.2} s"))?;
    Ok(format!("512x512x500: {grown} lumen voxels, {comps} air components in {secs:.2} s"))
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("region growing equals flood-fill oracle", region_growing_oracle),
        ("connectivity semantics over all 26 offsets", connectivity_semantics),
        ("surface metrics equal brute-force oracle", metric_oracle),
        ("dilation equals brute-force distance set", dilation_oracle),
        ("island filter boundary at 2000 voxels", island_boundary),
        ("end-to-end 256^3 phantom", end_to_end_phantom),
        ("exclusion funnel partitions and is deterministic", exclusion_funnel),
        ("split stratification", split_stratification),
        ("performance: threshold + grow + labeling", performance),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
