//! Air segmentation of a synthetic 256^3 colon phantom.
//!
//! ```bash
//! cargo run --release --example segment_phantom [OUT_DIR]
//! ```

use std::path::PathBuf;

use colonseg::air::segment_air;
use colonseg::phantom::PhantomSpec;
use colonseg::{nifti, render, Label, PipelineConfig};

fn main() -> colonseg::Result<()> {
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("colonseg-phantom"));
    std::fs::create_dir_all(&out)?;

    let cfg = PipelineConfig::default();
    let phantom = PhantomSpec::cube(256).build();
    let seg = match segment_air("phantom", &phantom.volume, &cfg) {
        Ok(s) => s,
        Err(x) => {
            eprintln!("excluded: {} ({})", x.reason, x.detail);
            return Ok(());
        }
    };
    let air = seg.labels.mask_of(Label::Air);
    println!("seed          {:?}", seg.seed);
    println!("air volume    {:.2} cm3 ({} voxels)", seg.volume_cm3, air.count());
    println!("matches truth {}", air == phantom.lumen);

    nifti::save_volume(&phantom.volume, &out.join("phantom.nii.gz"))?;
    nifti::save_labelmap(&seg.labels, &out.join("phantom_labels.nii.gz"))?;
    let [_, _, z] = seg.seed;
    for (axis, index, name) in [(2, z, "axial.png"), (1, seg.seed[1], "coronal.png"), (0, seg.seed[0], "sagittal.png")] {
        let img = render::slice_rgb(&phantom.volume, Some(&seg.labels), axis, index, cfg.windowing_hu)?;
        std::fs::write(out.join(name), render::encode_png(img)?)?;
    }
    println!("wrote volume, labels and overlays to {}", out.display());
    Ok(())
}
