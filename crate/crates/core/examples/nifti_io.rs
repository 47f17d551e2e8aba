//! Writing and reading volumes and label maps, and what the reader
//! normalises.
//!
//! ```bash
//! cargo run --release --example nifti_io [FILE.nii[.gz]]
//! ```

use colonseg::volume::threshold_binarize;
use colonseg::{nifti, Grid, LabelMap, Volume};

fn main() -> colonseg::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let grid = Grid::with_origin([64, 48, 32], [0.7, 0.7, 1.0], [-22.4, 16.8, -100.0])?;
            let v = Volume::from_fn(grid, |[x, y, z]| if (x as i32 - 32).pow(2) + (y as i32 - 24).pow(2) < 100 && z > 4 { -1000 } else { 30 });
            let p = std::env::temp_dir().join("colonseg-example.nii.gz");
            nifti::save_volume(&v, &p)?;
            let air = threshold_binarize(&v, -800, true);
            nifti::save_labelmap(&LabelMap::from_masks(&air, None)?, &std::env::temp_dir().join("colonseg-example_labels.nii.gz"))?;
            p
        }
    };
    let raw = nifti::read_raw(&path)?;
    println!("file        {}", path.display());
    println!("stored dims {:?}", raw.dims);
    if let Some(a) = raw.affine {
        println!("affine      {:?}", a);
    }
    let v = nifti::load_volume(&path)?;
    let g = v.grid();
    println!("canonical   dims {:?} spacing {:?} origin {:?}", g.dims, g.spacing, g.origin);
    let (lo, hi) = v.values().iter().fold((i16::MAX, i16::MIN), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    println!("HU range    {lo}..={hi}");
    println!("air voxels  {}", threshold_binarize(&v, -800, true).count());
    Ok(())
}
