//! Review API over a processed phantom batch. Browse
//! `http://127.0.0.1:8080/api/scans` or fetch a slice such as
//! `/api/scans/phantom/slice?axis=2&index=63&overlay=labels`.
//!
//! ```bash
//! cargo run --release --example review_server [PORT]
//! ```

use colonseg::phantom::PhantomSpec;
use colonseg::pipeline::{run_pipeline, RunOptions};
use colonseg::server::{serve, AppState};
use colonseg::{nifti, PipelineConfig};

#[tokio::main]
async fn main() -> colonseg::Result<()> {
    let port: u16 = std::env::args().nth(1).and_then(|p| p.parse().ok()).unwrap_or(8080);
    let root = std::env::temp_dir().join("colonseg-review");
    let input = root.join("scans");
    std::fs::create_dir_all(&input)?;
    nifti::save_volume(&PhantomSpec::cube(256).volume(), &input.join("phantom.nii.gz"))?;

    // The phantom is smaller than a clinical scan.
    let cfg = PipelineConfig { min_axial_slices: 256, min_inplane_px: 256, ..Default::default() };
    let manifest = tokio::task::spawn_blocking({
        let cfg = cfg.clone();
        move || run_pipeline(&input, &cfg, &RunOptions::new(root.join("out")))
    })
    .await
    .expect("pipeline task")?;

    let addr = ([127, 0, 0, 1], port).into();
    println!("serving {} scans on http://{addr}", manifest.len());
    serve(AppState::new(manifest, cfg, None), addr).await
}
