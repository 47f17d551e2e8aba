//! Fluid post-processing on a phantom whose raw fluid prediction holds a
//! true pocket, a distant false positive and a small satellite blob.
//!
//! ```bash
//! cargo run --release --example fluid_postprocess
//! ```

use colonseg::air::segment_air;
use colonseg::fluid::{fluid_postprocess_stages, FluidContext};
use colonseg::phantom::PhantomSpec;
use colonseg::record::Position;
use colonseg::{Label, PipelineConfig};

fn main() -> colonseg::Result<()> {
    let cfg = PipelineConfig::default();
    let phantom = PhantomSpec::cube(256).build();
    let seg = segment_air("phantom", &phantom.volume, &cfg).expect("phantom has a seed");
    let air = seg.labels.mask_of(Label::Air);

    let ctx = FluidContext::new(&air, &phantom.fluid_prediction, Some(Position::Supine), &cfg)?;
    let stages = fluid_postprocess_stages(&ctx)?;
    println!("raw prediction   {:>6} voxels", phantom.fluid_prediction.count());
    println!("component filter {:>6}", stages.filtered.count());
    println!("gravity slab     {:>6}", stages.gravity.count());
    println!("hole filling     {:>6}", stages.hole_filled.count());
    println!("smoothing        {:>6}", stages.smoothed.count());
    println!("sagittal bridges {:>6}", stages.connected.count());

    let fluid = stages.labels.mask_of(Label::Fluid);
    println!("final fluid      {:>6} (pocket {})", fluid.count(), phantom.pocket.count());
    println!("pocket recovered {}", fluid == phantom.pocket);
    Ok(())
}
