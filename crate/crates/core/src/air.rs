//! Air-filled colon segmentation: scan gating, seed placement, region
//! growing and volume gating.

use std::collections::VecDeque;

use crate::config::{Connectivity, PipelineConfig};
use crate::error::{Error, Result};
use crate::record::{ExclusionReason, ExclusionRecord};
use crate::volume::{physical_volume_cm3, threshold_binarize, BinaryMask, LabelMap, Volume};

/// Checks the dimensional inclusion rules. Bounds are inclusive.
pub fn validate_scan(v: &Volume, cfg: &PipelineConfig) -> Result<(), ExclusionReason> {
    validate_dims(v.dims(), cfg)
}

pub fn validate_dims(dims: [usize; 3], cfg: &PipelineConfig) -> Result<(), ExclusionReason> {
    let [nx, ny, nz] = dims;
    if nz < cfg.min_axial_slices {
        Err(ExclusionReason::DimsTooFewSlices)
    } else if nz > cfg.max_axial_slices {
        Err(ExclusionReason::DimsTooManySlices)
    } else if nx < cfg.min_inplane_px || ny < cfg.min_inplane_px {
        Err(ExclusionReason::DimsInPlaneTooSmall)
    } else {
        Ok(())
    }
}

/// First air voxel met when scanning upward through the search region.
///
/// The region is the midline column `x = nx / 2`, rows within
/// `seed_band_halfwidth_px` of `ny / 2`, and slices `seed_z_lo..=seed_z_hi`.
/// Slices are visited in ascending z and rows in ascending y.
pub fn find_seed(m: &BinaryMask, cfg: &PipelineConfig) -> Option<[usize; 3]> {
    let [nx, ny, nz] = m.dims();
    let x = nx / 2;
    let y_mid = ny / 2;
    let y_lo = y_mid.saturating_sub(cfg.seed_band_halfwidth_px);
    let y_hi = (y_mid + cfg.seed_band_halfwidth_px).min(ny - 1);
    if cfg.seed_z_lo >= nz {
        return None;
    }
    let z_hi = cfg.seed_z_hi.min(nz - 1);
    (cfg.seed_z_lo..=z_hi)
        .flat_map(|z| (y_lo..=y_hi).map(move |y| [x, y, z]))
        .find(|&[x, y, z]| m.get(x, y, z))
}

/// Neighbour steps expressed both as voxel offsets and flat-index deltas.
pub(crate) struct Stencil {
    pub offsets: Vec<[i64; 3]>,
    pub deltas: Vec<isize>,
}

impl Stencil {
    pub fn new(dims: [usize; 3], conn: Connectivity) -> Self {
        let offsets = conn.offsets();
        let sx = 1isize;
        let sy = dims[0] as isize;
        let sz = (dims[0] * dims[1]) as isize;
        let deltas = offsets
            .iter()
            .map(|o| o[0] as isize * sx + o[1] as isize * sy + o[2] as isize * sz)
            .collect();
        Stencil { offsets, deltas }
    }
}

#[inline]
pub(crate) fn is_interior(c: [usize; 3], dims: [usize; 3]) -> bool {
    (0..3).all(|a| c[a] > 0 && c[a] + 1 < dims[a])
}

/// The connected component of `m` containing `seed`.
pub fn region_grow(m: &BinaryMask, seed: [usize; 3], conn: Connectivity) -> Result<BinaryMask> {
    let grid = *m.grid();
    if !grid.contains([seed[0] as i64, seed[1] as i64, seed[2] as i64]) || !m.get(seed[0], seed[1], seed[2]) {
        return Err(Error::SeedNotInForeground(seed));
    }
    let dims = grid.dims;
    let stencil = Stencil::new(dims, conn);
    let bits = m.bits();
    let mut out = vec![false; grid.len()];
    let mut queue = VecDeque::new();
    let start = grid.index(seed[0], seed[1], seed[2]);
    out[start] = true;
    queue.push_back(start);
    while let Some(i) = queue.pop_front() {
        let c = grid.coords(i);
        if is_interior(c, dims) {
            for &d in &stencil.deltas {
                let j = (i as isize + d) as usize;
                if bits[j] && !out[j] {
                    out[j] = true;
                    queue.push_back(j);
                }
            }
        } else {
            for o in &stencil.offsets {
                let p = [c[0] as i64 + o[0], c[1] as i64 + o[1], c[2] as i64 + o[2]];
                if grid.contains(p) {
                    let j = grid.index(p[0] as usize, p[1] as usize, p[2] as usize);
                    if bits[j] && !out[j] {
                        out[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    BinaryMask::from_bits(grid, out)
}

/// Rejects components whose physical volume lies outside the configured
/// bounds. A volume equal to either bound is accepted.
pub fn volume_gate(m: &BinaryMask, cfg: &PipelineConfig) -> Result<f64, (ExclusionReason, f64)> {
    gate_cm3(physical_volume_cm3(m), cfg)
}

pub fn gate_cm3(v: f64, cfg: &PipelineConfig) -> Result<f64, (ExclusionReason, f64)> {
    if v > cfg.volume_max_cm3 {
        Err((ExclusionReason::VolumeTooLarge, v))
    } else if v < cfg.volume_min_cm3 {
        Err((ExclusionReason::VolumeTooSmall, v))
    } else {
        Ok(v)
    }
}

/// Successful air segmentation.
#[derive(Clone, Debug)]
pub struct AirSegmentation {
    pub labels: LabelMap,
    pub seed: [usize; 3],
    pub volume_cm3: f64,
}

/// Threshold, seed, grow and gate.
pub fn segment_air(scan_id: &str, v: &Volume, cfg: &PipelineConfig) -> Result<AirSegmentation, ExclusionRecord> {
    let air = threshold_binarize(v, cfg.air_threshold_hu, cfg.air_threshold_inclusive);
    let seed = find_seed(&air, cfg).ok_or_else(|| {
        ExclusionRecord::new(
            scan_id,
            ExclusionReason::SeedNotFound,
            format!(
                "no voxel <= {} HU at x={} y={}±{} z={}..={}",
                cfg.air_threshold_hu,
                v.dims()[0] / 2,
                v.dims()[1] / 2,
                cfg.seed_band_halfwidth_px,
                cfg.seed_z_lo,
                cfg.seed_z_hi
            ),
        )
    })?;
    let grown = region_grow(&air, seed, cfg.connectivity).expect("seed lies in the thresholded mask");
    drop(air);
    let volume_cm3 = volume_gate(&grown, cfg).map_err(|(reason, v)| {
        ExclusionRecord::new(
            scan_id,
            reason,
            format!(
                "grown volume {v:.3} cm3 outside [{}, {}] from seed {seed:?}",
                cfg.volume_min_cm3, cfg.volume_max_cm3
            ),
        )
    })?;
    let labels = LabelMap::from_masks(&grown, None).expect("same grid");
    Ok(AirSegmentation { labels, seed, volume_cm3 })
}
