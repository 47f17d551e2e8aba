//! Fluid post-processing: turns an imported fluid prediction into the fluid
//! class of the final label map, next to an already segmented air lumen.

use std::path::Path;

use image::imageops::FilterType;

use crate::config::{Connectivity, PipelineConfig};
use crate::error::{Error, Result};
use crate::morphology::{self, connected_components, edt};
use crate::record::Position;
use crate::volume::{BinaryMask, LabelMap};

/// Inputs shared by every fluid stage. `fluid_raw` is the mask the stage
/// operates on.
#[derive(Clone, Copy, Debug)]
pub struct FluidContext<'a> {
    pub air: &'a BinaryMask,
    pub fluid_raw: &'a BinaryMask,
    pub position: Option<Position>,
    pub cfg: &'a PipelineConfig,
}

impl<'a> FluidContext<'a> {
    pub fn new(
        air: &'a BinaryMask,
        fluid_raw: &'a BinaryMask,
        position: Option<Position>,
        cfg: &'a PipelineConfig,
    ) -> Result<Self> {
        air.grid().ensure_same(fluid_raw.grid(), "fluid context")?;
        Ok(FluidContext { air, fluid_raw, position, cfg })
    }

    fn with_fluid<'b>(&self, fluid: &'b BinaryMask) -> FluidContext<'b>
    where
        'a: 'b,
    {
        FluidContext { fluid_raw: fluid, ..*self }
    }
}

/// Drops fluid components that are too small or too far from the air
/// surface (either condition removes the component).
pub fn component_filter(ctx: &FluidContext) -> BinaryMask {
    let labeling = connected_components(ctx.fluid_raw, Connectivity::TwentySix);
    if labeling.count() == 0 {
        return ctx.fluid_raw.clone();
    }
    let distances = morphology::component_distances_mm(&labeling, ctx.air);
    let min_size = ctx.cfg.fluid_min_component_voxels;
    let max_dist = ctx.cfg.fluid_surface_dist_mm;
    labeling.select(|id, size| size >= min_size && distances[id as usize - 1] <= max_dist)
}

/// Keeps a fluid voxel only if air is present within
/// `gravity_slab_halfwidth_slices` axial slices of it.
///
/// With `gravity_inplane_radius_voxels` set, the air must also lie within
/// that in-plane distance; a known patient position further requires the
/// air to sit on the non-dependent side (anterior for supine, posterior for
/// prone), since fluid pools under gravity.
pub fn gravity_filter(ctx: &FluidContext) -> BinaryMask {
    let grid = *ctx.air.grid();
    let [nx, ny, nz] = grid.dims;
    let half = ctx.cfg.gravity_slab_halfwidth_slices;
    let plane = nx * ny;
    let air = ctx.air.bits();
    let fluid = ctx.fluid_raw.bits();
    let slab = |z: usize| z.saturating_sub(half)..=(z + half).min(nz - 1);

    let mut out = BinaryMask::empty(grid);
    match ctx.cfg.gravity_inplane_radius_voxels {
        None => {
            let has_air: Vec<bool> = (0..nz).map(|z| air[z * plane..(z + 1) * plane].iter().any(|&a| a)).collect();
            let bits = out.bits_mut();
            for z in 0..nz {
                if slab(z).any(|s| has_air[s]) {
                    let r = z * plane..(z + 1) * plane;
                    bits[r.clone()].copy_from_slice(&fluid[r]);
                }
            }
        }
        Some(radius) => {
            let r2 = radius * radius;
            let reach = radius.floor() as i64;
            for z in 0..nz {
                let slice = &fluid[z * plane..(z + 1) * plane];
                if !slice.iter().any(|&f| f) {
                    continue;
                }
                let mut proj = vec![false; plane];
                for s in slab(z) {
                    for (p, &a) in proj.iter_mut().zip(&air[s * plane..(s + 1) * plane]) {
                        *p |= a;
                    }
                }
                let bits = out.bits_mut();
                match ctx.position {
                    None => {
                        let d2 = edt::squared_edt(&proj, [nx, ny, 1], [1.0; 3]);
                        for (k, &f) in slice.iter().enumerate() {
                            bits[z * plane + k] = f && d2[k] <= r2;
                        }
                    }
                    Some(pos) => {
                        for (k, &f) in slice.iter().enumerate() {
                            if !f {
                                continue;
                            }
                            let (x, y) = ((k % nx) as i64, (k / nx) as i64);
                            let dy_range = match pos {
                                Position::Supine => -reach..=0,
                                Position::Prone => 0..=reach,
                            };
                            let found = dy_range.into_iter().any(|dy| {
                                (-reach..=reach).any(|dx| {
                                    let (px, py) = (x + dx, y + dy);
                                    px >= 0
                                        && py >= 0
                                        && px < nx as i64
                                        && py < ny as i64
                                        && ((dx * dx + dy * dy) as f64) <= r2
                                        && proj[py as usize * nx + px as usize]
                                })
                            });
                            bits[z * plane + k] = found;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Bridges short background gaps between fluid and air inside each sagittal
/// slice.
///
/// From every fluid voxel the four in-plane axis directions (-z, +z, -y, +y)
/// are walked over background voxels; the direction reaching air after the
/// fewest background voxels wins (ties go to the earlier direction) and, if
/// that gap holds at most `sagittal_max_gap_voxels` voxels, the gap becomes
/// fluid. A fluid voxel already face-adjacent to air in the slice is left as
/// is.
pub fn sagittal_connect(ctx: &FluidContext) -> BinaryMask {
    let grid = *ctx.air.grid();
    let [_, ny, nz] = grid.dims;
    let max_gap = ctx.cfg.sagittal_max_gap_voxels as i64;
    let air = ctx.air.bits();
    let fluid = ctx.fluid_raw.bits();
    let mut out = ctx.fluid_raw.clone();
    if max_gap == 0 {
        return out;
    }
    let dirs: [(i64, i64); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];
    for i in ctx.fluid_raw.indices() {
        if air[i] {
            continue;
        }
        let [x, y, z] = grid.coords(i);
        let mut best: Option<(i64, (i64, i64))> = None;
        for &(dy, dz) in &dirs {
            let mut step = 1;
            while step <= max_gap + 1 {
                let (py, pz) = (y as i64 + dy * step, z as i64 + dz * step);
                if py < 0 || pz < 0 || py >= ny as i64 || pz >= nz as i64 {
                    break;
                }
                let j = grid.index(x, py as usize, pz as usize);
                if air[j] {
                    let gap = step - 1;
                    if best.is_none_or(|(g, _)| gap < g) {
                        best = Some((gap, (dy, dz)));
                    }
                    break;
                }
                if fluid[j] {
                    break;
                }
                step += 1;
            }
        }
        if let Some((gap, (dy, dz))) = best {
            let bits = out.bits_mut();
            for s in 1..=gap {
                let j = grid.index(x, (y as i64 + dy * s) as usize, (z as i64 + dz * s) as usize);
                bits[j] = true;
            }
        }
    }
    out
}

/// Intermediate masks of [`fluid_postprocess`], kept for inspection.
#[derive(Clone, Debug)]
pub struct FluidStages {
    pub filtered: BinaryMask,
    pub gravity: BinaryMask,
    pub hole_filled: BinaryMask,
    pub smoothed: BinaryMask,
    pub connected: BinaryMask,
    pub labels: LabelMap,
}

/// Component filter, gravity filter, hole filling on air ∪ fluid (new voxels
/// become fluid), Gaussian smoothing of the fluid, sagittal bridging, then
/// fusion with air taking precedence.
pub fn fluid_postprocess(ctx: &FluidContext) -> Result<LabelMap> {
    Ok(fluid_postprocess_stages(ctx)?.labels)
}

pub fn fluid_postprocess_stages(ctx: &FluidContext) -> Result<FluidStages> {
    ctx.air.grid().ensure_same(ctx.fluid_raw.grid(), "fluid post-processing")?;
    let filtered = component_filter(ctx);
    let gravity = gravity_filter(&ctx.with_fluid(&filtered));
    let union = ctx.air.union(&gravity)?;
    let hole_filled = morphology::fill_holes(&union).difference(ctx.air)?.union(&gravity)?;
    let smoothed = morphology::gaussian_smooth_binary(&hole_filled, ctx.cfg.smoothing_sigma_voxels);
    let connected = sagittal_connect(&ctx.with_fluid(&smoothed));
    let labels = LabelMap::from_masks(ctx.air, Some(&connected))?;
    Ok(FluidStages {
        filtered,
        gravity,
        hole_filled,
        smoothed,
        connected,
        labels,
    })
}

/// Assembles a 3-D fluid mask from per-slice prediction images named
/// `<scan_id>_z<index>.png`. Images of another size are resampled
/// (nearest neighbour) to the axial slice size; pixels >= 128 are fluid.
/// Slices without an image stay empty.
pub fn import_fluid_slices(dir: &Path, scan_id: &str, grid: &crate::volume::Grid) -> Result<BinaryMask> {
    let [nx, ny, nz] = grid.dims;
    let prefix = format!("{scan_id}_z");
    let mut mask = BinaryMask::empty(*grid);
    let entries = std::fs::read_dir(dir).map_err(|e| Error::unreadable(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(stem) = name.strip_suffix(".png") else { continue };
        let Some(index) = stem.strip_prefix(&prefix).and_then(|s| s.parse::<usize>().ok()) else { continue };
        if index < nz {
            found.push((index, path));
        }
    }
    found.sort();
    for (z, path) in found {
        let img = image::open(&path)
            .map_err(|e| Error::unreadable(&path, e))?
            .into_luma8();
        let img = if img.dimensions() != (nx as u32, ny as u32) {
            image::imageops::resize(&img, nx as u32, ny as u32, FilterType::Nearest)
        } else {
            img
        };
        let bits = mask.bits_mut();
        for (x, y, p) in img.enumerate_pixels() {
            if p.0[0] >= 128 {
                bits[grid.index(x as usize, y as usize, z)] = true;
            }
        }
    }
    Ok(mask)
}

/// Loads a 3-D fluid mask volume and checks it matches the scan grid.
pub fn import_fluid_volume(path: &Path, grid: &crate::volume::Grid) -> Result<BinaryMask> {
    let m = crate::nifti::load_mask(path)?;
    grid.ensure_same(m.grid(), "fluid prediction")?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    fn grid(dims: [usize; 3]) -> Grid {
        Grid::new(dims, [1.0; 3]).unwrap()
    }

    fn boxed(g: Grid, lo: [usize; 3], hi: [usize; 3]) -> BinaryMask {
        BinaryMask::from_fn(g, |p| (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]))
    }

    #[test]
    fn component_filter_cases() {
        let g = grid([60, 30, 30]);
        let cfg = PipelineConfig::default();
        let air = boxed(g, [0, 0, 0], [9, 29, 29]);
        let touching = boxed(g, [10, 0, 0], [13, 24, 29]);
        assert_eq!(touching.count(), 3000);
        let ctx = FluidContext::new(&air, &touching, None, &cfg).unwrap();
        assert_eq!(component_filter(&ctx), touching);

        // Same size, 5 voxels (5 mm) from the air face.
        let far = boxed(g, [14, 0, 0], [17, 24, 29]);
        let ctx = FluidContext::new(&air, &far, None, &cfg).unwrap();
        assert!(component_filter(&ctx).is_empty());

        let small = boxed(g, [10, 0, 0], [13, 4, 4]);
        assert_eq!(small.count(), 100);
        let ctx = FluidContext::new(&air, &small, None, &cfg).unwrap();
        assert!(component_filter(&ctx).is_empty());
    }

    #[test]
    fn gravity_slab_rule() {
        let g = grid([5, 5, 120]);
        let cfg = PipelineConfig::default();
        let mut fluid = BinaryMask::empty(g);
        fluid.set(2, 2, 100, true);
        let mut air = BinaryMask::empty(g);
        air.set(0, 0, 102, true);
        let ctx = FluidContext::new(&air, &fluid, None, &cfg).unwrap();
        assert_eq!(gravity_filter(&ctx), fluid);

        let mut air = BinaryMask::empty(g);
        air.set(0, 0, 103, true);
        air.set(0, 0, 97, true);
        let ctx = FluidContext::new(&air, &fluid, None, &cfg).unwrap();
        assert!(gravity_filter(&ctx).is_empty());

        let mut air = BinaryMask::empty(g);
        air.set(4, 4, 100, true);
        let ctx = FluidContext::new(&air, &fluid, None, &cfg).unwrap();
        assert_eq!(gravity_filter(&ctx), fluid);
    }

    #[test]
    fn gravity_inplane_radius_and_position() {
        let g = grid([20, 20, 5]);
        let mut cfg = PipelineConfig::default();
        cfg.gravity_inplane_radius_voxels = Some(3.0);
        let mut fluid = BinaryMask::empty(g);
        fluid.set(10, 12, 2, true);
        let mut air = BinaryMask::empty(g);
        air.set(10, 9, 2, true); // 3 rows anterior
        let ctx = FluidContext::new(&air, &fluid, None, &cfg).unwrap();
        assert_eq!(gravity_filter(&ctx), fluid);
        let ctx = FluidContext::new(&air, &fluid, Some(Position::Supine), &cfg).unwrap();
        assert_eq!(gravity_filter(&ctx), fluid);
        let ctx = FluidContext::new(&air, &fluid, Some(Position::Prone), &cfg).unwrap();
        assert!(gravity_filter(&ctx).is_empty());
        cfg.gravity_inplane_radius_voxels = Some(2.9);
        let ctx = FluidContext::new(&air, &fluid, None, &cfg).unwrap();
        assert!(gravity_filter(&ctx).is_empty());
    }

    #[test]
    fn sagittal_gap_cases() {
        let g = grid([3, 20, 20]);
        let cfg = PipelineConfig::default();
        let mut air = BinaryMask::empty(g);
        let mut fluid = BinaryMask::empty(g);
        air.set(1, 5, 10, true);
        fluid.set(1, 5, 12, true);
        let ctx = FluidContext::new(&air, &fluid, None, &cfg).unwrap();
        let out = sagittal_connect(&ctx);
        assert!(out.get(1, 5, 11));
        assert_eq!(out.count(), 2);

        // Ten-voxel gap is beyond the cap.
        let mut fluid = BinaryMask::empty(g);
        fluid.set(1, 5, 0, true);
        let mut air = BinaryMask::empty(g);
        air.set(1, 5, 11, true);
        let ctx = FluidContext::new(&air, &fluid, None, &cfg).unwrap();
        assert_eq!(sagittal_connect(&ctx), fluid);

        // Already adjacent.
        let mut air = BinaryMask::empty(g);
        air.set(1, 5, 1, true);
        air.set(1, 8, 0, true);
        let ctx = FluidContext::new(&air, &fluid, None, &cfg).unwrap();
        assert_eq!(sagittal_connect(&ctx), fluid);

        // Gaps across x (not in the sagittal plane) are ignored.
        let mut air = BinaryMask::empty(g);
        air.set(2, 5, 0, true);
        let mut fluid = BinaryMask::empty(g);
        fluid.set(0, 5, 0, true);
        let ctx = FluidContext::new(&air, &fluid, None, &cfg).unwrap();
        assert_eq!(sagittal_connect(&ctx), fluid);
    }

    #[test]
    fn empty_fluid_gives_air_only_labels() {
        let g = grid([10, 10, 10]);
        let cfg = PipelineConfig::default();
        let air = boxed(g, [2, 2, 2], [6, 6, 6]);
        let fluid = BinaryMask::empty(g);
        let ctx = FluidContext::new(&air, &fluid, None, &cfg).unwrap();
        let lm = fluid_postprocess(&ctx).unwrap();
        assert_eq!(lm, LabelMap::from_masks(&air, None).unwrap());
    }

    #[test]
    fn overlap_is_labelled_air() {
        let g = grid([30, 30, 30]);
        let mut cfg = PipelineConfig::default();
        cfg.fluid_min_component_voxels = 1;
        let air = boxed(g, [5, 5, 5], [15, 15, 15]);
        let fluid = boxed(g, [10, 10, 10], [20, 20, 20]);
        let ctx = FluidContext::new(&air, &fluid, None, &cfg).unwrap();
        let lm = fluid_postprocess(&ctx).unwrap();
        assert_eq!(lm.get(12, 12, 12), crate::volume::Label::Air);
        assert_eq!(lm.get(16, 16, 16), crate::volume::Label::Fluid);
        // More than two slices above the air: dropped by the gravity rule.
        assert_eq!(lm.get(16, 16, 18), crate::volume::Label::Background);
        assert_eq!(lm.mask_of(crate::volume::Label::Air), air);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let cfg = PipelineConfig::default();
        let a = BinaryMask::empty(grid([4, 4, 4]));
        let b = BinaryMask::empty(grid([4, 4, 5]));
        assert!(matches!(FluidContext::new(&a, &b, None, &cfg), Err(Error::DimsMismatch(_))));
    }
}
