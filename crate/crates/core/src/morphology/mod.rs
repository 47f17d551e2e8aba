//! Binary-volume kernels.
//!
//! All operations return a mask on the same grid as their input. Work is
//! confined to the bounding box of the relevant voxels (padded by the kernel
//! reach) so large, mostly empty volumes stay cheap.

mod components;
pub mod edt;

use std::collections::VecDeque;

pub use components::{connected_components, ComponentLabeling};

use crate::config::Connectivity;
use crate::error::Result;
use crate::volume::{BinaryMask, Grid};

/// Axis-aligned sub-block of a grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Block {
    pub lo: [usize; 3],
    pub dims: [usize; 3],
}

impl Block {
    /// `[lo, hi]` (inclusive) grown by `pad` and clipped to the grid.
    pub fn around(grid: &Grid, lo: [usize; 3], hi: [usize; 3], pad: usize) -> Self {
        let mut b = Block { lo: [0; 3], dims: [0; 3] };
        for a in 0..3 {
            let l = lo[a].saturating_sub(pad);
            let h = (hi[a] + pad).min(grid.dims[a] - 1);
            b.lo[a] = l;
            b.dims[a] = h - l + 1;
        }
        b
    }

    pub fn union_box(a: ([usize; 3], [usize; 3]), b: ([usize; 3], [usize; 3])) -> ([usize; 3], [usize; 3]) {
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for k in 0..3 {
            lo[k] = a.0[k].min(b.0[k]);
            hi[k] = a.1[k].max(b.1[k]);
        }
        (lo, hi)
    }

    /// Grid index of each block voxel, in block raster order.
    pub fn grid_indices<'a>(&'a self, grid: &'a Grid) -> impl Iterator<Item = usize> + 'a {
        let [bx, by, bz] = self.dims;
        (0..bz).flat_map(move |z| {
            (0..by).flat_map(move |y| {
                let start = grid.index(self.lo[0], self.lo[1] + y, self.lo[2] + z);
                start..start + bx
            })
        })
    }

    pub fn extract(&self, m: &BinaryMask) -> Vec<bool> {
        let bits = m.bits();
        self.grid_indices(m.grid()).map(|i| bits[i]).collect()
    }
}

/// Removes components with fewer than `min_voxels` voxels (26-connectivity).
pub fn remove_small_islands(m: &BinaryMask, min_voxels: usize) -> BinaryMask {
    remove_small_islands_with(m, min_voxels, Connectivity::TwentySix)
}

pub fn remove_small_islands_with(m: &BinaryMask, min_voxels: usize, conn: Connectivity) -> BinaryMask {
    if min_voxels <= 1 {
        return m.clone();
    }
    connected_components(m, conn).select(|_, size| size >= min_voxels)
}

/// Euclidean dilation in index space: every voxel within `radius` voxel
/// units of a set voxel is set.
pub fn dilate(m: &BinaryMask, radius: f64) -> BinaryMask {
    let grid = *m.grid();
    let Some((lo, hi)) = m.bounding_box() else {
        return m.clone();
    };
    if radius < 1.0 {
        return m.clone();
    }
    let block = Block::around(&grid, lo, hi, radius.floor() as usize);
    let d2 = edt::squared_edt(&block.extract(m), block.dims, [1.0; 3]);
    let r2 = radius * radius;
    let mut out = BinaryMask::empty(grid);
    let bits = out.bits_mut();
    for (k, i) in block.grid_indices(&grid).enumerate() {
        bits[i] = d2[k] <= r2;
    }
    out
}

/// Sets every background voxel that cannot reach the volume faces through
/// face-adjacent background voxels.
pub fn fill_holes(m: &BinaryMask) -> BinaryMask {
    let grid = *m.grid();
    let [nx, ny, nz] = grid.dims;
    let bits = m.bits();
    let mut outside = vec![false; grid.len()];
    let mut queue = VecDeque::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let on_face = x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz;
                if !on_face {
                    continue;
                }
                let i = grid.index(x, y, z);
                if !bits[i] && !outside[i] {
                    outside[i] = true;
                    queue.push_back(i);
                }
            }
        }
    }
    while let Some(i) = queue.pop_front() {
        let [x, y, z] = grid.coords(i);
        let mut visit = |j: usize| {
            if !bits[j] && !outside[j] {
                outside[j] = true;
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < nx {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - nx);
        }
        if y + 1 < ny {
            visit(i + nx);
        }
        if z > 0 {
            visit(i - nx * ny);
        }
        if z + 1 < nz {
            visit(i + nx * ny);
        }
    }
    let filled = outside.into_iter().map(|o| !o).collect();
    BinaryMask::from_bits(grid, filled).expect("same grid")
}

/// Normalised 1-D Gaussian truncated at `4σ` (radius rounded to the nearest
/// voxel).
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma + 0.5).floor() as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Separable Gaussian blur of the indicator function followed by keeping
/// voxels whose response exceeds 0.5. Outside the volume counts as unset.
pub fn gaussian_smooth_binary(m: &BinaryMask, sigma: f64) -> BinaryMask {
    let grid = *m.grid();
    if sigma <= 0.0 {
        return m.clone();
    }
    let Some((lo, hi)) = m.bounding_box() else {
        return m.clone();
    };
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let block = Block::around(&grid, lo, hi, radius);
    let mut field: Vec<f64> = block.extract(m).into_iter().map(|b| b as u8 as f64).collect();
    let dims = block.dims;
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut line = vec![0.0; *dims.iter().max().unwrap()];
    for axis in 0..3 {
        let len = dims[axis];
        let stride = strides[axis];
        let (oa, ob) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for b in 0..dims[ob] {
            for a in 0..dims[oa] {
                let base = a * strides[oa] + b * strides[ob];
                for k in 0..len {
                    line[k] = field[base + k * stride];
                }
                for k in 0..len {
                    let mut acc = 0.0;
                    for (t, &w) in kernel.iter().enumerate() {
                        let src = k as isize + t as isize - radius as isize;
                        if src >= 0 && (src as usize) < len {
                            acc += w * line[src as usize];
                        }
                    }
                    field[base + k * stride] = acc;
                }
            }
        }
    }
    let mut out = BinaryMask::empty(grid);
    let bits = out.bits_mut();
    for (k, i) in block.grid_indices(&grid).enumerate() {
        bits[i] = field[k] > 0.5;
    }
    out
}

/// Squared millimetre distance from each voxel in the block to the nearest
/// set voxel of `to`.
pub(crate) fn squared_distance_mm(to: &BinaryMask, block: &Block) -> Vec<f64> {
    edt::squared_edt(&block.extract(to), block.dims, to.spacing())
}

/// For each 26-connected component of `from` (in id order), the smallest
/// spacing-weighted distance in mm between one of its voxel centres and a
/// surface voxel centre of `to`; zero when the component overlaps `to`,
/// infinite when `to` is empty.
///
/// The nearest voxel of a mask seen from outside it is always a surface
/// voxel, so a distance transform of `to` itself gives the surface distance
/// for non-overlapping components.
pub fn min_surface_distance_mm(from: &BinaryMask, to: &BinaryMask) -> Result<Vec<f64>> {
    from.grid().ensure_same(to.grid(), "surface distance")?;
    let labeling = connected_components(from, Connectivity::TwentySix);
    Ok(component_distances_mm(&labeling, to))
}

pub(crate) fn component_distances_mm(labeling: &ComponentLabeling, to: &BinaryMask) -> Vec<f64> {
    let k = labeling.count();
    let mut best = vec![f64::INFINITY; k];
    if k == 0 {
        return best;
    }
    let grid = *to.grid();
    let Some(to_box) = to.bounding_box() else {
        return best;
    };
    let from_mask = labeling.select(|_, _| true);
    let from_box = from_mask.bounding_box().expect("non-empty labeling");
    let (lo, hi) = Block::union_box(to_box, from_box);
    let block = Block::around(&grid, lo, hi, 0);
    let d2 = squared_distance_mm(to, &block);
    let labels = labeling.labels();
    for (k, i) in block.grid_indices(&grid).enumerate() {
        let l = labels[i];
        if l != 0 {
            let slot = &mut best[l as usize - 1];
            if d2[k] < *slot {
                *slot = d2[k];
            }
        }
    }
    best.into_iter().map(f64::sqrt).collect()
}
