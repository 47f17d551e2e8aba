use crate::error::{Error, Result};
use crate::morphology::{edt, Block};
use crate::volume::BinaryMask;

/// Set voxels with at least one face neighbour that is unset or outside the
/// grid.
pub fn boundary_voxels(m: &BinaryMask) -> BinaryMask {
    let grid = *m.grid();
    let [nx, ny, nz] = grid.dims;
    let bits = m.bits();
    let (sy, sz) = (nx, nx * ny);
    let mut out = BinaryMask::empty(grid);
    let ob = out.bits_mut();
    for i in m.indices() {
        let [x, y, z] = grid.coords(i);
        let edge = x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz;
        ob[i] = edge
            || !bits[i - 1]
            || !bits[i + 1]
            || !bits[i - sy]
            || !bits[i + sy]
            || !bits[i - sz]
            || !bits[i + sz];
    }
    out
}

/// Boundary distance summary for one pair of masks.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceDistanceResult {
    pub assd_mm: f64,
    pub masd_mm: f64,
    pub hd95_mm: f64,
    /// Distance from each boundary voxel of `a` (raster order) to the
    /// boundary of `b`.
    pub a_to_b: Vec<f64>,
    pub b_to_a: Vec<f64>,
}

/// Percentile with linear interpolation between closest ranks
/// (rank = p/100 · (n-1)).
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, p)
}

fn percentile_sorted(v: &[f64], p: f64) -> f64 {
    let rank = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (v[hi] - v[lo]) * frac
    }
}

/// ASSD, MASD and HD95 between the boundaries of `a` and `b`.
pub fn surface_distances(a: &BinaryMask, b: &BinaryMask) -> Result<SurfaceDistanceResult> {
    surface_distances_with(a, b, 95.0, false)
}

/// As [`surface_distances`] with a configurable percentile. With `pooled`
/// the percentile is taken over both directed sets together instead of the
/// maximum of the two directed percentiles.
pub fn surface_distances_with(a: &BinaryMask, b: &BinaryMask, pct: f64, pooled: bool) -> Result<SurfaceDistanceResult> {
    a.grid().ensure_same(b.grid(), "surface distances")?;
    let (Some(box_a), Some(box_b)) = (a.bounding_box(), b.bounding_box()) else {
        return Err(Error::MetricUndefined("surface distance needs two non-empty masks".into()));
    };
    let grid = *a.grid();
    let (lo, hi) = Block::union_box(box_a, box_b);
    let block = Block::around(&grid, lo, hi, 0);
    let ba = boundary_voxels(a);
    let bb = boundary_voxels(b);
    let directed = |from: &BinaryMask, to: &BinaryMask| -> Vec<f64> {
        let d2 = edt::squared_edt(&block.extract(to), block.dims, grid.spacing);
        let fb = from.bits();
        block
            .grid_indices(&grid)
            .zip(d2)
            .filter(|&(i, _)| fb[i])
            .map(|(_, d)| d.sqrt())
            .collect()
    };
    let a_to_b = directed(&ba, &bb);
    let b_to_a = directed(&bb, &ba);
    let (sa, sb): (f64, f64) = (a_to_b.iter().sum(), b_to_a.iter().sum());
    let (na, nb) = (a_to_b.len() as f64, b_to_a.len() as f64);
    let assd_mm = (sa + sb) / (na + nb);
    let masd_mm = (sa / na + sb / nb) / 2.0;
    let hd95_mm = if pooled {
        let all: Vec<f64> = a_to_b.iter().chain(&b_to_a).copied().collect();
        percentile(&all, pct)
    } else {
        percentile(&a_to_b, pct).max(percentile(&b_to_a, pct))
    };
    Ok(SurfaceDistanceResult { assd_mm, masd_mm, hd95_mm, a_to_b, b_to_a })
}

/// 2|a∩b| / (|a|+|b|), 1 when both are empty.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.grid().ensure_same(b.grid(), "dice")?;
    let (mut inter, mut ca, mut cb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        ca += x as usize;
        cb += y as usize;
        inter += (x && y) as usize;
    }
    if ca + cb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (ca + cb) as f64)
}
