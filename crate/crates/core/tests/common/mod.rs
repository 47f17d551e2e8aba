//! Brute-force reference implementations shared by the integration tests.
//! They favour obviousness over speed and reuse none of the crate's kernels.

#![allow(dead_code)]

use colonseg::{BinaryMask, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random mask with each voxel set with probability `density`.
pub fn random_mask(rng: &mut ChaCha8Rng, dims: [usize; 3], spacing: [f64; 3], density: f64) -> BinaryMask {
    let grid = Grid::new(dims, spacing).unwrap();
    BinaryMask::from_fn(grid, |_| rng.random_bool(density))
}

pub fn random_dims(rng: &mut ChaCha8Rng, max: usize) -> [usize; 3] {
    [rng.random_range(1..=max), rng.random_range(1..=max), rng.random_range(1..=max)]
}

/// Neighbour offsets whose squared length is at most `max_d2`
/// (1 → 6-, 2 → 18-, 3 → 26-connectivity).
pub fn offsets(max_d2: i64) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    for dz in -1..=1i64 {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let d2 = dx * dx + dy * dy + dz * dz;
                if d2 > 0 && d2 <= max_d2 {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

fn coords(dims: [usize; 3], i: usize) -> [i64; 3] {
    [(i % dims[0]) as i64, ((i / dims[0]) % dims[1]) as i64, (i / (dims[0] * dims[1])) as i64]
}

fn inside(dims: [usize; 3], p: [i64; 3]) -> bool {
    (0..3).all(|a| p[a] >= 0 && p[a] < dims[a] as i64)
}

fn flat(dims: [usize; 3], p: [i64; 3]) -> usize {
    p[0] as usize + dims[0] * (p[1] as usize + dims[1] * p[2] as usize)
}

/// Depth-first flood fill from `seed` over set voxels.
pub fn flood_fill(bits: &[bool], dims: [usize; 3], seed: [usize; 3], max_d2: i64) -> Vec<bool> {
    let offs = offsets(max_d2);
    let mut out = vec![false; bits.len()];
    let s = flat(dims, seed.map(|c| c as i64));
    if !bits[s] {
        return out;
    }
    let mut stack = vec![s];
    out[s] = true;
    while let Some(i) = stack.pop() {
        let p = coords(dims, i);
        for o in &offs {
            let q = [p[0] + o[0], p[1] + o[1], p[2] + o[2]];
            if inside(dims, q) {
                let j = flat(dims, q);
                if bits[j] && !out[j] {
                    out[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    out
}

/// Number of connected components by repeated flood fill.
pub fn count_components(bits: &[bool], dims: [usize; 3], max_d2: i64) -> usize {
    let mut seen = vec![false; bits.len()];
    let mut n = 0;
    for i in 0..bits.len() {
        if bits[i] && !seen[i] {
            n += 1;
            let c = coords(dims, i).map(|v| v as usize);
            for (k, v) in flood_fill(bits, dims, c, max_d2).into_iter().enumerate() {
                seen[k] |= v;
            }
        }
    }
    n
}

/// Voxels within index-space Euclidean distance `r` of a set voxel.
pub fn brute_dilate(bits: &[bool], dims: [usize; 3], r: f64) -> Vec<bool> {
    let set: Vec<[i64; 3]> = (0..bits.len()).filter(|&i| bits[i]).map(|i| coords(dims, i)).collect();
    (0..bits.len())
        .map(|i| {
            let p = coords(dims, i);
            set.iter().any(|q| {
                let d2: i64 = (0..3).map(|a| (p[a] - q[a]).pow(2)).sum();
                d2 as f64 <= r * r
            })
        })
        .collect()
}

/// Set voxels with an unset or out-of-grid face neighbour.
pub fn brute_boundary(bits: &[bool], dims: [usize; 3]) -> Vec<[i64; 3]> {
    (0..bits.len())
        .filter(|&i| bits[i])
        .map(|i| coords(dims, i))
        .filter(|p| {
            offsets(1).iter().any(|o| {
                let q = [p[0] + o[0], p[1] + o[1], p[2] + o[2]];
                !inside(dims, q) || !bits[flat(dims, q)]
            })
        })
        .collect()
}

fn directed(from: &[[i64; 3]], to: &[[i64; 3]], spacing: [f64; 3]) -> Vec<f64> {
    from.iter()
        .map(|p| {
            to.iter()
                .map(|q| {
                    (0..3)
                        .map(|a| {
                            let d = (p[a] - q[a]) as f64 * spacing[a];
                            d * d
                        })
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn pct(v: &[f64], p: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (s.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// (ASSD, MASD, HD95) by all-pairs boundary distances.
pub fn brute_surface(a: &BinaryMask, b: &BinaryMask) -> (f64, f64, f64) {
    let dims = a.dims();
    let spacing = a.spacing();
    let ba = brute_boundary(a.bits(), dims);
    let bb = brute_boundary(b.bits(), dims);
    let ab = directed(&ba, &bb, spacing);
    let ba_ = directed(&bb, &ba, spacing);
    let sum_ab: f64 = ab.iter().sum();
    let sum_ba: f64 = ba_.iter().sum();
    let assd = (sum_ab + sum_ba) / (ab.len() + ba_.len()) as f64;
    let masd = (sum_ab / ab.len() as f64 + sum_ba / ba_.len() as f64) / 2.0;
    let hd95 = pct(&ab, 95.0).max(pct(&ba_, 95.0));
    (assd, masd, hd95)
}

/// Config scaled down for 40 x 40 x 30 test scans.
pub fn tiny_config() -> colonseg::PipelineConfig {
    colonseg::PipelineConfig {
        min_axial_slices: 20,
        max_axial_slices: 60,
        min_inplane_px: 32,
        seed_z_lo: 0,
        seed_z_hi: 29,
        volume_min_cm3: 0.1,
        volume_max_cm3: 5.0,
        fluid_min_component_voxels: 50,
        island_min_voxels: 50,
        slices_per_scan: 3,
        export_size_px: 64,
        mask_dilation_voxels: 3.0,
        ..Default::default()
    }
}

pub const TINY_DIMS: [usize; 3] = [40, 40, 30];

/// Air tube `x 18..=22, y 17..=23, z 3..=26` (840 voxels) in soft tissue.
pub fn tube(x: usize, y: usize, z: usize) -> bool {
    (18..=22).contains(&x) && (17..=23).contains(&y) && (3..=26).contains(&z)
}

/// Fluid box just posterior to the tube (120 voxels).
pub fn pool(x: usize, y: usize, z: usize) -> bool {
    (18..=22).contains(&x) && (24..=27).contains(&y) && (10..=15).contains(&z)
}

pub fn tiny_scan(dims: [usize; 3], with_air: bool) -> colonseg::Volume {
    let grid = Grid::new(dims, [1.0; 3]).unwrap();
    colonseg::Volume::from_fn(grid, |[x, y, z]| if with_air && tube(x, y, z) { -1000 } else { 40 })
}

pub fn write_scan(dir: &std::path::Path, id: &str, v: &colonseg::Volume) -> std::path::PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let p = dir.join(format!("{id}.nii.gz"));
    colonseg::nifti::save_volume(v, &p).unwrap();
    p
}
