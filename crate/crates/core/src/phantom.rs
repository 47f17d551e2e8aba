//! Synthetic colon phantoms with known ground truth, used by the examples
//! and tests.
//!
//! The lumen is a torus-shaped air tube lying in the coronal (x–z) plane
//! and crossing the midline column inside the default seed search region.
//! The body is a +40 HU cylinder along z, surrounded by air. A fluid pocket
//! (a digital ball, `d² ≤ 110`) sits beside the tube, one voxel away at its
//! outermost point; the fluid prediction adds a distant noise blob and a
//! small satellite touching the lumen.

use crate::volume::{BinaryMask, Grid, Label, LabelMap, Volume};

pub const AIR_HU: i16 = -1000;
pub const BODY_HU: i16 = 40;
pub const FLUID_HU: i16 = 200;

/// Squared radius of the fluid pocket and noise blob balls, in voxels.
pub const POCKET_RADIUS2: i64 = 110;

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    /// Torus centre line radius, in voxels.
    pub major_radius: f64,
    /// Tube radius, in voxels. `0` leaves the body without a lumen.
    pub minor_radius: f64,
    /// Axial index of the torus centre.
    pub centre_z: usize,
}

impl PhantomSpec {
    /// `n³` voxels of 0.8 mm.
    pub fn cube(n: usize) -> Self {
        PhantomSpec { dims: [n; 3], spacing: [0.8; 3], major_radius: 60.0, minor_radius: 5.0, centre_z: 128 }
    }

    /// 512 × 512 × `nz`, the smallest in-plane size accepted by default.
    pub fn clinical(nz: usize) -> Self {
        PhantomSpec { dims: [512, 512, nz], ..Self::cube(0) }
    }

    pub fn with_minor_radius(mut self, r: f64) -> Self {
        self.minor_radius = r;
        self
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.dims, self.spacing).expect("phantom geometry")
    }

    fn centre(&self) -> [i64; 3] {
        [self.dims[0] as i64 / 2, self.dims[1] as i64 / 2, self.centre_z as i64]
    }

    pub fn in_lumen(&self, p: [usize; 3]) -> bool {
        if self.minor_radius <= 0.0 {
            return false;
        }
        let [cx, cy, cz] = self.centre();
        let dx = (p[0] as i64 - cx) as f64;
        let dy = (p[1] as i64 - cy) as f64;
        let dz = (p[2] as i64 - cz) as f64;
        let rho = (dx * dx + dz * dz).sqrt();
        (rho - self.major_radius).powi(2) + dy * dy <= self.minor_radius * self.minor_radius
    }

    pub fn in_body(&self, p: [usize; 3]) -> bool {
        let [cx, cy, _] = self.centre();
        let r = 0.45 * self.dims[0].min(self.dims[1]) as f64;
        let dx = (p[0] as i64 - cx) as f64;
        let dy = (p[1] as i64 - cy) as f64;
        dx * dx + dy * dy <= r * r
    }

    /// Centre of the fluid pocket: lateral to the tube's outermost point,
    /// two voxels posterior.
    pub fn pocket_centre(&self) -> [i64; 3] {
        let [cx, cy, cz] = self.centre();
        let outer = (self.major_radius + self.minor_radius).floor() as i64;
        [cx + outer + 11, cy + 2, cz]
    }

    pub fn in_pocket(&self, p: [usize; 3]) -> bool {
        ball(p, self.pocket_centre(), POCKET_RADIUS2)
    }

    pub fn noise_blob_centre(&self) -> [i64; 3] {
        let [cx, cy, cz] = self.centre();
        [cx - 68, cy + 72, cz + 72]
    }

    /// 5 × 5 × 4 box face-adjacent to the tube's leftmost point.
    pub fn in_satellite(&self, p: [usize; 3]) -> bool {
        let [cx, cy, cz] = self.centre();
        let left = cx - (self.major_radius + self.minor_radius).floor() as i64;
        let [x, y, z] = p.map(|c| c as i64);
        (left - 5..left).contains(&x) && (cy - 2..=cy + 2).contains(&y) && (cz..cz + 4).contains(&z)
    }

    /// The CT volume only.
    pub fn volume(&self) -> Volume {
        Volume::from_fn(self.grid(), |p| {
            if !self.in_body(p) || self.in_lumen(p) {
                AIR_HU
            } else if self.in_pocket(p) {
                FLUID_HU
            } else {
                BODY_HU
            }
        })
    }

    /// Volume plus ground-truth and prediction masks.
    pub fn build(&self) -> ColonPhantom {
        let grid = self.grid();
        let lumen = BinaryMask::from_fn(grid, |p| self.in_lumen(p));
        let pocket = BinaryMask::from_fn(grid, |p| self.in_pocket(p));
        let noise_blob = BinaryMask::from_fn(grid, |p| ball(p, self.noise_blob_centre(), POCKET_RADIUS2));
        let satellite = BinaryMask::from_fn(grid, |p| self.in_satellite(p));
        let fluid_prediction = pocket
            .union(&noise_blob)
            .and_then(|m| m.union(&satellite))
            .expect("same grid");
        ColonPhantom { volume: self.volume(), lumen, pocket, noise_blob, satellite, fluid_prediction }
    }
}

fn ball(p: [usize; 3], c: [i64; 3], r2: i64) -> bool {
    (0..3).map(|a| (p[a] as i64 - c[a]).pow(2)).sum::<i64>() <= r2
}

#[derive(Clone, Debug)]
pub struct ColonPhantom {
    pub volume: Volume,
    pub lumen: BinaryMask,
    pub pocket: BinaryMask,
    pub noise_blob: BinaryMask,
    pub satellite: BinaryMask,
    /// What a fluid model might predict: the pocket plus both distractors.
    pub fluid_prediction: BinaryMask,
}

impl ColonPhantom {
    pub fn truth(&self) -> LabelMap {
        LabelMap::from_masks(&self.lumen, Some(&self.pocket)).expect("same grid")
    }

    pub fn truth_of(&self, label: Label) -> &BinaryMask {
        match label {
            Label::Fluid => &self.pocket,
            _ => &self.lumen,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Connectivity;
    use crate::morphology::connected_components;
    use crate::volume::physical_volume_cm3;

    #[test]
    fn cube_phantom_layout() {
        let ph = PhantomSpec::cube(256).build();
        assert_eq!(ph.pocket.count(), 4945);
        assert_eq!(ph.noise_blob.count(), 4945);
        assert_eq!(ph.satellite.count(), 100);
        assert!(ph.lumen.intersection(&ph.pocket).unwrap().is_empty());
        let cm3 = physical_volume_cm3(&ph.lumen);
        assert!((3.5..=27.0).contains(&cm3), "{cm3}");
        assert_eq!(connected_components(&ph.lumen, Connectivity::TwentySix).count(), 1);
        // Pocket and lumen never share a sagittal slice.
        let lumen_x_max = ph.lumen.bounding_box().unwrap().1[0];
        let pocket_x_min = ph.pocket.bounding_box().unwrap().0[0];
        assert_eq!(pocket_x_min, lumen_x_max + 1);
    }
}
