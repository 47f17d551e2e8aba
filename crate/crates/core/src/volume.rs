//! Volumetric image, mask and label containers.
//!
//! Every container stores voxels in x-fastest order: the flat index of
//! `(x, y, z)` is `x + nx * (y + ny * z)`. After loading, the axes are
//! canonical: axis 0 runs left to right, axis 1 anterior to posterior and
//! axis 2 inferior to superior.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voxel lattice shared by a volume and everything derived from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    /// Millimetres per voxel along each canonical axis.
    pub spacing: [f64; 3],
    /// World position (mm, RAS) of the centre of voxel (0, 0, 0).
    #[serde(default)]
    pub origin: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        Self::with_origin(dims, spacing, [0.0; 3])
    }

    pub fn with_origin(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidGeometry(format!("dims {dims:?} must all be >= 1")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "spacing {spacing:?} must be finite and positive"
            )));
        }
        if dims.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).is_none() {
            return Err(Error::InvalidGeometry(format!("dims {dims:?} overflow")));
        }
        Ok(Grid { dims, spacing, origin })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }

    #[inline]
    pub fn contains(&self, p: [i64; 3]) -> bool {
        (0..3).all(|a| p[a] >= 0 && (p[a] as usize) < self.dims[a])
    }

    /// Volume of one voxel in mm³.
    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Same lattice: dims and spacing agree. Origin is not compared.
    pub fn same_lattice(&self, other: &Grid) -> bool {
        self.dims == other.dims && self.spacing == other.spacing
    }

    pub fn ensure_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_lattice(other) {
            Ok(())
        } else {
            Err(Error::DimsMismatch(format!(
                "{what}: {:?}@{:?} vs {:?}@{:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }
}

/// CT volume in Hounsfield units.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    grid: Grid,
    values: Vec<i16>,
}

impl Volume {
    pub fn new(grid: Grid, values: Vec<i16>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGeometry(format!(
                "{} values for a {:?} grid",
                values.len(),
                grid.dims
            )));
        }
        Ok(Volume { grid, values })
    }

    pub fn filled(grid: Grid, hu: i16) -> Self {
        Volume { values: vec![hu; grid.len()], grid }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([usize; 3]) -> i16) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for z in 0..grid.dims[2] {
            for y in 0..grid.dims[1] {
                for x in 0..grid.dims[0] {
                    values.push(f([x, y, z]));
                }
            }
        }
        Volume { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    pub fn values(&self) -> &[i16] {
        &self.values
    }

    pub fn into_values(self) -> Vec<i16> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> i16 {
        self.values[self.grid.index(x, y, z)]
    }
}

/// One boolean per voxel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    grid: Grid,
    bits: Vec<bool>,
}

impl Eq for Grid {}

impl BinaryMask {
    pub fn empty(grid: Grid) -> Self {
        BinaryMask { bits: vec![false; grid.len()], grid }
    }

    pub fn full(grid: Grid) -> Self {
        BinaryMask { bits: vec![true; grid.len()], grid }
    }

    pub fn from_bits(grid: Grid, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != grid.len() {
            return Err(Error::InvalidGeometry(format!(
                "{} bits for a {:?} grid",
                bits.len(),
                grid.dims
            )));
        }
        Ok(BinaryMask { grid, bits })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([usize; 3]) -> bool) -> Self {
        let mut bits = Vec::with_capacity(grid.len());
        for z in 0..grid.dims[2] {
            for y in 0..grid.dims[1] {
                for x in 0..grid.dims[0] {
                    bits.push(f([x, y, z]));
                }
            }
        }
        BinaryMask { grid, bits }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.grid.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.grid.index(x, y, z);
        self.bits[i] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Flat indices of set voxels in ascending order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    fn zip_with(&self, other: &BinaryMask, what: &str, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        self.grid.ensure_same(&other.grid, what)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect();
        Ok(BinaryMask { grid: self.grid, bits })
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, "union", |a, b| a || b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, "intersection", |a, b| a && b)
    }

    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, "difference", |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.grid.same_lattice(&other.grid)
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Tight inclusive bounding box `[lo, hi]` of set voxels.
    pub fn bounding_box(&self) -> Option<([usize; 3], [usize; 3])> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for i in self.indices() {
            let c = self.grid.coords(i);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
            any = true;
        }
        any.then_some((lo, hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Label {
    Background = 0,
    Air = 1,
    Fluid = 2,
}

impl TryFrom<u8> for Label {
    type Error = u8;

    fn try_from(v: u8) -> std::result::Result<Self, u8> {
        match v {
            0 => Ok(Label::Background),
            1 => Ok(Label::Air),
            2 => Ok(Label::Fluid),
            other => Err(other),
        }
    }
}

/// Per-voxel class: 0 background, 1 air-filled colon, 2 fluid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    grid: Grid,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn background(grid: Grid) -> Self {
        LabelMap { labels: vec![0; grid.len()], grid }
    }

    pub fn from_raw(grid: Grid, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != grid.len() {
            return Err(Error::InvalidGeometry(format!(
                "{} labels for a {:?} grid",
                labels.len(),
                grid.dims
            )));
        }
        if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &v)| v > 2) {
            return Err(Error::InvalidLabelValue { value, index });
        }
        Ok(LabelMap { grid, labels })
    }

    /// Fuses air and fluid masks; air takes precedence where both are set.
    pub fn from_masks(air: &BinaryMask, fluid: Option<&BinaryMask>) -> Result<Self> {
        if let Some(f) = fluid {
            air.grid.ensure_same(&f.grid, "label fusion")?;
        }
        let labels = air
            .bits
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                if a {
                    Label::Air as u8
                } else if fluid.is_some_and(|f| f.bits[i]) {
                    Label::Fluid as u8
                } else {
                    Label::Background as u8
                }
            })
            .collect();
        Ok(LabelMap { grid: air.grid, labels })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    pub fn raw(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> Label {
        match self.labels[self.grid.index(x, y, z)] {
            1 => Label::Air,
            2 => Label::Fluid,
            _ => Label::Background,
        }
    }

    pub fn mask_of(&self, label: Label) -> BinaryMask {
        let l = label as u8;
        BinaryMask {
            grid: self.grid,
            bits: self.labels.iter().map(|&v| v == l).collect(),
        }
    }

    /// Air and fluid together.
    pub fn foreground(&self) -> BinaryMask {
        BinaryMask {
            grid: self.grid,
            bits: self.labels.iter().map(|&v| v != 0).collect(),
        }
    }

    pub fn count(&self, label: Label) -> usize {
        let l = label as u8;
        self.labels.iter().filter(|&&v| v == l).count()
    }
}

/// Sets every voxel whose HU is at or below `threshold` (or strictly below
/// when `inclusive` is false).
pub fn threshold_binarize(v: &Volume, threshold: i16, inclusive: bool) -> BinaryMask {
    let bits = if inclusive {
        v.values.iter().map(|&hu| hu <= threshold).collect()
    } else {
        v.values.iter().map(|&hu| hu < threshold).collect()
    };
    BinaryMask { grid: v.grid, bits }
}

/// Physical volume of the set voxels in cm³.
pub fn physical_volume_cm3(m: &BinaryMask) -> f64 {
    m.count() as f64 * m.grid.voxel_volume_mm3() / 1000.0
}
