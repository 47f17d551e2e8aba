//! Pipeline thresholds. Every field can be overridden from a TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Voxel adjacency used for growing and labeling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// Face neighbours.
    Six,
    /// Face and edge neighbours.
    Eighteen,
    /// Face, edge and corner neighbours.
    TwentySix,
}

impl Connectivity {
    /// Neighbour offsets, ordered by z, then y, then x.
    pub fn offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::with_capacity(26);
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let nonzero = (dx != 0) as u8 + (dy != 0) as u8 + (dz != 0) as u8;
                    let keep = match self {
                        Connectivity::Six => nonzero == 1,
                        Connectivity::Eighteen => (1..=2).contains(&nonzero),
                        Connectivity::TwentySix => nonzero >= 1,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(format!("connectivity must be 6, 18 or 26, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub air_threshold_hu: i16,
    /// Whether a voxel exactly at the threshold counts as air.
    pub air_threshold_inclusive: bool,
    pub connectivity: Connectivity,
    pub seed_band_halfwidth_px: usize,
    pub seed_z_lo: usize,
    pub seed_z_hi: usize,
    pub volume_min_cm3: f64,
    pub volume_max_cm3: f64,
    pub mask_dilation_voxels: f64,
    pub masked_fill_hu: i16,
    pub fluid_min_component_voxels: usize,
    pub fluid_surface_dist_mm: f64,
    pub gravity_slab_halfwidth_slices: usize,
    /// `None` keeps the slab rule unrestricted in-plane.
    pub gravity_inplane_radius_voxels: Option<f64>,
    pub island_min_voxels: usize,
    pub slices_per_scan: usize,
    pub export_size_px: u32,
    pub train_fraction: f64,
    pub hd_percentile: f64,
    /// Take the percentile over both directed distance sets pooled together
    /// instead of the max of the two directed percentiles.
    pub hd_pooled: bool,
    pub min_axial_slices: usize,
    pub max_axial_slices: usize,
    pub min_inplane_px: usize,
    pub smoothing_sigma_voxels: f64,
    pub sagittal_max_gap_voxels: usize,
    pub rolling_dice_window: usize,
    pub windowing_hu: (i32, i32),
    pub ci_level: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            air_threshold_hu: -800,
            air_threshold_inclusive: true,
            connectivity: Connectivity::TwentySix,
            seed_band_halfwidth_px: 50,
            seed_z_lo: 50,
            seed_z_hi: 250,
            volume_min_cm3: 3.5,
            volume_max_cm3: 27.0,
            mask_dilation_voxels: 35.0,
            masked_fill_hu: -1024,
            fluid_min_component_voxels: 2000,
            fluid_surface_dist_mm: 2.0,
            gravity_slab_halfwidth_slices: 2,
            gravity_inplane_radius_voxels: None,
            island_min_voxels: 2000,
            slices_per_scan: 7,
            export_size_px: 1000,
            train_fraction: 2.0 / 3.0,
            hd_percentile: 95.0,
            hd_pooled: false,
            min_axial_slices: 350,
            max_axial_slices: 700,
            min_inplane_px: 512,
            smoothing_sigma_voxels: 1.0,
            sagittal_max_gap_voxels: 3,
            rolling_dice_window: 50,
            windowing_hu: (-1000, 400),
            ci_level: 0.95,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::unreadable(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Parses `text` with `key=value` overrides applied on top. Values use
    /// TOML syntax; anything that does not parse is taken as a string.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            table.insert(key.trim().to_string(), value);
        }
        let merged = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_toml_str(&merged)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.volume_min_cm3 >= 0.0 && self.volume_min_cm3 < self.volume_max_cm3) {
            return fail(format!(
                "volume_min_cm3 ({}) must be >= 0 and below volume_max_cm3 ({})",
                self.volume_min_cm3, self.volume_max_cm3
            ));
        }
        if self.seed_z_lo >= self.seed_z_hi {
            return fail(format!("seed_z_lo ({}) must be below seed_z_hi ({})", self.seed_z_lo, self.seed_z_hi));
        }
        if self.min_axial_slices > self.max_axial_slices {
            return fail("min_axial_slices exceeds max_axial_slices".into());
        }
        for (name, v) in [
            ("mask_dilation_voxels", self.mask_dilation_voxels),
            ("fluid_surface_dist_mm", self.fluid_surface_dist_mm),
            ("smoothing_sigma_voxels", self.smoothing_sigma_voxels),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if let Some(r) = self.gravity_inplane_radius_voxels {
            if !(r.is_finite() && r >= 0.0) {
                return fail(format!("gravity_inplane_radius_voxels must be non-negative, got {r}"));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if !(self.hd_percentile > 0.0 && self.hd_percentile <= 100.0) {
            return fail(format!("hd_percentile must lie in (0, 100], got {}", self.hd_percentile));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return fail(format!("ci_level must lie in (0, 1), got {}", self.ci_level));
        }
        if self.slices_per_scan == 0 || self.export_size_px == 0 || self.rolling_dice_window == 0 {
            return fail("slices_per_scan, export_size_px and rolling_dice_window must be positive".into());
        }
        if self.windowing_hu.0 >= self.windowing_hu.1 {
            return fail(format!("windowing_hu {:?} must be increasing", self.windowing_hu));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form; identical configs hash equal.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
