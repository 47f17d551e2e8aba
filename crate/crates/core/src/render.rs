//! Slice extraction, HU windowing and label overlay compositing.
//!
//! Slice layout per axis (columns × rows, row 0 at the top):
//! - axis 2 (axial): x × y, anterior at the top
//! - axis 1 (coronal): x × z, superior at the top
//! - axis 0 (sagittal): y × z, superior at the top
//!
//! Overlay pixels blend the windowed grey value `g` with the label colour
//! `c` per channel as `(6·g + 4·c + 5) / 10` in integer arithmetic (alpha
//! 0.4, rounded half up). Air is red (255, 0, 0), fluid blue (0, 0, 255);
//! background pixels stay grey.

use std::io::Cursor;

use image::{GrayImage, ImageFormat, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::volume::{Label, LabelMap, Volume};

pub const AIR_RGB: [u8; 3] = [255, 0, 0];
pub const FLUID_RGB: [u8; 3] = [0, 0, 255];

/// Linear HU → 8-bit map over `[lo, hi]`, rounded to nearest and clamped.
pub fn window_hu(hu: i16, (lo, hi): (i32, i32)) -> u8 {
    let hu = hu as i32;
    if hu <= lo {
        0
    } else if hu >= hi {
        255
    } else {
        let span = hi - lo;
        (((hu - lo) * 255 + span / 2) / span) as u8
    }
}

pub fn blend(g: u8, c: u8) -> u8 {
    ((6 * g as u32 + 4 * c as u32 + 5) / 10) as u8
}

pub fn composite(g: u8, label: Label) -> [u8; 3] {
    match label {
        Label::Background => [g, g, g],
        Label::Air => AIR_RGB.map(|c| blend(g, c)),
        Label::Fluid => FLUID_RGB.map(|c| blend(g, c)),
    }
}

/// Width and height of a slice perpendicular to `axis`.
pub fn slice_size(dims: [usize; 3], axis: usize) -> Result<(usize, usize)> {
    match axis {
        0 => Ok((dims[1], dims[2])),
        1 => Ok((dims[0], dims[2])),
        2 => Ok((dims[0], dims[1])),
        _ => Err(Error::InvalidGeometry(format!("axis {axis} is not 0, 1 or 2"))),
    }
}

/// Voxel coordinates of pixel (col, row) of slice `index` along `axis`.
pub fn pixel_voxel(dims: [usize; 3], axis: usize, index: usize, col: usize, row: usize) -> [usize; 3] {
    match axis {
        0 => [index, col, dims[2] - 1 - row],
        1 => [col, index, dims[2] - 1 - row],
        _ => [col, row, index],
    }
}

fn check_slice(dims: [usize; 3], axis: usize, index: usize) -> Result<(usize, usize)> {
    let size = slice_size(dims, axis)?;
    if index >= dims[axis] {
        return Err(Error::InvalidGeometry(format!(
            "slice {index} out of range for axis {axis} with {} slices",
            dims[axis]
        )));
    }
    Ok(size)
}

pub fn slice_gray(v: &Volume, axis: usize, index: usize, window: (i32, i32)) -> Result<GrayImage> {
    let dims = v.dims();
    let (w, h) = check_slice(dims, axis, index)?;
    Ok(GrayImage::from_fn(w as u32, h as u32, |c, r| {
        let [x, y, z] = pixel_voxel(dims, axis, index, c as usize, r as usize);
        Luma([window_hu(v.get(x, y, z), window)])
    }))
}

/// Windowed slice, with label colours composited when `labels` is given.
pub fn slice_rgb(v: &Volume, labels: Option<&LabelMap>, axis: usize, index: usize, window: (i32, i32)) -> Result<RgbImage> {
    let dims = v.dims();
    if let Some(l) = labels {
        v.grid().ensure_same(l.grid(), "overlay")?;
    }
    let (w, h) = check_slice(dims, axis, index)?;
    Ok(RgbImage::from_fn(w as u32, h as u32, |c, r| {
        let [x, y, z] = pixel_voxel(dims, axis, index, c as usize, r as usize);
        let g = window_hu(v.get(x, y, z), window);
        let label = labels.map_or(Label::Background, |l| l.get(x, y, z));
        Rgb(composite(g, label))
    }))
}

pub fn encode_png(img: impl Into<image::DynamicImage>) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.into().write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}
