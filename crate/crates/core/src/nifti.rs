//! NIfTI-1 single-file (`.nii` / `.nii.gz`) reading and writing.
//!
//! Loaded data is permuted and flipped into the canonical voxel axes used by
//! the rest of the crate (axis 0 towards world +x, axis 1 towards world -y,
//! axis 2 towards world +z in RAS coordinates). Orientation comes from the
//! sform when `sform_code > 0`, otherwise from the qform; a file with neither
//! is rejected.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Grid, LabelMap, Volume};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_INT32: i16 = 8;
const DT_FLOAT32: i16 = 16;
const DT_FLOAT64: i16 = 64;
const DT_INT8: i16 = 256;
const DT_UINT16: i16 = 512;
const DT_UINT32: i16 = 768;

/// Canonical direction of each output axis, as (world axis, sign).
const CANONICAL: [(usize, f64); 3] = [(0, 1.0), (1, -1.0), (2, 1.0)];

/// Voxel payload in file order.
#[derive(Clone, Debug, PartialEq)]
pub enum VoxelData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    F32(Vec<f32>),
}

impl VoxelData {
    fn len(&self) -> usize {
        match self {
            VoxelData::U8(v) => v.len(),
            VoxelData::I16(v) => v.len(),
            VoxelData::F32(v) => v.len(),
        }
    }
}

/// A NIfTI image in file voxel order, before any reorientation.
#[derive(Clone, Debug, PartialEq)]
pub struct RawNifti {
    pub dims: [usize; 3],
    /// Voxel-to-world (RAS mm) affine rows. `None` writes a file with no
    /// orientation codes.
    pub affine: Option<[[f64; 4]; 3]>,
    pub data: VoxelData,
}

impl RawNifti {
    /// Affine of a grid stored in canonical order.
    pub fn canonical_affine(grid: &Grid) -> [[f64; 4]; 3] {
        let mut a = [[0.0; 4]; 3];
        for (axis, &(world, sign)) in CANONICAL.iter().enumerate() {
            a[world][axis] = sign * grid.spacing[axis];
        }
        for w in 0..3 {
            a[w][3] = grid.origin[w];
        }
        a
    }
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

struct Header {
    endian: Endian,
    dims: [usize; 3],
    datatype: i16,
    pixdim: [f64; 4],
    vox_offset: usize,
    scl_slope: f64,
    scl_inter: f64,
    qform_code: i16,
    sform_code: i16,
    quatern: [f64; 3],
    qoffset: [f64; 3],
    srow: [[f64; 4]; 3],
}

struct Cursor<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl Cursor<'_> {
    fn i16(&self, at: usize) -> i16 {
        let b = [self.bytes[at], self.bytes[at + 1]];
        match self.endian {
            Endian::Little => i16::from_le_bytes(b),
            Endian::Big => i16::from_be_bytes(b),
        }
    }

    fn i32(&self, at: usize) -> i32 {
        let b: [u8; 4] = self.bytes[at..at + 4].try_into().unwrap();
        match self.endian {
            Endian::Little => i32::from_le_bytes(b),
            Endian::Big => i32::from_be_bytes(b),
        }
    }

    fn f32(&self, at: usize) -> f64 {
        let b: [u8; 4] = self.bytes[at..at + 4].try_into().unwrap();
        f64::from(match self.endian {
            Endian::Little => f32::from_le_bytes(b),
            Endian::Big => f32::from_be_bytes(b),
        })
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut file = File::open(path).map_err(|e| Error::unreadable(path, e))?;
    let mut raw = Vec::new();
    file.read_to_end(&mut raw).map_err(|e| Error::unreadable(path, e))?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        MultiGzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::unreadable(path, format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::unreadable(
            path,
            format!("{} bytes is shorter than a NIfTI-1 header", bytes.len()),
        ));
    }
    let le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let be = i32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let endian = match (le, be) {
        (348, _) => Endian::Little,
        (_, 348) => Endian::Big,
        (540, _) | (_, 540) => return Err(Error::UnsupportedFormat("NIfTI-2 headers are not supported".into())),
        _ => return Err(Error::UnsupportedFormat(format!("{}: not a NIfTI-1 file", path.display()))),
    };
    match &bytes[344..348] {
        b"n+1\0" => {}
        b"ni1\0" => {
            return Err(Error::UnsupportedFormat("split .hdr/.img pairs are not supported".into()));
        }
        other => return Err(Error::UnsupportedFormat(format!("bad NIfTI magic {other:?}"))),
    }
    let c = Cursor { bytes, endian };
    let ndim = c.i16(40);
    if !(1..=7).contains(&ndim) {
        return Err(Error::UnsupportedFormat(format!("dim[0] = {ndim}")));
    }
    let mut dims = [1usize; 3];
    for (a, d) in dims.iter_mut().enumerate() {
        if (a as i16) < ndim {
            let n = c.i16(42 + 2 * a);
            if n < 1 {
                return Err(Error::UnsupportedFormat(format!("dim[{}] = {n}", a + 1)));
            }
            *d = n as usize;
        }
    }
    for a in 3..ndim as usize {
        if c.i16(42 + 2 * a) > 1 {
            return Err(Error::UnsupportedFormat(format!("{ndim}-D images with dim[{}] > 1", a + 1)));
        }
    }
    let mut pixdim = [0.0; 4];
    for (k, p) in pixdim.iter_mut().enumerate() {
        *p = c.f32(76 + 4 * k);
    }
    let vox_offset = c.f32(108);
    if !(vox_offset >= HEADER_SIZE as f64) {
        return Err(Error::UnsupportedFormat(format!("vox_offset {vox_offset}")));
    }
    let mut srow = [[0.0; 4]; 3];
    for (r, row) in srow.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = c.f32(280 + 16 * r + 4 * k);
        }
    }
    Ok(Header {
        endian,
        dims,
        datatype: c.i16(70),
        pixdim,
        vox_offset: vox_offset as usize,
        scl_slope: c.f32(112),
        scl_inter: c.f32(116),
        qform_code: c.i16(252),
        sform_code: c.i16(254),
        quatern: [c.f32(256), c.f32(260), c.f32(264)],
        qoffset: [c.f32(268), c.f32(272), c.f32(276)],
        srow,
    })
}

impl Header {
    fn affine(&self) -> Option<[[f64; 4]; 3]> {
        if self.sform_code > 0 {
            return Some(self.srow);
        }
        if self.qform_code <= 0 {
            return None;
        }
        let [b, c, d] = self.quatern;
        let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
        let r = [
            [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
            [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
            [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
        ];
        let qfac = if self.pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        let scale = [self.pixdim[1].abs(), self.pixdim[2].abs(), self.pixdim[3].abs() * qfac];
        let mut m = [[0.0; 4]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = r[i][j] * scale[j];
            }
            m[i][3] = self.qoffset[i];
        }
        Some(m)
    }
}

fn decode(path: &Path, h: &Header, bytes: &[u8]) -> Result<VoxelData> {
    let n = h.dims.iter().product::<usize>();
    let width = match h.datatype {
        DT_UINT8 | DT_INT8 => 1,
        DT_INT16 | DT_UINT16 => 2,
        DT_INT32 | DT_UINT32 | DT_FLOAT32 => 4,
        DT_FLOAT64 => 8,
        other => return Err(Error::UnsupportedFormat(format!("NIfTI datatype {other}"))),
    };
    let need = h.vox_offset + n * width;
    if bytes.len() < need {
        return Err(Error::unreadable(
            path,
            format!("truncated: {} of {need} bytes present", bytes.len()),
        ));
    }
    let payload = &bytes[h.vox_offset..need];
    let c = Cursor { bytes: payload, endian: h.endian };
    let slope = if h.scl_slope.is_finite() && h.scl_slope != 0.0 { h.scl_slope } else { 1.0 };
    let inter = if h.scl_inter.is_finite() { h.scl_inter } else { 0.0 };
    let identity = slope == 1.0 && inter == 0.0;

    if identity {
        match h.datatype {
            DT_UINT8 => return Ok(VoxelData::U8(payload.to_vec())),
            DT_INT16 => return Ok(VoxelData::I16((0..n).map(|i| c.i16(2 * i)).collect())),
            _ => {}
        }
    }
    let raw = |i: usize| -> f64 {
        match h.datatype {
            DT_UINT8 => f64::from(payload[i]),
            DT_INT8 => f64::from(payload[i] as i8),
            DT_INT16 => f64::from(c.i16(2 * i)),
            DT_UINT16 => f64::from(c.i16(2 * i) as u16),
            DT_INT32 => f64::from(c.i32(4 * i)),
            DT_UINT32 => f64::from(c.i32(4 * i) as u32),
            DT_FLOAT32 => c.f32(4 * i),
            DT_FLOAT64 => {
                let b: [u8; 8] = payload[8 * i..8 * i + 8].try_into().unwrap();
                match h.endian {
                    Endian::Little => f64::from_le_bytes(b),
                    Endian::Big => f64::from_be_bytes(b),
                }
            }
            _ => unreachable!(),
        }
    };
    Ok(VoxelData::F32((0..n).map(|i| (raw(i) * slope + inter) as f32).collect()))
}

/// Reads a NIfTI-1 file without reorienting it.
pub fn read_raw(path: &Path) -> Result<RawNifti> {
    let bytes = read_bytes(path)?;
    let header = parse_header(path, &bytes)?;
    let data = decode(path, &header, &bytes)?;
    Ok(RawNifti {
        dims: header.dims,
        affine: header.affine(),
        data,
    })
}

/// Mapping from file voxel axes to canonical axes.
struct Reorientation {
    grid: Grid,
    /// For each canonical axis: (file axis, flipped).
    axes: [(usize, bool); 3],
}

fn reorientation(path: &Path, raw: &RawNifti) -> Result<Reorientation> {
    let m = raw.affine.ok_or_else(|| Error::MissingOrientation(path.to_path_buf()))?;
    // Greedy assignment of file axes to world axes by largest direction cosine.
    let mut world_of = [usize::MAX; 3];
    let mut used_world = [false; 3];
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(9);
    for j in 0..3 {
        for w in 0..3 {
            pairs.push((m[w][j].abs(), j, w));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (mag, j, w) in pairs {
        if world_of[j] == usize::MAX && !used_world[w] && mag > 0.0 {
            world_of[j] = w;
            used_world[w] = true;
        }
    }
    if world_of.contains(&usize::MAX) {
        return Err(Error::MissingOrientation(path.to_path_buf()));
    }
    let column_norm = |j: usize| (0..3).map(|w| m[w][j] * m[w][j]).sum::<f64>().sqrt();

    let mut axes = [(0usize, false); 3];
    let mut dims = [0usize; 3];
    let mut spacing = [0.0; 3];
    let mut corner = [0f64; 3];
    for (c, &(world, sign)) in CANONICAL.iter().enumerate() {
        let j = world_of.iter().position(|&w| w == world).unwrap();
        let flipped = m[world][j].signum() != sign;
        axes[c] = (j, flipped);
        dims[c] = raw.dims[j];
        spacing[c] = column_norm(j);
        if flipped {
            corner[j] = (raw.dims[j] - 1) as f64;
        }
    }
    let mut origin = [0.0; 3];
    for (w, o) in origin.iter_mut().enumerate() {
        *o = m[w][3] + (0..3).map(|j| m[w][j] * corner[j]).sum::<f64>();
        if !o.is_finite() {
            *o = 0.0;
        }
    }
    let grid = Grid::with_origin(dims, spacing, origin)
        .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))?;
    Ok(Reorientation { grid, axes })
}

/// Copies `src` (file order) into canonical order.
fn permute<T: Copy>(src: &[T], file_dims: [usize; 3], r: &Reorientation) -> Vec<T> {
    let strides = [1isize, file_dims[0] as isize, (file_dims[0] * file_dims[1]) as isize];
    let mut start = 0isize;
    let mut step = [0isize; 3];
    for (c, &(j, flipped)) in r.axes.iter().enumerate() {
        if flipped {
            start += (file_dims[j] as isize - 1) * strides[j];
            step[c] = -strides[j];
        } else {
            step[c] = strides[j];
        }
    }
    let [nx, ny, nz] = r.grid.dims;
    let mut out = Vec::with_capacity(src.len());
    for z in 0..nz as isize {
        for y in 0..ny as isize {
            let row = start + z * step[2] + y * step[1];
            if step[0] == 1 {
                let row = row as usize;
                out.extend_from_slice(&src[row..row + nx]);
            } else {
                out.extend((0..nx as isize).map(|x| src[(row + x * step[0]) as usize]));
            }
        }
    }
    out
}

fn hu_from_f32(v: f32) -> i16 {
    let r = v.round();
    if r.is_nan() {
        0
    } else {
        r.clamp(f32::from(i16::MIN), f32::from(i16::MAX)) as i16
    }
}

/// Loads a CT volume, reoriented to canonical axes.
pub fn load_volume(path: &Path) -> Result<Volume> {
    let raw = read_raw(path)?;
    let r = reorientation(path, &raw)?;
    let values = match &raw.data {
        VoxelData::I16(v) => permute(v, raw.dims, &r),
        VoxelData::U8(v) => permute(v, raw.dims, &r).into_iter().map(i16::from).collect(),
        VoxelData::F32(v) => permute(v, raw.dims, &r).into_iter().map(hu_from_f32).collect(),
    };
    Volume::new(r.grid, values)
}

fn load_u8_values(path: &Path) -> Result<(Grid, Vec<u8>)> {
    let raw = read_raw(path)?;
    let r = reorientation(path, &raw)?;
    let to_u8 = |v: f32, i: usize| -> Result<u8> {
        if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
            Ok(v as u8)
        } else {
            Err(Error::InvalidLabelValue { value: u8::MAX, index: i })
        }
    };
    let values = match &raw.data {
        VoxelData::U8(v) => permute(v, raw.dims, &r),
        VoxelData::I16(v) => permute(v, raw.dims, &r)
            .into_iter()
            .enumerate()
            .map(|(i, x)| to_u8(f32::from(x), i))
            .collect::<Result<_>>()?,
        VoxelData::F32(v) => permute(v, raw.dims, &r)
            .into_iter()
            .enumerate()
            .map(|(i, x)| to_u8(x, i))
            .collect::<Result<_>>()?,
    };
    Ok((r.grid, values))
}

/// Loads a label map; any value outside {0, 1, 2} is rejected.
pub fn load_labelmap(path: &Path) -> Result<LabelMap> {
    let (grid, values) = load_u8_values(path)?;
    LabelMap::from_raw(grid, values)
}

/// Loads a mask; every non-zero voxel is set.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let raw = read_raw(path)?;
    let r = reorientation(path, &raw)?;
    let bits = match &raw.data {
        VoxelData::U8(v) => permute(v, raw.dims, &r).into_iter().map(|x| x != 0).collect(),
        VoxelData::I16(v) => permute(v, raw.dims, &r).into_iter().map(|x| x != 0).collect(),
        VoxelData::F32(v) => permute(v, raw.dims, &r).into_iter().map(|x| x != 0.0).collect(),
    };
    BinaryMask::from_bits(r.grid, bits)
}

fn header_bytes(raw: &RawNifti) -> Vec<u8> {
    let mut h = vec![0u8; VOX_OFFSET];
    let put_i16 = |h: &mut [u8], at: usize, v: i16| h[at..at + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut [u8], at: usize, v: f64| h[at..at + 4].copy_from_slice(&(v as f32).to_le_bytes());
    h[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    h[38] = b'r';
    put_i16(&mut h, 40, 3);
    for a in 0..3 {
        put_i16(&mut h, 42 + 2 * a, raw.dims[a] as i16);
    }
    for a in 3..7 {
        put_i16(&mut h, 42 + 2 * a, 1);
    }
    let (datatype, bitpix) = match raw.data {
        VoxelData::U8(_) => (DT_UINT8, 8),
        VoxelData::I16(_) => (DT_INT16, 16),
        VoxelData::F32(_) => (DT_FLOAT32, 32),
    };
    put_i16(&mut h, 70, datatype);
    put_i16(&mut h, 72, bitpix);

    let affine = raw.affine.unwrap_or([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]]);
    let norms: Vec<f64> = (0..3)
        .map(|j| (0..3).map(|w| affine[w][j] * affine[w][j]).sum::<f64>().sqrt())
        .collect();
    put_f32(&mut h, 76, 1.0);
    for a in 0..3 {
        put_f32(&mut h, 80 + 4 * a, norms[a]);
    }
    put_f32(&mut h, 108, VOX_OFFSET as f64);
    put_f32(&mut h, 112, 1.0);
    h[123] = 2; // xyzt_units: mm
    if let Some(m) = raw.affine {
        put_i16(&mut h, 254, 1);
        for (r, row) in m.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                put_f32(&mut h, 280 + 16 * r + 4 * k, v);
            }
        }
        if let Some((quat, qfac)) = quaternion_of(&m, &norms) {
            put_i16(&mut h, 252, 1);
            put_f32(&mut h, 76, qfac);
            for k in 0..3 {
                put_f32(&mut h, 256 + 4 * k, quat[k]);
                put_f32(&mut h, 268 + 4 * k, m[k][3]);
            }
        }
    }
    h[344..348].copy_from_slice(b"n+1\0");
    h
}

/// Quaternion (b, c, d) and qfac for an axis-aligned affine; `None` for
/// oblique ones, which are written with the sform only.
fn quaternion_of(m: &[[f64; 4]; 3], norms: &[f64]) -> Option<([f64; 3], f64)> {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = m[i][j] / norms[j];
        }
    }
    let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    let qfac = if det < 0.0 { -1.0 } else { 1.0 };
    if qfac < 0.0 {
        for row in &mut r {
            row[2] = -row[2];
        }
    }
    let mut a = 0.5 * (1.0 + r[0][0] + r[1][1] + r[2][2]).max(0.0).sqrt();
    let (mut b, mut c, mut d);
    if a > 0.5 {
        b = 0.25 * (r[2][1] - r[1][2]) / a;
        c = 0.25 * (r[0][2] - r[2][0]) / a;
        d = 0.25 * (r[1][0] - r[0][1]) / a;
    } else {
        let xd = (1.0 + r[0][0] - r[1][1] - r[2][2]).max(0.0).sqrt();
        let yd = (1.0 - r[0][0] + r[1][1] - r[2][2]).max(0.0).sqrt();
        let zd = (1.0 - r[0][0] - r[1][1] + r[2][2]).max(0.0).sqrt();
        if xd > 1.0 {
            b = 0.5 * xd;
            c = 0.25 * (r[0][1] + r[1][0]) / b;
            d = 0.25 * (r[0][2] + r[2][0]) / b;
            a = 0.25 * (r[2][1] - r[1][2]) / b;
        } else if yd > 1.0 {
            c = 0.5 * yd;
            b = 0.25 * (r[0][1] + r[1][0]) / c;
            d = 0.25 * (r[1][2] + r[2][1]) / c;
            a = 0.25 * (r[0][2] - r[2][0]) / c;
        } else {
            d = 0.5 * zd;
            b = 0.25 * (r[0][2] + r[2][0]) / d;
            c = 0.25 * (r[1][2] + r[2][1]) / d;
            a = 0.25 * (r[1][0] - r[0][1]) / d;
        }
        if a < 0.0 {
            b = -b;
            c = -c;
            d = -d;
        }
    }
    let axis_aligned = r.iter().flatten().all(|v| v.abs() < 1e-6 || (v.abs() - 1.0).abs() < 1e-6);
    axis_aligned.then_some(([b, c, d], qfac))
}

fn write_payload<W: Write>(w: &mut W, data: &VoxelData) -> std::io::Result<()> {
    match data {
        VoxelData::U8(v) => w.write_all(v),
        VoxelData::I16(v) => {
            let mut buf = Vec::with_capacity(v.len() * 2);
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)
        }
        VoxelData::F32(v) => {
            let mut buf = Vec::with_capacity(v.len() * 4);
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)
        }
    }
}

/// Writes an image in file order; gzip is used when the path ends in `.gz`.
pub fn write_raw(path: &Path, raw: &RawNifti) -> Result<()> {
    if raw.data.len() != raw.dims.iter().product::<usize>() {
        return Err(Error::InvalidGeometry("payload length does not match dims".into()));
    }
    if raw.dims.iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::InvalidGeometry(format!("dims {:?} exceed the NIfTI-1 limit", raw.dims)));
    }
    let header = header_bytes(raw);
    let write = || -> std::io::Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let file = BufWriter::new(File::create(path)?);
        if path.extension().is_some_and(|e| e == "gz") {
            let mut gz = GzEncoder::new(file, Compression::fast());
            gz.write_all(&header)?;
            write_payload(&mut gz, &raw.data)?;
            gz.finish()?.flush()
        } else {
            let mut file = file;
            file.write_all(&header)?;
            write_payload(&mut file, &raw.data)?;
            file.flush()
        }
    };
    write().map_err(|e| Error::unwritable(path, e))
}

pub fn save_volume(v: &Volume, path: &Path) -> Result<()> {
    write_raw(
        path,
        &RawNifti {
            dims: v.dims(),
            affine: Some(RawNifti::canonical_affine(v.grid())),
            data: VoxelData::I16(v.values().to_vec()),
        },
    )
}

/// Writes labels as unsigned 8-bit.
pub fn save_labelmap(lm: &LabelMap, path: &Path) -> Result<()> {
    write_raw(
        path,
        &RawNifti {
            dims: lm.dims(),
            affine: Some(RawNifti::canonical_affine(lm.grid())),
            data: VoxelData::U8(lm.raw().to_vec()),
        },
    )
}

pub fn save_mask(m: &BinaryMask, path: &Path) -> Result<()> {
    write_raw(
        path,
        &RawNifti {
            dims: m.dims(),
            affine: Some(RawNifti::canonical_affine(m.grid())),
            data: VoxelData::U8(m.bits().iter().map(|&b| b as u8).collect()),
        },
    )
}
