//! Minimal single-file NIfTI-1 reader/writer (`.nii`, `.nii.gz`).
//!
//! Reads int16, uint16 and float32 payloads and converts them to the
//! canonical uint16 representation; writes uint16 with `vox_offset = 352`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::volume::Volume;
use crate::error::{Error, Result};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;

pub const DT_INT16: i16 = 4;
pub const DT_FLOAT32: i16 = 16;
pub const DT_UINT16: i16 = 512;

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const MAGIC: usize = 344;
}

fn is_gzip(path: &Path, bytes: &[u8]) -> bool {
    bytes.starts_with(&[0x1f, 0x8b])
        || path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

#[derive(Clone, Copy)]
struct Reader<'a> {
    bytes: &'a [u8],
    big_endian: bool,
}

impl Reader<'_> {
    fn chunk<const N: usize>(&self, at: usize) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.bytes[at..at + N]);
        b
    }

    fn i16(&self, at: usize) -> i16 {
        let b = self.chunk::<2>(at);
        if self.big_endian {
            i16::from_be_bytes(b)
        } else {
            i16::from_le_bytes(b)
        }
    }

    fn i32(&self, at: usize) -> i32 {
        let b = self.chunk::<4>(at);
        if self.big_endian {
            i32::from_be_bytes(b)
        } else {
            i32::from_le_bytes(b)
        }
    }

    fn f32(&self, at: usize) -> f32 {
        let b = self.chunk::<4>(at);
        if self.big_endian {
            f32::from_be_bytes(b)
        } else {
            f32::from_le_bytes(b)
        }
    }

    fn u16(&self, at: usize) -> u16 {
        let b = self.chunk::<2>(at);
        if self.big_endian {
            u16::from_be_bytes(b)
        } else {
            u16::from_le_bytes(b)
        }
    }
}

fn to_u16(v: f64) -> u16 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 65535.0) as u16
    }
}

/// Parses an in-memory NIfTI-1 image (already decompressed).
pub fn parse_nifti(bytes: &[u8], path: &Path) -> Result<Volume> {
    let err = |field: &'static str, reason: String| Error::Nifti {
        path: path.to_path_buf(),
        field,
        reason,
    };
    if bytes.len() < HEADER_SIZE {
        return Err(err(
            "header",
            format!("truncated: {} bytes, need {HEADER_SIZE}", bytes.len()),
        ));
    }
    let le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let be = i32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let big_endian = match (le, be) {
        (348, _) => false,
        (_, 348) => true,
        _ => return Err(err("sizeof_hdr", format!("expected 348, got {le}"))),
    };
    let r = Reader { bytes, big_endian };
    debug_assert_eq!(r.i32(offsets::SIZEOF_HDR), 348);

    let magic = &bytes[offsets::MAGIC..offsets::MAGIC + 4];
    if magic != b"n+1\0" {
        return Err(err(
            "magic",
            format!("expected \"n+1\", got {:?}", String::from_utf8_lossy(magic)),
        ));
    }

    let ndim = r.i16(offsets::DIM);
    if !(3..=7).contains(&ndim) {
        return Err(err("dim", format!("dim[0] = {ndim}, need 3 to 7")));
    }
    let mut dims = [0usize; 3];
    for (k, d) in dims.iter_mut().enumerate() {
        let v = r.i16(offsets::DIM + 2 * (k + 1));
        if v <= 0 {
            return Err(err("dim", format!("dim[{}] = {v} is not positive", k + 1)));
        }
        *d = v as usize;
    }
    for k in 4..=ndim as usize {
        let v = r.i16(offsets::DIM + 2 * k);
        if v > 1 {
            return Err(err("dim", format!("dim[{k}] = {v}: only 3D volumes are supported")));
        }
    }
    let mut voxel_size = [0f64; 3];
    for (k, s) in voxel_size.iter_mut().enumerate() {
        let v = widen_decimal(r.f32(offsets::PIXDIM + 4 * (k + 1)));
        if !(v.abs() > 0.0) || !v.is_finite() {
            return Err(err("pixdim", format!("pixdim[{}] = {v} is not positive", k + 1)));
        }
        *s = v.abs();
    }

    let datatype = r.i16(offsets::DATATYPE);
    let width = match datatype {
        DT_INT16 | DT_UINT16 => 2,
        DT_FLOAT32 => 4,
        code => {
            return Err(Error::UnsupportedDatatype {
                path: path.to_path_buf(),
                code,
            })
        }
    };
    let bitpix = r.i16(offsets::BITPIX);
    if bitpix != 8 * width as i16 {
        return Err(err(
            "bitpix",
            format!("{bitpix} does not match datatype {datatype}"),
        ));
    }
    let offset = r.f32(offsets::VOX_OFFSET);
    if !(offset >= HEADER_SIZE as f32) || offset.fract() != 0.0 {
        return Err(err("vox_offset", format!("invalid offset {offset}")));
    }
    let offset = offset as usize;
    let n: usize = dims.iter().product();
    let needed = offset + n * width;
    if bytes.len() < needed {
        return Err(err(
            "data",
            format!("truncated payload: {} bytes, need {needed}", bytes.len()),
        ));
    }

    let slope = r.f32(offsets::SCL_SLOPE) as f64;
    let inter = r.f32(offsets::SCL_INTER) as f64;
    let scaled = slope != 0.0 && slope.is_finite() && !(slope == 1.0 && inter == 0.0);

    let raw = |i: usize| -> f64 {
        let at = offset + i * width;
        match datatype {
            DT_INT16 => r.i16(at) as f64,
            DT_UINT16 => r.u16(at) as f64,
            _ => r.f32(at) as f64,
        }
    };
    let data: Vec<u16> = if datatype == DT_UINT16 && !scaled {
        (0..n).map(|i| r.u16(offset + 2 * i)).collect()
    } else {
        let mut clamped = 0usize;
        let data = (0..n)
            .map(|i| {
                let mut v = raw(i);
                if scaled {
                    v = v * slope + inter;
                }
                if !(0.0..=65535.0).contains(&v) || v.fract() != 0.0 {
                    clamped += 1;
                }
                to_u16(v)
            })
            .collect();
        if clamped > 0 {
            log::warn!(
                "{}: {clamped} voxels rounded or clamped to the uint16 range",
                path.display()
            );
        }
        data
    };

    let descrip = &bytes[offsets::DESCRIP..offsets::DESCRIP + 80];
    let descrip = String::from_utf8_lossy(descrip.split(|b| *b == 0).next().unwrap_or(&[]))
        .into_owned();
    let modality = descrip
        .strip_prefix("modality=")
        .and_then(|m| m.parse().ok())
        .unwrap_or_default();

    Volume::new(dims, voxel_size, data, modality)
}

pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bytes = if is_gzip(path, &raw) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Nifti {
                path: path.to_path_buf(),
                field: "gzip",
                reason: e.to_string(),
            })?;
        out
    } else {
        raw
    };
    parse_nifti(&bytes, path)
}

/// Serializes a volume as little-endian NIfTI-1 uint16.
pub fn encode_nifti(volume: &Volume) -> Vec<u8> {
    let mut h = vec![0u8; VOX_OFFSET];
    let put_i16 = |h: &mut [u8], at: usize, v: i16| h[at..at + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut [u8], at: usize, v: f32| h[at..at + 4].copy_from_slice(&v.to_le_bytes());

    h[offsets::SIZEOF_HDR..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    h[38] = b'r'; // regular
    let dims = volume.dims();
    put_i16(&mut h, offsets::DIM, 3);
    for (k, d) in dims.iter().enumerate() {
        put_i16(&mut h, offsets::DIM + 2 * (k + 1), *d as i16);
    }
    for k in 4..8 {
        put_i16(&mut h, offsets::DIM + 2 * k, 1);
    }
    put_i16(&mut h, offsets::DATATYPE, DT_UINT16);
    put_i16(&mut h, offsets::BITPIX, 16);
    put_f32(&mut h, offsets::PIXDIM, 1.0);
    for (k, s) in volume.voxel_size().iter().enumerate() {
        put_f32(&mut h, offsets::PIXDIM + 4 * (k + 1), *s as f32);
    }
    put_f32(&mut h, offsets::VOX_OFFSET, VOX_OFFSET as f32);
    put_f32(&mut h, offsets::SCL_SLOPE, 1.0);
    put_f32(&mut h, offsets::SCL_INTER, 0.0);
    h[offsets::XYZT_UNITS] = 2 | 8; // mm, s
    let descrip = format!("modality={}", volume.modality);
    h[offsets::DESCRIP..offsets::DESCRIP + descrip.len()].copy_from_slice(descrip.as_bytes());
    h[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(b"n+1\0");

    h.reserve(volume.len() * 2);
    for v in volume.data() {
        h.extend_from_slice(&v.to_le_bytes());
    }
    h
}

/// Writes `.nii`, or gzip-compressed output when the path ends in `.gz`.
pub fn write_nifti(volume: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_nifti(volume);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let gz = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    let res = if gz {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::fast());
        enc.write_all(&bytes)
            .and_then(|_| enc.finish())
            .and_then(|mut w| w.flush())
    } else {
        let mut w = BufWriter::new(file);
        w.write_all(&bytes).and_then(|_| w.flush())
    };
    res.map_err(|e| Error::io(path, e))
}

/// Widens an f32 header field to the f64 with the same shortest decimal
/// spelling, so that a size written as `0.8` reads back as `0.8`.
fn widen_decimal(v: f32) -> f64 {
    v.to_string().parse().unwrap_or(v as f64)
}
