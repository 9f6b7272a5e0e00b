use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Modality {
    #[default]
    T1,
    T2,
    Flair,
    Synthetic,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::T1 => "T1",
            Modality::T2 => "T2",
            Modality::Flair => "FLAIR",
            Modality::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "t1" | "t1w" => Ok(Modality::T1),
            "t2" | "t2w" => Ok(Modality::T2),
            "flair" => Ok(Modality::Flair),
            "synthetic" => Ok(Modality::Synthetic),
            other => Err(Error::Config(format!("unknown modality {other:?}"))),
        }
    }
}

/// 3D image with unsigned 16-bit intensities in x-fastest order.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    voxel_size: [f64; 3],
    data: Vec<u16>,
    pub modality: Modality,
}

impl Volume {
    pub fn new(
        dims: [usize; 3],
        voxel_size: [f64; 3],
        data: Vec<u16>,
        modality: Modality,
    ) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidVolume(format!("zero-sized dimension in {dims:?}")));
        }
        if voxel_size.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidVolume(format!(
                "voxel sizes must be positive, got {voxel_size:?}"
            )));
        }
        let n = dims.iter().product::<usize>();
        if data.len() != n {
            return Err(Error::InvalidVolume(format!(
                "data length {} does not match dims {dims:?} ({n})",
                data.len()
            )));
        }
        Ok(Self {
            dims,
            voxel_size,
            data,
            modality,
        })
    }

    pub fn zeros(dims: [usize; 3], voxel_size: [f64; 3], modality: Modality) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, voxel_size, vec![0; n], modality)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size(&self) -> [f64; 3] {
        self.voxel_size
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u16] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u16> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u16 {
        self.data[self.index(x, y, z)]
    }

    /// Same geometry, new intensities.
    pub fn with_data(&self, data: Vec<u16>) -> Result<Self> {
        Self::new(self.dims, self.voxel_size, data, self.modality)
    }

    pub fn map(&self, f: impl Fn(u16) -> u16) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// Reverses the index order along `axis` (0 = x, 1 = y, 2 = z).
    pub fn flip(&self, axis: usize) -> Self {
        let [nx, ny, nz] = self.dims;
        let mut out = self.clone();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let (sx, sy, sz) = match axis {
                        0 => (nx - 1 - x, y, z),
                        1 => (x, ny - 1 - y, z),
                        _ => (x, y, nz - 1 - z),
                    };
                    out.data[x + nx * (y + ny * z)] = self.data[sx + nx * (sy + ny * sz)];
                }
            }
        }
        out
    }
}
