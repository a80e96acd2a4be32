//! Self-describing binary tensor container.
//!
//! Layout: magic "S2VT", version u32, ndim u32, one u64 per extent, dtype
//! tag u8 (0 = f32, 1 = f64), then the raw little-endian values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

pub const TENSOR_MAGIC: [u8; 4] = *b"S2VT";
const TENSOR_VERSION: u32 = 1;

/// Storage precision of the on-disk container. Compute is always f64.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    fn tag(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(DType::F32),
            1 => Some(DType::F64),
            _ => None,
        }
    }
}

/// Write one tensor into `w` in container format.
pub fn write_tensor<W: Write>(w: &mut W, t: &Tensor, dtype: DType) -> std::io::Result<()> {
    w.write_all(&TENSOR_MAGIC)?;
    w.write_all(&TENSOR_VERSION.to_le_bytes())?;
    w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
    for &e in t.shape() {
        w.write_all(&(e as u64).to_le_bytes())?;
    }
    w.write_all(&[dtype.tag()])?;
    match dtype {
        DType::F32 => {
            for &v in t.data() {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        DType::F64 => {
            for &v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Read one tensor in container format from `r`.
pub fn read_tensor<R: Read>(r: &mut R, origin: &Path) -> Result<Tensor> {
    let io_err = |e: std::io::Error| Error::io(origin, e);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if magic != TENSOR_MAGIC {
        return Err(Error::integrity(origin, "bad tensor magic"));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(io_err)?;
    let version = u32::from_le_bytes(u32buf);
    if version != TENSOR_VERSION {
        return Err(Error::integrity(
            origin,
            format!("unsupported tensor container version {version}"),
        ));
    }
    r.read_exact(&mut u32buf).map_err(io_err)?;
    let ndim = u32::from_le_bytes(u32buf) as usize;
    if ndim > 8 {
        return Err(Error::integrity(origin, format!("implausible ndim {ndim}")));
    }
    let mut shape = Vec::with_capacity(ndim);
    let mut u64buf = [0u8; 8];
    for _ in 0..ndim {
        r.read_exact(&mut u64buf).map_err(io_err)?;
        shape.push(u64::from_le_bytes(u64buf) as usize);
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag).map_err(io_err)?;
    let dtype = DType::from_tag(tag[0])
        .ok_or_else(|| Error::integrity(origin, format!("unknown dtype tag {}", tag[0])))?;
    let numel: usize = shape.iter().product();
    let mut data = Vec::with_capacity(numel);
    match dtype {
        DType::F32 => {
            let mut buf = [0u8; 4];
            for _ in 0..numel {
                r.read_exact(&mut buf).map_err(io_err)?;
                data.push(f32::from_le_bytes(buf) as f64);
            }
        }
        DType::F64 => {
            let mut buf = [0u8; 8];
            for _ in 0..numel {
                r.read_exact(&mut buf).map_err(io_err)?;
                data.push(f64::from_le_bytes(buf));
            }
        }
    }
    Tensor::from_vec(shape, data)
}

pub fn save_tensor(path: impl AsRef<Path>, t: &Tensor, dtype: DType) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_tensor(&mut w, t, dtype).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    read_tensor(&mut r, path)
}
