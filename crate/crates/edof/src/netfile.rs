//! Binary network files.
//!
//! Layout, little-endian: the magic `EDFN`, a `u32` format version, a `u32`
//! layer count, then per layer four `u32` dimensions (out, in, kernel height,
//! kernel width) followed by the weights and the biases as `f32`.

use std::fs;
use std::path::Path;

use edof_core::fusion::{FusionNet, LayerShape};

use crate::error::{CliError, CliResult};
use crate::io::write_bytes;

pub const MAGIC: &[u8; 4] = b"EDFN";
pub const VERSION: u32 = 1;

pub fn encode(net: &FusionNet) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + net.parameter_count() * 4 + net.shapes().len() * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.shapes().len() as u32).to_le_bytes());
    for (l, s) in net.shapes().iter().enumerate() {
        for d in [s.out_channels, s.in_channels, s.kernel, s.kernel] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for p in &net.parameters()[net.weight_range(l).start..net.bias_range(l).end] {
            out.extend_from_slice(&(*p as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], String> {
        let end = self.pos + n;
        let s = self.bytes.get(self.pos..end).ok_or("truncated network file")?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    fn f32(&mut self) -> Result<f32, String> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<FusionNet, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err("not an EDFN network file".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported network file version {version}"));
    }
    let layers = r.u32()? as usize;
    if layers > 64 {
        return Err(format!("implausible layer count {layers}"));
    }
    let mut shapes = Vec::with_capacity(layers);
    let mut params = Vec::new();
    for _ in 0..layers {
        let (o, i, kh, kw) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        if kh != kw {
            return Err("non-square kernels are not supported".into());
        }
        let shape = LayerShape {
            out_channels: o,
            in_channels: i,
            kernel: kh,
        };
        if shape.param_count() > bytes.len() {
            return Err("layer larger than the file".into());
        }
        for _ in 0..shape.param_count() {
            params.push(f64::from(r.f32()?));
        }
        shapes.push(shape);
    }
    if r.pos != bytes.len() {
        return Err("trailing bytes after the last layer".into());
    }
    FusionNet::from_parameters(&shapes, params).map_err(|e| e.to_string())
}

pub fn save(path: &Path, net: &FusionNet) -> CliResult<()> {
    write_bytes(path, &encode(net))
}

pub fn load(path: &Path) -> CliResult<FusionNet> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|m| CliError::format(path, m))
}

/// The network as it will read back from a file (parameters rounded to
/// `f32`). Fails when a parameter does not fit in `f32`.
pub fn quantized(net: &FusionNet) -> Result<FusionNet, String> {
    decode(&encode(net))
}
