//! Binary weight checkpoints.
//!
//! Layout (all integers little-endian `u32`, payload little-endian `f64`):
//!
//! ```text
//! magic "PTWT" | version | count
//! count x ( name_len | name bytes (UTF-8) | rank | dims[rank] | payload[prod(dims)] )
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::dense::Tensor;

pub const MAGIC: &[u8; 4] = b"PTWT";
pub const VERSION: u32 = 1;

pub fn write_tensors<W: Write>(mut w: W, tensors: &[(String, Tensor)]) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.rank() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::parse(format!("checkpoint truncated: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| Error::parse(format!("checkpoint truncated: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::parse("bad checkpoint magic"));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::parse(format!("unsupported checkpoint version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|e| Error::parse(format!("checkpoint truncated: {e}")))?;
        let name = String::from_utf8(name).map_err(|_| Error::parse("tensor name is not UTF-8"))?;
        let rank = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; n * 8];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::parse(format!("checkpoint truncated in {name}: {e}")))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

pub fn save(path: &Path, tensors: &[(String, Tensor)]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_tensors(std::io::BufWriter::new(f), tensors).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tensors(std::io::BufReader::new(f))
}
