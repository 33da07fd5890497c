//! Binary point-cloud files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "PCLD" | version: u32 | n: u32 | d: u32
//! n x ( position: 3 x f32 | normal: 3 x f32 | feature: d x f32 | face_index: u32 )
//! ```
//!
//! Values are stored as `f32`; reading yields the `f32` values widened to `f64`, so a
//! read-write cycle reproduces the file byte for byte.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::sample::{NormTransform, PointCloud, PointSample};

pub const MAGIC: &[u8; 4] = b"PCLD";
pub const VERSION: u32 = 1;

pub fn write_pcld<W: Write>(mut w: W, cloud: &PointCloud) -> Result<()> {
    let d = cloud.feature_dim();
    if cloud.samples.iter().any(|s| s.feature.len() != d) {
        return Err(Error::invalid("point features have inconsistent dimensions"));
    }
    let io = |e| Error::io("<pcld stream>", e);
    let mut buf = Vec::with_capacity(16 + cloud.len() * (28 + 4 * d));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(cloud.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(d as u32).to_le_bytes());
    for s in &cloud.samples {
        for v in s.position.iter().chain(&s.normal).chain(&s.feature) {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        buf.extend_from_slice(&s.source_face.to_le_bytes());
    }
    w.write_all(&buf).map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_pcld<R: Read>(mut r: R) -> Result<PointCloud> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::io("<pcld stream>", e))?;
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::parse("not a PCLD file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::parse(format!("unsupported PCLD version {version}")));
    }
    let (n, d) = (u32_at(8) as usize, u32_at(12) as usize);
    let stride = 4 * (7 + d);
    if bytes.len() != 16 + n * stride {
        return Err(Error::parse(format!(
            "PCLD size mismatch: header says {n} points of dim {d}, payload is {} bytes",
            bytes.len() - 16
        )));
    }
    let f = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as f64;
    let samples = (0..n)
        .map(|i| {
            let o = 16 + i * stride;
            PointSample {
                position: [f(o), f(o + 4), f(o + 8)],
                normal: [f(o + 12), f(o + 16), f(o + 20)],
                feature: (0..d).map(|k| f(o + 24 + 4 * k)).collect(),
                source_face: u32_at(o + 24 + 4 * d),
            }
        })
        .collect();
    Ok(PointCloud {
        samples,
        transform: NormTransform::default(),
    })
}

pub fn save_pcld(path: &Path, cloud: &PointCloud) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_pcld(std::io::BufWriter::new(f), cloud)
}

pub fn load_pcld(path: &Path) -> Result<PointCloud> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_pcld(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_point_cloud, Mesh, SampleParams};

    #[test]
    fn round_trip_bytes_identical() {
        let m = Mesh::cuboid([0.0; 3], [1.0, 0.3, 0.7]);
        let mut c = sample_point_cloud(&m, &SampleParams::training(300, 9)).unwrap();
        for (i, s) in c.samples.iter_mut().enumerate() {
            s.feature = vec![i as f64 * 0.1, -1.0 / (i as f64 + 1.0)];
        }
        let mut first = Vec::new();
        write_pcld(&mut first, &c).unwrap();
        let back = read_pcld(&first[..]).unwrap();
        assert_eq!(back.len(), 300);
        assert_eq!(back.feature_dim(), 2);
        for (a, b) in c.samples.iter().zip(&back.samples) {
            assert_eq!(a.source_face, b.source_face);
            for k in 0..3 {
                assert_eq!((a.position[k] as f32) as f64, b.position[k]);
            }
        }
        let mut second = Vec::new();
        write_pcld(&mut second, &back).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_pcld(&b"PCLX\x01\0\0\0\0\0\0\0\0\0\0\0"[..]).is_err());
        let mut hdr = b"PCLD".to_vec();
        hdr.extend_from_slice(&1u32.to_le_bytes());
        hdr.extend_from_slice(&5u32.to_le_bytes());
        hdr.extend_from_slice(&0u32.to_le_bytes());
        assert!(read_pcld(&hdr[..]).is_err());
    }
}
