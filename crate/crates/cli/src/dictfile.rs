//! Binary dictionary files: `SBDL` magic, u16 version, u16 filter side,
//! u32 atom count, then `f*f*m` little-endian f64 values atom by atom.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use slicedict::LocalDictionary;

const MAGIC: &[u8; 4] = b"SBDL";
pub const VERSION: u16 = 1;
const HEADER: usize = 12;
const NORM_TOLERANCE: f64 = 1e-8;

pub fn encode(dict: &LocalDictionary) -> Result<Vec<u8>> {
    let n = dict.patch_len();
    let f = (n as f64).sqrt().round() as usize;
    ensure!(f * f == n, "patch length {n} is not a square");
    let side = u16::try_from(f).context("filter side does not fit in u16")?;
    let count = u32::try_from(dict.atom_count()).context("atom count does not fit in u32")?;

    let mut out = Vec::with_capacity(HEADER + 8 * dict.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&side.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for v in dict.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<LocalDictionary> {
    ensure!(bytes.len() >= HEADER, "dictionary file too short");
    if &bytes[..4] != MAGIC {
        bail!("bad magic, not a dictionary file");
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    ensure!(version == VERSION, "unsupported dictionary version {version}");
    let f = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let m = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    ensure!(f >= 1 && m >= 1, "empty dictionary");
    let n = f * f;
    let payload = &bytes[HEADER..];
    ensure!(
        payload.len() == 8 * n * m,
        "payload is {} bytes, expected {}",
        payload.len(),
        8 * n * m
    );
    let atoms: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    for (j, atom) in atoms.chunks_exact(n).enumerate() {
        let norm = atom.iter().map(|v| v * v).sum::<f64>().sqrt();
        ensure!(
            (norm - 1.0).abs() <= NORM_TOLERANCE,
            "atom {j} has norm {norm}, expected 1"
        );
    }
    LocalDictionary::from_columns(n, atoms).map_err(Into::into)
}

pub fn write(path: &Path, dict: &LocalDictionary) -> Result<()> {
    fs::write(path, encode(dict)?).with_context(|| format!("writing {}", path.display()))
}

pub fn read(path: &Path) -> Result<LocalDictionary> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use slicedict::init_dictionary;

    #[test]
    fn round_trip_is_bit_exact() {
        let d = init_dictionary(49, 5, 3);
        let bytes = encode(&d).unwrap();
        assert_eq!(bytes.len(), 12 + 8 * 49 * 5);
        assert_eq!(&bytes[..4], b"SBDL");
        assert_eq!(&bytes[4..12], &[1, 0, 7, 0, 5, 0, 0, 0]);
        let back = decode(&bytes).unwrap();
        let same = d.as_slice().iter().zip(back.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode(&init_dictionary(4, 2, 1)).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut version = bytes.clone();
        version[4] = 2;
        assert!(decode(&version).is_err());
        let mut scaled = bytes.clone();
        scaled[12..20].copy_from_slice(&5.0f64.to_le_bytes());
        assert!(decode(&scaled).is_err());
    }

    #[test]
    fn rejects_non_square_patches() {
        let d = LocalDictionary::from_columns_normalized(3, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(encode(&d).is_err());
    }
}
