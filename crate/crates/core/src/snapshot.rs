//! Binary snapshots: an 8-byte magic, a little-endian `u32` header length, a
//! JSON header and the field payload as little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{ReformState, ScalarField, VectorField};
use crate::grid::Grid;
use crate::params::Params;

pub const MAGIC: &[u8; 8] = b"DNSLSNAP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub name: String,
    /// `[components, n_1, ..., n_d]` for vectors, `[n_1, ..., n_d]` for scalars.
    pub shape: Vec<usize>,
    /// Byte offset within the payload.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub version: u32,
    pub endianness: String,
    pub dtype: String,
    pub t: f64,
    pub params: Params,
    pub grid: Grid,
    pub fields: Vec<FieldEntry>,
    pub payload_bytes: usize,
    pub sha256: String,
}

/// A reformulated state together with the grid and parameters it lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub params: Params,
    pub grid: Grid,
    pub state: ReformState,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Snapshot {
    pub fn new(params: Params, grid: Grid, state: ReformState) -> Result<Self> {
        state.validate(&grid)?;
        Ok(Self { params, grid, state })
    }

    fn scalars(&self) -> Vec<(&'static str, Vec<&ScalarField>)> {
        let s = &self.state;
        vec![
            ("phi", vec![&s.phi]),
            ("u", s.u.iter().collect()),
            ("psi", s.psi.iter().collect()),
            ("h", vec![&s.h]),
            ("varphi", vec![&s.varphi]),
            ("f", s.f.iter().collect()),
        ]
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let dims: Vec<usize> = self.grid.axes().iter().map(|a| a.n).collect();
        let mut payload = Vec::new();
        let mut fields = Vec::new();
        for (name, comps) in self.scalars() {
            let mut shape = Vec::new();
            if matches!(name, "u" | "psi" | "f") {
                shape.push(comps.len());
            }
            shape.extend(&dims);
            fields.push(FieldEntry { name: name.into(), shape, offset: payload.len() });
            for c in comps {
                for x in c.iter() {
                    payload.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        let header = SnapshotHeader {
            version: VERSION,
            endianness: "little".into(),
            dtype: "f64".into(),
            t: self.state.t,
            params: self.params,
            grid: self.grid.clone(),
            fields,
            payload_bytes: payload.len(),
            sha256: hex(&Sha256::digest(&payload)),
        };
        let json = serde_json::to_vec(&header)?;
        let len = u32::try_from(json.len()).map_err(|_| Error::Snapshot("header too large".into()))?;
        let mut out = Vec::with_capacity(12 + json.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    fn read_header(r: &mut impl Read) -> Result<SnapshotHeader> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::Snapshot("file too short".into()))?;
        if &magic != MAGIC {
            return Err(Error::Snapshot("not a snapshot file (bad magic)".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len).map_err(|_| Error::Snapshot("truncated header".into()))?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut json).map_err(|_| Error::Snapshot("truncated header".into()))?;
        let header: SnapshotHeader = serde_json::from_slice(&json)?;
        if header.version != VERSION {
            return Err(Error::Snapshot(format!(
                "version mismatch: file has {}, reader supports {VERSION}",
                header.version
            )));
        }
        if header.endianness != "little" || header.dtype != "f64" {
            return Err(Error::Snapshot(format!(
                "unsupported layout {} {}",
                header.endianness, header.dtype
            )));
        }
        Ok(header)
    }

    /// Reads the header without touching the payload.
    pub fn inspect(path: &Path) -> Result<SnapshotHeader> {
        Self::read_header(&mut BufReader::new(File::open(path)?))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let header = Self::read_header(&mut r)?;
        let payload = r;
        if payload.len() != header.payload_bytes {
            return Err(Error::Snapshot(format!(
                "payload has {} bytes, header says {}",
                payload.len(),
                header.payload_bytes
            )));
        }
        if hex(&Sha256::digest(payload)) != header.sha256 {
            return Err(Error::Snapshot("checksum failure".into()));
        }
        let grid = header.grid.clone();
        let n = grid.len();
        let d = grid.dim();
        let read = |name: &str| -> Result<Vec<ScalarField>> {
            let e = header
                .fields
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| Error::Snapshot(format!("missing field {name}")))?;
            let count: usize = e.shape.iter().product();
            let comps = count / n.max(1);
            let expected = if matches!(name, "u" | "psi" | "f") { d } else { 1 };
            if count % n != 0 || comps != expected || e.offset + 8 * count > payload.len() {
                return Err(Error::Snapshot(format!("field {name} has inconsistent shape {:?}", e.shape)));
            }
            let raw = &payload[e.offset..e.offset + 8 * count];
            let values: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            Ok(values.chunks(n).map(|c| ScalarField(c.to_vec())).collect())
        };
        let one = |name: &str| -> Result<ScalarField> { Ok(read(name)?.remove(0)) };
        let state = ReformState {
            phi: one("phi")?,
            u: VectorField(read("u")?),
            psi: VectorField(read("psi")?),
            h: one("h")?,
            varphi: one("varphi")?,
            f: VectorField(read("f")?),
            t: header.t,
        };
        Snapshot::new(header.params, grid, state)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PrimitiveState;
    use crate::reform::to_reform;

    fn sample() -> Snapshot {
        let grid = Grid::far_field(2, 8, 2.0).unwrap();
        let p = Params::new(1.0, 1.5, 0.9, 1.0, 0.0).with_dim(2);
        let rho = ScalarField::from_fn(&grid, |x| 1.0 / (1.0 + (x[0] * x[0] + x[1] * x[1]).powi(2)));
        let u = VectorField::from_fn(&grid, |x| [0.1 * x[1], -0.3 * x[0].sin(), 0.0]);
        let mut r = to_reform(&PrimitiveState::new(rho, u, 0.0), &p, &grid).unwrap();
        r.t = 0.125;
        Snapshot::new(p, grid, r).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.snap");
        let b = dir.path().join("b.snap");
        let s = sample();
        s.save(&a).unwrap();
        let back = Snapshot::load(&a).unwrap();
        assert_eq!(back, s);
        back.save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn header_inspection_lists_fields() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.snap");
        sample().save(&a).unwrap();
        let h = Snapshot::inspect(&a).unwrap();
        let names: Vec<&str> = h.fields.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["phi", "u", "psi", "h", "varphi", "f"]);
        assert_eq!(h.fields[1].shape, vec![2, 8, 8]);
        assert_eq!(h.fields[0].shape, vec![8, 8]);
        assert_eq!(h.t, 0.125);
        assert_eq!(h.payload_bytes, 8 * 64 * 9);
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = sample().to_bytes().unwrap();
        let last = bytes.len() - 3;
        bytes[last] ^= 0x40;
        assert!(matches!(Snapshot::from_bytes(&bytes), Err(Error::Snapshot(m)) if m.contains("checksum")));
        assert!(Snapshot::from_bytes(b"NOTASNAPxxxx").is_err());
    }

    #[test]
    fn version_mismatch_is_reported() {
        let bytes = sample().to_bytes().unwrap();
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let json = std::str::from_utf8(&bytes[12..12 + len]).unwrap().replacen("\"version\":1", "\"version\":7", 1);
        let mut out = bytes[..8].to_vec();
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(json.as_bytes());
        out.extend_from_slice(&bytes[12 + len..]);
        match Snapshot::from_bytes(&out) {
            Err(Error::Snapshot(m)) => assert!(m.contains("version mismatch"), "{m}"),
            other => panic!("{other:?}"),
        }
    }
}
