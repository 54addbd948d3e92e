//! `ROBFIELD v1` snapshot records and atomic file output.
//!
//! A record is one ASCII header line
//! `ROBFIELD v1 name=<tag> nx=<int> ny=<int> nz=<int> time=<float>\n`
//! followed by `nx*ny*nz` little-endian `f64` values, `i` fastest.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, ScalarField2D, ScalarField3D, VelocityField};

#[derive(Clone, Debug, PartialEq)]
pub struct FieldRecord {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub time: f64,
    pub data: Vec<f64>,
}

impl FieldRecord {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        if self.name.is_empty() || self.name.contains(char::is_whitespace) {
            return Err(Error::InvalidParameter(format!("bad record name {:?}", self.name)));
        }
        assert_eq!(self.data.len(), self.nx * self.ny * self.nz);
        writeln!(w, "ROBFIELD v1 name={} nx={} ny={} nz={} time={}", self.name, self.nx, self.ny, self.nz, self.time)?;
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads one record; `line` is only used for error messages.
    pub fn read_from(r: &mut impl BufRead, line: usize) -> Result<Self> {
        let mut header = String::new();
        if r.read_line(&mut header)? == 0 {
            return Err(Error::parse(line, "unexpected end of file, expected ROBFIELD header"));
        }
        let header = header.strip_suffix('\n').ok_or_else(|| Error::parse(line, "unterminated header"))?;
        let mut parts = header.split(' ');
        if parts.next() != Some("ROBFIELD") || parts.next() != Some("v1") {
            return Err(Error::parse(line, format!("not a ROBFIELD v1 header: {header:?}")));
        }
        let mut fields = [None, None, None, None, None];
        const KEYS: [&str; 5] = ["name", "nx", "ny", "nz", "time"];
        for part in parts {
            let (k, v) = part.split_once('=').ok_or_else(|| Error::parse(line, format!("bad token {part:?}")))?;
            let slot = KEYS
                .iter()
                .position(|key| *key == k)
                .ok_or_else(|| Error::parse(line, format!("unknown key {k:?}")))?;
            if fields[slot].replace(v.to_string()).is_some() {
                return Err(Error::parse(line, format!("duplicate key {k:?}")));
            }
        }
        let get = |n: usize| fields[n].clone().ok_or_else(|| Error::parse(line, format!("missing key {:?}", KEYS[n])));
        let int = |n: usize| -> Result<usize> {
            get(n)?.parse().map_err(|_| Error::parse(line, format!("bad integer for {}", KEYS[n])))
        };
        let name = get(0)?;
        let (nx, ny, nz) = (int(1)?, int(2)?, int(3)?);
        let time: f64 = get(4)?.parse().map_err(|_| Error::parse(line, "bad float for time"))?;
        let count =
            nx.checked_mul(ny).and_then(|v| v.checked_mul(nz)).ok_or_else(|| Error::parse(line, "record too large"))?;
        let mut bytes = vec![0u8; count * 8];
        r.read_exact(&mut bytes).map_err(|_| Error::parse(line, "truncated ROBFIELD payload"))?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { name, nx, ny, nz, time, data })
    }
}

pub fn scalar3d_record(f: &ScalarField3D, time: f64) -> FieldRecord {
    FieldRecord { name: f.name.clone(), nx: f.nx, ny: f.ny, nz: f.nz, time, data: f.data.clone() }
}

pub fn scalar2d_record(f: &ScalarField2D, time: f64) -> FieldRecord {
    FieldRecord { name: f.name.clone(), nx: f.nx, ny: f.ny, nz: 1, time, data: f.data.clone() }
}

pub fn velocity_records(v: &VelocityField, time: f64) -> [FieldRecord; 2] {
    [
        FieldRecord { name: "u1".into(), nx: v.nx + 1, ny: v.ny, nz: 1, time, data: v.u1.clone() },
        FieldRecord { name: "u2".into(), nx: v.nx, ny: v.ny + 1, nz: 1, time, data: v.u2.clone() },
    ]
}

pub fn record_to_scalar3d(dom: &DomainSpec, rec: FieldRecord) -> Result<ScalarField3D> {
    if (rec.nx, rec.ny, rec.nz) != (dom.nx(), dom.ny(), dom.nz()) {
        return Err(Error::InvalidDomain(format!(
            "record {} is {}x{}x{}, grid is {}x{}x{}",
            rec.name,
            rec.nx,
            rec.ny,
            rec.nz,
            dom.nx(),
            dom.ny(),
            dom.nz()
        )));
    }
    Ok(ScalarField3D::from_vec(&rec.name, dom, rec.data))
}

pub fn records_to_velocity(dom: &DomainSpec, u1: FieldRecord, u2: FieldRecord) -> Result<VelocityField> {
    let (nx, ny) = (dom.nx(), dom.ny());
    if (u1.nx, u1.ny, u1.nz) != (nx + 1, ny, 1) || (u2.nx, u2.ny, u2.nz) != (nx, ny + 1, 1) {
        return Err(Error::InvalidDomain("velocity records do not match the grid".into()));
    }
    Ok(VelocityField { nx, ny, u1: u1.data, u2: u2.data })
}

/// Serializes a velocity snapshot (two consecutive records).
pub fn velocity_bytes(v: &VelocityField, time: f64) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for rec in velocity_records(v, time) {
        rec.write_to(&mut buf)?;
    }
    Ok(buf)
}

pub fn read_velocity_file(dom: &DomainSpec, path: &Path) -> Result<(f64, VelocityField)> {
    let mut r = std::io::BufReader::new(fs::File::open(path)?);
    let u1 = FieldRecord::read_from(&mut r, 1)?;
    let u2 = FieldRecord::read_from(&mut r, 2)?;
    let t = u1.time;
    Ok((t, records_to_velocity(dom, u1, u2)?))
}

pub fn read_scalar3d_file(dom: &DomainSpec, path: &Path) -> Result<(f64, ScalarField3D)> {
    let mut r = std::io::BufReader::new(fs::File::open(path)?);
    let rec = FieldRecord::read_from(&mut r, 1)?;
    let t = rec.time;
    Ok((t, record_to_scalar3d(dom, rec)?))
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name =
        path.file_name().ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
