//! Diagnostics CSV and HVBK1 binary snapshots.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::diagnostics::{DiagnosticsRecord, CSV_COLUMNS};
use crate::dynamics::FluidState;
use crate::error::{HvbkError, Result};
use crate::spectral::SpectralField;

pub const SNAPSHOT_MAGIC: &[u8; 5] = b"HVBK1";
pub const SNAPSHOT_FIELDS: [&str; 4] = ["omega_s", "omega_n", "u_s", "u_n"];

pub fn write_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record(r.to_row().iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_COLUMNS {
        return Err(HvbkError::Format(format!("unexpected CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| HvbkError::Format(format!("bad number {s:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(DiagnosticsRecord::from_row(&vals)?);
    }
    Ok(out)
}

fn put_u32(w: &mut impl Write, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| HvbkError::Format(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

/// Layout: magic, `N`, `M = 2N+1`, field count, then each field name (u32 length + UTF-8),
/// then the coefficient cubes in name order, `k1` slowest, each mode as three `(re, im)`
/// pairs of little-endian `f64`.
pub fn write_snapshot_fields(path: &Path, fields: &[(&str, &SpectralField)]) -> Result<()> {
    let n = fields
        .first()
        .map(|f| f.1.n())
        .ok_or_else(|| HvbkError::Input("snapshot needs at least one field".into()))?;
    if fields.iter().any(|f| f.1.n() != n) {
        return Err(HvbkError::Input("snapshot fields must share N".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SNAPSHOT_MAGIC)?;
    put_u32(&mut w, n)?;
    put_u32(&mut w, 2 * n + 1)?;
    put_u32(&mut w, fields.len())?;
    for (name, _) in fields {
        put_u32(&mut w, name.len())?;
        w.write_all(name.as_bytes())?;
    }
    for (_, f) in fields {
        for c in f.coeffs() {
            for z in c {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_snapshot(path: &Path, state: &FluidState) -> Result<()> {
    let u_s = state.velocity_s()?;
    let u_n = state.velocity_n()?;
    write_snapshot_fields(
        path,
        &[("omega_s", &state.omega_s), ("omega_n", &state.omega_n), ("u_s", &u_s), ("u_n", &u_n)],
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub fields: Vec<(String, SpectralField)>,
}

impl Snapshot {
    pub fn field(&self, name: &str) -> Result<&SpectralField> {
        self.fields
            .iter()
            .find(|f| f.0 == name)
            .map(|f| &f.1)
            .ok_or_else(|| HvbkError::Format(format!("snapshot has no field {name:?}")))
    }

    /// Vorticities plus means read from the velocity fields' `k = 0` modes.
    pub fn to_state(&self) -> Result<FluidState> {
        let mean = |name: &str| -> Result<[f64; 3]> { Ok(self.field(name)?.mean().map(|z| z.re)) };
        FluidState::new(
            self.field("omega_s")?.clone(),
            self.field("omega_n")?.clone(),
            mean("u_s")?,
            mean("u_n")?,
            0.0,
        )
    }
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| HvbkError::Format("file too short for HVBK1 header".into()))?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(HvbkError::Format(format!("bad magic {magic:?}")));
    }
    let n = get_u32(&mut r)?;
    let m = get_u32(&mut r)?;
    if m != 2 * n + 1 {
        return Err(HvbkError::Format(format!("side {m} does not match N={n}")));
    }
    let count = get_u32(&mut r)?;
    if count > 64 {
        return Err(HvbkError::Format(format!("implausible field count {count}")));
    }
    let mut names = Vec::with_capacity(count);
    for _ in 0..count {
        let len = get_u32(&mut r)?;
        if len > 4096 {
            return Err(HvbkError::Format(format!("implausible name length {len}")));
        }
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        names.push(String::from_utf8(buf).map_err(|e| HvbkError::Format(e.to_string()))?);
    }
    let mut fields = Vec::with_capacity(count);
    let mut b = [0u8; 8];
    for name in names {
        let mut f = SpectralField::zeros(n);
        for c in f.coeffs_mut() {
            for z in c.iter_mut() {
                r.read_exact(&mut b)?;
                let re = f64::from_le_bytes(b);
                r.read_exact(&mut b)?;
                *z = Complex64::new(re, f64::from_le_bytes(b));
            }
        }
        fields.push((name, f));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(HvbkError::Format(format!("{} trailing bytes", rest.len())));
    }
    Ok(Snapshot { n, fields })
}
