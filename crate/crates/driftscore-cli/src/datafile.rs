//! Binary observation records and their CSV export.
//!
//! Layout, all little-endian: magic `DRSC`, format version u32, d_y u32,
//! l_star u32, t_units u64, seed u64, d_x u32, the starting state as d_x
//! f64, then `(total_steps(l_star) + 1) * d_y` observation values as f64.
//! Plain 8-byte floats round-trip exactly, which is what reruns need.

use std::path::Path;

use anyhow::{bail, Context, Result};
use driftscore::lattice::{LevelGrid, ObservationRecord};

const MAGIC: &[u8; 4] = b"DRSC";
const VERSION: u32 = 1;

pub fn write_record(path: &Path, record: &ObservationRecord) -> Result<()> {
    record
        .validate()
        .map_err(|e| anyhow::anyhow!("refusing to write an inconsistent record: {e}"))?;
    let mut buf = Vec::with_capacity(40 + 8 * (record.x_star.len() + record.values.len()));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(record.dim_y as u32).to_le_bytes());
    buf.extend_from_slice(&record.l_star.to_le_bytes());
    buf.extend_from_slice(&(record.t_units as u64).to_le_bytes());
    buf.extend_from_slice(&record.seed.to_le_bytes());
    buf.extend_from_slice(&(record.x_star.len() as u32).to_le_bytes());
    for v in record.x_star.iter().chain(&record.values) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

pub fn read_record(path: &Path) -> Result<ObservationRecord> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut at = 0usize;
    let take = |at: &mut usize, n: usize| -> Result<&[u8]> {
        if *at + n > bytes.len() {
            bail!("{}: truncated at byte {}", path.display(), *at);
        }
        let s = &bytes[*at..*at + n];
        *at += n;
        Ok(s)
    };
    let u32_at = |at: &mut usize| -> Result<u32> {
        Ok(u32::from_le_bytes(take(at, 4)?.try_into().unwrap()))
    };
    let u64_at = |at: &mut usize| -> Result<u64> {
        Ok(u64::from_le_bytes(take(at, 8)?.try_into().unwrap()))
    };

    if take(&mut at, 4)? != MAGIC {
        bail!("{}: not a driftscore data file", path.display());
    }
    let version = u32_at(&mut at)?;
    if version != VERSION {
        bail!("{}: unsupported format version {version}", path.display());
    }
    let dim_y = u32_at(&mut at)? as usize;
    let l_star = u32_at(&mut at)?;
    let t_units = u64_at(&mut at)? as usize;
    let seed = u64_at(&mut at)?;
    let dim_x = u32_at(&mut at)? as usize;

    let floats = |at: &mut usize, n: usize| -> Result<Vec<f64>> {
        let raw = take(at, 8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let x_star = floats(&mut at, dim_x)?;
    let expected = (LevelGrid::new(l_star).steps_per_unit() * t_units + 1) * dim_y;
    let values = floats(&mut at, expected)?;
    if at != bytes.len() {
        bail!("{}: {} trailing bytes", path.display(), bytes.len() - at);
    }

    let record = ObservationRecord {
        l_star,
        t_units,
        dim_y,
        seed,
        x_star,
        values,
    };
    record
        .validate()
        .map_err(|e| anyhow::anyhow!("{}: inconsistent record: {e}", path.display()))?;
    Ok(record)
}

/// One row per observation time: index, time, then the d_y components.
pub fn export_csv(path: &Path, record: &ObservationRecord) -> Result<()> {
    let delta = LevelGrid::new(record.l_star).delta();
    let mut out = String::from("k,time");
    for d in 0..record.dim_y {
        out.push_str(&format!(",y_{d}"));
    }
    out.push('\n');
    let rows = record.values.len() / record.dim_y;
    for k in 0..rows {
        out.push_str(&format!("{k},{}", k as f64 * delta));
        for v in record.value(k) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}
