//! File formats: potential tables and fields as CSV, the spectrum export,
//! and the binary solution snapshot.
//!
//! The parsers accept untrusted input: they never panic, validate sizes
//! before allocating, and reject non-finite data.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, PotentialTable};

/// Snapshot header magic.
pub const SNAPSHOT_MAGIC: &[u8; 5] = b"LNKV1";
/// Cell-count cap for snapshot decoding (guards allocation on bad headers).
const SNAPSHOT_MAX_CELLS: u64 = 1 << 26;

/// Parses a potential table from CSV text with header row `r,z,V`.
/// Rows must cover a full (r, z) tensor lattice; values must be finite.
pub fn parse_potential_csv(text: &str) -> Result<PotentialTable> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty potential table".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["r", "z", "V"] {
        return Err(Error::Format(format!(
            "potential table header must be 'r,z,V', got '{header}'"
        )));
    }
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Format(format!(
                "line {}: expected 3 comma-separated values",
                lineno + 2
            )));
        }
        let mut vals = [0.0f64; 3];
        for (k, p) in parts.iter().enumerate() {
            vals[k] = p
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))?;
            if !vals[k].is_finite() {
                return Err(Error::Format(format!(
                    "line {}: non-finite value",
                    lineno + 2
                )));
            }
        }
        rows.push((vals[0], vals[1], vals[2]));
    }
    if rows.is_empty() {
        return Err(Error::Format("potential table has no data rows".into()));
    }
    let mut r_nodes: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut z_nodes: Vec<f64> = rows.iter().map(|r| r.1).collect();
    r_nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    r_nodes.dedup();
    z_nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    z_nodes.dedup();
    if r_nodes.len() < 2 || z_nodes.len() < 2 {
        return Err(Error::Format(
            "potential table needs at least 2 distinct r and z nodes".into(),
        ));
    }
    let (nr, nz) = (r_nodes.len(), z_nodes.len());
    if rows.len() != nr * nz {
        return Err(Error::Format(format!(
            "potential table must cover the full {nr} x {nz} lattice, got {} rows",
            rows.len()
        )));
    }
    let mut values = vec![f64::NAN; nr * nz];
    for (r, z, v) in rows {
        let i = r_nodes
            .binary_search_by(|x| x.partial_cmp(&r).unwrap())
            .map_err(|_| Error::Format("internal node lookup failure".into()))?;
        let j = z_nodes
            .binary_search_by(|x| x.partial_cmp(&z).unwrap())
            .map_err(|_| Error::Format("internal node lookup failure".into()))?;
        if !values[i * nz + j].is_nan() {
            return Err(Error::Format(format!("duplicate lattice point ({r}, {z})")));
        }
        values[i * nz + j] = v;
    }
    Ok(PotentialTable {
        r_nodes,
        z_nodes,
        values,
    })
}

pub fn load_potential_csv(path: &Path) -> Result<PotentialTable> {
    let text = std::fs::read_to_string(path)?;
    parse_potential_csv(&text)
}

/// Serializes a grid field with columns r, z, value.
pub fn field_to_csv(grid: &Grid, values: &[f64]) -> String {
    let mut out = String::with_capacity(grid.len() * 24);
    out.push_str("r,z,value\n");
    for i in 0..grid.nr {
        for j in 0..grid.nz {
            out.push_str(&format!(
                "{},{},{}\n",
                grid.r_nodes[i],
                grid.z_nodes[j],
                values[grid.idx(i, j)]
            ));
        }
    }
    out
}

/// Reads back a field CSV (header `r,z,value`) into rows.
pub fn parse_field_csv(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty field csv".into()))?;
    if header.split(',').map(str::trim).collect::<Vec<_>>() != ["r", "z", "value"] {
        return Err(Error::Format("field csv header must be 'r,z,value'".into()));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Format(format!("line {}: expected 3 columns", lineno + 2)));
        }
        let r = parts[0]
            .parse::<f64>()
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))?;
        let z = parts[1]
            .parse::<f64>()
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))?;
        let v = parts[2]
            .parse::<f64>()
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))?;
        rows.push((r, z, v));
    }
    Ok(rows)
}

/// Spectrum CSV: index, eigenvalue.
pub fn spectrum_to_csv(eigvals: &[f64]) -> String {
    let mut out = String::from("index,eigenvalue\n");
    for (i, l) in eigvals.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}

/// 3D field CSV with columns x1, x2, x3, E1, E2, E3.
pub fn field3_to_csv(points: &[[f64; 3]], components: &[[f64; 3]]) -> String {
    let mut out = String::from("x1,x2,x3,E1,E2,E3\n");
    for (x, e) in points.iter().zip(components) {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            x[0], x[1], x[2], e[0], e[1], e[2]
        ));
    }
    out
}

/// L(t) series CSV with columns t, L.
pub fn lt_series_to_csv(times: &[f64], values: &[f64]) -> String {
    let mut out = String::from("t,L\n");
    for (t, l) in times.iter().zip(values) {
        out.push_str(&format!("{t},{l}\n"));
    }
    out
}

/// Encodes a solution snapshot: magic "LNKV1", little-endian u32 dims
/// (nr, nz), then nr*nz little-endian f64 nodal values.
pub fn encode_snapshot(nr: usize, nz: usize, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), nr * nz);
    let mut out = Vec::with_capacity(13 + 8 * values.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&(nr as u32).to_le_bytes());
    out.extend_from_slice(&(nz as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes a snapshot produced by [`encode_snapshot`]. Validates the magic,
/// the dimensions and the exact payload length before allocating.
pub fn decode_snapshot(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < 13 {
        return Err(Error::Format("snapshot too short for header".into()));
    }
    if &bytes[..5] != SNAPSHOT_MAGIC {
        return Err(Error::Format("bad snapshot magic".into()));
    }
    let nr = u32::from_le_bytes([bytes[5], bytes[6], bytes[7], bytes[8]]) as u64;
    let nz = u32::from_le_bytes([bytes[9], bytes[10], bytes[11], bytes[12]]) as u64;
    if nr == 0 || nz == 0 {
        return Err(Error::Format("snapshot dimensions must be nonzero".into()));
    }
    let cells = nr
        .checked_mul(nz)
        .ok_or_else(|| Error::Format("snapshot dimensions overflow".into()))?;
    if cells > SNAPSHOT_MAX_CELLS {
        return Err(Error::Format(format!("snapshot too large: {cells} cells")));
    }
    let expected = 13usize + 8 * cells as usize;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "snapshot payload length mismatch: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(cells as usize);
    for chunk in bytes[13..].chunks_exact(8) {
        let mut b = [0u8; 8];
        b.copy_from_slice(chunk);
        values.push(f64::from_le_bytes(b));
    }
    Ok((nr as usize, nz as usize, values))
}

pub fn write_snapshot(path: &Path, nr: usize, nz: usize, values: &[f64]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_snapshot(nr, nz, values))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = std::fs::read(path)?;
    decode_snapshot(&bytes)
}
