//! Density artifacts: long-format CSV and a little-endian binary grid dump
//! preceded by a JSON header.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DensitySolution, Grid};
use crate::error::{AlmError, Result};
use crate::model::MemoryCoordinates;
use crate::xpath::fmt_f64;

/// Long format `t,a,m1..md,rho` at cell centers (`t,m1..md,rho` when the
/// solution has no age axis).
pub fn write_density_csv<P: AsRef<Path>>(path: P, sol: &DensitySolution, coords: MemoryCoordinates) -> Result<()> {
    let g = &sol.grid;
    let d = g.n_m.len();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    if !sol.memory_only {
        header.push("a".into());
    }
    header.extend((1..=d).map(|k| format!("m{k}")));
    header.push("rho".into());
    w.write_record(&header)?;
    let nm = g.n_cells_m();
    let mut idx = vec![0; d];
    for (t, rho) in sol.times.iter().zip(&sol.rho) {
        for (i, v) in rho.iter().enumerate() {
            let mut row = vec![fmt_f64(*t)];
            if !sol.memory_only {
                row.push(fmt_f64(g.a_center(i / nm)));
            }
            g.m_index(i % nm, &mut idx);
            row.extend((0..d).map(|k| fmt_f64(coords.to_user(g.m_center(k, idx[k])))));
            row.push(fmt_f64(*v));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryHeader {
    /// [snapshots, age cells (1 if memory only), memory cells per dimension…]
    pub dims: Vec<usize>,
    /// [da, dm₁, …]
    pub dx: Vec<f64>,
    pub m_lo: Vec<f64>,
    pub dt: f64,
    pub times: Vec<f64>,
    pub endianness: String,
    pub memory_only: bool,
}

/// u64 header length, JSON header, then densities as f64.
pub fn write_binary_dump<P: AsRef<Path>>(path: P, sol: &DensitySolution) -> Result<()> {
    let g: &Grid = &sol.grid;
    let mut dims = vec![sol.times.len(), if sol.memory_only { 1 } else { g.n_a }];
    dims.extend_from_slice(&g.n_m);
    let mut dx = vec![g.da()];
    dx.extend((0..g.n_m.len()).map(|k| g.dm(k)));
    let header = BinaryHeader {
        dims,
        dx,
        m_lo: g.m_lo.clone(),
        dt: g.dt,
        times: sol.times.clone(),
        endianness: "little".into(),
        memory_only: sol.memory_only,
    };
    let json = serde_json::to_vec(&header)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&(json.len() as u64).to_le_bytes())?;
    f.write_all(&json)?;
    for rho in &sol.rho {
        for v in rho {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn read_binary_dump<P: AsRef<Path>>(path: P) -> Result<(BinaryHeader, Vec<f64>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 8 {
        return Err(AlmError::Config("binary dump too short".into()));
    }
    let len = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(8..8 + len).ok_or_else(|| AlmError::Config("truncated header".into()))?;
    let header: BinaryHeader = serde_json::from_slice(body)?;
    let data = &bytes[8 + len..];
    let expect: usize = header.dims.iter().product();
    if data.len() != expect * 8 {
        return Err(AlmError::Config(format!("expected {expect} values, found {} bytes", data.len())));
    }
    let values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((header, values))
}
