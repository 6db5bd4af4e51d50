//! CSV and JSON artifacts for simulation records. Memories are written in
//! user coordinates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EventRecord, SimulationRecord};
use crate::error::{AlmError, Result};
use crate::model::MemoryCoordinates;
use crate::xpath::fmt_f64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub spec_hash: String,
    pub n: usize,
    pub t_end: f64,
    pub seed: u64,
    pub n_events: usize,
    pub n_candidates: u64,
    pub save_times: Vec<f64>,
    pub x_path_emp: Vec<(f64, f64)>,
}

impl From<&SimulationRecord> for RunMetadata {
    fn from(r: &SimulationRecord) -> Self {
        Self {
            spec_hash: r.spec_hash.clone(),
            n: r.n,
            t_end: r.t_end,
            seed: r.seed,
            n_events: r.n_events,
            n_candidates: r.n_candidates,
            save_times: r.snapshots.iter().map(|s| s.t).collect(),
            x_path_emp: r.x_path_emp.clone(),
        }
    }
}

fn memory_header(prefix: &[&str], d: usize) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    h.extend((1..=d).map(|k| format!("m{k}")));
    h
}

pub fn write_events_csv<P: AsRef<Path>>(path: P, events: &[EventRecord], d: usize, coords: MemoryCoordinates) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(memory_header(&["time", "neuron", "age_before"], d))?;
    for e in events {
        let mut row = vec![fmt_f64(e.time), e.neuron.to_string(), fmt_f64(e.age_before)];
        row.extend(e.memory_before.iter().map(|&m| fmt_f64(coords.to_user(m))));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events_csv<P: AsRef<Path>>(path: P, coords: MemoryCoordinates) -> Result<Vec<EventRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| AlmError::Config(format!("missing column {k}")))?
                .parse::<f64>()
                .map_err(|e| AlmError::Config(e.to_string()))
        };
        let neuron = rec
            .get(1)
            .ok_or_else(|| AlmError::Config("missing neuron column".into()))?
            .parse::<usize>()
            .map_err(|e| AlmError::Config(e.to_string()))?;
        let memory_before = (3..rec.len()).map(|k| num(k).map(|v| coords.from_user(v))).collect::<Result<_>>()?;
        out.push(EventRecord { time: num(0)?, neuron, age_before: num(2)?, memory_before });
    }
    Ok(out)
}

/// Long format `t,neuron,age,m1..md,x`.
pub fn write_snapshots_csv<P: AsRef<Path>>(path: P, record: &SimulationRecord, d: usize, coords: MemoryCoordinates) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = memory_header(&["t", "neuron", "age"], d);
    header.push("x".into());
    w.write_record(&header)?;
    for s in &record.snapshots {
        for (i, (a, m)) in s.ages.iter().zip(&s.memories).enumerate() {
            let mut row = vec![fmt_f64(s.t), i.to_string(), fmt_f64(*a)];
            row.extend(m.iter().map(|&v| fmt_f64(coords.to_user(v))));
            row.push(fmt_f64(s.x));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_metadata_json<P: AsRef<Path>>(path: P, record: &SimulationRecord) -> Result<()> {
    let meta = RunMetadata::from(record);
    std::fs::write(path, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}
