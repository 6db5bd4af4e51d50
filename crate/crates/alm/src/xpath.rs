use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AlmError, Result};

/// Signal t ↦ x_t on the uniform grid t_i = i·dt, linearly interpolated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XPath {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl XPath {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(AlmError::Config("XPath needs dt > 0 and finite values".into()));
        }
        Ok(Self { dt, values })
    }

    pub fn constant(value: f64, t_end: f64, dt: f64) -> Self {
        let n = (t_end / dt).round() as usize;
        Self { dt, values: vec![value; n + 1] }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(t_end: f64, dt: f64, f: F) -> Self {
        let n = (t_end / dt).round() as usize;
        Self { dt, values: (0..=n).map(|i| f(i as f64 * dt)).collect() }
    }

    pub fn t_end(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| i as f64 * self.dt)
    }

    /// Value at t, held constant outside the grid.
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        let n = self.values.len();
        if n == 1 || t <= 0.0 {
            return self.values[0];
        }
        let s = t / self.dt;
        let i = s.floor() as usize;
        if i >= n - 1 {
            return self.values[n - 1];
        }
        let w = s - i as f64;
        if w == 0.0 {
            self.values[i]
        } else {
            self.values[i] + w * (self.values[i + 1] - self.values[i])
        }
    }

    pub fn covers(&self, t: f64) -> bool {
        self.t_end() >= t * (1.0 - 1e-12) - 1e-12
    }

    pub fn sup_distance(&self, other: &XPath) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "x"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([fmt_f64(i as f64 * self.dt), fmt_f64(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut ts = Vec::new();
        let mut xs = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |s: &str| s.parse::<f64>().map_err(|e| AlmError::Config(format!("bad number '{s}': {e}")));
            ts.push(parse(&rec[0])?);
            xs.push(parse(&rec[1])?);
        }
        if ts.len() < 2 {
            return XPath::new(1.0, xs);
        }
        XPath::new(ts[1] - ts[0], xs)
    }
}

/// Shortest representation that parses back to the same f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
