use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Sampled channels of one run. All channels share the same length.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampledRecord {
    pub ts: f64,
    pub seed: u64,
    /// Reference, or the prescribed input for open-loop runs.
    pub v_r: Vec<f64>,
    pub v_m: Vec<f64>,
    pub i_m: Vec<f64>,
    /// Noiseless output, when recorded.
    pub v: Option<Vec<f64>>,
    /// Noiseless plant input, when recorded.
    pub i: Option<Vec<f64>>,
    /// Plant state at each tick, when recorded.
    #[serde(skip)]
    pub states: Option<Vec<Vec<f64>>>,
    /// Provenance of the run (configuration snapshot and labels).
    #[serde(skip)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

impl SampledRecord {
    pub(crate) fn with_capacity(ts: f64, seed: u64, len: usize, truth: bool, state: bool) -> Self {
        Self {
            ts,
            seed,
            v_r: Vec::with_capacity(len),
            v_m: Vec::with_capacity(len),
            i_m: Vec::with_capacity(len),
            v: truth.then(|| Vec::with_capacity(len)),
            i: truth.then(|| Vec::with_capacity(len)),
            states: state.then(|| Vec::with_capacity(len)),
            meta: serde_json::Map::new(),
        }
    }

    pub(crate) fn push(&mut self, v_r: f64, v_m: f64, i_m: f64, v: f64, i: f64, x: &[f64]) {
        self.v_r.push(v_r);
        self.v_m.push(v_m);
        self.i_m.push(i_m);
        if let Some(c) = self.v.as_mut() {
            c.push(v);
        }
        if let Some(c) = self.i.as_mut() {
            c.push(i);
        }
        if let Some(s) = self.states.as_mut() {
            s.push(x.to_vec());
        }
    }

    pub fn len(&self) -> usize {
        self.v_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_m.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|n| n as f64 * self.ts).collect()
    }

    /// Noiseless output when recorded, else the measurement.
    pub fn output(&self) -> &[f64] {
        self.v.as_deref().unwrap_or(&self.v_m)
    }

    /// Header `t,v_r,v_m,i_m[,v,i]`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let truth = self.v.is_some() && self.i.is_some();
        let mut out = String::from(if truth { "t,v_r,v_m,i_m,v,i\n" } else { "t,v_r,v_m,i_m\n" });
        for n in 0..self.len() {
            let _ = write!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                n as f64 * self.ts,
                self.v_r[n],
                self.v_m[n],
                self.i_m[n]
            );
            if truth {
                let (v, i) = (self.v.as_ref().unwrap(), self.i.as_ref().unwrap());
                let _ = write!(out, ",{:.16e},{:.16e}", v[n], i[n]);
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.csv` and the sidecar `<stem>.json` metadata.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        let mut meta = self.meta.clone();
        meta.insert("seed".into(), self.seed.into());
        meta.insert("ts".into(), self.ts.into());
        meta.insert("samples".into(), self.len().into());
        let json = serde_json::to_string_pretty(&meta).map_err(Error::from)?;
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        Ok(())
    }
}
