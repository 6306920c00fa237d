//! Uniformly sampled voltage traces and their file formats.
//!
//! CSV uses the header `t_seconds,v_volts`. A compact variant is also
//! accepted on input: a first line `# dt=<seconds>[, t0=<seconds>]`, then a
//! `v_volts` header and one value per line. JSON is `{dt, t0, samples}`.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error("sample interval must be positive and finite, got {0}")]
    BadInterval(f64),
    #[error("waveform has no samples")]
    Empty,
    #[error("sample {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("time column is not uniformly spaced near row {row}")]
    NonUniform { row: usize },
    #[error("malformed waveform file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub dt: f64,
    pub t0: f64,
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn new(dt: f64, t0: f64, samples: Vec<f64>) -> Result<Self, WaveformError> {
        let w = Self { dt, t0, samples };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), WaveformError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(WaveformError::BadInterval(self.dt));
        }
        if self.samples.is_empty() {
            return Err(WaveformError::Empty);
        }
        if let Some((index, &value)) = self.samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(WaveformError::NonFinite { index, value });
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn time(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        (self.len().saturating_sub(1)) as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| self.time(k))
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn peak_to_peak(&self) -> f64 {
        self.max() - self.min()
    }

    /// Sub-waveform covering sample indices `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Waveform {
        let end = end.min(self.len());
        Waveform {
            dt: self.dt,
            t0: self.time(start),
            samples: self.samples[start..end].to_vec(),
        }
    }

    /// Samples with times inside `[t_from, t_to]`, as an index range.
    pub fn index_range(&self, t_from: f64, t_to: f64) -> (usize, usize) {
        let first = ((t_from - self.t0) / self.dt).ceil().max(0.0) as usize;
        let last = ((t_to - self.t0) / self.dt).floor();
        let end = if last < 0.0 { 0 } else { (last as usize + 1).min(self.len()) };
        (first.min(end), end)
    }

    /// Same samples, time axis moved by `delta` seconds.
    pub fn shifted(&self, delta: f64) -> Waveform {
        Waveform {
            t0: self.t0 + delta,
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), WaveformError> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t_seconds", "v_volts"])?;
        for (t, v) in self.times().zip(self.samples.iter()) {
            wtr.write_record([format!("{t:e}"), format!("{v:e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("waveform serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, WaveformError> {
        let w: Waveform = serde_json::from_str(text)?;
        w.validate()?;
        Ok(w)
    }

    /// Reads either CSV layout (see module docs).
    pub fn read_csv<R: Read>(input: R) -> Result<Self, WaveformError> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let first_trim = first.trim();
        if let Some(rest) = first_trim.strip_prefix('#') {
            let (dt, t0) = parse_dt_header(rest)?;
            let mut samples = Vec::new();
            for (row, line) in reader.lines().enumerate() {
                let line = line?;
                let s = line.trim();
                if s.is_empty() || s == "v_volts" {
                    continue;
                }
                let v: f64 = s
                    .parse()
                    .map_err(|_| WaveformError::Format(format!("row {}: `{s}`", row + 2)))?;
                samples.push(v);
            }
            return Waveform::new(dt, t0, samples);
        }
        if first_trim != "t_seconds,v_volts" {
            return Err(WaveformError::Format(format!("unexpected header `{first_trim}`")));
        }
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64, WaveformError> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| WaveformError::Format(format!("bad record {rec:?}")))
            };
            ts.push(parse(0)?);
            vs.push(parse(1)?);
        }
        if ts.len() < 2 {
            return Err(WaveformError::Format("need at least two rows to infer dt".into()));
        }
        let dt = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
        for (row, pair) in ts.windows(2).enumerate() {
            if ((pair[1] - pair[0]) - dt).abs() > 1e-6 * dt.abs() {
                return Err(WaveformError::NonUniform { row: row + 1 });
            }
        }
        Waveform::new(dt, ts[0], vs)
    }
}

fn parse_dt_header(rest: &str) -> Result<(f64, f64), WaveformError> {
    let mut dt = None;
    let mut t0 = 0.0;
    for part in rest.split(',') {
        let Some((k, v)) = part.split_once('=') else { continue };
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| WaveformError::Format(format!("bad header value `{v}`")))?;
        match k.trim() {
            "dt" => dt = Some(value),
            "t0" => t0 = value,
            _ => {}
        }
    }
    let dt = dt.ok_or_else(|| WaveformError::Format("missing dt in header".into()))?;
    Ok((dt, t0))
}
