use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Which end of the link a trace was measured at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Alice,
    Bob,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Alice => "alice",
            Origin::Bob => "bob",
        })
    }
}

impl FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alice" => Ok(Origin::Alice),
            "bob" => Ok(Origin::Bob),
            other => Err(Error::TraceFormat(format!("unknown origin `{other}`"))),
        }
    }
}

/// Uniformly sampled, unwrapped relative phase in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    origin: Origin,
}

impl PhaseTrace {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, origin: Origin) -> Result<Self> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(invalid("sample_rate_hz", "must be finite and > 0"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(invalid("samples", format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            origin,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Writes the two-column text format:
    ///
    /// ```text
    /// # sample_rate_hz=200000 origin=alice
    /// time_s,phase_rad
    /// 0.000000000,1.234567890123e-1
    /// ```
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# sample_rate_hz={} origin={}", self.sample_rate_hz, self.origin)?;
        writeln!(w, "time_s,phase_rad")?;
        for (k, s) in self.samples.iter().enumerate() {
            writeln!(w, "{:.9},{:.12e}", k as f64 / self.sample_rate_hz, s)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<Option<String>> {
            lines
                .next()
                .transpose()
                .map_err(|e| Error::TraceFormat(e.to_string()))
        };
        let header = next()?.ok_or_else(|| Error::TraceFormat("empty file".into()))?;
        let body = header
            .strip_prefix('#')
            .ok_or_else(|| Error::TraceFormat("missing `#` header line".into()))?;
        let (mut fs, mut origin) = (None, None);
        for field in body.split_whitespace() {
            match field.split_once('=') {
                Some(("sample_rate_hz", v)) => {
                    fs = Some(v.parse::<f64>().map_err(|e| {
                        Error::TraceFormat(format!("sample_rate_hz: {e}"))
                    })?)
                }
                Some(("origin", v)) => origin = Some(v.parse::<Origin>()?),
                _ => return Err(Error::TraceFormat(format!("unexpected header field `{field}`"))),
            }
        }
        let fs = fs.ok_or_else(|| Error::TraceFormat("header lacks sample_rate_hz".into()))?;
        let origin = origin.ok_or_else(|| Error::TraceFormat("header lacks origin".into()))?;
        if next()?.as_deref() != Some("time_s,phase_rad") {
            return Err(Error::TraceFormat("missing column header".into()));
        }
        let mut samples = Vec::new();
        let mut line_no = 2;
        while let Some(line) = next()? {
            line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let (_, phase) = line
                .split_once(',')
                .ok_or_else(|| Error::TraceFormat(format!("line {line_no}: expected two columns")))?;
            samples.push(
                phase
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::TraceFormat(format!("line {line_no}: {e}")))?,
            );
        }
        PhaseTrace::new(samples, fs, origin)
    }
}
