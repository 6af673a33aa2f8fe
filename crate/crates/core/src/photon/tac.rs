use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::PhotonStream;
use crate::{Error, Result};

const MAGIC: &str = "# phonon-twin tac histogram v1";
const SEPARATOR: &str = "---";

/// Arrival times folded modulo the injection period.
#[derive(Debug, Clone, PartialEq)]
pub struct TacHistogram {
    pub bin_width: f64,
    pub period: f64,
    pub counts: Vec<u64>,
    pub total_counts: u64,
    pub gate_time: f64,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

fn check_geometry(period: f64, bin_width: f64) -> Result<usize> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::invalid(format!("period must be > 0, got {period}")));
    }
    if !(bin_width > 0.0 && bin_width <= period) {
        return Err(Error::invalid(format!("bin width must lie in (0, T], got {bin_width}")));
    }
    let ratio = period / bin_width;
    let n = if (ratio - ratio.round()).abs() < 1e-9 * ratio { ratio.round() } else { ratio.ceil() };
    Ok(n as usize)
}

impl TacHistogram {
    pub fn empty(period: f64, bin_width: f64) -> Result<Self> {
        let n = check_geometry(period, bin_width)?;
        Ok(Self { bin_width, period, counts: vec![0; n], total_counts: 0, gate_time: 0.0, seed: None, config_hash: None })
    }

    /// Number of folding intervals n = ⌈T/t_r⌉.
    pub fn n_intervals(&self) -> usize {
        self.counts.len()
    }

    /// Left edge and width of each bin; the last bin may be partial.
    pub fn bin_edges(&self) -> Vec<(f64, f64)> {
        let n = self.counts.len();
        (0..n)
            .map(|i| {
                let lo = i as f64 * self.bin_width;
                let hi = if i + 1 == n { self.period } else { lo + self.bin_width };
                (lo, hi - lo)
            })
            .collect()
    }

    pub fn bin_index(&self, t: f64) -> usize {
        let mut r = t.rem_euclid(self.period);
        if r == 0.0 {
            r = self.period;
        }
        ((r / self.bin_width).floor() as usize).min(self.counts.len() - 1)
    }

    pub fn add(&mut self, t: f64) {
        let i = self.bin_index(t);
        self.counts[i] += 1;
        self.total_counts += 1;
    }

    pub fn validate(&self) -> Result<()> {
        let n = check_geometry(self.period, self.bin_width)?;
        if n != self.counts.len() {
            return Err(Error::BinningMismatch(format!("{} counts for {} bins", self.counts.len(), n)));
        }
        if self.counts.iter().sum::<u64>() != self.total_counts {
            return Err(Error::invalid("total count does not match bin sum"));
        }
        if !(self.gate_time >= 0.0 && self.gate_time.is_finite()) {
            return Err(Error::invalid("gate time must be ≥ 0"));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::with_capacity(16 * self.counts.len() + 256);
        writeln!(s, "{MAGIC}").unwrap();
        writeln!(s, "period = {:e}", self.period).unwrap();
        writeln!(s, "bin_width = {:e}", self.bin_width).unwrap();
        writeln!(s, "gate_time = {:e}", self.gate_time).unwrap();
        writeln!(s, "total_counts = {}", self.total_counts).unwrap();
        writeln!(s, "n_intervals = {}", self.n_intervals()).unwrap();
        match self.seed {
            Some(v) => writeln!(s, "seed = {v}").unwrap(),
            None => writeln!(s, "seed = none").unwrap(),
        }
        writeln!(s, "config_hash = {}", self.config_hash.as_deref().unwrap_or("none")).unwrap();
        writeln!(s, "{SEPARATOR}").unwrap();
        for c in &self.counts {
            writeln!(s, "{c}").unwrap();
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().transpose()?.unwrap_or_default();
        if first.trim() != MAGIC {
            return Err(Error::Parse(format!("unexpected header line {first:?}")));
        }
        let mut header = std::collections::BTreeMap::new();
        loop {
            let line = lines.next().transpose()?.ok_or_else(|| Error::Parse("missing separator".into()))?;
            let line = line.trim();
            if line == SEPARATOR {
                break;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse(format!("malformed header {line:?}")))?;
            header.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| header.get(k).ok_or_else(|| Error::Parse(format!("missing header key {k}")));
        let float = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::Parse(format!("bad value for {k}"))) };
        let int = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| Error::Parse(format!("bad value for {k}"))) };
        let seed = match get("seed")?.as_str() {
            "none" => None,
            v => Some(v.parse().map_err(|_| Error::Parse("bad seed".into()))?),
        };
        let config_hash = match get("config_hash")?.as_str() {
            "none" => None,
            v => Some(v.to_string()),
        };
        let mut counts = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            counts.push(line.parse().map_err(|_| Error::Parse(format!("bad count {line:?}")))?);
        }
        let h = Self {
            bin_width: float("bin_width")?,
            period: float("period")?,
            counts,
            total_counts: int("total_counts")?,
            gate_time: float("gate_time")?,
            seed,
            config_hash,
        };
        if int("n_intervals")? as usize != h.counts.len() {
            return Err(Error::Parse("n_intervals does not match the number of counts".into()));
        }
        h.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(h)
    }

    pub fn from_text(s: &str) -> Result<Self> {
        Self::read_from(s.as_bytes())
    }
}

/// Folds every arrival into (0, T] and bins it at resolution t_r.
pub fn tac_fold(stream: &PhotonStream, period: f64, bin_width: f64) -> Result<TacHistogram> {
    let mut h = TacHistogram::empty(period, bin_width)?;
    for t in &stream.times {
        h.add(*t);
    }
    h.gate_time = stream.gate;
    Ok(h)
}

/// Element-wise sum; counts and gate times add.
pub fn merge(a: &TacHistogram, b: &TacHistogram) -> Result<TacHistogram> {
    let same = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
    if !same(a.period, b.period) || !same(a.bin_width, b.bin_width) || a.counts.len() != b.counts.len() {
        return Err(Error::BinningMismatch(format!(
            "(T = {:e}, t_r = {:e}) vs (T = {:e}, t_r = {:e})",
            a.period, a.bin_width, b.period, b.bin_width
        )));
    }
    let config_hash = if a.config_hash == b.config_hash { a.config_hash.clone() } else { None };
    Ok(TacHistogram {
        bin_width: a.bin_width,
        period: a.period,
        counts: a.counts.iter().zip(&b.counts).map(|(x, y)| x + y).collect(),
        total_counts: a.total_counts + b.total_counts,
        gate_time: a.gate_time + b.gate_time,
        seed: if a.seed == b.seed { a.seed } else { None },
        config_hash,
    })
}
