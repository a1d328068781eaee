//! Filter specifications, coefficient quantization and the coefficient
//! partition that feeds adder-graph synthesis.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::odd_part;

#[derive(Debug, Error, PartialEq)]
pub enum CoeffError {
    #[error("tap count must be at least 1")]
    NoTaps,
    #[error("cutoff {cutoff} Hz must lie strictly between 0 and half the sample rate {sample_rate} Hz")]
    BadCutoff { cutoff: f64, sample_rate: f64 },
    #[error("line {line}: cannot parse {text:?} as a signed integer")]
    Parse { line: usize, text: String },
    #[error("coefficient file contains no taps")]
    Empty,
}

/// Parameters of a windowed-sinc low-pass design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterSpec {
    pub tap_count: usize,
    /// Hz.
    pub sample_rate: f64,
    /// Hz.
    pub cutoff: f64,
    pub quant_fraction_bits: u32,
}

impl FilterSpec {
    pub fn validate(&self) -> Result<(), CoeffError> {
        if self.tap_count == 0 {
            return Err(CoeffError::NoTaps);
        }
        let ok = self.cutoff > 0.0 && self.cutoff < self.sample_rate / 2.0;
        if !ok || !self.cutoff.is_finite() || !self.sample_rate.is_finite() {
            return Err(CoeffError::BadCutoff {
                cutoff: self.cutoff,
                sample_rate: self.sample_rate,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    /// `h(n) = h(N-1-n)`
    Even,
    /// `h(n) = -h(N-1-n)`
    Odd,
    None,
}

impl Symmetry {
    pub fn detect(taps: &[i64]) -> Symmetry {
        let n = taps.len();
        if (0..n).all(|i| taps[i] == taps[n - 1 - i]) {
            Symmetry::Even
        } else if (0..n).all(|i| taps[i] == -taps[n - 1 - i]) {
            Symmetry::Odd
        } else {
            Symmetry::None
        }
    }
}

/// Integer tap sequence `h(0)..h(N-1)` with its detected symmetry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuantizedFilter {
    taps: Vec<i64>,
    symmetry: Symmetry,
}

impl QuantizedFilter {
    pub fn new(taps: Vec<i64>) -> Self {
        let symmetry = Symmetry::detect(&taps);
        QuantizedFilter { taps, symmetry }
    }

    pub fn taps(&self) -> &[i64] {
        &self.taps
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Taps `h(n)` for `n <= (N-1)/2` when the filter is symmetric, else all taps.
    pub fn unique_half(&self) -> &[i64] {
        match self.symmetry {
            Symmetry::None => &self.taps,
            _ => &self.taps[..self.taps.len().div_ceil(2)],
        }
    }

    /// Sum of tap magnitudes.
    pub fn l1_norm(&self) -> u128 {
        self.taps.iter().map(|&t| t.unsigned_abs() as u128).sum()
    }

    /// Parses the coefficient file format: one signed decimal per line,
    /// `#` comment lines and blank lines skipped.
    pub fn parse(text: &str) -> Result<Self, CoeffError> {
        let taps = parse_integer_lines(text)?;
        if taps.is_empty() {
            return Err(CoeffError::Empty);
        }
        Ok(QuantizedFilter::new(taps))
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for t in &self.taps {
            writeln!(out, "{t}").unwrap();
        }
        out
    }
}

/// Reads one signed integer per line, skipping blanks and `#` comments.
/// Shared by coefficient files and simulation vector files.
pub fn parse_integer_lines(text: &str) -> Result<Vec<i64>, CoeffError> {
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = line.parse::<i64>().map_err(|_| CoeffError::Parse {
            line: idx + 1,
            text: line.to_string(),
        })?;
        values.push(v);
    }
    Ok(values)
}

/// Hamming-windowed sinc low-pass, forced exactly symmetric.
pub fn design_lowpass(spec: &FilterSpec) -> Result<Vec<f64>, CoeffError> {
    spec.validate()?;
    let n = spec.tap_count;
    let fc = 2.0 * spec.cutoff / spec.sample_rate;
    let center = (n as f64 - 1.0) / 2.0;
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 - center;
            let sinc = if t == 0.0 {
                1.0
            } else {
                (PI * fc * t).sin() / (PI * fc * t)
            };
            let window = if n == 1 {
                1.0
            } else {
                0.54 - 0.46 * (2.0 * PI * i as f64 / (n as f64 - 1.0)).cos()
            };
            fc * sinc * window
        })
        .collect();
    for i in 0..n / 2 {
        taps[n - 1 - i] = taps[i];
    }
    Ok(taps)
}

/// Scales by `2^fraction_bits` and rounds half away from zero.
pub fn quantize(real_taps: &[f64], fraction_bits: u32) -> QuantizedFilter {
    let scale = (fraction_bits as f64).exp2();
    let taps = real_taps.iter().map(|&t| (t * scale).round() as i64).collect();
    QuantizedFilter::new(taps)
}

/// `value = odd << shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OddBase {
    pub odd: u64,
    pub shift: u32,
}

/// Distinct coefficient magnitudes split into the small set realized by the
/// shared adder graph (`coeff_r`) and the large set left to constant
/// multipliers (`coeff_s`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoefficientPartition {
    pub coeff_r: Vec<u64>,
    pub coeff_s: Vec<u64>,
    pub power_of_two: BTreeSet<u64>,
    pub zero_present: bool,
    pub bases: BTreeMap<u64, OddBase>,
    /// `|h(n)|` for every tap of the filter, so products can be fanned out
    /// to each tap sharing a magnitude.
    pub tap_magnitudes: Vec<u64>,
}

impl CoefficientPartition {
    pub fn retained(&self) -> impl Iterator<Item = u64> + '_ {
        self.coeff_r.iter().chain(self.coeff_s.iter()).copied()
    }

    /// True when `m` is zero, a power of two, or in either set.
    pub fn covers(&self, m: u64) -> bool {
        m == 0 || self.power_of_two.contains(&m) || self.bases.contains_key(&m)
    }
}

/// Absolute values, dedup, power-of-two removal, small/large split and
/// odd-base extraction over the unique half of the filter.
pub fn preprocess(filter: &QuantizedFilter) -> CoefficientPartition {
    let mut zero_present = false;
    let mut power_of_two = BTreeSet::new();
    let mut distinct = BTreeSet::new();
    for &tap in filter.unique_half() {
        let m = tap.unsigned_abs();
        if m == 0 {
            zero_present = true;
        } else if m.is_power_of_two() {
            power_of_two.insert(m);
        } else {
            distinct.insert(m);
        }
    }
    let sorted: Vec<u64> = distinct.into_iter().collect();
    let small = sorted.len() / 2;
    let bases = sorted
        .iter()
        .map(|&m| {
            let (odd, shift) = odd_part(m);
            (m, OddBase { odd, shift })
        })
        .collect();
    CoefficientPartition {
        coeff_r: sorted[..small].to_vec(),
        coeff_s: sorted[small..].to_vec(),
        power_of_two,
        zero_present,
        bases,
        tap_magnitudes: filter.taps().iter().map(|t| t.unsigned_abs()).collect(),
    }
}
