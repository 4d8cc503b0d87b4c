//! Equi-width histograms with dedicated underflow, overflow and NaN counters.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Bin layout: `nbins` equal bins over `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub nbins: usize,
}

impl HistogramSpec {
    pub fn new(lo: f64, hi: f64, nbins: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidHistogramSpec(format!(
                "need finite lo < hi, got [{lo}, {hi})"
            )));
        }
        if nbins == 0 {
            return Err(Error::InvalidHistogramSpec(
                "nbins must be at least 1".into(),
            ));
        }
        Ok(Self { lo, hi, nbins })
    }

    /// Lower edge of bin `i`; `edge(nbins) == hi`.
    pub fn edge(&self, i: usize) -> f64 {
        if i == self.nbins {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / self.nbins as f64
        }
    }

    pub fn place(&self, x: f64) -> Placement {
        if x.is_nan() {
            Placement::Nan
        } else if x < self.lo {
            Placement::Underflow
        } else if x >= self.hi {
            Placement::Overflow
        } else {
            let b = ((x - self.lo) * self.nbins as f64 / (self.hi - self.lo)).floor() as usize;
            // rounding can push values just below hi onto nbins
            Placement::Bin(b.min(self.nbins - 1))
        }
    }
}

impl HistogramSpec {
    /// Bin index for in-range values.
    pub fn bin_index(&self, x: f64) -> Option<usize> {
        match self.place(x) {
            Placement::Bin(b) => Some(b),
            _ => None,
        }
    }
}

/// Where a value lands. The derived ordering is underflow < bins < overflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Placement {
    Underflow,
    Bin(usize),
    Overflow,
    Nan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    spec: HistogramSpec,
    counts: Vec<u64>,
    underflow: u64,
    overflow: u64,
    nan_count: u64,
}

impl Histogram {
    pub fn new(spec: HistogramSpec) -> Self {
        Self {
            spec,
            counts: vec![0; spec.nbins],
            underflow: 0,
            overflow: 0,
            nan_count: 0,
        }
    }

    pub fn spec(&self) -> &HistogramSpec {
        &self.spec
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn underflow(&self) -> u64 {
        self.underflow
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    pub fn nan_count(&self) -> u64 {
        self.nan_count
    }

    /// Sum of every counter, i.e. the number of fills.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow + self.nan_count
    }

    pub fn fill(&mut self, x: f64) {
        match self.spec.place(x) {
            Placement::Nan => self.nan_count += 1,
            Placement::Underflow => self.underflow += 1,
            Placement::Overflow => self.overflow += 1,
            Placement::Bin(b) => self.counts[b] += 1,
        }
    }

    pub fn fill_all(&mut self, xs: impl IntoIterator<Item = f64>) {
        for x in xs {
            self.fill(x);
        }
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch(self.spec, other.spec));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        self.nan_count += other.nan_count;
        Ok(())
    }

    pub fn merged(mut self, other: &Histogram) -> Result<Histogram> {
        self.merge(other)?;
        Ok(self)
    }

    /// Returns a copy with every counter multiplied by `k`.
    pub fn scaled(&self, k: u64) -> Histogram {
        Histogram {
            spec: self.spec,
            counts: self.counts.iter().map(|c| c * k).collect(),
            underflow: self.underflow * k,
            overflow: self.overflow * k,
            nan_count: self.nan_count * k,
        }
    }

    /// `bin_lo,bin_hi,count` rows: underflow, each bin, overflow, nan.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.spec.nbins + 4));
        out.push_str("bin_lo,bin_hi,count\n");
        let _ = writeln!(out, "-inf,{},{}", self.spec.lo, self.underflow);
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", self.spec.edge(i), self.spec.edge(i + 1), c);
        }
        let _ = writeln!(out, "{},+inf,{}", self.spec.hi, self.overflow);
        let _ = writeln!(out, "nan,nan,{}", self.nan_count);
        out
    }
}
