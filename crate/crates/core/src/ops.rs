//! Vectorized kernels over nested columns.
//!
//! Every kernel works on whole flat arrays of a row group and keeps results
//! grouped by an [`Offsets`] array. Outputs are materialized eagerly.

use crate::columnar::{ColumnarRowGroup, NestedListColumn, Offsets, ParticleField};
use crate::error::{Error, Result};

/// Element predicate evaluated column-at-a-time. Comparisons involving NaN
/// are false.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    True,
    False,
    Gt(ParticleField, f64),
    Ge(ParticleField, f64),
    Lt(ParticleField, f64),
    /// `|field| < threshold`
    AbsLt(ParticleField, f64),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn and(self, other: Predicate) -> Predicate {
        Predicate::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Predicate) -> Predicate {
        Predicate::Or(Box::new(self), Box::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Predicate {
        Predicate::Not(Box::new(self))
    }

    pub fn evaluate(&self, col: &NestedListColumn) -> Result<Vec<bool>> {
        let cmp = |f: ParticleField, test: &dyn Fn(f64) -> bool| -> Result<Vec<bool>> {
            Ok(col.floats(f)?.iter().map(|&x| test(x as f64)).collect())
        };
        match self {
            Predicate::True => Ok(vec![true; col.len()]),
            Predicate::False => Ok(vec![false; col.len()]),
            Predicate::Gt(f, t) => cmp(*f, &|x| x > *t),
            Predicate::Ge(f, t) => cmp(*f, &|x| x >= *t),
            Predicate::Lt(f, t) => cmp(*f, &|x| x < *t),
            Predicate::AbsLt(f, t) => cmp(*f, &|x| x.abs() < *t),
            Predicate::And(a, b) => {
                let mut m = a.evaluate(col)?;
                m.iter_mut()
                    .zip(b.evaluate(col)?)
                    .for_each(|(x, y)| *x &= y);
                Ok(m)
            }
            Predicate::Or(a, b) => {
                let mut m = a.evaluate(col)?;
                m.iter_mut()
                    .zip(b.evaluate(col)?)
                    .for_each(|(x, y)| *x |= y);
                Ok(m)
            }
            Predicate::Not(a) => Ok(a.evaluate(col)?.into_iter().map(|x| !x).collect()),
        }
    }
}

/// Per-element selection aligned with a column's flat arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedMask {
    pub offsets: Offsets,
    pub bits: Vec<bool>,
}

impl NestedMask {
    pub fn count_per_event(&self) -> Vec<usize> {
        self.offsets
            .ranges()
            .map(|r| self.bits[r].iter().filter(|&&b| b).count())
            .collect()
    }
}

pub fn nested_filter(
    col: &NestedListColumn,
    predicate: &Predicate,
) -> Result<(NestedListColumn, NestedMask)> {
    let bits = predicate.evaluate(col)?;
    let filtered = col.filter_elements(&bits);
    Ok((
        filtered,
        NestedMask {
            offsets: col.offsets().clone(),
            bits,
        },
    ))
}

/// Flat values of `field` across all events, in event then particle order.
pub fn unnest(col: &NestedListColumn, field: ParticleField) -> Result<&[f32]> {
    col.floats(field)
}

pub fn count_per_event(col: &NestedListColumn) -> Vec<usize> {
    (0..col.num_events())
        .map(|i| col.offsets().len_of(i))
        .collect()
}

/// Index tuples into each group's particle list, flattened: tuple `t`
/// occupies `indices[t * arity..(t + 1) * arity]`, and group `i` owns tuples
/// `offsets.range(i)`. Indices are local to the group.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationIndices {
    pub arity: usize,
    pub offsets: Offsets,
    pub indices: Vec<u32>,
}

impl CombinationIndices {
    pub fn num_tuples(&self) -> usize {
        self.offsets.total()
    }

    pub fn tuple(&self, t: usize) -> &[u32] {
        &self.indices[t * self.arity..(t + 1) * self.arity]
    }

    /// Tuples of group `i`.
    pub fn tuples_of(&self, i: usize) -> impl Iterator<Item = &[u32]> {
        self.offsets.range(i).map(move |t| self.tuple(t))
    }

    /// Resolves local indices to flat indices of the source columns, one
    /// `Offsets` per slot (or a single one shared by every slot). Same
    /// layout as `indices`.
    pub fn flat_tuples(&self, sources: &[&Offsets]) -> Vec<usize> {
        assert!(
            sources.len() == 1 || sources.len() == self.arity,
            "one source per slot"
        );
        let mut out = Vec::with_capacity(self.indices.len());
        for g in 0..self.offsets.num_groups() {
            for t in self.offsets.range(g) {
                for slot in 0..self.arity {
                    let src = sources[slot.min(sources.len() - 1)];
                    out.push(src.as_slice()[g] + self.indices[t * self.arity + slot] as usize);
                }
            }
        }
        out
    }
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// All `k`-subsets of each group, lexicographic by index.
pub fn combinations(offsets: &Offsets, k: usize) -> Result<CombinationIndices> {
    if !(2..=3).contains(&k) {
        return Err(Error::UnsupportedArity(k));
    }
    let counts: Vec<usize> = (0..offsets.num_groups())
        .map(|i| binomial(offsets.len_of(i) as u64, k as u64) as usize)
        .collect();
    let out_offsets = Offsets::from_lengths(counts.iter().copied());
    let mut indices = Vec::with_capacity(out_offsets.total() * k);
    for i in 0..offsets.num_groups() {
        let n = offsets.len_of(i) as u32;
        match k {
            2 => {
                for a in 0..n {
                    for b in a + 1..n {
                        indices.extend_from_slice(&[a, b]);
                    }
                }
            }
            _ => {
                for a in 0..n {
                    for b in a + 1..n {
                        for c in b + 1..n {
                            indices.extend_from_slice(&[a, b, c]);
                        }
                    }
                }
            }
        }
    }
    Ok(CombinationIndices {
        arity: k,
        offsets: out_offsets,
        indices,
    })
}

/// Cartesian product of two collections per event, row-major in `a`.
pub fn cross_pairs(a: &Offsets, b: &Offsets) -> Result<CombinationIndices> {
    if a.num_groups() != b.num_groups() {
        return Err(Error::LengthMismatch(format!(
            "cross_pairs over {} and {} events",
            a.num_groups(),
            b.num_groups()
        )));
    }
    let offsets = Offsets::from_lengths((0..a.num_groups()).map(|i| a.len_of(i) * b.len_of(i)));
    let mut indices = Vec::with_capacity(offsets.total() * 2);
    for i in 0..a.num_groups() {
        for x in 0..a.len_of(i) as u32 {
            for y in 0..b.len_of(i) as u32 {
                indices.extend_from_slice(&[x, y]);
            }
        }
    }
    Ok(CombinationIndices {
        arity: 2,
        offsets,
        indices,
    })
}

/// Position (within the group) of the smallest key; first one wins ties.
pub fn argmin_per_event(keys: &[f64], offsets: &Offsets) -> Vec<Option<usize>> {
    offsets
        .ranges()
        .map(|r| {
            let mut best: Option<(usize, f64)> = None;
            for (k, &v) in keys[r].iter().enumerate() {
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((k, v));
                }
            }
            best.map(|(k, _)| k)
        })
        .collect()
}

/// Position (within the group) of the largest key; first one wins ties.
pub fn argmax_per_event(keys: &[f64], offsets: &Offsets) -> Vec<Option<usize>> {
    offsets
        .ranges()
        .map(|r| {
            let mut best: Option<(usize, f64)> = None;
            for (k, &v) in keys[r].iter().enumerate() {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((k, v));
                }
            }
            best.map(|(k, _)| k)
        })
        .collect()
}

/// Sums each group in ascending index order; empty groups give 0.
pub fn sum_per_event(values: &[f64], offsets: &Offsets) -> Vec<f64> {
    offsets
        .ranges()
        .map(|r| values[r].iter().fold(0.0, |acc, &v| acc + v))
        .collect()
}

pub fn max_per_group(values: &[f64], offsets: &Offsets) -> Vec<Option<f64>> {
    offsets
        .ranges()
        .map(|r| {
            values[r].iter().fold(None, |m: Option<f64>, &v| match m {
                Some(best) if v.partial_cmp(&best) != Some(std::cmp::Ordering::Greater) => {
                    Some(best)
                }
                _ => Some(v),
            })
        })
        .collect()
}

/// True for groups with at least one set bit.
pub fn any_per_event(bits: &[bool], offsets: &Offsets) -> Vec<bool> {
    offsets
        .ranges()
        .map(|r| bits[r].iter().any(|&b| b))
        .collect()
}

/// Offsets of the per-event concatenation of two collections.
pub fn concat_offsets(a: &Offsets, b: &Offsets) -> Result<Offsets> {
    if a.num_groups() != b.num_groups() {
        return Err(Error::LengthMismatch(format!(
            "concatenating {} and {} events",
            a.num_groups(),
            b.num_groups()
        )));
    }
    Ok(Offsets::from_lengths(
        (0..a.num_groups()).map(|i| a.len_of(i) + b.len_of(i)),
    ))
}

/// Per-event concatenation of two flat arrays: each event's `a` values,
/// then its `b` values.
pub fn concat_values<T: Copy>(a: &Offsets, a_values: &[T], b: &Offsets, b_values: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(a_values.len() + b_values.len());
    for (ra, rb) in a.ranges().zip(b.ranges()) {
        out.extend_from_slice(&a_values[ra]);
        out.extend_from_slice(&b_values[rb]);
    }
    out
}

/// Applies an event mask to every decoded column of a row group.
pub fn select_events(rg: &ColumnarRowGroup, mask: &[bool]) -> Result<ColumnarRowGroup> {
    if mask.len() != rg.num_events() {
        return Err(Error::LengthMismatch(format!(
            "event mask has {} entries for {} events",
            mask.len(),
            rg.num_events()
        )));
    }
    Ok(rg.select_events(mask))
}
