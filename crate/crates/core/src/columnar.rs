//! Offset-based nested columnar storage and the native `NF2` container.
//!
//! A particle collection is decomposed into one offsets array plus one flat
//! array per field: event `i` owns flat indices `offsets[i]..offsets[i + 1]`.
//!
//! # File layout (little-endian)
//!
//! ```text
//! magic "NF2\0" | u32 version | u64 row_group_count
//! row_group_count x (u64 byte_offset, u64 num_events)
//! row groups...
//! u32 crc32 of every preceding byte
//! ```
//!
//! Each row group starts with `u64 num_events`, `u32 column_count` and a
//! directory of `(u16 column_id, u64 offset, u64 length)` entries, offsets
//! relative to the row group start. Every column is an array prefixed with
//! its `u64` element count. Readers fetch only the directory and the
//! projected columns.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{ChargedLepton, Event, Jet, JsonlReader, Met};

pub const MAGIC: [u8; 4] = *b"NF2\0";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_ROW_GROUP_SIZE: usize = 400_000;

const FILE_HEADER_LEN: u64 = 4 + 4 + 8;
const HEADER_ENTRY_LEN: u64 = 16;
const RG_HEADER_LEN: u64 = 8 + 4;
const DIR_ENTRY_LEN: u64 = 2 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Collection {
    Jets,
    Muons,
    Electrons,
}

impl Collection {
    pub const ALL: [Collection; 3] = [Collection::Jets, Collection::Muons, Collection::Electrons];

    pub fn name(self) -> &'static str {
        match self {
            Collection::Jets => "jets",
            Collection::Muons => "muons",
            Collection::Electrons => "electrons",
        }
    }

    /// Fields stored for this collection.
    pub fn fields(self) -> &'static [ParticleField] {
        use ParticleField::*;
        match self {
            Collection::Jets => &[Pt, Eta, Phi, Mass, Btag],
            Collection::Muons | Collection::Electrons => &[Pt, Eta, Phi, Mass, Charge],
        }
    }

    fn id_base(self) -> u16 {
        match self {
            Collection::Jets => 16,
            Collection::Muons => 32,
            Collection::Electrons => 48,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParticleField {
    Pt,
    Eta,
    Phi,
    Mass,
    Btag,
    Charge,
}

impl ParticleField {
    pub fn name(self) -> &'static str {
        match self {
            ParticleField::Pt => "pt",
            ParticleField::Eta => "eta",
            ParticleField::Phi => "phi",
            ParticleField::Mass => "mass",
            ParticleField::Btag => "btag",
            ParticleField::Charge => "charge",
        }
    }

    fn id_offset(self) -> u16 {
        match self {
            ParticleField::Pt => 1,
            ParticleField::Eta => 2,
            ParticleField::Phi => 3,
            ParticleField::Mass => 4,
            ParticleField::Btag | ParticleField::Charge => 5,
        }
    }
}

/// A readable column. Offsets arrays are implied by any particle field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ColumnPath {
    EventId,
    Run,
    MetPt,
    MetPhi,
    MetSumet,
    Particle(Collection, ParticleField),
}

impl ColumnPath {
    pub fn all() -> Vec<ColumnPath> {
        let mut v = vec![
            ColumnPath::EventId,
            ColumnPath::Run,
            ColumnPath::MetPt,
            ColumnPath::MetPhi,
            ColumnPath::MetSumet,
        ];
        for c in Collection::ALL {
            v.extend(c.fields().iter().map(|&f| ColumnPath::Particle(c, f)));
        }
        v
    }

    fn column_id(self) -> u16 {
        match self {
            ColumnPath::EventId => 0,
            ColumnPath::Run => 1,
            ColumnPath::MetPt => 2,
            ColumnPath::MetPhi => 3,
            ColumnPath::MetSumet => 4,
            ColumnPath::Particle(c, f) => c.id_base() + f.id_offset(),
        }
    }
}

impl fmt::Display for ColumnPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnPath::EventId => f.write_str("event_id"),
            ColumnPath::Run => f.write_str("run"),
            ColumnPath::MetPt => f.write_str("met.pt"),
            ColumnPath::MetPhi => f.write_str("met.phi"),
            ColumnPath::MetSumet => f.write_str("met.sumet"),
            ColumnPath::Particle(c, p) => write!(f, "{}.{}", c.name(), p.name()),
        }
    }
}

impl FromStr for ColumnPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ColumnPath::all()
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| Error::UnknownColumn(s.to_string()))
    }
}

/// Set of columns to decode.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Projection(BTreeSet<ColumnPath>);

impl Projection {
    pub fn all() -> Self {
        Self(ColumnPath::all().into_iter().collect())
    }

    pub fn of(paths: impl IntoIterator<Item = ColumnPath>) -> Self {
        Self(paths.into_iter().collect())
    }

    /// Parses paths like `met.pt`; `jets.*` expands to every jet field.
    pub fn parse<S: AsRef<str>>(paths: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for p in paths {
            let p = p.as_ref();
            if let Some(prefix) = p.strip_suffix(".*") {
                let c = Collection::ALL
                    .into_iter()
                    .find(|c| c.name() == prefix)
                    .ok_or_else(|| Error::UnknownColumn(p.to_string()))?;
                set.extend(c.fields().iter().map(|&f| ColumnPath::Particle(c, f)));
            } else {
                set.insert(p.parse()?);
            }
        }
        Ok(Self(set))
    }

    pub fn collection(c: Collection) -> Self {
        Self::of(c.fields().iter().map(|&f| ColumnPath::Particle(c, f)))
    }

    pub fn union(mut self, other: &Projection) -> Self {
        self.0.extend(other.0.iter().copied());
        self
    }

    pub fn contains(&self, p: ColumnPath) -> bool {
        self.0.contains(&p)
    }

    pub fn is_subset(&self, other: &Projection) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn paths(&self) -> impl Iterator<Item = ColumnPath> + '_ {
        self.0.iter().copied()
    }

    pub fn touches(&self, c: Collection) -> bool {
        self.0
            .iter()
            .any(|p| matches!(p, ColumnPath::Particle(pc, _) if *pc == c))
    }
}

/// Monotone group boundaries: group `i` spans `self[i]..self[i + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Offsets(Vec<usize>);

impl Offsets {
    pub fn new(v: Vec<usize>) -> Result<Self> {
        if v.first() != Some(&0) {
            return Err(Error::Corrupt("offsets must start with 0".into()));
        }
        if v.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Corrupt("offsets must be non-decreasing".into()));
        }
        Ok(Self(v))
    }

    /// `n` empty groups.
    pub fn empty_groups(n: usize) -> Self {
        Self(vec![0; n + 1])
    }

    pub fn from_lengths(lengths: impl IntoIterator<Item = usize>) -> Self {
        let mut v = vec![0];
        let mut acc = 0;
        for n in lengths {
            acc += n;
            v.push(acc);
        }
        Self(v)
    }

    pub fn num_groups(&self) -> usize {
        self.0.len() - 1
    }

    /// Number of flat elements.
    pub fn total(&self) -> usize {
        *self.0.last().unwrap()
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.0[i]..self.0[i + 1]
    }

    pub fn len_of(&self, i: usize) -> usize {
        self.0[i + 1] - self.0[i]
    }

    pub fn ranges(&self) -> impl ExactSizeIterator<Item = Range<usize>> + '_ {
        self.0.windows(2).map(|w| w[0]..w[1])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// One particle collection of a row group.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedListColumn {
    collection: Collection,
    offsets: Offsets,
    pt: Option<Vec<f32>>,
    eta: Option<Vec<f32>>,
    phi: Option<Vec<f32>>,
    mass: Option<Vec<f32>>,
    btag: Option<Vec<f32>>,
    charge: Option<Vec<i8>>,
}

impl NestedListColumn {
    /// Column with offsets and no decoded fields.
    pub fn new(collection: Collection, offsets: Offsets) -> Self {
        Self {
            collection,
            offsets,
            pt: None,
            eta: None,
            phi: None,
            mass: None,
            btag: None,
            charge: None,
        }
    }

    pub fn with_floats(mut self, field: ParticleField, values: Vec<f32>) -> Result<Self> {
        self.check_len(field, values.len())?;
        let slot = match (field, self.collection) {
            (ParticleField::Pt, _) => &mut self.pt,
            (ParticleField::Eta, _) => &mut self.eta,
            (ParticleField::Phi, _) => &mut self.phi,
            (ParticleField::Mass, _) => &mut self.mass,
            (ParticleField::Btag, Collection::Jets) => &mut self.btag,
            _ => return Err(Error::UnknownColumn(self.path_name(field))),
        };
        *slot = Some(values);
        Ok(self)
    }

    pub fn with_charge(mut self, values: Vec<i8>) -> Result<Self> {
        if self.collection == Collection::Jets {
            return Err(Error::UnknownColumn(self.path_name(ParticleField::Charge)));
        }
        self.check_len(ParticleField::Charge, values.len())?;
        self.charge = Some(values);
        Ok(self)
    }

    fn check_len(&self, field: ParticleField, len: usize) -> Result<()> {
        if len != self.offsets.total() {
            return Err(Error::LengthMismatch(format!(
                "{} has {} values, offsets expect {}",
                self.path_name(field),
                len,
                self.offsets.total()
            )));
        }
        Ok(())
    }

    fn path_name(&self, field: ParticleField) -> String {
        format!("{}.{}", self.collection.name(), field.name())
    }

    pub fn collection(&self) -> Collection {
        self.collection
    }

    pub fn offsets(&self) -> &Offsets {
        &self.offsets
    }

    pub fn num_events(&self) -> usize {
        self.offsets.num_groups()
    }

    pub fn len(&self) -> usize {
        self.offsets.total()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn floats(&self, field: ParticleField) -> Result<&[f32]> {
        let slot = match field {
            ParticleField::Pt => &self.pt,
            ParticleField::Eta => &self.eta,
            ParticleField::Phi => &self.phi,
            ParticleField::Mass => &self.mass,
            ParticleField::Btag => &self.btag,
            ParticleField::Charge => &None,
        };
        slot.as_deref().ok_or_else(|| self.missing(field))
    }

    pub fn charge(&self) -> Result<&[i8]> {
        self.charge
            .as_deref()
            .ok_or_else(|| self.missing(ParticleField::Charge))
    }

    fn missing(&self, field: ParticleField) -> Error {
        if self.collection.fields().contains(&field) {
            Error::NotProjected(self.path_name(field))
        } else {
            Error::UnknownColumn(self.path_name(field))
        }
    }

    pub fn has(&self, field: ParticleField) -> bool {
        match field {
            ParticleField::Charge => self.charge.is_some(),
            f => self.floats(f).is_ok(),
        }
    }

    /// Keeps flat elements where `keep` is true, preserving grouping and order.
    pub fn filter_elements(&self, keep: &[bool]) -> NestedListColumn {
        assert_eq!(keep.len(), self.len(), "mask length must match flat length");
        let offsets = Offsets::from_lengths(
            self.offsets
                .ranges()
                .map(|r| keep[r].iter().filter(|&&k| k).count()),
        );
        let pick_f = |v: &Option<Vec<f32>>| {
            v.as_ref().map(|v| {
                v.iter()
                    .zip(keep)
                    .filter(|(_, &k)| k)
                    .map(|(x, _)| *x)
                    .collect()
            })
        };
        NestedListColumn {
            collection: self.collection,
            pt: pick_f(&self.pt),
            eta: pick_f(&self.eta),
            phi: pick_f(&self.phi),
            mass: pick_f(&self.mass),
            btag: pick_f(&self.btag),
            charge: self.charge.as_ref().map(|v| {
                v.iter()
                    .zip(keep)
                    .filter(|(_, &k)| k)
                    .map(|(x, _)| *x)
                    .collect()
            }),
            offsets,
        }
    }

    /// Keeps whole events where `mask` is true and rebases offsets.
    pub fn select_events(&self, mask: &[bool]) -> NestedListColumn {
        assert_eq!(
            mask.len(),
            self.num_events(),
            "mask length must match event count"
        );
        let mut keep = vec![false; self.len()];
        for (r, &m) in self.offsets.ranges().zip(mask) {
            if m {
                keep[r].fill(true);
            }
        }
        let mut out = self.filter_elements(&keep);
        out.offsets = Offsets::from_lengths(
            self.offsets
                .ranges()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(r, _)| r.len()),
        );
        out
    }
}

/// A horizontal slice of the dataset in columnar form. Columns outside the
/// projection it was read with are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnarRowGroup {
    num_events: usize,
    event_id: Option<Vec<i64>>,
    run: Option<Vec<i64>>,
    met_pt: Option<Vec<f32>>,
    met_phi: Option<Vec<f32>>,
    met_sumet: Option<Vec<f32>>,
    jets: Option<NestedListColumn>,
    muons: Option<NestedListColumn>,
    electrons: Option<NestedListColumn>,
    bytes_read: u64,
}

impl ColumnarRowGroup {
    /// Decomposes events into a fully populated row group.
    pub fn from_events(events: &[Event]) -> Self {
        fn particles<T>(
            events: &[Event],
            c: Collection,
            get: impl Fn(&Event) -> &[T],
            kin: impl Fn(&T) -> [f32; 4],
        ) -> (NestedListColumn, Vec<&T>) {
            let offsets = Offsets::from_lengths(events.iter().map(|e| get(e).len()));
            let all: Vec<&T> = events.iter().flat_map(|e| get(e).iter()).collect();
            let mut col = NestedListColumn::new(c, offsets);
            for (k, f) in [
                ParticleField::Pt,
                ParticleField::Eta,
                ParticleField::Phi,
                ParticleField::Mass,
            ]
            .into_iter()
            .enumerate()
            {
                col = col
                    .with_floats(f, all.iter().map(|p| kin(p)[k]).collect())
                    .unwrap();
            }
            (col, all)
        }
        let (jets, all_jets) = particles(
            events,
            Collection::Jets,
            |e| &e.jets,
            |j| [j.pt, j.eta, j.phi, j.mass],
        );
        let jets = jets
            .with_floats(
                ParticleField::Btag,
                all_jets.iter().map(|j| j.btag).collect(),
            )
            .unwrap();
        let lepton = |c, get: fn(&Event) -> &[ChargedLepton]| {
            let (col, all) = particles(events, c, get, |l| [l.pt, l.eta, l.phi, l.mass]);
            col.with_charge(all.iter().map(|l| l.charge).collect())
                .unwrap()
        };
        Self {
            num_events: events.len(),
            event_id: Some(events.iter().map(|e| e.event_id).collect()),
            run: Some(events.iter().map(|e| e.run).collect()),
            met_pt: Some(events.iter().map(|e| e.met.pt).collect()),
            met_phi: Some(events.iter().map(|e| e.met.phi).collect()),
            met_sumet: Some(events.iter().map(|e| e.met.sumet).collect()),
            jets: Some(jets),
            muons: Some(lepton(Collection::Muons, |e| &e.muons)),
            electrons: Some(lepton(Collection::Electrons, |e| &e.electrons)),
            bytes_read: 0,
        }
    }

    /// Reassembles events. Needs every column.
    pub fn to_events(&self) -> Result<Vec<Event>> {
        let ids = self.ints(ColumnPath::EventId)?;
        let runs = self.ints(ColumnPath::Run)?;
        let (mpt, mphi, msum) = (
            self.scalar(ColumnPath::MetPt)?,
            self.scalar(ColumnPath::MetPhi)?,
            self.scalar(ColumnPath::MetSumet)?,
        );
        let jets = self.collection(Collection::Jets)?;
        let (jpt, jeta, jphi, jm, jb) = (
            jets.floats(ParticleField::Pt)?,
            jets.floats(ParticleField::Eta)?,
            jets.floats(ParticleField::Phi)?,
            jets.floats(ParticleField::Mass)?,
            jets.floats(ParticleField::Btag)?,
        );
        let leptons = |c: Collection, i: usize| -> Result<Vec<ChargedLepton>> {
            let col = self.collection(c)?;
            let (pt, eta, phi, m, q) = (
                col.floats(ParticleField::Pt)?,
                col.floats(ParticleField::Eta)?,
                col.floats(ParticleField::Phi)?,
                col.floats(ParticleField::Mass)?,
                col.charge()?,
            );
            Ok(col
                .offsets()
                .range(i)
                .map(|k| ChargedLepton {
                    pt: pt[k],
                    eta: eta[k],
                    phi: phi[k],
                    mass: m[k],
                    charge: q[k],
                })
                .collect())
        };
        (0..self.num_events)
            .map(|i| {
                Ok(Event {
                    event_id: ids[i],
                    run: runs[i],
                    met: Met {
                        pt: mpt[i],
                        phi: mphi[i],
                        sumet: msum[i],
                    },
                    jets: jets
                        .offsets()
                        .range(i)
                        .map(|k| Jet {
                            pt: jpt[k],
                            eta: jeta[k],
                            phi: jphi[k],
                            mass: jm[k],
                            btag: jb[k],
                        })
                        .collect(),
                    muons: leptons(Collection::Muons, i)?,
                    electrons: leptons(Collection::Electrons, i)?,
                })
            })
            .collect()
    }

    pub fn num_events(&self) -> usize {
        self.num_events
    }

    /// Column bytes fetched from storage to build this row group.
    pub fn bytes_read(&self) -> u64 {
        self.bytes_read
    }

    pub fn ints(&self, path: ColumnPath) -> Result<&[i64]> {
        let slot = match path {
            ColumnPath::EventId => &self.event_id,
            ColumnPath::Run => &self.run,
            other => {
                return Err(Error::UnknownColumn(format!(
                    "{other} is not an integer column"
                )))
            }
        };
        slot.as_deref()
            .ok_or_else(|| Error::NotProjected(path.to_string()))
    }

    pub fn scalar(&self, path: ColumnPath) -> Result<&[f32]> {
        let slot = match path {
            ColumnPath::MetPt => &self.met_pt,
            ColumnPath::MetPhi => &self.met_phi,
            ColumnPath::MetSumet => &self.met_sumet,
            other => {
                return Err(Error::UnknownColumn(format!(
                    "{other} is not a float scalar column"
                )))
            }
        };
        slot.as_deref()
            .ok_or_else(|| Error::NotProjected(path.to_string()))
    }

    pub fn collection(&self, c: Collection) -> Result<&NestedListColumn> {
        let slot = match c {
            Collection::Jets => &self.jets,
            Collection::Muons => &self.muons,
            Collection::Electrons => &self.electrons,
        };
        slot.as_ref()
            .ok_or_else(|| Error::NotProjected(format!("{}.*", c.name())))
    }

    /// Whether `path` is decoded in this row group.
    pub fn has(&self, path: ColumnPath) -> bool {
        match path {
            ColumnPath::EventId | ColumnPath::Run => self.ints(path).is_ok(),
            ColumnPath::MetPt | ColumnPath::MetPhi | ColumnPath::MetSumet => {
                self.scalar(path).is_ok()
            }
            ColumnPath::Particle(c, f) => self.collection(c).map(|col| col.has(f)).unwrap_or(false),
        }
    }

    /// Drops columns outside `p`, as if the row group had been read with it.
    pub fn project(&self, p: &Projection) -> ColumnarRowGroup {
        let keep = |path: ColumnPath| p.contains(path);
        let keep_col =
            |c: Collection, col: &Option<NestedListColumn>| -> Option<NestedListColumn> {
                let col = col.as_ref()?;
                if !p.touches(c) {
                    return None;
                }
                let mut out = col.clone();
                out.pt = out
                    .pt
                    .filter(|_| keep(ColumnPath::Particle(c, ParticleField::Pt)));
                out.eta = out
                    .eta
                    .filter(|_| keep(ColumnPath::Particle(c, ParticleField::Eta)));
                out.phi = out
                    .phi
                    .filter(|_| keep(ColumnPath::Particle(c, ParticleField::Phi)));
                out.mass = out
                    .mass
                    .filter(|_| keep(ColumnPath::Particle(c, ParticleField::Mass)));
                out.btag = out
                    .btag
                    .filter(|_| keep(ColumnPath::Particle(c, ParticleField::Btag)));
                out.charge = out
                    .charge
                    .filter(|_| keep(ColumnPath::Particle(c, ParticleField::Charge)));
                Some(out)
            };
        ColumnarRowGroup {
            num_events: self.num_events,
            event_id: self.event_id.clone().filter(|_| keep(ColumnPath::EventId)),
            run: self.run.clone().filter(|_| keep(ColumnPath::Run)),
            met_pt: self.met_pt.clone().filter(|_| keep(ColumnPath::MetPt)),
            met_phi: self.met_phi.clone().filter(|_| keep(ColumnPath::MetPhi)),
            met_sumet: self
                .met_sumet
                .clone()
                .filter(|_| keep(ColumnPath::MetSumet)),
            jets: keep_col(Collection::Jets, &self.jets),
            muons: keep_col(Collection::Muons, &self.muons),
            electrons: keep_col(Collection::Electrons, &self.electrons),
            bytes_read: self.bytes_read,
        }
    }

    /// Keeps the events where `mask` is true, across every decoded column.
    pub fn select_events(&self, mask: &[bool]) -> ColumnarRowGroup {
        assert_eq!(
            mask.len(),
            self.num_events,
            "mask length must match event count"
        );
        fn pick<T: Copy>(v: &Option<Vec<T>>, mask: &[bool]) -> Option<Vec<T>> {
            v.as_ref().map(|v| {
                v.iter()
                    .zip(mask)
                    .filter(|(_, &m)| m)
                    .map(|(x, _)| *x)
                    .collect()
            })
        }
        ColumnarRowGroup {
            num_events: mask.iter().filter(|&&m| m).count(),
            event_id: pick(&self.event_id, mask),
            run: pick(&self.run, mask),
            met_pt: pick(&self.met_pt, mask),
            met_phi: pick(&self.met_phi, mask),
            met_sumet: pick(&self.met_sumet, mask),
            jets: self.jets.as_ref().map(|c| c.select_events(mask)),
            muons: self.muons.as_ref().map(|c| c.select_events(mask)),
            electrons: self.electrons.as_ref().map(|c| c.select_events(mask)),
            bytes_read: self.bytes_read,
        }
    }

    /// Structural invariants: every column agrees on the event count and
    /// every flat array matches its offsets.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.num_events;
        let lens = [
            self.event_id.as_ref().map(Vec::len),
            self.run.as_ref().map(Vec::len),
            self.met_pt.as_ref().map(Vec::len),
            self.met_phi.as_ref().map(Vec::len),
            self.met_sumet.as_ref().map(Vec::len),
        ];
        if lens.iter().flatten().any(|&l| l != n) {
            return Err(Error::LengthMismatch(format!(
                "scalar column length differs from {n} events"
            )));
        }
        for col in [&self.jets, &self.muons, &self.electrons]
            .into_iter()
            .flatten()
        {
            Offsets::new(col.offsets.0.clone())?;
            if col.num_events() != n {
                return Err(Error::LengthMismatch(format!(
                    "{} offsets cover {} events, expected {n}",
                    col.collection.name(),
                    col.num_events()
                )));
            }
            let total = col.len();
            let flat = [
                col.pt.as_ref().map(Vec::len),
                col.eta.as_ref().map(Vec::len),
                col.phi.as_ref().map(Vec::len),
                col.mass.as_ref().map(Vec::len),
                col.btag.as_ref().map(Vec::len),
                col.charge.as_ref().map(Vec::len),
            ];
            if flat.iter().flatten().any(|&l| l != total) {
                return Err(Error::LengthMismatch(format!(
                    "{} flat arrays disagree with offsets",
                    col.collection.name()
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// encoding

trait LeValue: Copy {
    const WIDTH: usize;
    fn put(self, out: &mut Vec<u8>);
    fn get(b: &[u8]) -> Self;
}

macro_rules! le_value {
    ($($t:ty),*) => {$(
        impl LeValue for $t {
            const WIDTH: usize = std::mem::size_of::<$t>();
            fn put(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
            fn get(b: &[u8]) -> Self {
                <$t>::from_le_bytes(b.try_into().unwrap())
            }
        }
    )*};
}

le_value!(f32, i64, u64, i8);

fn encode_array<T: LeValue>(values: &[T]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + values.len() * T::WIDTH);
    (values.len() as u64).put(&mut out);
    for &v in values {
        v.put(&mut out);
    }
    out
}

fn decode_array<T: LeValue>(bytes: &[u8], what: &str) -> Result<Vec<T>> {
    if bytes.len() < 8 {
        return Err(Error::Corrupt(format!("{what}: truncated length prefix")));
    }
    let n = u64::get(&bytes[..8]) as usize;
    let body = &bytes[8..];
    if body.len() != n.saturating_mul(T::WIDTH) {
        return Err(Error::Corrupt(format!(
            "{what}: {n} values do not fit {} bytes",
            body.len()
        )));
    }
    Ok(body.chunks_exact(T::WIDTH).map(T::get).collect())
}

fn offsets_id(c: Collection) -> u16 {
    c.id_base()
}

/// Serializes a fully populated row group.
fn encode_row_group(rg: &ColumnarRowGroup) -> Result<Vec<u8>> {
    let mut cols: Vec<(u16, Vec<u8>)> = vec![
        (
            ColumnPath::EventId.column_id(),
            encode_array(rg.ints(ColumnPath::EventId)?),
        ),
        (
            ColumnPath::Run.column_id(),
            encode_array(rg.ints(ColumnPath::Run)?),
        ),
        (
            ColumnPath::MetPt.column_id(),
            encode_array(rg.scalar(ColumnPath::MetPt)?),
        ),
        (
            ColumnPath::MetPhi.column_id(),
            encode_array(rg.scalar(ColumnPath::MetPhi)?),
        ),
        (
            ColumnPath::MetSumet.column_id(),
            encode_array(rg.scalar(ColumnPath::MetSumet)?),
        ),
    ];
    for c in Collection::ALL {
        let col = rg.collection(c)?;
        let offs: Vec<u64> = col.offsets.as_slice().iter().map(|&o| o as u64).collect();
        cols.push((offsets_id(c), encode_array(&offs)));
        for &f in c.fields() {
            let id = ColumnPath::Particle(c, f).column_id();
            let bytes = match f {
                ParticleField::Charge => encode_array(col.charge()?),
                f => encode_array(col.floats(f)?),
            };
            cols.push((id, bytes));
        }
    }

    let dir_len = RG_HEADER_LEN + DIR_ENTRY_LEN * cols.len() as u64;
    let data_len: u64 = cols.iter().map(|(_, b)| b.len() as u64).sum();
    let mut out = Vec::with_capacity((dir_len + data_len) as usize);
    (rg.num_events as u64).put(&mut out);
    out.extend_from_slice(&(cols.len() as u32).to_le_bytes());
    let mut pos = dir_len;
    for (id, bytes) in &cols {
        out.extend_from_slice(&id.to_le_bytes());
        pos.put(&mut out);
        (bytes.len() as u64).put(&mut out);
        pos += bytes.len() as u64;
    }
    for (_, bytes) in cols {
        out.extend_from_slice(&bytes);
    }
    Ok(out)
}

struct CrcWriter<W> {
    inner: W,
    hasher: crc32fast::Hasher,
    written: u64,
}

impl<W: Write> Write for CrcWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSummary {
    pub row_groups: usize,
    pub events: u64,
    pub bytes: u64,
}

/// Streams events into a native dataset, cutting row groups of exactly
/// `row_group_size` events (the last may be smaller).
///
/// Row groups are spooled to an anonymous temporary file so the header,
/// which lists every row group, can be written first.
pub struct DatasetWriter<W: Write> {
    out: W,
    row_group_size: usize,
    pending: Vec<Event>,
    spool: BufWriter<File>,
    spooled: u64,
    entries: Vec<(u64, u64)>,
}

impl<W: Write> DatasetWriter<W> {
    pub fn new(out: W, row_group_size: usize) -> Result<Self> {
        if row_group_size == 0 {
            return Err(Error::Config("row group size must be at least 1".into()));
        }
        Ok(Self {
            out,
            row_group_size,
            pending: Vec::with_capacity(row_group_size.min(1 << 16)),
            spool: BufWriter::new(tempfile::tempfile()?),
            spooled: 0,
            entries: Vec::new(),
        })
    }

    pub fn push(&mut self, event: Event) -> Result<()> {
        self.pending.push(event);
        if self.pending.len() == self.row_group_size {
            self.flush_group()?;
        }
        Ok(())
    }

    fn flush_group(&mut self) -> Result<()> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let rg = ColumnarRowGroup::from_events(&self.pending);
        let bytes = encode_row_group(&rg)?;
        self.spool.write_all(&bytes)?;
        self.entries.push((self.spooled, self.pending.len() as u64));
        self.spooled += bytes.len() as u64;
        self.pending.clear();
        Ok(())
    }

    pub fn finish(mut self) -> Result<DatasetSummary> {
        self.flush_group()?;
        let header_len = FILE_HEADER_LEN + HEADER_ENTRY_LEN * self.entries.len() as u64;
        let mut w = CrcWriter {
            inner: &mut self.out,
            hasher: crc32fast::Hasher::new(),
            written: 0,
        };
        let mut header = Vec::with_capacity(header_len as usize);
        header.extend_from_slice(&MAGIC);
        header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        (self.entries.len() as u64).put(&mut header);
        for &(rel, n) in &self.entries {
            (header_len + rel).put(&mut header);
            n.put(&mut header);
        }
        w.write_all(&header)?;
        let mut spool = self
            .spool
            .into_inner()
            .map_err(|e| Error::RawIo(e.into_error()))?;
        spool.seek(SeekFrom::Start(0))?;
        io::copy(&mut spool, &mut w)?;
        let crc = w.hasher.clone().finalize();
        let written = w.written;
        self.out.write_all(&crc.to_le_bytes())?;
        self.out.flush()?;
        Ok(DatasetSummary {
            row_groups: self.entries.len(),
            events: self.entries.iter().map(|e| e.1).sum(),
            bytes: written + 4,
        })
    }
}

pub fn write_events(
    path: &Path,
    events: impl IntoIterator<Item = Event>,
    row_group_size: usize,
) -> Result<DatasetSummary> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = DatasetWriter::new(BufWriter::new(file), row_group_size)?;
    for e in events {
        w.push(e)?;
    }
    w.finish()
}

/// Encodes events into an in-memory dataset image.
pub fn encode_events(
    events: impl IntoIterator<Item = Event>,
    row_group_size: usize,
) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut w = DatasetWriter::new(&mut buf, row_group_size)?;
    for e in events {
        w.push(e)?;
    }
    w.finish()?;
    Ok(buf)
}

/// Converts JSON-lines events into a native dataset.
pub fn ingest_jsonl(input: &Path, output: &Path, row_group_size: usize) -> Result<DatasetSummary> {
    let file = File::open(input).map_err(|e| Error::io(input, e))?;
    let reader = JsonlReader::new(BufReader::new(file));
    ingest_reader(reader, output, row_group_size)
}

fn ingest_reader<R: BufRead>(
    reader: JsonlReader<R>,
    output: &Path,
    row_group_size: usize,
) -> Result<DatasetSummary> {
    let out = File::create(output).map_err(|e| Error::io(output, e))?;
    let mut w = DatasetWriter::new(BufWriter::new(out), row_group_size)?;
    for event in reader {
        w.push(event?)?;
    }
    w.finish()
}

// ---------------------------------------------------------------------------
// reading

#[derive(Debug)]
enum Source {
    File(File),
    Memory(Vec<u8>),
}

impl Source {
    fn read_at(&self, offset: u64, len: u64) -> io::Result<Vec<u8>> {
        let mut buf = vec![0u8; len as usize];
        match self {
            Source::File(f) => {
                use std::os::unix::fs::FileExt;
                f.read_exact_at(&mut buf, offset)?;
            }
            Source::Memory(m) => {
                let end = offset
                    .checked_add(len)
                    .filter(|&e| e <= m.len() as u64)
                    .ok_or_else(|| {
                        io::Error::new(io::ErrorKind::UnexpectedEof, "read past end of dataset")
                    })?;
                buf.copy_from_slice(&m[offset as usize..end as usize]);
            }
        }
        Ok(buf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowGroupMeta {
    pub byte_offset: u64,
    pub num_events: u64,
}

/// Read-only handle on a native dataset. Safe to share across threads;
/// reads use positional I/O.
#[derive(Debug)]
pub struct DatasetFile {
    source: Source,
    path: PathBuf,
    len: u64,
    row_groups: Vec<RowGroupMeta>,
}

impl DatasetFile {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        Self::from_source(Source::File(file), path.to_path_buf(), len)
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        let len = bytes.len() as u64;
        Self::from_source(Source::Memory(bytes), PathBuf::from("<memory>"), len)
    }

    fn from_source(source: Source, path: PathBuf, len: u64) -> Result<Self> {
        if len < FILE_HEADER_LEN + 4 {
            return Err(Error::Corrupt(format!(
                "{} is too short to be a dataset",
                path.display()
            )));
        }
        let head = source.read_at(0, FILE_HEADER_LEN)?;
        if head[..4] != MAGIC {
            return Err(Error::Corrupt(format!("{}: bad magic", path.display())));
        }
        let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Corrupt(format!(
                "{}: unsupported version {version}",
                path.display()
            )));
        }
        let count = u64::get(&head[8..16]);
        let table_len = count
            .checked_mul(HEADER_ENTRY_LEN)
            .filter(|&t| FILE_HEADER_LEN + t + 4 <= len)
            .ok_or_else(|| {
                Error::Corrupt(format!("{}: row group table exceeds file", path.display()))
            })?;
        let table = source.read_at(FILE_HEADER_LEN, table_len)?;
        let row_groups: Vec<RowGroupMeta> = table
            .chunks_exact(16)
            .map(|e| RowGroupMeta {
                byte_offset: u64::get(&e[..8]),
                num_events: u64::get(&e[8..]),
            })
            .collect();
        if row_groups
            .iter()
            .any(|m| m.byte_offset + RG_HEADER_LEN > len - 4)
        {
            return Err(Error::Corrupt(format!(
                "{}: row group offset past end of file",
                path.display()
            )));
        }
        Ok(Self {
            source,
            path,
            len,
            row_groups,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn num_row_groups(&self) -> usize {
        self.row_groups.len()
    }

    pub fn row_group_meta(&self) -> &[RowGroupMeta] {
        &self.row_groups
    }

    pub fn num_events(&self) -> u64 {
        self.row_groups.iter().map(|m| m.num_events).sum()
    }

    /// Recomputes the footer checksum.
    pub fn verify_checksum(&self) -> Result<()> {
        let body_len = self.len - 4;
        let stored = u32::from_le_bytes(self.source.read_at(body_len, 4)?.try_into().unwrap());
        let mut hasher = crc32fast::Hasher::new();
        let mut pos = 0;
        const CHUNK: u64 = 1 << 20;
        while pos < body_len {
            let n = CHUNK.min(body_len - pos);
            hasher.update(&self.source.read_at(pos, n)?);
            pos += n;
        }
        let actual = hasher.finalize();
        if actual != stored {
            return Err(Error::Corrupt(format!(
                "checksum mismatch: stored {stored:08x}, computed {actual:08x}"
            )));
        }
        Ok(())
    }

    /// Decodes the projected columns of row group `index`.
    pub fn read_row_group(
        &self,
        index: usize,
        projection: &Projection,
    ) -> Result<ColumnarRowGroup> {
        let meta = *self
            .row_groups
            .get(index)
            .ok_or(Error::RowGroupOutOfRange {
                index,
                count: self.row_groups.len(),
            })?;
        let head = self.source.read_at(meta.byte_offset, RG_HEADER_LEN)?;
        let n = u64::get(&head[..8]);
        if n != meta.num_events {
            return Err(Error::Corrupt(format!(
                "row group {index} stores {n} events, header declares {}",
                meta.num_events
            )));
        }
        let n = n as usize;
        let ncols = u32::from_le_bytes(head[8..12].try_into().unwrap()) as u64;
        let dir = self
            .source
            .read_at(meta.byte_offset + RG_HEADER_LEN, ncols * DIR_ENTRY_LEN)?;
        let directory: Vec<(u16, u64, u64)> = dir
            .chunks_exact(DIR_ENTRY_LEN as usize)
            .map(|e| {
                (
                    u16::from_le_bytes([e[0], e[1]]),
                    u64::get(&e[2..10]),
                    u64::get(&e[10..18]),
                )
            })
            .collect();

        let mut bytes_read = 0u64;
        let mut fetch = |id: u16, what: &dyn fmt::Display| -> Result<Vec<u8>> {
            let &(_, off, len) = directory
                .iter()
                .find(|d| d.0 == id)
                .ok_or_else(|| Error::Corrupt(format!("row group {index} lacks column {what}")))?;
            let start = meta.byte_offset + off;
            if start.checked_add(len).is_none_or(|end| end > self.len - 4) {
                return Err(Error::Corrupt(format!(
                    "column {what} runs past end of file"
                )));
            }
            bytes_read += len;
            Ok(self.source.read_at(start, len)?)
        };

        let mut rg = ColumnarRowGroup {
            num_events: n,
            event_id: None,
            run: None,
            met_pt: None,
            met_phi: None,
            met_sumet: None,
            jets: None,
            muons: None,
            electrons: None,
            bytes_read: 0,
        };
        let scalar_len = |v: usize, path: ColumnPath| -> Result<()> {
            if v != n {
                return Err(Error::Corrupt(format!(
                    "{path} has {v} values for {n} events"
                )));
            }
            Ok(())
        };
        for path in projection.paths() {
            match path {
                ColumnPath::EventId | ColumnPath::Run => {
                    let v: Vec<i64> =
                        decode_array(&fetch(path.column_id(), &path)?, &path.to_string())?;
                    scalar_len(v.len(), path)?;
                    if path == ColumnPath::EventId {
                        rg.event_id = Some(v);
                    } else {
                        rg.run = Some(v);
                    }
                }
                ColumnPath::MetPt | ColumnPath::MetPhi | ColumnPath::MetSumet => {
                    let v: Vec<f32> =
                        decode_array(&fetch(path.column_id(), &path)?, &path.to_string())?;
                    scalar_len(v.len(), path)?;
                    match path {
                        ColumnPath::MetPt => rg.met_pt = Some(v),
                        ColumnPath::MetPhi => rg.met_phi = Some(v),
                        _ => rg.met_sumet = Some(v),
                    }
                }
                ColumnPath::Particle(..) => {}
            }
        }
        for c in Collection::ALL {
            if !projection.touches(c) {
                continue;
            }
            let what = format!("{}.offsets", c.name());
            let raw: Vec<u64> = decode_array(&fetch(offsets_id(c), &what)?, &what)?;
            let offsets = Offsets::new(raw.into_iter().map(|o| o as usize).collect())?;
            if offsets.num_groups() != n {
                return Err(Error::Corrupt(format!(
                    "{what} covers {} events, expected {n}",
                    offsets.num_groups()
                )));
            }
            let mut col = NestedListColumn::new(c, offsets);
            for &f in c.fields() {
                let path = ColumnPath::Particle(c, f);
                if !projection.contains(path) {
                    continue;
                }
                let bytes = fetch(path.column_id(), &path)?;
                col = match f {
                    ParticleField::Charge => {
                        col.with_charge(decode_array(&bytes, &path.to_string())?)
                    }
                    f => col.with_floats(f, decode_array(&bytes, &path.to_string())?),
                }
                .map_err(|e| Error::Corrupt(e.to_string()))?;
            }
            match c {
                Collection::Jets => rg.jets = Some(col),
                Collection::Muons => rg.muons = Some(col),
                Collection::Electrons => rg.electrons = Some(col),
            }
        }
        rg.bytes_read = bytes_read;
        Ok(rg)
    }

    /// Every event, in file order.
    pub fn read_all_events(&self) -> Result<Vec<Event>> {
        let all = Projection::all();
        let mut out = Vec::with_capacity(self.num_events() as usize);
        for i in 0..self.num_row_groups() {
            out.extend(self.read_row_group(i, &all)?.to_events()?);
        }
        Ok(out)
    }

    /// Streams events row group by row group.
    pub fn events(&self) -> impl Iterator<Item = Result<Event>> + '_ {
        let all = Projection::all();
        (0..self.num_row_groups()).flat_map(move |i| {
            match self.read_row_group(i, &all).and_then(|rg| rg.to_events()) {
                Ok(events) => events.into_iter().map(Ok).collect::<Vec<_>>(),
                Err(e) => vec![Err(e)],
            }
        })
    }
}

/// Dataset size multiplier `2^exponent`, `exponent` in `[-16, 7]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScaleFactor(i8);

impl ScaleFactor {
    pub const MIN_EXPONENT: i32 = -16;
    pub const MAX_EXPONENT: i32 = 7;

    pub fn from_exponent(exponent: i32) -> Result<Self> {
        if !(Self::MIN_EXPONENT..=Self::MAX_EXPONENT).contains(&exponent) {
            return Err(Error::InvalidScaleFactor(format!("2^{exponent}")));
        }
        Ok(Self(exponent as i8))
    }

    /// Accepts exact powers of two in range.
    pub fn from_value(sf: f64) -> Result<Self> {
        let bad = || Error::InvalidScaleFactor(sf.to_string());
        if !(sf.is_finite() && sf > 0.0) {
            return Err(bad());
        }
        let e = sf.log2().round();
        if 2f64.powi(e as i32) != sf {
            return Err(bad());
        }
        Self::from_exponent(e as i32).map_err(|_| bad())
    }

    pub fn exponent(self) -> i32 {
        self.0 as i32
    }

    pub fn value(self) -> f64 {
        2f64.powi(self.0 as i32)
    }

    /// Events in a dataset of `n` events after scaling: `n * 2^i` for
    /// `i >= 0`, else `ceil(n / 2^-i)`.
    pub fn scaled_len(self, n: u64) -> u64 {
        if self.0 >= 0 {
            n << self.0
        } else {
            let d = 1u64 << (-self.0);
            n.div_ceil(d)
        }
    }
}

impl fmt::Display for ScaleFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Writes `src` scaled by `sf`: repeated `sf` times for `sf >= 1`, truncated
/// to the first `ceil(sf * n)` events otherwise.
pub fn replicate_scale<W: Write>(
    src: &DatasetFile,
    sf: ScaleFactor,
    out: W,
    row_group_size: usize,
) -> Result<DatasetSummary> {
    let n = src.num_events();
    if sf.exponent() < 0 && n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut w = DatasetWriter::new(out, row_group_size)?;
    if sf.exponent() >= 0 {
        for _ in 0..(1u64 << sf.exponent()) {
            for e in src.events() {
                w.push(e?)?;
            }
        }
    } else {
        for e in src.events().take(sf.scaled_len(n) as usize) {
            w.push(e?)?;
        }
    }
    w.finish()
}

pub fn replicate_scale_to_path(
    src: &DatasetFile,
    sf: ScaleFactor,
    path: &Path,
    row_group_size: usize,
) -> Result<DatasetSummary> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    replicate_scale(src, sf, BufWriter::new(file), row_group_size)
}

/// Reads the whole of `r` into an in-memory dataset.
pub fn read_dataset<R: Read>(mut r: R) -> Result<DatasetFile> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    DatasetFile::from_bytes(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Met;

    fn jet(pt: f32) -> Jet {
        Jet {
            pt,
            eta: 0.5,
            phi: 1.0,
            mass: 3.0,
            btag: 0.25,
        }
    }

    fn lepton(pt: f32, charge: i8) -> ChargedLepton {
        ChargedLepton {
            pt,
            eta: -0.5,
            phi: -1.0,
            mass: 0.106,
            charge,
        }
    }

    fn events(n: usize) -> Vec<Event> {
        (0..n)
            .map(|i| Event {
                event_id: i as i64,
                run: 1,
                met: Met {
                    pt: i as f32,
                    phi: 0.5,
                    sumet: 2.0 * i as f32,
                },
                jets: (0..i % 4).map(|k| jet(10.0 + k as f32)).collect(),
                muons: (0..i % 3)
                    .map(|k| lepton(5.0 + k as f32, if k % 2 == 0 { 1 } else { -1 }))
                    .collect(),
                electrons: (0..i % 2).map(|_| lepton(7.0, -1)).collect(),
            })
            .collect()
    }

    #[test]
    fn row_groups_are_cut_in_input_order() {
        let bytes = encode_events(events(1000), 400).unwrap();
        let ds = DatasetFile::from_bytes(bytes).unwrap();
        let sizes: Vec<u64> = ds.row_group_meta().iter().map(|m| m.num_events).collect();
        assert_eq!(sizes, [400, 400, 200]);
        assert_eq!(ds.read_all_events().unwrap(), events(1000));
        ds.verify_checksum().unwrap();
    }

    #[test]
    fn empty_input_gives_zero_row_groups() {
        let ds = DatasetFile::from_bytes(encode_events(Vec::new(), 10).unwrap()).unwrap();
        assert_eq!(ds.num_row_groups(), 0);
        assert_eq!(ds.num_events(), 0);
        ds.verify_checksum().unwrap();
    }

    #[test]
    fn header_layout() {
        let bytes = encode_events(events(3), 2).unwrap();
        assert_eq!(&bytes[..4], b"NF2\0");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2);
        // first row group starts right after the two-entry table
        assert_eq!(
            u64::from_le_bytes(bytes[16..24].try_into().unwrap()),
            16 + 32
        );
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 2);
    }

    #[test]
    fn projection_reads_only_requested_columns() {
        let ds = DatasetFile::from_bytes(encode_events(events(10), 100).unwrap()).unwrap();
        let rg = ds
            .read_row_group(0, &Projection::parse(["met.pt"]).unwrap())
            .unwrap();
        assert_eq!(rg.bytes_read(), 8 + 4 * 10);
        assert!(rg.has(ColumnPath::MetPt));
        assert!(!rg.has(ColumnPath::MetPhi));
        assert!(rg.collection(Collection::Jets).is_err());

        let rg = ds
            .read_row_group(0, &Projection::parse(["jets.pt", "jets.eta"]).unwrap())
            .unwrap();
        let jets = rg.collection(Collection::Jets).unwrap();
        let n_jets = jets.len() as u64;
        assert_eq!(rg.bytes_read(), (8 + 8 * 11) + 2 * (8 + 4 * n_jets));
        assert!(jets.floats(ParticleField::Pt).is_ok());
        assert!(matches!(
            jets.floats(ParticleField::Phi),
            Err(Error::NotProjected(_))
        ));

        let full = ds.read_row_group(0, &Projection::all()).unwrap();
        assert_eq!(full.to_events().unwrap(), events(10));
    }

    #[test]
    fn unknown_paths_are_rejected() {
        assert!(matches!(
            Projection::parse(["jets.charge"]),
            Err(Error::UnknownColumn(_))
        ));
        assert!(matches!(
            Projection::parse(["taus.*"]),
            Err(Error::UnknownColumn(_))
        ));
        assert_eq!(
            Projection::parse(["muons.*"]).unwrap(),
            Projection::collection(Collection::Muons)
        );
    }

    #[test]
    fn row_group_index_out_of_range() {
        let ds = DatasetFile::from_bytes(encode_events(events(3), 2).unwrap()).unwrap();
        assert!(matches!(
            ds.read_row_group(2, &Projection::all()),
            Err(Error::RowGroupOutOfRange { index: 2, count: 2 })
        ));
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = encode_events(events(5), 5).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        let ds = DatasetFile::from_bytes(bytes).unwrap();
        assert!(matches!(ds.verify_checksum(), Err(Error::Corrupt(_))));

        let mut bytes = encode_events(events(5), 5).unwrap();
        bytes[0] = b'X';
        assert!(DatasetFile::from_bytes(bytes).is_err());
    }

    #[test]
    fn select_events_rebases_offsets() {
        let rg = ColumnarRowGroup::from_events(&events(6));
        let all = rg.select_events(&[true; 6]);
        assert_eq!(all, rg);
        let none = rg.select_events(&[false; 6]);
        assert_eq!(none.num_events(), 0);
        assert_eq!(
            none.collection(Collection::Jets)
                .unwrap()
                .offsets()
                .as_slice(),
            &[0]
        );
        let some = rg.select_events(&[false, true, false, true, true, false]);
        some.check_invariants().unwrap();
        let picked: Vec<Event> = [1, 3, 4].iter().map(|&i| events(6)[i].clone()).collect();
        assert_eq!(some.to_events().unwrap(), picked);
    }

    #[test]
    fn scale_factor_validation() {
        assert!(ScaleFactor::from_value(3.0).is_err());
        assert!(ScaleFactor::from_value(0.3).is_err());
        assert!(ScaleFactor::from_value(256.0).is_err());
        assert_eq!(ScaleFactor::from_value(0.25).unwrap().exponent(), -2);
        for i in -16..=7 {
            let sf = ScaleFactor::from_exponent(i).unwrap();
            assert_eq!(ScaleFactor::from_value(sf.value()).unwrap(), sf);
        }
        assert!(ScaleFactor::from_exponent(-17).is_err());
        assert!(ScaleFactor::from_exponent(8).is_err());
        assert_eq!(ScaleFactor::from_exponent(-4).unwrap().scaled_len(100), 7);
    }

    #[test]
    fn replication() {
        let src = DatasetFile::from_bytes(encode_events(events(800), 300).unwrap()).unwrap();
        let mut out = Vec::new();
        replicate_scale(&src, ScaleFactor::from_exponent(0).unwrap(), &mut out, 300).unwrap();
        assert_eq!(
            DatasetFile::from_bytes(out)
                .unwrap()
                .read_all_events()
                .unwrap(),
            events(800)
        );

        let mut out = Vec::new();
        let s =
            replicate_scale(&src, ScaleFactor::from_exponent(1).unwrap(), &mut out, 300).unwrap();
        assert_eq!(s.events, 1600);
        let all = DatasetFile::from_bytes(out)
            .unwrap()
            .read_all_events()
            .unwrap();
        assert_eq!(all[..800], all[800..]);

        let mut out = Vec::new();
        let s =
            replicate_scale(&src, ScaleFactor::from_exponent(-4).unwrap(), &mut out, 300).unwrap();
        assert_eq!(s.events, 50);

        let empty = DatasetFile::from_bytes(encode_events(Vec::new(), 10).unwrap()).unwrap();
        assert!(matches!(
            replicate_scale(
                &empty,
                ScaleFactor::from_exponent(-1).unwrap(),
                Vec::new(),
                10
            ),
            Err(Error::EmptyDataset)
        ));
    }
}
