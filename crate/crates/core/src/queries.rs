//! The eight benchmark queries.
//!
//! Each query exists twice: as a vectorized pipeline over a
//! [`ColumnarRowGroup`] and as a row-at-a-time oracle over [`Event`] values.
//! The two share only the physics kernels and the histogram sink.
//!
//! | query | plot                                                    |
//! |-------|---------------------------------------------------------|
//! | Q1    | MET of all events                                       |
//! | Q2    | pt of all jets                                          |
//! | Q3    | pt of jets with abs(eta) < 1                            |
//! | Q4    | MET of events with at least two jets above 40 GeV        |
//! | Q5    | MET of events with an opposite-charge muon pair, 60 < m < 120 |
//! | Q6a/b | trijet closest to 172.5 GeV: its pt / its max b-tag      |
//! | Q7    | scalar pt sum of jets above 30 GeV isolated from leptons |
//! | Q8    | transverse mass of MET and the leading non-Z lepton     |

use std::fmt;
use std::str::FromStr;

use crate::columnar::{
    Collection, ColumnPath, ColumnarRowGroup, NestedListColumn, Offsets, ParticleField, Projection,
};
use crate::error::{Error, Result};
use crate::histogram::{Histogram, HistogramSpec};
use crate::model::{concat_leptons, Event};
use crate::ops::{self, binomial, Predicate};
use crate::physics::{self, CartesianFourVector, FourVector};

/// One plotted quantity. Q6a and Q6b are the two sinks of one pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QueryId {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6a,
    Q6b,
    Q7,
    Q8,
}

impl QueryId {
    pub const ALL: [QueryId; 9] = [
        QueryId::Q1,
        QueryId::Q2,
        QueryId::Q3,
        QueryId::Q4,
        QueryId::Q5,
        QueryId::Q6a,
        QueryId::Q6b,
        QueryId::Q7,
        QueryId::Q8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QueryId::Q1 => "q1",
            QueryId::Q2 => "q2",
            QueryId::Q3 => "q3",
            QueryId::Q4 => "q4",
            QueryId::Q5 => "q5",
            QueryId::Q6a => "q6a",
            QueryId::Q6b => "q6b",
            QueryId::Q7 => "q7",
            QueryId::Q8 => "q8",
        }
    }

    /// Pipeline producing this plot.
    pub fn query(self) -> Query {
        match self {
            QueryId::Q1 => Query::Q1,
            QueryId::Q2 => Query::Q2,
            QueryId::Q3 => Query::Q3,
            QueryId::Q4 => Query::Q4,
            QueryId::Q5 => Query::Q5,
            QueryId::Q6a | QueryId::Q6b => Query::Q6,
            QueryId::Q7 => Query::Q7,
            QueryId::Q8 => Query::Q8,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueryId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QueryId::ALL
            .into_iter()
            .find(|q| q.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownQuery(s.to_string()))
    }
}

/// A query pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Query {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6,
    Q7,
    Q8,
}

impl Query {
    pub const ALL: [Query; 8] = [
        Query::Q1,
        Query::Q2,
        Query::Q3,
        Query::Q4,
        Query::Q5,
        Query::Q6,
        Query::Q7,
        Query::Q8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Query::Q1 => "q1",
            Query::Q2 => "q2",
            Query::Q3 => "q3",
            Query::Q4 => "q4",
            Query::Q5 => "q5",
            Query::Q6 => "q6",
            Query::Q7 => "q7",
            Query::Q8 => "q8",
        }
    }

    /// Plots filled by this pipeline, in output order.
    pub fn sinks(self) -> &'static [QueryId] {
        match self {
            Query::Q1 => &[QueryId::Q1],
            Query::Q2 => &[QueryId::Q2],
            Query::Q3 => &[QueryId::Q3],
            Query::Q4 => &[QueryId::Q4],
            Query::Q5 => &[QueryId::Q5],
            Query::Q6 => &[QueryId::Q6a, QueryId::Q6b],
            Query::Q7 => &[QueryId::Q7],
            Query::Q8 => &[QueryId::Q8],
        }
    }

    /// Minimal set of columns the pipeline reads.
    pub fn projection(self) -> Projection {
        use ColumnPath::*;
        use ParticleField::*;
        let p =
            |c, fs: &[ParticleField]| fs.iter().map(move |&f| Particle(c, f)).collect::<Vec<_>>();
        match self {
            Query::Q1 => Projection::of([MetPt]),
            Query::Q2 => Projection::of(p(Collection::Jets, &[Pt])),
            Query::Q3 => Projection::of(p(Collection::Jets, &[Pt, Eta])),
            Query::Q4 => Projection::of([MetPt]).union(&Projection::of(p(Collection::Jets, &[Pt]))),
            Query::Q5 => Projection::of([MetPt]).union(&Projection::collection(Collection::Muons)),
            Query::Q6 => Projection::collection(Collection::Jets),
            Query::Q7 => Projection::of(
                [Collection::Jets, Collection::Muons, Collection::Electrons]
                    .into_iter()
                    .flat_map(|c| p(c, &[Pt, Eta, Phi])),
            ),
            Query::Q8 => Projection::of([MetPt, MetPhi])
                .union(&Projection::collection(Collection::Muons))
                .union(&Projection::collection(Collection::Electrons)),
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Query {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Query::ALL
            .into_iter()
            .find(|q| q.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownQuery(s.to_string()))
    }
}

/// Selection thresholds. All comparisons are strict except the isolation
/// cut, where a jet exactly `q7_delta_r` away from a lepton is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Cuts {
    pub q3_abs_eta: f64,
    pub q4_jet_pt: f64,
    pub q4_min_jets: usize,
    pub q5_mass_lo: f64,
    pub q5_mass_hi: f64,
    pub q6_target_mass: f64,
    pub q7_jet_pt: f64,
    pub q7_lepton_pt: f64,
    pub q7_delta_r: f64,
    pub q8_min_leptons: usize,
    pub q8_target_mass: f64,
}

impl Default for Cuts {
    fn default() -> Self {
        Self {
            q3_abs_eta: 1.0,
            q4_jet_pt: 40.0,
            q4_min_jets: 2,
            q5_mass_lo: 60.0,
            q5_mass_hi: 120.0,
            q6_target_mass: 172.5,
            q7_jet_pt: 30.0,
            q7_lepton_pt: 10.0,
            q7_delta_r: 0.4,
            q8_min_leptons: 3,
            q8_target_mass: 91.2,
        }
    }
}

/// Histogram layout per plot.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSpecs([HistogramSpec; 9]);

impl Default for HistogramSpecs {
    fn default() -> Self {
        let met = HistogramSpec {
            lo: 0.0,
            hi: 2000.0,
            nbins: 100,
        };
        let pt = HistogramSpec {
            lo: 15.0,
            hi: 250.0,
            nbins: 100,
        };
        let btag = HistogramSpec {
            lo: 0.0,
            hi: 1.0,
            nbins: 100,
        };
        Self(QueryId::ALL.map(|q| match q {
            QueryId::Q1 | QueryId::Q4 | QueryId::Q5 => met,
            QueryId::Q6b => btag,
            _ => pt,
        }))
    }
}

impl HistogramSpecs {
    pub fn get(&self, q: QueryId) -> HistogramSpec {
        self.0[q.index()]
    }

    pub fn set(&mut self, q: QueryId, spec: HistogramSpec) {
        self.0[q.index()] = spec;
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryConfig {
    pub cuts: Cuts,
    pub specs: HistogramSpecs,
}

/// Per-event multiplicities feeding the complexity formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCountInputs {
    pub electrons: u64,
    pub jets: u64,
    pub muons: u64,
    /// Jets passing the Q7 jet cut.
    pub sigma_jets: u64,
}

impl OpCountInputs {
    pub fn from_event(e: &Event, cuts: &Cuts) -> Self {
        Self {
            electrons: e.electrons.len() as u64,
            jets: e.jets.len() as u64,
            muons: e.muons.len() as u64,
            sigma_jets: e
                .jets
                .iter()
                .filter(|j| j.pt as f64 > cuts.q7_jet_pt)
                .count() as u64,
        }
    }
}

/// Records or record combinations a query explores for one event.
pub fn complexity_formula(q: QueryId, c: OpCountInputs) -> u64 {
    let OpCountInputs {
        electrons: e,
        jets: j,
        muons: m,
        sigma_jets: s,
    } = c;
    match q {
        QueryId::Q1 => 1,
        QueryId::Q2 | QueryId::Q3 => j,
        QueryId::Q4 => 1 + j,
        QueryId::Q5 => 1 + binomial(m, 2),
        QueryId::Q6a | QueryId::Q6b => 1 + binomial(j, 3),
        QueryId::Q7 => (e + m) * s,
        QueryId::Q8 => e * m + e + m + 1,
    }
}

/// Result of a query over some slice of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct Partial {
    /// One histogram per sink of the query.
    pub histograms: Vec<Histogram>,
    pub events: u64,
    /// Events contributing at least one fill.
    pub selected_events: u64,
    /// Records or combinations actually explored.
    pub total_ops: u64,
    /// Sum of [`complexity_formula`] over the events.
    pub formula_ops: u64,
    pub bytes_read: u64,
}

impl Partial {
    pub fn empty(query: Query, cfg: &QueryConfig) -> Self {
        Self {
            histograms: query
                .sinks()
                .iter()
                .map(|&s| Histogram::new(cfg.specs.get(s)))
                .collect(),
            events: 0,
            selected_events: 0,
            total_ops: 0,
            formula_ops: 0,
            bytes_read: 0,
        }
    }

    pub fn merge(&mut self, other: &Partial) -> Result<()> {
        if self.histograms.len() != other.histograms.len() {
            return Err(Error::Config(
                "merging partials of different queries".into(),
            ));
        }
        for (a, b) in self.histograms.iter_mut().zip(&other.histograms) {
            a.merge(b)?;
        }
        self.events += other.events;
        self.selected_events += other.selected_events;
        self.total_ops += other.total_ops;
        self.formula_ops += other.formula_ops;
        self.bytes_read += other.bytes_read;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub query: Query,
    /// Merged totals.
    pub total: Partial,
    /// One partial per row group, in row-group order. Empty for oracle runs.
    pub partials: Vec<Partial>,
}

impl QueryResult {
    pub fn from_partials(query: Query, cfg: &QueryConfig, partials: Vec<Partial>) -> Result<Self> {
        let mut total = Partial::empty(query, cfg);
        for p in &partials {
            total.merge(p)?;
        }
        Ok(Self {
            query,
            total,
            partials,
        })
    }

    pub fn histogram(&self, id: QueryId) -> Option<&Histogram> {
        self.query
            .sinks()
            .iter()
            .position(|&s| s == id)
            .map(|i| &self.total.histograms[i])
    }

    pub fn histograms(&self) -> impl Iterator<Item = (QueryId, &Histogram)> {
        self.query
            .sinks()
            .iter()
            .copied()
            .zip(&self.total.histograms)
    }

    pub fn selected_event_count(&self) -> u64 {
        self.total.selected_events
    }

    pub fn total_ops(&self) -> u64 {
        self.total.total_ops
    }
}

// ---------------------------------------------------------------------------
// vectorized pipelines

fn widen(values: &[f32]) -> Vec<f64> {
    values.iter().map(|&v| v as f64).collect()
}

fn cartesian(col: &NestedListColumn) -> Result<Vec<CartesianFourVector>> {
    let pt = col.floats(ParticleField::Pt)?;
    let eta = col.floats(ParticleField::Eta)?;
    let phi = col.floats(ParticleField::Phi)?;
    let mass = col.floats(ParticleField::Mass)?;
    Ok((0..col.len())
        .map(|i| FourVector::from_f32(pt[i], eta[i], phi[i], mass[i]).to_cartesian())
        .collect())
}

fn total_tuples(offsets: &Offsets, k: u64) -> u64 {
    (0..offsets.num_groups())
        .map(|i| binomial(offsets.len_of(i) as u64, k))
        .sum()
}

/// Runs `query` over one row group with the vectorized kernels.
pub fn execute_row_group(
    query: Query,
    rg: &ColumnarRowGroup,
    cfg: &QueryConfig,
) -> Result<Partial> {
    let mut out = Partial::empty(query, cfg);
    let n = rg.num_events();
    out.events = n as u64;
    out.bytes_read = rg.bytes_read();
    let cuts = &cfg.cuts;
    match query {
        Query::Q1 => {
            let met = rg.scalar(ColumnPath::MetPt)?;
            out.histograms[0].fill_all(met.iter().map(|&x| x as f64));
            out.selected_events = n as u64;
            out.total_ops = n as u64;
            out.formula_ops = n as u64;
        }
        Query::Q2 => {
            let jets = rg.collection(Collection::Jets)?;
            out.histograms[0].fill_all(
                ops::unnest(jets, ParticleField::Pt)?
                    .iter()
                    .map(|&x| x as f64),
            );
            out.selected_events = ops::count_per_event(jets)
                .iter()
                .filter(|&&c| c > 0)
                .count() as u64;
            out.total_ops = jets.len() as u64;
            out.formula_ops = jets.len() as u64;
        }
        Query::Q3 => {
            let jets = rg.collection(Collection::Jets)?;
            let (central, _) =
                ops::nested_filter(jets, &Predicate::AbsLt(ParticleField::Eta, cuts.q3_abs_eta))?;
            out.histograms[0].fill_all(
                ops::unnest(&central, ParticleField::Pt)?
                    .iter()
                    .map(|&x| x as f64),
            );
            out.selected_events = ops::count_per_event(&central)
                .iter()
                .filter(|&&c| c > 0)
                .count() as u64;
            out.total_ops = jets.len() as u64;
            out.formula_ops = jets.len() as u64;
        }
        Query::Q4 => {
            let jets = rg.collection(Collection::Jets)?;
            let (hard, _) =
                ops::nested_filter(jets, &Predicate::Gt(ParticleField::Pt, cuts.q4_jet_pt))?;
            let mask: Vec<bool> = ops::count_per_event(&hard)
                .iter()
                .map(|&c| c >= cuts.q4_min_jets)
                .collect();
            let selected = ops::select_events(rg, &mask)?;
            out.histograms[0].fill_all(
                selected
                    .scalar(ColumnPath::MetPt)?
                    .iter()
                    .map(|&x| x as f64),
            );
            out.selected_events = selected.num_events() as u64;
            out.total_ops = (n + jets.len()) as u64;
            out.formula_ops = out.total_ops;
        }
        Query::Q5 => {
            let muons = rg.collection(Collection::Muons)?;
            let p4 = cartesian(muons)?;
            let charge = muons.charge()?;
            let pairs = ops::combinations(muons.offsets(), 2)?;
            let flat = pairs.flat_tuples(&[muons.offsets()]);
            let pass: Vec<bool> = flat
                .chunks_exact(2)
                .map(|t| {
                    let (a, b) = (t[0], t[1]);
                    if charge[a] as i32 * charge[b] as i32 != -1 {
                        return false;
                    }
                    let m = physics::sum_cartesian([p4[a], p4[b]]).mass();
                    m > cuts.q5_mass_lo && m < cuts.q5_mass_hi
                })
                .collect();
            let mask = ops::any_per_event(&pass, &pairs.offsets);
            let selected = ops::select_events(rg, &mask)?;
            out.histograms[0].fill_all(
                selected
                    .scalar(ColumnPath::MetPt)?
                    .iter()
                    .map(|&x| x as f64),
            );
            out.selected_events = selected.num_events() as u64;
            out.total_ops = n as u64 + pairs.num_tuples() as u64;
            out.formula_ops = n as u64 + total_tuples(muons.offsets(), 2);
        }
        Query::Q6 => {
            let jets = rg.collection(Collection::Jets)?;
            let p4 = cartesian(jets)?;
            let btag = jets.floats(ParticleField::Btag)?;
            let triples = ops::combinations(jets.offsets(), 3)?;
            let flat = triples.flat_tuples(&[jets.offsets()]);
            let sums: Vec<CartesianFourVector> = flat
                .chunks_exact(3)
                .map(|t| physics::sum_cartesian(t.iter().map(|&k| p4[k])))
                .collect();
            let keys: Vec<f64> = sums
                .iter()
                .map(|s| (s.mass() - cuts.q6_target_mass).abs())
                .collect();
            let best: Vec<usize> = ops::argmin_per_event(&keys, &triples.offsets)
                .into_iter()
                .enumerate()
                .filter_map(|(i, local)| local.map(|l| triples.offsets.range(i).start + l))
                .collect();
            let best_btags: Vec<f64> = best
                .iter()
                .flat_map(|&t| flat[3 * t..3 * t + 3].iter().map(|&k| btag[k] as f64))
                .collect();
            let max_btag =
                ops::max_per_group(&best_btags, &Offsets::from_lengths(best.iter().map(|_| 3)));
            out.histograms[0].fill_all(best.iter().map(|&t| sums[t].pt()));
            out.histograms[1].fill_all(max_btag.into_iter().flatten());
            out.selected_events = best.len() as u64;
            out.total_ops = n as u64 + triples.num_tuples() as u64;
            out.formula_ops = n as u64 + total_tuples(jets.offsets(), 3);
        }
        Query::Q7 => {
            let jets = rg.collection(Collection::Jets)?;
            let (hard, _) =
                ops::nested_filter(jets, &Predicate::Gt(ParticleField::Pt, cuts.q7_jet_pt))?;
            let el = rg.collection(Collection::Electrons)?;
            let mu = rg.collection(Collection::Muons)?;
            let lep_offsets = ops::concat_offsets(el.offsets(), mu.offsets())?;
            let cat = |f| -> Result<Vec<f32>> {
                Ok(ops::concat_values(
                    el.offsets(),
                    el.floats(f)?,
                    mu.offsets(),
                    mu.floats(f)?,
                ))
            };
            let (lpt, leta, lphi) = (
                cat(ParticleField::Pt)?,
                cat(ParticleField::Eta)?,
                cat(ParticleField::Phi)?,
            );
            let (jeta, jphi) = (
                hard.floats(ParticleField::Eta)?,
                hard.floats(ParticleField::Phi)?,
            );

            let pairs = ops::cross_pairs(&lep_offsets, hard.offsets())?;
            let flat = pairs.flat_tuples(&[&lep_offsets, hard.offsets()]);
            let mut isolated = vec![true; hard.len()];
            for t in flat.chunks_exact(2) {
                let (l, j) = (t[0], t[1]);
                if lpt[l] as f64 > cuts.q7_lepton_pt
                    && physics::delta_r_angles(
                        jeta[j] as f64,
                        jphi[j] as f64,
                        leta[l] as f64,
                        lphi[l] as f64,
                    ) < cuts.q7_delta_r
                {
                    isolated[j] = false;
                }
            }
            let kept = hard.filter_elements(&isolated);
            let sums = ops::sum_per_event(&widen(kept.floats(ParticleField::Pt)?), kept.offsets());
            out.histograms[0].fill_all(sums);
            out.selected_events = n as u64;
            out.total_ops = pairs.num_tuples() as u64;
            out.formula_ops = out.total_ops;
        }
        Query::Q8 => execute_q8(rg, cfg, &mut out)?,
    }
    Ok(out)
}

fn execute_q8(rg: &ColumnarRowGroup, cfg: &QueryConfig, out: &mut Partial) -> Result<()> {
    let cuts = &cfg.cuts;
    let n = rg.num_events() as u64;
    let el = rg.collection(Collection::Electrons)?;
    let mu = rg.collection(Collection::Muons)?;
    out.formula_ops = (0..rg.num_events())
        .map(|i| {
            let (e, m) = (el.offsets().len_of(i) as u64, mu.offsets().len_of(i) as u64);
            e * m + e + m + 1
        })
        .sum();

    let lep_counts = ops::concat_offsets(el.offsets(), mu.offsets())?;
    let mask: Vec<bool> = (0..rg.num_events())
        .map(|i| lep_counts.len_of(i) >= cuts.q8_min_leptons)
        .collect();
    let rg = ops::select_events(rg, &mask)?;
    let el = rg.collection(Collection::Electrons)?;
    let mu = rg.collection(Collection::Muons)?;
    let offsets = ops::concat_offsets(el.offsets(), mu.offsets())?;

    let cat = |f| -> Result<Vec<f32>> {
        Ok(ops::concat_values(
            el.offsets(),
            el.floats(f)?,
            mu.offsets(),
            mu.floats(f)?,
        ))
    };
    let (pt, eta, phi, mass) = (
        cat(ParticleField::Pt)?,
        cat(ParticleField::Eta)?,
        cat(ParticleField::Phi)?,
        cat(ParticleField::Mass)?,
    );
    let charge = ops::concat_values(el.offsets(), el.charge()?, mu.offsets(), mu.charge()?);
    let is_muon = ops::concat_values(
        el.offsets(),
        &vec![false; el.len()],
        mu.offsets(),
        &vec![true; mu.len()],
    );
    let p4: Vec<CartesianFourVector> = (0..pt.len())
        .map(|i| FourVector::from_f32(pt[i], eta[i], phi[i], mass[i]).to_cartesian())
        .collect();

    let pairs = ops::combinations(&offsets, 2)?;
    let flat = pairs.flat_tuples(&[&offsets]);
    let sfos: Vec<bool> = flat
        .chunks_exact(2)
        .map(|t| is_muon[t[0]] == is_muon[t[1]] && charge[t[0]] as i32 * charge[t[1]] as i32 == -1)
        .collect();
    // candidate pairs regrouped per event, keeping enumeration order
    let cand_offsets = Offsets::from_lengths(
        pairs
            .offsets
            .ranges()
            .map(|r| sfos[r].iter().filter(|&&b| b).count()),
    );
    let cand: Vec<usize> = (0..pairs.num_tuples()).filter(|&t| sfos[t]).collect();
    let keys: Vec<f64> = cand
        .iter()
        .map(|&t| {
            (physics::sum_cartesian([p4[flat[2 * t]], p4[flat[2 * t + 1]]]).mass()
                - cuts.q8_target_mass)
                .abs()
        })
        .collect();
    let best = ops::argmin_per_event(&keys, &cand_offsets);

    // leading lepton outside the chosen pair
    let mut lead_keys = widen(&pt);
    for (i, b) in best.iter().enumerate() {
        if let Some(local) = b {
            let t = cand[cand_offsets.range(i).start + local];
            lead_keys[flat[2 * t]] = f64::NEG_INFINITY;
            lead_keys[flat[2 * t + 1]] = f64::NEG_INFINITY;
        }
    }
    let lead = ops::argmax_per_event(&lead_keys, &offsets);
    let met_pt = rg.scalar(ColumnPath::MetPt)?;
    let met_phi = rg.scalar(ColumnPath::MetPhi)?;
    for i in 0..rg.num_events() {
        if best[i].is_none() {
            continue;
        }
        let k = offsets.range(i).start + lead[i].expect("at least three leptons");
        out.histograms[0].fill(physics::transverse_mass(
            met_pt[i] as f64,
            met_phi[i] as f64,
            pt[k] as f64,
            phi[k] as f64,
        ));
        out.selected_events += 1;
    }
    out.total_ops = n + pairs.num_tuples() as u64;
    Ok(())
}

/// Runs `query` over in-memory events with the vectorized engine, one row
/// group per `row_group_size` events.
pub fn run_events(
    query: Query,
    events: &[Event],
    cfg: &QueryConfig,
    row_group_size: usize,
) -> Result<QueryResult> {
    let partials = events
        .chunks(row_group_size.max(1))
        .map(|chunk| execute_row_group(query, &ColumnarRowGroup::from_events(chunk), cfg))
        .collect::<Result<Vec<_>>>()?;
    QueryResult::from_partials(query, cfg, partials)
}

// ---------------------------------------------------------------------------
// oracle

struct OracleEvent<'a> {
    event: &'a Event,
    cfg: &'a QueryConfig,
}

impl OracleEvent<'_> {
    fn run(&self, query: Query, acc: &mut Partial) {
        let e = self.event;
        let cuts = &self.cfg.cuts;
        acc.events += 1;
        let counts = OpCountInputs::from_event(e, cuts);
        acc.formula_ops += complexity_formula(query.sinks()[0], counts);
        let met = e.met.pt as f64;
        match query {
            Query::Q1 => {
                acc.total_ops += 1;
                acc.histograms[0].fill(met);
                acc.selected_events += 1;
            }
            Query::Q2 => {
                for j in &e.jets {
                    acc.total_ops += 1;
                    acc.histograms[0].fill(j.pt as f64);
                }
                acc.selected_events += !e.jets.is_empty() as u64;
            }
            Query::Q3 => {
                let mut any = false;
                for j in &e.jets {
                    acc.total_ops += 1;
                    if (j.eta as f64).abs() < cuts.q3_abs_eta {
                        acc.histograms[0].fill(j.pt as f64);
                        any = true;
                    }
                }
                acc.selected_events += any as u64;
            }
            Query::Q4 => {
                acc.total_ops += 1;
                let mut hard = 0;
                for j in &e.jets {
                    acc.total_ops += 1;
                    if j.pt as f64 > cuts.q4_jet_pt {
                        hard += 1;
                    }
                }
                if hard >= cuts.q4_min_jets {
                    acc.histograms[0].fill(met);
                    acc.selected_events += 1;
                }
            }
            Query::Q5 => {
                acc.total_ops += 1;
                let mut found = false;
                for i in 0..e.muons.len() {
                    for j in i + 1..e.muons.len() {
                        acc.total_ops += 1;
                        let (a, b) = (&e.muons[i], &e.muons[j]);
                        if a.charge as i32 * b.charge as i32 != -1 {
                            continue;
                        }
                        let m = physics::invariant_mass(&[a.p4(), b.p4()]).expect("two particles");
                        if m > cuts.q5_mass_lo && m < cuts.q5_mass_hi {
                            found = true;
                        }
                    }
                }
                if found {
                    acc.histograms[0].fill(met);
                    acc.selected_events += 1;
                }
            }
            Query::Q6 => self.q6(acc),
            Query::Q7 => {
                let leptons = concat_leptons(e);
                let mut sum = 0.0;
                for j in e.jets.iter().filter(|j| j.pt as f64 > cuts.q7_jet_pt) {
                    let mut isolated = true;
                    for l in &leptons {
                        acc.total_ops += 1;
                        if l.pt as f64 > cuts.q7_lepton_pt
                            && physics::delta_r(&j.p4(), &l.p4()) < cuts.q7_delta_r
                        {
                            isolated = false;
                        }
                    }
                    if isolated {
                        sum += j.pt as f64;
                    }
                }
                acc.histograms[0].fill(sum);
                acc.selected_events += 1;
            }
            Query::Q8 => self.q8(acc),
        }
    }

    fn q6(&self, acc: &mut Partial) {
        let jets = &self.event.jets;
        let target = self.cfg.cuts.q6_target_mass;
        acc.total_ops += 1;
        let mut best: Option<([usize; 3], f64)> = None;
        for a in 0..jets.len() {
            for b in a + 1..jets.len() {
                for c in b + 1..jets.len() {
                    acc.total_ops += 1;
                    let m = physics::invariant_mass(&[jets[a].p4(), jets[b].p4(), jets[c].p4()])
                        .expect("three jets");
                    let d = (m - target).abs();
                    if best.is_none_or(|(_, bd)| d < bd) {
                        best = Some(([a, b, c], d));
                    }
                }
            }
        }
        if let Some((idx, _)) = best {
            let trijet = physics::sum(&idx.map(|k| jets[k].p4()));
            acc.histograms[0].fill(trijet.pt());
            let btag = idx
                .iter()
                .map(|&k| jets[k].btag as f64)
                .fold(f64::NEG_INFINITY, f64::max);
            acc.histograms[1].fill(btag);
            acc.selected_events += 1;
        }
    }

    fn q8(&self, acc: &mut Partial) {
        let e = self.event;
        let cuts = &self.cfg.cuts;
        acc.total_ops += 1;
        let leptons = concat_leptons(e);
        if leptons.len() < cuts.q8_min_leptons {
            return;
        }
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..leptons.len() {
            for j in i + 1..leptons.len() {
                acc.total_ops += 1;
                let (a, b) = (&leptons[i], &leptons[j]);
                if a.flavor != b.flavor || a.charge as i32 * b.charge as i32 != -1 {
                    continue;
                }
                let m = physics::invariant_mass(&[a.p4(), b.p4()]).expect("two leptons");
                let d = (m - cuts.q8_target_mass).abs();
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        let Some((i, j, _)) = best else { return };
        let mut lead: Option<usize> = None;
        for k in (0..leptons.len()).filter(|&k| k != i && k != j) {
            if lead.is_none_or(|l| leptons[k].pt > leptons[l].pt) {
                lead = Some(k);
            }
        }
        let l = &leptons[lead.expect("at least three leptons")];
        acc.histograms[0].fill(physics::transverse_mass(
            e.met.pt as f64,
            e.met.phi as f64,
            l.pt as f64,
            l.phi as f64,
        ));
        acc.selected_events += 1;
    }
}

/// Evaluates `query` with plain per-event loops.
pub fn oracle_run<'a>(
    query: Query,
    events: impl IntoIterator<Item = &'a Event>,
    cfg: &QueryConfig,
) -> QueryResult {
    let mut total = Partial::empty(query, cfg);
    for event in events {
        OracleEvent { event, cfg }.run(query, &mut total);
    }
    QueryResult {
        query,
        total,
        partials: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::make_event_with_counts;
    use crate::model::{ChargedLepton, Jet, Met};
    use std::f32::consts::FRAC_PI_2;

    fn bare(met_pt: f32) -> Event {
        Event {
            event_id: 0,
            run: 1,
            met: Met {
                pt: met_pt,
                phi: 0.0,
                sumet: met_pt,
            },
            jets: vec![],
            muons: vec![],
            electrons: vec![],
        }
    }

    fn jet(pt: f32, eta: f32, phi: f32) -> Jet {
        Jet {
            pt,
            eta,
            phi,
            mass: 0.0,
            btag: 0.5,
        }
    }

    fn lep(pt: f32, eta: f32, phi: f32, charge: i8) -> ChargedLepton {
        ChargedLepton {
            pt,
            eta,
            phi,
            mass: 0.0,
            charge,
        }
    }

    fn both(query: Query, events: &[Event]) -> (QueryResult, QueryResult) {
        let cfg = QueryConfig::default();
        (
            run_events(query, events, &cfg, 3).unwrap(),
            oracle_run(query, events, &cfg),
        )
    }

    fn hist(r: &QueryResult) -> &Histogram {
        &r.total.histograms[0]
    }

    #[test]
    fn query_ids_parse() {
        assert_eq!("q6a".parse::<QueryId>().unwrap(), QueryId::Q6a);
        assert_eq!("Q8".parse::<QueryId>().unwrap().query(), Query::Q8);
        assert!("q9".parse::<QueryId>().is_err());
        assert_eq!(
            "q6".parse::<Query>().unwrap().sinks(),
            &[QueryId::Q6a, QueryId::Q6b]
        );
    }

    #[test]
    fn empty_dataset() {
        for q in Query::ALL {
            let (engine, oracle) = both(q, &[]);
            assert_eq!(engine.total.histograms, oracle.total.histograms);
            assert!(engine.total.histograms.iter().all(|h| h.total() == 0));
        }
    }

    #[test]
    fn q1_placement() {
        let events = [bare(5.0), bare(100.0), bare(3000.0)];
        let (engine, oracle) = both(Query::Q1, &events);
        let h = hist(&engine);
        assert_eq!(h.counts()[0], 1);
        assert_eq!(h.counts()[5], 1);
        assert_eq!(h.overflow(), 1);
        assert_eq!(engine.total.histograms, oracle.total.histograms);
        assert_eq!(engine.total_ops(), 3);
    }

    #[test]
    fn q2_fills_every_jet() {
        let mut e = bare(1.0);
        e.jets = vec![jet(20.0, 0.0, 0.0), jet(30.0, 0.0, 0.0)];
        let (engine, _) = both(Query::Q2, &[e]);
        assert_eq!(hist(&engine).total(), 2);
    }

    #[test]
    fn q3_eta_cut_is_strict() {
        let mut e = bare(1.0);
        e.jets = vec![jet(20.0, 1.0, 0.0), jet(30.0, -0.5, 0.0)];
        let (engine, oracle) = both(Query::Q3, &[e]);
        assert_eq!(hist(&engine).total(), 1);
        assert_eq!(engine.total.histograms, oracle.total.histograms);
    }

    #[test]
    fn q4_pt_cut_is_strict() {
        let mut a = bare(10.0);
        a.jets = vec![jet(41.0, 0.0, 0.0), jet(41.0, 0.0, 1.0)];
        let mut b = bare(10.0);
        b.jets = vec![jet(40.0, 0.0, 0.0), jet(41.0, 0.0, 1.0)];
        let (engine, oracle) = both(Query::Q4, &[a, b]);
        assert_eq!(engine.selected_event_count(), 1);
        assert_eq!(oracle.selected_event_count(), 1);
    }

    #[test]
    fn q5_needs_opposite_charge_pair_in_window() {
        // back-to-back massless muons, pt 45 each -> m = 90
        let mut z = bare(7.0);
        z.muons = vec![
            lep(45.0, 0.0, 0.0, 1),
            lep(45.0, 0.0, std::f32::consts::PI - 1e-6, -1),
        ];
        let mut same = z.clone();
        same.muons[1].charge = 1;
        let mut single = z.clone();
        single.muons.pop();
        let (engine, oracle) = both(Query::Q5, &[z, same, single]);
        assert_eq!(engine.selected_event_count(), 1);
        assert_eq!(engine.total.histograms, oracle.total.histograms);
    }

    #[test]
    fn q6_single_candidate() {
        let e = make_event_with_counts(4, 3, 0, 0);
        let (engine, oracle) = both(Query::Q6, std::slice::from_ref(&e));
        assert_eq!(engine.selected_event_count(), 1);
        let expected_pt = physics::sum(&[e.jets[0].p4(), e.jets[1].p4(), e.jets[2].p4()]).pt();
        let mut h = Histogram::new(QueryConfig::default().specs.get(QueryId::Q6a));
        h.fill(expected_pt);
        assert_eq!(engine.histogram(QueryId::Q6a).unwrap(), &h);
        assert_eq!(engine.total.histograms, oracle.total.histograms);

        let two = make_event_with_counts(4, 2, 0, 0);
        let (engine, _) = both(Query::Q6, &[two]);
        assert_eq!(engine.selected_event_count(), 0);
        assert_eq!(engine.total_ops(), 1);
    }

    #[test]
    fn q6_fifty_jets() {
        let e = make_event_with_counts(1, 50, 0, 0);
        let (engine, oracle) = both(Query::Q6, &[e]);
        assert_eq!(engine.total_ops(), 19601);
        assert_eq!(oracle.total_ops(), 19601);
    }

    #[test]
    fn q7_isolation() {
        let mut e = bare(1.0);
        e.jets = vec![jet(35.0, 0.0, 0.0), jet(50.0, 0.0, 1.0)];
        let (engine, _) = both(Query::Q7, &[e.clone()]);
        assert_eq!(
            hist(&engine).counts()[QueryConfig::default()
                .specs
                .get(QueryId::Q7)
                .bin_index(85.0)
                .unwrap()],
            1
        );

        // lepton exactly 0.4 away in eta: kept; lepton 0.3 away: vetoed
        e.jets = vec![jet(35.0, 0.0, 0.0), jet(50.0, 2.0, 1.0)];
        e.muons = vec![lep(20.0, 0.4, 0.0, 1), lep(20.0, 2.3, 1.0, -1)];
        let (engine, oracle) = both(Query::Q7, &[e.clone()]);
        let spec = QueryConfig::default().specs.get(QueryId::Q7);
        let dr = physics::delta_r_angles(0.0, 0.0, 0.4f32 as f64, 0.0);
        assert!(dr >= 0.4, "boundary lepton sits at {dr}");
        assert_eq!(hist(&engine).counts()[spec.bin_index(35.0).unwrap()], 1);
        assert_eq!(engine.total.histograms, oracle.total.histograms);
        assert_eq!(engine.total_ops(), 4);

        // no surviving jets fills zero
        let (engine, _) = both(Query::Q7, &[bare(1.0)]);
        assert_eq!(hist(&engine).underflow(), 1);
    }

    #[test]
    fn q8_picks_remaining_lepton() {
        let mut e = bare(50.0);
        e.met.phi = 0.0;
        e.electrons = vec![lep(40.0, 0.0, 0.0, 1), lep(40.0, 0.1, 3.0, -1)];
        e.muons = vec![lep(50.0, 0.0, FRAC_PI_2, 1)];
        let (engine, oracle) = both(Query::Q8, &[e.clone()]);
        let expected = physics::transverse_mass(50.0, 0.0, 50.0, FRAC_PI_2 as f64);
        let mut h = Histogram::new(QueryConfig::default().specs.get(QueryId::Q8));
        h.fill(expected);
        assert_eq!(hist(&engine), &h);
        assert_eq!(engine.total.histograms, oracle.total.histograms);

        e.electrons[1].charge = 1;
        let (engine, oracle) = both(Query::Q8, &[e]);
        assert_eq!(engine.selected_event_count(), 0);
        assert_eq!(oracle.selected_event_count(), 0);
    }

    #[test]
    fn complexity_examples() {
        let c = |e, j, m, s| OpCountInputs {
            electrons: e,
            jets: j,
            muons: m,
            sigma_jets: s,
        };
        assert_eq!(complexity_formula(QueryId::Q6a, c(0, 50, 0, 0)), 19601);
        assert_eq!(complexity_formula(QueryId::Q5, c(0, 0, 0, 0)), 1);
        assert_eq!(complexity_formula(QueryId::Q8, c(1, 0, 1, 0)), 4);
        assert_eq!(complexity_formula(QueryId::Q7, c(2, 5, 1, 3)), 9);
        assert_eq!(complexity_formula(QueryId::Q4, c(0, 5, 0, 0)), 6);
    }

    #[test]
    fn projections_are_minimal_and_sufficient() {
        let events: Vec<Event> = (0..40)
            .map(|s| {
                make_event_with_counts(s, (s % 7) as usize, (s % 4) as usize, (s % 3) as usize)
            })
            .collect();
        let cfg = QueryConfig::default();
        let full = ColumnarRowGroup::from_events(&events);
        for q in Query::ALL {
            let all = execute_row_group(q, &full, &cfg).unwrap();
            let min = execute_row_group(q, &full.project(&q.projection()), &cfg).unwrap();
            assert_eq!(all, min, "{q}");
        }
        assert!(
            execute_row_group(Query::Q6, &full.project(&Query::Q1.projection()), &cfg).is_err()
        );
    }
}
