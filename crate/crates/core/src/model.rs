//! Row view of an event: scalar metadata, missing transverse momentum and
//! the three particle collections the queries read.
//!
//! Kinematics are stored as `f32`, matching the on-disk column width.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::FourVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Met {
    pub pt: f32,
    pub phi: f32,
    pub sumet: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargedLepton {
    pub pt: f32,
    pub eta: f32,
    pub phi: f32,
    pub mass: f32,
    pub charge: i8,
}

impl ChargedLepton {
    pub fn p4(&self) -> FourVector {
        FourVector::from_f32(self.pt, self.eta, self.phi, self.mass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jet {
    pub pt: f32,
    pub eta: f32,
    pub phi: f32,
    pub mass: f32,
    pub btag: f32,
}

impl Jet {
    pub fn p4(&self) -> FourVector {
        FourVector::from_f32(self.pt, self.eta, self.phi, self.mass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub event_id: i64,
    pub run: i64,
    pub met: Met,
    pub jets: Vec<Jet>,
    pub muons: Vec<ChargedLepton>,
    pub electrons: Vec<ChargedLepton>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    Electron,
    Muon,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightLepton {
    pub pt: f32,
    pub eta: f32,
    pub phi: f32,
    pub mass: f32,
    pub charge: i8,
    pub flavor: Flavor,
}

impl LightLepton {
    fn new(l: &ChargedLepton, flavor: Flavor) -> Self {
        Self {
            pt: l.pt,
            eta: l.eta,
            phi: l.phi,
            mass: l.mass,
            charge: l.charge,
            flavor,
        }
    }

    pub fn p4(&self) -> FourVector {
        FourVector::from_f32(self.pt, self.eta, self.phi, self.mass)
    }
}

/// Electrons in order, then muons in order.
pub fn concat_leptons(e: &Event) -> Vec<LightLepton> {
    e.electrons
        .iter()
        .map(|l| LightLepton::new(l, Flavor::Electron))
        .chain(e.muons.iter().map(|l| LightLepton::new(l, Flavor::Muon)))
        .collect()
}

/// First invariant an event breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub event_id: i64,
    /// Dotted path, e.g. `jets[2].pt`.
    pub field: String,
    pub rule: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "event {}: `{}` violates {}",
            self.event_id, self.field, self.rule
        )
    }
}

fn phi_in_range(phi: f32) -> bool {
    let phi = phi as f64;
    phi > -PI && phi <= PI
}

struct Checker {
    event_id: i64,
}

impl Checker {
    fn check(
        &self,
        ok: bool,
        field: impl FnOnce() -> String,
        rule: &'static str,
    ) -> Result<(), Violation> {
        if ok {
            Ok(())
        } else {
            Err(Violation {
                event_id: self.event_id,
                field: field(),
                rule,
            })
        }
    }

    fn kinematics(
        &self,
        prefix: &str,
        i: usize,
        pt: f32,
        eta: f32,
        phi: f32,
        mass: f32,
    ) -> Result<(), Violation> {
        self.check(
            pt >= 0.0 && pt.is_finite(),
            || format!("{prefix}[{i}].pt"),
            "pt ≥ 0",
        )?;
        self.check(
            eta.is_finite(),
            || format!("{prefix}[{i}].eta"),
            "eta finite",
        )?;
        self.check(
            phi_in_range(phi),
            || format!("{prefix}[{i}].phi"),
            "phi in (−π, π]",
        )?;
        self.check(
            mass >= 0.0 && mass.is_finite(),
            || format!("{prefix}[{i}].mass"),
            "mass ≥ 0",
        )
    }

    fn leptons(&self, prefix: &str, leptons: &[ChargedLepton]) -> Result<(), Violation> {
        for (i, l) in leptons.iter().enumerate() {
            self.kinematics(prefix, i, l.pt, l.eta, l.phi, l.mass)?;
            self.check(
                l.charge == 1 || l.charge == -1,
                || format!("{prefix}[{i}].charge"),
                "charge domain",
            )?;
        }
        Ok(())
    }
}

pub fn validate_event(e: &Event) -> Result<(), Violation> {
    let c = Checker {
        event_id: e.event_id,
    };
    c.check(
        e.met.pt >= 0.0 && e.met.pt.is_finite(),
        || "met.pt".into(),
        "pt ≥ 0",
    )?;
    c.check(
        phi_in_range(e.met.phi),
        || "met.phi".into(),
        "phi in (−π, π]",
    )?;
    c.check(
        e.met.sumet >= 0.0 && e.met.sumet.is_finite(),
        || "met.sumet".into(),
        "sumet ≥ 0",
    )?;
    for (i, j) in e.jets.iter().enumerate() {
        c.kinematics("jets", i, j.pt, j.eta, j.phi, j.mass)?;
        c.check(
            (0.0..=1.0).contains(&j.btag),
            || format!("jets[{i}].btag"),
            "btag in [0, 1]",
        )?;
    }
    c.leptons("muons", &e.muons)?;
    c.leptons("electrons", &e.electrons)
}

/// Parses and validates one JSON-lines record. `line` is 1-based.
pub fn parse_event_line(text: &str, line: usize) -> Result<Event> {
    let event: Event = serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })?;
    validate_event(&event).map_err(|v| Error::InvalidEvent {
        line,
        event_id: v.event_id,
        field: v.field,
        rule: v.rule,
    })?;
    Ok(event)
}

/// Streams events from JSON-lines text. Blank lines are skipped.
pub struct JsonlReader<R> {
    inner: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> JsonlReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            line: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for JsonlReader<R> {
    type Item = Result<Event>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {
                    self.line += 1;
                    let text = self.buf.trim();
                    if text.is_empty() {
                        continue;
                    }
                    return Some(parse_event_line(text, self.line));
                }
                Err(e) => return Some(Err(Error::RawIo(e))),
            }
        }
    }
}

pub fn write_jsonl<'a, W: Write>(
    out: &mut W,
    events: impl IntoIterator<Item = &'a Event>,
) -> Result<usize> {
    let mut n = 0;
    for e in events {
        serde_json::to_writer(&mut *out, e).map_err(|e| Error::RawIo(e.into()))?;
        out.write_all(b"\n")?;
        n += 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lepton(charge: i8) -> ChargedLepton {
        ChargedLepton {
            pt: 20.0,
            eta: 0.1,
            phi: 0.5,
            mass: 0.106,
            charge,
        }
    }

    fn event() -> Event {
        Event {
            event_id: 7,
            run: 1,
            met: Met {
                pt: 12.0,
                phi: -1.0,
                sumet: 200.0,
            },
            jets: vec![Jet {
                pt: 50.0,
                eta: 1.0,
                phi: 2.0,
                mass: 5.0,
                btag: 0.3,
            }],
            muons: vec![lepton(1)],
            electrons: vec![lepton(-1), lepton(1)],
        }
    }

    #[test]
    fn concat_orders_electrons_first() {
        let mut e = event();
        e.electrons.clear();
        e.muons.clear();
        assert!(concat_leptons(&e).is_empty());

        let l = concat_leptons(&event());
        let flavors: Vec<_> = l.iter().map(|l| l.flavor).collect();
        assert_eq!(flavors, [Flavor::Electron, Flavor::Electron, Flavor::Muon]);
        assert_eq!(l[0].charge, -1);
    }

    #[test]
    fn validation() {
        assert_eq!(validate_event(&event()), Ok(()));

        let mut e = event();
        e.muons[0].charge = 0;
        let v = validate_event(&e).unwrap_err();
        assert_eq!(
            (v.field.as_str(), v.rule),
            ("muons[0].charge", "charge domain")
        );

        let mut e = event();
        e.jets[0].pt = -1.0;
        let v = validate_event(&e).unwrap_err();
        assert_eq!((v.field.as_str(), v.rule), ("jets[0].pt", "pt ≥ 0"));

        let mut e = event();
        e.met.phi = std::f32::consts::PI; // rounds above pi
        assert_eq!(validate_event(&e).unwrap_err().field, "met.phi");

        let mut e = event();
        e.jets[0].btag = 1.5;
        assert_eq!(validate_event(&e).unwrap_err().rule, "btag in [0, 1]");
    }

    #[test]
    fn jsonl_requires_every_key() {
        let good = serde_json::to_string(&event()).unwrap();
        assert_eq!(parse_event_line(&good, 1).unwrap(), event());

        let missing = good.replace(r#","electrons":"#, r#","other":"#);
        assert!(matches!(
            parse_event_line(&missing, 4),
            Err(Error::Parse { line: 4, .. })
        ));

        let mut bad = event();
        bad.muons[0].charge = 2;
        let text = serde_json::to_string(&bad).unwrap();
        match parse_event_line(&text, 9) {
            Err(Error::InvalidEvent {
                line: 9,
                event_id: 7,
                field,
                ..
            }) => assert_eq!(field, "muons[0].charge"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let mut e = event();
        e.jets[0].eta = 0.123_456_79;
        e.met.pt = 1.0e-7;
        let mut buf = Vec::new();
        write_jsonl(&mut buf, [&e, &e]).unwrap();
        let back: Vec<Event> = JsonlReader::new(&buf[..]).collect::<Result<_>>().unwrap();
        assert_eq!(back, vec![e.clone(), e]);
    }
}
