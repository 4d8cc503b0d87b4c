//! Seeded synthetic events.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`),
//! so any implementation of that stream cipher reproduces the raw bits.
//! Per-event multiplicities are Poisson, transverse momenta are exponential
//! shifted to at least [`MIN_PT`], angles are uniform.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{Error, Result};
use crate::model::{ChargedLepton, Event, Jet, Met};

pub const MUON_MASS: f32 = 0.106;
pub const ELECTRON_MASS: f32 = 0.000511;
pub const MIN_PT: f64 = 0.1;
pub const DEFAULT_RUN: i64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub num_events: u64,
    pub lambda_jets: f64,
    pub lambda_muons: f64,
    pub lambda_electrons: f64,
    /// Mean of the exponential part of jet pt, GeV.
    pub jet_pt_scale: f64,
    pub lepton_pt_scale: f64,
    pub jet_mass_scale: f64,
    pub met_pt_scale: f64,
    /// Mean of the positive noise added to met.pt to form met.sumet.
    pub sumet_noise_scale: f64,
    /// Pseudorapidity is uniform on `[-eta_max, eta_max)`.
    pub eta_max: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_events: 10_000,
            lambda_jets: 6.0,
            lambda_muons: 2.0,
            lambda_electrons: 1.0,
            jet_pt_scale: 35.0,
            lepton_pt_scale: 30.0,
            jet_mass_scale: 8.0,
            met_pt_scale: 40.0,
            sumet_noise_scale: 300.0,
            eta_max: 2.5,
        }
    }
}

impl GenConfig {
    pub fn with_seed(seed: u64, num_events: u64) -> Self {
        Self {
            seed,
            num_events,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_jets", self.lambda_jets),
            ("lambda_muons", self.lambda_muons),
            ("lambda_electrons", self.lambda_electrons),
            ("jet_pt_scale", self.jet_pt_scale),
            ("lepton_pt_scale", self.lepton_pt_scale),
            ("jet_mass_scale", self.jet_mass_scale),
            ("met_pt_scale", self.met_pt_scale),
            ("sumet_noise_scale", self.sumet_noise_scale),
            ("eta_max", self.eta_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

struct Sampler {
    rng: ChaCha8Rng,
    jet_pt: Exp<f64>,
    lepton_pt: Exp<f64>,
    jet_mass: Exp<f64>,
    met_pt: Exp<f64>,
    sumet_noise: Exp<f64>,
    eta_max: f64,
}

impl Sampler {
    fn new(cfg: &GenConfig, seed: u64) -> Self {
        let exp = |scale: f64| Exp::new(1.0 / scale).expect("validated scale");
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            jet_pt: exp(cfg.jet_pt_scale),
            lepton_pt: exp(cfg.lepton_pt_scale),
            jet_mass: exp(cfg.jet_mass_scale),
            met_pt: exp(cfg.met_pt_scale),
            sumet_noise: exp(cfg.sumet_noise_scale),
            eta_max: cfg.eta_max,
        }
    }

    /// Uniform on `(-pi, pi]`, re-drawn until the `f32` value is still in range.
    fn phi(&mut self) -> f32 {
        loop {
            let u: f64 = self.rng.random();
            let phi = (PI - 2.0 * PI * u) as f32;
            let wide = phi as f64;
            if wide > -PI && wide <= PI {
                return phi;
            }
        }
    }

    fn eta(&mut self) -> f32 {
        self.rng.random_range(-self.eta_max..self.eta_max) as f32
    }

    fn pt(&mut self, dist: Exp<f64>) -> f32 {
        (MIN_PT + dist.sample(&mut self.rng)) as f32
    }

    fn charge(&mut self) -> i8 {
        if self.rng.random::<bool>() {
            1
        } else {
            -1
        }
    }

    fn jet(&mut self) -> Jet {
        Jet {
            pt: self.pt(self.jet_pt),
            eta: self.eta(),
            phi: self.phi(),
            mass: self.jet_mass.sample(&mut self.rng) as f32,
            btag: self.rng.random::<f32>(),
        }
    }

    fn lepton(&mut self, mass: f32) -> ChargedLepton {
        ChargedLepton {
            pt: self.pt(self.lepton_pt),
            eta: self.eta(),
            phi: self.phi(),
            mass,
            charge: self.charge(),
        }
    }

    fn event(&mut self, event_id: i64, jets: usize, muons: usize, electrons: usize) -> Event {
        let met_pt = self.met_pt.sample(&mut self.rng);
        let met_phi = self.phi();
        let noise = self.sumet_noise.sample(&mut self.rng);
        Event {
            event_id,
            run: DEFAULT_RUN,
            met: Met {
                pt: met_pt as f32,
                phi: met_phi,
                sumet: (met_pt + noise) as f32,
            },
            jets: (0..jets).map(|_| self.jet()).collect(),
            muons: (0..muons).map(|_| self.lepton(MUON_MASS)).collect(),
            electrons: (0..electrons).map(|_| self.lepton(ELECTRON_MASS)).collect(),
        }
    }
}

/// Deterministic event stream for `(cfg.seed, cfg)`.
pub struct EventGenerator {
    sampler: Sampler,
    n_jets: Poisson<f64>,
    n_muons: Poisson<f64>,
    n_electrons: Poisson<f64>,
    next_id: u64,
    num_events: u64,
}

impl Iterator for EventGenerator {
    type Item = Event;

    fn next(&mut self) -> Option<Event> {
        if self.next_id >= self.num_events {
            return None;
        }
        let rng = &mut self.sampler.rng;
        let j = self.n_jets.sample(rng) as usize;
        let m = self.n_muons.sample(rng) as usize;
        let e = self.n_electrons.sample(rng) as usize;
        let event = self.sampler.event(self.next_id as i64, j, m, e);
        self.next_id += 1;
        Some(event)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.num_events - self.next_id) as usize;
        (left, Some(left))
    }
}

pub fn generate(cfg: &GenConfig) -> Result<EventGenerator> {
    cfg.validate()?;
    let poisson = |l: f64| Poisson::new(l).map_err(|e| Error::Config(format!("poisson({l}): {e}")));
    Ok(EventGenerator {
        sampler: Sampler::new(cfg, cfg.seed),
        n_jets: poisson(cfg.lambda_jets)?,
        n_muons: poisson(cfg.lambda_muons)?,
        n_electrons: poisson(cfg.lambda_electrons)?,
        next_id: 0,
        num_events: cfg.num_events,
    })
}

/// One event with exactly the requested multiplicities, kinematics drawn
/// with the default configuration.
pub fn make_event_with_counts(seed: u64, jets: usize, muons: usize, electrons: usize) -> Event {
    Sampler::new(&GenConfig::default(), seed).event(0, jets, muons, electrons)
}
