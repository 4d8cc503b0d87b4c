//! Four-vector kinematics in the (pt, eta, phi, mass) parameterisation.
//!
//! Sums of particles are formed in Cartesian (px, py, pz, E) space and
//! converted back. All arithmetic is `f64`, even though stored columns are
//! `f32`.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};

/// Pseudorapidity substituted when a vector has no transverse momentum.
pub const ETA_MAX: f64 = 1e6;

const TWO_PI: f64 = 2.0 * PI;

/// Maps an angle into `(-pi, pi]`. In-range values are returned unchanged.
pub fn normalize_phi(phi: f64) -> f64 {
    if phi > -PI && phi <= PI {
        return phi;
    }
    let r = phi.rem_euclid(TWO_PI);
    if r > PI {
        r - TWO_PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourVector {
    pub pt: f64,
    pub eta: f64,
    pub phi: f64,
    pub mass: f64,
}

impl FourVector {
    pub fn new(pt: f64, eta: f64, phi: f64, mass: f64) -> Self {
        Self {
            pt,
            eta,
            phi: normalize_phi(phi),
            mass,
        }
    }

    /// Widens stored single-precision kinematics.
    pub fn from_f32(pt: f32, eta: f32, phi: f32, mass: f32) -> Self {
        Self::new(pt as f64, eta as f64, phi as f64, mass as f64)
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    pub fn to_cartesian(&self) -> CartesianFourVector {
        let (sin_phi, cos_phi) = self.phi.sin_cos();
        let px = self.pt * cos_phi;
        let py = self.pt * sin_phi;
        let pz = self.pt * self.eta.sinh();
        let e = (px * px + py * py + pz * pz + self.mass * self.mass).sqrt();
        CartesianFourVector { px, py, pz, e }
    }

    pub fn from_cartesian(c: CartesianFourVector) -> Self {
        c.to_pt_eta_phi_m()
    }
}

impl Add for FourVector {
    type Output = FourVector;

    fn add(self, rhs: FourVector) -> FourVector {
        (self.to_cartesian() + rhs.to_cartesian()).to_pt_eta_phi_m()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartesianFourVector {
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub e: f64,
}

impl CartesianFourVector {
    pub fn pt(&self) -> f64 {
        (self.px * self.px + self.py * self.py).sqrt()
    }

    /// Rest mass; negative mass-squared from rounding clamps to zero.
    pub fn mass(&self) -> f64 {
        let m2 = self.e * self.e - self.px * self.px - self.py * self.py - self.pz * self.pz;
        m2.max(0.0).sqrt()
    }

    pub fn to_pt_eta_phi_m(&self) -> FourVector {
        let pt = self.pt();
        let eta = if pt > 0.0 {
            (self.pz / pt).asinh()
        } else if self.pz < 0.0 {
            -ETA_MAX
        } else {
            ETA_MAX
        };
        FourVector::new(pt, eta, self.py.atan2(self.px), self.mass())
    }
}

impl Add for CartesianFourVector {
    type Output = CartesianFourVector;

    fn add(self, rhs: CartesianFourVector) -> CartesianFourVector {
        CartesianFourVector {
            px: self.px + rhs.px,
            py: self.py + rhs.py,
            pz: self.pz + rhs.pz,
            e: self.e + rhs.e,
        }
    }
}

impl AddAssign for CartesianFourVector {
    fn add_assign(&mut self, rhs: CartesianFourVector) {
        *self = *self + rhs;
    }
}

pub fn to_cartesian(v: FourVector) -> CartesianFourVector {
    v.to_cartesian()
}

pub fn from_cartesian(c: CartesianFourVector) -> FourVector {
    c.to_pt_eta_phi_m()
}

pub fn add(a: FourVector, b: FourVector) -> FourVector {
    a + b
}

/// Cartesian sum of `parts`, accumulated in input order.
pub fn sum(parts: &[FourVector]) -> CartesianFourVector {
    sum_cartesian(parts.iter().map(FourVector::to_cartesian))
}

/// Component-wise sum starting from zero, in iteration order.
pub fn sum_cartesian(parts: impl IntoIterator<Item = CartesianFourVector>) -> CartesianFourVector {
    parts
        .into_iter()
        .fold(CartesianFourVector::default(), |acc, c| acc + c)
}

/// Invariant mass of the system formed by `parts`.
pub fn invariant_mass(parts: &[FourVector]) -> Result<f64> {
    if parts.is_empty() {
        return Err(Error::EmptyParticleList);
    }
    Ok(sum(parts).mass())
}

/// Absolute azimuthal separation wrapped into `[0, pi]`.
pub fn delta_phi(phi_a: f64, phi_b: f64) -> f64 {
    // |a - b| is bit-identical to |b - a|, which keeps delta_r exactly symmetric.
    let d = (phi_a - phi_b).abs();
    ((d + PI).rem_euclid(TWO_PI) - PI).abs()
}

pub fn delta_r_angles(eta_a: f64, phi_a: f64, eta_b: f64, phi_b: f64) -> f64 {
    let deta = eta_a - eta_b;
    let dphi = delta_phi(phi_a, phi_b);
    (deta * deta + dphi * dphi).sqrt()
}

pub fn delta_r(a: &FourVector, b: &FourVector) -> f64 {
    delta_r_angles(a.eta, a.phi, b.eta, b.phi)
}

pub fn transverse_mass(pt1: f64, phi1: f64, pt2: f64, phi2: f64) -> f64 {
    let cos_dphi = (phi1 - phi2).abs().cos();
    (2.0 * (pt1 * pt2) * (1.0 - cos_dphi)).max(0.0).sqrt()
}
