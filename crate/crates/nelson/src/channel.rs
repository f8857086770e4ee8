//! Two coupled channels scattering off a shared rectangular barrier.
//!
//! Inside the barrier the potential matrix is [[v0, g], [g, v0]] with a
//! real coupling g. The symmetric and antisymmetric combinations
//! psi_pm = (psi_1 +- psi_2) / sqrt(2) then see decoupled real barriers of
//! height v0 +- g, so the field is carried as two independent `WaveField`s
//! and the channel amplitudes are linear combinations of them. The packet
//! enters entirely in channel 1, which makes both combinations equal to
//! the incident packet over sqrt(2); carrying the plain packet in both and
//! averaging keeps channel 1 unit-normalized.
//!
//! A walker's label jumps between channels with a rate built from the
//! off-diagonal matrix element; the rate is signed, and a forward step
//! uses only its positive part while a backward step uses only the
//! negative part, matching the continuity equation term by term.

use num_complex::Complex64;

use crate::barrier::{BarrierSpec, PacketSpec};
use crate::error::{NelsonError, Result};
use crate::quadrature::QuadratureSpec;
use crate::wavefield::{FieldSlice, PsiEval, WaveField};

#[derive(Debug, Clone, Copy)]
pub struct ChannelSpec {
    pub v0: f64,
    /// Off-diagonal coupling strength g, 0 <= g <= v0.
    pub coupling: f64,
    pub d: f64,
    pub m: f64,
    pub hbar: f64,
}

impl ChannelSpec {
    pub fn new(v0: f64, coupling: f64, d: f64) -> Self {
        ChannelSpec {
            v0,
            coupling,
            d,
            m: 1.0,
            hbar: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coupling >= 0.0) {
            return Err(NelsonError::InvalidSpec {
                field: "channel.coupling",
                message: format!("coupling must be >= 0, got {}", self.coupling),
            });
        }
        if self.coupling > self.v0 {
            return Err(NelsonError::InvalidSpec {
                field: "channel.coupling",
                message: format!(
                    "coupling {} exceeds barrier height {}; the antisymmetric channel would see an attractive well, which the stationary solver does not cover",
                    self.coupling, self.v0
                ),
            });
        }
        self.barrier_plus().validate()?;
        self.barrier_minus().validate()
    }

    pub fn barrier_plus(&self) -> BarrierSpec {
        BarrierSpec {
            v0: self.v0 + self.coupling,
            u0: 0.0,
            d: self.d,
            m: self.m,
            hbar: self.hbar,
        }
    }

    pub fn barrier_minus(&self) -> BarrierSpec {
        BarrierSpec {
            v0: self.v0 - self.coupling,
            u0: 0.0,
            d: self.d,
            m: self.m,
            hbar: self.hbar,
        }
    }
}

pub struct ChannelField {
    pub spec: ChannelSpec,
    pub packet: PacketSpec,
    plus: WaveField,
    minus: WaveField,
}

impl ChannelField {
    pub fn new(spec: ChannelSpec, packet: PacketSpec, quad: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let plus = WaveField::new(spec.barrier_plus(), packet, quad)?;
        let minus = WaveField::new(spec.barrier_minus(), packet, quad)?;
        Ok(ChannelField {
            spec,
            packet,
            plus,
            minus,
        })
    }

    pub fn hbar_over_m(&self) -> f64 {
        self.spec.hbar / self.spec.m
    }

    pub fn reference_start(&self) -> f64 {
        self.packet.reference_start(self.spec.m, self.spec.hbar)
    }

    pub fn slice(&self, t: f64) -> ChannelSlice<'_> {
        ChannelSlice {
            spec: self.spec,
            plus: self.plus.slice(t),
            minus: self.minus.slice(t),
        }
    }

    /// Grid mass of P_1 + P_2, conserved because both combination fields
    /// scatter off real barriers.
    pub fn total_mass_on_grid(&self, t: f64, lo: f64, hi: f64, n: usize) -> f64 {
        let s = self.slice(t);
        assert!(n >= 2 && hi > lo);
        let h = (hi - lo) / n as f64;
        let f = |x: f64| {
            let e = s.eval(x);
            e.density(1) + e.density(2)
        };
        let mut acc = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            acc += f(lo + i as f64 * h);
        }
        acc * h
    }
}

pub struct ChannelSlice<'f> {
    spec: ChannelSpec,
    plus: FieldSlice<'f>,
    minus: FieldSlice<'f>,
}

/// Both channel amplitudes and derivatives at one point, plus the data
/// needed for jump rates.
#[derive(Debug, Clone, Copy)]
pub struct ChannelEval {
    pub psi1: Complex64,
    pub dpsi1: Complex64,
    pub psi2: Complex64,
    pub dpsi2: Complex64,
    /// 2 g Im(psi_1^* psi_2) / hbar inside the barrier, zero outside; the
    /// signed building block of both transition rates.
    coupling_term: f64,
}

impl ChannelSlice<'_> {
    pub fn t(&self) -> f64 {
        self.plus.t
    }

    pub fn eval(&self, x: f64) -> ChannelEval {
        let p = self.plus.eval(x);
        let m = self.minus.eval(x);
        let psi1 = 0.5 * (p.psi + m.psi);
        let psi2 = 0.5 * (p.psi - m.psi);
        let coupling_term = if x >= 0.0 && x <= self.spec.d {
            2.0 * self.spec.coupling / self.spec.hbar * (psi1.conj() * psi2).im
        } else {
            0.0
        };
        ChannelEval {
            psi1,
            dpsi1: 0.5 * (p.dpsi + m.dpsi),
            psi2,
            dpsi2: 0.5 * (p.dpsi - m.dpsi),
            coupling_term,
        }
    }

    /// Largest of the two channel densities over a grid scan, for floor
    /// refreshes in run loops.
    pub fn max_density_on_grid(&self, lo: f64, hi: f64, n: usize) -> (f64, f64) {
        assert!(n >= 2 && hi > lo);
        let h = (hi - lo) / (n - 1) as f64;
        let mut m1 = 0.0f64;
        let mut m2 = 0.0f64;
        for i in 0..n {
            let e = self.eval(lo + i as f64 * h);
            m1 = m1.max(e.density(1));
            m2 = m2.max(e.density(2));
        }
        (m1, m2)
    }
}

impl ChannelEval {
    pub fn amplitude(&self, channel: u8) -> PsiEval {
        match channel {
            1 => PsiEval {
                psi: self.psi1,
                dpsi: self.dpsi1,
            },
            2 => PsiEval {
                psi: self.psi2,
                dpsi: self.dpsi2,
            },
            _ => panic!("channel index must be 1 or 2"),
        }
    }

    pub fn density(&self, channel: u8) -> f64 {
        self.amplitude(channel).density()
    }

    /// Signed transition rate out of `channel` into the other one:
    /// W_(1->2) = -2 g Im(psi_1^* psi_2) / (hbar |psi_1|^2), and the same
    /// expression with labels swapped. The two satisfy
    /// W_(1->2) P_1 = -W_(2->1) P_2 identically.
    pub fn signed_rate(&self, channel: u8) -> f64 {
        match channel {
            1 => -self.coupling_term / self.psi1.norm_sqr(),
            2 => self.coupling_term / self.psi2.norm_sqr(),
            _ => panic!("channel index must be 1 or 2"),
        }
    }

    /// Positive part of the signed rate: the jump probability per unit time
    /// for a forward step.
    pub fn forward_rate(&self, channel: u8) -> f64 {
        self.signed_rate(channel).max(0.0)
    }

    /// Negative part, flipped: the jump probability per unit time for a
    /// backward step.
    pub fn backward_rate(&self, channel: u8) -> f64 {
        (-self.signed_rate(channel)).max(0.0)
    }
}
