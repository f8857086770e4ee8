//! Time-dependent wave function built from stationary scattering states.
//!
//! The field is the superposition
//!
//! ```text
//!   psi(x, t) = sum_j w_j A(k_j) phi_{k_j}(x) exp(-i E_j t / hbar)
//! ```
//!
//! over quadrature nodes k_j, where phi_k is the stationary solution from
//! `scattering`. Evaluation returns both psi and its spatial derivative;
//! the derivative is assembled from the per-region analytic forms, never
//! from finite differences, because drift fields divide by psi and lose
//! half the significant digits near nodes.

use num_complex::Complex64;

use crate::barrier::{BarrierSpec, PacketSpec};
use crate::error::Result;
use crate::quadrature::{QuadNodes, QuadratureSpec};
use crate::scattering::{stationary_coefficients, ScatteringState};

pub struct WaveField {
    pub barrier: BarrierSpec,
    pub packet: PacketSpec,
    nodes: QuadNodes,
    states: Vec<ScatteringState>,
    /// w_j A(k_j), the real weight of node j in the superposition.
    coeffs: Vec<f64>,
    energies: Vec<f64>,
}

impl WaveField {
    pub fn new(barrier: BarrierSpec, packet: PacketSpec, quad: QuadratureSpec) -> Result<Self> {
        barrier.validate()?;
        packet.validate()?;
        let nodes = quad.nodes()?;
        let mut states = Vec::with_capacity(nodes.len());
        let mut coeffs = Vec::with_capacity(nodes.len());
        let mut energies = Vec::with_capacity(nodes.len());
        for (&k, &w) in nodes.k.iter().zip(&nodes.w) {
            let s = stationary_coefficients(&barrier, k)?;
            energies.push(s.e);
            states.push(s);
            coeffs.push(w * packet.amplitude(k));
        }
        Ok(WaveField {
            barrier,
            packet,
            nodes,
            states,
            coeffs,
            energies,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn hbar_over_m(&self) -> f64 {
        self.barrier.hbar / self.barrier.m
    }

    /// Natural start time: the free packet center sits at `x_center0`.
    pub fn reference_start(&self) -> f64 {
        self.packet.reference_start(self.barrier.m, self.barrier.hbar)
    }

    /// Multiply the superposition by a real factor (used to unit-normalize
    /// the realized field on a grid at the start time).
    pub fn rescale(&mut self, factor: f64) {
        for c in &mut self.coeffs {
            *c *= factor;
        }
    }

    /// Freeze the time-dependent phases at `t` and precombine coefficients
    /// per region so evaluation is a single pass over the nodes.
    pub fn slice(&self, t: f64) -> FieldSlice<'_> {
        let n = self.nodes.len();
        let mut inc = Vec::with_capacity(n);
        let mut refl = Vec::with_capacity(n);
        let mut grow = Vec::with_capacity(n);
        let mut decay = Vec::with_capacity(n);
        let mut trans = Vec::with_capacity(n);
        let hbar = self.barrier.hbar;
        for j in 0..n {
            let phase = Complex64::from_polar(self.coeffs[j], -self.energies[j] * t / hbar);
            let s = &self.states[j];
            inc.push(phase);
            refl.push(phase * s.r);
            grow.push(phase * s.c);
            decay.push(phase * s.d_coef);
            trans.push(phase * s.t);
        }
        FieldSlice {
            field: self,
            t,
            inc,
            refl,
            grow,
            decay,
            trans,
        }
    }

    /// Integral of |psi|^2 over [lo, hi] by the trapezoid rule on n cells.
    pub fn mass_on_grid(&self, t: f64, lo: f64, hi: f64, n: usize) -> f64 {
        self.slice(t).mass_on_grid(lo, hi, n)
    }

    /// Per-node transmitted weight w_j |A_j|^2 |t_j|^2. Once the packet
    /// has dispersed, 2 pi times the sum of these equals the transmitted
    /// mass: the cross terms between nodes dephase and the spatial
    /// integral goes incoherent.
    pub fn node_transmissions(&self) -> Vec<f64> {
        self.nodes
            .k
            .iter()
            .zip(&self.nodes.w)
            .zip(&self.states)
            .map(|((&k, &w), s)| {
                let a = self.packet.amplitude(k);
                w * a * a * s.transmission_probability()
            })
            .collect()
    }
}

/// The field at a fixed time: rebuilt once per time step and shared
/// read-only across walker threads.
pub struct FieldSlice<'f> {
    pub field: &'f WaveField,
    pub t: f64,
    inc: Vec<Complex64>,
    refl: Vec<Complex64>,
    grow: Vec<Complex64>,
    decay: Vec<Complex64>,
    trans: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy)]
pub struct PsiEval {
    pub psi: Complex64,
    pub dpsi: Complex64,
}

impl PsiEval {
    pub fn density(&self) -> f64 {
        self.psi.norm_sqr()
    }
}

impl FieldSlice<'_> {
    pub fn eval(&self, x: f64) -> PsiEval {
        let d = self.field.barrier.d;
        if x < 0.0 {
            self.eval_left(x)
        } else if x <= d {
            self.eval_inside(x)
        } else {
            self.eval_right(x)
        }
    }

    /// x < 0: sum of incident and reflected plane waves. With equally
    /// spaced nodes the phasors exp(i k_j x) form a geometric sequence, so
    /// one complex exponential pair serves the whole sum; exp(-i k_j x) is
    /// its conjugate because k and x are real.
    fn eval_left(&self, x: f64) -> PsiEval {
        let ks = &self.field.nodes.k;
        let mut psi = Complex64::new(0.0, 0.0);
        let mut slope = Complex64::new(0.0, 0.0);
        match self.field.nodes.spacing {
            Some(dk) => {
                let step = Complex64::from_polar(1.0, dk * x);
                let mut ph = Complex64::from_polar(1.0, ks[0] * x);
                for j in 0..ks.len() {
                    let fwd = self.inc[j] * ph;
                    let bwd = self.refl[j] * ph.conj();
                    psi += fwd + bwd;
                    slope += Complex64::new(0.0, ks[j]) * (fwd - bwd);
                    ph *= step;
                }
            }
            None => {
                for j in 0..ks.len() {
                    let ph = Complex64::from_polar(1.0, ks[j] * x);
                    let fwd = self.inc[j] * ph;
                    let bwd = self.refl[j] * ph.conj();
                    psi += fwd + bwd;
                    slope += Complex64::new(0.0, ks[j]) * (fwd - bwd);
                }
            }
        }
        PsiEval { psi, dpsi: slope }
    }

    /// 0 <= x <= d: growing and decaying interior exponentials. kappa_j
    /// varies nonlinearly with k_j, so each node pays one complex exp; the
    /// decaying phasor is the reciprocal of the growing one.
    fn eval_inside(&self, x: f64) -> PsiEval {
        let mut psi = Complex64::new(0.0, 0.0);
        let mut slope = Complex64::new(0.0, 0.0);
        for j in 0..self.grow.len() {
            let kappa = self.field.states[j].kappa;
            let up = (kappa * x).exp();
            let g = self.grow[j] * up;
            let dcy = self.decay[j] * up.inv();
            psi += g + dcy;
            slope += kappa * (g - dcy);
        }
        PsiEval { psi, dpsi: slope }
    }

    /// x > d: transmitted plane waves; same phasor recurrence as the left
    /// region.
    fn eval_right(&self, x: f64) -> PsiEval {
        let ks = &self.field.nodes.k;
        let mut psi = Complex64::new(0.0, 0.0);
        let mut slope = Complex64::new(0.0, 0.0);
        match self.field.nodes.spacing {
            Some(dk) => {
                let step = Complex64::from_polar(1.0, dk * x);
                let mut ph = Complex64::from_polar(1.0, ks[0] * x);
                for j in 0..ks.len() {
                    let fwd = self.trans[j] * ph;
                    psi += fwd;
                    slope += Complex64::new(0.0, ks[j]) * fwd;
                    ph *= step;
                }
            }
            None => {
                for j in 0..ks.len() {
                    let ph = Complex64::from_polar(1.0, ks[j] * x);
                    let fwd = self.trans[j] * ph;
                    psi += fwd;
                    slope += Complex64::new(0.0, ks[j]) * fwd;
                }
            }
        }
        PsiEval { psi, dpsi: slope }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.eval(x).density()
    }

    pub fn mass_on_grid(&self, lo: f64, hi: f64, n: usize) -> f64 {
        assert!(n >= 2 && hi > lo);
        let h = (hi - lo) / n as f64;
        let mut acc = 0.5 * (self.density(lo) + self.density(hi));
        for i in 1..n {
            acc += self.density(lo + i as f64 * h);
        }
        acc * h
    }

    /// Largest density over an n-point scan of [lo, hi]; the run loop uses
    /// this to refresh its node-region floor.
    pub fn max_density_on_grid(&self, lo: f64, hi: f64, n: usize) -> f64 {
        assert!(n >= 2 && hi > lo);
        let h = (hi - lo) / (n - 1) as f64;
        (0..n)
            .map(|i| self.density(lo + i as f64 * h))
            .fold(0.0, f64::max)
    }
}

/// Forward and backward drift speeds from a field evaluation:
/// b = (hbar/m) (Im + Re) of psi'/psi, b* = (hbar/m) (Im - Re).
/// The caller must have rejected near-node densities first; at a true node
/// the quotient is undefined.
pub fn drift_pair(eval: &PsiEval, hbar_over_m: f64) -> (f64, f64) {
    let g = eval.dpsi / eval.psi;
    (hbar_over_m * (g.im + g.re), hbar_over_m * (g.im - g.re))
}

/// Closed-form free-space packet (no barrier): the Gaussian superposition
/// integral done exactly over the whole k line. Truncation to the 12-sigma
/// window changes it below rounding, so this doubles as an end-to-end
/// oracle for the quadrature + superposition pipeline.
pub fn free_packet(packet: &PacketSpec, m: f64, hbar: f64, x: f64, t: f64) -> Complex64 {
    let s2 = packet.sigma * packet.sigma;
    let a = Complex64::new(1.0 / (4.0 * s2), hbar * t / (2.0 * m));
    let b = Complex64::new(packet.k0 / (2.0 * s2), x);
    let pref = (Complex64::new(std::f64::consts::PI, 0.0) / a).sqrt();
    packet.norm_c * pref * (b * b / (4.0 * a) - packet.k0 * packet.k0 / (4.0 * s2)).exp()
}
