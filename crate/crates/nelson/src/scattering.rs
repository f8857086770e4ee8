//! Stationary scattering solution for a rectangular complex barrier.
//!
//! For incident momentum k the stationary wave is
//!
//! ```text
//!   x <= 0:      exp(ikx) + r exp(-ikx)
//!   0 <= x <= d: c exp(kappa x) + d exp(-kappa x)
//!   x >= d:      t exp(ikx)
//! ```
//!
//! with kappa = sqrt(2m(v0 - i u0 - E)) / hbar. Matching value and slope at
//! both faces gives closed forms; the unit tests check them against a direct
//! linear solve of the matching system.

use num_complex::Complex64;

use crate::barrier::BarrierSpec;
use crate::error::{NelsonError, Result};

#[derive(Debug, Clone, Copy)]
pub struct ScatteringState {
    pub k: f64,
    pub e: f64,
    pub kappa: Complex64,
    pub r: Complex64,
    pub t: Complex64,
    /// Coefficient of the growing interior exponential exp(kappa x).
    pub c: Complex64,
    /// Coefficient of the decaying interior exponential exp(-kappa x).
    pub d_coef: Complex64,
}

impl ScatteringState {
    pub fn reflection_probability(&self) -> f64 {
        self.r.norm_sqr()
    }

    pub fn transmission_probability(&self) -> f64 {
        self.t.norm_sqr()
    }

    /// Probability removed by the absorptive part, 1 - |r|^2 - |t|^2.
    /// Zero (to rounding) for a real barrier.
    pub fn absorbed_probability(&self) -> f64 {
        1.0 - self.r.norm_sqr() - self.t.norm_sqr()
    }
}

/// Solve the matching problem at momentum `k > 0`.
pub fn stationary_coefficients(barrier: &BarrierSpec, k: f64) -> Result<ScatteringState> {
    barrier.validate()?;
    if !(k > 0.0) {
        return Err(NelsonError::InvalidSpec {
            field: "scattering.k",
            message: format!("incident momentum must be > 0, got {k}"),
        });
    }
    let e = barrier.hbar * barrier.hbar * k * k / (2.0 * barrier.m);
    let kappa = barrier.kappa(e);
    // kappa -> 0 (E = v0 on a real barrier) collapses the interior basis;
    // the limit is finite but the formulas below hit 0/0. Callers scan
    // energies on grids that avoid the exact top of the barrier.
    if kappa.norm() < 1e-10 * k {
        return Err(NelsonError::DegenerateDenominator { k });
    }
    let ik = Complex64::new(0.0, k);
    let kd = kappa * barrier.d;
    let (sh, ch) = sinh_cosh(kd);
    let k2 = Complex64::new(k * k, 0.0);
    let kap2 = kappa * kappa;
    let denom = 2.0 * k * kappa * ch + Complex64::i() * (kap2 - k2) * sh;
    if denom.norm() < 1e-12 * (2.0 * k * kappa.norm()).max(k * k) {
        return Err(NelsonError::DegenerateDenominator { k });
    }
    let b = denom.inv();
    let r = -Complex64::i() * (kap2 + k2) * sh * b;
    let t = 2.0 * k * kappa * (-ik * barrier.d).exp() * b;
    let c = k * (kappa + ik) * (-kd).exp() * b;
    let d_coef = k * (kappa - ik) * kd.exp() * b;
    Ok(ScatteringState {
        k,
        e,
        kappa,
        r,
        t,
        c,
        d_coef,
    })
}

fn sinh_cosh(z: Complex64) -> (Complex64, Complex64) {
    let ep = z.exp();
    let em = (-z).exp();
    (0.5 * (ep - em), 0.5 * (ep + em))
}
