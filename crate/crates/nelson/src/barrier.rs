//! Barrier and incident-packet parameter types.

use num_complex::Complex64;

use crate::error::{NelsonError, Result};

/// Rectangular barrier on [0, d] with complex height `v0 - i u0`.
/// `u0 > 0` removes probability (absorptive medium); `u0 = 0` is a plain
/// real barrier.
#[derive(Debug, Clone, Copy)]
pub struct BarrierSpec {
    pub v0: f64,
    pub u0: f64,
    pub d: f64,
    pub m: f64,
    pub hbar: f64,
}

impl BarrierSpec {
    pub fn new(v0: f64, u0: f64, d: f64) -> Self {
        BarrierSpec {
            v0,
            u0,
            d,
            m: 1.0,
            hbar: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v0 >= 0.0) {
            return Err(NelsonError::InvalidSpec {
                field: "barrier.v0",
                message: format!("barrier height must be >= 0, got {}", self.v0),
            });
        }
        if !(self.u0 >= 0.0) {
            return Err(NelsonError::InvalidSpec {
                field: "barrier.u0",
                message: format!("absorption strength must be >= 0, got {}", self.u0),
            });
        }
        if !(self.d > 0.0) {
            return Err(NelsonError::InvalidSpec {
                field: "barrier.d",
                message: format!("barrier width must be > 0, got {}", self.d),
            });
        }
        if !(self.m > 0.0) || !(self.hbar > 0.0) {
            return Err(NelsonError::InvalidSpec {
                field: "barrier.units",
                message: format!("m and hbar must be > 0, got m = {}, hbar = {}", self.m, self.hbar),
            });
        }
        Ok(())
    }

    /// Interior decay constant kappa = sqrt(2m(v0 - i u0 - E)) / hbar,
    /// written kappa_r - i kappa_i with kappa_r >= 0.
    ///
    /// For u0 = 0 the argument is real and the two branches are taken
    /// explicitly: under the barrier (E < v0) kappa is positive real, above
    /// it (E > v0) kappa = -i |kappa| so that the interior wave exp(-kappa x)
    /// = exp(i |kappa| x) travels rightward. For u0 > 0 the argument has a
    /// strictly negative imaginary part, so the principal square root already
    /// lands in the fourth quadrant (kappa_r > 0, kappa_i > 0); no branch
    /// adjustment is needed.
    pub fn kappa(&self, e: f64) -> Complex64 {
        let scale = 2.0 * self.m / (self.hbar * self.hbar);
        let re = scale * (self.v0 - e);
        if self.u0 == 0.0 {
            if re >= 0.0 {
                Complex64::new(re.sqrt(), 0.0)
            } else {
                Complex64::new(0.0, -(-re).sqrt())
            }
        } else {
            let z = Complex64::new(re, -scale * self.u0);
            z.sqrt()
        }
    }

    /// Real decay constant of the matched real barrier at energy `e0`,
    /// defined only under the barrier (e0 < v0). Used for thick-barrier
    /// reference speeds.
    pub fn kappa_bar(&self, e0: f64) -> Option<f64> {
        let re = 2.0 * self.m * (self.v0 - e0) / (self.hbar * self.hbar);
        if re > 0.0 {
            Some(re.sqrt())
        } else {
            None
        }
    }

    /// Classical crossing-speed estimate used as the thick-barrier reference:
    /// c = (hbar kappa_bar / m) (1 + kappa_i0 / kappa_r0) where
    /// kappa_r0 - i kappa_i0 = kappa(e0). Returns None above the real barrier.
    pub fn crossing_speed(&self, e0: f64) -> Option<f64> {
        let kb = self.kappa_bar(e0)?;
        let k = self.kappa(e0);
        let (kr, ki) = (k.re, -k.im);
        if kr <= 0.0 {
            return None;
        }
        Some(self.hbar * kb / self.m * (1.0 + ki / kr))
    }

    /// Reference traversal time d / c for the thick-barrier crossing speed.
    pub fn crossing_time(&self, e0: f64) -> Option<f64> {
        self.crossing_speed(e0).map(|c| self.d / c)
    }
}

/// Gaussian momentum-space packet: amplitude proportional to
/// exp(-(k0 - k)^2 / (4 sigma^2)), centered at `x_center0` when the
/// stationary phases align at t = t_ref (see `WaveField`).
#[derive(Debug, Clone, Copy)]
pub struct PacketSpec {
    pub k0: f64,
    pub sigma: f64,
    pub x_center0: f64,
    /// Normalization constant multiplying the Gaussian envelope. The default
    /// (2 pi)^(-3/4) sigma^(-1/2) makes the position-space packet unit-norm
    /// in the free case.
    pub norm_c: f64,
}

impl PacketSpec {
    pub fn new(k0: f64, sigma: f64, x_center0: f64) -> Self {
        let norm_c = (2.0 * std::f64::consts::PI).powf(-0.75) / sigma.sqrt();
        PacketSpec {
            k0,
            sigma,
            x_center0,
            norm_c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k0 > 0.0) {
            return Err(NelsonError::InvalidSpec {
                field: "packet.k0",
                message: format!("central momentum must be > 0, got {}", self.k0),
            });
        }
        if !(self.sigma > 0.0) {
            return Err(NelsonError::InvalidSpec {
                field: "packet.sigma",
                message: format!("momentum spread must be > 0, got {}", self.sigma),
            });
        }
        if self.sigma >= self.k0 / 3.0 {
            return Err(NelsonError::InvalidSpec {
                field: "packet.sigma",
                message: format!(
                    "spread {} too wide for k0 = {}; need sigma < k0 / 3 so the window stays off k = 0",
                    self.sigma, self.k0
                ),
            });
        }
        if !(self.x_center0 < 0.0) {
            return Err(NelsonError::InvalidSpec {
                field: "packet.x_center0",
                message: format!("initial packet center must sit left of the barrier, got {}", self.x_center0),
            });
        }
        // Spatial width is 1/(2 sigma); require the center at least a bit
        // more than one width from the barrier face so the initial state is
        // genuinely incident.
        let width = 1.0 / (2.0 * self.sigma);
        if self.x_center0 > -1.2 * width {
            return Err(NelsonError::InvalidSpec {
                field: "packet.x_center0",
                message: format!(
                    "center {} closer to the barrier than 1.2 spatial widths ({:.3})",
                    self.x_center0,
                    1.2 * width
                ),
            });
        }
        Ok(())
    }

    /// Momentum amplitude A(k), real and positive.
    pub fn amplitude(&self, k: f64) -> f64 {
        let dk = self.k0 - k;
        self.norm_c * (-dk * dk / (4.0 * self.sigma * self.sigma)).exp()
    }

    /// Central energy hbar^2 k0^2 / (2 m).
    pub fn central_energy(&self, m: f64, hbar: f64) -> f64 {
        hbar * hbar * self.k0 * self.k0 / (2.0 * m)
    }

    /// Time at which a free packet launched from `x_center0` reaches x = 0:
    /// the natural start time t_ref = m x_center0 / (hbar k0) < 0 when runs
    /// are clocked so the packet center meets the barrier face at t = 0.
    pub fn reference_start(&self, m: f64, hbar: f64) -> f64 {
        self.m_over_hbar_k0(m, hbar) * self.x_center0
    }

    fn m_over_hbar_k0(&self, m: f64, hbar: f64) -> f64 {
        m / (hbar * self.k0)
    }
}
