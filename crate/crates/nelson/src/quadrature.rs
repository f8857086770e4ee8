//! Momentum-space quadrature rules for wave-packet superposition integrals.

use crate::error::{NelsonError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadRule {
    GaussLegendre,
    /// Equally spaced nodes; enables an exponential-recurrence fast path in
    /// plane-wave sums and converges superalgebraically for integrands whose
    /// envelope decays to rounding level at the window edges.
    Midpoint,
}

/// Quadrature window and rule for integrals over the packet's k support.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub rule: QuadRule,
    pub n_nodes: usize,
    pub k_lo: f64,
    pub k_hi: f64,
}

/// Width of the default window in units of the packet momentum spread.
/// At 12 sigma the Gaussian amplitude is below 1e-15, so truncation is
/// invisible at double precision.
pub const DEFAULT_WINDOW_SIGMAS: f64 = 12.0;
pub const DEFAULT_N_NODES: usize = 257;
pub const MIN_N_NODES: usize = 64;

impl QuadratureSpec {
    /// Default window for a packet centered at `k0` with spread `sigma`:
    /// `k0 +- 12 sigma`, clamped away from k = 0.
    pub fn packet_window(k0: f64, sigma: f64, rule: QuadRule, n_nodes: usize) -> Self {
        let lo = (k0 - DEFAULT_WINDOW_SIGMAS * sigma).max(1e-9 * k0);
        let hi = k0 + DEFAULT_WINDOW_SIGMAS * sigma;
        QuadratureSpec {
            rule,
            n_nodes,
            k_lo: lo,
            k_hi: hi,
        }
    }

    pub fn default_for_packet(k0: f64, sigma: f64) -> Self {
        Self::packet_window(k0, sigma, QuadRule::GaussLegendre, DEFAULT_N_NODES)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < MIN_N_NODES {
            return Err(NelsonError::InvalidSpec {
                field: "quad.n_nodes",
                message: format!("{} nodes; at least {} required", self.n_nodes, MIN_N_NODES),
            });
        }
        if !(self.k_lo > 0.0) || !(self.k_hi > self.k_lo) {
            return Err(NelsonError::InvalidSpec {
                field: "quad.window",
                message: format!("need 0 < k_lo < k_hi, got [{}, {}]", self.k_lo, self.k_hi),
            });
        }
        Ok(())
    }

    pub fn nodes(&self) -> Result<QuadNodes> {
        self.validate()?;
        match self.rule {
            QuadRule::GaussLegendre => {
                let (xs, ws) = gauss_legendre(self.n_nodes);
                let half = 0.5 * (self.k_hi - self.k_lo);
                let mid = 0.5 * (self.k_hi + self.k_lo);
                let k: Vec<f64> = xs.iter().map(|x| mid + half * x).collect();
                let w: Vec<f64> = ws.iter().map(|w| half * w).collect();
                Ok(QuadNodes {
                    k,
                    w,
                    spacing: None,
                })
            }
            QuadRule::Midpoint => {
                let n = self.n_nodes;
                let dk = (self.k_hi - self.k_lo) / n as f64;
                let k: Vec<f64> = (0..n)
                    .map(|j| self.k_lo + (j as f64 + 0.5) * dk)
                    .collect();
                let w = vec![dk; n];
                Ok(QuadNodes {
                    k,
                    w,
                    spacing: Some(dk),
                })
            }
        }
    }
}

/// Realized nodes and weights. `spacing` is set only for equally spaced rules.
#[derive(Debug, Clone)]
pub struct QuadNodes {
    pub k: Vec<f64>,
    pub w: Vec<f64>,
    pub spacing: Option<f64>,
}

impl QuadNodes {
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.k
            .iter()
            .zip(&self.w)
            .map(|(&k, &w)| w * f(k))
            .sum()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
/// Nodes converge to ~1e-15; exactness through degree 2n-1 is tested below.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "need at least two nodes");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th root (descending order).
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(z) and derivative.
            let mut p0 = 1.0;
            let mut p1 = z;
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            pp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let weight = 2.0 / ((1.0 - z * z) * pp * pp);
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}
