use thiserror::Error;

/// Failure modes of field construction, path integration, and grid evolution.
#[derive(Debug, Clone, Error)]
pub enum NelsonError {
    #[error("invalid specification: {field}: {message}")]
    InvalidSpec {
        field: &'static str,
        message: String,
    },

    /// The scattering denominator 2*k*kappa*cosh + i(kappa^2-k^2)*sinh underflowed.
    #[error("degenerate scattering denominator at k = {k}")]
    DegenerateDenominator { k: f64 },

    /// Drift requested where the density is at or below the node floor.
    #[error("density {density:.3e} at x = {x:.6}, t = {t:.6} is below floor {floor:.3e}")]
    NodeRegion { x: f64, t: f64, density: f64, floor: f64 },

    /// Deterministic displacement exceeds the noise scale; dt is too coarse here.
    #[error("walker {walker}: |b*dt| = {displacement:.3e} exceeds {limit:.3e} at t = {t:.6}")]
    StepTooLarge {
        walker: usize,
        t: f64,
        displacement: f64,
        limit: f64,
    },

    /// A single-step jump probability exceeded the clamp.
    #[error("walker {walker}: jump probability {prob:.3e} exceeds clamp {clamp} at t = {t:.6}")]
    ClampExceeded {
        walker: usize,
        t: f64,
        prob: f64,
        clamp: f64,
    },

    /// Inverse-CDF sampling found a cell carrying too much probability mass.
    #[error("sampling grid too coarse: one cell carries mass {cell_mass:.3e}")]
    GridTooCoarse { cell_mass: f64 },

    #[error("grid specs differ; densities are not comparable")]
    GridMismatch,

    #[error("no walkers satisfy the requested condition")]
    EmptyEnsemble,

    /// More than the tolerated fraction of backward paths never crossed x = 0.
    #[error("fraction {fraction:.4} of paths failed to cross within the window (budget 0.10)")]
    NoCrossingBudget { fraction: f64 },

    /// More than the tolerated fraction of steps fell back to pure diffusion.
    #[error("guard fallback on fraction {fraction:.5} of steps (budget {budget:.5})")]
    GuardBudget { fraction: f64, budget: f64 },

    #[error("transmitted mass never plateaued inside the scan window [{t_lo}, {t_hi}]")]
    PlateauNotFound { t_lo: f64, t_hi: f64 },

    /// Grid evolution stability bound violated.
    #[error("dt = {dt:.3e} violates stability limit {limit:.3e} ({which})")]
    CflViolation {
        dt: f64,
        limit: f64,
        which: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, NelsonError>;
