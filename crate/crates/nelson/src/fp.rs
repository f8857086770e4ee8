//! Independent density evolution for cross-checking walker ensembles.
//!
//! The walker law `dx = v dt + dw`, with label loss at a space-dependent
//! rate, has the density equation
//!
//! ```text
//!   dP/dt = -(v P)' + D P'' + r P
//! ```
//!
//! integrated here with a conservative upwind advection flux, explicit
//! centered diffusion, and an exact pointwise exponential for the source.
//! Nothing is shared with the stochastic stepper beyond the drift values
//! the caller tabulates, so agreement between the two is evidence, not
//! tautology.

use crate::analysis::{GridDensity, GridSpec};
use crate::barrier::BarrierSpec;
use crate::dynamics::{Direction, Label, System, SystemSlice};
use crate::error::{NelsonError, Result};

/// One explicit step. `velocity` holds cells+1 interface values (index i
/// sits at the left edge of cell i); `rate` holds per-cell growth rates
/// (negative for a sink). Boundaries absorb: density outside the grid is
/// zero and outflow is lost.
pub fn fp_step(
    state: &mut GridDensity,
    velocity: &[f64],
    rate: &[f64],
    diff: f64,
    dt: f64,
) -> Result<()> {
    let cells = state.grid.cells;
    if velocity.len() != cells + 1 || rate.len() != cells {
        return Err(NelsonError::GridMismatch);
    }
    let h = state.grid.cell_width();
    let diff_limit = 0.4 * h * h / (2.0 * diff).max(1e-300);
    if dt > diff_limit {
        return Err(NelsonError::CflViolation {
            dt,
            limit: diff_limit,
            which: "diffusion",
        });
    }
    let vmax = velocity.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if vmax > 0.0 {
        let adv_limit = 0.5 * h / vmax;
        if dt > adv_limit {
            return Err(NelsonError::CflViolation {
                dt,
                limit: adv_limit,
                which: "advection",
            });
        }
    }
    let p = &state.values;
    // Upwind interface fluxes; ghost cells are empty.
    let mut flux = vec![0.0; cells + 1];
    for i in 0..=cells {
        let v = velocity[i];
        let upwind = if v >= 0.0 {
            if i == 0 {
                0.0
            } else {
                p[i - 1]
            }
        } else if i == cells {
            0.0
        } else {
            p[i]
        };
        flux[i] = v * upwind;
    }
    let mut next = vec![0.0; cells];
    let dcoef = diff * dt / (h * h);
    for i in 0..cells {
        let left = if i == 0 { 0.0 } else { p[i - 1] };
        let right = if i + 1 == cells { 0.0 } else { p[i + 1] };
        let advected = p[i] - dt / h * (flux[i + 1] - flux[i]);
        let diffused = advected + dcoef * (right - 2.0 * p[i] + left);
        next[i] = diffused * (rate[i] * dt).exp();
        if next[i] < 0.0 {
            next[i] = 0.0;
        }
    }
    state.values = next;
    Ok(())
}

/// Interface drift speeds read off a field slice: the forward drift b or,
/// for backward evolution, -b*. Where the local density sits at or below
/// `floor` the drift is zeroed, and speeds are clamped to `cap`; both
/// guards fire only next to interference nodes, where the density, and so
/// the transported mass, is negligible. The stochastic stepper limits its
/// displacement at the same points.
pub fn tabulate_velocity(
    slice: &SystemSlice<'_>,
    label: Label,
    dir: Direction,
    grid: &GridSpec,
    floor: f64,
    cap: f64,
) -> Vec<f64> {
    let h = grid.cell_width();
    (0..=grid.cells)
        .map(|i| {
            let x = grid.lo + i as f64 * h;
            let ev = slice.eval(x);
            if ev.density(label) <= floor {
                return 0.0;
            }
            let (b, bstar) = ev.drift(label);
            let v = match dir {
                Direction::Forward => b,
                Direction::Backward => -bstar,
            };
            v.clamp(-cap, cap)
        })
        .collect()
}

/// Integrate the walker-density law over `duration` with drift tabulated
/// from the field and refreshed every `refresh` time units. `dir` chooses
/// both the drift (b or -b*) and whether slice times run forward or
/// backward from `t0`. The constant `rate` vector is the per-cell source;
/// diffusion is hbar/2m as everywhere else.
#[allow(clippy::too_many_arguments)]
pub fn evolve_density(
    state: &mut GridDensity,
    system: &System,
    label: Label,
    dir: Direction,
    t0: f64,
    duration: f64,
    dt: f64,
    refresh: f64,
    rate: &[f64],
    floor: f64,
    cap: f64,
) -> Result<()> {
    let sign = match dir {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let diff = 0.5 * system.hbar_over_m();
    let steps = (duration / dt).round() as usize;
    let per_refresh = (refresh / dt).round().max(1.0) as usize;
    let mut velocity = Vec::new();
    for s in 0..steps {
        if s % per_refresh == 0 {
            let t = t0 + sign * s as f64 * dt;
            let slice = system.slice(t);
            velocity = tabulate_velocity(&slice, label, dir, &state.grid, floor, cap);
        }
        fp_step(state, &velocity, rate, diff, dt)?;
    }
    Ok(())
}

/// Per-cell sink for the physical-label density of an absorptive barrier:
/// -2 u0 / hbar inside [0, d], zero outside.
pub fn absorption_sink(barrier: &BarrierSpec, grid: &GridSpec) -> Vec<f64> {
    let r = -2.0 * barrier.u0 / barrier.hbar;
    (0..grid.cells)
        .map(|i| {
            let x = grid.center(i);
            if x >= 0.0 && x <= barrier.d {
                r
            } else {
                0.0
            }
        })
        .collect()
}

/// Closed-form reference for the backward transmitted-ensemble density
/// deep under a thick barrier, at backward times t <= 0 counted from the
/// release: a Gaussian of variance (hbar/m)|t| drifting left from the far
/// face at the crossing speed, with total mass exp(lambda t) eaten by the
/// absorptive conversion rate lambda = 2 u0 / hbar.
pub fn wkb_closed_form(
    barrier: &BarrierSpec,
    e0: f64,
    t: f64,
    grid: GridSpec,
) -> Result<GridDensity> {
    barrier.validate()?;
    if t > 0.0 {
        return Err(NelsonError::InvalidSpec {
            field: "wkb.t",
            message: format!("reference density is for backward times t <= 0, got {t}"),
        });
    }
    let c = barrier.crossing_speed(e0).ok_or(NelsonError::InvalidSpec {
        field: "wkb.e0",
        message: format!("energy {e0} is not under the barrier"),
    })?;
    let lambda = 2.0 * barrier.u0 / barrier.hbar;
    let mean = barrier.d + c * t;
    let var = (barrier.hbar / barrier.m * t.abs()).max(1e-300);
    let mass = (lambda * t).exp();
    let norm = mass / (2.0 * std::f64::consts::PI * var).sqrt();
    Ok(GridDensity::from_function(grid, |x| {
        norm * (-(x - mean) * (x - mean) / (2.0 * var)).exp()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::l1_shape_distance;
    use approx::assert_relative_eq;

    fn gaussian_state(grid: GridSpec, mean: f64, var: f64, mass: f64) -> GridDensity {
        let norm = mass / (2.0 * std::f64::consts::PI * var).sqrt();
        GridDensity::from_function(grid, |x| {
            norm * (-(x - mean) * (x - mean) / (2.0 * var)).exp()
        })
    }

    #[test]
    fn interior_transport_conserves_mass() {
        // Conservative fluxes: without a source, mass changes only through
        // the boundaries, and a density far from them keeps its integral
        // to rounding.
        let grid = GridSpec::new(-20.0, 20.0, 800).unwrap();
        let mut state = gaussian_state(grid, -5.0, 0.25, 1.0);
        let m0 = state.mass();
        let velocity = vec![0.7; 801];
        let rate = vec![0.0; 800];
        let dt = 5e-4;
        for _ in 0..2000 {
            fp_step(&mut state, &velocity, &rate, 0.5, dt).unwrap();
        }
        assert_relative_eq!(state.mass(), m0, epsilon = 1e-10, max_relative = 1e-10);
    }

    #[test]
    fn sink_follows_exponential_decay_exactly() {
        // Zero velocity and a uniform sink: every cell is multiplied by
        // exp(-lambda dt) each step, so the mass after K steps is the
        // closed-form decay with no scheme error at all. Diffusion moves
        // mass between cells but does not create or destroy it.
        let grid = GridSpec::new(-10.0, 10.0, 400).unwrap();
        let mut state = gaussian_state(grid, 0.0, 0.5, 1.0);
        let m0 = state.mass();
        let lambda = 1.3;
        let velocity = vec![0.0; 401];
        let rate = vec![-lambda; 400];
        let dt = 5e-4;
        let steps = 3000;
        for _ in 0..steps {
            fp_step(&mut state, &velocity, &rate, 0.5, dt).unwrap();
        }
        let expect = m0 * (-lambda * dt * steps as f64).exp();
        assert_relative_eq!(state.mass(), expect, epsilon = 1e-10, max_relative = 1e-10);
    }

    #[test]
    fn constant_drift_transports_a_gaussian() {
        // Against the exact advection-diffusion solution: mean moves with
        // the drift, variance grows by 2 D t. The first-order upwind flux
        // adds numerical diffusion of order v h / 2, which sets the
        // comparison tolerance.
        let grid = GridSpec::new(-15.0, 25.0, 2000).unwrap();
        let v = 1.0;
        let d = 0.5;
        let t = 4.0;
        let mut state = gaussian_state(grid, -5.0, 0.5, 1.0);
        let dt = 1e-4;
        let steps = (t / dt) as usize;
        let velocity = vec![v; 2001];
        let rate = vec![0.0; 2000];
        for _ in 0..steps {
            fp_step(&mut state, &velocity, &rate, d, dt).unwrap();
        }
        let exact = gaussian_state(grid, -5.0 + v * t, 0.5 + 2.0 * d * t, 1.0);
        let dist = l1_shape_distance(&state, &exact).unwrap();
        assert!(dist < 0.02, "L1 distance {dist}");
        assert_relative_eq!(state.mass(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn backward_reference_matches_its_own_fp_evolution() {
        // Start from the closed form at a small backward time and integrate
        // the same drift-diffusion-sink law further back: the result must
        // track the closed form at the later backward time in both shape
        // and mass.
        let barrier = BarrierSpec::new(2.5, 1.0, 6.0);
        let e0 = 0.5;
        let c = barrier.crossing_speed(e0).unwrap();
        let lambda = 2.0 * barrier.u0 / barrier.hbar;
        let grid = GridSpec::new(-4.0, 10.0, 1400).unwrap();
        let t0 = -0.1;
        let t1 = -1.1;
        let mut state = wkb_closed_form(&barrier, e0, t0, grid).unwrap();
        let velocity = vec![-c; 1401];
        let rate = vec![-lambda; 1400];
        let dt = 2e-5;
        let steps = ((t0 - t1) / dt).round() as usize;
        for _ in 0..steps {
            fp_step(&mut state, &velocity, &rate, 0.5, dt).unwrap();
        }
        let reference = wkb_closed_form(&barrier, e0, t1, grid).unwrap();
        let dist = l1_shape_distance(&state, &reference).unwrap();
        assert!(dist < 0.03, "L1 distance {dist}");
        assert_relative_eq!(
            state.mass(),
            reference.mass(),
            max_relative = 0.02
        );
    }

    #[test]
    fn cfl_violations_are_rejected() {
        let grid = GridSpec::new(0.0, 1.0, 100).unwrap();
        let mut state = gaussian_state(grid, 0.5, 0.01, 1.0);
        let velocity = vec![0.0; 101];
        let rate = vec![0.0; 100];
        let r = fp_step(&mut state, &velocity, &rate, 0.5, 1e-3);
        assert!(matches!(r, Err(NelsonError::CflViolation { .. })));
        let fast = vec![500.0; 101];
        let r = fp_step(&mut state, &fast, &rate, 0.5, 2e-5);
        assert!(matches!(
            r,
            Err(NelsonError::CflViolation {
                which: "advection",
                ..
            })
        ));
    }

    #[test]
    fn closed_form_mass_decays_with_backward_time() {
        let barrier = BarrierSpec::new(2.5, 1.0, 6.0);
        let grid = GridSpec::new(-10.0, 12.0, 2200).unwrap();
        let m1 = wkb_closed_form(&barrier, 0.5, -0.5, grid).unwrap().mass();
        let m2 = wkb_closed_form(&barrier, 0.5, -1.5, grid).unwrap().mass();
        let lambda = 2.0 * barrier.u0 / barrier.hbar;
        assert_relative_eq!(m2 / m1, (-lambda).exp(), epsilon = 1e-6, max_relative = 1e-6);
    }
}
