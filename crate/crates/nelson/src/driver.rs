//! Experiment orchestration: locate the release time for traversal-time
//! runs and wire field construction, backward passage, and statistics
//! together.
//!
//! Two different times matter. The transmitted mass saturates at the
//! plateau time, which is when transmission is over and the crossed
//! fraction can be read off. The backward walk, though, must start where
//! and when the transmitted walkers actually were: a walker released at
//! the far face long after the exit pulse has passed sits in a dead zone
//! whose density is orders of magnitude below the working floor. Barrier
//! occupation collects nothing during the outbound free flight, so
//! releasing at the face at the exit-pulse peak reproduces the crossed
//! ensemble's barrier statistics while skipping the flight entirely.

use crate::analysis::TimeStatistics;
use crate::barrier::{BarrierSpec, PacketSpec};
use crate::channel::{ChannelField, ChannelSpec};
use crate::dynamics::{PassageCounters, PassageSpec, PathTimes, StepConfig, System, run_passage};
use crate::error::{NelsonError, Result};
use crate::quadrature::QuadratureSpec;
use crate::wavefield::WaveField;

/// Scan plan for the transmitted-mass plateau.
#[derive(Debug, Clone, Copy)]
pub struct PlateauSpec {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Probe spacing in time.
    pub step: f64,
    /// Saturation threshold: relative mass change per unit time.
    pub rel_tol: f64,
    /// Added to the detected time before release.
    pub margin: f64,
}

impl PlateauSpec {
    /// A window wide enough for a packet released well to the left: the
    /// center needs d / v to reach the far face and the trailing tail
    /// another dozen spatial widths, all doubled for slack.
    pub fn standard(d: f64, k0: f64, sigma: f64, hbar_over_m: f64) -> Self {
        let speed = hbar_over_m * k0;
        let width0 = 1.0 / (2.0 * sigma);
        PlateauSpec {
            t_lo: 0.0,
            t_hi: 2.5 * (d + 12.0 * width0) / speed + 40.0,
            step: 2.0,
            rel_tol: 1e-4,
            margin: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Plateau {
    /// Earliest saturated probe time plus the margin.
    pub t_release: f64,
    /// Transmitted mass at the detected time.
    pub mass: f64,
}

fn packet_of(system: &System) -> &PacketSpec {
    match system {
        System::Optical(f) => &f.packet,
        System::Coupled(f) => &f.packet,
    }
}

fn far_face(system: &System) -> f64 {
    match system {
        System::Optical(f) => f.barrier.d,
        System::Coupled(f) => f.spec.d,
    }
}

/// Probability past the far face at time t, integrated out to where the
/// transmitted packet's leading tail dies off.
pub fn transmitted_mass(system: &System, t: f64) -> f64 {
    let packet = packet_of(system);
    let hom = system.hbar_over_m();
    let d = far_face(system);
    let width0 = 1.0 / (2.0 * packet.sigma);
    let spread = hom * packet.sigma * t.max(0.0);
    let width = (width0 * width0 + spread * spread).sqrt();
    let hi = d + hom * packet.k0 * t.max(0.0) + 10.0 * width;
    let n = ((hi - d) * 4.0).ceil().max(800.0) as usize;
    match system {
        System::Optical(f) => f.mass_on_grid(t, d, hi, n),
        System::Coupled(f) => f.total_mass_on_grid(t, d, hi, n),
    }
}

/// Earliest probe time at which the transmitted mass changes by less than
/// `rel_tol` per unit time, ignoring stretches where the mass is still
/// effectively zero (before arrival the mass is flat only because nothing
/// has crossed yet).
pub fn find_plateau(system: &System, spec: &PlateauSpec) -> Result<Plateau> {
    if spec.step <= 0.0 || spec.t_hi <= spec.t_lo {
        return Err(NelsonError::InvalidSpec {
            field: "plateau.window",
            message: format!("bad scan window [{}, {}] step {}", spec.t_lo, spec.t_hi, spec.step),
        });
    }
    let mut t = spec.t_lo;
    let mut prev = transmitted_mass(system, t);
    while t + spec.step <= spec.t_hi + 1e-9 {
        let next_t = t + spec.step;
        let mass = transmitted_mass(system, next_t);
        if mass > 1e-30 {
            let rate = (mass - prev).abs() / (mass * spec.step);
            if rate < spec.rel_tol {
                return Ok(Plateau {
                    t_release: next_t + spec.margin,
                    mass,
                });
            }
        }
        prev = mass;
        t = next_t;
    }
    Err(NelsonError::PlateauNotFound {
        t_lo: spec.t_lo,
        t_hi: spec.t_hi,
    })
}

/// Time at which the density just past the far face peaks: the moment the
/// transmitted pulse exits. A coarse scan over [0, t_hi] is refined once
/// around the best probe. Fails if the peak sits on the window edge,
/// which means the window missed the exit.
pub fn face_exit_time(system: &System, t_hi: f64) -> Result<f64> {
    let d = far_face(system);
    let x = d + 1e-6;
    let label = system.initial_label();
    let probe = |t: f64| system.slice(t).eval(x).density(label);
    let coarse = 0.25;
    let n = (t_hi / coarse).ceil() as usize;
    let (mut best_t, mut best) = (0.0, probe(0.0));
    for i in 1..=n {
        let t = (i as f64 * coarse).min(t_hi);
        let rho = probe(t);
        if rho > best {
            best = rho;
            best_t = t;
        }
    }
    if best_t <= coarse * 0.5 || best_t >= t_hi - coarse * 0.5 {
        return Err(NelsonError::PlateauNotFound { t_lo: 0.0, t_hi });
    }
    let fine = 0.02;
    let (mut t, mut rho) = (best_t, best);
    let mut probe_t = best_t - coarse;
    while probe_t <= best_t + coarse {
        let r = probe(probe_t);
        if r > rho {
            rho = r;
            t = probe_t;
        }
        probe_t += fine;
    }
    Ok(t)
}

/// Knobs for a backward traversal-time run. `standard` fills in the
/// defaults used throughout: release just past the far face, escape well
/// clear of the near face, and a per-walker cap of a few free diffusion
/// times across the barrier.
#[derive(Debug, Clone)]
pub struct TraversalSpec {
    pub n_walkers: usize,
    pub seed: u64,
    pub dt: f64,
    /// Release position offset past the far face.
    pub release_offset: f64,
    pub escape_x: f64,
    pub max_elapsed: f64,
    pub step: StepConfig,
    pub floor_refresh: usize,
    pub floor_rel: f64,
    pub fallback_budget: f64,
    pub no_cross_budget: f64,
}

impl TraversalSpec {
    pub fn standard(n_walkers: usize, seed: u64, dt: f64, d: f64, hbar_over_m: f64) -> Self {
        TraversalSpec {
            n_walkers,
            seed,
            dt,
            release_offset: 1e-6,
            escape_x: -1.5,
            max_elapsed: 5.0 * d * d / hbar_over_m,
            step: StepConfig::default(),
            floor_refresh: 250,
            floor_rel: 1e-12,
            fallback_budget: 0.01,
            no_cross_budget: 0.02,
        }
    }
}

#[derive(Debug)]
pub struct TraversalOutcome {
    pub t_release: f64,
    pub stats: TimeStatistics,
    pub counters: PassageCounters,
    pub paths: Vec<PathTimes>,
}

/// Release walkers just past the far face at `t_release` (normally the
/// exit-pulse peak) and walk them backward until they cross and clear the
/// barrier region.
pub fn run_traversal(
    system: &System,
    t_release: f64,
    spec: &TraversalSpec,
) -> Result<TraversalOutcome> {
    let d = far_face(system);
    let pspec = PassageSpec {
        n_walkers: spec.n_walkers,
        seed: spec.seed,
        t_release,
        dt: spec.dt,
        x_release: d + spec.release_offset,
        initial_label: system.initial_label(),
        escape_x: spec.escape_x,
        max_elapsed: spec.max_elapsed,
        step: spec.step,
        scan: (spec.escape_x - 1.5, d + spec.release_offset + 8.0, 800),
        floor_refresh: spec.floor_refresh,
        floor_rel: spec.floor_rel,
        fallback_budget: spec.fallback_budget,
        no_cross_budget: spec.no_cross_budget,
    };
    let run = run_passage(system, &pspec)?;
    let stats = TimeStatistics::from_paths(&run.paths)?;
    Ok(TraversalOutcome {
        t_release,
        stats,
        counters: run.counters,
        paths: run.paths,
    })
}

/// Window for the exit-time search: the packet center needs d / v to reach
/// the far face, plus a generous allowance for the initial width and any
/// barrier delay.
fn exit_window(d: f64, k0: f64, sigma: f64, hbar_over_m: f64) -> f64 {
    (d + 6.0 / (2.0 * sigma)) / (hbar_over_m * k0) + 20.0
}

/// One point of an absorption-strength study.
#[derive(Debug)]
pub struct SweepPoint {
    pub u0: f64,
    /// Saturated transmitted mass and the time it was read off.
    pub plateau: Plateau,
    pub outcome: TraversalOutcome,
    /// d / c for the interior profile at this absorption, when under the
    /// barrier.
    pub crossing_time: Option<f64>,
}

/// Rebuild the field at each absorption strength and rerun the traversal
/// experiment. The packet and the real part of the barrier stay fixed;
/// each point gets its own plateau search and exit-time search.
pub fn sweep_absorption(
    base: &BarrierSpec,
    packet: &PacketSpec,
    quad: &QuadratureSpec,
    u0_values: &[f64],
    spec: &TraversalSpec,
) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::with_capacity(u0_values.len());
    for &u0 in u0_values {
        let barrier = BarrierSpec {
            u0,
            ..base.clone()
        };
        let field = WaveField::new(barrier.clone(), packet.clone(), quad.clone())?;
        let system = System::Optical(field);
        let hom = system.hbar_over_m();
        let pl = find_plateau(
            &system,
            &PlateauSpec::standard(barrier.d, packet.k0, packet.sigma, hom),
        )?;
        let t_exit = face_exit_time(&system, exit_window(barrier.d, packet.k0, packet.sigma, hom))?;
        let outcome = run_traversal(&system, t_exit, spec)?;
        let e0 = packet.central_energy(barrier.m, barrier.hbar);
        points.push(SweepPoint {
            u0,
            plateau: pl,
            outcome,
            crossing_time: barrier.crossing_time(e0),
        });
    }
    Ok(points)
}

/// Coupled-channel version: build the two-channel field and time the
/// walkers released in the incident channel.
pub fn run_channel_traversal(
    spec: &ChannelSpec,
    packet: &PacketSpec,
    quad: &QuadratureSpec,
    tspec: &TraversalSpec,
) -> Result<TraversalOutcome> {
    let field = ChannelField::new(spec.clone(), packet.clone(), quad.clone())?;
    let system = System::Coupled(field);
    let hom = system.hbar_over_m();
    let t_exit = face_exit_time(&system, exit_window(spec.d, packet.k0, packet.sigma, hom))?;
    run_traversal(&system, t_exit, tspec)
}
