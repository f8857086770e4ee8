//! Walker ensembles driven by the drift fields of a wave function.
//!
//! A walker carries a position and a label. Positions follow the
//! stochastic flow `dx = v dt + dw` with `v` the forward drift b (time
//! increasing) or the backward drift b* (time decreasing) and `dw` white
//! noise of variance (hbar/m) dt. Labels jump with the rates supplied by
//! the system: the absorptive barrier converts physical walkers to
//! absorbed ones, the coupled barrier shuttles walkers between channels.
//!
//! Stepping discipline: every active walker draws exactly one uniform and
//! one normal variate per step, in that order, from its own counter-based
//! stream. Draw counts never depend on the field values, so a run is
//! reproducible across thread counts and walker subsets.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::{ChannelEval, ChannelField, ChannelSlice};
use crate::error::{NelsonError, Result};
use crate::rng::walker_rng;
use crate::wavefield::{drift_pair, PsiEval, WaveField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    /// Optical system: still carrying probability.
    Physical,
    /// Optical system: probability removed by the absorptive potential.
    Absorbed,
    Ch1,
    Ch2,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Physical => "physical",
            Label::Absorbed => "absorbed",
            Label::Ch1 => "ch1",
            Label::Ch2 => "ch2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Per-step guard settings. The drift guard bounds |v dt| in units of the
/// per-step noise width; a trip means the walker sat on a density node
/// where the drift diverges, and stepping through it ballistically would
/// teleport the walker.
#[derive(Debug, Clone, Copy)]
pub struct StepConfig {
    pub jump_clamp: f64,
    pub drift_guard: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            jump_clamp: 0.25,
            drift_guard: 5.0,
        }
    }
}

/// Strict stepping turns guard trips into hard errors; lenient stepping
/// degrades the step (pure diffusion, or jump skipped) and reports what it
/// did so the caller can budget the degradations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepPolicy {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub x: f64,
    pub label: Label,
    pub diffusion_fallback: bool,
    pub jump_skipped: bool,
}

pub enum System {
    Optical(WaveField),
    Coupled(ChannelField),
}

impl System {
    pub fn hbar_over_m(&self) -> f64 {
        match self {
            System::Optical(f) => f.hbar_over_m(),
            System::Coupled(f) => f.hbar_over_m(),
        }
    }

    pub fn reference_start(&self) -> f64 {
        match self {
            System::Optical(f) => f.reference_start(),
            System::Coupled(f) => f.reference_start(),
        }
    }

    pub fn initial_label(&self) -> Label {
        match self {
            System::Optical(_) => Label::Physical,
            System::Coupled(_) => Label::Ch1,
        }
    }

    pub fn slice(&self, t: f64) -> SystemSlice<'_> {
        match self {
            System::Optical(f) => SystemSlice::Optical {
                slice: f.slice(t),
                decay_rate: 2.0 * f.barrier.u0 / f.barrier.hbar,
                d: f.barrier.d,
                hom: f.hbar_over_m(),
            },
            System::Coupled(f) => SystemSlice::Coupled {
                slice: f.slice(t),
                hom: f.hbar_over_m(),
            },
        }
    }

    /// Validate a time step against the static jump rates: the absorptive
    /// conversion probability per step must stay well below one.
    pub fn validate_dt(&self, dt: f64, cfg: &StepConfig) -> Result<()> {
        if !(dt > 0.0) {
            return Err(NelsonError::InvalidSpec {
                field: "run.dt",
                message: format!("time step must be > 0, got {dt}"),
            });
        }
        if let System::Optical(f) = self {
            let p = 2.0 * f.barrier.u0 / f.barrier.hbar * dt;
            if p > 0.1_f64.min(cfg.jump_clamp) {
                return Err(NelsonError::InvalidSpec {
                    field: "run.dt",
                    message: format!(
                        "absorption probability per step is {p:.3}; keep 2 u0 dt / hbar at or below 0.1"
                    ),
                });
            }
        }
        Ok(())
    }
}

pub enum SystemSlice<'a> {
    Optical {
        slice: crate::wavefield::FieldSlice<'a>,
        decay_rate: f64,
        d: f64,
        hom: f64,
    },
    Coupled {
        slice: ChannelSlice<'a>,
        hom: f64,
    },
}

impl SystemSlice<'_> {
    pub fn eval(&self, x: f64) -> SysEval {
        match self {
            SystemSlice::Optical {
                slice,
                decay_rate,
                d,
                hom,
            } => SysEval::Optical {
                eval: slice.eval(x),
                inside: x >= 0.0 && x <= *d,
                decay_rate: *decay_rate,
                hom: *hom,
            },
            SystemSlice::Coupled { slice, hom } => SysEval::Coupled {
                eval: slice.eval(x),
                hom: *hom,
            },
        }
    }

    /// Density maxima used for node-region floors; the second value only
    /// differs from the first for the coupled system (channel 2).
    pub fn max_densities(&self, lo: f64, hi: f64, n: usize) -> (f64, f64) {
        match self {
            SystemSlice::Optical { slice, .. } => {
                let m = slice.max_density_on_grid(lo, hi, n);
                (m, m)
            }
            SystemSlice::Coupled { slice, .. } => slice.max_density_on_grid(lo, hi, n),
        }
    }

    pub fn t(&self) -> f64 {
        match self {
            SystemSlice::Optical { slice, .. } => slice.t,
            SystemSlice::Coupled { slice, .. } => slice.t(),
        }
    }
}

/// One field evaluation with everything a step needs, for any label.
pub enum SysEval {
    Optical {
        eval: PsiEval,
        inside: bool,
        decay_rate: f64,
        hom: f64,
    },
    Coupled {
        eval: ChannelEval,
        hom: f64,
    },
}

impl SysEval {
    pub fn hbar_over_m(&self) -> f64 {
        match self {
            SysEval::Optical { hom, .. } => *hom,
            SysEval::Coupled { hom, .. } => *hom,
        }
    }

    pub fn density(&self, label: Label) -> f64 {
        match (self, label) {
            // Both optical labels ride the same wave function.
            (SysEval::Optical { eval, .. }, Label::Physical | Label::Absorbed) => eval.density(),
            (SysEval::Coupled { eval, .. }, Label::Ch1) => eval.density(1),
            (SysEval::Coupled { eval, .. }, Label::Ch2) => eval.density(2),
            _ => panic!("label {label:?} does not belong to this system"),
        }
    }

    pub fn drift(&self, label: Label) -> (f64, f64) {
        match (self, label) {
            (SysEval::Optical { eval, hom, .. }, Label::Physical | Label::Absorbed) => {
                drift_pair(eval, *hom)
            }
            (SysEval::Coupled { eval, hom }, Label::Ch1) => drift_pair(&eval.amplitude(1), *hom),
            (SysEval::Coupled { eval, hom }, Label::Ch2) => drift_pair(&eval.amplitude(2), *hom),
            _ => panic!("label {label:?} does not belong to this system"),
        }
    }

    /// Jump rate out of `label` for the given stepping direction.
    ///
    /// Absorptive barrier: a physical walker converts at rate 2 u0 / hbar
    /// inside the barrier when stepping forward and never when stepping
    /// backward; an absorbed walker does the reverse. Coupled barrier: the
    /// signed inter-channel rate, positive part forward, negative part
    /// backward.
    pub fn jump_rate(&self, label: Label, dir: Direction) -> f64 {
        match (self, label) {
            (
                SysEval::Optical {
                    inside, decay_rate, ..
                },
                Label::Physical,
            ) => match dir {
                Direction::Forward if *inside => *decay_rate,
                _ => 0.0,
            },
            (
                SysEval::Optical {
                    inside, decay_rate, ..
                },
                Label::Absorbed,
            ) => match dir {
                Direction::Backward if *inside => *decay_rate,
                _ => 0.0,
            },
            (SysEval::Coupled { eval, .. }, Label::Ch1) => match dir {
                Direction::Forward => eval.forward_rate(1),
                Direction::Backward => eval.backward_rate(1),
            },
            (SysEval::Coupled { eval, .. }, Label::Ch2) => match dir {
                Direction::Forward => eval.forward_rate(2),
                Direction::Backward => eval.backward_rate(2),
            },
            _ => panic!("label {label:?} does not belong to this system"),
        }
    }

    pub fn jump_target(&self, label: Label) -> Label {
        match label {
            Label::Physical => Label::Absorbed,
            Label::Absorbed => Label::Physical,
            Label::Ch1 => Label::Ch2,
            Label::Ch2 => Label::Ch1,
        }
    }
}

/// Advance one walker by one step, with the uniform and normal draws made
/// by the caller. Position update: forward x + b dt + s n, backward
/// x - b* dt + s n, with s^2 = (hbar/m) dt.
#[allow(clippy::too_many_arguments)]
pub fn step_core(
    ev: &SysEval,
    x: f64,
    label: Label,
    dir: Direction,
    dt: f64,
    cfg: &StepConfig,
    floor: f64,
    u: f64,
    n: f64,
    policy: StepPolicy,
    walker: usize,
    t: f64,
) -> Result<StepOutcome> {
    let sigma = (ev.hbar_over_m() * dt).sqrt();
    let density = ev.density(label);
    if !(density >= floor) {
        match policy {
            StepPolicy::Strict => {
                return Err(NelsonError::NodeRegion {
                    x,
                    t,
                    density,
                    floor,
                })
            }
            StepPolicy::Lenient => {
                return Ok(StepOutcome {
                    x: x + sigma * n,
                    label,
                    diffusion_fallback: true,
                    jump_skipped: false,
                })
            }
        }
    }
    let rate = ev.jump_rate(label, dir);
    let prob = rate * dt;
    let mut new_label = label;
    let mut jump_skipped = false;
    if prob > cfg.jump_clamp {
        match policy {
            StepPolicy::Strict => {
                return Err(NelsonError::ClampExceeded {
                    walker,
                    t,
                    prob,
                    clamp: cfg.jump_clamp,
                })
            }
            StepPolicy::Lenient => jump_skipped = true,
        }
    } else if u < prob {
        new_label = ev.jump_target(label);
    }
    let (b, bstar) = ev.drift(new_label);
    let disp = match dir {
        Direction::Forward => b * dt,
        Direction::Backward => -bstar * dt,
    };
    if !(disp.abs() <= cfg.drift_guard * sigma) {
        match policy {
            StepPolicy::Strict => {
                return Err(NelsonError::StepTooLarge {
                    walker,
                    t,
                    displacement: disp,
                    limit: cfg.drift_guard * sigma,
                })
            }
            StepPolicy::Lenient => {
                return Ok(StepOutcome {
                    x: x + sigma * n,
                    label: new_label,
                    diffusion_fallback: true,
                    jump_skipped,
                })
            }
        }
    }
    Ok(StepOutcome {
        x: x + disp + sigma * n,
        label: new_label,
        diffusion_fallback: false,
        jump_skipped,
    })
}

/// How walker positions are drawn at the start of a run.
#[derive(Debug, Clone, Copy)]
pub enum InitialLaw {
    /// Inverse-CDF sample of the field's own density at the start time,
    /// tabulated on `cells` equal cells over [lo, hi]. For the coupled
    /// system this is the incident channel's density.
    FieldDensity { lo: f64, hi: f64, cells: usize },
    /// Every walker at the same point.
    Point { x: f64 },
}

/// A time step schedule: an optional coarse opening phase (useful while a
/// packet is still far from the barrier) followed by the fine phase.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    /// (coarse dt, time at which to switch to the fine dt). The switch
    /// time is rounded to a whole number of coarse steps.
    pub coarse: Option<(f64, f64)>,
}

impl TimeGrid {
    /// Expand into (time-before-step, dt) pairs. Times come from integer
    /// multiples within each phase, so they do not accumulate rounding.
    fn steps(&self) -> Result<Vec<(f64, f64)>> {
        let sign = if self.t_end >= self.t_start { 1.0 } else { -1.0 };
        let span = (self.t_end - self.t_start).abs();
        if span == 0.0 {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        let mut phase_start = self.t_start;
        let mut remaining = span;
        if let Some((cdt, until)) = self.coarse {
            if !(cdt > 0.0) {
                return Err(NelsonError::InvalidSpec {
                    field: "run.coarse",
                    message: format!("coarse dt must be > 0, got {cdt}"),
                });
            }
            let coarse_span = (until - self.t_start) * sign;
            if coarse_span > 0.0 {
                let n = (coarse_span / cdt).round().max(1.0) as usize;
                for k in 0..n {
                    out.push((phase_start + sign * k as f64 * cdt, cdt));
                }
                phase_start += sign * n as f64 * cdt;
                remaining = (self.t_end - phase_start) * sign;
            }
        }
        if remaining > 1e-12 {
            let n = (remaining / self.dt).round().max(1.0) as usize;
            for k in 0..n {
                out.push((phase_start + sign * k as f64 * self.dt, self.dt));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub n_walkers: usize,
    pub seed: u64,
    pub grid: TimeGrid,
    pub init: InitialLaw,
    pub initial_label: Label,
    pub step: StepConfig,
    /// Scan window (lo, hi, points) for the node-region floor refresh.
    pub scan: (f64, f64, usize),
    /// Refresh the floor every this many steps.
    pub floor_refresh: usize,
    /// Floor as a fraction of the scanned maximum density.
    pub floor_rel: f64,
    /// Times at which to record every walker's position and label.
    pub snapshots: Vec<f64>,
    /// Hard cap on the fraction of walker steps degraded to pure
    /// diffusion.
    pub fallback_budget: f64,
}

impl RunSpec {
    pub fn standard(n_walkers: usize, seed: u64, grid: TimeGrid, init: InitialLaw) -> Self {
        RunSpec {
            n_walkers,
            seed,
            grid,
            init,
            initial_label: Label::Physical,
            step: StepConfig::default(),
            scan: (-80.0, 80.0, 321),
            floor_refresh: 250,
            floor_rel: 1e-12,
            snapshots: Vec::new(),
            fallback_budget: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub label: Vec<Label>,
}

impl Snapshot {
    pub fn count(&self, label: Label) -> usize {
        self.label.iter().filter(|&&l| l == label).count()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunCounters {
    pub walker_steps: u64,
    pub diffusion_fallbacks: u64,
    pub jump_skips: u64,
}

impl RunCounters {
    pub fn fallback_fraction(&self) -> f64 {
        if self.walker_steps == 0 {
            0.0
        } else {
            self.diffusion_fallbacks as f64 / self.walker_steps as f64
        }
    }
}

pub struct EnsembleRun {
    pub snapshots: Vec<Snapshot>,
    pub counters: RunCounters,
    pub final_x: Vec<f64>,
    pub final_label: Vec<Label>,
}

struct Walker {
    x: f64,
    label: Label,
    rng: ChaCha8Rng,
    fallbacks: u32,
    skips: u32,
}

fn init_walkers(system: &System, spec: &RunSpec) -> Result<Vec<Walker>> {
    if spec.n_walkers == 0 {
        return Err(NelsonError::EmptyEnsemble);
    }
    let cdf = match spec.init {
        InitialLaw::FieldDensity { lo, hi, cells } => {
            Some(density_cdf(system, spec.grid.t_start, lo, hi, cells)?)
        }
        InitialLaw::Point { .. } => None,
    };
    let mut walkers = Vec::with_capacity(spec.n_walkers);
    for id in 0..spec.n_walkers {
        let mut rng = walker_rng(spec.seed, id as u64);
        let x = match (&spec.init, &cdf) {
            (InitialLaw::Point { x }, _) => *x,
            (InitialLaw::FieldDensity { .. }, Some(c)) => c.sample(rng.gen::<f64>()),
            _ => unreachable!(),
        };
        walkers.push(Walker {
            x,
            label: spec.initial_label,
            rng,
            fallbacks: 0,
            skips: 0,
        });
    }
    Ok(walkers)
}

/// Tabulated inverse-CDF sampler for an initial density.
pub struct DensityCdf {
    lo: f64,
    h: f64,
    /// cum[i] = probability mass strictly left of cell i; cum[n] = 1.
    cum: Vec<f64>,
}

impl DensityCdf {
    pub fn sample(&self, u: f64) -> f64 {
        let i = self.cum.partition_point(|&c| c <= u).saturating_sub(1);
        let i = i.min(self.cum.len() - 2);
        let mass = self.cum[i + 1] - self.cum[i];
        let frac = if mass > 0.0 {
            (u - self.cum[i]) / mass
        } else {
            0.5
        };
        self.lo + (i as f64 + frac) * self.h
    }
}

fn density_cdf(system: &System, t: f64, lo: f64, hi: f64, cells: usize) -> Result<DensityCdf> {
    if !(hi > lo) || cells < 16 {
        return Err(NelsonError::InvalidSpec {
            field: "run.init",
            message: format!("bad sampling window [{lo}, {hi}] with {cells} cells"),
        });
    }
    let slice = system.slice(t);
    let h = (hi - lo) / cells as f64;
    let label = system.initial_label();
    let mut masses = Vec::with_capacity(cells);
    let mut total = 0.0;
    for i in 0..cells {
        let xc = lo + (i as f64 + 0.5) * h;
        let m = slice.eval(xc).density(label).max(0.0) * h;
        masses.push(m);
        total += m;
    }
    if !(total > 0.0) {
        return Err(NelsonError::InvalidSpec {
            field: "run.init",
            message: format!("field density vanishes on the sampling window at t = {t}"),
        });
    }
    let mut cum = Vec::with_capacity(cells + 1);
    let mut acc = 0.0;
    cum.push(0.0);
    for m in &masses {
        acc += m / total;
        cum.push(acc);
    }
    *cum.last_mut().unwrap() = 1.0;
    Ok(DensityCdf { lo, h, cum })
}

/// Forward (or backward) ensemble propagation with snapshot recording.
/// Guard trips degrade to diffusion steps and are budgeted, never silently
/// absorbed; an over-budget run is an error.
pub fn run_ensemble(system: &System, dir: Direction, spec: &RunSpec) -> Result<EnsembleRun> {
    system.validate_dt(spec.grid.dt, &spec.step)?;
    if let Some((cdt, _)) = spec.grid.coarse {
        system.validate_dt(cdt, &spec.step)?;
    }
    let steps = spec.grid.steps()?;
    let mut walkers = init_walkers(system, spec)?;
    let mut snapshots = Vec::new();
    let mut snap_times = spec.snapshots.clone();
    let sign = if spec.grid.t_end >= spec.grid.t_start {
        1.0
    } else {
        -1.0
    };
    snap_times.sort_by(|a, b| (sign * a).total_cmp(&(sign * b)));
    let mut snap_idx = 0;
    let record = |t: f64, walkers: &[Walker], snaps: &mut Vec<Snapshot>, idx: &mut usize| {
        while *idx < snap_times.len() && sign * (t - snap_times[*idx]) >= -1e-9 {
            snaps.push(Snapshot {
                t,
                x: walkers.iter().map(|w| w.x).collect(),
                label: walkers.iter().map(|w| w.label).collect(),
            });
            *idx += 1;
        }
    };
    record(spec.grid.t_start, &walkers, &mut snapshots, &mut snap_idx);

    let (scan_lo, scan_hi, scan_n) = spec.scan;
    let mut floors = (f64::MAX, f64::MAX);
    let mut total_steps: u64 = 0;
    for (step_index, &(t, dt)) in steps.iter().enumerate() {
        let slice = system.slice(t);
        if step_index % spec.floor_refresh == 0 {
            let (m1, m2) = slice.max_densities(scan_lo, scan_hi, scan_n);
            floors = (spec.floor_rel * m1, spec.floor_rel * m2);
        }
        let cfg = spec.step;
        walkers.par_iter_mut().enumerate().for_each(|(id, w)| {
            let u: f64 = w.rng.gen();
            let n: f64 = w.rng.sample(StandardNormal);
            let ev = slice.eval(w.x);
            let floor = match w.label {
                Label::Ch2 => floors.1,
                _ => floors.0,
            };
            let out = step_core(
                &ev,
                w.x,
                w.label,
                dir,
                dt,
                &cfg,
                floor,
                u,
                n,
                StepPolicy::Lenient,
                id,
                t,
            )
            .expect("lenient stepping cannot fail");
            w.x = out.x;
            w.label = out.label;
            w.fallbacks += out.diffusion_fallback as u32;
            w.skips += out.jump_skipped as u32;
        });
        total_steps += walkers.len() as u64;
        let t_after = t + sign * dt;
        record(t_after, &walkers, &mut snapshots, &mut snap_idx);
    }

    let counters = RunCounters {
        walker_steps: total_steps,
        diffusion_fallbacks: walkers.iter().map(|w| w.fallbacks as u64).sum(),
        jump_skips: walkers.iter().map(|w| w.skips as u64).sum(),
    };
    if counters.fallback_fraction() > spec.fallback_budget {
        return Err(NelsonError::GuardBudget {
            fraction: counters.fallback_fraction(),
            budget: spec.fallback_budget,
        });
    }
    Ok(EnsembleRun {
        snapshots,
        counters,
        final_x: walkers.iter().map(|w| w.x).collect(),
        final_label: walkers.iter().map(|w| w.label).collect(),
    })
}

/// Backward first-passage measurement: walkers released just past the far
/// face at a late reference time, integrated with decreasing time until
/// they have crossed back out of the barrier and left its neighborhood.
#[derive(Debug, Clone)]
pub struct PassageSpec {
    pub n_walkers: usize,
    pub seed: u64,
    /// Release time; stepping proceeds toward earlier times from here.
    pub t_release: f64,
    pub dt: f64,
    /// Release position, slightly past the far face.
    pub x_release: f64,
    pub initial_label: Label,
    /// A crossed walker is finished once it drifts left of this.
    pub escape_x: f64,
    /// Hard cap on backward time per walker.
    pub max_elapsed: f64,
    pub step: StepConfig,
    pub scan: (f64, f64, usize),
    pub floor_refresh: usize,
    pub floor_rel: f64,
    /// Budget for diffusion fallbacks before first crossing, the segment
    /// that feeds the traversal clocks.
    pub fallback_budget: f64,
    /// Budget for walkers that never cross within the window.
    pub no_cross_budget: f64,
}

/// Traversal clocks for one walker path, all in barrier-occupation time
/// except `elapsed_to_cross`.
#[derive(Debug, Clone, Copy)]
pub struct PathTimes {
    pub crossed: bool,
    /// Occupation of [0, d] before the first exit through the near face.
    pub occupation_to_cross: f64,
    /// Occupation of [0, d] over the whole tracked path, re-entries
    /// included.
    pub occupation_total: f64,
    /// Wall-clock backward time from release to first crossing.
    pub elapsed_to_cross: f64,
    pub final_label: Label,
}

/// Pure accounting for one path's traversal clocks. Occupation accrues by
/// the position at the start of each step (a left-endpoint rule, O(dt)
/// accurate); crossing is detected on the position after the step. The
/// clock keeps accruing after the first crossing so re-entries extend the
/// total occupation but not the to-cross occupation.
#[derive(Debug, Clone, Copy, Default)]
pub struct TraversalClock {
    pub crossed: bool,
    pub occupation_to_cross: f64,
    pub occupation_total: f64,
    pub elapsed: f64,
    pub elapsed_to_cross: f64,
}

impl TraversalClock {
    pub fn observe(&mut self, x_before: f64, x_after: f64, dt: f64, d: f64) {
        if x_before >= 0.0 && x_before <= d {
            self.occupation_total += dt;
            if !self.crossed {
                self.occupation_to_cross += dt;
            }
        }
        self.elapsed += dt;
        if !self.crossed && x_after < 0.0 {
            self.crossed = true;
            self.elapsed_to_cross = self.elapsed;
        }
    }

    pub fn times(&self, final_label: Label) -> PathTimes {
        PathTimes {
            crossed: self.crossed,
            occupation_to_cross: self.occupation_to_cross,
            occupation_total: self.occupation_total,
            elapsed_to_cross: self.elapsed_to_cross,
            final_label,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PassageCounters {
    pub walker_steps: u64,
    pub pre_cross_steps: u64,
    pub pre_cross_fallbacks: u64,
    pub post_cross_fallbacks: u64,
    pub jump_skips: u64,
    pub no_cross: u64,
}

pub struct PassageRun {
    pub paths: Vec<PathTimes>,
    pub counters: PassageCounters,
}

struct PassageWalker {
    x: f64,
    label: Label,
    rng: ChaCha8Rng,
    active: bool,
    clock: TraversalClock,
    pre_steps: u32,
    pre_fallbacks: u32,
    post_fallbacks: u32,
    skips: u32,
}

pub fn run_passage(system: &System, spec: &PassageSpec) -> Result<PassageRun> {
    system.validate_dt(spec.dt, &spec.step)?;
    if spec.n_walkers == 0 {
        return Err(NelsonError::EmptyEnsemble);
    }
    let barrier_d = match system {
        System::Optical(f) => f.barrier.d,
        System::Coupled(f) => f.spec.d,
    };
    let mut walkers: Vec<PassageWalker> = (0..spec.n_walkers)
        .map(|id| PassageWalker {
            x: spec.x_release,
            label: spec.initial_label,
            rng: walker_rng(spec.seed, id as u64),
            active: true,
            clock: TraversalClock::default(),
            pre_steps: 0,
            pre_fallbacks: 0,
            post_fallbacks: 0,
            skips: 0,
        })
        .collect();

    let n_steps = (spec.max_elapsed / spec.dt).ceil() as usize;
    let (scan_lo, scan_hi, scan_n) = spec.scan;
    let mut floors = (f64::MAX, f64::MAX);
    let mut total_steps: u64 = 0;
    for k in 0..n_steps {
        if walkers.iter().all(|w| !w.active) {
            break;
        }
        let t = spec.t_release - k as f64 * spec.dt;
        let slice = system.slice(t);
        if k % spec.floor_refresh == 0 {
            let (m1, m2) = slice.max_densities(scan_lo, scan_hi, scan_n);
            floors = (spec.floor_rel * m1, spec.floor_rel * m2);
        }
        let cfg = spec.step;
        let dt = spec.dt;
        let stepped: u64 = walkers
            .par_iter_mut()
            .enumerate()
            .map(|(id, w)| {
                if !w.active {
                    return 0u64;
                }
                let u: f64 = w.rng.gen();
                let n: f64 = w.rng.sample(StandardNormal);
                let ev = slice.eval(w.x);
                let floor = match w.label {
                    Label::Ch2 => floors.1,
                    _ => floors.0,
                };
                let out = step_core(
                    &ev,
                    w.x,
                    w.label,
                    Direction::Backward,
                    dt,
                    &cfg,
                    floor,
                    u,
                    n,
                    StepPolicy::Lenient,
                    id,
                    t,
                )
                .expect("lenient stepping cannot fail");
                if !w.clock.crossed {
                    w.pre_steps += 1;
                    w.pre_fallbacks += out.diffusion_fallback as u32;
                } else {
                    w.post_fallbacks += out.diffusion_fallback as u32;
                }
                w.skips += out.jump_skipped as u32;
                w.clock.observe(w.x, out.x, dt, barrier_d);
                w.x = out.x;
                w.label = out.label;
                if w.clock.crossed && w.x < spec.escape_x {
                    w.active = false;
                }
                1u64
            })
            .sum();
        total_steps += stepped;
    }

    let counters = PassageCounters {
        walker_steps: total_steps,
        pre_cross_steps: walkers.iter().map(|w| w.pre_steps as u64).sum(),
        pre_cross_fallbacks: walkers.iter().map(|w| w.pre_fallbacks as u64).sum(),
        post_cross_fallbacks: walkers.iter().map(|w| w.post_fallbacks as u64).sum(),
        jump_skips: walkers.iter().map(|w| w.skips as u64).sum(),
        no_cross: walkers.iter().filter(|w| !w.clock.crossed).count() as u64,
    };
    let no_cross_fraction = counters.no_cross as f64 / spec.n_walkers as f64;
    if no_cross_fraction > spec.no_cross_budget {
        return Err(NelsonError::NoCrossingBudget {
            fraction: no_cross_fraction,
        });
    }
    let pre_fraction = if counters.pre_cross_steps == 0 {
        0.0
    } else {
        counters.pre_cross_fallbacks as f64 / counters.pre_cross_steps as f64
    };
    if pre_fraction > spec.fallback_budget {
        return Err(NelsonError::GuardBudget {
            fraction: pre_fraction,
            budget: spec.fallback_budget,
        });
    }
    Ok(PassageRun {
        paths: walkers.iter().map(|w| w.clock.times(w.label)).collect(),
        counters,
    })
}
