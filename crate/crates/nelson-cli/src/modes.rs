//! The seven command-line modes. Each loads a strict `key = value` config,
//! runs the matching library routine, and writes CSV tables plus a
//! `manifest.txt` that records the derived quantities a reader would
//! otherwise have to recompute by hand.

use std::path::Path;

use anyhow::{bail, Result};

use nelson::analysis::{diffusion_time, fd_histogram, l1_shape_distance, GridDensity, GridSpec};
use nelson::dynamics::{run_ensemble, Direction, InitialLaw, Label, RunSpec, System, TimeGrid};
use nelson::{
    absorption_sink, evolve_density, run_channel_traversal, stationary_coefficients,
    sweep_absorption, BarrierSpec, ChannelField, ChannelSpec, PacketSpec, QuadRule,
    QuadratureSpec, TraversalOutcome, TraversalSpec, WaveField,
};

use crate::config::Config;
use crate::output::{ensure_dir, fmt_f64, CsvWriter, Manifest};
use crate::plot::{histogram_chart, line_chart, Bars, Marker, Series};

/// Incident-packet keys shared by every mode that builds a wave field:
/// `k0`, `sigma`, and optional `x_center0` (default: eight spatial widths
/// to the left of the barrier, far enough that the initial overlap with
/// the barrier is negligible).
fn packet_from(cfg: &Config) -> Result<PacketSpec> {
    let k0 = cfg.req_f64("k0")?;
    let sigma = cfg.req_f64("sigma")?;
    let x_center0 = cfg.f64_or("x_center0", -4.0 / sigma)?;
    let packet = PacketSpec::new(k0, sigma, x_center0);
    packet.validate()?;
    Ok(packet)
}

/// `rule` (midpoint | legendre) and `nodes`. Monte Carlo modes default to
/// the equally spaced rule so the plane-wave fast path applies.
fn quad_from(cfg: &Config, packet: &PacketSpec, default_nodes: usize) -> Result<QuadratureSpec> {
    let rule = match cfg.str_or("rule", "midpoint") {
        "midpoint" => QuadRule::Midpoint,
        "legendre" => QuadRule::GaussLegendre,
        other => bail!("unknown quadrature rule `{other}` (expected midpoint or legendre)"),
    };
    let nodes = cfg.usize_or("nodes", default_nodes)?;
    Ok(QuadratureSpec::packet_window(
        packet.k0,
        packet.sigma,
        rule,
        nodes,
    ))
}

fn barrier_from(cfg: &Config) -> Result<BarrierSpec> {
    let barrier = BarrierSpec::new(
        cfg.req_f64("v0")?,
        cfg.f64_or("u0", 0.0)?,
        cfg.req_f64("d")?,
    );
    barrier.validate()?;
    Ok(barrier)
}

/// Either an optical-barrier field or a coupled two-channel field,
/// depending on whether the config carries a `coupling` key. The two are
/// mutually exclusive because a jump channel must be one or the other.
fn system_from(cfg: &Config, packet: &PacketSpec, quad: &QuadratureSpec) -> Result<System> {
    match cfg.f64("coupling")? {
        Some(g) => {
            if cfg.f64_or("u0", 0.0)? != 0.0 {
                bail!("`coupling` and a nonzero `u0` are mutually exclusive");
            }
            let spec = ChannelSpec::new(cfg.req_f64("v0")?, g, cfg.req_f64("d")?);
            spec.validate()?;
            let field = ChannelField::new(spec, packet.clone(), quad.clone())?;
            Ok(System::Coupled(field))
        }
        None => {
            let barrier = barrier_from(cfg)?;
            let field = WaveField::new(barrier, packet.clone(), quad.clone())?;
            Ok(System::Optical(field))
        }
    }
}

fn traversal_spec_from(cfg: &Config, d: f64, hom: f64) -> Result<TraversalSpec> {
    let n_walkers = cfg.usize_or("walkers", 10_000)?;
    let seed = cfg.u64_or("seed", 12345)?;
    let dt = cfg.req_f64("dt")?;
    let mut spec = TraversalSpec::standard(n_walkers, seed, dt, d, hom);
    if let Some(v) = cfg.f64("max_elapsed")? {
        spec.max_elapsed = v;
    }
    if let Some(v) = cfg.f64("escape_x")? {
        spec.escape_x = v;
    }
    if let Some(v) = cfg.f64("fallback_budget")? {
        spec.fallback_budget = v;
    }
    if let Some(v) = cfg.f64("no_cross_budget")? {
        spec.no_cross_budget = v;
    }
    Ok(spec)
}

fn write_times_csv(out: &Path, outcome: &TraversalOutcome) -> Result<()> {
    let mut csv = CsvWriter::new(&[
        "walker",
        "crossed",
        "occupation_to_cross",
        "occupation_total",
        "reentry",
        "elapsed_to_cross",
        "final_label",
    ]);
    for (i, p) in outcome.paths.iter().enumerate() {
        csv.row(&[
            i.to_string(),
            u8::from(p.crossed).to_string(),
            fmt_f64(p.occupation_to_cross),
            fmt_f64(p.occupation_total),
            fmt_f64(p.occupation_total - p.occupation_to_cross),
            fmt_f64(p.elapsed_to_cross),
            p.final_label.as_str().to_string(),
        ]);
    }
    csv.write(&out.join("times.csv"))
}

fn record_stats(man: &mut Manifest, outcome: &TraversalOutcome) {
    let s = &outcome.stats;
    let c = &outcome.counters;
    man.set_f64("t_exit", outcome.t_release)
        .set("n_total", s.n_total)
        .set("n_crossed", s.n_crossed)
        .set_f64("crossed_fraction", s.n_crossed as f64 / s.n_total as f64)
        .set_f64("mean_occupation_to_cross", s.mean_to_cross)
        .set_f64("sem_occupation_to_cross", s.sem_to_cross)
        .set_f64("mean_occupation_total", s.mean_total)
        .set_f64("sem_occupation_total", s.sem_total)
        .set_f64("mean_reentry", s.mean_reentry)
        .set_f64("sem_reentry", s.sem_reentry)
        .set_f64("mean_elapsed_to_cross", s.mean_elapsed)
        .set_f64("sem_elapsed_to_cross", s.sem_elapsed)
        .set("walker_steps", c.walker_steps)
        .set("pre_cross_fallbacks", c.pre_cross_fallbacks)
        .set("post_cross_fallbacks", c.post_cross_fallbacks)
        .set("jump_skips", c.jump_skips)
        .set("no_cross", c.no_cross);
}

/// Histogram of per-path occupation times with reference-time markers.
fn times_chart(outcome: &TraversalOutcome, markers: &[Marker]) -> Option<String> {
    let xs: Vec<f64> = outcome
        .paths
        .iter()
        .filter(|p| p.crossed)
        .map(|p| p.occupation_to_cross)
        .collect();
    let hist = fd_histogram(&xs).ok()?;
    let n = xs.len() as f64;
    let bins = hist
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let l = hist.lo + i as f64 * hist.width;
            (l, l + hist.width, c as f64 / (n * hist.width))
        })
        .collect();
    Some(histogram_chart(
        "Occupation time to first crossing",
        "time",
        "probability density",
        &Bars { bins },
        markers,
    ))
}

/// Stationary reflection, transmission, and loss over an energy range.
pub fn coefficients(cfg: &mut Config, out: &Path, plot: bool) -> Result<()> {
    let barrier = barrier_from(cfg)?;
    let e_lo = cfg.req_f64("e_lo")?;
    let e_hi = cfg.req_f64("e_hi")?;
    let points = cfg.usize_or("points", 200)?;
    cfg.finish()?;
    if !(e_lo > 0.0 && e_hi > e_lo) {
        bail!("energy range must satisfy 0 < e_lo < e_hi");
    }
    if points < 2 {
        bail!("`points` must be at least 2");
    }

    let out = ensure_dir(out)?;
    let mut csv = CsvWriter::new(&[
        "k", "energy", "r_re", "r_im", "t_re", "t_im", "reflect", "transmit", "absorb",
    ]);
    let mut skipped = 0usize;
    let mut series: Vec<Vec<(f64, f64)>> = vec![Vec::new(), Vec::new(), Vec::new()];
    for i in 0..points {
        let e = e_lo + (e_hi - e_lo) * i as f64 / (points - 1) as f64;
        let k = (2.0 * barrier.m * e).sqrt() / barrier.hbar;
        let st = match stationary_coefficients(&barrier, k) {
            Ok(st) => st,
            // The matching system degenerates exactly at e = v0 for a
            // transparent barrier; one missing sample is the honest output.
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        csv.row(&[
            fmt_f64(st.k),
            fmt_f64(st.e),
            fmt_f64(st.r.re),
            fmt_f64(st.r.im),
            fmt_f64(st.t.re),
            fmt_f64(st.t.im),
            fmt_f64(st.reflection_probability()),
            fmt_f64(st.transmission_probability()),
            fmt_f64(st.absorbed_probability()),
        ]);
        series[0].push((e, st.transmission_probability()));
        series[1].push((e, st.reflection_probability()));
        series[2].push((e, st.absorbed_probability()));
    }
    csv.write(&out.join("coefficients.csv"))?;

    let mut man = Manifest::new("coefficients");
    man.set_f64("v0", barrier.v0)
        .set_f64("u0", barrier.u0)
        .set_f64("d", barrier.d)
        .set_f64("e_lo", e_lo)
        .set_f64("e_hi", e_hi)
        .set("points", points)
        .set("degenerate_points_skipped", skipped);
    man.write(&out)?;

    if plot {
        let mut markers = Vec::new();
        if barrier.v0 > e_lo && barrier.v0 < e_hi {
            markers.push(Marker {
                name: "barrier height".into(),
                x: barrier.v0,
            });
        }
        let [t, r, a] = <[Vec<(f64, f64)>; 3]>::try_from(series).unwrap();
        let svg = line_chart(
            "Stationary coefficients",
            "energy",
            "probability",
            &[
                Series::line("transmit", t),
                Series::line("reflect", r),
                Series::line("absorb", a),
            ],
            &markers,
        );
        std::fs::write(out.join("coefficients.svg"), svg)?;
    }
    Ok(())
}

/// Tabulate the field density on a spatial grid at a list of times.
pub fn evolve(cfg: &mut Config, out: &Path, plot: bool) -> Result<()> {
    let packet = packet_from(cfg)?;
    let quad = quad_from(cfg, &packet, 257)?;
    let system = system_from(cfg, &packet, &quad)?;
    let times = cfg.req_f64_list("times")?;
    let d = cfg.req_f64("d")?;
    let x_lo = cfg.f64_or("x_lo", packet.x_center0 - 30.0)?;
    let x_hi = cfg.f64_or("x_hi", d + (d - packet.x_center0) + 30.0)?;
    let points = cfg.usize_or("points", 800)?;
    cfg.finish()?;
    if !(x_hi > x_lo) {
        bail!("window must satisfy x_lo < x_hi");
    }

    let out = ensure_dir(out)?;
    let coupled = matches!(system, System::Coupled(_));
    let header: &[&str] = if coupled {
        &["t", "x", "density1", "density2"]
    } else {
        &["t", "x", "density"]
    };
    let mut csv = CsvWriter::new(header);
    let h = (x_hi - x_lo) / points as f64;
    let mut series = Vec::new();
    for &t in &times {
        let slice = system.slice(t);
        let mut pts = Vec::with_capacity(points);
        for j in 0..points {
            let x = x_lo + (j as f64 + 0.5) * h;
            let ev = slice.eval(x);
            if coupled {
                let (d1, d2) = (ev.density(Label::Ch1), ev.density(Label::Ch2));
                csv.row(&[fmt_f64(t), fmt_f64(x), fmt_f64(d1), fmt_f64(d2)]);
                pts.push((x, d1 + d2));
            } else {
                let rho = ev.density(Label::Physical);
                csv.row(&[fmt_f64(t), fmt_f64(x), fmt_f64(rho)]);
                pts.push((x, rho));
            }
        }
        series.push(Series::line(&format!("t = {t}"), pts));
    }
    csv.write(&out.join("density.csv"))?;

    let mut man = Manifest::new("evolve");
    man.set("coupled", coupled)
        .set_f64("x_lo", x_lo)
        .set_f64("x_hi", x_hi)
        .set("points", points)
        .set(
            "times",
            times
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        );
    man.write(&out)?;

    if plot {
        let markers = [
            Marker {
                name: "near face".into(),
                x: 0.0,
            },
            Marker {
                name: "far face".into(),
                x: d,
            },
        ];
        let svg = line_chart("Field density", "x", "density", &series, &markers);
        std::fs::write(out.join("density.svg"), svg)?;
    }
    Ok(())
}

/// Forward walker ensemble with position snapshots.
pub fn paths(cfg: &mut Config, out: &Path, seed_cli: Option<u64>, plot: bool) -> Result<()> {
    let packet = packet_from(cfg)?;
    let quad = quad_from(cfg, &packet, 65)?;
    let system = system_from(cfg, &packet, &quad)?;

    let n_walkers = cfg.usize_or("walkers", 2000)?;
    let mut seed = cfg.u64_or("seed", 12345)?;
    if let Some(s) = seed_cli {
        seed = s;
    }
    let dt = cfg.req_f64("dt")?;
    let t_start = cfg.f64_or("t_start", system.reference_start())?;
    let t_end = cfg.req_f64("t_end")?;
    let times = cfg.req_f64_list("times")?;
    let coarse = cfg.f64_pair("coarse")?;
    let width0 = 0.5 / packet.sigma;
    let init = cfg
        .f64_pair("init")?
        .unwrap_or((packet.x_center0 - 12.0 * width0, packet.x_center0 + 12.0 * width0));
    let init_cells = cfg.usize_or("init_cells", 4000)?;
    cfg.finish()?;

    let grid = TimeGrid {
        t_start,
        t_end,
        dt,
        coarse,
    };
    let mut spec = RunSpec::standard(
        n_walkers,
        seed,
        grid,
        InitialLaw::FieldDensity {
            lo: init.0,
            hi: init.1,
            cells: init_cells,
        },
    );
    spec.initial_label = system.initial_label();
    spec.snapshots = times.clone();
    let run = run_ensemble(&system, Direction::Forward, &spec)?;

    let out = ensure_dir(out)?;
    let mut csv = CsvWriter::new(&["t", "walker", "x", "label"]);
    for snap in &run.snapshots {
        for (i, (&x, &l)) in snap.x.iter().zip(&snap.label).enumerate() {
            csv.row(&[
                fmt_f64(snap.t),
                i.to_string(),
                fmt_f64(x),
                l.as_str().to_string(),
            ]);
        }
    }
    csv.write(&out.join("paths.csv"))?;

    let mut man = Manifest::new("paths");
    man.set("walkers", n_walkers)
        .set("seed", seed)
        .set_f64("t_start", t_start)
        .set_f64("t_end", t_end)
        .set_f64("reference_start", system.reference_start())
        .set("walker_steps", run.counters.walker_steps)
        .set("diffusion_fallbacks", run.counters.diffusion_fallbacks)
        .set("jump_skips", run.counters.jump_skips)
        .set_f64("fallback_fraction", run.counters.fallback_fraction());
    for snap in &run.snapshots {
        // Occupancy per label at this snapshot, a quick consistency read.
        let names: &[Label] = match &system {
            System::Optical(_) => &[Label::Physical, Label::Absorbed],
            System::Coupled(_) => &[Label::Ch1, Label::Ch2],
        };
        for &l in names {
            man.set(&format!("count_t{:.4}_{}", snap.t, l.as_str()), snap.count(l));
        }
    }
    man.write(&out)?;

    if plot {
        if let Some(last) = run.snapshots.last() {
            if let Ok(hist) = fd_histogram(&last.x) {
                let n = last.x.len() as f64;
                let bins = hist
                    .counts
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| {
                        let l = hist.lo + i as f64 * hist.width;
                        (l, l + hist.width, c as f64 / (n * hist.width))
                    })
                    .collect();
                let svg = histogram_chart(
                    &format!("Walker positions at t = {}", last.t),
                    "x",
                    "probability density",
                    &Bars { bins },
                    &[],
                );
                std::fs::write(out.join("paths.svg"), svg)?;
            }
        }
    }
    Ok(())
}

/// The full traversal-time experiment for one optical barrier: saturation
/// of the transmitted mass, exit-pulse timing, and the backward ensemble.
pub fn tunneling_time(cfg: &mut Config, out: &Path, seed_cli: Option<u64>, plot: bool) -> Result<()> {
    let packet = packet_from(cfg)?;
    let quad = quad_from(cfg, &packet, 65)?;
    let barrier = barrier_from(cfg)?;
    let hom = barrier.hbar / barrier.m;
    let mut tspec = traversal_spec_from(cfg, barrier.d, hom)?;
    if let Some(s) = seed_cli {
        tspec.seed = s;
    }
    cfg.finish()?;

    let points = sweep_absorption(&barrier, &packet, &quad, &[barrier.u0], &tspec)?;
    let point = &points[0];

    let out = ensure_dir(out)?;
    write_times_csv(&out, &point.outcome)?;

    let e0 = packet.central_energy(barrier.m, barrier.hbar);
    let t_d = diffusion_time(barrier.d, barrier.m, barrier.hbar);
    let mut man = Manifest::new("tunneling-time");
    man.set_f64("v0", barrier.v0)
        .set_f64("u0", barrier.u0)
        .set_f64("d", barrier.d)
        .set_f64("central_energy", e0)
        .set("walkers", tspec.n_walkers)
        .set("seed", tspec.seed)
        .set_f64("dt", tspec.dt)
        .set_f64("plateau_time", point.plateau.t_release)
        .set_f64("transmitted_mass", point.plateau.mass);
    record_stats(&mut man, &point.outcome);
    let mut markers = vec![Marker {
        name: "diffusion time".into(),
        x: t_d,
    }];
    man.set_f64("diffusion_time", t_d);
    if let Some(tc) = point.crossing_time {
        man.set_f64("crossing_time", tc);
        markers.push(Marker {
            name: "crossing time".into(),
            x: tc,
        });
    }
    man.write(&out)?;

    if plot {
        if let Some(svg) = times_chart(&point.outcome, &markers) {
            std::fs::write(out.join("times.svg"), svg)?;
        }
    }
    Ok(())
}

/// Traversal times for the two-channel barrier, walkers released in the
/// incident channel.
pub fn channel_time(cfg: &mut Config, out: &Path, seed_cli: Option<u64>, plot: bool) -> Result<()> {
    let packet = packet_from(cfg)?;
    let quad = quad_from(cfg, &packet, 65)?;
    let spec = ChannelSpec::new(
        cfg.req_f64("v0")?,
        cfg.req_f64("coupling")?,
        cfg.req_f64("d")?,
    );
    spec.validate()?;
    let hom = spec.hbar / spec.m;
    let mut tspec = traversal_spec_from(cfg, spec.d, hom)?;
    if let Some(s) = seed_cli {
        tspec.seed = s;
    }
    cfg.finish()?;

    let outcome = run_channel_traversal(&spec, &packet, &quad, &tspec)?;

    let out = ensure_dir(out)?;
    write_times_csv(&out, &outcome)?;

    let e0 = packet.central_energy(spec.m, spec.hbar);
    let t_d = diffusion_time(spec.d, spec.m, spec.hbar);
    let crossed_ch2 = outcome
        .paths
        .iter()
        .filter(|p| p.crossed && p.final_label == Label::Ch2)
        .count();
    let mut man = Manifest::new("channel-time");
    man.set_f64("v0", spec.v0)
        .set_f64("coupling", spec.coupling)
        .set_f64("d", spec.d)
        .set_f64("central_energy", e0)
        .set("walkers", tspec.n_walkers)
        .set("seed", tspec.seed)
        .set_f64("dt", tspec.dt);
    record_stats(&mut man, &outcome);
    man.set("crossed_ending_in_ch2", crossed_ch2)
        .set_f64("diffusion_time", t_d);
    // The decoupled combinations see effective heights v0 -+ g, so both
    // interior crossing times are natural reference marks.
    let mut markers = vec![Marker {
        name: "diffusion time".into(),
        x: t_d,
    }];
    for (tag, sign) in [("minus", -1.0), ("plus", 1.0)] {
        let eff = BarrierSpec::new(spec.v0 + sign * spec.coupling, 0.0, spec.d);
        if let Some(tc) = eff.crossing_time(e0) {
            man.set_f64(&format!("crossing_time_{tag}"), tc);
            markers.push(Marker {
                name: format!("crossing, v0 {} g", if sign < 0.0 { "-" } else { "+" }),
                x: tc,
            });
        }
    }
    man.write(&out)?;

    if plot {
        if let Some(svg) = times_chart(&outcome, &markers) {
            std::fs::write(out.join("times.svg"), svg)?;
        }
    }
    Ok(())
}

/// Rerun the traversal experiment across a list of absorption strengths.
/// The same seed is reused at every point (common random numbers), so
/// differences between points are not resampling noise.
pub fn sweep(cfg: &mut Config, out: &Path, seed_cli: Option<u64>, plot: bool) -> Result<()> {
    let packet = packet_from(cfg)?;
    let quad = quad_from(cfg, &packet, 65)?;
    let base = barrier_from(cfg)?;
    let u0_values = cfg.req_f64_list("u0_values")?;
    let hom = base.hbar / base.m;
    let mut tspec = traversal_spec_from(cfg, base.d, hom)?;
    if let Some(s) = seed_cli {
        tspec.seed = s;
    }
    cfg.finish()?;

    let points = sweep_absorption(&base, &packet, &quad, &u0_values, &tspec)?;

    let out = ensure_dir(out)?;
    let mut csv = CsvWriter::new(&[
        "u0",
        "t_exit",
        "t_plateau",
        "transmitted",
        "crossed_fraction",
        "mean_cross",
        "sem_cross",
        "mean_total",
        "sem_total",
        "mean_reentry",
        "sem_reentry",
        "crossing_time",
        "diffusion_time",
    ]);
    let t_d = diffusion_time(base.d, base.m, base.hbar);
    let mut curve = Vec::new();
    let mut errs = Vec::new();
    for p in &points {
        let s = &p.outcome.stats;
        csv.row(&[
            fmt_f64(p.u0),
            fmt_f64(p.outcome.t_release),
            fmt_f64(p.plateau.t_release),
            fmt_f64(p.plateau.mass),
            fmt_f64(s.n_crossed as f64 / s.n_total as f64),
            fmt_f64(s.mean_to_cross),
            fmt_f64(s.sem_to_cross),
            fmt_f64(s.mean_total),
            fmt_f64(s.sem_total),
            fmt_f64(s.mean_reentry),
            fmt_f64(s.sem_reentry),
            fmt_f64(p.crossing_time.unwrap_or(f64::NAN)),
            fmt_f64(t_d),
        ]);
        curve.push((p.u0, s.mean_to_cross));
        errs.push(s.sem_to_cross);
    }
    csv.write(&out.join("sweep.csv"))?;

    let mut man = Manifest::new("sweep");
    man.set_f64("v0", base.v0)
        .set_f64("d", base.d)
        .set(
            "u0_values",
            u0_values
                .iter()
                .map(|u| u.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        )
        .set("walkers", tspec.n_walkers)
        .set("seed", tspec.seed)
        .set_f64("dt", tspec.dt)
        .set_f64("diffusion_time", t_d)
        .set(
            "common_random_numbers",
            "same seed reused at every absorption strength",
        );
    man.write(&out)?;

    if plot {
        let mut mean = Series::line("mean occupation to cross", curve);
        mean.err = Some(errs);
        let tc = Series::line(
            "interior crossing time",
            points
                .iter()
                .filter_map(|p| p.crossing_time.map(|t| (p.u0, t)))
                .collect(),
        );
        let svg = line_chart(
            "Traversal time against absorption",
            "u0",
            "time",
            &[mean, tc],
            &[],
        );
        std::fs::write(out.join("sweep.svg"), svg)?;
    }
    Ok(())
}

/// Evolve the walker density law on a grid between two field times and
/// compare the result against the quantum density it should reproduce.
pub fn fp_check(cfg: &mut Config, out: &Path, plot: bool) -> Result<()> {
    let packet = packet_from(cfg)?;
    let quad = quad_from(cfg, &packet, 257)?;
    let barrier = barrier_from(cfg)?;
    let field = WaveField::new(barrier.clone(), packet.clone(), quad)?;
    let system = System::Optical(field);

    let t0 = cfg.f64_or("t0", system.reference_start())?;
    let t1 = cfg.req_f64("t1")?;
    let hom = barrier.hbar / barrier.m;
    let x_lo = cfg.f64_or("x_lo", packet.x_center0 - 30.0)?;
    let x_hi = cfg.f64_or("x_hi", barrier.d + hom * packet.k0 * t1.max(0.0) + 30.0)?;
    let cells = cfg.usize_or("cells", 1536)?;
    let dt_fp = cfg.f64_or("dt_fp", 2e-4)?;
    let refresh = cfg.f64_or("refresh", 0.05)?;
    let cap = cfg.f64_or("cap", 60.0)?;
    let floor = cfg.f64_or("floor", 1e-15)?;
    cfg.finish()?;
    if !(t1 > t0) {
        bail!("`t1` must be later than the start time {t0}");
    }

    let grid = GridSpec::new(x_lo, x_hi, cells)?;
    let slice0 = system.slice(t0);
    let mut state = GridDensity::from_function(grid, |x| slice0.eval(x).density(Label::Physical));
    let sink = absorption_sink(&barrier, &grid);
    evolve_density(
        &mut state,
        &system,
        Label::Physical,
        Direction::Forward,
        t0,
        t1 - t0,
        dt_fp,
        refresh,
        &sink,
        floor,
        cap,
    )?;
    let slice1 = system.slice(t1);
    let target = GridDensity::from_function(grid, |x| slice1.eval(x).density(Label::Physical));
    let l1 = l1_shape_distance(&state, &target)?;
    let mass_ratio = state.mass() / target.mass();

    let out = ensure_dir(out)?;
    let mut csv = CsvWriter::new(&["x", "evolved", "quantum"]);
    let mut evolved_pts = Vec::with_capacity(cells);
    let mut quantum_pts = Vec::with_capacity(cells);
    for i in 0..cells {
        let x = grid.center(i);
        csv.row(&[fmt_f64(x), fmt_f64(state.values[i]), fmt_f64(target.values[i])]);
        evolved_pts.push((x, state.values[i]));
        quantum_pts.push((x, target.values[i]));
    }
    csv.write(&out.join("fp_check.csv"))?;

    let mut man = Manifest::new("fp-check");
    man.set_f64("t0", t0)
        .set_f64("t1", t1)
        .set_f64("x_lo", x_lo)
        .set_f64("x_hi", x_hi)
        .set("cells", cells)
        .set_f64("dt_fp", dt_fp)
        .set_f64("l1_shape_distance", l1)
        .set_f64("mass_ratio", mass_ratio);
    man.write(&out)?;

    println!(
        "fp-check: L1 shape distance {l1:.4e}, mass ratio {mass_ratio:.6} at t = {t1}"
    );

    if plot {
        let svg = line_chart(
            "Grid law against the quantum density",
            "x",
            "density",
            &[
                Series::line("evolved", evolved_pts),
                Series::line("quantum", quantum_pts),
            ],
            &[],
        );
        std::fs::write(out.join("fp_check.svg"), svg)?;
    }
    Ok(())
}
