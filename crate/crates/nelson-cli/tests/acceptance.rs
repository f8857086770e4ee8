//! Exit-gate suite: one test per shipping criterion, each printing a
//! single "[acceptance] C<n> <name>: PASS (...)" line on success. The
//! tests share a mutex so heavy ensembles never run concurrently and the
//! per-criterion runtime budgets mean what they say.

use std::io::Write as _;
use std::sync::Mutex;
use std::time::Instant;

use nelson::analysis::{grid_from_moments, l1_shape_distance, GridDensity, GridSpec};
use nelson::dynamics::{
    run_ensemble, run_passage, Direction, InitialLaw, Label, PassageSpec, RunSpec, StepConfig,
    System, TimeGrid,
};
use nelson::{
    absorption_sink, evolve_density, face_exit_time, free_packet, stationary_coefficients,
    sweep_absorption, BarrierSpec, ChannelField, ChannelSpec, PacketSpec, QuadRule,
    QuadratureSpec, TimeStatistics, TraversalSpec, WaveField,
};

static GATE: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|p| p.into_inner())
}

/// Write the verdict line straight to the process stderr so it survives
/// the harness's output capture.
fn report(line: &str) {
    let mut err = std::io::stderr().lock();
    writeln!(err, "{line}").unwrap();
}

fn packet(k0: f64, sigma: f64, x0: f64) -> PacketSpec {
    PacketSpec::new(k0, sigma, x0)
}

fn midpoint65(k0: f64, sigma: f64) -> QuadratureSpec {
    QuadratureSpec::packet_window(k0, sigma, QuadRule::Midpoint, 65)
}

/// Reference density averaged over each histogram bin, so a binned walker
/// count and an oscillatory |psi|^2 are compared as like with like.
fn bin_averaged(grid: GridSpec, mut f: impl FnMut(f64) -> f64) -> GridDensity {
    let sub = 16;
    let h = (grid.hi - grid.lo) / grid.cells as f64;
    let values = (0..grid.cells)
        .map(|i| {
            let left = grid.lo + i as f64 * h;
            (0..sub)
                .map(|j| f(left + (j as f64 + 0.5) * h / sub as f64))
                .sum::<f64>()
                / sub as f64
        })
        .collect();
    GridDensity { grid, values }
}

/// Trapezoid integral of the physical-sector density over [lo, hi].
fn field_mass(system: &System, t: f64, lo: f64, hi: f64, n: usize) -> f64 {
    let slice = system.slice(t);
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        acc += w * slice.eval(lo + i as f64 * h).density(Label::Physical);
    }
    acc * h
}

#[test]
fn c1_unitarity_of_the_transparent_barrier() {
    let _g = serial();
    let t0 = Instant::now();
    let barrier = BarrierSpec::new(2.5, 0.0, 3.0);
    let (k0, sigma) = (1.0, 0.05);

    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    // 257 momentum nodes spanning k0 +- 6 sigma.
    for i in 0..257 {
        let k = (k0 - 6.0 * sigma) + 12.0 * sigma * i as f64 / 256.0;
        let st = stationary_coefficients(&barrier, k).unwrap();
        worst = worst.max((st.reflection_probability() + st.transmission_probability() - 1.0).abs());
        count += 1;
    }
    // Coarse energy scan over (0, 2 v0); the spacing is chosen so no
    // sample lands exactly on e = v0, where the interior exponents
    // degenerate and the solver refuses by design.
    for j in 0..40 {
        let e = 0.05 + (4.95 - 0.05) * j as f64 / 39.0;
        let k = (2.0 * e).sqrt();
        let st = stationary_coefficients(&barrier, k).unwrap();
        worst = worst.max((st.reflection_probability() + st.transmission_probability() - 1.0).abs());
        count += 1;
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(worst < 1e-12, "unitarity defect {worst:.3e}");
    assert!(elapsed < 1.0, "runtime budget exceeded: {elapsed:.2} s");
    report(&format!(
        "[acceptance] C1 unitarity: PASS (max ||R|^2+|T|^2-1| = {worst:.2e} over {count} nodes, {elapsed:.3} s)"
    ));
}

#[test]
fn c2_identity_barrier_and_free_packet() {
    let _g = serial();
    let barrier = BarrierSpec::new(0.0, 0.0, 3.0);
    let mut worst_t: f64 = 0.0;
    let mut worst_r: f64 = 0.0;
    for i in 0..257 {
        let k = 0.7 + 0.6 * i as f64 / 256.0;
        let st = stationary_coefficients(&barrier, k).unwrap();
        worst_t = worst_t.max((st.t - 1.0).norm());
        worst_r = worst_r.max(st.r.norm());
    }
    assert!(worst_t < 1e-12, "|T-1| = {worst_t:.3e}");
    assert!(worst_r < 1e-12, "|R| = {worst_r:.3e}");

    // With no barrier the node superposition must reproduce the
    // closed-form dispersing Gaussian everywhere we look.
    let pk = packet(1.0, 0.05, -30.0);
    let quad = QuadratureSpec::packet_window(1.0, 0.05, QuadRule::GaussLegendre, 257);
    let field = WaveField::new(barrier, pk.clone(), quad).unwrap();
    let mut worst_psi: f64 = 0.0;
    for &t in &[-12.0, 0.0, 9.0] {
        let slice = field.slice(t);
        let center = t;
        let width = (100.0f64 + t * t * 0.0025).sqrt();
        for i in 0..=480 {
            let x = center - 6.0 * width + 12.0 * width * i as f64 / 480.0;
            let diff = (slice.eval(x).psi - free_packet(&pk, 1.0, 1.0, x, t)).norm();
            worst_psi = worst_psi.max(diff);
        }
    }
    assert!(worst_psi < 1e-6, "free-packet defect {worst_psi:.3e}");
    report(&format!(
        "[acceptance] C2 identity barrier: PASS (|T-1| <= {worst_t:.2e}, |R| <= {worst_r:.2e}, free-packet Linf = {worst_psi:.2e})"
    ));
}

#[test]
fn c3_forward_ensembles_reproduce_the_wave_density() {
    let _g = serial();
    let t0 = Instant::now();
    let n_walkers = 20_000;
    let probes = [-150.0, -50.0, 25.0];
    let mut summary = Vec::new();

    for (u0, seed) in [(0.0, 1111u64), (0.25, 2222u64)] {
        let barrier = BarrierSpec::new(2.5, u0, 3.0);
        let pk = packet(1.0, 0.01, -240.0);
        let field = WaveField::new(barrier, pk.clone(), midpoint65(1.0, 0.01)).unwrap();
        let system = System::Optical(field);

        let grid = TimeGrid {
            t_start: -240.0,
            t_end: 25.0,
            dt: 0.01,
            coarse: Some((0.05, -160.0)),
        };
        let mut spec = RunSpec::standard(
            n_walkers,
            seed,
            grid,
            InitialLaw::FieldDensity {
                lo: -440.0,
                hi: -40.0,
                cells: 8000,
            },
        );
        spec.snapshots = probes.to_vec();
        let run = run_ensemble(&system, Direction::Forward, &spec).unwrap();
        assert_eq!(run.snapshots.len(), probes.len());

        for snap in &run.snapshots {
            let xs: Vec<f64> = snap
                .x
                .iter()
                .zip(&snap.label)
                .filter(|(_, &l)| l == Label::Physical)
                .map(|(&x, _)| x)
                .collect();
            let n_phys = xs.len();

            let hgrid = grid_from_moments(&xs, 32, 5.0).unwrap();
            let hist = GridDensity::from_samples(hgrid, &xs).unwrap();
            let slice = system.slice(snap.t);
            let reference = bin_averaged(hgrid, |x| slice.eval(x).density(Label::Physical));
            let l1 = l1_shape_distance(&hist, &reference).unwrap();
            assert!(
                l1 < 0.05,
                "u0 = {u0}, t = {:.2}: walker histogram L1 = {l1:.4}",
                snap.t
            );

            let mass = field_mass(&system, snap.t, -450.0, 120.0, 8000);
            let frac = n_phys as f64 / n_walkers as f64;
            if u0 == 0.0 {
                assert_eq!(n_phys, n_walkers, "no label may flip without absorption");
                assert!((mass - 1.0).abs() < 1e-3, "free-norm defect {mass:.5}");
            } else {
                let sigma_binom = (mass * (1.0 - mass) / n_walkers as f64).sqrt();
                assert!(
                    (frac - mass).abs() < 3.0 * sigma_binom,
                    "u0 = {u0}, t = {:.2}: p-fraction {frac:.5} vs quantum mass {mass:.5} (3 sigma = {:.5})",
                    snap.t,
                    3.0 * sigma_binom
                );
            }
            summary.push(format!("t={:.0}: L1={l1:.3}", snap.t));
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "runtime budget exceeded: {elapsed:.1} s");
    report(&format!(
        "[acceptance] C3 ensemble equivalence: PASS ({} walkers x 2 runs; {}; {elapsed:.0} s)",
        n_walkers,
        summary.join(", ")
    ));
}

#[test]
fn c4_sector_and_channel_counts_are_conserved() {
    let _g = serial();
    let pk = packet(1.0, 0.1, -15.0);
    let quad = midpoint65(1.0, 0.1);
    let n = 3000;
    let grid = TimeGrid {
        t_start: -15.0,
        t_end: 8.0,
        dt: 5e-3,
        coarse: None,
    };
    let init = InitialLaw::FieldDensity {
        lo: -40.0,
        hi: 10.0,
        cells: 4000,
    };
    let probes = vec![-10.0, -5.0, 0.0, 4.0, 8.0];
    let mut checked = 0usize;

    let optical = System::Optical(
        WaveField::new(BarrierSpec::new(2.5, 1.0, 3.0), pk.clone(), quad.clone()).unwrap(),
    );
    let mut spec = RunSpec::standard(n, 97, grid, init);
    spec.snapshots = probes.clone();
    let run = run_ensemble(&optical, Direction::Forward, &spec).unwrap();
    for snap in &run.snapshots {
        assert_eq!(snap.label.len(), n);
        assert_eq!(snap.count(Label::Physical) + snap.count(Label::Absorbed), n);
        checked += 1;
    }
    assert_eq!(run.final_label.len(), n);

    let coupled = System::Coupled(
        ChannelField::new(ChannelSpec::new(2.5, 1.0, 3.0), pk, quad).unwrap(),
    );
    let mut spec = RunSpec::standard(n, 98, grid, init);
    spec.initial_label = Label::Ch1;
    spec.snapshots = probes;
    let run = run_ensemble(&coupled, Direction::Forward, &spec).unwrap();
    for snap in &run.snapshots {
        assert_eq!(snap.label.len(), n);
        assert_eq!(snap.count(Label::Ch1) + snap.count(Label::Ch2), n);
        checked += 1;
    }

    // Walkers are never created or destroyed mid-run, and a label is
    // always exactly one enum variant, so the snapshot identities above
    // hold at every intermediate step by construction.
    report(&format!(
        "[acceptance] C4 sector conservation: PASS (N_p+N_u = N and N_1+N_2 = N at {checked} snapshots of {n} walkers)"
    ));
}

#[test]
fn c5_jump_rates_balance_pointwise() {
    let _g = serial();
    let field = ChannelField::new(
        ChannelSpec::new(2.5, 1.0, 3.0),
        packet(1.0, 0.05, -30.0),
        QuadratureSpec::packet_window(1.0, 0.05, QuadRule::GaussLegendre, 129),
    )
    .unwrap();
    let slice = field.slice(0.8);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..200 {
        let x = -5.0 + 13.0 * i as f64 / 199.0;
        let ev = slice.eval(x);
        let w1p1 = ev.signed_rate(1) * ev.density(1);
        let w2p2 = ev.signed_rate(2) * ev.density(2);
        worst = worst.max((w1p1 + w2p2).abs());
        scale = scale.max(w1p1.abs().max(w2p2.abs()));
    }
    assert!(scale > 0.0, "probe grid must see a live coupling region");
    assert!(
        worst < 1e-10 * scale,
        "rate balance defect {worst:.3e} vs scale {scale:.3e}"
    );
    report(&format!(
        "[acceptance] C5 jump-rate antisymmetry: PASS (max |W12 P1 + W21 P2| = {worst:.2e} against scale {scale:.2e})"
    ));
}

#[test]
fn c6_absorption_shortens_the_traversal_time() {
    let _g = serial();
    let t0 = Instant::now();
    let base = BarrierSpec::new(2.5, 0.0, 3.0);
    let pk = packet(1.0, 0.05, -30.0);
    let u0_values = [0.0, 0.25, 0.5, 1.0];
    let tspec = TraversalSpec::standard(10_000, 90210, 1.25e-3, 3.0, 1.0);
    let points = sweep_absorption(&base, &pk, &midpoint65(1.0, 0.05), &u0_values, &tspec).unwrap();

    let mut desc = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (&w[0].outcome.stats, &w[1].outcome.stats);
        let gap = a.mean_to_cross - b.mean_to_cross;
        let sem = (a.sem_to_cross.powi(2) + b.sem_to_cross.powi(2)).sqrt();
        assert!(
            gap > 0.0,
            "mean passing time must fall with absorption: {} -> {}",
            a.mean_to_cross,
            b.mean_to_cross
        );
        assert!(
            gap > 2.0 * sem,
            "adjacent points separated by only {:.1} standard errors",
            gap / sem
        );
        desc.push(format!("{:.1}se", gap / sem));
    }
    let means: Vec<String> = points
        .iter()
        .map(|p| format!("{:.3}+-{:.3}", p.outcome.stats.mean_to_cross, p.outcome.stats.sem_to_cross))
        .collect();
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 600.0, "runtime budget exceeded: {elapsed:.1} s");
    report(&format!(
        "[acceptance] C6 monotonic absorption: PASS (mean tau_p = [{}] for U0/E0 = 0, 0.5, 1, 2; separations {}; {elapsed:.0} s)",
        means.join(", "),
        desc.join(", ")
    ));
}

#[test]
fn c7_thick_barrier_times_track_the_current_time() {
    let _g = serial();
    let base = BarrierSpec::new(2.5, 0.0, 6.0);
    let pk = packet(1.0, 0.05, -30.0);
    let e0 = pk.central_energy(1.0, 1.0);
    let tspec = TraversalSpec::standard(4000, 777, 2e-3, 6.0, 1.0);
    let points = sweep_absorption(&base, &pk, &midpoint65(1.0, 0.05), &[0.0, 0.5], &tspec).unwrap();

    let mut tc = Vec::new();
    let mut desc = Vec::new();
    for p in &points {
        let t_c = p.crossing_time.expect("under-barrier point has a current time");
        let mean = p.outcome.stats.mean_to_cross;
        let rel = (mean / t_c - 1.0).abs();
        assert!(
            rel < 0.25,
            "u0 = {}: mean tau_p {mean:.3} vs t_c {t_c:.3} off by {:.0}%",
            p.u0,
            rel * 100.0
        );
        tc.push(t_c);
        desc.push(format!("u0={}: {mean:.2} vs t_c={t_c:.3}", p.u0));
    }
    assert!(
        tc[1] < tc[0],
        "absorption must speed up the current time: {} vs {}",
        tc[1],
        tc[0]
    );
    assert_eq!(e0, 0.5);
    report(&format!(
        "[acceptance] C7 WKB current time: PASS (kappa*d = 12; {}; t_c falls {:.3} -> {:.3})",
        desc.join("; "),
        tc[0],
        tc[1]
    ));
}

#[test]
fn c8_channel_times_switch_regime_at_the_critical_ratio() {
    let _g = serial();
    let pk = packet(1.0, 0.05, -30.0);
    let e0 = pk.central_energy(1.0, 1.0);
    // (v0 - g)/e0 = 0.6: the lower combination propagates over its
    // barrier with momentum k_minus; (v0 - g)/e0 = 2 on a thick barrier:
    // both combinations tunnel and kappa_minus sets the pace.
    let cases = [
        (ChannelSpec::new(2.5, 2.2, 3.0), (2.0 * (e0 - 0.3)).sqrt(), "over"),
        (ChannelSpec::new(2.5, 1.5, 8.0), (2.0 * (1.0 - e0)).sqrt(), "under"),
    ];
    let mut desc = Vec::new();
    for (spec, pace, regime) in cases {
        let d = spec.d;
        let t_ref = d / pace;
        let field = ChannelField::new(spec.clone(), pk.clone(), midpoint65(1.0, 0.05)).unwrap();
        let system = System::Coupled(field);
        let t_hi = (d + 3.0 / pk.sigma) / pk.k0 + 20.0;
        let t_exit = face_exit_time(&system, t_hi).unwrap();
        for label in [Label::Ch1, Label::Ch2] {
            let pspec = PassageSpec {
                n_walkers: 4000,
                seed: 4242,
                t_release: t_exit,
                dt: 2e-3,
                x_release: d + 1e-6,
                initial_label: label,
                escape_x: -1.5,
                max_elapsed: 5.0 * d * d,
                step: StepConfig::default(),
                scan: (-3.0, d + 8.0 + 1e-6, 800),
                floor_refresh: 250,
                floor_rel: 1e-12,
                fallback_budget: 0.01,
                no_cross_budget: 0.02,
            };
            let run = run_passage(&system, &pspec).unwrap();
            let stats = TimeStatistics::from_paths(&run.paths).unwrap();
            let rel = (stats.mean_to_cross / t_ref - 1.0).abs();
            assert!(
                rel < 0.25,
                "{regime}-barrier case, release in {}: mean {:.3} vs reference {t_ref:.3} off by {:.0}%",
                label.as_str(),
                stats.mean_to_cross,
                rel * 100.0
            );
            desc.push(format!(
                "{regime} {}: {:.2}/{t_ref:.2}",
                label.as_str(),
                stats.mean_to_cross
            ));
        }
    }
    report(&format!(
        "[acceptance] C8 channel regimes: PASS (mean/reference {}; regime follows (v0-g)/e0 across 1)",
        desc.join(", ")
    ));
}

#[test]
fn c9_grid_law_tracks_wave_and_walkers() {
    let _g = serial();
    let barrier = BarrierSpec::new(2.5, 0.25, 3.0);
    let pk = packet(1.0, 0.1, -20.0);
    let field = WaveField::new(barrier.clone(), pk.clone(), midpoint65(1.0, 0.1)).unwrap();
    let system = System::Optical(field);
    let (t_start, t_end) = (-20.0, 3.0);

    let grid = GridSpec::new(-45.0, 12.0, 4096).unwrap();
    let slice0 = system.slice(t_start);
    let mut state = GridDensity::from_function(grid, |x| slice0.eval(x).density(Label::Physical));
    let sink = absorption_sink(&barrier, &grid);
    evolve_density(
        &mut state,
        &system,
        Label::Physical,
        Direction::Forward,
        t_start,
        t_end - t_start,
        6e-5,
        0.05,
        &sink,
        1e-15,
        30.0,
    )
    .unwrap();
    let slice1 = system.slice(t_end);
    let target = GridDensity::from_function(grid, |x| slice1.eval(x).density(Label::Physical));
    let l1_wave = l1_shape_distance(&state, &target).unwrap();
    assert!(l1_wave < 0.03, "grid law vs |psi|^2: L1 = {l1_wave:.4}");

    let rspec = RunSpec::standard(
        20_000,
        5150,
        TimeGrid {
            t_start,
            t_end,
            dt: 4e-3,
            coarse: None,
        },
        InitialLaw::FieldDensity {
            lo: -42.0,
            hi: 2.0,
            cells: 4000,
        },
    );
    let run = run_ensemble(&system, Direction::Forward, &rspec).unwrap();
    let xs: Vec<f64> = run
        .final_x
        .iter()
        .zip(&run.final_label)
        .filter(|(_, &l)| l == Label::Physical)
        .map(|(&x, _)| x)
        .collect();
    let coarse_grid = GridSpec::new(-45.0, 12.0, 32).unwrap();
    let hist = GridDensity::from_samples(coarse_grid, &xs).unwrap();
    let factor = 4096 / 32;
    let rebinned = GridDensity {
        grid: coarse_grid,
        values: (0..32)
            .map(|i| state.values[i * factor..(i + 1) * factor].iter().sum::<f64>() / factor as f64)
            .collect(),
    };
    let l1_mc = l1_shape_distance(&hist, &rebinned).unwrap();
    assert!(l1_mc < 0.05, "grid law vs walker histogram: L1 = {l1_mc:.4}");
    report(&format!(
        "[acceptance] C9 grid-law equivalence: PASS (vs wave L1 = {l1_wave:.4} on 4096 cells, vs walkers L1 = {l1_mc:.4} on 32 bins)"
    ));
}

#[test]
fn c10_outputs_are_bytewise_deterministic_across_thread_counts() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let conf_tt = dir.path().join("tt.conf");
    std::fs::write(
        &conf_tt,
        "v0 = 2.5\nu0 = 0.5\nd = 3.0\nk0 = 1.0\nsigma = 0.05\n\
         walkers = 400\nseed = 31\ndt = 2.5e-3\n",
    )
    .unwrap();
    let conf_paths = dir.path().join("pa.conf");
    std::fs::write(
        &conf_paths,
        "v0 = 2.5\nu0 = 1.0\nd = 3.0\nk0 = 1.0\nsigma = 0.1\nx_center0 = -15\n\
         walkers = 500\nseed = 31\ndt = 5e-3\nt_end = 5\ntimes = -5, 0, 5\n",
    )
    .unwrap();

    let run = |mode: &str, conf: &std::path::Path, threads: &str, tag: &str| {
        let out_dir = dir.path().join(format!("{mode}_{tag}"));
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_nelson"))
            .args([mode, "--config"])
            .arg(conf)
            .arg("--out-dir")
            .arg(&out_dir)
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{mode} with {threads} threads failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out_dir
    };

    let mut compared = 0usize;
    for (mode, conf, table) in [
        ("tunneling-time", &conf_tt, "times.csv"),
        ("paths", &conf_paths, "paths.csv"),
    ] {
        let one = run(mode, conf, "1", "one");
        let four = run(mode, conf, "4", "four");
        for file in [table, "manifest.txt"] {
            let a = std::fs::read(one.join(file)).unwrap();
            let b = std::fs::read(four.join(file)).unwrap();
            assert_eq!(a, b, "{mode}/{file} differs between 1 and 4 threads");
            compared += 1;
        }
    }
    report(&format!(
        "[acceptance] C10 determinism: PASS ({compared} output files byte-identical between RAYON_NUM_THREADS=1 and 4)"
    ));
}
