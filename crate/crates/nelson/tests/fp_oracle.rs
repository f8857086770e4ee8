//! Cross-validation between the three ways this crate can produce a
//! density: the spectral field itself, the walker ensemble, and the
//! independent grid integration of the same drift-diffusion(-sink) law.
//! Agreement between the ensemble and the grid integrator is the
//! consistency check between the stochastic stepper and the density
//! equation it is supposed to realize; agreement with |psi|^2 is the
//! equivalence that makes the whole construction quantum mechanics.

use nelson::analysis::{l1_shape_distance, GridDensity, GridSpec};
use nelson::dynamics::{Direction, InitialLaw, Label, RunSpec, System, TimeGrid};
use nelson::fp::evolve_density;
use nelson::{
    absorption_sink, face_exit_time, run_ensemble, wkb_closed_form, BarrierSpec, PacketSpec,
    QuadRule, QuadratureSpec, WaveField,
};

/// Block-average a fine FP grid down to a histogram-friendly one. Factor
/// must divide the cell count; densities average, so mass is preserved.
fn rebin(fine: &GridDensity, factor: usize) -> GridDensity {
    assert_eq!(fine.grid.cells % factor, 0);
    let cells = fine.grid.cells / factor;
    let grid = GridSpec::new(fine.grid.lo, fine.grid.hi, cells).unwrap();
    let values = (0..cells)
        .map(|i| fine.values[i * factor..(i + 1) * factor].iter().sum::<f64>() / factor as f64)
        .collect();
    GridDensity { grid, values }
}

fn absorptive_field() -> (BarrierSpec, PacketSpec, WaveField) {
    let barrier = BarrierSpec::new(2.5, 1.0, 3.0);
    let packet = PacketSpec::new(1.0, 0.08, -10.0);
    let quad = QuadratureSpec::packet_window(1.0, 0.08, QuadRule::Midpoint, 65);
    let field = WaveField::new(barrier.clone(), packet.clone(), quad).unwrap();
    (barrier, packet, field)
}

#[test]
fn grid_law_reproduces_the_quantum_density() {
    // Deterministic half of the equivalence: integrating the
    // drift-diffusion-sink law with drift read off the field must land on
    // |psi|^2 at the later time. First-order upwind transport adds
    // numerical diffusion of order v h / 2, which bounds the residual.
    let (barrier, _, field) = absorptive_field();
    let system = System::Optical(field);
    let grid = GridSpec::new(-40.0, 10.0, 1536).unwrap();
    let t0 = -10.0;
    let t1 = 5.0;
    let slice0 = system.slice(t0);
    let mut state = GridDensity::from_function(grid, |x| slice0.eval(x).density(Label::Physical));
    drop(slice0);
    let sink = absorption_sink(&barrier, &grid);
    evolve_density(
        &mut state,
        &system,
        Label::Physical,
        Direction::Forward,
        t0,
        t1 - t0,
        2e-4,
        0.05,
        &sink,
        1e-15,
        60.0,
    )
    .unwrap();
    let slice1 = system.slice(t1);
    let target = GridDensity::from_function(grid, |x| slice1.eval(x).density(Label::Physical));
    let dist = l1_shape_distance(&state, &target).unwrap();
    assert!(dist < 0.06, "shape distance {dist}");
    let mass_err = (state.mass() - target.mass()).abs() / target.mass();
    assert!(mass_err < 0.02, "mass mismatch {mass_err}");
}

#[test]
fn walkers_and_grid_law_agree_forward() {
    // Stochastic half: the ensemble of surviving (physical-labeled)
    // walkers and the grid integration of the same law, from the same
    // initial density, must agree in shape and in surviving fraction.
    let (barrier, _, field) = absorptive_field();
    let system = System::Optical(field);
    let t0 = -10.0;
    let t1 = 5.0;
    let n_walkers = 6000;
    let tg = TimeGrid {
        t_start: t0,
        t_end: t1,
        dt: 4e-3,
        coarse: None,
    };
    let init = InitialLaw::FieldDensity {
        lo: -40.0,
        hi: 10.0,
        cells: 2000,
    };
    let spec = RunSpec::standard(n_walkers, 5150, tg, init);
    let run = run_ensemble(&system, Direction::Forward, &spec).unwrap();
    let surviving: Vec<f64> = run
        .final_x
        .iter()
        .zip(&run.final_label)
        .filter(|(_, &l)| l == Label::Physical)
        .map(|(&x, _)| x)
        .collect();
    let mc_fraction = surviving.len() as f64 / n_walkers as f64;

    let grid = GridSpec::new(-40.0, 10.0, 1536).unwrap();
    let slice0 = system.slice(t0);
    let mut state = GridDensity::from_function(grid, |x| slice0.eval(x).density(Label::Physical));
    drop(slice0);
    let m0 = state.mass();
    let sink = absorption_sink(&barrier, &grid);
    evolve_density(
        &mut state,
        &system,
        Label::Physical,
        Direction::Forward,
        t0,
        t1 - t0,
        2e-4,
        0.05,
        &sink,
        1e-15,
        60.0,
    )
    .unwrap();
    let fp_fraction = state.mass() / m0;
    assert!(
        (mc_fraction - fp_fraction).abs() < 0.025,
        "surviving fraction: walkers {mc_fraction}, grid law {fp_fraction}"
    );

    let hist_grid = GridSpec::new(-40.0, 10.0, 64).unwrap();
    let hist = GridDensity::from_samples(hist_grid, &surviving).unwrap();
    let dist = l1_shape_distance(&hist, &rebin(&state, 24)).unwrap();
    assert!(dist < 0.1, "shape distance {dist}");
}

#[test]
fn backward_walk_under_a_thick_barrier_matches_grid_law_and_closed_form() {
    // Backward evolution of walkers released at the far face at the exit
    // peak. Into the barrier the backward drift is nearly uniform, so
    // after 0.9 time units the ensemble should match both the grid
    // integration of the tabulated -b* field (tight) and the closed-form
    // drifting Gaussian (loose: it ignores the face structure).
    let barrier = BarrierSpec::new(2.5, 0.5, 6.0);
    let packet = PacketSpec::new(1.0, 0.05, -15.0);
    let quad = QuadratureSpec::packet_window(1.0, 0.05, QuadRule::Midpoint, 65);
    let field = WaveField::new(barrier.clone(), packet, quad).unwrap();
    let system = System::Optical(field);
    let t_exit = face_exit_time(&system, 90.0).unwrap();
    let tau = 0.9;

    let tg = TimeGrid {
        t_start: t_exit,
        t_end: t_exit - tau,
        dt: 2e-3,
        coarse: None,
    };
    let spec = RunSpec::standard(
        15_000,
        31_337,
        tg,
        InitialLaw::Point { x: 6.0 + 1e-6 },
    );
    let run = run_ensemble(&system, Direction::Backward, &spec).unwrap();
    assert!(run.counters.fallback_fraction() < 1e-3);

    // Grid law: start from a just-released narrow Gaussian (backward age
    // tau0) so the delta is representable, then integrate the rest.
    let grid = GridSpec::new(-3.0, 9.8, 1536).unwrap();
    let tau0 = 0.005;
    let var0 = tau0;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * var0).sqrt();
    let mut state = GridDensity::from_function(grid, |x| {
        norm * (-(x - 6.0) * (x - 6.0) / (2.0 * var0)).exp()
    });
    let rate = vec![0.0; grid.cells];
    evolve_density(
        &mut state,
        &system,
        Label::Physical,
        Direction::Backward,
        t_exit - tau0,
        tau - tau0,
        2e-5,
        0.05,
        &rate,
        1e-15,
        60.0,
    )
    .unwrap();

    let hist_grid = GridSpec::new(-3.0, 9.8, 64).unwrap();
    let hist = GridDensity::from_samples(hist_grid, &run.final_x).unwrap();
    let dist_fp = l1_shape_distance(&hist, &rebin(&state, 24)).unwrap();
    assert!(dist_fp < 0.1, "walkers vs grid law: {dist_fp}");

    let wkb = wkb_closed_form(&barrier, 0.5, -tau, grid).unwrap();
    let dist_wkb = l1_shape_distance(&hist, &rebin(&wkb, 24)).unwrap();
    assert!(dist_wkb < 0.2, "walkers vs closed form: {dist_wkb}");
}
