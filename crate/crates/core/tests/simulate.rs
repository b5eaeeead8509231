mod common;

use proptest::prelude::*;
use specstab::certificate::{search_certificate, CertificateQuery};
use specstab::homogenize::{reduce, Measurement, PlantSpec};
use specstab::linalg::spectral_abscissa;
use specstab::simulate::*;
use specstab::sturm_liouville::{analytic_spectrum, grid_derivative, BoundarySpec, CoefficientPair, Profile};
use specstab::synthesis::{assemble_closed_loop, synthesize_gains, GainSet, PoleRule};
use specstab::Error;

fn run_preset(preset: &specstab::presets::Preset, n: usize, t_end: f64) -> (specstab::homogenize::ReducedPlant, GainSet, SimResult) {
    let (r, g) = common::reduced(preset, 51);
    let a = assemble_sim(&r, &g, n, 50).unwrap();
    let cfg = SimConfig {
        t_end,
        ..SimConfig::new(preset.z0.clone(), preset.u0)
    };
    let res = run(&a, &cfg, &r, &g).unwrap();
    (r, g, res)
}

#[test]
fn closed_loop_decays_for_both_presets() {
    for (preset, n) in [(common::dirichlet(), 3), (common::neumann(), 2)] {
        let (r, g) = common::reduced(&preset, 51);
        let a = assemble_sim(&r, &g, n, 50).unwrap();
        assert_eq!(a.nrows(), 1 + 50 + n);
        assert!(spectral_abscissa(&a) < -0.5);
        let res = run(&a, &SimConfig::new(preset.z0.clone(), preset.u0), &r, &g).unwrap();
        assert_eq!(res.times.len(), 3001);
        let rate = fit_decay(&res.times, &res.eta, 1.0, 3.0).unwrap();
        assert!(rate >= 0.5, "{}: {rate}", preset.name);
    }
}

#[test]
fn fields_respect_boundary_conditions() {
    for (preset, n) in [(common::dirichlet(), 3), (common::neumann(), 2)] {
        let (r, _, res) = run_preset(&preset, n, 0.5);
        let s = &r.spectrum;
        for k in (0..res.times.len()).step_by(50) {
            let z = res.field_z(s, k);
            assert!((z[s.grid_size] - res.u[k]).abs() < 1e-8);
            let w = res.field_w(s, k);
            assert!(w[s.grid_size].abs() < 1e-8);
            match preset.plant.boundary() {
                BoundarySpec::NeumannDirichlet => assert!(grid_derivative(&w, s.h())[0].abs() < 1e-6),
                BoundarySpec::DirichletDirichlet => assert!(w[0].abs() < 1e-6),
            }
        }
    }
}

#[test]
fn energy_identity_for_reconstructed_fields() {
    let (r, _, res) = run_preset(&common::dirichlet(), 3, 0.2);
    let s = &r.spectrum;
    for k in [0, 10, 100, 200] {
        let w = res.field_w(s, k);
        let dw = grid_derivative(&w, s.h());
        let quad = s.inner(&dw, &dw).unwrap();
        assert!((quad - res.energy[k]).abs() <= 1e-4 * res.energy[k], "{quad} vs {}", res.energy[k]);
    }
}

#[test]
fn halving_step_gives_same_trajectory() {
    let preset = common::dirichlet();
    let (r, g) = common::reduced(&preset, 51);
    let a = assemble_sim(&r, &g, 3, 50).unwrap();
    let coarse = run(&a, &SimConfig { t_end: 0.5, dt: 1e-3, ..SimConfig::new(preset.z0.clone(), preset.u0) }, &r, &g).unwrap();
    let fine = run(&a, &SimConfig { t_end: 0.5, dt: 5e-4, ..SimConfig::new(preset.z0.clone(), preset.u0) }, &r, &g).unwrap();
    for k in 0..coarse.times.len() {
        let scale = coarse.eta[k];
        assert!((coarse.u[k] - fine.u[2 * k]).abs() <= 1e-10 * scale);
        for (a, b) in coarse.w[k].iter().zip(&fine.w[2 * k]) {
            assert!((a - b).abs() <= 1e-10 * scale);
        }
        for (a, b) in coarse.w_hat[k].iter().zip(&fine.w_hat[2 * k]) {
            assert!((a - b).abs() <= 1e-10 * scale);
        }
    }
}

#[test]
fn lyapunov_functional_decays_at_certified_rate() {
    for (preset, n) in [(common::dirichlet(), 3), (common::neumann(), 2)] {
        let (r, g, res) = run_preset(&preset, n, 3.0);
        let model = assemble_closed_loop(&r, &g, n).unwrap();
        let cert = search_certificate(&model, &r, &CertificateQuery::new(n, 2.0)).unwrap();
        assert!(cert.feasible);
        let trace = lyapunov_trace(&res, &cert).unwrap();
        assert!(trace.max_increment <= 1e-6 * trace.values[0], "{}: {}", preset.name, trace.max_increment);

        let mut corrupted = cert.clone();
        corrupted.p.iter_mut().flatten().for_each(|v| *v = -*v);
        corrupted.gamma = -corrupted.gamma;
        let bad = lyapunov_trace(&res, &corrupted).unwrap();
        assert!(bad.max_increment > 1e-6 * bad.values[0].abs());

        let mut infeasible = cert.clone();
        infeasible.feasible = false;
        assert!(matches!(lyapunov_trace(&res, &infeasible), Err(Error::CertificateRequired)));
    }
}

#[test]
fn zero_initial_data_stays_at_rest() {
    let preset = common::dirichlet();
    let (r, g) = common::reduced(&preset, 51);
    let a = assemble_sim(&r, &g, 3, 50).unwrap();
    let cfg = SimConfig {
        t_end: 0.1,
        ..SimConfig::new(Profile::Constant(0.0), 0.0)
    };
    let res = run(&a, &cfg, &r, &g).unwrap();
    let model = assemble_closed_loop(&r, &g, 3).unwrap();
    let cert = search_certificate(&model, &r, &CertificateQuery::new(3, 2.0)).unwrap();
    let trace = lyapunov_trace(&res, &cert).unwrap();
    assert!(trace.values.iter().all(|&v| v == 0.0));
}

#[test]
fn open_loop_grows_at_unstable_mode_rate() {
    let preset = common::dirichlet();
    let (r, _) = common::reduced(&preset, 51);
    let zero = GainSet::zeroed(r.n0);
    let a = assemble_sim(&r, &zero, 3, 50).unwrap();
    let expected = 3.0 - std::f64::consts::PI.powi(2) / 4.0;
    assert!((spectral_abscissa(&a) - expected).abs() < 1e-9);
    // the constant input adds a steady offset that fades relative to the growing mode
    let cfg = SimConfig {
        t_end: 20.0,
        dt: 5e-2,
        ..SimConfig::new(preset.z0.clone(), preset.u0)
    };
    let res = run(&a, &cfg, &r, &zero).unwrap();
    let rate = fit_decay(&res.times, &res.eta, 15.0, 20.0).unwrap();
    assert!((rate + expected).abs() < 1e-3, "{rate}");
}

#[test]
fn full_order_observer_sees_no_tail() {
    let preset = common::neumann();
    let (r, g) = common::reduced(&preset, 21);
    let a = assemble_sim(&r, &g, 20, 20).unwrap();
    let cfg = SimConfig {
        n_sim: 20,
        t_end: 0.2,
        ..SimConfig::new(preset.z0.clone(), preset.u0)
    };
    let res = run(&a, &cfg, &r, &g).unwrap();
    assert!(res.zeta.iter().all(|&z| z == 0.0));
    // errors of the unobserved modes evolve on their own
    for k in [50, 100, 200] {
        for mode in [2usize, 3, 6] {
            let e0 = res.w[0][mode - 1] - res.w_hat[0][mode - 1];
            let ek = res.w[k][mode - 1] - res.w_hat[k][mode - 1];
            let expected = e0 * (r.open_loop_rate(mode) * res.times[k]).exp();
            assert!((ek - expected).abs() < 1e-12 * res.eta[0], "mode {mode}: {ek} vs {expected}");
        }
    }
}

#[test]
fn bounded_output_has_constant_feedthrough() {
    let plant = PlantSpec::new(
        CoefficientPair::constant(1.0, 0.0).unwrap(),
        3.0,
        Measurement::Bounded(Profile::Constant(1.0)),
        0.5,
    )
    .unwrap();
    let s = analytic_spectrum(BoundarySpec::NeumannDirichlet, 31, 2000).unwrap();
    let r = reduce(&plant, s, 30).unwrap();
    assert!((r.feedthrough - 1.0 / 3.0).abs() < 1e-12);
    let g = synthesize_gains(&r, &PoleRule::Shifted).unwrap();
    let a = assemble_sim(&r, &g, 4, 30).unwrap();
    let cfg = SimConfig {
        n_sim: 30,
        t_end: 0.3,
        ..SimConfig::new(Profile::Polynomial(vec![1.0, 0.0, 1.0]), 2.0)
    };
    let res = run(&a, &cfg, &r, &g).unwrap();
    for k in (0..res.times.len()).step_by(25) {
        let y = res.measured_output(&r, k).unwrap();
        let y_tilde = res.homogenized_output(&r, k);
        assert!((y - r.feedthrough * res.u[k] - y_tilde).abs() < 1e-8);
    }
}

#[test]
fn argument_errors() {
    let preset = common::dirichlet();
    let (r, g) = common::reduced(&preset, 51);
    assert!(matches!(assemble_sim(&r, &g, 60, 50), Err(Error::OrderMismatch(_))));
    assert!(matches!(assemble_sim(&r, &g, 1, 50), Err(Error::OrderMismatch(_))));
    let a = assemble_sim(&r, &g, 3, 50).unwrap();
    let bad = SimConfig::new(preset.z0.clone(), 1.0);
    assert!(matches!(run(&a, &bad, &r, &g), Err(Error::IncompatibleInitialCondition(_))));
    let sloped = SimConfig::new(Profile::Polynomial(vec![1.0, 1.0]), 2.0);
    assert!(matches!(run(&a, &sloped, &r, &g), Err(Error::IncompatibleInitialCondition(_))));
}

#[test]
fn csv_writers_emit_expected_layout() {
    let dir = std::env::temp_dir().join(format!("specstab-csv-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let series = dir.join("s.csv");
    write_series_csv(&series, &[0.0, 0.5], &[1.0, 0.25]).unwrap();
    let text = std::fs::read_to_string(&series).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,value");
    assert_eq!(lines.len(), 3);
    let parsed: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(parsed, vec![0.5, 0.25]);
    let field = dir.join("f.csv");
    write_field_csv(&field, &[0.0, 1.0], &[(0.0, vec![1.0, 2.0]), (0.1, vec![3.0, 4.0])]).unwrap();
    let text = std::fs::read_to_string(&field).unwrap();
    assert_eq!(text.lines().next(), Some("x,t,value"));
    assert_eq!(text.lines().count(), 5);
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn compatible_profiles_keep_homogeneous_boundary_values(
        u0 in -2.0f64..2.0,
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        // z0 = u0 + a (x² - 1) + b (x³ - 1) has z0'(0) = 0, z0(1) = u0
        let preset = common::dirichlet();
        let (r, g) = common::reduced(&preset, 21);
        let sim = assemble_sim(&r, &g, 3, 20).unwrap();
        let z0 = Profile::Polynomial(vec![u0 - a - b, 0.0, a, b]);
        let cfg = SimConfig { n_sim: 20, t_end: 0.05, dt: 1e-3, z0, u0 };
        let res = run(&sim, &cfg, &r, &g).unwrap();
        let s = &r.spectrum;
        for k in [0usize, 25, 50] {
            let w = res.field_w(s, k);
            prop_assert!(w[s.grid_size].abs() < 1e-8);
            prop_assert!(grid_derivative(&w, s.h())[0].abs() < 1e-6);
            let z = res.field_z(s, k);
            prop_assert!((z[s.grid_size] - res.u[k]).abs() < 1e-8);
            let dw = grid_derivative(&w, s.h());
            let quad = s.inner(&dw, &dw).unwrap();
            prop_assert!((quad - res.energy[k]).abs() <= 1e-4 * res.energy[k].max(1e-12));
        }
    }
}
