//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use specstab::certificate::*;
use specstab::homogenize::{boundary_flux_residual, reduce, tail_constants, ReducedPlant, DEFAULT_EPS};
use specstab::linalg::{max_sym_eig, spectral_abscissa};
use specstab::presets::{self, Preset};
use specstab::simulate::*;
use specstab::sturm_liouville::*;
use specstab::synthesis::{assemble_closed_loop, synthesize_gains, GainSet, PoleRule};
use specstab::Exec;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Instant, limit: Duration) -> Result<Duration, String> {
    let e = t.elapsed();
    ensure(e < limit, || format!("took {e:?}, limit {limit:?}"))?;
    Ok(e)
}

fn pipeline(preset: &Preset, modes: usize) -> (ReducedPlant, GainSet) {
    let spectrum = compute_spectrum(
        &preset.plant.coeffs,
        preset.plant.boundary(),
        modes,
        DEFAULT_GRID_SIZE,
        Exec::default(),
    )
    .unwrap();
    let r = reduce(&preset.plant, spectrum, modes - 1).unwrap();
    let g = synthesize_gains(&r, &PoleRule::Shifted).unwrap();
    (r, g)
}

fn gains(preset: Preset, k_ref: [f64; 2], l_ref: f64) -> Outcome {
    let t = Instant::now();
    let (_, g) = pipeline(&preset, 51);
    let e = within(t, Duration::from_secs(1))?;
    let dk = (g.k[0] - k_ref[0]).abs().max((g.k[1] - k_ref[1]).abs());
    let dl = (g.l[0] - l_ref).abs();
    ensure(dk < 1e-3 && dl < 1e-3, || format!("K = {:?}, L = {:?}", g.k, g.l))?;
    Ok(format!("K = [{:.5}, {:.5}], L = {:.5}, {e:?}", g.k[0], g.k[1], g.l[0]))
}

fn certificates() -> Outcome {
    let t = Instant::now();
    let mut notes = Vec::new();
    for (preset, n_reference, vars, blocks) in [
        (presets::dirichlet_example().unwrap(), 3, 30, 5),
        (presets::neumann_example().unwrap(), 2, 17, 6),
    ] {
        let (r, g) = pipeline(&preset, 51);
        let model = assemble_closed_loop(&r, &g, n_reference).unwrap();
        let problem = build_sdpa(&model, &r, 2.0, DEFAULT_EPS).unwrap();
        let parsed = SdpaProblem::parse(&problem.to_text()).map_err(|e| e.to_string())?;
        ensure(parsed == problem && problem.n_vars == vars && problem.n_blocks() == blocks, || {
            format!("{}: SDPA export malformed", preset.name)
        })?;

        let sweep = order_sweep(&r, &g, 10, &DEFAULT_ALPHAS, DEFAULT_EPS, &SearchPolicy::default(), Exec::default())
            .map_err(|e| e.to_string())?;
        for o in sweep.iter().filter(|o| o.certificate.feasible) {
            let model = assemble_closed_loop(&r, &g, o.n).unwrap();
            let again = o.certificate.reverify(&model, &r).map_err(|e| e.to_string())?;
            let c = &again;
            ensure(
                c.feasible
                    && c.theta1_max_eig <= 0.0
                    && c.theta2 <= 0.0
                    && c.p_min_eig > 0.0
                    && c.theta3.is_none_or(|t| t >= 0.0),
                || format!("{} N = {}: certificate fails re-verification", preset.name, o.n),
            )?;
        }
        let n_star = sweep
            .iter()
            .find(|o| o.certificate.feasible)
            .map(|o| o.n)
            .ok_or_else(|| format!("{}: no certificate up to N = 10", preset.name))?;
        let at_reference = search_certificate(&model, &r, &CertificateQuery::new(n_reference, 2.0)).unwrap();
        notes.push(format!(
            "{} N* = {n_star}, N = {n_reference} at alpha = 2 {} ({:?} route)",
            preset.name,
            if at_reference.feasible { "feasible" } else { "infeasible" },
            at_reference.route
        ));
    }
    let e = within(t, Duration::from_secs(30))?;
    Ok(format!("{}; {e:?}", notes.join("; ")))
}

fn simulate_preset(preset: &Preset, n: usize) -> (ReducedPlant, GainSet, DMatrix<f64>, SimResult) {
    let (r, g) = pipeline(preset, 51);
    let a = assemble_sim(&r, &g, n, 50).unwrap();
    let res = run(&a, &SimConfig::new(preset.z0.clone(), preset.u0), &r, &g).unwrap();
    (r, g, a, res)
}

fn decay() -> Outcome {
    let t = Instant::now();
    let mut notes = Vec::new();
    for (preset, n) in [(presets::dirichlet_example().unwrap(), 3), (presets::neumann_example().unwrap(), 2)] {
        let (_, _, a, res) = simulate_preset(&preset, n);
        let rate = fit_decay(&res.times, &res.eta, 1.0, 3.0).map_err(|e| e.to_string())?;
        let abscissa = spectral_abscissa(&a);
        ensure(rate >= 0.5 && abscissa < -0.5, || {
            format!("{}: rate {rate}, abscissa {abscissa}", preset.name)
        })?;
        notes.push(format!("{} rate {rate:.4}, abscissa {abscissa:.4}", preset.name));
    }
    let e = within(t, Duration::from_secs(10))?;
    Ok(format!("{}; {e:?}", notes.join("; ")))
}

fn lyapunov_monotone() -> Outcome {
    let mut notes = Vec::new();
    for (preset, n) in [(presets::dirichlet_example().unwrap(), 3), (presets::neumann_example().unwrap(), 2)] {
        let (r, g, _, res) = simulate_preset(&preset, n);
        let model = assemble_closed_loop(&r, &g, n).unwrap();
        let cert = search_certificate(&model, &r, &CertificateQuery::new(n, 2.0)).unwrap();
        ensure(cert.feasible, || format!("{}: no certificate at N = {n}", preset.name))?;
        let trace = lyapunov_trace(&res, &cert).map_err(|e| e.to_string())?;
        let v0 = trace.values[0];
        ensure(trace.max_increment <= 1e-6 * v0, || {
            format!("{}: increment {:e} vs V(0) {v0:e}", preset.name, trace.max_increment)
        })?;
        notes.push(format!("{} max increment {:.3e} (V(0) = {v0:.3e})", preset.name, trace.max_increment));
    }
    Ok(notes.join("; "))
}

fn spectral_accuracy() -> Outcome {
    let unit = CoefficientPair::constant(1.0, 0.0).unwrap();
    let (mut worst_l, mut worst_t) = (0.0f64, 0.0f64);
    for bc in [BoundarySpec::NeumannDirichlet, BoundarySpec::DirichletDirichlet] {
        let s = solve_spectrum(&unit, bc, 50, DEFAULT_GRID_SIZE).unwrap();
        for n in 1..=50 {
            let k = n - 1;
            worst_l = worst_l.max((s.lambdas[k] - bc.unit_lambda(n)).abs() / bc.unit_lambda(n));
            let (got, want) = match bc {
                BoundarySpec::NeumannDirichlet => (s.trace0[k], bc.unit_trace0(n)),
                BoundarySpec::DirichletDirichlet => (s.dtrace0[k], bc.unit_dtrace0(n)),
            };
            worst_t = worst_t.max((got - want).abs() / want.abs());
            worst_t = worst_t.max((s.dtrace1[k] - bc.unit_dtrace1(n)).abs() / bc.unit_dtrace1(n).abs());
        }
        validate_bounds(&s, &unit).map_err(|e| e.to_string())?;
    }
    ensure(worst_l < 1e-6 && worst_t < 1e-4, || {
        format!("eigenvalue error {worst_l:e}, trace error {worst_t:e}")
    })?;
    let variable = CoefficientPair::polynomial(vec![1.0, 0.5, -0.2], vec![1.0, 0.0, 2.0]).unwrap();
    let mut min_margin = f64::INFINITY;
    for bc in [BoundarySpec::NeumannDirichlet, BoundarySpec::DirichletDirichlet] {
        let s = solve_spectrum(&variable, bc, 50, DEFAULT_GRID_SIZE).unwrap();
        let margins = validate_bounds(&s, &variable).map_err(|e| e.to_string())?;
        min_margin = margins.iter().fold(min_margin, |m, b| m.min(b.lower).min(b.upper));
    }
    ensure(min_margin >= 0.0, || format!("negative bound margin {min_margin:e}"))?;
    Ok(format!(
        "max rel error: eigenvalues {worst_l:.2e}, traces {worst_t:.2e}; variable-coefficient min margin {min_margin:.3}"
    ))
}

fn flux_identity() -> Outcome {
    let mut worst = 0.0f64;
    for preset in [presets::dirichlet_example().unwrap(), presets::neumann_example().unwrap()] {
        let s = solve_spectrum(&preset.plant.coeffs, preset.plant.boundary(), 21, DEFAULT_GRID_SIZE).unwrap();
        let r = reduce(&preset.plant, s, 20).unwrap();
        for n in 1..=20 {
            let flux = r.p_at_1 * r.spectrum.dtrace1[n - 1];
            let res = boundary_flux_residual(&r, n).unwrap();
            worst = worst.max(res.abs() / flux.abs());
            let gain = r.a_coef[n - 1] + r.open_loop_rate(n) * r.b_coef[n - 1];
            ensure(gain.abs() > 1e-8, || format!("{} mode {n}: input coefficient vanishes", preset.name))?;
        }
    }
    ensure(worst < 1e-6, || format!("relative residual {worst:e}"))?;
    Ok(format!("max relative residual {worst:.2e} over n <= 20, both liftings"))
}

fn tails() -> Outcome {
    let d = presets::dirichlet_example().unwrap();
    let s = analytic_spectrum(d.plant.boundary(), 50, DEFAULT_GRID_SIZE).unwrap();
    let m1 = tail_constants(&d.plant, &s, DEFAULT_EPS, 200).unwrap().value;
    let exact = 1.0 - 8.0 / (PI * PI);
    ensure((m1 - exact).abs() < 1e-4, || format!("M1 = {m1}, expected {exact}"))?;

    let nm = presets::neumann_example().unwrap();
    let s = analytic_spectrum(nm.plant.boundary(), 50, DEFAULT_GRID_SIZE).unwrap();
    let m2 = tail_constants(&nm.plant, &s, 0.125, 200).unwrap().value;
    // independent summation: 10⁶ explicit terms with traces 2(nπ)² and λ = (nπ)²
    let eps = 0.125;
    let terms = 1_000_000u64;
    let mut oracle = 0.0;
    for n in (2..=terms).rev() {
        let lam = (n as f64 * PI).powi(2);
        oracle += 2.0 * lam / lam.powf(1.5 + eps);
    }
    oracle += 2.0 * PI.powf(-1.0 - 2.0 * eps) * (terms as f64 + 0.5).powf(-2.0 * eps) / (2.0 * eps);
    let rel = (m2 - oracle).abs() / oracle;
    ensure(rel < 1e-4, || format!("M2 = {m2}, oracle {oracle}, rel {rel:e}"))?;
    Ok(format!("M1 = {m1:.6} (exact {exact:.6}); M2(1/8) = {m2:.6}, oracle {oracle:.6}, rel {rel:.1e}"))
}

fn uniform_lyapunov_bound() -> Outcome {
    let orders: Vec<usize> = (2..=12).collect();
    let mut notes = Vec::new();
    for preset in [presets::dirichlet_example().unwrap(), presets::neumann_example().unwrap()] {
        let (r, g) = pipeline(&preset, 51);
        let norms = lyapunov_norm_sweep(&r, &g, &orders, Exec::default()).map_err(|e| e.to_string())?;
        let max = norms.iter().copied().fold(0.0, f64::max);
        let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
        let last: Vec<(f64, f64)> = orders[orders.len() - 5..]
            .iter()
            .zip(&norms[norms.len() - 5..])
            .map(|(&n, &v)| (n as f64, v))
            .collect();
        let xm = last.iter().map(|p| p.0).sum::<f64>() / 5.0;
        let ym = last.iter().map(|p| p.1).sum::<f64>() / 5.0;
        let slope = last.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum::<f64>()
            / last.iter().map(|p| (p.0 - xm).powi(2)).sum::<f64>();
        ensure(max / min < 5.0 && slope <= 1e-2 * ym, || {
            format!("{}: ratio {}, slope {slope:e}", preset.name, max / min)
        })?;
        notes.push(format!("{} ratio {:.6}, slope {slope:.2e}", preset.name, max / min));
    }
    Ok(notes.join("; "))
}

fn properties() -> Outcome {
    let mut checks = 0usize;
    // orthonormality and energy identity on a variable-coefficient spectrum
    let coeffs = CoefficientPair::polynomial(vec![1.0, 0.3], vec![0.5, 1.0]).unwrap();
    for bc in [BoundarySpec::NeumannDirichlet, BoundarySpec::DirichletDirichlet] {
        let s = solve_spectrum(&coeffs, bc, 20, DEFAULT_GRID_SIZE).unwrap();
        let xs = s.grid();
        for i in 0..20 {
            for j in 0..20 {
                let ip = s.inner(&s.eigenfunctions[i], &s.eigenfunctions[j]).unwrap();
                let target = if i == j { 1.0 } else { 0.0 };
                ensure((ip - target).abs() < 1e-6, || format!("<φ{}, φ{}> = {ip}", i + 1, j + 1))?;
                checks += 1;
            }
            let phi = &s.eigenfunctions[i];
            let d = grid_derivative(phi, s.h());
            let integrand: Vec<f64> = xs
                .iter()
                .enumerate()
                .map(|(k, &x)| coeffs.p.eval(x) * d[k] * d[k] + coeffs.q.eval(x) * phi[k] * phi[k])
                .collect();
            let energy = s.integrate(&integrand).unwrap();
            ensure((energy - s.lambdas[i]).abs() < 1e-4 * s.lambdas[i], || {
                format!("energy identity fails for mode {}", i + 1)
            })?;
            checks += 1;
        }
    }
    for (preset, n) in [(presets::dirichlet_example().unwrap(), 3), (presets::neumann_example().unwrap(), 2)] {
        let (r, g) = pipeline(&preset, 51);
        let model = assemble_closed_loop(&r, &g, n).unwrap();
        // Schur complement sign agreement on a deterministic (β, γ) grid
        let p = lyapunov_solve(&model.f, 0.5).unwrap();
        for lb in -3..=3 {
            for lg in -4..=1 {
                let (beta, gamma) = (10f64.powi(lb), 10f64.powi(lg));
                let t1 = theta1(&model, &p, 0.5, 2.0, beta, gamma);
                let full = max_sym_eig(&t1);
                let schur = max_sym_eig(&theta1_schur(&model, &p, 0.5, 2.0, beta, gamma));
                let tol = 1e-9 * t1.amax().max(1.0);
                if full.abs() > tol && schur.abs() > tol {
                    ensure((full > 0.0) == (schur > 0.0), || format!("Schur mismatch at β = {beta}, γ = {gamma}"))?;
                    checks += 1;
                }
            }
        }
        // tail dominance up to 5N
        let cert = search_certificate(&model, &r, &CertificateQuery::new(n, 2.0)).unwrap();
        let cond = ScalarConditions::new(&model, &r, 2.0, DEFAULT_EPS).unwrap();
        for k in n + 1..=5 * n {
            let lam = r.spectrum.lambdas[k - 1];
            let rate = cond.gamma_at(lam, cert.beta, cert.gamma);
            ensure(rate <= cert.theta2 + 1e-12, || format!("{}: Γ_{k} exceeds Θ₂", preset.name))?;
            if let Some(t3) = cert.theta3 {
                let bound = -t3 * lam + 2.0 * cert.gamma * (cond.q_c + cond.delta);
                ensure(rate <= bound + 1e-9 * bound.abs().max(1.0) && bound <= cert.theta2 + 1e-9, || {
                    format!("{}: Θ₃ bound fails at mode {k}", preset.name)
                })?;
            }
            checks += 1;
        }
        // field boundary values along the closed-loop trajectory
        let a = assemble_sim(&r, &g, n, 50).unwrap();
        let cfg = SimConfig {
            t_end: 0.5,
            ..SimConfig::new(preset.z0.clone(), preset.u0)
        };
        let res = run(&a, &cfg, &r, &g).unwrap();
        let s = &r.spectrum;
        for k in (0..res.times.len()).step_by(25) {
            let w = res.field_w(s, k);
            let z = res.field_z(s, k);
            let inner = match preset.plant.boundary() {
                BoundarySpec::NeumannDirichlet => grid_derivative(&w, s.h())[0],
                BoundarySpec::DirichletDirichlet => w[0],
            };
            ensure(w[s.grid_size].abs() <= 1e-8 && inner.abs() <= 1e-6 && (z[s.grid_size] - res.u[k]).abs() <= 1e-8, || {
                format!("{}: boundary residual at t = {}", preset.name, res.times[k])
            })?;
            checks += 1;
        }
    }
    Ok(format!("{checks} checks"))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 gain reproduction, Dirichlet trace", || {
            gains(presets::dirichlet_example().unwrap(), [-5.0058, -2.7748], 1.4373)
        }),
        ("2 gain reproduction, Neumann trace", || {
            gains(presets::neumann_example().unwrap(), [-4.5649, -0.9653], 0.3670)
        }),
        ("3 certificate feasibility", certificates),
        ("4 closed-loop decay", decay),
        ("5 Lyapunov monotonicity", lyapunov_monotone),
        ("6 spectral solver accuracy", spectral_accuracy),
        ("7 boundary flux identity", flux_identity),
        ("8 tail constants", tails),
        ("9 uniform Lyapunov bound", uniform_lyapunov_bound),
        ("10 property suites", properties),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
