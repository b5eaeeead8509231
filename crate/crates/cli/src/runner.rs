use std::path::{Path, PathBuf};

use specstab::certificate::{
    export_sdpa, order_sweep, search_certificate, Certificate, CertificateQuery, OrderOutcome, SearchPolicy,
};
use specstab::homogenize::{reduce_with_eps, ReducedPlant};
use specstab::simulate::{
    assemble_sim, fit_decay, lyapunov_trace, run, write_field_csv, write_series_csv, SimConfig, SimResult,
};
use specstab::sturm_liouville::{compute_spectrum, SpectrumOrigin, POINTS_PER_MODE};
use specstab::synthesis::{assemble_closed_loop, synthesize_gains, GainSet};
use specstab::Exec;

use crate::report::{OrderEntry, OrderReport, Report, SdpaReport, SimulationReport, SpectrumReport};
use crate::scenario::{load_scenario, OrderChoice, Scenario};
use crate::{exit, to_json_17, CliError};

const FIELD_SNAPSHOTS: usize = 10;
const FIELD_POINTS: usize = 100;

/// Command-line values that take precedence over the scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n_max: Option<usize>,
    pub alpha: Option<f64>,
    pub eps: Option<f64>,
    pub export_sdpa: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Runs the order sweep on the thread pool.
    pub parallel: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub out_dir: PathBuf,
    pub report_path: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.feasible {
            exit::SUCCESS
        } else {
            exit::INFEASIBLE
        }
    }
}

fn apply(mut scenario: Scenario, o: &Overrides) -> Result<Scenario, CliError> {
    if let Some(n) = o.n_max {
        scenario.n_max = n;
    }
    if let Some(a) = o.alpha {
        scenario.alphas = vec![a];
    }
    if let Some(e) = o.eps {
        scenario.eps = e;
    }
    if let Some(out) = &o.out {
        scenario.output = out.clone();
    }
    if scenario.alphas.is_empty() || scenario.alphas.iter().any(|a| !(*a > 1.0)) {
        return Err(CliError::Config(format!("every alpha must exceed 1, got {:?}", scenario.alphas)));
    }
    if !(scenario.dt > 0.0 && scenario.t_end > 0.0) {
        return Err(CliError::Config("dt and t_end must be positive".into()));
    }
    let (a, b) = scenario.fit_window;
    if !(0.0 <= a && a < b && b <= scenario.t_end) {
        return Err(CliError::Config(format!("fit window [{a}, {b}] must lie in [0, t_end]")));
    }
    Ok(scenario)
}

/// Highest observer order the run may touch.
fn order_ceiling(s: &Scenario) -> usize {
    match s.order {
        OrderChoice::Auto => s.n_max,
        OrderChoice::Fixed(n) => n,
    }
}

fn build_reduced(s: &Scenario, modes: usize, grid_size: usize, exec: Exec) -> Result<ReducedPlant, CliError> {
    let spectrum = compute_spectrum(&s.plant.coeffs, s.plant.boundary(), modes, grid_size, exec)?;
    Ok(reduce_with_eps(&s.plant, spectrum, order_ceiling(s), s.eps)?)
}

fn best_of(outcomes: Vec<Certificate>) -> Certificate {
    let mut chosen: Option<Certificate> = None;
    for cert in outcomes {
        chosen = match chosen {
            Some(c) if c.feasible => Some(c),
            Some(c) if !cert.feasible && c.worst_violation() <= cert.worst_violation() => Some(c),
            _ => Some(cert),
        };
    }
    chosen.expect("alpha grid is non-empty")
}

fn certify(
    s: &Scenario,
    reduced: &ReducedPlant,
    gains: &GainSet,
    exec: Exec,
) -> Result<Vec<OrderOutcome>, CliError> {
    let policy = SearchPolicy::default();
    match s.order {
        OrderChoice::Auto => Ok(order_sweep(reduced, gains, s.n_max, &s.alphas, s.eps, &policy, exec)?),
        OrderChoice::Fixed(n) => {
            let model = assemble_closed_loop(reduced, gains, n)?;
            let certs = exec
                .map(&s.alphas, |&alpha| {
                    let query = CertificateQuery {
                        n,
                        alpha,
                        eps: s.eps,
                        policy: policy.clone(),
                    };
                    search_certificate(&model, reduced, &query)
                })
                .into_iter()
                .collect::<specstab::Result<Vec<_>>>()?;
            Ok(vec![OrderOutcome {
                n,
                certificate: best_of(certs),
            }])
        }
    }
}

fn series_files(out: &Path, sim: &SimResult, reduced: &ReducedPlant, lyap: Option<&[f64]>) -> Result<Vec<String>, CliError> {
    let measured = (0..sim.times.len())
        .map(|k| sim.measured_output(reduced, k))
        .collect::<specstab::Result<Vec<_>>>()?;
    let mut series: Vec<(&str, &[f64])> = vec![
        ("u.csv", &sim.u),
        ("v.csv", &sim.v),
        ("eta.csv", &sim.eta),
        ("zeta.csv", &sim.zeta),
        ("w_l2.csv", &sim.w_l2),
        ("energy.csv", &sim.energy),
        ("output.csv", &measured),
    ];
    if let Some(values) = lyap {
        series.push(("lyapunov.csv", values));
    }
    let mut files = Vec::new();
    for (name, values) in series {
        write_series_csv(&out.join(name), &sim.times, values)?;
        files.push(name.to_string());
    }

    let spectrum = &reduced.spectrum;
    let stride = (spectrum.grid_size / FIELD_POINTS).max(1);
    let grid = spectrum.grid();
    let xs: Vec<f64> = grid.iter().step_by(stride).copied().collect();
    let last = sim.times.len() - 1;
    let mut ks: Vec<usize> = (0..=FIELD_SNAPSHOTS).map(|i| i * last / FIELD_SNAPSHOTS).collect();
    ks.dedup();
    let pick = |v: Vec<f64>| v.into_iter().step_by(stride).collect::<Vec<_>>();
    let z: Vec<(f64, Vec<f64>)> = ks.iter().map(|&k| (sim.times[k], pick(sim.field_z(spectrum, k)))).collect();
    let e: Vec<(f64, Vec<f64>)> = ks.iter().map(|&k| (sim.times[k], pick(sim.field_error(spectrum, k)))).collect();
    write_field_csv(&out.join("field_z.csv"), &xs, &z)?;
    write_field_csv(&out.join("field_error.csv"), &xs, &e)?;
    files.push("field_z.csv".into());
    files.push("field_error.csv".into());
    Ok(files)
}

/// Runs synthesis, certification and simulation for a preset or scenario
/// file, writing `report.json` and CSV artifacts to the output directory.
/// An infeasible run still writes its artifacts; see [`RunOutcome::exit_code`].
pub fn run_scenario(target: &str, overrides: &Overrides) -> Result<RunOutcome, CliError> {
    let s = apply(load_scenario(target)?, overrides)?;
    let exec = if overrides.parallel { Exec::Parallel } else { Exec::Sequential };

    let modes = s.n_sim.max(order_ceiling(&s) + 1);
    let grid_size = s.grid_size.max(POINTS_PER_MODE * modes).next_multiple_of(2);
    let reduced = build_reduced(&s, modes, grid_size, exec)?;
    let gains = synthesize_gains(&reduced, &s.poles)?;
    let outcomes = certify(&s, &reduced, &gains, exec)?;

    let sweep: Vec<OrderEntry> = outcomes
        .iter()
        .map(|o| OrderEntry {
            n: o.n,
            feasible: o.certificate.feasible,
            alpha: o.certificate.alpha,
            route: o.certificate.route,
            worst_violation: o.certificate.worst_violation(),
        })
        .collect();
    let chosen = outcomes.iter().find(|o| o.certificate.feasible).cloned();
    let n_run = chosen.as_ref().map_or(order_ceiling(&s), |o| o.n);

    std::fs::create_dir_all(&s.output)?;

    let sdpa = match &overrides.export_sdpa {
        Some(path) => {
            let model = assemble_closed_loop(&reduced, &gains, n_run)?;
            let alpha = chosen.as_ref().map_or(s.alphas[0], |o| o.certificate.alpha);
            let problem = export_sdpa(&model, &reduced, alpha, s.eps, path)?;
            Some(SdpaReport {
                path: path.display().to_string(),
                n: n_run,
                alpha,
                n_vars: problem.n_vars,
                block_sizes: problem.block_sizes.clone(),
            })
        }
        None => None,
    };

    let a_cl = assemble_sim(&reduced, &gains, n_run, s.n_sim)?;
    let config = SimConfig {
        n_sim: s.n_sim,
        dt: s.dt,
        t_end: s.t_end,
        z0: s.z0.clone(),
        u0: s.u0,
    };
    let sim = run(&a_cl, &config, &reduced, &gains)?;
    let trace = match &chosen {
        Some(o) => Some(lyapunov_trace(&sim, &o.certificate)?),
        None => None,
    };
    let files = series_files(&s.output, &sim, &reduced, trace.as_ref().map(|t| t.values.as_slice()))?;
    let (t_a, t_b) = s.fit_window;
    let simulation = SimulationReport {
        n_sim: s.n_sim,
        dt: s.dt,
        t_end: s.t_end,
        steps: sim.times.len() - 1,
        fit_window: [t_a, t_b],
        decay_rate: fit_decay(&sim.times, &sim.eta, t_a, t_b)?,
        eta_initial: sim.eta[0],
        eta_final: *sim.eta.last().expect("nonempty trajectory"),
        lyapunov_max_increment: trace.as_ref().map(|t| t.max_increment),
        files,
    };

    let spectrum = &reduced.spectrum;
    let report = Report {
        scenario: s.name.clone(),
        measurement: s.plant.kind(),
        delta: s.plant.delta,
        q_c: s.plant.q_c,
        eps: s.eps,
        spectrum: SpectrumReport {
            modes: spectrum.n_modes(),
            grid_size: spectrum.grid_size,
            analytic: spectrum.origin == SpectrumOrigin::Analytic,
            leading_eigenvalues: spectrum.lambdas[..=order_ceiling(&s)].to_vec(),
        },
        n0: reduced.n0,
        tail_constant: reduced.tail.clone(),
        gains,
        order: OrderReport {
            mode: match s.order {
                OrderChoice::Auto => "auto".into(),
                OrderChoice::Fixed(_) => "fixed".into(),
            },
            n_max: order_ceiling(&s),
            alphas: s.alphas.clone(),
            selected: chosen.as_ref().map(|o| o.n),
            sweep,
        },
        feasible: chosen.is_some(),
        certificate: chosen.map(|o| o.certificate),
        simulation: Some(simulation),
        sdpa,
    };
    let report_path = s.output.join("report.json");
    let text = to_json_17(&report).map_err(|e| CliError::Config(format!("report serialization: {e}")))?;
    std::fs::write(&report_path, text)?;
    Ok(RunOutcome {
        report,
        out_dir: s.output,
        report_path,
    })
}

/// Rebuilds the reduced model described by `report` for the scenario at
/// `target` and re-runs verification of the embedded certificate.
/// Returns `None` when the report carries no certificate.
pub fn reverify_report(target: &str, report: &Report) -> Result<Option<Certificate>, CliError> {
    let Some(cert) = &report.certificate else {
        return Ok(None);
    };
    let mut s = load_scenario(target)?;
    s.eps = report.eps;
    s.order = OrderChoice::Fixed(cert.n);
    let exec = Exec::default();
    let reduced = build_reduced(&s, report.spectrum.modes, report.spectrum.grid_size, exec)?;
    if reduced.n0 != report.n0 {
        return Err(CliError::Config(format!(
            "report has N0 = {}, scenario gives N0 = {}",
            report.n0, reduced.n0
        )));
    }
    let model = assemble_closed_loop(&reduced, &report.gains, cert.n)?;
    Ok(Some(cert.reverify(&model, &reduced)?))
}
