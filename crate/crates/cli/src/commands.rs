//! Subcommand implementations. Each returns its output files and a text
//! report; nothing touches the filesystem until the caller writes the
//! artifacts in one final phase.

use std::collections::BTreeMap;

use serde::Serialize;

use qubot_core::ensemble::{
    depolarizing_reference, ensemble_average, rate_anticorrelation, run_ensemble,
    settling_consistency, steady_state_average, steady_state_estimate, sweep, EnsembleStats,
    Settling, SteadyState, SteadyStateEstimate, SweepKind, SweepResult,
};
use qubot_core::logical::{
    error_table, solve_equilibria, verify_error_table, DipolarModelParams, Equilibria,
    ErrorTableReport,
};
use qubot_core::mcwf::TrajectoryRecord;
use qubot_core::potentials::{
    log_grid, parallel_field_report, Landscape, LandscapeMinimum, ParallelFieldReport,
};
use qubot_core::quantum::BellState;

use crate::checks::{self, Check, JparTarget};
use crate::config::{KappaSpec, PresetName, RunConfig};
use crate::error::CliError;
use crate::output::{num, to_json, Artifacts, Summary, Table};

/// Result of one subcommand.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Artifacts,
    pub report: Vec<String>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn checks_pass(&self) -> bool {
        checks::all_pass(&self.checks)
    }
}

// ---------------------------------------------------------------------------
// landscape

#[derive(Debug, Serialize)]
pub struct LandscapeResults {
    pub minima: BTreeMap<String, Vec<LandscapeMinimum>>,
    pub trap_frequencies_hz: BTreeMap<String, Option<f64>>,
    pub coincidences: Vec<(String, String)>,
    pub minimum_separations_um: Vec<f64>,
    pub mean_minimum_separation_um: Option<f64>,
    pub protected_state_suggestion: Option<String>,
    pub parallel_field: ParallelFieldReport,
    pub warnings: Vec<String>,
    pub checks: Vec<Check>,
}

pub fn build_landscape(
    cfg: &RunConfig,
) -> Result<(Landscape, ParallelFieldReport, Vec<String>), CliError> {
    let (dressing, warnings) = cfg.dressing.to_params()?;
    let l = &cfg.landscape;
    let grid = log_grid(l.r_min_um, l.r_max_um, l.points).map_err(CliError::config)?;
    let landscape = Landscape::new(&dressing, &grid, cfg.trap, l.compensate_parallel)?;
    let field = parallel_field_report(&landscape.pattern, l.r_min_um, l.r_max_um)?;
    Ok((landscape, field, warnings))
}

pub fn jpar_target(preset: PresetName) -> JparTarget {
    match preset {
        PresetName::PaperMain => JparTarget::Main,
        PresetName::PaperAppendixC => JparTarget::AppendixC,
        PresetName::Custom => JparTarget::None,
    }
}

pub fn landscape(cfg: &RunConfig, check: bool) -> Result<Outcome, CliError> {
    let (l, field, warnings) = build_landscape(cfg)?;
    let mut table = Table::new(&[
        "R_um", "Jx", "Jy", "Jz", "Jpar", "V_psim", "V_phim", "V_psip", "V_phip",
    ]);
    for i in 0..l.pattern.len() {
        let p = &l.pattern;
        table.push_numbers(&[
            p.r_grid[i],
            p.jx[i],
            p.jy[i],
            p.jz[i],
            p.jpar[i],
            l.values[0][i],
            l.values[1][i],
            l.values[2][i],
            l.values[3][i],
        ]);
    }
    let separations = l.minimum_separations();
    let checks = if check {
        checks::landscape(&l, &field, jpar_target(cfg.preset))
    } else {
        Vec::new()
    };
    let results = LandscapeResults {
        minima: BellState::ALL
            .iter()
            .map(|b| (b.label().to_string(), l.minima[b.index()].clone()))
            .collect(),
        trap_frequencies_hz: BellState::ALL
            .iter()
            .map(|b| {
                (
                    b.label().to_string(),
                    l.minimum(*b)
                        .and_then(|m| m.trap_frequency)
                        .map(|w| w / std::f64::consts::TAU),
                )
            })
            .collect(),
        coincidences: l
            .coincidences
            .iter()
            .map(|c| (c.first.label().to_string(), c.second.label().to_string()))
            .collect(),
        mean_minimum_separation_um: (!separations.is_empty())
            .then(|| separations.iter().sum::<f64>() / separations.len() as f64),
        minimum_separations_um: separations,
        protected_state_suggestion: l.suggested_protected_state().map(|b| b.label().to_string()),
        parallel_field: field,
        warnings: warnings.clone(),
        checks: checks.clone(),
    };
    let mut report = vec![format!("landscape ({:?})", cfg.preset)];
    for b in BellState::ALL {
        match l.minimum(b) {
            Some(m) => report.push(format!(
                "  {b:5} minimum at {:.4} um, trap frequency {}",
                m.r0,
                m.trap_frequency
                    .map(|w| format!("{:.3} kHz", w / std::f64::consts::TAU / 1e3))
                    .unwrap_or_else(|| "n/a".into())
            )),
            None => report.push(format!("  {b:5} no minimum")),
        }
    }
    report.push(format!(
        "  protected-state suggestion: {}",
        results
            .protected_state_suggestion
            .as_deref()
            .unwrap_or("none")
    ));
    report.push(format!(
        "  <J_par> = {:.1} rad/s, compensating field {:.3} G",
        field.mean_j_par, field.compensating_b
    ));
    report.extend(warnings.iter().map(|w| format!("  warning: {w}")));
    let mut artifacts = Artifacts::default();
    artifacts.add("landscape.csv", table.render());
    artifacts.add(
        "landscape.json",
        to_json(&Summary {
            config: cfg,
            results,
        })?,
    );
    Ok(Outcome {
        artifacts,
        report,
        checks,
    })
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Serialize)]
pub struct Calibration {
    pub kappa: KappaSpec,
    pub kappa_per_s: f64,
    pub corrector_width_um: f64,
    pub nbar: f64,
}

#[derive(Debug, Serialize)]
pub struct SimulationResults {
    pub n_trajectories: usize,
    pub steady_state: SteadyState,
    pub steady_state_estimate: SteadyStateEstimate,
    pub settling: Option<Settling>,
    pub pearson_gamma_l1_l2: Option<f64>,
    pub calibration: Calibration,
    pub checks: Vec<Check>,
}

/// Everything `simulate` computes, for reuse by tests.
pub struct SimulationRun {
    pub records: Vec<TrajectoryRecord>,
    pub stats: EnsembleStats,
    pub f_free: Vec<f64>,
    pub steady: SteadyState,
    pub estimate: SteadyStateEstimate,
    pub settling: Option<Settling>,
    pub pearson: Option<f64>,
}

pub fn run_simulation(cfg: &RunConfig) -> Result<SimulationRun, CliError> {
    let params = cfg.sim_params()?;
    let t0 = cfg.simulation.steady_state_start_s;
    let records = run_ensemble(&params, cfg.trajectories, cfg.workers())?;
    let stats = ensemble_average(&records)?;
    let f_free = depolarizing_reference(params.gamma, &stats.times)?;
    let steady = steady_state_average(&stats, t0)?;
    let estimate = steady_state_estimate(&records, t0)?;
    let settling = settling_consistency(&stats, params.gamma).ok();
    let pearson = rate_anticorrelation(&stats).ok();
    Ok(SimulationRun {
        records,
        stats,
        f_free,
        steady,
        estimate,
        settling,
        pearson,
    })
}

pub fn ensemble_table(stats: &EnsembleStats, f_free: &[f64]) -> Table {
    let mut table = Table::new(&[
        "t", "F", "F_stderr", "pos_mean", "pos_std", "gL1", "gL2", "F_free",
    ]);
    for k in 0..stats.len() {
        table.push_numbers(&[
            stats.times[k],
            stats.f_mean[k],
            stats.f_stderr[k],
            stats.pos_mean[k],
            stats.pos_std[k],
            stats.gamma_l1[k],
            stats.gamma_l2[k],
            f_free[k],
        ]);
    }
    table
}

pub fn trajectory_table(records: &[TrajectoryRecord]) -> Table {
    let mut table = Table::new(&[
        "trajectory",
        "t",
        "F",
        "pos_mean",
        "pos_var",
        "n_mean",
        "gL1",
        "gL2",
    ]);
    for (i, r) in records.iter().enumerate() {
        for k in 0..r.len() {
            let mut row = vec![i.to_string()];
            row.extend(
                [
                    r.times[k],
                    r.overlap[k],
                    r.pos_mean[k],
                    r.pos_var[k],
                    r.mean_number[k],
                    r.gamma_l1[k],
                    r.gamma_l2[k],
                ]
                .map(num),
            );
            table.push(row);
        }
    }
    table
}

pub fn simulation_checks(run: &SimulationRun) -> Vec<Check> {
    let mut c = checks::simulation_headline(&run.stats, &run.steady, &run.f_free);
    c.extend(checks::settling(&run.steady, run.settling.as_ref()));
    c.push(checks::anticorrelation(run.pearson));
    c
}

pub fn simulate(cfg: &RunConfig, check: bool) -> Result<Outcome, CliError> {
    let run = run_simulation(cfg)?;
    let checks = if check {
        simulation_checks(&run)
    } else {
        Vec::new()
    };
    let params = cfg.sim_params()?;
    let results = SimulationResults {
        n_trajectories: run.stats.n_trajectories,
        steady_state: run.steady,
        steady_state_estimate: run.estimate,
        settling: run.settling,
        pearson_gamma_l1_l2: run.pearson,
        calibration: Calibration {
            kappa: cfg.simulation.kappa,
            kappa_per_s: params.kappa,
            corrector_width_um: params.corrector_width,
            nbar: params.nbar,
        },
        checks: checks.clone(),
    };
    let mut report = vec![
        format!("simulate: {} trajectories", run.stats.n_trajectories),
        format!(
            "  <F>_s = {:.4} +/- {:.4} (t >= {} ms)",
            run.estimate.f,
            run.estimate.f_err,
            cfg.simulation.steady_state_start_s * 1e3
        ),
        format!(
            "  <gamma_L1>_s = {:.1} /s, <gamma_L2>_s = {:.1} /s",
            run.steady.gamma_l1, run.steady.gamma_l2
        ),
    ];
    match &run.settling {
        Some(s) => report.push(format!(
            "  t_s = {:.2} ms, exp(-Gamma t_s) = {:.4}",
            s.t_s * 1e3,
            s.predicted_f
        )),
        None => report.push("  no steady state detected".into()),
    }
    if let Some(r) = run.pearson {
        report.push(format!("  Pearson(gamma_L1, gamma_L2) = {r:.4}"));
    }
    let mut artifacts = Artifacts::default();
    artifacts.add(
        "simulate.csv",
        ensemble_table(&run.stats, &run.f_free).render(),
    );
    if cfg.simulation.write_trajectories {
        artifacts.add("trajectories.csv", trajectory_table(&run.records).render());
    }
    artifacts.add(
        "summary.json",
        to_json(&Summary {
            config: cfg,
            results,
        })?,
    );
    Ok(Outcome {
        artifacts,
        report,
        checks,
    })
}

// ---------------------------------------------------------------------------
// sweeps

#[derive(Debug, Serialize)]
pub struct SweepResults {
    pub sweep: SweepResult,
    pub checks: Vec<Check>,
}

pub fn run_sweep(cfg: &RunConfig, kind: SweepKind) -> Result<SweepResult, CliError> {
    let values = match kind {
        SweepKind::CorrectorPosition => &cfg.sweep.positions_um,
        SweepKind::TemperatureNbar => &cfg.sweep.nbar,
    };
    if values.is_empty() {
        return Err(CliError::Config(format!(
            "sweep list for {} is empty",
            kind.name()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(CliError::Config(format!(
            "sweep values must be finite and non-negative, got {v}"
        )));
    }
    let base = cfg.sim_params()?;
    for v in values {
        kind.apply(&base, *v).validate().map_err(CliError::config)?;
    }
    Ok(sweep(
        kind,
        values,
        &base,
        cfg.sweep.trajectories_per_point,
        cfg.workers(),
        cfg.simulation.steady_state_start_s,
    )?)
}

pub fn sweep_table(s: &SweepResult) -> Table {
    let mut table = Table::new(&[
        s.parameter.as_str(),
        "F_s",
        "F_s_err",
        "gamma_s",
        "gamma_s_err",
        "gL1_s",
        "gL2_s",
    ]);
    for i in 0..s.values.len() {
        table.push_numbers(&[
            s.values[i],
            s.f_s[i],
            s.f_s_err[i],
            s.gamma_s[i],
            s.gamma_s_err[i],
            s.gamma_l1_s[i],
            s.gamma_l2_s[i],
        ]);
    }
    table
}

pub fn sweep_command(cfg: &RunConfig, kind: SweepKind, check: bool) -> Result<Outcome, CliError> {
    let s = run_sweep(cfg, kind)?;
    let checks = match (check, kind) {
        (false, _) => Vec::new(),
        (true, SweepKind::CorrectorPosition) => checks::position_sweep(&s),
        (true, SweepKind::TemperatureNbar) => vec![checks::temperature_sweep(&s)],
    };
    let stem = match kind {
        SweepKind::CorrectorPosition => "sweep_position",
        SweepKind::TemperatureNbar => "sweep_temperature",
    };
    let mut report = vec![format!(
        "sweep {}: {} trajectories per point",
        s.parameter, s.n_trajectories
    )];
    for i in 0..s.values.len() {
        report.push(format!(
            "  {:>6}: <F>_s = {:.4} +/- {:.4}, <gamma>_s = {:.1} +/- {:.1} /s",
            s.values[i], s.f_s[i], s.f_s_err[i], s.gamma_s[i], s.gamma_s_err[i]
        ));
    }
    let mut artifacts = Artifacts::default();
    artifacts.add(&format!("{stem}.csv"), sweep_table(&s).render());
    artifacts.add(
        &format!("{stem}.json"),
        to_json(&Summary {
            config: cfg,
            results: SweepResults {
                sweep: s,
                checks: checks.clone(),
            },
        })?,
    );
    Ok(Outcome {
        artifacts,
        report,
        checks,
    })
}

// ---------------------------------------------------------------------------
// logical-check

#[derive(Debug, Serialize)]
pub struct LogicalResults {
    pub table: ErrorTableReport,
    pub equilibria: Vec<Equilibria>,
}

/// Verifies the error table and solves the illustrative dipolar
/// equilibria. `inject_sign_error` corrupts one expected entry to exercise
/// the failure path.
pub fn logical_check(inject_sign_error: bool) -> Result<(Outcome, LogicalResults), CliError> {
    let mut rows = error_table();
    if inject_sign_error {
        rows[0].on_zero.sign = -rows[0].on_zero.sign;
    }
    let table = verify_error_table(&rows)?;
    let params = DipolarModelParams::fig1b();
    let equilibria = BellState::ALL
        .iter()
        .map(|&b| solve_equilibria(&params, b))
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = vec!["error table".to_string()];
    for c in &table.cells {
        report.push(format!(
            "  [{}] {:6} on {:5}: expected {:>6}, computed {:>6}",
            if c.pass { "PASS" } else { "FAIL" },
            c.row,
            c.column.label(),
            c.expected,
            c.computed
        ));
    }
    for c in &table.corrected {
        report.push(format!(
            "  [{}] {:6} corrected: expected {:?}, computed {:?}, path {:?}",
            if c.pass { "PASS" } else { "FAIL" },
            c.row,
            c.expected,
            c.computed,
            c.path
        ));
    }
    report.push("equilibria of the illustrative dipolar pattern".into());
    for e in &equilibria {
        let minima: Vec<String> = e.minima().map(|r| format!("{:.4}", r.r0)).collect();
        report.push(format!(
            "  {:5} <W> = {:+.3}: {}",
            e.bell.label(),
            e.w_expectation,
            if minima.is_empty() {
                "no minimum".to_string()
            } else {
                format!("minima at R = {}", minima.join(", "))
            }
        ));
    }
    let psi_plus_free = equilibria
        .iter()
        .any(|e| e.bell == BellState::PsiPlus && !e.has_minimum());
    let checks = vec![
        Check::new(
            "error table",
            table.all_pass(),
            format!(
                "{}/{} cells and {}/{} corrected states match",
                table.cells.iter().filter(|c| c.pass).count(),
                table.cells.len(),
                table.corrected.iter().filter(|c| c.pass).count(),
                table.corrected.len()
            ),
        ),
        Check::new(
            "psi+ without minimum",
            psi_plus_free,
            format!("psi+ has no minimum: {psi_plus_free}"),
        ),
    ];
    let results = LogicalResults { table, equilibria };
    let mut artifacts = Artifacts::default();
    artifacts.add("logical_check.json", to_json(&results)?);
    Ok((
        Outcome {
            artifacts,
            report,
            checks,
        },
        results,
    ))
}
