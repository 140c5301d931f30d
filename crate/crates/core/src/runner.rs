//! Runs a scenario end to end: simulate, post-process, write files.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    convergence_report, lyapunov_series, moving_average, ConvergenceReport, DEFAULT_BAND,
};
use crate::config::ConfigError;
use crate::error::EscError;
use crate::integrator::Trajectory;
use crate::output::{csv_header, emit_svg, write_csv, OutputError, Panel, Series};
use crate::scenario::Scenario;

/// Fraction of the horizon used as the steady-state window.
pub const FINAL_WINDOW_FRACTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] EscError),
    #[error("output error: {0}")]
    Output(#[from] OutputError),
}

impl RunError {
    /// 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Output(OutputError::Io { .. }) => 4,
            // plotting refuses degenerate data produced by the run
            RunError::Output(OutputError::Plot(_)) => 3,
        }
    }
}

/// Per-sample derived signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Derived {
    pub j: Vec<f64>,
    pub v: Vec<f64>,
    pub vdot: Vec<f64>,
    pub u_applied: Vec<f64>,
}

pub fn derived_series(
    s: &Scenario,
    traj: &Trajectory<f64>,
    averaged: bool,
) -> Result<Derived, EscError> {
    let obj = s.build_objective()?;
    let lyap = lyapunov_series(traj, &obj)?;
    let j = traj
        .states
        .iter()
        .map(|x| obj.try_eval(x.q()))
        .collect::<Result<Vec<_>, _>>()?;
    let u_applied = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, x)| s.applied_control(x, t, averaged))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Derived {
        j,
        v: lyap.v,
        vdot: lyap.vdot,
        u_applied,
    })
}

/// Everything a run produces, before anything is written.
#[derive(Debug, Clone)]
pub struct RunData {
    pub truth: Trajectory<f64>,
    pub truth_derived: Derived,
    pub averaged: Option<(Trajectory<f64>, Derived)>,
    pub failure: Option<EscError>,
}

/// Simulates the scenario (and its averaged system when requested).
pub fn execute(s: &Scenario) -> Result<RunData, EscError> {
    let (truth, failure) = s.simulate()?;
    let truth_derived = derived_series(s, &truth, false)?;
    let averaged = if s.outputs.averaged && failure.is_none() {
        let avg = s.simulate_averaged()?;
        let d = derived_series(s, &avg, true)?;
        Some((avg, d))
    } else {
        None
    };
    Ok(RunData {
        truth,
        truth_derived,
        averaged,
        failure,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary {
    pub settling_time: Option<f64>,
    pub steady_state_mean: Vec<f64>,
    pub steady_state_oscillation: Vec<f64>,
    pub uhat_steady_mean: f64,
    pub window: f64,
}

impl From<ConvergenceReport<f64>> for ReportSummary {
    fn from(r: ConvergenceReport<f64>) -> Self {
        Self {
            settling_time: r.settling_time,
            steady_state_mean: r.steady_state_mean,
            steady_state_oscillation: r.steady_state_oscillation,
            uhat_steady_mean: r.uhat_steady_mean,
            window: r.window,
        }
    }
}

/// Steady-state statistics of the applied input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlSummary {
    /// Mean of the one-period average of `u_applied` over the final window.
    pub final_mean: f64,
    /// Largest magnitude of the one-period moving average of `u_applied`
    /// before the final window.
    pub transient_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub plant: String,
    pub controller: String,
    pub dt: f64,
    pub samples: usize,
    pub completed: bool,
    pub failure: Option<String>,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub report: Option<ReportSummary>,
    pub averaged_report: Option<ReportSummary>,
    pub control: Option<ControlSummary>,
}

/// Final-window length for a horizon.
pub fn final_window(s: &Scenario) -> f64 {
    FINAL_WINDOW_FRACTION * (s.integration.tf - s.integration.t0)
}

pub fn control_summary(s: &Scenario, traj: &Trajectory<f64>, u: &[f64]) -> ControlSummary {
    // one-period averages cancel the dither exactly on a whole-period grid
    let per = (s.controller.period() / s.dt()).round().max(1.0) as usize;
    let ma = moving_average(u, per);
    let start = traj.index_at(s.integration.tf - final_window(s));
    // ma[i] covers samples i..i + per
    let split = start.saturating_sub(per - 1).min(ma.len());
    let (head, tail) = ma.split_at(split);
    let final_mean = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    let transient_peak = head.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    ControlSummary {
        final_mean,
        transient_peak,
    }
}

/// Builds the summary for already simulated data.
pub fn summarize(s: &Scenario, data: &RunData) -> RunSummary {
    let tracked = s.objective.tracked();
    let window = final_window(s);
    let complete = data.failure.is_none();
    let report = |t: &Trajectory<f64>| {
        convergence_report(t, &tracked, DEFAULT_BAND, window)
            .ok()
            .map(ReportSummary::from)
    };
    RunSummary {
        scenario: s.name.clone(),
        plant: s.plant.kind().into(),
        controller: s.controller.kind().into(),
        dt: s.dt(),
        samples: data.truth.len(),
        completed: complete,
        failure: data.failure.as_ref().map(ToString::to_string),
        csv: s.outputs.csv.clone(),
        svg: s.outputs.svg.clone(),
        report: if complete { report(&data.truth) } else { None },
        averaged_report: data.averaged.as_ref().and_then(|(a, _)| report(a)),
        control: complete.then(|| control_summary(s, &data.truth, &data.truth_derived.u_applied)),
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for relative output paths; the working directory if unset.
    pub out_dir: Option<PathBuf>,
}

impl RunOptions {
    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.out_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }
}

/// Path of the JSON summary written next to the CSV.
pub fn summary_path(s: &Scenario, opts: &RunOptions) -> PathBuf {
    let base = s
        .outputs
        .csv
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", s.name)));
    opts.resolve(&base.with_extension("summary.json"))
}

/// Runs the scenario and writes the CSV, the SVG and the JSON summary.
///
/// If integration fails, the rows computed so far and the summary are still
/// written, then the numerical error is returned.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<RunSummary, RunError> {
    let data = execute(s)?;
    let mut summary = summarize(s, &data);
    if let Some(csv) = &s.outputs.csv {
        let path = opts.resolve(csv);
        write_trajectory_csv(s, &data, &path)?;
        summary.csv = Some(path);
    }
    if let Some(svg) = &s.outputs.svg {
        let path = opts.resolve(svg);
        if data.truth.len() >= 2 {
            emit_svg(&panels(s, &data), &path)?;
            summary.svg = Some(path);
        } else {
            summary.svg = None;
        }
    }
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    let path = summary_path(s, opts);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(&path, json + "\n").map_err(|source| OutputError::Io { path, source })?;
    match data.failure {
        Some(e) => Err(RunError::Numerical(e)),
        None => Ok(summary),
    }
}

pub fn csv_rows(s: &Scenario, data: &RunData) -> (Vec<String>, Vec<Vec<f64>>) {
    let n = s.n();
    let avg = data
        .averaged
        .as_ref()
        .filter(|(a, _)| a.len() >= data.truth.len());
    let header = csv_header(n, avg.is_some());
    let stride = s.outputs.stride.max(1);
    let block = |x: &crate::state::StateVector<f64>, d: &Derived, i: usize, row: &mut Vec<f64>| {
        row.extend_from_slice(x.as_slice());
        row.extend([d.j[i], d.v[i], d.vdot[i], d.u_applied[i]]);
    };
    let rows = (0..data.truth.len())
        .step_by(stride)
        .map(|i| {
            let mut row = Vec::with_capacity(header.len());
            row.push(data.truth.times[i]);
            block(&data.truth.states[i], &data.truth_derived, i, &mut row);
            if let Some((a, d)) = avg {
                block(&a.states[i], d, i, &mut row);
            }
            row
        })
        .collect();
    (header, rows)
}

pub fn write_trajectory_csv(s: &Scenario, data: &RunData, path: &Path) -> Result<(), OutputError> {
    let (header, rows) = csv_rows(s, data);
    write_csv(path, &header, &rows)
}

/// Labelled curves of one panel, taken from a trajectory and its derived signals.
type PanelCurves<'a> = &'a dyn Fn(&Trajectory<f64>, &Derived) -> Vec<(String, Vec<f64>)>;

/// Panels `q`, `q̇`, `û`, `V̇`; averaged curves dashed.
pub fn panels(s: &Scenario, data: &RunData) -> Vec<Panel> {
    let n = s.n();
    let series = |label: String, t: &Trajectory<f64>, values: Vec<f64>, dashed: bool| Series {
        label,
        times: t.times.clone(),
        values,
        dashed,
    };
    let mut out = Vec::new();
    let mut panel = |title: &str, f: PanelCurves| {
        let mut list: Vec<Series> = f(&data.truth, &data.truth_derived)
            .into_iter()
            .map(|(l, v)| series(l, &data.truth, v, false))
            .collect();
        if let Some((a, d)) = &data.averaged {
            list.extend(
                f(a, d)
                    .into_iter()
                    .map(|(l, v)| series(format!("{l} (avg)"), a, v, true)),
            );
        }
        out.push(Panel {
            title: title.to_string(),
            series: list,
        });
    };
    panel("q", &|t, _| {
        (0..n)
            .map(|i| (format!("q{}", i + 1), t.component(i)))
            .collect()
    });
    panel("qdot", &|t, _| {
        (0..n)
            .map(|i| (format!("qd{}", i + 1), t.component(n + i)))
            .collect()
    });
    panel("uhat", &|t, _| {
        vec![("uhat".to_string(), t.component(2 * n))]
    });
    panel("Vdot", &|_, d| vec![("Vdot".to_string(), d.vdot.clone())]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{scenario_defaults, ScenarioName};
    use crate::scenario::StepSpec;

    fn short(name: ScenarioName) -> Scenario {
        let mut s = scenario_defaults(name);
        s.integration.tf = 1.0;
        s
    }

    #[test]
    fn column_count_matches_schema() {
        let mut s = short(ScenarioName::MassSpring);
        s.outputs.stride = 10;
        let data = execute(&s).unwrap();
        let (header, rows) = csv_rows(&s, &data);
        assert_eq!(header.len(), 1 + 3 + 4 + 3 + 4);
        assert!(rows.iter().all(|r| r.len() == header.len()));
        assert_eq!(rows.len(), data.truth.len().div_ceil(10));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            RunError::Config(ConfigError::MissingSection("plant".into())).exit_code(),
            2
        );
        assert_eq!(
            RunError::Numerical(EscError::Step { t: 0.0, stage: 1 }).exit_code(),
            3
        );
        let io = OutputError::Io {
            path: "x".into(),
            source: std::io::Error::other("boom"),
        };
        assert_eq!(RunError::Output(io).exit_code(), 4);
    }

    #[test]
    fn run_writes_files_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let s = short(ScenarioName::Pendulum);
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
        };
        let summary = run_scenario(&s, &opts).unwrap();
        let csv = summary.csv.clone().unwrap();
        let first = std::fs::read(&csv).unwrap();
        run_scenario(&s, &opts).unwrap();
        assert_eq!(first, std::fs::read(&csv).unwrap());
        assert!(summary_path(&s, &opts).exists());
        assert!(summary.svg.unwrap().exists());
    }

    #[test]
    fn failure_flushes_partial_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = short(ScenarioName::ComparisonSuttner);
        s.integration.tf = 2.0;
        s.integration.step = StepSpec::StepsPerPeriod(40);
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
        };
        let err = run_scenario(&s, &opts).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let text = std::fs::read_to_string(dir.path().join("comparison_suttner.csv")).unwrap();
        assert!(text.lines().count() > 2);
        assert!(!text.contains("ERROR"));
    }
}
