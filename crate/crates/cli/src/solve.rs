//! `ctstl solve`: run the prox-convex solver on a problem file and write
//! the trajectory, reports and plots.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use ctstl_core::scp::{prox_convex_solve, SolveReport, SolveStatus};
use ctstl_core::Signal;

use crate::monitor::summarize;
use crate::output::{write_json, write_trajectory_csv};
use crate::plot::{Chart, Circle, HLine, Series};
use crate::problem::{PlotSpec, ProblemSpec};
use crate::{write_error, CliError};

/// Command-line overrides of the problem file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub max_iters: Option<usize>,
    pub w_dyn: Option<f64>,
    pub w_stl: Option<f64>,
    pub c: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, spec: &mut ProblemSpec) {
        if let Some(n) = self.max_iters {
            spec.prox.max_iters = n;
        }
        if let Some(w) = self.w_dyn {
            spec.penalty.w_dyn = w;
        }
        if let Some(w) = self.w_stl {
            spec.penalty.w_stl = w;
        }
        if let Some(c) = self.c {
            spec.gmsr.c = c;
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveSummary {
    pub status: SolveStatus,
    pub iterations: usize,
    pub final_j_nl: f64,
    pub final_defect_max: f64,
    pub gamma: Option<f64>,
    pub wall_ms: f64,
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    problem: &'a str,
    nodes: usize,
    substeps: usize,
    dense_samples: usize,
    wall_ms: f64,
    #[serde(flatten)]
    report: &'a SolveReport,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    problem: &'a str,
    status: &'static str,
    message: String,
}

pub fn run(problem_path: &Path, out_dir: &Path, overrides: &Overrides) -> Result<SolveSummary, CliError> {
    let mut spec = ProblemSpec::from_path(problem_path)?;
    overrides.apply(&mut spec);
    let problem = spec.build()?;
    let spec = &problem.spec;
    std::fs::create_dir_all(out_dir).map_err(|e| write_error(out_dir, e))?;

    log::info!(
        "solving `{}`: K = {}, N = {}, t_f = {}",
        spec.name,
        spec.grid.nodes,
        spec.grid.substeps,
        spec.grid.final_time
    );
    let start = Instant::now();
    let result = prox_convex_solve(&problem.trajectory, &spec.penalty, &spec.prox, &spec.qp);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let report_path = out_dir.join("report.json");

    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            let rep = ErrorReport {
                problem: &spec.name,
                status: "error",
                message: e.to_string(),
            };
            write_json(&report_path, &rep).map_err(|e| write_error(&report_path, e))?;
            return Err(CliError::Failed(format!("solver error: {e}")));
        }
    };

    let csv_path = out_dir.join("trajectory.csv");
    let file = std::fs::File::create(&csv_path).map_err(|e| write_error(&csv_path, e))?;
    write_trajectory_csv(file, &outcome.dense).map_err(|e| write_error(&csv_path, e))?;

    let rep = ReportFile {
        problem: &spec.name,
        nodes: spec.grid.nodes,
        substeps: spec.grid.substeps,
        dense_samples: outcome.dense.len(),
        wall_ms,
        report: &outcome.report,
    };
    write_json(&report_path, &rep).map_err(|e| write_error(&report_path, e))?;

    let signal = outcome.dense.to_signal();
    let mut gamma = None;
    if let Some(f) = &problem.trajectory.formula {
        let summary = summarize(f, &signal, &problem.trajectory.gmsr)
            .map_err(|e| CliError::Failed(format!("robustness evaluation failed: {e}")))?;
        gamma = Some(summary.gamma);
        let path = out_dir.join("robustness.json");
        write_json(&path, &summary).map_err(|e| write_error(&path, e))?;
    }

    if let Some(plot) = &spec.plot {
        let nodes: Vec<usize> = (0..spec.grid.nodes).map(|k| k * spec.grid.substeps).collect();
        for (name, chart) in charts(plot, &signal, &nodes) {
            let path = out_dir.join(name);
            std::fs::write(&path, chart.render()).map_err(|e| write_error(&path, e))?;
        }
    }

    let report = &outcome.report;
    let summary = SolveSummary {
        status: report.status,
        iterations: report.iterations.len(),
        final_j_nl: report.final_j_nl,
        final_defect_max: report.final_defect_max,
        gamma,
        wall_ms,
        out_dir: out_dir.to_path_buf(),
    };
    if report.status != SolveStatus::Converged {
        return Err(CliError::Failed(format!(
            "solver did not converge ({:?}): {}",
            report.status, report.message
        )));
    }
    Ok(summary)
}

fn column(signal: &Signal, name: &str) -> Vec<f64> {
    let c = signal.column(name).expect("plot channels are checked when the problem is built");
    (0..signal.len()).map(|m| signal.value(m, c)).collect()
}

/// Path, speed and station-margin charts, as far as `plot` describes them.
fn charts(plot: &PlotSpec, signal: &Signal, nodes: &[usize]) -> Vec<(&'static str, Chart)> {
    let t = signal.times();
    let pos: Vec<Vec<f64>> = plot.position.iter().map(|c| column(signal, c)).collect();
    let mut out = Vec::new();

    let path: Vec<(f64, f64)> = pos[0].iter().zip(&pos[1]).map(|(x, y)| (*x, *y)).collect();
    let knots = nodes.iter().map(|&m| path[m]).collect();
    let mut circles = Vec::new();
    if let Some(st) = &plot.station {
        circles.push(Circle {
            label: "station".into(),
            center: (st.center[0], st.center[1]),
            radius: st.radius,
        });
    }
    out.push((
        "path.svg",
        Chart {
            title: "Path".into(),
            x_label: plot.position[0].clone(),
            y_label: plot.position[1].clone(),
            series: vec![
                Series {
                    label: "dense samples".into(),
                    points: path,
                    markers: false,
                },
                Series {
                    label: "nodes".into(),
                    points: knots,
                    markers: true,
                },
            ],
            circles,
            equal_aspect: true,
            ..Default::default()
        },
    ));

    if !plot.velocity.is_empty() {
        let vel: Vec<Vec<f64>> = plot.velocity.iter().map(|c| column(signal, c)).collect();
        let speed = (0..signal.len())
            .map(|m| (t[m], vel.iter().map(|v| v[m] * v[m]).sum::<f64>().sqrt()))
            .collect();
        out.push((
            "speed.svg",
            Chart {
                title: "Speed".into(),
                x_label: "t".into(),
                y_label: "|v|".into(),
                series: vec![Series {
                    label: "|v|".into(),
                    points: speed,
                    markers: false,
                }],
                hlines: plot
                    .speed_limits
                    .iter()
                    .map(|(label, y)| HLine {
                        label: label.clone(),
                        y: *y,
                    })
                    .collect(),
                ..Default::default()
            },
        ));
    }

    if let Some(st) = &plot.station {
        let margin = (0..signal.len())
            .map(|m| {
                let d2: f64 = pos.iter().zip(&st.center).map(|(p, c)| (p[m] - c).powi(2)).sum();
                (t[m], st.radius - d2.sqrt())
            })
            .collect();
        out.push((
            "margin.svg",
            Chart {
                title: "Station margin".into(),
                x_label: "t".into(),
                y_label: "radius - distance".into(),
                series: vec![Series {
                    label: "margin".into(),
                    points: margin,
                    markers: false,
                }],
                hlines: vec![HLine {
                    label: "boundary".into(),
                    y: 0.0,
                }],
                ..Default::default()
            },
        ));
    }
    out
}

/// Prints the one-line result of a solve.
pub fn describe(s: &SolveSummary) -> String {
    let gamma = s.gamma.map_or("n/a".to_string(), |g| format!("{g:.6e}"));
    format!(
        "{:?} after {} iterations in {:.1} ms: J = {:.3e}, max defect = {:.3e}, robustness = {}; outputs in {}",
        s.status,
        s.iterations,
        s.wall_ms,
        s.final_j_nl,
        s.final_defect_max,
        gamma,
        s.out_dir.display()
    )
}
