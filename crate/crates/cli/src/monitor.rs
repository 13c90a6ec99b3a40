//! `ctstl monitor`: evaluate a formula on a recorded signal with both the
//! smooth and the min/max semantics.

use std::path::{Path, PathBuf};

use serde::Serialize;

use ctstl_core::classic::{classical_robustness, witness};
use ctstl_core::robustness::{Evaluator, RobustnessError};
use ctstl_core::signal::WindowError;
use ctstl_core::stl::{format_formula, parse_formula};
use ctstl_core::{Formula, GmsrConfig, Signal};

use crate::output::write_json;
use crate::problem::{GmsrSpec, ProblemSpec};
use crate::{read_error, write_error, CliError};

/// Classical robustness below this magnitude is treated as a tie, so the
/// smooth value may take either sign there.
pub const SIGN_TOLERANCE: f64 = 1e-9;

/// Robustness of a formula and its top-level subformulas at the first sample.
#[derive(Debug, Clone, Serialize)]
pub struct RobustnessSummary {
    pub formula: String,
    pub anchor_time: f64,
    pub gamma: f64,
    pub classical: f64,
    pub satisfied: bool,
    pub subformulas: Vec<SubformulaValue>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubformulaValue {
    pub formula: String,
    pub gamma: f64,
    pub classical: f64,
}

pub fn summarize(f: &Formula, signal: &Signal, cfg: &GmsrConfig) -> Result<RobustnessSummary, RobustnessError> {
    let gamma = Evaluator::new(f, signal, *cfg)?.value(0)?;
    let classical = classical_robustness(f, signal, 0)?;
    let mut subformulas = Vec::new();
    for g in f.children() {
        subformulas.push(SubformulaValue {
            formula: format_formula(g),
            gamma: Evaluator::new(g, signal, *cfg)?.value(0)?,
            classical: classical_robustness(g, signal, 0)?,
        });
    }
    Ok(RobustnessSummary {
        formula: format_formula(f),
        anchor_time: signal.times()[0],
        gamma,
        classical,
        satisfied: classical >= 0.0,
        subformulas,
    })
}

/// Values at every sample whose look-ahead fits in the signal; `None`
/// elsewhere.
#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub formula: String,
    pub gamma: Vec<Option<f64>>,
    pub classical: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub formula: String,
    pub time: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonitorReport {
    pub formula: String,
    pub gmsr: GmsrConfig,
    pub anchor_time: f64,
    pub gamma: f64,
    pub classical: f64,
    pub verdict: bool,
    /// First witness among the top-level eventually/until obligations.
    pub witness_time: Option<f64>,
    pub witnesses: Vec<Witness>,
    pub times: Vec<f64>,
    pub traces: Vec<Trace>,
}

fn outside(e: &RobustnessError) -> bool {
    matches!(e, RobustnessError::Window(WindowError::OutsideHorizon { .. }))
}

fn trace(f: &Formula, signal: &Signal, cfg: &GmsrConfig) -> Result<Trace, RobustnessError> {
    let mut ev = Evaluator::new(f, signal, *cfg)?;
    let mut gamma = Vec::with_capacity(signal.len());
    let mut classical = Vec::with_capacity(signal.len());
    for m in 0..signal.len() {
        match ev.value(m) {
            Ok(v) => {
                gamma.push(Some(v));
                classical.push(Some(classical_robustness(f, signal, m)?));
            }
            Err(e) if outside(&e) => {
                gamma.push(None);
                classical.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Trace {
        formula: format_formula(f),
        gamma,
        classical,
    })
}

fn signs_disagree(gamma: f64, classical: f64) -> bool {
    classical.abs() > SIGN_TOLERANCE && (gamma >= 0.0) != (classical >= 0.0)
}

/// Evaluates `f` on `signal` and checks that the two semantics agree in
/// sign at every evaluated sample. `flip` negates the smooth values first;
/// it exists only so the disagreement path can be exercised.
pub fn monitor(f: &Formula, signal: &Signal, cfg: &GmsrConfig, flip: bool) -> Result<MonitorReport, CliError> {
    let eval_err = |e: RobustnessError| CliError::Input(format!("cannot evaluate formula: {e}"));
    let s = summarize(f, signal, cfg).map_err(eval_err)?;
    let mut traces = vec![trace(f, signal, cfg).map_err(eval_err)?];
    for g in f.children() {
        traces.push(trace(g, signal, cfg).map_err(eval_err)?);
    }
    let sign = if flip { -1.0 } else { 1.0 };
    for t in &mut traces {
        for v in t.gamma.iter_mut().flatten() {
            *v *= sign;
        }
    }

    for t in &traces {
        for (m, (g, c)) in t.gamma.iter().zip(&t.classical).enumerate() {
            if let (Some(g), Some(c)) = (g, c) {
                if signs_disagree(*g, *c) {
                    return Err(CliError::Failed(format!(
                        "sign disagreement for `{}` at t = {}: smooth {g:e}, classical {c:e}",
                        t.formula,
                        signal.times()[m]
                    )));
                }
            }
        }
    }

    let obligations: Vec<&Formula> = match f {
        Formula::And(args) => args.iter().collect(),
        other => vec![other],
    };
    let mut witnesses = Vec::new();
    for g in obligations {
        if matches!(g, Formula::Eventually(..) | Formula::Until(..)) {
            let w = witness(g, signal, 0).map_err(eval_err)?;
            witnesses.push(Witness {
                formula: format_formula(g),
                time: w.map(|m| signal.times()[m]),
            });
        }
    }

    Ok(MonitorReport {
        formula: s.formula,
        gmsr: *cfg,
        anchor_time: s.anchor_time,
        gamma: sign * s.gamma,
        classical: s.classical,
        verdict: s.satisfied,
        witness_time: witnesses.iter().find_map(|w| w.time),
        witnesses,
        times: signal.times().to_vec(),
        traces,
    })
}

/// Reads a CSV with a header row. Column `t` holds the sample times; every
/// other column is a channel.
pub fn read_signal_csv(path: &Path) -> Result<Signal, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| read_error(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| read_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let t_col = header
        .iter()
        .position(|h| h == "t")
        .ok_or_else(|| CliError::Input(format!("{}: missing time column `t`", path.display())))?;
    let channels: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != t_col)
        .map(|(_, h)| h.clone())
        .collect();
    let mut times = Vec::new();
    let mut data = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| read_error(path, e))?;
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Input(format!(
                    "{}: row {}, column `{}`: `{field}` is not a number",
                    path.display(),
                    line + 1,
                    header[i]
                ))
            })?;
            if i == t_col {
                times.push(v);
            } else {
                data.push(v);
            }
        }
    }
    Signal::new(times, channels, data).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Default)]
pub struct MonitorOptions {
    pub signal: PathBuf,
    /// Formula text; defaults to the problem file's formula.
    pub formula: Option<String>,
    /// Problem file providing constants, named predicates and the formula.
    pub problem: Option<PathBuf>,
    pub constants: Vec<(String, f64)>,
    pub c: Option<f64>,
    pub out: Option<PathBuf>,
    pub flip_smooth_sign: bool,
}

pub fn run(opts: &MonitorOptions) -> Result<MonitorReport, CliError> {
    let signal = read_signal_csv(&opts.signal)?;
    let mut spec = match &opts.problem {
        Some(p) => Some(ProblemSpec::from_path(p)?),
        None => None,
    };
    let mut gmsr = spec.as_ref().map(|s| s.gmsr).unwrap_or_default();
    if let Some(c) = opts.c {
        gmsr = GmsrSpec { c, ..gmsr };
    }
    let cfg = gmsr.config().map_err(|e| CliError::Input(e.to_string()))?;

    let ctx = match &mut spec {
        Some(s) => {
            for (k, v) in &opts.constants {
                s.constants.insert(k.clone(), *v);
            }
            s.parse_context(signal.channels().iter().cloned())?
        }
        None => {
            let mut ctx = ctstl_core::stl::ParseContext::new(signal.channels().iter().cloned());
            for (k, v) in &opts.constants {
                ctx = ctx.with_constant(k.clone(), *v);
            }
            ctx
        }
    };
    let text = opts
        .formula
        .clone()
        .or_else(|| spec.as_ref().and_then(|s| s.formula.clone()))
        .ok_or_else(|| CliError::Input("no formula given".into()))?;
    let f = parse_formula(&text, &ctx).map_err(|e| CliError::Input(format!("formula: {e}")))?;

    let report = monitor(&f, &signal, &cfg, opts.flip_smooth_sign)?;
    if let Some(out) = &opts.out {
        write_json(out, &report).map_err(|e| write_error(out, e))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ctstl_core::stl::ParseContext;

    fn signal(cols: &[(&str, &[f64])]) -> Signal {
        let m = cols[0].1.len();
        let times = (0..m).map(|i| i as f64 * 0.5).collect();
        let mut data = Vec::new();
        for i in 0..m {
            for (_, v) in cols {
                data.push(v[i]);
            }
        }
        Signal::new(times, cols.iter().map(|(n, _)| n.to_string()).collect(), data).unwrap()
    }

    fn parse(text: &str, s: &Signal) -> Formula {
        parse_formula(text, &ParseContext::new(s.channels().iter().cloned())).unwrap()
    }

    #[test]
    fn constant_signal_always() {
        let s = signal(&[("g", &[3.0; 5])]);
        let r = monitor(&parse("G[0, 2] g >= 0", &s), &s, &GmsrConfig::default(), false).unwrap();
        assert!(r.verdict && r.gamma > 0.0 && r.classical == 3.0);
        assert_eq!(r.traces[0].gamma.len(), 5);
        assert!(r.traces[0].gamma[0].is_some() && r.traces[0].gamma[1].is_none());
    }

    #[test]
    fn until_witness() {
        let s = signal(&[
            ("s", &[1.0, 1.0, 1.0, -1.0, -1.0]),
            ("c", &[-1.0, -1.0, 1.0, 1.0, 1.0]),
        ]);
        let r = monitor(&parse("(s >= 0) U[0, 2] (c >= 0)", &s), &s, &GmsrConfig::default(), false).unwrap();
        assert!(r.verdict && r.gamma > 0.0);
        assert_eq!(r.witness_time, Some(1.0));
    }

    #[test]
    fn flipped_sign_is_caught() {
        let s = signal(&[("g", &[3.0; 3])]);
        let err = monitor(&parse("g >= 0", &s), &s, &GmsrConfig::default(), true).unwrap_err();
        assert!(matches!(err, CliError::Failed(_)));
    }

    #[test]
    fn ties_are_not_disagreements() {
        assert!(!signs_disagree(-1e-300, 0.0));
        assert!(signs_disagree(-1e-3, 1e-3));
    }
}
