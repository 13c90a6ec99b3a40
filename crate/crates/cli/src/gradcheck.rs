//! `ctstl check-grad`: compare analytic derivatives against central finite
//! differences at seeded random decision vectors.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use ctstl_core::dynamics::DynamicsModel;
use ctstl_core::gmsr::{and_with_grad, or_with_grad};
use ctstl_core::robustness::Evaluator;
use ctstl_core::scp::TrajectoryProblem;
use ctstl_core::transcription::{build_dense_trajectory, flow_map, DecisionVector};

use crate::problem::ProblemSpec;
use crate::CliError;

pub const TOLERANCE: f64 = 1e-5;
const STEP: f64 = 1e-6;
/// Sampled points whose aggregator inputs come closer to zero than this are
/// redrawn, since the second derivative jumps there.
const KINK_CLEARANCE: f64 = 1e-3;
const MAX_DRAWS: usize = 200;

#[derive(Debug, Clone, Copy, Default)]
pub struct GradCheckOptions {
    pub seed: u64,
    pub points: usize,
    /// Check at the initial guess with every control set to zero instead of
    /// at random points.
    pub zero_control: bool,
    /// Perturb the model's state Jacobian so the check must fail.
    pub corrupt_jacobian: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub points: usize,
    pub aggregators: f64,
    pub robustness: Option<f64>,
    pub flow_map: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.aggregators.max(self.robustness.unwrap_or(0.0)).max(self.flow_map)
    }
}

/// Normwise relative error `|a - b|_inf / max(|b|_inf, 1e-8)`.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = numeric.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-8);
    diff / scale
}

fn central(f: &mut dyn FnMut(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let rows = f(x).len();
    let mut jac = DMatrix::zeros(rows, x.len());
    for j in 0..x.len() {
        let h = STEP * (1.0 + x[j].abs());
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[j] += h;
        xm[j] -= h;
        let col = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

struct Corrupted(Box<dyn DynamicsModel>);

impl DynamicsModel for Corrupted {
    fn state_dim(&self) -> usize {
        self.0.state_dim()
    }
    fn control_dim(&self) -> usize {
        self.0.control_dim()
    }
    fn state_channels(&self) -> Vec<String> {
        self.0.state_channels()
    }
    fn control_channels(&self) -> Vec<String> {
        self.0.control_channels()
    }
    fn rhs(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.0.rhs(t, x, u)
    }
    fn jac_x(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        let mut a = self.0.jac_x(t, x, u);
        a[(0, 0)] += 0.05;
        a
    }
    fn jac_u(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        self.0.jac_u(t, x, u)
    }
    fn nominal_control(&self) -> DVector<f64> {
        self.0.nominal_control()
    }
    fn kinematic_pairs(&self) -> Vec<(usize, usize)> {
        self.0.kinematic_pairs()
    }
}

/// Gradient of the smooth aggregators on random vectors of mixed sign with
/// entries bounded away from zero.
pub fn check_aggregators(rng: &mut ChaCha8Rng, trials: usize, c: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.gen_range(1..=8);
        let y = DVector::from_fn(n, |_, _| {
            let mag = rng.gen_range(1e-2..2.0);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        });
        for agg in [and_with_grad, or_with_grad] {
            let mut g = vec![0.0; n];
            agg(y.as_slice(), c, &mut g);
            let mut scratch = vec![0.0; n];
            let num = central(
                &mut |v| DVector::from_element(1, agg(v.as_slice(), c, &mut scratch)),
                &y,
            );
            worst = worst.max(rel_err(&g, num.as_slice()));
        }
    }
    worst
}

/// Robustness gradient with respect to the decision vector and the smallest
/// aggregator input seen on the way.
pub fn robustness_gradient(problem: &TrajectoryProblem, z: &DecisionVector) -> Option<(f64, DVector<f64>, f64)> {
    let f = problem.formula.as_ref()?;
    let dense = build_dense_trajectory(problem.model.as_ref(), z, &problem.grid).ok()?;
    let signal = dense.to_signal();
    let rob = Evaluator::new(f, &signal, problem.gmsr).ok()?.robustness(0).ok()?;
    Some((rob.value, dense.pull_back(&rob.gradient), rob.min_abs_input))
}

fn robustness_value(problem: &TrajectoryProblem, z: &DecisionVector) -> f64 {
    let f = problem.formula.as_ref().expect("checked by caller");
    let dense = build_dense_trajectory(problem.model.as_ref(), z, &problem.grid).expect("finite trajectory");
    Evaluator::new(f, &dense.to_signal(), problem.gmsr)
        .and_then(|mut e| e.value(0))
        .expect("formula evaluates on the problem grid")
}

pub fn check_robustness(problem: &TrajectoryProblem, z: &DecisionVector) -> Option<f64> {
    let (_, grad, _) = robustness_gradient(problem, z)?;
    let template = z.clone();
    let num = central(
        &mut |v| {
            let mut zz = template.clone();
            zz.as_vector_mut().copy_from(v);
            DVector::from_element(1, robustness_value(problem, &zz))
        },
        z.as_vector(),
    );
    Some(rel_err(grad.as_slice(), num.as_slice()))
}

/// Flow-map Jacobians of every interval against differences of the endpoint.
pub fn check_flow_maps(problem: &TrajectoryProblem, z: &DecisionVector) -> f64 {
    let model = problem.model.as_ref();
    let (n, m) = (model.state_dim(), model.control_dim());
    let mut worst: f64 = 0.0;
    for k in 0..problem.grid.nodes - 1 {
        let (x, u0, u1) = (z.state(k), z.control(k), z.control(k + 1));
        let Ok(fm) = flow_map(model, &x, &u0, &u1, k, &problem.grid) else {
            continue;
        };
        let mut packed = DVector::zeros(n + 2 * m);
        packed.rows_mut(0, n).copy_from(&x);
        packed.rows_mut(n, m).copy_from(&u0);
        packed.rows_mut(n + m, m).copy_from(&u1);
        let num = central(
            &mut |v| {
                let xs = v.rows(0, n).into_owned();
                let a = v.rows(n, m).into_owned();
                let b = v.rows(n + m, m).into_owned();
                flow_map(model, &xs, &a, &b, k, &problem.grid)
                    .map(|f| f.value)
                    .unwrap_or_else(|_| DVector::from_element(n, f64::NAN))
            },
            &packed,
        );
        let mut analytic = DMatrix::zeros(n, n + 2 * m);
        analytic.columns_mut(0, n).copy_from(&fm.d_state);
        analytic.columns_mut(n, m).copy_from(&fm.d_control);
        analytic.columns_mut(n + m, m).copy_from(&fm.d_control_next);
        let err = rel_err(analytic.as_slice(), num.as_slice());
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    worst
}

/// Initial guess plus a uniform perturbation of relative size about 0.3.
fn random_point(problem: &TrajectoryProblem, rng: &mut ChaCha8Rng) -> DecisionVector {
    let mut z = problem.initial_guess();
    for v in z.as_vector_mut().iter_mut() {
        *v += rng.gen_range(-0.3..0.3) * (1.0 + 0.3 * v.abs());
    }
    z
}

fn zero_control_point(problem: &TrajectoryProblem) -> DecisionVector {
    let mut z = problem.initial_guess();
    let m = problem.model.control_dim();
    for k in 0..z.nodes() {
        z.set_control(k, &DVector::zeros(m));
    }
    z
}

pub fn check(problem: TrajectoryProblem, opts: &GradCheckOptions) -> GradCheckReport {
    let mut problem = problem;
    if opts.corrupt_jacobian {
        let model = std::mem::replace(&mut problem.model, Box::new(ctstl_core::dynamics::DoubleIntegrator1d));
        problem.model = Box::new(Corrupted(model));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let aggregators = check_aggregators(&mut rng, 100, problem.gmsr.c);

    let mut points = Vec::new();
    if opts.zero_control {
        points.push(zero_control_point(&problem));
    } else {
        for _ in 0..opts.points.max(1) {
            let mut chosen = None;
            for _ in 0..MAX_DRAWS {
                let z = random_point(&problem, &mut rng);
                let clear = match robustness_gradient(&problem, &z) {
                    Some((_, _, min_abs)) => min_abs > KINK_CLEARANCE,
                    None => problem.formula.is_none(),
                };
                if clear {
                    chosen = Some(z);
                    break;
                }
            }
            match chosen {
                Some(z) => points.push(z),
                None => log::warn!("no kink-free point found in {MAX_DRAWS} draws"),
            }
        }
    }

    let mut robustness = problem.formula.as_ref().map(|_| 0.0f64);
    let mut flow: f64 = 0.0;
    for z in &points {
        if let Some(r) = robustness.as_mut() {
            *r = r.max(check_robustness(&problem, z).unwrap_or(f64::INFINITY));
        }
        flow = flow.max(check_flow_maps(&problem, z));
    }
    if points.is_empty() {
        flow = f64::INFINITY;
    }
    let mut report = GradCheckReport {
        seed: opts.seed,
        points: points.len(),
        aggregators,
        robustness,
        flow_map: flow,
        tolerance: TOLERANCE,
        passed: false,
    };
    report.passed = report.worst() <= TOLERANCE;
    report
}

pub fn run(problem_path: &Path, opts: &GradCheckOptions) -> Result<GradCheckReport, CliError> {
    let problem = ProblemSpec::from_path(problem_path)?.build()?;
    let report = check(problem.trajectory, opts);
    log::info!("gradient check: {report:?}");
    if report.passed {
        Ok(report)
    } else {
        Err(CliError::Failed(format!(
            "max relative error {:.3e} exceeds {TOLERANCE:e} (aggregators {:.3e}, robustness {}, flow maps {:.3e})",
            report.worst(),
            report.aggregators,
            report.robustness.map_or("n/a".into(), |r| format!("{r:.3e}")),
            report.flow_map
        )))
    }
}
