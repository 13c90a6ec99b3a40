#[path = "support/fd.rs"]
mod fd;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctstl_core::dynamics::{DoubleIntegrator1d, DynamicsModel, PointMass3d};
use ctstl_core::transcription::{
    build_dense_trajectory, defects, discretize, flow_map, forward_simulate, initial_guess,
    integrate_interval, DecisionVector, GridSpec,
};

/// `xdot = -x^2`, exact solution `1 / (1 + t)` from `x0 = 1`.
struct Riccati;

impl DynamicsModel for Riccati {
    fn state_dim(&self) -> usize {
        1
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn state_channels(&self) -> Vec<String> {
        vec!["x".into()]
    }
    fn control_channels(&self) -> Vec<String> {
        vec!["u".into()]
    }
    fn rhs(&self, _t: f64, x: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, -x[0] * x[0])
    }
    fn jac_x(&self, _t: f64, x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, -2.0 * x[0])
    }
    fn jac_u(&self, _t: f64, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(1, 1)
    }
    fn nominal_control(&self) -> DVector<f64> {
        DVector::zeros(1)
    }
}

/// `xdot = -x`.
struct Decay;

impl DynamicsModel for Decay {
    fn state_dim(&self) -> usize {
        1
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn state_channels(&self) -> Vec<String> {
        vec!["x".into()]
    }
    fn control_channels(&self) -> Vec<String> {
        vec!["u".into()]
    }
    fn rhs(&self, _t: f64, x: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        -x
    }
    fn jac_x(&self, _t: f64, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, -1.0)
    }
    fn jac_u(&self, _t: f64, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(1, 1)
    }
    fn nominal_control(&self) -> DVector<f64> {
        DVector::zeros(1)
    }
}

/// Nonlinear test model with state-control coupling:
/// `xdot_0 = x_1 u_0`, `xdot_1 = -sin(x_0) + u_1^2 - 0.3 x_1`.
struct Pendulumish;

impl DynamicsModel for Pendulumish {
    fn state_dim(&self) -> usize {
        2
    }
    fn control_dim(&self) -> usize {
        2
    }
    fn state_channels(&self) -> Vec<String> {
        vec!["a".into(), "b".into()]
    }
    fn control_channels(&self) -> Vec<String> {
        vec!["p".into(), "q".into()]
    }
    fn rhs(&self, _t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_column_slice(&[x[1] * u[0], -x[0].sin() + u[1] * u[1] - 0.3 * x[1]])
    }
    fn jac_x(&self, _t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, u[0], -x[0].cos(), -0.3])
    }
    fn jac_u(&self, _t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[x[1], 0.0, 0.0, 2.0 * u[1]])
    }
    fn nominal_control(&self) -> DVector<f64> {
        DVector::zeros(2)
    }
}

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn random_z(rng: &mut ChaCha8Rng, nodes: usize, n: usize, m: usize, scale: f64) -> DecisionVector {
    let data = DVector::from_fn(nodes * (n + m), |_, _| rng.gen_range(-scale..scale));
    DecisionVector::from_vec(data, nodes, n, m).unwrap()
}

#[test]
fn exponential_decay_single_step() {
    let g = GridSpec::new(2, 1, 0.1).unwrap();
    let arc = integrate_interval(&Decay, &v(&[1.0]), &v(&[0.0]), &v(&[0.0]), 0, &g).unwrap();
    let x = arc.states[1][0];
    // one RK4 step reproduces the degree-4 Taylor polynomial of e^-h
    let h: f64 = 0.1;
    let taylor = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
    assert!((x - taylor).abs() < 1e-15);
    assert!((x - (-0.1f64).exp()).abs() < 1e-7);
}

fn riccati_error(substeps: usize) -> f64 {
    let g = GridSpec::new(2, substeps, 1.0).unwrap();
    let arc = integrate_interval(&Riccati, &v(&[1.0]), &v(&[0.0]), &v(&[0.0]), 0, &g).unwrap();
    (arc.states.last().unwrap()[0] - 0.5).abs()
}

#[test]
fn rk4_convergence_order() {
    // h = 0.1, 0.05, 0.025
    let errs: Vec<f64> = [10, 20, 40].iter().map(|&n| riccati_error(n)).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
        assert!(ratio.log2() >= 3.8);
    }
}

#[test]
fn interval_sensitivities_match_finite_differences() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = GridSpec::new(4, 5, 3.0).unwrap();
        let k = rng.gen_range(0..3);
        let p = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
        let split = |p: &DVector<f64>| (p.rows(0, 2).into_owned(), p.rows(2, 2).into_owned(), p.rows(4, 2).into_owned());
        let (x, u0, u1) = split(&p);
        let arc = integrate_interval(&Pendulumish, &x, &u0, &u1, k, &g).unwrap();
        for i in 0..=g.substeps {
            let f = |p: &DVector<f64>| {
                let (x, u0, u1) = split(p);
                integrate_interval(&Pendulumish, &x, &u0, &u1, k, &g).unwrap().states[i].clone()
            };
            let num = fd::jacobian(&f, &p, 1e-6);
            let err = fd::rel_err(arc.sensitivities[i].as_slice(), num.as_slice(), 1e-8);
            assert!(err <= 1e-6, "seed {seed}, subnode {i}: {err:e}");
        }
    }
}

#[test]
fn flow_map_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let g = GridSpec::new(3, 8, 2.0).unwrap();
    for _ in 0..5 {
        let x = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let u0 = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let u1 = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let fm = flow_map(&Pendulumish, &x, &u0, &u1, 1, &g).unwrap();
        let fx = fd::jacobian(&|x: &DVector<f64>| flow_map(&Pendulumish, x, &u0, &u1, 1, &g).unwrap().value, &x, 1e-6);
        let fu0 = fd::jacobian(&|u: &DVector<f64>| flow_map(&Pendulumish, &x, u, &u1, 1, &g).unwrap().value, &u0, 1e-6);
        let fu1 = fd::jacobian(&|u: &DVector<f64>| flow_map(&Pendulumish, &x, &u0, u, 1, &g).unwrap().value, &u1, 1e-6);
        assert!(fd::rel_err(fm.d_state.as_slice(), fx.as_slice(), 1e-8) <= 1e-6);
        assert!(fd::rel_err(fm.d_control.as_slice(), fu0.as_slice(), 1e-8) <= 1e-6);
        assert!(fd::rel_err(fm.d_control_next.as_slice(), fu1.as_slice(), 1e-8) <= 1e-6);
    }
}

#[test]
fn dense_sensitivities_are_local() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = GridSpec::new(4, 3, 3.0).unwrap();
    let z = random_z(&mut rng, 4, 2, 2, 1.0);
    let dense = build_dense_trajectory(&Pendulumish, &z, &g).unwrap();
    for m in 0..dense.len() {
        let f = |zz: &DVector<f64>| {
            let d = DecisionVector::from_vec(zz.clone(), 4, 2, 2).unwrap();
            build_dense_trajectory(&Pendulumish, &d, &g).unwrap().states[m].clone()
        };
        let num = fd::jacobian(&f, z.as_vector(), 1e-6);
        let k = dense.owner[m];
        for j in 0..4 {
            let xcols = num.columns(z.state_offset(j), 2);
            if j != k {
                assert_eq!(xcols.amax(), 0.0, "sample {m} depends on x_{j}");
            }
            let ucols = num.columns(z.control_offset(j), 2);
            if j != k && j != k + 1 {
                assert_eq!(ucols.amax(), 0.0, "sample {m} depends on u_{j}");
            }
        }
    }
}

#[test]
fn pull_back_matches_finite_differences() {
    // a scalar functional of the dense table: sum of weighted squares
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let g = GridSpec::new(3, 4, 2.0).unwrap();
    let z = random_z(&mut rng, 3, 2, 2, 1.0);
    let dense = build_dense_trajectory(&Pendulumish, &z, &g).unwrap();
    let width = 4;
    let weights: Vec<f64> = (0..dense.len() * width).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let functional = |zz: &DVector<f64>| {
        let d = DecisionVector::from_vec(zz.clone(), 3, 2, 2).unwrap();
        let s = build_dense_trajectory(&Pendulumish, &d, &g).unwrap().to_signal();
        s.data().iter().zip(&weights).map(|(a, w)| w * a * a).sum::<f64>()
    };
    let sig = dense.to_signal();
    let dense_grad: Vec<f64> = sig.data().iter().zip(&weights).map(|(a, w)| 2.0 * w * a).collect();
    let an = dense.pull_back(&dense_grad);
    let num = fd::gradient(&functional, z.as_vector(), 1e-6);
    assert!(fd::rel_err(an.as_slice(), num.as_slice(), 1e-8) <= 1e-6);
}

#[test]
fn boundary_samples_belong_to_earlier_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = GridSpec::new(3, 5, 2.0).unwrap();
    let z = random_z(&mut rng, 3, 2, 2, 1.0);
    let dense = build_dense_trajectory(&Pendulumish, &z, &g).unwrap();
    let arc0 = integrate_interval(&Pendulumish, &z.state(0), &z.control(0), &z.control(1), 0, &g).unwrap();
    let n = g.substeps;
    // sample N (0-based) is the terminal subnode of the first interval
    assert_eq!(dense.states[n], arc0.states[n]);
    assert_ne!(dense.states[n], z.state(1));
    assert_eq!(dense.owner[n], 0);
    assert_eq!(dense.owner[n + 1], 1);
    // FOH endpoint consistency
    assert_eq!(dense.controls[n], z.control(1));
    assert_eq!(dense.controls[0], z.control(0));
    assert_eq!(dense.controls[2 * n], z.control(2));
    assert_eq!(dense.times[0], 0.0);
    assert_eq!(*dense.times.last().unwrap(), 2.0);
}

#[test]
fn defects_of_simulated_trajectory_vanish() {
    let pm = PointMass3d::new(1.0, 9.806);
    let g = GridSpec::new(5, 10, 10.7649).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let controls: Vec<DVector<f64>> = (0..5)
        .map(|_| v(&[rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), 9.806 + rng.gen_range(-1.0..1.0)]))
        .collect();
    let z = forward_simulate(&pm, &v(&[-10.0, -10.0, 0.0, 0.0, 0.0, 0.0]), &controls, &g).unwrap();
    let d = defects(&pm, &z, &g).unwrap();
    assert_eq!(d.len(), 4);
    for dk in &d {
        assert!(dk.amax() <= 1e-12);
    }
    assert_eq!(build_dense_trajectory(&pm, &z, &g).unwrap().len(), 41);

    // perturbing x_2 moves only the first defect, by exactly that amount
    let eps = 1e-3;
    let mut zp = z.clone();
    let off = zp.state_offset(1);
    zp.as_vector_mut()[off] += eps;
    let dp = defects(&pm, &zp, &g).unwrap();
    assert!((dp[0][0] - eps).abs() <= 1e-12);
    for i in 1..6 {
        assert!(dp[0][i].abs() <= 1e-12);
    }
}

#[test]
fn defect_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let g = GridSpec::new(4, 3, 1.5).unwrap();
    for _ in 0..5 {
        let z = random_z(&mut rng, 4, 2, 2, 1.0);
        let disc = discretize(&Pendulumish, &z, &g).unwrap();
        let f = |zz: &DVector<f64>| {
            let d = DecisionVector::from_vec(zz.clone(), 4, 2, 2).unwrap();
            discretize(&Pendulumish, &d, &g).unwrap().stacked_defects()
        };
        let num = fd::jacobian(&f, z.as_vector(), 1e-6);
        assert!(fd::rel_err(disc.defect_jacobian.as_slice(), num.as_slice(), 1e-8) <= 1e-6);
    }
}

#[test]
fn double_integrator_under_foh_is_exact() {
    // u ramps from 0 to 1 over [0, 1]: v = t^2/2, r = t^3/6
    let g = GridSpec::new(2, 1, 1.0).unwrap();
    let arc = integrate_interval(&DoubleIntegrator1d, &v(&[0.0, 0.0]), &v(&[0.0]), &v(&[1.0]), 0, &g).unwrap();
    let x = arc.states.last().unwrap();
    assert!((x[0] - 1.0 / 6.0).abs() < 1e-15);
    assert!((x[1] - 0.5).abs() < 1e-15);
}

#[test]
fn initial_guess_interpolates() {
    let pm = PointMass3d::new(1.0, 9.806);
    let g = GridSpec::new(5, 10, 10.0).unwrap();
    let xi = v(&[-10.0, -10.0, 0.0, 0.0, 0.0, 0.0]);
    let xf = v(&[10.0, 10.0, 0.0, 0.0, 0.0, 0.0]);
    let z = initial_guess(&pm, &xi, &xf, &g);
    assert_eq!(z.state(0), xi);
    assert_eq!(z.state(4), xf);
    let mid = z.state(2);
    assert!(mid[0].abs() < 1e-12 && mid[1].abs() < 1e-12);
    assert!((mid[3] - 2.0).abs() < 1e-12 && (mid[4] - 2.0).abs() < 1e-12);
    assert_eq!(z.control(3), pm.nominal_control());
}
