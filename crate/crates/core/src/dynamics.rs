//! Continuous-time dynamics `xdot = F(t, x, u)` with analytic Jacobians.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

pub trait DynamicsModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    /// Predicate channel names of the state components, in order.
    fn state_channels(&self) -> Vec<String>;
    /// Predicate channel names of the control components, in order.
    fn control_channels(&self) -> Vec<String>;
    fn rhs(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
    fn jac_x(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;
    fn jac_u(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;
    /// Control used by the initial guess (e.g. hover thrust).
    fn nominal_control(&self) -> DVector<f64>;
    /// `(position, velocity)` state index pairs. Initial guesses set each
    /// velocity to the slope of the interpolated position.
    fn kinematic_pairs(&self) -> Vec<(usize, usize)> {
        Vec::new()
    }

    /// State channels followed by control channels.
    fn channels(&self) -> Vec<String> {
        let mut ch = self.state_channels();
        ch.extend(self.control_channels());
        ch
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown dynamics model `{0}`")]
    Unknown(String),
    #[error("model `{model}` does not take parameter `{param}`")]
    UnknownParameter { model: String, param: String },
    #[error("parameter `{0}` must be positive and finite")]
    BadParameter(String),
}

/// Identifiers accepted by [`build_model`].
pub const MODEL_IDS: [&str; 2] = ["point_mass_3d", "double_integrator_1d"];

/// Instantiates a built-in model by id. Missing parameters take defaults.
pub fn build_model(
    id: &str,
    params: &BTreeMap<String, f64>,
) -> Result<Box<dyn DynamicsModel>, ModelError> {
    let allowed: &[&str] = match id {
        "point_mass_3d" => &["mass", "g0"],
        "double_integrator_1d" => &[],
        other => return Err(ModelError::Unknown(other.to_string())),
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(ModelError::UnknownParameter {
            model: id.to_string(),
            param: k.clone(),
        });
    }
    let get = |name: &str, default: f64| -> Result<f64, ModelError> {
        let v = params.get(name).copied().unwrap_or(default);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(ModelError::BadParameter(name.to_string()))
        }
    };
    Ok(match id {
        "point_mass_3d" => Box::new(PointMass3d::new(get("mass", 1.0)?, get("g0", 9.806)?)),
        _ => Box::new(DoubleIntegrator1d),
    })
}

/// Translational point mass under thrust and gravity:
/// `rdot = v`, `vdot = u / mass - (0, 0, g0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass3d {
    pub mass: f64,
    pub g0: f64,
}

impl PointMass3d {
    pub fn new(mass: f64, g0: f64) -> Self {
        Self { mass, g0 }
    }
}

impl DynamicsModel for PointMass3d {
    fn state_dim(&self) -> usize {
        6
    }

    fn control_dim(&self) -> usize {
        3
    }

    fn state_channels(&self) -> Vec<String> {
        ["rx", "ry", "rz", "vx", "vy", "vz"].map(String::from).to_vec()
    }

    fn control_channels(&self) -> Vec<String> {
        ["ux", "uy", "uz"].map(String::from).to_vec()
    }

    fn rhs(&self, _t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut dx = DVector::zeros(6);
        for i in 0..3 {
            dx[i] = x[3 + i];
            dx[3 + i] = u[i] / self.mass;
        }
        dx[5] -= self.g0;
        dx
    }

    fn jac_x(&self, _t: f64, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(6, 6);
        for i in 0..3 {
            a[(i, 3 + i)] = 1.0;
        }
        a
    }

    fn jac_u(&self, _t: f64, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(6, 3);
        for i in 0..3 {
            b[(3 + i, i)] = 1.0 / self.mass;
        }
        b
    }

    fn nominal_control(&self) -> DVector<f64> {
        DVector::from_vec(vec![0.0, 0.0, self.mass * self.g0])
    }

    fn kinematic_pairs(&self) -> Vec<(usize, usize)> {
        vec![(0, 3), (1, 4), (2, 5)]
    }
}

/// `rdot = v`, `vdot = u` on a line.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleIntegrator1d;

impl DynamicsModel for DoubleIntegrator1d {
    fn state_dim(&self) -> usize {
        2
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn state_channels(&self) -> Vec<String> {
        vec!["r".into(), "v".into()]
    }

    fn control_channels(&self) -> Vec<String> {
        vec!["u".into()]
    }

    fn rhs(&self, _t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![x[1], u[0]])
    }

    fn jac_x(&self, _t: f64, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])
    }

    fn jac_u(&self, _t: f64, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0])
    }

    fn nominal_control(&self) -> DVector<f64> {
        DVector::zeros(1)
    }

    fn kinematic_pairs(&self) -> Vec<(usize, usize)> {
        vec![(0, 1)]
    }
}
