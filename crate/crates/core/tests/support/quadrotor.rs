//! The charging-station scenario built directly against the library API.

use nalgebra::DVector;

use ctstl_core::dynamics::PointMass3d;
use ctstl_core::stl::{parse_formula, ParseContext};
use ctstl_core::transcription::GridSpec;
use ctstl_core::scp::TrajectoryProblem;
use ctstl_core::{Formula, GmsrConfig};

pub const G0: f64 = 9.806;
pub const T_FINAL: f64 = 10.7649;
pub const V_SAFE: f64 = 5.0;
pub const V_MAX: f64 = 10.0;
pub const T_MAX: f64 = 1.75 * G0;
pub const D_C: f64 = 0.2;
pub const R_C: [f64; 3] = [2.5, -10.0, 0.0];

pub fn formula() -> Formula {
    let pm = PointMass3d::new(1.0, G0);
    use ctstl_core::dynamics::DynamicsModel;
    let mut ctx = ParseContext::new(pm.channels())
        .with_constant("ct", std::f64::consts::FRAC_PI_4.cos())
        .with_constant("tmax", T_MAX)
        .with_constant("vmax", V_MAX)
        .with_constant("vsafe", V_SAFE)
        .with_constant("dc", D_C)
        .with_constant("rcx", R_C[0])
        .with_constant("rcy", R_C[1])
        .with_constant("rcz", R_C[2])
        .with_constant("tf", T_FINAL);
    let defs = [
        ("tilt", "(ct * uz)^2 - ux^2 - uy^2 >= 0"),
        ("thrust", "tmax^2 - ux^2 - uy^2 - uz^2 >= 0"),
        ("speed", "vmax^2 - vx^2 - vy^2 - vz^2 >= 0"),
        ("slow", "vsafe^2 - vx^2 - vy^2 - vz^2 >= 0"),
        ("charge", "dc^2 - (rx - rcx)^2 - (ry - rcy)^2 - (rz - rcz)^2 >= 0"),
    ];
    for (name, text) in defs {
        let f = parse_formula(text, &ctx).unwrap();
        ctx = ctx.with_macro(name, f);
    }
    parse_formula("G[0, tf] (tilt & thrust & speed) & (slow U[0, tf] charge)", &ctx).unwrap()
}

pub fn problem() -> TrajectoryProblem {
    TrajectoryProblem {
        model: Box::new(PointMass3d::new(1.0, G0)),
        grid: GridSpec::new(5, 10, T_FINAL).unwrap(),
        formula: Some(formula()),
        x_init: DVector::from_column_slice(&[-10.0, -10.0, 0.0, 0.0, 0.0, 0.0]),
        x_final: DVector::from_column_slice(&[10.0, 10.0, 0.0, 0.0, 0.0, 0.0]),
        gmsr: GmsrConfig::new(0.005).unwrap(),
    }
}
