//! Linear single-track lateral dynamics in path coordinates.
//!
//! State `[e, dpsi, beta, omega]`: lateral deviation, heading error, side
//! slip angle and yaw rate. The only input is the front steering angle; the
//! rear wheels are not steered.

use nalgebra::{Matrix4, SMatrix, Vector4};

/// Below this speed the model is singular.
pub const MIN_SPEED: f64 = 0.5;

/// Default steering limit, rad.
pub const DEFAULT_STEER_LIMIT: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum VehicleError {
    #[error("speed {0} m/s is below the model limit of 0.5 m/s")]
    SpeedTooLow(f64),
    #[error("vehicle parameter {name} must be positive, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleTrackParams {
    pub mass: f64,
    pub yaw_inertia: f64,
    pub lf: f64,
    pub lr: f64,
    pub cf: f64,
    pub cr: f64,
    /// Longitudinal speed, held constant over a planning horizon.
    pub v: f64,
}

impl SingleTrackParams {
    /// Mid-size passenger car.
    pub fn nominal(v: f64) -> Self {
        Self {
            mass: 1500.0,
            yaw_inertia: 2500.0,
            lf: 1.2,
            lr: 1.5,
            cf: 80_000.0,
            cr: 80_000.0,
            v,
        }
    }

    pub fn with_speed(mut self, v: f64) -> Self {
        self.v = v;
        self
    }

    pub fn validate(&self) -> Result<(), VehicleError> {
        for (name, value) in [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("lf", self.lf),
            ("lr", self.lr),
            ("cf", self.cf),
            ("cr", self.cr),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(VehicleError::InvalidParameter { name, value });
            }
        }
        if !(self.v > MIN_SPEED) {
            return Err(VehicleError::SpeedTooLow(self.v));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LateralState {
    pub e: f64,
    pub dpsi: f64,
    pub beta: f64,
    pub omega: f64,
}

impl LateralState {
    pub const ZERO: Self = Self {
        e: 0.0,
        dpsi: 0.0,
        beta: 0.0,
        omega: 0.0,
    };

    pub fn new(e: f64, dpsi: f64, beta: f64, omega: f64) -> Self {
        Self { e, dpsi, beta, omega }
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.e, self.dpsi, self.beta, self.omega)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub delta_f: f64,
}

/// Continuous-time matrices `ẋ = A x + B δf`.
pub fn continuous_matrices(p: &SingleTrackParams) -> Result<(Matrix4<f64>, Vector4<f64>), VehicleError> {
    p.validate()?;
    let SingleTrackParams {
        mass: m,
        yaw_inertia: iz,
        lf,
        lr,
        cf,
        cr,
        v,
    } = *p;
    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, v,   v,                          0.0,
        0.0, 0.0, 0.0,                        1.0,
        0.0, 0.0, -(cf + cr) / (m * v),       (cr * lr - cf * lf) / (m * v * v) - 1.0,
        0.0, 0.0, (cr * lr - cf * lf) / iz,   -(cf * lf * lf + cr * lr * lr) / (iz * v),
    );
    let b = Vector4::new(0.0, 0.0, cf / (m * v), cf * lf / iz);
    Ok((a, b))
}

/// Discrete-time model `x⁺ = Ad x + Bd δf` for a fixed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteModel {
    pub ad: Matrix4<f64>,
    pub bd: Vector4<f64>,
    pub dt: f64,
}

impl DiscreteModel {
    pub fn new(p: &SingleTrackParams, dt: f64) -> Result<Self, VehicleError> {
        let (a, b) = continuous_matrices(p)?;
        let (ad, bd) = discretize(&a, &b, dt);
        Ok(Self { ad, bd, dt })
    }

    pub fn step(&self, x: LateralState, u: ControlInput) -> LateralState {
        step(&self.ad, &self.bd, x, u)
    }
}

/// Zero-order-hold discretization.
///
/// Evaluates the exponential of the augmented matrix `[[A, B], [0, 0]]·dt`
/// by its power series (stopping once a term drops below 1e-12), with
/// scaling and squaring when the matrix norm is large.
pub fn discretize(a: &Matrix4<f64>, b: &Vector4<f64>, dt: f64) -> (Matrix4<f64>, Vector4<f64>) {
    let mut m = SMatrix::<f64, 5, 5>::zeros();
    m.fixed_view_mut::<4, 4>(0, 0).copy_from(&(a * dt));
    m.fixed_view_mut::<4, 1>(0, 4).copy_from(&(b * dt));
    let norm = m.iter().map(|x| x.abs()).fold(0.0, f64::max) * 5.0;
    let mut squarings = 0;
    let mut scaled = m;
    let mut s = norm;
    while s > 0.5 {
        scaled *= 0.5;
        s *= 0.5;
        squarings += 1;
    }
    // squaring amplifies the truncation error
    let tol = 1e-12 / libm::exp2(squarings as f64);
    let mut result = SMatrix::<f64, 5, 5>::identity();
    let mut term = SMatrix::<f64, 5, 5>::identity();
    for k in 1..=60 {
        term = term * scaled * (1.0 / k as f64);
        result += term;
        if term.abs().max() < tol {
            break;
        }
    }
    for _ in 0..squarings {
        result = result * result;
    }
    let ad = result.fixed_view::<4, 4>(0, 0).into_owned();
    let bd = result.fixed_view::<4, 1>(0, 4).into_owned();
    (ad, bd)
}

pub fn step(ad: &Matrix4<f64>, bd: &Vector4<f64>, x: LateralState, u: ControlInput) -> LateralState {
    LateralState::from_vector(&(ad * x.to_vector() + bd * u.delta_f))
}
