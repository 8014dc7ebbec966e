//! Vehicle model used in the guidance experiments: first-order speed lag,
//! speed-dependent turn-rate cap, explicit Euler integration. The Dubins
//! reference vehicle used by the benchmark lives in [`dubins`].

pub mod dubins;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Point, Pose};

pub use dubins::{dubins_shortest_path, DubinsPath, DubinsWord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("u_lon = {0} outside [{1}, {2}]")]
    LongitudinalOutOfBounds(f64, f64, f64),
    #[error("u_lat = {0} outside [{1}, {2}]")]
    LateralOutOfBounds(f64, f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// m/s
    pub v_max: f64,
    /// rad/s
    pub omega_max: f64,
    /// 1/s
    pub k_acc: f64,
    /// 1/s
    pub k_drag: f64,
    pub u_lon_min: f64,
    pub u_lon_max: f64,
    /// m/s^2
    pub u_lat_min: f64,
    pub u_lat_max: f64,
    /// s
    pub dt: f64,
    /// Speed floor inside the turn-rate formula (m/s).
    pub v_floor: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            v_max: 5.20,
            omega_max: 0.65,
            k_acc: 7.50,
            k_drag: 0.88,
            u_lon_min: 0.0,
            u_lon_max: 0.62,
            u_lat_min: -0.75,
            u_lat_max: 0.75,
            dt: 0.02,
            v_floor: 0.1,
        }
    }
}

impl VehicleParams {
    /// Time constant of the command-to-speed lag (s).
    pub fn time_constant(&self) -> f64 {
        1.0 / self.k_drag
    }

    /// Steady-state speed of the lag model under a constant `u_lon`.
    pub fn steady_speed(&self, u_lon: f64) -> f64 {
        self.k_acc * u_lon / self.k_drag
    }

    /// Turning radius (m) achievable at speed `v`.
    pub fn turn_radius(&self, v: f64) -> f64 {
        v / speed_turnrate_limit(v, self)
    }

    pub fn check(&self, u: ControlInput) -> Result<(), DynamicsError> {
        const TOL: f64 = 1e-12;
        if !(u.u_lon >= self.u_lon_min - TOL && u.u_lon <= self.u_lon_max + TOL) {
            return Err(DynamicsError::LongitudinalOutOfBounds(
                u.u_lon,
                self.u_lon_min,
                self.u_lon_max,
            ));
        }
        if !(u.u_lat >= self.u_lat_min - TOL && u.u_lat <= self.u_lat_max + TOL) {
            return Err(DynamicsError::LateralOutOfBounds(
                u.u_lat,
                self.u_lat_min,
                self.u_lat_max,
            ));
        }
        Ok(())
    }

    /// Clamps a control into the admissible box.
    pub fn saturate(&self, u: ControlInput) -> ControlInput {
        ControlInput {
            u_lon: u.u_lon.clamp(self.u_lon_min, self.u_lon_max),
            u_lat: u.u_lat.clamp(self.u_lat_min, self.u_lat_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Heading in (-pi, pi].
    pub psi: f64,
    pub v: f64,
}

impl VehicleState {
    pub fn at_rest(pose: Pose) -> Self {
        Self {
            x: pose.x,
            y: pose.y,
            psi: wrap_angle(pose.psi),
            v: 0.0,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.psi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// 1/s
    pub u_lon: f64,
    /// m/s^2
    pub u_lat: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput {
        u_lon: 0.0,
        u_lat: 0.0,
    };

    pub const fn new(u_lon: f64, u_lat: f64) -> Self {
        Self { u_lon, u_lat }
    }
}

/// Maximum turn rate (rad/s) available at speed `v`.
pub fn speed_turnrate_limit(v: f64, params: &VehicleParams) -> f64 {
    (params.u_lat_max / v.max(params.v_floor)).min(params.omega_max)
}

/// Turn rate produced by a lateral command at speed `v`.
pub fn turn_rate(v: f64, u_lat: f64, params: &VehicleParams) -> f64 {
    if u_lat == 0.0 {
        return 0.0;
    }
    (u_lat.abs() / v.max(params.v_floor))
        .min(params.omega_max)
        .copysign(u_lat)
}

/// One explicit Euler step of length `params.dt`.
pub fn step(
    state: VehicleState,
    u: ControlInput,
    params: &VehicleParams,
) -> Result<VehicleState, DynamicsError> {
    params.check(u)?;
    let dt = params.dt;
    let psi_dot = turn_rate(state.v, u.u_lat, params);
    let v_dot = params.k_acc * u.u_lon - params.k_drag * state.v;
    Ok(VehicleState {
        x: state.x + state.v * state.psi.cos() * dt,
        y: state.y + state.v * state.psi.sin() * dt,
        psi: wrap_angle(state.psi + psi_dot * dt),
        v: (state.v + v_dot * dt).clamp(0.0, params.v_max),
    })
}
