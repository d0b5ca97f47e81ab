//! PID loop with trapezoidal integration, an integral clamp and a
//! derivative on the error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bound on the accumulated integral, in error-seconds.
pub const INTEGRAL_LIMIT: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub const fn new(kp: f64, ki: f64, kd: f64) -> Self {
        PidGains { kp, ki, kd }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(self.kp) && ok(self.ki) && ok(self.kd) {
            Ok(())
        } else {
            Err(Error::Config(format!("PID gains must be finite and >= 0: {self:?}")))
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        PidGains::new(a * self.kp, a * self.ki, a * self.kd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
    pub prev_timestamp: Option<u64>,
}

impl PidState {
    pub fn reset(&mut self) {
        *self = PidState::default();
    }

    /// One controller update at `timestamp_ms` with error `setpoint - measured`.
    ///
    /// The first call after a reset only latches the error: it contributes
    /// the proportional term and nothing else.
    pub fn step(&mut self, gains: &PidGains, setpoint: f64, measured: f64, timestamp_ms: u64) -> Result<f64> {
        let error = setpoint - measured;
        let mut derivative = 0.0;
        if let (Some(prev_t), Some(prev_e)) = (self.prev_timestamp, self.prev_error) {
            if timestamp_ms <= prev_t {
                return Err(Error::ClockSkew {
                    previous: prev_t,
                    now: timestamp_ms,
                });
            }
            let dt = (timestamp_ms - prev_t) as f64 / 1000.0;
            self.integral = (self.integral + 0.5 * (error + prev_e) * dt)
                .clamp(-INTEGRAL_LIMIT, INTEGRAL_LIMIT);
            derivative = (error - prev_e) / dt;
        }
        self.prev_error = Some(error);
        self.prev_timestamp = Some(timestamp_ms);
        Ok(gains.kp * error + gains.ki * self.integral + gains.kd * derivative)
    }
}

/// Free-function form of [`PidState::step`].
pub fn pid_step(gains: &PidGains, state: &mut PidState, setpoint: f64, measured: f64, timestamp_ms: u64) -> Result<f64> {
    state.step(gains, setpoint, measured, timestamp_ms)
}
