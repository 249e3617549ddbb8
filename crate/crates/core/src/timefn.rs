//! Scalar functions of time for loads and prescribed values, and the
//! one-step-theta rate formula.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Constant {
        value: f64,
    },
    /// `offset + slope * max(0, t - start)`
    Ramp {
        start: f64,
        slope: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Smooth bump `amplitude * (1 - cos(2 pi s)) / 2` for `s` in [0,1].
    CosinePulse {
        start: f64,
        duration: f64,
        amplitude: f64,
    },
    /// Piecewise linear interpolation, held constant outside the table.
    Table {
        points: Vec<[f64; 2]>,
    },
}

/// Either a plain number or a tagged shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeFunction {
    Value(f64),
    Shape(Shape),
}

impl Default for TimeFunction {
    fn default() -> Self {
        TimeFunction::Value(0.0)
    }
}

impl From<f64> for TimeFunction {
    fn from(v: f64) -> Self {
        TimeFunction::Value(v)
    }
}

impl TimeFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Value(v) => *v,
            TimeFunction::Shape(s) => match s {
                Shape::Constant { value } => *value,
                Shape::Ramp { start, slope, offset } => offset + slope * (t - start).max(0.0),
                Shape::CosinePulse {
                    start,
                    duration,
                    amplitude,
                } => {
                    let s = (t - start) / duration;
                    if (0.0..=1.0).contains(&s) {
                        amplitude * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * s).cos())
                    } else {
                        0.0
                    }
                }
                Shape::Table { points } => {
                    let first = points[0];
                    if t <= first[0] {
                        return first[1];
                    }
                    for w in points.windows(2) {
                        let ([t0, v0], [t1, v1]) = (w[0], w[1]);
                        if t <= t1 {
                            return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
                        }
                    }
                    points[points.len() - 1][1]
                }
            },
        }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("{what}: {m}")));
        match self {
            TimeFunction::Value(v) if !v.is_finite() => bad("value must be finite"),
            TimeFunction::Shape(Shape::CosinePulse { duration, .. }) if !(*duration > 0.0) => {
                bad("pulse duration must be positive")
            }
            TimeFunction::Shape(Shape::Table { points }) => {
                if points.is_empty() {
                    return bad("table needs at least one point");
                }
                if points.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    return bad("table times must increase strictly");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, TimeFunction::Value(v) if *v == 0.0)
    }
}

/// One-step-theta discretization of a first time derivative:
/// `xdot = (x - x_old) / (theta dt) - (1 - theta) / theta * xdot_old`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeScheme {
    pub dt: f64,
    pub theta: f64,
    /// Drops all time derivatives.
    pub steady: bool,
}

impl TimeScheme {
    pub fn new(dt: f64, theta: f64) -> Self {
        TimeScheme { dt, theta, steady: false }
    }

    pub fn steady() -> Self {
        TimeScheme {
            dt: f64::INFINITY,
            theta: 1.0,
            steady: true,
        }
    }

    #[inline]
    pub fn rate(&self, x: f64, x_old: f64, rate_old: f64) -> f64 {
        if self.steady {
            0.0
        } else {
            (x - x_old) / (self.theta * self.dt) - (1.0 - self.theta) / self.theta * rate_old
        }
    }

    /// Derivative of [`TimeScheme::rate`] with respect to `x`.
    #[inline]
    pub fn rate_factor(&self) -> f64 {
        if self.steady {
            0.0
        } else {
            1.0 / (self.theta * self.dt)
        }
    }

    /// `1/dt` contribution to stabilization scalings (zero when steady).
    pub fn inv_dt(&self) -> f64 {
        if self.steady {
            0.0
        } else {
            1.0 / self.dt
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let r = TimeFunction::Shape(Shape::Ramp {
            start: 1000.0,
            slope: 2.0,
            offset: 0.0,
        });
        assert_eq!(r.eval(500.0), 0.0);
        assert_eq!(r.eval(1001.5), 3.0);
        let tab = TimeFunction::Shape(Shape::Table {
            points: vec![[0.0, 1.0], [2.0, 3.0]],
        });
        assert_eq!(tab.eval(1.0), 2.0);
        assert_eq!(tab.eval(5.0), 3.0);
        let p = TimeFunction::Shape(Shape::CosinePulse {
            start: 0.0,
            duration: 2.0,
            amplitude: 4.0,
        });
        assert!((p.eval(1.0) - 4.0).abs() < 1e-14);
        assert_eq!(p.eval(3.0), 0.0);
    }
}
