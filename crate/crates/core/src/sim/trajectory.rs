use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rover motion in the base station's ENU frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    Static {
        position_enu: [f64; 3],
    },
    /// Counter-clockwise loop starting east of the center.
    Circle {
        center_enu: [f64; 3],
        radius_m: f64,
        speed_mps: f64,
    },
    /// Constant speed along straight legs; the rover stops at the last point.
    Polyline {
        waypoints_enu: Vec<[f64; 3]>,
        speed_mps: f64,
    },
    /// Piecewise constant along-track acceleration and yaw rate on a level
    /// road. After the last segment the rover keeps its final velocity.
    Kinematic {
        start_enu: [f64; 3],
        /// Clockwise from north.
        heading_deg: f64,
        speed_mps: f64,
        segments: Vec<Segment>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub duration_s: f64,
    #[serde(default)]
    pub accel_mps2: f64,
    #[serde(default)]
    pub yaw_rate_dps: f64,
}

#[derive(Debug, Clone, Copy)]
struct KinState {
    t: f64,
    pos: Vector3<f64>,
    heading: f64,
    speed: f64,
}

const SIMPSON_PIECES: usize = 256;

fn heading_dir(h: f64) -> Vector3<f64> {
    Vector3::new(h.sin(), h.cos(), 0.0)
}

/// Advance a kinematic state by `tau` seconds under constant `accel` and
/// `yaw_rate` (rad/s).
fn advance(s: &KinState, tau: f64, accel: f64, yaw_rate: f64) -> KinState {
    let vel = |t: f64| heading_dir(s.heading + yaw_rate * t) * (s.speed + accel * t);
    let mut disp = Vector3::zeros();
    if tau > 0.0 {
        let h = tau / SIMPSON_PIECES as f64;
        disp = vel(0.0) + vel(tau);
        for i in 1..SIMPSON_PIECES {
            disp += vel(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        disp *= h / 3.0;
    }
    KinState {
        t: s.t + tau,
        pos: s.pos + disp,
        heading: s.heading + yaw_rate * tau,
        speed: s.speed + accel * tau,
    }
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScenario(format!("trajectory: {m}")));
        match self {
            Trajectory::Static { position_enu } => {
                if position_enu.iter().any(|v| !v.is_finite()) {
                    return bad("position must be finite");
                }
            }
            Trajectory::Circle {
                radius_m, speed_mps, ..
            } => {
                if !(*radius_m > 0.0) || !(*speed_mps >= 0.0) {
                    return bad("circle needs a positive radius and nonnegative speed");
                }
            }
            Trajectory::Polyline {
                waypoints_enu,
                speed_mps,
            } => {
                if waypoints_enu.is_empty() {
                    return bad("polyline needs at least one waypoint");
                }
                if !(*speed_mps >= 0.0) {
                    return bad("speed must be nonnegative");
                }
            }
            Trajectory::Kinematic {
                speed_mps,
                segments,
                ..
            } => {
                let mut v = *speed_mps;
                if !(v >= 0.0) {
                    return bad("speed must be nonnegative");
                }
                for (i, seg) in segments.iter().enumerate() {
                    if !(seg.duration_s > 0.0) || !seg.accel_mps2.is_finite() {
                        return bad(&format!("segment {i} is malformed"));
                    }
                    v += seg.accel_mps2 * seg.duration_s;
                    if v < -1e-9 {
                        return bad(&format!("segment {i} drives the speed negative"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Sample ENU position and velocity at each of `times` (ascending).
    pub fn sample(&self, times: &[f64]) -> Vec<(Vector3<f64>, Vector3<f64>)> {
        match self {
            Trajectory::Static { position_enu } => {
                let p = Vector3::from(*position_enu);
                times.iter().map(|_| (p, Vector3::zeros())).collect()
            }
            Trajectory::Circle {
                center_enu,
                radius_m,
                speed_mps,
            } => {
                let c = Vector3::from(*center_enu);
                let w = speed_mps / radius_m;
                times
                    .iter()
                    .map(|t| {
                        let (s, co) = (w * t).sin_cos();
                        (
                            c + Vector3::new(co, s, 0.0) * *radius_m,
                            Vector3::new(-s, co, 0.0) * *speed_mps,
                        )
                    })
                    .collect()
            }
            Trajectory::Polyline {
                waypoints_enu,
                speed_mps,
            } => {
                let pts: Vec<Vector3<f64>> =
                    waypoints_enu.iter().map(|p| Vector3::from(*p)).collect();
                times
                    .iter()
                    .map(|t| polyline_state(&pts, *speed_mps, *t))
                    .collect()
            }
            Trajectory::Kinematic {
                start_enu,
                heading_deg,
                speed_mps,
                segments,
            } => {
                let mut state = KinState {
                    t: 0.0,
                    pos: Vector3::from(*start_enu),
                    heading: heading_deg.to_radians(),
                    speed: *speed_mps,
                };
                let mut seg_iter = segments.iter();
                let mut current = seg_iter.next().copied();
                let mut seg_end = current.map_or(f64::INFINITY, |s| s.duration_s);
                let mut out = Vec::with_capacity(times.len());
                for &t in times {
                    while t > seg_end {
                        let seg = current.expect("segment boundary implies a segment");
                        state = advance(
                            &state,
                            seg_end - state.t,
                            seg.accel_mps2,
                            seg.yaw_rate_dps.to_radians(),
                        );
                        current = seg_iter.next().copied();
                        seg_end += current.map_or(f64::INFINITY, |s| s.duration_s);
                    }
                    let (a, w) = current.map_or((0.0, 0.0), |s| {
                        (s.accel_mps2, s.yaw_rate_dps.to_radians())
                    });
                    state = advance(&state, t - state.t, a, w);
                    let speed = state.speed.max(0.0);
                    out.push((state.pos, heading_dir(state.heading) * speed));
                }
                out
            }
        }
    }
}

fn polyline_state(pts: &[Vector3<f64>], speed: f64, t: f64) -> (Vector3<f64>, Vector3<f64>) {
    let mut remaining = speed * t;
    for leg in pts.windows(2) {
        let d = leg[1] - leg[0];
        let len = d.norm();
        if len == 0.0 {
            continue;
        }
        if remaining < len {
            let dir = d / len;
            return (leg[0] + dir * remaining, dir * speed);
        }
        remaining -= len;
    }
    (pts[pts.len() - 1], Vector3::zeros())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_kinematic_is_exact() {
        let tr = Trajectory::Kinematic {
            start_enu: [1.0, 2.0, 0.0],
            heading_deg: 90.0,
            speed_mps: 5.0,
            segments: vec![Segment {
                duration_s: 10.0,
                accel_mps2: 1.0,
                yaw_rate_dps: 0.0,
            }],
        };
        let s = tr.sample(&[0.0, 4.0, 10.0, 12.0]);
        // e = 1 + 5 t + t^2 / 2 inside the segment
        assert!((s[1].0.x - (1.0 + 20.0 + 8.0)).abs() < 1e-9);
        assert!((s[1].1.x - 9.0).abs() < 1e-12);
        assert!((s[2].0.x - (1.0 + 50.0 + 50.0)).abs() < 1e-9);
        // constant 15 m/s afterwards
        assert!((s[3].0.x - (101.0 + 30.0)).abs() < 1e-9);
        assert!(s.iter().all(|(p, _)| (p.y - 2.0).abs() < 1e-9));
    }

    #[test]
    fn kinematic_turn_matches_circle() {
        // 90 degree turn at 10 m/s and 9 deg/s: radius = v / w
        let w = 9f64.to_radians();
        let tr = Trajectory::Kinematic {
            start_enu: [0.0, 0.0, 0.0],
            heading_deg: 0.0,
            speed_mps: 10.0,
            segments: vec![Segment {
                duration_s: 10.0,
                accel_mps2: 0.0,
                yaw_rate_dps: 9.0,
            }],
        };
        let s = tr.sample(&[10.0]);
        let r = 10.0 / w;
        assert!((s[0].0 - Vector3::new(r, r, 0.0)).norm() < 1e-9);
        assert!((s[0].1 - Vector3::new(10.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn polyline_stops_at_end() {
        let tr = Trajectory::Polyline {
            waypoints_enu: vec![[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [10.0, 10.0, 0.0]],
            speed_mps: 2.0,
        };
        let s = tr.sample(&[2.0, 7.0, 20.0]);
        assert_eq!(s[0].0, Vector3::new(4.0, 0.0, 0.0));
        assert_eq!(s[1].0, Vector3::new(10.0, 4.0, 0.0));
        assert_eq!(s[1].1, Vector3::new(0.0, 2.0, 0.0));
        assert_eq!(s[2], (Vector3::new(10.0, 10.0, 0.0), Vector3::zeros()));
    }

    #[test]
    fn negative_speed_is_rejected() {
        let tr = Trajectory::Kinematic {
            start_enu: [0.0; 3],
            heading_deg: 0.0,
            speed_mps: 1.0,
            segments: vec![Segment {
                duration_s: 2.0,
                accel_mps2: -1.0,
                yaw_rate_dps: 0.0,
            }],
        };
        assert!(tr.validate().is_err());
    }
}
