//! Spherical interpolation between embeddings.
//!
//! Inputs are not normalized, so a path between vectors of different norms
//! traces an ellipse in their common plane rather than a circle. Angles are
//! degrees at the API surface and radians internally.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{ensure_finite, norm};

/// Smallest admissible distance of θ from 0 and π.
pub const COLLINEAR_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlerpPath {
    pub degrees: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub source: Vec<f64>,
    pub destination: Vec<f64>,
    pub theta_rad: f64,
}

impl SlerpPath {
    /// Point at `deg` if the path has one.
    pub fn point_at(&self, deg: f64) -> Option<&[f64]> {
        self.degrees
            .iter()
            .position(|&d| d == deg)
            .map(|i| self.points[i].as_slice())
    }
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Validation(format!(
            "vectors must be non-empty and of equal length, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    ensure_finite(a, "first vector")?;
    ensure_finite(b, "second vector")
}

/// Angle in `[0, π]` between two nonzero vectors.
///
/// Equal to `acos(cos_sim(a, b))`, evaluated as `2·atan2(‖â − b̂‖, ‖â + b̂‖)`
/// on the unit vectors, which stays accurate near 0 and π where `acos` loses
/// half its digits.
pub fn angle_between(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain(
            "angle with a zero vector is undefined".into(),
        ));
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Ok(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

fn interpolation_angle(e1: &[f64], e2: &[f64]) -> Result<f64> {
    let theta = angle_between(e1, e2)?;
    if theta < COLLINEAR_EPS || std::f64::consts::PI - theta < COLLINEAR_EPS {
        return Err(Error::Geometry { theta_rad: theta });
    }
    Ok(theta)
}

fn slerp_with_angle(e1: &[f64], e2: &[f64], theta: f64, t: f64) -> Vec<f64> {
    let s = theta.sin();
    let (c1, c2) = (((1.0 - t) * theta).sin() / s, (t * theta).sin() / s);
    e1.iter().zip(e2).map(|(a, b)| c1 * a + c2 * b).collect()
}

/// `sin((1−t)θ)/sin θ · e1 + sin(tθ)/sin θ · e2` for any real `t`.
pub fn slerp(e1: &[f64], e2: &[f64], t: f64) -> Result<Vec<f64>> {
    if !t.is_finite() {
        return Err(Error::Validation(format!(
            "interpolation parameter must be finite, got {t}"
        )));
    }
    let theta = interpolation_angle(e1, e2)?;
    Ok(slerp_with_angle(e1, e2, theta, t))
}

/// SLERP evaluated at `ω = 0, step, 2·step, …` below 360 degrees with
/// `t = ω/θ`, sweeping the whole great circle through `e1` and `e2`.
pub fn full_circle_slerp(e1: &[f64], e2: &[f64], step_deg: f64) -> Result<SlerpPath> {
    if !(step_deg.is_finite() && step_deg > 0.0 && step_deg <= 360.0) {
        return Err(Error::Validation(format!(
            "step must be in (0, 360] degrees, got {step_deg}"
        )));
    }
    let theta = interpolation_angle(e1, e2)?;
    let mut degrees = Vec::new();
    let mut points = Vec::new();
    for k in 0u32.. {
        let omega = k as f64 * step_deg;
        if omega >= 360.0 {
            break;
        }
        degrees.push(omega);
        points.push(slerp_with_angle(e1, e2, theta, omega.to_radians() / theta));
    }
    Ok(SlerpPath {
        degrees,
        points,
        source: e1.to_vec(),
        destination: e2.to_vec(),
        theta_rad: theta,
    })
}

/// `−e1`, the 180° point of every full-circle path from `e1`.
pub fn opposite_embedding(e1: &[f64]) -> Result<Vec<f64>> {
    if e1.is_empty() {
        return Err(Error::Validation("empty vector".into()));
    }
    ensure_finite(e1, "vector")?;
    if e1.iter().all(|&v| v == 0.0) {
        return Err(Error::Domain(
            "opposite of the zero vector is undefined".into(),
        ));
    }
    Ok(e1.iter().map(|v| -v).collect())
}
