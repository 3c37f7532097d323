//! Bloch angles and the total, dynamic and geometric phases of a mixed-state
//! trajectory.
//!
//! With `chi_k = theta/2 + k pi/2`:
//! - total: `sum_k w_k arg(cos chi_k0 cos chi_kt + e^{i dphi} sin chi_k0 sin chi_kt)`,
//!   `w_k = sqrt((1 + (-1)^k r_t)(1 + (-1)^k r_0)) / 2`;
//! - dynamic: `(1/2) sum_k int (1 + (-1)^k r) sin^2 chi_k dphi = (1/2) int (1 - rho_z) dphi`;
//! - geometric: total minus dynamic.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lindblad::BlochTrajectory;

/// Radius below which the Bloch direction is undefined.
pub const PURITY_FLOOR: f64 = 1e-14;
/// Largest accepted azimuth step for the dynamic-phase quadrature.
pub const MAX_DPHI: f64 = 0.1;
/// `|rho_z(inf)|` below which the null branch applies.
pub const NULL_BRANCH_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles {
    pub r: f64,
    pub theta: f64,
    /// Unwrapped azimuth.
    pub phi: f64,
    /// `phi` was carried over because `rho_x = rho_y = 0`.
    pub propagated: bool,
}

impl BlochAngles {
    /// `chi_k = theta/2 + k pi/2`.
    pub fn chi(&self, k: usize) -> f64 {
        0.5 * self.theta + k as f64 * 0.5 * PI
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleTrajectory {
    pub times: Vec<f64>,
    pub angles: Vec<BlochAngles>,
}

impl AngleTrajectory {
    pub fn phi(&self) -> Vec<f64> {
        self.angles.iter().map(|a| a.phi).collect()
    }
}

/// Wrap into `(-pi, pi]`.
fn principal(x: f64) -> f64 {
    let y = x - 2.0 * PI * (x / (2.0 * PI)).round();
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

pub fn to_angles(traj: &BlochTrajectory) -> Result<AngleTrajectory> {
    let mut angles = Vec::with_capacity(traj.len());
    let mut prev: Option<f64> = None;
    for s in traj.states() {
        let r = s.radius();
        if r < PURITY_FLOOR {
            return Err(Error::PurityVanished(r));
        }
        let theta = (s.rho_z / r).clamp(-1.0, 1.0).acos();
        let (phi, propagated) = if s.rho_x == 0.0 && s.rho_y == 0.0 {
            (prev.unwrap_or(0.0), true)
        } else {
            let raw = s.rho_y.atan2(s.rho_x);
            match prev {
                None => (raw, false),
                Some(p) => (p + principal(raw - p), false),
            }
        };
        prev = Some(phi);
        angles.push(BlochAngles { r, theta, phi, propagated });
    }
    Ok(AngleTrajectory { times: traj.times().to_vec(), angles })
}

/// Argument of `a + b e^{i dphi}` (`a, b >= 0`) continued along `dphi`.
/// When the circle traced by the argument encloses the origin (`b > a`) the
/// phase winds once per turn; otherwise it stays on the principal branch.
fn continued_arg(a: f64, b: f64, dphi: f64) -> f64 {
    let delta = principal(dphi);
    let base = (delta.sin() * b).atan2(a + delta.cos() * b);
    if b > a * (1.0 + 1e-12) + 1e-300 {
        base + (dphi - delta)
    } else {
        base
    }
}

/// Total phase between two states; depends only on the endpoints and their
/// unwrapped azimuth difference.
pub fn total_phase(a0: &BlochAngles, at: &BlochAngles) -> f64 {
    let dphi = at.phi - a0.phi;
    (0..2)
        .map(|k| {
            let sg = if k == 0 { 1.0 } else { -1.0 };
            let w = ((1.0 + sg * at.r).max(0.0) * (1.0 + sg * a0.r).max(0.0)).sqrt() / 2.0;
            let (c0, s0) = (a0.chi(k).cos(), a0.chi(k).sin());
            let (ct, st) = (at.chi(k).cos(), at.chi(k).sin());
            w * continued_arg(c0 * ct, s0 * st, dphi)
        })
        .sum()
}

/// Integrand of the dynamic phase per unit `dphi`.
fn dynamic_density(a: &BlochAngles) -> f64 {
    0.5 * (0..2)
        .map(|k| {
            let sg = if k == 0 { 1.0 } else { -1.0 };
            (1.0 + sg * a.r) * a.chi(k).sin().powi(2)
        })
        .sum::<f64>()
}

/// Cumulative trapezoidal dynamic phase along the path, starting at zero.
pub fn dynamic_phase(angles: &AngleTrajectory) -> Result<Vec<f64>> {
    let a = &angles.angles;
    let mut out = Vec::with_capacity(a.len());
    if a.is_empty() {
        return Ok(out);
    }
    out.push(0.0);
    for i in 1..a.len() {
        let dphi = a[i].phi - a[i - 1].phi;
        if dphi.abs() >= MAX_DPHI {
            return Err(Error::GridTooCoarse(dphi.abs()));
        }
        let v = out[i - 1] + 0.5 * (dynamic_density(&a[i - 1]) + dynamic_density(&a[i])) * dphi;
        out.push(v);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub times: Vec<f64>,
    pub phi_total: Vec<f64>,
    pub phi_dynamic: Vec<f64>,
    pub phi_geometric: Vec<f64>,
    /// Dynamic phase accumulated up to `t_star`.
    pub phi_dynamic_short: f64,
    pub t_star: f64,
}

/// Total, dynamic and geometric phase along the trajectory.
pub fn geometric_phase(angles: &AngleTrajectory, t_star: f64) -> Result<PhaseRecord> {
    let a = &angles.angles;
    let phi_dynamic = dynamic_phase(angles)?;
    let phi_total: Vec<f64> = match a.first() {
        Some(a0) => a.iter().map(|at| total_phase(a0, at)).collect(),
        None => vec![],
    };
    let phi_geometric = phi_total.iter().zip(&phi_dynamic).map(|(t, d)| t - d).collect();
    let i = angles.times.partition_point(|&t| t <= t_star);
    let phi_dynamic_short = if i == 0 { 0.0 } else { phi_dynamic[i - 1] };
    Ok(PhaseRecord {
        times: angles.times.clone(),
        phi_total,
        phi_dynamic,
        phi_geometric,
        phi_dynamic_short,
        t_star,
    })
}

/// Angles and phases of a trajectory in one call.
pub fn phases_of(traj: &BlochTrajectory, t_star: f64) -> Result<(AngleTrajectory, PhaseRecord)> {
    let angles = to_angles(traj)?;
    let rec = geometric_phase(&angles, t_star)?;
    Ok((angles, rec))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignBranch {
    Plus,
    Minus,
    Null,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCoefficients {
    pub s: SignBranch,
    pub r0: f64,
    pub r_inf: f64,
    /// Slope constant: `Phi_g ~ C phi / 2`.
    pub c: f64,
    /// `sqrt(1 + r0) + sqrt(1 - r0)`.
    pub k: f64,
}

pub fn asymptotic_coefficients(r0: f64, rho_z_inf: f64) -> Result<AsymptoticCoefficients> {
    asymptotic_coefficients_with(r0, rho_z_inf, NULL_BRANCH_TOL)
}

pub fn asymptotic_coefficients_with(r0: f64, rho_z_inf: f64, null_tol: f64) -> Result<AsymptoticCoefficients> {
    if !(rho_z_inf.abs() <= 1.0) {
        return Err(Error::InvalidParameter(format!("|rho_z(inf)| = {} exceeds 1", rho_z_inf.abs())));
    }
    if !(0.0..=1.0 + 1e-9).contains(&r0) {
        return Err(Error::InvalidParameter(format!("r(0) = {r0} outside [0, 1]")));
    }
    let r0 = r0.min(1.0);
    let k = (1.0 + r0).sqrt() + (1.0 - r0).sqrt();
    let r_inf = rho_z_inf.abs();
    let (s, sv) = if r_inf < null_tol {
        (SignBranch::Null, 0.0)
    } else if rho_z_inf > 0.0 {
        (SignBranch::Plus, 1.0)
    } else {
        (SignBranch::Minus, -1.0)
    };
    let c = ((1.0 - sv * r_inf) * (1.0 - sv * r0)).sqrt() - (1.0 - sv * r_inf);
    Ok(AsymptoticCoefficients { s, r0, r_inf, c, k })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AsymptoticReport {
    /// `Phi_g` against `phi`: fitted slope, predicted `C/2`, relative error.
    Slope { slope: f64, expected: f64, rel_error: f64, samples: usize },
    /// Null branch: largest deviation from the nonlinear prediction.
    Nonlinear { max_residual: f64, samples: usize },
}

/// Compare the late-window geometric phase with its asymptotic form.
/// `window = (t_start, t_end)` and should lie beyond `record.t_star`.
pub fn asymptotic_prediction_check(
    record: &PhaseRecord,
    coeffs: &AsymptoticCoefficients,
    phi: &[f64],
    window: (f64, f64),
) -> Result<AsymptoticReport> {
    if phi.len() != record.times.len() {
        return Err(Error::DimensionMismatch { expected: record.times.len(), got: phi.len() });
    }
    let idx: Vec<usize> = (0..phi.len())
        .filter(|&i| record.times[i] >= window.0 && record.times[i] <= window.1)
        .collect();
    if idx.len() < 3 {
        return Err(Error::WindowTooShort(format!("{} samples in window", idx.len())));
    }
    match coeffs.s {
        SignBranch::Null => {
            let phi0 = phi[0];
            let i_star = record.times.partition_point(|&t| t <= record.t_star).max(1) - 1;
            let phi_star = phi[i_star];
            let max_residual = idx
                .iter()
                .map(|&i| {
                    let d = phi[i] - phi0;
                    let tot = 0.5 * coeffs.k * (d.sin() / (1.0 + d.cos())).atan();
                    let dyn_ = record.phi_dynamic_short + 0.5 * (phi[i] - phi_star);
                    (record.phi_geometric[i] - (tot - dyn_)).abs()
                })
                .fold(0.0, f64::max);
            Ok(AsymptoticReport::Nonlinear { max_residual, samples: idx.len() })
        }
        _ => {
            let x: Vec<f64> = idx.iter().map(|&i| phi[i]).collect();
            let y: Vec<f64> = idx.iter().map(|&i| record.phi_geometric[i]).collect();
            let m = x.len() as f64;
            let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
            let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
            if !(sxx > 0.0) {
                return Err(Error::WindowTooShort("azimuth is constant over the window".into()));
            }
            let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
            let slope = sxy / sxx;
            let expected = 0.5 * coeffs.c;
            let rel_error = if expected == 0.0 {
                slope.abs()
            } else {
                ((slope - expected) / expected).abs()
            };
            Ok(AsymptoticReport::Slope { slope, expected, rel_error, samples: idx.len() })
        }
    }
}
