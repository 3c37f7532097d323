//! Open two-level dynamics `d rho/dt = -2 U rho` for the Bloch vector
//! `(1, rho_x, rho_y, rho_z)`.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shared threshold on `|omega^2|` below which the critical branch is used.
pub const OMEGA_EPS: f64 = 1e-12;

/// Default RK4 step.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Largest accepted `dt * ||2U||_inf` for the RK4 integrator. Classical RK4 is
/// stable up to about 2.78 on the real axis and 2.83 on the imaginary axis;
/// the bound keeps a margin below both.
pub const RK4_STABILITY_BOUND: f64 = 2.5;

/// Plain field set, used for construction and (de)serialization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DissipatorFields {
    pub h_x: f64,
    pub h_y: f64,
    pub h_z: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub lambda_z: f64,
}

/// Validated generator parameters. Decay rates are non-negative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DissipatorFields", into = "DissipatorFields")]
pub struct DissipatorParams {
    f: DissipatorFields,
}

impl TryFrom<DissipatorFields> for DissipatorParams {
    type Error = Error;
    fn try_from(f: DissipatorFields) -> Result<Self> {
        DissipatorParams::new(f)
    }
}

impl From<DissipatorParams> for DissipatorFields {
    fn from(p: DissipatorParams) -> Self {
        p.f
    }
}

impl DissipatorParams {
    pub fn new(f: DissipatorFields) -> Result<Self> {
        let all = [
            f.h_x, f.h_y, f.h_z, f.alpha, f.beta, f.delta, f.lambda_x, f.lambda_y, f.lambda_z,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite generator entry".into()));
        }
        for (name, v) in [("lambda_x", f.lambda_x), ("lambda_y", f.lambda_y), ("lambda_z", f.lambda_z)] {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} = {v} is negative")));
            }
        }
        Ok(Self { f })
    }

    /// All-zero generator.
    pub fn zero() -> Self {
        Self { f: DissipatorFields::default() }
    }

    pub fn fields(&self) -> DissipatorFields {
        self.f
    }

    pub fn h_x(&self) -> f64 {
        self.f.h_x
    }
    pub fn h_y(&self) -> f64 {
        self.f.h_y
    }
    pub fn h_z(&self) -> f64 {
        self.f.h_z
    }
    pub fn alpha(&self) -> f64 {
        self.f.alpha
    }
    pub fn beta(&self) -> f64 {
        self.f.beta
    }
    pub fn delta(&self) -> f64 {
        self.f.delta
    }
    pub fn lambda_x(&self) -> f64 {
        self.f.lambda_x
    }
    pub fn lambda_y(&self) -> f64 {
        self.f.lambda_y
    }
    pub fn lambda_z(&self) -> f64 {
        self.f.lambda_z
    }

    /// True iff `beta = delta = h_x = h_y = 0` exactly.
    pub fn parity_constrained(&self) -> bool {
        self.f.beta == 0.0 && self.f.delta == 0.0 && self.f.h_x == 0.0 && self.f.h_y == 0.0
    }
}

/// Single-spin state; the identity component is fixed to one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub rho_x: f64,
    pub rho_y: f64,
    pub rho_z: f64,
}

impl BlochVector {
    pub const PURITY_TOL: f64 = 1e-9;

    pub fn new(rho_x: f64, rho_y: f64, rho_z: f64) -> Self {
        Self { rho_x, rho_y, rho_z }
    }

    pub fn radius(&self) -> f64 {
        (self.rho_x * self.rho_x + self.rho_y * self.rho_y + self.rho_z * self.rho_z).sqrt()
    }

    pub fn is_physical(&self) -> bool {
        self.radius() <= 1.0 + Self::PURITY_TOL
    }

    fn to_vec(self) -> Vector3<f64> {
        Vector3::new(self.rho_x, self.rho_y, self.rho_z)
    }

    fn from_vec(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Bloch vectors sampled on a strictly increasing, non-negative time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochTrajectory {
    times: Vec<f64>,
    states: Vec<BlochVector>,
}

impl BlochTrajectory {
    pub fn new(times: Vec<f64>, states: Vec<BlochVector>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: states.len() });
        }
        if let Some(&t0) = times.first() {
            if !(t0 >= 0.0) {
                return Err(Error::InvalidGrid(format!("first time {t0} is negative")));
            }
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("times are not strictly increasing".into()));
        }
        if let Some((i, s)) = states.iter().enumerate().find(|(_, s)| !s.is_physical()) {
            return Err(Error::InvalidParameter(format!(
                "state {i} has Bloch radius {} > 1",
                s.radius()
            )));
        }
        Ok(Self { times, states })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[BlochVector] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn rho_x(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.rho_x).collect()
    }

    pub fn rho_y(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.rho_y).collect()
    }

    pub fn rho_z(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.rho_z).collect()
    }

    /// Samples with `times[i] >= t`.
    pub fn tail(&self, t: f64) -> BlochTrajectory {
        let i = self.times.partition_point(|&s| s < t);
        BlochTrajectory { times: self.times[i..].to_vec(), states: self.states[i..].to_vec() }
    }

    /// Samples with `times[i] <= t`.
    pub fn head(&self, t: f64) -> BlochTrajectory {
        let i = self.times.partition_point(|&s| s <= t);
        BlochTrajectory { times: self.times[..i].to_vec(), states: self.states[..i].to_vec() }
    }
}

/// Uniform grid `t_k = k * dt`, `k = 0..len`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt = {dt} must be positive")));
        }
        if len == 0 {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        Ok(Self { dt, len })
    }

    /// Grid covering `[0, t_max]`, rounding the sample count to the nearest step.
    pub fn up_to(t_max: f64, dt: f64) -> Result<Self> {
        if !(t_max > 0.0) {
            return Err(Error::InvalidGrid(format!("t_max = {t_max} must be positive")));
        }
        Self::new(dt, (t_max / dt).round() as usize + 1)
    }

    pub fn t_max(&self) -> f64 {
        self.dt * (self.len - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|k| k as f64 * self.dt).collect()
    }
}

/// Rates entering the closed-form solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub lambda_s: f64,
    pub lambda_d: f64,
    pub omega_sq: f64,
    pub zeta_plus: f64,
    pub zeta_minus: f64,
    /// Coefficient of `sinh(omega t)` (real branch) or `sin(|omega| t)`
    /// (imaginary branch) in `rho_x`, entering with a minus sign.
    pub a_x: f64,
    /// Coefficient of `sinh` / `sin` in `rho_y`.
    pub a_y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Damping {
    Overdamped { omega: f64 },
    Oscillatory { frequency: f64, period: f64 },
    Critical,
}

/// The 4x4 generator `U`, with `d rho/dt = -2 U rho`.
pub fn build_generator(p: &DissipatorParams) -> Matrix4<f64> {
    let f = &p.f;
    let mut u = Matrix4::zeros();
    u[(1, 1)] = f.lambda_x;
    u[(1, 2)] = f.alpha - f.h_z;
    u[(1, 3)] = f.beta - f.h_y;
    u[(2, 1)] = f.alpha + f.h_z;
    u[(2, 2)] = f.lambda_y;
    u[(2, 3)] = f.delta - f.h_x;
    u[(3, 1)] = f.beta + f.h_y;
    u[(3, 2)] = f.delta + f.h_x;
    u[(3, 3)] = f.lambda_z;
    u
}

fn block3(p: &DissipatorParams) -> Matrix3<f64> {
    build_generator(p).fixed_view::<3, 3>(1, 1).into_owned()
}

fn require_constrained(p: &DissipatorParams) -> Result<()> {
    if p.parity_constrained() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "closed form needs beta = delta = h_x = h_y = 0".into(),
        ))
    }
}

pub fn derive_rates(p: &DissipatorParams, b0: &BlochVector) -> Result<DerivedRates> {
    derive_rates_with(p, b0, OMEGA_EPS)
}

/// As [`derive_rates`] with an explicit degeneracy threshold.
pub fn derive_rates_with(p: &DissipatorParams, b0: &BlochVector, eps: f64) -> Result<DerivedRates> {
    require_constrained(p)?;
    let f = &p.f;
    let lambda_s = f.lambda_x + f.lambda_y;
    let lambda_d = f.lambda_x - f.lambda_y;
    let zeta_plus = f.alpha + f.h_z;
    let zeta_minus = f.alpha - f.h_z;
    let omega_sq = 4.0 * zeta_plus * zeta_minus + lambda_d * lambda_d;
    if omega_sq.abs() < eps {
        return Err(Error::OmegaDegenerate(omega_sq));
    }
    let w = omega_sq.abs().sqrt();
    let a_x = (b0.rho_x * lambda_d + 2.0 * zeta_minus * b0.rho_y) / w;
    let a_y = (b0.rho_y * lambda_d - 2.0 * zeta_plus * b0.rho_x) / w;
    Ok(DerivedRates { lambda_s, lambda_d, omega_sq, zeta_plus, zeta_minus, a_x, a_y })
}

pub fn classify_damping(rates: &DerivedRates) -> Damping {
    classify_omega_sq(rates.omega_sq, OMEGA_EPS)
}

pub fn classify_omega_sq(omega_sq: f64, eps: f64) -> Damping {
    if omega_sq > eps {
        Damping::Overdamped { omega: omega_sq.sqrt() }
    } else if omega_sq < -eps {
        let frequency = (-omega_sq).sqrt();
        Damping::Oscillatory { frequency, period: 2.0 * std::f64::consts::PI / frequency }
    } else {
        Damping::Critical
    }
}

/// Closed-form solution for parity-constrained generators.
pub fn evolve_analytic(p: &DissipatorParams, b0: &BlochVector, t: f64) -> Result<BlochVector> {
    evolve_analytic_with(p, b0, t, OMEGA_EPS)
}

pub fn evolve_analytic_with(
    p: &DissipatorParams,
    b0: &BlochVector,
    t: f64,
    eps: f64,
) -> Result<BlochVector> {
    require_constrained(p)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t = {t} must be non-negative")));
    }
    let f = &p.f;
    let lambda_s = f.lambda_x + f.lambda_y;
    let lambda_d = f.lambda_x - f.lambda_y;
    let zp = f.alpha + f.h_z;
    let zm = f.alpha - f.h_z;
    let omega_sq = 4.0 * zp * zm + lambda_d * lambda_d;
    // c = cosh(wt), s = sinh(wt)/w in every branch.
    let (c, s) = if omega_sq > eps {
        let w = omega_sq.sqrt();
        ((w * t).cosh(), (w * t).sinh() / w)
    } else if omega_sq < -eps {
        let w = (-omega_sq).sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    } else {
        (1.0, t)
    };
    let env = (-lambda_s * t).exp();
    let (x0, y0) = (b0.rho_x, b0.rho_y);
    let x = env * (x0 * c - (x0 * lambda_d + 2.0 * zm * y0) * s);
    let y = env * (y0 * c + (y0 * lambda_d - 2.0 * zp * x0) * s);
    let z = (-2.0 * f.lambda_z * t).exp() * b0.rho_z;
    Ok(BlochVector::new(x, y, z))
}

pub fn analytic_trajectory(
    p: &DissipatorParams,
    b0: &BlochVector,
    times: &[f64],
) -> Result<BlochTrajectory> {
    let states = times
        .iter()
        .map(|&t| evolve_analytic(p, b0, t))
        .collect::<Result<Vec<_>>>()?;
    BlochTrajectory::new(times.to_vec(), states)
}

/// RK4 on the grid, with the step `grid.dt / k` for the smallest `k` giving a
/// step no larger than [`DEFAULT_STEP`].
pub fn evolve_numeric(p: &DissipatorParams, b0: &BlochVector, grid: &TimeGrid) -> Result<BlochTrajectory> {
    let k = (grid.dt / DEFAULT_STEP * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    evolve_numeric_substeps(p, b0, grid, k)
}

/// RK4 with `substeps` equal steps between consecutive grid points.
pub fn evolve_numeric_substeps(
    p: &DissipatorParams,
    b0: &BlochVector,
    grid: &TimeGrid,
    substeps: usize,
) -> Result<BlochTrajectory> {
    let substeps = substeps.max(1);
    let h = grid.dt / substeps as f64;
    let g = -2.0 * block3(p);
    let norm = g.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    if h * norm > RK4_STABILITY_BOUND {
        return Err(Error::StepTooLarge { dt: h, product: h * norm, bound: RK4_STABILITY_BOUND });
    }
    let mut v = b0.to_vec();
    let mut states = Vec::with_capacity(grid.len);
    states.push(*b0);
    for _ in 1..grid.len {
        for _ in 0..substeps {
            let k1 = g * v;
            let k2 = g * (v + 0.5 * h * k1);
            let k3 = g * (v + 0.5 * h * k2);
            let k4 = g * (v + h * k3);
            v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        states.push(BlochVector::from_vec(&v));
    }
    BlochTrajectory::new(grid.times(), states)
}
