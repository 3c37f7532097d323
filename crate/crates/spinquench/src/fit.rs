//! Long-time fits of single-spin trajectories to the open two-level model
//! with `lambda_z = 0`, damping-branch selection and phase classification.
//!
//! On the tail `tau = t - t_star` the in-plane components are
//! - oscillatory: `e^{-ls tau} (a cos(nu tau) + b sin(nu tau))`, `omega^2 = -nu^2`;
//! - overdamped: `a e^{-ks tau} + b e^{-kf tau}`, `ls = (ks + kf)/2`,
//!   `omega = (kf - ks)/2`.
//!
//! The amplitudes enter linearly and are eliminated by least squares, so the
//! Levenberg-Marquardt iteration runs over the two rates only.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{self, AngleTrajectory, AsymptoticCoefficients, AsymptoticReport, PhaseRecord};
use crate::lindblad::BlochTrajectory;

pub const MIN_TAIL_SAMPLES: usize = 50;
pub const R2_THRESHOLD: f64 = 0.999;
pub const MULTISTARTS: usize = 8;
pub const STEP_TOL: f64 = 1e-10;
pub const MAX_ITER: usize = 500;
pub const AMBIGUITY: f64 = 0.05;
pub const CONSISTENCY: f64 = 0.10;
/// Autocorrelation peak height and prominence needed to report a period.
pub const PEAK_THRESHOLD: f64 = 0.5;
/// Minimum late/early amplitude ratio for an oscillation to count as
/// persistent.
pub const STATIONARITY: f64 = 0.5;
/// A branch whose rate splitting spans less than this over the tail has
/// collapsed onto the critical form shared by both branches.
pub const COLLAPSE: f64 = 0.3;
/// Signal-to-noise ratios below which envelope samples are dropped: sign
/// lobes and their peaks are robust down to `LOBE_SNR`, individual samples of
/// a non-oscillating series are kept from `SAMPLE_SNR`.
pub const LOBE_SNR: f64 = 10.0;
pub const SAMPLE_SNR: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Ordered,
    Paramagnetic,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Overdamped,
    Oscillatory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenSystemFit {
    pub lambda_s: f64,
    pub omega_sq: f64,
    pub rho_z_inf: f64,
    /// `hypot(a, b)` of the two basis coefficients of `rho_x`.
    pub amp_x: f64,
    pub amp_y: f64,
    /// `atan2(b, a)` of the two basis coefficients of `rho_x`.
    pub phase_x: f64,
    pub phase_y: f64,
    pub t_star: f64,
    pub residual: f64,
    pub branch: Branch,
    /// Best residual of the losing branch, if it was a distinct candidate.
    pub rival_residual: Option<f64>,
    pub classification: Classification,
}

impl OpenSystemFit {
    /// `2 pi / |Im omega|`, oscillatory branch only.
    pub fn period(&self) -> Option<f64> {
        (self.omega_sq < 0.0).then(|| 2.0 * PI / (-self.omega_sq).sqrt())
    }

    /// Model value `(rho_x, rho_y)` at time `t >= t_star`.
    pub fn predict(&self, t: f64) -> (f64, f64) {
        let tau = t - self.t_star;
        let ((ax, bx), (ay, by)) = (
            (self.amp_x * self.phase_x.cos(), self.amp_x * self.phase_x.sin()),
            (self.amp_y * self.phase_y.cos(), self.amp_y * self.phase_y.sin()),
        );
        let (f, g) = basis(self.branch, self.rates(), tau);
        (ax * f + bx * g, ay * f + by * g)
    }

    fn rates(&self) -> [f64; 2] {
        let w = self.omega_sq.abs().sqrt();
        match self.branch {
            Branch::Oscillatory => [self.lambda_s, w],
            Branch::Overdamped => [self.lambda_s - w, self.lambda_s + w],
        }
    }
}

fn basis(branch: Branch, p: [f64; 2], tau: f64) -> (f64, f64) {
    match branch {
        Branch::Oscillatory => {
            let e = (-p[0] * tau).exp();
            (e * (p[1] * tau).cos(), e * (p[1] * tau).sin())
        }
        Branch::Overdamped => ((-p[0] * tau).exp(), (-p[1] * tau).exp()),
    }
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 { sxy * sxy / (sxx * syy) } else if syy == 0.0 { 1.0 } else { 0.0 };
    (slope, my - slope * mx, r2)
}

/// White-noise level from the fourth differences, which suppress smooth
/// signals: `median |d^4 x| / (0.6745 sqrt(70))`.
pub fn noise_level(series: &[f64]) -> f64 {
    if series.len() < 5 {
        return 0.0;
    }
    let mut d: Vec<f64> = series
        .windows(5)
        .map(|w| (w[0] - 4.0 * w[1] + 6.0 * w[2] - 4.0 * w[3] + w[4]).abs())
        .collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2] / (0.6745 * 70f64.sqrt())
}

/// Samples of the envelope of `|series|`.
/// An oscillating series contributes the interior peak of each sign lobe
/// (refined by a parabola; peaks on the first or last sample are skipped), a
/// non-oscillating one every sample.
pub fn envelope(times: &[f64], series: &[f64]) -> Vec<(f64, f64)> {
    let sigma = noise_level(series);
    let above = |k: f64| -> Vec<usize> {
        (0..series.len()).filter(|&i| series[i].abs() > k * sigma && series[i] != 0.0).collect()
    };
    let lobe_samples = above(LOBE_SNR);
    // lobes: runs of equal sign among the samples above the floor
    let mut lobes: Vec<Vec<usize>> = Vec::new();
    for &i in &lobe_samples {
        match lobes.last_mut() {
            Some(l) if series[l[0]].signum() == series[i].signum() => l.push(i),
            _ => lobes.push(vec![i]),
        }
    }
    if lobes.len() < 3 {
        return above(SAMPLE_SNR).iter().map(|&i| (times[i], series[i].abs())).collect();
    }
    let n = series.len();
    let mut out = Vec::with_capacity(lobes.len());
    for l in &lobes {
        let i = *l.iter().max_by(|&&a, &&b| series[a].abs().total_cmp(&series[b].abs())).unwrap();
        if i + 1 == n || i == 0 {
            continue;
        }
        let (y0, y1, y2) = (series[i - 1].abs(), series[i].abs(), series[i + 1].abs());
        let den = y0 - 2.0 * y1 + y2;
        let (off, val) = if den < 0.0 {
            let off = 0.5 * (y0 - y2) / den;
            (off, y1 - 0.25 * (y0 - y2) * off)
        } else {
            (0.0, y1)
        };
        let step = if off >= 0.0 { times[i + 1] - times[i] } else { times[i] - times[i - 1] };
        out.push((times[i] + off * step, val));
    }
    out
}

/// Prefix sums for O(1) straight-line fits over index ranges.
struct Regression {
    s: Vec<[f64; 5]>,
}

impl Regression {
    fn new(t: &[f64], y: &[f64]) -> Self {
        let mut s = vec![[0.0; 5]; t.len() + 1];
        for i in 0..t.len() {
            let v = [t[i], y[i], t[i] * t[i], y[i] * y[i], t[i] * y[i]];
            for k in 0..5 {
                s[i + 1][k] = s[i][k] + v[k];
            }
        }
        Self { s }
    }

    /// Slope and `R^2` over `a..b`.
    fn fit(&self, a: usize, b: usize) -> (f64, f64) {
        let n = (b - a) as f64;
        let d: Vec<f64> = (0..5).map(|k| self.s[b][k] - self.s[a][k]).collect();
        let sxx = d[2] - d[0] * d[0] / n;
        let syy = d[3] - d[1] * d[1] / n;
        let sxy = d[4] - d[0] * d[1] / n;
        if !(sxx > 0.0) {
            return (0.0, 0.0);
        }
        let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).min(1.0) } else { 1.0 };
        (sxy / sxx, r2)
    }
}

/// Start of the long-time regime: the earliest grid time from which
/// `log envelope(|rho_x|)` is linear with `R^2 > 0.999`, both over the whole
/// remaining window and over every sub-window spanning two e-folds of the
/// fitted decay (at least five envelope samples).
pub fn select_tstar(traj: &BlochTrajectory) -> Result<f64> {
    let times = traj.times();
    let x = traj.rho_x();
    let env = envelope(times, &x);
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let drop = match env.last() {
        Some(p) if p.1 > 0.0 => max / p.1,
        _ => 1.0,
    };
    if !(drop >= 2f64.exp()) {
        return Err(Error::InsufficientDecay(drop));
    }
    if env.len() < 3 {
        return Err(Error::WindowTooShort(format!("{} envelope points", env.len())));
    }
    let lt: Vec<f64> = env.iter().map(|p| p.0).collect();
    let ly: Vec<f64> = env.iter().map(|p| p.1.ln()).collect();
    let reg = Regression::new(&lt, &ly);
    let n = env.len();
    let t_end = lt[n - 1];
    'start: for s in 0..n - 2 {
        let (slope, r2) = reg.fit(s, n);
        if !(slope < 0.0 && r2 > R2_THRESHOLD) {
            continue;
        }
        let span = 2.0 / -slope;
        for k in s..n {
            if lt[k] + span > t_end {
                break;
            }
            let e = lt.partition_point(|&t| t <= lt[k] + span).max(k + 5);
            if e > n {
                break;
            }
            if reg.fit(k, e).1 <= R2_THRESHOLD {
                continue 'start;
            }
        }
        let i = times.partition_point(|&t| t < lt[s] - 1e-9).min(times.len() - 1);
        return Ok(times[i]);
    }
    Err(Error::WindowTooShort("no exponential tail found".into()))
}

struct Data<'a> {
    tau: Vec<f64>,
    x: &'a [f64],
    y: &'a [f64],
}

struct Solved {
    cost: f64,
    cx: Vector2<f64>,
    cy: Vector2<f64>,
}

fn canonical(branch: Branch, p: [f64; 2]) -> [f64; 2] {
    match branch {
        Branch::Oscillatory => [p[0], p[1].abs()],
        Branch::Overdamped => {
            let (a, b) = (p[0].abs(), p[1].abs());
            if a <= b { [a, b] } else { [b, a] }
        }
    }
}

fn residuals(d: &Data, branch: Branch, p: [f64; 2]) -> (DVector<f64>, Solved) {
    let m = d.tau.len();
    let mut ata = Matrix2::zeros();
    let (mut bx, mut by) = (Vector2::zeros(), Vector2::zeros());
    let cols: Vec<(f64, f64)> = d.tau.iter().map(|&t| basis(branch, p, t)).collect();
    for (i, &(f, g)) in cols.iter().enumerate() {
        let v = Vector2::new(f, g);
        ata += v * v.transpose();
        bx += v * d.x[i];
        by += v * d.y[i];
    }
    let svd = ata.svd(true, true);
    let tol = 1e-13 * svd.singular_values.max();
    let cx = svd.solve(&bx, tol).unwrap_or_else(|_| Vector2::zeros());
    let cy = svd.solve(&by, tol).unwrap_or_else(|_| Vector2::zeros());
    let mut r = DVector::zeros(2 * m);
    for (i, &(f, g)) in cols.iter().enumerate() {
        r[i] = d.x[i] - cx[0] * f - cx[1] * g;
        r[m + i] = d.y[i] - cy[0] * f - cy[1] * g;
    }
    let cost = r.norm_squared();
    (r, Solved { cost, cx, cy })
}

/// Levenberg-Marquardt over the two rates with a central-difference Jacobian.
fn levenberg_marquardt(d: &Data, branch: Branch, p0: [f64; 2]) -> ([f64; 2], Solved) {
    let mut p = canonical(branch, p0);
    let (mut r, mut sol) = residuals(d, branch, p);
    let mut mu = 1e-3;
    for _ in 0..MAX_ITER {
        let mut j = DMatrix::zeros(r.len(), 2);
        for k in 0..2 {
            let h = 1e-7 * p[k].abs().max(1e-3);
            let (mut pp, mut pm) = (p, p);
            pp[k] += h;
            pm[k] -= h;
            let diff = (residuals(d, branch, pp).0 - residuals(d, branch, pm).0) / (2.0 * h);
            j.set_column(k, &diff);
        }
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut accepted = false;
        let mut step_norm = 0.0;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..2 {
                a[(k, k)] += mu * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = a.lu().solve(&(-&g)) else {
                mu *= 10.0;
                continue;
            };
            let cand = canonical(branch, [p[0] + delta[0], p[1] + delta[1]]);
            let (rc, sc) = residuals(d, branch, cand);
            if sc.cost.is_finite() && sc.cost <= sol.cost {
                step_norm = (delta[0].powi(2) + delta[1].powi(2)).sqrt();
                p = cand;
                r = rc;
                sol = sc;
                mu = (mu * 0.3).max(1e-12);
                accepted = true;
                break;
            }
            mu *= 10.0;
        }
        let scale = 1.0 + (p[0].powi(2) + p[1].powi(2)).sqrt();
        if !accepted || step_norm < STEP_TOL * scale {
            break;
        }
    }
    (p, sol)
}

struct BranchResult {
    p: [f64; 2],
    sol: Solved,
    collapsed: bool,
}

fn fit_branch(d: &Data, branch: Branch, starts: &[[f64; 2]], span: f64) -> Option<BranchResult> {
    let mut best: Option<([f64; 2], Solved)> = None;
    for &s in starts {
        let (p, sol) = levenberg_marquardt(d, branch, s);
        if !sol.cost.is_finite() {
            continue;
        }
        if best.as_ref().map_or(true, |b| sol.cost < b.1.cost) {
            best = Some((p, sol));
        }
    }
    best.map(|(p, sol)| {
        let split = match branch {
            Branch::Oscillatory => p[1],
            Branch::Overdamped => 0.5 * (p[1] - p[0]),
        };
        BranchResult { p, sol, collapsed: split * span < COLLAPSE }
    })
}

/// Fit the tail `t >= t_star`.
pub fn fit_open_system(traj: &BlochTrajectory, t_star: f64) -> Result<OpenSystemFit> {
    let times = traj.times();
    if times.is_empty() || !(t_star >= times[0] && t_star <= times[times.len() - 1]) {
        return Err(Error::InvalidParameter(format!("t_star = {t_star} outside the trajectory")));
    }
    let i0 = times.partition_point(|&t| t < t_star);
    let n_tail = times.len() - i0;
    if n_tail < MIN_TAIL_SAMPLES {
        return Err(Error::WindowTooShort(format!("{n_tail} tail samples, need {MIN_TAIL_SAMPLES}")));
    }
    let (xs, ys, zs) = (traj.rho_x(), traj.rho_y(), traj.rho_z());
    let (x, y) = (&xs[i0..], &ys[i0..]);
    let quarter = &zs[times.len() - (n_tail / 4).max(1)..];
    let rho_z_inf = quarter.iter().sum::<f64>() / quarter.len() as f64;
    let tau: Vec<f64> = times[i0..].iter().map(|t| t - t_star).collect();
    let span = tau[tau.len() - 1];
    let d = Data { tau, x, y };

    // seeds: decay from the envelope, frequency from the autocorrelation
    let env = envelope(&times[i0..], x);
    let (lt, ly): (Vec<f64>, Vec<f64>) = env.iter().filter(|p| p.1 > 0.0).map(|p| (p.0, p.1.ln())).unzip();
    let lambda0 = if lt.len() >= 2 { (-linear_fit(&lt, &ly).0).max(1e-3) } else { 1.0 / span };
    let dt = d.tau[1] - d.tau[0];
    let nu0 = autocorrelation_period(&[x, y], dt).map(|p| 2.0 * PI / p).unwrap_or(4.0 * PI / span);
    let osc_starts: Vec<[f64; 2]> = [1.0, 0.5, 2.0, 0.8, 1.25, 0.65, 1.6, 3.0]
        .iter()
        .zip([1.0, 1.0, 1.0, 0.5, 2.0, 1.0, 1.0, 0.5])
        .map(|(fn_, fl)| [lambda0 * fl, nu0 * fn_])
        .take(MULTISTARTS)
        .collect();
    let od_starts: Vec<[f64; 2]> = [(1.0, 3.0), (1.0, 10.0), (0.8, 1.5), (1.0, 30.0), (0.5, 4.0), (1.2, 2.0), (0.9, 100.0), (0.3, 1.0)]
        .iter()
        .map(|&(a, b)| [lambda0 * a, lambda0 * b])
        .take(MULTISTARTS)
        .collect();

    let od = fit_branch(&d, Branch::Overdamped, &od_starts, span);
    let osc = fit_branch(&d, Branch::Oscillatory, &osc_starts, span);
    let m = (2 * d.tau.len()) as f64;
    let rms = |b: &BranchResult| (b.sol.cost / m).sqrt();

    let (branch, win, rival) = match (od, osc) {
        (None, None) => return Err(Error::FitDiverged("no start converged".into())),
        (Some(a), None) => (Branch::Overdamped, a, None),
        (None, Some(b)) => (Branch::Oscillatory, b, None),
        (Some(a), Some(b)) => {
            let (ra, rb) = (rms(&a), rms(&b));
            match (a.collapsed, b.collapsed) {
                (false, true) => (Branch::Overdamped, a, None),
                (true, false) => (Branch::Oscillatory, b, None),
                _ => {
                    let hi = ra.max(rb);
                    let floor = 1e-12 * x.iter().chain(y).fold(0.0f64, |m, v| m.max(v.abs()));
                    if hi > floor && (ra - rb).abs() < AMBIGUITY * hi && !(a.collapsed && b.collapsed) {
                        return Err(Error::AmbiguousBranch { overdamped: ra, oscillatory: rb });
                    }
                    // ties go to the overdamped branch
                    if ra <= rb {
                        (Branch::Overdamped, a, Some(rb))
                    } else {
                        (Branch::Oscillatory, b, Some(ra))
                    }
                }
            }
        }
    };
    let residual = rms(&win);
    if !residual.is_finite() {
        return Err(Error::FitDiverged("non-finite residual".into()));
    }
    let (lambda_s, omega_sq) = match branch {
        Branch::Oscillatory => (win.p[0], -win.p[1] * win.p[1]),
        Branch::Overdamped => (0.5 * (win.p[0] + win.p[1]), (0.5 * (win.p[1] - win.p[0])).powi(2)),
    };
    Ok(OpenSystemFit {
        lambda_s,
        omega_sq,
        rho_z_inf,
        amp_x: win.sol.cx[0].hypot(win.sol.cx[1]),
        amp_y: win.sol.cy[0].hypot(win.sol.cy[1]),
        phase_x: win.sol.cx[1].atan2(win.sol.cx[0]),
        phase_y: win.sol.cy[1].atan2(win.sol.cy[0]),
        t_star,
        residual,
        branch,
        rival_residual: rival,
        classification: Classification::Inconclusive,
    })
}

fn centered(s: &[f64]) -> Vec<f64> {
    let m = s.iter().sum::<f64>() / s.len().max(1) as f64;
    s.iter().map(|v| v - m).collect()
}

fn rms_of(s: &[f64]) -> f64 {
    (s.iter().map(|v| v * v).sum::<f64>() / s.len().max(1) as f64).sqrt()
}

/// First prominent autocorrelation peak, summed over channels, in units of
/// `dt`. Lags run up to three quarters of the span.
fn autocorrelation_period(channels: &[&[f64]], dt: f64) -> Option<f64> {
    let n = channels.first()?.len();
    if n < 8 {
        return None;
    }
    let det: Vec<Vec<f64>> = channels.iter().map(|c| centered(c)).collect();
    let var: f64 = det.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / n as f64).sum();
    if !(var > 0.0) {
        return None;
    }
    let max_lag = 3 * n / 4;
    let acf: Vec<f64> = (0..=max_lag)
        .map(|l| {
            det.iter()
                .map(|c| c[..n - l].iter().zip(&c[l..]).map(|(a, b)| a * b).sum::<f64>() / (n - l) as f64)
                .sum::<f64>()
                / var
        })
        .collect();
    let mut trough = acf[0];
    for l in 1..max_lag {
        trough = trough.min(acf[l]);
        if acf[l] > acf[l - 1] && acf[l] >= acf[l + 1] && acf[l] >= PEAK_THRESHOLD && acf[l] - trough >= PEAK_THRESHOLD {
            let (y0, y1, y2) = (acf[l - 1], acf[l], acf[l + 1]);
            let den = y0 - 2.0 * y1 + y2;
            let off = if den < 0.0 { 0.5 * (y0 - y2) / den } else { 0.0 };
            return Some((l as f64 + off) * dt);
        }
    }
    None
}

fn persistent(channels: &[&[f64]]) -> bool {
    let n = channels[0].len();
    let third = n / 3;
    if third < 2 {
        return false;
    }
    let (mut early, mut late) = (0.0, 0.0);
    for c in channels {
        let d = centered(c);
        early += rms_of(&d[..third]).powi(2);
        late += rms_of(&d[n - third..]).powi(2);
    }
    early > 0.0 && (late / early).sqrt() >= STATIONARITY
}

/// Period of a persistent oscillation in a uniformly sampled series, or
/// `None`. Decaying oscillations are not reported.
pub fn detect_periodicity(series: &[f64], dt: f64) -> Option<f64> {
    if !persistent(&[series]) {
        return None;
    }
    autocorrelation_period(&[series], dt)
}

/// As [`detect_periodicity`] for an azimuth, using `(cos phi, sin phi)` so
/// that a winding angle and a bounded oscillation both give their period.
pub fn detect_azimuth_periodicity(phi: &[f64], dt: f64) -> Option<f64> {
    let c: Vec<f64> = phi.iter().map(|p| p.cos()).collect();
    let s: Vec<f64> = phi.iter().map(|p| p.sin()).collect();
    if !persistent(&[&c, &s]) {
        return None;
    }
    autocorrelation_period(&[&c, &s], dt)
}

pub fn classify_phase(fit: &OpenSystemFit, period: Option<f64>) -> Classification {
    match (fit.omega_sq, period, fit.period()) {
        (w, Some(p), Some(q)) if w < 0.0 && ((p - q) / q).abs() <= CONSISTENCY => Classification::Paramagnetic,
        (w, None, _) if w > 0.0 => Classification::Ordered,
        _ => Classification::Inconclusive,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub fit: OpenSystemFit,
    pub period: Option<f64>,
    pub classification: Classification,
    pub angles: AngleTrajectory,
    pub phases: PhaseRecord,
    pub coefficients: AsymptoticCoefficients,
    pub asymptotic: Option<AsymptoticReport>,
}

/// Last time at which the in-plane radius exceeds `snr` times the noise level
/// of `rho_x`, `rho_y`.
pub fn signal_end(traj: &BlochTrajectory, snr: f64) -> f64 {
    let (x, y) = (traj.rho_x(), traj.rho_y());
    let floor = snr * noise_level(&x).max(noise_level(&y));
    let times = traj.times();
    (0..times.len())
        .rev()
        .find(|&i| x[i].hypot(y[i]) > floor)
        .map_or(times[0], |i| times[i])
}

/// t*, fit and azimuth periodicity on the samples up to
/// `signal_end(traj, LOBE_SNR)`; angles, phases and the late-window slope
/// check (second half of the tail) up to `signal_end(traj, SAMPLE_SNR)`.
pub fn analyze(traj: &BlochTrajectory) -> Result<Analysis> {
    let head = traj.head(signal_end(traj, LOBE_SNR));
    let t_star = select_tstar(&head)?;
    let mut fit = fit_open_system(&head, t_star)?;
    let times = head.times();
    let i0 = times.partition_point(|&t| t < t_star);
    let dt = times[1] - times[0];
    let azimuth: Vec<f64> = head.states()[i0..].iter().map(|s| s.rho_y.atan2(s.rho_x)).collect();
    let period = detect_azimuth_periodicity(&azimuth, dt);
    let classification = classify_phase(&fit, period);
    fit.classification = classification;

    let clean = traj.head(signal_end(traj, SAMPLE_SNR));
    let (angles, phases) = geometry::phases_of(&clean, t_star)?;
    let coefficients = geometry::asymptotic_coefficients(angles.angles[0].r, fit.rho_z_inf.clamp(-1.0, 1.0))?;
    let t_end = clean.times()[clean.len() - 1];
    let window = (0.5 * (t_star + t_end), t_end);
    let asymptotic = geometry::asymptotic_prediction_check(&phases, &coefficients, &angles.phi(), window).ok();
    Ok(Analysis { fit, period, classification, angles, phases, coefficients, asymptotic })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(period: f64, n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * i as f64 * dt / period).sin()).collect()
    }

    #[test]
    fn sinusoid_period() {
        let p = detect_periodicity(&sine(3.7, 4000, 0.01), 0.01).unwrap();
        assert!((p - 3.7).abs() / 3.7 < 0.01, "{p}");
    }

    #[test]
    fn saturating_curve_has_no_period() {
        let s: Vec<f64> = (0..2000).map(|i| 1.0 - (-(i as f64) * 0.01).exp()).collect();
        assert_eq!(detect_periodicity(&s, 0.01), None);
    }

    #[test]
    fn winding_azimuth() {
        let phi: Vec<f64> = (0..3000).map(|i| 1.3 * i as f64 * 0.01).collect();
        let p = detect_azimuth_periodicity(&phi, 0.01).unwrap();
        assert!((p - 2.0 * PI / 1.3).abs() < 0.01 * p);
    }

    #[test]
    fn classification_table() {
        let mut f = OpenSystemFit {
            lambda_s: 0.1,
            omega_sq: -4.0,
            rho_z_inf: 0.5,
            amp_x: 1.0,
            amp_y: 0.0,
            phase_x: 0.0,
            phase_y: 0.0,
            t_star: 0.0,
            residual: 0.0,
            branch: Branch::Oscillatory,
            rival_residual: None,
            classification: Classification::Inconclusive,
        };
        assert_eq!(classify_phase(&f, Some(PI * 1.02)), Classification::Paramagnetic);
        assert_eq!(classify_phase(&f, None), Classification::Inconclusive);
        f.omega_sq = 0.04;
        f.branch = Branch::Overdamped;
        assert_eq!(classify_phase(&f, None), Classification::Ordered);
        assert_eq!(classify_phase(&f, Some(3.0)), Classification::Inconclusive);
    }

    #[test]
    fn envelope_of_damped_cosine_is_exponential() {
        let t: Vec<f64> = (0..3000).map(|i| i as f64 * 0.01).collect();
        let s: Vec<f64> = t.iter().map(|t| (-0.2 * t).exp() * (2.0 * t).cos()).collect();
        let env = envelope(&t, &s);
        let (lt, ly): (Vec<f64>, Vec<f64>) = env.iter().map(|p| (p.0, p.1.ln())).unzip();
        let (slope, _, r2) = linear_fit(&lt, &ly);
        assert!((slope + 0.2).abs() < 1e-3 && r2 > 0.9999);
    }
}
