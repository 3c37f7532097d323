//! wasm-bindgen entry points for `www/index.html`.
//!
//! Each export takes plain numbers (or a JSON object of generator entries)
//! and returns a JSON string; errors surface as JS exceptions.

use serde::Serialize;
use spinquench::fit;
use spinquench::geometry;
use spinquench::lindblad::{analytic_trajectory, evolve_numeric, DissipatorFields, DissipatorParams, TimeGrid};
use spinquench::{freefermion, BlochTrajectory, BlochVector, ChainParams, QuenchSpec};
use wasm_bindgen::prelude::*;

/// Largest chain the page will evolve.
pub const MAX_SITES: usize = 64;
/// Largest number of samples per request.
pub const MAX_SAMPLES: usize = 20_000;

#[derive(Serialize, Debug, Default)]
pub struct Series {
    pub t: Vec<f64>,
    pub rho_x: Vec<f64>,
    pub rho_y: Vec<f64>,
    pub rho_z: Vec<f64>,
    pub phi: Vec<f64>,
    /// Geometric phase; shorter than `t` when the in-plane signal fades out.
    pub phi_g: Vec<f64>,
}

fn grid(t_max: f64, dt: f64) -> Result<TimeGrid, String> {
    let g = TimeGrid::up_to(t_max, dt).map_err(|e| e.to_string())?;
    if g.len > MAX_SAMPLES {
        return Err(format!("{} samples requested, limit {MAX_SAMPLES}", g.len));
    }
    Ok(g)
}

/// Bloch components, azimuth and geometric phase of a trajectory.
pub fn series(tr: &BlochTrajectory) -> Result<Series, String> {
    let angles = geometry::to_angles(tr).map_err(|e| e.to_string())?;
    let clean = tr.head(fit::signal_end(tr, fit::SAMPLE_SNR));
    let phi_g = match clean.len() {
        0 | 1 => Vec::new(),
        _ => geometry::phases_of(&clean, 0.0).map_err(|e| e.to_string())?.1.phi_geometric,
    };
    Ok(Series {
        t: tr.times().to_vec(),
        rho_x: tr.rho_x(),
        rho_y: tr.rho_y(),
        rho_z: tr.rho_z(),
        phi: angles.phi(),
        phi_g,
    })
}

/// Two-level trajectory for the generator entries in `generator` (JSON
/// object, missing entries are zero) from the Bloch vector `(x, y, z)`.
pub fn lindblad(generator: &str, x: f64, y: f64, z: f64, t_max: f64, dt: f64) -> Result<BlochTrajectory, String> {
    let fields: DissipatorFields = serde_json::from_str(generator).map_err(|e| e.to_string())?;
    let p = DissipatorParams::new(fields).map_err(|e| e.to_string())?;
    let b = BlochVector::new(x, y, z);
    if !b.is_physical() {
        return Err(format!("Bloch radius {} exceeds 1", b.radius()));
    }
    let g = grid(t_max, dt)?;
    let tr = if p.parity_constrained() {
        analytic_trajectory(&p, &b, &g.times())
    } else {
        evolve_numeric(&p, &b, &g)
    };
    tr.map_err(|e| e.to_string())
}

/// Fit, azimuth period and classification of a trajectory.
pub fn classify(tr: &BlochTrajectory) -> Result<serde_json::Value, String> {
    let a = fit::analyze(tr).map_err(|e| e.to_string())?;
    Ok(serde_json::json!({
        "classification": a.classification,
        "branch": a.fit.branch,
        "t_star": a.fit.t_star,
        "lambda_s": a.fit.lambda_s,
        "omega_sq": a.fit.omega_sq,
        "fit_period": a.fit.period(),
        "azimuth_period": a.period,
        "asymptotic": a.asymptotic,
    }))
}

/// Periodic-chain quench `h_pre -> h_post` measured at the middle site,
/// stopped at the boundary-free time.
#[allow(clippy::too_many_arguments)]
pub fn chain(n: usize, gamma_x: f64, gamma_y: f64, delta: f64, h_pre: f64, h_post: f64, dt: f64) -> Result<BlochTrajectory, String> {
    if n > MAX_SITES {
        return Err(format!("at most {MAX_SITES} sites"));
    }
    let pre = ChainParams::periodic(gamma_x, gamma_y, delta, h_pre, n).map_err(|e| e.to_string())?;
    let q = QuenchSpec::new(pre, pre.with_h(h_post), 0.0).map_err(|e| e.to_string())?;
    let site = pre.mid_site();
    let t_max = freefermion::boundary_free_time(&q.post, site);
    let g = grid(t_max, dt)?;
    freefermion::quench_trajectory(&q, site, &g.times()).map_err(|e| e.to_string())
}

fn to_js<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn lindblad_series(generator: &str, x: f64, y: f64, z: f64, t_max: f64, dt: f64) -> Result<String, JsError> {
    let tr = lindblad(generator, x, y, z, t_max, dt).map_err(|e| JsError::new(&e))?;
    to_js(&series(&tr).map_err(|e| JsError::new(&e))?)
}

#[wasm_bindgen]
pub fn lindblad_classify(generator: &str, x: f64, y: f64, z: f64, t_max: f64, dt: f64) -> Result<String, JsError> {
    let tr = lindblad(generator, x, y, z, t_max, dt).map_err(|e| JsError::new(&e))?;
    to_js(&classify(&tr).map_err(|e| JsError::new(&e))?)
}

#[wasm_bindgen]
pub fn chain_series(n: usize, gamma_x: f64, gamma_y: f64, delta: f64, h_pre: f64, h_post: f64, dt: f64) -> Result<String, JsError> {
    let tr = chain(n, gamma_x, gamma_y, delta, h_pre, h_post, dt).map_err(|e| JsError::new(&e))?;
    to_js(&series(&tr).map_err(|e| JsError::new(&e))?)
}

