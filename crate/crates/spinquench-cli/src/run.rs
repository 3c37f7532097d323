//! The four subcommands.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};
use spinquench::fit::{self, Analysis};
use spinquench::lindblad::{analytic_trajectory, evolve_numeric, TimeGrid};
use spinquench::{ed, freefermion, geometry, BlochTrajectory, BlochVector};

use crate::config::{self, Backend, Experiment, ExperimentConfig, Format};
use crate::error::CliError;
use crate::output::{emit, num, opt, Table};

pub const QUENCH_COLUMNS: [&str; 10] = ["t", "rho_x", "rho_y", "rho_z", "r", "theta", "phi", "Phi_t", "Phi_d", "Phi_g"];
pub const FIT_COLUMNS: [&str; 12] = [
    "t_star",
    "lambda_s",
    "omega_sq",
    "rho_z_inf",
    "branch",
    "residual",
    "fit_period",
    "azimuth_period",
    "classification",
    "slope",
    "expected_slope",
    "slope_rel_error",
];
pub const SWEEP_COLUMNS: [&str; 9] =
    ["value", "omega_sq", "lambda_s", "t_star", "fit_period", "azimuth_period", "classification", "t_end", "error"];
pub const COMPARE_COLUMNS: [&str; 4] = ["t", "phi", "phi_ref", "abs_dphi"];

/// Options shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Common {
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub backend: Option<Backend>,
}

impl Common {
    fn load(&self, path: &Path) -> Result<ExperimentConfig, CliError> {
        let mut c = ExperimentConfig::load(path)?;
        if let Some(b) = self.backend {
            c.backend = b;
        }
        c.resolved()
    }

    fn out<'a>(&'a self, c: &'a ExperimentConfig) -> Option<&'a Path> {
        self.out.as_deref().or(c.output.path.as_deref())
    }

    fn format(&self, c: Option<&ExperimentConfig>, fallback: Format) -> Format {
        self.format.or(c.and_then(|c| c.output.format)).unwrap_or(fallback)
    }
}

fn meta(command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert(
        "defaults".into(),
        json!({
            "site": "n / 2",
            "superposition_phase": config::DEFAULT_PHASE,
            "dt": config::DEFAULT_DT,
            "t_max": config::DEFAULT_T_MAX,
        }),
    );
    m
}

/// Time grid of a run; `grid.boundary_free` clips chain runs at the
/// boundary-free time of the measured site.
pub fn grid(c: &ExperimentConfig, e: &Experiment) -> Result<TimeGrid, CliError> {
    let mut t_max = c.grid.t_max;
    if let (true, Experiment::Chain { quench, site, .. }) = (c.grid.boundary_free, e) {
        t_max = t_max.min(freefermion::boundary_free_time(&quench.post, *site));
    }
    Ok(TimeGrid::up_to(t_max, c.grid.dt)?)
}

pub fn trajectory(e: &Experiment, g: &TimeGrid) -> Result<BlochTrajectory, CliError> {
    let times = g.times();
    Ok(match e {
        Experiment::Chain { backend: Backend::Ed, quench, site } => ed::quench_trajectory(quench, *site, &times)?,
        Experiment::Chain { quench, site, .. } => freefermion::quench_trajectory(quench, *site, &times)?,
        Experiment::Lindblad { params, initial } if params.parity_constrained() => {
            analytic_trajectory(params, initial, &times)?
        }
        Experiment::Lindblad { params, initial } => evolve_numeric(params, initial, g)?,
    })
}

fn simulate(c: &ExperimentConfig) -> Result<(Experiment, BlochTrajectory), CliError> {
    let e = c.experiment()?;
    let g = grid(c, &e)?;
    let tr = trajectory(&e, &g)?;
    Ok((e, tr))
}

fn boundary_time(e: &Experiment) -> Value {
    match e {
        Experiment::Chain { quench, site, .. } => num(freefermion::boundary_free_time(&quench.post, *site)),
        Experiment::Lindblad { .. } => Value::Null,
    }
}

/// Trajectory, angles and phases. Phases stop where the in-plane signal
/// falls below `fit::SAMPLE_SNR` times its noise floor.
pub fn quench_table(tr: &BlochTrajectory) -> Result<Table, CliError> {
    let angles = geometry::to_angles(tr)?;
    let clean = tr.head(fit::signal_end(tr, fit::SAMPLE_SNR));
    let phases = if clean.len() >= 2 { Some(geometry::phases_of(&clean, 0.0)?.1) } else { None };
    let mut table = Table::new(&QUENCH_COLUMNS);
    for (i, (s, a)) in tr.states().iter().zip(&angles.angles).enumerate() {
        let mut row = vec![
            num(tr.times()[i]),
            num(s.rho_x),
            num(s.rho_y),
            num(s.rho_z),
            num(a.r),
            num(a.theta),
            num(a.phi),
        ];
        match phases.as_ref().filter(|p| i < p.times.len()) {
            Some(p) => row.extend([num(p.phi_total[i]), num(p.phi_dynamic[i]), num(p.phi_geometric[i])]),
            None => row.extend([Value::Null, Value::Null, Value::Null]),
        }
        table.rows.push(row);
    }
    Ok(table)
}

pub fn quench(common: &Common, config: &Path) -> Result<(), CliError> {
    let c = common.load(config)?;
    let (e, tr) = simulate(&c)?;
    let table = quench_table(&tr)?;
    let format = common.format(Some(&c), Format::Csv);
    let mut m = meta("quench");
    m.insert("config".into(), serde_json::to_value(&c)?);
    m.insert("columns".into(), json!(QUENCH_COLUMNS));
    m.insert("samples".into(), json!(tr.len()));
    m.insert("phase_samples".into(), json!(table.rows.iter().filter(|r| !r[7].is_null()).count()));
    m.insert("boundary_free_time".into(), boundary_time(&e));
    emit(common.out(&c), &Value::Object(m), |w| table.write(format, w))
}

/// Read `t, rho_x, rho_y, rho_z` from a CSV table or a JSON table written by
/// `quench`. Other columns are ignored; the grid must be uniform.
pub fn read_trajectory(path: &Path) -> Result<BlochTrajectory, CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let want = ["t", "rho_x", "rho_y", "rho_z"];
    let rows: Vec<[f64; 4]> = if path.extension().is_some_and(|x| x == "json") {
        let v: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let cols: Vec<&str> = v["columns"].as_array().into_iter().flatten().filter_map(|c| c.as_str()).collect();
        let idx = want
            .iter()
            .map(|w| cols.iter().position(|c| c == w).ok_or_else(|| bad(format!("missing column {w}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let rows = v["rows"].as_array().ok_or_else(|| bad("missing rows".into()))?;
        rows.iter()
            .enumerate()
            .map(|(i, r)| {
                let mut out = [0.0; 4];
                for (k, &j) in idx.iter().enumerate() {
                    out[k] = r[j].as_f64().ok_or_else(|| bad(format!("row {i}: {} is not a number", want[k])))?;
                }
                Ok(out)
            })
            .collect::<Result<_, CliError>>()?
    } else {
        let mut rd = csv::Reader::from_path(path)?;
        let headers = rd.headers()?.clone();
        let idx = want
            .iter()
            .map(|w| headers.iter().position(|h| h.trim() == *w).ok_or_else(|| bad(format!("missing column {w}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rd.records()
            .enumerate()
            .map(|(i, rec)| {
                let rec = rec?;
                let mut out = [0.0; 4];
                for (k, &j) in idx.iter().enumerate() {
                    let s = rec.get(j).unwrap_or("").trim();
                    out[k] = s.parse().map_err(|_| bad(format!("row {i}: cannot parse {:?} as {}", s, want[k])))?;
                }
                Ok(out)
            })
            .collect::<Result<_, CliError>>()?
    };
    if rows.len() >= 2 {
        let dt = rows[1][0] - rows[0][0];
        if !(dt > 0.0) || rows.windows(2).any(|w| ((w[1][0] - w[0][0]) - dt).abs() > 1e-6 * dt) {
            return Err(bad("time grid is not uniform".into()));
        }
    }
    let times = rows.iter().map(|r| r[0]).collect();
    let states = rows.iter().map(|r| BlochVector::new(r[1], r[2], r[3])).collect();
    Ok(BlochTrajectory::new(times, states)?)
}

pub fn fit_report(a: &Analysis) -> Value {
    json!({
        "fit": a.fit,
        "fit_period": a.fit.period(),
        "azimuth_period": a.period,
        "classification": a.classification,
        "coefficients": a.coefficients,
        "asymptotic": a.asymptotic,
    })
}

fn fit_row(a: &Analysis) -> Vec<Value> {
    let (slope, expected, rel) = match a.asymptotic {
        Some(geometry::AsymptoticReport::Slope { slope, expected, rel_error, .. }) => {
            (num(slope), num(expected), num(rel_error))
        }
        _ => (Value::Null, Value::Null, Value::Null),
    };
    vec![
        num(a.fit.t_star),
        num(a.fit.lambda_s),
        num(a.fit.omega_sq),
        num(a.fit.rho_z_inf),
        json!(format!("{:?}", a.fit.branch)),
        num(a.fit.residual),
        opt(a.fit.period()),
        opt(a.period),
        json!(format!("{:?}", a.classification)),
        slope,
        expected,
        rel,
    ]
}

pub fn fit(common: &Common, input: &Path) -> Result<(), CliError> {
    let tr = read_trajectory(input)?;
    let a = fit::analyze(&tr)?;
    let format = common.format(None, Format::Json);
    let report = fit_report(&a);
    let mut m = meta("fit");
    m.insert("input".into(), json!(input));
    m.insert("samples".into(), json!(tr.len()));
    emit(common.out.as_deref(), &Value::Object(m), |w| match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *w, &report)?;
            writeln!(w)?;
            Ok(())
        }
        Format::Csv => {
            let mut t = Table::new(&FIT_COLUMNS);
            t.rows.push(fit_row(&a));
            t.write(Format::Csv, w)
        }
    })
}

fn sweep_point(c: &ExperimentConfig) -> Result<(f64, Analysis), CliError> {
    let (_, tr) = simulate(c)?;
    let t_end = tr.times()[tr.len() - 1];
    Ok((t_end, fit::analyze(&tr)?))
}

pub fn sweep(common: &Common, config: &Path) -> Result<(), CliError> {
    let c = common.load(config)?;
    let s = c.sweep.clone().ok_or_else(|| CliError::Config("missing [sweep] block".into()))?;
    if c.backend == Backend::Lindblad {
        return Err(CliError::Config("sweeps run on chain backends".into()));
    }
    if s.values.len() < 2 {
        return Err(CliError::Config(format!("a sweep needs at least 2 points, got {}", s.values.len())));
    }
    let points = s.values.iter().map(|&v| c.with_post(s.parameter, v)).collect::<Result<Vec<_>, _>>()?;
    for p in &points {
        p.experiment()?;
    }
    let results: Vec<Result<(f64, Analysis), CliError>> = points.par_iter().map(sweep_point).collect();
    let mut table = Table::new(&SWEEP_COLUMNS);
    for (v, r) in s.values.iter().zip(&results) {
        table.rows.push(match r {
            Ok((t_end, a)) => vec![
                num(*v),
                num(a.fit.omega_sq),
                num(a.fit.lambda_s),
                num(a.fit.t_star),
                opt(a.fit.period()),
                opt(a.period),
                json!(format!("{:?}", a.classification)),
                num(*t_end),
                Value::Null,
            ],
            Err(e) => {
                let mut row = vec![num(*v)];
                row.extend(std::iter::repeat_n(Value::Null, 7));
                row.push(json!(e.to_string()));
                row
            }
        });
    }
    let format = common.format(Some(&c), Format::Csv);
    let mut m = meta("sweep");
    m.insert("config".into(), serde_json::to_value(&c)?);
    m.insert("columns".into(), json!(SWEEP_COLUMNS));
    m.insert("failed_points".into(), json!(results.iter().filter(|r| r.is_err()).count()));
    emit(common.out(&c), &Value::Object(m), |w| table.write(format, w))
}

/// `|phi - phi_ref|` per sample and the first time it exceeds `threshold`.
pub fn divergence(tr: &BlochTrajectory, reference: &BlochTrajectory, threshold: f64) -> Result<(Table, Option<f64>), CliError> {
    let (ta, tb) = (tr.times(), reference.times());
    if ta.len() != tb.len() || ta.iter().zip(tb).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0)) {
        return Err(CliError::Config(format!("grid mismatch: {} vs {} samples", ta.len(), tb.len())));
    }
    let pa = geometry::to_angles(tr)?.phi();
    let pb = geometry::to_angles(reference)?.phi();
    let mut table = Table::new(&COMPARE_COLUMNS);
    let mut onset = None;
    for i in 0..ta.len() {
        let d = (pa[i] - pb[i]).abs();
        if onset.is_none() && d > threshold {
            onset = Some(ta[i]);
        }
        table.rows.push(vec![num(ta[i]), num(pa[i]), num(pb[i]), num(d)]);
    }
    Ok((table, onset))
}

pub fn compare(common: &Common, config: &Path, reference: &Path, threshold: f64) -> Result<(), CliError> {
    let c = common.load(config)?;
    let r = common.load(reference)?;
    let (a, b) = rayon::join(|| simulate(&c), || simulate(&r));
    let ((_, ta), (_, tb)) = (a?, b?);
    let (table, onset) = divergence(&ta, &tb, threshold)?;
    let max = table.rows.iter().filter_map(|row| row[3].as_f64()).fold(0.0, f64::max);
    match onset {
        Some(t) => eprintln!("onset t = {t} (threshold {threshold:e}, max |dphi| = {max:e})"),
        None => eprintln!("no divergence above {threshold:e} (max |dphi| = {max:e})"),
    }
    let format = common.format(Some(&c), Format::Csv);
    let mut m = meta("compare");
    m.insert("config".into(), serde_json::to_value(&c)?);
    m.insert("reference".into(), serde_json::to_value(&r)?);
    m.insert("columns".into(), json!(COMPARE_COLUMNS));
    m.insert("threshold".into(), num(threshold));
    m.insert("onset_time".into(), opt(onset));
    m.insert("max_abs_dphi".into(), num(max));
    emit(common.out(&c), &Value::Object(m), |w| table.write(format, w))
}
