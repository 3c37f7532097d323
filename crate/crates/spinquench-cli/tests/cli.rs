use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinquench"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spinquench-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn quench(config: &str, out: &Path) -> Output {
    run(&["quench", "--config", configs().join(config).to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn fit_json(input: &Path) -> (i32, serde_json::Value) {
    let o = run(&["fit", input.to_str().unwrap()]);
    let v = if o.status.success() { serde_json::from_slice(&o.stdout).unwrap() } else { serde_json::Value::Null };
    (code(&o), v)
}

fn write(name: &str, body: &str) -> PathBuf {
    let p = scratch(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn quench_table_layout_and_sidecar() {
    let out = scratch("osc.csv");
    assert_eq!(code(&quench("lindblad_oscillatory.toml", &out)), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,rho_x,rho_y,rho_z,r,theta,phi,Phi_t,Phi_d,Phi_g");
    assert_eq!(lines.count(), 6001);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "quench");
    assert_eq!(meta["config"]["grid"]["dt"], 0.01);
    assert_eq!(meta["defaults"]["t_max"], 50.0);
}

#[test]
fn output_is_deterministic() {
    let (a, b) = (scratch("det_a.csv"), scratch("det_b.csv"));
    quench("n8_free_fermion.toml", &a);
    quench("n8_free_fermion.toml", &b);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read(a.with_extension("meta.json")).unwrap(), std::fs::read(b.with_extension("meta.json")).unwrap());
}

#[test]
fn zero_generator_gives_constant_columns() {
    let out = scratch("zero.csv");
    assert_eq!(code(&quench("lindblad_zero.toml", &out)), 0);
    let mut rd = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    for r in &rows {
        for k in 1..=6 {
            assert_eq!(&r[k], &rows[0][k]);
        }
        assert_eq!(r[9].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn full_precision_round_trip() {
    let out = scratch("prec.csv");
    quench("lindblad_overdamped.toml", &out);
    let json = scratch("prec.json");
    let o = run(&["quench", "--config", configs().join("lindblad_overdamped.toml").to_str().unwrap(), "--format", "json", "--out", json.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let mut rd = csv::Reader::from_path(&out).unwrap();
    for (rec, row) in rd.records().zip(v["rows"].as_array().unwrap()) {
        let rec = rec.unwrap();
        for k in 0..10 {
            assert_eq!(rec[k].parse::<f64>().unwrap(), row[k].as_f64().unwrap());
        }
    }
}

#[test]
fn lindblad_round_trips() {
    for (config, want) in [("lindblad_oscillatory.toml", "Paramagnetic"), ("lindblad_overdamped.toml", "Ordered")] {
        let out = scratch(&config.replace(".toml", ".csv"));
        assert_eq!(code(&quench(config, &out)), 0);
        let (c, v) = fit_json(&out);
        assert_eq!(c, 0, "{config}");
        assert_eq!(v["classification"], want, "{config}");
    }
}

/// Every bundled config runs; fits either succeed or report insufficient
/// data. The N = 400 reference is left to the acceptance suite.
#[test]
fn bundled_configs_round_trip() {
    let expect_fit = [
        ("paramagnetic_h110.toml", Some("Paramagnetic")),
        ("paramagnetic_cluster_h130.toml", Some("Paramagnetic")),
        ("ordered_h095.toml", None),
        ("ordered_cluster_h097.toml", None),
        ("lindblad_zero.toml", None),
        ("lindblad_parity_violation.toml", None),
        ("n8_ed.toml", None),
        ("n8_free_fermion.toml", None),
    ];
    for (config, want) in expect_fit {
        let out = scratch(&config.replace(".toml", ".csv"));
        let q = quench(config, &out);
        assert_eq!(code(&q), 0, "{config}: {}", String::from_utf8_lossy(&q.stderr));
        let (c, v) = fit_json(&out);
        match want {
            Some(class) => {
                assert_eq!(c, 0, "{config}");
                assert_eq!(v["classification"], class, "{config}");
            }
            None => assert_eq!(c, 4, "{config}"),
        }
    }
}

#[test]
fn truncated_file_is_insufficient_data() {
    let out = scratch("trunc_src.csv");
    quench("lindblad_oscillatory.toml", &out);
    let text = std::fs::read_to_string(&out).unwrap();
    let short: String = text.lines().take(11).map(|l| format!("{l}\n")).collect();
    let p = write("trunc.csv", &short);
    assert_eq!(fit_json(&p).0, 4);
}

#[test]
fn bad_inputs_are_config_errors() {
    let missing = run(&["quench", "--config", "/nonexistent/config.toml"]);
    assert_eq!(code(&missing), 2);
    let bad = write("bad.toml", "backend = \"lindblad\"\n[grid]\ndt = 0.0\n[lindblad]\ninitial = [0.1, 0.0, 0.0]\n");
    assert_eq!(code(&run(&["quench", "--config", bad.to_str().unwrap()])), 2);
    let both = write(
        "both.toml",
        "backend = \"ed\"\n[chain]\ngamma_x = 0.8\ngamma_y = 0.2\ndelta = 0.0\nh = 0.8\nn = 6\n[quench]\nh = 1.1\n[lindblad]\ninitial = [0.1, 0.0, 0.0]\n",
    );
    assert_eq!(code(&run(&["quench", "--config", both.to_str().unwrap()])), 2);
    let uneven = write("uneven.csv", "t,rho_x,rho_y,rho_z\n0,0.5,0,0\n0.1,0.4,0,0\n0.3,0.3,0,0\n");
    assert_eq!(fit_json(&uneven).0, 2);
    let garbled = write("garbled.csv", "t,rho_x,rho_y,rho_z\n0,abc,0,0\n");
    assert_eq!(fit_json(&garbled).0, 2);
}

#[test]
fn single_point_sweep_rejected() {
    let body = std::fs::read_to_string(configs().join("sweep_h.toml")).unwrap();
    let one = body.replace("values = [0.90, 0.95, 1.05, 1.10, 1.30]", "values = [1.1]");
    let p = write("sweep_one.toml", &one);
    assert_eq!(code(&run(&["sweep", "--config", p.to_str().unwrap()])), 2);
}

#[test]
fn sweep_rows_follow_axis_order() {
    let out = scratch("sweep.csv");
    let o = run(&["sweep", "--workers", "2", "--config", configs().join("sweep_h.toml").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    let values: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(values, [0.90, 0.95, 1.05, 1.10, 1.30]);
    // well above the critical field the points are paramagnetic; below it
    // the window holds too little decay and the row records why. Close to
    // it (1.05) one slow period fills the whole window.
    for r in &rows[3..] {
        assert_eq!(&r[6], "Paramagnetic");
    }
    for r in &rows[..2] {
        assert!(&r[6] == "Ordered" || r[8].starts_with("insufficient data"), "{r:?}");
    }
    assert!(&rows[2][6] == "Paramagnetic" || rows[2][8].starts_with("insufficient data"), "{:?}", rows[2]);
}

#[test]
fn compare_identical_configs() {
    let out = scratch("same.csv");
    let c = configs().join("n8_ed.toml");
    let o = run(&["compare", "--config", c.to_str().unwrap(), "--reference", c.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["max_abs_dphi"], 0.0);
    assert!(meta["onset_time"].is_null());
}

#[test]
fn compare_backends_at_eight_sites() {
    let out = scratch("ed_ff.csv");
    let (a, b) = (configs().join("n8_ed.toml"), configs().join("n8_free_fermion.toml"));
    let o = run(&["compare", "--config", a.to_str().unwrap(), "--reference", b.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("meta.json")).unwrap()).unwrap();
    assert!(meta["max_abs_dphi"].as_f64().unwrap() < 1e-8);
}

#[test]
fn compare_rejects_grid_mismatch() {
    let body = std::fs::read_to_string(configs().join("n8_ed.toml")).unwrap();
    let p = write("n8_short.toml", &body.replace("t_max = 10.0", "t_max = 5.0"));
    let c = configs().join("n8_ed.toml");
    let o = run(&["compare", "--config", p.to_str().unwrap(), "--reference", c.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn help_documents_exit_codes() {
    let o = run(&["--help"]);
    let s = String::from_utf8(o.stdout).unwrap();
    for line in ["2  config", "3  numeric", "4  insufficient"] {
        assert!(s.contains(line));
    }
}
