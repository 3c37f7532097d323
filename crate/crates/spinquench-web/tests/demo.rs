use spinquench_web::*;

const OSC: &str = r#"{"h_z": -1.0, "lambda_x": 0.04, "lambda_y": 0.04}"#;

#[test]
fn lindblad_series_has_matching_columns() {
    let tr = lindblad(OSC, 0.8, 0.0, 0.5, 30.0, 0.01).unwrap();
    let s = series(&tr).unwrap();
    assert_eq!(s.t.len(), 3001);
    assert_eq!(s.phi.len(), s.t.len());
    assert_eq!(s.phi_g.len(), s.t.len());
    // counter-clockwise precession at rate 2
    assert!((s.phi[100] - 2.0).abs() < 1e-9);
}

#[test]
fn classification_of_both_branches() {
    let tr = lindblad(OSC, 0.8, 0.0, 0.5, 60.0, 0.01).unwrap();
    assert_eq!(classify(&tr).unwrap()["classification"], "Paramagnetic");
    let od = r#"{"h_z": 0.05, "alpha": 0.15, "lambda_x": 0.3, "lambda_y": 0.1}"#;
    let tr = lindblad(od, 0.8, 0.0, 0.5, 60.0, 0.01).unwrap();
    assert_eq!(classify(&tr).unwrap()["classification"], "Ordered");
}

#[test]
fn chain_quench_stops_at_boundary_time() {
    let tr = chain(24, 0.8, 0.2, 0.0, 0.8, 1.1, 0.1).unwrap();
    let t_end = *tr.times().last().unwrap();
    assert!(t_end > 5.0 && t_end < 8.0, "{t_end}");
    assert!(tr.states().iter().all(|s| s.is_physical()));
}

#[test]
fn limits_and_bad_input() {
    assert!(chain(MAX_SITES + 2, 0.8, 0.2, 0.0, 0.8, 1.1, 0.1).is_err());
    assert!(lindblad(OSC, 0.8, 0.0, 0.5, 1e6, 0.01).is_err());
    assert!(lindblad(r#"{"lambda_x": -1}"#, 0.1, 0.0, 0.0, 1.0, 0.01).is_err());
    assert!(lindblad(r#"{"bogus": 1}"#, 0.1, 0.0, 0.0, 1.0, 0.01).is_err());
    assert!(lindblad(OSC, 0.9, 0.9, 0.0, 1.0, 0.01).is_err());
}
