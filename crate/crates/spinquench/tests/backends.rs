use num_complex::Complex64;
use spinquench::chain::{Boundary, ChainParams, QuenchSpec};
use spinquench::ed::{self, Evolver, ManyBodyState};
use spinquench::freefermion;
use spinquench::lindblad::BlochTrajectory;

fn max_dev(a: &BlochTrajectory, b: &BlochTrajectory) -> f64 {
    a.states()
        .iter()
        .zip(b.states())
        .map(|(x, y)| (x.rho_x - y.rho_x).abs().max((x.rho_y - y.rho_y).abs()).max((x.rho_z - y.rho_z).abs()))
        .fold(0.0, f64::max)
}

fn quench(d: f64, h0: f64, h1: f64, n: usize, b: Boundary, phase: f64) -> QuenchSpec {
    let pre = ChainParams::new(0.8, 0.2, d, h0, n, b).unwrap();
    QuenchSpec::new(pre, pre.with_h(h1), phase).unwrap()
}

fn times(t_max: f64, dt: f64) -> Vec<f64> {
    (0..).map(|i| i as f64 * dt).take_while(|t| *t <= t_max + 1e-12).collect()
}

#[test]
fn paramagnetic_quench_n8() {
    let q = quench(0.0, 0.8, 1.1, 8, Boundary::Periodic, 0.0);
    let ts = times(10.0, 0.05);
    let a = ed::quench_trajectory(&q, 4, &ts).unwrap();
    let b = freefermion::quench_trajectory(&q, 4, &ts).unwrap();
    assert!(max_dev(&a, &b) < 1e-8);
}

#[test]
fn next_nearest_neighbour_quenches() {
    for (h0, h1) in [(0.8, 0.97), (0.8, 1.3), (0.5, 0.2)] {
        let q = quench(0.2, h0, h1, 8, Boundary::Periodic, 0.0);
        let ts = times(6.0, 0.25);
        for site in [0, 3] {
            let a = ed::quench_trajectory(&q, site, &ts).unwrap();
            let b = freefermion::quench_trajectory(&q, site, &ts).unwrap();
            assert!(max_dev(&a, &b) < 1e-8, "{h0}->{h1} site {site}");
        }
    }
}

#[test]
fn open_chains_and_relative_phase() {
    for (d, phase, site) in [(0.0, 0.7, 1), (0.2, -1.9, 3), (0.3, 2.5, 0)] {
        let q = quench(d, 0.6, 1.2, 7, Boundary::Open, phase);
        let ts = times(5.0, 0.25);
        let a = ed::quench_trajectory(&q, site, &ts).unwrap();
        let b = freefermion::quench_trajectory(&q, site, &ts).unwrap();
        assert!(max_dev(&a, &b) < 1e-8, "d {d} phase {phase} site {site}");
    }
}

#[test]
fn twelve_sites() {
    let q = quench(0.2, 0.8, 1.3, 12, Boundary::Periodic, 0.4);
    let ts = times(4.0, 1.0);
    let a = ed::quench_trajectory(&q, 6, &ts).unwrap();
    let b = freefermion::quench_trajectory(&q, 6, &ts).unwrap();
    assert!(max_dev(&a, &b) < 1e-8);
}

#[test]
fn translation_invariance_at_the_factorization_point() {
    let p = ChainParams::periodic(0.8, 0.2, 0.0, 0.8, 8).unwrap();
    let (e, o) = ed::aligned_sectors(&p, 0).unwrap();
    let s = ed::symmetry_broken_state(&e.state, &o.state, 0.0).unwrap();
    let b0 = ed::single_spin_bloch(&s, 0).unwrap();
    for site in 1..8 {
        let b = ed::single_spin_bloch(&s, site).unwrap();
        assert!((b.rho_x - b0.rho_x).abs() < 1e-10);
        assert!((b.rho_z - b0.rho_z).abs() < 1e-10);
    }
}

#[test]
fn krylov_matches_dense_evolution() {
    let p = ChainParams::periodic(0.8, 0.2, 0.2, 1.3, 8).unwrap();
    let dense = Evolver::new(&p).unwrap();
    let krylov = Evolver::krylov(&p).unwrap();
    assert!(matches!(dense, Evolver::Dense { .. }));
    assert!(matches!(krylov, Evolver::Krylov { .. }));
    let amps: Vec<Complex64> = (0..256).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
    let s = ManyBodyState::new(8, amps).unwrap();
    for t in [0.5, 3.0] {
        let a = dense.evolve(&s, t).unwrap();
        let b = krylov.evolve(&s, t).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-12);
        let d = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(d < 1e-9, "t {t}: {d}");
    }
}

#[test]
fn free_fermion_bloch_vectors_stay_physical() {
    let q = quench(0.2, 0.8, 1.3, 40, Boundary::Periodic, 0.3);
    let tr = freefermion::quench_trajectory(&q, 20, &times(10.0, 0.5)).unwrap();
    assert!(tr.states().iter().all(|s| s.radius() <= 1.0 + 1e-10));
}
