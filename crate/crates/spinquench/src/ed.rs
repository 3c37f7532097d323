//! Exact diagonalization in the `sigma_z` product basis.
//!
//! Bit `j` of a basis index is site `j`; a set bit is spin down, so
//! `Z_j |s> = (-1)^{s_j} |s>`. The Hamiltonian is real symmetric in this basis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{Boundary, ChainParams, QuenchSpec};
use crate::error::{Error, Result};
use crate::lindblad::{BlochTrajectory, BlochVector};

/// Default cap on the chain length handled here.
pub const MAX_SITES: usize = 14;
/// Longest chain evolved by full diagonalization; longer ones use Krylov steps.
pub const DENSE_MAX_SITES: usize = 10;
/// Krylov subspace dimension for time stepping.
pub const KRYLOV_DIM: usize = 30;
/// Target a-posteriori error per Krylov step.
pub const KRYLOV_TOL: f64 = 1e-10;
/// Relative energy split below which the two sectors count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

impl Parity {
    fn of_index(s: usize) -> Parity {
        if s.count_ones() % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManyBodyState {
    n: usize,
    amplitudes: Vec<Complex64>,
    parity: Parity,
}

impl ManyBodyState {
    /// Normalized state with the parity inferred from its support.
    pub fn new(n: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != 1 << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, got: amplitudes.len() });
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("zero state".into()));
        }
        let amplitudes: Vec<_> = amplitudes.into_iter().map(|a| a / norm).collect();
        let parity = infer_parity(&amplitudes);
        Ok(Self { n, amplitudes, parity })
    }

    /// Product basis state; `down` has bit `j` set for a down spin on site `j`.
    pub fn basis(n: usize, down: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[down] = Complex64::new(1.0, 0.0);
        Self { n, amplitudes, parity: Parity::of_index(down) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &ManyBodyState) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    /// Multiply by a global phase factor.
    pub fn scaled(&self, phase: Complex64) -> ManyBodyState {
        ManyBodyState {
            n: self.n,
            amplitudes: self.amplitudes.iter().map(|a| a * phase).collect(),
            parity: self.parity,
        }
    }
}

fn infer_parity(a: &[Complex64]) -> Parity {
    let w = |p: Parity| {
        a.iter()
            .enumerate()
            .filter(|(s, _)| Parity::of_index(*s) == p)
            .map(|(_, x)| x.norm_sqr())
            .sum::<f64>()
    };
    let (e, o) = (w(Parity::Even), w(Parity::Odd));
    if o <= 1e-24 {
        Parity::Even
    } else if e <= 1e-24 {
        Parity::Odd
    } else {
        Parity::Mixed
    }
}

#[inline]
fn zsign(s: usize, j: usize) -> f64 {
    if s >> j & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// One off-diagonal term family acting on a fixed flip mask.
#[derive(Clone, Copy, Debug)]
enum Flip {
    /// `-gx X_i X_j - gy Y_i Y_j`
    Bond { i: usize, j: usize, gx: f64, gy: f64 },
    /// `-d X_l Z_c X_r`
    Cluster { c: usize, d: f64 },
}

/// Precomputed matrix-free Hamiltonian.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    n: usize,
    diag: Vec<f64>,
    flips: Vec<(usize, Flip)>,
}

impl Hamiltonian {
    pub fn new(p: &ChainParams) -> Result<Self> {
        p.validate()?;
        let n = p.n;
        if n > 30 {
            return Err(Error::InvalidParameter(format!("{n} sites is beyond dense storage")));
        }
        let dim = 1usize << n;
        let diag = (0..dim).map(|s| -p.h * (0..n).map(|j| zsign(s, j)).sum::<f64>()).collect();
        let periodic = p.boundary == Boundary::Periodic;
        let mut flips = Vec::new();
        let nb = if periodic { n } else { n - 1 };
        for i in 0..nb {
            let j = (i + 1) % n;
            if p.gamma_x != 0.0 || p.gamma_y != 0.0 {
                flips.push((1 << i | 1 << j, Flip::Bond { i, j, gx: p.gamma_x, gy: p.gamma_y }));
            }
        }
        if p.delta != 0.0 {
            let centers: Vec<usize> = if periodic { (0..n).collect() } else { (1..n - 1).collect() };
            for c in centers {
                let l = (c + n - 1) % n;
                let r = (c + 1) % n;
                flips.push((1 << l | 1 << r, Flip::Cluster { c, d: p.delta }));
            }
        }
        Ok(Self { n, diag, flips })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    #[inline]
    fn amp(f: &Flip, s: usize) -> f64 {
        match *f {
            Flip::Bond { i, j, gx, gy } => -gx + gy * zsign(s, i) * zsign(s, j),
            Flip::Cluster { c, d } => -d * zsign(s, c),
        }
    }

    /// `out = H v` for real or complex vectors.
    pub fn apply_into<T>(&self, v: &[T], out: &mut [T])
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::AddAssign,
    {
        for s in 0..v.len() {
            let mut acc = v[s] * self.diag[s];
            for (mask, f) in &self.flips {
                acc += v[s ^ mask] * Self::amp(f, s);
            }
            out[s] = acc;
        }
    }

    /// Dense real symmetric matrix.
    pub fn dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for s in 0..d {
            m[(s, s)] = self.diag[s];
            for (mask, f) in &self.flips {
                m[(s, s ^ mask)] += Self::amp(f, s);
            }
        }
        m
    }
}

/// `H v`, matrix-free.
pub fn apply_hamiltonian(p: &ChainParams, v: &[Complex64]) -> Result<Vec<Complex64>> {
    if v.len() != 1 << p.n {
        return Err(Error::DimensionMismatch { expected: 1 << p.n, got: v.len() });
    }
    let h = Hamiltonian::new(p)?;
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    h.apply_into(v, &mut out);
    Ok(out)
}

/// Lanczos settings for sector ground states.
#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub max_sites: usize,
    pub krylov_max: usize,
    pub restarts: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_sites: MAX_SITES, krylov_max: 160, restarts: 40, tol: 1e-12, seed: 7 }
    }
}

/// A sector ground state.
#[derive(Clone, Debug)]
pub struct SectorGround {
    pub energy: f64,
    pub state: ManyBodyState,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(v: &mut [f64], parity: Parity) {
    for (s, x) in v.iter_mut().enumerate() {
        if Parity::of_index(s) != parity {
            *x = 0.0;
        }
    }
}

fn lanczos_ground(h: &Hamiltonian, parity: Parity, o: &LanczosOptions) -> Result<(f64, Vec<f64>)> {
    let dim = h.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed ^ (parity as u64));
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    project(&mut v, parity);
    let sector_dim = dim / 2;
    let scale = h.diag.iter().fold(1.0f64, |a, b| a.max(b.abs()))
        + h.flips.len() as f64 * 2.0;
    let mut w = vec![0.0; dim];
    for _ in 0..=o.restarts {
        let nv = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let m_max = o.krylov_max.min(sector_dim);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_max);
        let (mut alpha, mut beta) = (Vec::new(), Vec::new());
        basis.push(v.clone());
        let mut breakdown = false;
        loop {
            let k = basis.len() - 1;
            h.apply_into(&basis[k], &mut w);
            project(&mut w, parity);
            let a = dot(&w, &basis[k]);
            alpha.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let bnorm = dot(&w, &w).sqrt();
            if bnorm < 1e-13 * scale {
                breakdown = true;
                break;
            }
            if basis.len() == m_max {
                beta.push(bnorm);
                break;
            }
            beta.push(bnorm);
            basis.push(w.iter().map(|x| x / bnorm).collect());
        }
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, &e0) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty tridiagonal");
        let y = eig.eigenvectors.column(imin);
        let mut x = vec![0.0; dim];
        for (k, b) in basis.iter().enumerate() {
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += y[k] * bi);
        }
        let nx = dot(&x, &x).sqrt();
        x.iter_mut().for_each(|xi| *xi /= nx);
        h.apply_into(&x, &mut w);
        let res = w.iter().zip(&x).map(|(hx, xi)| (hx - e0 * xi).powi(2)).sum::<f64>().sqrt();
        if res < o.tol * scale.max(1.0) || (breakdown && res < 1e-9 * scale) {
            return Ok((e0, x));
        }
        v = x;
    }
    Err(Error::NoConvergence(format!("Lanczos in the {parity:?} sector")))
}

/// Lowest eigenpair in the even and odd parity sectors.
pub fn ground_state_sectors(p: &ChainParams) -> Result<(SectorGround, SectorGround)> {
    ground_state_sectors_with(p, &LanczosOptions::default())
}

pub fn ground_state_sectors_with(
    p: &ChainParams,
    o: &LanczosOptions,
) -> Result<(SectorGround, SectorGround)> {
    if p.n > o.max_sites {
        return Err(Error::InvalidParameter(format!(
            "{} sites exceeds the exact-diagonalization cap {}",
            p.n, o.max_sites
        )));
    }
    let h = Hamiltonian::new(p)?;
    let mk = |parity| -> Result<SectorGround> {
        let (energy, v) = lanczos_ground(&h, parity, o)?;
        let amplitudes = v.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
        Ok(SectorGround { energy, state: ManyBodyState { n: p.n, amplitudes, parity } })
    };
    Ok((mk(Parity::Even)?, mk(Parity::Odd)?))
}

/// True when the two sector energies agree within the degeneracy tolerance.
pub fn sectors_degenerate(e_even: f64, e_odd: f64) -> bool {
    (e_even - e_odd).abs() < DEGENERACY_TOL * e_even.abs().max(1.0)
}

/// `(|e> + e^{i phase} |o>) / sqrt(2)`.
pub fn symmetry_broken_state(e: &ManyBodyState, o: &ManyBodyState, phase: f64) -> Result<ManyBodyState> {
    if e.parity != Parity::Even || o.parity != Parity::Odd {
        return Err(Error::ParityMismatch(format!(
            "expected (Even, Odd), got ({:?}, {:?})",
            e.parity, o.parity
        )));
    }
    if e.n != o.n {
        return Err(Error::DimensionMismatch { expected: e.amplitudes.len(), got: o.amplitudes.len() });
    }
    for s in [e, o] {
        if (s.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter("sector state is not normalized".into()));
        }
    }
    let f = Complex64::from_polar(1.0, phase);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let amplitudes = e.amplitudes.iter().zip(&o.amplitudes).map(|(a, b)| (a + f * b) * r).collect();
    Ok(ManyBodyState { n: e.n, amplitudes, parity: Parity::Mixed })
}

/// `(<X>, <Y>, <Z>)` on one site.
pub fn single_spin_bloch(s: &ManyBodyState, site: usize) -> Result<BlochVector> {
    if site >= s.n {
        return Err(Error::IndexOutOfRange { index: site, len: s.n });
    }
    let m = 1usize << site;
    let (mut x, mut y, mut z) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), 0.0);
    for (k, a) in s.amplitudes.iter().enumerate() {
        let b = s.amplitudes[k ^ m].conj() * a;
        let sg = zsign(k, site);
        x += b;
        // Y |up> = i |down>, Y |down> = -i |up>
        y += b * Complex64::new(0.0, sg);
        z += sg * a.norm_sqr();
    }
    Ok(BlochVector::new(x.re, y.re, z))
}

/// Time evolution under a fixed Hamiltonian.
pub enum Evolver {
    Dense { n: usize, values: DVector<f64>, vectors: DMatrix<f64> },
    Krylov { h: Hamiltonian },
}

impl Evolver {
    pub fn new(p: &ChainParams) -> Result<Self> {
        Self::with_cap(p, MAX_SITES)
    }

    pub fn with_cap(p: &ChainParams, max_sites: usize) -> Result<Self> {
        if p.n > max_sites {
            return Err(Error::InvalidParameter(format!(
                "{} sites exceeds the exact-diagonalization cap {max_sites}",
                p.n
            )));
        }
        if p.n <= DENSE_MAX_SITES {
            Self::dense(p)
        } else {
            Self::krylov(p)
        }
    }

    /// Full eigendecomposition, whatever the size.
    pub fn dense(p: &ChainParams) -> Result<Self> {
        let h = Hamiltonian::new(p)?;
        let eig = SymmetricEigen::new(h.dense());
        Ok(Evolver::Dense { n: p.n, values: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    /// Krylov propagation, whatever the size.
    pub fn krylov(p: &ChainParams) -> Result<Self> {
        Ok(Evolver::Krylov { h: Hamiltonian::new(p)? })
    }

    pub fn evolve(&self, s: &ManyBodyState, t: f64) -> Result<ManyBodyState> {
        let amplitudes = match self {
            Evolver::Dense { n, values, vectors } => {
                if s.n != *n {
                    return Err(Error::DimensionMismatch { expected: 1 << n, got: s.amplitudes.len() });
                }
                let d = values.len();
                let re = DVector::from_iterator(d, s.amplitudes.iter().map(|a| a.re));
                let im = DVector::from_iterator(d, s.amplitudes.iter().map(|a| a.im));
                let (cr, ci) = (vectors.tr_mul(&re), vectors.tr_mul(&im));
                let mut pr = DVector::zeros(d);
                let mut pi = DVector::zeros(d);
                for k in 0..d {
                    let (c, sn) = ((values[k] * t).cos(), (values[k] * t).sin());
                    // (cr + i ci) (c - i sn)
                    pr[k] = cr[k] * c + ci[k] * sn;
                    pi[k] = ci[k] * c - cr[k] * sn;
                }
                let (ar, ai) = (vectors * pr, vectors * pi);
                ar.iter().zip(ai.iter()).map(|(r, i)| Complex64::new(*r, *i)).collect()
            }
            Evolver::Krylov { h } => {
                if s.n != h.n {
                    return Err(Error::DimensionMismatch { expected: h.dim(), got: s.amplitudes.len() });
                }
                krylov_evolve(h, &s.amplitudes, t)?
            }
        };
        Ok(ManyBodyState { n: s.n, amplitudes, parity: s.parity })
    }
}

/// `e^{-iHt} v` by repeated Krylov steps with an a-posteriori error bound.
fn krylov_evolve(h: &Hamiltonian, v0: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    let dim = h.dim();
    let mut v = v0.to_vec();
    let mut remaining = t;
    let mut tau = t;
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut guard = 0;
    while remaining > 0.0 {
        guard += 1;
        if guard > 100_000 {
            return Err(Error::NoConvergence("Krylov stepping".into()));
        }
        let nv = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let mut basis: Vec<Vec<Complex64>> = vec![v.iter().map(|a| a / nv).collect()];
        let (mut alpha, mut beta) = (Vec::new(), Vec::new());
        let mut tail = 0.0;
        for k in 0..KRYLOV_DIM {
            h.apply_into(&basis[k], &mut w);
            let a: f64 = basis[k].iter().zip(&w).map(|(b, x)| (b.conj() * x).re).sum();
            alpha.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c: Complex64 = b.iter().zip(&w).map(|(bi, x)| bi.conj() * x).sum();
                    w.iter_mut().zip(b).for_each(|(x, bi)| *x -= c * bi);
                }
            }
            let bn = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if bn < 1e-12 || k + 1 == KRYLOV_DIM {
                tail = if bn < 1e-12 { 0.0 } else { bn };
                break;
            }
            beta.push(bn);
            basis.push(w.iter().map(|x| x / bn).collect());
        }
        let m = alpha.len();
        let mut tm = DMatrix::zeros(m, m);
        for i in 0..m {
            tm[(i, i)] = alpha[i];
            if i + 1 < m {
                tm[(i, i + 1)] = beta[i];
                tm[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(tm);
        tau = tau.min(remaining);
        loop {
            // c = exp(-i T tau) e1
            let c: Vec<Complex64> = (0..m)
                .map(|i| {
                    (0..m)
                        .map(|k| {
                            let q = eig.eigenvectors[(0, k)] * eig.eigenvectors[(i, k)];
                            Complex64::from_polar(q, -eig.eigenvalues[k] * tau)
                        })
                        .sum()
                })
                .collect();
            let err = tail * c[m - 1].norm();
            if err < KRYLOV_TOL || tau < 1e-12 {
                let mut out = vec![Complex64::new(0.0, 0.0); dim];
                for (k, b) in basis.iter().enumerate() {
                    let ck = c[k] * nv;
                    out.iter_mut().zip(b).for_each(|(o, bi)| *o += ck * bi);
                }
                v = out;
                remaining -= tau;
                if err < 0.1 * KRYLOV_TOL {
                    tau *= 1.5;
                }
                break;
            }
            tau *= 0.5;
        }
    }
    Ok(v)
}

/// Evolve a state by `e^{-i H_post t}`.
pub fn evolve_state(s: &ManyBodyState, p_post: &ChainParams, t: f64) -> Result<ManyBodyState> {
    Evolver::new(p_post)?.evolve(s, t)
}

/// Expectation value of the Hamiltonian.
pub fn energy(s: &ManyBodyState, p: &ChainParams) -> Result<f64> {
    let hv = apply_hamiltonian(p, &s.amplitudes)?;
    Ok(s.amplitudes.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum())
}

/// Sector ground states of `pre`, with the odd state's sign fixed so that
/// `<e|X_site|o>` is non-negative.
pub fn aligned_sectors(pre: &ChainParams, site: usize) -> Result<(SectorGround, SectorGround)> {
    let (e, mut o) = ground_state_sectors(pre)?;
    if site >= pre.n {
        return Err(Error::IndexOutOfRange { index: site, len: pre.n });
    }
    let m = 1usize << site;
    let fx: f64 = (0..1usize << pre.n)
        .map(|k| (e.state.amplitudes[k ^ m].conj() * o.state.amplitudes[k]).re)
        .sum();
    if fx < 0.0 {
        o.state = o.state.scaled(Complex64::new(-1.0, 0.0));
    }
    Ok((e, o))
}

/// Bloch trajectory of one site after the quench, starting from the
/// symmetry-broken pre-quench ground state.
pub fn quench_trajectory(q: &QuenchSpec, site: usize, times: &[f64]) -> Result<BlochTrajectory> {
    q.validate()?;
    let (e, o) = aligned_sectors(&q.pre, site)?;
    let psi = symmetry_broken_state(&e.state, &o.state, q.relative_phase)?;
    let ev = Evolver::new(&q.post)?;
    let states = times
        .iter()
        .map(|&t| single_spin_bloch(&ev.evolve(&psi, t)?, site))
        .collect::<Result<Vec<_>>>()?;
    BlochTrajectory::new(times.to_vec(), states)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn field_on_polarized_state() {
        let p = ChainParams::periodic(0.0, 0.0, 0.0, 1.0, 5).unwrap();
        let v = ManyBodyState::basis(5, 0);
        let hv = apply_hamiltonian(&p, v.amplitudes()).unwrap();
        assert!((hv[0] - c(-5.0)).norm() < 1e-15);
    }

    #[test]
    fn single_bond_flip() {
        let p = ChainParams::new(1.0, 0.0, 0.0, 0.0, 2, Boundary::Open).unwrap();
        let hv = apply_hamiltonian(&p, ManyBodyState::basis(2, 0).amplitudes()).unwrap();
        assert_eq!(hv, vec![c(0.0), c(0.0), c(0.0), c(-1.0)]);
    }

    #[test]
    fn dimension_checked() {
        let p = ChainParams::periodic(1.0, 0.0, 0.0, 0.0, 3).unwrap();
        assert!(matches!(apply_hamiltonian(&p, &[c(1.0)]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn free_spins_sectors() {
        let p = ChainParams::periodic(0.0, 0.0, 0.0, 1.0, 4).unwrap();
        let (e, o) = ground_state_sectors(&p).unwrap();
        assert!((e.energy + 4.0).abs() < 1e-10);
        assert!((o.energy - e.energy - 2.0).abs() < 1e-10);
        assert!((e.state.amplitudes()[0].norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn classical_ising_degenerate() {
        let p = ChainParams::periodic(1.0, 0.0, 0.0, 0.0, 8).unwrap();
        let (e, o) = ground_state_sectors(&p).unwrap();
        assert!((e.energy + 8.0).abs() < 1e-10 && (o.energy + 8.0).abs() < 1e-10);
        let (e, o) = aligned_sectors(&p, 0).unwrap();
        let s = symmetry_broken_state(&e.state, &o.state, 0.0).unwrap();
        let b = single_spin_bloch(&s, 3).unwrap();
        assert!((b.rho_x.abs() - 1.0).abs() < 1e-10 && b.rho_y.abs() < 1e-12 && b.rho_z.abs() < 1e-10);
        let _ = e;
    }

    #[test]
    fn broken_state_phase_flip() {
        let e = ManyBodyState::basis(2, 0);
        let o = ManyBodyState::new(2, vec![c(0.0), c(1.0), c(1.0), c(0.0)]).unwrap();
        let a = symmetry_broken_state(&e, &o, 0.0).unwrap();
        let b = symmetry_broken_state(&e, &o, std::f64::consts::PI).unwrap();
        assert_eq!(a.parity(), Parity::Mixed);
        assert!((a.norm() - 1.0).abs() < 1e-14);
        let (ba, bb) = (single_spin_bloch(&a, 0).unwrap(), single_spin_bloch(&b, 0).unwrap());
        assert!(ba.rho_x > 0.1 && (ba.rho_x + bb.rho_x).abs() < 1e-14);
        assert!((ba.rho_z - bb.rho_z).abs() < 1e-14);
        assert!(matches!(symmetry_broken_state(&o, &e, 0.0), Err(Error::ParityMismatch(_))));
    }

    #[test]
    fn site_range() {
        assert!(matches!(
            single_spin_bloch(&ManyBodyState::basis(3, 0), 3),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn zero_time_identity() {
        let p = ChainParams::periodic(0.8, 0.2, 0.1, 1.1, 6).unwrap();
        let (e, _) = ground_state_sectors(&p.with_h(0.5)).unwrap();
        let s = evolve_state(&e.state, &p, 0.0).unwrap();
        assert!((s.inner(&e.state).norm() - 1.0).abs() < 1e-12);
    }
}
