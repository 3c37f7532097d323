//! Jordan-Wigner backend.
//!
//! Majoranas `c_{2j} = (prod_{l<j} Z_l) X_j`, `c_{2j+1} = (prod_{l<j} Z_l) Y_j`,
//! so `Z_j = -i c_{2j} c_{2j+1}`. On a parity sector the chain Hamiltonian is
//! `H = (i/2) c^T K c` with `K` real antisymmetric, and Heisenberg evolution is
//! `c(t) = exp(2Kt) c`.
//!
//! Internally states are held through `M_pq = i<c_p c_q>` (`p != q`), for which
//! a pure state has `M^2 = -1`. The public covariance is `Gamma = -M/2`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{Boundary, ChainParams, QuenchSpec};
use crate::error::{Error, Result};
use crate::lindblad::{BlochTrajectory, BlochVector};
use crate::pfaffian::{log_pfaffian_unchecked, LogPf};

type CMat = DMatrix<Complex64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sector {
    Even,
    Odd,
}

impl Sector {
    fn sign(self) -> f64 {
        match self {
            Sector::Even => 1.0,
            Sector::Odd => -1.0,
        }
    }
}

/// Quadratic Majorana form of the chain on one parity sector.
#[derive(Clone, Debug)]
pub struct BdgModel {
    pub n: usize,
    pub sector: Sector,
    /// `K` in `H = (i/2) c^T K c`.
    pub coupling: DMatrix<f64>,
}

impl BdgModel {
    /// The evolution generator `2K`.
    fn generator(&self) -> DMatrix<f64> {
        &self.coupling * 2.0
    }
}

/// Majorana form of the chain. On a periodic chain the wrap-around terms pick
/// up `-P`: antiperiodic fermions for even parity, periodic for odd.
pub fn jordan_wigner_bdg(p: &ChainParams, sector: Sector) -> Result<BdgModel> {
    p.validate()?;
    let n = p.n;
    let mut k = DMatrix::zeros(2 * n, 2 * n);
    let mut add = |i: usize, j: usize, v: f64| {
        k[(i, j)] += v;
        k[(j, i)] -= v;
    };
    let (a, b) = (|j: usize| 2 * j, |j: usize| 2 * j + 1);
    let periodic = p.boundary == Boundary::Periodic;
    let wrap = -sector.sign();
    for j in 0..n {
        add(a(j), b(j), p.h);
    }
    for j in 0..n {
        if j + 1 < n {
            add(b(j), a(j + 1), p.gamma_x);
            add(a(j), b(j + 1), -p.gamma_y);
        } else if periodic {
            add(b(j), a(0), p.gamma_x * wrap);
            add(a(j), b(0), -p.gamma_y * wrap);
        }
    }
    if p.delta != 0.0 {
        for j in 0..n {
            if j >= 1 && j + 1 < n {
                add(b(j - 1), a(j + 1), p.delta);
            } else if periodic {
                add(b((j + n - 1) % n), a((j + 1) % n), p.delta * wrap);
            }
        }
    }
    Ok(BdgModel { n, sector, coupling: k })
}

/// Normal modes: `W^T (2K) W = diag_k [[0, e_k], [-e_k, 0]]`, `e_k >= 0` ascending.
#[derive(Clone, Debug)]
pub struct BdgModes {
    pub energies: Vec<f64>,
    pub transform: DMatrix<f64>,
    /// Some pair of energies differs by less than `1e-12`.
    pub degenerate: bool,
}

/// Mode energies and orthogonal mode transformation of a Majorana form.
pub fn diagonalize_bdg(m: &BdgModel) -> BdgModes {
    let (transform, energies) = antisymmetric_modes(&m.generator());
    let degenerate = energies.windows(2).any(|w| w[1] - w[0] < 1e-12);
    BdgModes { energies, transform, degenerate }
}

/// Orthogonal `W` and `e_k >= 0` with `W^T A W = diag [[0, e_k], [-e_k, 0]]`.
///
/// Works from the symmetric eigenproblem of `-A^2`; each eigenvector `u` not
/// yet covered yields the pair `(A u / |A u|, u)`. The near-null subspace,
/// where `-A^2` cannot resolve `e_k`, is compressed and treated recursively.
pub fn antisymmetric_modes(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let n = a.nrows();
    assert!(n % 2 == 0, "antisymmetric_modes needs even dimension");
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut w = DMatrix::zeros(n, n);
    if scale == 0.0 {
        return (DMatrix::identity(n, n), vec![0.0; n / 2]);
    }
    if n == 2 {
        let e = a[(0, 1)];
        if e >= 0.0 {
            return (DMatrix::identity(2, 2), vec![e]);
        }
        w[(1, 0)] = 1.0;
        w[(0, 1)] = 1.0;
        return (w, vec![-e]);
    }
    let s = a.tr_mul(a);
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let tau = (1e-5 * scale).powi(2);
    let mut nnull = order.iter().take_while(|&&i| eig.eigenvalues[i] < tau).count();
    if nnull % 2 == 1 {
        nnull += 1;
    }
    let mut pairs: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::with_capacity(n / 2);
    if nnull > 0 {
        let z = DMatrix::from_columns(&order[..nnull].iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
        let az = z.tr_mul(a) * &z;
        let az = (&az - az.transpose()) * 0.5;
        let (wz, ez) = antisymmetric_modes(&az);
        let cols = &z * wz;
        for (k, e) in ez.into_iter().enumerate() {
            pairs.push((e, cols.column(2 * k).into_owned(), cols.column(2 * k + 1).into_owned()));
        }
    }
    let mut chosen: Vec<DVector<f64>> = pairs.iter().flat_map(|(_, p, q)| [p.clone(), q.clone()]).collect();
    for &i in &order[nnull..] {
        if chosen.len() == n {
            break;
        }
        let mut u = eig.eigenvectors.column(i).into_owned();
        for _ in 0..2 {
            for c in &chosen {
                let d = c.dot(&u);
                u.axpy(-d, c, 1.0);
            }
        }
        let nu = u.norm();
        if nu < 0.5 {
            continue;
        }
        u /= nu;
        let mut v = a * &u;
        for _ in 0..2 {
            for c in &chosen {
                let d = c.dot(&v);
                v.axpy(-d, c, 1.0);
            }
            let d = u.dot(&v);
            v.axpy(-d, &u, 1.0);
        }
        let e = v.norm();
        v /= e;
        let e = v.dot(&(a * &u));
        chosen.push(v.clone());
        chosen.push(u.clone());
        pairs.push((e, v, u));
    }
    assert_eq!(pairs.len(), n / 2, "mode pairing failed");
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut energies = Vec::with_capacity(n / 2);
    for (k, (e, p, q)) in pairs.into_iter().enumerate() {
        w.set_column(2 * k, &p);
        w.set_column(2 * k + 1, &q);
        energies.push(e);
    }
    (w, energies)
}

/// Majorana covariance `Gamma_pq = -(i/4) <[c_p, c_q]>`; a spin-up site has
/// the on-site block `[[0, 1/2], [-1/2, 0]]` and a pure state `Gamma^2 = -1/4`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    /// `M = -2 Gamma`.
    m: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Validates antisymmetry and `|nu| <= 1/2`.
    pub fn from_gamma(gamma: DMatrix<f64>) -> Result<Self> {
        let n = gamma.nrows();
        if gamma.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: gamma.ncols() });
        }
        if n % 2 == 1 {
            return Err(Error::OddDimension(n));
        }
        let dev = (&gamma + gamma.transpose()).amax();
        if dev > 1e-10 {
            return Err(Error::NotAntisymmetric(dev));
        }
        let c = Self { m: gamma * -2.0 };
        let nu = c.max_nu();
        if nu > 0.5 + 1e-9 {
            return Err(Error::InvalidParameter(format!("covariance eigenvalue {nu} exceeds 1/2")));
        }
        Ok(c)
    }

    fn from_m(m: DMatrix<f64>) -> Self {
        Self { m }
    }

    pub fn gamma(&self) -> DMatrix<f64> {
        &self.m * -0.5
    }

    /// `i <c_p c_q>` for `p != q`.
    pub fn majorana_correlation(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn n_sites(&self) -> usize {
        self.m.nrows() / 2
    }

    /// Largest `|nu|` over the eigenvalues `+-i nu` of `Gamma`.
    pub fn max_nu(&self) -> f64 {
        let g = self.gamma();
        let e = SymmetricEigen::new(g.tr_mul(&g));
        e.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.max(0.0).sqrt()))
    }

    /// `max |Gamma^2 + 1/4|`.
    pub fn purity_defect(&self) -> f64 {
        let g = self.gamma();
        let n = g.nrows();
        (&g * &g + DMatrix::identity(n, n) * 0.25).amax()
    }

    /// Expectation of the fermion parity `prod_j Z_j`.
    pub fn parity(&self) -> f64 {
        let n = self.n_sites();
        let pf = log_pfaffian_unchecked(&self.m);
        let s = if n % 2 == 0 { 1.0 } else { -1.0 };
        s * pf.value()
    }
}

/// Bogoliubov vacuum of the modes, i.e. the ground state of the quadratic form.
pub fn ground_covariance(modes: &BdgModes) -> CovarianceMatrix {
    occupied_covariance(modes, &[])
}

/// Covariance with the listed modes occupied.
pub fn occupied_covariance(modes: &BdgModes, occupied: &[usize]) -> CovarianceMatrix {
    let n = modes.energies.len();
    let mut mp = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        let s = if occupied.contains(&k) { 1.0 } else { -1.0 };
        mp[(2 * k, 2 * k + 1)] = s;
        mp[(2 * k + 1, 2 * k)] = -s;
    }
    let w = &modes.transform;
    CovarianceMatrix::from_m(w * mp * w.transpose())
}

/// Lowest state of given parity for the sector form, and its energy.
pub fn sector_ground(p: &ChainParams, sector: Sector) -> Result<(CovarianceMatrix, f64, BdgModes)> {
    let model = jordan_wigner_bdg(p, sector)?;
    let modes = diagonalize_bdg(&model);
    let det = modes.transform.clone().lu().determinant();
    // vacuum parity equals det(W)
    let vac_parity = det.signum();
    let mut e = -0.5 * modes.energies.iter().sum::<f64>();
    let occ: Vec<usize> = if vac_parity == sector.sign() {
        vec![]
    } else {
        e += modes.energies[0];
        vec![0]
    };
    Ok((occupied_covariance(&modes, &occ), e, modes))
}

/// Orthogonal evolution `M(t) = O M O^T`, `O = exp(2Kt)`, in the mode basis.
#[derive(Clone, Debug)]
pub struct Propagator {
    w: DMatrix<f64>,
    energies: Vec<f64>,
}

impl Propagator {
    pub fn new(modes: &BdgModes) -> Self {
        Self { w: modes.transform.clone(), energies: modes.energies.clone() }
    }

    /// State in the mode basis, ready for repeated evolution.
    pub fn to_modes(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.w.tr_mul(m) * &self.w
    }

    /// Evolve a mode-basis correlation back to site basis at time `t`.
    pub fn evolve_modes(&self, mh: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
        let n = self.energies.len();
        let cs: Vec<(f64, f64)> = self.energies.iter().map(|e| ((e * t).cos(), (e * t).sin())).collect();
        let mut x = mh.clone();
        // rows: R_k = [[c, s], [-s, c]]
        for k in 0..n {
            let (c, s) = cs[k];
            for col in 0..2 * n {
                let (p, q) = (x[(2 * k, col)], x[(2 * k + 1, col)]);
                x[(2 * k, col)] = c * p + s * q;
                x[(2 * k + 1, col)] = -s * p + c * q;
            }
        }
        for k in 0..n {
            let (c, s) = cs[k];
            for row in 0..2 * n {
                let (p, q) = (x[(row, 2 * k)], x[(row, 2 * k + 1)]);
                x[(row, 2 * k)] = c * p + s * q;
                x[(row, 2 * k + 1)] = -s * p + c * q;
            }
        }
        let y = &self.w * x;
        let mut out = y * self.w.transpose();
        antisymmetrize(&mut out);
        out
    }

    pub fn evolve(&self, m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
        self.evolve_modes(&self.to_modes(m), t)
    }
}

fn antisymmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)] = 0.0;
        for i in j + 1..n {
            let v = 0.5 * (m[(i, j)] - m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
}

pub fn evolve_covariance(g: &CovarianceMatrix, post: &BdgModel, t: f64) -> Result<CovarianceMatrix> {
    if g.m.nrows() != post.coupling.nrows() {
        return Err(Error::DimensionMismatch { expected: post.coupling.nrows(), got: g.m.nrows() });
    }
    let prop = Propagator::new(&diagonalize_bdg(post));
    Ok(CovarianceMatrix::from_m(prop.evolve(&g.m, t)))
}

/// `<Z_site> = 2 Gamma[2 site, 2 site + 1]`.
pub fn sigma_z_expectation(g: &CovarianceMatrix, site: usize) -> Result<f64> {
    let n = g.n_sites();
    if site >= n {
        return Err(Error::IndexOutOfRange { index: site, len: n });
    }
    Ok(-g.m[(2 * site, 2 * site + 1)])
}

/// Signs `d_p` such that `D M D` is the correlation of `X_site |psi>`
/// (`+1` on the Majoranas of the string `c_0 ... c_{2 site}`).
fn x_string(n: usize, site: usize) -> Vec<f64> {
    (0..2 * n).map(|p| if p <= 2 * site { 1.0 } else { -1.0 }).collect()
}

fn conj_diag(m: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[i] * d[j])
}

fn to_complex(re: &DMatrix<f64>, im: &DMatrix<f64>) -> CMat {
    re.zip_map(im, |r, i| Complex64::new(r, i))
}

/// `log |det m|` from an LU factorization, `-inf` when singular.
fn log_abs_det(m: &DMatrix<f64>) -> f64 {
    let lu = m.clone().lu();
    let u = lu.u();
    (0..m.nrows()).map(|i| u[(i, i)].abs().ln()).sum()
}

/// `<P|A><A|B><B|Q><Q|P>` for pure Gaussian states given by their
/// correlations, as `(phase, log|.|)`.
fn four_loop(n: usize, mp: &DMatrix<f64>, ma: &DMatrix<f64>, mb: &DMatrix<f64>, mq: &DMatrix<f64>) -> Option<(Complex64, f64)> {
    let s1 = mp + mb;
    let s2 = ma + mq;
    let (l1, l2) = (log_abs_det(&s1), log_abs_det(&s2));
    // go around the loop from whichever diagonal pair is better conditioned
    let (s, ld, x1, y1, x2, y2) = if l1 >= l2 {
        (s1, l1, mb, ma, mp, mq)
    } else {
        (s2, l2, mq, mb, ma, mp)
    };
    if !ld.is_finite() {
        return None;
    }
    let si = s.try_inverse()?;
    // K = -i(Y + X) + i(1 + iX) S^{-1} (1 - iX), T = X S^{-1}
    let k = |x: &DMatrix<f64>, y: &DMatrix<f64>| -> CMat {
        let t = x * &si;
        let re = t.transpose() - &t;
        let im = &si + &t * x - (x + y);
        let mut c = to_complex(&re, &im);
        for j in 0..c.ncols() {
            c[(j, j)] = Complex64::new(0.0, 0.0);
        }
        c
    };
    let p1: LogPf<Complex64> = log_pfaffian_unchecked(&k(x1, y1));
    let p2: LogPf<Complex64> = log_pfaffian_unchecked(&k(x2, y2));
    if p1.log_abs == f64::NEG_INFINITY || p2.log_abs == f64::NEG_INFINITY {
        return None;
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let phase = p1.phase * p2.phase * sign;
    let log_abs = p1.log_abs + p2.log_abs + 0.5 * ld - 3.0 * n as f64 * std::f64::consts::LN_2;
    Some((phase, log_abs))
}

/// `log |<a|b>|^2 = log(2^-N |Pf(M_a + M_b)|)`.
fn log_overlap_sq(n: usize, ma: &DMatrix<f64>, mb: &DMatrix<f64>) -> f64 {
    let s = ma + mb;
    log_pfaffian_unchecked(&s).log_abs - n as f64 * std::f64::consts::LN_2
}

/// Pre-quench sector vacua, post-quench modes and the references needed to
/// evaluate cross-sector matrix elements with their phases.
#[derive(Clone, Debug)]
pub struct CrossSectorState {
    n: usize,
    pub relative_phase: f64,
    /// Amplitudes of the even and odd components, `w_e^2 + w_o^2 = 1`.
    pub weights: (f64, f64),
    pub even_state: CovarianceMatrix,
    pub odd_state: CovarianceMatrix,
    pub even_energy: f64,
    pub odd_energy: f64,
    pub post_modes_even: BdgModes,
    pub post_modes_odd: BdgModes,
    prop_even: Propagator,
    prop_odd: Propagator,
    mh_even: DMatrix<f64>,
    mh_odd: DMatrix<f64>,
    ref_even: DMatrix<f64>,
    ref_odd: DMatrix<f64>,
    ref_energy_gap: f64,
}

/// Per-site constants of the cross-sector evaluation.
struct SiteRefs {
    d: Vec<f64>,
    mq: DMatrix<f64>,
    fx0_abs: f64,
    l0: (Complex64, f64),
}

impl CrossSectorState {
    /// Equal-weight superposition of the pre-quench sector ground states.
    pub fn new(q: &QuenchSpec) -> Result<Self> {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::with_weights(q, (r, r))
    }

    /// Superposition `w_e |e> + w_o e^{i phase} |o>`.
    pub fn with_weights(q: &QuenchSpec, weights: (f64, f64)) -> Result<Self> {
        q.validate()?;
        let norm = (weights.0 * weights.0 + weights.1 * weights.1).sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("zero sector weights".into()));
        }
        let weights = (weights.0 / norm, weights.1 / norm);
        let (me, ee, _) = sector_ground(&q.pre, Sector::Even)?;
        let (mo, eo, _) = sector_ground(&q.pre, Sector::Odd)?;
        let (ve, eve, post_even) = sector_ground(&q.post, Sector::Even)?;
        let (vo, evo, post_odd) = sector_ground(&q.post, Sector::Odd)?;
        let prop_even = Propagator::new(&post_even);
        let prop_odd = Propagator::new(&post_odd);
        let mh_even = prop_even.to_modes(&me.m);
        let mh_odd = prop_odd.to_modes(&mo.m);
        Ok(Self {
            n: q.n(),
            relative_phase: q.relative_phase,
            weights,
            even_state: me,
            odd_state: mo,
            even_energy: ee,
            odd_energy: eo,
            post_modes_even: post_even,
            post_modes_odd: post_odd,
            prop_even,
            prop_odd,
            mh_even,
            mh_odd,
            ref_even: ve.m,
            ref_odd: vo.m,
            ref_energy_gap: eve - evo,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn site_refs(&self, site: usize) -> Result<SiteRefs> {
        let n = self.n;
        let d = x_string(n, site);
        let mq = conj_diag(&self.ref_odd, &d);
        let mo_x = conj_diag(&self.odd_state.m, &d);
        let fx0_abs = (0.5 * log_overlap_sq(n, &self.even_state.m, &mo_x)).exp();
        let l0 = four_loop(n, &self.ref_even, &self.even_state.m, &mo_x, &mq)
            .ok_or_else(|| Error::SectorCollapse("reference loop vanishes at t = 0".into()))?;
        if !(fx0_abs > 1e-300) || l0.1 < -700.0 {
            return Err(Error::SectorCollapse("pre-quench sectors have no X overlap".into()));
        }
        Ok(SiteRefs { d, mq, fx0_abs, l0 })
    }

    /// `(<e(t)|X|o(t)>, <e(t)|Y|o(t)>)` and the sector `<Z>` values at `site`.
    fn elements(&self, refs: &SiteRefs, site: usize, t: f64) -> Result<(Complex64, Complex64, f64, f64)> {
        let n = self.n;
        let ma = self.prop_even.evolve_modes(&self.mh_even, t);
        let mo = self.prop_odd.evolve_modes(&self.mh_odd, t);
        let (a, b) = (2 * site, 2 * site + 1);
        let (ze, zo) = (-ma[(a, b)], -mo[(a, b)]);
        let mb = conj_diag(&mo, &refs.d);
        let (ph, la) = four_loop(n, &self.ref_even, &ma, &mb, &refs.mq)
            .ok_or_else(|| Error::SectorCollapse(format!("loop overlap vanishes at t = {t}")))?;
        let ratio = ph / refs.l0.0 * (la - refs.l0.1).exp();
        let fx = Complex64::from_polar(refs.fx0_abs, self.ref_energy_gap * t) * ratio;
        // <Xe|Z|o>/<Xe|o> from the transition correlation of X e(t) and o(t):
        // F_Y = -F_X * [(1 + i M_o) (1 - M_xe M_o)^{-1} (1 + i M_xe)]_{ab}
        let mxe = conj_diag(&ma, &refs.d);
        let x = DMatrix::identity(2 * n, 2 * n) - &mxe * &mo;
        let lu = x.lu();
        let c_re = DVector::from_fn(2 * n, |p, _| if p == b { 1.0 } else { 0.0 });
        let c_im = mxe.column(b).into_owned();
        let y_re = lu
            .solve(&c_re)
            .ok_or_else(|| Error::SectorCollapse(format!("transition matrix singular at t = {t}")))?;
        let y_im = lu
            .solve(&c_im)
            .ok_or_else(|| Error::SectorCollapse(format!("transition matrix singular at t = {t}")))?;
        let mut ry = Complex64::new(0.0, 0.0);
        for p in 0..2 * n {
            let r = if p == a { Complex64::new(1.0, mo[(a, p)]) } else { Complex64::new(0.0, mo[(a, p)]) };
            ry += r * Complex64::new(y_re[p], y_im[p]);
        }
        let fy = -fx * ry;
        Ok((fx, fy, ze, zo))
    }

    /// Bloch vector of `site` at time `t`.
    pub fn bloch(&self, site: usize, t: f64) -> Result<BlochVector> {
        Ok(self.trajectory(site, &[t])?.states()[0])
    }

    /// Bloch trajectory of `site`; time points are evaluated in parallel.
    pub fn trajectory(&self, site: usize, times: &[f64]) -> Result<BlochTrajectory> {
        if site >= self.n {
            return Err(Error::IndexOutOfRange { index: site, len: self.n });
        }
        let (we, wo) = self.weights;
        let cross = we * wo != 0.0;
        let refs = if cross { Some(self.site_refs(site)?) } else { None };
        let rot = Complex64::from_polar(2.0 * we * wo, self.relative_phase);
        let states = times
            .par_iter()
            .map(|&t| -> Result<BlochVector> {
                match &refs {
                    Some(r) => {
                        let (fx, fy, ze, zo) = self.elements(r, site, t)?;
                        Ok(BlochVector::new((rot * fx).re, (rot * fy).re, we * we * ze + wo * wo * zo))
                    }
                    None => {
                        let (a, b) = (2 * site, 2 * site + 1);
                        let ze = -self.prop_even.evolve_modes(&self.mh_even, t)[(a, b)];
                        let zo = -self.prop_odd.evolve_modes(&self.mh_odd, t)[(a, b)];
                        Ok(BlochVector::new(0.0, 0.0, we * we * ze + wo * wo * zo))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        BlochTrajectory::new(times.to_vec(), states)
    }
}

/// `(<X>, <Y>)` of `site` at time `t` in the superposed state.
pub fn sigma_xy_expectation(cs: &CrossSectorState, site: usize, t: f64) -> Result<(f64, f64)> {
    let b = cs.bloch(site, t)?;
    Ok((b.rho_x, b.rho_y))
}

/// Bloch trajectory of one site after the quench, starting from the
/// symmetry-broken pre-quench ground state.
pub fn quench_trajectory(q: &QuenchSpec, site: usize, times: &[f64]) -> Result<BlochTrajectory> {
    CrossSectorState::new(q)?.trajectory(site, times)
}

/// Single-particle energies of a translation-invariant periodic chain from its
/// 2x2 momentum blocks, at the momenta allowed in `sector`.
pub fn momentum_energies(p: &ChainParams, sector: Sector) -> Vec<f64> {
    let n = p.n as f64;
    let shift = match sector {
        Sector::Even => 0.5,
        Sector::Odd => 0.0,
    };
    (0..p.n)
        .map(|m| dispersion(p, 2.0 * std::f64::consts::PI * (m as f64 + shift) / n))
        .collect()
}

/// Positive eigenvalue of `i A(k)` for the infinite chain, `A = 2K`.
pub fn dispersion(p: &ChainParams, k: f64) -> f64 {
    // A(k) = sum_r A_{0,r} e^{ikr} over 2x2 cell blocks in (a, b) order
    let e = |r: f64| Complex64::from_polar(1.0, k * r);
    let h = 2.0 * p.h;
    let (gx, gy, d) = (2.0 * p.gamma_x, 2.0 * p.gamma_y, 2.0 * p.delta);
    // A(k) = [[0, ab], [-conj(ab), 0]]
    let ab = Complex64::new(h, 0.0) - gy * e(1.0) - gx * e(-1.0) - d * e(-2.0);
    ab.norm()
}

/// Largest group velocity `max_k |d e/dk|` of the infinite chain.
pub fn max_group_velocity(p: &ChainParams) -> f64 {
    let m = 4096;
    let dk = 2.0 * std::f64::consts::PI / m as f64;
    (0..m)
        .map(|i| {
            let k = i as f64 * dk;
            ((dispersion(p, k + 0.5 * dk) - dispersion(p, k - 0.5 * dk)) / dk).abs()
        })
        .fold(0.0, f64::max)
}

/// Time before quasiparticle pairs that reached `site` through the boundary
/// (or around the ring) can correlate there: `N / (2 v)` on a ring and
/// `d / v` on an open chain, `d` being the distance to the nearer edge.
pub fn boundary_free_time(p: &ChainParams, site: usize) -> f64 {
    let v = max_group_velocity(p);
    let d = match p.boundary {
        Boundary::Periodic => 0.5 * p.n as f64,
        Boundary::Open => site.min(p.n - 1 - site) as f64,
    };
    if v > 0.0 { d / v } else { f64::INFINITY }
}
