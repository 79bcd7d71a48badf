//! Jost solutions, the coefficients `M±`, the scattering matrix and bound
//! states for `-ψ'' + Qψ = k²ψ` with a self-adjoint vertex at `x = 0`.

use std::cell::Cell;

use rayon::prelude::*;

use crate::bc::BoundaryCondition;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, I};
use crate::numerics::ode::{Dop853, System, Tolerances};
use crate::potential::MatrixPotential;

pub const SINGULAR_COND: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Boundary traces `f(0, k)`, `∂ₓf(0, k)` of one Jost solution.
#[derive(Debug, Clone)]
pub struct JostTrace {
    pub k: C64,
    pub sign: Sign,
    pub f: CMat,
    pub fx: CMat,
}

#[derive(Debug, Clone)]
pub struct JostFunctions {
    pub k: C64,
    pub f_plus: CMat,
    pub fx_plus: CMat,
    pub f_minus: CMat,
    pub fx_minus: CMat,
}

impl JostFunctions {
    pub fn free(n: usize, k: C64) -> Self {
        Self {
            k,
            f_plus: linalg::eye(n),
            fx_plus: linalg::eye(n) * (I * k),
            f_minus: linalg::eye(n),
            fx_minus: linalg::eye(n) * (-I * k),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MCoefficients {
    pub k: f64,
    pub m_plus: CMat,
    pub m_minus: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundState {
    pub kappa: f64,
    pub c2: CMat,
    pub order: u32,
}

#[derive(Debug, Clone)]
pub struct ScatteringData {
    pub n: usize,
    pub kgrid: Vec<f64>,
    pub s: Vec<CMat>,
    pub u_hat: CMat,
    pub bound_states: Vec<BoundState>,
}

impl ScatteringData {
    pub fn max_unitarity_defect(&self) -> f64 {
        self.s.iter().map(linalg::unitarity_defect).fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        self.s.iter().all(|m| linalg::off_diagonal_max(m) == 0.0)
            && linalg::off_diagonal_max(&self.u_hat) == 0.0
            && self.bound_states.iter().all(|b| linalg::off_diagonal_max(&b.c2) == 0.0)
    }

    /// Scalar data of channel `j`, taken from the diagonal entries.
    pub fn channel(&self, j: usize) -> ScatteringData {
        let one = |m: &CMat| CMat::from_element(1, 1, m[(j, j)]);
        ScatteringData {
            n: 1,
            kgrid: self.kgrid.clone(),
            s: self.s.iter().map(one).collect(),
            u_hat: one(&self.u_hat),
            bound_states: self
                .bound_states
                .iter()
                .filter(|b| b.c2[(j, j)].re > 0.0)
                .map(|b| BoundState { kappa: b.kappa, c2: one(&b.c2), order: b.order })
                .collect(),
        }
    }
}

/// Real wavenumber grid, symmetric about zero and never containing it.
#[derive(Debug, Clone, PartialEq)]
pub struct KGrid {
    pub k: Vec<f64>,
}

impl KGrid {
    /// Midpoint grid `k = (j + 1/2)Δk`, `j = -m..m-1`, with `m = round(k_max/Δk)`.
    pub fn uniform(k_max: f64, dk: f64) -> Result<Self> {
        if !(k_max > 0.0) || !(dk > 0.0) || dk > k_max {
            return Err(Error::BadParams(format!("invalid k grid: k_max = {k_max}, dk = {dk}")));
        }
        let m = (k_max / dk).round() as i64;
        Ok(Self { k: (-m..m).map(|j| (j as f64 + 0.5) * dk).collect() })
    }

    /// `count` points (even) spread uniformly over `[-k_max, k_max]`, offset
    /// so zero is skipped.
    pub fn with_count(k_max: f64, count: usize) -> Result<Self> {
        if count < 2 || count % 2 != 0 {
            return Err(Error::BadParams(format!("k grid needs an even count, got {count}")));
        }
        Self::uniform(k_max, 2.0 * k_max / count as f64)
    }

    pub fn from_values(k: Vec<f64>) -> Result<Self> {
        check_symmetric(&k)?;
        Ok(Self { k })
    }

    pub fn dk(&self) -> Option<f64> {
        let h = self.k.get(1)? - self.k[0];
        self.k.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h).then_some(h)
    }
}

fn check_symmetric(k: &[f64]) -> Result<()> {
    if k.is_empty() {
        return Err(Error::BadParams("empty k grid".into()));
    }
    if k.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::BadParams("k grid must be strictly increasing".into()));
    }
    if k.iter().any(|&v| v == 0.0) {
        return Err(Error::BadParams("k grid must exclude 0".into()));
    }
    let m = k.len();
    for i in 0..m {
        if (k[i] + k[m - 1 - i]).abs() > 1e-12 * k[i].abs().max(1.0) {
            return Err(Error::BadParams("k grid must be symmetric about 0".into()));
        }
    }
    Ok(())
}

/// `ψ'' = (Q(x) - k²)ψ` for an `n×n` matrix `ψ`, optionally carrying the
/// running Gram integral of `ψᴴψ`.
pub(crate) struct MatrixSchrodinger<'a> {
    q: &'a MatrixPotential,
    k2: C64,
    n: usize,
    gram: bool,
    cell: Cell<Option<usize>>,
    qbuf: std::cell::RefCell<Vec<C64>>,
}

impl<'a> MatrixSchrodinger<'a> {
    pub(crate) fn new(q: &'a MatrixPotential, k2: C64, gram: bool) -> Self {
        let n = q.n;
        Self { q, k2, n, gram, cell: Cell::new(None), qbuf: std::cell::RefCell::new(vec![C64::new(0.0, 0.0); n * n]) }
    }
}

impl System for MatrixSchrodinger<'_> {
    fn dim(&self) -> usize {
        let nn = self.n * self.n;
        if self.gram {
            3 * nn
        } else {
            2 * nn
        }
    }

    fn rhs(&self, x: f64, y: &[C64], dy: &mut [C64]) {
        let n = self.n;
        let nn = n * n;
        let mut qv = self.qbuf.borrow_mut();
        match self.cell.get() {
            Some(i) => self.q.eval_cell_into(i, x, &mut qv),
            None => qv.fill(C64::new(0.0, 0.0)),
        }
        let (psi, rest) = y.split_at(nn);
        let dpsi = &rest[..nn];
        dy[..nn].copy_from_slice(dpsi);
        for i in 0..n {
            for j in 0..n {
                let mut acc = -self.k2 * psi[i * n + j];
                for l in 0..n {
                    acc += qv[i * n + l] * psi[l * n + j];
                }
                dy[nn + i * n + j] = acc;
            }
        }
        if self.gram {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for l in 0..n {
                        acc += psi[l * n + i].conj() * psi[l * n + j];
                    }
                    dy[2 * nn + i * n + j] = acc;
                }
            }
        }
    }
}

/// Integrate the matrix equation from `from` to `to`, stopping at every grid
/// node on the way so the interpolated potential is smooth inside each step
/// sequence. States at the (monotone) `record` points are returned.
pub(crate) fn propagate(
    sys: &MatrixSchrodinger<'_>,
    tol: Tolerances,
    y: &mut [C64],
    from: f64,
    to: f64,
    record: &[f64],
) -> Result<Vec<Vec<C64>>> {
    let q = sys.q;
    let x_max = q.x_max();
    let dir = if to >= from { 1.0 } else { -1.0 };
    let mut breaks: Vec<f64> = q.x.iter().copied().filter(|&t| (t - from) * dir > 0.0 && (to - t) * dir > 0.0).collect();
    breaks.extend(record.iter().copied().filter(|&t| (t - from) * dir > 0.0 && (to - t) * dir > 0.0));
    breaks.push(to);
    if dir > 0.0 {
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    } else {
        breaks.sort_by(|a, b| b.partial_cmp(a).unwrap());
    }
    breaks.dedup();
    let mut out = Vec::with_capacity(record.len());
    let mut rec = record.iter().peekable();
    while let Some(&&r) = rec.peek() {
        if r == from {
            out.push(y.to_vec());
            rec.next();
        } else {
            break;
        }
    }
    let mut ode = Dop853::new(y.len(), tol);
    let mut x = from;
    for &b in &breaks {
        let mid = 0.5 * (x + b);
        sys.cell.set(if mid >= 0.0 && mid <= x_max { Some(q.cell(mid)) } else { None });
        ode.advance(sys, x, b, y)?;
        x = b;
        while let Some(&&r) = rec.peek() {
            if r == b {
                out.push(y.to_vec());
                rec.next();
            } else {
                break;
            }
        }
    }
    Ok(out)
}

fn split_state(n: usize, y: &[C64]) -> (CMat, CMat) {
    let nn = n * n;
    (CMat::from_row_slice(n, n, &y[..nn]), CMat::from_row_slice(n, n, &y[nn..2 * nn]))
}

fn initial_state(n: usize, k: C64, extra: usize) -> Vec<C64> {
    let nn = n * n;
    let mut y = vec![C64::new(0.0, 0.0); 2 * nn + extra];
    for i in 0..n {
        y[i * n + i] = c(1.0, 0.0);
        y[nn + i * n + i] = I * k;
    }
    y
}

/// `f₊(·, k)` integrated from `x_max` with the growth factor `e^{ik x_max}`
/// left out. Returned traces are at `stops` (descending) and must be
/// multiplied by that factor to obtain the Jost solution.
fn scaled_plus(q: &MatrixPotential, k: C64, stops: &[f64], tol: Tolerances) -> Result<Vec<(CMat, CMat)>> {
    let sys = MatrixSchrodinger::new(q, k * k, false);
    let mut y = initial_state(q.n, k, 0);
    let states = propagate(&sys, tol, &mut y, q.x_max(), 0.0, stops)?;
    Ok(states.iter().map(|s| split_state(q.n, s)).collect())
}

/// Jost solution and derivative at each of `stops` (descending, inside
/// `[0, x_max]`).
pub fn jost_profile(q: &MatrixPotential, k: C64, sign: Sign, stops: &[f64], tol: Tolerances) -> Result<Vec<(CMat, CMat)>> {
    let kk = match sign {
        Sign::Plus => k,
        Sign::Minus => -k,
    };
    let phase = (I * kk * q.x_max()).exp();
    Ok(scaled_plus(q, kk, stops, tol)?.into_iter().map(|(f, fx)| (f * phase, fx * phase)).collect())
}

/// `f±(0, k)` and `∂ₓf±(0, k)`, with `f₋(x, k) = f₊(x, -k)`.
pub fn compute_jost(q: &MatrixPotential, k: C64, sign: Sign) -> Result<JostTrace> {
    compute_jost_with(q, k, sign, Tolerances::default())
}

pub fn compute_jost_with(q: &MatrixPotential, k: C64, sign: Sign, tol: Tolerances) -> Result<JostTrace> {
    if q.is_zero() {
        let s = if sign == Sign::Plus { 1.0 } else { -1.0 };
        return Ok(JostTrace { k, sign, f: linalg::eye(q.n), fx: linalg::eye(q.n) * (I * k * s) });
    }
    let (f, fx) = jost_profile(q, k, sign, &[0.0], tol)?.pop().expect("trace at 0");
    Ok(JostTrace { k, sign, f, fx })
}

pub fn jost_functions(q: &MatrixPotential, k: C64) -> Result<JostFunctions> {
    let p = compute_jost(q, k, Sign::Plus)?;
    let m = compute_jost(q, k, Sign::Minus)?;
    Ok(JostFunctions { k, f_plus: p.f, fx_plus: p.fx, f_minus: m.f, fx_minus: m.fx })
}

/// `M± = ±(1/2ik)[F±† B - F±ₓ† A]` at real `k`, where on the real axis the
/// involution `Y†(k) = Y(k̄)ᴴ` reduces to the conjugate transpose.
pub fn m_coefficients(jf: &JostFunctions, bc: &BoundaryCondition) -> Result<MCoefficients> {
    if jf.k.norm() == 0.0 {
        return Err(Error::ZeroWavenumber);
    }
    if jf.k.im.abs() > 1e-14 * jf.k.re.abs().max(1.0) {
        return Err(Error::BadParams(format!("M coefficients are evaluated on the real axis, got k = {}", jf.k)));
    }
    let k = jf.k.re;
    let pre = C64::new(1.0, 0.0) / (I * (2.0 * k));
    let m_plus = (jf.f_plus.adjoint() * &bc.b - jf.fx_plus.adjoint() * &bc.a) * pre;
    let m_minus = (jf.f_minus.adjoint() * &bc.b - jf.fx_minus.adjoint() * &bc.a) * (-pre);
    Ok(MCoefficients { k, m_plus, m_minus })
}

/// `S = M₊ M₋⁻¹`.
pub fn scattering_matrix(mc: &MCoefficients) -> Result<CMat> {
    let cond = linalg::condition_number(&mc.m_minus);
    if !(cond <= SINGULAR_COND) {
        return Err(Error::SingularCoefficient { k: mc.k, cond });
    }
    let inv = linalg::inverse(&mc.m_minus).ok_or(Error::SingularCoefficient { k: mc.k, cond })?;
    Ok(&mc.m_plus * inv)
}

#[derive(Debug, Clone, Copy)]
pub struct BoundStateOptions {
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub points_per_unit: f64,
    pub refine_tol: f64,
    pub accept: f64,
    pub virtual_level_threshold: f64,
    pub tol: Tolerances,
}

impl BoundStateOptions {
    pub fn new(kappa_max: f64) -> Self {
        Self {
            kappa_min: 1e-3,
            kappa_max,
            points_per_unit: 400.0,
            refine_tol: 1e-10,
            accept: 1e-6,
            virtual_level_threshold: 1e-2,
            tol: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundStateSearch {
    pub states: Vec<BoundState>,
    /// Set when the boundary determinant is already small at `kappa_min`.
    pub virtual_level: Option<f64>,
}

/// Scaled smallest singular value of `Bᴴ F₊(iκ) - Aᴴ F₊ₓ(iκ)`, which is
/// proportional to `M₋(iκ)ᴴ`. Also returns the matrix and its scale.
fn boundary_determinant(q: &MatrixPotential, bc: &BoundaryCondition, kappa: f64, tol: Tolerances) -> Result<(f64, CMat, f64)> {
    let k = c(0.0, kappa);
    let (f, fx) = if q.is_zero() {
        (linalg::eye(q.n), linalg::eye(q.n) * (I * k))
    } else {
        scaled_plus(q, k, &[0.0], tol)?.pop().expect("trace")
    };
    let d = bc.b.adjoint() * &f - bc.a.adjoint() * &fx;
    let sv = linalg::singular_values(&d);
    let fnorm = linalg::norm(&f).max(linalg::norm(&fx) / (1.0 + kappa));
    let den = (linalg::norm(&bc.a) * (1.0 + kappa) + linalg::norm(&bc.b)) * fnorm;
    Ok((sv.last().copied().unwrap_or(0.0) / den, d, den))
}

fn golden_min<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// `∫₀^∞ f₊(x, iκ)ᴴ f₊(x, iκ) dx`, integrated alongside the solution and
/// closed with the exact tail beyond `x_max`.
fn jost_gram(q: &MatrixPotential, kappa: f64, tol: Tolerances) -> Result<(CMat, CMat)> {
    if q.is_zero() {
        return Ok((linalg::eye(q.n), linalg::eye(q.n) * c(0.5 / kappa, 0.0)));
    }
    let n = q.n;
    let nn = n * n;
    let k = c(0.0, kappa);
    let x_max = q.x_max();
    let sys = MatrixSchrodinger::new(q, k * k, true);
    let mut y = initial_state(n, k, nn);
    propagate(&sys, tol, &mut y, x_max, 0.0, &[])?;
    let (f, _) = split_state(n, &y);
    let scale = (-kappa * x_max).exp();
    let mut gram = -CMat::from_row_slice(n, n, &y[2 * nn..]) + linalg::eye(n) * c(0.5 / kappa, 0.0);
    gram *= c(scale * scale, 0.0);
    Ok((f * c(scale, 0.0), linalg::hermitise(&gram)))
}

/// Search `(kappa_min, kappa_max]` for `iκ` where the boundary condition
/// admits an `L²` solution, and assemble `C² = V (Vᴴ N V)⁻¹ Vᴴ` from the
/// null vectors `V` and the Gram matrix `N` of `f₊(·, iκ)`.
pub fn bound_states(q: &MatrixPotential, bc: &BoundaryCondition, opts: &BoundStateOptions) -> Result<BoundStateSearch> {
    if !(opts.kappa_max > opts.kappa_min) || !(opts.kappa_min > 0.0) {
        return Err(Error::BadParams(format!("bound-state window ({}, {}] is empty", opts.kappa_min, opts.kappa_max)));
    }
    let span = opts.kappa_max - opts.kappa_min;
    let count = ((span * opts.points_per_unit).ceil() as usize).max(4);
    let kappas: Vec<f64> = (0..=count).map(|i| opts.kappa_min + span * i as f64 / count as f64).collect();
    let values: Vec<f64> = kappas
        .par_iter()
        .map(|&kp| boundary_determinant(q, bc, kp, opts.tol).map(|v| v.0))
        .collect::<Result<_>>()?;
    let virtual_level = (values[0] < opts.virtual_level_threshold).then_some(values[0]);
    let mut states: Vec<BoundState> = Vec::new();
    for i in 1..count {
        if !(values[i] < values[i - 1] && values[i] <= values[i + 1]) {
            continue;
        }
        let (kappa, smin) = golden_min(|kp| boundary_determinant(q, bc, kp, opts.tol).map(|v| v.0), kappas[i - 1], kappas[i + 1], opts.refine_tol)?;
        if smin >= opts.accept {
            continue;
        }
        if states.iter().any(|s| (s.kappa - kappa).abs() < 1e-8) {
            continue;
        }
        let (_, d, den) = boundary_determinant(q, bc, kappa, opts.tol)?;
        let (_, gram) = jost_gram(q, kappa, opts.tol)?;
        let floor = linalg::singular_values(&d).last().copied().unwrap_or(0.0);
        let v = linalg::null_space(&d, (1e-4 * den).max(floor * (1.0 + 1e-9)));
        let inner = v.adjoint() * &gram * &v;
        let inner_inv = linalg::inverse(&inner).ok_or(Error::SingularCoefficient { k: kappa, cond: f64::INFINITY })?;
        let c2 = linalg::hermitise(&(&v * inner_inv * v.adjoint()));
        states.push(BoundState { kappa, c2, order: 1 });
    }
    states.sort_by(|a, b| b.kappa.partial_cmp(&a.kappa).unwrap());
    Ok(BoundStateSearch { states, virtual_level })
}

#[derive(Debug, Clone)]
pub struct ForwardOptions {
    pub kappa_max: f64,
    pub bound: Option<BoundStateOptions>,
    pub tol: Tolerances,
}

impl ForwardOptions {
    pub fn new(kappa_max: f64) -> Self {
        Self { kappa_max, bound: None, tol: Tolerances::default() }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub data: ScatteringData,
    pub virtual_level: Option<f64>,
}

/// `F₊(k)` and `F₊ₓ(k)` at every node, in parallel.
pub fn jost_on_grid(q: &MatrixPotential, k: &[f64], tol: Tolerances) -> Result<Vec<(CMat, CMat)>> {
    k.par_iter()
        .map(|&kv| compute_jost_with(q, c(kv, 0.0), Sign::Plus, tol).map(|t| (t.f, t.fx)))
        .collect()
}

/// `S(k)` alone on a symmetric grid.
pub fn scattering_on_grid(q: &MatrixPotential, bc: &BoundaryCondition, kgrid: &KGrid, tol: Tolerances) -> Result<Vec<CMat>> {
    if q.n != bc.n {
        return Err(Error::ShapeMismatch { expected: format!("n = {}", bc.n), got: format!("potential n = {}", q.n) });
    }
    check_symmetric(&kgrid.k)?;
    let traces = jost_on_grid(q, &kgrid.k, tol)?;
    let m = kgrid.k.len();
    (0..m)
        .into_par_iter()
        .map(|i| {
            let (fp, fxp) = &traces[i];
            let (fm, fxm) = &traces[m - 1 - i];
            let jf = JostFunctions { k: c(kgrid.k[i], 0.0), f_plus: fp.clone(), fx_plus: fxp.clone(), f_minus: fm.clone(), fx_minus: fxm.clone() };
            scattering_matrix(&m_coefficients(&jf, bc)?)
        })
        .collect()
}

/// `S(k)` on a symmetric grid, `Û`, and the bound states.
pub fn scattering_pipeline(q: &MatrixPotential, bc: &BoundaryCondition, kgrid: &KGrid, opts: &ForwardOptions) -> Result<ForwardResult> {
    let s = scattering_on_grid(q, bc, kgrid, opts.tol)?;
    let bopts = opts.bound.unwrap_or_else(|| {
        let mut b = BoundStateOptions::new(opts.kappa_max);
        b.tol = opts.tol;
        b
    });
    let search = bound_states(q, bc, &bopts)?;
    Ok(ForwardResult {
        data: ScatteringData { n: q.n, kgrid: kgrid.k.clone(), s, u_hat: bc.u_hat.clone(), bound_states: search.states },
        virtual_level: search.virtual_level,
    })
}

/// `S(k)` at a single real wavenumber.
pub fn scattering_at(q: &MatrixPotential, bc: &BoundaryCondition, k: f64) -> Result<CMat> {
    let jf = jost_functions(q, c(k, 0.0))?;
    scattering_matrix(&m_coefficients(&jf, bc)?)
}

/// A default upper end for the bound-state scan. Every eigenvalue satisfies
/// `-κ² >= -(‖H‖² + sup ‖Q(x)‖)` with `H` the Robin part of the boundary
/// condition and `‖·‖` the operator norm; a margin is added on top.
pub fn default_kappa_max(q: &MatrixPotential, bc: &BoundaryCondition) -> f64 {
    let top = |m: &CMat| linalg::singular_values(m).first().copied().unwrap_or(0.0);
    let q_sup = q.q.iter().map(top).fold(0.0, f64::max);
    let h = top(&bc.h);
    (h * h + q_sup).sqrt() * 1.05 + 0.5
}
