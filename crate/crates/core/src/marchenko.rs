//! Marchenko inversion: the kernel `G(t)`, the transformation kernel
//! `K(x, y)` solving
//!
//! ```text
//! K(x,y) + G(x+y) + ∫ₓ^∞ K(x,t) G(t+y) dt = 0,   y > x,
//! ```
//!
//! and recovery of `Q = -2 d/dx K(x,x)` and of the vertex unitary `U`.
//!
//! `G` lives on a fine uniform grid of step `dt`; the quadrature nodes in `y`
//! and the recovery grid in `x` are integer multiples of it, so every
//! argument `x + y` lands exactly on a stored sample.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bc;
use crate::error::{Error, Result};
use crate::forward::{JostFunctions, ScatteringData};
use crate::linalg::{self, c, CMat, C64, I};
use crate::numerics::fd;
use crate::numerics::quadrature::{gregory_weights, GREGORY_ORDER};
use crate::potential::MatrixPotential;
use crate::spectral::{fourier_sum, k_weights, TailModel};

#[derive(Debug, Clone)]
pub struct MarchenkoConfig {
    /// Right end of the `y` window.
    pub t_max: f64,
    /// Step of the stored `G` samples.
    pub dt: f64,
    /// Quadrature step in `y` is `y_stride · dt`.
    pub y_stride: usize,
    /// Recovery grid step in `x` is `x_stride · dt`.
    pub x_stride: usize,
    /// Potential is recovered on `[0, x_end]`.
    pub x_end: f64,
    pub order: usize,
    pub tail_terms: usize,
    pub tail_alpha: f64,
    /// The tail model is fitted on `|k| >= tail_from · k_max`.
    pub tail_from: f64,
    /// Width of the Gaussian smoothing applied before the fit, relative
    /// to `k_max`.
    pub tail_smoothing: f64,
    /// The remainder after the tail model is rolled off by a raised cosine
    /// on `taper_from · k_max <= |k| <= k_max`; 1 disables it.
    pub taper_from: f64,
    /// Bound on `‖S - Û‖` at the grid ends after tail-model subtraction.
    pub tail_bound: f64,
    pub cond_limit: f64,
    /// Wavenumbers used for the boundary-condition recovery.
    pub u_window: (f64, f64),
    pub u_nodes: usize,
    /// Solve diagonal data as independent scalar problems.
    pub split_diagonal: bool,
    /// When false the boundary unitary is not recovered and `Û` of the
    /// data is reported back.
    pub recover_u: bool,
}

impl MarchenkoConfig {
    /// Defaults for data generated by a potential supported on `[0, support]`.
    pub fn for_support(support: f64) -> Self {
        let dt = 0.005;
        let y_stride = 10;
        let x_stride = 5;
        let h = y_stride as f64 * dt;
        let t_max = ((2.2 * support) / h).ceil() * h;
        Self {
            t_max,
            dt,
            y_stride,
            x_stride,
            x_end: support,
            order: GREGORY_ORDER,
            tail_terms: 8,
            tail_alpha: 1.0,
            tail_from: 0.4,
            tail_smoothing: 0.025,
            taper_from: 0.5,
            tail_bound: 1e-3,
            cond_limit: 1e12,
            u_window: (0.5, 3.0),
            u_nodes: 6,
            split_diagonal: true,
            recover_u: true,
        }
    }

    pub fn h_y(&self) -> f64 {
        self.y_stride as f64 * self.dt
    }

    pub fn h_x(&self) -> f64 {
        self.x_stride as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.y_stride == 0 || self.x_stride == 0 {
            return Err(Error::BadParams("dt and strides must be positive".into()));
        }
        if !(self.t_max > 0.0) || !(self.x_end >= 0.0) || self.x_end > self.t_max {
            return Err(Error::BadParams(format!("need 0 <= x_end <= t_max, got x_end = {}, t_max = {}", self.x_end, self.t_max)));
        }
        if !(self.tail_from > 0.0 && self.tail_from < 1.0) || !(self.taper_from > 0.0 && self.taper_from <= 1.0) || !(self.tail_smoothing >= 0.0) {
            return Err(Error::BadParams("tail_from must lie in (0, 1), taper_from in (0, 1], tail_smoothing >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GDiagnostics {
    /// `max ‖S - Û - tail‖` at the two grid ends.
    pub tail_residual: f64,
    /// `max ‖S - Û‖` at the two grid ends before the tail model.
    pub raw_tail: f64,
    pub hermiticity: f64,
    /// `‖G‖` at the last stored sample.
    pub end_norm: f64,
}

/// `G(t_i)`, `t_i = i · dt`.
#[derive(Debug, Clone)]
pub struct GKernel {
    pub n: usize,
    pub dt: f64,
    pub g: Vec<CMat>,
    pub diagnostics: GDiagnostics,
}

impl GKernel {
    pub fn from_fn<F: Fn(f64) -> CMat>(n: usize, dt: f64, t_end: f64, f: F) -> Self {
        let count = (t_end / dt).round() as usize + 1;
        let g: Vec<CMat> = (0..count).map(|i| f(i as f64 * dt)).collect();
        let diagnostics = GDiagnostics {
            hermiticity: g.iter().map(linalg::hermiticity_defect).fold(0.0, f64::max),
            end_norm: linalg::norm(g.last().unwrap()),
            ..Default::default()
        };
        Self { n, dt, g, diagnostics }
    }

    pub fn t_end(&self) -> f64 {
        (self.g.len() - 1) as f64 * self.dt
    }

    pub fn is_diagonal(&self) -> bool {
        self.g.iter().all(|m| linalg::off_diagonal_max(m) == 0.0)
    }

    pub fn channel(&self, j: usize) -> GKernel {
        GKernel {
            n: 1,
            dt: self.dt,
            g: self.g.iter().map(|m| CMat::from_element(1, 1, m[(j, j)])).collect(),
            diagnostics: self.diagnostics.clone(),
        }
    }
}

/// `G(t) = Σ C² e^{-κt} + (1/2π) ∫ (S(k) - Û) e^{ikt} dk` sampled on
/// `[0, t_end]`. The part of `S - Û` captured by the tail model has zero
/// transform for `t > 0`, so only the remainder is summed.
pub fn build_g(data: &ScatteringData, dt: f64, t_end: f64, cfg: &MarchenkoConfig) -> Result<GKernel> {
    let k = &data.kgrid;
    if k.is_empty() || data.s.len() != k.len() {
        return Err(Error::ShapeMismatch { expected: format!("{} samples", k.len()), got: format!("{}", data.s.len()) });
    }
    let n = data.n;
    let d: Vec<CMat> = data.s.iter().map(|s| s - &data.u_hat).collect();
    let k_max = k.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let model = TailModel::fit_smoothed(k, &d, cfg.tail_from * k_max, cfg.tail_terms, cfg.tail_alpha, cfg.tail_smoothing * k_max)?;
    let r: Vec<CMat> = k.iter().zip(&d).map(|(&kv, dv)| dv - model.eval(c(kv, 0.0), (n, n))).collect();
    let last = k.len() - 1;
    let tail_residual = linalg::norm(&r[0]).max(linalg::norm(&r[last]));
    let raw_tail = linalg::norm(&d[0]).max(linalg::norm(&d[last]));
    if tail_residual > cfg.tail_bound {
        return Err(Error::TailTooLarge { norm: tail_residual, bound: cfg.tail_bound });
    }
    let count = (t_end / dt).round() as usize + 1;
    let t: Vec<f64> = (0..count).map(|i| i as f64 * dt).collect();
    let mut w = k_weights(k);
    let eta0 = cfg.taper_from;
    if eta0 < 1.0 {
        for (wi, kv) in w.iter_mut().zip(k) {
            let eta = kv.abs() / k_max;
            if eta > eta0 {
                *wi *= 0.5 * (1.0 + (PI * (eta - eta0) / (1.0 - eta0)).cos());
            }
        }
    }
    let sums = fourier_sum(k, &w, &r, &t);
    let g: Vec<CMat> = t
        .iter()
        .zip(sums)
        .map(|(&tv, s)| {
            let mut m = CMat::from_row_slice(n, n, &s);
            for b in &data.bound_states {
                m += &b.c2 * c((-b.kappa * tv).exp(), 0.0);
            }
            m
        })
        .collect();
    let diagnostics = GDiagnostics {
        tail_residual,
        raw_tail,
        hermiticity: g.iter().map(linalg::hermiticity_defect).fold(0.0, f64::max),
        end_norm: linalg::norm(g.last().unwrap()),
    };
    Ok(GKernel { n, dt, g, diagnostics })
}

/// `K(x, ·)` at the Nyström nodes `y_j = x + j·h_y`.
#[derive(Debug, Clone)]
pub struct KernelRow {
    pub x: f64,
    /// Index of `x` on the `G` grid.
    pub ix: usize,
    pub stride: usize,
    pub weights: Vec<f64>,
    pub k: Vec<CMat>,
    /// Max residual of the discretised equation at the nodes.
    pub residual: f64,
    /// Ratio of the largest to smallest LU pivot modulus.
    pub pivot_ratio: f64,
}

impl KernelRow {
    /// `K(x, s)` for `s = p · dt` by Nyström interpolation, valid for any
    /// `p` with `x + s >= 0`, including `s < x`.
    pub fn at(&self, g: &GKernel, p: usize) -> CMat {
        let mut acc = -&g.g[self.ix + p];
        for (j, kj) in self.k.iter().enumerate() {
            let idx = self.ix + j * self.stride + p;
            if idx < g.g.len() {
                acc -= kj * &g.g[idx] * c(self.weights[j], 0.0);
            }
        }
        acc
    }
}

/// Solve the discretised equation at `x = ix · dt` on `y ∈ [x, x + m·h_y]`
/// with `m = ceil((t_max - x)/h_y)`.
pub fn solve_marchenko(g: &GKernel, ix: usize, cfg: &MarchenkoConfig) -> Result<KernelRow> {
    let n = g.n;
    let x = ix as f64 * g.dt;
    let sy = cfg.y_stride;
    let h = cfg.h_y();
    let m = (((cfg.t_max - x) / h) - 1e-9).ceil().max(0.0) as usize;
    let count = m + 1;
    if 2 * ix + 2 * m * sy >= g.g.len() {
        return Err(Error::BadParams(format!("G grid ends at {} but the solve at x = {x} needs {}", g.t_end(), 2.0 * x + 2.0 * m as f64 * h)));
    }
    let w = gregory_weights(count, h, cfg.order);
    let size = count * n;
    let mut a = DMatrix::<C64>::identity(size, size);
    let mut rhs = DMatrix::<C64>::zeros(size, n);
    for i in 0..count {
        for j in 0..count {
            let gm = &g.g[2 * ix + (i + j) * sy];
            for p in 0..n {
                for q in 0..n {
                    a[(i * n + p, j * n + q)] += gm[(q, p)] * w[j];
                }
            }
        }
        let gm = &g.g[2 * ix + i * sy];
        for p in 0..n {
            for q in 0..n {
                rhs[(i * n + p, q)] = -gm[(q, p)];
            }
        }
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let pivots: Vec<f64> = (0..size).map(|i| u[(i, i)].norm()).collect();
    let pmax = pivots.iter().cloned().fold(0.0, f64::max);
    let pmin = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    let pivot_ratio = if pmin > 0.0 { pmax / pmin } else { f64::INFINITY };
    if !(pivot_ratio <= cfg.cond_limit) {
        return Err(Error::IllConditioned { x, cond: pivot_ratio });
    }
    let sol = lu.solve(&rhs).ok_or(Error::IllConditioned { x, cond: f64::INFINITY })?;
    let resid = &a * &sol - &rhs;
    let residual = resid.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let k = (0..count).map(|j| CMat::from_fn(n, n, |r, col| sol[(j * n + col, r)])).collect();
    Ok(KernelRow { x, ix, stride: sy, weights: w, k, residual, pivot_ratio })
}

/// Condition number of the Nyström matrix at `x = ix · dt` (dense SVD).
pub fn nystrom_condition(g: &GKernel, ix: usize, cfg: &MarchenkoConfig) -> f64 {
    let n = g.n;
    let sy = cfg.y_stride;
    let h = cfg.h_y();
    let x = ix as f64 * g.dt;
    let m = (((cfg.t_max - x) / h) - 1e-9).ceil().max(0.0) as usize;
    let count = m + 1;
    let w = gregory_weights(count, h, cfg.order);
    let mut a = DMatrix::<C64>::identity(count * n, count * n);
    for i in 0..count {
        for j in 0..count {
            let gm = &g.g[2 * ix + (i + j) * sy];
            for p in 0..n {
                for q in 0..n {
                    a[(i * n + p, j * n + q)] += gm[(q, p)] * w[j];
                }
            }
        }
    }
    linalg::condition_number(&a)
}

#[derive(Debug, Clone)]
pub struct TransformKernel {
    pub n: usize,
    pub dt: f64,
    pub x_stride: usize,
    pub rows: Vec<KernelRow>,
}

impl TransformKernel {
    pub fn x(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.x).collect()
    }

    /// `K(x, x)` at each row.
    pub fn diagonal(&self) -> Vec<CMat> {
        self.rows.iter().map(|r| r.k[0].clone()).collect()
    }

    pub fn max_off_diagonal(&self) -> f64 {
        self.rows.iter().flat_map(|r| r.k.iter()).map(linalg::off_diagonal_max).fold(0.0, f64::max)
    }
}

/// Rows at `x = 0, h_x, 2h_x, …` covering `[0, x_end]` plus the four extra
/// rows the derivative stencils at the ends need.
pub fn solve_kernel(g: &GKernel, cfg: &MarchenkoConfig) -> Result<TransformKernel> {
    cfg.validate()?;
    let steps = (cfg.x_end / cfg.h_x()).round() as usize;
    let rows = (0..=steps.max(4))
        .into_par_iter()
        .map(|i| solve_marchenko(g, i * cfg.x_stride, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(TransformKernel { n: g.n, dt: g.dt, x_stride: cfg.x_stride, rows })
}

/// `Q̂ = -2 d/dx K(x,x)` by 7-point differences, hermitised. Returns the
/// potential and the largest asymmetry removed.
pub fn recover_potential(kernel: &TransformKernel, x_end: f64) -> Result<(MatrixPotential, f64)> {
    let diag = kernel.diagonal();
    let xs = kernel.x();
    let h = kernel.dt * kernel.x_stride as f64;
    let len = diag.len();
    let keep = xs.iter().filter(|&&x| x <= x_end + 1e-9).count().max(2);
    let mut asym = 0.0_f64;
    let q: Vec<CMat> = (0..keep)
        .map(|i| {
            let (start, w) = fd::first_derivative_stencil(i, len, h, 7);
            let mut d = CMat::zeros(kernel.n, kernel.n);
            for (o, wv) in w.iter().enumerate() {
                d += &diag[start + o] * c(*wv, 0.0);
            }
            let q = d * c(-2.0, 0.0);
            asym = asym.max(linalg::hermiticity_defect(&q));
            linalg::hermitise(&q)
        })
        .collect();
    Ok((MatrixPotential::new(xs[..keep].to_vec(), q)?, asym))
}

/// Samples of `K(0, t)` and `∂ₓK(0, t)` on `t = p · dt`, `p = 0..=t_max/dt`.
#[derive(Debug, Clone)]
pub struct TraceKernel {
    pub dt: f64,
    pub k0: Vec<CMat>,
    pub kx0: Vec<CMat>,
}

pub fn trace_kernel(kernel: &TransformKernel, g: &GKernel, t_max: f64) -> TraceKernel {
    let count = (t_max / g.dt).round() as usize + 1;
    let h = kernel.dt * kernel.x_stride as f64;
    let nodes: Vec<f64> = (0..5).map(|j| j as f64 * h).collect();
    let wx = fd::fornberg(0.0, &nodes, 1);
    let cols: Vec<(CMat, CMat)> = (0..count)
        .into_par_iter()
        .map(|p| {
            let k0 = kernel.rows[0].at(g, p);
            let mut kx = &k0 * c(wx[0], 0.0);
            for (j, wj) in wx.iter().enumerate().skip(1) {
                kx += kernel.rows[j].at(g, p) * c(*wj, 0.0);
            }
            (k0, kx)
        })
        .collect();
    let (k0, kx0) = cols.into_iter().unzip();
    TraceKernel { dt: g.dt, k0, kx0 }
}

impl TraceKernel {
    /// `f₊(0,k) = I + ∫ K(0,t)e^{ikt} dt` and
    /// `∂ₓf₊(0,k) = ikI - K(0,0) + ∫ ∂ₓK(0,t)e^{ikt} dt`.
    pub fn jost_plus(&self, k: f64) -> (CMat, CMat) {
        self.jost_plus_at(c(k, 0.0))
    }

    /// Same traces at a complex wavenumber with `Im k >= 0`.
    pub fn jost_plus_at(&self, k: C64) -> (CMat, CMat) {
        let n = self.k0[0].nrows();
        let w = gregory_weights(self.k0.len(), self.dt, GREGORY_ORDER);
        let mut f = linalg::eye(n);
        let mut fx = linalg::eye(n) * (I * k) - &self.k0[0];
        for p in 0..self.k0.len() {
            let e = (I * k * (p as f64 * self.dt)).exp() * w[p];
            f += &self.k0[p] * e;
            fx += &self.kx0[p] * e;
        }
        (f, fx)
    }

    pub fn jost(&self, k: f64) -> JostFunctions {
        let (fp, fxp) = self.jost_plus(k);
        let (fm, fxm) = self.jost_plus(-k);
        JostFunctions { k: c(k, 0.0), f_plus: fp, fx_plus: fxp, f_minus: fm, fx_minus: fxm }
    }
}

pub fn reconstruct_jost_from_kernel(kernel: &TransformKernel, g: &GKernel, t_max: f64, k: f64) -> JostFunctions {
    trace_kernel(kernel, g, t_max).jost(k)
}

/// `U = (Ψ - iΨₓ)(Ψ + iΨₓ)⁻¹` with `Ψ = f₋ + f₊S` at the selected nodes,
/// averaged and projected onto the unitary group. Returns `U` and the
/// largest deviation of a single node from the average.
pub fn recover_boundary_conditions(data: &ScatteringData, trace: &TraceKernel, window: (f64, f64), nodes: usize) -> Result<(CMat, f64)> {
    let n = data.n;
    let mut picks: Vec<usize> = (0..data.kgrid.len()).filter(|&i| data.kgrid[i] >= window.0 && data.kgrid[i] <= window.1).collect();
    if picks.len() > nodes && nodes > 0 {
        let step = picks.len() as f64 / nodes as f64;
        picks = (0..nodes).map(|j| picks[(j as f64 * step) as usize]).collect();
    }
    if picks.is_empty() {
        picks = vec![data.kgrid.iter().enumerate().filter(|(_, k)| **k > 0.0).min_by(|a, b| (a.1 - 1.0).abs().partial_cmp(&(b.1 - 1.0).abs()).unwrap()).map(|(i, _)| i).ok_or(Error::NonInvertibleTrace)?];
    }
    let mut us = Vec::new();
    for &i in &picks {
        let jf = trace.jost(data.kgrid[i]);
        let s = &data.s[i];
        let psi = &jf.f_minus + &jf.f_plus * s;
        let psix = &jf.fx_minus + &jf.fx_plus * s;
        let den = &psi + &psix * I;
        if linalg::condition_number(&den) > 1e10 {
            continue;
        }
        let inv = linalg::inverse(&den).ok_or(Error::NonInvertibleTrace)?;
        us.push((&psi - &psix * I) * inv);
    }
    if us.is_empty() {
        return Err(Error::NonInvertibleTrace);
    }
    let mut avg = CMat::zeros(n, n);
    for u in &us {
        avg += u;
    }
    avg /= c(us.len() as f64, 0.0);
    let u = linalg::polar_unitary(&avg);
    let spread = us.iter().map(|v| linalg::max_abs(&(v - &u))).fold(0.0, f64::max);
    Ok((u, spread))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InverseDiagnostics {
    pub g: GDiagnostics,
    pub nystrom_residual: f64,
    pub pivot_ratio: f64,
    pub q_asymmetry: f64,
    pub u_spread: f64,
}

#[derive(Debug, Clone)]
pub struct InverseResult {
    pub q_hat: MatrixPotential,
    pub u_hat_recovered: CMat,
    pub u_recovered: CMat,
    pub kernel: TransformKernel,
    pub g: GKernel,
    pub trace: TraceKernel,
    pub diagnostics: InverseDiagnostics,
}

/// Full inverse pipeline. Diagonal data is split into scalar problems so
/// each channel goes through exactly the scalar code path.
pub fn invert(data: &ScatteringData, cfg: &MarchenkoConfig) -> Result<InverseResult> {
    cfg.validate()?;
    if cfg.split_diagonal && data.n > 1 && data.is_diagonal() {
        let parts = (0..data.n).map(|j| invert_full(&data.channel(j), cfg)).collect::<Result<Vec<_>>>()?;
        return Ok(assemble_diagonal(parts));
    }
    invert_full(data, cfg)
}

fn invert_full(data: &ScatteringData, cfg: &MarchenkoConfig) -> Result<InverseResult> {
    let t_end = 2.0 * cfg.t_max + 2.0 * cfg.h_y();
    let g = build_g(data, cfg.dt, t_end, cfg)?;
    let kernel = solve_kernel(&g, cfg)?;
    let (q_hat, q_asymmetry) = recover_potential(&kernel, cfg.x_end)?;
    let trace = trace_kernel(&kernel, &g, cfg.t_max);
    let (u, u_spread, u_hat_recovered) = if cfg.recover_u {
        let (u, spread) = recover_boundary_conditions(data, &trace, cfg.u_window, cfg.u_nodes)?;
        let uh = bc::high_energy_limit(&u)?;
        (u, spread, uh)
    } else {
        (data.u_hat.clone(), 0.0, data.u_hat.clone())
    };
    let diagnostics = InverseDiagnostics {
        g: g.diagnostics.clone(),
        nystrom_residual: kernel.rows.iter().map(|r| r.residual).fold(0.0, f64::max),
        pivot_ratio: kernel.rows.iter().map(|r| r.pivot_ratio).fold(0.0, f64::max),
        q_asymmetry,
        u_spread,
    };
    Ok(InverseResult { q_hat, u_hat_recovered, u_recovered: u, kernel, g, trace, diagnostics })
}

fn diag_of(parts: &[CMat]) -> CMat {
    linalg::diag(&parts.iter().map(|m| m[(0, 0)]).collect::<Vec<_>>())
}

fn assemble_diagonal(parts: Vec<InverseResult>) -> InverseResult {
    let n = parts.len();
    let first = &parts[0];
    let q = (0..first.q_hat.len()).map(|p| diag_of(&parts.iter().map(|r| r.q_hat.q[p].clone()).collect::<Vec<_>>())).collect();
    let q_hat = MatrixPotential::new(first.q_hat.x.clone(), q).expect("diagonal assembly");
    let rows = (0..first.kernel.rows.len())
        .map(|i| {
            let r0 = &first.kernel.rows[i];
            KernelRow {
                k: (0..r0.k.len()).map(|j| diag_of(&parts.iter().map(|r| r.kernel.rows[i].k[j].clone()).collect::<Vec<_>>())).collect(),
                residual: parts.iter().map(|r| r.kernel.rows[i].residual).fold(0.0, f64::max),
                pivot_ratio: parts.iter().map(|r| r.kernel.rows[i].pivot_ratio).fold(0.0, f64::max),
                ..r0.clone()
            }
        })
        .collect();
    let g = GKernel {
        n,
        dt: first.g.dt,
        g: (0..first.g.g.len()).map(|p| diag_of(&parts.iter().map(|r| r.g.g[p].clone()).collect::<Vec<_>>())).collect(),
        diagnostics: first.g.diagnostics.clone(),
    };
    let trace = TraceKernel {
        dt: first.trace.dt,
        k0: (0..first.trace.k0.len()).map(|p| diag_of(&parts.iter().map(|r| r.trace.k0[p].clone()).collect::<Vec<_>>())).collect(),
        kx0: (0..first.trace.kx0.len()).map(|p| diag_of(&parts.iter().map(|r| r.trace.kx0[p].clone()).collect::<Vec<_>>())).collect(),
    };
    let max = |f: &dyn Fn(&InverseDiagnostics) -> f64| parts.iter().map(|r| f(&r.diagnostics)).fold(0.0, f64::max);
    let diagnostics = InverseDiagnostics {
        g: GDiagnostics {
            tail_residual: parts.iter().map(|r| r.g.diagnostics.tail_residual).fold(0.0, f64::max),
            raw_tail: parts.iter().map(|r| r.g.diagnostics.raw_tail).fold(0.0, f64::max),
            hermiticity: parts.iter().map(|r| r.g.diagnostics.hermiticity).fold(0.0, f64::max),
            end_norm: parts.iter().map(|r| r.g.diagnostics.end_norm).fold(0.0, f64::max),
        },
        nystrom_residual: max(&|d| d.nystrom_residual),
        pivot_ratio: max(&|d| d.pivot_ratio),
        q_asymmetry: max(&|d| d.q_asymmetry),
        u_spread: max(&|d| d.u_spread),
    };
    InverseResult {
        q_hat,
        u_hat_recovered: diag_of(&parts.iter().map(|r| r.u_hat_recovered.clone()).collect::<Vec<_>>()),
        u_recovered: diag_of(&parts.iter().map(|r| r.u_recovered.clone()).collect::<Vec<_>>()),
        kernel: TransformKernel { n, dt: first.kernel.dt, x_stride: first.kernel.x_stride, rows },
        g,
        trace,
        diagnostics,
    }
}
