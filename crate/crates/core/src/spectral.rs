//! Fourier sums over real wavenumber grids, with an analytic tail model that
//! absorbs the slow `1/k` decay of scattering data.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, I};
use crate::numerics::fd::first_derivative_stencil;
use crate::numerics::quadrature::{gregory_weights, GREGORY_ORDER};

/// Relative singular-value cutoff of the tail fit. Nearly collinear basis
/// columns otherwise produce huge cancelling coefficients whose aliased
/// images pollute the Fourier sum.
const RCOND: f64 = 1e-9;

/// `Σ_{j=1}^{J} c_j / (k + iα)^j`. Every term is analytic in the upper
/// half-plane, so its Fourier transform vanishes for `t > 0`.
#[derive(Debug, Clone)]
pub struct TailModel {
    pub alpha: f64,
    pub coeffs: Vec<CMat>,
}

impl TailModel {
    pub fn none(n: usize, alpha: f64) -> Self {
        let _ = n;
        Self { alpha, coeffs: Vec::new() }
    }

    /// Least-squares fit of `data` over the nodes with `|k| >= k_from`.
    pub fn fit(k: &[f64], data: &[CMat], k_from: f64, terms: usize, alpha: f64) -> Result<Self> {
        Self::fit_smoothed(k, data, k_from, terms, alpha, 0.0)
    }

    /// As [`TailModel::fit`], but data and basis are both convolved with a
    /// Gaussian of width `sigma` in `k` first. The coefficients are the same
    /// while oscillations `e^{2ika}` in the data are damped by
    /// `exp(-2a²σ²)`.
    pub fn fit_smoothed(k: &[f64], data: &[CMat], k_from: f64, terms: usize, alpha: f64, sigma: f64) -> Result<Self> {
        let m = k.len();
        let reach = 4.0 * sigma;
        let k_max = k.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let rows: Vec<usize> = (0..m).filter(|&i| k[i].abs() >= k_from + reach && k[i].abs() <= k_max - reach).collect();
        if terms == 0 || rows.len() < 2 * terms {
            return Ok(Self { alpha, coeffs: Vec::new() });
        }
        let (nr, nc) = (data[0].nrows(), data[0].ncols());
        // columns scaled to unit size at k_from
        let scale: Vec<f64> = (1..=terms).map(|j| k_from.powi(j as i32)).collect();
        let smooth = |i: usize| -> Vec<(usize, f64)> {
            if sigma <= 0.0 {
                return vec![(i, 1.0)];
            }
            // stay on the same side of the origin as k[i]
            let (a, b) = if k[i] > 0.0 { (0.0, f64::INFINITY) } else { (f64::NEG_INFINITY, 0.0) };
            let lo = k.partition_point(|&v| v < (k[i] - reach).max(a));
            let hi = k.partition_point(|&v| v <= (k[i] + reach).min(b));
            let w: Vec<f64> = (lo..hi).map(|j| (-0.5 * ((k[j] - k[i]) / sigma).powi(2)).exp()).collect();
            let total: f64 = w.iter().sum();
            (lo..hi).zip(w).map(|(j, v)| (j, v / total)).collect()
        };
        let kernels: Vec<Vec<(usize, f64)>> = rows.par_iter().map(|&i| smooth(i)).collect();
        let design = DMatrix::from_fn(rows.len(), terms, |r, j| {
            kernels[r].iter().map(|&(p, v)| basis(k[p], alpha, j + 1) * v).sum::<C64>() * scale[j]
        });
        let rhs = DMatrix::from_fn(rows.len(), nr * nc, |r, e| kernels[r].iter().map(|&(p, v)| data[p][(e / nc, e % nc)] * v).sum::<C64>());
        let svd = design.svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let sol = svd.solve(&rhs, RCOND * smax).map_err(|e| Error::BadParams(format!("tail fit failed: {e}")))?;
        let coeffs = (0..terms)
            .map(|j| CMat::from_fn(nr, nc, |a, b| sol[(j, a * nc + b)] * scale[j]))
            .collect();
        Ok(Self { alpha, coeffs })
    }

    pub fn eval(&self, k: C64, n: (usize, usize)) -> CMat {
        let mut acc = CMat::zeros(n.0, n.1);
        let z = C64::new(1.0, 0.0) / (k + I * self.alpha);
        let mut p = z;
        for c in &self.coeffs {
            acc += c * p;
            p *= z;
        }
        acc
    }
}

fn basis(k: f64, alpha: f64, j: usize) -> C64 {
    (C64::new(1.0, 0.0) / C64::new(k, alpha)).powi(j as i32)
}

/// Quadrature weights over a wavenumber grid: equal weights on a uniform
/// midpoint grid, trapezoid otherwise.
pub fn k_weights(k: &[f64]) -> Vec<f64> {
    let m = k.len();
    if m == 1 {
        return vec![1.0];
    }
    let h = k[1] - k[0];
    if k.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h) {
        return vec![h; m];
    }
    (0..m)
        .map(|i| {
            let left = if i > 0 { k[i] - k[i - 1] } else { 0.0 };
            let right = if i + 1 < m { k[i + 1] - k[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// `(1/2π) Σ w_k d(k) e^{ikt}` at each `t`, row-major flattened per `t`.
pub fn fourier_sum(k: &[f64], w: &[f64], data: &[CMat], t: &[f64]) -> Vec<Vec<C64>> {
    let (nr, nc) = (data[0].nrows(), data[0].ncols());
    let flat: Vec<Vec<C64>> = data.iter().map(|m| (0..nr * nc).map(|e| m[(e / nc, e % nc)]).collect()).collect();
    t.par_iter()
        .map(|&tv| {
            let mut acc = vec![C64::new(0.0, 0.0); nr * nc];
            for (i, d) in flat.iter().enumerate() {
                let ph = C64::from_polar(w[i] / (2.0 * PI), k[i] * tv);
                for e in 0..nr * nc {
                    acc[e] += d[e] * ph;
                }
            }
            acc
        })
        .collect()
}

/// `PV ∫ L(k')/(k' - k) dk'` over the whole line at every node of a
/// uniform grid. The pole is removed by subtracting `L(k)`, the regular
/// part uses end-corrected trapezoid weights, and `|k'|` beyond the grid
/// is covered by an `a/k'²` tail matched to the end values.
pub fn hilbert_pv(k: &[f64], l: &[f64], end_tol: f64) -> Result<Vec<f64>> {
    let m = k.len();
    if m < 8 || l.len() != m {
        return Err(Error::BadParams("hilbert_pv needs at least 8 matching samples".into()));
    }
    let h = k[1] - k[0];
    if !k.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h) {
        return Err(Error::BadParams("hilbert_pv needs a uniform grid".into()));
    }
    let end = l[0].abs().max(l[m - 1].abs());
    if !(end <= end_tol) {
        return Err(Error::TailNotDecayed { value: end });
    }
    let (lo, hi) = (k[0] - 0.5 * h, k[m - 1] + 0.5 * h);
    let w = gregory_weights(m, h, GREGORY_ORDER);
    let a_hi = l[m - 1] * k[m - 1] * k[m - 1];
    let a_lo = l[0] * k[0] * k[0];
    Ok((0..m)
        .into_par_iter()
        .map(|i| {
            let ki = k[i];
            let (start, sw) = first_derivative_stencil(i, m, h, 7);
            let dl: f64 = sw.iter().enumerate().map(|(j, c)| c * l[start + j]).sum();
            let mut acc = 0.0;
            for j in 0..m {
                let g = if j == i { dl } else { (l[j] - l[i]) / (k[j] - ki) };
                acc += w[j] * g;
            }
            // half cells between the outer nodes and the tail cut
            let (r, s) = (hi - 0.25 * h, lo + 0.25 * h);
            acc += 0.5 * h * ((a_hi / (r * r) - l[i]) / (r - ki) + (a_lo / (s * s) - l[i]) / (s - ki));
            acc += l[i] * ((hi - ki) / (ki - lo)).ln();
            acc += a_hi * tail_right(hi, ki) - a_lo * tail_right(-lo, -ki);
            acc
        })
        .collect())
}

/// `∫_K^∞ dk' / (k'² (k' - k))` for `|k| < K`.
fn tail_right(big: f64, k: f64) -> f64 {
    let x = k / big;
    if x.abs() < 1e-2 {
        let mut acc = 0.0;
        let mut p = 1.0;
        for m in 0..10 {
            acc += p / (m as f64 + 2.0);
            p *= x;
        }
        return acc / (big * big);
    }
    -(1.0 - x).ln() / (k * k) - 1.0 / (k * big)
}

/// Value at `z` (`Im z > 0`) of a scalar function analytic in the upper
/// half-plane with `f → 1`, from its samples on the real grid.
pub fn cauchy_upper(k: &[f64], f: &[C64], z: C64, tail_terms: usize) -> Result<C64> {
    let one = C64::new(1.0, 0.0);
    let data: Vec<CMat> = f.iter().map(|v| CMat::from_element(1, 1, v - one)).collect();
    let k_from = 0.5 * k.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let model = TailModel::fit(k, &data, k_from, tail_terms, 1.0)?;
    let w = k_weights(k);
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..k.len() {
        let r = data[j][(0, 0)] - model.eval(C64::new(k[j], 0.0), (1, 1))[(0, 0)];
        acc += r * w[j] / (C64::new(k[j], 0.0) - z);
    }
    Ok(one + model.eval(z, (1, 1))[(0, 0)] + acc / (2.0 * PI * I))
}
