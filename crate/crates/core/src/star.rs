//! Star graphs: `n` half-lines glued at a Kirchhoff vertex, each carrying
//! its own scalar potential. Scattering is synthesised from the ray Jost
//! functions, and the potential on the last ray can be recovered from the
//! reflection coefficients of the other `n - 1`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::bc::BoundaryCondition;
use crate::error::{Error, Result};
use crate::forward::{self, BoundState, BoundStateOptions, KGrid, ScatteringData, Sign};
use crate::linalg::{self, c, CMat, C64, I};
use crate::marchenko::{self, InverseDiagnostics, MarchenkoConfig, TraceKernel};
use crate::numerics::ode::Tolerances;
use crate::potential::MatrixPotential;
use crate::spectral::{cauchy_upper, hilbert_pv};

pub const JOST_ZERO: f64 = 1e-12;
pub const VIRTUAL_LEVEL: f64 = 1e-4;

/// Diagonal entry of `Û` for the Kirchhoff vertex of degree `n`.
pub fn kirchhoff_u_hat_entry(n: usize) -> f64 {
    2.0 / n as f64 - 1.0
}

#[derive(Debug, Clone)]
pub struct StarGraphPotential {
    pub rays: Vec<MatrixPotential>,
}

impl StarGraphPotential {
    pub fn new(rays: Vec<MatrixPotential>) -> Result<Self> {
        let first = rays.first().ok_or_else(|| Error::BadParams("a star needs at least one ray".into()))?;
        for (j, r) in rays.iter().enumerate() {
            if r.n != 1 {
                return Err(Error::ShapeMismatch { expected: "1x1 ray potential".into(), got: format!("ray {j} has n = {}", r.n) });
            }
            if r.x != first.x {
                return Err(Error::BadParams(format!("ray {j} is not on the shared grid")));
            }
            if r.q.iter().any(|m| m[(0, 0)].im != 0.0) {
                return Err(Error::BadParams(format!("ray {j} potential is not real")));
            }
        }
        Ok(Self { rays })
    }

    /// Rays sampled from real profiles on a shared uniform grid.
    pub fn from_fns(x_max: f64, count: usize, fns: &[&dyn Fn(f64) -> f64]) -> Result<Self> {
        let rays = fns
            .iter()
            .map(|f| MatrixPotential::uniform(x_max, count, |x| CMat::from_element(1, 1, c(f(x), 0.0))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rays)
    }

    pub fn n(&self) -> usize {
        self.rays.len()
    }

    pub fn assemble(&self) -> Result<MatrixPotential> {
        MatrixPotential::from_channels(&self.rays)
    }
}

/// Ray traces at one real `k`: `F(k)`, `F'(k)` and `F̄(k) = F(-k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayJost {
    pub f: C64,
    pub fx: C64,
    pub f_bar: C64,
}

impl RayJost {
    pub fn free(k: f64) -> Self {
        Self { f: c(1.0, 0.0), fx: I * k, f_bar: c(1.0, 0.0) }
    }
}

pub fn ray_jost(q: &MatrixPotential, k: f64, tol: Tolerances) -> Result<RayJost> {
    let p = forward::compute_jost_with(q, c(k, 0.0), Sign::Plus, tol)?;
    let m = forward::compute_jost_with(q, c(-k, 0.0), Sign::Plus, tol)?;
    Ok(RayJost { f: p.f[(0, 0)], fx: p.fx[(0, 0)], f_bar: m.f[(0, 0)] })
}

fn i_pow(n: usize) -> C64 {
    [c(1.0, 0.0), I, c(-1.0, 0.0), -I][n % 4]
}

/// Dispersion function `M(k) = (i^{n-1}/n) ΠF_j Σ F'_j/F_j`.
pub fn dispersion(rays: &[RayJost]) -> Result<C64> {
    let n = rays.len();
    check_nonzero(rays, None)?;
    let prod: C64 = rays.iter().map(|r| r.f).product();
    let sum: C64 = rays.iter().map(|r| r.fx / r.f).sum();
    Ok(i_pow(n - 1) / n as f64 * prod * sum)
}

fn check_nonzero(rays: &[RayJost], k: Option<f64>) -> Result<()> {
    for (j, r) in rays.iter().enumerate() {
        if r.f.norm() < JOST_ZERO {
            return Err(Error::JostZeroOnAxis { ray: j, k: k.unwrap_or(f64::NAN) });
        }
    }
    Ok(())
}

/// `S_ij = 2iⁿk ΠF/(n F_i F_j M) - δ_ij F̄_i/F_i` together with `M(k)`.
pub fn graph_scattering(rays: &[RayJost], k: f64) -> Result<(CMat, C64)> {
    let n = rays.len();
    check_nonzero(rays, Some(k))?;
    let m = dispersion(rays)?;
    let prod: C64 = rays.iter().map(|r| r.f).product();
    let x = i_pow(n) * 2.0 * k * prod / (n as f64 * m);
    let s = CMat::from_fn(n, n, |i, j| {
        let base = x / (rays[i].f * rays[j].f);
        if i == j { base - rays[i].f_bar / rays[i].f } else { base }
    });
    Ok((s, m))
}

#[derive(Debug, Clone)]
pub struct StarForward {
    /// Full scattering data of the star with the Kirchhoff vertex.
    pub data: ScatteringData,
    pub m: Vec<C64>,
    pub virtual_level: Option<f64>,
}

/// Scattering matrix and dispersion function on `kgrid`, plus bound states
/// from the assembled diagonal operator.
pub fn star_forward(star: &StarGraphPotential, kgrid: &KGrid, kappa_max: f64, tol: Tolerances) -> Result<StarForward> {
    let n = star.n();
    let per_k: Vec<(CMat, C64)> = kgrid
        .k
        .par_iter()
        .map(|&k| {
            let rays = star.rays.iter().map(|q| ray_jost(q, k, tol)).collect::<Result<Vec<_>>>()?;
            graph_scattering(&rays, k)
        })
        .collect::<Result<Vec<_>>>()?;
    let q = star.assemble()?;
    let bc = BoundaryCondition::kirchhoff(n);
    let mut opts = BoundStateOptions::new(kappa_max);
    opts.tol = tol;
    let search = forward::bound_states(&q, &bc, &opts)?;
    let (s, m) = per_k.into_iter().unzip();
    Ok(StarForward {
        data: ScatteringData { n, kgrid: kgrid.k.clone(), s, u_hat: bc.u_hat.clone(), bound_states: search.states },
        m,
        virtual_level: search.virtual_level,
    })
}

/// Reflection coefficient of one ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RayData {
    /// Zero-based ray index.
    pub j: usize,
    pub r: Vec<C64>,
}

/// Diagonal scattering data of a subset of the rays of an `n`-star.
#[derive(Debug, Clone, PartialEq)]
pub struct RayScatteringData {
    pub n: usize,
    pub kgrid: Vec<f64>,
    pub rays: Vec<RayData>,
    pub kappa: Vec<f64>,
    /// `b[l][p]` is the diagonal normalisation of `κ_l` on `rays[p]`.
    pub b: Vec<Vec<f64>>,
    pub orders: Vec<u32>,
}

impl RayScatteringData {
    /// Restriction of full star data to the listed rays.
    pub fn from_scattering(data: &ScatteringData, rays: &[usize]) -> Self {
        Self {
            n: data.n,
            kgrid: data.kgrid.clone(),
            rays: rays.iter().map(|&j| RayData { j, r: data.s.iter().map(|m| m[(j, j)]).collect() }).collect(),
            kappa: data.bound_states.iter().map(|b| b.kappa).collect(),
            b: data.bound_states.iter().map(|b| rays.iter().map(|&j| b.c2[(j, j)].re).collect()).collect(),
            orders: data.bound_states.iter().map(|b| b.order.max(1)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        KGrid::from_values(self.kgrid.clone())?;
        for rd in &self.rays {
            if rd.j >= self.n {
                return Err(Error::BadParams(format!("ray index {} out of range for n = {}", rd.j, self.n)));
            }
            if rd.r.len() != self.kgrid.len() {
                return Err(Error::ShapeMismatch { expected: format!("{} samples", self.kgrid.len()), got: format!("ray {} has {}", rd.j, rd.r.len()) });
            }
            if let Some(v) = rd.r.iter().map(|z| z.norm()).find(|&v| v > 1.0 + 1e-8) {
                return Err(Error::BadParams(format!("|R_{}| = {v} exceeds 1", rd.j)));
            }
        }
        if self.b.len() != self.kappa.len() || self.b.iter().any(|row| row.len() != self.rays.len()) {
            return Err(Error::ShapeMismatch { expected: "b[l][ray]".into(), got: "ragged normalisation table".into() });
        }
        if self.b.iter().flatten().any(|&v| v < -1e-12) {
            return Err(Error::BadParams("negative normalisation entry".into()));
        }
        if !self.orders.is_empty() && self.orders.len() != self.kappa.len() {
            return Err(Error::ShapeMismatch { expected: format!("{} orders", self.kappa.len()), got: format!("{}", self.orders.len()) });
        }
        if self.kappa.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::BadParams("bound-state rates must be positive".into()));
        }
        Ok(())
    }

    pub fn order(&self, l: usize) -> u32 {
        self.orders.get(l).copied().unwrap_or(1)
    }
}

/// One ray recovered by the scalar Marchenko equation.
#[derive(Debug, Clone)]
pub struct RayRecovery {
    pub q_hat: MatrixPotential,
    pub trace: TraceKernel,
    pub diagnostics: InverseDiagnostics,
}

impl RayRecovery {
    pub fn jost(&self, k: f64) -> RayJost {
        let (f, fx) = self.trace.jost_plus(k);
        let (fb, _) = self.trace.jost_plus(-k);
        RayJost { f: f[(0, 0)], fx: fx[(0, 0)], f_bar: fb[(0, 0)] }
    }

    pub fn jost_at(&self, k: C64) -> C64 {
        self.trace.jost_plus_at(k).0[(0, 0)]
    }
}

/// Scalar Marchenko recovery of one ray from `R_j`, `(κ_l, b_{l,j}, m_l)`
/// and the diagonal entry `Û_jj`.
pub fn diagonal_marchenko(kgrid: &[f64], r: &[C64], bound: &[(f64, f64, u32)], u_hat_jj: f64, cfg: &MarchenkoConfig) -> Result<RayRecovery> {
    let data = ScatteringData {
        n: 1,
        kgrid: kgrid.to_vec(),
        s: r.iter().map(|&v| CMat::from_element(1, 1, v)).collect(),
        u_hat: CMat::from_element(1, 1, c(u_hat_jj, 0.0)),
        bound_states: bound
            .iter()
            .filter(|b| b.1 > 0.0)
            .map(|&(kappa, b, order)| BoundState { kappa, c2: CMat::from_element(1, 1, c(b, 0.0)), order })
            .collect(),
    };
    let cfg = MarchenkoConfig { recover_u: false, ..cfg.clone() };
    let inv = marchenko::invert(&data, &cfg)?;
    Ok(RayRecovery { q_hat: inv.q_hat, trace: inv.trace, diagnostics: inv.diagnostics })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionFunction {
    pub kgrid: Vec<f64>,
    pub m: Vec<C64>,
    pub zeros: Vec<f64>,
    pub orders: Vec<u32>,
    pub m_hat: Vec<C64>,
    pub arg_m: Vec<f64>,
}

fn blaschke(k: f64, zeros: &[f64], orders: &[u32]) -> C64 {
    zeros
        .iter()
        .enumerate()
        .map(|(l, &kap)| ((c(k, kap)) / c(k, -kap)).powi(orders.get(l).copied().unwrap_or(1) as i32))
        .product()
}

/// `M̂(k) = M(k) / (iⁿ(k+i)) · Π((k+iκ_l)/(k-iκ_l))^{m_l}` with no checks.
pub fn normalize_samples(k: &[f64], m: &[C64], n: usize, zeros: &[f64], orders: &[u32]) -> Vec<C64> {
    k.iter().zip(m).map(|(&kv, &mv)| mv / (i_pow(n) * c(kv, 1.0)) * blaschke(kv, zeros, orders)).collect()
}

/// Size of `|M̂|` at the node nearest `k = 0` if it looks like `M(0) = 0`:
/// either tiny, or shrinking toward the origin as fast as `|k|`.
pub fn virtual_level_indicator(k: &[f64], m_hat_abs: &[f64]) -> Option<f64> {
    let mut pos: Vec<usize> = (0..k.len()).filter(|&i| k[i] > 0.0).collect();
    pos.sort_by(|&a, &b| k[a].total_cmp(&k[b]));
    let (&i0, &i1) = (pos.first()?, pos.get(1)?);
    let v = m_hat_abs[i0];
    let linear = v / m_hat_abs[i1] < 0.5 * (1.0 + k[i0] / k[i1]);
    if v < VIRTUAL_LEVEL || linear { Some(v) } else { None }
}

pub fn normalized_dispersion(k: &[f64], m: &[C64], n: usize, zeros: &[f64], orders: &[u32]) -> Result<Vec<C64>> {
    if zeros.iter().any(|&z| !(z > 0.0)) {
        return Err(Error::BadParams("zeros must lie on the positive imaginary axis".into()));
    }
    let mh = normalize_samples(k, m, n, zeros, orders);
    let abs: Vec<f64> = mh.iter().map(|z| z.norm()).collect();
    if let Some(value) = virtual_level_indicator(k, &abs) {
        return Err(Error::VirtualLevelSuspected { value });
    }
    Ok(mh)
}

/// `arg(k/(k+i))` on the branch analytic in the upper half-plane.
fn arg_k_over(k: f64) -> f64 {
    let ak = if k > 0.0 { 0.0 } else { PI };
    ak - 1.0_f64.atan2(k)
}

/// `arg M` from `|M|` by the Hilbert transform of `ln|M̂|`. A declared
/// zero of order `virtual_order` at `k = 0` is divided out analytically.
pub fn argument_reconstruction(k: &[f64], abs_m: &[f64], n: usize, zeros: &[f64], orders: &[u32], virtual_order: u32, end_tol: f64) -> Result<Vec<f64>> {
    if abs_m.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::BadParams("|M| must be positive on the grid".into()));
    }
    let nu = virtual_order as f64;
    let l: Vec<f64> = k
        .iter()
        .zip(abs_m)
        .map(|(&kv, &a)| {
            let kp = (kv * kv + 1.0).sqrt();
            (a / kp).ln() - nu * (kv.abs() / kp).ln()
        })
        .collect();
    let pv = hilbert_pv(k, &l, end_tol)?;
    Ok(k.iter()
        .zip(&pv)
        .map(|(&kv, p)| {
            let mut a = -p / PI + n as f64 * PI / 2.0 + 1.0_f64.atan2(kv) + nu * arg_k_over(kv);
            for (l, &kap) in zeros.iter().enumerate() {
                a -= 2.0 * orders.get(l).copied().unwrap_or(1) as f64 * kap.atan2(kv);
            }
            a
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct RecoveryConfig {
    pub marchenko: MarchenkoConfig,
    /// Step-7 nodes with `|S_nn(k)S_nn(-k) - 1|` below this are interpolated.
    pub det_min: f64,
    /// Nodes where the known part of the last column has squared norm below
    /// this get `|M|` by interpolation.
    pub column_min: f64,
    /// Below this the orthogonality system for `S_nn` is degenerate.
    pub completion_min: f64,
    pub end_tol: f64,
    /// Known order of a zero of `M` at `k = 0`; 0 rejects virtual levels.
    pub virtual_order: u32,
    pub interp_points: usize,
}

impl RecoveryConfig {
    pub fn new(marchenko: MarchenkoConfig) -> Self {
        Self { marchenko, det_min: 1e-2, column_min: 1e-4, completion_min: 1e-10, end_tol: 1e-2, virtual_order: 0, interp_points: 4 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecoveryDiagnostics {
    /// Nodes where `|M|` came from interpolation.
    pub modulus_interpolated: Vec<usize>,
    /// Nodes skipped by the `F_n` solve and interpolated.
    pub skipped_nodes: Vec<usize>,
    pub total_nodes: usize,
    pub completion_unitarity: f64,
    pub b_last: Vec<f64>,
    pub ray_diagnostics: Vec<InverseDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct GraphRecoveryResult {
    /// Zero-based index of the recovered ray.
    pub last: usize,
    pub q_hat_n: MatrixPotential,
    pub known: Vec<RayRecovery>,
    pub s_full: Vec<CMat>,
    pub dispersion: DispersionFunction,
    pub f_n: Vec<C64>,
    pub fx_n: Vec<C64>,
    pub last_ray: RayRecovery,
    pub diagnostics: RecoveryDiagnostics,
}

/// Lagrange interpolation of the marked nodes from the nearest `p` good
/// nodes on each side.
fn fill_marked(k: &[f64], v: &mut [C64], bad: &[bool], p: usize) {
    let good: Vec<usize> = (0..k.len()).filter(|&i| !bad[i]).collect();
    for i in (0..k.len()).filter(|&i| bad[i]) {
        let split = good.partition_point(|&g| g < i);
        let lo = split.saturating_sub(p);
        let hi = (split + p).min(good.len());
        let nodes = &good[lo..hi];
        let mut acc = c(0.0, 0.0);
        for &a in nodes {
            let mut w = 1.0;
            for &b in nodes {
                if a != b {
                    w *= (k[i] - k[b]) / (k[a] - k[b]);
                }
            }
            acc += v[a] * w;
        }
        v[i] = acc;
    }
}

/// Recovers the potential on the one ray missing from `partial`, using
/// only the reflection coefficients and bound-state data of the others.
pub fn recover_last_ray(partial: &RayScatteringData, cfg: &RecoveryConfig) -> Result<GraphRecoveryResult> {
    partial.validate()?;
    let n = partial.n;
    if n < 2 || partial.rays.len() != n - 1 {
        return Err(Error::BadParams(format!("need data for exactly n - 1 = {} rays", n.saturating_sub(1))));
    }
    let mut seen = vec![false; n];
    for rd in &partial.rays {
        if seen[rd.j] {
            return Err(Error::BadParams(format!("ray {} listed twice", rd.j)));
        }
        seen[rd.j] = true;
    }
    let last = seen.iter().position(|s| !s).expect("one ray missing");
    let k = &partial.kgrid;
    let nk = k.len();
    let nf = n as f64;
    let u_jj = kirchhoff_u_hat_entry(n);
    let orders: Vec<u32> = (0..partial.kappa.len()).map(|l| partial.order(l)).collect();

    // (1) known rays
    let known: Vec<RayRecovery> = partial
        .rays
        .par_iter()
        .enumerate()
        .map(|(p, rd)| {
            let bound: Vec<(f64, f64, u32)> = (0..partial.kappa.len()).map(|l| (partial.kappa[l], partial.b[l][p], orders[l])).collect();
            diagonal_marchenko(k, &rd.r, &bound, u_jj, &cfg.marchenko)
        })
        .collect::<Result<Vec<_>>>()?;
    let jost: Vec<Vec<RayJost>> = k.par_iter().map(|&kv| known.iter().map(|r| r.jost(kv)).collect()).collect();
    for (i, row) in jost.iter().enumerate() {
        check_nonzero(row, Some(k[i]))?;
    }
    let m1 = n - 1;

    // (2) minor and (3) modulus of the last column and of M
    let minor: Vec<CMat> = (0..nk)
        .map(|i| {
            let raw = CMat::from_fn(m1, m1, |a, b| {
                let (ja, jb) = (&jost[i][a], &jost[i][b]);
                if a == b { partial.rays[a].r[i] } else { (partial.rays[a].r[i] + ja.f_bar / ja.f) * ja.f / jb.f }
            });
            (&raw + raw.transpose()) * c(0.5, 0.0)
        })
        .collect();
    let mut col_abs2 = vec![vec![0.0; m1]; nk];
    let mut abs_m = vec![c(0.0, 0.0); nk];
    let mut weak = vec![false; nk];
    for i in 0..nk {
        let prod_abs: f64 = jost[i].iter().map(|r| r.f.norm()).product();
        let (mut num, mut den) = (0.0, 0.0);
        for a in 0..m1 {
            let row: f64 = (0..m1).map(|b| minor[i][(b, a)].norm_sqr()).sum();
            let s2 = (1.0 - row).max(0.0);
            col_abs2[i][a] = s2;
            let ca = 2.0 * k[i].abs() * prod_abs / (nf * jost[i][a].f.norm());
            num += s2.sqrt() * ca;
            den += s2;
        }
        weak[i] = den < cfg.column_min;
        abs_m[i] = c(if den > 0.0 { num / den } else { 0.0 }, 0.0);
    }
    let modulus_interpolated: Vec<usize> = (0..nk).filter(|&i| weak[i]).collect();
    if modulus_interpolated.len() * 2 > nk {
        return Err(Error::UnitaryCompletionDegenerate { k: k[modulus_interpolated[0]] });
    }
    let mut log_m: Vec<C64> = abs_m.iter().map(|v| c(v.re.max(f64::MIN_POSITIVE).ln(), 0.0)).collect();
    fill_marked(k, &mut log_m, &weak, cfg.interp_points);
    let abs_m: Vec<f64> = log_m.iter().map(|v| v.re.exp()).collect();

    // (4) phase of M
    if cfg.virtual_order == 0 {
        let mh: Vec<f64> = k.iter().zip(&abs_m).map(|(kv, a)| a / (kv * kv + 1.0).sqrt()).collect();
        if let Some(value) = virtual_level_indicator(k, &mh) {
            return Err(Error::VirtualLevelSuspected { value });
        }
    }
    let arg_m = argument_reconstruction(k, &abs_m, n, &partial.kappa, &orders, cfg.virtual_order, cfg.end_tol)?;
    let m: Vec<C64> = abs_m.iter().zip(&arg_m).map(|(&a, &t)| C64::from_polar(a, t)).collect();

    // (5) last column off the diagonal, free of F_n
    let p_k: Vec<C64> = (0..nk)
        .map(|i| {
            let prod: C64 = jost[i].iter().map(|r| r.f).product();
            i_pow(n) * 2.0 * k[i] * prod / (nf * m[i])
        })
        .collect();
    let s_in: Vec<Vec<C64>> = (0..nk).map(|i| (0..m1).map(|a| p_k[i] / jost[i][a].f).collect()).collect();

    // (6) S_nn from orthogonality to the known columns, scaled to the column norm
    let mut s_nn = vec![c(0.0, 0.0); nk];
    for i in 0..nk {
        let (mut num, mut den) = (c(0.0, 0.0), 0.0);
        for b in 0..m1 {
            let r: C64 = (0..m1).map(|a| minor[i][(a, b)].conj() * s_in[i][a]).sum();
            num += s_in[i][b] * r;
            den += s_in[i][b].norm_sqr();
        }
        if den < cfg.completion_min {
            return Err(Error::UnitaryCompletionDegenerate { k: k[i] });
        }
        let raw = -num / den;
        let target = (1.0 - s_in[i].iter().map(|v| v.norm_sqr()).sum::<f64>()).max(0.0).sqrt();
        s_nn[i] = if raw.norm() > 0.0 { raw * (target / raw.norm()) } else { raw };
    }

    // (7) F_n from the diagonal entry at ±k
    let mirror = |i: usize| nk - 1 - i;
    let mut f_n = vec![c(0.0, 0.0); nk];
    let mut bad = vec![false; nk];
    for i in (0..nk).filter(|&i| k[i] > 0.0) {
        let j = mirror(i);
        let det = s_nn[i] * s_nn[j] - 1.0;
        if det.norm() < cfg.det_min {
            bad[i] = true;
            bad[j] = true;
            continue;
        }
        f_n[i] = (p_k[i] * s_nn[j] - p_k[j]) / det;
        f_n[j] = (s_nn[i] * p_k[j] - p_k[i]) / det;
    }
    let skipped_nodes: Vec<usize> = (0..nk).filter(|&i| bad[i]).collect();
    if skipped_nodes.len() * 2 > nk {
        return Err(Error::SystemSingular { skipped: skipped_nodes.len(), total: nk });
    }
    fill_marked(k, &mut f_n, &bad, cfg.interp_points);

    // (8) F'_n from the dispersion function
    let fx_n: Vec<C64> = (0..nk)
        .map(|i| {
            let prod: C64 = jost[i].iter().map(|r| r.f).product();
            let sum: C64 = jost[i].iter().map(|r| r.fx / r.f).sum();
            nf * m[i] / (i_pow(n - 1) * prod) - f_n[i] * sum
        })
        .collect();

    // (9) scalar data induced on the last ray
    let mut b_last = Vec::with_capacity(partial.kappa.len());
    for (l, &kap) in partial.kappa.iter().enumerate() {
        let fn_k = cauchy_upper(k, &f_n, c(0.0, kap), cfg.marchenko.tail_terms)?;
        let (mut acc, mut cnt) = (0.0, 0);
        for (p, rec) in known.iter().enumerate() {
            if partial.b[l][p] > 0.0 {
                acc += partial.b[l][p] * rec.jost_at(c(0.0, kap)).norm_sqr() / fn_k.norm_sqr();
                cnt += 1;
            }
        }
        b_last.push(if cnt > 0 { acc / cnt as f64 } else { 0.0 });
    }
    let bound: Vec<(f64, f64, u32)> = (0..partial.kappa.len()).map(|l| (partial.kappa[l], b_last[l], orders[l])).collect();
    let last_ray = diagonal_marchenko(k, &s_nn, &bound, u_jj, &cfg.marchenko)?;

    let s_full: Vec<CMat> = (0..nk)
        .map(|i| {
            let mut s = CMat::zeros(n, n);
            let idx: Vec<usize> = partial.rays.iter().map(|r| r.j).collect();
            for a in 0..m1 {
                for b in 0..m1 {
                    s[(idx[a], idx[b])] = minor[i][(a, b)];
                }
                s[(idx[a], last)] = s_in[i][a];
                s[(last, idx[a])] = s_in[i][a];
            }
            s[(last, last)] = s_nn[i];
            s
        })
        .collect();
    let completion_unitarity = s_full.iter().map(linalg::unitarity_defect).fold(0.0, f64::max);
    let m_hat = normalize_samples(k, &m, n, &partial.kappa, &orders);
    Ok(GraphRecoveryResult {
        last,
        q_hat_n: last_ray.q_hat.clone(),
        diagnostics: RecoveryDiagnostics {
            modulus_interpolated,
            skipped_nodes,
            total_nodes: nk,
            completion_unitarity,
            b_last,
            ray_diagnostics: known.iter().map(|r| r.diagnostics.clone()).collect(),
        },
        known,
        s_full,
        dispersion: DispersionFunction { kgrid: k.clone(), m, zeros: partial.kappa.clone(), orders, m_hat, arg_m },
        f_n,
        fx_n,
        last_ray,
    })
}
