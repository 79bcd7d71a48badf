//! Factorisation `L = D*D` with `D = i(d/dx - V)` and `V = Ξ₀ₓΞ₀⁻¹` built
//! from a zero-energy solution frame, plus the partner operator `DD*`.

use crate::bc::BoundaryCondition;
use crate::error::{Error, Result};
use crate::forward::{propagate, MatrixSchrodinger};
use crate::linalg::{self, c, CMat, C64, I};
use crate::numerics::fd;
use crate::numerics::ode::Tolerances;
use crate::potential::MatrixPotential;

pub const SINGULAR_COND: f64 = 1e10;
pub const CONSTRAINT_TOL: f64 = 1e-10;
/// Width of the finite-difference stencils applied to grid samples.
pub const STENCIL: usize = 7;

#[derive(Debug, Clone)]
pub struct ZeroEnergyFrame {
    pub x: Vec<f64>,
    pub xi: Vec<CMat>,
    pub xix: Vec<CMat>,
    pub u0: CMat,
}

#[derive(Debug, Clone)]
pub struct DarbouxFactor {
    pub x: Vec<f64>,
    /// `V` at each node; zero where the frame is singular.
    pub v: Vec<CMat>,
    pub singular: Vec<bool>,
    pub singular_points: Vec<f64>,
}

impl DarbouxFactor {
    pub fn n(&self) -> usize {
        self.v[0].nrows()
    }

    pub fn max_hermiticity_defect(&self) -> f64 {
        self.v
            .iter()
            .zip(&self.singular)
            .filter(|(_, s)| !**s)
            .map(|(v, _)| linalg::norm(&(v - v.adjoint())))
            .fold(0.0, f64::max)
    }
}

/// `U₀ = U`, or the override after checking `P U₀ = P U`.
pub fn choose_u0(bc: &BoundaryCondition, over: Option<&CMat>) -> Result<CMat> {
    let Some(u0) = over else {
        return Ok(bc.u.clone());
    };
    if u0.nrows() != bc.n || u0.ncols() != bc.n {
        return Err(Error::ShapeMismatch { expected: format!("{0}x{0}", bc.n), got: format!("{}x{}", u0.nrows(), u0.ncols()) });
    }
    let defect = linalg::unitarity_defect(u0);
    if defect > CONSTRAINT_TOL {
        return Err(Error::NotUnitary { norm: defect });
    }
    let residual = linalg::norm(&(&bc.p * (u0 - &bc.u)));
    if residual > CONSTRAINT_TOL {
        return Err(Error::ConstraintViolated { residual });
    }
    Ok(u0.clone())
}

/// Solve `Ξ₀'' = QΞ₀` outward from `Ξ₀(0) = (U₀+I)/2`, `Ξ₀'(0) = i(U₀-I)/2`,
/// recording at every node of the potential grid.
pub fn zero_energy_frame(q: &MatrixPotential, u0: &CMat) -> Result<ZeroEnergyFrame> {
    zero_energy_frame_with(q, u0, Tolerances::default())
}

pub fn zero_energy_frame_with(q: &MatrixPotential, u0: &CMat, tol: Tolerances) -> Result<ZeroEnergyFrame> {
    let n = q.n;
    if u0.nrows() != n || u0.ncols() != n {
        return Err(Error::ShapeMismatch { expected: format!("{n}x{n}"), got: format!("{}x{}", u0.nrows(), u0.ncols()) });
    }
    let id = linalg::eye(n);
    let a0 = (u0 + &id) * c(0.5, 0.0);
    let b0 = (u0 - &id) * (I * 0.5);
    let nn = n * n;
    let mut y = vec![C64::new(0.0, 0.0); 2 * nn];
    for i in 0..n {
        for j in 0..n {
            y[i * n + j] = a0[(i, j)];
            y[nn + i * n + j] = b0[(i, j)];
        }
    }
    let sys = MatrixSchrodinger::new(q, C64::new(0.0, 0.0), false);
    let states = propagate(&sys, tol, &mut y, 0.0, q.x_max(), &q.x)?;
    let (xi, xix) = states
        .iter()
        .map(|s| (CMat::from_row_slice(n, n, &s[..nn]), CMat::from_row_slice(n, n, &s[nn..])))
        .unzip();
    Ok(ZeroEnergyFrame { x: q.x.clone(), xi, xix, u0: u0.clone() })
}

/// `V = Ξ₀ₓΞ₀⁻¹` node by node; nodes with `cond(Ξ₀) > 1e10` are flagged.
pub fn darboux_potential(frame: &ZeroEnergyFrame) -> Result<DarbouxFactor> {
    let n = frame.u0.nrows();
    let mut v = Vec::with_capacity(frame.x.len());
    let mut singular = Vec::with_capacity(frame.x.len());
    for (xi, xix) in frame.xi.iter().zip(&frame.xix) {
        let cond = linalg::condition_number(xi);
        match (cond <= SINGULAR_COND).then(|| linalg::inverse(xi)).flatten() {
            Some(inv) => {
                v.push(linalg::hermitise(&(xix * inv)));
                singular.push(false);
            }
            None => {
                v.push(linalg::zeros(n));
                singular.push(true);
            }
        }
    }
    if singular.iter().all(|s| *s) {
        return Err(Error::AllSingular);
    }
    let singular_points = frame.x.iter().zip(&singular).filter(|(_, s)| **s).map(|(x, _)| *x).collect();
    Ok(DarbouxFactor { x: frame.x.clone(), v, singular, singular_points })
}

fn uniform_step(x: &[f64]) -> Result<f64> {
    let h = x[1] - x[0];
    if x.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::BadParams("finite differences need a uniform grid".into()));
    }
    Ok(h)
}

/// Derivative of matrix samples at node `i`; `None` when the stencil would
/// touch a flagged node.
fn derivative_at(samples: &[CMat], skip: &[bool], i: usize, h: f64, width: usize) -> Option<CMat> {
    let (start, w) = fd::first_derivative_stencil(i, samples.len(), h, width);
    if (start..start + w.len()).any(|j| skip[j]) {
        return None;
    }
    let mut acc = CMat::zeros(samples[i].nrows(), samples[i].ncols());
    for (o, wv) in w.iter().enumerate() {
        acc += &samples[start + o] * c(*wv, 0.0);
    }
    Some(acc)
}

/// `‖V' + V² - Q‖` at interior nodes whose centred stencil avoids flagged
/// nodes; `None` elsewhere.
pub fn riccati_residual(v: &DarbouxFactor, q: &MatrixPotential) -> Result<Vec<Option<f64>>> {
    if v.x != q.x {
        return Err(Error::ShapeMismatch { expected: "shared grid".into(), got: format!("{} vs {} nodes", v.x.len(), q.x.len()) });
    }
    let h = uniform_step(&v.x)?;
    let len = v.x.len();
    Ok((0..len)
        .map(|i| {
            if !fd::is_centred(i, len, STENCIL) {
                return None;
            }
            let dv = derivative_at(&v.v, &v.singular, i, h, STENCIL)?;
            Some(linalg::norm(&(dv + &v.v[i] * &v.v[i] - &q.q[i])))
        })
        .collect())
}

/// Vector-valued test function sampled on the frame grid.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub values: Vec<CMat>,
}

impl TestFunction {
    pub fn from_fn<F: Fn(f64) -> CMat>(x: &[f64], f: F) -> Self {
        Self { values: x.iter().map(|&t| f(t)).collect() }
    }
}

/// `ψ(x) = e^{-x}(a + x b + x² w)` with `a = P a₀` and
/// `b = P(a - Ha) + P⊥ b₀`, which satisfies `P⊥ψ(0) = 0` and
/// `P(ψ' + Hψ)(0) = 0`.
pub fn domain_function(bc: &BoundaryCondition, a0: &CMat, b0: &CMat, w: &CMat, x: &[f64]) -> TestFunction {
    let a = &bc.p * a0;
    let b = &bc.p * (&a - &bc.h * &a) + &bc.p_perp * b0;
    TestFunction::from_fn(x, |t| (&a + &b * c(t, 0.0) + w * c(t * t, 0.0)) * c((-t).exp(), 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationReport {
    /// `max ‖D*Dψ - (-ψ'' + Qψ)‖` over interior nodes and test functions.
    pub interior: f64,
    /// Boundary residual of `P⊥ψ(0) = 0`, `P(ψ' - Vψ)(0) = 0`.
    pub boundary: f64,
    /// `‖P V(0) + P H‖`, absent when the frame is singular at the origin.
    pub initial: Option<f64>,
}

/// Check `D*D = -d²/dx² + Q` on sampled functions along with the boundary
/// and initial-value relations at the origin.
pub fn factorization_check(v: &DarbouxFactor, bc: &BoundaryCondition, q: &MatrixPotential, tests: &[TestFunction]) -> Result<FactorizationReport> {
    if v.x != q.x {
        return Err(Error::ShapeMismatch { expected: "shared grid".into(), got: format!("{} vs {} nodes", v.x.len(), q.x.len()) });
    }
    let h = uniform_step(&v.x)?;
    let len = v.x.len();
    let none = vec![false; len];
    let v0 = (!v.singular[0]).then(|| v.v[0].clone());
    let initial = v0.as_ref().map(|v0| linalg::norm(&(&bc.p * v0 + &bc.p * &bc.h)));
    let mut interior = 0.0_f64;
    let mut boundary = 0.0_f64;
    for (idx, t) in tests.iter().enumerate() {
        if t.values.len() != len {
            return Err(Error::ShapeMismatch { expected: format!("{len} samples"), got: format!("{}", t.values.len()) });
        }
        let psi = &t.values;
        let dpsi: Vec<CMat> = (0..len).map(|i| derivative_at(psi, &none, i, h, STENCIL).unwrap()).collect();
        let scale = 1.0 + linalg::norm(&psi[0]) + linalg::norm(&dpsi[0]);
        let r = check_domain(bc, v0.as_ref(), &psi[0], &dpsi[0]);
        if r > 1e-6 * scale {
            return Err(Error::DomainViolation { index: idx, reason: format!("boundary residual {r:.3e}") });
        }
        boundary = boundary.max(r);
        let d2psi: Vec<CMat> = (0..len).map(|i| derivative_at(&dpsi, &none, i, h, STENCIL).unwrap()).collect();
        // φ = Dψ, then D*φ
        let phi: Vec<CMat> = (0..len).map(|i| (&dpsi[i] - &v.v[i] * &psi[i]) * I).collect();
        for i in 0..len {
            if !fd::is_centred(i, len, STENCIL) || v.singular[i] {
                continue;
            }
            let Some(dphi) = derivative_at(&phi, &v.singular, i, h, STENCIL) else { continue };
            let dstar = (dphi + &v.v[i] * &phi[i]) * I;
            let l = -&d2psi[i] + &q.q[i] * &psi[i];
            interior = interior.max(linalg::norm(&(dstar - l)));
        }
    }
    Ok(FactorizationReport { interior, boundary, initial })
}

fn check_domain(bc: &BoundaryCondition, v0: Option<&CMat>, psi0: &CMat, dpsi0: &CMat) -> f64 {
    let mut r = linalg::norm(&(&bc.p_perp * psi0));
    if linalg::max_abs(&bc.p) > 0.0 {
        r += match v0 {
            Some(v0) => linalg::norm(&(&bc.p * (dpsi0 - v0 * psi0))),
            None => linalg::norm(&(&bc.p * (dpsi0 + &bc.h * psi0))),
        };
    }
    r
}

/// Partner `DD* = -d²/dx² + Q - 2V'` with conditions `Pφ(0) = 0`,
/// `P⊥(φ' + Vφ)(0) = 0`, encoded as a unitary via `(P̃, H̃) = (P⊥, P⊥V(0)P⊥)`.
pub fn partner_operator(v: &DarbouxFactor, q: &MatrixPotential, bc: &BoundaryCondition) -> Result<(MatrixPotential, BoundaryCondition)> {
    if v.singular[0] {
        return Err(Error::SingularAtOrigin);
    }
    if let Some(i) = v.singular.iter().position(|s| *s) {
        return Err(Error::DomainViolation { index: i, reason: format!("frame singular at x = {}", v.x[i]) });
    }
    if v.x != q.x {
        return Err(Error::ShapeMismatch { expected: "shared grid".into(), got: format!("{} vs {} nodes", v.x.len(), q.x.len()) });
    }
    let h = uniform_step(&v.x)?;
    let none = vec![false; v.x.len()];
    let qt: Vec<CMat> = (0..v.x.len())
        .map(|i| linalg::hermitise(&(&q.q[i] - derivative_at(&v.v, &none, i, h, STENCIL).unwrap() * c(2.0, 0.0))))
        .collect();
    let ht = &bc.p_perp * &v.v[0] * &bc.p_perp;
    let partner_bc = BoundaryCondition::from_projection_robin(&bc.p_perp, &ht)?;
    Ok((MatrixPotential::new(v.x.clone(), qt)?, partner_bc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> CMat {
        CMat::from_element(1, 1, c(v, 0.0))
    }

    #[test]
    fn choose_u0_constraint() {
        let d = BoundaryCondition::dirichlet(2);
        assert!(choose_u0(&d, Some(&linalg::eye(2))).is_ok());
        let nm = BoundaryCondition::neumann(2);
        assert_eq!(choose_u0(&nm, None).unwrap(), linalg::eye(2));
        let bc = BoundaryCondition::new(linalg::diag(&[I, c(-1.0, 0.0)])).unwrap();
        assert!(choose_u0(&bc, Some(&linalg::diag(&[I, c(1.0, 0.0)]))).is_ok());
        assert!(matches!(choose_u0(&bc, Some(&linalg::diag(&[c(1.0, 0.0), c(1.0, 0.0)]))), Err(Error::ConstraintViolated { .. })));
    }

    #[test]
    fn free_frames() {
        let q = MatrixPotential::uniform(1.0, 11, |_| linalg::zeros(2)).unwrap();
        let f = zero_energy_frame(&q, &linalg::eye(2)).unwrap();
        assert!(f.xi.iter().all(|m| linalg::max_abs(&(m - linalg::eye(2))) < 1e-14));
        let f = zero_energy_frame(&q, &-linalg::eye(2)).unwrap();
        for (x, m) in f.x.iter().zip(&f.xi) {
            assert!(linalg::max_abs(&(m - linalg::eye(2) * c(0.0, -x))) < 1e-13);
        }
        let v = darboux_potential(&f).unwrap();
        assert!(v.singular[0] && !v.singular[1]);
        assert!((v.v[5][(0, 0)].re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_frame() {
        let q = MatrixPotential::uniform(1.0, 101, |_| scalar(-4.0)).unwrap();
        let f = zero_energy_frame(&q, &scalar(1.0)).unwrap();
        for (x, m) in f.x.iter().zip(&f.xi) {
            assert!((m[(0, 0)].re - (2.0 * x).cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn robin_frame_and_partner() {
        let q = MatrixPotential::uniform(2.0, 2001, |_| linalg::zeros(1)).unwrap();
        let bc = BoundaryCondition::new(CMat::from_element(1, 1, c(0.0, -1.0))).unwrap();
        let f = zero_energy_frame(&q, &bc.u).unwrap();
        let v = darboux_potential(&f).unwrap();
        for (x, m) in v.x.iter().zip(&v.v) {
            assert!((m[(0, 0)].re - 1.0 / (1.0 + x)).abs() < 1e-10);
        }
        let r = riccati_residual(&v, &q).unwrap();
        assert!(r.iter().flatten().all(|e| *e < 1e-6));
        assert!(r[0].is_none() && r[3].is_some());
        let tf = TestFunction::from_fn(&q.x, |t| scalar((1.0 + 2.0 * t) * (-t).exp()));
        let rep = factorization_check(&v, &bc, &q, &[tf]).unwrap();
        assert!(rep.interior < 1e-6 && rep.boundary < 1e-6 && rep.initial.unwrap() < 1e-9, "{rep:?}");
        let bad = TestFunction::from_fn(&q.x, |t| scalar((1.0 + t) * (-t).exp()));
        assert!(matches!(factorization_check(&v, &bc, &q, &[bad]), Err(Error::DomainViolation { .. })));
        let (qt, pbc) = partner_operator(&v, &q, &bc).unwrap();
        for (x, m) in qt.x.iter().zip(&qt.q) {
            assert!((m[(0, 0)].re - 2.0 / ((1.0 + x) * (1.0 + x))).abs() < 1e-8);
        }
        assert!(linalg::max_abs(&(pbc.u + linalg::eye(1))) < 1e-12);
    }

    #[test]
    fn neumann_partner_is_dirichlet() {
        let q = MatrixPotential::uniform(1.0, 101, |_| linalg::zeros(2)).unwrap();
        let bc = BoundaryCondition::neumann(2);
        let v = darboux_potential(&zero_energy_frame(&q, &bc.u).unwrap()).unwrap();
        let (qt, pbc) = partner_operator(&v, &q, &bc).unwrap();
        assert!(qt.is_zero());
        assert!(linalg::max_abs(&(pbc.u + linalg::eye(2))) < 1e-12);
        let dir = BoundaryCondition::dirichlet(2);
        let vd = darboux_potential(&zero_energy_frame(&q, &dir.u).unwrap()).unwrap();
        assert!(matches!(partner_operator(&vd, &q, &dir), Err(Error::SingularAtOrigin)));
    }
}
