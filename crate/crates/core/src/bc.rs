//! Self-adjoint vertex conditions parameterised by a unitary matrix `U`:
//!
//! ```text
//! (i/2)(U^H - I) psi(0) + (1/2)(U^H + I) psi_x(0) = 0
//! ```
//!
//! Everything other modules need (`A`, `B`, the high-energy limit `U_hat`,
//! the projections `P`, `P_perp` and the Robin matrix `H`) is derived once
//! at construction.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, I};

/// Unitarity tolerance accepted by [`BoundaryCondition::new`].
pub const UNITARY_TOL: f64 = 1e-10;
/// Eigenvalues `z` of `U` with `|z + 1|` below this are treated as `-1`.
pub const MINUS_ONE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandardKind {
    Dirichlet,
    Neumann,
    Kirchhoff,
    Robin,
}

impl std::str::FromStr for StandardKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(Self::Dirichlet),
            "neumann" => Ok(Self::Neumann),
            "kirchhoff" => Ok(Self::Kirchhoff),
            "robin" => Ok(Self::Robin),
            other => Err(Error::BadParams(format!("unknown boundary condition kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryCondition {
    pub n: usize,
    pub u: CMat,
    /// `(U + I)/2`, the value of the regular solution at the origin.
    pub a: CMat,
    /// `i(U - I)/2`, its derivative at the origin.
    pub b: CMat,
    pub u_hat: CMat,
    pub p: CMat,
    pub p_perp: CMat,
    pub h: CMat,
}

impl BoundaryCondition {
    pub fn new(u: CMat) -> Result<Self> {
        Self::with_threshold(u, MINUS_ONE_TOL)
    }

    pub fn with_threshold(u: CMat, minus_one_tol: f64) -> Result<Self> {
        if u.nrows() != u.ncols() || u.nrows() == 0 {
            return Err(Error::ShapeMismatch {
                expected: "nonempty square matrix".into(),
                got: format!("{}x{}", u.nrows(), u.ncols()),
            });
        }
        let defect = linalg::unitarity_defect(&u);
        if defect > UNITARY_TOL {
            return Err(Error::NotUnitary { norm: defect });
        }
        let n = u.nrows();
        let id = linalg::eye(n);
        let a = (&u + &id) * c(0.5, 0.0);
        let b = (&u - &id) * (I * 0.5);
        let u_hat = high_energy_limit_with(&u, minus_one_tol)?;
        let p = (&id + &u_hat) * c(0.5, 0.0);
        let p_perp = (&id - &u_hat) * c(0.5, 0.0);
        let h = robin_from_parts(&u, &p, &p_perp);
        Ok(Self { n, u, a, b, u_hat, p, p_perp, h })
    }

    /// Build the condition `P_perp psi(0) = 0`, `P (psi_x + H psi)(0) = 0`
    /// from an orthogonal projection `p` and a hermitian `h` living on its
    /// range. Inverse of the `U -> (P, H)` map.
    pub fn from_projection_robin(p: &CMat, h: &CMat) -> Result<Self> {
        let n = p.nrows();
        let id = linalg::eye(n);
        let p_perp = &id - p;
        let h = p * linalg::hermitise(h) * p;
        let cayley_den = linalg::inverse(&(&id - &h * I)).ok_or_else(|| Error::BadParams("I - iH is singular".into()))?;
        let u = (&id + &h * I) * cayley_den - p_perp * c(2.0, 0.0);
        Self::new(linalg::polar_unitary(&u))
    }

    pub fn dirichlet(n: usize) -> Self {
        standard_bc(StandardKind::Dirichlet, n, None).expect("dirichlet")
    }

    pub fn neumann(n: usize) -> Self {
        standard_bc(StandardKind::Neumann, n, None).expect("neumann")
    }

    pub fn kirchhoff(n: usize) -> Self {
        standard_bc(StandardKind::Kirchhoff, n, None).expect("kirchhoff")
    }

    /// Residual of the defining condition for boundary data with `m` columns.
    pub fn residual(&self, psi0: &CMat, psix0: &CMat) -> Result<f64> {
        check_bc(self, psi0, psix0)
    }

    pub fn is_diagonal(&self) -> bool {
        linalg::off_diagonal_max(&self.u) < 1e-14
    }
}

pub fn make_bc(u: CMat) -> Result<BoundaryCondition> {
    BoundaryCondition::new(u)
}

/// Dirichlet `-I`, Neumann `I`, Kirchhoff `(2/n)J - I`, or Robin
/// `diag(exp(i phi_j))` with phases in `(-pi, pi]`.
pub fn standard_bc(kind: StandardKind, n: usize, phases: Option<&[f64]>) -> Result<BoundaryCondition> {
    if n == 0 {
        return Err(Error::BadParams("channel count must be at least 1".into()));
    }
    let u = match kind {
        StandardKind::Dirichlet => -linalg::eye(n),
        StandardKind::Neumann => linalg::eye(n),
        StandardKind::Kirchhoff => linalg::ones(n) * c(2.0 / n as f64, 0.0) - linalg::eye(n),
        StandardKind::Robin => {
            let phases = phases.ok_or_else(|| Error::BadParams("robin requires a phase list".into()))?;
            if phases.len() != n {
                return Err(Error::BadParams(format!("robin requires {n} phases, got {}", phases.len())));
            }
            if let Some(bad) = phases.iter().find(|p| !(**p > -PI && **p <= PI)) {
                return Err(Error::BadParams(format!("robin phase {bad} outside (-pi, pi]")));
            }
            linalg::diag(&phases.iter().map(|&p| C64::from_polar(1.0, p)).collect::<Vec<_>>())
        }
    };
    BoundaryCondition::new(u)
}

pub fn high_energy_limit(u: &CMat) -> Result<CMat> {
    high_energy_limit_with(u, MINUS_ONE_TOL)
}

/// Map every eigenvalue of `U` to `+1` except those at `-1`.
///
/// `U` is normal, so the singular values of `U + I` are `|z + 1|` and the
/// `-1` eigenspace is the numerical null space of `U + I`.
pub fn high_energy_limit_with(u: &CMat, minus_one_tol: f64) -> Result<CMat> {
    let defect = linalg::unitarity_defect(u);
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary { norm: defect });
    }
    let n = u.nrows();
    let id = linalg::eye(n);
    let kernel = linalg::null_space(&(u + &id), minus_one_tol);
    let proj = &kernel * kernel.adjoint();
    Ok(linalg::hermitise(&(&id - proj * c(2.0, 0.0))))
}

pub fn robin_matrix(bc: &BoundaryCondition) -> CMat {
    bc.h.clone()
}

// H = -i (U - I)(U + I + P_perp)^{-1} P, i.e. tan(phi/2) on each eigenvector
// e^{i phi} != -1 and zero on the range of P_perp.
fn robin_from_parts(u: &CMat, p: &CMat, p_perp: &CMat) -> CMat {
    let id = linalg::eye(u.nrows());
    let den = linalg::inverse(&(u + &id + p_perp)).expect("U + I + P_perp is invertible");
    let h = (u - &id) * den * p * (-I);
    let h = linalg::hermitise(&h);
    p * h * p
}

/// `|| (i/2)(U^H - I) psi0 + (1/2)(U^H + I) psix0 ||`.
pub fn check_bc(bc: &BoundaryCondition, psi0: &CMat, psix0: &CMat) -> Result<f64> {
    if psi0.nrows() != bc.n || psix0.nrows() != bc.n || psi0.ncols() != psix0.ncols() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}xm pair", bc.n),
            got: format!("{}x{} and {}x{}", psi0.nrows(), psi0.ncols(), psix0.nrows(), psix0.ncols()),
        });
    }
    let id = linalg::eye(bc.n);
    let ud = bc.u.adjoint();
    let r = (&ud - &id) * psi0 * (I * 0.5) + (&ud + &id) * psix0 * c(0.5, 0.0);
    Ok(linalg::norm(&r))
}
