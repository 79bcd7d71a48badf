//! Hermitian matrix potentials sampled on a half-line grid.
//!
//! Between nodes the samples are joined by cubic Hermite pieces whose slopes
//! come from five-point differences, so the interpolant is C¹. Beyond the
//! last node the potential is identically zero.

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};
use crate::numerics::fd;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const DIAGONAL_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct MatrixPotential {
    pub n: usize,
    pub x: Vec<f64>,
    pub q: Vec<CMat>,
    pub diagonal: bool,
    flat: Vec<C64>,
    slopes: Vec<C64>,
    uniform_h: Option<f64>,
}

impl MatrixPotential {
    pub fn new(x: Vec<f64>, q: Vec<CMat>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::BadParams("potential grid needs at least two nodes".into()));
        }
        if x.len() != q.len() {
            return Err(Error::ShapeMismatch { expected: format!("{} samples", x.len()), got: format!("{}", q.len()) });
        }
        if x[0] != 0.0 {
            return Err(Error::BadParams(format!("potential grid must start at 0, got {}", x[0])));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::BadParams("potential grid must be strictly increasing".into()));
        }
        let n = q[0].nrows();
        for (i, m) in q.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::ShapeMismatch { expected: format!("{n}x{n}"), got: format!("{}x{} at node {i}", m.nrows(), m.ncols()) });
            }
            let d = linalg::max_abs(&(m - m.adjoint()));
            if d > HERMITIAN_TOL * (1.0 + linalg::max_abs(m)) {
                return Err(Error::DomainViolation { index: i, reason: format!("sample not hermitian (defect {d:.3e})") });
            }
        }
        let diagonal = q.iter().all(|m| linalg::off_diagonal_max(m) < DIAGONAL_TOL);
        let nn = n * n;
        let mut flat = Vec::with_capacity(nn * x.len());
        for m in &q {
            for i in 0..n {
                for j in 0..n {
                    flat.push(m[(i, j)]);
                }
            }
        }
        let len = x.len();
        let mut slopes = vec![C64::new(0.0, 0.0); nn * len];
        let width = len.min(5);
        for p in 0..len {
            let lo = p.saturating_sub(width / 2).min(len - width);
            let w = fd::fornberg(x[p], &x[lo..lo + width], 1);
            for (o, wv) in w.iter().enumerate() {
                for e in 0..nn {
                    slopes[p * nn + e] += flat[(lo + o) * nn + e] * *wv;
                }
            }
        }
        let h0 = x[1] - x[0];
        let uniform_h = x.windows(2).all(|w| ((w[1] - w[0]) - h0).abs() <= 1e-12 * h0.max(1.0)).then_some(h0);
        Ok(Self { n, x, q, diagonal, flat, slopes, uniform_h })
    }

    /// Sample `f` on `count` equally spaced nodes of `[0, x_max]`.
    pub fn uniform<F: Fn(f64) -> CMat>(x_max: f64, count: usize, f: F) -> Result<Self> {
        if !(x_max > 0.0) || count < 2 {
            return Err(Error::BadParams("uniform grid needs x_max > 0 and at least two nodes".into()));
        }
        let x: Vec<f64> = (0..count).map(|i| x_max * i as f64 / (count - 1) as f64).collect();
        let q = x.iter().map(|&t| f(t)).collect();
        Self::new(x, q)
    }

    pub fn zero(n: usize, x_max: f64) -> Self {
        Self::uniform(x_max, 2, |_| linalg::zeros(n)).expect("zero potential")
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.flat.iter().all(|z| *z == C64::new(0.0, 0.0))
    }

    pub fn sup_norm(&self) -> f64 {
        self.q.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    /// Node index `i` with `x[i] <= t < x[i+1]`, clamped to the last cell.
    pub fn cell(&self, t: f64) -> usize {
        let last = self.x.len() - 2;
        if let Some(h) = self.uniform_h {
            return ((t / h).floor().max(0.0) as usize).min(last);
        }
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(last),
            Err(0) => 0,
            Err(i) => (i - 1).min(last),
        }
    }

    /// Row-major `Q(t)` written into `out` (length `n²`).
    pub fn eval_into(&self, t: f64, out: &mut [C64]) {
        let nn = self.n * self.n;
        if t > self.x_max() || t < 0.0 {
            out[..nn].fill(C64::new(0.0, 0.0));
            return;
        }
        let i = self.cell(t);
        self.eval_cell_into(i, t, out);
    }

    /// Evaluate with a known cell, avoiding the lookup.
    pub fn eval_cell_into(&self, i: usize, t: f64, out: &mut [C64]) {
        let nn = self.n * self.n;
        let h = self.x[i + 1] - self.x[i];
        let s = ((t - self.x[i]) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = (s3 - 2.0 * s2 + s) * h;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = (s3 - s2) * h;
        let a = i * nn;
        let b = (i + 1) * nn;
        for e in 0..nn {
            out[e] = self.flat[a + e] * h00 + self.slopes[a + e] * h10 + self.flat[b + e] * h01 + self.slopes[b + e] * h11;
        }
    }

    pub fn eval(&self, t: f64) -> CMat {
        let mut buf = vec![C64::new(0.0, 0.0); self.n * self.n];
        self.eval_into(t, &mut buf);
        CMat::from_row_slice(self.n, self.n, &buf)
    }

    /// Scalar potential of channel `j` when the potential is diagonal.
    pub fn channel(&self, j: usize) -> Result<MatrixPotential> {
        if j >= self.n {
            return Err(Error::BadParams(format!("channel {j} out of range for n = {}", self.n)));
        }
        let q = self.q.iter().map(|m| CMat::from_element(1, 1, c(m[(j, j)].re, 0.0))).collect();
        MatrixPotential::new(self.x.clone(), q)
    }

    /// Assemble a diagonal potential from scalar channels on a shared grid.
    pub fn from_channels(channels: &[MatrixPotential]) -> Result<Self> {
        let first = channels.first().ok_or_else(|| Error::BadParams("no channels".into()))?;
        let n = channels.len();
        for ch in channels {
            if ch.n != 1 || ch.x != first.x {
                return Err(Error::ShapeMismatch { expected: "scalar channels on a shared grid".into(), got: format!("n = {}, {} nodes", ch.n, ch.x.len()) });
            }
        }
        let q = (0..first.x.len())
            .map(|p| linalg::diag(&channels.iter().map(|ch| ch.q[p][(0, 0)]).collect::<Vec<_>>()))
            .collect();
        let _ = n;
        MatrixPotential::new(first.x.clone(), q)
    }
}

/// Built-in analytic shapes. Amplitudes are hermitian matrices; a well is a
/// negative amplitude.
#[derive(Debug, Clone)]
pub enum Preset {
    Zero { n: usize },
    /// `Q = amplitude` on `[0, width]`; the grid stops at `width`.
    ConstantWell { amplitude: CMat, width: f64 },
    /// `Q = amplitude · exp(-((x - center)/width)²)`.
    Gaussian { amplitude: CMat, center: f64, width: f64 },
    /// `Q = amplitude · sech²((x - center)/width)`.
    Sech2 { amplitude: CMat, center: f64, width: f64 },
}

impl Preset {
    pub fn n(&self) -> usize {
        match self {
            Preset::Zero { n } => *n,
            Preset::ConstantWell { amplitude, .. } | Preset::Gaussian { amplitude, .. } | Preset::Sech2 { amplitude, .. } => amplitude.nrows(),
        }
    }

    pub fn value(&self, x: f64) -> CMat {
        match self {
            Preset::Zero { n } => linalg::zeros(*n),
            Preset::ConstantWell { amplitude, width } => {
                if x <= *width {
                    amplitude.clone()
                } else {
                    linalg::zeros(amplitude.nrows())
                }
            }
            Preset::Gaussian { amplitude, center, width } => {
                let s = (x - center) / width;
                amplitude * c((-s * s).exp(), 0.0)
            }
            Preset::Sech2 { amplitude, center, width } => {
                let s = 1.0 / ((x - center) / width).cosh();
                amplitude * c(s * s, 0.0)
            }
        }
    }

    /// Sample on `count` uniform nodes of `[0, x_max]`. The constant well
    /// ignores `x_max` and ends at its own width so the jump sits on the
    /// truncation point.
    pub fn sample(&self, x_max: f64, count: usize) -> Result<MatrixPotential> {
        if let Some(a) = self.amplitude() {
            if linalg::hermiticity_defect(a) > HERMITIAN_TOL * (1.0 + linalg::max_abs(a)) {
                return Err(Error::BadParams("preset amplitude must be hermitian".into()));
            }
        }
        let end = match self {
            Preset::ConstantWell { width, .. } => {
                if !(*width > 0.0) {
                    return Err(Error::BadParams("well width must be positive".into()));
                }
                *width
            }
            Preset::Gaussian { width, .. } | Preset::Sech2 { width, .. } if !(*width > 0.0) => {
                return Err(Error::BadParams("preset width must be positive".into()));
            }
            _ => x_max,
        };
        MatrixPotential::uniform(end, count, |x| self.value(x))
    }

    fn amplitude(&self) -> Option<&CMat> {
        match self {
            Preset::Zero { .. } => None,
            Preset::ConstantWell { amplitude, .. } | Preset::Gaussian { amplitude, .. } | Preset::Sech2 { amplitude, .. } => Some(amplitude),
        }
    }
}
