//! Uniform-grid quadrature: trapezoid rule with Gregory end corrections.

use nalgebra::{DMatrix, DVector};

/// Default number of corrected nodes at each end (exact for degree < 8).
pub const GREGORY_ORDER: usize = 8;

// B_{q+1}/(q+1) for odd q, i.e. B_2/2, B_4/4, ...
fn bernoulli_moment(q: usize) -> f64 {
    match q {
        1 => 1.0 / 12.0,
        3 => -1.0 / 120.0,
        5 => 1.0 / 252.0,
        7 => -1.0 / 240.0,
        9 => 1.0 / 132.0,
        11 => -691.0 / 32760.0,
        _ => 0.0,
    }
}

/// Corrections added to the first `m` trapezoid weights (unit spacing).
fn end_corrections(m: usize) -> Vec<f64> {
    if m < 2 {
        return vec![0.0; m];
    }
    let mut v = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for q in 0..m {
        for i in 0..m {
            v[(q, i)] = (i as f64).powi(q as i32);
        }
        rhs[q] = if q % 2 == 1 { bernoulli_moment(q) } else { 0.0 };
    }
    // 0^0 = 1 for the constant row.
    v[(0, 0)] = 1.0;
    let sol = v.lu().solve(&rhs).expect("Vandermonde system is nonsingular");
    sol.iter().copied().collect()
}

/// Quadrature weights for `count` equispaced nodes with spacing `h`.
///
/// Trapezoid weights plus Gregory end corrections on `order` nodes at each
/// end; the order is reduced automatically when the grid is short.
pub fn gregory_weights(count: usize, h: f64, order: usize) -> Vec<f64> {
    match count {
        0 => return Vec::new(),
        1 => return vec![0.0],
        _ => {}
    }
    let mut w = vec![h; count];
    w[0] = 0.5 * h;
    w[count - 1] = 0.5 * h;
    let m = order.min(count / 2).max(1);
    if m >= 2 {
        let corr = end_corrections(m);
        for (i, cw) in corr.iter().enumerate() {
            w[i] += h * cw;
            w[count - 1 - i] += h * cw;
        }
    }
    w
}
