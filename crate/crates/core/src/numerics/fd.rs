//! Finite-difference weights (Fornberg's recursion) and grid derivatives.

/// Weights for the `order`-th derivative at `x0` from values at `nodes`.
pub fn fornberg(x0: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[order]).collect()
}

/// Stencil (start index, weights) for the first derivative at node `i` of a
/// grid of `len` nodes with spacing `h`, using `width` nodes (odd). Centred
/// where possible, shifted near the ends.
pub fn first_derivative_stencil(i: usize, len: usize, h: f64, width: usize) -> (usize, Vec<f64>) {
    let width = width.min(len);
    let half = width / 2;
    let start = if i < half {
        0
    } else if i + (width - 1 - half) >= len {
        len - width
    } else {
        i - half
    };
    let nodes: Vec<f64> = (start..start + width).map(|j| (j as f64 - i as f64) * h).collect();
    (start, fornberg(0.0, &nodes, 1))
}

/// Whether node `i` admits a centred stencil of `width` nodes.
pub fn is_centred(i: usize, len: usize, width: usize) -> bool {
    let half = width / 2;
    i >= half && i + half < len
}
