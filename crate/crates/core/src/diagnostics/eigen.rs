//! Closed-form eigenvalues of small symmetric matrices.

use std::f64::consts::PI;

/// Eigenvalues of the leading `dim x dim` block of the symmetric `m`, in
/// descending order. Unused slots are NaN.
pub fn symmetric_eigenvalues(m: &[[f64; 3]; 3], dim: usize) -> [f64; 3] {
    match dim {
        1 => [m[0][0], f64::NAN, f64::NAN],
        2 => {
            let (a, b, d) = (m[0][0], m[0][1], m[1][1]);
            let mean = 0.5 * (a + d);
            let r = (0.5 * (a - d)).hypot(b);
            [mean + r, mean - r, f64::NAN]
        }
        3 => eig3(m),
        _ => panic!("dimension {dim} outside 1..=3"),
    }
}

/// Largest eigenvalue of the leading `dim x dim` block.
pub fn largest_eigenvalue(m: &[[f64; 3]; 3], dim: usize) -> f64 {
    symmetric_eigenvalues(m, dim)[0]
}

// trigonometric solution of the characteristic cubic
fn eig3(m: &[[f64; 3]; 3]) -> [f64; 3] {
    let off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    if off == 0.0 {
        let mut d = [m[0][0], m[1][1], m[2][2]];
        d.sort_by(|a, b| b.total_cmp(a));
        return d;
    }
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * off;
    let p = (p2 / 6.0).sqrt();
    let mut b = *m;
    for (i, row) in b.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            if i == j {
                *x -= q;
            }
            *x /= p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (0.5 * det).clamp(-1.0, 1.0).acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let mid = 3.0 * q - hi - lo;
    [hi, mid, lo]
}
