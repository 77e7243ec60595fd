//! Small dense helpers over row-major `f64` slices.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::rng::{self, Rng};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `row · M` for a row vector and a row-major `d×d` matrix.
pub fn row_times(row: &[f64], m: &[f64], out: &mut [f64]) {
    let d = row.len();
    out.iter_mut().for_each(|x| *x = 0.0);
    for (k, &r) in row.iter().enumerate() {
        let mrow = &m[k * d..(k + 1) * d];
        for (o, &v) in out.iter_mut().zip(mrow) {
            *o += r * v;
        }
    }
}

/// Haar-distributed random orthogonal `d×d` matrix (row-major), via QR of a
/// Gaussian matrix with the sign of `diag(R)` folded into `Q`.
pub fn random_orthogonal(rng: &mut Rng, d: usize) -> Vec<f64> {
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng::normal(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    to_row_major(&q)
}

pub fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// `‖M Mᵀ − I‖_F` for a row-major square matrix.
pub fn orthogonality_defect(m: &[f64], d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            let v = dot(&m[i * d..(i + 1) * d], &m[j * d..(j + 1) * d])
                - if i == j { 1.0 } else { 0.0 };
            s += v * v;
        }
    }
    libm::sqrt(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = rng::seeded(11);
        for d in [1, 2, 5, 50] {
            let q = random_orthogonal(&mut rng, d);
            assert!(orthogonality_defect(&q, d) < 1e-12);
        }
    }

    #[test]
    fn row_times_identity() {
        let m = [1.0, 0.0, 0.0, 1.0];
        let mut out = [0.0; 2];
        row_times(&[3.0, -2.0], &m, &mut out);
        assert_eq!(out, [3.0, -2.0]);
    }
}
