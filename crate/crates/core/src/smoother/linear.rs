use nalgebra::{Cholesky, Matrix3, Vector3};

use crate::error::{Error, Result};

/// Symmetric block-tridiagonal system with 3x3 blocks: `diag[i]` on the
/// diagonal and `upper[i]` coupling node `i` to node `i + 1`.
#[derive(Debug, Clone)]
pub(crate) struct BlockTridiagonal {
    pub diag: Vec<Matrix3<f64>>,
    pub upper: Vec<Matrix3<f64>>,
    pub rhs: Vec<Vector3<f64>>,
}

impl BlockTridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![Matrix3::zeros(); n],
            upper: vec![Matrix3::zeros(); n.saturating_sub(1)],
            rhs: vec![Vector3::zeros(); n],
        }
    }

    /// Adds `lambda * diag(H_ii)` to every diagonal block.
    pub fn damp(&mut self, lambda: f64) {
        for d in &mut self.diag {
            for k in 0..3 {
                d[(k, k)] *= 1.0 + lambda;
            }
        }
    }

    /// Block forward elimination and back substitution.
    pub fn solve(&self) -> Result<Vec<Vector3<f64>>> {
        let n = self.diag.len();
        let mut schur: Vec<Cholesky<f64, nalgebra::U3>> = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let (s, yi) = if i == 0 {
                (self.diag[0], self.rhs[0])
            } else {
                let u = &self.upper[i - 1];
                // L = U^T S^-1, S_i = D_i - L U, y_i = b_i - L y_{i-1}
                let sinv_u = schur[i - 1].solve(u);
                let sinv_y = schur[i - 1].solve(&y[i - 1]);
                (self.diag[i] - u.transpose() * sinv_u, self.rhs[i] - u.transpose() * sinv_y)
            };
            let chol = Cholesky::new(s).ok_or(Error::Underdetermined { node: i })?;
            if chol.l().diagonal().iter().any(|d| !(*d > 1e-150)) {
                return Err(Error::Underdetermined { node: i });
            }
            schur.push(chol);
            y.push(yi);
        }
        let mut x = vec![Vector3::zeros(); n];
        for i in (0..n).rev() {
            let rhs = if i + 1 < n { y[i] - self.upper[i] * x[i + 1] } else { y[i] };
            x[i] = schur[i].solve(&rhs);
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_solve() {
        let n = 6;
        let mut sys = BlockTridiagonal::zeros(n);
        let mut dense = DMatrix::zeros(3 * n, 3 * n);
        let mut seed = 1u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..n {
            let a = Matrix3::from_fn(|_, _| rnd());
            sys.diag[i] = a * a.transpose() + Matrix3::identity() * 4.0;
            sys.rhs[i] = Vector3::from_fn(|_, _| rnd());
            if i + 1 < n {
                sys.upper[i] = Matrix3::from_fn(|_, _| rnd());
            }
        }
        for i in 0..n {
            dense.view_mut((3 * i, 3 * i), (3, 3)).copy_from(&sys.diag[i]);
            if i + 1 < n {
                dense.view_mut((3 * i, 3 * i + 3), (3, 3)).copy_from(&sys.upper[i]);
                dense.view_mut((3 * i + 3, 3 * i), (3, 3)).copy_from(&sys.upper[i].transpose());
            }
        }
        let b = DVector::from_iterator(3 * n, sys.rhs.iter().flat_map(|v| v.iter().copied()));
        let expect = dense.lu().solve(&b).unwrap();
        let got = sys.solve().unwrap();
        for (i, g) in got.iter().enumerate() {
            assert!((g - expect.fixed_rows::<3>(3 * i)).amax() < 1e-12);
        }
    }

    #[test]
    fn singular_block_is_reported() {
        let mut sys = BlockTridiagonal::zeros(3);
        sys.diag[0] = Matrix3::identity();
        sys.diag[1] = Matrix3::identity();
        assert!(matches!(sys.solve(), Err(Error::Underdetermined { node: 2 })));
    }
}
