//! Truncated SVD of sparse matrices.
//!
//! Small matrices go through nalgebra's dense SVD. Larger ones use
//! randomized subspace iteration: a Gaussian sketch, a fixed number of
//! power iterations with QR re-orthonormalisation, then a dense SVD of the
//! projected matrix. All randomness comes from the seed, so results are
//! reproducible.

use nalgebra::{DMatrix, SVD};
use rand::distr::Distribution;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Rows must list strictly increasing column indices below `ncols`.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            let mut last = None;
            for (j, v) in row {
                if j >= ncols || last.is_some_and(|l| l >= j) {
                    return Err(Error::invalid(format!("row {i}: bad column index {j}")));
                }
                last = Some(j);
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter(|&j| m[(i, j)] != 0.0)
                    .map(|j| (j, m[(i, j)]))
                    .collect()
            })
            .collect();
        Self::from_rows(m.ncols(), rows).expect("dense rows are ordered")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, vals) = self.row(i);
        match idx.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (idx, vals) = self.row(i);
            for (&j, &v) in idx.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.ncols];
        for i in 0..self.nrows {
            let (idx, vals) = self.row(i);
            for (&j, &v) in idx.iter().zip(vals) {
                rows[j].push((i, v));
            }
        }
        CsrMatrix::from_rows(self.nrows, rows).expect("transposed rows are ordered")
    }

    /// `self * x` for a dense `x` with `ncols` rows.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.ncols, "dimension mismatch");
        let l = x.ncols();
        // rows of x, contiguous
        let xt = x.transpose();
        let xs = xt.as_slice();
        let mut out = vec![0.0; self.nrows * l];
        out.par_chunks_mut(l.max(1)).enumerate().for_each(|(i, dst)| {
            let (idx, vals) = self.row(i);
            for (&j, &v) in idx.iter().zip(vals) {
                for (d, s) in dst.iter_mut().zip(&xs[j * l..(j + 1) * l]) {
                    *d += v * s;
                }
            }
        });
        DMatrix::from_row_slice(self.nrows, l, &out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SvdMethod {
    /// Dense below [`DENSE_LIMIT`] rows/columns or when the sketch would
    /// cover the whole matrix, randomized otherwise.
    Auto,
    Dense,
    Randomized {
        oversample: usize,
        power_iters: usize,
    },
}

/// Largest dimension routed to the dense solver by [`SvdMethod::Auto`].
pub const DENSE_LIMIT: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdOptions {
    pub method: SvdMethod,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            method: SvdMethod::Auto,
            seed: 0,
        }
    }
}

/// Top singular triplets, singular values descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub left: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub right: DMatrix<f64>,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `left * diag(sigma) * right^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.left.clone();
        for (k, s) in self.singular_values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(*s);
        }
        scaled * self.right.transpose()
    }
}

/// Top-`k` singular triplets of `a`.
///
/// Signs are fixed so that the largest-magnitude entry of every left
/// singular vector is positive.
pub fn truncated_svd(a: &CsrMatrix, k: usize, opts: &SvdOptions) -> Result<Svd> {
    let min_dim = a.nrows().min(a.ncols());
    if k == 0 || k > min_dim {
        return Err(Error::invalid(format!(
            "rank {k} must be between 1 and {min_dim}"
        )));
    }
    let mut svd = match opts.method {
        SvdMethod::Dense => dense_svd(&a.to_dense(), k),
        SvdMethod::Auto => {
            let sketch = k + k.max(10);
            if a.nrows().max(a.ncols()) <= DENSE_LIMIT || sketch >= min_dim {
                dense_svd(&a.to_dense(), k)
            } else {
                randomized_svd(a, k, k.max(10), 10, opts.seed)
            }
        }
        SvdMethod::Randomized {
            oversample,
            power_iters,
        } => {
            if k + oversample >= min_dim {
                dense_svd(&a.to_dense(), k)
            } else {
                randomized_svd(a, k, oversample, power_iters, opts.seed)
            }
        }
    };
    fix_signs(&mut svd);
    Ok(svd)
}

fn dense_svd(m: &DMatrix<f64>, k: usize) -> Svd {
    let SVD {
        u,
        v_t,
        singular_values,
    } = SVD::new(m.clone(), true, true);
    let u = u.expect("left vectors requested");
    let v_t = v_t.expect("right vectors requested");
    let mut order: Vec<usize> = (0..singular_values.len()).collect();
    order.sort_by(|&a, &b| singular_values[b].total_cmp(&singular_values[a]).then(a.cmp(&b)));
    order.truncate(k);
    let left = DMatrix::from_columns(&order.iter().map(|&c| u.column(c)).collect::<Vec<_>>());
    let right =
        DMatrix::from_columns(&order.iter().map(|&c| v_t.row(c).transpose()).collect::<Vec<_>>());
    Svd {
        left,
        singular_values: order.iter().map(|&c| singular_values[c]).collect(),
        right,
    }
}

fn orthonormal_basis(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

fn randomized_svd(a: &CsrMatrix, k: usize, oversample: usize, power_iters: usize, seed: u64) -> Svd {
    let l = k + oversample;
    let mut rng = rng::named_stream(seed, "svd");
    let omega = DMatrix::from_fn(a.ncols(), l, |_, _| StandardNormal.sample(&mut rng));
    let at = a.transpose();
    let mut q = orthonormal_basis(a.mul_dense(&omega));
    for _ in 0..power_iters {
        let z = orthonormal_basis(at.mul_dense(&q));
        q = orthonormal_basis(a.mul_dense(&z));
    }
    // B = Q^T A, formed as (A^T Q)^T
    let b = at.mul_dense(&q).transpose();
    let small = dense_svd(&b, k);
    Svd {
        left: q * small.left,
        singular_values: small.singular_values,
        right: small.right,
    }
}

fn fix_signs(svd: &mut Svd) {
    for c in 0..svd.rank() {
        let col = svd.left.column(c);
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            svd.left.column_mut(c).neg_mut();
            svd.right.column_mut(c).neg_mut();
        }
    }
}
