//! Dense symmetric eigensolver and the small least-squares helpers built on
//! it.
//!
//! The eigensolver is the classical Householder tridiagonalization followed
//! by implicit-shift QL iterations (the EISPACK tred2/tql2 pair).

use nalgebra::DMatrix;

use crate::error::{check_shape, Error, Result};
use crate::prelude::*;

/// Gram matrices whose condition number exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

const MAX_QL_ITERATIONS: usize = 60;

/// Leading eigenpairs of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    /// Eigenvalues, largest first.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    let scale = a.amax();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if worst > 1e-10 * scale {
        return Err(Error::NotSymmetric { max_asymmetry: worst });
    }
    Ok(())
}

/// The `top_k` largest eigenvalues of a symmetric matrix with their
/// eigenvectors.
///
/// Eigenvalues that coincide keep the order the QL sweep produced them in.
pub fn symmetric_eigen(a: &DMatrix<f64>, top_k: usize) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::invalid(
            "matrix",
            format!("expected a nonempty square matrix, got {}x{}", a.nrows(), a.ncols()),
        ));
    }
    if top_k == 0 || top_k > n {
        return Err(Error::invalid("top_k", format!("{top_k} is not in 1..={n}")));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix", "contains non-finite entries"));
    }
    check_symmetric(a)?;

    // Work on the symmetrized lower triangle so tiny asymmetries cannot leak.
    let mut v = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    ql_implicit(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps solver order among exact ties.
    order.sort_by(|&x, &y| d[y].partial_cmp(&d[x]).unwrap_or(core::cmp::Ordering::Equal));
    let values = order[..top_k].iter().map(|&i| d[i]).collect();
    let vectors = DMatrix::from_fn(n, top_k, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Householder reduction to tridiagonal form. On return `d` holds the
/// diagonal, `e[1..]` the subdiagonal and `v` the accumulated transform.
fn tridiagonalize(v: &mut DMatrix<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal matrix, accumulating rotations into `v`.
fn ql_implicit(v: &mut DMatrix<f64>, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::EigenNoConvergence {
                        index: l,
                        residual: e[l].abs(),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Inverse of a symmetric positive definite Gram matrix, refusing matrices
/// whose condition number is at least [`MAX_CONDITION`].
pub fn gram_inverse(gram: &DMatrix<f64>, context: &'static str, hint: &'static str) -> Result<DMatrix<f64>> {
    let k = gram.nrows();
    let eig = symmetric_eigen(gram, k)?;
    let largest = eig.values[0];
    let smallest = eig.values[k - 1];
    let condition = if smallest > 0.0 {
        largest / smallest
    } else {
        f64::INFINITY
    };
    if !(condition < MAX_CONDITION) {
        return Err(Error::SingularGram {
            context,
            condition,
            hint,
        });
    }
    // V diag(1/λ) Vᵀ; symmetric by construction.
    let mut inv = DMatrix::zeros(k, k);
    for (idx, lambda) in eig.values.iter().enumerate() {
        let col = eig.vectors.column(idx);
        inv += (col * col.transpose()) / *lambda;
    }
    Ok(inv)
}

/// Least-squares coefficients of regressing every column of `response` on
/// the columns of `design`: (DᵀD)⁻¹DᵀR, shape k×p.
pub fn regress(
    design: &DMatrix<f64>,
    response: &DMatrix<f64>,
    context: &'static str,
    hint: &'static str,
) -> Result<DMatrix<f64>> {
    check_shape(
        context,
        response.nrows(),
        response.ncols(),
        design.nrows(),
        response.ncols(),
    )?;
    let gram = design.transpose() * design;
    let inv = gram_inverse(&gram, context, hint)?;
    Ok(inv * (design.transpose() * response))
}
