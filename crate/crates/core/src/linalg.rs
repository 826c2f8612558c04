//! Small dense helpers and extreme-eigenvalue estimates.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `y += alpha · x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Above this size the symmetric eigenproblem switches from a dense solve to
/// Lanczos.
pub const DENSE_EIG_LIMIT: usize = 200;

/// Smallest eigenvalue of a symmetric row-major dense matrix.
pub fn min_eigenvalue_dense(n: usize, a: &[f64]) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let m = DMatrix::from_row_slice(n, n, a);
    SymmetricEigen::new(m).eigenvalues.min()
}

/// Smallest eigenvalue of the symmetric operator `apply` (`y = S x`), by
/// Lanczos with full reorthogonalization. Converges when the Ritz residual is
/// below `tol · max(1, |θ|)`.
pub fn min_eigenvalue_lanczos<F>(n: usize, apply: F, tol: f64) -> f64
where
    F: Fn(&[f64], &mut [f64]),
{
    if n == 0 {
        return f64::INFINITY;
    }
    let max_steps = n.min(800);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nq = norm2(&q);
    q.iter_mut().for_each(|v| *v /= nq);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_steps);
    let mut alpha = Vec::with_capacity(max_steps);
    let mut beta: Vec<f64> = Vec::with_capacity(max_steps);
    let mut w = vec![0.0; n];
    let mut theta = f64::INFINITY;
    for k in 0..max_steps {
        w.iter_mut().for_each(|v| *v = 0.0);
        apply(&q, &mut w);
        let a = dot(&w, &q);
        axpy(-a, &q, &mut w);
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            axpy(-b, prev, &mut w);
        }
        basis.push(q.clone());
        // Two passes of Gram-Schmidt keep the basis orthogonal to working precision.
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                axpy(-c, v, &mut w);
            }
        }
        alpha.push(a);
        let b = norm2(&w);

        let steps = k + 1;
        if steps % 8 == 0 || steps == max_steps || b <= f64::EPSILON * a.abs().max(1.0) {
            let t = tridiagonal(&alpha, &beta);
            let eig = SymmetricEigen::new(t);
            let (imin, &tmin) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1))
                .expect("nonempty spectrum");
            theta = tmin;
            let resid = (b * eig.eigenvectors[(steps - 1, imin)]).abs();
            if resid <= tol * theta.abs().max(1.0) || b <= f64::EPSILON * a.abs().max(1.0) {
                break;
            }
        }
        if steps == max_steps {
            break;
        }
        beta.push(b);
        q = w.iter().map(|v| v / b).collect();
    }
    theta
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// Estimates `‖W‖₂` with `iters` power steps on `WᵀW`.
pub fn spectral_norm<F, G>(n: usize, apply: F, apply_t: G, iters: usize) -> f64
where
    F: Fn(&[f64], &mut [f64]),
    G: Fn(&[f64], &mut [f64]),
{
    if n == 0 {
        return 0.0;
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut wx = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut est = 0.0;
    for _ in 0..iters {
        wx.iter_mut().for_each(|v| *v = 0.0);
        apply(&x, &mut wx);
        y.iter_mut().for_each(|v| *v = 0.0);
        apply_t(&wx, &mut y);
        let ny = norm2(&y);
        if ny == 0.0 {
            return 0.0;
        }
        est = ny.sqrt();
        x.iter_mut().zip(&y).for_each(|(a, b)| *a = b / ny);
    }
    est
}
