//! Squared-exponential covariance.

use nalgebra::DMatrix;

/// `variance * exp(-|x - y|^2 / (2 lengthscale^2))`.
pub fn se_kernel(x: &[f64], y: &[f64], lengthscale: f64, variance: f64) -> f64 {
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    variance * (-0.5 * sq / (lengthscale * lengthscale)).exp()
}

fn se_scalar(x: f64, y: f64, lengthscale: f64, variance: f64) -> f64 {
    let d = (x - y) / lengthscale;
    variance * (-0.5 * d * d).exp()
}

/// Gram matrix over scalar inputs.
pub fn se_gram(xs: &[f64], lengthscale: f64, variance: f64) -> DMatrix<f64> {
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = variance;
        for j in 0..i {
            let v = se_scalar(xs[i], xs[j], lengthscale, variance);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `K[i, j] = k(rows[i], cols[j])` over scalar inputs.
pub fn se_cross_gram(rows: &[f64], cols: &[f64], lengthscale: f64, variance: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        se_scalar(rows[i], cols[j], lengthscale, variance)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(se_kernel(&[1.0, 2.0], &[1.0, 2.0], 0.7, 2.5), 2.5);
        let v = se_kernel(&[0.0], &[3.0], 3.0, 1.0);
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
        assert!((v - 0.6065).abs() < 1e-4);
        let a = [0.3, -1.0];
        let b = [2.0, 0.5];
        assert_eq!(se_kernel(&a, &b, 1.3, 0.8), se_kernel(&b, &a, 1.3, 0.8));
    }

    #[test]
    fn gram_agrees_with_pointwise() {
        let xs = [0.0, 0.5, 3.0, 7.5];
        let k = se_gram(&xs, 2.0, 1.5);
        let c = se_cross_gram(&xs, &xs, 2.0, 1.5);
        for i in 0..4 {
            for j in 0..4 {
                let p = se_kernel(&[xs[i]], &[xs[j]], 2.0, 1.5);
                assert!((k[(i, j)] - p).abs() < 1e-15);
                assert!((c[(i, j)] - p).abs() < 1e-15);
                assert_eq!(k[(i, j)], k[(j, i)]);
            }
        }
    }
}
