//! Dense vector kernels on `f64` slices. Fixed left-to-right accumulation.

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        acc += a * b;
    }
    acc
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// y += alpha * x
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    for v in x {
        *v *= alpha;
    }
}

/// Returns `a*x + b*y`.
pub fn lincomb(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(xi, yi)| a * xi + b * yi).collect()
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    lincomb(1.0, x, -1.0, y)
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    lincomb(1.0, x, 1.0, y)
}

/// Removes the components of `x` along the Euclidean-orthonormal columns in `basis`.
pub fn project_out(basis: &[Vec<f64>], x: &mut [f64]) {
    for z in basis {
        let c = dot(z, x);
        axpy(-c, z, x);
    }
}

/// `Z^T x` for a column list `Z`.
pub fn project_coeffs(basis: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    basis.iter().map(|z| dot(z, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_and_norm() {
        assert_eq!(dot(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), 32.0);
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
    }

    #[test]
    fn project_out_removes_component() {
        let z = vec![vec![1.0, 0.0, 0.0]];
        let mut x = vec![3.0, 1.0, 2.0];
        project_out(&z, &mut x);
        assert_eq!(x, vec![0.0, 1.0, 2.0]);
    }
}
