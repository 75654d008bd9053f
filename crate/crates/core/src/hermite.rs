//! Hermite-function collocation on the real line.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Scaled Hermite nodes with first and second differentiation matrices.
///
/// The nodes are `b` times the roots of `H_Nx`, and interpolation uses
/// functions of the form `exp(-(x/b)^2 / 2) p(x)` with `p` a polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteGrid {
    pub nx: usize,
    pub b: f64,
    pub x: Vec<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
}

/// Roots of the Hermite polynomial `H_n`, in increasing order and exactly
/// symmetric about zero.
pub fn hermite_roots(n: usize) -> Result<Vec<f64>> {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::try_new(jacobi, f64::EPSILON, 1000 * n.max(1))
        .ok_or(Error::NonConvergence("Hermite node eigenvalues"))?;
    let mut x: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    x.sort_by(f64::total_cmp);
    for j in 0..n / 2 {
        let v = 0.5 * (x[n - 1 - j] - x[j]);
        x[j] = -v;
        x[n - 1 - j] = v;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok(x)
}

/// Differentiation matrices of orders `1..=beta.len()` for interpolants
/// `w(x) p(x)` through the nodes `x`, given `w` at the nodes and
/// `beta[l][k] = w^(l+1)(x_k) / w(x_k)`.
fn weighted_poldif(x: &[f64], w: &[f64], beta: &[Vec<f64>]) -> Vec<DMatrix<f64>> {
    let n = x.len();
    let dx = DMatrix::from_fn(n, n, |k, j| if k == j { 1.0 } else { x[k] - x[j] });
    let c: Vec<f64> = (0..n).map(|k| w[k] * dx.row(k).iter().product::<f64>()).collect();
    let cr = DMatrix::from_fn(n, n, |k, j| c[k] / c[j]);
    let z = DMatrix::from_fn(n, n, |k, j| if k == j { 0.0 } else { 1.0 / dx[(k, j)] });
    // xs[(r, k)]: the entries 1/(x_k - x_j), j != k, in order of j
    let xs = DMatrix::from_fn(n.saturating_sub(1), n, |r, k| {
        let j = if r < k { r } else { r + 1 };
        z[(k, j)]
    });
    let mut y = DMatrix::from_element(n, n, 1.0);
    let mut d = DMatrix::<f64>::identity(n, n);
    let mut out = Vec::with_capacity(beta.len());
    for (l, bl) in beta.iter().enumerate() {
        let ell = (l + 1) as f64;
        let mut ynew = DMatrix::zeros(n, n);
        for k in 0..n {
            ynew[(0, k)] = bl[k];
            for r in 1..n {
                ynew[(r, k)] = ynew[(r - 1, k)] + ell * y[(r - 1, k)] * xs[(r - 1, k)];
            }
        }
        y = ynew;
        let diag: Vec<f64> = (0..n).map(|k| d[(k, k)]).collect();
        let mut dnew = DMatrix::zeros(n, n);
        for k in 0..n {
            for j in 0..n {
                dnew[(k, j)] = if k == j {
                    y[(n - 1, k)]
                } else {
                    ell * z[(k, j)] * (cr[(k, j)] * diag[k] - d[(k, j)])
                };
            }
        }
        d = dnew;
        out.push(d.clone());
    }
    out
}

pub fn build_hermite(nx: usize, b: f64) -> Result<HermiteGrid> {
    if nx < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 Hermite nodes, got {nx}")));
    }
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::InvalidArgument(format!("scale factor must be positive, got {b}")));
    }
    let r = hermite_roots(nx)?;
    let w: Vec<f64> = r.iter().map(|v| (-0.5 * v * v).exp()).collect();
    let beta = vec![r.iter().map(|v| -v).collect(), r.iter().map(|v| v * v - 1.0).collect()];
    let mut dm = weighted_poldif(&r, &w, &beta);
    let d2 = dm.pop().expect("two orders") / (b * b);
    let d1 = dm.pop().expect("two orders") / b;
    Ok(HermiteGrid { nx, b, x: r.iter().map(|v| b * v).collect(), d1, d2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn two_nodes() {
        let g = build_hermite(2, 1.0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((g.x[0] + h).abs() < 1e-15 && (g.x[1] - h).abs() < 1e-15);
        assert!(build_hermite(1, 1.0).is_err());
        assert!(build_hermite(4, 0.0).is_err());
    }

    #[test]
    fn roots_are_symmetric_and_are_roots() {
        for n in [3, 8, 16, 31] {
            let x = hermite_roots(n).unwrap();
            for j in 0..n {
                assert_eq!(x[j], -x[n - 1 - j]);
            }
            for &xi in &x {
                let (mut h0, mut h1) = (1.0f64, 2.0 * xi);
                for k in 1..n {
                    let h2 = 2.0 * xi * h1 - 2.0 * k as f64 * h0;
                    h0 = h1;
                    h1 = h2;
                }
                // Newton step H_n / H_n' with H_n' = 2n H_{n-1}
                let step = h1 / (2.0 * n as f64 * h0);
                assert!(step.abs() < 1e-13 * (1.0 + xi.abs()), "n={n} x={xi}");
            }
        }
    }

    fn samples(g: &HermiteGrid, f: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(g.nx, g.x.iter().map(|&x| f(x)))
    }

    #[test]
    fn derivative_of_psi0() {
        let g = build_hermite(16, 1.0).unwrap();
        let c = std::f64::consts::PI.powf(-0.25);
        let psi = samples(&g, |x| c * (-x * x / 2.0).exp());
        let dpsi = &g.d1 * &psi;
        let expect = samples(&g, |x| -x * c * (-x * x / 2.0).exp());
        assert!((dpsi - expect).amax() <= 1e-10);
    }

    #[test]
    fn second_derivative_of_gaussian() {
        // interpolation error of the weighted interpolant, from a 50-digit
        // Lagrange evaluation
        let g = build_hermite(16, 1.0).unwrap();
        let f = samples(&g, |x| (-x * x).exp());
        let expect = samples(&g, |x| (4.0 * x * x - 2.0) * (-x * x).exp());
        let err = (&g.d2 * f - expect).amax();
        assert!((err / 9.5321e-5 - 1.0).abs() < 1e-3, "{err:e}");
        let g = build_hermite(16, 0.8).unwrap();
        let f = samples(&g, |x| (-x * x).exp());
        let expect = samples(&g, |x| (4.0 * x * x - 2.0) * (-x * x).exp());
        let err = (&g.d2 * f - expect).amax();
        assert!((err / 1.6003e-8 - 1.0).abs() < 1e-3, "{err:e}");
    }

    #[test]
    fn hermite_functions_are_reproduced() {
        let nx = 20;
        for b in [0.5, 1.0, 2.0] {
            let g = build_hermite(nx, b).unwrap();
            for n in 0..nx {
                // psi_n(x/b) up to normalisation, via the recurrence on H_n
                let h = |y: f64| {
                    let (mut h0, mut h1) = (1.0f64, 2.0 * y);
                    if n == 0 {
                        return (1.0, 0.0);
                    }
                    for k in 1..n {
                        let h2 = 2.0 * y * h1 - 2.0 * k as f64 * h0;
                        h0 = h1;
                        h1 = h2;
                    }
                    (h1, 2.0 * n as f64 * h0)
                };
                let f = samples(&g, |x| {
                    let y = x / b;
                    h(y).0 * (-y * y / 2.0).exp()
                });
                let df = samples(&g, |x| {
                    let y = x / b;
                    let (hn, dhn) = h(y);
                    (dhn - y * hn) * (-y * y / 2.0).exp() / b
                });
                let got = &g.d1 * &f;
                assert!((got - &df).amax() <= 1e-8 * df.amax().max(f.amax() / b), "b={b} n={n}");
            }
        }
    }

    #[test]
    fn scale_matching_the_gaussian_is_exact() {
        let g = build_hermite(12, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let f = samples(&g, |x| (-x * x).exp());
        let expect = samples(&g, |x| (4.0 * x * x - 2.0) * (-x * x).exp());
        assert!((&g.d2 * f - expect).amax() <= 1e-12);
    }
}
