//! Shifted Chebyshev nodes, the exact coefficient matrix `C`, and the
//! transforms between samples and Chebyshev coefficients.

use dashu_int::ops::UnsignedAbs;
use dashu_int::IBig;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::precision::{BigMatrix, BigReal, PrecisionContext};

/// Coefficients below this magnitude are zeroed by the Krasny filter.
pub const KRASNY_THRESHOLD: f64 = f64::EPSILON;

/// Extreme Chebyshev points `t_j = (T/2)(1 + cos(j pi / N))`, `j = 0..=N`,
/// listed from `t_0 = T` down to `t_N = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub t_final: f64,
    pub n: usize,
    pub t: Vec<f64>,
}

impl NodeSet {
    pub fn new(n: usize, t_final: f64) -> Result<Self> {
        check_n(n)?;
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidArgument(format!("final time must be positive, got {t_final}")));
        }
        let ctx = PrecisionContext::new(30)?;
        let big_t = ctx.from_f64(t_final)?;
        let t = make_nodes_big(n, &big_t, &ctx)?
            .iter()
            .map(BigReal::to_f64)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { t_final, n, t })
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    Ok(())
}

/// High-precision nodes for the matrix builders.
pub fn make_nodes_big(n: usize, t_final: &BigReal, ctx: &PrecisionContext) -> Result<Vec<BigReal>> {
    check_n(n)?;
    if t_final.is_zero() || t_final.is_negative() {
        return Err(Error::InvalidArgument("final time must be positive".into()));
    }
    let half = t_final.div_i64(2);
    Ok((0..=n)
        .map(|j| {
            let c = ctx.cos_pi_ratio(j as i64, n as u64);
            &half * &(ctx.one() + c)
        })
        .collect())
}

/// Integer coefficients of the shifted Chebyshev polynomials:
/// `T*_k(t) = sum_l a_{kl} t^l`, stored by column `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactCoeffMatrix {
    columns: Vec<Vec<IBig>>,
}

impl ExactCoeffMatrix {
    pub fn build(n: usize) -> Result<Self> {
        check_n(n)?;
        let mut columns: Vec<Vec<IBig>> = Vec::with_capacity(n + 1);
        columns.push(vec![IBig::ONE]);
        columns.push(vec![IBig::NEG_ONE, IBig::from(2)]);
        for k in 2..=n {
            let prev = &columns[k - 1];
            let prev2 = &columns[k - 2];
            let mut col = Vec::with_capacity(k + 1);
            for l in 0..=k {
                let mut v = IBig::ZERO;
                if l >= 1 {
                    v += IBig::from(4) * &prev[l - 1];
                }
                if l < k {
                    v -= IBig::from(2) * &prev[l];
                }
                if l + 1 < k {
                    v -= &prev2[l];
                }
                col.push(v);
            }
            columns.push(col);
        }
        columns.truncate(n + 1);
        Ok(Self { columns })
    }

    pub fn n(&self) -> usize {
        self.columns.len() - 1
    }

    /// `a_{kl}`: coefficient of `t^l` in `T*_k`. Zero below the diagonal.
    pub fn coeff(&self, l: usize, k: usize) -> IBig {
        self.columns[k].get(l).cloned().unwrap_or(IBig::ZERO)
    }

    pub fn column(&self, k: usize) -> &[IBig] {
        &self.columns[k]
    }

    /// Rows `first..=n` and columns `0..=n` of C as a high-precision matrix.
    /// `n` may be smaller than the size C was built with.
    pub fn to_big(&self, first: usize, n: usize, ctx: &PrecisionContext) -> Result<BigMatrix> {
        if n > self.n() {
            return Err(Error::InvalidArgument(format!(
                "coefficient matrix built for N = {}, requested N = {n}",
                self.n()
            )));
        }
        let rows = (n + 1).saturating_sub(first);
        Ok(BigMatrix::from_fn(rows, n + 1, |i, k| ctx.from_int(&self.coeff(first + i, k))))
    }

    /// `log10` of the largest entry magnitude in column `k`.
    pub fn log10_max_abs(&self, k: usize) -> f64 {
        let big = self.columns[k].iter().map(|v| v.clone().unsigned_abs()).max().unwrap_or_default();
        let digits = big.to_string();
        let lead: f64 = digits[..digits.len().min(17)].parse().unwrap_or(0.0);
        lead.log10() + (digits.len() - digits.len().min(17)) as f64
    }
}

/// The sample-to-coefficient matrix `M` and its inverse.
#[derive(Debug, Clone)]
pub struct TransformMatrix {
    pub m: DMatrix<f64>,
    pub minv: DMatrix<f64>,
    pub m_high: BigMatrix,
}

/// `m_jk = (2/N) eps_jk cos(jk pi/N)`, where `eps_jk` is 1/4 at the four
/// corners, 1/2 elsewhere on the border and 1 inside.
pub fn build_m(n: usize, ctx: &PrecisionContext) -> Result<TransformMatrix> {
    check_n(n)?;
    let edge = |j: usize| j == 0 || j == n;
    let cosines: Vec<BigReal> = (0..2 * n).map(|r| ctx.cos_pi_ratio(r as i64, n as u64)).collect();
    let cos_jk = |j: usize, k: usize| &cosines[(j * k) % (2 * n)];
    let m_high = BigMatrix::from_fn(n + 1, n + 1, |j, k| {
        let quarters = match (edge(j), edge(k)) {
            (true, true) => 1,
            (true, false) | (false, true) => 2,
            (false, false) => 4,
        };
        // (2/N) * quarters/4
        cos_jk(j, k).mul_i64(quarters).div_i64(2 * n as i64)
    });
    let m = m_high.to_f64()?;
    let mut minv = DMatrix::zeros(n + 1, n + 1);
    for j in 0..=n {
        for k in 0..=n {
            minv[(j, k)] = cos_jk(j, k).to_f64()?;
        }
    }
    Ok(TransformMatrix { m, minv, m_high })
}

/// Even extension `g = (f_0, ..., f_N, f_{N-1}, ..., f_1)` of length `2N`.
pub fn even_extension(f: &[Complex64]) -> Vec<Complex64> {
    let n = f.len() - 1;
    let mut g = Vec::with_capacity(2 * n);
    g.extend_from_slice(f);
    g.extend(f[1..n].iter().rev());
    g
}

/// Chebyshev coefficients of the samples `f` at the extreme nodes, computed
/// with an FFT of the even extension. With `apply_filter`, coefficients of
/// modulus below `2^-52` are set to zero.
pub fn coeffs_from_samples(f: &[Complex64], apply_filter: bool) -> Result<Vec<Complex64>> {
    if f.len() < 2 {
        return Err(Error::ShapeMismatch(format!("need at least 2 samples, got {}", f.len())));
    }
    let n = f.len() - 1;
    let mut g = even_extension(f);
    FftPlanner::new().plan_fft_forward(2 * n).process(&mut g);
    let scale = 1.0 / (2 * n) as f64;
    let mut fhat: Vec<Complex64> = (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n { 1.0 } else { 2.0 };
            g[k] * (w * scale)
        })
        .collect();
    if apply_filter {
        for c in fhat.iter_mut() {
            if c.norm() < KRASNY_THRESHOLD {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }
    Ok(fhat)
}

/// Samples at the extreme nodes of the Chebyshev series with coefficients `fhat`.
pub fn samples_from_coeffs(fhat: &[Complex64]) -> Result<Vec<Complex64>> {
    if fhat.len() < 2 {
        return Err(Error::ShapeMismatch(format!("need at least 2 coefficients, got {}", fhat.len())));
    }
    let n = fhat.len() - 1;
    let mut ghat: Vec<Complex64> = (0..=n)
        .map(|k| if k == 0 || k == n { fhat[k] } else { fhat[k] * 0.5 })
        .collect();
    ghat.extend(ghat[1..n].to_vec().into_iter().rev());
    FftPlanner::new().plan_fft_inverse(2 * n).process(&mut ghat);
    ghat.truncate(n + 1);
    Ok(ghat)
}

/// Samples together with their Chebyshev coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSamples {
    pub f: Vec<Complex64>,
    pub fhat: Vec<Complex64>,
}

impl SpectralSamples {
    pub fn from_samples(f: Vec<Complex64>, apply_filter: bool) -> Result<Self> {
        let fhat = coeffs_from_samples(&f, apply_filter)?;
        Ok(Self { f, fhat })
    }
}

/// First-derivative collocation matrix on `x_j = cos(j pi / N)` in `[-1, 1]`,
/// with diagonal entries set by the negative sum of each row.
pub fn cheb_diff_matrix(n: usize) -> Result<DMatrix<f64>> {
    check_n(n)?;
    let x: Vec<f64> = (0..=n).map(|j| (std::f64::consts::PI * j as f64 / n as f64).cos()).collect();
    let c = |j: usize| {
        let w = if j == 0 || j == n { 2.0 } else { 1.0 };
        if j % 2 == 0 { w } else { -w }
    };
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        let mut row_sum = 0.0;
        for j in 0..=n {
            if i != j {
                let v = c(i) / c(j) / (x[i] - x[j]);
                d[(i, j)] = v;
                row_sum += v;
            }
        }
        d[(i, i)] = -row_sum;
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c64(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn small_node_sets() {
        assert_eq!(NodeSet::new(2, 2.0).unwrap().t, vec![2.0, 1.0, 0.0]);
        assert_eq!(NodeSet::new(1, 1.0).unwrap().t, vec![1.0, 0.0]);
        let t = NodeSet::new(4, 1.2).unwrap().t;
        assert!((t[1] - 1.024264068711929).abs() < 1e-15);
        assert!(NodeSet::new(0, 1.0).is_err());
        assert!(NodeSet::new(3, -1.0).is_err());
    }

    #[test]
    fn nodes_decrease_and_are_symmetric() {
        for n in [1, 2, 7, 64, 101] {
            let ns = NodeSet::new(n, 1.7).unwrap();
            assert_eq!(ns.t[0], 1.7);
            assert_eq!(ns.t[n], 0.0);
            for j in 0..n {
                assert!(ns.t[j] > ns.t[j + 1]);
                assert!((ns.t[j] + ns.t[n - j] - 1.7).abs() <= 2.0 * f64::EPSILON * 1.7);
            }
        }
    }

    #[test]
    fn c_for_n5() {
        let c = ExactCoeffMatrix::build(5).unwrap();
        let col: Vec<IBig> = (0..=5).map(|l| c.coeff(l, 5)).collect();
        let expect: Vec<IBig> = [-1, 50, -400, 1120, -1280, 512].iter().map(|&v| IBig::from(v)).collect();
        assert_eq!(col, expect);
        assert_eq!(c.coeff(4, 2), IBig::ZERO);
    }

    #[test]
    fn c_structure() {
        let c = ExactCoeffMatrix::build(40).unwrap();
        for k in 0..=40 {
            let expect_first = if k % 2 == 0 { IBig::ONE } else { IBig::NEG_ONE };
            assert_eq!(c.coeff(0, k), expect_first);
            if k >= 1 {
                assert_eq!(c.coeff(k, k), IBig::from(2) * IBig::from(4).pow(k - 1));
            }
            let sum: IBig = c.column(k).iter().sum();
            assert_eq!(sum, IBig::ONE);
            for l in 0..k {
                assert!(c.coeff(l, k).signum() * c.coeff(l + 1, k).signum() == IBig::NEG_ONE);
            }
        }
    }

    #[test]
    fn m_small_cases() {
        let ctx = PrecisionContext::new(30).unwrap();
        let t = build_m(2, &ctx).unwrap();
        assert_eq!(t.m.row(0).iter().copied().collect::<Vec<_>>(), vec![0.25, 0.5, 0.25]);
        let t3 = build_m(3, &ctx).unwrap();
        assert!((t3.m[(1, 1)] - 1.0 / 3.0).abs() < 1e-16);
        for n in [1, 5, 32, 100] {
            let t = build_m(n, &ctx).unwrap();
            assert_eq!(t.m, t.m.transpose());
            let prod = &t.m * &t.minv;
            let dev = (prod - DMatrix::identity(n + 1, n + 1)).amax();
            assert!(dev <= 1e3 * f64::EPSILON, "n={n} dev={dev:e}");
        }
    }

    #[test]
    fn unit_coefficients() {
        let n = 9;
        let one = vec![c64(1.0); n + 1];
        let fhat = coeffs_from_samples(&one, false).unwrap();
        assert!((fhat[0] - c64(1.0)).norm() < 1e-15);
        assert!(fhat[1..].iter().all(|c| c.norm() < 1e-15));

        let t3: Vec<Complex64> =
            (0..=n).map(|j| c64((3.0 * std::f64::consts::PI * j as f64 / n as f64).cos())).collect();
        let fhat = coeffs_from_samples(&t3, true).unwrap();
        for (k, c) in fhat.iter().enumerate() {
            let e = if k == 3 { 1.0 } else { 0.0 };
            assert!((c - c64(e)).norm() < 1e-14);
        }

        let mut e1 = vec![c64(0.0); n + 1];
        e1[1] = c64(1.0);
        let s = samples_from_coeffs(&e1).unwrap();
        for (j, v) in s.iter().enumerate() {
            assert!((v.re - (std::f64::consts::PI * j as f64 / n as f64).cos()).abs() < 1e-15);
        }
        assert!(coeffs_from_samples(&[c64(1.0)], false).is_err());
        assert!(samples_from_coeffs(&[]).is_err());
    }

    #[test]
    fn filter_is_absolute() {
        let f = vec![c64(1e20), c64(1e20 + 1e4), c64(1e20)];
        let unfiltered = coeffs_from_samples(&f, false).unwrap();
        let filtered = coeffs_from_samples(&f, true).unwrap();
        assert_eq!(unfiltered, filtered);
        let tiny = vec![c64(1e-17), c64(0.0), c64(-1e-17)];
        assert!(coeffs_from_samples(&tiny, true).unwrap().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn cheb_diff_on_polynomials() {
        let n = 16;
        let d = cheb_diff_matrix(n).unwrap();
        let x: Vec<f64> = (0..=n).map(|j| (std::f64::consts::PI * j as f64 / n as f64).cos()).collect();
        let px = nalgebra::DVector::from_vec(x.clone());
        let dx = &d * &px;
        assert!(dx.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let px2 = px.map(|v| v * v);
        let dx2 = &d * &px2;
        for (v, xi) in dx2.iter().zip(&x) {
            assert!((v - 2.0 * xi).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn round_trip(n in 1usize..80, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f: Vec<Complex64> = (0..=n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let back = samples_from_coeffs(&coeffs_from_samples(&f, false).unwrap()).unwrap();
            let scale = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let dev = f.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(dev <= 10.0 * n as f64 * f64::EPSILON * scale + 1e-300);
        }

        #[test]
        fn even_extension_symmetry(n in 2usize..50) {
            let f: Vec<Complex64> = (0..=n).map(|j| Complex64::new(j as f64, -(j as f64))).collect();
            let g = even_extension(&f);
            prop_assert_eq!(g.len(), 2 * n);
            for j in 1..n {
                prop_assert_eq!(g[j], g[2 * n - j]);
            }
        }

        #[test]
        fn matrix_and_fft_agree(n in 1usize..60, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let ctx = PrecisionContext::new(20).unwrap();
            let t = build_m(n, &ctx).unwrap();
            let f: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mf = &t.m * nalgebra::DVector::from_vec(f.clone());
            let fc: Vec<Complex64> = f.iter().map(|&v| c64(v)).collect();
            let fhat = coeffs_from_samples(&fc, false).unwrap();
            let scale = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for k in 0..=n {
                prop_assert!((mf[k] - fhat[k].re).abs() <= 1e3 * f64::EPSILON * scale);
            }
        }

        #[test]
        fn polynomial_reproduction(n in 3usize..40, deg in 0usize..3, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let coeffs: Vec<f64> = (0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nodes = NodeSet::new(n, 1.0).unwrap();
            let f: Vec<Complex64> = nodes.t.iter().map(|&t| c64(coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c))).collect();
            let fhat = coeffs_from_samples(&f, false).unwrap();
            let scale = f.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
            for c in &fhat[deg + 1..] {
                prop_assert!(c.norm() <= 1e3 * f64::EPSILON * scale);
            }
        }
    }
}
