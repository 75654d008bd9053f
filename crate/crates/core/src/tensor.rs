//! Complex Schur decomposition, Sylvester and Sylvester tensor equations.
//!
//! Tensors are stored with the first index varying fastest: entry
//! `(i_1, ..., i_k)` of a tensor of shape `(n_1, ..., n_k)` lives at
//! `i_1 + n_1 (i_2 + n_2 (i_3 + ...))`.

use nalgebra::{DMatrix, DMatrixView, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const SINGULAR_TOL: f64 = 1e-12;
pub const KRONECKER_MAX_ORDER: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<Complex64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::ShapeMismatch(format!("invalid tensor shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape, vec![ZERO; len])
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> Complex64) -> Result<Self> {
        let len: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (i, n) in idx.iter_mut().zip(&shape) {
                *i += 1;
                if *i < *n {
                    break;
                }
                *i = 0;
            }
        }
        Self::new(shape, data)
    }

    /// Views a matrix as a two-dimensional tensor.
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self { shape: vec![m.nrows(), m.ncols()], data: m.as_slice().to_vec() }
    }

    /// Reshapes to `shape[0] x (product of the rest)`.
    pub fn to_matrix(&self) -> CMatrix {
        let rows = self.shape[0];
        CMatrix::from_column_slice(rows, self.data.len() / rows, &self.data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).rev().fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.data[self.linear_index(idx)]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: Complex64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Tensor, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Tensor { shape: self.shape.clone(), data })
    }

    /// Reorders dimensions: dimension `k` of the result is dimension `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor> {
        let mut seen = vec![false; self.shape.len()];
        if perm.len() != self.shape.len() || perm.iter().any(|&p| p >= seen.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::ShapeMismatch(format!("{perm:?} is not a permutation of the dimensions")));
        }
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let mut src = vec![0usize; perm.len()];
        Tensor::from_fn(shape, |idx| {
            for (k, &p) in perm.iter().enumerate() {
                src[p] = idx[k];
            }
            self.get(&src)
        })
    }
}

/// `A = Q R Q^H` with `Q` unitary and `R` upper triangular.
pub fn schur_decompose(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch(format!("Schur form needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let n = a.nrows();
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 100 * n.max(10)).ok_or(Error::NonConvergence("Schur iteration"))?;
    let (q, mut r) = schur.unpack();
    for j in 0..n {
        for i in j + 1..n {
            r[(i, j)] = ZERO;
        }
    }
    Ok((q, r))
}

fn check_sum(sum: Complex64, scale: f64) -> Result<()> {
    if sum.norm() < SINGULAR_TOL * scale || scale == 0.0 {
        return Err(Error::Singular(format!("eigenvalue sum {sum} is numerically zero")));
    }
    Ok(())
}

/// Solves `A X + X B = C` (Bartels-Stewart with complex Schur forms).
pub fn sylvester_solve(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> Result<CMatrix> {
    let (m, n) = (a.nrows(), b.nrows());
    if !a.is_square() || !b.is_square() || c.nrows() != m || c.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "A {}x{}, B {}x{}, C {}x{}",
            a.nrows(), a.ncols(), b.nrows(), b.ncols(), c.nrows(), c.ncols()
        )));
    }
    let (qa, ra) = schur_decompose(a)?;
    let (qb, rb) = schur_decompose(b)?;
    let f = qa.adjoint() * c * &qb;
    let mut y = CMatrix::zeros(m, n);
    for k in 0..n {
        let mut rhs = f.column(k).clone_owned();
        for i in 0..k {
            let coef = rb[(i, k)];
            if coef != ZERO {
                rhs -= y.column(i) * coef;
            }
        }
        let mu = rb[(k, k)];
        for i in (0..m).rev() {
            let mut s = rhs[i];
            for l in i + 1..m {
                s -= ra[(i, l)] * y[(l, k)];
            }
            let diag = ra[(i, i)] + mu;
            check_sum(diag, ra[(i, i)].norm() + mu.norm())?;
            y[(i, k)] = s / diag;
        }
    }
    Ok(qa * y * qb.adjoint())
}

/// `A □_j X`: contracts the columns of `A` with dimension `j` (0-based) of `X`.
pub fn mode_multiply(a: &CMatrix, x: &Tensor, j: usize) -> Result<Tensor> {
    let shape = x.shape();
    if j >= shape.len() || a.ncols() != shape[j] {
        return Err(Error::ShapeMismatch(format!(
            "cannot apply a {}x{} matrix along dimension {j} of shape {shape:?}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut out_shape = shape.to_vec();
    out_shape[j] = a.nrows();
    if j == 0 {
        let rows = shape[0];
        let view = DMatrixView::from_slice(x.data(), rows, x.data().len() / rows);
        let prod = a * view;
        return Tensor::new(out_shape, prod.as_slice().to_vec());
    }
    let inner: usize = shape[..j].iter().product();
    let outer: usize = shape[j + 1..].iter().product();
    let (nj, pj) = (shape[j], a.nrows());
    let at = a.transpose();
    let mut data = Vec::with_capacity(inner * pj * outer);
    for o in 0..outer {
        let block = DMatrixView::from_slice(&x.data()[o * inner * nj..(o + 1) * inner * nj], inner, nj);
        let prod = block * &at;
        data.extend_from_slice(prod.as_slice());
    }
    Tensor::new(out_shape, data)
}

/// Coefficients and right-hand side of `sum_j A_j □_j X = B`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorLinearSystem {
    pub a: Vec<CMatrix>,
    pub b: Tensor,
}

impl TensorLinearSystem {
    pub fn new(a: Vec<CMatrix>, b: Tensor) -> Result<Self> {
        if a.len() != b.shape().len() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficient matrices for a tensor of order {}",
                a.len(),
                b.shape().len()
            )));
        }
        for (j, (aj, &n)) in a.iter().zip(b.shape()).enumerate() {
            if aj.nrows() != n || aj.ncols() != n {
                return Err(Error::ShapeMismatch(format!(
                    "A_{j} is {}x{}, dimension {j} has size {n}",
                    aj.nrows(),
                    aj.ncols()
                )));
            }
        }
        Ok(Self { a, b })
    }

    /// `sum_j A_j □_j X`.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let mut acc = Tensor::zeros(x.shape().to_vec())?;
        for (j, aj) in self.a.iter().enumerate() {
            acc = acc.add(&mode_multiply(aj, x, j)?)?;
        }
        Ok(acc)
    }

    /// `max |sum_j A_j □_j X - B|`.
    pub fn residual(&self, x: &Tensor) -> Result<f64> {
        Ok(self.apply(x)?.sub(&self.b)?.max_abs())
    }
}

/// Solves `sum_j A_j □_j X = B`. Every `A_j` is reduced to Schur form, the
/// right-hand side is rotated into the Schur bases, and the resulting
/// triangular system is solved in one sweep over the entries in decreasing
/// linear index.
pub fn sylvester_tensor_solve(sys: &TensorLinearSystem) -> Result<Tensor> {
    let shape = sys.b.shape().to_vec();
    let order = shape.len();
    let mut qs = Vec::with_capacity(order);
    let mut rs = Vec::with_capacity(order);
    for aj in &sys.a {
        let (q, r) = schur_decompose(aj)?;
        qs.push(q);
        rs.push(r);
    }
    let mut f = sys.b.clone();
    for (j, q) in qs.iter().enumerate() {
        f = mode_multiply(&q.adjoint(), &f, j)?;
    }

    let mut stride = vec![1usize; order];
    for j in 1..order {
        stride[j] = stride[j - 1] * shape[j - 1];
    }
    let total = f.data.len();
    let mut y = vec![ZERO; total];
    let mut idx: Vec<usize> = shape.iter().map(|&n| n - 1).collect();
    for lin in (0..total).rev() {
        let mut s = f.data[lin];
        let mut diag = ZERO;
        let mut scale = 0.0;
        for j in 0..order {
            let r = &rs[j];
            let i = idx[j];
            diag += r[(i, i)];
            scale += r[(i, i)].norm();
            for q in i + 1..shape[j] {
                let coef = r[(i, q)];
                if coef != ZERO {
                    s -= coef * y[lin + (q - i) * stride[j]];
                }
            }
        }
        check_sum(diag, scale)?;
        y[lin] = s / diag;
        for (i, n) in idx.iter_mut().zip(&shape) {
            if *i > 0 {
                *i -= 1;
                break;
            }
            *i = n - 1;
        }
    }

    let mut x = Tensor::new(shape, y)?;
    for (j, q) in qs.iter().enumerate() {
        x = mode_multiply(q, &x, j)?;
    }
    Ok(x)
}

/// Dense reference solver: assembles `sum_j I ⊗ A_j ⊗ I` and solves it by LU.
pub fn kronecker_oracle(sys: &TensorLinearSystem) -> Result<Tensor> {
    let shape = sys.b.shape().to_vec();
    let total: usize = shape.iter().product();
    if total > KRONECKER_MAX_ORDER {
        return Err(Error::BudgetExceeded(format!(
            "Kronecker system of order {total} exceeds {KRONECKER_MAX_ORDER}"
        )));
    }
    let mut stride = vec![1usize; shape.len()];
    for j in 1..shape.len() {
        stride[j] = stride[j - 1] * shape[j - 1];
    }
    let mut k = CMatrix::zeros(total, total);
    for col in 0..total {
        for (j, aj) in sys.a.iter().enumerate() {
            let cj = (col / stride[j]) % shape[j];
            let base = col - cj * stride[j];
            for p in 0..shape[j] {
                k[(base + p * stride[j], col)] += aj[(p, cj)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(sys.b.data());
    let sol = k.lu().solve(&rhs).ok_or_else(|| Error::Singular("Kronecker matrix is singular".into()))?;
    if sol.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Singular("Kronecker matrix is singular".into()));
    }
    Tensor::new(shape, sol.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
        Tensor::from_fn(shape, |_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn schur_small_cases() {
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-2.0, 1.0), c(3.0, 0.0)]));
        let (q, r) = schur_decompose(&d).unwrap();
        assert_eq!(r, d);
        for i in 0..3 {
            assert!((q[(i, i)].norm() - 1.0).abs() < 1e-15);
        }
        let rot = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        let (_, r) = schur_decompose(&rot).unwrap();
        let mut ims: Vec<f64> = r.diagonal().iter().map(|v| v.im).collect();
        ims.sort_by(f64::total_cmp);
        assert!((ims[0] + 1.0).abs() < 1e-14 && (ims[1] - 1.0).abs() < 1e-14);
        assert!(r.diagonal().iter().all(|v| v.re.abs() < 1e-14));
        assert!(schur_decompose(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn schur_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 8, 40] {
            let a = random_matrix(&mut rng, n);
            let (q, r) = schur_decompose(&a).unwrap();
            let back = &q * &r * q.adjoint();
            assert!((back - &a).norm() <= 1e-12 * a.norm());
            assert!((q.adjoint() * &q - CMatrix::identity(n, n)).norm() <= 1e-12);
            for j in 0..n {
                for i in j + 1..n {
                    assert_eq!(r[(i, j)], ZERO);
                }
            }
        }
    }

    #[test]
    fn sylvester_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cm = CMatrix::from_fn(3, 4, |_, _| c(rng.gen(), rng.gen()));
        let x = sylvester_solve(&CMatrix::identity(3, 3), &CMatrix::identity(4, 4), &cm).unwrap();
        assert!((x - &cm * c(0.5, 0.0)).norm() < 1e-14);
        let one = |v: Complex64| CMatrix::from_element(1, 1, v);
        let x = sylvester_solve(&one(c(2.0, 1.0)), &one(c(1.0, -3.0)), &one(c(4.0, 0.0))).unwrap();
        assert!((x[(0, 0)] - c(4.0, 0.0) / c(3.0, -2.0)).norm() < 1e-15);
        let err = sylvester_solve(&one(c(1.0, 0.0)), &one(c(-1.0, 0.0)), &one(c(1.0, 0.0)));
        assert!(matches!(err, Err(Error::Singular(_))));
    }

    #[test]
    fn sylvester_matches_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 5) + CMatrix::identity(5, 5) * c(4.0, 0.0);
        let b = random_matrix(&mut rng, 5) + CMatrix::identity(5, 5) * c(4.0, 0.0);
        let cm = random_matrix(&mut rng, 5);
        let x = sylvester_solve(&a, &b, &cm).unwrap();
        let sys = TensorLinearSystem::new(vec![a.clone(), b.transpose()], Tensor::from_matrix(&cm)).unwrap();
        let oracle = kronecker_oracle(&sys).unwrap().to_matrix();
        assert!((&x - &oracle).norm() <= 1e-10 * oracle.norm());
        assert!((&a * &x + &x * &b - &cm).norm() <= 1e-10 * (a.norm() + b.norm()) * x.norm());
    }

    #[test]
    fn mode_multiply_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(&mut rng, vec![3, 2, 2]);
        for j in 0..3 {
            let n = x.shape()[j];
            assert_eq!(mode_multiply(&CMatrix::identity(n, n), &x, j).unwrap(), x);
        }
        let a = random_matrix(&mut rng, 3);
        let y = mode_multiply(&a, &x, 0).unwrap();
        for i in 0..3 {
            for k in 0..2 {
                for l in 0..2 {
                    let expect: Complex64 = (0..3).map(|q| a[(i, q)] * x.get(&[q, k, l])).sum();
                    assert!((y.get(&[i, k, l]) - expect).norm() < 1e-14);
                }
            }
        }
        let a2 = CMatrix::from_fn(4, 2, |i, j| c((i + j) as f64, 1.0));
        let y = mode_multiply(&a2, &x, 2).unwrap();
        assert_eq!(y.shape(), &[3, 2, 4]);
        for i in 0..3 {
            for k in 0..2 {
                for p in 0..4 {
                    let expect: Complex64 = (0..2).map(|q| a2[(p, q)] * x.get(&[i, k, q])).sum();
                    assert!((y.get(&[i, k, p]) - expect).norm() < 1e-14);
                }
            }
        }
        let m = random_matrix(&mut rng, 3);
        let xm = CMatrix::from_fn(3, 4, |i, j| c(i as f64, j as f64));
        let prod = mode_multiply(&m, &Tensor::from_matrix(&xm), 0).unwrap().to_matrix();
        assert!((prod - &m * &xm).norm() < 1e-14);
        assert!(mode_multiply(&m, &x, 1).is_err());
        assert!(mode_multiply(&m, &x, 3).is_err());
    }

    #[test]
    fn tensor_solve_small_cases() {
        let b = Tensor::from_fn(vec![2, 3, 2], |i| c(i[0] as f64, (i[1] * i[2]) as f64)).unwrap();
        let ids = vec![CMatrix::identity(2, 2), CMatrix::identity(3, 3), CMatrix::identity(2, 2)];
        let x = sylvester_tensor_solve(&TensorLinearSystem::new(ids, b.clone()).unwrap()).unwrap();
        assert!(x.sub(&b.scale(c(1.0 / 3.0, 0.0))).unwrap().max_abs() < 1e-15);

        let one = |v: f64| CMatrix::from_element(1, 1, c(v, 0.0));
        let sys = TensorLinearSystem::new(vec![one(1.0), one(2.0), one(4.0)], Tensor::new(vec![1, 1, 1], vec![c(14.0, 7.0)]).unwrap()).unwrap();
        assert_eq!(kronecker_oracle(&sys).unwrap().data()[0], c(2.0, 1.0));
        assert_eq!(sylvester_tensor_solve(&sys).unwrap().data()[0], c(2.0, 1.0));

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a: Vec<CMatrix> = [4, 3, 5].iter().map(|&n| random_matrix(&mut rng, n) + CMatrix::identity(n, n) * c(3.0, 0.0)).collect();
        let sys = TensorLinearSystem::new(a, random_tensor(&mut rng, vec![4, 3, 5])).unwrap();
        let x = sylvester_tensor_solve(&sys).unwrap();
        let oracle = kronecker_oracle(&sys).unwrap();
        assert!(x.sub(&oracle).unwrap().max_abs() <= 1e-10 * oracle.max_abs());

        let a: Vec<CMatrix> = (0..4).map(|_| random_matrix(&mut rng, 3) + CMatrix::identity(3, 3) * c(2.0, 0.0)).collect();
        let sys = TensorLinearSystem::new(a, random_tensor(&mut rng, vec![3, 3, 3, 3])).unwrap();
        let x = kronecker_oracle(&sys).unwrap();
        assert!(sys.residual(&x).unwrap() <= 1e-11);
    }

    #[test]
    fn singular_and_shape_errors() {
        let one = |v: f64| CMatrix::from_element(1, 1, c(v, 0.0));
        let sys = TensorLinearSystem::new(vec![one(1.0), one(-1.0)], Tensor::new(vec![1, 1], vec![c(1.0, 0.0)]).unwrap()).unwrap();
        assert!(matches!(sylvester_tensor_solve(&sys), Err(Error::Singular(_))));
        assert!(matches!(kronecker_oracle(&sys), Err(Error::Singular(_))));
        assert!(TensorLinearSystem::new(vec![one(1.0)], Tensor::zeros(vec![2]).unwrap()).is_err());
        assert!(TensorLinearSystem::new(vec![one(1.0)], Tensor::zeros(vec![1, 1]).unwrap()).is_err());
        let big = Tensor::zeros(vec![80, 80]).unwrap();
        let sys = TensorLinearSystem::new(vec![CMatrix::identity(80, 80), CMatrix::identity(80, 80)], big).unwrap();
        assert!(matches!(kronecker_oracle(&sys), Err(Error::BudgetExceeded(_))));
        assert!(Tensor::new(vec![2, 2], vec![ZERO; 3]).is_err());
    }

    #[test]
    fn layout_is_first_index_fastest() {
        let t = Tensor::from_fn(vec![2, 3], |i| c((i[0] + 10 * i[1]) as f64, 0.0)).unwrap();
        let re: Vec<f64> = t.data().iter().map(|v| v.re).collect();
        assert_eq!(re, vec![0.0, 1.0, 10.0, 11.0, 20.0, 21.0]);
        assert_eq!(t.linear_index(&[1, 2]), 5);
        let p = t.permute(&[1, 0]).unwrap();
        assert_eq!(p.shape(), &[3, 2]);
        assert_eq!(p.get(&[2, 1]), t.get(&[1, 2]));
    }
}
