//! Caputo-type advection-diffusion problems on `[0, T] x R^d`:
//!
//! `D^alpha u = Δu + 2 x·∇u + 2 d u + h`, `u(0, x) = e^{-x·x}`, with exact
//! solution `e^{imt - x·x}`. Time is discretized with the value-space Caputo
//! matrix, space with Hermite collocation, and the initial condition enters
//! through the lifting `U = E □_1 U_inner + F`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermite::{build_hermite, HermiteGrid};
use crate::operators::{build_operators, OperatorBundle, OperatorRequest, Param};
use crate::oracles::caputo_exp;
use crate::tensor::{mode_multiply, sylvester_solve, sylvester_tensor_solve, CMatrix, Tensor, TensorLinearSystem};

/// Default cap on the number of entries of the full solution array.
pub const DEFAULT_MAX_CELLS: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub struct PdeProblem {
    pub alpha: Param,
    pub m: u32,
    pub t_final: Param,
    pub nt: usize,
    pub nx: usize,
    pub b: f64,
    pub d: usize,
    /// `None` selects the default for `nt` nodes.
    pub digits: Option<u32>,
    /// Multiplies the initial data and the forcing; `0` gives the zero problem.
    pub amplitude: f64,
    pub max_cells: usize,
}

impl PdeProblem {
    pub fn new(alpha: &str, m: u32, t_final: &str, nt: usize, nx: usize, d: usize) -> Result<Self> {
        let p = Self {
            alpha: Param::parse(alpha)?,
            m,
            t_final: Param::parse(t_final)?,
            nt,
            nx,
            b: 1.0,
            d,
            digits: None,
            amplitude: 1.0,
            max_cells: DEFAULT_MAX_CELLS,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_b(self, b: f64) -> Self {
        Self { b, ..self }
    }

    pub fn with_digits(self, digits: u32) -> Self {
        Self { digits: Some(digits), ..self }
    }

    pub fn with_amplitude(self, amplitude: f64) -> Self {
        Self { amplitude, ..self }
    }

    pub fn with_max_cells(self, max_cells: usize) -> Self {
        Self { max_cells, ..self }
    }

    /// Shape of the full solution array `(Nt+1, Nx, ..., Nx)`.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.nt + 1];
        s.extend(std::iter::repeat(self.nx).take(self.d));
        s
    }

    pub fn cells(&self) -> Option<usize> {
        self.shape().iter().try_fold(1usize, |acc, &n| acc.checked_mul(n))
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.alpha.value();
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.t_final.value() <= 0.0 {
            return Err(Error::InvalidArgument(format!("T must be positive, got {}", self.t_final)));
        }
        if self.nt < 2 || self.nx < 2 || self.d == 0 {
            return Err(Error::InvalidArgument(format!(
                "need Nt >= 2, Nx >= 2 and d >= 1, got Nt={} Nx={} d={}",
                self.nt, self.nx, self.d
            )));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::InvalidArgument(format!("scale factor must be positive, got {}", self.b)));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidArgument("amplitude must be finite".into()));
        }
        match self.cells() {
            Some(c) if c <= self.max_cells => Ok(()),
            _ => Err(Error::BudgetExceeded(format!(
                "solution array of shape {:?} exceeds {} cells",
                self.shape(),
                self.max_cells
            ))),
        }
    }

    pub fn operator_request(&self) -> Result<OperatorRequest> {
        OperatorRequest::new(self.alpha.text(), self.t_final.text(), self.nt, self.digits)
    }

    pub fn exact(&self, t: f64, x: &[f64]) -> Complex64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.amplitude * Complex64::new(-r2, self.m as f64 * t).exp()
    }
}

/// `E`: identity over a zero last row; `F`: zero except the last time row,
/// which holds the initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftingPair {
    pub e: DMatrix<f64>,
    pub f: Tensor,
}

impl LiftingPair {
    pub fn new(nt: usize, u0: &Tensor) -> Result<Self> {
        let mut shape = vec![nt + 1];
        shape.extend_from_slice(u0.shape());
        let plane = u0.data().len();
        let mut data = vec![Complex64::new(0.0, 0.0); (nt + 1) * plane];
        for (k, v) in u0.data().iter().enumerate() {
            data[nt + (nt + 1) * k] = *v;
        }
        let e = DMatrix::from_fn(nt + 1, nt, |i, j| if i == j { 1.0 } else { 0.0 });
        Ok(Self { e, f: Tensor::new(shape, data)? })
    }

    /// `E □_1 U_inner + F`.
    pub fn lift(&self, inner: &Tensor) -> Result<Tensor> {
        mode_multiply(&complexify(&self.e), inner, 0)?.add(&self.f)
    }
}

/// Everything needed to solve and check one discretized problem.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub problem: PdeProblem,
    pub grid: HermiteGrid,
    pub time: OperatorBundle,
    /// `G = D2 + 2 diag(x) D1 + 2 I`.
    pub g: DMatrix<f64>,
    /// Forcing on the full grid.
    pub h: Tensor,
    pub lifting: LiftingPair,
    pub system: TensorLinearSystem,
}

#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub u: Tensor,
    /// `max |U - e^{imt - x·x}|` over the full grid.
    pub error: f64,
}

/// The 1D system `A U_inner + U_inner B = C`.
#[derive(Debug, Clone)]
pub struct Sylvester1d {
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
}

fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn spatial_operator(grid: &HermiteGrid) -> DMatrix<f64> {
    let n = grid.nx;
    let mut g = &grid.d2 + DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&grid.x)) * 2.0 * &grid.d1;
    for i in 0..n {
        g[(i, i)] += 2.0;
    }
    g
}

/// Assembles `sum_j A_j □_j U_inner = C` with `A_1 = E^T D E`, `A_{j+1} = -G`
/// and `C = -(E^T D) □_1 F + E^T □_1 H`.
pub fn assemble_nd(problem: &PdeProblem) -> Result<Assembled> {
    problem.validate()?;
    let time = build_operators(&problem.operator_request()?)?;
    let grid = build_hermite(problem.nx, problem.b)?;
    let g = spatial_operator(&grid);
    let (nt, d) = (problem.nt, problem.d);
    let x = &grid.x;
    let m = problem.m as f64;
    let alpha = problem.alpha.value();

    let ct: Vec<Complex64> = time
        .nodes
        .t
        .iter()
        .map(|&t| caputo_exp(m, alpha, t).map(|v| v * problem.amplitude))
        .collect::<Result<_>>()?;
    let mut space_shape = vec![problem.nx; d];
    let u0 = Tensor::from_fn(space_shape.clone(), |idx| problem.exact(0.0, &coords(x, idx)))?;
    let gauss = Tensor::from_fn(space_shape.clone(), |idx| {
        Complex64::new((-coords(x, idx).iter().map(|v| v * v).sum::<f64>()).exp(), 0.0)
    })?;
    space_shape.insert(0, nt + 1);
    let h = Tensor::from_fn(space_shape, |idx| ct[idx[0]] * gauss.data()[linear(&idx[1..], problem.nx)])?;

    let lifting = LiftingPair::new(nt, &u0)?;
    let dt = complexify(&time.d);
    let etd = dt.rows(0, nt).into_owned();
    let a1 = etd.columns(0, nt).into_owned();
    let et = complexify(&lifting.e.transpose());
    let c = mode_multiply(&et, &h, 0)?.sub(&mode_multiply(&etd, &lifting.f, 0)?)?;
    let mut a = vec![a1];
    a.extend(std::iter::repeat(complexify(&(-&g))).take(d));
    let system = TensorLinearSystem::new(a, c)?;
    Ok(Assembled { problem: problem.clone(), grid, time, g, h, lifting, system })
}

/// The 1D problem in matrix form, `B = -G^T`.
pub fn assemble_1d(problem: &PdeProblem) -> Result<(Assembled, Sylvester1d)> {
    if problem.d != 1 {
        return Err(Error::InvalidArgument(format!("1D assembly needs d = 1, got {}", problem.d)));
    }
    let asm = assemble_nd(problem)?;
    let syl = Sylvester1d {
        a: asm.system.a[0].clone(),
        b: complexify(&asm.g.transpose()).map(|v| -v),
        c: asm.system.b.to_matrix(),
    };
    Ok((asm, syl))
}

fn coords(x: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| x[i]).collect()
}

fn linear(idx: &[usize], n: usize) -> usize {
    idx.iter().rev().fold(0, |acc, &i| acc * n + i)
}

fn finish(asm: &Assembled, inner: &Tensor) -> Result<PdeSolution> {
    let u = asm.lifting.lift(inner)?;
    let t = &asm.time.nodes.t;
    let x = &asm.grid.x;
    let exact = Tensor::from_fn(u.shape().to_vec(), |idx| asm.problem.exact(t[idx[0]], &coords(x, &idx[1..])))?;
    let error = u.sub(&exact)?.max_abs();
    Ok(PdeSolution { u, error })
}

pub fn solve_1d(problem: &PdeProblem) -> Result<(Assembled, PdeSolution)> {
    let (asm, syl) = assemble_1d(problem)?;
    let inner = sylvester_solve(&syl.a, &syl.b, &syl.c)?;
    let sol = finish(&asm, &Tensor::from_matrix(&inner))?;
    Ok((asm, sol))
}

pub fn solve_nd(problem: &PdeProblem) -> Result<(Assembled, PdeSolution)> {
    let asm = assemble_nd(problem)?;
    let inner = sylvester_tensor_solve(&asm.system)?;
    let sol = finish(&asm, &inner)?;
    Ok((asm, sol))
}

/// `max |D □_1 U - sum_j G □_{j+1} U - H|` over the rows `t_j > 0`, where the
/// equation is collocated.
pub fn residual(asm: &Assembled, u: &Tensor) -> Result<f64> {
    let nt = asm.problem.nt;
    let mut r = mode_multiply(&complexify(&asm.time.d), u, 0)?.sub(&asm.h)?;
    let g = complexify(&asm.g);
    for j in 0..asm.problem.d {
        r = r.sub(&mode_multiply(&g, u, j + 1)?)?;
    }
    let rows = complexify(&asm.lifting.e.transpose());
    debug_assert_eq!(rows.nrows(), nt);
    Ok(mode_multiply(&rows, &r, 0)?.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lifting_identities() {
        let u0 = Tensor::from_fn(vec![3, 2], |i| Complex64::new(1.0 + i[0] as f64, i[1] as f64)).unwrap();
        let lp = LiftingPair::new(4, &u0).unwrap();
        assert_eq!(lp.e.transpose() * &lp.e, DMatrix::identity(4, 4));
        let et = complexify(&lp.e.transpose());
        assert_eq!(mode_multiply(&et, &lp.f, 0).unwrap().max_abs(), 0.0);
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(lp.f.get(&[4, i, j]), u0.get(&[i, j]));
            }
        }
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(PdeProblem::new("1.2", 5, "2", 10, 8, 1).is_err());
        assert!(PdeProblem::new("0", 5, "2", 10, 8, 1).is_err());
        assert!(PdeProblem::new("0.5", 5, "2", 10, 8, 0).is_err());
        assert!(matches!(
            PdeProblem::new("0.5", 5, "2", 60, 16, 5),
            Err(Error::BudgetExceeded(_))
        ));
        let p = PdeProblem::new("0.5", 5, "2", 10, 8, 2).unwrap();
        assert!(assemble_1d(&p).is_err());
    }

    #[test]
    fn zero_problem() {
        let p = PdeProblem::new("0.5", 3, "1", 12, 6, 1).unwrap().with_amplitude(0.0);
        let (asm, syl) = assemble_1d(&p).unwrap();
        assert_eq!((syl.a.nrows(), syl.b.nrows(), syl.c.shape()), (12, 6, (12, 6)));
        assert_eq!(syl.c.camax(), 0.0);
        let (_, sol) = solve_1d(&p).unwrap();
        assert_eq!(sol.u.max_abs(), 0.0);
        assert_eq!(residual(&asm, &sol.u).unwrap(), 0.0);
        let p = PdeProblem::new("0.5", 3, "1", 6, 4, 2).unwrap().with_amplitude(0.0);
        let (asm, sol) = solve_nd(&p).unwrap();
        assert_eq!(asm.system.b.max_abs(), 0.0);
        assert_eq!(sol.u.max_abs(), 0.0);
    }

    #[test]
    fn one_dimension_agrees_with_tensor_form() {
        let p = PdeProblem::new("0.6", 2, "1", 24, 10, 1).unwrap();
        let (_, s1) = solve_1d(&p).unwrap();
        let (_, s2) = solve_nd(&p).unwrap();
        assert!(s1.u.sub(&s2.u).unwrap().max_abs() <= 1e-12);
    }
}
