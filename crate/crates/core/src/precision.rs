//! Configurable-precision real arithmetic and exact integers.
//!
//! A [`PrecisionContext`] fixes a number of significant decimal digits. Every
//! [`BigReal`] produced under it is a binary floating point number carrying
//! `ceil(digits * log2(10)) + 32` bits, rounded half-to-even after each
//! operation. Precision changes bit by bit with the digit count, so contexts
//! with `d` and `d + 1` digits always compute at different precisions.

mod kernel;

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use dashu_float::ops::SquareRoot;
use dashu_float::round::mode::HalfEven;
use dashu_float::{Context, DBig, FBig};
use dashu_int::IBig;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Exact signed integer of unbounded magnitude.
pub type BigInt = IBig;

type Float = FBig<HalfEven, 2>;

const GUARD_BITS: usize = 32;
const LOG2_10: f64 = std::f64::consts::LOG2_10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrecisionContext {
    digits: u32,
}

impl PrecisionContext {
    pub const MIN_DIGITS: u32 = 16;

    pub fn new(digits: u32) -> Result<Self> {
        if digits < Self::MIN_DIGITS {
            return Err(Error::InvalidArgument(format!(
                "precision must be at least {} digits, got {digits}",
                Self::MIN_DIGITS
            )));
        }
        Ok(Self { digits })
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    /// Binary precision of every value created under this context.
    pub fn bits(&self) -> usize {
        (self.digits as f64 * LOG2_10).ceil() as usize + GUARD_BITS
    }

    fn float(&self, x: Float) -> BigReal {
        BigReal(x.with_precision(self.bits()).value())
    }

    pub fn zero(&self) -> BigReal {
        self.from_i64(0)
    }

    pub fn one(&self) -> BigReal {
        self.from_i64(1)
    }

    pub fn from_i64(&self, v: i64) -> BigReal {
        self.float(Float::from(v))
    }

    pub fn from_int(&self, v: &BigInt) -> BigReal {
        self.float(Float::from(v.clone()))
    }

    /// Exact binary value of `v`, rounded to the context precision.
    pub fn from_f64(&self, v: f64) -> Result<BigReal> {
        let x = Float::try_from(v)
            .map_err(|_| Error::InvalidArgument(format!("{v} is not a finite number")))?;
        Ok(self.float(x))
    }

    /// Parses a decimal literal such as `"0.37"` or `"1.2e-3"` and rounds it
    /// once to the context precision, so `"0.37"` means 37/100 and not the
    /// nearest 64-bit float.
    pub fn parse(&self, text: &str) -> Result<BigReal> {
        let dec = DBig::from_str(text.trim())
            .map_err(|e| Error::InvalidArgument(format!("cannot parse {text:?}: {e}")))?;
        let bin = dec
            .with_rounding::<HalfEven>()
            .with_base_and_precision::<2>(self.bits())
            .value();
        Ok(BigReal(bin))
    }

    pub fn pi(&self) -> BigReal {
        BigReal(Context::<HalfEven>::new(self.bits()).pi::<2>().value())
    }

    /// `cos(r * pi / n)`. The integer ratio is reduced exactly to the first
    /// quadrant first, so symmetric arguments give results that agree to the
    /// last bit (up to sign), and the quadrant boundaries are exact.
    pub fn cos_pi_ratio(&self, r: i64, n: u64) -> BigReal {
        assert!(n > 0, "cos_pi_ratio needs a positive denominator");
        let n = n as i128;
        let mut r = (r as i128).rem_euclid(2 * n);
        if r > n {
            r = 2 * n - r;
        }
        let mut negate = false;
        if 2 * r > n {
            r = n - r;
            negate = true;
        }
        let value = if r == 0 {
            self.one()
        } else if 2 * r == n {
            return self.zero();
        } else {
            let wctx = Context::<HalfEven>::new(self.bits() + GUARD_BITS);
            let pi = wctx.pi::<2>().value();
            let arg = pi * Float::from(r as i64) / Float::from(n as i64);
            self.float(wctx.cos(arg.repr()).value(&wctx))
        };
        if negate {
            -value
        } else {
            value
        }
    }
}

/// Arbitrary-precision real number created under a [`PrecisionContext`].
#[derive(Clone, PartialEq, PartialOrd)]
pub struct BigReal(Float);

impl BigReal {
    pub fn is_zero(&self) -> bool {
        self.0.repr().is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.repr().sign() == dashu_int::Sign::Negative && !self.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.repr().is_int()
    }

    pub fn precision(&self) -> usize {
        self.0.precision()
    }

    pub fn abs(&self) -> BigReal {
        if self.is_negative() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn floor(&self) -> BigInt {
        self.0.floor().to_int().value()
    }

    pub fn ceil(&self) -> BigInt {
        self.0.ceil().to_int().value()
    }

    pub fn exp(&self) -> BigReal {
        BigReal(self.0.exp())
    }

    pub fn ln(&self) -> BigReal {
        BigReal(self.0.ln())
    }

    pub fn sqrt(&self) -> BigReal {
        BigReal(self.0.sqrt())
    }

    /// `self^exponent` for a positive base; `0^p = 0` for `p > 0` and `0^0 = 1`.
    pub fn powf(&self, exponent: &BigReal) -> BigReal {
        if self.is_zero() {
            let p = self.precision();
            let v = if exponent.is_zero() { 1 } else { 0 };
            return BigReal(Float::from(v).with_precision(p).value());
        }
        BigReal(self.0.powf(&exponent.0))
    }

    pub fn powi(&self, n: u64) -> BigReal {
        BigReal(self.0.powi(IBig::from(n)))
    }

    pub fn mul_i64(&self, k: i64) -> BigReal {
        BigReal(&self.0 * Float::from(k))
    }

    pub fn div_i64(&self, k: i64) -> BigReal {
        BigReal(&self.0 / Float::from(k))
    }

    /// Nearest 64-bit float (round half to even).
    pub fn to_f64(&self) -> Result<f64> {
        let v = self.0.to_f64().value();
        if v.is_infinite() {
            return Err(Error::Overflow(self.to_string_digits(20)));
        }
        Ok(v)
    }

    /// Decimal rendering with `digits` significant digits.
    pub fn to_string_digits(&self, digits: usize) -> String {
        let dec = self.0.clone().with_base_and_precision::<10>(digits).value();
        dec.to_string()
    }
}

impl fmt::Debug for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BigReal({})", self.to_string_digits(30))
    }
}

impl fmt::Display for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = ((self.precision() - GUARD_BITS.min(self.precision())) as f64 / LOG2_10)
            .floor()
            .max(1.0) as usize;
        f.write_str(&self.to_string_digits(digits))
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&BigReal> for &BigReal {
            type Output = BigReal;
            fn $method(self, rhs: &BigReal) -> BigReal {
                BigReal(&self.0 $op &rhs.0)
            }
        }
        impl $tr<BigReal> for BigReal {
            type Output = BigReal;
            fn $method(self, rhs: BigReal) -> BigReal {
                BigReal(self.0 $op rhs.0)
            }
        }
        impl $tr<&BigReal> for BigReal {
            type Output = BigReal;
            fn $method(self, rhs: &BigReal) -> BigReal {
                BigReal(self.0 $op &rhs.0)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
binop!(Div, div, /);

impl Neg for BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        BigReal(-self.0)
    }
}

/// `Gamma(x)` to the context precision.
///
/// Positive integers use the exact factorial. Other arguments are shifted
/// into `[1, 2)` by the functional equation and evaluated with the
/// truncated integral `int_0^R t^(y-1) e^-t dt`, expanded as the series
/// `R^y e^-R sum_k R^k / (y (y+1) ... (y+k))`, with `R` chosen so the
/// neglected tail is below `2^-(bits+64)`.
pub fn big_gamma(x: &BigReal, ctx: &PrecisionContext) -> Result<BigReal> {
    if x.is_integer() {
        let n = x.floor();
        if n <= IBig::ZERO {
            return Err(Error::Pole(x.to_string_digits(10)));
        }
        let n: u64 = u64::try_from(&n)
            .map_err(|_| Error::InvalidArgument("gamma argument too large".into()))?;
        return Ok(ctx.from_int(&factorial(n - 1)));
    }

    let work = ctx.bits() + 64;
    let xw = x.0.clone().with_precision(work).value();
    let fl: i64 = i64::try_from(&xw.floor().to_int().value())
        .map_err(|_| Error::InvalidArgument("gamma argument out of range".into()))?;
    if fl.unsigned_abs() > 1_000_000 {
        return Err(Error::InvalidArgument("gamma argument out of range".into()));
    }
    let shift = fl - 1;
    let y = &xw - Float::from(shift);
    let mut g = gamma_series(&y, work);
    if shift > 0 {
        // Gamma(x) = (x-1)(x-2)...(y) Gamma(y)
        for k in 0..shift {
            g = g * (&y + Float::from(k));
        }
    } else {
        // Gamma(y) = x (x+1) ... (y-1) Gamma(x)
        for k in 0..(-shift) {
            g = g / (&xw + Float::from(k));
        }
    }
    Ok(ctx.float(g))
}

/// `Gamma(y)` for `y` in `[1, 2)` at `bits` of working precision.
fn gamma_series(y: &Float, bits: usize) -> Float {
    let r = ((bits as f64) * std::f64::consts::LN_2 + (2.0 * bits as f64).ln() + 2.0).ceil() as i64;
    let rf = Float::from(r).with_precision(bits).value();
    let mut term = Float::ONE.with_precision(bits).value() / y;
    let mut sum = term.clone();
    let mut k: i64 = 1;
    loop {
        term = term * &rf / (y + Float::from(k));
        sum += &term;
        if k > r && (term.clone() << bits as isize) < sum {
            break;
        }
        k += 1;
    }
    let prefactor = (y * rf.ln() - &rf).exp();
    sum * prefactor
}

pub fn factorial(n: u64) -> BigInt {
    (2..=n).fold(IBig::ONE, |acc, k| acc * IBig::from(k))
}

/// Dense matrix of [`BigReal`] entries, stored row-major.
#[derive(Clone, Debug)]
pub struct BigMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigReal>,
}

impl BigMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> BigReal) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigReal {
        &self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[BigReal] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Matrix product. Each entry is the exactly accumulated dot product of
    /// the (already rounded) inputs, rounded once to the context precision,
    /// so the result does not depend on the summation order.
    pub fn matmul(&self, rhs: &BigMatrix, ctx: &PrecisionContext) -> Result<BigMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let lhs = kernel::Packed::from_entries(self.data.iter().map(|x| &x.0));
        let rhs_t = kernel::Packed::from_entries(
            (0..rhs.cols).flat_map(|k| (0..rhs.rows).map(move |l| &rhs.data[l * rhs.cols + k].0)),
        );
        let mut acc = kernel::DotAccumulator::new(lhs.limbs().max(rhs_t.limbs()));
        let inner = self.cols;
        let bits = ctx.bits();
        let mut data = Vec::with_capacity(self.rows * rhs.cols);
        for i in 0..self.rows {
            for k in 0..rhs.cols {
                let v = acc.dot(&lhs, i * inner, &rhs_t, k * inner, inner);
                data.push(BigReal(v.with_precision(bits).value()));
            }
        }
        Ok(BigMatrix { rows: self.rows, cols: rhs.cols, data })
    }

    /// Entrywise cast to 64-bit floats.
    pub fn to_f64(&self) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self.get(i, j).to_f64()?;
            }
        }
        Ok(out)
    }
}

/// Exact dot product of two equally long slices, rounded to `ctx`.
pub fn dot(a: &[BigReal], b: &[BigReal], ctx: &PrecisionContext) -> Result<BigReal> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("dot of lengths {} and {}", a.len(), b.len())));
    }
    let pa = kernel::Packed::from_entries(a.iter().map(|x| &x.0));
    let pb = kernel::Packed::from_entries(b.iter().map(|x| &x.0));
    let mut acc = kernel::DotAccumulator::new(pa.limbs().max(pb.limbs()));
    let v = acc.dot(&pa, 0, &pb, 0, a.len());
    Ok(ctx.float(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(d: u32) -> PrecisionContext {
        PrecisionContext::new(d).unwrap()
    }

    #[test]
    fn bits_follow_digits() {
        assert_eq!(ctx(100).bits(), 333 + 32);
        assert_ne!(ctx(30).bits(), ctx(31).bits());
        assert!(PrecisionContext::new(15).is_err());
    }

    #[test]
    fn gamma_at_one_and_half() {
        let c = ctx(60);
        assert_eq!(big_gamma(&c.one(), &c).unwrap(), c.one());
        let half = c.parse("0.5").unwrap();
        let g = big_gamma(&half, &c).unwrap();
        let sqrt_pi = c.pi().sqrt();
        let diff = (g - sqrt_pi).abs().to_f64().unwrap();
        assert!(diff < 1e-60, "{diff:e}");
    }

    #[test]
    fn gamma_frozen_values() {
        let c = ctx(60);
        let cases = [
            ("1.63", "0.897244232581872615059528200836502669605810232120304301299834"),
            ("0.63", "1.42419719457440097628496539815317884064414322558778460523783"),
            ("-2.37", "-1.18549435059836782051983505110752529909538930321710987964223"),
            ("7.5", "1871.25430579778834647607705360395042404177223244608425446229"),
            ("0.001", "999.423772484595466114982201299644000465217610145612232469542"),
        ];
        for (x, expect) in cases {
            let g = big_gamma(&c.parse(x).unwrap(), &c).unwrap();
            let e = c.parse(expect).unwrap();
            let rel = ((g - &e) / e).abs().to_f64().unwrap();
            assert!(rel < 1e-57, "Gamma({x}) rel err {rel:e}");
        }
    }

    #[test]
    fn gamma_poles_are_reported() {
        let c = ctx(20);
        for v in [0, -1, -7] {
            assert!(matches!(big_gamma(&c.from_i64(v), &c), Err(Error::Pole(_))));
        }
    }

    #[test]
    fn gamma_integers_are_factorials() {
        let c = ctx(40);
        let g = big_gamma(&c.from_i64(21), &c).unwrap();
        assert_eq!(g, c.from_int(&factorial(20)));
    }

    #[test]
    fn gamma_functional_equation_across_shifts() {
        let c = ctx(50);
        // Gamma(-0.3) * (-0.3) = Gamma(0.7), Gamma(3.7) = 2.7 * 1.7 * 0.7 * Gamma(0.7)
        let g07 = big_gamma(&c.parse("0.7").unwrap(), &c).unwrap();
        let gm03 = big_gamma(&c.parse("-0.3").unwrap(), &c).unwrap();
        let lhs = gm03 * c.parse("-0.3").unwrap();
        assert!((lhs - &g07).abs().to_f64().unwrap() < 1e-50);
        let g37 = big_gamma(&c.parse("3.7").unwrap(), &c).unwrap();
        let rhs = g07 * c.parse("2.7").unwrap() * c.parse("1.7").unwrap() * c.parse("0.7").unwrap();
        assert!((g37 - rhs).abs().to_f64().unwrap() < 1e-49);
    }

    #[test]
    fn to_f64_rounds_and_overflows() {
        let c = ctx(100);
        assert_eq!(c.one().to_f64().unwrap(), 1.0);
        assert_eq!(c.pi().to_f64().unwrap(), std::f64::consts::PI);
        let huge = c.parse("1e400").unwrap();
        assert!(matches!(huge.to_f64(), Err(Error::Overflow(_))));
        assert_eq!(c.parse("0.1").unwrap().to_f64().unwrap(), 0.1);
    }

    #[test]
    fn cosine_reduction_is_symmetric() {
        let c = ctx(50);
        for n in [3u64, 7, 100] {
            for r in 0..=(n as i64) {
                let a = c.cos_pi_ratio(r, n);
                let b = c.cos_pi_ratio(n as i64 - r, n);
                assert_eq!(a, -b.clone(), "n={n} r={r}");
                let f = a.to_f64().unwrap();
                let expect = (r as f64 * std::f64::consts::PI / n as f64).cos();
                assert!((f - expect).abs() < 1e-15);
            }
        }
        assert!(c.cos_pi_ratio(1, 2).is_zero());
        assert_eq!(c.cos_pi_ratio(4, 2), c.one());
    }

    #[test]
    fn powf_zero_base_convention() {
        let c = ctx(20);
        let z = c.zero();
        assert!(z.powf(&c.parse("0.63").unwrap()).is_zero());
        assert_eq!(z.powf(&c.zero()), c.one());
    }

    #[test]
    fn matmul_matches_sequential_sum() {
        let c = ctx(40);
        let a = BigMatrix::from_fn(3, 4, |i, j| c.parse(&format!("{}.{}7", i + 1, j)).unwrap());
        let b = BigMatrix::from_fn(4, 2, |i, j| {
            let v = c.from_i64((i * 3 + j) as i64 - 4);
            if (i + j) % 2 == 0 { (v.abs() + c.one()).ln().mul_i64(-1) } else { v }
        });
        let p = a.matmul(&b, &c).unwrap();
        for i in 0..3 {
            for k in 0..2 {
                let mut s = c.zero();
                for l in 0..4 {
                    s = s + a.get(i, l) * b.get(l, k);
                }
                let d = (p.get(i, k) - &s).abs().to_f64().unwrap();
                assert!(d < 1e-45, "{d:e}");
            }
        }
    }
}
