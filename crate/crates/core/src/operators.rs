//! Caputo differentiation and Riemann-Liouville integration matrices.
//!
//! With `n = ceil(alpha)`, the matrices acting on Chebyshev coefficients are
//!
//! ```text
//! Dhat = D1 * diag(d2) * C[n.., :]     D1[j, l] = t_j^(l - alpha),  l = n..=N
//! Ehat = E1 * diag(e2) * C             E1[j, l] = t_j^(l + alpha),  l = 0..=N
//! ```
//!
//! where `d2[l] = l! / (T^l Gamma(l + 1 - alpha))` and
//! `e2[l] = l! / (T^l Gamma(l + 1 + alpha))`. The value-space matrices are
//! `D = Dhat * M` and `E = Ehat * M`. Everything is computed at the requested
//! precision and only the four final matrices are rounded to 64 bits.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::chebyshev::{build_m, make_nodes_big, ExactCoeffMatrix, NodeSet};
use crate::error::{Error, Result};
use crate::precision::{big_gamma, factorial, BigMatrix, BigReal, PrecisionContext};

/// A real parameter given as a decimal literal. The literal is kept so it can
/// be rounded once to whatever precision a build uses.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    text: String,
    value: f64,
}

impl Param {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim().to_string();
        let ctx = PrecisionContext::new(PrecisionContext::MIN_DIGITS)?;
        let value = ctx.parse(&text)?.to_f64()?;
        Ok(Self { text, value })
    }

    /// Uses the shortest decimal that round-trips to `v`.
    pub fn from_f64(v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("{v} is not finite")));
        }
        Self::parse(&format!("{v:e}"))
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn to_big(&self, ctx: &PrecisionContext) -> BigReal {
        ctx.parse(&self.text).expect("validated at construction")
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorRequest {
    pub alpha: Param,
    pub t_final: Param,
    pub n: usize,
    pub digits: u32,
}

impl OperatorRequest {
    /// `digits = None` selects [`estimate_digits`].
    pub fn new(alpha: &str, t_final: &str, n: usize, digits: Option<u32>) -> Result<Self> {
        let req = Self {
            alpha: Param::parse(alpha)?,
            t_final: Param::parse(t_final)?,
            n,
            digits: digits.unwrap_or_else(|| estimate_digits(n)),
        };
        req.validate()?;
        Ok(req)
    }

    pub fn with_digits(&self, digits: u32) -> Self {
        Self { digits, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidRequest("N must be at least 1".into()));
        }
        if self.alpha.value() < 0.0 || self.alpha.to_big(&self.context()?).is_negative() {
            return Err(Error::InvalidRequest(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if self.t_final.value() <= 0.0 {
            return Err(Error::InvalidRequest(format!("T must be positive, got {}", self.t_final)));
        }
        if self.ceil_alpha()? > self.n {
            return Err(Error::InvalidRequest(format!(
                "ceil(alpha) = {} exceeds N = {}",
                self.ceil_alpha()?,
                self.n
            )));
        }
        Ok(())
    }

    pub fn context(&self) -> Result<PrecisionContext> {
        PrecisionContext::new(self.digits)
    }

    pub fn ceil_alpha(&self) -> Result<usize> {
        let a = self.alpha.to_big(&self.context()?);
        usize::try_from(&a.ceil()).map_err(|_| Error::InvalidRequest("alpha out of range".into()))
    }

    pub fn alpha_is_integer(&self) -> Result<bool> {
        Ok(self.alpha.to_big(&self.context()?).is_integer())
    }
}

/// The four operator matrices in 64-bit precision.
#[derive(Debug, Clone)]
pub struct OperatorBundle {
    pub dhat: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub ehat: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub nodes: NodeSet,
    pub request: OperatorRequest,
}

impl OperatorBundle {
    pub fn matrices(&self) -> [(&'static str, &DMatrix<f64>); 4] {
        [("Dhat", &self.dhat), ("D", &self.d), ("Ehat", &self.ehat), ("E", &self.e)]
    }
}

/// `Gamma(l+1) / (T^l Gamma(l+1-alpha)) t^(l-alpha)`, the Caputo derivative of
/// `(t/T)^l`; zero when `l < ceil(alpha)`.
pub fn caputo_monomial(alpha: f64, l: usize, t_final: f64, t: f64) -> Result<f64> {
    let ctx = PrecisionContext::new(40)?;
    let a = ctx.from_f64(alpha)?;
    if alpha < 0.0 {
        return Err(Error::InvalidArgument("alpha must be nonnegative".into()));
    }
    if (l as f64) < alpha.ceil() {
        return Ok(0.0);
    }
    let lb = ctx.from_i64(l as i64);
    let num = ctx.from_int(&factorial(l as u64));
    let ratio = num / big_gamma(&(&lb + &ctx.one() - a.clone()), &ctx)?;
    let tt = ctx.from_f64(t)?;
    let scale = ctx.from_f64(t_final)?.powi(l as u64);
    (ratio / scale * tt.powf(&(lb - a))).to_f64()
}

/// `Gamma(l+1) / (T^l Gamma(l+1+alpha)) t^(l+alpha)`, the fractional integral of
/// `(t/T)^l`.
pub fn rl_monomial(alpha: f64, l: usize, t_final: f64, t: f64) -> Result<f64> {
    if alpha < 0.0 {
        return Err(Error::InvalidArgument("alpha must be nonnegative".into()));
    }
    let ctx = PrecisionContext::new(40)?;
    let a = ctx.from_f64(alpha)?;
    let lb = ctx.from_i64(l as i64);
    let num = ctx.from_int(&factorial(l as u64));
    let ratio = num / big_gamma(&(&lb + &ctx.one() + a.clone()), &ctx)?;
    let tt = ctx.from_f64(t)?;
    let scale = ctx.from_f64(t_final)?.powi(l as u64);
    (ratio / scale * tt.powf(&(lb + a))).to_f64()
}

/// `d2[l - ceil(alpha)] = Gamma(l+1) / (T^l Gamma(l+1-alpha))` for
/// `l = ceil(alpha)..=N`, as a cumulative product.
pub fn build_d2(alpha: &BigReal, n: usize, t_final: &BigReal, ctx: &PrecisionContext) -> Result<Vec<BigReal>> {
    let first = usize::try_from(&alpha.ceil()).map_err(|_| Error::InvalidRequest("alpha out of range".into()))?;
    if first > n {
        return Err(Error::InvalidRequest(format!("ceil(alpha) = {first} exceeds N = {n}")));
    }
    let step = |prev: &BigReal, l: usize| {
        let lb = ctx.from_i64(l as i64);
        prev * &(&lb / &((lb.clone() - alpha.clone()) * t_final.clone()))
    };
    let mut out = Vec::with_capacity(n + 1 - first);
    if alpha.is_integer() {
        let mut v = ctx.from_int(&factorial(first as u64)) / t_final.powi(first as u64);
        out.push(v.clone());
        for l in first + 1..=n {
            v = step(&v, l);
            out.push(v.clone());
        }
    } else {
        let mut v = ctx.one() / big_gamma(&(ctx.one() - alpha.clone()), ctx)?;
        for l in 1..=n {
            v = step(&v, l);
            if l >= first {
                out.push(v.clone());
            }
        }
    }
    Ok(out)
}

/// `e2[l] = Gamma(l+1) / (T^l Gamma(l+1+alpha))` for `l = 0..=N`.
pub fn build_e2(alpha: &BigReal, n: usize, t_final: &BigReal, ctx: &PrecisionContext) -> Result<Vec<BigReal>> {
    let mut v = ctx.one() / big_gamma(&(ctx.one() + alpha.clone()), ctx)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(v.clone());
    for l in 1..=n {
        let lb = ctx.from_i64(l as i64);
        v = v * (&lb / &((lb.clone() + alpha.clone()) * t_final.clone()));
        out.push(v.clone());
    }
    Ok(out)
}

/// `V[j, i] = t_j^(first + i + shift) * w[i]`, with `0^p = 0` for `p > 0` and
/// `0^0 = 1`. Each row starts from one real power and continues by repeated
/// multiplication with `t_j`.
fn scaled_powers(
    nodes: &[BigReal],
    first: usize,
    shift: &BigReal,
    weights: &[BigReal],
    ctx: &PrecisionContext,
) -> BigMatrix {
    let cols = weights.len();
    let mut rows: Vec<Vec<BigReal>> = Vec::with_capacity(nodes.len());
    for t in nodes {
        let mut row = Vec::with_capacity(cols);
        let p0 = ctx.from_i64(first as i64) + shift.clone();
        let mut pow = t.powf(&p0);
        for (i, w) in weights.iter().enumerate() {
            if i > 0 {
                pow = pow * t;
            }
            row.push(&pow * w);
        }
        rows.push(row);
    }
    BigMatrix::from_fn(nodes.len(), cols, |j, i| rows[j][i].clone())
}

/// The four matrices before rounding to 64 bits.
pub struct HighPrecisionOperators {
    pub dhat: BigMatrix,
    pub d: BigMatrix,
    pub ehat: BigMatrix,
    pub e: BigMatrix,
    pub nodes: Vec<BigReal>,
}

pub fn build_high_precision(req: &OperatorRequest, c: &ExactCoeffMatrix) -> Result<HighPrecisionOperators> {
    req.validate()?;
    let ctx = req.context()?;
    let n = req.n;
    let alpha = req.alpha.to_big(&ctx);
    let t_final = req.t_final.to_big(&ctx);
    let first = req.ceil_alpha()?;

    let nodes = make_nodes_big(n, &t_final, &ctx)?;
    let transform = build_m(n, &ctx)?;

    let d2 = build_d2(&alpha, n, &t_final, &ctx)?;
    let d1 = scaled_powers(&nodes, first, &-alpha.clone(), &d2, &ctx);
    let dhat = d1.matmul(&c.to_big(first, n, &ctx)?, &ctx)?;

    let e2 = build_e2(&alpha, n, &t_final, &ctx)?;
    let e1 = scaled_powers(&nodes, 0, &alpha, &e2, &ctx);
    let ehat = e1.matmul(&c.to_big(0, n, &ctx)?, &ctx)?;

    let d = dhat.matmul(&transform.m_high, &ctx)?;
    let e = ehat.matmul(&transform.m_high, &ctx)?;
    Ok(HighPrecisionOperators { dhat, d, ehat, e, nodes })
}

/// Builds all four matrices with a precomputed coefficient matrix of size at
/// least `req.n`.
pub fn build_operators_with(req: &OperatorRequest, c: &ExactCoeffMatrix) -> Result<OperatorBundle> {
    let hp = build_high_precision(req, c)?;
    let nodes = NodeSet {
        t_final: req.t_final.value(),
        n: req.n,
        t: hp.nodes.iter().map(BigReal::to_f64).collect::<Result<_>>()?,
    };
    Ok(OperatorBundle {
        dhat: hp.dhat.to_f64()?,
        d: hp.d.to_f64()?,
        ehat: hp.ehat.to_f64()?,
        e: hp.e.to_f64()?,
        nodes,
        request: req.clone(),
    })
}

pub fn build_operators(req: &OperatorRequest) -> Result<OperatorBundle> {
    build_operators_with(req, &ExactCoeffMatrix::build(req.n)?)
}

/// Like [`build_operators`], but fails with [`Error::PrecisionWarning`] when
/// the `digits` / `digits + 1` check does not pass.
pub fn build_operators_checked(req: &OperatorRequest) -> Result<OperatorBundle> {
    let check = verify_digits(req)?;
    if !check.ok {
        return Err(Error::PrecisionWarning { digits: req.digits, deviation: check.max_dev });
    }
    Ok(check.bundle)
}

#[derive(Debug, Clone)]
pub struct DigitCheck {
    /// Largest entrywise relative deviation is at most `2^-52`.
    pub ok: bool,
    pub max_dev: f64,
    /// All four matrices are bit-identical.
    pub exact_identical: bool,
    pub bundle: OperatorBundle,
}

/// Largest entrywise deviation `|a - b| / max(|a|, |b|)` over the four matrices.
pub fn bundle_deviation(a: &OperatorBundle, b: &OperatorBundle) -> f64 {
    let mut dev: f64 = 0.0;
    for ((_, x), (_, y)) in a.matrices().iter().zip(b.matrices().iter()) {
        for (u, v) in x.iter().zip(y.iter()) {
            if u != v {
                let scale = u.abs().max(v.abs());
                let d = if scale > 0.0 && scale.is_finite() { (u - v).abs() / scale } else { f64::INFINITY };
                dev = dev.max(if d.is_nan() { f64::INFINITY } else { d });
            }
        }
    }
    dev
}

/// Builds at `digits` and `digits + 1` and compares the 64-bit results.
pub fn verify_digits(req: &OperatorRequest) -> Result<DigitCheck> {
    let c = ExactCoeffMatrix::build(req.n)?;
    verify_digits_with(req, &c)
}

pub fn verify_digits_with(req: &OperatorRequest, c: &ExactCoeffMatrix) -> Result<DigitCheck> {
    let bundle = build_operators_with(req, c)?;
    let next = build_operators_with(&req.with_digits(req.digits + 1), c)?;
    let max_dev = bundle_deviation(&bundle, &next);
    let exact_identical = bundle.matrices().iter().zip(next.matrices().iter()).all(|((_, x), (_, y))| x == y);
    Ok(DigitCheck { ok: max_dev <= f64::EPSILON, max_dev, exact_identical, bundle })
}

/// Recommended digit count `ceil(0.78 N + 16)`.
pub fn estimate_digits(n: usize) -> u32 {
    // 0.78 N + 16 = (78 N + 1600) / 100, rounded up in integers
    ((78 * n as u64 + 1600).div_ceil(100)) as u32
}

/// Smallest digit counts at which each matrix built at `dig` and `dig + 1`
/// is bit-identical in 64 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DigitFrontier {
    pub dhat: u32,
    pub d: u32,
    pub ehat: u32,
    pub e: u32,
}

impl DigitFrontier {
    pub fn max(&self) -> u32 {
        self.dhat.max(self.d).max(self.ehat).max(self.e)
    }

    pub fn as_array(&self) -> [u32; 4] {
        [self.dhat, self.d, self.ehat, self.e]
    }
}

/// Bisection for the digit fixed point of each matrix. Builds are cached, so
/// each digit count is built at most once.
pub fn minimum_digits(alpha: &str, t_final: &str, n: usize, c: &ExactCoeffMatrix) -> Result<DigitFrontier> {
    let base = OperatorRequest::new(alpha, t_final, n, None)?;
    let mut cache: HashMap<u32, OperatorBundle> = HashMap::new();
    let mut get = |dig: u32| -> Result<OperatorBundle> {
        if let Some(b) = cache.get(&dig) {
            return Ok(b.clone());
        }
        let b = build_operators_with(&base.with_digits(dig), c)?;
        cache.insert(dig, b.clone());
        Ok(b)
    };
    let mut same = |dig: u32, which: usize| -> Result<bool> {
        let a = get(dig)?;
        let b = get(dig + 1)?;
        Ok(a.matrices()[which].1 == b.matrices()[which].1)
    };

    let mut result = [0u32; 4];
    for (which, slot) in result.iter_mut().enumerate() {
        let mut lo = PrecisionContext::MIN_DIGITS;
        if same(lo, which)? {
            *slot = lo;
            continue;
        }
        let mut hi = estimate_digits(n);
        while !same(hi, which)? {
            lo = hi;
            hi = hi.saturating_mul(2);
            if hi > 100_000 {
                return Err(Error::NonConvergence("digit search"));
            }
        }
        // invariant: lo fails, hi passes
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if same(mid, which)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        *slot = hi;
    }
    Ok(DigitFrontier { dhat: result[0], d: result[1], ehat: result[2], e: result[3] })
}
