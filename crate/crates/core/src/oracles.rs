//! Reference values for the operator matrices: closed forms for the Caputo
//! derivative and fractional integral of `e^{imt}`, the incomplete gamma
//! function of complex argument, adaptive quadrature of the defining
//! integrals, and error metrics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::chebyshev::{build_m, cheb_diff_matrix, coeffs_from_samples};
use crate::error::{Error, Result};
use crate::operators::OperatorBundle;
use crate::precision::{big_gamma, PrecisionContext};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `Gamma(x)` in double precision.
pub fn gamma(x: f64) -> Result<f64> {
    let ctx = PrecisionContext::new(25)?;
    big_gamma(&ctx.from_f64(x)?, &ctx)?.to_f64()
}

fn check_s(s: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidArgument(format!("incomplete gamma needs s > 0, got {s}")));
    }
    Ok(())
}

/// The series is used near the imaginary axis, where the continued fraction
/// converges slowly; for `Re z >= s + 1` the upper function is small and
/// must come from the continued fraction.
fn use_series(s: f64, z: Complex64) -> bool {
    z.norm() <= s + 25.0 && z.re < s + 1.0
}

/// `sum_k z^k / (s (s+1) ... (s+k))`, summed at a precision wide enough to
/// absorb the cancellation between terms of size up to `e^|z|`.
fn lower_series_sum(s: f64, z: Complex64) -> Result<Complex64> {
    let bits = 84.0 + z.norm() * std::f64::consts::LOG2_E;
    let digits = ((bits / std::f64::consts::LOG2_10).ceil() as u32).max(PrecisionContext::MIN_DIGITS);
    let ctx = PrecisionContext::new(digits)?;
    let sb = ctx.from_f64(s)?;
    let (zr, zi) = (ctx.from_f64(z.re)?, ctx.from_f64(z.im)?);
    let mut tr = ctx.one() / sb.clone();
    let mut ti = ctx.zero();
    let (mut sr, mut si) = (tr.clone(), ti.clone());
    let zabs = z.norm();
    for k in 1..100_000u32 {
        let denom = &sb + &ctx.from_i64(k as i64);
        let nr = (&tr * &zr - &ti * &zi) / denom.clone();
        let ni = (&tr * &zi + &ti * &zr) / denom;
        tr = nr;
        ti = ni;
        sr = sr + &tr;
        si = si + &ti;
        if k as f64 > zabs {
            let term = tr.to_f64()?.hypot(ti.to_f64()?);
            let sum = sr.to_f64()?.hypot(si.to_f64()?);
            if term <= 1e-25 * sum {
                return Ok(Complex64::new(sr.to_f64()?, si.to_f64()?));
            }
        }
    }
    Err(Error::NonConvergence("incomplete gamma series"))
}

/// `Gamma(s, z) e^z z^-s` by the Lentz continued fraction.
fn upper_continued_fraction(s: f64, z: Complex64) -> Result<Complex64> {
    let tiny = 1e-300;
    let mut b = z + 1.0 - s;
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..100_000 {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.norm() < tiny {
            d = Complex64::new(tiny, 0.0);
        }
        c = b + an / c;
        if c.norm() < tiny {
            c = Complex64::new(tiny, 0.0);
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).norm() < 1e-15 {
            return Ok(h);
        }
    }
    Err(Error::NonConvergence("incomplete gamma continued fraction"))
}

/// Lower incomplete gamma `gamma(s, z) = int_0^z t^(s-1) e^-t dt`.
pub fn lower_incomplete_gamma(s: f64, z: Complex64) -> Result<Complex64> {
    check_s(s)?;
    if z == Complex64::new(0.0, 0.0) {
        return Ok(z);
    }
    if use_series(s, z) {
        Ok(z.powf(s) * (-z).exp() * lower_series_sum(s, z)?)
    } else {
        Ok(gamma(s)? - z.powf(s) * (-z).exp() * upper_continued_fraction(s, z)?)
    }
}

/// Upper incomplete gamma `Gamma(s, z) = int_z^inf t^(s-1) e^-t dt`
/// (principal branch of `z^s`).
pub fn upper_incomplete_gamma(s: f64, z: Complex64) -> Result<Complex64> {
    check_s(s)?;
    if use_series(s, z) {
        Ok(gamma(s)? - lower_incomplete_gamma(s, z)?)
    } else {
        Ok(z.powf(s) * (-z).exp() * upper_continued_fraction(s, z)?)
    }
}

/// `(im)^p = m^p e^{i p pi / 2}` for `m > 0`.
fn im_pow(m: f64, p: f64) -> Complex64 {
    Complex64::from_polar(m.powf(p), p * std::f64::consts::FRAC_PI_2)
}

fn is_integer(alpha: f64) -> bool {
    alpha.fract() == 0.0
}

/// Caputo derivative of order `alpha` of `e^{imt}`, for non-integer `alpha`:
/// `(im)^alpha e^{imt} gamma(s, imt) / Gamma(s)` with `s = ceil(alpha) - alpha`.
pub fn caputo_exp(m: f64, alpha: f64, t: f64) -> Result<Complex64> {
    if is_integer(alpha) || alpha < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "closed form needs a positive non-integer order, got {alpha}"
        )));
    }
    let s = alpha.ceil() - alpha;
    let z = Complex64::new(0.0, m * t);
    Ok(im_pow(m, alpha) * z.exp() * lower_incomplete_gamma(s, z)? / gamma(s)?)
}

/// Riemann-Liouville integral of order `alpha` of `e^{imt}`:
/// `(im)^-alpha e^{imt} gamma(alpha, imt) / Gamma(alpha)`, and `e^{imt}` for `alpha = 0`.
pub fn rl_exp(m: f64, alpha: f64, t: f64) -> Result<Complex64> {
    let z = Complex64::new(0.0, m * t);
    if alpha == 0.0 {
        return Ok(z.exp());
    }
    if alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("order must be nonnegative, got {alpha}")));
    }
    Ok(im_pow(m, -alpha) * z.exp() * lower_incomplete_gamma(alpha, z)? / gamma(alpha)?)
}

/// What the Caputo matrices approximate for `e^{imt}`: the closed form for
/// non-integer orders and `(im)^alpha e^{imt}` for integer orders (including 0).
pub fn derivative_exp(m: f64, alpha: f64, t: f64) -> Result<Complex64> {
    if is_integer(alpha) {
        if alpha < 0.0 {
            return Err(Error::InvalidArgument(format!("order must be nonnegative, got {alpha}")));
        }
        Ok(I.powi(alpha as i32) * m.powi(alpha as i32) * Complex64::new(0.0, m * t).exp())
    } else {
        caputo_exp(m, alpha, t)
    }
}

// 15-point Kronrod rule with its embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let pair = f(c - x) + f(c + x);
        kronrod += pair * WGK[i];
        if i % 2 == 1 {
            gauss += pair * WG[i / 2];
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).norm())
}

/// Globally adaptive Gauss-Kronrod quadrature of a complex integrand.
/// Returns the estimate when its error bound drops below
/// `max(abs_tol, rel_tol * |integral|)`.
pub fn integrate(
    f: &dyn Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Complex64> {
    const MAX_INTERVALS: usize = 20_000;
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (v, e) = gk15(f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total: Complex64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return Ok(total);
        }
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::ToleranceNotMet(err));
        }
        let (worst, _) = parts
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::ToleranceNotMet(err));
        }
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

const QUAD_REL_TOL: f64 = 1e-12;

/// `(1 / Gamma(s)) int_0^t (t - tau)^(s-1) g(tau) dtau` for `s > 0`,
/// integrated in `w = (t - tau)^s` when `s < 1` to remove the endpoint
/// singularity.
fn weakly_singular(g: &dyn Fn(f64) -> Complex64, s: f64, t: f64) -> Result<Complex64> {
    if t == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let scale = g(t).norm().max(g(0.0).norm()).max(g(0.5 * t).norm());
    let abs_tol = 1e-15 * scale * t.max(1.0);
    if s < 1.0 {
        let inv = 1.0 / s;
        let h = |w: f64| g((t - w.powf(inv)).max(0.0));
        Ok(integrate(&h, 0.0, t.powf(s), QUAD_REL_TOL, abs_tol)? / gamma(s + 1.0)?)
    } else {
        let h = |tau: f64| g(tau) * (t - tau).powf(s - 1.0);
        Ok(integrate(&h, 0.0, t, QUAD_REL_TOL, abs_tol)? / gamma(s)?)
    }
}

/// Caputo derivative of order `alpha` at `t`, by quadrature of its defining
/// integral. `nth_derivative` must evaluate `f^(n)` with `n = ceil(alpha)`.
pub fn caputo_quadrature(nth_derivative: &dyn Fn(f64) -> Complex64, n: usize, alpha: f64, t: f64) -> Result<Complex64> {
    if alpha < 0.0 || n as f64 != alpha.ceil() {
        return Err(Error::InvalidArgument(format!("derivative order {n} must equal ceil({alpha})")));
    }
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("t must be nonnegative, got {t}")));
    }
    if is_integer(alpha) {
        return Ok(nth_derivative(t));
    }
    weakly_singular(nth_derivative, n as f64 - alpha, t)
}

/// Riemann-Liouville integral of order `alpha` at `t`, by quadrature.
pub fn rl_quadrature(f: &dyn Fn(f64) -> Complex64, alpha: f64, t: f64) -> Result<Complex64> {
    if alpha < 0.0 || t < 0.0 {
        return Err(Error::InvalidArgument(format!("need alpha >= 0 and t >= 0, got {alpha}, {t}")));
    }
    if alpha == 0.0 {
        return Ok(f(t));
    }
    weakly_singular(f, alpha, t)
}

/// Test function `e^{imt}` together with the operator parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTestCase {
    pub m: f64,
    pub alpha: f64,
    pub t_final: f64,
    pub n: usize,
}

impl ExpTestCase {
    pub const MAX_MT: f64 = 1e3;

    pub fn new(m: f64, alpha: f64, t_final: f64, n: usize) -> Result<Self> {
        if !(m > 0.0 && alpha >= 0.0 && t_final > 0.0 && n >= 1) {
            return Err(Error::InvalidArgument(format!(
                "invalid test case m={m} alpha={alpha} T={t_final} N={n}"
            )));
        }
        if m * t_final > Self::MAX_MT {
            return Err(Error::InvalidArgument(format!("m*T = {} exceeds {}", m * t_final, Self::MAX_MT)));
        }
        Ok(Self { m, alpha, t_final, n })
    }
}

/// Errors of the operator matrices applied to samples of `e^{imt}`.
///
/// `err_*` fields are maximum relative errors (node `t = 0` excluded for
/// non-integer orders); the remaining fields are maximum absolute errors
/// over all nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub err_dhat: f64,
    pub err_d: f64,
    /// Integer `alpha >= 1` only: the power of the Chebyshev differentiation matrix.
    pub err_dpow: Option<f64>,
    pub m_f_vs_fhat: f64,
    pub dhat_fhat_unfiltered: f64,
    pub dhat_fhat_filtered: f64,
    pub d_f: f64,
    pub dhat_m_f: f64,
    pub ehat_fhat: f64,
    pub e_f: f64,
    pub ehat_m_f: f64,
}

impl ErrorReport {
    /// `(name, value)` pairs of the absolute errors, in display order.
    pub fn absolute_errors(&self) -> [(&'static str, f64); 8] {
        [
            ("M*f - fhat", self.m_f_vs_fhat),
            ("Dhat*fhat (no filter)", self.dhat_fhat_unfiltered),
            ("Dhat*fhat (filter)", self.dhat_fhat_filtered),
            ("D*f", self.d_f),
            ("Dhat*M*f", self.dhat_m_f),
            ("Ehat*fhat", self.ehat_fhat),
            ("E*f", self.e_f),
            ("Ehat*M*f", self.ehat_m_f),
        ]
    }
}

fn cmat(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

fn max_abs_diff(a: &DVector<Complex64>, b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn max_rel_diff(a: &DVector<Complex64>, b: &[Complex64], rows: usize) -> f64 {
    a.iter()
        .zip(b)
        .take(rows)
        .map(|(x, y)| (x - y).norm() / y.norm())
        .fold(0.0, f64::max)
}

/// Computes every error of `bundle` on `e^{imt}`. `apply_filter` selects the
/// coefficients used for `err_dhat` and `Ehat*fhat`.
pub fn relative_error_metrics(bundle: &OperatorBundle, case: &ExpTestCase, apply_filter: bool) -> Result<ErrorReport> {
    let req = &bundle.request;
    let n = req.n;
    if case.n != n
        || (case.alpha - req.alpha.value()).abs() > 1e-15 * case.alpha.max(1.0)
        || (case.t_final - req.t_final.value()).abs() > 1e-15 * case.t_final
    {
        return Err(Error::ShapeMismatch("test case and operator bundle parameters differ".into()));
    }
    let alpha = case.alpha;
    let m = case.m;
    let t = &bundle.nodes.t;

    let f: Vec<Complex64> = t.iter().map(|&tj| Complex64::new(0.0, m * tj).exp()).collect();
    let fv = DVector::from_vec(f.clone());
    let fhat_raw = coeffs_from_samples(&f, false)?;
    let fhat_filt = coeffs_from_samples(&f, true)?;
    let fhat = if apply_filter { &fhat_filt } else { &fhat_raw };
    let fhat_v = DVector::from_vec(fhat.clone());

    let dref: Vec<Complex64> = t.iter().map(|&tj| derivative_exp(m, alpha, tj)).collect::<Result<_>>()?;
    let iref: Vec<Complex64> = t.iter().map(|&tj| rl_exp(m, alpha, tj)).collect::<Result<_>>()?;

    let dhat = cmat(&bundle.dhat);
    let d = cmat(&bundle.d);
    let ehat = cmat(&bundle.ehat);
    let e = cmat(&bundle.e);
    let m64 = cmat(&build_m(n, &PrecisionContext::new(20)?)?.m);
    let mf = &m64 * &fv;

    let integer = is_integer(alpha);
    let rows = if integer { n + 1 } else { n };

    let dhat_fhat = &dhat * &fhat_v;
    let d_f = &d * &fv;
    let err_dpow = if integer && alpha >= 1.0 {
        let base = cheb_diff_matrix(n)? * (2.0 / case.t_final);
        let mut p = DMatrix::identity(n + 1, n + 1);
        for _ in 0..alpha as usize {
            p = &base * p;
        }
        Some(max_rel_diff(&(cmat(&p) * &fv), &dref, rows))
    } else {
        None
    };

    Ok(ErrorReport {
        err_dhat: max_rel_diff(&dhat_fhat, &dref, rows),
        err_d: max_rel_diff(&d_f, &dref, rows),
        err_dpow,
        m_f_vs_fhat: max_abs_diff(&mf, &fhat_raw),
        dhat_fhat_unfiltered: max_abs_diff(&(&dhat * DVector::from_vec(fhat_raw.clone())), &dref),
        dhat_fhat_filtered: max_abs_diff(&(&dhat * DVector::from_vec(fhat_filt.clone())), &dref),
        d_f: max_abs_diff(&d_f, &dref),
        dhat_m_f: max_abs_diff(&(&dhat * &mf), &dref),
        ehat_fhat: max_abs_diff(&(&ehat * &fhat_v), &iref),
        e_f: max_abs_diff(&(&e * &fv), &iref),
        ehat_m_f: max_abs_diff(&(&ehat * &mf), &iref),
    })
}
