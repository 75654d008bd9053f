use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use fracspec::chebyshev::ExactCoeffMatrix;
use fracspec::operators::{
    build_operators_with, estimate_digits, minimum_digits, verify_digits_with, OperatorRequest, Param,
};
use fracspec::oracles::{relative_error_metrics, ExpTestCase};
use fracspec::pde::{residual, solve_1d, solve_nd, PdeProblem, DEFAULT_MAX_CELLS};
use fracspec::Error;
use nalgebra::DMatrix;

use crate::io::{matrix_csv, tensor_text, OutputSet, Parameters, RunManifest};
use crate::UsageError;

pub const MAX_CELLS_ENV: &str = "FRACSPEC_MAX_CELLS";

/// What a command prints and which files it wrote.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub files: Vec<PathBuf>,
}

fn finish(out: Option<OutputSet>, mut manifest: RunManifest, start: Instant, outcome: &mut Outcome) -> Result<()> {
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    if let Some(o) = out {
        outcome.files = o.write(manifest)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct GenmatArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: String,
    #[arg(long = "T")]
    pub t_final: String,
    #[arg(long = "N")]
    pub n: usize,
    #[arg(long)]
    pub digits: Option<u32>,
    #[arg(long, default_value = "fracspec")]
    pub out: PathBuf,
    /// Write the matrices even if the digit check fails.
    #[arg(long)]
    pub force: bool,
}

pub fn genmat(args: &GenmatArgs) -> Result<Outcome> {
    let start = Instant::now();
    let req = OperatorRequest::new(&args.alpha, &args.t_final, args.n, args.digits)?;
    let c = ExactCoeffMatrix::build(args.n)?;
    let check = verify_digits_with(&req, &c)?;
    let mut outcome = Outcome::default();
    if !check.ok {
        let err = Error::PrecisionWarning { digits: req.digits, deviation: check.max_dev };
        if !args.force {
            return Err(err.into());
        }
        writeln!(outcome.stderr, "warning: {err}")?;
    }
    let b = check.bundle;
    let mut out = OutputSet::new(&args.out);
    for (name, m) in b.matrices() {
        out.add(&format!("_{name}.csv"), matrix_csv(m));
    }
    out.add("_nodes.csv", matrix_csv(&DMatrix::from_column_slice(args.n + 1, 1, &b.nodes.t)));
    let mut manifest = RunManifest::new(
        "genmat",
        Parameters {
            alpha: Some(args.alpha.clone()),
            t_final: Some(args.t_final.clone()),
            n: Some(args.n),
            digits: Some(req.digits),
            ..Default::default()
        },
    );
    manifest.record("digit_check_passed", check.ok);
    manifest.record("digit_check_deviation", check.max_dev);
    for (name, m) in b.matrices() {
        writeln!(outcome.stdout, "{name},max_abs,{:.16e}", m.amax())?;
        manifest.record(&format!("{name}_max_abs"), m.amax());
    }
    finish(Some(out), manifest, start, &mut outcome)?;
    Ok(outcome)
}

#[derive(Debug, Clone, Args)]
pub struct DigitsArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: String,
    #[arg(long = "T")]
    pub t_final: String,
    #[arg(long = "Nmax")]
    pub n_max: usize,
    /// The sizes are step, 2 step, ... up to Nmax.
    #[arg(long, default_value_t = 10)]
    pub step: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitsRow {
    pub n: usize,
    /// Smallest digit count for which all four matrices are at their fixed point.
    pub min_digits: u32,
    pub per_matrix: [u32; 4],
    pub log10_max_c: f64,
}

/// Least-squares line `y = slope x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

pub fn digit_table(alpha: &str, t_final: &str, sizes: &[usize]) -> Result<Vec<DigitsRow>> {
    let Some(&n_max) = sizes.iter().max() else {
        return Ok(Vec::new());
    };
    let c = ExactCoeffMatrix::build(n_max)?;
    sizes
        .iter()
        .map(|&n| {
            let f = minimum_digits(alpha, t_final, n, &c)?;
            Ok(DigitsRow { n, min_digits: f.max(), per_matrix: f.as_array(), log10_max_c: c.log10_max_abs(n) })
        })
        .collect()
}

pub fn digits(args: &DigitsArgs) -> Result<Outcome> {
    let start = Instant::now();
    if args.n_max < 2 || args.step == 0 {
        bail!(UsageError("need Nmax >= 2 and step >= 1".into()));
    }
    OperatorRequest::new(&args.alpha, &args.t_final, args.n_max, None)?;
    let sizes: Vec<usize> = (1..).map(|k| k * args.step).take_while(|&n| n <= args.n_max).collect();
    let rows = digit_table(&args.alpha, &args.t_final, &sizes)?;
    let mut outcome = Outcome::default();
    let mut table = String::from("N,min_digits,Dhat,D,Ehat,E,log10_max_C\n");
    for r in &rows {
        let [a, b, c, d] = r.per_matrix;
        writeln!(table, "{},{},{a},{b},{c},{d},{:.16e}", r.n, r.min_digits, r.log10_max_c)?;
    }
    outcome.stdout.push_str(&table);
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let mut manifest = RunManifest::new(
        "digits",
        Parameters {
            alpha: Some(args.alpha.clone()),
            t_final: Some(args.t_final.clone()),
            n: Some(args.n_max),
            ..Default::default()
        },
    );
    let fits = [
        ("min_digits", rows.iter().map(|r| r.min_digits as f64).collect::<Vec<_>>()),
        ("log10_max_C", rows.iter().map(|r| r.log10_max_c).collect()),
    ];
    for (name, y) in fits {
        if let Some((slope, intercept)) = fit_line(&x, &y) {
            writeln!(outcome.stdout, "# fit {name}: slope={slope:.6} intercept={intercept:.6}")?;
            manifest.record(&format!("{name}_slope"), slope);
            manifest.record(&format!("{name}_intercept"), intercept);
        }
    }
    let out = args.out.as_ref().map(|p| {
        let mut o = OutputSet::new(p);
        o.add("_digits.csv", table);
        o
    });
    finish(out, manifest, start, &mut outcome)?;
    Ok(outcome)
}

#[derive(Debug, Clone, Args)]
pub struct FilterFlag {
    /// Zero Chebyshev coefficients below 2^-52 (default).
    #[arg(long = "filter", overrides_with = "no_filter")]
    filter: bool,
    #[arg(long = "no-filter", overrides_with = "filter")]
    no_filter: bool,
}

impl FilterFlag {
    pub fn enabled(&self) -> bool {
        !self.no_filter
    }
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: String,
    #[arg(long = "T")]
    pub t_final: String,
    #[arg(long = "N")]
    pub n: usize,
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub digits: Option<u32>,
    #[command(flatten)]
    pub filter: FilterFlag,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn verify_exp(args: &VerifyArgs) -> Result<Outcome> {
    let start = Instant::now();
    let req = OperatorRequest::new(&args.alpha, &args.t_final, args.n, args.digits)?;
    let case = ExpTestCase::new(args.m as f64, req.alpha.value(), req.t_final.value(), args.n)?;
    let bundle = build_operators_with(&req, &ExactCoeffMatrix::build(args.n)?)?;
    let report = relative_error_metrics(&bundle, &case, args.filter.enabled())?;
    let mut table = String::from("quantity,max_abs_error\n");
    let mut manifest = RunManifest::new(
        "verify-exp",
        Parameters {
            alpha: Some(args.alpha.clone()),
            t_final: Some(args.t_final.clone()),
            n: Some(args.n),
            m: Some(args.m),
            digits: Some(req.digits),
            filter: Some(args.filter.enabled()),
            ..Default::default()
        },
    );
    for (name, v) in report.absolute_errors() {
        writeln!(table, "{name},{v:.16e}")?;
        manifest.record(name, v);
    }
    writeln!(table, "err_Dhat (relative),{:.16e}", report.err_dhat)?;
    writeln!(table, "err_D (relative),{:.16e}", report.err_d)?;
    manifest.record("err_Dhat", report.err_dhat);
    manifest.record("err_D", report.err_d);
    if let Some(v) = report.err_dpow {
        writeln!(table, "err_Dpow (relative),{v:.16e}")?;
        manifest.record("err_Dpow", v);
    }
    let mut outcome = Outcome { stdout: table.clone(), ..Default::default() };
    let out = args.out.as_ref().map(|p| {
        let mut o = OutputSet::new(p);
        o.add("_errors.csv", table);
        o
    });
    finish(out, manifest, start, &mut outcome)?;
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    Alpha,
    #[value(name = "N")]
    N,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub mode: SweepMode,
    /// Comma separated values of the swept parameter.
    #[arg(long, conflicts_with = "range", allow_hyphen_values = true)]
    pub values: Option<String>,
    /// `start:stop:step`, inclusive.
    #[arg(long)]
    pub range: Option<String>,
    /// Fixed order for an N sweep.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Fixed size for an alpha sweep.
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: u32,
    #[arg(long = "T")]
    pub t_final: String,
    /// Working digits; defaults to the estimate for each N.
    #[arg(long)]
    pub digits: Option<u32>,
    #[command(flatten)]
    pub filter: FilterFlag,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Expands `start:stop:step` into decimal strings.
pub fn expand_range(spec: &str) -> Result<Vec<String>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        bail!(UsageError(format!("range must be start:stop:step, got {spec}")));
    };
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| UsageError(format!("bad number {s} in range")));
    let (a, b, h) = (parse(start)?, parse(stop)?, parse(step)?);
    if !(h > 0.0) {
        bail!(UsageError("range step must be positive".into()));
    }
    let mut out = Vec::new();
    let mut k = 0u32;
    loop {
        let v = a + k as f64 * h;
        if v > b + 1e-9 * h {
            break;
        }
        // shortest decimal after removing the accumulated rounding
        let v = (v * 1e12).round() / 1e12;
        out.push(format!("{v}"));
        k += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: String,
    pub n: usize,
    pub err_dhat: f64,
    pub err_d: f64,
    pub err_dpow: Option<f64>,
}

pub fn sweep_rows(
    points: &[(String, usize)],
    m: u32,
    t_final: &str,
    digits: Option<u32>,
    filter: bool,
) -> Result<Vec<SweepRow>> {
    let Some(n_max) = points.iter().map(|p| p.1).max() else {
        return Ok(Vec::new());
    };
    let c = ExactCoeffMatrix::build(n_max)?;
    points
        .iter()
        .map(|(alpha, n)| {
            let req = OperatorRequest::new(alpha, t_final, *n, digits)?;
            let case = ExpTestCase::new(m as f64, req.alpha.value(), req.t_final.value(), *n)?;
            let b = build_operators_with(&req, &c)?;
            let r = relative_error_metrics(&b, &case, filter)?;
            Ok(SweepRow { alpha: alpha.clone(), n: *n, err_dhat: r.err_dhat, err_d: r.err_d, err_dpow: r.err_dpow })
        })
        .collect()
}

pub fn sweep(args: &SweepArgs) -> Result<Outcome> {
    let start = Instant::now();
    let values: Vec<String> = match (&args.values, &args.range) {
        (Some(v), _) => v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
        (None, Some(r)) => expand_range(r)?,
        (None, None) => bail!(UsageError("one of --values or --range is required".into())),
    };
    let points: Vec<(String, usize)> = match args.mode {
        SweepMode::Alpha => {
            let Some(n) = args.n else { bail!(UsageError("an alpha sweep needs --N".into())) };
            values.into_iter().map(|a| (a, n)).collect()
        }
        SweepMode::N => {
            let Some(alpha) = &args.alpha else { bail!(UsageError("an N sweep needs --alpha".into())) };
            values
                .iter()
                .map(|v| v.parse::<usize>().map(|n| (alpha.clone(), n)))
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| UsageError("N values must be integers".into()))?
        }
    };
    let rows = sweep_rows(&points, args.m, &args.t_final, args.digits, args.filter.enabled())?;
    let mut table = String::from("alpha,N,m,T,digits,err_Dhat,err_D,err_Dpow\n");
    for r in &rows {
        let digits = args.digits.unwrap_or_else(|| estimate_digits(r.n));
        let pow = r.err_dpow.map(|v| format!("{v:.16e}")).unwrap_or_default();
        writeln!(table, "{},{},{},{},{digits},{:.16e},{:.16e},{pow}", r.alpha, r.n, args.m, args.t_final, r.err_dhat, r.err_d)?;
    }
    let manifest = RunManifest::new(
        "sweep",
        Parameters {
            alpha: args.alpha.clone(),
            t_final: Some(args.t_final.clone()),
            n: args.n,
            m: Some(args.m),
            digits: args.digits,
            filter: Some(args.filter.enabled()),
            ..Default::default()
        },
    );
    let mut outcome = Outcome { stdout: table.clone(), ..Default::default() };
    let out = args.out.as_ref().map(|p| {
        let mut o = OutputSet::new(p);
        o.add("_sweep.csv", table);
        o
    });
    finish(out, manifest, start, &mut outcome)?;
    Ok(outcome)
}

#[derive(Debug, Clone, Args)]
pub struct PdeArgs {
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long)]
    pub alpha: String,
    #[arg(long)]
    pub m: u32,
    #[arg(long = "Nt")]
    pub nt: usize,
    #[arg(long = "Nx")]
    pub nx: usize,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long)]
    pub digits: Option<u32>,
    #[arg(long = "T", default_value = "2")]
    pub t_final: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn max_cells_from_env() -> Result<usize> {
    match std::env::var(MAX_CELLS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("{MAX_CELLS_ENV} must be a positive integer, got {v}")).into()),
        Err(_) => Ok(DEFAULT_MAX_CELLS),
    }
}

pub fn pde(args: &PdeArgs) -> Result<Outcome> {
    let start = Instant::now();
    let p = PdeProblem {
        alpha: Param::parse(&args.alpha)?,
        m: args.m,
        t_final: Param::parse(&args.t_final)?,
        nt: args.nt,
        nx: args.nx,
        b: args.b,
        d: args.d,
        digits: args.digits,
        amplitude: 1.0,
        max_cells: max_cells_from_env()?,
    };
    p.validate()?;
    let (asm, sol) = if p.d == 1 { solve_1d(&p)? } else { solve_nd(&p)? };
    let res = residual(&asm, &sol.u)?;
    let seconds = start.elapsed().as_secs_f64();
    let mut outcome = Outcome::default();
    writeln!(outcome.stdout, "max_error,{:.16e}", sol.error)?;
    writeln!(outcome.stdout, "residual,{res:.16e}")?;
    writeln!(outcome.stdout, "max_forcing,{:.16e}", asm.h.max_abs())?;
    writeln!(outcome.stdout, "seconds,{seconds:.3}")?;
    let mut manifest = RunManifest::new(
        "pde",
        Parameters {
            alpha: Some(args.alpha.clone()),
            t_final: Some(args.t_final.clone()),
            nt: Some(args.nt),
            nx: Some(args.nx),
            m: Some(args.m),
            d: Some(args.d),
            digits: Some(asm.time.request.digits),
            b: Some(args.b),
            ..Default::default()
        },
    );
    manifest.record("max_error", sol.error);
    manifest.record("residual", res);
    let out = args.out.as_ref().map(|prefix| {
        let mut o = OutputSet::new(prefix);
        if p.d == 1 {
            let u = sol.u.to_matrix();
            o.add("_U_re.csv", matrix_csv(&u.map(|v| v.re)));
            o.add("_U_im.csv", matrix_csv(&u.map(|v| v.im)));
        } else {
            o.add("_U.tensor", tensor_text(&sol.u));
        }
        let t = &asm.time.nodes.t;
        o.add("_t.csv", matrix_csv(&DMatrix::from_column_slice(t.len(), 1, t)));
        o.add("_x.csv", matrix_csv(&DMatrix::from_column_slice(asm.grid.nx, 1, &asm.grid.x)));
        o.add("_error.csv", format!("max_error,{:.16e}\n", sol.error));
        o
    });
    finish(out, manifest, start, &mut outcome)?;
    Ok(outcome)
}
