//! Command-line front end: config ingestion, batch computation commands,
//! CSV/JSON table emission, and the verification suite runner.
//!
//! Everything here is pure string-in/string-out; the binary wrapper owns
//! files, stdout, and process exit codes.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use crate::counting::{cusp_pole_lattice, hyperbolic_resonances, resonance_count_bound, Exactness};
use crate::cusp::{validate_group, AngleSpec, CuspGroup, Generator, Turn, ValidatedGroup};
use crate::dioph::{
    check_diophantine, growth_profile, lambda_loglog_slope, lambda_x, worst_case_angle,
    WorstCaseConfig,
};
use crate::verify;
use crate::{Error, PrecisionContext, Result};

/// Only config schema this build understands.
pub const SCHEMA_VERSION: &str = "1";

fn bad_input(what: String) -> Error {
    Error::OffDomain { what }
}

// ---------------------------------------------------------------------------
// config

/// Parsed config file, prior to group validation.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: String,
    pub dimension_n: u32,
    pub cusps: Vec<CuspSpec>,
    #[serde(default)]
    pub defaults: Defaults,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub target_rel_err: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuspSpec {
    pub rank: u32,
    pub generators: Vec<GeneratorSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    /// Angles as exact "p/q" strings or decimal records with a stated
    /// precision; strings keep exact inputs out of binary floats.
    pub rotation_angles_over_2pi: Vec<AngleEntry>,
    /// Decimal strings, one per cusp rank direction.
    pub translation: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum AngleEntry {
    Rational(String),
    Decimal { value: String, precision_bits: u32 },
}

fn parse_angle(entry: &AngleEntry) -> Result<AngleSpec> {
    match entry {
        AngleEntry::Rational(text) => {
            let err = || Error::AngleParse { input: text.clone() };
            let (p, q) = match text.split_once('/') {
                Some((p, q)) => {
                    (p.trim().parse::<i64>().map_err(|_| err())?, q.trim().parse::<i64>().map_err(|_| err())?)
                }
                None => (text.trim().parse::<i64>().map_err(|_| err())?, 1),
            };
            if q == 0 {
                return Err(err());
            }
            Ok(AngleSpec::rational(p, q))
        }
        AngleEntry::Decimal { value, precision_bits } => {
            Ok(AngleSpec::decimal(value, *precision_bits))
        }
    }
}

/// Parse and validate a config document into working objects.
pub fn parse_config(text: &str) -> Result<(Config, Vec<ValidatedGroup>, PrecisionContext)> {
    let cfg: Config = serde_json::from_str(text)
        .map_err(|e| bad_input(format!("config parse error: {e}")))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(bad_input(format!(
            "unsupported schema_version {:?}, expected {SCHEMA_VERSION:?}",
            cfg.schema_version
        )));
    }
    if cfg.cusps.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut groups = Vec::with_capacity(cfg.cusps.len());
    for (ci, cusp) in cfg.cusps.iter().enumerate() {
        let mut generators = Vec::with_capacity(cusp.generators.len());
        for g in &cusp.generators {
            let rotation_angles =
                g.rotation_angles_over_2pi.iter().map(parse_angle).collect::<Result<Vec<_>>>()?;
            let translation = g
                .translation
                .iter()
                .map(|t| {
                    t.trim().parse::<f64>().map_err(|_| {
                        bad_input(format!("cusp {ci}: translation entry {t:?} is not a decimal"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            generators.push(Generator { rotation_angles, translation });
        }
        groups.push(validate_group(&CuspGroup {
            n: cfg.dimension_n,
            k0: cusp.rank,
            generators,
        })?);
    }
    let mut ctx = PrecisionContext::default();
    if let Some(t) = cfg.defaults.target_rel_err {
        if !(t > 0.0 && t <= 1e-2) {
            return Err(bad_input(format!("target_rel_err must lie in (0, 1e-2], got {t}")));
        }
        ctx.target_rel_err = t;
    }
    Ok((cfg, groups, ctx))
}

// ---------------------------------------------------------------------------
// tables

/// Output format for tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Format implied by a file name, when any.
    pub fn from_extension(path: &str) -> Option<Format> {
        let ext = path.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("csv") => Some(Format::Csv),
            Some("json") => Some(Format::Json),
            _ => None,
        }
    }
}

/// Rectangular results of one command, with optional JSON-only metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Whole-table facts (fit slopes, high-precision scalars); carried in
    /// the JSON rendering only, since CSV stays a plain rectangle.
    pub metadata: Vec<(String, String)>,
}

impl OutputTable {
    fn new(columns: &[&str]) -> Self {
        OutputTable {
            columns: columns.iter().map(|c| (*c).to_string()).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    /// RFC-4180-style CSV with a header row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |_| bad_input("csv serialization failed".into());
        w.write_record(&self.columns).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|_| bad_input("csv serialization failed".into()))?;
        String::from_utf8(bytes).map_err(|_| bad_input("csv output was not UTF-8".into()))
    }

    /// JSON object {columns, rows, metadata}.
    pub fn to_json(&self) -> String {
        let meta: serde_json::Map<String, serde_json::Value> = self
            .metadata
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect();
        let doc = json!({
            "columns": self.columns,
            "rows": self.rows,
            "metadata": meta,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("table serializes");
        text.push('\n');
        text
    }

    /// Render in the requested format.
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => Ok(self.to_json()),
        }
    }
}

/// Binary64 value with 17 significant digits (round-trip safe, no locale).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn join_ints(v: &[i64]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

/// Decimal rendering of an exact turn with the given fractional digits.
fn fmt_turn(turn: &Turn, digits: usize) -> String {
    let r = turn.value();
    let whole = r.trunc();
    let frac = (r - &whole).abs();
    let mut whole_abs = whole.numer().abs();
    let scale = BigInt::from(10u32).pow(digits as u32);
    // round half up at the last kept digit, carrying into the whole part
    let mut scaled = (frac.numer() * &scale * 2 + frac.denom()) / (frac.denom() * 2);
    if scaled >= scale {
        scaled -= &scale;
        whole_abs = whole_abs + 1u32;
    }
    let sign = if r.is_negative() { "-" } else { "" };
    format!("{sign}{whole_abs}.{scaled:0>digits$}")
}

// ---------------------------------------------------------------------------
// commands

/// Fourier modes of every cusp up to the degree and frequency caps, sorted
/// by (cusp, degree, frequency).
pub fn cmd_modes(groups: &[ValidatedGroup], m_max: u32, b_max: f64) -> Result<OutputTable> {
    let mut table = OutputTable::new(&["cusp_id", "m", "p", "vstar", "b", "is_zero"]);
    for (ci, g) in groups.iter().enumerate() {
        let mut modes = crate::cusp::enumerate_modes(g, m_max, b_max)?;
        modes.sort_by(|a, b| {
            a.m.cmp(&b.m).then(a.b.total_cmp(&b.b)).then(a.vstar.cmp(&b.vstar)).then(a.p.cmp(&b.p))
        });
        let threshold = g.zero_threshold();
        for mode in modes {
            table.rows.push(vec![
                ci.to_string(),
                mode.m.to_string(),
                mode.p.to_string(),
                join_ints(&mode.vstar),
                fmt_float(mode.b),
                (mode.b <= threshold).to_string(),
            ]);
        }
    }
    Ok(table)
}

/// Growth function per cusp with witnesses, plus the joint growth column;
/// the per-cusp log-log slope over the grid rides in the metadata.
pub fn cmd_lambda(groups: &[ValidatedGroup], u_grid: &[f64]) -> Result<OutputTable> {
    if u_grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    if u_grid.iter().any(|u| !u.is_finite() || *u <= 0.0) {
        return Err(bad_input("u grid entries must be positive and finite".into()));
    }
    let mut us = u_grid.to_vec();
    us.sort_by(f64::total_cmp);
    us.dedup();
    let mut columns = vec!["u".to_string()];
    for ci in 0..groups.len() {
        columns.push(format!("lambda_c{ci}"));
        columns.push(format!("witness_m_c{ci}"));
        columns.push(format!("witness_b_c{ci}"));
    }
    columns.push("lambda_x".to_string());
    let mut table = OutputTable { columns, rows: Vec::new(), metadata: Vec::new() };
    let profiles: Vec<_> =
        groups.iter().map(|g| growth_profile(g, &us)).collect::<Result<Vec<_>>>()?;
    for (i, &u) in us.iter().enumerate() {
        let mut row = vec![fmt_float(u)];
        for profile in &profiles {
            let sample = &profile[i];
            row.push(fmt_float(sample.value));
            row.push(sample.witness_m.map(|m| m.to_string()).unwrap_or_default());
            row.push(sample.witness_mode.as_ref().map(|m| fmt_float(m.b)).unwrap_or_default());
        }
        row.push(fmt_float(lambda_x(groups, u)?));
        table.rows.push(row);
    }
    let slope_us: Vec<f64> = us.iter().copied().filter(|&u| u > 1.0).collect();
    if slope_us.len() >= 2 {
        for (ci, g) in groups.iter().enumerate() {
            let slope = lambda_loglog_slope(g, &slope_us)?;
            table.metadata.push((format!("loglog_slope_c{ci}"), fmt_float(slope)));
        }
    }
    Ok(table)
}

/// Resonance source: the model space of a given boundary dimension, or the
/// cusp pole lattices of a config.
pub enum ResonanceSource<'a> {
    Free { n: u32 },
    Cusps { groups: &'a [ValidatedGroup], c_bound: f64 },
}

/// Resonances (or candidate pole lattice points) in the ball of radius `r`.
pub fn cmd_resonances(source: &ResonanceSource, r: f64) -> Result<OutputTable> {
    let mut table =
        OutputTable::new(&["location_re", "location_im", "multiplicity", "exactness"]);
    let points = match source {
        ResonanceSource::Free { n } => hyperbolic_resonances(*n, r)?.0,
        ResonanceSource::Cusps { groups, c_bound } => {
            let mut all = Vec::new();
            for g in *groups {
                all.extend(cusp_pole_lattice(g, r, *c_bound)?);
            }
            all
        }
    };
    for p in points {
        table.rows.push(vec![
            fmt_float(p.location.re),
            fmt_float(p.location.im),
            p.multiplicity.to_string(),
            match p.exactness {
                Exactness::Exact => "exact".to_string(),
                Exactness::UpperBound => "upper_bound".to_string(),
            },
        ]);
    }
    Ok(table)
}

/// Both global count-bound forms over a radius grid. With `check_dioph`
/// set, every cusp must first pass the power-law growth check.
pub fn cmd_bound(
    groups: &[ValidatedGroup],
    n: u32,
    r_grid: &[f64],
    c: f64,
    check_dioph: bool,
) -> Result<OutputTable> {
    if r_grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    if check_dioph {
        for (ci, g) in groups.iter().enumerate() {
            let fit = check_diophantine(g, 64)?;
            if !fit.diophantine {
                return Err(bad_input(format!(
                    "cusp {ci} fails the power-law growth check (shortfall {:.3})",
                    fit.max_shortfall
                )));
            }
        }
    }
    let mut rs = r_grid.to_vec();
    rs.sort_by(f64::total_cmp);
    rs.dedup();
    let mut table = OutputTable::new(&["R", "bound_general", "bound_diophantine"]);
    for &r in &rs {
        table.rows.push(vec![
            fmt_float(r),
            fmt_float(resonance_count_bound(groups, n, r, c, false)?),
            fmt_float(resonance_count_bound(groups, n, r, c, true)?),
        ]);
    }
    Ok(table)
}

/// Doubly exponential angle diagnosis: one row per resolved degree.
pub fn cmd_worstcase(q: u32, depth: u32, ell: f64, precision_bits: u64) -> Result<OutputTable> {
    let (turn, rows) = worst_case_angle(&WorstCaseConfig { q, depth, ell, precision_bits })?;
    let mut table =
        OutputTable::new(&["k", "a_k", "m", "predicted_b", "computed_b", "ratio"]);
    for (i, row) in rows.iter().enumerate() {
        let ratio = (row.computed_ln_b - row.predicted_ln_b).exp();
        table.rows.push(vec![
            (i + 1).to_string(),
            row.m.to_string(),
            row.m.to_string(),
            fmt_float(row.predicted_b),
            fmt_float(row.computed_b),
            fmt_float(ratio),
        ]);
    }
    let digits = ((precision_bits / 3) as usize).clamp(12, 40_000);
    table.metadata.push(("angle_over_2pi".to_string(), fmt_turn(&turn, digits)));
    table.metadata.push(("digits".to_string(), digits.to_string()));
    Ok(table)
}

// ---------------------------------------------------------------------------
// verification runner

/// Outcome of one verification suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub detail: serde_json::Value,
}

const SUITES: [&str; 5] = ["coefficients", "beta", "bessel", "fkernel", "resolvent"];

fn report_value(r: &verify::BoundReport) -> serde_json::Value {
    json!({
        "grid_spec": r.grid_spec,
        "deficit_sup": r.deficit_sup,
        "deficit_argmax": r.deficit_argmax,
        "stable": r.stable,
        "fitted": r.fitted.map(|(c, ln_c)| vec![c, ln_c]),
    })
}

fn sweep_report(suite: &str, r: verify::BoundReport, extra_pass: bool) -> SuiteReport {
    SuiteReport {
        suite: suite.to_string(),
        passed: r.stable && r.deficit_sup.is_finite() && extra_pass,
        detail: report_value(&r),
    }
}

/// Random rational with denominator 7, kept away from the half-integer
/// pole lattice of the coefficient tables.
fn sevenths(rng: &mut ChaCha8Rng) -> BigRational {
    let mut p = rng.gen_range(-200i64..=200);
    if p % 7 == 0 {
        p += 1;
    }
    BigRational::new(BigInt::from(p), BigInt::from(7))
}

fn coefficients_suite() -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let tables = [(1u32, 1u32, 12u32), (2, 3, 9), (3, 2, 10), (2, 5, 13)];
    let mut recurrence_cases = 0usize;
    let mut identity_cases = 0usize;
    let mut failures: Vec<String> = Vec::new();
    for (n, j, order) in tables {
        let table = verify::build_coefficients(n, j, order)?;
        for _ in 0..5 {
            let s = sevenths(&mut rng);
            let shift = BigRational::new(BigInt::from(i64::from(j)) * 2 - BigInt::from(n), BigInt::from(2));
            for k in 1..=(order - j) as usize {
                let lhs = table.entries[k - 1].eval_rational(&s);
                let factor = BigRational::from_integer(BigInt::from(4 * (i64::from(j) + k as i64)))
                    * (&s + &shift + BigRational::from_integer(BigInt::from(k as i64)));
                let rhs = table.entries[k].eval_rational(&s).map(|v| v * factor);
                recurrence_cases += 1;
                if lhs != rhs {
                    failures.push(format!("recurrence n={n} j={j} k={k} at s={s}"));
                }
            }
        }
        for _ in 0..5 {
            let s = sevenths(&mut rng);
            let xi = BigRational::new(BigInt::from(rng.gen_range(0i64..=40)), BigInt::from(9));
            let residual = verify::boundary_identity_residual_exact(n, j, order, &s, &xi)?;
            identity_cases += 1;
            if !residual.is_zero() {
                failures.push(format!("identity n={n} j={j} at s={s}: residual {residual}"));
            }
        }
    }
    Ok(SuiteReport {
        suite: "coefficients".to_string(),
        passed: failures.is_empty(),
        detail: json!({
            "recurrence_cases": recurrence_cases,
            "identity_cases": identity_cases,
            "failures": failures,
        }),
    })
}

fn scaled_density(base: u32, grid_scale: f64) -> u32 {
    ((f64::from(base) * grid_scale).round() as u32).max(1)
}

fn run_one_suite(suite: &str, grid_scale: f64) -> Result<SuiteReport> {
    match suite {
        "coefficients" => coefficients_suite(),
        "beta" => Ok(sweep_report("beta", verify::verify_beta_bounds(scaled_density(2, grid_scale))?, true)),
        "bessel" => {
            let r = verify::verify_bessel_bounds(scaled_density(1, grid_scale))?;
            Ok(sweep_report("bessel", r, true))
        }
        "fkernel" => {
            let r = verify::verify_f_bound(scaled_density(1, grid_scale))?;
            Ok(sweep_report("fkernel", r, true))
        }
        "resolvent" => {
            let per_n = (10.0 * grid_scale).round().max(1.0) as usize;
            let cases = verify::default_consistency_cases(20_260_814, per_n)?;
            let r = verify::verify_resolvent_consistency(&cases)?;
            let tight = r.deficit_sup < 1e-8;
            Ok(sweep_report("resolvent", r, tight))
        }
        other => Err(bad_input(format!("unknown suite {other:?}"))),
    }
}

/// Parallelism cap: RESLAB_THREADS when set, available cores otherwise.
fn thread_cap(jobs: usize) -> Result<usize> {
    match std::env::var("RESLAB_THREADS") {
        Ok(text) => {
            let n: usize = text
                .trim()
                .parse()
                .map_err(|_| bad_input(format!("RESLAB_THREADS={text:?} is not a thread count")))?;
            Ok(n.clamp(1, jobs.max(1)))
        }
        Err(_) => {
            let cores = std::thread::available_parallelism().map(usize::from).unwrap_or(1);
            Ok(cores.clamp(1, jobs.max(1)))
        }
    }
}

/// Run the requested suites ("all" for every one) with deterministic,
/// order-stable assembly regardless of the worker count.
pub fn cmd_verify(suite: &str, grid_scale: f64) -> Result<Vec<SuiteReport>> {
    if !(grid_scale.is_finite() && grid_scale > 0.0 && grid_scale <= 16.0) {
        return Err(bad_input(format!("grid scale must lie in (0, 16], got {grid_scale}")));
    }
    let jobs: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else if SUITES.contains(&suite) {
        vec![suite]
    } else {
        return Err(bad_input(format!(
            "unknown suite {suite:?}; expected one of {SUITES:?} or \"all\""
        )));
    };
    let workers = thread_cap(jobs.len())?;
    let results: Mutex<Vec<Option<Result<SuiteReport>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let outcome = run_one_suite(jobs[i], grid_scale);
                results.lock().expect("suite results lock").as_mut_slice()[i] = Some(outcome);
            });
        }
    });
    let collected = results.into_inner().expect("suite results lock");
    collected
        .into_iter()
        .map(|slot| slot.expect("every suite index visited"))
        .collect()
}

/// JSON rendering of the verification run.
pub fn verify_report_json(reports: &[SuiteReport]) -> String {
    let items: Vec<serde_json::Value> = reports
        .iter()
        .map(|r| json!({"suite": r.suite, "passed": r.passed, "report": r.detail}))
        .collect();
    let doc = json!({
        "passed": reports.iter().all(|r| r.passed),
        "suites": items,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    text
}

/// Process exit code for an error: 2 bad input, 3 resource guard,
/// 4 precision exhaustion.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::ExplosionGuard { .. }
        | Error::Overflow { .. }
        | Error::Convergence { .. }
        | Error::ContourThroughZero { .. }
        | Error::TruncationTooSmall { .. } => 3,
        Error::PrecisionExhausted { .. } => 4,
        _ => 2,
    }
}
