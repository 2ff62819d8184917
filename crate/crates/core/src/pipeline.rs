//! End-to-end runs behind the command-line tool: circular analysis,
//! averaging, continuation and the two-wave sweep across `|a| = 4`.
//!
//! Every run returns a serializable report; `write_*` helpers put it on disk
//! in the requested format. Nothing here depends on wall-clock time or
//! random state, so identical inputs give byte-identical files.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::averaging::{AveragedFunction, CriticalPoint, PredictedClass};
use crate::circular::{
    cross_validate, equator_critical_conditions, m_matrix, CircularReport, EquatorConditions,
    FamilyCheck,
};
use crate::config::{ReportFormat, RunConfig};
use crate::continuation::{
    classify_branch, continue_branch, default_eps_grid, expansion_check, Branch, BranchExport,
    BranchVerdict, ContinuationConfig, ExpansionFit,
};
use crate::error::{Error, Result};
use crate::forcing::{ForcingModel, FourierSpectrum};
use crate::io::{to_json, write_atomic};
use crate::symplectic::StabilityClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircularOutput {
    pub config: RunConfig,
    pub conditions: EquatorConditions,
    pub report: CircularReport,
}

fn linear_spectrum(cfg: &RunConfig) -> Result<FourierSpectrum> {
    match cfg.forcing.build()? {
        ForcingModel::Linear(s) => Ok(s),
        ForcingModel::General(_) => Err(Error::WrongKind),
    }
}

pub fn run_circular(cfg: &RunConfig) -> Result<CircularOutput> {
    cfg.validate()?;
    let spectrum = linear_spectrum(cfg)?;
    Ok(CircularOutput {
        config: cfg.clone(),
        conditions: equator_critical_conditions(&spectrum, cfg.n)?,
        report: m_matrix(&spectrum, cfg.n)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageOutput {
    pub config: RunConfig,
    pub lambda_n: f64,
    pub critical_points: Vec<CriticalPoint>,
    pub seed_failures: usize,
    pub degenerate_continuum: bool,
}

fn averaged(cfg: &RunConfig) -> Result<AveragedFunction> {
    AveragedFunction::with_nodes(cfg.n, cfg.forcing.build()?, cfg.quadrature_nodes)
}

pub fn run_average(cfg: &RunConfig) -> Result<AverageOutput> {
    cfg.validate()?;
    let avg = averaged(cfg)?;
    let [a, b, c] = cfg.seed_grid;
    let report = avg.find_critical_points(&avg.seed_grid(a, b, c), cfg.tol_grad);
    Ok(AverageOutput {
        config: cfg.clone(),
        lambda_n: avg.lambda_n(),
        critical_points: report.points,
        seed_failures: report.failures.len(),
        degenerate_continuum: report.degenerate_continuum,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchOutcome {
    pub critical_point: CriticalPoint,
    pub verdict: Option<BranchVerdict>,
    pub fit: Option<ExpansionFit>,
    pub fit_error: Option<String>,
    pub error: Option<String>,
    #[serde(skip)]
    pub branch: Option<Branch>,
}

impl BranchOutcome {
    pub fn completed(&self) -> bool {
        self.branch.as_ref().is_some_and(|b| !b.truncated)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinueOutput {
    pub config: RunConfig,
    pub degenerate_continuum: bool,
    pub branches: Vec<BranchOutcome>,
}

impl ContinueOutput {
    pub fn completed(&self) -> usize {
        self.branches.iter().filter(|b| b.completed()).count()
    }
}

fn run_branch(
    f: &ForcingModel,
    cp: &CriticalPoint,
    n: i64,
    eps: &[f64],
    cc: &ContinuationConfig,
) -> BranchOutcome {
    match continue_branch(f, cp, n, eps, cc) {
        Ok(branch) => {
            let verdict = classify_branch(&branch);
            let (fit, fit_error) = match expansion_check(&branch, &cp.hessian_matrix(), cc) {
                Ok(fit) => (Some(fit), None),
                Err(e) => (None, Some(e.to_string())),
            };
            BranchOutcome {
                critical_point: cp.clone(),
                verdict: Some(verdict),
                fit,
                fit_error,
                error: None,
                branch: Some(branch),
            }
        }
        Err(e) => BranchOutcome {
            critical_point: cp.clone(),
            verdict: None,
            fit: None,
            fit_error: None,
            error: Some(e.to_string()),
            branch: None,
        },
    }
}

/// One branch per critical point of the averaged function.
pub fn run_continue(cfg: &RunConfig) -> Result<ContinueOutput> {
    let avg = run_average(cfg)?;
    let f = cfg.forcing.build()?;
    let cc = cfg.continuation();
    let branches = avg
        .critical_points
        .par_iter()
        .map(|cp| run_branch(&f, cp, cfg.n, &cfg.eps_grid, &cc))
        .collect();
    Ok(ContinueOutput {
        config: cfg.clone(),
        degenerate_continuum: avg.degenerate_continuum,
        branches,
    })
}

/// Two-wave amplitudes `a` in `p(t) = e^{it} + a e^{−it}` swept by
/// [`reproduce_paper`].
pub const SWEEP: [(f64, f64); 9] = [
    (0.5, 0.0),
    (1.0, 0.0),
    (2.0, 0.0),
    (3.9, 0.0),
    (4.1, 0.0),
    (5.0, 0.0),
    (8.0, 0.0),
    (0.0, 4.0),
    (2.0, 2.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub sign: i8,
    pub predicted: PredictedClass,
    pub observed: Vec<StabilityClass>,
    pub classes_match: Option<bool>,
    pub hessian_ok: bool,
    pub error: Option<String>,
}

impl From<&FamilyCheck> for FamilyRow {
    fn from(c: &FamilyCheck) -> Self {
        Self {
            sign: c.sign,
            predicted: c.predicted,
            observed: c
                .verdict
                .as_ref()
                .map(|v| v.points.iter().map(|p| p.observed).collect())
                .unwrap_or_default(),
            classes_match: c.classes_match,
            hessian_ok: c.hessian_ok,
            error: c.branch_error.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub a: Complex64,
    pub det_m: f64,
    pub families: Vec<FamilyRow>,
    /// Off-threshold disagreement between prediction and observation.
    pub mismatch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceReport {
    pub n: i64,
    pub eps_grid: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub mismatches: usize,
}

pub fn sweep_row(a: Complex64, eps_grid: &[f64], cc: &ContinuationConfig) -> Result<SweepRow> {
    let spectrum = FourierSpectrum::two_wave(1, a);
    let report = m_matrix(&spectrum, 1)?;
    let cv = cross_validate(&report, &ForcingModel::linear(spectrum), eps_grid, cc)?;
    let families: Vec<FamilyRow> = cv.families.iter().map(FamilyRow::from).collect();
    let mismatch = cv.families.iter().any(|c| {
        !c.hessian_ok
            || (c.predicted != PredictedClass::Inconclusive && c.classes_match != Some(true))
    });
    Ok(SweepRow {
        a,
        det_m: report.det_m,
        families,
        mismatch,
    })
}

/// Run the two-wave example at `N = 1` for every `a` in `values`.
pub fn reproduce_paper(
    values: &[Complex64],
    eps_grid: &[f64],
    cc: &ContinuationConfig,
) -> Result<ReproduceReport> {
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&a| sweep_row(a, eps_grid, cc))
        .collect::<Result<_>>()?;
    let mismatches = rows.iter().filter(|r| r.mismatch).count();
    Ok(ReproduceReport {
        n: 1,
        eps_grid: eps_grid.to_vec(),
        rows,
        mismatches,
    })
}

pub fn default_sweep() -> Vec<Complex64> {
    SWEEP
        .iter()
        .map(|&(re, im)| Complex64::new(re, im))
        .collect()
}

pub fn reproduce_default() -> Result<ReproduceReport> {
    reproduce_paper(
        &default_sweep(),
        &default_eps_grid(),
        &ContinuationConfig::default(),
    )
}

// ---- rendering ----

fn complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.re == 0.0 {
        format!("{}i", z.im)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

fn classes_text(cs: &[StabilityClass]) -> String {
    if cs.is_empty() {
        return "-".into();
    }
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let mut j = i;
        while j + 1 < cs.len() && cs[j + 1] == cs[i] {
            j += 1;
        }
        out.push(if j > i {
            format!("{}x{}", cs[i], j - i + 1)
        } else {
            cs[i].to_string()
        });
        i = j + 1;
    }
    out.join(" ")
}

fn opt_bool(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "yes",
        Some(false) => "no",
        None => "n/a",
    }
}

pub fn circular_text(o: &CircularOutput) -> String {
    let r = &o.report;
    let mut s = String::new();
    let _ = writeln!(s, "N = {}, Λ_N = {:.12}", r.n, r.lambda_n);
    let _ = writeln!(
        s,
        "c_0 = {}, c_N = {}, c_2N = {}, c_-N = {}, c_3N = {}",
        complex(r.c0),
        complex(r.c_n),
        complex(r.c_2n),
        complex(r.c_neg_n),
        complex(r.c_3n)
    );
    let _ = writeln!(s, "λ* = {:.12}", r.lambda_star);
    let _ = writeln!(
        s,
        "M(p) = [[{:.12}, {:.12}], [{:.12}, {:.12}]]",
        r.m_matrix[0][0], r.m_matrix[0][1], r.m_matrix[1][0], r.m_matrix[1][1]
    );
    let _ = writeln!(s, "det M(p) = {:.12}", r.det_m);
    for f in &r.family_predictions {
        let _ = writeln!(s, "{}: {}", f.class, f.sentence);
    }
    s
}

pub fn circular_csv(o: &CircularOutput) -> String {
    let r = &o.report;
    let mut s = String::from("key,value\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k},{v}");
    };
    kv("N", r.n.to_string());
    kv("lambda_star", format!("{:.17e}", r.lambda_star));
    kv("m11", format!("{:.17e}", r.m_matrix[0][0]));
    kv("m12", format!("{:.17e}", r.m_matrix[0][1]));
    kv("m22", format!("{:.17e}", r.m_matrix[1][1]));
    kv("det_m", format!("{:.17e}", r.det_m));
    for f in &r.family_predictions {
        kv(
            if f.sign > 0 {
                "family_plus"
            } else {
                "family_minus"
            },
            f.class.to_string(),
        );
    }
    s
}

pub fn average_text(o: &AverageOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "N = {}, Λ_N = {:.12}, {} critical point(s)",
        o.config.n,
        o.lambda_n,
        o.critical_points.len()
    );
    for p in &o.critical_points {
        let _ = writeln!(
            s,
            "  λ = {:.10}  η = {:+.3e}  ξ = {:+.3e}  ∂²λλγ = {:+.6e}  det D²γ = {:+.6e}  {}",
            p.lambda, p.eta, p.xi, p.d2_lambda_lambda, p.hessian_det, p.predicted_class
        );
    }
    if o.degenerate_continuum {
        let _ = writeln!(s, "degenerate: gradient vanishes identically at some seeds");
    }
    s
}

pub fn average_csv(o: &AverageOutput) -> String {
    let mut s =
        String::from("lambda,eta,xi,gradient_norm,d2_lambda_lambda,hessian_det,predicted_class\n");
    for p in &o.critical_points {
        let _ = writeln!(
            s,
            "{:.17e},{:.17e},{:.17e},{:.6e},{:.17e},{:.17e},{}",
            p.lambda,
            p.eta,
            p.xi,
            p.gradient_norm,
            p.d2_lambda_lambda,
            p.hessian_det,
            p.predicted_class
        );
    }
    s
}

pub fn continue_text(o: &ContinueOutput) -> String {
    let mut s = String::new();
    for (k, b) in o.branches.iter().enumerate() {
        let cp = &b.critical_point;
        let _ = writeln!(
            s,
            "branch {k}: λ = {:.10}, η = {:+.3e}, ξ = {:+.3e}, predicted {}",
            cp.lambda, cp.eta, cp.xi, cp.predicted_class
        );
        if let Some(e) = &b.error {
            let _ = writeln!(s, "  failed: {e}");
            continue;
        }
        if let Some(v) = &b.verdict {
            let observed: Vec<StabilityClass> = v.points.iter().map(|p| p.observed).collect();
            let _ = writeln!(s, "  observed: {}", classes_text(&observed));
            let _ = writeln!(s, "  agrees with prediction: {}", opt_bool(v.all_agree));
        }
        if let Some(br) = &b.branch {
            if let Some(why) = &br.failure {
                let _ = writeln!(s, "  truncated: {why}");
            }
        }
        match (&b.fit, &b.fit_error) {
            (Some(f), _) => {
                let _ = writeln!(
                    s,
                    "  det slope {:.4}, det coefficient {:.6e} (predicted {:.6e}, rel err {:.2e}), trace coefficient {:.6e} (predicted {:.6e}, rel err {:.2e})",
                    f.det_slope,
                    f.det_coefficient,
                    f.det_coefficient_predicted,
                    f.det_relative_error,
                    f.trace_coefficient,
                    f.trace_coefficient_predicted,
                    f.trace_relative_error
                );
            }
            (None, Some(e)) => {
                let _ = writeln!(s, "  no expansion fit: {e}");
            }
            _ => {}
        }
    }
    s
}

pub fn continue_csv(o: &ContinueOutput) -> String {
    let mut s = String::from("branch,lambda,eta,xi,predicted,points,all_agree,det_slope,det_relative_error,trace_relative_error\n");
    for (k, b) in o.branches.iter().enumerate() {
        let cp = &b.critical_point;
        let points = b.branch.as_ref().map_or(0, |br| br.points.len());
        let agree = opt_bool(b.verdict.as_ref().and_then(|v| v.all_agree));
        let (slope, de, te) =
            b.fit
                .as_ref()
                .map_or((String::new(), String::new(), String::new()), |f| {
                    (
                        format!("{:.6}", f.det_slope),
                        format!("{:.6e}", f.det_relative_error),
                        format!("{:.6e}", f.trace_relative_error),
                    )
                });
        let _ = writeln!(
            s,
            "{k},{:.17e},{:.17e},{:.17e},{},{points},{agree},{slope},{de},{te}",
            cp.lambda, cp.eta, cp.xi, cp.predicted_class
        );
    }
    s
}

pub fn reproduce_text(r: &ReproduceReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "p(t) = e^(it) + a e^(-it), N = {}, {} values of ε in [{:.3e}, {:.3e}]",
        r.n,
        r.eps_grid.len(),
        r.eps_grid[0],
        r.eps_grid[r.eps_grid.len() - 1]
    );
    let _ = writeln!(
        s,
        "{:<8} {:>10}  {:<13} {:<36} {:<13} {:<36} {}",
        "a", "det M", "+ predicted", "+ observed", "- predicted", "- observed", "ok"
    );
    for row in &r.rows {
        let fam = |i: usize| {
            let f = &row.families[i];
            let obs = if let Some(e) = &f.error {
                format!("failed: {e}")
            } else {
                classes_text(&f.observed)
            };
            (f.predicted.to_string(), obs)
        };
        let (p0, o0) = fam(0);
        let (p1, o1) = fam(1);
        let _ = writeln!(
            s,
            "{:<8} {:>10.6}  {:<13} {:<36} {:<13} {:<36} {}",
            complex(row.a),
            row.det_m,
            p0,
            o0,
            p1,
            o1,
            if row.mismatch { "MISMATCH" } else { "ok" }
        );
    }
    let _ = writeln!(s, "{} mismatch(es)", r.mismatches);
    s
}

pub fn reproduce_csv(r: &ReproduceReport) -> String {
    let mut s = String::from("a_re,a_im,det_m,family,predicted,observed,classes_match\n");
    for row in &r.rows {
        for f in &row.families {
            let _ = writeln!(
                s,
                "{},{},{:.17e},{},{},{},{}",
                row.a.re,
                row.a.im,
                row.det_m,
                if f.sign > 0 { "+" } else { "-" },
                f.predicted,
                classes_text(&f.observed),
                opt_bool(f.classes_match)
            );
        }
    }
    s
}

// ---- files ----

fn report_bytes<T: Serialize>(
    value: &T,
    format: ReportFormat,
    text: impl Fn(&T) -> String,
    csv: impl Fn(&T) -> String,
) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => to_json(value),
        ReportFormat::Text => Ok(text(value).into_bytes()),
        ReportFormat::Csv => Ok(csv(value).into_bytes()),
    }
}

fn report_path(dir: &Path, stem: &str, format: ReportFormat) -> PathBuf {
    dir.join(format!("{stem}.{}", format.extension()))
}

pub fn write_circular(
    o: &CircularOutput,
    dir: &Path,
    format: ReportFormat,
) -> Result<Vec<PathBuf>> {
    let p = report_path(dir, "circular_report", format);
    write_atomic(&p, &report_bytes(o, format, circular_text, circular_csv)?)?;
    Ok(vec![p])
}

pub fn write_average(o: &AverageOutput, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    let p = report_path(dir, "critical_points", format);
    write_atomic(&p, &report_bytes(o, format, average_text, average_csv)?)?;
    let mut out = vec![p];
    if let Some([a, b, c]) = o.config.gamma_grid {
        let grid = averaged(&o.config)?.gamma_grid(a, b, c)?;
        let mut bytes = Vec::new();
        grid.write_csv(&mut bytes)?;
        let g = dir.join("gamma_grid.csv");
        write_atomic(&g, &bytes)?;
        out.push(g);
    }
    Ok(out)
}

/// The report plus one JSON export and one summary CSV per branch.
pub fn write_continue(
    o: &ContinueOutput,
    dir: &Path,
    format: ReportFormat,
) -> Result<Vec<PathBuf>> {
    let p = report_path(dir, "continue_report", format);
    write_atomic(&p, &report_bytes(o, format, continue_text, continue_csv)?)?;
    let mut out = vec![p];
    for (k, b) in o.branches.iter().enumerate() {
        let Some(br) = &b.branch else { continue };
        let j = dir.join(format!("branch_{k}.json"));
        write_atomic(&j, &to_json(&BranchExport::from(br))?)?;
        let mut bytes = Vec::new();
        br.write_summary_csv(&mut bytes)?;
        let c = dir.join(format!("branch_{k}.csv"));
        write_atomic(&c, &bytes)?;
        out.push(j);
        out.push(c);
    }
    Ok(out)
}

pub fn write_reproduce(
    r: &ReproduceReport,
    dir: &Path,
    format: ReportFormat,
) -> Result<Vec<PathBuf>> {
    let p = report_path(dir, "reproduce_report", format);
    write_atomic(&p, &report_bytes(r, format, reproduce_text, reproduce_csv)?)?;
    Ok(vec![p])
}
