//! Subcommand implementations. Each returns the rendered output and
//! whether the run counts as a success.

use qentropy::solver::{solve, thermo_identities, Branch, Reference, SolveResult, SolverOptions};
use qentropy::triangle::{verify_triangle, verify_triangle_normalized, MatchingOptions, TriangleReport, TRIANGLE_TOL};
use qentropy::{uniform_on, ConstraintKind, Distribution, QIndex, SupportGrid};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::problem::ProblemFile;

#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub kind: Option<ConstraintKind>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ThermoSummary {
    identity_residual: f64,
    partition_slope_residuals: Vec<f64>,
    divergence_slope_residuals: Vec<f64>,
    shifted_log_partition: Option<f64>,
    step: f64,
}

#[derive(Debug, Serialize)]
struct SolveReport {
    command: &'static str,
    q: f64,
    kind: ConstraintKind,
    branch: Branch,
    converged: bool,
    density: Vec<f64>,
    multipliers: Vec<f64>,
    scaled_multipliers: Option<Vec<f64>>,
    partition_value: f64,
    /// `I_q(p‖r)`, or `S_q(p)` on the maxent branch.
    divergence: f64,
    q_mass: f64,
    iterations: usize,
    outer_iterations: usize,
    residual_norm: f64,
    thermo: Option<ThermoSummary>,
    thermo_error: Option<String>,
}

#[derive(Debug, Serialize)]
struct TriangleDocument {
    command: &'static str,
    q: f64,
    kind: ConstraintKind,
    passes: bool,
    d_lr: f64,
    d_lp: f64,
    d_pr: f64,
    residual: f64,
    matched_targets: Vec<f64>,
    fixed_point_iterations: usize,
    corollary_holds: bool,
    minimality_asserted: bool,
    posterior: Vec<f64>,
}

pub struct Output {
    pub text: String,
    pub success: bool,
}

struct Setup {
    grid: SupportGrid,
    kind: ConstraintKind,
    opts: SolverOptions,
}

fn setup(problem: &ProblemFile, ov: Overrides) -> Result<Setup> {
    let mut opts = SolverOptions::default();
    if let Some(t) = ov.tolerance.or(problem.options.tolerance) {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Invalid(format!("tolerance: must be positive, got {t}")));
        }
        opts = opts.with_tolerance(t);
    }
    if let Some(n) = problem.options.max_iterations {
        opts.max_iterations = n;
    }
    Ok(Setup {
        grid: problem.grid()?,
        kind: problem.kind(ov.kind),
        opts,
    })
}

/// Prior if given; otherwise maxent for q-expectations and a uniform prior
/// for normalized q-expectations.
fn reference(problem: &ProblemFile, s: &Setup) -> Result<Reference> {
    Ok(match (problem.prior(&s.grid)?, s.kind) {
        (Some(r), _) => Reference::Prior(r),
        (None, ConstraintKind::QExpectation) => Reference::MaxEnt(s.grid.clone()),
        (None, ConstraintKind::NormalizedQExpectation) => Reference::Prior(uniform_on(&s.grid).0),
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn solve_cmd(problem: &ProblemFile, ov: Overrides) -> Result<Output> {
    let s = setup(problem, ov)?;
    let q = problem.single_q()?;
    let reference = reference(problem, &s)?;
    let cs = problem.constraint_set(s.kind)?;
    let res = solve(&reference, &cs, q, &s.opts)?;
    let (thermo, thermo_error) = match thermo_identities(&reference, &cs, q, &res) {
        Ok(t) => (
            Some(ThermoSummary {
                identity_residual: t.identity_residual,
                partition_slope_residuals: t.partition_slope_residuals,
                divergence_slope_residuals: t.divergence_slope_residuals,
                shifted_log_partition: t.shifted_log_partition,
                step: t.step,
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = solve_report(q, s.kind, res, thermo, thermo_error);
    Ok(Output {
        text: to_json(&report)?,
        success: true,
    })
}

fn solve_report(
    q: QIndex,
    kind: ConstraintKind,
    res: SolveResult,
    thermo: Option<ThermoSummary>,
    thermo_error: Option<String>,
) -> SolveReport {
    SolveReport {
        command: "solve",
        q: q.value(),
        kind,
        branch: res.branch,
        converged: true,
        density: res.distribution.density().to_vec(),
        multipliers: res.multipliers,
        scaled_multipliers: res.scaled_multipliers,
        partition_value: res.partition_value,
        divergence: res.divergence,
        q_mass: res.q_mass,
        iterations: res.iterations,
        outer_iterations: res.outer_iterations,
        residual_norm: res.residual_norm,
        thermo,
        thermo_error,
    }
}

fn triangle(
    l: &Distribution,
    r: &Distribution,
    problem: &ProblemFile,
    kind: ConstraintKind,
    q: QIndex,
    opts: &SolverOptions,
) -> qentropy::Result<TriangleReport> {
    let mopts = MatchingOptions {
        solver: *opts,
        ..MatchingOptions::default()
    };
    let u = problem.moment_functions();
    match kind {
        ConstraintKind::QExpectation => verify_triangle(l, r, &u, q, &mopts),
        ConstraintKind::NormalizedQExpectation => verify_triangle_normalized(l, r, &u, q, &mopts),
    }
}

pub fn verify_cmd(problem: &ProblemFile, ov: Overrides) -> Result<Output> {
    let s = setup(problem, ov)?;
    let q = problem.single_q()?;
    let l = problem.truth(&s.grid)?;
    let r = problem
        .prior(&s.grid)?
        .ok_or_else(|| CliError::Invalid("prior: missing".into()))?;
    let rep = triangle(&l, &r, problem, s.kind, q, &s.opts)?;
    let doc = TriangleDocument {
        command: "verify-triangle",
        q: q.value(),
        kind: s.kind,
        passes: rep.residual.abs() < TRIANGLE_TOL,
        d_lr: rep.d_lr,
        d_lp: rep.d_lp,
        d_pr: rep.d_pr,
        residual: rep.residual,
        matched_targets: rep.matched_targets,
        fixed_point_iterations: rep.fixed_point_iterations,
        corollary_holds: rep.corollary_holds,
        minimality_asserted: rep.minimality_asserted,
        posterior: rep.posterior.density().to_vec(),
    };
    Ok(Output {
        success: doc.passes,
        text: to_json(&doc)?,
    })
}

#[derive(Debug, Default)]
struct SweepRow {
    branch: Option<Branch>,
    divergence: Option<f64>,
    partition_value: Option<f64>,
    multipliers: Vec<f64>,
    triangle: Option<TriangleReport>,
    errors: Vec<String>,
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::MaxEnt => "max_ent",
        Branch::MinXent => "min_xent",
        Branch::MinXentNormalized => "min_xent_normalized",
        Branch::Classical => "classical",
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per q, in input order. Rows that fail keep their q and carry the
/// message in the `error` column.
pub fn sweep_cmd(problem: &ProblemFile, ov: Overrides) -> Result<Output> {
    let s = setup(problem, ov)?;
    let q_list = problem
        .q_list
        .clone()
        .ok_or_else(|| CliError::Invalid("q_list: missing".into()))?;
    let reference = reference(problem, &s)?;
    let has_targets = !problem.constraints.is_empty()
        && problem.constraints.iter().all(|c| c.target.is_some());
    let cs = if has_targets || problem.constraints.is_empty() {
        Some(problem.constraint_set(s.kind)?)
    } else {
        None
    };
    let truth = problem.truth.as_ref().map(|_| problem.truth(&s.grid)).transpose()?;
    let m = problem.constraints.len();

    let rows: Vec<SweepRow> = q_list
        .par_iter()
        .map(|&qv| {
            let mut row = SweepRow::default();
            let q = match problem.q_index(qv) {
                Ok(q) => q,
                Err(e) => {
                    row.errors.push(e.to_string());
                    return row;
                }
            };
            if let Some(cs) = &cs {
                match solve(&reference, cs, q, &s.opts) {
                    Ok(res) => {
                        row.branch = Some(res.branch);
                        row.divergence = Some(res.divergence);
                        row.partition_value = Some(res.partition_value);
                        row.multipliers = res.multipliers;
                    }
                    Err(e) => row.errors.push(format!("solve: {e}")),
                }
            }
            if let (Some(l), Reference::Prior(r)) = (&truth, &reference) {
                match triangle(l, r, problem, s.kind, q, &s.opts) {
                    Ok(rep) => row.triangle = Some(rep),
                    Err(e) => row.errors.push(format!("triangle: {e}")),
                }
            }
            row
        })
        .collect();

    let mut header = vec!["q".to_string(), "branch".into(), "divergence".into(), "partition_value".into()];
    header.extend(problem.constraints.iter().map(|c| format!("beta_{}", c.label)));
    header.extend(["d_lr", "d_lp", "d_pr", "triangle_residual", "error"].map(String::from));

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for (qv, row) in q_list.iter().zip(&rows) {
        let mut rec = vec![
            qv.to_string(),
            row.branch.map(branch_name).unwrap_or_default().to_string(),
            cell(row.divergence),
            cell(row.partition_value),
        ];
        if row.multipliers.len() == m {
            rec.extend(row.multipliers.iter().map(|b| b.to_string()));
        } else {
            rec.extend(std::iter::repeat_n(String::new(), m));
        }
        let t = row.triangle.as_ref();
        rec.push(cell(t.map(|t| t.d_lr)));
        rec.push(cell(t.map(|t| t.d_lp)));
        rec.push(cell(t.map(|t| t.d_pr)));
        rec.push(cell(t.map(|t| t.residual)));
        rec.push(row.errors.join("; "));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io {
        path: "<csv buffer>".into(),
        source: e.into_error(),
    })?;
    Ok(Output {
        text: String::from_utf8(bytes).expect("csv output is utf-8"),
        success: true,
    })
}
