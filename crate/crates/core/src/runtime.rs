//! Online stage: instantiate a template, replay its reduction schedule, solve
//! the generalized eigenproblem and read the roots off the eigenvectors.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::numeric::{self, DetPolynomial, Eigenvalue, NumericError};
use crate::pencil::{self, MatrixPencil, PencilError, ReductionSchedule, ScheduleOp, Side};
use crate::poly::{evaluate_with, PolyError, PolySystem};
use crate::template::SolverTemplate;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Pencil(#[from] PencilError),
    #[error("slot `{0}` has a non-finite value")]
    NonFinite(String),
    #[error("instance line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("pencil is {got}x{got} but the schedule expects {expected}x{expected}")]
    Shape { expected: usize, got: usize },
}

/// Numeric values for coefficient slots, keyed by slot name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoefficientInstance {
    values: BTreeMap<String, f64>,
}

impl CoefficientInstance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        CoefficientInstance {
            values: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    /// Values in slot declaration order of `sys`.
    pub fn from_values(sys: &PolySystem, values: &[f64]) -> Self {
        Self::from_pairs(sys.slots().iter().map(|s| s.name.clone()).zip(values.iter().copied()))
    }

    pub fn insert(&mut self, slot: impl Into<String>, value: f64) {
        self.values.insert(slot.into(), value);
    }

    pub fn get(&self, slot: &str) -> Option<f64> {
        self.values.get(slot).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Resolves every slot of `sys`; extra names are ignored.
    pub fn slot_values(&self, sys: &PolySystem) -> Result<Vec<f64>, PolyError> {
        sys.slots()
            .iter()
            .map(|s| self.get(&s.name).ok_or_else(|| PolyError::MissingSlot(s.name.clone())))
            .collect()
    }

    fn finite_slot_values(&self, sys: &PolySystem) -> Result<Vec<f64>, RuntimeError> {
        let values = self.slot_values(sys)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(RuntimeError::NonFinite(sys.slots()[i].name.clone()));
        }
        Ok(values)
    }
}

/// Parses `slot = value` lines; `#` starts a comment.
pub fn parse_instance(text: &str) -> Result<CoefficientInstance, RuntimeError> {
    let mut inst = CoefficientInstance::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| RuntimeError::Parse { line: i + 1, message };
        let (name, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected `slot = value`".into()))?;
        let name = name.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(err(format!("bad slot name `{name}`")));
        }
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| err(format!("bad number `{}`", value.trim())))?;
        if !value.is_finite() {
            return Err(RuntimeError::NonFinite(name.into()));
        }
        if inst.values.insert(name.into(), value).is_some() {
            return Err(err(format!("slot `{name}` assigned twice")));
        }
    }
    Ok(inst)
}

/// Writes one `slot = value` line per slot, in slot declaration order when a
/// system is given.
pub fn format_instance(inst: &CoefficientInstance, sys: Option<&PolySystem>) -> String {
    let mut out = String::new();
    match sys {
        Some(sys) => {
            for s in sys.slots() {
                if let Some(v) = inst.get(&s.name) {
                    let _ = writeln!(out, "{} = {v:e}", s.name);
                }
            }
        }
        None => {
            for (k, v) in inst.iter() {
                let _ = writeln!(out, "{k} = {v:e}");
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Bound on `|f_i(x)| / ‖coefficients of f_i‖_1`.
    pub residual_tol: f64,
    pub consistency_tol: f64,
    /// Recovery denominators below `ratio_tol · ‖v‖` mark a solution indeterminate.
    pub ratio_tol: f64,
    pub pivot_tol: f64,
    pub inf_tol: f64,
    pub keep_all: bool,
    pub no_reduce: bool,
    /// Drop imaginary parts below `tol · max(1, |re|)`.
    pub realify_tol: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            residual_tol: 1e-6,
            consistency_tol: 1e-4,
            ratio_tol: 1e-12,
            pivot_tol: 1e-12,
            inf_tol: 1e-10,
            keep_all: false,
            no_reduce: false,
            realify_tol: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionStatus {
    Valid,
    /// Residual or consistency check failed.
    Invalid,
    /// A recovery denominator vanished.
    Indeterminate,
}

impl SolutionStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolutionStatus::Valid => "valid",
            SolutionStatus::Invalid => "invalid",
            SolutionStatus::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub point: Vec<Complex64>,
    /// Relative residuals, one per polynomial.
    pub residuals: Vec<f64>,
    /// Raw `|f_i(point)|`.
    pub abs_residuals: Vec<f64>,
    pub eigenvalue: Complex64,
    pub consistency: f64,
    pub status: SolutionStatus,
}

impl Solution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_valid(&self) -> bool {
        self.status == SolutionStatus::Valid
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleOutcome {
    Reduced { a: DMatrix<f64>, b: DMatrix<f64> },
    /// A pivot was too small at operation `op`; the caller should use the
    /// unreduced pencil.
    Fallback { op: usize },
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solutions: Vec<Solution>,
    /// Pencil size actually handed to the eigensolver.
    pub pencil_size: usize,
    pub reduced: bool,
    pub fallback: bool,
    pub finite: usize,
    pub infinite: usize,
    pub indeterminate: usize,
}

impl SolveReport {
    pub fn valid_count(&self) -> usize {
        self.solutions.iter().filter(|s| s.is_valid()).count()
    }
}

pub fn template_pencil(template: &SolverTemplate) -> Result<MatrixPencil, PencilError> {
    pencil::linearize(&pencil::build_pep(template)?, &template.basis)
}

/// Numeric `(A, B)` of the unreduced pencil.
pub fn instantiate(
    template: &SolverTemplate,
    inst: &CoefficientInstance,
) -> Result<(DMatrix<f64>, DMatrix<f64>), RuntimeError> {
    let values = inst.finite_slot_values(&template.system)?;
    Ok(template_pencil(template)?.instantiate(&values))
}

/// Replays `schedule` on live values. Falls back when an elimination pivot
/// is below `pivot_tol` times its column maximum, or when the entry kept by a
/// removal is zero up to rounding.
pub fn apply_schedule(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    schedule: &ReductionSchedule,
    pivot_tol: f64,
) -> Result<ScheduleOutcome, RuntimeError> {
    let k = schedule.size;
    if a.shape() != (k, k) || b.shape() != (k, k) {
        return Err(RuntimeError::Shape {
            expected: k,
            got: a.nrows(),
        });
    }
    let mut a = a.clone();
    let mut b = b.clone();
    let mut row_alive = vec![true; k];
    for (idx, op) in schedule.ops.iter().enumerate() {
        match *op {
            ScheduleOp::Eliminate {
                side,
                col,
                pivot_row,
                target_row,
            } => {
                let y = if side == Side::AZeroCol { &b } else { &a };
                let col_max = (0..k)
                    .filter(|&r| row_alive[r])
                    .map(|r| y[(r, col)].abs())
                    .fold(0.0, f64::max);
                let pivot = y[(pivot_row, col)];
                if pivot == 0.0 || pivot.abs() < pivot_tol * col_max {
                    return Ok(ScheduleOutcome::Fallback { op: idx });
                }
                let g = -y[(target_row, col)] / pivot;
                for m in [&mut a, &mut b] {
                    let src = m.row(pivot_row).clone_owned();
                    let mut dst = m.row_mut(target_row);
                    dst += src * g;
                }
                let y = if side == Side::AZeroCol { &mut b } else { &mut a };
                y[(target_row, col)] = 0.0;
            }
            ScheduleOp::Remove { side, row, col } => {
                let y = if side == Side::AZeroCol { &b } else { &a };
                if y[(row, col)].abs() <= k as f64 * f64::EPSILON * y.amax() {
                    return Ok(ScheduleOutcome::Fallback { op: idx });
                }
                row_alive[row] = false;
            }
        }
    }
    let pick = |m: &DMatrix<f64>| {
        DMatrix::from_fn(schedule.kept_rows.len(), schedule.kept_cols.len(), |i, j| {
            m[(schedule.kept_rows[i], schedule.kept_cols[j])]
        })
    };
    Ok(ScheduleOutcome::Reduced {
        a: pick(&a),
        b: pick(&b),
    })
}

pub fn solve(
    template: &SolverTemplate,
    inst: &CoefficientInstance,
    options: &SolveOptions,
) -> Result<Vec<Solution>, RuntimeError> {
    Ok(solve_with_report(template, inst, options)?.solutions)
}

pub fn solve_with_report(
    template: &SolverTemplate,
    inst: &CoefficientInstance,
    options: &SolveOptions,
) -> Result<SolveReport, RuntimeError> {
    let sys = &template.system;
    let values = inst.finite_slot_values(sys)?;
    let (a, b) = template_pencil(template)?.instantiate(&values);

    let all_cols: Vec<usize> = (0..template.pencil_size).collect();
    let (a, b, cols, reduced, fallback) = if options.no_reduce || template.schedule.ops.is_empty() {
        (a, b, all_cols, false, false)
    } else {
        match apply_schedule(&a, &b, &template.schedule, options.pivot_tol)? {
            ScheduleOutcome::Reduced { a, b } => (a, b, template.schedule.kept_cols.clone(), true, false),
            ScheduleOutcome::Fallback { .. } => (a, b, all_cols, false, true),
        }
    };

    let pairs = numeric::gep_solve(&a, &b, options.inf_tol)?;
    let coeff_norms: Vec<f64> = sys
        .polys()
        .iter()
        .map(|p| p.terms.iter().map(|t| values[t.slot].abs()).sum::<f64>())
        .collect();
    let position: BTreeMap<usize, usize> = cols.iter().enumerate().map(|(i, &c)| (c, i)).collect();

    let mut report = SolveReport {
        solutions: Vec::new(),
        pencil_size: a.nrows(),
        reduced,
        fallback,
        finite: 0,
        infinite: 0,
        indeterminate: 0,
    };
    for pair in &pairs {
        let lambda = match pair.value {
            Eigenvalue::Finite(v) => v,
            Eigenvalue::Infinite => {
                report.infinite += 1;
                continue;
            }
            Eigenvalue::Indeterminate => {
                report.indeterminate += 1;
                continue;
            }
        };
        report.finite += 1;
        let solution = recover(template, &values, &coeff_norms, &cols, &position, lambda, &pair.vector, options)?;
        if options.keep_all || solution.is_valid() {
            report.solutions.push(solution);
        }
    }
    report
        .solutions
        .sort_by(|x, y| x.max_residual().total_cmp(&y.max_residual()));
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn recover(
    template: &SolverTemplate,
    values: &[f64],
    coeff_norms: &[f64],
    cols: &[usize],
    position: &BTreeMap<usize, usize>,
    lambda: Complex64,
    v: &DVector<Complex64>,
    options: &SolveOptions,
) -> Result<Solution, RuntimeError> {
    let sys = &template.system;
    let n = sys.num_vars();
    let vnorm = v.norm();
    let mut point = vec![Complex64::new(0.0, 0.0); n];
    point[template.hidden] = lambda;
    let mut indeterminate = !vnorm.is_finite() || vnorm == 0.0;
    for pair in &template.recovery {
        let num = v[position[&pair.numerator]];
        let den = v[position[&pair.denominator]];
        if indeterminate || den.norm() < options.ratio_tol * vnorm || den.norm() == 0.0 {
            indeterminate = true;
            point[pair.variable] = Complex64::new(f64::NAN, f64::NAN);
            continue;
        }
        point[pair.variable] = num / den / lambda.powi(pair.hidden_shift);
    }
    if let Some(tol) = options.realify_tol {
        for z in point.iter_mut() {
            if z.im.abs() <= tol * z.re.abs().max(1.0) {
                z.im = 0.0;
            }
        }
    }

    let (residuals, abs_residuals, consistency) = if indeterminate {
        (vec![f64::INFINITY; sys.num_polys()], vec![f64::INFINITY; sys.num_polys()], f64::INFINITY)
    } else {
        let abs = evaluate_with(sys, values, &point)?;
        let rel = abs
            .iter()
            .zip(coeff_norms)
            .map(|(r, c)| if *c > 0.0 { r / c } else { *r })
            .collect();
        (rel, abs, consistency_score(template, cols, v, &point))
    };
    let max_res = residuals.iter().cloned().fold(0.0, f64::max);
    let status = if indeterminate {
        SolutionStatus::Indeterminate
    } else if max_res <= options.residual_tol && consistency <= options.consistency_tol {
        SolutionStatus::Valid
    } else {
        SolutionStatus::Invalid
    };
    Ok(Solution {
        point,
        residuals,
        abs_residuals,
        eigenvalue: lambda,
        consistency,
        status,
    })
}

/// Largest deviation between the eigenvector and the monomial vector of the
/// recovered point, both scaled so the dominant eigenvector entry is 1.
/// Entries below `1e-4` of the dominant one are ignored.
fn consistency_score(template: &SolverTemplate, cols: &[usize], v: &DVector<Complex64>, point: &[Complex64]) -> f64 {
    let Some((c0, v0)) = v.iter().enumerate().max_by(|x, y| x.1.norm().total_cmp(&y.1.norm())) else {
        return 0.0;
    };
    let h = template.hidden;
    let monomial = |col: usize| {
        let (block, base) = template.column_label(col);
        point[h].powi(block as i32) * base.with_inserted(h, 0).eval(point)
    };
    let w0 = monomial(cols[c0]);
    if w0.norm() == 0.0 || !w0.is_finite() {
        return f64::INFINITY;
    }
    v.iter()
        .enumerate()
        .filter(|(_, x)| x.norm() >= 1e-4 * v0.norm())
        .map(|(i, x)| (x / v0 - monomial(cols[i]) / w0).norm())
        .fold(0.0, f64::max)
}

/// `det M'(x_h)` for the instance, interpolated on the unit circle.
pub fn det_interpolation_oracle(
    template: &SolverTemplate,
    inst: &CoefficientInstance,
) -> Result<DetPolynomial, RuntimeError> {
    let values = inst.finite_slot_values(&template.system)?;
    let mats: Vec<DMatrix<f64>> = pencil::build_pep(template)?
        .iter()
        .map(|m| m.instantiate(&values))
        .collect();
    Ok(numeric::det_polynomial(&mats))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Csv,
    /// JSON document with one object per solution.
    Struct,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "struct" => Ok(OutputFormat::Struct),
            other => Err(format!("unknown format `{other}` (expected csv or struct)")),
        }
    }
}

/// Solution records: point (real and imaginary parts per variable), maximum
/// relative residual, consistency score and status.
pub fn format_solutions(solutions: &[Solution], variables: &[String], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from("index,status");
            for v in variables {
                let _ = write!(out, ",{v}_re,{v}_im");
            }
            out.push_str(",max_residual,consistency\n");
            for (i, s) in solutions.iter().enumerate() {
                let _ = write!(out, "{i},{}", s.status.as_str());
                for z in &s.point {
                    let _ = write!(out, ",{:e},{:e}", z.re, z.im);
                }
                let _ = writeln!(out, ",{:e},{:e}", s.max_residual(), s.consistency);
            }
            out
        }
        OutputFormat::Struct => {
            let records: Vec<serde_json::Value> = solutions
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let point: serde_json::Map<String, serde_json::Value> = variables
                        .iter()
                        .zip(&s.point)
                        .map(|(v, z)| (v.clone(), serde_json::json!([z.re, z.im])))
                        .collect();
                    serde_json::json!({
                        "index": i,
                        "status": s.status.as_str(),
                        "valid": s.is_valid(),
                        "point": point,
                        "residuals": s.residuals,
                        "max_residual": s.max_residual(),
                        "consistency": s.consistency,
                        "eigenvalue": [s.eigenvalue.re, s.eigenvalue.im],
                    })
                })
                .collect();
            let doc = serde_json::json!({
                "valid": solutions.iter().filter(|s| s.is_valid()).count(),
                "solutions": records,
            });
            let mut text = serde_json::to_string_pretty(&doc).unwrap_or_default();
            text.push('\n');
            text
        }
    }
}
