//! The frozen output of the offline stage and its JSON file format.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pencil::ReductionSchedule;
use crate::poly::{Exponent, PolySystem};
use crate::polytope::Displacement;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template file is not valid JSON: {0}")]
    Parse(String),
    #[error("template format version {found} is not supported (expected {FORMAT_VERSION})")]
    Version { found: u64 },
    #[error("template integrity check failed: {0}")]
    Integrity(String),
}

/// Row `poly · x^multiplier` of the resultant matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemplateRow {
    pub poly: usize,
    pub multiplier: Exponent,
}

/// Slot `slot` sits at `(row, col)` of the coefficient matrix of `x_h^degree`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub row: usize,
    pub col: usize,
    pub degree: u32,
    pub slot: usize,
}

/// `x_variable = (v[numerator] / v[denominator]) / λ^hidden_shift`, with
/// indices into the unreduced pencil.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryPair {
    pub variable: usize,
    pub numerator: usize,
    pub denominator: usize,
    pub hidden_shift: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverTemplate {
    pub format_version: u32,
    pub system: PolySystem,
    pub hidden: usize,
    /// Polynomials whose Newton polytopes were summed to shape the basis.
    pub subset: Vec<usize>,
    pub displacement: Displacement,
    pub seed: u64,
    pub basis: Vec<Exponent>,
    pub rows: Vec<TemplateRow>,
    pub hidden_degree: u32,
    pub placement: Vec<Placement>,
    pub pencil_size: usize,
    pub schedule: ReductionSchedule,
    pub recovery: Vec<RecoveryPair>,
}

impl SolverTemplate {
    pub fn hidden_name(&self) -> &str {
        &self.system.variables()[self.hidden]
    }

    pub fn basis_size(&self) -> usize {
        self.basis.len()
    }

    pub fn reduced_size(&self) -> usize {
        self.schedule.kept_cols.len()
    }

    /// `(block, basis monomial)` of an unreduced pencil column: the column
    /// holds `x_h^block · x^monomial`.
    pub fn column_label(&self, col: usize) -> (usize, &Exponent) {
        let b = self.basis.len();
        (col / b, &self.basis[col % b])
    }

    /// Canonical serialization: pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("template serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, TemplateError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| TemplateError::Parse(e.to_string()))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(found) => return Err(TemplateError::Version { found }),
            None => return Err(TemplateError::Integrity("missing format_version".into())),
        }
        let template: SolverTemplate =
            serde_json::from_value(value).map_err(|e| TemplateError::Parse(e.to_string()))?;
        template.validate()?;
        Ok(template)
    }

    /// Structural consistency of all fields against each other.
    pub fn validate(&self) -> Result<(), TemplateError> {
        let fail = |msg: String| Err(TemplateError::Integrity(msg));
        let sys = &self.system;
        let n = sys.num_vars();
        let b = self.basis.len();
        if self.hidden >= n {
            return fail(format!("hidden index {} out of range", self.hidden));
        }
        if self.rows.len() != b || b == 0 {
            return fail(format!("{} rows for {} basis monomials", self.rows.len(), b));
        }
        if self.hidden_degree == 0 {
            return fail("hidden degree is zero".into());
        }
        if self.pencil_size != b * self.hidden_degree as usize {
            return fail(format!("pencil size {} != {}·{}", self.pencil_size, b, self.hidden_degree));
        }
        let col_of: HashMap<&Exponent, usize> =
            self.basis.iter().enumerate().map(|(i, e)| (e, i)).collect();
        if col_of.len() != b {
            return fail("basis monomials repeat".into());
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.poly >= sys.num_polys() || row.multiplier.dim() + 1 != n {
                return fail(format!("row {r} is malformed"));
            }
        }
        for p in &self.placement {
            let Some(slot) = sys.slots().get(p.slot) else {
                return fail(format!("placement references unknown slot {}", p.slot));
            };
            let Some(row) = self.rows.get(p.row) else {
                return fail(format!("placement references unknown row {}", p.row));
            };
            let (base, degree) = slot.exponent.without(self.hidden);
            if slot.poly != row.poly
                || degree as u32 != p.degree
                || col_of.get(&row.multiplier.add(&base)) != Some(&p.col)
            {
                return fail(format!(
                    "slot `{}` misplaced at ({}, {}, {})",
                    slot.name, p.row, p.col, p.degree
                ));
            }
        }
        self.schedule
            .check_shape(self.pencil_size)
            .map_err(TemplateError::Integrity)?;
        if self.recovery.len() + 1 != n {
            return fail(format!("{} recovery pairs for {} base variables", self.recovery.len(), n - 1));
        }
        for pair in &self.recovery {
            for idx in [pair.numerator, pair.denominator] {
                if !self.schedule.kept_cols.contains(&idx) {
                    return fail(format!("recovery column {idx} does not survive reduction"));
                }
            }
            let (ba, ma) = self.column_label(pair.numerator);
            let (bb, mb) = self.column_label(pair.denominator);
            let axis = if pair.variable < self.hidden { pair.variable } else { pair.variable - 1 };
            if pair.variable == self.hidden
                || pair.variable >= n
                || ma.sub(mb) != Exponent::unit(n - 1, axis)
                || ba as i32 - bb as i32 != pair.hidden_shift
            {
                return fail(format!("recovery pair for variable {} is malformed", pair.variable));
            }
        }
        Ok(())
    }
}
