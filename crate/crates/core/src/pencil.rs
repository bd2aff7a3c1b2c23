//! Polynomial eigenvalue problem assembly, first companion linearization, and
//! the structural schedule that strips parasitic zero and infinite
//! eigenvalues from the resulting pencil.
//!
//! The schedule is computed from slot patterns only. At runtime the same
//! operations are replayed on numeric matrices (see
//! [`crate::runtime::apply_schedule`]), with elimination multipliers taken
//! from the live values.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use num_rational::Rational64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{self, multisets_match};
use crate::poly::Exponent;
use crate::runtime::{apply_schedule, ScheduleOutcome};
use crate::template::SolverTemplate;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PencilError {
    #[error("placement inconsistency: {0}")]
    Placement(String),
    #[error("linearization needs hidden degree >= 1")]
    DegreeZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entry {
    Const(Rational64),
    Slot { slot: usize, negated: bool },
}

impl Entry {
    fn negate(self) -> Entry {
        match self {
            Entry::Const(c) => Entry::Const(-c),
            Entry::Slot { slot, negated } => Entry::Slot {
                slot,
                negated: !negated,
            },
        }
    }

    pub fn value(&self, slot_values: &[f64]) -> f64 {
        match *self {
            Entry::Const(c) => *c.numer() as f64 / *c.denom() as f64,
            Entry::Slot { slot, negated } => {
                let v = slot_values[slot];
                if negated {
                    -v
                } else {
                    v
                }
            }
        }
    }
}

/// Sparse matrix of constants and coefficient slots; absent entries are
/// structural zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: BTreeMap<(usize, usize), Entry>,
}

impl SymbolicMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SymbolicMatrix {
            rows,
            cols,
            entries: BTreeMap::new(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Option<&Entry> {
        self.entries.get(&(r, c))
    }

    pub fn set(&mut self, r: usize, c: usize, e: Entry) {
        self.entries.insert((r, c), e);
    }

    pub fn instantiate(&self, slot_values: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (&(r, c), e) in &self.entries {
            m[(r, c)] = e.value(slot_values);
        }
        m
    }

    fn row_patterns(&self) -> Vec<BTreeSet<usize>> {
        let mut rows = vec![BTreeSet::new(); self.rows];
        for &(r, c) in self.entries.keys() {
            rows[r].insert(c);
        }
        rows
    }

    /// Highest slot index referenced, plus one.
    pub fn slot_count(&self) -> usize {
        self.entries
            .values()
            .filter_map(|e| match e {
                Entry::Slot { slot, .. } => Some(slot + 1),
                Entry::Const(_) => None,
            })
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnLabel {
    pub block: usize,
    pub monomial: Exponent,
}

/// `A y = λ B y` with `y = [x'; λ x'; ...; λ^{l-1} x']`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPencil {
    pub a: SymbolicMatrix,
    pub b: SymbolicMatrix,
    pub block_size: usize,
    pub blocks: usize,
    pub labels: Vec<ColumnLabel>,
}

impl MatrixPencil {
    pub fn size(&self) -> usize {
        self.a.rows
    }

    pub fn instantiate(&self, slot_values: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.a.instantiate(slot_values), self.b.instantiate(slot_values))
    }
}

/// Which matrix has the structurally zero column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Zero column in `A`; removes a parasitic zero eigenvalue.
    AZeroCol,
    /// Zero column in `B`; removes a parasitic infinite eigenvalue.
    BZeroCol,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ScheduleOp {
    /// Subtract a multiple of `pivot_row` from `target_row` in both matrices so
    /// that the non-zero side of column `col` vanishes at `target_row`.
    Eliminate {
        side: Side,
        col: usize,
        pivot_row: usize,
        target_row: usize,
    },
    /// Drop row `row` and column `col`.
    Remove { side: Side, row: usize, col: usize },
}

/// Operations use indices of the unreduced pencil.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReductionSchedule {
    pub size: usize,
    pub ops: Vec<ScheduleOp>,
    pub kept_rows: Vec<usize>,
    pub kept_cols: Vec<usize>,
}

impl ReductionSchedule {
    pub fn empty(size: usize) -> Self {
        ReductionSchedule {
            size,
            ops: Vec::new(),
            kept_rows: (0..size).collect(),
            kept_cols: (0..size).collect(),
        }
    }

    pub fn eliminations(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| matches!(op, ScheduleOp::Eliminate { .. }))
            .count()
    }

    pub fn removals(&self) -> usize {
        self.ops.len() - self.eliminations()
    }

    pub fn removals_on(&self, side: Side) -> usize {
        self.ops
            .iter()
            .filter(|op| matches!(op, ScheduleOp::Remove { side: s, .. } if *s == side))
            .count()
    }

    pub(crate) fn check_shape(&self, size: usize) -> Result<(), String> {
        if self.size != size {
            return Err(format!("schedule size {} != pencil size {size}", self.size));
        }
        let in_range = |v: &[usize]| v.iter().all(|&i| i < size) && v.windows(2).all(|w| w[0] < w[1]);
        if !in_range(&self.kept_rows) || !in_range(&self.kept_cols) {
            return Err("surviving index lists are not sorted in-range sets".into());
        }
        if self.kept_rows.len() != self.kept_cols.len()
            || self.kept_rows.len() + self.removals() != size
        {
            return Err("surviving index lists disagree with the removal count".into());
        }
        for op in &self.ops {
            let idx = match *op {
                ScheduleOp::Eliminate { col, pivot_row, target_row, .. } => [col, pivot_row, target_row],
                ScheduleOp::Remove { row, col, .. } => [row, col, col],
            };
            if idx.iter().any(|&i| i >= size) {
                return Err("schedule operation index out of range".into());
            }
        }
        Ok(())
    }
}

/// Coefficient matrices `M_0 … M_l` of `M'(x_h) = Σ_e M_e x_h^e`.
pub fn build_pep(template: &SolverTemplate) -> Result<Vec<SymbolicMatrix>, PencilError> {
    let b = template.basis.len();
    let l = template.hidden_degree as usize;
    let mut mats = vec![SymbolicMatrix::zeros(b, b); l + 1];
    let slots = template.system.slots();
    for p in &template.placement {
        let (Some(row), Some(slot)) = (template.rows.get(p.row), slots.get(p.slot)) else {
            return Err(PencilError::Placement(format!("dangling placement {p:?}")));
        };
        let (base, degree) = slot.exponent.without(template.hidden);
        if slot.poly != row.poly
            || degree as u32 != p.degree
            || p.degree as usize > l
            || template.basis.get(p.col) != Some(&row.multiplier.add(&base))
        {
            return Err(PencilError::Placement(format!(
                "slot `{}` cannot sit at row {}, column {}",
                slot.name, p.row, p.col
            )));
        }
        let m = &mut mats[p.degree as usize];
        if m.get(p.row, p.col).is_some() {
            return Err(PencilError::Placement(format!(
                "two slots at ({}, {}, {})",
                p.row, p.col, p.degree
            )));
        }
        m.set(p.row, p.col, Entry::Slot { slot: p.slot, negated: false });
    }
    Ok(mats)
}

/// First companion form of `Σ_e M_e λ^e`.
pub fn linearize(mats: &[SymbolicMatrix], basis: &[Exponent]) -> Result<MatrixPencil, PencilError> {
    if mats.len() < 2 {
        return Err(PencilError::DegreeZero);
    }
    let l = mats.len() - 1;
    let bsz = mats[0].rows;
    let k = l * bsz;
    let mut a = SymbolicMatrix::zeros(k, k);
    let mut b = SymbolicMatrix::zeros(k, k);
    let one = Entry::Const(Rational64::from_integer(1));

    for blk in 0..l - 1 {
        for i in 0..bsz {
            a.set(blk * bsz + i, (blk + 1) * bsz + i, one);
            b.set(blk * bsz + i, blk * bsz + i, one);
        }
    }
    let last = (l - 1) * bsz;
    for (e, m) in mats[..l].iter().enumerate() {
        for (&(r, c), entry) in &m.entries {
            a.set(last + r, e * bsz + c, entry.negate());
        }
    }
    for (&(r, c), entry) in &mats[l].entries {
        b.set(last + r, last + c, *entry);
    }

    let labels = (0..l)
        .flat_map(|block| {
            basis.iter().map(move |m| ColumnLabel {
                block,
                monomial: m.clone(),
            })
        })
        .collect();
    Ok(MatrixPencil {
        a,
        b,
        block_size: bsz,
        blocks: l,
        labels,
    })
}

struct Pattern {
    a: Vec<BTreeSet<usize>>,
    b: Vec<BTreeSet<usize>>,
    row_alive: Vec<bool>,
    col_alive: Vec<bool>,
}

impl Pattern {
    fn split(&mut self, side: Side) -> (&mut Vec<BTreeSet<usize>>, &mut Vec<BTreeSet<usize>>) {
        match side {
            Side::AZeroCol => (&mut self.a, &mut self.b),
            Side::BZeroCol => (&mut self.b, &mut self.a),
        }
    }

    /// Lowest live column that is structurally zero on `side` and has live
    /// non-zeros on the other matrix; returns it with those rows.
    fn find(&mut self, side: Side) -> Option<(usize, Vec<usize>)> {
        let k = self.col_alive.len();
        let rows_alive = self.row_alive.clone();
        let cols_alive = self.col_alive.clone();
        let (zero, other) = self.split(side);
        (0..k).filter(|&j| cols_alive[j]).find_map(|j| {
            let live = |pat: &Vec<BTreeSet<usize>>| -> Vec<usize> {
                (0..k).filter(|&r| rows_alive[r] && pat[r].contains(&j)).collect()
            };
            if !live(zero).is_empty() {
                return None;
            }
            let nz = live(other);
            (!nz.is_empty()).then_some((j, nz))
        })
    }
}

/// Greedy structural reduction, alternating the zero side (`A`) and the
/// infinite side (`B`) until neither makes progress. Pivots are rows that
/// no earlier elimination has modified when one exists, lowest index first.
pub fn reduce_schedule(p: &MatrixPencil) -> ReductionSchedule {
    let k = p.size();
    let mut pat = Pattern {
        a: p.a.row_patterns(),
        b: p.b.row_patterns(),
        row_alive: vec![true; k],
        col_alive: vec![true; k],
    };
    let mut ops = Vec::new();
    let mut touched = vec![false; k];
    loop {
        let mut progressed = false;
        for side in [Side::AZeroCol, Side::BZeroCol] {
            while let Some((col, rows)) = pat.find(side) {
                let pivot = *rows
                    .iter()
                    .min_by_key(|&&r| (touched[r], r))
                    .expect("non-empty column");
                for &target in rows.iter().filter(|&&r| r != pivot) {
                    touched[target] = true;
                    ops.push(ScheduleOp::Eliminate {
                        side,
                        col,
                        pivot_row: pivot,
                        target_row: target,
                    });
                    let (zero, other) = pat.split(side);
                    let fill = other[pivot].clone();
                    other[target].extend(fill);
                    other[target].remove(&col);
                    let fill = zero[pivot].clone();
                    zero[target].extend(fill);
                }
                ops.push(ScheduleOp::Remove {
                    side,
                    row: pivot,
                    col,
                });
                pat.row_alive[pivot] = false;
                pat.col_alive[col] = false;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    ReductionSchedule {
        size: k,
        ops,
        kept_rows: (0..k).filter(|&r| pat.row_alive[r]).collect(),
        kept_cols: (0..k).filter(|&c| pat.col_alive[c]).collect(),
    }
}

/// Compares the finite non-zero spectra of the reduced and unreduced pencils
/// on random instances (relative tolerance `1e-8`). Eigenvalues with
/// `|λ| <= inf_tol` or `|λ| >= 1/inf_tol` are the removable ones and are not
/// compared.
pub fn verify_schedule<R: Rng + ?Sized>(
    p: &MatrixPencil,
    s: &ReductionSchedule,
    trials: usize,
    inf_tol: f64,
    pivot_tol: f64,
    rng: &mut R,
) -> bool {
    if s.ops.is_empty() {
        return true;
    }
    let slots = p.a.slot_count().max(p.b.slot_count());
    (0..trials).all(|_| {
        let values: Vec<f64> = (0..slots).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = p.instantiate(&values);
        let Ok(ScheduleOutcome::Reduced { a: ar, b: br }) = apply_schedule(&a, &b, s, pivot_tol) else {
            return false;
        };
        match (
            numeric::nonzero_finite_eigenvalues(&a, &b, inf_tol),
            numeric::nonzero_finite_eigenvalues(&ar, &br, inf_tol),
        ) {
            (Ok(full), Ok(reduced)) => multisets_match(&full, &reduced, 1e-8),
            _ => false,
        }
    })
}
