//! Parametric multivariate polynomial systems.
//!
//! Every coefficient is a named symbolic slot; numeric values are supplied
//! later through a [`CoefficientInstance`]. A system can be projected by
//! hiding one variable, which moves that variable into the coefficients and
//! leaves a system in the remaining `n - 1` base variables.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runtime::CoefficientInstance;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("slot `{0}` is declared more than once")]
    DuplicateSlot(String),
    #[error("variable `{0}` is declared more than once")]
    DuplicateVariable(String),
    #[error("polynomial `{0}` is declared more than once")]
    DuplicatePolynomial(String),
    #[error("polynomial `{poly}` repeats the monomial {exponent}")]
    DuplicateMonomial { poly: String, exponent: Exponent },
    #[error("polynomial `{0}` has no terms")]
    EmptyPolynomial(String),
    #[error("no variables declared")]
    NoVariables,
    #[error("variable `{0}` does not appear in any term")]
    UnusedVariable(String),
    #[error("{polys} polynomial(s) in {vars} variable(s): need at least as many polynomials as variables")]
    Underdetermined { polys: usize, vars: usize },
    #[error("exponent vector has {got} entries, expected {expected}")]
    ExponentLength { got: usize, expected: usize },
    #[error("negative exponent in {0}")]
    NegativeExponent(Exponent),
    #[error("hidden variable index {index} out of range for {n} variables")]
    HiddenOutOfRange { index: usize, n: usize },
    #[error("no value for slot `{0}`")]
    MissingSlot(String),
    #[error("point has {got} coordinates, system has {expected} variables")]
    PointDimension { got: usize, expected: usize },
}

/// Exponent vector of a monomial, `x^e = x_1^e_1 ... x_d^e_d`.
///
/// Entries are signed so that differences of exponents can be formed
/// without overflow checks; monomials proper always have non-negative
/// entries.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Exponent(pub Vec<i32>);

impl Exponent {
    pub fn zeros(dim: usize) -> Self {
        Exponent(vec![0; dim])
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut e = vec![0; dim];
        e[axis] = 1;
        Exponent(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> i32 {
        self.0.iter().sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&e| e >= 0)
    }

    pub fn add(&self, other: &Exponent) -> Exponent {
        debug_assert_eq!(self.dim(), other.dim());
        Exponent(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Exponent) -> Exponent {
        debug_assert_eq!(self.dim(), other.dim());
        Exponent(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Splits off entry `axis`, returning the remaining vector and the removed entry.
    pub fn without(&self, axis: usize) -> (Exponent, i32) {
        let mut rest = self.0.clone();
        let removed = rest.remove(axis);
        (Exponent(rest), removed)
    }

    /// Inverse of [`Exponent::without`].
    pub fn with_inserted(&self, axis: usize, value: i32) -> Exponent {
        let mut full = self.0.clone();
        full.insert(axis, value);
        Exponent(full)
    }

    pub fn eval(&self, point: &[Complex64]) -> Complex64 {
        self.0
            .iter()
            .zip(point)
            .fold(Complex64::new(1.0, 0.0), |acc, (&e, &x)| acc * x.powi(e))
    }

    pub fn eval_real(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .fold(1.0, |acc, (&e, &x)| acc * x.powi(e))
    }

    /// Renders the monomial with the given variable names, e.g. `x^2*y`.
    pub fn display_with(&self, names: &[String]) -> String {
        let factors: Vec<String> = self
            .0
            .iter()
            .zip(names)
            .filter(|(e, _)| **e != 0)
            .map(|(e, name)| {
                if *e == 1 {
                    name.clone()
                } else {
                    format!("{name}^{e}")
                }
            })
            .collect();
        if factors.is_empty() {
            "1".to_string()
        } else {
            factors.join("*")
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// A symbolic coefficient `u_{i,α}`: the coefficient of monomial `exponent`
/// in polynomial `poly`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoeffSlot {
    pub name: String,
    pub poly: usize,
    pub exponent: Exponent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub exponent: Exponent,
    /// Index into [`PolySystem::slots`].
    pub slot: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamPolynomial {
    pub name: String,
    pub terms: Vec<Term>,
}

impl ParamPolynomial {
    pub fn support(&self) -> BTreeSet<Exponent> {
        self.terms.iter().map(|t| t.exponent.clone()).collect()
    }

    pub fn degree_in(&self, var: usize) -> i32 {
        self.terms.iter().map(|t| t.exponent.0[var]).max().unwrap_or(0)
    }
}

/// `m` parametric polynomials in `n` variables, `m >= n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SystemRecord", into = "SystemRecord")]
pub struct PolySystem {
    variables: Vec<String>,
    polys: Vec<ParamPolynomial>,
    slots: Vec<CoeffSlot>,
}

/// Builder input for one polynomial: its name and `(slot name, exponent)` terms.
pub type PolySpec = (String, Vec<(String, Exponent)>);

impl PolySystem {
    pub fn new(variables: Vec<String>, polys: Vec<PolySpec>) -> Result<Self, PolyError> {
        if variables.is_empty() {
            return Err(PolyError::NoVariables);
        }
        let n = variables.len();
        let mut seen_vars = HashSet::new();
        for v in &variables {
            if !seen_vars.insert(v.as_str()) {
                return Err(PolyError::DuplicateVariable(v.clone()));
            }
        }

        let mut slots = Vec::new();
        let mut slot_names = HashSet::new();
        let mut poly_names = HashSet::new();
        let mut out = Vec::with_capacity(polys.len());
        for (poly_index, (name, terms)) in polys.into_iter().enumerate() {
            if !poly_names.insert(name.clone()) {
                return Err(PolyError::DuplicatePolynomial(name));
            }
            if terms.is_empty() {
                return Err(PolyError::EmptyPolynomial(name));
            }
            let mut exps = HashSet::new();
            let mut poly_terms = Vec::with_capacity(terms.len());
            for (slot_name, exponent) in terms {
                if exponent.dim() != n {
                    return Err(PolyError::ExponentLength {
                        got: exponent.dim(),
                        expected: n,
                    });
                }
                if !exponent.is_nonnegative() {
                    return Err(PolyError::NegativeExponent(exponent));
                }
                if !exps.insert(exponent.clone()) {
                    return Err(PolyError::DuplicateMonomial {
                        poly: name.clone(),
                        exponent,
                    });
                }
                if !slot_names.insert(slot_name.clone()) {
                    return Err(PolyError::DuplicateSlot(slot_name));
                }
                poly_terms.push(Term {
                    exponent: exponent.clone(),
                    slot: slots.len(),
                });
                slots.push(CoeffSlot {
                    name: slot_name,
                    poly: poly_index,
                    exponent,
                });
            }
            out.push(ParamPolynomial {
                name,
                terms: poly_terms,
            });
        }

        for (v, name) in variables.iter().enumerate() {
            if !slots.iter().any(|s| s.exponent.0[v] > 0) {
                return Err(PolyError::UnusedVariable(name.clone()));
            }
        }
        if out.len() < n {
            return Err(PolyError::Underdetermined {
                polys: out.len(),
                vars: n,
            });
        }

        Ok(PolySystem {
            variables,
            polys: out,
            slots,
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn polys(&self) -> &[ParamPolynomial] {
        &self.polys
    }

    /// All slots in declaration order.
    pub fn slots(&self) -> &[CoeffSlot] {
        &self.slots
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_polys(&self) -> usize {
        self.polys.len()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }
}

#[derive(Serialize, Deserialize)]
struct SystemRecord {
    variables: Vec<String>,
    polys: Vec<PolyRecord>,
}

#[derive(Serialize, Deserialize)]
struct PolyRecord {
    name: String,
    terms: Vec<TermRecord>,
}

#[derive(Serialize, Deserialize)]
struct TermRecord {
    slot: String,
    exponent: Exponent,
}

impl TryFrom<SystemRecord> for PolySystem {
    type Error = PolyError;

    fn try_from(rec: SystemRecord) -> Result<Self, Self::Error> {
        let polys = rec
            .polys
            .into_iter()
            .map(|p| {
                (
                    p.name,
                    p.terms.into_iter().map(|t| (t.slot, t.exponent)).collect(),
                )
            })
            .collect();
        PolySystem::new(rec.variables, polys)
    }
}

impl From<PolySystem> for SystemRecord {
    fn from(sys: PolySystem) -> Self {
        let polys = sys
            .polys
            .iter()
            .map(|p| PolyRecord {
                name: p.name.clone(),
                terms: p
                    .terms
                    .iter()
                    .map(|t| TermRecord {
                        slot: sys.slots[t.slot].name.clone(),
                        exponent: t.exponent.clone(),
                    })
                    .collect(),
            })
            .collect();
        SystemRecord {
            variables: sys.variables,
            polys,
        }
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Byte offset of `part` inside `line`; `part` must be a subslice of it.
fn offset_in(line: &str, part: &str) -> usize {
    part.as_ptr() as usize - line.as_ptr() as usize
}

/// Parses a problem file. See `docs/formats.md` for the grammar.
pub fn parse_system(text: &str) -> Result<PolySystem, PolyError> {
    let mut variables: Option<Vec<String>> = None;
    let mut var_lookup: HashMap<String, usize> = HashMap::new();
    let mut polys: Vec<PolySpec> = Vec::new();

    for (line_no, raw_line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let content = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        for stmt in content.split(';') {
            let trimmed = stmt.trim();
            if trimmed.is_empty() {
                continue;
            }
            let column = offset_in(raw_line, trimmed) + 1;
            let err = |col: usize, message: String| PolyError::Syntax {
                line: line_no,
                column: col,
                message,
            };
            let Some(colon) = trimmed.find(':') else {
                return Err(err(column, "expected `vars:` or `<name>: <terms>`".into()));
            };
            let head = trimmed[..colon].trim();
            let body = &trimmed[colon + 1..];

            if head == "vars" {
                if variables.is_some() {
                    return Err(err(column, "variables declared twice".into()));
                }
                if !polys.is_empty() {
                    return Err(err(column, "`vars:` must precede the polynomials".into()));
                }
                let mut names = Vec::new();
                for name in body.split(|c: char| c.is_whitespace() || c == ',') {
                    if name.is_empty() {
                        continue;
                    }
                    if !is_identifier(name) {
                        return Err(err(
                            offset_in(raw_line, name) + 1,
                            format!("invalid variable name `{name}`"),
                        ));
                    }
                    if var_lookup.insert(name.to_string(), names.len()).is_some() {
                        return Err(PolyError::DuplicateVariable(name.to_string()));
                    }
                    names.push(name.to_string());
                }
                if names.is_empty() {
                    return Err(PolyError::NoVariables);
                }
                variables = Some(names);
                continue;
            }

            let Some(vars) = variables.as_ref() else {
                return Err(err(column, "polynomial before `vars:` declaration".into()));
            };
            let name = head.strip_prefix("poly").map(str::trim).unwrap_or(head);
            let name = if name.is_empty() { head } else { name };
            if !is_identifier(name) {
                return Err(err(column, format!("invalid polynomial name `{name}`")));
            }

            let mut terms = Vec::new();
            for term in body.split('+') {
                let term_trim = term.trim();
                if term_trim.is_empty() {
                    let col = offset_in(raw_line, term) + 1;
                    return Err(err(col, "empty term".into()));
                }
                let mut factors = term_trim.split('*');
                let slot = factors.next().unwrap_or_default().trim();
                let slot_col = offset_in(raw_line, slot) + 1;
                if !is_identifier(slot) {
                    return Err(err(slot_col, format!("invalid coefficient slot `{slot}`")));
                }
                if var_lookup.contains_key(slot) {
                    return Err(err(
                        slot_col,
                        format!("term must start with a coefficient slot, found variable `{slot}`"),
                    ));
                }
                let mut exponent = Exponent::zeros(vars.len());
                for factor in factors {
                    let f = factor.trim();
                    let col = offset_in(raw_line, f) + 1;
                    let (var, power) = match f.split_once('^') {
                        Some((v, p)) => {
                            let p = p.trim().parse::<i32>().ok().filter(|p| *p >= 0).ok_or_else(
                                || err(col, format!("invalid exponent in `{f}`")),
                            )?;
                            (v.trim(), p)
                        }
                        None => (f, 1),
                    };
                    let Some(&idx) = var_lookup.get(var) else {
                        return Err(err(col, format!("unknown variable `{var}`")));
                    };
                    exponent.0[idx] += power;
                }
                terms.push((slot.to_string(), exponent));
            }
            polys.push((name.to_string(), terms));
        }
    }

    let variables = variables.ok_or(PolyError::NoVariables)?;
    PolySystem::new(variables, polys)
}

/// Canonical problem-file text; `parse_system(&format_system(s)) == s`.
pub fn format_system(sys: &PolySystem) -> String {
    let mut out = format!("vars: {}\n", sys.variables.join(" "));
    for p in &sys.polys {
        let terms: Vec<String> = p
            .terms
            .iter()
            .map(|t| {
                let mono = t.exponent.display_with(&sys.variables);
                let slot = &sys.slots[t.slot].name;
                if mono == "1" {
                    slot.clone()
                } else {
                    format!("{slot}*{mono}")
                }
            })
            .collect();
        out.push_str(&format!("poly {}: {}\n", p.name, terms.join(" + ")));
    }
    out
}

/// One term of a projected polynomial: `slot * x_h^degree` multiplying a base monomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HiddenTerm {
    pub degree: u32,
    pub slot: usize,
}

/// The system viewed over the base variables with `x_h` moved into the coefficients.
#[derive(Clone, Debug)]
pub struct ProjectedSystem {
    pub hidden: usize,
    pub base_vars: Vec<String>,
    pub polys: Vec<BTreeMap<Exponent, Vec<HiddenTerm>>>,
    /// Maximum degree of `x_h` over all terms (`l`).
    pub hidden_degree: u32,
}

impl ProjectedSystem {
    pub fn base_dim(&self) -> usize {
        self.base_vars.len()
    }

    pub fn support(&self, poly: usize) -> BTreeSet<Exponent> {
        self.polys[poly].keys().cloned().collect()
    }

    /// Reassembles the full-dimensional `(exponent, slot)` terms of each polynomial.
    pub fn reassemble(&self) -> Vec<Vec<(Exponent, usize)>> {
        self.polys
            .iter()
            .map(|p| {
                p.iter()
                    .flat_map(|(base, terms)| {
                        terms.iter().map(move |t| {
                            (base.with_inserted(self.hidden, t.degree as i32), t.slot)
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn hide_variable(sys: &PolySystem, hidden: usize) -> Result<ProjectedSystem, PolyError> {
    let n = sys.num_vars();
    if hidden >= n {
        return Err(PolyError::HiddenOutOfRange { index: hidden, n });
    }
    let mut hidden_degree = 0u32;
    let polys = sys
        .polys
        .iter()
        .map(|p| {
            let mut map: BTreeMap<Exponent, Vec<HiddenTerm>> = BTreeMap::new();
            for t in &p.terms {
                let (base, deg) = t.exponent.without(hidden);
                let deg = deg as u32;
                hidden_degree = hidden_degree.max(deg);
                map.entry(base).or_default().push(HiddenTerm { degree: deg, slot: t.slot });
            }
            for terms in map.values_mut() {
                terms.sort_by_key(|t| t.degree);
            }
            map
        })
        .collect();
    let base_vars = sys
        .variables
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != hidden)
        .map(|(_, v)| v.clone())
        .collect();
    Ok(ProjectedSystem {
        hidden,
        base_vars,
        polys,
        hidden_degree,
    })
}

/// `|f_i(point)|` for every polynomial, with coefficients from `instance`.
pub fn evaluate(
    sys: &PolySystem,
    instance: &CoefficientInstance,
    point: &[Complex64],
) -> Result<Vec<f64>, PolyError> {
    let values = instance.slot_values(sys)?;
    evaluate_with(sys, &values, point)
}

/// As [`evaluate`], with slot values already resolved in declaration order.
pub fn evaluate_with(
    sys: &PolySystem,
    slot_values: &[f64],
    point: &[Complex64],
) -> Result<Vec<f64>, PolyError> {
    if point.len() != sys.num_vars() {
        return Err(PolyError::PointDimension {
            got: point.len(),
            expected: sys.num_vars(),
        });
    }
    Ok(sys
        .polys
        .iter()
        .map(|p| {
            p.terms
                .iter()
                .map(|t| t.exponent.eval(point) * slot_values[t.slot])
                .sum::<Complex64>()
                .norm()
        })
        .collect())
}
