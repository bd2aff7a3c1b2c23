//! Search over hidden variables, polynomial subsets and displacements for the
//! smallest monomial basis whose resultant matrix is generically non-singular,
//! and assembly of the solver template for the winner.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use nalgebra::DMatrix;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::numeric::numeric_rank;
use crate::pencil::{self, ReductionSchedule};
use crate::poly::{hide_variable, Exponent, PolySystem, ProjectedSystem};
use crate::polytope::{lattice_points, minkowski_sum, newton_polytope, Displacement, PolytopeError};
use crate::template::{Placement, RecoveryPair, SolverTemplate, TemplateRow, FORMAT_VERSION};

pub const DEFAULT_SEED: u64 = 20_190_601;

/// Largest `m` for which all `2^m - 1` subsets are searched by default.
pub const MAX_EXHAUSTIVE_POLYS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub epsilon: Rational64,
    pub rank_tol: f64,
    pub rank_trials: usize,
    /// Trials for row-selection and schedule verification.
    pub verify_trials: usize,
    pub seed: u64,
    pub max_subset_size: Option<usize>,
    pub hidden: Option<usize>,
    pub inf_tol: f64,
    pub pivot_tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            epsilon: Rational64::new(1, 1000),
            rank_tol: 1e-8,
            rank_trials: 3,
            verify_trials: 3,
            seed: DEFAULT_SEED,
            max_subset_size: None,
            hidden: None,
            inf_tol: 1e-10,
            pivot_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error("system has a single variable; hiding it leaves nothing to solve for, use univariate root finding instead")]
    Univariate,
    #[error("hidden variable index {index} out of range for {n} variables")]
    HiddenOutOfRange { index: usize, n: usize },
    #[error("{m} polynomials give {} subsets; set a maximum subset size", (1u64 << .m) - 1)]
    TooManySubsets { m: usize },
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error("no viable basis among {} candidates", .diagnostics.len())]
    NoViableCandidate { diagnostics: Vec<(CandidateId, Rejection)> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CandidateId {
    /// Position in enumeration order; the final tie-break.
    pub index: usize,
    pub hidden: usize,
    pub subset: Vec<usize>,
    pub displacement: Displacement,
}

impl fmt::Display for CandidateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let subset: Vec<String> = self.subset.iter().map(|i| (i + 1).to_string()).collect();
        write!(
            f,
            "#{} hidden={} J={{{}}} delta={}",
            self.index,
            self.hidden,
            subset.join(","),
            self.displacement
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rejection {
    EmptyBasis,
    /// Polynomial `poly` has no admissible multiplier.
    NoMultiplier { poly: usize },
    TooFewRows { rows: usize, basis: usize },
    ZeroHiddenDegree,
    RankDeficient { rank: usize, basis: usize },
    RowSelection,
    NoRecovery { variable: usize },
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::EmptyBasis => write!(f, "empty basis"),
            Rejection::NoMultiplier { poly } => write!(f, "polynomial {} has no multiplier", poly + 1),
            Rejection::TooFewRows { rows, basis } => write!(f, "{rows} rows for {basis} columns"),
            Rejection::ZeroHiddenDegree => write!(f, "hidden variable does not appear in the selected rows"),
            Rejection::RankDeficient { rank, basis } => write!(f, "rank {rank} < {basis}"),
            Rejection::RowSelection => write!(f, "no full-rank square row subset found"),
            Rejection::NoRecovery { variable } => {
                write!(f, "no surviving column pair recovers variable {variable}")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct BasisCandidate {
    pub id: CandidateId,
    pub basis: Vec<Exponent>,
    /// Multiplier list for every polynomial, not only those in the subset.
    pub multipliers: Vec<Vec<Exponent>>,
}

impl BasisCandidate {
    pub fn rows(&self) -> Vec<TemplateRow> {
        self.multipliers
            .iter()
            .enumerate()
            .flat_map(|(poly, ts)| {
                ts.iter().map(move |t| TemplateRow {
                    poly,
                    multiplier: t.clone(),
                })
            })
            .collect()
    }

    pub fn row_count(&self) -> usize {
        self.multipliers.iter().map(Vec::len).sum()
    }

    /// Every polynomial contributes and there are at least as many rows as columns.
    pub fn check_counts(&self) -> Result<(), Rejection> {
        if self.basis.is_empty() {
            return Err(Rejection::EmptyBasis);
        }
        if let Some(poly) = self.multipliers.iter().position(Vec::is_empty) {
            return Err(Rejection::NoMultiplier { poly });
        }
        if self.row_count() < self.basis.len() {
            return Err(Rejection::TooFewRows {
                rows: self.row_count(),
                basis: self.basis.len(),
            });
        }
        Ok(())
    }
}

/// `{ t >= 0 : t + support ⊆ basis }`.
pub fn multiplier_set(support: &BTreeSet<Exponent>, basis: &BTreeSet<Exponent>) -> BTreeSet<Exponent> {
    let Some(anchor) = support.iter().next() else {
        return BTreeSet::new();
    };
    basis
        .iter()
        .map(|b| b.sub(anchor))
        .filter(|t| t.is_nonnegative() && support.iter().all(|s| basis.contains(&t.add(s))))
        .collect()
}

fn subsets(m: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1u64..1 << m)
        .map(|mask| (0..m).filter(|i| mask >> i & 1 == 1).collect::<Vec<_>>())
        .filter(|s| s.len() <= max_size)
        .collect();
    out.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    out
}

fn check_system(sys: &PolySystem, config: &SearchConfig) -> Result<Vec<usize>, GenerateError> {
    let n = sys.num_vars();
    if n < 2 {
        return Err(GenerateError::Univariate);
    }
    if sys.num_polys() > MAX_EXHAUSTIVE_POLYS && config.max_subset_size.is_none() {
        return Err(GenerateError::TooManySubsets { m: sys.num_polys() });
    }
    match config.hidden {
        Some(h) if h >= n => Err(GenerateError::HiddenOutOfRange { index: h, n }),
        Some(h) => Ok(vec![h]),
        None => Ok((0..n).rev().collect()),
    }
}

/// Every `(hidden, subset, displacement)` candidate in tie-break order, with
/// basis and multipliers filled in but no acceptance filtering.
///
/// Order: hidden variable from last to first, subsets by decreasing size then
/// lexicographically, displacements as in [`Displacement::all`].
pub fn enumerate_all(sys: &PolySystem, config: &SearchConfig) -> Result<Vec<BasisCandidate>, GenerateError> {
    let hiddens = check_system(sys, config)?;
    let m = sys.num_polys();
    let d = sys.num_vars() - 1;
    let subsets = subsets(m, config.max_subset_size.unwrap_or(m));
    let displacements = Displacement::all(d, config.epsilon)?;

    let mut out = Vec::new();
    for h in hiddens {
        let proj = hide_variable(sys, h).expect("hidden index checked");
        let supports: Vec<BTreeSet<Exponent>> = (0..m).map(|i| proj.support(i)).collect();
        let polytopes = supports
            .iter()
            .map(newton_polytope)
            .collect::<Result<Vec<_>, _>>()?;
        for subset in &subsets {
            let mut q = polytopes[subset[0]].clone();
            for &i in &subset[1..] {
                q = minkowski_sum(&q, &polytopes[i])?;
            }
            for delta in &displacements {
                let basis = lattice_points(&q, delta);
                let multipliers = supports
                    .iter()
                    .map(|s| multiplier_set(s, &basis).into_iter().collect())
                    .collect();
                out.push(BasisCandidate {
                    id: CandidateId {
                        index: out.len(),
                        hidden: h,
                        subset: subset.clone(),
                        displacement: delta.clone(),
                    },
                    basis: basis.into_iter().collect(),
                    multipliers,
                });
            }
        }
    }
    Ok(out)
}

/// Candidates passing the multiplier-count acceptance.
pub fn enumerate_candidates(sys: &PolySystem, config: &SearchConfig) -> Result<Vec<BasisCandidate>, GenerateError> {
    Ok(enumerate_all(sys, config)?
        .into_iter()
        .filter(|c| c.check_counts().is_ok())
        .collect())
}

/// Rows of `M'(x_h)` at numeric slot values and hidden value.
fn numeric_rows(
    proj: &ProjectedSystem,
    rows: &[TemplateRow],
    col_of: &HashMap<&Exponent, usize>,
    slots: &[f64],
    xh: f64,
) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), col_of.len());
    for (r, row) in rows.iter().enumerate() {
        for (base, terms) in &proj.polys[row.poly] {
            let c = col_of[&row.multiplier.add(base)];
            for t in terms {
                m[(r, c)] += slots[t.slot] * xh.powi(t.degree as i32);
            }
        }
    }
    m
}

fn random_instance<R: Rng + ?Sized>(rng: &mut R, num_slots: usize) -> (Vec<f64>, f64) {
    let slots = (0..num_slots).map(|_| rng.random_range(-1.0..1.0)).collect();
    (slots, rng.random_range(-1.0..1.0))
}

fn column_map(basis: &[Exponent]) -> HashMap<&Exponent, usize> {
    basis.iter().enumerate().map(|(i, e)| (e, i)).collect()
}

/// Rank of the stacked matrix at independent random instances; `Ok` iff it
/// equals `|B|` every time.
pub fn rank_test<R: Rng + ?Sized>(
    sys: &PolySystem,
    cand: &BasisCandidate,
    trials: usize,
    rank_tol: f64,
    rng: &mut R,
) -> Result<(), Rejection> {
    let proj = hide_variable(sys, cand.id.hidden).expect("candidate hidden index");
    let col_of = column_map(&cand.basis);
    let rows = cand.rows();
    for _ in 0..trials {
        let (slots, xh) = random_instance(rng, sys.slots().len());
        let rank = numeric_rank(&numeric_rows(&proj, &rows, &col_of, &slots, xh), rank_tol);
        if rank < cand.basis.len() {
            return Err(Rejection::RankDeficient {
                rank,
                basis: cand.basis.len(),
            });
        }
    }
    Ok(())
}

/// Greedy choice of `|B|` rows by largest residual against the rows already
/// kept, on samples drawn from `draw`; kept rows stay in enumeration order.
/// The square result must be full rank on `verify_trials` further samples.
pub fn select_rows_with<F>(
    sys: &PolySystem,
    cand: &BasisCandidate,
    rank_tol: f64,
    verify_trials: usize,
    mut draw: F,
) -> Result<Vec<TemplateRow>, Rejection>
where
    F: FnMut() -> (Vec<f64>, f64),
{
    let proj = hide_variable(sys, cand.id.hidden).expect("candidate hidden index");
    let col_of = column_map(&cand.basis);
    let rows = cand.rows();
    let b = cand.basis.len();
    for _attempt in 0..3 {
        let (slots, xh) = draw();
        let m = numeric_rows(&proj, &rows, &col_of, &slots, xh);
        let mut residual: Vec<_> = m.row_iter().map(|r| r.transpose()).collect();
        let scale = residual.iter().map(|r| r.norm()).fold(0.0, f64::max);
        let mut chosen = Vec::with_capacity(b);
        for _ in 0..b {
            let best = (0..rows.len())
                .filter(|i| !chosen.contains(i))
                .max_by(|&i, &j| residual[i].norm().total_cmp(&residual[j].norm()).then(j.cmp(&i)));
            let Some(p) = best else { break };
            let pn = residual[p].norm();
            if pn <= rank_tol * scale {
                break;
            }
            let q = &residual[p] / pn;
            for (i, r) in residual.iter_mut().enumerate() {
                if i != p && !chosen.contains(&i) {
                    let proj_len = q.dot(r);
                    r.axpy(-proj_len, &q, 1.0);
                }
            }
            chosen.push(p);
        }
        if chosen.len() < b {
            continue;
        }
        chosen.sort_unstable();
        let picked: Vec<TemplateRow> = chosen.iter().map(|&i| rows[i].clone()).collect();
        let ok = (0..verify_trials).all(|_| {
            let (slots, xh) = draw();
            numeric_rank(&numeric_rows(&proj, &picked, &col_of, &slots, xh), rank_tol) == b
        });
        if ok {
            return Ok(picked);
        }
    }
    Err(Rejection::RowSelection)
}

pub fn select_rows<R: Rng + ?Sized>(
    sys: &PolySystem,
    cand: &BasisCandidate,
    rank_tol: f64,
    verify_trials: usize,
    rng: &mut R,
) -> Result<Vec<TemplateRow>, Rejection> {
    let num_slots = sys.slots().len();
    select_rows_with(sys, cand, rank_tol, verify_trials, || random_instance(rng, num_slots))
}

/// Slot placement of the selected rows.
pub fn placement(proj: &ProjectedSystem, basis: &[Exponent], rows: &[TemplateRow]) -> Vec<Placement> {
    let col_of = column_map(basis);
    let mut out = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        for (base, terms) in &proj.polys[row.poly] {
            let col = col_of[&row.multiplier.add(base)];
            for t in terms {
                out.push(Placement {
                    row: r,
                    col,
                    degree: t.degree,
                    slot: t.slot,
                });
            }
        }
    }
    out.sort_by_key(|p| (p.row, p.col, p.degree));
    out
}

/// One unit-difference column pair per base variable among `kept_cols`.
///
/// Preference: both columns in the same block, then the denominator with the
/// lowest total degree, then the lowest column indices.
pub fn recovery_pairs(
    basis: &[Exponent],
    hidden: usize,
    num_vars: usize,
    kept_cols: &[usize],
) -> Result<Vec<RecoveryPair>, Rejection> {
    let b = basis.len();
    let label = |c: usize| (c / b, &basis[c % b]);
    (0..num_vars)
        .filter(|&v| v != hidden)
        .map(|variable| {
            let axis = if variable < hidden { variable } else { variable - 1 };
            let unit = Exponent::unit(num_vars - 1, axis);
            kept_cols
                .iter()
                .flat_map(|&den| kept_cols.iter().map(move |&num| (num, den)))
                .filter(|&(num, den)| label(num).1.sub(label(den).1) == unit)
                .min_by_key(|&(num, den)| {
                    let (bn, _) = label(num);
                    let (bd, md) = label(den);
                    (bn != bd, md.total_degree(), bd, den, num)
                })
                .map(|(num, den)| RecoveryPair {
                    variable,
                    numerator: num,
                    denominator: den,
                    hidden_shift: (num / b) as i32 - (den / b) as i32,
                })
                .ok_or(Rejection::NoRecovery { variable })
        })
        .collect()
}

/// Per-candidate generator derived from the search seed.
pub fn candidate_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs every gate after the multiplier count and assembles a template.
pub fn evaluate_candidate(
    sys: &PolySystem,
    cand: &BasisCandidate,
    config: &SearchConfig,
) -> Result<SolverTemplate, Rejection> {
    cand.check_counts()?;
    let mut rng = candidate_rng(config.seed, cand.id.index);
    let proj = hide_variable(sys, cand.id.hidden).expect("candidate hidden index");
    rank_test(sys, cand, config.rank_trials, config.rank_tol, &mut rng)?;
    let rows = select_rows(sys, cand, config.rank_tol, config.verify_trials, &mut rng)?;
    let placement = placement(&proj, &cand.basis, &rows);
    let hidden_degree = placement.iter().map(|p| p.degree).max().unwrap_or(0);
    if hidden_degree == 0 {
        return Err(Rejection::ZeroHiddenDegree);
    }

    let mut template = SolverTemplate {
        format_version: FORMAT_VERSION,
        system: sys.clone(),
        hidden: cand.id.hidden,
        subset: cand.id.subset.clone(),
        displacement: cand.id.displacement.clone(),
        seed: config.seed,
        basis: cand.basis.clone(),
        rows,
        hidden_degree,
        placement,
        pencil_size: cand.basis.len() * hidden_degree as usize,
        schedule: ReductionSchedule::empty(0),
        recovery: Vec::new(),
    };
    let pencil = pencil::linearize(
        &pencil::build_pep(&template).expect("placement is consistent by construction"),
        &template.basis,
    )
    .expect("hidden degree is positive");
    let schedule = pencil::reduce_schedule(&pencil);
    template.schedule = if pencil::verify_schedule(
        &pencil,
        &schedule,
        config.verify_trials,
        config.inf_tol,
        config.pivot_tol,
        &mut rng,
    ) {
        schedule
    } else {
        ReductionSchedule::empty(template.pencil_size)
    };
    template.recovery = recovery_pairs(
        &template.basis,
        template.hidden,
        sys.num_vars(),
        &template.schedule.kept_cols,
    )?;
    debug_assert!(template.validate().is_ok());
    Ok(template)
}

/// Outcome of a search: the winner plus every rejection seen on the way.
#[derive(Clone, Debug)]
pub struct SearchResult {
    pub template: SolverTemplate,
    pub candidate: CandidateId,
    pub enumerated: usize,
    pub rejections: Vec<(CandidateId, Rejection)>,
}

/// Smallest basis first; ties by reduced pencil size, hidden degree, then
/// enumeration order. Larger bases are only evaluated when every smaller one
/// fails.
pub fn generate(sys: &PolySystem, config: &SearchConfig) -> Result<SearchResult, GenerateError> {
    let all = enumerate_all(sys, config)?;
    let enumerated = all.len();
    let mut rejections = Vec::new();
    let mut viable = Vec::new();
    for c in all {
        match c.check_counts() {
            Ok(()) => viable.push(c),
            Err(r) => rejections.push((c.id, r)),
        }
    }
    viable.sort_by_key(|c| (c.basis.len(), c.id.index));

    let mut start = 0;
    while start < viable.len() {
        let size = viable[start].basis.len();
        let end = viable[start..]
            .iter()
            .position(|c| c.basis.len() != size)
            .map_or(viable.len(), |p| start + p);
        let group = &viable[start..end];
        let outcomes: Vec<Result<SolverTemplate, Rejection>> =
            group.par_iter().map(|c| evaluate_candidate(sys, c, config)).collect();
        let mut best: Option<(usize, SolverTemplate)> = None;
        for (i, out) in outcomes.into_iter().enumerate() {
            match out {
                Ok(t) => {
                    let key = |t: &SolverTemplate, i: usize| (t.reduced_size(), t.hidden_degree, group[i].id.index);
                    if best.as_ref().is_none_or(|(j, b)| key(&t, i) < key(b, *j)) {
                        best = Some((i, t));
                    }
                }
                Err(r) => rejections.push((group[i].id.clone(), r)),
            }
        }
        if let Some((i, template)) = best {
            rejections.sort_by_key(|(id, _)| id.index);
            return Ok(SearchResult {
                template,
                candidate: group[i].id.clone(),
                enumerated,
                rejections,
            });
        }
        start = end;
    }
    rejections.sort_by_key(|(id, _)| id.index);
    Err(GenerateError::NoViableCandidate { diagnostics: rejections })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_system;

    fn e(v: &[i32]) -> Exponent {
        Exponent(v.to_vec())
    }

    fn set(items: &[&[i32]]) -> BTreeSet<Exponent> {
        items.iter().map(|v| e(v)).collect()
    }

    fn sys_a() -> PolySystem {
        parse_system("vars: x y; f1: c1*x^2 + c2*y^2 + c3; f2: c4*x*y + c5").unwrap()
    }

    fn sys_b() -> PolySystem {
        parse_system("vars: x y; f1: a1*x + a2*y + a3; f2: b1*x*y + b2").unwrap()
    }

    #[test]
    fn multiplier_sets_for_sys_a_basis() {
        let basis = set(&[&[1], &[2], &[3]]);
        assert_eq!(multiplier_set(&set(&[&[0], &[2]]), &basis), set(&[&[1]]));
        assert_eq!(multiplier_set(&set(&[&[0], &[1]]), &basis), set(&[&[1], &[2]]));
        assert_eq!(multiplier_set(&basis, &basis), set(&[&[0]]));
        assert!(multiplier_set(&set(&[&[0], &[5]]), &basis).is_empty());
    }

    #[test]
    fn multiplier_set_oracle_2d() {
        let basis = set(&[&[0, 0], &[1, 0], &[0, 1], &[1, 1], &[2, 0], &[2, 1]]);
        let support = set(&[&[0, 0], &[1, 0]]);
        let got = multiplier_set(&support, &basis);
        // brute force over the bounding box
        let mut want = BTreeSet::new();
        for a in 0..3 {
            for b in 0..2 {
                let t = e(&[a, b]);
                if support.iter().all(|s| basis.contains(&t.add(s))) {
                    want.insert(t);
                }
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn sys_a_enumeration_counts() {
        let all = enumerate_all(&sys_a(), &SearchConfig::default()).unwrap();
        assert_eq!(all.len(), 18);
        let first = &all[0];
        assert_eq!(first.id.hidden, 1);
        assert_eq!(first.id.subset, vec![0, 1]);
        assert_eq!(first.basis, vec![e(&[1]), e(&[2]), e(&[3])]);
        assert_eq!(first.row_count(), 3);
        assert!(first.check_counts().is_ok());

        // J = {f2}, +e: B = {1}, f1 cannot fit
        let c = all
            .iter()
            .find(|c| c.id.hidden == 1 && c.id.subset == [1] && c.id.displacement.signs() == [1])
            .unwrap();
        assert_eq!(c.basis, vec![e(&[1])]);
        assert_eq!(c.check_counts(), Err(Rejection::NoMultiplier { poly: 0 }));
    }

    #[test]
    fn sys_a_template() {
        let res = generate(&sys_a(), &SearchConfig::default()).unwrap();
        let t = &res.template;
        assert_eq!(t.hidden_name(), "y");
        assert_eq!(t.basis_size(), 3);
        assert_eq!(t.hidden_degree, 2);
        assert_eq!(t.pencil_size, 6);
        assert_eq!(t.reduced_size(), 4);
        let rows: Vec<(usize, Exponent)> = t.rows.iter().map(|r| (r.poly, r.multiplier.clone())).collect();
        assert_eq!(rows, vec![(0, e(&[1])), (1, e(&[1])), (1, e(&[2]))]);
        assert_eq!(t.schedule.eliminations(), 2);
        assert_eq!(t.schedule.removals(), 2);
        assert_eq!(
            t.recovery,
            vec![RecoveryPair { variable: 0, numerator: 1, denominator: 0, hidden_shift: 0 }]
        );
        assert!(t.validate().is_ok());
    }

    #[test]
    fn sys_b_template() {
        let t = generate(&sys_b(), &SearchConfig::default()).unwrap().template;
        assert_eq!(t.hidden_name(), "y");
        assert_eq!(t.basis, vec![e(&[1]), e(&[2])]);
        assert_eq!(t.hidden_degree, 1);
        assert_eq!(t.pencil_size, 2);
        assert!(t.schedule.ops.is_empty());
    }

    #[test]
    fn duplicated_rows_fail_rank_test() {
        let sys = sys_b();
        let cand = BasisCandidate {
            id: CandidateId {
                index: 0,
                hidden: 1,
                subset: vec![0, 1],
                displacement: Displacement::zero(1, Rational64::new(1, 1000)).unwrap(),
            },
            basis: vec![e(&[1]), e(&[2]), e(&[3])],
            multipliers: vec![vec![e(&[1]), e(&[1])], vec![e(&[2])]],
        };
        assert!(cand.check_counts().is_ok());
        let mut rng = candidate_rng(1, 0);
        assert_eq!(
            rank_test(&sys, &cand, 3, 1e-8, &mut rng),
            Err(Rejection::RankDeficient { rank: 2, basis: 3 })
        );
        assert_eq!(
            evaluate_candidate(&sys, &cand, &SearchConfig::default()).unwrap_err(),
            Rejection::RankDeficient { rank: 2, basis: 3 }
        );
    }

    #[test]
    fn redundant_row_is_excluded() {
        // f3 is f1 with every coefficient doubled
        let sys = parse_system("vars: x y; f1: a1*x + a2*y + a3; f2: b1*x*y + b2; f3: d1*x + d2*y + d3").unwrap();
        let cand = BasisCandidate {
            id: CandidateId {
                index: 0,
                hidden: 1,
                subset: vec![0, 1],
                displacement: Displacement::zero(1, Rational64::new(1, 1000)).unwrap(),
            },
            basis: vec![e(&[1]), e(&[2])],
            multipliers: vec![vec![e(&[1])], vec![e(&[1])], vec![e(&[1])]],
        };
        let mut rng = candidate_rng(5, 0);
        let rows = select_rows_with(&sys, &cand, 1e-8, 3, || {
            let (mut s, x) = random_instance(&mut rng, 8);
            for i in 0..3 {
                s[5 + i] = 2.0 * s[i];
            }
            (s, x)
        })
        .unwrap();
        assert_eq!(rows.len(), 2);
        let polys: BTreeSet<usize> = rows.iter().map(|r| r.poly).collect();
        assert!(polys.contains(&1));
        assert_eq!(polys.len(), 2);
    }

    #[test]
    fn forced_hidden_and_guards() {
        let cfg = SearchConfig { hidden: Some(0), ..SearchConfig::default() };
        let t = generate(&sys_b(), &cfg).unwrap().template;
        assert_eq!(t.hidden_name(), "x");
        let cfg = SearchConfig { hidden: Some(2), ..SearchConfig::default() };
        assert!(matches!(generate(&sys_b(), &cfg), Err(GenerateError::HiddenOutOfRange { .. })));
        let uni = parse_system("vars: x; f: c1*x^2 + c2").unwrap();
        assert_eq!(generate(&uni, &SearchConfig::default()).unwrap_err(), GenerateError::Univariate);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SearchConfig::default();
        let a = generate(&sys_a(), &cfg).unwrap().template.to_json();
        let b = generate(&sys_a(), &cfg).unwrap().template.to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn subset_order() {
        assert_eq!(subsets(3, 3), vec![
            vec![0, 1, 2],
            vec![0, 1],
            vec![0, 2],
            vec![1, 2],
            vec![0],
            vec![1],
            vec![2],
        ]);
        assert_eq!(subsets(3, 1).len(), 3);
    }
}
