//! Worked systems, planted-root instance generation and stability runs.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::poly::{evaluate_with, parse_system, Exponent, PolyError, PolySpec, PolySystem};
use crate::runtime::{self, CoefficientInstance, SolveOptions};
use crate::template::SolverTemplate;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("unknown built-in problem `{0}` (expected SYS-A, SYS-B or SYS-C)")]
    UnknownBuiltin(String),
    #[error("polynomial {poly} has {monomials} monomials; planting {roots} roots needs more")]
    TooFewMonomials {
        poly: usize,
        monomials: usize,
        roots: usize,
    },
    #[error("could not place {roots} roots with separation {separation}")]
    Separation { roots: usize, separation: f64 },
    #[error("could not draw a valid support after {0} attempts")]
    Support(usize),
    #[error("planted roots do not annihilate the coefficients (residual {0:e})")]
    Construction(f64),
    #[error("gap must be positive, got {0}")]
    BadGap(f64),
    #[error("invalid planted spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Clone, Debug)]
pub struct Builtin {
    pub name: &'static str,
    pub text: &'static str,
    pub system: PolySystem,
    pub instance: CoefficientInstance,
    pub roots: Vec<Vec<f64>>,
}

pub const BUILTIN_NAMES: [&str; 3] = ["SYS-A", "SYS-B", "SYS-C"];

const SYS_A: &str = "vars: x y\npoly f1: c1*x^2 + c2*y^2 + c3\npoly f2: c4*x*y + c5\n";
const SYS_B: &str = "vars: x y\npoly f1: a1*x + a2*y + a3\npoly f2: b1*x*y + b2\n";
const SYS_C: &str =
    "vars: x y\npoly f1: a1*x + a2*y + a3\npoly f2: b1*x*y + b2\npoly f3: c1*x^2 + c2*y^2 + c3\n";

/// `x²+y²-5, xy-2`; `x+y-3, xy-2`; and the latter with `x²+y²-5` appended.
pub fn builtin(name: &str) -> Result<Builtin, ProblemError> {
    let (name, text, values, roots): (_, _, &[f64], Vec<Vec<f64>>) = match name.to_ascii_uppercase().as_str() {
        "SYS-A" => (
            "SYS-A",
            SYS_A,
            &[1.0, 1.0, -5.0, 1.0, -2.0],
            vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![-1.0, -2.0], vec![-2.0, -1.0]],
        ),
        "SYS-B" => ("SYS-B", SYS_B, &[1.0, 1.0, -3.0, 1.0, -2.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]),
        "SYS-C" => (
            "SYS-C",
            SYS_C,
            &[1.0, 1.0, -3.0, 1.0, -2.0, 1.0, 1.0, -5.0],
            vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        ),
        _ => return Err(ProblemError::UnknownBuiltin(name.into())),
    };
    let system = parse_system(text)?;
    let instance = CoefficientInstance::from_values(&system, values);
    Ok(Builtin {
        name,
        text,
        system,
        instance,
        roots,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum RootPlan {
    /// `count` roots uniform in `[-1, 1]^n`.
    Random { count: usize },
    Fixed(Vec<Vec<f64>>),
}

impl RootPlan {
    pub fn count(&self) -> usize {
        match self {
            RootPlan::Random { count } => *count,
            RootPlan::Fixed(r) => r.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedSpec {
    pub n: usize,
    pub m: usize,
    /// Total degree bound of every polynomial.
    pub degree: u32,
    /// Probability of keeping each non-constant monomial of degree `<= degree`.
    /// Draws where some polynomial misses a variable are rejected.
    pub density: f64,
    pub roots: RootPlan,
    /// Minimum pairwise distance between random roots.
    pub separation: f64,
}

impl PlantedSpec {
    /// All monomials up to `degree` in every polynomial.
    pub fn dense(n: usize, m: usize, degree: u32, roots: usize) -> Self {
        PlantedSpec {
            n,
            m,
            degree,
            density: 1.0,
            roots: RootPlan::Random { count: roots },
            separation: 0.3,
        }
    }

    fn check(&self) -> Result<(), ProblemError> {
        if self.n == 0 || self.m < self.n {
            return Err(ProblemError::Spec(format!("need m >= n >= 1, got n={}, m={}", self.n, self.m)));
        }
        if self.degree == 0 || !(0.0..=1.0).contains(&self.density) {
            return Err(ProblemError::Spec("degree must be positive and density in [0, 1]".into()));
        }
        if let RootPlan::Fixed(roots) = &self.roots {
            if roots.iter().any(|r| r.len() != self.n) {
                return Err(ProblemError::Spec("root dimension differs from n".into()));
            }
        }
        Ok(())
    }
}

/// A generated system with the roots it was built around.
#[derive(Clone, Debug)]
pub struct PlantedProblem {
    pub system: PolySystem,
    pub instance: CoefficientInstance,
    pub roots: Vec<Vec<f64>>,
}

fn variable_names(n: usize) -> Vec<String> {
    if n <= 3 {
        ["x", "y", "z"][..n].iter().map(|s| s.to_string()).collect()
    } else {
        (1..=n).map(|i| format!("x{i}")).collect()
    }
}

/// Exponents of total degree `<= degree` in `n` variables, graded order.
fn monomials_up_to(n: usize, degree: u32) -> Vec<Exponent> {
    let mut out = vec![Exponent::zeros(n)];
    for _ in 0..degree {
        let mut next = out.clone();
        for e in &out {
            for i in 0..n {
                let mut f = e.clone();
                f.0[i] += 1;
                next.push(f);
            }
        }
        next.sort();
        next.dedup();
        out = next;
    }
    out.sort_by_key(|e| (e.total_degree(), std::cmp::Reverse(e.clone())));
    out
}

fn random_supports<R: Rng + ?Sized>(spec: &PlantedSpec, rng: &mut R) -> Result<Vec<Vec<Exponent>>, ProblemError> {
    let all = monomials_up_to(spec.n, spec.degree);
    let roots = spec.roots.count();
    if all.len() <= roots {
        return Err(ProblemError::TooFewMonomials {
            poly: 1,
            monomials: all.len(),
            roots,
        });
    }
    const ATTEMPTS: usize = 200;
    for _ in 0..ATTEMPTS {
        let supports: Vec<Vec<Exponent>> = (0..spec.m)
            .map(|_| {
                let mut s = vec![all[0].clone()];
                s.extend(all[1..].iter().filter(|_| rng.random_bool(spec.density)).cloned());
                s
            })
            .collect();
        let enough = supports.iter().all(|s| s.len() > roots);
        // Polynomials sharing a support draw from the same null space, which
        // must be wide enough for them to stay independent.
        let roomy = supports
            .iter()
            .all(|s| supports.iter().filter(|t| *t == s).count() <= s.len().saturating_sub(roots));
        let every_var = supports
            .iter()
            .all(|s| (0..spec.n).all(|v| s.iter().any(|e| e.0[v] > 0)));
        let nonconstant = supports.iter().all(|s| s.len() > 1);
        if enough && roomy && every_var && nonconstant && !has_torus_symmetry(spec.n, &supports) {
            return Ok(supports);
        }
    }
    Err(ProblemError::Support(ATTEMPTS))
}

/// True when the exponent differences within each polynomial span a proper
/// sublattice of `Z^n`. Such systems are invariant under a root-of-unity
/// scaling of the variables, so roots come in orbits sharing eigenvalues.
fn has_torus_symmetry(n: usize, supports: &[Vec<Exponent>]) -> bool {
    let diffs: Vec<Vec<i64>> = supports
        .iter()
        .flat_map(|s| s[1..].iter().map(move |e| e.sub(&s[0]).0.iter().map(|&x| x as i64).collect()))
        .collect();
    crate::exact::lattice_index(&diffs, n) != Some(1)
}

fn system_from_supports(n: usize, supports: &[Vec<Exponent>]) -> Result<PolySystem, ProblemError> {
    let polys: Vec<PolySpec> = supports
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let terms = s
                .iter()
                .enumerate()
                .map(|(k, e)| (format!("c{}_{}", i + 1, k + 1), e.clone()))
                .collect();
            (format!("f{}", i + 1), terms)
        })
        .collect();
    Ok(PolySystem::new(variable_names(n), polys)?)
}

/// Roots uniform in `[-1, 1]^n` with pairwise distance at least `separation`.
pub fn random_roots<R: Rng + ?Sized>(
    n: usize,
    count: usize,
    separation: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>, ProblemError> {
    const ATTEMPTS: usize = 10_000;
    let mut roots: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut tries = 0;
    while roots.len() < count {
        tries += 1;
        if tries > ATTEMPTS {
            return Err(ProblemError::Separation { roots: count, separation });
        }
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if roots.iter().all(|q| distance(q, &r) >= separation) {
            roots.push(r);
        }
    }
    Ok(roots)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Random coefficients for `sys` that vanish at every root: a random vector
/// projected onto the null space of the root/monomial evaluation matrix,
/// scaled to unit max-norm per polynomial.
pub fn plant_coefficients<R: Rng + ?Sized>(
    sys: &PolySystem,
    roots: &[Vec<f64>],
    rng: &mut R,
) -> Result<CoefficientInstance, ProblemError> {
    let mut values = vec![0.0; sys.slots().len()];
    for (i, p) in sys.polys().iter().enumerate() {
        let t = p.terms.len();
        if t <= roots.len() {
            return Err(ProblemError::TooFewMonomials {
                poly: i + 1,
                monomials: t,
                roots: roots.len(),
            });
        }
        let v = DMatrix::from_fn(roots.len(), t, |r, k| p.terms[k].exponent.eval_real(&roots[r]));
        let z = DVector::from_fn(t, |_, _| rng.random_range(-1.0..1.0));
        let c = if roots.is_empty() {
            z
        } else {
            let w = v
                .clone()
                .svd(true, true)
                .solve(&(&v * &z), 1e-14)
                .map_err(|e| ProblemError::Spec(e.to_string()))?;
            z - w
        };
        let scale = c.amax();
        if scale == 0.0 {
            return Err(ProblemError::Construction(0.0));
        }
        for (k, term) in p.terms.iter().enumerate() {
            values[term.slot] = c[k] / scale;
        }
    }
    let worst = max_root_residual(sys, &values, roots)?;
    if worst > 1e-12 {
        return Err(ProblemError::Construction(worst));
    }
    Ok(CoefficientInstance::from_values(sys, &values))
}

fn max_root_residual(sys: &PolySystem, values: &[f64], roots: &[Vec<f64>]) -> Result<f64, ProblemError> {
    let mut worst: f64 = 0.0;
    for r in roots {
        let point: Vec<Complex64> = r.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for res in evaluate_with(sys, values, &point)? {
            worst = worst.max(res);
        }
    }
    Ok(worst)
}

fn planted_roots<R: Rng + ?Sized>(spec: &PlantedSpec, rng: &mut R) -> Result<Vec<Vec<f64>>, ProblemError> {
    match &spec.roots {
        RootPlan::Fixed(r) => Ok(r.clone()),
        RootPlan::Random { count } => random_roots(spec.n, *count, spec.separation, rng),
    }
}

pub fn generate_planted(spec: &PlantedSpec, seed: u64) -> Result<PlantedProblem, ProblemError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let supports = random_supports(spec, &mut rng)?;
    let system = system_from_supports(spec.n, &supports)?;
    let roots = planted_roots(spec, &mut rng)?;
    let instance = plant_coefficients(&system, &roots, &mut rng)?;
    Ok(PlantedProblem {
        system,
        instance,
        roots,
    })
}

/// Moves the second root to distance `gap` from the first along a random
/// direction.
pub fn near_coincident<R: Rng + ?Sized>(roots: &mut [Vec<f64>], gap: f64, rng: &mut R) -> Result<(), ProblemError> {
    if !(gap > 0.0) {
        return Err(ProblemError::BadGap(gap));
    }
    if roots.len() < 2 {
        return Err(ProblemError::Spec("near-coincident roots need at least two roots".into()));
    }
    let n = roots[0].len();
    let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    roots[1] = roots[0].iter().zip(&dir).map(|(r, d)| r + gap * d / norm).collect();
    Ok(())
}

/// As [`generate_planted`], with the first two roots `gap` apart.
pub fn generate_near_degenerate(spec: &PlantedSpec, seed: u64, gap: f64) -> Result<PlantedProblem, ProblemError> {
    spec.check()?;
    if !(gap > 0.0) {
        return Err(ProblemError::BadGap(gap));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let supports = random_supports(spec, &mut rng)?;
    let system = system_from_supports(spec.n, &supports)?;
    let mut roots = planted_roots(spec, &mut rng)?;
    near_coincident(&mut roots, gap, &mut rng)?;
    let instance = plant_coefficients(&system, &roots, &mut rng)?;
    Ok(PlantedProblem {
        system,
        instance,
        roots,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilityMode {
    Random,
    NearDegenerate,
}

impl std::str::FromStr for StabilityMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(StabilityMode::Random),
            "near_degenerate" | "near-degenerate" => Ok(StabilityMode::NearDegenerate),
            other => Err(format!("unknown mode `{other}` (expected random or near_degenerate)")),
        }
    }
}

impl std::fmt::Display for StabilityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StabilityMode::Random => "random",
            StabilityMode::NearDegenerate => "near_degenerate",
        })
    }
}

#[derive(Clone, Debug)]
pub struct StabilityConfig {
    pub trials: usize,
    pub mode: StabilityMode,
    pub gap: f64,
    pub seed: u64,
    /// Planted roots per trial; defaults to [`root_capacity`].
    pub roots: Option<usize>,
    pub separation: f64,
    /// A planted root without a valid solution this close counts as a failure.
    pub failure_threshold: f64,
    pub options: SolveOptions,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            trials: 100,
            mode: StabilityMode::Random,
            gap: 1e-2,
            seed: crate::basis_search::DEFAULT_SEED,
            roots: None,
            separation: 0.3,
            failure_threshold: 1e-4,
            options: SolveOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    /// `log10` of the worst closest-solution error over planted roots.
    pub log10_error: f64,
    /// `log10` of the largest relative residual among the matched solutions.
    pub log10_residual: f64,
    pub solutions: usize,
    pub failed: bool,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub mode: StabilityMode,
    pub trials: Vec<TrialRecord>,
    pub failures: usize,
    /// 10th, 50th and 90th percentile of `log10_error` over all trials.
    pub quantiles: [f64; 3],
    /// Counts per unit-width `log10_error` bin, starting at [`HIST_LO`].
    pub histogram: Vec<usize>,
    pub mean_solve_seconds: f64,
}

pub const HIST_LO: i32 = -17;
pub const HIST_HI: i32 = 1;

impl StabilityReport {
    pub fn successes(&self) -> usize {
        self.trials.len() - self.failures
    }

    pub fn median(&self) -> f64 {
        self.quantiles[1]
    }

    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.trials.len().max(1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,log10_error,log10_residual,solutions,failed,solve_seconds\n");
        for t in &self.trials {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6e}",
                t.trial, t.log10_error, t.log10_residual, t.solutions, t.failed, t.seconds
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "mode={} trials={} failures={} q10={:.3} median={:.3} q90={:.3} mean_solve_ms={:.3}\n",
            self.mode,
            self.trials.len(),
            self.failures,
            self.quantiles[0],
            self.quantiles[1],
            self.quantiles[2],
            self.mean_solve_seconds * 1e3
        )
    }

    /// Two columns, bin centre and count, for plotting.
    pub fn histogram_data(&self) -> String {
        let mut out = String::from("# log10_error count\n");
        for (i, c) in self.histogram.iter().enumerate() {
            let _ = writeln!(out, "{} {c}", HIST_LO as f64 + i as f64 + 0.5);
        }
        out
    }
}

/// Nearest-rank quantile of an ascending list.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Closest valid solution to `root` in max-norm, with its residual.
pub fn closest_error(solutions: &[runtime::Solution], root: &[f64]) -> Option<(f64, f64)> {
    solutions
        .iter()
        .filter(|s| s.is_valid())
        .map(|s| {
            let err = s
                .point
                .iter()
                .zip(root)
                .map(|(z, r)| (z - Complex64::new(*r, 0.0)).norm())
                .fold(0.0, f64::max);
            (err, s.max_residual())
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

fn run_trial(template: &SolverTemplate, config: &StabilityConfig, roots: usize, trial: usize) -> TrialRecord {
    let mut rng = crate::basis_search::candidate_rng(config.seed, trial);
    let sys = &template.system;
    let failed = |seconds| TrialRecord {
        trial,
        log10_error: f64::INFINITY,
        log10_residual: f64::INFINITY,
        solutions: 0,
        failed: true,
        seconds,
    };
    let planted = random_roots(sys.num_vars(), roots, config.separation, &mut rng).and_then(|mut r| {
        if config.mode == StabilityMode::NearDegenerate {
            near_coincident(&mut r, config.gap, &mut rng)?;
        }
        let inst = plant_coefficients(sys, &r, &mut rng)?;
        Ok((r, inst))
    });
    let Ok((planted, inst)) = planted else {
        return failed(0.0);
    };
    let start = Instant::now();
    let solved = runtime::solve(template, &inst, &config.options);
    let seconds = start.elapsed().as_secs_f64();
    let Ok(solutions) = solved else {
        return failed(seconds);
    };
    let mut worst_err: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for root in &planted {
        match closest_error(&solutions, root) {
            Some((e, r)) => {
                worst_err = worst_err.max(e);
                worst_res = worst_res.max(r);
            }
            None => {
                worst_err = f64::INFINITY;
                worst_res = f64::INFINITY;
            }
        }
    }
    TrialRecord {
        trial,
        log10_error: worst_err.max(1e-300).log10(),
        log10_residual: worst_res.max(1e-300).log10(),
        solutions: solutions.len(),
        failed: !(worst_err <= config.failure_threshold),
        seconds,
    }
}

/// Most roots that can be planted on `sys` while polynomials sharing a
/// support keep independent coefficient vectors.
pub fn root_capacity(sys: &PolySystem) -> usize {
    let supports: Vec<BTreeSet<Exponent>> = sys.polys().iter().map(|p| p.support()).collect();
    supports
        .iter()
        .map(|s| s.len().saturating_sub(supports.iter().filter(|t| *t == s).count()))
        .min()
        .unwrap_or(0)
}

/// Plants fresh roots on the template's system every trial, solves, and
/// aggregates closest-solution errors. Trial `i` draws from a generator
/// seeded by `(seed, i)`, so results do not depend on scheduling.
pub fn run_stability(template: &SolverTemplate, config: &StabilityConfig) -> Result<StabilityReport, ProblemError> {
    if config.trials == 0 {
        return Err(ProblemError::Spec("trials must be at least 1".into()));
    }
    let capacity = root_capacity(&template.system);
    let roots = config.roots.unwrap_or(capacity).max(1);
    if config.mode == StabilityMode::NearDegenerate && roots < 2 {
        return Err(ProblemError::Spec(format!(
            "near-degenerate mode needs at least two planted roots, this system's supports admit {capacity}"
        )));
    }
    if roots > capacity {
        let min_terms = template.system.polys().iter().map(|p| p.terms.len()).min().unwrap_or(0);
        return Err(ProblemError::TooFewMonomials {
            poly: 0,
            monomials: min_terms,
            roots,
        });
    }
    let trials: Vec<TrialRecord> = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(template, config, roots, i))
        .collect();

    let mut errors: Vec<f64> = trials.iter().map(|t| t.log10_error).collect();
    errors.sort_by(f64::total_cmp);
    let quantiles = [quantile(&errors, 0.1), quantile(&errors, 0.5), quantile(&errors, 0.9)];
    let mut histogram = vec![0; (HIST_HI - HIST_LO) as usize];
    for e in errors.iter().filter(|e| e.is_finite()) {
        let bin = (e.floor() as i32).clamp(HIST_LO, HIST_HI - 1) - HIST_LO;
        histogram[bin as usize] += 1;
    }
    let failures = trials.iter().filter(|t| t.failed).count();
    let mean_solve_seconds = trials.iter().map(|t| t.seconds).sum::<f64>() / trials.len() as f64;
    Ok(StabilityReport {
        mode: config.mode,
        trials,
        failures,
        quantiles,
        histogram,
        mean_solve_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::evaluate;

    #[test]
    fn builtins_vanish_at_their_roots() {
        for name in BUILTIN_NAMES {
            let b = builtin(name).unwrap();
            for r in &b.roots {
                let p: Vec<Complex64> = r.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                let res = evaluate(&b.system, &b.instance, &p).unwrap();
                assert!(res.iter().all(|&v| v == 0.0), "{name} {r:?} {res:?}");
            }
        }
        assert_eq!(builtin("sys-c").unwrap().system.num_polys(), 3);
        assert!(matches!(builtin("SYS-D"), Err(ProblemError::UnknownBuiltin(_))));
    }

    #[test]
    fn monomial_enumeration() {
        assert_eq!(monomials_up_to(2, 2).len(), 6);
        assert_eq!(monomials_up_to(3, 2).len(), 10);
        assert_eq!(monomials_up_to(3, 3).len(), 20);
        assert_eq!(monomials_up_to(2, 1)[0], Exponent(vec![0, 0]));
    }

    #[test]
    fn planted_dense_quadratic() {
        let spec = PlantedSpec {
            roots: RootPlan::Fixed(vec![vec![1.0, 2.0], vec![2.0, 1.0]]),
            ..PlantedSpec::dense(2, 2, 2, 2)
        };
        let p = generate_planted(&spec, 1).unwrap();
        assert_eq!(p.system.slots().len(), 12);
        let values = p.instance.slot_values(&p.system).unwrap();
        assert!(max_root_residual(&p.system, &values, &p.roots).unwrap() < 1e-12);

        let over = generate_planted(&PlantedSpec { m: 3, ..spec.clone() }, 1).unwrap();
        assert_eq!(over.system.num_polys(), 3);
    }

    #[test]
    fn too_few_monomials() {
        // two monomials per polynomial cannot vanish at two generic roots
        let spec = PlantedSpec::dense(1, 1, 1, 2);
        assert!(matches!(generate_planted(&spec, 0), Err(ProblemError::TooFewMonomials { .. })));
    }

    #[test]
    fn near_degenerate_gap() {
        let spec = PlantedSpec::dense(2, 2, 2, 2);
        let p = generate_near_degenerate(&spec, 3, 1e-2).unwrap();
        assert!((distance(&p.roots[0], &p.roots[1]) - 1e-2).abs() < 1e-12);
        assert!(matches!(generate_near_degenerate(&spec, 3, 0.0), Err(ProblemError::BadGap(_))));
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let spec = PlantedSpec { density: 0.6, ..PlantedSpec::dense(3, 4, 2, 2) };
        let a = generate_planted(&spec, 11).unwrap();
        let b = generate_planted(&spec, 11).unwrap();
        assert_eq!(a.system, b.system);
        assert_eq!(a.instance, b.instance);
        assert_eq!(a.roots, b.roots);
    }

    #[test]
    fn symmetric_supports_are_detected() {
        let e = |v: &[i32]| Exponent(v.to_vec());
        let even_x = vec![vec![e(&[0, 0]), e(&[2, 0]), e(&[0, 1])], vec![e(&[0, 0]), e(&[2, 1])]];
        assert!(has_torus_symmetry(2, &even_x));
        let generic = vec![vec![e(&[0, 0]), e(&[1, 0]), e(&[0, 1])], vec![e(&[0, 0]), e(&[1, 1])]];
        assert!(!has_torus_symmetry(2, &generic));
    }

    #[test]
    fn quantiles_are_nearest_rank() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(quantile(&v, 0.1), 1.0);
        assert_eq!(quantile(&v, 0.5), 5.0);
        assert_eq!(quantile(&v, 0.9), 9.0);
        assert_eq!(quantile(&[3.0], 0.9), 3.0);
    }
}
