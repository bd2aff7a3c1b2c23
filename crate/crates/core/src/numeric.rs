//! Dense numerical kernels.
//!
//! Generalized eigenproblems go through a QZ (generalized Schur) solver, so
//! `B` may be singular; infinite eigenvalues are reported from the `(α, β)`
//! pair instead of being divided out.

use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::linalg::evd::ComputeEigenvectors;
use faer::linalg::gevd::{gevd_real, gevd_scratch, GevdParams};
use faer::diag::Diag;
use faer::{Mat, Par, Spec};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("generalized eigensolver did not converge on a {size}x{size} pencil")]
    NoConvergence { size: usize },
    #[error("eigensolver did not converge on a {size}x{size} companion matrix")]
    RootsNoConvergence { size: usize },
    #[error("pencil matrices must be square and equal-sized, got {a:?} and {b:?}")]
    Shape { a: (usize, usize), b: (usize, usize) },
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("leading polynomial coefficient is zero")]
    ZeroLeading,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Eigenvalue {
    Finite(Complex64),
    Infinite,
    /// `α ≈ β ≈ 0`: the pencil is (numerically) singular at this pair.
    Indeterminate,
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub value: Eigenvalue,
    pub vector: DVector<Complex64>,
}

impl EigenPair {
    pub fn finite(&self) -> Option<Complex64> {
        match self.value {
            Eigenvalue::Finite(v) => Some(v),
            _ => None,
        }
    }
}

fn check_pencil(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(), NumericError> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(NumericError::Shape {
            a: a.shape(),
            b: b.shape(),
        });
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(NumericError::NonFinite);
    }
    Ok(())
}

/// Relative singular-value threshold below which `A` or `B` is treated as
/// rank deficient during deflation.
pub const DEFLATION_TOL: f64 = 1e-12;

/// Solves `A v = λ B v`. A pair is infinite when `|β| <= inf_tol·|α|`.
///
/// Before QZ, numerical null spaces of `B` (infinite eigenvalues) and `A`
/// (zero eigenvalues) are split off by a staircase of orthogonal
/// transformations, repeated until neither trailing block loses rank. Each
/// level is a rank decision at [`DEFLATION_TOL`], so a defective infinite or
/// zero eigenvalue comes out exact rather than as a cluster of spurious large
/// or small finite values.
pub fn gep_solve(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    inf_tol: f64,
) -> Result<Vec<EigenPair>, NumericError> {
    check_pencil(a, b)?;
    let k = a.nrows();
    if k == 0 {
        return Ok(Vec::new());
    }
    let tiny = 100.0 * k as f64 * f64::EPSILON;
    let norm_a = a.norm();
    let norm_b = b.norm();
    let classify = |alpha: Complex64, beta: Complex64| {
        if alpha.norm() <= tiny * norm_a && beta.norm() <= tiny * norm_b {
            Eigenvalue::Indeterminate
        } else if beta.norm() <= inf_tol * alpha.norm() {
            Eigenvalue::Infinite
        } else {
            Eigenvalue::Finite(alpha / beta)
        }
    };

    let mut st = Staircase::new(a, b);
    st.run(norm_a, norm_b);
    let s = st.split;
    let (wa, wb) = (&st.a, &st.b);

    // Upper-triangular back-substitution over the deflated leading block.
    let lift = |alpha: Complex64, beta: Complex64, mut w: DVector<Complex64>, from: usize| {
        let scale = (alpha.norm() + beta.norm()) * norm_a.max(norm_b);
        for r in (0..from).rev() {
            let mut rhs = Complex64::new(0.0, 0.0);
            for c in r + 1..k {
                rhs -= (beta * wa[(r, c)] - alpha * wb[(r, c)]) * w[c];
            }
            let diag = beta * wa[(r, r)] - alpha * wb[(r, r)];
            w[r] = if diag.norm() > tiny * scale {
                rhs / diag
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        let mut v = st.z.map(|x| Complex64::new(x, 0.0)) * w;
        let norm = v.norm();
        if norm > 0.0 && norm.is_finite() {
            v /= Complex64::new(norm, 0.0);
        }
        v
    };

    let mut pairs = Vec::with_capacity(k);
    for i in 0..s {
        let alpha = Complex64::new(wa[(i, i)], 0.0);
        let beta = Complex64::new(wb[(i, i)], 0.0);
        let mut w = DVector::<Complex64>::zeros(k);
        w[i] = Complex64::new(1.0, 0.0);
        pairs.push(EigenPair {
            alpha,
            beta,
            value: classify(alpha, beta),
            vector: lift(alpha, beta, w, i),
        });
    }
    if s < k {
        let a22 = wa.view((s, s), (k - s, k - s)).into_owned();
        let b22 = wb.view((s, s), (k - s, k - s)).into_owned();
        let (alphas, betas, u) = real_qz(&a22, &b22)?;
        for i in 0..k - s {
            let alpha = alphas[i];
            let beta = Complex64::new(betas[i], 0.0);
            let mut w = DVector::<Complex64>::zeros(k);
            for r in 0..k - s {
                w[s + r] = u[(r, i)];
            }
            pairs.push(EigenPair {
                alpha,
                beta,
                value: classify(alpha, beta),
                vector: lift(alpha, beta, w, s),
            });
        }
    }
    Ok(pairs)
}

/// Orthogonally equivalent pencil `(Qᵀ A Z, Qᵀ B Z)` whose leading
/// `split × split` block is upper triangular with one side zero per column.
struct Staircase {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    z: DMatrix<f64>,
    split: usize,
}

impl Staircase {
    fn new(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Self {
        let k = a.nrows();
        Staircase {
            a: a.clone(),
            b: b.clone(),
            z: DMatrix::identity(k, k),
            split: 0,
        }
    }

    fn run(&mut self, norm_a: f64, norm_b: f64) {
        loop {
            let mut moved = false;
            while self.step(true, norm_b) {
                moved = true;
            }
            while self.step(false, norm_a) {
                moved = true;
            }
            if !moved {
                return;
            }
        }
    }

    /// Deflates the numerical null space of the trailing block of `B`
    /// (`infinite`) or `A`. Returns whether anything was split off.
    fn step(&mut self, infinite: bool, norm: f64) -> bool {
        let k = self.a.nrows();
        let s = self.split;
        if s == k {
            return false;
        }
        let n = k - s;
        let main = if infinite { &self.b } else { &self.a };
        let trailing = main.view((s, s), (n, n)).into_owned();
        let svd = trailing.svd(false, true);
        let Some(v_t) = svd.v_t else {
            return false;
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
        let d = order
            .iter()
            .take_while(|&&i| svd.singular_values[i] <= DEFLATION_TOL * norm)
            .count();
        if d == 0 {
            return false;
        }
        let v = DMatrix::from_fn(n, n, |r, c| v_t[(order[c], r)]);

        for m in [&mut self.a, &mut self.b, &mut self.z] {
            let rows = m.nrows();
            let cols = m.view((0, s), (rows, n)) * &v;
            m.view_mut((0, s), (rows, n)).copy_from(&cols);
        }
        {
            let main = if infinite { &mut self.b } else { &mut self.a };
            main.view_mut((s, s), (n, d)).fill(0.0);
        }

        let other = if infinite { &self.a } else { &self.b };
        let qr = other.view((s, s), (n, d)).into_owned().qr();
        for m in [&mut self.a, &mut self.b] {
            let mut block = m.view((s, s), (n, n)).into_owned();
            qr.q_tr_mul(&mut block);
            m.view_mut((s, s), (n, n)).copy_from(&block);
        }
        for m in [&mut self.a, &mut self.b] {
            for c in 0..d {
                for r in c + 1..n {
                    m[(s + r, s + c)] = 0.0;
                }
            }
        }
        self.split += d;
        true
    }
}

/// Real QZ with eigenvectors: `(α, β, V)` with complex-conjugate pairs split
/// into separate columns.
///
/// Calls the low-level routine directly: the high-level wrapper
/// underestimates its workspace for some pencils, and the blocked QZ sweep is
/// pathologically slow at some sizes, so the unblocked sweep is forced.
fn real_qz(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(Vec<Complex64>, Vec<f64>, DMatrix<Complex64>), NumericError> {
    let k = a.nrows();
    let mut fa = Mat::<f64>::from_fn(k, k, |i, j| a[(i, j)]);
    let mut fb = Mat::<f64>::from_fn(k, k, |i, j| b[(i, j)]);
    let mut s_re = Diag::<f64>::zeros(k);
    let mut s_im = Diag::<f64>::zeros(k);
    let mut s_b = Diag::<f64>::zeros(k);
    let mut v = Mat::<f64>::zeros(k, k);
    let mut params: Spec<GevdParams, f64> = Default::default();
    params.config.schur.blocking_threshold = usize::MAX;
    let req = gevd_scratch::<f64>(k, ComputeEigenvectors::No, ComputeEigenvectors::Yes, Par::Seq, params)
        .and(StackReq::new::<f64>(4 * (k + 16) * (k + 16)));
    let mut buf = MemBuffer::new(req);
    gevd_real(
        fa.as_mut(),
        fb.as_mut(),
        s_re.as_mut(),
        s_im.as_mut(),
        s_b.as_mut(),
        None,
        Some(v.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        params,
    )
    .map_err(|_| NumericError::NoConvergence { size: k })?;

    let mut alpha = vec![Complex64::new(0.0, 0.0); k];
    let mut u = DMatrix::<Complex64>::zeros(k, k);
    let mut j = 0;
    while j < k {
        if s_im[j] == 0.0 || j + 1 == k {
            alpha[j] = Complex64::new(s_re[j], 0.0);
            for i in 0..k {
                u[(i, j)] = Complex64::new(v[(i, j)], 0.0);
            }
            j += 1;
        } else {
            alpha[j] = Complex64::new(s_re[j], s_im[j]);
            alpha[j + 1] = alpha[j].conj();
            for i in 0..k {
                u[(i, j)] = Complex64::new(v[(i, j)], v[(i, j + 1)]);
                u[(i, j + 1)] = u[(i, j)].conj();
            }
            j += 2;
        }
    }
    let beta = (0..k).map(|i| s_b[i]).collect();
    Ok((alpha, beta, u))
}

/// Finite eigenvalues only.
pub fn finite_eigenvalues(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    inf_tol: f64,
) -> Result<Vec<Complex64>, NumericError> {
    Ok(gep_solve(a, b, inf_tol)?
        .iter()
        .filter_map(EigenPair::finite)
        .collect())
}

/// Finite eigenvalues with `|λ| > tol`; the removable zero eigenvalues are
/// dropped the same way infinite ones are.
pub fn nonzero_finite_eigenvalues(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tol: f64,
) -> Result<Vec<Complex64>, NumericError> {
    let mut eigs = finite_eigenvalues(a, b, tol)?;
    eigs.retain(|z| z.norm() > tol);
    Ok(eigs)
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numeric_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Roots of `c[0] + c[1] y + ... + c[q] y^q` from companion-matrix eigenvalues.
pub fn poly_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>, NumericError> {
    let Some(&lead) = coeffs.last() else {
        return Err(NumericError::ZeroLeading);
    };
    if lead.norm() == 0.0 {
        return Err(NumericError::ZeroLeading);
    }
    let q = coeffs.len() - 1;
    if q == 0 {
        return Ok(Vec::new());
    }
    let companion = Mat::<Complex64>::from_fn(q, q, |i, j| {
        if j == q - 1 {
            -coeffs[i] / lead
        } else if i == j + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    companion
        .eigenvalues()
        .map_err(|_| NumericError::RootsNoConvergence { size: q })
}

/// Determinant of `M(y) = Σ_e M_e y^e` as a polynomial in `y`, from
/// interpolation at roots of unity.
#[derive(Clone, Debug)]
pub struct DetPolynomial {
    /// Ascending coefficients, length `l·b + 1`.
    pub coeffs: Vec<Complex64>,
    /// Every sampled matrix was numerically singular.
    pub degenerate: bool,
}

impl DetPolynomial {
    /// Roots after discarding coefficients below `trim_tol · max|c|` at both
    /// ends; trimmed low-order coefficients become exact zero roots.
    pub fn roots(&self, trim_tol: f64) -> Result<Vec<Complex64>, NumericError> {
        if self.degenerate {
            return Ok(Vec::new());
        }
        let max = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let keep = |c: &Complex64| c.norm() > trim_tol * max;
        let Some(hi) = self.coeffs.iter().rposition(keep) else {
            return Ok(Vec::new());
        };
        let lo = self.coeffs.iter().position(keep).unwrap_or(0);
        let mut roots = vec![Complex64::new(0.0, 0.0); lo];
        roots.extend(poly_roots(&self.coeffs[lo..=hi])?);
        Ok(roots)
    }
}

/// Interpolates `det(Σ_e M_e y^e)` from `l·b + 1` samples on the unit circle.
pub fn det_polynomial(mats: &[DMatrix<f64>]) -> DetPolynomial {
    let l = mats.len().saturating_sub(1);
    let b = mats.first().map_or(0, |m| m.nrows());
    let samples = l * b + 1;
    let omega = |k: usize| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / samples as f64);

    let mut rcond: f64 = 0.0;
    let dets: Vec<Complex64> = (0..samples)
        .map(|k| {
            let y = omega(k);
            let mut m = DMatrix::<Complex64>::zeros(b, b);
            let mut pow = Complex64::new(1.0, 0.0);
            for me in mats {
                m += me.map(|v| Complex64::new(v, 0.0) * pow);
                pow *= y;
            }
            let sv = m.clone().singular_values();
            let hi = sv.iter().cloned().fold(0.0, f64::max);
            let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            if hi > 0.0 {
                rcond = rcond.max(lo / hi);
            }
            m.determinant()
        })
        .collect();

    let coeffs: Vec<Complex64> = (0..samples)
        .map(|j| {
            dets.iter()
                .enumerate()
                .map(|(k, d)| d * omega((j * k) % samples).conj())
                .sum::<Complex64>()
                / samples as f64
        })
        .collect();

    DetPolynomial {
        coeffs,
        degenerate: b > 0 && rcond <= 1e-12,
    }
}

/// Greedy multiset match: every `xs[i]` pairs with a distinct `ys[j]` within
/// `tol · max(1, |x|)`.
pub fn multisets_match(xs: &[Complex64], ys: &[Complex64], tol: f64) -> bool {
    if xs.len() != ys.len() {
        return false;
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].norm().total_cmp(&xs[j].norm()));
    let mut used = vec![false; ys.len()];
    order.into_iter().all(|i| {
        let x = xs[i];
        let best = ys
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .min_by(|(_, a), (_, b)| (*a - x).norm().total_cmp(&(*b - x).norm()));
        match best {
            Some((j, y)) if (y - x).norm() <= tol * x.norm().max(1.0) => {
                used[j] = true;
                true
            }
            _ => false,
        }
    })
}
