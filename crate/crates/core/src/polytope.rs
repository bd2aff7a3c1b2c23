//! Exact lattice polytopes: Newton polytopes, Minkowski sums and enumeration
//! of integer points in displaced polytopes.
//!
//! All geometry is integer or exact rational. Facets are stored as primitive
//! integer half-spaces `normal · x <= offset`; polytopes that are not
//! full-dimensional also carry the integer equalities of their affine hull.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact;
use crate::poly::Exponent;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolytopeError {
    #[error("empty point set")]
    Empty,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("displacement epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(Rational64),
    #[error("displacement entries must be -1, 0 or 1, got {0}")]
    BadSign(i8),
}

/// `normal · x <= offset` for facets, `normal · x == offset` for hull equalities.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfSpace {
    pub normal: Vec<i64>,
    pub offset: i64,
}

impl HalfSpace {
    fn slack(&self, p: &[i64]) -> i64 {
        dot(&self.normal, p) - self.offset
    }
}

fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticePolytope {
    dim: usize,
    vertices: Vec<Exponent>,
    facets: Vec<HalfSpace>,
    affine_hull: Vec<HalfSpace>,
}

impl LatticePolytope {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Vertices in lexicographic order.
    pub fn vertices(&self) -> &[Exponent] {
        &self.vertices
    }

    pub fn facets(&self) -> &[HalfSpace] {
        &self.facets
    }

    pub fn affine_hull(&self) -> &[HalfSpace] {
        &self.affine_hull
    }

    /// Dimension of the affine hull.
    pub fn intrinsic_dim(&self) -> usize {
        self.dim - self.affine_hull.len()
    }

    pub fn contains(&self, p: &Exponent) -> bool {
        let p = to_i64(p);
        self.facets.iter().all(|h| h.slack(&p) <= 0)
            && self.affine_hull.iter().all(|h| h.slack(&p) == 0)
    }

    pub fn translate(&self, t: &Exponent) -> LatticePolytope {
        let shifted: Vec<Exponent> = self.vertices.iter().map(|v| v.add(t)).collect();
        hull(shifted.iter().map(to_i64).collect(), self.dim)
    }
}

fn to_i64(e: &Exponent) -> Vec<i64> {
    e.0.iter().map(|&x| x as i64).collect()
}

fn from_i64(v: &[i64]) -> Exponent {
    Exponent(v.iter().map(|&x| x as i32).collect())
}

/// A displacement `δ = ε·s` with `s ∈ {-1, 0, 1}^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Displacement {
    signs: Vec<i8>,
    #[serde(with = "rational_string")]
    epsilon: Rational64,
}

impl Displacement {
    pub fn new(signs: Vec<i8>, epsilon: Rational64) -> Result<Self, PolytopeError> {
        if epsilon <= Rational64::from_integer(0) || epsilon >= Rational64::from_integer(1) {
            return Err(PolytopeError::BadEpsilon(epsilon));
        }
        if let Some(&s) = signs.iter().find(|s| !(-1..=1).contains(*s)) {
            return Err(PolytopeError::BadSign(s));
        }
        Ok(Displacement { signs, epsilon })
    }

    pub fn zero(dim: usize, epsilon: Rational64) -> Result<Self, PolytopeError> {
        Displacement::new(vec![0; dim], epsilon)
    }

    /// All `3^dim` displacements. Entries cycle `+ε, 0, -ε`, first coordinate
    /// most significant.
    pub fn all(dim: usize, epsilon: Rational64) -> Result<Vec<Self>, PolytopeError> {
        let mut out = vec![Vec::new()];
        for _ in 0..dim {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<i8>| {
                    [1i8, 0, -1].into_iter().map(move |s| {
                        let mut p = prefix.clone();
                        p.push(s);
                        p
                    })
                })
                .collect();
        }
        out.into_iter()
            .map(|s| Displacement::new(s, epsilon))
            .collect()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn epsilon(&self) -> Rational64 {
        self.epsilon
    }

    pub fn delta(&self) -> Vec<Rational64> {
        self.signs
            .iter()
            .map(|&s| self.epsilon * Rational64::from_integer(s as i64))
            .collect()
    }

    pub fn with_epsilon(&self, epsilon: Rational64) -> Result<Self, PolytopeError> {
        Displacement::new(self.signs.clone(), epsilon)
    }
}

impl fmt::Display for Displacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self
            .signs
            .iter()
            .map(|s| match s {
                1 => "+e",
                -1 => "-e",
                _ => "0",
            })
            .collect();
        write!(f, "[{}]", parts.join(","))
    }
}

pub(crate) mod rational_string {
    use num_rational::Rational64;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational64, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(|e| D::Error::custom(format!("bad rational `{s}`: {e}")))
    }
}

/// Convex hull of the support. A singleton support gives a point polytope.
pub fn newton_polytope<'a, I>(support: I) -> Result<LatticePolytope, PolytopeError>
where
    I: IntoIterator<Item = &'a Exponent>,
{
    let points: Vec<Vec<i64>> = support.into_iter().map(to_i64).collect();
    let Some(first) = points.first() else {
        return Err(PolytopeError::Empty);
    };
    let dim = first.len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(PolytopeError::DimensionMismatch(dim, p.len()));
    }
    Ok(hull(points, dim))
}

pub fn minkowski_sum(
    p1: &LatticePolytope,
    p2: &LatticePolytope,
) -> Result<LatticePolytope, PolytopeError> {
    if p1.dim != p2.dim {
        return Err(PolytopeError::DimensionMismatch(p1.dim, p2.dim));
    }
    let points = p1
        .vertices
        .iter()
        .flat_map(|a| p2.vertices.iter().map(move |b| to_i64(&a.add(b))))
        .collect();
    Ok(hull(points, p1.dim))
}

/// Integer points `p` with `p - δ` in `P`, decided exactly.
pub fn lattice_points(p: &LatticePolytope, d: &Displacement) -> BTreeSet<Exponent> {
    assert_eq!(p.dim, d.signs.len(), "displacement dimension");
    let num = *d.epsilon.numer() as i128;
    let den = *d.epsilon.denom() as i128;
    let signs: Vec<i64> = d.signs.iter().map(|&s| s as i64).collect();

    // a·(p - εs) <= b  <=>  den·(a·p - b) <= num·(a·s)
    let inside = |q: &[i64]| {
        p.facets.iter().all(|h| {
            den * h.slack(q) as i128 <= num * dot(&h.normal, &signs) as i128
        }) && p.affine_hull.iter().all(|h| {
            den * h.slack(q) as i128 == num * dot(&h.normal, &signs) as i128
        })
    };

    let lo: Vec<i64> = (0..p.dim)
        .map(|i| p.vertices.iter().map(|v| v.0[i] as i64).min().unwrap_or(0) - 1)
        .collect();
    let hi: Vec<i64> = (0..p.dim)
        .map(|i| p.vertices.iter().map(|v| v.0[i] as i64).max().unwrap_or(0) + 1)
        .collect();

    let mut out = BTreeSet::new();
    let mut cur = lo.clone();
    loop {
        if inside(&cur) {
            out.insert(from_i64(&cur));
        }
        // odometer increment over the bounding box
        let mut axis = 0;
        loop {
            if axis == p.dim {
                return out;
            }
            if cur[axis] < hi[axis] {
                cur[axis] += 1;
                break;
            }
            cur[axis] = lo[axis];
            axis += 1;
        }
    }
}

/// True when `ε` and `ε/2` (same sign pattern) select the same lattice points.
pub fn displacement_is_stable(p: &LatticePolytope, d: &Displacement) -> bool {
    let half = d
        .with_epsilon(d.epsilon / Rational64::from_integer(2))
        .expect("halving keeps epsilon in range");
    lattice_points(p, d) == lattice_points(p, &half)
}

fn hull(mut points: Vec<Vec<i64>>, dim: usize) -> LatticePolytope {
    points.sort();
    points.dedup();
    let p0 = points[0].clone();
    let diffs: Vec<Vec<i64>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(&p0).map(|(a, b)| a - b).collect())
        .collect();
    let k = exact::rank(&diffs, dim);
    let affine_hull: Vec<HalfSpace> = exact::null_space(&diffs, dim)
        .into_iter()
        .map(|c| {
            let offset = dot(&c, &p0);
            HalfSpace { normal: c, offset }
        })
        .collect();

    if k == 0 {
        return LatticePolytope {
            dim,
            vertices: vec![from_i64(&p0)],
            facets: Vec::new(),
            affine_hull,
        };
    }

    let facets = if k == 2 && dim == 2 {
        planar_facets(&points)
    } else {
        enumerate_facets(&points, &affine_hull, k, dim)
    };

    let vertices = points
        .iter()
        .filter(|p| {
            let active: Vec<Vec<i64>> = facets
                .iter()
                .filter(|h| h.slack(p) == 0)
                .map(|h| h.normal.clone())
                .collect();
            exact::rank(&active, dim) == k
        })
        .map(|p| from_i64(p))
        .collect();

    LatticePolytope {
        dim,
        vertices,
        facets,
        affine_hull,
    }
}

fn primitive_halfspace(normal: Vec<i64>, offset: i64) -> HalfSpace {
    let g = normal
        .iter()
        .fold(offset as i128, |acc, &x| exact::gcd(acc, x as i128))
        .max(1) as i64;
    HalfSpace {
        normal: normal.iter().map(|x| x / g).collect(),
        offset: offset / g,
    }
}

/// Full-dimensional planar hull via the monotone chain; points sorted and distinct.
fn planar_facets(points: &[Vec<i64>]) -> Vec<HalfSpace> {
    let cross = |o: &[i64], a: &[i64], b: &[i64]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut chain: Vec<&Vec<i64>> = Vec::with_capacity(2 * points.len());
    for pass in 0..2 {
        let start = chain.len();
        let iter: Box<dyn Iterator<Item = &Vec<i64>>> = if pass == 0 {
            Box::new(points.iter())
        } else {
            Box::new(points.iter().rev())
        };
        for p in iter {
            while chain.len() >= start + 2
                && cross(chain[chain.len() - 2], chain[chain.len() - 1], p) <= 0
            {
                chain.pop();
            }
            chain.push(p);
        }
        chain.pop();
    }
    // counter-clockwise cycle; outward normal of edge u -> v is (dy, -dx)
    let mut facets: Vec<HalfSpace> = (0..chain.len())
        .map(|i| {
            let u = chain[i];
            let v = chain[(i + 1) % chain.len()];
            let normal = vec![v[1] - u[1], u[0] - v[0]];
            let offset = dot(&normal, u);
            primitive_halfspace(normal, offset)
        })
        .collect();
    facets.sort();
    facets
}

/// Brute-force facet enumeration over affinely independent `k`-subsets.
fn enumerate_facets(
    points: &[Vec<i64>],
    affine_hull: &[HalfSpace],
    k: usize,
    dim: usize,
) -> Vec<HalfSpace> {
    let mut found = BTreeSet::new();
    let mut idx: Vec<usize> = (0..k).collect();
    let n = points.len();
    if n < k {
        return Vec::new();
    }
    loop {
        let base = &points[idx[0]];
        let mut rows: Vec<Vec<i64>> = idx[1..]
            .iter()
            .map(|&i| points[i].iter().zip(base).map(|(a, b)| a - b).collect())
            .collect();
        if exact::rank(&rows, dim) == k - 1 {
            rows.extend(affine_hull.iter().map(|h| h.normal.clone()));
            let normals = exact::null_space(&rows, dim);
            if let [a] = normals.as_slice() {
                let b = dot(a, base);
                let slacks: Vec<i64> = points.iter().map(|p| dot(a, p) - b).collect();
                if slacks.iter().all(|&s| s <= 0) {
                    found.insert(primitive_halfspace(a.clone(), b));
                } else if slacks.iter().all(|&s| s >= 0) {
                    found.insert(primitive_halfspace(
                        a.iter().map(|x| -x).collect(),
                        -b,
                    ));
                }
            }
        }
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return found.into_iter().collect();
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(v: &[i32]) -> Exponent {
        Exponent(v.to_vec())
    }

    fn eps() -> Rational64 {
        Rational64::new(1, 1000)
    }

    fn set(pts: &[&[i32]]) -> BTreeSet<Exponent> {
        pts.iter().map(|p| e(p)).collect()
    }

    #[test]
    fn segment_from_projected_support() {
        let p = newton_polytope(&[e(&[0]), e(&[2])]).unwrap();
        assert_eq!(p.vertices(), [e(&[0]), e(&[2])]);
        assert_eq!(p.facets().len(), 2);
    }

    #[test]
    fn triangle_drops_edge_point() {
        let p = newton_polytope(&[e(&[0, 0]), e(&[2, 0]), e(&[0, 2]), e(&[1, 1])]).unwrap();
        assert_eq!(p.vertices(), [e(&[0, 0]), e(&[0, 2]), e(&[2, 0])]);
        assert_eq!(p.facets().len(), 3);
        assert!(p.contains(&e(&[1, 1])));
        assert!(!p.contains(&e(&[2, 1])));
    }

    #[test]
    fn singleton_is_point() {
        let p = newton_polytope(&[e(&[3])]).unwrap();
        assert_eq!(p.vertices(), [e(&[3])]);
        assert_eq!(p.intrinsic_dim(), 0);
    }

    #[test]
    fn minkowski_of_segments() {
        let a = newton_polytope(&[e(&[0]), e(&[2])]).unwrap();
        let b = newton_polytope(&[e(&[0]), e(&[1])]).unwrap();
        let s = minkowski_sum(&a, &b).unwrap();
        assert_eq!(s.vertices(), [e(&[0]), e(&[3])]);
        let origin = newton_polytope(&[e(&[0])]).unwrap();
        assert_eq!(minkowski_sum(&a, &origin).unwrap(), a);
        let c = newton_polytope(&[e(&[0, 0])]).unwrap();
        assert_eq!(
            minkowski_sum(&a, &c).unwrap_err(),
            PolytopeError::DimensionMismatch(1, 2)
        );
    }

    #[test]
    fn displaced_points() {
        let seg = newton_polytope(&[e(&[0]), e(&[3])]).unwrap();
        let plus = Displacement::new(vec![1], eps()).unwrap();
        assert_eq!(lattice_points(&seg, &plus), set(&[&[1], &[2], &[3]]));

        let tri = newton_polytope(&[e(&[0, 0]), e(&[2, 0]), e(&[0, 2])]).unwrap();
        let pp = Displacement::new(vec![1, 1], eps()).unwrap();
        assert_eq!(lattice_points(&tri, &pp), set(&[&[1, 1]]));
        let mm = Displacement::new(vec![-1, -1], eps()).unwrap();
        assert_eq!(lattice_points(&tri, &mm), set(&[&[0, 0], &[1, 0], &[0, 1]]));
        let zero = Displacement::zero(2, eps()).unwrap();
        assert_eq!(lattice_points(&tri, &zero).len(), 6);
    }

    #[test]
    fn lower_dimensional_displacement() {
        // the diagonal segment from (0,0) to (2,2)
        let diag = newton_polytope(&[e(&[0, 0]), e(&[2, 2])]).unwrap();
        assert_eq!(diag.intrinsic_dim(), 1);
        let along = Displacement::new(vec![1, 1], eps()).unwrap();
        assert_eq!(lattice_points(&diag, &along), set(&[&[1, 1], &[2, 2]]));
        let across = Displacement::new(vec![1, 0], eps()).unwrap();
        assert!(lattice_points(&diag, &across).is_empty());
        let point = newton_polytope(&[e(&[1, 1])]).unwrap();
        assert!(lattice_points(&point, &across).is_empty());
        assert_eq!(
            lattice_points(&point, &Displacement::zero(2, eps()).unwrap()),
            set(&[&[1, 1]])
        );
    }

    #[test]
    fn three_dimensional_hull() {
        let cube: Vec<Exponent> = (0..8)
            .map(|i| e(&[i & 1, (i >> 1) & 1, (i >> 2) & 1]))
            .chain([e(&[0, 0, 0]), e(&[1, 1, 0])])
            .collect();
        let mut with_center = cube.clone();
        with_center.push(e(&[1, 1, 1]));
        let p = newton_polytope(&cube).unwrap();
        assert_eq!(p.vertices().len(), 8);
        assert_eq!(p.facets().len(), 6);
        // a planar polygon embedded in 3-space
        let tilted = newton_polytope(&[e(&[0, 0, 0]), e(&[2, 0, 2]), e(&[0, 2, 0]), e(&[1, 1, 1])])
            .unwrap();
        assert_eq!(tilted.intrinsic_dim(), 2);
        assert_eq!(tilted.vertices().len(), 3);
        assert_eq!(lattice_points(&tilted, &Displacement::zero(3, eps()).unwrap()).len(), 6);
    }

    #[test]
    fn displacement_order_and_validation() {
        let all = Displacement::all(1, eps()).unwrap();
        let signs: Vec<_> = all.iter().map(|d| d.signs()[0]).collect();
        assert_eq!(signs, [1, 0, -1]);
        assert_eq!(Displacement::all(2, eps()).unwrap().len(), 9);
        assert!(Displacement::new(vec![2], eps()).is_err());
        assert!(Displacement::new(vec![1], Rational64::from_integer(0)).is_err());
    }

    fn brute_force_hull_vertices(points: &[Exponent]) -> BTreeSet<Exponent> {
        // 2-D oracle: a point is a vertex iff some direction makes it the unique maximiser
        let mut out = BTreeSet::new();
        for p in points {
            let unique_max = (0..360).any(|deg| {
                let t = (deg as f64 + 0.5).to_radians();
                let (c, s) = (t.cos(), t.sin());
                let val = |q: &Exponent| c * q.0[0] as f64 + s * q.0[1] as f64;
                points.iter().filter(|q| *q != p).all(|q| val(q) < val(p) - 1e-9)
            });
            if unique_max {
                out.insert(p.clone());
            }
        }
        out
    }

    fn support_strategy() -> impl Strategy<Value = Vec<Exponent>> {
        prop::collection::vec((0i32..5, 0i32..5), 1..8)
            .prop_map(|v| v.into_iter().map(|(a, b)| e(&[a, b])).collect())
    }

    proptest! {
        #[test]
        fn product_support_matches_minkowski(f in support_strategy(), g in support_strategy()) {
            let product: Vec<Exponent> =
                f.iter().flat_map(|a| g.iter().map(move |b| a.add(b))).collect();
            let np_fg = newton_polytope(&product).unwrap();
            let sum = minkowski_sum(&newton_polytope(&f).unwrap(), &newton_polytope(&g).unwrap()).unwrap();
            prop_assert_eq!(np_fg.vertices(), sum.vertices());
            let swapped = minkowski_sum(&newton_polytope(&g).unwrap(), &newton_polytope(&f).unwrap()).unwrap();
            prop_assert_eq!(sum, swapped);
        }

        #[test]
        fn vertices_match_direction_oracle(f in support_strategy()) {
            let p = newton_polytope(&f).unwrap();
            if p.intrinsic_dim() == 2 {
                let got: BTreeSet<Exponent> = p.vertices().iter().cloned().collect();
                prop_assert_eq!(got, brute_force_hull_vertices(&f));
            }
            for q in &f {
                prop_assert!(p.contains(q));
            }
        }

        #[test]
        fn lattice_points_translate(f in support_strategy(), t in (-3i32..4, -3i32..4), s in (-1i8..=1, -1i8..=1)) {
            let p = newton_polytope(&f).unwrap();
            let t = e(&[t.0, t.1]);
            let d = Displacement::new(vec![s.0, s.1], eps()).unwrap();
            let moved: BTreeSet<Exponent> = lattice_points(&p, &d).iter().map(|q| q.add(&t)).collect();
            prop_assert_eq!(lattice_points(&p.translate(&t), &d), moved);
        }

        #[test]
        fn lattice_points_monotone(f in support_strategy(), keep in 1usize..8, s in (-1i8..=1, -1i8..=1)) {
            let big = newton_polytope(&f).unwrap();
            let sub: Vec<Exponent> = f.iter().take(keep).cloned().collect();
            let small = newton_polytope(&sub).unwrap();
            let d = Displacement::new(vec![s.0, s.1], eps()).unwrap();
            prop_assert!(lattice_points(&small, &d).is_subset(&lattice_points(&big, &d)));
        }

        #[test]
        fn lattice_points_match_float_oracle(f in support_strategy(), s in (-1i8..=1, -1i8..=1)) {
            // independent check: point-in-convex-polygon by winding on the float hull of the displaced support
            let p = newton_polytope(&f).unwrap();
            let d = Displacement::new(vec![s.0, s.1], eps()).unwrap();
            let got = lattice_points(&p, &d);
            let dx = s.0 as f64 * 1e-3;
            let dy = s.1 as f64 * 1e-3;
            for x in -1..6 {
                for y in -1..6 {
                    let q = e(&[x, y]);
                    let back = [x as f64 - dx, y as f64 - dy];
                    let inside = p.facets().iter().all(|h| {
                        h.normal[0] as f64 * back[0] + h.normal[1] as f64 * back[1] <= h.offset as f64 + 1e-12
                    }) && p.affine_hull().iter().all(|h| {
                        (h.normal[0] as f64 * back[0] + h.normal[1] as f64 * back[1] - h.offset as f64).abs() < 1e-12
                    });
                    prop_assert_eq!(got.contains(&q), inside);
                }
            }
        }
    }
}
