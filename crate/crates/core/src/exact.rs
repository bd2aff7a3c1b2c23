//! Small exact linear algebra over the rationals, for integer input.

use num_rational::Ratio;

type Q = Ratio<i128>;

pub(crate) fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Reduced row echelon form; returns the non-zero rows and their pivot columns.
fn rref(rows: &[Vec<i64>], dim: usize) -> (Vec<Vec<Q>>, Vec<usize>) {
    let mut m: Vec<Vec<Q>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| Q::from_integer(v as i128)).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..dim {
        if row == m.len() {
            break;
        }
        let Some(p) = (row..m.len()).find(|&r| m[r][col] != Q::from_integer(0)) else {
            continue;
        };
        m.swap(row, p);
        let inv = m[row][col].recip();
        for v in m[row].iter_mut() {
            *v *= inv;
        }
        for r in 0..m.len() {
            if r != row && m[r][col] != Q::from_integer(0) {
                let f = m[r][col];
                for c in 0..dim {
                    let sub = f * m[row][c];
                    m[r][c] -= sub;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    m.truncate(row);
    (m, pivots)
}

pub(crate) fn rank(rows: &[Vec<i64>], dim: usize) -> usize {
    rref(rows, dim).1.len()
}

/// Primitive integer basis of `{x : rows * x = 0}`.
pub(crate) fn null_space(rows: &[Vec<i64>], dim: usize) -> Vec<Vec<i64>> {
    let (m, pivots) = rref(rows, dim);
    let free: Vec<usize> = (0..dim).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::from_integer(0); dim];
            v[f] = Q::from_integer(1);
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -m[r][f];
            }
            primitive(&v)
        })
        .collect()
}

fn primitive(v: &[Q]) -> Vec<i64> {
    let lcm = v
        .iter()
        .fold(1i128, |acc, q| acc / gcd(acc, *q.denom()) * q.denom());
    let ints: Vec<i128> = v.iter().map(|q| q.numer() * (lcm / q.denom())).collect();
    let g = ints.iter().fold(0i128, |acc, &x| gcd(acc, x)).max(1);
    ints.iter().map(|&x| (x / g) as i64).collect()
}

/// Index of the lattice spanned by `vectors` in `Z^dim`, or `None` when they
/// do not span a full-rank lattice.
pub(crate) fn lattice_index(vectors: &[Vec<i64>], dim: usize) -> Option<i128> {
    let mut m: Vec<Vec<i128>> = vectors
        .iter()
        .map(|v| v.iter().map(|&x| x as i128).collect())
        .collect();
    let mut index = 1i128;
    let mut row = 0;
    for col in 0..dim {
        // Euclid on the column until a single non-zero entry remains at `row`
        loop {
            let Some(p) = (row..m.len())
                .filter(|&r| m[r][col] != 0)
                .min_by_key(|&r| m[r][col].abs())
            else {
                return None;
            };
            m.swap(row, p);
            let mut done = true;
            for r in row + 1..m.len() {
                let q = m[r][col] / m[row][col];
                if q != 0 {
                    for c in col..dim {
                        let sub = q * m[row][c];
                        m[r][c] -= sub;
                    }
                }
                if m[r][col] != 0 {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        index *= m[row][col].abs();
        row += 1;
    }
    Some(index)
}
