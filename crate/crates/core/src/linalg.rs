//! Small dense matrix helpers: thresholded rank, inversion, Cholesky and
//! span projection. Everything here works on `Vec<Vec<f64>>` since the
//! matrices in this crate are tiny (order ≤ a dozen).

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(rows: usize, cols: usize) -> Mat {
    vec![vec![0.0; cols]; rows]
}

pub fn identity(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let (r, k, c) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(r, c);
    for i in 0..r {
        for l in 0..k {
            let ail = a[i][l];
            if ail == 0.0 {
                continue;
            }
            for j in 0..c {
                out[i][j] += ail * b[l][j];
            }
        }
    }
    out
}

pub fn mat_vec(a: &Mat, v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

/// Numerical rank by row echelon with partial pivoting. The pivot threshold
/// is `tol` scaled by the largest absolute entry of the input.
pub fn rank(m: &Mat, tol: f64) -> usize {
    if m.is_empty() || m[0].is_empty() {
        return 0;
    }
    let mut a = m.clone();
    let rows = a.len();
    let cols = a[0].len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(1.0);
    let thresh = tol * scale;
    let mut rank = 0;
    let mut col = 0;
    while rank < rows && col < cols {
        let (pivot_row, pivot_val) = (rank..rows)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot_val <= thresh {
            col += 1;
            continue;
        }
        a.swap(rank, pivot_row);
        let inv = 1.0 / a[rank][col];
        for r in (rank + 1)..rows {
            let f = a[r][col] * inv;
            if f != 0.0 {
                for c in col..cols {
                    a[r][c] -= f * a[rank][c];
                }
            }
        }
        rank += 1;
        col += 1;
    }
    rank
}

/// Gauss-Jordan inverse with partial pivoting. `None` when a pivot falls
/// below `tol` times the largest input entry.
pub fn invert(m: &Mat, tol: f64) -> Option<Mat> {
    let n = m.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(1.0);
    let thresh = tol * scale;
    let mut a = m.clone();
    let mut inv = identity(n);
    for col in 0..n {
        let (pivot_row, pivot_val) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot_val <= thresh {
            return None;
        }
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let p = 1.0 / a[col][col];
        for c in 0..n {
            a[col][c] *= p;
            inv[col][c] *= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..n {
                        a[r][c] -= f * a[col][c];
                        inv[r][c] -= f * inv[col][c];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Cholesky factorisation existence test: succeeds iff the symmetric input
/// is positive definite (up to a small diagonal tolerance).
pub fn is_positive_definite(m: &Mat) -> bool {
    let n = m.len();
    let mut l = zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

/// Orthonormal basis of the row span of `rows`, via modified Gram-Schmidt.
/// Rows whose remainder falls below `tol` (relative to the row norm) are
/// dropped as dependent.
pub fn orthonormal_basis(rows: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for row in rows {
        let mut v = row.clone();
        let norm0 = norm(&v);
        if norm0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let d = dot(&v, b);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= d * y;
                }
            }
        }
        let rem = norm(&v);
        if rem > tol * norm0 {
            let inv = 1.0 / rem;
            v.iter_mut().for_each(|x| *x *= inv);
            basis.push(v);
        }
    }
    basis
}

/// Component of `v` orthogonal to the span of an orthonormal `basis`.
pub fn project_out(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let d = dot(&r, b);
            for (x, y) in r.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
    }
    r
}

/// Basis of the nullspace of `m` (vectors x with m·x = 0), via row echelon
/// with the same thresholded pivoting as `rank`.
pub fn nullspace(m: &Mat, tol: f64) -> Vec<Vec<f64>> {
    if m.is_empty() {
        return Vec::new();
    }
    let rows = m.len();
    let cols = m[0].len();
    let mut a = m.clone();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(1.0);
    let thresh = tol * scale;
    let mut pivots: Vec<usize> = Vec::new();
    let mut rank = 0;
    for col in 0..cols {
        if rank >= rows {
            break;
        }
        let (pivot_row, pivot_val) = (rank..rows)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot_val <= thresh {
            continue;
        }
        a.swap(rank, pivot_row);
        let inv = 1.0 / a[rank][col];
        for c in col..cols {
            a[rank][c] *= inv;
        }
        for r in 0..rows {
            if r != rank {
                let f = a[r][col];
                if f != 0.0 {
                    for c in col..cols {
                        a[r][c] -= f * a[rank][c];
                    }
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Vec::with_capacity(free.len());
    for &f in &free {
        let mut v = vec![0.0; cols];
        v[f] = 1.0;
        for (r, &p) in pivots.iter().enumerate() {
            v[p] = -a[r][f];
        }
        basis.push(v);
    }
    basis
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
