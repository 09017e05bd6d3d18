//! Dense vectors and small symmetric matrices for N <= 3 problems.
//!
//! The eigensolver is the classic symmetric Householder tridiagonalization
//! followed by QL iteration with implicit shifts (tred2/tql2), with
//! eigenvalues sorted descending and eigenvector signs normalized so results
//! are deterministic.

use serde::{Deserialize, Serialize};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| c * x).collect()
}

pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dense square matrix, row-major. Used for rotations (eigenbases).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    /// y = M x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = dot(&self.a[i * n..(i + 1) * n], x);
        }
        y
    }

    /// y = M^T x
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                s += self.a[i * n + j] * x[i];
            }
            y[j] = s;
        }
        y
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }
}

/// Symmetric N x N matrix with full row-major storage; constructors
/// symmetrize so `X == X^T` holds exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SymMat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = SymMat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = d[i];
        }
        m
    }

    /// Builds from arbitrary row data, symmetrizing via (A + A^T)/2.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = SymMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i * n + j] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        m
    }

    pub fn scalar(v: f64) -> Self {
        SymMat { n: 1, a: vec![v] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    /// Sets both (i,j) and (j,i).
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
        self.a[j * self.n + i] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = dot(&self.a[i * n..(i + 1) * n], x);
        }
        y
    }

    /// <A z, z>
    pub fn quad_form(&self, z: &[f64]) -> f64 {
        dot(&self.matvec(z), z)
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// trace(A * B) for symmetric A, B.
    pub fn trace_product(&self, other: &SymMat) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.a.iter().zip(&other.a).map(|(x, y)| x * y).sum()
    }

    pub fn add(&self, other: &SymMat) -> SymMat {
        debug_assert_eq!(self.n, other.n);
        SymMat {
            n: self.n,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> SymMat {
        SymMat { n: self.n, a: self.a.iter().map(|x| c * x).collect() }
    }

    /// A + c I
    pub fn add_scaled_identity(&self, c: f64) -> SymMat {
        let mut m = self.clone();
        for i in 0..self.n {
            m.a[i * self.n + i] += c;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Spectral norm via the symmetric eigendecomposition.
    pub fn spectral_norm(&self) -> f64 {
        let (vals, _) = self.eigh();
        vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_offdiag_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Eigenvalues (descending) and orthogonal eigenvector matrix `v`
    /// (column j is the eigenvector of eigenvalue j). Each eigenvector's
    /// sign is fixed so its largest-magnitude entry is positive.
    pub fn eigh(&self) -> (Vec<f64>, Mat) {
        let n = self.n;
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n];
        let mut v = Mat { n, a: self.a.clone() };
        tred2(&mut v, &mut d, &mut e);
        tql2(&mut v, &mut d, &mut e);

        // tql2 yields ascending order; re-sort descending with columns.
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap());
        let vals: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
        let mut vs = Mat::zeros(n);
        for (newj, &oldj) in idx.iter().enumerate() {
            let mut col = v.column(oldj);
            // deterministic sign: largest-|entry| coordinate made positive
            let mut kmax = 0;
            for k in 1..n {
                if col[k].abs() > col[kmax].abs() {
                    kmax = k;
                }
            }
            if col[kmax] < 0.0 {
                for c in col.iter_mut() {
                    *c = -*c;
                }
            }
            for i in 0..n {
                vs.set(i, newj, col[i]);
            }
        }
        (vals, vs)
    }
}

// Householder reduction to tridiagonal form, derived from the Algol
// procedure tred2 (Bowdler, Martin, Reinsch, Wilkinson) via EISPACK/JAMA.
#[allow(clippy::needless_range_loop)]
fn tred2(v: &mut Mat, d: &mut [f64], e: &mut [f64]) {
    let n = v.n;
    for j in 0..n {
        d[j] = v.get(n - 1, j);
    }

    for i in (1..n).rev() {
        // Scale to avoid under/overflow.
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v.get(i - 1, j);
                v.set(i, j, 0.0);
                v.set(j, i, 0.0);
            }
        } else {
            // Generate Householder vector.
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = 0.0;
            }

            // Apply similarity transformation to remaining columns.
            for j in 0..i {
                f = d[j];
                v.set(j, i, f);
                g = e[j] + v.get(j, j) * f;
                for k in (j + 1)..i {
                    g += v.get(k, j) * d[k];
                    e[k] += v.get(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let val = v.get(k, j) - (f * e[k] + g * d[k]);
                    v.set(k, j, val);
                }
                d[j] = v.get(i - 1, j);
                v.set(i, j, 0.0);
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for i in 0..n.saturating_sub(1) {
        v.set(n - 1, i, v.get(i, i));
        v.set(i, i, 1.0);
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v.get(k, i + 1) / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v.get(k, i + 1) * v.get(k, j);
                }
                for k in 0..=i {
                    let val = v.get(k, j) - g * d[k];
                    v.set(k, j, val);
                }
            }
        }
        for k in 0..=i {
            v.set(k, i + 1, 0.0);
        }
    }
    for j in 0..n {
        d[j] = v.get(n - 1, j);
        v.set(n - 1, j, 0.0);
    }
    v.set(n - 1, n - 1, 1.0);
    e[0] = 0.0;
}

// QL iteration with implicit shifts, from the Algol procedure tql2
// (Bowdler, Martin, Reinsch, Wilkinson) via EISPACK/JAMA.
#[allow(clippy::needless_range_loop)]
fn tql2(v: &mut Mat, d: &mut [f64], e: &mut [f64]) {
    let n = v.n;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    let eps = 2.0f64.powi(-52);
    for l in 0..n {
        // Find small subdiagonal element.
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m >= n {
            m = n - 1;
        }

        // If m == l, d[l] is an eigenvalue; otherwise iterate.
        if m > l {
            loop {
                // Compute implicit shift.
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for i in (l + 2)..n {
                    d[i] -= h;
                }
                f += h;

                // Implicit QL transformation.
                p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    // Accumulate transformation.
                    for k in 0..n {
                        h = v.get(k, i + 1);
                        v.set(k, i + 1, s * v.get(k, i) + c * h);
                        v.set(k, i, c * v.get(k, i) - s * h);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_decomposition(m: &SymMat, tol: f64) {
        let n = m.n;
        let (vals, v) = m.eigh();
        // A v_j = lambda_j v_j
        for j in 0..n {
            let col = v.column(j);
            let av = m.matvec(&col);
            for i in 0..n {
                assert!(
                    (av[i] - vals[j] * col[i]).abs() < tol,
                    "residual at ({i},{j}): {} vs {}",
                    av[i],
                    vals[j] * col[i]
                );
            }
        }
        // V^T V = I
        for i in 0..n {
            for j in 0..n {
                let got = dot(&v.column(i), &v.column(j));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((got - want).abs() < tol, "orthogonality ({i},{j}): {got}");
            }
        }
        // descending order
        for w in vals.windows(2) {
            assert!(w[0] >= w[1] - tol);
        }
    }

    #[test]
    fn eigh_diagonal() {
        let m = SymMat::diag(&[-1.0, 2.0]);
        let (vals, v) = m.eigh();
        assert!((vals[0] - 2.0).abs() < 1e-14);
        assert!((vals[1] + 1.0).abs() < 1e-14);
        // eigenvector of 2 is e2, of -1 is e1 (sign-normalized positive)
        assert!((v.get(1, 0) - 1.0).abs() < 1e-14);
        assert!((v.get(0, 1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_2x2_known() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let m = SymMat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let (vals, _) = m.eigh();
        assert!((vals[0] - 3.0).abs() < 1e-13);
        assert!((vals[1] - 1.0).abs() < 1e-13);
        check_decomposition(&m, 1e-12);
    }

    #[test]
    fn eigh_3x3_random_seeded() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mut rows = vec![vec![0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    rows[i][j] = rng.gen_range(-5.0..5.0);
                }
            }
            let m = SymMat::from_rows(&rows);
            check_decomposition(&m, 1e-10);
        }
    }

    #[test]
    fn eigh_1x1() {
        let m = SymMat::scalar(-3.5);
        let (vals, v) = m.eigh();
        assert_eq!(vals[0], -3.5);
        assert_eq!(v.get(0, 0), 1.0);
    }

    #[test]
    fn shift_by_identity_preserves_eigenvectors() {
        let m = SymMat::from_rows(&[vec![-2.0, 0.7], vec![0.7, 1.0]]);
        let (vals_a, va) = m.eigh();
        let (vals_b, vb) = m.add_scaled_identity(0.5).eigh();
        for j in 0..2 {
            assert!((vals_b[j] - vals_a[j] - 0.5).abs() < 1e-12);
            for i in 0..2 {
                assert!((va.get(i, j) - vb.get(i, j)).abs() < 1e-10);
            }
        }
    }
}
