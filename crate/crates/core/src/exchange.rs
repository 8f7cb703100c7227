//! Coordinate partitions for orthogonal subspace pairs.
//!
//! Let `U` be an `n x n` orthogonal matrix whose first `n1` rows span `V1`
//! and whose remaining rows span `V2`. A partition `{J, J^c}` of the
//! coordinates with `U[1..n1, J]` and `U[n1.., J^c]` both nonsingular lets
//! every `x in V1` be recovered from `x_J` and every `y in V2` from `y_{J^c}`.
//! Such a partition always exists by the Laplace expansion of `det U` along
//! the first `n1` rows; [`laplace_certificate`] finds a nonzero term of that
//! expansion for any nonsingular matrix.
//!
//! Indices are 0-based.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthogonality tolerance of [`SubspacePair::new`].
pub const ORTHO_TOL: f64 = 1e-10;
/// Threshold on the determinant of a row-normalized block.
pub const DET_TOL: f64 = 1e-12;
/// Largest dimension searched exhaustively.
pub const EXHAUSTIVE_MAX_N: usize = 14;

/// An orthogonal matrix; a split point `n1` selects the two subspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspacePair {
    u: DMatrix<f64>,
}

impl SubspacePair {
    /// Checks that `u` is square with `u u^T = I` within [`ORTHO_TOL`].
    pub fn new(u: DMatrix<f64>) -> Result<Self> {
        if u.nrows() != u.ncols() || u.nrows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "expected a nonempty square matrix, got {}x{}",
                u.nrows(),
                u.ncols()
            )));
        }
        let n = u.nrows();
        let dev = (&u * u.transpose() - DMatrix::<f64>::identity(n, n)).amax();
        if !(dev <= ORTHO_TOL) {
            return Err(Error::Precondition(format!(
                "matrix is not orthogonal: max |U U^T - I| = {dev:e}"
            )));
        }
        Ok(SubspacePair { u })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch("rows of unequal length or non-square matrix".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Haar-distributed orthogonal matrix from the QR factorization of a
    /// Gaussian matrix with sign-corrected `R` diagonal.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Result<Self> {
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Self::new(q)
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.u
    }
}

/// How a partition was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    Greedy,
    Exhaustive,
}

/// A valid partition with its reconstruction maps. `f1` is `n1 x n` with
/// `x = x_J f1` for `x in V1`; `f2` is `(n - n1) x n` with `y = y_{J^c} f2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangePartition {
    pub j: Vec<usize>,
    pub jc: Vec<usize>,
    pub f1: DMatrix<f64>,
    pub f2: DMatrix<f64>,
    /// Largest reconstruction error over the basis rows of `V1` and `V2`.
    pub residuals: (f64, f64),
    /// Determinants of the two row-normalized blocks.
    pub dets: (f64, f64),
    pub method: SearchMethod,
}

impl ExchangePartition {
    /// `x` from its coordinates on `J`.
    pub fn reconstruct_v1(&self, x_j: &[f64]) -> Result<Vec<f64>> {
        apply(&self.f1, x_j)
    }

    /// `y` from its coordinates on `J^c`.
    pub fn reconstruct_v2(&self, y_jc: &[f64]) -> Result<Vec<f64>> {
        apply(&self.f2, y_jc)
    }
}

fn apply(f: &DMatrix<f64>, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != f.nrows() {
        return Err(Error::ShapeMismatch(format!("{} coordinates for a {}-row map", v.len(), f.nrows())));
    }
    Ok((0..f.ncols())
        .map(|c| (0..f.nrows()).map(|r| v[r] * f[(r, c)]).sum())
        .collect())
}

fn select(b: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| b[(rows[i], cols[j])])
}

fn complement(set: &[usize], n: usize) -> Vec<usize> {
    (0..n).filter(|i| !set.contains(i)).collect()
}

/// Determinant after scaling every row to unit Euclidean norm.
fn normalized_det(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let mut m = m.clone();
    for mut row in m.row_iter_mut() {
        let norm = row.norm();
        if norm == 0.0 {
            return 0.0;
        }
        row /= norm;
    }
    m.determinant()
}

/// Columns chosen by Gram-Schmidt with column pivoting on the rows `rows`
/// of `b`, i.e. the pivots of a column-pivoted QR factorization.
fn pivoted_columns(b: &DMatrix<f64>, rows: &[usize]) -> Vec<usize> {
    let mut a = select(b, rows, &(0..b.ncols()).collect::<Vec<_>>());
    let mut chosen = Vec::with_capacity(rows.len());
    for _ in 0..rows.len() {
        let Some(p) = (0..a.ncols())
            .filter(|c| !chosen.contains(c))
            .max_by(|&x, &y| a.column(x).norm().total_cmp(&a.column(y).norm()))
        else {
            break;
        };
        let norm = a.column(p).norm();
        chosen.push(p);
        if norm == 0.0 {
            continue;
        }
        let q = a.column(p) / norm;
        for c in 0..a.ncols() {
            if !chosen.contains(&c) {
                let d = q.dot(&a.column(c));
                let upd = a.column(c) - &q * d;
                a.set_column(c, &upd);
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

/// A column set `L` with `|L| = |H|` such that `B[H, L]` and `B[H^c, L^c]`
/// are both nonsingular, together with the two normalized determinants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceCertificate {
    pub l: Vec<usize>,
    pub dets: (f64, f64),
    pub method: SearchMethod,
}

/// Finds a nonzero term of the Laplace expansion of `det B` along the rows
/// `h`: greedily by pivoted elimination, then exhaustively for small `n`.
pub fn laplace_certificate(b: &DMatrix<f64>, h: &[usize]) -> Result<LaplaceCertificate> {
    let n = b.nrows();
    if b.ncols() != n || n == 0 {
        return Err(Error::ShapeMismatch(format!("expected a nonempty square matrix, got {}x{}", n, b.ncols())));
    }
    let mut rows = h.to_vec();
    rows.sort_unstable();
    rows.dedup();
    if rows.len() != h.len() || rows.iter().any(|&r| r >= n) {
        return Err(Error::OutOfRange(format!("row set {h:?} invalid for n = {n}")));
    }
    if normalized_det(b).abs() <= DET_TOL {
        return Err(Error::Precondition("matrix is singular".into()));
    }
    let hc = complement(&rows, n);
    let dets = |l: &[usize]| {
        let lc = complement(l, n);
        (normalized_det(&select(b, &rows, l)), normalized_det(&select(b, &hc, &lc)))
    };
    let ok = |d: (f64, f64)| d.0.abs() > DET_TOL && d.1.abs() > DET_TOL;
    let l = pivoted_columns(b, &rows);
    let d = dets(&l);
    if ok(d) {
        return Ok(LaplaceCertificate {
            l,
            dets: d,
            method: SearchMethod::Greedy,
        });
    }
    if n > EXHAUSTIVE_MAX_N {
        return Err(Error::Budget(format!(
            "greedy choice {l:?} has normalized minors ({:e}, {:e}) and n = {n} exceeds the exhaustive limit {EXHAUSTIVE_MAX_N}",
            d.0, d.1
        )));
    }
    let best = subsets(n, rows.len())
        .into_par_iter()
        .map(|l| {
            let d = dets(&l);
            (d.0.abs().min(d.1.abs()), l, d)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        Some((_, l, d)) if ok(d) => Ok(LaplaceCertificate {
            l,
            dets: d,
            method: SearchMethod::Exhaustive,
        }),
        Some((score, l, _)) => Err(Error::Numerical(format!(
            "no column set with both normalized minors above {DET_TOL:e}; best {l:?} reaches {score:e}"
        ))),
        None => Err(Error::Numerical("no candidate column sets".into())),
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// Partition for the split after row `n1`, with reconstruction maps.
pub fn exchange_partition(sp: &SubspacePair, n1: usize) -> Result<ExchangePartition> {
    let n = sp.dim();
    if n1 == 0 || n1 >= n {
        return Err(Error::OutOfRange(format!("n1 = {n1} outside [1, {}]", n.saturating_sub(1))));
    }
    let h: Vec<usize> = (0..n1).collect();
    let cert = laplace_certificate(&sp.u, &h)?;
    let j = cert.l;
    let jc = complement(&j, n);
    let hc: Vec<usize> = (n1..n).collect();
    let all: Vec<usize> = (0..n).collect();
    let u1 = select(&sp.u, &h, &all);
    let u2 = select(&sp.u, &hc, &all);
    let map = |u: &DMatrix<f64>, cols: &[usize]| -> Result<DMatrix<f64>> {
        let block = select(u, &(0..u.nrows()).collect::<Vec<_>>(), cols);
        let inv = block
            .try_inverse()
            .ok_or_else(|| Error::Numerical(format!("block on columns {cols:?} not invertible")))?;
        Ok(inv * u)
    };
    let f1 = map(&u1, &j)?;
    let f2 = map(&u2, &jc)?;
    let residual = |u: &DMatrix<f64>, f: &DMatrix<f64>, cols: &[usize]| {
        (0..u.nrows())
            .map(|r| {
                let coords: Vec<f64> = cols.iter().map(|&c| u[(r, c)]).collect();
                let rec = apply(f, &coords).unwrap_or_default();
                rec.iter()
                    .zip(u.row(r).iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };
    let residuals = (residual(&u1, &f1, &j), residual(&u2, &f2, &jc));
    Ok(ExchangePartition {
        j,
        jc,
        f1,
        f2,
        residuals,
        dets: cert.dets,
        method: cert.method,
    })
}

/// Sum of the Laplace expansion of `det B` along the rows `h`:
/// `sum_L (-1)^(sum H + sum L) det B[H, L] det B[H^c, L^c]` (1-based sums).
pub fn laplace_expansion(b: &DMatrix<f64>, h: &[usize]) -> Result<f64> {
    let n = b.nrows();
    if b.ncols() != n || h.iter().any(|&r| r >= n) {
        return Err(Error::ShapeMismatch("square matrix and in-range rows required".into()));
    }
    if n > EXHAUSTIVE_MAX_N {
        return Err(Error::Budget(format!("n = {n} exceeds {EXHAUSTIVE_MAX_N}")));
    }
    let mut rows = h.to_vec();
    rows.sort_unstable();
    let hc = complement(&rows, n);
    let sh: usize = rows.iter().map(|r| r + 1).sum();
    Ok(subsets(n, rows.len())
        .into_iter()
        .map(|l| {
            let sl: usize = l.iter().map(|c| c + 1).sum();
            let sign = if (sh + sl) % 2 == 0 { 1.0 } else { -1.0 };
            let lc = complement(&l, n);
            sign * select(b, &rows, &l).determinant() * select(b, &hc, &lc).determinant()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_dimensional_split() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let sp = SubspacePair::from_rows(&[vec![r, r], vec![r, -r]]).unwrap();
        let part = exchange_partition(&sp, 1).unwrap();
        assert_eq!(part.j.len(), 1);
        let x = part.reconstruct_v1(&[2.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
        let y = part.reconstruct_v2(&[if part.jc == vec![1] { -3.0 } else { 3.0 }]).unwrap();
        assert!((y[0] + y[1]).abs() < 1e-12 && (y[0].abs() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn coordinate_subspaces_give_leading_block() {
        let sp = SubspacePair::new(DMatrix::identity(5, 5)).unwrap();
        for n1 in 1..5 {
            let part = exchange_partition(&sp, n1).unwrap();
            assert_eq!(part.j, (0..n1).collect::<Vec<_>>());
            assert_eq!(part.method, SearchMethod::Greedy);
        }
    }

    #[test]
    fn rejects_non_orthogonal_and_bad_split() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(SubspacePair::new(m).is_err());
        let sp = SubspacePair::new(DMatrix::identity(3, 3)).unwrap();
        assert!(exchange_partition(&sp, 0).is_err());
        assert!(exchange_partition(&sp, 3).is_err());
    }

    #[test]
    fn random_six_against_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let sp = SubspacePair::random(6, &mut rng).unwrap();
            let part = exchange_partition(&sp, 3).unwrap();
            assert!(part.residuals.0 <= 1e-8 && part.residuals.1 <= 1e-8);
            let h = [0, 1, 2];
            let valid: Vec<Vec<usize>> = subsets(6, 3)
                .into_iter()
                .filter(|l| {
                    let lc = complement(l, 6);
                    normalized_det(&select(sp.matrix(), &h, l)).abs() > DET_TOL
                        && normalized_det(&select(sp.matrix(), &[3, 4, 5], &lc)).abs() > DET_TOL
                })
                .collect();
            assert!(valid.contains(&part.j));
        }
    }

    #[test]
    fn complementary_minors_of_orthogonal_matrix_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sp = SubspacePair::random(5, &mut rng).unwrap();
        for l in subsets(5, 2) {
            let lc = complement(&l, 5);
            let a = select(sp.matrix(), &[0, 1], &l).determinant().abs();
            let b = select(sp.matrix(), &[2, 3, 4], &lc).determinant().abs();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn laplace_certificate_identity_and_permutation() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert_eq!(laplace_certificate(&id, &[0, 1]).unwrap().l, vec![0, 1]);
        // Row i has its one in column perm[i].
        let perm = [2, 0, 3, 1];
        let p = DMatrix::from_fn(4, 4, |i, j| if perm[i] == j { 1.0 } else { 0.0 });
        assert_eq!(laplace_certificate(&p, &[0, 1]).unwrap().l, vec![0, 2]);
        assert_eq!(laplace_certificate(&p, &[1, 3]).unwrap().l, vec![0, 1]);
    }

    #[test]
    fn laplace_certificate_on_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = DMatrix::<f64>::from_fn(5, 5, |_, _| rng.sample(StandardNormal));
        let cert = laplace_certificate(&b, &[1, 3]).unwrap();
        let rows = [1, 3];
        let lc = complement(&cert.l, 5);
        assert!(select(&b, &rows, &cert.l).determinant().abs() > 1e-12);
        assert!(select(&b, &[0, 2, 4], &lc).determinant().abs() > 1e-12);
    }

    #[test]
    fn greedy_failure_falls_back_to_exhaustive() {
        // Pivoting on the first row picks column 0, whose complement block
        // is singular; the only valid choice is column 1.
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let cert = laplace_certificate(&b, &[0]).unwrap();
        assert_eq!(cert.l, vec![1]);
        assert_eq!(cert.method, SearchMethod::Exhaustive);
        assert!(laplace_certificate(&DMatrix::zeros(3, 3), &[0]).is_err());
    }

    #[test]
    fn laplace_expansion_reproduces_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=7 {
            let b = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
            let det = b.determinant();
            for k in 1..n {
                let h: Vec<usize> = (0..n).step_by(2).chain((1..n).step_by(2)).take(k).collect();
                let sum = laplace_expansion(&b, &h).unwrap();
                assert!((sum - det).abs() <= 1e-6 * det.abs().max(1e-12), "n = {n}, h = {h:?}");
            }
        }
    }
}
