//! Finite-alphabet probability primitives.
//!
//! Distributions, joint distributions, exact joint n-types, conditional
//! kernels, entropies and divergences, n-type enumeration and exact type
//! class sizes.
//!
//! Every quantity is computed internally in nats and reported in the log
//! base carried by the relevant input. Conversions between bases are
//! explicit ([`Base::from_nats`], [`Dist::with_base`]).
//!
//! ```
//! use typeflow::probcore::{Base, JointDist, info_measures};
//!
//! let j = JointDist::new(vec![vec![0.5, 0.0], vec![0.0, 0.5]], Base::Bits).unwrap();
//! let m = info_measures(&j);
//! assert!((m.i_xy - 1.0).abs() < 1e-12);
//! assert_eq!(m.h_x_given_y, 0.0);
//! ```

use std::f64::consts::LN_2;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability vector.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Logarithm base tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    #[default]
    Nats,
    Bits,
}

impl Base {
    /// Converts a value measured in nats into this base.
    pub fn from_nats(self, v: f64) -> f64 {
        match self {
            Base::Nats => v,
            Base::Bits => v / LN_2,
        }
    }

    /// Converts a value measured in this base into nats.
    pub fn to_nats(self, v: f64) -> f64 {
        match self {
            Base::Nats => v,
            Base::Bits => v * LN_2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Base::Nats => "nats",
            Base::Bits => "bits",
        }
    }
}

/// `-x ln x` with `0 ln 0 = 0`.
pub(crate) fn neg_xlnx(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

/// Shannon entropy in nats of a nonnegative vector (not renormalized).
pub(crate) fn entropy_nats(p: &[f64]) -> f64 {
    p.iter().map(|&x| neg_xlnx(x)).sum()
}

/// `(1+u) ln(1+u) - u`, accurate for small `u`.
pub(crate) fn kl_kernel(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        let u2 = u * u;
        u2 * (0.5 - u / 6.0 + u2 / 12.0 - u2 * u / 20.0 + u2 * u2 / 30.0)
    } else {
        (1.0 + u) * u.ln_1p() - u
    }
}

/// Relative entropy in nats between two probability vectors of equal length.
///
/// Uses the termwise nonnegative form `p g(q/p - 1)`, which agrees with
/// `sum q ln(q/p)` whenever both vectors have the same mass.
pub(crate) fn kl_nats(q: &[f64], p: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        if qi <= 0.0 {
            acc += pi.max(0.0);
            continue;
        }
        if pi <= 0.0 {
            return f64::INFINITY;
        }
        acc += pi * kl_kernel(qi / pi - 1.0);
    }
    acc.max(0.0)
}

fn check_entries(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution("empty probability vector".into()));
    }
    let mut sum = 0.0;
    for (i, &v) in probs.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "non-finite entry {v} at index {i}"
            )));
        }
        if v < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "negative entry {v} at index {i}"
            )));
        }
        sum += v;
    }
    Ok(sum)
}

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistRepr", into = "DistRepr")]
pub struct Dist {
    probs: Vec<f64>,
    base: Base,
}

#[derive(Serialize, Deserialize)]
struct DistRepr {
    probs: Vec<f64>,
    #[serde(default)]
    base: Base,
}

impl TryFrom<DistRepr> for Dist {
    type Error = Error;
    fn try_from(r: DistRepr) -> Result<Self> {
        Dist::new(r.probs, r.base)
    }
}

impl From<Dist> for DistRepr {
    fn from(d: Dist) -> Self {
        DistRepr {
            probs: d.probs,
            base: d.base,
        }
    }
}

impl Dist {
    /// Validates entries (finite, nonnegative, mass 1 within [`SIMPLEX_TOL`]).
    pub fn new(probs: Vec<f64>, base: Base) -> Result<Self> {
        let sum = check_entries(&probs)?;
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(Dist { probs, base })
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalize(weights: Vec<f64>, base: Base) -> Result<Self> {
        let sum = check_entries(&weights)?;
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Ok(Dist {
            probs: weights.into_iter().map(|w| w / sum).collect(),
            base,
        })
    }

    pub fn uniform(k: usize, base: Base) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        Ok(Dist {
            probs: vec![1.0 / k as f64; k],
            base,
        })
    }

    pub fn point_mass(k: usize, at: usize, base: Base) -> Result<Self> {
        if at >= k {
            return Err(Error::OutOfRange(format!("symbol {at} outside alphabet of size {k}")));
        }
        let mut probs = vec![0.0; k];
        probs[at] = 1.0;
        Ok(Dist { probs, base })
    }

    pub(crate) fn from_raw(probs: Vec<f64>, base: Base) -> Self {
        Dist { probs, base }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Indices carrying positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&i| self.probs[i] > 0.0).collect()
    }

    /// Same probabilities, different reporting base.
    pub fn with_base(&self, base: Base) -> Self {
        Dist {
            probs: self.probs.clone(),
            base,
        }
    }

    /// Shannon entropy in this distribution's base.
    pub fn entropy(&self) -> f64 {
        self.base.from_nats(entropy_nats(&self.probs))
    }

    /// Smallest positive probability.
    pub fn min_positive(&self) -> f64 {
        self.probs
            .iter()
            .copied()
            .filter(|&p| p > 0.0)
            .fold(f64::INFINITY, f64::min)
    }
}

/// A probability matrix over `X x Y`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointRepr", into = "JointRepr")]
pub struct JointDist {
    rows: usize,
    cols: usize,
    probs: Vec<f64>,
    base: Base,
}

#[derive(Serialize, Deserialize)]
struct JointRepr {
    probs: Vec<Vec<f64>>,
    #[serde(default)]
    base: Base,
}

impl TryFrom<JointRepr> for JointDist {
    type Error = Error;
    fn try_from(r: JointRepr) -> Result<Self> {
        JointDist::new(r.probs, r.base)
    }
}

impl From<JointDist> for JointRepr {
    fn from(j: JointDist) -> Self {
        JointRepr {
            probs: j.to_rows(),
            base: j.base,
        }
    }
}

fn flatten_rows<T: Copy>(rows: &[Vec<T>]) -> Result<(usize, usize, Vec<T>)> {
    let r = rows.len();
    if r == 0 {
        return Err(Error::ShapeMismatch("matrix has no rows".into()));
    }
    let c = rows[0].len();
    if c == 0 {
        return Err(Error::ShapeMismatch("matrix has no columns".into()));
    }
    let mut flat = Vec::with_capacity(r * c);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::ShapeMismatch(format!(
                "row {i} has {} entries, expected {c}",
                row.len()
            )));
        }
        flat.extend_from_slice(row);
    }
    Ok((r, c, flat))
}

impl JointDist {
    pub fn new(rows: Vec<Vec<f64>>, base: Base) -> Result<Self> {
        let (r, c, flat) = flatten_rows(&rows)?;
        Self::from_flat(r, c, flat, base)
    }

    pub fn from_flat(rows: usize, cols: usize, probs: Vec<f64>, base: Base) -> Result<Self> {
        if rows * cols != probs.len() || rows == 0 || cols == 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} entries cannot form a {rows}x{cols} matrix",
                probs.len()
            )));
        }
        let sum = check_entries(&probs)?;
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(JointDist {
            rows,
            cols,
            probs,
            base,
        })
    }

    /// Rescales a nonnegative matrix to unit mass.
    pub fn normalize(rows: Vec<Vec<f64>>, base: Base) -> Result<Self> {
        let (r, c, flat) = flatten_rows(&rows)?;
        let sum = check_entries(&flat)?;
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Ok(JointDist {
            rows: r,
            cols: c,
            probs: flat.into_iter().map(|v| v / sum).collect(),
            base,
        })
    }

    pub(crate) fn from_flat_raw(rows: usize, cols: usize, probs: Vec<f64>, base: Base) -> Self {
        JointDist {
            rows,
            cols,
            probs,
            base,
        }
    }

    /// Product distribution `px (x) py`, reported in the base of `px`.
    pub fn product(px: &Dist, py: &Dist) -> Self {
        let mut probs = Vec::with_capacity(px.len() * py.len());
        for &a in px.probs() {
            for &b in py.probs() {
                probs.push(a * b);
            }
        }
        JointDist {
            rows: px.len(),
            cols: py.len(),
            probs,
            base: px.base(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn with_base(&self, base: Base) -> Self {
        JointDist {
            base,
            ..self.clone()
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.probs[x * self.cols + y]
    }

    /// Row-major entries.
    pub fn as_flat(&self) -> &[f64] {
        &self.probs
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.probs.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    pub fn marginal_x(&self) -> Dist {
        let p = self.probs.chunks(self.cols).map(|r| r.iter().sum()).collect();
        Dist::from_raw(p, self.base)
    }

    pub fn marginal_y(&self) -> Dist {
        let mut p = vec![0.0; self.cols];
        for row in self.probs.chunks(self.cols) {
            for (acc, v) in p.iter_mut().zip(row) {
                *acc += v;
            }
        }
        Dist::from_raw(p, self.base)
    }

    /// Swaps the roles of `X` and `Y`.
    pub fn transpose(&self) -> Self {
        let mut probs = vec![0.0; self.probs.len()];
        for x in 0..self.rows {
            for y in 0..self.cols {
                probs[y * self.rows + x] = self.get(x, y);
            }
        }
        JointDist {
            rows: self.cols,
            cols: self.rows,
            probs,
            base: self.base,
        }
    }

    /// `P_{Y|X}`; rows with zero mass are set to uniform.
    pub fn y_given_x(&self) -> CondKernel {
        let rows = self
            .probs
            .chunks(self.cols)
            .map(|r| {
                let s: f64 = r.iter().sum();
                if s > 0.0 {
                    Dist::from_raw(r.iter().map(|v| v / s).collect(), self.base)
                } else {
                    Dist::from_raw(vec![1.0 / self.cols as f64; self.cols], self.base)
                }
            })
            .collect();
        CondKernel { rows }
    }

    /// `P_{X|Y}`; rows indexed by `y`.
    pub fn x_given_y(&self) -> CondKernel {
        self.transpose().y_given_x()
    }

    pub fn has_zero_entry(&self) -> bool {
        self.probs.iter().any(|&v| v <= 0.0)
    }

    /// Joint entropy in this distribution's base.
    pub fn entropy(&self) -> f64 {
        self.base.from_nats(entropy_nats(&self.probs))
    }
}

/// An exact joint n-type: a nonnegative integer matrix with total `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "NTypeRepr", into = "NTypeRepr")]
pub struct JointNType {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    n: u64,
}

#[derive(Serialize, Deserialize)]
struct NTypeRepr {
    counts: Vec<Vec<u64>>,
    n: u64,
}

impl TryFrom<NTypeRepr> for JointNType {
    type Error = Error;
    fn try_from(r: NTypeRepr) -> Result<Self> {
        JointNType::with_n(r.counts, r.n)
    }
}

impl From<JointNType> for NTypeRepr {
    fn from(t: JointNType) -> Self {
        NTypeRepr {
            counts: t.to_rows(),
            n: t.n,
        }
    }
}

impl JointNType {
    /// Builds a type from counts; `n` is the total count and must be positive.
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.iter().flatten().sum();
        Self::with_n(counts, n)
    }

    /// Builds a type and checks the counts sum to `n`.
    pub fn with_n(counts: Vec<Vec<u64>>, n: u64) -> Result<Self> {
        let (r, c, flat) = flatten_rows(&counts)?;
        let total: u64 = flat.iter().sum();
        if n == 0 {
            return Err(Error::InvalidDistribution("n must be positive".into()));
        }
        if total != n {
            return Err(Error::InvalidDistribution(format!(
                "counts sum to {total}, expected n = {n}"
            )));
        }
        Ok(JointNType {
            rows: r,
            cols: c,
            counts: flat,
            n,
        })
    }

    /// A marginal n-type, stored as a single-column joint type.
    pub fn marginal(counts: Vec<u64>) -> Result<Self> {
        Self::new(counts.into_iter().map(|c| vec![c]).collect())
    }

    pub(crate) fn from_flat_raw(rows: usize, cols: usize, counts: Vec<u64>, n: u64) -> Self {
        JointNType {
            rows,
            cols,
            counts,
            n,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn count(&self, x: usize, y: usize) -> u64 {
        self.counts[x * self.cols + y]
    }

    pub fn as_flat(&self) -> &[u64] {
        &self.counts
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    pub fn marginal_x_counts(&self) -> Vec<u64> {
        self.counts.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn marginal_y_counts(&self) -> Vec<u64> {
        let mut c = vec![0; self.cols];
        for row in self.counts.chunks(self.cols) {
            for (acc, v) in c.iter_mut().zip(row) {
                *acc += v;
            }
        }
        c
    }

    pub fn to_joint_dist(&self, base: Base) -> JointDist {
        let n = self.n as f64;
        JointDist::from_flat_raw(
            self.rows,
            self.cols,
            self.counts.iter().map(|&c| c as f64 / n).collect(),
            base,
        )
    }
}

/// A conditional distribution: one row per conditioning symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondKernel {
    rows: Vec<Dist>,
}

impl CondKernel {
    pub fn new(rows: Vec<Dist>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::ShapeMismatch("kernel has no rows".into()));
        }
        let k = rows[0].len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::ShapeMismatch("kernel rows differ in length".into()));
        }
        Ok(CondKernel { rows })
    }

    pub fn rows(&self) -> &[Dist] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Dist {
        &self.rows[i]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Output alphabet size.
    pub fn width(&self) -> usize {
        self.rows[0].len()
    }
}

/// Entropies and mutual information of a joint distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoMeasures {
    pub h_xy: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub h_x_given_y: f64,
    pub h_y_given_x: f64,
    pub i_xy: f64,
}

/// All single-letter information measures of `j`, in the base of `j`.
pub fn info_measures(j: &JointDist) -> InfoMeasures {
    let b = j.base();
    let h_xy = entropy_nats(j.as_flat());
    let h_x = entropy_nats(j.marginal_x().probs());
    let h_y = entropy_nats(j.marginal_y().probs());
    InfoMeasures {
        h_xy: b.from_nats(h_xy),
        h_x: b.from_nats(h_x),
        h_y: b.from_nats(h_y),
        h_x_given_y: b.from_nats((h_xy - h_y).max(0.0)),
        h_y_given_x: b.from_nats((h_xy - h_x).max(0.0)),
        i_xy: b.from_nats((h_x + h_y - h_xy).max(0.0)),
    }
}

/// Relative entropy `D(q || p)` in the base of `p`; `+inf` when `q` is not
/// absolutely continuous with respect to `p`.
///
/// # Panics
/// Panics if the two vectors have different lengths.
pub fn kl_div(q: &Dist, p: &Dist) -> f64 {
    assert_eq!(q.len(), p.len(), "kl_div: alphabet sizes differ");
    p.base().from_nats(kl_nats(q.probs(), p.probs()))
}

/// Conditional relative entropy `sum_w weights(w) D(k_w || reference)` in the
/// base of `reference`. Rows with zero weight are ignored.
///
/// # Panics
/// Panics if `k` has fewer rows than `weights` has entries, or if row and
/// reference lengths differ.
pub fn cond_kl(k: &CondKernel, reference: &Dist, weights: &Dist) -> f64 {
    assert!(k.len() >= weights.len(), "cond_kl: kernel has too few rows");
    let mut acc = 0.0;
    for (w, &qw) in weights.probs().iter().enumerate() {
        if qw > 0.0 {
            acc += qw * kl_div(k.row(w), reference);
        }
    }
    acc
}

/// Every composition of `n` into `parts` nonnegative parts, in lexicographic order.
pub(crate) fn compositions(n: u64, parts: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = vec![0u64; parts];
    fn rec(i: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[i] = v;
            rec(i + 1, left - v, cur, out);
        }
    }
    if parts > 0 {
        rec(0, n, &mut cur, &mut out);
    }
    out
}

fn integer_counts(d: &Dist, n: u64) -> Option<Vec<u64>> {
    let mut out = Vec::with_capacity(d.len());
    for &p in d.probs() {
        let v = p * n as f64;
        let r = v.round();
        if (v - r).abs() > 1e-9 {
            return None;
        }
        out.push(r as u64);
    }
    (out.iter().sum::<u64>() == n).then_some(out)
}

/// All n-types of the given shape: `[|X|]` for marginal types (returned as
/// single-column joint types) or `[|X|, |Y|]` for joint types.
///
/// With `fixed_marginals`, only joint types with exactly those marginals are
/// returned; marginals that are not multiples of `1/n` give an empty list.
pub fn enumerate_ntypes(
    shape: &[usize],
    n: u64,
    fixed_marginals: Option<(&Dist, &Dist)>,
) -> Result<Vec<JointNType>> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let (rows, cols) = match shape {
        [k] if *k > 0 => (*k, 1),
        [a, b] if *a > 0 && *b > 0 => (*a, *b),
        _ => {
            return Err(Error::ShapeMismatch(format!(
                "shape must be [|X|] or [|X|, |Y|] with positive sizes, got {shape:?}"
            )))
        }
    };
    let Some((mx, my)) = fixed_marginals else {
        return Ok(compositions(n, rows * cols)
            .into_iter()
            .map(|c| JointNType::from_flat_raw(rows, cols, c, n))
            .collect());
    };
    if mx.len() != rows || my.len() != cols {
        return Err(Error::ShapeMismatch("marginal lengths do not match shape".into()));
    }
    let (Some(cx), Some(cy)) = (integer_counts(mx, n), integer_counts(my, n)) else {
        return Ok(Vec::new());
    };
    let row_choices: Vec<Vec<Vec<u64>>> = cx.iter().map(|&r| compositions(r, cols)).collect();
    let mut out = Vec::new();
    let mut acc = vec![0u64; cols];
    let mut pick: Vec<usize> = vec![0; rows];
    fn rec(
        i: usize,
        choices: &[Vec<Vec<u64>>],
        target: &[u64],
        acc: &mut Vec<u64>,
        pick: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if i == choices.len() {
            if acc.as_slice() == target {
                out.push(pick.clone());
            }
            return;
        }
        for (ci, c) in choices[i].iter().enumerate() {
            if c.iter().zip(acc.iter()).zip(target).any(|((a, b), t)| a + b > *t) {
                continue;
            }
            for (a, v) in acc.iter_mut().zip(c) {
                *a += v;
            }
            pick[i] = ci;
            rec(i + 1, choices, target, acc, pick, out);
            for (a, v) in acc.iter_mut().zip(c) {
                *a -= v;
            }
        }
    }
    let mut picks = Vec::new();
    rec(0, &row_choices, &cy, &mut acc, &mut pick, &mut picks);
    for p in picks {
        let mut flat = Vec::with_capacity(rows * cols);
        for (i, &ci) in p.iter().enumerate() {
            flat.extend_from_slice(&row_choices[i][ci]);
        }
        out.push(JointNType::from_flat_raw(rows, cols, flat, n));
    }
    Ok(out)
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Exact multinomial coefficient `(sum parts)! / prod(parts!)`.
pub fn multinomial(parts: &[u64]) -> BigUint {
    let mut total = 0u64;
    let mut acc = BigUint::one();
    for &k in parts {
        total += k;
        acc *= binomial(total, k);
    }
    acc
}

/// Exact size of a type class.
///
/// Without `given`, this is the number of sequences (or sequence pairs) of
/// type `t`. With `given = Some(x)`, it is the number of `y` sequences such
/// that `(x, y)` has joint type `t`; this is zero when `x` does not have the
/// row-marginal type of `t`.
pub fn type_class_count(t: &JointNType, given: Option<&[usize]>) -> BigUint {
    match given {
        None => multinomial(t.as_flat()),
        Some(x) => {
            let mut seen = vec![0u64; t.rows()];
            for &s in x {
                if s >= t.rows() {
                    return BigUint::zero();
                }
                seen[s] += 1;
            }
            if seen != t.marginal_x_counts() {
                return BigUint::zero();
            }
            let mut acc = BigUint::one();
            for row in t.as_flat().chunks(t.cols()) {
                acc *= multinomial(row);
            }
            acc
        }
    }
}

/// Natural logarithm of a big integer (`-inf` for zero).
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_independent_measures() {
        let j = JointDist::new(vec![vec![0.25; 2]; 2], Base::Nats).unwrap();
        let m = info_measures(&j);
        assert!((m.h_xy - 2.0 * LN_2).abs() < 1e-15);
        assert!(m.i_xy.abs() < 1e-15);
    }

    #[test]
    fn diagonal_measures() {
        let j = JointDist::new(vec![vec![0.5, 0.0], vec![0.0, 0.5]], Base::Nats).unwrap();
        let m = info_measures(&j);
        assert_eq!(m.h_x_given_y, 0.0);
        assert!((m.i_xy - LN_2).abs() < 1e-15);
    }

    #[test]
    fn random_2x3_measures_match_reference() {
        // Reference values from 50-digit evaluation of the defining sums.
        let j = JointDist::new(
            vec![vec![0.1, 0.25, 0.05], vec![0.2, 0.15, 0.25]],
            Base::Nats,
        )
        .unwrap();
        let m = info_measures(&j);
        assert!((m.h_xy - 1.679_647_883_756_751_7).abs() < 1e-13);
        assert!((m.h_x - 0.673_011_667_009_256_4).abs() < 1e-13);
        assert!((m.h_y - 1.088_899_975_345_223_6).abs() < 1e-13);
        assert!((m.h_xy - (m.h_x + m.h_y_given_x)).abs() < 1e-14);
        assert!((m.h_xy - (m.h_y + m.h_x_given_y)).abs() < 1e-14);
    }

    #[test]
    fn kl_examples() {
        let q = Dist::new(vec![0.3, 0.7], Base::Nats).unwrap();
        let p = Dist::new(vec![0.5, 0.5], Base::Nats).unwrap();
        assert_eq!(kl_div(&p, &p), 0.0);
        let expected = 0.3 * 0.6f64.ln() + 0.7 * 1.4f64.ln();
        assert!((kl_div(&q, &p) - expected).abs() < 1e-15);
        assert!((kl_div(&q, &p) - 0.082_282_878_505_051_85).abs() < 1e-15);
        let a = Dist::point_mass(2, 0, Base::Nats).unwrap();
        let b = Dist::point_mass(2, 1, Base::Nats).unwrap();
        assert_eq!(kl_div(&a, &b), f64::INFINITY);
    }

    #[test]
    fn cond_kl_examples() {
        let r = Dist::new(vec![0.5, 0.5], Base::Nats).unwrap();
        let q1 = Dist::new(vec![0.3, 0.7], Base::Nats).unwrap();
        let q2 = Dist::new(vec![0.9, 0.1], Base::Nats).unwrap();
        let all_ref = CondKernel::new(vec![r.clone(), r.clone()]).unwrap();
        let w = Dist::new(vec![0.4, 0.6], Base::Nats).unwrap();
        assert_eq!(cond_kl(&all_ref, &r, &w), 0.0);
        let single = CondKernel::new(vec![q1.clone()]).unwrap();
        let one = Dist::new(vec![1.0], Base::Nats).unwrap();
        assert_eq!(cond_kl(&single, &r, &one), kl_div(&q1, &r));
        let mix = CondKernel::new(vec![q1, q2]).unwrap();
        assert!((cond_kl(&mix, &r, &w) - 0.253_751_675_703_118_98).abs() < 1e-13);
        let gated = Dist::new(vec![1.0, 0.0], Base::Nats).unwrap();
        assert!((cond_kl(&mix, &r, &gated) - 0.082_282_878_505_051_85).abs() < 1e-15);
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_ntypes(&[2], 2, None).unwrap().len(), 3);
        assert_eq!(enumerate_ntypes(&[2, 2], 2, None).unwrap().len(), 10);
        let h = Dist::new(vec![0.5, 0.5], Base::Nats).unwrap();
        let fixed = enumerate_ntypes(&[2, 2], 2, Some((&h, &h))).unwrap();
        assert_eq!(fixed.len(), 2);
        let third = Dist::new(vec![1.0 / 3.0, 2.0 / 3.0], Base::Nats).unwrap();
        assert!(enumerate_ntypes(&[2, 2], 2, Some((&third, &h))).unwrap().is_empty());
    }

    #[test]
    fn class_count_examples() {
        let tx = JointNType::marginal(vec![2, 2]).unwrap();
        assert_eq!(type_class_count(&tx, None), BigUint::from(6u32));
        let t = JointNType::new(vec![vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(type_class_count(&t, None), BigUint::from(24u32));
        assert_eq!(type_class_count(&t, Some(&[0, 0, 1, 1])), BigUint::from(4u32));
        assert_eq!(type_class_count(&t, Some(&[0, 0, 0, 1])), BigUint::zero());
    }

    #[test]
    fn conditional_count_matches_enumeration() {
        let t = JointNType::new(vec![vec![2, 1], vec![1, 3]]).unwrap();
        let x = [0usize, 1, 0, 1, 1, 0, 1];
        let mut hits = 0u64;
        for bits in 0u32..(1 << x.len()) {
            let mut c = [[0u64; 2]; 2];
            for (i, &xi) in x.iter().enumerate() {
                c[xi][((bits >> i) & 1) as usize] += 1;
            }
            if c == [[2, 1], [1, 3]] {
                hits += 1;
            }
        }
        assert_eq!(type_class_count(&t, Some(&x)), BigUint::from(hits));
    }

    #[test]
    fn json_round_trip() {
        let j: JointDist =
            serde_json::from_str(r#"{"probs": [[0.5, 0.0], [0.25, 0.25]], "base": "bits"}"#)
                .unwrap();
        assert_eq!(j.base(), Base::Bits);
        let s = serde_json::to_string(&j).unwrap();
        assert_eq!(serde_json::from_str::<JointDist>(&s).unwrap(), j);
        let t: JointNType = serde_json::from_str(r#"{"counts": [[0, 1], [1, 0]], "n": 2}"#).unwrap();
        assert_eq!(t.n(), 2);
        assert!(serde_json::from_str::<JointNType>(r#"{"counts": [[0, 1]], "n": 2}"#).is_err());
        assert!(serde_json::from_str::<JointDist>(r#"{"probs": [[0.5, 0.6]]}"#).is_err());
    }

    #[test]
    fn big_logs() {
        let x = multinomial(&[300, 300, 300]);
        let direct: f64 = (1..=900).map(|k| (k as f64).ln()).sum::<f64>()
            - 3.0 * (1..=300).map(|k| (k as f64).ln()).sum::<f64>();
        assert!((ln_biguint(&x) - direct).abs() < 1e-9);
    }
}
