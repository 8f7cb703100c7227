//! Explicit type graphs at tiny block lengths and density oracles.
//!
//! The type graph of a joint n-type `T_XY` is the bipartite graph between the
//! marginal type classes `T_{T_X}` and `T_{T_Y}` whose edges are the sequence
//! pairs of joint type exactly `T_XY`. Exact searches enumerate subsets of one
//! side and choose the best subset of the other side by degree counting; the
//! first vertex of the enumerated side is fixed because coordinate
//! permutations act transitively on each side and preserve edges.

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probcore::{binomial, ln_biguint, type_class_count, JointNType};

/// Largest marginal type class that is enumerated explicitly.
pub const MAX_SIDE: usize = 4096;
/// Default cap on `|T_{T_X}| * |T_{T_Y}|`.
pub const DEFAULT_EDGE_CAP: u64 = 1_000_000;
/// Default cap on the number of subsets visited by exact searches.
pub const DEFAULT_BUDGET: u64 = 5_000_000;

/// Bipartite type graph with bitset adjacency in both directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeGraph {
    x_vertices: Vec<Vec<u8>>,
    y_vertices: Vec<Vec<u8>>,
    x_adj: Vec<Vec<u64>>,
    y_adj: Vec<Vec<u64>>,
    joint_type: JointNType,
    n1: usize,
    n2: usize,
}

/// How a density value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Exact,
    Greedy,
}

/// Density of the subgraph induced by `a` and `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub a_size: usize,
    pub b_size: usize,
    pub edges: u64,
    pub density: f64,
    pub method: SearchMode,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl DensityReport {
    fn new(a: Vec<usize>, b: Vec<usize>, edges: u64, method: SearchMode) -> Self {
        let denom = (a.len() * b.len()) as f64;
        DensityReport {
            a_size: a.len(),
            b_size: b.len(),
            edges,
            density: edges as f64 / denom,
            method,
            a,
            b,
        }
    }
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

fn set_bit(bits: &mut [u64], i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

fn has_bit(bits: &[u64], i: usize) -> bool {
    bits[i / 64] >> (i % 64) & 1 == 1
}

fn and_count(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

/// All sequences with the given symbol counts, in lexicographic order.
pub fn type_class_sequences(counts: &[u64]) -> Vec<Vec<u8>> {
    let n: u64 = counts.iter().sum();
    let mut out = Vec::new();
    let mut left = counts.to_vec();
    let mut cur = Vec::with_capacity(n as usize);
    fn rec(left: &mut [u64], cur: &mut Vec<u8>, n: usize, out: &mut Vec<Vec<u8>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for s in 0..left.len() {
            if left[s] > 0 {
                left[s] -= 1;
                cur.push(s as u8);
                rec(left, cur, n, out);
                cur.pop();
                left[s] += 1;
            }
        }
    }
    rec(&mut left, &mut cur, n as usize, &mut out);
    out
}

fn class_size(counts: &[u64]) -> Option<u64> {
    let t = JointNType::marginal(counts.to_vec()).ok()?;
    type_class_count(&t, None).to_u64()
}

/// Builds the type graph of `t`, failing when a side exceeds [`MAX_SIDE`]
/// or the number of potential edges exceeds `cap`.
pub fn build_graph_with_cap(t: &JointNType, cap: u64) -> Result<TypeGraph> {
    if t.rows() > 255 || t.cols() > 255 {
        return Err(Error::SizeCap("alphabets larger than 255 symbols".into()));
    }
    let cx = t.marginal_x_counts();
    let cy = t.marginal_y_counts();
    let (nx, ny) = match (class_size(&cx), class_size(&cy)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::SizeCap("type class sizes overflow".into())),
    };
    if nx > MAX_SIDE as u64 || ny > MAX_SIDE as u64 || nx.saturating_mul(ny) > cap {
        return Err(Error::SizeCap(format!(
            "|T_X| = {nx}, |T_Y| = {ny}: {} potential edges exceed the cap {cap} or a side exceeds {MAX_SIDE}",
            nx.saturating_mul(ny)
        )));
    }
    let xs = type_class_sequences(&cx);
    let ys = type_class_sequences(&cy);
    let (rows, cols) = (t.rows(), t.cols());
    let target = t.as_flat();
    let x_adj: Vec<Vec<u64>> = xs
        .par_iter()
        .map(|x| {
            let mut bits = vec![0u64; words(ys.len())];
            let mut cnt = vec![0u64; rows * cols];
            for (j, y) in ys.iter().enumerate() {
                cnt.iter_mut().for_each(|c| *c = 0);
                for (a, b) in x.iter().zip(y) {
                    cnt[*a as usize * cols + *b as usize] += 1;
                }
                if cnt == target {
                    set_bit(&mut bits, j);
                }
            }
            bits
        })
        .collect();
    let mut y_adj = vec![vec![0u64; words(xs.len())]; ys.len()];
    for (i, row) in x_adj.iter().enumerate() {
        for (j, yrow) in y_adj.iter_mut().enumerate() {
            if has_bit(row, j) {
                set_bit(yrow, i);
            }
        }
    }
    let deg = |b: &Vec<u64>| b.iter().map(|w| w.count_ones() as usize).sum::<usize>();
    let n1 = x_adj.first().map(deg).unwrap_or(0);
    let n2 = y_adj.first().map(deg).unwrap_or(0);
    if x_adj.iter().any(|b| deg(b) != n1) || y_adj.iter().any(|b| deg(b) != n2) {
        return Err(Error::Numerical("type graph is not biregular".into()));
    }
    Ok(TypeGraph {
        x_vertices: xs,
        y_vertices: ys,
        x_adj,
        y_adj,
        joint_type: t.clone(),
        n1,
        n2,
    })
}

/// [`build_graph_with_cap`] with [`DEFAULT_EDGE_CAP`].
pub fn build_graph(t: &JointNType) -> Result<TypeGraph> {
    build_graph_with_cap(t, DEFAULT_EDGE_CAP)
}

impl TypeGraph {
    pub fn x_vertices(&self) -> &[Vec<u8>] {
        &self.x_vertices
    }

    pub fn y_vertices(&self) -> &[Vec<u8>] {
        &self.y_vertices
    }

    pub fn joint_type(&self) -> &JointNType {
        &self.joint_type
    }

    pub fn n(&self) -> u64 {
        self.joint_type.n()
    }

    /// Common left degree `N1 = |T_{T_{Y|X}}(x)|`.
    pub fn n1(&self) -> usize {
        self.n1
    }

    /// Common right degree `N2 = |T_{T_{X|Y}}(y)|`.
    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn adjacent(&self, x: usize, y: usize) -> bool {
        has_bit(&self.x_adj[x], y)
    }

    pub fn edge_count(&self) -> u64 {
        (self.x_vertices.len() * self.n1) as u64
    }

    /// `rho(G) = |T_{T_XY}| / (|T_{T_X}| |T_{T_Y}|)`.
    pub fn density(&self) -> f64 {
        self.edge_count() as f64 / (self.x_vertices.len() * self.y_vertices.len()) as f64
    }

    /// Number of edges between `a` and `b`.
    pub fn edges_between(&self, a: &[usize], b: &[usize]) -> u64 {
        let mut bb = vec![0u64; words(self.y_vertices.len())];
        for &j in b {
            set_bit(&mut bb, j);
        }
        a.iter().map(|&i| and_count(&self.x_adj[i], &bb) as u64).sum()
    }

    pub fn report(&self, a: Vec<usize>, b: Vec<usize>, method: SearchMode) -> DensityReport {
        let e = self.edges_between(&a, &b);
        DensityReport::new(a, b, e, method)
    }

    fn transposed(&self) -> TypeGraph {
        TypeGraph {
            x_vertices: self.y_vertices.clone(),
            y_vertices: self.x_vertices.clone(),
            x_adj: self.y_adj.clone(),
            y_adj: self.x_adj.clone(),
            joint_type: self.joint_type.clone(),
            n1: self.n2,
            n2: self.n1,
        }
    }
}

/// Best `m2` right vertices for the left set `a` (as a bitset): the top
/// counts `|a ∩ N(y)|`, ties broken by lowest index. Returns edges and set.
fn best_partner(adj_other: &[Vec<u64>], a_bits: &[u64], m2: usize) -> (u64, Vec<usize>) {
    let mut counts: Vec<(u32, usize)> = adj_other
        .iter()
        .enumerate()
        .map(|(j, row)| (and_count(row, a_bits), j))
        .collect();
    counts.sort_by(|p, q| q.0.cmp(&p.0).then(p.1.cmp(&q.1)));
    let chosen: Vec<usize> = counts[..m2].iter().map(|c| c.1).collect();
    let edges = counts[..m2].iter().map(|c| c.0 as u64).sum();
    (edges, chosen)
}

fn combos_count(n: usize, k: usize) -> u64 {
    binomial(n as u64, k as u64).to_u64().unwrap_or(u64::MAX)
}

/// Visits all `k`-subsets of `0..n` that contain 0 (or all subsets when
/// `pin_first` is false), splitting the work by the second element.
fn for_each_subset<T, F, R>(n: usize, k: usize, pin_first: bool, f: F, reduce: R) -> Option<T>
where
    T: Send,
    F: Fn(&[usize]) -> T + Sync,
    R: Fn(T, T) -> T + Sync + Send + Copy,
{
    if k == 0 || k > n {
        return None;
    }
    let (prefix, start, rest): (Vec<usize>, usize, usize) = if pin_first { (vec![0], 1, k - 1) } else { (vec![], 0, k) };
    if rest == 0 {
        return Some(f(&prefix));
    }
    (start..=n - rest)
        .into_par_iter()
        .filter_map(|first| {
            let mut idx: Vec<usize> = prefix.clone();
            idx.push(first);
            for i in 1..rest {
                idx.push(first + i);
            }
            let base = prefix.len() + 1;
            let mut acc: Option<T> = None;
            loop {
                let v = f(&idx);
                acc = Some(match acc {
                    None => v,
                    Some(a) => reduce(a, v),
                });
                // Advance the tail after `first`.
                let mut i = idx.len();
                loop {
                    if i == base {
                        return acc;
                    }
                    i -= 1;
                    let limit = n - (idx.len() - i);
                    if idx[i] < limit {
                        idx[i] += 1;
                        for j in i + 1..idx.len() {
                            idx[j] = idx[j - 1] + 1;
                        }
                        break;
                    }
                }
            }
        })
        .reduce_with(reduce)
}

fn bits_of(set: &[usize], n: usize) -> Vec<u64> {
    let mut b = vec![0u64; words(n)];
    for &i in set {
        set_bit(&mut b, i);
    }
    b
}

fn gamma_exact_oriented(g: &TypeGraph, m1: usize, m2: usize, pin: bool) -> (u64, Vec<usize>, Vec<usize>) {
    let nx = g.x_vertices.len();
    let best = for_each_subset(
        nx,
        m1,
        pin,
        |a| {
            let (e, b) = best_partner(&g.y_adj, &bits_of(a, nx), m2);
            (e, a.to_vec(), b)
        },
        |p, q| if q.0 > p.0 || (q.0 == p.0 && (q.1.clone(), q.2.clone()) < (p.1.clone(), p.2.clone())) { q } else { p },
    );
    best.expect("nonempty search")
}

fn check_sizes(g: &TypeGraph, m1: usize, m2: usize) -> Result<()> {
    let (nx, ny) = (g.x_vertices.len(), g.y_vertices.len());
    if m1 < 1 || m1 > nx || m2 < 1 || m2 > ny {
        return Err(Error::OutOfRange(format!(
            "sizes ({m1}, {m2}) outside [1, {nx}] x [1, {ny}]"
        )));
    }
    Ok(())
}

/// `Gamma_n(M1, M2)`: the maximal density of `G[A, B]` over `|A| = M1`,
/// `|B| = M2`. Exact mode enumerates subsets of the side with fewer
/// candidate subsets (one vertex pinned) within `budget`.
pub fn gamma_n_with_budget(g: &TypeGraph, m1: usize, m2: usize, mode: SearchMode, budget: u64) -> Result<DensityReport> {
    check_sizes(g, m1, m2)?;
    let (nx, ny) = (g.x_vertices.len(), g.y_vertices.len());
    match mode {
        SearchMode::Greedy => Ok(gamma_greedy(g, m1, m2)),
        SearchMode::Exact => {
            let cost_x = combos_count(nx - 1, m1 - 1);
            let cost_y = combos_count(ny - 1, m2 - 1);
            if cost_x.min(cost_y) > budget {
                return Err(Error::Budget(format!(
                    "exact search needs {} subsets, budget is {budget}; use greedy mode",
                    cost_x.min(cost_y)
                )));
            }
            if cost_x <= cost_y {
                let (e, a, b) = gamma_exact_oriented(g, m1, m2, true);
                Ok(DensityReport::new(a, b, e, SearchMode::Exact))
            } else {
                let (e, b, a) = gamma_exact_oriented(&g.transposed(), m2, m1, true);
                Ok(DensityReport::new(a, b, e, SearchMode::Exact))
            }
        }
    }
}

/// [`gamma_n_with_budget`] with [`DEFAULT_BUDGET`].
pub fn gamma_n(g: &TypeGraph, m1: usize, m2: usize, mode: SearchMode) -> Result<DensityReport> {
    gamma_n_with_budget(g, m1, m2, mode, DEFAULT_BUDGET)
}

/// Exact search without the pinned vertex; used to validate the pruning.
pub fn gamma_n_unpruned(g: &TypeGraph, m1: usize, m2: usize) -> Result<DensityReport> {
    check_sizes(g, m1, m2)?;
    let (e, a, b) = gamma_exact_oriented(g, m1, m2, false);
    Ok(DensityReport::new(a, b, e, SearchMode::Exact))
}

/// Alternating local search: start from `A`, take the best `B` for `A`, then
/// the best `A` for `B`, until the edge count stops increasing. Starts from
/// the lowest-index set and from the neighbourhood of vertex 0.
fn gamma_greedy(g: &TypeGraph, m1: usize, m2: usize) -> DensityReport {
    let (nx, ny) = (g.x_vertices.len(), g.y_vertices.len());
    let mut starts: Vec<Vec<usize>> = vec![(0..m1).collect()];
    let nb: Vec<usize> = (0..ny).filter(|&j| g.adjacent(0, j)).take(m2).collect();
    if !nb.is_empty() {
        let (_, a) = best_partner(&g.x_adj, &bits_of(&nb, ny), m1);
        starts.push(a);
    }
    let mut best: Option<(u64, Vec<usize>, Vec<usize>)> = None;
    for mut a in starts {
        let mut edges = 0;
        let mut b;
        loop {
            let (e, nb) = best_partner(&g.y_adj, &bits_of(&a, nx), m2);
            b = nb;
            let (e2, na) = best_partner(&g.x_adj, &bits_of(&b, ny), m1);
            if e2 <= edges && e <= edges {
                break;
            }
            edges = e.max(e2);
            if e2 > e {
                a = na;
            } else {
                break;
            }
        }
        let mut a_sorted = a.clone();
        a_sorted.sort_unstable();
        let mut b_sorted = b.clone();
        b_sorted.sort_unstable();
        let e = g.edges_between(&a_sorted, &b_sorted);
        if best.as_ref().map_or(true, |p| e > p.0) {
            best = Some((e, a_sorted, b_sorted));
        }
    }
    let (e, a, b) = best.expect("at least one start");
    DensityReport::new(a, b, e, SearchMode::Greedy)
}

/// Converts a rate to a set size `e^{nR}`, rejecting rates that do not give
/// an integer in `[1, max]`.
pub fn rate_to_size(rate: f64, n: u64, max: usize) -> Result<usize> {
    let m = (n as f64 * rate).exp();
    let r = m.round();
    if (m - r).abs() <= 1e-9 * m.max(1.0) && r >= 1.0 && r <= max as f64 {
        return Ok(r as usize);
    }
    let lo = (m.floor().clamp(1.0, max as f64)).ln() / n as f64;
    let hi = (m.ceil().clamp(1.0, max as f64)).ln() / n as f64;
    Err(Error::NonRepresentableRate {
        rate,
        n,
        lower: lo,
        upper: hi,
    })
}

/// Rate `ln(m) / n` of a set of size `m`.
pub fn size_to_rate(m: usize, n: u64) -> f64 {
    (m as f64).ln() / n as f64
}

/// `E_n(R1, R2) = -(1/n) ln Gamma_n(e^{nR1}, e^{nR2})` in nats.
pub fn exponent_n(g: &TypeGraph, r1: f64, r2: f64, mode: SearchMode) -> Result<(f64, DensityReport)> {
    let n = g.n();
    let m1 = rate_to_size(r1, n, g.x_vertices.len())?;
    let m2 = rate_to_size(r2, n, g.y_vertices.len())?;
    let rep = gamma_n(g, m1, m2, mode)?;
    Ok((-rep.density.ln() / n as f64, rep))
}

/// `Gamma_n(M)`: the maximal density of directed edges inside one set `A` of
/// size `M`, for graphs whose two sides coincide.
pub fn gamma_directed(g: &TypeGraph, m: usize, mode: SearchMode) -> Result<DensityReport> {
    if g.x_vertices != g.y_vertices {
        return Err(Error::Precondition(
            "the directed variant needs equal alphabets and equal marginal types".into(),
        ));
    }
    let n = g.x_vertices.len();
    check_sizes(g, m, m)?;
    let score = |a: &[usize]| -> u64 {
        let bits = bits_of(a, n);
        a.iter().map(|&i| and_count(&g.x_adj[i], &bits) as u64).sum()
    };
    match mode {
        SearchMode::Exact => {
            let cost = combos_count(n - 1, m - 1);
            if cost > DEFAULT_BUDGET {
                return Err(Error::Budget(format!(
                    "exact directed search needs {cost} subsets; use greedy mode"
                )));
            }
            let (e, a) = for_each_subset(
                n,
                m,
                true,
                |a| (score(a), a.to_vec()),
                |p, q| if q.0 > p.0 || (q.0 == p.0 && q.1 < p.1) { q } else { p },
            )
            .expect("nonempty search");
            Ok(DensityReport::new(a.clone(), a, e, SearchMode::Exact))
        }
        SearchMode::Greedy => {
            // Grow from vertex 0 by largest in+out degree into the set.
            let mut a = vec![0usize];
            while a.len() < m {
                let bits = bits_of(&a, n);
                let next = (0..n)
                    .filter(|i| !a.contains(i))
                    .max_by(|&i, &j| {
                        let si = and_count(&g.x_adj[i], &bits) + and_count(&g.y_adj[i], &bits);
                        let sj = and_count(&g.x_adj[j], &bits) + and_count(&g.y_adj[j], &bits);
                        si.cmp(&sj).then(j.cmp(&i))
                    })
                    .expect("vertices remain");
                a.push(next);
            }
            a.sort_unstable();
            let e = score(&a);
            Ok(DensityReport::new(a.clone(), a, e, SearchMode::Greedy))
        }
    }
}

/// A downward-closed set of size pairs, stored as the largest admissible
/// `M2` for each `M1` (zero when none).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeStaircase {
    pub max_m2: Vec<usize>,
    /// False when the budget stopped the search before all `M1` were done.
    pub complete: bool,
}

impl SizeStaircase {
    pub fn contains(&self, m1: usize, m2: usize) -> bool {
        m1 >= 1 && m2 >= 1 && m1 <= self.max_m2.len() && m2 <= self.max_m2[m1 - 1]
    }

    pub fn points(&self) -> Vec<(usize, usize)> {
        self.max_m2
            .iter()
            .enumerate()
            .flat_map(|(i, &m)| (1..=m).map(move |j| (i + 1, j)))
            .collect()
    }
}

fn staircase<F>(g: &TypeGraph, budget: u64, best_for: F) -> SizeStaircase
where
    F: Fn(&[u64]) -> usize + Sync,
{
    let nx = g.x_vertices.len();
    let mut max_m2 = Vec::with_capacity(nx);
    let mut spent = 0u64;
    for m1 in 1..=nx {
        let cost = combos_count(nx - 1, m1 - 1);
        spent = spent.saturating_add(cost);
        if spent > budget {
            return SizeStaircase { max_m2, complete: false };
        }
        let v = for_each_subset(nx, m1, true, |a| best_for(&bits_of(a, nx)), |p, q| p.max(q)).unwrap_or(0);
        max_m2.push(v);
    }
    SizeStaircase { max_m2, complete: true }
}

/// Size pairs `(M1, M2)` admitting a complete bipartite subgraph `A x B`.
pub fn biclique_points_n(g: &TypeGraph, budget: u64) -> SizeStaircase {
    let nx = g.x_vertices.len();
    staircase(g, budget, |a| {
        g.y_adj.iter().filter(|row| and_count(row, a) as usize == count_bits(a, nx)).count()
    })
}

/// Size pairs `(M1, M2)` admitting an edgeless pair `A x B`.
pub fn independent_set_points_n(g: &TypeGraph, budget: u64) -> SizeStaircase {
    staircase(g, budget, |a| g.y_adj.iter().filter(|row| and_count(row, a) == 0).count())
}

fn count_bits(a: &[u64], _n: usize) -> usize {
    a.iter().map(|w| w.count_ones() as usize).sum()
}

/// `Upsilon_n(E1, E2) = -(1/n) ln max P(A x B)` over `P_X(A) = e^{-nE1}`,
/// `P_Y(B) = e^{-nE2}` under the uniform distribution on the joint type
/// class, computed from `Gamma_n` with `P(A x B) = Gamma |A||B| / |T_XY|`.
pub fn upsilon_n(g: &TypeGraph, e1: f64, e2: f64, mode: SearchMode) -> Result<f64> {
    let n = g.n();
    let (nx, ny) = (g.x_vertices.len(), g.y_vertices.len());
    let r1 = size_to_rate(nx, n) - e1;
    let r2 = size_to_rate(ny, n) - e2;
    let m1 = rate_to_size(r1, n, nx)?;
    let m2 = rate_to_size(r2, n, ny)?;
    Ok(upsilon_n_sizes(g, m1, m2, mode)?.0)
}

/// `Upsilon_n` at set sizes `(M1, M2)` with the attaining density report.
pub fn upsilon_n_sizes(g: &TypeGraph, m1: usize, m2: usize, mode: SearchMode) -> Result<(f64, DensityReport)> {
    let rep = gamma_n(g, m1, m2, mode)?;
    let p = rep.edges as f64 / g.edge_count() as f64;
    Ok((-p.ln() / g.n() as f64, rep))
}

/// Conditional type-class code built from an auxiliary sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchievabilityCode {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub density: f64,
}

/// Builds `A = T_{P_{X|W}}(w)` and `B = T_{P_{Y|W}}(w)` for a joint type
/// `P_XYW` given as counts with rows indexed by `x * |Y| + y` and columns by
/// `w`. The density of `G[A, B]` lower-bounds `Gamma_n(|A|, |B|)`.
pub fn achievability_code(g: &TypeGraph, pxyw: &JointNType, w_seq: &[usize]) -> Result<AchievabilityCode> {
    let t = &g.joint_type;
    let (xs, ys) = (t.rows(), t.cols());
    if pxyw.rows() != xs * ys || pxyw.n() != t.n() {
        return Err(Error::ShapeMismatch(format!(
            "P_XYW needs {} rows and n = {}",
            xs * ys,
            t.n()
        )));
    }
    let ws = pxyw.cols();
    let mut xy = vec![0u64; xs * ys];
    let mut w_counts = vec![0u64; ws];
    for c in 0..xs * ys {
        for w in 0..ws {
            let v = pxyw.count(c, w);
            xy[c] += v;
            w_counts[w] += v;
        }
    }
    if xy != t.as_flat() {
        return Err(Error::Precondition("P_XYW does not marginalize to the type of the graph".into()));
    }
    let mut seen = vec![0u64; ws];
    for &w in w_seq {
        if w >= ws {
            return Err(Error::OutOfRange(format!("symbol {w} outside W")));
        }
        seen[w] += 1;
    }
    if seen != w_counts || w_seq.len() as u64 != t.n() {
        return Err(Error::Precondition("w_seq does not have type P_W".into()));
    }
    let mut xw = vec![0u64; xs * ws];
    let mut yw = vec![0u64; ys * ws];
    for x in 0..xs {
        for y in 0..ys {
            for w in 0..ws {
                let v = pxyw.count(x * ys + y, w);
                xw[x * ws + w] += v;
                yw[y * ws + w] += v;
            }
        }
    }
    let matches = |seq: &[u8], target: &[u64]| {
        let mut c = vec![0u64; target.len()];
        for (s, &w) in seq.iter().zip(w_seq) {
            c[*s as usize * ws + w] += 1;
        }
        c == target
    };
    let a: Vec<usize> = (0..g.x_vertices.len()).filter(|&i| matches(&g.x_vertices[i], &xw)).collect();
    let b: Vec<usize> = (0..g.y_vertices.len()).filter(|&j| matches(&g.y_vertices[j], &yw)).collect();
    let e = g.edges_between(&a, &b);
    Ok(AchievabilityCode {
        density: e as f64 / (a.len() * b.len()) as f64,
        a,
        b,
    })
}

/// `(1/n) ln |T_{T_XY}|`.
pub fn log_class_size_rate(t: &JointNType) -> f64 {
    ln_biguint(&type_class_count(t, None)) / t.n() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probcore::{enumerate_ntypes, Base, Dist};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nt(rows: Vec<Vec<u64>>) -> JointNType {
        JointNType::new(rows).unwrap()
    }

    #[test]
    fn anti_diagonal_n2() {
        let g = build_graph(&nt(vec![vec![0, 1], vec![1, 0]])).unwrap();
        assert_eq!(g.x_vertices().len(), 2);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.density(), 0.5);
        assert_eq!(gamma_n(&g, 1, 1, SearchMode::Exact).unwrap().density, 1.0);
        assert_eq!(gamma_n(&g, 2, 2, SearchMode::Exact).unwrap().density, 0.5);
        let bc = biclique_points_n(&g, DEFAULT_BUDGET);
        assert!(bc.contains(1, 1) && !bc.contains(2, 2));
    }

    #[test]
    fn product_type_n4() {
        let g = build_graph(&nt(vec![vec![1, 1], vec![1, 1]])).unwrap();
        assert!((g.density() - 24.0 / 36.0).abs() < 1e-15);
        let full = gamma_n(&g, 6, 6, SearchMode::Exact).unwrap();
        assert_eq!(full.density, g.density());
    }

    #[test]
    fn diagonal_is_matching() {
        let g = build_graph(&nt(vec![vec![1, 0], vec![0, 1]])).unwrap();
        assert_eq!((g.n1(), g.n2()), (1, 1));
        let bc = biclique_points_n(&g, DEFAULT_BUDGET);
        assert_eq!(bc.points(), vec![(1, 1)]);
        let ind = independent_set_points_n(&g, DEFAULT_BUDGET);
        assert!(ind.contains(1, 1));
    }

    #[test]
    fn trivial_full_graph_has_no_independent_pairs() {
        let g = build_graph(&nt(vec![vec![1, 0], vec![0, 0]])).unwrap();
        assert_eq!(independent_set_points_n(&g, DEFAULT_BUDGET).points(), vec![]);
    }

    #[test]
    fn degrees_match_conditional_class_sizes() {
        let t = nt(vec![vec![2, 1], vec![1, 2]]);
        let g = build_graph(&t).unwrap();
        let x0: Vec<usize> = g.x_vertices()[0].iter().map(|&s| s as usize).collect();
        assert_eq!(g.n1() as u64, type_class_count(&t, Some(&x0)).to_u64().unwrap());
    }

    #[test]
    fn pruned_search_matches_unpruned() {
        for t in [nt(vec![vec![2, 1], vec![1, 2]]), nt(vec![vec![1, 2], vec![1, 1]])] {
            let g = build_graph(&t).unwrap();
            for m1 in 1..=4 {
                for m2 in 1..=4 {
                    let a = gamma_n(&g, m1, m2, SearchMode::Exact).unwrap();
                    let b = gamma_n_unpruned(&g, m1, m2).unwrap();
                    assert_eq!(a.edges, b.edges, "({m1}, {m2})");
                    assert!(gamma_n(&g, m1, m2, SearchMode::Greedy).unwrap().edges <= a.edges);
                }
            }
        }
    }

    #[test]
    fn exact_gamma_is_monotone() {
        let g = build_graph(&nt(vec![vec![2, 1], vec![1, 1]])).unwrap();
        let (nx, ny) = (g.x_vertices().len(), g.y_vertices().len());
        let d = |a, b| gamma_n(&g, a, b, SearchMode::Exact).unwrap().density;
        for m1 in 1..nx {
            for m2 in 1..ny {
                assert!(d(m1 + 1, m2) <= d(m1, m2) + 1e-15);
                assert!(d(m1, m2 + 1) <= d(m1, m2) + 1e-15);
            }
        }
    }

    #[test]
    fn type_densities_sum_to_one() {
        let n = 5;
        let px = Dist::new(vec![0.4, 0.6], Base::Nats).unwrap();
        let py = Dist::new(vec![0.6, 0.4], Base::Nats).unwrap();
        let types = enumerate_ntypes(&[2, 2], n, Some((&px, &py))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nx = 10;
        let a: Vec<usize> = (0..nx).filter(|_| rng.gen::<bool>()).chain([0]).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let b: Vec<usize> = vec![1, 3, 4, 8];
        let total: f64 = types
            .iter()
            .map(|t| {
                let g = build_graph(t).unwrap();
                g.edges_between(&a, &b) as f64 / (a.len() * b.len()) as f64
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn directed_sandwich() {
        let g = build_graph(&nt(vec![vec![1, 1], vec![1, 1]])).unwrap();
        for m in [2usize, 4, 6] {
            let d = gamma_directed(&g, m, SearchMode::Exact).unwrap().density;
            let half = gamma_n(&g, m / 2, m / 2, SearchMode::Exact).unwrap().density;
            let full = gamma_n(&g, m, m, SearchMode::Exact).unwrap().density;
            assert!(0.25 * half <= d + 1e-15 && d <= full + 1e-15, "m = {m}");
        }
    }

    #[test]
    fn rates_must_be_representable() {
        let g = build_graph(&nt(vec![vec![1, 1], vec![1, 1]])).unwrap();
        let (e, rep) = exponent_n(&g, size_to_rate(6, 4), size_to_rate(6, 4), SearchMode::Exact).unwrap();
        assert!((e + g.density().ln() / 4.0).abs() < 1e-12);
        assert_eq!(rep.a_size, 6);
        let (e, _) = exponent_n(&g, 0.0, 0.0, SearchMode::Exact).unwrap();
        assert_eq!(e, 0.0);
        assert!(matches!(
            exponent_n(&g, 0.3, 0.0, SearchMode::Exact),
            Err(Error::NonRepresentableRate { .. })
        ));
    }

    #[test]
    fn upsilon_at_full_sets_is_zero() {
        let g = build_graph(&nt(vec![vec![2, 1], vec![0, 2]])).unwrap();
        assert!(upsilon_n(&g, 0.0, 0.0, SearchMode::Exact).unwrap().abs() < 1e-12);
    }

    #[test]
    fn matching_singletons_upsilon() {
        let t = nt(vec![vec![1, 0], vec![0, 1]]);
        let g = build_graph(&t).unwrap();
        let (u, rep) = upsilon_n_sizes(&g, 1, 1, SearchMode::Exact).unwrap();
        assert_eq!(rep.edges, 1);
        assert!((u - log_class_size_rate(&t)).abs() < 1e-15);
    }

    #[test]
    fn achievability_constructions() {
        let t = nt(vec![vec![1, 1], vec![1, 1]]);
        let g = build_graph(&t).unwrap();
        let constant = nt(vec![vec![1], vec![1], vec![1], vec![1]]);
        let code = achievability_code(&g, &constant, &[0, 0, 0, 0]).unwrap();
        assert_eq!(code.a.len(), 6);
        assert_eq!(code.density, g.density());
        let d = nt(vec![vec![1, 0], vec![0, 1]]);
        let gd = build_graph(&d).unwrap();
        let split = nt(vec![vec![1, 0], vec![0, 0], vec![0, 0], vec![0, 1]]);
        let code = achievability_code(&gd, &split, &[0, 1]).unwrap();
        assert_eq!((code.a.len(), code.b.len(), code.density), (1, 1, 1.0));
    }

    #[test]
    fn size_cap_reports_counts() {
        let t = nt(vec![vec![4, 4], vec![4, 4]]);
        let err = build_graph_with_cap(&t, 1000).unwrap_err();
        assert!(matches!(err, Error::SizeCap(ref m) if m.contains("12870")));
    }
}
