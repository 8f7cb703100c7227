//! Single-letter solvers for the type-graph density exponent `E*`, the
//! auxiliary quantities `F*`, `G*` and `Upsilon*`, the biclique rate region
//! `R*`, the Han-Kobayashi region `R**` and the triangle test.
//!
//! `F*(R1, R2)` is the maximum of `H(XY|W)` over `P_XYW` with `P_XY = T` and
//! `H(X|W) <= R1`, `H(Y|W) <= R2`. Writing `T` as a mixture of atoms
//! `Q_w = P_{XY|W=w}`, this is a linear program over mixtures, solved here by
//! column generation: a pool of atoms is priced with the program's duals and
//! extended by local maximization of the reduced profit over the simplex.
//! The reported value is attained by an explicit witness and is therefore a
//! lower bound on `F*`.
//!
//! Rates and entropies are measured in the log base of the input type.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::upper_hull_1d;
use crate::lp::{Cmp, Lp, LpOutcome};
use crate::probcore::{compositions, entropy_nats, info_measures, Base, CondKernel, Dist, JointDist};

/// One-sided optimizer slack assumed by the property checks on `F*`.
pub const EPS_OPT: f64 = 1e-3;

/// A channel from `X x Y` to an auxiliary alphabet `W`, one row per cell in
/// row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryChannel {
    pub q_w_given_xy: CondKernel,
}

/// Conditional entropies induced by an auxiliary channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryEntropies {
    pub h_x_given_w: f64,
    pub h_y_given_w: f64,
    pub h_xy_given_w: f64,
}

impl AuxiliaryChannel {
    pub fn new(q_w_given_xy: CondKernel) -> Self {
        AuxiliaryChannel { q_w_given_xy }
    }

    pub fn w_size(&self) -> usize {
        self.q_w_given_xy.width()
    }

    /// `(Q_W(w), Q_{XY|W=w})` for every `w` with positive mass.
    pub fn atoms(&self, t: &JointDist) -> Result<Vec<(f64, JointDist)>> {
        let cells = t.rows() * t.cols();
        if self.q_w_given_xy.len() != cells {
            return Err(Error::ShapeMismatch(format!(
                "channel has {} rows for {} cells",
                self.q_w_given_xy.len(),
                cells
            )));
        }
        let mut out = Vec::new();
        for w in 0..self.w_size() {
            let joint: Vec<f64> = (0..cells)
                .map(|c| t.as_flat()[c] * self.q_w_given_xy.row(c).probs()[w])
                .collect();
            let mass: f64 = joint.iter().sum();
            if mass > 0.0 {
                let q = joint.into_iter().map(|v| v / mass).collect();
                out.push((mass, JointDist::from_flat_raw(t.rows(), t.cols(), q, t.base())));
            }
        }
        Ok(out)
    }

    /// `H(X|W)`, `H(Y|W)` and `H(XY|W)` under `P_XY = t`, in the base of `t`.
    pub fn entropies(&self, t: &JointDist) -> Result<AuxiliaryEntropies> {
        let mut acc = [0.0; 3];
        for (mass, q) in self.atoms(t)? {
            let m = info_measures(&q);
            acc[0] += mass * m.h_x;
            acc[1] += mass * m.h_y;
            acc[2] += mass * m.h_xy;
        }
        Ok(AuxiliaryEntropies {
            h_x_given_w: acc[0],
            h_y_given_w: acc[1],
            h_xy_given_w: acc[2],
        })
    }
}

/// A pair of rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub r1: f64,
    pub r2: f64,
}

impl RatePoint {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        if !(r1 >= 0.0 && r2 >= 0.0) || !r1.is_finite() || !r2.is_finite() {
            return Err(Error::OutOfRange(format!("rates ({r1}, {r2}) must be finite and nonnegative")));
        }
        Ok(RatePoint { r1, r2 })
    }
}

/// Finite-length slack terms of the type-graph exponent and biclique region
/// theorems, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlackTerms {
    pub eps_n: f64,
    pub eps1_n: f64,
    pub eps2_n: f64,
}

impl SlackTerms {
    pub fn new(n: u64, x_size: usize, y_size: usize) -> Self {
        let n = n as f64;
        let (x, y) = (x_size as f64, y_size as f64);
        let xy = x * y;
        SlackTerms {
            eps_n: (xy + 2.0) * xy / n * ((n + 1.0) * n.powi(6) / (x.powi(4) * y.powi(4))).ln(),
            eps1_n: xy / n * (n.powi(4) * (n + 1.0) / (16.0 * x)).ln(),
            eps2_n: xy / n * (n.powi(4) * (n + 1.0) / (16.0 * y * y)).ln(),
        }
    }
}

/// Options of the column-generation solver for `F*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FStarOptions {
    /// Upper bound on the initial simplex-grid atoms.
    pub grid_atoms: usize,
    /// Maximum pricing rounds per solve.
    pub rounds: usize,
    /// Random pricing starts per round.
    pub random_starts: usize,
    /// Pricing stops once the best reduced profit, in nats, falls below
    /// this value. The profit bounds the remaining improvement of the
    /// current pool value.
    pub gap_tol: f64,
    pub seed: u64,
}

impl Default for FStarOptions {
    fn default() -> Self {
        FStarOptions {
            grid_atoms: 300,
            rounds: 60,
            random_starts: 4,
            gap_tol: 1e-9,
            seed: 2024,
        }
    }
}

/// Output of an `F*` solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FStarSolution {
    /// Attained value, a lower bound on `F*`.
    pub value: f64,
    pub witness: AuxiliaryChannel,
    /// Largest reduced profit found by the last pricing round; zero when the
    /// local pricing search found no improving atom.
    pub pricing_gap: f64,
    pub rounds: usize,
}

/// Atom on the support cells of `T`.
#[derive(Debug, Clone)]
struct Atom {
    q: Vec<f64>,
    h: f64,
}

/// Column-generation state for `F*` of one type; the atom pool is shared by
/// successive solves.
#[derive(Debug, Clone)]
pub struct FStarSolver {
    t: JointDist,
    cells: Vec<(usize, usize)>,
    target: Vec<f64>,
    atoms: Vec<Atom>,
    lp: Lp,
    opts: FStarOptions,
    rng: ChaCha8Rng,
}

impl FStarSolver {
    pub fn new(t: &JointDist, opts: FStarOptions) -> Self {
        let cells: Vec<(usize, usize)> = (0..t.rows())
            .flat_map(|x| (0..t.cols()).map(move |y| (x, y)))
            .filter(|&(x, y)| t.get(x, y) > 0.0)
            .collect();
        let target: Vec<f64> = cells.iter().map(|&(x, y)| t.get(x, y)).collect();
        let k = cells.len();
        let mut cmp = vec![Cmp::Eq; k];
        cmp.push(Cmp::Le);
        cmp.push(Cmp::Le);
        let mut s = FStarSolver {
            t: t.clone(),
            cells,
            target,
            atoms: Vec::new(),
            lp: Lp::new(cmp),
            opts,
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
        };
        s.seed_atoms();
        s
    }

    fn seed_atoms(&mut self) {
        let k = self.cells.len();
        self.push_atom(self.target.clone());
        for c in 0..k {
            let mut q = vec![0.0; k];
            q[c] = 1.0;
            self.push_atom(q);
        }
        // Rows and columns of the type: delta_x (x) T_{Y|x} and T_{X|y} (x) delta_y.
        for by_row in [true, false] {
            let n = if by_row { self.t.rows() } else { self.t.cols() };
            for v in 0..n {
                let q: Vec<f64> = self
                    .cells
                    .iter()
                    .zip(&self.target)
                    .map(|(&(x, y), &p)| if (if by_row { x } else { y }) == v { p } else { 0.0 })
                    .collect();
                let s: f64 = q.iter().sum();
                if s > 0.0 {
                    self.push_atom(q.into_iter().map(|p| p / s).collect());
                }
            }
        }
        let mut m = 1u64;
        while k > 1 && count_compositions(m + 1, k) <= self.opts.grid_atoms as f64 {
            m += 1;
        }
        for comp in compositions(m, k) {
            self.push_atom(comp.iter().map(|&c| c as f64 / m as f64).collect());
        }
    }

    fn marginal_entropies(&self, q: &[f64]) -> (f64, f64) {
        let mut mx = vec![0.0; self.t.rows()];
        let mut my = vec![0.0; self.t.cols()];
        for (&(x, y), &v) in self.cells.iter().zip(q) {
            mx[x] += v;
            my[y] += v;
        }
        (entropy_nats(&mx), entropy_nats(&my))
    }

    fn push_atom(&mut self, q: Vec<f64>) {
        let (hx, hy) = self.marginal_entropies(&q);
        let h = entropy_nats(&q);
        let mut coeffs = q.clone();
        coeffs.push(hx);
        coeffs.push(hy);
        self.lp.add_column(-h, &coeffs);
        self.atoms.push(Atom { q, h });
    }

    /// Reduced profit `H(Q) - a H_X(Q) - b H_Y(Q) + y.Q` of an atom.
    fn profit(&self, q: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
        let (hx, hy) = self.marginal_entropies(q);
        entropy_nats(q) - a * hx - b * hy + q.iter().zip(y).map(|(u, v)| u * v).sum::<f64>()
    }

    /// Local maximization of the reduced profit by damped multiplicative
    /// updates from `start`.
    fn price_from(&self, start: &[f64], y: &[f64], a: f64, b: f64) -> (Vec<f64>, f64) {
        let k = start.len();
        let mut q: Vec<f64> = start.iter().map(|&v| v.max(1e-300)).collect();
        let s: f64 = q.iter().sum();
        q.iter_mut().for_each(|v| *v /= s);
        let mut f = self.profit(&q, y, a, b);
        let mut eta = 0.5;
        for _ in 0..400 {
            let mut mx = vec![0.0; self.t.rows()];
            let mut my = vec![0.0; self.t.cols()];
            for (&(x, yy), &v) in self.cells.iter().zip(&q) {
                mx[x] += v;
                my[yy] += v;
            }
            // Gradient of the profit plus ln q: the fixed point of the update.
            let logits: Vec<f64> = (0..k)
                .map(|c| {
                    let (x, yy) = self.cells[c];
                    y[c] + a * mx[x].max(1e-300).ln() + b * my[yy].max(1e-300).ln()
                })
                .collect();
            let mut improved = false;
            while eta > 1e-6 {
                let z: Vec<f64> = (0..k).map(|c| (1.0 - eta) * q[c].ln() + eta * logits[c]).collect();
                let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut cand: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
                let s: f64 = cand.iter().sum();
                cand.iter_mut().for_each(|v| *v = (*v / s).max(1e-300));
                let fc = self.profit(&cand, y, a, b);
                if fc >= f - 1e-15 {
                    let gain = fc - f;
                    q = cand;
                    f = fc;
                    improved = gain > 1e-14;
                    eta = (eta * 1.5).min(1.0);
                    break;
                }
                eta *= 0.5;
            }
            if !improved {
                break;
            }
        }
        for v in &mut q {
            if *v < 1e-250 {
                *v = 0.0;
            }
        }
        let s: f64 = q.iter().sum();
        q.iter_mut().for_each(|v| *v /= s);
        let f = self.profit(&q, y, a, b);
        (q, f)
    }

    /// Solves for rates given in nats.
    fn solve_nats(&mut self, r1: f64, r2: f64) -> Result<(f64, Vec<(usize, f64)>, f64, usize)> {
        let mut rhs = self.target.clone();
        rhs.push(r1);
        rhs.push(r2);
        self.lp.set_rhs(&rhs);
        let k = self.cells.len();
        let mut gap = 0.0;
        let mut rounds = 0;
        loop {
            let sol = match self.lp.minimize()? {
                LpOutcome::Optimal(s) => s,
                other => return Err(Error::Numerical(format!("mixture program ended as {other:?}"))),
            };
            if rounds >= self.opts.rounds {
                return Ok((-sol.objective, sol.support, gap, rounds));
            }
            rounds += 1;
            let y = &sol.duals[..k];
            let a = -sol.duals[k];
            let b = -sol.duals[k + 1];
            // The current columns have nonpositive profit; any start is compared
            // against zero.
            let mut starts: Vec<Vec<f64>> = sol
                .support
                .iter()
                .map(|&(j, _)| self.atoms[j].q.iter().map(|v| 0.9 * v + 0.1 / k as f64).collect())
                .collect();
            starts.push(vec![1.0 / k as f64; k]);
            let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            starts.push(y.iter().map(|v| (v - ymax).exp()).collect());
            for _ in 0..self.opts.random_starts {
                starts.push((0..k).map(|_| -self.rng.gen::<f64>().max(1e-12).ln()).collect());
            }
            let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
            for s in &starts {
                let (q, f) = self.price_from(s, y, a, b);
                if f > 1e-10 && !found.iter().any(|(p, _)| dist_inf(p, &q) < 1e-9) {
                    found.push((q, f));
                }
            }
            gap = found.iter().map(|v| v.1).fold(0.0, f64::max);
            if found.is_empty() {
                return Ok((-sol.objective, sol.support, 0.0, rounds));
            }
            if gap < self.opts.gap_tol {
                return Ok((-sol.objective, sol.support, gap, rounds));
            }
            for (q, _) in found {
                self.push_atom(q);
            }
            self.lp.set_rhs(&rhs);
        }
    }

    /// Solves `F*(R1, R2)` with rates in the base of the type.
    pub fn solve(&mut self, r: RatePoint) -> Result<FStarSolution> {
        let b = self.t.base();
        let (value, support, gap, rounds) = self.solve_nats(b.to_nats(r.r1), b.to_nats(r.r2))?;
        let cells_total = self.t.rows() * self.t.cols();
        let mut rows = vec![vec![0.0; support.len()]; cells_total];
        for (w, &(j, lambda)) in support.iter().enumerate() {
            for (c, &(x, y)) in self.cells.iter().enumerate() {
                let p = self.t.get(x, y);
                rows[x * self.t.cols() + y][w] = lambda * self.atoms[j].q[c] / p;
            }
        }
        let kernel_rows = rows
            .into_iter()
            .map(|row| {
                let s: f64 = row.iter().sum();
                if s > 0.0 {
                    Dist::normalize(row, b)
                } else {
                    Dist::uniform(support.len().max(1), b)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let value_checked: f64 = support.iter().map(|&(j, l)| l * self.atoms[j].h).sum();
        debug_assert!((value_checked - value).abs() < 1e-6);
        Ok(FStarSolution {
            value: b.from_nats(value.max(0.0)),
            witness: AuxiliaryChannel::new(CondKernel::new(kernel_rows)?),
            pricing_gap: b.from_nats(gap),
            rounds,
        })
    }

    pub fn f_star(&mut self, r: RatePoint) -> Result<f64> {
        Ok(self.solve(r)?.value)
    }

    pub fn e_star(&mut self, r: RatePoint) -> Result<f64> {
        Ok((r.r1 + r.r2 - self.f_star(r)?).max(0.0))
    }

    pub fn joint(&self) -> &JointDist {
        &self.t
    }
}

fn count_compositions(m: u64, k: usize) -> f64 {
    // C(m + k - 1, k - 1) in floating point.
    (1..k).map(|i| (m as f64 + i as f64) / i as f64).product()
}

fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `F*(R1, R2)` with its witness channel.
pub fn f_star_solution(t: &JointDist, r: RatePoint) -> Result<FStarSolution> {
    FStarSolver::new(t, FStarOptions::default()).solve(r)
}

/// `F*(R1, R2)`, a lower bound attained by an explicit auxiliary channel.
pub fn f_star(t: &JointDist, r: RatePoint) -> Result<f64> {
    Ok(f_star_solution(t, r)?.value)
}

/// `E*(R1, R2) = R1 + R2 - F*(R1, R2)`, an upper bound on the exact value.
pub fn e_star(t: &JointDist, r: RatePoint) -> Result<f64> {
    FStarSolver::new(t, FStarOptions::default()).e_star(r)
}

/// `G*(R1, R2) = H(XY) - F*(R1, R2)`, the minimum common rate of the
/// Gray-Wyner network given the private rates.
pub fn g_star(t: &JointDist, r: RatePoint) -> Result<f64> {
    let h = info_measures(t).h_xy;
    Ok((h - f_star(t, r)?).max(0.0))
}

/// `Upsilon*(E1, E2)`: the minimum of `I(XY;W)` subject to `I(X;W) >= E1`
/// and `I(Y;W) >= E2`, equal to `G*(H(X) - E1, H(Y) - E2)`.
pub fn upsilon_star(t: &JointDist, e1: f64, e2: f64) -> Result<f64> {
    let m = info_measures(t);
    let tol = 1e-12;
    if !(e1 >= -tol && e1 <= m.h_x + tol && e2 >= -tol && e2 <= m.h_y + tol) {
        return Err(Error::OutOfRange(format!(
            "(E1, E2) = ({e1}, {e2}) outside [0, {}] x [0, {}]",
            m.h_x, m.h_y
        )));
    }
    let r = RatePoint::new((m.h_x - e1).max(0.0), (m.h_y - e2).max(0.0))?;
    g_star(t, r)
}

/// Prop-3 style triangle test: `T_{X|Y}^(1/H(X|Y)) = T_{Y|X}^(1/H(Y|X))` on
/// the support, within `1e-9`.
pub fn triangle_condition(t: &JointDist) -> Result<bool> {
    let m = info_measures(t);
    let b = t.base();
    let (hxy, hyx) = (b.to_nats(m.h_x_given_y), b.to_nats(m.h_y_given_x));
    if hxy <= 1e-12 || hyx <= 1e-12 {
        return Err(Error::Precondition(
            "the triangle test needs positive conditional entropies".into(),
        ));
    }
    let px = t.marginal_x();
    let py = t.marginal_y();
    for x in 0..t.rows() {
        for y in 0..t.cols() {
            let p = t.get(x, y);
            if p <= 0.0 {
                continue;
            }
            let lhs = (p / py.probs()[y]).powf(1.0 / hxy);
            let rhs = (p / px.probs()[x]).powf(1.0 / hyx);
            if (lhs - rhs).abs() > 1e-9 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Membership in `R**`: `E*(R1, R2) <= EPS_OPT`.
pub fn hk_region_member(t: &JointDist, r: RatePoint) -> Result<bool> {
    Ok(e_star(t, r)? <= EPS_OPT)
}

/// Boundary of `R**` as `(r1, r2)` points: for each `r1` on a uniform grid of
/// `resolution` points over `[0, H(X)]`, the largest `r2` with `E* <= EPS_OPT`.
pub fn hk_region_boundary(t: &JointDist, resolution: usize) -> Result<Vec<(f64, f64)>> {
    let m = info_measures(t);
    let mut solver = FStarSolver::new(t, FStarOptions::default());
    let n = resolution.max(2);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let r1 = m.h_x * i as f64 / (n - 1) as f64;
        let (mut lo, mut hi) = (0.0, m.h_y);
        if solver.e_star(RatePoint::new(r1, hi)?)? <= EPS_OPT {
            out.push((r1, hi));
            continue;
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if solver.e_star(RatePoint::new(r1, mid)?)? <= EPS_OPT {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push((r1, lo));
    }
    Ok(out)
}

/// A point of the biclique region with the decomposition
/// `alpha P + (1 - alpha) Q = T` that certifies it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCertificate {
    pub r1: f64,
    pub r2: f64,
    pub alpha: f64,
    pub p: Option<JointDist>,
    pub q: Option<JointDist>,
}

/// Boundary polyline of `R*` from `(0, H(Y|X))` to `(H(X|Y), 0)`, with the
/// certificate of every vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicliqueRegion {
    pub boundary: Vec<RegionCertificate>,
}

impl BicliqueRegion {
    pub fn polyline(&self) -> Vec<(f64, f64)> {
        self.boundary.iter().map(|c| (c.r1, c.r2)).collect()
    }
}

/// `sum A log(A_y / A)` in nats over the support cells (the unnormalized
/// conditional entropy `alpha H_P(X|Y)` when `A = alpha P`).
fn cond_x_given_y(a: &[f64], rows: usize, cols: usize) -> f64 {
    let mut col = vec![0.0; cols];
    for x in 0..rows {
        for y in 0..cols {
            col[y] += a[x * cols + y];
        }
    }
    let mut s = 0.0;
    for x in 0..rows {
        for y in 0..cols {
            let v = a[x * cols + y];
            if v > 0.0 {
                s += v * (col[y] / v).ln();
            }
        }
    }
    s
}

fn cond_y_given_x(b: &[f64], rows: usize, cols: usize) -> f64 {
    let mut s = 0.0;
    for x in 0..rows {
        let row = &b[x * cols..(x + 1) * cols];
        let r: f64 = row.iter().sum();
        for &v in row {
            if v > 0.0 {
                s += v * (r / v).ln();
            }
        }
    }
    s
}

/// Maximizes `lambda h(A) + (1 - lambda) g(T - A)` over `0 <= A <= T` by
/// projected gradient ascent on `A = T u`, `u in [0, 1]`.
fn biclique_scalarized(t: &JointDist, lambda: f64, start: &[f64]) -> Vec<f64> {
    let (rows, cols) = (t.rows(), t.cols());
    let tf = t.as_flat();
    let k = tf.len();
    let obj = |u: &[f64]| {
        let a: Vec<f64> = (0..k).map(|c| tf[c] * u[c]).collect();
        let b: Vec<f64> = (0..k).map(|c| tf[c] * (1.0 - u[c])).collect();
        lambda * cond_x_given_y(&a, rows, cols) + (1.0 - lambda) * cond_y_given_x(&b, rows, cols)
    };
    let mut u = start.to_vec();
    let mut f = obj(&u);
    let mut step = 0.1;
    for _ in 0..3000 {
        let a: Vec<f64> = (0..k).map(|c| tf[c] * u[c]).collect();
        let b: Vec<f64> = (0..k).map(|c| tf[c] * (1.0 - u[c])).collect();
        let mut ay = vec![0.0; cols];
        let mut bx = vec![0.0; rows];
        for x in 0..rows {
            for y in 0..cols {
                ay[y] += a[x * cols + y];
                bx[x] += b[x * cols + y];
            }
        }
        let grad: Vec<f64> = (0..k)
            .map(|c| {
                if tf[c] == 0.0 {
                    return 0.0;
                }
                let (x, y) = (c / cols, c % cols);
                let ga = if a[c] > 0.0 { (ay[y] / a[c]).ln() } else { 50.0 };
                let gb = if b[c] > 0.0 { (bx[x] / b[c]).ln() } else { 50.0 };
                tf[c] * (lambda * ga - (1.0 - lambda) * gb)
            })
            .collect();
        let mut moved = false;
        while step > 1e-14 {
            let cand: Vec<f64> = (0..k).map(|c| (u[c] + step * grad[c]).clamp(0.0, 1.0)).collect();
            let fc = obj(&cand);
            if fc > f + 1e-16 {
                moved = dist_inf(&cand, &u) > 1e-15;
                u = cand;
                f = fc;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    u
}

/// Boundary of the biclique region `R*(T)`, from `resolution` scalarization
/// weights in `(0, 1)` plus the two corner decompositions. The region is the
/// downward closure of the convex hull of the returned vertices.
pub fn biclique_region_star(t: &JointDist, resolution: usize) -> Result<BicliqueRegion> {
    let (rows, cols) = (t.rows(), t.cols());
    let b = t.base();
    let tf = t.as_flat();
    let k = tf.len();
    let m = info_measures(t);
    let mut pts: Vec<RegionCertificate> = vec![
        RegionCertificate {
            r1: 0.0,
            r2: m.h_y_given_x,
            alpha: 0.0,
            p: None,
            q: Some(t.clone()),
        },
        RegionCertificate {
            r1: m.h_x_given_y,
            r2: 0.0,
            alpha: 1.0,
            p: Some(t.clone()),
            q: None,
        },
    ];
    let n = resolution.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..n {
        let lambda = (i as f64 + 0.5) / n as f64;
        let mut starts = vec![vec![0.5; k], vec![lambda; k]];
        starts.push((0..k).map(|_| rng.gen::<f64>()).collect());
        for s in starts {
            let u = biclique_scalarized(t, lambda, &s);
            let a: Vec<f64> = (0..k).map(|c| tf[c] * u[c]).collect();
            let bb: Vec<f64> = (0..k).map(|c| tf[c] * (1.0 - u[c])).collect();
            let alpha: f64 = a.iter().sum();
            let r1 = b.from_nats(cond_x_given_y(&a, rows, cols));
            let r2 = b.from_nats(cond_y_given_x(&bb, rows, cols));
            let p = (alpha > 0.0).then(|| {
                JointDist::from_flat_raw(rows, cols, a.iter().map(|v| v / alpha).collect(), b)
            });
            let q = (alpha < 1.0).then(|| {
                JointDist::from_flat_raw(rows, cols, bb.iter().map(|v| v / (1.0 - alpha)).collect(), b)
            });
            pts.push(RegionCertificate { r1, r2, alpha, p, q });
        }
    }
    pts.sort_by(|a, b| a.r1.total_cmp(&b.r1).then(b.r2.total_cmp(&a.r2)));
    let xs: Vec<f64> = pts.iter().map(|p| p.r1).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.r2).collect();
    let hull = upper_hull_1d(&xs, &ys);
    // Keep the decreasing part: from the top-left corner to the right corner.
    let mut boundary: Vec<RegionCertificate> = Vec::new();
    for i in hull {
        if boundary.last().map_or(true, |l| pts[i].r2 <= l.r2 + 1e-15) {
            boundary.push(pts[i].clone());
        }
    }
    Ok(BicliqueRegion { boundary })
}

/// Hausdorff distance between two polylines, by dense sampling of both.
pub fn polyline_hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    fn sample(p: &[(f64, f64)]) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for w in p.windows(2) {
            for i in 0..200 {
                let s = i as f64 / 200.0;
                out.push((w[0].0 + s * (w[1].0 - w[0].0), w[0].1 + s * (w[1].1 - w[0].1)));
            }
        }
        if let Some(&l) = p.last() {
            out.push(l);
        }
        out
    }
    fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let l2 = dx * dx + dy * dy;
        let s = if l2 > 0.0 {
            (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / l2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        ((p.0 - a.0 - s * dx).powi(2) + (p.1 - a.1 - s * dy).powi(2)).sqrt()
    }
    fn one_way(from: &[(f64, f64)], to: &[(f64, f64)]) -> f64 {
        sample(from)
            .into_iter()
            .map(|p| {
                if to.len() == 1 {
                    return seg_dist(p, to[0], to[0]);
                }
                to.windows(2)
                    .map(|w| seg_dist(p, w[0], w[1]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
    one_way(a, b).max(one_way(b, a))
}

/// Result of [`lemma2_harness`]. Violation counts allow the one-sided
/// optimizer slack `eps_opt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub samples: usize,
    pub eps_opt: f64,
    pub monotonicity_violations: usize,
    pub bound_violations: usize,
    pub closed_form_max_error: f64,
    pub concavity_violations: usize,
    pub lipschitz_violations: usize,
    pub max_pricing_gap: f64,
}

impl Lemma2Report {
    pub fn passed(&self) -> bool {
        self.monotonicity_violations == 0
            && self.bound_violations == 0
            && self.closed_form_max_error <= self.eps_opt
            && self.concavity_violations == 0
            && self.lipschitz_violations == 0
    }
}

/// Samples `trials` rate pairs and checks monotonicity, the upper bound
/// `min{H(XY), R1+R2, R1+H(Y|X), R2+H(X|Y)}`, the closed forms at `R1 = 0`
/// and `R2 = 0`, midpoint concavity and the `delta1 + delta2` Lipschitz bound
/// with `delta = (0.05, 0.07)` (scaled to the base of `t`).
pub fn lemma2_harness(t: &JointDist, trials: usize, seed: u64) -> Result<Lemma2Report> {
    let m = info_measures(t);
    let unit = match t.base() {
        Base::Nats => 1.0,
        Base::Bits => std::f64::consts::LOG2_E,
    };
    let (d1, d2) = (0.05 * unit, 0.07 * unit);
    let eps = EPS_OPT;
    let opts = FStarOptions {
        gap_tol: 1e-7,
        ..FStarOptions::default()
    };
    let mut solver = FStarSolver::new(t, opts);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = Lemma2Report {
        samples: trials,
        eps_opt: eps,
        monotonicity_violations: 0,
        bound_violations: 0,
        closed_form_max_error: 0.0,
        concavity_violations: 0,
        lipschitz_violations: 0,
        max_pricing_gap: 0.0,
    };
    let eval = |solver: &mut FStarSolver, r1: f64, r2: f64, gap: &mut f64| -> Result<f64> {
        let s = solver.solve(RatePoint::new(r1, r2)?)?;
        *gap = gap.max(s.pricing_gap);
        Ok(s.value)
    };
    let mut gap = 0.0;
    for _ in 0..trials {
        let r1 = rng.gen::<f64>() * m.h_x;
        let r2 = rng.gen::<f64>() * m.h_y;
        let f = eval(&mut solver, r1, r2, &mut gap)?;
        let f_r1 = eval(&mut solver, r1 + d1, r2, &mut gap)?;
        let f_r2 = eval(&mut solver, r1, r2 + d2, &mut gap)?;
        let f_both = eval(&mut solver, r1 + d1, r2 + d2, &mut gap)?;
        if f_r1 < f - eps || f_r2 < f - eps {
            rep.monotonicity_violations += 1;
        }
        let bound = m
            .h_xy
            .min(r1 + r2)
            .min(r1 + m.h_y_given_x)
            .min(r2 + m.h_x_given_y);
        if f > bound + 1e-9 {
            rep.bound_violations += 1;
        }
        let c1 = eval(&mut solver, 0.0, r2, &mut gap)?;
        let c2 = eval(&mut solver, r1, 0.0, &mut gap)?;
        rep.closed_form_max_error = rep
            .closed_form_max_error
            .max((c1 - r2.min(m.h_y_given_x)).abs())
            .max((c2 - r1.min(m.h_x_given_y)).abs());
        let s1 = rng.gen::<f64>() * m.h_x;
        let s2 = rng.gen::<f64>() * m.h_y;
        let g = eval(&mut solver, s1, s2, &mut gap)?;
        let mid = eval(&mut solver, 0.5 * (r1 + s1), 0.5 * (r2 + s2), &mut gap)?;
        if mid < 0.5 * (f + g) - eps {
            rep.concavity_violations += 1;
        }
        let inc = f_both - f;
        if inc < -eps || inc > d1 + d2 + eps {
            rep.lipschitz_violations += 1;
        }
    }
    rep.max_pricing_gap = gap;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn joint(rows: Vec<Vec<f64>>) -> JointDist {
        JointDist::new(rows, Base::Nats).unwrap()
    }

    fn dsbs_type(c: f64) -> JointDist {
        joint(vec![vec![(1.0 - c) / 2.0, c / 2.0], vec![c / 2.0, (1.0 - c) / 2.0]])
    }

    #[test]
    fn f_star_matches_independent_optimizer() {
        // Reference values from a multistart constrained optimizer over
        // channels with up to six auxiliary letters.
        let t = joint(vec![vec![0.1, 0.4], vec![0.35, 0.15]]);
        let mut s = FStarSolver::new(&t, FStarOptions::default());
        for (r1, r2, want) in [(0.3, 0.2, 0.500000000000744), (0.55, 0.5, 1.014327476720794)] {
            let sol = s.solve(RatePoint::new(r1, r2).unwrap()).unwrap();
            assert!((sol.value - want).abs() < 1e-4, "F*({r1}, {r2}) = {}", sol.value);
            let e = sol.witness.entropies(&t).unwrap();
            assert!(e.h_x_given_w <= r1 + 1e-9 && e.h_y_given_w <= r2 + 1e-9);
            assert!((e.h_xy_given_w - sol.value).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_w_point_gives_mutual_information() {
        let t = joint(vec![vec![0.1, 0.3, 0.05], vec![0.2, 0.15, 0.2]]);
        let m = info_measures(&t);
        let e = e_star(&t, RatePoint::new(m.h_x, m.h_y).unwrap()).unwrap();
        assert!((e - m.i_xy).abs() < 1e-9);
        assert!(e_star(&t, RatePoint::new(0.0, 0.0).unwrap()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn closed_forms_on_axes() {
        let t = joint(vec![vec![0.1, 0.4], vec![0.35, 0.15]]);
        let m = info_measures(&t);
        for r in [0.1, 0.3, 0.6, 0.69] {
            let f = f_star(&t, RatePoint::new(0.0, r).unwrap()).unwrap();
            assert!((f - r.min(m.h_y_given_x)).abs() < 1e-9, "r = {r}");
            let f = f_star(&t, RatePoint::new(r, 0.0).unwrap()).unwrap();
            assert!((f - r.min(m.h_x_given_y)).abs() < 1e-9, "r = {r}");
        }
    }

    #[test]
    fn independent_uniform_reaches_rate_sum() {
        // Product atoms with entropies exactly (0.3, 0.3) average to the
        // uniform product type, so F* = 0.6.
        let t = joint(vec![vec![0.25, 0.25], vec![0.25, 0.25]]);
        let sol = f_star_solution(&t, RatePoint::new(0.3, 0.3).unwrap()).unwrap();
        assert!((sol.value - 0.6).abs() < 1e-6, "{}", sol.value);
        let e = sol.witness.entropies(&t).unwrap();
        assert!(e.h_x_given_w <= 0.3 + 1e-8 && e.h_y_given_w <= 0.3 + 1e-8);
        assert!((e.h_xy_given_w - sol.value).abs() < 1e-9);
        assert!(sol.witness.w_size() <= 6);
    }

    #[test]
    fn witness_reproduces_type() {
        let t = joint(vec![vec![0.1, 0.3, 0.05], vec![0.2, 0.15, 0.2]]);
        let sol = f_star_solution(&t, RatePoint::new(0.4, 0.5).unwrap()).unwrap();
        let atoms = sol.witness.atoms(&t).unwrap();
        let mut mix = vec![0.0; 6];
        for (w, q) in &atoms {
            for (m, v) in mix.iter_mut().zip(q.as_flat()) {
                *m += w * v;
            }
        }
        for (a, b) in mix.iter().zip(t.as_flat()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn upsilon_boundary_values() {
        let t = joint(vec![vec![0.1, 0.4], vec![0.35, 0.15]]);
        let m = info_measures(&t);
        assert!(upsilon_star(&t, 0.0, 0.0).unwrap().abs() < 1e-9);
        assert!(upsilon_star(&t, m.h_x, 0.1).unwrap() >= m.h_x - 1e-9);
        assert!(upsilon_star(&t, m.h_x + 0.1, 0.0).is_err());
    }

    #[test]
    fn triangle_condition_cases() {
        assert!(triangle_condition(&dsbs_type(0.2)).unwrap());
        let uni = JointDist::from_flat(2, 3, vec![1.0 / 6.0; 6], Base::Nats).unwrap();
        assert!(triangle_condition(&uni).unwrap());
        assert!(!triangle_condition(&joint(vec![vec![0.1, 0.4], vec![0.35, 0.15]])).unwrap());
        assert!(triangle_condition(&joint(vec![vec![0.5, 0.0], vec![0.0, 0.5]])).is_err());
    }

    #[test]
    fn dsbs_biclique_region_is_triangle() {
        let t = dsbs_type(0.25);
        let m = info_measures(&t);
        let reg = biclique_region_star(&t, 20).unwrap();
        let tri = vec![(0.0, m.h_y_given_x), (m.h_x_given_y, 0.0)];
        assert!(polyline_hausdorff(&reg.polyline(), &tri) < 1e-3);
    }

    #[test]
    fn asymmetric_region_bulges_past_triangle() {
        let t = joint(vec![vec![0.1, 0.4], vec![0.35, 0.15]]);
        let reg = biclique_region_star(&t, 20).unwrap();
        let m = info_measures(&t);
        let above = reg
            .polyline()
            .iter()
            .any(|&(r1, r2)| r1 / m.h_x_given_y + r2 / m.h_y_given_x > 1.0 + 1e-4);
        assert!(above);
        for c in &reg.boundary {
            if let (Some(p), Some(q)) = (&c.p, &c.q) {
                for i in 0..4 {
                    let mixed = c.alpha * p.as_flat()[i] + (1.0 - c.alpha) * q.as_flat()[i];
                    assert!((mixed - t.as_flat()[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn hk_contains_markov_point_outside_triangle() {
        // X = W + N1, Y = W + N2 with N1, N2 ~ Bern(a) and 2a(1-a) = 1/4.
        let c: f64 = 0.25;
        let a = (1.0 - (1.0 - 2.0 * c).sqrt()) / 2.0;
        let h = -(a * a.ln() + (1.0 - a) * (1.0 - a).ln());
        let t = dsbs_type(c);
        let m = info_measures(&t);
        let r = 0.99 * h;
        assert!(2.0 * r / m.h_x_given_y > 1.0);
        assert!(hk_region_member(&t, RatePoint::new(r, r).unwrap()).unwrap());
    }

    #[test]
    fn uniform_joint_hk_region_is_rectangle() {
        let t = joint(vec![vec![0.25, 0.25], vec![0.25, 0.25]]);
        let ln2 = std::f64::consts::LN_2;
        assert!(hk_region_member(&t, RatePoint::new(ln2, ln2).unwrap()).unwrap());
        assert!(hk_region_member(&t, RatePoint::new(0.5, 0.2).unwrap()).unwrap());
    }

    #[test]
    fn slack_terms_vanish() {
        let a = SlackTerms::new(100, 2, 2);
        let b = SlackTerms::new(1_000_000, 2, 2);
        assert!(b.eps_n < a.eps_n && b.eps1_n < a.eps1_n && b.eps2_n < a.eps2_n);
        assert!(b.eps_n < 3.0);
    }

    #[test]
    fn harness_on_small_type() {
        let t = joint(vec![vec![0.1, 0.4], vec![0.35, 0.15]]);
        let rep = lemma2_harness(&t, 10, 3).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }
}
