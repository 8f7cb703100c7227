//! Dense two-phase revised simplex for problems with few rows and many columns.
//!
//! Solves `min c.x` subject to `A x (<=|>=|=) b`, `x >= 0`. The basis inverse is
//! kept as a dense matrix and updated by elementary pivots, with periodic
//! refactorization. The last optimal basis is reused as a warm start when the
//! right-hand side changes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LpSolution {
    pub objective: f64,
    /// Structural variables with positive value, as `(column, value)`.
    pub support: Vec<(usize, f64)>,
    /// Row prices `y` such that column `j` has reduced cost `c_j - y.A_j`.
    pub duals: Vec<f64>,
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;
const BLAND_AFTER: usize = 50;

#[derive(Debug, Clone)]
pub(crate) struct Lp {
    m: usize,
    cmp: Vec<Cmp>,
    cols: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    warm: Option<(Vec<usize>, Vec<f64>)>,
}

enum Var {
    Structural(usize),
    Slack(usize, f64),
    Artificial(usize),
}

struct Work<'a> {
    lp: &'a Lp,
    sign: Vec<f64>,
    b: Vec<f64>,
    slack_row: Vec<usize>,
    n_struct: usize,
    n_slack: usize,
    basis: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    pivots_since_refactor: usize,
}

impl Lp {
    pub fn new(cmp: Vec<Cmp>) -> Self {
        Lp {
            m: cmp.len(),
            cmp,
            cols: Vec::new(),
            cost: Vec::new(),
            rhs: Vec::new(),
            warm: None,
        }
    }

    pub fn add_column(&mut self, cost: f64, coeffs: &[f64]) -> usize {
        debug_assert_eq!(coeffs.len(), self.m);
        let old = self.cost.len();
        self.cols.extend_from_slice(coeffs);
        self.cost.push(cost);
        // Slack and artificial indices follow the structural columns.
        if let Some((basis, _)) = &mut self.warm {
            for j in basis.iter_mut().filter(|j| **j >= old) {
                *j += 1;
            }
        }
        self.cost.len() - 1
    }

    pub fn set_rhs(&mut self, rhs: &[f64]) {
        self.rhs = rhs.to_vec();
    }

    /// Minimizes the objective for the current right-hand side.
    pub fn minimize(&mut self) -> Result<LpOutcome> {
        assert_eq!(self.rhs.len(), self.m, "right-hand side not set");
        let sign: Vec<f64> = self
            .rhs
            .iter()
            .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
            .collect();
        let warm = self.warm.take();
        let (outcome, basis) = {
            let mut w = Work::new(self, sign.clone());
            let mut warmed = false;
            if let Some((basis, wsign)) = warm {
                if wsign == sign && w.try_warm(basis) {
                    warmed = true;
                }
            }
            if !warmed {
                w.cold_start();
                w.run(true)?;
                let infeas: f64 = w
                    .basis
                    .iter()
                    .zip(&w.xb)
                    .filter(|(&j, _)| matches!(w.var(j), Var::Artificial(_)))
                    .map(|(_, &v)| v)
                    .sum();
                if infeas > FEAS_TOL * (1.0 + w.b.iter().map(|v| v.abs()).sum::<f64>()) {
                    return Ok(LpOutcome::Infeasible);
                }
                w.drive_out_artificials();
            }
            match w.run(false)? {
                false => (LpOutcome::Unbounded, None),
                true => (LpOutcome::Optimal(w.solution()), Some(w.basis.clone())),
            }
        };
        self.warm = basis.map(|b| (b, sign));
        Ok(outcome)
    }
}

impl<'a> Work<'a> {
    fn new(lp: &'a Lp, sign: Vec<f64>) -> Self {
        let m = lp.m;
        let b: Vec<f64> = lp.rhs.iter().zip(&sign).map(|(v, s)| v * s).collect();
        let slack_row: Vec<usize> = (0..m).filter(|&i| lp.cmp[i] != Cmp::Eq).collect();
        Work {
            lp,
            n_struct: lp.cost.len(),
            n_slack: slack_row.len(),
            sign,
            b,
            slack_row,
            basis: Vec::new(),
            binv: vec![0.0; m * m],
            xb: vec![0.0; m],
            pivots_since_refactor: 0,
        }
    }

    fn var(&self, j: usize) -> Var {
        if j < self.n_struct {
            Var::Structural(j)
        } else if j < self.n_struct + self.n_slack {
            let row = self.slack_row[j - self.n_struct];
            let s = if self.lp.cmp[row] == Cmp::Le { 1.0 } else { -1.0 };
            Var::Slack(row, s * self.sign[row])
        } else {
            Var::Artificial(j - self.n_struct - self.n_slack)
        }
    }

    fn column_into(&self, j: usize, out: &mut [f64]) {
        match self.var(j) {
            Var::Structural(k) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = self.lp.cols[k * self.lp.m + i] * self.sign[i];
                }
            }
            Var::Slack(row, s) => {
                out.fill(0.0);
                out[row] = s;
            }
            Var::Artificial(row) => {
                out.fill(0.0);
                out[row] = 1.0;
            }
        }
    }

    fn cost(&self, j: usize, phase1: bool) -> f64 {
        match (self.var(j), phase1) {
            (Var::Artificial(_), true) => 1.0,
            (_, true) => 0.0,
            (Var::Structural(k), false) => self.lp.cost[k],
            (_, false) => 0.0,
        }
    }

    fn cold_start(&mut self) {
        let m = self.lp.m;
        self.basis = (0..m).map(|i| self.n_struct + self.n_slack + i).collect();
        self.binv.fill(0.0);
        for i in 0..m {
            self.binv[i * m + i] = 1.0;
        }
        self.xb = self.b.clone();
        self.pivots_since_refactor = 0;
    }

    fn try_warm(&mut self, basis: Vec<usize>) -> bool {
        if basis.len() != self.lp.m {
            return false;
        }
        self.basis = basis;
        if !self.refactor() {
            return false;
        }
        for (k, &j) in self.basis.iter().enumerate() {
            let v = self.xb[k];
            if v < -FEAS_TOL {
                return false;
            }
            if matches!(self.var(j), Var::Artificial(_)) && v > FEAS_TOL {
                return false;
            }
        }
        for v in &mut self.xb {
            *v = v.max(0.0);
        }
        true
    }

    /// Recomputes the basis inverse and basic values; false if singular.
    fn refactor(&mut self) -> bool {
        let m = self.lp.m;
        let mut a = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            self.column_into(j, &mut col);
            for i in 0..m {
                a[i * m + k] = col[i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut piv = c;
            for r in c + 1..m {
                if a[r * m + c].abs() > a[piv * m + c].abs() {
                    piv = r;
                }
            }
            if a[piv * m + c].abs() < 1e-12 {
                return false;
            }
            if piv != c {
                for k in 0..m {
                    a.swap(c * m + k, piv * m + k);
                    inv.swap(c * m + k, piv * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for i in 0..m {
            self.xb[i] = (0..m).map(|k| self.binv[i * m + k] * self.b[k]).sum();
        }
        self.pivots_since_refactor = 0;
        true
    }

    fn duals(&self, phase1: bool) -> Vec<f64> {
        let m = self.lp.m;
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost(j, phase1)).collect();
        (0..m)
            .map(|i| (0..m).map(|k| cb[k] * self.binv[k * m + i]).sum())
            .collect()
    }

    fn reduced_cost(&self, j: usize, y: &[f64], ys: &[f64], phase1: bool) -> f64 {
        match self.var(j) {
            Var::Structural(k) => {
                let col = &self.lp.cols[k * self.lp.m..(k + 1) * self.lp.m];
                let dot: f64 = col.iter().zip(ys).map(|(a, b)| a * b).sum();
                self.cost(j, phase1) - dot
            }
            Var::Slack(row, s) => -s * y[row],
            Var::Artificial(row) => self.cost(j, phase1) - y[row],
        }
    }

    /// Runs simplex iterations; returns false if unbounded.
    fn run(&mut self, phase1: bool) -> Result<bool> {
        let m = self.lp.m;
        let n_total = self.n_struct + self.n_slack + if phase1 { m } else { 0 };
        let mut in_basis = vec![false; self.n_struct + self.n_slack + m];
        for &j in &self.basis {
            in_basis[j] = true;
        }
        let cap = 50 * (n_total + m) + 1000;
        let mut degenerate_run = 0usize;
        let mut alpha = vec![0.0; m];
        let mut col = vec![0.0; m];
        for _ in 0..cap {
            let y = self.duals(phase1);
            let ys: Vec<f64> = y.iter().zip(&self.sign).map(|(a, b)| a * b).collect();
            let bland = degenerate_run >= BLAND_AFTER;
            let mut enter = None;
            let mut best = -COST_TOL;
            for j in 0..n_total {
                if in_basis[j] {
                    continue;
                }
                let d = self.reduced_cost(j, &y, &ys, phase1);
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = enter else {
                return Ok(true);
            };
            self.column_into(q, &mut col);
            for i in 0..m {
                alpha[i] = (0..m).map(|k| self.binv[i * m + k] * col[k]).sum();
            }
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..m {
                let art = matches!(self.var(self.basis[i]), Var::Artificial(_));
                let ratio = if !phase1 && art && alpha[i].abs() > PIVOT_TOL {
                    0.0
                } else if alpha[i] > PIVOT_TOL {
                    self.xb[i].max(0.0) / alpha[i]
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some(l) => {
                        if ratio < best_ratio - 1e-14 {
                            true
                        } else if ratio <= best_ratio + 1e-14 {
                            if bland {
                                self.basis[i] < self.basis[l]
                            } else {
                                alpha[i].abs() > alpha[l].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some(i);
                    best_ratio = ratio;
                }
            }
            let Some(r) = leave else {
                return Ok(false);
            };
            if best_ratio <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, q, &alpha, best_ratio);
            in_basis[self.basis[r]] = false;
            in_basis[q] = true;
            self.basis[r] = q;
            if self.pivots_since_refactor >= REFACTOR_EVERY && !self.refactor() {
                return Err(Error::Numerical("simplex basis became singular".into()));
            }
        }
        Err(Error::Numerical("simplex iteration cap reached".into()))
    }

    fn pivot(&mut self, r: usize, _q: usize, alpha: &[f64], step: f64) {
        let m = self.lp.m;
        for i in 0..m {
            if i != r {
                self.xb[i] -= step * alpha[i];
                if self.xb[i] < 0.0 && self.xb[i] > -1e-13 {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[r] = step;
        let ar = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= ar;
        }
        for i in 0..m {
            if i != r && alpha[i] != 0.0 {
                let f = alpha[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
            }
        }
        self.pivots_since_refactor += 1;
    }

    /// Replaces basic artificials at zero level by any usable column.
    fn drive_out_artificials(&mut self) {
        let m = self.lp.m;
        let mut col = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        for r in 0..m {
            if !matches!(self.var(self.basis[r]), Var::Artificial(_)) {
                continue;
            }
            let in_basis: Vec<usize> = self.basis.clone();
            for j in 0..self.n_struct + self.n_slack {
                if in_basis.contains(&j) {
                    continue;
                }
                let row_r: f64 = {
                    self.column_into(j, &mut col);
                    (0..m).map(|k| self.binv[r * m + k] * col[k]).sum()
                };
                if row_r.abs() > 1e-7 {
                    for i in 0..m {
                        alpha[i] = (0..m).map(|k| self.binv[i * m + k] * col[k]).sum();
                    }
                    let step = self.xb[r] / alpha[r];
                    self.pivot(r, j, &alpha, step);
                    self.basis[r] = j;
                    break;
                }
            }
        }
        self.refactor();
        for v in &mut self.xb {
            *v = v.max(0.0);
        }
    }

    fn solution(&self) -> LpSolution {
        let mut objective = 0.0;
        let mut support = Vec::new();
        for (k, &j) in self.basis.iter().enumerate() {
            if let Var::Structural(s) = self.var(j) {
                objective += self.lp.cost[s] * self.xb[k];
                if self.xb[k] > 0.0 {
                    support.push((s, self.xb[k]));
                }
            }
        }
        support.sort_by_key(|&(j, _)| j);
        let duals = self
            .duals(false)
            .iter()
            .zip(&self.sign)
            .map(|(a, b)| a * b)
            .collect();
        LpSolution {
            objective,
            support,
            duals,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opt(lp: &mut Lp) -> LpSolution {
        match lp.minimize().unwrap() {
            LpOutcome::Optimal(s) => s,
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn small_textbook_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let mut lp = Lp::new(vec![Cmp::Le, Cmp::Le, Cmp::Le]);
        lp.add_column(-3.0, &[1.0, 0.0, 3.0]);
        lp.add_column(-5.0, &[0.0, 2.0, 2.0]);
        lp.set_rhs(&[4.0, 12.0, 18.0]);
        let s = opt(&mut lp);
        assert!((s.objective + 36.0).abs() < 1e-12);
        assert_eq!(s.support.len(), 2);
        assert!((s.support[0].1 - 2.0).abs() < 1e-12);
        assert!((s.support[1].1 - 6.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y + 3z s.t. x + y + z = 1, y + 2z >= 1
        let mut lp = Lp::new(vec![Cmp::Eq, Cmp::Ge]);
        lp.add_column(1.0, &[1.0, 0.0]);
        lp.add_column(2.0, &[1.0, 1.0]);
        lp.add_column(3.0, &[1.0, 2.0]);
        lp.set_rhs(&[1.0, 1.0]);
        let s = opt(&mut lp);
        // Mixing x and z: z = 1/2, x = 1/2 gives 2; y alone gives 2.
        assert!((s.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = Lp::new(vec![Cmp::Le, Cmp::Ge]);
        lp.add_column(1.0, &[1.0, 1.0]);
        lp.set_rhs(&[1.0, 2.0]);
        assert_eq!(lp.minimize().unwrap(), LpOutcome::Infeasible);
        let mut lp = Lp::new(vec![Cmp::Ge]);
        lp.add_column(-1.0, &[1.0]);
        lp.set_rhs(&[1.0]);
        assert_eq!(lp.minimize().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn negative_rhs_and_redundant_rows() {
        // x + y = 1 twice, -x <= -0.25, min y
        let mut lp = Lp::new(vec![Cmp::Eq, Cmp::Eq, Cmp::Le]);
        lp.add_column(0.0, &[1.0, 1.0, -1.0]);
        lp.add_column(1.0, &[1.0, 1.0, 0.0]);
        lp.set_rhs(&[1.0, 1.0, -0.25]);
        let s = opt(&mut lp);
        assert!(s.objective.abs() < 1e-12);
    }

    #[test]
    fn warm_start_tracks_rhs_changes() {
        // Lower convex envelope of x^2 sampled at 101 points, queried at 0.3.
        let mut lp = Lp::new(vec![Cmp::Eq, Cmp::Eq]);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            lp.add_column(x * x, &[x, 1.0]);
        }
        for q in [0.3, 0.305, 0.7, 0.01] {
            lp.set_rhs(&[q, 1.0]);
            let s = opt(&mut lp);
            let lo = (q * 100.0).floor() / 100.0;
            let hi = lo + 0.01;
            let w = (q - lo) / 0.01;
            let chord = (1.0 - w) * lo * lo + w * hi * hi;
            assert!((s.objective - chord).abs() < 1e-12, "q={q}");
        }
    }

    #[test]
    fn matches_brute_force_on_random_problems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            // min c.x over the simplex with one extra <= row; optimum at a
            // vertex with at most two nonzeros, enumerated directly.
            let n = rng.gen_range(2..8);
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let cap = rng.gen_range(0.2..0.8);
            let mut lp = Lp::new(vec![Cmp::Eq, Cmp::Le]);
            for j in 0..n {
                lp.add_column(c[j], &[1.0, a[j]]);
            }
            lp.set_rhs(&[1.0, cap]);
            let mut best = f64::INFINITY;
            for i in 0..n {
                if a[i] <= cap {
                    best = best.min(c[i]);
                }
                for j in 0..n {
                    if a[i] < cap && a[j] > cap {
                        let w = (a[j] - cap) / (a[j] - a[i]);
                        best = best.min(w * c[i] + (1.0 - w) * c[j]);
                    }
                }
            }
            match lp.minimize().unwrap() {
                LpOutcome::Optimal(s) => assert!((s.objective - best).abs() < 1e-10),
                LpOutcome::Infeasible => assert!(best.is_infinite()),
                LpOutcome::Unbounded => panic!("bounded problem reported unbounded"),
            }
        }
    }
}
