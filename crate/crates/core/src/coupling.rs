//! Minimum relative entropy couplings, the `phi`/`psi` surfaces, their
//! envelopes and the strong small-set expansion exponents.
//!
//! For a joint distribution `P` on `X x Y`:
//!
//! * `phi(s, t)` is the smallest and `psi(s, t)` the largest value of the
//!   minimum relative entropy coupling `DD(Q_X, Q_Y || P)` over marginals on
//!   the KL spheres `D(Q_X || P_X) = s`, `D(Q_Y || P_Y) = t`;
//! * `Theta_lower*(E1, E2)` is the minimum of the lower convex envelope of
//!   `phi` over `{s >= E1, t >= E2}`;
//! * `Theta_upper*(E1, E2)` is the maximum of the upper concave envelope of
//!   `psi` over `{s <= E1, t <= E2}`, with the boundary cases `E1 = 0` and
//!   `E2 = 0` given in closed form.
//!
//! Exponents and surface values are measured in the log base of `P`.
//! Envelopes are evaluated by linear programs over the sampled points, which
//! is equivalent to interpolating on the facets of the sampled hull.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{golden_max, golden_min};
use crate::lp::{Cmp, Lp, LpOutcome};
use crate::probcore::{kl_nats, Base, CondKernel, Dist, JointDist};

/// Stopping tolerance of iterative proportional fitting on marginals.
pub const IPF_TOL: f64 = 1e-11;
/// Iteration cap of iterative proportional fitting.
pub const IPF_MAX_ITERS: usize = 100_000;

/// Target marginals and reference joint distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingProblem {
    pub qx: Dist,
    pub qy: Dist,
    pub p: JointDist,
}

impl CouplingProblem {
    pub fn new(qx: Dist, qy: Dist, p: JointDist) -> Result<Self> {
        if qx.len() != p.rows() || qy.len() != p.cols() {
            return Err(Error::ShapeMismatch(format!(
                "marginals of lengths {} and {} do not match a {}x{} joint",
                qx.len(),
                qy.len(),
                p.rows(),
                p.cols()
            )));
        }
        Ok(CouplingProblem { qx, qy, p })
    }
}

/// A violated Hall condition: the `x` symbols in `x_set` carry more mass
/// under `qx` than their neighbours in the support of `p` carry under `qy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallCertificate {
    pub x_set: Vec<usize>,
    pub neighbours: Vec<usize>,
    pub mass_x: f64,
    pub mass_neighbours: f64,
}

/// Output of [`min_kl_coupling`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSolution {
    /// Minimum relative entropy in the base of `p`; `+inf` when infeasible.
    pub value: f64,
    pub coupling: Option<JointDist>,
    pub certificate: Option<HallCertificate>,
    pub iterations: usize,
    pub marginal_error: f64,
}

/// Maximum flow from `qx` to `qy` through the support of `p`; returns the
/// flow value and the source side of a minimum cut restricted to `X`.
fn support_max_flow(qx: &[f64], qy: &[f64], p: &[f64], cols: usize) -> (f64, Vec<bool>) {
    let rows = qx.len();
    // Nodes: 0 source, 1..=rows x-nodes, then y-nodes, then sink.
    let n = rows + cols + 2;
    let sink = n - 1;
    let mut cap = vec![0.0f64; n * n];
    for x in 0..rows {
        cap[1 + x] = qx[x];
        for y in 0..cols {
            if p[x * cols + y] > 0.0 {
                cap[(1 + x) * n + 1 + rows + y] = f64::INFINITY;
            }
        }
    }
    for y in 0..cols {
        cap[(1 + rows + y) * n + sink] = qy[y];
    }
    let mut flow = 0.0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[0] = 0;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if prev[v] == usize::MAX && cap[u * n + v] > 1e-15 {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[sink] == usize::MAX {
            let reach = (0..rows).map(|x| prev[1 + x] != usize::MAX).collect();
            return (flow, reach);
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = sink;
        while v != 0 {
            let u = prev[v];
            bottleneck = bottleneck.min(cap[u * n + v]);
            v = u;
        }
        let mut v = sink;
        while v != 0 {
            let u = prev[v];
            cap[u * n + v] -= bottleneck;
            cap[v * n + u] += bottleneck;
            v = u;
        }
        flow += bottleneck;
    }
}

/// Minimum of `D(Q || p)` over couplings `Q` of `qx` and `qy`, by iterative
/// proportional fitting on the support of `p` after a max-flow feasibility
/// check.
pub fn min_kl_coupling(cp: &CouplingProblem) -> Result<CouplingSolution> {
    let (rows, cols) = (cp.p.rows(), cp.p.cols());
    let qx = cp.qx.probs();
    let qy = cp.qy.probs();
    let p = cp.p.as_flat();
    let (flow, reach) = support_max_flow(qx, qy, p, cols);
    if flow < 1.0 - 1e-10 {
        let x_set: Vec<usize> = (0..rows).filter(|&x| reach[x] && qx[x] > 0.0).collect();
        let neighbours: Vec<usize> = (0..cols)
            .filter(|&y| x_set.iter().any(|&x| p[x * cols + y] > 0.0))
            .collect();
        let certificate = HallCertificate {
            mass_x: x_set.iter().map(|&x| qx[x]).sum(),
            mass_neighbours: neighbours.iter().map(|&y| qy[y]).sum(),
            x_set,
            neighbours,
        };
        return Ok(CouplingSolution {
            value: f64::INFINITY,
            coupling: None,
            certificate: Some(certificate),
            iterations: 0,
            marginal_error: f64::NAN,
        });
    }
    let (q, iterations, err) = ipf(qx, qy, p, cols);
    let value = cp.p.base().from_nats(kl_nats(&q, p));
    Ok(CouplingSolution {
        value,
        coupling: Some(JointDist::from_flat_raw(rows, cols, q, cp.p.base())),
        certificate: None,
        iterations,
        marginal_error: err,
    })
}

/// Iterative proportional fitting of `p` to the marginals; returns the
/// scaled matrix, the iteration count and the final row error.
fn ipf(qx: &[f64], qy: &[f64], p: &[f64], cols: usize) -> (Vec<f64>, usize, f64) {
    let rows = qx.len();
    let mut q: Vec<f64> = (0..rows * cols)
        .map(|i| {
            let (x, y) = (i / cols, i % cols);
            if qx[x] > 0.0 && qy[y] > 0.0 {
                p[i]
            } else {
                0.0
            }
        })
        .collect();
    let mut err = f64::INFINITY;
    let mut it = 0;
    while it < IPF_MAX_ITERS {
        it += 1;
        for x in 0..rows {
            let row = &mut q[x * cols..(x + 1) * cols];
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                let f = qx[x] / s;
                row.iter_mut().for_each(|v| *v *= f);
            }
        }
        let mut colsum = vec![0.0; cols];
        for x in 0..rows {
            for y in 0..cols {
                colsum[y] += q[x * cols + y];
            }
        }
        for y in 0..cols {
            if colsum[y] > 0.0 {
                let f = qy[y] / colsum[y];
                for x in 0..rows {
                    q[x * cols + y] *= f;
                }
            }
        }
        err = (0..rows)
            .map(|x| (q[x * cols..(x + 1) * cols].iter().sum::<f64>() - qx[x]).abs())
            .fold(0.0, f64::max);
        if err <= IPF_TOL {
            break;
        }
    }
    (q, it, err)
}

/// Minimum relative entropy coupling value in nats for raw vectors.
fn dd_nats(qx: &[f64], qy: &[f64], p: &[f64], cols: usize) -> f64 {
    let (flow, _) = support_max_flow(qx, qy, p, cols);
    if flow < 1.0 - 1e-10 {
        return f64::INFINITY;
    }
    let (q, _, _) = ipf(qx, qy, p, cols);
    kl_nats(&q, p)
}

/// One side of the KL-sphere search: a reference marginal and a basis of
/// the sum-zero subspace for tilting directions.
#[derive(Debug, Clone)]
struct SphereSide {
    p: Vec<f64>,
    basis: Vec<Vec<f64>>,
    emax: f64,
    directions: Vec<Vec<f64>>,
}

const RAY_R_MAX: f64 = 1e6;

impl SphereSide {
    fn new(p: &[f64], n_dirs: usize, seed: u64) -> Self {
        let k = p.len();
        let basis: Vec<Vec<f64>> = (1..k)
            .map(|i| {
                let norm = ((i * (i + 1)) as f64).sqrt();
                (0..k)
                    .map(|j| {
                        if j < i {
                            1.0 / norm
                        } else if j == i {
                            -(i as f64) / norm
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let pmin = p.iter().copied().fold(f64::INFINITY, f64::min);
        let d = k.saturating_sub(1);
        let mut directions = Vec::new();
        if d == 2 {
            for i in 0..n_dirs {
                let th = 2.0 * std::f64::consts::PI * i as f64 / n_dirs as f64;
                directions.push(vec![th.cos(), th.sin()]);
            }
        } else if d > 2 {
            for e in 0..k {
                let u: Vec<f64> = (0..k).map(|j| if j == e { 1.0 } else { 0.0 } - 1.0 / k as f64).collect();
                directions.push(normalize(&project(&basis, &u)));
                directions.push(normalize(&project(&basis, &u)).iter().map(|v| -v).collect());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            while directions.len() < n_dirs.max(2 * k) {
                let c: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                directions.push(normalize(&c));
            }
        }
        SphereSide {
            p: p.to_vec(),
            basis,
            emax: -pmin.ln(),
            directions,
        }
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Direction vector in `R^k` from subspace coordinates.
    fn embed(&self, c: &[f64]) -> Vec<f64> {
        let k = self.p.len();
        let mut u = vec![0.0; k];
        for (ci, b) in c.iter().zip(&self.basis) {
            for j in 0..k {
                u[j] += ci * b[j];
            }
        }
        u
    }

    /// Point of the sphere of radius `s` nats along tilting direction `c`.
    fn ray_point(&self, c: &[f64], s: f64) -> Option<Vec<f64>> {
        let u = self.embed(c);
        let umax = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let top: f64 = self
            .p
            .iter()
            .zip(&u)
            .filter(|(_, &v)| v >= umax - 1e-12)
            .map(|(p, _)| p)
            .sum();
        if s > -top.ln() - 1e-12 {
            return None;
        }
        let at = |r: f64| -> Vec<f64> {
            let w: Vec<f64> = self.p.iter().zip(&u).map(|(p, v)| p * (r * (v - umax)).exp()).collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|v| v / z).collect()
        };
        let d = |r: f64| kl_nats(&at(r), &self.p);
        let mut hi = 1.0;
        while d(hi) < s {
            hi *= 2.0;
            if hi > RAY_R_MAX {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if d(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(at(0.5 * (lo + hi)))
    }

    /// Exact sphere for a binary alphabet: up to two points.
    fn binary_points(&self, s: f64) -> Vec<Vec<f64>> {
        let p0 = self.p[0];
        let mut out = Vec::new();
        // Moving mass from symbol 1 to symbol 0 (delta > 0) or back.
        for (limit, sign) in [(1.0 - p0, 1.0), (p0, -1.0)] {
            let point = |d: f64| vec![p0 + sign * d, 1.0 - p0 - sign * d];
            let end = kl_nats(&point(limit), &self.p);
            if end < s - 1e-15 {
                continue;
            }
            let mut lo = 0.0;
            let mut hi = limit;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if kl_nats(&point(mid), &self.p) < s {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut q = point(0.5 * (lo + hi));
            for v in &mut q {
                *v = v.clamp(0.0, 1.0);
            }
            out.push(q);
        }
        out
    }

    /// Candidate sphere points `(subspace direction, point)`; the direction
    /// is empty for points that admit no refinement.
    fn candidates(&self, s: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
        if s <= 0.0 {
            return vec![(Vec::new(), self.p.clone())];
        }
        if s >= self.emax - 1e-12 {
            let pmin = self.p.iter().copied().fold(f64::INFINITY, f64::min);
            return (0..self.p.len())
                .filter(|&x| self.p[x] <= pmin * (1.0 + 1e-12))
                .map(|x| {
                    let mut q = vec![0.0; self.p.len()];
                    q[x] = 1.0;
                    (Vec::new(), q)
                })
                .collect();
        }
        if self.dim() == 1 {
            return self.binary_points(s).into_iter().map(|q| (Vec::new(), q)).collect();
        }
        self.directions
            .iter()
            .filter_map(|c| self.ray_point(c, s).map(|q| (c.clone(), q)))
            .collect()
    }
}

fn project(basis: &[Vec<f64>], u: &[f64]) -> Vec<f64> {
    basis.iter().map(|b| b.iter().zip(u).map(|(a, c)| a * c).sum()).collect()
}

fn normalize(c: &[f64]) -> Vec<f64> {
    let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    c.iter().map(|v| v / n).collect()
}

/// Hyperspherical angles of a unit vector.
fn to_angles(c: &[f64]) -> Vec<f64> {
    let d = c.len();
    let mut out = Vec::with_capacity(d.saturating_sub(1));
    for i in 0..d.saturating_sub(1) {
        let tail = c[i..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if i + 2 == d {
            out.push(c[d - 1].atan2(c[d - 2]));
        } else if tail == 0.0 {
            out.push(0.0);
        } else {
            out.push((c[i] / tail).clamp(-1.0, 1.0).acos());
        }
    }
    out
}

fn from_angles(a: &[f64]) -> Vec<f64> {
    let d = a.len() + 1;
    let mut c = vec![0.0; d];
    let mut sin_prod = 1.0;
    for i in 0..d - 1 {
        c[i] = sin_prod * a[i].cos();
        sin_prod *= a[i].sin();
    }
    c[d - 1] = sin_prod;
    c
}

/// Options of the KL-sphere search on non-binary alphabets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereSearch {
    /// Number of seed directions per side.
    pub directions: usize,
    /// Number of seed pairs refined by coordinate golden-section search.
    pub refine_starts: usize,
    pub seed: u64,
}

impl Default for SphereSearch {
    fn default() -> Self {
        SphereSearch {
            directions: 16,
            refine_starts: 2,
            seed: 2024,
        }
    }
}

/// Precomputed state for evaluating `phi` and `psi` of one joint distribution.
#[derive(Debug, Clone)]
pub struct SphereSolver {
    p: JointDist,
    x: SphereSide,
    y: SphereSide,
    opts: SphereSearch,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Goal {
    Min,
    Max,
}

impl SphereSolver {
    /// Requires both marginals of `p` to have full support.
    pub fn new(p: &JointDist, opts: SphereSearch) -> Result<Self> {
        let px = p.marginal_x();
        let py = p.marginal_y();
        if px.probs().iter().chain(py.probs()).any(|&v| v <= 0.0) {
            return Err(Error::Precondition(
                "phi and psi require marginals with full support".into(),
            ));
        }
        Ok(SphereSolver {
            x: SphereSide::new(px.probs(), opts.directions, opts.seed),
            y: SphereSide::new(py.probs(), opts.directions, opts.seed.wrapping_add(1)),
            p: p.clone(),
            opts,
        })
    }

    pub fn joint(&self) -> &JointDist {
        &self.p
    }

    /// `(E1max, E2max)` in the base of `p`.
    pub fn emax(&self) -> (f64, f64) {
        let b = self.p.base();
        (b.from_nats(self.x.emax), b.from_nats(self.y.emax))
    }

    fn to_nats_checked(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        let b = self.p.base();
        let (sn, tn) = (b.to_nats(s), b.to_nats(t));
        let tol = 1e-9;
        if !(sn >= -tol && sn <= self.x.emax + tol) || !(tn >= -tol && tn <= self.y.emax + tol) {
            let (e1, e2) = self.emax();
            return Err(Error::OutOfRange(format!(
                "(s, t) = ({s}, {t}) outside [0, {e1}] x [0, {e2}]"
            )));
        }
        Ok((sn.clamp(0.0, self.x.emax), tn.clamp(0.0, self.y.emax)))
    }

    fn dd(&self, qx: &[f64], qy: &[f64]) -> f64 {
        dd_nats(qx, qy, self.p.as_flat(), self.p.cols())
    }

    fn search(&self, s: f64, t: f64, goal: Goal) -> f64 {
        let cx = self.x.candidates(s);
        let cy = self.y.candidates(t);
        let better = |a: f64, b: f64| match goal {
            Goal::Min => a < b,
            Goal::Max => a > b,
        };
        let worst = match goal {
            Goal::Min => f64::INFINITY,
            Goal::Max => f64::NEG_INFINITY,
        };
        let mut scored: Vec<(f64, usize, usize)> = Vec::with_capacity(cx.len() * cy.len());
        for (i, (_, qx)) in cx.iter().enumerate() {
            for (j, (_, qy)) in cy.iter().enumerate() {
                scored.push((self.dd(qx, qy), i, j));
            }
        }
        scored.sort_by(|a, b| match goal {
            Goal::Min => a.0.total_cmp(&b.0),
            Goal::Max => b.0.total_cmp(&a.0),
        });
        let mut best = scored.first().map(|v| v.0).unwrap_or(worst);
        let refinable = !cx.iter().all(|c| c.0.is_empty()) || !cy.iter().all(|c| c.0.is_empty());
        if !refinable {
            return best;
        }
        for &(v0, i, j) in scored.iter().take(self.opts.refine_starts) {
            if !v0.is_finite() {
                continue;
            }
            let ax = to_angles(&cx[i].0);
            let ay = to_angles(&cy[j].0);
            let nx = if cx[i].0.is_empty() { 0 } else { ax.len() };
            let ny = if cy[j].0.is_empty() { 0 } else { ay.len() };
            let mut params: Vec<f64> = ax[..nx].iter().chain(&ay[..ny]).copied().collect();
            let eval = |prm: &[f64]| -> f64 {
                let qx = if nx > 0 {
                    self.x.ray_point(&from_angles(&prm[..nx]), s)
                } else {
                    Some(cx[i].1.clone())
                };
                let qy = if ny > 0 {
                    self.y.ray_point(&from_angles(&prm[nx..]), t)
                } else {
                    Some(cy[j].1.clone())
                };
                match (qx, qy) {
                    (Some(a), Some(b)) => self.dd(&a, &b),
                    _ => worst,
                }
            };
            let mut cur = v0;
            let mut h = std::f64::consts::PI / self.opts.directions.max(4) as f64;
            for _ in 0..3 {
                for k in 0..params.len() {
                    let base = params[k];
                    let f = |v: f64| {
                        let mut prm = params.clone();
                        prm[k] = v;
                        eval(&prm)
                    };
                    let (arg, val) = match goal {
                        Goal::Min => golden_min(f, base - h, base + h, 1e-7),
                        Goal::Max => golden_max(f, base - h, base + h, 1e-7),
                    };
                    if better(val, cur) {
                        cur = val;
                        params[k] = arg;
                    }
                }
                h *= 0.5;
            }
            if better(cur, best) {
                best = cur;
            }
        }
        best
    }

    /// `phi(s, t)` in the base of `p`.
    pub fn phi(&self, s: f64, t: f64) -> Result<f64> {
        let (sn, tn) = self.to_nats_checked(s, t)?;
        Ok(self.p.base().from_nats(self.search(sn, tn, Goal::Min)))
    }

    /// `psi(s, t)` in the base of `p`.
    pub fn psi(&self, s: f64, t: f64) -> Result<f64> {
        let (sn, tn) = self.to_nats_checked(s, t)?;
        Ok(self.p.base().from_nats(self.search(sn, tn, Goal::Max)))
    }

    /// Best seed pair `(Q_X, Q_Y)` for `phi(s, t)` without refinement, with
    /// its value in the base of `p`. Exact on binary alphabets.
    pub fn phi_pair(&self, s: f64, t: f64) -> Result<(Dist, Dist, f64)> {
        let (sn, tn) = self.to_nats_checked(s, t)?;
        let b = self.p.base();
        let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
        for (_, qx) in self.x.candidates(sn) {
            for (_, qy) in self.y.candidates(tn) {
                let v = self.dd(&qx, &qy);
                if best.as_ref().map_or(true, |bst| v < bst.2) {
                    best = Some((qx.clone(), qy, v));
                }
            }
        }
        let (qx, qy, v) = best.ok_or_else(|| Error::Numerical("empty sphere".into()))?;
        Ok((Dist::new(qx, b)?, Dist::new(qy, b)?, b.from_nats(v)))
    }

    /// Points `(s', t', value)` with `value = s'` obtained by pushing sphere
    /// points of radius `s` through `P_{Y|X}`, and symmetrically from `Y`.
    /// These are exact samples of `phi` on the curve where it attains `s`.
    fn channel_points(&self, s: f64, from_x: bool) -> Vec<(f64, f64, f64)> {
        let b = self.p.base();
        let (side, other, kernel) = if from_x {
            (&self.x, &self.y, self.p.y_given_x())
        } else {
            (&self.y, &self.x, self.p.x_given_y())
        };
        let sn = b.to_nats(s);
        side.candidates(sn)
            .into_iter()
            .map(|(_, q)| {
                let mut img = vec![0.0; other.p.len()];
                for (w, row) in q.iter().zip(kernel.rows()) {
                    for (acc, v) in img.iter_mut().zip(row.probs()) {
                        *acc += w * v;
                    }
                }
                let tn = kl_nats(&img, &other.p).min(other.emax);
                let sv = b.from_nats(kl_nats(&q, &side.p));
                let tv = b.from_nats(tn);
                if from_x {
                    (sv, tv, sv)
                } else {
                    (tv, sv, sv)
                }
            })
            .collect()
    }
}

/// `phi(s, t)` for a single point (default search options).
pub fn phi(p: &JointDist, s: f64, t: f64) -> Result<f64> {
    SphereSolver::new(p, SphereSearch::default())?.phi(s, t)
}

/// `psi(s, t)` for a single point (default search options).
pub fn psi(p: &JointDist, s: f64, t: f64) -> Result<f64> {
    SphereSolver::new(p, SphereSearch::default())?.psi(s, t)
}

/// Spacing of surface grids on `[0, Emax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Uniform,
    /// `Emax * u^2` for uniform `u`: denser near zero.
    Quadratic,
    /// Zero followed by geometric spacing from `Emax * min_frac` to `Emax`.
    Geometric { min_frac: f64 },
}

/// Grid of `n >= 2` points on `[0, emax]` including both endpoints.
pub fn axis_grid(emax: f64, n: usize, kind: GridKind) -> Vec<f64> {
    let n = n.max(2);
    match kind {
        GridKind::Uniform => (0..n).map(|i| emax * i as f64 / (n - 1) as f64).collect(),
        GridKind::Quadratic => (0..n)
            .map(|i| {
                let u = i as f64 / (n - 1) as f64;
                emax * u * u
            })
            .collect(),
        GridKind::Geometric { min_frac } => {
            let mut g = vec![0.0];
            let lo = min_frac.clamp(1e-300, 1.0).ln();
            for i in 0..n - 1 {
                let u = if n > 2 { i as f64 / (n - 2) as f64 } else { 1.0 };
                g.push(emax * (lo * (1.0 - u)).exp());
            }
            g
        }
    }
}

/// Which sampled function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Phi,
    Psi,
}

/// Lower convex or upper concave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    LowerConvex,
    UpperConcave,
}

#[derive(Debug, Clone, PartialEq)]
struct Envelope {
    kind: EnvelopeKind,
    at_samples: Vec<f64>,
    columns: Vec<usize>,
}

/// Samples `(s, t) -> value` on a rectangular grid plus optional scattered
/// extra samples, and optionally an envelope of all finite samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSurface {
    s_grid: Vec<f64>,
    t_grid: Vec<f64>,
    pts: Vec<(f64, f64, f64)>,
    base: Base,
    envelope: Option<Envelope>,
}

/// Optimal value of an envelope query with the sample points carrying the
/// optimal mixture, as `(s, t, weight)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attained {
    pub value: f64,
    pub support: Vec<(f64, f64, f64)>,
}

impl ExponentSurface {
    /// Builds a surface from grid values (`values[i * t_grid.len() + j]` is the
    /// value at `(s_grid[i], t_grid[j])`) and extra scattered samples.
    pub fn new(
        s_grid: Vec<f64>,
        t_grid: Vec<f64>,
        values: Vec<f64>,
        extra: Vec<(f64, f64, f64)>,
        base: Base,
    ) -> Result<Self> {
        if values.len() != s_grid.len() * t_grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                s_grid.len(),
                t_grid.len()
            )));
        }
        let sorted = |g: &[f64]| g.windows(2).all(|w| w[0] <= w[1]);
        if !sorted(&s_grid) || !sorted(&t_grid) {
            return Err(Error::Precondition("grids must be sorted".into()));
        }
        let mut pts = Vec::with_capacity(values.len() + extra.len());
        for (i, &s) in s_grid.iter().enumerate() {
            for (j, &t) in t_grid.iter().enumerate() {
                pts.push((s, t, values[i * t_grid.len() + j]));
            }
        }
        pts.extend(extra);
        Ok(ExponentSurface {
            s_grid,
            t_grid,
            pts,
            base,
            envelope: None,
        })
    }

    pub fn s_grid(&self) -> &[f64] {
        &self.s_grid
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn base(&self) -> Base {
        self.base
    }

    /// Value at grid node `(i, j)`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.pts[i * self.t_grid.len() + j].2
    }

    /// All samples, grid first.
    pub fn samples(&self) -> &[(f64, f64, f64)] {
        &self.pts
    }

    pub fn envelope_kind(&self) -> Option<EnvelopeKind> {
        self.envelope.as_ref().map(|e| e.kind)
    }

    /// Envelope value at grid node `(i, j)`, if an envelope was computed.
    pub fn envelope_value(&self, i: usize, j: usize) -> Option<f64> {
        self.envelope
            .as_ref()
            .map(|e| e.at_samples[i * self.t_grid.len() + j])
    }

    fn lp_over(&self, cols: &[usize], cmp: [Cmp; 3], sign: f64) -> Lp {
        let mut lp = Lp::new(cmp.to_vec());
        for &c in cols {
            let (s, t, v) = self.pts[c];
            lp.add_column(sign * v, &[s, t, 1.0]);
        }
        lp
    }

    fn finite_columns(&self) -> Vec<usize> {
        (0..self.pts.len()).filter(|&i| self.pts[i].2.is_finite()).collect()
    }

    fn with_envelope(&self, kind: EnvelopeKind) -> Result<Self> {
        let cols = self.finite_columns();
        if cols.len() < 3 {
            return Err(Error::Precondition("an envelope needs at least 3 finite samples".into()));
        }
        let sign = match kind {
            EnvelopeKind::LowerConvex => 1.0,
            EnvelopeKind::UpperConcave => -1.0,
        };
        let mut lp = self.lp_over(&cols, [Cmp::Eq, Cmp::Eq, Cmp::Eq], sign);
        let mut at = vec![f64::NAN; self.pts.len()];
        for &c in &cols {
            let (s, t, v) = self.pts[c];
            lp.set_rhs(&[s, t, 1.0]);
            at[c] = match lp.minimize()? {
                LpOutcome::Optimal(sol) => sign * sol.objective,
                _ => v,
            };
        }
        let keep: Vec<usize> = cols
            .into_iter()
            .filter(|&c| (self.pts[c].2 - at[c]).abs() <= 1e-12 * (1.0 + at[c].abs()))
            .collect();
        let mut out = self.clone();
        out.envelope = Some(Envelope {
            kind,
            at_samples: at,
            columns: keep,
        });
        Ok(out)
    }

    fn query(&self, rhs: [f64; 3], cmp: [Cmp; 3]) -> Result<Option<Attained>> {
        let env = self
            .envelope
            .as_ref()
            .ok_or_else(|| Error::Precondition("surface has no envelope".into()))?;
        let sign = match env.kind {
            EnvelopeKind::LowerConvex => 1.0,
            EnvelopeKind::UpperConcave => -1.0,
        };
        let mut lp = self.lp_over(&env.columns, cmp, sign);
        lp.set_rhs(&rhs);
        Ok(match lp.minimize()? {
            LpOutcome::Optimal(sol) => Some(Attained {
                value: sign * sol.objective,
                support: sol
                    .support
                    .iter()
                    .map(|&(j, w)| {
                        let (s, t, _) = self.pts[env.columns[j]];
                        (s, t, w)
                    })
                    .collect(),
            }),
            _ => None,
        })
    }

    /// Envelope at an arbitrary point of the sampled hull.
    pub fn envelope_at(&self, s: f64, t: f64) -> Result<Option<f64>> {
        Ok(self
            .query([s, t, 1.0], [Cmp::Eq, Cmp::Eq, Cmp::Eq])?
            .map(|a| a.value))
    }

    /// Lower envelope: minimum over `{s >= e1, t >= e2}`. Upper envelope:
    /// maximum over `{s <= e1, t <= e2}`.
    pub fn quadrant_extreme(&self, e1: f64, e2: f64) -> Result<Option<Attained>> {
        let cmp = match self.envelope_kind() {
            Some(EnvelopeKind::LowerConvex) => Cmp::Ge,
            Some(EnvelopeKind::UpperConcave) => Cmp::Le,
            None => return Err(Error::Precondition("surface has no envelope".into())),
        };
        self.query([e1, e2, 1.0], [cmp, cmp, Cmp::Eq])
    }
}

/// Lower convex envelope of the finite samples.
pub fn lower_convex_envelope(surface: &ExponentSurface) -> Result<ExponentSurface> {
    surface.with_envelope(EnvelopeKind::LowerConvex)
}

/// Upper concave envelope of the finite samples.
pub fn upper_concave_envelope(surface: &ExponentSurface) -> Result<ExponentSurface> {
    surface.with_envelope(EnvelopeKind::UpperConcave)
}

/// Samples `phi` or `psi` on the product grid. For `phi`, exact samples on
/// the curves where `phi(s, .)` or `phi(., t)` attain their minimum are added.
pub fn sample_surface(
    solver: &SphereSolver,
    which: SurfaceKind,
    s_grid: &[f64],
    t_grid: &[f64],
) -> Result<ExponentSurface> {
    let idx: Vec<(usize, usize)> = (0..s_grid.len())
        .flat_map(|i| (0..t_grid.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = idx
        .par_iter()
        .map(|&(i, j)| match which {
            SurfaceKind::Phi => solver.phi(s_grid[i], t_grid[j]),
            SurfaceKind::Psi => solver.psi(s_grid[i], t_grid[j]),
        })
        .collect::<Result<_>>()?;
    let mut extra = Vec::new();
    if which == SurfaceKind::Phi {
        for &s in s_grid {
            extra.extend(solver.channel_points(s, true));
        }
        for &t in t_grid {
            extra.extend(solver.channel_points(t, false));
        }
    }
    ExponentSurface::new(
        s_grid.to_vec(),
        t_grid.to_vec(),
        values,
        extra,
        solver.joint().base(),
    )
}

/// `phi` and `psi` surfaces with their envelopes for one joint distribution.
#[derive(Debug, Clone)]
pub struct ThetaSurfaces {
    solver: SphereSolver,
    phi: ExponentSurface,
    psi: ExponentSurface,
    zero_entry: bool,
}

impl ThetaSurfaces {
    /// Samples both surfaces on `grid x grid` quadratic grids.
    pub fn for_joint(p: &JointDist, grid: usize) -> Result<Self> {
        Self::with_grids(p, grid, GridKind::Quadratic, SphereSearch::default())
    }

    pub fn with_grids(p: &JointDist, grid: usize, kind: GridKind, opts: SphereSearch) -> Result<Self> {
        let solver = SphereSolver::new(p, opts)?;
        let (e1, e2) = solver.emax();
        let sg = axis_grid(e1, grid, kind);
        let tg = axis_grid(e2, grid, kind);
        Self::from_grids(solver, &sg, &tg)
    }

    pub fn from_grids(solver: SphereSolver, s_grid: &[f64], t_grid: &[f64]) -> Result<Self> {
        let phi = lower_convex_envelope(&sample_surface(&solver, SurfaceKind::Phi, s_grid, t_grid)?)?;
        let psi = upper_concave_envelope(&sample_surface(&solver, SurfaceKind::Psi, s_grid, t_grid)?)?;
        let zero_entry = solver.joint().has_zero_entry();
        Ok(ThetaSurfaces {
            solver,
            phi,
            psi,
            zero_entry,
        })
    }

    pub fn solver(&self) -> &SphereSolver {
        &self.solver
    }

    pub fn phi_surface(&self) -> &ExponentSurface {
        &self.phi
    }

    pub fn psi_surface(&self) -> &ExponentSurface {
        &self.psi
    }

    pub fn emax(&self) -> (f64, f64) {
        self.solver.emax()
    }

    fn check(&self, e1: f64, e2: f64) -> Result<(f64, f64)> {
        let (m1, m2) = self.emax();
        let tol = 1e-9;
        if !(e1 >= -tol && e1 <= m1 + tol && e2 >= -tol && e2 <= m2 + tol) {
            return Err(Error::OutOfRange(format!(
                "(E1, E2) = ({e1}, {e2}) outside [0, {m1}] x [0, {m2}]"
            )));
        }
        Ok((e1.clamp(0.0, m1), e2.clamp(0.0, m2)))
    }

    /// Lower convex envelope of `phi` at `(s, t)`.
    pub fn phi_breve(&self, s: f64, t: f64) -> Result<f64> {
        let (s, t) = self.check(s, t)?;
        self.phi
            .envelope_at(s, t)?
            .ok_or_else(|| Error::Numerical(format!("({s}, {t}) outside the sampled hull")))
    }

    /// Upper concave envelope of `psi` at `(s, t)`.
    pub fn psi_hat(&self, s: f64, t: f64) -> Result<f64> {
        let (s, t) = self.check(s, t)?;
        self.psi
            .envelope_at(s, t)?
            .ok_or_else(|| Error::Numerical(format!("({s}, {t}) outside the sampled hull")))
    }

    /// `Theta_lower*(E1, E2)` with the attaining mixture.
    pub fn theta_lower_attained(&self, e1: f64, e2: f64) -> Result<Attained> {
        let (e1, e2) = self.check(e1, e2)?;
        self.phi
            .quadrant_extreme(e1, e2)?
            .ok_or_else(|| Error::Numerical("lower quadrant program infeasible".into()))
    }

    pub fn theta_lower(&self, e1: f64, e2: f64) -> Result<f64> {
        Ok(self.theta_lower_attained(e1, e2)?.value)
    }

    /// The envelope route for `Theta_upper*` without the boundary case table;
    /// on the axes this is the limit from the interior.
    pub fn theta_upper_limit(&self, e1: f64, e2: f64) -> Result<Attained> {
        let (e1, e2) = self.check(e1, e2)?;
        self.psi
            .quadrant_extreme(e1, e2)?
            .ok_or_else(|| Error::Numerical("upper quadrant program infeasible".into()))
    }

    /// `Theta_upper*(E1, E2)`: `+inf` if `P` has a zero entry; `E2` when
    /// `E1 = 0`; `E1` when `E2 = 0`; otherwise the envelope route.
    pub fn theta_upper(&self, e1: f64, e2: f64) -> Result<f64> {
        let (e1, e2) = self.check(e1, e2)?;
        if self.zero_entry {
            return Ok(f64::INFINITY);
        }
        if e1 == 0.0 {
            return Ok(e2);
        }
        if e2 == 0.0 {
            return Ok(e1);
        }
        Ok(self.theta_upper_limit(e1, e2)?.value)
    }
}

/// Default surface resolution for the one-shot exponent functions.
pub const DEFAULT_GRID: usize = 64;

/// `Theta_lower*(E1, E2)` computed from fresh 64x64 surfaces. Build a
/// [`ThetaSurfaces`] once when evaluating many points.
pub fn theta_lower_star(p: &JointDist, e1: f64, e2: f64) -> Result<f64> {
    ThetaSurfaces::for_joint(p, DEFAULT_GRID)?.theta_lower(e1, e2)
}

/// `Theta_upper*(E1, E2)` computed from fresh 64x64 surfaces.
pub fn theta_upper_star(p: &JointDist, e1: f64, e2: f64) -> Result<f64> {
    ThetaSurfaces::for_joint(p, DEFAULT_GRID)?.theta_upper(e1, e2)
}

/// Direct auxiliary-variable formulation of `Theta_lower*` with three atoms:
/// minimizes `sum_w q_w phi(s_w, t_w)` subject to `sum q_w s_w >= E1`,
/// `sum q_w t_w >= E2` by seeded random multi-start and coordinate search.
/// Returns an upper bound on the true value.
pub fn theta_lower_direct(solver: &SphereSolver, e1: f64, e2: f64, starts: usize, seed: u64) -> Result<f64> {
    use rand::Rng;
    let (m1, m2) = solver.emax();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Parameters: (s_w, t_w) for three atoms and two weight logits.
    let eval = |x: &[f64]| -> f64 {
        let l = [x[6], x[7], 0.0];
        let mx = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = l.iter().map(|v| (v - mx).exp()).collect();
        let z: f64 = w.iter().sum();
        let mut ms = 0.0;
        let mut mt = 0.0;
        let mut val = 0.0;
        for a in 0..3 {
            let (s, t) = (x[2 * a].clamp(0.0, m1), x[2 * a + 1].clamp(0.0, m2));
            let q = w[a] / z;
            ms += q * s;
            mt += q * t;
            val += q * solver.phi(s, t).unwrap_or(f64::INFINITY);
        }
        let pen = 1e3 * ((e1 - ms).max(0.0) + (e2 - mt).max(0.0));
        val + pen
    };
    let mut best = f64::INFINITY;
    for _ in 0..starts {
        let mut x: Vec<f64> = (0..3)
            .flat_map(|_| [rng.gen_range(e1..=m1.max(e1)), rng.gen_range(e2..=m2.max(e2))])
            .collect();
        x.push(rng.gen_range(-2.0..2.0));
        x.push(rng.gen_range(-2.0..2.0));
        let mut cur = eval(&x);
        let mut h = 0.25 * m1.max(m2);
        for _ in 0..8 {
            for k in 0..x.len() {
                let base = x[k];
                let span = if k >= 6 { 2.0 } else { h };
                let (arg, v) = golden_min(
                    |v| {
                        let mut y = x.clone();
                        y[k] = v;
                        eval(&y)
                    },
                    base - span,
                    base + span,
                    1e-6,
                );
                if v < cur {
                    cur = v;
                    x[k] = arg;
                }
            }
            h *= 0.5;
        }
        best = best.min(cur);
    }
    Ok(best)
}

/// Auxiliary-variable parametrization `(Q_W, Q_{X|W}, Q_{Y|W})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalFamily {
    pub q_w: Dist,
    pub x_given_w: CondKernel,
    pub y_given_w: CondKernel,
}

impl ConditionalFamily {
    pub fn new(q_w: Dist, x_given_w: CondKernel, y_given_w: CondKernel) -> Result<Self> {
        if x_given_w.len() != q_w.len() || y_given_w.len() != q_w.len() {
            return Err(Error::ShapeMismatch("kernels need one row per symbol of W".into()));
        }
        Ok(ConditionalFamily {
            q_w,
            x_given_w,
            y_given_w,
        })
    }
}

/// Minimum total-variation distance between `target` and mixtures
/// `sum_w Q_W(w) Q_{XY|W=w}` with each `Q_{XY|W=w}` a coupling of the
/// family's conditionals. Solved exactly as a linear program.
pub fn coupling_polytope_distance(target: &JointDist, fam: &ConditionalFamily) -> Result<f64> {
    let (rx, cy) = (target.rows(), target.cols());
    if fam.x_given_w.width() != rx || fam.y_given_w.width() != cy {
        return Err(Error::ShapeMismatch("family alphabets do not match the target".into()));
    }
    let ws: Vec<usize> = fam.q_w.support();
    let nw = ws.len();
    let cells = rx * cy;
    // Rows: per w, X marginals then Y marginals; then one row per cell.
    let m = nw * (rx + cy) + cells;
    let mut cmp = vec![Cmp::Eq; m];
    cmp.truncate(m);
    let mut lp = Lp::new(cmp);
    let mut rhs = vec![0.0; m];
    for (k, &w) in ws.iter().enumerate() {
        let off = k * (rx + cy);
        for x in 0..rx {
            rhs[off + x] = fam.x_given_w.row(w).probs()[x];
        }
        for y in 0..cy {
            rhs[off + rx + y] = fam.y_given_w.row(w).probs()[y];
        }
        let qw = fam.q_w.probs()[w];
        for x in 0..rx {
            for y in 0..cy {
                let mut col = vec![0.0; m];
                col[off + x] = 1.0;
                col[off + rx + y] = 1.0;
                col[nw * (rx + cy) + x * cy + y] = qw;
                lp.add_column(0.0, &col);
            }
        }
    }
    for c in 0..cells {
        rhs[nw * (rx + cy) + c] = target.as_flat()[c];
        for sign in [1.0, -1.0] {
            let mut col = vec![0.0; m];
            col[nw * (rx + cy) + c] = -sign;
            lp.add_column(0.5, &col);
        }
    }
    lp.set_rhs(&rhs);
    match lp.minimize()? {
        LpOutcome::Optimal(sol) => Ok(sol.objective.max(0.0)),
        other => Err(Error::Numerical(format!("distance program ended as {other:?}"))),
    }
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// A maximal coupling of `from` and `to` written as a channel `K(to | from)`:
/// keeps each symbol with probability `min(from, to) / from` and sends the
/// rest to the excess of `to`.
fn maximal_tv_channel(from: &[f64], to: &[f64]) -> Vec<Vec<f64>> {
    let k = from.len();
    let excess: Vec<f64> = (0..k).map(|i| (to[i] - from[i]).max(0.0)).collect();
    let total: f64 = excess.iter().sum();
    (0..k)
        .map(|i| {
            let mut row = vec![0.0; k];
            if from[i] <= 0.0 {
                row[i] = 1.0;
                return row;
            }
            let stay = from[i].min(to[i]) / from[i];
            row[i] += stay;
            if total > 0.0 {
                for j in 0..k {
                    row[j] += (1.0 - stay) * excess[j] / total;
                }
            }
            row
        })
        .collect()
}

/// Outcome of [`marginal_continuity_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub coupling: JointDist,
    pub distance: f64,
    pub bound: f64,
    pub marginal_error: f64,
    pub holds: bool,
}

/// Glues `q_coupling` with maximal total-variation couplings on each side to
/// obtain a coupling of `(px, py)`, and checks that its total-variation
/// distance to `q_coupling` is at most `TV(qx, px) + TV(qy, py)`.
pub fn marginal_continuity_check(
    qx: &Dist,
    qy: &Dist,
    px: &Dist,
    py: &Dist,
    q_coupling: &JointDist,
) -> Result<ContinuityReport> {
    let (r, c) = (q_coupling.rows(), q_coupling.cols());
    if qx.len() != r || px.len() != r || qy.len() != c || py.len() != c {
        return Err(Error::ShapeMismatch("marginal lengths do not match the coupling".into()));
    }
    let mx = q_coupling.marginal_x();
    let my = q_coupling.marginal_y();
    if tv(mx.probs(), qx.probs()) > 1e-9 || tv(my.probs(), qy.probs()) > 1e-9 {
        return Err(Error::Precondition("q_coupling does not have marginals (qx, qy)".into()));
    }
    let kx = maximal_tv_channel(qx.probs(), px.probs());
    let ky = maximal_tv_channel(qy.probs(), py.probs());
    let mut out = vec![0.0; r * c];
    for x in 0..r {
        for y in 0..c {
            let w = q_coupling.get(x, y);
            if w == 0.0 {
                continue;
            }
            for x2 in 0..r {
                if kx[x][x2] == 0.0 {
                    continue;
                }
                for y2 in 0..c {
                    out[x2 * c + y2] += w * kx[x][x2] * ky[y][y2];
                }
            }
        }
    }
    let coupling = JointDist::from_flat_raw(r, c, out, q_coupling.base());
    let distance = tv(coupling.as_flat(), q_coupling.as_flat());
    let bound = tv(qx.probs(), px.probs()) + tv(qy.probs(), py.probs());
    let marginal_error = tv(coupling.marginal_x().probs(), px.probs())
        .max(tv(coupling.marginal_y().probs(), py.probs()));
    Ok(ContinuityReport {
        holds: distance <= bound + 1e-12 && marginal_error <= 1e-12,
        coupling,
        distance,
        bound,
        marginal_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsbs::{self, DsbsParams};
    use crate::probcore::kl_div;

    fn d(v: &[f64]) -> Dist {
        Dist::new(v.to_vec(), Base::Nats).unwrap()
    }

    fn joint(rows: Vec<Vec<f64>>) -> JointDist {
        JointDist::new(rows, Base::Nats).unwrap()
    }

    #[test]
    fn own_marginals_give_zero() {
        let p = joint(vec![vec![0.1, 0.3], vec![0.4, 0.2]]);
        let cp = CouplingProblem::new(p.marginal_x(), p.marginal_y(), p.clone()).unwrap();
        let sol = min_kl_coupling(&cp).unwrap();
        assert!(sol.value.abs() < 1e-14);
    }

    #[test]
    fn degenerate_marginal_forces_product() {
        let p = joint(vec![vec![0.1, 0.3], vec![0.4, 0.2]]);
        let qx = d(&[0.25, 0.75]);
        let qy = d(&[0.0, 1.0]);
        let sol = min_kl_coupling(&CouplingProblem::new(qx, qy, p).unwrap()).unwrap();
        let expected = 0.25 * (0.25f64 / 0.3).ln() + 0.75 * (0.75f64 / 0.2).ln();
        assert!((sol.value - expected).abs() < 1e-12);
    }

    #[test]
    fn dsbs_matches_one_parameter_search() {
        let params = DsbsParams::new(0.5).unwrap();
        let p = params.joint();
        let qx = Dist::new(vec![0.7, 0.3], Base::Bits).unwrap();
        let qy = Dist::new(vec![0.7, 0.3], Base::Bits).unwrap();
        let sol = min_kl_coupling(&CouplingProblem::new(qx, qy, p).unwrap()).unwrap();
        let (arg, val) = golden_min(
            |c| dsbs::d_alpha_beta(&params, 0.3, 0.3, c).unwrap(),
            0.0,
            0.3,
            1e-12,
        );
        assert!((sol.value - val).abs() < 1e-10);
        assert!((sol.coupling.unwrap().get(1, 1) - arg).abs() < 1e-6);
    }

    #[test]
    fn infeasible_support_reports_hall_violation() {
        let p = joint(vec![vec![0.5, 0.0], vec![0.0, 0.5]]);
        let sol = min_kl_coupling(&CouplingProblem::new(d(&[0.7, 0.3]), d(&[0.5, 0.5]), p).unwrap())
            .unwrap();
        assert_eq!(sol.value, f64::INFINITY);
        let cert = sol.certificate.unwrap();
        assert!(cert.mass_x > cert.mass_neighbours);
    }

    #[test]
    fn phi_psi_at_origin_and_binary_closed_forms() {
        let params = DsbsParams::new(0.6).unwrap();
        let p = params.joint();
        let solver = SphereSolver::new(&p, SphereSearch::default()).unwrap();
        assert!(solver.phi(0.0, 0.0).unwrap().abs() < 1e-14);
        assert!(solver.psi(0.0, 0.0).unwrap().abs() < 1e-14);
        for &(s, t) in &[(0.1, 0.3), (0.5, 0.5), (0.9, 0.05), (1.0, 1.0), (1e-6, 2e-6)] {
            let (f, g) = dsbs::phi_psi_dsbs(&params, s, t).unwrap();
            assert!((solver.phi(s, t).unwrap() - f).abs() < 1e-9, "phi at ({s},{t})");
            assert!((solver.psi(s, t).unwrap() - g).abs() < 1e-9, "psi at ({s},{t})");
        }
        assert!(solver.phi(1.5, 0.0).is_err());
    }

    #[test]
    fn ternary_sphere_points_lie_on_sphere() {
        let side = SphereSide::new(&[0.2, 0.3, 0.5], 16, 1);
        for (_, q) in side.candidates(0.4) {
            assert!((kl_nats(&q, &[0.2, 0.3, 0.5]) - 0.4).abs() < 1e-10);
        }
        let pm = side.candidates(side.emax);
        assert_eq!(pm.len(), 1);
        assert_eq!(pm[0].1, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn angles_round_trip() {
        let c = normalize(&[0.3, -0.5, 0.8, 0.1]);
        let back = from_angles(&to_angles(&c));
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_of_plane_is_plane() {
        let g: Vec<f64> = (0..5).map(|i| i as f64 / 4.0).collect();
        let vals: Vec<f64> = g.iter().flat_map(|&s| g.iter().map(move |&t| s + t)).collect();
        let surf = ExponentSurface::new(g.clone(), g.clone(), vals, vec![], Base::Nats).unwrap();
        let lo = lower_convex_envelope(&surf).unwrap();
        let hi = upper_concave_envelope(&surf).unwrap();
        for &(s, t) in &[(0.1, 0.7), (0.33, 0.5), (1.0, 0.0)] {
            assert!((lo.envelope_at(s, t).unwrap().unwrap() - (s + t)).abs() < 1e-12);
            assert!((hi.envelope_at(s, t).unwrap().unwrap() - (s + t)).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_flattens_tent() {
        // min(s, 1 - s): the lower convex envelope is the chord through the
        // endpoints, i.e. identically 0.
        let g: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let t = vec![0.0, 1.0];
        let vals: Vec<f64> = g.iter().flat_map(|&s| [s.min(1.0 - s); 2]).collect();
        let surf = ExponentSurface::new(g, t, vals, vec![], Base::Nats).unwrap();
        let lo = lower_convex_envelope(&surf).unwrap();
        for s in [0.0, 0.25, 0.5, 0.9] {
            assert!(lo.envelope_at(s, 0.5).unwrap().unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn theta_boundary_cases_dsbs() {
        let params = DsbsParams::new(0.9).unwrap();
        let ts = ThetaSurfaces::for_joint(&params.joint(), 24).unwrap();
        for e in [0.0, 0.2, 0.5, 1.0] {
            assert!((ts.theta_lower(e, 0.0).unwrap() - e).abs() < 1e-9, "E1={e}");
            assert_eq!(ts.theta_upper(e, 0.0).unwrap(), e);
            assert_eq!(ts.theta_upper(0.0, e).unwrap(), e);
        }
        // Corner: -log2 of the largest cell among argmin marginals.
        let corner = ts.theta_lower(1.0, 1.0).unwrap();
        assert!((corner + (0.95f64 / 2.0).log2()).abs() < 1e-9);
        // Interior limit on the axis exceeds the boundary value.
        assert!(ts.theta_upper_limit(0.5, 0.0).unwrap().value > 0.5 + 0.05);
    }

    #[test]
    fn theta_upper_infinite_with_zero_entry() {
        let p = joint(vec![vec![0.5, 0.2], vec![0.0, 0.3]]);
        let ts = ThetaSurfaces::for_joint(&p, 8).unwrap();
        assert_eq!(ts.theta_upper(0.1, 0.1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn direct_route_agrees_with_envelope() {
        let params = DsbsParams::new(0.5).unwrap();
        let ts = ThetaSurfaces::for_joint(&params.joint(), 32).unwrap();
        let env = ts.theta_lower(0.3, 0.2).unwrap();
        let direct = theta_lower_direct(ts.solver(), 0.3, 0.2, 6, 11).unwrap();
        assert!((env - direct).abs() < 5e-3, "{env} vs {direct}");
    }

    #[test]
    fn polytope_distance_cases() {
        let t = joint(vec![vec![0.1, 0.3], vec![0.4, 0.2]]);
        let one = d(&[1.0]);
        let fam = ConditionalFamily::new(
            one.clone(),
            CondKernel::new(vec![t.marginal_x()]).unwrap(),
            CondKernel::new(vec![t.marginal_y()]).unwrap(),
        )
        .unwrap();
        assert!(coupling_polytope_distance(&t, &fam).unwrap() < 1e-12);
        // Conditionally deterministic: W = (X, Y) pinned to the anti-diagonal.
        let half = d(&[0.5, 0.5]);
        let fam = ConditionalFamily::new(
            half,
            CondKernel::new(vec![d(&[1.0, 0.0]), d(&[0.0, 1.0])]).unwrap(),
            CondKernel::new(vec![d(&[0.0, 1.0]), d(&[1.0, 0.0])]).unwrap(),
        )
        .unwrap();
        let diag = joint(vec![vec![0.5, 0.0], vec![0.0, 0.5]]);
        // The only representable joint is [[0, .5], [.5, 0]]: TV to diag is 1.
        assert!((coupling_polytope_distance(&diag, &fam).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn continuity_examples() {
        let q = joint(vec![vec![0.2, 0.1], vec![0.3, 0.4]]);
        let (qx, qy) = (q.marginal_x(), q.marginal_y());
        let same = marginal_continuity_check(&qx, &qy, &qx, &qy, &q).unwrap();
        assert!(same.distance < 1e-15 && same.holds);
        let px = d(&[0.31, 0.69]);
        let py = d(&[0.49, 0.51]);
        let r = marginal_continuity_check(&qx, &qy, &px, &py, &q).unwrap();
        assert!(r.holds && r.distance <= 0.02 + 1e-12);
    }

    #[test]
    fn independence_additivity() {
        let px = d(&[0.3, 0.7]);
        let py = d(&[0.2, 0.5, 0.3]);
        let p = JointDist::product(&px, &py);
        let qx = d(&[0.6, 0.4]);
        let qy = d(&[0.1, 0.1, 0.8]);
        let sol = min_kl_coupling(&CouplingProblem::new(qx.clone(), qy.clone(), p).unwrap()).unwrap();
        assert!((sol.value - kl_div(&qx, &px) - kl_div(&qy, &py)).abs() < 1e-7);
    }
}
