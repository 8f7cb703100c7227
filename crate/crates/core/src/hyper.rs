//! Strengthened hypercontractivity: the factors `Lambda_lower` and
//! `Lambda_upper`, the forward and reverse regions with their restricted
//! variants, and the limiting slopes of the exponents at the origin.
//!
//! For a pair `(p, q)` and a box `[alpha, E1max] x [beta, E2max]`:
//!
//! * `Lambda_lower = min Theta_lower*(s, t) - s/p - t/q`;
//! * `Lambda_upper = min s/p + t/q - Theta_upper*(s, t)`.
//!
//! The forward region holds the pairs `p, q >= 1` with `Lambda_lower >= 0`
//! on the full box, the reverse region the pairs `p, q in (0, 1]` with
//! `Lambda_upper >= 0`. Both exponents are envelopes of sampled `phi`/`psi`
//! values and the tested functionals are linear in `(s, t)`, so every query
//! is a small linear program over the raw samples of precomputed surfaces.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::coupling::{axis_grid, sample_surface, GridKind, SphereSearch, SphereSolver, SurfaceKind, ThetaSurfaces};
pub use crate::dsbs::Direction;
use crate::error::{Error, Result};
use crate::geom::{golden_max, golden_min};
use crate::lp::{Cmp, Lp, LpOutcome};
use crate::probcore::{binomial, ln_biguint, multinomial, Base, JointDist};

/// Absolute slack of the plane-versus-surface tests.
pub const MEMBERSHIP_TOL: f64 = 1e-10;
/// Default samples per axis of [`HyperSurfaces::sample`].
pub const HYPER_GRID: usize = 200;
/// Default smallest positive grid value as a fraction of `Emax`.
pub const HYPER_MIN_FRAC: f64 = 1e-5;

/// Hölder exponents `(p, q)`; `p` or `q` may be `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderPair {
    p: f64,
    q: f64,
}

impl HolderPair {
    /// Requires `p, q in (0, inf]`.
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p > 0.0) || !(q > 0.0) {
            return Err(Error::OutOfRange(format!("Hölder pair ({p}, {q}) must be positive")));
        }
        Ok(HolderPair { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `1/p`, zero for `p = inf`.
    pub fn inv_p(&self) -> f64 {
        1.0 / self.p
    }

    pub fn inv_q(&self) -> f64 {
        1.0 / self.q
    }

    /// Forward pairs need `p, q >= 1`, reverse pairs `p, q in (0, 1]`.
    pub fn check(&self, which: Direction) -> Result<()> {
        let ok = match which {
            Direction::Forward => self.p >= 1.0 && self.q >= 1.0,
            Direction::Reverse => self.p <= 1.0 && self.q <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfRange(format!(
                "({}, {}) outside the {which:?} quadrant",
                self.p, self.q
            )))
        }
    }

    /// Restricted regions take finite pairs.
    pub fn check_extended(&self) -> Result<()> {
        if self.p.is_finite() && self.q.is_finite() {
            Ok(())
        } else {
            Err(Error::OutOfRange(format!(
                "({}, {}) must be finite for restricted regions",
                self.p, self.q
            )))
        }
    }
}

impl fmt::Display for HolderPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.p, self.q)
    }
}

/// Parses `"p,q"`; `inf` is accepted for either entry.
impl FromStr for HolderPair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!("expected 'p,q', got '{s}'")));
        }
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|e| Error::Parse(format!("'{v}': {e}")))
        };
        HolderPair::new(num(parts[0])?, num(parts[1])?)
    }
}

/// Optimal value of a `Lambda` program with the attaining `(s, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaValue {
    pub value: f64,
    pub s: f64,
    pub t: f64,
}

/// Outcome of a region test. `margin` is the relevant `Lambda`; on failure
/// `witness` is a point where the plane crosses the exponent surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub member: bool,
    pub margin: f64,
    pub witness: Option<(f64, f64)>,
}

/// Raw `phi` and `psi` samples of one joint distribution.
#[derive(Debug, Clone)]
pub struct HyperSurfaces {
    solver: SphereSolver,
    phi: Vec<(f64, f64, f64)>,
    psi: Vec<(f64, f64, f64)>,
    zero_entry: bool,
}

impl HyperSurfaces {
    /// Samples both surfaces on `grid x grid` geometric grids reaching down
    /// to `min_frac * Emax`, which resolves the behaviour at the origin that
    /// decides region membership.
    pub fn sample(p: &JointDist, grid: usize, min_frac: f64) -> Result<Self> {
        Self::sample_with(p, grid, min_frac, SphereSearch::default())
    }

    /// [`HyperSurfaces::sample`] with explicit sphere-search options.
    pub fn sample_with(p: &JointDist, grid: usize, min_frac: f64, opts: SphereSearch) -> Result<Self> {
        if grid < 3 {
            return Err(Error::OutOfRange(format!("grid {grid} < 3")));
        }
        if !(min_frac > 0.0 && min_frac < 1.0) {
            return Err(Error::OutOfRange(format!("min_frac {min_frac} outside (0, 1)")));
        }
        let solver = SphereSolver::new(p, opts)?;
        let (e1, e2) = solver.emax();
        let kind = GridKind::Geometric { min_frac };
        let sg = axis_grid(e1, grid, kind);
        let tg = axis_grid(e2, grid, kind);
        let phi = sample_surface(&solver, SurfaceKind::Phi, &sg, &tg)?;
        let psi = sample_surface(&solver, SurfaceKind::Psi, &sg, &tg)?;
        Ok(Self::assemble(solver, phi.samples(), psi.samples()))
    }

    /// Reuses the samples of precomputed envelope surfaces.
    pub fn from_theta(th: &ThetaSurfaces) -> Self {
        Self::assemble(
            th.solver().clone(),
            th.phi_surface().samples(),
            th.psi_surface().samples(),
        )
    }

    fn assemble(solver: SphereSolver, phi: &[(f64, f64, f64)], psi: &[(f64, f64, f64)]) -> Self {
        let finite = |v: &[(f64, f64, f64)]| v.iter().copied().filter(|c| c.2.is_finite()).collect();
        let zero_entry = solver.joint().has_zero_entry();
        HyperSurfaces {
            phi: finite(phi),
            psi: finite(psi),
            zero_entry,
            solver,
        }
    }

    pub fn solver(&self) -> &SphereSolver {
        &self.solver
    }

    pub fn emax(&self) -> (f64, f64) {
        self.solver.emax()
    }

    pub fn base(&self) -> Base {
        self.solver.joint().base()
    }

    fn check_box(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        let (m1, m2) = self.emax();
        let tol = 1e-9;
        if !(a >= -tol && a <= m1 + tol && b >= -tol && b <= m2 + tol) {
            return Err(Error::OutOfRange(format!(
                "({a}, {b}) outside [0, {m1}] x [0, {m2}]"
            )));
        }
        Ok((a.clamp(0.0, m1), b.clamp(0.0, m2)))
    }

    /// `Theta_lower*(E1, E2)` from the raw `phi` samples.
    pub fn theta_lower(&self, e1: f64, e2: f64) -> Result<f64> {
        let (e1, e2) = self.check_box(e1, e2)?;
        let mut lp = Lp::new(vec![Cmp::Ge, Cmp::Ge, Cmp::Eq]);
        for &(s, t, v) in &self.phi {
            lp.add_column(v, &[s, t, 1.0]);
        }
        lp.set_rhs(&[e1, e2, 1.0]);
        match lp.minimize()? {
            LpOutcome::Optimal(sol) => Ok(sol.objective),
            _ => Err(Error::Numerical("lower quadrant program infeasible".into())),
        }
    }

    /// `Theta_upper*(E1, E2)` from the raw `psi` samples, with the closed
    /// forms on the axes and `+inf` for a joint with a zero entry.
    pub fn theta_upper(&self, e1: f64, e2: f64) -> Result<f64> {
        let (e1, e2) = self.check_box(e1, e2)?;
        if self.zero_entry {
            return Ok(f64::INFINITY);
        }
        if e1 == 0.0 {
            return Ok(e2);
        }
        if e2 == 0.0 {
            return Ok(e1);
        }
        let mut lp = Lp::new(vec![Cmp::Le, Cmp::Le, Cmp::Eq]);
        for &(s, t, v) in &self.psi {
            lp.add_column(-v, &[s, t, 1.0]);
        }
        lp.set_rhs(&[e1, e2, 1.0]);
        match lp.minimize()? {
            LpOutcome::Optimal(sol) => Ok(-sol.objective),
            _ => Err(Error::Numerical("upper quadrant program infeasible".into())),
        }
    }

    /// `Lambda_lower_{p,q}(alpha, beta)`. As `-s/p - t/q` decreases in both
    /// arguments, the box variable equals the mixture mean, which leaves a
    /// program over mixtures of `phi` samples only.
    pub fn lambda_lower(&self, pq: HolderPair, alpha: f64, beta: f64) -> Result<LambdaValue> {
        let (alpha, beta) = self.check_box(alpha, beta)?;
        let (u, v) = (pq.inv_p(), pq.inv_q());
        let cost = |&(s, t, f): &(f64, f64, f64)| f - u * s - v * t;
        if alpha == 0.0 && beta == 0.0 {
            return Ok(scan_min(&self.phi, cost));
        }
        let mut lp = Lp::new(vec![Cmp::Ge, Cmp::Ge, Cmp::Eq]);
        for c in &self.phi {
            lp.add_column(cost(c), &[c.0, c.1, 1.0]);
        }
        lp.set_rhs(&[alpha, beta, 1.0]);
        match lp.minimize()? {
            LpOutcome::Optimal(sol) => {
                let (s, t) = mean_point(&self.phi, &sol.support);
                Ok(LambdaValue {
                    value: sol.objective,
                    s,
                    t,
                })
            }
            _ => Err(Error::Numerical("Lambda_lower program infeasible".into())),
        }
    }

    /// `Lambda_upper_{p,q}(alpha, beta)`; `-inf` for a joint with a zero
    /// entry. The axes enter through their interior limits, which is where
    /// the infimum over the box is approached.
    pub fn lambda_upper(&self, pq: HolderPair, alpha: f64, beta: f64) -> Result<LambdaValue> {
        let (alpha, beta) = self.check_box(alpha, beta)?;
        if self.zero_entry {
            return Ok(LambdaValue {
                value: f64::NEG_INFINITY,
                s: alpha,
                t: beta,
            });
        }
        let (u, v) = (pq.inv_p(), pq.inv_q());
        if alpha == 0.0 && beta == 0.0 {
            return Ok(scan_min(&self.psi, |&(s, t, f)| u * s + v * t - f));
        }
        let (m1, m2) = self.emax();
        // Rows: mean s <= s, mean t <= t, s >= alpha, t >= beta, mass 1,
        // s <= E1max, t <= E2max. The last two columns are s and t.
        let mut lp = Lp::new(vec![Cmp::Le, Cmp::Le, Cmp::Ge, Cmp::Ge, Cmp::Eq, Cmp::Le, Cmp::Le]);
        for &(s, t, f) in &self.psi {
            lp.add_column(-f, &[s, t, 0.0, 0.0, 1.0, 0.0, 0.0]);
        }
        let sc = lp.add_column(u, &[-1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let tc = lp.add_column(v, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        lp.set_rhs(&[0.0, 0.0, alpha, beta, 1.0, m1, m2]);
        match lp.minimize()? {
            LpOutcome::Optimal(sol) => {
                let get = |c: usize| sol.support.iter().find(|x| x.0 == c).map_or(0.0, |x| x.1);
                Ok(LambdaValue {
                    value: sol.objective,
                    s: get(sc),
                    t: get(tc),
                })
            }
            _ => Err(Error::Numerical("Lambda_upper program infeasible".into())),
        }
    }

    /// Plane-versus-surface test on the full box.
    pub fn region_member(&self, pq: HolderPair, which: Direction) -> Result<Membership> {
        pq.check(which)?;
        self.membership(pq, 0.0, 0.0, which)
    }

    /// Plane-versus-surface test on `[alpha, E1max] x [beta, E2max]`.
    pub fn restricted_region_member(
        &self,
        pq: HolderPair,
        alpha: f64,
        beta: f64,
        which: Direction,
    ) -> Result<Membership> {
        pq.check_extended()?;
        self.membership(pq, alpha, beta, which)
    }

    fn membership(&self, pq: HolderPair, alpha: f64, beta: f64, which: Direction) -> Result<Membership> {
        let lam = match which {
            Direction::Forward => self.lambda_lower(pq, alpha, beta)?,
            Direction::Reverse => self.lambda_upper(pq, alpha, beta)?,
        };
        let member = lam.value >= -MEMBERSHIP_TOL;
        Ok(Membership {
            member,
            margin: lam.value,
            witness: (!member).then_some((lam.s, lam.t)),
        })
    }

    /// Boundary of the unrestricted region in the coordinates `(1/p, 1/q)`:
    /// for `u = 1/p`, the largest admissible `1/q` (forward) or the smallest
    /// (reverse). `None` if no `q` in the quadrant works. The plane test on
    /// the samples is linear in `1/q`, so the bound is a ratio per sample.
    pub fn boundary_inv_q(&self, u: f64, which: Direction) -> Option<f64> {
        match which {
            Direction::Forward => {
                let mut v = 1.0_f64;
                for &(s, t, f) in &self.phi {
                    let slack = f - u * s + MEMBERSHIP_TOL;
                    if t > 0.0 {
                        v = v.min(slack / t);
                    } else if slack < 0.0 {
                        return None;
                    }
                }
                (v >= 0.0).then_some(v)
            }
            Direction::Reverse => {
                if self.zero_entry {
                    return None;
                }
                let mut v = 1.0_f64;
                for &(s, t, f) in &self.psi {
                    let need = f - u * s - MEMBERSHIP_TOL;
                    if t > 0.0 {
                        v = v.max(need / t);
                    } else if need > 0.0 {
                        return None;
                    }
                }
                Some(v)
            }
        }
    }

    /// Optimum of `E1/p + E2/q` over the region: the maximum for the
    /// forward region, the minimum for the reverse region. Returns the value
    /// and the optimal pair.
    pub fn ribbon_optimum(&self, e1: f64, e2: f64, which: Direction) -> Result<(f64, HolderPair)> {
        if !(e1 >= 0.0 && e2 >= 0.0) {
            return Err(Error::OutOfRange(format!("({e1}, {e2}) must be nonnegative")));
        }
        let feasible = |u: f64| self.boundary_inv_q(u, which).is_some();
        let (u, v) = match which {
            Direction::Forward => {
                let umax = if feasible(1.0) { 1.0 } else { bisect_edge(feasible, 0.0, 1.0) };
                let obj = |u: f64| e1 * u + e2 * self.boundary_inv_q(u, which).unwrap_or(f64::NEG_INFINITY);
                let (u, _) = golden_max(obj, 0.0, umax, 1e-12);
                let u = [u, 0.0, umax].into_iter().max_by(|a, b| obj(*a).total_cmp(&obj(*b))).unwrap_or(u);
                (u, self.boundary_inv_q(u, which).unwrap_or(0.0))
            }
            Direction::Reverse => {
                if self.zero_entry {
                    return Err(Error::Precondition("the reverse region is empty for a joint with a zero entry".into()));
                }
                let mut hi = 1.0;
                while !feasible(hi) {
                    hi *= 2.0;
                    if hi > 1e12 {
                        return Err(Error::Numerical("reverse region appears empty".into()));
                    }
                }
                let umin = if feasible(1.0) { 1.0 } else { bisect_edge(feasible, hi, hi / 2.0) };
                let obj = |u: f64| e1 * u + e2 * self.boundary_inv_q(u, which).unwrap_or(f64::INFINITY);
                let f0 = obj(umin);
                let umax = if e1 > 0.0 { umin.max((f0 - e2) / e1) } else { umin.max(1e6) };
                let (u, _) = golden_min(obj, umin, umax, 1e-12);
                let u = [u, umin].into_iter().min_by(|a, b| obj(*a).total_cmp(&obj(*b))).unwrap_or(u);
                (u, self.boundary_inv_q(u, which).unwrap_or(1.0))
            }
        };
        let value = e1 * u + e2 * v;
        Ok((value, HolderPair::new(1.0 / u, 1.0 / v)?))
    }

    /// Limiting slope of the exponent along the ray through `(E1, E2)`,
    /// extrapolated from `t = 2^-3, ..., 2^-10`, next to the ribbon optimum.
    pub fn limit_slope(&self, e1: f64, e2: f64, which: Direction) -> Result<SlopeReport> {
        match which {
            Direction::Forward if e1 >= 0.0 && e2 >= 0.0 && e1 + e2 > 0.0 => {}
            Direction::Reverse if e1 > 0.0 && e2 > 0.0 => {}
            _ => {
                return Err(Error::OutOfRange(format!(
                    "({e1}, {e2}) not admissible for the {which:?} slope"
                )))
            }
        }
        let mut sequence = Vec::new();
        for k in 3..=10 {
            let t = 0.5f64.powi(k);
            let theta = match which {
                Direction::Forward => self.theta_lower(t * e1, t * e2)?,
                Direction::Reverse => self.theta_upper(t * e1, t * e2)?,
            };
            sequence.push((t, theta / t));
        }
        let monotone = sequence.windows(2).all(|w| match which {
            Direction::Forward => w[1].1 <= w[0].1 + 1e-9,
            Direction::Reverse => w[1].1 >= w[0].1 - 1e-9,
        });
        let tail = &sequence[sequence.len() - 4..];
        let extrapolated = linear_intercept(tail);
        let (ribbon, pq) = self.ribbon_optimum(e1, e2, which)?;
        Ok(SlopeReport {
            sequence,
            monotone,
            extrapolated,
            ribbon,
            pq,
        })
    }
}

/// `(1/t) Theta*(t E)` samples with their extrapolation to `t = 0` and the
/// region optimum attained at `pq`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeReport {
    pub sequence: Vec<(f64, f64)>,
    pub monotone: bool,
    pub extrapolated: f64,
    pub ribbon: f64,
    pub pq: HolderPair,
}

/// Point where `pred` switches, approached from `good` (where it holds)
/// towards `bad`; the returned point satisfies `pred`.
fn bisect_edge(pred: impl Fn(f64) -> bool, mut good: f64, mut bad: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (good + bad);
        if mid == good || mid == bad {
            break;
        }
        if pred(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

fn scan_min(cols: &[(f64, f64, f64)], cost: impl Fn(&(f64, f64, f64)) -> f64) -> LambdaValue {
    let mut best = LambdaValue {
        value: f64::INFINITY,
        s: 0.0,
        t: 0.0,
    };
    for c in cols {
        let v = cost(c);
        if v < best.value {
            best = LambdaValue { value: v, s: c.0, t: c.1 };
        }
    }
    best
}

fn mean_point(cols: &[(f64, f64, f64)], support: &[(usize, f64)]) -> (f64, f64) {
    support.iter().fold((0.0, 0.0), |(a, b), &(j, w)| (a + w * cols[j].0, b + w * cols[j].1))
}

/// Intercept at zero of the least-squares line through `(x, y)`.
fn linear_intercept(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        my
    } else {
        my - sxy / sxx * mx
    }
}

/// Exact finite-length check of the forward inequality on indicators of
/// marginal type classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub n: u64,
    /// Attaining point of `Lambda_lower`, in the surface base.
    pub s: f64,
    pub t: f64,
    /// Whether the attaining point sits on both box constraints.
    pub on_constraints: bool,
    /// `(1/n) ln (P(A x B) / (P(A)^{1/p} P(B)^{1/q}))` in nats.
    pub exponent: f64,
    /// `Lambda_lower` in nats.
    pub lambda: f64,
    /// `|exponent + lambda|` in nats.
    pub gap: f64,
}

/// Takes the marginals attaining `phi` at the attaining point of
/// `Lambda_lower_{p,q}(alpha, beta)`, rounds them to `n`-types and evaluates
/// the normalized correlation of the type-class indicators exactly.
/// Binary alphabets only.
pub fn sharpness_check(
    hs: &HyperSurfaces,
    pq: HolderPair,
    alpha: f64,
    beta: f64,
    n: u64,
) -> Result<SharpnessReport> {
    let p = hs.solver().joint();
    if p.rows() != 2 || p.cols() != 2 {
        return Err(Error::Precondition("the sharpness check needs binary alphabets".into()));
    }
    if n == 0 {
        return Err(Error::OutOfRange("n must be positive".into()));
    }
    let lam = hs.lambda_lower(pq, alpha, beta)?;
    let (qx, qy, _) = hs.solver().phi_pair(lam.s, lam.t)?;
    let kx = (n as f64 * qx.probs()[1]).round() as u64;
    let ky = (n as f64 * qy.probs()[1]).round() as u64;
    let ln_p: Vec<f64> = p.as_flat().iter().map(|v| v.ln()).collect();
    let term = |k: u64, v: f64| if k == 0 { 0.0 } else { k as f64 * v };
    let px = p.marginal_x();
    let py = p.marginal_y();
    let ln_marg = |k: u64, m: &[f64]| {
        ln_biguint(&binomial(n, k)) + term(n - k, m[0].ln()) + term(k, m[1].ln())
    };
    let ln_a = ln_marg(kx, px.probs());
    let ln_b = ln_marg(ky, py.probs());
    let mut terms = Vec::new();
    for n11 in (kx + ky).saturating_sub(n)..=kx.min(ky) {
        let c = [n - kx - ky + n11, ky - n11, kx - n11, n11];
        if c.iter().zip(&ln_p).any(|(&k, &l)| k > 0 && l == f64::NEG_INFINITY) {
            continue;
        }
        let m: BigUint = multinomial(&c);
        terms.push(ln_biguint(&m) + c.iter().zip(&ln_p).map(|(&k, &l)| term(k, l)).sum::<f64>());
    }
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_ab = top + terms.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
    let exponent = (ln_ab - ln_a * pq.inv_p() - ln_b * pq.inv_q()) / n as f64;
    let base = p.base();
    let lambda = base.to_nats(lam.value);
    let scale = 1e-6 * (1.0 + alpha.max(beta));
    Ok(SharpnessReport {
        n,
        s: lam.s,
        t: lam.t,
        on_constraints: (lam.s - alpha).abs() <= scale && (lam.t - beta).abs() <= scale,
        exponent,
        lambda,
        gap: (exponent + lambda).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsbs::{ribbon_member, DsbsParams};

    fn dsbs(rho: f64, grid: usize) -> HyperSurfaces {
        let p = DsbsParams::new(rho).unwrap().joint();
        HyperSurfaces::sample(&p, grid, HYPER_MIN_FRAC).unwrap()
    }

    fn pair(p: f64, q: f64) -> HolderPair {
        HolderPair::new(p, q).unwrap()
    }

    #[test]
    fn holder_pair_parsing_and_domains() {
        let hp: HolderPair = "1.9, inf".parse().unwrap();
        assert_eq!(hp.inv_q(), 0.0);
        assert!(hp.check(Direction::Forward).is_ok());
        assert!(hp.check(Direction::Reverse).is_err());
        assert!(hp.check_extended().is_err());
        assert!("0,1".parse::<HolderPair>().is_err());
        assert!("1.5".parse::<HolderPair>().is_err());
    }

    #[test]
    fn lambda_lower_zero_at_origin_on_forward_region() {
        let hs = dsbs(0.5, 120);
        let lam = hs.lambda_lower(pair(1.6, 1.6), 0.0, 0.0).unwrap();
        assert!(lam.value.abs() < 1e-12, "{lam:?}");
    }

    #[test]
    fn lambda_lower_matches_dense_grid() {
        let hs = dsbs(0.5, 200);
        let lam = hs.lambda_lower(pair(1.5, 1.5), 0.2, 0.2).unwrap();
        assert!((lam.value - 0.0015120072606090724).abs() < 1e-4, "{lam:?}");
        assert!(lam.value > 0.0);
    }

    #[test]
    fn lambda_lower_monotone_in_box() {
        let hs = dsbs(0.5, 80);
        let pq = pair(1.3, 1.7);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..6 {
            let a = 0.15 * k as f64;
            let lam = hs.lambda_lower(pq, a, 0.1).unwrap().value;
            assert!(lam >= prev - 1e-9);
            prev = lam;
        }
    }

    #[test]
    fn ribbon_law_forward_and_reverse() {
        let rho = 0.5;
        let params = DsbsParams::new(rho).unwrap();
        let hs = dsbs(rho, 200);
        for &c in &[1.01, 0.99] {
            for k in 0..5 {
                let a = rho * 0.4 + k as f64 * 0.3 * rho;
                let fwd = pair(1.0 + a, 1.0 + c * rho * rho / a);
                let m = hs.region_member(fwd, Direction::Forward).unwrap();
                assert_eq!(m.member, ribbon_member(&params, fwd.p(), fwd.q(), Direction::Forward).unwrap(), "{fwd} {m:?}");
                let u = 0.25 + 0.125 * k as f64;
                let x = (rho * rho * c).powf(u);
                let y = rho * rho * c / x;
                let rev = pair(1.0 - x, 1.0 - y);
                let m = hs.region_member(rev, Direction::Reverse).unwrap();
                assert_eq!(m.member, ribbon_member(&params, rev.p(), rev.q(), Direction::Reverse).unwrap(), "{rev} {m:?}");
            }
        }
    }

    #[test]
    fn non_member_reports_witness() {
        let hs = dsbs(0.5, 120);
        let m = hs.region_member(pair(1.2, 1.2), Direction::Forward).unwrap();
        assert!(!m.member);
        let (s, t) = m.witness.unwrap();
        let theta = hs.theta_lower(s, t).unwrap();
        assert!(theta < (s + t) / 1.2);
    }

    #[test]
    fn reverse_with_unit_q_is_outside_for_dsbs() {
        let hs = dsbs(0.5, 120);
        for &p in &[0.2, 0.5, 0.9, 1.0] {
            assert!(!hs.region_member(pair(p, 1.0), Direction::Reverse).unwrap().member);
        }
    }

    #[test]
    fn restricted_region_is_larger() {
        let hs = dsbs(0.5, 200);
        let pq = pair(1.49, 1.49);
        assert!(!hs.region_member(pq, Direction::Forward).unwrap().member);
        assert!(hs.restricted_region_member(pq, 0.3, 0.3, Direction::Forward).unwrap().member);
        let pq = pair(1.6, 1.6);
        assert!(hs.region_member(pq, Direction::Forward).unwrap().member);
        for &(a, b) in &[(0.0, 0.0), (0.2, 0.5), (0.7, 0.1)] {
            assert!(hs.restricted_region_member(pq, a, b, Direction::Forward).unwrap().member);
        }
        let rev = pair(0.5, 0.4);
        assert!(hs.region_member(rev, Direction::Reverse).unwrap().member);
        assert!(hs.restricted_region_member(rev, 0.3, 0.2, Direction::Reverse).unwrap().member);
    }

    #[test]
    fn lambda_upper_nonnegative_on_reverse_region() {
        let hs = dsbs(0.6, 120);
        let rev = pair(0.4, 0.3);
        let params = DsbsParams::new(0.6).unwrap();
        assert!(ribbon_member(&params, rev.p(), rev.q(), Direction::Reverse).unwrap());
        for &(a, b) in &[(0.0, 0.0), (0.1, 0.3), (0.5, 0.5), (0.9, 0.2)] {
            assert!(hs.lambda_upper(rev, a, b).unwrap().value >= -MEMBERSHIP_TOL);
        }
    }

    #[test]
    fn zero_entry_gives_negative_infinite_upper_factor() {
        let p = JointDist::new(vec![vec![0.5, 0.0], vec![0.25, 0.25]], Base::Bits).unwrap();
        let hs = HyperSurfaces::sample(&p, 20, 1e-3).unwrap();
        let lam = hs.lambda_upper(pair(0.5, 0.5), 0.1, 0.1).unwrap();
        assert_eq!(lam.value, f64::NEG_INFINITY);
        assert!(!hs.region_member(pair(0.5, 0.5), Direction::Reverse).unwrap().member);
    }

    #[test]
    fn forward_slope_symmetric_dsbs() {
        let rho = 0.5;
        let hs = dsbs(rho, 200);
        let rep = hs.limit_slope(1.0, 1.0, Direction::Forward).unwrap();
        assert!(rep.monotone);
        let want = 2.0 / (1.0 + rho);
        assert!((rep.ribbon - want).abs() < 1e-3, "{rep:?}");
        assert!((rep.extrapolated - want).abs() < 1e-3, "{rep:?}");
    }

    #[test]
    fn forward_slope_on_axis_is_e1() {
        let hs = dsbs(0.5, 120);
        let rep = hs.limit_slope(0.8, 0.0, Direction::Forward).unwrap();
        assert!((rep.ribbon - 0.8).abs() < 1e-6, "{rep:?}");
        assert!((rep.extrapolated - 0.8).abs() < 1e-6, "{rep:?}");
    }

    #[test]
    fn reverse_slope_matches_extrapolation() {
        let hs = dsbs(0.5, 200);
        let rep = hs.limit_slope(1.0, 0.5, Direction::Reverse).unwrap();
        assert!(rep.monotone);
        assert!((rep.ribbon - rep.extrapolated).abs() < 2e-3, "{rep:?}");
        // min of 1/p + 0.5/q over (1 - p)(1 - q) = 1/4
        assert!((rep.ribbon - 2.942809041582063).abs() < 1e-3, "{rep:?}");
        assert!(hs.limit_slope(1.0, 0.0, Direction::Reverse).is_err());
    }

    #[test]
    fn theta_dominates_sampled_ribbon_planes() {
        let rho = 0.5;
        let hs = dsbs(rho, 80);
        for &(e1, e2) in &[(0.2, 0.3), (0.5, 0.5), (0.9, 0.1)] {
            let lo = hs.theta_lower(e1, e2).unwrap();
            let hi = hs.theta_upper(e1, e2).unwrap();
            for k in 0..10 {
                let a = 0.05 + 0.3 * k as f64;
                let (p, q) = (1.0 + a, 1.0 + rho * rho / a);
                assert!(lo >= e1 / p + e2 / q - 1e-9);
                let x = (rho * rho).powf(0.1 + 0.08 * k as f64);
                let (p, q) = (1.0 - x, 1.0 - rho * rho / x);
                assert!(hi <= e1 / p + e2 / q + 1e-9);
            }
        }
    }

    #[test]
    fn type_class_indicators_are_sharp() {
        let hs = HyperSurfaces::sample(&DsbsParams::new(0.5).unwrap().joint(), 200, HYPER_MIN_FRAC).unwrap();
        let rep = sharpness_check(&hs, pair(1.6, 1.6), 0.2, 0.2, 256).unwrap();
        assert!(rep.on_constraints, "{rep:?}");
        assert!(rep.exponent <= 1e-12);
        assert!(rep.gap < 0.02, "{rep:?}");
    }
}
