//! Closed forms for the doubly symmetric binary source (DSBS).
//!
//! The source has uniform binary marginals and `P(x = y) = (1 + rho) / 2`.
//! Everything in this module is measured in bits. Marginals are described by
//! the probability of the symbol `1`: `alpha = Q_X(1)`, `beta = Q_Y(1)`, and
//! `p = Q(1, 1)`.
//!
//! ```
//! use typeflow::dsbs::{DsbsParams, dd, p_star};
//!
//! let d = DsbsParams::new(0.5).unwrap();
//! assert!((p_star(&d, 0.5, 0.5) - 0.375).abs() < 1e-15);
//! assert!(dd(&d, 0.5, 0.5).abs() < 1e-15);
//! ```

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling;
use crate::error::{Error, Result};
use crate::geom::{bisect, eval_hull, golden_max, golden_min, upper_hull_1d};
use crate::probcore::{kl_kernel, kl_nats, Base, JointDist};

/// Correlation parameter of a DSBS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsbsParams {
    rho: f64,
}

impl DsbsParams {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::OutOfRange(format!("rho must lie in (0, 1), got {rho}")));
        }
        Ok(DsbsParams { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `((1 + rho) / (1 - rho))^2`.
    pub fn k(&self) -> f64 {
        let r = (1.0 + self.rho) / (1.0 - self.rho);
        r * r
    }

    /// The joint distribution `[[(1+rho)/4, (1-rho)/4], [(1-rho)/4, (1+rho)/4]]`, in bits.
    pub fn joint(&self) -> JointDist {
        let a = (1.0 + self.rho) / 4.0;
        let b = (1.0 - self.rho) / 4.0;
        JointDist::from_flat_raw(2, 2, vec![a, b, b, a], Base::Bits)
    }

    fn cells(&self) -> [f64; 4] {
        let a = (1.0 + self.rho) / 4.0;
        let b = (1.0 - self.rho) / 4.0;
        [a, b, b, a]
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(format!("{name} must lie in [0, 1], got {x}")));
    }
    Ok(())
}

/// Binary entropy in bits.
pub fn h2(x: f64) -> Result<f64> {
    check_unit("x", x)?;
    let f = |v: f64| if v > 0.0 { -v * v.log2() } else { 0.0 };
    Ok(f(x) + f(1.0 - x))
}

/// `1 - h2((1 - u) / 2)`, accurate for small `u`.
fn gap_from_center(u: f64) -> f64 {
    (kl_kernel(u) + kl_kernel(-u)) / (2.0 * LN_2)
}

/// The point `a` in `[0, 1/2]` with `1 - h2(a) = s`, i.e. the lower point of
/// the binary KL sphere of radius `s` bits around the uniform distribution.
pub fn h2_inv_complement(s: f64) -> Result<f64> {
    check_unit("s", s)?;
    if s == 0.0 {
        return Ok(0.5);
    }
    if s == 1.0 {
        return Ok(0.0);
    }
    let u = bisect(|u| gap_from_center(u) - s, 0.0, 1.0);
    Ok(0.5 * (1.0 - u))
}

/// Inverse of `h2` restricted to `[0, 1/2]`.
pub fn h2_inv(y: f64) -> Result<f64> {
    check_unit("y", y)?;
    h2_inv_complement(1.0 - y)
}

/// Relative entropy in bits between the coupling with cells
/// `(p, alpha - p, beta - p, 1 + p - alpha - beta)` and the DSBS table.
pub fn d_alpha_beta(params: &DsbsParams, alpha: f64, beta: f64, p: f64) -> Result<f64> {
    check_unit("alpha", alpha)?;
    check_unit("beta", beta)?;
    let lo = (alpha + beta - 1.0).max(0.0);
    let hi = alpha.min(beta);
    const SLACK: f64 = 1e-12;
    if p < lo - SLACK || p > hi + SLACK {
        return Err(Error::OutOfRange(format!(
            "p = {p} outside the coupling interval [{lo}, {hi}]"
        )));
    }
    Ok(d_unchecked(params, alpha, beta, p.clamp(lo, hi)))
}

fn d_unchecked(params: &DsbsParams, alpha: f64, beta: f64, p: f64) -> f64 {
    let q = [
        p,
        (alpha - p).max(0.0),
        (beta - p).max(0.0),
        (1.0 + p - alpha - beta).max(0.0),
    ];
    kl_nats(&q, &params.cells()) / LN_2
}

/// Minimizer over `p` of [`d_alpha_beta`], in closed form.
pub fn p_star(params: &DsbsParams, alpha: f64, beta: f64) -> f64 {
    let k = params.k();
    let s = (k - 1.0) * (alpha + beta) + 1.0;
    let disc = (s * s - 4.0 * k * (k - 1.0) * alpha * beta).max(0.0);
    let p = 2.0 * k * alpha * beta / (s + disc.sqrt());
    let lo = (alpha + beta - 1.0).max(0.0);
    p.min(alpha.min(beta)).max(lo)
}

/// Minimum relative entropy in bits over couplings of `Bern(alpha)` and
/// `Bern(beta)` with respect to the DSBS.
pub fn dd(params: &DsbsParams, alpha: f64, beta: f64) -> f64 {
    d_unchecked(params, alpha, beta, p_star(params, alpha, beta))
}

/// Closed-form `(phi(s, t), psi(s, t))` in bits for `s, t` in `[0, 1]`.
pub fn phi_psi_dsbs(params: &DsbsParams, s: f64, t: f64) -> Result<(f64, f64)> {
    let a = h2_inv_complement(s)?;
    let b = h2_inv_complement(t)?;
    Ok((dd(params, a, b), dd(params, a, 1.0 - b)))
}

/// Forward and reverse small-set expansion bounds in bits.
pub fn prop4_bounds(params: &DsbsParams, e1: f64, e2: f64) -> (f64, f64) {
    let r = params.rho;
    let r2 = r * r;
    let root = 2.0 * r * (e1 * e2).sqrt();
    let forward = if e2 < r2 * e1 {
        e1
    } else if e2 * r2 > e1 {
        e2
    } else {
        (e1 + e2 - root) / (1.0 - r2)
    };
    let reverse = (e1 + e2 + root) / (1.0 - r2);
    (forward, reverse)
}

/// Which hypercontractivity region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

/// Membership in the DSBS hypercontractivity ribbon `(p - 1)(q - 1) >= rho^2`.
/// `p` or `q` may be `+inf` in the forward direction.
pub fn ribbon_member(params: &DsbsParams, p: f64, q: f64, which: Direction) -> Result<bool> {
    let ok = match which {
        Direction::Forward => p >= 1.0 && q >= 1.0,
        Direction::Reverse => p > 0.0 && p <= 1.0 && q > 0.0 && q <= 1.0,
    };
    if !ok {
        return Err(Error::OutOfRange(format!(
            "({p}, {q}) outside the {which:?} quadrant"
        )));
    }
    if p.is_infinite() || q.is_infinite() {
        return Ok(p > 1.0 && q > 1.0);
    }
    Ok((p - 1.0) * (q - 1.0) >= params.rho * params.rho)
}

/// Samples of `g(t) = psi(0, t) = psi(t, 0)` over the whole range, sorted by
/// `t`, together with their upper concave hull.
#[derive(Debug, Clone)]
pub struct AxisCurve {
    t: Vec<f64>,
    g: Vec<f64>,
    hull: Vec<usize>,
}

impl AxisCurve {
    /// Samples `g` at `samples` points uniform in `beta = h2_inv_complement(t)`.
    pub fn new(params: &DsbsParams, samples: usize) -> Self {
        let n = samples.max(3);
        let mut t = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        for i in 0..n {
            let u = i as f64 / (n - 1) as f64;
            let beta = 0.5 * (1.0 - u);
            t.push(gap_from_center(u).min(1.0));
            g.push(dd(params, 0.5, beta));
        }
        let hull = upper_hull_1d(&t, &g);
        AxisCurve { t, g, hull }
    }

    /// Concave envelope of `g` at `e`.
    pub fn envelope(&self, e: f64) -> f64 {
        eval_hull(&self.t, &self.g, &self.hull, e.clamp(0.0, 1.0)).unwrap_or(f64::NAN)
    }

    /// Smallest `e` with `envelope(e) >= level`, if any.
    pub fn crossing(&self, level: f64) -> Option<f64> {
        let h = &self.hull;
        if self.g[h[0]] >= level {
            return Some(self.t[h[0]]);
        }
        for w in h.windows(2) {
            let (a, b) = (w[0], w[1]);
            if self.g[b] >= level {
                let frac = (level - self.g[a]) / (self.g[b] - self.g[a]);
                return Some(self.t[a] + frac * (self.t[b] - self.t[a]));
            }
        }
        None
    }
}

fn axis_g(params: &DsbsParams, t: f64) -> f64 {
    let b = h2_inv_complement(t.clamp(0.0, 1.0)).unwrap_or(0.5);
    dd(params, 0.5, b)
}

/// `Theta-bar*(0, e)` (equivalently `Theta-bar*(e, 0+)`) in bits via the
/// concave envelope of `psi(0, .)`.
pub fn theta_upper_axis(params: &DsbsParams, e: f64) -> Result<f64> {
    check_unit("E", e)?;
    Ok(AxisCurve::new(params, 20_001).envelope(e))
}

/// Same quantity by direct search over auxiliary variables with two atoms
/// `t_a <= e <= t_b` (a third atom never helps with a single constraint).
pub fn theta_upper_axis_direct(params: &DsbsParams, e: f64) -> Result<f64> {
    check_unit("E", e)?;
    let g = |t: f64| axis_g(params, t);
    let ge = g(e);
    if e == 0.0 || e == 1.0 {
        return Ok(ge);
    }
    let chord = |ta: f64, tb: f64| {
        if tb <= ta {
            return g(e);
        }
        let w = (tb - e) / (tb - ta);
        w * g(ta) + (1.0 - w) * g(tb)
    };
    let grid = 24;
    let mut seeds = Vec::new();
    for i in 0..=grid {
        for j in 0..=grid {
            let ta = e * i as f64 / grid as f64;
            let tb = e + (1.0 - e) * j as f64 / grid as f64;
            seeds.push((chord(ta, tb), ta, tb));
        }
    }
    seeds.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = ge;
    for &(_, mut ta, mut tb) in seeds.iter().take(4) {
        for _ in 0..40 {
            let (na, _) = golden_max(|x| chord(x, tb), 0.0, e, 1e-13);
            ta = na;
            let (nb, _) = golden_max(|x| chord(ta, x), e, 1.0, 1e-13);
            tb = nb;
        }
        best = best.max(chord(ta, tb));
    }
    Ok(best)
}

/// Gap between the limit `Theta-bar*(E1, 0+)` and the boundary value `E1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscontinuityReport {
    pub e1: f64,
    pub theta_star: f64,
    pub margin: f64,
    pub direct_theta_star: f64,
    pub route_gap: f64,
}

/// Evaluates `Theta-bar*(E1, 0+) - E1` by the envelope route and the direct
/// two-atom route.
pub fn discontinuity_check(params: &DsbsParams, e1: f64) -> Result<DiscontinuityReport> {
    if !(e1 > 0.0 && e1 <= 1.0) {
        if e1 == 0.0 {
            return Ok(DiscontinuityReport {
                e1,
                theta_star: 0.0,
                margin: 0.0,
                direct_theta_star: 0.0,
                route_gap: 0.0,
            });
        }
        return Err(Error::OutOfRange(format!("E1 must lie in (0, 1], got {e1}")));
    }
    let theta = theta_upper_axis(params, e1)?;
    let direct = theta_upper_axis_direct(params, e1)?;
    Ok(DiscontinuityReport {
        e1,
        theta_star: theta,
        margin: theta - e1,
        direct_theta_star: direct,
        route_gap: (theta - direct).abs(),
    })
}

/// `3/2 - log2(3 - rho)`.
pub fn bac_level(rho: f64) -> f64 {
    1.5 - (3.0 - rho).log2()
}

/// Largest `R2` allowed at `R1 = 1` by the zero-error bound for a fixed `rho`.
pub fn bac_r2_for_rho(params: &DsbsParams, samples: usize) -> Option<f64> {
    let curve = AxisCurve::new(params, samples);
    curve.crossing(bac_level(params.rho)).map(|e| 0.5 * (1.0 - e))
}

/// Result of the zero-error bound optimization at `R1 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacBound {
    pub rho_best: f64,
    pub r2_bound: f64,
    /// Direct-route value of `Theta-bar*(0, 1 - 2 R2)` at the optimum minus
    /// the envelope-route value.
    pub route_gap: f64,
}

/// Minimizes the `R2` bound over `rho`: a grid on `[0.5, 0.9]` with step
/// `1e-3` followed by golden-section refinement.
pub fn bac_r2_max() -> Result<BacBound> {
    const SAMPLES: usize = 20_001;
    let eval = |rho: f64| -> f64 {
        DsbsParams::new(rho)
            .ok()
            .and_then(|p| bac_r2_for_rho(&p, SAMPLES))
            .unwrap_or(f64::INFINITY)
    };
    let grid: Vec<f64> = (0..=400).map(|i| 0.5 + i as f64 * 1e-3).collect();
    let vals: Vec<f64> = grid.par_iter().map(|&r| eval(r)).collect();
    let (ib, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Numerical("empty rho grid".into()))?;
    let lo = grid[ib.saturating_sub(1)];
    let hi = grid[(ib + 1).min(grid.len() - 1)];
    let (rho_best, r2_bound) = golden_min(eval, lo, hi, 1e-6);
    if !r2_bound.is_finite() {
        return Err(Error::Numerical("no rho admits a finite bound".into()));
    }
    let params = DsbsParams::new(rho_best)?;
    let e = (1.0 - 2.0 * r2_bound).clamp(0.0, 1.0);
    let direct = theta_upper_axis_direct(&params, e)?;
    let env = AxisCurve::new(&params, SAMPLES).envelope(e);
    Ok(BacBound {
        rho_best,
        r2_bound,
        route_gap: direct - env,
    })
}

/// Residual of the zero-error constraint for `(1 - eps, r2)` at a given `rho`:
/// the maximum over admissible `lambda` of the left side minus the right
/// side. A negative residual rules the rate pair out.
pub fn bac_bound(params: &DsbsParams, eps: f64, r2: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::OutOfRange(format!("eps must be nonnegative, got {eps}")));
    }
    check_unit("R2", r2)?;
    let delta = (LN_2 * eps / 2.0).sqrt();
    let rhs = |lam: f64| lam * (2.5 - (3.0 - params.rho).log2()) - 0.5 - eps - delta;
    if eps == 0.0 {
        let e2 = 1.0 - 2.0 * r2;
        if !(0.0..=1.0).contains(&e2) {
            return Err(Error::OutOfRange(format!("1 - 2 R2 = {e2} outside [0, 1]")));
        }
        return Ok(0.5 * theta_upper_axis(params, e2)? - rhs(0.5));
    }
    let p = params.joint();
    let surf = coupling::ThetaSurfaces::for_joint(&p, 32)?;
    let steps = 16;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=steps {
        let lam = 0.5 - delta + 2.0 * delta * i as f64 / steps as f64;
        if lam <= 0.0 {
            continue;
        }
        let (e1, e2) = (eps / lam, (lam + eps - r2) / lam);
        if !(0.0..=1.0).contains(&e1) || !(0.0..=1.0).contains(&e2) {
            continue;
        }
        let v = lam * surf.theta_upper(e1, e2)? - rhs(lam);
        best = best.max(v);
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::OutOfRange("no admissible lambda for these rates".into()));
    }
    Ok(best)
}

/// Result of the midpoint convexity/concavity scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop6Report {
    pub grid: usize,
    pub pairs_checked: usize,
    pub convexity_violations: usize,
    pub concavity_violations: usize,
    pub worst_convexity_excess: f64,
    pub worst_concavity_excess: f64,
}

/// `min_{s >= e1, t >= e2} phi(s, t)` in bits.
pub fn phi_quadrant_min(params: &DsbsParams, e1: f64, e2: f64) -> Result<f64> {
    let a1 = h2_inv_complement(e1)?;
    let b1 = h2_inv_complement(e2)?;
    // s >= e1 means alpha <= a1. The divergence is jointly convex with its
    // minimum at (1/2, 1/2), so the box minimum lies on an edge facing it.
    let (_, m1) = golden_min(|b| dd(params, a1, b), 0.0, b1, 1e-14);
    let (_, m2) = golden_min(|a| dd(params, a, b1), 0.0, a1, 1e-14);
    Ok(m1.min(m2).min(dd(params, a1, b1)))
}

/// Midpoint tests of convexity of [`phi_quadrant_min`] and concavity of `psi`
/// over a `grid x grid` lattice on `[0, 1]^2` bits. Every pair of lattice
/// points whose midpoint is a lattice point is checked.
pub fn prop6_premise_check(params: &DsbsParams, grid: usize, tol: f64) -> Result<Prop6Report> {
    if grid < 2 {
        return Err(Error::OutOfRange("grid must have at least 2 points".into()));
    }
    let pts: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let idx: Vec<(usize, usize)> = (0..grid).flat_map(|i| (0..grid).map(move |j| (i, j))).collect();
    let vals: Vec<Result<(f64, f64)>> = idx
        .par_iter()
        .map(|&(i, j)| {
            let m = phi_quadrant_min(params, pts[i], pts[j])?;
            let (_, psi) = phi_psi_dsbs(params, pts[i], pts[j])?;
            Ok((m, psi))
        })
        .collect();
    let mut m = vec![0.0; grid * grid];
    let mut psi = vec![0.0; grid * grid];
    for (k, v) in vals.into_iter().enumerate() {
        let (a, b) = v?;
        m[k] = a;
        psi[k] = b;
    }
    let mut report = Prop6Report {
        grid,
        pairs_checked: 0,
        convexity_violations: 0,
        concavity_violations: 0,
        worst_convexity_excess: f64::NEG_INFINITY,
        worst_concavity_excess: f64::NEG_INFINITY,
    };
    let at = |i: usize, j: usize| i * grid + j;
    for i1 in 0..grid {
        for j1 in 0..grid {
            for i2 in i1..grid {
                for j2 in 0..grid {
                    if (i2 == i1 && j2 <= j1) || (i1 + i2) % 2 != 0 || (j1 + j2) % 2 != 0 {
                        continue;
                    }
                    let (a, b, c) = (at(i1, j1), at(i2, j2), at((i1 + i2) / 2, (j1 + j2) / 2));
                    report.pairs_checked += 1;
                    let cx = m[c] - 0.5 * (m[a] + m[b]);
                    let cv = 0.5 * (psi[a] + psi[b]) - psi[c];
                    report.worst_convexity_excess = report.worst_convexity_excess.max(cx);
                    report.worst_concavity_excess = report.worst_concavity_excess.max(cv);
                    if cx > tol {
                        report.convexity_violations += 1;
                    }
                    if cv > tol {
                        report.concavity_violations += 1;
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Counts grid points of `(0, 1/2]^2` where
/// `D(a, b) = D(1-a, 1-b) <= D(a, 1-b) = D(1-a, b)` fails by more than `tol`.
pub fn lemma7_violations(params: &DsbsParams, grid: usize, tol: f64) -> usize {
    let mut bad = 0;
    for i in 1..=grid {
        for j in 1..=grid {
            let a = 0.5 * i as f64 / grid as f64;
            let b = 0.5 * j as f64 / grid as f64;
            let same = dd(params, a, b);
            let same_flip = dd(params, 1.0 - a, 1.0 - b);
            let cross = dd(params, a, 1.0 - b);
            let cross_flip = dd(params, 1.0 - a, b);
            if (same - same_flip).abs() > tol
                || (cross - cross_flip).abs() > tol
                || same > cross + tol
            {
                bad += 1;
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(rho: f64) -> DsbsParams {
        DsbsParams::new(rho).unwrap()
    }

    #[test]
    fn binary_entropy_and_inverse() {
        assert_eq!(h2(0.5).unwrap(), 1.0);
        assert_eq!(h2(0.0).unwrap(), 0.0);
        assert_eq!(h2_inv(1.0).unwrap(), 0.5);
        assert_eq!(h2_inv(0.0).unwrap(), 0.0);
        // Oracle: plain bisection on h2 over [0, 1/2].
        let mut lo = 0.0f64;
        let mut hi = 0.5f64;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if h2(mid).unwrap() < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((h2_inv(0.5).unwrap() - 0.110_027_864_438_359_55).abs() < 1e-12);
        assert!((h2_inv(0.5).unwrap() - lo).abs() < 1e-12);
        for x in [0.01, 0.1, 0.25, 0.4, 0.4999] {
            assert!((h2_inv(h2(x).unwrap()).unwrap() - x).abs() < 1e-9);
        }
        assert!(h2(1.5).is_err());
    }

    #[test]
    fn tiny_radius_inverse_is_accurate() {
        // 1 - h2((1-u)/2) ~ u^2 / (2 ln 2) for small u.
        let s = 1e-12;
        let a = h2_inv_complement(s).unwrap();
        let u = 1.0 - 2.0 * a;
        assert!((u - (2.0 * LN_2 * s).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn d_alpha_beta_examples() {
        let d = params(0.5);
        assert_eq!(d_alpha_beta(&d, 0.5, 0.5, 0.375).unwrap(), 0.0);
        assert!(d_alpha_beta(&d, 0.3, 0.4, 0.3).unwrap().is_finite());
        // Reference from 50-digit summation of the four terms.
        let v = d_alpha_beta(&d, 0.3, 0.4, 0.2).unwrap();
        assert!((v - 0.129_562_202_051_509_5).abs() < 1e-13, "{v}");
        assert!(d_alpha_beta(&d, 0.3, 0.4, 0.35).is_err());
    }

    #[test]
    fn p_star_matches_grid_argmin() {
        let d = params(0.5);
        assert!((p_star(&d, 0.5, 0.5) - 0.375).abs() < 1e-15);
        let (arg, _) = golden_min(|p| d_unchecked(&d, 0.3, 0.3, p), 0.0, 0.3, 1e-12);
        assert!((p_star(&d, 0.3, 0.3) - arg).abs() < 1e-6);
        assert!((p_star(&d, 0.3, 0.3) - 0.188_844_450_131_877_44).abs() < 1e-12);
        assert!((dd(&d, 0.3, 0.2) - dd(&d, 0.7, 0.8)).abs() < 1e-12);
    }

    #[test]
    fn phi_psi_basics() {
        let d = params(0.9);
        let (f, g) = phi_psi_dsbs(&d, 0.0, 0.0).unwrap();
        assert!(f.abs() < 1e-15 && g.abs() < 1e-15);
        for &(s, t) in &[(0.1, 0.2), (0.5, 0.5), (0.9, 0.3), (1.0, 1.0)] {
            let (f, g) = phi_psi_dsbs(&d, s, t).unwrap();
            assert!(f <= g + 1e-12);
        }
        assert!(phi_psi_dsbs(&d, 1.2, 0.0).is_err());
    }

    #[test]
    fn prop4_cases() {
        let d = params(0.5);
        let (f, _) = prop4_bounds(&d, 1.0, 0.2);
        assert_eq!(f, 1.0);
        let (f, r) = prop4_bounds(&d, 0.4, 0.4);
        assert!((f - 0.8 / 1.5).abs() < 1e-15);
        assert!((r - 0.8 / 0.5).abs() < 1e-15);
        let (f, _) = prop4_bounds(&d, 0.1, 0.9);
        assert_eq!(f, 0.9);
    }

    #[test]
    fn ribbon_examples() {
        let d = params(0.4);
        assert!(ribbon_member(&d, 1.45, 1.45, Direction::Forward).unwrap());
        assert!(!ribbon_member(&d, 1.0, 5.0, Direction::Forward).unwrap());
        assert!(ribbon_member(&d, 0.6, 0.6, Direction::Reverse).unwrap());
        assert!(ribbon_member(&d, 0.5, 1.5, Direction::Reverse).is_err());
    }

    #[test]
    fn axis_routes_agree_and_gap_is_positive() {
        let d = params(0.9);
        for e in [0.25, 0.5, 1.0] {
            let r = discontinuity_check(&d, e).unwrap();
            assert!(r.margin > 0.05, "{r:?}");
            assert!(r.route_gap < 1e-4, "{r:?}");
        }
        let small = discontinuity_check(&d, 1e-4).unwrap();
        assert!(small.margin < 1e-2);
        assert_eq!(discontinuity_check(&d, 0.0).unwrap().margin, 0.0);
    }

    #[test]
    fn bac_level_limit() {
        assert!((bac_level(1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bac_single_rho_value() {
        // Reference from an independent envelope computation at rho = 0.6933.
        let r2 = bac_r2_for_rho(&params(0.6933), 20_001).unwrap();
        assert!((r2 - 0.417_685_4).abs() < 2e-6, "{r2}");
    }

    #[test]
    fn lemma7_on_small_grid() {
        assert_eq!(lemma7_violations(&params(0.6), 20, 1e-9), 0);
    }
}
