//! Small numerical helpers shared across modules: 1-D hulls and
//! golden-section search.

/// Upper concave hull of points sorted by `x`; returns indices of hull vertices.
pub(crate) fn upper_hull_1d(xs: &[f64], ys: &[f64]) -> Vec<usize> {
    hull_1d(xs, ys, true)
}

fn hull_1d(xs: &[f64], ys: &[f64], upper: bool) -> Vec<usize> {
    let mut h: Vec<usize> = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        if !ys[i].is_finite() {
            continue;
        }
        if let Some(&last) = h.last() {
            if xs[i] == xs[last] {
                let better = if upper { ys[i] > ys[last] } else { ys[i] < ys[last] };
                if better {
                    h.pop();
                } else {
                    continue;
                }
            }
        }
        while h.len() >= 2 {
            let a = h[h.len() - 2];
            let b = h[h.len() - 1];
            let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
            let drop = if upper { cross >= 0.0 } else { cross <= 0.0 };
            if drop {
                h.pop();
            } else {
                break;
            }
        }
        h.push(i);
    }
    h
}

/// Piecewise-linear interpolation through hull vertices; `None` outside the
/// covered range.
pub(crate) fn eval_hull(xs: &[f64], ys: &[f64], hull: &[usize], x: f64) -> Option<f64> {
    let first = *hull.first()?;
    let last = *hull.last()?;
    if x < xs[first] || x > xs[last] {
        return None;
    }
    let k = hull.partition_point(|&i| xs[i] < x);
    if k == 0 {
        return Some(ys[hull[0]]);
    }
    let (a, b) = (hull[k - 1], hull[k.min(hull.len() - 1)]);
    if xs[b] == xs[a] {
        return Some(ys[b]);
    }
    let w = (x - xs[a]) / (xs[b] - xs[a]);
    Some((1.0 - w) * ys[a] + w * ys[b])
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizes a unimodal function on `[a, b]`; returns `(argmin, min)`.
pub(crate) fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (fa, fb) = (f(a), f(b));
    let mut best = if fc < fd { (c, fc) } else { (d, fd) };
    if fa < best.1 {
        best = (a, fa);
    }
    if fb < best.1 {
        best = (b, fb);
    }
    best
}

/// Maximizes a unimodal function on `[a, b]`; returns `(argmax, max)`.
pub(crate) fn golden_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_min(|x| -f(x), a, b, tol);
    (x, -v)
}

/// Bisection for the root of a monotone function with `f(lo)` and `f(hi)` of
/// opposite signs. Runs until the bracket stops shrinking.
pub(crate) fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    let increasing = flo < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if (fm < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_hull_of_tent() {
        // min(x, 1 - x) on [0, 1]: the lower convex hull is the chord y = 0
        // through the two endpoints.
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| x.min(1.0 - x)).collect();
        let h = hull_1d(&xs, &ys, false);
        assert_eq!(h, vec![0, 10]);
        for &x in &[0.0, 0.35, 0.5, 1.0] {
            assert!(eval_hull(&xs, &ys, &h, x).unwrap().abs() < 1e-15);
        }
        let up = upper_hull_1d(&xs, &ys);
        assert_eq!(up, vec![0, 5, 10]);
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, v) = golden_min(|x| (x - 0.3) * (x - 0.3) + 1.0, 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bisect_square_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }
}
