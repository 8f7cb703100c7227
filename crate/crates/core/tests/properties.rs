//! Property-based checks of the library invariants.

use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use typeflow::coupling::{min_kl_coupling, CouplingProblem};
use typeflow::dsbs::{d_alpha_beta, dd, p_star, DsbsParams};
use typeflow::exchange::{exchange_partition, SubspacePair, DET_TOL};
use typeflow::hyper::{Direction, HolderPair, HyperSurfaces};
use typeflow::probcore::{info_measures, kl_div, Base, Dist, JointDist, JointNType};
use typeflow::singleletter::{FStarOptions, FStarSolver, RatePoint};
use typeflow::typegraph::{build_graph, gamma_n, rate_to_size, size_to_rate, SearchMode};

fn weights(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, k)
}

fn dist(k: usize) -> impl Strategy<Value = Dist> {
    weights(k).prop_map(|w| Dist::normalize(w, Base::Nats).unwrap())
}

fn joint(rows: usize, cols: usize) -> impl Strategy<Value = JointDist> {
    weights(rows * cols).prop_map(move |w| {
        let rows_v: Vec<Vec<f64>> = w.chunks(cols).map(<[f64]>::to_vec).collect();
        JointDist::normalize(rows_v, Base::Nats).unwrap()
    })
}

fn mix(a: &Dist, b: &Dist, l: f64) -> Dist {
    let v = a.probs().iter().zip(b.probs()).map(|(x, y)| l * x + (1.0 - l) * y).collect();
    Dist::normalize(v, Base::Nats).unwrap()
}

fn flat(j: &JointDist) -> Dist {
    Dist::new(j.as_flat().to_vec(), j.base()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_is_jointly_convex(q1 in dist(4), q2 in dist(4), p1 in dist(4), p2 in dist(4), l in 0.0f64..1.0) {
        let lhs = kl_div(&mix(&q1, &q2, l), &mix(&p1, &p2, l));
        let rhs = l * kl_div(&q1, &p1) + (1.0 - l) * kl_div(&q2, &p2);
        prop_assert!(lhs <= rhs + 1e-12);
        prop_assert!(kl_div(&q1, &p1) >= 0.0);
        prop_assert!(kl_div(&q1, &q1).abs() < 1e-15);
    }

    #[test]
    fn marginalization_does_not_increase_kl(q in joint(2, 3), p in joint(2, 3)) {
        let full = kl_div(&flat(&q), &flat(&p));
        prop_assert!(kl_div(&q.marginal_x(), &p.marginal_x()) <= full + 1e-12);
        prop_assert!(kl_div(&q.marginal_y(), &p.marginal_y()) <= full + 1e-12);
    }

    #[test]
    fn entropies_are_consistent(t in joint(3, 2)) {
        let m = info_measures(&t);
        prop_assert!(m.i_xy >= 0.0);
        prop_assert!(m.h_xy <= m.h_x + m.h_y + 1e-12);
        prop_assert!(m.h_xy + 1e-12 >= m.h_x.max(m.h_y));
        prop_assert!((m.h_x_given_y + m.h_y - m.h_xy).abs() < 1e-12);
    }

    #[test]
    fn independent_pair_is_additive(px in dist(3), py in dist(2)) {
        let t = JointDist::product(&px, &py);
        let m = info_measures(&t);
        prop_assert!(m.i_xy < 1e-12);
        prop_assert!((m.h_xy - px.entropy() - py.entropy()).abs() < 1e-12);
    }

    #[test]
    fn coupling_matches_marginals_and_is_sandwiched(p in joint(2, 3), qx in dist(2), qy in dist(3)) {
        let cp = CouplingProblem::new(qx.clone(), qy.clone(), p.clone()).unwrap();
        let sol = min_kl_coupling(&cp).unwrap();
        let q = sol.coupling.expect("full support admits a coupling");
        for (a, b) in q.marginal_x().probs().iter().zip(qx.probs()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in q.marginal_y().probs().iter().zip(qy.probs()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let lower = kl_div(&qx, &p.marginal_x()).max(kl_div(&qy, &p.marginal_y()));
        let upper = kl_div(&flat(&JointDist::product(&qx, &qy)), &flat(&p));
        prop_assert!(sol.value >= lower - 1e-9);
        prop_assert!(sol.value <= upper + 1e-9);
        prop_assert!((kl_div(&flat(&q), &flat(&p)) - sol.value).abs() < 1e-9);
    }

    #[test]
    fn dsbs_p_star_minimizes(rho in 0.05f64..0.95, alpha in 0.0f64..1.0, beta in 0.0f64..1.0, u in 0.0f64..1.0) {
        let params = DsbsParams::new(rho).unwrap();
        let lo = (alpha + beta - 1.0).max(0.0);
        let hi = alpha.min(beta);
        let p = lo + u * (hi - lo);
        let best = dd(&params, alpha, beta);
        prop_assert!(best <= d_alpha_beta(&params, alpha, beta, p).unwrap() + 1e-12);
        let ps = p_star(&params, alpha, beta);
        prop_assert!(ps >= lo && ps <= hi);
        prop_assert!((dd(&params, alpha, beta) - dd(&params, 1.0 - alpha, 1.0 - beta)).abs() < 1e-9);
    }

    #[test]
    fn exchange_partition_is_valid(n in 2usize..9, n1_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sp = SubspacePair::random(n, &mut rng).unwrap();
        let n1 = 1 + ((n1_frac * (n - 1) as f64) as usize).min(n - 2);
        let part = exchange_partition(&sp, n1).unwrap();
        prop_assert_eq!(part.j.len(), n1);
        prop_assert_eq!(part.jc.len(), n - n1);
        let mut all: Vec<usize> = part.j.iter().chain(&part.jc).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(part.residuals.0 < 1e-9 && part.residuals.1 < 1e-9);
        prop_assert!(part.dets.0.abs() > DET_TOL && part.dets.1.abs() > DET_TOL);
    }

    #[test]
    fn rates_and_sizes_round_trip(m in 1usize..10_000, n in 1u64..50) {
        prop_assert_eq!(rate_to_size(size_to_rate(m, n), n, 10_000).unwrap(), m);
    }

    #[test]
    fn holder_pairs_round_trip(p in 1.0f64..50.0, q in 1.0f64..50.0) {
        let pq = HolderPair::new(p, q).unwrap();
        let back: HolderPair = pq.to_string().parse().unwrap();
        prop_assert_eq!(back, pq);
    }
}

fn counts_2x2() -> impl Strategy<Value = JointNType> {
    prop::collection::vec(0u64..2, 4)
        .prop_filter("nonempty", |c| c.iter().sum::<u64>() > 0)
        .prop_map(|c| JointNType::new(vec![c[..2].to_vec(), c[2..].to_vec()]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gamma_is_monotone_and_dominates_greedy(t in counts_2x2(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let g = build_graph(&t).unwrap();
        let (nx, ny) = (g.x_vertices().len(), g.y_vertices().len());
        let m1 = 1 + (a * nx as f64) as usize % nx;
        let m2 = 1 + (b * ny as f64) as usize % ny;
        let exact = gamma_n(&g, m1, m2, SearchMode::Exact).unwrap();
        let greedy = gamma_n(&g, m1, m2, SearchMode::Greedy).unwrap();
        prop_assert!(exact.density <= 1.0 && exact.density > 0.0);
        prop_assert!(greedy.density <= exact.density + 1e-15);
        if m1 < nx {
            prop_assert!(gamma_n(&g, m1 + 1, m2, SearchMode::Exact).unwrap().density <= exact.density + 1e-15);
        }
        if m2 < ny {
            prop_assert!(gamma_n(&g, m1, m2 + 1, SearchMode::Exact).unwrap().density <= exact.density + 1e-15);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn f_star_respects_its_bounds(t in joint(2, 2), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let m = info_measures(&t);
        let (r1, r2) = (u * m.h_x, v * m.h_y);
        let mut solver = FStarSolver::new(&t, FStarOptions::default());
        let sol = solver.solve(RatePoint::new(r1, r2).unwrap()).unwrap();
        let bound = m.h_xy.min(r1 + r2).min(r1 + m.h_y_given_x).min(r2 + m.h_x_given_y);
        prop_assert!(sol.value <= bound + 1e-9);
        let e = sol.witness.entropies(&t).unwrap();
        prop_assert!(e.h_x_given_w <= r1 + 1e-9 && e.h_y_given_w <= r2 + 1e-9);
        prop_assert!((e.h_xy_given_w - sol.value).abs() < 1e-9);
    }
}

fn dsbs_hyper() -> &'static HyperSurfaces {
    static HS: OnceLock<HyperSurfaces> = OnceLock::new();
    HS.get_or_init(|| HyperSurfaces::sample(&DsbsParams::new(0.5).unwrap().joint(), 40, 1e-3).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lambda_lower_is_monotone_in_the_box(p in 1.01f64..4.0, q in 1.01f64..4.0, a in 0.0f64..0.5, b in 0.0f64..0.5, da in 0.0f64..0.3, db in 0.0f64..0.3) {
        let hs = dsbs_hyper();
        let pq = HolderPair::new(p, q).unwrap();
        let base = hs.lambda_lower(pq, a, b).unwrap().value;
        let more = hs.lambda_lower(pq, a + da, b + db).unwrap().value;
        prop_assert!(more >= base - 1e-9);
    }

    #[test]
    fn region_membership_matches_lambda_sign(p in 1.01f64..4.0, q in 1.01f64..4.0) {
        let hs = dsbs_hyper();
        let pq = HolderPair::new(p, q).unwrap();
        let m = hs.region_member(pq, Direction::Forward).unwrap();
        prop_assert_eq!(m.member, m.margin >= -1e-10);
        prop_assert_eq!(m.witness.is_none(), m.member);
    }
}
