use approx::abs_diff_eq;
use proptest::prelude::*;

use gigopt::experiments::instances::{noisy_sqrt, reward_grid};
use gigopt::fluid::{find_interlacing, lottery_distribution, solve_fluid, supply_opt, support_reduce, DEFAULT_TOL};
use gigopt::market::{DepartureFunction, RevenueFunction, WorkerType};
use gigopt::noisy::{detect_double_threshold, noisy_metrics, optimal_noisy};
use gigopt::policy::{cyclic_steady_state, experienced_distribution, fluid_trajectory, static_from_cyclic};
use gigopt::sim::{simulate, SimConfig};
use gigopt::{MarketInstance, Policy, RewardDistribution, RewardSet};

#[derive(Clone, Debug)]
struct Case {
    rewards: Vec<f64>,
    lambdas: Vec<f64>,
    tables: Vec<Vec<f64>>,
    revenue: RevenueFunction,
}

impl Case {
    fn instance(&self) -> MarketInstance {
        let types = self
            .lambdas
            .iter()
            .zip(&self.tables)
            .map(|(&lambda, ell)| WorkerType {
                lambda,
                departure: DepartureFunction::Tabulated {
                    points: self.rewards.iter().copied().zip(ell.iter().copied()).collect(),
                },
            })
            .collect();
        MarketInstance::new(RewardSet::new(self.rewards.clone()).unwrap(), types, self.revenue, false).unwrap()
    }
}

fn revenue() -> impl Strategy<Value = RevenueFunction> {
    prop_oneof![
        (1.0..80.0).prop_map(|alpha| RevenueFunction::Linear { alpha }),
        (10.0..80.0, 5.0..200.0).prop_map(|(alpha, cap)| RevenueFunction::Newsvendor { alpha, cap }),
        (50.0..400.0, 0.2..0.9).prop_map(|(c, beta)| RevenueFunction::Power { c, beta }),
    ]
}

/// Random market with up to three types on up to four rewards, departures
/// non-increasing in the reward and bounded away from zero.
fn case() -> impl Strategy<Value = Case> {
    case_with(2)
}

fn case_with(min_rewards: usize) -> impl Strategy<Value = Case> {
    (min_rewards..=4, 1usize..=3)
        .prop_flat_map(|(n, k)| {
            (
                proptest::collection::btree_set(0u32..60, n),
                proptest::collection::vec(0.5..10.0, k),
                proptest::collection::vec(proptest::collection::vec(0.05..1.0, n), k),
                revenue(),
            )
        })
        .prop_map(|(rewards, lambdas, raw, revenue)| {
            let tables = raw
                .into_iter()
                .map(|mut ell: Vec<f64>| {
                    ell.sort_by(|a, b| b.total_cmp(a));
                    ell
                })
                .collect();
            Case {
                rewards: rewards.into_iter().map(f64::from).collect(),
                lambdas,
                tables,
                revenue,
            }
        })
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0..1.0, n).prop_filter("nonzero", |w| w[..2].iter().sum::<f64>() > 1e-3)
}

fn normalized(rewards: &RewardSet, w: &[f64]) -> RewardDistribution {
    let w = &w[..rewards.len()];
    let total: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|v| v / total).collect();
    RewardDistribution::from_weights(rewards, &w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fluid_optimum_dominates(c in case(), w in weights(4)) {
        let inst = c.instance();
        let best = solve_fluid(&inst, DEFAULT_TOL).unwrap();
        prop_assert!(best.distribution.support().len() <= 2);
        let tol = 1e-7 * best.profit.abs().max(1.0);
        for &r in inst.rewards().as_slice() {
            prop_assert!(inst.fluid_profit(&RewardDistribution::point(r)).unwrap() <= best.profit + tol);
        }
        let x = normalized(inst.rewards(), &w);
        prop_assert!(inst.fluid_profit(&x).unwrap() <= best.profit + tol);
    }

    #[test]
    fn slice_is_monotone_in_the_high_weight(c in case()) {
        let inst = c.instance();
        let g = inst.rewards().as_slice();
        let (lo, hi) = (g[0], g[g.len() - 1]);
        let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for k in 0..=100 {
            let e = inst.evaluate(&RewardDistribution::two_point(lo, hi, k as f64 / 100.0).unwrap()).unwrap();
            prop_assert!(e.expected_reward >= prev.0 - 1e-12 && e.supply >= prev.1 * (1.0 - 1e-12));
            prev = (e.expected_reward, e.supply);
        }
    }

    #[test]
    fn expectations_are_affine(c in case(), a in weights(4), b in weights(4), t in 0.0..1.0) {
        let inst = c.instance();
        let (x, y) = (normalized(inst.rewards(), &a), normalized(inst.rewards(), &b));
        let mix = RewardDistribution::mixture(&[(t, &x), (1.0 - t, &y)]).unwrap();
        prop_assert!((mix.mean() - (t * x.mean() + (1.0 - t) * y.mean())).abs() < 1e-12 * mix.mean().abs().max(1.0));
        let (lx, ly, lm) = (
            inst.expected_departures(&x).unwrap(),
            inst.expected_departures(&y).unwrap(),
            inst.expected_departures(&mix).unwrap(),
        );
        for i in 0..inst.num_types() {
            prop_assert!((lm[i] - (t * lx[i] + (1.0 - t) * ly[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn support_reduction_keeps_supply(c in case_with(3), w in weights(4)) {
        let inst = c.instance();
        let x = normalized(inst.rewards(), &w);
        prop_assume!(x.atoms().len() >= 3);
        let e = inst.evaluate(&x).unwrap();
        let budget = e.supply * e.expected_reward;
        prop_assert!(find_interlacing(&inst, budget, &x.support()).is_ok());
        let out = support_reduce(&inst, budget, &x, 1e-10).unwrap();
        let o = inst.evaluate(&out).unwrap();
        prop_assert!(out.atoms().len() <= 2);
        prop_assert!(o.supply >= e.supply - 1e-9 * e.supply.max(1.0));
        prop_assert!((o.supply * o.expected_reward - budget).abs() <= 1e-8 * budget.max(1.0));
        prop_assert!(o.expected_reward <= e.expected_reward + 1e-9);
        let best = supply_opt(&inst, budget).unwrap();
        prop_assert!(best.supply >= o.supply - 1e-9 * o.supply.max(1.0));
    }

    #[test]
    fn discretized_normal_is_a_distribution(mu in 0.0..80.0, sigma in 0.1..40.0) {
        let x = RewardDistribution::discretized_normal(&reward_grid().unwrap(), mu, sigma).unwrap();
        let total: f64 = x.atoms().iter().map(|a| a.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(x.atoms().iter().all(|a| a.1 >= 0.0 && (15.0..=60.0).contains(&a.0)));
    }

    #[test]
    fn lottery_matches_moments(r_min in 0.0..30.0, gap in 0.1..40.0, sigma in 0.0..30.0) {
        let mu = r_min + gap;
        let x = lottery_distribution(r_min, mu, sigma).unwrap();
        prop_assert!((x.mean() - mu).abs() < 1e-9 * mu.max(1.0));
        prop_assert!((x.variance() - sigma * sigma).abs() < 1e-8 * (sigma * sigma).max(1.0));
        prop_assert!(x.support()[0] >= r_min);
    }

    #[test]
    fn cycle_is_a_fixed_point_of_the_recursion(c in case(), tau in 1usize..=8, seeds in proptest::collection::vec(weights(4), 8)) {
        let inst = c.instance();
        let xs: Vec<RewardDistribution> = seeds[..tau]
            .iter()
            .map(|w| normalized(inst.rewards(), w))
            .collect();
        let ss = cyclic_steady_state(&inst, &xs).unwrap();
        let path = fluid_trajectory(&inst, &Policy::cyclic(xs.clone()).unwrap(), 2 * tau, &ss.supply_by_type[0]).unwrap();
        for t in 0..2 * tau {
            for i in 0..inst.num_types() {
                let want = ss.supply_by_type[t % tau][i];
                prop_assert!(abs_diff_eq!(path.supply_by_type[t][i], want, epsilon = 1e-9 * want.max(1.0)));
            }
        }
        for j in 0..inst.num_types() {
            let avg = ss.supply_by_type.iter().map(|s| s[j]).sum::<f64>() / tau as f64;
            let anchored = static_from_cyclic(&inst, &xs, j).unwrap().distribution;
            let implied = inst.types()[j].lambda / inst.expected_departure(j, &anchored).unwrap();
            prop_assert!(abs_diff_eq!(implied, avg, epsilon = 1e-9 * avg.max(1.0)));
            let seen = experienced_distribution(&inst, &xs, j).unwrap();
            prop_assert!((seen.atoms().iter().map(|a| a.1).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn welfare_splits_into_profit_and_surplus(eps in 0.5..20.0, p in 0.0..0.99) {
        let inst = noisy_sqrt(250.0, 10.0, 25.0).unwrap();
        let x = RewardDistribution::two_point(0.0, 25.0 + eps, p).unwrap();
        let m = noisy_metrics(&inst, eps, &x).unwrap();
        prop_assert!((m.welfare - m.profit - m.surplus).abs() < 1e-9 * m.welfare.abs().max(1.0));
    }

    #[test]
    fn retention_share_falls_with_noise(a in 0.01..20.0, b in 0.01..20.0) {
        let inst = noisy_sqrt(250.0, 10.0, 25.0).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let x_lo = optimal_noisy(&inst, lo).unwrap().x_star;
        let x_hi = optimal_noisy(&inst, hi).unwrap().x_star;
        prop_assert!(x_hi <= x_lo + 1e-12);
    }

    #[test]
    fn crossover_count_is_symmetric(a in proptest::collection::vec(-5.0..5.0, 1..40), shift in -3.0..3.0) {
        let b: Vec<f64> = a.iter().enumerate().map(|(k, v)| v + shift * (k as f64 / 10.0).sin()).collect();
        let ab = detect_double_threshold(&a, &b, 0.05).unwrap().count;
        let ba = detect_double_threshold(&b, &a, 0.05).unwrap().count;
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(detect_double_threshold(&a, &a, 0.05).unwrap().count, 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn simulation_conserves_workers_and_is_reproducible(
        c in case(),
        w in weights(4),
        theta in 1.0..20.0,
        seed in any::<u64>(),
        realized_cost in any::<bool>(),
    ) {
        let inst = c.instance();
        let x = normalized(inst.rewards(), &w);
        let cfg = SimConfig {
            theta,
            periods: 200,
            burn_in: Some(20),
            replications: 3,
            seed,
            realized_cost,
            keep_trace: true,
            ..SimConfig::default()
        };
        let policy = Policy::Static(x);
        let a = simulate(&inst, &policy, &cfg).unwrap();
        let b = simulate(&inst, &policy, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        let tr = a.trace.unwrap();
        for t in 1..tr.supply_by_type.len() {
            for i in 0..inst.num_types() {
                prop_assert_eq!(
                    tr.supply_by_type[t][i],
                    tr.supply_by_type[t - 1][i] - tr.departures[t - 1][i] + tr.arrivals[t][i]
                );
            }
        }
        prop_assert!(a.std_error >= 0.0 && a.mean_supply >= 0.0);
    }
}
