use approx::assert_abs_diff_eq;

use gigopt::experiments::instances::{
    noisy_sqrt, reward_grid, risk_profiles, single_profile, wage_slashing_market, newsvendor_revenue,
};
use gigopt::fluid::{
    brute_force_oracle, find_interlacing, lottery_distribution, optimal_fixed_wage, optimize_pair,
    solve_fluid, supply_opt, support_reduce, Dispersion, DEFAULT_TOL,
};
use gigopt::market::{DepartureFunction, RevenueFunction, WorkerType};
use gigopt::noisy::optimal_noisy;
use gigopt::{Error, MarketInstance, RewardDistribution, RewardSet};

fn tabulated(rewards: &[f64], lambda: f64, ell: &[f64], revenue: RevenueFunction) -> MarketInstance {
    MarketInstance::new(
        RewardSet::new(rewards.to_vec()).unwrap(),
        vec![WorkerType {
            lambda,
            departure: DepartureFunction::Tabulated {
                points: rewards.iter().copied().zip(ell.iter().copied()).collect(),
            },
        }],
        revenue,
        true,
    )
    .unwrap()
}

#[test]
fn nonconvex_slice_is_maximized_at_the_top() {
    let inst = tabulated(&[0.0, 0.1], 1.0, &[1.0, 0.5], RevenueFunction::Linear { alpha: 1.0 });
    let pair = optimize_pair(&inst, 0.0, 0.1, DEFAULT_TOL).unwrap().unwrap();
    assert_abs_diff_eq!(pair.weight_high, 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(pair.profit, 1.8, epsilon = 1e-9);
    let g = |x: f64| inst.fluid_profit(&RewardDistribution::two_point(0.0, 0.1, x).unwrap()).unwrap();
    assert!(g(0.0) + g(1.0) - 2.0 * g(0.5) > 0.0);
}

#[test]
fn constant_departure_gives_endpoint_optimum() {
    let inst = tabulated(&[1.0, 2.0], 5.0, &[1.0, 1.0], RevenueFunction::Linear { alpha: 3.0 });
    let pair = optimize_pair(&inst, 1.0, 2.0, DEFAULT_TOL).unwrap().unwrap();
    assert_eq!(pair.weight_high, 0.0);
    assert_eq!(optimal_fixed_wage(&inst).unwrap().reward, 1.0);

    let oracle_inst = tabulated(&[0.0, 1.0], 10.0, &[1.0, 1.0], RevenueFunction::Linear { alpha: 2.0 });
    let oracle = brute_force_oracle(&oracle_inst, 10).unwrap();
    assert_eq!(oracle.distribution, RewardDistribution::point(0.0));
    assert_abs_diff_eq!(oracle.profit, 20.0, epsilon = 1e-12);
}

#[test]
fn dispersion_follows_risk_profile() {
    let averse = single_profile(0, 10.0, newsvendor_revenue()).unwrap();
    let sol = solve_fluid(&averse, DEFAULT_TOL).unwrap();
    assert_eq!(sol.dispersion, Dispersion::Minimal);

    let seeking = single_profile(2, 10.0, newsvendor_revenue()).unwrap();
    let sol = solve_fluid(&seeking, DEFAULT_TOL).unwrap();
    assert!(sol.distribution.support().iter().all(|&r| r == 15.0 || r == 60.0));
}

#[test]
fn fixed_wage_never_beats_the_optimum() {
    for profile in 0..3 {
        let inst = single_profile(profile, 10.0, newsvendor_revenue()).unwrap();
        let fixed = optimal_fixed_wage(&inst).unwrap();
        let best = solve_fluid(&inst, DEFAULT_TOL).unwrap();
        assert!(fixed.profit <= best.profit + 1e-9);
    }
}

#[test]
fn oracle_agrees_on_a_coarse_grid() {
    let rewards = [15.0, 30.0, 45.0, 60.0];
    let ell: Vec<f64> = rewards.iter().map(|&r| risk_profiles()[0].eval(r).unwrap()).collect();
    let inst = tabulated(&rewards, 10.0, &ell, newsvendor_revenue());
    let best = solve_fluid(&inst, DEFAULT_TOL).unwrap();
    let oracle = brute_force_oracle(&inst, 60).unwrap();
    assert!(oracle.profit <= best.profit + 1e-9);
    assert!(best.profit - oracle.profit <= 2.0 * oracle.lipschitz / 60.0);
}

#[test]
fn oracle_retains_up_to_demand() {
    let market = tabulated(&[15.0, 35.0], 10.0, &[1.0, 0.0], RevenueFunction::Newsvendor { alpha: 40.0, cap: 300.0 });
    let oracle = brute_force_oracle(&market, 60).unwrap();
    let w = oracle.distribution.weights_on(market.rewards()).unwrap()[1];
    assert!((w - 29.0 / 30.0).abs() <= 1.0 / 60.0, "{w}");
}

#[test]
fn oracle_guard() {
    let inst = single_profile(0, 10.0, newsvendor_revenue()).unwrap();
    assert!(matches!(brute_force_oracle(&inst, 10), Err(Error::TooLarge(_))));
}

#[test]
fn pair_search_matches_noisy_closed_form() {
    let noisy = noisy_sqrt(250.0, 10.0, 25.0).unwrap();
    for eps in [2.0, 5.0, 10.0] {
        let closed = optimal_noisy(&noisy, eps).unwrap();
        let sol = solve_fluid(&noisy.market(eps).unwrap(), 1e-12).unwrap();
        let above: f64 = sol.distribution.atoms().iter().filter(|a| a.0 > 0.0).map(|a| a.1).sum();
        assert!(sol.distribution.support().iter().all(|&r| r == 0.0 || r == 25.0 + eps));
        assert_abs_diff_eq!(above, closed.x_star, epsilon = 1e-6);
    }
    let at_five = optimal_noisy(&noisy, 5.0).unwrap();
    assert_abs_diff_eq!(at_five.x_star, 0.424, epsilon = 1e-9);
    assert_abs_diff_eq!(at_five.eps0, 125.0 / 10f64.sqrt() - 25.0, epsilon = 1e-12);
}

#[test]
fn budgeted_supply_binds_the_budget() {
    let inst = tabulated(&[15.0, 60.0], 10.0, &[1.0, 0.2], RevenueFunction::Linear { alpha: 1.0 });
    let sol = supply_opt(&inst, 1000.0).unwrap();
    let w = sol.distribution.weights_on(inst.rewards()).unwrap()[1];
    assert_abs_diff_eq!(w, 0.68, epsilon = 1e-9);
    assert_abs_diff_eq!(sol.supply, 10.0 / 0.456, epsilon = 1e-6);
    assert_abs_diff_eq!(sol.cost, 1000.0, epsilon = 1e-6);

    let rich = supply_opt(&inst, 1e6).unwrap();
    assert_eq!(rich.distribution, RewardDistribution::point(60.0));
    let poor = supply_opt(&inst, 150.0).unwrap();
    assert_eq!(poor.distribution, RewardDistribution::point(15.0));
}

#[test]
fn interlacing_triples() {
    let inst = MarketInstance::new(
        reward_grid().unwrap(),
        vec![WorkerType {
            lambda: 10.0,
            departure: risk_profiles()[0].clone(),
        }],
        newsvendor_revenue(),
        false,
    )
    .unwrap();
    let payroll = |r: f64| r * inst.fluid_supply(&RewardDistribution::point(r)).unwrap()[0];
    let budget = (payroll(15.0) + payroll(30.0)) / 2.0;
    let found = find_interlacing(&inst, budget, &[15.0, 30.0, 60.0]).unwrap();
    assert_eq!((found.below, found.above), (15.0, 30.0));
    assert_eq!(found.pairs, vec![(15.0, 30.0), (15.0, 60.0)]);
    assert!(matches!(
        find_interlacing(&inst, payroll(15.0) / 2.0, &[15.0, 30.0, 60.0]),
        Err(Error::NotFound)
    ));
}

#[test]
fn support_reduction_keeps_small_supports() {
    let inst = single_profile(0, 10.0, newsvendor_revenue()).unwrap();
    let x = RewardDistribution::two_point(20.0, 40.0, 0.3).unwrap();
    let e = inst.evaluate(&x).unwrap();
    let out = support_reduce(&inst, e.supply * e.expected_reward, &x, 1e-10).unwrap();
    assert_eq!(out, x);
}

#[test]
fn unpaid_loyal_workers_make_zero_the_best_wage() {
    let inst = wage_slashing_market(1.0, 1.0, 0.7).unwrap();
    assert_eq!(optimal_fixed_wage(&inst).unwrap().reward, 0.0);
}

#[test]
fn lottery_closed_form() {
    let x = lottery_distribution(15.0, 35.0, 11.2).unwrap();
    assert_eq!(x.support()[0], 15.0);
    assert_abs_diff_eq!(x.support()[1], 41.272, epsilon = 1e-12);
    assert_abs_diff_eq!(x.atoms()[1].1, 400.0 / 525.44, epsilon = 1e-12);
    assert_abs_diff_eq!(x.mean(), 35.0, epsilon = 1e-10);
    assert_abs_diff_eq!(x.variance(), 11.2 * 11.2, epsilon = 1e-10);
    assert_eq!(lottery_distribution(15.0, 35.0, 0.0).unwrap(), RewardDistribution::point(35.0));
    assert!(matches!(lottery_distribution(15.0, 15.0, 1.0), Err(Error::InvalidMoments(_))));
}
