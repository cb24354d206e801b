use approx::assert_abs_diff_eq;

use gigopt::experiments::instances::{single_profile, newsvendor_revenue, wage_slashing_cycle, wage_slashing_market};
use gigopt::policy::{
    belief_based_policy, cyclic_profit, cyclic_steady_state, experienced_distribution, fairness_audit,
    fluid_trajectory, static_from_cyclic,
};
use gigopt::{Error, Policy, RewardDistribution};

#[test]
fn trajectory_settles_on_the_cycle() {
    let inst = wage_slashing_market(1.0, 1.0, 0.7).unwrap();
    let xs = wage_slashing_cycle(1.0);
    let ss = cyclic_steady_state(&inst, &xs).unwrap();
    assert_abs_diff_eq!(ss.supply[0], 2.9, epsilon = 1e-12);
    assert_abs_diff_eq!(ss.supply[1], 3.5, epsilon = 1e-12);
    let path = fluid_trajectory(&inst, &Policy::Cyclic(xs), 502, &[0.0, 0.0]).unwrap();
    for t in 500..502 {
        for i in 0..2 {
            assert_abs_diff_eq!(path.supply_by_type[t][i], ss.supply_by_type[t % 2][i], epsilon = 1e-9);
        }
    }
    assert_abs_diff_eq!(path.long_run_profit, ss.average_profit, epsilon = 1e-6);
}

#[test]
fn cycle_profit_closed_form() {
    for (r, alpha) in [(1.0, 0.7), (2.0, 3.0), (1.0, 5.0)] {
        let inst = wage_slashing_market(1.0, r, alpha).unwrap();
        let p = cyclic_profit(&inst, &wage_slashing_cycle(r)).unwrap();
        assert_abs_diff_eq!(p, 3.2 * alpha - 1.45 * r, epsilon = 1e-12);
    }
}

#[test]
fn single_period_cycle_is_static() {
    let inst = single_profile(1, 10.0, newsvendor_revenue()).unwrap();
    let x = RewardDistribution::two_point(20.0, 45.0, 0.4).unwrap();
    let ss = cyclic_steady_state(&inst, std::slice::from_ref(&x)).unwrap();
    let fluid = inst.fluid_supply(&x).unwrap();
    assert_abs_diff_eq!(ss.supply_by_type[0][0], fluid[0], epsilon = 1e-9);
    assert_abs_diff_eq!(
        cyclic_profit(&inst, std::slice::from_ref(&x)).unwrap(),
        inst.fluid_profit(&x).unwrap(),
        epsilon = 1e-9
    );
    assert_eq!(experienced_distribution(&inst, std::slice::from_ref(&x), 0).unwrap(), x);
    assert_eq!(static_from_cyclic(&inst, std::slice::from_ref(&x), 0).unwrap().distribution, x);
}

#[test]
fn wage_slashing_is_unfair() {
    let inst = wage_slashing_market(1.0, 1.0, 0.7).unwrap();
    let xs = wage_slashing_cycle(1.0);
    let x1 = experienced_distribution(&inst, &xs, 0).unwrap();
    let x2 = experienced_distribution(&inst, &xs, 1).unwrap();
    assert_abs_diff_eq!(x1.atoms().iter().map(|a| a.1).sum::<f64>(), 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(x1.l1_distance(&x2), 34.0 / 195.0, epsilon = 1e-12);

    let ss = cyclic_steady_state(&inst, &xs).unwrap();
    let rep = fairness_audit(&inst, &Policy::Cyclic(xs.clone()), 2, 200, &ss.supply_by_type[0], 0.05).unwrap();
    assert_abs_diff_eq!(rep.max_gap, 34.0 / 195.0, epsilon = 1e-9);
    assert!(!rep.fair);
    assert_abs_diff_eq!(rep.gap_matrix[0][1], rep.gap_matrix[1][0], epsilon = 1e-15);

    let anchored = static_from_cyclic(&inst, &xs, 0).unwrap();
    let paid = anchored.distribution.atoms().iter().find(|a| a.0 == 1.0).unwrap().1;
    assert_abs_diff_eq!(paid, 19.0 / 39.0, epsilon = 1e-12);
}

#[test]
fn equal_periods_are_fair() {
    let inst = wage_slashing_market(1.0, 1.0, 0.7).unwrap();
    let x = RewardDistribution::two_point(0.0, 1.0, 0.5).unwrap();
    let xs = vec![x.clone(), x.clone(), x.clone()];
    let s = static_from_cyclic(&inst, &xs, 1).unwrap();
    assert_eq!(s.distribution, x);
    assert_abs_diff_eq!(s.static_profit, s.cyclic_profit, epsilon = 1e-9);
    let rep = fairness_audit(&inst, &Policy::Cyclic(xs), 3, 60, &[0.0, 0.0], 0.05).unwrap();
    assert!(rep.max_gap < 1e-12);
}

#[test]
fn one_type_has_nothing_to_compare() {
    let inst = single_profile(0, 10.0, newsvendor_revenue()).unwrap();
    let policy = Policy::cyclic(vec![RewardDistribution::point(20.0), RewardDistribution::point(50.0)]).unwrap();
    let rep = fairness_audit(&inst, &policy, 2, 50, &[0.0], 0.05).unwrap();
    assert_eq!(rep.max_gap, 0.0);
}

#[test]
fn belief_based_gap() {
    let rep = belief_based_policy(3.0, 1.0, 1.2, 25.0, 50.0, 100.0).unwrap();
    assert_abs_diff_eq!(rep.profit, 275.0, epsilon = 1e-9);
    assert_abs_diff_eq!(rep.profit - rep.best_static.profit, 5.0, epsilon = 1e-9);
    for (v1, v2) in [(1.0, 1.0), (0.5, 1.4), (1.0, 1.8)] {
        let rep = belief_based_policy(4.0, v1, v2, 25.0, 50.0, 100.0).unwrap();
        assert_abs_diff_eq!(rep.gap, f64::min(v1, v2 - v1) * 25.0, epsilon = 1e-9);
    }
    assert!(matches!(
        belief_based_policy(2.0, 1.0, 1.2, 25.0, 50.0, 100.0),
        Err(Error::PreconditionViolated(_))
    ));
}
