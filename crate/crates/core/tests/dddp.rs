use glosa_core::dddp::{corridor_pass, solve_dddp, DddpParams};
use glosa_core::deterministic::pessimistic_trajectory;
use glosa_core::escape::EscapeCache;
use glosa_core::sdp::solve_sdp;
use glosa_core::{Scenario, SwitchingPrior};

fn short_scenario() -> Scenario {
    Scenario {
        prior: SwitchingPrior::uniform(3, 10).unwrap(),
        ..Scenario::reference(100.0, 8.0)
    }
}

#[test]
fn corridor_covering_the_domain_equals_full_grid() {
    let s = short_scenario();
    let init = pessimistic_trajectory(&s, Some(0.5)).unwrap();
    let mut cache = EscapeCache::new(&s);
    let wide = corridor_pass(&init, 0.5, [1e4, 1e4], &s, &mut cache).unwrap();
    let full = solve_sdp(&s, 0.5).unwrap();
    assert_eq!(wide.cost, full.start_value());
}

#[test]
fn corridor_optimum_is_a_fixed_point() {
    let s = short_scenario();
    let init = pessimistic_trajectory(&s, Some(0.5)).unwrap();
    let mut cache = EscapeCache::new(&s);
    let first = corridor_pass(&init, 0.5, [20.0, 4.0], &s, &mut cache).unwrap();
    let mut again = first.clone();
    for _ in 0..10 {
        let next = corridor_pass(&again, 0.5, [20.0, 4.0], &s, &mut cache).unwrap();
        if next.cost >= again.cost - 1e-9 {
            break;
        }
        again = next;
    }
    let repeat = corridor_pass(&again, 0.5, [20.0, 4.0], &s, &mut cache).unwrap();
    assert_eq!(repeat.states, again.states);
    assert_eq!(repeat.cost, again.cost);
}

#[test]
fn pass_never_worse_than_incumbent() {
    let s = short_scenario();
    let probs = s.prior.switch_probabilities();
    let init = pessimistic_trajectory(&s, Some(0.5)).unwrap();
    let mut cache = EscapeCache::new(&s);
    let init_cost = cache.expected_cost(&init, &probs).unwrap();
    let pass = corridor_pass(&init, 0.5, [2.0, 1.0], &s, &mut cache).unwrap();
    assert!(pass.cost <= init_cost + 1e-12);
}

#[test]
fn log_is_monotone_and_halves_on_stagnation() {
    let s = Scenario::reference_set(1).unwrap();
    let params = DddpParams::default();
    let (traj, log) = solve_dddp(&s, &params).unwrap();
    assert!(log.converged);
    let costs = log.incumbent_costs();
    assert!(costs.windows(2).all(|w| w[1] <= w[0]));
    assert!(costs[0] <= log.initial_cost);
    for w in log.iterations.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.improved {
            assert_eq!(b.delta, a.delta);
        } else {
            assert_eq!(b.delta, a.delta / 2.0);
        }
    }
    let last = log.iterations.last().unwrap();
    assert!(!last.improved);
    assert_eq!(traj.cost, log.final_cost());
    assert!(traj.within_bounds(&s.bounds, 1e-9));
    assert!(traj.dynamics_residual(s.dt) < 1e-9);
}

#[test]
fn grid_initializer_stays_on_grid_and_in_bounds() {
    for id in 1..=3 {
        let s = Scenario::reference_set(id).unwrap();
        let t = pessimistic_trajectory(&s, Some(0.5)).unwrap();
        assert!(t.within_bounds(&s.bounds, 1e-9), "scenario {id}");
        assert!(t.controls.iter().all(|a| (a / 0.5).fract() == 0.0));
        assert!(t.dynamics_residual(s.dt) < 1e-12);
    }
}

#[test]
fn rejects_off_grid_incumbent() {
    let s = short_scenario();
    let mut init = pessimistic_trajectory(&s, Some(0.5)).unwrap();
    init.states[3].x += 0.1;
    let mut cache = EscapeCache::new(&s);
    assert!(corridor_pass(&init, 0.5, [20.0, 4.0], &s, &mut cache).is_err());
}
