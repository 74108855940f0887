use rail_core::theory::{
    averaging_effect_check, bisection_projection, constrained_minimax_iterate, feasible_minimizer, inner_objective,
    linear_inner_objective, objective, occupancy_of_policy, optimal_critic, policy_of_occupancy, project,
    project_simplex, verify_theory, Constraints, SharingForm, MinimaxConfig, TabularGame, TabularPolicy, TheorySpec,
};
use rail_core::{seeded_rng, Rng};
use rand::Rng as _;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Random undesired set leaving at least one admissible action per state.
fn with_undesired(mut game: TabularGame, rng: &mut Rng) -> TabularGame {
    let m = game.n_actions;
    let mut u = vec![false; game.n_states * m];
    for s in 0..game.n_states {
        let keep = rng.random_range(0..m);
        for a in 0..m {
            u[s * m + a] = a != keep && rng.random_bool(0.4);
        }
    }
    game.undesired = u;
    game
}

/// Random policy that never picks an undesired action.
fn admissible_policy(game: &TabularGame, rng: &mut Rng) -> TabularPolicy {
    let m = game.n_actions;
    let mask = game.undesired_mask();
    let mut probs = vec![0.0; game.n_states * m];
    for s in 0..game.n_states {
        let w: Vec<f64> = (0..m).map(|a| if mask[s * m + a] { 0.0 } else { rng.random::<f64>() + 0.05 }).collect();
        let z: f64 = w.iter().sum();
        for a in 0..m {
            probs[s * m + a] = w[a] / z;
        }
    }
    TabularPolicy {
        n_states: game.n_states,
        n_actions: m,
        probs,
    }
}

#[test]
fn occupancy_identities() {
    let mut rng = seeded_rng(1);
    for k in 0..20 {
        let ns = 1 + (k * 7) % 64;
        let na = 1 + k % 4;
        let gamma = rng.random_range(0.5..0.97);
        let game = TabularGame::random(ns, na, gamma, &mut rng);
        let pi = TabularPolicy::random(ns, na, &mut rng);
        let occ = occupancy_of_policy(&game, &pi).unwrap();
        assert!((occ.total() - 1.0 / (1.0 - gamma)).abs() <= 1e-9);
        let back = policy_of_occupancy(&occ);
        assert!(dist(&back.probs, &pi.probs) <= 1e-9);
        let again = occupancy_of_policy(&game, &back).unwrap();
        assert!(dist(&again.rho, &occ.rho) <= 1e-9);
    }
}

#[test]
fn two_state_cycle_matches_series() {
    let game = TabularGame {
        n_states: 2,
        n_actions: 1,
        transitions: vec![0.0, 1.0, 1.0, 0.0],
        initial: vec![0.5, 0.5],
        gamma: 0.5,
        agents: 1,
        undesired: vec![],
    };
    let occ = occupancy_of_policy(&game, &TabularPolicy::uniform(2, 1)).unwrap();
    let mut d = [0.5, 0.5];
    let mut sum = [0.0, 0.0];
    let mut g = 1.0;
    for _ in 0..1000 {
        sum[0] += g * d[0];
        sum[1] += g * d[1];
        d = [d[1], d[0]];
        g *= 0.5;
    }
    assert!(dist(&occ.rho, &sum) <= 1e-9);
}

#[test]
fn recovery_when_support_is_admissible() {
    let mut rng = seeded_rng(2);
    for _ in 0..5 {
        let game = with_undesired(TabularGame::random(8, 3, 0.9, &mut rng), &mut rng);
        let expert = admissible_policy(&game, &mut rng);
        let rho_e = occupancy_of_policy(&game, &expert).unwrap();
        let trace =
            constrained_minimax_iterate(&game, &rho_e, &Constraints::from_game(&game, false), &MinimaxConfig::default())
                .unwrap();
        assert_eq!(trace.len(), 5001);
        assert!(dist(&trace.last().unwrap().rho, &rho_e.rho) <= 1e-6);
        // Initial iterate is uniform over the admissible pairs.
        let first = &trace[0].rho;
        let w = first.iter().cloned().fold(0.0, f64::max);
        let mask = game.undesired_mask();
        assert!(first.iter().zip(&mask).all(|(r, u)| if *u { *r == 0.0 } else { *r == w }));
    }
}

#[test]
fn truncation_outside_admissible_support() {
    let mut rng = seeded_rng(3);
    for _ in 0..5 {
        let game = with_undesired(TabularGame::random(8, 3, 0.9, &mut rng), &mut rng);
        let expert = TabularPolicy::random(8, 3, &mut rng);
        let rho_e = occupancy_of_policy(&game, &expert).unwrap();
        let c = Constraints::from_game(&game, false);
        let trace = constrained_minimax_iterate(&game, &rho_e, &c, &MinimaxConfig::default()).unwrap();
        let last = &trace.last().unwrap().rho;
        let on_u: f64 = last.iter().zip(&c.support).filter(|(_, s)| !**s).map(|(r, _)| r.abs()).sum();
        assert!(on_u <= 1e-9);
        // Independent minimizer: projected gradient with a different step,
        // bisection projection, run until the update is below 1e-10.
        let mut x = vec![0.0; last.len()];
        x[c.support.iter().position(|s| *s).unwrap()] = game.mass();
        for _ in 0..100_000 {
            let step: Vec<f64> = x.iter().zip(&rho_e.rho).map(|(a, e)| a - 0.3 * (a - e)).collect();
            let next = bisection_projection(&step, &c.support, game.mass()).unwrap();
            let change = dist(&next, &x);
            x = next;
            if change < 1e-10 {
                break;
            }
        }
        assert!(dist(last, &x) <= 1e-6, "{}", dist(last, &x));
        // Objective never rises after a short burn-in.
        let obj: Vec<f64> = trace.iter().map(|t| objective(&t.rho, &rho_e.rho)).collect();
        assert!(obj.windows(2).skip(10).all(|w| w[1] <= w[0] + 1e-12));
    }
}

#[test]
fn conservative_step_is_slower_but_descends() {
    let mut rng = seeded_rng(4);
    let game = TabularGame::random(8, 3, 0.9, &mut rng);
    let expert = TabularPolicy::random(8, 3, &mut rng);
    let rho_e = occupancy_of_policy(&game, &expert).unwrap();
    let config = MinimaxConfig {
        iters: 5000,
        step: rail_core::theory::conservative_step(&game),
    };
    let trace = constrained_minimax_iterate(&game, &rho_e, &Constraints::unconstrained(&game), &config).unwrap();
    let obj: Vec<f64> = trace.iter().map(|t| objective(&t.rho, &rho_e.rho)).collect();
    assert!(obj.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(obj[5000] < obj[0]);
}

fn distinct_experts(n: usize, m: usize, rng: &mut Rng) -> (TabularPolicy, TabularPolicy) {
    (TabularPolicy::random(n, m, rng), TabularPolicy::random(n, m, rng))
}

#[test]
fn averaging_effect() {
    let mut rng = seeded_rng(5);
    let single = TabularGame::random(3, 2, 0.8, &mut rng);
    let (a, b) = distinct_experts(3, 2, &mut rng);
    let report = averaging_effect_check(&single, [&a, &b], &MinimaxConfig::default()).unwrap();
    let pair = TabularGame::independent_pair(&single).unwrap();
    let rho_e = pair.occupancy_of_policy(&TabularPolicy::product(&a, &b)).unwrap();
    let oracle = feasible_minimizer(
        &pair,
        &rho_e.rho,
        &Constraints::from_game(&pair, true),
        SharingForm::MarginalEquality,
        1e-13,
        200_000,
    ).unwrap();
    let table = rail_core::theory::OccupancyTable {
        n_states: pair.n_states,
        n_actions: pair.n_actions,
        rho: oracle,
    };
    assert!(dist(&report.learned_marginal, &table.marginal(0, 3, 2)) <= 1e-3);
    assert!(report.marginal_gap <= 1e-9);
    assert!(report.distance_to_mean <= 1e-6);

    // Swapping agent labels changes nothing.
    let swapped = averaging_effect_check(&single, [&b, &a], &MinimaxConfig::default()).unwrap();
    assert!(dist(&swapped.learned_marginal, &report.learned_marginal) <= 1e-12);

    // Identical demonstrators are reproduced.
    let same = averaging_effect_check(&single, [&a, &a], &MinimaxConfig::default()).unwrap();
    assert!(dist(&same.learned_marginal, &same.expert_marginals[0]) <= 1e-6);
}

#[test]
fn averaging_with_undesired_pairs() {
    let mut rng = seeded_rng(6);
    let single = with_undesired(TabularGame::random(3, 3, 0.8, &mut rng), &mut rng);
    let (a, b) = distinct_experts(3, 3, &mut rng);
    let spec = TheorySpec {
        game: single,
        experts: vec![a, b],
        minimax: MinimaxConfig::default(),
    };
    let report = verify_theory(&spec).unwrap();
    assert!(report.passed(), "{:#?}", report.checks);
}

#[test]
fn critic_optimality() {
    let mut rng = seeded_rng(7);
    let e: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
    let r: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
    let d = optimal_critic(&e, &r).unwrap();
    let best = inner_objective(&d, &e, &r);
    let sign: Vec<f64> = d.iter().map(|v| v.signum()).collect();
    let best_linear = linear_inner_objective(&sign, &e, &r);
    for _ in 0..100 {
        let c: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert!(inner_objective(&c, &e, &r) <= best);
        assert!(linear_inner_objective(&c, &e, &r) <= best_linear + 1e-12);
    }
    for (x, (a, b)) in d.iter().zip(e.iter().zip(&r)) {
        assert_eq!(x.signum(), (a - b).signum());
    }
}

#[test]
fn projections_agree_and_stay_feasible() {
    let mut rng = seeded_rng(8);
    for _ in 0..50 {
        let x: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..3.0)).collect();
        let mut mask: Vec<bool> = (0..20).map(|_| rng.random_bool(0.7)).collect();
        mask[0] = true;
        let mass = rng.random_range(0.5..10.0);
        let a = project_simplex(&x, &mask, mass).unwrap();
        let b = bisection_projection(&x, &mask, mass).unwrap();
        assert!(dist(&a, &b) <= 1e-9);
        assert!((a.iter().sum::<f64>() - mass).abs() <= 1e-9);
    }
    let single = TabularGame::random(3, 2, 0.9, &mut rng);
    let pair = TabularGame::independent_pair(&single).unwrap();
    let c = Constraints::from_game(&pair, true);
    let x: Vec<f64> = (0..pair.n_states * pair.n_actions).map(|_| rng.random_range(-1.0..2.0)).collect();
    let y = project(&x, &pair, &c).unwrap();
    let table = rail_core::theory::OccupancyTable {
        n_states: pair.n_states,
        n_actions: pair.n_actions,
        rho: y.clone(),
    };
    assert!(dist(&table.marginal(0, 3, 2), &table.marginal(1, 3, 2)) <= 1e-9);
    // Convex combinations of feasible points are feasible.
    let z = project(&x.iter().map(|v| -v).collect::<Vec<_>>(), &pair, &c).unwrap();
    for lambda in [0.0, 0.25, 0.5, 1.0] {
        let w: Vec<f64> = y.iter().zip(&z).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let back = project(&w, &pair, &c).unwrap();
        assert!(dist(&back, &w) <= 1e-9);
    }
}

#[test]
fn empty_support_is_infeasible() {
    let mut rng = seeded_rng(9);
    let mut game = TabularGame::random(2, 2, 0.9, &mut rng);
    game.undesired = vec![true; 4];
    let rho_e = occupancy_of_policy(&game, &TabularPolicy::uniform(2, 2)).unwrap();
    let res = constrained_minimax_iterate(&game, &rho_e, &Constraints::from_game(&game, false), &MinimaxConfig::default());
    assert!(matches!(res, Err(rail_core::Error::Infeasible(_))));
}
