mod common;

use proptest::prelude::*;

use netslice::mdp::{compute_advantages, compute_returns, normalize_advantages, DiscountConfig, Trajectory, Transition};
use netslice::multi_agent::{decompose_sla, default_assignments, rebalance_sla};
use netslice::neural::{clip_exploration, load_mlp, logit, project_action, save_mlp, ExplorationConfig, Mlp};
use netslice::safe::{update_multiplier, LagrangianState, SwitchConfig};
use netslice::slice_env::{evaluate, AllocationAction, NetworkState, SliceEnv, SliceSpec, SlicingNetwork, TrafficModel};

fn spec(bound: f64) -> SliceSpec {
    SliceSpec {
        name: String::new(),
        latency_bound: bound,
        min_throughput: 0.0,
        traffic: TrafficModel {
            base_rate: 0.0,
            amplitude: 0.0,
            period: 1.0,
            noise_std: 0.0,
        },
    }
}

/// Feasible slice-major share matrix with every column strictly below capacity.
fn feasible_shares(slices: usize, domains: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..0.999, slices * domains).prop_map(move |mut v| {
        for d in 0..domains {
            let total: f64 = (0..slices).map(|k| v[k * domains + d]).sum();
            if total > 0.99 {
                (0..slices).for_each(|k| v[k * domains + d] *= 0.99 / total);
            }
        }
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn latency_never_rises_with_share(
        rates in prop::collection::vec(0.0f64..60.0, 2),
        backlogs in prop::collection::vec(0.0f64..40.0, 8),
        shares in feasible_shares(2, 4),
        cell in 0usize..8,
        bump in 0.0f64..1.0,
    ) {
        let scenario = common::scenario("two_slice.json");
        let state = NetworkState {
            t: 0,
            slices: 2,
            domains: 4,
            rates: rates.iter().flat_map(|r| [*r; 4]).collect(),
            backlogs,
        };
        let before = AllocationAction::from_flat(2, 4, shares.clone()).unwrap();
        let d = cell % 4;
        let mut raised = shares;
        raised[cell] += bump * (1.0 - before.column_sum(d));
        let after = AllocationAction::from_flat(2, 4, raised).unwrap();
        prop_assert!(after.is_feasible());
        let k = cell / 4;
        let l0 = evaluate(&scenario, &state, &before).latency[k];
        let l1 = evaluate(&scenario, &state, &after).latency[k];
        prop_assert!(l1 <= l0, "latency rose from {} to {}", l0, l1);
    }

    #[test]
    fn states_stay_non_negative(seed in any::<u64>(), raws in prop::collection::vec(prop::collection::vec(-8.0f64..8.0, 8), 1..24)) {
        let mut env = SliceEnv::new(common::scenario("two_slice.json")).unwrap();
        env.reset(seed);
        for raw in &raws {
            let out = env.step(&project_action(raw, 2, 4).unwrap()).unwrap();
            prop_assert!(out.next_state.is_valid());
        }
    }

    #[test]
    fn returns_are_linear(rewards in prop::collection::vec(-10.0f64..10.0, 0..40), a in -5.0f64..5.0, gamma in 0.0f64..1.0) {
        let scaled: Vec<f64> = rewards.iter().map(|r| a * r).collect();
        for (x, y) in compute_returns(&scaled, gamma).iter().zip(compute_returns(&rewards, gamma)) {
            prop_assert!((x - a * y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn unit_lambda_zero_values_give_returns(
        rewards in prop::collection::vec(-10.0f64..10.0, 1..40),
        costs in prop::collection::vec(-1.0f64..1.0, 40),
        gamma in 0.0f64..0.999,
    ) {
        let n = rewards.len();
        let transitions: Vec<Transition> = rewards
            .iter()
            .zip(&costs)
            .map(|(&reward, &cost)| Transition { state_vec: vec![], action_vec: vec![], logp: 0.0, reward, cost, done: false })
            .collect();
        let config = DiscountConfig { gamma, lambda_gae: 1.0 };
        let zeros = vec![0.0; n + 1];
        let traj = compute_advantages(Trajectory::new(transitions), &zeros, &zeros, &config).unwrap();
        let expect_r = compute_returns(&rewards, gamma);
        let expect_c = compute_returns(&costs[..n], gamma);
        for i in 0..n {
            prop_assert!((traj.reward_advantages[i] - expect_r[i]).abs() < 1e-9);
            prop_assert!((traj.cost_advantages[i] - expect_c[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn normalised_advantages_are_standard(values in prop::collection::vec(-1e3f64..1e3, 2..64)) {
        let out = normalize_advantages(&values);
        let n = out.len() as f64;
        let mean = out.iter().sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - values.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread > 1e-6 {
            let std = (out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!((std - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn exploration_stays_within_deviation(
        base in prop::collection::vec(-5.0f64..5.0, 8),
        noise in prop::collection::vec(-10.0f64..10.0, 8),
        h in 0.01f64..2.0,
    ) {
        let cfg = ExplorationConfig { sigma: 0.3, max_deviation: h };
        for (a, b) in clip_exploration(&base, &noise, &cfg).unwrap().iter().zip(&base) {
            prop_assert!((a - b).abs() <= h + 1e-12);
        }
    }

    #[test]
    fn projection_inverts_squash_on_feasible_shares(
        (k, d, shares) in (1usize..=4, 1usize..=4).prop_flat_map(|(k, d)| (Just(k), Just(d), feasible_shares(k, d)))
    ) {
        let raw: Vec<f64> = shares.iter().map(|&s| logit(s)).collect();
        let back = project_action(&raw, k, d).unwrap();
        for (a, b) in back.flat().iter().zip(&shares) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn budgets_never_exceed_bounds(
        bounds in prop::collection::vec(1e-3f64..10.0, 1..4),
        weights in prop::collection::vec(0.01f64..10.0, 1..=4),
        factors in prop::collection::vec(prop::collection::vec(0.0f64..4.0, 16), 0..8),
    ) {
        let specs: Vec<SliceSpec> = bounds.iter().map(|&b| spec(b)).collect();
        let nd = weights.len();
        let mut d = decompose_sla(&specs, nd, &weights).unwrap();
        for f in &factors {
            let observed: Vec<f64> = d.budgets.iter().zip(f).map(|(b, x)| b * x).collect();
            d = rebalance_sla(&d, &observed, &specs).unwrap();
            for (k, s) in specs.iter().enumerate() {
                prop_assert!(d.slice_total(k) <= s.latency_bound);
                prop_assert!(d.budgets[k * nd..(k + 1) * nd].iter().all(|b| *b > 0.0));
            }
        }
    }

    #[test]
    fn per_agent_projections_compose_feasibly(raw in prop::collection::vec(-6.0f64..6.0, 8)) {
        let scenario = common::scenario("two_slice.json");
        let mut composed = vec![0.0; 8];
        for agent in default_assignments(&scenario) {
            let idx = agent.action_indices(&scenario);
            let local: Vec<f64> = idx.iter().map(|&i| raw[i]).collect();
            let own = project_action(&local, 2, agent.members.len()).unwrap();
            for (j, &i) in idx.iter().enumerate() {
                composed[i] = own.flat()[j];
            }
        }
        let action = AllocationAction::from_flat(2, 4, composed).unwrap();
        prop_assert!(action.is_feasible());
        prop_assert_eq!(action, project_action(&raw, 2, 4).unwrap());
    }

    #[test]
    fn multiplier_moves_with_cost_sign(lambda in 0.0f64..10.0, eta in 0.0f64..1.0, cost in -2.0f64..2.0) {
        let lag = LagrangianState { multiplier: lambda, eta, update_period: 5 };
        let next = update_multiplier(&lag, cost).multiplier;
        prop_assert!(next >= 0.0);
        if cost < 0.0 {
            prop_assert!(next <= lambda);
        } else {
            prop_assert!(next >= lambda);
        }
    }

    #[test]
    fn higher_threshold_never_gates_more(
        predictions in prop::collection::vec((-1.0f64..1.0, 0.0f64..0.5), 1..64),
        low in -1.0f64..1.0,
        raise in 0.0f64..1.0,
        kappa in 0.0f64..3.0,
    ) {
        let count = |threshold: f64| {
            let cfg = SwitchConfig { threshold, kappa, enabled: true };
            predictions.iter().filter(|(m, s)| cfg.triggers(*m, *s)).count()
        };
        prop_assert!(count(low + raise) <= count(low));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn checkpoints_round_trip(hidden in prop::collection::vec(1usize..12, 0..3), io in (1usize..6, 1usize..6), seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut sizes = vec![io.0];
        sizes.extend(&hidden);
        sizes.push(io.1);
        let net = Mlp::new(&sizes, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_mlp(&path, &net).unwrap();
        let back = load_mlp(&path, Some(&sizes)).unwrap();
        prop_assert_eq!(back.params(), net.params());
        let mut wrong = sizes.clone();
        wrong[0] += 1;
        prop_assert!(load_mlp(&path, Some(&wrong)).is_err());
    }
}
