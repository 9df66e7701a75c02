//! Property tests over the queue laws and reward shapers.

use proptest::prelude::*;

use driftq::queue::{realized_drift, QueueFlow, QueueVector, RewardShaper};

fn backlog_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1000.0f64, dim)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    /// The tailored reward equals the drift reward minus the squared
    /// backlog of the starting state.
    #[test]
    fn shaper_identity(
        dim in 1usize..16,
        seed_a in 0.0..1000.0f64,
        penalty in 0.0..100.0f64,
        v in 0.0..10.0f64,
    ) {
        let before: Vec<f64> = (0..dim).map(|i| (seed_a + i as f64 * 37.5) % 1000.0).collect();
        let after: Vec<f64> = (0..dim).map(|i| (seed_a * 1.7 + i as f64 * 11.25) % 1000.0).collect();
        let before = QueueVector::new(before).unwrap();
        let after = QueueVector::new(after).unwrap();
        let tailored = RewardShaper::ldptrlq(v).reward(&before, &after, penalty).unwrap();
        let original = RewardShaper::original_ldp(v).reward(&before, &after, penalty).unwrap();
        prop_assert!(rel_close(tailored, original - before.sum_squares(), 1e-9));
    }

    /// Swapping the two queue states leaves the tailored reward unchanged.
    #[test]
    fn swap_symmetry(
        a in backlog_vec(4),
        b in backlog_vec(4),
        penalty in 0.0..100.0f64,
        v in 0.0..10.0f64,
    ) {
        let a = QueueVector::new(a).unwrap();
        let b = QueueVector::new(b).unwrap();
        let shaper = RewardShaper::ldptrlq(v);
        let forward = shaper.reward(&a, &b, penalty).unwrap();
        let backward = shaper.reward(&b, &a, penalty).unwrap();
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn step_never_goes_negative(
        q in backlog_vec(6),
        arr in backlog_vec(6),
        dep in backlog_vec(6),
    ) {
        let q = QueueVector::new(q).unwrap();
        let flow = QueueFlow::new(arr, dep).unwrap();
        let next = q.step(&flow).unwrap();
        prop_assert!(next.lengths().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn potential_is_nonnegative_and_drift_vanishes_in_place(q in backlog_vec(5)) {
        let q = QueueVector::new(q).unwrap();
        prop_assert!(q.lyapunov() >= 0.0);
        prop_assert_eq!(realized_drift(&q, &q).unwrap(), 0.0);
    }

    /// Maximizing the tailored reward over a finite candidate set picks the
    /// same actions as minimizing the per-slot drift-plus-penalty
    /// objective, ties included.
    #[test]
    fn greedy_reduction_equivalence(
        before in backlog_vec(3),
        candidates in prop::collection::vec((backlog_vec(3), 0.0..50.0f64), 2..32),
        duplicate_first in any::<bool>(),
        v in 0.0..5.0f64,
    ) {
        let mut candidates = candidates;
        if duplicate_first {
            let clone = candidates[0].clone();
            candidates.push(clone);
        }
        let before = QueueVector::new(before).unwrap();
        let shaper = RewardShaper::ldptrlq(v);

        let rewards: Vec<f64> = candidates
            .iter()
            .map(|(after, p)| {
                let after = QueueVector::new(after.clone()).unwrap();
                shaper.reward(&before, &after, *p).unwrap()
            })
            .collect();
        let objectives: Vec<f64> = candidates
            .iter()
            .map(|(after, p)| {
                let after = QueueVector::new(after.clone()).unwrap();
                0.5 * (after.sum_squares() - before.sum_squares()) + v * p
            })
            .collect();

        let best_reward = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let best_objective = objectives.iter().cloned().fold(f64::INFINITY, f64::min);
        let argmax: Vec<usize> = rewards
            .iter()
            .enumerate()
            .filter(|(_, &r)| (r - best_reward).abs() <= 1e-12 * best_reward.abs().max(1.0))
            .map(|(i, _)| i)
            .collect();
        let argmin: Vec<usize> = objectives
            .iter()
            .enumerate()
            .filter(|(_, &o)| (o - best_objective).abs() <= 1e-12 * best_objective.abs().max(1.0))
            .map(|(i, _)| i)
            .collect();
        prop_assert_eq!(argmax, argmin);
    }

    /// A strictly increasing piecewise-linear transform of the objective
    /// leaves the argmin set untouched.
    #[test]
    fn monotone_transform_preserves_argmin(
        values in prop::collection::vec(-100.0..100.0f64, 2..32),
        duplicate_first in any::<bool>(),
        slopes in prop::collection::vec(0.1..10.0f64, 8),
    ) {
        let mut values = values;
        if duplicate_first {
            values.push(values[0]);
        }
        // Piecewise-linear, strictly increasing over [-100, 100]: eight
        // segments with positive slopes.
        let transform = |x: f64| -> f64 {
            let span = 200.0 / slopes.len() as f64;
            let mut knot = -100.0;
            let mut y = 0.0;
            for &slope in &slopes {
                let upper = knot + span;
                if x <= upper {
                    return y + slope * (x - knot);
                }
                y += slope * span;
                knot = upper;
            }
            y + slopes[slopes.len() - 1] * (x - knot)
        };

        let transformed: Vec<f64> = values.iter().map(|&v| transform(v)).collect();
        let argmin_set = |vals: &[f64]| -> Vec<usize> {
            let best = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            vals.iter()
                .enumerate()
                .filter(|(_, &v)| (v - best).abs() <= 1e-12 * best.abs().max(1.0))
                .map(|(i, _)| i)
                .collect()
        };
        prop_assert_eq!(argmin_set(&values), argmin_set(&transformed));
    }
}
