use permreg::assignment::{build_cost_matrix, hungarian_solve, surrogate_from_fit, CostMatrix};
use permreg::io::standardize;
use permreg::numerics::{f_cdf, f_quantile};
use permreg::permutation::{PermutationClass, SparsePermutation};
use proptest::prelude::*;

fn permutation(n: usize) -> impl Strategy<Value = SparsePermutation> {
    Just((0..n).collect::<Vec<usize>>())
        .prop_shuffle()
        .prop_map(|images| SparsePermutation::from_images(&images).unwrap())
}

fn square(max_n: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), prop::collection::vec(-50.0f64..50.0, n * n)))
}

fn brute_min(c: &CostMatrix) -> f64 {
    fn go(c: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        let n = c.n();
        if row == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                go(c, row + 1, used, acc + c.get(row, j), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(c, 0, &mut vec![false; c.n()], 0.0, &mut best);
    best
}

proptest! {
    #[test]
    fn hungarian_matches_enumeration((n, costs) in square(6)) {
        let c = CostMatrix::new(n, costs).unwrap();
        let sol = hungarian_solve(&c);
        let best = brute_min(&c);
        prop_assert!((sol.objective - best).abs() <= 1e-9 * (1.0 + best.abs()));
        prop_assert!((c.assignment_cost(&sol.columns) - sol.objective).abs() <= 1e-9 * (1.0 + best.abs()));
        // dual feasibility and strong duality
        for i in 0..n {
            for j in 0..n {
                prop_assert!(sol.row_duals[i] + sol.col_duals[j] <= c.get(i, j) + 1e-9);
            }
        }
        let dual: f64 = sol.row_duals.iter().chain(&sol.col_duals).sum();
        prop_assert!((dual - best).abs() <= 1e-8 * (1.0 + best.abs()));
    }

    #[test]
    fn row_constant_shifts_keep_the_assignment((n, costs) in square(6), shift in -20.0f64..20.0, row in 0usize..6) {
        let c = CostMatrix::new(n, costs.clone()).unwrap();
        let r = row % n;
        let shifted = CostMatrix::from_fn(n, |i, j| costs[i * n + j] + if i == r { shift } else { 0.0 }).unwrap();
        let a = hungarian_solve(&c);
        let b = hungarian_solve(&shifted);
        prop_assert!((b.objective - a.objective - shift).abs() <= 1e-8 * (1.0 + a.objective.abs()));
    }

    #[test]
    fn apply_and_inverse(p in (1usize..30).prop_flat_map(permutation), seed in 0u64..1000) {
        let n = p.n();
        let v: Vec<f64> = (0..n).map(|i| (i as f64 + seed as f64).sin()).collect();
        let w = p.apply(&v).unwrap();
        for j in 0..n {
            prop_assert_eq!(w[p.image(j)], v[j]);
        }
        prop_assert_eq!(p.inverse().apply(&w).unwrap(), v.clone());
        prop_assert!(p.compose(&p.inverse()).is_identity());
        prop_assert_eq!(p.inverse().hamming_distance(), p.hamming_distance());
        let dense = p.to_dense();
        prop_assert_eq!(dense.mul_vec(&v).unwrap(), w);
    }

    #[test]
    fn surrogate_respects_sparsity_bound(
        y in prop::collection::vec(-5.0f64..5.0, 8),
        m in prop::collection::vec(-5.0f64..5.0, 8),
        lam1 in 0.01f64..3.0,
        lam2 in 0.0f64..1.0,
    ) {
        let resid: f64 = y.iter().zip(&m).map(|(a, b)| (a - b).powi(2)).sum();
        let sol = surrogate_from_fit(&y, &m, lam1, lam2, 2).unwrap();
        prop_assert!(lam1 * sol.permutation.hamming_distance() as f64 <= resid + 1e-9);
        let omega = build_cost_matrix(&y, &m, lam1, lam2).unwrap();
        prop_assert!(sol.lap_objective <= omega.assignment_cost(&(0..8).collect::<Vec<_>>()) + 1e-9);
    }

    #[test]
    fn class_counts_are_consistent(n in 1usize..9, k in 0usize..9) {
        let k = k.min(n);
        let class = PermutationClass::new(n, k).unwrap();
        let members: Vec<SparsePermutation> = class.enumerate().unwrap().collect();
        prop_assert_eq!(members.len() as u128, class.count().unwrap());
        prop_assert!(members.iter().all(|p| p.hamming_distance() <= k && class.contains(p)));
        let mut sorted = members.clone();
        sorted.sort();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), members.len());
    }

    #[test]
    fn standardized_columns(v in prop::collection::vec(-1e3f64..1e3, 3..50)) {
        let mut w = v.clone();
        if standardize(&mut w, "v").is_ok() {
            let n = w.len() as f64;
            let mean = w.iter().sum::<f64>() / n;
            let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-10);
            prop_assert!((var - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn f_quantile_inverts_cdf(d1 in 1usize..12, d2 in 1usize..80, q in 0.01f64..0.99) {
        let x = f_quantile(d1, d2, q).unwrap();
        prop_assert!((f_cdf(d1, d2, x).unwrap() - q).abs() < 1e-9);
    }

    #[test]
    fn permutation_json_round_trip(p in (1usize..20).prop_flat_map(permutation)) {
        let text = serde_json::to_string(&p).unwrap();
        let back: SparsePermutation = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, p);
    }
}
