use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use nlsparse::dantzig::{constraint_residual, solve_dantzig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum of `sum(v+ + v-)` over every basic feasible solution of
/// `[H -H I 0; -H H 0 I] (v+, v-, s1, s2) = (rho + g, rho - g)` with all
/// variables nonnegative. `None` when no basis is feasible.
fn enumerate_bases(g: &Array1<f64>, h: &Array2<f64>, rho: f64) -> Option<f64> {
    let m = g.len();
    let rows = 2 * m;
    let cols = 4 * m;
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut b = DVector::<f64>::zeros(rows);
    for i in 0..m {
        for k in 0..m {
            a[(i, k)] = h[[i, k]];
            a[(i, m + k)] = -h[[i, k]];
            a[(m + i, k)] = -h[[i, k]];
            a[(m + i, m + k)] = h[[i, k]];
        }
        a[(i, 2 * m + i)] = 1.0;
        a[(m + i, 3 * m + i)] = 1.0;
        b[i] = rho + g[i];
        b[m + i] = rho - g[i];
    }
    let mut best: Option<f64> = None;
    let mut chosen = Vec::with_capacity(rows);
    subsets(cols, rows, 0, &mut chosen, &mut |basis| {
        let sub = DMatrix::from_fn(rows, rows, |r, c| a[(r, basis[c])]);
        let lu = sub.clone().lu();
        if sub.determinant().abs() < 1e-12 {
            return;
        }
        let Some(x) = lu.solve(&b) else { return };
        if x.iter().any(|&v| v < -1e-9) {
            return;
        }
        let objective: f64 = basis
            .iter()
            .zip(x.iter())
            .filter(|(&c, _)| c < 2 * m)
            .map(|(_, &v)| v.max(0.0))
            .sum();
        best = Some(best.map_or(objective, |o: f64| o.min(objective)));
    });
    best
}

fn subsets(
    n: usize,
    k: usize,
    start: usize,
    chosen: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if chosen.len() == k {
        visit(chosen);
        return;
    }
    for i in start..n {
        if n - i < k - chosen.len() {
            break;
        }
        chosen.push(i);
        subsets(n, k, i + 1, chosen, visit);
        chosen.pop();
    }
}

fn random_instance(rng: &mut ChaCha8Rng, m: usize) -> (Array1<f64>, Array2<f64>) {
    let p = m + rng.gen_range(0..4);
    let x = Array2::from_shape_fn((p, m), |_| rng.gen_range(-1.0..1.0));
    let h = x.t().dot(&x) / p as f64 + Array2::<f64>::eye(m) * 0.05;
    let g = Array1::from_shape_fn(m, |_| rng.gen_range(-1.5..1.5));
    (g, h)
}

#[test]
fn matches_basis_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let m = 1 + case % 4;
        let (g, h) = random_instance(&mut rng, m);
        let rho = rng.gen_range(0.02..0.3);
        let oracle =
            enumerate_bases(&g, &h, rho).expect("positive definite Gram is always feasible");
        let r = solve_dantzig(g.view(), h.view(), rho).unwrap();
        assert!(r.is_optimal(), "case {case}");
        assert!(
            (r.l1_norm - oracle).abs() <= 1e-6,
            "case {case}: simplex {} vs oracle {oracle}",
            r.l1_norm
        );
        assert!(constraint_residual(g.view(), h.view(), r.d_hat.view()) <= rho + 1e-8);
    }
}

#[test]
fn singular_gram_matches_enumeration() {
    // Rank-one Gram: only multiples of u are reachable.
    let u = Array1::from(vec![1.0, 2.0, -1.0]);
    let h = Array2::from_shape_fn((3, 3), |(i, j)| u[i] * u[j]);
    let g = &u * 0.7;
    let r = solve_dantzig(g.view(), h.view(), 0.1).unwrap();
    let oracle = enumerate_bases(&g, &h, 0.1).unwrap();
    assert!((r.l1_norm - oracle).abs() <= 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scale_invariant(seed in 0u64..10_000, m in 1usize..6, c in 1e-3f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, h) = random_instance(&mut rng, m);
        let rho = 0.1;
        let base = solve_dantzig(g.view(), h.view(), rho).unwrap();
        let scaled = solve_dantzig((&g * c).view(), (&h * c).view(), rho * c).unwrap();
        for (a, b) in base.d_hat.iter().zip(scaled.d_hat.iter()) {
            prop_assert!((a - b).abs() <= 1e-8, "{} vs {}", a, b);
        }
    }

    #[test]
    fn zero_shortcut(seed in 0u64..10_000, m in 1usize..8, rho in 0.01f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, h) = random_instance(&mut rng, m);
        let g = Array1::from_shape_fn(m, |_| rng.gen_range(-rho..=rho));
        let r = solve_dantzig(g.view(), h.view(), rho).unwrap();
        prop_assert!(r.d_hat.iter().all(|&v| v == 0.0));
        prop_assert_eq!(r.l1_norm, 0.0);
    }
}
