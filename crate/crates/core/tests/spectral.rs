use dra_core::graph::{diameter, dispersion, erdos_renyi, is_connected, laplacian, WeightedGraph};
use dra_core::numeric::{dot, norm2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RTOL: f64 = 1e-9;

fn connected_er(n: usize, p: f64, seed: u64) -> Option<WeightedGraph> {
    let g = erdos_renyi(n, p, (0.5, 1.0), seed).ok()?;
    is_connected(&g).then_some(g)
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-10.0..10.0)).collect()
}

#[test]
fn cycle_spectrum_matches_closed_form() {
    for n in [3usize, 8, 17] {
        let g = WeightedGraph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n, 1.0))).unwrap();
        let spec = laplacian(&g).spectrum().unwrap();
        let mut expect: Vec<f64> =
            (0..n).map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()).collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in spec.eigenvalues.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "n={n}: {a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn quadratic_form_is_bracketed_by_extreme_eigenvalues(
        n in 3usize..30, p in 0.15f64..0.9, seed in any::<u64>()
    ) {
        let g = connected_er(n, p, seed);
        prop_assume!(g.is_some());
        let l = laplacian(&g.unwrap());
        let spec = l.spectrum().unwrap();
        let x = random_vec(n, seed ^ 1);
        let xb = dispersion(&x);
        let q = l.quadratic_form(&x);
        let scale = spec.lambda_n * norm2(&x).powi(2);
        let nx = norm2(&xb).powi(2);
        prop_assert!(q >= spec.lambda2 * nx - RTOL * scale);
        prop_assert!(q <= spec.lambda_n * nx + RTOL * scale);
        prop_assert!((q - l.quadratic_form(&xb)).abs() <= RTOL * scale);
    }

    #[test]
    fn bilinear_form_ignores_consensus_component(
        n in 2usize..30, p in 0.1f64..1.0, seed in any::<u64>()
    ) {
        let g = erdos_renyi(n, p, (0.5, 1.0), seed).unwrap();
        let l = laplacian(&g);
        let x = random_vec(n, seed ^ 2);
        let y = random_vec(n, seed ^ 3);
        let scale = l.max_row_sum_abs().max(1.0) * 2.0 * norm2(&x) * norm2(&y) + f64::MIN_POSITIVE;
        let lhs = l.bilinear(&x, &y);
        let rhs = l.bilinear(&dispersion(&x), &dispersion(&y));
        prop_assert!((lhs - rhs).abs() <= RTOL * scale, "{lhs} vs {rhs}");
        prop_assert!(dot(&dispersion(&x), &[1.0; 30][..n]).abs() < 1e-9 * norm2(&x).max(1.0));
    }

    #[test]
    fn algebraic_connectivity_exceeds_inverse_n_diameter(
        n in 3usize..40, p in 0.1f64..0.8, seed in any::<u64>()
    ) {
        let g = erdos_renyi(n, p, (1.0, 1.0), seed).unwrap();
        prop_assume!(is_connected(&g));
        let lambda2 = laplacian(&g).spectrum().unwrap().lambda2;
        let d = diameter(&g).unwrap();
        prop_assert!(lambda2 >= 1.0 / (n * d) as f64, "lambda2={lambda2} n={n} d={d}");
    }

    #[test]
    fn adding_a_link_never_lowers_lambda2(
        n in 3usize..30, p in 0.1f64..0.7, seed in any::<u64>(), pick in any::<u64>(), w in 0.1f64..2.0
    ) {
        let g = erdos_renyi(n, p, (0.5, 1.0), seed).unwrap();
        let missing: Vec<(usize, usize)> =
            (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).filter(|&(i, j)| g.weight(i, j) == 0.0).collect();
        prop_assume!(!missing.is_empty());
        let (i, j) = missing[(pick % missing.len() as u64) as usize];
        let before = laplacian(&g).spectrum().unwrap();
        let after = laplacian(&g.with_link(i, j, w).unwrap()).spectrum().unwrap();
        // Weyl: every eigenvalue of L + w (e_i - e_j)(e_i - e_j)^T is at least the old one.
        let tol = 1e-10 * after.lambda_n;
        for (a, b) in after.eigenvalues.iter().zip(&before.eigenvalues) {
            prop_assert!(a + tol >= *b);
        }
        prop_assert!(after.lambda2 + tol >= before.lambda2 || !before.is_connected());
    }
}
