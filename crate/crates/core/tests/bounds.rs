use dra_core::dynamics::{max_delay_bound, step_rate_bound, BoundInputs};
use dra_core::Error;
use proptest::prelude::*;

/// Constants quoted for the delay experiment: ER(50, 0.2) spectrum, identity
/// node map, a log quantizer on links and the smoothness estimate `u = 0.115`.
fn quoted_delay_constants(tau_bar: u32) -> BoundInputs {
    BoundInputs {
        kappa_n: 1.0,
        kappa_l: 0.938,
        big_k_n: 1.0,
        big_k_l: 1.062,
        lambda2: 0.044,
        lambda_n: 0.311,
        u: 0.115,
        window: 0,
        tau_bar,
    }
}

/// Hand evaluation of `k_n k_l l2 / (u ln^2 K_n^2 K_l^2)` for the quoted constants.
const QUOTED_GAIN: f64 = 3.2899391315102195;

#[test]
fn quoted_delay_constants_regression() {
    let eta_bar = step_rate_bound(&quoted_delay_constants(2)).unwrap().eta_bar;
    assert!((eta_bar - QUOTED_GAIN / 3.0).abs() < 1e-12, "{eta_bar}");
    assert!((eta_bar - 1.0966463771700732).abs() < 1e-12);
    let budget = max_delay_bound(&quoted_delay_constants(0), 2.0).unwrap();
    assert!((budget - 0.6449695657551098).abs() < 1e-12, "{budget}");
    // At eta = 2 these constants leave room for no delay at all; eta = 0.5 admits tau_bar <= 5.
    assert!(budget < 1.0);
    let relaxed = max_delay_bound(&quoted_delay_constants(0), 0.5).unwrap();
    assert!(relaxed > 5.0 && relaxed < 6.0, "{relaxed}");
}

fn inputs() -> impl Strategy<Value = BoundInputs> {
    (0.1f64..1.0, 0.1f64..1.0, 1.0f64..2.0, 1.0f64..2.0, 0.01f64..5.0, 1.0f64..4.0, 0.01f64..10.0, 0u32..20).prop_map(
        |(kappa_n, kappa_l, big_k_n, big_k_l, lambda2, ratio, u, window)| BoundInputs {
            kappa_n,
            kappa_l,
            big_k_n,
            big_k_l,
            lambda2,
            lambda_n: lambda2 * ratio,
            u,
            window,
            tau_bar: 0,
        },
    )
}

proptest! {
    #[test]
    fn step_rate_bound_strictly_decreases_in_delay(b in inputs()) {
        let mut prev = f64::INFINITY;
        for tau_bar in 0..=64 {
            let eta_bar = step_rate_bound(&BoundInputs { tau_bar, ..b }).unwrap().eta_bar;
            prop_assert!(eta_bar < prev);
            prev = eta_bar;
        }
    }

    #[test]
    fn step_rate_bound_decreases_in_u_window_and_lambda_n(b in inputs(), factor in 1.01f64..10.0) {
        let base = step_rate_bound(&b).unwrap().eta_bar;
        let stiffer = BoundInputs { u: b.u * factor, ..b };
        let longer = BoundInputs { window: b.window + 1, ..b };
        let wider = BoundInputs { lambda_n: b.lambda_n * factor, ..b };
        for changed in [stiffer, longer, wider] {
            prop_assert!(step_rate_bound(&changed).unwrap().eta_bar < base);
        }
    }

    #[test]
    fn delay_budget_inverts_step_rate_bound(b in inputs(), tau_bar in 0u32..50) {
        // At eta = eta_bar(tau_bar) the budget is exactly tau_bar.
        let eta_bar = step_rate_bound(&BoundInputs { tau_bar, ..b }).unwrap().eta_bar;
        let budget = max_delay_bound(&b, eta_bar).unwrap();
        prop_assert!((budget - f64::from(tau_bar)).abs() < 1e-9 * (1.0 + f64::from(tau_bar + b.window)));
        // Slightly below eta_bar, tau_bar is strictly admissible; slightly above it is not.
        prop_assert!(max_delay_bound(&b, eta_bar * (1.0 - 1e-6)).unwrap() > f64::from(tau_bar));
        prop_assert!(max_delay_bound(&b, eta_bar * (1.0 + 1e-6)).unwrap() < f64::from(tau_bar));
    }
}

#[test]
fn disconnected_union_has_no_bound() {
    let b = BoundInputs { lambda2: 0.0, ..quoted_delay_constants(0) };
    assert!(matches!(step_rate_bound(&b), Err(Error::Domain(_))));
    assert!(matches!(max_delay_bound(&b, 1.0), Err(Error::Domain(_))));
}
