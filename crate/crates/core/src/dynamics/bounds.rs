use crate::dynamics::MapPair;
use crate::graph::SpectralSummary;
use crate::{Error, Result};

/// Inputs of the step-rate and delay-budget bounds. The spectra are those of
/// the union graph over a window of `window + 1` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub kappa_n: f64,
    pub kappa_l: f64,
    pub big_k_n: f64,
    pub big_k_l: f64,
    pub lambda2: f64,
    pub lambda_n: f64,
    pub u: f64,
    pub window: u32,
    pub tau_bar: u32,
}

impl BoundInputs {
    pub fn from_spectrum(spec: &SpectralSummary, maps: &MapPair, u: f64, window: u32, tau_bar: u32) -> Self {
        Self {
            kappa_n: maps.node.kappa(),
            kappa_l: maps.link.kappa(),
            big_k_n: maps.node.big_k(),
            big_k_l: maps.link.big_k(),
            lambda2: spec.lambda2,
            lambda_n: spec.lambda_n,
            u,
            window,
            tau_bar,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lambda2 == 0.0 {
            return Err(Error::Domain("no uniform connectivity: union graph has lambda2 = 0".into()));
        }
        let named = [
            ("kappa_n", self.kappa_n),
            ("kappa_l", self.kappa_l),
            ("K_n", self.big_k_n),
            ("K_l", self.big_k_l),
            ("lambda2", self.lambda2),
            ("lambda_n", self.lambda_n),
            ("u", self.u),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// `kappa_n kappa_l lambda2 / (u lambda_n^2 K_n^2 K_l^2)`.
    fn gain(&self) -> f64 {
        let kk = self.big_k_n * self.big_k_l;
        self.kappa_n * self.kappa_l * self.lambda2 / (self.u * self.lambda_n * self.lambda_n * kk * kk)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRateBound {
    pub eta_bar: f64,
    pub inputs: BoundInputs,
}

/// `eta_bar = gain / (T + tau_bar + 1)`; `tau_bar = 0` is the delay-free bound.
pub fn step_rate_bound(inputs: &BoundInputs) -> Result<StepRateBound> {
    inputs.validate()?;
    let denom = f64::from(inputs.window) + f64::from(inputs.tau_bar) + 1.0;
    Ok(StepRateBound { eta_bar: inputs.gain() / denom, inputs: *inputs })
}

/// Largest delay tolerated at step rate `eta`: `gain / eta - 1 - T`.
/// Negative means no delay is tolerated. `inputs.tau_bar` is ignored.
pub fn max_delay_bound(inputs: &BoundInputs, eta: f64) -> Result<f64> {
    inputs.validate()?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Config(format!("step rate must be finite and > 0, got {eta}")));
    }
    Ok(inputs.gain() / eta - 1.0 - f64::from(inputs.window))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(lambda: f64, u: f64) -> BoundInputs {
        BoundInputs {
            kappa_n: 1.0,
            kappa_l: 1.0,
            big_k_n: 1.0,
            big_k_l: 1.0,
            lambda2: lambda,
            lambda_n: lambda,
            u,
            window: 0,
            tau_bar: 0,
        }
    }

    #[test]
    fn unit_constants_give_inverse_u_lambda() {
        let b = step_rate_bound(&unit(0.4, 2.5)).unwrap();
        assert!((b.eta_bar - 1.0 / (2.5 * 0.4)).abs() < 1e-15);
    }

    #[test]
    fn doubling_the_horizon_halves_the_bound() {
        let base = BoundInputs { window: 1, tau_bar: 0, ..unit(0.3, 1.0) };
        let doubled = BoundInputs { window: 2, tau_bar: 1, ..base };
        let a = step_rate_bound(&base).unwrap().eta_bar;
        let b = step_rate_bound(&doubled).unwrap().eta_bar;
        assert!((a - 2.0 * b).abs() < 1e-15);
    }

    #[test]
    fn disconnected_union_is_a_domain_error() {
        assert!(matches!(step_rate_bound(&unit(0.0, 1.0)), Err(Error::Domain(_))));
        assert!(matches!(step_rate_bound(&BoundInputs { u: -1.0, ..unit(1.0, 1.0) }), Err(Error::Config(_))));
    }

    #[test]
    fn delay_budget_shrinks_with_eta() {
        let b = unit(0.5, 0.2);
        let small = max_delay_bound(&b, 0.01).unwrap();
        let large = max_delay_bound(&b, 0.02).unwrap();
        assert!(small > 2.0 * large);
        assert!(max_delay_bound(&b, 1e-9).unwrap() > 1e8);
    }
}
