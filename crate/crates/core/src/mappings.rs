//! Sector-bounded scalar nonlinearities applied at nodes (`g_n`) and links (`g_l`).
//!
//! Every map is odd, sign-preserving and monotone nondecreasing, and carries a
//! certified sector `kappa * |z| <= |g(z)| <= big_k * |z|` valid on its domain.
//! Certificates are exact bounds, never first-order approximations.

use rand::Rng;

use crate::rng::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapKind {
    Identity,
    /// `sgn(z) * exp(rho * round(ln|z| / rho))`, ties to even; `g(0) = 0`.
    LogQuantizer {
        rho: f64,
    },
    /// Clip to `[-level, level]`; certificate valid for `|z| <= domain_max`.
    Saturation {
        level: f64,
        domain_max: f64,
    },
    /// `sgn(z) * |z|^exponent` for `domain_min <= |z| <= domain_max`, linear with
    /// slope `domain_min^(exponent-1)` below `domain_min`.
    SignPower {
        exponent: f64,
        domain_min: f64,
        domain_max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorMap {
    kind: MapKind,
    kappa: f64,
    big_k: f64,
}

impl SectorMap {
    pub fn new(kind: MapKind) -> Result<Self> {
        let (kappa, big_k) = match kind {
            MapKind::Identity => (1.0, 1.0),
            MapKind::LogQuantizer { rho } => {
                if !(rho > 0.0 && rho.is_finite()) {
                    return Err(Error::Config(format!("log quantizer level must be > 0, got {rho}")));
                }
                ((-rho / 2.0).exp(), (rho / 2.0).exp())
            }
            MapKind::Saturation { level, domain_max } => {
                if !(level > 0.0 && domain_max > level && domain_max.is_finite()) {
                    return Err(Error::Config(format!(
                        "saturation needs 0 < level < domain_max, got level={level}, domain_max={domain_max}"
                    )));
                }
                (level / domain_max, 1.0)
            }
            MapKind::SignPower { exponent, domain_min, domain_max } => {
                if !(exponent > 0.0 && exponent <= 1.0) {
                    return Err(Error::Config(format!("sign-power exponent must be in (0,1], got {exponent}")));
                }
                if !(domain_min > 0.0 && domain_max > domain_min && domain_max.is_finite()) {
                    return Err(Error::Config(format!(
                        "sign-power needs 0 < domain_min < domain_max, got [{domain_min},{domain_max}]"
                    )));
                }
                // |z|^(nu-1) is nonincreasing in |z|, so the extremes sit on the domain boundary.
                (domain_max.powf(exponent - 1.0), domain_min.powf(exponent - 1.0))
            }
        };
        Ok(Self { kind, kappa, big_k })
    }

    pub fn identity() -> Self {
        Self { kind: MapKind::Identity, kappa: 1.0, big_k: 1.0 }
    }

    pub fn log_quantizer(rho: f64) -> Result<Self> {
        Self::new(MapKind::LogQuantizer { rho })
    }

    pub fn saturation(level: f64, domain_max: f64) -> Result<Self> {
        Self::new(MapKind::Saturation { level, domain_max })
    }

    pub fn sign_power(exponent: f64, domain_min: f64, domain_max: f64) -> Result<Self> {
        Self::new(MapKind::SignPower { exponent, domain_min, domain_max })
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, MapKind::Identity)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn big_k(&self) -> f64 {
        self.big_k
    }

    /// Certified `(kappa, big_k)`.
    pub fn sector_params(&self) -> (f64, f64) {
        (self.kappa, self.big_k)
    }

    /// First-order sector values `1 -/+ rho/2` commonly quoted for the log
    /// quantizer. Not a valid certificate: `e^(rho/2) > 1 + rho/2`.
    pub fn linearized_sector(&self) -> Option<(f64, f64)> {
        match self.kind {
            MapKind::LogQuantizer { rho } => Some((1.0 - rho / 2.0, 1.0 + rho / 2.0)),
            _ => None,
        }
    }

    /// Largest `|z|` covered by the certificate.
    pub fn domain(&self) -> f64 {
        match self.kind {
            MapKind::Identity | MapKind::LogQuantizer { .. } => f64::INFINITY,
            MapKind::Saturation { domain_max, .. } | MapKind::SignPower { domain_max, .. } => domain_max,
        }
    }

    pub fn apply(&self, z: f64) -> Result<f64> {
        self.eval(z).map(|(v, _)| v)
    }

    /// Like [`apply`](Self::apply), counting inputs clamped to the domain boundary.
    pub fn apply_counted(&self, z: f64, clamp_events: &mut u64) -> Result<f64> {
        let (v, clamped) = self.eval(z)?;
        if clamped {
            *clamp_events += 1;
        }
        Ok(v)
    }

    fn eval(&self, z: f64) -> Result<(f64, bool)> {
        if !z.is_finite() {
            return Err(Error::Numeric(format!("non-finite map input {z}")));
        }
        let out = match self.kind {
            MapKind::Identity => (z, false),
            MapKind::LogQuantizer { rho } => {
                if z == 0.0 {
                    (0.0, false)
                } else {
                    let level = (z.abs().ln() / rho).round_ties_even();
                    ((rho * level).exp().copysign(z), false)
                }
            }
            MapKind::Saturation { level, domain_max } => {
                let clamped = z.abs() > domain_max;
                (z.clamp(-level, level), clamped)
            }
            MapKind::SignPower { exponent, domain_min, domain_max } => {
                let a = z.abs();
                let clamped = a > domain_max;
                let a = a.min(domain_max);
                let mag = if a < domain_min { a * domain_min.powf(exponent - 1.0) } else { a.powf(exponent) };
                (mag.copysign(z), clamped)
            }
        };
        Ok(out)
    }
}

/// Products `(kappa_n * kappa_l, big_k_n * big_k_l)` of two certificates.
pub fn composed_sector(node: &SectorMap, link: &SectorMap) -> (f64, f64) {
    (node.kappa * link.kappa, node.big_k * link.big_k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorReport {
    pub samples: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub violations: usize,
}

/// Relative slack granted to floating-point rounding when checking a certificate.
pub const SECTOR_RTOL: f64 = 1e-12;

/// Half-width of the sampling box for maps with an unbounded domain.
const UNBOUNDED_SAMPLE_RADIUS: f64 = 1e3;

/// Samples `g(z)/z` over the map's domain and counts excursions outside
/// `[kappa, big_k]`.
///
/// Half the draws are uniform on `[-W, W]`; the other half have log-uniform
/// magnitude on `[1e-6 W, W]` so small scales are exercised too.
pub fn verify_sector(m: &SectorMap, samples: usize, seed: u64) -> SectorReport {
    let width = m.domain().min(UNBOUNDED_SAMPLE_RADIUS);
    let floor = 1e-6 * width;
    let mut rng = stream(seed, "verify_sector");
    let mut report = SectorReport { samples, min_ratio: f64::INFINITY, max_ratio: f64::NEG_INFINITY, violations: 0 };
    for s in 0..samples {
        let z = if s % 2 == 0 {
            loop {
                let z = rng.random_range(-width..=width);
                if z.abs() >= floor {
                    break z;
                }
            }
        } else {
            let mag = (floor.ln() + rng.random::<f64>() * (width.ln() - floor.ln())).exp();
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        };
        let ratio = m.apply(z).expect("finite sample") / z;
        report.min_ratio = report.min_ratio.min(ratio);
        report.max_ratio = report.max_ratio.max(ratio);
        if ratio < m.kappa * (1.0 - SECTOR_RTOL) || ratio > m.big_k * (1.0 + SECTOR_RTOL) {
            report.violations += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_quantizer_examples() {
        let q = SectorMap::log_quantizer(0.25).unwrap();
        assert_eq!(q.apply(1.0).unwrap(), 1.0);
        let z = 0.3_f64.exp();
        assert!((q.apply(z).unwrap() - 0.25_f64.exp()).abs() < 1e-15);
        assert!((q.apply(-z).unwrap() + 0.25_f64.exp()).abs() < 1e-15);
        assert_eq!(q.apply(0.0).unwrap(), 0.0);
    }

    #[test]
    fn log_quantizer_fixes_lattice_points() {
        let rho = 0.125;
        let q = SectorMap::log_quantizer(rho).unwrap();
        for k in -200..=200 {
            let z = (rho * f64::from(k)).exp();
            let g = q.apply(z).unwrap();
            assert!((g - z).abs() <= 4.0 * f64::EPSILON * z, "k={k}");
            assert_eq!(q.apply(-z).unwrap(), -g);
        }
    }

    #[test]
    fn saturation_examples() {
        let s = SectorMap::saturation(1.0, 5.0).unwrap();
        assert_eq!(s.apply(3.0).unwrap(), 1.0);
        assert_eq!(s.apply(0.5).unwrap(), 0.5);
        assert_eq!(s.apply(-3.0).unwrap(), -1.0);
        let mut clamps = 0;
        assert_eq!(s.apply_counted(7.0, &mut clamps).unwrap(), 1.0);
        assert_eq!(s.apply_counted(4.0, &mut clamps).unwrap(), 1.0);
        assert_eq!(clamps, 1);
    }

    #[test]
    fn certified_parameters() {
        let (k, big) = SectorMap::log_quantizer(0.125).unwrap().sector_params();
        assert!((k - 0.9394130628134758).abs() < 1e-15);
        assert!((big - 1.0644944589178593).abs() < 1e-15);
        assert_eq!(SectorMap::log_quantizer(0.125).unwrap().linearized_sector(), Some((0.9375, 1.0625)));
        assert_eq!(SectorMap::identity().sector_params(), (1.0, 1.0));
        assert_eq!(SectorMap::saturation(1.0, 4.0).unwrap().sector_params(), (0.25, 1.0));
        let sp = SectorMap::sign_power(0.5, 0.01, 100.0).unwrap();
        assert!((sp.kappa() - 0.1).abs() < 1e-15 && (sp.big_k() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(SectorMap::log_quantizer(0.0).is_err());
        assert!(SectorMap::saturation(2.0, 1.0).is_err());
        assert!(SectorMap::sign_power(1.5, 0.1, 1.0).is_err());
        assert!(SectorMap::sign_power(0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn non_finite_input_is_an_error() {
        assert!(matches!(SectorMap::identity().apply(f64::NAN), Err(Error::Numeric(_))));
        assert!(SectorMap::log_quantizer(0.1).unwrap().apply(f64::INFINITY).is_err());
    }

    #[test]
    fn verify_reports() {
        let r = verify_sector(&SectorMap::identity(), 1000, 1);
        assert_eq!((r.min_ratio, r.max_ratio, r.violations), (1.0, 1.0, 0));
        let r = verify_sector(&SectorMap::log_quantizer(0.25).unwrap(), 100_000, 2);
        assert_eq!(r.violations, 0);
        assert!(r.max_ratio > 1.12 && r.min_ratio < 0.89, "{r:?}");
        let r = verify_sector(&SectorMap::saturation(1.0, 5.0).unwrap(), 100_000, 3);
        assert_eq!(r.violations, 0);
        assert!((r.min_ratio - 0.2).abs() < 1e-3);
    }

    #[test]
    fn linearized_values_are_violated_by_the_exact_quantizer() {
        let q = SectorMap::log_quantizer(0.25).unwrap();
        let (_, upper) = q.linearized_sector().unwrap();
        // Just above the rounding midpoint between lattice levels -1 and 0.
        let z = (-0.125_f64 + 1e-9).exp();
        assert!(q.apply(z).unwrap() / z > upper);
    }
}
