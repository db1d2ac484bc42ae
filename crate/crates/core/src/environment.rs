//! Environment laws and regime classification.
//!
//! The environment attaches to every site i a stay probability omega_i, drawn
//! i.i.d. from a finite-support law eta bounded away from 0 and 1. The whole
//! qualitative behaviour of the minimal position is decided by how the top of
//! the support compares with 1/m: a site with m * omega > 1 can trap a
//! supercritical stayer population forever, one with m * omega = 1 traps for
//! infinite expected time, and if every site has m * omega < 1 the front
//! moves at a positive linear speed.

use crate::branching::OffspringLaw;
use crate::error::{Error, Result};
use rand::Rng;

/// Equality tolerance for the critical boundary omega_max = 1/m and for
/// weight normalization.
pub const CLASSIFY_TOL: f64 = 1e-12;

/// Finite-support law for the per-site stay probability.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentLaw {
    support: Vec<f64>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
    delta: f64,
}

impl EnvironmentLaw {
    /// `support` must be strictly increasing inside (delta, 1 - delta) and
    /// `weights` a probability vector of the same length.
    pub fn new(support: Vec<f64>, weights: Vec<f64>, delta: f64) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidEnvironment("empty support".into()));
        }
        if support.len() != weights.len() {
            return Err(Error::InvalidEnvironment(
                "support and weights differ in length".into(),
            ));
        }
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::InvalidEnvironment(format!(
                "delta {delta} outside (0, 0.5)"
            )));
        }
        for w in support.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidEnvironment(
                    "support values must be strictly increasing".into(),
                ));
            }
        }
        for &x in &support {
            if !(x > delta && x < 1.0 - delta) {
                return Err(Error::InvalidEnvironment(format!(
                    "support value {x} outside ({delta}, {})",
                    1.0 - delta
                )));
            }
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidEnvironment(
                "weights must be nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > CLASSIFY_TOL {
            return Err(Error::InvalidEnvironment(format!(
                "weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in &weights {
            acc += w;
            cdf.push(acc);
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Ok(Self {
            support,
            weights,
            cdf,
            delta,
        })
    }

    /// Degenerate law putting all mass on a single omega.
    pub fn constant(omega: f64) -> Result<Self> {
        let delta = 0.5 * omega.min(1.0 - omega);
        Self::new(vec![omega], vec![1.0], delta)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_constant(&self) -> bool {
        self.support.len() == 1
    }

    /// Largest support value; the classification statistic.
    pub fn omega_max(&self) -> f64 {
        *self.support.last().expect("support nonempty")
    }

    /// Exact expectation of f(omega), a plain weighted sum. Errors if f is
    /// not finite at some support point, which is how rate-function callers
    /// detect arguments outside their domain.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut total = 0.0;
        for (&x, &w) in self.support.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "integrand not finite at support point {x}"
                )));
            }
            total += w * v;
        }
        Ok(total)
    }

    /// One i.i.d. draw.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        for (i, &c) in self.cdf.iter().enumerate() {
            if u < c {
                return self.support[i];
            }
        }
        *self.support.last().expect("support nonempty")
    }

    /// An i.i.d. environment realization of the given length.
    pub fn sample_realization<R: Rng + ?Sized>(
        &self,
        length: usize,
        rng: &mut R,
    ) -> EnvironmentRealization {
        let omegas = (0..length).map(|_| self.sample_one(rng)).collect();
        EnvironmentRealization { omegas }
    }
}

/// A concrete sequence omega_0, omega_1, ... of per-site stay probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentRealization {
    pub omegas: Vec<f64>,
}

impl EnvironmentRealization {
    pub fn new(omegas: Vec<f64>) -> Self {
        Self { omegas }
    }

    /// Constant environment of the given length.
    pub fn constant(omega: f64, length: usize) -> Self {
        Self {
            omegas: vec![omega; length],
        }
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn omega(&self, site: usize) -> f64 {
        self.omegas[site]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeKind {
    Supercritical,
    Critical,
    Subcritical,
}

impl std::fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegimeKind::Supercritical => write!(f, "supercritical"),
            RegimeKind::Critical => write!(f, "critical"),
            RegimeKind::Subcritical => write!(f, "subcritical"),
        }
    }
}

/// Classification of an (environment, offspring) pair, together with whether
/// the law puts positive mass exactly on 1/m (the hypothesis under which the
/// critical-case results hold).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Regime {
    pub kind: RegimeKind,
    pub mass_at_one_over_m: bool,
}

/// Compare omega_max with 1/m at tolerance 1e-12.
pub fn classify(env: &EnvironmentLaw, offspring: &OffspringLaw) -> Regime {
    let boundary = 1.0 / offspring.mean();
    let top = env.omega_max();
    let kind = if (top - boundary).abs() <= CLASSIFY_TOL {
        RegimeKind::Critical
    } else if top > boundary {
        RegimeKind::Supercritical
    } else {
        RegimeKind::Subcritical
    };
    let mass_at_one_over_m = env
        .support()
        .iter()
        .zip(env.weights())
        .any(|(&x, &w)| (x - boundary).abs() <= CLASSIFY_TOL && w > 0.0);
    Regime {
        kind,
        mass_at_one_over_m,
    }
}
