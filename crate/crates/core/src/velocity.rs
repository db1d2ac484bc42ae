//! Closed-form velocity machinery for the subcritical regime.
//!
//! For a particle at a site with stay probability omega, the descendants that
//! eventually leave carry the weight
//!
//! ```text
//! m0(t) = sum_{i>=1} m^i omega^(i-1) (1 - omega) e^(t i)
//!       = m (1 - omega) e^t / (1 - m omega e^t),
//! ```
//!
//! a geometric series convergent exactly while m * omega * e^t < 1. Averaging
//! log m0 over the environment gives the cumulant Lambda(t), with derivative
//! Lambda'(t) = E[1 / (1 - m omega e^t)]. The front speed comes from the
//! tilted balance rho(t) = t Lambda'(t) - Lambda(t): rho starts negative at
//! t = 0 and blows up at the domain edge t_max = log(1 / (m omega_max)), so
//! it has a unique sign change t_plus, and the speed of the minimal position
//! is gamma = 1 / Lambda'(t_plus).
//!
//! For constant environments the same number falls out of the classical
//! minimal-position theory for branching random walks with i.i.d.
//! displacements (Hammersley, Kingman, Biggins), which provides a fully
//! independent solver used for cross-checking.

use crate::branching::OffspringLaw;
use crate::environment::{classify, EnvironmentLaw, RegimeKind};
use crate::error::{Error, Result};

/// Weight of the leaving descendants, m(1-omega)e^t / (1 - m omega e^t).
/// Defined only while m * omega * e^t < 1.
pub fn m0_of_t(offspring: &OffspringLaw, omega: f64, t: f64) -> Result<f64> {
    let m = offspring.mean();
    let x = m * omega * t.exp();
    if x >= 1.0 {
        return Err(Error::Domain(format!(
            "m * omega * e^t = {x} >= 1; t outside the convergence interval"
        )));
    }
    Ok(m * (1.0 - omega) * t.exp() / (1.0 - x))
}

/// Four integrability/positivity conditions behind the transformed-process
/// limit theory. All hold automatically for any law pair this crate accepts
/// as subcritical; they are computed, not assumed, so the report makes the
/// reasoning visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowthConditions {
    /// E[log m0(0)] lies in (0, infinity).
    pub positive_log_mean: bool,
    /// t = 0 is interior to the convergence interval, i.e. t_max > 0.
    pub zero_interior: bool,
    /// Every site's stayer process dies in finite expected time (m omega < 1
    /// across the support).
    pub finite_mean_occupation: bool,
    /// The offspring law has a finite second moment (free with finite
    /// support).
    pub finite_second_moment: bool,
}

impl GrowthConditions {
    pub fn all(&self) -> bool {
        self.positive_log_mean
            && self.zero_interior
            && self.finite_mean_occupation
            && self.finite_second_moment
    }
}

/// Everything the velocity solver produces for one subcritical model.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityReport {
    pub t_plus: f64,
    pub gamma: f64,
    pub lambda_prime_at_t_plus: f64,
    pub rwre_speed: f64,
    /// Independent classical-route velocity; present for constant
    /// environments only, where the two theories describe the same model.
    pub biggins_gamma: Option<f64>,
    pub conditions: GrowthConditions,
}

/// A subcritical (offspring, environment) pair with its rate-function domain.
/// Construction fails for critical or supercritical input: the velocity
/// machinery has nothing to say there.
#[derive(Debug, Clone)]
pub struct RateContext {
    offspring: OffspringLaw,
    env: EnvironmentLaw,
    t_max: f64,
}

impl RateContext {
    pub fn new(offspring: OffspringLaw, env: EnvironmentLaw) -> Result<Self> {
        let regime = classify(&env, &offspring);
        if regime.kind != RegimeKind::Subcritical {
            return Err(Error::InvalidInput(format!(
                "rate context requires the subcritical regime, got {}",
                regime.kind
            )));
        }
        let t_max = -(offspring.mean() * env.omega_max()).ln();
        debug_assert!(t_max > 0.0);
        Ok(Self {
            offspring,
            env,
            t_max,
        })
    }

    pub fn offspring(&self) -> &OffspringLaw {
        &self.offspring
    }

    pub fn env(&self) -> &EnvironmentLaw {
        &self.env
    }

    /// Right endpoint log(1 / (m omega_max)) of the rate-function domain.
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if !(0.0..self.t_max).contains(&t) {
            return Err(Error::Domain(format!(
                "t = {t} outside [0, t_max = {})",
                self.t_max
            )));
        }
        Ok(())
    }

    /// Lambda(t) = E[log m0(t)].
    pub fn lambda(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        let m = self.offspring.mean();
        self.env.expectation(|w| {
            (m * (1.0 - w) * t.exp() / (1.0 - m * w * t.exp())).ln()
        })
    }

    /// Lambda'(t) = E[1 / (1 - m omega e^t)]; always > 1 and nondecreasing.
    pub fn lambda_prime(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        let m = self.offspring.mean();
        self.env.expectation(|w| 1.0 / (1.0 - m * w * t.exp()))
    }

    /// rho(t) = t Lambda'(t) - Lambda(t); negative at 0, exploding at t_max.
    pub fn rho(&self, t: f64) -> Result<f64> {
        Ok(t * self.lambda_prime(t)? - self.lambda(t)?)
    }

    /// Locate the unique sign change of rho by bisection. The returned value
    /// brackets the root to `tol`: rho is <= 0 just below and > 0 just above.
    pub fn solve_t_plus(&self, tol: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance {tol} must be > 0")));
        }
        let mut lo = 0.0f64;
        let rho_zero = self.rho(0.0)?;
        if rho_zero > 0.0 {
            return Err(Error::Internal(format!(
                "rho(0) = {rho_zero} should be negative (it equals -Lambda(0))"
            )));
        }
        // Walk the upper bracket toward t_max until rho turns positive; the
        // atom at omega_max guarantees it does.
        let mut hi = f64::NAN;
        let mut found = false;
        for k in 1..=60 {
            let cand = self.t_max * (1.0 - 0.5f64.powi(k));
            match self.rho(cand) {
                Ok(r) if r > 0.0 => {
                    hi = cand;
                    found = true;
                    break;
                }
                Ok(_) => lo = cand,
                // Float evaluation can die right at the edge; tighten from
                // the previous candidate instead.
                Err(_) => break,
            }
        }
        if !found {
            return Err(Error::Internal(
                "rho never became positive below t_max".into(),
            ));
        }
        for _ in 0..200 {
            if hi - lo < tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.rho(mid)? <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// The four growth conditions, evaluated from the laws.
    pub fn growth_conditions(&self) -> GrowthConditions {
        growth_conditions(&self.offspring, &self.env)
    }

    /// Full velocity report: t_plus, gamma = 1 / Lambda'(t_plus), the walk
    /// speed bound, the classical cross-check when the environment is
    /// constant, and the growth conditions.
    pub fn velocity(&self) -> Result<VelocityReport> {
        let t_plus = self.solve_t_plus(1e-12)?;
        let lambda_prime_at_t_plus = self.lambda_prime(t_plus)?;
        let gamma = 1.0 / lambda_prime_at_t_plus;
        let rwre_speed = rwre_speed(&self.env)?;
        let biggins = if self.env.is_constant() {
            Some(biggins_gamma(self.offspring.mean(), self.env.omega_max())?)
        } else {
            None
        };
        let report = VelocityReport {
            t_plus,
            gamma,
            lambda_prime_at_t_plus,
            rwre_speed,
            biggins_gamma: biggins,
            conditions: self.growth_conditions(),
        };
        debug_assert!(report.t_plus > 0.0 && report.t_plus < self.t_max);
        debug_assert!(report.gamma > 0.0 && report.gamma < report.rwre_speed);
        debug_assert!((report.gamma * report.lambda_prime_at_t_plus - 1.0).abs() <= 1e-12);
        Ok(report)
    }
}

/// The four growth conditions for an arbitrary law pair, subcritical or not.
/// Outside the subcritical regime the log-mean and occupation conditions
/// fail by definition: some site's stayer process does not die fast enough.
pub fn growth_conditions(offspring: &OffspringLaw, env: &EnvironmentLaw) -> GrowthConditions {
    let m = offspring.mean();
    let subcritical_everywhere = m * env.omega_max() < 1.0;
    let positive_log_mean = subcritical_everywhere
        && matches!(
            env.expectation(|w| (m * (1.0 - w) / (1.0 - m * w)).ln()),
            Ok(v) if v > 0.0 && v.is_finite()
        );
    GrowthConditions {
        positive_log_mean,
        zero_interior: subcritical_everywhere,
        finite_mean_occupation: subcritical_everywhere,
        finite_second_moment: offspring.second_moment().is_finite(),
    }
}

/// Speed of the single random walker in the same environment,
/// 1 / E[1 / (1 - omega)]. A strict upper bound for gamma: branching only
/// slows the minimum down.
pub fn rwre_speed(env: &EnvironmentLaw) -> Result<f64> {
    Ok(1.0 / env.expectation(|w| 1.0 / (1.0 - w))?)
}

/// Velocity of the minimal position for a constant environment, via the
/// classical route: each child independently stays (probability p) or steps
/// right, so displacements are i.i.d. Bernoulli and the minimal-position
/// speed is the smallest a where the tilted growth index
///
/// ```text
/// mu(a) = m p / (1 - a) * [ (1 - p)(1 - a) / (p a) ]^a,   0 < a < 1 - p,
/// ```
///
/// reaches 1. mu is nondecreasing with mu(0+) = m p < 1 and mu(1 - p) = m,
/// so the crossing is unique; we bisect log mu.
pub fn biggins_gamma(m: f64, p: f64) -> Result<f64> {
    if !(m > 1.0) || !(p > 0.0 && p < 1.0) || !(m * p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "need m > 1, p in (0, 1), m p < 1; got m = {m}, p = {p}"
        )));
    }
    let log_mu = |a: f64| -> f64 {
        (m * p).ln() - (1.0 - a).ln()
            + a * (((1.0 - p) * (1.0 - a)).ln() - (p * a).ln())
    };
    let mut lo = 1e-15;
    let mut hi = 1.0 - p;
    debug_assert!(log_mu(lo) < 0.0 && log_mu(hi) > 0.0);
    for _ in 0..200 {
        if hi - lo < 1e-15 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if log_mu(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
