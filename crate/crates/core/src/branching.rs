//! Offspring laws and within-site ("stayer") Galton-Watson machinery.
//!
//! An `OffspringLaw` is a finite-support reproduction law with no death
//! (p_0 = 0) and supercritical mean m > 1. A `SiteGw` couples such a law with
//! a stay probability omega: each child of a particle at a site independently
//! remains there with probability omega, so the particles that never leave a
//! site form their own Galton-Watson process with generating function
//! h(s) = phi(omega*s + 1 - omega) and mean m*omega. Its extinction time T is
//! the number of generations a site stays occupied, the quantity that drives
//! how slowly the minimal position can advance.

use crate::error::{Error, Result};
use rand::distributions::Distribution;
use rand::Rng;
use rand_distr::Binomial;

/// Below this many parents, total offspring are drawn as literal independent
/// samples; above it, by exact multinomial splitting (identical law, O(K)
/// draws instead of O(c)).
const DIRECT_SUM_MAX: u64 = 64;

/// Finite-support offspring distribution with p_0 = 0 and p_1 < 1.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    probs: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    second_moment: f64,
}

impl OffspringLaw {
    /// Build from a dense vector where `probs[k]` is the probability of k
    /// children. Rejects anything that is not a genuinely branching law:
    /// death (p_0 > 0), degeneracy (p_1 = 1), bad normalization.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        let mut probs = probs;
        while probs.len() > 1 && probs.last() == Some(&0.0) {
            probs.pop();
        }
        if probs.is_empty() || probs.len() < 2 {
            return Err(Error::InvalidOffspring(
                "support must contain some k >= 1".into(),
            ));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p) || !p.is_finite()) {
            return Err(Error::InvalidOffspring(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        if probs[0] != 0.0 {
            return Err(Error::InvalidOffspring("p_0 must be 0 (no death)".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidOffspring(format!(
                "probabilities sum to {total}, expected 1 within 1e-12"
            )));
        }
        if probs.len() == 2 || probs[1] >= 1.0 - 1e-12 {
            return Err(Error::InvalidOffspring(
                "p_1 must be < 1 (law must actually branch)".into(),
            ));
        }
        let mean: f64 = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let second_moment: f64 = probs
            .iter()
            .enumerate()
            .map(|(k, p)| (k * k) as f64 * p)
            .sum();
        debug_assert!(mean > 1.0);
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        // Guard against the running sum landing at 0.999...9: the last bucket
        // must catch every uniform.
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Ok(Self {
            probs,
            cdf,
            mean,
            second_moment,
        })
    }

    /// Build from sparse `(k, p_k)` pairs, the config-file encoding.
    pub fn from_pairs(pairs: &[(u32, f64)]) -> Result<Self> {
        let max_k = pairs.iter().map(|&(k, _)| k).max().unwrap_or(0) as usize;
        let mut probs = vec![0.0; max_k + 1];
        for &(k, p) in pairs {
            if probs[k as usize] != 0.0 {
                return Err(Error::InvalidOffspring(format!("duplicate entry for k={k}")));
            }
            probs[k as usize] = p;
        }
        Self::from_probs(probs)
    }

    /// The deterministic-doubling law p_2 = 1.
    pub fn binary() -> Self {
        Self::from_probs(vec![0.0, 0.0, 1.0]).expect("binary law is valid")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_children(&self) -> u32 {
        (self.probs.len() - 1) as u32
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// Probability generating function E[s^Z] = sum p_k s^k on [0, 1].
    pub fn pgf(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("pgf argument {s} outside [0, 1]")));
        }
        // Horner form, highest degree first.
        let mut value = 0.0;
        for &p in self.probs.iter().rev() {
            value = value * s + p;
        }
        Ok(value)
    }

    /// One offspring count. Consumes exactly one uniform regardless of the
    /// outcome, so parallel runs that share a seed stay stream-aligned.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.gen();
        for (k, &c) in self.cdf.iter().enumerate() {
            if u < c {
                return k as u32;
            }
        }
        (self.cdf.len() - 1) as u32
    }

    /// Total children of `parents` independent individuals, exactly
    /// distributed as the sum of `parents` draws from this law. Small counts
    /// sum literal draws; large counts draw the multinomial type vector via
    /// sequential conditional binomials, which is the same distribution.
    pub fn sample_total_children<R: Rng + ?Sized>(&self, parents: u64, rng: &mut R) -> u64 {
        if parents == 0 {
            return 0;
        }
        if parents <= DIRECT_SUM_MAX {
            return (0..parents).map(|_| self.sample(rng) as u64).sum();
        }
        let mut total = 0u64;
        let mut remaining = parents;
        let mut mass_left = 1.0f64;
        let top = self.probs.len() - 1;
        for (k, &p) in self.probs.iter().enumerate().take(top) {
            if p == 0.0 || remaining == 0 {
                continue;
            }
            let ratio = (p / mass_left).clamp(0.0, 1.0);
            let n_k = Binomial::new(remaining, ratio)
                .expect("ratio clamped to [0, 1]")
                .sample(rng);
            total += k as u64 * n_k;
            remaining -= n_k;
            mass_left -= p;
        }
        total + top as u64 * remaining
    }
}

/// Outcome of watching a site's stayer process until it dies or a horizon
/// runs out. Censoring is a value, not an error: critical sites have
/// infinite-mean extinction times and trip the horizon by design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtinctionTime {
    Extinct(u32),
    Censored,
}

/// A site's within-site Galton-Watson law: offspring law plus stay
/// probability.
#[derive(Debug, Clone, Copy)]
pub struct SiteGw<'a> {
    law: &'a OffspringLaw,
    omega: f64,
}

impl<'a> SiteGw<'a> {
    pub fn new(law: &'a OffspringLaw, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::InvalidEnvironment(format!(
                "stay probability {omega} outside (0, 1)"
            )));
        }
        Ok(Self { law, omega })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Mean stayers per particle, m * omega. The stayer process is
    /// subcritical, critical or supercritical exactly as this is <, =, > 1.
    pub fn mean_stayers(&self) -> f64 {
        self.law.mean() * self.omega
    }

    /// Generating function of the number of stayers among one particle's
    /// children: h(s) = phi(omega*s + 1 - omega).
    pub fn stayer_pgf(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!(
                "stayer pgf argument {s} outside [0, 1]"
            )));
        }
        self.law.pgf(self.omega * s + 1.0 - self.omega)
    }

    /// P(T <= k): probability the stayer process started from one ancestor is
    /// gone within k generations. Exact pgf iteration q_i = h(q_{i-1}) from
    /// q_0 = 0; nondecreasing in k with limit the extinction probability.
    pub fn extinction_cdf(&self, k: u32) -> f64 {
        let mut q = 0.0;
        for _ in 0..k {
            q = self
                .stayer_pgf(q)
                .expect("iteration stays inside [0, 1]");
        }
        q
    }

    /// Exact expected extinction time sum_{k>=0} P(T > k), truncated when the
    /// tail increment falls below `tail_tol` or after `max_terms` terms.
    /// Finite only for subcritical sites; the truncation keeps critical input
    /// from looping forever.
    pub fn mean_extinction_time(&self, tail_tol: f64, max_terms: u32) -> f64 {
        let mut q = 0.0;
        let mut total = 0.0;
        for _ in 0..max_terms {
            let tail = 1.0 - q;
            total += tail;
            if tail < tail_tol {
                break;
            }
            q = self.stayer_pgf(q).expect("iteration stays inside [0, 1]");
        }
        total
    }

    /// Simulate the stayer process from one ancestor until the first empty
    /// generation; returns that generation index T >= 1, or `Censored` if the
    /// process is still alive at `horizon_cap`.
    pub fn sample_extinction_time<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        horizon_cap: u32,
    ) -> ExtinctionTime {
        let mut alive = 1u64;
        for generation in 1..=horizon_cap {
            let children = self.law.sample_total_children(alive, rng);
            alive = if children == 0 {
                0
            } else {
                Binomial::new(children, self.omega)
                    .expect("omega in (0, 1)")
                    .sample(rng)
            };
            if alive == 0 {
                return ExtinctionTime::Extinct(generation);
            }
        }
        ExtinctionTime::Censored
    }
}
