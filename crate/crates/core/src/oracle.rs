//! Exact small-horizon references, computed by methods independent of the
//! simulators: brute-force enumeration over occupancy states for the law of
//! M_n at tiny n, and fixed-point iteration for the generating function of
//! the per-site jump count. These are the yardsticks the Monte Carlo engines
//! are tested against.

use crate::branching::OffspringLaw;
use crate::environment::EnvironmentRealization;
use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Hard ceiling on elementary enumeration operations before giving up.
const NODE_BUDGET: u64 = 10_000_000;

/// A finitely supported probability law on the nonnegative integers with
/// total mass checked at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    probs: BTreeMap<u32, f64>,
}

impl ExactDistribution {
    fn from_map(probs: BTreeMap<u32, f64>) -> Result<Self> {
        let total: f64 = probs.values().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Internal(format!(
                "enumerated masses sum to {total}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn prob(&self, k: u32) -> f64 {
        self.probs.get(&k).copied().unwrap_or(0.0)
    }

    /// Support points with their masses, in increasing order.
    pub fn entries(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.probs.iter().map(|(&k, &p)| (k, p))
    }

    pub fn max_support(&self) -> u32 {
        self.probs.keys().next_back().copied().unwrap_or(0)
    }

    /// Dense probability vector over 0..=max_support, zeros filled in,
    /// in the shape goodness-of-fit helpers expect.
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.max_support() as usize + 1];
        for (k, p) in self.entries() {
            out[k as usize] = p;
        }
        out
    }
}

fn binomial_coefficient(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Distribution of (stayers, movers) produced by a single particle: the
/// offspring count k with probability p_k, split binomially by the stay
/// probability.
fn one_particle_outcomes(offspring: &OffspringLaw, omega: f64) -> Vec<((u64, u64), f64)> {
    let mut out = Vec::new();
    for (k, &pk) in offspring.probs().iter().enumerate() {
        if pk == 0.0 {
            continue;
        }
        for s in 0..=k {
            let q = pk
                * binomial_coefficient(k, s)
                * omega.powi(s as i32)
                * (1.0 - omega).powi((k - s) as i32);
            out.push(((s as u64, (k - s) as u64), q));
        }
    }
    out
}

/// Exact (stayers, movers) law for c independent particles at one site:
/// the c-fold convolution of the one-particle law.
fn site_outcome_law(
    offspring: &OffspringLaw,
    omega: f64,
    c: u64,
    nodes: &mut u64,
) -> Result<BTreeMap<(u64, u64), f64>> {
    let one = one_particle_outcomes(offspring, omega);
    let mut acc: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    acc.insert((0, 0), 1.0);
    for _ in 0..c {
        let mut next: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for (&(s0, m0), &p0) in &acc {
            for &((s1, m1), p1) in &one {
                *nodes += 1;
                if *nodes > NODE_BUDGET {
                    return Err(Error::EnumerationTooLarge(format!(
                        "more than {NODE_BUDGET} elementary operations"
                    )));
                }
                *next.entry((s0 + s1, m0 + m1)).or_insert(0.0) += p0 * p1;
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// Exact law of the minimal position M_n by dynamic programming over full
/// occupancy states. Populations grow like m^n and the state space explodes
/// with them, so this is restricted to n <= 3 and additionally guarded by an
/// operation budget.
pub fn enumerate_minimal_distribution(
    offspring: &OffspringLaw,
    env_prefix: &EnvironmentRealization,
    n: u32,
) -> Result<ExactDistribution> {
    if n > 3 {
        return Err(Error::InvalidInput(format!(
            "exact enumeration is limited to n <= 3, got {n}"
        )));
    }
    if env_prefix.len() < n as usize {
        return Err(Error::InvalidInput(format!(
            "environment prefix of length {} cannot cover {n} steps",
            env_prefix.len()
        )));
    }
    let width = n as usize + 1;
    let mut init = vec![0u64; width];
    init[0] = 1;
    let mut states: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    states.insert(init, 1.0);
    let mut nodes = 0u64;
    for _ in 0..n {
        let mut next_states: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
        for (state, &p) in &states {
            // Build the joint next state site by site; sites act
            // independently given the current occupancy.
            let mut partials: Vec<(Vec<u64>, f64)> = vec![(vec![0u64; width], p)];
            for (site, &c) in state.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let law = site_outcome_law(offspring, env_prefix.omega(site), c, &mut nodes)?;
                let mut grown = Vec::with_capacity(partials.len() * law.len());
                for (base, bp) in &partials {
                    for (&(stay, mv), &q) in &law {
                        nodes += 1;
                        if nodes > NODE_BUDGET {
                            return Err(Error::EnumerationTooLarge(format!(
                                "more than {NODE_BUDGET} elementary operations"
                            )));
                        }
                        let mut s2 = base.clone();
                        s2[site] += stay;
                        s2[site + 1] += mv;
                        grown.push((s2, bp * q));
                    }
                }
                partials = grown;
            }
            for (s2, q) in partials {
                *next_states.entry(s2).or_insert(0.0) += q;
            }
        }
        states = next_states;
    }
    let mut out: BTreeMap<u32, f64> = BTreeMap::new();
    for (state, &p) in &states {
        let min = state
            .iter()
            .position(|&c| c > 0)
            .expect("no-death laws never lose the whole population") as u32;
        *out.entry(min).or_insert(0.0) += p;
    }
    ExactDistribution::from_map(out)
}

/// Generating function E[s^Y] of the total jump count out of one site
/// started from one particle, by iterating its fixed-point equation
/// f = phi(omega * f + (1 - omega) * s) from 0. The iteration is monotone
/// and converges to the smallest fixed point, which is the generating
/// function. Requires m * omega < 1 so that Y is integrable.
pub fn y_pgf_fixed_point(
    offspring: &OffspringLaw,
    omega: f64,
    s: f64,
    tol: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!(
            "generating functions are evaluated on [0, 1], got {s}"
        )));
    }
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::InvalidInput(format!(
            "stay probability {omega} outside (0, 1)"
        )));
    }
    if tol <= 0.0 || !tol.is_finite() {
        return Err(Error::InvalidInput(format!("bad tolerance {tol}")));
    }
    let load = offspring.mean() * omega;
    if load >= 1.0 {
        return Err(Error::Domain(format!(
            "stayer cascade has m * omega = {load} >= 1; the jump count is \
             not integrable"
        )));
    }
    let mut f = 0.0f64;
    for _ in 0..10_000_000 {
        let next = offspring.pgf(omega * f + (1.0 - omega) * s)?;
        if (next - f).abs() < tol {
            return Ok(next);
        }
        f = next;
    }
    Err(Error::Internal(
        "jump-count fixed point did not converge".into(),
    ))
}

/// Expected jump count out of one site from one starting particle: within
/// the site the expected stayer population after j rounds is (m*omega)^j,
/// and each round sends out m*(1-omega) jumpers per head, so
/// E[Y] = m(1-omega) / (1 - m*omega).
pub fn mean_y(m: f64, omega: f64) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidInput(format!("bad mean offspring {m}")));
    }
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::InvalidInput(format!(
            "stay probability {omega} outside (0, 1)"
        )));
    }
    if m * omega >= 1.0 {
        return Err(Error::Domain(format!(
            "m * omega = {} >= 1; the expected jump count diverges",
            m * omega
        )));
    }
    Ok(m * (1.0 - omega) / (1.0 - m * omega))
}
