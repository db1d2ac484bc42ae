//! Forward simulation of the particle system on the nonnegative integers.
//!
//! Two engines with one law. Tree mode keeps every particle as a record with
//! parent, generation and position; it is exact and carries full lineage, but
//! populations grow like m^n, so it only reaches small horizons. Count mode
//! keeps one cell per site. A cell below the threshold C holds an exact
//! integer count whose offspring and stay/move splits are sampled exactly;
//! from C upward it switches to a deterministic mean-flow update carried in
//! log scale (population at horizon 2000 would overflow f64 linearly). All
//! movement is rightward, so saturated bulk cells can never contaminate the
//! exact left fringe, and the minimal position is read off exact cells.

use crate::branching::OffspringLaw;
use crate::environment::EnvironmentRealization;
use crate::error::{Error, Result};
use crate::stats::log_add_exp;
use rand::distributions::Distribution;
use rand::Rng;
use rand_distr::Binomial;

/// One particle in a fully resolved genealogy. The id of a particle is its
/// index in the records vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParticleRecord {
    pub parent: Option<u32>,
    pub generation: u32,
    pub position: u32,
}

/// Exact particle tree, generation by generation, with the environment it
/// was grown in.
#[derive(Debug, Clone)]
pub struct Genealogy {
    records: Vec<ParticleRecord>,
    gen_offsets: Vec<usize>,
    env: EnvironmentRealization,
}

impl Genealogy {
    /// Assemble a genealogy from explicit records, validating the tree
    /// structure: record 0 is the single root at site 0, records are grouped
    /// by generation in increasing order with no gaps, and every other
    /// record's parent lies in the previous generation. Displacements are
    /// deliberately not checked here, so downstream consumers can be tested
    /// against trees that violate them.
    pub fn from_records(
        records: Vec<ParticleRecord>,
        env: EnvironmentRealization,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::MalformedGenealogy(msg));
        match records.first() {
            Some(r) if r.parent.is_none() && r.generation == 0 && r.position == 0 => {}
            _ => return bad("record 0 must be a parentless root at site 0".into()),
        }
        let mut gen_offsets = vec![0usize];
        for (id, r) in records.iter().enumerate().skip(1) {
            let prev = records[id - 1].generation;
            if r.generation == prev + 1 {
                gen_offsets.push(id);
            } else if r.generation != prev {
                return bad(format!(
                    "record {id} at generation {} after generation {prev}",
                    r.generation
                ));
            }
            let Some(p) = r.parent else {
                return bad(format!("record {id} has no parent"));
            };
            let Some(parent) = records.get(p as usize) else {
                return bad(format!("record {id} points at missing parent {p}"));
            };
            if parent.generation + 1 != r.generation {
                return bad(format!(
                    "record {id} of generation {} has a parent of generation {}",
                    r.generation, parent.generation
                ));
            }
        }
        gen_offsets.push(records.len());
        Ok(Self {
            records,
            gen_offsets,
            env,
        })
    }

    pub fn records(&self) -> &[ParticleRecord] {
        &self.records
    }

    pub fn env(&self) -> &EnvironmentRealization {
        &self.env
    }

    /// Largest simulated generation index.
    pub fn horizon(&self) -> u32 {
        (self.gen_offsets.len() - 2) as u32
    }

    pub fn generation(&self, n: u32) -> Result<&[ParticleRecord]> {
        let n = n as usize;
        if n + 1 >= self.gen_offsets.len() {
            return Err(Error::InvalidInput(format!(
                "generation {n} beyond horizon {}",
                self.horizon()
            )));
        }
        Ok(&self.records[self.gen_offsets[n]..self.gen_offsets[n + 1]])
    }

    /// Population size of generation n.
    pub fn z(&self, n: u32) -> Result<u64> {
        Ok(self.generation(n)?.len() as u64)
    }

    /// Smallest occupied position at generation n.
    pub fn minimal_position(&self, n: u32) -> Result<u32> {
        Ok(self
            .generation(n)?
            .iter()
            .map(|r| r.position)
            .min()
            .expect("generations are never empty"))
    }

    /// Number of particles of generation n sitting at `site`.
    pub fn count_at(&self, n: u32, site: u32) -> Result<u64> {
        Ok(self
            .generation(n)?
            .iter()
            .filter(|r| r.position == site)
            .count() as u64)
    }
}

/// Grow a tree generation by generation until `stop(g, generation_g)` says
/// to keep generation g as the last one, erroring if the population passes
/// `population_cap` or the horizon passes `max_generations`. The per-particle
/// randomness contract is fixed: one uniform for the offspring count, then
/// one uniform per child for its stay/move decision. Runs sharing a seed
/// therefore stay aligned draw for draw even when environments differ, which
/// is what makes pathwise coupling comparisons meaningful.
pub fn simulate_tree_while<R, F>(
    offspring: &OffspringLaw,
    env: &EnvironmentRealization,
    rng: &mut R,
    mut stop: F,
    population_cap: u64,
    max_generations: u32,
) -> Result<Genealogy>
where
    R: Rng + ?Sized,
    F: FnMut(u32, &[ParticleRecord]) -> bool,
{
    if population_cap == 0 {
        return Err(Error::InvalidInput("population cap must be >= 1".into()));
    }
    let mut records = vec![ParticleRecord {
        parent: None,
        generation: 0,
        position: 0,
    }];
    let mut gen_offsets = vec![0usize, 1];
    let mut g = 0u32;
    loop {
        let gen_range = gen_offsets[g as usize]..gen_offsets[g as usize + 1];
        if stop(g, &records[gen_range.clone()]) {
            break;
        }
        if g >= max_generations {
            return Err(Error::InvalidInput(format!(
                "stop condition not reached within {max_generations} generations"
            )));
        }
        let mut next_count = 0u64;
        for parent_idx in gen_range {
            let pos = records[parent_idx].position as usize;
            if pos >= env.len() {
                return Err(Error::InvalidInput(format!(
                    "environment of length {} has no entry for occupied site {pos}",
                    env.len()
                )));
            }
            let omega = env.omega(pos);
            let k = offspring.sample(rng);
            next_count += k as u64;
            if next_count > population_cap {
                return Err(Error::CapExceeded {
                    generation: g + 1,
                    population: next_count,
                });
            }
            for _ in 0..k {
                let stays = rng.gen::<f64>() < omega;
                records.push(ParticleRecord {
                    parent: Some(parent_idx as u32),
                    generation: g + 1,
                    position: if stays { pos as u32 } else { pos as u32 + 1 },
                });
            }
        }
        gen_offsets.push(records.len());
        g += 1;
    }
    Ok(Genealogy {
        records,
        gen_offsets,
        env: env.clone(),
    })
}

/// Exact tree over a fixed horizon. The environment must cover every
/// reachable site, i.e. be longer than `n_steps`.
pub fn simulate_tree<R: Rng + ?Sized>(
    offspring: &OffspringLaw,
    env: &EnvironmentRealization,
    rng: &mut R,
    n_steps: u32,
    population_cap: u64,
) -> Result<Genealogy> {
    if env.len() <= n_steps as usize {
        return Err(Error::InvalidInput(format!(
            "environment length {} must exceed the horizon {n_steps}",
            env.len()
        )));
    }
    simulate_tree_while(
        offspring,
        env,
        rng,
        |g, _| g >= n_steps,
        population_cap,
        n_steps,
    )
}

/// The minimal-position path M_0, M_1, ..., M_n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinTrajectory {
    values: Vec<u32>,
}

impl MinTrajectory {
    /// Wrap an explicit path, checking the structural facts every genuine
    /// minimal-position path satisfies: starts at 0, never decreases, moves
    /// by at most one per step (hence M_n <= n).
    pub fn new(values: Vec<u32>) -> Result<Self> {
        if values.first() != Some(&0) {
            return Err(Error::InvalidInput("path must start at M_0 = 0".into()));
        }
        if !values.windows(2).all(|w| w[0] <= w[1] && w[1] <= w[0] + 1) {
            return Err(Error::InvalidInput(
                "path must be nondecreasing with unit steps".into(),
            ));
        }
        Ok(Self { values })
    }

    fn from_values(values: Vec<u32>) -> Self {
        debug_assert!(values.first() == Some(&0));
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1] && w[1] <= w[0] + 1));
        debug_assert!(values.iter().enumerate().all(|(n, &m)| m as usize <= n));
        Self { values }
    }

    pub fn from_genealogy(g: &Genealogy) -> Self {
        let values = (0..=g.horizon())
            .map(|n| g.minimal_position(n).expect("within horizon"))
            .collect();
        Self::from_values(values)
    }

    /// Largest n the trajectory covers.
    pub fn horizon(&self) -> u32 {
        (self.values.len() - 1) as u32
    }

    pub fn m(&self, n: u32) -> Result<u32> {
        self.values
            .get(n as usize)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("n = {n} beyond horizon {}", self.horizon())))
    }

    /// M_n / n.
    pub fn ratio(&self, n: u32) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidInput("ratio undefined at n = 0".into()));
        }
        Ok(self.m(n)? as f64 / n as f64)
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }
}

/// Occupancy of one site: exact integer below the threshold, natural-log
/// mass at or above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Count {
    Exact(u64),
    Saturated(f64),
}

impl Count {
    /// Occupancy as a real number (exp of the log for saturated cells).
    pub fn mass(&self) -> f64 {
        match *self {
            Count::Exact(c) => c as f64,
            Count::Saturated(l) => l.exp(),
        }
    }

    /// Natural log of the occupancy.
    pub fn log_mass(&self) -> f64 {
        match *self {
            Count::Exact(c) => (c as f64).ln(),
            Count::Saturated(l) => l,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cell {
    Empty,
    Exact(u64),
    Log(f64),
}

/// Snapshot of the count-mode occupancy at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteCountsState {
    pub step: u32,
    pub threshold: u64,
    entries: Vec<(u32, Count)>,
}

impl SiteCountsState {
    pub fn sites(&self) -> &[(u32, Count)] {
        &self.entries
    }

    pub fn count_at(&self, site: u32) -> Option<Count> {
        self.entries
            .iter()
            .find(|&&(s, _)| s == site)
            .map(|&(_, c)| c)
    }

    pub fn min_site(&self) -> u32 {
        self.entries.first().expect("occupancy never empty").0
    }

    pub fn max_site(&self) -> u32 {
        self.entries.last().expect("occupancy never empty").0
    }

    pub fn num_saturated(&self) -> usize {
        self.entries
            .iter()
            .filter(|(_, c)| matches!(c, Count::Saturated(_)))
            .count()
    }

    /// Total log-mass over all sites, the count-mode stand-in for log Z_n.
    pub fn total_log_mass(&self) -> f64 {
        self.entries
            .iter()
            .fold(f64::NEG_INFINITY, |acc, (_, c)| log_add_exp(acc, c.log_mass()))
    }
}

/// Stepper for the hybrid count-mode dynamics. Starts from one particle at
/// site 0 and advances one generation per `step` call.
pub struct CountWalk<'a> {
    offspring: &'a OffspringLaw,
    env: &'a EnvironmentRealization,
    threshold: u64,
    ln_demote: f64,
    step: u32,
    first: u32,
    cells: Vec<Cell>,
    minima: Vec<u32>,
    // Scratch buffers reused across steps.
    int_in: Vec<u64>,
    log_in: Vec<f64>,
}

impl<'a> CountWalk<'a> {
    pub fn new(
        offspring: &'a OffspringLaw,
        env: &'a EnvironmentRealization,
        threshold: u64,
    ) -> Result<Self> {
        if threshold < 2 {
            return Err(Error::InvalidInput(format!(
                "saturation threshold {threshold} must be >= 2"
            )));
        }
        Ok(Self {
            offspring,
            env,
            threshold,
            ln_demote: (threshold as f64 / 2.0).ln(),
            step: 0,
            first: 0,
            cells: vec![Cell::Exact(1)],
            minima: vec![0],
            int_in: Vec::new(),
            log_in: Vec::new(),
        })
    }

    pub fn step_index(&self) -> u32 {
        self.step
    }

    pub fn min_site(&self) -> u32 {
        self.first
    }

    pub fn minima(&self) -> &[u32] {
        &self.minima
    }

    pub fn into_min_trajectory(self) -> MinTrajectory {
        MinTrajectory::from_values(self.minima)
    }

    pub fn snapshot(&self) -> SiteCountsState {
        let entries = self
            .cells
            .iter()
            .enumerate()
            .filter_map(|(i, cell)| {
                let site = self.first + i as u32;
                match *cell {
                    Cell::Empty => None,
                    Cell::Exact(c) => Some((site, Count::Exact(c))),
                    Cell::Log(l) => Some((site, Count::Saturated(l))),
                }
            })
            .collect();
        SiteCountsState {
            step: self.step,
            threshold: self.threshold,
            entries,
        }
    }

    /// Advance one generation. Exact cells reproduce by sampling the total
    /// offspring and thinning stayers with a binomial draw; saturated cells
    /// flow deterministically, m*omega of their mass staying and m*(1-omega)
    /// moving right, in log scale.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let m = self.offspring.mean();
        let width = self.cells.len();
        self.int_in.clear();
        self.int_in.resize(width + 1, 0);
        self.log_in.clear();
        self.log_in.resize(width + 1, f64::NEG_INFINITY);

        for i in 0..width {
            let site = self.first as usize + i;
            match self.cells[i] {
                Cell::Empty => continue,
                Cell::Exact(c) => {
                    if site >= self.env.len() {
                        return Err(Error::InvalidInput(format!(
                            "environment of length {} has no entry for occupied site {site}",
                            self.env.len()
                        )));
                    }
                    let omega = self.env.omega(site);
                    let total = self.offspring.sample_total_children(c, rng);
                    debug_assert!(total >= c, "no-death law cannot shrink");
                    let stay = Binomial::new(total, omega)
                        .expect("omega in (0, 1)")
                        .sample(rng);
                    self.int_in[i] += stay;
                    self.int_in[i + 1] += total - stay;
                }
                Cell::Log(l) => {
                    if site >= self.env.len() {
                        return Err(Error::InvalidInput(format!(
                            "environment of length {} has no entry for occupied site {site}",
                            self.env.len()
                        )));
                    }
                    let omega = self.env.omega(site);
                    self.log_in[i] = log_add_exp(self.log_in[i], (m * omega).ln() + l);
                    self.log_in[i + 1] =
                        log_add_exp(self.log_in[i + 1], (m * (1.0 - omega)).ln() + l);
                }
            }
        }

        self.cells.clear();
        self.cells.reserve(width + 1);
        for i in 0..=width {
            let int_part = self.int_in[i];
            let log_part = self.log_in[i];
            let cell = if log_part == f64::NEG_INFINITY {
                if int_part == 0 {
                    Cell::Empty
                } else if int_part >= self.threshold {
                    Cell::Log((int_part as f64).ln())
                } else {
                    Cell::Exact(int_part)
                }
            } else {
                let total = if int_part == 0 {
                    log_part
                } else {
                    log_add_exp(log_part, (int_part as f64).ln())
                };
                if total < self.ln_demote {
                    // Saturated mass has decayed back under C/2: round it to
                    // an integer and resume exact sampling.
                    let rounded = total.exp().round() as u64;
                    if rounded == 0 {
                        Cell::Empty
                    } else {
                        Cell::Exact(rounded)
                    }
                } else {
                    Cell::Log(total)
                }
            };
            self.cells.push(cell);
        }

        let lead = self
            .cells
            .iter()
            .position(|c| !matches!(c, Cell::Empty))
            .ok_or_else(|| Error::Internal("all sites empty after a step".into()))?;
        let tail = self
            .cells
            .iter()
            .rposition(|c| !matches!(c, Cell::Empty))
            .expect("nonempty by the lead check");
        self.cells.truncate(tail + 1);
        self.cells.drain(..lead);
        self.first += lead as u32;
        self.step += 1;
        debug_assert!(*self.minima.last().expect("nonempty") <= self.first);
        self.minima.push(self.first);
        Ok(())
    }

    /// Run until `n_steps` generations have been simulated.
    pub fn advance_to<R: Rng + ?Sized>(&mut self, n_steps: u32, rng: &mut R) -> Result<()> {
        while self.step < n_steps {
            self.step(rng)?;
        }
        Ok(())
    }
}

/// Result of a full count-mode run: the minimal-position path and the final
/// occupancy. Intermediate states can be streamed through `CountWalk` when
/// needed; storing every step at horizon 1e4 would cost gigabytes.
#[derive(Debug, Clone)]
pub struct CountRun {
    pub minima: MinTrajectory,
    pub final_state: SiteCountsState,
}

/// Count-mode simulation over a fixed horizon; the environment must cover
/// every reachable site.
pub fn simulate_counts<R: Rng + ?Sized>(
    offspring: &OffspringLaw,
    env: &EnvironmentRealization,
    rng: &mut R,
    n_steps: u32,
    threshold: u64,
) -> Result<CountRun> {
    if env.len() <= n_steps as usize {
        return Err(Error::InvalidInput(format!(
            "environment length {} must exceed the horizon {n_steps}",
            env.len()
        )));
    }
    let mut walk = CountWalk::new(offspring, env, threshold)?;
    walk.advance_to(n_steps, rng)?;
    let final_state = walk.snapshot();
    Ok(CountRun {
        minima: walk.into_min_trajectory(),
        final_state,
    })
}
