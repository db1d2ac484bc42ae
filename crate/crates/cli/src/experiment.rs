//! Experiment orchestration: replica runs in parallel with deterministic
//! aggregation, summary statistics, CSV emission, and the drivers behind the
//! classify, velocity, transform and oracle-check subcommands.

use crate::config::{ConfigError, ExperimentConfig, Mode};
use brwre::environment::classify;
use brwre::oracle::{enumerate_minimal_distribution, mean_y, y_pgf_fixed_point};
use brwre::stats::{binomial_se, chi_square_gof, mean_and_se, median};
use brwre::velocity::growth_conditions;
use brwre::{
    extract, k_n_relation, replica_rng, rwre_speed, simulate_counts, simulate_time_brw,
    simulate_tree, EnvironmentRealization, Error as CoreError, ExtinctionTime, KnCheck,
    MinTrajectory, RateContext, SiteGw, Stream, TransformedProcess,
};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Top-level failure type for the binary. The variant decides the exit
/// code: configuration and input problems exit 2, broken internal
/// invariants exit 1 (failed verification checks are handled separately,
/// also as 1).
#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Run {
        replica: Option<u32>,
        source: CoreError,
    },
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Run { source, .. } => match source {
                CoreError::Internal(_) | CoreError::MalformedGenealogy(_) => 1,
                _ => 2,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Run {
                replica: Some(r),
                source,
            } => write!(f, "replica {r}: {source}"),
            CliError::Run {
                replica: None,
                source,
            } => write!(f, "{source}"),
            CliError::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<CoreError> for CliError {
    fn from(source: CoreError) -> Self {
        CliError::Run {
            replica: None,
            source,
        }
    }
}

/// One replica's minimal positions at the configured checkpoints, plus
/// count-mode saturation diagnostics.
#[derive(Debug, Clone)]
pub struct ReplicaOutcome {
    pub replica: u32,
    /// (checkpoint n, M_n) pairs in checkpoint order.
    pub at_checkpoints: Vec<(u32, u32)>,
    /// Saturated sites in the final occupancy (count mode; 0 in tree mode).
    pub saturated_sites: usize,
}

/// Run all replicas of a configured experiment. Replicas execute in
/// parallel but the result vector is ordered by replica index and every
/// replica's randomness comes from its own hashed seed, so the output is
/// identical across thread counts.
pub fn run_replicas(cfg: &ExperimentConfig) -> Result<Vec<ReplicaOutcome>, CliError> {
    let law = cfg.offspring_law()?;
    let env_law = cfg.environment_law()?;
    let n = cfg.run.n;
    let checkpoints = cfg.checkpoints();
    let env_len = n as usize + 1;
    let quenched_env = if cfg.run.quenched {
        let mut rng = replica_rng(cfg.env_seed(), 0, Stream::Environment);
        Some(env_law.sample_realization(env_len, &mut rng))
    } else {
        None
    };
    let results: Vec<Result<ReplicaOutcome, (u32, CoreError)>> = (0..cfg.run.replicas)
        .into_par_iter()
        .map(|rep| {
            let env = match &quenched_env {
                Some(e) => e.clone(),
                None => {
                    let mut rng = replica_rng(cfg.env_seed(), rep as u64, Stream::Environment);
                    env_law.sample_realization(env_len, &mut rng)
                }
            };
            let mut rng = replica_rng(cfg.run.seed, rep as u64, Stream::Dynamics);
            let (traj, saturated) = match cfg.run.mode {
                Mode::Tree => {
                    let g = simulate_tree(&law, &env, &mut rng, n, cfg.run.population_cap)
                        .map_err(|e| (rep, e))?;
                    (MinTrajectory::from_genealogy(&g), 0)
                }
                Mode::Counts => {
                    let run = simulate_counts(&law, &env, &mut rng, n, cfg.run.threshold)
                        .map_err(|e| (rep, e))?;
                    let sat = run.final_state.num_saturated();
                    (run.minima, sat)
                }
            };
            let at_checkpoints = checkpoints
                .iter()
                .map(|&cp| (cp, traj.m(cp).expect("checkpoints lie within the horizon")))
                .collect();
            Ok(ReplicaOutcome {
                replica: rep,
                at_checkpoints,
                saturated_sites: saturated,
            })
        })
        .collect();
    let mut outcomes = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err((replica, source)) => {
                return Err(CliError::Run {
                    replica: Some(replica),
                    source,
                })
            }
        }
    }
    Ok(outcomes)
}

/// Write the per-replica minimal-position table: one row per (replica,
/// checkpoint), schema `replica,n,M_n,ratio`.
pub fn write_ratio_csv(path: &Path, outcomes: &[ReplicaOutcome]) -> Result<(), CliError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e: std::io::Error| CliError::Io(format!("writing {}: {e}", path.display()));
    writeln!(w, "replica,n,M_n,ratio").map_err(io)?;
    for o in outcomes {
        for &(n, m) in &o.at_checkpoints {
            writeln!(w, "{},{},{},{}", o.replica, n, m, m as f64 / n as f64).map_err(io)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckpointSummary {
    pub n: u32,
    pub mean_ratio: f64,
    pub median_ratio: f64,
    pub se_ratio: f64,
    /// |mean ratio - gamma|, present when the regime is subcritical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSummary {
    pub regime: String,
    pub atom_at_one_over_m: bool,
    /// Solver velocity, present when the regime is subcritical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub replicas: u32,
    pub quenched: bool,
    /// Fraction of replicas whose minimum never moved between the first and
    /// last checkpoints.
    pub stabilized_fraction: f64,
    /// Replicas whose final occupancy still holds saturated sites.
    pub saturated_replicas: u32,
    pub checkpoints: Vec<CheckpointSummary>,
}

impl ConvergenceSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "regime={}", self.regime);
        let _ = writeln!(s, "atom_at_one_over_m={}", self.atom_at_one_over_m);
        if let Some(g) = self.gamma {
            let _ = writeln!(s, "gamma={g}");
        }
        let _ = writeln!(s, "replicas={}", self.replicas);
        let _ = writeln!(s, "quenched={}", self.quenched);
        let _ = writeln!(s, "stabilized_fraction={}", self.stabilized_fraction);
        let _ = writeln!(s, "saturated_replicas={}", self.saturated_replicas);
        for c in &self.checkpoints {
            let _ = write!(
                s,
                "checkpoint n={} mean={} median={} se={}",
                c.n, c.mean_ratio, c.median_ratio, c.se_ratio
            );
            if let Some(gap) = c.gamma_gap {
                let _ = write!(s, " gamma_gap={gap}");
            }
            let _ = writeln!(s);
        }
        s
    }
}

/// Run the replicas and reduce them to per-checkpoint statistics of M_n/n,
/// with the solver velocity alongside when the regime admits one.
pub fn run_convergence(
    cfg: &ExperimentConfig,
) -> Result<(ConvergenceSummary, Vec<ReplicaOutcome>), CliError> {
    let law = cfg.offspring_law()?;
    let env_law = cfg.environment_law()?;
    let regime = classify(&env_law, &law);
    let gamma = if regime.kind == brwre::RegimeKind::Subcritical {
        let ctx = RateContext::new(law, env_law)?;
        Some(ctx.velocity()?.gamma)
    } else {
        None
    };
    let outcomes = run_replicas(cfg)?;
    let n_checkpoints = cfg.checkpoints().len();
    let mut checkpoints = Vec::with_capacity(n_checkpoints);
    for i in 0..n_checkpoints {
        let n = outcomes[0].at_checkpoints[i].0;
        let ratios: Vec<f64> = outcomes
            .iter()
            .map(|o| o.at_checkpoints[i].1 as f64 / n as f64)
            .collect();
        let (mean_ratio, se_ratio) = mean_and_se(&ratios);
        checkpoints.push(CheckpointSummary {
            n,
            mean_ratio,
            median_ratio: median(&ratios),
            se_ratio,
            gamma_gap: gamma.map(|g| (mean_ratio - g).abs()),
        });
    }
    let stabilized = outcomes
        .iter()
        .filter(|o| {
            o.at_checkpoints.first().map(|&(_, m)| m) == o.at_checkpoints.last().map(|&(_, m)| m)
        })
        .count();
    let summary = ConvergenceSummary {
        regime: regime.kind.to_string(),
        atom_at_one_over_m: regime.mass_at_one_over_m,
        gamma,
        replicas: cfg.run.replicas,
        quenched: cfg.run.quenched,
        stabilized_fraction: stabilized as f64 / outcomes.len() as f64,
        saturated_replicas: outcomes.iter().filter(|o| o.saturated_sites > 0).count() as u32,
        checkpoints,
    };
    Ok((summary, outcomes))
}

/// Human-readable classification: a headline in the regime's own terms,
/// then the numbers the comparison runs on. The bool says whether the
/// configured regime expectation (if any) was met.
pub fn classify_report(cfg: &ExperimentConfig) -> Result<(String, bool), CliError> {
    let law = cfg.offspring_law()?;
    let env_law = cfg.environment_law()?;
    let regime = classify(&env_law, &law);
    let headline = match regime.kind {
        brwre::RegimeKind::Supercritical => "Supercritical".to_string(),
        brwre::RegimeKind::Critical => {
            format!("Critical, atom at 1/m: {}", regime.mass_at_one_over_m)
        }
        brwre::RegimeKind::Subcritical => {
            let ctx = RateContext::new(law.clone(), env_law.clone())?;
            format!("Subcritical, gamma={}", ctx.velocity()?.gamma)
        }
    };
    let mut text = headline;
    text.push('\n');
    let _ = writeln!(text, "regime={}", regime.kind);
    let _ = writeln!(text, "omega_max={}", env_law.omega_max());
    let _ = writeln!(text, "one_over_m={}", 1.0 / law.mean());
    let _ = writeln!(text, "atom_at_one_over_m={}", regime.mass_at_one_over_m);
    let ok = cfg
        .run
        .expect_regime
        .map(|e| e.matches(regime.kind))
        .unwrap_or(true);
    if !ok {
        let _ = writeln!(
            text,
            "expectation FAILED: configured {:?}, classified {}",
            cfg.run.expect_regime.expect("checked above"),
            regime.kind
        );
    }
    Ok((text, ok))
}

/// Everything the velocity subcommand prints. Outside the subcritical
/// regime the minimum has no linear drift, so gamma is 0 and the solver
/// internals (t_plus, lambda_prime) are not applicable.
#[derive(Debug, Clone, Serialize)]
pub struct VelocitySummary {
    pub regime: String,
    pub t_plus: Option<f64>,
    pub gamma: f64,
    pub lambda_prime: Option<f64>,
    pub rwre_speed: f64,
    pub biggins_gamma: Option<f64>,
    pub cond1: bool,
    pub cond2: bool,
    pub cond3: bool,
    pub cond4: bool,
}

pub fn velocity_summary(cfg: &ExperimentConfig) -> Result<VelocitySummary, CliError> {
    let law = cfg.offspring_law()?;
    let env_law = cfg.environment_law()?;
    let regime = classify(&env_law, &law);
    let conds = growth_conditions(&law, &env_law);
    if regime.kind == brwre::RegimeKind::Subcritical {
        let ctx = RateContext::new(law, env_law)?;
        let rep = ctx.velocity()?;
        Ok(VelocitySummary {
            regime: regime.kind.to_string(),
            t_plus: Some(rep.t_plus),
            gamma: rep.gamma,
            lambda_prime: Some(rep.lambda_prime_at_t_plus),
            rwre_speed: rep.rwre_speed,
            biggins_gamma: rep.biggins_gamma,
            cond1: rep.conditions.positive_log_mean,
            cond2: rep.conditions.zero_interior,
            cond3: rep.conditions.finite_mean_occupation,
            cond4: rep.conditions.finite_second_moment,
        })
    } else {
        Ok(VelocitySummary {
            regime: regime.kind.to_string(),
            t_plus: None,
            gamma: 0.0,
            lambda_prime: None,
            rwre_speed: rwre_speed(&env_law)?,
            biggins_gamma: None,
            cond1: conds.positive_log_mean,
            cond2: conds.zero_interior,
            cond3: conds.finite_mean_occupation,
            cond4: conds.finite_second_moment,
        })
    }
}

impl VelocitySummary {
    /// Flat key=value block; inapplicable numbers print as `nan`, an
    /// inapplicable cross-check as `none`.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("nan".to_string(), |x| x.to_string());
        let mut s = String::new();
        let _ = writeln!(s, "regime={}", self.regime);
        let _ = writeln!(s, "t_plus={}", opt(self.t_plus));
        let _ = writeln!(s, "gamma={}", self.gamma);
        let _ = writeln!(s, "lambda_prime={}", opt(self.lambda_prime));
        let _ = writeln!(s, "rwre_speed={}", self.rwre_speed);
        let _ = writeln!(
            s,
            "biggins_gamma={}",
            self.biggins_gamma
                .map_or("none".to_string(), |x| x.to_string())
        );
        let _ = writeln!(s, "cond1={}", self.cond1);
        let _ = writeln!(s, "cond2={}", self.cond2);
        let _ = writeln!(s, "cond3={}", self.cond3);
        let _ = writeln!(s, "cond4={}", self.cond4);
        s
    }
}

/// One tree-mode genealogy run through the location-to-time transformation,
/// with the sandwich identity checked at every checkpoint.
pub struct TransformOutcome {
    pub process: TransformedProcess,
    pub minima: MinTrajectory,
    pub checks: Vec<KnCheck>,
}

pub fn run_transform(cfg: &ExperimentConfig) -> Result<TransformOutcome, CliError> {
    let law = cfg.offspring_law()?;
    let env_law = cfg.environment_law()?;
    let n = cfg.run.n;
    let mut erng = replica_rng(cfg.env_seed(), 0, Stream::Environment);
    let env = env_law.sample_realization(n as usize + 1, &mut erng);
    let mut rng = replica_rng(cfg.run.seed, 0, Stream::Dynamics);
    let g = simulate_tree(&law, &env, &mut rng, n, cfg.run.population_cap)?;
    let process = extract(&g)?;
    let minima = MinTrajectory::from_genealogy(&g);
    let checks = cfg
        .checkpoints()
        .iter()
        .map(|&cp| k_n_relation(&process, &minima, cp))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TransformOutcome {
        process,
        minima,
        checks,
    })
}

/// Write the per-site jump table, schema `site,Y,L,tau_first,tau_last`.
pub fn write_transform_csv(path: &Path, tp: &TransformedProcess) -> Result<(), CliError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e: std::io::Error| CliError::Io(format!("writing {}: {e}", path.display()));
    writeln!(w, "site,Y,L,tau_first,tau_last").map_err(io)?;
    for j in 1..=tp.max_site() {
        if tp.y(j) == 0 {
            continue;
        }
        let l = tp.l(j).expect("nonempty site");
        let tau_first = tp.tau_first(j).expect("nonempty site");
        writeln!(w, "{},{},{},{},{}", j, tp.y(j), l, tau_first, l).map_err(io)?;
    }
    Ok(())
}

fn check_line(out: &mut String, all_pass: &mut bool, pass: bool, name: &str, detail: &str) {
    *all_pass &= pass;
    let _ = writeln!(
        out,
        "{} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

/// Cross-check the simulators against the exact references: the enumerated
/// minimal-position law against tree-mode Monte Carlo, the stayer
/// extinction CDF against its sampler, and the jump-count mean and
/// generating function against direct transformed-process simulation.
/// Returns the report and whether every line passed.
pub fn oracle_check(cfg: &ExperimentConfig) -> Result<(String, bool), CliError> {
    let law = cfg.offspring_law()?;
    let env_law = cfg.environment_law()?;
    let mut out = String::new();
    let mut all = true;

    // Minimal-position law at n = 1 and 2: enumeration vs tree Monte Carlo.
    let mut erng = replica_rng(cfg.env_seed(), 0, Stream::Environment);
    let env = env_law.sample_realization(3, &mut erng);
    for n in [1u32, 2] {
        let exact = enumerate_minimal_distribution(&law, &env, n)?;
        let probs = exact.dense();
        let reps = 20_000u32;
        let mut rng = replica_rng(cfg.run.seed, 100 + n as u64, Stream::Dynamics);
        let mut observed = vec![0u64; probs.len()];
        for _ in 0..reps {
            let g = simulate_tree(&law, &env, &mut rng, n, 1 << 22)?;
            observed[g.minimal_position(n)? as usize] += 1;
        }
        let r = chi_square_gof(&observed, &probs, 0.01)?;
        check_line(
            &mut out,
            &mut all,
            r.pass,
            &format!("minimal-law n={n}"),
            &format!(
                "chi-square {:.3} vs critical {:.3} (df {})",
                r.statistic, r.critical, r.df
            ),
        );
    }

    // Stayer extinction CDF per support point.
    for (i, &w) in env_law.support().iter().enumerate() {
        let name = format!("extinction-cdf omega={w}");
        if law.mean() * w > 1.0 + 1e-9 {
            let _ = writeln!(
                out,
                "SKIP {name}: stayer process is supercritical, extinction is not certain"
            );
            continue;
        }
        let gw = SiteGw::new(&law, w)?;
        let exact = [gw.extinction_cdf(1), gw.extinction_cdf(2)];
        let samples = 10_000usize;
        let mut rng = replica_rng(cfg.run.seed, 200 + i as u64, Stream::Dynamics);
        let mut hits = [0u32; 2];
        for _ in 0..samples {
            if let ExtinctionTime::Extinct(t) = gw.sample_extinction_time(&mut rng, 10_000) {
                if t <= 1 {
                    hits[0] += 1;
                }
                if t <= 2 {
                    hits[1] += 1;
                }
            }
        }
        let mut pass = true;
        let mut detail = String::new();
        for k in 0..2 {
            let freq = hits[k] as f64 / samples as f64;
            let tol = 3.5 * binomial_se(exact[k], samples);
            pass &= (freq - exact[k]).abs() <= tol;
            let _ = write!(
                detail,
                "P(T<={}) {:.4} vs {:.4} (tol {:.4}) ",
                k + 1,
                freq,
                exact[k],
                tol
            );
        }
        check_line(&mut out, &mut all, pass, &name, detail.trim_end());
    }

    // Jump-count mean and generating function per strictly subcritical
    // support point: direct transformed-process simulation vs closed form
    // and fixed point.
    for (i, &w) in env_law.support().iter().enumerate() {
        let name = format!("jump-count omega={w}");
        if law.mean() * w >= 1.0 {
            let _ = writeln!(
                out,
                "SKIP {name}: m * omega >= 1, the jump count is not integrable"
            );
            continue;
        }
        let env1 = EnvironmentRealization::constant(w, 1);
        let samples = 5_000usize;
        let mut rng = replica_rng(cfg.run.seed, 300 + i as u64, Stream::Dynamics);
        let mut ys = Vec::with_capacity(samples);
        let mut pgf_vals = Vec::with_capacity(samples);
        for _ in 0..samples {
            let tp = simulate_time_brw(&law, &env1, &mut rng, 1, 1 << 24)?;
            let y = tp.y(1);
            ys.push(y as f64);
            pgf_vals.push(0.5f64.powi(y.min(1 << 30) as i32));
        }
        let (mean, se) = mean_and_se(&ys);
        let expect_mean = mean_y(law.mean(), w)?;
        let mean_ok = (mean - expect_mean).abs() <= 3.5 * se;
        let (pgf_mean, pgf_se) = mean_and_se(&pgf_vals);
        let expect_pgf = y_pgf_fixed_point(&law, w, 0.5, 1e-12)?;
        let pgf_ok = (pgf_mean - expect_pgf).abs() <= 3.5 * pgf_se;
        check_line(
            &mut out,
            &mut all,
            mean_ok && pgf_ok,
            &name,
            &format!(
                "mean {mean:.4} vs {expect_mean:.4} (se {se:.4}); pgf(0.5) {pgf_mean:.4} vs {expect_pgf:.4} (se {pgf_se:.4})"
            ),
        );
    }

    Ok((out, all))
}
