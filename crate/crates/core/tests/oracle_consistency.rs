//! Cross-checks between the exact small-case oracles and the simulators,
//! through the public API only. Unit tests pin each piece in isolation;
//! these insist the pieces agree with each other.

use brwre::oracle::{enumerate_minimal_distribution, mean_y, y_pgf_fixed_point};
use brwre::seed::{replica_rng, Stream};
use brwre::stats::{binomial_se, chi_square_gof, mean_and_se};
use brwre::{
    simulate_time_brw, simulate_tree, EnvironmentRealization, MinTrajectory, OffspringLaw, SiteGw,
};

fn minimum_histogram(
    law: &OffspringLaw,
    env: &EnvironmentRealization,
    n: u32,
    replicas: u32,
    master: u64,
) -> Vec<u64> {
    let mut rng = replica_rng(master, 0, Stream::Dynamics);
    let mut hist = vec![0u64; n as usize + 1];
    for _ in 0..replicas {
        let g = simulate_tree(law, env, &mut rng, n, 1 << 20).unwrap();
        let m = MinTrajectory::from_genealogy(&g).m(n).unwrap();
        hist[m as usize] += 1;
    }
    hist
}

#[test]
fn tree_minimum_law_matches_enumeration() {
    let doubling = OffspringLaw::binary();
    let mixed = OffspringLaw::from_pairs(&[(1, 0.25), (2, 0.5), (3, 0.25)]).unwrap();
    let configs: [(&OffspringLaw, Vec<f64>, u64); 3] = [
        (&doubling, vec![0.5, 0.5, 0.5], 41),
        (&doubling, vec![0.5, 0.25, 0.25], 42),
        (&mixed, vec![0.3, 0.3, 0.3], 43),
    ];
    for (law, omegas, master) in configs {
        let env = EnvironmentRealization::new(omegas);
        for n in 1..=2u32 {
            let exact = enumerate_minimal_distribution(law, &env, n).unwrap();
            let hist = minimum_histogram(law, &env, n, 20_000, master + 10 * n as u64);
            let result = chi_square_gof(&hist, &exact.dense(), 0.01).unwrap();
            assert!(
                result.pass,
                "minimum law mismatch at n={n}, master {master}: chi2 {} vs critical {}",
                result.statistic, result.critical
            );
        }
    }
}

#[test]
fn extinction_times_match_the_analytic_cdf() {
    let law = OffspringLaw::binary();
    let gw = SiteGw::new(&law, 0.25).unwrap();
    assert!((gw.extinction_cdf(1) - 0.5625).abs() < 1e-12);
    assert!((gw.extinction_cdf(2) - 0.793212890625).abs() < 1e-12);

    let replicas = 20_000usize;
    let mut rng = replica_rng(51, 0, Stream::Dynamics);
    let mut at_most = [0u64; 3];
    let mut times = Vec::with_capacity(replicas);
    for _ in 0..replicas {
        let t = match gw.sample_extinction_time(&mut rng, 10_000) {
            brwre::ExtinctionTime::Extinct(t) => t,
            brwre::ExtinctionTime::Censored => panic!("subcritical clan survived 10^4 steps"),
        };
        for (k, slot) in at_most.iter_mut().enumerate() {
            if t <= k as u32 + 1 {
                *slot += 1;
            }
        }
        times.push(t as f64);
    }
    for (k, slot) in at_most.iter().enumerate() {
        let exact = gw.extinction_cdf(k as u32 + 1);
        let got = *slot as f64 / replicas as f64;
        let tol = 3.5 * binomial_se(exact, replicas);
        assert!(
            (got - exact).abs() <= tol,
            "P(T <= {}): {got} vs {exact} (tol {tol})",
            k + 1
        );
    }
    let (mean, se) = mean_and_se(&times);
    let exact_mean = gw.mean_extinction_time(1e-12, 10_000);
    assert!(
        (mean - exact_mean).abs() <= 3.5 * se,
        "mean extinction time {mean} vs {exact_mean} (se {se})"
    );
}

#[test]
fn jump_law_moments_match_the_fixed_point() {
    let law = OffspringLaw::binary();
    let omega = 0.25;
    let env = EnvironmentRealization::constant(omega, 2);
    let exact_mean = mean_y(2.0, omega).unwrap();
    let exact_pgf = y_pgf_fixed_point(&law, omega, 0.5, 1e-14).unwrap();

    // The pgf derivative at 1 must reproduce the closed-form mean.
    let h = 1e-7f64;
    let fd = (1.0 - y_pgf_fixed_point(&law, omega, 1.0 - h, 1e-14).unwrap()) / h;
    assert!(
        (fd - exact_mean).abs() < 1e-4,
        "pgf slope at 1: {fd} vs {exact_mean}"
    );

    let replicas = 10_000usize;
    let mut rng = replica_rng(52, 0, Stream::Dynamics);
    let mut ys = Vec::with_capacity(replicas);
    let mut pgf_terms = Vec::with_capacity(replicas);
    for _ in 0..replicas {
        let tp = simulate_time_brw(&law, &env, &mut rng, 2, 1 << 24).unwrap();
        let y = tp.y(1) as f64;
        ys.push(y);
        pgf_terms.push(0.5f64.powf(y));
    }
    let (mean, se) = mean_and_se(&ys);
    assert!(
        (mean - exact_mean).abs() <= 3.5 * se,
        "mean jump count {mean} vs {exact_mean} (se {se})"
    );
    let (pgf, pgf_se) = mean_and_se(&pgf_terms);
    assert!(
        (pgf - exact_pgf).abs() <= 3.5 * pgf_se,
        "pgf at 1/2: {pgf} vs {exact_pgf} (se {pgf_se})"
    );
}
