//! Small statistics toolbox for the test batteries: standard errors,
//! chi-square goodness-of-fit and homogeneity tests with bin pooling, and the
//! two-sample Kolmogorov-Smirnov test. Analytic quantities are compared at
//! fixed tolerances elsewhere; everything Monte Carlo goes through here.

use crate::error::{Error, Result};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Standard error of an empirical frequency with true probability `p` over
/// `n` trials.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Sample mean and its standard error (sample sd over sqrt n).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// log(e^a + e^b) without overflow; negative infinity encodes zero mass.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[derive(Debug, Clone, Copy)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub critical: f64,
    pub df: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

fn chi_square_critical(df: usize, alpha: f64) -> Result<f64> {
    if df == 0 {
        return Err(Error::InvalidInput("chi-square with zero df".into()));
    }
    let dist = ChiSquared::new(df as f64)
        .map_err(|e| Error::InvalidInput(format!("chi-square df {df}: {e}")))?;
    Ok(dist.inverse_cdf(1.0 - alpha))
}

/// Goodness of fit of observed bin counts against exact bin probabilities.
/// Adjacent bins are pooled until every expected count reaches 5, the usual
/// validity rule for the chi-square approximation.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64], alpha: f64) -> Result<ChiSquareResult> {
    if observed.len() != expected_probs.len() {
        return Err(Error::InvalidInput(
            "observed and expected lengths differ".into(),
        ));
    }
    let total_p: f64 = expected_probs.iter().sum();
    if (total_p - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "expected probabilities sum to {total_p}"
        )));
    }
    let n: u64 = observed.iter().sum();
    let mut pooled: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        acc_o += o as f64;
        acc_e += p * n as f64;
        if acc_e >= 5.0 {
            pooled.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 || acc_o > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc_o;
                last.1 += acc_e;
            }
            None => return Err(Error::InvalidInput("all expected counts below 5".into())),
        }
    }
    if pooled.len() < 2 {
        return Err(Error::InvalidInput(
            "fewer than two bins after pooling".into(),
        ));
    }
    let statistic: f64 = pooled
        .iter()
        .map(|&(o, e)| (o - e).powi(2) / e)
        .sum();
    let df = pooled.len() - 1;
    let critical = chi_square_critical(df, alpha)?;
    Ok(ChiSquareResult {
        statistic,
        critical,
        df,
        pass: statistic <= critical,
    })
}

/// Two-sample homogeneity chi-square on index-aligned count vectors. Bins are
/// pooled until the expected count under the pooled estimate reaches 5 in
/// both samples.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], alpha: f64) -> Result<ChiSquareResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput("count vectors differ in length".into()));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    let (na, nb) = (na as f64, nb as f64);
    let total = na + nb;
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut acc_a, mut acc_b) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        acc_a += x as f64;
        acc_b += y as f64;
        let combined = acc_a + acc_b;
        if combined * na / total >= 5.0 && combined * nb / total >= 5.0 {
            pooled.push((acc_a, acc_b));
            acc_a = 0.0;
            acc_b = 0.0;
        }
    }
    if acc_a > 0.0 || acc_b > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc_a;
                last.1 += acc_b;
            }
            None => return Err(Error::InvalidInput("all expected counts below 5".into())),
        }
    }
    if pooled.len() < 2 {
        return Err(Error::InvalidInput(
            "fewer than two bins after pooling".into(),
        ));
    }
    let mut statistic = 0.0;
    for &(x, y) in &pooled {
        let combined = x + y;
        let ea = combined * na / total;
        let eb = combined * nb / total;
        statistic += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let df = pooled.len() - 1;
    let critical = chi_square_critical(df, alpha)?;
    Ok(ChiSquareResult {
        statistic,
        critical,
        df,
        pass: statistic <= critical,
    })
}

/// Two-sample Kolmogorov-Smirnov test at level alpha, using the asymptotic
/// critical value c(alpha) * sqrt((n + m) / (n m)) with
/// c(alpha) = sqrt(-ln(alpha / 2) / 2). On integer-valued data the test is
/// conservative, which only makes the acceptance checks stricter to fail.
pub fn ks_two_sample(xs: &[f64], ys: &[f64], alpha: f64) -> Result<KsResult> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1)")));
    }
    let mut xs = xs.to_vec();
    let mut ys = ys.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(diff);
    }
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let critical = c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt();
    Ok(KsResult {
        statistic: d,
        critical,
        pass: d <= critical,
    })
}
