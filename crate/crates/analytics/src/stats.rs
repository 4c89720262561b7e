//! Distribution functions, multiple-comparison correction, entropy,
//! chi-square and correlation.

use cef_core::bootstrap::{percentile_ci, Interval};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use crate::error::{AnalyticsError, Result};

pub use cef_core::bootstrap::{mean, DEFAULT_RESAMPLES, DEFAULT_SEED};

/// Sample standard deviation (n - 1 denominator).
pub fn sample_sd(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v)?;
    Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 })
}

fn check_df(name: &str, df: f64) -> Result<()> {
    if df.is_finite() && df >= 1.0 {
        Ok(())
    } else {
        Err(AnalyticsError::validation(name, format!("degrees of freedom must be >= 1, got {df}")))
    }
}

fn fisher(df1: f64, df2: f64) -> Result<FisherSnedecor> {
    check_df("df1", df1)?;
    check_df("df2", df2)?;
    FisherSnedecor::new(df1, df2).map_err(|e| AnalyticsError::validation("df", e.to_string()))
}

/// P(F <= x) for an F(df1, df2) variable.
pub fn f_cdf(x: f64, df1: f64, df2: f64) -> Result<f64> {
    let dist = fisher(df1, df2)?;
    if x.is_nan() || x < 0.0 {
        return Err(AnalyticsError::validation("x", format!("must be >= 0, got {x}")));
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    Ok(dist.cdf(x))
}

/// Upper tail P(F > x), the p-value of an F test.
pub fn f_sf(x: f64, df1: f64, df2: f64) -> Result<f64> {
    let dist = fisher(df1, df2)?;
    if x.is_nan() || x < 0.0 {
        return Err(AnalyticsError::validation("x", format!("must be >= 0, got {x}")));
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(dist.sf(x))
}

/// Holm step-down adjusted p-values, in input order.
pub fn holm_adjust(p: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(AnalyticsError::validation("p_values", format!("{bad} is outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((m - rank) as f64 * p[i]).min(1.0));
        out[i] = running;
    }
    Ok(out)
}

/// Shannon entropy of `counts` divided by ln k; categories beyond
/// `counts.len()` count as empty.
pub fn normalized_entropy(counts: &[f64], k: usize) -> Result<f64> {
    if k < 2 {
        return Err(AnalyticsError::validation("k", "needs at least 2 categories"));
    }
    if counts.len() > k {
        return Err(AnalyticsError::validation("counts", format!("{} counts for {k} categories", counts.len())));
    }
    if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(AnalyticsError::validation("counts", "must be finite and non-negative"));
    }
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(AnalyticsError::validation("counts", "all counts are zero"));
    }
    let h: f64 = counts
        .iter()
        .filter(|c| **c > 0.0)
        .map(|c| {
            let p = c / total;
            -p * p.ln()
        })
        .sum();
    Ok((h / (k as f64).ln()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expected {
    Counts(Vec<f64>),
    /// Rescaled to the observed total.
    Proportions(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub n: f64,
    pub p_value: f64,
}

fn chi_p(statistic: f64, df: usize) -> Result<f64> {
    let dist = ChiSquared::new(df as f64).map_err(|e| AnalyticsError::validation("df", e.to_string()))?;
    Ok(dist.sf(statistic))
}

/// Pearson goodness-of-fit statistic; df = cells - 1.
pub fn chi_square(observed: &[f64], expected: Expected) -> Result<ChiSquare> {
    if observed.len() < 2 {
        return Err(AnalyticsError::validation("observed", "needs at least 2 cells"));
    }
    let n: f64 = observed.iter().sum();
    let expected = match expected {
        Expected::Counts(e) => e,
        Expected::Proportions(p) => {
            let total: f64 = p.iter().sum();
            if total <= 0.0 {
                return Err(AnalyticsError::validation("expected", "proportions sum to zero"));
            }
            p.iter().map(|q| q / total * n).collect()
        }
    };
    if expected.len() != observed.len() {
        return Err(AnalyticsError::validation(
            "expected",
            format!("{} cells for {} observed", expected.len(), observed.len()),
        ));
    }
    if let Some(i) = expected.iter().position(|e| !(*e > 0.0)) {
        return Err(AnalyticsError::validation("expected", format!("cell {i} is not positive")));
    }
    let statistic = observed.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = observed.len() - 1;
    Ok(ChiSquare {
        statistic,
        df,
        n,
        p_value: chi_p(statistic, df)?,
    })
}

/// Test of independence on an r x c table; df = (r - 1)(c - 1).
pub fn chi_square_contingency(table: &[Vec<f64>]) -> Result<ChiSquare> {
    let r = table.len();
    let c = table.first().map_or(0, Vec::len);
    if r < 2 || c < 2 || table.iter().any(|row| row.len() != c) {
        return Err(AnalyticsError::validation("table", "needs a rectangular table of at least 2 x 2"));
    }
    let rows: Vec<f64> = table.iter().map(|row| row.iter().sum()).collect();
    let cols: Vec<f64> = (0..c).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    let n: f64 = rows.iter().sum();
    let mut statistic = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, o) in row.iter().enumerate() {
            let e = rows[i] * cols[j] / n;
            if !(e > 0.0) {
                return Err(AnalyticsError::validation("table", format!("expected count in cell ({i}, {j}) is zero")));
            }
            statistic += (o - e).powi(2) / e;
        }
    }
    let df = (r - 1) * (c - 1);
    Ok(ChiSquare {
        statistic,
        df,
        n,
        p_value: chi_p(statistic, df)?,
    })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(AnalyticsError::validation("y", "length differs from x"));
    }
    if x.len() < 3 {
        return Err(AnalyticsError::validation("points", "needs at least 3"));
    }
    let (mx, my) = (mean(x).unwrap_or(0.0), mean(y).unwrap_or(0.0));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalyticsError::Undefined("correlation of a constant series".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub n: usize,
    pub ci: Interval,
}

/// Pearson r with a percentile bootstrap CI over resampled points.
pub fn bootstrap_correlation(points: &[(f64, f64)], resamples: usize, rng_seed: u64) -> Result<Correlation> {
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let r = pearson(&x, &y)?;
    let ci = percentile_ci(
        points,
        |s| {
            let (a, b): (Vec<f64>, Vec<f64>) = s.iter().copied().unzip();
            pearson(&a, &b).ok()
        },
        resamples,
        0.95,
        rng_seed,
    )?;
    Ok(Correlation { r, n: points.len(), ci })
}

/// Correlation between trial number and the expert rank of the chosen
/// exercise (1 = expert choice). Negative r means choices improve.
pub fn rank_trend(points: &[(usize, usize)], resamples: usize, rng_seed: u64) -> Result<Correlation> {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(t, r)| (t as f64, r as f64)).collect();
    bootstrap_correlation(&pts, resamples, rng_seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub d: f64,
    pub se: f64,
    pub ci: Interval,
}

/// Cohen's d for a mean difference with its large-sample 95% interval.
pub fn cohens_d(diff: f64, pooled_sd: f64, n_a: usize, n_b: usize) -> Result<EffectSize> {
    if !(pooled_sd > 0.0) {
        return Err(AnalyticsError::Undefined("pooled SD is zero".into()));
    }
    if n_a < 2 || n_b < 2 {
        return Err(AnalyticsError::validation("n", "each group needs at least 2 records"));
    }
    let d = diff / pooled_sd;
    let (na, nb) = (n_a as f64, n_b as f64);
    let se = ((na + nb) / (na * nb) + d * d / (2.0 * (na + nb))).sqrt();
    Ok(EffectSize {
        d,
        se,
        ci: Interval {
            low: d - 1.96 * se,
            high: d + 1.96 * se,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn f_tails_are_complementary() {
        for x in [0.1, 1.0, 4.96, 20.0] {
            let (c, s) = (f_cdf(x, 3.0, 17.0).unwrap(), f_sf(x, 3.0, 17.0).unwrap());
            assert!((c + s - 1.0).abs() < 1e-12);
        }
        assert!(f_cdf(-1.0, 1.0, 1.0).is_err());
        assert!(f_cdf(1.0, 0.5, 1.0).is_err());
    }
}
