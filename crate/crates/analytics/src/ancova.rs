//! One-factor linear models fitted by the normal equations: ANCOVA with a
//! single covariate, and plain one-way ANOVA.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AnalyticsError, Result};
use crate::stats::{cohens_d, f_sf, holm_adjust, EffectSize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub group: String,
    pub outcome: f64,
    pub covariate: f64,
}

impl Observation {
    pub fn new(group: impl Into<String>, outcome: f64, covariate: f64) -> Self {
        Observation {
            group: group.into(),
            outcome,
            covariate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    /// (XᵀX)⁻¹; multiply by `mse` for the coefficient covariance.
    pub xtx_inv: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub sse: f64,
    pub df_resid: usize,
}

impl OlsFit {
    pub fn mse(&self) -> f64 {
        self.sse / self.df_resid as f64
    }

    /// Standard error of the linear combination cᵀβ.
    pub fn se_of(&self, c: &DVector<f64>) -> f64 {
        ((c.transpose() * &self.xtx_inv * c)[(0, 0)] * self.mse()).sqrt()
    }
}

/// Least squares via XᵀXβ = Xᵀy. Rank-deficient designs are rejected.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(AnalyticsError::validation("y", format!("{} outcomes for {n} rows", y.len())));
    }
    let rank = x.clone().svd(false, false).rank(1e-10 * x.norm().max(1.0));
    if rank < p {
        return Err(AnalyticsError::Singular { rank, params: p });
    }
    if n <= p {
        return Err(AnalyticsError::validation("rows", format!("{n} rows leave no residual degrees of freedom for {p} parameters")));
    }
    let xtx = x.transpose() * x;
    let chol = xtx.cholesky().ok_or(AnalyticsError::Singular { rank, params: p })?;
    let coefficients = chol.solve(&(x.transpose() * y));
    let xtx_inv = chol.inverse();
    let residuals = y - x * &coefficients;
    let sse = residuals.norm_squared();
    Ok(OlsFit {
        coefficients,
        xtx_inv,
        residuals,
        sse,
        df_resid: n - p,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub n: usize,
    pub raw_mean: f64,
    /// Fitted value at the grand-mean covariate (the raw mean for ANOVA).
    pub marginal_mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastResult {
    pub a: String,
    pub b: String,
    /// Marginal mean of `a` minus that of `b`.
    pub diff: f64,
    pub f_stat: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub p_value: f64,
    /// Holm-adjusted over the contrasts of one fit.
    pub p_holm: f64,
    /// `None` when the pooled residual SD is zero.
    pub effect: Option<EffectSize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncovaResult {
    pub groups: Vec<GroupSummary>,
    pub coefficients: Vec<Coefficient>,
    pub covariate_mean: Option<f64>,
    /// Omnibus test of the group factor.
    pub f_stat: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub p_value: f64,
    pub contrasts: Vec<ContrastResult>,
}

impl AncovaResult {
    pub fn group(&self, name: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.group == name)
    }

    pub fn contrast(&self, a: &str, b: &str) -> Option<&ContrastResult> {
        self.contrasts.iter().find(|c| c.a == a && c.b == b)
    }
}

/// num / den, where a denominator at rounding level relative to `scale`
/// (a perfect fit) gives 0 (no effect) or infinity.
fn degenerate_ratio(num: f64, den: f64, scale: f64) -> f64 {
    let eps = 1e-20 * scale.max(f64::MIN_POSITIVE);
    if den > eps {
        num / den
    } else if num > eps {
        f64::INFINITY
    } else {
        0.0
    }
}

struct Design {
    groups: Vec<String>,
    x: DMatrix<f64>,
    y: DVector<f64>,
    covariate_mean: Option<f64>,
}

fn design(obs: &[Observation], with_covariate: bool) -> Result<Design> {
    let mut by_group: BTreeMap<&str, usize> = BTreeMap::new();
    for o in obs {
        if !o.outcome.is_finite() || (with_covariate && !o.covariate.is_finite()) {
            return Err(AnalyticsError::validation("observations", format!("non-finite value in group {}", o.group)));
        }
        *by_group.entry(&o.group).or_default() += 1;
    }
    if by_group.len() < 2 {
        return Err(AnalyticsError::validation("groups", "needs at least 2 groups"));
    }
    if let Some((g, n)) = by_group.iter().find(|(_, n)| **n < 2) {
        return Err(AnalyticsError::validation("groups", format!("group {g} has {n} record(s), needs 2")));
    }
    let groups: Vec<String> = by_group.keys().map(|g| g.to_string()).collect();
    let covariate_mean = if with_covariate {
        let m = obs.iter().map(|o| o.covariate).sum::<f64>() / obs.len() as f64;
        if obs.iter().all(|o| o.covariate == obs[0].covariate) {
            return Err(AnalyticsError::validation("covariate", "has zero variance"));
        }
        Some(m)
    } else {
        None
    };
    let p = groups.len() + usize::from(with_covariate);
    let mut x = DMatrix::zeros(obs.len(), p);
    for (i, o) in obs.iter().enumerate() {
        x[(i, 0)] = 1.0;
        let gi = groups.iter().position(|g| *g == o.group).expect("group collected above");
        if gi > 0 {
            x[(i, gi)] = 1.0;
        }
        if with_covariate {
            x[(i, p - 1)] = o.covariate;
        }
    }
    Ok(Design {
        groups,
        x,
        y: DVector::from_iterator(obs.len(), obs.iter().map(|o| o.outcome)),
        covariate_mean,
    })
}

fn fit(obs: &[Observation], with_covariate: bool, contrasts: &[(String, String)]) -> Result<AncovaResult> {
    let d = design(obs, with_covariate)?;
    let full = ols(&d.x, &d.y)?;
    let p = d.x.ncols();
    let k = d.groups.len();

    // reduced model drops the group dummies
    let reduced_cols: Vec<usize> = std::iter::once(0).chain(with_covariate.then_some(p - 1)).collect();
    let reduced = ols(&d.x.select_columns(&reduced_cols), &d.y)?;
    let df_num = k - 1;
    let df_den = full.df_resid;
    let gain = (reduced.sse - full.sse).max(0.0);
    let scale = d.y.norm_squared() / d.y.len() as f64;
    let f_stat = degenerate_ratio(gain / df_num as f64, full.mse(), scale);
    let p_value = f_sf(f_stat, df_num as f64, df_den as f64)?;

    let selector = |gi: usize| {
        let mut c = DVector::zeros(p);
        c[0] = 1.0;
        if gi > 0 {
            c[gi] = 1.0;
        }
        if let Some(m) = d.covariate_mean {
            c[p - 1] = m;
        }
        c
    };
    let groups: Vec<GroupSummary> = d
        .groups
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let members: Vec<f64> = obs.iter().filter(|o| o.group == *g).map(|o| o.outcome).collect();
            let c = selector(gi);
            GroupSummary {
                group: g.clone(),
                n: members.len(),
                raw_mean: members.iter().sum::<f64>() / members.len() as f64,
                marginal_mean: (c.transpose() * &full.coefficients)[(0, 0)],
                se: full.se_of(&c),
            }
        })
        .collect();

    let mut terms: Vec<String> = vec!["intercept".into()];
    terms.extend(d.groups.iter().skip(1).map(|g| format!("group[{g}]")));
    if with_covariate {
        terms.push("covariate".into());
    }
    let coefficients = terms
        .into_iter()
        .enumerate()
        .map(|(j, term)| Coefficient {
            term,
            estimate: full.coefficients[j],
            se: (full.xtx_inv[(j, j)] * full.mse()).sqrt(),
        })
        .collect();

    let mut results = Vec::with_capacity(contrasts.len());
    for (a, b) in contrasts {
        let index = |name: &str| {
            d.groups
                .iter()
                .position(|g| g == name)
                .ok_or_else(|| AnalyticsError::validation("contrasts", format!("unknown group `{name}`")))
        };
        let (ia, ib) = (index(a)?, index(b)?);
        if ia == ib {
            return Err(AnalyticsError::validation("contrasts", format!("`{a}` compared with itself")));
        }
        let c = selector(ia) - selector(ib);
        let diff = (c.transpose() * &full.coefficients)[(0, 0)];
        let se = full.se_of(&c);
        let f = degenerate_ratio(diff * diff, se * se, scale);
        let (mut ss, mut na, mut nb) = (0.0, 0, 0);
        for (o, r) in obs.iter().zip(full.residuals.iter()) {
            if o.group == *a {
                na += 1;
            } else if o.group == *b {
                nb += 1;
            } else {
                continue;
            }
            ss += r * r;
        }
        let pooled_sd = (ss / (na + nb - 2) as f64).sqrt();
        results.push(ContrastResult {
            a: a.clone(),
            b: b.clone(),
            diff,
            f_stat: f,
            df_num: 1,
            df_den,
            p_value: f_sf(f, 1.0, df_den as f64)?,
            p_holm: f64::NAN,
            effect: cohens_d(diff, pooled_sd, na, nb).ok(),
        });
    }
    let adjusted = holm_adjust(&results.iter().map(|r| r.p_value).collect::<Vec<_>>())?;
    for (r, p) in results.iter_mut().zip(adjusted) {
        r.p_holm = p;
    }

    Ok(AncovaResult {
        groups,
        coefficients,
        covariate_mean: d.covariate_mean,
        f_stat,
        df_num,
        df_den,
        p_value,
        contrasts: results,
    })
}

/// outcome ~ intercept + group dummies + covariate. The first group in sort
/// order is the reference level.
pub fn ancova(obs: &[Observation], contrasts: &[(String, String)]) -> Result<AncovaResult> {
    fit(obs, true, contrasts)
}

/// outcome ~ intercept + group dummies; `covariate` is ignored.
pub fn anova(obs: &[Observation], contrasts: &[(String, String)]) -> Result<AncovaResult> {
    fit(obs, false, contrasts)
}
