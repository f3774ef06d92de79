//! Exact log marginal likelihoods of saturated log-linear models and of
//! regressions under the conjugate prior with equal fictive cell counts.
//!
//! For a table with cell counts `n_c` and grand total `n`, the saturated
//! evidence is
//!
//! `log[ Gamma(alpha)/Gamma(alpha+n) * prod_c Gamma(alpha_c+n_c)/Gamma(alpha_c) ]`
//!
//! with `alpha_c = alpha / #cells`: the prior is the Dirichlet induced by an
//! equal-count fictive table with grand total `alpha`. An equal-count fictive
//! table marginalizes to an equal-count fictive table with the same grand
//! total, so every margin can be scored with the same rule. A regression
//! `Y | X_A` is the ratio of two saturated evidences (joint over `{Y} u A`
//! divided by the margin over `A`).

use serde::Serialize;

use crate::data::{contingency_table, ContingencyTable, Dataset};
use crate::error::{Error, Result};
use crate::math::ln_gamma;

/// Prior configuration: the grand total of the equal-count fictive table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriorConfig {
    pub alpha: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig { alpha: 1.0 }
    }
}

impl PriorConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::invalid(format!("alpha must be positive, got {}", alpha)));
        }
        Ok(PriorConfig { alpha })
    }
}

/// A log marginal likelihood on the natural-log scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogEvidence(pub f64);

impl LogEvidence {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Exact evidence of the saturated model on `table`.
pub fn log_marglik_saturated(table: &ContingencyTable, prior: &PriorConfig) -> LogEvidence {
    let alpha = prior.alpha;
    let cells = table.n_cells() as f64;
    let alpha_c = alpha / cells;
    let n = table.total() as f64;
    let mut value = ln_gamma(alpha) - ln_gamma(alpha + n);
    for &count in table.counts() {
        if count > 0 {
            value += ln_gamma(alpha_c + count as f64) - ln_gamma(alpha_c);
        }
    }
    LogEvidence(value)
}

/// Exact evidence of the regression `response | predictors`.
///
/// `predictors` may be empty, in which case the result is the saturated
/// evidence of the response margin alone.
pub fn log_marglik_regression(
    data: &Dataset,
    response: usize,
    predictors: &[usize],
    prior: &PriorConfig,
) -> Result<LogEvidence> {
    if predictors.contains(&response) {
        return Err(Error::invalid(format!(
            "response column {} cannot appear among its own predictors",
            response
        )));
    }
    if predictors.is_empty() {
        let table = contingency_table(data, &[response])?;
        return Ok(log_marglik_saturated(&table, prior));
    }
    let mut joint_vars: Vec<usize> = predictors.to_vec();
    joint_vars.push(response);
    joint_vars.sort_unstable();
    let joint = contingency_table(data, &joint_vars)?;
    let sorted_predictors: Vec<usize> = joint_vars
        .iter()
        .copied()
        .filter(|&v| v != response)
        .collect();
    let margin = joint.margin(&sorted_predictors)?;
    let value = log_marglik_saturated(&joint, prior).value()
        - log_marglik_saturated(&margin, prior).value();
    Ok(LogEvidence(value))
}

/// Evidence of `response | predictors` on the given table (which must hold
/// exactly the predictors plus the response). Used where the joint table is
/// already available, e.g. per cross-validation fold.
pub fn log_marglik_regression_from_table(
    joint: &ContingencyTable,
    response: usize,
    prior: &PriorConfig,
) -> Result<LogEvidence> {
    let predictors: Vec<usize> = joint
        .variables()
        .iter()
        .copied()
        .filter(|&v| v != response)
        .collect();
    if predictors.len() == joint.variables().len() {
        return Err(Error::invalid("response not present in table"));
    }
    if predictors.is_empty() {
        return Ok(log_marglik_saturated(joint, prior));
    }
    let margin = joint.margin(&predictors)?;
    Ok(LogEvidence(
        log_marglik_saturated(joint, prior).value()
            - log_marglik_saturated(&margin, prior).value(),
    ))
}
