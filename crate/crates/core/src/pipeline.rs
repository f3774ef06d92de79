//! End-to-end orchestration of the two-stage search, fitting and
//! cross-validation.

use rayon::prelude::*;

use crate::data::{contingency_table, Dataset};
use crate::error::{Error, Result};
use crate::evidence::{LogEvidence, PriorConfig};
use crate::loglin::{fit_posterior_mode, FittedModel, GeneratingClass};
use crate::predict::{cross_validate, CvReport, SelectedComponent};
use crate::search::{moss_stage1, posterior_inclusion_probs, Regression, SearchConfig, Stage1Result};
use crate::stage2::moss_stage2;

/// Stage-2 and fitting output for one retained regression.
#[derive(Debug, Clone)]
pub struct RegressionAnalysis {
    pub regression: Regression,
    pub best_model: GeneratingClass,
    pub model_score: LogEvidence,
    pub fitted: FittedModel,
}

/// Everything a run produces; sections past stage 1 are present only when a
/// fold count was supplied.
#[derive(Debug, Clone)]
pub struct MossOutcome {
    pub stage1: Stage1Result,
    pub inclusion_probs: Vec<(usize, f64)>,
    pub analyses: Option<Vec<RegressionAnalysis>>,
    pub cv: Option<CvReport>,
    pub warnings: Vec<String>,
}

/// Runs stage 1 and, when `k` is given, stage 2, posterior-mode fitting and
/// k-fold cross-validation. Numerical failures on individual models are
/// reported as warnings; the run errors out only if every retained
/// regression loses its model.
pub fn run_moss_pipeline(
    data: &Dataset,
    prior: &PriorConfig,
    cfg: &SearchConfig,
    k: Option<usize>,
) -> Result<MossOutcome> {
    let stage1 = moss_stage1(data, prior, cfg)?;
    let inclusion_probs = posterior_inclusion_probs(&stage1.regressions)?;

    let Some(k) = k else {
        return Ok(MossOutcome {
            stage1,
            inclusion_probs,
            analyses: None,
            cv: None,
            warnings: Vec::new(),
        });
    };

    let response = data.response_index();
    let mut warnings = Vec::new();
    let results: Vec<std::result::Result<RegressionAnalysis, String>> = stage1
        .regressions
        .par_iter()
        .enumerate()
        .map(|(idx, regression)| {
            let mut scope = regression.predictors.clone();
            scope.push(response);
            scope.sort_unstable();
            let run = || -> Result<RegressionAnalysis> {
                let table = contingency_table(data, &scope)?;
                let stage2_cfg = SearchConfig {
                    seed: cfg.seed.wrapping_add(idx as u64 + 1),
                    ..cfg.clone()
                };
                let found = moss_stage2(&table, prior, &stage2_cfg)?;
                let fitted = fit_posterior_mode(&table, &found.best, prior)?;
                Ok(RegressionAnalysis {
                    regression: regression.clone(),
                    best_model: found.best,
                    model_score: found.best_score,
                    fitted,
                })
            };
            run().map_err(|err| {
                format!(
                    "regression {:?}: {}",
                    regression.predictors, err
                )
            })
        })
        .collect();

    let mut analyses = Vec::new();
    for result in results {
        match result {
            Ok(a) => analyses.push(a),
            Err(w) => warnings.push(w),
        }
    }
    if analyses.is_empty() {
        return Err(Error::numerical(
            "stage 2 failed for every retained regression",
        ));
    }

    let selected: Vec<SelectedComponent> = analyses
        .iter()
        .map(|a| SelectedComponent {
            model: a.best_model.clone(),
            log_weight: a.regression.log_marglik.value(),
        })
        .collect();
    let (cv, cv_warnings) = cross_validate(data, &selected, prior, k, cfg.seed)?;
    warnings.extend(cv_warnings);

    Ok(MossOutcome {
        stage1,
        inclusion_probs,
        analyses: Some(analyses),
        cv: Some(cv),
        warnings,
    })
}
