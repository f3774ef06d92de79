//! Model-averaged classification and k-fold cross-validation.
//!
//! The classifier averages the response conditionals of the fitted
//! log-linear models, one per retained regression, with weights proportional
//! to the regression marginal likelihoods from stage 1. Cross-validation
//! keeps that structure fixed (models and weights come from the full-data
//! search) and refits only the log-linear parameters on each training fold;
//! the selection-leakage caveat that comes with reusing the full-data
//! structure is deliberate and documented.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{contingency_table_filtered, Dataset};
use crate::error::{Error, Result};
use crate::evidence::PriorConfig;
use crate::loglin::{fit_posterior_mode, FittedModel, GeneratingClass};
use crate::math::splitmix64;

/// One model-averaging component.
#[derive(Debug, Clone)]
pub struct ClassifierComponent {
    pub fitted: FittedModel,
    /// Normalized predictive weight.
    pub weight: f64,
    /// Predictor columns of the component, in scope order.
    pub predictors: Vec<usize>,
}

/// Weighted ensemble of fitted log-linear models sharing one response.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub components: Vec<ClassifierComponent>,
    pub response: usize,
}

impl Classifier {
    /// Builds the ensemble from fitted models and *unnormalized* log weights
    /// (the stage-1 regression scores). Weights are normalized here with max
    /// subtraction, so rescaling all of them by a constant changes nothing.
    pub fn from_fits(
        fits: Vec<FittedModel>,
        log_weights: &[f64],
        response: usize,
    ) -> Result<Classifier> {
        if fits.is_empty() || fits.len() != log_weights.len() {
            return Err(Error::invalid("classifier needs one weight per component"));
        }
        for fit in &fits {
            if !fit.model.scope().contains(&response) {
                return Err(Error::invalid(
                    "every component model must include the response",
                ));
            }
        }
        let weights = crate::math::softmax(log_weights);
        let components = fits
            .into_iter()
            .zip(weights)
            .map(|(fitted, weight)| {
                let predictors = fitted
                    .model
                    .scope()
                    .iter()
                    .copied()
                    .filter(|&v| v != response)
                    .collect();
                ClassifierComponent {
                    fitted,
                    weight,
                    predictors,
                }
            })
            .collect();
        Ok(Classifier {
            components,
            response,
        })
    }

    /// Probability of response = 1 for one subject row.
    ///
    /// `row` must supply a code for every predictor column used by any
    /// component. Each component contributes `p(x,1) / (p(x,0) + p(x,1))`
    /// from its fitted joint distribution; with a positive prior both cells
    /// carry positive mass, so the conditional is always defined.
    pub fn predict_response(&self, row: &dyn Fn(usize) -> u8) -> f64 {
        let mut prob = 0.0;
        for comp in &self.components {
            let scope = comp.fitted.model.scope();
            let mut codes: Vec<u8> = Vec::with_capacity(scope.len());
            for &v in scope {
                codes.push(if v == self.response { 0 } else { row(v) });
            }
            let resp_pos = scope.iter().position(|&v| v == self.response).unwrap();
            codes[resp_pos] = 0;
            let p0 = comp.fitted.cell_probs[comp.fitted.cell_index(&codes)];
            codes[resp_pos] = 1;
            let p1 = comp.fitted.cell_probs[comp.fitted.cell_index(&codes)];
            debug_assert!(p0 + p1 > 0.0);
            prob += comp.weight * (p1 / (p0 + p1));
        }
        prob
    }

    fn predict_dataset_row(&self, data: &Dataset, row: usize) -> f64 {
        self.predict_response(&|col| data.code(row, col))
    }
}

/// Cross-validation report: pooled confusion matrix and percentage metrics.
#[derive(Debug, Clone, Serialize)]
pub struct CvReport {
    /// `confusion[pheno][decision]`, accumulated over all folds.
    pub confusion: [[u64; 2]; 2],
    pub acc: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub auc: f64,
}

impl CvReport {
    fn from_parts(confusion: [[u64; 2]; 2], auc: f64) -> CvReport {
        let tn = confusion[0][0] as f64;
        let fp = confusion[0][1] as f64;
        let fn_ = confusion[1][0] as f64;
        let tp = confusion[1][1] as f64;
        let total = tn + fp + fn_ + tp;
        CvReport {
            confusion,
            acc: 100.0 * (tp + tn) / total,
            tpr: 100.0 * tp / (tp + fn_),
            fpr: 100.0 * fp / (fp + tn),
            auc,
        }
    }
}

/// Area under the ROC curve as a percentage, computed from midranks; equal to
/// the pairwise concordance statistic `(#concordant + 0.5 #tied) / (#pos #neg)`.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::invalid("scores and labels must align and be non-empty"));
    }
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("both labels must be present"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(std::cmp::Ordering::Equal));

    // Midranks over tied score runs; the rank sum of the positives yields the
    // Mann-Whitney statistic exactly, ties contributing one half each.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos as f64) * (n_pos as f64 + 1.0) / 2.0;
    Ok(u * 100.0 / (n_pos as f64 * n_neg as f64))
}

/// Stratified fold assignment: shuffles each class separately and deals
/// round-robin, so remainders spread evenly.
fn stratified_folds(labels: &[u8], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut fold = vec![0usize; labels.len()];
    for class in &mut by_class {
        class.shuffle(rng);
        for (pos, &row) in class.iter().enumerate() {
            fold[row] = pos % k;
        }
    }
    fold
}

/// Structure selected on the full data: a regression's predictors, its best
/// stage-2 model and the stage-1 log marginal likelihood used as weight.
#[derive(Debug, Clone)]
pub struct SelectedComponent {
    pub model: GeneratingClass,
    pub log_weight: f64,
}

/// K-fold cross-validation with per-fold refitting.
///
/// Folds are stratified by response. For every fold, each component model is
/// refit on the training rows at its posterior mode and the held-out rows are
/// scored by the ensemble; the decision threshold is 0.5 with ties classified
/// as 1. Components whose refit fails on a fold are dropped from that fold's
/// ensemble with a warning; the fold errors out only if every component
/// fails.
pub fn cross_validate(
    data: &Dataset,
    selected: &[SelectedComponent],
    prior: &PriorConfig,
    k: usize,
    seed: u64,
) -> Result<(CvReport, Vec<String>)> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {}", k)));
    }
    if selected.is_empty() {
        return Err(Error::invalid("no components to cross-validate"));
    }
    let response = data.response_index();
    let labels: Vec<u8> = data.column(response).to_vec();
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if k > n_pos.min(n_neg) {
        return Err(Error::invalid(format!(
            "k = {} exceeds the smaller class count {}",
            k,
            n_pos.min(n_neg)
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x6366_6f6c_6473));
    let fold_of = stratified_folds(&labels, k, &mut rng);

    let log_weights: Vec<f64> = selected.iter().map(|s| s.log_weight).collect();

    type FoldOutcome = (Vec<(usize, f64)>, Vec<String>);
    let fold_results: Vec<Result<FoldOutcome>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let train: Vec<usize> = (0..data.n_rows()).filter(|r| fold_of[*r] != fold).collect();
            let test: Vec<usize> = (0..data.n_rows()).filter(|r| fold_of[*r] == fold).collect();
            let train_labels_present = {
                let mut seen = [false; 2];
                for &r in &train {
                    seen[labels[r] as usize] = true;
                }
                seen[0] && seen[1]
            };
            if !train_labels_present {
                return Err(Error::invalid(format!(
                    "training fold {} contains a single response class",
                    fold
                )));
            }

            let mut warnings = Vec::new();
            let mut fits = Vec::new();
            let mut kept_weights = Vec::new();
            for (comp, &w) in selected.iter().zip(&log_weights) {
                let table =
                    contingency_table_filtered(data, comp.model.scope(), Some(&train))?;
                match fit_posterior_mode(&table, &comp.model, prior) {
                    Ok(fit) => {
                        fits.push(fit);
                        kept_weights.push(w);
                    }
                    Err(err) => warnings.push(format!(
                        "fold {}: refit failed for {:?}: {}",
                        fold,
                        comp.model.generator_sets(),
                        err
                    )),
                }
            }
            if fits.is_empty() {
                return Err(Error::numerical(format!(
                    "fold {}: every component failed to refit",
                    fold
                )));
            }
            let clf = Classifier::from_fits(fits, &kept_weights, response)?;
            let preds: Vec<(usize, f64)> = test
                .iter()
                .map(|&r| (r, clf.predict_dataset_row(data, r)))
                .collect();
            Ok((preds, warnings))
        })
        .collect();

    let mut confusion = [[0u64; 2]; 2];
    let mut pooled: Vec<(usize, f64)> = Vec::new();
    let mut warnings = Vec::new();
    for result in fold_results {
        let (preds, fold_warnings) = result?;
        warnings.extend(fold_warnings);
        pooled.extend(preds);
    }
    // Deterministic order regardless of fold parallelism.
    pooled.sort_by_key(|&(r, _)| r);
    let scores: Vec<f64> = pooled.iter().map(|&(_, p)| p).collect();
    let pooled_labels: Vec<u8> = pooled.iter().map(|&(r, _)| labels[r]).collect();
    for (&score, &label) in scores.iter().zip(&pooled_labels) {
        let decision = usize::from(score >= 0.5);
        confusion[label as usize][decision] += 1;
    }
    let auc = roc_auc(&scores, &pooled_labels)?;
    Ok((CvReport::from_parts(confusion, auc), warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::contingency_table;
    use crate::search::SearchConfig;
    use crate::stage2::moss_stage2;

    fn fit_on(data: &Dataset, scope: &[usize], terms: &[&[usize]], alpha: f64) -> FittedModel {
        let table = contingency_table(data, scope).unwrap();
        let model = GeneratingClass::from_terms(
            scope,
            &terms.iter().map(|t| t.to_vec()).collect::<Vec<_>>(),
        )
        .unwrap();
        fit_posterior_mode(&table, &model, &PriorConfig::new(alpha).unwrap()).unwrap()
    }

    fn biased_coin_data(p1: f64, n: usize) -> Dataset {
        let ones = (p1 * n as f64).round() as usize;
        let mut rows = Vec::new();
        for i in 0..n {
            let y = u8::from(i < ones);
            rows.push(vec![(i % 2) as u8, y]);
        }
        Dataset::from_rows(vec!["x".into(), "y".into()], vec![2, 2], &rows).unwrap()
    }

    #[test]
    fn independent_component_predicts_marginal_rate() {
        // Fit the independence model on data where y is 1 in 70% of rows.
        let data = biased_coin_data(0.7, 1000);
        let fit = fit_on(&data, &[0, 1], &[&[0], &[1]], 1e-6);
        let clf = Classifier::from_fits(vec![fit], &[0.0], 1).unwrap();
        for x in 0..2u8 {
            let p = clf.predict_response(&|_| x);
            assert!((p - 0.7).abs() < 1e-3, "x {}: {}", x, p);
        }
    }

    #[test]
    fn two_components_average() {
        let data_low = biased_coin_data(0.2, 1000);
        let data_high = biased_coin_data(0.8, 1000);
        let fit_low = fit_on(&data_low, &[0, 1], &[&[0], &[1]], 1e-6);
        let fit_high = fit_on(&data_high, &[0, 1], &[&[0], &[1]], 1e-6);
        let clf = Classifier::from_fits(vec![fit_low, fit_high], &[0.0, 0.0], 1).unwrap();
        let p = clf.predict_response(&|_| 0);
        assert!((p - 0.5).abs() < 1e-3, "{}", p);
    }

    #[test]
    fn weights_are_scale_invariant() {
        let data = biased_coin_data(0.3, 500);
        let fit_a = fit_on(&data, &[0, 1], &[&[0, 1]], 1.0);
        let fit_b = fit_on(&data, &[0, 1], &[&[0], &[1]], 1.0);
        let clf1 =
            Classifier::from_fits(vec![fit_a.clone(), fit_b.clone()], &[-10.0, -12.0], 1).unwrap();
        let clf2 = Classifier::from_fits(vec![fit_a, fit_b], &[-510.0, -512.0], 1).unwrap();
        let p1 = clf1.predict_response(&|_| 1);
        let p2 = clf2.predict_response(&|_| 1);
        assert!((p1 - p2).abs() < 1e-12);
    }

    #[test]
    fn deterministic_table_prediction_approaches_one_as_alpha_vanishes() {
        // y copies x exactly.
        let rows: Vec<Vec<u8>> = (0..200).map(|i| vec![(i % 2) as u8, (i % 2) as u8]).collect();
        let data = Dataset::from_rows(vec!["x".into(), "y".into()], vec![2, 2], &rows).unwrap();
        let fit = fit_on(&data, &[0, 1], &[&[0, 1]], 1e-6);
        let clf = Classifier::from_fits(vec![fit], &[0.0], 1).unwrap();
        let p = clf.predict_response(&|_| 1);
        assert!(p > 0.999, "{}", p);
        let p0 = clf.predict_response(&|_| 0);
        assert!(p0 < 0.001, "{}", p0);
    }

    #[test]
    fn roc_auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.3], &[1, 1, 0]).unwrap(), 100.0);
        assert_eq!(roc_auc(&[0.4, 0.4, 0.4, 0.4], &[1, 0, 1, 0]).unwrap(), 50.0);
        assert!(roc_auc(&[0.5, 0.6], &[1, 1]).is_err());
    }

    fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut concordant = 0u64;
        let mut tied = 0u64;
        let mut n_pos = 0u64;
        let mut n_neg = 0u64;
        for (i, (&si, &li)) in scores.iter().zip(labels).enumerate() {
            if li == 1 {
                n_pos += 1;
            } else {
                n_neg += 1;
            }
            for (&sj, &lj) in scores[..i].iter().zip(&labels[..i]) {
                let (pos, neg) = if li == 1 && lj == 0 {
                    (si, sj)
                } else if li == 0 && lj == 1 {
                    (sj, si)
                } else {
                    continue;
                };
                if pos > neg {
                    concordant += 1;
                } else if pos == neg {
                    tied += 1;
                }
            }
        }
        let u = concordant as f64 + 0.5 * tied as f64;
        u * 100.0 / (n_pos as f64 * n_neg as f64)
    }

    #[test]
    fn roc_auc_matches_brute_force_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..25 {
            let n = 120;
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..10) as f64) / 10.0)
                .collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2) as u8).collect();
            if labels.iter().all(|&l| l == 0) || labels.iter().all(|&l| l == 1) {
                continue;
            }
            let got = roc_auc(&scores, &labels).unwrap();
            let want = brute_force_auc(&scores, &labels);
            assert_eq!(got, want);
        }
    }

    fn separable_dataset(n: usize) -> Dataset {
        // y copies the first SNP's carrier status.
        let mut rows = Vec::new();
        for i in 0..n {
            let g = (i % 2) as u8;
            rows.push(vec![g, (i / 2 % 3) as u8, g]);
        }
        Dataset::from_rows(
            vec!["snp1".into(), "snp2".into(), "y".into()],
            vec![2, 3, 2],
            &rows,
        )
        .unwrap()
    }

    #[test]
    fn perfectly_separable_data_scores_perfectly() {
        let data = separable_dataset(200);
        let prior = PriorConfig::default();
        let table = contingency_table(&data, &[0, 2]).unwrap();
        let cfg = SearchConfig::default();
        let best = moss_stage2(&table, &prior, &cfg).unwrap().best;
        let selected = vec![SelectedComponent {
            model: best,
            log_weight: 0.0,
        }];
        let (report, warnings) = cross_validate(&data, &selected, &prior, 2, 1).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(report.acc, 100.0);
        assert_eq!(report.auc, 100.0);
        let total: u64 = report.confusion.iter().flatten().sum();
        assert_eq!(total, 200);
    }

    #[test]
    fn metric_identities_hold() {
        let data = separable_dataset(120);
        let prior = PriorConfig::default();
        let model = GeneratingClass::from_terms(&[0, 2], &[vec![0, 2]]).unwrap();
        let selected = vec![SelectedComponent {
            model,
            log_weight: 0.0,
        }];
        let (report, _) = cross_validate(&data, &selected, &prior, 3, 5).unwrap();
        let tn = report.confusion[0][0] as f64;
        let fp = report.confusion[0][1] as f64;
        let fn_ = report.confusion[1][0] as f64;
        let tp = report.confusion[1][1] as f64;
        assert!((report.acc - 100.0 * (tp + tn) / (tp + tn + fp + fn_)).abs() < 1e-12);
        assert!((report.tpr - 100.0 * tp / (tp + fn_)).abs() < 1e-12);
        assert!((report.fpr - 100.0 * fp / (fp + tn)).abs() < 1e-12);
    }

    #[test]
    fn oversized_k_is_rejected() {
        let data = separable_dataset(20); // 10 cases, 10 controls
        let prior = PriorConfig::default();
        let model = GeneratingClass::from_terms(&[0, 2], &[vec![0, 2]]).unwrap();
        let selected = vec![SelectedComponent {
            model,
            log_weight: 0.0,
        }];
        assert!(cross_validate(&data, &selected, &prior, 11, 0).is_err());
        assert!(cross_validate(&data, &selected, &prior, 1, 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // AUC is invariant under strictly monotone transforms of scores.
            #[test]
            fn auc_is_rank_statistic(
                scores in proptest::collection::vec(0.0f64..1.0, 20..60),
                labels in proptest::collection::vec(0u8..2, 20..60),
            ) {
                let n = scores.len().min(labels.len());
                let scores = &scores[..n];
                let labels = &labels[..n];
                prop_assume!(labels.contains(&0) && labels.contains(&1));
                let base = roc_auc(scores, labels).unwrap();
                let squashed: Vec<f64> = scores.iter().map(|&s| (3.0 * s).exp()).collect();
                let transformed = roc_auc(&squashed, labels).unwrap();
                prop_assert!((base - transformed).abs() < 1e-9);
            }
        }
    }
}
