//! Run reports: a text rendering with the classic section layout and a
//! machine-readable JSON document carrying the same numbers at full
//! precision.
//!
//! Given identical inputs and seed, the JSON rendering is byte-identical
//! across runs; nothing time- or environment-dependent is recorded.

use std::fmt::Write as _;

use serde::Serialize;

use crate::data::Dataset;
use crate::evidence::PriorConfig;
use crate::loglin::GeneratingClass;
use crate::pipeline::MossOutcome;
use crate::predict::CvReport;
use crate::search::SearchConfig;

#[derive(Debug, Clone, Serialize)]
pub struct LabelMapping {
    pub column: String,
    /// Original labels in code order.
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub alpha: f64,
    pub c: f64,
    pub c_prime: f64,
    pub q: f64,
    pub replicates: usize,
    pub max_vars: usize,
    pub conf_vars: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_path: Option<String>,
    pub n_rows: usize,
    pub n_columns: usize,
    pub dropped_rows: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub label_mappings: Vec<LabelMapping>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressionRow {
    pub formula: String,
    pub predictors: Vec<String>,
    pub log_marglik: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionRow {
    pub variable: String,
    pub post_inc_prob: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InteractionRow {
    pub formula: String,
    pub log_marglik: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Coefficient {
    pub term: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub formula: String,
    pub intercept: f64,
    pub coefficients: Vec<Coefficient>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CvDiag {
    pub acc: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub auc: f64,
}

/// Full run record; optional sections are present exactly when the
/// corresponding stage ran.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub top_regressions: Vec<RegressionRow>,
    pub post_inc_probs: Vec<InclusionRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interaction_models: Option<Vec<InteractionRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fits: Option<Vec<FitReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv_matrix: Option<[[u64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv_diag: Option<CvDiag>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// `[aff | snp1, snp2]`
pub fn regression_formula(data: &Dataset, predictors: &[usize]) -> String {
    let names: Vec<&str> = predictors
        .iter()
        .map(|&c| data.names()[c].as_str())
        .collect();
    format!(
        "[{} | {}]",
        data.names()[data.response_index()],
        names.join(", ")
    )
}

/// `[snp1,aff][snp2,aff]`
pub fn model_formula(data: &Dataset, model: &GeneratingClass) -> String {
    let mut out = String::new();
    for generator in model.generator_sets() {
        let names: Vec<&str> = generator.iter().map(|&c| data.names()[c].as_str()).collect();
        let _ = write!(out, "[{}]", names.join(","));
    }
    out
}

fn term_name(data: &Dataset, vars: &[usize], codes: &[u8]) -> String {
    vars.iter()
        .zip(codes)
        .map(|(&v, &code)| format!("{}{}", data.names()[v], code))
        .collect::<Vec<_>>()
        .join(":")
}

/// Assembles the report from a pipeline outcome.
pub fn build_run_report(
    data: &Dataset,
    prior: &PriorConfig,
    cfg: &SearchConfig,
    k: Option<usize>,
    data_path: Option<&str>,
    outcome: &MossOutcome,
) -> RunReport {
    let label_mappings = (0..data.n_columns())
        .filter(|&c| !data.label_map(c).is_empty())
        .map(|c| LabelMapping {
            column: data.names()[c].clone(),
            labels: data.label_map(c).to_vec(),
        })
        .collect();
    let provenance = Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        alpha: prior.alpha,
        c: cfg.c,
        c_prime: cfg.c_prime,
        q: cfg.q,
        replicates: cfg.replicates,
        max_vars: cfg.max_vars,
        conf_vars: cfg
            .conf_vars
            .iter()
            .map(|&c| data.names()[c].clone())
            .collect(),
        k,
        data_path: data_path.map(str::to_string),
        n_rows: data.n_rows(),
        n_columns: data.n_columns(),
        dropped_rows: data.dropped_rows(),
        label_mappings,
    };

    let top_regressions = outcome
        .stage1
        .regressions
        .iter()
        .map(|r| RegressionRow {
            formula: regression_formula(data, &r.predictors),
            predictors: r
                .predictors
                .iter()
                .map(|&c| data.names()[c].clone())
                .collect(),
            log_marglik: r.log_marglik.value(),
        })
        .collect();

    let mut post_inc_probs: Vec<InclusionRow> = outcome
        .inclusion_probs
        .iter()
        .map(|&(v, p)| InclusionRow {
            variable: data.names()[v].clone(),
            post_inc_prob: p,
        })
        .collect();
    post_inc_probs.sort_by(|a, b| {
        b.post_inc_prob
            .partial_cmp(&a.post_inc_prob)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.variable.cmp(&b.variable))
    });

    let interaction_models = outcome.analyses.as_ref().map(|analyses| {
        analyses
            .iter()
            .map(|a| InteractionRow {
                formula: model_formula(data, &a.best_model),
                log_marglik: a.model_score.value(),
            })
            .collect()
    });

    let fits = outcome.analyses.as_ref().map(|analyses| {
        analyses
            .iter()
            .map(|a| {
                let coefficients = a
                    .fitted
                    .terms
                    .iter()
                    .flat_map(|term| {
                        term.coefficients.iter().map(|(codes, value)| Coefficient {
                            term: term_name(data, &term.vars, codes),
                            value: *value,
                        })
                    })
                    .collect();
                FitReport {
                    formula: model_formula(data, &a.best_model),
                    intercept: a.fitted.intercept,
                    coefficients,
                }
            })
            .collect()
    });

    let cv_matrix = outcome.cv.as_ref().map(|cv: &CvReport| cv.confusion);
    let cv_diag = outcome.cv.as_ref().map(|cv| CvDiag {
        acc: cv.acc,
        tpr: cv.tpr,
        fpr: cv.fpr,
        auc: cv.auc,
    });

    RunReport {
        provenance,
        top_regressions,
        post_inc_probs,
        interaction_models,
        fits,
        cv_matrix,
        cv_diag,
        warnings: outcome.warnings.clone(),
    }
}

impl RunReport {
    /// Stable machine-readable rendering.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    /// Text rendering with the classic `$section` layout.
    pub fn to_text(&self) -> String {
        let mut out = String::new();

        let _ = writeln!(out, "$topRegressions");
        render_indexed_table(
            &mut out,
            "formula",
            "logMargLik",
            &self
                .top_regressions
                .iter()
                .map(|r| (r.formula.clone(), format!("{:.3}", r.log_marglik)))
                .collect::<Vec<_>>(),
        );

        let _ = writeln!(out, "\n$postIncProbs");
        render_indexed_table(
            &mut out,
            "variable",
            "postIncProb",
            &self
                .post_inc_probs
                .iter()
                .map(|r| (r.variable.clone(), format!("{:.4}", r.post_inc_prob)))
                .collect::<Vec<_>>(),
        );

        if let Some(models) = &self.interaction_models {
            let _ = writeln!(out, "\n$interactionModels");
            render_indexed_table(
                &mut out,
                "formula",
                "logMargLik",
                &models
                    .iter()
                    .map(|m| (m.formula.clone(), format!("{:.3}", m.log_marglik)))
                    .collect::<Vec<_>>(),
            );
        }

        if let Some(fits) = &self.fits {
            let _ = writeln!(out, "\n$fits");
            for (i, fit) in fits.iter().enumerate() {
                let _ = writeln!(out, "$fits[[{}]]\n", i + 1);
                let _ = writeln!(out, "Call:  \"{}\"\n", fit.formula);
                let _ = writeln!(out, "Coefficients:");
                let width = fit
                    .coefficients
                    .iter()
                    .map(|c| c.term.len())
                    .chain(std::iter::once("(Intercept)".len()))
                    .max()
                    .unwrap_or(0);
                let _ = writeln!(
                    out,
                    "  {:<width$}  {:>10.4}",
                    "(Intercept)",
                    fit.intercept,
                    width = width
                );
                for c in &fit.coefficients {
                    let _ = writeln!(
                        out,
                        "  {:<width$}  {:>10.4}",
                        c.term,
                        c.value,
                        width = width
                    );
                }
                if i + 1 < fits.len() {
                    let _ = writeln!(out);
                }
            }
        }

        if let Some(matrix) = &self.cv_matrix {
            let _ = writeln!(out, "\n$cvMatrix");
            let w = matrix
                .iter()
                .flatten()
                .map(|v| v.to_string().len())
                .max()
                .unwrap_or(1)
                .max(1);
            let _ = writeln!(out, "     decision");
            let _ = writeln!(out, "pheno {:>w$} {:>w$}", 0, 1, w = w);
            for (label, row) in matrix.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "    {} {:>w$} {:>w$}",
                    label,
                    row[0],
                    row[1],
                    w = w
                );
            }
        }

        if let Some(diag) = &self.cv_diag {
            let _ = writeln!(out, "\n$cvDiag");
            let _ = writeln!(out, "   acc  tpr  fpr  auc");
            let _ = writeln!(
                out,
                "1 {:.1} {:.1} {:.1} {:.1}",
                diag.acc, diag.tpr, diag.fpr, diag.auc
            );
        }

        if !self.warnings.is_empty() {
            let _ = writeln!(out, "\n$warnings");
            for (i, w) in self.warnings.iter().enumerate() {
                let _ = writeln!(out, "{} {}", i + 1, w);
            }
        }

        out
    }
}

fn render_indexed_table(out: &mut String, h1: &str, h2: &str, rows: &[(String, String)]) {
    let idx_w = rows.len().to_string().len();
    let w1 = rows
        .iter()
        .map(|(a, _)| a.len())
        .chain(std::iter::once(h1.len()))
        .max()
        .unwrap_or(0);
    let w2 = rows
        .iter()
        .map(|(_, b)| b.len())
        .chain(std::iter::once(h2.len()))
        .max()
        .unwrap_or(0);
    let _ = writeln!(
        out,
        "{:idx_w$} {:>w1$} {:>w2$}",
        "",
        h1,
        h2,
        idx_w = idx_w,
        w1 = w1,
        w2 = w2
    );
    for (i, (a, b)) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>idx_w$} {:>w1$} {:>w2$}",
            i + 1,
            a,
            b,
            idx_w = idx_w,
            w1 = w1,
            w2 = w2
        );
    }
}

/// TSV rendering of a moving-window scan.
pub fn window_tsv(result: &crate::window::WindowResult) -> String {
    let mut out = String::from("formula\tlogMargLik\n");
    for row in &result.rows {
        let _ = writeln!(out, "{}\t{:.6}", row.formula, row.log_marglik);
    }
    out
}

/// TSV rendering of the per-column recode decisions.
pub fn code_map_tsv(data: &Dataset, maps: &[Option<[u8; 3]>]) -> String {
    let mut out = String::from("column\tstatus\tmap\n");
    for (c, map) in maps.iter().enumerate() {
        match map {
            Some(m) => {
                let _ = writeln!(
                    out,
                    "{}\trecoded\t0->{};1->{};2->{}",
                    data.names()[c],
                    m[0],
                    m[1],
                    m[2]
                );
            }
            None => {
                let _ = writeln!(out, "{}\tunchanged\t", data.names()[c]);
            }
        }
    }
    out
}
