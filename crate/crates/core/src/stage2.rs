//! Stage 2: MOSS over hierarchical log-linear model space, run once per
//! retained stage-1 regression.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::ContingencyTable;
use crate::error::{Error, Result};
use crate::evidence::{LogEvidence, PriorConfig};
use crate::loglin::{log_marglik_loglinear, model_neighborhood, GeneratingClass};
use crate::math::splitmix64;
use crate::search::{run_moss, MossProblem, SearchConfig};

/// Result of one model-space search.
#[derive(Debug, Clone)]
pub struct Stage2Result {
    /// Best model and its approximate evidence.
    pub best: GeneratingClass,
    pub best_score: LogEvidence,
    /// Retained `S(c)` list, best first.
    pub retained: Vec<(GeneratingClass, LogEvidence)>,
    /// Models skipped because their evidence evaluation failed.
    pub warnings: Vec<String>,
}

struct ModelProblem<'a> {
    table: &'a ContingencyTable,
    prior: &'a PriorConfig,
}

impl MossProblem for ModelProblem<'_> {
    type Model = GeneratingClass;

    fn neighbors(&self, model: &GeneratingClass) -> Vec<GeneratingClass> {
        model_neighborhood(model)
    }

    fn score(&self, model: &GeneratingClass) -> Option<f64> {
        log_marglik_loglinear(self.table, model, self.prior)
            .ok()
            .map(|e| e.value())
    }
}

/// Searches the hierarchical models over the table's variables, starting at
/// the main-effects model. Shares the pruning parameters (`c`, `c'`, `q`)
/// with stage 1; replicates do not apply here. Deterministic given
/// `cfg.seed`.
pub fn moss_stage2(
    table: &ContingencyTable,
    prior: &PriorConfig,
    cfg: &SearchConfig,
) -> Result<Stage2Result> {
    cfg.validate()?;
    let start = GeneratingClass::main_effects(table.variables())?;
    let problem = ModelProblem { table, prior };
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ 0x5747_4145_3253));
    let run = run_moss(&problem, vec![start], cfg.c, cfg.c_prime, cfg.q, &mut rng);

    let warnings: Vec<String> = run
        .failures
        .iter()
        .map(|m| format!("evidence evaluation failed for model {:?}", m.generator_sets()))
        .collect();
    if run.retained.is_empty() {
        return Err(Error::numerical(
            "all candidate log-linear models failed to score",
        ));
    }
    let mut retained = run.retained;
    retained.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    let (best, best_score) = retained[0].clone();
    Ok(Stage2Result {
        best,
        best_score: LogEvidence(best_score),
        retained: retained
            .into_iter()
            .map(|(m, s)| (m, LogEvidence(s)))
            .collect(),
        warnings,
    })
}
