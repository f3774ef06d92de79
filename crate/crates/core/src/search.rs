//! Mode-oriented stochastic search.
//!
//! The engine keeps a current list `S` of scored models, repeatedly samples
//! an unexplored member with probability proportional to its marginal
//! likelihood (softmax over log scores with max subtraction), scores its
//! whole neighborhood, always prunes below the `c'` fraction of the current
//! best and, with probability `q`, prunes below the `c` fraction. The loop
//! stops once every member of `S` is explored. Thresholds are relative to the
//! best score currently in `S`; the true global maximum is unknowable
//! mid-search.
//!
//! Stage 1 runs the engine over regression space (addition, deletion and
//! replacement moves on the predictor set), once per replicate with an
//! independent RNG stream, then merges the replicate lists, deduplicates and
//! re-prunes to `S(c)` of the global best.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;
use std::sync::RwLock;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::evidence::{log_marglik_regression, LogEvidence, PriorConfig};
use crate::math::splitmix64;

/// Tuning for both MOSS stages; defaults follow the reference settings.
#[derive(Debug, Clone, Serialize)]
pub struct SearchConfig {
    /// Retention fraction defining `S(c)`.
    pub c: f64,
    /// Harder elimination fraction, `0 < c' < c`.
    pub c_prime: f64,
    /// Probability of applying the `S(c)` prune after each exploration.
    pub q: f64,
    /// Number of independent stage-1 restarts merged into the result.
    pub replicates: usize,
    /// Maximum number of variables in a regression, response included.
    pub max_vars: usize,
    /// Columns forced into every regression.
    pub conf_vars: Vec<usize>,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            c: 0.1,
            c_prime: 1e-4,
            q: 0.1,
            replicates: 5,
            max_vars: 3,
            conf_vars: Vec::new(),
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::invalid(format!("c must lie in (0,1), got {}", self.c)));
        }
        if !(self.c_prime > 0.0 && self.c_prime < self.c) {
            return Err(Error::invalid(format!(
                "cPrime must satisfy 0 < cPrime < c, got cPrime {} and c {}",
                self.c_prime, self.c
            )));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::invalid(format!("q must lie in [0,1], got {}", self.q)));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be positive"));
        }
        if self.max_vars < 2 {
            return Err(Error::invalid(format!(
                "maxVars must be at least 2, got {}",
                self.max_vars
            )));
        }
        if self.conf_vars.len() > self.max_vars - 1 {
            return Err(Error::invalid(format!(
                "{} confounding variables exceed the predictor budget of {}",
                self.conf_vars.len(),
                self.max_vars - 1
            )));
        }
        Ok(())
    }
}

/// A scored regression: the response on a sorted predictor set.
#[derive(Debug, Clone, PartialEq)]
pub struct Regression {
    pub predictors: Vec<usize>,
    pub log_marglik: LogEvidence,
}

/// Outcome of the stage-1 search.
#[derive(Debug, Clone)]
pub struct Stage1Result {
    /// Retained regressions, best first, ties broken by predictor set.
    pub regressions: Vec<Regression>,
    /// Number of distinct predictor sets that were scored.
    pub models_scored: usize,
}

pub(crate) trait MossProblem: Sync {
    type Model: Clone + Eq + Hash + Ord + Send + Sync;

    fn neighbors(&self, model: &Self::Model) -> Vec<Self::Model>;

    /// `None` marks a numerical failure; the model is skipped, never scored.
    fn score(&self, model: &Self::Model) -> Option<f64>;
}

pub(crate) struct MossRun<M> {
    /// Final `S` with scores, in insertion order.
    pub retained: Vec<(M, f64)>,
    /// Models whose scoring failed.
    pub failures: Vec<M>,
}

struct Entry<M> {
    model: M,
    score: f64,
    explored: bool,
}

/// One run of the five-step search loop.
pub(crate) fn run_moss<P: MossProblem>(
    problem: &P,
    starts: Vec<P::Model>,
    c: f64,
    c_prime: f64,
    q: f64,
    rng: &mut ChaCha8Rng,
) -> MossRun<P::Model> {
    let ln_c = c.ln();
    let ln_c_prime = c_prime.ln();

    let mut entries: Vec<Entry<P::Model>> = Vec::new();
    let mut in_list: HashSet<P::Model> = HashSet::new();
    let mut explored: HashSet<P::Model> = HashSet::new();
    let mut memo: HashMap<P::Model, Option<f64>> = HashMap::new();
    let mut failures: Vec<P::Model> = Vec::new();

    let score_batch =
        |models: Vec<P::Model>, memo: &mut HashMap<P::Model, Option<f64>>| -> Vec<(P::Model, Option<f64>)> {
            let (known, unknown): (Vec<_>, Vec<_>) =
                models.into_iter().partition(|m| memo.contains_key(m));
            let mut out: Vec<(P::Model, Option<f64>)> = known
                .into_iter()
                .map(|m| {
                    let s = memo[&m];
                    (m, s)
                })
                .collect();
            let fresh: Vec<(P::Model, Option<f64>)> = unknown
                .into_par_iter()
                .map(|m| {
                    let s = problem.score(&m);
                    (m, s)
                })
                .collect();
            for (m, s) in fresh {
                memo.insert(m.clone(), s);
                out.push((m, s));
            }
            out
        };

    for (model, score) in score_batch(dedup(starts), &mut memo) {
        if in_list.contains(&model) {
            continue;
        }
        match score {
            Some(s) => {
                in_list.insert(model.clone());
                entries.push(Entry {
                    model,
                    score: s,
                    explored: false,
                });
            }
            None => failures.push(model),
        }
    }

    loop {
        let unexplored: Vec<usize> = entries
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.explored)
            .map(|(i, _)| i)
            .collect();
        if unexplored.is_empty() {
            break;
        }

        // Sample proportional to the marginal likelihood, normalized within
        // the unexplored list.
        let max = unexplored
            .iter()
            .map(|&i| entries[i].score)
            .fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = unexplored
            .iter()
            .map(|&i| (entries[i].score - max).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let mut draw = rng.random::<f64>() * total;
        let mut chosen = *unexplored.last().unwrap();
        for (&idx, &w) in unexplored.iter().zip(&weights) {
            draw -= w;
            if draw <= 0.0 {
                chosen = idx;
                break;
            }
        }

        entries[chosen].explored = true;
        explored.insert(entries[chosen].model.clone());

        let fresh: Vec<P::Model> = problem
            .neighbors(&entries[chosen].model)
            .into_iter()
            .filter(|m| !in_list.contains(m))
            .collect();
        for (model, score) in score_batch(dedup(fresh), &mut memo) {
            match score {
                Some(s) => {
                    in_list.insert(model.clone());
                    let seen = explored.contains(&model);
                    entries.push(Entry {
                        model,
                        score: s,
                        explored: seen,
                    });
                }
                None => failures.push(model),
            }
        }

        let best = entries.iter().map(|e| e.score).fold(f64::NEG_INFINITY, f64::max);
        let keep = best + ln_c_prime;
        prune(&mut entries, &mut in_list, keep);

        if q > 0.0 && rng.random::<f64>() < q {
            let keep = best + ln_c;
            prune(&mut entries, &mut in_list, keep);
        }
    }

    MossRun {
        retained: entries.into_iter().map(|e| (e.model, e.score)).collect(),
        failures,
    }
}

fn dedup<M: Eq + Hash + Clone>(models: Vec<M>) -> Vec<M> {
    let mut seen = HashSet::new();
    models
        .into_iter()
        .filter(|m| seen.insert(m.clone()))
        .collect()
}

fn prune<M: Eq + Hash + Clone>(
    entries: &mut Vec<Entry<M>>,
    in_list: &mut HashSet<M>,
    keep_at_least: f64,
) {
    entries.retain(|e| {
        if e.score >= keep_at_least {
            true
        } else {
            in_list.remove(&e.model);
            false
        }
    });
}

/// Addition, deletion and replacement moves on the predictor set.
///
/// Additions draw from the non-response columns outside `A` while the size
/// cap allows; deletions and replacements never touch confounding variables,
/// and deletions keep at least one predictor.
pub fn regression_neighborhood(
    predictors: &[usize],
    candidates: &[usize],
    cfg: &SearchConfig,
) -> Vec<Vec<usize>> {
    let max_predictors = cfg.max_vars - 1;
    let in_set = |v: usize| predictors.contains(&v);
    let outside: Vec<usize> = candidates.iter().copied().filter(|&v| !in_set(v)).collect();
    let removable: Vec<usize> = predictors
        .iter()
        .copied()
        .filter(|v| !cfg.conf_vars.contains(v))
        .collect();

    let mut out = Vec::new();
    if predictors.len() < max_predictors {
        for &v in &outside {
            let mut next = predictors.to_vec();
            next.push(v);
            next.sort_unstable();
            out.push(next);
        }
    }
    if predictors.len() > 1 {
        for &v in &removable {
            let next: Vec<usize> = predictors.iter().copied().filter(|&x| x != v).collect();
            out.push(next);
        }
    }
    for &v in &removable {
        for &w in &outside {
            let mut next: Vec<usize> = predictors.iter().copied().filter(|&x| x != v).collect();
            next.push(w);
            next.sort_unstable();
            out.push(next);
        }
    }
    dedup(out)
}

struct RegressionProblem<'a> {
    data: &'a Dataset,
    prior: &'a PriorConfig,
    cfg: &'a SearchConfig,
    candidates: Vec<usize>,
    response: usize,
    cache: RwLock<HashMap<Vec<usize>, f64>>,
}

impl MossProblem for RegressionProblem<'_> {
    type Model = Vec<usize>;

    fn neighbors(&self, model: &Vec<usize>) -> Vec<Vec<usize>> {
        regression_neighborhood(model, &self.candidates, self.cfg)
    }

    fn score(&self, model: &Vec<usize>) -> Option<f64> {
        if let Some(&s) = self.cache.read().unwrap().get(model) {
            return Some(s);
        }
        // Regression evidence is exact log-gamma arithmetic; it cannot fail
        // for a loaded dataset.
        let s = log_marglik_regression(self.data, self.response, model, self.prior)
            .expect("regression scoring")
            .value();
        self.cache.write().unwrap().insert(model.clone(), s);
        Some(s)
    }
}

/// Stage 1: MOSS over regression space.
///
/// Deterministic given `cfg.seed`: each replicate runs on its own RNG stream
/// and starts from the confounding variables plus one distinct (when
/// possible) random predictor; results are merged in replicate order.
pub fn moss_stage1(data: &Dataset, prior: &PriorConfig, cfg: &SearchConfig) -> Result<Stage1Result> {
    cfg.validate()?;
    let response = data.response_index();
    for &v in &cfg.conf_vars {
        if v >= data.n_columns() || v == response {
            return Err(Error::invalid(format!(
                "confounding variable index {} is not a predictor column",
                v
            )));
        }
    }
    let candidates: Vec<usize> = data
        .predictor_columns()
        .into_iter()
        .filter(|v| !cfg.conf_vars.contains(v))
        .collect();
    if candidates.is_empty() && cfg.conf_vars.is_empty() {
        return Err(Error::invalid("no candidate predictors"));
    }

    // Seed-derived shuffle so replicate starts are distinct when possible.
    let mut start_order = candidates.clone();
    let mut seed_rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed));
    start_order.shuffle(&mut seed_rng);

    let problem = RegressionProblem {
        data,
        prior,
        cfg,
        candidates: candidates.clone(),
        response,
        cache: RwLock::new(HashMap::new()),
    };

    let mut sorted_conf = cfg.conf_vars.clone();
    sorted_conf.sort_unstable();

    let runs: Vec<MossRun<Vec<usize>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ splitmix64(rep as u64 + 1)));
            let start = if sorted_conf.len() < cfg.max_vars - 1 && !start_order.is_empty() {
                let mut s = sorted_conf.clone();
                s.push(start_order[rep % start_order.len()]);
                s.sort_unstable();
                s
            } else {
                sorted_conf.clone()
            };
            run_moss(&problem, vec![start], cfg.c, cfg.c_prime, cfg.q, &mut rng)
        })
        .collect();

    // Union over replicates, dedup, re-prune to S(c) of the global best.
    let mut seen = HashSet::new();
    let mut pool: Vec<(Vec<usize>, f64)> = Vec::new();
    for run in runs {
        for (model, score) in run.retained {
            if seen.insert(model.clone()) {
                pool.push((model, score));
            }
        }
    }
    let models_scored = problem.cache.read().unwrap().len();
    if pool.is_empty() {
        return Err(Error::invalid("search retained no regressions"));
    }
    let best = pool.iter().map(|&(_, s)| s).fold(f64::NEG_INFINITY, f64::max);
    let keep = best + cfg.c.ln();
    pool.retain(|&(_, s)| s >= keep);
    pool.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });

    Ok(Stage1Result {
        regressions: pool
            .into_iter()
            .map(|(predictors, score)| Regression {
                predictors,
                log_marglik: LogEvidence(score),
            })
            .collect(),
        models_scored,
    })
}

/// Evidence-weighted inclusion probability per variable: the normalized sum
/// of `exp(score)` over the retained regressions containing it, computed with
/// max subtraction.
pub fn posterior_inclusion_probs(regressions: &[Regression]) -> Result<Vec<(usize, f64)>> {
    if regressions.is_empty() {
        return Err(Error::invalid("no regressions to normalize over"));
    }
    let scores: Vec<f64> = regressions.iter().map(|r| r.log_marglik.value()).collect();
    let z = crate::math::log_sum_exp(&scores);
    let mut probs: std::collections::BTreeMap<usize, f64> = Default::default();
    for (r, &s) in regressions.iter().zip(&scores) {
        let w = (s - z).exp();
        for &v in &r.predictors {
            *probs.entry(v).or_insert(0.0) += w;
        }
    }
    Ok(probs.into_iter().map(|(v, p)| (v, p.min(1.0))).collect())
}
