//! Hierarchical log-linear models: generating classes, the
//! generator/dual-generator lattice, posterior-mode fitting and approximate
//! evidence.
//!
//! A hierarchical model on a variable set is described by its generating
//! class, the antichain of maximal interaction terms. Main effects are kept
//! for every in-scope variable, so generators always cover the scope and the
//! model floor is the main-effects model.
//!
//! # Parameterization
//!
//! Corner (treatment) coding with category 0 as baseline. The free
//! coefficients index the terms of the downward closure restricted to
//! all-nonzero category codes; the intercept is profiled out through the
//! multinomial normalization, which makes the penalized objective strictly
//! concave.
//!
//! # Evidence
//!
//! The conjugate prior density is proportional to
//! `exp(<s_m, theta> - alpha * kappa(theta))` where `kappa` is the
//! multinomial log-partition and `s_m` are the margins of the equal-count
//! fictive table. The marginal likelihood is the ratio of two integrals of
//! that form (posterior over prior normalizer). Each integral is evaluated by
//! a Laplace approximation at its own mode plus a per-cell Stirling
//! correction term `sum_c stirling_error(N * p_c) - stirling_error(N)`.
//! The correction makes the approximation exact for saturated models (where
//! the integral is a ratio of gamma functions) and substantially tightens it
//! elsewhere; a plain Laplace misses the exact saturated value by several
//! nats when the fictive cell counts are far below one.

use serde::Serialize;

use crate::data::ContingencyTable;
use crate::error::{Error, Result};
use crate::evidence::{LogEvidence, PriorConfig};
use crate::linalg::SymMatrix;
use crate::math::{ln_2pi, stirling_error};

const GRAD_TOL: f64 = 1e-8;
const MAX_NEWTON_ITERS: usize = 100;
const MAX_SCOPE: usize = 20;
const MAX_PARAMS: usize = 1024;
const MAX_MODEL_CELLS: usize = 1 << 20;

/// Antichain of maximal interaction terms over a variable scope.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GeneratingClass {
    /// Sorted column indices of the model's variables.
    scope: Vec<usize>,
    /// Generators as bitmasks over positions in `scope`; sorted, and an
    /// antichain whose union covers every variable.
    generators: Vec<u32>,
}

impl GeneratingClass {
    /// Main-effects-only model.
    pub fn main_effects(scope: &[usize]) -> Result<Self> {
        let scope = checked_scope(scope)?;
        let generators = (0..scope.len()).map(|i| 1u32 << i).collect();
        Ok(GeneratingClass { scope, generators })
    }

    /// Saturated model: a single generator holding every variable.
    pub fn saturated(scope: &[usize]) -> Result<Self> {
        let scope = checked_scope(scope)?;
        let full = full_mask(scope.len());
        Ok(GeneratingClass {
            scope,
            generators: vec![full],
        })
    }

    /// Builds a model from explicit term sets; the terms are reduced to
    /// their maximal elements and missing main effects are added.
    pub fn from_terms(scope: &[usize], terms: &[Vec<usize>]) -> Result<Self> {
        let scope = checked_scope(scope)?;
        let mut masks = Vec::new();
        for term in terms {
            let mut mask = 0u32;
            for v in term {
                let pos = scope
                    .iter()
                    .position(|s| s == v)
                    .ok_or_else(|| Error::invalid(format!("term variable {} not in scope", v)))?;
                mask |= 1 << pos;
            }
            if mask == 0 {
                return Err(Error::invalid("empty term"));
            }
            masks.push(mask);
        }
        for i in 0..scope.len() {
            masks.push(1 << i);
        }
        let generators = antichain(masks);
        Ok(GeneratingClass { scope, generators })
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn n_vars(&self) -> usize {
        self.scope.len()
    }

    pub fn is_saturated(&self) -> bool {
        self.generators == [full_mask(self.scope.len())]
    }

    /// Generators as sorted column-index sets, in deterministic order.
    pub fn generator_sets(&self) -> Vec<Vec<usize>> {
        self.generators
            .iter()
            .map(|&g| self.mask_to_vars(g))
            .collect()
    }

    fn mask_to_vars(&self, mask: u32) -> Vec<usize> {
        (0..self.scope.len())
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| self.scope[i])
            .collect()
    }

    /// True when `mask` (non-empty) lies in the downward closure.
    fn contains_term(&self, mask: u32) -> bool {
        mask != 0 && self.generators.iter().any(|&g| mask & !g == 0)
    }

    /// The downward closure: every non-empty subset of a generator, sorted.
    fn closure(&self) -> Vec<u32> {
        let full = full_mask(self.scope.len());
        let mut present = Vec::new();
        let mut mask = 1u32;
        while mask <= full {
            if self.contains_term(mask) {
                present.push(mask);
            }
            mask += 1;
        }
        present
    }

    fn dual_generator_masks(&self) -> Vec<u32> {
        let k = self.scope.len();
        let full = full_mask(k);
        let mut duals = Vec::new();
        let mut mask = 1u32;
        while mask <= full {
            if !self.contains_term(mask) {
                // Minimal absent: every one-smaller subset is present.
                let minimal = (0..k).all(|b| {
                    let bit = 1u32 << b;
                    mask & bit == 0 || {
                        let sub = mask & !bit;
                        sub == 0 || self.contains_term(sub)
                    }
                });
                if minimal {
                    duals.push(mask);
                }
            }
            mask += 1;
        }
        duals
    }

    /// Whether every variable of the scope appears in some generator.
    fn covers_scope(&self) -> bool {
        self.generators.iter().fold(0u32, |acc, g| acc | g) == full_mask(self.scope.len())
    }
}

fn checked_scope(scope: &[usize]) -> Result<Vec<usize>> {
    if scope.is_empty() {
        return Err(Error::invalid("model scope must be non-empty"));
    }
    if scope.len() > MAX_SCOPE {
        return Err(Error::invalid(format!(
            "model scope of {} variables exceeds the supported maximum of {}",
            scope.len(),
            MAX_SCOPE
        )));
    }
    let mut scope = scope.to_vec();
    scope.sort_unstable();
    scope.dedup();
    Ok(scope)
}

fn full_mask(k: usize) -> u32 {
    if k == 32 {
        u32::MAX
    } else {
        (1u32 << k) - 1
    }
}

/// Keeps the maximal elements, deduplicated and sorted.
fn antichain(mut masks: Vec<u32>) -> Vec<u32> {
    masks.sort_unstable();
    masks.dedup();
    let kept: Vec<u32> = masks
        .iter()
        .copied()
        .filter(|&m| !masks.iter().any(|&other| other != m && m & !other == 0))
        .collect();
    kept
}

/// Minimal interaction terms absent from the model, as column-index sets.
pub fn dual_generators(model: &GeneratingClass) -> Vec<Vec<usize>> {
    model
        .dual_generator_masks()
        .iter()
        .map(|&m| model.mask_to_vars(m))
        .collect()
}

/// Lattice neighborhood: one model per addable dual generator and one per
/// deletable generator (a generator is deletable when removing it keeps all
/// main effects, i.e. when it has at least two variables).
pub fn model_neighborhood(model: &GeneratingClass) -> Vec<GeneratingClass> {
    let mut out = Vec::new();
    for d in model.dual_generator_masks() {
        let mut masks = model.generators.clone();
        masks.push(d);
        let generators = antichain(masks);
        let next = GeneratingClass {
            scope: model.scope.clone(),
            generators,
        };
        debug_assert!(next.covers_scope());
        out.push(next);
    }
    for (i, &g) in model.generators.iter().enumerate() {
        if g.count_ones() < 2 {
            continue;
        }
        let mut masks: Vec<u32> = model
            .generators
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &m)| m)
            .collect();
        for b in 0..model.scope.len() {
            let bit = 1u32 << b;
            if g & bit != 0 {
                masks.push(g & !bit);
            }
        }
        let generators = antichain(masks);
        let next = GeneratingClass {
            scope: model.scope.clone(),
            generators,
        };
        debug_assert!(next.covers_scope());
        out.push(next);
    }
    out
}

/// Per-term margins of the observed table for every term in the downward
/// closure of the generators.
#[derive(Debug, Clone)]
pub struct SufficientStats {
    /// Closure terms as column-index sets, in the canonical term order.
    pub terms: Vec<Vec<usize>>,
    /// Data margin for each term; each equals the corresponding sum-collapse
    /// of the full table.
    pub margins: Vec<ContingencyTable>,
}

impl SufficientStats {
    pub fn collect(table: &ContingencyTable, model: &GeneratingClass) -> Result<SufficientStats> {
        check_table_scope(table, model)?;
        let mut terms = Vec::new();
        let mut margins = Vec::new();
        for mask in model.closure() {
            let vars = model.mask_to_vars(mask);
            margins.push(table.margin(&vars)?);
            terms.push(vars);
        }
        Ok(SufficientStats { terms, margins })
    }
}

fn check_table_scope(table: &ContingencyTable, model: &GeneratingClass) -> Result<()> {
    if table.variables() != model.scope() {
        return Err(Error::invalid(format!(
            "table variables {:?} do not match model scope {:?}",
            table.variables(),
            model.scope()
        )));
    }
    Ok(())
}

/// Design for one model on one table shape: parameter layout and the
/// cell-to-parameter incidence used by the objective, gradient and Hessian.
struct ModelDesign {
    dims: Vec<usize>,
    /// Closure term masks in canonical (ascending mask) order.
    terms: Vec<u32>,
    term_offsets: Vec<usize>,
    n_params: usize,
    /// Parameters touched by each cell.
    cell_params: Vec<Vec<u32>>,
}

impl ModelDesign {
    fn try_new(model: &GeneratingClass, dims: &[usize]) -> Result<ModelDesign> {
        let terms = model.closure();
        let k = dims.len();
        let n_cells: usize = dims.iter().product();
        if n_cells > MAX_MODEL_CELLS {
            return Err(Error::invalid(format!(
                "model over {} cells exceeds the fitting limit",
                n_cells
            )));
        }

        let mut term_offsets = Vec::with_capacity(terms.len());
        let mut n_params = 0usize;
        for &t in &terms {
            term_offsets.push(n_params);
            let mut count = 1usize;
            for (b, &d) in dims.iter().enumerate().take(k) {
                if t & (1 << b) != 0 {
                    count *= d - 1;
                }
            }
            n_params += count;
        }
        if n_params > MAX_PARAMS {
            return Err(Error::invalid(format!(
                "model with {} free coefficients exceeds the fitting limit of {}",
                n_params, MAX_PARAMS
            )));
        }

        let mut cell_params = vec![Vec::new(); n_cells];
        let mut codes = vec![0u8; k];
        for (idx, params) in cell_params.iter_mut().enumerate() {
            decode_cell(idx, dims, &mut codes);
            'term: for (ti, &t) in terms.iter().enumerate() {
                let mut pidx = 0usize;
                let mut stride = 1usize;
                for b in 0..k {
                    if t & (1 << b) == 0 {
                        continue;
                    }
                    let c = codes[b] as usize;
                    if c == 0 {
                        continue 'term;
                    }
                    pidx += (c - 1) * stride;
                    stride *= dims[b] - 1;
                }
                params.push((term_offsets[ti] + pidx) as u32);
            }
        }

        Ok(ModelDesign {
            dims: dims.to_vec(),
            terms,
            term_offsets,
            n_params,
            cell_params,
        })
    }

    /// Margins of the equal-count fictive table for each free parameter:
    /// `alpha / prod(dims of the term)`.
    fn fictive_vector(&self, alpha: f64) -> Vec<f64> {
        let mut s = vec![0.0; self.n_params];
        for (ti, &t) in self.terms.iter().enumerate() {
            let mut cells = 1usize;
            let mut count = 1usize;
            for (b, &d) in self.dims.iter().enumerate() {
                if t & (1 << b) != 0 {
                    cells *= d;
                    count *= d - 1;
                }
            }
            let value = alpha / cells as f64;
            for p in 0..count {
                s[self.term_offsets[ti] + p] = value;
            }
        }
        s
    }

    /// Adds the data margins from `stats` into a parameter-indexed vector.
    fn data_vector(&self, stats: &SufficientStats) -> Vec<f64> {
        let mut t = vec![0.0; self.n_params];
        for (ti, margin) in stats.margins.iter().enumerate() {
            let offset = self.term_offsets[ti];
            let dims = margin.dimens();
            let mut codes = vec![0u8; dims.len()];
            for (idx, &count) in margin.counts().iter().enumerate() {
                if count == 0 {
                    continue;
                }
                margin.decode(idx, &mut codes);
                if codes.contains(&0) {
                    continue;
                }
                let mut pidx = 0usize;
                let mut stride = 1usize;
                for (&c, &d) in codes.iter().zip(dims) {
                    pidx += (c as usize - 1) * stride;
                    stride *= d - 1;
                }
                t[offset + pidx] += count as f64;
            }
        }
        t
    }

    fn cell_log_weights(&self, theta: &[f64]) -> Vec<f64> {
        self.cell_params
            .iter()
            .map(|params| params.iter().map(|&p| theta[p as usize]).sum())
            .collect()
    }

    /// Cell probabilities and the log-partition `kappa(theta)`.
    fn probs(&self, theta: &[f64]) -> (Vec<f64>, f64) {
        let eta = self.cell_log_weights(theta);
        let kappa = crate::math::log_sum_exp(&eta);
        let probs = eta.iter().map(|&e| (e - kappa).exp()).collect();
        (probs, kappa)
    }

    fn gradient_of_kappa(&self, probs: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n_params];
        for (cell, params) in self.cell_params.iter().enumerate() {
            let p = probs[cell];
            for &k in params {
                g[k as usize] += p;
            }
        }
        g
    }

    /// `N * (second moment - g g^T)`: the negative Hessian of the objective.
    fn neg_hessian(&self, probs: &[f64], g: &[f64], n_total: f64) -> SymMatrix {
        let mut h = SymMatrix::zeros(self.n_params);
        for (cell, params) in self.cell_params.iter().enumerate() {
            let p = probs[cell];
            for (a, &ka) in params.iter().enumerate() {
                for &kb in &params[a..] {
                    h.add(ka as usize, kb as usize, p);
                }
            }
        }
        for i in 0..self.n_params {
            for j in i..self.n_params {
                let v = (h.get(i, j) - g[i] * g[j]) * n_total;
                h.data[i * self.n_params + j] = v;
                if i != j {
                    h.data[j * self.n_params + i] = v;
                }
            }
        }
        h
    }
}

fn decode_cell(mut idx: usize, dims: &[usize], out: &mut [u8]) {
    for (o, d) in out.iter_mut().zip(dims) {
        *o = (idx % d) as u8;
        idx /= d;
    }
}

struct ModeFit {
    theta: Vec<f64>,
    cell_probs: Vec<f64>,
    /// `<d, theta> - N kappa(theta)` at the mode.
    objective: f64,
    log_det_hessian: f64,
    grad_inf_norm: f64,
}

/// Newton iterations with step halving on the strictly concave objective
/// `<d, theta> - N kappa(theta)`; ridge fallback when the Hessian solve
/// breaks down near singularity.
fn fit_mode(design: &ModelDesign, d: &[f64], n_total: f64) -> Result<ModeFit> {
    let p = design.n_params;
    let mut theta = vec![0.0; p];
    let (mut probs, mut kappa) = design.probs(&theta);
    let mut objective = dot(d, &theta) - n_total * kappa;

    let mut last_grad_norm = f64::INFINITY;
    for _iter in 0..MAX_NEWTON_ITERS {
        let g = design.gradient_of_kappa(&probs);
        let grad: Vec<f64> = d
            .iter()
            .zip(&g)
            .map(|(&di, &gi)| di - n_total * gi)
            .collect();
        let grad_norm = grad.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        last_grad_norm = grad_norm;
        let hessian = design.neg_hessian(&probs, &g, n_total);
        if grad_norm <= GRAD_TOL {
            let log_det = cholesky_log_det(&hessian)?;
            return Ok(ModeFit {
                theta,
                cell_probs: probs,
                objective,
                log_det_hessian: log_det,
                grad_inf_norm: grad_norm,
            });
        }

        let step = solve_with_ridge(&hessian, &grad)?;
        let mut scale = 1.0;
        let mut advanced = false;
        for _ in 0..40 {
            let candidate: Vec<f64> = theta
                .iter()
                .zip(&step)
                .map(|(&t, &s)| t + scale * s)
                .collect();
            let (cand_probs, cand_kappa) = design.probs(&candidate);
            let cand_obj = dot(d, &candidate) - n_total * cand_kappa;
            if cand_obj > objective || (cand_obj - objective).abs() < 1e-14 * objective.abs() {
                theta = candidate;
                probs = cand_probs;
                kappa = cand_kappa;
                objective = cand_obj;
                advanced = true;
                break;
            }
            scale *= 0.5;
        }
        let _ = kappa;
        if !advanced {
            return Err(Error::numerical(format!(
                "line search stalled with gradient norm {:.3e}",
                grad_norm
            )));
        }
    }
    Err(Error::numerical(format!(
        "posterior mode not found after {} iterations (gradient norm {:.3e})",
        MAX_NEWTON_ITERS, last_grad_norm
    )))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn solve_with_ridge(hessian: &SymMatrix, grad: &[f64]) -> Result<Vec<f64>> {
    if hessian.n == 0 {
        return Ok(Vec::new());
    }
    if let Some(ch) = hessian.cholesky() {
        return Ok(ch.solve(grad));
    }
    let base = hessian.max_abs_diag().max(1.0);
    let mut ridge = 1e-6 * base;
    for _ in 0..4 {
        let mut h = hessian.clone();
        h.add_ridge(ridge);
        if let Some(ch) = h.cholesky() {
            return Ok(ch.solve(grad));
        }
        ridge *= 100.0;
    }
    Err(Error::numerical(
        "Hessian not positive definite even after ridge escalation",
    ))
}

fn cholesky_log_det(hessian: &SymMatrix) -> Result<f64> {
    if hessian.n == 0 {
        return Ok(0.0);
    }
    if let Some(ch) = hessian.cholesky() {
        return Ok(ch.log_det());
    }
    let base = hessian.max_abs_diag().max(1.0);
    let mut ridge = 1e-6 * base;
    for _ in 0..4 {
        let mut h = hessian.clone();
        h.add_ridge(ridge);
        if let Some(ch) = h.cholesky() {
            return Ok(ch.log_det());
        }
        ridge *= 100.0;
    }
    Err(Error::numerical(
        "Hessian not positive definite at the mode",
    ))
}

/// Corrected Laplace value of `log int exp(<d,theta> - N kappa(theta)) dtheta`.
fn log_integral(design: &ModelDesign, d: &[f64], n_total: f64) -> Result<(ModeFit, f64)> {
    let fit = fit_mode(design, d, n_total)?;
    let p = design.n_params as f64;
    let mut value = fit.objective + 0.5 * p * ln_2pi() - 0.5 * fit.log_det_hessian;
    for &prob in &fit.cell_probs {
        value += stirling_error(n_total * prob);
    }
    value -= stirling_error(n_total);
    Ok((fit, value))
}

struct EvidenceParts {
    posterior: ModeFit,
    n_total: f64,
    value: f64,
}

fn evidence_parts(
    table: &ContingencyTable,
    model: &GeneratingClass,
    prior: &PriorConfig,
) -> Result<EvidenceParts> {
    check_table_scope(table, model)?;
    let design = ModelDesign::try_new(model, table.dimens())?;
    let stats = SufficientStats::collect(table, model)?;
    let t = design.data_vector(&stats);
    let s = design.fictive_vector(prior.alpha);
    let d_num: Vec<f64> = t.iter().zip(&s).map(|(a, b)| a + b).collect();
    let n = table.total() as f64;

    let (posterior, log_num) = log_integral(&design, &d_num, n + prior.alpha)?;
    let (_, log_den) = log_integral(&design, &s, prior.alpha)?;
    Ok(EvidenceParts {
        posterior,
        n_total: n + prior.alpha,
        value: log_num - log_den,
    })
}

/// Approximate evidence `P(t_m | m)` of a hierarchical log-linear model.
pub fn log_marglik_loglinear(
    table: &ContingencyTable,
    model: &GeneratingClass,
    prior: &PriorConfig,
) -> Result<LogEvidence> {
    Ok(LogEvidence(evidence_parts(table, model, prior)?.value))
}

/// One fitted coefficient block: a closure term with the coefficient for
/// every all-nonzero category combination. Category-0 entries are fixed at
/// zero by the corner constraint and not stored.
#[derive(Debug, Clone, Serialize)]
pub struct FittedTerm {
    /// Column indices of the term's variables.
    pub vars: Vec<usize>,
    /// `(category codes, coefficient)` pairs; codes align with `vars`.
    pub coefficients: Vec<(Vec<u8>, f64)>,
}

/// A log-linear model fitted at the mode of its posterior.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub model: GeneratingClass,
    /// Category counts per scope variable.
    pub dims: Vec<usize>,
    /// Log fitted count of the all-baseline cell, `ln((n + alpha) * p_0)`.
    pub intercept: f64,
    pub terms: Vec<FittedTerm>,
    /// Implied joint distribution over the scope cells (sums to one).
    pub cell_probs: Vec<f64>,
    pub log_evidence: LogEvidence,
}

impl FittedModel {
    /// Mixed-radix cell index over the scope (first variable fastest).
    pub fn cell_index(&self, codes: &[u8]) -> usize {
        let mut idx = 0usize;
        let mut stride = 1usize;
        for (&c, &d) in codes.iter().zip(&self.dims) {
            idx += c as usize * stride;
            stride *= d;
        }
        idx
    }
}

/// Fits the posterior mode of the log-linear parameters and packages the
/// implied distribution together with the model evidence.
pub fn fit_posterior_mode(
    table: &ContingencyTable,
    model: &GeneratingClass,
    prior: &PriorConfig,
) -> Result<FittedModel> {
    let design = ModelDesign::try_new(model, table.dimens())?;
    let parts = evidence_parts(table, model, prior)?;
    let fit = parts.posterior;

    let mut terms = Vec::new();
    for (ti, &mask) in design.terms.iter().enumerate() {
        let vars = model.mask_to_vars(mask);
        let mut radices = Vec::new();
        for b in 0..design.dims.len() {
            if mask & (1 << b) != 0 {
                radices.push(design.dims[b] - 1);
            }
        }
        let count: usize = radices.iter().product();
        let mut coefficients = Vec::with_capacity(count);
        for p in 0..count {
            let mut codes = Vec::with_capacity(radices.len());
            let mut rem = p;
            for &r in &radices {
                codes.push((rem % r) as u8 + 1);
                rem /= r;
            }
            coefficients.push((codes, fit.theta[design.term_offsets[ti] + p]));
        }
        terms.push(FittedTerm { vars, coefficients });
    }

    let intercept = (parts.n_total * fit.cell_probs[0]).ln();
    debug_assert!(fit.grad_inf_norm <= GRAD_TOL);
    Ok(FittedModel {
        model: model.clone(),
        dims: table.dimens().to_vec(),
        intercept,
        terms,
        cell_probs: fit.cell_probs,
        log_evidence: LogEvidence(parts.value),
    })
}
