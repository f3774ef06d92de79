//! Independent oracles for the acceptance suite.
//!
//! Nothing here reuses the library's evidence path: the quadrature oracle
//! integrates over the probability simplex numerically (no log-gamma), the
//! Monte Carlo oracle samples the prior directly, and the enumeration
//! oracles walk the full model spaces.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use moss_core::{Dataset, GeneratingClass};

/// `ln(sum(exp(xs)))` (local copy; deliberately not the library's).
pub fn lse(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln integral_0^1 x^(p-1) (1-x)^(q-1) dx` by tanh-sinh quadrature.
///
/// The substitution `x(t) = sigmoid(pi sinh t)` turns both endpoint
/// singularities into double-exponentially decaying tails, so the rule
/// converges for any `p, q > 0`. Evaluation happens on the log scale; the
/// level doubling stops when two refinements agree to 1e-12.
pub fn ln_beta_quadrature(p: f64, q: f64) -> f64 {
    assert!(p > 0.0 && q > 0.0);
    let t_max = 7.5f64;
    let softplus = |z: f64| {
        if z > 30.0 {
            z
        } else {
            z.exp().ln_1p()
        }
    };
    let eval_level = |h: f64| -> f64 {
        let n = (t_max / h).floor() as i64;
        let mut terms = Vec::with_capacity((2 * n + 1) as usize);
        for k in -n..=n {
            let t = k as f64 * h;
            let s = std::f64::consts::PI * t.sinh();
            // ln x = -softplus(-s), ln (1-x) = -softplus(s).
            let ln_x = -softplus(-s);
            let ln_1mx = -softplus(s);
            // ln dx/dt = ln(pi cosh t) + ln x + ln(1 - x).
            let ln_w = (std::f64::consts::PI * t.cosh()).ln() + ln_x + ln_1mx;
            terms.push((p - 1.0) * ln_x + (q - 1.0) * ln_1mx + ln_w);
        }
        h.ln() + lse(&terms)
    };

    let mut h = 0.5;
    let mut value = eval_level(h);
    for _ in 0..9 {
        h *= 0.5;
        let refined = eval_level(h);
        let done = (refined - value).abs() < 1e-12;
        value = refined;
        if done {
            break;
        }
    }
    value
}

/// Evidence of a saturated table by numerical integration over the simplex.
///
/// Stick-breaking factorizes the Dirichlet-multinomial integral into K-1
/// one-dimensional Beta-type integrals, each evaluated by tanh-sinh
/// quadrature; the prior normalizers come from the same quadrature, so no
/// gamma function is touched anywhere.
pub fn quadrature_log_evidence(counts: &[u64], alpha: f64) -> f64 {
    let k = counts.len();
    let a = alpha / k as f64;
    let mut value = 0.0;
    for i in 0..k - 1 {
        let rest_prior = a * (k - 1 - i) as f64;
        let rest_counts: u64 = counts[i + 1..].iter().sum();
        value += ln_beta_quadrature(a + counts[i] as f64, rest_prior + rest_counts as f64)
            - ln_beta_quadrature(a, rest_prior);
    }
    value
}

/// Standard normal draw (Box-Muller).
fn draw_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u1: f64 = rng.random();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let u2: f64 = rng.random();
        return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    }
}

/// `ln Gamma(shape)` draw by Marsaglia-Tsang, with the standard boost for
/// shapes below one. Returned on the log scale so tiny shapes do not
/// underflow.
fn draw_ln_gamma_variate(shape: f64, rng: &mut ChaCha8Rng) -> f64 {
    if shape < 1.0 {
        let boost: f64 = rng.random::<f64>().ln() / shape;
        return draw_ln_gamma_variate(shape + 1.0, rng) + boost;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = draw_normal(rng);
        let v = (1.0 + c * x).powi(3);
        if v <= 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return (d * v).ln();
        }
    }
}

/// Monte Carlo estimate of the saturated evidence: average the likelihood
/// over Dirichlet draws from the prior (log-mean-exp).
pub fn monte_carlo_log_evidence(counts: &[u64], alpha: f64, samples: usize, seed: u64) -> f64 {
    let k = counts.len();
    let a = alpha / k as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log_liks = Vec::with_capacity(samples);
    let mut ln_g = vec![0.0f64; k];
    for _ in 0..samples {
        for slot in ln_g.iter_mut() {
            *slot = draw_ln_gamma_variate(a, &mut rng);
        }
        let ln_total = lse(&ln_g);
        let mut ll = 0.0;
        for (&c, &lg) in counts.iter().zip(&ln_g) {
            if c > 0 {
                ll += c as f64 * (lg - ln_total);
            }
        }
        log_liks.push(ll);
    }
    lse(&log_liks) - (samples as f64).ln()
}

/// Draws a table with multinomial cell counts under random cell
/// probabilities.
pub fn random_table_counts(dims: &[usize], n: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let cells: usize = dims.iter().product();
    let raw: Vec<f64> = (0..cells).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut counts = vec![0u64; cells];
    for _ in 0..n {
        let mut draw = rng.random::<f64>() * total;
        let mut idx = cells - 1;
        for (i, &w) in raw.iter().enumerate() {
            draw -= w;
            if draw <= 0.0 {
                idx = i;
                break;
            }
        }
        counts[idx] += 1;
    }
    counts
}

/// Builds a dataset realizing exactly the given cell counts (used to push
/// synthetic tables through the public API). A constant binary response
/// column is appended to satisfy the dataset invariant; tables are built
/// over columns `0..dims.len()`, which never include it.
pub fn dataset_from_counts(counts: &[u64], dims: &[usize]) -> Dataset {
    let mut names: Vec<String> = (0..dims.len()).map(|i| format!("v{}", i)).collect();
    names.push("resp".into());
    let mut full_dims = dims.to_vec();
    full_dims.push(2);
    let mut rows = Vec::new();
    for (idx, &c) in counts.iter().enumerate() {
        let mut codes = vec![0u8; dims.len()];
        let mut rem = idx;
        for (o, &d) in codes.iter_mut().zip(dims) {
            *o = (rem % d) as u8;
            rem /= d;
        }
        codes.push(0);
        for _ in 0..c {
            rows.push(codes.clone());
        }
    }
    Dataset::from_rows(names, full_dims, &rows).unwrap()
}

/// Uniform random categorical dataset with trinary predictors and a binary
/// response.
pub fn random_dataset(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names: Vec<String> = (0..p).map(|i| format!("snp{}", i + 1)).collect();
    names.push("aff".into());
    let mut dims = vec![3usize; p];
    dims.push(2);
    let rows: Vec<Vec<u8>> = (0..n)
        .map(|_| dims.iter().map(|&d| rng.random_range(0..d as u8)).collect())
        .collect();
    Dataset::from_rows(names, dims, &rows).unwrap()
}

/// Every subset of `items` with size in `1..=max_size`, lexicographic.
pub fn subsets_up_to(items: &[usize], max_size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn recurse(
        items: &[usize],
        start: usize,
        max_size: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if !current.is_empty() {
            out.push(current.clone());
        }
        if current.len() == max_size {
            return;
        }
        for i in start..items.len() {
            current.push(items[i]);
            recurse(items, i + 1, max_size, current, out);
            current.pop();
        }
    }
    recurse(items, 0, max_size, &mut Vec::new(), &mut out);
    out
}

/// Enumerates every hierarchical log-linear model with all main effects on
/// `scope` (independent of the library's lattice code).
pub fn enumerate_hierarchical_models(scope: &[usize]) -> Vec<GeneratingClass> {
    let k = scope.len();
    // All candidate interaction terms (size >= 2) as sorted index vectors.
    let interactions: Vec<Vec<usize>> = subsets_up_to(scope, k)
        .into_iter()
        .filter(|s| s.len() >= 2)
        .collect();
    let mut out = Vec::new();
    for pick in 0u32..(1 << interactions.len()) {
        let chosen: Vec<&Vec<usize>> = interactions
            .iter()
            .enumerate()
            .filter(|&(i, _)| pick & (1 << i) != 0)
            .map(|(_, t)| t)
            .collect();
        let contains = |t: &[usize]| chosen.iter().any(|c| c.as_slice() == t);
        let closed = chosen.iter().all(|term| {
            (0..term.len()).all(|drop| {
                let sub: Vec<usize> = term
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != drop)
                    .map(|(_, &v)| v)
                    .collect();
                sub.len() < 2 || contains(&sub)
            })
        });
        if !closed {
            continue;
        }
        let terms: Vec<Vec<usize>> = chosen.into_iter().cloned().collect();
        out.push(GeneratingClass::from_terms(scope, &terms).unwrap());
    }
    out.sort();
    out.dedup();
    out
}

/// O(n^2) pairwise concordance AUC, in percent, ties counting one half.
pub fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
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
            let (pos, neg) = match (li, lj) {
                (1, 0) => (si, sj),
                (0, 1) => (sj, si),
                _ => continue,
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
