//! Forward variable selection for D-vine quantile regression.
//!
//! All methods grow the D-vine one variable at a time, appending the chosen
//! variable at the right end, and stop once the conditional AIC no longer
//! strictly decreases. They differ in how candidates are scored:
//!
//! - [`Method::Res`]: a bivariate copula between the pseudo-response (the
//!   residual of the current median prediction) and each candidate
//! - [`Method::ParCor`]: absolute partial correlation of normal scores given
//!   the chosen set
//! - [`Method::Baseline`]: a trial extension of the full vine per candidate

use crate::bicop::{select_family_default, Criterion};
use crate::dvine::{DVineFit, DVineModel, PseudoSample};
use crate::margins::{kde_fit, MarginalModel};
use crate::special::norm_ppf;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const MIN_OBS: usize = 30;
/// Condition number above which the correlation submatrix is not inverted.
const MAX_CONDITION: f64 = 1e12;

/// Raw data with the response in column 0 and explanatory variables `1..=p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Dataset {
    /// Columns default to the names `y, x1, .., xp`.
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self> {
        let names = std::iter::once("y".to_string())
            .chain((1..columns.len()).map(|j| format!("x{j}")))
            .collect();
        Dataset::with_names(columns, names)
    }

    pub fn with_names(columns: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidInput("dataset has no columns".into()));
        }
        if names.len() != columns.len() {
            return Err(Error::InvalidInput("one name per column required".into()));
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput("columns differ in length".into()));
        }
        if columns.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        Ok(Dataset { names, columns })
    }

    /// Builds a dataset from rows `[y, x1, .., xp]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidInput("rows differ in length".into()));
        }
        Dataset::new((0..m).map(|j| rows.iter().map(|r| r[j]).collect()).collect())
    }

    pub fn n_obs(&self) -> usize {
        self.columns[0].len()
    }

    /// Number of explanatory variables.
    pub fn p(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn response(&self) -> &[f64] {
        &self.columns[0]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Row `i` as `[y, x1, .., xp]`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Dataset restricted to the given rows.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }

    /// Dataset restricted to the response and the given explanatory variables.
    pub fn select_columns(&self, vars: &[usize]) -> Dataset {
        let keep: Vec<usize> = std::iter::once(0).chain(vars.iter().copied()).collect();
        Dataset {
            names: keep.iter().map(|&j| self.names[j].clone()).collect(),
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Res,
    ParCor,
    Baseline,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "res" | "vineregres" => Ok(Method::Res),
            "parcor" | "vineregparcor" => Ok(Method::ParCor),
            "baseline" | "vinereg" => Ok(Method::Baseline),
            _ => Err(Error::InvalidInput(format!("unknown method {s:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Res => "res",
            Method::ParCor => "parcor",
            Method::Baseline => "baseline",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub method: Method,
    pub criterion: Criterion,
    /// Quantile level of the prediction subtracted to form the pseudo-response.
    pub pseudo_response_quantile: f64,
    /// Defaults to `min(p, n / 10)`.
    pub max_iterations: Option<usize>,
    pub parallel_candidates: bool,
    /// Keep adding variables even when the conditional AIC gets worse.
    pub exhaustive: bool,
    /// Variables placed in the vine before selection starts.
    pub initial_order: Vec<usize>,
}

impl SelectionConfig {
    pub fn new(method: Method) -> Self {
        SelectionConfig {
            method,
            criterion: Criterion::Aic,
            pseudo_response_quantile: 0.5,
            max_iterations: None,
            parallel_candidates: true,
            exhaustive: false,
            initial_order: Vec::new(),
        }
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        let q = self.pseudo_response_quantile;
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidInput(format!("pseudo-response quantile {q} not in (0, 1)")));
        }
        let mut seen = self.initial_order.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.initial_order.len()
            || self.initial_order.iter().any(|&v| v == 0 || v > data.p())
        {
            return Err(Error::InvalidInput(format!(
                "invalid initial order {:?}",
                self.initial_order
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    AicWorsened,
    AllVariables,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub candidate_scores: BTreeMap<usize, f64>,
    pub chosen_var: usize,
    pub score: f64,
    pub conditional_aic: f64,
    pub effective_dof: usize,
    pub pair_copulas_fitted: usize,
    /// False for the final iteration when it was rejected by the stopping rule.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub method: Method,
    pub initial_aic: f64,
    pub initial_fits: usize,
    pub iterations: Vec<IterationRecord>,
    pub chosen: Vec<usize>,
    pub stop_reason: StopReason,
}

impl SelectionTrace {
    pub fn total_fits(&self) -> usize {
        self.initial_fits + self.iterations.iter().map(|r| r.pair_copulas_fitted).sum::<usize>()
    }

    /// Conditional AIC of the returned model.
    pub fn final_aic(&self) -> f64 {
        self.iterations
            .iter()
            .rev()
            .find(|r| r.accepted)
            .map_or(self.initial_aic, |r| r.conditional_aic)
    }
}

/// Rank-based normal scores, one column per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalScores {
    columns: Vec<Vec<f64>>,
}

impl NormalScores {
    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }
}

/// Average ranks (1-based) with ties sharing their mean rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// `Phi^{-1}(rank / (n + 1))` per column.
pub fn normal_scores(data: &Dataset) -> Result<NormalScores> {
    let n = data.n_obs() as f64;
    let columns = data
        .columns()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            if c.iter().all(|&x| x == c[0]) {
                return Err(Error::Degenerate(format!("column {j} is constant")));
            }
            Ok(average_ranks(c).iter().map(|r| norm_ppf(r / (n + 1.0))).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NormalScores { columns })
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}

/// Least-squares residuals of `y` on an intercept and the columns `xs`.
fn residuals(y: &[f64], xs: &[&[f64]]) -> Option<Vec<f64>> {
    let n = y.len();
    let design = DMatrix::from_fn(n, xs.len() + 1, |i, j| if j == 0 { 1.0 } else { xs[j - 1][i] });
    let target = DVector::from_column_slice(y);
    let beta = design.clone().svd(true, true).solve(&target, 1e-12).ok()?;
    let fitted = design * beta;
    Some(y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect())
}

/// Partial correlation of variables `a` and `b` given `given`.
pub fn partial_correlation(z: &NormalScores, a: usize, b: usize, given: &[usize]) -> Result<f64> {
    if given.contains(&a) || given.contains(&b) || a == b {
        return Err(Error::InvalidInput("partial correlation variables overlap".into()));
    }
    let n = z.columns[0].len();
    if given.len() + 3 > n {
        return Err(Error::InvalidInput("conditioning set too large for the sample".into()));
    }
    if given.is_empty() {
        let r = pearson(z.column(a), z.column(b));
        return if r.is_finite() {
            Ok(r.clamp(-1.0, 1.0))
        } else {
            Err(Error::Collinear(format!("zero variance in variable {a} or {b}")))
        };
    }
    let vars: Vec<usize> = [a, b].into_iter().chain(given.iter().copied()).collect();
    let k = vars.len();
    let corr = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            1.0
        } else {
            pearson(z.column(vars[i]), z.column(vars[j]))
        }
    });
    let sv = corr.singular_values();
    let cond = sv.max() / sv.min();
    if corr.iter().all(|x| x.is_finite()) && cond.is_finite() && cond < MAX_CONDITION {
        if let Some(prec) = corr.try_inverse() {
            let r = -prec[(0, 1)] / (prec[(0, 0)] * prec[(1, 1)]).sqrt();
            if r.is_finite() {
                return Ok(r.clamp(-1.0, 1.0));
            }
        }
    }
    let xs: Vec<&[f64]> = given.iter().map(|&g| z.column(g)).collect();
    let ra = residuals(z.column(a), &xs);
    let rb = residuals(z.column(b), &xs);
    match (ra, rb) {
        (Some(ra), Some(rb)) => {
            let r = pearson(&ra, &rb);
            let explained = |res: &[f64], orig: &[f64]| {
                let n = orig.len() as f64;
                let mean = orig.iter().sum::<f64>() / n;
                let total: f64 = orig.iter().map(|v| (v - mean).powi(2)).sum();
                res.iter().map(|v| v * v).sum::<f64>() <= 1e-16 * total
            };
            if r.is_finite() && !explained(&ra, z.column(a)) && !explained(&rb, z.column(b)) {
                Ok(r.clamp(-1.0, 1.0))
            } else {
                Err(Error::Collinear(format!("variables {a}, {b} given {given:?}")))
            }
        }
        _ => Err(Error::Collinear(format!("variables {a}, {b} given {given:?}"))),
    }
}

fn response_ln_density(model: &DVineModel, y: &[f64]) -> f64 {
    let m = model.response_margin();
    y.iter().map(|&v| m.ln_pdf(v)).sum()
}

/// Conditional AIC of a model on raw data.
pub fn caic(model: &DVineModel, data: &Dataset) -> Result<f64> {
    let n = data.n_obs();
    let cols = (0..=data.p())
        .map(|j| match model.margin(j) {
            Some(m) => data.column(j).iter().map(|&x| m.pit(x)).collect(),
            None => vec![0.5; n],
        })
        .collect();
    let u = PseudoSample::new(cols)?;
    let cll = model.conditional_loglik(&u)?;
    Ok(-2.0 * (cll + response_ln_density(model, data.response())) + 2.0 * model.dof() as f64)
}

/// Shared state of one selection run.
struct Run<'a> {
    data: &'a Dataset,
    config: &'a SelectionConfig,
    margins: Vec<MarginalModel>,
    u: PseudoSample,
    ln_fy: f64,
}

impl<'a> Run<'a> {
    fn new(data: &'a Dataset, config: &'a SelectionConfig) -> Result<Self> {
        if data.n_obs() < MIN_OBS {
            return Err(Error::InvalidInput(format!(
                "need at least {MIN_OBS} observations, got {}",
                data.n_obs()
            )));
        }
        if data.p() < 1 {
            return Err(Error::InvalidInput("no explanatory variables".into()));
        }
        config.validate(data)?;
        let margins = data
            .columns()
            .par_iter()
            .map(|c| kde_fit(c))
            .collect::<Result<Vec<_>>>()?;
        let u = PseudoSample::from_margins(data.columns(), &margins)?;
        let ln_fy = data.response().iter().map(|&y| margins[0].ln_pdf(y)).sum();
        Ok(Run {
            data,
            config,
            margins,
            u,
            ln_fy,
        })
    }

    fn caic(&self, state: &DVineFit) -> f64 {
        -2.0 * (state.conditional_loglik() + self.ln_fy) + 2.0 * state.model().dof() as f64
    }

    fn extend(&self, state: &DVineFit, var: usize) -> Result<DVineFit> {
        state.extend(&self.u, var, self.margins[var].clone(), self.config.criterion)
    }

    fn max_iterations(&self) -> usize {
        self.config
            .max_iterations
            .unwrap_or_else(|| self.data.p().min(self.data.n_obs() / 10))
    }

    fn map_candidates<T, F>(&self, candidates: &[usize], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        if self.config.parallel_candidates {
            candidates.par_iter().map(|&d| f(d)).collect()
        } else {
            candidates.iter().map(|&d| f(d)).collect()
        }
    }

    /// Pseudo-response on the copula scale: the residual of the current
    /// conditional quantile prediction, transformed by its own margin.
    fn pseudo_response(&self, state: &DVineFit) -> Result<Vec<f64>> {
        let model = state.model();
        if model.dim() == 1 {
            return Ok(self.u.column(0).to_vec());
        }
        let q = self.config.pseudo_response_quantile;
        let y = self.data.response();
        let resid = (0..self.data.n_obs())
            .into_par_iter()
            .map(|i| {
                let w = model.conditional_quantile_pseudo(&self.u, i, q)?;
                Ok(y[i] - model.response_margin().quantile(w))
            })
            .collect::<Result<Vec<f64>>>()?;
        let margin = kde_fit(&resid)?;
        Ok(resid.iter().map(|&r| margin.pit(r)).collect())
    }
}

/// Index of the largest score; the earliest (lowest variable) wins ties.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] || (scores[best].is_nan() && !s.is_nan()) {
            best = i;
        }
    }
    best
}

fn fit_bound(method: Method, p: usize) -> usize {
    match method {
        Method::Res => p * (p + 1),
        Method::ParCor => p * (p + 1) / 2,
        Method::Baseline => (1..=p).map(|s| (p - s + 1) * s).sum(),
    }
}

fn select(data: &Dataset, config: &SelectionConfig) -> Result<(DVineModel, SelectionTrace)> {
    let run = Run::new(data, config)?;
    let p = data.p();
    let scores_z = match config.method {
        Method::ParCor => Some(normal_scores(data)?),
        _ => None,
    };

    let mut state = DVineFit::new(DVineModel::response_only(run.margins[0].clone()), &run.u)?;
    let mut initial_fits = 0;
    for &v in &config.initial_order {
        state = run.extend(&state, v)?;
        initial_fits += state.last_extension_fits();
    }
    let mut chosen = config.initial_order.clone();
    let mut candidates: Vec<usize> = (1..=p).filter(|v| !chosen.contains(v)).collect();
    let mut current_aic = run.caic(&state);
    let initial_aic = current_aic;
    let mut pseudo = match config.method {
        Method::Res => Some(run.pseudo_response(&state)?),
        _ => None,
    };
    let cap = run.max_iterations();
    let mut iterations: Vec<IterationRecord> = Vec::new();

    let stop_reason = loop {
        if candidates.is_empty() {
            break StopReason::AllVariables;
        }
        if iterations.len() >= cap {
            break StopReason::IterationCap;
        }
        let (scores, fits, trial) = match config.method {
            Method::Res => {
                let v = pseudo.as_deref().expect("pseudo-response present");
                let fitted = run.map_candidates(&candidates, |d| {
                    select_family_default(v, run.u.column(d), config.criterion).map(|f| f.loglik)
                });
                let scores = fitted.into_iter().collect::<Result<Vec<_>>>()?;
                (scores, candidates.len(), None)
            }
            Method::ParCor => {
                let z = scores_z.as_ref().expect("normal scores present");
                let scores = run.map_candidates(&candidates, |d| {
                    partial_correlation(z, 0, d, &chosen).map_or(0.0, f64::abs)
                });
                (scores, 0, None)
            }
            Method::Baseline => {
                let trials = run
                    .map_candidates(&candidates, |d| run.extend(&state, d))
                    .into_iter()
                    .collect::<Result<Vec<_>>>()?;
                let scores = trials.iter().map(DVineFit::conditional_loglik).collect();
                let fits = trials.iter().map(DVineFit::last_extension_fits).sum();
                (scores, fits, Some(trials))
            }
        };
        let best = argmax(&scores);
        let var = candidates[best];
        let (next, ext_fits) = match trial {
            Some(mut trials) => (trials.swap_remove(best), 0),
            None => {
                let s = run.extend(&state, var)?;
                let f = s.last_extension_fits();
                (s, f)
            }
        };
        let new_aic = run.caic(&next);
        let accepted = config.exhaustive || new_aic < current_aic;
        let record = IterationRecord {
            iteration: iterations.len() + 1,
            candidate_scores: candidates.iter().copied().zip(scores.iter().copied()).collect(),
            chosen_var: var,
            score: scores[best],
            conditional_aic: new_aic,
            effective_dof: next.model().dof(),
            pair_copulas_fitted: fits + ext_fits,
            accepted,
        };
        log::info!(
            "iteration {}, chosen {}, score {:.6}, caic {:.4}, fits {}",
            record.iteration,
            var,
            record.score,
            new_aic,
            initial_fits
                + iterations.iter().map(|r| r.pair_copulas_fitted).sum::<usize>()
                + record.pair_copulas_fitted
        );
        iterations.push(record);
        if !accepted {
            break StopReason::AicWorsened;
        }
        state = next;
        current_aic = new_aic;
        chosen.push(var);
        candidates.remove(best);
        if config.method == Method::Res && !candidates.is_empty() && iterations.len() < cap {
            pseudo = Some(run.pseudo_response(&state)?);
        }
    };

    let trace = SelectionTrace {
        method: config.method,
        initial_aic,
        initial_fits,
        iterations,
        chosen,
        stop_reason,
    };
    assert!(
        trace.total_fits() <= fit_bound(config.method, p),
        "pair-copula fit count {} exceeds the bound for {}",
        trace.total_fits(),
        config.method
    );
    Ok((state.into_model(), trace))
}

/// Residual-based forward selection.
pub fn vinereg_res(data: &Dataset, config: &SelectionConfig) -> Result<(DVineModel, SelectionTrace)> {
    select(data, &SelectionConfig { method: Method::Res, ..config.clone() })
}

/// Partial-correlation-based forward selection.
pub fn vinereg_parcor(data: &Dataset, config: &SelectionConfig) -> Result<(DVineModel, SelectionTrace)> {
    select(data, &SelectionConfig { method: Method::ParCor, ..config.clone() })
}

/// Forward selection by full trial extensions.
pub fn vinereg_baseline(data: &Dataset, config: &SelectionConfig) -> Result<(DVineModel, SelectionTrace)> {
    select(data, &SelectionConfig { method: Method::Baseline, ..config.clone() })
}

/// Runs the method named in `config`.
pub fn fit(data: &Dataset, config: &SelectionConfig) -> Result<(DVineModel, SelectionTrace)> {
    select(data, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_cdf;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Gaussian sample with the given correlation matrix, columns `[y, x1, ..]`.
    pub(crate) fn gaussian_data(corr: &[&[f64]], n: usize, seed: u64) -> Dataset {
        let k = corr.len();
        let sigma = DMatrix::from_fn(k, k, |i, j| corr[i][j]);
        let l = sigma.cholesky().unwrap().l();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols = vec![Vec::with_capacity(n); k];
        for _ in 0..n {
            let z = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
            let x = &l * z;
            for j in 0..k {
                cols[j].push(x[j]);
            }
        }
        Dataset::new(cols).unwrap()
    }

    const EXAMPLE: [&[f64]; 3] = [&[1.0, 0.5, 0.4], &[0.5, 1.0, 0.8], &[0.4, 0.8, 1.0]];

    #[test]
    fn normal_scores_by_hand() {
        let d = Dataset::new(vec![vec![1.0, 2.0, 3.0], vec![3.0, 1.0, 2.0]]).unwrap();
        let z = normal_scores(&d).unwrap();
        let expected = [-0.674_489_750_196_081_7, 0.0, 0.674_489_750_196_081_7];
        for (a, b) in z.column(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((z.column(1)[0] - expected[2]).abs() < 1e-12);
        let c = Dataset::new(vec![vec![1.0; 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]]).unwrap();
        assert!(normal_scores(&c).is_err());
    }

    #[test]
    fn average_ranks_handle_ties() {
        assert_eq!(average_ranks(&[2.0, 1.0, 2.0, 3.0]), vec![2.5, 1.0, 2.5, 4.0]);
    }

    #[test]
    fn population_partial_correlation_is_zero() {
        let r: [f64; 3] = [0.5, 0.4, 0.8];
        let pc = (r[1] - r[0] * r[2]) / ((1.0 - r[0] * r[0]) * (1.0 - r[2] * r[2])).sqrt();
        assert!(pc.abs() < 1e-15);
    }

    #[test]
    fn sample_partial_correlation_near_zero() {
        let d = gaussian_data(&EXAMPLE, 2000, 3);
        let z = normal_scores(&d).unwrap();
        let pc = partial_correlation(&z, 0, 2, &[1]).unwrap();
        assert!(pc.abs() < 0.06, "{pc}");
        let plain = partial_correlation(&z, 0, 1, &[]).unwrap();
        assert!((plain - pearson(z.column(0), z.column(1))).abs() < 1e-15);
        assert!((plain - 0.5).abs() < 0.05);
    }

    #[test]
    fn partial_correlation_matches_residual_regression() {
        let d = gaussian_data(&EXAMPLE, 500, 8);
        let z = normal_scores(&d).unwrap();
        let via_inverse = partial_correlation(&z, 0, 2, &[1]).unwrap();
        let ra = residuals(z.column(0), &[z.column(1)]).unwrap();
        let rb = residuals(z.column(2), &[z.column(1)]).unwrap();
        assert!((via_inverse - pearson(&ra, &rb)).abs() < 1e-10);
    }

    #[test]
    fn collinear_conditioning_falls_back() {
        let d = gaussian_data(&EXAMPLE, 200, 1);
        let mut cols = d.columns().to_vec();
        cols.push(cols[1].clone());
        let d = Dataset::new(cols).unwrap();
        let z = normal_scores(&d).unwrap();
        let r = partial_correlation(&z, 0, 2, &[1, 3]).unwrap();
        let direct = partial_correlation(&z, 0, 2, &[1]).unwrap();
        assert!((r - direct).abs() < 1e-8);
        // a variable identical to the conditioning set has no residual left
        assert!(matches!(partial_correlation(&z, 0, 3, &[1]), Err(Error::Collinear(_))));
    }

    #[test]
    fn caic_identities() {
        let d = gaussian_data(&EXAMPLE, 300, 5);
        let run_cfg = SelectionConfig::new(Method::ParCor);
        let run = Run::new(&d, &run_cfg).unwrap();
        let s0 = DVineFit::new(DVineModel::response_only(run.margins[0].clone()), &run.u).unwrap();
        let c0 = caic(s0.model(), &d).unwrap();
        let by_hand: f64 = -2.0 * d.response().iter().map(|&y| run.margins[0].ln_pdf(y)).sum::<f64>();
        assert!((c0 - by_hand).abs() < 1e-9);
        let s1 = run.extend(&s0, 1).unwrap();
        let s2 = run.extend(&s1, 2).unwrap();
        let (c1, c2) = (caic(s1.model(), &d).unwrap(), caic(s2.model(), &d).unwrap());
        assert!((c1 - run.caic(&s1)).abs() < 1e-8);
        let dll = s2.model().conditional_loglik(&run.u).unwrap() - s1.model().conditional_loglik(&run.u).unwrap();
        let ddof = s2.model().dof() as f64 - s1.model().dof() as f64;
        assert!(((c2 - c1) - (-2.0 * dll + 2.0 * ddof)).abs() < 1e-8);
    }

    #[test]
    fn exhaustive_fit_counts() {
        let p = 4;
        let corr: Vec<Vec<f64>> = (0..=p)
            .map(|i| (0..=p).map(|j| 0.5f64.powi((i as i32 - j as i32).abs())).collect())
            .collect();
        let rows: Vec<&[f64]> = corr.iter().map(Vec::as_slice).collect();
        let d = gaussian_data(&rows, 200, 11);
        for (method, expected) in [
            (Method::Res, p * (p + 1)),
            (Method::ParCor, p * (p + 1) / 2),
            (Method::Baseline, 20),
        ] {
            let mut cfg = SelectionConfig::new(method);
            cfg.exhaustive = true;
            let (model, trace) = fit(&d, &cfg).unwrap();
            assert_eq!(trace.total_fits(), expected, "{method}");
            assert_eq!(model.dim(), p + 1);
            assert_eq!(trace.stop_reason, StopReason::AllVariables);
            if method == Method::Baseline {
                let per_iter: Vec<usize> = trace.iterations.iter().map(|r| r.pair_copulas_fitted).collect();
                assert_eq!(per_iter, vec![4, 6, 6, 4]);
            }
        }
    }

    #[test]
    fn fit_counts_from_a_given_state() {
        let p = 4;
        let corr: Vec<Vec<f64>> = (0..=p)
            .map(|i| (0..=p).map(|j| if i == j { 1.0 } else { 0.3 }).collect())
            .collect();
        let rows: Vec<&[f64]> = corr.iter().map(Vec::as_slice).collect();
        let d = gaussian_data(&rows, 200, 12);
        let mut counts = Vec::new();
        for method in [Method::Baseline, Method::Res, Method::ParCor] {
            let mut cfg = SelectionConfig::new(method);
            cfg.initial_order = vec![2, 1];
            cfg.exhaustive = true;
            cfg.max_iterations = Some(1);
            let (_, trace) = fit(&d, &cfg).unwrap();
            assert_eq!(trace.initial_fits, 3);
            assert_eq!(trace.iterations[0].candidate_scores.len(), 2);
            counts.push(trace.iterations[0].pair_copulas_fitted);
        }
        assert_eq!(counts, vec![6, 5, 3]);
    }

    #[test]
    fn single_candidate_baseline_fits_model_size() {
        let d = gaussian_data(&EXAMPLE, 100, 2);
        let mut cfg = SelectionConfig::new(Method::Baseline);
        cfg.initial_order = vec![2];
        cfg.exhaustive = true;
        let (_, trace) = fit(&d, &cfg).unwrap();
        assert_eq!(trace.iterations[0].pair_copulas_fitted, 2);
    }

    #[test]
    fn example_selects_first_variable_only() {
        for method in [Method::Res, Method::ParCor] {
            let d = gaussian_data(&EXAMPLE, 450, 77);
            let (model, trace) = fit(&d, &SelectionConfig::new(method)).unwrap();
            assert_eq!(trace.chosen.first(), Some(&1), "{method}");
            assert_eq!(model.explanatory()[0], 1);
            let accepted: Vec<f64> = std::iter::once(trace.initial_aic)
                .chain(trace.iterations.iter().filter(|r| r.accepted).map(|r| r.conditional_aic))
                .collect();
            assert!(accepted.windows(2).all(|w| w[1] < w[0]));
            assert!((trace.final_aic() - caic(&model, &d).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic_with_and_without_parallelism() {
        let d = gaussian_data(&EXAMPLE, 200, 4);
        for method in [Method::Res, Method::ParCor, Method::Baseline] {
            let mut cfg = SelectionConfig::new(method);
            let (m1, t1) = fit(&d, &cfg).unwrap();
            cfg.parallel_candidates = false;
            let (m2, t2) = fit(&d, &cfg).unwrap();
            assert_eq!(t1, t2);
            assert_eq!(m1, m2);
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(argmax(&[0.3, 0.5, 0.5, 0.1]), 1);
        assert_eq!(argmax(&[f64::NAN, 0.1]), 1);
        let d = gaussian_data(&EXAMPLE, 100, 9);
        let mut cols = d.columns().to_vec();
        cols[2] = cols[1].clone();
        let d = Dataset::new(cols).unwrap();
        let (_, trace) = fit(&d, &SelectionConfig::new(Method::ParCor)).unwrap();
        assert_eq!(trace.iterations[0].chosen_var, 1);
    }

    #[test]
    fn rejects_bad_input() {
        let d = gaussian_data(&EXAMPLE, 20, 1);
        assert!(fit(&d, &SelectionConfig::new(Method::Res)).is_err());
        let d = gaussian_data(&EXAMPLE, 100, 1);
        let mut cfg = SelectionConfig::new(Method::Res);
        cfg.pseudo_response_quantile = 1.0;
        assert!(fit(&d, &cfg).is_err());
        cfg = SelectionConfig::new(Method::Res);
        cfg.initial_order = vec![3];
        assert!(fit(&d, &cfg).is_err());
        assert!(Dataset::new(vec![vec![1.0, f64::NAN]]).is_err());
        assert!("lasso".parse::<Method>().is_err());
        assert_eq!("ParCor".parse::<Method>().unwrap(), Method::ParCor);
    }

    #[test]
    fn trace_serializes() {
        let d = gaussian_data(&EXAMPLE, 100, 6);
        let (_, trace) = fit(&d, &SelectionConfig::new(Method::ParCor)).unwrap();
        let s = serde_json::to_string(&trace).unwrap();
        assert!(s.contains("\"stop_reason\":\"aic-worsened\"") || s.contains("all-variables"));
        let back: SelectionTrace = serde_json::from_str(&s).unwrap();
        assert_eq!(back, trace);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn prop_normal_scores_rank_invariant(seed in 0u64..1000, shift in -5.0f64..5.0, scale in 0.1f64..10.0) {
            let d = gaussian_data(&EXAMPLE, 40, seed);
            let mut cols = d.columns().to_vec();
            cols[1] = cols[1].iter().map(|x| (scale * x + shift).exp()).collect();
            let t = Dataset::new(cols).unwrap();
            let (zd, zt) = (normal_scores(&d).unwrap(), normal_scores(&t).unwrap());
            prop_assert_eq!(zd.column(1), zt.column(1));
        }

        #[test]
        fn prop_parcor_first_choice_rank_invariant(seed in 0u64..1000) {
            let d = gaussian_data(&EXAMPLE, 60, seed);
            let mut cfg = SelectionConfig::new(Method::ParCor);
            cfg.max_iterations = Some(1);
            cfg.exhaustive = true;
            let (_, t1) = fit(&d, &cfg).unwrap();
            let mut cols = d.columns().to_vec();
            cols[1] = cols[1].iter().map(|&x| norm_cdf(x).powi(3)).collect();
            cols[2] = cols[2].iter().map(|&x| x.powi(3) + x).collect();
            let (_, t2) = fit(&Dataset::new(cols).unwrap(), &cfg).unwrap();
            prop_assert_eq!(t1.chosen[0], t2.chosen[0]);
        }
    }
}
