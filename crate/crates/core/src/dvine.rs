//! D-vine copula models with the response as the first leaf.
//!
//! Positions `0..m` of the order form a path. Tree `t` (1-based) holds the
//! copulas of positions `(e, e + t)` given `e+1..e+t-1`, stored as
//! `pair_copulas[t - 1][e]` with position `e` as first argument.

use crate::bicop::{select_family_default, Bicop, Criterion, Family, FittedBicop, Rotation};
use crate::margins::MarginalModel;
use crate::{clamp_unit, Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Version tag written into model JSON.
pub const MODEL_SCHEMA: u32 = 1;

/// Variable order of a D-vine; the response (id 0) comes first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DVineOrder(Vec<usize>);

impl DVineOrder {
    pub fn response_only() -> Self {
        DVineOrder(vec![0])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, var: usize) -> bool {
        self.0.contains(&var)
    }
}

impl TryFrom<Vec<usize>> for DVineOrder {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        if v.first() != Some(&0) {
            return Err(Error::InvalidInput("D-vine order must start with the response 0".into()));
        }
        let mut seen = v.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != v.len() {
            return Err(Error::InvalidInput(format!("duplicate variable in order {v:?}")));
        }
        Ok(DVineOrder(v))
    }
}

impl From<DVineOrder> for Vec<usize> {
    fn from(o: DVineOrder) -> Self {
        o.0
    }
}

/// Copula-scale observations, one column per variable id (column 0 is the response).
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSample {
    columns: Vec<Vec<f64>>,
}

impl PseudoSample {
    /// Values are clamped into `[EPS_UNIT, 1 - EPS_UNIT]`.
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.is_empty() || n == 0 {
            return Err(Error::InvalidInput("pseudo-sample is empty".into()));
        }
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput("pseudo-sample columns differ in length".into()));
        }
        if columns.iter().flatten().any(|u| !(0.0..=1.0).contains(u)) {
            return Err(Error::InvalidInput("pseudo-observation outside [0, 1]".into()));
        }
        let columns = columns
            .into_iter()
            .map(|c| c.into_iter().map(clamp_unit).collect())
            .collect();
        Ok(PseudoSample { columns })
    }

    /// Transforms raw columns through their margins.
    pub fn from_margins(raw: &[Vec<f64>], margins: &[MarginalModel]) -> Result<Self> {
        if raw.len() != margins.len() {
            return Err(Error::InvalidInput("one margin per column required".into()));
        }
        let cols = raw
            .iter()
            .zip(margins)
            .map(|(c, m)| c.iter().map(|&x| m.pit(x)).collect())
            .collect();
        PseudoSample::new(cols)
    }

    pub fn n_obs(&self) -> usize {
        self.columns[0].len()
    }

    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, var: usize) -> &[f64] {
        &self.columns[var]
    }

    /// Replaces column `var`, keeping the clamping invariant.
    pub fn with_column(&self, var: usize, values: &[f64]) -> Result<Self> {
        let mut cols = self.columns.clone();
        cols[var] = values.to_vec();
        PseudoSample::new(cols)
    }
}

/// Quantities of one observation obtained by the forward h-recursion.
struct Forward {
    /// `F(pos m-t | m-t+1..m-1)` for `t = 1..=m`; the last entry is the
    /// conditional CDF of the response.
    left_diag: Vec<f64>,
    /// `F(pos t | 1..t-1)` for `t = 1..m`, index `t - 1`.
    cond_args: Vec<f64>,
    cll: f64,
}

/// A fitted D-vine regression model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelJson", into = "ModelJson")]
pub struct DVineModel {
    order: DVineOrder,
    pair_copulas: Vec<Vec<FittedBicop>>,
    margins: BTreeMap<usize, MarginalModel>,
    truncation: Option<usize>,
}

impl DVineModel {
    /// The model with no explanatory variables.
    pub fn response_only(response_margin: MarginalModel) -> Self {
        DVineModel {
            order: DVineOrder::response_only(),
            pair_copulas: Vec::new(),
            margins: BTreeMap::from([(0, response_margin)]),
            truncation: None,
        }
    }

    /// Assembles a model, checking the triangular shape, margins and truncation.
    pub fn from_parts(
        order: Vec<usize>,
        pair_copulas: Vec<Vec<FittedBicop>>,
        margins: BTreeMap<usize, MarginalModel>,
        truncation: Option<usize>,
    ) -> Result<Self> {
        let order = DVineOrder::try_from(order)?;
        let m = order.len();
        if pair_copulas.len() != m - 1 {
            return Err(Error::InvalidInput(format!(
                "{m} variables need {} trees, got {}",
                m - 1,
                pair_copulas.len()
            )));
        }
        for (i, tree) in pair_copulas.iter().enumerate() {
            if tree.len() != m - 1 - i {
                return Err(Error::InvalidInput(format!(
                    "tree {} must hold {} pair copulas, got {}",
                    i + 1,
                    m - 1 - i,
                    tree.len()
                )));
            }
        }
        if let Some(v) = order.as_slice().iter().find(|v| !margins.contains_key(v)) {
            return Err(Error::InvalidInput(format!("missing margin for variable {v}")));
        }
        if let Some(k) = truncation {
            if k == 0 {
                return Err(Error::InvalidInput("truncation level must be at least 1".into()));
            }
            if pair_copulas.iter().skip(k).flatten().any(|c| !c.is_independence()) {
                return Err(Error::InvalidInput(format!(
                    "trees above truncation level {k} must be independence"
                )));
            }
        }
        Ok(DVineModel {
            order,
            pair_copulas,
            margins,
            truncation,
        })
    }

    pub fn order(&self) -> &[usize] {
        self.order.as_slice()
    }

    /// Explanatory variables in order of inclusion.
    pub fn explanatory(&self) -> &[usize] {
        &self.order.as_slice()[1..]
    }

    pub fn dim(&self) -> usize {
        self.order.len()
    }

    pub fn truncation(&self) -> Option<usize> {
        self.truncation
    }

    pub fn pair_copulas(&self) -> &[Vec<FittedBicop>] {
        &self.pair_copulas
    }

    /// Copula of tree `t` (1-based), edge `e` (0-based).
    pub fn pair_copula(&self, t: usize, e: usize) -> &FittedBicop {
        &self.pair_copulas[t - 1][e]
    }

    pub fn margin(&self, var: usize) -> Option<&MarginalModel> {
        self.margins.get(&var)
    }

    pub fn margins(&self) -> &BTreeMap<usize, MarginalModel> {
        &self.margins
    }

    pub fn response_margin(&self) -> &MarginalModel {
        &self.margins[&0]
    }

    /// Parameter count over all non-independence pair copulas.
    pub fn dof(&self) -> usize {
        self.pair_copulas.iter().flatten().map(|c| c.n_params()).sum()
    }

    pub fn n_pair_copulas(&self) -> usize {
        self.pair_copulas.iter().map(Vec::len).sum()
    }

    /// Copy with every tree above `level` replaced by independence.
    pub fn truncated(&self, level: usize) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidInput("truncation level must be at least 1".into()));
        }
        let mut out = self.clone();
        for tree in out.pair_copulas.iter_mut().skip(level) {
            for c in tree.iter_mut() {
                *c = FittedBicop::independence(c.n_obs);
            }
        }
        out.truncation = Some(level);
        Ok(out)
    }

    /// Adds `new_var` as the new right end, fitting one copula per tree.
    pub fn extend_fit(
        &self,
        data: &PseudoSample,
        new_var: usize,
        margin: MarginalModel,
        criterion: Criterion,
    ) -> Result<DVineModel> {
        Ok(DVineFit::new(self.clone(), data)?
            .extend(data, new_var, margin, criterion)?
            .into_model())
    }

    fn forward(&self, u: &[f64]) -> Forward {
        let m = u.len();
        let mut left_diag = Vec::with_capacity(m);
        left_diag.push(u[m - 1]);
        let mut cond_args = Vec::with_capacity(m.saturating_sub(1));
        let mut cll = 0.0;
        if m == 1 {
            return Forward {
                left_diag,
                cond_args,
                cll,
            };
        }
        let mut l = u[..m - 1].to_vec();
        let mut r = u[1..].to_vec();
        for t in 1..m {
            let tree = &self.pair_copulas[t - 1];
            let edges = m - t;
            cond_args.push(r[0]);
            cll += tree[0].ln_pdf(l[0], r[0]);
            let next_l: Vec<f64> = (0..edges).map(|e| tree[e].h2(l[e], r[e])).collect();
            let next_r: Vec<f64> = (1..edges).map(|e| tree[e].h1(l[e], r[e])).collect();
            left_diag.push(next_l[edges - 1]);
            l = next_l;
            l.truncate(edges - 1);
            r = next_r;
        }
        Forward {
            left_diag,
            cond_args,
            cll,
        }
    }

    fn row(&self, data: &PseudoSample, i: usize) -> Vec<f64> {
        self.order().iter().map(|&v| data.column(v)[i]).collect()
    }

    fn check_data(&self, data: &PseudoSample) -> Result<()> {
        match self.order().iter().find(|&&v| v >= data.n_vars()) {
            Some(v) => Err(Error::InvalidInput(format!("pseudo-sample lacks variable {v}"))),
            None => Ok(()),
        }
    }

    /// Per-observation conditional log-likelihood terms (response margin excluded).
    pub fn conditional_loglik_terms(&self, data: &PseudoSample) -> Result<Vec<f64>> {
        self.check_data(data)?;
        Ok((0..data.n_obs())
            .map(|i| self.forward(&self.row(data, i)).cll)
            .collect())
    }

    pub fn conditional_loglik(&self, data: &PseudoSample) -> Result<f64> {
        Ok(self.conditional_loglik_terms(data)?.iter().sum())
    }

    /// Copula-scale row from raw explanatory values, `x_row[var - 1]`.
    fn u_from_x(&self, x_row: &[f64], u_response: f64) -> Result<Vec<f64>> {
        self.order()
            .iter()
            .map(|&v| {
                if v == 0 {
                    return Ok(u_response);
                }
                let x = x_row.get(v - 1).ok_or_else(|| {
                    Error::InvalidInput(format!("row has no value for variable {v}"))
                })?;
                Ok(self.margins[&v].pit(*x))
            })
            .collect()
    }

    /// Conditional quantile on the copula scale given a row ordered like the model.
    fn quantile_u(&self, u: &[f64], alpha: f64) -> Result<f64> {
        let fwd = self.forward(u);
        let mut w = clamp_unit(alpha);
        for t in (1..self.dim()).rev() {
            w = self.pair_copulas[t - 1][0].hinv2(w, fwd.cond_args[t - 1])?;
        }
        Ok(w)
    }

    /// `C^{-1}(alpha | u)` for observation `i` of a pseudo-sample.
    pub fn conditional_quantile_pseudo(&self, data: &PseudoSample, i: usize, alpha: f64) -> Result<f64> {
        self.check_data(data)?;
        self.quantile_u(&self.row(data, i), alpha)
    }

    /// Conditional `alpha`-quantile of the response; `x_row[j - 1]` is the
    /// raw value of explanatory variable `j`.
    pub fn conditional_quantile(&self, x_row: &[f64], alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidInput(format!("quantile level {alpha} not in (0, 1)")));
        }
        let u = self.u_from_x(x_row, 0.5)?;
        let w = self.quantile_u(&u, alpha)?;
        Ok(self.response_margin().quantile(w))
    }

    /// Conditional CDF of the response at `y`.
    pub fn conditional_cdf(&self, x_row: &[f64], y: f64) -> Result<f64> {
        let u = self.u_from_x(x_row, self.response_margin().pit(y))?;
        let fwd = self.forward(&u);
        Ok(clamp_unit(fwd.left_diag[fwd.left_diag.len() - 1]))
    }

    /// Draws `n` rows from the vine copula; columns follow the model order.
    pub fn sample_u<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let m = self.dim();
        let mut cols = vec![vec![0.0; n]; m];
        for i in 0..n {
            let mut left: Vec<f64> = Vec::new();
            for k in 0..m {
                let w: f64 = clamp_unit(rng.random());
                if k == 0 {
                    cols[0][i] = w;
                    left = vec![w];
                    continue;
                }
                let mut v = w;
                for t in (1..=k).rev() {
                    v = self.pair_copulas[t - 1][k - t].hinv1(v, left[t - 1])?;
                }
                cols[k][i] = v;
                let mut next = Vec::with_capacity(k + 1);
                next.push(v);
                let mut r = v;
                for t in 1..=k {
                    let c = &self.pair_copulas[t - 1][k - t];
                    next.push(c.h2(left[t - 1], r));
                    r = c.h1(left[t - 1], r);
                }
                left = next;
            }
        }
        Ok(cols)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("model JSON: {e}")))
    }
}

/// A model together with the conditional pseudo-observations needed to
/// extend it, so that each extension fits only the new diagonal.
#[derive(Debug, Clone)]
pub struct DVineFit {
    model: DVineModel,
    left_diag: Vec<Vec<f64>>,
    cll_terms: Vec<f64>,
    last_fits: usize,
}

impl DVineFit {
    /// Runs the forward recursion of `model` over `data`.
    pub fn new(model: DVineModel, data: &PseudoSample) -> Result<Self> {
        model.check_data(data)?;
        let m = model.dim();
        let n = data.n_obs();
        let mut left_diag = vec![Vec::with_capacity(n); m];
        let mut cll_terms = Vec::with_capacity(n);
        for i in 0..n {
            let f = model.forward(&model.row(data, i));
            for (col, v) in left_diag.iter_mut().zip(f.left_diag) {
                col.push(v);
            }
            cll_terms.push(f.cll);
        }
        Ok(DVineFit {
            model,
            left_diag,
            cll_terms,
            last_fits: 0,
        })
    }

    pub fn model(&self) -> &DVineModel {
        &self.model
    }

    pub fn into_model(self) -> DVineModel {
        self.model
    }

    pub fn conditional_loglik(&self) -> f64 {
        self.cll_terms.iter().sum()
    }

    pub fn conditional_loglik_terms(&self) -> &[f64] {
        &self.cll_terms
    }

    /// Pair copulas estimated by the extension that produced this state.
    pub fn last_extension_fits(&self) -> usize {
        self.last_fits
    }

    /// Conditional CDF of the response given all included variables, per observation.
    pub fn response_cdf(&self) -> &[f64] {
        &self.left_diag[self.left_diag.len() - 1]
    }

    pub fn extend(
        &self,
        data: &PseudoSample,
        new_var: usize,
        margin: MarginalModel,
        criterion: Criterion,
    ) -> Result<DVineFit> {
        if self.model.order.contains(new_var) {
            return Err(Error::InvalidInput(format!("variable {new_var} already in the model")));
        }
        if new_var >= data.n_vars() {
            return Err(Error::InvalidInput(format!("pseudo-sample lacks variable {new_var}")));
        }
        let m = self.model.dim();
        let n = data.n_obs();
        let mut r = data.column(new_var).to_vec();
        let mut new_left = vec![r.clone()];
        let mut new_copulas = Vec::with_capacity(m);
        let mut cll_terms = self.cll_terms.clone();
        let mut fits = 0;
        for t in 1..=m {
            let l = &self.left_diag[t - 1];
            let cop = match self.model.truncation {
                Some(k) if t > k => FittedBicop::independence(n),
                _ => {
                    fits += 1;
                    select_family_default(l, &r, criterion)?
                }
            };
            if t == m {
                for (c, (a, b)) in cll_terms.iter_mut().zip(l.iter().zip(&r)) {
                    *c += cop.ln_pdf(*a, *b);
                }
            }
            new_left.push(l.iter().zip(&r).map(|(a, b)| cop.h2(*a, *b)).collect());
            r = l.iter().zip(&r).map(|(a, b)| cop.h1(*a, *b)).collect();
            new_copulas.push(cop);
        }
        let mut model = self.model.clone();
        model.order.0.push(new_var);
        for (t, cop) in new_copulas.into_iter().enumerate() {
            if t < model.pair_copulas.len() {
                model.pair_copulas[t].push(cop);
            } else {
                model.pair_copulas.push(vec![cop]);
            }
        }
        model.margins.insert(new_var, margin);
        Ok(DVineFit {
            model,
            left_diag: new_left,
            cll_terms,
            last_fits: fits,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PairJson {
    family: Family,
    rotation: Rotation,
    params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loglik: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_obs: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct MarginJson {
    var: usize,
    sample: Vec<f64>,
    bandwidth: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    #[serde(default = "default_schema")]
    schema: u32,
    order: Vec<usize>,
    truncation: Option<usize>,
    pair_copulas: Vec<Vec<PairJson>>,
    margins: Vec<MarginJson>,
}

fn default_schema() -> u32 {
    MODEL_SCHEMA
}

impl From<DVineModel> for ModelJson {
    fn from(m: DVineModel) -> Self {
        ModelJson {
            schema: MODEL_SCHEMA,
            order: m.order.0,
            truncation: m.truncation,
            pair_copulas: m
                .pair_copulas
                .into_iter()
                .map(|tree| {
                    tree.into_iter()
                        .map(|c| PairJson {
                            family: c.family(),
                            rotation: c.rotation(),
                            params: c.params().to_vec(),
                            loglik: c.loglik.is_finite().then_some(c.loglik),
                            n_obs: Some(c.n_obs),
                        })
                        .collect()
                })
                .collect(),
            margins: m
                .margins
                .into_iter()
                .map(|(var, mm)| MarginJson {
                    var,
                    sample: mm.sample().to_vec(),
                    bandwidth: mm.bandwidth(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelJson> for DVineModel {
    type Error = Error;
    fn try_from(j: ModelJson) -> Result<Self> {
        if j.schema != MODEL_SCHEMA {
            return Err(Error::InvalidInput(format!("unsupported model schema {}", j.schema)));
        }
        let pair_copulas = j
            .pair_copulas
            .into_iter()
            .map(|tree| {
                tree.into_iter()
                    .map(|p| {
                        let c = Bicop::new(p.family, p.rotation, &p.params)?;
                        Ok(FittedBicop::new(c, p.loglik.unwrap_or(f64::NAN), p.n_obs.unwrap_or(0)))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut margins = BTreeMap::new();
        for mj in j.margins {
            let mm = MarginalModel::with_bandwidth(mj.sample, mj.bandwidth)?;
            if margins.insert(mj.var, mm).is_some() {
                return Err(Error::InvalidInput(format!("duplicate margin for variable {}", mj.var)));
            }
        }
        DVineModel::from_parts(j.order, pair_copulas, margins, j.truncation)
    }
}
