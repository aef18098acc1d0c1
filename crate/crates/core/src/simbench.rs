//! Simulated benchmark data, performance metrics and the replication runner.

use crate::dvine::DVineModel;
use crate::select::{fit, Dataset, Method, SelectionConfig};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Quantile levels evaluated by the benchmark.
pub const LEVELS: [f64; 3] = [0.05, 0.5, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dgp {
    Dgp1,
    Dgp2,
}

impl Dgp {
    pub fn number(self) -> usize {
        match self {
            Dgp::Dgp1 => 1,
            Dgp::Dgp2 => 2,
        }
    }

    /// Size of the always-relevant block.
    pub fn n_relevant(self) -> usize {
        match self {
            Dgp::Dgp1 => 5,
            Dgp::Dgp2 => 10,
        }
    }

    /// Explanatory variable count of a numbered case.
    pub fn case_p(self, case: usize) -> Option<usize> {
        let table: &[usize] = match self {
            Dgp::Dgp1 => &[10, 20, 50],
            Dgp::Dgp2 => &[20, 40, 100, 1000],
        };
        case.checked_sub(1).and_then(|i| table.get(i).copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub dgp: Dgp,
    pub case: Option<usize>,
    pub p: usize,
    pub n: usize,
    pub n_train: usize,
    pub sigma: f64,
    /// Toeplitz base of the correlated block.
    pub rho: f64,
    pub seed: u64,
}

impl DgpConfig {
    /// Explanatory count `p`; a case number outside the table gives `p = 0`,
    /// which the generators reject.
    pub fn new(dgp: Dgp, p: usize, seed: u64) -> Self {
        DgpConfig {
            dgp,
            case: None,
            p,
            n: 450,
            n_train: 300,
            sigma: 1.0,
            rho: 0.75,
            seed,
        }
    }

    pub fn dgp1(case: usize, seed: u64) -> Self {
        DgpConfig {
            case: Some(case),
            ..DgpConfig::new(Dgp::Dgp1, Dgp::Dgp1.case_p(case).unwrap_or(0), seed)
        }
    }

    pub fn dgp2(case: usize, seed: u64) -> Self {
        DgpConfig {
            case: Some(case),
            ..DgpConfig::new(Dgp::Dgp2, Dgp::Dgp2.case_p(case).unwrap_or(0), seed)
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        DgpConfig { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub relevant: Vec<usize>,
    pub irrelevant: Vec<usize>,
    pub redundant: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSample {
    pub train: Dataset,
    pub test: Dataset,
    pub labels: Labels,
}

/// Lower Cholesky factor of `Sigma[a][b] = rho^|a-b|`, in closed form.
pub fn toeplitz_cholesky(p: usize, rho: f64) -> DMatrix<f64> {
    let s = (1.0 - rho * rho).sqrt();
    DMatrix::from_fn(p, p, |i, j| {
        if j > i {
            0.0
        } else if j == 0 {
            rho.powi(i as i32)
        } else {
            rho.powi((i - j) as i32) * s
        }
    })
}

/// Draws `x = L z` for the Toeplitz factor `L` without forming it: row `k`
/// of `L z` equals `rho * x[k-1] + sqrt(1 - rho^2) * z[k]`.
fn toeplitz_draw<R: rand::Rng>(x: &mut [f64], rho: f64, rng: &mut R) {
    let s = (1.0 - rho * rho).sqrt();
    for k in 0..x.len() {
        let z: f64 = StandardNormal.sample(rng);
        x[k] = if k == 0 { z } else { rho * x[k - 1] + s * z };
    }
}

fn validate(cfg: &DgpConfig, dgp: Dgp) -> Result<()> {
    if cfg.dgp != dgp {
        return Err(Error::InvalidInput(format!("config is for {:?}", cfg.dgp)));
    }
    let min_p = dgp.n_relevant();
    if cfg.p < min_p {
        return Err(Error::InvalidInput(format!(
            "{dgp:?} needs p >= {min_p}, got {}",
            cfg.p
        )));
    }
    if cfg.n_train == 0 || cfg.n_train > cfg.n {
        return Err(Error::InvalidInput("training size must lie in 1..=n".into()));
    }
    if !(cfg.sigma >= 0.0) || !(cfg.rho.abs() < 1.0) {
        return Err(Error::InvalidInput("sigma must be >= 0 and |rho| < 1".into()));
    }
    Ok(())
}

fn split(cfg: &DgpConfig, rows: Vec<Vec<f64>>, rng: &mut ChaCha8Rng, labels: Labels) -> Result<DgpSample> {
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.shuffle(rng);
    let pick = |ids: &[usize]| {
        let r: Vec<Vec<f64>> = ids.iter().map(|&i| rows[i].clone()).collect();
        Dataset::from_rows(&r)
    };
    let train = pick(&idx[..cfg.n_train])?;
    let test = if cfg.n_train < cfg.n {
        pick(&idx[cfg.n_train..])?
    } else {
        Dataset::new(vec![Vec::new(); cfg.p + 1])?
    };
    Ok(DgpSample { train, test, labels })
}

fn dgp1_response(x: &[f64]) -> f64 {
    x[0] * x[1] * x[1] * (x[2].abs() + 0.1).sqrt() + (0.4 * x[3] * x[4]).exp()
}

fn dgp2_response(x: &[f64]) -> f64 {
    (5.0 * x[0] - 2.0 * x[8] + 0.5).abs().sqrt()
        + x[7] * (-4.0 * x[2] + 1.0)
        + x[5].exp()
        + (2.0 * x[9].powi(3) + x[3].powi(3))
        + (x[6] + 1.0) * ((x[1] + x[4]).abs() + 0.01).ln()
}

/// Five Toeplitz-correlated relevant variables, the rest independent noise.
pub fn gen_dgp1(cfg: &DgpConfig) -> Result<DgpSample> {
    validate(cfg, Dgp::Dgp1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows = (0..cfg.n)
        .map(|_| {
            let mut x = vec![0.0; cfg.p];
            toeplitz_draw(&mut x[..5], cfg.rho, &mut rng);
            for v in &mut x[5..] {
                *v = StandardNormal.sample(&mut rng);
            }
            let e: f64 = StandardNormal.sample(&mut rng);
            let y = dgp1_response(&x) + cfg.sigma * e;
            std::iter::once(y).chain(x).collect()
        })
        .collect();
    let labels = Labels {
        relevant: (1..=5).collect(),
        irrelevant: (6..=cfg.p).collect(),
        redundant: Vec::new(),
    };
    split(cfg, rows, &mut rng, labels)
}

/// All variables Toeplitz-correlated; beyond the first ten they are redundant.
pub fn gen_dgp2(cfg: &DgpConfig) -> Result<DgpSample> {
    validate(cfg, Dgp::Dgp2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows = (0..cfg.n)
        .map(|_| {
            let mut x = vec![0.0; cfg.p];
            toeplitz_draw(&mut x, cfg.rho, &mut rng);
            let e: f64 = StandardNormal.sample(&mut rng);
            let y = dgp2_response(&x) + cfg.sigma * e;
            std::iter::once(y).chain(x).collect()
        })
        .collect();
    let labels = Labels {
        relevant: (1..=10).collect(),
        irrelevant: Vec::new(),
        redundant: (11..=cfg.p).collect(),
    };
    split(cfg, rows, &mut rng, labels)
}

pub fn generate(cfg: &DgpConfig) -> Result<DgpSample> {
    match cfg.dgp {
        Dgp::Dgp1 => gen_dgp1(cfg),
        Dgp::Dgp2 => gen_dgp2(cfg),
    }
}

/// True positive rate and false discovery rate of a chosen set.
pub fn tpr_fdr(chosen: &[usize], labels: &Labels) -> (f64, f64) {
    let hits = chosen.iter().filter(|v| labels.relevant.contains(v)).count();
    let false_hits = chosen.iter().filter(|v| labels.irrelevant.contains(v)).count();
    let tpr = if labels.relevant.is_empty() {
        0.0
    } else {
        hits as f64 / labels.relevant.len() as f64
    };
    let fdr = if chosen.is_empty() {
        0.0
    } else {
        false_hits as f64 / chosen.len() as f64
    };
    (tpr, fdr)
}

/// Average check loss of predictions `yhat` at level `alpha`.
pub fn pinball(y: &[f64], yhat: &[f64], alpha: f64) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::InvalidInput(format!(
            "{} observations but {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("level {alpha} not in (0, 1)")));
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = y
        .iter()
        .zip(yhat)
        .map(|(&y, &q)| (q - y) * (f64::from(u8::from(y <= q)) - alpha))
        .sum();
    Ok(total / y.len() as f64)
}

/// Quantile predictions for every row of `data`, one vector per level.
pub fn predict(model: &DVineModel, data: &Dataset, levels: &[f64]) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = (0..data.n_obs())
        .into_par_iter()
        .map(|i| {
            let x = &data.row(i)[1..];
            levels
                .iter()
                .map(|&a| model.conditional_quantile(x, a))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..levels.len())
        .map(|k| rows.iter().map(|r| r[k]).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tpr: f64,
    pub fdr: f64,
    pub chosen_count: usize,
    /// `(alpha, loss)` for each level in [`LEVELS`].
    pub pinball: Vec<(f64, f64)>,
    /// Test rows whose predicted quantiles decrease somewhere along the levels.
    pub crossings: usize,
    pub wall_time: f64,
}

/// Rows of `preds` (one vector per increasing level) that are not non-decreasing in the level.
pub fn count_crossings(preds: &[Vec<f64>]) -> usize {
    let n = preds.first().map_or(0, Vec::len);
    (0..n)
        .filter(|&i| preds.windows(2).any(|w| !(w[0][i] <= w[1][i])))
        .count()
}

/// Fits one method on a sample and scores it on the test split.
pub fn evaluate(sample: &DgpSample, config: &SelectionConfig) -> Result<(MetricsReport, Vec<usize>)> {
    let start = Instant::now();
    let (model, trace) = fit(&sample.train, config)?;
    let wall_time = start.elapsed().as_secs_f64();
    let preds = predict(&model, &sample.test, &LEVELS)?;
    let pinball = LEVELS
        .iter()
        .zip(&preds)
        .map(|(&a, q)| Ok((a, pinball(sample.test.response(), q, a)?)))
        .collect::<Result<Vec<_>>>()?;
    let (tpr, fdr) = tpr_fdr(&trace.chosen, &sample.labels);
    Ok((
        MetricsReport {
            tpr,
            fdr,
            chosen_count: trace.chosen.len(),
            pinball,
            crossings: count_crossings(&preds),
            wall_time,
        },
        trace.chosen,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub method: Method,
    pub replication: usize,
    pub seed: u64,
    pub chosen: Vec<usize>,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSummary {
    pub measure: String,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub successes: usize,
    pub failures: usize,
    pub measures: Vec<MeasureSummary>,
}

impl MethodSummary {
    pub fn get(&self, measure: &str) -> Option<&MeasureSummary> {
        self.measures.iter().find(|m| m.measure == measure)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub config: DgpConfig,
    pub replications: usize,
    pub summaries: Vec<MethodSummary>,
    pub records: Vec<ReplicationRecord>,
}

/// Mean and standard error `sd / sqrt(k)` of a sample.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let k = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / k;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Measure name of the pinball loss at `alpha`.
pub fn pinball_measure(alpha: f64) -> String {
    format!("pl_{alpha:.2}")
}

fn summarize(method: Method, records: &[&ReplicationRecord]) -> MethodSummary {
    let reports: Vec<&MetricsReport> = records.iter().filter_map(|r| r.report.as_ref()).collect();
    let column = |f: &dyn Fn(&MetricsReport) -> f64| -> Vec<f64> { reports.iter().map(|r| f(r)).collect() };
    let mut measures = Vec::new();
    let mut push = |name: String, values: Vec<f64>| {
        let (mean, se) = mean_se(&values);
        measures.push(MeasureSummary { measure: name, mean, se });
    };
    push("tpr".into(), column(&|r| r.tpr));
    push("fdr".into(), column(&|r| r.fdr));
    push("chosen".into(), column(&|r| r.chosen_count as f64));
    for (k, &a) in LEVELS.iter().enumerate() {
        push(pinball_measure(a), column(&|r| r.pinball[k].1));
    }
    push("time".into(), column(&|r| r.wall_time));
    MethodSummary {
        method,
        successes: reports.len(),
        failures: records.len() - reports.len(),
        measures,
    }
}

/// Runs `replications` independent replications per method; replication `r`
/// uses the seed `cfg.seed + r` for data generation.
pub fn run_benchmark(
    cfg: &DgpConfig,
    methods: &[SelectionConfig],
    replications: usize,
) -> Result<BenchmarkTable> {
    if replications == 0 {
        return Err(Error::InvalidInput("at least one replication required".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidInput("no methods given".into()));
    }
    generate(&cfg.with_seed(cfg.seed))?;
    let jobs: Vec<(usize, usize)> = (0..replications)
        .flat_map(|r| (0..methods.len()).map(move |m| (r, m)))
        .collect();
    let records: Vec<ReplicationRecord> = jobs
        .par_iter()
        .map(|&(r, m)| {
            let seed = cfg.seed.wrapping_add(r as u64);
            let config = &methods[m];
            let outcome = generate(&cfg.with_seed(seed)).and_then(|s| evaluate(&s, config));
            if let Err(e) = &outcome {
                log::warn!("replication {r} of {} failed: {e}", config.method);
            }
            let (report, chosen, error) = match outcome {
                Ok((rep, chosen)) => (Some(rep), chosen, None),
                Err(e) => (None, Vec::new(), Some(e.to_string())),
            };
            ReplicationRecord {
                method: config.method,
                replication: r,
                seed,
                chosen,
                report,
                error,
            }
        })
        .collect();
    let summaries = methods
        .iter()
        .map(|c| {
            let mine: Vec<&ReplicationRecord> = records.iter().filter(|r| r.method == c.method).collect();
            summarize(c.method, &mine)
        })
        .collect();
    Ok(BenchmarkTable {
        config: cfg.clone(),
        replications,
        summaries,
        records,
    })
}

impl BenchmarkTable {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// CSV with columns `method,dgp,case,measure,mean,se`; failures are
    /// reported as a `failures` measure.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,dgp,case,measure,mean,se\n");
        let case = self.config.case.map_or(String::new(), |c| c.to_string());
        for s in &self.summaries {
            for m in &s.measures {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    s.method,
                    self.config.dgp.number(),
                    case,
                    m.measure,
                    m.mean,
                    m.se
                ));
            }
            out.push_str(&format!(
                "{},{},{},failures,{},0\n",
                s.method,
                self.config.dgp.number(),
                case,
                s.failures
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("benchmark serialization cannot fail")
    }

    /// Human-readable table with `mean (se)` cells.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "DGP {} case {} ({} replications)\n{:<10}",
            self.config.dgp.number(),
            self.config.case.map_or("-".to_string(), |c| c.to_string()),
            self.replications,
            "measure"
        );
        for s in &self.summaries {
            out.push_str(&format!("{:>16}", s.method.to_string()));
        }
        out.push('\n');
        if let Some(first) = self.summaries.first() {
            for (k, m) in first.measures.iter().enumerate() {
                out.push_str(&format!("{:<10}", m.measure));
                for s in &self.summaries {
                    let v = &s.measures[k];
                    out.push_str(&format!("{:>16}", format!("{:.2} ({:.2})", v.mean, v.se)));
                }
                out.push('\n');
            }
        }
        out
    }
}
