//! SNP preprocessing, marginal screening and grouped feature extraction.
//!
//! SNPs are coded 0 / 2 (homozygous genotypes). Screening regresses the
//! response on each SNP separately; the features are weighted sums of
//! consecutive groups of screened SNPs in p-value order.

use crate::bicop::{select_family_default, Criterion, Family, Rotation};
use crate::margins::kde_fit;
use crate::special::norm_cdf;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"SVM1";
const MIN_OBS: usize = 10;

/// Column-major `n x P` matrix of SNPs with values in {0, 2}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnpMatrix {
    n: usize,
    columns: Vec<Vec<u8>>,
    col_ids: Vec<String>,
    row_ids: Vec<String>,
}

impl SnpMatrix {
    /// Default ids are `snp{j}` and `line{i}`.
    pub fn new(columns: Vec<Vec<u8>>) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        let col_ids = (0..columns.len()).map(|j| format!("snp{j}")).collect();
        let row_ids = (0..n).map(|i| format!("line{i}")).collect();
        SnpMatrix::with_ids(columns, col_ids, row_ids)
    }

    pub fn with_ids(columns: Vec<Vec<u8>>, col_ids: Vec<String>, row_ids: Vec<String>) -> Result<Self> {
        let n = row_ids.len();
        if col_ids.len() != columns.len() {
            return Err(Error::InvalidInput("one id per SNP column required".into()));
        }
        for (j, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(Error::InvalidInput(format!(
                    "SNP column {} has {} rows, expected {n}",
                    col_ids[j],
                    c.len()
                )));
            }
            if let Some(i) = c.iter().position(|&v| v != 0 && v != 2) {
                return Err(Error::InvalidInput(format!(
                    "SNP value {} at row {} column {} is not 0 or 2",
                    c[i], row_ids[i], col_ids[j]
                )));
            }
        }
        Ok(SnpMatrix {
            n,
            columns,
            col_ids,
            row_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_snps(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[u8] {
        &self.columns[j]
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    /// Matrix restricted to the given columns, in the given order.
    pub fn select(&self, cols: &[usize]) -> SnpMatrix {
        SnpMatrix {
            n: self.n,
            columns: cols.iter().map(|&j| self.columns[j].clone()).collect(),
            col_ids: cols.iter().map(|&j| self.col_ids[j].clone()).collect(),
            row_ids: self.row_ids.clone(),
        }
    }

    /// Matrix restricted to the given rows.
    pub fn select_rows(&self, rows: &[usize]) -> SnpMatrix {
        SnpMatrix {
            n: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            col_ids: self.col_ids.clone(),
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
        }
    }

    /// Binary layout: `SVM1`, little-endian u32 `n`, u32 `P`, then `P` columns of `n` bytes.
    pub fn write_svm1<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.columns.len() as u32).to_le_bytes())?;
        for c in &self.columns {
            w.write_all(c)?;
        }
        Ok(())
    }

    pub fn read_svm1<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::InvalidInput(format!("SVM1 read: {e}"));
        let mut head = [0u8; 12];
        r.read_exact(&mut head).map_err(io)?;
        if &head[..4] != MAGIC {
            return Err(Error::InvalidInput("missing SVM1 magic bytes".into()));
        }
        let n = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes")) as usize;
        let p = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes")) as usize;
        let mut columns = Vec::with_capacity(p);
        for _ in 0..p {
            let mut c = vec![0u8; n];
            r.read_exact(&mut c).map_err(io)?;
            columns.push(c);
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(io)?;
        if !rest.is_empty() {
            return Err(Error::InvalidInput("trailing bytes after SVM1 payload".into()));
        }
        let col_ids = (0..p).map(|j| format!("snp{j}")).collect();
        let row_ids = (0..n).map(|i| format!("line{i}")).collect();
        SnpMatrix::with_ids(columns, col_ids, row_ids)
    }
}

/// Relative frequency of the less common value of a 0/2 column.
pub fn minor_frequency(col: &[u8]) -> f64 {
    let twos = col.iter().filter(|&&v| v == 2).count();
    twos.min(col.len() - twos) as f64 / col.len() as f64
}

/// Columns kept by deduplication and the minor-frequency filter, judged on `train`.
pub fn kept_columns(train: &SnpMatrix, freq_threshold: f64) -> Vec<usize> {
    let mut seen: HashMap<&[u8], usize> = HashMap::new();
    (0..train.n_snps())
        .filter(|&j| {
            let c = train.column(j);
            seen.insert(c, j).is_none() && minor_frequency(c) >= freq_threshold
        })
        .collect()
}

/// Drops duplicate and rare columns, using statistics of `train` only.
pub fn preprocess(train: &SnpMatrix, test: &SnpMatrix, freq_threshold: f64) -> Result<(SnpMatrix, SnpMatrix)> {
    if train.col_ids() != test.col_ids() {
        return Err(Error::InvalidInput("train and test SNP columns differ".into()));
    }
    if train.n_rows() == 0 {
        return Err(Error::InvalidInput("empty training matrix".into()));
    }
    let keep = kept_columns(train, freq_threshold);
    if keep.is_empty() {
        return Err(Error::Degenerate("no SNP survives preprocessing".into()));
    }
    Ok((train.select(&keep), test.select(&keep)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenResult {
    pub slopes: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Screened columns sorted by p-value, ties by column index.
    pub ordered: Vec<usize>,
    pub p_cut: f64,
}

/// Per-SNP least squares of `y` on `(1, snp)` with a two-sided normal Wald test.
pub fn marginal_regression(y: &[f64], snp: &[u8]) -> (f64, f64, f64) {
    let n = y.len() as f64;
    let mx = snp.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&x, &yy) in snp.iter().zip(y) {
        let dx = f64::from(x) - mx;
        sxx += dx * dx;
        sxy += dx * (yy - my);
    }
    assert!(sxx > 0.0, "constant SNP column reached the screen");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = snp
        .iter()
        .zip(y)
        .map(|(&x, &yy)| (yy - intercept - slope * f64::from(x)).powi(2))
        .sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    let z = (slope / se).abs();
    let p = if z.is_nan() { 1.0 } else { 2.0 * norm_cdf(-z) };
    (slope, intercept, p)
}

pub fn screen(y: &[f64], snps: &SnpMatrix, p_cut: f64) -> Result<ScreenResult> {
    if y.len() != snps.n_rows() {
        return Err(Error::InvalidInput("response length differs from SNP rows".into()));
    }
    if y.len() < MIN_OBS {
        return Err(Error::InvalidInput(format!("need at least {MIN_OBS} rows to screen")));
    }
    if !(p_cut > 0.0 && p_cut <= 1.0) {
        return Err(Error::InvalidInput(format!("p-value cut {p_cut} not in (0, 1]")));
    }
    let fits: Vec<(f64, f64, f64)> = (0..snps.n_snps())
        .into_par_iter()
        .map(|j| marginal_regression(y, snps.column(j)))
        .collect();
    let p_values: Vec<f64> = fits.iter().map(|f| f.2).collect();
    let mut ordered: Vec<usize> = (0..fits.len()).filter(|&j| p_values[j] < p_cut).collect();
    ordered.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    Ok(ScreenResult {
        slopes: fits.iter().map(|f| f.0).collect(),
        intercepts: fits.iter().map(|f| f.1).collect(),
        p_values,
        ordered,
        p_cut,
    })
}

/// One extracted feature: a weighted sum of SNP columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    /// Column indices into the screened matrix.
    pub columns: Vec<usize>,
    pub snp_ids: Vec<String>,
    pub weights: Vec<f64>,
    pub p_value_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub grouping: usize,
    pub groups: Vec<FeatureGroup>,
    /// Feature values on the matrix used for extraction, one vector per feature.
    #[serde(skip)]
    pub values: Vec<Vec<f64>>,
}

impl FeatureSet {
    pub fn n_features(&self) -> usize {
        self.groups.len()
    }

    /// Evaluates the features on another matrix with the same columns.
    pub fn apply(&self, snps: &SnpMatrix) -> Vec<Vec<f64>> {
        self.groups
            .iter()
            .map(|g| {
                (0..snps.n_rows())
                    .map(|i| {
                        g.columns
                            .iter()
                            .zip(&g.weights)
                            .map(|(&j, w)| w * f64::from(snps.column(j)[i]))
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// JSON manifest of feature composition.
    pub fn manifest(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization cannot fail")
    }
}

/// Groups the screened SNPs into blocks of `grouping` and weights each SNP by its slope.
pub fn extract_features(screen: &ScreenResult, snps: &SnpMatrix, grouping: usize) -> Result<FeatureSet> {
    if grouping == 0 {
        return Err(Error::InvalidInput("grouping size must be positive".into()));
    }
    if screen.ordered.is_empty() {
        return Err(Error::InvalidInput("no SNP passed the screen".into()));
    }
    if screen.slopes.len() != snps.n_snps() {
        return Err(Error::InvalidInput("screen and SNP matrix differ in width".into()));
    }
    let groups: Vec<FeatureGroup> = screen
        .ordered
        .chunks(grouping)
        .enumerate()
        .map(|(d, block)| {
            let ps: Vec<f64> = block.iter().map(|&j| screen.p_values[j]).collect();
            FeatureGroup {
                name: format!("feature{}", d + 1),
                columns: block.to_vec(),
                snp_ids: block.iter().map(|&j| snps.col_ids()[j].clone()).collect(),
                weights: block.iter().map(|&j| screen.slopes[j]).collect(),
                p_value_range: (ps[0], ps[ps.len() - 1]),
            }
        })
        .collect();
    let mut set = FeatureSet {
        grouping,
        groups,
        values: Vec::new(),
    };
    set.values = set.apply(snps);
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub feature: String,
    pub family: Family,
    pub rotation: Rotation,
    pub params: Vec<f64>,
    pub tau: f64,
    pub aic: f64,
    /// The selected copula is the independence copula.
    pub irrelevant_candidate: bool,
}

/// Two-node vine per feature: kernel margins, then AIC copula family selection.
pub fn bivariate_analysis(y: &[f64], features: &FeatureSet) -> Result<Vec<FeatureSummary>> {
    bivariate_analysis_with(y, features, Criterion::Aic)
}

pub fn bivariate_analysis_with(
    y: &[f64],
    features: &FeatureSet,
    criterion: Criterion,
) -> Result<Vec<FeatureSummary>> {
    if y.len() < MIN_OBS {
        return Err(Error::InvalidInput(format!("need at least {MIN_OBS} observations")));
    }
    let my = kde_fit(y)?;
    let v: Vec<f64> = y.iter().map(|&t| my.pit(t)).collect();
    features
        .groups
        .iter()
        .zip(&features.values)
        .map(|(g, x)| {
            if x.len() != y.len() {
                return Err(Error::InvalidInput("feature length differs from response".into()));
            }
            let mx = kde_fit(x)?;
            let u: Vec<f64> = x.iter().map(|&t| mx.pit(t)).collect();
            let f = select_family_default(&v, &u, criterion)?;
            Ok(FeatureSummary {
                feature: g.name.clone(),
                family: f.family(),
                rotation: f.rotation(),
                params: f.params().to_vec(),
                tau: f.tau(),
                aic: f.aic,
                irrelevant_candidate: f.is_independence(),
            })
        })
        .collect()
}

/// Synthetic genotypes where a block of causal SNPs in linkage drives the response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub n: usize,
    pub n_snps: usize,
    pub n_causal: usize,
    /// Loading of causal SNPs on the shared latent haplotype factor.
    pub linkage: f64,
    /// Per-SNP additive effect on the response.
    pub effect: f64,
    pub noise: f64,
    pub seed: u64,
}

impl PlantedConfig {
    pub fn new(seed: u64) -> Self {
        PlantedConfig {
            n: 500,
            n_snps: 2000,
            n_causal: 100,
            linkage: 0.8,
            effect: 0.05,
            noise: 1.0,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedData {
    pub y: Vec<f64>,
    pub snps: SnpMatrix,
    /// Column indices of the causal SNPs, ascending.
    pub causal: Vec<usize>,
}

pub fn planted_signal(cfg: &PlantedConfig) -> Result<PlantedData> {
    if cfg.n_causal > cfg.n_snps || cfg.n < MIN_OBS {
        return Err(Error::InvalidInput("invalid planted-signal configuration".into()));
    }
    if !(cfg.linkage.abs() < 1.0) {
        return Err(Error::InvalidInput("linkage must lie in (-1, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut causal = rand::seq::index::sample(&mut rng, cfg.n_snps, cfg.n_causal).into_vec();
    causal.sort_unstable();
    let latent: Vec<f64> = (0..cfg.n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let resid = (1.0 - cfg.linkage * cfg.linkage).sqrt();
    let mut is_causal = vec![false; cfg.n_snps];
    for &j in &causal {
        is_causal[j] = true;
    }
    let mut columns = Vec::with_capacity(cfg.n_snps);
    for &c in &is_causal {
        let freq: f64 = rng.random_range(0.2..0.5);
        let col: Vec<u8> = if c {
            let cut = crate::special::norm_ppf(1.0 - freq);
            latent
                .iter()
                .map(|&h| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    if cfg.linkage * h + resid * e > cut {
                        2
                    } else {
                        0
                    }
                })
                .collect()
        } else {
            (0..cfg.n).map(|_| if rng.random::<f64>() < freq { 2 } else { 0 }).collect()
        };
        columns.push(col);
    }
    let y = (0..cfg.n)
        .map(|i| {
            let signal: f64 = causal.iter().map(|&j| f64::from(columns[j][i])).sum();
            let e: f64 = StandardNormal.sample(&mut rng);
            cfg.effect * signal + cfg.noise * e
        })
        .collect();
    Ok(PlantedData {
        y,
        snps: SnpMatrix::new(columns)?,
        causal,
    })
}
