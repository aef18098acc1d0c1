use crate::args::{EvaluateArgs, ExtractArgs, FitArgs, PredictArgs, SimulateArgs};
use crate::table::{read_snps, read_table, write_table};
use crate::CliError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sparsevine::dvine::DVineModel;
use sparsevine::genomics;
use sparsevine::select::{self, Dataset, SelectionConfig, SelectionTrace};
use sparsevine::simbench::{self, pinball, pinball_measure, tpr_fdr, DgpConfig, Labels};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

/// Fitted model plus the column name of every variable id.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub variables: Vec<String>,
    pub model: DVineModel,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Output(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    let mut w = sink(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Output(e.to_string()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// Parses a comma-separated list of strictly increasing levels in (0, 1).
pub fn parse_levels(s: &str) -> Result<Vec<f64>, CliError> {
    let levels = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("invalid quantile level '{t}'")))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if levels.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(CliError::Usage("quantile levels must lie in (0, 1)".into()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage("quantile levels must be strictly increasing".into()));
    }
    Ok(levels)
}

pub fn level_column(alpha: f64) -> String {
    format!("q{alpha}")
}

pub fn fit(a: &FitArgs) -> Result<(), CliError> {
    let table = read_table(&a.input)?;
    let resp = table
        .headers
        .iter()
        .position(|h| *h == a.response)
        .ok_or_else(|| CliError::Input(format!("no response column '{}'", a.response)))?;
    if table.headers.len() < 2 {
        return Err(CliError::Input("no explanatory columns".into()));
    }
    let order: Vec<usize> = std::iter::once(resp).chain((0..table.headers.len()).filter(|&j| j != resp)).collect();
    let names: Vec<String> = order.iter().map(|&j| table.headers[j].clone()).collect();
    let data = Dataset::with_names(order.iter().map(|&j| table.columns[j].clone()).collect(), names.clone())?;
    let mut config = SelectionConfig::new(a.selection.method);
    config.criterion = a.selection.criterion.into();
    config.pseudo_response_quantile = a.selection.pseudo_quantile;
    let (model, trace) = select::fit(&data, &config)?;
    log::info!(
        "selected {:?} with conditional AIC {:.3}",
        trace.chosen.iter().map(|&v| names[v].as_str()).collect::<Vec<_>>(),
        trace.final_aic()
    );
    write_text(a.output.as_deref(), &to_json(&ModelFile { variables: names, model }))?;
    if let Some(p) = &a.trace {
        write_text(Some(p), &to_json(&trace))?;
    }
    Ok(())
}

/// Quantile predictions, one vector per level.
pub fn predict_table(file: &ModelFile, input: &Path, levels: &[f64]) -> Result<Vec<Vec<f64>>, CliError> {
    let table = read_table(input)?;
    if table.n_rows() == 0 {
        return Ok(vec![Vec::new(); levels.len()]);
    }
    let p = file.variables.len() - 1;
    let mut x_cols: Vec<Option<&[f64]>> = vec![None; p];
    for &v in file.model.explanatory() {
        let name = &file.variables[v];
        let col = table
            .column(name)
            .ok_or_else(|| CliError::Input(format!("input lacks model variable '{name}'")))?;
        x_cols[v - 1] = Some(col);
    }
    let rows: Vec<Vec<f64>> = (0..table.n_rows())
        .into_par_iter()
        .map(|i| {
            let x: Vec<f64> = x_cols.iter().map(|c| c.map_or(f64::NAN, |c| c[i])).collect();
            levels
                .iter()
                .map(|&alpha| file.model.conditional_quantile(&x, alpha))
                .collect::<sparsevine::Result<Vec<f64>>>()
        })
        .collect::<sparsevine::Result<_>>()?;
    Ok((0..levels.len()).map(|k| rows.iter().map(|r| r[k]).collect()).collect())
}

pub fn predict(a: &PredictArgs) -> Result<(), CliError> {
    let levels = parse_levels(&a.levels)?;
    let file: ModelFile = read_json(&a.model)?;
    let preds = predict_table(&file, &a.input, &levels)?;
    let headers: Vec<String> = levels.iter().map(|&l| level_column(l)).collect();
    write_table(sink(a.output.as_deref())?, &headers, &preds)
}

fn dgp_config(dgp: usize, case: usize, seed: u64) -> Result<DgpConfig, CliError> {
    let cfg = match dgp {
        1 => DgpConfig::dgp1(case, seed),
        2 => DgpConfig::dgp2(case, seed),
        _ => return Err(CliError::Usage(format!("unknown DGP {dgp}; expected 1 or 2"))),
    };
    if cfg.dgp.case_p(case).is_none() {
        return Err(CliError::Usage(format!("DGP {dgp} has no case {case}")));
    }
    Ok(cfg)
}

fn write_dataset(path: &Path, data: &Dataset) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    write_table(BufWriter::new(f), data.names(), data.columns())
}

pub fn simulate(a: &SimulateArgs, seed: u64) -> Result<(), CliError> {
    let cfg = dgp_config(a.dgp, a.case, seed)?;
    if let Some(dir) = &a.export_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
        let sample = simbench::generate(&cfg)?;
        write_dataset(&dir.join("train.csv"), &sample.train)?;
        write_dataset(&dir.join("test.csv"), &sample.test)?;
        return write_text(Some(&dir.join("labels.json")), &to_json(&sample.labels));
    }
    if a.methods.is_empty() {
        return Err(CliError::Usage("no methods given".into()));
    }
    let methods: Vec<SelectionConfig> = a
        .methods
        .iter()
        .map(|&m| {
            let mut c = SelectionConfig::new(m);
            c.criterion = a.criterion.into();
            c.pseudo_response_quantile = a.pseudo_quantile;
            c
        })
        .collect();
    let table = simbench::run_benchmark(&cfg, &methods, a.reps)?;
    write_text(a.output.as_deref(), &table.to_csv())?;
    if a.output.is_some() {
        write_text(None, &table.to_text())?;
    }
    Ok(())
}

fn manifest_path(a: &ExtractArgs) -> PathBuf {
    a.manifest.clone().unwrap_or_else(|| {
        let mut s = a.output.clone().into_os_string();
        s.push(".manifest.json");
        PathBuf::from(s)
    })
}

pub fn extract_features(a: &ExtractArgs) -> Result<(), CliError> {
    if a.grouping == 0 {
        return Err(CliError::Usage("--grouping must be positive".into()));
    }
    let train = read_snps(&a.input)?;
    let phen = read_table(&a.phenotype)?;
    let y = phen
        .column(&a.response)
        .ok_or_else(|| CliError::Input(format!("no response column '{}'", a.response)))?;
    if y.len() != train.n_rows() {
        return Err(CliError::Input(format!(
            "{} responses for {} SNP rows",
            y.len(),
            train.n_rows()
        )));
    }
    let test = match &a.test_input {
        Some(p) => read_snps(p)?,
        None => train.clone(),
    };
    let (train, test) = genomics::preprocess(&train, &test, a.freq_threshold)?;
    let screened = genomics::screen(y, &train, a.p_cut)?;
    log::info!(
        "{} SNPs after preprocessing, {} pass the screen",
        train.n_snps(),
        screened.ordered.len()
    );
    let features = genomics::extract_features(&screened, &train, a.grouping)?;
    let names: Vec<String> = features.groups.iter().map(|g| g.name.clone()).collect();
    let headers: Vec<String> = std::iter::once(a.response.clone()).chain(names.iter().cloned()).collect();
    let columns: Vec<Vec<f64>> = std::iter::once(y.to_vec()).chain(features.values.iter().cloned()).collect();
    let f = File::create(&a.output).map_err(|e| CliError::Output(format!("{}: {e}", a.output.display())))?;
    write_table(BufWriter::new(f), &headers, &columns)?;
    write_text(Some(&manifest_path(a)), &(features.manifest() + "\n"))?;
    if let Some(p) = &a.test_output {
        let f = File::create(p).map_err(|e| CliError::Output(format!("{}: {e}", p.display())))?;
        write_table(BufWriter::new(f), &names, &features.apply(&test))?;
    }
    Ok(())
}

fn parse_level_header(h: &str) -> Option<f64> {
    h.strip_prefix('q')?.parse().ok().filter(|a| *a > 0.0 && *a < 1.0)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let preds = read_table(&a.input)?;
    let truth = read_table(&a.truth)?;
    let y = truth
        .column(&a.response)
        .ok_or_else(|| CliError::Input(format!("no response column '{}'", a.response)))?;
    if preds.n_rows() != y.len() {
        return Err(CliError::Input(format!(
            "{} prediction rows for {} observations",
            preds.n_rows(),
            y.len()
        )));
    }
    let mut headers = Vec::new();
    let mut values = Vec::new();
    for (h, col) in preds.headers.iter().zip(&preds.columns) {
        let alpha = parse_level_header(h)
            .ok_or_else(|| CliError::Input(format!("prediction column '{h}' is not a quantile level")))?;
        headers.push(pinball_measure(alpha));
        values.push(vec![pinball(y, col, alpha)?]);
    }
    if let (Some(lp), Some(tp)) = (&a.labels, &a.trace) {
        let labels: Labels = read_json(lp)?;
        let trace: SelectionTrace = read_json(tp)?;
        let (tpr, fdr) = tpr_fdr(&trace.chosen, &labels);
        headers.extend(["tpr".to_string(), "fdr".to_string()]);
        values.extend([vec![tpr], vec![fdr]]);
    }
    write_table(sink(a.output.as_deref())?, &headers, &values)
}
