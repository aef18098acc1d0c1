//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test --test acceptance -- 3 9` runs only the listed criteria.
//! Failures are reported but only fail the process when
//! `ACCEPTANCE_STRICT=1` is set.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sparsevine::bicop::{empirical_tau, fit_mle, Bicop, Cond, Family, FittedBicop, Rotation};
use sparsevine::dvine::DVineModel;
use sparsevine::genomics::{extract_features, planted_signal, preprocess, screen, PlantedConfig, SnpMatrix};
use sparsevine::margins::kde_fit;
use sparsevine::select::{fit, Dataset, Method, SelectionConfig};
use sparsevine::simbench::{count_crossings, predict, run_benchmark, BenchmarkTable, DgpConfig, LEVELS};
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

/// Quantile crossings seen by criteria 5 to 9, and how many rows were checked.
static CROSSINGS: AtomicUsize = AtomicUsize::new(0);
static CHECKED_ROWS: AtomicUsize = AtomicUsize::new(0);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn record_crossings(model: &DVineModel, data: &Dataset) {
    let preds = predict(model, data, &LEVELS).expect("prediction");
    CROSSINGS.fetch_add(count_crossings(&preds), Ordering::Relaxed);
    CHECKED_ROWS.fetch_add(data.n_obs(), Ordering::Relaxed);
}

fn record_table(table: &BenchmarkTable) {
    for r in &table.records {
        if let Some(rep) = &r.report {
            CROSSINGS.fetch_add(rep.crossings, Ordering::Relaxed);
            CHECKED_ROWS.fetch_add(table.config.n - table.config.n_train, Ordering::Relaxed);
        }
    }
}

fn copula_settings() -> Vec<Bicop> {
    let raw: &[(Family, &[f64], &[f64])] = &[
        (Family::Gaussian, &[0.5], &[-0.85]),
        (Family::StudentT, &[0.4, 5.0], &[0.8, 3.0]),
        (Family::Clayton, &[2.0], &[5.0]),
        (Family::Gumbel, &[1.8], &[3.0]),
        (Family::Frank, &[-4.0], &[10.0]),
        (Family::Joe, &[2.2], &[4.0]),
        (Family::Bb1, &[0.5, 1.7], &[1.5, 2.5]),
        (Family::Bb6, &[1.5, 1.6], &[2.0, 2.0]),
        (Family::Bb7, &[1.6, 1.2], &[3.0, 2.0]),
        (Family::Bb8, &[3.0, 0.7], &[5.0, 0.9]),
    ];
    let mut out = vec![Bicop::independence()];
    for &(f, a, b) in raw {
        let rots: &[Rotation] = if f.is_radially_symmetric() {
            &[Rotation::R0]
        } else {
            &Rotation::ALL
        };
        for &r in rots {
            for p in [a, b] {
                out.push(Bicop::new(f, r, p).expect("admissible parameters"));
            }
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let grid: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    let k = 201;
    let mids: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) / k as f64).collect();
    let mut worst_roundtrip: f64 = 0.0;
    let mut norm_range = (f64::INFINITY, f64::NEG_INFINITY);
    let settings = copula_settings();
    for c in &settings {
        for &u in &grid {
            for &v in &grid {
                for cond in [Cond::First, Cond::Second] {
                    let p = c.hfunc(cond, v, u);
                    let err = match c.hinv(cond, p, u) {
                        Ok(back) => (back - v).abs(),
                        Err(_) => f64::INFINITY,
                    };
                    worst_roundtrip = worst_roundtrip.max(err);
                }
            }
        }
        let mass: f64 = mids
            .iter()
            .map(|&u| mids.iter().map(|&v| c.pdf(u, v)).sum::<f64>())
            .sum::<f64>()
            / (k * k) as f64;
        norm_range = (norm_range.0.min(mass), norm_range.1.max(mass));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_roundtrip < 1e-6 && norm_range.0 >= 0.98 && norm_range.1 <= 1.02 && secs < 60.0,
        format!(
            "{} copulas, max h-inverse error {worst_roundtrip:.2e}, density mass in [{:.4}, {:.4}], {secs:.1}s",
            settings.len(),
            norm_range.0,
            norm_range.1
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut worst_rho: f64 = 0.0;
    let mut worst_theta: f64 = 0.0;
    for seed in 0..10 {
        for rho in [0.3, 0.6, 0.9] {
            let c = Bicop::new(Family::Gaussian, Rotation::R0, &[rho]).unwrap();
            let (u, v) = c.sample(2000, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let fitted = fit_mle(&u, &v, Family::Gaussian, Rotation::R0).unwrap().params()[0];
            let oracle = (std::f64::consts::FRAC_PI_2 * empirical_tau(&u, &v)).sin();
            worst_rho = worst_rho.max((fitted - oracle).abs());
        }
        for theta in [1.0, 2.0] {
            let c = Bicop::new(Family::Clayton, Rotation::R0, &[theta]).unwrap();
            let (u, v) = c.sample(2000, &mut ChaCha8Rng::seed_from_u64(100 + seed)).unwrap();
            let fitted = fit_mle(&u, &v, Family::Clayton, Rotation::R0).unwrap().params()[0];
            let t = empirical_tau(&u, &v);
            worst_theta = worst_theta.max((fitted - 2.0 * t / (1.0 - t)).abs());
        }
    }
    outcome(
        worst_rho < 0.05 && worst_theta < 0.3,
        format!("max |rho - oracle| {worst_rho:.4}, max |theta - oracle| {worst_theta:.4}"),
    )
}

fn normal_margin(seed: u64) -> sparsevine::margins::MarginalModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
    kde_fit(&x).unwrap()
}

fn fitted(f: Family, r: Rotation, p: &[f64]) -> FittedBicop {
    FittedBicop::new(Bicop::new(f, r, p).unwrap(), f64::NAN, 0)
}

fn criterion_3() -> Outcome {
    let model = DVineModel::from_parts(
        vec![0, 1, 2, 3],
        vec![
            vec![
                fitted(Family::Gaussian, Rotation::R0, &[0.6]),
                fitted(Family::Clayton, Rotation::R0, &[1.5]),
                fitted(Family::Gumbel, Rotation::R0, &[1.7]),
            ],
            vec![
                fitted(Family::Joe, Rotation::R180, &[1.6]),
                fitted(Family::StudentT, Rotation::R0, &[-0.3, 6.0]),
            ],
            vec![fitted(Family::Frank, Rotation::R0, &[3.0])],
        ],
        (0..4).map(|v| (v, normal_margin(v as u64 + 1))).collect::<BTreeMap<_, _>>(),
        None,
    )
    .unwrap()
    .truncated(2)
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let x: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut moved = x.clone();
        moved[2] = rng.random_range(-50.0..50.0);
        for alpha in [0.05, 0.25, 0.5, 0.75, 0.95] {
            let a = model.conditional_quantile(&x, alpha).unwrap();
            let b = model.conditional_quantile(&moved, alpha).unwrap();
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max quantile change {worst:.2e} over 200 perturbed rows"))
}

fn gaussian_data(corr: &DMatrix<f64>, n: usize, seed: u64) -> Dataset {
    let k = corr.nrows();
    let l = corr.clone().cholesky().expect("positive definite").l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = vec![Vec::with_capacity(n); k];
    for _ in 0..n {
        let x = &l * DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
        for j in 0..k {
            cols[j].push(x[j]);
        }
    }
    Dataset::new(cols).unwrap()
}

fn equicorrelated(k: usize, r: f64) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { r })
}

fn criterion_4() -> Outcome {
    let p = 8;
    let d = gaussian_data(&equicorrelated(p + 1, 0.3), 200, 21);
    let mut totals = Vec::new();
    for method in [Method::Res, Method::ParCor] {
        let mut cfg = SelectionConfig::new(method);
        cfg.exhaustive = true;
        let (_, trace) = fit(&d, &cfg).unwrap();
        totals.push(trace.total_fits());
    }
    let small = gaussian_data(&equicorrelated(5, 0.3), 200, 12);
    let mut step = Vec::new();
    for method in [Method::Baseline, Method::Res, Method::ParCor] {
        let mut cfg = SelectionConfig::new(method);
        cfg.initial_order = vec![2, 1];
        cfg.exhaustive = true;
        cfg.max_iterations = Some(1);
        let (_, trace) = fit(&small, &cfg).unwrap();
        step.push(trace.iterations[0].pair_copulas_fitted);
    }
    outcome(
        totals == [p * (p + 1), p * (p + 1) / 2] && step == [6, 5, 3],
        format!(
            "p=8 totals res {} parcor {} (expected {} / {}); one step from a 2-variable vine {:?}",
            totals[0],
            totals[1],
            p * (p + 1),
            p * (p + 1) / 2,
            step
        ),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let corr = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.4, 0.5, 1.0, 0.8, 0.4, 0.8, 1.0]);
    let (mut first_res, mut first_parcor, mut res_excludes) = (0, 0, 0);
    for seed in 0..20 {
        let d = gaussian_data(&corr, 450, 5000 + seed);
        let test = gaussian_data(&corr, 150, 9000 + seed);
        for method in [Method::Res, Method::ParCor] {
            let (model, trace) = fit(&d, &SelectionConfig::new(method)).unwrap();
            record_crossings(&model, &test);
            let first = trace.chosen.first() == Some(&1);
            match method {
                Method::Res => {
                    first_res += first as usize;
                    res_excludes += !trace.chosen.contains(&2) as usize;
                }
                _ => first_parcor += first as usize,
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        first_res >= 18 && first_parcor >= 18 && res_excludes >= 16 && secs < 120.0,
        format!(
            "X1 first: res {first_res}/20, parcor {first_parcor}/20; res excludes X2 {res_excludes}/20; {secs:.1}s"
        ),
    )
}

fn summary_value(table: &BenchmarkTable, method: Method, measure: &str) -> f64 {
    table
        .summary(method)
        .and_then(|s| s.get(measure))
        .map_or(f64::NAN, |m| m.mean)
}

fn dgp1_table() -> &'static (BenchmarkTable, f64) {
    static TABLE: std::sync::OnceLock<(BenchmarkTable, f64)> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        let start = Instant::now();
        let methods = [SelectionConfig::new(Method::Res), SelectionConfig::new(Method::ParCor)];
        let table = run_benchmark(&DgpConfig::dgp1(1, 1000), &methods, 20).unwrap();
        record_table(&table);
        (table, start.elapsed().as_secs_f64())
    })
}

fn failures(table: &BenchmarkTable) -> usize {
    table.records.iter().filter(|r| r.error.is_some()).count()
}

fn criterion_6() -> Outcome {
    let (table, secs) = dgp1_table();
    let tpr = summary_value(table, Method::Res, "tpr");
    let fdr = summary_value(table, Method::Res, "fdr");
    let chosen = summary_value(table, Method::Res, "chosen");
    let tpr_pc = summary_value(table, Method::ParCor, "tpr");
    outcome(
        (0.65..=0.95).contains(&tpr)
            && fdr <= 0.20
            && (3.0..=6.5).contains(&chosen)
            && (0.50..=0.85).contains(&tpr_pc)
            && failures(table) == 0
            && *secs < 1800.0,
        format!(
            "res tpr {tpr:.3} fdr {fdr:.3} chosen {chosen:.2}; parcor tpr {tpr_pc:.3}; {} failed fits; {secs:.0}s",
            failures(table)
        ),
    )
}

fn criterion_7() -> Outcome {
    let (table, _) = dgp1_table();
    let pl05 = summary_value(table, Method::Res, "pl_0.05");
    let pl50 = summary_value(table, Method::Res, "pl_0.50");
    let dgp2 = run_benchmark(&DgpConfig::dgp2(1, 2000), &[SelectionConfig::new(Method::Res)], 20).unwrap();
    record_table(&dgp2);
    let pl50_2 = summary_value(&dgp2, Method::Res, "pl_0.50");
    outcome(
        (0.15..=0.30).contains(&pl05)
            && (0.60..=1.00).contains(&pl50)
            && (1.6..=2.1).contains(&pl50_2)
            && failures(&dgp2) == 0,
        format!("dgp1 res pl0.05 {pl05:.3} pl0.50 {pl50:.3}; dgp2 res pl0.50 {pl50_2:.3}"),
    )
}

fn criterion_8() -> Outcome {
    let cfg = DgpConfig::dgp2(3, 3000);
    let sample = sparsevine::simbench::generate(&cfg).unwrap();
    let start = Instant::now();
    let (model, trace) = fit(&sample.train, &SelectionConfig::new(Method::Res)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    record_crossings(&model, &sample.test);
    let p = cfg.p;
    outcome(
        secs < 600.0 && trace.total_fits() <= p * (p + 1),
        format!(
            "p={p}: {:.1}s, {} pair-copula fits (bound {}), {} chosen",
            secs,
            trace.total_fits(),
            p * (p + 1),
            trace.chosen.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let (mut contained, mut selected_first) = (0, 0);
    let mut min_hits = usize::MAX;
    for seed in 0..10 {
        let data = planted_signal(&PlantedConfig::new(700 + seed)).unwrap();
        let (snps, _) = preprocess(&data.snps, &data.snps, 0.05).unwrap();
        let s = screen(&data.y, &snps, 0.10).unwrap();
        let features = extract_features(&s, &snps, 100).unwrap();
        let causal: Vec<String> = data.causal.iter().map(|&j| data.snps.col_ids()[j].clone()).collect();
        let hits = features.groups[0].snp_ids.iter().filter(|id| causal.contains(id)).count();
        min_hits = min_hits.min(hits);
        contained += (hits >= 90) as usize;
        let mut cols = vec![data.y.clone()];
        cols.extend(features.values.iter().cloned());
        let d = Dataset::new(cols).unwrap();
        let (model, trace) = fit(&d, &SelectionConfig::new(Method::Res)).unwrap();
        record_crossings(&model, &d);
        selected_first += (trace.chosen.first() == Some(&1)) as usize;
    }
    let n = 314;
    let rare: Vec<u8> = (0..n).map(|i| if i < 14 { 2 } else { 0 }).collect();
    let common: Vec<u8> = (0..n).map(|i| if i % 3 == 0 { 2 } else { 0 }).collect();
    let m = SnpMatrix::new(vec![common, rare]).unwrap();
    let (kept, _) = preprocess(&m, &m, 0.05).unwrap();
    let filter_ok = kept.col_ids() == ["snp0".to_string()];
    outcome(
        contained == 10 && selected_first >= 8 && filter_ok,
        format!(
            "first feature holds >= 90 causal SNPs in {contained}/10 seeds (min {min_hits}); selected first {selected_first}/10; 14/314 column dropped: {filter_ok}"
        ),
    )
}

fn criterion_10() -> Outcome {
    let rows = CHECKED_ROWS.load(Ordering::Relaxed);
    let crossings = CROSSINGS.load(Ordering::Relaxed);
    outcome(
        crossings == 0 && rows > 0,
        format!("{crossings} crossing rows among {rows} predicted rows"),
    )
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "copula engine properties", criterion_1),
        (2, "fits agree with tau-inversion oracles", criterion_2),
        (3, "truncated vine ignores redundant variable", criterion_3),
        (4, "pair-copula fit counts", criterion_4),
        (5, "redundancy example", criterion_5),
        (6, "DGP1 selection accuracy", criterion_6),
        (7, "DGP1 and DGP2 pinball losses", criterion_7),
        (8, "p=100 scalability", criterion_8),
        (9, "genomics planted signal", criterion_9),
        (10, "no quantile crossing", criterion_10),
    ];
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed.push(id);
        }
        println!(
            "{} criterion {id:>2} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed.is_empty() {
        println!("all selected criteria passed");
        return;
    }
    println!("failed criteria: {failed:?}");
    if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
