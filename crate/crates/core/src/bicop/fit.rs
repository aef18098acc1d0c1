//! Maximum-likelihood fitting and information-criterion family selection.

use super::archimedean::{Generator, Pt};
use super::kernel::{
    arch_ln_pdf, clayton_ln_pdf, frank_ln_pdf, frank_theta_from_tau, gumbel_ln_pdf,
    t_const, t_ln_pdf, Kernel,
};
use super::{Bicop, Family, FittedBicop, Rotation};
use crate::numeric::{bisect_increasing, brent_min, nelder_mead};
use crate::special::{norm_ppf, t_ppf};
use crate::{clamp_unit, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const MAX_EVALS: usize = 500;
const REL_TOL: f64 = 1e-8;
const MIN_OBS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Aic,
    Bic,
}

/// Kendall's tau-b of two samples.
pub fn empirical_tau(u: &[f64], v: &[f64]) -> f64 {
    kendalls::tau_b_with_comparator(u, v, |a: &f64, b: &f64| a.total_cmp(b))
        .map(|(t, _)| t)
        .unwrap_or(f64::NAN)
}

/// All families with the rotations matching the sign of `tau_hat`.
pub fn default_candidates(tau_hat: f64) -> Vec<(Family, Rotation)> {
    let rotations = if tau_hat >= 0.0 {
        [Rotation::R0, Rotation::R180]
    } else {
        [Rotation::R90, Rotation::R270]
    };
    let mut out = Vec::new();
    for f in Family::ALL {
        if f.is_radially_symmetric() {
            out.push((f, Rotation::R0));
        } else {
            for r in rotations {
                out.push((f, r));
            }
        }
    }
    out
}

fn check_data(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::InvalidInput(format!(
            "sample lengths differ: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    if u.len() < MIN_OBS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_OBS} observations, got {}",
            u.len()
        )));
    }
    if u.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite pseudo-observation".into()));
    }
    let constant = |x: &[f64]| x.iter().all(|&a| a == x[0]);
    if constant(u) || constant(v) {
        return Err(Error::Degenerate("all observations tied".into()));
    }
    Ok(())
}

/// Fits one family and rotation by maximum likelihood.
pub fn fit_mle(u: &[f64], v: &[f64], family: Family, rotation: Rotation) -> Result<FittedBicop> {
    check_data(u, v)?;
    if family == Family::Independence {
        return Ok(FittedBicop::independence(u.len()));
    }
    // Probe admissibility before doing any work.
    if family.is_radially_symmetric() && rotation != Rotation::R0 {
        return Err(Error::ParameterOutOfBounds {
            family: family.name().into(),
            detail: format!("rotation {} not admissible", rotation.degrees()),
        });
    }
    let (a, b): (Vec<f64>, Vec<f64>) = u
        .iter()
        .zip(v)
        .map(|(&x, &y)| {
            let (x, y) = (clamp_unit(x), clamp_unit(y));
            let (p, q) = match rotation {
                Rotation::R0 => (x, y),
                Rotation::R90 => (y, 1.0 - x),
                Rotation::R180 => (1.0 - x, 1.0 - y),
                Rotation::R270 => (1.0 - y, x),
            };
            (clamp_unit(p), clamp_unit(q))
        })
        .unzip();
    let tau = empirical_tau(&a, &b);
    if !tau.is_finite() {
        return Err(Error::Degenerate("Kendall's tau undefined".into()));
    }
    let params = match family {
        Family::Independence => unreachable!(),
        Family::Gaussian => fit_gaussian(&a, &b, tau),
        Family::StudentT => fit_t(&a, &b, tau),
        Family::Clayton => fit_clayton(&a, &b, tau),
        Family::Gumbel => fit_gumbel(&a, &b, tau),
        Family::Frank => fit_frank(&a, &b, tau),
        Family::Joe => fit_joe(&a, &b, tau),
        Family::Bb1 | Family::Bb6 | Family::Bb7 | Family::Bb8 => fit_bb(&a, &b, family),
    };
    let copula = Bicop::new(family, rotation, &params)?;
    let loglik = copula.loglik(u, v);
    if !loglik.is_finite() {
        return Err(Error::Numerical(format!(
            "log-likelihood of fitted {copula} is not finite"
        )));
    }
    Ok(FittedBicop::new(copula, loglik, u.len()))
}

/// Picks the candidate with the lowest criterion; ties keep the earlier candidate.
pub fn select_family(
    u: &[f64],
    v: &[f64],
    criterion: Criterion,
    candidates: &[(Family, Rotation)],
) -> Result<FittedBicop> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    check_data(u, v)?;
    let fits: Vec<Result<FittedBicop>> = candidates
        .par_iter()
        .map(|&(f, r)| fit_mle(u, v, f, r))
        .collect();
    let mut best: Option<FittedBicop> = None;
    let mut first_err = None;
    for fit in fits {
        match fit {
            Ok(fit) => {
                let better = match &best {
                    None => true,
                    Some(b) => fit.criterion(criterion) < b.criterion(criterion),
                };
                if better {
                    best = Some(fit);
                }
            }
            Err(e) => {
                log::debug!("candidate fit failed: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::EmptyCandidates),
    }
}

/// [`select_family`] over [`default_candidates`] for the sample's tau.
pub fn select_family_default(u: &[f64], v: &[f64], criterion: Criterion) -> Result<FittedBicop> {
    check_data(u, v)?;
    let tau = empirical_tau(u, v);
    if !tau.is_finite() {
        return Err(Error::Degenerate("Kendall's tau undefined".into()));
    }
    select_family(u, v, criterion, &default_candidates(tau))
}

fn neg(ll: f64) -> f64 {
    if ll.is_nan() {
        f64::INFINITY
    } else {
        -ll
    }
}

fn fit_gaussian(a: &[f64], b: &[f64], tau: f64) -> Vec<f64> {
    let n = a.len() as f64;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&p, &q) in a.iter().zip(b) {
        let (x, y) = (norm_ppf(p), norm_ppf(q));
        sxx += x * x + y * y;
        sxy += x * y;
    }
    let obj = |rho: f64| {
        let r2 = 1.0 - rho * rho;
        neg(-0.5 * n * r2.ln() - (rho * rho * sxx - 2.0 * rho * sxy) / (2.0 * r2))
    };
    let x0 = (0.5 * PI * tau).sin().clamp(-0.99, 0.99);
    let m = brent_min(obj, -0.9999, 0.9999, x0, REL_TOL, MAX_EVALS);
    m.x
}

fn fit_t(a: &[f64], b: &[f64], tau: f64) -> Vec<f64> {
    let rho0 = (0.5 * PI * tau).sin().clamp(-0.99, 0.99);
    let mut x = vec![0.0; a.len()];
    let mut y = vec![0.0; b.len()];
    // Profile likelihood: for each nu the quantile transforms are computed
    // once and rho is optimised on them.
    let mut profile = |ln_nu: f64| -> (f64, f64) {
        let nu = ln_nu.exp();
        for i in 0..a.len() {
            x[i] = t_ppf(a[i], nu);
            y[i] = t_ppf(b[i], nu);
        }
        let obj = |rho: f64| {
            let c0 = t_const(rho, nu);
            neg(x.iter().zip(&y).map(|(&p, &q)| t_ln_pdf(p, q, rho, nu, c0)).sum())
        };
        let m = brent_min(obj, -0.9999, 0.9999, rho0, REL_TOL, 200);
        (m.x[0], m.value)
    };
    let m = brent_min(
        |ln_nu| profile(ln_nu).1,
        2f64.ln(),
        50f64.ln(),
        8f64.ln(),
        1e-6,
        MAX_EVALS,
    );
    let ln_nu = m.x[0];
    let (rho, _) = profile(ln_nu);
    vec![rho, ln_nu.exp().clamp(2.0, 50.0)]
}

fn logs(a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| x.ln()).collect()
}

fn fit_clayton(a: &[f64], b: &[f64], tau: f64) -> Vec<f64> {
    let (la, lb) = (logs(a), logs(b));
    let obj = |theta: f64| {
        neg(la.iter().zip(&lb).map(|(&p, &q)| clayton_ln_pdf(theta, p, q)).sum())
    };
    let x0 = if tau > 0.0 { 2.0 * tau / (1.0 - tau) } else { 1e-4 };
    brent_min(obj, 1e-4, 28.0, x0.clamp(1e-4, 28.0), REL_TOL, MAX_EVALS).x
}

fn fit_gumbel(a: &[f64], b: &[f64], tau: f64) -> Vec<f64> {
    let (la, lb) = (logs(a), logs(b));
    let obj = |theta: f64| {
        neg(la.iter().zip(&lb).map(|(&p, &q)| gumbel_ln_pdf(theta, p, q)).sum())
    };
    let x0 = if tau > 0.0 { 1.0 / (1.0 - tau) } else { 1.0 };
    brent_min(obj, 1.0, 50.0, x0.clamp(1.0, 50.0), REL_TOL, MAX_EVALS).x
}

fn fit_frank(a: &[f64], b: &[f64], tau: f64) -> Vec<f64> {
    let obj = |theta: f64| {
        neg(a.iter().zip(b).map(|(&p, &q)| frank_ln_pdf(theta, p, q)).sum())
    };
    let x0 = frank_theta_from_tau(tau.clamp(-0.9, 0.9));
    let mut theta = brent_min(obj, -35.0, 35.0, x0, REL_TOL, MAX_EVALS).x[0];
    if theta.abs() < 1e-8 {
        theta = 1e-8f64.copysign(theta);
    }
    vec![theta]
}

fn arch_loglik(g: &Generator, pa: &[Pt], pb: &[Pt]) -> f64 {
    pa.iter().zip(pb).map(|(p, q)| arch_ln_pdf(g, p, q)).sum()
}

fn fit_joe(a: &[f64], b: &[f64], tau: f64) -> Vec<f64> {
    let pa: Vec<Pt> = a.iter().map(|&x| Pt::new(x)).collect();
    let pb: Vec<Pt> = b.iter().map(|&x| Pt::new(x)).collect();
    let obj = |theta: f64| neg(arch_loglik(&Generator::Bb6 { theta, delta: 1.0 }, &pa, &pb));
    let (lo, hi) = (1.0 + 1e-4, 30.0);
    let joe_tau = |theta: f64| Kernel::Arch(Generator::Bb6 { theta, delta: 1.0 }).tau();
    let x0 = if tau > 0.0 {
        bisect_increasing(joe_tau, lo, hi, tau.min(0.9), 1e-3)
    } else {
        lo
    };
    brent_min(obj, lo, hi, x0, REL_TOL, MAX_EVALS).x
}

/// Optimiser bounds and seed grid for the two-parameter Archimedean families.
fn bb_setup(family: Family) -> ([(f64, f64); 2], [f64; 5], [f64; 5]) {
    match family {
        Family::Bb1 => (
            [(1e-4, 7.0), (1.0, 7.0)],
            [0.1, 0.3, 0.7, 1.5, 3.5],
            [1.0, 1.2, 1.6, 2.5, 4.5],
        ),
        Family::Bb6 => (
            [(1.0, 6.0), (1.0, 8.0)],
            [1.0, 1.3, 1.8, 2.8, 4.5],
            [1.0, 1.2, 1.6, 2.5, 4.5],
        ),
        Family::Bb7 => (
            [(1.0, 6.0), (1e-4, 25.0)],
            [1.0, 1.3, 1.8, 2.8, 4.5],
            [0.1, 0.3, 0.7, 1.5, 4.0],
        ),
        Family::Bb8 => (
            [(1.0, 8.0), (1e-4, 1.0)],
            [1.2, 2.0, 3.0, 4.5, 6.5],
            [0.3, 0.5, 0.7, 0.85, 0.97],
        ),
        _ => unreachable!("not a two-parameter Archimedean family"),
    }
}

fn make_generator(family: Family, x: &[f64]) -> Generator {
    match family {
        Family::Bb1 => Generator::Bb1 {
            theta: x[0],
            delta: x[1],
        },
        Family::Bb6 => Generator::Bb6 {
            theta: x[0],
            delta: x[1],
        },
        Family::Bb7 => Generator::Bb7 {
            theta: x[0],
            delta: x[1],
        },
        Family::Bb8 => Generator::bb8(x[0], x[1]),
        _ => unreachable!("not a two-parameter Archimedean family"),
    }
}

fn fit_bb(a: &[f64], b: &[f64], family: Family) -> Vec<f64> {
    let pa: Vec<Pt> = a.iter().map(|&x| Pt::new(x)).collect();
    let pb: Vec<Pt> = b.iter().map(|&x| Pt::new(x)).collect();
    let (bounds, g1, g2) = bb_setup(family);
    let obj = |x: &[f64]| neg(arch_loglik(&make_generator(family, x), &pa, &pb));
    let mut best = (f64::INFINITY, [g1[0], g2[0]]);
    for &t in &g1 {
        for &d in &g2 {
            let val = obj(&[t, d]);
            if val < best.0 {
                best = (val, [t, d]);
            }
        }
    }
    let used = g1.len() * g2.len();
    let steps: Vec<f64> = best
        .1
        .iter()
        .zip(&bounds)
        .map(|(&x, &(lo, hi))| (0.1 * x.abs()).max(0.02 * (hi - lo)))
        .collect();
    let m = nelder_mead(obj, &best.1, &steps, &bounds, REL_TOL, MAX_EVALS - used);
    if m.value <= best.0 {
        m.x
    } else {
        best.1.to_vec()
    }
}
