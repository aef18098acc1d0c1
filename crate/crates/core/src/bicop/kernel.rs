//! Unrotated family kernels. All families here are exchangeable, so a single
//! `h(cond, arg) = P(A <= arg | B = cond)` serves both conditioning directions.

use super::archimedean::{logaddexp, Generator, Pt};
use crate::numeric::{bisect_increasing, integrate};
use crate::special::{ln_gamma, norm_cdf, norm_ppf, t_cdf, t_ppf};
use crate::{clamp_unit, Error, Result};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kernel {
    Indep,
    Gauss { rho: f64 },
    T { rho: f64, nu: f64 },
    Clayton { theta: f64 },
    Gumbel { theta: f64 },
    Frank { theta: f64 },
    Arch(Generator),
}

impl Kernel {
    pub(crate) fn ln_pdf(&self, u: f64, v: f64) -> f64 {
        match *self {
            Kernel::Indep => 0.0,
            Kernel::Gauss { rho } => gauss_ln_pdf(norm_ppf(u), norm_ppf(v), rho),
            Kernel::T { rho, nu } => {
                let c0 = t_const(rho, nu);
                t_ln_pdf(t_ppf(u, nu), t_ppf(v, nu), rho, nu, c0)
            }
            Kernel::Clayton { theta } => clayton_ln_pdf(theta, u.ln(), v.ln()),
            Kernel::Gumbel { theta } => gumbel_ln_pdf(theta, u.ln(), v.ln()),
            Kernel::Frank { theta } => frank_ln_pdf(theta, u, v),
            Kernel::Arch(g) => arch_ln_pdf(&g, &Pt::new(u), &Pt::new(v)),
        }
    }

    pub(crate) fn pdf(&self, u: f64, v: f64) -> f64 {
        self.ln_pdf(u, v).exp()
    }

    /// `P(A <= arg | B = cond)`.
    pub(crate) fn h(&self, cond: f64, arg: f64) -> f64 {
        let r = match *self {
            Kernel::Indep => return arg,
            Kernel::Gauss { rho } => {
                let x = norm_ppf(cond);
                let y = norm_ppf(arg);
                norm_cdf((y - rho * x) / (1.0 - rho * rho).sqrt())
            }
            Kernel::T { rho, nu } => {
                let x = t_ppf(cond, nu);
                let y = t_ppf(arg, nu);
                let scale = ((nu + x * x) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
                t_cdf((y - rho * x) / scale, nu + 1.0)
            }
            Kernel::Clayton { theta } => {
                let (lu, lv) = (cond.ln(), arg.ln());
                let ln_s = clayton_ln_s(theta, lu, lv);
                (-(theta + 1.0) * lu - (1.0 / theta + 1.0) * ln_s).exp()
            }
            Kernel::Gumbel { theta } => {
                let lu = cond.ln();
                let lx = (-lu).ln();
                let ln_a = logaddexp(theta * lx, theta * (-arg.ln()).ln());
                let ln_c = -(ln_a / theta).exp();
                (ln_c - lu + (theta - 1.0) * lx + (1.0 / theta - 1.0) * ln_a).exp()
            }
            Kernel::Frank { theta } => {
                if theta.abs() < 1e-12 {
                    return arg;
                }
                let num = (-theta * arg).exp_m1() * (-theta * cond).exp();
                let den = (-theta).exp_m1() + (-theta * cond).exp_m1() * (-theta * arg).exp_m1();
                num / den
            }
            Kernel::Arch(g) => {
                let (lpu, ldu) = g.eval(&Pt::new(cond));
                let (lpv, _) = g.eval(&Pt::new(arg));
                let ln_s = logaddexp(lpu, lpv);
                (g.ln_neg_dpsi(ln_s.exp(), ln_s) + ldu).exp()
            }
        };
        if r.is_nan() {
            arg
        } else {
            r.clamp(0.0, 1.0)
        }
    }

    /// Solves `h(cond, arg) = p` for `arg`.
    pub(crate) fn hinv(&self, p: f64, cond: f64) -> Result<f64> {
        let r = match *self {
            Kernel::Indep => return Ok(p),
            Kernel::Gauss { rho } => {
                let x = norm_ppf(cond);
                norm_cdf(norm_ppf(p) * (1.0 - rho * rho).sqrt() + rho * x)
            }
            Kernel::T { rho, nu } => {
                let x = t_ppf(cond, nu);
                let scale = ((nu + x * x) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
                t_cdf(t_ppf(p, nu + 1.0) * scale + rho * x, nu)
            }
            Kernel::Clayton { theta } => {
                let z = (-theta * cond.ln()).exp() * (-theta / (theta + 1.0) * p.ln()).exp_m1();
                (-z.ln_1p() / theta).exp()
            }
            Kernel::Frank { theta } => {
                if theta.abs() < 1e-12 {
                    return Ok(p);
                }
                let a = -(-theta).exp_m1();
                let r = a / ((1.0 / p - 1.0) * (-theta * cond).exp() + 1.0);
                -(-r).ln_1p() / theta
            }
            _ => return self.hinv_newton(p, cond),
        };
        if r.is_finite() {
            Ok(clamp_unit(r))
        } else {
            Err(Error::Numerical(format!(
                "inverse h-function is not finite at p={p}, u={cond}"
            )))
        }
    }

    /// Safeguarded Newton iteration with the density as derivative.
    fn hinv_newton(&self, p: f64, cond: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut x = p.clamp(1e-6, 1.0 - 1e-6);
        for iter in 0..200 {
            let xc = clamp_unit(x);
            let diff = self.h(cond, xc) - p;
            if diff.abs() <= 1e-12 * p.min(1.0 - p) {
                return Ok(xc);
            }
            if diff < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo < 1e-15 {
                return Ok(clamp_unit(0.5 * (lo + hi)));
            }
            let d = self.pdf(cond, xc);
            let mut next = x - diff / d;
            if iter >= 60 || !next.is_finite() || next <= lo || next >= hi {
                next = 0.5 * (lo + hi);
            }
            x = next;
        }
        Err(Error::Numerical(format!(
            "inverse h-function did not converge at p={p}, u={cond}"
        )))
    }

    /// Copula CDF where a cheap evaluation exists.
    pub(crate) fn cdf(&self, u: f64, v: f64) -> Option<f64> {
        match *self {
            Kernel::Indep => Some(u * v),
            Kernel::Gauss { .. } | Kernel::T { .. } => None,
            Kernel::Clayton { theta } => Some((-clayton_ln_s(theta, u.ln(), v.ln()) / theta).exp()),
            Kernel::Gumbel { theta } => {
                let ln_a = logaddexp(theta * (-u.ln()).ln(), theta * (-v.ln()).ln());
                Some((-(ln_a / theta).exp()).exp())
            }
            Kernel::Frank { theta } => {
                if theta.abs() < 1e-12 {
                    return Some(u * v);
                }
                let z = (-theta * u).exp_m1() * (-theta * v).exp_m1() / (-theta).exp_m1();
                Some(-z.ln_1p() / theta)
            }
            Kernel::Arch(g) => {
                let (lpu, _) = g.eval(&Pt::new(u));
                let (lpv, _) = g.eval(&Pt::new(v));
                let ln_s = logaddexp(lpu, lpv);
                Some(g.psi(ln_s.exp(), ln_s).0)
            }
        }
    }

    pub(crate) fn tau(&self) -> f64 {
        match *self {
            Kernel::Indep => 0.0,
            Kernel::Gauss { rho } | Kernel::T { rho, .. } => 2.0 * rho.asin() / PI,
            Kernel::Clayton { theta } => theta / (theta + 2.0),
            Kernel::Gumbel { theta } => 1.0 - 1.0 / theta,
            Kernel::Frank { theta } => frank_tau(theta),
            Kernel::Arch(Generator::Bb1 { theta, delta }) => 1.0 - 2.0 / (delta * (theta + 2.0)),
            Kernel::Arch(g) => 1.0 + 4.0 * integrate(|t| g.tau_integrand(t), 0.0, 1.0, 1e-10),
        }
    }
}

/// `ln(u^-theta + v^-theta - 1)` from `ln u`, `ln v`.
#[inline]
pub(crate) fn clayton_ln_s(theta: f64, lu: f64, lv: f64) -> f64 {
    let a = (-theta * lu).exp_m1();
    let b = (-theta * lv).exp_m1();
    (a + b).ln_1p()
}

#[inline]
pub(crate) fn clayton_ln_pdf(theta: f64, lu: f64, lv: f64) -> f64 {
    let ln_s = clayton_ln_s(theta, lu, lv);
    (1.0 + theta).ln() - (1.0 + theta) * (lu + lv) - (1.0 / theta + 2.0) * ln_s
}

#[inline]
pub(crate) fn gauss_ln_pdf(x: f64, y: f64, rho: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    -0.5 * r2.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)
}

/// Normalising constant of the t copula log-density.
pub(crate) fn t_const(rho: f64, nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 2.0)) + ln_gamma(0.5 * nu)
        - 2.0 * ln_gamma(0.5 * (nu + 1.0))
        - 0.5 * (1.0 - rho * rho).ln()
}

#[inline]
pub(crate) fn t_ln_pdf(x: f64, y: f64, rho: f64, nu: f64, c0: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    let q = (x * x + y * y - 2.0 * rho * x * y) / (nu * r2);
    c0 - 0.5 * (nu + 2.0) * q.ln_1p()
        + 0.5 * (nu + 1.0) * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p())
}

/// Gumbel log-density from `ln u`, `ln v`.
#[inline]
pub(crate) fn gumbel_ln_pdf(theta: f64, lu: f64, lv: f64) -> f64 {
    let (lx, ly) = ((-lu).ln(), (-lv).ln());
    let ln_a = logaddexp(theta * lx, theta * ly);
    let a_inv = (ln_a / theta).exp();
    -a_inv - lu - lv + (theta - 1.0) * (lx + ly) + (2.0 / theta - 2.0) * ln_a
        + ((theta - 1.0) / a_inv).ln_1p()
}

#[inline]
pub(crate) fn frank_ln_pdf(theta: f64, u: f64, v: f64) -> f64 {
    if theta.abs() < 1e-12 {
        return 0.0;
    }
    let em = (-theta).exp_m1();
    let den = em + (-theta * u).exp_m1() * (-theta * v).exp_m1();
    (theta * -em).ln() - theta * (u + v) - 2.0 * den.abs().ln()
}

#[inline]
pub(crate) fn arch_ln_pdf(g: &Generator, pu: &Pt, pv: &Pt) -> f64 {
    let (lpu, ldu) = g.eval(pu);
    let (lpv, ldv) = g.eval(pv);
    let ln_s = logaddexp(lpu, lpv);
    g.ln_d2psi(ln_s.exp(), ln_s) + ldu + ldv
}

pub(crate) fn frank_tau(theta: f64) -> f64 {
    if theta.abs() < 1e-8 {
        return 0.0;
    }
    let debye = integrate(
        |t| if t == 0.0 { 1.0 } else { t / t.exp_m1() },
        0.0,
        theta,
        1e-12,
    ) / theta;
    1.0 - 4.0 / theta * (1.0 - debye)
}

/// Frank parameter with the given Kendall's tau.
pub(crate) fn frank_theta_from_tau(tau: f64) -> f64 {
    bisect_increasing(frank_tau, -35.0, 35.0, tau, 1e-6)
}
