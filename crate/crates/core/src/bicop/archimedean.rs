//! Two-parameter Archimedean families (BB1, BB6, BB7, BB8; Joe as BB6 with
//! `delta = 1`) evaluated through their generator `phi` and its inverse `psi`.
//!
//! With `s = phi(u) + phi(v)`:
//!
//! ```text
//! C(u, v)  = psi(s)
//! h(v | u) = psi'(s) * phi'(u)
//! c(u, v)  = psi''(s) * phi'(u) * phi'(v)
//! ```
//!
//! Everything is carried in log space; the arguments are passed together with
//! their complements so tails near one keep their precision.

use std::f64::consts::LN_2;

/// `ln(1 - exp(x))` for `x <= 0`.
#[inline]
pub(crate) fn ln1mexp(x: f64) -> f64 {
    if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(exp(x) - 1)` for `x > 0`.
#[inline]
pub(crate) fn ln_expm1(x: f64) -> f64 {
    if x > 1.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `ln(1 + exp(x))`.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn logaddexp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// A point of the unit interval with its complement and both logarithms.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Pt {
    pub tb: f64,
    pub ln_t: f64,
    pub ln_tb: f64,
}

impl Pt {
    #[inline]
    pub(crate) fn new(t: f64) -> Self {
        let tb = 1.0 - t;
        Pt {
            tb,
            ln_t: t.ln(),
            ln_tb: tb.ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Generator {
    Bb1 { theta: f64, delta: f64 },
    /// Joe is `Bb6 { theta, delta: 1 }`.
    Bb6 { theta: f64, delta: f64 },
    Bb7 { theta: f64, delta: f64 },
    Bb8 { theta: f64, delta: f64, ln_eta: f64 },
}

impl Generator {
    pub(crate) fn bb8(theta: f64, delta: f64) -> Self {
        let ln_eta = ln1mexp(theta * (1.0 - delta).ln());
        Generator::Bb8 {
            theta,
            delta,
            ln_eta,
        }
    }

    /// `(ln phi(t), ln(-phi'(t)))` at a point.
    pub(crate) fn eval(&self, p: &Pt) -> (f64, f64) {
        match *self {
            Generator::Bb1 { theta, delta } => {
                let ln_w = ln_expm1(-theta * p.ln_t);
                let ln_phi = delta * ln_w;
                let ln_dphi =
                    delta.ln() + (delta - 1.0) * ln_w + theta.ln() - (theta + 1.0) * p.ln_t;
                (ln_phi, ln_dphi)
            }
            Generator::Bb6 { theta, delta } => {
                let a = -ln1mexp(theta * p.ln_tb);
                let ln_a = a.ln();
                let ln_phi = delta * ln_a;
                let ln_dphi =
                    delta.ln() + (delta - 1.0) * ln_a + theta.ln() + (theta - 1.0) * p.ln_tb + a;
                (ln_phi, ln_dphi)
            }
            Generator::Bb7 { theta, delta } => {
                let ln_b = ln1mexp(theta * p.ln_tb);
                let ln_phi = ln_expm1(-delta * ln_b);
                let ln_dphi =
                    delta.ln() - (delta + 1.0) * ln_b + theta.ln() + (theta - 1.0) * p.ln_tb;
                (ln_phi, ln_dphi)
            }
            Generator::Bb8 {
                theta,
                delta,
                ln_eta,
            } => {
                // phi = -ln1p((D - eta) / eta), D - eta = (1-d)^th - (1-d*t)^th
                let diff = if delta >= 1.0 {
                    -(theta * p.ln_tb).exp()
                } else {
                    let one_m_d = 1.0 - delta;
                    -(theta * one_m_d.ln()).exp()
                        * (theta * (delta * p.tb / one_m_d).ln_1p()).exp_m1()
                };
                let ln_phi = (-(diff / ln_eta.exp()).ln_1p()).ln();
                let ln_1mdt = if delta >= 1.0 {
                    p.ln_tb
                } else {
                    ((1.0 - delta) + delta * p.tb).ln()
                };
                let ln_d = ln1mexp(theta * ln_1mdt);
                let ln_dphi = theta.ln() + delta.ln() + (theta - 1.0) * ln_1mdt - ln_d;
                (ln_phi, ln_dphi)
            }
        }
    }

    /// `ln(-psi'(s))`, given both `s` and `ln s`.
    pub(crate) fn ln_neg_dpsi(&self, s: f64, ln_s: f64) -> f64 {
        match *self {
            Generator::Bb1 { theta, delta } => {
                let ln_w = ln_s / delta;
                let l1pw = softplus(ln_w);
                ln_w - (1.0 / theta + 1.0) * l1pw - theta.ln() - delta.ln() - ln_s
            }
            Generator::Bb6 { theta, delta } => {
                let ln_a = ln_s / delta;
                let a = ln_a.exp();
                let ln_1me = ln1mexp(-a);
                -theta.ln() - delta.ln() + (1.0 / theta - 1.0) * ln_1me - a + (1.0 - delta) * ln_a
            }
            Generator::Bb7 { theta, delta } => {
                let l1ps = softplus(ln_s);
                let ln_b = -l1ps / delta;
                let ln_1mb = ln1mexp(ln_b);
                -theta.ln() - delta.ln() + (1.0 / theta - 1.0) * ln_1mb - (1.0 / delta + 1.0) * l1ps
            }
            Generator::Bb8 {
                theta,
                delta,
                ln_eta,
            } => {
                let ln_q = bb8_ln_q(theta, delta, ln_eta, s);
                ln_eta - s + (1.0 / theta - 1.0) * ln_q - theta.ln() - delta.ln()
            }
        }
    }

    /// `ln psi''(s)`.
    pub(crate) fn ln_d2psi(&self, s: f64, ln_s: f64) -> f64 {
        match *self {
            Generator::Bb1 { theta, delta } => {
                let ln_w = ln_s / delta;
                let l1pw = softplus(ln_w);
                // w / (1 + w)
                let frac = (ln_w - l1pw).exp();
                let bracket = l1pw + ((1.0 - 1.0 / delta) + (1.0 + 1.0 / theta) / delta * frac).ln();
                -theta.ln() - delta.ln() + (1.0 / delta - 2.0) * ln_s - (1.0 / theta + 2.0) * l1pw
                    + bracket
            }
            Generator::Bb6 { theta, delta } => {
                let ln_a = ln_s / delta;
                let a = ln_a.exp();
                let e = (-a).exp();
                let ln_1me = ln1mexp(-a);
                let bracket = a * (1.0 - e / theta) + (delta - 1.0) * (-(-a).exp_m1());
                ln_a - a + (1.0 / theta - 2.0) * ln_1me - theta.ln() - 2.0 * delta.ln() - 2.0 * ln_s
                    + bracket.ln()
            }
            Generator::Bb7 { theta, delta } => {
                let l1ps = softplus(ln_s);
                let ln_b = -l1ps / delta;
                let b = ln_b.exp();
                let ln_1mb = ln1mexp(ln_b);
                let one_m_b = -ln_b.exp_m1();
                let bracket = (1.0 - 1.0 / theta) * b / delta + (1.0 + 1.0 / delta) * one_m_b;
                -theta.ln() - delta.ln() + (1.0 / theta - 2.0) * ln_1mb - (1.0 / delta + 2.0) * l1ps
                    + bracket.ln()
            }
            Generator::Bb8 {
                theta,
                delta,
                ln_eta,
            } => {
                let ln_q = bb8_ln_q(theta, delta, ln_eta, s);
                let last = (-(ln_eta - s).exp() / theta).ln_1p();
                ln_eta - s + (1.0 / theta - 2.0) * ln_q - theta.ln() - delta.ln() + last
            }
        }
    }

    /// Inverse generator, returned as `(t, 1 - t)`.
    pub(crate) fn psi(&self, s: f64, ln_s: f64) -> (f64, f64) {
        match *self {
            Generator::Bb1 { theta, delta } => {
                let l1pw = softplus(ln_s / delta);
                let x = -l1pw / theta;
                (x.exp(), -x.exp_m1())
            }
            Generator::Bb6 { theta, delta } => {
                let a = (ln_s / delta).exp();
                let ln_ub = ln1mexp(-a) / theta;
                (-ln_ub.exp_m1(), ln_ub.exp())
            }
            Generator::Bb7 { theta, delta } => {
                let ln_b = -softplus(ln_s) / delta;
                let ln_ub = ln1mexp(ln_b) / theta;
                (-ln_ub.exp_m1(), ln_ub.exp())
            }
            Generator::Bb8 {
                theta,
                delta,
                ln_eta,
            } => {
                let ln_1mdt = bb8_ln_q(theta, delta, ln_eta, s) / theta;
                let t = -ln_1mdt.exp_m1() / delta;
                let tb = (ln_1mdt.exp() - (1.0 - delta)) / delta;
                (t, tb)
            }
        }
    }

    /// `phi(t) / phi'(t)`, the integrand of the Kendall's tau formula.
    pub(crate) fn tau_integrand(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        let (lp, ld) = self.eval(&Pt::new(t));
        let v = -(lp - ld).exp();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    }
}

/// `ln Q` with `Q = 1 - eta * exp(-s) = (1-delta)^theta + eta * (1 - exp(-s))`.
#[inline]
fn bb8_ln_q(theta: f64, delta: f64, ln_eta: f64, s: f64) -> f64 {
    let base = if delta >= 1.0 {
        0.0
    } else {
        (theta * (1.0 - delta).ln()).exp()
    };
    (base + ln_eta.exp() * (-(-s).exp_m1())).ln()
}
