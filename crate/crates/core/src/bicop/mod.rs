//! Parametric bivariate copulas.
//!
//! Rotations follow the density convention
//! `c90(u, v) = c(v, 1 - u)`, `c180(u, v) = c(1 - u, 1 - v)`,
//! `c270(u, v) = c(1 - v, u)`.
//!
//! h-functions are named by the conditioning argument: [`Cond::First`] gives
//! `P(U2 <= v | U1 = u) = dC(u, v)/du`, [`Cond::Second`] gives
//! `P(U1 <= v | U2 = u) = dC(v, u)/du`.

mod archimedean;
mod fit;
mod kernel;

pub use fit::{
    default_candidates, empirical_tau, fit_mle, select_family, select_family_default, Criterion,
};

use crate::{clamp_unit, Error, Result};
use archimedean::Generator;
use kernel::Kernel;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Independence,
    Gaussian,
    StudentT,
    Clayton,
    Gumbel,
    Frank,
    Joe,
    #[serde(rename = "BB1")]
    Bb1,
    #[serde(rename = "BB6")]
    Bb6,
    #[serde(rename = "BB7")]
    Bb7,
    #[serde(rename = "BB8")]
    Bb8,
}

/// Bounds of one parameter; `open_*` marks an excluded endpoint.
#[derive(Debug, Clone, Copy)]
pub struct ParamBounds {
    pub lo: f64,
    pub hi: f64,
    pub open_lo: bool,
    pub open_hi: bool,
}

const fn pb(lo: f64, hi: f64, open_lo: bool, open_hi: bool) -> ParamBounds {
    ParamBounds {
        lo,
        hi,
        open_lo,
        open_hi,
    }
}

impl ParamBounds {
    fn contains(&self, x: f64) -> bool {
        let lo_ok = if self.open_lo { x > self.lo } else { x >= self.lo };
        let hi_ok = if self.open_hi { x < self.hi } else { x <= self.hi };
        x.is_finite() && lo_ok && hi_ok
    }
}

impl Family {
    /// Fixed candidate ordering used for tie-breaking.
    pub const ALL: [Family; 11] = [
        Family::Independence,
        Family::Bb1,
        Family::Bb6,
        Family::Bb7,
        Family::Bb8,
        Family::Clayton,
        Family::Frank,
        Family::Gaussian,
        Family::Gumbel,
        Family::Joe,
        Family::StudentT,
    ];

    pub fn n_params(self) -> usize {
        match self {
            Family::Independence => 0,
            Family::Gaussian | Family::Clayton | Family::Gumbel | Family::Frank | Family::Joe => 1,
            Family::StudentT | Family::Bb1 | Family::Bb6 | Family::Bb7 | Family::Bb8 => 2,
        }
    }

    /// Families that only admit rotation 0.
    pub fn is_radially_symmetric(self) -> bool {
        matches!(
            self,
            Family::Independence | Family::Gaussian | Family::StudentT | Family::Frank
        )
    }

    pub fn bounds(self) -> &'static [ParamBounds] {
        const GAUSS: [ParamBounds; 1] = [pb(-1.0, 1.0, true, true)];
        const T: [ParamBounds; 2] = [pb(-1.0, 1.0, true, true), pb(2.0, 50.0, false, false)];
        const CLAYTON: [ParamBounds; 1] = [pb(0.0, 28.0, true, false)];
        const GUMBEL: [ParamBounds; 1] = [pb(1.0, 50.0, false, false)];
        const FRANK: [ParamBounds; 1] = [pb(-35.0, 35.0, false, false)];
        const JOE: [ParamBounds; 1] = [pb(1.0, 30.0, true, false)];
        const BB1: [ParamBounds; 2] = [pb(0.0, 7.0, true, false), pb(1.0, 7.0, false, false)];
        const BB6: [ParamBounds; 2] = [pb(1.0, 6.0, false, false), pb(1.0, 8.0, false, false)];
        const BB7: [ParamBounds; 2] = [pb(1.0, 6.0, false, false), pb(0.0, 25.0, true, false)];
        const BB8: [ParamBounds; 2] = [pb(1.0, 8.0, false, false), pb(0.0, 1.0, true, false)];
        match self {
            Family::Independence => &[],
            Family::Gaussian => &GAUSS,
            Family::StudentT => &T,
            Family::Clayton => &CLAYTON,
            Family::Gumbel => &GUMBEL,
            Family::Frank => &FRANK,
            Family::Joe => &JOE,
            Family::Bb1 => &BB1,
            Family::Bb6 => &BB6,
            Family::Bb7 => &BB7,
            Family::Bb8 => &BB8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Independence => "Independence",
            Family::Gaussian => "Gaussian",
            Family::StudentT => "StudentT",
            Family::Clayton => "Clayton",
            Family::Gumbel => "Gumbel",
            Family::Frank => "Frank",
            Family::Joe => "Joe",
            Family::Bb1 => "BB1",
            Family::Bb6 => "BB6",
            Family::Bb7 => "BB7",
            Family::Bb8 => "BB8",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn degrees(self) -> u16 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    /// Rotations that flip the sign of the dependence.
    pub fn is_negative(self) -> bool {
        matches!(self, Rotation::R90 | Rotation::R270)
    }
}

impl TryFrom<u16> for Rotation {
    type Error = String;
    fn try_from(d: u16) -> std::result::Result<Self, String> {
        match d {
            0 => Ok(Rotation::R0),
            90 => Ok(Rotation::R90),
            180 => Ok(Rotation::R180),
            270 => Ok(Rotation::R270),
            _ => Err(format!("invalid rotation {d}")),
        }
    }
}

impl From<Rotation> for u16 {
    fn from(r: Rotation) -> u16 {
        r.degrees()
    }
}

/// Which argument an h-function conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cond {
    First,
    Second,
}

/// Probabilities fed to inverse h-functions keep their full range; only the
/// endpoints themselves are excluded.
#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// A parametric bivariate copula with validated parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BicopRepr", into = "BicopRepr")]
pub struct Bicop {
    family: Family,
    rotation: Rotation,
    params: Vec<f64>,
    kernel: Kernel,
}

#[derive(Serialize, Deserialize)]
struct BicopRepr {
    family: Family,
    rotation: Rotation,
    params: Vec<f64>,
}

impl TryFrom<BicopRepr> for Bicop {
    type Error = Error;
    fn try_from(s: BicopRepr) -> Result<Self> {
        Bicop::new(s.family, s.rotation, &s.params)
    }
}

impl From<Bicop> for BicopRepr {
    fn from(b: Bicop) -> Self {
        BicopRepr {
            family: b.family,
            rotation: b.rotation,
            params: b.params,
        }
    }
}

impl Bicop {
    pub fn new(family: Family, rotation: Rotation, params: &[f64]) -> Result<Self> {
        let oob = |detail: String| Error::ParameterOutOfBounds {
            family: family.name().to_string(),
            detail,
        };
        if params.len() != family.n_params() {
            return Err(oob(format!(
                "expected {} parameters, got {}",
                family.n_params(),
                params.len()
            )));
        }
        if family.is_radially_symmetric() && rotation != Rotation::R0 {
            return Err(oob(format!("rotation {} not admissible", rotation.degrees())));
        }
        for (i, (x, b)) in params.iter().zip(family.bounds()).enumerate() {
            if !b.contains(*x) {
                return Err(oob(format!(
                    "parameter {i} = {x} outside [{}, {}]",
                    b.lo, b.hi
                )));
            }
        }
        if family == Family::Frank && params[0] == 0.0 {
            return Err(oob("theta must be nonzero".into()));
        }
        let kernel = match family {
            Family::Independence => Kernel::Indep,
            Family::Gaussian => Kernel::Gauss { rho: params[0] },
            Family::StudentT => Kernel::T {
                rho: params[0],
                nu: params[1],
            },
            Family::Clayton => Kernel::Clayton { theta: params[0] },
            Family::Gumbel => Kernel::Gumbel { theta: params[0] },
            Family::Frank => Kernel::Frank { theta: params[0] },
            Family::Joe => Kernel::Arch(Generator::Bb6 {
                theta: params[0],
                delta: 1.0,
            }),
            Family::Bb1 => Kernel::Arch(Generator::Bb1 {
                theta: params[0],
                delta: params[1],
            }),
            Family::Bb6 => Kernel::Arch(Generator::Bb6 {
                theta: params[0],
                delta: params[1],
            }),
            Family::Bb7 => Kernel::Arch(Generator::Bb7 {
                theta: params[0],
                delta: params[1],
            }),
            Family::Bb8 => Kernel::Arch(Generator::bb8(params[0], params[1])),
        };
        Ok(Bicop {
            family,
            rotation,
            params: params.to_vec(),
            kernel,
        })
    }

    pub fn independence() -> Self {
        Bicop {
            family: Family::Independence,
            rotation: Rotation::R0,
            params: Vec::new(),
            kernel: Kernel::Indep,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn rotation(&self) -> Rotation {
        self.rotation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.family.n_params()
    }

    pub fn is_independence(&self) -> bool {
        self.family == Family::Independence
    }

    /// Maps `(u1, u2)` to the arguments of the unrotated density.
    #[inline]
    fn unrotate(&self, u1: f64, u2: f64) -> (f64, f64) {
        match self.rotation {
            Rotation::R0 => (u1, u2),
            Rotation::R90 => (u2, 1.0 - u1),
            Rotation::R180 => (1.0 - u1, 1.0 - u2),
            Rotation::R270 => (1.0 - u2, u1),
        }
    }

    pub fn ln_pdf(&self, u1: f64, u2: f64) -> f64 {
        if self.is_independence() {
            return 0.0;
        }
        let (a, b) = self.unrotate(clamp_unit(u1), clamp_unit(u2));
        self.kernel.ln_pdf(clamp_unit(a), clamp_unit(b))
    }

    pub fn pdf(&self, u1: f64, u2: f64) -> f64 {
        self.ln_pdf(u1, u2).exp()
    }

    /// `P(U2 <= u2 | U1 = u1)`.
    pub fn h1(&self, u1: f64, u2: f64) -> f64 {
        if self.is_independence() {
            return u2;
        }
        let (u1, u2) = (clamp_unit(u1), clamp_unit(u2));
        let k = &self.kernel;
        match self.rotation {
            Rotation::R0 => k.h(u1, u2),
            Rotation::R90 => k.h(clamp_unit(1.0 - u1), u2),
            Rotation::R180 => 1.0 - k.h(clamp_unit(1.0 - u1), clamp_unit(1.0 - u2)),
            Rotation::R270 => 1.0 - k.h(u1, clamp_unit(1.0 - u2)),
        }
    }

    /// `P(U1 <= u1 | U2 = u2)`.
    pub fn h2(&self, u1: f64, u2: f64) -> f64 {
        if self.is_independence() {
            return u1;
        }
        let (u1, u2) = (clamp_unit(u1), clamp_unit(u2));
        let k = &self.kernel;
        match self.rotation {
            Rotation::R0 => k.h(u2, u1),
            Rotation::R90 => 1.0 - k.h(u2, clamp_unit(1.0 - u1)),
            Rotation::R180 => 1.0 - k.h(clamp_unit(1.0 - u2), clamp_unit(1.0 - u1)),
            Rotation::R270 => k.h(clamp_unit(1.0 - u2), u1),
        }
    }

    /// Solves `h1(u1, u2) = p` for `u2`.
    pub fn hinv1(&self, p: f64, u1: f64) -> Result<f64> {
        if self.is_independence() {
            return Ok(p);
        }
        let (p, u1) = (clamp_prob(p), clamp_unit(u1));
        let k = &self.kernel;
        let r = match self.rotation {
            Rotation::R0 => k.hinv(p, u1)?,
            Rotation::R90 => k.hinv(p, clamp_unit(1.0 - u1))?,
            Rotation::R180 => 1.0 - k.hinv(clamp_prob(1.0 - p), clamp_unit(1.0 - u1))?,
            Rotation::R270 => 1.0 - k.hinv(clamp_prob(1.0 - p), u1)?,
        };
        Ok(clamp_unit(r))
    }

    /// Solves `h2(u1, u2) = p` for `u1`.
    pub fn hinv2(&self, p: f64, u2: f64) -> Result<f64> {
        if self.is_independence() {
            return Ok(p);
        }
        let (p, u2) = (clamp_prob(p), clamp_unit(u2));
        let k = &self.kernel;
        let r = match self.rotation {
            Rotation::R0 => k.hinv(p, u2)?,
            Rotation::R90 => 1.0 - k.hinv(clamp_prob(1.0 - p), u2)?,
            Rotation::R180 => 1.0 - k.hinv(clamp_prob(1.0 - p), clamp_unit(1.0 - u2))?,
            Rotation::R270 => k.hinv(p, clamp_unit(1.0 - u2))?,
        };
        Ok(clamp_unit(r))
    }

    /// h-function: `P(other <= v | conditioning argument = u)`.
    pub fn hfunc(&self, cond: Cond, v: f64, u: f64) -> f64 {
        match cond {
            Cond::First => self.h1(u, v),
            Cond::Second => self.h2(v, u),
        }
    }

    /// Inverse of [`Bicop::hfunc`] in `v`.
    pub fn hinv(&self, cond: Cond, p: f64, u: f64) -> Result<f64> {
        match cond {
            Cond::First => self.hinv1(p, u),
            Cond::Second => self.hinv2(p, u),
        }
    }

    /// Copula CDF; `None` for the elliptical families.
    pub fn cdf(&self, u1: f64, u2: f64) -> Option<f64> {
        let (u1, u2) = (clamp_unit(u1), clamp_unit(u2));
        let k = &self.kernel;
        match self.rotation {
            Rotation::R0 => k.cdf(u1, u2),
            Rotation::R90 => k.cdf(u2, clamp_unit(1.0 - u1)).map(|c| u2 - c),
            Rotation::R180 => k
                .cdf(clamp_unit(1.0 - u1), clamp_unit(1.0 - u2))
                .map(|c| u1 + u2 - 1.0 + c),
            Rotation::R270 => k.cdf(clamp_unit(1.0 - u2), u1).map(|c| u1 - c),
        }
    }

    pub fn tau(&self) -> f64 {
        let t = self.kernel.tau();
        if self.rotation.is_negative() {
            -t
        } else {
            t
        }
    }

    /// Draws `n` pairs by inverting `h1` at independent uniforms.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut u1 = Vec::with_capacity(n);
        let mut u2 = Vec::with_capacity(n);
        for _ in 0..n {
            let a: f64 = rng.random();
            let w: f64 = rng.random();
            u2.push(self.hinv1(w, a)?);
            u1.push(clamp_unit(a));
        }
        Ok((u1, u2))
    }

    pub fn loglik(&self, u1: &[f64], u2: &[f64]) -> f64 {
        if self.is_independence() {
            return 0.0;
        }
        u1.iter().zip(u2).map(|(&a, &b)| self.ln_pdf(a, b)).sum()
    }
}

impl fmt::Display for Bicop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rotation != Rotation::R0 {
            write!(f, "{}-", self.rotation.degrees())?;
        }
        write!(f, "{}", self.family)?;
        if !self.params.is_empty() {
            let ps: Vec<String> = self.params.iter().map(|p| format!("{p:.3}")).collect();
            write!(f, "({})", ps.join(", "))?;
        }
        Ok(())
    }
}

/// A copula together with its fit statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedBicop {
    pub copula: Bicop,
    pub loglik: f64,
    pub n_obs: usize,
    pub aic: f64,
}

impl FittedBicop {
    pub fn new(copula: Bicop, loglik: f64, n_obs: usize) -> Self {
        let aic = -2.0 * loglik + 2.0 * copula.n_params() as f64;
        FittedBicop {
            copula,
            loglik,
            n_obs,
            aic,
        }
    }

    pub fn independence(n_obs: usize) -> Self {
        FittedBicop::new(Bicop::independence(), 0.0, n_obs)
    }

    pub fn bic(&self) -> f64 {
        -2.0 * self.loglik + (self.n_obs as f64).ln() * self.copula.n_params() as f64
    }

    pub fn criterion(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Aic => self.aic,
            Criterion::Bic => self.bic(),
        }
    }
}

impl std::ops::Deref for FittedBicop {
    type Target = Bicop;
    fn deref(&self) -> &Bicop {
        &self.copula
    }
}
