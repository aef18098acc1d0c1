//! Small numerical toolbox: bounded scalar minimisation, a box-constrained
//! Nelder-Mead simplex, adaptive quadrature and monotone root finding.

/// Outcome of a minimisation.
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Brent's method on `[lo, hi]`, started from `x0`.
///
/// `rel_tol` is relative to `|x|`; evaluation count is capped at `max_evals`.
pub fn brent_min<F>(mut f: F, lo: f64, hi: f64, x0: f64, rel_tol: f64, max_evals: usize) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    const GOLD: f64 = 0.381_966_011_250_105_1;
    const ABS_TOL: f64 = 1e-10;
    let (mut a, mut b) = (lo, hi);
    let mut x = x0.clamp(lo, hi);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut evals = 1;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    while evals < max_evals {
        let m = 0.5 * (a + b);
        let tol = rel_tol * x.abs() + ABS_TOL;
        let t2 = 2.0 * tol;
        if (x - m).abs() <= t2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol {
            // parabolic fit
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if (u - a) < t2 || (b - u) < t2 {
                    d = if x < m { tol } else { -tol };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol {
            x + d
        } else if d > 0.0 {
            x + tol
        } else {
            x - tol
        };
        let fu = f(u);
        evals += 1;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum {
        x: vec![x],
        value: fx,
        evaluations: evals,
    }
}

/// Nelder-Mead simplex restricted to a box by projection.
///
/// `steps` gives the initial simplex offsets per coordinate. Stops when the
/// spread of simplex values falls under `rel_tol * (|f_best| + rel_tol)` and
/// the simplex has collapsed, or after `max_evals` evaluations.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    bounds: &[(f64, f64)],
    rel_tol: f64,
    max_evals: usize,
) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let project = |x: &mut Vec<f64>| {
        for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *xi = xi.clamp(lo, hi);
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    let mut start = x0.to_vec();
    project(&mut start);
    simplex.push(start.clone());
    for i in 0..dim {
        let mut p = start.clone();
        p[i] += steps[i];
        if p[i] > bounds[i].1 {
            p[i] = start[i] - steps[i];
        }
        project(&mut p);
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    let mut evals = dim + 1;

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    while evals < max_evals {
        let mut idx: Vec<usize> = (0..=dim).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[dim];
        let size = (1..=dim)
            .map(|i| {
                simplex[i]
                    .iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (worst - best).abs() <= rel_tol * (best.abs() + rel_tol) && size < 1e-6 {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for p in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / dim as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(c, w)| c + t * (c - w))
                .collect();
            project(&mut p);
            p
        };

        let xr = along(alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < values[0] {
            let xe = along(gamma);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = xr;
            values[dim] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[dim] {
            let xc = along(rho);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = f(&xc);
            (xc, fc)
        };
        evals += 1;
        if fc < values[dim].min(fr) {
            simplex[dim] = xc;
            values[dim] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=dim {
            let mut p: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + sigma * (x - b))
                .collect();
            project(&mut p);
            values[i] = f(&p);
            simplex[i] = p;
            evals += 1;
        }
    }
    let best = (0..=dim)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        evaluations: evals,
    }
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(&f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Root of a nondecreasing function on `[lo, hi]` by bisection.
///
/// Returns the midpoint of the final bracket once it is narrower than `tol`.
pub fn bisect_increasing<F>(f: F, mut lo: f64, mut hi: f64, target: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol {
            return mid;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_parabola_minimum() {
        let m = brent_min(|x| (x - 1.3).powi(2) + 2.0, -5.0, 5.0, 0.0, 1e-10, 200);
        assert!((m.x[0] - 1.3).abs() < 1e-7);
        assert!((m.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn brent_respects_bounds() {
        let m = brent_min(|x| x, 2.0, 3.0, 2.5, 1e-10, 200);
        assert!((m.x[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(rosen, &[-1.0, 1.5], &[0.5, 0.5], &[(-5.0, 5.0), (-5.0, 5.0)], 1e-12, 5000);
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{:?}", m.x);
    }

    #[test]
    fn nelder_mead_hits_box_edge() {
        let m = nelder_mead(|x| x[0] + x[1], &[0.5, 0.5], &[0.1, 0.1], &[(0.0, 1.0), (0.2, 1.0)], 1e-12, 2000);
        assert!(m.x[0] < 1e-6 && (m.x[1] - 0.2).abs() < 1e-6);
    }

    #[test]
    fn simpson_integrates_smooth_and_endpoint_singular() {
        let v = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-10);
        let v = integrate(|x| if x > 0.0 { x * x.ln() } else { 0.0 }, 0.0, 1.0, 1e-12);
        assert!((v + 0.25).abs() < 1e-9);
    }

    #[test]
    fn bisection_inverts_monotone_map() {
        let x = bisect_increasing(|x| x * x * x, 0.0, 2.0, 2.0, 1e-14);
        assert!((x - 2f64.cbrt()).abs() < 1e-12);
    }
}
