//! Local rational models fitted on a frequency window, the classical route
//! to pole-zero stability analysis. Used to show how a model fitted on part
//! of the band can carry right-half-plane poles that the data does not have.
//!
//! The fit is relaxed vector fitting: the Sanathanan-Koerner linearization
//! `sigma Z ~ N` is written in a partial-fraction basis on the current poles,
//! the zeros of `sigma` become the next poles, and the residues are solved
//! last. Poles are never reflected into the left half-plane, so an unstable
//! local model is reported as such.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frf::FullAxisFrf;

/// Largest acceptable condition number of the normal equations.
pub const MAX_NORMAL_COND: f64 = 1e14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRationalModel {
    pub order: usize,
    /// Numerator coefficients in ascending powers of `s`.
    pub numerator: Vec<f64>,
    /// Denominator coefficients in ascending powers of `s`, leading one.
    pub denominator: Vec<f64>,
    /// Fit window in rad/s.
    pub window: (f64, f64),
    pub max_phase_error_deg: f64,
    pub poles: Vec<Complex64>,
    /// Residue of each entry of `poles`.
    pub residues: Vec<Complex64>,
    /// Constant term.
    pub direct: f64,
}

impl LocalRationalModel {
    pub fn at(&self, s: Complex64) -> Complex64 {
        self.direct + self.poles.iter().zip(&self.residues).map(|(p, r)| r / (s - p)).sum::<Complex64>()
    }

    pub fn unstable_poles(&self) -> impl Iterator<Item = &Complex64> {
        self.poles.iter().filter(|p| p.re > 0.0)
    }
}

/// Real poles and upper members of conjugate pairs.
#[derive(Debug, Clone, Copy)]
enum Pole {
    Real(f64),
    Pair(Complex64),
}

fn width(poles: &[Pole]) -> usize {
    poles.iter().map(|p| if matches!(p, Pole::Real(_)) { 1 } else { 2 }).sum()
}

/// Real-coefficient partial-fraction basis at `s`.
fn basis(poles: &[Pole], s: Complex64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(width(poles));
    for p in poles {
        match *p {
            Pole::Real(a) => out.push(1.0 / (s - a)),
            Pole::Pair(a) => {
                let u = 1.0 / (s - a);
                let v = 1.0 / (s - a.conj());
                out.push(u + v);
                out.push(Complex64::i() * (u - v));
            }
        }
    }
    out
}

/// Column-scaled least squares; returns the solution and the condition
/// number of the normal equations.
fn solve_ls(mut a: DMatrix<f64>, b: &DVector<f64>) -> Result<(Vec<f64>, f64)> {
    let norms: Vec<f64> = (0..a.ncols()).map(|c| a.column(c).norm().max(f64::MIN_POSITIVE)).collect();
    for (c, nrm) in norms.iter().enumerate() {
        a.column_mut(c).scale_mut(1.0 / nrm);
    }
    let svd = a.svd(true, true);
    let cond = (svd.singular_values.max() / svd.singular_values.min()).powi(2);
    let x = svd
        .solve(b, f64::MIN_POSITIVE)
        .map_err(|e| Error::InsufficientGrid(format!("least squares: {e}")))?;
    Ok((x.iter().zip(&norms).map(|(v, s)| v / s).collect(), cond))
}

fn starting_poles(n: usize) -> Vec<Pole> {
    let pairs = n / 2;
    let mut poles: Vec<Pole> = (1..=pairs)
        .map(|k| {
            let beta = k as f64 / pairs as f64;
            Pole::Pair(Complex64::new(-beta / 100.0, beta))
        })
        .collect();
    if n % 2 == 1 {
        poles.push(Pole::Real(-0.1));
    }
    poles
}

/// Zeros of `sigma = d + sum c_k phi_k` via the real state-space form.
fn sigma_zeros(poles: &[Pole], c: &[f64], d: f64) -> Vec<Pole> {
    let n = width(poles);
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = vec![0.0; n];
    let mut i = 0;
    for p in poles {
        match *p {
            Pole::Real(r) => {
                a[(i, i)] = r;
                b[i] = 1.0;
                i += 1;
            }
            Pole::Pair(z) => {
                a[(i, i)] = z.re;
                a[(i, i + 1)] = z.im;
                a[(i + 1, i)] = -z.im;
                a[(i + 1, i + 1)] = z.re;
                b[i] = 2.0;
                i += 2;
            }
        }
    }
    for r in 0..n {
        for k in 0..n {
            a[(r, k)] -= b[r] * c[k] / d;
        }
    }
    let eig: Vec<Complex64> = a.complex_eigenvalues().iter().copied().collect();
    let scale = eig.iter().map(|e| e.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut out: Vec<Pole> = Vec::new();
    let mut reals: Vec<f64> = Vec::new();
    for e in &eig {
        if e.im.abs() <= 1e-12 * scale {
            reals.push(e.re);
        } else if e.im > 0.0 {
            out.push(Pole::Pair(*e));
        }
    }
    // a pair that collapsed onto the real axis can leave an odd surplus
    while width(&out) + reals.len() > n && !reals.is_empty() {
        reals.pop();
    }
    out.extend(reals.into_iter().map(Pole::Real));
    out
}

fn expand(poles: &[Pole], coeffs: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut ps = Vec::new();
    let mut rs = Vec::new();
    let mut i = 0;
    for p in poles {
        match *p {
            Pole::Real(a) => {
                ps.push(Complex64::new(a, 0.0));
                rs.push(Complex64::new(coeffs[i], 0.0));
                i += 1;
            }
            Pole::Pair(a) => {
                let r = Complex64::new(coeffs[i], coeffs[i + 1]);
                ps.extend([a, a.conj()]);
                rs.extend([r, r.conj()]);
                i += 2;
            }
        }
    }
    (ps, rs)
}

fn poly_mul(p: &[Complex64], root: Complex64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); p.len() + 1];
    for (k, c) in p.iter().enumerate() {
        out[k + 1] += c;
        out[k] -= c * root;
    }
    out
}

/// Ascending monomial coefficients of the denominator and numerator.
fn polynomials(poles: &[Complex64], residues: &[Complex64], direct: f64) -> (Vec<f64>, Vec<f64>) {
    let one = vec![Complex64::new(1.0, 0.0)];
    let den = poles.iter().fold(one.clone(), |acc, &p| poly_mul(&acc, p));
    let mut num: Vec<Complex64> = den.iter().map(|c| c * direct).collect();
    for (i, r) in residues.iter().enumerate() {
        let part = poles
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .fold(one.clone(), |acc, (_, &p)| poly_mul(&acc, p));
        for (k, c) in part.iter().enumerate() {
            num[k] += r * c;
        }
    }
    (den.iter().map(|c| c.re).collect(), num.iter().map(|c| c.re).collect())
}

/// Fits an `(order - 1) / order` real rational model, plus a constant term,
/// to the samples of `frf` whose angular frequency lies in `window`.
pub fn local_rational_fit(frf: &FullAxisFrf, window: (f64, f64), order: usize, iterations: usize) -> Result<LocalRationalModel> {
    local_rational_sweep(frf, window, order, iterations)?
        .pop()
        .expect("sweep returns one entry per order")
}

/// Fits every order from 1 to `max_order`. Each order is also seeded with
/// the previous fit plus one unused pole, so the maximum phase error never
/// grows with the order.
pub fn local_rational_sweep(
    frf: &FullAxisFrf,
    window: (f64, f64),
    max_order: usize,
    iterations: usize,
) -> Result<Vec<Result<LocalRationalModel>>> {
    let (w_lo, w_hi) = window;
    if max_order == 0 || !(w_lo < w_hi) {
        return Err(Error::InvalidSpec(format!("order {max_order} on window [{w_lo}, {w_hi}]")));
    }
    let pts: Vec<(f64, Complex64)> = frf
        .iter()
        .map(|(f, v)| (std::f64::consts::TAU * f, v))
        .filter(|(w, _)| *w >= w_lo && *w <= w_hi)
        .collect();
    if pts.len() < 4 * max_order {
        return Err(Error::InsufficientGrid(format!(
            "{} samples in window, at least {} needed for order {max_order}",
            pts.len(),
            4 * max_order
        )));
    }
    // work in x = s / scale
    let scale = w_lo.abs().max(w_hi.abs());
    let data = Samples {
        xs: pts.iter().map(|(w, _)| Complex64::new(0.0, w / scale)).collect(),
        zs: pts.iter().map(|p| p.1).collect(),
        relative: pts.iter().map(|(_, z)| 1.0 / z.norm().max(f64::MIN_POSITIVE)).collect(),
    };
    let mut out = Vec::with_capacity(max_order);
    let mut prev: Option<Fit> = None;
    for order in 1..=max_order {
        let fit = fit_order(order, prev.as_ref(), iterations, &data);
        out.push(fit.as_ref().map_err(clone_err).and_then(|f| to_model(f, order, window, scale, &pts)));
        prev = fit.ok();
    }
    Ok(out)
}

fn clone_err(e: &Error) -> Error {
    Error::InsufficientGrid(e.to_string())
}

fn to_model(fit: &Fit, order: usize, window: (f64, f64), scale: f64, pts: &[(f64, Complex64)]) -> Result<LocalRationalModel> {
    if !fit.cond.is_finite() || fit.cond > MAX_NORMAL_COND {
        return Err(Error::IllConditioned { cond: fit.cond });
    }
    let (px, rx) = expand(&fit.poles, &fit.coeffs[..order]);
    let poles: Vec<Complex64> = px.iter().map(|p| p * scale).collect();
    let residues: Vec<Complex64> = rx.iter().map(|r| r * scale).collect();
    let direct = fit.coeffs[order];
    let (denominator, numerator) = polynomials(&poles, &residues, direct);
    let mut model = LocalRationalModel {
        order,
        numerator,
        denominator,
        window,
        max_phase_error_deg: 0.0,
        poles,
        residues,
        direct,
    };
    model.max_phase_error_deg = pts
        .iter()
        .map(|&(w, z)| (model.at(Complex64::new(0.0, w)) / z).arg().abs().to_degrees())
        .fold(0.0, f64::max);
    Ok(model)
}

const LAWSON_STEPS: usize = 40;

/// Where the extra pole of a seeded fit starts, in units of the window edge.
const SEED_POLE: f64 = -1.0;

struct Samples {
    xs: Vec<Complex64>,
    zs: Vec<Complex64>,
    relative: Vec<f64>,
}

fn fit_order(order: usize, prev: Option<&Fit>, iterations: usize, data: &Samples) -> Result<Fit> {
    let mut poles = starting_poles(order);
    for _ in 0..iterations {
        poles = relocate(&poles, data, &data.relative)?;
    }
    let mut best = refine(identify(&poles, data, &data.relative)?, data);
    if let Some(prev) = prev {
        let mut poles = prev.poles.clone();
        poles.push(Pole::Real(SEED_POLE));
        let n = order - 1;
        let mut coeffs = prev.coeffs[..n].to_vec();
        coeffs.extend([0.0, prev.coeffs[n]]);
        let cond = identify(&poles, data, &data.relative)?.cond;
        let seeded = refine(Fit { poles, coeffs, cond, phase_errors: prev.phase_errors.clone() }, data);
        if seeded.max_phase_error() < best.max_phase_error() {
            best = seeded;
        }
    }
    Ok(best)
}

/// Lawson reweighting moves the least-squares fit towards the minimax one;
/// returns the best fit seen.
fn refine(mut best: Fit, data: &Samples) -> Fit {
    let m = data.xs.len() as f64;
    let mut lawson = vec![1.0; data.xs.len()];
    for _ in 0..LAWSON_STEPS {
        let total: f64 = best.phase_errors.iter().zip(&lawson).map(|(e, l)| e * l).sum();
        if !(total > 0.0) {
            break;
        }
        for (l, e) in lawson.iter_mut().zip(&best.phase_errors) {
            *l *= (e * m / total).sqrt();
        }
        let weights: Vec<f64> = data.relative.iter().zip(&lawson).map(|(r, l)| r * l.sqrt()).collect();
        let Ok(next) = relocate(&best.poles, data, &weights) else { break };
        let Ok(candidate) = identify(&next, data, &weights) else { break };
        if candidate.max_phase_error() < best.max_phase_error() {
            best = candidate;
        } else {
            lawson.iter_mut().zip(&best.phase_errors).for_each(|(l, e)| *l = l.sqrt() * e.sqrt());
        }
    }
    best
}

/// One relaxed pole relocation with the given row weights.
fn relocate(poles: &[Pole], data: &Samples, weights: &[f64]) -> Result<Vec<Pole>> {
    let (xs, zs) = (&data.xs, &data.zs);
    let n = width(poles);
    let rows = 2 * xs.len();
    // unknowns: numerator residues, sigma constant, sigma residues, numerator constant
    let mut a = DMatrix::<f64>::zeros(rows + 1, 2 * n + 2);
    let mut b = DVector::<f64>::zeros(rows + 1);
    let mut sum_phi = vec![0.0; n];
    for (i, (x, z)) in xs.iter().zip(zs.iter()).enumerate() {
        let w = weights[i];
        let phi = basis(poles, *x);
        for k in 0..n {
            let c = w * phi[k];
            a[(2 * i, k)] = c.re;
            a[(2 * i + 1, k)] = c.im;
            let d = -w * z * phi[k];
            a[(2 * i, n + 1 + k)] = d.re;
            a[(2 * i + 1, n + 1 + k)] = d.im;
            sum_phi[k] += phi[k].re;
        }
        let d = -w * z;
        a[(2 * i, n)] = d.re;
        a[(2 * i + 1, n)] = d.im;
        a[(2 * i, 2 * n + 1)] = w;
    }
    // relaxation: the real part of sigma summed over the samples is fixed
    let m = xs.len() as f64;
    let row_scale = zs.iter().zip(weights).map(|(z, w)| (w * z).norm_sqr()).sum::<f64>().sqrt() / m;
    a[(rows, n)] = row_scale * m;
    for k in 0..n {
        a[(rows, n + 1 + k)] = row_scale * sum_phi[k];
    }
    b[rows] = row_scale * m;
    let (x, _) = solve_ls(a, &b)?;
    let d = if x[n].abs() < 1e-8 { 1e-8f64.copysign(x[n]) } else { x[n] };
    Ok(sigma_zeros(poles, &x[n + 1..2 * n + 1], d))
}

struct Fit {
    poles: Vec<Pole>,
    /// Real residue coordinates followed by the constant term.
    coeffs: Vec<f64>,
    cond: f64,
    phase_errors: Vec<f64>,
}

impl Fit {
    fn max_phase_error(&self) -> f64 {
        self.phase_errors.iter().copied().fold(0.0, f64::max)
    }
}

/// Residues and constant term for fixed poles.
fn identify(poles: &[Pole], data: &Samples, weights: &[f64]) -> Result<Fit> {
    let (xs, zs) = (&data.xs, &data.zs);
    let n = width(poles);
    let rows = 2 * xs.len();
    let mut a = DMatrix::<f64>::zeros(rows, n + 1);
    let mut b = DVector::<f64>::zeros(rows);
    let mut phis = Vec::with_capacity(xs.len());
    for (i, (x, z)) in xs.iter().zip(zs.iter()).enumerate() {
        let w = weights[i];
        let phi = basis(poles, *x);
        for (k, p) in phi.iter().enumerate() {
            let c = w * p;
            a[(2 * i, k)] = c.re;
            a[(2 * i + 1, k)] = c.im;
        }
        a[(2 * i, n)] = w;
        let r = w * z;
        b[2 * i] = r.re;
        b[2 * i + 1] = r.im;
        phis.push(phi);
    }
    let (coeffs, cond) = solve_ls(a, &b)?;
    let phase_errors = phis
        .iter()
        .zip(zs.iter())
        .map(|(phi, z)| {
            let model: Complex64 = coeffs[n] + phi.iter().zip(&coeffs).map(|(p, c)| p * c).sum::<Complex64>();
            (model / z).arg().abs().to_degrees()
        })
        .collect();
    Ok(Fit { poles: poles.to_vec(), coeffs, cond, phase_errors })
}
