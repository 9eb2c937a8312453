//! Unstable pole recovery from the anti-causal Fourier coefficients.
//!
//! The unstable part on the circle is `U(z) = sum_{m>=1} c_{-m} z^{-m}`. A
//! rational `U` with poles `z_i` inside the disc has the Markov sequence
//! `h_m = c_{-m} = sum_i r_i z_i^{m-1}`, so its Hankel matrix has rank equal
//! to the number of poles and a shift-invariant observability factor
//! (Kung's realization).

use std::f64::consts::TAU;

use log::warn;
use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decomposition::Decomposition;
use crate::disc::{FourierCoefficients, MoebiusMap};
use crate::error::{Error, Result};

/// Largest number of Markov parameters used.
pub const MAX_MARKOV: usize = 512;

pub const DEFAULT_TOL_REL: f64 = 1e-3;

pub const DEFAULT_MAX_ORDER: usize = 20;

/// Poles above this fraction of `f_max` are flagged unreliable.
pub const RELIABLE_FRACTION: f64 = 0.9;

/// Singular values kept in a [`PoleSet`] for diagnostics.
const SPECTRUM_HEAD: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedPole {
    /// rad/s
    pub lambda: Complex64,
    /// Residue of the filtered unstable part, Ohm rad/s.
    pub residue: Complex64,
    pub reliable: bool,
}

impl EstimatedPole {
    pub fn freq_hz(&self) -> f64 {
        self.lambda.im / TAU
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSet {
    pub poles: Vec<EstimatedPole>,
    pub model_order: usize,
    pub singular_values: Vec<f64>,
    /// Disc eigenvalues on or outside the unit circle that were discarded.
    #[serde(default)]
    pub dropped_outside: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KungOptions {
    pub max_order: usize,
    pub tol_rel: f64,
    /// Band edge in Hz for the reliability flag.
    pub f_max: f64,
}

impl KungOptions {
    pub fn new(f_max: f64) -> Self {
        KungOptions { max_order: DEFAULT_MAX_ORDER, tol_rel: DEFAULT_TOL_REL, f_max }
    }

    pub fn with_max_order(mut self, n: usize) -> Self {
        self.max_order = n;
        self
    }
}

/// Disc-plane realization of the anti-causal coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscRealization {
    pub eigenvalues: Vec<Complex64>,
    pub singular_values: Vec<f64>,
}

struct Realized {
    eigenvalues: Vec<Complex64>,
    singular_values: Vec<f64>,
}

fn realize<T: HankelScalar>(h: &[T], noise: f64, max_order: usize, tol_rel: f64) -> Result<Realized> {
    let m = h.len();
    let rows = m / 2;
    let cols = m - rows;
    let hankel = DMatrix::from_fn(rows, cols, |i, j| h[i + j]);
    let svd = hankel.svd(true, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    // nalgebra does not guarantee ordering
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    sv = idx.iter().map(|&i| sv[i]).collect();
    let sigma1 = sv.first().copied().unwrap_or(0.0);
    if sigma1 == 0.0 {
        return Ok(Realized { eigenvalues: Vec::new(), singular_values: sv });
    }
    let cut = (tol_rel * sigma1).max(noise);
    let order = sv.iter().take_while(|&&s| s > cut).count();
    if order > max_order {
        return Err(Error::OrderCapReached {
            max_order,
            spectrum: sv.iter().take(SPECTRUM_HEAD).copied().collect(),
        });
    }
    if order == 0 {
        return Ok(Realized { eigenvalues: Vec::new(), singular_values: sv });
    }
    let u = svd.u.expect("left singular vectors requested");
    let obs = DMatrix::from_fn(rows, order, |i, k| {
        let c = idx[k];
        u[(i, c)] * T::from_real(sv[k].sqrt())
    });
    let up = obs.rows(0, rows - 1).into_owned();
    let down = obs.rows(1, rows - 1).into_owned();
    let pinv = up
        .pseudo_inverse(1e-14 * sigma1.sqrt())
        .map_err(|e| Error::InsufficientGrid(format!("observability factor: {e}")))?;
    let a = pinv * down;
    let eigenvalues = T::eigenvalues_of(a)
        .ok_or_else(|| Error::InsufficientGrid("eigenvalue iteration did not converge".into()))?;
    Ok(Realized { eigenvalues, singular_values: sv })
}

/// Scalars the Hankel matrix can be built from.
trait HankelScalar: ComplexField<RealField = f64> + Copy {
    fn eigenvalues_of(a: DMatrix<Self>) -> Option<Vec<Complex64>>;
}

impl HankelScalar for f64 {
    fn eigenvalues_of(a: DMatrix<f64>) -> Option<Vec<Complex64>> {
        Some(a.complex_eigenvalues().iter().copied().collect())
    }
}

impl HankelScalar for Complex64 {
    fn eigenvalues_of(a: DMatrix<Complex64>) -> Option<Vec<Complex64>> {
        if a.nrows() == 1 {
            return Some(vec![a[(0, 0)]]);
        }
        a.eigenvalues().map(|v| v.iter().copied().collect())
    }
}

/// Kung realization of the Markov sequence `h_m = c_{-m}`, `m >= 1`.
///
/// Singular values at or below `max(tol_rel * sigma_1, noise)` are treated
/// as noise. Real coefficient data uses a real Hankel matrix so that the
/// eigenvalues come in exact conjugate pairs.
pub fn realize_disc_poles(coeffs: &FourierCoefficients, noise: f64, max_order: usize, tol_rel: f64) -> Result<DiscRealization> {
    let m = MAX_MARKOV.min(coeffs.n_fft() / 2);
    let h: Vec<Complex64> = (1..=m as i64).map(|k| coeffs.c(-k)).collect();
    let r = if coeffs.hermitian {
        let re: Vec<f64> = h.iter().map(|c| c.re).collect();
        realize(&re, noise, max_order, tol_rel)?
    } else {
        realize(&h, noise, max_order, tol_rel)?
    };
    Ok(DiscRealization { eigenvalues: r.eigenvalues, singular_values: r.singular_values })
}

/// Least-squares residues of the unstable curve on `1 / (s - lambda_i)`,
/// weighted by the inverse local error estimate.
fn fit_residues(dec: &Decomposition, lambdas: &[Complex64]) -> Vec<Complex64> {
    let freqs = dec.unstable.freqs();
    let leak = dec.error.leakage_db.map(|l| 10f64.powf(l / 20.0)).unwrap_or(0.0);
    let rows: Vec<(f64, Complex64, f64)> = dec
        .error
        .pointwise
        .iter()
        .filter_map(|&(f, e)| {
            let i = freqs.binary_search_by(|x| x.total_cmp(&f)).ok()?;
            let w = 1.0 / e.max(leak).max(f64::MIN_POSITIVE);
            Some((f, dec.unstable.value_at_index(i), w))
        })
        .collect();
    if rows.is_empty() || lambdas.is_empty() {
        return vec![Complex64::new(0.0, 0.0); lambdas.len()];
    }
    let a = DMatrix::from_fn(rows.len(), lambdas.len(), |i, k| {
        let s = Complex64::new(0.0, TAU * rows[i].0);
        rows[i].2 / (s - lambdas[k])
    });
    let b = DVector::from_fn(rows.len(), |i, _| rows[i].1 * rows[i].2);
    let svd = a.svd(true, true);
    let eps = 1e-13 * svd.singular_values.max();
    match svd.solve(&b, eps) {
        Ok(x) => x.iter().copied().collect(),
        Err(_) => vec![Complex64::new(0.0, 0.0); lambdas.len()],
    }
}

/// Unstable poles of a decomposition via Kung's method.
///
/// The noise level is the disc-unit RMS interpolation error scaled by
/// `sqrt(min(rows, cols))`, which bounds the spectral norm of the Hankel
/// matrix of any perturbation with that RMS.
pub fn kung_unstable_poles(dec: &Decomposition, map: &MoebiusMap, opts: KungOptions) -> Result<PoleSet> {
    let coeffs = &dec.coefficients;
    if (coeffs.alpha - map.alpha()).abs() > 1e-12 * map.alpha() {
        return Err(Error::CoefficientMismatch { coeffs: coeffs.alpha, map: map.alpha() });
    }
    let m = MAX_MARKOV.min(coeffs.n_fft() / 2);
    let leak_disc = match dec.error.leakage_db {
        // leakage in Ohm carried onto the circle at the band edge weight
        Some(l) => 10f64.powf(l / 20.0) * map.to_disc_weight(map.z_at(opts.f_max)).norm(),
        None => 0.0,
    };
    let noise = ((m / 2) as f64).sqrt() * dec.error.disc_l2.max(leak_disc);
    let r = realize_disc_poles(coeffs, noise, opts.max_order, opts.tol_rel)?;
    let mut dropped = 0;
    let mut lambdas = Vec::new();
    for z in &r.eigenvalues {
        if z.norm() >= 1.0 {
            warn!("disc eigenvalue {z} on or outside the unit circle dropped (noise fit)");
            dropped += 1;
            continue;
        }
        let lam = map.s_of_z(*z);
        if lam.re > 0.0 {
            lambdas.push(lam);
        }
    }
    lambdas.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    let residues = fit_residues(dec, &lambdas);
    let poles = lambdas
        .iter()
        .zip(residues)
        .map(|(&lambda, residue)| EstimatedPole {
            lambda,
            residue,
            reliable: lambda.im.abs() / TAU <= RELIABLE_FRACTION * opts.f_max,
        })
        .collect();
    Ok(PoleSet {
        poles,
        model_order: r.eigenvalues.len(),
        singular_values: r.singular_values.into_iter().take(SPECTRUM_HEAD).collect(),
        dropped_outside: dropped,
    })
}
