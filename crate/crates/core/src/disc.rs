//! Projection of band-limited frequency responses onto the unit circle.
//!
//! The map `z = (s - alpha) / (s + alpha)` sends the imaginary axis onto the
//! unit circle and the right half-plane into the disc. Together with the
//! weight `sqrt(pi alpha) * 2 / (z - 1)` it is an isometry from `L2(jR)` onto
//! `L2` of the circle, so the Fourier series of the mapped data splits it
//! into a stable part (`k >= 0`) and an unstable part (`k < 0`).

use std::f64::consts::{PI, SQRT_2, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frf::FullAxisFrf;
use crate::interp::{interpolate, InterpMethod, Node};

/// Fewest samples for which the even/odd error estimate is meaningful.
pub const MIN_ESTIMATE_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoebiusMap {
    alpha: f64,
}

impl MoebiusMap {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidSpec(format!("alpha must be finite and > 0, got {alpha}")));
        }
        Ok(MoebiusMap { alpha })
    }

    /// Places `f_max` at `e^{j pi/4}`.
    pub fn for_band_edge(f_max: f64) -> Result<Self> {
        Self::new(TAU * f_max * (SQRT_2 - 1.0))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn z_of_s(&self, s: Complex64) -> Complex64 {
        (s - self.alpha) / (s + self.alpha)
    }

    pub fn s_of_z(&self, z: Complex64) -> Complex64 {
        self.alpha * (1.0 + z) / (1.0 - z)
    }

    /// Point on the circle for a frequency in Hz.
    pub fn z_at(&self, f_hz: f64) -> Complex64 {
        self.z_of_s(Complex64::new(0.0, TAU * f_hz))
    }

    /// Angle in `[0, 2 pi)`; decreasing in frequency, with DC at `pi`.
    pub fn theta_at(&self, f_hz: f64) -> f64 {
        let t = PI - 2.0 * (TAU * f_hz / self.alpha).atan();
        if t >= TAU {
            t - TAU
        } else {
            t
        }
    }

    /// Factor taking axis values to disc values.
    pub fn to_disc_weight(&self, z: Complex64) -> Complex64 {
        2.0 * (PI * self.alpha).sqrt() / (z - 1.0)
    }

    /// Factor taking disc values back to axis values.
    pub fn from_disc_weight(&self, z: Complex64) -> Complex64 {
        (z - 1.0) / (2.0 * (PI * self.alpha).sqrt())
    }

    /// Orthonormal basis function `B_k(s)` whose disc image is `z^k`.
    pub fn basis(&self, k: i32, s: Complex64) -> Complex64 {
        let z = self.z_of_s(s);
        self.from_disc_weight(z) * z.powi(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscPoint {
    pub theta: f64,
    pub z: Complex64,
    pub value: Complex64,
    /// Signed source frequency in Hz.
    pub freq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscSamples {
    /// Sorted by increasing angle.
    pub points: Vec<DiscPoint>,
    /// Half-open index ranges of contiguously sampled arcs.
    pub arcs: Vec<(usize, usize)>,
    pub alpha: f64,
    pub hermitian: bool,
}

impl DiscSamples {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Splits the sampled arc where the source frequency changes sign, so
    /// the neighbourhood of DC is zero-filled instead of interpolated.
    pub fn with_dc_gap(mut self) -> Self {
        let mut arcs = Vec::new();
        for &(a, b) in &self.arcs {
            let cut = (a + 1..b).find(|&i| {
                let (p, q) = (self.points[i - 1].freq, self.points[i].freq);
                p > 0.0 && q < 0.0
            });
            match cut {
                Some(c) => {
                    arcs.push((a, c));
                    arcs.push((c, b));
                }
                None => arcs.push((a, b)),
            }
        }
        self.arcs = arcs.into_iter().filter(|(a, b)| b - a >= 2).collect();
        self
    }

    fn nodes(&self, range: (usize, usize)) -> Vec<Node> {
        self.points[range.0..range.1]
            .iter()
            .map(|p| Node { theta: p.theta, z: p.z, value: p.value })
            .collect()
    }
}

pub fn to_disc(frf: &FullAxisFrf, map: &MoebiusMap) -> DiscSamples {
    let mut points: Vec<DiscPoint> = frf
        .iter()
        .map(|(f, v)| {
            let z = map.z_at(f);
            DiscPoint { theta: map.theta_at(f), z, value: map.to_disc_weight(z) * v, freq: f }
        })
        .collect();
    points.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    let n = points.len();
    DiscSamples {
        points,
        arcs: if n >= 2 { vec![(0, n)] } else { Vec::new() },
        alpha: map.alpha(),
        hermitian: frf.hermitian,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformDiscGrid {
    pub values: Vec<Complex64>,
    pub alpha: f64,
    pub hermitian: bool,
}

impl UniformDiscGrid {
    pub fn n_fft(&self) -> usize {
        self.values.len()
    }

    pub fn theta(&self, n: usize) -> f64 {
        TAU * n as f64 / self.values.len() as f64
    }
}

/// Smallest power of two at least eight times the sample count.
pub fn default_n_fft(samples: usize) -> usize {
    (8 * samples.max(1)).next_power_of_two()
}

fn check_n_fft(n_fft: usize, samples: usize) -> Result<()> {
    if !n_fft.is_power_of_two() {
        return Err(Error::InsufficientGrid(format!("n_fft = {n_fft} is not a power of two")));
    }
    if n_fft < 4 * samples {
        return Err(Error::InsufficientGrid(format!(
            "n_fft = {n_fft} is below 4 x {samples} samples"
        )));
    }
    Ok(())
}

pub fn resample_uniform(disc: &DiscSamples, n_fft: usize, method: InterpMethod) -> Result<UniformDiscGrid> {
    check_n_fft(n_fft, disc.len())?;
    let step = TAU / n_fft as f64;
    let mut values = vec![Complex64::new(0.0, 0.0); n_fft];
    for &arc in &disc.arcs {
        let nodes = disc.nodes(arc);
        let lo = (nodes[0].theta / step).ceil() as usize;
        let hi = ((nodes[nodes.len() - 1].theta / step).floor() as usize).min(n_fft - 1);
        if hi < lo {
            continue;
        }
        let targets: Vec<(f64, Complex64)> = (lo..=hi)
            .map(|n| {
                let t = n as f64 * step;
                (t, Complex64::from_polar(1.0, t))
            })
            .collect();
        let got = interpolate(&nodes, &targets, method);
        values[lo..=hi].copy_from_slice(&got);
    }
    if disc.hermitian {
        symmetrize(&mut values);
    }
    Ok(UniformDiscGrid { values, alpha: disc.alpha, hermitian: disc.hermitian })
}

/// Enforces `v[N - n] = conj(v[n])`, the disc image of conjugate symmetry.
fn symmetrize(values: &mut [Complex64]) {
    let n = values.len();
    values[0].im = 0.0;
    if n > 1 {
        values[n / 2].im = 0.0;
    }
    for i in 1..n / 2 {
        let m = 0.5 * (values[i] + values[n - i].conj());
        values[i] = m;
        values[n - i] = m.conj();
    }
}

/// Two-sided Fourier coefficients stored in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    coeffs: Vec<Complex64>,
    pub alpha: f64,
    pub hermitian: bool,
}

impl FourierCoefficients {
    pub fn from_fft_order(coeffs: Vec<Complex64>, alpha: f64, hermitian: bool) -> Self {
        FourierCoefficients { coeffs, alpha, hermitian }
    }

    pub fn n_fft(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient `c_k` for signed `k` in `[-n_fft/2, n_fft/2)`.
    pub fn c(&self, k: i64) -> Complex64 {
        let n = self.coeffs.len() as i64;
        self.coeffs[k.rem_euclid(n) as usize]
    }

    pub fn as_fft_order(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `(k, c_k)` in increasing `k`.
    pub fn signed(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n = self.coeffs.len() as i64;
        (-n / 2..n / 2).map(move |k| (k, self.c(k)))
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Energy of `k >= 0` and `k < 0` coefficients.
    pub fn energy_split(&self) -> (f64, f64) {
        let n = self.coeffs.len();
        let stable = self.coeffs[..n / 2].iter().map(|c| c.norm_sqr()).sum();
        let unstable = self.coeffs[n / 2..].iter().map(|c| c.norm_sqr()).sum();
        (stable, unstable)
    }

    /// Keeps `k >= 0` (`stable = true`) or `k < 0`, zeroing the rest.
    pub fn masked(&self, stable: bool) -> Vec<Complex64> {
        let n = self.coeffs.len();
        let zero = Complex64::new(0.0, 0.0);
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| if (i < n / 2) == stable { c } else { zero })
            .collect()
    }
}

fn planned(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

pub fn fft_coefficients(grid: &UniformDiscGrid) -> FourierCoefficients {
    let n = grid.n_fft();
    let mut buf = grid.values.clone();
    planned(n, false).process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in buf.iter_mut() {
        *c *= scale;
    }
    if grid.hermitian {
        for c in buf.iter_mut() {
            c.im = 0.0;
        }
    }
    FourierCoefficients { coeffs: buf, alpha: grid.alpha, hermitian: grid.hermitian }
}

/// Sums `sum_k c_k e^{j k theta_n}` on the uniform grid.
pub fn synthesize(coeffs_fft_order: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs_fft_order.to_vec();
    planned(buf.len(), true).process(&mut buf);
    buf
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    /// `(frequency Hz, error Ohm)` at the odd-indexed samples.
    pub pointwise: Vec<(f64, f64)>,
    pub global_max_db: f64,
    /// RMS of the disc-unit error over the circle, used as a noise level.
    pub disc_l2: f64,
    /// Level of stopband leakage past the zero-filled arcs, if known.
    #[serde(default)]
    pub leakage_db: Option<f64>,
}

impl ErrorEstimate {
    /// Floor used by the verdict: the interpolation error or the leakage,
    /// whichever is larger.
    pub fn floor_db(&self) -> f64 {
        match self.leakage_db {
            Some(l) => self.global_max_db.max(l),
            None => self.global_max_db,
        }
    }

    pub fn with_leakage_db(mut self, leakage_db: f64) -> Self {
        self.leakage_db = Some(leakage_db);
        self
    }
}

pub fn to_db(x: f64) -> f64 {
    20.0 * x.log10()
}

/// Interpolates from the even-indexed samples of each arc onto the
/// odd-indexed ones. Odd samples outside the span of the even ones are
/// skipped.
pub fn estimate_interp_error(disc: &DiscSamples, method: InterpMethod) -> Result<ErrorEstimate> {
    if disc.len() < MIN_ESTIMATE_SAMPLES {
        return Err(Error::InsufficientGrid(format!(
            "{} samples; at least {MIN_ESTIMATE_SAMPLES} needed for the error estimate",
            disc.len()
        )));
    }
    let map = MoebiusMap::new(disc.alpha)?;
    let mut pointwise = Vec::new();
    let mut sq = 0.0;
    for &(a, b) in &disc.arcs {
        let pts = &disc.points[a..b];
        let even: Vec<Node> = pts
            .iter()
            .step_by(2)
            .map(|p| Node { theta: p.theta, z: p.z, value: p.value })
            .collect();
        if even.len() < 2 {
            continue;
        }
        let (lo, hi) = (even[0].theta, even[even.len() - 1].theta);
        let odd: Vec<&DiscPoint> = pts
            .iter()
            .skip(1)
            .step_by(2)
            .filter(|p| p.theta > lo && p.theta < hi)
            .collect();
        let targets: Vec<(f64, Complex64)> = odd.iter().map(|p| (p.theta, p.z)).collect();
        let got = interpolate(&even, &targets, method);
        for (i, (p, v)) in odd.iter().zip(got).enumerate() {
            let e = (v - p.value).norm();
            pointwise.push((p.freq, e * map.from_disc_weight(p.z).norm()));
            // each odd sample stands for the arc between its even neighbours
            let idx = a + 2 * i + 1;
            let width = disc.points[idx + 1].theta - disc.points[idx - 1].theta;
            sq += e * e * width;
        }
    }
    if pointwise.is_empty() {
        return Err(Error::InsufficientGrid("no interior odd samples".into()));
    }
    pointwise.sort_by(|x, y| x.0.total_cmp(&y.0));
    let max = pointwise.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(ErrorEstimate {
        pointwise,
        global_max_db: to_db(max),
        disc_l2: (sq / TAU).sqrt(),
        leakage_db: None,
    })
}
