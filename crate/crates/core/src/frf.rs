//! Sampled frequency-response data.
//!
//! An [`Frf`] holds an impedance sampled on non-negative frequencies. The
//! analysis works on the whole imaginary axis, so real-coefficient data is
//! mirrored into a [`FullAxisFrf`] by [`hermitian_extend`]. Large-signal
//! responses obtained with single-sideband excitation are brought into
//! Hermitian form with [`recombine_ssb`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 8;

/// Relative tolerance on the imaginary part of a DC sample.
pub const DC_IMAG_TOL: f64 = 1e-9;

/// Relative tolerance used when comparing two frequency grids.
pub const GRID_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Linear,
    Logarithmic,
    Irregular,
}

impl GridKind {
    /// Classifies a strictly increasing grid.
    pub fn infer(freqs: &[f64]) -> Self {
        if freqs.len() < 3 {
            return GridKind::Irregular;
        }
        let steps: Vec<f64> = freqs.windows(2).map(|w| w[1] - w[0]).collect();
        let span = freqs[freqs.len() - 1] - freqs[0];
        let mean = span / steps.len() as f64;
        if steps.iter().all(|d| (d - mean).abs() <= 1e-6 * mean) {
            return GridKind::Linear;
        }
        if freqs[0] > 0.0 {
            let ratios: Vec<f64> = freqs.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            if ratios.iter().all(|r| (r - mean).abs() <= 1e-6 * mean.abs()) {
                return GridKind::Logarithmic;
            }
        }
        GridKind::Irregular
    }
}

/// An impedance sampled on a strictly increasing grid of non-negative
/// frequencies (Hz), values in Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frf {
    freqs: Vec<f64>,
    values: Vec<Complex64>,
    /// Frequency translation index `b` of a large-signal response
    /// (0 for small-signal data).
    pub mixing_index: i32,
    pub grid_kind: GridKind,
    pub label: String,
}

impl Frf {
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::InvalidGrid(format!(
                "{} frequencies but {} values",
                freqs.len(),
                values.len()
            )));
        }
        if freqs.len() < MIN_SAMPLES {
            return Err(Error::InvalidGrid(format!(
                "{} samples, at least {MIN_SAMPLES} required",
                freqs.len()
            )));
        }
        for (i, f) in freqs.iter().enumerate() {
            if !f.is_finite() || *f < 0.0 {
                return Err(Error::InvalidGrid(format!("frequency {f} at index {i}")));
            }
        }
        if let Some(i) = freqs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "frequencies not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at index {i}")));
        }
        let grid_kind = GridKind::infer(&freqs);
        Ok(Frf {
            freqs,
            values,
            mixing_index: 0,
            grid_kind,
            label: String::new(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_mixing_index(mut self, b: i32) -> Self {
        self.mixing_index = b;
        self
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.freqs.iter().copied().zip(self.values.iter().copied())
    }

    /// Applies `f` samplewise, keeping the grid and metadata.
    pub fn map_values(&self, mut f: impl FnMut(f64, Complex64) -> Complex64) -> Frf {
        Frf {
            values: self.iter().map(|(fr, v)| f(fr, v)).collect(),
            freqs: self.freqs.clone(),
            mixing_index: self.mixing_index,
            grid_kind: self.grid_kind,
            label: self.label.clone(),
        }
    }

    /// Restricts the data to `lo <= f <= hi`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Frf> {
        let (freqs, values): (Vec<_>, Vec<_>) =
            self.iter().filter(|(f, _)| *f >= lo && *f <= hi).unzip();
        Ok(Frf::new(freqs, values)?
            .with_label(self.label.clone())
            .with_mixing_index(self.mixing_index))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Samples on a grid covering negative and positive frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullAxisFrf {
    freqs: Vec<f64>,
    values: Vec<Complex64>,
    /// True when built by conjugate mirroring, i.e. `value(-f) == conj(value(f))`.
    pub hermitian: bool,
    pub mixing_index: i32,
    pub label: String,
}

impl FullAxisFrf {
    /// Builds a full-axis response from arbitrary signed samples. The grid must
    /// be strictly increasing.
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::InvalidGrid("length mismatch".into()));
        }
        if freqs.iter().any(|f| !f.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite sample".into()));
        }
        if freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("frequencies not strictly increasing".into()));
        }
        Ok(FullAxisFrf {
            freqs,
            values,
            hermitian: false,
            mixing_index: 0,
            label: String::new(),
        })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.freqs.iter().copied().zip(self.values.iter().copied())
    }

    pub fn value_at_index(&self, i: usize) -> Complex64 {
        self.values[i]
    }

    pub fn has_dc(&self) -> bool {
        self.freqs.binary_search_by(|f| f.total_cmp(&0.0)).is_ok()
    }

    /// Applies `f` samplewise; Hermitian symmetry is kept only if the caller
    /// says the map preserves it.
    pub fn map_values(
        &self,
        preserves_hermitian: bool,
        mut f: impl FnMut(f64, Complex64) -> Complex64,
    ) -> FullAxisFrf {
        FullAxisFrf {
            values: self.iter().map(|(fr, v)| f(fr, v)).collect(),
            freqs: self.freqs.clone(),
            hermitian: self.hermitian && preserves_hermitian,
            mixing_index: self.mixing_index,
            label: self.label.clone(),
        }
    }

    /// The `f >= 0` half as an [`Frf`].
    pub fn positive_half(&self) -> Result<Frf> {
        let (freqs, values): (Vec<_>, Vec<_>) = self.iter().filter(|(f, _)| *f >= 0.0).unzip();
        Ok(Frf::new(freqs, values)?
            .with_label(self.label.clone())
            .with_mixing_index(self.mixing_index))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Mirrors `frf` about 0 Hz with conjugated values.
///
/// A DC sample appears once and must be real to within [`DC_IMAG_TOL`]
/// relative; its imaginary part is then dropped so symmetry is exact.
pub fn hermitian_extend(frf: &Frf) -> Result<FullAxisFrf> {
    let freqs = frf.freqs();
    if freqs.windows(2).any(|w| w[1] <= w[0]) || freqs.iter().any(|f| *f < 0.0) {
        return Err(Error::InvalidGrid("unsorted or negative input grid".into()));
    }
    let has_dc = freqs.first() == Some(&0.0);
    let n = frf.len();
    let mut out_f = Vec::with_capacity(2 * n);
    let mut out_v = Vec::with_capacity(2 * n);
    let start = usize::from(has_dc);
    for i in (start..n).rev() {
        out_f.push(-freqs[i]);
        out_v.push(frf.values()[i].conj());
    }
    if has_dc {
        let dc = frf.values()[0];
        let mag = dc.norm();
        let ratio = if mag == 0.0 { 0.0 } else { dc.im.abs() / mag };
        if ratio > DC_IMAG_TOL {
            return Err(Error::NonRealDc { ratio });
        }
        out_f.push(0.0);
        out_v.push(Complex64::new(dc.re, 0.0));
    }
    out_f.extend_from_slice(&freqs[start..]);
    out_v.extend_from_slice(&frf.values()[start..]);
    Ok(FullAxisFrf {
        freqs: out_f,
        values: out_v,
        hermitian: true,
        mixing_index: frf.mixing_index,
        label: frf.label.clone(),
    })
}

fn check_same_grid(a: &Frf, b: &Frf) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch {
            index: a.len().min(b.len()),
            a: a.freqs().last().copied().unwrap_or(f64::NAN),
            b: b.freqs().last().copied().unwrap_or(f64::NAN),
        });
    }
    for (i, (fa, fb)) in a.freqs().iter().zip(b.freqs()).enumerate() {
        let scale = fa.abs().max(fb.abs());
        if (fa - fb).abs() > GRID_TOL * scale {
            return Err(Error::GridMismatch { index: i, a: *fa, b: *fb });
        }
    }
    Ok(())
}

/// Converts single-sideband responses `Z'[b]`, `Z'[-b]` into the sine/cosine
/// pair `(Z[b], Z[-b])`:
///
/// ```text
/// Z[b]  = (Z'[b] + Z'[-b]) / 2
/// Z[-b] = j (Z'[b] - Z'[-b]) / 2
/// ```
pub fn recombine_ssb(z_plus: &Frf, z_minus: &Frf) -> Result<(Frf, Frf)> {
    let b = z_plus.mixing_index;
    if b < 1 {
        return Err(Error::InvalidSpec(format!(
            "recombination needs mixing index b >= 1, got {b}"
        )));
    }
    if z_minus.mixing_index != -b {
        return Err(Error::InvalidSpec(format!(
            "second response must have mixing index {}, got {}",
            -b, z_minus.mixing_index
        )));
    }
    check_same_grid(z_plus, z_minus)?;
    let half = Complex64::new(0.5, 0.0);
    let j_half = Complex64::new(0.0, 0.5);
    let mut pos = Vec::with_capacity(z_plus.len());
    let mut neg = Vec::with_capacity(z_plus.len());
    for (p, m) in z_plus.values().iter().zip(z_minus.values()) {
        pos.push(half * (p + m));
        neg.push(j_half * (p - m));
    }
    let label = if z_plus.label.is_empty() { "Z".to_string() } else { z_plus.label.clone() };
    let zb = Frf::new(z_plus.freqs().to_vec(), pos)?
        .with_mixing_index(b)
        .with_label(format!("{label}[{b}]"));
    let zmb = Frf::new(z_plus.freqs().to_vec(), neg)?
        .with_mixing_index(-b)
        .with_label(format!("{label}[{}]", -b));
    Ok((zb, zmb))
}

/// Inverse of [`recombine_ssb`]: `Z'[b] = Z[b] - j Z[-b]`, `Z'[-b] = Z[b] + j Z[-b]`.
pub fn split_ssb(z_b: &Frf, z_minus_b: &Frf) -> Result<(Frf, Frf)> {
    check_same_grid(z_b, z_minus_b)?;
    let b = z_b.mixing_index.abs().max(1);
    let j = Complex64::i();
    let plus: Vec<_> = z_b.values().iter().zip(z_minus_b.values()).map(|(p, m)| p - j * m).collect();
    let minus: Vec<_> = z_b.values().iter().zip(z_minus_b.values()).map(|(p, m)| p + j * m).collect();
    Ok((
        Frf::new(z_b.freqs().to_vec(), plus)?.with_mixing_index(b).with_label(z_b.label.clone()),
        Frf::new(z_b.freqs().to_vec(), minus)?.with_mixing_index(-b).with_label(z_b.label.clone()),
    ))
}
