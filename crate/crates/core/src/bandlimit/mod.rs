//! Stable band-limiting filters.
//!
//! The measured response is multiplied by an analog elliptic filter whose
//! lowest transmission zero sits exactly on `f_max`, so the filtered data
//! falls to zero at the band edge and is square integrable on the axis.

mod elliptic;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frf::FullAxisFrf;

pub use elliptic::{cd, ellip_k, sn};

/// Lowest selectivity `k = w_p / w_s` accepted from the degree equation.
/// Below it the passband would end under 5 % of the first zero.
pub const MIN_SELECTIVITY: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Lowpass,
    Bandpass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub order: usize,
    pub f_max: f64,
    pub f_min: f64,
    pub passband_ripple_db: f64,
    pub stopband_atten_db: f64,
}

impl FilterSpec {
    pub fn lowpass(f_max: f64) -> Self {
        FilterSpec {
            kind: FilterKind::Lowpass,
            order: 10,
            f_max,
            f_min: 0.0,
            passband_ripple_db: 0.1,
            stopband_atten_db: 100.0,
        }
    }

    pub fn bandpass(f_min: f64, f_max: f64) -> Self {
        FilterSpec {
            kind: FilterKind::Bandpass,
            f_min,
            ..FilterSpec::lowpass(f_max)
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn with_ripple_db(mut self, ripple: f64) -> Self {
        self.passband_ripple_db = ripple;
        self
    }

    pub fn with_atten_db(mut self, atten: f64) -> Self {
        self.stopband_atten_db = atten;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.order % 2 != 0 || !(4..=20).contains(&self.order) {
            return Err(Error::InvalidSpec(format!(
                "filter order must be even and within 4..=20, got {}",
                self.order
            )));
        }
        if !(self.passband_ripple_db > 0.0 && self.passband_ripple_db.is_finite()) {
            return Err(Error::InvalidSpec("passband ripple must be > 0 dB".into()));
        }
        if !(self.stopband_atten_db > 40.0 && self.stopband_atten_db.is_finite()) {
            return Err(Error::InvalidSpec("stopband attenuation must exceed 40 dB".into()));
        }
        if !(self.f_max > 0.0 && self.f_max.is_finite()) {
            return Err(Error::InvalidSpec("f_max must be positive".into()));
        }
        if self.kind == FilterKind::Bandpass && !(self.f_min > 0.0 && self.f_min < self.f_max) {
            return Err(Error::InvalidSpec("bandpass needs 0 < f_min < f_max".into()));
        }
        Ok(())
    }

    fn eps(&self) -> (f64, f64) {
        let eps_p = (10f64.powf(self.passband_ripple_db / 10.0) - 1.0).sqrt();
        let eps_s = (10f64.powf(self.stopband_atten_db / 10.0) - 1.0).sqrt();
        (eps_p, eps_s)
    }
}

/// Zero/pole/gain form `H(s) = gain * prod (s - z_i) / prod (s - p_i)`,
/// rad/s, with `s = j 2 pi f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalFilter {
    pub zeros: Vec<Complex64>,
    pub poles: Vec<Complex64>,
    pub gain: f64,
    /// Frequency ranges (Hz) of the equiripple passband(s).
    pub passbands: Vec<(f64, f64)>,
    /// Frequency ranges (Hz) where `|H| <= stopband_level`.
    pub stopbands: Vec<(f64, f64)>,
    pub passband_ripple_db: f64,
    pub stopband_atten_db: f64,
}

impl RationalFilter {
    /// `H == 1`.
    pub fn identity() -> Self {
        RationalFilter {
            zeros: Vec::new(),
            poles: Vec::new(),
            gain: 1.0,
            passbands: vec![(0.0, f64::INFINITY)],
            stopbands: Vec::new(),
            passband_ripple_db: 0.0,
            stopband_atten_db: f64::INFINITY,
        }
    }

    pub fn stopband_level(&self) -> f64 {
        10f64.powf(-self.stopband_atten_db / 20.0)
    }

    pub fn passband_floor(&self) -> f64 {
        10f64.powf(-self.passband_ripple_db / 20.0)
    }

    pub fn is_stable(&self) -> bool {
        self.poles.iter().all(|p| p.re < 0.0)
    }

    /// `H(s)` at an arbitrary complex point.
    ///
    /// Zero/pole factors are paired into O(1) ratios and conjugate pairs are
    /// multiplied first, so `H(conj s) == conj H(s)` holds bit for bit.
    pub fn at(&self, s: Complex64) -> Complex64 {
        let n = self.zeros.len().min(self.poles.len());
        let mut acc = Complex64::new(self.gain, 0.0);
        let ratio = |i: usize| (s - self.zeros[i]) / (s - self.poles[i]);
        let mut i = 0;
        while i + 1 < n {
            acc *= ratio(i) * ratio(i + 1);
            i += 2;
        }
        if i < n {
            acc *= ratio(i);
        }
        for z in &self.zeros[n..] {
            acc *= s - z;
        }
        for p in &self.poles[n..] {
            acc /= s - p;
        }
        acc
    }

    /// Limit of `H(s)` as `|s| -> infinity`.
    pub fn at_infinity(&self) -> Complex64 {
        match self.zeros.len().cmp(&self.poles.len()) {
            std::cmp::Ordering::Less => Complex64::new(0.0, 0.0),
            std::cmp::Ordering::Equal => Complex64::new(self.gain, 0.0),
            std::cmp::Ordering::Greater => Complex64::new(f64::INFINITY, 0.0),
        }
    }

    pub fn response(&self, f_hz: f64) -> Complex64 {
        self.at(Complex64::new(0.0, 2.0 * PI * f_hz))
    }

    pub fn evaluate(&self, freqs: &[f64]) -> Vec<Complex64> {
        freqs.iter().map(|&f| self.response(f)).collect()
    }

    /// Residue of `H` at its `j`-th pole (poles are simple by construction).
    pub fn residue(&self, j: usize) -> Complex64 {
        let p = self.poles[j];
        let mut acc = Complex64::new(self.gain, 0.0);
        let n = self.zeros.len().max(self.poles.len());
        for i in 0..n {
            if let Some(z) = self.zeros.get(i) {
                acc *= p - z;
            }
            if i != j {
                if let Some(q) = self.poles.get(i) {
                    acc /= p - q;
                }
            }
        }
        acc
    }

    /// Taylor coefficients `H^(m)(s0) / m!` for `m = 0..len`.
    pub fn taylor(&self, s0: Complex64, len: usize) -> Vec<Complex64> {
        let mut series = vec![Complex64::new(0.0, 0.0); len];
        if len == 0 {
            return series;
        }
        series[0] = Complex64::new(self.gain, 0.0);
        for z in &self.zeros {
            // multiply by (s0 - z) + t
            let a = s0 - z;
            for m in (0..len).rev() {
                let lower = if m > 0 { series[m - 1] } else { Complex64::new(0.0, 0.0) };
                series[m] = series[m] * a + lower;
            }
        }
        for p in &self.poles {
            // divide by (s0 - p) + t, i.e. multiply by sum (-1)^m t^m / a^(m+1)
            let a = s0 - p;
            for m in 0..len {
                let prev = if m > 0 { series[m - 1] } else { Complex64::new(0.0, 0.0) };
                series[m] = (series[m] - prev) / a;
            }
        }
        series
    }
}

fn check_prototype(spec: &FilterSpec) -> Result<elliptic::Prototype> {
    spec.validate()?;
    let (eps_p, eps_s) = spec.eps();
    let k1 = eps_p / eps_s;
    let proto = elliptic::prototype(spec.order, eps_p, k1);
    if proto.selectivity < MIN_SELECTIVITY {
        let need = elliptic::required_order(MIN_SELECTIVITY, k1).ceil() as usize;
        let need = need + need % 2;
        return Err(Error::InfeasibleSpec {
            order: spec.order,
            required_order: need.max(4),
        });
    }
    Ok(proto)
}

/// Elliptic lowpass whose lowest transmission zero is exactly at `f_max`.
pub fn design_elliptic_lowpass(spec: &FilterSpec) -> Result<RationalFilter> {
    if spec.kind != FilterKind::Lowpass {
        return Err(Error::InvalidSpec("expected a lowpass specification".into()));
    }
    lowpass_unchecked(spec)
}

fn lowpass_unchecked(spec: &FilterSpec) -> Result<RationalFilter> {
    let proto = check_prototype(spec)?;
    let w_zero = 2.0 * PI * spec.f_max;
    let scale = w_zero / proto.zeros[0].im.abs();
    let mut zeros: Vec<Complex64> = proto.zeros.iter().map(|z| z * scale).collect();
    // pin the first pair exactly on the band edge
    zeros[0] = Complex64::new(0.0, w_zero);
    zeros[1] = Complex64::new(0.0, -w_zero);
    let poles: Vec<Complex64> = proto.poles.iter().map(|p| p * scale).collect();
    let mut gain = Complex64::new(proto.dc_gain, 0.0);
    for (z, p) in zeros.iter().zip(&poles) {
        gain *= p / z;
    }
    let k = proto.selectivity;
    let filter = RationalFilter {
        zeros,
        poles,
        gain: gain.re,
        passbands: vec![(0.0, scale / (2.0 * PI))],
        stopbands: vec![(scale / (k * 2.0 * PI), f64::INFINITY)],
        passband_ripple_db: spec.passband_ripple_db,
        stopband_atten_db: spec.stopband_atten_db,
    };
    assert!(filter.is_stable(), "elliptic design produced an unstable pole");
    Ok(filter)
}

/// Highpass obtained by `s -> w0^2 / s` from the lowpass prototype; its
/// highest transmission zero is exactly at `f_zero`.
fn highpass_unchecked(spec: &FilterSpec, f_zero: f64) -> Result<RationalFilter> {
    let proto = check_prototype(spec)?;
    let w_zero = 2.0 * PI * f_zero;
    // lowpass with first zero at 1 rad/s, then invert about w_zero
    let scale = 1.0 / proto.zeros[0].im.abs();
    let invert = |x: Complex64| Complex64::new(w_zero, 0.0) / (x * scale);
    let mut zeros: Vec<Complex64> = proto.zeros.iter().map(|z| invert(*z)).collect();
    zeros[0] = Complex64::new(0.0, -w_zero);
    zeros[1] = Complex64::new(0.0, w_zero);
    let poles: Vec<Complex64> = proto.poles.iter().map(|p| invert(*p)).collect();
    let k = proto.selectivity;
    let filter = RationalFilter {
        zeros,
        poles,
        gain: proto.dc_gain,
        passbands: vec![(w_zero / scale / (2.0 * PI), f64::INFINITY)],
        stopbands: vec![(0.0, w_zero * k / scale / (2.0 * PI))],
        passband_ripple_db: spec.passband_ripple_db,
        stopband_atten_db: spec.stopband_atten_db,
    };
    assert!(filter.is_stable(), "elliptic design produced an unstable pole");
    Ok(filter)
}

/// Lowpass (zero at `f_max`) cascaded with a highpass (zero at `f_min`),
/// both of `spec.order`.
pub fn design_band_filter(spec: &FilterSpec) -> Result<RationalFilter> {
    if spec.kind != FilterKind::Bandpass {
        return Err(Error::InvalidSpec("expected a bandpass specification".into()));
    }
    spec.validate()?;
    let ratio = spec.f_max / spec.f_min;
    if ratio < 1.2 {
        return Err(Error::BandTooNarrow { ratio });
    }
    let lp = lowpass_unchecked(spec)?;
    let hp = highpass_unchecked(spec, spec.f_min)?;
    let mut zeros = lp.zeros;
    zeros.extend(hp.zeros);
    let mut poles = lp.poles;
    poles.extend(hp.poles);
    Ok(RationalFilter {
        zeros,
        poles,
        gain: lp.gain * hp.gain,
        passbands: vec![(hp.passbands[0].0, lp.passbands[0].1)],
        stopbands: vec![hp.stopbands[0], lp.stopbands[0]],
        passband_ripple_db: spec.passband_ripple_db,
        stopband_atten_db: spec.stopband_atten_db,
    })
}

pub fn design(spec: &FilterSpec) -> Result<RationalFilter> {
    match spec.kind {
        FilterKind::Lowpass => design_elliptic_lowpass(spec),
        FilterKind::Bandpass => design_band_filter(spec),
    }
}

/// `Z_f(jw) = Z(jw) H(jw)` samplewise.
pub fn apply_filter(frf: &FullAxisFrf, filter: &RationalFilter) -> FullAxisFrf {
    frf.map_values(true, |f, v| v * filter.response(f))
}
