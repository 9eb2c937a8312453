//! Stable and unstable parts on the original frequency grid, and the verdict.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bandlimit::RationalFilter;
use crate::disc::{synthesize, to_db, ErrorEstimate, FourierCoefficients, MoebiusMap};
use crate::error::{Error, Result};
use crate::frf::FullAxisFrf;
use crate::interp::{interpolate, InterpMethod, Node};

pub const DEFAULT_THRESHOLD_DB: f64 = 20.0;

/// Lowest level reported in dB; keeps reports finite for exact zeros.
pub const DB_FLOOR: f64 = -400.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Filtered units, i.e. parts of `Z * H`.
    pub stable: FullAxisFrf,
    pub unstable: FullAxisFrf,
    pub error: ErrorEstimate,
    pub coefficients: FourierCoefficients,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
}

/// How the unstable part is compared against the error level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginMode {
    /// Peak of the unstable part against the global maximum error.
    #[default]
    Global,
    /// Largest ratio of unstable part to the local error estimate.
    Pointwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub verdict: Verdict,
    pub margin_db: f64,
    pub peak_frequency: f64,
    pub threshold_db: f64,
    pub unstable_peak_db: f64,
    pub error_floor_db: f64,
    pub mode: MarginMode,
}

pub fn clamp_db(x: f64) -> f64 {
    if x.is_finite() {
        x.max(DB_FLOOR)
    } else if x > 0.0 {
        f64::MAX
    } else {
        DB_FLOOR
    }
}

pub fn db_of(x: f64) -> f64 {
    clamp_db(to_db(x))
}

/// Grid nodes with a few wrapped copies at each end so that stencils
/// straddling `theta = 0` see their periodic neighbours.
fn periodic_nodes(values: &[Complex64]) -> Vec<Node> {
    let n = values.len();
    let pad = 4.min(n);
    let node = |i: usize, shift: f64| {
        let t = TAU * i as f64 / n as f64;
        Node { theta: t + shift, z: Complex64::from_polar(1.0, t), value: values[i] }
    };
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((n - pad..n).map(|i| node(i, -TAU)));
    out.extend((0..n).map(|i| node(i, 0.0)));
    out.extend((0..pad).map(|i| node(i, TAU)));
    out
}

/// Evaluates a disc function given on the uniform grid at each sample of
/// `frf`, mapped back to axis units.
fn part_at_samples(grid: &[Complex64], frf: &FullAxisFrf, map: &MoebiusMap, method: InterpMethod) -> Vec<Complex64> {
    let nodes = periodic_nodes(grid);
    let mut order: Vec<(usize, f64, Complex64)> = frf
        .freqs()
        .iter()
        .enumerate()
        .map(|(i, &f)| (i, map.theta_at(f), map.z_at(f)))
        .collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1));
    let targets: Vec<(f64, Complex64)> = order.iter().map(|o| (o.1, o.2)).collect();
    let got = interpolate(&nodes, &targets, method);
    let mut out = vec![Complex64::new(0.0, 0.0); frf.len()];
    for ((i, _, z), v) in order.into_iter().zip(got) {
        out[i] = map.from_disc_weight(z) * v;
    }
    out
}

/// Level at which the zero-filled arcs past the band edges misrepresent the
/// filtered data: the filter's stopband level times the raw response peak.
pub fn leakage_db(filter: &RationalFilter, raw_peak: f64) -> f64 {
    db_of(filter.stopband_level() * raw_peak)
}

pub fn reconstruct_parts(
    coeffs: &FourierCoefficients,
    frf: &FullAxisFrf,
    map: &MoebiusMap,
    method: InterpMethod,
    error: ErrorEstimate,
) -> Result<Decomposition> {
    if (coeffs.alpha - map.alpha()).abs() > 1e-12 * map.alpha() {
        return Err(Error::CoefficientMismatch { coeffs: coeffs.alpha, map: map.alpha() });
    }
    let s_grid = synthesize(&coeffs.masked(true));
    let u_grid = synthesize(&coeffs.masked(false));
    let s = part_at_samples(&s_grid, frf, map, method);
    let u = part_at_samples(&u_grid, frf, map, method);
    Ok(Decomposition {
        stable: with_values(frf, s),
        unstable: with_values(frf, u),
        error,
        coefficients: coeffs.clone(),
    })
}

fn with_values(template: &FullAxisFrf, values: Vec<Complex64>) -> FullAxisFrf {
    let mut it = values.into_iter();
    template.map_values(true, |_, _| it.next().expect("one value per sample"))
}

pub fn verdict(dec: &Decomposition, threshold_db: f64) -> StabilityReport {
    verdict_with(dec, threshold_db, MarginMode::Global)
}

pub fn verdict_with(dec: &Decomposition, threshold_db: f64, mode: MarginMode) -> StabilityReport {
    let fold = |f: f64| if dec.unstable.hermitian { f.abs() } else { f };
    let (mut peak_f, mut peak) = (0.0, 0.0);
    for (f, v) in dec.unstable.iter() {
        if v.norm() > peak {
            peak = v.norm();
            peak_f = fold(f);
        }
    }
    let unstable_peak_db = db_of(peak);
    let error_floor_db = clamp_db(dec.error.floor_db());
    let margin_db = match mode {
        MarginMode::Global => unstable_peak_db - error_floor_db,
        MarginMode::Pointwise => pointwise_margin(dec).unwrap_or(unstable_peak_db - error_floor_db),
    };
    StabilityReport {
        verdict: if margin_db > threshold_db { Verdict::Unstable } else { Verdict::Stable },
        margin_db,
        peak_frequency: peak_f,
        threshold_db,
        unstable_peak_db,
        error_floor_db,
        mode,
    }
}

/// Largest `|U(f)| / err(f)` in dB over the samples that carry an error
/// estimate. Leakage, when known, bounds the local error from below.
fn pointwise_margin(dec: &Decomposition) -> Option<f64> {
    let freqs = dec.unstable.freqs();
    let leak = dec.error.leakage_db.map(|l| 10f64.powf(l / 20.0)).unwrap_or(0.0);
    dec.error
        .pointwise
        .iter()
        .filter_map(|&(f, e)| {
            let i = freqs.binary_search_by(|x| x.total_cmp(&f)).ok()?;
            let u = dec.unstable.value_at_index(i).norm();
            Some(db_of(u) - db_of(e.max(leak)))
        })
        .reduce(f64::max)
}
