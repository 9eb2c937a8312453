//! The end-to-end analysis: band-limit, project, split, judge, and
//! optionally locate the unstable poles.

use serde::{Deserialize, Serialize};

use crate::bandlimit::{apply_filter, design, FilterKind, FilterSpec, RationalFilter};
use crate::decomposition::{
    leakage_db, reconstruct_parts, verdict_with, Decomposition, MarginMode, StabilityReport, DEFAULT_THRESHOLD_DB,
};
use crate::disc::{default_n_fft, estimate_interp_error, fft_coefficients, resample_uniform, to_disc, MoebiusMap};
use crate::error::{Error, Result};
use crate::frf::{hermitian_extend, Frf, FullAxisFrf};
use crate::interp::InterpMethod;
use crate::poles::{kung_unstable_poles, KungOptions, PoleSet, DEFAULT_MAX_ORDER, DEFAULT_TOL_REL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Lower band edge in Hz; samples below it are dropped.
    pub f_min: Option<f64>,
    /// Upper band edge in Hz; defaults to the highest sample frequency.
    pub f_max: Option<f64>,
    pub filter_kind: FilterKind,
    pub filter_order: usize,
    pub ripple_db: f64,
    pub atten_db: f64,
    /// rad/s; defaults to `2 pi f_max (sqrt 2 - 1)`.
    pub alpha: Option<f64>,
    pub n_fft: Option<usize>,
    pub interp: InterpMethod,
    pub threshold_db: f64,
    pub margin_mode: MarginMode,
    pub extract_poles: bool,
    pub max_order: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let spec = FilterSpec::lowpass(1.0);
        AnalysisConfig {
            f_min: None,
            f_max: None,
            filter_kind: FilterKind::Lowpass,
            filter_order: spec.order,
            ripple_db: spec.passband_ripple_db,
            atten_db: spec.stopband_atten_db,
            alpha: None,
            n_fft: None,
            interp: InterpMethod::default(),
            threshold_db: DEFAULT_THRESHOLD_DB,
            margin_mode: MarginMode::default(),
            extract_poles: false,
            max_order: DEFAULT_MAX_ORDER,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_db > 0.0 && self.threshold_db.is_finite()) {
            return Err(Error::InvalidSpec(format!("threshold must be > 0 dB, got {}", self.threshold_db)));
        }
        if let (Some(lo), Some(hi)) = (self.f_min, self.f_max) {
            if lo >= hi {
                return Err(Error::InvalidSpec(format!("f_min {lo} must be below f_max {hi}")));
            }
        }
        if self.filter_kind == FilterKind::Bandpass && self.f_min.is_none() {
            return Err(Error::InvalidSpec("bandpass filtering needs f_min".into()));
        }
        if self.max_order == 0 || self.max_order > DEFAULT_MAX_ORDER {
            return Err(Error::InvalidSpec(format!("max_order must be within 1..={DEFAULT_MAX_ORDER}")));
        }
        Ok(())
    }
}

/// Settings after defaults were resolved against the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub filter: FilterSpec,
    pub alpha: f64,
    pub n_fft: usize,
    pub interp: InterpMethod,
    pub threshold_db: f64,
    pub margin_mode: MarginMode,
    pub samples_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySplit {
    pub stable_fraction: f64,
    pub unstable_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub resolved: ResolvedConfig,
    pub filter: RationalFilter,
    pub map: MoebiusMap,
    /// Filtered input on the full axis.
    pub filtered: FullAxisFrf,
    pub decomposition: Decomposition,
    pub stability: StabilityReport,
    pub energy: EnergySplit,
    pub poles: Option<PoleSet>,
    /// Why pole extraction failed, if it did.
    pub pole_error: Option<String>,
}

/// Analyzes one-sided data with real-coefficient symmetry.
pub fn analyze(frf: &Frf, cfg: &AnalysisConfig) -> Result<Analysis> {
    cfg.validate()?;
    let hi = cfg.f_max.unwrap_or_else(|| frf.freqs()[frf.len() - 1]);
    let lo = cfg.f_min.unwrap_or(0.0);
    let band = frf.restrict(lo, hi)?;
    let full = hermitian_extend(&band)?;
    run(full, hi, cfg)
}

/// Analyzes data given on signed frequencies, without assuming symmetry.
pub fn analyze_full_axis(frf: &FullAxisFrf, cfg: &AnalysisConfig) -> Result<Analysis> {
    cfg.validate()?;
    let f_abs_max = frf.freqs().iter().map(|f| f.abs()).fold(0.0, f64::max);
    let hi = cfg.f_max.unwrap_or(f_abs_max);
    let lo = cfg.f_min.unwrap_or(0.0);
    let (freqs, values): (Vec<f64>, Vec<_>) = frf.iter().filter(|(f, _)| f.abs() >= lo && f.abs() <= hi).unzip();
    let mut band = FullAxisFrf::new(freqs, values)?;
    band.hermitian = frf.hermitian;
    band.mixing_index = frf.mixing_index;
    band.label = frf.label.clone();
    run(band, hi, cfg)
}

fn run(full: FullAxisFrf, f_max: f64, cfg: &AnalysisConfig) -> Result<Analysis> {
    let spec = FilterSpec {
        kind: cfg.filter_kind,
        order: cfg.filter_order,
        f_max,
        f_min: cfg.f_min.unwrap_or(0.0),
        passband_ripple_db: cfg.ripple_db,
        stopband_atten_db: cfg.atten_db,
    };
    let filter = design(&spec)?;
    let map = match cfg.alpha {
        Some(a) => MoebiusMap::new(a)?,
        None => MoebiusMap::for_band_edge(f_max)?,
    };
    let filtered = apply_filter(&full, &filter);
    let mut disc = to_disc(&filtered, &map);
    if cfg.filter_kind == FilterKind::Bandpass {
        disc = disc.with_dc_gap();
    }
    let n_fft = cfg.n_fft.unwrap_or_else(|| default_n_fft(disc.len()));
    let grid = resample_uniform(&disc, n_fft, cfg.interp)?;
    let coeffs = fft_coefficients(&grid);
    let error = estimate_interp_error(&disc, cfg.interp)?.with_leakage_db(leakage_db(&filter, full.max_abs()));
    let dec = reconstruct_parts(&coeffs, &filtered, &map, cfg.interp, error)?;
    let stability = verdict_with(&dec, cfg.threshold_db, cfg.margin_mode);
    let (es, eu) = coeffs.energy_split();
    let total = es + eu;
    let energy = if total > 0.0 {
        EnergySplit { stable_fraction: es / total, unstable_fraction: eu / total }
    } else {
        EnergySplit { stable_fraction: 1.0, unstable_fraction: 0.0 }
    };
    let (poles, pole_error) = if cfg.extract_poles {
        match kung_unstable_poles(&dec, &map, KungOptions { max_order: cfg.max_order, tol_rel: DEFAULT_TOL_REL, f_max }) {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    Ok(Analysis {
        resolved: ResolvedConfig {
            filter: spec,
            alpha: map.alpha(),
            n_fft,
            interp: cfg.interp,
            threshold_db: cfg.threshold_db,
            margin_mode: cfg.margin_mode,
            samples_used: filtered.len(),
        },
        filter,
        map,
        filtered,
        decomposition: dec,
        stability,
        energy,
        poles,
        pole_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::Verdict;
    use crate::synth::{eval_frf, random_system, UnstablePair};
    use num_complex::Complex64;
    use std::f64::consts::TAU;

    fn grid(f_max: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| f_max * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn stable_random_system_is_stable() {
        let sys = random_system(30, (0.0, 5e9), &[], 2).unwrap();
        let frf = eval_frf(&sys, &grid(5e9, 3000)).unwrap();
        let a = analyze(&frf, &AnalysisConfig::default()).unwrap();
        assert_eq!(a.stability.verdict, Verdict::Stable, "{:?}", a.stability);
        assert!((a.energy.stable_fraction + a.energy.unstable_fraction - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planted_pair_is_found() {
        let sigma = TAU * 1e7;
        let sys = random_system(40, (0.0, 5e9), &[UnstablePair::new(1e9, sigma)], 3).unwrap().with_delay(2e-9);
        let frf = eval_frf(&sys, &grid(5e9, 5000)).unwrap();
        let cfg = AnalysisConfig { extract_poles: true, interp: InterpMethod::Pade, atten_db: 120.0, ..Default::default() };
        let a = analyze(&frf, &cfg).unwrap();
        assert_eq!(a.stability.verdict, Verdict::Unstable, "{:?}", a.stability);
        assert!((a.stability.peak_frequency - 1e9).abs() < 1e7);
        let poles = a.poles.expect("poles extracted");
        let want = Complex64::new(sigma, TAU * 1e9);
        let hit = poles.poles.iter().find(|p| p.lambda.im > 0.0).expect("upper pole");
        assert!(((hit.lambda.im - want.im) / want.im).abs() < 1e-3, "{poles:?}");
        assert!(((hit.lambda.re - want.re) / want.re).abs() < 1e-2, "{poles:?}");
        assert!(hit.reliable);
    }

    #[test]
    fn config_validation() {
        let frf = eval_frf(&random_system(10, (0.0, 1e9), &[], 1).unwrap(), &grid(1e9, 100)).unwrap();
        let bad = AnalysisConfig { threshold_db: 0.0, ..Default::default() };
        assert!(analyze(&frf, &bad).is_err());
        let bp = AnalysisConfig { filter_kind: FilterKind::Bandpass, ..Default::default() };
        assert!(analyze(&frf, &bp).is_err());
        let inverted = AnalysisConfig { f_min: Some(2e8), f_max: Some(1e8), ..Default::default() };
        assert!(analyze(&frf, &inverted).is_err());
    }
}
