//! Machine-readable results: the JSON report and the plot-ready curves.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decomposition::{clamp_db, db_of, StabilityReport};
use crate::error::Result;
use crate::pipeline::{Analysis, AnalysisConfig, EnergySplit, ResolvedConfig};
use crate::poles::PoleSet;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    /// Seconds since the Unix epoch; the only field that varies between runs.
    pub timestamp: u64,
    pub config: AnalysisConfig,
    pub entries: Vec<ReportEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFloor {
    /// Largest estimated interpolation error, dB re 1 Ohm.
    pub interpolation_db: f64,
    /// Stopband leakage level, dB re 1 Ohm.
    pub leakage_db: Option<f64>,
    /// Level the margin is measured against.
    pub floor_db: f64,
    /// RMS interpolation error in disc units.
    pub disc_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub label: String,
    pub source: String,
    pub mixing_index: i32,
    pub resolved: ResolvedConfig,
    #[serde(flatten)]
    pub stability: StabilityReport,
    pub error_floor: ErrorFloor,
    pub energy: EnergySplit,
    pub poles: Option<PoleSet>,
    pub pole_error: Option<String>,
}

impl ReportEntry {
    pub fn new(analysis: &Analysis, label: &str, source: &str, mixing_index: i32) -> Self {
        let err = &analysis.decomposition.error;
        ReportEntry {
            label: label.to_string(),
            source: source.to_string(),
            mixing_index,
            resolved: analysis.resolved.clone(),
            stability: analysis.stability.clone(),
            error_floor: ErrorFloor {
                interpolation_db: clamp_db(err.global_max_db),
                leakage_db: err.leakage_db.map(clamp_db),
                floor_db: analysis.stability.error_floor_db,
                disc_rms: err.disc_l2,
            },
            energy: analysis.energy,
            poles: analysis.poles.clone(),
            pole_error: analysis.pole_error.clone(),
        }
    }
}

impl Report {
    pub fn new(config: AnalysisConfig, entries: Vec<ReportEntry>) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Report {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            config,
            entries,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub freq_hz: f64,
    pub stable_db: f64,
    pub unstable_db: f64,
    pub error_db: f64,
}

pub const CURVE_HEADER: &str = "freq_hz,stable_db,unstable_db,error_db";

/// One row per sample of the decomposition; for Hermitian data only the
/// non-negative frequencies. Levels in dB re 1 Ohm.
pub fn curve_rows(analysis: &Analysis) -> Vec<CurveRow> {
    let dec = &analysis.decomposition;
    let hermitian = dec.stable.hermitian;
    let pointwise = &dec.error.pointwise;
    dec.stable
        .iter()
        .zip(dec.unstable.values())
        .filter(|((f, _), _)| !hermitian || *f >= 0.0)
        .map(|((f, s), u)| CurveRow {
            freq_hz: f,
            stable_db: db_of(s.norm()),
            unstable_db: db_of(u.norm()),
            error_db: db_of(error_at(pointwise, f, hermitian)),
        })
        .collect()
}

/// Pointwise error estimate linearly interpolated to `f`; held constant
/// beyond the estimated range.
fn error_at(pointwise: &[(f64, f64)], f: f64, hermitian: bool) -> f64 {
    let at = |f: f64| -> f64 {
        if pointwise.is_empty() {
            return 0.0;
        }
        let i = pointwise.partition_point(|p| p.0 < f);
        if i == 0 {
            return pointwise[0].1;
        }
        if i == pointwise.len() {
            return pointwise[i - 1].1;
        }
        let (f0, e0) = pointwise[i - 1];
        let (f1, e1) = pointwise[i];
        e0 + (e1 - e0) * (f - f0) / (f1 - f0)
    };
    if hermitian {
        at(f).max(at(-f))
    } else {
        at(f)
    }
}

pub fn write_curves(path: impl AsRef<Path>, analysis: &Analysis) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_curves_to(&mut out, analysis)?;
    out.flush()?;
    Ok(())
}

pub fn write_curves_to(out: &mut impl Write, analysis: &Analysis) -> Result<()> {
    writeln!(out, "{CURVE_HEADER}")?;
    for r in curve_rows(analysis) {
        writeln!(out, "{:.16e},{:.6},{:.6},{:.6}", r.freq_hz, r.stable_db, r.unstable_db, r.error_db)?;
    }
    Ok(())
}
