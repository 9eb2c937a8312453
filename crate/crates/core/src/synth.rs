//! Synthetic responses with known pole-residue ground truth.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandlimit::RationalFilter;
use crate::error::{Error, Result};
use crate::frf::{split_ssb, Frf, FullAxisFrf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleTerm {
    pub pole: Complex64,
    pub residue: Complex64,
    #[serde(default = "one")]
    pub multiplicity: u32,
}

fn one() -> u32 {
    1
}

impl PoleTerm {
    pub fn simple(pole: Complex64, residue: Complex64) -> Self {
        PoleTerm { pole, residue, multiplicity: 1 }
    }

    fn at(&self, s: Complex64) -> Complex64 {
        self.residue / (s - self.pole).powi(self.multiplicity as i32)
    }
}

/// `Z(s) = e^{-s tau} (d + sum_i a_i / (s - lambda_i)^{m_i})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolesResiduesSystem {
    pub terms: Vec<PoleTerm>,
    #[serde(default)]
    pub direct_term: Complex64,
    #[serde(default)]
    pub delay: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PolesResiduesSystem {
    pub fn new(terms: Vec<PoleTerm>) -> Self {
        PolesResiduesSystem { terms, direct_term: Complex64::new(0.0, 0.0), delay: 0.0, seed: 0 }
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    pub fn with_direct_term(mut self, d: Complex64) -> Self {
        self.direct_term = d;
        self
    }

    /// Appends the conjugate of every term with a non-real pole that lacks
    /// one, so the response has real coefficients.
    pub fn hermitian_closure(mut self) -> Self {
        let mut extra = Vec::new();
        for t in &self.terms {
            if t.pole.im == 0.0 {
                continue;
            }
            let mirror = PoleTerm { pole: t.pole.conj(), residue: t.residue.conj(), multiplicity: t.multiplicity };
            if !self.terms.contains(&mirror) && !extra.contains(&mirror) {
                extra.push(mirror);
            }
        }
        self.terms.extend(extra);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay.is_finite() && self.delay >= 0.0) {
            return Err(Error::BadSpec(format!("delay must be >= 0, got {}", self.delay)));
        }
        for t in &self.terms {
            if !t.pole.is_finite() || !t.residue.is_finite() || t.multiplicity == 0 {
                return Err(Error::BadSpec(format!("invalid term {t:?}")));
            }
            if t.pole.re == 0.0 {
                return Err(Error::BadSpec(format!("pole {} lies on the imaginary axis", t.pole)));
            }
        }
        Ok(())
    }

    pub fn at(&self, s: Complex64) -> Complex64 {
        let sum: Complex64 = self.direct_term + self.terms.iter().map(|t| t.at(s)).sum::<Complex64>();
        if self.delay == 0.0 {
            sum
        } else {
            (-s * self.delay).exp() * sum
        }
    }

    pub fn unstable_terms(&self) -> impl Iterator<Item = &PoleTerm> {
        self.terms.iter().filter(|t| t.pole.re > 0.0)
    }

    pub fn is_stable(&self) -> bool {
        self.unstable_terms().next().is_none()
    }
}

/// Samples `system` at non-negative frequencies in Hz.
pub fn eval_frf(system: &PolesResiduesSystem, freqs: &[f64]) -> Result<Frf> {
    let values = freqs.iter().map(|&f| system.at(Complex64::new(0.0, TAU * f))).collect();
    Frf::new(freqs.to_vec(), values)
}

/// Samples `system` at signed frequencies in Hz.
pub fn eval_full_axis(system: &PolesResiduesSystem, freqs: &[f64]) -> Result<FullAxisFrf> {
    let values = freqs.iter().map(|&f| system.at(Complex64::new(0.0, TAU * f))).collect();
    FullAxisFrf::new(freqs.to_vec(), values)
}

/// An unstable conjugate pair `sigma +- j 2 pi f0` with residue
/// `residue_scale * sigma * e^{j phase}` on the upper pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnstablePair {
    pub f0: f64,
    pub sigma: f64,
    pub residue_scale: f64,
}

impl UnstablePair {
    pub fn new(f0: f64, sigma: f64) -> Self {
        UnstablePair { f0, sigma, residue_scale: 0.1 }
    }

    pub fn with_residue_scale(mut self, r: f64) -> Self {
        self.residue_scale = r;
        self
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..=hi.ln()).exp()
}

fn unit_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Random Hermitian system of `order` poles over `band` (Hz) with planted
/// unstable pairs. Stable resonances have unit-order peaks.
pub fn random_system(order: usize, band: (f64, f64), unstable: &[UnstablePair], seed: u64) -> Result<PolesResiduesSystem> {
    let (f_lo, f_hi) = band;
    if !(f_hi > 0.0 && f_lo >= 0.0 && f_lo < f_hi) {
        return Err(Error::BadSpec(format!("band [{f_lo}, {f_hi}] is empty")));
    }
    if order < 2 * unstable.len() + 2 {
        return Err(Error::BadSpec(format!(
            "order {order} leaves no room for {} unstable pairs",
            unstable.len()
        )));
    }
    for u in unstable {
        if !(u.sigma > 0.0) {
            return Err(Error::BadSpec(format!("unstable sigma must be > 0, got {}", u.sigma)));
        }
        if !(u.f0 >= f_lo && u.f0 <= f_hi) {
            return Err(Error::BadSpec(format!("f0 = {} outside band", u.f0)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let im_lo = if f_lo > 0.0 { f_lo } else { f_hi * 1e-3 };
    let w_max = TAU * f_hi;
    let n_stable = order - 2 * unstable.len();
    let mut terms = Vec::with_capacity(order);
    for _ in 0..n_stable / 2 {
        let im = TAU * log_uniform(&mut rng, im_lo, f_hi);
        let re = -log_uniform(&mut rng, 1e-3, 1e-1) * w_max;
        let pole = Complex64::new(re, im);
        let residue = re.abs() * unit_complex(&mut rng);
        terms.push(PoleTerm::simple(pole, residue));
        terms.push(PoleTerm::simple(pole.conj(), residue.conj()));
    }
    if n_stable % 2 == 1 {
        let re = -log_uniform(&mut rng, 1e-3, 1e-1) * w_max;
        let residue = re.abs() * rng.gen_range(-1.0..1.0);
        terms.push(PoleTerm::simple(Complex64::new(re, 0.0), Complex64::new(residue, 0.0)));
    }
    for u in unstable {
        let pole = Complex64::new(u.sigma, TAU * u.f0);
        let phase = rng.gen_range(0.0..TAU);
        let residue = u.residue_scale * u.sigma * Complex64::from_polar(1.0, phase);
        terms.push(PoleTerm::simple(pole, residue));
        terms.push(PoleTerm::simple(pole.conj(), residue.conj()));
    }
    Ok(PolesResiduesSystem { terms, direct_term: Complex64::new(0.0, 0.0), delay: 0.0, seed })
}

/// Numerator coefficients of the local-model counterexample, highest power
/// first (`s^14` down to `s^0`).
pub const APPENDIX_NUMERATOR: [f64; 15] = [
    -228.5, -153.7, -875.2, -550.2, -1364.9, -789.9, -1118.6, -584.2, -520.9, -239.2, -140.7, -54.7, -21.4, -5.9, -1.0,
];

/// All poles of the counterexample sit at `-5` with this multiplicity.
pub const APPENDIX_POLE_ORDER: i32 = 15;

pub const APPENDIX_DENOMINATOR_SCALE: f64 = 9.9281e10;

/// The counterexample `P(s) / ((s + 5)^15 / 9.9281e10)`, stable by construction.
pub fn appendix_value(s: Complex64) -> Complex64 {
    let num = APPENDIX_NUMERATOR.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c);
    num * APPENDIX_DENOMINATOR_SCALE / (s + 5.0).powi(APPENDIX_POLE_ORDER)
}

/// Samples the counterexample at angular frequencies `omegas` (rad/s, used
/// directly as `s = j omega`); the returned axis is in Hz, `omega / 2 pi`.
pub fn appendix_fun(omegas: &[f64]) -> Result<FullAxisFrf> {
    let freqs = omegas.iter().map(|w| w / TAU).collect();
    let values = omegas.iter().map(|&w| appendix_value(Complex64::new(0.0, w))).collect();
    let mut frf = FullAxisFrf::new(freqs, values)?;
    frf.hermitian = omegas.len() > 1 && omegas.iter().zip(omegas.iter().rev()).all(|(a, b)| a == &-b);
    Ok(frf)
}

/// Principal part `sum_j coeffs[j] / (s - pole)^{j+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalPart {
    pub pole: Complex64,
    pub coeffs: Vec<Complex64>,
}

impl PrincipalPart {
    pub fn at(&self, s: Complex64) -> Complex64 {
        let x = 1.0 / (s - self.pole);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut p = x;
        for c in &self.coeffs {
            acc += c * p;
            p *= x;
        }
        acc
    }
}

/// Exact split of `Z H` into the parts with poles left and right of the axis.
#[derive(Debug, Clone)]
pub struct SplitOracle {
    pub unstable: Vec<PrincipalPart>,
    /// Left-half-plane principal parts; absent when a delay makes the stable
    /// part non-rational.
    pub stable: Option<Vec<PrincipalPart>>,
    /// Value of `Z H` at infinity, assigned to the stable part.
    pub constant: Complex64,
    system: PolesResiduesSystem,
    filter: RationalFilter,
}

impl SplitOracle {
    pub fn total_at(&self, s: Complex64) -> Complex64 {
        self.system.at(s) * self.filter.at(s)
    }

    pub fn unstable_at(&self, s: Complex64) -> Complex64 {
        self.unstable.iter().map(|p| p.at(s)).sum()
    }

    pub fn stable_at(&self, s: Complex64) -> Complex64 {
        match &self.stable {
            Some(parts) => self.constant + parts.iter().map(|p| p.at(s)).sum::<Complex64>(),
            None => self.total_at(s) - self.unstable_at(s),
        }
    }

    pub fn unstable_at_freq(&self, f_hz: f64) -> Complex64 {
        self.unstable_at(Complex64::new(0.0, TAU * f_hz))
    }

    pub fn stable_at_freq(&self, f_hz: f64) -> Complex64 {
        self.stable_at(Complex64::new(0.0, TAU * f_hz))
    }
}

/// Principal part of `a G(s) / (s - lambda)^m` from the Taylor series of `G`.
fn principal(term: &PoleTerm, taylor: &[Complex64]) -> PrincipalPart {
    let m = term.multiplicity as usize;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
    for (j, g) in taylor.iter().enumerate().take(m) {
        coeffs[m - 1 - j] = term.residue * g;
    }
    PrincipalPart { pole: term.pole, coeffs }
}

/// Residue-calculus split of `Z(s) H(s)`. Right-half-plane poles come from
/// `Z` only; with a delay `e^{-s tau}` their residues pick up `e^{-lambda tau}`.
pub fn analytic_split(system: &PolesResiduesSystem, filter: &RationalFilter) -> Result<SplitOracle> {
    system.validate()?;
    let delayed = system.delay != 0.0;
    let taylor_of_g = |term: &PoleTerm| -> Result<Vec<Complex64>> {
        let m = term.multiplicity as usize;
        if delayed && m > 1 {
            return Err(Error::MultiplePole { multiplicity: term.multiplicity });
        }
        let mut t = filter.taylor(term.pole, m);
        if delayed {
            let e = (-term.pole * system.delay).exp();
            for c in &mut t {
                *c *= e;
            }
        }
        Ok(t)
    };
    let mut unstable = Vec::new();
    let mut stable_parts = Vec::new();
    for term in &system.terms {
        if term.pole.re > 0.0 {
            unstable.push(principal(term, &taylor_of_g(term)?));
        } else if !delayed {
            stable_parts.push(principal(term, &taylor_of_g(term)?));
        }
    }
    let stable = if delayed {
        None
    } else {
        for (j, &p) in filter.poles.iter().enumerate() {
            stable_parts.push(PrincipalPart { pole: p, coeffs: vec![system.at(p) * filter.residue(j)] });
        }
        Some(stable_parts)
    };
    let constant = if delayed { Complex64::new(0.0, 0.0) } else { system.direct_term * filter.at_infinity() };
    Ok(SplitOracle { unstable, stable, constant, system: system.clone(), filter: filter.clone() })
}

/// Period-doubling-style large-signal fixture: single-sideband responses
/// `Z'[1]`, `Z'[-1]` whose sine/cosine recombinations both carry unstable
/// resonances at `f_ex / 2 + k f_ex`, `k = 0, 1, 2`, over stable background.
#[derive(Debug, Clone)]
pub struct PeriodDoublingFixture {
    pub z_plus: Frf,
    pub z_minus: Frf,
    pub cos_system: PolesResiduesSystem,
    pub sin_system: PolesResiduesSystem,
    pub f_ex: f64,
}

pub const PERIOD_DOUBLING_F_EX: f64 = 100e3;

pub fn period_doubling_fixture(seed: u64) -> Result<PeriodDoublingFixture> {
    let f_ex = PERIOD_DOUBLING_F_EX;
    let freqs: Vec<f64> = (0..2000).map(|i| 1001.0 + 1000.0 * i as f64).collect();
    let f_hi = freqs[freqs.len() - 1];
    let pairs: Vec<UnstablePair> = (0..3)
        .map(|k| UnstablePair::new(f_ex / 2.0 + k as f64 * f_ex, TAU * 2e3).with_residue_scale(0.5 / (k + 1) as f64))
        .collect();
    let cos_system = random_system(26, (0.0, f_hi), &pairs, seed)?;
    let sin_system = random_system(26, (0.0, f_hi), &pairs, seed.wrapping_add(1))?;
    let zc = eval_frf(&cos_system, &freqs)?.with_mixing_index(1).with_label("Z");
    let zs = eval_frf(&sin_system, &freqs)?.with_mixing_index(-1);
    let (z_plus, z_minus) = split_ssb(&zc, &zs)?;
    Ok(PeriodDoublingFixture {
        z_plus: z_plus.with_label("Z'"),
        z_minus: z_minus.with_label("Z'"),
        cos_system,
        sin_system,
        f_ex,
    })
}
