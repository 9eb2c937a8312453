//! Jacobi elliptic functions and the analog elliptic lowpass prototype.
//!
//! Functions take their argument in units of the quarter period K, the
//! convention of Orfanidis' "Lecture Notes on Elliptic Filter Design", so
//! `cd(u, k)` here means `cd(u K, k)`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

const LANDEN_TOL: f64 = 1e-16;

/// Descending Landen moduli `k_n = (k_{n-1} / (1 + k'_{n-1}))^2`.
fn landen(k: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = k;
    while k > LANDEN_TOL && out.len() < 32 {
        let kp = ((1.0 - k) * (1.0 + k)).sqrt();
        k = (k / (1.0 + kp)).powi(2);
        out.push(k);
    }
    out
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    0.5 * (a + b)
}

/// Complete elliptic integral K(k).
pub fn ellip_k(k: f64) -> f64 {
    let kp = ((1.0 - k) * (1.0 + k)).sqrt();
    FRAC_PI_2 / agm(1.0, kp)
}

/// K'(k) / K(k), accurate for tiny moduli.
pub fn ellip_ratio(k: f64) -> f64 {
    let kp = ((1.0 - k) * (1.0 + k)).sqrt();
    agm(1.0, kp) / agm(1.0, k)
}

pub fn cd(u: Complex64, k: f64) -> Complex64 {
    let mut w = (u * FRAC_PI_2).cos();
    for v in landen(k).iter().rev() {
        w = (1.0 + v) * w / (1.0 + v * w * w);
    }
    w
}

pub fn sn(u: Complex64, k: f64) -> Complex64 {
    let mut w = (u * FRAC_PI_2).sin();
    for v in landen(k).iter().rev() {
        w = (1.0 + v) * w / (1.0 + v * w * w);
    }
    w
}

/// Inverse of [`cd`].
pub fn acd(w: Complex64, k: f64) -> Complex64 {
    let v = landen(k);
    let mut w = w;
    let mut prev = k;
    for vn in &v {
        w = w / (1.0 + (1.0 - w * w * prev * prev).sqrt()) * 2.0 / (1.0 + vn);
        prev = *vn;
    }
    w.acos() * (2.0 / PI)
}

/// Inverse of [`sn`].
pub fn asn(w: Complex64, k: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) - acd(w, k)
}

/// Solves the degree equation `N K'(k1)/K(k1) = K'(k)/K(k)` for the
/// selectivity `k` via the nome series.
pub fn degree_selectivity(order: usize, k1: f64) -> f64 {
    let q = (-PI * ellip_ratio(k1) / order as f64).exp();
    let mut num = 0.0;
    let mut den = 0.0;
    for m in 0..64u32 {
        let t = q.powi((m * (m + 1)) as i32);
        num += t;
        if m >= 1 {
            den += q.powi((m * m) as i32);
        }
        if t < 1e-18 {
            break;
        }
    }
    let g = num / (1.0 + 2.0 * den);
    4.0 * q.sqrt() * g * g
}

/// Smallest order for which the degree equation reaches selectivity `k`.
pub fn required_order(k: f64, k1: f64) -> f64 {
    ellip_ratio(k1) / ellip_ratio(k)
}

/// Normalized prototype (passband edge 1 rad/s) for an even order.
pub struct Prototype {
    pub zeros: Vec<Complex64>,
    pub poles: Vec<Complex64>,
    /// DC gain `1 / sqrt(1 + eps_p^2)`.
    pub dc_gain: f64,
    pub selectivity: f64,
}

/// Zeros are emitted in conjugate pairs, lowest frequency first, and the
/// i-th pole pair is aligned with the i-th zero pair.
pub fn prototype(order: usize, eps_p: f64, k1: f64) -> Prototype {
    debug_assert!(order % 2 == 0);
    let k = degree_selectivity(order, k1);
    let j = Complex64::i();
    let n = order as f64;
    let v0 = -j * asn(j / eps_p, k1) / n;
    let mut zeros = Vec::with_capacity(order);
    let mut poles = Vec::with_capacity(order);
    for i in 1..=order / 2 {
        let u = (2 * i - 1) as f64 / n;
        let zeta = cd(Complex64::new(u, 0.0), k);
        let z = j / (k * zeta);
        let z = Complex64::new(0.0, z.im);
        let p = j * cd(Complex64::new(u, 0.0) - j * v0, k);
        zeros.push(z);
        zeros.push(z.conj());
        poles.push(p);
        poles.push(p.conj());
    }
    Prototype {
        zeros,
        poles,
        dc_gain: 1.0 / (1.0 + eps_p * eps_p).sqrt(),
        selectivity: k,
    }
}
