//! Interpolation of complex samples along the unit circle.
//!
//! Nodes are points `z = e^{j theta}` sorted by angle. `Linear` interpolates
//! real and imaginary parts linearly in `theta`. `Pade` builds a local [2/2]
//! rational interpolant in `z` through the five nearest nodes; it reproduces
//! any rational function of that degree exactly (for instance a single pole
//! plus a linear background) and falls back to `Linear` when the local
//! denominator places a root on the stencil's stretch of the circle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpMethod {
    #[default]
    Linear,
    Pade,
}

impl std::str::FromStr for InterpMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(InterpMethod::Linear),
            "pade" => Ok(InterpMethod::Pade),
            other => Err(format!("unknown interpolation method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub theta: f64,
    pub z: Complex64,
    pub value: Complex64,
}

const STENCIL: usize = 5;

/// Roots closer to the circle than this fraction of the stencil's mean
/// angular spacing trigger the linear fallback.
const ROOT_GUARD: f64 = 0.5;

struct LocalRational {
    start: usize,
    center: Complex64,
    scale: f64,
    num: [Complex64; 3],
    den: [Complex64; 2],
    fallback: bool,
}

impl LocalRational {
    fn eval(&self, z: Complex64) -> Complex64 {
        let t = (z - self.center) / self.scale;
        let n = self.num[0] + t * (self.num[1] + t * self.num[2]);
        let d = 1.0 + t * (self.den[0] + t * self.den[1]);
        n / d
    }
}

/// Gaussian elimination with complete pivoting. Columns whose pivot falls
/// below `1e-14` of the largest entry are treated as free and set to zero.
fn solve5(mut a: [[Complex64; 5]; 5], mut b: [Complex64; 5]) -> [Complex64; 5] {
    let mut col_perm = [0usize, 1, 2, 3, 4];
    let scale = a.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max);
    let tiny = 1e-14 * scale;
    let mut rank = 5;
    for k in 0..5 {
        let (mut pr, mut pc, mut best) = (k, k, -1.0);
        for (r, row) in a.iter().enumerate().skip(k) {
            for (c, x) in row.iter().enumerate().skip(k) {
                if x.norm() > best {
                    best = x.norm();
                    pr = r;
                    pc = c;
                }
            }
        }
        if best <= tiny {
            rank = k;
            break;
        }
        a.swap(k, pr);
        b.swap(k, pr);
        if pc != k {
            for row in a.iter_mut() {
                row.swap(k, pc);
            }
            col_perm.swap(k, pc);
        }
        for r in k + 1..5 {
            let m = a[r][k] / a[k][k];
            if m == Complex64::new(0.0, 0.0) {
                continue;
            }
            for c in k..5 {
                let v = a[k][c];
                a[r][c] -= m * v;
            }
            let v = b[k];
            b[r] -= m * v;
        }
    }
    let mut y = [Complex64::new(0.0, 0.0); 5];
    for k in (0..rank).rev() {
        let mut acc = b[k];
        for c in k + 1..rank {
            acc -= a[k][c] * y[c];
        }
        y[k] = acc / a[k][k];
    }
    let mut x = [Complex64::new(0.0, 0.0); 5];
    for k in 0..5 {
        x[col_perm[k]] = y[k];
    }
    x
}

fn quadratic_roots(b1: Complex64, b2: Complex64) -> Vec<Complex64> {
    // roots of 1 + b1 t + b2 t^2
    let zero = Complex64::new(0.0, 0.0);
    if b2 == zero {
        return if b1 == zero { Vec::new() } else { vec![-1.0 / b1] };
    }
    let disc = (b1 * b1 - 4.0 * b2).sqrt();
    let q = if (b1.conj() * disc).re >= 0.0 {
        -0.5 * (b1 + disc)
    } else {
        -0.5 * (b1 - disc)
    };
    if q == zero {
        return Vec::new();
    }
    vec![q / b2, 1.0 / q]
}

fn wrap_pi(x: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut y = x % two_pi;
    if y > std::f64::consts::PI {
        y -= two_pi;
    } else if y < -std::f64::consts::PI {
        y += two_pi;
    }
    y
}

fn fit_local(nodes: &[Node], start: usize) -> LocalRational {
    let st = &nodes[start..start + STENCIL];
    let center = st[STENCIL / 2].z;
    let scale = st
        .iter()
        .map(|n| (n.z - center).norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut a = [[Complex64::new(0.0, 0.0); 5]; 5];
    let mut rhs = [Complex64::new(0.0, 0.0); 5];
    for (row, n) in st.iter().enumerate() {
        let t = (n.z - center) / scale;
        a[row] = [Complex64::new(1.0, 0.0), t, t * t, -n.value * t, -n.value * t * t];
        rhs[row] = n.value;
    }
    let x = solve5(a, rhs);
    let num = [x[0], x[1], x[2]];
    let den = [x[3], x[4]];
    let finite = x.iter().all(|v| v.is_finite());
    let mut fallback = !finite;
    if finite {
        let theta_lo = st[0].theta;
        let theta_hi = st[STENCIL - 1].theta;
        let spacing = (theta_hi - theta_lo) / (STENCIL - 1) as f64;
        let mid = 0.5 * (theta_lo + theta_hi);
        let half = 0.5 * (theta_hi - theta_lo);
        for r in quadratic_roots(den[0], den[1]) {
            let zr = center + scale * r;
            let radial = (zr.norm() - 1.0).abs();
            let ang = wrap_pi(zr.arg() - mid).abs();
            if radial < ROOT_GUARD * spacing && ang <= half + ROOT_GUARD * spacing {
                fallback = true;
            }
        }
    }
    LocalRational { start, center, scale, num, den, fallback }
}

fn linear_at(nodes: &[Node], j: usize, theta: f64) -> Complex64 {
    let (a, b) = (&nodes[j], &nodes[j + 1]);
    let w = (theta - a.theta) / (b.theta - a.theta);
    a.value + (b.value - a.value) * w
}

/// Interpolates `nodes` (sorted by angle, at least two) at `targets`
/// `(theta, z)`, which must be sorted by angle. Targets outside the node
/// range are extrapolated from the edge segment or stencil.
pub fn interpolate(nodes: &[Node], targets: &[(f64, Complex64)], method: InterpMethod) -> Vec<Complex64> {
    let n = nodes.len();
    assert!(n >= 2, "need at least two nodes");
    let mut out = Vec::with_capacity(targets.len());
    let mut j = 0usize;
    let mut cached: Option<LocalRational> = None;
    for &(theta, z) in targets {
        while j + 2 < n && nodes[j + 1].theta <= theta {
            j += 1;
        }
        if method == InterpMethod::Linear || n < STENCIL {
            out.push(linear_at(nodes, j, theta));
            continue;
        }
        let (mut lo, mut hi) = (j, j + 1);
        while hi - lo + 1 < STENCIL {
            let take_left = lo > 0
                && (hi == n - 1 || theta - nodes[lo - 1].theta <= nodes[hi + 1].theta - theta);
            if take_left {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        if cached.as_ref().map(|c| c.start) != Some(lo) {
            cached = Some(fit_local(nodes, lo));
        }
        let local = cached.as_ref().expect("stencil fitted");
        if local.fallback {
            out.push(linear_at(nodes, j, theta));
        } else {
            out.push(local.eval(z));
        }
    }
    out
}

/// Number of stencils that fell back to linear interpolation, for diagnostics.
pub fn count_fallbacks(nodes: &[Node]) -> usize {
    if nodes.len() < STENCIL {
        return 0;
    }
    (0..=nodes.len() - STENCIL).filter(|&s| fit_local(nodes, s).fallback).count()
}
