//! Reference eigenvalues computed without the transfer machinery: Numerov
//! shooting on a uniform grid, the harmonic oscillator in closed form, and
//! the transcendental conditions of the finite square well.

use crate::error::{Error, Result};
use crate::potential::SegmentedPotential;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Numerov,
    AnalyticHarmonic,
    AnalyticWell,
}

impl OracleMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            OracleMethod::Numerov => "numerov",
            OracleMethod::AnalyticHarmonic => "analytic_harmonic",
            OracleMethod::AnalyticWell => "analytic_well",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub eigenvalue: f64,
    pub method: OracleMethod,
    /// Grid step for Numerov, 0 for closed forms.
    pub grid_step: f64,
    pub nodes: usize,
}

impl OracleResult {
    pub fn analytic(eigenvalue: f64, method: OracleMethod) -> Self {
        OracleResult {
            eigenvalue,
            method,
            grid_step: 0.0,
            nodes: 0,
        }
    }
}

/// Potential sampled at the nodes of a uniform grid. Nodes landing on a
/// segment boundary take the mean of the two adjacent values.
struct NumerovGrid {
    h: f64,
    v: Vec<f64>,
    matching: usize,
}

impl NumerovGrid {
    fn new(p: &SegmentedPotential, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid step must be positive, got {step}"
            )));
        }
        let xs = p.boundaries();
        let vs = p.values();
        let n = vs.len();
        let span = xs[n] - xs[0];
        let mut m = (span / step).ceil().max(2.0) as usize;
        let w0 = xs[1] - xs[0];
        let uniform = xs
            .windows(2)
            .all(|w| ((w[1] - w[0]) - w0).abs() <= 1e-9 * w0);
        if uniform {
            m = m.div_ceil(n) * n;
        }
        let h = span / m as f64;
        let v: Vec<f64> = (0..=m)
            .map(|j| {
                let x = xs[0] + span * (j as f64 / m as f64);
                let i = xs.partition_point(|&b| b <= x).clamp(1, n) - 1;
                let tol = 1e-9 * h;
                if i > 0 && (x - xs[i]).abs() <= tol {
                    0.5 * (vs[i - 1] + vs[i])
                } else if i + 1 < n && (xs[i + 1] - x).abs() <= tol {
                    0.5 * (vs[i] + vs[i + 1])
                } else {
                    vs[i]
                }
            })
            .collect();
        let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let lowest: Vec<usize> = (1..m)
            .filter(|&j| v[j] <= vmin + 1e-12 * vmin.abs().max(1.0))
            .collect();
        let matching = if lowest.is_empty() {
            m / 2
        } else {
            lowest[lowest.len() / 2]
        };
        Ok(NumerovGrid { h, v, matching })
    }

    /// Casoratian of the solutions shot inward from both edges, evaluated
    /// at the matching node. It is conserved by the recurrence, continuous
    /// in `E`, and vanishes exactly at the grid eigenvalues.
    fn mismatch(&self, e: f64) -> f64 {
        let m = self.v.len() - 1;
        let h2 = self.h * self.h;
        // φ_{n+1} - 2φ_n + φ_{n-1} = c_n φ_n with φ = (1 - h²f/12)ψ, carried
        // in summed form (φ, Δφ) to keep roundoff from the g ≈ 2 recurrence down
        let c = |j: usize| {
            let f = 2.0 * (self.v[j] - e);
            h2 * f / (1.0 - h2 * f / 12.0)
        };
        let rescale = |a: &mut f64, b: &mut f64| {
            let s = a.abs().max(b.abs());
            if s > 1e100 {
                *a /= s;
                *b /= s;
            }
        };
        // left: φ_0 = 0, Δφ = φ_1 - φ_0
        let (mut phi_l, mut d_l) = (0.0, 1e-10);
        for j in 1..=self.matching {
            phi_l += d_l;
            d_l += c(j) * phi_l;
            rescale(&mut phi_l, &mut d_l);
        }
        // right: φ_m = 0, Δφ = φ_{n-1} - φ_n
        let (mut phi_r, mut d_r) = (0.0, 1e-10);
        for j in (self.matching + 1..m).rev() {
            phi_r += d_r;
            d_r += c(j) * phi_r;
            rescale(&mut phi_r, &mut d_r);
        }
        // at the last right step phi_r = φR_{matching+1}, d_r = φR_matching - φR_{matching+1};
        // on the left phi_l = φL_matching, d_l = φL_{matching+1} - φL_matching
        let (l0, l1) = (phi_l, phi_l + d_l);
        let (r1, r0) = (phi_r, phi_r + d_r);
        let w = l0 * r1 - l1 * r0;
        let norm = (l0.abs() + l1.abs()) * (r0.abs() + r1.abs());
        if norm == 0.0 {
            0.0
        } else {
            w / norm
        }
    }
}

/// Numerov shooting from both domain edges with `Ψ = 0` there, bisected on
/// the sign of the matching mismatch until the bracket is at most `tol`.
pub fn numerov_eigen(
    p: &SegmentedPotential,
    bracket: (f64, f64),
    grid_step: f64,
    tol: f64,
) -> Result<OracleResult> {
    let grid = NumerovGrid::new(p, grid_step)?;
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bad bracket [{lo}, {hi}] or tolerance {tol}"
        )));
    }
    let (f_lo, f_hi) = (grid.mismatch(lo), grid.mismatch(hi));
    if f_lo == 0.0 {
        hi = lo;
    } else if f_hi == 0.0 {
        lo = hi;
    } else if f_lo.signum() == f_hi.signum() {
        return Err(Error::InvalidBracket { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = grid.mismatch(mid);
        if f == 0.0 {
            lo = mid;
            hi = mid;
        } else if f.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(OracleResult {
        eigenvalue: 0.5 * (lo + hi),
        method: OracleMethod::Numerov,
        grid_step: grid.h,
        nodes: grid.v.len(),
    })
}

/// All Numerov eigenvalues in `[e_min, e_max]`, bracketed on a uniform
/// energy grid of `steps` intervals.
pub fn numerov_spectrum(
    p: &SegmentedPotential,
    e_min: f64,
    e_max: f64,
    steps: usize,
    grid_step: f64,
    tol: f64,
) -> Result<Vec<OracleResult>> {
    if !(e_min < e_max) || steps < 2 {
        return Err(Error::InvalidArgument(format!(
            "bad energy range [{e_min}, {e_max}] / {steps}"
        )));
    }
    let grid = NumerovGrid::new(p, grid_step)?;
    let es: Vec<f64> = (0..=steps)
        .map(|i| e_min + (e_max - e_min) * (i as f64 / steps as f64))
        .collect();
    let fs: Vec<f64> = es.iter().map(|&e| grid.mismatch(e)).collect();
    let mut out = Vec::new();
    for i in 0..steps {
        if fs[i] == 0.0 {
            out.push(OracleResult {
                eigenvalue: es[i],
                method: OracleMethod::Numerov,
                grid_step: grid.h,
                nodes: grid.v.len(),
            });
        } else if fs[i + 1] != 0.0 && fs[i].signum() != fs[i + 1].signum() {
            out.push(numerov_eigen(p, (es[i], es[i + 1]), grid_step, tol)?);
        }
    }
    Ok(out)
}

/// Level `n` of `V = x²/2`: energy `n + ½` and the normalized Hermite
/// function, evaluated by the three-term recurrence.
pub fn analytic_harmonic(n: usize) -> (f64, impl Fn(f64) -> f64 + Copy + Send + Sync) {
    let psi = move |x: f64| {
        let mut prev = 0.0;
        let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
        for k in 0..n {
            let kf = k as f64;
            let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
        }
        cur
    };
    (n as f64 + 0.5, psi)
}

/// Bound-state energies of a well `V = 0` for `|x| < width/2`, `depth`
/// outside, from the even and odd matching conditions
/// `k·sin(kL) = κ·cos(kL)` and `k·cos(kL) = -κ·sin(kL)`.
pub fn analytic_finite_well(depth: f64, width: f64) -> Result<Vec<f64>> {
    if !(depth > 0.0 && width > 0.0 && depth.is_finite() && width.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "depth and width must be positive, got {depth}, {width}"
        )));
    }
    let half = 0.5 * width;
    let kmax = (2.0 * depth).sqrt();
    let even = |e: f64| {
        let (k, q) = ((2.0 * e).sqrt(), (2.0 * (depth - e)).sqrt());
        k * (k * half).sin() - q * (k * half).cos()
    };
    let odd = |e: f64| {
        let (k, q) = ((2.0 * e).sqrt(), (2.0 * (depth - e)).sqrt());
        k * (k * half).cos() + q * (k * half).sin()
    };
    // uniform in k so the low end is resolved as finely as the top
    let samples = 2000 * (2 + (kmax * half).ceil() as usize);
    let es: Vec<f64> = (1..samples)
        .map(|i| {
            let k = kmax * i as f64 / samples as f64;
            0.5 * k * k
        })
        .collect();
    let mut roots = Vec::new();
    for f in [&even as &dyn Fn(f64) -> f64, &odd] {
        let vals: Vec<f64> = es.iter().map(|&e| f(e)).collect();
        for i in 0..es.len() - 1 {
            if vals[i] == 0.0 {
                roots.push(es[i]);
            } else if vals[i].signum() != vals[i + 1].signum() && vals[i + 1] != 0.0 {
                let (mut lo, mut hi) = (es[i], es[i + 1]);
                let s_lo = vals[i].signum();
                loop {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if f(mid).signum() == s_lo {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
        }
        // a root in the last sampling cell below the threshold
        let last = *es.last().unwrap_or(&0.0);
        let top = depth * (1.0 - 1e-15);
        if f(last).signum() != f(top).signum() && f(top) != 0.0 {
            let (mut lo, mut hi) = (last, top);
            let s_lo = f(lo).signum();
            while hi - lo > 1e-15 * depth {
                let mid = 0.5 * (lo + hi);
                if f(mid).signum() == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub cetm: f64,
    pub oracle: f64,
    pub method: OracleMethod,
    pub abs_diff: f64,
    pub rel_diff: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Pass iff `|cetm - oracle| <= tol`.
pub fn compare(cetm: f64, oracle: &OracleResult, tol: f64) -> Comparison {
    let abs_diff = (cetm - oracle.eigenvalue).abs();
    let scale = oracle.eigenvalue.abs();
    Comparison {
        cetm,
        oracle: oracle.eigenvalue,
        method: oracle.method,
        abs_diff,
        rel_diff: if scale > 0.0 {
            abs_diff / scale
        } else {
            abs_diff
        },
        tol,
        pass: abs_diff <= tol,
    }
}
