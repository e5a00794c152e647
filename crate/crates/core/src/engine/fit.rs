//! Damped-sinusoid fit `v(t) = v_max·e^(−λt)·cos(ωt + θ) + offset`.
//!
//! Variable projection: for fixed (ω, λ) the amplitude and phase follow from
//! a 2×2 linear least-squares problem, so Levenberg–Marquardt only searches
//! the two nonlinear parameters.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub v_max: f64,
    /// Angular frequency (rad/s).
    pub omega: f64,
    pub theta: f64,
    /// Decay rate (1/s).
    pub lambda: f64,
    /// RMS fit error (V).
    pub residual: f64,
}

impl DecayFit {
    pub fn frequency(&self) -> f64 {
        self.omega / (2.0 * PI)
    }

    pub fn eval(&self, t: f64, offset: f64) -> f64 {
        self.v_max * (-self.lambda * t).exp() * (self.omega * t + self.theta).cos() + offset
    }
}

/// Sum of squares and the linear coefficients (a, b) of a·e^(−λt)cos ωt + b·e^(−λt)sin ωt.
fn project(t: &[f64], y: &[f64], omega: f64, lambda: f64) -> (f64, f64, f64) {
    let (mut scc, mut sss, mut scs, mut syc, mut sys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let env = (-lambda * ti).exp();
        let c = env * (omega * ti).cos();
        let s = env * (omega * ti).sin();
        scc += c * c;
        sss += s * s;
        scs += c * s;
        syc += yi * c;
        sys += yi * s;
    }
    let det = scc * sss - scs * scs;
    if det.abs() < 1e-300 {
        return (f64::INFINITY, 0.0, 0.0);
    }
    let a = (syc * sss - sys * scs) / det;
    let b = (sys * scc - syc * scs) / det;
    let mut sse = 0.0;
    for (&ti, &yi) in t.iter().zip(y) {
        let env = (-lambda * ti).exp();
        let r = yi - env * (a * (omega * ti).cos() + b * (omega * ti).sin());
        sse += r * r;
    }
    (sse, a, b)
}

fn residuals(t: &[f64], y: &[f64], omega: f64, lambda: f64) -> Vec<f64> {
    let (_, a, b) = project(t, y, omega, lambda);
    t.iter()
        .zip(y)
        .map(|(&ti, &yi)| yi - (-lambda * ti).exp() * (a * (omega * ti).cos() + b * (omega * ti).sin()))
        .collect()
}

/// Fits samples `(t, v)` around a known `offset` (the source voltage).
///
/// Needs at least three oscillation periods; time is measured from the first sample.
pub fn fit_decay(t: &[f64], v: &[f64], offset: f64) -> Result<DecayFit> {
    if t.len() != v.len() || t.len() < 16 {
        return Err(Error::Fit("need at least 16 matched samples".into()));
    }
    let t0 = t[0];
    let ts: Vec<f64> = t.iter().map(|&x| x - t0).collect();
    let y: Vec<f64> = v.iter().map(|&x| x - offset).collect();
    let span = ts[ts.len() - 1];

    // Initial ω from sign changes, λ from the amplitude envelope.
    let crossings: Vec<f64> = ts
        .windows(2)
        .zip(y.windows(2))
        .filter(|(_, w)| w[0] * w[1] < 0.0 || (w[0] == 0.0 && w[1] != 0.0))
        .map(|(tw, w)| tw[0] + (tw[1] - tw[0]) * w[0] / (w[0] - w[1]))
        .collect();
    if crossings.len() < 6 {
        return Err(Error::Fit(format!(
            "segment is not oscillatory around the offset ({} crossings)",
            crossings.len()
        )));
    }
    let half_periods = (crossings.len() - 1) as f64;
    let mut omega = PI * half_periods / (crossings[crossings.len() - 1] - crossings[0]);
    if omega * span < 3.0 * 2.0 * PI * 0.95 {
        return Err(Error::Fit("segment spans fewer than three periods".into()));
    }
    let quarter = ts.len() / 4;
    let amp = |s: &[f64]| s.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let (a0, a1) = (amp(&y[..quarter]), amp(&y[ts.len() - quarter..]));
    let mut lambda = if a0 > 0.0 && a1 > 0.0 {
        ((a0 / a1).ln() / (0.75 * span)).max(0.0)
    } else {
        0.0
    };

    // Levenberg–Marquardt on (ω, λ) with scaled finite differences.
    let mut sse = project(&ts, &y, omega, lambda).0;
    let mut mu = 1e-3;
    let scale = [omega, omega.max(1.0 / span)];
    for _ in 0..200 {
        let r = residuals(&ts, &y, omega, lambda);
        let mut jac = [vec![0.0; ts.len()], vec![0.0; ts.len()]];
        for (k, col) in jac.iter_mut().enumerate() {
            let h = 1e-7 * scale[k];
            let (o, l) = if k == 0 { (omega + h, lambda) } else { (omega, lambda + h) };
            let rp = residuals(&ts, &y, o, l);
            for i in 0..ts.len() {
                col[i] = (rp[i] - r[i]) / h * scale[k];
            }
        }
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for i in 0..ts.len() {
            for p in 0..2 {
                jtr[p] += jac[p][i] * r[i];
                for q in 0..2 {
                    jtj[p][q] += jac[p][i] * jac[q][i];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let m00 = jtj[0][0] * (1.0 + mu);
            let m11 = jtj[1][1] * (1.0 + mu);
            let det = m00 * m11 - jtj[0][1] * jtj[1][0];
            if det.abs() < 1e-300 {
                mu *= 10.0;
                continue;
            }
            let d0 = -(jtr[0] * m11 - jtr[1] * jtj[0][1]) / det;
            let d1 = -(jtr[1] * m00 - jtr[0] * jtj[1][0]) / det;
            let (o, l) = (omega + d0 * scale[0], lambda + d1 * scale[1]);
            let s = project(&ts, &y, o, l).0;
            if s < sse {
                let rel = (sse - s) / sse.max(1e-300);
                omega = o;
                lambda = l;
                sse = s;
                mu = (mu / 3.0).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    if !omega.is_finite() || omega <= 0.0 {
        return Err(Error::Fit("did not converge".into()));
    }
    let (sse, a, b) = project(&ts, &y, omega, lambda);
    // a·cos + b·sin = R·cos(ωt + θ) with R = √(a²+b²), θ = atan2(−b, a).
    let v_max = a.hypot(b);
    let theta = (-b).atan2(a);
    Ok(DecayFit {
        v_max,
        omega,
        theta,
        lambda,
        residual: (sse / ts.len() as f64).sqrt(),
    })
}
