//! Implicit trapezoidal stepping.

use nalgebra::{DMatrix, DVector};

use super::system::PhaseSystem;
use crate::error::{Error, Result};

/// One trapezoidal step of `sys` from `x` over `[t, t + dt]`.
///
/// `u0`/`u1` are the input values at the step ends (ignored when the
/// system has no input).
pub fn advance(x: &DVector<f64>, sys: &PhaseSystem, dt: f64, u0: f64, u1: f64) -> Result<DVector<f64>> {
    if !(dt > 0.0) {
        return Err(Error::domain("advance", format!("dt must be positive, got {dt}")));
    }
    let n = sys.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let lhs = &id - &sys.a * (0.5 * dt);
    let mut rhs = (&id + &sys.a * (0.5 * dt)) * x + &sys.b * dt;
    if let Some(e) = &sys.input {
        rhs += e * (0.5 * dt * (u0 + u1));
    }
    lhs.lu().solve(&rhs).ok_or_else(|| Error::Singular {
        context: "trapezoidal step".into(),
    })
}

/// Precomputed trapezoidal map x' = M·x + c + d·(u0 + u1) for a fixed dt.
#[derive(Debug, Clone)]
pub struct Propagator {
    n: usize,
    m: Vec<f64>,
    c: Vec<f64>,
    d: Option<Vec<f64>>,
}

impl Propagator {
    pub fn new(sys: &PhaseSystem, dt: f64) -> Result<Self> {
        Self::from_parts(&sys.a, &sys.b, sys.input.as_ref(), dt)
    }

    /// Propagator of dx/dt = A·x + b + e·u(t).
    pub fn from_parts(a: &DMatrix<f64>, b: &DVector<f64>, input: Option<&DVector<f64>>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::domain("Propagator", format!("dt must be positive, got {dt}")));
        }
        let n = a.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        let lhs = &id - a * (0.5 * dt);
        let lu = lhs.lu();
        let singular = || Error::Singular {
            context: "propagator".into(),
        };
        let m = lu.solve(&(&id + a * (0.5 * dt))).ok_or_else(singular)?;
        let c = lu.solve(&(b * dt)).ok_or_else(singular)?;
        let d = match input {
            Some(e) => Some(lu.solve(&(e * (0.5 * dt))).ok_or_else(singular)?.as_slice().to_vec()),
            None => None,
        };
        // Row-major copy for the inner loop.
        let mut rows = vec![0.0; n * n];
        for r in 0..n {
            for k in 0..n {
                rows[r * n + k] = m[(r, k)];
            }
        }
        Ok(Propagator {
            n,
            m: rows,
            c: c.as_slice().to_vec(),
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Writes the next state into `out`.
    #[inline]
    pub fn step(&self, x: &[f64], u0: f64, u1: f64, out: &mut [f64]) {
        let n = self.n;
        for r in 0..n {
            let row = &self.m[r * n..(r + 1) * n];
            let mut acc = self.c[r];
            for k in 0..n {
                acc += row[k] * x[k];
            }
            if let Some(d) = &self.d {
                acc += d[r] * (u0 + u1);
            }
            out[r] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::system::{build_phase_system, Drive, SwitchState};
    use crate::model::CircuitConfig;
    use std::f64::consts::PI;

    fn lossless_cfg() -> CircuitConfig {
        let mut cfg = CircuitConfig::default().without_parasitics();
        cfg.pc.q_inductor = f64::INFINITY;
        cfg
    }

    #[test]
    fn zero_system_leaves_state_unchanged() {
        let mut cfg = lossless_cfg();
        cfg.pc.l_pc = f64::INFINITY;
        cfg.pc.v_dc = 0.0;
        let sys = build_phase_system(&cfg, &SwitchState::all_off(4), Drive::Floating).unwrap();
        assert!(sys.a.iter().all(|&v| v == 0.0));
        let x = DVector::from_vec(vec![0.0, 0.3, 0.7]);
        let y = advance(&x, &sys, 1e-9, 0.0, 0.0).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn lossless_lc_returns_after_one_period() {
        let cfg = lossless_cfg();
        let sys = build_phase_system(&cfg, &SwitchState::all_off(4), Drive::Resonant).unwrap();
        let f = crate::model::resonant_frequency(cfg.pc.l_pc, sys.c_pc).unwrap();
        let steps = 4096;
        let dt = 1.0 / f / steps as f64;
        let p = Propagator::new(&sys, dt).unwrap();
        let x0 = vec![0.0, 0.0, 0.7];
        let mut x = x0.clone();
        let mut y = vec![0.0; 3];
        for _ in 0..steps {
            p.step(&x, 0.0, 0.0, &mut y);
            std::mem::swap(&mut x, &mut y);
        }
        // Amplitude of the current is V_dc/Z; compare relative to it.
        let i_scale = 0.9 / (cfg.pc.l_pc / sys.c_pc).sqrt();
        assert!((x[0] - x0[0]).abs() / i_scale < 1e-4, "{:?}", x);
        assert!((x[1] - x0[1]).abs() / 0.9 < 1e-4, "{:?}", x);
        // The trapezoidal map is a Cayley transform: ½LI² + ½C(V−V_dc)² is invariant.
        let e = |x: &[f64]| 0.5 * cfg.pc.l_pc * x[0] * x[0] + 0.5 * sys.c_pc * (x[1] - 0.9).powi(2);
        assert!((e(&x) - e(&x0)).abs() / e(&x0) < 1e-12);
        let _ = PI;
    }

    #[test]
    fn rc_discharge_matches_closed_form() {
        let cfg = lossless_cfg();
        let sw = SwitchState {
            bypass_on: true,
            ..SwitchState::all_off(4)
        };
        let sys = build_phase_system(&cfg, &sw, Drive::Floating).unwrap();
        let tau = cfg.r_pc() * sys.c_pc;
        let dt = tau / 100.0;
        let p = Propagator::new(&sys, dt).unwrap();
        let mut x = vec![0.0, 0.045, 0.7];
        let mut y = vec![0.0; 3];
        for _ in 0..500 {
            p.step(&x, 0.0, 0.0, &mut y);
            std::mem::swap(&mut x, &mut y);
        }
        let exact = 0.045 * (-5.0f64).exp();
        assert!(((x[1] - exact) / exact).abs() < 1e-4, "{} vs {}", x[1], exact);
    }

    #[test]
    fn propagator_agrees_with_advance() {
        let cfg = CircuitConfig::default();
        let sw = SwitchState {
            bypass_on: false,
            reset_on: true,
            synapse_on: vec![true, true, false, false],
        };
        let sys = build_phase_system(&cfg, &sw, Drive::Resonant).unwrap();
        let dt = 1e-9;
        let x = DVector::from_vec(vec![2e-5, 0.3, 0.25, 0.8]);
        let a = advance(&x, &sys, dt, 0.0, 0.0).unwrap();
        let p = Propagator::new(&sys, dt).unwrap();
        let mut b = vec![0.0; 4];
        p.step(x.as_slice(), 0.0, 0.0, &mut b);
        for k in 0..4 {
            assert!((a[k] - b[k]).abs() <= 1e-12 * (1.0 + a[k].abs()), "{k}: {} vs {}", a[k], b[k]);
        }
        assert!(advance(&x, &sys, 0.0, 0.0, 0.0).is_err());
    }
}
