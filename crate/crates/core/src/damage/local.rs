use crate::constitutive::{Degradation, Softening};

use super::DamageError;

/// Element-wise minimizer of `f(d) = g(d) e+ + Yc h(d)` on `[d_n, 1]`.
#[derive(Clone, Copy, Debug)]
pub struct LocalSolver {
    pub degradation: Degradation,
    pub softening: Softening,
    pub tol: f64,
}

impl Default for LocalSolver {
    fn default() -> Self {
        Self {
            degradation: Degradation::default(),
            softening: Softening::default(),
            tol: 1e-12,
        }
    }
}

impl LocalSolver {
    pub fn solve(&self, e_plus: f64, d_n: f64, yc: f64) -> Result<f64, DamageError> {
        if !(e_plus >= 0.0) || !e_plus.is_finite() {
            return Err(DamageError::InvalidInput(format!("e_plus must be finite and non-negative, got {e_plus}")));
        }
        if !(0.0..=1.0).contains(&d_n) {
            return Err(DamageError::InvalidInput(format!("d_n must lie in [0, 1], got {d_n}")));
        }
        if !(yc > 0.0) {
            return Err(DamageError::InvalidInput(format!("Yc must be positive, got {yc}")));
        }
        let (g, h) = (self.degradation, self.softening);
        let df = |d: f64| g.derivative(d) * e_plus + yc * h.derivative(d);
        let ddf = |d: f64| g.second_derivative(d) * e_plus + yc * h.second_derivative(d);

        if df(d_n) >= 0.0 {
            return Ok(d_n);
        }
        if df(1.0) <= 0.0 {
            return Ok(1.0);
        }
        // f' < 0 at lo, > 0 at hi; f' increasing
        let (mut lo, mut hi) = (d_n, 1.0);
        let mut d = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fp = df(d);
            if fp < 0.0 {
                lo = d;
            } else {
                hi = d;
            }
            let newton = d - fp / ddf(d);
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (next - d).abs() <= self.tol || hi - lo <= self.tol {
                d = next;
                break;
            }
            d = next;
        }
        Ok(d.clamp(d_n, 1.0))
    }
}

/// [`LocalSolver`] with the default degradation/softening and tolerance.
pub fn local_damage_solve(e_plus: f64, d_n: f64, yc: f64) -> Result<f64, DamageError> {
    LocalSolver::default().solve(e_plus, d_n, yc)
}
